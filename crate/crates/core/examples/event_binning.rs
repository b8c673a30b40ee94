//! Bins a continuous-time event recording into a binary raster, stores the
//! binned events as CSV and reads them back as a training sample.

use delaysnn::tasks::{bin_events, event_sample, read_events_csv, write_events_csv, SpikeEvent, SpikeEventSet};

const BINS: usize = 10;

fn main() -> delaysnn::Result<()> {
    let events = vec![
        SpikeEvent { time: 0.012, channel: 3 },
        SpikeEvent { time: 0.013, channel: 3 },
        SpikeEvent { time: 0.250, channel: 0 },
        SpikeEvent { time: 0.731, channel: 6 },
        SpikeEvent { time: 0.999, channel: 7 },
    ];
    let set = SpikeEventSet { events, num_channels: 8, duration: 1.0, label: Some(2) };
    let raster = bin_events(&set, BINS)?;
    for (k, row) in raster.0.rows().into_iter().enumerate() {
        let line: String = row.iter().map(|&v| if v > 0.0 { '|' } else { '.' }).collect();
        println!("bin {k:>2} {line}");
    }

    // the file format stores whole bin indices
    let binned = SpikeEventSet {
        events: raster
            .0
            .indexed_iter()
            .filter(|(_, &v)| v > 0.0)
            .map(|((k, c), _)| SpikeEvent { time: k as f64, channel: c })
            .collect(),
        num_channels: set.num_channels,
        duration: BINS as f64,
        label: set.label,
    };
    let dir = std::env::temp_dir().join("delaysnn_event_binning");
    std::fs::create_dir_all(&dir).map_err(|e| delaysnn::Error::io(&dir, e))?;
    let path = dir.join("sample.csv");
    write_events_csv(&path, &binned, Some(0))?;
    let back = read_events_csv(&path, None, None)?;
    let sample = event_sample(&back, BINS)?;
    assert_eq!(sample.input, raster.0);
    println!("{}: {} events, input shape {:?}, target {:?}", path.display(), back.events.len(), sample.input.dim(), sample.target);
    Ok(())
}
