//! Benchmark data: the adding problem, spike-event ingestion and binning,
//! and a small delay-discrimination classification task.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::training::{Sample, Target};

/// Default number of time bins for event data.
pub const DEFAULT_BINS: usize = 250;

#[derive(Debug, Clone, PartialEq)]
pub struct AddingSample {
    pub values: Vec<f64>,
    pub markers: Vec<f64>,
    pub target: f64,
}

/// Adding-problem sequences of length `steps`: uniform values in [0, 1],
/// one marker in each half, target is the sum of the two marked values.
pub fn gen_adding(steps: usize, count: usize, seed: u64) -> Result<Vec<AddingSample>> {
    if steps < 2 || steps % 2 != 0 {
        return Err(Error::Config(format!(
            "adding sequences need an even length of at least 2, got {steps}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let half = steps / 2;
    Ok((0..count)
        .map(|_| {
            let values: Vec<f64> = (0..steps).map(|_| rng.gen::<f64>()).collect();
            let first = rng.gen_range(0..half);
            let second = rng.gen_range(half..steps);
            let mut markers = vec![0.0; steps];
            markers[first] = 1.0;
            markers[second] = 1.0;
            AddingSample {
                target: values[first] + values[second],
                values,
                markers,
            }
        })
        .collect())
}

/// Two input channels: the value stream and the marker stream.
pub fn encode_adding(sample: &AddingSample) -> Array2<f64> {
    let steps = sample.values.len();
    Array2::from_shape_fn((steps, 2), |(t, c)| if c == 0 { sample.values[t] } else { sample.markers[t] })
}

impl AddingSample {
    pub fn to_sample(&self) -> Sample {
        Sample {
            input: encode_adding(self),
            target: Target::Regression(self.target),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpikeEvent {
    /// Seconds or bin index, in the same unit as the set's duration.
    pub time: f64,
    pub channel: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpikeEventSet {
    pub events: Vec<SpikeEvent>,
    pub num_channels: usize,
    pub duration: f64,
    pub label: Option<usize>,
}

impl SpikeEventSet {
    pub fn validate(&self) -> Result<()> {
        if !(self.duration > 0.0) {
            return Err(Error::Data(format!("event duration must be positive, got {}", self.duration)));
        }
        for e in &self.events {
            if e.channel >= self.num_channels {
                return Err(Error::Data(format!(
                    "event channel {} outside {} channels",
                    e.channel, self.num_channels
                )));
            }
            if !(e.time >= 0.0 && e.time < self.duration) {
                return Err(Error::Data(format!(
                    "event time {} outside [0, {})",
                    e.time, self.duration
                )));
            }
        }
        Ok(())
    }
}

/// Binary `T x C` spike raster.
#[derive(Debug, Clone, PartialEq)]
pub struct Raster(pub Array2<f64>);

impl Raster {
    pub fn bins(&self) -> usize {
        self.0.nrows()
    }

    pub fn channels(&self) -> usize {
        self.0.ncols()
    }

    pub fn into_input(self) -> Array2<f64> {
        self.0
    }
}

/// Bins events into `bins` equal slices of the set's duration. A bin holds
/// 1 when at least one event of the channel falls inside it.
pub fn bin_events(set: &SpikeEventSet, bins: usize) -> Result<Raster> {
    if bins == 0 {
        return Err(Error::Config("number of time bins must be positive".into()));
    }
    set.validate()?;
    let mut r = Array2::zeros((bins, set.num_channels));
    for e in &set.events {
        let b = ((e.time / set.duration) * bins as f64).floor() as usize;
        r[[b.min(bins - 1), e.channel]] = 1.0;
    }
    Ok(Raster(r))
}

pub fn event_sample(set: &SpikeEventSet, bins: usize) -> Result<Sample> {
    let label = set
        .label
        .ok_or_else(|| Error::Data("event set has no label".into()))?;
    Ok(Sample {
        input: bin_events(set, bins)?.into_input(),
        target: Target::Class(label),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DelayXorOptions {
    pub channels: usize,
    /// Maximum absolute jitter added to the gap, in bins.
    pub jitter: usize,
}

impl Default for DelayXorOptions {
    fn default() -> Self {
        Self { channels: 4, jitter: 1 }
    }
}

/// Two spikes on one randomly chosen channel whose separation identifies the
/// class (`gaps[label]`, plus uniform jitter). Classes are assigned round
/// robin before shuffling, so class counts differ by at most one.
pub fn gen_delay_xor(
    steps: usize,
    gaps: &[usize],
    count: usize,
    seed: u64,
    opts: &DelayXorOptions,
) -> Result<Vec<SpikeEventSet>> {
    if gaps.is_empty() {
        return Err(Error::Config("at least one gap class is required".into()));
    }
    if opts.channels == 0 {
        return Err(Error::Config("at least one channel is required".into()));
    }
    for &g in gaps {
        if g == 0 || g + opts.jitter >= steps || g <= opts.jitter {
            return Err(Error::Config(format!(
                "gap {g} with jitter {} does not fit in {steps} steps",
                opts.jitter
            )));
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut labels: Vec<usize> = (0..count).map(|i| i % gaps.len()).collect();
    labels.shuffle(&mut rng);
    let j = opts.jitter as i64;
    Ok(labels
        .into_iter()
        .map(|label| {
            let gap = (gaps[label] as i64 + rng.gen_range(-j..=j)) as usize;
            let start = rng.gen_range(0..steps - gap);
            let channel = rng.gen_range(0..opts.channels);
            SpikeEventSet {
                events: vec![
                    SpikeEvent { time: start as f64, channel },
                    SpikeEvent {
                        time: (start + gap) as f64,
                        channel,
                    },
                ],
                num_channels: opts.channels,
                duration: steps as f64,
                label: Some(label),
            }
        })
        .collect())
}

/// Writes `# label=..`, optional metadata comments, a `time_bin,channel`
/// header and one event per line. Times must be whole bins.
pub fn write_events_csv(path: &Path, set: &SpikeEventSet, seed: Option<u64>) -> Result<()> {
    let mut out = Vec::new();
    let io = |e| Error::io(path, e);
    writeln!(out, "# label={}", set.label.map_or(-1, |l| l as i64)).map_err(io)?;
    writeln!(out, "# channels={}", set.num_channels).map_err(io)?;
    writeln!(out, "# bins={}", set.duration).map_err(io)?;
    if let Some(s) = seed {
        writeln!(out, "# seed={s}").map_err(io)?;
    }
    let mut w = csv::Writer::from_writer(&mut out);
    w.write_record(["time_bin", "channel"]).map_err(|e| Error::Data(e.to_string()))?;
    for e in &set.events {
        if e.time.fract() != 0.0 {
            return Err(Error::Data(format!("event time {} is not a whole bin", e.time)));
        }
        w.write_record([(e.time as u64).to_string(), e.channel.to_string()])
            .map_err(|e| Error::Data(e.to_string()))?;
    }
    drop(w);
    fs::write(path, out).map_err(io)
}

fn comment_value<'a>(comments: &'a [String], key: &str) -> Option<&'a str> {
    comments
        .iter()
        .find_map(|c| c.trim_start_matches('#').trim().strip_prefix(key)?.strip_prefix('='))
        .map(str::trim)
}

fn split_comments(text: &str) -> (Vec<String>, String) {
    let mut comments = Vec::new();
    let mut body = String::new();
    for line in text.lines() {
        if line.trim_start().starts_with('#') {
            comments.push(line.to_string());
        } else {
            body.push_str(line);
            body.push('\n');
        }
    }
    (comments, body)
}

/// Reads an event file. Channel count and duration fall back to
/// `default_channels` and `default_bins` when the file does not state them.
pub fn read_events_csv(path: &Path, default_channels: Option<usize>, default_bins: Option<usize>) -> Result<SpikeEventSet> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let (comments, body) = split_comments(&text);
    let bad = |what: String| Error::Data(format!("{}: {what}", path.display()));
    let label = comment_value(&comments, "label")
        .ok_or_else(|| bad("missing `# label=<int>` comment".into()))?
        .parse::<i64>()
        .map_err(|e| bad(format!("label: {e}")))?;
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(body.as_bytes());
    let headers = rdr.headers().map_err(|e| bad(e.to_string()))?.clone();
    if headers.get(0) != Some("time_bin") || headers.get(1) != Some("channel") {
        return Err(bad(format!("expected header `time_bin,channel`, got {headers:?}")));
    }
    let mut events = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| bad(e.to_string()))?;
        let t: u64 = rec.get(0).unwrap_or("").parse().map_err(|e| bad(format!("time_bin: {e}")))?;
        let c: usize = rec.get(1).unwrap_or("").parse().map_err(|e| bad(format!("channel: {e}")))?;
        events.push(SpikeEvent { time: t as f64, channel: c });
    }
    let parse_opt = |key: &str| -> Result<Option<usize>> {
        comment_value(&comments, key)
            .map(|v| v.parse::<f64>().map(|x| x as usize).map_err(|e| bad(format!("{key}: {e}"))))
            .transpose()
    };
    let num_channels = parse_opt("channels")?
        .or(default_channels)
        .unwrap_or_else(|| events.iter().map(|e| e.channel + 1).max().unwrap_or(1));
    let duration = parse_opt("bins")?
        .or(default_bins)
        .unwrap_or_else(|| events.iter().map(|e| e.time as usize + 1).max().unwrap_or(1));
    let set = SpikeEventSet {
        events,
        num_channels,
        duration: duration as f64,
        label: (label >= 0).then_some(label as usize),
    };
    set.validate().map_err(|e| bad(e.to_string()))?;
    Ok(set)
}

/// Writes one adding sequence: `# target=..`, header `value,marker`.
pub fn write_adding_csv(path: &Path, sample: &AddingSample, seed: Option<u64>) -> Result<()> {
    let mut out = Vec::new();
    let io = |e| Error::io(path, e);
    writeln!(out, "# target={:?}", sample.target).map_err(io)?;
    if let Some(s) = seed {
        writeln!(out, "# seed={s}").map_err(io)?;
    }
    let mut w = csv::Writer::from_writer(&mut out);
    w.write_record(["value", "marker"]).map_err(|e| Error::Data(e.to_string()))?;
    for (v, m) in sample.values.iter().zip(&sample.markers) {
        w.write_record([format!("{v:?}"), format!("{}", *m as u8)])
            .map_err(|e| Error::Data(e.to_string()))?;
    }
    drop(w);
    fs::write(path, out).map_err(io)
}

pub fn read_adding_csv(path: &Path) -> Result<AddingSample> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let (comments, body) = split_comments(&text);
    let bad = |what: String| Error::Data(format!("{}: {what}", path.display()));
    let target: f64 = comment_value(&comments, "target")
        .ok_or_else(|| bad("missing `# target=` comment".into()))?
        .parse()
        .map_err(|e| bad(format!("target: {e}")))?;
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(body.as_bytes());
    let mut values = Vec::new();
    let mut markers = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| bad(e.to_string()))?;
        values.push(rec.get(0).unwrap_or("").parse::<f64>().map_err(|e| bad(format!("value: {e}")))?);
        markers.push(rec.get(1).unwrap_or("").parse::<f64>().map_err(|e| bad(format!("marker: {e}")))?);
    }
    Ok(AddingSample { values, markers, target })
}

/// Sorted `*.csv` files of a dataset directory.
pub fn dataset_files(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut files: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "csv"))
        .collect();
    files.sort();
    if files.is_empty() {
        return Err(Error::Data(format!("{} contains no .csv files", dir.display())));
    }
    Ok(files)
}

/// Splits labelled samples into train / test, keeping the given order.
pub fn split(samples: Vec<Sample>, test: usize) -> (Vec<Sample>, Vec<Sample>) {
    let mut train = samples;
    let test_set = train.split_off(train.len().saturating_sub(test));
    (train, test_set)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn adding_samples_are_well_formed() {
        let data = gen_adding(50, 200, 3).unwrap();
        for s in &data {
            assert_eq!(s.markers.iter().filter(|&&m| m == 1.0).count(), 2);
            let first = s.markers.iter().position(|&m| m == 1.0).unwrap();
            let second = s.markers.iter().rposition(|&m| m == 1.0).unwrap();
            assert!(first < 25 && second >= 25);
            assert_eq!(s.target, s.values[first] + s.values[second]);
            let dot: f64 = s.values.iter().zip(&s.markers).map(|(v, m)| v * m).sum();
            assert_eq!(dot, s.target);
            assert!(s.values.iter().all(|&v| (0.0..1.0).contains(&v)));
        }
        assert_eq!(gen_adding(50, 5, 3).unwrap(), gen_adding(50, 5, 3).unwrap());
        assert!(gen_adding(1, 5, 0).is_err());
        assert!(gen_adding(7, 5, 0).is_err());
    }

    #[test]
    fn adding_target_mean() {
        let data = gen_adding(4, 100_000, 11).unwrap();
        let mean = data.iter().map(|s| s.target).sum::<f64>() / data.len() as f64;
        assert!((mean - 1.0).abs() < 0.01, "mean {mean}");
    }

    #[test]
    fn adding_encoding_channels() {
        let s = &gen_adding(10, 1, 0).unwrap()[0];
        let x = encode_adding(s);
        assert_eq!(x.dim(), (10, 2));
        assert_eq!(x.column(0).to_vec(), s.values);
        assert_eq!(x.column(1).to_vec(), s.markers);
    }

    #[test]
    fn binning() {
        let empty = SpikeEventSet {
            events: vec![],
            num_channels: 3,
            duration: 1.0,
            label: Some(0),
        };
        assert!(bin_events(&empty, 10).unwrap().0.iter().all(|&x| x == 0.0));
        let twice = SpikeEventSet {
            events: vec![
                SpikeEvent { time: 0.51, channel: 1 },
                SpikeEvent { time: 0.55, channel: 1 },
            ],
            ..empty.clone()
        };
        let r = bin_events(&twice, 10).unwrap();
        assert_eq!(r.0[[5, 1]], 1.0);
        assert_eq!(r.0.sum(), 1.0);
        let outside = SpikeEventSet {
            events: vec![SpikeEvent { time: 1.0, channel: 0 }],
            ..empty.clone()
        };
        assert!(matches!(bin_events(&outside, 10), Err(Error::Data(_))));
        let bad_channel = SpikeEventSet {
            events: vec![SpikeEvent { time: 0.2, channel: 3 }],
            ..empty
        };
        assert!(bin_events(&bad_channel, 10).is_err());
    }

    #[test]
    fn binning_matches_histogram() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let set = SpikeEventSet {
            events: (0..300)
                .map(|_| SpikeEvent {
                    time: rng.gen_range(0.0..2.0),
                    channel: rng.gen_range(0..6),
                })
                .collect(),
            num_channels: 6,
            duration: 2.0,
            label: None,
        };
        let r = bin_events(&set, 40).unwrap();
        let mut hist = vec![vec![0usize; 6]; 40];
        for e in &set.events {
            let b = (e.time / 0.05) as usize;
            hist[b.min(39)][e.channel] += 1;
        }
        for t in 0..40 {
            for c in 0..6 {
                assert_eq!(r.0[[t, c]], if hist[t][c] > 0 { 1.0 } else { 0.0 });
            }
        }
    }

    #[test]
    fn delay_xor_balance_and_gaps() {
        let gaps = [5, 20];
        let sets = gen_delay_xor(64, &gaps, 101, 8, &DelayXorOptions { channels: 3, jitter: 0 }).unwrap();
        let mut counts = [0usize; 2];
        for s in &sets {
            let l = s.label.unwrap();
            counts[l] += 1;
            assert_eq!(s.events.len(), 2);
            assert_eq!(s.events[0].channel, s.events[1].channel);
            assert_eq!(s.events[1].time - s.events[0].time, gaps[l] as f64);
        }
        assert!(counts[0].abs_diff(counts[1]) <= 1);
        assert_eq!(sets, gen_delay_xor(64, &gaps, 101, 8, &DelayXorOptions { channels: 3, jitter: 0 }).unwrap());
        assert!(gen_delay_xor(20, &[25], 4, 0, &DelayXorOptions::default()).is_err());
    }

    #[test]
    fn delay_xor_jitter_bounds() {
        let gaps = [6, 18, 30, 42];
        let sets = gen_delay_xor(64, &gaps, 400, 1, &DelayXorOptions::default()).unwrap();
        for s in &sets {
            let g = (s.events[1].time - s.events[0].time) as i64;
            assert!((g - gaps[s.label.unwrap()] as i64).abs() <= 1);
            assert!(s.events[1].time < 64.0);
        }
    }

    #[test]
    fn csv_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let sets = gen_delay_xor(32, &[4, 9], 2, 0, &DelayXorOptions::default()).unwrap();
        let p = dir.path().join("a.csv");
        write_events_csv(&p, &sets[0], Some(7)).unwrap();
        let text = fs::read_to_string(&p).unwrap();
        assert!(text.starts_with("# label="));
        assert!(text.contains("time_bin,channel"));
        assert_eq!(read_events_csv(&p, None, None).unwrap(), sets[0]);

        let s = &gen_adding(8, 1, 2).unwrap()[0];
        let q = dir.path().join("b.csv");
        write_adding_csv(&q, s, Some(2)).unwrap();
        assert_eq!(&read_adding_csv(&q).unwrap(), s);
    }

    #[test]
    fn event_csv_requires_label() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("x.csv");
        fs::write(&p, "time_bin,channel\n1,0\n").unwrap();
        assert!(matches!(read_events_csv(&p, None, None), Err(Error::Data(_))));
        fs::write(&p, "# label=2\ntime_bin,channel\n3,1\n").unwrap();
        let s = read_events_csv(&p, Some(700), Some(250)).unwrap();
        assert_eq!((s.label, s.num_channels, s.duration), (Some(2), 700, 250.0));
    }
}
