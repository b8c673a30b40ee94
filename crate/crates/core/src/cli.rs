//! Command-line front end: dataset generation, training, pruning,
//! evaluation and cost estimation driven by a TOML run file.

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::checkpoint::{Checkpoint, CheckpointMeta};
use crate::error::{Error, Result};
use crate::hwcost::{self, presets, ActivityTrace, ArchSpec, CostReport, DelayMechanism, EnergyCoeffs};
use crate::network::NetworkSpec;
use crate::pruning::{prune_finetune_loop, PruneConfig};
use crate::tasks::{self, DelayXorOptions};
use crate::training::{evaluate, train, EpochMetrics, Hyperparams, Sample};

#[derive(Debug, Parser)]
#[command(name = "delaysnn", version, about = "Train, prune and cost spiking networks with axonal delays")]
pub struct Cli {
    /// Run file (TOML) describing task, network and training.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Seed for data generation and training; overrides the run file.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output directory; overrides the run file.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write the task's train and test sets as per-sample CSV files.
    Gen,
    /// Train the configured network and write a checkpoint and metrics.
    Train,
    /// Prune delays of a checkpoint, optionally refining and fine-tuning.
    Prune(PruneArgs),
    /// Evaluate a checkpoint and record its spiking activity.
    Eval(EvalArgs),
    /// Estimate memory and energy of a deployed model.
    Cost(CostArgs),
}

#[derive(Debug, Args)]
pub struct PruneArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    /// Keep this many delays per synapse; overrides the run file.
    #[arg(long)]
    pub keep: Option<usize>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    /// Directory of sample CSV files; defaults to the task's test set.
    #[arg(long)]
    pub data: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct CostArgs {
    /// Preset name (r1, r2, d1, d2, delayed-64, delayed-48), an
    /// architecture TOML file or a checkpoint JSON file.
    #[arg(long)]
    pub arch: String,
    /// Preset name or an activity CSV written by `eval`.
    #[arg(long)]
    pub activity: String,
    /// ring, queue or none.
    #[arg(long)]
    pub mechanism: Option<DelayMechanism>,
    /// Energy coefficients TOML; defaults to the bundled illustrative file.
    #[arg(long)]
    pub coeffs: Option<PathBuf>,
    /// Baseline to compute saving factors against (same forms as --arch;
    /// presets use their own activity).
    #[arg(long)]
    pub baseline: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum TaskConfig {
    Adding {
        steps: usize,
        train: usize,
        test: usize,
    },
    DelayXor {
        steps: usize,
        gaps: Vec<usize>,
        train: usize,
        test: usize,
        #[serde(default)]
        channels: Option<usize>,
        #[serde(default)]
        jitter: Option<usize>,
    },
    Events {
        train_dir: PathBuf,
        #[serde(default)]
        test_dir: Option<PathBuf>,
        #[serde(default = "default_bins")]
        bins: usize,
        #[serde(default)]
        channels: Option<usize>,
    },
}

fn default_bins() -> usize {
    tasks::DEFAULT_BINS
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CostConfig {
    #[serde(default)]
    pub mechanism: Option<DelayMechanism>,
    #[serde(default)]
    pub coeffs: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub out: Option<PathBuf>,
    pub task: TaskConfig,
    pub network: NetworkSpec,
    #[serde(default)]
    pub train: Hyperparams,
    #[serde(default)]
    pub prune: Option<PruneConfig>,
    #[serde(default)]
    pub cost: CostConfig,
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.network.validate()?;
        cfg.train.validate()?;
        if let Some(p) = &cfg.prune {
            p.validate()?;
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text).map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    /// Relative paths inside the file are taken relative to the file.
    fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        if let TaskConfig::Events { train_dir, test_dir, .. } = &mut self.task {
            fix(train_dir);
            if let Some(t) = test_dir {
                fix(t);
            }
        }
        if let Some(c) = &mut self.cost.coeffs {
            fix(c);
        }
    }
}

/// Train and test samples for a task. Generated tasks use `seed` for the
/// training set and `seed + 1` for the test set.
pub fn load_task(task: &TaskConfig, seed: u64) -> Result<(Vec<Sample>, Vec<Sample>)> {
    match task {
        TaskConfig::Adding { steps, train, test } => {
            let gen = |n, s| -> Result<Vec<Sample>> {
                Ok(tasks::gen_adding(*steps, n, s)?.iter().map(|a| a.to_sample()).collect())
            };
            Ok((gen(*train, seed)?, gen(*test, seed.wrapping_add(1))?))
        }
        TaskConfig::DelayXor {
            steps,
            gaps,
            train,
            test,
            channels,
            jitter,
        } => {
            let opts = delay_xor_options(*channels, *jitter);
            let gen = |n, s| -> Result<Vec<Sample>> {
                tasks::gen_delay_xor(*steps, gaps, n, s, &opts)?
                    .iter()
                    .map(|e| tasks::event_sample(e, *steps))
                    .collect()
            };
            Ok((gen(*train, seed)?, gen(*test, seed.wrapping_add(1))?))
        }
        TaskConfig::Events {
            train_dir,
            test_dir,
            bins,
            channels,
        } => {
            let train = read_event_dir(train_dir, *bins, *channels)?;
            let test = match test_dir {
                Some(d) => read_event_dir(d, *bins, *channels)?,
                None => train.clone(),
            };
            Ok((train, test))
        }
    }
}

fn delay_xor_options(channels: Option<usize>, jitter: Option<usize>) -> DelayXorOptions {
    let d = DelayXorOptions::default();
    DelayXorOptions {
        channels: channels.unwrap_or(d.channels),
        jitter: jitter.unwrap_or(d.jitter),
    }
}

fn read_event_dir(dir: &Path, bins: usize, channels: Option<usize>) -> Result<Vec<Sample>> {
    tasks::dataset_files(dir)?
        .iter()
        .map(|f| tasks::event_sample(&tasks::read_events_csv(f, channels, None)?, bins))
        .collect()
}

/// Reads a dataset directory in either sample format.
fn read_any_dir(dir: &Path, task: Option<&TaskConfig>) -> Result<Vec<Sample>> {
    match task {
        Some(TaskConfig::Adding { .. }) => tasks::dataset_files(dir)?
            .iter()
            .map(|f| Ok(tasks::read_adding_csv(f)?.to_sample()))
            .collect(),
        Some(TaskConfig::DelayXor { steps, .. }) => read_event_dir(dir, *steps, None),
        Some(TaskConfig::Events { bins, channels, .. }) => read_event_dir(dir, *bins, *channels),
        None => read_event_dir(dir, tasks::DEFAULT_BINS, None),
    }
}

/// Writes a CSV file with a `# seed=` comment and a header row.
pub fn write_csv(path: &Path, seed: u64, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
    let mut out = format!("# seed={seed}\n{}\n", header.join(","));
    for r in rows {
        out.push_str(&r.join(","));
        out.push('\n');
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

fn metrics_rows(metrics: &[EpochMetrics]) -> (Vec<String>, Vec<Vec<String>>) {
    let layers = metrics.first().map_or(0, |m| m.spikes_per_step.len());
    let mut header = vec!["epoch".to_string(), "loss".into(), "accuracy".into()];
    header.extend((0..layers).map(|l| format!("spikes_per_step_{l}")));
    let rows = metrics
        .iter()
        .map(|m| {
            let mut r = vec![
                m.epoch.to_string(),
                format!("{:?}", m.loss),
                m.accuracy.map_or(String::new(), |a| format!("{a:?}")),
            ];
            r.extend(m.spikes_per_step.iter().map(|s| format!("{s:?}")));
            r
        })
        .collect();
    (header, rows)
}

struct Ctx {
    config: Option<RunConfig>,
    seed: Option<u64>,
    out: PathBuf,
}

impl Ctx {
    fn new(cli: &Cli) -> Result<Self> {
        let config = match &cli.config {
            Some(p) => {
                let mut c = RunConfig::load(p)?;
                c.resolve_paths(p.parent().unwrap_or(Path::new(".")));
                Some(c)
            }
            None => None,
        };
        let seed = cli.seed.or(config.as_ref().and_then(|c| c.seed));
        let out = cli
            .out
            .clone()
            .or(config.as_ref().and_then(|c| c.out.clone()))
            .unwrap_or_else(|| PathBuf::from("."));
        fs::create_dir_all(&out).map_err(|e| Error::io(&out, e))?;
        Ok(Self { config, seed, out })
    }

    fn config(&self) -> Result<&RunConfig> {
        self.config
            .as_ref()
            .ok_or_else(|| Error::Config("this command needs --config <run.toml>".into()))
    }

    fn seed(&self) -> Result<u64> {
        self.seed
            .ok_or_else(|| Error::Config("a seed is required: pass --seed or set `seed` in the run file".into()))
    }

    fn hyperparams(&self) -> Result<Hyperparams> {
        Ok(Hyperparams {
            seed: self.seed()?,
            ..self.config()?.train.clone()
        })
    }
}

/// Runs one command. Human-readable progress goes to stdout.
pub fn run(cli: Cli) -> Result<()> {
    let ctx = Ctx::new(&cli)?;
    match &cli.command {
        Command::Gen => cmd_gen(&ctx),
        Command::Train => cmd_train(&ctx),
        Command::Prune(a) => cmd_prune(&ctx, a),
        Command::Eval(a) => cmd_eval(&ctx, a),
        Command::Cost(a) => cmd_cost(&ctx, a),
    }
}

fn cmd_gen(ctx: &Ctx) -> Result<()> {
    let cfg = ctx.config()?;
    let seed = ctx.seed()?;
    for (split, split_seed) in [("train", seed), ("test", seed.wrapping_add(1))] {
        let dir = ctx.out.join(split);
        fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        let n = match &cfg.task {
            TaskConfig::Adding { steps, train, test } => {
                let n = if split == "train" { *train } else { *test };
                for (i, s) in tasks::gen_adding(*steps, n, split_seed)?.iter().enumerate() {
                    tasks::write_adding_csv(&dir.join(format!("{i:06}.csv")), s, Some(split_seed))?;
                }
                n
            }
            TaskConfig::DelayXor {
                steps,
                gaps,
                train,
                test,
                channels,
                jitter,
            } => {
                let n = if split == "train" { *train } else { *test };
                let opts = delay_xor_options(*channels, *jitter);
                for (i, s) in tasks::gen_delay_xor(*steps, gaps, n, split_seed, &opts)?.iter().enumerate() {
                    tasks::write_events_csv(&dir.join(format!("{i:06}.csv")), s, Some(split_seed))?;
                }
                n
            }
            TaskConfig::Events { .. } => {
                return Err(Error::Config("event datasets are read from disk, not generated".into()))
            }
        };
        println!("wrote {n} samples to {}", dir.display());
    }
    Ok(())
}

fn cmd_train(ctx: &Ctx) -> Result<()> {
    let cfg = ctx.config()?;
    let hp = ctx.hyperparams()?;
    let (train_set, _) = load_task(&cfg.task, hp.seed)?;
    let outcome = train(&cfg.network, &train_set, &hp)?;
    let (header, rows) = metrics_rows(&outcome.metrics);
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    write_csv(&ctx.out.join("metrics.csv"), hp.seed, &header, &rows)?;
    let last = outcome.metrics.last();
    let meta = CheckpointMeta {
        seed: hp.seed,
        epochs: outcome.metrics.len(),
        final_loss: last.map(|m| m.loss),
        final_accuracy: last.and_then(|m| m.accuracy),
        stage: "train".into(),
    };
    let path = ctx.out.join("model.json");
    Checkpoint::new(cfg.network.clone(), outcome.params, meta)?.save(&path)?;
    for m in &outcome.metrics {
        match m.accuracy {
            Some(a) => println!("epoch {:>3}  loss {:.5}  accuracy {:.4}", m.epoch, m.loss, a),
            None => println!("epoch {:>3}  loss {:.5}", m.epoch, m.loss),
        }
    }
    println!("checkpoint: {}", path.display());
    Ok(())
}

fn cmd_prune(ctx: &Ctx, args: &PruneArgs) -> Result<()> {
    let ck = Checkpoint::load(&args.checkpoint)?;
    let cfg = ctx.config()?;
    let mut pc = match (&cfg.prune, args.keep) {
        (_, Some(k)) => PruneConfig {
            finetune_epochs: cfg.prune.as_ref().map_or(0, |p| p.finetune_epochs),
            ..PruneConfig::cap(k)
        },
        (Some(p), None) => p.clone(),
        (None, None) => return Err(Error::Config("no [prune] section and no --keep given".into())),
    };
    pc.validate()?;
    if args.keep.is_some() {
        pc.refine_factor = None;
    }
    let hp = ctx.hyperparams()?;
    let (train_set, test_set) = load_task(&cfg.task, hp.seed)?;
    let outcome = prune_finetune_loop(&ck.spec, &ck.params, &train_set, &test_set, &pc, &hp)?;
    let layers = outcome.rounds.first().map_or(0, |r| r.spikes_per_step.len());
    let mut header = vec!["round".to_string(), "params".into(), "loss".into(), "accuracy".into()];
    header.extend((0..layers).map(|l| format!("spikes_per_step_{l}")));
    let rows: Vec<Vec<String>> = outcome
        .rounds
        .iter()
        .map(|r| {
            let mut row = vec![
                r.round.to_string(),
                r.params.to_string(),
                format!("{:?}", r.loss),
                r.accuracy.map_or(String::new(), |a| format!("{a:?}")),
            ];
            row.extend(r.spikes_per_step.iter().map(|s| format!("{s:?}")));
            row
        })
        .collect();
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    write_csv(&ctx.out.join("prune_report.csv"), hp.seed, &header, &rows)?;
    let last = outcome.rounds.last();
    let meta = CheckpointMeta {
        seed: hp.seed,
        epochs: ck.meta.epochs + pc.finetune_epochs * pc.refine_rounds,
        final_loss: last.map(|r| r.loss),
        final_accuracy: last.and_then(|r| r.accuracy),
        stage: "prune".into(),
    };
    let path = ctx.out.join("pruned.json");
    Checkpoint::new(outcome.spec, outcome.params, meta)?.save(&path)?;
    for r in &outcome.rounds {
        println!("round {}  params {}  loss {:.5}", r.round, r.params, r.loss);
    }
    println!("checkpoint: {}", path.display());
    Ok(())
}

fn cmd_eval(ctx: &Ctx, args: &EvalArgs) -> Result<()> {
    let ck = Checkpoint::load(&args.checkpoint)?;
    let seed = ctx.seed.unwrap_or(ck.meta.seed);
    let loss = ctx.config.as_ref().map_or(Hyperparams::default().loss, |c| c.train.loss);
    let data = match (&args.data, &ctx.config) {
        (Some(d), c) => read_any_dir(d, c.as_ref().map(|c| &c.task))?,
        (None, Some(c)) => load_task(&c.task, seed)?.1,
        (None, None) => return Err(Error::Config("pass --data or a run file with a task".into())),
    };
    let m = evaluate(&ck.spec, &ck.params, &data, loss)?;
    let mut header = vec!["samples", "loss", "accuracy"];
    let spike_cols: Vec<String> = (0..m.spikes_per_step.len()).map(|l| format!("spikes_per_step_{l}")).collect();
    header.extend(spike_cols.iter().map(String::as_str));
    let mut row = vec![
        data.len().to_string(),
        format!("{:?}", m.loss),
        m.accuracy.map_or(String::new(), |a| format!("{a:?}")),
    ];
    row.extend(m.spikes_per_step.iter().map(|s| format!("{s:?}")));
    write_csv(&ctx.out.join("eval.csv"), seed, &header, &[row])?;
    let act = ctx.out.join("activity.csv");
    fs::write(&act, m.activity.to_csv(Some(seed))).map_err(|e| Error::io(&act, e))?;
    match m.accuracy {
        Some(a) => println!("loss {:.5}  accuracy {:.4}  ({} samples)", m.loss, a, data.len()),
        None => println!("loss {:.5}  ({} samples)", m.loss, data.len()),
    }
    println!("activity: {}", act.display());
    Ok(())
}

/// Architecture from a preset name, an architecture TOML or a checkpoint.
pub fn resolve_arch(arg: &str) -> Result<(String, ArchSpec)> {
    if let Some(a) = presets::by_name(arg) {
        return Ok((arg.to_string(), a));
    }
    let path = Path::new(arg);
    if !path.exists() {
        return Err(Error::Config(format!(
            "`{arg}` is neither a preset (r1, r2, d1, d2, delayed-64, delayed-48) nor a file"
        )));
    }
    let name = path.file_stem().map_or(arg.to_string(), |s| s.to_string_lossy().into_owned());
    if path.extension().is_some_and(|e| e == "json") {
        let ck = Checkpoint::load(path)?;
        return Ok((name, ArchSpec::from_network(&ck.spec, Some(&ck.params))));
    }
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let arch: ArchSpec = toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
    arch.validate()?;
    Ok((name, arch))
}

pub fn resolve_activity(arg: &str) -> Result<ActivityTrace> {
    if let Some(a) = presets::reference_activity(arg) {
        return Ok(a);
    }
    let path = Path::new(arg);
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    ActivityTrace::from_csv(&text)
}

fn default_mechanism(arch: &ArchSpec) -> DelayMechanism {
    let delayed = arch.all_layers().any(|l| l.delays.as_ref().is_some_and(|d| d.max_delay() > 0));
    if delayed {
        DelayMechanism::Queue
    } else {
        DelayMechanism::None
    }
}

fn cmd_cost(ctx: &Ctx, args: &CostArgs) -> Result<()> {
    let seed = ctx.seed.unwrap_or(0);
    let cost_cfg = ctx.config.as_ref().map(|c| c.cost.clone()).unwrap_or_default();
    let coeffs = match args.coeffs.as_ref().or(cost_cfg.coeffs.as_ref()) {
        Some(p) => EnergyCoeffs::load(p)?,
        None => EnergyCoeffs::default(),
    };
    let (name, arch) = resolve_arch(&args.arch)?;
    let activity = resolve_activity(&args.activity)?;
    let mechanism = args.mechanism.or(cost_cfg.mechanism).unwrap_or_else(|| default_mechanism(&arch));
    let report = CostReport::build(name, &arch, &activity, &coeffs, mechanism)?;
    let mut rows: Vec<Vec<String>> = report.csv_rows().into_iter().map(|(k, v)| vec![k, v]).collect();
    print!("{report}");
    if let Some(b) = &args.baseline {
        let (bname, barch) = resolve_arch(b)?;
        let bact = match presets::reference_activity(b) {
            Some(a) => a,
            None => activity.clone(),
        };
        let bmech = default_mechanism(&barch);
        let base = CostReport::build(bname, &barch, &bact, &coeffs, bmech)?;
        let f = hwcost::saving_factors(&base, &report)?;
        println!("  saving vs {:<8} energy x{:.3}  memory x{:.3}", base.name, f.energy, f.memory);
        rows.push(vec!["energy_saving".into(), format!("{:?}", f.energy)]);
        rows.push(vec!["memory_saving".into(), format!("{:?}", f.memory)]);
    }
    write_csv(&ctx.out.join("cost.csv"), seed, &["metric", "value"], &rows)?;
    Ok(())
}
