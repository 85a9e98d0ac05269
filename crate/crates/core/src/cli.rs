//! Command-line front end.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::dataset::{self, GenOptions, Label, Quotas};
use crate::eval::{self, ReportFormat, SlaMode};
use crate::ilp;
use crate::mlp::{Mlp, TrainConfig};
use crate::model::{CanonicalMode, Configuration};
use crate::planner::{self, Horizon};
use crate::qlearn::QTable;
use crate::reimagine::{self, Thresholds};
use crate::sequencer::{self, IlpSequencer, Method, MethodParams, QSequencer, Sequencer};

/// Exit status when `--require-fsa` is not met.
pub const EXIT_THRESHOLD: u8 = 3;

#[derive(Debug, Parser)]
#[command(name = "blockseq", version, about = "Blocksworld event sequencing")]
pub struct Cli {
    /// Seed for every random choice of the run.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    /// Directory that relative data paths are resolved against.
    #[arg(long, global = true, env = "BLOCKSEQ_DATA_DIR", default_value = ".")]
    pub data_dir: PathBuf,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a labeled pair dataset.
    Gen(GenArgs),
    /// Print every minimal plan between two configurations.
    Plan(PlanArgs),
    /// Train a sequencer and write its checkpoint.
    Train(TrainArgs),
    /// Score a trained sequencer on a dataset.
    Eval(EvalArgs),
    /// Train on short plans, test on longer ones, for a range of cut-offs.
    Induct(InductArgs),
    /// Map detection files to configurations and optionally plan between them.
    Reimagine(ReimagineArgs),
}

#[derive(Debug, Args)]
pub struct GenArgs {
    /// Output dataset file.
    #[arg(long, default_value = "dataset.tsv")]
    pub out: PathBuf,
    #[arg(long, default_value_t = 5)]
    pub max_blocks: usize,
    /// Records per label (none, 0..8), unless overridden by --quota.
    #[arg(long, default_value_t = 100)]
    pub per_label: usize,
    /// Per-label quota as LABEL=N, e.g. none=50 or 3=200. Repeatable.
    #[arg(long, value_parser = parse_quota)]
    pub quota: Vec<(Label, usize)>,
    #[arg(long, default_value = "8", value_parser = parse_horizon)]
    pub horizon: Horizon,
    /// Plans stored per record (0 keeps all).
    #[arg(long, default_value_t = 200)]
    pub max_plans: usize,
    #[arg(long, default_value_t = 200_000)]
    pub max_draws: usize,
}

#[derive(Debug, Args)]
pub struct PlanArgs {
    /// Source, e.g. "R.G|B" (stacks bottom to top, `|` between stacks, `;out=Y.O`).
    pub src: String,
    pub tgt: String,
    #[arg(long, default_value = "8", value_parser = parse_horizon)]
    pub horizon: Horizon,
    /// Print at most this many plans.
    #[arg(long)]
    pub max_plans: Option<usize>,
}

#[derive(Debug, Args)]
pub struct Hyper {
    /// MLP epochs.
    #[arg(long, default_value_t = 100)]
    pub epochs: usize,
    #[arg(long, default_value_t = 1e-3)]
    pub lr: f64,
    #[arg(long, default_value_t = 64)]
    pub batch: usize,
    /// Hidden layer widths of the MLP, comma separated.
    #[arg(long, value_delimiter = ',', default_values_t = [512, 512, 256, 256])]
    pub hidden: Vec<usize>,
    /// Q-learning episodes per training pair.
    #[arg(long, default_value_t = 50)]
    pub episodes_per_pair: usize,
    /// Transitions handed to rule induction.
    #[arg(long, default_value_t = 2000)]
    pub max_transitions: usize,
}

impl Hyper {
    pub fn params(&self) -> MethodParams {
        let mut widths = vec![crate::model::PAIR_FEATURES];
        widths.extend(&self.hidden);
        widths.push(crate::model::SEQUENCE_BITS);
        MethodParams {
            mlp_widths: widths,
            mlp: TrainConfig { epochs: self.epochs, lr: self.lr, batch: self.batch, ..TrainConfig::default() },
            q_episodes_per_pair: self.episodes_per_pair,
            ilp_max_transitions: self.max_transitions,
            ..MethodParams::default()
        }
    }
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    pub method: Method,
    #[arg(long, default_value = "dataset.tsv")]
    pub data: PathBuf,
    /// Checkpoint file (binary weights, Q table or theory text).
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub hyper: Hyper,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum FormatArg {
    Tsv,
    Markdown,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum SlaArg {
    Padded,
    MaxLen,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    pub method: Method,
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[arg(long, default_value = "dataset.tsv")]
    pub data: PathBuf,
    #[arg(long)]
    pub report: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "markdown")]
    pub format: FormatArg,
    #[arg(long, value_enum, default_value = "padded")]
    pub sla: SlaArg,
    /// Fail with a nonzero exit status when FSA falls below this percentage.
    #[arg(long)]
    pub require_fsa: Option<f64>,
    /// Horizon for planning with an induced theory.
    #[arg(long, default_value = "unbounded", value_parser = parse_horizon)]
    pub horizon: Horizon,
}

#[derive(Debug, Args)]
pub struct InductArgs {
    pub method: Method,
    #[arg(long, default_value = "dataset.tsv")]
    pub data: PathBuf,
    /// Cut-off lengths, comma separated.
    #[arg(long, value_delimiter = ',', default_values_t = [1, 2, 3, 4, 5, 6])]
    pub ells: Vec<usize>,
    /// Perturbation probability applied to both sides of test pairs.
    #[arg(long, default_value_t = 0.0)]
    pub noise: f64,
    #[arg(long)]
    pub report: Option<PathBuf>,
    #[command(flatten)]
    pub hyper: Hyper,
}

#[derive(Debug, Args)]
pub struct ReimagineArgs {
    /// Detections of the source image.
    pub src: PathBuf,
    /// Detections of the target image.
    pub tgt: PathBuf,
    #[arg(long)]
    pub classmap: PathBuf,
    /// Also print the minimal plans between the two scenes.
    #[arg(long)]
    pub plan: bool,
    #[arg(long, default_value_t = 0.5)]
    pub min_score: f64,
    #[arg(long, default_value_t = 0.5)]
    pub overlap: f64,
    #[arg(long, default_value_t = 0.1)]
    pub gap: f64,
}

fn parse_horizon(s: &str) -> Result<Horizon, String> {
    if s == "unbounded" {
        return Ok(Horizon::Unbounded);
    }
    s.parse().map(Horizon::Bounded).map_err(|_| format!("expected a number or \"unbounded\", got {s:?}"))
}

fn parse_quota(s: &str) -> Result<(Label, usize), String> {
    let (l, n) = s.split_once('=').ok_or("expected LABEL=N")?;
    let label: Label = l.parse().map_err(|e| format!("{e}"))?;
    Ok((label, n.parse().map_err(|e| format!("{e}"))?))
}

fn resolve(dir: &Path, p: &Path) -> PathBuf {
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        dir.join(p)
    }
}

fn parse_cfg(s: &str) -> Result<Configuration> {
    s.parse().with_context(|| format!("invalid configuration {s:?}"))
}

fn load_sequencer(method: Method, path: &Path, horizon: Horizon) -> Result<Box<dyn Sequencer>> {
    let ctx = || format!("loading {method} checkpoint {}", path.display());
    Ok(match method {
        Method::Mlp => Box::new(Mlp::load(path).with_context(ctx)?),
        Method::Q => Box::new(QSequencer { table: QTable::load(path).with_context(ctx)?, horizon: 8 }),
        Method::Ilp => Box::new(IlpSequencer { theory: ilp::load_theory(path).with_context(ctx)?, horizon }),
    })
}

/// Runs one parsed command, writing results to `out`.
pub fn run(cli: Cli, out: &mut dyn Write) -> Result<ExitCode> {
    if let Some(n) = cli.jobs {
        // a second call in the same process keeps the first pool
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build_global();
    }
    let dir = &cli.data_dir;
    match cli.command {
        Command::Gen(a) => {
            let configs = dataset::enumerate_configs(a.max_blocks, CanonicalMode::Relational);
            let mut quotas: Quotas = dataset::uniform_quotas(a.per_label);
            // k blocks never need more than 2k-2 moves
            let longest = (2 * a.max_blocks).saturating_sub(2);
            quotas.retain(|l, _| l.length().is_none_or(|len| len <= longest));
            for (l, n) in a.quota {
                quotas.insert(l, n);
            }
            let opts = GenOptions {
                horizon: a.horizon,
                max_plans: (a.max_plans > 0).then_some(a.max_plans),
                max_draws: a.max_draws,
                jobs: cli.jobs,
            };
            let records = dataset::make_pairs(&configs, &quotas, cli.seed, &opts)?;
            let path = resolve(dir, &a.out);
            dataset::write_records(&path, &records)?;
            for (l, n) in dataset::histogram(&records) {
                writeln!(out, "{l}\t{n}")?;
            }
            log::info!("wrote {} records to {}", records.len(), path.display());
        }
        Command::Plan(a) => {
            let (src, tgt) = (parse_cfg(&a.src)?, parse_cfg(&a.tgt)?);
            write!(out, "{}", planner::plan_capped(&src, &tgt, a.horizon, a.max_plans))?;
        }
        Command::Train(a) => {
            let records = dataset::read_records(&resolve(dir, &a.data))?;
            let params = a.hyper.params();
            let path = resolve(dir, &a.out);
            match a.method {
                Method::Mlp => {
                    let mut model = Mlp::new(&params.mlp_widths, cli.seed);
                    let curve = model.train(&records, &TrainConfig { seed: cli.seed, ..params.mlp });
                    model.save(&path)?;
                    writeln!(out, "final loss {:.6}", curve.last().copied().unwrap_or(f64::NAN))?;
                }
                Method::Q => {
                    let pairs: Vec<_> = records.iter().map(|r| (r.src.clone(), r.tgt.clone())).collect();
                    let table = QTable::train(&pairs, params.q_episodes_per_pair * pairs.len(), &params.q, cli.seed);
                    table.save(&path)?;
                    writeln!(out, "q entries {}", table.len())?;
                }
                Method::Ilp => {
                    let theory = sequencer::induce_from_records(&records, &params, cli.seed)?;
                    ilp::save_theory(&path, &theory)?;
                    write!(out, "{theory}")?;
                }
            }
        }
        Command::Eval(a) => {
            let data = resolve(dir, &a.data);
            let records = dataset::read_records(&data)?;
            let model = load_sequencer(a.method, &resolve(dir, &a.checkpoint), a.horizon)?;
            let pairs: Vec<_> = records.iter().map(|r| (r.src.clone(), r.tgt.clone())).collect();
            let preds = model.predict_all(&pairs);
            let mode = match a.sla {
                SlaArg::Padded => SlaMode::Padded,
                SlaArg::MaxLen => SlaMode::MaxLen,
            };
            let name = data.file_stem().map_or("dataset".into(), |s| s.to_string_lossy().into_owned());
            let report = eval::evaluate(a.method.label(), &name, &preds, &records, mode)?;
            let format = match a.format {
                FormatArg::Tsv => ReportFormat::Tsv,
                FormatArg::Markdown => ReportFormat::Markdown,
            };
            if let Some(p) = a.report {
                eval::write_reports(std::slice::from_ref(&report), &resolve(dir, &p), format)?;
            }
            write!(out, "{}", eval::render_reports(std::slice::from_ref(&report), format))?;
            if let Some(min) = a.require_fsa {
                if report.fsa < min {
                    log::error!("FSA {:.2} below required {min:.2}", report.fsa);
                    return Ok(ExitCode::from(EXIT_THRESHOLD));
                }
            }
        }
        Command::Induct(a) => {
            if !(0.0..=1.0).contains(&a.noise) {
                bail!("noise must be a probability, got {}", a.noise);
            }
            if let Some(&bad) = a.ells.iter().find(|&&l| !(1..8).contains(&l)) {
                bail!("cut-off lengths must lie in 1..=7, got {bad}");
            }
            let records = dataset::read_records(&resolve(dir, &a.data))?;
            let rows = eval::induction_benchmark(a.method, &records, &a.ells, a.noise, &a.hyper.params(), cli.seed)?;
            let text = eval::render_induction(a.method, &rows);
            if let Some(p) = a.report {
                std::fs::write(resolve(dir, &p), &text)?;
            }
            write!(out, "{text}")?;
        }
        Command::Reimagine(a) => {
            let map = reimagine::load_class_map(&resolve(dir, &a.classmap))?;
            let th = Thresholds { min_score: a.min_score, overlap: a.overlap, gap: a.gap, ..Thresholds::default() };
            let scene = |p: &Path| -> Result<Configuration> {
                let dets =
                    reimagine::load_detections(&resolve(dir, p)).with_context(|| format!("reading {}", p.display()))?;
                Ok(reimagine::to_blocks(&dets, &map, &th)?)
            };
            let (src, tgt) = (scene(&a.src)?, scene(&a.tgt)?);
            writeln!(out, "src {src}")?;
            writeln!(out, "tgt {tgt}")?;
            if a.plan {
                write!(out, "{}", planner::plan(&src, &tgt, Horizon::default()))?;
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}
