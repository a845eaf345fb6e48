//! Command-line front end: training, evaluation, ablation, rollout export,
//! configuration schema and a standalone contact-force solve.

pub mod error;
pub mod files;
pub mod qprec;
pub mod trace;

use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{CommandFactory, Parser, Subcommand};
use cubegrasp_core::config::RunConfig;
use cubegrasp_core::env::{sample_goal_trajectory, GoalTrajectory, OBS_DIM};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use cubegrasp_core::sac::{Agent, SacError, CHECKPOINT_VERSION};
use cubegrasp_core::train::{env_from_config, evaluate, run_episode, MetricsRow, Policy, Trainer};

pub use error::{CliError, ErrorCode};

#[derive(Debug, Parser)]
#[command(name = "cubegrasp", version, about = "Contact-point learning for three-finger cube manipulation")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train the contact policy; writes checkpoint, metrics, resolved config and a timing log.
    Train {
        /// Run configuration file (`section.key = value` lines).
        #[arg(long)]
        config: PathBuf,
        /// Output directory, created if missing.
        #[arg(long)]
        out: PathBuf,
        /// Overrides `sac.seed`.
        #[arg(long)]
        seed: Option<u64>,
        /// Extra `key=value` overrides applied after the file.
        #[arg(long = "set", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
    },
    /// Deterministic rollouts over an evaluation set; prints per-episode and mean return as CSV.
    Eval {
        #[command(flatten)]
        policy: PolicyArgs,
        /// File listing goal-trajectory files, one per line.
        #[arg(long)]
        eval_set: PathBuf,
        /// Evaluate only the first N trajectories.
        #[arg(long)]
        episodes: Option<usize>,
        /// Also write the report to this file.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Train and evaluate TP, TP+CP and TP+CP+DR for each seed; writes a variant x seed CSV.
    Ablate {
        #[arg(long)]
        config: PathBuf,
        /// Comma-separated training seeds.
        #[arg(long, value_delimiter = ',', default_value = "0,1,2")]
        seeds: Vec<u64>,
        #[arg(long)]
        eval_set: PathBuf,
        /// Ablation CSV path.
        #[arg(long)]
        out: PathBuf,
        /// Directory for per-run training outputs.
        #[arg(long)]
        work_dir: PathBuf,
        /// Reuse finished runs in the work directory whose configuration matches.
        #[arg(long)]
        resume: bool,
        #[arg(long = "set", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
    },
    /// Run one episode and write the per-tick trace.
    Rollout {
        #[command(flatten)]
        policy: PolicyArgs,
        /// Cube placement seed.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Goal-trajectory file; sampled from the seed when absent.
        #[arg(long)]
        goals: Option<PathBuf>,
        /// Trace output path.
        #[arg(long)]
        trace: PathBuf,
    },
    /// Sample goal trajectories into `goals_XX.txt` files plus a `set.txt` list.
    Goals {
        #[arg(long)]
        dir: PathBuf,
        #[arg(long, default_value_t = 20)]
        count: usize,
        /// Seed of the first trajectory; trajectory `i` uses `seed + i`.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Print every configuration key with its default and meaning.
    Schema,
    /// Print the help text of every command as one reference document.
    Reference,
    /// Solve one contact-force problem record and print forces and residuals.
    Qp {
        /// Problem record file.
        record: PathBuf,
    },
}

#[derive(Debug, clap::Args)]
pub struct PolicyArgs {
    /// Trained checkpoint; its configuration echo is used unless --config is given.
    #[arg(long, conflicts_with = "baseline", required_unless_present = "baseline")]
    pub checkpoint: Option<PathBuf>,
    /// Use the scripted face-center contacts instead of a checkpoint.
    #[arg(long)]
    pub baseline: bool,
    /// Run configuration file; defaults to the checkpoint echo, or built-in defaults with --baseline.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Extra `key=value` overrides applied after the configuration.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
}

/// Parses `args` (program name first) and runs the command, writing normal
/// output to `out`.
pub fn run<I, S>(args: I, out: &mut dyn Write) -> Result<(), CliError>
where
    I: IntoIterator<Item = S>,
    S: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                return emit(out, &e.render().to_string());
            }
            let text = e.render().to_string();
            let first = text.lines().next().unwrap_or("invalid arguments");
            return Err(CliError::new(ErrorCode::Usage, first.trim_start_matches("error: ")));
        }
    };
    match cli.command {
        Command::Train {
            config,
            out: dir,
            seed,
            overrides,
        } => {
            let mut cfg = load_config(&config, &overrides)?;
            if let Some(s) = seed {
                cfg.sac.seed = s;
            }
            let summary = cmd_train(&cfg, &dir, &mut |row: &MetricsRow| {
                if (row.episode + 1) % 10 == 0 {
                    eprintln!("episode {} return {:.4}", row.episode + 1, row.ret);
                }
            })?;
            emit(
                out,
                &format!("episodes {}\ncheckpoint {}\n", summary.episodes, dir.join(CHECKPOINT_FILE).display()),
            )
        }
        Command::Eval {
            policy,
            eval_set,
            episodes,
            out: path,
        } => {
            let (cfg, agent) = load_policy(&policy)?;
            let mut set = files::read_eval_set(&eval_set)?;
            if let Some(n) = episodes {
                set.truncate(n);
            }
            let report = cmd_eval(&cfg, agent.as_ref(), &set)?;
            let text = report.to_csv()?;
            if let Some(p) = path {
                files::write_atomic(&p, text.as_bytes())?;
            }
            emit(out, &text)
        }
        Command::Ablate {
            config,
            seeds,
            eval_set,
            out: path,
            work_dir,
            resume,
            overrides,
        } => {
            let cfg = load_config(&config, &overrides)?;
            let set = files::read_eval_set(&eval_set)?;
            let table = cmd_ablate(&cfg, &seeds, &set, &work_dir, resume)?;
            let text = table.to_csv()?;
            files::write_atomic(&path, text.as_bytes())?;
            emit(out, &text)
        }
        Command::Rollout {
            policy,
            seed,
            goals,
            trace: path,
        } => {
            let (cfg, agent) = load_policy(&policy)?;
            let goals = goals
                .map(|p| {
                    GoalTrajectory::parse(&files::read_text(&p)?)
                        .map_err(|e| CliError::new(ErrorCode::Goals, format!("{}: {e}", p.display())))
                })
                .transpose()?;
            let r = cmd_rollout(&cfg, agent.as_ref(), seed, goals.as_ref())?;
            files::write_atomic(&path, trace::to_text(&r.rows).as_bytes())?;
            let mut s = format!("return {:?}\nticks {}\n", r.ret, r.rows.len());
            if let Some(f) = &r.failure {
                s.push_str(&format!("failure {f}\n"));
            }
            emit(out, &s)
        }
        Command::Goals { dir, count, seed, config } => {
            let cfg = match config {
                Some(p) => load_config(&p, &[])?,
                None => RunConfig::default(),
            };
            files::create_dir(&dir)?;
            let mut list = String::new();
            for i in 0..count {
                let name = format!("goals_{i:02}.txt");
                let mut rng = ChaCha8Rng::seed_from_u64(seed + i as u64);
                let g = sample_goal_trajectory(&mut rng, &cfg.env);
                files::write_atomic(&dir.join(&name), g.to_text().as_bytes())?;
                list.push_str(&name);
                list.push('\n');
            }
            files::write_atomic(&dir.join("set.txt"), list.as_bytes())?;
            emit(out, &format!("wrote {count} trajectories to {}\n", dir.display()))
        }
        Command::Schema => emit(out, &RunConfig::schema()),
        Command::Reference => emit(out, &reference()),
        Command::Qp { record } => {
            let rec = qprec::QpRecord::parse(&files::read_text(&record)?)?;
            let (text, ok) = rec.solve()?;
            emit(out, &text)?;
            if ok {
                Ok(())
            } else {
                Err(CliError::new(ErrorCode::Qp, "no admissible force distribution"))
            }
        }
    }
}

fn emit(out: &mut dyn Write, s: &str) -> Result<(), CliError> {
    out.write_all(s.as_bytes())
        .map_err(|e| CliError::new(ErrorCode::Io, format!("stdout: {e}")))
}

/// Help of the top-level command and of each subcommand.
pub fn reference() -> String {
    let mut cmd = Cli::command();
    let mut s = format!("{}\n", cmd.render_long_help());
    let names: Vec<String> = cmd.get_subcommands().map(|c| c.get_name().to_string()).collect();
    for name in names {
        let sub = cmd.find_subcommand_mut(&name).expect("listed above");
        let mut sub = sub.clone().bin_name(format!("cubegrasp {name}"));
        s.push_str(&format!("## cubegrasp {name}\n\n{}\n", sub.render_long_help()));
    }
    s
}

fn apply_overrides(cfg: &mut RunConfig, overrides: &[String]) -> Result<(), CliError> {
    for o in overrides {
        let (k, v) = o
            .split_once('=')
            .ok_or_else(|| CliError::new(ErrorCode::Usage, format!("override '{o}' is not key=value")))?;
        cfg.set(k.trim(), v.trim())?;
    }
    cfg.validate()?;
    Ok(())
}

pub fn load_config(path: &Path, overrides: &[String]) -> Result<RunConfig, CliError> {
    let text = files::read_text(path)?;
    let mut cfg = RunConfig::parse(&text).map_err(|e| CliError::new(ErrorCode::Config, format!("{}: {e}", path.display())))?;
    apply_overrides(&mut cfg, overrides)?;
    Ok(cfg)
}

/// Configuration and trained agent named by the policy flags.
pub fn load_policy(args: &PolicyArgs) -> Result<(RunConfig, Option<Agent>), CliError> {
    let text = args.checkpoint.as_ref().map(|p| files::read_text(p)).transpose()?;
    let mut cfg = match (&args.config, &text) {
        (Some(p), _) => load_config(p, &[])?,
        (None, Some(t)) => config_from_echo(t)?,
        (None, None) => RunConfig::default(),
    };
    apply_overrides(&mut cfg, &args.overrides)?;
    let agent = match text {
        Some(t) => Some(Agent::from_checkpoint(&t, cfg.sac.clone())?.0),
        None => None,
    };
    if let Some(a) = &agent {
        if a.policy.net.sizes[0] != OBS_DIM {
            return Err(CliError::new(ErrorCode::Shape, "policy input does not match the observation size"));
        }
    }
    Ok((cfg, agent))
}

/// Rebuilds the configuration recorded in a checkpoint.
pub fn config_from_echo(checkpoint: &str) -> Result<RunConfig, CliError> {
    let header = checkpoint.lines().next().unwrap_or("");
    let version = header
        .strip_prefix("cubegrasp-checkpoint ")
        .and_then(|v| v.trim().parse::<u32>().ok())
        .unwrap_or(0);
    if version == 0 || version > CHECKPOINT_VERSION {
        return Err(SacError::Version {
            found: version,
            supported: CHECKPOINT_VERSION,
        }
        .into());
    }
    let mut cfg = RunConfig::default();
    for (k, v) in echo_lines(checkpoint) {
        cfg.set(&k, &v)?;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn echo_lines(text: &str) -> Vec<(String, String)> {
    text.lines()
        .filter_map(|l| l.strip_prefix("config "))
        .filter_map(|kv| kv.split_once(" = "))
        .map(|(k, v)| (k.to_string(), v.to_string()))
        .collect()
}

pub const CHECKPOINT_FILE: &str = "checkpoint.txt";
pub const METRICS_FILE: &str = "metrics.csv";
pub const CONFIG_FILE: &str = "config.cfg";
pub const LOG_FILE: &str = "train.log";

#[derive(Debug, Clone, PartialEq)]
pub struct TrainSummary {
    pub episodes: usize,
    pub rows: Vec<MetricsRow>,
}

/// Trains for `cfg.train.episodes` and writes the run directory. Wall times
/// go only to the log file.
pub fn cmd_train(cfg: &RunConfig, dir: &Path, progress: &mut dyn FnMut(&MetricsRow)) -> Result<TrainSummary, CliError> {
    cfg.validate()?;
    files::create_dir(dir)?;
    let mut trainer = Trainer::new(cfg)?;
    let start = Instant::now();
    let mut rows = Vec::with_capacity(cfg.train.episodes);
    let mut log = String::from("episode wall_seconds\n");
    for _ in 0..cfg.train.episodes {
        let row = trainer.run_episode()?;
        log.push_str(&format!("{} {:.3}\n", row.episode, start.elapsed().as_secs_f64()));
        progress(&row);
        rows.push(row);
    }
    let echo = cfg.entries();
    files::write_atomic(&dir.join(CHECKPOINT_FILE), trainer.agent.to_checkpoint(&echo).as_bytes())?;
    files::write_atomic(&dir.join(METRICS_FILE), &files::metrics_csv(&rows)?)?;
    files::write_atomic(&dir.join(CONFIG_FILE), cfg.to_text().as_bytes())?;
    files::write_atomic(&dir.join(LOG_FILE), log.as_bytes())?;
    Ok(TrainSummary {
        episodes: rows.len(),
        rows,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub episodes: Vec<(String, f64)>,
}

impl EvalReport {
    pub fn mean(&self) -> f64 {
        self.episodes.iter().map(|e| e.1).sum::<f64>() / self.episodes.len().max(1) as f64
    }

    pub fn to_csv(&self) -> Result<String, CliError> {
        let mut buf = Vec::new();
        {
            let mut w = csv::Writer::from_writer(&mut buf);
            let err = |e: csv::Error| CliError::new(ErrorCode::Io, e.to_string());
            w.write_record(["episode", "goals", "return"]).map_err(err)?;
            for (i, (g, r)) in self.episodes.iter().enumerate() {
                w.write_record([i.to_string(), g.clone(), format!("{r:?}")]).map_err(err)?;
            }
            w.write_record(["mean".to_string(), String::new(), format!("{:?}", self.mean())])
                .map_err(err)?;
            w.flush().map_err(|e| CliError::new(ErrorCode::Io, e.to_string()))?;
        }
        String::from_utf8(buf).map_err(|e| CliError::new(ErrorCode::Io, e.to_string()))
    }
}

/// Deterministic returns; episode `i` places the cube with seed `i`.
pub fn cmd_eval(
    cfg: &RunConfig,
    agent: Option<&Agent>,
    set: &[(PathBuf, GoalTrajectory)],
) -> Result<EvalReport, CliError> {
    let mut env = env_from_config(cfg)?;
    let policy = match agent {
        Some(a) => Policy::Deterministic(&a.policy),
        None => Policy::FaceCenters,
    };
    let goals: Vec<GoalTrajectory> = set.iter().map(|(_, g)| g.clone()).collect();
    let returns = evaluate(&mut env, policy, &goals, 0)?;
    Ok(EvalReport {
        episodes: set
            .iter()
            .map(|(p, _)| p.display().to_string())
            .zip(returns)
            .collect(),
    })
}

pub const VARIANTS: [&str; 3] = ["TP", "TP+CP", "TP+CP+DR"];

#[derive(Debug, Clone, PartialEq)]
pub struct AblationTable {
    pub seeds: Vec<u64>,
    /// Mean evaluation return per variant and seed.
    pub values: [Vec<f64>; 3],
}

impl AblationTable {
    pub fn variant_mean(&self, v: usize) -> f64 {
        self.values[v].iter().sum::<f64>() / self.values[v].len().max(1) as f64
    }

    pub fn to_csv(&self) -> Result<String, CliError> {
        let mut buf = Vec::new();
        {
            let mut w = csv::Writer::from_writer(&mut buf);
            let err = |e: csv::Error| CliError::new(ErrorCode::Io, e.to_string());
            let mut header = vec!["variant".to_string()];
            header.extend(self.seeds.iter().map(|s| format!("seed_{s}")));
            header.push("mean".into());
            w.write_record(&header).map_err(err)?;
            for (v, name) in VARIANTS.iter().enumerate() {
                let mut row = vec![name.to_string()];
                row.extend(self.values[v].iter().map(|x| format!("{x:?}")));
                row.push(format!("{:?}", self.variant_mean(v)));
                w.write_record(&row).map_err(err)?;
            }
            w.flush().map_err(|e| CliError::new(ErrorCode::Io, e.to_string()))?;
        }
        String::from_utf8(buf).map_err(|e| CliError::new(ErrorCode::Io, e.to_string()))
    }

    pub fn parse(text: &str) -> Result<AblationTable, CliError> {
        let bad = |m: String| CliError::new(ErrorCode::Io, format!("ablation table: {m}"));
        let mut rdr = csv::Reader::from_reader(text.as_bytes());
        let header = rdr.headers().map_err(|e| bad(e.to_string()))?.clone();
        let n = header.len();
        if n < 3 || &header[0] != "variant" || &header[n - 1] != "mean" {
            return Err(bad("unexpected header".into()));
        }
        let seeds = (1..n - 1)
            .map(|i| {
                header[i]
                    .strip_prefix("seed_")
                    .and_then(|s| s.parse::<u64>().ok())
                    .ok_or_else(|| bad(format!("column '{}'", &header[i])))
            })
            .collect::<Result<Vec<_>, _>>()?;
        let mut values: [Vec<f64>; 3] = Default::default();
        let mut seen = 0;
        for rec in rdr.records() {
            let rec = rec.map_err(|e| bad(e.to_string()))?;
            let v = VARIANTS
                .iter()
                .position(|name| *name == &rec[0])
                .ok_or_else(|| bad(format!("variant '{}'", &rec[0])))?;
            values[v] = (1..n - 1)
                .map(|i| rec[i].parse::<f64>().map_err(|e| bad(e.to_string())))
                .collect::<Result<_, _>>()?;
            seen += 1;
        }
        if seen != 3 {
            return Err(bad(format!("{seen} variant rows")));
        }
        Ok(AblationTable { seeds, values })
    }
}

fn run_dir_matches(dir: &Path, cfg: &RunConfig) -> bool {
    let Ok(text) = std::fs::read_to_string(dir.join(CHECKPOINT_FILE)) else {
        return false;
    };
    dir.join(METRICS_FILE).exists() && echo_lines(&text) == cfg.entries()
}

/// Trains the two learned variants per seed and evaluates all three on the
/// shared evaluation set. TP+CP+DR is trained and evaluated with
/// randomization on; the other variants with it off.
pub fn cmd_ablate(
    cfg: &RunConfig,
    seeds: &[u64],
    set: &[(PathBuf, GoalTrajectory)],
    work_dir: &Path,
    resume: bool,
) -> Result<AblationTable, CliError> {
    if seeds.is_empty() {
        return Err(CliError::new(ErrorCode::Usage, "at least one seed is required"));
    }
    files::create_dir(work_dir)?;
    let mut nominal = cfg.clone();
    nominal.randomization.enabled = false;
    let mut randomized = cfg.clone();
    randomized.randomization.enabled = true;
    let tp = cmd_eval(&nominal, None, set)?.mean();
    let mut values: [Vec<f64>; 3] = Default::default();
    for &seed in seeds {
        values[0].push(tp);
        for (v, base) in [(1, &nominal), (2, &randomized)] {
            let mut run = base.clone();
            run.sac.seed = seed;
            let dir = work_dir.join(format!("{}_seed{seed}", if v == 1 { "cp" } else { "cp_dr" }));
            if !(resume && run_dir_matches(&dir, &run)) {
                eprintln!("training {} seed {seed}", VARIANTS[v]);
                cmd_train(&run, &dir, &mut |row: &MetricsRow| {
                    if (row.episode + 1) % 50 == 0 {
                        eprintln!("  episode {} return {:.4}", row.episode + 1, row.ret);
                    }
                })?;
            }
            let text = files::read_text(&dir.join(CHECKPOINT_FILE))?;
            let (agent, _) = Agent::from_checkpoint(&text, run.sac.clone())?;
            values[v].push(cmd_eval(&run, Some(&agent), set)?.mean());
        }
    }
    Ok(AblationTable {
        seeds: seeds.to_vec(),
        values,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Rollout {
    pub ret: f64,
    pub rows: Vec<trace::TraceRow>,
    pub failure: Option<String>,
}

pub fn cmd_rollout(
    cfg: &RunConfig,
    agent: Option<&Agent>,
    seed: u64,
    goals: Option<&GoalTrajectory>,
) -> Result<Rollout, CliError> {
    let mut env = env_from_config(cfg)?;
    env.record_trace = true;
    let policy = match agent {
        Some(a) => Policy::Deterministic(&a.policy),
        None => Policy::FaceCenters,
    };
    let report = run_episode(&mut env, policy, seed, goals)?;
    Ok(Rollout {
        ret: report.ret,
        rows: env.trace.iter().map(trace::TraceRow::from_record).collect(),
        failure: report.failure,
    })
}
