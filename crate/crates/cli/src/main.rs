use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use abrsim::agent::train::write_curve;
use abrsim::agent::Checkpoint;
use abrsim::experiment::{
    compare, evaluate, run_training, truncate_video, Comparison, Corpus, EvalReport,
    ExperimentConfig, PolicySpec, Split,
};
use abrsim::experiment::runner::episode_config;
use abrsim::oracle::{exhaustive_best, DEFAULT_BUDGET};
use abrsim::sim::Action;
use abrsim::{Error, Result};
use clap::{Args, Parser, Subcommand};
use serde_json::{json, Value};

/// Streaming simulator with a learned bitrate and enhancement controller.
#[derive(Parser, Debug)]
#[command(name = "abrsim", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct ConfigArgs {
    /// Experiment config (JSON). Defaults are used when omitted.
    #[arg(long, short)]
    config: Option<PathBuf>,
    /// Override a config key, e.g. `--set train.episodes=500`. Values are
    /// parsed as JSON and fall back to plain strings.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    /// Override the master seed.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate the video manifests and scaled traces.
    Generate {
        #[command(flatten)]
        cfg: ConfigArgs,
        /// Output directory for the corpus.
        #[arg(long, short)]
        out: PathBuf,
    },
    /// Train an agent on the train split.
    Train {
        #[command(flatten)]
        cfg: ConfigArgs,
        #[arg(long)]
        corpus: PathBuf,
        /// Checkpoint path.
        #[arg(long, short)]
        out: PathBuf,
        /// Training curve CSV.
        #[arg(long)]
        curve: Option<PathBuf>,
        #[arg(long)]
        episodes: Option<usize>,
        #[arg(long)]
        workers: Option<usize>,
        /// Train the variant that never enhances.
        #[arg(long)]
        no_enhance: bool,
    },
    /// Evaluate a baseline or a checkpoint and write a QoE report.
    Evaluate {
        #[command(flatten)]
        cfg: ConfigArgs,
        #[arg(long)]
        corpus: PathBuf,
        /// Baseline name (bdash, greedy, random, lowest) or checkpoint path.
        #[arg(long)]
        policy: String,
        /// Name used in the report; defaults to the policy argument.
        #[arg(long)]
        label: Option<String>,
        #[arg(long)]
        split: Option<Split>,
        #[arg(long)]
        profile: Option<String>,
        #[arg(long)]
        seeds: Option<usize>,
        /// Report path; stdout when omitted.
        #[arg(long, short)]
        out: Option<PathBuf>,
        /// Also write the PSNR CDF as CSV.
        #[arg(long)]
        cdf: Option<PathBuf>,
    },
    /// Tabulate reports and their pairwise QoE improvements.
    Compare {
        #[arg(required = true, num_args = 2..)]
        reports: Vec<PathBuf>,
        /// Write the comparison as JSON instead of a table.
        #[arg(long)]
        json: bool,
    },
    /// Exhaustive best action sequence for a truncated corpus episode.
    Oracle {
        #[command(flatten)]
        cfg: ConfigArgs,
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long, default_value = "test")]
        split: Split,
        /// Video index within the split.
        #[arg(long, default_value_t = 0)]
        video: usize,
        /// Trace index within the split.
        #[arg(long, default_value_t = 0)]
        trace: usize,
        #[arg(long, default_value_t = 5)]
        chunks: usize,
        #[arg(long)]
        profile: Option<String>,
        #[arg(long, default_value_t = 0.0)]
        offset: f64,
        #[arg(long, default_value_t = DEFAULT_BUDGET)]
        budget: u128,
    },
}

fn set_path(root: &mut Value, key: &str, value: Value) -> Result<()> {
    let mut node = root;
    let parts: Vec<&str> = key.split('.').collect();
    for (i, part) in parts.iter().enumerate() {
        let obj = node
            .as_object_mut()
            .ok_or_else(|| Error::Config(format!("'{key}' does not name a config section")))?;
        if i + 1 == parts.len() {
            if !obj.contains_key(*part) {
                return Err(Error::Config(format!("unknown config key '{key}'")));
            }
            obj.insert(part.to_string(), value);
            return Ok(());
        }
        node = obj
            .get_mut(*part)
            .ok_or_else(|| Error::Config(format!("unknown config key '{key}'")))?;
    }
    Ok(())
}

impl ConfigArgs {
    fn load(&self) -> Result<ExperimentConfig> {
        let base = match &self.config {
            Some(path) => ExperimentConfig::load(path)?,
            None => ExperimentConfig::default(),
        };
        let mut value = serde_json::to_value(&base)?;
        for o in &self.overrides {
            let (key, raw) = o
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("override '{o}' is not KEY=VALUE")))?;
            let parsed = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.into()));
            set_path(&mut value, key, parsed)?;
        }
        if let Some(seed) = self.seed {
            value["seed"] = json!(seed);
        }
        let cfg: ExperimentConfig = serde_json::from_value(value)?;
        cfg.validate()?;
        Ok(cfg)
    }
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(path) => write_text(path, text),
        None => {
            let mut stdout = std::io::stdout().lock();
            writeln!(stdout, "{text}").map_err(|e| Error::io("stdout", e))
        }
    }
}

fn cdf_csv(sorted: &[f64]) -> String {
    let n = sorted.len() as f64;
    let mut s = String::from("psnr_db,cumulative_fraction\n");
    for (i, v) in sorted.iter().enumerate() {
        s.push_str(&format!("{v},{}\n", (i + 1) as f64 / n));
    }
    s
}

fn table(c: &Comparison) -> String {
    let mut s = format!(
        "split {} | profile {} | weights ({}, {}, {})\n",
        c.split, c.profile, c.weights.alpha1, c.weights.alpha2, c.weights.alpha3
    );
    s.push_str(&format!(
        "{:<16} {:>10} {:>8} {:>9} {:>9} {:>9} {:>8}\n",
        "policy", "qoe", "std", "psnr", "variation", "rebuffer", "enhance"
    ));
    for r in &c.rows {
        s.push_str(&format!(
            "{:<16} {:>10.4} {:>8.4} {:>9.4} {:>9.4} {:>9.4} {:>8.3}\n",
            r.policy, r.mean_qoe, r.std_qoe, r.mean_psnr, r.mean_variation, r.mean_rebuffer, r.enhance_fraction
        ));
    }
    s.push('\n');
    for i in &c.improvements {
        s.push_str(&format!("{} vs {}: {:+.2}%\n", i.policy, i.over, i.percent));
    }
    s
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Generate { cfg, out } => {
            let cfg = cfg.load()?;
            let corpus = Corpus::generate(&cfg)?;
            corpus.write(&out)?;
            cfg.save(&out.join("config.json"))?;
            emit(
                None,
                &json!({
                    "config_hash": cfg.hash(),
                    "corpus_hash": corpus.index.corpus_hash,
                    "videos": corpus.videos.len(),
                    "traces": corpus.traces.len(),
                })
                .to_string(),
            )
        }
        Command::Train {
            cfg,
            corpus,
            out,
            curve,
            episodes,
            workers,
            no_enhance,
        } => {
            let mut cfg = cfg.load()?;
            if let Some(n) = episodes {
                cfg.train.agent.episodes = n;
            }
            if let Some(w) = workers {
                cfg.train.agent.workers = w;
            }
            if no_enhance {
                cfg.train.allow_enhance = false;
            }
            cfg.validate()?;
            let corpus = Corpus::load_for(&corpus, &cfg)?;
            let run = run_training(&cfg, &corpus)?;
            run.checkpoint.save(&out)?;
            if let Some(path) = curve {
                let file = std::fs::File::create(&path).map_err(|e| Error::io(&path, e))?;
                write_curve(&run.curve, file)?;
            }
            let tail = run.curve.len().saturating_sub(100);
            let recent = &run.curve[tail..];
            let recent_qoe: Vec<f64> = recent.iter().filter_map(|s| s.qoe).collect();
            emit(
                None,
                &json!({
                    "config_hash": cfg.hash(),
                    "episodes": run.curve.len(),
                    "final_mean_qoe": recent_qoe.iter().sum::<f64>() / recent_qoe.len().max(1) as f64,
                    "final_entropy": recent.last().map(|s| s.entropy),
                })
                .to_string(),
            )
        }
        Command::Evaluate {
            cfg,
            corpus,
            policy,
            label,
            split,
            profile,
            seeds,
            out,
            cdf,
        } => {
            let mut cfg = cfg.load()?;
            if let Some(s) = split {
                cfg.eval.split = s;
            }
            if let Some(p) = profile {
                cfg.eval.profile = p;
            }
            if let Some(n) = seeds {
                cfg.eval.seeds = n;
            }
            cfg.validate()?;
            let corpus = Corpus::load_for(&corpus, &cfg)?;
            let label = label.unwrap_or_else(|| policy.clone());
            let spec = if Path::new(&policy).is_file() {
                PolicySpec::Agent {
                    label,
                    checkpoint: Checkpoint::load(Path::new(&policy))?,
                }
            } else {
                PolicySpec::Baseline(policy)
            };
            let report = evaluate(&cfg, &corpus, &spec)?;
            if let Some(path) = cdf {
                write_text(&path, &cdf_csv(&report.psnr_cdf))?;
            }
            emit(out.as_deref(), &serde_json::to_string_pretty(&report)?)
        }
        Command::Compare { reports, json } => {
            let loaded = reports
                .iter()
                .map(|p| {
                    let text = std::fs::read_to_string(p).map_err(|e| Error::io(p, e))?;
                    Ok(serde_json::from_str::<EvalReport>(&text)?)
                })
                .collect::<Result<Vec<_>>>()?;
            let c = compare(&loaded)?;
            if json {
                emit(None, &serde_json::to_string_pretty(&c)?)
            } else {
                emit(None, table(&c).trim_end())
            }
        }
        Command::Oracle {
            cfg,
            corpus,
            split,
            video,
            trace,
            chunks,
            profile,
            offset,
            budget,
        } => {
            let cfg = cfg.load()?;
            let corpus = Corpus::load_for(&corpus, &cfg)?;
            let videos = corpus.videos_in(split);
            let traces = corpus.traces_in(split);
            let v = videos
                .get(video)
                .ok_or_else(|| Error::Config(format!("{split} split has no video {video}")))?;
            let t = traces
                .get(trace)
                .ok_or_else(|| Error::Config(format!("{split} split has no trace {trace}")))?;
            let profile_name = profile.unwrap_or_else(|| cfg.eval.profile.clone());
            let sim_cfg = episode_config(
                &cfg,
                Arc::new(truncate_video(v, chunks)?),
                Arc::clone(t),
                cfg.sim.profile(&profile_name)?,
                offset,
                cfg.seed,
            );
            let res = exhaustive_best(&sim_cfg, &cfg.qoe, budget)?;
            let indices: Vec<usize> = res.actions.iter().map(|a: &Action| a.index()).collect();
            emit(
                None,
                &serde_json::to_string_pretty(&json!({
                    "config_hash": cfg.hash(),
                    "split": split,
                    "video": video,
                    "trace": trace,
                    "chunks": chunks,
                    "profile": profile_name,
                    "best_qoe": res.best_qoe,
                    "actions": res.actions,
                    "action_indices": indices,
                    "sequences_evaluated": res.sequences_evaluated,
                }))?,
            )
        }
    }
}

fn fail(kind: &str, message: &str) -> ExitCode {
    eprintln!("{}", json!({ "error": kind, "message": message }));
    ExitCode::FAILURE
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => return fail("usage", e.to_string().trim_end()),
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => fail(e.kind(), &e.to_string()),
    }
}
