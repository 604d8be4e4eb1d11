use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use ramp_merge::harness::{
    compare_topologies, discover_models, eval_seed, evaluate_params, noise_sweep, prepare_output_dir, render_episode,
    run_krauss_baseline, train, write_metrics_csv, write_noise_sweep_csv, ExperimentConfig, MetricsRecord, SweepModel,
    CHECKPOINT_FILE,
};
use ramp_merge::mdp_env::EpisodeSummary;
use ramp_merge::neural::load_checkpoint;
use ramp_merge::observation::Modality;
use ramp_merge::{Error, Result};

/// On-ramp merging experiments: PPO training, evaluation, baselines and sweeps.
#[derive(Parser, Debug)]
#[command(name = "ramp-merge", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Train a policy with PPO.
    Train(Common),
    /// Evaluate a checkpoint's mean policy.
    Evaluate(Common),
    /// Run the scripted Krauss-ego baseline.
    Baseline(Common),
    /// Evaluate checkpoints at every configured noise level.
    SweepNoise(Common),
    /// Train the same config on the taper and the parallel ramp.
    CompareTopologies(Common),
    /// Replay one episode as PPM frames plus a trajectory CSV.
    Render(Common),
}

#[derive(Args, Debug, Clone)]
struct Common {
    /// TOML experiment config; built-in defaults when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory (overrides `output_dir`).
    #[arg(long)]
    out: Option<PathBuf>,
    /// bsm | image | multi | multi-aug
    #[arg(long, value_parser = parse_modality)]
    modality: Option<Modality>,
    /// Evaluation noise in percent of the configured noise spec.
    #[arg(long, value_parser = parse_level)]
    noise_level: Option<f64>,
    /// Total training steps (overrides `ppo.total_steps`).
    #[arg(long)]
    steps: Option<usize>,
    /// Checkpoint to evaluate or render; defaults to `<out>/checkpoint.bin`.
    #[arg(long)]
    checkpoint: Option<PathBuf>,
    /// Evaluation episodes (overrides `eval.n_episodes`).
    #[arg(long)]
    episodes: Option<usize>,
}

fn parse_modality(s: &str) -> std::result::Result<Modality, String> {
    Modality::parse(s).ok_or_else(|| format!("unknown modality '{s}' (expected bsm, image, multi or multi-aug)"))
}

fn parse_level(s: &str) -> std::result::Result<f64, String> {
    let v: f64 = s.parse().map_err(|_| format!("'{s}' is not a number"))?;
    if (0.0..=100.0).contains(&v) {
        Ok(v)
    } else {
        Err(format!("noise level {v} outside [0, 100]"))
    }
}

struct Run {
    cfg: ExperimentConfig,
    out: PathBuf,
    opts: Common,
}

impl Run {
    fn new(opts: Common) -> Result<Self> {
        let mut cfg = match &opts.config {
            Some(path) => ExperimentConfig::load(path)?,
            None => ExperimentConfig::default(),
        };
        if let Some(seed) = opts.seed {
            cfg.seed = seed;
        }
        if let Some(m) = opts.modality {
            cfg.modality = m;
        }
        if let Some(steps) = opts.steps {
            cfg.ppo.total_steps = steps;
        }
        if let Some(n) = opts.episodes {
            cfg.eval.n_episodes = n;
        }
        if let Some(out) = &opts.out {
            cfg.output_dir = out.clone();
        }
        cfg.validate()?;
        let out = cfg.output_dir.clone();
        Ok(Self { cfg, out, opts })
    }

    fn noise_level(&self) -> f64 {
        self.opts.noise_level.unwrap_or(0.0)
    }

    fn checkpoint(&self) -> PathBuf {
        self.opts.checkpoint.clone().unwrap_or_else(|| self.out.join(CHECKPOINT_FILE))
    }

    /// Stores the source config verbatim plus the resolved config with CLI
    /// overrides applied.
    fn record_config(&self) -> Result<()> {
        prepare_output_dir(&self.out, &self.cfg, self.opts.config.as_deref())?;
        std::fs::write(self.out.join("resolved.toml"), self.cfg.to_toml_string()?)?;
        Ok(())
    }
}

fn write_file(path: &Path, f: impl FnOnce(&mut BufWriter<File>) -> std::io::Result<()>) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    f(&mut out)?;
    out.flush()?;
    Ok(())
}

fn write_episodes(path: &Path, episodes: &[EpisodeSummary]) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    for e in episodes {
        serde_json::to_writer(&mut out, e)?;
        out.write_all(b"\n")?;
    }
    out.flush()?;
    Ok(())
}

fn print_metrics(records: &[MetricsRecord]) -> Result<()> {
    let mut stdout = std::io::stdout().lock();
    write_metrics_csv(&mut stdout, records)?;
    Ok(())
}

fn cmd_train(run: Run) -> Result<()> {
    run.record_config()?;
    let report = train(&run.cfg, &run.out)?;
    let final10 = report.final_mean_normalized(10).map_or_else(|| "NA".to_string(), |v| format!("{v:.4}"));
    println!(
        "trained {} steps, {} episodes, final-10 normalized return {final10}; checkpoint {}",
        run.cfg.ppo.total_steps,
        report.curve.len(),
        report.checkpoint.display()
    );
    Ok(())
}

fn cmd_evaluate(run: Run) -> Result<()> {
    std::fs::create_dir_all(&run.out)?;
    let (params, _) = load_checkpoint(&run.checkpoint(), &run.cfg.arch, run.cfg.ppo.adam)?;
    let (record, episodes) =
        evaluate_params(&params, &run.cfg, run.cfg.modality, run.cfg.eval.n_episodes, run.noise_level())?;
    let records = [record];
    write_file(&run.out.join("evaluation.csv"), |w| write_metrics_csv(w, &records))?;
    write_episodes(&run.out.join("evaluation_episodes.jsonl"), &episodes)?;
    print_metrics(&records)
}

fn cmd_baseline(run: Run) -> Result<()> {
    std::fs::create_dir_all(&run.out)?;
    let (record, episodes) = run_krauss_baseline(&run.cfg, run.cfg.eval.n_episodes)?;
    let records = [record];
    write_file(&run.out.join("baseline.csv"), |w| write_metrics_csv(w, &records))?;
    write_episodes(&run.out.join("baseline_episodes.jsonl"), &episodes)?;
    print_metrics(&records)
}

fn sweep_models(run: &Run) -> Vec<SweepModel> {
    let mut models = discover_models(&run.out, CHECKPOINT_FILE);
    let own = run.checkpoint();
    if own.is_file() && !models.iter().any(|m| m.modality == run.cfg.modality) {
        models.push(SweepModel { modality: run.cfg.modality, checkpoint: own });
    }
    models
}

fn cmd_sweep_noise(run: Run) -> Result<()> {
    let models = sweep_models(&run);
    if models.is_empty() {
        return Err(Error::config(format!(
            "no checkpoints found: expected {}/<modality>/{CHECKPOINT_FILE} or --checkpoint",
            run.out.display()
        )));
    }
    let levels = match run.opts.noise_level {
        Some(l) => vec![l],
        None => run.cfg.eval.noise_levels.clone(),
    };
    let records = noise_sweep(&run.cfg, &models, &levels, run.cfg.eval.n_episodes)?;
    write_file(&run.out.join("noise_sweep.csv"), |w| write_noise_sweep_csv(w, &records))?;
    let mut stdout = std::io::stdout().lock();
    write_noise_sweep_csv(&mut stdout, &records)?;
    Ok(())
}

fn cmd_compare_topologies(run: Run) -> Result<()> {
    run.record_config()?;
    let cmp = compare_topologies(&run.cfg, &run.out)?;
    let fmt = |v: Option<f64>| v.map_or_else(|| "NA".to_string(), |v| format!("{v:.4}"));
    let rows = [("taper", &cmp.taper), ("parallel", &cmp.parallel)];
    write_file(&run.out.join("topologies.csv"), |w| {
        writeln!(w, "topology,steps,episodes,final_10_normalized_return")?;
        for (name, r) in rows {
            writeln!(w, "{name},{},{},{}", run.cfg.ppo.total_steps, r.curve.len(), fmt(r.final_mean_normalized(10)))?;
        }
        Ok(())
    })?;
    for (name, r) in rows {
        println!("{name}: {} episodes, final-10 normalized return {}", r.curve.len(), fmt(r.final_mean_normalized(10)));
    }
    Ok(())
}

fn cmd_render(run: Run) -> Result<()> {
    let checkpoint = match &run.opts.checkpoint {
        Some(p) => Some(p.clone()),
        None => Some(run.out.join(CHECKPOINT_FILE)).filter(|p| p.is_file()),
    };
    let seed = eval_seed(run.cfg.seed, 0);
    let dir = run.out.join("frames");
    let report = render_episode(checkpoint.as_deref(), &run.cfg, seed, &dir)?;
    println!(
        "{} frames ({}) in {}; outcome {:?}",
        report.frames.len(),
        if checkpoint.is_some() { "policy" } else { "Krauss baseline" },
        dir.display(),
        report.summary.outcome
    );
    Ok(())
}

fn dispatch(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Train(o) => cmd_train(Run::new(o)?),
        Command::Evaluate(o) => cmd_evaluate(Run::new(o)?),
        Command::Baseline(o) => cmd_baseline(Run::new(o)?),
        Command::SweepNoise(o) => cmd_sweep_noise(Run::new(o)?),
        Command::CompareTopologies(o) => cmd_compare_topologies(Run::new(o)?),
        Command::Render(o) => cmd_render(Run::new(o)?),
    }
}

fn main() -> ExitCode {
    match dispatch(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let msg = e.to_string().split_whitespace().collect::<Vec<_>>().join(" ");
            eprintln!("error: {msg}");
            ExitCode::FAILURE
        }
    }
}
