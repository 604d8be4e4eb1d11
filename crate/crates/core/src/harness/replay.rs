use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use crate::mdp_env::{EpisodeSummary, MergeEnv};
use crate::neural::{load_checkpoint, Branches, NetworkParams};
use crate::observation::{rasterize, BsmScales, Modality, ObservationPipeline};
use crate::ppo::ActionSpace;
use crate::traffic_sim::SimState;
use crate::Result;

use super::baseline::KraussEgo;
use super::config::ExperimentConfig;
use super::eval::{run_episode, BaselineController, Controller, PolicyController};

pub const TRAJECTORY_FILE: &str = "trajectory.csv";

#[derive(Clone, Debug)]
pub struct RenderReport {
    pub frames: Vec<PathBuf>,
    pub trajectory: PathBuf,
    pub summary: EpisodeSummary,
}

pub fn frame_name(i: usize) -> String {
    format!("frame_{i:05}.ppm")
}

/// Replays one noise-free episode and hands every state (reset included) to
/// `on_state`. The mean policy of `checkpoint` drives the ego, or the scripted
/// Krauss ego when no checkpoint is given.
pub fn replay_episode(
    checkpoint: Option<&Path>,
    cfg: &ExperimentConfig,
    seed: u64,
    on_state: &mut dyn FnMut(&MergeEnv) -> Result<()>,
) -> Result<EpisodeSummary> {
    cfg.validate()?;
    let loaded: Option<NetworkParams> = match checkpoint {
        Some(path) => Some(load_checkpoint(path, &cfg.arch, cfg.ppo.adam)?.0),
        None => None,
    };
    let modality = if loaded.is_some() { cfg.modality } else { Modality::BsmOnly };
    let mut ctrl: Box<dyn Controller + '_> = match &loaded {
        Some(params) => Box::new(PolicyController {
            params,
            branches: Branches::from(modality),
            space: ActionSpace::from_ego(&cfg.env.sim.ego),
        }),
        None => Box::new(BaselineController {
            ego: KraussEgo::new(cfg.baseline.clone()),
            d_max: cfg.env.reward.d_max,
        }),
    };
    let env_cfg = cfg.env_for(modality);
    let topology = env_cfg.sim.validate()?;
    let scales = BsmScales::for_topology(&topology, env_cfg.reward.v_max, env_cfg.reward.d_max);
    let mut env = MergeEnv::new(env_cfg)?;
    let mut pipe = ObservationPipeline::new(scales, modality, None, seed);
    run_episode(&mut env, &mut pipe, ctrl.as_mut(), seed, Some(on_state))
}

fn sim_of(env: &MergeEnv) -> &SimState {
    env.sim().expect("replayed env is reset")
}

/// Writes the per-vehicle trajectory of one replayed episode as CSV.
pub fn record_trajectory(checkpoint: Option<&Path>, cfg: &ExperimentConfig, seed: u64, path: &Path) -> Result<EpisodeSummary> {
    let mut out = BufWriter::new(File::create(path)?);
    SimState::write_trajectory_header(&mut out)?;
    let summary = replay_episode(checkpoint, cfg, seed, &mut |env| {
        sim_of(env).write_trajectory_rows(&mut out)?;
        Ok(())
    })?;
    out.flush()?;
    Ok(summary)
}

/// Renders one episode as PPM frames (one per decision, the reset state
/// first) plus its trajectory CSV into `out_dir`.
pub fn render_episode(checkpoint: Option<&Path>, cfg: &ExperimentConfig, seed: u64, out_dir: &Path) -> Result<RenderReport> {
    std::fs::create_dir_all(out_dir)?;
    let window = cfg.env.window.clone();
    let trajectory = out_dir.join(TRAJECTORY_FILE);
    let mut traj = BufWriter::new(File::create(&trajectory)?);
    SimState::write_trajectory_header(&mut traj)?;
    let mut frames = Vec::new();
    let summary = replay_episode(checkpoint, cfg, seed, &mut |env| {
        let sim = sim_of(env);
        sim.write_trajectory_rows(&mut traj)?;
        if !env.is_done() {
            let path = out_dir.join(frame_name(frames.len()));
            let mut f = BufWriter::new(File::create(&path)?);
            rasterize(sim, &window).write_ppm(&mut f)?;
            f.flush()?;
            frames.push(path);
        }
        Ok(())
    })?;
    traj.flush()?;
    Ok(RenderReport { frames, trajectory, summary })
}
