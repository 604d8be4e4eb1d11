//! Experiment orchestration: training runs, evaluation, the scripted Krauss
//! baseline, noise sweeps, topology comparison and rendering.

mod baseline;
mod config;
mod eval;
mod metrics;
mod replay;
mod sweep;
mod train;

pub use baseline::KraussEgo;
pub use config::{BaselineConfig, EvalConfig, ExperimentConfig};
pub use eval::{
    eval_seed, evaluate, evaluate_controller, krauss_baseline_on_seeds, evaluate_params, model_name, run_episode, run_krauss_baseline,
    BaselineController, Controller, PolicyController,
};
pub use metrics::{round4, write_metrics_csv, write_noise_sweep_csv, MetricsRecord, METRICS_HEADER, NOISE_SWEEP_HEADER};
pub use replay::{frame_name, record_trajectory, render_episode, replay_episode, RenderReport, TRAJECTORY_FILE};
pub use sweep::{discover_models, noise_sweep, SweepModel};
pub use train::{compare_topologies, prepare_output_dir, train, TopologyComparison, CurvePoint, ProgressRecord, TrainReport, CHECKPOINT_FILE, CONFIG_FILE, CURVE_FILE, PROGRESS_FILE};
