//! Synthetic scenes, trajectories and sensors, evaluation metrics, file
//! formats and the drivers behind the command-line tool.

pub mod config;
pub mod io;
pub mod metrics;
pub mod run;
pub mod scene;
pub mod sensor;
pub mod trajectory;

pub use config::{DownsampleMode, RunConfig};
pub use io::{read_dataset, write_dataset, Dataset};
pub use metrics::{ate_rmse, relative_efficiency, summarize, MetricError, Metrics};
pub use run::{bench_knn, generate_dataset, run_dataset, BenchParams, BenchReport};
pub use scene::{corner_points, Aabb, SceneSpec, Surface};
pub use sensor::{synthesize_imu, synthesize_scan, SensorSpec, GRAVITY};
pub use trajectory::{TrajSample, TrajectoryKind, TrajectorySpec};
