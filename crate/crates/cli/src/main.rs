use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};

use octvox::pipeline::{read_trajectory, write_trajectory};
use octvox::synth::io::{format_metrics_csv, format_util_csv, parse_metrics_csv, parse_util_csv};
use octvox::synth::{
    ate_rmse, bench_knn, generate_dataset, read_dataset, relative_efficiency, run_dataset, summarize, write_dataset,
    BenchParams, RunConfig, SceneSpec, SensorSpec, TrajectoryKind, TrajectorySpec,
};

#[derive(Parser)]
#[command(name = "octvox", version, about = "Octo-voxel LiDAR-inertial odometry toolkit")]
struct Cli {
    #[command(subcommand)]
    cmd: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic dataset in the desk-scale room.
    GenData {
        #[arg(long, default_value = "circle")]
        traj: TrajectoryKind,
        #[arg(long, default_value_t = 3.0)]
        radius: f64,
        #[arg(long, default_value_t = 10.0)]
        period: f64,
        #[arg(long, default_value_t = 20.0)]
        duration: f64,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, default_value_t = 2000)]
        rays: usize,
        #[arg(long, default_value_t = 0.01)]
        range_sigma: f64,
        /// Disable every noise source and bias.
        #[arg(long)]
        noiseless: bool,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run odometry over a dataset directory.
    Run {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        data: PathBuf,
        /// Output directory for trajectory.tum, metrics.csv and util.csv.
        #[arg(long)]
        out: PathBuf,
    },
    /// Compare the heuristic search against brute force on a random map.
    BenchKnn {
        #[arg(long, default_value_t = 100_000)]
        points: usize,
        #[arg(long, default_value_t = 1000)]
        queries: usize,
        #[arg(long, default_value_t = 5)]
        k: usize,
        #[arg(long, default_value_t = 0.875)]
        radius: f64,
        #[arg(long, default_value_t = 20.0)]
        extent: f64,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Score an estimated trajectory.
    Eval {
        #[arg(long)]
        est: PathBuf,
        #[arg(long)]
        gt: PathBuf,
        #[arg(long)]
        metrics: Option<PathBuf>,
        #[arg(long)]
        util: Option<PathBuf>,
        /// Report ATE without rigid alignment.
        #[arg(long)]
        no_align: bool,
    },
}

fn gen_data(traj: TrajectorySpec, sensor: SensorSpec, seed: u64, out: &Path) -> Result<()> {
    let ds = generate_dataset(&SceneSpec::desk_room(), &traj, &sensor, seed).map_err(anyhow::Error::msg)?;
    write_dataset(&ds, out).with_context(|| format!("writing {}", out.display()))?;
    println!("wrote {} scans and {} IMU samples to {}", ds.scans.len(), ds.imu.len(), out.display());
    Ok(())
}

fn run(config: Option<&Path>, data: &Path, out: &Path) -> Result<()> {
    let cfg = match config {
        Some(p) => RunConfig::load(p).map_err(anyhow::Error::msg)?,
        None => RunConfig::default(),
    };
    let ds = read_dataset(data).with_context(|| format!("reading dataset {}", data.display()))?;
    let results = run_dataset(&cfg.odometry, &ds)?;
    fs::create_dir_all(out)?;
    write_trajectory(&results, &out.join("trajectory.tum"))?;
    fs::write(out.join("metrics.csv"), format_metrics_csv(&results))?;
    fs::write(out.join("util.csv"), format_util_csv(&results))?;
    let gt = (!ds.gt.is_empty()).then_some(ds.gt.as_slice());
    let m = summarize(&results, gt);
    println!("frames: {}", results.len());
    println!("mean frame time: {:.3} ms (std {:.3})", m.elapsed_mean_ms, m.elapsed_std_ms);
    println!("mean candidates per frame: {:.1}", m.candidates_mean);
    if let Some(a) = m.ate_rmse {
        println!("ATE RMSE (aligned): {a:.4} m");
    }
    if let Some(e) = m.eta {
        println!("eta: {e:.6}");
    }
    Ok(())
}

fn bench(p: BenchParams, out: Option<&Path>) -> Result<()> {
    let r = bench_knn(&p).map_err(anyhow::Error::msg)?;
    let (early, full) = r.mean_candidates();
    println!("representatives: {}", r.representatives);
    println!("oracle match rate: {:.4}", r.match_rate());
    println!("mean candidates: {early:.1} (full list {full:.1})");
    println!("total time: hknn {:.2} ms, brute force {:.2} ms", r.hknn_total_ms, r.brute_total_ms);
    if let Some(path) = out {
        fs::write(path, r.to_csv()).with_context(|| format!("writing {}", path.display()))?;
    }
    if r.match_rate() < 1.0 {
        bail!("search disagreed with the brute-force oracle");
    }
    Ok(())
}

fn eval(est: &Path, gt: &Path, metrics: Option<&Path>, util: Option<&Path>, align: bool) -> Result<()> {
    let e = read_trajectory(est).map_err(anyhow::Error::msg)?;
    let g = read_trajectory(gt).map_err(anyhow::Error::msg)?;
    println!("ATE RMSE{}: {:.6} m", if align { " (aligned)" } else { "" }, ate_rmse(&e, &g, align)?);
    if let Some(mp) = metrics {
        let rows = parse_metrics_csv(&fs::read_to_string(mp)?, mp)?;
        let t: Vec<f64> = rows.iter().map(|r| r.0).collect();
        let u = match util {
            Some(up) => parse_util_csv(&fs::read_to_string(up)?, up)?,
            None => vec![1.0; t.len()],
        };
        println!("eta: {:.6}", relative_efficiency(&t, &u)?);
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let res = match cli.cmd {
        Command::GenData {
            traj,
            radius,
            period,
            duration,
            seed,
            rays,
            range_sigma,
            noiseless,
            out,
        } => {
            let traj = TrajectorySpec {
                kind: traj,
                radius,
                period,
                duration,
                ..Default::default()
            };
            let mut sensor = SensorSpec {
                rays,
                range_sigma,
                ..Default::default()
            };
            if noiseless {
                sensor = sensor.noiseless();
            }
            gen_data(traj, sensor, seed, &out)
        }
        Command::Run { config, data, out } => run(config.as_deref(), &data, &out),
        Command::BenchKnn {
            points,
            queries,
            k,
            radius,
            extent,
            seed,
            out,
        } => bench(
            BenchParams {
                points,
                queries,
                k,
                radius,
                extent,
                seed,
                ..Default::default()
            },
            out.as_deref(),
        ),
        Command::Eval {
            est,
            gt,
            metrics,
            util,
            no_align,
        } => eval(&est, &gt, metrics.as_deref(), util.as_deref(), !no_align),
    };
    match res {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
