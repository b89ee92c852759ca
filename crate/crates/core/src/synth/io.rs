//! Plain-text dataset formats. Floats are written in shortest round-trip
//! form, so files reload bit-exactly.

use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use crate::geom::{ImuSample, Pose, RawPoint, Scan, Vec3};
use crate::pipeline::{format_trajectory, read_trajectory, FrameResult};

pub const SCAN_HEADER: &str = "x,y,z,t_off";
pub const IMU_HEADER: &str = "t,ax,ay,az,gx,gy,gz";
pub const INDEX_HEADER: &str = "index,t_begin,t_end";
pub const METRICS_HEADER: &str = "frame,t,elapsed_ms,n_points,n_corr,candidates,iters";
pub const UTIL_HEADER: &str = "frame,u";

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Dataset {
    pub scans: Vec<Scan>,
    pub imu: Vec<ImuSample>,
    pub gt: Vec<(f64, Pose)>,
}

fn io_err(path: &Path, msg: impl std::fmt::Display) -> io::Error {
    io::Error::new(io::ErrorKind::InvalidData, format!("{}: {msg}", path.display()))
}

/// Parses a headed CSV of floats with exactly `cols` columns.
fn parse_rows(text: &str, header: &str, cols: usize, path: &Path) -> io::Result<Vec<Vec<f64>>> {
    let mut lines = text.lines();
    match lines.next() {
        Some(h) if h.trim() == header => {}
        other => return Err(io_err(path, format!("expected header '{header}', found {other:?}"))),
    }
    let mut rows = Vec::new();
    for (i, line) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let row: Vec<f64> = line
            .split(',')
            .map(|f| f.trim().parse::<f64>())
            .collect::<Result<_, _>>()
            .map_err(|e| io_err(path, format!("line {}: {e}", i + 2)))?;
        if row.len() != cols {
            return Err(io_err(path, format!("line {}: expected {cols} columns, got {}", i + 2, row.len())));
        }
        if row.iter().any(|v| !v.is_finite()) {
            return Err(io_err(path, format!("line {}: non-finite value", i + 2)));
        }
        rows.push(row);
    }
    Ok(rows)
}

pub fn format_scan_csv(scan: &Scan) -> String {
    let mut s = String::with_capacity(scan.points.len() * 48);
    s.push_str(SCAN_HEADER);
    s.push('\n');
    for pt in &scan.points {
        let _ = writeln!(s, "{},{},{},{}", pt.p.x, pt.p.y, pt.p.z, pt.t_off);
    }
    s
}

pub fn parse_scan_csv(text: &str, t_begin: f64, t_end: f64, path: &Path) -> io::Result<Scan> {
    let rows = parse_rows(text, SCAN_HEADER, 4, path)?;
    Ok(Scan {
        t_begin,
        t_end,
        points: rows
            .into_iter()
            .map(|r| RawPoint {
                p: Vec3::new(r[0], r[1], r[2]),
                t_off: r[3],
            })
            .collect(),
    })
}

pub fn format_imu_csv(imu: &[ImuSample]) -> String {
    let mut s = String::with_capacity(imu.len() * 96);
    s.push_str(IMU_HEADER);
    s.push('\n');
    for m in imu {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{}",
            m.t, m.acc.x, m.acc.y, m.acc.z, m.gyr.x, m.gyr.y, m.gyr.z
        );
    }
    s
}

pub fn parse_imu_csv(text: &str, path: &Path) -> io::Result<Vec<ImuSample>> {
    let rows = parse_rows(text, IMU_HEADER, 7, path)?;
    let imu: Vec<ImuSample> = rows
        .into_iter()
        .map(|r| ImuSample::new(r[0], Vec3::new(r[1], r[2], r[3]), Vec3::new(r[4], r[5], r[6])))
        .collect();
    if imu.windows(2).any(|w| !(w[1].t > w[0].t)) {
        return Err(io_err(path, "IMU timestamps not strictly increasing"));
    }
    Ok(imu)
}

pub fn format_metrics_csv(results: &[FrameResult]) -> String {
    let mut s = String::from(METRICS_HEADER);
    s.push('\n');
    for (i, r) in results.iter().enumerate() {
        let _ = writeln!(
            s,
            "{i},{:.9},{:.3},{},{},{},{}",
            r.t, r.elapsed_ms, r.n_points, r.n_valid_corr, r.knn_candidates_evaluated, r.iterations_used
        );
    }
    s
}

/// Reads `(elapsed_ms, candidates)` per frame from a metrics CSV.
pub fn parse_metrics_csv(text: &str, path: &Path) -> io::Result<Vec<(f64, f64)>> {
    Ok(parse_rows(text, METRICS_HEADER, 7, path)?
        .into_iter()
        .map(|r| (r[2], r[5]))
        .collect())
}

pub fn format_util_csv(results: &[FrameResult]) -> String {
    let mut s = String::from(UTIL_HEADER);
    s.push('\n');
    for (i, r) in results.iter().enumerate() {
        let _ = writeln!(s, "{i},{:.6}", r.cpu_util);
    }
    s
}

pub fn parse_util_csv(text: &str, path: &Path) -> io::Result<Vec<f64>> {
    Ok(parse_rows(text, UTIL_HEADER, 2, path)?.into_iter().map(|r| r[1]).collect())
}

fn scan_file(dir: &Path, i: usize) -> PathBuf {
    dir.join("scans").join(format!("scan_{i:06}.csv"))
}

/// Layout: `imu.csv`, `gt.tum`, `scans/index.csv`, `scans/scan_NNNNNN.csv`.
pub fn write_dataset(ds: &Dataset, dir: &Path) -> io::Result<()> {
    fs::create_dir_all(dir.join("scans"))?;
    fs::write(dir.join("imu.csv"), format_imu_csv(&ds.imu))?;
    fs::write(dir.join("gt.tum"), format_trajectory(&ds.gt))?;
    let mut index = String::from(INDEX_HEADER);
    index.push('\n');
    for (i, scan) in ds.scans.iter().enumerate() {
        let _ = writeln!(index, "{i},{},{}", scan.t_begin, scan.t_end);
        fs::write(scan_file(dir, i), format_scan_csv(scan))?;
    }
    fs::write(dir.join("scans").join("index.csv"), index)
}

pub fn read_dataset(dir: &Path) -> io::Result<Dataset> {
    let imu_path = dir.join("imu.csv");
    let imu = parse_imu_csv(&fs::read_to_string(&imu_path)?, &imu_path)?;
    let gt_path = dir.join("gt.tum");
    let gt = if gt_path.exists() {
        read_trajectory(&gt_path).map_err(|e| io_err(&gt_path, e))?
    } else {
        Vec::new()
    };
    let index_path = dir.join("scans").join("index.csv");
    let rows = parse_rows(&fs::read_to_string(&index_path)?, INDEX_HEADER, 3, &index_path)?;
    let mut scans = Vec::with_capacity(rows.len());
    for r in rows {
        let path = scan_file(dir, r[0] as usize);
        scans.push(parse_scan_csv(&fs::read_to_string(&path)?, r[1], r[2], &path)?);
    }
    Ok(Dataset { scans, imu, gt })
}
