//! The `run` driver: simulate an ensemble and write its artifacts.
//!
//! * `trajectory_<k>.csv`: `t`, the `N·d` coordinates, then `N` boundary
//!   flags, one row per stored sample,
//! * `summary.json`: occupation, observable means, martingale residuals,
//!   Girsanov diagnostics and an echo of the configuration,
//! * `hist_boundary.csv`: where the particles sat while on the boundary.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;

use crate::ensemble::map_paths;
use crate::error::Result;
use crate::generator::{martingale_increment, Observable};
use crate::geometry::{DomainGeometry, DomainKind};
use crate::simulator::{simulate, GirsanovMode, SimConfig, Trajectory};
use crate::stats::mean_stderr;

use super::config::RunConfig;

/// Environment variable that overrides the configured output directory.
pub const OUTPUT_DIR_ENV: &str = "STICKY_OUTPUT_DIR";

pub fn resolve_output_dir(cfg: &RunConfig) -> PathBuf {
    match std::env::var_os(OUTPUT_DIR_ENV) {
        Some(v) if !v.is_empty() => PathBuf::from(v),
        _ => PathBuf::from(&cfg.output_dir),
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct Estimate {
    pub mean: f64,
    pub stderr: f64,
}

impl From<(f64, f64)> for Estimate {
    fn from((mean, stderr): (f64, f64)) -> Self {
        Self { mean, stderr }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct ObservableSummary {
    pub name: String,
    /// `E f(X_T)`.
    pub final_value: Estimate,
    /// `E[f(X_T) − f(X_0) − ∫ Lf(X_s) ds]`, zero for a martingale.
    pub martingale_residual: Estimate,
    /// `E[Z_T f(X_T)]` when reweighting.
    pub reweighted_final_value: Option<Estimate>,
}

#[derive(Clone, Debug, Serialize)]
pub struct GirsanovSummary {
    pub mean_weight: Estimate,
    pub min_weight: f64,
    pub max_weight: f64,
    pub effective_sample_size: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct RunSummary {
    pub seed: u64,
    pub paths: u64,
    pub horizon: f64,
    /// Boundary occupation fraction per particle.
    pub occupation: Vec<Estimate>,
    pub local_time: Option<Estimate>,
    pub min_pair_distance: Option<f64>,
    pub observables: Vec<ObservableSummary>,
    pub girsanov: Option<GirsanovSummary>,
    pub wall_time_seconds: f64,
    pub config_text: String,
    pub config: RunConfig,
}

/// Simulates `cfg.paths` paths and writes all artifacts into `out_dir`.
pub fn run(cfg: &RunConfig, out_dir: &Path) -> Result<RunSummary> {
    let started = Instant::now();
    let sim = cfg.sim_config()?;
    fs::create_dir_all(out_dir)?;
    let trajectories = map_paths(cfg.paths, |p| simulate(&sim, p))?;

    for (k, t) in trajectories.iter().take(cfg.csv_paths as usize).enumerate() {
        write_trajectory_csv(&out_dir.join(format!("trajectory_{k}.csv")), t)?;
    }
    write_histogram(&out_dir.join("hist_boundary.csv"), &sim.geometry, &trajectories, cfg.hist_bins)?;

    let mut summary = summarize(cfg, &sim, &trajectories)?;
    summary.wall_time_seconds = started.elapsed().as_secs_f64();
    let file = File::create(out_dir.join("summary.json"))?;
    let mut w = BufWriter::new(file);
    serde_json::to_writer_pretty(&mut w, &summary)?;
    w.write_all(b"\n")?;
    w.flush()?;
    Ok(summary)
}

fn summarize(cfg: &RunConfig, sim: &SimConfig, paths: &[Trajectory]) -> Result<RunSummary> {
    let n = sim.n();
    let d = sim.geometry.dimension();
    let occupation = (0..n)
        .map(|i| {
            let v: Vec<f64> = paths.iter().map(|t| t.boundary_fraction()[i]).collect();
            mean_stderr(&v).into()
        })
        .collect();
    let local_time = paths[0].local_time.map(|_| {
        let v: Vec<f64> = paths.iter().filter_map(|t| t.local_time).collect();
        mean_stderr(&v).into()
    });
    let min_pair_distance = (n > 1).then(|| {
        paths
            .iter()
            .map(|t| t.min_pair_distance)
            .fold(f64::INFINITY, f64::min)
    });
    let weights: Option<Vec<f64>> = (sim.girsanov == GirsanovMode::Reweight)
        .then(|| paths.iter().map(|t| t.weight.unwrap_or(1.0)).collect());

    let mut observables = Vec::new();
    for name in &cfg.observables {
        let f = Observable::from_name(name, n, d)?;
        let finals: Vec<f64> = paths.iter().map(|t| f.value(t.final_state())).collect();
        let incs = paths
            .iter()
            .map(|t| martingale_increment(t, &f, &sim.suite, &sim.geometry, sim.horizon))
            .collect::<Result<Vec<_>>>()?;
        let reweighted = weights.as_ref().map(|w| {
            let v: Vec<f64> = w.iter().zip(&finals).map(|(a, b)| a * b).collect();
            mean_stderr(&v).into()
        });
        observables.push(ObservableSummary {
            name: name.clone(),
            final_value: mean_stderr(&finals).into(),
            martingale_residual: mean_stderr(&incs).into(),
            reweighted_final_value: reweighted,
        });
    }

    let girsanov = weights.map(|w| {
        let s1: f64 = w.iter().sum();
        let s2: f64 = w.iter().map(|x| x * x).sum();
        GirsanovSummary {
            mean_weight: mean_stderr(&w).into(),
            min_weight: w.iter().copied().fold(f64::INFINITY, f64::min),
            max_weight: w.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            effective_sample_size: if s2 > 0.0 { s1 * s1 / s2 } else { 0.0 },
        }
    });

    Ok(RunSummary {
        seed: cfg.seed,
        paths: cfg.paths,
        horizon: cfg.horizon,
        occupation,
        local_time,
        min_pair_distance,
        observables,
        girsanov,
        wall_time_seconds: 0.0,
        config_text: cfg.to_text(),
        config: cfg.clone(),
    })
}

/// Writes one trajectory; floats carry 17 significant digits.
pub fn write_trajectory_csv(path: &Path, t: &Trajectory) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    let first = &t.states[0];
    let (n, d) = (first.n(), first.dim());
    let mut header = vec!["t".to_string()];
    for i in 1..=n {
        for k in 1..=d {
            header.push(format!("x{i}_{k}"));
        }
    }
    for i in 1..=n {
        header.push(format!("on_boundary_{i}"));
    }
    writeln!(w, "{}", header.join(","))?;
    for (time, s) in t.times.iter().zip(&t.states) {
        write!(w, "{time:.16e}")?;
        for v in s.positions() {
            write!(w, ",{v:.16e}")?;
        }
        for &f in s.flags() {
            write!(w, ",{}", u8::from(f))?;
        }
        writeln!(w)?;
    }
    w.flush()?;
    Ok(())
}

/// Boundary sojourn locations: azimuthal bins in the first two coordinates
/// for a ball, one row per endpoint for an interval.
pub fn write_histogram(path: &Path, g: &DomainGeometry, paths: &[Trajectory], bins: usize) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "bin,lower,upper,count,fraction")?;
    let sojourns = paths.iter().flat_map(|t| {
        t.states.iter().flat_map(|s| {
            (0..s.n())
                .filter(move |&i| s.on_boundary(i))
                .map(move |i| s.position(i).to_vec())
        })
    });
    match g.kind() {
        DomainKind::Interval { a, b } => {
            let mut counts = [0usize; 2];
            let mid = 0.5 * (a + b);
            for x in sojourns {
                counts[usize::from(x[0] > mid)] += 1;
            }
            let total = (counts[0] + counts[1]).max(1) as f64;
            for (k, (lo, c)) in [(*a, counts[0]), (*b, counts[1])].iter().enumerate() {
                writeln!(w, "{k},{lo:.16e},{lo:.16e},{c},{:.16e}", *c as f64 / total)?;
            }
        }
        DomainKind::Ball { center, .. } => {
            let bins = bins.max(1);
            let width = std::f64::consts::TAU / bins as f64;
            let mut counts = vec![0usize; bins];
            for x in sojourns {
                let th = (x[1] - center[1]).atan2(x[0] - center[0]).rem_euclid(std::f64::consts::TAU);
                counts[((th / width) as usize).min(bins - 1)] += 1;
            }
            let total = counts.iter().sum::<usize>().max(1) as f64;
            for (k, c) in counts.iter().enumerate() {
                let lo = k as f64 * width;
                writeln!(w, "{k},{lo:.16e},{:.16e},{c},{:.16e}", lo + width, *c as f64 / total)?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::io::config::parse_config;

    fn cfg(extra: &str) -> RunConfig {
        parse_config(&format!(
            "version = 1\ngeometry = ball\nparticles = 2\ndelta = 0\nhorizon = 0.2\nseed = 3\npaths = 3\ncsv_paths = 2\nobservables = coord:1:1, pairdist2:1:2\n{extra}"
        ))
        .unwrap()
    }

    #[test]
    fn run_writes_all_artifacts() {
        let dir = tempfile::tempdir().unwrap();
        let s = run(&cfg(""), dir.path()).unwrap();
        assert_eq!(s.occupation.len(), 2);
        assert_eq!(s.observables.len(), 2);
        assert!(s.girsanov.is_none());
        for f in ["trajectory_0.csv", "trajectory_1.csv", "summary.json", "hist_boundary.csv"] {
            assert!(dir.path().join(f).exists(), "{f}");
        }
        assert!(!dir.path().join("trajectory_2.csv").exists());
        let csv = std::fs::read_to_string(dir.path().join("trajectory_0.csv")).unwrap();
        for row in csv.lines() {
            assert_eq!(row.split(',').count(), 1 + 2 * 2 + 2);
        }
        let json: serde_json::Value =
            serde_json::from_str(&std::fs::read_to_string(dir.path().join("summary.json")).unwrap()).unwrap();
        assert_eq!(json["seed"], 3);
        assert!(json["config_text"].as_str().unwrap().contains("seed = 3"));
    }

    #[test]
    fn zero_horizon_gives_one_data_row() {
        let dir = tempfile::tempdir().unwrap();
        let c = cfg("").to_text().replace("horizon = 0.2", "horizon = 0.0");
        let s = run(&parse_config(&c).unwrap(), dir.path()).unwrap();
        assert_eq!(s.occupation[0].mean, 0.0);
        let csv = std::fs::read_to_string(dir.path().join("trajectory_0.csv")).unwrap();
        assert_eq!(csv.lines().count(), 2);
    }

    #[test]
    fn reweighting_reports_weights() {
        let dir = tempfile::tempdir().unwrap();
        let s = run(&cfg("pair = gaussian\ngirsanov = reweight\n"), dir.path()).unwrap();
        let g = s.girsanov.unwrap();
        assert!(g.min_weight > 0.0 && g.effective_sample_size > 0.0);
        assert!(s.observables[0].reweighted_final_value.is_some());
    }

    #[test]
    fn interval_histogram_has_two_rows() {
        let dir = tempfile::tempdir().unwrap();
        let c = parse_config(
            "version = 1\ngeometry = interval\nparticles = 1\ndelta = 0\nhorizon = 2\nseed = 1\nscheme = time_change\n",
        )
        .unwrap();
        let s = run(&c, dir.path()).unwrap();
        assert!(s.local_time.is_some());
        let h = std::fs::read_to_string(dir.path().join("hist_boundary.csv")).unwrap();
        assert_eq!(h.lines().count(), 3);
    }
}
