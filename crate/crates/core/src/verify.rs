//! Acceptance checks, shared by the `verify` subcommand and the
//! `acceptance` test target.
//!
//! Every check returns a [`CriterionReport`]; tolerances are fixed here and
//! do not depend on `fast`, which only shrinks ensemble sizes.

use std::path::PathBuf;
use std::time::Instant;

use serde::Serialize;

use crate::densities::{DensitySuite, PairPotential};
use crate::ensemble::map_paths;
use crate::error::{Error, Result};
use crate::generator::{martingale_increment, Observable};
use crate::geometry::DomainGeometry;
use crate::io::config::parse_config;
use crate::io::output::run;
use crate::oracle1d::{boundary_fraction_analytic, sticky_interval_trajectory, OracleConfig};
use crate::rng::LayoutStream;
use crate::simulator::{simulate, GirsanovMode, InitialLayout, Scheme, SimConfig};
use crate::stats::{chi_square_uniform, mean_stderr};

#[derive(Clone, Copy, Debug)]
pub struct VerifyOptions {
    /// Smaller ensembles for a quick smoke run.
    pub fast: bool,
    pub seed: u64,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        Self { fast: false, seed: 20_240_601 }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct CriterionReport {
    pub id: u8,
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
    pub seconds: f64,
    pub values: serde_json::Value,
}

impl CriterionReport {
    pub fn line(&self) -> String {
        format!(
            "{} [{}] {}: {} ({:.1} s)",
            if self.passed { "PASS" } else { "FAIL" },
            self.id,
            self.name,
            self.detail,
            self.seconds
        )
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct SuiteReport {
    pub fast: bool,
    pub seed: u64,
    pub criteria: Vec<CriterionReport>,
}

impl SuiteReport {
    pub fn all_passed(&self) -> bool {
        self.criteria.iter().all(|c| c.passed)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

pub const CRITERIA: [(u8, &str); 9] = [
    (1, "geometry identities"),
    (2, "curvature lemma"),
    (3, "invariant-measure occupation"),
    (4, "scheme cross-validation"),
    (5, "martingale residual"),
    (6, "Girsanov equivalence"),
    (7, "boundary diffusion"),
    (8, "Lennard-Jones repulsion"),
    (9, "determinism"),
];

/// Runs criterion `id` (1 to 9).
pub fn run_criterion(id: u8, opts: &VerifyOptions) -> CriterionReport {
    let name = CRITERIA
        .iter()
        .find(|(i, _)| *i == id)
        .map(|(_, n)| *n)
        .unwrap_or("unknown");
    let start = Instant::now();
    let outcome = match id {
        1 => geometry_identities(opts),
        2 => curvature_lemma(opts),
        3 => occupation(opts),
        4 => cross_validation(opts),
        5 => martingale(opts),
        6 => girsanov(opts),
        7 => boundary_diffusion(opts),
        8 => lennard_jones(opts),
        9 => determinism(opts),
        _ => Err(Error::InvalidInput(format!("no criterion {id}"))),
    };
    let (passed, detail, values) = match outcome {
        Ok(o) => (o.passed, o.detail, o.values),
        Err(e) => (false, format!("error: {e}"), serde_json::Value::Null),
    };
    CriterionReport {
        id,
        name,
        passed,
        detail,
        seconds: start.elapsed().as_secs_f64(),
        values,
    }
}

/// Runs the criteria in `only` (all nine when empty) in order, calling
/// `on_done` after each.
pub fn run_suite(opts: &VerifyOptions, only: &[u8], mut on_done: impl FnMut(&CriterionReport)) -> SuiteReport {
    let mut criteria = Vec::new();
    for (id, _) in CRITERIA.into_iter().filter(|(id, _)| only.is_empty() || only.contains(id)) {
        let r = run_criterion(id, opts);
        on_done(&r);
        criteria.push(r);
    }
    SuiteReport {
        fast: opts.fast,
        seed: opts.seed,
        criteria,
    }
}

struct Outcome {
    passed: bool,
    detail: String,
    values: serde_json::Value,
}

fn unit_ball(d: usize) -> DomainGeometry {
    DomainGeometry::centered_ball(d, 1.0).expect("unit ball")
}

fn random_sphere_point(rng: &mut LayoutStream, d: usize) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..d).map(|_| rng.normal()).collect();
        let r = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if r > 1e-6 {
            return v.iter().map(|x| x / r).collect();
        }
    }
}

fn geometry_identities(opts: &VerifyOptions) -> Result<Outcome> {
    let mut worst: f64 = 0.0;
    let mut rng = LayoutStream::new(opts.seed, 1);
    for d in [2usize, 3] {
        let g = unit_ball(d);
        for _ in 0..1000 {
            let x = random_sphere_point(&mut rng, d);
            let p = g.projection_matrix(&x)?;
            let n = g.outward_normal(&x)?;
            let nv = nalgebra::DVector::from_vec(n);
            worst = worst
                .max((&p - p.transpose()).abs().max())
                .max((&p * &p - &p).abs().max())
                .max((&p * &nv).abs().max())
                .max((p.trace() - (d as f64 - 1.0)).abs());
        }
    }
    Ok(Outcome {
        passed: worst <= 1e-12,
        detail: format!("max deviation {worst:.2e} over 2000 boundary points (tolerance 1e-12)"),
        values: serde_json::json!({ "max_deviation": worst }),
    })
}

/// `((P∇)ᵗP)_k = Σ_{j,l} P_jl ∂_l P_jk` by central differences of the
/// extended projection field.
fn fd_lemma(g: &DomainGeometry, x: &[f64], h: f64) -> Result<Vec<f64>> {
    let d = x.len();
    let p = g.projection_field(x)?;
    let mut out = vec![0.0; d];
    for l in 0..d {
        let mut xp = x.to_vec();
        let mut xm = x.to_vec();
        xp[l] += h;
        xm[l] -= h;
        let dp = (g.projection_field(&xp)? - g.projection_field(&xm)?) / (2.0 * h);
        for (k, o) in out.iter_mut().enumerate() {
            for j in 0..d {
                *o += p[(j, l)] * dp[(j, k)];
            }
        }
    }
    Ok(out)
}

fn curvature_lemma(opts: &VerifyOptions) -> Result<Outcome> {
    let mut worst: f64 = 0.0;
    let mut rng = LayoutStream::new(opts.seed, 2);
    for d in [2usize, 3] {
        let g = unit_ball(d);
        for _ in 0..100 {
            let x = random_sphere_point(&mut rng, d);
            let lhs = fd_lemma(&g, &x, 1e-5)?;
            let kappa = g.mean_curvature(&x)?;
            let n = g.outward_normal(&x)?;
            for k in 0..d {
                worst = worst.max((lhs[k] + kappa * n[k]).abs());
            }
        }
    }
    Ok(Outcome {
        passed: worst <= 1e-3,
        detail: format!("max |(P∇)ᵗP + κn| = {worst:.2e} on 200 sphere points (tolerance 1e-3)"),
        values: serde_json::json!({ "max_deviation": worst }),
    })
}

fn occupation(opts: &VerifyOptions) -> Result<Outcome> {
    let target = boundary_fraction_analytic(&DomainGeometry::interval(0.0, 1.0)?, 1.0, 1.0);
    let mut oc = OracleConfig::new(0.0, 1.0, 1.0, 1.0, 500.0, opts.seed);
    oc.dt = 1e-4;
    let oracle = sticky_interval_trajectory(&oc)?;

    let g = unit_ball(2);
    let ball_target = boundary_fraction_analytic(&g, 1.0, 1.0);
    let mut cfg = SimConfig::new(g, DensitySuite::uniform(1, 0)?, 200.0, opts.seed);
    cfg.dt = 1e-3;
    cfg.epsilon = 1e-2;
    cfg.stride = 10_000;
    let paths = if opts.fast { 8 } else { 20 };
    let fr = map_paths(paths, |p| Ok(simulate(&cfg, p)?.boundary_fraction()[0]))?;
    let (ball, ball_se) = mean_stderr(&fr);

    let ok_a = (oracle.boundary_fraction - target).abs() <= 0.03;
    let ok_b = (ball - ball_target).abs() <= 0.05;
    Ok(Outcome {
        passed: ok_a && ok_b,
        detail: format!(
            "(a) oracle interval {:.4} vs {target:.4} ±0.03 {}; (b) regularized disk {ball:.4} ± {ball_se:.4} over {paths} paths vs {ball_target:.4} ±0.05 {}",
            oracle.boundary_fraction,
            if ok_a { "ok" } else { "off" },
            if ok_b { "ok" } else { "off" },
        ),
        values: serde_json::json!({
            "oracle": oracle,
            "analytic": target,
            "regularized_ball": { "mean": ball, "stderr": ball_se, "paths": paths },
        }),
    })
}

fn cross_validation(opts: &VerifyOptions) -> Result<Outcome> {
    let horizon = 500.0;
    let paths = if opts.fast { 2 } else { 4 };
    let mut cfg = SimConfig::new(DomainGeometry::interval(0.0, 1.0)?, DensitySuite::uniform(1, 0)?, horizon, opts.seed);
    cfg.dt = 1e-4;
    cfg.stride = 1_000_000;
    let mean_fraction = |c: &SimConfig| -> Result<f64> {
        let v = map_paths(paths, |p| Ok(simulate(c, p)?.boundary_fraction()[0]))?;
        Ok(mean_stderr(&v).0)
    };
    cfg.scheme = Scheme::TimeChange;
    let reference = mean_fraction(&cfg)?;
    cfg.scheme = Scheme::RegularizedEuler;
    let mut gaps = Vec::new();
    let mut fractions = Vec::new();
    for eps in [0.04, 0.02, 0.01] {
        cfg.epsilon = eps;
        let f = mean_fraction(&cfg)?;
        fractions.push(f);
        gaps.push((f - reference).abs());
    }
    let monotone = gaps.windows(2).all(|w| w[1] < w[0]);
    let last = *gaps.last().expect("three widths");
    Ok(Outcome {
        passed: monotone && last <= 0.05,
        detail: format!(
            "time change {reference:.4}; gaps at eps 0.04/0.02/0.01: {:.4} / {:.4} / {:.4} ({}, final ≤ 0.05 {})",
            gaps[0],
            gaps[1],
            gaps[2],
            if monotone { "decreasing" } else { "not decreasing" },
            if last <= 0.05 { "ok" } else { "off" },
        ),
        values: serde_json::json!({ "time_change": reference, "regularized": fractions, "gaps": gaps }),
    })
}

fn martingale(opts: &VerifyOptions) -> Result<Outcome> {
    let g = unit_ball(2);
    let suite = DensitySuite::uniform(1, 0)?;
    let t = 0.5;
    let mut cfg = SimConfig::new(g.clone(), suite.clone(), t, opts.seed);
    cfg.dt = 1e-4;
    cfg.stride = 1;
    let n_paths: u64 = if opts.fast { 2_000 } else { 10_000 };
    let names = ["coord:1:1", "radius2:1"];
    let obs: Vec<Observable> = names
        .iter()
        .map(|n| Observable::from_name(n, 1, 2))
        .collect::<Result<_>>()?;
    let incs = map_paths(n_paths, |p| {
        let traj = simulate(&cfg, p)?;
        obs.iter()
            .map(|f| martingale_increment(&traj, f, &suite, &g, t))
            .collect::<Result<Vec<f64>>>()
    })?;
    let mut passed = true;
    let mut parts = Vec::new();
    let mut values = Vec::new();
    for (k, name) in names.iter().enumerate() {
        let v: Vec<f64> = incs.iter().map(|r| r[k]).collect();
        let (m, se) = mean_stderr(&v);
        let ok = m.abs() <= 3.0 * se;
        passed &= ok;
        parts.push(format!("{name}: {m:.2e} ± {se:.2e} {}", if ok { "ok" } else { "off" }));
        values.push(serde_json::json!({ "observable": name, "estimate": m, "stderr": se }));
    }
    Ok(Outcome {
        passed,
        detail: format!("{} ({n_paths} paths, |estimate| ≤ 3 stderr)", parts.join("; ")),
        values: serde_json::Value::Array(values),
    })
}

fn girsanov(opts: &VerifyOptions) -> Result<Outcome> {
    let g = unit_ball(2);
    let suite = DensitySuite::uniform(2, 0)?.with_pair(PairPotential::gaussian(3.0, 0.3)?);
    let n_paths: u64 = if opts.fast { 1_000 } else { 4_000 };
    let f = Observable::from_name("pairdist2:1:2", 2, 2)?;
    let mut direct = SimConfig::new(g, suite, 0.5, opts.seed);
    direct.stride = 1000;
    let mut reweighted = direct.clone();
    reweighted.seed = opts.seed.wrapping_add(1);
    reweighted.girsanov = GirsanovMode::Reweight;

    let hd = map_paths(n_paths, |p| Ok(f.value(simulate(&direct, p)?.final_state())))?;
    let zw = map_paths(n_paths, |p| {
        let t = simulate(&reweighted, p)?;
        Ok((t.weight.unwrap_or(1.0), f.value(t.final_state())))
    })?;
    let (md, sd) = mean_stderr(&hd);
    let weighted: Vec<f64> = zw.iter().map(|(z, h)| z * h).collect();
    let (mw, sw) = mean_stderr(&weighted);
    let z: Vec<f64> = zw.iter().map(|(z, _)| *z).collect();
    let (mz, sz) = mean_stderr(&z);
    let unweighted = mean_stderr(&zw.iter().map(|(_, h)| *h).collect::<Vec<_>>()).0;
    let combined = (sd * sd + sw * sw).sqrt();
    let ok_h = (md - mw).abs() <= 3.0 * combined;
    let ok_z = (mz - 1.0).abs() <= 3.0 * sz;
    Ok(Outcome {
        passed: ok_h && ok_z,
        detail: format!(
            "E[pairdist2] direct {md:.4} ± {sd:.4}, reweighted {mw:.4} ± {sw:.4} (unweighted {unweighted:.4}) {}; mean Z {mz:.4} ± {sz:.4} {}",
            if ok_h { "ok" } else { "off" },
            if ok_z { "ok" } else { "off" },
        ),
        values: serde_json::json!({
            "direct": { "mean": md, "stderr": sd },
            "reweighted": { "mean": mw, "stderr": sw },
            "unweighted": unweighted,
            "weight": { "mean": mz, "stderr": sz },
        }),
    })
}

fn boundary_diffusion(opts: &VerifyOptions) -> Result<Outcome> {
    let g = unit_ball(2);
    let mut cfg = SimConfig::new(g.clone(), DensitySuite::uniform(1, 1)?, 200.0, opts.seed);
    cfg.dt = 2e-3;
    cfg.stride = 1;
    cfg.freeze_escape_drift = true;
    cfg.initial = InitialLayout::Explicit(vec![1.0, 0.0]);
    let paths: u64 = if opts.fast { 10 } else { 20 };
    let every = (5.0 / cfg.dt).round() as usize;
    let burn_in = (10.0 / cfg.dt).round() as usize;
    let per_path = map_paths(paths, |p| {
        let t = simulate(&cfg, p)?;
        let drift = t
            .states
            .iter()
            .map(|s| g.signed_distance(s.position(0)).abs())
            .fold(0.0f64, f64::max);
        let flagged = t.states.iter().all(|s| s.on_boundary(0));
        let angles: Vec<f64> = t
            .states
            .iter()
            .enumerate()
            .filter(|(k, _)| *k >= burn_in && (k - burn_in) % every == 0)
            .map(|(_, s)| s.position(0)[1].atan2(s.position(0)[0]))
            .collect();
        Ok((drift, flagged, t.states.len() - 1, angles))
    })?;
    let max_dev = per_path.iter().map(|r| r.0).fold(0.0f64, f64::max);
    let all_flagged = per_path.iter().all(|r| r.1);
    let steps = per_path[0].2;
    let bins = 10;
    let mut counts = vec![0usize; bins];
    for a in per_path.iter().flat_map(|r| r.3.iter()) {
        let u = (a + std::f64::consts::PI) / std::f64::consts::TAU;
        counts[((u * bins as f64) as usize).min(bins - 1)] += 1;
    }
    let (stat, p) = chi_square_uniform(&counts);
    let ok_conf = max_dev <= 1e-9 && all_flagged && steps >= 100_000;
    let ok_unif = p > 0.01;
    Ok(Outcome {
        passed: ok_conf && ok_unif,
        detail: format!(
            "max |signed distance| {max_dev:.1e} over {steps} steps {}; angular χ² = {stat:.2} on {} samples, p = {p:.3} {}",
            if ok_conf { "ok" } else { "off" },
            counts.iter().sum::<usize>(),
            if ok_unif { "ok" } else { "off" },
        ),
        values: serde_json::json!({
            "max_signed_distance": max_dev,
            "steps": steps,
            "counts": counts,
            "chi_square": stat,
            "p_value": p,
        }),
    })
}

fn lennard_jones(opts: &VerifyOptions) -> Result<Outcome> {
    let pair = PairPotential::lennard_jones_with_cutoff(0.1, 0.1, 0.005)?;
    let suite = DensitySuite::uniform(3, 0)?.with_pair(pair);
    let mut cfg = SimConfig::new(unit_ball(2), suite, 50.0, opts.seed);
    cfg.dt = 1e-4;
    cfg.stride = 100_000;
    let runs: u64 = if opts.fast { 3 } else { 10 };
    let results: Vec<std::result::Result<f64, String>> = map_paths(runs, |p| {
        Ok(match simulate(&cfg, p) {
            Ok(t) => Ok(t.min_pair_distance),
            Err(e) => Err(e.to_string()),
        })
    })?;
    let failures: Vec<&String> = results.iter().filter_map(|r| r.as_ref().err()).collect();
    let min = results
        .iter()
        .filter_map(|r| r.as_ref().ok())
        .fold(f64::INFINITY, |a, &b| a.min(b));
    let passed = failures.is_empty() && min > 0.02;
    Ok(Outcome {
        passed,
        detail: if failures.is_empty() {
            format!("{runs} runs without cutoff violation, min pair distance {min:.4} (> 0.02 required)")
        } else {
            format!("{} of {runs} runs failed: {}", failures.len(), failures[0])
        },
        values: serde_json::json!({ "runs": runs, "min_pair_distance": min, "failures": failures }),
    })
}

fn scratch_dir(tag: &str) -> PathBuf {
    use std::sync::atomic::{AtomicU64, Ordering};
    static COUNTER: AtomicU64 = AtomicU64::new(0);
    std::env::temp_dir().join(format!(
        "sticky-verify-{}-{tag}-{}",
        std::process::id(),
        COUNTER.fetch_add(1, Ordering::Relaxed)
    ))
}

fn determinism(opts: &VerifyOptions) -> Result<Outcome> {
    let text = format!(
        "version = 1\ngeometry = ball\nparticles = 3\ndelta = 1\nhorizon = 2.0\nseed = {}\npaths = 3\ncsv_paths = 3\npair = gaussian\ninitial = uniform-interior\n",
        opts.seed
    );
    let cfg = parse_config(&text).map_err(Error::Config)?;
    let dirs = [scratch_dir("a"), scratch_dir("b")];
    let mut outcome = Ok(());
    for d in &dirs {
        if let Err(e) = run(&cfg, d) {
            outcome = Err(e);
            break;
        }
    }
    let mut identical = outcome.is_ok();
    let mut compared = 0;
    if identical {
        for k in 0..cfg.csv_paths {
            let name = format!("trajectory_{k}.csv");
            let a = std::fs::read(dirs[0].join(&name))?;
            let b = std::fs::read(dirs[1].join(&name))?;
            identical &= a == b && !a.is_empty();
            compared += 1;
        }
    }
    for d in &dirs {
        let _ = std::fs::remove_dir_all(d);
    }
    outcome?;
    Ok(Outcome {
        passed: identical,
        detail: format!(
            "{compared} trajectory files {}",
            if identical { "byte-identical across reruns" } else { "differ between reruns" }
        ),
        values: serde_json::json!({ "files": compared, "identical": identical }),
    })
}
