//! End-to-end experiments: fixed point, asymptotics, ensemble, comparison,
//! and the report files.
//!
//! Output directory layout:
//!
//! * `report.json`: the full [`ComparisonReport`].
//! * `summary.txt`: a human-readable digest.
//! * `checkpoints.csv`: one row per checkpoint with columns `n, mean_a,
//!   mean_b, mean_c, cov_aa, cov_ab, cov_ac, cov_bb, cov_bc, cov_cc, dev_aa,
//!   dev_ab, dev_ac, dev_bb, dev_bc, dev_cc`. `cov_*` is the sample
//!   covariance of `(a/n, b/n, c/n)`; `dev_*` the sample covariance of the
//!   scaled deviations (empty when no limit law applies).
//!
//! Every number in `report.json` is a function of the configuration alone,
//! except `runtime.wall_seconds`.

use std::fmt::Write as _;
use std::path::Path;
use std::time::Instant;

use nalgebra::SymmetricEigen;
use serde::{Deserialize, Serialize};

use crate::asymptotics::{analyze, AsymptoticsReport, Regime};
use crate::config::{ExperimentConfig, Tolerances};
use crate::error::{Error, Result};
use crate::fixed_point::{solve_fixed_point, FixedPointOptions, FixedPointReport, MapKind};
use crate::laws::{series_report, Scenario, SeriesReport};
use crate::linalg::{from_rows, Rows3};
use crate::model::{ModelParams, SampleMode, SamplingScheme};
use crate::operators::{best_gap_bound, en_lattice_gap, hn_grid_gap, lattice_grid, simplex_grid, OperatorOptions};
use crate::simulator::{run_ensemble, DeviationSpec, EnsembleStats};

/// Outcome of one comparison against a named rule and tolerance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub rule: String,
    pub expected: f64,
    pub observed: f64,
    pub tolerance: f64,
    pub pass: bool,
}

impl Verdict {
    fn within(rule: impl Into<String>, expected: f64, observed: f64, tolerance: f64) -> Self {
        Verdict { rule: rule.into(), expected, observed, tolerance, pass: (observed - expected).abs() <= tolerance }
    }
}

const COORDS: [&str; 3] = ["a", "b", "c"];

/// Final-checkpoint means against `(x*, y*, z*)`.
pub fn strong_law_check(stats: &EnsembleStats, fp: &FixedPointReport, tol: f64) -> Vec<Verdict> {
    let last = stats.last();
    let target = [fp.x_star, fp.y_star, fp.z_star];
    (0..3)
        .map(|i| Verdict::within(format!("strong_law.mean_{}", COORDS[i]), target[i], last.mean[i], tol))
        .collect()
}

/// Default relative tolerance for covariance entries in `regime`.
pub fn default_clt_tolerance(regime: Regime) -> f64 {
    match regime {
        Regime::D1Critical => 0.20,
        _ => 0.15,
    }
}

fn principal_axis(m: &Rows3) -> [f64; 3] {
    let e = SymmetricEigen::new(from_rows(m));
    let i = e.eigenvalues.imax();
    let v = e.eigenvectors.column(i);
    [v[0], v[1], v[2]]
}

/// `|cos|` between two vectors.
pub fn abs_cosine(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    (dot / (na * nb)).abs()
}

/// Entrywise covariance comparison for Gaussian regimes; variance
/// stabilisation and direction for the superdiffusive one.
pub fn clt_check(stats: &EnsembleStats, report: &AsymptoticsReport, tol: &Tolerances) -> Result<Vec<Verdict>> {
    let dev = stats.deviation.ok_or_else(|| Error::Case("ensemble carries no scaled deviations".into()))?;
    if dev.scaling != report.scaling {
        return Err(Error::Case(format!(
            "ensemble scaled by {} but the regime needs {}",
            dev.scaling.label(),
            report.scaling.label()
        )));
    }
    let last = stats.last();
    if let Some(sigma) = report.sigma {
        let emp = last.dev_cov.ok_or_else(|| Error::Case("no deviation covariance".into()))?;
        let rel = tol.clt_rel.unwrap_or_else(|| default_clt_tolerance(report.regime));
        let mut out = Vec::with_capacity(9);
        for i in 0..3 {
            for j in 0..3 {
                let t = rel * sigma[i][j].abs().max(tol.clt_floor);
                out.push(Verdict::within(
                    format!("clt.sigma_{}{}", COORDS[i], COORDS[j]),
                    sigma[i][j],
                    emp[i][j],
                    t,
                ));
            }
        }
        return Ok(out);
    }
    let direction = report.direction.ok_or_else(|| Error::Case("regime has neither Σ nor a direction".into()))?;
    if stats.checkpoints.len() < 2 {
        return Err(Error::Case("the variance-ratio test needs two checkpoints".into()));
    }
    let prev = &stats.checkpoints[stats.checkpoints.len() - 2];
    let v_prev = prev.dev_cov.ok_or_else(|| Error::Case("no deviation covariance".into()))?[0][0];
    let v_last = last.dev_cov.ok_or_else(|| Error::Case("no deviation covariance".into()))?[0][0];
    let ratio = v_last / v_prev;
    let (lo, hi) = tol.d2_ratio;
    let m2 = last.dev_second_moment.ok_or_else(|| Error::Case("no deviation second moment".into()))?;
    let cos = abs_cosine(&principal_axis(&m2), &direction);
    Ok(vec![
        Verdict {
            rule: format!("clt.d2.variance_ratio_{}_{}", prev.n, last.n),
            expected: 1.0,
            observed: ratio,
            tolerance: hi,
            pass: ratio >= lo && ratio <= hi,
        },
        Verdict {
            rule: "clt.d2.direction".into(),
            expected: 1.0,
            observed: cos,
            tolerance: 1.0 - tol.d2_direction,
            pass: cos >= tol.d2_direction,
        },
    ])
}

/// Grid resolution used by the bounds check.
pub const BOUNDS_GRID: usize = 10;
/// Cost cap for the bounds check; larger evaluations are skipped.
pub const BOUNDS_COST_CAP: f64 = 1e8;

/// `sup |H_n - g|` and `sup |E_n - g|` on a coarse grid against the best
/// available certified bound, for `n ∈ {10, 100, 1000}` up to `n_max`.
pub fn bounds_check(cfg: &ExperimentConfig, caveats: &mut Vec<String>) -> Result<Vec<Verdict>> {
    let run = &cfg.run;
    let opts = OperatorOptions { cost_cap: BOUNDS_COST_CAP };
    let pts = simplex_grid(BOUNDS_GRID);
    let mut out = Vec::new();
    for n in [10u64, 100, 1000] {
        if n > run.n_max {
            break;
        }
        let bound = match best_gap_bound(&run.spec, run.params.p, &run.law, n) {
            Ok(b) => b,
            Err(e) => {
                caveats.push(format!("bounds at n={n} skipped: {e}"));
                continue;
            }
        };
        // exact bounds can be zero (affine g); allow for summation rounding
        let slack = |b: f64| b + 1e-12;
        match hn_grid_gap(&run.spec, &run.params, &run.law, n, &pts, &opts) {
            Ok(gap) => out.push(Verdict {
                rule: format!("bounds.hn.n{n}.{:?}", bound.lemma),
                expected: 0.0,
                observed: gap,
                tolerance: bound.bound,
                pass: gap <= slack(bound.bound),
            }),
            Err(e @ Error::CostGuard { .. }) => caveats.push(format!("H_n bound at n={n} skipped: {e}")),
            Err(e) => return Err(e),
        }
        if run.law.max_support().is_some_and(|m| m > n) {
            continue;
        }
        let lps = lattice_grid(n, BOUNDS_GRID);
        match en_lattice_gap(&run.spec, &run.params, &run.law, n, &lps, &opts) {
            Ok(gap) => out.push(Verdict {
                rule: format!("bounds.en.n{n}.{:?}", bound.lemma),
                expected: 0.0,
                observed: gap,
                tolerance: bound.bound,
                pass: gap <= slack(bound.bound),
            }),
            Err(e @ Error::CostGuard { .. }) => caveats.push(format!("E_n bound at n={n} skipped: {e}")),
            Err(e) => return Err(e),
        }
    }
    Ok(out)
}

/// One row of `checkpoints.csv`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CheckpointRow {
    pub n: u64,
    pub mean_a: f64,
    pub mean_b: f64,
    pub mean_c: f64,
    pub cov_aa: f64,
    pub cov_ab: f64,
    pub cov_ac: f64,
    pub cov_bb: f64,
    pub cov_bc: f64,
    pub cov_cc: f64,
    pub dev_aa: Option<f64>,
    pub dev_ab: Option<f64>,
    pub dev_ac: Option<f64>,
    pub dev_bb: Option<f64>,
    pub dev_bc: Option<f64>,
    pub dev_cc: Option<f64>,
}

pub fn checkpoint_rows(stats: &EnsembleStats) -> Vec<CheckpointRow> {
    stats
        .checkpoints
        .iter()
        .map(|c| {
            let d = |i: usize, j: usize| c.dev_cov.map(|m| m[i][j]);
            CheckpointRow {
                n: c.n,
                mean_a: c.mean[0],
                mean_b: c.mean[1],
                mean_c: c.mean[2],
                cov_aa: c.cov[0][0],
                cov_ab: c.cov[0][1],
                cov_ac: c.cov[0][2],
                cov_bb: c.cov[1][1],
                cov_bc: c.cov[1][2],
                cov_cc: c.cov[2][2],
                dev_aa: d(0, 0),
                dev_ab: d(0, 1),
                dev_ac: d(0, 2),
                dev_bb: d(1, 1),
                dev_bc: d(1, 2),
                dev_cc: d(2, 2),
            }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Runtime {
    pub version: String,
    pub wall_seconds: f64,
    pub threads: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub config: String,
    pub params: ModelParams,
    pub spec: String,
    pub law: String,
    pub scheme: SamplingScheme,
    pub mode: SampleMode,
    pub seed: u64,
    pub replications: u64,
    pub n_max: u64,
    pub fixed_point: FixedPointReport,
    pub asymptotics: Option<AsymptoticsReport>,
    pub series: Option<SeriesReport>,
    pub checkpoints: Vec<CheckpointRow>,
    pub verdicts: Vec<Verdict>,
    pub hypotheses_unmet: Vec<String>,
    pub caveats: Vec<String>,
    pub runtime: Runtime,
}

impl ComparisonReport {
    pub fn passed(&self) -> bool {
        self.verdicts.iter().all(|v| v.pass)
    }

    /// `0` when every verdict passes, else `1`.
    pub fn exit_status(&self) -> i32 {
        if self.passed() {
            0
        } else {
            1
        }
    }
}

/// Runs the whole pipeline. Hypothesis violations abort with
/// [`Error::Hypothesis`] when the configuration marks them fatal.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ComparisonReport> {
    let started = Instant::now();
    let run = &cfg.run;
    let kind = MapKind::for_law(&run.law);
    let fp = solve_fixed_point(kind, &run.spec, &run.params, &run.law, &FixedPointOptions::default())?;
    let mut unmet = Vec::new();
    let mut caveats = fp.caveats.clone();
    if let Some(m) = fp.margin.filter(|m| *m >= 1.0) {
        unmet.push(format!("contraction margin {m:.4} is not below 1"));
    }
    if let Some(note) = run.law.hypothesis_note() {
        unmet.push(note);
    }
    let series = match (cfg.analysis.series_horizon, run.law.scenario(), run.spec.smoothness().class()) {
        (h, Scenario::A2, Some(class)) if h > 0 => {
            let rep = series_report(&run.law, class, 1, h)?;
            for c in rep.criteria.iter().filter(|c| !c.consistent) {
                unmet.push(format!("series criterion {} not supported up to n={h}", c.name));
            }
            Some(rep)
        }
        _ => None,
    };
    let asymptotics = match analyze(&fp) {
        Ok(a) => Some(a),
        Err(Error::Hypothesis(m)) => {
            unmet.push(m);
            None
        }
        Err(e) => return Err(e),
    };
    if cfg.hypotheses_fatal && !unmet.is_empty() {
        return Err(Error::Hypothesis(unmet.join("; ")));
    }
    if let Some(a) = &asymptotics {
        caveats.extend(a.caveats.iter().filter(|c| !caveats.contains(c)).cloned().collect::<Vec<_>>());
    }

    let deviation = asymptotics
        .as_ref()
        .map(|a| DeviationSpec { centre: [fp.x_star, fp.y_star, fp.z_star], scaling: a.scaling });
    let stats = run_ensemble(run, deviation)?;

    let mut verdicts = Vec::new();
    if cfg.analysis.check_strong_law {
        verdicts.extend(strong_law_check(&stats, &fp, cfg.tolerances.strong_law));
    }
    if cfg.analysis.check_clt {
        match &asymptotics {
            Some(a) => verdicts.extend(clt_check(&stats, a, &cfg.tolerances)?),
            None => caveats.push("CLT check skipped: no limit law applies".into()),
        }
    }
    if cfg.analysis.check_bounds {
        verdicts.extend(bounds_check(cfg, &mut caveats)?);
    }

    Ok(ComparisonReport {
        config: cfg.source.clone(),
        params: run.params,
        spec: run.spec.label().to_string(),
        law: run.law.label(),
        scheme: run.scheme,
        mode: run.mode,
        seed: run.seed,
        replications: run.replications,
        n_max: run.n_max,
        fixed_point: fp,
        asymptotics,
        series,
        checkpoints: checkpoint_rows(&stats),
        verdicts,
        hypotheses_unmet: unmet,
        caveats,
        runtime: Runtime {
            version: env!("CARGO_PKG_VERSION").to_string(),
            wall_seconds: started.elapsed().as_secs_f64(),
            threads: rayon::current_num_threads(),
        },
    })
}

pub fn summary_text(r: &ComparisonReport) -> String {
    let mut s = String::new();
    let fp = &r.fixed_point;
    let _ = writeln!(s, "urnwalk {} experiment", r.runtime.version);
    let _ = writeln!(
        s,
        "model: p={} q={} q1={} q2={} N={}",
        r.params.p, r.params.q, r.params.q1, r.params.q2, r.params.init_len
    );
    let _ = writeln!(s, "reinforcement: {}  law: {}  scheme: {:?}  mode: {:?}", r.spec, r.law, r.scheme, r.mode);
    let _ = writeln!(s, "n_max={} replications={} seed={}", r.n_max, r.replications, r.seed);
    let _ = writeln!(s);
    let _ = writeln!(
        s,
        "fixed point ({:?}): x*={:.10} y*={:.10} z*={:.10} ({} iterations, residual {:.2e})",
        fp.map_kind, fp.x_star, fp.y_star, fp.z_star, fp.iterations, fp.residual
    );
    let _ = writeln!(
        s,
        "alpha*={:.6} beta*={:.6} kappa={:.6} rho={:.6} margin={}",
        fp.alpha_star,
        fp.beta_star,
        fp.kappa,
        fp.rho,
        fp.margin.map_or("n/a".into(), |m| format!("{m:.6}"))
    );
    if let Some(a) = &r.asymptotics {
        let _ = writeln!(s, "regime: {} (scaling {})", a.regime.name(), a.scaling.label());
        if let Some(sig) = a.sigma {
            let _ = writeln!(s, "sigma:");
            for row in sig {
                let _ = writeln!(s, "  {:>12.6} {:>12.6} {:>12.6}", row[0], row[1], row[2]);
            }
        }
        if let Some(d) = a.direction {
            let _ = writeln!(s, "direction: ({:.6}, {:.6}, {:.6})", d[0], d[1], d[2]);
        }
    }
    if let Some(series) = &r.series {
        let _ = writeln!(s, "series up to n={} for {}:", series.horizon, series.law);
        for c in &series.criteria {
            let _ = writeln!(s, "  {:<40} {}", c.name, if c.consistent { "supported" } else { "not supported" });
        }
    }
    let _ = writeln!(s);
    let _ = writeln!(s, "checkpoints:");
    let _ = writeln!(s, "  {:>8} {:>10} {:>10} {:>10}", "n", "mean_a", "mean_b", "mean_c");
    for c in &r.checkpoints {
        let _ = writeln!(s, "  {:>8} {:>10.6} {:>10.6} {:>10.6}", c.n, c.mean_a, c.mean_b, c.mean_c);
    }
    let _ = writeln!(s);
    let _ = writeln!(s, "verdicts:");
    for v in &r.verdicts {
        let _ = writeln!(
            s,
            "  [{}] {:<32} expected {:>12.6} observed {:>12.6} tol {:.4}",
            if v.pass { "PASS" } else { "FAIL" },
            v.rule,
            v.expected,
            v.observed,
            v.tolerance
        );
    }
    for h in &r.hypotheses_unmet {
        let _ = writeln!(s, "hypothesis not met: {h}");
    }
    for c in &r.caveats {
        let _ = writeln!(s, "note: {c}");
    }
    let _ = writeln!(s);
    let passed = r.verdicts.iter().filter(|v| v.pass).count();
    let _ = writeln!(
        s,
        "{} ({}/{} verdicts pass, {:.1}s)",
        if r.passed() { "PASS" } else { "FAIL" },
        passed,
        r.verdicts.len(),
        r.runtime.wall_seconds
    );
    s
}

pub fn write_checkpoints_csv(path: &Path, rows: &[CheckpointRow]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_checkpoints_csv(path: &Path) -> Result<Vec<CheckpointRow>> {
    let mut r = csv::Reader::from_path(path)?;
    r.deserialize().map(|row| row.map_err(Error::from)).collect()
}

pub fn write_outputs(report: &ComparisonReport, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    std::fs::write(dir.join("report.json"), serde_json::to_string_pretty(report)?)?;
    std::fs::write(dir.join("summary.txt"), summary_text(report))?;
    write_checkpoints_csv(&dir.join("checkpoints.csv"), &report.checkpoints)
}

pub fn read_report(dir: &Path) -> Result<ComparisonReport> {
    Ok(serde_json::from_str(&std::fs::read_to_string(dir.join("report.json"))?)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::asymptotics::Scaling;
    use crate::simulator::{summarize, CheckpointRecord, Trajectory};
    use nalgebra::{Cholesky, Vector3};
    use rand::SeedableRng;
    use rand_distr::{Distribution, StandardNormal};

    fn fake_report(sigma: Rows3) -> AsymptoticsReport {
        let fp = FixedPointReport {
            map_kind: MapKind::H,
            q1: 0.5,
            q2: 0.5,
            x_star: 0.25,
            y_star: 0.25,
            z_star: 0.25,
            alpha_star: 0.0,
            beta_star: 0.0,
            kappa: 0.0,
            rho: 1.0,
            residual: 0.0,
            iterations: 1,
            margin: Some(0.0),
            caveats: vec![],
        };
        let mut a = analyze(&fp).unwrap();
        a.sigma = Some(sigma);
        a
    }

    /// Trajectories whose final proportions are `centre + z / sqrt(n)` with
    /// `z ~ N(0, Σ)`.
    fn synthetic(sigma: &Rows3, reps: usize, seed: u64) -> Vec<Trajectory> {
        let n = 1_000_000_000_000u64;
        let l = Cholesky::new(from_rows(sigma)).unwrap().l();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        (0..reps)
            .map(|i| {
                let z = Vector3::from_fn(|_, _| StandardNormal.sample(&mut rng));
                let d = l * z / (n as f64).sqrt();
                let a = ((0.25 + d[0]) * n as f64).round() as u64;
                let b = ((0.25 + d[1]) * n as f64).round() as u64;
                let c = ((0.25 + d[2]) * n as f64).round() as u64;
                Trajectory {
                    replication: i as u64,
                    records: vec![CheckpointRecord { n, a, b, c, d: n - a - b - c, walker: 0 }],
                    path: None,
                }
            })
            .collect()
    }

    fn pass_rate(sigma: &Rows3, trials: u64) -> f64 {
        let report = fake_report(*sigma);
        let dev = Some(DeviationSpec { centre: [0.25; 3], scaling: Scaling::SqrtN });
        let tol = Tolerances { clt_rel: Some(0.15), ..Default::default() };
        let mut passes = 0;
        for seed in 0..trials {
            let stats = summarize(&synthetic(sigma, 2000, seed), dev);
            let v = clt_check(&stats, &report, &tol).unwrap();
            assert_eq!(v.len(), 9);
            passes += v.iter().all(|v| v.pass) as u64;
        }
        passes as f64 / trials as f64
    }

    #[test]
    fn synthetic_gaussian_pass_rate_well_conditioned() {
        // off-diagonal tolerance is 3 standard errors
        let sigma = [[0.2, 0.1, 0.1], [0.1, 0.2, 0.1], [0.1, 0.1, 0.2]];
        let rate = pass_rate(&sigma, 400);
        assert!(rate >= 0.975, "{rate}");
    }

    #[test]
    fn synthetic_gaussian_pass_rate_weak_correlation() {
        // diag 3/16, off-diag -1/16: the off-diagonal tolerance is only
        // 0.15/16 / sqrt(10/256/2000) = 2.12 standard errors, so each of the
        // three pairs fails with probability ~0.034.
        let s = [[3.0, -1.0, -1.0], [-1.0, 3.0, -1.0], [-1.0, -1.0, 3.0]].map(|r| r.map(|v: f64| v / 16.0));
        let rate = pass_rate(&s, 400);
        assert!((0.8..0.95).contains(&rate), "{rate}");
    }

    #[test]
    fn scaling_mismatch_is_a_case_error() {
        let sigma = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];
        let dev = Some(DeviationSpec { centre: [0.25; 3], scaling: Scaling::SqrtNOverLogN });
        let stats = summarize(&synthetic(&sigma, 10, 1), dev);
        assert!(matches!(clt_check(&stats, &fake_report(sigma), &Tolerances::default()), Err(Error::Case(_))));
    }

    #[test]
    fn exit_status_follows_verdicts() {
        let v = |pass| Verdict { rule: "r".into(), expected: 0.0, observed: 0.0, tolerance: 0.0, pass };
        let sigma = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];
        let a = fake_report(sigma);
        let mut r = ComparisonReport {
            config: String::new(),
            params: ModelParams::new(0.5, 0.5, 0.5, 0.5, 1).unwrap(),
            spec: "s".into(),
            law: "l".into(),
            scheme: SamplingScheme::WithReplacement,
            mode: SampleMode::Fast,
            seed: 0,
            replications: 2,
            n_max: 10,
            fixed_point: a.fp.clone(),
            asymptotics: Some(a),
            series: None,
            checkpoints: vec![],
            verdicts: vec![v(true), v(true)],
            hypotheses_unmet: vec![],
            caveats: vec![],
            runtime: Runtime { version: "0".into(), wall_seconds: 0.0, threads: 1 },
        };
        assert_eq!(r.exit_status(), 0);
        r.verdicts.push(v(false));
        assert_eq!(r.exit_status(), 1);
        assert!(summary_text(&r).contains("FAIL"));
    }
}
