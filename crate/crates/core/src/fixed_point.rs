//! The almost-sure limit `(x*, y*)`: contraction check, Banach iteration and
//! the linearisation scalars `α*, β*, κ, ρ`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::laws::{SampleSizeLaw, Scenario};
use crate::model::ModelParams;
use crate::operators::{h0_eval, h0_grad};
use crate::reinforcement::{ReinforcementSpec, SimplexPoint};

/// Map whose fixed point is sought: `H = (q1 H_0, q2 (1 - H_0))` for a fixed
/// law, `Ĥ` (same with `g`) for an epoch-indexed one.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum MapKind {
    H,
    HHat,
}

impl MapKind {
    pub fn for_law(law: &SampleSizeLaw) -> Self {
        match law.scenario() {
            Scenario::A1 => MapKind::H,
            Scenario::A2 => MapKind::HHat,
        }
    }

    fn check(&self, law: &SampleSizeLaw) -> Result<()> {
        if *self == MapKind::H && law.scenario() != Scenario::A1 {
            return Err(Error::Case(format!("map H needs a fixed law, got {}", law.label())));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FixedPointOptions {
    pub tol: f64,
    pub max_iter: usize,
    /// Grid resolution `m` for the contraction margin (points `(i/m, j/m)`).
    pub grid: usize,
}

impl Default for FixedPointOptions {
    fn default() -> Self {
        FixedPointOptions { tol: 1e-12, max_iter: 10_000, grid: 200 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FixedPointReport {
    pub map_kind: MapKind,
    pub q1: f64,
    pub q2: f64,
    pub x_star: f64,
    pub y_star: f64,
    pub z_star: f64,
    pub alpha_star: f64,
    pub beta_star: f64,
    pub kappa: f64,
    pub rho: f64,
    pub residual: f64,
    pub iterations: usize,
    /// Grid estimate of the contraction margin, when it was computed.
    pub margin: Option<f64>,
    pub caveats: Vec<String>,
}

fn map_value(
    kind: MapKind,
    spec: &ReinforcementSpec,
    params: &ModelParams,
    law: &SampleSizeLaw,
    pt: SimplexPoint,
) -> Result<f64> {
    match kind {
        MapKind::H => h0_eval(spec, params, law, pt),
        MapKind::HHat => spec.eval_g(params, pt),
    }
}

fn map_gradient(
    kind: MapKind,
    spec: &ReinforcementSpec,
    params: &ModelParams,
    law: &SampleSizeLaw,
    pt: SimplexPoint,
) -> Result<[f64; 2]> {
    match kind {
        MapKind::H => h0_grad(spec, params, law, pt),
        MapKind::HHat => spec.grad_g(params, pt),
    }
}

/// `(q1 + q2) · max(sup |∂x|, sup |∂y|)` of `H_0` or `g` over the grid
/// `{(i/m, j/m) : i + j ≤ m}`. Values below one indicate a contraction, up to
/// the resolution of the grid.
pub fn contraction_margin(
    kind: MapKind,
    spec: &ReinforcementSpec,
    params: &ModelParams,
    law: &SampleSizeLaw,
    grid: usize,
) -> Result<f64> {
    kind.check(law)?;
    if spec.is_constant() || params.p == 0.5 {
        return Ok(0.0);
    }
    let m = grid.max(1);
    let mut sup = 0.0f64;
    for i in 0..=m {
        for j in 0..=(m - i) {
            let pt = SimplexPoint::new(i as f64 / m as f64, j as f64 / m as f64)?;
            let [gx, gy] = map_gradient(kind, spec, params, law, pt)?;
            sup = sup.max(gx.abs()).max(gy.abs());
        }
    }
    Ok((params.q1 + params.q2) * sup)
}

/// Banach iteration of the map from `start` until the sup-norm step drops
/// below `tol`.
pub fn iterate_from(
    kind: MapKind,
    spec: &ReinforcementSpec,
    params: &ModelParams,
    law: &SampleSizeLaw,
    start: SimplexPoint,
    opts: &FixedPointOptions,
) -> Result<(SimplexPoint, usize)> {
    kind.check(law)?;
    let mut cur = start;
    for it in 1..=opts.max_iter {
        let v = map_value(kind, spec, params, law, cur)?;
        let next = SimplexPoint::new(params.q1 * v, params.q2 * (1.0 - v))?;
        let step = (next.x - cur.x).abs().max((next.y - cur.y).abs());
        cur = next;
        if step < opts.tol {
            return Ok((cur, it));
        }
    }
    Err(Error::Convergence { iterations: opts.max_iter, x: cur.x, y: cur.y })
}

/// Margin, root and linearisation in one call.
pub fn solve_fixed_point(
    kind: MapKind,
    spec: &ReinforcementSpec,
    params: &ModelParams,
    law: &SampleSizeLaw,
    opts: &FixedPointOptions,
) -> Result<FixedPointReport> {
    params.validate()?;
    let margin = contraction_margin(kind, spec, params, law, opts.grid).ok();
    let mut caveats = Vec::new();
    match margin {
        Some(m) if m >= 1.0 => caveats.push(format!(
            "contraction margin {m:.4} ≥ 1: uniqueness of the root is not guaranteed"
        )),
        Some(_) if !(spec.is_constant() || params.p == 0.5) => {
            caveats.push(format!("contraction certified on a {0}×{0} grid only", opts.grid))
        }
        Some(_) => {}
        None => caveats.push("contraction margin unavailable (no derivative of g)".into()),
    }
    let start = SimplexPoint::new(params.q1 / 2.0, params.q2 / 2.0)?;
    let (root, iterations) = iterate_from(kind, spec, params, law, start, opts)?;
    let v = map_value(kind, spec, params, law, root)?;
    let residual = (params.q1 * v - root.x).abs().max((params.q2 * (1.0 - v) - root.y).abs());
    let z_star = if params.q1 > 0.0 { (1.0 - params.q1) * root.x / params.q1 } else { v };
    let report = FixedPointReport {
        map_kind: kind,
        q1: params.q1,
        q2: params.q2,
        x_star: root.x,
        y_star: root.y,
        z_star,
        alpha_star: f64::NAN,
        beta_star: f64::NAN,
        kappa: f64::NAN,
        rho: f64::NAN,
        residual,
        iterations,
        margin,
        caveats,
    };
    local_linearization(report, spec, params, law)
}

/// Fills `α*, β*` (gradient of `H_0` or `g` at the root), `κ` and `ρ`.
pub fn local_linearization(
    mut report: FixedPointReport,
    spec: &ReinforcementSpec,
    params: &ModelParams,
    law: &SampleSizeLaw,
) -> Result<FixedPointReport> {
    let root = SimplexPoint::new(report.x_star, report.y_star)?;
    let [a, b] = map_gradient(report.map_kind, spec, params, law, root)?;
    report.alpha_star = a;
    report.beta_star = b;
    report.kappa = params.q1 * a - params.q2 * b;
    report.rho = 1f64.min(1.0 - report.kappa);
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(p: f64, q1: f64, q2: f64) -> ModelParams {
        ModelParams::new(p, 0.5, q1, q2, 10).unwrap()
    }

    #[test]
    fn margin_examples() {
        let law = SampleSizeLaw::UniformOn1toN;
        let c = ReinforcementSpec::constant(0.2).unwrap();
        assert_eq!(contraction_margin(MapKind::HHat, &c, &params(1.0, 0.9, 0.9), &law, 50).unwrap(), 0.0);
        let lin = ReinforcementSpec::symmetric_affine(0.45).unwrap();
        let m = contraction_margin(MapKind::HHat, &lin, &params(1.0, 0.9, 0.9), &law, 50).unwrap();
        assert!((m - 0.81).abs() < 1e-12);
        let x = ReinforcementSpec::affine(0.0, 1.0, 0.0).unwrap();
        let m = contraction_margin(MapKind::HHat, &x, &params(1.0, 0.6, 0.6), &law, 50).unwrap();
        assert!((m - 1.2).abs() < 1e-12);
        let m = contraction_margin(MapKind::H, &x, &params(1.0, 0.6, 0.6), &SampleSizeLaw::FixedSize(3), 50).unwrap();
        assert!((m - 1.2).abs() < 1e-12);
    }

    #[test]
    fn worked_roots() {
        let opts = FixedPointOptions::default();
        let law = SampleSizeLaw::FixedSize(5);
        let c = ReinforcementSpec::constant(0.3).unwrap();
        let r = solve_fixed_point(MapKind::H, &c, &params(0.8, 0.6, 0.7), &law, &opts).unwrap();
        let g = 0.2 + 0.6 * 0.3;
        assert!((r.x_star - 0.6 * g).abs() < 1e-12 && (r.y_star - 0.7 * (1.0 - g)).abs() < 1e-12);
        assert_eq!((r.alpha_star, r.beta_star, r.kappa, r.rho), (0.0, 0.0, 0.0, 1.0));

        let lin = ReinforcementSpec::symmetric_affine(1.0 / 3.0).unwrap();
        let r = solve_fixed_point(MapKind::H, &lin, &params(1.0, 0.75, 0.75), &law, &opts).unwrap();
        assert!((r.x_star - 0.375).abs() < 1e-12 && (r.y_star - 0.375).abs() < 1e-12);
        assert!((r.z_star - 0.125).abs() < 1e-12);
        assert!((r.kappa - 0.5).abs() < 1e-12 && (r.rho - 0.5).abs() < 1e-12);
        assert!(r.residual <= 1e-12);

        let r = solve_fixed_point(MapKind::HHat, &ReinforcementSpec::symmetric_affine(0.45).unwrap(),
            &params(1.0, 0.9, 0.9), &SampleSizeLaw::UniformOn1toN, &opts).unwrap();
        assert!((r.kappa - 0.81).abs() < 1e-12 && (r.rho - 0.19).abs() < 1e-12);
        let bound = (opts.tol.ln() / r.margin.unwrap().ln()).ceil() as usize + 5;
        assert!(r.iterations <= bound, "{} > {bound}", r.iterations);
    }

    #[test]
    fn map_kind_must_match_law() {
        let c = ReinforcementSpec::constant(0.3).unwrap();
        let e = solve_fixed_point(MapKind::H, &c, &params(1.0, 0.5, 0.5), &SampleSizeLaw::UniformOn1toN,
            &FixedPointOptions::default());
        assert!(matches!(e, Err(Error::Case(_))));
    }

    #[test]
    fn non_convergence_reports_last_iterate() {
        let x = ReinforcementSpec::logistic(8.0).unwrap();
        let opts = FixedPointOptions { max_iter: 2, ..Default::default() };
        let e = solve_fixed_point(MapKind::HHat, &x, &params(1.0, 0.9, 0.5), &SampleSizeLaw::UniformOn1toN, &opts);
        assert!(matches!(e, Err(Error::Convergence { iterations: 2, .. })));
    }
}
