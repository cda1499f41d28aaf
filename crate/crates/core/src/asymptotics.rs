//! Regime classification and closed-form limiting covariances around the
//! fixed point, the Jacobian of the extended drift, and a fixed-step RK4
//! integrator for the mean-field ODE.
//!
//! Coordinates are ordered `(x, y, z) = (A/n, B/n, C/n)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fixed_point::FixedPointReport;
use crate::laws::SampleSizeLaw;
use crate::linalg::{expm, from_rows, lyapunov_quadrature, to_rows, Mat3, Quadrature, Rows3};
use crate::model::ModelParams;
use crate::operators::{drift, DriftKind};
use crate::reinforcement::ReinforcementSpec;

/// Distance from `κ = 1/2` or `κ = 0` within which the boundary case is used.
pub const BOUNDARY_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Regime {
    /// `κ = 1/2`: Gaussian at scale `√(n / log n)`
    D1Critical,
    /// `κ > 1/2`: random limit at scale `n^ρ`
    D2Superdiffusive,
    /// `κ ∈ (-1, 1/2) \ {0}`: Gaussian at scale `√n`
    D3aGaussian,
    /// `α* = β* = 0`: Gaussian with covariance `Γ`
    D3bGaussian,
    /// `κ = 0`, `α* ≠ 0`: Gaussian, Jordan block in the Jacobian
    D3cGaussianJordan,
}

impl Regime {
    pub fn name(&self) -> &'static str {
        match self {
            Regime::D1Critical => "D1_critical",
            Regime::D2Superdiffusive => "D2_superdiffusive",
            Regime::D3aGaussian => "D3a_gaussian",
            Regime::D3bGaussian => "D3b_gaussian",
            Regime::D3cGaussianJordan => "D3c_gaussian_jordan",
        }
    }
}

/// Factor applied to `θ_n - θ*` before comparing with the limit law.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Scaling {
    SqrtNOverLogN,
    PowerRho { rho: f64 },
    SqrtN,
}

impl Scaling {
    pub fn factor(&self, n: f64) -> f64 {
        match *self {
            Scaling::SqrtNOverLogN => (n / n.ln()).sqrt(),
            Scaling::PowerRho { rho } => n.powf(rho),
            Scaling::SqrtN => n.sqrt(),
        }
    }

    pub fn label(&self) -> String {
        match self {
            Scaling::SqrtNOverLogN => "sqrt(n/log n)".into(),
            Scaling::PowerRho { rho } => format!("n^{rho:.6}"),
            Scaling::SqrtN => "sqrt(n)".into(),
        }
    }
}

pub fn classify_regime(fp: &FixedPointReport) -> Result<Regime> {
    let k = fp.kappa;
    if !k.is_finite() {
        return Err(Error::Case("fixed-point report has no linearisation".into()));
    }
    if (k - 0.5).abs() <= BOUNDARY_TOL {
        return Ok(Regime::D1Critical);
    }
    if k > 0.5 {
        if k >= 1.0 {
            return Err(Error::Hypothesis(format!("κ = {k} ≥ 1 gives no positive scaling exponent")));
        }
        return Ok(Regime::D2Superdiffusive);
    }
    if k.abs() <= BOUNDARY_TOL {
        if fp.alpha_star.abs() <= BOUNDARY_TOL && fp.beta_star.abs() <= BOUNDARY_TOL {
            return Ok(Regime::D3bGaussian);
        }
        return Ok(Regime::D3cGaussianJordan);
    }
    if k <= -1.0 {
        return Err(Error::Hypothesis(format!("κ = {k} ≤ -1 is outside the covered range")));
    }
    Ok(Regime::D3aGaussian)
}

pub fn scaling_for(regime: Regime, fp: &FixedPointReport) -> Scaling {
    match regime {
        Regime::D1Critical => Scaling::SqrtNOverLogN,
        Regime::D2Superdiffusive => Scaling::PowerRho { rho: fp.rho },
        _ => Scaling::SqrtN,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StructuralMatrices {
    pub gamma: Rows3,
    pub t: Rows3,
    /// Only defined for `α* ≠ 0`.
    pub tbar: Option<Rows3>,
}

pub fn gamma_matrix(fp: &FixedPointReport) -> Rows3 {
    let (x, y, z) = (fp.x_star, fp.y_star, fp.z_star);
    [
        [x * (1.0 - x), -x * y, -x * z],
        [-x * y, y * (1.0 - y), -y * z],
        [-x * z, -y * z, z * (1.0 - z)],
    ]
}

pub fn structural_matrices(fp: &FixedPointReport) -> StructuralMatrices {
    let (a, b, q1, q2) = (fp.alpha_star, fp.beta_star, fp.q1, fp.q2);
    let t = [[-b, 0.0, -q1], [a, 0.0, q2], [0.0, 1.0, -1.0 + q1]];
    let tbar = (a != 0.0).then(|| [[-q1, -1.0 / a, 0.0], [q2, 0.0, 0.0], [-1.0 + q1, 0.0, 1.0]]);
    StructuralMatrices { gamma: gamma_matrix(fp), t, tbar }
}

/// Upper triangle of a symmetric 3×3 coefficient set.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Blocks {
    pub e11: f64,
    pub e12: f64,
    pub e13: f64,
    pub e22: f64,
    pub e23: f64,
    pub e33: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CBlocks {
    pub c13: f64,
    pub c23: f64,
    pub c33: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoefficientBlocks {
    pub a: Option<Blocks>,
    pub b: Option<Blocks>,
    pub c: Option<CBlocks>,
}

pub fn a_blocks(fp: &FixedPointReport) -> Result<Blocks> {
    let k = fp.kappa;
    if k.abs() <= BOUNDARY_TOL {
        return Err(Error::Case("A blocks need κ ≠ 0; use the D3b/D3c path".into()));
    }
    let (x, y, z) = (fp.x_star, fp.y_star, fp.z_star);
    let (al, be, q1, q2) = (fp.alpha_star, fp.beta_star, fp.q1, fp.q2);
    let vx = x * (1.0 - x);
    let vy = y * (1.0 - y);
    let cxy = x * y;
    let k2 = k * k;
    let quad = al * al * vx - 2.0 * al * be * cxy + be * be * vy;
    let mixed = q2 * al * vx - (al * q1 + be * q2) * cxy + q1 * be * vy;
    let lin = al * x + be * y;
    let r = 1.0 - q1;
    Ok(Blocks {
        e11: (q2 * q2 * vx - 2.0 * q1 * q2 * cxy + q1 * q1 * vy) / k2,
        e12: -r * mixed / k2 - z * (q2 * x + q1 * y) / k,
        e13: -mixed / k2,
        e22: r * r * quad / k2 + 2.0 * r * z * lin / k + z * (1.0 - z),
        e23: r * quad / k2 + z * lin / k,
        e33: quad / k2,
    })
}

pub fn c_blocks(fp: &FixedPointReport, a: &Blocks) -> Result<CBlocks> {
    let k = fp.kappa;
    if (k - 0.5).abs() <= BOUNDARY_TOL || (k - 1.0).abs() <= BOUNDARY_TOL {
        return Err(Error::Case("C blocks need κ ∉ {1/2, 1}; use the D1 path".into()));
    }
    Ok(CBlocks { c13: a.e13 / (1.0 - k), c23: a.e23 / (1.0 - k), c33: a.e33 / (1.0 - 2.0 * k) })
}

pub fn b_blocks(fp: &FixedPointReport) -> Result<Blocks> {
    let (x, y, z) = (fp.x_star, fp.y_star, fp.z_star);
    let (al, q1, q2) = (fp.alpha_star, fp.q1, fp.q2);
    if al.abs() <= BOUNDARY_TOL || q2 == 0.0 {
        return Err(Error::Case("B blocks need α* ≠ 0 and q2 > 0; use the D3b path".into()));
    }
    let r = 1.0 - q1;
    let vy = y * (1.0 - y);
    let q22 = q2 * q2;
    Ok(Blocks {
        e11: vy / q22,
        e12: al * x * y / q2 - q1 * al * vy / q22,
        e13: r * vy / q22 - y * z / q2,
        e22: al * al * (x * (1.0 - x) - 2.0 * q1 * x * y / q2 + q1 * q1 * vy / q22),
        e23: al * (r * x + q1 * z) * y / q2 - al * q1 * r * vy / q22 + al * x * z,
        e33: r * r * vy / q22 - 2.0 * r * y * z / q2 + z * (1.0 - z),
    })
}

pub fn coefficient_blocks(fp: &FixedPointReport) -> CoefficientBlocks {
    let a = a_blocks(fp).ok();
    let c = a.as_ref().and_then(|a| c_blocks(fp, a).ok());
    CoefficientBlocks { a, b: b_blocks(fp).ok(), c }
}

/// Limit of the scaled deviation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum LimitLaw {
    Gaussian { scaling: Scaling, sigma: Rows3 },
    /// `n^ρ (θ_n - θ*) → W v` for a scalar random `W`; only `v` is known.
    Random { scaling: Scaling, direction: [f64; 3] },
}

fn sandwich(t: &Rows3, m: &Rows3) -> Rows3 {
    let t = from_rows(t);
    to_rows(&(t * from_rows(m) * t.transpose()))
}

/// Unit vector along `(T^{-1})^t e3`.
pub fn d2_direction(fp: &FixedPointReport) -> Result<[f64; 3]> {
    let t = from_rows(&structural_matrices(fp).t);
    let inv = t.try_inverse().ok_or_else(|| Error::Case("T is singular".into()))?;
    let v = inv.transpose().column(2).into_owned();
    let v = v / v.norm();
    Ok([v[0], v[1], v[2]])
}

pub fn limit_covariance(fp: &FixedPointReport, regime: Regime) -> Result<LimitLaw> {
    let scaling = scaling_for(regime, fp);
    let sm = structural_matrices(fp);
    let sigma = match regime {
        Regime::D1Critical => {
            let a33 = a_blocks(fp)?.e33;
            let (q1, q2) = (fp.q1, fp.q2);
            let r = 1.0 - q1;
            let v = [q1, -q2, r];
            let mut s = [[0.0; 3]; 3];
            for i in 0..3 {
                for j in 0..3 {
                    s[i][j] = a33 * v[i] * v[j];
                }
            }
            s
        }
        Regime::D2Superdiffusive => {
            return Ok(LimitLaw::Random { scaling, direction: d2_direction(fp)? });
        }
        Regime::D3aGaussian => {
            let a = a_blocks(fp)?;
            let c = c_blocks(fp, &a)?;
            let inner = [[a.e11, a.e12, c.c13], [a.e12, a.e22, c.c23], [c.c13, c.c23, c.c33]];
            sandwich(&sm.t, &inner)
        }
        Regime::D3bGaussian => sm.gamma,
        Regime::D3cGaussianJordan => {
            let b = b_blocks(fp)?;
            let tbar = sm.tbar.ok_or_else(|| Error::Case("T̄ needs α* ≠ 0".into()))?;
            let inner = [
                [b.e11 + 2.0 * b.e12 + 2.0 * b.e22, b.e12 + b.e22, b.e13 + b.e23],
                [b.e12 + b.e22, b.e22, b.e23],
                [b.e13 + b.e23, b.e23, b.e33],
            ];
            sandwich(&tbar, &inner)
        }
    };
    Ok(LimitLaw::Gaussian { scaling, sigma })
}

/// Jacobian of the extended drift at the root, with its closed-form spectrum
/// `{-1, -1, -1 + κ}`.
pub fn jacobian_at_root(fp: &FixedPointReport) -> (Rows3, [f64; 3]) {
    let (a, b, q1, q2) = (fp.alpha_star, fp.beta_star, fp.q1, fp.q2);
    let j = [
        [q1 * a - 1.0, q1 * b, 0.0],
        [-q2 * a, -q2 * b - 1.0, 0.0],
        [(1.0 - q1) * a, (1.0 - q1) * b, -1.0],
    ];
    (j, [-1.0, -1.0, -1.0 + fp.kappa])
}

/// `∫_0^∞ e^{(J + I/2) u} Γ e^{(J + I/2)^t u} du` by quadrature, for `κ < 1/2`.
pub fn covariance_quadrature(fp: &FixedPointReport, step: f64) -> Result<Quadrature> {
    if fp.kappa >= 0.5 {
        return Err(Error::Case("the covariance integral diverges for κ ≥ 1/2".into()));
    }
    let (j, _) = jacobian_at_root(fp);
    let b = from_rows(&j) + Mat3::identity() * 0.5;
    let gap = 0.5f64.min(0.5 - fp.kappa);
    Ok(lyapunov_quadrature(&b, &from_rows(&gamma_matrix(fp)), gap, step))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AsymptoticsReport {
    pub regime: Regime,
    pub scaling: Scaling,
    pub gamma: Rows3,
    pub t: Rows3,
    pub tbar: Option<Rows3>,
    pub blocks: CoefficientBlocks,
    pub sigma: Option<Rows3>,
    pub direction: Option<[f64; 3]>,
    pub jacobian: Rows3,
    pub eigenvalues: [f64; 3],
    pub fp: FixedPointReport,
    pub caveats: Vec<String>,
}

pub fn analyze(fp: &FixedPointReport) -> Result<AsymptoticsReport> {
    let regime = classify_regime(fp)?;
    let sm = structural_matrices(fp);
    let law = limit_covariance(fp, regime)?;
    let (jacobian, eigenvalues) = jacobian_at_root(fp);
    let mut caveats = fp.caveats.clone();
    let k = fp.kappa;
    let near = |b: f64| (k - b).abs() <= BOUNDARY_TOL && k != b;
    if near(0.5) || near(0.0) {
        caveats.push(format!("κ = {k:e} resolved to the boundary case {}", regime.name()));
    }
    let (scaling, sigma, direction) = match law {
        LimitLaw::Gaussian { scaling, sigma } => (scaling, Some(sigma), None),
        LimitLaw::Random { scaling, direction } => {
            caveats.push("the law of the scalar limit W is not characterised; only its direction is reported".into());
            (scaling, None, Some(direction))
        }
    };
    Ok(AsymptoticsReport {
        regime,
        scaling,
        gamma: sm.gamma,
        t: sm.t,
        tbar: sm.tbar,
        blocks: coefficient_blocks(fp),
        sigma,
        direction,
        jacobian,
        eigenvalues,
        fp: fp.clone(),
        caveats,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OdePath {
    pub times: Vec<f64>,
    /// `(x, y)` or `(x, y, z)` per time.
    pub points: Vec<Vec<f64>>,
}

impl OdePath {
    pub fn terminal(&self) -> &[f64] {
        self.points.last().expect("paths hold at least the initial point")
    }
}

const PATH_TOL: f64 = 1e-9;

fn simplex_excess(p: &[f64]) -> f64 {
    let neg = p.iter().fold(0.0f64, |m, &v| m.max(-v));
    neg.max(p.iter().sum::<f64>() - 1.0)
}

fn project(p: &[f64]) -> Vec<f64> {
    let mut q: Vec<f64> = p.iter().map(|v| v.max(0.0)).collect();
    let s: f64 = q.iter().sum();
    if s > 1.0 {
        q.iter_mut().for_each(|v| *v /= s);
    }
    q
}

/// Classical RK4 for `θ' = drift(θ)`, recording every step.
pub fn integrate_mean_field(
    kind: DriftKind,
    spec: &ReinforcementSpec,
    params: &ModelParams,
    law: &SampleSizeLaw,
    init: &[f64],
    dt: f64,
    t_end: f64,
) -> Result<OdePath> {
    if !(dt > 0.0 && dt <= 0.1) {
        return Err(crate::error::invalid("dt", format!("{dt} must lie in (0, 0.1]")));
    }
    if init.len() != kind.dim() || simplex_excess(init) > PATH_TOL {
        return Err(Error::Domain(format!("initial point {init:?}")));
    }
    let steps = (t_end / dt).round() as usize;
    let f = |p: &[f64]| drift(kind, spec, params, law, &project(p));
    let axpy = |p: &[f64], k: &[f64], h: f64| -> Vec<f64> { p.iter().zip(k).map(|(a, b)| a + h * b).collect() };
    let mut times = Vec::with_capacity(steps + 1);
    let mut points = Vec::with_capacity(steps + 1);
    let mut cur = init.to_vec();
    times.push(0.0);
    points.push(cur.clone());
    for s in 1..=steps {
        let k1 = f(&cur)?;
        let k2 = f(&axpy(&cur, &k1, dt / 2.0))?;
        let k3 = f(&axpy(&cur, &k2, dt / 2.0))?;
        let k4 = f(&axpy(&cur, &k3, dt))?;
        for i in 0..cur.len() {
            cur[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
        let t = s as f64 * dt;
        if simplex_excess(&cur) > PATH_TOL {
            return Err(Error::Integration { t, x: cur[0], y: cur[1] });
        }
        times.push(t);
        points.push(cur.clone());
    }
    Ok(OdePath { times, points })
}

/// `e^{J t}` applied to an initial deviation; the linearised flow near the root.
pub fn linearized_flow(fp: &FixedPointReport, deviation: [f64; 3], t: f64) -> [f64; 3] {
    let (j, _) = jacobian_at_root(fp);
    let e = expm(&(from_rows(&j) * t));
    let v = e * nalgebra::Vector3::from(deviation);
    [v[0], v[1], v[2]]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixed_point::MapKind;
    use crate::linalg::{max_abs_diff, symmetric_eigenvalues};

    fn fp(x: f64, y: f64, q1: f64, q2: f64, a: f64, b: f64) -> FixedPointReport {
        let kappa = q1 * a - q2 * b;
        FixedPointReport {
            map_kind: MapKind::HHat,
            q1,
            q2,
            x_star: x,
            y_star: y,
            z_star: (1.0 - q1) * x / q1,
            alpha_star: a,
            beta_star: b,
            kappa,
            rho: 1f64.min(1.0 - kappa),
            residual: 0.0,
            iterations: 0,
            margin: None,
            caveats: vec![],
        }
    }

    fn critical() -> FixedPointReport {
        fp(0.375, 0.375, 0.75, 0.75, 1.0 / 3.0, -1.0 / 3.0)
    }

    #[test]
    fn regimes() {
        assert_eq!(classify_regime(&critical()).unwrap(), Regime::D1Critical);
        let d2 = fp(0.45, 0.45, 0.9, 0.9, 0.45, -0.45);
        assert_eq!(classify_regime(&d2).unwrap(), Regime::D2Superdiffusive);
        assert_eq!(scaling_for(Regime::D2Superdiffusive, &d2), Scaling::PowerRho { rho: d2.rho });
        assert_eq!(classify_regime(&fp(0.25, 0.25, 0.5, 0.5, 0.0, 0.0)).unwrap(), Regime::D3bGaussian);
        assert_eq!(classify_regime(&fp(0.25, 0.25, 0.5, 0.5, 0.4, 0.4)).unwrap(), Regime::D3cGaussianJordan);
        assert_eq!(classify_regime(&fp(0.25, 0.25, 0.5, 0.5, 0.4, 0.1)).unwrap(), Regime::D3aGaussian);
        assert!(matches!(classify_regime(&fp(0.25, 0.25, 0.9, 0.9, -0.6, 0.6)), Err(Error::Hypothesis(_))));
        let mut near = critical();
        near.kappa += 5e-10;
        assert_eq!(classify_regime(&near).unwrap(), Regime::D1Critical);
        assert!(analyze(&near).unwrap().caveats.iter().any(|c| c.contains("boundary")));
    }

    #[test]
    fn structural_examples() {
        let half = fp(0.25, 0.25, 0.5, 0.5, 0.0, 0.0);
        let sm = structural_matrices(&half);
        for i in 0..3 {
            for j in 0..3 {
                let want = if i == j { 3.0 / 16.0 } else { -1.0 / 16.0 };
                assert!((sm.gamma[i][j] - want).abs() < 1e-15);
            }
        }
        assert_eq!(from_rows(&sm.t).determinant(), 0.0);
        assert!(sm.tbar.is_none());
        let c = critical();
        assert!((from_rows(&structural_matrices(&c).t).determinant() + 0.5).abs() < 1e-12);
        let tb = structural_matrices(&c).tbar.unwrap();
        assert!((from_rows(&tb).determinant() - 0.75 * 3.0).abs() < 1e-12);
    }

    #[test]
    fn block_examples() {
        let a = a_blocks(&critical()).unwrap();
        assert!((a.e33 - 1.0 / 3.0).abs() < 1e-12);
        assert!(matches!(c_blocks(&critical(), &a), Err(Error::Case(_))));
        let zero = a_blocks(&fp(0.0, 0.0, 0.5, 0.5, 0.3, 0.1)).unwrap();
        assert_eq!([zero.e11, zero.e12, zero.e13, zero.e22, zero.e23, zero.e33], [0.0; 6]);
        assert!(matches!(a_blocks(&fp(0.2, 0.2, 0.5, 0.5, 0.0, 0.0)), Err(Error::Case(_))));
        assert!(matches!(b_blocks(&fp(0.2, 0.2, 0.5, 0.5, 0.0, 0.0)), Err(Error::Case(_))));
    }

    #[test]
    fn critical_covariance() {
        let LimitLaw::Gaussian { sigma, scaling } = limit_covariance(&critical(), Regime::D1Critical).unwrap() else {
            panic!()
        };
        assert_eq!(scaling, Scaling::SqrtNOverLogN);
        let want = [[0.5625, -0.5625, 0.1875], [-0.5625, 0.5625, -0.1875], [0.1875, -0.1875, 0.0625]];
        for i in 0..3 {
            for j in 0..3 {
                assert!((sigma[i][j] - want[i][j] / 3.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn gaussian_regimes_solve_the_lyapunov_equation() {
        let cases = [
            fp(0.3, 0.25, 0.6, 0.5, 0.4, 0.1),
            fp(0.3, 0.25, 0.6, 0.5, -0.5, 0.6),
            fp(0.3, 0.25, 0.6, 0.5, 0.5, 0.6),
            fp(0.25, 0.25, 0.5, 0.5, 0.0, 0.0),
        ];
        for c in cases {
            let regime = classify_regime(&c).unwrap();
            let LimitLaw::Gaussian { sigma, .. } = limit_covariance(&c, regime).unwrap() else { panic!() };
            let (j, _) = jacobian_at_root(&c);
            let b = from_rows(&j) + Mat3::identity() * 0.5;
            let r = crate::linalg::lyapunov_residual(&b, &from_rows(&sigma), &from_rows(&gamma_matrix(&c)));
            assert!(r.norm() < 1e-12, "{regime:?}: {r}");
            assert!(symmetric_eigenvalues(&from_rows(&sigma))[0] >= -1e-10);
            if regime == Regime::D3aGaussian {
                let q = covariance_quadrature(&c, 0.005).unwrap();
                assert!(max_abs_diff(&to_rows(&q.value), &sigma) < 1e-6);
            }
        }
    }

    #[test]
    fn jacobian_spectrum_and_diagonalisation() {
        let c = fp(0.45, 0.45, 0.9, 0.9, 0.45, -0.45);
        let (j, eig) = jacobian_at_root(&c);
        let mut num: Vec<f64> = from_rows(&j).complex_eigenvalues().iter().map(|z| z.re).collect();
        num.sort_by(f64::total_cmp);
        let mut want = eig.to_vec();
        want.sort_by(f64::total_cmp);
        for (a, b) in num.iter().zip(&want) {
            assert!((a - b).abs() < 1e-10);
        }
        let t = from_rows(&structural_matrices(&c).t);
        let d = t.try_inverse().unwrap() * from_rows(&j) * t;
        let want = Mat3::from_diagonal(&nalgebra::Vector3::new(-1.0, -1.0, -1.0 + c.kappa));
        assert!((d - want).norm() < 1e-10, "{d}");
        let (j0, _) = jacobian_at_root(&fp(0.25, 0.25, 0.5, 0.5, 0.0, 0.0));
        assert_eq!(from_rows(&j0), -Mat3::identity());
    }

    #[test]
    fn d2_direction_is_unit_and_left_eigenvector() {
        let c = fp(0.45, 0.45, 0.9, 0.9, 0.45, -0.45);
        let LimitLaw::Random { direction, .. } = limit_covariance(&c, Regime::D2Superdiffusive).unwrap() else {
            panic!()
        };
        let v = nalgebra::Vector3::from(direction);
        assert!((v.norm() - 1.0).abs() < 1e-12);
        let (j, _) = jacobian_at_root(&c);
        let lhs = from_rows(&j).transpose() * v;
        assert!((lhs - v * (-1.0 + c.kappa)).norm() < 1e-10);
    }

    #[test]
    fn ode_constant_g_matches_exponential_relaxation() {
        let spec = ReinforcementSpec::constant(0.3).unwrap();
        let params = ModelParams::new(1.0, 0.5, 0.6, 0.7, 1).unwrap();
        let law = SampleSizeLaw::UniformOn1toN;
        let path = integrate_mean_field(DriftKind::HHat, &spec, &params, &law, &[0.1, 0.8], 1e-3, 1.0).unwrap();
        let (xs, ys) = (0.6 * 0.3, 0.7 * 0.7);
        let e = (-1f64).exp();
        let end = path.terminal();
        assert!((end[0] - (xs + (0.1 - xs) * e)).abs() < 1e-6);
        assert!((end[1] - (ys + (0.8 - ys) * e)).abs() < 1e-6);
        let still = integrate_mean_field(DriftKind::HHat, &spec, &params, &law, &[xs, ys], 0.01, 1.0).unwrap();
        assert!(still.points.iter().all(|p| (p[0] - xs).abs() < 1e-15 && (p[1] - ys).abs() < 1e-15));
    }

    #[test]
    fn linearized_flow_decays() {
        let c = fp(0.3, 0.25, 0.6, 0.5, 0.4, 0.1);
        let v = linearized_flow(&c, [0.1, -0.05, 0.02], 30.0);
        assert!(v.iter().all(|x| x.abs() < 1e-5));
    }
}
