//! Reinforcement functions `F` on the simplex and the derived selection
//! probability `g = pF + (1 - p)(1 - F)`.
//!
//! Smoothness constants are declared by the caller (or exact for the
//! built-in library) because the approximation bounds need true suprema,
//! which sampling can only under-estimate.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::model::ModelParams;

/// Tolerance for simplex membership checks.
pub const SIMPLEX_TOL: f64 = 1e-12;

/// Finite-difference step for gradients.
pub const FD_STEP: f64 = 1e-5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimplexPoint {
    pub x: f64,
    pub y: f64,
}

impl SimplexPoint {
    /// Checks membership up to [`SIMPLEX_TOL`] and clips tiny excursions.
    pub fn new(x: f64, y: f64) -> Result<Self> {
        if !(x.is_finite() && y.is_finite())
            || x < -SIMPLEX_TOL
            || y < -SIMPLEX_TOL
            || x + y > 1.0 + SIMPLEX_TOL
        {
            return Err(Error::Domain(format!("({x}, {y}) is outside the simplex")));
        }
        let (x, y) = (x.max(0.0), y.max(0.0));
        let s = x + y;
        if s > 1.0 {
            Ok(SimplexPoint { x: x / s, y: y / s })
        } else {
            Ok(SimplexPoint { x, y })
        }
    }
}

#[inline]
fn inside(x: f64, y: f64) -> bool {
    x >= 0.0 && y >= 0.0 && x + y <= 1.0
}

/// Sup-norm bounds on the second partials of `F`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct HessianBounds {
    pub m11: f64,
    pub m12: f64,
    pub m22: f64,
}

impl HessianBounds {
    pub fn max(&self) -> f64 {
        self.m11.max(self.m12).max(self.m22)
    }

    /// Bound on the operator norm of the Hessian via its Frobenius norm.
    pub fn frobenius(&self) -> f64 {
        (self.m11 * self.m11 + 2.0 * self.m12 * self.m12 + self.m22 * self.m22).sqrt()
    }
}

/// Declared modulus of continuity of `∇F`: `ω(∇F; δ) ≤ coefficient · δ^exponent`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GradientModulus {
    pub coefficient: f64,
    pub exponent: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Smoothness {
    /// `|F(u) - F(v)| ≤ constant · |u - v|₂^exponent`.
    Holder { constant: f64, exponent: f64 },
    C1 { lipschitz: Option<f64>, modulus: Option<GradientModulus> },
    C2 { lipschitz: f64, hessian: HessianBounds },
}

/// Smoothness levels that the series criteria distinguish.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SmoothnessClass {
    Lipschitz,
    C1,
    C2,
}

impl Smoothness {
    /// Strongest class the declaration supports, if any.
    pub fn class(&self) -> Option<SmoothnessClass> {
        match *self {
            Smoothness::Holder { exponent, .. } if exponent >= 1.0 => Some(SmoothnessClass::Lipschitz),
            Smoothness::Holder { .. } => None,
            Smoothness::C1 { .. } => Some(SmoothnessClass::C1),
            Smoothness::C2 { .. } => Some(SmoothnessClass::C2),
        }
    }

    pub fn class_name(&self) -> &'static str {
        match self {
            Smoothness::Holder { .. } => "holder",
            Smoothness::C1 { .. } => "C1",
            Smoothness::C2 { .. } => "C2",
        }
    }

    pub fn is_differentiable(&self) -> bool {
        !matches!(self, Smoothness::Holder { .. })
    }

    /// Hölder constant and exponent of `F`, if known.
    pub fn holder(&self) -> Option<(f64, f64)> {
        match *self {
            Smoothness::Holder { constant, exponent } => Some((constant, exponent)),
            Smoothness::C1 { lipschitz, .. } => lipschitz.map(|l| (l, 1.0)),
            Smoothness::C2 { lipschitz, .. } => Some((lipschitz, 1.0)),
        }
    }
}

pub type ScalarFn = Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>;
pub type GradientFn = Arc<dyn Fn(f64, f64) -> [f64; 2] + Send + Sync>;

#[derive(Clone)]
enum Kind {
    Constant(f64),
    Affine { c0: f64, a: f64, b: f64 },
    /// `c0 + a x + b y + cxx x² + cxy x y + cyy y²`
    Quadratic([f64; 6]),
    /// `1 / (1 + exp(-s (x - y)))`
    Logistic(f64),
    Custom { f: ScalarFn, grad: Option<GradientFn> },
}

/// A reinforcement function with its smoothness metadata.
#[derive(Clone)]
pub struct ReinforcementSpec {
    kind: Kind,
    smoothness: Smoothness,
    label: String,
}

impl fmt::Debug for ReinforcementSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ReinforcementSpec")
            .field("label", &self.label)
            .field("smoothness", &self.smoothness)
            .finish()
    }
}

/// `g` from `p` and `F`. Written so that `p = 1/2` gives exactly `1/2`.
#[inline]
pub fn combine(p: f64, f: f64) -> f64 {
    ((1.0 - p) + (2.0 * p - 1.0) * f).clamp(0.0, 1.0)
}

fn vertices_in_unit(c0: f64, a: f64, b: f64) -> bool {
    [c0, c0 + a, c0 + b].iter().all(|v| (0.0..=1.0).contains(v))
}

impl ReinforcementSpec {
    pub fn constant(c: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&c) {
            return Err(invalid("c", format!("{c} not in [0, 1]")));
        }
        Ok(ReinforcementSpec {
            kind: Kind::Constant(c),
            smoothness: Smoothness::C2 { lipschitz: 0.0, hessian: HessianBounds::default() },
            label: format!("constant(c={c})"),
        })
    }

    /// `F(x, y) = c0 + a x + b y`.
    pub fn affine(c0: f64, a: f64, b: f64) -> Result<Self> {
        if !vertices_in_unit(c0, a, b) {
            return Err(invalid("affine", format!("c0={c0}, a={a}, b={b} leaves [0, 1] on the simplex")));
        }
        Ok(ReinforcementSpec {
            kind: Kind::Affine { c0, a, b },
            smoothness: Smoothness::C2 { lipschitz: a.hypot(b), hessian: HessianBounds::default() },
            label: format!("affine(c0={c0}, a={a}, b={b})"),
        })
    }

    /// `F(x, y) = 1/2 + a (x - y)`.
    pub fn symmetric_affine(a: f64) -> Result<Self> {
        Self::affine(0.5, a, -a)
    }

    /// `F(x, y) = c0 + a x + b y + cxx x² + cxy x y + cyy y²`.
    pub fn quadratic(coef: [f64; 6]) -> Result<Self> {
        let [c0, a, b, cxx, cxy, cyy] = coef;
        let hessian = HessianBounds { m11: (2.0 * cxx).abs(), m12: cxy.abs(), m22: (2.0 * cyy).abs() };
        // the gradient is affine, so its norm peaks at a vertex
        let lipschitz = [(0.0, 0.0), (1.0, 0.0), (0.0, 1.0)]
            .iter()
            .map(|&(x, y)| (a + 2.0 * cxx * x + cxy * y).hypot(b + cxy * x + 2.0 * cyy * y))
            .fold(0.0, f64::max);
        let spec = ReinforcementSpec {
            kind: Kind::Quadratic(coef),
            smoothness: Smoothness::C2 { lipschitz, hessian },
            label: format!("quadratic(c0={c0}, a={a}, b={b}, cxx={cxx}, cxy={cxy}, cyy={cyy})"),
        };
        spec.check_range()?;
        Ok(spec)
    }

    /// `F(x, y) = σ(s (x - y))` with the logistic sigmoid `σ`.
    pub fn logistic(s: f64) -> Result<Self> {
        if !s.is_finite() {
            return Err(invalid("s", "must be finite"));
        }
        let m = s * s / (6.0 * 3f64.sqrt());
        Ok(ReinforcementSpec {
            kind: Kind::Logistic(s),
            smoothness: Smoothness::C2 {
                lipschitz: s.abs() * std::f64::consts::SQRT_2 / 4.0,
                hessian: HessianBounds { m11: m, m12: m, m22: m },
            },
            label: format!("logistic(s={s})"),
        })
    }

    /// User-supplied `F`. Range is checked on a grid and, for C2
    /// declarations, the Hessian bounds are checked against finite
    /// differences.
    pub fn custom(
        label: impl Into<String>,
        f: impl Fn(f64, f64) -> f64 + Send + Sync + 'static,
        smoothness: Smoothness,
        grad: Option<GradientFn>,
    ) -> Result<Self> {
        let spec = ReinforcementSpec {
            kind: Kind::Custom { f: Arc::new(f), grad },
            smoothness,
            label: label.into(),
        };
        spec.check_range()?;
        spec.check_declared_hessian()?;
        Ok(spec)
    }

    /// Built-in spec by name with named arguments.
    pub fn builtin(kind: &str, args: &BTreeMap<String, f64>) -> Result<Self> {
        let known: &[&str] = match kind {
            "constant" => &["c"],
            "affine" => &["c0", "a", "b"],
            "quadratic" => &["c0", "a", "b", "cxx", "cxy", "cyy"],
            "logistic" => &["s"],
            other => return Err(invalid("kind", format!("unknown reinforcement kind `{other}`"))),
        };
        if let Some(extra) = args.keys().find(|k| !known.contains(&k.as_str())) {
            return Err(invalid("reinforcement", format!("`{extra}` is not a parameter of `{kind}`")));
        }
        let get = |k: &str, d: f64| args.get(k).copied().unwrap_or(d);
        match kind {
            "constant" => Self::constant(get("c", 0.5)),
            "affine" => {
                let a = get("a", 0.0);
                Self::affine(get("c0", 0.5), a, get("b", -a))
            }
            "quadratic" => Self::quadratic([
                get("c0", 0.0),
                get("a", 0.0),
                get("b", 0.0),
                get("cxx", 0.0),
                get("cxy", 0.0),
                get("cyy", 0.0),
            ]),
            "logistic" => Self::logistic(get("s", 1.0)),
            _ => unreachable!(),
        }
    }

    /// Names and argument lists of the built-in library.
    pub fn catalog() -> Vec<(&'static str, &'static str, &'static str)> {
        vec![
            ("constant", "c=0.5", "C2; g constant, zero gradient"),
            ("affine", "c0=0.5 a=0 b=-a", "C2; Lipschitz |(a,b)|, zero Hessian"),
            ("quadratic", "c0 a b cxx cxy cyy (default 0)", "C2; exact Hessian bounds |2cxx|, |cxy|, |2cyy|"),
            ("logistic", "s=1", "C2; Lipschitz s*sqrt(2)/4, Hessian bound s^2/(6 sqrt 3)"),
        ]
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn smoothness(&self) -> &Smoothness {
        &self.smoothness
    }

    pub fn is_constant(&self) -> bool {
        matches!(self.kind, Kind::Constant(_))
    }

    /// `F(x, y)` without range checks.
    #[inline]
    pub fn f(&self, x: f64, y: f64) -> f64 {
        match &self.kind {
            Kind::Constant(c) => *c,
            Kind::Affine { c0, a, b } => c0 + a * x + b * y,
            Kind::Quadratic([c0, a, b, cxx, cxy, cyy]) => {
                c0 + a * x + b * y + cxx * x * x + cxy * x * y + cyy * y * y
            }
            Kind::Logistic(s) => 1.0 / (1.0 + (-s * (x - y)).exp()),
            Kind::Custom { f, .. } => f(x, y),
        }
    }

    /// `F(x, y)`, rejecting values outside `[0, 1]` beyond rounding.
    pub fn checked_f(&self, x: f64, y: f64) -> Result<f64> {
        let v = self.f(x, y);
        if !(-SIMPLEX_TOL..=1.0 + SIMPLEX_TOL).contains(&v) {
            return Err(Error::ReinforcementRange { value: v, x, y });
        }
        Ok(v.clamp(0.0, 1.0))
    }

    /// `g(x, y)` for a point assumed to lie in the simplex.
    #[inline]
    pub fn g(&self, p: f64, x: f64, y: f64) -> f64 {
        combine(p, self.f(x, y))
    }

    pub fn eval_g(&self, params: &ModelParams, pt: SimplexPoint) -> Result<f64> {
        let pt = SimplexPoint::new(pt.x, pt.y)?;
        Ok(combine(params.p, self.checked_f(pt.x, pt.y)?))
    }

    fn check_range(&self) -> Result<()> {
        let m = 200;
        for i in 0..=m {
            for j in 0..=(m - i) {
                let (x, y) = (i as f64 / m as f64, j as f64 / m as f64);
                self.checked_f(x, y)?;
            }
        }
        Ok(())
    }

    fn check_declared_hessian(&self) -> Result<()> {
        let Smoothness::C2 { hessian, .. } = self.smoothness else {
            return Ok(());
        };
        let est = self.estimate_hessian_sup(50);
        let declared = [hessian.m11, hessian.m12, hessian.m22];
        for (d, e) in declared.iter().zip(est) {
            if *d < e - 1e-3 * (1.0 + e) {
                return Err(invalid(
                    "hessian",
                    format!("declared bounds {declared:?} below grid estimate {est:?}"),
                ));
            }
        }
        Ok(())
    }

    /// Grid estimate of `(sup|F_xx|, sup|F_xy|, sup|F_yy|)` on interior
    /// points. A lower bound on the true suprema.
    pub fn estimate_hessian_sup(&self, m: usize) -> [f64; 3] {
        let h = 1e-4;
        let mut out = [0.0f64; 3];
        for i in 1..m {
            for j in 1..(m - i) {
                let (x, y) = (i as f64 / m as f64, j as f64 / m as f64);
                if x - h < 0.0 || y - h < 0.0 || x + y + 2.0 * h > 1.0 {
                    continue;
                }
                let f = |dx: f64, dy: f64| self.f(x + dx, y + dy);
                let fxx = (f(h, 0.0) - 2.0 * f(0.0, 0.0) + f(-h, 0.0)) / (h * h);
                let fyy = (f(0.0, h) - 2.0 * f(0.0, 0.0) + f(0.0, -h)) / (h * h);
                let fxy = (f(h, h) - f(h, -h) - f(-h, h) + f(-h, -h)) / (4.0 * h * h);
                out[0] = out[0].max(fxx.abs());
                out[1] = out[1].max(fxy.abs());
                out[2] = out[2].max(fyy.abs());
            }
        }
        out
    }

    fn analytic_grad_f(&self, x: f64, y: f64) -> Option<[f64; 2]> {
        match &self.kind {
            Kind::Constant(_) => Some([0.0, 0.0]),
            Kind::Affine { a, b, .. } => Some([*a, *b]),
            Kind::Quadratic([_, a, b, cxx, cxy, cyy]) => {
                Some([a + 2.0 * cxx * x + cxy * y, b + cxy * x + 2.0 * cyy * y])
            }
            Kind::Logistic(s) => {
                let sig = 1.0 / (1.0 + (-s * (x - y)).exp());
                let d = s * sig * (1.0 - sig);
                Some([d, -d])
            }
            Kind::Custom { grad, .. } => grad.as_ref().map(|g| g(x, y)),
        }
    }

    /// Derivative of `F` along `dir` at `(x, y)`: central difference when
    /// both neighbours are in the simplex, else a second-order one-sided
    /// stencil.
    fn directional_fd(&self, x: f64, y: f64, dir: [f64; 2]) -> Option<f64> {
        let h = FD_STEP;
        let at = |t: f64| (x + t * dir[0], y + t * dir[1]);
        let ok = |t: f64| {
            let (u, v) = at(t);
            inside(u, v)
        };
        let f = |t: f64| {
            let (u, v) = at(t);
            self.f(u, v)
        };
        if ok(h) && ok(-h) {
            Some((f(h) - f(-h)) / (2.0 * h))
        } else if ok(h) && ok(2.0 * h) {
            Some((-3.0 * f(0.0) + 4.0 * f(h) - f(2.0 * h)) / (2.0 * h))
        } else if ok(-h) && ok(-2.0 * h) {
            Some((3.0 * f(0.0) - 4.0 * f(-h) + f(-2.0 * h)) / (2.0 * h))
        } else {
            None
        }
    }

    /// Finite-difference gradient of `F`. At corners where an axis direction
    /// leaves the simplex both ways, the partial is recovered from the
    /// derivative along an edge.
    pub fn fd_grad_f(&self, x: f64, y: f64) -> [f64; 2] {
        let dx = self.directional_fd(x, y, [1.0, 0.0]);
        let dy = self.directional_fd(x, y, [0.0, 1.0]);
        match (dx, dy) {
            (Some(gx), Some(gy)) => [gx, gy],
            (None, Some(gy)) => {
                let d = self.directional_fd(x, y, [1.0, -1.0]).unwrap_or(0.0);
                [d + gy, gy]
            }
            (Some(gx), None) => {
                let d = self.directional_fd(x, y, [-1.0, 1.0]).unwrap_or(0.0);
                [gx, d + gx]
            }
            (None, None) => [0.0, 0.0],
        }
    }

    /// Gradient of `F`: analytic when available, else finite differences.
    pub fn grad_f(&self, x: f64, y: f64) -> Result<[f64; 2]> {
        if !self.smoothness.is_differentiable() {
            return Err(Error::Capability(format!("{} is only Hölder continuous; no gradient", self.label)));
        }
        Ok(self.analytic_grad_f(x, y).unwrap_or_else(|| self.fd_grad_f(x, y)))
    }

    pub fn grad_g(&self, params: &ModelParams, pt: SimplexPoint) -> Result<[f64; 2]> {
        let pt = SimplexPoint::new(pt.x, pt.y)?;
        let [fx, fy] = self.grad_f(pt.x, pt.y)?;
        let s = 2.0 * params.p - 1.0;
        Ok([s * fx, s * fy])
    }

    /// Certified upper bound on `ω(∇g; δ)`.
    ///
    /// For C2 declarations the gradient is Lipschitz with the Hessian's
    /// operator norm, bounded here by its Frobenius norm; distances in the
    /// simplex never exceed `√2`.
    pub fn modulus_bound(&self, p: f64, delta: f64) -> Result<f64> {
        if delta.is_nan() || delta < 0.0 {
            return Err(invalid("delta", "must be non-negative"));
        }
        let scale = (2.0 * p - 1.0).abs();
        let d = delta.min(std::f64::consts::SQRT_2);
        match self.smoothness {
            Smoothness::C2 { hessian, .. } => Ok(scale * hessian.frobenius() * d),
            Smoothness::C1 { modulus: Some(m), .. } => Ok(scale * m.coefficient * d.powf(m.exponent)),
            Smoothness::C1 { modulus: None, .. } => Err(Error::Capability(format!(
                "{} declares no gradient modulus of continuity",
                self.label
            ))),
            Smoothness::Holder { .. } => {
                Err(Error::Capability(format!("{} is only Hölder continuous", self.label)))
            }
        }
    }

    /// Hölder constant and exponent of `g`.
    pub fn g_holder(&self, p: f64) -> Option<(f64, f64)> {
        self.smoothness.holder().map(|(l, e)| ((2.0 * p - 1.0).abs() * l, e))
    }

    /// `max(M11, M12, M22)` for `g`.
    pub fn g_hessian_max(&self, p: f64) -> Option<f64> {
        match self.smoothness {
            Smoothness::C2 { hessian, .. } => Some((2.0 * p - 1.0).abs() * hessian.max()),
            _ => None,
        }
    }

    /// Whether `g` is affine, in which case every smoothing operator
    /// reproduces it.
    pub fn is_affine(&self) -> bool {
        match &self.kind {
            Kind::Constant(_) | Kind::Affine { .. } => true,
            Kind::Quadratic([_, _, _, cxx, cxy, cyy]) => *cxx == 0.0 && *cxy == 0.0 && *cyy == 0.0,
            _ => false,
        }
    }
}
