//! Exact smoothing operators and the drift fields built from them.
//!
//! `H_n(x, y) = Σ_k μ_n(k) Σ_{i+j≤k} g(i/k, j/k) P(V1 = i, V2 = j)` with
//! `(V1, V2)` trinomial (sampling with replacement); `E_n` is the same sum
//! under the multivariate hypergeometric law of a sample drawn without
//! replacement from an urn of `n` customers. `H_0` and `F_n` are the
//! epoch-independent versions for a fixed law `μ`.
//!
//! Trinomial weights factor as `Bin(k, x) × Bin(k - i, y / (1 - x))` and the
//! hypergeometric ones similarly, so each sum is a double loop over two
//! windowed rows.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::laws::{Power, SampleSizeLaw, Scenario};
use crate::model::ModelParams;
use crate::reinforcement::{ReinforcementSpec, SimplexPoint};
use crate::special::Row;

/// Default cap on the work of one operator evaluation (see [`evaluation_cost`]).
pub const DEFAULT_COST_CAP: f64 = 1e7;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OperatorOptions {
    pub cost_cap: f64,
}

impl Default for OperatorOptions {
    fn default() -> Self {
        OperatorOptions { cost_cap: DEFAULT_COST_CAP }
    }
}

/// Point `(r1/n, r2/n)` of the lattice `S_n`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct LatticePoint {
    pub n: u64,
    pub r1: u64,
    pub r2: u64,
}

impl LatticePoint {
    pub fn new(n: u64, r1: u64, r2: u64) -> Result<Self> {
        if n == 0 || r1 + r2 > n {
            return Err(Error::Domain(format!("({r1}, {r2}) is not a lattice point for n = {n}")));
        }
        Ok(LatticePoint { n, r1, r2 })
    }

    pub fn as_point(&self) -> SimplexPoint {
        let n = self.n as f64;
        SimplexPoint { x: self.r1 as f64 / n, y: self.r2 as f64 / n }
    }
}

/// Number of `(i, j)` terms for sample size `k`, allowing for row windows
/// of at most `10√k + 3` entries.
pub fn term_cost(k: u64) -> f64 {
    let kf = k as f64;
    let full = (kf + 1.0) * (kf + 2.0) / 2.0;
    let w = 10.0 * kf.sqrt() + 3.0;
    full.min(w * w)
}

/// Work estimate for one evaluation under the given weights.
pub fn evaluation_cost(weights: &[(u64, f64)]) -> f64 {
    weights.iter().map(|&(k, _)| term_cost(k)).sum()
}

#[derive(Default)]
struct Scratch {
    outer: Row,
    inner: Row,
}

/// `E f(V1, V2)` with `(V1, V2, k - V1 - V2)` trinomial `(k; x, y, 1 - x - y)`.
fn trinomial_expect(k: u64, x: f64, y: f64, s: &mut Scratch, mut f: impl FnMut(u64, u64) -> f64) -> f64 {
    let Scratch { outer, inner } = s;
    outer.binomial(k, x);
    let rest = 1.0 - x;
    let yr = if rest > 0.0 { (y / rest).clamp(0.0, 1.0) } else { 0.0 };
    let mut total = 0.0;
    for (i, wi) in outer.iter() {
        inner.binomial(k - i, yr);
        let mut acc = 0.0;
        for (j, wj) in inner.iter() {
            acc += wj * f(i, j);
        }
        total += wi * acc;
    }
    total
}

/// `E f(V1, V2)` for a size-`k` sample without replacement from `n`
/// customers of which `r1`, `r2` have the first two colours.
fn hypergeometric_expect(
    k: u64,
    n: u64,
    r1: u64,
    r2: u64,
    s: &mut Scratch,
    mut f: impl FnMut(u64, u64) -> f64,
) -> f64 {
    let Scratch { outer, inner } = s;
    outer.hypergeometric(n, r1, k);
    let mut total = 0.0;
    for (i, wi) in outer.iter() {
        inner.hypergeometric(n - r1, r2, k - i);
        let mut acc = 0.0;
        for (j, wj) in inner.iter() {
            acc += wj * f(i, j);
        }
        total += wi * acc;
    }
    total
}

/// Values of `g(i/k, j/k)` for all `i + j ≤ k`, row-major in `i`.
struct GTable {
    k: u64,
    vals: Vec<f64>,
}

impl GTable {
    fn new(spec: &ReinforcementSpec, p: f64, k: u64) -> Self {
        let kf = k as f64;
        let mut vals = Vec::with_capacity(((k + 1) * (k + 2) / 2) as usize);
        for i in 0..=k {
            for j in 0..=(k - i) {
                vals.push(spec.g(p, i as f64 / kf, j as f64 / kf));
            }
        }
        GTable { k, vals }
    }

    #[inline]
    fn get(&self, i: u64, j: u64) -> f64 {
        // rows have k + 1, k, k - 1, ... entries
        let off = i * (self.k + 1) - i * i.saturating_sub(1) / 2;
        self.vals[(off + j) as usize]
    }
}

fn g_at(spec: &ReinforcementSpec, p: f64, k: u64, i: u64, j: u64) -> f64 {
    let kf = k as f64;
    spec.g(p, i as f64 / kf, j as f64 / kf)
}

fn fixed_weights(mu: &SampleSizeLaw) -> Result<Vec<(u64, f64)>> {
    if mu.scenario() != Scenario::A1 {
        return Err(Error::Case(format!("{} is epoch-indexed; use the n-indexed operator", mu.label())));
    }
    Ok(mu.weights(1))
}

fn check_cost(weights: &[(u64, f64)], opts: &OperatorOptions) -> Result<()> {
    let cost = evaluation_cost(weights);
    if cost > opts.cost_cap {
        return Err(Error::CostGuard { cost, cap: opts.cost_cap });
    }
    Ok(())
}

fn mixture_with_replacement(
    spec: &ReinforcementSpec,
    p: f64,
    weights: &[(u64, f64)],
    pt: SimplexPoint,
    s: &mut Scratch,
) -> f64 {
    let mut total = 0.0;
    for &(k, w) in weights {
        total += w * trinomial_expect(k, pt.x, pt.y, s, |i, j| g_at(spec, p, k, i, j));
    }
    total
}

fn mixture_without_replacement(
    spec: &ReinforcementSpec,
    p: f64,
    weights: &[(u64, f64)],
    lp: LatticePoint,
    s: &mut Scratch,
) -> Result<f64> {
    let mut total = 0.0;
    for &(k, w) in weights {
        if k > lp.n {
            return Err(Error::SampleSize { k, n: lp.n });
        }
        total += w * hypergeometric_expect(k, lp.n, lp.r1, lp.r2, s, |i, j| g_at(spec, p, k, i, j));
    }
    Ok(total)
}

/// `H_0(x, y)` for a fixed law `μ`.
pub fn h0_eval(spec: &ReinforcementSpec, params: &ModelParams, mu: &SampleSizeLaw, pt: SimplexPoint) -> Result<f64> {
    h0_eval_with(spec, params, mu, pt, &OperatorOptions::default())
}

pub fn h0_eval_with(
    spec: &ReinforcementSpec,
    params: &ModelParams,
    mu: &SampleSizeLaw,
    pt: SimplexPoint,
    opts: &OperatorOptions,
) -> Result<f64> {
    let pt = SimplexPoint::new(pt.x, pt.y)?;
    let weights = fixed_weights(mu)?;
    check_cost(&weights, opts)?;
    Ok(mixture_with_replacement(spec, params.p, &weights, pt, &mut Scratch::default()))
}

/// `H_n(x, y)` for the law of `K_n`.
pub fn hn_eval(
    spec: &ReinforcementSpec,
    params: &ModelParams,
    law: &SampleSizeLaw,
    n: u64,
    pt: SimplexPoint,
) -> Result<f64> {
    let pt = SimplexPoint::new(pt.x, pt.y)?;
    let weights = law.weights(n);
    check_cost(&weights, &OperatorOptions::default())?;
    Ok(mixture_with_replacement(spec, params.p, &weights, pt, &mut Scratch::default()))
}

/// Result of an `H_n` evaluation whose support was cut by the cost cap.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FoldedValue {
    pub value: f64,
    /// Probability of the sample sizes that were not summed exactly.
    pub folded_mass: f64,
    /// Upper bound on `|value - H_n(x, y)|`.
    pub error_bound: f64,
}

/// `H_n` with the support summed in ascending `k` until the cost cap is
/// reached. The remaining sample sizes contribute `g(x, y)` in place of
/// their exact Bernstein value; the error bound uses the declared Hessian
/// bound when there is one and `|B_k g - g| ≤ 1` otherwise.
pub fn hn_eval_folded(
    spec: &ReinforcementSpec,
    params: &ModelParams,
    law: &SampleSizeLaw,
    n: u64,
    pt: SimplexPoint,
    opts: &OperatorOptions,
) -> Result<FoldedValue> {
    let pt = SimplexPoint::new(pt.x, pt.y)?;
    let weights = law.weights(n);
    let mut s = Scratch::default();
    let mut spent = 0.0;
    let mut value = 0.0;
    let mut folded_mass = 0.0;
    let mut error_bound = 0.0;
    let m = spec.g_hessian_max(params.p);
    let g0 = spec.g(params.p, pt.x, pt.y);
    for &(k, w) in &weights {
        spent += term_cost(k);
        if spent <= opts.cost_cap {
            value += w * trinomial_expect(k, pt.x, pt.y, &mut s, |i, j| g_at(spec, params.p, k, i, j));
        } else {
            value += w * g0;
            folded_mass += w;
            error_bound += w * m.map_or(1.0, |m| (0.75 * m / k as f64).min(1.0));
        }
    }
    Ok(FoldedValue { value, folded_mass, error_bound })
}

/// `F_n(r1/n, r2/n)` for a fixed law `μ`.
pub fn fn_eval(spec: &ReinforcementSpec, params: &ModelParams, mu: &SampleSizeLaw, lp: LatticePoint) -> Result<f64> {
    let weights = fixed_weights(mu)?;
    check_cost(&weights, &OperatorOptions::default())?;
    mixture_without_replacement(spec, params.p, &weights, lp, &mut Scratch::default())
}

/// `E_n(r1/n, r2/n)` for the law of `K_n`.
pub fn en_eval(spec: &ReinforcementSpec, params: &ModelParams, law: &SampleSizeLaw, lp: LatticePoint) -> Result<f64> {
    en_eval_with(spec, params, law, lp, &OperatorOptions::default())
}

pub fn en_eval_with(
    spec: &ReinforcementSpec,
    params: &ModelParams,
    law: &SampleSizeLaw,
    lp: LatticePoint,
    opts: &OperatorOptions,
) -> Result<f64> {
    let weights = law.weights(lp.n);
    check_cost(&weights, opts)?;
    mixture_without_replacement(spec, params.p, &weights, lp, &mut Scratch::default())
}

/// `H_n` at many points, sharing one table of `g` per sample size.
pub fn hn_eval_many(
    spec: &ReinforcementSpec,
    params: &ModelParams,
    law: &SampleSizeLaw,
    n: u64,
    pts: &[SimplexPoint],
    opts: &OperatorOptions,
) -> Result<Vec<f64>> {
    let weights = law.weights(n);
    check_cost(&weights, opts)?;
    let mut out = vec![0.0; pts.len()];
    let mut s = Scratch::default();
    for &(k, w) in &weights {
        let table = GTable::new(spec, params.p, k);
        for (o, pt) in out.iter_mut().zip(pts) {
            *o += w * trinomial_expect(k, pt.x, pt.y, &mut s, |i, j| table.get(i, j));
        }
    }
    Ok(out)
}

/// `E_n` at many lattice points of the same `S_n`.
pub fn en_eval_many(
    spec: &ReinforcementSpec,
    params: &ModelParams,
    law: &SampleSizeLaw,
    n: u64,
    lps: &[LatticePoint],
    opts: &OperatorOptions,
) -> Result<Vec<f64>> {
    if let Some(bad) = lps.iter().find(|lp| lp.n != n) {
        return Err(invalid("lattice", format!("point on S_{} mixed into S_{n}", bad.n)));
    }
    let weights = law.weights(n);
    check_cost(&weights, opts)?;
    let mut out = vec![0.0; lps.len()];
    let mut s = Scratch::default();
    for &(k, w) in &weights {
        if k > n {
            return Err(Error::SampleSize { k, n });
        }
        let table = GTable::new(spec, params.p, k);
        for (o, lp) in out.iter_mut().zip(lps) {
            *o += w * hypergeometric_expect(k, n, lp.r1, lp.r2, &mut s, |i, j| table.get(i, j));
        }
    }
    Ok(out)
}

/// Exact gradient of `H_0`, from the differentiated Bernstein sum
/// `∂x B_k g = k Σ_{i+j≤k-1} [g((i+1)/k, j/k) - g(i/k, j/k)] P_{k-1}(i, j)`.
pub fn h0_grad(spec: &ReinforcementSpec, params: &ModelParams, mu: &SampleSizeLaw, pt: SimplexPoint) -> Result<[f64; 2]> {
    let pt = SimplexPoint::new(pt.x, pt.y)?;
    let weights = fixed_weights(mu)?;
    check_cost(&weights, &OperatorOptions::default())?;
    let p = params.p;
    let mut s = Scratch::default();
    let (mut gx, mut gy) = (0.0, 0.0);
    for &(k, w) in &weights {
        let kf = k as f64;
        gx += w * kf * trinomial_expect(k - 1, pt.x, pt.y, &mut s, |i, j| {
            g_at(spec, p, k, i + 1, j) - g_at(spec, p, k, i, j)
        });
        gy += w * kf * trinomial_expect(k - 1, pt.x, pt.y, &mut s, |i, j| {
            g_at(spec, p, k, i, j + 1) - g_at(spec, p, k, i, j)
        });
    }
    Ok([gx, gy])
}

/// Which mean-field vector field to evaluate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DriftKind {
    /// `h = (q1 H_0 - x, q2 (1 - H_0) - y)`
    H,
    /// `ĥ`, as `h` with `g` in place of `H_0`
    HHat,
    /// `h` extended by `(1 - q1) H_0 - z`
    G,
    /// `ĥ` extended by `(1 - q1) g - z`
    GHat,
}

impl DriftKind {
    pub fn dim(&self) -> usize {
        match self {
            DriftKind::H | DriftKind::HHat => 2,
            DriftKind::G | DriftKind::GHat => 3,
        }
    }

    fn uses_h0(&self) -> bool {
        matches!(self, DriftKind::H | DriftKind::G)
    }
}

/// The value of `H_0` (with `μ`) or `g` at a point, as the drift needs it.
pub fn selection_map(
    kind: DriftKind,
    spec: &ReinforcementSpec,
    params: &ModelParams,
    mu: &SampleSizeLaw,
    pt: SimplexPoint,
) -> Result<f64> {
    if kind.uses_h0() {
        h0_eval(spec, params, mu, pt)
    } else {
        spec.eval_g(params, pt)
    }
}

/// Drift vector at `point` (length 2 for `h`/`ĥ`, 3 for `G`/`Ĝ`).
pub fn drift(
    kind: DriftKind,
    spec: &ReinforcementSpec,
    params: &ModelParams,
    mu: &SampleSizeLaw,
    point: &[f64],
) -> Result<Vec<f64>> {
    if point.len() != kind.dim() {
        return Err(Error::Domain(format!("{kind:?} needs a {}-d point, got {}", kind.dim(), point.len())));
    }
    if kind.dim() == 3 {
        let z = point[2];
        if z < -1e-12 || point.iter().sum::<f64>() > 1.0 + 1e-12 {
            return Err(Error::Domain(format!("{point:?} is outside the 3-d simplex")));
        }
    }
    let pt = SimplexPoint::new(point[0], point[1])?;
    let v = selection_map(kind, spec, params, mu, pt)?;
    let mut out = vec![params.q1 * v - pt.x, params.q2 * (1.0 - v) - pt.y];
    if kind.dim() == 3 {
        out.push((1.0 - params.q1) * v - point[2]);
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Lemma {
    /// Hölder `g`: `2^{-α/2} L E[K^{-α/2}]`
    A1,
    /// `C^1` `g`: modulus-of-continuity bound
    A2,
    /// `C^2` `g`: `(3/4) max M_ij E[K^{-1}]`
    A3,
    /// `|F_n - H_0| = O(1/n)`
    A4,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GapBound {
    pub n: u64,
    pub bound: f64,
    pub lemma: Lemma,
}

/// `E[K^{-s}]` for real `s > 0`.
fn inverse_power_moment(law: &SampleSizeLaw, n: u64, s: f64) -> f64 {
    if s == 1.0 {
        return law.inverse_moment(n, Power::One);
    }
    if s == 0.5 {
        return law.inverse_moment(n, Power::Half);
    }
    law.weights(n).iter().map(|&(k, w)| w * (k as f64).powf(-s)).sum()
}

/// Certified bound on `sup |H_n - g|` over the simplex (and on
/// `sup |E_n - g|` over `S_n`).
pub fn bernstein_gap_bound(
    spec: &ReinforcementSpec,
    p: f64,
    law: &SampleSizeLaw,
    n: u64,
    lemma: Lemma,
) -> Result<GapBound> {
    let bound = match lemma {
        Lemma::A1 => {
            let (l, a) = spec.g_holder(p).ok_or_else(|| {
                Error::Capability(format!("{} declares no Hölder constant", spec.label()))
            })?;
            2f64.powf(-a / 2.0) * l * inverse_power_moment(law, n, a / 2.0)
        }
        Lemma::A2 => {
            let e1 = law.inverse_moment(n, Power::One);
            let eh = law.inverse_moment(n, Power::Half);
            let c = std::f64::consts::FRAC_1_SQRT_2 + 0.5;
            let first = spec.modulus_bound(p, e1.sqrt())? * e1.sqrt();
            let second = spec.modulus_bound(p, e1 / eh)? * eh;
            c * first.min(second)
        }
        Lemma::A3 => {
            let m = spec.g_hessian_max(p).ok_or_else(|| {
                Error::Capability(format!("{} is not declared C2", spec.label()))
            })?;
            0.75 * m * law.inverse_moment(n, Power::One)
        }
        Lemma::A4 => {
            return Err(Error::Case("the hypergeometric gap has no explicit constant; use hypergeom_gap".into()))
        }
    };
    Ok(GapBound { n, bound, lemma })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HypergeomGap {
    pub n: u64,
    pub sup: f64,
    pub argmax: (u64, u64),
    /// Whether only a sublattice was searched.
    pub approximate: bool,
}

/// `sup |F_n - H_0|` over `S_n`: every lattice point for `n ≤ 1000`,
/// else a stride sublattice of about 500 000 points.
pub fn hypergeom_gap(spec: &ReinforcementSpec, params: &ModelParams, mu: &SampleSizeLaw, n: u64) -> Result<HypergeomGap> {
    let weights = fixed_weights(mu)?;
    if let Some(m) = mu.max_support() {
        if m > n {
            return Err(Error::SampleSize { k: m, n });
        }
    }
    let stride = if n <= 1000 { 1 } else { n.div_ceil(1000) };
    let mut s = Scratch::default();
    let mut best = (0.0f64, (0, 0));
    let mut r1 = 0;
    while r1 <= n {
        let mut r2 = 0;
        while r1 + r2 <= n {
            let lp = LatticePoint { n, r1, r2 };
            let f = mixture_without_replacement(spec, params.p, &weights, lp, &mut s)?;
            let h = mixture_with_replacement(spec, params.p, &weights, lp.as_point(), &mut s);
            let d = (f - h).abs();
            if d > best.0 {
                best = (d, (r1, r2));
            }
            r2 += stride;
        }
        r1 += stride;
    }
    Ok(HypergeomGap { n, sup: best.0, argmax: best.1, approximate: stride > 1 })
}

/// Grid `{(i/m, j/m) : i + j ≤ m}`.
pub fn simplex_grid(m: usize) -> Vec<SimplexPoint> {
    let m = m.max(1);
    let mf = m as f64;
    let mut out = Vec::with_capacity((m + 1) * (m + 2) / 2);
    for i in 0..=m {
        for j in 0..=(m - i) {
            out.push(SimplexPoint { x: i as f64 / mf, y: j as f64 / mf });
        }
    }
    out
}

/// All of `S_n` when `m ≥ n`, else the points nearest to a resolution-`m`
/// grid.
pub fn lattice_grid(n: u64, m: usize) -> Vec<LatticePoint> {
    let m = (m as u64).max(1);
    if m >= n {
        let mut out = Vec::new();
        for r1 in 0..=n {
            for r2 in 0..=(n - r1) {
                out.push(LatticePoint { n, r1, r2 });
            }
        }
        return out;
    }
    let mut out = Vec::new();
    for i in 0..=m {
        let r1 = i * n / m;
        for j in 0..=(m - i) {
            let r2 = ((j * n) as f64 / m as f64).round() as u64;
            let lp = LatticePoint { n, r1, r2: r2.min(n - r1) };
            if out.last() != Some(&lp) {
                out.push(lp);
            }
        }
    }
    out
}

/// Smallest of the bounds whose smoothness requirements `spec` meets.
pub fn best_gap_bound(spec: &ReinforcementSpec, p: f64, law: &SampleSizeLaw, n: u64) -> Result<GapBound> {
    [Lemma::A3, Lemma::A2, Lemma::A1]
        .iter()
        .filter_map(|&l| bernstein_gap_bound(spec, p, law, n, l).ok())
        .min_by(|a, b| a.bound.total_cmp(&b.bound))
        .ok_or_else(|| Error::Capability(format!("{} declares no usable smoothness constant", spec.label())))
}

/// `max |H_n - g|` over `pts`.
pub fn hn_grid_gap(
    spec: &ReinforcementSpec,
    params: &ModelParams,
    law: &SampleSizeLaw,
    n: u64,
    pts: &[SimplexPoint],
    opts: &OperatorOptions,
) -> Result<f64> {
    let vals = hn_eval_many(spec, params, law, n, pts, opts)?;
    Ok(vals.iter().zip(pts).map(|(v, pt)| (v - spec.g(params.p, pt.x, pt.y)).abs()).fold(0.0, f64::max))
}

/// `max |E_n - g|` over lattice points of `S_n`.
pub fn en_lattice_gap(
    spec: &ReinforcementSpec,
    params: &ModelParams,
    law: &SampleSizeLaw,
    n: u64,
    lps: &[LatticePoint],
    opts: &OperatorOptions,
) -> Result<f64> {
    let vals = en_eval_many(spec, params, law, n, lps, opts)?;
    Ok(vals
        .iter()
        .zip(lps)
        .map(|(v, lp)| {
            let pt = lp.as_point();
            (v - spec.g(params.p, pt.x, pt.y)).abs()
        })
        .fold(0.0, f64::max))
}
