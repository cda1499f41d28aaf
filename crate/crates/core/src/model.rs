//! Process parameters, urn configuration and the one-epoch transition.

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution, Hypergeometric};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::laws::SampleSizeLaw;
use crate::reinforcement::ReinforcementSpec;

/// The random source used for one trajectory.
pub type Rng64 = ChaCha8Rng;

/// Scalar parameters of the process.
///
/// `init_len` is the number of i.i.d. customers before the urn dynamics
/// start.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub p: f64,
    pub q: f64,
    pub q1: f64,
    pub q2: f64,
    pub init_len: u64,
}

impl ModelParams {
    pub fn new(p: f64, q: f64, q1: f64, q2: f64, init_len: u64) -> Result<Self> {
        let params = ModelParams { p, q, q1, q2, init_len };
        params.validate()?;
        Ok(params)
    }

    pub fn validate(&self) -> Result<()> {
        let unit = |v: f64| (0.0..=1.0).contains(&v);
        if !unit(self.p) {
            return Err(invalid("p", format!("{} not in [0, 1]", self.p)));
        }
        if !unit(self.q) {
            return Err(invalid("q", format!("{} not in [0, 1]", self.q)));
        }
        if !(self.q1 > 0.0 && self.q1 < 1.0) {
            return Err(invalid("q1", format!("{} not in (0, 1)", self.q1)));
        }
        if !(self.q2 > 0.0 && self.q2 < 1.0) {
            return Err(invalid("q2", format!("{} not in (0, 1)", self.q2)));
        }
        if self.init_len == 0 {
            return Err(invalid("init_len", "must be at least 1"));
        }
        Ok(())
    }

    /// Colour law of each of the first `init_len` customers.
    pub fn initial_colour_probabilities(&self) -> [f64; 4] {
        let (q, q1, q2) = (self.q, self.q1, self.q2);
        [q * q1, (1.0 - q) * q2, q * (1.0 - q1), (1.0 - q) * (1.0 - q2)]
    }

    /// Colour law of a new customer once the selection probability `g` is known.
    pub fn colour_probabilities(&self, g: f64) -> [f64; 4] {
        let (q1, q2) = (self.q1, self.q2);
        [q1 * g, q2 * (1.0 - g), (1.0 - q1) * g, (1.0 - q2) * (1.0 - g)]
    }
}

/// Colour counts of the urn. Colours are, in order: satisfied A, satisfied
/// B, unsatisfied A, unsatisfied B.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub struct UrnState {
    pub n: u64,
    pub a: u64,
    pub b: u64,
    pub c: u64,
    pub d: u64,
}

impl UrnState {
    pub fn from_counts(a: u64, b: u64, c: u64, d: u64) -> Self {
        UrnState { n: a + b + c + d, a, b, c, d }
    }

    pub fn counts(&self) -> [u64; 4] {
        [self.a, self.b, self.c, self.d]
    }

    /// Adds one ball of colour `colour` (0-based).
    pub fn push(&mut self, colour: usize) {
        match colour {
            0 => self.a += 1,
            1 => self.b += 1,
            2 => self.c += 1,
            3 => self.d += 1,
            _ => unreachable!("colour index {colour}"),
        }
        self.n += 1;
    }

    pub fn is_balanced(&self) -> bool {
        self.a + self.b + self.c + self.d == self.n
    }

    /// Proportions `(a/n, b/n, c/n)`.
    pub fn proportions(&self) -> [f64; 3] {
        let n = self.n as f64;
        [self.a as f64 / n, self.b as f64 / n, self.c as f64 / n]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SamplingScheme {
    WithReplacement,
    WithoutReplacement,
}

/// How `draw_sample_counts` produces colour counts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub enum SampleMode {
    /// Chained binomial / hypergeometric draws, O(1) in `k`.
    #[default]
    Fast,
    /// Draws `k` customer indices and tallies their colours.
    NaiveIndices,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SampleCounts {
    pub k: u64,
    pub v1: u64,
    pub v2: u64,
    pub v3: u64,
    pub v4: u64,
}

impl SampleCounts {
    pub fn as_array(&self) -> [u64; 4] {
        [self.v1, self.v2, self.v3, self.v4]
    }

    fn from_array(k: u64, v: [u64; 4]) -> Self {
        SampleCounts { k, v1: v[0], v2: v[1], v3: v[2], v4: v[3] }
    }
}

/// Rng for replication `index` of a run seeded with `seed`.
///
/// The two words are combined with the splitmix64 finaliser so nearby
/// indices give unrelated streams: `s = mix(seed ^ mix(index + γ))`, where
/// `γ = 0x9e3779b97f4a7c15`. The ChaCha8 stream is seeded from `s`.
pub fn trajectory_rng(seed: u64, index: u64) -> Rng64 {
    let s = splitmix64(seed ^ splitmix64(index.wrapping_add(0x9e37_79b9_7f4a_7c15)));
    Rng64::seed_from_u64(s)
}

pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

fn categorical<R: Rng + ?Sized>(probs: &[f64; 4], rng: &mut R) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (i, &p) in probs.iter().enumerate().take(3) {
        acc += p;
        if u < acc {
            return i;
        }
    }
    // guard against rounding in the partial sums
    (0..4).rev().find(|&i| probs[i] > 0.0).unwrap_or(3)
}

/// The first `init_len` customers, drawn i.i.d.
pub fn init_history<R: Rng + ?Sized>(params: &ModelParams, rng: &mut R) -> UrnState {
    let probs = params.initial_colour_probabilities();
    let mut state = UrnState::default();
    for _ in 0..params.init_len {
        state.push(categorical(&probs, rng));
    }
    state
}

/// Index of the colour block containing customer `idx` when customers are
/// laid out as `a` colour-1, then `b` colour-2, and so on.
fn block_of(counts: &[u64; 4], idx: u64) -> usize {
    let mut edge = 0;
    for (i, &c) in counts.iter().enumerate() {
        edge += c;
        if idx < edge {
            return i;
        }
    }
    unreachable!("index {idx} beyond urn")
}

const SEQUENTIAL_MAX_K: u64 = 8;

fn binomial_draw<R: Rng + ?Sized>(trials: u64, p: f64, rng: &mut R) -> u64 {
    if trials == 0 || p <= 0.0 {
        return 0;
    }
    if p >= 1.0 {
        return trials;
    }
    Binomial::new(trials, p).expect("probability in (0,1)").sample(rng)
}

fn hypergeometric_draw<R: Rng + ?Sized>(total: u64, marked: u64, draws: u64, rng: &mut R) -> u64 {
    if draws == 0 || marked == 0 {
        return 0;
    }
    if marked == total {
        return draws;
    }
    if draws == total {
        return marked;
    }
    match Hypergeometric::new(total, marked, draws) {
        Ok(dist) => dist.sample(rng),
        Err(_) => {
            // sequential fallback; exact but O(draws)
            let (mut left, mut hit) = (total, marked);
            let mut got = 0;
            for _ in 0..draws {
                if rng.random_range(0..left) < hit {
                    got += 1;
                    hit -= 1;
                }
                left -= 1;
            }
            got
        }
    }
}

/// Colour counts of a size-`k` sample from the customers in `state`.
pub fn draw_sample_counts<R: Rng + ?Sized>(
    state: &UrnState,
    scheme: SamplingScheme,
    k: u64,
    rng: &mut R,
    mode: SampleMode,
) -> Result<SampleCounts> {
    draw_counts(state, scheme, k, rng, mode, 3)
}

/// As [`draw_sample_counts`], but in fast mode only the first `split`
/// colours are drawn separately; the rest is lumped into colour `split`.
fn draw_counts<R: Rng + ?Sized>(
    state: &UrnState,
    scheme: SamplingScheme,
    k: u64,
    rng: &mut R,
    mode: SampleMode,
    split: usize,
) -> Result<SampleCounts> {
    if k == 0 {
        return Err(Error::InvalidSize);
    }
    if state.n == 0 {
        return Err(Error::SampleSize { k, n: 0 });
    }
    if scheme == SamplingScheme::WithoutReplacement && k > state.n {
        return Err(Error::SampleSize { k, n: state.n });
    }
    let counts = state.counts();
    let n = state.n;
    let mut v = [0u64; 4];
    match (mode, scheme) {
        (SampleMode::NaiveIndices, SamplingScheme::WithReplacement) => {
            for _ in 0..k {
                v[block_of(&counts, rng.random_range(0..n))] += 1;
            }
        }
        (SampleMode::NaiveIndices, SamplingScheme::WithoutReplacement) => {
            let n_us = usize::try_from(n).map_err(|_| Error::SampleSize { k, n })?;
            for idx in index::sample(rng, n_us, k as usize).iter() {
                v[block_of(&counts, idx as u64)] += 1;
            }
        }
        (SampleMode::Fast, SamplingScheme::WithReplacement) if k <= SEQUENTIAL_MAX_K => {
            for _ in 0..k {
                v[block_of(&counts, rng.random_range(0..n))] += 1;
            }
        }
        (SampleMode::Fast, SamplingScheme::WithoutReplacement) if k <= SEQUENTIAL_MAX_K => {
            let mut left = counts;
            let mut total = n;
            for _ in 0..k {
                let c = block_of(&left, rng.random_range(0..total));
                left[c] -= 1;
                v[c] += 1;
                total -= 1;
            }
        }
        (SampleMode::Fast, SamplingScheme::WithReplacement) => {
            let mut rest_k = k;
            let mut rest_n = n;
            for i in 0..split {
                v[i] = binomial_draw(rest_k, counts[i] as f64 / rest_n as f64, rng);
                rest_k -= v[i];
                rest_n -= counts[i];
                if rest_k == 0 || rest_n == 0 {
                    break;
                }
            }
            v[split] = k - v[..split].iter().sum::<u64>();
        }
        (SampleMode::Fast, SamplingScheme::WithoutReplacement) => {
            let mut rest_k = k;
            let mut rest_n = n;
            for i in 0..split {
                v[i] = hypergeometric_draw(rest_n, counts[i], rest_k, rng);
                rest_k -= v[i];
                rest_n -= counts[i];
                if rest_k == 0 {
                    break;
                }
            }
            v[split] = k - v[..split].iter().sum::<u64>();
        }
    }
    Ok(SampleCounts::from_array(k, v))
}

/// Selection probability `g` for an observed sample.
pub fn selection_probability(
    spec: &ReinforcementSpec,
    params: &ModelParams,
    sample: &SampleCounts,
) -> Result<f64> {
    let kf = sample.k as f64;
    let (x, y) = (sample.v1 as f64 / kf, sample.v2 as f64 / kf);
    let f = spec.checked_f(x, y)?;
    Ok(crate::reinforcement::combine(params.p, f))
}

/// One epoch: draws `K_n`, samples the urn and adds one ball.
#[allow(clippy::too_many_arguments)]
pub fn step<R: Rng + ?Sized>(
    state: &UrnState,
    params: &ModelParams,
    scheme: SamplingScheme,
    spec: &ReinforcementSpec,
    law: &SampleSizeLaw,
    mode: SampleMode,
    rng: &mut R,
) -> Result<UrnState> {
    if state.n < params.init_len {
        return Err(invalid("state.n", format!("{} below init_len {}", state.n, params.init_len)));
    }
    let k = law.sample(state.n, rng);
    // only the first two colour counts enter `g`
    let sample = draw_counts(state, scheme, k, rng, mode, 2)?;
    let g = selection_probability(spec, params, &sample)?;
    let probs = params.colour_probabilities(g);
    debug_assert!((probs.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    let mut next = *state;
    next.push(categorical(&probs, rng));
    Ok(next)
}

/// `S_n = (a + c) - (b + d)`.
pub fn walker_position(state: &UrnState) -> i64 {
    (state.a + state.c) as i64 - (state.b + state.d) as i64
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rng() -> Rng64 {
        trajectory_rng(7, 0)
    }

    #[test]
    fn degenerate_initialisations() {
        let p = ModelParams::new(0.5, 1.0, 0.999_999_999_999, 0.5, 5).unwrap();
        let s = init_history(&p, &mut rng());
        assert_eq!((s.n, s.a), (5, 5));
        let p = ModelParams::new(0.5, 0.0, 0.5, 0.5, 4).unwrap();
        let s = init_history(&p, &mut rng());
        assert_eq!((s.a, s.c, s.b + s.d), (0, 0, 4));
    }

    #[test]
    fn all_satisfied_a_when_q_and_q1_are_one() {
        // q1 = 1 is outside the model's open interval, so drive the
        // categorical sampler directly
        let mut r = rng();
        for _ in 0..100 {
            assert_eq!(categorical(&[1.0, 0.0, 0.0, 0.0], &mut r), 0);
        }
    }

    #[test]
    fn invalid_params() {
        assert!(ModelParams::new(1.1, 0.5, 0.5, 0.5, 1).is_err());
        assert!(ModelParams::new(0.5, 0.5, 1.0, 0.5, 1).is_err());
        assert!(ModelParams::new(0.5, 0.5, 0.5, 0.0, 1).is_err());
        assert!(ModelParams::new(0.5, 0.5, 0.5, 0.5, 0).is_err());
    }

    #[test]
    fn degenerate_urn_and_exhaustive_sample() {
        let s = UrnState::from_counts(7, 0, 0, 0);
        for scheme in [SamplingScheme::WithReplacement, SamplingScheme::WithoutReplacement] {
            for mode in [SampleMode::Fast, SampleMode::NaiveIndices] {
                let c = draw_sample_counts(&s, scheme, 3, &mut rng(), mode).unwrap();
                assert_eq!(c.as_array(), [3, 0, 0, 0]);
            }
        }
        let s = UrnState::from_counts(30, 20, 11, 9);
        for mode in [SampleMode::Fast, SampleMode::NaiveIndices] {
            let c = draw_sample_counts(&s, SamplingScheme::WithoutReplacement, 70, &mut rng(), mode)
                .unwrap();
            assert_eq!(c.as_array(), s.counts());
        }
    }

    #[test]
    fn sample_size_errors() {
        let s = UrnState::from_counts(1, 1, 1, 1);
        let e = draw_sample_counts(&s, SamplingScheme::WithoutReplacement, 5, &mut rng(), SampleMode::Fast);
        assert!(matches!(e, Err(Error::SampleSize { k: 5, n: 4 })));
        let e = draw_sample_counts(&s, SamplingScheme::WithReplacement, 0, &mut rng(), SampleMode::Fast);
        assert!(matches!(e, Err(Error::InvalidSize)));
        // more draws than customers is fine with replacement
        let c = draw_sample_counts(&s, SamplingScheme::WithReplacement, 50, &mut rng(), SampleMode::Fast)
            .unwrap();
        assert_eq!(c.as_array().iter().sum::<u64>(), 50);
    }

    #[test]
    fn walker_examples() {
        assert_eq!(walker_position(&UrnState::from_counts(3, 0, 1, 0)), 4);
        assert_eq!(walker_position(&UrnState::from_counts(0, 2, 0, 2)), -4);
        assert_eq!(walker_position(&UrnState::from_counts(1, 1, 1, 1)), 0);
    }

    #[test]
    fn colour_probabilities_sum_to_one() {
        let p = ModelParams::new(0.3, 0.4, 0.35, 0.8, 3).unwrap();
        for i in 0..=100 {
            let g = i as f64 / 100.0;
            let s: f64 = p.colour_probabilities(g).iter().sum();
            assert!((s - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn seeds_are_mixed() {
        let mut a = trajectory_rng(1, 0);
        let mut b = trajectory_rng(1, 1);
        let mut c = trajectory_rng(1, 0);
        let (x, y, z): (u64, u64, u64) = (a.random(), b.random(), c.random());
        assert_ne!(x, y);
        assert_eq!(x, z);
    }
}
