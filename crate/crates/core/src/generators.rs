//! Test-signal generators: multi-band zigzags with prescribed variation
//! exponent, random-walk excursions, and Takagi partial sums.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{ExdimError, Result};
use crate::map::SampledCircleMap;

/// Default hard cap on generated knots (~1.6 GB of knot storage).
pub const DEFAULT_KNOT_BUDGET: usize = 100_000_000;

/// Knot count above which callers may want to warn before proceeding.
pub const KNOT_WARN_THRESHOLD: usize = 10_000_000;

/// Parameters for [`gen_zigzag`].
#[derive(Debug, Clone, Copy)]
pub struct ZigzagSpec {
    /// Target variation exponent; teeth per band scale like `2^(p n)`.
    pub p: f64,
    /// Number of bands N; band n occupies `[2^-n, 2^-n+1]`.
    pub depth: u32,
    /// Optional knot cap; `None` applies [`DEFAULT_KNOT_BUDGET`].
    pub knot_budget: Option<usize>,
}

impl ZigzagSpec {
    pub fn new(p: f64, depth: u32) -> Self {
        ZigzagSpec { p, depth, knot_budget: None }
    }
}

/// Teeth count for band n: `ceil(2^(p n))`.
fn teeth(p: f64, n: u32) -> u64 {
    (2f64).powf(p * n as f64).ceil() as u64
}

/// Exact number of knots `gen_zigzag` will produce for this spec.
pub fn zigzag_knot_count(spec: &ZigzagSpec) -> u128 {
    let mut total: u128 = 1; // the origin knot
    for n in 1..=spec.depth {
        total += 2 * teeth(spec.p, n) as u128;
    }
    total
}

/// Build the banded zigzag map.
///
/// Band n (from the deepest up) fills `[2^-n, 2^-n+1]` with `K_n = ceil(2^(p n))`
/// teeth of height `2^-n`, alternating between 0 and the band height on an
/// even grid. The leftover `[0, 2^-N]` stays flat at zero, so the result is
/// already in excursion form. At dyadic thinning scales the surviving step
/// counts have a closed form, which the tests pin down.
pub fn gen_zigzag(spec: &ZigzagSpec) -> Result<SampledCircleMap> {
    if !(spec.p.is_finite() && spec.p > 1.0) {
        return Err(ExdimError::InvalidExponent { p: spec.p });
    }
    if spec.depth == 0 {
        return Err(ExdimError::InvalidParameter(
            "zigzag depth must be >= 1".into(),
        ));
    }
    let budget = spec.knot_budget.unwrap_or(DEFAULT_KNOT_BUDGET);
    let needed = zigzag_knot_count(spec);
    if needed > budget as u128 {
        return Err(ExdimError::KnotBudgetExceeded {
            needed: needed.min(usize::MAX as u128) as usize,
            budget,
        });
    }
    let needed = needed as usize;
    let mut ts = Vec::with_capacity(needed);
    let mut vs = Vec::with_capacity(needed);
    ts.push(0.0);
    vs.push(0.0);
    for n in (1..=spec.depth).rev() {
        let base = 0.5f64.powi(n as i32);
        let h = base;
        let twok = 2 * teeth(spec.p, n);
        let twokf = twok as f64;
        for j in 0..twok {
            // base * (1 + j/2K) stays strictly below the next band start.
            ts.push(base + (j as f64 / twokf) * base);
            vs.push(if j % 2 == 1 { h } else { 0.0 });
        }
    }
    SampledCircleMap::new(ts, vs)
}

/// Parameters for [`gen_brownian_excursion`].
#[derive(Debug, Clone, Copy)]
pub struct ExcursionSampleSpec {
    /// Number of walk steps; must be even and >= 2.
    pub steps: usize,
    /// RNG seed; equal seeds give byte-identical output on every platform.
    pub seed: u64,
}

/// Simple-walk excursion: shuffle an exactly balanced ±1 step sequence into
/// a bridge, rotate at its leftmost minimum so the path becomes nonnegative,
/// and normalize the maximum to 1. `steps = 2` degenerates to the unit tent.
pub fn gen_brownian_excursion(spec: &ExcursionSampleSpec) -> Result<SampledCircleMap> {
    let n = spec.steps;
    if n < 2 || n % 2 != 0 {
        return Err(ExdimError::InvalidParameter(format!(
            "walk steps must be even and >= 2, got {n}"
        )));
    }
    let mut steps: Vec<i64> = vec![1; n / 2];
    steps.extend(std::iter::repeat(-1).take(n / 2));
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    steps.shuffle(&mut rng);

    // Bridge partial sums S_0..S_n with S_n = 0.
    let mut s = Vec::with_capacity(n + 1);
    let mut acc = 0i64;
    s.push(0i64);
    for &st in &steps {
        acc += st;
        s.push(acc);
    }
    // Leftmost minimum; rotating there yields a nonnegative path.
    let mut m = 0usize;
    for (i, &v) in s.iter().enumerate().take(n) {
        if v < s[m] {
            m = i;
        }
    }
    let mut exc = Vec::with_capacity(n);
    let mut sup = 0i64;
    for k in 0..n {
        let v = s[(m + k) % n] - s[m];
        sup = sup.max(v);
        exc.push(v);
    }
    let supf = sup as f64;
    let nf = n as f64;
    let ts: Vec<f64> = (0..n).map(|k| k as f64 / nf).collect();
    let vs: Vec<f64> = exc.iter().map(|&v| v as f64 / supf).collect();
    SampledCircleMap::new(ts, vs)
}

/// Takagi partial sum `sum_{l<levels} w^l dist(2^l x, Z)` sampled on the
/// `2^levels` dyadic grid. Requires `w` in (1/2, 1); `levels = 1` gives the
/// tent map. The graph dimension of the full limit is `2 + log2 w`.
pub fn gen_takagi(w: f64, levels: u32) -> Result<SampledCircleMap> {
    if !(w.is_finite() && w > 0.5 && w < 1.0) {
        return Err(ExdimError::InvalidParameter(format!(
            "takagi weight must lie in (0.5, 1), got {w}"
        )));
    }
    if levels == 0 {
        return Err(ExdimError::InvalidParameter(
            "takagi needs at least one level".into(),
        ));
    }
    if levels > 26 {
        return Err(ExdimError::KnotBudgetExceeded {
            needed: 1usize << levels,
            budget: 1usize << 26,
        });
    }
    let n = 1usize << levels;
    let nf = n as f64;
    let mut ts = Vec::with_capacity(n);
    let mut vs = Vec::with_capacity(n);
    for k in 0..n {
        let t = k as f64 / nf;
        let mut v = 0.0;
        let mut weight = 1.0;
        let mut x = t;
        for _ in 0..levels {
            let frac = x - x.floor();
            v += weight * frac.min(1.0 - frac);
            weight *= w;
            x *= 2.0;
        }
        ts.push(t);
        vs.push(v);
    }
    SampledCircleMap::new(ts, vs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::variation::pr_variation;

    #[test]
    fn zigzag_depth_one_is_four_teeth() {
        let m = gen_zigzag(&ZigzagSpec::new(2.0, 1)).unwrap();
        // Origin plus 8 grid knots on [1/2, 1).
        assert_eq!(m.n_knots(), 9);
        let peaks = (0..m.n_knots())
            .filter(|&i| m.knot_v(i) == 0.5)
            .count();
        assert_eq!(peaks, 4);
        assert!(m.times().iter().all(|&t| t == 0.0 || t >= 0.5));
        assert_eq!(m.evaluate(0.25), 0.0);
    }

    #[test]
    fn zigzag_dyadic_step_counts_are_exact() {
        // Band n contributes 2 * 4^n * 2^(k-n) steps at r = 2^-k (p = 2),
        // so M_r = 4^(k+1) - 2^(k+2).
        let m = gen_zigzag(&ZigzagSpec::new(2.0, 6)).unwrap();
        for k in 1..=5u32 {
            let r = 0.5f64.powi(k as i32);
            let got = pr_variation(&m, 2.0, r).unwrap().steps;
            let want = 4u64.pow(k + 1) - 2u64.pow(k + 2);
            assert_eq!(got, want, "k = {k}");
        }
    }

    #[test]
    fn zigzag_budget_is_enforced() {
        let mut spec = ZigzagSpec::new(2.0, 10);
        spec.knot_budget = Some(1000);
        match gen_zigzag(&spec) {
            Err(ExdimError::KnotBudgetExceeded { needed, budget }) => {
                assert_eq!(budget, 1000);
                assert_eq!(needed as u128, zigzag_knot_count(&spec));
            }
            other => panic!("expected budget error, got {other:?}"),
        }
    }

    #[test]
    fn walk_excursion_is_normalized_and_deterministic() {
        let spec = ExcursionSampleSpec { steps: 1024, seed: 42 };
        let a = gen_brownian_excursion(&spec).unwrap();
        let b = gen_brownian_excursion(&spec).unwrap();
        assert_eq!(a.times(), b.times());
        assert_eq!(a.values(), b.values());
        assert_eq!(a.knot_v(0), 0.0);
        assert_eq!(a.min_value(), 0.0);
        assert_eq!(a.max_value(), 1.0);
        let c = gen_brownian_excursion(&ExcursionSampleSpec { steps: 1024, seed: 43 }).unwrap();
        assert_ne!(a.values(), c.values());
    }

    #[test]
    fn two_step_walk_is_the_tent() {
        let m = gen_brownian_excursion(&ExcursionSampleSpec { steps: 2, seed: 7 }).unwrap();
        assert_eq!(m.times(), &[0.0, 0.5]);
        assert_eq!(m.values(), &[0.0, 1.0]);
    }

    #[test]
    fn walk_rejects_odd_steps() {
        assert!(gen_brownian_excursion(&ExcursionSampleSpec { steps: 3, seed: 0 }).is_err());
    }

    #[test]
    fn takagi_level_one_is_tent() {
        let m = gen_takagi(0.75, 1).unwrap();
        assert_eq!(m.times(), &[0.0, 0.5]);
        assert_eq!(m.values(), &[0.0, 0.5]);
    }

    #[test]
    fn takagi_partial_sum_values() {
        // At x = 1/4 with 3 levels: dist(1/4) + w dist(1/2) + w^2 dist(1) =
        // 1/4 + w/2.
        let w = 0.75;
        let m = gen_takagi(w, 3).unwrap();
        let v = m.evaluate(0.25);
        assert!((v - (0.25 + w * 0.5)).abs() < 1e-15);
        assert_eq!(m.n_knots(), 8);
        assert_eq!(m.knot_v(0), 0.0);
    }

    #[test]
    fn takagi_rejects_bad_weight() {
        assert!(gen_takagi(0.5, 4).is_err());
        assert!(gen_takagi(1.0, 4).is_err());
        assert!(gen_takagi(0.75, 0).is_err());
    }
}
