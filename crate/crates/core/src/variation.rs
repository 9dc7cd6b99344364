//! p-variation functionals of piecewise-linear circle maps.
//!
//! All quantities are computed on the alternating extrema sequence, which is
//! lossless for variational sums. Three flavors:
//!
//! * [`p_variation`]: the classical supremum over all partitions, by dynamic
//!   programming over extrema, with a geometric refinement ladder that flags
//!   inputs whose partial sums keep growing as finer oscillations are added.
//! * [`restricted_variation`]: the supremum over partitions with a bounded
//!   number of points.
//! * [`pr_variation`]: the supremum over partitions whose consecutive values
//!   differ by exactly `r`; computed by a first-exit walk on the value
//!   lattice `phase + r*Z`, maximized over the finitely many lattice phases
//!   that matter.

use crate::error::{ExdimError, Result};
use crate::map::{Partition, SampledCircleMap};

/// Controls the refinement ladder of [`p_variation`].
#[derive(Debug, Clone)]
pub struct DivergencePolicy {
    /// Relative growth of the last ladder increment above which the
    /// variation is flagged as diverging.
    pub cauchy_eps: f64,
    /// Extrema budget for the exact DP; inputs whose finest level exceeds it
    /// are rejected.
    pub dp_cap: usize,
}

impl Default for DivergencePolicy {
    fn default() -> Self {
        DivergencePolicy {
            cauchy_eps: 0.02,
            dp_cap: 120_000,
        }
    }
}

/// One level of the refinement ladder: variation restricted to extrema
/// surviving at resolution `delta`.
#[derive(Debug, Clone, Copy)]
pub struct LadderLevel {
    pub delta: f64,
    pub value: f64,
    pub extrema: usize,
}

#[derive(Debug, Clone)]
pub struct PVariation {
    pub value: f64,
    pub witness: Partition,
    pub diverging: bool,
    pub ladder: Vec<LadderLevel>,
}

pub fn p_variation(m: &SampledCircleMap, p: f64) -> Result<PVariation> {
    p_variation_with(m, p, &DivergencePolicy::default())
}

pub fn p_variation_with(
    m: &SampledCircleMap,
    p: f64,
    policy: &DivergencePolicy,
) -> Result<PVariation> {
    check_exponent(p)?;
    let full = m.scale_extrema_indices(0.0);
    if full.len() > policy.dp_cap {
        return Err(ExdimError::ExactTooLarge {
            limit: policy.dp_cap,
            got: full.len(),
        });
    }
    let range = m.range();
    let pw = PowP::new(p);

    // Ladder of resolutions range/2^l, coarse to fine, stopping once the
    // full extrema sequence is reached.
    let mut ladder = Vec::new();
    let mut l = 0u32;
    loop {
        let delta = range / f64::powi(2.0, l as i32);
        let idx = m.scale_extrema_indices(delta);
        let vals: Vec<f64> = idx.iter().map(|&i| m.knot_v(i as usize)).collect();
        let (best, _) = dp_best(&vals, &pw);
        ladder.push(LadderLevel {
            delta,
            value: *best.last().unwrap(),
            extrema: idx.len(),
        });
        if idx.len() == full.len() || l > 60 {
            break;
        }
        l += 1;
    }

    // A couple of ladder levels is structure, not a trend; only flag when a
    // real refinement tail still grows.
    let diverging = match ladder.len() {
        0..=3 => false,
        n => {
            let inc = (ladder[n - 1].value - ladder[n - 2].value).max(0.0);
            inc > policy.cauchy_eps * ladder[n - 1].value.max(1.0)
        }
    };

    // Exact value and witness on the full sequence.
    let vals: Vec<f64> = full.iter().map(|&i| m.knot_v(i as usize)).collect();
    let (best, prev) = dp_best(&vals, &pw);
    let value = *best.last().unwrap();
    let chain = unroll_chain(&prev, vals.len() - 1);
    let idx: Vec<u32> = chain.iter().map(|&j| full[j]).collect();
    let witness = m.partition_from_closed_indices(&idx);

    Ok(PVariation {
        value,
        witness,
        diverging,
        ladder,
    })
}

#[derive(Debug, Clone)]
pub struct RestrictedVariation {
    pub value: f64,
    pub witness: Partition,
}

/// Supremum of variational sums over partitions with at most `max_points`
/// points.
pub fn restricted_variation(
    m: &SampledCircleMap,
    p: f64,
    max_points: usize,
) -> Result<RestrictedVariation> {
    check_exponent(p)?;
    if max_points < 2 {
        return Err(ExdimError::InvalidCardinality { m: max_points });
    }
    let full = m.scale_extrema_indices(0.0);
    let n = full.len();
    let cap = max_points.min(n);
    if n * n * cap > 400_000_000 {
        return Err(ExdimError::ExactTooLarge {
            limit: 400_000_000,
            got: n * n * cap,
        });
    }
    let vals: Vec<f64> = full.iter().map(|&i| m.knot_v(i as usize)).collect();
    let pw = PowP::new(p);

    // table[c][j]: best sum over chains of exactly c points ending at j.
    let mut table = vec![vec![f64::NEG_INFINITY; n]; cap + 1];
    let mut par = vec![vec![u32::MAX; n]; cap + 1];
    for j in 0..n {
        table[1][j] = 0.0;
    }
    let mut best = (0.0f64, 1usize, 0usize);
    for c in 2..=cap {
        for j in 1..n {
            let wj = vals[j];
            let mut b = f64::NEG_INFINITY;
            let mut bi = u32::MAX;
            for i in 0..j {
                let base = table[c - 1][i];
                if base == f64::NEG_INFINITY {
                    continue;
                }
                let cand = base + pw.apply((wj - vals[i]).abs());
                if cand > b {
                    b = cand;
                    bi = i as u32;
                }
            }
            table[c][j] = b;
            par[c][j] = bi;
            if b > best.0 {
                best = (b, c, j);
            }
        }
    }
    let (value, mut c, mut j) = best;
    let mut chain = vec![j];
    while c > 1 {
        let i = par[c][j] as usize;
        chain.push(i);
        j = i;
        c -= 1;
    }
    chain.reverse();
    let idx: Vec<u32> = chain.iter().map(|&k| full[k]).collect();
    let witness = if idx.len() >= 2 {
        m.partition_from_closed_indices(&idx)
    } else {
        // Degenerate: a single point carries no variation; report the
        // endpoints instead.
        m.partition_from_closed_indices(&[full[0], *full.last().unwrap()])
    };
    Ok(RestrictedVariation { value, witness })
}

#[derive(Debug, Clone)]
pub struct PrVariation {
    /// steps * r^p
    pub value: f64,
    /// Number of partition increments, each of absolute size exactly r.
    pub steps: u64,
    /// Lattice phase achieving the maximum.
    pub phase: f64,
    pub witness: Partition,
}

/// Variation at fixed step size `r`: the best partition whose consecutive
/// values differ by exactly `r` in absolute value.
pub fn pr_variation(m: &SampledCircleMap, p: f64, r: f64) -> Result<PrVariation> {
    let (steps, phase) = pr_steps(m, r)?;
    check_exponent(p)?;
    let value = steps as f64 * r.powf(p);
    let witness = pr_witness(m, r, phase)?;
    if witness.steps() as u64 != steps {
        return Err(ExdimError::WitnessMismatch {
            reason: format!(
                "step walk found {steps} steps but witness has {}",
                witness.steps()
            ),
        });
    }
    Ok(PrVariation {
        value,
        steps,
        phase,
        witness,
    })
}

/// Step count only (no witness); used by scale sweeps.
pub fn pr_variation_count(m: &SampledCircleMap, p: f64, r: f64) -> Result<(u64, f64)> {
    check_exponent(p)?;
    let (steps, _) = pr_steps(m, r)?;
    Ok((steps, steps as f64 * r.powf(p)))
}

fn check_scale(m: &SampledCircleMap, r: f64) -> Result<()> {
    if !r.is_finite() || r <= 0.0 || r > m.range() {
        return Err(ExdimError::InvalidScale { r });
    }
    Ok(())
}

pub(crate) fn check_exponent(p: f64) -> Result<()> {
    if !p.is_finite() || p < 1.0 {
        return Err(ExdimError::InvalidExponent { p });
    }
    Ok(())
}

/// Max step count over lattice phases, with the winning phase.
fn pr_steps(m: &SampledCircleMap, r: f64) -> Result<(u64, f64)> {
    check_scale(m, r)?;
    let idx = m.scale_extrema_indices(r);
    let vals: Vec<f64> = idx.iter().map(|&i| m.knot_v(i as usize)).collect();
    let phases = lattice_phases(&vals, r);
    let mut best = (0u64, phases[0]);
    for &phi in &phases {
        let s = walk_count(&vals, r, phi);
        if s > best.0 {
            best = (s, phi);
        }
    }
    Ok(best)
}

/// Distinct residues of the extrema values mod r (plus 0), the only phases
/// where the step count can change. Capped to keep sweeps on huge inputs
/// linear; the cap keeps phase 0 and an even subsample.
fn lattice_phases(vals: &[f64], r: f64) -> Vec<f64> {
    const CAP: usize = 64;
    let mut ph: Vec<f64> = vals.iter().map(|v| v.rem_euclid(r)).collect();
    ph.push(0.0);
    ph.sort_by(|a, b| a.partial_cmp(b).unwrap());
    ph.dedup();
    if ph.len() > CAP {
        let mut out = Vec::with_capacity(CAP);
        out.push(0.0);
        for k in 1..CAP {
            let pos = k * (ph.len() - 1) / (CAP - 1);
            out.push(ph[pos]);
        }
        out.dedup();
        return out;
    }
    ph
}

/// First-exit walk over the alternating extrema values: from the current
/// lattice level, each monotone run contributes `floor(span / r)` steps.
/// Returns the step count. Exact for the values given.
fn walk_count(vals: &[f64], r: f64, phi: f64) -> u64 {
    let mut steps = 0u64;
    let mut pos: Option<f64> = None;
    for w in vals.windows(2) {
        let (a, b) = (w[0], w[1]);
        match pos {
            None => {
                // First lattice level inside the run's value span.
                let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
                let first = phi + r * ((lo - phi) / r).ceil();
                // Guard rounding: step back once if we overshot the ceiling.
                let first = if first - r >= lo { first - r } else { first };
                if first <= hi + BOUNDARY_EPS * r {
                    let level = first.min(hi);
                    if a <= b {
                        // Rising: the walk anchors at `first`, then steps up.
                        let n = frac_steps(b - level, r);
                        steps += n;
                        pos = Some(level + n as f64 * r);
                    } else {
                        // Falling: anchor at the highest lattice level <= a.
                        let top = phi + r * ((hi - phi) / r).floor();
                        let top = if top + r <= hi { top + r } else { top };
                        let n = frac_steps(top - b, r);
                        steps += n;
                        pos = Some(top - n as f64 * r);
                    }
                }
            }
            Some(v) => {
                if b >= a {
                    let n = frac_steps(b - v, r);
                    steps += n;
                    pos = Some(v + n as f64 * r);
                } else {
                    let n = frac_steps(v - b, r);
                    steps += n;
                    pos = Some(v - n as f64 * r);
                }
            }
        }
    }
    steps
}

const BOUNDARY_EPS: f64 = 1e-9;

#[inline]
fn frac_steps(span: f64, r: f64) -> u64 {
    if span <= 0.0 {
        return 0;
    }
    (span / r + BOUNDARY_EPS).floor() as u64
}

/// Witness pass: re-run the winning walk emitting crossing times computed on
/// the original knots, so the partition's variational sum is exact.
fn pr_witness(m: &SampledCircleMap, r: f64, phi: f64) -> Result<Partition> {
    let idx = m.scale_extrema_indices(r);
    let mut points = Vec::new();
    let mut values = Vec::new();
    let mut pos: Option<f64> = None;
    // Cursor over closed knots; crossing times are found by scanning the
    // original segments between consecutive surviving extrema.
    for w in idx.windows(2) {
        let (i0, i1) = (w[0] as usize, w[1] as usize);
        let (a, b) = (m.knot_v(i0), m.knot_v(i1));
        let mut targets: Vec<f64> = Vec::new();
        match pos {
            None => {
                let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
                let first = phi + r * ((lo - phi) / r).ceil();
                let first = if first - r >= lo { first - r } else { first };
                if first <= hi + BOUNDARY_EPS * r {
                    let level = first.min(hi);
                    if a <= b {
                        let n = frac_steps(b - level, r);
                        for k in 0..=n {
                            targets.push(level + k as f64 * r);
                        }
                        pos = Some(level + n as f64 * r);
                    } else {
                        let top = phi + r * ((hi - phi) / r).floor();
                        let top = if top + r <= hi { top + r } else { top };
                        let n = frac_steps(top - b, r);
                        for k in 0..=n {
                            targets.push(top - k as f64 * r);
                        }
                        pos = Some(top - n as f64 * r);
                    }
                }
            }
            Some(v) => {
                if b >= a {
                    let n = frac_steps(b - v, r);
                    for k in 1..=n {
                        targets.push(v + k as f64 * r);
                    }
                    pos = Some(v + n as f64 * r);
                } else {
                    let n = frac_steps(v - b, r);
                    for k in 1..=n {
                        targets.push(v - k as f64 * r);
                    }
                    pos = Some(v - n as f64 * r);
                }
            }
        }
        if targets.is_empty() {
            continue;
        }
        // Find first crossings of each target level among original segments.
        let mut seg = i0;
        for &lvl in &targets {
            loop {
                debug_assert!(seg < i1, "target level must cross before the next extremum");
                let (sa, sb) = (m.knot_v(seg), m.knot_v(seg + 1));
                let (slo, shi) = if sa <= sb { (sa, sb) } else { (sb, sa) };
                if lvl >= slo - BOUNDARY_EPS * r && lvl <= shi + BOUNDARY_EPS * r {
                    let t0 = m.knot_t(seg);
                    let t1 = m.knot_t(seg + 1);
                    let t = if sb == sa {
                        t0
                    } else {
                        t0 + (t1 - t0) * ((lvl - sa) / (sb - sa))
                    };
                    // Emit; stay on this segment (it may cross more levels).
                    push_witness_point(&mut points, &mut values, t, lvl);
                    break;
                }
                seg += 1;
                if seg >= i1 {
                    // Numerical edge: fall back to the extremum itself.
                    push_witness_point(&mut points, &mut values, m.knot_t(i1), lvl);
                    seg = i1 - 1;
                    break;
                }
            }
        }
    }
    Partition::new(points, values)
}

fn push_witness_point(points: &mut Vec<f64>, values: &mut Vec<f64>, t: f64, v: f64) {
    if let Some(&last) = points.last() {
        if t <= last {
            // Equal crossing times can only arise from rounding on
            // near-vertical segments; nudge to keep strict monotonicity.
            points.push(f64::from_bits(last.to_bits() + 1));
            values.push(v);
            return;
        }
    }
    points.push(t);
    values.push(v);
}

/// One entry of a variation scale sweep.
#[derive(Debug, Clone, Copy)]
pub struct SweepEntry {
    pub r: f64,
    pub steps: u64,
    pub value: f64,
}

#[derive(Debug, Clone)]
pub struct VariationSweep {
    pub p: f64,
    pub entries: Vec<SweepEntry>,
}

impl VariationSweep {
    /// Upper and lower variation contents over the `window` finest scales:
    /// max and min of the step-variation values there.
    pub fn contents(&self, window: usize) -> (f64, f64) {
        let w = window.min(self.entries.len()).max(1);
        let tail = &self.entries[self.entries.len() - w..];
        let hi = tail.iter().map(|e| e.value).fold(f64::NEG_INFINITY, f64::max);
        let lo = tail.iter().map(|e| e.value).fold(f64::INFINITY, f64::min);
        (hi, lo)
    }
}

/// Step-variation values over a decreasing scale grid.
pub fn variation_sweep(m: &SampledCircleMap, p: f64, grid: &[f64]) -> Result<VariationSweep> {
    check_exponent(p)?;
    if grid.is_empty() {
        return Err(ExdimError::InsufficientScales { needed: 1, got: 0 });
    }
    let mut rs: Vec<f64> = grid.to_vec();
    rs.sort_by(|a, b| b.partial_cmp(a).unwrap());
    rs.dedup();
    let mut entries = Vec::with_capacity(rs.len());
    for &r in &rs {
        let (steps, value) = pr_variation_count(m, p, r)?;
        entries.push(SweepEntry { r, steps, value });
    }
    Ok(VariationSweep { p, entries })
}

#[derive(Debug, Clone)]
pub struct IndexEstimate {
    /// Least-squares slope of log steps against log(1/r) over the window.
    pub point: f64,
    /// Max consecutive two-point slope in the window.
    pub upper: f64,
    /// Min consecutive two-point slope in the window.
    pub lower: f64,
    pub window: usize,
}

/// Estimate the variation index (the growth exponent of step counts,
/// `M_r ~ r^-index`) from the `window` finest scales of a sweep.
pub fn variation_index_estimate(
    m: &SampledCircleMap,
    grid: &[f64],
    window: usize,
) -> Result<IndexEstimate> {
    let sweep = variation_sweep(m, 1.0, grid)?;
    let n = sweep.entries.len();
    let w = window.min(n);
    if w < 3 {
        return Err(ExdimError::InsufficientScales { needed: 3, got: w });
    }
    let tail = &sweep.entries[n - w..];
    let xs: Vec<f64> = tail.iter().map(|e| -(e.r.ln())).collect();
    let ys: Vec<f64> = tail.iter().map(|e| (e.steps.max(1) as f64).ln()).collect();
    let point = lsq_slope(&xs, &ys);
    let mut upper = f64::NEG_INFINITY;
    let mut lower = f64::INFINITY;
    for i in 1..w {
        let s = (ys[i] - ys[i - 1]) / (xs[i] - xs[i - 1]);
        upper = upper.max(s);
        lower = lower.min(s);
    }
    Ok(IndexEstimate {
        point,
        upper,
        lower,
        window: w,
    })
}

pub(crate) fn lsq_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let mut num = 0.0;
    let mut den = 0.0;
    for (x, y) in xs.iter().zip(ys) {
        num += (x - mx) * (y - my);
        den += (x - mx) * (x - mx);
    }
    num / den
}

/// Cumulative variation at the extrema: pairs `(t_j, A_j)` where `A_j` is the
/// best variational sum of a chain ending at extremum j. `A` is strictly
/// increasing and `A_last` is the full p-variation.
pub fn cumulative_variation(m: &SampledCircleMap, p: f64) -> Result<Vec<(f64, f64)>> {
    check_exponent(p)?;
    let full = m.scale_extrema_indices(0.0);
    let policy = DivergencePolicy::default();
    if full.len() > policy.dp_cap {
        return Err(ExdimError::ExactTooLarge {
            limit: policy.dp_cap,
            got: full.len(),
        });
    }
    let vals: Vec<f64> = full.iter().map(|&i| m.knot_v(i as usize)).collect();
    let (best, _) = dp_best(&vals, &PowP::new(p));
    Ok(full
        .iter()
        .zip(&best)
        .map(|(&i, &a)| (m.knot_t(i as usize), a))
        .collect())
}

/// |d|^p with a fast path for small integer p.
#[derive(Debug, Clone, Copy)]
pub(crate) struct PowP {
    p: f64,
    int_p: Option<u32>,
}

impl PowP {
    pub fn new(p: f64) -> Self {
        let int_p = if p.fract() == 0.0 && (1.0..=8.0).contains(&p) {
            Some(p as u32)
        } else {
            None
        };
        PowP { p, int_p }
    }

    #[inline]
    pub fn apply(&self, d: f64) -> f64 {
        match self.int_p {
            Some(1) => d,
            Some(2) => d * d,
            Some(3) => d * d * d,
            Some(4) => {
                let q = d * d;
                q * q
            }
            Some(k) => {
                let mut acc = 1.0;
                for _ in 0..k {
                    acc *= d;
                }
                acc
            }
            None => d.powf(self.p),
        }
    }
}

/// Core DP: best[j] = max over i < j of best[i] + |w_j - w_i|^p, best[0] = 0.
/// On an alternating sequence best is strictly increasing, so best.last() is
/// the variation. Returns (best, argmax parents).
pub(crate) fn dp_best(vals: &[f64], pw: &PowP) -> (Vec<f64>, Vec<u32>) {
    let n = vals.len();
    let mut best = vec![0.0f64; n];
    let mut prev = vec![u32::MAX; n];
    for j in 1..n {
        let wj = vals[j];
        let mut b = f64::NEG_INFINITY;
        let mut bi = 0u32;
        for i in 0..j {
            let cand = best[i] + pw.apply((wj - vals[i]).abs());
            if cand > b {
                b = cand;
                bi = i as u32;
            }
        }
        best[j] = b;
        prev[j] = bi;
    }
    (best, prev)
}

pub(crate) fn unroll_chain(prev: &[u32], mut j: usize) -> Vec<usize> {
    let mut chain = vec![j];
    while prev[j] != u32::MAX {
        j = prev[j] as usize;
        chain.push(j);
    }
    chain.reverse();
    chain
}
