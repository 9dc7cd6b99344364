use std::sync::OnceLock;

use crate::error::{ExdimError, Result};
use crate::rmq::RmqTable;

/// A continuous piecewise-linear map on the circle, stored as knots
/// `(t_i, v_i)` with `0 <= t_0 < t_1 < ... < t_{n-1} < 1`. The segment from
/// the last knot wraps to `(1, v_0)`, so the map is continuous at `0 == 1`.
///
/// Knot arrays are stored separately (times / values) to keep large maps
/// cache-friendly. Index `n` is accepted by the closed-knot accessors and
/// means the virtual wrap knot `(1, v_0)`.
#[derive(Debug)]
pub struct SampledCircleMap {
    ts: Vec<f64>,
    vs: Vec<f64>,
    osc_index: OnceLock<OscillationIndex>,
}

impl Clone for SampledCircleMap {
    fn clone(&self) -> Self {
        // The lazy oscillation index is rebuilt on demand rather than copied.
        SampledCircleMap {
            ts: self.ts.clone(),
            vs: self.vs.clone(),
            osc_index: OnceLock::new(),
        }
    }
}

#[derive(Debug)]
struct OscillationIndex {
    min: RmqTable,
    max: RmqTable,
}

impl SampledCircleMap {
    /// Build from knot lists. Times must be strictly increasing in `[0, 1)`,
    /// values finite, at least two knots.
    ///
    /// Maps are canonicalized to carry a knot at time 0: when `t_0 > 0`, the
    /// (collinear) point `(0, f(0))` is inserted, which leaves the function
    /// unchanged but lets every downstream pass treat knot 0 as the origin.
    pub fn new(mut ts: Vec<f64>, mut vs: Vec<f64>) -> Result<Self> {
        if ts.len() != vs.len() {
            return Err(ExdimError::InvalidParameter(format!(
                "times/values length mismatch: {} vs {}",
                ts.len(),
                vs.len()
            )));
        }
        if ts.len() < 2 {
            return Err(ExdimError::TooFewSamples {
                needed: 2,
                got: ts.len(),
            });
        }
        for (i, &v) in vs.iter().enumerate() {
            if !v.is_finite() {
                return Err(ExdimError::NonFiniteValue { index: i });
            }
        }
        if !ts[0].is_finite() || ts[0] < 0.0 {
            return Err(ExdimError::InvalidParameter(format!(
                "first knot time {} out of [0, 1)",
                ts[0]
            )));
        }
        for i in 0..ts.len() {
            if !ts[i].is_finite() || ts[i] >= 1.0 {
                return Err(ExdimError::InvalidParameter(format!(
                    "knot time t[{i}] = {} out of [0, 1)",
                    ts[i]
                )));
            }
            if i > 0 && ts[i] <= ts[i - 1] {
                return Err(ExdimError::DuplicateTime {
                    index: i,
                    time: ts[i],
                });
            }
        }
        if ts[0] > 0.0 {
            let n = ts.len();
            let v0 = lerp(ts[n - 1] - 1.0, vs[n - 1], ts[0], vs[0], 0.0);
            ts.insert(0, 0.0);
            vs.insert(0, v0);
        }
        Ok(SampledCircleMap {
            ts,
            vs,
            osc_index: OnceLock::new(),
        })
    }

    /// Convenience constructor from `(t, v)` pairs.
    pub fn from_pairs(pairs: &[(f64, f64)]) -> Result<Self> {
        let ts = pairs.iter().map(|p| p.0).collect();
        let vs = pairs.iter().map(|p| p.1).collect();
        Self::new(ts, vs)
    }

    /// Number of stored knots (excluding the virtual wrap knot).
    pub fn n_knots(&self) -> usize {
        self.ts.len()
    }

    /// Number of knots of the closed representation on `[0, 1]`, i.e.
    /// `n_knots() + 1`.
    pub fn n_closed(&self) -> usize {
        self.ts.len() + 1
    }

    pub fn times(&self) -> &[f64] {
        &self.ts
    }

    pub fn values(&self) -> &[f64] {
        &self.vs
    }

    /// Time of closed knot `i`, where `i == n_knots()` is the wrap knot at 1.
    #[inline]
    pub fn knot_t(&self, i: usize) -> f64 {
        if i == self.ts.len() {
            1.0
        } else {
            self.ts[i]
        }
    }

    /// Value of closed knot `i` (wrap knot carries `v_0`).
    #[inline]
    pub fn knot_v(&self, i: usize) -> f64 {
        if i == self.vs.len() {
            self.vs[0]
        } else {
            self.vs[i]
        }
    }

    /// Evaluate at any real `t`; the argument is taken mod 1.
    pub fn evaluate(&self, t: f64) -> f64 {
        let x = wrap_unit(t);
        let n = self.ts.len();
        // Index of the segment containing x: last knot with t <= x.
        let i = match self.ts.partition_point(|&kt| kt <= x) {
            0 => {
                // x < ts[0] can only happen when ts[0] > 0; that stretch
                // belongs to the wrap segment ending at ts[0].
                return self.interp_wrap_head(x);
            }
            k => k - 1,
        };
        if i == n - 1 {
            // Wrap segment from the last knot to (1, v_0).
            let (t0, v0) = (self.ts[n - 1], self.vs[n - 1]);
            let (t1, v1) = (1.0, self.vs[0]);
            return lerp(t0, v0, t1, v1, x);
        }
        lerp(self.ts[i], self.vs[i], self.ts[i + 1], self.vs[i + 1], x)
    }

    fn interp_wrap_head(&self, x: f64) -> f64 {
        // Segment from (t_last - 1, v_last) to (t_0, v_0), sampled at x < t_0.
        let n = self.ts.len();
        let t0 = self.ts[n - 1] - 1.0;
        lerp(t0, self.vs[n - 1], self.ts[0], self.vs[0], x)
    }

    /// Global minimum over the circle (attained at a knot).
    pub fn min_value(&self) -> f64 {
        self.vs.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// Global maximum over the circle (attained at a knot).
    pub fn max_value(&self) -> f64 {
        self.vs.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// max - min over the circle.
    pub fn range(&self) -> f64 {
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for &v in &self.vs {
            lo = lo.min(v);
            hi = hi.max(v);
        }
        hi - lo
    }

    /// Rotate so the leftmost global minimizer moves to the origin and shift
    /// values so the minimum is 0. Consumes the map to avoid holding two
    /// copies of large knot lists.
    pub fn normalize_excursion(self) -> Result<ExcursionForm> {
        let n = self.ts.len();
        let mut a = 0usize;
        let (mut lo, mut hi) = (self.vs[0], self.vs[0]);
        for i in 1..n {
            let v = self.vs[i];
            if v < lo {
                lo = v;
                a = i;
            }
            hi = hi.max(v);
        }
        if hi <= lo {
            return Err(ExdimError::NormalizeConstant { value: lo });
        }
        let offset = self.ts[a];
        let mut ts = Vec::with_capacity(n);
        let mut vs = Vec::with_capacity(n);
        for i in a..n {
            ts.push(self.ts[i] - offset);
            vs.push(self.vs[i] - lo);
        }
        for i in 0..a {
            ts.push(self.ts[i] - offset + 1.0);
            vs.push(self.vs[i] - lo);
        }
        // Guard against rounding at the seam; t_0 is exactly 0 by construction.
        ts[0] = 0.0;
        let map = SampledCircleMap::new(ts, vs)?;
        Ok(ExcursionForm {
            map,
            rotation_offset: offset,
        })
    }

    /// Strict local extrema of the closed map on `[0, 1]`, plateaus collapsed
    /// to a single point, endpoints always included. Values alternate
    /// strictly except possibly at the two endpoints.
    pub fn extrema_sequence(&self) -> Partition {
        let idx = self.scale_extrema_indices(0.0);
        self.partition_from_closed_indices(&idx)
    }

    /// Closed-knot indices of the alternating extrema that survive
    /// cancellation of adjacent extrema pairs with oscillation `< delta`
    /// (endpoints pinned). `delta = 0` gives the full extrema sequence.
    ///
    /// Cancelling a pair never changes step counts at scales `>= delta`, and
    /// surviving oscillations only grow, so this is the resolution-`delta`
    /// view of the map.
    pub fn scale_extrema_indices(&self, delta: f64) -> Vec<u32> {
        let n = self.ts.len();
        let nc = n + 1;
        let mut stack: Vec<u32> = Vec::new();
        if self.range() == 0.0 {
            // Constant map: just the two endpoints.
            return vec![0, n as u32];
        }
        let mut i = 0usize;
        while i < nc {
            let v = self.knot_v(i);
            // Collapse plateaus to their leftmost point; the run that touches
            // the right endpoint collapses to the endpoint itself.
            let mut j = i;
            while j + 1 < nc && self.knot_v(j + 1) == v {
                j += 1;
            }
            let keep = if j == nc - 1 { j } else { i };
            let pinned = j == nc - 1;
            push_extremum(&mut stack, keep as u32, v, delta, pinned, self);
            i = j + 1;
        }
        debug_assert_eq!(stack[0], 0, "extrema sequence must start at knot 0");
        debug_assert_eq!(
            *stack.last().unwrap() as usize,
            nc - 1,
            "extrema sequence must end at the right endpoint"
        );
        stack
    }

    /// Build a partition from closed-knot indices (strictly increasing).
    pub fn partition_from_closed_indices(&self, idx: &[u32]) -> Partition {
        let points = idx.iter().map(|&i| self.knot_t(i as usize)).collect();
        let values = idx.iter().map(|&i| self.knot_v(i as usize)).collect();
        Partition { points, values }
    }

    /// Exact min and max of the map over a closed subinterval of `[0, 1]`.
    /// First call builds sparse tables over the knots (O(n log n)); queries
    /// are O(1) afterwards.
    pub fn interval_extrema(&self, iv: Interval) -> (f64, f64) {
        let idx = self.osc_index.get_or_init(|| OscillationIndex {
            min: RmqTable::build_min(&self.closed_values()),
            max: RmqTable::build_max(&self.closed_values()),
        });
        let mut lo = self.evaluate(iv.lo).min(self.evaluate(iv.hi));
        let mut hi = self.evaluate(iv.lo).max(self.evaluate(iv.hi));
        if let Some((a, b)) = self.closed_knot_range(iv.lo, iv.hi) {
            let imin = idx.min.query(a, b);
            let imax = idx.max.query(a, b);
            lo = lo.min(self.knot_v(imin as usize));
            hi = hi.max(self.knot_v(imax as usize));
        }
        (lo, hi)
    }

    /// Values of the closed knot list (length `n_knots() + 1`).
    pub fn closed_values(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(self.vs.len() + 1);
        v.extend_from_slice(&self.vs);
        v.push(self.vs[0]);
        v
    }

    /// Inclusive closed-knot index range with `lo <= t_i <= hi`, or None.
    pub fn closed_knot_range(&self, lo: f64, hi: f64) -> Option<(u32, u32)> {
        let n = self.ts.len();
        let a = self.ts.partition_point(|&t| t < lo);
        // Closed index n (the wrap knot at time 1) participates when hi == 1.
        let b = if hi >= 1.0 {
            n
        } else {
            self.ts.partition_point(|&t| t <= hi).wrapping_sub(1)
        };
        if a <= b && b <= n {
            Some((a as u32, b as u32))
        } else {
            None
        }
    }

    /// Index of the segment containing time `x` in the closed map: the
    /// largest `i` with `knot_t(i) <= x`, clamped to `[0, n_knots()-1]` so the
    /// segment `[knot_t(i), knot_t(i+1)]` always exists. Requires `ts[0] == 0`.
    pub fn segment_index(&self, x: f64) -> usize {
        let k = self.ts.partition_point(|&t| t <= x);
        k.saturating_sub(1).min(self.ts.len() - 1)
    }
}

fn push_extremum(
    stack: &mut Vec<u32>,
    idx: u32,
    v: f64,
    delta: f64,
    pinned: bool,
    m: &SampledCircleMap,
) {
    loop {
        let len = stack.len();
        if len == 0 {
            stack.push(idx);
            return;
        }
        let top = m.knot_v(stack[len - 1] as usize);
        if len == 1 {
            if v == top && !pinned {
                // Ground revisit after everything in between cancelled.
                stack[0] = stack[0].min(idx);
                return;
            }
            stack.push(idx);
            return;
        }
        let second = m.knot_v(stack[len - 2] as usize);
        if (v > top) == (top > second) {
            // Same direction: the previous point was not a turning point
            // after all; the more extreme value absorbs it.
            *stack.last_mut().unwrap() = idx;
            return;
        }
        // `v` turns at `top`. The top pair (second, top) cancels when its
        // oscillation is below resolution, the incoming move carries at
        // least as far past `top` as `second` does, and the pair nests
        // inside the preceding move — then the run through the pair merges
        // and cannot change step counts at scales >= delta. Cancelled pairs
        // expose an older top, so re-examine `v` from the start.
        if !pinned && delta > 0.0 && len >= 3 {
            let pair = (top - second).abs();
            let covers = (v - top).abs() >= pair && ((v > top) == (second > top));
            let third = m.knot_v(stack[len - 3] as usize);
            let nests = pair <= (second - third).abs();
            if pair < delta && covers && nests {
                stack.pop();
                stack.pop();
                continue;
            }
        }
        stack.push(idx);
        return;
    }
}

#[inline]
fn lerp(t0: f64, v0: f64, t1: f64, v1: f64, x: f64) -> f64 {
    if t1 == t0 {
        return v0;
    }
    v0 + (v1 - v0) * ((x - t0) / (t1 - t0))
}

#[inline]
pub(crate) fn wrap_unit(t: f64) -> f64 {
    let x = t.rem_euclid(1.0);
    if x == 1.0 {
        0.0
    } else {
        x
    }
}

/// Excursion form of a circle map: rotated so `f(0) = 0` is the global
/// minimum. `rotation_offset` is the leftmost global minimizer of the
/// original map, so `excursion(x) = original(x + rotation_offset) - min`.
#[derive(Debug, Clone)]
pub struct ExcursionForm {
    map: SampledCircleMap,
    rotation_offset: f64,
}

impl ExcursionForm {
    pub fn map(&self) -> &SampledCircleMap {
        &self.map
    }

    pub fn into_map(self) -> SampledCircleMap {
        self.map
    }

    pub fn rotation_offset(&self) -> f64 {
        self.rotation_offset
    }

    pub fn evaluate(&self, x: f64) -> f64 {
        self.map.evaluate(x)
    }

    /// Wrap an already-normalized map (f(0) = 0 = min). Validated.
    pub fn from_normalized(map: SampledCircleMap) -> Result<Self> {
        if map.vs[0] != 0.0 || map.min_value() < 0.0 {
            return Err(ExdimError::InvalidParameter(
                "map is not in excursion form: need f(0) = 0 = min".into(),
            ));
        }
        if map.range() <= 0.0 {
            return Err(ExdimError::NormalizeConstant { value: map.vs[0] });
        }
        Ok(ExcursionForm {
            map,
            rotation_offset: 0.0,
        })
    }
}

/// A closed subinterval of `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub fn new(lo: f64, hi: f64) -> Result<Self> {
        if !(lo.is_finite() && hi.is_finite()) || lo > hi || lo < 0.0 || hi > 1.0 {
            return Err(ExdimError::InvalidParameter(format!(
                "interval [{lo}, {hi}] not a closed subinterval of [0, 1]"
            )));
        }
        Ok(Interval { lo, hi })
    }

    pub fn length(&self) -> f64 {
        self.hi - self.lo
    }
}

/// A finite partition of `[0, 1]`: strictly increasing points with the map
/// values at those points cached alongside.
#[derive(Debug, Clone, PartialEq)]
pub struct Partition {
    points: Vec<f64>,
    values: Vec<f64>,
}

impl Partition {
    pub fn new(points: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if points.len() != values.len() {
            return Err(ExdimError::InvalidParameter(
                "partition points/values length mismatch".into(),
            ));
        }
        if points.len() < 2 {
            return Err(ExdimError::TooFewSamples {
                needed: 2,
                got: points.len(),
            });
        }
        for i in 1..points.len() {
            if points[i] <= points[i - 1] {
                return Err(ExdimError::DuplicateTime {
                    index: i,
                    time: points[i],
                });
            }
        }
        Ok(Partition { points, values })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Variational sum `sum |v_{i+1} - v_i|^p`.
    pub fn variation_sum(&self, p: f64) -> f64 {
        let mut s = 0.0;
        for w in self.values.windows(2) {
            s += (w[1] - w[0]).abs().powf(p);
        }
        s
    }

    /// Number of increments (len - 1).
    pub fn steps(&self) -> usize {
        self.points.len().saturating_sub(1)
    }

    /// True when interior values strictly alternate (each interior point is a
    /// strict local max or min of the value sequence).
    pub fn is_alternating(&self) -> bool {
        let v = &self.values;
        if v.len() < 3 {
            return true;
        }
        for i in 1..v.len() - 1 {
            let a = v[i] - v[i - 1];
            let b = v[i + 1] - v[i];
            if a == 0.0 || b == 0.0 || (a > 0.0) == (b > 0.0) {
                return false;
            }
        }
        true
    }
}
