//! The real tree of an excursion: contour pseudometric, class
//! representatives, separated (packing) sets, and packing-count scale sweeps.
//!
//! Points of `[0, 1]` at tree distance 0 are identified; the pseudometric is
//! `d(x, y) = f(x) + f(y) - 2 * min f over [x, y]`, exact for piecewise-linear
//! excursions because interval minima are attained at knots.

use std::sync::OnceLock;

use crate::dimension::{ScaleEntry, ScaleSeries, SeriesKind};
use crate::error::{ExdimError, Result};
use crate::map::{ExcursionForm, Partition};
use crate::rmq::RmqTable;

#[derive(Debug)]
pub struct TreeSpace {
    exc: ExcursionForm,
    min_table: OnceLock<RmqTable>,
}

/// How packing counts are computed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PackingMode {
    /// Greedy maximal-by-inclusion separated sets over the knot candidates.
    Greedy,
    /// Exact maximum separated set by branch and bound; candidate sets are
    /// limited to [`EXACT_LIMIT`] points.
    ExactSmall,
}

/// Candidate budget for the exact combinatorial solvers.
pub const EXACT_LIMIT: usize = 25;

/// An r-separated subset of tree points, stored as times in `[0, 1)`.
#[derive(Debug, Clone)]
pub struct SeparatedSet {
    pub r: f64,
    pub points: Vec<f64>,
}

impl SeparatedSet {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Check pairwise closed separation `d >= r * (1 - rel_slack)`.
    pub fn validate(&self, tree: &TreeSpace, rel_slack: f64) -> bool {
        let thresh = self.r * (1.0 - rel_slack);
        for i in 0..self.points.len() {
            for j in i + 1..self.points.len() {
                if tree.tree_distance(self.points[i], self.points[j]) < thresh {
                    return false;
                }
            }
        }
        true
    }
}

impl TreeSpace {
    pub fn new(exc: ExcursionForm) -> Self {
        TreeSpace {
            exc,
            min_table: OnceLock::new(),
        }
    }

    pub fn excursion(&self) -> &ExcursionForm {
        &self.exc
    }

    fn table(&self) -> &RmqTable {
        self.min_table
            .get_or_init(|| RmqTable::build_min(&self.exc.map().closed_values()))
    }

    /// Exact minimum of the excursion over `[lo, hi]`, 0 <= lo <= hi <= 1.
    pub fn interval_min(&self, lo: f64, hi: f64) -> f64 {
        let m = self.exc.map();
        let mut best = m.evaluate(lo).min(m.evaluate(hi));
        if let Some((a, b)) = m.closed_knot_range(lo, hi) {
            best = best.min(self.table().query_value(a, b));
        }
        best
    }

    /// Contour pseudometric between two times.
    pub fn tree_distance(&self, x: f64, y: f64) -> f64 {
        let m = self.exc.map();
        let (a, b) = if x <= y { (x, y) } else { (y, x) };
        m.evaluate(a) + m.evaluate(b) - 2.0 * self.interval_min(a, b)
    }

    /// The largest time in the tree-equivalence class of `x`: scan right
    /// while the level `f(x)` is not undercut, remembering the last return
    /// to that level.
    pub fn representative(&self, x: f64) -> f64 {
        let m = self.exc.map();
        let fx = m.evaluate(x);
        let mut last = x;
        let nseg = m.n_closed() - 1;
        let mut i = m.segment_index(x);
        while i < nseg {
            let (t0, v0) = (m.knot_t(i), m.knot_v(i));
            let (t1, v1) = (m.knot_t(i + 1), m.knot_v(i + 1));
            if v1 < fx {
                // Undercut: the class ends at the downward crossing, if the
                // segment passes through the level at all.
                if v0 > fx {
                    let t = t0 + (t1 - t0) * ((fx - v0) / (v1 - v0));
                    if t > last {
                        last = t;
                    }
                }
                return last;
            }
            if v1 == fx && t1 > last {
                last = t1;
            }
            i += 1;
        }
        last
    }

    /// Greedy separated set over caller-provided candidate times, iterated
    /// in the given order: a candidate is kept when its tree distance to
    /// every retained point strictly exceeds r.
    pub fn greedy_separated_set(&self, r: f64, candidates: &[f64]) -> SeparatedSet {
        let mut points: Vec<f64> = Vec::new();
        for &c in candidates {
            if points.iter().all(|&s| self.tree_distance(s, c) > r) {
                points.push(c);
            }
        }
        SeparatedSet { r, points }
    }

    /// Packing counts over a scale grid (sorted into decreasing order).
    ///
    /// Candidates are the knots of the excursion — which include all extrema
    /// of a piecewise-linear map — so count resolution is set by how densely
    /// the map was sampled. Greedy mode streams the knots once per scale
    /// with an alive-list that reproduces the quadratic greedy exactly.
    pub fn packing_counts(&self, grid: &[f64], mode: PackingMode) -> Result<ScaleSeries> {
        let m = self.exc.map();
        let range = m.range();
        let mut rs: Vec<f64> = grid.to_vec();
        rs.sort_by(|a, b| b.partial_cmp(a).unwrap());
        rs.dedup();
        if rs.is_empty() {
            return Err(ExdimError::InsufficientScales { needed: 1, got: 0 });
        }
        for &r in &rs {
            if !r.is_finite() || r <= 0.0 || r > range {
                return Err(ExdimError::InvalidScale { r });
            }
        }
        let mut entries = Vec::with_capacity(rs.len());
        for &r in &rs {
            let count = match mode {
                PackingMode::Greedy => self.sweep_knot_greedy(r),
                PackingMode::ExactSmall => {
                    let n = m.n_knots();
                    if n > EXACT_LIMIT {
                        return Err(ExdimError::ExactTooLarge {
                            limit: EXACT_LIMIT,
                            got: n,
                        });
                    }
                    let cands: Vec<f64> = (0..n).map(|i| m.knot_t(i)).collect();
                    exact_max_separated(self, r, &cands)?
                }
            };
            entries.push(ScaleEntry {
                r,
                value: count as f64,
            });
        }
        Ok(ScaleSeries {
            kind: SeriesKind::PackingCount,
            entries,
        })
    }

    /// Alive-list greedy over the knots in time order. A retained point s
    /// stays alive while `v_s - min(f over [t_s, now]) <= r`; once dead it
    /// can never block a later candidate (d >= v_s - min > r), so checking
    /// the alive list reproduces the quadratic greedy exactly.
    fn sweep_knot_greedy(&self, r: f64) -> usize {
        let m = self.exc.map();
        let n = m.n_knots();
        let mut count = 0usize;
        // (value at the retained point, running min of f since it)
        let mut alive: Vec<(f64, f64)> = Vec::new();
        for i in 0..n {
            let v = m.knot_v(i);
            if i > 0 {
                for a in alive.iter_mut() {
                    if a.1 > v {
                        a.1 = v;
                    }
                }
                alive.retain(|a| a.0 - a.1 <= r);
            }
            let blocked = alive.iter().any(|&(vs, mn)| vs + v - 2.0 * mn <= r);
            if !blocked {
                count += 1;
                alive.push((v, v));
            }
        }
        count
    }

    /// Separated set read off a fixed-step-r walk witness: the endpoints of
    /// its upcrossing steps (value increments of exactly +r).
    pub fn upcrossing_separated_set(&self, r: f64, witness: &Partition) -> Result<SeparatedSet> {
        let (ts, vs) = (witness.points(), witness.values());
        let tol = 1e-9 * r;
        let mut points = Vec::new();
        for i in 1..witness.len() {
            let step = vs[i] - vs[i - 1];
            if (step.abs() - r).abs() > tol {
                return Err(ExdimError::WitnessMismatch {
                    reason: format!(
                        "witness step {} has size {:.17e}, expected ±{:.17e}",
                        i, step, r
                    ),
                });
            }
            if step > 0.0 {
                points.push(ts[i]);
            }
        }
        Ok(SeparatedSet { r, points })
    }
}

/// Exact maximum r-separated subset of the candidates (strict separation),
/// by branch and bound over the conflict graph.
pub fn exact_max_separated(tree: &TreeSpace, r: f64, candidates: &[f64]) -> Result<usize> {
    let adj = conflict_graph(tree, candidates, |d| d <= r)?;
    Ok(max_independent(&adj) as usize)
}

/// Exact minimum number of closed `radius`-balls centered at candidates that
/// cover all candidates, by branch and bound on set cover.
pub fn exact_ball_cover(tree: &TreeSpace, radius: f64, candidates: &[f64]) -> Result<usize> {
    let covers = conflict_graph(tree, candidates, |d| d <= radius)?;
    let n = candidates.len();
    if n == 0 {
        return Ok(0);
    }
    // Ball at i covers j iff d(i, j) <= radius — including i itself.
    let sets: Vec<u32> = (0..n).map(|i| covers[i] | (1 << i)).collect();
    let mut best = n as u32;
    min_cover(&sets, (1u32 << n) - 1, 0, &mut best);
    Ok(best as usize)
}

/// Adjacency masks over candidate pairs whose tree distance satisfies `pred`.
fn conflict_graph<F: Fn(f64) -> bool>(
    tree: &TreeSpace,
    candidates: &[f64],
    pred: F,
) -> Result<Vec<u32>> {
    let n = candidates.len();
    if n > EXACT_LIMIT {
        return Err(ExdimError::ExactTooLarge {
            limit: EXACT_LIMIT,
            got: n,
        });
    }
    let mut adj = vec![0u32; n];
    for i in 0..n {
        for j in i + 1..n {
            if pred(tree.tree_distance(candidates[i], candidates[j])) {
                adj[i] |= 1 << j;
                adj[j] |= 1 << i;
            }
        }
    }
    Ok(adj)
}

/// Maximum independent set size via branching on the highest-degree vertex.
fn max_independent(adj: &[u32]) -> u32 {
    fn go(adj: &[u32], mask: u32, cur: u32, best: &mut u32) {
        if cur + mask.count_ones() <= *best {
            return;
        }
        if mask == 0 {
            *best = (*best).max(cur);
            return;
        }
        // Pick the remaining vertex with the most remaining neighbours.
        let mut pick = mask.trailing_zeros();
        let mut deg = 0;
        let mut m = mask;
        while m != 0 {
            let v = m.trailing_zeros();
            m &= m - 1;
            let d = (adj[v as usize] & mask).count_ones();
            if d > deg {
                deg = d;
                pick = v;
            }
        }
        if deg == 0 {
            // All remaining vertices are pairwise compatible.
            *best = (*best).max(cur + mask.count_ones());
            return;
        }
        let bit = 1u32 << pick;
        // Include pick, dropping its neighbours.
        go(adj, mask & !bit & !adj[pick as usize], cur + 1, best);
        // Exclude pick.
        go(adj, mask & !bit, cur, best);
    }
    let mut best = 0;
    go(adj, (1u32 << adj.len()) - 1, 0, &mut best);
    best
}

/// Minimum set cover by branching on the element with fewest covering sets.
fn min_cover(sets: &[u32], uncovered: u32, used: u32, best: &mut u32) {
    if used >= *best {
        return;
    }
    if uncovered == 0 {
        *best = used;
        return;
    }
    // Element hardest to cover.
    let mut pick = u32::MAX;
    let mut options = u32::MAX;
    let mut m = uncovered;
    while m != 0 {
        let e = m.trailing_zeros();
        m &= m - 1;
        let opts = sets
            .iter()
            .filter(|&&s| s & (1 << e) != 0)
            .count() as u32;
        if opts < options {
            options = opts;
            pick = e;
        }
    }
    if options == 0 {
        return; // uncoverable (cannot happen: each ball covers its center)
    }
    for (_, &s) in sets
        .iter()
        .enumerate()
        .filter(|(_, &s)| s & (1 << pick) != 0)
    {
        min_cover(sets, uncovered & !s, used + 1, best);
    }
}
