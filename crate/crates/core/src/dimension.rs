//! Box-counting machinery for graphs, sausage (Minkowski) areas, and
//! log-log slope fitting shared by all dimension estimates.

use serde::{Deserialize, Serialize};

use crate::error::{ExdimError, Result};
use crate::map::{Interval, SampledCircleMap};
use crate::tree::{PackingMode, TreeSpace};

/// What a scale series measures; determines how its slope maps to a dimension.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SeriesKind {
    PackingCount,
    BoxCount,
    SausageArea,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct ScaleEntry {
    pub r: f64,
    pub value: f64,
}

/// Measurements along a strictly decreasing positive scale grid.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScaleSeries {
    pub kind: SeriesKind,
    pub entries: Vec<ScaleEntry>,
}

impl ScaleSeries {
    /// Scales strictly decreasing and positive, measurements finite positive.
    pub fn validate(&self) -> Result<()> {
        for (i, e) in self.entries.iter().enumerate() {
            if !(e.r.is_finite() && e.r > 0.0) {
                return Err(ExdimError::InvalidScale { r: e.r });
            }
            if !(e.value.is_finite() && e.value > 0.0) {
                return Err(ExdimError::InvalidParameter(format!(
                    "series entry {} has non-positive measurement {}",
                    i, e.value
                )));
            }
            if i > 0 && e.r >= self.entries[i - 1].r {
                return Err(ExdimError::InvalidParameter(format!(
                    "series scales not strictly decreasing at entry {}",
                    i
                )));
            }
        }
        Ok(())
    }
}

/// A finite-scale slope standing in for a limsup/liminf dimension.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct DimensionEstimate {
    /// The dimension value implied by the fitted log-log slope.
    pub slope: f64,
    /// (largest scale, smallest scale) actually used in the fit.
    pub window: (f64, f64),
    /// RMS residual of the least-squares fit in log coordinates.
    pub residual: f64,
    /// Number of scale points fitted.
    pub points: usize,
}

/// Exact box count of the graph `{(x, f(x))}` on the closed δ-grid, for each
/// δ = 1/K in the grid: per column, boxes `floor(max/δ) - floor(min/δ) + 1`.
///
/// Column extrema come from one linear sweep over the knots (segments spread
/// their boundary-crossing values into both adjacent columns), so the count
/// is exact for piecewise-linear maps and needs no index structures.
pub fn graph_box_counts(m: &SampledCircleMap, delta_grid: &[f64]) -> Result<ScaleSeries> {
    let mut ds: Vec<f64> = delta_grid.to_vec();
    ds.sort_by(|a, b| b.partial_cmp(a).unwrap());
    ds.dedup();
    if ds.is_empty() {
        return Err(ExdimError::InsufficientScales { needed: 1, got: 0 });
    }
    let mut entries = Vec::with_capacity(ds.len());
    for &d in &ds {
        if !(d.is_finite() && d > 0.0 && d <= 1.0) {
            return Err(ExdimError::InvalidScale { r: d });
        }
        let k = (1.0 / d).round();
        if k < 1.0 || (d * k - 1.0).abs() > 1e-9 {
            return Err(ExdimError::InvalidScale { r: d });
        }
        entries.push(ScaleEntry {
            r: d,
            value: column_box_count(m, k as usize) as f64,
        });
    }
    Ok(ScaleSeries {
        kind: SeriesKind::BoxCount,
        entries,
    })
}

fn column_box_count(m: &SampledCircleMap, k: usize) -> u64 {
    let kf = k as f64;
    let col = |t: f64| -> usize { ((t * kf) as usize).min(k - 1) };
    let mut lo = vec![f64::INFINITY; k];
    let mut hi = vec![f64::NEG_INFINITY; k];
    let mut push = |c: usize, v: f64| {
        if v < lo[c] {
            lo[c] = v;
        }
        if v > hi[c] {
            hi[c] = v;
        }
    };
    let nseg = m.n_closed() - 1;
    for i in 0..nseg {
        let (t0, v0) = (m.knot_t(i), m.knot_v(i));
        let (t1, v1) = (m.knot_t(i + 1), m.knot_v(i + 1));
        let (c0, c1) = (col(t0), col(t1));
        push(c0, v0);
        push(c1, v1);
        for b in c0 + 1..=c1 {
            let x = b as f64 / kf;
            let v = v0 + (v1 - v0) * ((x - t0) / (t1 - t0));
            // A grid line belongs to the columns on both sides.
            push(b - 1, v);
            push(b, v);
        }
    }
    (0..k)
        .map(|c| ((hi[c] * kf).floor() - (lo[c] * kf).floor()) as u64 + 1)
        .sum()
}

/// Lebesgue area of the horizontal sausage `U(r)`: the integral over the
/// circle of the oscillation of f on the wrapped window `(x - r, x + r)`,
/// by trapezoid quadrature on a uniform grid of step at most r/16.
pub fn sausage_area(m: &SampledCircleMap, r: f64) -> Result<f64> {
    if !(r.is_finite() && r > 0.0) {
        return Err(ExdimError::InvalidScale { r });
    }
    if 2.0 * r >= 1.0 {
        // Window saturates the circle: oscillation is global everywhere.
        return Ok(m.range());
    }
    let n = (16.0 / r).ceil() as usize;
    let h = 1.0 / n as f64;
    let mut total = 0.0;
    for i in 0..n {
        let x = i as f64 * h;
        total += window_osc(m, x - r, x + r);
    }
    Ok(total * h)
}

/// Oscillation of f over `(a, b)` interpreted on the circle (b - a < 1).
fn window_osc(m: &SampledCircleMap, a: f64, b: f64) -> f64 {
    let arcs: [(f64, f64); 2] = if a < 0.0 {
        [(0.0, b), (a + 1.0, 1.0)]
    } else if b > 1.0 {
        [(a, 1.0), (0.0, b - 1.0)]
    } else {
        [(a, b), (a, a)]
    };
    let mut min = f64::INFINITY;
    let mut max = f64::NEG_INFINITY;
    for &(lo, hi) in &arcs {
        if hi <= lo {
            continue;
        }
        let (mn, mx) = m.interval_extrema(Interval::new(lo, hi).unwrap());
        min = min.min(mn);
        max = max.max(mx);
    }
    max - min
}

/// Least-squares slope of log(measurement) against log(scale), mapped to a
/// dimension value: `-slope` for counting series, `2 - slope` for sausage
/// areas. `window = (r_max, r_min)` restricts the entries used; `None` fits
/// everything.
pub fn fit_dimension(s: &ScaleSeries, window: Option<(f64, f64)>) -> Result<DimensionEstimate> {
    s.validate()?;
    let slack = 1.0 + 1e-12;
    let used: Vec<&ScaleEntry> = s
        .entries
        .iter()
        .filter(|e| match window {
            Some((rmax, rmin)) => e.r <= rmax * slack && e.r >= rmin / slack,
            None => true,
        })
        .collect();
    if used.len() < 3 {
        return Err(ExdimError::InsufficientScales {
            needed: 3,
            got: used.len(),
        });
    }
    let xs: Vec<f64> = used.iter().map(|e| e.r.ln()).collect();
    let ys: Vec<f64> = used.iter().map(|e| e.value.ln()).collect();
    let (beta, residual) = lsq(&xs, &ys);
    let slope = match s.kind {
        SeriesKind::SausageArea => 2.0 - beta,
        _ => -beta,
    };
    Ok(DimensionEstimate {
        slope,
        window: (used[0].r, used[used.len() - 1].r),
        residual,
        points: used.len(),
    })
}

/// Slope and RMS residual of the least-squares line through (xs, ys).
fn lsq(xs: &[f64], ys: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    for (x, y) in xs.iter().zip(ys) {
        sxx += (x - mx) * (x - mx);
        sxy += (x - mx) * (y - my);
    }
    let beta = sxy / sxx;
    let alpha = my - beta * mx;
    let mut ss = 0.0;
    for (x, y) in xs.iter().zip(ys) {
        let e = y - (alpha + beta * x);
        ss += e * e;
    }
    (beta, (ss / n).sqrt())
}

/// Dyadic scale grid 2^{-lo}..2^{-hi} (inclusive), descending.
pub fn dyadic_grid(lo: u32, hi: u32) -> Vec<f64> {
    (lo..=hi).map(|k| 0.5f64.powi(k as i32)).collect()
}

const DEFAULT_GRID: (u32, u32) = (3, 12);
const FIT_SCALES: usize = 6;

fn finest_window(s: &ScaleSeries) -> Option<(f64, f64)> {
    let n = s.entries.len();
    if n <= FIT_SCALES {
        None
    } else {
        Some((s.entries[n - FIT_SCALES].r, s.entries[n - 1].r))
    }
}

/// Packing-count dimension of the real tree, fitted over the finest scales
/// of the grid (default dyadic 2^{-3}..2^{-12}, clipped to the range of f).
pub fn tree_dimension_estimate(
    tree: &TreeSpace,
    grid: Option<&[f64]>,
) -> Result<(DimensionEstimate, ScaleSeries)> {
    let range = tree.excursion().map().range();
    let default_grid = grid.is_none();
    let grid: Vec<f64> = match grid {
        Some(g) => g.to_vec(),
        None => {
            let (lo, hi) = DEFAULT_GRID;
            dyadic_grid(lo, hi).into_iter().filter(|&r| r <= range).collect()
        }
    };
    if grid.len() < 3 {
        return Err(ExdimError::InsufficientScales {
            needed: 3,
            got: grid.len(),
        });
    }
    let mut series = tree.packing_counts(&grid, PackingMode::Greedy)?;
    if default_grid {
        // A halving that does not grow the count means the sampled tree is
        // fully resolved; scales below that carry no slope information, so
        // the automatic window stops above them.
        while series.entries.len() > 3 {
            let n = series.entries.len();
            if series.entries[n - 1].value == series.entries[n - 2].value {
                series.entries.pop();
            } else {
                break;
            }
        }
    }
    let est = fit_dimension(&series, finest_window(&series))?;
    Ok((est, series))
}

/// Box-count dimension of the graph, fitted over the finest scales of the
/// grid (default dyadic 2^{-3}..2^{-12}).
pub fn graph_dimension_estimate(
    m: &SampledCircleMap,
    grid: Option<&[f64]>,
) -> Result<(DimensionEstimate, ScaleSeries)> {
    let grid: Vec<f64> = match grid {
        Some(g) => g.to_vec(),
        None => {
            let (lo, hi) = DEFAULT_GRID;
            dyadic_grid(lo, hi)
        }
    };
    let series = graph_box_counts(m, &grid)?;
    let est = fit_dimension(&series, finest_window(&series))?;
    Ok((est, series))
}

/// Sausage-area dimension of the graph over a scale grid.
pub fn sausage_dimension_estimate(
    m: &SampledCircleMap,
    grid: &[f64],
) -> Result<(DimensionEstimate, ScaleSeries)> {
    let mut rs: Vec<f64> = grid.to_vec();
    rs.sort_by(|a, b| b.partial_cmp(a).unwrap());
    rs.dedup();
    let mut entries = Vec::with_capacity(rs.len());
    for &r in &rs {
        entries.push(ScaleEntry {
            r,
            value: sausage_area(m, r)?,
        });
    }
    let series = ScaleSeries {
        kind: SeriesKind::SausageArea,
        entries,
    };
    let est = fit_dimension(&series, None)?;
    Ok((est, series))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::map::{ExcursionForm, SampledCircleMap};
    use crate::tree::TreeSpace;

    fn tent() -> SampledCircleMap {
        SampledCircleMap::from_pairs(&[(0.0, 0.0), (0.5, 1.0)]).unwrap()
    }

    fn wiggle() -> SampledCircleMap {
        SampledCircleMap::from_pairs(&[
            (0.0, 0.1),
            (0.13, 0.82),
            (0.31, 0.33),
            (0.5, 0.95),
            (0.68, 0.0),
            (0.85, 0.6),
        ])
        .unwrap()
    }

    /// Column extrema recomputed independently through `evaluate`, then the
    /// same per-column closed-box formula.
    fn raster_oracle(m: &SampledCircleMap, k: usize) -> u64 {
        let kf = k as f64;
        let mut total = 0u64;
        for c in 0..k {
            let (a, b) = (c as f64 / kf, (c + 1) as f64 / kf);
            let mut mn = f64::INFINITY;
            let mut mx = f64::NEG_INFINITY;
            let steps = 4096;
            for s in 0..=steps {
                let t = (a + (b - a) * s as f64 / steps as f64).min(1.0);
                let v = m.evaluate(t);
                mn = mn.min(v);
                mx = mx.max(v);
            }
            for i in 0..m.n_closed() {
                let t = m.knot_t(i);
                if t >= a && t <= b {
                    mn = mn.min(m.knot_v(i));
                    mx = mx.max(m.knot_v(i));
                }
            }
            total += ((mx * kf).floor() - (mn * kf).floor()) as u64 + 1;
        }
        total
    }

    #[test]
    fn tent_boxes_at_quarter_grid() {
        let m = tent();
        let s = graph_box_counts(&m, &[0.25]).unwrap();
        assert_eq!(s.entries[0].value, 12.0);
        assert_eq!(raster_oracle(&m, 4), 12);
    }

    #[test]
    fn box_counts_match_raster_oracle() {
        for m in [tent(), wiggle()] {
            for k in [2usize, 4, 8, 16, 64] {
                let s = graph_box_counts(&m, &[1.0 / k as f64]).unwrap();
                assert_eq!(
                    s.entries[0].value as u64,
                    raster_oracle(&m, k),
                    "k={k}"
                );
            }
        }
    }

    #[test]
    fn box_counts_monotone_in_delta() {
        let m = wiggle();
        let s = graph_box_counts(&m, &dyadic_grid(1, 8)).unwrap();
        for w in s.entries.windows(2) {
            assert!(w[1].value >= w[0].value);
        }
    }

    #[test]
    fn reject_non_reciprocal_delta() {
        assert!(matches!(
            graph_box_counts(&tent(), &[0.3]),
            Err(ExdimError::InvalidScale { .. })
        ));
    }

    #[test]
    fn straight_flanks_fit_dimension_one() {
        let (est, _) = graph_dimension_estimate(&tent(), None).unwrap();
        assert!((est.slope - 1.0).abs() < 0.02, "slope={}", est.slope);
        assert!(est.residual < 1e-6);
    }

    #[test]
    fn synthetic_power_law_fits_exactly() {
        let entries: Vec<ScaleEntry> = (3..=10)
            .map(|k| ScaleEntry {
                r: 0.5f64.powi(k),
                value: 4.0f64.powi(k),
            })
            .collect();
        let s = ScaleSeries {
            kind: SeriesKind::PackingCount,
            entries,
        };
        let est = fit_dimension(&s, None).unwrap();
        assert!((est.slope - 2.0).abs() < 1e-12);
        assert!(est.residual < 1e-12);
        assert_eq!(est.points, 8);
    }

    #[test]
    fn bounded_series_fits_near_zero() {
        let entries: Vec<ScaleEntry> = (1..=10)
            .map(|k| ScaleEntry {
                r: 0.5f64.powi(k),
                value: 4.0 - 4.0 * 0.5f64.powi(k),
            })
            .collect();
        let s = ScaleSeries {
            kind: SeriesKind::BoxCount,
            entries,
        };
        let est = fit_dimension(&s, Some((0.5f64.powi(5), 0.5f64.powi(10)))).unwrap();
        assert!(est.slope.abs() < 0.02, "slope={}", est.slope);
    }

    #[test]
    fn too_few_points_rejected() {
        let s = ScaleSeries {
            kind: SeriesKind::BoxCount,
            entries: vec![
                ScaleEntry { r: 0.5, value: 3.0 },
                ScaleEntry { r: 0.25, value: 9.0 },
            ],
        };
        assert!(matches!(
            fit_dimension(&s, None),
            Err(ExdimError::InsufficientScales { .. })
        ));
    }

    #[test]
    fn sausage_matches_quadrature_oracle() {
        let m = tent();
        for r in [0.25, 0.1, 0.05] {
            let got = sausage_area(&m, r).unwrap();
            // Independent fine-grid oracle by direct window sampling.
            let n = 4096;
            let mut acc = 0.0;
            for i in 0..n {
                let x = i as f64 / n as f64;
                let mut mn = f64::INFINITY;
                let mut mx = f64::NEG_INFINITY;
                let w = 512;
                for s in 0..=w {
                    let t = x - r + 2.0 * r * s as f64 / w as f64;
                    let v = m.evaluate(t.rem_euclid(1.0));
                    mn = mn.min(v);
                    mx = mx.max(v);
                }
                acc += mx - mn;
            }
            let oracle = acc / n as f64;
            assert!(
                (got - oracle).abs() < 3e-3,
                "r={r}: got {got}, oracle {oracle}"
            );
        }
    }

    #[test]
    fn sausage_saturates_beyond_half() {
        let m = wiggle();
        let a = sausage_area(&m, 0.6).unwrap();
        assert!((a - m.range()).abs() < 1e-12);
    }

    #[test]
    fn sausage_monotone_in_r() {
        let m = wiggle();
        let mut prev = 0.0;
        for r in [0.02, 0.05, 0.1, 0.2, 0.3, 0.45] {
            let a = sausage_area(&m, r).unwrap();
            assert!(a >= prev - 1e-9, "r={r}");
            prev = a;
        }
    }

    #[test]
    fn dense_tent_tree_dimension_near_one() {
        let pairs: Vec<(f64, f64)> = (0..256)
            .map(|i| {
                let t = i as f64 / 256.0;
                (t, 1.0 - 2.0 * (t - 0.5).abs())
            })
            .collect();
        let m = SampledCircleMap::from_pairs(&pairs).unwrap();
        let tree = TreeSpace::new(ExcursionForm::from_normalized(m).unwrap());
        let grid: Vec<f64> = dyadic_grid(2, 6);
        let (est, series) = tree_dimension_estimate(&tree, Some(&grid)).unwrap();
        assert!((est.slope - 1.0).abs() < 0.2, "slope={}", est.slope);
        for w in series.entries.windows(2) {
            assert!(w[1].value >= w[0].value);
        }
    }
}
