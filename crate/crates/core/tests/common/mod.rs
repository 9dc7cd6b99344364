//! Brute-force reference implementations used to pin the fast algorithms.
//! Everything here prefers obviousness over speed: exhaustive enumeration,
//! dense sampling, and tiny dynamic programs over explicit event sets.

#![allow(dead_code)]

use exdim::map::Interval;
use exdim::SampledCircleMap;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Closed knot values of a map: the stored values plus the wrap back to the
/// first one.
pub fn closed_values(m: &SampledCircleMap) -> Vec<f64> {
    let mut v: Vec<f64> = m.values().to_vec();
    v.push(v[0]);
    v
}

pub fn closed_times(m: &SampledCircleMap) -> Vec<f64> {
    let mut t: Vec<f64> = m.times().to_vec();
    t.push(1.0);
    t
}

/// Count alternating extrema of the closed value sequence the way the
/// library's thinning does: plateaus collapse, endpoints always count.
pub fn count_extrema(vals: &[f64]) -> usize {
    let mut kept: Vec<f64> = Vec::new();
    for &v in vals {
        if kept.last() == Some(&v) {
            continue;
        }
        while kept.len() >= 2 {
            let a = kept[kept.len() - 2];
            let b = kept[kept.len() - 1];
            if (v > b) == (b > a) {
                kept.pop();
            } else {
                break;
            }
        }
        kept.push(v);
    }
    kept.len()
}

/// Random piecewise-linear circle map on dyadic grids: times are multiples
/// of 1/512, values multiples of 1/16 in [0, 1]. Dyadic data keeps every
/// derived level and crossing exactly representable, so the oracles can
/// compare with equality instead of tolerances. Rejection keeps the
/// alternating-extrema count at or below `max_extrema`.
pub fn random_dyadic_map(seed: u64, max_extrema: usize) -> SampledCircleMap {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    loop {
        let nseg = rng.gen_range(3..=11usize);
        let mut ticks: Vec<u32> = Vec::new();
        while ticks.len() < nseg - 1 {
            let t = rng.gen_range(1..512u32);
            if !ticks.contains(&t) {
                ticks.push(t);
            }
        }
        ticks.sort_unstable();
        let mut ts = vec![0.0f64];
        ts.extend(ticks.iter().map(|&t| t as f64 / 512.0));
        let mut vs: Vec<f64> = Vec::with_capacity(nseg);
        let mut tries = 0;
        while vs.len() < nseg && tries < 200 {
            tries += 1;
            let v = rng.gen_range(0..=16u32) as f64 / 16.0;
            // Avoid zero-length segments in value space (plateaus are made
            // deliberately elsewhere).
            if vs.last() == Some(&v) {
                continue;
            }
            vs.push(v);
        }
        if vs.len() != nseg || vs[nseg - 1] == vs[0] {
            continue;
        }
        let mut cl = vs.clone();
        cl.push(vs[0]);
        if count_extrema(&cl) > max_extrema || cl.iter().all(|&v| v == cl[0]) {
            continue;
        }
        return SampledCircleMap::new(ts, vs).unwrap();
    }
}

/// Exhaustive p-variation: maximum of the variational sum over every subset
/// of the closed knots (any partition of a piecewise-linear map is dominated
/// by one through knots).
pub fn oracle_p_variation(m: &SampledCircleMap, p: f64) -> f64 {
    let vals = closed_values(m);
    let n = vals.len();
    assert!(n <= 20, "oracle is exponential; got {n} knots");
    let mut best = 0.0f64;
    for mask in 1u32..(1 << n) {
        let mut sum = 0.0;
        let mut prev: Option<f64> = None;
        for (i, &v) in vals.iter().enumerate() {
            if mask & (1 << i) != 0 {
                if let Some(pv) = prev {
                    sum += (v - pv).abs().powf(p);
                }
                prev = Some(v);
            }
        }
        best = best.max(sum);
    }
    best
}

/// Exhaustive restricted variation: same enumeration, popcount-capped.
pub fn oracle_restricted_variation(m: &SampledCircleMap, p: f64, max_points: usize) -> f64 {
    let vals = closed_values(m);
    let n = vals.len();
    assert!(n <= 20);
    let mut best = 0.0f64;
    for mask in 1u32..(1 << n) {
        if (mask.count_ones() as usize) > max_points {
            continue;
        }
        let mut sum = 0.0;
        let mut prev: Option<f64> = None;
        for (i, &v) in vals.iter().enumerate() {
            if mask & (1 << i) != 0 {
                if let Some(pv) = prev {
                    sum += (v - pv).abs().powf(p);
                }
                prev = Some(v);
            }
        }
        best = best.max(sum);
    }
    best
}

/// Events where the map attains a lattice value `phase + j*r`: `(time, j)`.
fn lattice_events(m: &SampledCircleMap, r: f64, phase: f64) -> Vec<(f64, i64)> {
    let vals = closed_values(m);
    let times = closed_times(m);
    let lo = vals.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = vals.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let jmin = ((lo - phase) / r).ceil() as i64;
    let jmax = ((hi - phase) / r).floor() as i64;
    let mut ev: Vec<(f64, i64)> = Vec::new();
    for j in jmin..=jmax {
        let level = phase + j as f64 * r;
        for s in 0..times.len() - 1 {
            let (t0, v0) = (times[s], vals[s]);
            let (t1, v1) = (times[s + 1], vals[s + 1]);
            if (level - v0).abs() < 1e-12 {
                ev.push((t0, j));
            }
            if s == times.len() - 2 && (level - v1).abs() < 1e-12 {
                ev.push((t1, j));
            }
            let (a, b) = (v0.min(v1), v0.max(v1));
            if level > a + 1e-12 && level < b - 1e-12 {
                let t = t0 + (t1 - t0) * ((level - v0) / (v1 - v0));
                ev.push((t, j));
            }
        }
    }
    ev.sort_by(|x, y| x.partial_cmp(y).unwrap());
    ev.dedup_by(|a, b| (a.0 - b.0).abs() < 1e-15 && a.1 == b.1);
    ev
}

/// Exact-step variation by brute force: for every candidate lattice phase,
/// find the longest time-increasing chain of lattice events whose levels
/// move by one lattice rung per step. Returns the maximal step count.
pub fn oracle_pr_steps(m: &SampledCircleMap, r: f64) -> u64 {
    let vals = closed_values(m);
    // Candidate phases: every knot value's residue (a lattice through that
    // value), plus midpoints between consecutive residues to cover the open
    // regions between event births.
    let mut ph: Vec<f64> = vals.iter().map(|v| v.rem_euclid(r)).collect();
    ph.push(0.0);
    ph.sort_by(|a, b| a.partial_cmp(b).unwrap());
    ph.dedup_by(|a, b| (*a - *b).abs() < 1e-13);
    let base = ph.clone();
    for w in base.windows(2) {
        ph.push(0.5 * (w[0] + w[1]));
    }
    if let (Some(&first), Some(&last)) = (base.first(), base.last()) {
        ph.push(0.5 * (last + first + r).rem_euclid(r));
    }
    let mut best = 0u64;
    for &phase in &ph {
        let ev = lattice_events(m, r, phase);
        let n = ev.len();
        let mut chain = vec![1u64; n];
        for i in 0..n {
            for k in 0..i {
                if ev[k].0 < ev[i].0 - 1e-15 && (ev[k].1 - ev[i].1).abs() == 1 {
                    chain[i] = chain[i].max(chain[k] + 1);
                }
            }
            if chain[i] > best + 1 {
                best = chain[i] - 1;
            }
        }
    }
    best
}

/// Max cardinality of disjoint closed intervals whose endpoint values differ
/// by exactly `r`: enumerate candidate endpoints (knots and every crossing
/// of the iterated levels knot-value + m*r), list all exact-r pairs, and run
/// earliest-end interval scheduling, which is optimal for this objective.
pub fn oracle_crossing_count(m: &SampledCircleMap, r: f64) -> usize {
    let vals = closed_values(m);
    let times = closed_times(m);
    let lo = vals.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = vals.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    // Iterated levels.
    let mut levels: Vec<f64> = Vec::new();
    for &v in &vals {
        let mut j = ((lo - v) / r).ceil() as i64;
        loop {
            let level = v + j as f64 * r;
            if level > hi + 1e-12 {
                break;
            }
            if level >= lo - 1e-12 {
                levels.push(level);
            }
            j += 1;
        }
    }
    levels.sort_by(|a, b| a.partial_cmp(b).unwrap());
    levels.dedup_by(|a, b| (*a - *b).abs() < 1e-13);
    // Candidate points: knots plus every level crossing.
    let mut cand: Vec<(f64, f64)> = times.iter().cloned().zip(vals.iter().cloned()).collect();
    for s in 0..times.len() - 1 {
        let (t0, v0) = (times[s], vals[s]);
        let (t1, v1) = (times[s + 1], vals[s + 1]);
        let (a, b) = (v0.min(v1), v0.max(v1));
        for &level in &levels {
            if level > a + 1e-12 && level < b - 1e-12 {
                let t = t0 + (t1 - t0) * ((level - v0) / (v1 - v0));
                cand.push((t, level));
            }
        }
    }
    cand.sort_by(|x, y| x.0.partial_cmp(&y.0).unwrap());
    // All exact-r intervals.
    let mut ivs: Vec<(f64, f64)> = Vec::new();
    for i in 0..cand.len() {
        for j in i + 1..cand.len() {
            if ((cand[i].1 - cand[j].1).abs() - r).abs() < 1e-12 {
                ivs.push((cand[i].0, cand[j].0));
            }
        }
    }
    // Earliest-end scheduling; intervals may share endpoints.
    ivs.sort_by(|a, b| a.1.partial_cmp(&b.1).unwrap());
    let mut count = 0usize;
    let mut end = f64::NEG_INFINITY;
    for &(lo_t, hi_t) in &ivs {
        if lo_t >= end {
            count += 1;
            end = hi_t;
        }
    }
    count
}

/// Graph box count by dense per-column sampling (knots plus 64 interior
/// samples per column); exact for piecewise-linear maps because column
/// extrema sit at knots or column edges, all of which are sampled.
pub fn oracle_box_count(m: &SampledCircleMap, k: usize) -> u64 {
    let kf = k as f64;
    let mut total = 0u64;
    for c in 0..k {
        let x0 = c as f64 / kf;
        let x1 = (c + 1) as f64 / kf;
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        let mut push = |v: f64| {
            lo = lo.min(v);
            hi = hi.max(v);
        };
        push(m.evaluate(x0));
        push(m.evaluate(x1));
        for s in 1..64 {
            push(m.evaluate(x0 + (x1 - x0) * (s as f64 / 64.0)));
        }
        for &t in m.times() {
            if t > x0 && t < x1 {
                push(m.evaluate(t));
            }
        }
        total += ((hi * kf).floor() - (lo * kf).floor()) as u64 + 1;
    }
    total
}

/// Sausage area by brute quadrature: midpoint rule at step r/256 with the
/// window oscillation scanned directly over the knots.
pub fn oracle_sausage_area(m: &SampledCircleMap, r: f64) -> f64 {
    let n = (256.0 / r).ceil() as usize;
    let h = 1.0 / n as f64;
    let times = closed_times(m);
    let vals = closed_values(m);
    let eval_osc = |a: f64, b: f64| -> f64 {
        // Oscillation over the wrapped window (a, b).
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        let mut push = |v: f64| {
            lo = lo.min(v);
            hi = hi.max(v);
        };
        let wrap = |t: f64| t.rem_euclid(1.0);
        push(m.evaluate(wrap(a)));
        push(m.evaluate(wrap(b)));
        for (i, &t) in times.iter().enumerate() {
            for shift in [-1.0f64, 0.0, 1.0] {
                let u = t + shift;
                if u > a && u < b {
                    push(vals[i]);
                }
            }
        }
        hi - lo
    };
    let mut total = 0.0;
    for i in 0..n {
        let x = (i as f64 + 0.5) * h;
        total += eval_osc(x - r, x + r);
    }
    total * h
}

/// Exhaustive maximum r-separated subset of `points` under the tree metric
/// `dist`, by bitmask enumeration with per-point conflict masks.
pub fn oracle_max_separated(dist: &dyn Fn(f64, f64) -> f64, points: &[f64], r: f64) -> usize {
    let n = points.len();
    assert!(n <= 20);
    let mut conflict = vec![0u32; n];
    for i in 0..n {
        for j in 0..n {
            if i != j && dist(points[i], points[j]) <= r {
                conflict[i] |= 1 << j;
            }
        }
    }
    let mut best = 0usize;
    for mask in 1u32..(1 << n) {
        if (mask.count_ones() as usize) <= best {
            continue;
        }
        let mut ok = true;
        let mut m = mask;
        while m != 0 {
            let i = m.trailing_zeros() as usize;
            if conflict[i] & mask != 0 {
                ok = false;
                break;
            }
            m &= m - 1;
        }
        if ok {
            best = mask.count_ones() as usize;
        }
    }
    best
}

/// A small random homeomorphism with dyadic breakpoints.
pub fn random_homeomorphism(seed: u64) -> exdim::timechange::Homeomorphism {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.gen_range(1..=6usize);
    let mut xt: Vec<u32> = Vec::new();
    let mut yt: Vec<u32> = Vec::new();
    while xt.len() < n {
        let v = rng.gen_range(1..256u32);
        if !xt.contains(&v) {
            xt.push(v);
        }
    }
    while yt.len() < n {
        let v = rng.gen_range(1..256u32);
        if !yt.contains(&v) {
            yt.push(v);
        }
    }
    xt.sort_unstable();
    yt.sort_unstable();
    let mut xs = vec![0.0];
    xs.extend(xt.iter().map(|&v| v as f64 / 256.0));
    xs.push(1.0);
    let mut ys = vec![0.0];
    ys.extend(yt.iter().map(|&v| v as f64 / 256.0));
    ys.push(1.0);
    exdim::timechange::Homeomorphism::new(xs, ys).unwrap()
}

/// Largest dyadic scale grid that fits under the map's oscillation range.
pub fn dyadic_scales_below(m: &SampledCircleMap, lo: u32, hi: u32) -> Vec<f64> {
    (lo..=hi)
        .map(|k| 0.5f64.powi(k as i32))
        .filter(|&r| r <= m.range())
        .collect()
}

/// Closed-form zig-zag step counts for the p = 2 family: at r = 2^-k the
/// maximal exact-r walk makes 4^(k+1) - 2^(k+2) steps (band-by-band
/// counting: bands at or below the scale contribute their full teeth,
/// coarser bands climb in ladders).
pub fn zigzag_p2_steps(k: u32) -> u64 {
    4u64.pow(k + 1) - 2u64.pow(k + 2)
}

pub fn tent_map() -> SampledCircleMap {
    SampledCircleMap::new(vec![0.0, 0.5], vec![0.0, 1.0]).unwrap()
}

pub fn interval(lo: f64, hi: f64) -> Interval {
    Interval::new(lo, hi).unwrap()
}
