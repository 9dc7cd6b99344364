//! Circle time changes: piecewise-linear homeomorphisms of [0, 1] fixing the
//! endpoints, the Hölder reparametrization built from cumulative variation,
//! exact-crossing interval families, and the staged dimension-maximizing
//! construction with per-stage certificates.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{ExdimError, Result};
use crate::map::{ExcursionForm, Interval, SampledCircleMap};
use crate::variation::{check_exponent, dp_best, p_variation, PowP};

/// Strictly increasing piecewise-linear bijection of [0, 1] with fixed
/// endpoints, stored as its breakpoint nodes.
#[derive(Debug, Clone)]
pub struct Homeomorphism {
    xs: Vec<f64>,
    ys: Vec<f64>,
}

impl Homeomorphism {
    pub fn new(xs: Vec<f64>, ys: Vec<f64>) -> Result<Self> {
        if xs.len() != ys.len() {
            return Err(ExdimError::InvalidParameter(
                "breakpoint coordinate lists differ in length".into(),
            ));
        }
        if xs.len() < 2 {
            return Err(ExdimError::InvalidParameter(
                "a homeomorphism needs at least its two endpoint nodes".into(),
            ));
        }
        if xs[0] != 0.0 || ys[0] != 0.0 || *xs.last().unwrap() != 1.0 || *ys.last().unwrap() != 1.0
        {
            return Err(ExdimError::InvalidParameter(
                "breakpoints must start at (0,0) and end at (1,1)".into(),
            ));
        }
        for w in [&xs, &ys] {
            for i in 1..w.len() {
                if !(w[i].is_finite() && w[i] > w[i - 1]) {
                    return Err(ExdimError::InvalidParameter(format!(
                        "breakpoints must increase strictly: node {i} has {} after {}",
                        w[i],
                        w[i - 1]
                    )));
                }
            }
        }
        Ok(Homeomorphism { xs, ys })
    }

    pub fn identity() -> Self {
        Homeomorphism {
            xs: vec![0.0, 1.0],
            ys: vec![0.0, 1.0],
        }
    }

    pub fn breakpoints(&self) -> &[f64] {
        &self.xs
    }

    pub fn images(&self) -> &[f64] {
        &self.ys
    }

    pub fn n_nodes(&self) -> usize {
        self.xs.len()
    }

    /// Evaluate at `x`, clamped to [0, 1]. Hits on breakpoints return the
    /// stored node image exactly.
    pub fn evaluate(&self, x: f64) -> f64 {
        if x <= 0.0 {
            return 0.0;
        }
        if x >= 1.0 {
            return 1.0;
        }
        // Last index with xs[i] <= x; xs[0] = 0 < x so i >= 0.
        let i = self.xs.partition_point(|&t| t <= x) - 1;
        if self.xs[i] == x {
            return self.ys[i];
        }
        let (x0, x1) = (self.xs[i], self.xs[i + 1]);
        let (y0, y1) = (self.ys[i], self.ys[i + 1]);
        y0 + (y1 - y0) * ((x - x0) / (x1 - x0))
    }

    /// The inverse homeomorphism: coordinates swapped, exact.
    pub fn invert(&self) -> Homeomorphism {
        Homeomorphism {
            xs: self.ys.clone(),
            ys: self.xs.clone(),
        }
    }

    /// Composition `self(inner(x))`, exact on the merged breakpoint set.
    pub fn compose(&self, inner: &Homeomorphism) -> Result<Homeomorphism> {
        // Breakpoints: inner's own, plus preimages of self's under inner.
        // For the latter the outer image is the stored node value, exact.
        let inv_inner = inner.invert();
        let a: Vec<(f64, f64)> = inner
            .xs
            .iter()
            .zip(&inner.ys)
            .map(|(&x, &y)| (x, self.evaluate(y)))
            .collect();
        let b: Vec<(f64, f64)> = self
            .xs
            .iter()
            .zip(&self.ys)
            .map(|(&bx, &by)| (inv_inner.evaluate(bx), by))
            .collect();
        let (xs, ys) = merge_graphs(&a, &b);
        Homeomorphism::new(xs, ys)
    }
}

/// Merge two sorted (x, y) graphs into one breakpoint list; on equal x the
/// first list wins.
fn merge_graphs(a: &[(f64, f64)], b: &[(f64, f64)]) -> (Vec<f64>, Vec<f64>) {
    let mut xs = Vec::with_capacity(a.len() + b.len());
    let mut ys = Vec::with_capacity(a.len() + b.len());
    let (mut i, mut j) = (0, 0);
    while i < a.len() || j < b.len() {
        let take_a = match (a.get(i), b.get(j)) {
            (Some(&(ax, _)), Some(&(bx, _))) => {
                if ax == bx {
                    j += 1;
                }
                ax <= bx
            }
            (Some(_), None) => true,
            (None, Some(_)) => false,
            (None, None) => unreachable!(),
        };
        let (x, y) = if take_a {
            i += 1;
            a[i - 1]
        } else {
            j += 1;
            b[j - 1]
        };
        if xs.last().map_or(true, |&px| x > px) {
            xs.push(x);
            ys.push(y);
        }
    }
    (xs, ys)
}

/// Reparametrize: the map `x -> f(tau(x))`, exact piecewise-linear
/// composition. Knots are the tau-preimages of f's knots merged with tau's
/// own breakpoints.
pub fn apply_time_change(f: &SampledCircleMap, tau: &Homeomorphism) -> Result<SampledCircleMap> {
    let inv = tau.invert();
    let mut a = Vec::with_capacity(f.n_knots());
    for i in 0..f.n_knots() {
        // Preimages of knots carry the knot value exactly.
        a.push((inv.evaluate(f.knot_t(i)), f.knot_v(i)));
    }
    let mut b = Vec::with_capacity(tau.n_nodes().saturating_sub(2));
    for k in 1..tau.n_nodes() - 1 {
        b.push((tau.breakpoints()[k], f.evaluate(tau.images()[k])));
    }
    let (ts, vs) = merge_graphs(&a, &b);
    SampledCircleMap::new(ts, vs)
}

// ---------------------------------------------------------------------------
// Hölder time change
// ---------------------------------------------------------------------------

/// Build the time change making `f ∘ tau` (1/p)-Hölder with constant
/// `(2 V^p(f))^(1/p)`: invert `h1(x) = B(x)/(2v) + x/2` where `B` is the
/// cumulative p-variation profile. Fails with `DivergentVariation` when the
/// refinement ladder of `V^p` has not settled.
pub fn holder_time_change(exc: &ExcursionForm, p: f64) -> Result<Homeomorphism> {
    let m = exc.map();
    let pv = p_variation(m, p)?;
    if pv.diverging {
        let n = pv.ladder.len();
        let increment = pv.ladder[n - 1].value - pv.ladder[n - 2].value;
        return Err(ExdimError::DivergentVariation { p, increment });
    }
    let v = pv.value;
    if !(v > 0.0) {
        return Err(ExdimError::NormalizeConstant { value: m.knot_v(0) });
    }
    let pw = PowP::new(p);
    let ext = m.scale_extrema_indices(0.0);
    let etimes: Vec<f64> = ext.iter().map(|&i| m.knot_t(i as usize)).collect();
    let evals: Vec<f64> = ext.iter().map(|&i| m.knot_v(i as usize)).collect();
    let (best, _) = dp_best(&evals, &pw);

    // The PL profile interpolates the true B at its nodes; cross-node chords
    // can overshoot, so validate on sampled pairs and subdivide on failure.
    let mut subdiv = 1usize;
    loop {
        let (xs, us) = profile_queries(m, subdiv);
        let mut bs = cumulative_profile(&etimes, &evals, &best, &pw, &xs, &us);
        for i in 1..bs.len() {
            if bs[i] < bs[i - 1] {
                bs[i] = bs[i - 1];
            }
        }
        let mut ys: Vec<f64> = xs
            .iter()
            .zip(&bs)
            .map(|(&x, &b)| b / (2.0 * v) + 0.5 * x)
            .collect();
        ys[0] = 0.0;
        *ys.last_mut().unwrap() = 1.0;
        let h1 = Homeomorphism::new(xs, ys)?;
        let tau = h1.invert();
        if subdiv >= 64 || holder_violations(m, &tau, p, v, 200_000, 0x51_7c_c1b7) == 0 {
            return Ok(tau);
        }
        subdiv *= 4;
    }
}

/// Query positions for the variation profile: every knot plus `subdiv - 1`
/// evenly spaced interior points per piece, ending at 1.
fn profile_queries(m: &SampledCircleMap, subdiv: usize) -> (Vec<f64>, Vec<f64>) {
    let n = m.n_knots();
    let mut xs = Vec::with_capacity(n * subdiv + 1);
    let mut us = Vec::with_capacity(n * subdiv + 1);
    for i in 0..n {
        let (t0, v0) = (m.knot_t(i), m.knot_v(i));
        let (t1, v1) = (m.knot_t(i + 1), m.knot_v(i + 1));
        xs.push(t0);
        us.push(v0);
        for j in 1..subdiv {
            let s = j as f64 / subdiv as f64;
            let x = t0 + s * (t1 - t0);
            if x > t0 && x < t1 {
                xs.push(x);
                us.push(v0 + s * (v1 - v0));
            }
        }
    }
    xs.push(1.0);
    us.push(m.knot_v(n));
    (xs, us)
}

/// Cumulative variation profile B(x) = V^p(f; [0, x]) at the given query
/// positions (ascending). `best` is the chain DP over the full extrema
/// sequence; candidates for the penultimate chain point are kept on two
/// monotone record stacks (running lows and highs), which prunes dominated
/// extrema exactly.
fn cumulative_profile(
    etimes: &[f64],
    evals: &[f64],
    best: &[f64],
    pw: &PowP,
    qx: &[f64],
    qu: &[f64],
) -> Vec<f64> {
    let mut low: Vec<(f64, f64)> = Vec::new(); // (best, value), values rise with depth
    let mut high: Vec<(f64, f64)> = Vec::new(); // (best, value), values fall with depth
    let mut e = 0usize;
    let mut out = Vec::with_capacity(qx.len());
    for (&x, &u) in qx.iter().zip(qu) {
        while e < etimes.len() && etimes[e] <= x {
            let (b, w) = (best[e], evals[e]);
            while low.last().is_some_and(|&(_, tw)| tw >= w) {
                low.pop();
            }
            low.push((b, w));
            while high.last().is_some_and(|&(_, tw)| tw <= w) {
                high.pop();
            }
            high.push((b, w));
            e += 1;
        }
        let mut bq = 0.0f64;
        for &(b, w) in &low {
            if w <= u {
                bq = bq.max(b + pw.apply(u - w));
            }
        }
        for &(b, w) in &high {
            if w >= u {
                bq = bq.max(b + pw.apply(w - u));
            }
        }
        out.push(bq);
    }
    out
}

/// Count violations of the (1/p)-Hölder certificate on `pairs` sampled
/// uniformly at random: |g(a) - g(b)| must not exceed
/// (2v)^(1/p) |a - b|^(1/p) (1 + 1e-6) for g = f ∘ tau.
pub fn holder_violations(
    f: &SampledCircleMap,
    tau: &Homeomorphism,
    p: f64,
    v: f64,
    pairs: usize,
    seed: u64,
) -> usize {
    let c = (2.0 * v).powf(1.0 / p);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut bad = 0usize;
    for _ in 0..pairs {
        let a: f64 = rng.gen();
        let b: f64 = rng.gen();
        let ga = f.evaluate(tau.evaluate(a));
        let gb = f.evaluate(tau.evaluate(b));
        let lhs = (ga - gb).abs();
        let rhs = c * (a - b).abs().powf(1.0 / p) * (1.0 + 1e-6);
        if lhs > rhs {
            bad += 1;
        }
    }
    bad
}

// ---------------------------------------------------------------------------
// Exact-crossing interval families
// ---------------------------------------------------------------------------

/// Maximal family of disjoint closed intervals [x_i, y_i] in [0, 1] (allowed
/// to touch at endpoints) with |f(y_i) - f(x_i)| = r exactly. Built by a
/// first-exit walk: track the running extremes since the last emission and
/// close an interval the moment the path moves r away from one of them; the
/// left endpoint is the last time that extreme was attained. Earliest-exit
/// selection makes the family maximal. Empty when r exceeds the range.
pub fn crossing_intervals(exc: &ExcursionForm, r: f64) -> Result<Vec<Interval>> {
    if !(r.is_finite() && r > 0.0) {
        return Err(ExdimError::InvalidScale { r });
    }
    let m = exc.map();
    let n = m.n_knots();
    let mut out = Vec::new();
    let v0 = m.knot_v(0);
    let (mut run_max, mut run_min) = (v0, v0);
    let (mut x_max, mut x_min) = (0.0f64, 0.0f64);
    for i in 0..n {
        let (t0, s0) = (m.knot_t(i), m.knot_v(i));
        let (t1, s1) = (m.knot_t(i + 1), m.knot_v(i + 1));
        if s1 > s0 {
            // Rising: only upward exits (run_max - f shrinks here).
            let mut level = run_min + r;
            while level <= s1 {
                let y = t0 + (t1 - t0) * ((level - s0) / (s1 - s0));
                out.push(Interval { lo: x_min, hi: y });
                run_min = level;
                run_max = level;
                x_min = y;
                x_max = y;
                level += r;
            }
            if s1 >= run_max {
                run_max = s1;
                x_max = t1;
            }
        } else if s1 < s0 {
            let mut level = run_max - r;
            while level >= s1 {
                let y = t0 + (t1 - t0) * ((level - s0) / (s1 - s0));
                out.push(Interval { lo: x_max, hi: y });
                run_min = level;
                run_max = level;
                x_min = y;
                x_max = y;
                level -= r;
            }
            if s1 <= run_min {
                run_min = s1;
                x_min = t1;
            }
        } else {
            // Plateau: push the attainment times forward.
            if s1 == run_max {
                x_max = t1;
            }
            if s1 == run_min {
                x_min = t1;
            }
        }
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// Dimension-maximizing time change
// ---------------------------------------------------------------------------

/// Audit record for one stage of the maximizing construction.
#[derive(Debug, Clone, Serialize)]
pub struct StageCertificate {
    pub stage: usize,
    /// Scale chosen for this stage.
    pub r: f64,
    /// Size of the crossing family disjoint from earlier placements.
    pub intervals: usize,
    /// How many of those intervals were stretched this stage.
    pub placed: usize,
    /// Smallest image diameter among the placed intervals under the final map.
    pub min_image_diameter: f64,
    /// Required lower bound: blend * 4^(-stage) * r^p.
    pub threshold: f64,
}

impl StageCertificate {
    pub fn passes(&self) -> bool {
        self.min_image_diameter >= self.threshold * (1.0 - 1e-9)
    }
}

#[derive(Debug, Clone)]
pub struct MaximizingResult {
    /// The time change to precompose with f.
    pub tau: Homeomorphism,
    pub certificates: Vec<StageCertificate>,
}

/// Default stage exponents 1/(n+4).
pub fn default_eps(stages: usize) -> Vec<f64> {
    (1..=stages).map(|n| 1.0 / (n as f64 + 4.0)).collect()
}

struct StagePick {
    stage: usize,
    r: f64,
    family: usize,
    taken: Vec<Interval>,
    threshold: f64,
}

/// Staged construction stretching exact-crossing intervals at geometrically
/// separated scales. Stage n picks the largest dyadic r below the previous
/// scale with r^(2 eps_n) <= r_{n-1} and a crossing family (disjoint from all
/// previously placed endpoints) of size at least r^(-p(1-2 eps_n)); the
/// family is thinned to at most floor(r^(-p(1-eps_n))) intervals whose
/// endpoints are placed by equidistribution inside the existing image gaps,
/// and each stage certificate audits the resulting minimum image diameter
/// against blend * 4^(-n) * r^p. Plateaus of f get half the image
/// measure via a final blend, which the thresholds absorb. Returns the
/// inverse map tau-bar (so the stretched composition is `f ∘ tau-bar`) plus
/// per-stage certificates.
pub fn maximizing_time_change(
    exc: &ExcursionForm,
    p: f64,
    stages: usize,
    eps: Option<&[f64]>,
) -> Result<MaximizingResult> {
    check_exponent(p)?;
    if stages == 0 {
        return Err(ExdimError::InvalidParameter(
            "need at least one stage".into(),
        ));
    }
    let eps_v: Vec<f64> = match eps {
        Some(e) => e.to_vec(),
        None => default_eps(stages),
    };
    if eps_v.len() < stages {
        return Err(ExdimError::InvalidParameter(format!(
            "got {} stage exponents for {stages} stages",
            eps_v.len()
        )));
    }
    for i in 0..stages {
        let ok = eps_v[i].is_finite()
            && eps_v[i] > 0.0
            && (i == 0 || eps_v[i] < eps_v[i - 1]);
        if !ok {
            return Err(ExdimError::InvalidParameter(
                "stage exponents must be positive and strictly decreasing".into(),
            ));
        }
    }

    let m = exc.map();
    let plateaus = plateau_intervals(m);
    let plateau_len: f64 = plateaus.iter().map(|&(a, b)| b - a).sum();
    let blend = if plateau_len > 0.0 { 0.5 } else { 1.0 };

    // 1-variation bounds the crossing count: each interval spends r of it.
    let mut v1 = 0.0f64;
    for i in 0..m.n_knots() {
        v1 += (m.knot_v(i + 1) - m.knot_v(i)).abs();
    }

    let mut phi_x = vec![0.0f64, 1.0];
    let mut phi_y = vec![0.0f64, 1.0];
    let mut fpts: Vec<f64> = Vec::new();
    let mut picks: Vec<StagePick> = Vec::new();
    let mut k_prev = 0i32;
    let mut r_prev = 1.0f64;

    for n in 1..=stages {
        let en = eps_v[n - 1];
        let mut chosen: Option<(i32, f64, Vec<Interval>)> = None;
        for k in (k_prev + 1)..=46 {
            let r = 0.5f64.powi(k);
            if r.powf(2.0 * en) > r_prev * (1.0 + 1e-12) {
                continue;
            }
            let lower = r.powf(-p * (1.0 - 2.0 * en));
            // Cheap upper bound before enumerating: #D(r) <= V^1/r. When the
            // required count outgrows it and keeps outgrowing it (exponent
            // above 1), no finer scale can help.
            if v1 / r + 1e-9 < lower || v1 / r > 2e7 {
                if p * (1.0 - 2.0 * en) >= 1.0 || v1 / r > 2e7 {
                    break;
                }
                continue;
            }
            let family: Vec<Interval> = crossing_intervals(exc, r)?
                .into_iter()
                .filter(|iv| disjoint_from_points(&fpts, iv))
                .collect();
            if !family.is_empty() && family.len() as f64 + 1e-9 >= lower {
                chosen = Some((k, r, family));
                break;
            }
        }
        let Some((k, r, family)) = chosen else {
            return Err(ExdimError::StageInfeasible {
                stage: n,
                completed: n - 1,
                reason: format!(
                    "no dyadic scale below {r_prev:.3e} carries a large-enough \
                     crossing family avoiding the {} placed points",
                    fpts.len()
                ),
            });
        };
        let threshold = blend * 0.25f64.powi(n as i32) * r.powf(p);

        // Stage-n count target. The nominal count r^(-p(1-eps_n)) assumes the
        // crossing family itself has that cardinality; when the family is
        // larger the count condition can only be met approximately and the
        // certificate records family vs placed. Intermediate stages keep the
        // nominal count so later stages retain diameter headroom (the same
        // role conditions (i)-(ii) play across stages). The final stage has
        // no successor to protect, so it spends the remaining equidistribution
        // budget: intervals of image diameter ~r^p fit at most r^(-p)/2 times
        // around the circle.
        let nominal = (r.powf(-p * (1.0 - en)) + 1e-9).floor();
        let capacity = if n == stages {
            (0.5 * r.powf(-p)).floor()
        } else {
            0.0
        };
        let target = nominal.max(capacity).max(1.0) as usize;
        // Pieces thinner than the stage diameter scale r^p carry no usable
        // oscillation, so the water-fill floor sits at r^p/2 (still far above
        // the certificate threshold); a gap that cannot pay that width takes
        // fewer intervals instead.
        let w_floor = (2.0 * threshold).max(0.5 * r.powf(p));
        let taken = thin_balanced(&family, &phi_x, &phi_y, target, w_floor);
        let mut new_pts: Vec<f64> = Vec::new();
        for iv in &taken {
            for x in [iv.lo, iv.hi] {
                if x > 0.0 && x < 1.0 {
                    new_pts.push(x);
                }
            }
        }
        new_pts.sort_by(|a, b| a.partial_cmp(b).unwrap());
        new_pts.dedup();

        // Equidistribute the new points inside their gaps.
        let (mut nx, mut ny) = (Vec::new(), Vec::new());
        let mut q = 0usize;
        for g in 0..phi_x.len() - 1 {
            nx.push(phi_x[g]);
            ny.push(phi_y[g]);
            let lo = phi_x[g];
            let hi = phi_x[g + 1];
            let start = q;
            while q < new_pts.len() && new_pts[q] < hi {
                debug_assert!(new_pts[q] > lo);
                q += 1;
            }
            let count = q - start;
            for (j, &x) in new_pts[start..q].iter().enumerate() {
                let frac = (j + 1) as f64 / (count + 1) as f64;
                nx.push(x);
                ny.push(phi_y[g] + (phi_y[g + 1] - phi_y[g]) * frac);
            }
        }
        nx.push(1.0);
        ny.push(1.0);
        phi_x = nx;
        phi_y = ny;

        let mut merged = Vec::with_capacity(fpts.len() + new_pts.len());
        merged.extend_from_slice(&fpts);
        merged.extend_from_slice(&new_pts);
        merged.sort_by(|a, b| a.partial_cmp(b).unwrap());
        merged.dedup();
        fpts = merged;

        picks.push(StagePick {
            stage: n,
            r,
            family: family.len(),
            taken,
            threshold,
        });
        k_prev = k;
        r_prev = r;
    }

    let phi = Homeomorphism::new(phi_x, phi_y)?;
    let psi = if blend < 1.0 {
        blend_with_plateau_measure(&phi, &plateaus, plateau_len)?
    } else {
        phi
    };

    let certificates: Vec<StageCertificate> = picks
        .iter()
        .map(|pk| {
            let min_diam = pk
                .taken
                .iter()
                .map(|iv| psi.evaluate(iv.hi) - psi.evaluate(iv.lo))
                .fold(f64::INFINITY, f64::min);
            StageCertificate {
                stage: pk.stage,
                r: pk.r,
                intervals: pk.family,
                placed: pk.taken.len(),
                min_image_diameter: min_diam,
                threshold: pk.threshold,
            }
        })
        .collect();

    Ok(MaximizingResult {
        tau: psi.invert(),
        certificates,
    })
}

fn disjoint_from_points(pts: &[f64], iv: &Interval) -> bool {
    let i = pts.partition_point(|&x| x < iv.lo);
    i == pts.len() || pts[i] > iv.hi
}

/// Keep at most `target` intervals of a sorted disjoint family, choosing how
/// many survive in each gap between consecutive image breakpoints so that the
/// split pieces come out at a common width: a water-fill over gaps, each gap
/// capped by its own family run and by the floor `w_min` under its piece
/// width. Equalizing the pieces protects the smallest image diameter the
/// stage certificate audits; inside a gap the survivors are an even subsample
/// of its family run.
fn thin_balanced(
    family: &[Interval],
    phi_x: &[f64],
    phi_y: &[f64],
    target: usize,
    w_min: f64,
) -> Vec<Interval> {
    if family.len() <= target {
        return family.to_vec();
    }
    // Split the family into runs per gap; intervals avoid all breakpoints,
    // so each one sits strictly inside a single gap.
    let mut runs: Vec<(usize, usize, f64)> = Vec::new();
    let mut gi = 0usize;
    let mut idx = 0usize;
    while idx < family.len() {
        while gi + 1 < phi_x.len() && phi_x[gi + 1] < family[idx].lo {
            gi += 1;
        }
        let mut end = idx;
        while end < family.len() && (gi + 1 >= phi_x.len() || family[end].lo <= phi_x[gi + 1]) {
            end += 1;
        }
        let width = if gi + 1 < phi_y.len() {
            (phi_y[gi + 1] - phi_y[gi]).max(0.0)
        } else {
            0.0
        };
        runs.push((idx, end, width));
        idx = end;
    }
    // A gap of image width W holding q intervals splits into 2q+1 pieces of
    // width W/(2q+1), so at piece width w it can hold (W/w - 1)/2 intervals.
    let quota_at = |w: f64| -> Vec<usize> {
        runs.iter()
            .map(|&(s, e, width)| {
                let cap = ((width / w - 1.0) / 2.0).floor().max(0.0) as usize;
                cap.min(e - s)
            })
            .collect()
    };
    // Find the widest common piece width that still reaches the target; if
    // even the floor cannot, place what fits at the floor.
    let mut quota = quota_at(w_min);
    if quota.iter().sum::<usize>() > target {
        let (mut lo, mut hi) = (w_min, 1.0f64);
        for _ in 0..60 {
            let mid = 0.5 * (lo + hi);
            if quota_at(mid).iter().sum::<usize>() >= target {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        quota = quota_at(lo);
        // Trim the rounding overshoot where pieces are currently thinnest.
        let mut excess = quota.iter().sum::<usize>().saturating_sub(target);
        while excess > 0 {
            let i = (0..runs.len())
                .filter(|&i| quota[i] > 0)
                .min_by(|&a, &b| {
                    let wa = runs[a].2 / (2 * quota[a] + 1) as f64;
                    let wb = runs[b].2 / (2 * quota[b] + 1) as f64;
                    wa.total_cmp(&wb)
                })
                .expect("positive excess implies a positive quota");
            quota[i] -= 1;
            excess -= 1;
        }
    }
    let mut taken: Vec<Interval> = Vec::with_capacity(target);
    for (i, &(s, e, _)) in runs.iter().enumerate() {
        let avail = e - s;
        let take = quota[i];
        for j in 0..take {
            let pick = if take == avail {
                s + j
            } else if take == 1 {
                s + avail / 2
            } else {
                s + (j * (avail - 1)) / (take - 1)
            };
            taken.push(family[pick]);
        }
    }
    taken.sort_by(|a, b| a.lo.partial_cmp(&b.lo).unwrap());
    taken
}

/// Maximal intervals on which the map is constant.
fn plateau_intervals(m: &SampledCircleMap) -> Vec<(f64, f64)> {
    let n = m.n_knots();
    let mut out: Vec<(f64, f64)> = Vec::new();
    for i in 0..n {
        let (t0, v0) = (m.knot_t(i), m.knot_v(i));
        let (t1, v1) = (m.knot_t(i + 1), m.knot_v(i + 1));
        if v0 == v1 {
            match out.last_mut() {
                Some(last) if last.1 == t0 => last.1 = t1,
                _ => out.push((t0, t1)),
            }
        }
    }
    out
}

/// psi(x) = phi(x)/2 + (plateau measure below x, normalized)/2. Gives the
/// crossing-free constant pieces their own share of image length.
fn blend_with_plateau_measure(
    phi: &Homeomorphism,
    plateaus: &[(f64, f64)],
    total: f64,
) -> Result<Homeomorphism> {
    let mut xs: Vec<f64> = phi.breakpoints().to_vec();
    for &(a, b) in plateaus {
        xs.push(a);
        xs.push(b);
    }
    xs.sort_by(|a, b| a.partial_cmp(b).unwrap());
    xs.dedup();
    let measure_below = |x: f64| -> f64 {
        let mut acc = 0.0;
        for &(a, b) in plateaus {
            if x <= a {
                break;
            }
            acc += (x.min(b) - a).max(0.0);
        }
        acc
    };
    let mut ys: Vec<f64> = xs
        .iter()
        .map(|&x| 0.5 * phi.evaluate(x) + 0.5 * measure_below(x) / total)
        .collect();
    ys[0] = 0.0;
    *ys.last_mut().unwrap() = 1.0;
    Homeomorphism::new(xs, ys)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::map::SampledCircleMap;

    fn tent() -> SampledCircleMap {
        SampledCircleMap::new(vec![0.0, 0.5], vec![0.0, 1.0]).unwrap()
    }

    fn tent_exc() -> ExcursionForm {
        ExcursionForm::from_normalized(tent()).unwrap()
    }

    #[test]
    fn homeo_validates_nodes() {
        assert!(Homeomorphism::new(vec![0.0, 1.0], vec![0.0, 1.0]).is_ok());
        assert!(Homeomorphism::new(vec![0.0, 0.5, 1.0], vec![0.0, 0.5], ).is_err());
        assert!(Homeomorphism::new(vec![0.0, 0.5, 0.5, 1.0], vec![0.0, 0.3, 0.6, 1.0]).is_err());
        assert!(Homeomorphism::new(vec![0.1, 1.0], vec![0.0, 1.0]).is_err());
    }

    #[test]
    fn evaluate_interpolates_and_hits_nodes() {
        let h = Homeomorphism::new(vec![0.0, 0.25, 1.0], vec![0.0, 0.75, 1.0]).unwrap();
        assert_eq!(h.evaluate(0.25), 0.75);
        assert_eq!(h.evaluate(0.125), 0.375);
        assert_eq!(h.evaluate(-1.0), 0.0);
        assert_eq!(h.evaluate(2.0), 1.0);
    }

    #[test]
    fn inverse_round_trips_exactly_at_nodes() {
        let h = Homeomorphism::new(vec![0.0, 0.2, 0.7, 1.0], vec![0.0, 0.5, 0.9, 1.0]).unwrap();
        let inv = h.invert();
        for (&x, &y) in h.breakpoints().iter().zip(h.images()) {
            assert_eq!(inv.evaluate(y), x);
            assert_eq!(h.evaluate(x), y);
        }
        let id = h.compose(&inv).unwrap();
        for i in 0..=20 {
            let x = i as f64 / 20.0;
            assert!((id.evaluate(x) - x).abs() < 1e-12);
        }
    }

    #[test]
    fn composition_matches_pointwise() {
        let a = Homeomorphism::new(vec![0.0, 0.3, 1.0], vec![0.0, 0.6, 1.0]).unwrap();
        let b = Homeomorphism::new(vec![0.0, 0.5, 1.0], vec![0.0, 0.2, 1.0]).unwrap();
        let c = a.compose(&b).unwrap();
        for i in 0..=100 {
            let x = i as f64 / 100.0;
            assert!((c.evaluate(x) - a.evaluate(b.evaluate(x))).abs() < 1e-12);
        }
    }

    #[test]
    fn apply_time_change_is_exact_composition() {
        let m = tent();
        let tau = Homeomorphism::new(vec![0.0, 0.5, 1.0], vec![0.0, 0.25, 1.0]).unwrap();
        let g = apply_time_change(&m, &tau).unwrap();
        // Knots at tau's breakpoint 0.5 plus the preimage of f's knot:
        // tau(x) = 0.5 solves to x = 2/3 on the second tau piece.
        assert_eq!(g.n_knots(), 3);
        assert_eq!(g.knot_t(1), 0.5);
        assert!((g.knot_t(2) - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(g.knot_v(2), 1.0);
        for i in 0..=64 {
            let x = i as f64 / 64.0;
            assert!((g.evaluate(x) - m.evaluate(tau.evaluate(x))).abs() < 1e-12);
        }
    }

    #[test]
    fn tent_crossings_at_half() {
        let iv = crossing_intervals(&tent_exc(), 0.5).unwrap();
        let ends: Vec<(f64, f64)> = iv.iter().map(|i| (i.lo, i.hi)).collect();
        assert_eq!(
            ends,
            vec![(0.0, 0.25), (0.25, 0.5), (0.5, 0.75), (0.75, 1.0)]
        );
    }

    #[test]
    fn crossings_carry_exact_increments() {
        let m = SampledCircleMap::new(
            vec![0.0, 0.2, 0.35, 0.6, 0.8],
            vec![0.0, 0.9, 0.3, 0.7, 0.2],
        )
        .unwrap();
        let exc = ExcursionForm::from_normalized(m).unwrap();
        for r in [0.15, 0.3, 0.45] {
            let ivs = crossing_intervals(&exc, r).unwrap();
            assert!(!ivs.is_empty());
            let mut prev_end = 0.0;
            for iv in &ivs {
                assert!(iv.lo >= prev_end - 1e-15);
                let step = exc.map().evaluate(iv.hi) - exc.map().evaluate(iv.lo);
                assert!(
                    (step.abs() - r).abs() < 1e-12,
                    "increment {step} at r = {r}"
                );
                prev_end = iv.hi;
            }
        }
    }

    #[test]
    fn declining_peaks_still_walk() {
        // Second peak lower: no second upward crossing at large r.
        let m = SampledCircleMap::new(
            vec![0.0, 0.25, 0.5, 0.75],
            vec![0.0, 1.0, 0.0, 0.9],
        )
        .unwrap();
        let exc = ExcursionForm::from_normalized(m).unwrap();
        let ivs = crossing_intervals(&exc, 0.95).unwrap();
        assert_eq!(ivs.len(), 2);
    }

    #[test]
    fn large_r_gives_empty_family() {
        assert!(crossing_intervals(&tent_exc(), 1.5).unwrap().is_empty());
        assert!(crossing_intervals(&tent_exc(), 0.0).is_err());
    }

    #[test]
    fn holder_tent_certificate() {
        let exc = tent_exc();
        let tau = holder_time_change(&exc, 1.0).unwrap();
        // V^1 = 2; bound 4|a-b| must hold everywhere.
        assert_eq!(holder_violations(exc.map(), &tau, 1.0, 2.0, 50_000, 7), 0);
    }

    #[test]
    fn holder_asymmetric_map() {
        let m = SampledCircleMap::new(
            vec![0.0, 0.1, 0.3, 0.55, 0.9],
            vec![0.0, 0.8, 0.2, 1.0, 0.4],
        )
        .unwrap();
        let exc = ExcursionForm::from_normalized(m).unwrap();
        for p in [1.0, 1.5, 2.0] {
            let tau = holder_time_change(&exc, p).unwrap();
            let v = p_variation(exc.map(), p).unwrap().value;
            assert_eq!(
                holder_violations(exc.map(), &tau, p, v, 50_000, 99),
                0,
                "p = {p}"
            );
        }
    }

    #[test]
    fn maximizer_on_tent_stays_near_identity() {
        let exc = tent_exc();
        let res = maximizing_time_change(&exc, 2.0, 2, Some(&[0.6, 0.55])).unwrap();
        assert_eq!(res.certificates.len(), 2);
        for c in &res.certificates {
            assert!(c.passes(), "stage {} diam {} < {}", c.stage, c.min_image_diameter, c.threshold);
        }
        // Equidistribution of symmetric crossings keeps tau close to identity.
        for i in 0..=32 {
            let x = i as f64 / 32.0;
            assert!((res.tau.evaluate(x) - x).abs() < 0.25);
        }
    }

    #[test]
    fn maximizer_reports_infeasible_stage() {
        // A 4-knot map runs out of fresh crossing families quickly when the
        // exponents force huge scale jumps.
        let exc = tent_exc();
        let err = maximizing_time_change(&exc, 2.0, 6, Some(&[0.4, 0.2, 0.1, 0.05, 0.02, 0.01]));
        match err {
            Err(ExdimError::StageInfeasible { stage, completed, .. }) => {
                assert!(stage >= 2);
                assert_eq!(completed, stage - 1);
            }
            other => panic!("expected StageInfeasible, got {other:?}"),
        }
    }

    #[test]
    fn plateau_blend_gives_flat_part_half_measure() {
        // Flat on [0, 0.5], tent on [0.5, 1].
        let m = SampledCircleMap::new(
            vec![0.0, 0.5, 0.75],
            vec![0.0, 0.0, 1.0],
        )
        .unwrap();
        let exc = ExcursionForm::from_normalized(m).unwrap();
        let res = maximizing_time_change(&exc, 2.0, 1, Some(&[0.6])).unwrap();
        // psi(0.5) = 0.5*phi(0.5) + 0.5*1.0, so the image of the plateau is
        // at least 1/2; tau = psi^{-1} maps 0.5+ back accordingly.
        let psi = res.tau.invert();
        assert!(psi.evaluate(0.5) >= 0.5);
        for c in &res.certificates {
            assert!(c.passes());
        }
    }
}
