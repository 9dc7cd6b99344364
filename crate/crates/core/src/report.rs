//! Verification suites and the JSON report envelope used by the CLI. Reports
//! are schema-keyed and byte-deterministic: object keys are sorted (the JSON
//! map is ordered) and nothing time- or machine-dependent is embedded.

use serde::Serialize;
use serde_json::{json, Value};

use crate::dimension::{
    graph_dimension_estimate, sausage_dimension_estimate, tree_dimension_estimate,
};
use crate::error::{ExdimError, Result};
use crate::map::SampledCircleMap;
use crate::timechange::{
    apply_time_change, holder_time_change, holder_violations, maximizing_time_change,
    Homeomorphism,
};
use crate::tree::TreeSpace;
use crate::variation::{p_variation, pr_variation};

pub const REPORT_SCHEMA: &str = "exdim-report/1";

/// Names accepted by [`run_suite`].
pub const SUITES: [&str; 6] = [
    "sandwich",
    "scaling",
    "holder",
    "witness",
    "graphbound",
    "treeinvariance",
];

#[derive(Debug, Clone, Serialize)]
pub struct SuiteCheck {
    pub label: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct SuiteReport {
    pub suite: String,
    pub passed: bool,
    pub checks: Vec<SuiteCheck>,
}

impl SuiteReport {
    fn collect(suite: &str, checks: Vec<SuiteCheck>) -> SuiteReport {
        SuiteReport {
            suite: suite.to_string(),
            passed: checks.iter().all(|c| c.passed),
            checks,
        }
    }
}

fn check(label: impl Into<String>, passed: bool, detail: String) -> SuiteCheck {
    SuiteCheck {
        label: label.into(),
        passed,
        detail,
    }
}

/// Run one verification suite against a map at exponent `p` over a scale
/// grid (descending). Unknown names error.
pub fn run_suite(
    suite: &str,
    m: &SampledCircleMap,
    p: f64,
    grid: &[f64],
) -> Result<SuiteReport> {
    match suite {
        "sandwich" => sandwich_suite(m, p, grid),
        "scaling" => scaling_suite(m, p, grid),
        "holder" => holder_suite(m, p),
        "witness" => witness_suite(m, p),
        "graphbound" => graphbound_suite(m),
        "treeinvariance" => treeinvariance_suite(m, p, grid),
        other => Err(ExdimError::UnknownSuite(other.to_string())),
    }
}

fn usable_scales<'a>(grid: &'a [f64], range: f64) -> Result<Vec<f64>> {
    let out: Vec<f64> = grid.iter().copied().filter(|&r| r <= range).collect();
    if out.is_empty() {
        return Err(ExdimError::InsufficientScales { needed: 1, got: 0 });
    }
    Ok(out)
}

/// Both packing-count comparisons: the upcrossing witness set from below,
/// any separated set from above against the quarter-scale variation.
fn sandwich_suite(m: &SampledCircleMap, p: f64, grid: &[f64]) -> Result<SuiteReport> {
    let exc = m.clone().normalize_excursion()?;
    let tree = TreeSpace::new(exc);
    let mm = tree.excursion().map().clone();
    let mut checks = Vec::new();
    for r in usable_scales(grid, mm.range())? {
        let prv = pr_variation(&mm, p, r)?;
        let rp = r.powf(p);
        let ups = tree.upcrossing_separated_set(r, &prv.witness)?;
        let lower_needed = 0.5 * prv.value / rp - 0.5;
        checks.push(check(
            format!("lower r={r:.6e}"),
            ups.len() as f64 >= lower_needed - 1e-9,
            format!("#upcrossings {} >= {lower_needed:.6}", ups.len()),
        ));
        // Consecutive r-separated points bracket an image interval of length
        // >= r/2, which forces at least one exact quarter-scale step in the
        // maximal r/4 walk, so (#S - 1) * (r/4)^p never exceeds V_{r/4}.
        let quarter = pr_variation(&mm, p, 0.25 * r)?.value;
        let sep = tree.greedy_separated_set(r, mm.times());
        let product = (sep.len() as f64 - 1.0) * (0.25 * r).powf(p);
        checks.push(check(
            format!("upper r={r:.6e}"),
            product <= quarter + 1e-9,
            format!(
                "({} - 1) points * (r/4)^p = {product:.6} <= V_(r/4) = {quarter:.6}",
                sep.len()
            ),
        ));
    }
    Ok(SuiteReport::collect("sandwich", checks))
}

/// V_r^s = r^(s-p) V_r^p, checked at s = p + 1/2 and s = p + 1.
fn scaling_suite(m: &SampledCircleMap, p: f64, grid: &[f64]) -> Result<SuiteReport> {
    let mut checks = Vec::new();
    for r in usable_scales(grid, m.range())? {
        let base = pr_variation(m, p, r)?.value;
        for s in [p + 0.5, p + 1.0] {
            let vs = pr_variation(m, s, r)?.value;
            let predicted = r.powf(s - p) * base;
            let err = (vs - predicted).abs();
            let tol = 1e-12 * vs.abs().max(1.0);
            checks.push(check(
                format!("r={r:.6e} s={s}"),
                err <= tol,
                format!("|{vs:.12e} - {predicted:.12e}| = {err:.3e}"),
            ));
        }
    }
    Ok(SuiteReport::collect("scaling", checks))
}

fn holder_suite(m: &SampledCircleMap, p: f64) -> Result<SuiteReport> {
    let exc = m.clone().normalize_excursion()?;
    let v = p_variation(exc.map(), p)?.value;
    let tau = holder_time_change(&exc, p)?;
    let bad = holder_violations(exc.map(), &tau, p, v, 100_000, 0xC0FFEE);
    let checks = vec![check(
        "certificate",
        bad == 0,
        format!(
            "{bad} violations of (2v)^(1/p)|a-b|^(1/p) over 100000 pairs, v = {v:.6}"
        ),
    )];
    Ok(SuiteReport::collect("holder", checks))
}

/// The optimal partition's structural identities: alternation, sum equal to
/// the variation, and every step realized as a tree distance.
fn witness_suite(m: &SampledCircleMap, p: f64) -> Result<SuiteReport> {
    let exc = m.clone().normalize_excursion()?;
    let pv = p_variation(exc.map(), p)?;
    let w = &pv.witness;
    let mut checks = Vec::new();
    checks.push(check(
        "alternating",
        w.is_alternating(),
        format!("{} partition points", w.points().len()),
    ));
    let sum = w.variation_sum(p);
    let err = (sum - pv.value).abs();
    checks.push(check(
        "sum equals variation",
        err <= 1e-12 * pv.value.max(1.0),
        format!("|{sum:.12e} - {:.12e}| = {err:.3e}", pv.value),
    ));
    let tree = TreeSpace::new(exc.clone());
    let pts = w.points();
    let vals = w.values();
    let mut worst = 0.0f64;
    for i in 1..pts.len() {
        let d = tree.tree_distance(pts[i - 1], pts[i]);
        let step = (vals[i] - vals[i - 1]).abs();
        worst = worst.max((d - step).abs());
    }
    checks.push(check(
        "steps are tree distances",
        worst <= 1e-9,
        format!("max |d_f - |step|| = {worst:.3e}"),
    ));
    Ok(SuiteReport::collect("witness", checks))
}

/// Cross-estimator consistency: graph vs tree dimension bound and sausage vs
/// box counting.
fn graphbound_suite(m: &SampledCircleMap) -> Result<SuiteReport> {
    let exc = m.clone().normalize_excursion()?;
    let tree = TreeSpace::new(exc);
    let (tree_est, _) = tree_dimension_estimate(&tree, None)?;
    let mm = tree.excursion().map();
    let (graph_est, graph_series) = graph_dimension_estimate(mm, None)?;
    let grid: Vec<f64> = graph_series.entries.iter().map(|e| e.r).collect();
    let (saus_est, _) = sausage_dimension_estimate(mm, &grid)?;
    let bound = 2.0 - 1.0 / tree_est.slope + 0.1;
    let mut checks = Vec::new();
    checks.push(check(
        "graph <= 2 - 1/tree + 0.1",
        graph_est.slope <= bound + 1e-9,
        format!("graph {:.4} vs bound {bound:.4}", graph_est.slope),
    ));
    checks.push(check(
        "sausage >= box - 0.1",
        saus_est.slope >= graph_est.slope - 0.1 - 1e-9,
        format!("sausage {:.4} vs box {:.4}", saus_est.slope, graph_est.slope),
    ));
    Ok(SuiteReport::collect("graphbound", checks))
}

/// Packing counts of the quotient tree are unchanged by reparametrization:
/// compare greedy counts on matched candidate grids for every constructed
/// time change.
fn treeinvariance_suite(m: &SampledCircleMap, p: f64, grid: &[f64]) -> Result<SuiteReport> {
    let exc = m.clone().normalize_excursion()?;
    let tree_f = TreeSpace::new(exc.clone());
    let mm = tree_f.excursion().map().clone();

    let mut taus: Vec<(&str, Homeomorphism)> = Vec::new();
    match holder_time_change(&exc, p) {
        Ok(t) => taus.push(("holder", t)),
        Err(ExdimError::DivergentVariation { .. }) => {}
        Err(e) => return Err(e),
    }
    match maximizing_time_change(&exc, p, 2, Some(&[0.6, 0.55])) {
        Ok(r) => taus.push(("maximizing", r.tau)),
        Err(ExdimError::StageInfeasible { .. }) => {}
        Err(e) => return Err(e),
    }
    if taus.is_empty() {
        return Err(ExdimError::InvalidParameter(
            "no time change could be constructed for this map".into(),
        ));
    }

    let mut checks = Vec::new();
    for (name, tau) in &taus {
        let g = apply_time_change(&mm, tau)?;
        let exc_g = g.normalize_excursion()?;
        let tree_g = TreeSpace::new(exc_g);
        let cand_g: Vec<f64> = tree_g.excursion().map().times().to_vec();
        let cand_f: Vec<f64> = cand_g.iter().map(|&x| tau.evaluate(x)).collect();
        for r in usable_scales(grid, mm.range())? {
            let nf = tree_f.greedy_separated_set(r, &cand_f).len() as i64;
            let ng = tree_g.greedy_separated_set(r, &cand_g).len() as i64;
            checks.push(check(
                format!("{name} r={r:.6e}"),
                (nf - ng).abs() <= 1,
                format!("counts {nf} vs {ng}"),
            ));
        }
    }
    Ok(SuiteReport::collect("treeinvariance", checks))
}

/// Assemble the deterministic report envelope.
pub fn report_envelope(command: &str, params: Value, body: Value) -> Value {
    json!({
        "schema": REPORT_SCHEMA,
        "command": command,
        "params": params,
        "result": body,
    })
}

/// Serialize a report with sorted keys and a trailing newline.
pub fn render_report(report: &Value) -> String {
    let mut s = serde_json::to_string_pretty(report).expect("report serialization");
    s.push('\n');
    s
}
