//! Scale-grid parsing: dyadic ranges like `2^-2..2^-9`, single powers, and
//! comma lists of values (decimal or `2^-k`). Grids come back descending and
//! deduplicated.

use crate::error::{ExdimError, Result};

/// Parse a scale-grid expression.
///
/// Accepted forms:
/// - `2^-a..2^-b` — dyadic scales `2^-a` down to `2^-b` (a <= b);
/// - `2^-k` — a single dyadic scale;
/// - comma list mixing decimals and `2^-k` items, e.g. `0.5,2^-3,0.01`.
pub fn parse_scales(s: &str) -> Result<Vec<f64>> {
    let s = s.trim();
    if s.is_empty() {
        return Err(ExdimError::InvalidParameter("empty scale grid".into()));
    }
    let mut out: Vec<f64> = Vec::new();
    if let Some((lo, hi)) = s.split_once("..") {
        let a = parse_dyadic_exp(lo)?;
        let b = parse_dyadic_exp(hi)?;
        if a > b {
            return Err(ExdimError::InvalidParameter(format!(
                "dyadic range {s}: left exponent must not exceed right"
            )));
        }
        for k in a..=b {
            out.push(0.5f64.powi(k));
        }
    } else {
        for item in s.split(',') {
            out.push(parse_scale_item(item)?);
        }
    }
    out.sort_by(|x, y| y.partial_cmp(x).unwrap());
    out.dedup();
    for &r in &out {
        if !(r.is_finite() && r > 0.0) {
            return Err(ExdimError::InvalidScale { r });
        }
    }
    Ok(out)
}

fn parse_scale_item(item: &str) -> Result<f64> {
    let item = item.trim();
    if item.starts_with("2^") {
        Ok(0.5f64.powi(-parse_exponent(item)?))
    } else {
        item.parse::<f64>().map_err(|_| {
            ExdimError::InvalidParameter(format!("bad scale item {item:?}"))
        })
    }
}

/// `2^-k` → k (the positive dyadic depth).
fn parse_dyadic_exp(s: &str) -> Result<i32> {
    let s = s.trim();
    if !s.starts_with("2^") {
        return Err(ExdimError::InvalidParameter(format!(
            "expected 2^-k, got {s:?}"
        )));
    }
    let e = parse_exponent(s)?;
    if e >= 0 {
        return Err(ExdimError::InvalidParameter(format!(
            "scale {s:?} is not below 1"
        )));
    }
    Ok(-e)
}

fn parse_exponent(s: &str) -> Result<i32> {
    s[2..]
        .parse::<i32>()
        .map_err(|_| ExdimError::InvalidParameter(format!("bad exponent in {s:?}")))
}
