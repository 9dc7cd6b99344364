//! CSV input/output. Functions are `t,value` rows over [0, 1); time changes
//! are `x,y` breakpoint rows from (0,0) to (1,1). Floats are written in
//! shortest round-trip form; writes go through a temp file and rename so
//! readers never see partial output.

use std::fs;
use std::io::Write as _;
use std::path::Path;
use std::sync::atomic::{AtomicU64, Ordering};

use crate::error::{ExdimError, Result};
use crate::map::SampledCircleMap;
use crate::timechange::Homeomorphism;

/// Write arbitrary bytes atomically: temp file in the same directory, then
/// rename over the target.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    static COUNTER: AtomicU64 = AtomicU64::new(0);
    let dir = path.parent().filter(|d| !d.as_os_str().is_empty());
    let stamp = format!(
        ".{}.{}.tmp",
        std::process::id(),
        COUNTER.fetch_add(1, Ordering::Relaxed)
    );
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(&stamp);
    let tmp_path = std::path::PathBuf::from(tmp);
    if let Some(d) = dir {
        fs::create_dir_all(d)?;
    }
    let mut f = fs::File::create(&tmp_path)?;
    f.write_all(bytes)?;
    f.sync_all()?;
    drop(f);
    match fs::rename(&tmp_path, path) {
        Ok(()) => Ok(()),
        Err(e) => {
            let _ = fs::remove_file(&tmp_path);
            Err(e.into())
        }
    }
}

fn two_column_csv(header: (&str, &str), rows: impl Iterator<Item = (f64, f64)>) -> String {
    let mut s = String::new();
    s.push_str(header.0);
    s.push(',');
    s.push_str(header.1);
    s.push('\n');
    for (a, b) in rows {
        // `{}` prints the shortest digits that round-trip.
        s.push_str(&format!("{a},{b}\n"));
    }
    s
}

fn read_two_column_csv(path: &Path, ha: &str, hb: &str) -> Result<(Vec<f64>, Vec<f64>)> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_path(path)?;
    {
        let hdr = rdr.headers()?;
        if hdr.len() < 2 || &hdr[0] != ha || &hdr[1] != hb {
            return Err(ExdimError::Csv(format!(
                "expected header {ha},{hb} in {}",
                path.display()
            )));
        }
    }
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        if rec.len() < 2 {
            return Err(ExdimError::Csv(format!(
                "short row {:?} in {}",
                rec,
                path.display()
            )));
        }
        let parse = |s: &str| {
            s.parse::<f64>()
                .map_err(|_| ExdimError::Csv(format!("bad number {s:?} in {}", path.display())))
        };
        xs.push(parse(&rec[0])?);
        ys.push(parse(&rec[1])?);
    }
    Ok((xs, ys))
}

pub fn function_csv_string(m: &SampledCircleMap) -> String {
    two_column_csv(
        ("t", "value"),
        m.times().iter().copied().zip(m.values().iter().copied()),
    )
}

pub fn write_function_csv(path: &Path, m: &SampledCircleMap) -> Result<()> {
    write_atomic(path, function_csv_string(m).as_bytes())
}

pub fn read_function_csv(path: &Path) -> Result<SampledCircleMap> {
    let (ts, vs) = read_two_column_csv(path, "t", "value")?;
    SampledCircleMap::new(ts, vs)
}

pub fn homeomorphism_csv_string(h: &Homeomorphism) -> String {
    two_column_csv(
        ("x", "y"),
        h.breakpoints()
            .iter()
            .copied()
            .zip(h.images().iter().copied()),
    )
}

pub fn write_homeomorphism_csv(path: &Path, h: &Homeomorphism) -> Result<()> {
    write_atomic(path, homeomorphism_csv_string(h).as_bytes())
}

pub fn read_homeomorphism_csv(path: &Path) -> Result<Homeomorphism> {
    let (xs, ys) = read_two_column_csv(path, "x", "y")?;
    Homeomorphism::new(xs, ys)
}
