use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use exdim::dimension::{
    dyadic_grid, graph_dimension_estimate, sausage_dimension_estimate, tree_dimension_estimate,
    DimensionEstimate, ScaleSeries,
};
use exdim::generators::{
    gen_brownian_excursion, gen_takagi, gen_zigzag, ExcursionSampleSpec, ZigzagSpec,
};
use exdim::io::{
    function_csv_string, homeomorphism_csv_string, read_function_csv, read_homeomorphism_csv,
    write_atomic,
};
use exdim::report::{render_report, report_envelope, run_suite};
use exdim::scales::parse_scales;
use exdim::timechange::{
    apply_time_change, holder_time_change, holder_violations, maximizing_time_change,
};
use exdim::tree::TreeSpace;
use exdim::variation::{p_variation, variation_index_estimate, variation_sweep};
use exdim::{ExdimError, Result, SampledCircleMap};

/// Variation, tree/graph dimensions, and time changes for continuous circle maps.
#[derive(Parser)]
#[command(name = "exdim", version, max_term_width = 100)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a fixture function as CSV (`t,value`).
    #[command(subcommand)]
    Gen(GenCommand),
    /// Analyze a function file and print a JSON report.
    #[command(subcommand)]
    Analyze(AnalyzeCommand),
    /// Run a verification suite; exits 2 when any check fails.
    Verify(VerifyArgs),
    /// Construct or apply circle time changes.
    #[command(subcommand)]
    Timechange(TimechangeCommand),
}

#[derive(Subcommand)]
enum GenCommand {
    /// Banded zig-zag: band n carries ceil(2^(p n)) teeth of height 2^-n.
    Zigzag {
        /// Variation exponent the bands are tuned to.
        #[arg(long)]
        p: f64,
        /// Number of bands.
        #[arg(long)]
        depth: u32,
        /// Output CSV path (stdout when omitted).
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Normalized lattice excursion (random walk bridge, rotated at its min).
    Brownian {
        /// Number of walk steps (even, >= 2).
        #[arg(long)]
        steps: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Output CSV path (stdout when omitted).
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Takagi-type partial sum sampled on the dyadic grid.
    Takagi {
        /// Geometric weight per level, in (1/2, 1).
        #[arg(long)]
        weight: f64,
        /// Number of summed levels (1..=26).
        #[arg(long)]
        levels: u32,
        /// Output CSV path (stdout when omitted).
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
}

#[derive(Subcommand)]
enum AnalyzeCommand {
    /// Step-variation sweep, total p-variation, and index estimate.
    Variation(VariationArgs),
    /// Packing/box-count dimension estimate of the tree or the graph.
    Dimension(DimensionArgs),
    /// Combined report: variation, tree dimension, graph dimension.
    Report(VariationArgs),
}

#[derive(Args)]
struct VariationArgs {
    /// Function CSV (`t,value`).
    input: PathBuf,
    /// Variation exponent.
    #[arg(long)]
    p: f64,
    /// Scale grid, e.g. `2^-2..2^-9` or `0.25,0.1,0.05`.
    #[arg(long)]
    scales: Option<String>,
    /// Write the report JSON here as well as to stdout.
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Copy, Clone, ValueEnum)]
enum ObjectKind {
    Tree,
    Graph,
}

#[derive(Args)]
struct DimensionArgs {
    /// Function CSV (`t,value`).
    input: PathBuf,
    /// Which associated object to measure.
    #[arg(long, value_enum)]
    object: ObjectKind,
    /// Scale grid, e.g. `2^-3..2^-12`.
    #[arg(long)]
    scales: Option<String>,
    /// Write the report JSON here as well as to stdout.
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct VerifyArgs {
    /// Suite: sandwich | scaling | holder | witness | graphbound | treeinvariance.
    suite: String,
    /// Function CSV (`t,value`).
    input: PathBuf,
    /// Variation exponent.
    #[arg(long)]
    p: f64,
    /// Scale grid for the scale-indexed suites (default `2^-2..2^-9`).
    #[arg(long)]
    scales: Option<String>,
    /// Write the report JSON here as well as to stdout.
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Subcommand)]
enum TimechangeCommand {
    /// Reparametrize so f ∘ τ is (1/p)-Hölder with constant (2 V^p)^(1/p).
    Holder {
        /// Function CSV (`t,value`).
        input: PathBuf,
        /// Variation exponent (V^p must be finite).
        #[arg(long)]
        p: f64,
        /// Where to write the homeomorphism CSV (`x,y`).
        #[arg(short, long)]
        output: PathBuf,
    },
    /// Stagewise stretch lifting the graph dimension of f ∘ τ toward 2 - 1/p.
    Maximize {
        /// Function CSV (`t,value`).
        input: PathBuf,
        /// Variation exponent of the crossing families.
        #[arg(long)]
        p: f64,
        /// Number of stages.
        #[arg(long)]
        stages: usize,
        /// Stage exponents as a comma list, e.g. `0.6,0.55,0.45,0.3`
        /// (default 1/(n+4)).
        #[arg(long)]
        eps: Option<String>,
        /// Where to write the homeomorphism CSV (`x,y`).
        #[arg(short, long)]
        output: PathBuf,
    },
    /// Compose: write f ∘ τ as a function CSV.
    Apply {
        /// Function CSV (`t,value`).
        input: PathBuf,
        /// Homeomorphism CSV (`x,y`).
        #[arg(long)]
        tau: PathBuf,
        /// Where to write the composed function CSV.
        #[arg(short, long)]
        output: PathBuf,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = e.print();
                    ExitCode::SUCCESS
                }
                _ => {
                    let _ = e.print();
                    ExitCode::from(1)
                }
            };
        }
    };
    exdim::parallel::init_thread_pool();
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}

fn run(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Gen(g) => run_gen(g),
        Command::Analyze(a) => run_analyze(a),
        Command::Verify(v) => run_verify(v),
        Command::Timechange(t) => run_timechange(t),
    }
}

fn emit_csv(out: Option<&Path>, body: &str) -> Result<()> {
    match out {
        Some(path) => write_atomic(path, body.as_bytes()),
        None => {
            print!("{body}");
            Ok(())
        }
    }
}

fn emit_report(out: Option<&Path>, report: &Value) -> Result<()> {
    let text = render_report(report);
    print!("{text}");
    if let Some(path) = out {
        write_atomic(path, text.as_bytes())?;
    }
    Ok(())
}

fn run_gen(cmd: GenCommand) -> Result<ExitCode> {
    let (m, out) = match cmd {
        GenCommand::Zigzag { p, depth, output } => {
            (gen_zigzag(&ZigzagSpec::new(p, depth))?, output)
        }
        GenCommand::Brownian {
            steps,
            seed,
            output,
        } => (
            gen_brownian_excursion(&ExcursionSampleSpec { steps, seed })?,
            output,
        ),
        GenCommand::Takagi {
            weight,
            levels,
            output,
        } => (gen_takagi(weight, levels)?, output),
    };
    emit_csv(out.as_deref(), &function_csv_string(&m))?;
    Ok(ExitCode::SUCCESS)
}

/// Parse `--scales` when given, else the dyadic default `2^-lo..2^-hi`.
fn grid_or_default(scales: Option<&str>, lo: u32, hi: u32) -> Result<Vec<f64>> {
    match scales {
        Some(s) => parse_scales(s),
        None => Ok(dyadic_grid(lo, hi)),
    }
}

fn estimate_json(est: &DimensionEstimate, series: &ScaleSeries, m: &SampledCircleMap) -> Value {
    let mut v = json!({
        "slope": est.slope,
        "window": [est.window.0, est.window.1],
        "residual": est.residual,
        "points": est.points,
        "series": serde_json::to_value(series).unwrap(),
    });
    let ts = m.times();
    let spacing = ts
        .windows(2)
        .map(|w| w[1] - w[0])
        .fold(f64::INFINITY, f64::min);
    if est.window.1 < 4.0 * spacing {
        v["warning"] = json!(format!(
            "fit window reaches {:.3e}, close to the knot spacing {:.3e}; \
             slopes there reflect sampling, not the function",
            est.window.1, spacing
        ));
    }
    v
}

fn variation_body(m: &SampledCircleMap, p: f64, grid: &[f64]) -> Result<Value> {
    let total = p_variation(m, p);
    let total_json = match &total {
        Ok(v) => json!({
            "value": v.value,
            "diverging": v.diverging,
            "ladder": v.ladder.iter().map(|l| json!({
                "delta": l.delta,
                "value": l.value,
                "extrema": l.extrema,
            })).collect::<Vec<_>>(),
        }),
        Err(ExdimError::DivergentVariation { p, increment }) => json!({
            "diverging": true,
            "p": p,
            "last_increment": increment,
        }),
        Err(_) => {
            total?;
            unreachable!()
        }
    };
    let sweep = variation_sweep(m, p, grid)?;
    let entries: Vec<Value> = sweep
        .entries
        .iter()
        .map(|e| json!({"r": e.r, "steps": e.steps, "value": e.value}))
        .collect();
    let (upper, lower) = sweep.contents(4);
    let mut body = json!({
        "p": p,
        "total": total_json,
        "sweep": entries,
        "upper_content": upper,
        "lower_content": lower,
    });
    if grid.len() >= 3 {
        let idx = variation_index_estimate(m, grid, 6)?;
        body["index"] = json!({
            "point": idx.point,
            "upper": idx.upper,
            "lower": idx.lower,
            "window": idx.window,
        });
    }
    Ok(body)
}

fn run_analyze(cmd: AnalyzeCommand) -> Result<ExitCode> {
    match cmd {
        AnalyzeCommand::Variation(a) => {
            let m = read_function_csv(&a.input)?;
            let grid = grid_or_default(a.scales.as_deref(), 2, 9)?;
            let body = variation_body(&m, a.p, &grid)?;
            let params = json!({
                "input": a.input.display().to_string(),
                "p": a.p,
                "scales": grid,
            });
            let report = report_envelope("analyze variation", params, body);
            emit_report(a.output.as_deref(), &report)?;
            Ok(ExitCode::SUCCESS)
        }
        AnalyzeCommand::Dimension(a) => {
            let m = read_function_csv(&a.input)?;
            let grid = match a.scales.as_deref() {
                Some(s) => Some(parse_scales(s)?),
                None => None,
            };
            let body = match a.object {
                ObjectKind::Tree => {
                    let tree = TreeSpace::new(m.clone().normalize_excursion()?);
                    let (est, series) = tree_dimension_estimate(&tree, grid.as_deref())?;
                    json!({"object": "tree", "packing": estimate_json(&est, &series, &m)})
                }
                ObjectKind::Graph => {
                    let (est, series) = graph_dimension_estimate(&m, grid.as_deref())?;
                    let sausage_grid: Vec<f64> =
                        series.entries.iter().map(|e| e.r).collect();
                    let (sest, sseries) = sausage_dimension_estimate(&m, &sausage_grid)?;
                    json!({
                        "object": "graph",
                        "box": estimate_json(&est, &series, &m),
                        "sausage": estimate_json(&sest, &sseries, &m),
                    })
                }
            };
            let params = json!({
                "input": a.input.display().to_string(),
                "object": match a.object { ObjectKind::Tree => "tree", ObjectKind::Graph => "graph" },
                "scales": grid,
            });
            let report = report_envelope("analyze dimension", params, body);
            emit_report(a.output.as_deref(), &report)?;
            Ok(ExitCode::SUCCESS)
        }
        AnalyzeCommand::Report(a) => {
            let m = read_function_csv(&a.input)?;
            let grid = grid_or_default(a.scales.as_deref(), 2, 9)?;
            let variation = variation_body(&m, a.p, &grid)?;
            let tree = TreeSpace::new(m.clone().normalize_excursion()?);
            let (test, tseries) = tree_dimension_estimate(&tree, None)?;
            let (gest, gseries) = graph_dimension_estimate(&m, None)?;
            let body = json!({
                "variation": variation,
                "tree": estimate_json(&test, &tseries, &m),
                "graph": estimate_json(&gest, &gseries, &m),
            });
            let params = json!({
                "input": a.input.display().to_string(),
                "p": a.p,
                "scales": grid,
            });
            let report = report_envelope("analyze report", params, body);
            emit_report(a.output.as_deref(), &report)?;
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn run_verify(v: VerifyArgs) -> Result<ExitCode> {
    let m = read_function_csv(&v.input)?;
    let grid = grid_or_default(v.scales.as_deref(), 2, 9)?;
    let suite = run_suite(&v.suite, &m, v.p, &grid)?;
    let params = json!({
        "input": v.input.display().to_string(),
        "suite": v.suite,
        "p": v.p,
        "scales": grid,
    });
    let passed = suite.passed;
    let report = report_envelope("verify", params, serde_json::to_value(&suite).unwrap());
    emit_report(v.output.as_deref(), &report)?;
    if passed {
        Ok(ExitCode::SUCCESS)
    } else {
        for c in suite.checks.iter().filter(|c| !c.passed) {
            eprintln!("FAILED {}: {}", c.label, c.detail);
        }
        Ok(ExitCode::from(2))
    }
}

fn run_timechange(cmd: TimechangeCommand) -> Result<ExitCode> {
    match cmd {
        TimechangeCommand::Holder { input, p, output } => {
            let m = read_function_csv(&input)?;
            let exc = m.normalize_excursion()?;
            let tau = holder_time_change(&exc, p)?;
            let v = p_variation(exc.map(), p)?.value;
            let violations = holder_violations(exc.map(), &tau, p, v, 100_000, 0xC0FFEE);
            write_atomic(&output, homeomorphism_csv_string(&tau).as_bytes())?;
            let params = json!({
                "input": input.display().to_string(),
                "p": p,
                "output": output.display().to_string(),
            });
            let body = json!({
                "p_variation": v,
                "holder_constant": (2.0 * v).powf(1.0 / p),
                "nodes": tau.n_nodes(),
                "sampled_pairs": 100_000,
                "violations": violations,
                "rotation_offset": exc.rotation_offset(),
            });
            let report = report_envelope("timechange holder", params, body);
            emit_report(None, &report)?;
            Ok(ExitCode::SUCCESS)
        }
        TimechangeCommand::Maximize {
            input,
            p,
            stages,
            eps,
            output,
        } => {
            let m = read_function_csv(&input)?;
            let exc = m.normalize_excursion()?;
            let eps_v = match eps.as_deref() {
                Some(s) => Some(parse_eps_list(s)?),
                None => None,
            };
            let res = maximizing_time_change(&exc, p, stages, eps_v.as_deref())?;
            write_atomic(&output, homeomorphism_csv_string(&res.tau).as_bytes())?;
            let params = json!({
                "input": input.display().to_string(),
                "p": p,
                "stages": stages,
                "eps": eps_v,
                "output": output.display().to_string(),
            });
            let all_pass = res.certificates.iter().all(|c| c.passes());
            let body = json!({
                "nodes": res.tau.n_nodes(),
                "certificates": serde_json::to_value(&res.certificates).unwrap(),
                "certificates_pass": all_pass,
                "rotation_offset": exc.rotation_offset(),
            });
            let report = report_envelope("timechange maximize", params, body);
            emit_report(None, &report)?;
            Ok(ExitCode::SUCCESS)
        }
        TimechangeCommand::Apply { input, tau, output } => {
            let m = read_function_csv(&input)?;
            let h = read_homeomorphism_csv(&tau)?;
            let g = apply_time_change(&m, &h)?;
            write_atomic(&output, function_csv_string(&g).as_bytes())?;
            let params = json!({
                "input": input.display().to_string(),
                "tau": tau.display().to_string(),
                "output": output.display().to_string(),
            });
            let body = json!({
                "input_knots": m.n_knots(),
                "tau_nodes": h.n_nodes(),
                "output_knots": g.n_knots(),
            });
            let report = report_envelope("timechange apply", params, body);
            emit_report(None, &report)?;
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn parse_eps_list(s: &str) -> Result<Vec<f64>> {
    s.split(',')
        .map(|t| {
            t.trim()
                .parse::<f64>()
                .map_err(|_| ExdimError::InvalidParameter(format!("bad eps entry {t:?}")))
        })
        .collect()
}
