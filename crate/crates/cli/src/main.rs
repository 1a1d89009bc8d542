//! `selfsim` command line tool.
//!
//! Exit codes: 0 holds / pass, 1 fails, 2 invalid input or error,
//! 3 undetermined.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;

use selfsim::classify::{classify, registry_entry, registry_json, registry_match, ClassVerdict};
use selfsim::cograph::{
    branch_scan, check_graph_separation, check_open_set_condition, check_strong_separation,
    Check, Verdict,
};
use selfsim::ifs::{IfsSystem, Point, SampleGrid};
use selfsim::region::Region;
use selfsim::verify::{bimodule_suite, registry_suite, transfer_suite, Counts};

const DEFAULT_DEPTH: usize = 10;
const DEFAULT_TOL: f64 = 1e-9;
const DEFAULT_RENDER_DEPTH: usize = 8;
const DEFAULT_WIDTH: usize = 512;
const DEFAULT_SEED: u64 = 42;
const BURN_IN: usize = 100;
/// Random samples used by the sampled parts of the open-set check.
const OSC_SAMPLES: usize = 200;

#[derive(Parser, Debug)]
#[command(name = "selfsim", version, about = "Self-similar sets and their cograph bimodules")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Render attractor points as CSV or a binary PPM raster.
    Render {
        /// Registry name or path to an IFS JSON file.
        input: String,
        /// Coding-point depth; every word of this length gives one point.
        #[arg(long, conflicts_with = "iterations")]
        depth: Option<usize>,
        /// Chaos-game iterations instead of coding points.
        #[arg(long)]
        iterations: Option<usize>,
        #[arg(long, value_enum, default_value_t = Format::Csv)]
        format: Format,
        /// Raster width in pixels (PPM only).
        #[arg(long, default_value_t = DEFAULT_WIDTH)]
        width: usize,
        #[arg(long, default_value_t = DEFAULT_SEED)]
        seed: u64,
        #[arg(long, short)]
        out: Option<PathBuf>,
    },
    /// Detect the branch set; exit 0 if empty, 1 otherwise.
    Branch {
        input: String,
        #[arg(long, default_value_t = DEFAULT_DEPTH)]
        depth: usize,
        #[arg(long, default_value_t = DEFAULT_TOL)]
        tol: f64,
        #[arg(long, short)]
        out: Option<PathBuf>,
    },
    /// Check one separation condition.
    Check {
        input: String,
        #[arg(long, value_enum)]
        condition: Condition,
        /// Region JSON for the open set condition. Registry systems fall
        /// back to their stored witness.
        #[arg(long)]
        witness: Option<PathBuf>,
        #[arg(long, default_value_t = DEFAULT_DEPTH)]
        depth: usize,
        #[arg(long, default_value_t = DEFAULT_TOL)]
        tol: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, short)]
        out: Option<PathBuf>,
    },
    /// Classify the Cuntz-Pimsner algebra as far as decidable.
    Classify {
        input: String,
        #[arg(long)]
        witness: Option<PathBuf>,
        #[arg(long, default_value_t = DEFAULT_DEPTH)]
        depth: usize,
        #[arg(long, default_value_t = DEFAULT_TOL)]
        tol: f64,
        #[arg(long, short)]
        out: Option<PathBuf>,
    },
    /// Run a property suite; exit 0 iff every property passes.
    Verify {
        #[arg(value_enum)]
        suite: Suite,
        #[arg(long, default_value_t = DEFAULT_SEED)]
        seed: u64,
        #[arg(long, short)]
        out: Option<PathBuf>,
    },
    /// Write the built-in example registry as JSON.
    Registry {
        #[arg(long, short)]
        out: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, Debug, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum Format {
    Csv,
    Ppm,
}

#[derive(Clone, Copy, Debug, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum Condition {
    Strong,
    Graph,
    Osc,
}

#[derive(Clone, Copy, Debug, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum Suite {
    Bimodule,
    Transfer,
    Registry,
}

/// Settings of one run, embedded in every report.
#[derive(Debug, Default, Serialize)]
struct CommandConfig {
    subcommand: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    input: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    system: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    depth: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    tol: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    condition: Option<Condition>,
    #[serde(skip_serializing_if = "Option::is_none")]
    witness: Option<String>,
}

#[derive(Serialize)]
struct Envelope<T: Serialize> {
    schema_version: u32,
    version: &'static str,
    config: CommandConfig,
    report: T,
}

#[derive(Debug, thiserror::Error)]
enum CliError {
    #[error("{0}")]
    Invalid(String),
    #[error(transparent)]
    Core(#[from] selfsim::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

type Result<T> = std::result::Result<T, CliError>;

struct Input {
    system: IfsSystem,
    witness: Option<Region>,
}

/// Registry names win over paths; files matching a registry system pick up
/// its stored witness.
fn load(input: &str) -> Result<Input> {
    if let Some(e) = registry_entry(input) {
        return Ok(Input {
            system: e.system,
            witness: e.witness,
        });
    }
    let text = fs::read_to_string(input)
        .map_err(|e| CliError::Invalid(format!("cannot read {input}: {e}")))?;
    let system = IfsSystem::from_json(&text)?;
    let witness = registry_match(&system).and_then(|e| e.witness);
    Ok(Input { system, witness })
}

fn load_region(path: &Path) -> Result<Region> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::Invalid(format!("cannot read {}: {e}", path.display())))?;
    Ok(Region::from_json(&text)?)
}

fn emit(out: Option<&Path>, bytes: &[u8]) -> Result<()> {
    match out {
        Some(p) => fs::write(p, bytes)?,
        None => std::io::stdout().lock().write_all(bytes)?,
    }
    Ok(())
}

fn emit_json<T: Serialize>(out: Option<&Path>, config: CommandConfig, report: T) -> Result<()> {
    let env = Envelope {
        schema_version: selfsim::SCHEMA_VERSION,
        version: selfsim::VERSION,
        config,
        report,
    };
    let mut text = serde_json::to_string_pretty(&env)?;
    text.push('\n');
    emit(out, text.as_bytes())
}

/// `v` with 6 significant digits, plain notation for moderate magnitudes.
fn sig6(v: f64) -> String {
    if v == 0.0 {
        return "0".into();
    }
    let e = v.abs().log10().floor() as i32;
    if (-4..6).contains(&e) {
        let decimals = (5 - e).max(0) as usize;
        let s = format!("{v:.decimals$}");
        let s = if s.contains('.') {
            s.trim_end_matches('0').trim_end_matches('.').to_string()
        } else {
            s
        };
        if s == "-0" {
            "0".into()
        } else {
            s
        }
    } else {
        format!("{v:.5e}")
    }
}

fn render_csv(points: &[Point]) -> Vec<u8> {
    let mut out = String::new();
    for p in points {
        let row: Vec<String> = p.iter().map(|&v| sig6(v)).collect();
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out.into_bytes()
}

/// Binary P6 raster of the hull's bounding square. Column `c` covers
/// `x_1 ∈ [x0 + c·s, x0 + (c+1)·s)` with `x0 = center_1 - r` and
/// `s = 2r / width`; row 0 is the top edge `x_2 = center_2 + r`. One-dimensional
/// systems give a single row. Set pixels are black on white.
fn render_ppm(system: &IfsSystem, points: &[Point], width: usize) -> Result<Vec<u8>> {
    let d = system.dimension();
    if d > 2 {
        return Err(CliError::Invalid(format!("cannot rasterize dimension {d}")));
    }
    if width == 0 {
        return Err(CliError::Invalid("width must be positive".into()));
    }
    let hull = system.hull();
    let height = if d == 2 { width } else { 1 };
    let scale = width as f64 / (2.0 * hull.radius);
    let mut pixels = vec![255u8; width * height * 3];
    let clamp = |t: f64| (t.floor().max(0.0) as usize).min(width - 1);
    for p in points {
        let col = clamp((p[0] - hull.center[0] + hull.radius) * scale);
        let row = if d == 2 {
            clamp((hull.center[1] + hull.radius - p[1]) * scale)
        } else {
            0
        };
        let k = 3 * (row * width + col);
        pixels[k..k + 3].fill(0);
    }
    let mut out = format!("P6\n{width} {height}\n255\n").into_bytes();
    out.extend(pixels);
    Ok(out)
}

fn with_witness(
    config: &mut CommandConfig,
    path: Option<&Path>,
    fallback: Option<Region>,
) -> Result<Option<Region>> {
    match path {
        Some(p) => {
            config.witness = Some(p.display().to_string());
            Ok(Some(load_region(p)?))
        }
        None => {
            if fallback.is_some() {
                config.witness = Some("registry".into());
            }
            Ok(fallback)
        }
    }
}

fn run(cli: Cli) -> Result<u8> {
    match cli.command {
        Command::Render {
            input,
            depth,
            iterations,
            format,
            width,
            seed,
            out,
        } => {
            let sys = load(&input)?.system;
            let points = match iterations {
                Some(it) => sys.chaos_game(seed, it + BURN_IN, BURN_IN)?,
                None => {
                    let m = depth.unwrap_or(DEFAULT_RENDER_DEPTH);
                    SampleGrid::new(Arc::new(sys.clone()), m)?.points().to_vec()
                }
            };
            let bytes = match format {
                Format::Csv => render_csv(&points),
                Format::Ppm => render_ppm(&sys, &points, width)?,
            };
            emit(out.as_deref(), &bytes)?;
            Ok(0)
        }
        Command::Branch {
            input,
            depth,
            tol,
            out,
        } => {
            let sys = load(&input)?.system;
            let report = branch_scan(&sys, depth, tol)?;
            let code = if report.is_empty() { 0 } else { 1 };
            let config = CommandConfig {
                subcommand: "branch",
                system: sys.name().map(str::to_string),
                input: Some(input),
                depth: Some(depth),
                tol: Some(tol),
                ..Default::default()
            };
            emit_json(out.as_deref(), config, report)?;
            Ok(code)
        }
        Command::Check {
            input,
            condition,
            witness,
            depth,
            tol,
            seed,
            out,
        } => {
            let loaded = load(&input)?;
            let sys = loaded.system;
            let mut config = CommandConfig {
                subcommand: "check",
                system: sys.name().map(str::to_string),
                input: Some(input),
                depth: Some(depth),
                tol: Some(tol),
                condition: Some(condition),
                ..Default::default()
            };
            let check = match condition {
                Condition::Strong => check_strong_separation(&sys, depth, tol)?,
                Condition::Graph => check_graph_separation(&sys, depth, tol)?,
                Condition::Osc => {
                    config.seed = Some(seed);
                    match with_witness(&mut config, witness.as_deref(), loaded.witness)? {
                        Some(v) => check_open_set_condition(&sys, &v, depth, OSC_SAMPLES, seed)?,
                        None => Check {
                            verdict: Verdict::Undetermined,
                            depth,
                            tol,
                            witness: None,
                            gap: None,
                            detail: "no witness region supplied; no search performed".into(),
                        },
                    }
                }
            };
            let code = check.verdict.exit_code() as u8;
            emit_json(out.as_deref(), config, check)?;
            Ok(code)
        }
        Command::Classify {
            input,
            witness,
            depth,
            tol,
            out,
        } => {
            let loaded = load(&input)?;
            let sys = loaded.system;
            let mut config = CommandConfig {
                subcommand: "classify",
                system: sys.name().map(str::to_string),
                input: Some(input.clone()),
                depth: Some(depth),
                tol: Some(tol),
                ..Default::default()
            };
            let region = with_witness(&mut config, witness.as_deref(), loaded.witness)?;
            let mut report = classify(&sys, depth, tol, region.as_ref())?;
            if let Some(e) = registry_match(&sys) {
                report.metadata = e.metadata.iter().map(|s| s.to_string()).collect();
            }
            let code = match report.verdict {
                ClassVerdict::Undetermined { .. } => 3,
                _ => 0,
            };
            emit_json(out.as_deref(), config, report)?;
            Ok(code)
        }
        Command::Verify { suite, seed, out } => {
            let report = match suite {
                Suite::Bimodule => bimodule_suite(seed, Counts::default())?,
                Suite::Transfer => transfer_suite(seed, Counts::default())?,
                Suite::Registry => registry_suite(seed)?,
            };
            let code = if report.pass { 0 } else { 1 };
            let config = CommandConfig {
                subcommand: "verify",
                depth: Some(report.depth),
                tol: Some(report.tol),
                seed: Some(seed),
                ..Default::default()
            };
            emit_json(out.as_deref(), config, report)?;
            Ok(code)
        }
        Command::Registry { out } => {
            let mut text = serde_json::to_string_pretty(&registry_json())?;
            text.push('\n');
            emit(out.as_deref(), text.as_bytes())?;
            Ok(0)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
