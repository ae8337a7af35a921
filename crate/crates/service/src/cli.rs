use std::io::Write;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use geosieve::geotiff::encode_mask;
use geosieve::morphology::MetricKind;
use geosieve::scenario::{generate_synthetic, load_scenario, write_scenario, SyntheticParams, DEFAULT_TARGET};

use crate::api::{router, AppState};
use crate::query::{self, EvalRequest, QueryError};

pub const EXIT_OK: i32 = 0;
pub const EXIT_PARSE: i32 = 2;
pub const EXIT_SCENARIO: i32 = 3;
pub const DEFAULT_PORT: u16 = 8787;

#[derive(Debug, Parser)]
#[command(
    name = "geosieve",
    version,
    about = "Filter-expression evaluation over raster scenarios"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Evaluate an expression and write a mask and an area report.
    Eval(EvalArgs),
    /// Serve the HTTP API.
    Serve(ServeArgs),
    /// Write a synthetic scenario with known ground truth.
    Synth(SynthArgs),
}

fn parse_metric(s: &str) -> Result<MetricKind, String> {
    match s {
        "euclidean" => Ok(MetricKind::Euclidean),
        "chebyshev" => Ok(MetricKind::Chebyshev),
        _ => Err(format!("unknown metric `{s}` (expected euclidean or chebyshev)")),
    }
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Scenario manifest (JSON).
    #[arg(long)]
    pub scenario: PathBuf,
    /// Expression text, or `@path` to read it from a file. A JSON file with
    /// an `expr` field also works.
    #[arg(long)]
    pub expr: String,
    #[arg(long)]
    pub clip_polygon: Option<String>,
    /// Camera id whose obfuscation disk clips the result.
    #[arg(long)]
    pub clip_disk: Option<String>,
    /// Mask GeoTIFF output (uint8 0/1).
    #[arg(long)]
    pub out_mask: Option<PathBuf>,
    /// Report output; defaults to stdout.
    #[arg(long)]
    pub out_report: Option<PathBuf>,
    #[arg(long, value_parser = parse_metric)]
    pub metric: Option<MetricKind>,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    /// Scenario to load at startup. Without one, POST /scenario first.
    #[arg(long)]
    pub scenario: Option<PathBuf>,
    #[arg(long, default_value = "127.0.0.1")]
    pub host: String,
    /// Listen port; falls back to $PORT, then 8787.
    #[arg(long)]
    pub port: Option<u16>,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Raster width and height in pixels.
    #[arg(long, default_value_t = 256)]
    pub size: usize,
    #[arg(long, default_value_t = 1000.0)]
    pub radius: f64,
    #[arg(long, default_value = DEFAULT_TARGET)]
    pub target: String,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
}

pub fn run(cli: Cli, out: &mut dyn Write, err: &mut dyn Write) -> i32 {
    match cli.command {
        Command::Eval(a) => run_eval(&a, out, err),
        Command::Serve(a) => run_serve(&a, err),
        Command::Synth(a) => run_synth(&a, out, err),
    }
}

fn read_expr(arg: &str) -> std::io::Result<String> {
    let Some(path) = arg.strip_prefix('@') else {
        return Ok(arg.to_string());
    };
    let text = std::fs::read_to_string(path)?;
    if text.trim_start().starts_with('{') {
        if let Ok(serde_json::Value::Object(obj)) = serde_json::from_str::<serde_json::Value>(&text) {
            if let Some(serde_json::Value::String(e)) = obj.get("expr") {
                return Ok(e.clone());
            }
        }
    }
    Ok(text)
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<(), String> {
    std::fs::write(path, bytes).map_err(|e| format!("{}: {e}", path.display()))
}

pub fn run_eval(a: &EvalArgs, out: &mut dyn Write, err: &mut dyn Write) -> i32 {
    let fail = |err: &mut dyn Write, code: i32, msg: String| {
        let _ = writeln!(err, "error: {msg}");
        code
    };
    let expr = match read_expr(&a.expr) {
        Ok(e) => e,
        Err(e) => return fail(err, EXIT_SCENARIO, format!("{}: {e}", a.expr)),
    };
    let scenario = match load_scenario(&a.scenario) {
        Ok(s) => s,
        Err(e) => return fail(err, EXIT_SCENARIO, e.to_string()),
    };
    let req = EvalRequest {
        expr,
        metric: a.metric,
        clip_polygon: a.clip_polygon.clone(),
        clip_disk: a.clip_disk.clone(),
    };
    let result = query::prepare(&scenario, &req).and_then(|p| {
        let mask = query::evaluate(&scenario, &p)?;
        let report = query::report(&scenario, &mask)?;
        Ok((mask, report))
    });
    let (mask, report) = match result {
        Ok(r) => r,
        Err(e @ (QueryError::Parse(_) | QueryError::TooLarge(_))) => return fail(err, EXIT_PARSE, e.to_string()),
        Err(e) => return fail(err, EXIT_SCENARIO, e.to_string()),
    };
    if let Some(path) = &a.out_mask {
        let bytes = match encode_mask(&mask, scenario.stack.geotransform()) {
            Ok(b) => b,
            Err(e) => return fail(err, EXIT_SCENARIO, e.to_string()),
        };
        if let Err(e) = write_file(path, &bytes) {
            return fail(err, EXIT_SCENARIO, e);
        }
    }
    let json = serde_json::to_string_pretty(&report).expect("report serializes") + "\n";
    match &a.out_report {
        Some(path) => {
            if let Err(e) = write_file(path, json.as_bytes()) {
                return fail(err, EXIT_SCENARIO, e);
            }
        }
        None => {
            let _ = out.write_all(json.as_bytes());
        }
    }
    EXIT_OK
}

fn run_serve(a: &ServeArgs, err: &mut dyn Write) -> i32 {
    let scenario = match a.scenario.as_deref().map(load_scenario).transpose() {
        Ok(s) => s,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            return EXIT_SCENARIO;
        }
    };
    let port = a
        .port
        .or_else(|| std::env::var("PORT").ok().and_then(|p| p.parse().ok()))
        .unwrap_or(DEFAULT_PORT);
    let addr: SocketAddr = match format!("{}:{port}", a.host).parse() {
        Ok(addr) => addr,
        Err(e) => {
            let _ = writeln!(err, "error: bad listen address: {e}");
            return EXIT_SCENARIO;
        }
    };
    let rt = tokio::runtime::Runtime::new().expect("tokio runtime");
    let res = rt.block_on(async move {
        let listener = tokio::net::TcpListener::bind(addr).await?;
        eprintln!("listening on http://{}", listener.local_addr()?);
        axum::serve(listener, router(AppState::new(scenario))).await
    });
    match res {
        Ok(()) => EXIT_OK,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            EXIT_SCENARIO
        }
    }
}

fn run_synth(a: &SynthArgs, out: &mut dyn Write, err: &mut dyn Write) -> i32 {
    let params = SyntheticParams {
        obfuscation_radius: a.radius,
        target_expr: a.target.clone(),
        ..Default::default()
    };
    let res = generate_synthetic(a.seed, a.size, &params).and_then(|(s, truth)| {
        let manifest = write_scenario(&a.out, &s)?;
        let truth_path = a.out.join("truth.json");
        let text = serde_json::to_string_pretty(&truth).expect("truth serializes");
        std::fs::write(&truth_path, text).map_err(|e| geosieve::Error::io(&truth_path, e))?;
        Ok(manifest)
    });
    match res {
        Ok(manifest) => {
            let _ = writeln!(out, "{}", manifest.display());
            EXIT_OK
        }
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            EXIT_SCENARIO
        }
    }
}
