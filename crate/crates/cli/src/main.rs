//! `coprime-scope`: censuses, limit laws, samplers and experiments from the command line.

mod commands;
mod parse;

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, ValueEnum};
use coprime_scope::rng::DEFAULT_SEED;
use coprime_scope::{Error, Seed};
use serde::Serialize;
use serde_json::Value;

#[derive(Parser, Debug)]
#[command(name = "coprime-scope", version, about = "Local limits of the coprime colouring and gcd labelling of Z^d")]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: commands::Command,
}

#[derive(Args, Debug)]
struct Global {
    /// Worker threads (falls back to COPRIME_SCOPE_THREADS, then all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Root seed: an integer, `0x`-prefixed hex, `default`, or `random`.
    #[arg(long, global = true, default_value = "default")]
    seed: String,
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    format: Format,
    /// Output file (the image for `render`, the record otherwise).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Leave `runtime_ms` out of the record, so that reruns are byte-identical.
    #[arg(long, global = true)]
    omit_runtime: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
}

/// What a command hands back to the driver.
pub struct Output {
    pub params: Value,
    pub result: Value,
    pub error_bounds: Value,
    /// Header and rows for `--format csv`; `None` flattens `result`.
    pub table: Option<(Vec<String>, Vec<Vec<String>>)>,
    /// Image bytes for `--out`.
    pub image: Option<Vec<u8>>,
}

#[derive(Serialize)]
struct RunRecord<'a> {
    command: &'a str,
    params: &'a Value,
    seed: u64,
    result: &'a Value,
    error_bounds: &'a Value,
    #[serde(skip_serializing_if = "Option::is_none")]
    runtime_ms: Option<u64>,
}

/// CLI failures and their exit codes.
pub enum Failure {
    Param(String),
    Budget(String),
    Io(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        if e.is_budget() {
            Failure::Budget(e.to_string())
        } else {
            Failure::Param(e.to_string())
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Io(e.to_string())
    }
}

fn parse_seed(s: &str) -> Result<u64, Failure> {
    match s {
        "default" => Ok(DEFAULT_SEED),
        "random" => {
            use std::hash::{BuildHasher, Hasher};
            let mut h = std::collections::hash_map::RandomState::new().build_hasher();
            h.write_u128(std::time::SystemTime::now().duration_since(std::time::UNIX_EPOCH).map_or(0, |d| d.as_nanos()));
            Ok(h.finish())
        }
        _ => {
            let parsed = match s.strip_prefix("0x") {
                Some(hex) => u64::from_str_radix(hex, 16),
                None => s.parse(),
            };
            parsed.map_err(|_| Failure::Param(format!("bad seed `{s}`")))
        }
    }
}

fn threads(global: &Global) -> Result<Option<usize>, Failure> {
    if let Some(n) = global.threads {
        return Ok(Some(n));
    }
    match std::env::var("COPRIME_SCOPE_THREADS") {
        Ok(v) => v.trim().parse().map(Some).map_err(|_| Failure::Param(format!("bad COPRIME_SCOPE_THREADS `{v}`"))),
        Err(_) => Ok(None),
    }
}

fn flatten(prefix: &str, v: &Value, rows: &mut Vec<Vec<String>>) {
    match v {
        Value::Object(m) => {
            for (k, x) in m {
                let key = if prefix.is_empty() { k.clone() } else { format!("{prefix}.{k}") };
                flatten(&key, x, rows);
            }
        }
        Value::Array(a) => {
            for (i, x) in a.iter().enumerate() {
                flatten(&format!("{prefix}[{i}]"), x, rows);
            }
        }
        Value::String(s) => rows.push(vec![prefix.to_string(), s.clone()]),
        other => rows.push(vec![prefix.to_string(), other.to_string()]),
    }
}

fn write_csv(out: &Output, sink: &mut dyn Write) -> Result<(), Failure> {
    let (header, rows) = match &out.table {
        Some((h, r)) => (h.clone(), r.clone()),
        None => {
            let mut rows = Vec::new();
            flatten("", &out.result, &mut rows);
            (vec!["field".into(), "value".into()], rows)
        }
    };
    let mut w = csv::Writer::from_writer(sink);
    let csv_err = |e: csv::Error| Failure::Io(e.to_string());
    w.write_record(&header).map_err(csv_err)?;
    for r in rows {
        w.write_record(&r).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

fn run(cli: Cli) -> Result<(), Failure> {
    let start = Instant::now();
    let seed = parse_seed(&cli.global.seed)?;
    let pool = {
        let mut b = rayon::ThreadPoolBuilder::new();
        if let Some(n) = threads(&cli.global)? {
            if n == 0 {
                return Err(Failure::Param("--threads must be at least 1".into()));
            }
            b = b.num_threads(n);
        }
        b.build().map_err(|e| Failure::Io(e.to_string()))?
    };
    let name = cli.command.name();
    let out = pool.install(|| commands::execute(&cli.command, Seed(seed)))?;

    let mut image_written = false;
    if let Some(img) = &out.image {
        let path = cli.global.out.as_ref().ok_or_else(|| Failure::Param("`render` needs --out for the image".into()))?;
        std::fs::write(path, img)?;
        image_written = true;
    }
    let runtime_ms = (!cli.global.omit_runtime).then(|| start.elapsed().as_millis() as u64);
    let mut sink: Box<dyn Write> = match (&cli.global.out, image_written) {
        (Some(path), false) => Box::new(std::io::BufWriter::new(std::fs::File::create(path)?)),
        _ => Box::new(std::io::stdout().lock()),
    };
    match cli.global.format {
        Format::Json => {
            let record = RunRecord {
                command: name,
                params: &out.params,
                seed,
                result: &out.result,
                error_bounds: &out.error_bounds,
                runtime_ms,
            };
            let text = serde_json::to_string_pretty(&record).map_err(|e| Failure::Io(e.to_string()))?;
            writeln!(sink, "{text}")?;
        }
        Format::Csv => write_csv(&out, &mut *sink)?,
    }
    sink.flush()?;
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Param(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(2)
        }
        Err(Failure::Budget(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(3)
        }
        Err(Failure::Io(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(1)
        }
    }
}
