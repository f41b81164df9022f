use std::collections::BTreeMap;
use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use deloc::expcli::{build_spec, catalog, load_config, run, write_csv, ExperimentSpec};
use deloc::Error;

/// Delocalized-storage experiment runner.
#[derive(Parser)]
#[command(name = "deloc", version, after_help = "Experiments: deloc <experiment> [--param value[,value...]]... [--out file.csv] [--seed S] [--trials T]")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print the experiment catalog with parameter schemas.
    List,
    /// Run an experiment described by a TOML or JSON config.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Overrides the output path of the config.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    #[command(external_subcommand)]
    Experiment(Vec<OsString>),
}

enum Failure {
    Spec(Error),
    Runtime(Error),
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let result = match cli.command {
        Command::List => match print_catalog() {
            Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(Failure::Runtime(Error::Io(e.to_string()))),
            _ => Ok(()),
        },
        Command::Run { config, out } => load_config(&config).map_err(Failure::Spec).and_then(|mut spec| {
            if out.is_some() {
                spec.out = out;
            }
            execute(&spec)
        }),
        Command::Experiment(args) => parse_experiment(&args).map_err(Failure::Spec).and_then(|spec| execute(&spec)),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Spec(e)) => {
            eprintln!("deloc: {e}");
            ExitCode::from(1)
        }
        Err(Failure::Runtime(e)) => {
            eprintln!("deloc: {e}");
            ExitCode::from(2)
        }
    }
}

fn print_catalog() -> std::io::Result<()> {
    let mut out = std::io::stdout().lock();
    for e in catalog() {
        let alias = if e.aliases.is_empty() { String::new() } else { format!(" (alias {})", e.aliases.join(", ")) };
        writeln!(out, "{}{alias}: {}", e.name, e.description)?;
        for p in e.params {
            let default = p.default.map(|d| format!(" = {d}")).unwrap_or_else(|| " (required)".into());
            writeln!(out, "    --{} <{}>{default}  {}", p.name, p.kind.describe(), p.help)?;
        }
        writeln!(out, "    metrics: {}", e.metrics.join(", "))?;
    }
    Ok(())
}

fn parse_experiment(args: &[OsString]) -> deloc::Result<ExperimentSpec> {
    let mut it = args.iter().map(|a| a.to_string_lossy().into_owned());
    let name = it.next().ok_or_else(|| Error::InvalidParameter("missing experiment name".into()))?;
    let mut raw: BTreeMap<String, Vec<String>> = BTreeMap::new();
    let (mut seed, mut trials, mut out) = (0u64, 0u64, None);
    while let Some(flag) = it.next() {
        let (key, inline) = match flag.strip_prefix("--") {
            Some(k) => match k.split_once('=') {
                Some((k, v)) => (k.to_string(), Some(v.to_string())),
                None => (k.to_string(), None),
            },
            None => return Err(Error::InvalidParameter(format!("expected --name, got '{flag}'"))),
        };
        let value = match inline.or_else(|| it.next()) {
            Some(v) => v,
            None => return Err(Error::InvalidParameter(format!("--{key} needs a value"))),
        };
        let number = |v: &str| v.parse::<u64>().map_err(|_| Error::InvalidParameter(format!("--{key}: '{v}' is not a non-negative integer")));
        match key.as_str() {
            "seed" => seed = number(&value)?,
            "trials" => trials = number(&value)?,
            "out" => out = Some(PathBuf::from(value)),
            _ => {
                if raw.contains_key(&key) {
                    return Err(Error::InvalidParameter(format!("--{key} given twice")));
                }
                raw.insert(key, value.split(',').map(|v| v.trim().to_string()).collect());
            }
        }
    }
    build_spec(&name, raw, seed, trials, out)
}

fn execute(spec: &ExperimentSpec) -> Result<(), Failure> {
    let data = run(spec).map_err(Failure::Spec)?;
    let written = match &spec.out {
        Some(path) => std::fs::File::create(path)
            .map_err(|e| Error::Io(format!("{}: {e}", path.display())))
            .and_then(|f| write_csv(&data, std::io::BufWriter::new(f))),
        None => write_csv(&data, std::io::stdout().lock()),
    };
    written.map_err(Failure::Runtime)?;
    if data.failures > 0 {
        eprintln!("deloc: {} of {} grid points failed; see the error column", data.failures, data.rows.len());
    }
    Ok(())
}
