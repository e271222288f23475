use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use chanlint::bench::{quadratic_fit, sweep, SweepAxis};
use chanlint::ingest::{
    generate_scenario, load_scenario, map_openvpn, map_ssh, map_strongswan, serialize_scenario, to_document,
    GenerationParams, MapContext, MappedPi,
};
use chanlint::network::entity::parse_ipv4;
use chanlint::policy::coefficients::Coefficients;
use chanlint::report::{emit_report, Format, ReportDocument};
use chanlint::{run_analysis, AnalysisOptions};
use clap::{Parser, Subcommand, ValueEnum};

/// Communication protection policy anomaly analysis.
#[derive(Parser)]
#[command(name = "chanlint", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Analyse a scenario and report its anomalies.
    Analyze {
        scenario: PathBuf,
        /// text, json or dot-bundle
        #[arg(long, default_value = "text")]
        format: String,
        /// Maximum number of paths enumerated per end-point pair.
        #[arg(long)]
        path_cap: Option<usize>,
        /// Write report files here instead of standard output.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Generate a synthetic scenario.
    Generate {
        #[arg(long)]
        pis: usize,
        #[arg(long)]
        conflicts: usize,
        #[arg(long)]
        entities: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Weights of the end-to-end, site-to-site and remote-access schemes.
        #[arg(long, value_delimiter = ',', num_args = 3)]
        mix: Option<Vec<f64>>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Map configuration files to a scenario.
    Map {
        #[arg(value_enum)]
        kind: MapKind,
        /// Configuration files; for openvpn the client file then, optionally, the server file.
        #[arg(required = true)]
        files: Vec<PathBuf>,
        /// Address of the client machine (openvpn, ssh).
        #[arg(long)]
        local_address: Option<String>,
        /// Extra cipher mapping `ENC+INTEG=hi,pi,c`; may be repeated.
        #[arg(long = "cipher")]
        ciphers: Vec<String>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Time generated scenarios over a PI or entity sweep.
    Bench {
        #[arg(long, value_enum)]
        sweep: Axis,
        /// Entity count for a PI sweep, PI count for an entity sweep.
        #[arg(long)]
        fixed: usize,
        #[arg(long, value_delimiter = ',', default_value = "100,250,500")]
        points: Vec<usize>,
        #[arg(long, default_value_t = 3)]
        reps: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Share of conflicting PIs.
        #[arg(long, default_value_t = 0.5)]
        ratio: f64,
        #[arg(long)]
        json: bool,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum MapKind {
    Strongswan,
    Openvpn,
    Ssh,
}

#[derive(Clone, Copy, ValueEnum)]
enum Axis {
    Pis,
    Entities,
}

type Failure = String;

/// Writes to standard output; a closed pipe ends output quietly.
fn emit(text: &str) -> Result<(), Failure> {
    let mut stdout = io::stdout().lock();
    match stdout.write_all(text.as_bytes()) {
        Err(e) if e.kind() != io::ErrorKind::BrokenPipe => Err(format!("standard output: {e}")),
        _ => Ok(()),
    }
}

macro_rules! out {
    ($($t:tt)*) => { emit(&format!($($t)*))? };
}

macro_rules! outln {
    ($($t:tt)*) => { emit(&(format!($($t)*) + "\n"))? };
}

fn read(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))
}

fn write(path: &Path, text: &str) -> Result<(), Failure> {
    fs::write(path, text).map_err(|e| format!("{}: {e}", path.display()))
}

fn analyze(scenario: &Path, format: &str, path_cap: Option<usize>, out: Option<&Path>) -> Result<u8, Failure> {
    let format: Format = format.parse().map_err(|e| format!("{e}"))?;
    let (sc, _) = load_scenario(&read(scenario)?).map_err(|e| format!("{}: {e}", scenario.display()))?;
    let mut opts = AnalysisOptions::default();
    if let Some(cap) = path_cap {
        opts.path_cap = cap;
        opts.cycle_cap = cap;
    }
    let analysis = run_analysis(&sc, &opts).map_err(|e| e.to_string())?;
    let doc = ReportDocument::build(&sc, &analysis).map_err(|e| e.to_string())?;
    let files = emit_report(&doc, &sc, format).map_err(|e| e.to_string())?;
    match out {
        Some(dir) => {
            fs::create_dir_all(dir).map_err(|e| format!("{}: {e}", dir.display()))?;
            for f in &files {
                write(&dir.join(&f.name), &f.contents)?;
            }
        }
        None if format == Format::DotBundle => {
            for f in &files {
                outln!("// {}", f.name);
                out!("{}", f.contents);
            }
        }
        None => {
            for f in &files {
                out!("{}", f.contents);
            }
        }
    }
    Ok(u8::from(!analysis.anomalies.is_empty()))
}

fn generate(p: GenerationParams, out: Option<&Path>) -> Result<u8, Failure> {
    let sc = generate_scenario(&p).map_err(|e| e.to_string())?;
    let text = serialize_scenario(&sc);
    match out {
        Some(path) => write(path, &text)?,
        None => outln!("{text}"),
    }
    Ok(0)
}

fn parse_cipher(spec: &str) -> Result<(String, String, Coefficients), Failure> {
    let bad = || format!("cipher mapping `{spec}` is not ENC+INTEG=hi,pi,c");
    let (algs, c) = spec.split_once('=').ok_or_else(bad)?;
    let (enc, integ) = algs.split_once('+').ok_or_else(bad)?;
    let c: Coefficients = c.parse().map_err(|e| format!("{e}"))?;
    Ok((enc.to_string(), integ.to_string(), c))
}

fn map(kind: MapKind, files: &[PathBuf], local: Option<&str>, ciphers: &[String], out: Option<&Path>) -> Result<u8, Failure> {
    let mut ctx = MapContext::default();
    if let Some(ip) = local {
        ctx.local_address = Some(parse_ipv4(ip).map_err(|e| e.to_string())?);
    }
    for spec in ciphers {
        let (enc, integ, c) = parse_cipher(spec)?;
        ctx.ciphers.add(&enc, &integ, c);
    }
    let mut mapped: Vec<MappedPi> = Vec::new();
    let with_name = |p: &Path, e: chanlint::Error| format!("{}: {e}", p.display());
    match kind {
        MapKind::Strongswan => {
            for f in files {
                mapped.extend(map_strongswan(&read(f)?, &ctx).map_err(|e| with_name(f, e))?);
            }
        }
        MapKind::Ssh => {
            for f in files {
                mapped.extend(map_ssh(&read(f)?, &ctx).map_err(|e| with_name(f, e))?);
            }
        }
        MapKind::Openvpn => {
            if files.len() > 2 {
                return Err("openvpn takes a client file and at most one server file".into());
            }
            let client = read(&files[0])?;
            let server = files.get(1).map(|f| read(f)).transpose()?;
            mapped.extend(map_openvpn(&client, server.as_deref(), &ctx).map_err(|e| with_name(&files[0], e))?);
        }
    }
    let json = to_document(&mapped).to_json();
    match out {
        Some(path) => {
            for p in &mapped {
                outln!("{}: {p}", p.name);
            }
            write(path, &json)?;
        }
        None => outln!("{json}"),
    }
    Ok(0)
}

#[allow(clippy::too_many_arguments)]
fn bench(axis: Axis, fixed: usize, points: &[usize], reps: usize, seed: u64, ratio: f64, json: bool) -> Result<u8, Failure> {
    if !(0.0..=1.0).contains(&ratio) {
        return Err(format!("conflict ratio {ratio} is outside [0, 1]"));
    }
    let axis = match axis {
        Axis::Pis => SweepAxis::Pis,
        Axis::Entities => SweepAxis::Entities,
    };
    let rows = sweep(axis, fixed, points, reps.max(1), seed, ratio, &AnalysisOptions::default())
        .map_err(|e| e.to_string())?;
    if json {
        outln!("{}", serde_json::to_string_pretty(&rows).map_err(|e| e.to_string())?);
        return Ok(0);
    }
    outln!(
        "{:>8} {:>6} {:>11} {:>6} {:>9} {:>16} {:>12}",
        "entities", "pis", "conflicting", "seed", "anomalies", "pre-computation", "analysis"
    );
    for r in &rows {
        outln!(
            "{:>8} {:>6} {:>11} {:>6} {:>9} {:>15.6}s {:>11.6}s",
            r.entities, r.pis, r.conflicting, r.seed, r.anomalies, r.pre_computation_secs, r.analysis_secs
        );
    }
    let xs: Vec<f64> = rows
        .iter()
        .map(|r| match axis {
            SweepAxis::Pis => r.pis as f64,
            SweepAxis::Entities => r.entities as f64,
        })
        .collect();
    let ys: Vec<f64> = rows.iter().map(|r| r.analysis_secs).collect();
    if let Some((c, r2)) = quadratic_fit(&xs, &ys) {
        outln!(
            "analysis ~ {:.3e} + {:.3e} n + {:.3e} n^2 (R^2 = {r2:.3})",
            c[0], c[1], c[2]
        );
    }
    Ok(0)
}

fn run(cli: Cli) -> Result<u8, Failure> {
    match cli.command {
        Command::Analyze {
            scenario,
            format,
            path_cap,
            out,
        } => analyze(&scenario, &format, path_cap, out.as_deref()),
        Command::Generate {
            pis,
            conflicts,
            entities,
            seed,
            mix,
            out,
        } => {
            let mut p = GenerationParams::new(pis, conflicts, entities, seed);
            if let Some(m) = mix {
                p.scheme_mix = [m[0], m[1], m[2]];
            }
            generate(p, out.as_deref())
        }
        Command::Map {
            kind,
            files,
            local_address,
            ciphers,
            out,
        } => map(kind, &files, local_address.as_deref(), &ciphers, out.as_deref()),
        Command::Bench {
            sweep,
            fixed,
            points,
            reps,
            seed,
            ratio,
            json,
        } => bench(sweep, fixed, &points, reps, seed, ratio, json),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(msg) => {
            eprintln!("chanlint: {msg}");
            ExitCode::from(2)
        }
    }
}
