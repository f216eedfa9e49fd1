//! `qfupdate` command-line front end.
//!
//! Exit status: 0 on success, 2 when `check` finds an acausal protocol,
//! 1 on any error. `QFIELD_WORKDIR` sets the directory relative paths
//! resolve against and `QFIELD_THREADS` caps the worker pool.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Parser, Subcommand};
use qfupdate_core::classical::{move_support, scatter_first_order, InteractionSpec, Lattice, WindowSpec};
use qfupdate_core::protocol::{build_table, check_protocol, parse_sweep_arg, run_protocol, FieldConfig, Prepared};
use qfupdate_core::sampler::{estimate_moments, sample_measurements, Convention, MeasurementPlan};
use qfupdate_core::smearing::BumpKind;
use qfupdate_core::{
    BumpSpec, GaussianState, LabelId, Point, ProtocolSpec, Rect, SampledFunction, SmearingFunction, Verdict,
};

/// Room left around supports and slabs on lattice windows.
const LATTICE_MARGIN: f64 = 0.5;

#[derive(Parser)]
#[command(name = "qfupdate", version, about = "Update maps for a smeared scalar field in 1+1 dimensions")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print the smeared commutator function Δ(f, g).
    Delta {
        /// Function name in `--spec`, sampled-function file, or bump such as `cosine@1.5,2.2,0.4`.
        f: String,
        g: String,
        /// Protocol file supplying function definitions and the field config.
        #[arg(long)]
        spec: Option<PathBuf>,
        /// Field mass when no spec is given.
        #[arg(long, default_value_t = 1.0)]
        mass: f64,
    },
    /// Tabulate the readout expectation over a λ sweep as CSV.
    Run {
        spec: PathBuf,
        /// `start:stop:step`; overrides the readout's sweep.
        #[arg(long, allow_hyphen_values = true)]
        sweep: Option<String>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Audit every operation for causality.
    Check {
        spec: PathBuf,
        /// Machine-readable output.
        #[arg(long)]
        json: bool,
    },
    /// Draw Gaussian measurement outcomes of the readout functions in the vacuum.
    Sample {
        spec: PathBuf,
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Replace a function by one with the same commutators, supported in a time slab.
    MoveSupport {
        spec: PathBuf,
        #[arg(long)]
        function: String,
        /// `t1:t2`
        #[arg(long, allow_hyphen_values = true)]
        slab: String,
        /// Lattice spacing; defaults to the spec's `lattice_dx`.
        #[arg(long)]
        dx: Option<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// First-order out-region function for the interaction `κχφ²`.
    Scatter {
        spec: PathBuf,
        #[arg(long)]
        function: String,
        /// Bump function playing the switching profile `χ`.
        #[arg(long)]
        chi: String,
        #[arg(long, allow_hyphen_values = true)]
        kappa: f64,
        #[arg(long, allow_hyphen_values = true)]
        slab: String,
        #[arg(long)]
        dx: Option<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match setup().and_then(|()| execute(cli.command)) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

fn setup() -> Result<()> {
    if let Ok(dir) = std::env::var("QFIELD_WORKDIR") {
        std::env::set_current_dir(&dir).with_context(|| format!("QFIELD_WORKDIR={dir}"))?;
    }
    if let Ok(n) = std::env::var("QFIELD_THREADS") {
        let n: usize = n.parse().map_err(|_| anyhow!("QFIELD_THREADS must be a positive integer, got '{n}'"))?;
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    Ok(())
}

fn execute(command: Command) -> Result<ExitCode> {
    match command {
        Command::Delta { f, g, spec, mass } => {
            let (field, funcs) = match spec {
                Some(path) => {
                    let s = load(&path)?;
                    let all = s.load_functions()?;
                    let pick = |n: &str| {
                        all.iter().find(|(k, _)| k == n).cloned().ok_or_else(|| anyhow!("no function '{n}' in {}", path.display()))
                    };
                    (s.field, vec![pick(&f)?, pick(&g)?])
                }
                None => (FieldConfig { mass, ..FieldConfig::default() }, vec![(f.clone(), function_arg(&f)?), (g.clone(), function_arg(&g)?)]),
            };
            let table = build_table(&field, &funcs)?;
            println!("{:e}", table.delta(LabelId(0), LabelId(1)));
        }
        Command::Run { spec, sweep, out } => {
            let p = Prepared::new(load(&spec)?)?;
            let lambdas = sweep.map(|s| parse_sweep_arg(&s).map(|s| s.values())).transpose()?;
            let table = run_protocol(&p, lambdas.as_deref())?;
            table.write_csv(output(out.as_deref())?)?;
        }
        Command::Check { spec, json } => {
            let report = check_protocol(&Prepared::new(load(&spec)?)?)?;
            if json {
                println!("{}", serde_json::to_string_pretty(&report)?);
            } else {
                print!("{}", report.to_text());
            }
            if report.verdict == Verdict::Acausal {
                return Ok(ExitCode::from(2));
            }
        }
        Command::Sample { spec, n, seed, out } => {
            let s = load(&spec)?;
            let names = s.readout.observable.names();
            let funcs = s.load_functions()?;
            let used: Vec<_> = funcs.into_iter().filter(|(k, _)| names.contains(k)).collect();
            let table = build_table(&s.field, &used)?;
            let rho = GaussianState::new(&table)?;
            let ids: Vec<LabelId> = (0..table.len()).map(LabelId).collect();
            let commuting = ids.iter().all(|&a| ids.iter().all(|&b| table.delta(a, b) == 0.0));
            let convention = if commuting { Convention::Commuting } else { Convention::JordanSymmetrized };
            let plan = MeasurementPlan::new(ids.iter().map(|&l| (l, s.readout.sigma)).collect(), convention, &rho)?;
            let batch = sample_measurements(&plan, &rho, n, seed, false)?;
            batch.write_csv(output(out.as_deref())?)?;
            let labels: Vec<&str> = ids.iter().map(|&l| table.name(l)).collect();
            eprintln!("columns alpha_1.. = {}", labels.join(", "));
            eprint!("{}", estimate_moments(&batch)?.to_text());
        }
        Command::MoveSupport { spec, function, slab, dx, out } => {
            let s = load(&spec)?;
            let f = named(&s, &function)?;
            let w = slab_arg(&slab)?;
            let lat = lattice_for(&[&f], w, dx.unwrap_or(s.field.lattice_dx))?;
            write_sampled(&move_support(&f, s.field.mass, &lat, w)?, out.as_deref())?;
        }
        Command::Scatter { spec, function, chi, kappa, slab, dx, out } => {
            let s = load(&spec)?;
            let f = named(&s, &function)?;
            let chi = match named(&s, &chi)? {
                SmearingFunction::Bump(b) => b,
                SmearingFunction::Sampled(_) => bail!("'{chi}' must be a bump function"),
            };
            let w = slab_arg(&slab)?;
            let lat = lattice_for(&[&f, &SmearingFunction::Bump(chi)], w, dx.unwrap_or(s.field.lattice_dx))?;
            let h = scatter_first_order(&f, s.field.mass, &lat, &InteractionSpec { kappa, chi }, w)?;
            write_sampled(&h, out.as_deref())?;
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn load(path: &Path) -> Result<ProtocolSpec> {
    ProtocolSpec::from_file(path).with_context(|| format!("reading {}", path.display()))
}

fn named(s: &ProtocolSpec, name: &str) -> Result<SmearingFunction> {
    s.load_functions()?
        .into_iter()
        .find(|(k, _)| k == name)
        .map(|(_, f)| f)
        .ok_or_else(|| anyhow!("no function '{name}' in the protocol"))
}

/// `kind@t,x,half_width[,amplitude]` or a sampled-function file.
fn function_arg(text: &str) -> Result<SmearingFunction> {
    let Some((kind, rest)) = text.split_once('@') else {
        return Ok(SmearingFunction::Sampled(SampledFunction::read(Path::new(text))?));
    };
    let kind = match kind {
        "cosine" => BumpKind::CosineBump,
        "gaussian" => BumpKind::TruncatedGaussian,
        other => bail!("unknown bump kind '{other}'"),
    };
    let v: Vec<f64> = rest
        .split(',')
        .map(|p| p.trim().parse().map_err(|_| anyhow!("malformed number '{p}' in '{text}'")))
        .collect::<Result<_>>()?;
    let (t, x, w, a) = match v[..] {
        [t, x, w] => (t, x, w, 1.0),
        [t, x, w, a] => (t, x, w, a),
        _ => bail!("expected t,x,half_width[,amplitude] in '{text}'"),
    };
    let b = BumpSpec { center: Point::new(t, x), half_width: w, amplitude: a, kind };
    b.validate()?;
    Ok(SmearingFunction::Bump(b))
}

fn slab_arg(text: &str) -> Result<WindowSpec> {
    let (a, b) = text.split_once(':').ok_or_else(|| anyhow!("slab must be t1:t2, got '{text}'"))?;
    let num = |s: &str| s.trim().parse::<f64>().map_err(|_| anyhow!("malformed number '{s}' in slab"));
    let w = WindowSpec { t1: num(a)?, t2: num(b)? };
    if !(w.t1 < w.t2) {
        bail!("slab needs t1 < t2");
    }
    Ok(w)
}

/// Lattice holding the supports and the slab with cones to spare.
fn lattice_for(fs: &[&SmearingFunction], w: WindowSpec, h: f64) -> Result<Lattice> {
    let mut rects: Vec<Rect> = fs.iter().filter_map(|f| f.support()).collect();
    let x = rects.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), r| (lo.min(r.x_lo), hi.max(r.x_hi)));
    if rects.is_empty() {
        bail!("function has no support");
    }
    rects.push(Rect::new(w.t1, w.t2, x.0, x.1)?);
    Ok(Lattice::covering(&rects, h, LATTICE_MARGIN)?)
}

fn output(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p).with_context(|| format!("creating {}", p.display()))?)),
        None => Box::new(io::stdout().lock()),
    })
}

fn write_sampled(f: &SampledFunction, out: Option<&Path>) -> Result<()> {
    let mut w = output(out)?;
    w.write_all(f.to_text().as_bytes())?;
    Ok(w.flush()?)
}
