//! Protocol files: functions, a sequence of local operations and a readout.
//!
//! Operations are listed in state-update order. One kick may take the
//! strength `lambda`; that operation is Alice's free choice and is swept
//! by the runner and the checker.

mod observable;
mod parse;
#[cfg(test)]
mod tests;

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::Write;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Serialize;

use crate::algebra::{wick_expectation, Algebra, GaussianState, OperatorPoly, WeylJet};
use crate::causality::{psni_check, signal_gradient, SignalReport, SupportReport, Verdict, DEFAULT_SIGNAL_THRESHOLD};
use crate::classical::{lattice_delta, Lattice};
use crate::error::{Error, Result};
use crate::geometry::{region_relation, Rect, RegionRelation, RegionSet};
use crate::maps::{apply, compose, Composition, MapKind, SampledKrausProfile, UpdateMap};
use crate::sampler::estimate_polynomial;
use crate::smearing::{vacuum_covariance, BumpSpec, LabelId, PairingTable, QuadratureConfig, SampledFunction, SmearingFunction};

pub use observable::{parse_observable, ObservableExpr};
pub use parse::{parse_protocol, parse_sweep_arg};

/// λ values used when a protocol gives no sweep.
pub const DEFAULT_SWEEP: [f64; 5] = [-1.0, -0.5, 0.0, 0.5, 1.0];
/// Time padding of automatic lattice windows.
pub const LATTICE_MARGIN: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Backend {
    Quadrature,
    /// Δ from the lattice solver, `W_s` still by quadrature.
    Lattice,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FieldConfig {
    pub mass: f64,
    pub backend: Backend,
    pub quadrature: QuadratureConfig,
    pub lattice_dx: f64,
}

impl Default for FieldConfig {
    fn default() -> Self {
        Self { mass: 1.0, backend: Backend::Quadrature, quadrature: QuadratureConfig::default(), lattice_dx: 0.02 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum FunctionSource {
    Bump(BumpSpec),
    /// A sampled function file, relative to the protocol's directory.
    File(PathBuf),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FunctionDef {
    pub name: String,
    pub source: FunctionSource,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Strength {
    Value(f64),
    Lambda,
}

/// A catalogue map with functions referenced by name.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum MapSpec {
    Kick { field: String, strength: Strength },
    KickSquared { field: String, strength: f64 },
    GaussianMeasure { field: String, sigma: f64 },
    GeneralMeasure { field: String, sigma: f64, profile_spacing: f64 },
    GaussianMeasurePoly { poly: ObservableExpr, sigma: f64 },
    GaussianMeasureJordan { f1: String, f2: String, sigma: f64 },
    SelectiveGaussian { field: String, sigma: f64, a: f64, b: f64 },
    LoccConditional { f1: String, f2: String, sigma: f64, a: f64, b: f64 },
}

impl MapSpec {
    pub fn name(&self) -> &'static str {
        match self {
            MapSpec::Kick { .. } => "kick",
            MapSpec::KickSquared { .. } => "kick_squared",
            MapSpec::GaussianMeasure { .. } => "gaussian_measure",
            MapSpec::GeneralMeasure { .. } => "general_measure",
            MapSpec::GaussianMeasurePoly { .. } => "gaussian_measure_poly",
            MapSpec::GaussianMeasureJordan { .. } => "gaussian_measure_jordan",
            MapSpec::SelectiveGaussian { .. } => "selective_gaussian",
            MapSpec::LoccConditional { .. } => "locc_conditional",
        }
    }

    /// Names of the functions the map acts with.
    pub fn functions(&self) -> Vec<String> {
        match self {
            MapSpec::Kick { field, .. }
            | MapSpec::KickSquared { field, .. }
            | MapSpec::GaussianMeasure { field, .. }
            | MapSpec::GeneralMeasure { field, .. }
            | MapSpec::SelectiveGaussian { field, .. } => vec![field.clone()],
            MapSpec::GaussianMeasureJordan { f1, f2, .. } | MapSpec::LoccConditional { f1, f2, .. } => {
                vec![f1.clone(), f2.clone()]
            }
            MapSpec::GaussianMeasurePoly { poly, .. } => poly.names(),
        }
    }

    fn renamed(&self, map: &BTreeMap<String, String>) -> Self {
        let r = |s: &String| map.get(s).cloned().unwrap_or_else(|| s.clone());
        let mut out = self.clone();
        match &mut out {
            MapSpec::Kick { field, .. }
            | MapSpec::KickSquared { field, .. }
            | MapSpec::GaussianMeasure { field, .. }
            | MapSpec::GeneralMeasure { field, .. }
            | MapSpec::SelectiveGaussian { field, .. } => *field = r(field),
            MapSpec::GaussianMeasureJordan { f1, f2, .. } | MapSpec::LoccConditional { f1, f2, .. } => {
                *f1 = r(f1);
                *f2 = r(f2);
            }
            MapSpec::GaussianMeasurePoly { poly, .. } => *poly = poly.renamed(map),
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OpSpec {
    pub index: u32,
    pub agent: String,
    pub map: MapSpec,
    /// Defaults to the union of the map's function supports.
    pub region: Option<Vec<Rect>>,
}

impl OpSpec {
    /// Whether this is the kick whose strength is swept.
    pub fn is_alice(&self) -> bool {
        matches!(self.map, MapSpec::Kick { strength: Strength::Lambda, .. })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Sweep {
    /// `start, start + step, …` up to `stop` inclusive.
    Range { start: f64, stop: f64, step: f64 },
    List(Vec<f64>),
}

impl Sweep {
    pub fn values(&self) -> Vec<f64> {
        match self {
            Sweep::List(v) => v.clone(),
            Sweep::Range { start, stop, step } => {
                let n = ((stop - start) / step + 1e-9).floor() as usize;
                (0..=n).map(|k| start + k as f64 * step).collect()
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Readout {
    pub agent: String,
    pub observable: ObservableExpr,
    /// Defaults to the union of the observable's function supports.
    pub region: Option<Vec<Rect>>,
    pub sweep: Option<Sweep>,
    /// Width of the Gaussian measurements used by the sampler.
    pub sigma: f64,
    pub samples: Option<usize>,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProtocolSpec {
    pub field: FieldConfig,
    pub functions: Vec<FunctionDef>,
    pub ops: Vec<OpSpec>,
    pub readout: Readout,
    #[serde(skip)]
    pub base_dir: PathBuf,
}

impl ProtocolSpec {
    /// Reads and parses a file; function files resolve next to it.
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        let mut spec = parse_protocol(&text)?;
        spec.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok(spec)
    }

    /// Index into `ops` of Alice's swept kick.
    pub fn alice(&self) -> Option<usize> {
        self.ops.iter().position(OpSpec::is_alice)
    }

    pub fn renamed(&self, functions: &BTreeMap<String, String>, agents: &BTreeMap<String, String>) -> Self {
        let agent = |a: &String| agents.get(a).cloned().unwrap_or_else(|| a.clone());
        let mut out = self.clone();
        for f in &mut out.functions {
            if let Some(n) = functions.get(&f.name) {
                f.name = n.clone();
            }
        }
        for op in &mut out.ops {
            op.agent = agent(&op.agent);
            op.map = op.map.renamed(functions);
        }
        out.readout.agent = agent(&out.readout.agent);
        out.readout.observable = out.readout.observable.renamed(functions);
        out
    }

    pub fn load_functions(&self) -> Result<Vec<(String, SmearingFunction)>> {
        self.functions
            .iter()
            .map(|d| {
                let f = match &d.source {
                    FunctionSource::Bump(b) => {
                        b.validate()?;
                        SmearingFunction::Bump(*b)
                    }
                    FunctionSource::File(p) => SmearingFunction::Sampled(SampledFunction::read(&self.base_dir.join(p))?),
                };
                Ok((d.name.clone(), f))
            })
            .collect()
    }

    pub fn sweep(&self) -> Vec<f64> {
        self.readout.sweep.as_ref().map_or_else(|| DEFAULT_SWEEP.to_vec(), Sweep::values)
    }
}

/// Pairing table for the functions of a protocol under its field config.
pub fn build_table(field: &FieldConfig, functions: &[(String, SmearingFunction)]) -> Result<PairingTable> {
    match field.backend {
        Backend::Quadrature => PairingTable::build(functions, field.mass, &field.quadrature),
        Backend::Lattice => {
            let rects: Vec<Rect> = functions.iter().filter_map(|(_, f)| f.support()).collect();
            let lat = Lattice::covering(&rects, field.lattice_dx, LATTICE_MARGIN)?;
            let n = functions.len();
            let pairs: Vec<(usize, usize)> = (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))).collect();
            let vals: Vec<f64> = pairs
                .par_iter()
                .map(|&(i, j)| lattice_delta(&functions[i].1, &functions[j].1, field.mass, &lat))
                .collect::<Result<_>>()?;
            let mut delta = vec![0.0; n * n];
            for (&(i, j), d) in pairs.iter().zip(vals) {
                delta[i * n + j] = d;
                delta[j * n + i] = -d;
            }
            let wsym = if field.mass > 0.0 {
                let upper: Vec<(usize, usize)> = (0..n).flat_map(|i| (i..n).map(move |j| (i, j))).collect();
                let vals: Vec<f64> = upper
                    .par_iter()
                    .map(|&(i, j)| {
                        vacuum_covariance(&functions[i].1, &functions[j].1, field.mass, &field.quadrature).map(|c| c.value)
                    })
                    .collect::<Result<_>>()?;
                let mut w = vec![0.0; n * n];
                for (&(i, j), v) in upper.iter().zip(vals) {
                    w[i * n + j] = v;
                    w[j * n + i] = v;
                }
                Some(w)
            } else {
                None
            };
            let names = functions.iter().map(|(s, _)| s.clone()).collect();
            let supports = functions.iter().map(|(_, f)| f.support_region()).collect();
            PairingTable::from_parts(names, supports, delta, wsym, field.mass)
        }
    }
}

/// A protocol with its pairing table, ready to evaluate.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub spec: ProtocolSpec,
    pub table: PairingTable,
    pub observable: OperatorPoly,
    pub bob: RegionSet,
    regions: Vec<RegionSet>,
}

fn wrap(index: u32) -> impl Fn(Error) -> Error {
    move |e| Error::Operation { index: index as usize, source: Box::new(e) }
}

impl Prepared {
    /// Loads the functions and builds the pairing table.
    pub fn new(spec: ProtocolSpec) -> Result<Self> {
        let functions = spec.load_functions()?;
        let table = build_table(&spec.field, &functions)?;
        Self::with_table(spec, table)
    }

    /// Uses a given table, whose names must cover the protocol's functions.
    pub fn with_table(spec: ProtocolSpec, table: PairingTable) -> Result<Self> {
        let region_of = |rects: &Option<Vec<Rect>>, names: &[String]| -> Result<RegionSet> {
            if let Some(r) = rects {
                return RegionSet::new(r.clone());
            }
            let mut out: Vec<Rect> = Vec::new();
            for n in names {
                let s = table
                    .support(table.id(n)?)
                    .ok_or_else(|| Error::Invalid(format!("function {n} has no support")))?;
                out.extend_from_slice(s.rects());
            }
            RegionSet::new(out)
        };
        let mut regions = Vec::with_capacity(spec.ops.len());
        for op in &spec.ops {
            regions.push(region_of(&op.region, &op.map.functions()).map_err(wrap(op.index))?);
        }
        for (i, a) in spec.ops.iter().enumerate() {
            for (j, b) in spec.ops.iter().enumerate().skip(i + 1) {
                if region_relation(&regions[j], &regions[i]) == RegionRelation::TotallyTimelikeABeforeB {
                    return Err(wrap(b.index)(Error::Invalid(format!(
                        "its region lies entirely in the past of operation {} but it is applied later",
                        a.index
                    ))));
                }
            }
        }
        let alg = Algebra::new(&table);
        let observable = spec.readout.observable.lower(&alg, &table)?;
        let bob = region_of(&spec.readout.region, &spec.readout.observable.names())?;
        let p = Self { spec, table, observable, bob, regions };
        for i in 0..p.spec.ops.len() {
            p.op_map(i, 0.0)?;
        }
        Ok(p)
    }

    /// The `i`-th operation with Alice's strength set to `lambda`.
    pub fn op_map(&self, i: usize, lambda: f64) -> Result<UpdateMap> {
        let op = &self.spec.ops[i];
        let t = &self.table;
        let kind = (|| {
            Ok(match &op.map {
                MapSpec::Kick { field, strength } => MapKind::KickField {
                    f: t.id(field)?,
                    lambda: match strength {
                        Strength::Value(v) => *v,
                        Strength::Lambda => lambda,
                    },
                },
                MapSpec::KickSquared { field, strength } => {
                    MapKind::KickFieldSquared { f: t.id(field)?, strength: *strength }
                }
                MapSpec::GaussianMeasure { field, sigma } => MapKind::GaussianMeasureField { f: t.id(field)?, sigma: *sigma },
                MapSpec::GeneralMeasure { field, sigma, profile_spacing } => MapKind::GeneralMeasureField {
                    f: t.id(field)?,
                    profile: SampledKrausProfile::gaussian(*sigma, *profile_spacing)?,
                },
                MapSpec::GaussianMeasurePoly { poly, sigma } => MapKind::GaussianMeasureCommutingPoly {
                    c: poly.lower(&Algebra::new(t), t)?,
                    sigma: *sigma,
                },
                MapSpec::GaussianMeasureJordan { f1, f2, sigma } => {
                    MapKind::GaussianMeasureJordanPair { f1: t.id(f1)?, f2: t.id(f2)?, sigma: *sigma }
                }
                MapSpec::SelectiveGaussian { field, sigma, a, b } => {
                    MapKind::SelectiveGaussian { f: t.id(field)?, sigma: *sigma, a: *a, b: *b }
                }
                MapSpec::LoccConditional { f1, f2, sigma, a, b } => {
                    MapKind::LoccConditional { f1: t.id(f1)?, f2: t.id(f2)?, sigma: *sigma, a: *a, b: *b }
                }
            })
        })()
        .and_then(|k| UpdateMap::new(k, self.regions[i].clone(), t));
        kind.map_err(wrap(op.index))
    }

    /// All operations with Alice's strength set to `lambda`.
    pub fn composition(&self, lambda: f64) -> Result<Option<Composition>> {
        if self.spec.ops.is_empty() {
            return Ok(None);
        }
        let maps = (0..self.spec.ops.len()).map(|i| self.op_map(i, lambda)).collect::<Result<Vec<_>>>()?;
        compose(maps).map(Some)
    }

    /// The readout observable in the Heisenberg picture after all operations.
    pub fn evolved_observable(&self, lambda: f64) -> Result<OperatorPoly> {
        let alg = Algebra::new(&self.table);
        let base = self.observable.labels(0.0).into_iter().next().unwrap_or(LabelId(0));
        let mut jet = WeylJet { base, coeffs: vec![self.observable.clone()] };
        for i in (0..self.spec.ops.len()).rev() {
            let m = self.op_map(i, lambda)?;
            jet = apply(&m, &jet, &alg).map_err(wrap(self.spec.ops[i].index))?;
        }
        Ok(jet.coeffs.swap_remove(0))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RunRow {
    pub lambda: f64,
    pub analytic: f64,
    pub mc: Option<f64>,
    pub se: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunTable {
    pub observable: String,
    pub rows: Vec<RunRow>,
}

impl RunTable {
    /// Columns `lambda,analytic,mc_estimate,mc_se`; absent estimates are empty.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        let io = |e: csv::Error| Error::Io(e.to_string());
        out.write_record(["lambda", "analytic", "mc_estimate", "mc_se"]).map_err(io)?;
        let opt = |v: Option<f64>| v.map(|x| format!("{x:e}")).unwrap_or_default();
        for r in &self.rows {
            out.write_record([format!("{}", r.lambda), format!("{:e}", r.analytic), opt(r.mc), opt(r.se)])
                .map_err(io)?;
        }
        out.flush().map_err(|e| Error::Io(e.to_string()))
    }
}

/// `⟨observable⟩` after the operations at each λ, with Monte Carlo
/// estimates from Gaussian measurements when the readout asks for samples.
pub fn run_protocol(p: &Prepared, sweep: Option<&[f64]>) -> Result<RunTable> {
    let rho = GaussianState::new(&p.table)?;
    let lambdas = sweep.map_or_else(|| p.spec.sweep(), <[f64]>::to_vec);
    let r = &p.spec.readout;
    let rows = lambdas
        .par_iter()
        .map(|&lambda| {
            let poly = p.evolved_observable(lambda)?;
            let analytic = wick_expectation(&poly, &rho)?.re;
            let (mc, se) = match r.samples {
                Some(n) => {
                    let e = estimate_polynomial(&poly, r.sigma, &rho, n, r.seed)?;
                    (Some(e.value.re), Some(e.se))
                }
                None => (None, None),
            };
            Ok(RunRow { lambda, analytic, mc, se })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(RunTable { observable: r.observable.to_string(), rows })
}

/// Support audit of one operation against every readout label.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OpAudit {
    pub index: u32,
    pub agent: String,
    pub map: String,
    pub reports: Vec<SupportReport>,
    pub verdict: Verdict,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckReport {
    pub ops: Vec<OpAudit>,
    pub signal: Option<SignalReport>,
    /// Why no signal test ran.
    pub signal_note: Option<String>,
    pub verdict: Verdict,
}

impl CheckReport {
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for op in &self.ops {
            let _ = writeln!(s, "[op {}]", op.index);
            let _ = writeln!(s, "agent = {}\nmap = {}\nverdict = {}", op.agent, op.map, op.verdict.as_str());
            for r in &op.reports {
                for line in r.to_text().lines().filter(|l| !l.starts_with("verdict")) {
                    let _ = writeln!(s, "{line}");
                }
            }
            s.push('\n');
        }
        let _ = writeln!(s, "[signal]");
        match (&self.signal, &self.signal_note) {
            (Some(r), _) => s += &r.to_text(),
            (None, Some(n)) => {
                let _ = writeln!(s, "skipped = {n}");
            }
            (None, None) => {}
        }
        let _ = writeln!(s, "\n[summary]\nverdict = {}", self.verdict.as_str());
        s
    }
}

fn worst(a: Verdict, b: Verdict) -> Verdict {
    use Verdict::*;
    match (a, b) {
        (Acausal, _) | (_, Acausal) => Acausal,
        (Inconclusive, _) | (_, Inconclusive) => Inconclusive,
        _ => Causal,
    }
}

/// Syntactic audit of every operation plus the semantic λ-sweep.
///
/// Each operation acts alone on the Weyl jet of every readout label, with
/// Alice's strength set to one; a label counts as present whenever its
/// coefficient is nonzero. The protocol is acausal when an operation is or
/// when the sweep shows a signal, causal when every operation is causal or
/// the only doubts are labels in Bob's past and the sweep is silent.
pub fn check_protocol(p: &Prepared) -> Result<CheckReport> {
    let alg = Algebra::new(&p.table);
    let labels: Vec<_> = p.observable.labels(0.0).into_iter().collect();
    let mut ops = Vec::with_capacity(p.spec.ops.len());
    for (i, op) in p.spec.ops.iter().enumerate() {
        let m = p.op_map(i, 1.0)?;
        let reports = labels
            .iter()
            .map(|&g| {
                let out = apply(&m, &WeylJet::new(g, 2), &alg)?;
                psni_check(&out, &p.bob, &p.table, 0.0)
            })
            .collect::<Result<Vec<_>>>()
            .map_err(wrap(op.index))?;
        let verdict = reports.iter().fold(Verdict::Causal, |v, r| worst(v, r.verdict));
        ops.push(OpAudit { index: op.index, agent: op.agent.clone(), map: op.map.name().into(), reports, verdict });
    }
    let (signal, signal_note) = match p.spec.alice() {
        None => (None, Some("no operation has the strength 'lambda'".to_string())),
        Some(a) => {
            let c = p.composition(0.0)?.expect("Alice's operation is present");
            let rho = GaussianState::new(&p.table)?;
            let r = signal_gradient(
                "protocol",
                &c,
                a,
                &p.observable,
                &p.spec.readout.observable.to_string(),
                &p.bob,
                &rho,
                &p.spec.sweep(),
                DEFAULT_SIGNAL_THRESHOLD,
            )
            .map_err(wrap(p.spec.ops[a].index))?;
            (Some(r), None)
        }
    };
    let syntactic = ops.iter().fold(Verdict::Causal, |v, o| worst(v, o.verdict));
    let verdict = match (syntactic, signal.as_ref().map(|s| s.signal)) {
        (Verdict::Acausal, _) | (_, Some(true)) => Verdict::Acausal,
        (Verdict::Causal, _) | (Verdict::Inconclusive, Some(false)) => Verdict::Causal,
        (Verdict::Inconclusive, None) => Verdict::Inconclusive,
    };
    Ok(CheckReport { ops, signal, signal_note, verdict })
}
