//! Support audits of map outputs and λ-sweep signalling tests.
//!
//! [`psni_check`] is syntactic: it looks at which labels a map leaves in a
//! jet and where those labels live. [`signal_gradient`] is semantic: it
//! sweeps Alice's kick strength and fits the downstream expectation value.

use std::fmt::Write as _;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::algebra::{wick_expectation, Algebra, GaussianState, OperatorPoly, WeylJet};
use crate::error::{Error, Result};
use crate::geometry::{
    causal_shadow, point_outside_past, region_relation, spacelike_partner, Direction, Point, Rect, RegionRelation,
    RegionSet,
};
use crate::maps::{apply_composition, compose, Composition, MapKind, UpdateMap};
use crate::smearing::{LabelId, PairingTable};

/// Coefficients at or below this magnitude do not count as present. Δ is
/// exactly zero between spacelike supports, so any nonzero entry is real.
pub const DEFAULT_LABEL_TOL: f64 = 0.0;
/// Default cut between "no signal" and "signal" for λ-coefficients.
pub const DEFAULT_SIGNAL_THRESHOLD: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Causal,
    Acausal,
    Inconclusive,
}

impl Verdict {
    pub fn as_str(self) -> &'static str {
        match self {
            Verdict::Causal => "causal",
            Verdict::Acausal => "acausal",
            Verdict::Inconclusive => "inconclusive",
        }
    }
}

/// A point of a new support outside `J⁻(g)`, with a point of `g` spacelike
/// to it when one exists.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Witness {
    pub label: String,
    pub point: Point,
    pub partner: Option<Point>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NewLabel {
    pub label: String,
    pub support: RegionSet,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SupportReport {
    pub base: String,
    pub new_labels: Vec<NewLabel>,
    pub new_support: Option<RegionSet>,
    pub verdict: Verdict,
    pub witnesses: Vec<Witness>,
}

impl SupportReport {
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "base = {}", self.base);
        let names: Vec<&str> = self.new_labels.iter().map(|n| n.label.as_str()).collect();
        let _ = writeln!(s, "new_labels = {}", names.join(","));
        let _ = writeln!(s, "verdict = {}", self.verdict.as_str());
        for w in &self.witnesses {
            let _ = write!(s, "witness = {} t={} x={}", w.label, w.point.t, w.point.x);
            if let Some(p) = w.partner {
                let _ = write!(s, " partner t={} x={}", p.t, p.x);
            }
            s.push('\n');
        }
        s
    }
}

/// Syntactic past-support audit of a map output with base `g`.
///
/// Labels other than the base with a coefficient above `tol` are new. The
/// verdict is acausal when a new support leaves `J⁻(g_support)`, causal
/// when there are no new labels and inconclusive otherwise.
pub fn psni_check(result: &WeylJet, g_support: &RegionSet, table: &PairingTable, tol: f64) -> Result<SupportReport> {
    let mut labels: Vec<LabelId> = result
        .coeffs
        .iter()
        .flat_map(|c| c.labels(tol))
        .filter(|&l| l != result.base)
        .collect();
    labels.sort();
    labels.dedup();
    let mut new_labels = Vec::new();
    let mut witnesses = Vec::new();
    let mut new_support: Option<RegionSet> = None;
    for l in labels {
        let name = table.name(l).to_string();
        let supp = table.support(l).ok_or_else(|| Error::UnknownLabel(format!("{name} has no registered support")))?;
        if let Some(p) = point_outside_past(supp, g_support) {
            witnesses.push(Witness { label: name.clone(), point: p, partner: spacelike_partner(p, g_support) });
        }
        new_support = Some(match new_support {
            Some(u) => u.union(supp),
            None => supp.clone(),
        });
        new_labels.push(NewLabel { label: name, support: supp.clone() });
    }
    let verdict = if !witnesses.is_empty() {
        Verdict::Acausal
    } else if new_labels.is_empty() {
        Verdict::Causal
    } else {
        Verdict::Inconclusive
    };
    Ok(SupportReport { base: table.name(result.base).to_string(), new_labels, new_support, verdict, witnesses })
}

/// Outcome of the diagnostic re-localisation search.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "snake_case", tag = "outcome")]
pub enum RepairOutcome {
    /// A slab whose cone section lies in the past of `g`.
    Found { slab: Rect },
    /// No candidate worked. This is not a proof that none exists.
    SearchExhausted { tried: usize },
}

/// Looks for a time slab `[t, t + width]` inside `clip` where the cone
/// `J⁺(f) ∪ J⁻(f)` is confined to `J⁻(g)`.
///
/// Any function equivalent to `f` obtained by moving its solution into
/// the slab is supported in that section, so a hit means `f` can be
/// relocalised in the past of `g`.
pub fn repair_search(
    f_support: &RegionSet,
    g_support: &RegionSet,
    clip: Rect,
    width: f64,
    candidates: usize,
) -> Result<RepairOutcome> {
    if !(width > 0.0) || candidates == 0 || width > clip.t_hi - clip.t_lo {
        return Err(Error::Invalid("repair search needs a positive slab width inside the clip window".into()));
    }
    let step = if candidates > 1 { (clip.t_hi - clip.t_lo - width) / (candidates - 1) as f64 } else { 0.0 };
    for k in 0..candidates {
        let t0 = clip.t_lo + k as f64 * step;
        let slab = Rect::new(t0, t0 + width, clip.x_lo, clip.x_hi)?;
        let fut = causal_shadow(f_support, Direction::Future, slab, 16)?;
        let past = causal_shadow(f_support, Direction::Past, slab, 16)?;
        let cover = match (fut, past) {
            (Some(a), Some(b)) => a.union(&b),
            (Some(a), None) | (None, Some(a)) => a,
            (None, None) => continue,
        };
        let clipped = cover.rects().iter().any(|r| r.x_lo <= clip.x_lo || r.x_hi >= clip.x_hi);
        if !clipped && point_outside_past(&cover, g_support).is_none() {
            return Ok(RepairOutcome::Found { slab });
        }
    }
    Ok(RepairOutcome::SearchExhausted { tried: candidates })
}

/// `⟨E(P)⟩_ρ` for the composition `c` and any field polynomial `P`.
pub fn expectation_after(c: &Composition, observable: &OperatorPoly, rho: &GaussianState) -> Result<Complex64> {
    let alg = Algebra::new(rho.table());
    let base = observable.labels(0.0).into_iter().next().unwrap_or(LabelId(0));
    let jet = WeylJet { base, coeffs: vec![observable.clone()] };
    let out = apply_composition(c, &jet, &alg)?;
    wick_expectation(&out.coeffs[0], rho)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SignalReport {
    pub protocol: String,
    pub observable: String,
    pub lambdas: Vec<f64>,
    pub values: Vec<f64>,
    /// Coefficients of `1, λ, λ², …` in the fitted polynomial.
    pub coefficients: Vec<f64>,
    pub max_residual: f64,
    pub max_imaginary: f64,
    pub signal: bool,
    pub threshold: f64,
}

impl SignalReport {
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "protocol = {}", self.protocol);
        let _ = writeln!(s, "observable = {}", self.observable);
        for (l, v) in self.lambdas.iter().zip(&self.values) {
            let _ = writeln!(s, "sample = {l} {v:e}");
        }
        let c: Vec<String> = self.coefficients.iter().map(|c| format!("{c:e}")).collect();
        let _ = writeln!(s, "coefficients = {}", c.join(","));
        let _ = writeln!(s, "max_residual = {:e}", self.max_residual);
        let _ = writeln!(s, "threshold = {:e}", self.threshold);
        let _ = writeln!(s, "verdict = {}", if self.signal { "signal" } else { "no_signal" });
        s
    }

    /// Verdict re-evaluated at another threshold.
    pub fn signal_at(&self, threshold: f64) -> bool {
        self.coefficients.iter().skip(1).any(|c| c.abs() > threshold)
    }
}

/// Least-squares polynomial of the given degree through `(x, y)`.
pub fn polyfit(x: &[f64], y: &[f64], degree: usize) -> Result<Vec<f64>> {
    if x.len() != y.len() || x.len() <= degree {
        return Err(Error::Invalid(format!("need more than {degree} samples for the fit")));
    }
    let scale = x.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(f64::MIN_POSITIVE);
    let v = DMatrix::from_fn(x.len(), degree + 1, |i, j| (x[i] / scale).powi(j as i32));
    let rhs = DVector::from_column_slice(y);
    let sol = v
        .svd(true, true)
        .solve(&rhs, 1e-14)
        .map_err(|e| Error::Invalid(format!("polynomial fit failed: {e}")))?;
    Ok(sol.iter().enumerate().map(|(j, c)| c / scale.powi(j as i32)).collect())
}

fn eval_poly(c: &[f64], x: f64) -> f64 {
    c.iter().rev().fold(0.0, |acc, v| acc * x + v)
}

/// Fits `⟨observable⟩` after `c` as a polynomial in Alice's kick strength.
///
/// `alice` indexes a [`MapKind::KickField`] in `c` whose region must be
/// strictly spacelike to `bob`. The fit degree is the smaller of
/// `2·deg(observable)` and `lambdas.len() − 1`.
#[allow(clippy::too_many_arguments)]
pub fn signal_gradient(
    protocol: &str,
    c: &Composition,
    alice: usize,
    observable: &OperatorPoly,
    observable_name: &str,
    bob: &RegionSet,
    rho: &GaussianState,
    lambdas: &[f64],
    threshold: f64,
) -> Result<SignalReport> {
    let maps = c.maps();
    let a = maps.get(alice).ok_or_else(|| Error::Invalid(format!("no operation at index {alice}")))?;
    let MapKind::KickField { f: h, .. } = a.kind else {
        return Err(Error::Invalid("Alice's operation must be a field kick".into()));
    };
    if region_relation(&a.region, bob) != RegionRelation::StrictlySpacelike {
        return Err(Error::Invalid("Alice's region is not strictly spacelike to Bob's".into()));
    }
    if lambdas.len() < 2 {
        return Err(Error::Invalid("the λ grid needs at least two points".into()));
    }
    let table = rho.table();
    let vals: Vec<Complex64> = lambdas
        .par_iter()
        .map(|&l| {
            let mut ms: Vec<UpdateMap> = maps.to_vec();
            ms[alice] = UpdateMap::new(MapKind::KickField { f: h, lambda: l }, a.region.clone(), table)?;
            expectation_after(&compose(ms)?, observable, rho)
        })
        .collect::<Result<_>>()?;
    let values: Vec<f64> = vals.iter().map(|v| v.re).collect();
    let max_imaginary = vals.iter().fold(0.0f64, |m, v| m.max(v.im.abs()));
    let degree = (2 * observable.degree()).max(1).min(lambdas.len() - 1);
    let coefficients = polyfit(lambdas, &values, degree)?;
    let max_residual =
        lambdas.iter().zip(&values).fold(0.0f64, |m, (&l, &v)| m.max((eval_poly(&coefficients, l) - v).abs()));
    let signal = coefficients.iter().skip(1).any(|c| c.abs() > threshold);
    Ok(SignalReport {
        protocol: protocol.to_string(),
        observable: observable_name.to_string(),
        lambdas: lambdas.to_vec(),
        values,
        coefficients,
        max_residual,
        max_imaginary,
        signal,
        threshold,
    })
}
