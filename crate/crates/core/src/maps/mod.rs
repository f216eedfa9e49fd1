//! The catalogue of update maps and their action on Weyl jets.
//!
//! Every map `E` in the catalogue satisfies `E(e^{iφ(u)}) = F(u) e^{iφ(u)}`
//! for all `u` in the span of the registered labels, where `F(u)` depends
//! on `u` only through a few numbers `y_k = Δ(p_k, u)` for the map's probe
//! labels `p_k`. A word `φ(a_1)…φ(a_n)` in front of `e^{itφ(g)}` is the
//! derivative `(−i)ⁿ ∂_{s_1}…∂_{s_n}` of a product of Weyl generators, so
//! with `u = Σ s_i a_i + t g` each jet coefficient becomes
//!
//! `Σ_{S,j} (−i)^{|S|} [s_S tʲ]F · (word with S removed) · tʲ`.
//!
//! Atoms commuting with every probe label are passive and never enter `S`.

mod functions;
#[cfg(test)]
mod tests;

use num_complex::Complex64;

use crate::algebra::series::Series;
use crate::algebra::{Algebra, Atom, GaussianState, OperatorPoly, WeylJet, Window};
use crate::error::{Error, Result};
use crate::geometry::RegionSet;
use crate::smearing::{LabelId, PairingTable};
use crate::special::factorial;

pub use functions::{
    bin_overlap_profile, eta_derivative_at_zero, eta_function, h_function, selective_probability,
    SampledKrausProfile,
};

/// Tolerance below which two labels count as commuting.
pub const COMMUTE_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub enum MapKind {
    /// Conjugation by `e^{iλφ(f)}`.
    KickField { f: LabelId, lambda: f64 },
    /// Conjugation by `e^{iμφ(f)²}`.
    KickFieldSquared { f: LabelId, strength: f64 },
    GaussianMeasureField { f: LabelId, sigma: f64 },
    GeneralMeasureField { f: LabelId, profile: SampledKrausProfile },
    GaussianMeasureCommutingPoly { c: OperatorPoly, sigma: f64 },
    /// Gaussian measurement of `φ(f₁)⊙φ(f₂)`.
    GaussianMeasureJordanPair { f1: LabelId, f2: LabelId, sigma: f64 },
    SelectiveGaussian { f: LabelId, sigma: f64, a: f64, b: f64 },
    /// Selective measurement of `φ(f₁)` in `[a,b]`, followed by a
    /// non-selective one of `φ(f₂)` only when it landed there.
    LoccConditional { f1: LabelId, f2: LabelId, sigma: f64, a: f64, b: f64 },
}

impl MapKind {
    /// Labels whose Δ against `u` determines `F(u)`.
    pub fn probes(&self) -> Vec<LabelId> {
        match self {
            MapKind::KickField { f, .. }
            | MapKind::KickFieldSquared { f, .. }
            | MapKind::GaussianMeasureField { f, .. }
            | MapKind::GeneralMeasureField { f, .. }
            | MapKind::SelectiveGaussian { f, .. } => vec![*f],
            MapKind::GaussianMeasureJordanPair { f1, f2, .. } | MapKind::LoccConditional { f1, f2, .. } => {
                vec![*f1, *f2]
            }
            MapKind::GaussianMeasureCommutingPoly { c, .. } => c.labels(0.0).into_iter().collect(),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            MapKind::KickField { .. } => "kick",
            MapKind::KickFieldSquared { .. } => "kick_squared",
            MapKind::GaussianMeasureField { .. } => "gaussian_measure",
            MapKind::GeneralMeasureField { .. } => "general_measure",
            MapKind::GaussianMeasureCommutingPoly { .. } => "gaussian_measure_poly",
            MapKind::GaussianMeasureJordanPair { .. } => "gaussian_measure_jordan",
            MapKind::SelectiveGaussian { .. } => "selective_gaussian",
            MapKind::LoccConditional { .. } => "locc_conditional",
        }
    }

    /// False only for the selective measurement, which is not unital.
    pub fn is_trace_preserving(&self) -> bool {
        !matches!(self, MapKind::SelectiveGaussian { .. })
    }
}

/// A catalogue map together with the compact region it is local to.
#[derive(Debug, Clone, PartialEq)]
pub struct UpdateMap {
    pub kind: MapKind,
    pub region: RegionSet,
}

impl UpdateMap {
    pub fn new(kind: MapKind, region: RegionSet, table: &PairingTable) -> Result<Self> {
        let bad = |m: &str| Err(Error::Invalid(format!("{}: {m}", kind.name())));
        let sigma = match &kind {
            MapKind::GaussianMeasureField { sigma, .. }
            | MapKind::GaussianMeasureCommutingPoly { sigma, .. }
            | MapKind::GaussianMeasureJordanPair { sigma, .. }
            | MapKind::SelectiveGaussian { sigma, .. }
            | MapKind::LoccConditional { sigma, .. } => Some(*sigma),
            _ => None,
        };
        if sigma.is_some_and(|s| !(s > 0.0 && s.is_finite())) {
            return bad("sigma must be positive");
        }
        let probes = kind.probes();
        if let Some(l) = probes.iter().find(|l| l.0 >= table.len()) {
            return Err(Error::UnknownLabel(format!("#{}", l.0)));
        }
        match &kind {
            MapKind::KickField { lambda, .. } if !lambda.is_finite() => return bad("kick strength must be finite"),
            MapKind::KickFieldSquared { strength, .. } if !strength.is_finite() => {
                return bad("kick strength must be finite")
            }
            MapKind::GaussianMeasureCommutingPoly { c, .. } => {
                if c.has_windows() || c.degree() == 0 {
                    return bad("the measured polynomial must be a non-constant field polynomial");
                }
                for &p in &probes {
                    for &q in &probes {
                        if table.delta(p, q).abs() > COMMUTE_TOL {
                            return bad(&format!(
                                "labels {} and {} do not commute",
                                table.name(p),
                                table.name(q)
                            ));
                        }
                    }
                }
            }
            MapKind::GaussianMeasureJordanPair { f1, f2, .. } if table.delta(*f1, *f2) == 0.0 => {
                return bad("the pair must not commute")
            }
            MapKind::SelectiveGaussian { a, b, .. } | MapKind::LoccConditional { a, b, .. } if !(a <= b) => {
                return bad("interval must satisfy a <= b")
            }
            _ => {}
        }
        for &p in &probes {
            if let Some(s) = table.support(p) {
                if !region.covers(s) {
                    return bad(&format!("region does not contain the support of {}", table.name(p)));
                }
            }
        }
        Ok(Self { kind, region })
    }
}

/// Maps in state order; operators see them in reverse.
#[derive(Debug, Clone, PartialEq)]
pub struct Composition {
    maps: Vec<UpdateMap>,
}

impl Composition {
    pub fn maps(&self) -> &[UpdateMap] {
        &self.maps
    }
}

pub fn compose(maps: Vec<UpdateMap>) -> Result<Composition> {
    if maps.is_empty() {
        return Err(Error::Invalid("a composition needs at least one map".into()));
    }
    Ok(Composition { maps })
}

pub fn apply_composition(c: &Composition, w: &WeylJet, alg: &Algebra) -> Result<WeylJet> {
    c.maps.iter().rev().try_fold(w.clone(), |w, m| apply(m, &w, alg))
}

/// Highest jet order accepted by [`apply`].
pub const MAX_JET_ORDER: usize = 6;

/// Dual action of `m` on `c(t)·e^{itφ(g)}`.
pub fn apply(m: &UpdateMap, w: &WeylJet, alg: &Algebra) -> Result<WeylJet> {
    if w.order() > MAX_JET_ORDER {
        return Err(Error::Unsupported(format!("jet order {} above {MAX_JET_ORDER}", w.order())));
    }
    let table = alg.table();
    let probes = m.kind.probes();
    let g = w.base;
    if let MapKind::GaussianMeasureJordanPair { f2, .. } = &m.kind {
        if w.order() > 0 && table.delta(*f2, g) != 0.0 {
            return Err(Error::Unsupported(format!(
                "Jordan-pair measurement needs Δ({}, {}) = 0",
                table.name(*f2),
                table.name(g)
            )));
        }
    }
    if let MapKind::KickField { f, lambda } = m.kind {
        if w.coeffs.iter().any(OperatorPoly::has_windows) {
            return kick_by_shift(f, lambda, w, alg);
        }
    }
    let factor = Factor::new(&m.kind, alg)?;
    let mut out = vec![OperatorPoly::zero(); w.order() + 1];
    for (m_idx, coeff) in w.coeffs.iter().enumerate() {
        let order = w.order() - m_idx;
        for (word, c) in coeff.terms() {
            let mut active = Vec::new();
            for (i, a) in word.iter().enumerate() {
                let touches = probes.iter().any(|&p| table.delta(p, a.label()) != 0.0);
                match a {
                    Atom::Window(_) if touches => {
                        return Err(Error::Unsupported(format!(
                            "{} acting on a function of a non-commuting field",
                            m.kind.name()
                        )))
                    }
                    Atom::Field(l) if touches => {
                        if let MapKind::GaussianMeasureJordanPair { f2, .. } = &m.kind {
                            if table.delta(*f2, *l) != 0.0 {
                                return Err(Error::Unsupported(format!(
                                    "Jordan-pair measurement needs Δ({}, {}) = 0",
                                    table.name(*f2),
                                    table.name(*l)
                                )));
                            }
                        }
                        active.push(i);
                    }
                    _ => {}
                }
            }
            let ys: Vec<Series> = probes
                .iter()
                .map(|&p| {
                    let a: Vec<f64> = active.iter().map(|&i| table.delta(p, word[i].label())).collect();
                    Series::linear(order, &a, table.delta(p, g))
                })
                .collect();
            let f = factor.eval(alg, &ys)?;
            for (&(mask, j), fp) in f.terms() {
                let rest: Vec<Atom> = word
                    .iter()
                    .enumerate()
                    .filter(|(i, _)| active.iter().position(|a| a == i).is_none_or(|k| mask & (1 << k) == 0))
                    .map(|(_, a)| *a)
                    .collect();
                let k = Complex64::new(0.0, -1.0).powu(mask.count_ones()) * c;
                let term = alg.mul(fp, &OperatorPoly::term(rest, Complex64::new(1.0, 0.0)))?;
                out[m_idx + j] = out[m_idx + j].add(&term.scale(k));
            }
        }
    }
    Ok(WeylJet { base: g, coeffs: out })
}

/// Conjugation by `e^{iλφ(f)}` as the shift `φ(a) → φ(a) + λΔ(a,f)`, which
/// also moves window atoms.
fn kick_by_shift(f: LabelId, lambda: f64, w: &WeylJet, alg: &Algebra) -> Result<WeylJet> {
    let phase = Complex64::new(0.0, lambda * alg.table().delta(w.base, f));
    let mut out = vec![OperatorPoly::zero(); w.order() + 1];
    for (i, c) in w.coeffs.iter().enumerate() {
        let shifted = alg.shift_labels(c, f, lambda)?;
        for (j, o) in out.iter_mut().enumerate().skip(i) {
            let k = phase.powu((j - i) as u32) / factorial(j - i);
            *o = o.add(&shifted.scale(k));
        }
    }
    Ok(WeylJet { base: w.base, coeffs: out })
}

/// Precomputed constants for building `F(u)` from the probe values.
enum Factor {
    Kick { lambda: f64 },
    KickSquared { f: LabelId, mu: f64 },
    Gaussian { sigma: f64 },
    Profile { taylor: Vec<Complex64> },
    Poly { c: OperatorPoly, labels: Vec<LabelId>, sigma: f64 },
    Jordan { f2: LabelId, d12: f64, r: f64 },
    Selective { window: Window, sigma: f64, p: f64 },
    Locc { window: Window, sigma: f64 },
}

impl Factor {
    fn new(kind: &MapKind, alg: &Algebra) -> Result<Self> {
        let t = alg.table();
        Ok(match kind {
            MapKind::KickField { lambda, .. } => Factor::Kick { lambda: *lambda },
            MapKind::KickFieldSquared { f, strength } => Factor::KickSquared { f: *f, mu: *strength },
            MapKind::GaussianMeasureField { sigma, .. } => Factor::Gaussian { sigma: *sigma },
            MapKind::GeneralMeasureField { profile, .. } => {
                Factor::Profile { taylor: profile.h_taylor(alg.max_degree() + MAX_JET_ORDER + 2) }
            }
            MapKind::GaussianMeasureCommutingPoly { c, sigma } => {
                Factor::Poly { c: c.clone(), labels: kind.probes(), sigma: *sigma }
            }
            MapKind::GaussianMeasureJordanPair { f1, f2, sigma } => {
                let d12 = t.delta(*f1, *f2);
                Factor::Jordan { f2: *f2, d12, r: d12 / (2.0 * sigma) }
            }
            MapKind::SelectiveGaussian { f, sigma, a, b } => {
                let rho = GaussianState::new(t)?;
                let p = selective_probability(*f, *sigma, *a, *b, &rho)?;
                if p <= 0.0 {
                    return Err(Error::Invalid("selected interval has zero probability".into()));
                }
                Factor::Selective { window: Window::new(*f, *a, *b, *sigma), sigma: *sigma, p }
            }
            MapKind::LoccConditional { f1, sigma, a, b, .. } => {
                Factor::Locc { window: Window::new(*f1, *a, *b, *sigma), sigma: *sigma }
            }
        })
    }

    fn eval(&self, alg: &Algebra, y: &[Series]) -> Result<Series> {
        let gauss = |x: &Series, sigma: f64| -> Result<Series> {
            Series::exp(alg, &x.mul(alg, x)?.scale_real(-1.0 / (8.0 * sigma * sigma)))
        };
        // D(φ + y/2) expanded around φ
        let window_series = |w: &Window, x: &Series| -> Result<Series> {
            let coeffs: Vec<OperatorPoly> = (0..x.nilpotency())
                .map(|n| OperatorPoly::window(w.derivative(n as u32)).scale(Complex64::new(0.5f64.powi(n as i32) / factorial(n), 0.0)))
                .collect();
            Series::compose(alg, &coeffs, x)
        };
        match self {
            Factor::Kick { lambda } => Series::exp(alg, &y[0].scale(Complex64::new(0.0, -lambda))),
            Factor::KickSquared { f, mu } => {
                let phase = Series::exp(alg, &y[0].mul(alg, &y[0])?.scale(Complex64::new(0.0, -mu)))?;
                let shift = y[0].lmul_poly(alg, &OperatorPoly::field(*f).scale(Complex64::new(0.0, -2.0 * mu)))?;
                phase.mul(alg, &Series::exp(alg, &shift)?)
            }
            Factor::Gaussian { sigma } => gauss(&y[0], *sigma),
            Factor::Profile { taylor } => {
                let coeffs: Vec<OperatorPoly> =
                    taylor.iter().take(y[0].nilpotency()).map(|c| OperatorPoly::scalar(*c)).collect();
                Series::compose(alg, &coeffs, &y[0])
            }
            Factor::Poly { c, labels, sigma } => {
                let order = y.first().map(Series::order).unwrap_or(0);
                let mut shifted = Series::zero(order);
                for (word, k) in c.terms() {
                    let mut prod = Series::one(order);
                    for a in word {
                        let idx = labels.iter().position(|l| *l == a.label()).expect("probe labels cover C");
                        let atom = Series::constant(order, OperatorPoly::field(a.label())).add(&y[idx]);
                        prod = prod.mul(alg, &atom)?;
                    }
                    shifted = shifted.add(&prod.scale(*k));
                }
                let minus = shifted.add(&Series::constant(order, alg.normal_order(c)?).scale_real(-1.0));
                gauss(&minus, *sigma)
            }
            Factor::Jordan { f2, d12, r } => {
                let phi = OperatorPoly::field(*f2);
                let coeffs = (0..y[0].nilpotency())
                    .map(|n| {
                        let k = eta_derivative_at_zero(n, *r) / (factorial(n) * d12.powi(n as i32));
                        Ok(alg.pow(&phi, n)?.scale(k))
                    })
                    .collect::<Result<Vec<_>>>()?;
                Series::compose(alg, &coeffs, &y[0])
            }
            Factor::Selective { window, sigma, p } => {
                let d = window_series(window, &y[0])?;
                Ok(gauss(&y[0], *sigma)?.mul(alg, &d)?.scale_real(-0.5 / p))
            }
            Factor::Locc { window, sigma } => {
                let order = y[0].order();
                let d = window_series(window, &y[0])?;
                let one = Series::one(order);
                let damp2 = gauss(&y[1], *sigma)?;
                let bracket = one.add(&one.add(&damp2.scale_real(-1.0)).mul(alg, &d)?.scale_real(0.5));
                bracket.mul(alg, &gauss(&y[0], *sigma)?)
            }
        }
    }
}
