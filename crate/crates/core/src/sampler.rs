//! Monte Carlo outcomes of Gaussian measurements of smeared fields.
//!
//! Outcomes are drawn as `α = v + ε`, with `v` a mean-zero Gaussian latent
//! vector of covariance `W_s(g_i, g_j)` and `ε_i ~ N(0, σ_i²)` independent.
//! For a quasifree state this reproduces the single-outcome density
//! exactly and every first and second moment of the joint densities, both
//! for commuting fields and for the Jordan-symmetrised convention. Higher
//! moments of the symmetrised joint density are not claimed.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::Serialize;

use crate::algebra::{wick_expectation, GaussianState, OperatorPoly};
use crate::error::{Error, Result};
use crate::maps::COMMUTE_TOL;
use crate::smearing::{LabelId, PairingTable};

/// Samples per random stream.
pub const BLOCK: usize = 4096;
/// Relative eigenvalue tolerance for accepting a covariance.
pub const PSD_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Convention {
    Commuting,
    JordanSymmetrized,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MeasurementPlan {
    entries: Vec<(LabelId, f64)>,
    convention: Convention,
}

impl MeasurementPlan {
    pub fn new(entries: Vec<(LabelId, f64)>, convention: Convention, rho: &GaussianState) -> Result<Self> {
        let t = rho.table();
        if entries.is_empty() {
            return Err(Error::Invalid("a plan needs at least one measurement".into()));
        }
        for &(l, s) in &entries {
            if l.0 >= t.len() {
                return Err(Error::UnknownLabel(format!("#{}", l.0)));
            }
            if !(s > 0.0 && s.is_finite()) {
                return Err(Error::Invalid(format!("sigma for {} must be positive", t.name(l))));
            }
        }
        if convention == Convention::Commuting {
            for (i, &(a, _)) in entries.iter().enumerate() {
                for &(b, _) in &entries[i + 1..] {
                    if t.delta(a, b).abs() > COMMUTE_TOL {
                        return Err(Error::Invalid(format!(
                            "{} and {} do not commute; use the jordan_symmetrized convention",
                            t.name(a),
                            t.name(b)
                        )));
                    }
                }
            }
        }
        Ok(Self { entries, convention })
    }

    pub fn entries(&self) -> &[(LabelId, f64)] {
        &self.entries
    }

    pub fn convention(&self) -> Convention {
        self.convention
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// `n` outcome vectors stored row by row.
#[derive(Debug, Clone, PartialEq)]
pub struct OutcomeBatch {
    pub seed: u64,
    pub k: usize,
    pub outcomes: Vec<f64>,
    pub latent: Option<Vec<f64>>,
}

impl OutcomeBatch {
    pub fn n(&self) -> usize {
        self.outcomes.len() / self.k
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.outcomes[i * self.k..(i + 1) * self.k]
    }

    pub fn column(&self, j: usize) -> impl Iterator<Item = f64> + Clone + '_ {
        self.outcomes.iter().skip(j).step_by(self.k).copied()
    }

    /// CSV with header `sample_index,alpha_1,…,alpha_k`.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let io = |e: csv::Error| Error::Invalid(format!("csv: {e}"));
        let mut wr = csv::Writer::from_writer(w);
        let mut header = vec!["sample_index".to_string()];
        header.extend((1..=self.k).map(|j| format!("alpha_{j}")));
        wr.write_record(&header).map_err(io)?;
        for i in 0..self.n() {
            let mut rec = vec![i.to_string()];
            rec.extend(self.row(i).iter().map(|v| format!("{v:e}")));
            wr.write_record(&rec).map_err(io)?;
        }
        wr.flush().map_err(|e| Error::Invalid(format!("csv: {e}")))
    }

    pub fn save_csv(&self, path: &Path) -> Result<()> {
        let f = std::fs::File::create(path).map_err(|e| Error::Invalid(format!("{}: {e}", path.display())))?;
        self.write_csv(std::io::BufWriter::new(f))
    }
}

/// Lower factor `L` with `L Lᵀ = Σ`, by Cholesky or, for a singular `Σ`,
/// by clipping tiny negative eigenvalues.
pub fn covariance_factor(sigma: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if let Some(c) = sigma.clone().cholesky() {
        return Ok(c.l());
    }
    let e = SymmetricEigen::new(sigma.clone());
    let scale = e.eigenvalues.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let min = e.eigenvalues.min();
    if min < -PSD_TOL * scale.max(f64::MIN_POSITIVE) {
        return Err(Error::NotPsd(min));
    }
    let root = DVector::from_iterator(e.eigenvalues.len(), e.eigenvalues.iter().map(|v| v.max(0.0).sqrt()));
    Ok(&e.eigenvectors * DMatrix::from_diagonal(&root))
}

/// Draws `n` outcome vectors. Sample `i` always uses stream `i / BLOCK`
/// of the seed, so the batch does not depend on the thread count.
pub fn sample_measurements(
    plan: &MeasurementPlan,
    rho: &GaussianState,
    n: usize,
    seed: u64,
    keep_latent: bool,
) -> Result<OutcomeBatch> {
    if n == 0 {
        return Err(Error::Invalid("need at least one sample".into()));
    }
    let t = rho.table();
    let k = plan.len();
    let mut cov = DMatrix::zeros(k, k);
    for (i, &(a, _)) in plan.entries.iter().enumerate() {
        for (j, &(b, _)) in plan.entries.iter().enumerate() {
            cov[(i, j)] = t.wsym(a, b).ok_or(Error::MasslessState)?;
        }
    }
    let l = covariance_factor(&cov)?;
    let sig: Vec<f64> = plan.entries.iter().map(|e| e.1).collect();
    let blocks: Vec<(Vec<f64>, Vec<f64>)> = (0..n.div_ceil(BLOCK))
        .into_par_iter()
        .map(|b| {
            let mut rng = ChaCha12Rng::seed_from_u64(seed);
            rng.set_stream(b as u64);
            let rows = BLOCK.min(n - b * BLOCK);
            let mut out = Vec::with_capacity(rows * k);
            let mut lat = Vec::with_capacity(if keep_latent { rows * k } else { 0 });
            let mut z = vec![0.0; k];
            for _ in 0..rows {
                for zi in z.iter_mut() {
                    *zi = StandardNormal.sample(&mut rng);
                }
                for i in 0..k {
                    let v: f64 = (0..k).map(|j| l[(i, j)] * z[j]).sum();
                    let eps: f64 = StandardNormal.sample(&mut rng);
                    out.push(v + sig[i] * eps);
                    if keep_latent {
                        lat.push(v);
                    }
                }
            }
            (out, lat)
        })
        .collect();
    let mut outcomes = Vec::with_capacity(n * k);
    let mut latent = keep_latent.then(|| Vec::with_capacity(n * k));
    for (o, lv) in blocks {
        outcomes.extend(o);
        if let Some(v) = latent.as_mut() {
            v.extend(lv);
        }
    }
    Ok(OutcomeBatch { seed, k, outcomes, latent })
}

/// Sample moments with standard errors `std/√n`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Estimates {
    pub n: usize,
    pub means: Vec<f64>,
    pub mean_se: Vec<f64>,
    /// `E(α_i α_j)`, row major.
    pub second: Vec<f64>,
    pub second_se: Vec<f64>,
    /// Unbiased covariances, row major.
    pub covariance: Vec<f64>,
}

impl Estimates {
    pub fn to_text(&self) -> String {
        let k = self.means.len();
        let mut s = format!("n = {}\n", self.n);
        for i in 0..k {
            s += &format!("mean_{} = {:e} +- {:e}\n", i + 1, self.means[i], self.mean_se[i]);
        }
        for i in 0..k {
            for j in i..k {
                let m = i * k + j;
                s += &format!("second_{}_{} = {:e} +- {:e}\n", i + 1, j + 1, self.second[m], self.second_se[m]);
            }
        }
        s
    }
}

fn mean_and_se(xs: impl Iterator<Item = f64> + Clone, n: usize) -> (f64, f64) {
    let nf = n as f64;
    let mean = xs.clone().sum::<f64>() / nf;
    let var = xs.map(|x| (x - mean).powi(2)).sum::<f64>() / (nf - 1.0);
    (mean, (var / nf).sqrt())
}

pub fn estimate_moments(batch: &OutcomeBatch) -> Result<Estimates> {
    let n = batch.n();
    if n < 2 {
        return Err(Error::Invalid("need at least two samples".into()));
    }
    let k = batch.k;
    let (means, mean_se): (Vec<f64>, Vec<f64>) = (0..k).map(|j| mean_and_se(batch.column(j), n)).unzip();
    let mut second = vec![0.0; k * k];
    let mut second_se = vec![0.0; k * k];
    let mut covariance = vec![0.0; k * k];
    for i in 0..k {
        for j in i..k {
            let prods = batch.column(i).zip(batch.column(j)).map(|(a, b)| a * b);
            let (m, se) = mean_and_se(prods, n);
            let c = (m - means[i] * means[j]) * n as f64 / (n as f64 - 1.0);
            for idx in [i * k + j, j * k + i] {
                second[idx] = m;
                second_se[idx] = se;
                covariance[idx] = c;
            }
        }
    }
    Ok(Estimates { n, means, mean_se, second, second_se, covariance })
}

/// Estimate of `tr(ρ φ(g₁)φ(g₂))` with the standard error of its real part.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CorrelatorEstimate {
    pub value: Complex64,
    pub se: f64,
}

/// `Ê(α·β) + (i/2)Δ(g₁,g₂)`.
pub fn recover_correlator(
    plan: &MeasurementPlan,
    rho: &GaussianState,
    n: usize,
    seed: u64,
) -> Result<CorrelatorEstimate> {
    if plan.len() != 2 || plan.convention != Convention::JordanSymmetrized {
        return Err(Error::Invalid("correlator recovery needs a jordan_symmetrized plan of two fields".into()));
    }
    let est = estimate_moments(&sample_measurements(plan, rho, n, seed, false)?)?;
    let (g1, g2) = (plan.entries[0].0, plan.entries[1].0);
    Ok(CorrelatorEstimate { value: Complex64::new(est.second[1], 0.5 * rho.table().delta(g1, g2)), se: est.second_se[1] })
}

/// `(mean(α+β) − ⟨φ(g₁)+φ(g₂)⟩) / SE` for a two-field plan.
pub fn additivity_check(plan: &MeasurementPlan, rho: &GaussianState, n: usize, seed: u64) -> Result<f64> {
    if plan.len() != 2 {
        return Err(Error::Invalid("additivity needs a plan of two fields".into()));
    }
    let batch = sample_measurements(plan, rho, n, seed, false)?;
    if batch.n() < 2 {
        return Err(Error::Invalid("need at least two samples".into()));
    }
    let sum = OperatorPoly::field(plan.entries[0].0).add(&OperatorPoly::field(plan.entries[1].0));
    let exact = wick_expectation(&sum, rho)?.re;
    let (m, se) = mean_and_se(batch.column(0).zip(batch.column(1)).map(|(a, b)| a + b), batch.n());
    if se == 0.0 {
        return Ok(if m == exact { 0.0 } else { f64::INFINITY });
    }
    Ok((m - exact) / se)
}

/// Monte Carlo estimate of `⟨P⟩_ρ` with the standard error of its real part.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PolyEstimate {
    pub value: Complex64,
    pub se: f64,
}

/// Estimates `⟨P⟩_ρ` from Gaussian measurements of every label in `P`.
///
/// Each word is rewritten as an unbiased per-sample statistic: pairs taken
/// by the commutator contribute `(i/2)Δ` in word order, and the remaining
/// outcome product is Wick-ordered against the measurement noise so that
/// its mean is the classical latent moment.
pub fn estimate_polynomial(p: &OperatorPoly, sigma: f64, rho: &GaussianState, n: usize, seed: u64) -> Result<PolyEstimate> {
    if p.has_windows() {
        return Err(Error::Unsupported("Monte Carlo estimate of a polynomial with outcome windows".into()));
    }
    if n < 2 {
        return Err(Error::Invalid("need at least two samples".into()));
    }
    let t = rho.table();
    let labels: Vec<LabelId> = p.labels(0.0).into_iter().collect();
    let mut stats: BTreeMap<Vec<usize>, Complex64> = BTreeMap::new();
    for (w, c) in p.terms() {
        let idx: Vec<usize> = w
            .iter()
            .map(|a| labels.iter().position(|l| *l == a.label()).expect("label of the polynomial"))
            .collect();
        for (f, rest) in commutator_pairings(&idx, &labels, t) {
            for (g, mono) in noise_ordering(&rest, sigma * sigma) {
                let mut mono = mono;
                mono.sort_unstable();
                *stats.entry(mono).or_default() += c * f * g;
            }
        }
    }
    if labels.is_empty() {
        return Ok(PolyEstimate { value: stats.values().sum(), se: 0.0 });
    }
    let convention = if labels.iter().any(|&a| labels.iter().any(|&b| t.delta(a, b).abs() > COMMUTE_TOL)) {
        Convention::JordanSymmetrized
    } else {
        Convention::Commuting
    };
    let plan = MeasurementPlan::new(labels.iter().map(|&l| (l, sigma)).collect(), convention, rho)?;
    let batch = sample_measurements(&plan, rho, n, seed, false)?;
    let terms: Vec<(&Vec<usize>, Complex64)> = stats.iter().map(|(m, c)| (m, *c)).collect();
    let eval = |i: usize| -> Complex64 {
        let row = batch.row(i);
        terms.iter().map(|(m, c)| c * m.iter().map(|&j| row[j]).product::<f64>()).sum()
    };
    let im = (0..n).map(|i| eval(i).im).sum::<f64>() / n as f64;
    let (re, se) = mean_and_se((0..n).map(|i| eval(i).re), n);
    Ok(PolyEstimate { value: Complex64::new(re, im), se })
}

/// Splits a word into `(iΔ/2)` pairs and the unpaired positions.
fn commutator_pairings(idx: &[usize], labels: &[LabelId], t: &PairingTable) -> Vec<(Complex64, Vec<usize>)> {
    let Some((&a, rest)) = idx.split_first() else {
        return vec![(Complex64::new(1.0, 0.0), Vec::new())];
    };
    let mut out: Vec<(Complex64, Vec<usize>)> = commutator_pairings(rest, labels, t)
        .into_iter()
        .map(|(f, mut r)| {
            r.insert(0, a);
            (f, r)
        })
        .collect();
    for j in 0..rest.len() {
        let d = t.delta(labels[a], labels[rest[j]]);
        if d == 0.0 {
            continue;
        }
        let mut remaining = rest.to_vec();
        remaining.remove(j);
        for (f, r) in commutator_pairings(&remaining, labels, t) {
            out.push((f * Complex64::new(0.0, 0.5 * d), r));
        }
    }
    out
}

/// Wick ordering of an outcome product against independent noise `σ²`.
fn noise_ordering(idx: &[usize], var: f64) -> Vec<(f64, Vec<usize>)> {
    let Some((&a, rest)) = idx.split_first() else {
        return vec![(1.0, Vec::new())];
    };
    let mut out: Vec<(f64, Vec<usize>)> = noise_ordering(rest, var)
        .into_iter()
        .map(|(f, mut r)| {
            r.push(a);
            (f, r)
        })
        .collect();
    for j in 0..rest.len() {
        if rest[j] != a {
            continue;
        }
        let mut remaining = rest.to_vec();
        remaining.remove(j);
        for (f, r) in noise_ordering(&remaining, var) {
            out.push((-var * f, r));
        }
    }
    out
}
