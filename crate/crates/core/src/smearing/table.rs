use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{delta_bilinear, vacuum_covariance, DeltaKernel, QuadratureConfig, SmearingFunction};
use crate::error::{Error, Result};
use crate::geometry::RegionSet;

/// Index of a registered smearing function.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct LabelId(pub usize);

/// Δ and `W_s` over a fixed set of registered functions.
#[derive(Debug, Clone)]
pub struct PairingTable {
    names: Vec<String>,
    supports: Vec<Option<RegionSet>>,
    delta: Vec<f64>,
    wsym: Option<Vec<f64>>,
    mass: f64,
}

impl PairingTable {
    /// Computes every pairing by quadrature. `W_s` is filled only for `mass > 0`.
    pub fn build(
        entries: &[(String, SmearingFunction)],
        mass: f64,
        q: &QuadratureConfig,
    ) -> Result<Self> {
        let n = entries.len();
        let pairs: Vec<(usize, usize)> = (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))).collect();
        let kernel = DeltaKernel { mass };
        let deltas: Vec<f64> = pairs
            .par_iter()
            .map(|&(i, j)| delta_bilinear(&entries[i].1, &entries[j].1, kernel, q))
            .collect::<Result<_>>()?;
        let mut delta = vec![0.0; n * n];
        for (&(i, j), d) in pairs.iter().zip(deltas) {
            delta[i * n + j] = d;
            delta[j * n + i] = -d;
        }
        let wsym = if mass > 0.0 {
            let upper: Vec<(usize, usize)> = (0..n).flat_map(|i| (i..n).map(move |j| (i, j))).collect();
            let vals: Vec<f64> = upper
                .par_iter()
                .map(|&(i, j)| vacuum_covariance(&entries[i].1, &entries[j].1, mass, q).map(|c| c.value))
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
        let names = entries.iter().map(|(n, _)| n.clone()).collect();
        let supports = entries.iter().map(|(_, f)| f.support_region()).collect();
        let t = Self { names, supports, delta, wsym, mass };
        t.check_uncertainty(1e-6)?;
        Ok(t)
    }

    /// Table from given matrices (row-major, `n × n`).
    pub fn from_parts(
        names: Vec<String>,
        supports: Vec<Option<RegionSet>>,
        delta: Vec<f64>,
        wsym: Option<Vec<f64>>,
        mass: f64,
    ) -> Result<Self> {
        let n = names.len();
        if supports.len() != n || delta.len() != n * n || wsym.as_ref().is_some_and(|w| w.len() != n * n) {
            return Err(Error::Invalid("pairing table dimensions disagree".into()));
        }
        for i in 0..n {
            for j in 0..n {
                if delta[i * n + j] != -delta[j * n + i] {
                    return Err(Error::Invalid("delta must be antisymmetric".into()));
                }
                if let Some(w) = &wsym {
                    if w[i * n + j] != w[j * n + i] || w[i * n + i] < 0.0 {
                        return Err(Error::Invalid("wsym must be symmetric with nonnegative diagonal".into()));
                    }
                }
            }
        }
        Ok(Self { names, supports, delta, wsym, mass })
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn mass(&self) -> f64 {
        self.mass
    }

    pub fn id(&self, name: &str) -> Result<LabelId> {
        self.names
            .iter()
            .position(|n| n == name)
            .map(LabelId)
            .ok_or_else(|| Error::UnknownLabel(name.to_string()))
    }

    pub fn name(&self, id: LabelId) -> &str {
        &self.names[id.0]
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn support(&self, id: LabelId) -> Option<&RegionSet> {
        self.supports[id.0].as_ref()
    }

    pub fn delta(&self, a: LabelId, b: LabelId) -> f64 {
        self.delta[a.0 * self.len() + b.0]
    }

    pub fn wsym(&self, a: LabelId, b: LabelId) -> Option<f64> {
        self.wsym.as_ref().map(|w| w[a.0 * self.len() + b.0])
    }

    pub fn has_wsym(&self) -> bool {
        self.wsym.is_some()
    }

    /// Ordered two-point function `⟨φ(a)φ(b)⟩ = W_s(a,b) + (i/2)Δ(a,b)`.
    pub fn omega(&self, a: LabelId, b: LabelId) -> Result<Complex64> {
        let w = self.wsym(a, b).ok_or(Error::MasslessState)?;
        Ok(Complex64::new(w, 0.5 * self.delta(a, b)))
    }

    /// Same table with every Δ multiplied by `c`.
    pub fn with_scaled_delta(&self, c: f64) -> Self {
        Self { delta: self.delta.iter().map(|d| d * c).collect(), ..self.clone() }
    }

    /// Smallest eigenvalue of the Hermitian matrix `W_s + (i/2)Δ`.
    pub fn uncertainty_margin(&self) -> Option<f64> {
        let w = self.wsym.as_ref()?;
        let n = self.len();
        // real embedding [[A, -B], [B, A]] of A + iB
        let m = DMatrix::from_fn(2 * n, 2 * n, |r, c| {
            let (i, j) = (r % n, c % n);
            let a = w[i * n + j];
            let b = 0.5 * self.delta[i * n + j];
            match (r < n, c < n) {
                (true, true) | (false, false) => a,
                (true, false) => -b,
                (false, true) => b,
            }
        });
        Some(m.symmetric_eigenvalues().min())
    }

    fn check_uncertainty(&self, rel: f64) -> Result<()> {
        let Some(min) = self.uncertainty_margin() else { return Ok(()) };
        let w = self.wsym.as_ref().expect("margin implies wsym");
        let scale = (0..self.len()).map(|i| w[i * self.len() + i]).fold(0.0, f64::max);
        if min < -rel * scale.max(1e-300) {
            return Err(Error::NotPsd(min));
        }
        Ok(())
    }
}
