use num_complex::Complex64;

use super::{Algebra, OperatorPoly};
use crate::error::{Error, Result};
use crate::smearing::LabelId;
use crate::special::{binomial, factorial};

pub const DEFAULT_JET_ORDER: usize = 2;

/// `c(t)·e^{itφ(g)}` with `c(t) = Σ c_k t^k + O(t^{J+1})`.
#[derive(Debug, Clone, PartialEq)]
pub struct WeylJet {
    pub base: LabelId,
    pub coeffs: Vec<OperatorPoly>,
}

impl WeylJet {
    /// The bare generator `e^{itφ(g)}` to order `order`.
    pub fn new(base: LabelId, order: usize) -> Self {
        let mut coeffs = vec![OperatorPoly::zero(); order + 1];
        coeffs[0] = OperatorPoly::identity();
        Self { base, coeffs }
    }

    pub fn order(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn scale(&self, c: Complex64) -> Self {
        Self { base: self.base, coeffs: self.coeffs.iter().map(|p| p.scale(c)).collect() }
    }

    pub fn max_diff(&self, o: &Self) -> f64 {
        self.coeffs.iter().zip(&o.coeffs).map(|(a, b)| a.max_diff(b)).fold(0.0, f64::max)
    }
}

/// `(−i∂_t)^k [c(t) e^{itφ(g)}]` at `t = 0`.
pub fn jet_extract(alg: &Algebra, w: &WeylJet, k: usize) -> Result<OperatorPoly> {
    if k > w.order() {
        return Err(Error::Invalid(format!("derivative {k} exceeds jet order {}", w.order())));
    }
    let g = OperatorPoly::field(w.base);
    let mut out = OperatorPoly::zero();
    for j in 0..=k {
        if w.coeffs[j].is_zero() {
            continue;
        }
        let c = Complex64::new(0.0, -1.0).powu(j as u32) * binomial(k, j) * factorial(j);
        let tail = alg.pow(&g, k - j)?;
        out = out.add(&alg.mul(&w.coeffs[j], &tail)?.scale(c));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::smearing::PairingTable;

    fn table() -> PairingTable {
        PairingTable::from_parts(vec!["f".into(), "g".into()], vec![None; 2], vec![0.0, 0.3, -0.3, 0.0], None, 0.0)
            .unwrap()
    }

    #[test]
    fn untouched_jet_gives_powers() {
        let t = table();
        let alg = Algebra::new(&t);
        let w = WeylJet::new(LabelId(1), 2);
        let g = OperatorPoly::field(LabelId(1));
        assert_eq!(jet_extract(&alg, &w, 0).unwrap(), OperatorPoly::identity());
        assert_eq!(jet_extract(&alg, &w, 1).unwrap(), g);
        assert_eq!(jet_extract(&alg, &w, 2).unwrap(), alg.mul(&g, &g).unwrap());
        assert!(jet_extract(&alg, &w, 3).is_err());
    }

    #[test]
    fn gaussian_damping_adds_constant() {
        let t = table();
        let alg = Algebra::new(&t);
        let (d, sigma) = (0.3, 0.7);
        let mut w = WeylJet::new(LabelId(1), 2);
        w.coeffs[2] = OperatorPoly::real(-d * d / (8.0 * sigma * sigma));
        let g = OperatorPoly::field(LabelId(1));
        let want = alg.mul(&g, &g).unwrap().add(&OperatorPoly::real(d * d / (4.0 * sigma * sigma)));
        assert!(jet_extract(&alg, &w, 2).unwrap().approx_eq(&want, 1e-15));
    }

    #[test]
    fn extraction_is_linear_in_the_jet() {
        let t = table();
        let alg = Algebra::new(&t);
        let mut w = WeylJet::new(LabelId(1), 2);
        w.coeffs[1] = OperatorPoly::field(LabelId(0)).scale(Complex64::new(0.4, -1.0));
        w.coeffs[2] = OperatorPoly::real(0.25);
        let c = Complex64::new(-1.5, 0.5);
        for k in 0..=2 {
            let a = jet_extract(&alg, &w.scale(c), k).unwrap();
            let b = jet_extract(&alg, &w, k).unwrap().scale(c);
            assert!(a.approx_eq(&b, 1e-14));
        }
    }
}
