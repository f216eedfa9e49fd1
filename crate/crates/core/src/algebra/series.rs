//! Truncated series in square-free scalars `s_1..s_n` and a jet variable `t`.

use std::collections::BTreeMap;

use num_complex::Complex64;

use super::{Algebra, OperatorPoly};
use crate::error::Result;
use crate::special::factorial;

/// Monomial `Π_{i∈mask} s_i · t^j`, keyed as `(mask, j)`.
#[derive(Debug, Clone)]
pub(crate) struct Series {
    order: usize,
    terms: BTreeMap<(u32, usize), OperatorPoly>,
}

impl Series {
    pub fn zero(order: usize) -> Self {
        Self { order, terms: BTreeMap::new() }
    }

    pub fn constant(order: usize, p: OperatorPoly) -> Self {
        let mut s = Self::zero(order);
        s.insert(0, 0, p);
        s
    }

    pub fn one(order: usize) -> Self {
        Self::constant(order, OperatorPoly::identity())
    }

    /// `Σ a_i s_i + b t`.
    pub fn linear(order: usize, a: &[f64], b: f64) -> Self {
        let mut s = Self::zero(order);
        for (i, &c) in a.iter().enumerate() {
            s.insert(1 << i, 0, OperatorPoly::real(c));
        }
        if order >= 1 {
            s.insert(0, 1, OperatorPoly::real(b));
        }
        s
    }

    fn insert(&mut self, mask: u32, j: usize, p: OperatorPoly) {
        if j > self.order || p.is_zero() {
            return;
        }
        let e = self.terms.entry((mask, j)).or_default();
        *e = e.add(&p);
        if e.is_zero() {
            self.terms.remove(&(mask, j));
        }
    }

    pub fn terms(&self) -> impl Iterator<Item = (&(u32, usize), &OperatorPoly)> {
        self.terms.iter()
    }

    pub fn constant_term(&self) -> OperatorPoly {
        self.terms.get(&(0, 0)).cloned().unwrap_or_default()
    }

    pub fn order(&self) -> usize {
        self.order
    }

    /// Powers of a series without constant term vanish from this exponent on.
    pub fn nilpotency(&self) -> usize {
        let vars = self.terms.keys().fold(0u32, |m, (k, _)| m | k).count_ones() as usize;
        vars + self.order + 1
    }

    pub fn add(&self, o: &Self) -> Self {
        let mut r = self.clone();
        for (&(m, j), p) in &o.terms {
            r.insert(m, j, p.clone());
        }
        r
    }

    pub fn scale(&self, c: Complex64) -> Self {
        Self { order: self.order, terms: self.terms.iter().map(|(k, p)| (*k, p.scale(c))).filter(|(_, p)| !p.is_zero()).collect() }
    }

    pub fn scale_real(&self, c: f64) -> Self {
        self.scale(Complex64::new(c, 0.0))
    }

    /// Left multiplication of every coefficient by `p`.
    pub fn lmul_poly(&self, alg: &Algebra, p: &OperatorPoly) -> Result<Self> {
        Self::constant(self.order, p.clone()).mul(alg, self)
    }

    pub fn mul(&self, alg: &Algebra, o: &Self) -> Result<Self> {
        let mut r = Self::zero(self.order.min(o.order));
        for (&(ma, ja), pa) in &self.terms {
            for (&(mb, jb), pb) in &o.terms {
                if ma & mb != 0 || ja + jb > r.order {
                    continue;
                }
                r.insert(ma | mb, ja + jb, alg.mul(pa, pb)?);
            }
        }
        Ok(r)
    }

    /// `Σ_n c_n xⁿ` for operator coefficients `c_n`, placed on the left.
    pub fn compose(alg: &Algebra, coeffs: &[OperatorPoly], x: &Self) -> Result<Self> {
        let mut r = Self::zero(x.order);
        let mut pow = Self::one(x.order);
        for (n, c) in coeffs.iter().enumerate() {
            if n > 0 {
                pow = pow.mul(alg, x)?;
            }
            if !c.is_zero() {
                r = r.add(&pow.lmul_poly(alg, c)?);
            }
        }
        Ok(r)
    }

    /// `exp(x)` for a series without constant term.
    pub fn exp(alg: &Algebra, x: &Self) -> Result<Self> {
        assert!(x.constant_term().is_zero(), "exp needs a nilpotent argument");
        let coeffs: Vec<OperatorPoly> = (0..x.nilpotency()).map(|n| OperatorPoly::real(1.0 / factorial(n))).collect();
        Self::compose(alg, &coeffs, x)
    }
}
