use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use num_complex::Complex64;

use super::{Atom, Window, Word};
use crate::error::{Error, Result};
use crate::smearing::{LabelId, PairingTable};

pub const DEFAULT_MAX_DEGREE: usize = 4;

const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };

/// Finite sum of words with complex coefficients.
///
/// Values produced by [`Algebra`] are in canonical order: every word is
/// sorted by label, fields before windows.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct OperatorPoly {
    terms: BTreeMap<Word, Complex64>,
}

impl OperatorPoly {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn identity() -> Self {
        Self::scalar(Complex64::new(1.0, 0.0))
    }

    pub fn scalar(c: Complex64) -> Self {
        Self::term(Vec::new(), c)
    }

    pub fn real(c: f64) -> Self {
        Self::scalar(Complex64::new(c, 0.0))
    }

    pub fn field(a: LabelId) -> Self {
        Self::term(vec![Atom::Field(a)], Complex64::new(1.0, 0.0))
    }

    pub fn window(w: Window) -> Self {
        Self::term(vec![Atom::Window(w)], Complex64::new(1.0, 0.0))
    }

    /// A single word, kept in the order given.
    pub fn term(word: Word, c: Complex64) -> Self {
        let mut p = Self::zero();
        p.push(word, c);
        p
    }

    pub(crate) fn push(&mut self, word: Word, c: Complex64) {
        let zero = Complex64::default();
        if c == zero {
            return;
        }
        match self.terms.get_mut(&word) {
            Some(e) => {
                *e += c;
                if *e == zero {
                    self.terms.remove(&word);
                }
            }
            None => {
                self.terms.insert(word, c);
            }
        }
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Word, &Complex64)> {
        self.terms.iter()
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn degree(&self) -> usize {
        self.terms.keys().map(Vec::len).max().unwrap_or(0)
    }

    /// Coefficient of `word` as stored.
    pub fn coeff(&self, word: &[Atom]) -> Complex64 {
        self.terms.get(word).copied().unwrap_or_default()
    }

    /// Coefficient of the identity.
    pub fn constant(&self) -> Complex64 {
        self.coeff(&[])
    }

    /// Labels of every atom with a coefficient above `tol` in magnitude.
    pub fn labels(&self, tol: f64) -> BTreeSet<LabelId> {
        self.terms
            .iter()
            .filter(|(_, c)| c.norm() > tol)
            .flat_map(|(w, _)| w.iter().map(Atom::label))
            .collect()
    }

    pub fn has_windows(&self) -> bool {
        self.terms.keys().any(|w| w.iter().any(|a| matches!(a, Atom::Window(_))))
    }

    pub fn add(&self, o: &Self) -> Self {
        let mut r = self.clone();
        for (w, c) in &o.terms {
            r.push(w.clone(), *c);
        }
        r
    }

    pub fn sub(&self, o: &Self) -> Self {
        self.add(&o.scale(Complex64::new(-1.0, 0.0)))
    }

    pub fn scale(&self, c: Complex64) -> Self {
        let mut r = Self::zero();
        for (w, v) in &self.terms {
            r.push(w.clone(), v * c);
        }
        r
    }

    /// Drops terms with coefficient magnitude at most `tol`.
    pub fn prune(&self, tol: f64) -> Self {
        Self { terms: self.terms.iter().filter(|(_, c)| c.norm() > tol).map(|(w, c)| (w.clone(), *c)).collect() }
    }

    /// Largest coefficient difference over the union of words.
    pub fn max_diff(&self, o: &Self) -> f64 {
        let keys: BTreeSet<&Word> = self.terms.keys().chain(o.terms.keys()).collect();
        keys.into_iter().map(|w| (self.coeff(w) - o.coeff(w)).norm()).fold(0.0, f64::max)
    }

    pub fn approx_eq(&self, o: &Self, tol: f64) -> bool {
        self.max_diff(o) <= tol
    }

    /// Human-readable form using the table's names.
    pub fn display<'a>(&'a self, table: &'a PairingTable) -> impl fmt::Display + 'a {
        PolyDisplay { p: self, table }
    }
}

struct PolyDisplay<'a> {
    p: &'a OperatorPoly,
    table: &'a PairingTable,
}

impl fmt::Display for PolyDisplay<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.p.is_zero() {
            return write!(f, "0");
        }
        for (k, (w, c)) in self.p.terms.iter().enumerate() {
            if k > 0 {
                write!(f, " + ")?;
            }
            if c.im == 0.0 {
                write!(f, "{}", c.re)?;
            } else {
                write!(f, "({}{:+}i)", c.re, c.im)?;
            }
            for a in w {
                match a {
                    Atom::Field(l) => write!(f, "·phi({})", self.table.name(*l))?,
                    Atom::Window(v) => write!(
                        f,
                        "·D{}[{}; {}, {}, {}]({} {:+})",
                        v.deriv,
                        self.table.name(v.label),
                        v.lo,
                        v.hi,
                        v.sigma,
                        self.table.name(v.label),
                        v.shift
                    )?,
                }
            }
        }
        Ok(())
    }
}

/// Which out-of-order pair a normal-ordering pass rewrites first.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Strategy {
    LeftmostFirst,
    RightmostFirst,
}

/// CCR rewriting and products against a fixed pairing table.
#[derive(Debug, Clone, Copy)]
pub struct Algebra<'a> {
    table: &'a PairingTable,
    max_degree: usize,
}

impl<'a> Algebra<'a> {
    pub fn new(table: &'a PairingTable) -> Self {
        Self { table, max_degree: DEFAULT_MAX_DEGREE }
    }

    pub fn with_max_degree(table: &'a PairingTable, max_degree: usize) -> Self {
        Self { table, max_degree }
    }

    pub fn table(&self) -> &'a PairingTable {
        self.table
    }

    pub fn max_degree(&self) -> usize {
        self.max_degree
    }

    fn check_labels(&self, w: &[Atom]) -> Result<()> {
        for a in w {
            if a.label().0 >= self.table.len() {
                return Err(Error::UnknownLabel(format!("#{}", a.label().0)));
            }
        }
        Ok(())
    }

    /// `x·y − y·x` for adjacent atoms, as a coefficient and at most one atom.
    fn commutator(&self, x: &Atom, y: &Atom) -> Result<Option<(Complex64, Option<Atom>)>> {
        let d = self.table.delta(x.label(), y.label());
        Ok(match (x, y) {
            (Atom::Field(_), Atom::Field(_)) => (d != 0.0).then_some((I * d, None)),
            (Atom::Field(_), Atom::Window(w)) => (d != 0.0).then_some((I * d, Some(Atom::Window(w.derivative(1))))),
            (Atom::Window(w), Atom::Field(_)) => (d != 0.0).then_some((I * d, Some(Atom::Window(w.derivative(1))))),
            (Atom::Window(_), Atom::Window(_)) => {
                if d != 0.0 {
                    return Err(Error::Unsupported(
                        "product of windows on non-commuting fields".into(),
                    ));
                }
                None
            }
        })
    }

    /// Normal form of one word using the given rewrite order.
    pub fn normal_order_word(&self, word: &[Atom], strategy: Strategy) -> Result<OperatorPoly> {
        self.check_labels(word)?;
        if word.len() > self.max_degree {
            return Err(Error::DegreeBound { degree: word.len(), bound: self.max_degree });
        }
        let mut out = OperatorPoly::zero();
        let mut stack = vec![(word.to_vec(), Complex64::new(1.0, 0.0))];
        while let Some((w, c)) = stack.pop() {
            let mut bad = (0..w.len().saturating_sub(1)).filter(|&i| w[i] > w[i + 1]);
            let pos = match strategy {
                Strategy::LeftmostFirst => bad.next(),
                Strategy::RightmostFirst => bad.last(),
            };
            let Some(i) = pos else {
                out.push(w, c);
                continue;
            };
            if let Some((k, atom)) = self.commutator(&w[i], &w[i + 1])? {
                let mut shorter = w[..i].to_vec();
                shorter.extend(atom);
                shorter.extend_from_slice(&w[i + 2..]);
                stack.push((shorter, c * k));
            }
            let mut swapped = w;
            swapped.swap(i, i + 1);
            stack.push((swapped, c));
        }
        Ok(out)
    }

    pub fn normal_order(&self, p: &OperatorPoly) -> Result<OperatorPoly> {
        let mut out = OperatorPoly::zero();
        for (w, c) in p.terms() {
            out = out.add(&self.normal_order_word(w, Strategy::LeftmostFirst)?.scale(*c));
        }
        Ok(out)
    }

    pub fn mul(&self, a: &OperatorPoly, b: &OperatorPoly) -> Result<OperatorPoly> {
        let mut out = OperatorPoly::zero();
        for (wa, ca) in a.terms() {
            for (wb, cb) in b.terms() {
                let mut w = wa.clone();
                w.extend_from_slice(wb);
                out = out.add(&self.normal_order_word(&w, Strategy::LeftmostFirst)?.scale(ca * cb));
            }
        }
        Ok(out)
    }

    pub fn pow(&self, a: &OperatorPoly, n: usize) -> Result<OperatorPoly> {
        let mut r = OperatorPoly::identity();
        for _ in 0..n {
            r = self.mul(&r, a)?;
        }
        Ok(r)
    }

    /// Symmetric product `½(ab + ba)`.
    pub fn jordan(&self, a: &OperatorPoly, b: &OperatorPoly) -> Result<OperatorPoly> {
        Ok(self.mul(a, b)?.add(&self.mul(b, a)?).scale(Complex64::new(0.5, 0.0)))
    }

    /// Substitutes `φ(a) → φ(a) + λΔ(a,f)` in every atom.
    ///
    /// This is conjugation by `e^{iλφ(f)}`.
    pub fn shift_labels(&self, p: &OperatorPoly, f: LabelId, lambda: f64) -> Result<OperatorPoly> {
        let mut out = OperatorPoly::zero();
        for (w, c) in p.terms() {
            self.check_labels(w)?;
            let mut partial = vec![(Vec::new(), *c)];
            for a in w {
                let s = lambda * self.table.delta(a.label(), f);
                let mut next = Vec::with_capacity(partial.len() * 2);
                for (pw, pc) in partial {
                    match a {
                        Atom::Field(_) => {
                            if s != 0.0 {
                                next.push((pw.clone(), pc * s));
                            }
                            let mut keep = pw;
                            keep.push(*a);
                            next.push((keep, pc));
                        }
                        Atom::Window(win) => {
                            let mut keep = pw;
                            keep.push(Atom::Window(win.shifted(s)));
                            next.push((keep, pc));
                        }
                    }
                }
                partial = next;
            }
            for (pw, pc) in partial {
                out = out.add(&self.normal_order_word(&pw, Strategy::LeftmostFirst)?.scale(pc));
            }
        }
        Ok(out)
    }
}
