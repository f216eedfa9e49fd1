//! Field polynomials in normal form, Weyl jets and Gaussian expectations.
//!
//! Words are products of atoms. An atom is either a smeared field `φ(a)`
//! or a *window*: a derivative of an erf difference evaluated at a shifted
//! field, which is how the selective and LOCC maps leave their trace.

mod jet;
mod poly;
pub(crate) mod series;
mod wick;

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::smearing::LabelId;
use crate::special::erf_derivative;

pub use jet::{jet_extract, WeylJet, DEFAULT_JET_ORDER};
pub use poly::{Algebra, OperatorPoly, Strategy, DEFAULT_MAX_DEGREE};
pub use wick::{wick_expectation, GaussianState};

/// `dⁿ/dxⁿ [erf((x−hi)/√2σ) − erf((x−lo)/√2σ)]` at `x = φ(label) + shift`.
///
/// `lo` and `hi` may be infinite.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct Window {
    pub label: LabelId,
    pub lo: f64,
    pub hi: f64,
    pub sigma: f64,
    pub shift: f64,
    pub deriv: u32,
}

impl Window {
    pub fn new(label: LabelId, lo: f64, hi: f64, sigma: f64) -> Self {
        Self { label, lo, hi, sigma, shift: 0.0, deriv: 0 }
    }

    pub fn derivative(self, n: u32) -> Self {
        Self { deriv: self.deriv + n, ..self }
    }

    pub fn shifted(self, s: f64) -> Self {
        Self { shift: self.shift + s, ..self }
    }

    /// Value at a real field value `x`.
    pub fn eval(&self, x: f64) -> f64 {
        self.eval_width(x, self.sigma)
    }

    /// Mean of the window over `φ ~ N(0, var)`.
    ///
    /// Gaussian smoothing of an erf only widens it: `σ² → σ² + var`.
    pub fn gaussian_mean(&self, var: f64) -> f64 {
        self.eval_width(0.0, (self.sigma * self.sigma + var).sqrt())
    }

    fn eval_width(&self, x: f64, width: f64) -> f64 {
        let n = self.deriv as usize;
        let scale = 1.0 / (std::f64::consts::SQRT_2 * width);
        let term = |c: f64| {
            if c.is_infinite() {
                if n == 0 {
                    -c.signum()
                } else {
                    0.0
                }
            } else {
                erf_derivative(n, (x + self.shift - c) * scale) * scale.powi(n as i32)
            }
        };
        term(self.hi) - term(self.lo)
    }

    fn key_cmp(&self, o: &Self) -> Ordering {
        self.label
            .cmp(&o.label)
            .then(self.lo.total_cmp(&o.lo))
            .then(self.hi.total_cmp(&o.hi))
            .then(self.sigma.total_cmp(&o.sigma))
            .then(self.shift.total_cmp(&o.shift))
            .then(self.deriv.cmp(&o.deriv))
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub enum Atom {
    Field(LabelId),
    Window(Window),
}

impl Atom {
    pub fn label(&self) -> LabelId {
        match self {
            Atom::Field(l) => *l,
            Atom::Window(w) => w.label,
        }
    }
}

impl Ord for Atom {
    fn cmp(&self, o: &Self) -> Ordering {
        match (self, o) {
            (Atom::Field(a), Atom::Field(b)) => a.cmp(b),
            (Atom::Field(a), Atom::Window(w)) => a.cmp(&w.label).then(Ordering::Less),
            (Atom::Window(w), Atom::Field(b)) => w.label.cmp(b).then(Ordering::Greater),
            (Atom::Window(v), Atom::Window(w)) => v.key_cmp(w),
        }
    }
}

impl PartialOrd for Atom {
    fn partial_cmp(&self, o: &Self) -> Option<Ordering> {
        Some(self.cmp(o))
    }
}

impl PartialEq for Atom {
    fn eq(&self, o: &Self) -> bool {
        self.cmp(o) == Ordering::Equal
    }
}

impl Eq for Atom {}

/// A product of atoms in the order written.
pub type Word = Vec<Atom>;
