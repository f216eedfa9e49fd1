use num_complex::Complex64;

use super::{Atom, OperatorPoly, Window};
use crate::error::{Error, Result};
use crate::smearing::{LabelId, PairingTable};

/// Mean-zero quasifree state with `⟨φ(a)φ(b)⟩ = W_s(a,b) + (i/2)Δ(a,b)`.
#[derive(Debug, Clone, Copy)]
pub struct GaussianState<'a> {
    table: &'a PairingTable,
}

impl<'a> GaussianState<'a> {
    pub fn new(table: &'a PairingTable) -> Result<Self> {
        if !table.has_wsym() {
            return Err(Error::MasslessState);
        }
        Ok(Self { table })
    }

    pub fn table(&self) -> &'a PairingTable {
        self.table
    }

    pub fn two_point(&self, a: LabelId, b: LabelId) -> Complex64 {
        self.table.omega(a, b).expect("state tables carry W_s")
    }
}

/// Expectation of a polynomial in a Gaussian state.
///
/// Field-only words use the pairing sum in word order. A word with one
/// window `F(φ(b))` pairs fields among themselves or attaches them to the
/// window; `m` attached fields contribute `⟨F⁽ᵐ⁾(φ(b))⟩` times one
/// two-point factor each, ordered by their side of the window.
pub fn wick_expectation(p: &OperatorPoly, rho: &GaussianState) -> Result<Complex64> {
    let mut total = Complex64::default();
    for (w, c) in p.terms() {
        total += c * word_expectation(w, rho)?;
    }
    Ok(total)
}

fn word_expectation(w: &[Atom], rho: &GaussianState) -> Result<Complex64> {
    let windows: Vec<usize> = w.iter().enumerate().filter(|(_, a)| matches!(a, Atom::Window(_))).map(|(i, _)| i).collect();
    let fields: Vec<(usize, LabelId)> =
        w.iter().enumerate().filter_map(|(i, a)| if let Atom::Field(l) = a { Some((i, *l)) } else { None }).collect();
    match windows.as_slice() {
        [] => Ok(pairings(&fields, None, rho).into_iter().map(|(v, _)| v).sum()),
        [k] => {
            let Atom::Window(win) = w[*k] else { unreachable!() };
            let var = rho.table.wsym(win.label, win.label).ok_or(Error::MasslessState)?;
            let mut s = Complex64::default();
            for (v, m) in pairings(&fields, Some((*k, win)), rho) {
                s += v * win.derivative(m as u32).gaussian_mean(var);
            }
            Ok(s)
        }
        _ => Err(Error::Unsupported("expectation of a word with several windows".into())),
    }
}

/// Pairing sums, tagged with the number of fields attached to the window.
fn pairings(fields: &[(usize, LabelId)], window: Option<(usize, Window)>, rho: &GaussianState) -> Vec<(Complex64, usize)> {
    let Some((&(pos, a), rest)) = fields.split_first() else {
        return vec![(Complex64::new(1.0, 0.0), 0)];
    };
    let mut out = Vec::new();
    if let Some((wpos, win)) = window {
        let factor = if pos < wpos { rho.two_point(a, win.label) } else { rho.two_point(win.label, a) };
        for (v, m) in pairings(rest, window, rho) {
            out.push((factor * v, m + 1));
        }
    }
    for j in 0..rest.len() {
        let factor = rho.two_point(a, rest[j].1);
        let mut remaining = rest.to_vec();
        remaining.remove(j);
        for (v, m) in pairings(&remaining, window, rho) {
            out.push((factor * v, m));
        }
    }
    out
}
