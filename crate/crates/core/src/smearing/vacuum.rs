use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;

use super::{BumpKind, BumpSpec, QuadratureConfig, SmearingFunction};
use crate::error::{Error, Result};
use crate::quad::gauss_legendre;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CovarianceEstimate {
    pub value: f64,
    /// Momentum cutoff `|k| <= cutoff`.
    pub cutoff: f64,
    /// Bound on the discarded tail; `None` for grid-sampled inputs.
    pub tail_bound: Option<f64>,
}

struct Rule {
    x: Vec<f64>,
    w: Vec<f64>,
}

impl Rule {
    fn new(n: usize) -> Self {
        let (x, w) = gauss_legendre(n);
        Self { x, w }
    }

    fn integrate(&self, f: impl Fn(f64) -> f64, a: f64, b: f64, panels: usize) -> f64 {
        let h = (b - a) / panels as f64;
        let mut s = 0.0;
        for p in 0..panels {
            let c = a + (p as f64 + 0.5) * h;
            for (x, w) in self.x.iter().zip(&self.w) {
                s += w * f(c + 0.5 * h * x);
            }
        }
        0.5 * h * s
    }
}

/// `∫ profile(s) e^{iκs} ds` over `[-w, w]`; real because profiles are even.
fn profile_transform(b: &BumpSpec, kappa: f64, rule: &Rule) -> f64 {
    let w = b.half_width;
    let numeric = |rule: &Rule| {
        let panels = 4 + (kappa.abs() * w / 2.0).ceil() as usize;
        rule.integrate(|s| b.profile(s) * (kappa * s).cos(), -w, w, panels)
    };
    match b.kind {
        BumpKind::CosineBump => {
            let p2 = (PI / w).powi(2);
            let near = (kappa * w).abs() < 1e-2 || ((kappa * kappa - p2) / p2).abs() < 1e-2;
            if near {
                numeric(rule)
            } else {
                (kappa * w).sin() * p2 / (kappa * (p2 - kappa * kappa))
            }
        }
        BumpKind::TruncatedGaussian => numeric(rule),
    }
}

/// Mass-shell Fourier transform `F(ω, k) = ∫ f(t, x) e^{i(ωt - kx)}`.
fn shell_transform(f: &SmearingFunction, omega: f64, k: f64, rule: &Rule) -> Complex64 {
    match f {
        SmearingFunction::Bump(b) => {
            let phase = Complex64::from_polar(1.0, omega * b.center.t - k * b.center.x);
            phase * (b.amplitude * profile_transform(b, omega, rule) * profile_transform(b, k, rule))
        }
        SmearingFunction::Sampled(s) => {
            let h = s.spacing;
            let mut total = Complex64::new(0.0, 0.0);
            for i in 0..s.nt {
                let row = &s.values[i * s.nx..(i + 1) * s.nx];
                if row.iter().all(|&v| v == 0.0) {
                    continue;
                }
                let mut acc = Complex64::new(0.0, 0.0);
                for (j, &v) in row.iter().enumerate() {
                    if v != 0.0 {
                        acc += v * Complex64::from_polar(1.0, -k * (s.origin.x + j as f64 * h));
                    }
                }
                total += acc * Complex64::from_polar(1.0, omega * (s.origin.t + i as f64 * h));
            }
            total * h * h
        }
    }
}

/// Power-law envelope `C k^{-p}` of `|F(ω_k, k)|` beyond `k`.
fn envelope(f: &SmearingFunction, k: f64) -> Option<(f64, i32)> {
    match f {
        SmearingFunction::Bump(b) => {
            let w = b.half_width;
            let a = b.amplitude.abs();
            match b.kind {
                BumpKind::CosineBump => {
                    let p2 = (PI / w).powi(2);
                    if k * k <= 2.0 * p2 {
                        return None;
                    }
                    let c = p2 * k * k / (k * k - p2);
                    Some((a * c * c, 6))
                }
                BumpKind::TruncatedGaussian => Some((4.0 * a, 2)),
            }
        }
        SmearingFunction::Sampled(_) => None,
    }
}

fn tail(f: &SmearingFunction, g: &SmearingFunction, k: f64) -> Option<f64> {
    let (cf, pf) = envelope(f, k)?;
    let (cg, pg) = envelope(g, k)?;
    let p = (pf + pg) as f64;
    Some(cf * cg * k.powf(-p) / (2.0 * PI * p))
}

fn extent(f: &SmearingFunction) -> (f64, f64, f64) {
    match f {
        SmearingFunction::Bump(b) => (b.center.t, b.center.x, b.half_width),
        SmearingFunction::Sampled(s) => {
            let r = s.support().unwrap_or(crate::geometry::Rect {
                t_lo: s.origin.t,
                t_hi: s.origin.t + s.spacing,
                x_lo: s.origin.x,
                x_hi: s.origin.x + s.spacing,
            });
            let w = 0.5 * (r.t_hi - r.t_lo).max(r.x_hi - r.x_lo);
            (0.5 * (r.t_lo + r.t_hi), 0.5 * (r.x_lo + r.x_hi), w)
        }
    }
}

/// Symmetric vacuum two-point function
/// `W_s(f, g) = Re ∫ dk/(4πω) F(ω,k)* G(ω,k)`, `ω = √(k² + m²)`.
///
/// The cutoff grows until the analytic tail bound drops below `q.tol·1e-3`;
/// grid-sampled inputs integrate up to their Nyquist momentum instead.
pub fn vacuum_covariance(
    f: &SmearingFunction,
    g: &SmearingFunction,
    m: f64,
    q: &QuadratureConfig,
) -> Result<CovarianceEstimate> {
    if !(m > 0.0) {
        return Err(Error::InfraredDivergent(m));
    }
    q.validate()?;
    let (tf, xf, wf) = extent(f);
    let (tg, xg, wg) = extent(g);
    let target = q.tol * 1e-3;
    let (cutoff, tail_bound) = match (f, g) {
        (SmearingFunction::Sampled(s), _) | (_, SmearingFunction::Sampled(s)) => (PI / s.spacing, None),
        _ => {
            let mut k = 8.0 * PI / wf.min(wg);
            loop {
                let t = tail(f, g, k).unwrap_or(f64::INFINITY);
                if t < target || k > 1e5 {
                    break (k, Some(t));
                }
                k *= 1.5;
            }
        }
    };
    // panel width resolves the slowest oscillation of the integrand
    let rate = (tf - tg).abs() + (xf - xg).abs() + 2.0 * (wf + wg) + 1.0;
    let panels = ((2.0 * cutoff * rate) / 1.5).ceil() as usize;
    let pw = 2.0 * cutoff / panels as f64;
    let outer = Rule::new(16);
    let value: f64 = (0..panels)
        .into_par_iter()
        .map_init(
            || Rule::new(16),
            |inner, p| {
                let c = -cutoff + (p as f64 + 0.5) * pw;
                let mut s = 0.0;
                for (x, w) in outer.x.iter().zip(&outer.w) {
                    let k = c + 0.5 * pw * x;
                    let om = (k * k + m * m).sqrt();
                    let ff = shell_transform(f, om, k, inner);
                    let gg = shell_transform(g, om, k, inner);
                    s += w * (ff.conj() * gg).re / (4.0 * PI * om);
                }
                0.5 * pw * s
            },
        )
        .sum();
    Ok(CovarianceEstimate { value, cutoff, tail_bound })
}

/// Imaginary part of the same mass-shell integral.
#[cfg(test)]
pub(crate) fn shell_commutator(f: &SmearingFunction, g: &SmearingFunction, m: f64, cutoff: f64) -> f64 {
    let rule = Rule::new(16);
    let panels = (cutoff * 40.0) as usize;
    let pw = 2.0 * cutoff / panels as f64;
    let mut total = 0.0;
    for p in 0..panels {
        let c = -cutoff + (p as f64 + 0.5) * pw;
        for (x, w) in rule.x.iter().zip(&rule.w) {
            let k = c + 0.5 * pw * x;
            let om = (k * k + m * m).sqrt();
            let v = shell_transform(f, om, k, &rule).conj() * shell_transform(g, om, k, &rule);
            total += 0.5 * pw * w * v.im / (4.0 * PI * om);
        }
    }
    total
}
