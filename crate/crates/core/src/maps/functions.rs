use num_complex::Complex64;
use rustfft::FftPlanner;

use crate::algebra::GaussianState;
use crate::error::{Error, Result};
use crate::quad::integrate_complex;
use crate::smearing::LabelId;
use crate::special::{binomial, normal_cdf};

/// Kraus profile `G` sampled on `start + k·spacing`.
#[derive(Debug, Clone, PartialEq)]
pub struct SampledKrausProfile {
    start: f64,
    spacing: f64,
    values: Vec<Complex64>,
}

impl SampledKrausProfile {
    /// Rejects profiles whose trapezoid L² norm differs from 1 by more than `1e-6`.
    pub fn new(start: f64, spacing: f64, values: Vec<Complex64>) -> Result<Self> {
        if !(spacing > 0.0) || values.len() < 2 || values.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
            return Err(Error::Invalid("profile needs a positive spacing and finite samples".into()));
        }
        let p = Self { start, spacing, values };
        let n = p.norm_sq();
        if (n - 1.0).abs() > 1e-6 {
            return Err(Error::Invalid(format!("profile is not normalised in L2: norm² = {n}")));
        }
        Ok(p)
    }

    /// `(2πσ²)^{-1/4} e^{-β²/4σ²}` on `|β| ≤ 10σ`, renormalised on the grid.
    pub fn gaussian(sigma: f64, spacing: f64) -> Result<Self> {
        let n = (10.0 * sigma / spacing).ceil() as usize;
        let start = -(n as f64) * spacing;
        let raw: Vec<Complex64> = (0..=2 * n)
            .map(|k| {
                let b = start + k as f64 * spacing;
                Complex64::new((-b * b / (4.0 * sigma * sigma)).exp(), 0.0)
            })
            .collect();
        let tmp = Self { start, spacing, values: raw };
        let s = tmp.norm_sq().sqrt();
        Self::new(start, spacing, tmp.values.iter().map(|v| v / s).collect())
    }

    pub fn start(&self) -> f64 {
        self.start
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    fn span(&self) -> f64 {
        self.spacing * (self.values.len() - 1) as f64
    }

    fn norm_sq(&self) -> f64 {
        let n = self.values.len();
        let s: f64 = self.values.iter().map(|v| v.norm_sqr()).sum();
        self.spacing * (s - 0.5 * (self.values[0].norm_sqr() + self.values[n - 1].norm_sqr()))
    }

    fn interp(&self, b: f64) -> Complex64 {
        let u = (b - self.start) / self.spacing;
        if u < 0.0 || u > (self.values.len() - 1) as f64 {
            return Complex64::default();
        }
        let i = (u.floor() as usize).min(self.values.len() - 2);
        let w = u - i as f64;
        self.values[i] * (1.0 - w) + self.values[i + 1] * w
    }

    /// Whether a shift by `t` still overlaps the grid.
    pub fn covers_shift(&self, t: f64) -> bool {
        t.abs() < self.span()
    }

    /// `H⁽ⁿ⁾(0)/n!` for `n ≤ max`, from spectral moments of the profile.
    pub fn h_taylor(&self, max: usize) -> Vec<Complex64> {
        let n = (4 * self.values.len()).next_power_of_two();
        let mut buf = self.values.clone();
        buf.resize(n, Complex64::default());
        FftPlanner::new().plan_fft_forward(n).process(&mut buf);
        let dk = 2.0 * std::f64::consts::PI / (n as f64 * self.spacing);
        let mut fact = 1.0;
        (0..=max)
            .map(|m| {
                if m > 0 {
                    fact *= m as f64;
                }
                let s: Complex64 = buf
                    .iter()
                    .enumerate()
                    .map(|(j, g)| {
                        let j = if j >= n / 2 { j as f64 - n as f64 } else { j as f64 };
                        Complex64::new(0.0, j * dk).powu(m as u32) * g.norm_sqr()
                    })
                    .sum();
                s * self.spacing / n as f64 / fact
            })
            .collect()
    }
}

/// `H(t) = ∫ G(β)* G(β+t) dβ`.
///
/// Trapezoid rule on the profile grid with the shifted profile linearly
/// interpolated; shifts past the grid give 0 (see
/// [`SampledKrausProfile::covers_shift`]).
pub fn h_function(g: &SampledKrausProfile, t: f64) -> Complex64 {
    if !g.covers_shift(t) {
        return Complex64::default();
    }
    let n = g.values.len();
    let mut s = Complex64::default();
    for (k, v) in g.values.iter().enumerate() {
        let w = if k == 0 || k == n - 1 { 0.5 } else { 1.0 };
        s += v.conj() * g.interp(g.start + k as f64 * g.spacing + t) * w;
    }
    s * g.spacing
}

/// `η(t) = (2π)^{-1/2} ∫ e^{-x²/2} e^{i(e^{-xr}-1)t} dx` over `|x| ≤ 12`.
///
/// The neglected tails weigh less than `erfc(12/√2) < 1e-32`.
pub fn eta_function(t: f64, r: f64) -> Complex64 {
    let norm = 1.0 / (2.0 * std::f64::consts::PI).sqrt();
    integrate_complex(
        |x| Complex64::from_polar((-0.5 * x * x).exp(), ((-x * r).exp() - 1.0) * t) * norm,
        -12.0,
        12.0,
        1e-14,
    )
}

/// `η⁽ᵏ⁾(0) = iᵏ Σ_j C(k,j) (−1)^{k−j} e^{j²r²/2}`.
pub fn eta_derivative_at_zero(k: usize, r: f64) -> Complex64 {
    let s: f64 = (0..=k)
        .map(|j| {
            let sign = if (k - j) % 2 == 0 { 1.0 } else { -1.0 };
            sign * binomial(k, j) * (0.5 * (j * j) as f64 * r * r).exp()
        })
        .sum();
    Complex64::new(0.0, 1.0).powu(k as u32) * s
}

/// Probability that a Gaussian measurement of `φ(f)` lands in `[a, b]`.
///
/// For a mean-zero Gaussian state the outcome is `φ(f)` plus independent
/// `N(0, σ²)` noise, so `P = Φ(b/s) − Φ(a/s)` with `s² = W_s(f,f) + σ²`.
pub fn selective_probability(f: LabelId, sigma: f64, a: f64, b: f64, rho: &GaussianState) -> Result<f64> {
    if !(sigma > 0.0) || a > b {
        return Err(Error::Invalid("need sigma > 0 and a <= b".into()));
    }
    let w = rho.table().wsym(f, f).ok_or(Error::MasslessState)?;
    let s = (w + sigma * sigma).sqrt();
    Ok((normal_cdf(b / s) - normal_cdf(a / s)).max(0.0))
}

/// `Σ_n 1_{A_n}(λ) 1_{A_n}(λ+s)` for bins `A_n = [nw, (n+1)w)`.
pub fn bin_overlap_profile(w: f64, s: f64, lambda: f64) -> u8 {
    u8::from((lambda / w).floor() == ((lambda + s) / w).floor())
}
