//! Test functions, the Pauli-Jordan kernel and vacuum covariances.

mod bilinear;
mod sampled;
mod table;
mod vacuum;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Point, Rect, RegionSet};
use crate::special::bessel_j0;

pub use bilinear::{delta_bilinear, delta_bilinear_levels, sample_function, DeltaEstimate};
pub use sampled::SampledFunction;
pub use table::{LabelId, PairingTable};
pub use vacuum::{vacuum_covariance, CovarianceEstimate};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BumpKind {
    /// `exp(-r²/2τ²)` with `τ = half_width / 3`, cut at the square edge.
    TruncatedGaussian,
    /// Product of `cos²(π s / 2w)` profiles; C¹ at the edge.
    CosineBump,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BumpSpec {
    pub center: Point,
    pub half_width: f64,
    pub amplitude: f64,
    pub kind: BumpKind,
}

impl BumpSpec {
    pub fn cosine(t: f64, x: f64, half_width: f64) -> Self {
        Self {
            center: Point::new(t, x),
            half_width,
            amplitude: 1.0,
            kind: BumpKind::CosineBump,
        }
    }

    pub fn with_amplitude(mut self, a: f64) -> Self {
        self.amplitude = a;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.half_width > 0.0 && self.half_width.is_finite()) || !self.amplitude.is_finite() {
            return Err(Error::Invalid(format!("bad bump {self:?}")));
        }
        Ok(())
    }

    pub fn support(&self) -> Rect {
        let w = self.half_width;
        Rect {
            t_lo: self.center.t - w,
            t_hi: self.center.t + w,
            x_lo: self.center.x - w,
            x_hi: self.center.x + w,
        }
    }

    pub(crate) fn profile(&self, s: f64) -> f64 {
        let w = self.half_width;
        if s.abs() > w {
            return 0.0;
        }
        match self.kind {
            BumpKind::CosineBump => 0.5 * (1.0 + (std::f64::consts::PI * s / w).cos()),
            BumpKind::TruncatedGaussian => {
                let tau = w / 3.0;
                (-0.5 * s * s / (tau * tau)).exp()
            }
        }
    }
}

pub fn eval_bump(spec: &BumpSpec, p: Point) -> f64 {
    spec.amplitude * spec.profile(p.t - spec.center.t) * spec.profile(p.x - spec.center.x)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum SmearingFunction {
    Bump(BumpSpec),
    Sampled(SampledFunction),
}

impl SmearingFunction {
    pub fn eval(&self, p: Point) -> f64 {
        match self {
            Self::Bump(b) => eval_bump(b, p),
            Self::Sampled(s) => s.value_at(p),
        }
    }

    /// Closed support rectangle (bounding box of nonzero samples for grids).
    pub fn support(&self) -> Option<Rect> {
        match self {
            Self::Bump(b) => Some(b.support()),
            Self::Sampled(s) => s.support(),
        }
    }

    pub fn support_region(&self) -> Option<RegionSet> {
        self.support().map(RegionSet::single)
    }

    pub fn scaled(&self, a: f64) -> Self {
        match self {
            Self::Bump(b) => Self::Bump(b.with_amplitude(b.amplitude * a)),
            Self::Sampled(s) => Self::Sampled(s.map(|v| a * v)),
        }
    }
}

impl From<BumpSpec> for SmearingFunction {
    fn from(b: BumpSpec) -> Self {
        Self::Bump(b)
    }
}

impl From<SampledFunction> for SmearingFunction {
    fn from(s: SampledFunction) -> Self {
        Self::Sampled(s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DeltaKernel {
    pub mass: f64,
}

/// `Δ(x, y) = G_R - G_A`: `+1/2 · J₀(mτ)` when `x` lies in the causal
/// future of `y`, `-1/2 · J₀(mτ)` in its past, zero at spacelike
/// separation. The cone boundary and `x = y` take the future value.
pub fn pauli_jordan_point(k: DeltaKernel, x: Point, y: Point) -> f64 {
    let dt = x.t - y.t;
    let dx = (x.x - y.x).abs();
    let s = if dt >= dx {
        0.5
    } else if -dt >= dx {
        -0.5
    } else {
        return 0.0;
    };
    if k.mass == 0.0 {
        s
    } else {
        s * bessel_j0(k.mass * (dt * dt - dx * dx).max(0.0).sqrt())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadratureConfig {
    pub dx: f64,
    pub levels: usize,
    pub tol: f64,
}

impl Default for QuadratureConfig {
    fn default() -> Self {
        Self { dx: 0.04, levels: 3, tol: 1e-5 }
    }
}

impl QuadratureConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.dx > 0.0 && self.tol > 0.0 && self.levels >= 1) {
            return Err(Error::Invalid(format!("bad quadrature config {self:?}")));
        }
        Ok(())
    }
}
