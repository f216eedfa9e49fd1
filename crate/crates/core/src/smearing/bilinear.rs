use rayon::prelude::*;

use super::{DeltaKernel, QuadratureConfig, SampledFunction, SmearingFunction};
use crate::error::{Error, Result};
use crate::geometry::Point;
use crate::special::bessel_j0;

/// Node values of a function on the lattice `origin + h·(i, j)`.
struct NodeGrid {
    i0: i64,
    j0: i64,
    nt: usize,
    nx: usize,
    vals: Vec<f64>,
}

fn sample_on(f: &SmearingFunction, o: Point, h: f64) -> Result<Option<NodeGrid>> {
    match f {
        SmearingFunction::Bump(b) => {
            let r = b.support();
            let i0 = ((r.t_lo - o.t) / h - 1e-9).ceil() as i64;
            let i1 = ((r.t_hi - o.t) / h + 1e-9).floor() as i64;
            let j0 = ((r.x_lo - o.x) / h - 1e-9).ceil() as i64;
            let j1 = ((r.x_hi - o.x) / h + 1e-9).floor() as i64;
            if i1 < i0 || j1 < j0 {
                return Ok(None);
            }
            let (nt, nx) = ((i1 - i0 + 1) as usize, (j1 - j0 + 1) as usize);
            let mut vals = Vec::with_capacity(nt * nx);
            for i in 0..nt {
                for j in 0..nx {
                    let p = Point::new(o.t + (i0 + i as i64) as f64 * h, o.x + (j0 + j as i64) as f64 * h);
                    vals.push(super::eval_bump(b, p));
                }
            }
            Ok(Some(NodeGrid { i0, j0, nt, nx, vals }))
        }
        SmearingFunction::Sampled(s) => {
            if (s.spacing - h).abs() > 1e-12 * h {
                return Err(Error::Invalid(format!(
                    "sampled spacing {} differs from quadrature lattice {h}",
                    s.spacing
                )));
            }
            let u = (s.origin.t - o.t) / h;
            let v = (s.origin.x - o.x) / h;
            if (u - u.round()).abs() > 1e-6 || (v - v.round()).abs() > 1e-6 {
                return Err(Error::Invalid("sampled functions live on misaligned lattices".into()));
            }
            Ok(Some(NodeGrid {
                i0: u.round() as i64,
                j0: v.round() as i64,
                nt: s.nt,
                nx: s.nx,
                vals: s.values.clone(),
            }))
        }
    }
}

/// Quadrature weight of the kernel at lattice offset `(a, b)`.
///
/// Light-like offsets get half the interior weight: in null coordinates the
/// kernel is a product of step functions and the half weight makes the
/// cumulative sums second-order accurate. The zero offset cancels.
fn kernel_weight(a: i64, b: i64, mh: f64) -> f64 {
    let (aa, bb) = (a.abs(), b.abs());
    let s = if a > 0 { 0.5 } else { -0.5 };
    if aa > bb {
        if mh == 0.0 {
            s
        } else {
            s * bessel_j0(mh * (((aa * aa - bb * bb) as f64).sqrt()))
        }
    } else if aa == bb && aa > 0 {
        0.5 * s
    } else {
        0.0
    }
}

fn pair_sum(f: &NodeGrid, g: &NodeGrid, mass: f64, h: f64) -> f64 {
    let amin = f.i0 - (g.i0 + g.nt as i64 - 1);
    let amax = f.i0 + f.nt as i64 - 1 - g.i0;
    let bmin = f.j0 - (g.j0 + g.nx as i64 - 1);
    let bmax = f.j0 + f.nx as i64 - 1 - g.j0;
    let bw = (bmax - bmin + 1) as usize;
    let mut table = vec![0.0; (amax - amin + 1) as usize * bw];
    for a in amin..=amax {
        for b in bmin..=bmax {
            table[(a - amin) as usize * bw + (b - bmin) as usize] = kernel_weight(a, b, mass * h);
        }
    }
    let gnz: Vec<(i64, i64, f64)> = (0..g.nt)
        .flat_map(|i| (0..g.nx).map(move |j| (i, j)))
        .filter_map(|(i, j)| {
            let v = g.vals[i * g.nx + j];
            (v != 0.0).then_some((g.i0 + i as i64, g.j0 + j as i64, v))
        })
        .collect();
    let total: f64 = (0..f.nt)
        .into_par_iter()
        .map(|i| {
            let fi = f.i0 + i as i64;
            let mut row = 0.0;
            for j in 0..f.nx {
                let fv = f.vals[i * f.nx + j];
                if fv == 0.0 {
                    continue;
                }
                let fj = f.j0 + j as i64;
                let mut acc = 0.0;
                for &(gi, gj, gv) in &gnz {
                    acc += gv * table[(fi - gi - amin) as usize * bw + (fj - gj - bmin) as usize];
                }
                row += fv * acc;
            }
            row
        })
        .sum();
    total * h.powi(4)
}

fn lattice_for(f: &SmearingFunction, g: &SmearingFunction) -> Option<(Point, f64)> {
    match (f, g) {
        (SmearingFunction::Sampled(s), _) | (_, SmearingFunction::Sampled(s)) => Some((s.origin, s.spacing)),
        _ => None,
    }
}

/// Midpoint sum of `f(x)Δ(x,y)g(y)` on one lattice.
pub(crate) fn delta_on_lattice(
    f: &SmearingFunction,
    g: &SmearingFunction,
    k: DeltaKernel,
    origin: Point,
    h: f64,
) -> Result<f64> {
    let (Some(fg), Some(gg)) = (sample_on(f, origin, h)?, sample_on(g, origin, h)?) else {
        return Ok(0.0);
    };
    Ok(pair_sum(&fg, &gg, k.mass, h))
}

/// Per-level data of a refined Δ(f, g) computation.
#[derive(Debug, Clone, PartialEq)]
pub struct DeltaEstimate {
    /// Best estimate (Richardson-extrapolated when refined).
    pub value: f64,
    /// Raw midpoint sums, coarse to fine.
    pub raw: Vec<f64>,
    pub spacings: Vec<f64>,
    /// Extrapolated estimates, one per level.
    pub extrapolated: Vec<f64>,
    /// Difference between the last two extrapolated estimates.
    pub last_change: f64,
}

/// Raw levels and Richardson estimates without a convergence verdict.
pub fn delta_bilinear_levels(
    f: &SmearingFunction,
    g: &SmearingFunction,
    k: DeltaKernel,
    q: &QuadratureConfig,
) -> Result<DeltaEstimate> {
    q.validate()?;
    if let Some((o, h)) = lattice_for(f, g) {
        let v = delta_on_lattice(f, g, k, o, h)?;
        return Ok(DeltaEstimate { value: v, raw: vec![v], spacings: vec![h], extrapolated: vec![v], last_change: 0.0 });
    }
    let origin = Point::new(0.0, 0.0);
    let mut raw = Vec::with_capacity(q.levels);
    let mut spacings = Vec::with_capacity(q.levels);
    let mut est: Vec<f64> = Vec::with_capacity(q.levels);
    for level in 0..q.levels {
        let h = q.dx / (1u64 << level) as f64;
        let v = delta_on_lattice(f, g, k, origin, h)?;
        est.push(match raw.last() {
            Some(&prev) => (4.0 * v - prev) / 3.0,
            None => v,
        });
        raw.push(v);
        spacings.push(h);
    }
    let n = est.len();
    let last_change = if n >= 2 { (est[n - 1] - est[n - 2]).abs() } else { 0.0 };
    Ok(DeltaEstimate { value: est[n - 1], raw, spacings, last_change, extrapolated: est })
}

/// Smeared Pauli-Jordan function `Δ(f, g) = ∫ f(x) Δ(x, y) g(y)`.
///
/// Fails with both final estimates when refinement stalls above `q.tol`.
pub fn delta_bilinear(
    f: &SmearingFunction,
    g: &SmearingFunction,
    k: DeltaKernel,
    q: &QuadratureConfig,
) -> Result<f64> {
    let e = delta_bilinear_levels(f, g, k, q)?;
    if e.last_change > q.tol {
        let n = e.extrapolated.len();
        return Err(Error::NoConvergence { prev: e.extrapolated[n - 2], last: e.value });
    }
    Ok(e.value)
}

/// Grid sampling of any smearing function on `origin + h·(i, j)`.
pub fn sample_function(
    f: &SmearingFunction,
    origin: Point,
    h: f64,
    nt: usize,
    nx: usize,
) -> SampledFunction {
    let mut vals = Vec::with_capacity(nt * nx);
    for i in 0..nt {
        for j in 0..nx {
            vals.push(f.eval(Point::new(origin.t + i as f64 * h, origin.x + j as f64 * h)));
        }
    }
    SampledFunction { origin, spacing: h, nt, nx, values: vals }
}
