//! Leapfrog solver for `(□ + m²)φ = f` on a 1+1 lattice, solution moving
//! and the first-order scattering map of a compact `κχφ²` interaction.
//!
//! With `L` the discrete Klein-Gordon operator, retarded solutions start
//! from zero data on the first two time levels and satisfy `Lφ_R = f` on
//! every interior level. Advanced solutions are time-reversed retarded
//! ones. The spatial edges are held at zero, so fields are physical only
//! away from the light rays reflected there.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::geometry::{Point, Rect};
use crate::smearing::{delta_bilinear, BumpSpec, DeltaKernel, QuadratureConfig, SampledFunction, SmearingFunction};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Lattice {
    pub t0: f64,
    pub x0: f64,
    pub dt: f64,
    pub dx: f64,
    pub nt: usize,
    pub nx: usize,
}

impl Lattice {
    /// Nodes `t0 + i·dt`, `x0 + j·dx` covering `window`.
    pub fn new(window: Rect, dt: f64, dx: f64) -> Result<Self> {
        if !(dt > 0.0 && dx > 0.0) {
            return Err(Error::Invalid("lattice steps must be positive".into()));
        }
        if dt > dx {
            return Err(Error::Cfl(dt / dx));
        }
        let nt = ((window.t_hi - window.t_lo) / dt).round() as usize + 1;
        let nx = ((window.x_hi - window.x_lo) / dx).round() as usize + 1;
        if nt < 4 || nx < 3 {
            return Err(Error::Invalid("lattice window too small".into()));
        }
        Ok(Self { t0: window.t_lo, x0: window.x_lo, dt, dx, nt, nx })
    }

    /// Courant number one.
    pub fn square(window: Rect, h: f64) -> Result<Self> {
        Self::new(window, h, h)
    }

    /// Square lattice around `rects`, padded by `margin` in time and wide
    /// enough in space that no light ray from the sources reaches an edge.
    pub fn covering(rects: &[Rect], h: f64, margin: f64) -> Result<Self> {
        let Some(first) = rects.first() else {
            return Err(Error::Invalid("nothing to cover".into()));
        };
        let hull = rects.iter().fold(*first, |a, r| Rect {
            t_lo: a.t_lo.min(r.t_lo),
            t_hi: a.t_hi.max(r.t_hi),
            x_lo: a.x_lo.min(r.x_lo),
            x_hi: a.x_hi.max(r.x_hi),
        });
        let (t_lo, t_hi) = (hull.t_lo - margin, hull.t_hi + margin);
        let reach = t_hi - t_lo + margin;
        let (x_lo, x_hi) = (hull.x_lo - reach, hull.x_hi + reach);
        let mut lat = Self::square(Rect::new(t_lo, t_hi, x_lo, x_hi)?, h)?;
        lat.nt = ((t_hi - t_lo) / h).ceil() as usize + 1;
        lat.nx = ((x_hi - x_lo) / h).ceil() as usize + 1;
        Ok(lat)
    }

    pub fn window(&self) -> Rect {
        Rect {
            t_lo: self.t0,
            t_hi: self.t0 + (self.nt - 1) as f64 * self.dt,
            x_lo: self.x0,
            x_hi: self.x0 + (self.nx - 1) as f64 * self.dx,
        }
    }

    pub fn node(&self, i: usize, j: usize) -> Point {
        Point::new(self.t0 + i as f64 * self.dt, self.x0 + j as f64 * self.dx)
    }

    pub fn sample(&self, f: &SmearingFunction) -> Vec<f64> {
        let mut v = Vec::with_capacity(self.nt * self.nx);
        for i in 0..self.nt {
            for j in 0..self.nx {
                v.push(f.eval(self.node(i, j)));
            }
        }
        v
    }

    fn check_source(&self, f: &SmearingFunction) -> Result<()> {
        let w = self.window();
        let inner = Rect {
            t_lo: w.t_lo + 2.0 * self.dt,
            t_hi: w.t_hi - 2.0 * self.dt,
            x_lo: w.x_lo + 2.0 * self.dx,
            x_hi: w.x_hi - 2.0 * self.dx,
        };
        match f.support() {
            Some(s) if !inner.contains_rect(&s) => {
                Err(Error::Invalid("source support must lie inside the lattice window with a margin".into()))
            }
            _ => Ok(()),
        }
    }
}

/// Node values on a [`Lattice`], time as the slow index.
#[derive(Debug, Clone, PartialEq)]
pub struct LatticeField {
    pub lattice: Lattice,
    pub values: Vec<f64>,
}

impl LatticeField {
    pub fn zeros(lattice: Lattice) -> Self {
        Self { lattice, values: vec![0.0; lattice.nt * lattice.nx] }
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.lattice.nx + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let nx = self.lattice.nx;
        &self.values[i * nx..(i + 1) * nx]
    }

    pub fn sub(&self, o: &Self) -> Self {
        Self { lattice: self.lattice, values: self.values.iter().zip(&o.values).map(|(a, b)| a - b).collect() }
    }

    pub fn axpy(&self, a: f64, o: &Self) -> Self {
        Self { lattice: self.lattice, values: self.values.iter().zip(&o.values).map(|(x, y)| x + a * y).collect() }
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    /// `∫ f φ` as a node sum times the cell area.
    pub fn pair(&self, f: &[f64]) -> f64 {
        let l = &self.lattice;
        self.values.iter().zip(f).map(|(a, b)| a * b).sum::<f64>() * l.dt * l.dx
    }

    /// `(Lφ)` at interior node `(i, j)`.
    pub fn apply_kg(&self, i: usize, j: usize, m: f64) -> f64 {
        let l = &self.lattice;
        let at = |a: usize, b: Option<usize>| b.filter(|&b| b < l.nx).map_or(0.0, |b| self.get(a, b));
        let c = self.get(i, j);
        (self.get(i + 1, j) - 2.0 * c + self.get(i - 1, j)) / (l.dt * l.dt)
            - (at(i, j.checked_add(1)) - 2.0 * c + at(i, j.checked_sub(1))) / (l.dx * l.dx)
            + m * m * c
    }

    /// Conserved leapfrog energy between levels `i` and `i + 1`.
    pub fn energy(&self, i: usize, m: f64) -> f64 {
        let l = &self.lattice;
        let (a, b) = (self.row(i), self.row(i + 1));
        let mut e = 0.0;
        for j in 0..l.nx {
            let v = (b[j] - a[j]) / l.dt;
            e += v * v + m * m * a[j] * b[j];
        }
        for j in 0..=l.nx {
            let da = a.get(j).copied().unwrap_or(0.0) - j.checked_sub(1).map_or(0.0, |k| a[k]);
            let db = b.get(j).copied().unwrap_or(0.0) - j.checked_sub(1).map_or(0.0, |k| b[k]);
            e += da * db / (l.dx * l.dx);
        }
        0.5 * e * l.dx
    }
}

fn step(lat: &Lattice, m: f64, src: &[f64], reverse: bool) -> Vec<f64> {
    let (nt, nx) = (lat.nt, lat.nx);
    let row = |i: usize| if reverse { nt - 1 - i } else { i };
    let c2 = (lat.dt / lat.dx).powi(2);
    let dt2 = lat.dt * lat.dt;
    let mut phi = vec![0.0; nt * nx];
    for n in 1..nt - 1 {
        let (prev, cur, next) = (row(n - 1), row(n), row(n + 1));
        for j in 0..nx {
            let c = phi[cur * nx + j];
            let left = if j > 0 { phi[cur * nx + j - 1] } else { 0.0 };
            let right = if j + 1 < nx { phi[cur * nx + j + 1] } else { 0.0 };
            phi[next * nx + j] = 2.0 * c - phi[prev * nx + j] + c2 * (left - 2.0 * c + right) - dt2 * m * m * c
                + dt2 * src[cur * nx + j];
        }
    }
    phi
}

pub fn solve_retarded(f: &SmearingFunction, m: f64, lat: &Lattice) -> Result<LatticeField> {
    lat.check_source(f)?;
    Ok(LatticeField { lattice: *lat, values: step(lat, m, &lat.sample(f), false) })
}

pub fn solve_advanced(f: &SmearingFunction, m: f64, lat: &Lattice) -> Result<LatticeField> {
    lat.check_source(f)?;
    Ok(LatticeField { lattice: *lat, values: step(lat, m, &lat.sample(f), true) })
}

fn solve_nodes(src: &[f64], m: f64, lat: &Lattice) -> LatticeField {
    let r = step(lat, m, src, false);
    let a = step(lat, m, src, true);
    LatticeField { lattice: *lat, values: r.iter().zip(&a).map(|(x, y)| x - y).collect() }
}

/// `Δf = φ_R − φ_A`.
pub fn generate_solution(f: &SmearingFunction, m: f64, lat: &Lattice) -> Result<LatticeField> {
    lat.check_source(f)?;
    Ok(solve_nodes(&lat.sample(f), m, lat))
}

/// Lattice estimate of `Δ(f, g) = ∫ f·(Δg)`.
pub fn lattice_delta(f: &SmearingFunction, g: &SmearingFunction, m: f64, lat: &Lattice) -> Result<f64> {
    Ok(generate_solution(g, m, lat)?.pair(&lat.sample(f)))
}

/// Temporal transition `[t1, t2]` with the smoothstep ramp `3u² − 2u³`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct WindowSpec {
    pub t1: f64,
    pub t2: f64,
}

impl WindowSpec {
    pub fn ramp(&self, t: f64) -> f64 {
        let u = ((t - self.t1) / (self.t2 - self.t1)).clamp(0.0, 1.0);
        u * u * (3.0 - 2.0 * u)
    }
}

/// `g = L(ramp·φ)` for a homogeneous lattice solution `φ`, cropped to its
/// nonzero block. Needs `dt = dx` so that `g` is a [`SampledFunction`].
pub fn move_solution(phi: &LatticeField, m: f64, w: WindowSpec) -> Result<SampledFunction> {
    let l = phi.lattice;
    let win = l.window();
    if !(w.t1 < w.t2) || w.t1 < win.t_lo + 2.0 * l.dt || w.t2 > win.t_hi - 2.0 * l.dt {
        return Err(Error::Invalid("transition slab must lie inside the lattice window".into()));
    }
    if (l.dt - l.dx).abs() > 1e-12 * l.dx {
        return Err(Error::Invalid("moving supports needs dt = dx".into()));
    }
    let plus = LatticeField {
        lattice: l,
        values: (0..l.nt)
            .flat_map(|i| {
                let r = w.ramp(l.node(i, 0).t);
                phi.row(i).iter().map(move |v| r * v)
            })
            .collect(),
    };
    let mut g = vec![0.0; l.nt * l.nx];
    for i in 1..l.nt - 1 {
        let t = |k: usize| l.node(k, 0).t;
        let touches = |k: usize| t(k) > w.t1 && t(k) < w.t2;
        if !(touches(i - 1) || touches(i) || touches(i + 1)) {
            continue;
        }
        for j in 0..l.nx {
            g[i * l.nx + j] = plus.apply_kg(i, j, m);
        }
    }
    crop(&l, &g)
}

fn crop(l: &Lattice, g: &[f64]) -> Result<SampledFunction> {
    let nz = |i: usize, j: usize| g[i * l.nx + j] != 0.0;
    let rows: Vec<usize> = (0..l.nt).filter(|&i| (0..l.nx).any(|j| nz(i, j))).collect();
    let cols: Vec<usize> = (0..l.nx).filter(|&j| (0..l.nt).any(|i| nz(i, j))).collect();
    let (Some(&i0), Some(&i1), Some(&j0), Some(&j1)) = (rows.first(), rows.last(), cols.first(), cols.last()) else {
        return SampledFunction::new(l.node(0, 0), l.dx, 1, 1, vec![0.0]);
    };
    let vals = (i0..=i1).flat_map(|i| (j0..=j1).map(move |j| g[i * l.nx + j])).collect();
    SampledFunction::new(l.node(i0, j0), l.dx, i1 - i0 + 1, j1 - j0 + 1, vals)
}

/// A function equivalent to `f` supported in the slab `[t1, t2]`.
pub fn move_support(f: &SmearingFunction, m: f64, lat: &Lattice, w: WindowSpec) -> Result<SampledFunction> {
    move_solution(&generate_solution(f, m, lat)?, m, w)
}

/// Self-interaction `κχφ²` switched on in the support of `χ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct InteractionSpec {
    pub kappa: f64,
    pub chi: BumpSpec,
}

/// Out-region functions `h₀` (free) and `h₁` (first order) with `h = h₀ + κh₁`.
#[derive(Debug, Clone, PartialEq)]
pub struct ScatterOrders {
    pub h0: SampledFunction,
    pub h1: SampledFunction,
}

/// `h₀ = move(Δf)` and `h₁ = move(Δ(χφ₀²))`: in the out-region the first
/// order field `φ₁ = G_R(χφ₀²)` agrees with the free solution `Δ(χφ₀²)`.
pub fn scatter_orders(
    f: &SmearingFunction,
    m: f64,
    lat: &Lattice,
    chi: &BumpSpec,
    w: WindowSpec,
) -> Result<ScatterOrders> {
    chi.validate()?;
    if w.t1 < chi.support().t_hi {
        return Err(Error::Invalid("transition slab meets the past of the interaction region".into()));
    }
    let phi0 = generate_solution(f, m, lat)?;
    let chi_f = SmearingFunction::from(*chi);
    lat.check_source(&chi_f)?;
    let src: Vec<f64> = lat.sample(&chi_f).iter().zip(&phi0.values).map(|(c, p)| c * p * p).collect();
    let phi1 = solve_nodes(&src, m, lat);
    Ok(ScatterOrders { h0: move_solution(&phi0, m, w)?, h1: move_solution(&phi1, m, w)? })
}

/// `h` with `Δh` equal, to first order in κ, to the interacting solution
/// generated by `f` in the out-region.
pub fn scatter_first_order(
    f: &SmearingFunction,
    m: f64,
    lat: &Lattice,
    int: &InteractionSpec,
    w: WindowSpec,
) -> Result<SampledFunction> {
    if !int.kappa.is_finite() {
        return Err(Error::Invalid("coupling must be finite".into()));
    }
    let o = scatter_orders(f, m, lat, &int.chi, w)?;
    add_sampled(&o.h0, &o.h1, int.kappa)
}

/// `a + c·b` on the union of the two grids (same lattice required).
pub fn add_sampled(a: &SampledFunction, b: &SampledFunction, c: f64) -> Result<SampledFunction> {
    let h = a.spacing;
    if (b.spacing - h).abs() > 1e-12 * h {
        return Err(Error::Invalid("sampled functions use different spacings".into()));
    }
    let off = |p: Point| ((p.t / h).round() as i64, (p.x / h).round() as i64);
    let (ai, aj) = off(a.origin);
    let (bi, bj) = off(b.origin);
    let (i0, j0) = (ai.min(bi), aj.min(bj));
    let i1 = (ai + a.nt as i64).max(bi + b.nt as i64);
    let j1 = (aj + a.nx as i64).max(bj + b.nx as i64);
    let (nt, nx) = ((i1 - i0) as usize, (j1 - j0) as usize);
    let mut v = vec![0.0; nt * nx];
    for (s, oi, oj, w) in [(a, ai, aj, 1.0), (b, bi, bj, c)] {
        for i in 0..s.nt {
            for j in 0..s.nx {
                let (ri, rj) = ((oi - i0) as usize + i, (oj - j0) as usize + j);
                v[ri * nx + rj] += w * s.get(i, j);
            }
        }
    }
    let t = if ai == i0 { a.origin.t } else { b.origin.t };
    let x = if aj == j0 { a.origin.x } else { b.origin.x };
    let origin = Point::new(t, x);
    SampledFunction::new(origin, h, nt, nx, v)
}

/// `Δ(h, g)` with the free kernel.
pub fn effective_delta(h: &SampledFunction, g: &SmearingFunction, m: f64, q: &QuadratureConfig) -> Result<f64> {
    delta_bilinear(&SmearingFunction::Sampled(h.clone()), g, DeltaKernel { mass: m }, q)
}
