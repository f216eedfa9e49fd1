use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Point, Rect};

const MAGIC: &str = "sampled-function v1";

/// Values on the nodes `origin + (i·spacing, j·spacing)`, stored row-major
/// with time as the slow index. Each node stands for a cell of area
/// `spacing²` centred on it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampledFunction {
    pub origin: Point,
    pub spacing: f64,
    pub nt: usize,
    pub nx: usize,
    pub values: Vec<f64>,
}

impl SampledFunction {
    pub fn new(origin: Point, spacing: f64, nt: usize, nx: usize, values: Vec<f64>) -> Result<Self> {
        if !(spacing > 0.0 && spacing.is_finite()) || nt == 0 || nx == 0 {
            return Err(Error::Invalid("sampled function needs positive spacing and dims".into()));
        }
        if values.len() != nt * nx {
            return Err(Error::Invalid(format!(
                "expected {} values, found {}",
                nt * nx,
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Invalid("sampled function holds a non-finite value".into()));
        }
        Ok(Self { origin, spacing, nt, nx, values })
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.nx + j]
    }

    pub fn node(&self, i: usize, j: usize) -> Point {
        Point::new(
            self.origin.t + i as f64 * self.spacing,
            self.origin.x + j as f64 * self.spacing,
        )
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self { values: self.values.iter().map(|&v| f(v)).collect(), ..self.clone() }
    }

    /// Bilinear interpolation; zero outside the grid.
    pub fn value_at(&self, p: Point) -> f64 {
        let u = (p.t - self.origin.t) / self.spacing;
        let v = (p.x - self.origin.x) / self.spacing;
        if u < 0.0 || v < 0.0 || u > (self.nt - 1) as f64 || v > (self.nx - 1) as f64 {
            return 0.0;
        }
        let (i, j) = (u.floor() as usize, v.floor() as usize);
        let (fu, fv) = (u - i as f64, v - j as f64);
        let at = |a: usize, b: usize| {
            if a < self.nt && b < self.nx {
                self.get(a, b)
            } else {
                0.0
            }
        };
        (1.0 - fu) * ((1.0 - fv) * at(i, j) + fv * at(i, j + 1))
            + fu * ((1.0 - fv) * at(i + 1, j) + fv * at(i + 1, j + 1))
    }

    /// Bounding box of the nonzero cells.
    pub fn support(&self) -> Option<Rect> {
        let (mut i0, mut i1, mut j0, mut j1) = (usize::MAX, 0, usize::MAX, 0);
        for i in 0..self.nt {
            for j in 0..self.nx {
                if self.get(i, j) != 0.0 {
                    i0 = i0.min(i);
                    i1 = i1.max(i);
                    j0 = j0.min(j);
                    j1 = j1.max(j);
                }
            }
        }
        if i0 == usize::MAX {
            return None;
        }
        let h = 0.5 * self.spacing;
        let (a, b) = (self.node(i0, j0), self.node(i1, j1));
        Some(Rect { t_lo: a.t - h, t_hi: b.t + h, x_lo: a.x - h, x_hi: b.x + h })
    }

    /// Sum of values times cell area.
    pub fn integral(&self) -> f64 {
        self.values.iter().sum::<f64>() * self.spacing * self.spacing
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "{MAGIC}");
        let _ = writeln!(s, "origin {} {}", self.origin.t, self.origin.x);
        let _ = writeln!(s, "spacing {}", self.spacing);
        let _ = writeln!(s, "dims {} {}", self.nt, self.nx);
        for row in self.values.chunks(self.nx) {
            let line: Vec<String> = row.iter().map(|v| v.to_string()).collect();
            let _ = writeln!(s, "{}", line.join(" "));
        }
        s
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let bad = |line: usize, msg: &str| Error::Invalid(format!("line {line}: {msg}"));
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
        let mut header = |key: &str| -> Result<(usize, Vec<String>)> {
            let (n, l) = lines.next().ok_or_else(|| bad(0, "truncated header"))?;
            let mut parts = l.split_whitespace();
            if parts.next() != Some(key) {
                return Err(bad(n + 1, &format!("expected `{key}`")));
            }
            Ok((n + 1, parts.map(str::to_string).collect()))
        };
        let num = |n: usize, s: &str| s.parse::<f64>().map_err(|_| bad(n, &format!("bad number `{s}`")));
        let (_, _) = header("sampled-function")?;
        let (n, o) = header("origin")?;
        if o.len() != 2 {
            return Err(bad(n, "origin needs two numbers"));
        }
        let origin = Point::new(num(n, &o[0])?, num(n, &o[1])?);
        let (n, sp) = header("spacing")?;
        let spacing = num(n, sp.first().ok_or_else(|| bad(n, "missing spacing"))?)?;
        let (n, d) = header("dims")?;
        let dim = |s: Option<&String>| {
            s.and_then(|v| v.parse::<usize>().ok()).ok_or_else(|| bad(n, "bad dims"))
        };
        let (nt, nx) = (dim(d.first())?, dim(d.get(1))?);
        let mut values = Vec::with_capacity(nt * nx);
        for (n, l) in lines {
            for tok in l.split_whitespace() {
                values.push(num(n + 1, tok)?);
            }
        }
        Self::new(origin, spacing, nt, nx, values)
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Invalid(format!("{}: {e}", path.display())))?;
        Self::from_text(&text)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_text())
            .map_err(|e| Error::Invalid(format!("{}: {e}", path.display())))
    }
}
