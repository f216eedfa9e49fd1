//! Causal predicates for rectangle unions in 1+1 Minkowski space (c = 1).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub t: f64,
    pub x: f64,
}

impl Point {
    pub const fn new(t: f64, x: f64) -> Self {
        Self { t, x }
    }
}

/// Closed rectangle `[t_lo, t_hi] x [x_lo, x_hi]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rect {
    pub t_lo: f64,
    pub t_hi: f64,
    pub x_lo: f64,
    pub x_hi: f64,
}

impl Rect {
    pub fn new(t_lo: f64, t_hi: f64, x_lo: f64, x_hi: f64) -> Result<Self> {
        let finite = [t_lo, t_hi, x_lo, x_hi].iter().all(|v| v.is_finite());
        if !finite || t_lo >= t_hi || x_lo >= x_hi {
            return Err(Error::Geometry(format!(
                "degenerate rectangle t[{t_lo}, {t_hi}] x[{x_lo}, {x_hi}]"
            )));
        }
        Ok(Self { t_lo, t_hi, x_lo, x_hi })
    }

    /// Square of half-width `h` around `c`.
    pub fn square(c: Point, h: f64) -> Result<Self> {
        Self::new(c.t - h, c.t + h, c.x - h, c.x + h)
    }

    pub fn contains(&self, p: Point) -> bool {
        p.t >= self.t_lo && p.t <= self.t_hi && p.x >= self.x_lo && p.x <= self.x_hi
    }

    pub fn contains_rect(&self, o: &Rect) -> bool {
        o.t_lo >= self.t_lo && o.t_hi <= self.t_hi && o.x_lo >= self.x_lo && o.x_hi <= self.x_hi
    }

    fn intersect(&self, o: &Rect) -> Option<Rect> {
        let r = Rect {
            t_lo: self.t_lo.max(o.t_lo),
            t_hi: self.t_hi.min(o.t_hi),
            x_lo: self.x_lo.max(o.x_lo),
            x_hi: self.x_hi.min(o.x_hi),
        };
        (r.t_lo < r.t_hi && r.x_lo < r.x_hi).then_some(r)
    }
}

/// Finite union of closed rectangles.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionSet {
    rects: Vec<Rect>,
}

impl RegionSet {
    pub fn new(rects: Vec<Rect>) -> Result<Self> {
        if rects.is_empty() {
            return Err(Error::Geometry("region set needs at least one rectangle".into()));
        }
        Ok(Self { rects })
    }

    pub fn single(r: Rect) -> Self {
        Self { rects: vec![r] }
    }

    pub fn rects(&self) -> &[Rect] {
        &self.rects
    }

    pub fn contains(&self, p: Point) -> bool {
        self.rects.iter().any(|r| r.contains(p))
    }

    pub fn union(&self, other: &RegionSet) -> RegionSet {
        let mut rects = self.rects.clone();
        rects.extend_from_slice(&other.rects);
        RegionSet { rects }
    }

    /// Smallest rectangle containing the union.
    pub fn hull(&self) -> Rect {
        let mut h = self.rects[0];
        for r in &self.rects[1..] {
            h.t_lo = h.t_lo.min(r.t_lo);
            h.t_hi = h.t_hi.max(r.t_hi);
            h.x_lo = h.x_lo.min(r.x_lo);
            h.x_hi = h.x_hi.max(r.x_hi);
        }
        h
    }

    /// True when `other` is covered by a single member rectangle each.
    pub fn covers(&self, other: &RegionSet) -> bool {
        other.rects.iter().all(|o| self.rects.iter().any(|r| r.contains_rect(o)))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CausalRelation {
    QInFutureOfP,
    QInPastOfP,
    Spacelike,
}

/// Lightlike separation counts as causal; `p == q` reports the future case.
pub fn causal_relation(p: Point, q: Point) -> CausalRelation {
    let dt = q.t - p.t;
    let dx = (q.x - p.x).abs();
    if dt >= dx {
        CausalRelation::QInFutureOfP
    } else if -dt >= dx {
        CausalRelation::QInPastOfP
    } else {
        CausalRelation::Spacelike
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RegionRelation {
    StrictlySpacelike,
    CausallyConnected,
    TotallyTimelikeABeforeB,
    TotallyTimelikeBBeforeA,
}

fn interval_gap(lo1: f64, hi1: f64, lo2: f64, hi2: f64) -> (f64, f64) {
    // min and max of |a - b| over a in [lo1, hi1], b in [lo2, hi2]
    let min = (lo2 - hi1).max(lo1 - hi2).max(0.0);
    let max = (hi2 - lo1).abs().max((hi1 - lo2).abs());
    (min, max)
}

fn rect_spacelike(a: &Rect, b: &Rect) -> bool {
    let (_, dt_max) = interval_gap(a.t_lo, a.t_hi, b.t_lo, b.t_hi);
    let (dx_min, _) = interval_gap(a.x_lo, a.x_hi, b.x_lo, b.x_hi);
    dt_max < dx_min
}

fn rect_precedes(a: &Rect, b: &Rect) -> bool {
    let (_, dx_max) = interval_gap(a.x_lo, a.x_hi, b.x_lo, b.x_hi);
    b.t_lo - a.t_hi >= dx_max
}

pub fn region_relation(a: &RegionSet, b: &RegionSet) -> RegionRelation {
    let pairs = || a.rects.iter().flat_map(|ra| b.rects.iter().map(move |rb| (ra, rb)));
    if pairs().all(|(ra, rb)| rect_spacelike(ra, rb)) {
        RegionRelation::StrictlySpacelike
    } else if pairs().all(|(ra, rb)| rect_precedes(ra, rb)) {
        RegionRelation::TotallyTimelikeABeforeB
    } else if pairs().all(|(ra, rb)| rect_precedes(rb, ra)) {
        RegionRelation::TotallyTimelikeBBeforeA
    } else {
        RegionRelation::CausallyConnected
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    Future,
    Past,
}

/// Outer cover of `J±(a) ∩ clip` by `slices` horizontal strips.
///
/// Each strip carries the widest cone section it meets, so the exact
/// shadow is always contained in the result. Returns `Ok(None)` when the
/// shadow misses the clip window.
pub fn causal_shadow(
    a: &RegionSet,
    dir: Direction,
    clip: Rect,
    slices: usize,
) -> Result<Option<RegionSet>> {
    if !(clip.t_lo < clip.t_hi && clip.x_lo < clip.x_hi) || slices == 0 {
        return Err(Error::Geometry("degenerate clip window".into()));
    }
    let h = (clip.t_hi - clip.t_lo) / slices as f64;
    let mut out = Vec::new();
    for k in 0..slices {
        let s0 = clip.t_lo + k as f64 * h;
        let s1 = if k + 1 == slices { clip.t_hi } else { s0 + h };
        for r in &a.rects {
            // farthest distance in time from the rectangle within this strip
            let reach = match dir {
                Direction::Future if s1 >= r.t_lo => Some(s1 - r.t_lo),
                Direction::Past if s0 <= r.t_hi => Some(r.t_hi - s0),
                _ => None,
            };
            let Some(reach) = reach else { continue };
            let (lo, hi) = match dir {
                Direction::Future => (s0.max(r.t_lo), s1),
                Direction::Past => (s0, s1.min(r.t_hi)),
            };
            let strip = Rect { t_lo: lo, t_hi: hi, x_lo: r.x_lo - reach, x_hi: r.x_hi + reach };
            if let Some(c) = strip.intersect(&clip) {
                out.push(c);
            }
        }
    }
    Ok(if out.is_empty() { None } else { Some(RegionSet { rects: out }) })
}

/// Upper boundary of `J⁻(b)`: `p ∈ J⁻(b)` iff `p.t <= past_roof(b, p.x)`.
pub fn past_roof(b: &RegionSet, x: f64) -> f64 {
    b.rects
        .iter()
        .map(|r| r.t_hi - (r.x_lo - x).max(x - r.x_hi).max(0.0))
        .fold(f64::NEG_INFINITY, f64::max)
}

/// A point of `a` lying outside `J⁻(b)`, if any.
///
/// The roof of `J⁻(b)` is piecewise linear with slopes ±1, so its minimum
/// over an interval sits at an endpoint, a rectangle edge or a crossing of
/// two tents; checking those candidates is exact.
pub fn point_outside_past(a: &RegionSet, b: &RegionSet) -> Option<Point> {
    let mut kinks: Vec<f64> = Vec::new();
    for r in &b.rects {
        kinks.push(r.x_lo);
        kinks.push(r.x_hi);
        for s in &b.rects {
            kinks.push(0.5 * (r.t_hi - s.t_hi + r.x_hi + s.x_lo));
        }
    }
    let mut worst: Option<(f64, Point)> = None;
    for ra in &a.rects {
        let cands = [ra.x_lo, ra.x_hi]
            .into_iter()
            .chain(kinks.iter().copied().filter(|&x| x > ra.x_lo && x < ra.x_hi));
        for x in cands {
            let excess = ra.t_hi - past_roof(b, x);
            if excess > 0.0 && worst.is_none_or(|(e, _)| excess > e) {
                worst = Some((excess, Point::new(ra.t_hi, x)));
            }
        }
    }
    worst.map(|(_, p)| p)
}

/// A point of `b` spacelike to `p`, if one exists.
pub fn spacelike_partner(p: Point, b: &RegionSet) -> Option<Point> {
    b.rects.iter().find_map(|r| {
        let t = p.t.clamp(r.t_lo, r.t_hi);
        let x = if (p.x - r.x_lo).abs() > (p.x - r.x_hi).abs() { r.x_lo } else { r.x_hi };
        let q = Point::new(t, x);
        (causal_relation(p, q) == CausalRelation::Spacelike).then_some(q)
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sq(t: f64, x: f64) -> RegionSet {
        RegionSet::single(Rect::square(Point::new(t, x), 0.4).unwrap())
    }

    #[test]
    fn point_relations() {
        let o = Point::new(0.0, 0.0);
        assert_eq!(causal_relation(o, Point::new(1.0, 0.0)), CausalRelation::QInFutureOfP);
        assert_eq!(causal_relation(o, Point::new(0.0, 1.0)), CausalRelation::Spacelike);
        assert_eq!(causal_relation(o, Point::new(1.0, 1.0)), CausalRelation::QInFutureOfP);
        assert_eq!(causal_relation(o, o), CausalRelation::QInFutureOfP);
    }

    #[test]
    fn scenario_relations() {
        assert_eq!(region_relation(&sq(0.0, 0.0), &sq(2.0, 0.0)), RegionRelation::TotallyTimelikeABeforeB);
        assert_eq!(region_relation(&sq(2.0, 0.0), &sq(0.0, 0.0)), RegionRelation::TotallyTimelikeBBeforeA);
        assert_eq!(region_relation(&sq(0.0, 0.0), &sq(0.0, 3.0)), RegionRelation::StrictlySpacelike);
        assert_eq!(region_relation(&sq(0.0, 0.0), &sq(0.0, 0.0)), RegionRelation::CausallyConnected);
        let (h, f, g) = (sq(0.0, 0.0), sq(1.5, 1.8), sq(2.0, 3.8));
        assert_eq!(region_relation(&h, &g), RegionRelation::StrictlySpacelike);
        assert_eq!(region_relation(&h, &f), RegionRelation::CausallyConnected);
        assert_eq!(region_relation(&f, &g), RegionRelation::CausallyConnected);
    }

    #[test]
    fn shadow_of_point_like_square() {
        let a = RegionSet::single(Rect::new(-1e-9, 1e-9, -1e-9, 1e-9).unwrap());
        let clip = Rect::new(0.0, 1.0, -2.0, 2.0).unwrap();
        let s = causal_shadow(&a, Direction::Future, clip, 200).unwrap().unwrap();
        for i in 0..=40 {
            for j in 0..=80 {
                let p = Point::new(i as f64 / 40.0, -2.0 + j as f64 / 20.0);
                if p.x.abs() <= p.t {
                    assert!(s.contains(p), "{p:?} missing");
                }
            }
        }
        // cover is tight to one strip
        assert!(!s.contains(Point::new(0.5, 0.52)));
    }

    #[test]
    fn past_membership() {
        let g = sq(2.0, 3.8);
        let f = sq(1.5, 1.8);
        let p = point_outside_past(&f, &g).unwrap();
        assert!(f.rects()[0].contains(p));
        assert!(p.t > past_roof(&g, p.x));
        let early = sq(-3.0, 3.8);
        assert!(point_outside_past(&early, &g).is_none());
    }
}
