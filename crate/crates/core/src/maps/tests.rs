use num_complex::Complex64;

use super::*;
use crate::algebra::{jet_extract, wick_expectation};
use crate::geometry::Rect;
use crate::quad::integrate_complex;

const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };

fn everywhere() -> RegionSet {
    RegionSet::single(Rect::new(-100.0, 100.0, -100.0, 100.0).unwrap())
}

/// Labels h, f, g, f1, f2 with hand-picked pairings.
///
/// f1 and f2 commute; h is spacelike to g; f2 is spacelike to g in the
/// second table so that the Jordan pair applies.
fn table(d_f2_g: f64) -> PairingTable {
    let names = ["h", "f", "g", "f1", "f2"];
    let n = names.len();
    let mut d = vec![0.0; n * n];
    let mut set = |i: usize, j: usize, v: f64| {
        d[i * n + j] = v;
        d[j * n + i] = -v;
    };
    set(0, 1, 0.31);
    set(1, 2, -0.42);
    set(3, 2, 0.27);
    set(4, 2, d_f2_g);
    set(0, 3, 0.11);
    set(1, 3, 0.05);
    set(1, 4, -0.07);
    let mut w = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            w[i * n + j] = if i == j { 1.0 + 0.1 * i as f64 } else { 0.05 / (1.0 + (i + j) as f64) };
        }
    }
    PairingTable::from_parts(names.iter().map(|s| s.to_string()).collect(), vec![None; n], d, Some(w), 1.0).unwrap()
}

fn l(t: &PairingTable, s: &str) -> LabelId {
    t.id(s).unwrap()
}

fn map(t: &PairingTable, kind: MapKind) -> UpdateMap {
    UpdateMap::new(kind, everywhere(), t).unwrap()
}

fn phi(t: &PairingTable, s: &str) -> OperatorPoly {
    OperatorPoly::field(l(t, s))
}

fn re(x: f64) -> Complex64 {
    Complex64::new(x, 0.0)
}

/// Every map in the catalogue that is defined on `t` with base `g`.
fn catalogue(t: &PairingTable) -> Vec<UpdateMap> {
    let alg = Algebra::new(t);
    let c = alg.mul(&phi(t, "f1"), &phi(t, "f2")).unwrap();
    vec![
        map(t, MapKind::KickField { f: l(t, "f"), lambda: 0.7 }),
        map(t, MapKind::KickFieldSquared { f: l(t, "f"), strength: 1.0 }),
        map(t, MapKind::GaussianMeasureField { f: l(t, "f"), sigma: 0.6 }),
        map(
            t,
            MapKind::GeneralMeasureField { f: l(t, "f"), profile: SampledKrausProfile::gaussian(0.6, 0.005).unwrap() },
        ),
        map(t, MapKind::GaussianMeasureCommutingPoly { c, sigma: 0.8 }),
        map(t, MapKind::LoccConditional { f1: l(t, "f1"), f2: l(t, "f2"), sigma: 0.5, a: -0.3, b: 0.9 }),
    ]
}

#[test]
fn gaussian_measurement_moments() {
    let t = table(0.0);
    let alg = Algebra::new(&t);
    let sigma = 0.6;
    let m = map(&t, MapKind::GaussianMeasureField { f: l(&t, "f"), sigma });
    let w = apply(&m, &WeylJet::new(l(&t, "g"), 2), &alg).unwrap();
    let g = phi(&t, "g");
    assert_eq!(jet_extract(&alg, &w, 1).unwrap(), g);
    let d = t.delta(l(&t, "f"), l(&t, "g"));
    let want = alg.mul(&g, &g).unwrap().add(&OperatorPoly::real(d * d / (4.0 * sigma * sigma)));
    assert!(jet_extract(&alg, &w, 2).unwrap().approx_eq(&want, 1e-16));
}

#[test]
fn squared_kick_first_moment() {
    let t = table(0.0);
    let alg = Algebra::new(&t);
    let m = map(&t, MapKind::KickFieldSquared { f: l(&t, "f"), strength: 1.0 });
    let w = apply(&m, &WeylJet::new(l(&t, "g"), 2), &alg).unwrap();
    let d = t.delta(l(&t, "f"), l(&t, "g"));
    let want = phi(&t, "g").sub(&phi(&t, "f").scale(re(2.0 * d)));
    assert!(jet_extract(&alg, &w, 1).unwrap().approx_eq(&want, 1e-16));
}

#[test]
fn alice_then_charlie_on_bob() {
    let t = table(0.0);
    let alg = Algebra::new(&t);
    let lambda = 1.3;
    let c = compose(vec![
        map(&t, MapKind::KickField { f: l(&t, "h"), lambda }),
        map(&t, MapKind::KickFieldSquared { f: l(&t, "f"), strength: 1.0 }),
    ])
    .unwrap();
    let w = apply_composition(&c, &WeylJet::new(l(&t, "g"), 1), &alg).unwrap();
    let (dfg, dfh) = (t.delta(l(&t, "f"), l(&t, "g")), t.delta(l(&t, "f"), l(&t, "h")));
    let want = phi(&t, "g").sub(&phi(&t, "f").add(&OperatorPoly::real(lambda * dfh)).scale(re(2.0 * dfg)));
    assert!(jet_extract(&alg, &w, 1).unwrap().approx_eq(&want, 1e-15));
}

#[test]
fn commuting_product_measurement_second_moment() {
    let t = table(-0.19);
    let alg = Algebra::new(&t);
    let sigma = 0.8;
    let c = alg.mul(&phi(&t, "f1"), &phi(&t, "f2")).unwrap();
    let m = map(&t, MapKind::GaussianMeasureCommutingPoly { c, sigma });
    let w = apply(&m, &WeylJet::new(l(&t, "g"), 2), &alg).unwrap();
    let (d1, d2) = (t.delta(l(&t, "f1"), l(&t, "g")), t.delta(l(&t, "f2"), l(&t, "g")));
    let g = phi(&t, "g");
    let x = phi(&t, "f1").scale(re(d2)).add(&phi(&t, "f2").scale(re(d1)));
    let want = alg.mul(&g, &g).unwrap().add(&alg.mul(&x, &x).unwrap().scale(re(1.0 / (4.0 * sigma * sigma))));
    assert!(jet_extract(&alg, &w, 2).unwrap().approx_eq(&want, 1e-15));
    assert_eq!(jet_extract(&alg, &w, 1).unwrap(), g);
}

#[test]
fn non_commuting_polynomial_rejected() {
    let t = table(0.0);
    let alg = Algebra::new(&t);
    let c = alg.mul(&phi(&t, "f"), &phi(&t, "f1")).unwrap();
    let e = UpdateMap::new(MapKind::GaussianMeasureCommutingPoly { c, sigma: 1.0 }, everywhere(), &t);
    assert!(matches!(e, Err(Error::Invalid(_))));
}

#[test]
fn jordan_pair_first_moment() {
    let t = table(0.0);
    let sigma = 0.45;
    let (f, f1, g) = (l(&t, "f"), l(&t, "f1"), l(&t, "g"));
    // the pair (f1, f) does not commute; f commutes with g only in this table
    let mut d = vec![0.0; 9];
    let names = vec!["f1".to_string(), "f2".to_string(), "g".to_string()];
    let v12 = t.delta(f1, f);
    let v1g = t.delta(f1, g);
    d[1] = v12;
    d[3] = -v12;
    d[2] = v1g;
    d[6] = -v1g;
    let s = PairingTable::from_parts(names, vec![None; 3], d, None, 0.0).unwrap();
    let alg2 = Algebra::new(&s);
    let m = map(&s, MapKind::GaussianMeasureJordanPair { f1: LabelId(0), f2: LabelId(1), sigma });
    let w = apply(&m, &WeylJet::new(LabelId(2), 2), &alg2).unwrap();
    let want = OperatorPoly::field(LabelId(2))
        .add(&OperatorPoly::field(LabelId(1)).scale(re(((v12 * v12 / (8.0 * sigma * sigma)).exp() - 1.0) * v1g / v12)));
    assert!(jet_extract(&alg2, &w, 1).unwrap().approx_eq(&want, 1e-15));
}

#[test]
fn jordan_pair_needs_commuting_second_label() {
    let t = table(0.2);
    let alg = Algebra::new(&t);
    let m = map(&t, MapKind::GaussianMeasureJordanPair { f1: l(&t, "f"), f2: l(&t, "f2"), sigma: 1.0 });
    assert!(matches!(apply(&m, &WeylJet::new(l(&t, "g"), 1), &alg), Err(Error::Unsupported(_))));
}

#[test]
fn locc_reduces_to_measurement_when_g_misses_k2() {
    let t = table(0.0);
    let alg = Algebra::new(&t);
    let sigma = 0.5;
    let locc = map(&t, MapKind::LoccConditional { f1: l(&t, "f1"), f2: l(&t, "f2"), sigma, a: -0.3, b: 0.9 });
    let gm = map(&t, MapKind::GaussianMeasureField { f: l(&t, "f1"), sigma });
    let j = WeylJet::new(l(&t, "g"), 3);
    assert_eq!(apply(&locc, &j, &alg).unwrap(), apply(&gm, &j, &alg).unwrap());
}

/// Evaluates a polynomial of commuting atoms at `φ(label) = x`.
fn eval_at(p: &OperatorPoly, x: f64) -> Complex64 {
    p.terms()
        .map(|(w, c)| {
            c * w
                .iter()
                .map(|a| match a {
                    Atom::Field(_) => x,
                    Atom::Window(v) => v.eval(x),
                })
                .product::<f64>()
        })
        .sum()
}

/// Taylor coefficients of `t ↦ q(t)` by the trapezoid rule on a circle.
fn cauchy_coeffs(q: impl Fn(Complex64) -> Complex64, order: usize, radius: f64) -> Vec<Complex64> {
    let n = 32;
    let vals: Vec<(Complex64, Complex64)> = (0..n)
        .map(|k| {
            let z = Complex64::from_polar(radius, 2.0 * std::f64::consts::PI * k as f64 / n as f64);
            (z, q(z))
        })
        .collect();
    (0..=order).map(|j| vals.iter().map(|(z, v)| v / z.powu(j as u32)).sum::<Complex64>() / n as f64).collect()
}

#[test]
fn locc_matches_alpha_quadrature() {
    let t = table(-0.35);
    let alg = Algebra::new(&t);
    let (sigma, a, b) = (0.5, -0.3, 0.9);
    let (f1, f2, g) = (l(&t, "f1"), l(&t, "f2"), l(&t, "g"));
    let m = map(&t, MapKind::LoccConditional { f1, f2, sigma, a, b });
    let w = apply(&m, &WeylJet::new(g, 2), &alg).unwrap();
    let (d1, d2) = (t.delta(f1, g), t.delta(f2, g));
    for x in [-1.2, 0.0, 0.4, 1.7] {
        let q = |tt: Complex64| {
            let part = |lo: f64, hi: f64, inside: bool| {
                integrate_complex(
                    |al| {
                        let damp = -tt * tt / (8.0 * sigma * sigma) * (d1 * d1 + if inside { d2 * d2 } else { 0.0 });
                        let c = x + tt * d1 / 2.0 - al;
                        (damp - c * c / (2.0 * sigma * sigma)).exp() / (sigma * (2.0 * std::f64::consts::PI).sqrt())
                    },
                    lo,
                    hi,
                    1e-13,
                )
            };
            part(-30.0, a, false) + part(a, b, true) + part(b, 30.0, false)
        };
        let coeffs = cauchy_coeffs(q, 2, 0.5);
        for j in 0..=2 {
            let got = eval_at(&w.coeffs[j], x);
            assert!((got - coeffs[j]).norm() < 1e-9, "x={x} j={j}: {got} vs {}", coeffs[j]);
        }
    }
}

#[test]
fn kicks_agree_with_substitution_route() {
    let t = table(0.0);
    let alg = Algebra::new(&t);
    let g = l(&t, "g");
    // a jet with field content in its coefficients
    let mut w = WeylJet::new(g, 2);
    w.coeffs[0] = OperatorPoly::identity().add(&phi(&t, "h").scale(re(0.3)));
    w.coeffs[1] = alg.mul(&phi(&t, "f1"), &phi(&t, "h")).unwrap().scale(Complex64::new(0.2, -0.4));
    w.coeffs[2] = phi(&t, "f").scale(re(-1.1));
    let f = l(&t, "f");
    for (mu, lambda) in [(0.0, 0.8), (0.6, 0.0)] {
        let kind = if mu == 0.0 {
            MapKind::KickField { f, lambda }
        } else {
            MapKind::KickFieldSquared { f, strength: mu }
        };
        let engine = apply(&map(&t, kind), &w, &alg).unwrap();
        // U(c(t)) U(e^{itφ(g)}) with U(φ(a)) = φ(a) + λΔ(a,f) + 2μΔ(a,f)φ(f)
        let subst = |p: &OperatorPoly| -> OperatorPoly {
            let mut out = OperatorPoly::zero();
            for (word, c) in p.terms() {
                let mut acc = OperatorPoly::scalar(*c);
                for a in word {
                    let d = t.delta(a.label(), f);
                    let img = OperatorPoly::field(a.label())
                        .add(&OperatorPoly::real(lambda * d))
                        .add(&phi(&t, "f").scale(re(2.0 * mu * d)));
                    acc = alg.mul(&acc, &img).unwrap();
                }
                out = out.add(&acc);
            }
            out
        };
        let dg = t.delta(f, g);
        // U(e^{itφ(g)}) = e^{-iμt²Δ²} e^{-2iμtΔφ(f)} e^{-iλtΔ} e^{itφ(g)}, Δ = Δ(f,g)
        let ff = phi(&t, "f");
        let ff2 = alg.mul(&ff, &ff).unwrap();
        let weyl = [
            OperatorPoly::identity(),
            OperatorPoly::real(-lambda * dg).scale(I).sub(&ff.scale(I * 2.0 * mu * dg)),
            OperatorPoly::real(-lambda * lambda * dg * dg / 2.0)
                .sub(&ff.scale(re(2.0 * mu * lambda * dg * dg)))
                .sub(&ff2.scale(re(2.0 * mu * mu * dg * dg)))
                .sub(&OperatorPoly::scalar(I * mu * dg * dg)),
        ];
        let mut want = vec![OperatorPoly::zero(); 3];
        for (i, c) in w.coeffs.iter().enumerate() {
            let uc = subst(c);
            for (j, f) in weyl.iter().enumerate() {
                if i + j <= 2 {
                    want[i + j] = want[i + j].add(&alg.mul(&uc, f).unwrap());
                }
            }
        }
        for k in 0..=2 {
            assert!(engine.coeffs[k].approx_eq(&want[k], 1e-13), "mu={mu} k={k}");
        }
    }
}

#[test]
fn unital_and_local() {
    let t = table(-0.19);
    let alg = Algebra::new(&t);
    let g = l(&t, "g");
    for m in catalogue(&t) {
        let w = apply(&m, &WeylJet::new(g, 2), &alg).unwrap();
        assert!(w.coeffs[0].approx_eq(&OperatorPoly::identity(), 1e-9), "{}", m.kind.name());
    }
    // h is spacelike to every label probed below; the maps must act trivially
    let h = l(&t, "h");
    let kinds = [
        MapKind::KickField { f: l(&t, "f2"), lambda: 2.0 },
        MapKind::KickFieldSquared { f: l(&t, "f2"), strength: 1.0 },
        MapKind::GaussianMeasureField { f: l(&t, "f2"), sigma: 0.3 },
    ];
    let mut w = WeylJet::new(h, 2);
    w.coeffs[1] = phi(&t, "h").scale(re(0.5));
    for k in kinds {
        assert_eq!(apply(&map(&t, k), &w, &alg).unwrap(), w);
    }
}

#[test]
fn generator_measurements_add_no_labels() {
    let t = table(0.0);
    let alg = Algebra::new(&t);
    let g = l(&t, "g");
    for kind in [
        MapKind::GaussianMeasureField { f: l(&t, "f"), sigma: 0.3 },
        MapKind::GeneralMeasureField { f: l(&t, "f"), profile: SampledKrausProfile::gaussian(0.3, 0.003).unwrap() },
        MapKind::KickField { f: l(&t, "f"), lambda: -0.4 },
    ] {
        let w = apply(&map(&t, kind), &WeylJet::new(g, 3), &alg).unwrap();
        for c in &w.coeffs {
            assert!(c.labels(0.0).is_empty());
        }
    }
}

#[test]
fn general_profile_reproduces_gaussian() {
    let t = table(0.0);
    let alg = Algebra::new(&t);
    let (f, g) = (l(&t, "f"), l(&t, "g"));
    let sigma = 0.4;
    let gm = apply(&map(&t, MapKind::GaussianMeasureField { f, sigma }), &WeylJet::new(g, 4), &alg).unwrap();
    let profile = SampledKrausProfile::gaussian(sigma, 0.002).unwrap();
    let hm = apply(&map(&t, MapKind::GeneralMeasureField { f, profile }), &WeylJet::new(g, 4), &alg).unwrap();
    assert!(gm.max_diff(&hm) < 1e-6);
}

#[test]
fn kick_strengths_add() {
    let t = table(0.0);
    let alg = Algebra::new(&t);
    let (f, g) = (l(&t, "f"), l(&t, "g"));
    let mut w = WeylJet::new(g, 2);
    w.coeffs[1] = phi(&t, "h");
    let k = |lambda| map(&t, MapKind::KickField { f, lambda });
    let two = apply_composition(&compose(vec![k(0.3), k(0.9)]).unwrap(), &w, &alg).unwrap();
    let one = apply(&k(1.2), &w, &alg).unwrap();
    assert!(two.max_diff(&one) < 1e-14);
}

#[test]
fn sigma_enters_through_delta_over_sigma() {
    let t = table(-0.19);
    let t2 = t.with_scaled_delta(2.0);
    let g = l(&t, "g");
    let build = |tab: &PairingTable, s: f64| {
        let alg = Algebra::new(tab);
        let c = alg.mul(&phi(tab, "f1"), &phi(tab, "f2")).unwrap();
        vec![
            map(tab, MapKind::GaussianMeasureField { f: l(tab, "f"), sigma: s }),
            map(tab, MapKind::GaussianMeasureCommutingPoly { c, sigma: s }),
        ]
    };
    for (m1, m2) in build(&t, 0.7).into_iter().zip(build(&t2, 1.4)) {
        let a = apply(&m1, &WeylJet::new(g, 2), &Algebra::new(&t)).unwrap();
        let b = apply(&m2, &WeylJet::new(g, 2), &Algebra::new(&t2)).unwrap();
        assert!(a.max_diff(&b) < 1e-14, "{}", m1.kind.name());
    }
}

#[test]
fn spacelike_maps_commute() {
    let t = table(-0.19);
    let alg = Algebra::new(&t);
    let g = l(&t, "g");
    let a = map(&t, MapKind::GaussianMeasureField { f: l(&t, "h"), sigma: 0.5 });
    let b = map(&t, MapKind::KickFieldSquared { f: l(&t, "f2"), strength: 1.0 });
    assert_eq!(t.delta(l(&t, "h"), l(&t, "f2")), 0.0);
    let ab = apply_composition(&compose(vec![a.clone(), b.clone()]).unwrap(), &WeylJet::new(g, 2), &alg).unwrap();
    let ba = apply_composition(&compose(vec![b, a]).unwrap(), &WeylJet::new(g, 2), &alg).unwrap();
    assert!(ab.max_diff(&ba) < 1e-14);
}

#[test]
fn selective_measurement_expectation_matches_conditional_mean() {
    // with all labels commuting, E(⟨W⟩) is the conditional characteristic function
    let names = vec!["f".to_string(), "g".to_string()];
    let wsym = vec![0.8, 0.3, 0.3, 1.1];
    let t = PairingTable::from_parts(names, vec![None; 2], vec![0.0; 4], Some(wsym.clone()), 1.0).unwrap();
    let alg = Algebra::new(&t);
    let rho = GaussianState::new(&t).unwrap();
    let (sigma, a, b) = (0.4, -0.2, 1.0);
    let m = map(&t, MapKind::SelectiveGaussian { f: LabelId(0), sigma, a, b });
    let w = apply(&m, &WeylJet::new(LabelId(1), 2), &alg).unwrap();
    let m2 = wick_expectation(&jet_extract(&alg, &w, 2).unwrap(), &rho).unwrap();
    let m1 = wick_expectation(&jet_extract(&alg, &w, 1).unwrap(), &rho).unwrap();
    // conditional moments of φ(g) given α = φ(f) + ε ∈ [a,b], by 2-d quadrature
    let (vf, c, vg) = (wsym[0], wsym[1], wsym[3]);
    let var_a = vf + sigma * sigma;
    let p = selective_probability(LabelId(0), sigma, a, b, &rho).unwrap();
    let dens = |al: f64| (-al * al / (2.0 * var_a)).exp() / (2.0 * std::f64::consts::PI * var_a).sqrt();
    // φ(g) | α is Gaussian with mean (c/var_a)α and variance vg − c²/var_a
    let mean1 = crate::quad::integrate(|al| dens(al) * c / var_a * al, a, b, 1e-14) / p;
    let mean2 = crate::quad::integrate(
        |al| dens(al) * ((c / var_a * al).powi(2) + vg - c * c / var_a),
        a,
        b,
        1e-14,
    ) / p;
    assert!((m1.re - mean1).abs() < 1e-10 && m1.im.abs() < 1e-12);
    assert!((m2.re - mean2).abs() < 1e-10);
}

#[test]
fn kick_shift_route_matches_engine() {
    let t = table(0.13);
    let alg = Algebra::new(&t);
    let w = apply(&map(&t, MapKind::KickFieldSquared { f: l(&t, "f"), strength: 0.6 }), &WeylJet::new(l(&t, "g"), 3), &alg)
        .unwrap();
    let kick = map(&t, MapKind::KickField { f: l(&t, "h"), lambda: -0.9 });
    let a = apply(&kick, &w, &alg).unwrap();
    let b = kick_by_shift(l(&t, "h"), -0.9, &w, &alg).unwrap();
    assert!(a.max_diff(&b) < 1e-14);
}

#[test]
fn kick_moves_windows() {
    let t = table(0.0);
    let alg = Algebra::new(&t);
    let (f, h) = (l(&t, "f"), l(&t, "h"));
    let sel = map(&t, MapKind::SelectiveGaussian { f, sigma: 0.5, a: -0.4, b: 0.8 });
    let w = apply(&sel, &WeylJet::new(l(&t, "g"), 1), &alg).unwrap();
    assert!(w.coeffs[0].has_windows());
    let out = apply(&map(&t, MapKind::KickField { f: h, lambda: 2.0 }), &w, &alg).unwrap();
    let shift = 2.0 * t.delta(f, h);
    for (word, _) in out.coeffs[0].terms() {
        for a in word {
            if let Atom::Window(win) = a {
                assert!((win.shift - shift).abs() < 1e-15);
            }
        }
    }
}
