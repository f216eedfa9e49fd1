use proptest::prelude::*;

use super::*;
use crate::geometry::Point;
use crate::smearing::BumpKind;

const S1_SQUARED: &str = include_str!("../../fixtures/s1_kick_squared.qfp");
const S1_KICK: &str = include_str!("../../fixtures/s1_kick.qfp");
const S2: &str = include_str!("../../fixtures/s2_product.qfp");
const S4: &str = include_str!("../../fixtures/s4_locc.qfp");
const GENERATORS: &str = include_str!("../../fixtures/all_generators.qfp");
const FIXTURES: [&str; 7] = [
    S1_KICK,
    S1_SQUARED,
    include_str!("../../fixtures/s1_balanced.qfp"),
    S2,
    include_str!("../../fixtures/s3_jordan.qfp"),
    S4,
    GENERATORS,
];

fn centre(spec: &ProtocolSpec, name: &str) -> Point {
    match &spec.functions.iter().find(|d| d.name == name).unwrap().source {
        FunctionSource::Bump(b) => b.center,
        FunctionSource::File(_) => unreachable!(),
    }
}

/// Table over the spec's bumps with hand-picked Δ values and a Gaussian
/// kernel for `W_s`.
fn synthetic(spec: &ProtocolSpec, deltas: &[(&str, &str, f64)]) -> PairingTable {
    let names: Vec<String> = spec.functions.iter().map(|d| d.name.clone()).collect();
    let n = names.len();
    let mut d = vec![0.0; n * n];
    for &(a, b, v) in deltas {
        let (i, j) = (names.iter().position(|x| x == a).unwrap(), names.iter().position(|x| x == b).unwrap());
        d[i * n + j] = v;
        d[j * n + i] = -v;
    }
    let mut w = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            let (p, q) = (centre(spec, &names[i]), centre(spec, &names[j]));
            let r2 = (p.t - q.t).powi(2) + (p.x - q.x).powi(2);
            w[i * n + j] = 0.3 * (-r2).exp() + if i == j { 0.2 } else { 0.0 };
        }
    }
    let supports = spec.load_functions().unwrap().iter().map(|(_, f)| f.support_region()).collect();
    PairingTable::from_parts(names, supports, d, Some(w), 1.0).unwrap()
}

fn s1(text: &str) -> Prepared {
    let spec = parse_protocol(text).unwrap();
    let t = synthetic(&spec, &[("h", "f", 0.21), ("f", "g", -0.13)]);
    Prepared::with_table(spec, t).unwrap()
}

fn parse_err(text: &str) -> (usize, usize, String) {
    match parse_protocol(text) {
        Err(Error::Parse { line, column, message }) => (line, column, message),
        other => panic!("expected a parse error, got {other:?}"),
    }
}

const MINIMAL: &str = "[function g]\ncenter = 0, 0\nhalf_width = 0.4\n\n[readout]\nobservable = phi(g)\n";

#[test]
fn minimal_file() {
    let s = parse_protocol(MINIMAL).unwrap();
    assert_eq!(s.functions.len(), 1);
    assert!(s.ops.is_empty());
    assert_eq!(s.field, FieldConfig::default());
    assert_eq!(s.readout.observable, ObservableExpr::Field("g".into()));
    assert_eq!(s.sweep(), DEFAULT_SWEEP.to_vec());
}

#[test]
fn duplicate_function_names_both_sites() {
    let text = format!("{MINIMAL}\n[function g]\ncenter = 1, 1\nhalf_width = 0.4\n");
    let (line, _, msg) = parse_err(&text);
    assert_eq!(line, 8);
    assert!(msg.contains("line 1") && msg.contains("line 8"), "{msg}");
}

#[test]
fn errors_have_locations() {
    let (l, c, m) = parse_err(&MINIMAL.replace("half_width = 0.4", "half_width = 0.4\n  colour = red"));
    assert_eq!((l, c), (4, 3));
    assert!(m.contains("unknown key 'colour'"));
    let (l, c, m) = parse_err(&MINIMAL.replace("center = 0, 0", "center = 0, 1.2.3"));
    assert_eq!((l, c), (2, 13));
    assert!(m.contains("malformed number"));
    let (l, c, m) = parse_err(&MINIMAL.replace("phi(g)", "phi(q)"));
    assert_eq!((l, c), (6, 14));
    assert!(m.contains("unknown function 'q'"));
    let (l, c, _) = parse_err(&MINIMAL.replace("phi(g)", "phi(g) +"));
    assert_eq!((l, c), (6, 22));
    let (l, _, m) = parse_err("[readout]\nobservable = phi(g)\n[oops]\n");
    assert_eq!(l, 3);
    assert!(m.contains("unknown section"));
    assert!(parse_err("[function g]\ncenter = 0, 0\nhalf_width = 0.4\n").2.contains("missing [readout]"));
}

#[test]
fn operation_keys_are_checked() {
    let op = |body: &str| format!("{MINIMAL}\n[op 1]\nagent = A\n{body}\n");
    assert!(parse_err(&op("map = kick\nfield = g\nstrength = lambda\ncondition = x > 0")).2.contains("reserved"));
    assert!(parse_err(&op("map = teleport\nfield = g")).2.contains("unknown map"));
    assert!(parse_err(&op("map = gaussian_measure\nfield = g\nsigma = -1")).2.contains("positive"));
    assert!(parse_err(&op("map = selective_gaussian\nfield = g\nsigma = 1\ninterval = 2, 1")).2.contains("a <= b"));
    assert!(parse_err(&op("map = kick_squared\nfield = g\nstrength = lambda")).2.contains("only 'kick'"));
    let two = format!("{}\n[op 2]\nagent = B\nmap = kick\nfield = g\nstrength = lambda\n", op("map = kick\nfield = g\nstrength = lambda"));
    assert!(parse_err(&two).2.contains("only one operation"));
    let s = parse_protocol(&op("map = selective_gaussian\nfield = g\nsigma = 1\ninterval = -inf, 0.5")).unwrap();
    assert!(matches!(s.ops[0].map, MapSpec::SelectiveGaussian { a, .. } if a == f64::NEG_INFINITY));
}

#[test]
fn operations_sorted_by_index() {
    let text = format!(
        "{MINIMAL}\n[op 7]\nagent = B\nmap = kick\nfield = g\nstrength = 2\n\n[op 3]\nagent = A\nmap = kick\nfield = g\nstrength = 1\n"
    );
    let s = parse_protocol(&text).unwrap();
    assert_eq!(s.ops.iter().map(|o| o.index).collect::<Vec<_>>(), vec![3, 7]);
    let dup = text.replace("[op 7]", "[op 3]");
    assert!(parse_err(&dup).2.contains("operation 3 defined on line"));
}

#[test]
fn sweeps() {
    assert_eq!(parse_sweep_arg("-1:1:0.5").unwrap().values(), vec![-1.0, -0.5, 0.0, 0.5, 1.0]);
    assert_eq!(parse_sweep_arg("0:0.3:0.1").unwrap().values().len(), 4);
    assert!(parse_sweep_arg("1:0:0.5").is_err());
    assert!(parse_sweep_arg("0:1").is_err());
}

#[test]
fn fixtures_round_trip() {
    for text in FIXTURES {
        let a = parse_protocol(text).unwrap();
        let b = parse_protocol(&a.to_string()).unwrap();
        assert_eq!(a, b);
    }
}

#[test]
fn s1_fixture_regions() {
    let s = parse_protocol(S1_SQUARED).unwrap();
    let region = |n: &str| RegionSet::single(Rect::square(centre(&s, n), 0.4).unwrap());
    assert_eq!(region_relation(&region("h"), &region("g")), RegionRelation::StrictlySpacelike);
    assert_eq!(region_relation(&region("h"), &region("f")), RegionRelation::CausallyConnected);
    assert_eq!(region_relation(&region("f"), &region("g")), RegionRelation::CausallyConnected);
}

#[test]
fn squared_kick_column() {
    let p = s1(S1_SQUARED);
    let run = run_protocol(&p, None).unwrap();
    for r in &run.rows {
        let want = 2.0 * r.lambda * 0.21 * -0.13;
        assert!((r.analytic - want).abs() <= 1e-15, "{} vs {want}", r.analytic);
        assert!(r.mc.is_none());
    }
    let run = run_protocol(&s1(S1_KICK), Some(&[-2.0, 0.0, 3.0])).unwrap();
    assert!(run.rows.iter().all(|r| r.analytic == run.rows[0].analytic));
}

#[test]
fn analytic_columns_are_quadratic() {
    let spec = parse_protocol(S2).unwrap();
    let t = synthetic(&spec, &[("h", "f1", 0.3), ("f2", "g", -0.25), ("f1", "g", 0.0)]);
    let p = Prepared::with_table(spec, t).unwrap();
    let lambdas = [-1.0, -0.5, 0.0, 0.5, 1.0];
    let rows = run_protocol(&p, Some(&lambdas)).unwrap().rows;
    let y: Vec<f64> = rows.iter().map(|r| r.analytic).collect();
    let c = crate::causality::polyfit(&lambdas, &y, 2).unwrap();
    for (l, v) in lambdas.iter().zip(&y) {
        assert!((c[0] + c[1] * l + c[2] * l * l - v).abs() < 1e-10 * v.abs());
    }
    let sigma = 0.5f64;
    assert!((c[2] - (0.25 / (2.0 * sigma)).powi(2) * 0.3f64.powi(2)).abs() < 1e-14);
    for r in &rows {
        let (m, se) = (r.mc.unwrap(), r.se.unwrap());
        assert!((m - r.analytic).abs() < 4.0 * se, "{m} ± {se} vs {}", r.analytic);
    }
}

#[test]
fn verdicts() {
    let kick = check_protocol(&s1(S1_KICK)).unwrap();
    assert_eq!(kick.verdict, Verdict::Causal);
    assert!(kick.ops.iter().all(|o| o.verdict == Verdict::Causal));
    assert!(!kick.signal.as_ref().unwrap().signal);

    let sq = check_protocol(&s1(S1_SQUARED)).unwrap();
    assert_eq!(sq.verdict, Verdict::Acausal);
    assert_eq!(sq.ops[1].verdict, Verdict::Acausal);
    let w = &sq.ops[1].reports[0].witnesses;
    assert!(!w.is_empty() && w[0].label == "f" && w[0].partner.is_some());
    assert!(sq.signal.as_ref().unwrap().signal);

    let spec = parse_protocol(GENERATORS).unwrap();
    let t = synthetic(&spec, &[("h", "f", 0.2), ("f", "g", 0.3), ("k", "f", 0.1), ("k", "g", -0.05)]);
    let gens = check_protocol(&Prepared::with_table(spec, t).unwrap()).unwrap();
    assert_eq!(gens.verdict, Verdict::Causal);
    assert!(gens.ops.iter().all(|o| o.verdict == Verdict::Causal));
    assert!(gens.signal.unwrap().coefficients.iter().skip(1).all(|c| c.abs() < 1e-12));

    let spec = parse_protocol(S4).unwrap();
    let t = synthetic(&spec, &[("f1", "f2", 0.2), ("f1", "g", 0.15), ("f2", "g", 0.25)]);
    let locc = check_protocol(&Prepared::with_table(spec, t).unwrap()).unwrap();
    assert_eq!(locc.ops[1].verdict, Verdict::Inconclusive);
    assert_eq!(locc.verdict, Verdict::Causal);
    assert!(locc.to_text().contains("[summary]\nverdict = causal"));
}

#[test]
fn check_without_alice_records_why() {
    let text = S1_SQUARED.replace("strength = lambda", "strength = 0.5");
    let r = check_protocol(&s1(&text)).unwrap();
    assert!(r.signal.is_none());
    assert!(r.signal_note.unwrap().contains("lambda"));
    assert_eq!(r.verdict, Verdict::Acausal);
}

#[test]
fn verdicts_survive_renaming() {
    let functions: BTreeMap<String, String> =
        [("h", "source"), ("f", "middle"), ("g", "probe")].iter().map(|(a, b)| (a.to_string(), b.to_string())).collect();
    let agents: BTreeMap<String, String> =
        [("Alice", "A1"), ("Charlie", "C1"), ("Bob", "B1")].iter().map(|(a, b)| (a.to_string(), b.to_string())).collect();
    for text in [S1_KICK, S1_SQUARED] {
        let spec = parse_protocol(text).unwrap();
        let renamed = spec.renamed(&functions, &agents);
        assert!(renamed.to_string().contains("phi(probe)"));
        let t = synthetic(&spec, &[("h", "f", 0.21), ("f", "g", -0.13)]);
        let rt = synthetic(&renamed, &[("source", "middle", 0.21), ("middle", "probe", -0.13)]);
        let a = check_protocol(&Prepared::with_table(spec, t).unwrap()).unwrap();
        let b = check_protocol(&Prepared::with_table(renamed, rt).unwrap()).unwrap();
        assert_eq!(a.verdict, b.verdict);
        assert_eq!(
            a.ops.iter().map(|o| o.verdict).collect::<Vec<_>>(),
            b.ops.iter().map(|o| o.verdict).collect::<Vec<_>>()
        );
        assert_eq!(a.signal.unwrap().coefficients, b.signal.unwrap().coefficients);
    }
}

#[test]
fn operation_errors_carry_the_index() {
    let text = S1_SQUARED.replace("map = kick_squared\nfield = f\nstrength = 1", "map = gaussian_measure_jordan\nfields = f, g\nsigma = 1");
    let spec = parse_protocol(&text).unwrap();
    let t = synthetic(&spec, &[("h", "f", 0.2)]);
    match Prepared::with_table(spec, t) {
        Err(Error::Operation { index, .. }) => assert_eq!(index, 2),
        other => panic!("{other:?}"),
    }
    let late = S1_KICK.replace("[op 1]", "[op 9]\nregion = -3 -2.9 1.7 1.8");
    let spec = parse_protocol(&late).unwrap();
    let t = synthetic(&spec, &[("h", "f", 0.2)]);
    match Prepared::with_table(spec, t) {
        Err(Error::Operation { index: 9, source }) => assert!(source.to_string().contains("past of operation 2")),
        other => panic!("{other:?}"),
    }
}

#[test]
fn csv_columns() {
    let mut buf = Vec::new();
    run_protocol(&s1(S1_SQUARED), Some(&[0.0, 1.0])).unwrap().write_csv(&mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("lambda,analytic,mc_estimate,mc_se"));
    assert!(lines.next().unwrap().starts_with("0,0e0,,"));
}

#[test]
fn lattice_backend_matches_quadrature() {
    let text = "[field]\nbackend = lattice\nlattice_dx = 0.02\n\n[function h]\ncenter = 0, 0\nhalf_width = 0.4\n\n[function f]\ncenter = 1.5, 1.8\nhalf_width = 0.4\n\n[readout]\nobservable = phi(f)\n";
    let spec = parse_protocol(text).unwrap();
    let funcs = spec.load_functions().unwrap();
    let lat = build_table(&spec.field, &funcs).unwrap();
    let quad = build_table(&FieldConfig::default(), &funcs).unwrap();
    let (h, f) = (LabelId(0), LabelId(1));
    assert!((lat.delta(h, f) - quad.delta(h, f)).abs() < 0.02 * quad.delta(h, f).abs());
    assert_eq!(lat.wsym(h, f), quad.wsym(h, f));
}

fn arb_spec() -> impl Strategy<Value = ProtocolSpec> {
    let num = || (-400i32..400).prop_map(|v| v as f64 / 16.0);
    let pos = || (1i32..64).prop_map(|v| v as f64 / 8.0);
    let names = ["a", "b", "c"];
    let name = move || prop::sample::select(names.to_vec()).prop_map(str::to_string);
    let map = prop_oneof![
        (name(), prop::option::of(num())).prop_map(|(field, s)| MapSpec::Kick {
            field,
            strength: s.map_or(Strength::Lambda, Strength::Value)
        }),
        (name(), num()).prop_map(|(field, strength)| MapSpec::KickSquared { field, strength }),
        (name(), pos()).prop_map(|(field, sigma)| MapSpec::GaussianMeasure { field, sigma }),
        (name(), pos(), pos()).prop_map(|(field, sigma, profile_spacing)| MapSpec::GeneralMeasure {
            field,
            sigma,
            profile_spacing
        }),
        (name(), name(), pos()).prop_map(|(a, b, sigma)| MapSpec::GaussianMeasurePoly {
            poly: ObservableExpr::Product(Box::new(ObservableExpr::Field(a)), Box::new(ObservableExpr::Field(b))),
            sigma
        }),
        (name(), name(), pos()).prop_map(|(f1, f2, sigma)| MapSpec::GaussianMeasureJordan { f1, f2, sigma }),
        (name(), pos(), num(), pos()).prop_map(|(field, sigma, a, w)| MapSpec::SelectiveGaussian {
            field,
            sigma,
            a,
            b: a + w
        }),
        (name(), name(), pos(), pos()).prop_map(|(f1, f2, sigma, b)| MapSpec::LoccConditional {
            f1,
            f2,
            sigma,
            a: f64::NEG_INFINITY,
            b
        }),
    ];
    let op = (map, prop::option::of((num(), pos(), num(), pos())), prop::bool::ANY).prop_map(|(map, r, alice)| {
        let map = match map {
            MapSpec::Kick { field, .. } if !alice => MapSpec::Kick { field, strength: Strength::Value(0.5) },
            m => m,
        };
        let region = r.map(|(t, dt, x, dx)| vec![Rect::new(t, t + dt, x, x + dx).unwrap()]);
        (map, region)
    });
    (
        pos(),
        prop::collection::vec((num(), num(), pos(), num(), prop::bool::ANY), 3),
        prop::collection::vec(op, 0..4),
        prop::option::of(prop::collection::vec(num(), 1..4)),
        prop::option::of(1usize..1000),
        any::<u32>(),
    )
        .prop_map(move |(mass, fns, ops, lambdas, samples, seed)| {
            let functions = fns
                .into_iter()
                .zip(names)
                .map(|((t, x, w, a, g), n)| FunctionDef {
                    name: n.into(),
                    source: FunctionSource::Bump(BumpSpec {
                        center: Point::new(t, x),
                        half_width: w,
                        amplitude: a,
                        kind: if g { BumpKind::TruncatedGaussian } else { BumpKind::CosineBump },
                    }),
                })
                .collect();
            let mut seen_alice = false;
            let ops = ops
                .into_iter()
                .enumerate()
                .map(|(i, (map, region))| {
                    let map = match map {
                        MapSpec::Kick { field, strength: Strength::Lambda } if seen_alice => {
                            MapSpec::Kick { field, strength: Strength::Value(1.0) }
                        }
                        m => m,
                    };
                    if matches!(map, MapSpec::Kick { strength: Strength::Lambda, .. }) {
                        seen_alice = true;
                    }
                    OpSpec { index: 2 * i as u32 + 1, agent: format!("agent{i}"), map, region }
                })
                .collect();
            ProtocolSpec {
                field: FieldConfig { mass, ..FieldConfig::default() },
                functions,
                ops,
                readout: Readout {
                    agent: "Bob".into(),
                    observable: ObservableExpr::Power(Box::new(ObservableExpr::Field("c".into())), 2),
                    region: None,
                    sweep: lambdas.map(Sweep::List),
                    sigma: 1.0,
                    samples,
                    seed: seed as u64,
                },
                base_dir: PathBuf::from("."),
            }
        })
}

proptest! {
    #[test]
    fn print_then_parse_is_identity(spec in arb_spec()) {
        let text = spec.to_string();
        prop_assert_eq!(parse_protocol(&text).unwrap(), spec, "{}", text);
    }
}
