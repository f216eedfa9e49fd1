use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BatchSize, Criterion};
use qfupdate_core::algebra::wick_expectation;
use qfupdate_core::classical::{generate_solution, Lattice};
use qfupdate_core::protocol::{check_protocol, run_protocol};
use qfupdate_core::sampler::{sample_measurements, Convention, MeasurementPlan};
use qfupdate_core::smearing::{delta_bilinear, DeltaKernel, QuadratureConfig};
use qfupdate_core::{
    parse_protocol, Algebra, BumpSpec, GaussianState, LabelId, OperatorPoly, PairingTable, Prepared, Rect, SmearingFunction,
};

const S1: &str = include_str!("../../core/fixtures/s1_balanced.qfp");
const S2: &str = include_str!("../../core/fixtures/s2_product.qfp");

fn bump(t: f64, x: f64) -> SmearingFunction {
    SmearingFunction::Bump(BumpSpec::cosine(t, x, 0.4))
}

fn smearing(c: &mut Criterion) {
    let (f, g) = (bump(0.0, 0.0), bump(1.5, 0.6));
    let q = QuadratureConfig::default();
    c.bench_function("delta_bilinear", |b| {
        b.iter(|| delta_bilinear(black_box(&f), black_box(&g), DeltaKernel { mass: 1.0 }, &q).unwrap())
    });
}

fn algebra(c: &mut Criterion) {
    let fs: Vec<(String, SmearingFunction)> =
        (0..4).map(|i| (format!("f{i}"), bump(0.5 * i as f64, 0.3 * i as f64))).collect();
    let table = PairingTable::build(&fs, 1.0, &QuadratureConfig::default()).unwrap();
    let rho = GaussianState::new(&table).unwrap();
    let alg = Algebra::with_max_degree(&table, 6);
    let s = (0..4).fold(OperatorPoly::zero(), |acc, i| acc.add(&OperatorPoly::field(LabelId(i))));
    let p = alg.pow(&s, 6).unwrap();
    c.bench_function("wick_degree6_four_labels", |b| b.iter(|| wick_expectation(black_box(&p), &rho).unwrap()));
}

fn protocol(c: &mut Criterion) {
    let s1 = Prepared::new(parse_protocol(S1).unwrap()).unwrap();
    c.bench_function("run_s1_sweep", |b| b.iter(|| run_protocol(black_box(&s1), None).unwrap()));
    c.bench_function("check_s1", |b| b.iter(|| check_protocol(black_box(&s1)).unwrap()));
    c.bench_function("parse_s2", |b| b.iter(|| parse_protocol(black_box(S2)).unwrap()));
}

fn sampler(c: &mut Criterion) {
    let fs = vec![("a".to_string(), bump(0.0, 0.0)), ("b".to_string(), bump(0.0, 1.2))];
    let table = PairingTable::build(&fs, 1.0, &QuadratureConfig::default()).unwrap();
    let rho = GaussianState::new(&table).unwrap();
    let plan = MeasurementPlan::new(vec![(LabelId(0), 1.0), (LabelId(1), 1.0)], Convention::Commuting, &rho).unwrap();
    let mut seed = 0;
    c.bench_function("sample_1e5_pairs", |b| {
        b.iter_batched(
            || {
                seed += 1;
                seed
            },
            |s| sample_measurements(&plan, &rho, 100_000, s, false).unwrap(),
            BatchSize::SmallInput,
        )
    });
}

fn classical(c: &mut Criterion) {
    let f = bump(0.0, 0.0);
    let lat = Lattice::square(Rect::new(-0.6, 2.0, -2.8, 2.8).unwrap(), 0.02).unwrap();
    c.bench_function("generate_solution_dx002", |b| b.iter(|| generate_solution(black_box(&f), 1.0, &lat).unwrap()));
}

criterion_group! {
    name = kernels;
    config = Criterion::default().sample_size(20);
    targets = smearing, algebra, protocol, sampler, classical
}
criterion_main!(kernels);
