use std::f64::consts::PI;

use criterion::{black_box, criterion_group, criterion_main, Criterion};
use steklov_bench::default_mesh;
use steklov_core::{
    apply_quasi_periodic, assemble_stiffness, assemble_surface_mass, capacity_integral, solve_steklov, ApertureShape,
    SolverOptions,
};

fn assembly(c: &mut Criterion) {
    let mesh = default_mesh(0.2, 0.25);
    c.bench_function("assemble_stiffness", |b| b.iter(|| assemble_stiffness(black_box(&mesh)).unwrap()));
    let k = assemble_stiffness(&mesh).unwrap();
    let m = assemble_surface_mass(&mesh);
    c.bench_function("apply_quasi_periodic", |b| b.iter(|| apply_quasi_periodic(&k, &m, &mesh, black_box(PI)).unwrap()));
}

fn solve(c: &mut Criterion) {
    let mesh = default_mesh(0.2, 0.25);
    let k = assemble_stiffness(&mesh).unwrap();
    let m = assemble_surface_mass(&mesh);
    let sys = apply_quasi_periodic(&k, &m, &mesh, PI).unwrap();
    let opts = SolverOptions::default();
    let mut g = c.benchmark_group("solve");
    g.sample_size(10);
    g.bench_function("six_modes_eta_pi", |b| b.iter(|| solve_steklov(black_box(&sys), 6, &opts).unwrap()));
    g.finish();
}

fn capacity(c: &mut Criterion) {
    let disk = ApertureShape::disk(1.0);
    let mut g = c.benchmark_group("capacity");
    g.sample_size(10);
    for level in [1, 2] {
        g.bench_function(format!("disk_level_{level}"), |b| b.iter(|| capacity_integral(black_box(&disk), level).unwrap()));
    }
    g.finish();
}

criterion_group!(benches, assembly, solve, capacity);
criterion_main!(benches);
