use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use westervelt::aao::{contraction_radius, AaoOperator, AaoPoint};
use westervelt::fem::{assemble, generate_disk_mesh, AssembledOperators, Mesh2D, SigmaArc};
use westervelt::forward::{build_source, solve_forward, ExcitationSpec, ForwardConfig, ParameterSet, SpatialProfile};
use westervelt::harmonics::HarmonicField;
use westervelt::Error;

const ORDER: usize = 3;

struct Setup {
    mesh: Mesh2D,
    ops: AssembledOperators,
    params: ParameterSet,
    states: Vec<HarmonicField>,
}

fn setup(eta: f64) -> Setup {
    setup_h(eta, 0.04)
}

fn setup_h(eta: f64, h: f64) -> Setup {
    let mesh = generate_disk_mesh(0.2, h, SigmaArc::new(0.0, 4.0)).unwrap();
    let ops = assemble(&mesh, 1.0, None).unwrap();
    let n = mesh.n_nodes();
    let mut params = ParameterSet::constant(n, 2000.0, 20.0, eta);
    for (i, p) in mesh.nodes.iter().enumerate() {
        let r2 = (p[0] - 0.05).powi(2) + (p[1] - 0.03).powi(2);
        params.s[i] += 100.0 * (-r2 / 0.004).exp();
        params.b[i] += 1.0 * (-r2 / 0.004).exp();
    }
    let cfg = ForwardConfig { order: ORDER, ..Default::default() };
    let mut spec = ExcitationSpec::new(0.05, 1.0, 1000.0);
    spec.profile = SpatialProfile::AngularMode { order: 1 };
    let spec2 = ExcitationSpec::new(0.035, 1.0, 1000.0);
    let states = [spec, spec2]
        .iter()
        .map(|s| {
            let src = build_source(s, &mesh, 1.0, ORDER).unwrap();
            solve_forward(&mesh, &ops, &params, &src, &cfg).unwrap().field
        })
        .collect();
    Setup { mesh, ops, params, states }
}

fn reference(s: &Setup) -> AaoPoint {
    AaoPoint::lift(&[s.params.clone(), s.params.clone()], &s.states, ORDER).unwrap()
}

fn random_direction(x0: &AaoPoint, rng: &mut ChaCha8Rng) -> AaoPoint {
    let mut d = x0.clone();
    for e in &mut d.experiments {
        for (field, scale) in [(&mut e.s, 2000.0), (&mut e.b, 20.0), (&mut e.eta, 1e-4), (&mut e.u, 1000.0)] {
            for v in field.iter_mut().flatten() {
                *v = scale * rng.random_range(-1.0..1.0);
            }
        }
    }
    d
}

fn max_abs(s: &[Vec<f64>]) -> f64 {
    s.iter().flatten().fold(0.0, |m, v| m.max(v.abs()))
}

#[test]
fn zero_state_gives_zero_residual() {
    let s = setup(2e-4);
    let op = AaoOperator::new(&s.mesh, &s.ops).unwrap();
    let mut x = reference(&s);
    for e in &mut x.experiments {
        e.u.iter_mut().flatten().for_each(|v| *v = 0.0);
    }
    let r = op.eval(&x).unwrap();
    for e in &r.experiments {
        assert_eq!(max_abs(&e.model), 0.0);
        assert_eq!(max_abs(&e.boundary), 0.0);
        assert_eq!(max_abs(&e.observation), 0.0);
    }
}

#[test]
fn forward_solution_has_small_model_residual() {
    let s = setup(2e-4);
    let op = AaoOperator::new(&s.mesh, &s.ops).unwrap();
    let x = AaoPoint::lift(&[s.params.clone()], &s.states[..1], ORDER).unwrap();
    let r = op.eval(&x).unwrap();
    let h = r.harmonics(ORDER).unwrap();
    let model = &h[0][0];
    // scale of the individual terms: b ω² N² |u|
    let scale = 20.0 * (x.experiments[0].omega * ORDER as f64).powi(2) * s.states[0].max_abs();
    assert!(model.max_abs() <= 1e-8 * scale, "model residual {} vs {}", model.max_abs(), scale);
}

#[test]
fn boundary_part_converges_to_robin_data() {
    let g1 = 1000.0 * (1.0 + 1.0 / 0.2);
    let errs: Vec<f64> = [0.04, 0.02, 0.01]
        .iter()
        .map(|&h| {
            let s = setup_h(2e-4, h);
            let op = AaoOperator::new(&s.mesh, &s.ops).unwrap();
            let x = AaoPoint::lift(&[s.params.clone()], &s.states[..1], ORDER).unwrap();
            let b = &op.eval(&x).unwrap().harmonics(ORDER).unwrap()[0][1];
            op.boundary
                .iter()
                .enumerate()
                .map(|(k, &i)| {
                    let [px, py] = s.mesh.nodes[i];
                    (b.coeffs[1][k].re - g1 * py.atan2(px).cos()).abs()
                })
                .fold(0.0, f64::max)
        })
        .collect();
    for w in errs.windows(2) {
        assert!(w[0] / w[1] > 1.8, "flux error not first order: {errs:?}");
    }
}

#[test]
fn linear_in_u_without_nonlinearity() {
    let s = setup(0.0);
    let op = AaoOperator::new(&s.mesh, &s.ops).unwrap();
    let x = reference(&s);
    let mut x2 = x.clone();
    for e in &mut x2.experiments {
        e.u.iter_mut().flatten().for_each(|v| *v *= 2.0);
    }
    let r1 = op.eval(&x).unwrap();
    let r2 = op.eval(&x2).unwrap();
    for (a, b) in r1.experiments.iter().zip(&r2.experiments) {
        let scale = max_abs(&b.model).max(1.0);
        for (p, q) in a.model.iter().flatten().zip(b.model.iter().flatten()) {
            assert!((2.0 * p - q).abs() <= 1e-12 * scale);
        }
    }
}

#[test]
fn linearization_matches_finite_differences() {
    let s = setup(2e-4);
    let op = AaoOperator::new(&s.mesh, &s.ops).unwrap();
    let x0 = reference(&s);
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let dir = random_direction(&x0, &mut rng);
    let f0 = op.eval(&x0).unwrap();
    let lin = op.eval_linearized(&x0, &dir).unwrap();
    let mut errs = Vec::new();
    for eps in [1e-2, 5e-3, 2.5e-3] {
        let fe = op.eval(&x0.axpy(eps, &dir)).unwrap();
        let mut err: f64 = 0.0;
        for ((a, b), l) in fe.experiments.iter().zip(&f0.experiments).zip(&lin.experiments) {
            for ((p, q), d) in a.model.iter().flatten().zip(b.model.iter().flatten()).zip(l.model.iter().flatten()) {
                err = err.max((p - q - eps * d).abs());
            }
        }
        errs.push(err);
    }
    for w in errs.windows(2) {
        let slope = (w[0] / w[1]).log2();
        assert!(slope >= 1.9, "finite-difference slope {slope}");
    }
    let zero = op.eval_linearized(&x0, &x0.sub(&x0)).unwrap();
    assert!(zero.experiments.iter().all(|e| max_abs(&e.model) == 0.0 && max_abs(&e.boundary) == 0.0));
}

#[test]
fn range_invariance_holds_to_rounding() {
    let s = setup(2e-4);
    let op = AaoOperator::new(&s.mesh, &s.ops).unwrap();
    let x0 = reference(&s);
    let cu = AaoOperator::default_cu(&x0);
    assert_eq!(op.check_range_invariance(&x0, &x0, cu).unwrap(), 0.0);

    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for trial in 0..5 {
        let dir = random_direction(&x0, &mut rng);
        let x = x0.axpy(1e-2, &dir);
        let res = op.check_range_invariance(&x, &x0, cu).unwrap();
        assert!(res <= 1e-12, "trial {trial}: residual {res:e}");
    }

    let mut x = x0.clone();
    for e in &mut x.experiments {
        e.b.iter_mut().flatten().for_each(|v| *v *= 1.01);
    }
    let r = op.r_map(&x, &x0, cu).unwrap();
    for (a, (b, c)) in r.experiments.iter().zip(x.experiments.iter().zip(&x0.experiments)) {
        for ((d, p), q) in a.b.iter().flatten().zip(b.b.iter().flatten()).zip(c.b.iter().flatten()) {
            assert_eq!(*d, p - q);
        }
    }
    let res = op.check_range_invariance(&x, &x0, cu).unwrap();
    // x0 solves the model, so F(x) − F(x0) is a small difference of large terms
    assert!(res <= 1e-11, "b-only residual {res:e}");

    let r0 = op.r_map(&x0, &x0, cu).unwrap();
    for e in &r0.experiments {
        for f in [&e.s, &e.b, &e.eta, &e.u] {
            assert_eq!(max_abs(f), 0.0);
        }
    }
}

#[test]
fn reference_bound_violation_is_reported() {
    let s = setup(2e-4);
    let op = AaoOperator::new(&s.mesh, &s.ops).unwrap();
    let mut x0 = reference(&s);
    let node = op.interior[3];
    x0.experiments[0].u[2][node] = 0.0;
    match op.r_map(&x0, &x0, 1e-6) {
        Err(Error::ReferenceBound { node: n, time: 2, .. }) => assert_eq!(n, node),
        other => panic!("expected a reference bound error, got {other:?}"),
    }
}

#[test]
fn contraction_ratio_shrinks_with_distance() {
    let s = setup(2e-4);
    let op = AaoOperator::new(&s.mesh, &s.ops).unwrap();
    let x0 = reference(&s);
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut dir = random_direction(&x0, &mut rng);
    // smooth state direction: the Laplacian of nodal noise would dominate ds̃
    for (d, r) in dir.experiments.iter_mut().zip(&x0.experiments) {
        for (row, r_row) in d.u.iter_mut().zip(&r.u) {
            for (i, (v, u0)) in row.iter_mut().zip(r_row).enumerate() {
                let [px, py] = s.mesh.nodes[i];
                *v = u0 * (1.0 + 5.0 * px * py);
            }
        }
    }
    let eps = [1e-2, 1e-4, 1e-6, 1e-8];
    let curve = op.contraction_curve(&x0, &dir, &eps, AaoOperator::default_cu(&x0)).unwrap();
    assert!(curve.last().unwrap().ratio < 1.0);
    for w in curve.windows(2) {
        assert!(w[1].ratio < w[0].ratio);
    }
    assert!(contraction_radius(&curve) > 0.0);
}
