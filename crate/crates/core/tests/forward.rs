use westervelt::fem::{assemble, generate_disk_mesh, SigmaArc};
use westervelt::forward::{build_source, solve_forward, transform_parameters, ExcitationSpec, ForwardConfig, ParameterSet};
use westervelt::sensitivity::{observe, MeasurementSpace};

#[test]
fn doubling_the_truncation_barely_moves_the_traces() {
    let mesh = generate_disk_mesh(0.2, 0.02, SigmaArc::full()).unwrap();
    let ops = assemble(&mesh, 1.0, None).unwrap();
    let (s, b, eta) = transform_parameters(10.11, 0.051, 7.0, 1000.0).unwrap();
    let params = ParameterSet::constant(mesh.n_nodes(), s, b, eta);
    let space = MeasurementSpace::new(&mesh, &ops).unwrap();
    for period in [0.05, 0.035] {
        let spec = ExcitationSpec::new(period, 1.0, 1000.0);
        let traces = |order: usize| {
            let src = build_source(&spec, &mesh, 1.0, order).unwrap();
            let sol = solve_forward(&mesh, &ops, &params, &src, &ForwardConfig { order, ..Default::default() }).unwrap();
            observe(&sol.field.with_order(3), &mesh).unwrap()
        };
        let coarse = traces(3);
        let fine = traces(6);
        let change = space.norm(&fine.sub(&coarse).unwrap()) / space.norm(&fine);
        assert!(change < 0.01, "period {period}: relative trace change {change:e}");
    }
}

#[test]
fn amplitude_scaling_of_the_linear_part() {
    let mesh = generate_disk_mesh(0.2, 0.04, SigmaArc::full()).unwrap();
    let ops = assemble(&mesh, 1.0, None).unwrap();
    let params = ParameterSet::constant(mesh.n_nodes(), 2000.0, 20.0, 0.0);
    let cfg = ForwardConfig { order: 3, ..Default::default() };
    let solve = |amp: f64| {
        let src = build_source(&ExcitationSpec::new(0.05, 1.0, amp), &mesh, 1.0, 3).unwrap();
        solve_forward(&mesh, &ops, &params, &src, &cfg).unwrap().field
    };
    let (a, b) = (solve(1000.0), solve(250.0));
    let diff = a.sub(&b.scale(4.0)).unwrap();
    assert!(diff.max_abs() <= 1e-9 * a.max_abs());
    assert_eq!(a.harmonic_norm(2), 0.0);
}
