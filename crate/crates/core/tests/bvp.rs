use cogur_core::geometry::{build_disk, build_interval};
use cogur_core::wentzell::solve_bvp;
use cogur_core::{DVector, Error};

#[test]
fn interval_quadratic_is_recovered_exactly() {
    let beta = 1.5;
    let g = build_interval(1.0, 17).unwrap();
    let p1 = DVector::from_element(g.n_nodes(), -2.0);
    let p2 = g.boundary_nodal(|p| if p[0] < 0.5 { 0.0 } else { 2.0 + beta });
    let sol = solve_bvp(&g, &p1, &p2, beta).unwrap();
    let exact = g.nodal(|p| p[0] * p[0]);
    assert!((sol.field.u() - exact).amax() < 1e-10);
    assert!(sol.regularity_ratio.is_finite());
}

#[test]
fn disk_linear_solution_converges_at_second_order() {
    let beta = 1.0;
    let mut widths = Vec::new();
    let mut errors = Vec::new();
    for depth in 2..=4 {
        let g = build_disk(1.0, depth).unwrap();
        let p1 = DVector::zeros(g.n_nodes());
        let p2 = g.boundary_nodal(|p| (2.0 + beta) * p[0]);
        let sol = solve_bvp(&g, &p1, &p2, beta).unwrap();
        let e = sol.field.u() - g.nodal(|p| p[0]);
        errors.push(g.bulk_mass().quad_form(&e).sqrt());
        widths.push(g.mesh_width());
    }
    for i in 1..errors.len() {
        let order = (errors[i - 1] / errors[i]).ln() / (widths[i - 1] / widths[i]).ln();
        assert!((order - 2.0).abs() < 0.3, "order {order}, errors {errors:?}");
    }
}

#[test]
fn nonpositive_beta_is_unsupported() {
    let g = build_interval(1.0, 4).unwrap();
    let r = solve_bvp(&g, &DVector::zeros(5), &DVector::zeros(2), 0.0);
    assert!(matches!(r, Err(Error::UnsupportedParameter(_))));
}
