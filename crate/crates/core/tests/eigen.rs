use cogur_core::geometry::{build_disk, build_interval};
use cogur_core::wentzell::assemble;
use cogur_core::DVector;
use cogur_oracles::IntervalProblem;

fn orthonormality_defect(cells: usize, modes: usize) -> f64 {
    let g = build_interval(1.0, cells).unwrap();
    let op = assemble(&g, 1.0, 1.0, 0.5, 0.5).unwrap();
    let basis = op.eigenbasis(modes).unwrap();
    let psi = basis.vectors();
    let gram = psi.tr_mul(&op.mass().mul_dense(psi));
    (gram - cogur_core::DMatrix::identity(modes, modes)).amax()
}

#[test]
fn interval_spectrum_matches_recurrence_oracle() {
    let g = build_interval(1.0, 128).unwrap();
    let op = assemble(&g, 1.0, 1.0, 0.5, 0.5).unwrap();
    let basis = op.eigenbasis(5).unwrap();
    let oracle = IntervalProblem {
        length: 1.0,
        alpha: 1.0,
        beta: 1.0,
        omega: 0.5,
        nu: 0.5,
    }
    .discrete_eigenvalues(128, 5);
    for (got, want) in basis.values().iter().zip(&oracle) {
        assert!((got - want).abs() <= 1e-9 * want, "{got} vs {want}");
    }
    assert!(orthonormality_defect(128, 20) < 1e-10);
}

#[test]
fn interval_spectrum_converges_to_continuous_problem() {
    let problem = IntervalProblem {
        length: 1.0,
        alpha: 1.0,
        beta: 2.0,
        omega: 0.5,
        nu: 0.5,
    };
    let exact = problem.eigenvalues(5);
    let errors: Vec<f64> = [16, 32, 64]
        .iter()
        .map(|&cells| {
            let g = build_interval(1.0, cells).unwrap();
            let op = assemble(&g, 1.0, 2.0, 0.5, 0.5).unwrap();
            let values = op.eigenbasis(5).unwrap().values().clone();
            values
                .iter()
                .zip(&exact)
                .map(|(v, e)| (v - e).abs() / e)
                .fold(0.0, f64::max)
        })
        .collect();
    for w in errors.windows(2) {
        let order = (w[0] / w[1]).log2();
        assert!((order - 2.0).abs() < 0.1, "order {order}");
    }
}

#[test]
fn constant_is_an_eigenvector_when_rates_match() {
    for (alpha, beta, omega, nu) in [(0.4, 0.4, 0.5, 0.5), (1.0, 2.0, 0.6, 0.3), (3.0, 1.0, 0.2, 0.6)] {
        for g in [build_interval(2.0, 10).unwrap(), build_disk(1.5, 2).unwrap()] {
            let op = assemble(&g, alpha, beta, omega, nu).unwrap();
            let one = DVector::from_element(g.n_nodes(), 1.0);
            let residual = op.stiffness().mul_vec(&one) - op.mass().mul_vec(&one) * (alpha * omega);
            assert!(residual.amax() < 1e-10);
            let lowest = op.eigenbasis(1).unwrap().values()[0];
            assert!((lowest - alpha * omega).abs() < 1e-10, "{lowest}");
        }
    }
}

#[test]
fn disk_basis_is_orthonormal_with_small_residuals() {
    let g = build_disk(1.0, 3).unwrap();
    let op = assemble(&g, 1.0, 1.0, 0.5, 0.5).unwrap();
    let basis = op.eigenbasis(12).unwrap();
    let psi = basis.vectors();
    let gram = psi.tr_mul(&op.mass().mul_dense(psi));
    assert!((gram - cogur_core::DMatrix::identity(12, 12)).amax() < 1e-10);
    assert!(basis.residuals().iter().all(|r| *r <= 1e-9));
    let v = basis.values();
    assert!(v.iter().zip(v.iter().skip(1)).all(|(a, b)| a <= b));
}

#[test]
fn truncation_keeps_leading_modes() {
    let g = build_interval(1.0, 20).unwrap();
    let op = assemble(&g, 1.0, 0.5, 0.5, 0.5).unwrap();
    let full = op.eigenbasis(8).unwrap();
    let head = full.truncated(3).unwrap();
    assert_eq!(head.values().as_slice(), &full.values().as_slice()[..3]);
}
