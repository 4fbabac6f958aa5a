use ergodic_core::analytic::{be0_certificate, be0_subsolution_eval};
use ergodic_core::discretize::{
    assemble_constrained, assemble_discounted, assemble_ergodic, laplacian_row, BoundaryCondition,
    DiscreteOperator, Mesh,
};
use ergodic_core::{Exponent, Potential, ProblemSpec, Profile};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn gaussian() -> Potential {
    Potential::new(Profile::Gaussian {
        amplitude: -1.0,
        center: 0.0,
        width: 1.0,
    })
}

/// Largest gap between the discrete residual of `u` (at `lambda = 0`) and
/// the continuous residual `exact`, over nodes in the inner half of the mesh.
fn consistency_error(op: &DiscreteOperator, u: impl Fn(f64) -> f64, exact: impl Fn(f64) -> f64) -> f64 {
    let mesh = op.mesh();
    let v: Vec<f64> = mesh.nodes().iter().map(|&x| u(x)).collect();
    let f = op.residual(&v, 0.0);
    mesh.nodes()
        .iter()
        .zip(&f)
        .filter(|(x, _)| x.abs() <= 0.5 * mesh.radius())
        .map(|(&x, r)| (r - exact(x)).abs())
        .fold(0.0, f64::max)
}

fn observed_orders(errors: &[f64]) -> Vec<f64> {
    errors.windows(2).map(|w| (w[0] / w[1]).log2()).collect()
}

fn assert_first_order(label: &str, errors: &[f64]) {
    let orders = observed_orders(errors);
    assert!(
        orders.iter().all(|p| *p >= 0.9),
        "{label}: errors {errors:?}, orders {orders:?}"
    );
}

#[test]
fn line_operator_is_consistent_for_finite_m() {
    let e = Exponent::finite(3.0).unwrap();
    let beta = 1.5;
    let spec = ProblemSpec::line(e, beta, gaussian());
    let u = |x: f64| (1.0 + x * x).sqrt() - 1.0;
    let exact = |x: f64| {
        let du = x / (1.0 + x * x).sqrt();
        let d2u = (1.0 + x * x).powf(-1.5);
        -d2u + du.abs().powi(3) / 3.0 - beta * gaussian().eval(x)
    };
    let errors: Vec<f64> = [64, 128, 256, 512]
        .iter()
        .map(|&n| {
            let op = assemble_ergodic(&Mesh::line(8.0, n).unwrap(), &spec, BoundaryCondition::default()).unwrap();
            consistency_error(&op, u, exact)
        })
        .collect();
    assert_first_order("line, m = 3", &errors);
}

#[test]
fn constrained_operator_is_consistent() {
    let spec = ProblemSpec::line(Exponent::infinite(), 2.0, gaussian());
    let c = 0.75;
    let u = |x: f64| 0.5 * c * x * x;
    // The gradient constraint is active beyond |x| = 4/3.
    let exact = |x: f64| (-c - 2.0 * gaussian().eval(x)).max(c * x.abs() - 1.0);
    let errors: Vec<f64> = [64, 128, 256, 512]
        .iter()
        .map(|&n| {
            let op = assemble_ergodic(&Mesh::line(8.0, n).unwrap(), &spec, BoundaryCondition::default()).unwrap();
            consistency_error(&op, u, exact)
        })
        .collect();
    assert_first_order("line, m = inf", &errors);
}

#[test]
fn radial_operator_reproduces_the_smooth_subsolution() {
    let e = Exponent::finite(3.0).unwrap();
    let cert = be0_certificate(3, e, 1.0).unwrap();
    let f = Potential::algebraic(-1.0, e.m_star());
    let beta = cert.beta0;
    let spec = ProblemSpec::radial(3, e, beta, f.clone()).unwrap();
    let u = |r: f64| be0_subsolution_eval(&cert, &[r]).u;
    let exact = |r: f64| {
        let s = be0_subsolution_eval(&cert, &[r]);
        -s.laplacian + s.du[0].abs().powi(3) / 3.0 - beta * f.eval(r)
    };
    let errors: Vec<f64> = [32, 64, 128, 256]
        .iter()
        .map(|&n| {
            let op = assemble_ergodic(&Mesh::radial(3, 8.0, n).unwrap(), &spec, BoundaryCondition::default()).unwrap();
            consistency_error(&op, u, exact)
        })
        .collect();
    assert_first_order("radial N = 3, m = 3", &errors);
}

#[test]
fn laplacian_stencils_are_exact_on_quadratics() {
    let bc = BoundaryCondition::Reflecting;
    let line = Mesh::line(4.0, 40).unwrap();
    let radial = Mesh::radial(3, 4.0, 40).unwrap();
    for i in 1..line.n_cells() {
        let s = laplacian_row(&line, bc, i);
        let q = |j: usize| line.node(j).powi(2);
        let lin = |j: usize| 3.0 * line.node(j) - 1.0;
        let lap_q = s.lower * q(i - 1) + s.diag * q(i) + s.upper * q(i + 1) + s.constant;
        let lap_l = s.lower * lin(i - 1) + s.diag * lin(i) + s.upper * lin(i + 1) + s.constant;
        assert!((lap_q - 2.0).abs() < 1e-10, "node {i}: {lap_q}");
        assert!(lap_l.abs() < 1e-10, "node {i}: {lap_l}");
    }
    for i in 0..radial.n_cells() {
        let s = laplacian_row(&radial, bc, i);
        let q = |j: usize| radial.node(j).powi(2);
        let lower = if i == 0 { 0.0 } else { s.lower * q(i - 1) };
        let lap = lower + s.diag * q(i) + s.upper * q(i + 1) + s.constant;
        assert!((lap - 6.0).abs() < 1e-10, "node {i}: {lap}");
    }
}

#[test]
fn discounted_roots_of_trivial_forcing() {
    let e = Exponent::finite(3.0).unwrap();
    let mesh = Mesh::line(5.0, 50).unwrap();
    let zero = ProblemSpec::line(e, 1.0, Potential::zero());
    let op = assemble_discounted(&mesh, &zero, 0.1, BoundaryCondition::Reflecting).unwrap();
    let r = op.residual(&vec![0.0; mesh.n_nodes()], 0.0);
    assert!(r.iter().all(|x| *x == 0.0));

    let c = -0.3;
    let delta = 0.05;
    let constant = ProblemSpec::line(e, 1.0, Potential::constant(c));
    let op = assemble_discounted(&mesh, &constant, delta, BoundaryCondition::Reflecting).unwrap();
    let r = op.residual(&vec![c / delta; mesh.n_nodes()], 0.0);
    assert!(r.iter().all(|x| x.abs() < 1e-12), "{r:?}");
}

#[test]
fn constrained_residual_examples() {
    let mesh = Mesh::line(5.0, 50).unwrap();
    let zero = ProblemSpec::line(Exponent::infinite(), 1.0, Potential::zero());
    let op = assemble_constrained(&mesh, &zero, 0.1, BoundaryCondition::Reflecting).unwrap();
    assert!(op.residual(&vec![0.0; mesh.n_nodes()], 0.0).iter().all(|x| *x == 0.0));

    // v(x) = x: the constraint branch vanishes, the PDE branch is δx - βf.
    let delta = 0.1;
    let spec = ProblemSpec::line(Exponent::infinite(), 1.0, Potential::bump());
    let op = assemble_constrained(&mesh, &spec, delta, BoundaryCondition::default()).unwrap();
    let v = mesh.nodes();
    let r = op.residual(&v, 0.0);
    for (i, x) in v.iter().enumerate().take(mesh.n_cells()).skip(1) {
        let expected = (delta * x - Potential::bump().eval(*x)).max(0.0);
        assert!((r[i] - expected).abs() < 1e-12, "x = {x}: {} vs {expected}", r[i]);
    }

    // A steep profile violates the constraint.
    let steep: Vec<f64> = v.iter().map(|x| 3.0 * x).collect();
    assert!(op.residual(&steep, 0.0).iter().any(|r| *r >= 2.0 - 1e-12));
}

#[test]
fn residual_is_nonincreasing_in_neighbours() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let cases: Vec<(Mesh, ProblemSpec)> = vec![
        (Mesh::line(6.0, 60).unwrap(), ProblemSpec::line(Exponent::finite(3.0).unwrap(), 2.0, Potential::bump())),
        (Mesh::line(6.0, 60).unwrap(), ProblemSpec::line(Exponent::infinite(), 2.0, Potential::bump())),
        (
            Mesh::radial(4, 6.0, 30).unwrap(),
            ProblemSpec::radial(4, Exponent::finite(5.0).unwrap(), 1.0, gaussian()).unwrap(),
        ),
    ];
    for (mesh, spec) in cases {
        let op = assemble_ergodic(&mesh, &spec, BoundaryCondition::default()).unwrap();
        let n = mesh.n_nodes();
        for _ in 0..20 {
            let v: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let base = op.residual(&v, -0.2);
            for j in 0..n {
                let mut w = v.clone();
                w[j] += 1e-3;
                let bumped = op.residual(&w, -0.2);
                for i in [j.wrapping_sub(1), j + 1] {
                    if i < n {
                        assert!(bumped[i] <= base[i] + 1e-12, "row {i} grew when node {j} rose");
                    }
                }
            }
        }
    }
}
