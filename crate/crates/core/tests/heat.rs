use std::f64::consts::PI;
use std::sync::Arc;

use orbffd::assembly::{assemble, AssemblyParams, DiffOperator};
use orbffd::heat_solver::*;
use orbffd::linalg::{gmres, lu_factor, IdentityPreconditioner, KrylovConfig};
use orbffd::local_weights::LinOperator;
use orbffd::nodeset::{generate_ball_nodes, generate_disk_nodes, DomainSpec, NodeSet};
use orbffd::Error;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn disk_setup(n_target: usize, delta: f64, neumann: bool) -> (NodeSet, DiffOperator) {
    let ns = generate_disk_nodes(&DomainSpec::disk(n_target)).unwrap();
    let mut p = AssemblyParams::new(20, delta);
    if neumann {
        p = p.with_boundary_op(LinOperator::normal_derivative());
    }
    let (d, _) = assemble(&ns, &p).unwrap();
    (ns, d)
}

fn constant_problem(bc: BoundaryKind, value: f64) -> HeatProblem {
    HeatProblem {
        nu: 0.7,
        bc,
        forcing: Arc::new(|_, _| 0.0),
        boundary: Arc::new(move |_, _, _| if bc == BoundaryKind::Dirichlet { value } else { 0.0 }),
        exact: Some(Arc::new(move |_, _| value)),
        initial: None,
    }
}

#[test]
fn constants_are_preserved_for_every_scheme() {
    for (neumann, delta) in [(true, 0.3), (false, 1.0), (false, 0.5)] {
        let (ns, d) = disk_setup(300, delta, neumann);
        let bc = if neumann { BoundaryKind::Neumann } else { BoundaryKind::Dirichlet };
        let problem = constant_problem(bc, 1.0);
        for order in 1..=4 {
            let mut cfg = TimeStepping::new(1.0, 0.01);
            cfg.scheme = Scheme::from_order(order).unwrap();
            let sol = solve_to(&problem, &ns, &d, &cfg).unwrap();
            assert_eq!(sol.iterations.len(), 100);
            for v in &sol.values {
                assert!((v - 1.0).abs() <= 1e-11, "order {order}: {v}");
            }
        }
    }
}

#[test]
fn reduced_and_full_block_dirichlet_agree() {
    let ns = generate_ball_nodes(&DomainSpec::ball(600)).unwrap();
    let (d, _) = assemble(&ns, &AssemblyParams::new(40, 0.5)).unwrap();
    let problem = manufactured_problem(ManufacturedDomain::Ball, 1.0);
    let mut cfg = TimeStepping::new(0.1, 0.01);
    let a = solve_to(&problem, &ns, &d, &cfg).unwrap();
    cfg.formulation = Formulation::FullBlock;
    let b = solve_to(&problem, &ns, &d, &cfg).unwrap();
    for (x, y) in a.values.iter().zip(&b.values) {
        assert!((x - y).abs() <= 1e-10, "{x} {y}");
    }
    let sm = build_stepping_matrix(&d, 1.0, 0.01, Scheme::Bdf4, BoundaryKind::Dirichlet, Formulation::Reduced).unwrap();
    assert_eq!(sm.matrix.nrows(), ns.n_interior());
    let sm = build_stepping_matrix(&d, 1.0, 0.01, Scheme::Bdf4, BoundaryKind::Dirichlet, Formulation::FullBlock).unwrap();
    assert_eq!(sm.matrix.nrows(), ns.len());
}

#[test]
fn neumann_block_residual_is_small_after_a_step() {
    let (ns, d) = disk_setup(500, 0.5, true);
    let problem = manufactured_problem(ManufacturedDomain::Disk, 1.0);
    let dt = 1e-3;
    let sm = build_stepping_matrix(&d, 1.0, dt, Scheme::Bdf1, BoundaryKind::Neumann, Formulation::Reduced).unwrap();
    assert_eq!(sm.formulation, Formulation::FullBlock);
    let c0: Vec<f64> = (0..ns.len()).map(|i| problem.initial_value(ns.point(i))).collect();
    let mut state = StepperState::new(c0.clone(), dt);
    advance(&mut state, &sm, &problem, &ns, &d, &SolverConfig::default()).unwrap();
    let c = state.current();
    let ni = ns.n_interior();
    let mut rhs: Vec<f64> = (0..ni).map(|i| c0[i] + dt * (problem.forcing)(ns.point(i), dt)).collect();
    rhs.extend((ni..ns.len()).map(|b| (problem.boundary)(ns.point(b), ns.normal(b).unwrap(), dt)));
    let ax = sm.matrix.spmv(c).unwrap();
    let num: f64 = ax.iter().zip(&rhs).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
    let den: f64 = rhs.iter().map(|v| v * v).sum::<f64>().sqrt();
    assert!(num / den <= 1e-10, "{}", num / den);
    assert!((state.time - dt).abs() < 1e-15);
}

#[test]
fn one_backward_euler_step_matches_a_dense_solve() {
    let (ns, d) = disk_setup(250, 1.0, false);
    let nu = 0.5;
    let dt = 0.02;
    let problem = HeatProblem {
        nu,
        bc: BoundaryKind::Dirichlet,
        forcing: Arc::new(|x, t| x[0] * t + 1.0),
        boundary: Arc::new(|x, _, t| x[1] + t),
        exact: None,
        initial: Some(Arc::new(|x, _| x[0] * x[0])),
    };
    let sm = build_stepping_matrix(&d, nu, dt, Scheme::Bdf1, problem.bc, Formulation::Reduced).unwrap();
    let c0: Vec<f64> = (0..ns.len()).map(|i| problem.initial_value(ns.point(i))).collect();
    let mut state = StepperState::new(c0.clone(), dt);
    advance(&mut state, &sm, &problem, &ns, &d, &SolverConfig::default()).unwrap();

    let ni = ns.n_interior();
    let g: Vec<f64> = (ni..ns.len()).map(|b| ns.point(b)[1] + dt).collect();
    let lg = d.l_ib.spmv(&g).unwrap();
    let rhs: Vec<f64> = (0..ni).map(|i| c0[i] + dt * (ns.point(i)[0] * dt + 1.0) + dt * nu * lg[i]).collect();
    let mut a = d.l_ii.to_dense();
    for i in 0..ni {
        for j in 0..ni {
            a[(i, j)] = if i == j { 1.0 } else { 0.0 } - nu * dt * a[(i, j)];
        }
    }
    let x = lu_factor(a).unwrap().solve_vec(&rhs);
    for i in 0..ni {
        assert!((state.current()[i] - x[i]).abs() <= 1e-10);
    }
    for (b, gb) in g.iter().enumerate() {
        assert_eq!(state.current()[ni + b], *gb);
    }
}

#[test]
fn bdf4_matrix_scales_the_operator_by_twelve_over_twenty_five() {
    let (_, d) = disk_setup(200, 1.0, false);
    let m1 = build_stepping_matrix(&d, 1.0, 0.01, Scheme::Bdf1, BoundaryKind::Dirichlet, Formulation::Reduced).unwrap();
    let m4 = build_stepping_matrix(&d, 1.0, 0.01, Scheme::Bdf4, BoundaryKind::Dirichlet, Formulation::Reduced).unwrap();
    for k in 0..d.n_interior() {
        let (c1, v1) = m1.matrix.row(k);
        let (c4, v4) = m4.matrix.row(k);
        assert_eq!(c1, c4);
        for ((&c, a), b) in c1.iter().zip(v1).zip(v4) {
            let id = if c == k { 1.0 } else { 0.0 };
            assert!(((b - id) - 12.0 / 25.0 * (a - id)).abs() <= 1e-12 * (a - id).abs().max(1.0));
        }
    }
    // tiny steps leave nearly the identity
    let tiny = build_stepping_matrix(&d, 1.0, 1e-12, Scheme::Bdf1, BoundaryKind::Dirichlet, Formulation::Reduced).unwrap();
    let dense = tiny.matrix.to_dense();
    for i in 0..d.n_interior() {
        for j in 0..d.n_interior() {
            let id = if i == j { 1.0 } else { 0.0 };
            assert!((dense[(i, j)] - id).abs() < 1e-6);
        }
    }
}

#[test]
fn ilu_never_needs_more_iterations_than_no_preconditioner() {
    let (_, d) = disk_setup(600, 0.5, true);
    let sm = build_stepping_matrix(&d, 1.0, 1e-3, Scheme::Bdf4, BoundaryKind::Neumann, Formulation::Reduced).unwrap();
    let b: Vec<f64> = (0..sm.matrix.nrows()).map(|i| 1.0 + (i as f64).sin()).collect();
    let x0 = vec![0.0; b.len()];
    let cfg = KrylovConfig::default();
    let (_, with) = gmres(&sm.matrix, &sm.ilu, &b, &x0, &cfg).unwrap();
    let (_, without) = gmres(&sm.matrix, &IdentityPreconditioner, &b, &x0, &cfg).unwrap();
    assert!(with.iterations <= without.iterations, "{} vs {}", with.iterations, without.iterations);
}

#[test]
fn small_stepping_matrix_converges_quickly() {
    let ns = generate_disk_nodes(&DomainSpec::disk(80)).unwrap();
    assert!(ns.n_interior() >= 40);
    let (d, _) = assemble(&ns, &AssemblyParams::new(12, 1.0)).unwrap();
    let sm = build_stepping_matrix(&d, 1.0, 1e-3, Scheme::Bdf4, BoundaryKind::Dirichlet, Formulation::Reduced).unwrap();
    let b = vec![1.0; sm.matrix.nrows()];
    let (x, info) = gmres(&sm.matrix, &sm.ilu, &b, &vec![0.0; b.len()], &KrylovConfig::default()).unwrap();
    assert!(info.iterations <= 30);
    let r = sm.matrix.spmv(&x).unwrap();
    let res: f64 = r.iter().zip(&b).map(|(a, c)| (a - c).powi(2)).sum::<f64>().sqrt();
    assert!(res / (b.len() as f64).sqrt() <= 1e-11);
}

#[test]
fn manufactured_solutions_satisfy_the_equation() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let h = 1e-3;
    for (domain, dim) in [(ManufacturedDomain::Disk, 2), (ManufacturedDomain::Ball, 3)] {
        let nu = 0.8;
        let p = manufactured_problem(domain, nu);
        let c = p.exact.clone().unwrap();
        for _ in 0..100 {
            let x: Vec<f64> = (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let t = rng.gen_range(0.0..1.0);
            // sixth-order central differences
            let d2 = |f: &dyn Fn(f64) -> f64| {
                (2.0 * f(-3.0 * h) - 27.0 * f(-2.0 * h) + 270.0 * f(-h) - 490.0 * f(0.0) + 270.0 * f(h)
                    - 27.0 * f(2.0 * h)
                    + 2.0 * f(3.0 * h))
                    / (180.0 * h * h)
            };
            let d1 = |f: &dyn Fn(f64) -> f64| {
                (-f(-3.0 * h) + 9.0 * f(-2.0 * h) - 45.0 * f(-h) + 45.0 * f(h) - 9.0 * f(2.0 * h) + f(3.0 * h))
                    / (60.0 * h)
            };
            let ct = d1(&|s| c(&x, t + s));
            let lap: f64 = (0..dim)
                .map(|a| {
                    d2(&|s| {
                        let mut y = x.clone();
                        y[a] += s;
                        c(&y, t)
                    })
                })
                .sum();
            let res = ct - nu * lap - (p.forcing)(&x, t);
            assert!(res.abs() <= 1e-7, "{domain:?} residual {res}");
        }
    }
    // boundary data
    let p = manufactured_problem(ManufacturedDomain::Ball, 1.0);
    let x = [0.6, 0.0, 0.8];
    assert_eq!((p.boundary)(&x, &x, 0.3), (p.exact.as_ref().unwrap())(&x, 0.3));
    let p = manufactured_problem(ManufacturedDomain::Disk, 0.5);
    let (x, t) = ([0.6, 0.8], 0.2);
    let e = (-PI * t).exp();
    let grad = [PI * (PI * x[0]).cos() * (PI * x[1]).cos() * e, -PI * (PI * x[0]).sin() * (PI * x[1]).sin() * e];
    let want = 0.5 * (grad[0] * x[0] + grad[1] * x[1]);
    assert!(((p.boundary)(&x, &x, t) - want).abs() < 1e-14);
    assert_eq!((p.exact.unwrap())(&[0.5, 0.0], 0.0), 2.0);
}

#[test]
fn one_step_error_is_first_order_in_time() {
    let ns = generate_disk_nodes(&DomainSpec::disk(1000)).unwrap();
    let (d, _) = assemble(&ns, &AssemblyParams::new(30, 1.0).with_boundary_op(LinOperator::normal_derivative())).unwrap();
    let problem = manufactured_problem(ManufacturedDomain::Disk, 1.0);
    let mut cfg = TimeStepping::new(1e-3, 1e-3);
    cfg.scheme = Scheme::Bdf1;
    let sol = solve_to(&problem, &ns, &d, &cfg).unwrap();
    let e = sol.errors.unwrap();
    assert!(e.linf_rel < 1e-4, "{}", e.linf_rel);
}

#[test]
fn exact_in_space_solution_shows_fourth_order_in_time() {
    // linear in space, so only the time stepping contributes error
    let ns = generate_disk_nodes(&DomainSpec::disk(200)).unwrap();
    let (d, _) = assemble(&ns, &AssemblyParams::new(20, 1.0)).unwrap();
    let problem = HeatProblem {
        nu: 1.0,
        bc: BoundaryKind::Dirichlet,
        forcing: Arc::new(|x, t| (1.0 + x[0] - 0.5 * x[1]) * 5.0 * t.powi(4)),
        boundary: Arc::new(|x, _, t| (1.0 + x[0] - 0.5 * x[1]) * (1.0 + t.powi(5))),
        exact: Some(Arc::new(|x, t| (1.0 + x[0] - 0.5 * x[1]) * (1.0 + t.powi(5)))),
        initial: None,
    };
    let errs: Vec<f64> = [0.1, 0.05, 0.025]
        .iter()
        .map(|&dt| solve_to(&problem, &ns, &d, &TimeStepping::new(1.0, dt)).unwrap().errors.unwrap().l2_rel)
        .collect();
    for w in errs.windows(2) {
        let ratio = w[0] / w[1];
        assert!((12.0..=20.0).contains(&ratio), "{errs:?}");
    }
}

#[test]
fn final_time_edge_cases() {
    let (ns, d) = disk_setup(150, 1.0, false);
    let problem = manufactured_problem(ManufacturedDomain::Disk, 1.0);
    let problem = HeatProblem { bc: BoundaryKind::Dirichlet, boundary: Arc::new(|x, _, t| 1.0 + (PI * x[0]).sin() * (PI * x[1]).cos() * (-PI * t).exp()), ..problem };
    let sol = solve_to(&problem, &ns, &d, &TimeStepping::new(0.0, 0.01)).unwrap();
    assert_eq!(sol.errors.unwrap().l2_rel, 0.0);
    assert!(sol.iterations.is_empty());
    assert!(matches!(solve_to(&problem, &ns, &d, &TimeStepping::new(0.015, 0.01)), Err(Error::InvalidParameter(_))));
    assert!(matches!(solve_to(&problem, &ns, &d, &TimeStepping::new(0.02, 0.01)), Err(Error::InvalidParameter(_))));
    let mut sub = TimeStepping::new(0.05, 0.01);
    sub.bootstrap = Bootstrap::Substeps(0);
    assert!(solve_to(&problem, &ns, &d, &sub).is_err());
    sub.bootstrap = Bootstrap::Substeps(4);
    let s = solve_to(&problem, &ns, &d, &sub).unwrap();
    assert!((s.time - 0.05).abs() < 1e-15);
    assert_eq!(s.iterations.len(), 12 + 2);
    let bad = HeatProblem { nu: -1.0, ..problem };
    assert!(solve_to(&bad, &ns, &d, &TimeStepping::new(0.1, 0.01)).is_err());
}

#[test]
fn solver_choices_agree() {
    let ns = generate_ball_nodes(&DomainSpec::ball(500)).unwrap();
    let (d, _) = assemble(&ns, &AssemblyParams::new(40, 0.5)).unwrap();
    let problem = manufactured_problem(ManufacturedDomain::Ball, 1.0);
    let mut cfg = TimeStepping::new(0.05, 0.01);
    let a = solve_to(&problem, &ns, &d, &cfg).unwrap();
    cfg.solver.kind = SolverKind::Bicgstab;
    let b = solve_to(&problem, &ns, &d, &cfg).unwrap();
    for (x, y) in a.values.iter().zip(&b.values) {
        assert!((x - y).abs() < 1e-10);
    }
    assert!(b.iterations.iter().all(|&i| i <= 10));
}
