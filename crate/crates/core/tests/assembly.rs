use orbffd::assembly::*;
use orbffd::linalg::CsrMatrix;
use orbffd::local_weights::LinOperator;
use orbffd::nodeset::{generate_ball_nodes, generate_disk_nodes, DomainSpec, NodeSet};
use orbffd::Error;
use proptest::prelude::*;

fn disk(n: usize) -> NodeSet {
    generate_disk_nodes(&DomainSpec::disk(n)).unwrap()
}

fn row_nnz(a: &CsrMatrix, b: &CsrMatrix, k: usize) -> usize {
    a.row(k).0.len() + b.row(k).0.len()
}

fn full_row(d: &DiffOperator, k: usize) -> Vec<f64> {
    let ni = d.n_interior();
    let mut row = vec![0.0; ni + d.n_boundary()];
    let (c, v) = d.l_ii.row(k);
    for (&c, &v) in c.iter().zip(v) {
        row[c] = v;
    }
    let (c, v) = d.l_ib.row(k);
    for (&c, &v) in c.iter().zip(v) {
        row[ni + c] = v;
    }
    row
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn every_interior_row_is_filled_once_with_n_entries(
        delta in 0.05f64..=1.0,
        n in prop::sample::select(vec![12usize, 20, 30]),
        stabilize in any::<bool>(),
    ) {
        let ns = disk(400);
        let p = AssemblyParams::new(n, delta).with_stabilization(stabilize);
        let (d, stats) = assemble(&ns, &p).unwrap();
        prop_assert_eq!(stats.retained.iter().sum::<usize>(), ns.n_interior());
        prop_assert_eq!(stats.stencil_count, stats.retained.len());
        for k in 0..ns.n_interior() {
            prop_assert_eq!(row_nnz(&d.l_ii, &d.l_ib, k), n);
        }
        for b in 0..ns.n_boundary() {
            prop_assert_eq!(row_nnz(&d.b_bi, &d.b_bb, b), n);
        }
        // stabilization can only drop candidates, and seeds are always kept
        for (&c, &r) in stats.candidates.iter().zip(&stats.retained) {
            prop_assert!(r >= 1 && r <= c);
        }
        if !stabilize {
            prop_assert_eq!(&stats.candidates, &stats.retained);
        }
    }

    #[test]
    fn laplacian_rows_annihilate_constants_and_reproduce_quadratics(delta in 0.1f64..=1.0) {
        let ns = disk(500);
        let (d, _) = assemble(&ns, &AssemblyParams::new(30, delta)).unwrap();
        let q: Vec<f64> = (0..ns.len()).map(|i| { let p = ns.point(i); 3.0 * p[0] * p[0] + p[1] * p[1] - p[0] * p[1] }).collect();
        for k in 0..ns.n_interior() {
            let row = full_row(&d, k);
            let s: f64 = row.iter().sum();
            let scale: f64 = row.iter().map(|v| v.abs()).sum();
            prop_assert!(s.abs() <= 1e-9 * scale);
            let lq: f64 = row.iter().zip(&q).map(|(a, b)| a * b).sum();
            prop_assert!((lq - 8.0).abs() <= 1e-8 * scale);
        }
    }
}

#[test]
fn stencil_count_grows_with_delta() {
    let ns = disk(800);
    let mut last = 0;
    for delta in [0.2, 0.4, 0.6, 0.8, 1.0] {
        let (_, s) = assemble(&ns, &AssemblyParams::new(30, delta)).unwrap();
        assert!(s.stencil_count >= last, "delta {delta}");
        last = s.stencil_count;
    }
    let (_, s) = assemble(&ns, &AssemblyParams::new(30, 1.0)).unwrap();
    assert_eq!(s.stencil_count, ns.n_interior());
    assert!(s.retained.iter().all(|&r| r == 1));
}

#[test]
fn stabilized_assembly_uses_at_least_as_many_stencils() {
    let ns = disk(600);
    for delta in [0.2, 0.5] {
        let (_, plain) = assemble(&ns, &AssemblyParams::new(30, delta)).unwrap();
        let (_, stab) = assemble(&ns, &AssemblyParams::new(30, delta).with_stabilization(true)).unwrap();
        assert!(stab.stencil_count >= plain.stencil_count);
        assert!(stab.gamma_obs() <= 1.0);
        assert_eq!(plain.gamma_obs(), 1.0);
    }
}

#[test]
fn delta_one_matches_reference_bitwise() {
    for ns in [disk(300), generate_ball_nodes(&DomainSpec::ball(500)).unwrap()] {
        let n = if ns.dim() == 2 { 20 } else { 40 };
        let p = AssemblyParams::new(n, 1.0).with_boundary_op(LinOperator::normal_derivative());
        let (a, _) = assemble(&ns, &p).unwrap();
        let b = assemble_reference(&ns, &p).unwrap();
        assert_eq!(a.l_ii, b.l_ii);
        assert_eq!(a.l_ib, b.l_ib);
        assert_eq!(a.b_bi, b.b_bi);
        assert_eq!(a.b_bb, b.b_bb);
    }
}

#[test]
fn overlapped_rows_stay_close_to_reference_rows() {
    let ns = disk(800);
    let p = AssemblyParams::new(30, 0.5);
    let (a, _) = assemble(&ns, &p).unwrap();
    let b = assemble_reference(&ns, &p).unwrap();
    // both approximate the Laplacian of a smooth function to similar accuracy
    let f: Vec<f64> = (0..ns.len()).map(|i| { let x = ns.point(i); (x[0] + 0.3 * x[1]).sin() }).collect();
    let exact: Vec<f64> = (0..ns.n_interior()).map(|i| -1.09 * f[i]).collect();
    let err = |d: &DiffOperator| -> f64 {
        (0..ns.n_interior())
            .map(|k| {
                let r: f64 = full_row(d, k).iter().zip(&f).map(|(w, v)| w * v).sum();
                (r - exact[k]).abs()
            })
            .fold(0.0, f64::max)
    };
    let (ea, eb) = (err(&a), err(&b));
    assert!(ea < 1e-4 && eb < 1e-4, "{ea} {eb}");
}

#[test]
fn invalid_parameters_are_rejected() {
    let ns = disk(200);
    assert!(matches!(assemble(&ns, &AssemblyParams::new(30, 0.0)), Err(Error::InvalidParameter(_))));
    assert!(matches!(assemble(&ns, &AssemblyParams::new(30, 1.5)), Err(Error::InvalidParameter(_))));
    assert!(matches!(assemble(&ns, &AssemblyParams::new(ns.len() + 1, 1.0)), Err(Error::InvalidSize { .. })));
}

#[test]
fn matrix_market_files_round_trip() {
    let ns = disk(150);
    let (d, _) = assemble(&ns, &AssemblyParams::new(12, 0.5)).unwrap();
    let dir = std::env::temp_dir().join(format!("orbffd-mm-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    d.write_matrix_market(&dir).unwrap();
    let back = orbffd::linalg::read_matrix_market(&dir.join("L_ii.mtx")).unwrap();
    assert_eq!(back.nrows(), d.l_ii.nrows());
    for k in 0..back.nrows() {
        assert_eq!(back.row(k), d.l_ii.row(k));
    }
    for name in ["L_ib", "B_bi", "B_bb"] {
        assert!(dir.join(format!("{name}.mtx")).exists());
    }
    std::fs::remove_dir_all(&dir).unwrap();
}

#[test]
fn identity_lebesgue_values_are_one() {
    let ns = disk(500);
    let seeds = [0, 50, ns.n_interior() + 2];
    let rep = lebesgue_field(&ns, 30, &LinOperator::identity(), Default::default(), &seeds).unwrap();
    for s in &rep.stencils {
        for v in &s.values {
            assert!((v - 1.0).abs() < 1e-8);
        }
    }
}

#[test]
fn normal_derivative_lebesgue_peaks_near_the_boundary() {
    let ns = disk(1000);
    let h = DomainSpec::disk(1000).nominal_spacing();
    let seeds: Vec<usize> = (ns.n_interior()..ns.len()).collect();
    let rep = lebesgue_field(&ns, 70, &LinOperator::normal_derivative(), Default::default(), &seeds).unwrap();
    let near = rep
        .stencils
        .iter()
        .filter(|s| {
            let p = ns.point(s.argmax());
            1.0 - p[0].hypot(p[1]) <= 1.01 * h
        })
        .count();
    assert!(near * 10 >= rep.stencils.len() * 8, "{near} of {}", rep.stencils.len());
    // the centroid-node threshold is one of the stencil's own values
    for s in &rep.stencils {
        assert!(s.nodes.contains(&s.centroid_node));
        assert!(s.values.iter().any(|&v| v == s.threshold));
    }
}

#[test]
fn lebesgue_rejects_bad_input() {
    let ns = disk(200);
    let lap = LinOperator::laplacian();
    assert!(lebesgue_field(&ns, 2, &lap, Default::default(), &[0]).is_err());
    assert!(lebesgue_field(&ns, 10, &lap, Default::default(), &[ns.len()]).is_err());
    assert!(matches!(
        lebesgue_field(&ns, 10, &LinOperator::normal_derivative(), Default::default(), &[0]),
        Err(Error::InvalidOperator(_))
    ));
}

#[test]
fn gershgorin_report_matches_hand_computation() {
    let a = CsrMatrix::from_triplets(2, 2, &[(0, 0, -4.0), (0, 1, 1.0), (1, 0, 2.0), (1, 1, -3.0)]);
    let g = gershgorin_report(&a);
    assert_eq!((g[0].diagonal, g[0].radius), (-4.0, 1.0));
    assert_eq!((g[1].diagonal, g[1].radius), (-3.0, 2.0));
    assert!(g.iter().all(|r| r.sufficient));
    let b = CsrMatrix::from_triplets(2, 2, &[(0, 0, -1.0), (0, 1, 2.0), (1, 1, 0.0)]);
    assert!(!gershgorin_report(&b)[0].sufficient);
    assert!(g[0].contains(-4.5, 0.5, 0.0));
    assert!(!g[0].contains(-2.0, 0.0, 0.0));
}
