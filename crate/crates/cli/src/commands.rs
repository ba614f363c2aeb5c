use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use anyhow::{bail, Context, Result};
use orbffd::assembly::{assemble, assemble_reference, gershgorin_report, lebesgue_field, AssemblyParams};
use orbffd::heat_solver::{manufactured_problem, solve_to, BoundaryKind, HeatProblem, ManufacturedDomain, TimeStepping};
use orbffd::local_weights::{poly_degree_for_stencil, LinOperator, PhsKernel};
use orbffd::metrics::{dissipation_dispersion, fit_convergence_order, outside_gershgorin, speedup_estimate, spectrum};
use orbffd::nodeset::{generate, load_nodeset, save_nodeset, NodeSet};

use crate::config::{Bc, Settings};
use crate::Command;

pub fn run(cmd: &Command, s: &Settings) -> Result<()> {
    match cmd {
        Command::Nodes => nodes(s),
        Command::Assemble { reference } => assemble_cmd(s, *reference),
        Command::Heat => heat(s),
        Command::Convergence => convergence(s),
        Command::Speedup { model_c } => speedup(s, *model_c),
        Command::Eigs => eigs(s),
        Command::Lebesgue { op } => lebesgue(s, op),
        Command::Decompose { exact, approx } => decompose(s, exact, approx),
    }
}

fn out_dir(s: &Settings) -> Result<&Path> {
    fs::create_dir_all(&s.out).with_context(|| format!("creating output directory {}", s.out.display()))?;
    Ok(&s.out)
}

fn writer(path: &Path) -> Result<csv::Writer<fs::File>> {
    csv::Writer::from_path(path).with_context(|| format!("creating {}", path.display()))
}

/// Node files when given, otherwise one generated set per target count.
fn node_sets(s: &Settings) -> Result<Vec<NodeSet>> {
    if !s.nodes.is_empty() {
        return s
            .nodes
            .iter()
            .map(|p| load_nodeset(p).with_context(|| format!("loading node file {}", p.display())))
            .collect();
    }
    s.big_n
        .iter()
        .map(|&n| generate(&s.domain_spec(n)).with_context(|| format!("generating {n} nodes")))
        .collect()
}

fn params(s: &Settings, n: usize, delta: f64) -> Result<AssemblyParams> {
    let boundary = match s.bc {
        Bc::Dirichlet => LinOperator::identity(),
        // the flux condition is nu * dc/dn = g
        Bc::Neumann => LinOperator::normal_derivative().scaled(s.nu),
    };
    Ok(AssemblyParams::new(n, delta)
        .with_boundary_op(boundary)
        .with_kernel(PhsKernel::new(s.phs_order)?)
        .with_stabilization(s.stabilize))
}

fn problem(s: &Settings, dim: usize) -> Result<HeatProblem> {
    Ok(match (dim, s.bc) {
        (2, Bc::Neumann) => manufactured_problem(ManufacturedDomain::Disk, s.nu),
        (2, Bc::Dirichlet) => {
            let mut p = manufactured_problem(ManufacturedDomain::Disk, s.nu);
            let c = p.exact.clone().expect("manufactured problems carry their solution");
            p.bc = BoundaryKind::Dirichlet;
            p.boundary = Arc::new(move |x, _n, t| c(x, t));
            p
        }
        (3, Bc::Dirichlet) => manufactured_problem(ManufacturedDomain::Ball, s.nu),
        (3, Bc::Neumann) => bail!("the 3D heat problem only has Dirichlet data; use --bc dirichlet"),
        (d, _) => bail!("no heat problem for dimension {d}"),
    })
}

fn stepping(s: &Settings) -> TimeStepping {
    let mut cfg = TimeStepping::new(s.t_final, s.dt);
    cfg.scheme = s.scheme;
    cfg.solver.kind = s.solver;
    cfg.solver.krylov.tol = s.tol;
    cfg.bootstrap = s.bootstrap;
    cfg
}

/// Every (node set, n, delta) combination.
fn runs<'a>(s: &'a Settings, sets: &'a [NodeSet]) -> impl Iterator<Item = (&'a NodeSet, usize, f64)> + 'a {
    sets.iter()
        .flat_map(move |ns| s.small_n.iter().flat_map(move |&n| s.delta.iter().map(move |&d| (ns, n, d))))
}

fn run_count(s: &Settings, sets: &[NodeSet]) -> usize {
    sets.len() * s.small_n.len() * s.delta.len()
}

fn nodes(s: &Settings) -> Result<()> {
    let dir = out_dir(s)?;
    for &n in &s.big_n {
        let ns = generate(&s.domain_spec(n)).with_context(|| format!("generating {n} nodes"))?;
        let path = dir.join(format!("nodes_{n}.txt"));
        save_nodeset(&ns, &path).with_context(|| format!("writing {}", path.display()))?;
        println!("{}: {} interior, {} boundary", path.display(), ns.n_interior(), ns.n_boundary());
    }
    Ok(())
}

fn assemble_cmd(s: &Settings, reference: bool) -> Result<()> {
    let dir = out_dir(s)?;
    let sets = node_sets(s)?;
    let single = run_count(s, &sets) == 1;
    let mut w = writer(&dir.join("assembly_stats.csv"))?;
    w.write_record(["N", "n", "delta", "stencils", "gamma", "mean_retained", "assembly_s"])?;
    for (ns, n, delta) in runs(s, &sets) {
        let p = params(s, n, delta)?;
        let start = Instant::now();
        let (d, stencils, gamma, mean) = if reference {
            let d = assemble_reference(ns, &p)?;
            (d, ns.n_interior(), 1.0, 1.0)
        } else {
            let (d, st) = assemble(ns, &p)?;
            let g = st.gamma_obs();
            let m = st.mean_retained();
            (d, st.stencil_count, g, m)
        };
        let secs = start.elapsed().as_secs_f64();
        let sub = if single { dir.to_path_buf() } else { dir.join(format!("N{}_n{n}_d{delta}", ns.len())) };
        fs::create_dir_all(&sub).with_context(|| format!("creating {}", sub.display()))?;
        d.write_matrix_market(&sub).with_context(|| format!("writing matrices into {}", sub.display()))?;
        w.serialize((ns.len(), n, delta, stencils, gamma, mean, secs))?;
        println!("N={} n={n} delta={delta}: {stencils} stencils, {secs:.3} s", ns.len());
    }
    w.flush()?;
    Ok(())
}

struct HeatRun {
    l2: f64,
    linf: f64,
    secs: f64,
    values: Vec<f64>,
    exact: Vec<f64>,
}

fn heat_run(s: &Settings, ns: &NodeSet, n: usize, delta: f64) -> Result<HeatRun> {
    let prob = problem(s, ns.dim())?;
    let start = Instant::now();
    let (d, _) = assemble(ns, &params(s, n, delta)?)?;
    let sol = solve_to(&prob, ns, &d, &stepping(s)).with_context(|| format!("heat solve N={} n={n} delta={delta}", ns.len()))?;
    let secs = start.elapsed().as_secs_f64();
    let err = sol.errors.expect("manufactured problems carry their solution");
    let c = prob.exact.expect("manufactured problems carry their solution");
    let exact = (0..ns.len()).map(|i| c(ns.point(i), sol.time)).collect();
    Ok(HeatRun {
        l2: err.l2_rel,
        linf: err.linf_rel,
        secs,
        values: sol.values,
        exact,
    })
}

fn write_field(path: &Path, ns: &NodeSet, exact: &[f64], approx: &[f64]) -> Result<()> {
    let mut w = writer(path)?;
    let axes = ["x", "y", "z"];
    let mut header: Vec<&str> = axes[..ns.dim()].to_vec();
    header.extend(["exact", "approx"]);
    w.write_record(&header)?;
    for i in 0..ns.len() {
        let mut row: Vec<String> = ns.point(i).iter().map(|v| format!("{v:.16e}")).collect();
        row.push(format!("{:.16e}", exact[i]));
        row.push(format!("{:.16e}", approx[i]));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

fn heat(s: &Settings) -> Result<()> {
    let dir = out_dir(s)?;
    let sets = node_sets(s)?;
    let single = run_count(s, &sets) == 1;
    let mut w = writer(&dir.join("errors.csv"))?;
    w.write_record(["N", "n", "delta", "l2_rel", "linf_rel", "walltime_s"])?;
    for (ns, n, delta) in runs(s, &sets) {
        let r = heat_run(s, ns, n, delta)?;
        w.serialize((ns.len(), n, delta, r.l2, r.linf, r.secs))?;
        println!("N={} n={n} delta={delta}: l2 {:.3e}, linf {:.3e}", ns.len(), r.l2, r.linf);
        if single {
            write_field(&dir.join("field.csv"), ns, &r.exact, &r.values)?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Typical spacing `N^(-1/d)`.
fn spacing(ns: &NodeSet) -> f64 {
    (ns.len() as f64).powf(-1.0 / ns.dim() as f64)
}

fn convergence(s: &Settings) -> Result<()> {
    let dir = out_dir(s)?;
    let sets = node_sets(s)?;
    if sets.len() < 2 {
        bail!("a convergence sweep needs at least two node sets");
    }
    let mut w = writer(&dir.join("convergence.csv"))?;
    w.write_record(["N", "h", "n", "delta", "l2_rel", "linf_rel", "walltime_s"])?;
    let mut ow = writer(&dir.join("orders.csv"))?;
    ow.write_record(["n", "delta", "order_l2", "order_linf"])?;
    for &n in &s.small_n {
        for &delta in &s.delta {
            let (mut h, mut e2, mut ei) = (Vec::new(), Vec::new(), Vec::new());
            for ns in &sets {
                let r = heat_run(s, ns, n, delta)?;
                w.serialize((ns.len(), spacing(ns), n, delta, r.l2, r.linf, r.secs))?;
                h.push(spacing(ns));
                e2.push(r.l2);
                ei.push(r.linf);
            }
            let o2 = fit_convergence_order(&h, &e2)?;
            let oi = fit_convergence_order(&h, &ei)?;
            ow.serialize((n, delta, o2, oi))?;
            println!("n={n} delta={delta}: order {o2:.2} (l2), {oi:.2} (linf)");
        }
    }
    w.flush()?;
    ow.flush()?;
    Ok(())
}

fn best_assembly(ns: &NodeSet, p: &AssemblyParams, reps: usize) -> Result<(f64, f64, usize)> {
    let mut best = f64::INFINITY;
    let mut info = (1.0, 0);
    for _ in 0..reps {
        let (_, st) = assemble(ns, p)?;
        best = best.min(st.total_seconds());
        info = (st.gamma_obs(), st.stencil_count);
    }
    Ok((best, info.0, info.1))
}

fn speedup(s: &Settings, model_c: f64) -> Result<()> {
    let dir = out_dir(s)?;
    let sets = node_sets(s)?;
    let mut w = writer(&dir.join("speedup.csv"))?;
    w.write_record(["N", "n", "delta", "stencils", "gamma", "assembly_s", "speedup", "eta"])?;
    for ns in &sets {
        for &n in &s.small_n {
            let (base, _, _) = best_assembly(ns, &params(s, n, 1.0)?, 3)?;
            let (_, m) = poly_degree_for_stencil(n, ns.dim());
            for &delta in &s.delta {
                let (t, gamma, stencils) = best_assembly(ns, &params(s, n, delta)?, 3)?;
                let eta = speedup_estimate(delta, n, m, ns.dim(), gamma.clamp(f64::MIN_POSITIVE, 1.0), model_c)?.eta;
                w.serialize((ns.len(), n, delta, stencils, gamma, t, base / t, eta))?;
                println!("N={} n={n} delta={delta}: speedup {:.2}, model {eta:.2}", ns.len(), base / t);
            }
        }
    }
    w.flush()?;
    Ok(())
}

fn eigs(s: &Settings) -> Result<()> {
    let dir = out_dir(s)?;
    let sets = node_sets(s)?;
    let single = run_count(s, &sets) == 1;
    for (ns, n, delta) in runs(s, &sets) {
        let (d, _) = assemble(ns, &params(s, n, delta)?)?;
        let sub = if single { dir.to_path_buf() } else { dir.join(format!("N{}_n{n}_d{delta}", ns.len())) };
        fs::create_dir_all(&sub).with_context(|| format!("creating {}", sub.display()))?;
        let spec = spectrum(&d.l_ii)?;
        let rows = gershgorin_report(&d.l_ii);
        let mut w = writer(&sub.join("spectrum.csv"))?;
        w.write_record(["re", "im"])?;
        for e in &spec.eigenvalues {
            w.serialize(e)?;
        }
        w.flush()?;
        let mut w = writer(&sub.join("gershgorin.csv"))?;
        w.write_record(["row", "diagonal", "radius", "sufficient"])?;
        for (k, r) in rows.iter().enumerate() {
            w.serialize((k, r.diagonal, r.radius, r.sufficient))?;
        }
        w.flush()?;
        let outside = outside_gershgorin(&spec.eigenvalues, &rows, 1e-10).len();
        let flagged = rows.iter().filter(|r| r.sufficient).count();
        println!(
            "N={} n={n} delta={delta}: max Re {:.3e}, {} spurious, {flagged}/{} rows in the left half-plane, {outside} outside the disks",
            ns.len(),
            spec.max_real,
            spec.spurious,
            rows.len()
        );
    }
    Ok(())
}

fn lebesgue(s: &Settings, op: &str) -> Result<()> {
    let dir = out_dir(s)?;
    let sets = node_sets(s)?;
    let (op, boundary) = match op {
        "laplacian" => (LinOperator::laplacian(), false),
        "identity" => (LinOperator::identity(), false),
        "normal" => (LinOperator::normal_derivative(), true),
        other => bail!("invalid value '{other}' for op: expected laplacian, normal or identity"),
    };
    let mut w = writer(&dir.join("lebesgue.csv"))?;
    w.write_record(["N", "n", "seed", "centroid_node", "threshold", "max", "argmax"])?;
    for ns in &sets {
        let seeds: Vec<usize> = if boundary { (ns.n_interior()..ns.len()).collect() } else { (0..ns.n_interior()).collect() };
        for &n in &s.small_n {
            let rep = lebesgue_field(ns, n, &op, PhsKernel::new(s.phs_order)?, &seeds)?;
            let mut worst = 0.0f64;
            for st in &rep.stencils {
                let max = st.values.iter().cloned().fold(0.0, f64::max);
                worst = worst.max(max);
                w.serialize((ns.len(), n, st.seed, st.centroid_node, st.threshold, max, st.argmax()))?;
            }
            println!("N={} n={n}: {} stencils, largest value {worst:.3}", ns.len(), rep.stencils.len());
        }
    }
    w.flush()?;
    Ok(())
}

/// Last column of every row that parses as a number; header lines are skipped.
fn read_field(path: &PathBuf) -> Result<Vec<f64>> {
    let mut r = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .comment(Some(b'#'))
        .from_path(path)
        .with_context(|| format!("opening field file {}", path.display()))?;
    let mut out = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let rec = rec.with_context(|| format!("reading {}", path.display()))?;
        let Some(last) = rec.iter().last() else { continue };
        match last.trim().parse::<f64>() {
            Ok(v) => out.push(v),
            Err(_) if i == 0 => {}
            Err(_) => bail!("{}: row {} ends in '{last}', not a number", path.display(), i + 1),
        }
    }
    Ok(out)
}

fn decompose(s: &Settings, exact: &PathBuf, approx: &PathBuf) -> Result<()> {
    let q = read_field(exact)?;
    let a = read_field(approx)?;
    let r = dissipation_dispersion(&q, &a)
        .with_context(|| format!("comparing {} with {}", exact.display(), approx.display()))?;
    let dir = out_dir(s)?;
    let mut w = writer(&dir.join("decomposition.csv"))?;
    w.write_record(["dissipation", "dispersion", "correlation"])?;
    w.serialize((r.dissipation, r.dispersion, r.correlation))?;
    w.flush()?;
    println!(
        "dissipation {:.6e}, dispersion {:.6e}, correlation {:.6}",
        r.dissipation, r.dispersion, r.correlation
    );
    Ok(())
}

