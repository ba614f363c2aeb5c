//! Scattered collocation nodes: generators for the unit square, disk and
//! ball, plain-text node files, and spacing estimates.
//!
//! Global node indices are 0-based: `0..n_interior()` are interior nodes and
//! `n_interior()..len()` are boundary nodes, each boundary node carrying an
//! outward unit normal.

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::kdtree::KdTree;

/// Normals read from files may deviate from unit length by at most this much.
pub const NORMAL_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct NodeSet {
    dim: usize,
    interior: Vec<f64>,
    boundary: Vec<f64>,
    normals: Vec<f64>,
}

impl NodeSet {
    /// Flat coordinate arrays (`count * dim` values each). Normals must be unit
    /// vectors to within [`NORMAL_TOLERANCE`].
    pub fn new(dim: usize, interior: Vec<f64>, boundary: Vec<f64>, normals: Vec<f64>) -> Result<Self> {
        if !(2..=3).contains(&dim) {
            return Err(Error::InvalidSpec(format!("dimension {dim} is not 2 or 3")));
        }
        if interior.len() % dim != 0 || boundary.len() % dim != 0 || normals.len() != boundary.len() {
            return Err(Error::InvalidSpec("coordinate arrays do not match the dimension".into()));
        }
        if interior.iter().chain(&boundary).chain(&normals).any(|v| !v.is_finite()) {
            return Err(Error::InvalidSpec("non-finite coordinate".into()));
        }
        for (b, n) in normals.chunks(dim).enumerate() {
            let norm = n.iter().map(|v| v * v).sum::<f64>().sqrt();
            if (norm - 1.0).abs() > NORMAL_TOLERANCE {
                return Err(Error::InvalidSpec(format!(
                    "normal of boundary node {b} has length {norm}"
                )));
            }
        }
        Ok(Self {
            dim,
            interior,
            boundary,
            normals,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n_interior(&self) -> usize {
        self.interior.len() / self.dim
    }

    pub fn n_boundary(&self) -> usize {
        self.boundary.len() / self.dim
    }

    pub fn len(&self) -> usize {
        self.n_interior() + self.n_boundary()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn is_boundary(&self, i: usize) -> bool {
        i >= self.n_interior()
    }

    /// Coordinates of global node `i`.
    #[inline]
    pub fn point(&self, i: usize) -> &[f64] {
        let d = self.dim;
        let ni = self.n_interior();
        if i < ni {
            &self.interior[i * d..(i + 1) * d]
        } else {
            &self.boundary[(i - ni) * d..(i - ni + 1) * d]
        }
    }

    /// Outward normal of global node `i`, if it is a boundary node.
    pub fn normal(&self, i: usize) -> Option<&[f64]> {
        let ni = self.n_interior();
        (i >= ni && i < self.len()).then(|| &self.normals[(i - ni) * self.dim..(i - ni + 1) * self.dim])
    }

    pub fn interior_coords(&self) -> &[f64] {
        &self.interior
    }

    pub fn boundary_coords(&self) -> &[f64] {
        &self.boundary
    }

    pub fn normals(&self) -> &[f64] {
        &self.normals
    }

    /// All coordinates in global order.
    pub fn coords(&self) -> Vec<f64> {
        let mut all = self.interior.clone();
        all.extend_from_slice(&self.boundary);
        all
    }

    /// Smallest distance between any two nodes.
    pub fn min_separation(&self) -> f64 {
        let coords = self.coords();
        let tree = KdTree::new(self.dim, &coords);
        (0..self.len())
            .map(|i| tree.knn(self.point(i), 2).get(1).map_or(f64::INFINITY, |&(_, d)| d.sqrt()))
            .fold(f64::INFINITY, f64::min)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DomainKind {
    UnitSquare,
    UnitDisk,
    UnitBall,
}

impl DomainKind {
    pub fn dim(self) -> usize {
        match self {
            DomainKind::UnitSquare | DomainKind::UnitDisk => 2,
            DomainKind::UnitBall => 3,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DomainSpec {
    pub kind: DomainKind,
    pub n_target: usize,
    pub refine: bool,
    /// Offset of the refinement ring as a fraction of the nominal spacing.
    pub beta: f64,
}

impl DomainSpec {
    pub fn disk(n_target: usize) -> Self {
        Self {
            kind: DomainKind::UnitDisk,
            n_target,
            refine: false,
            beta: 0.5,
        }
    }

    pub fn ball(n_target: usize) -> Self {
        Self {
            kind: DomainKind::UnitBall,
            ..Self::disk(n_target)
        }
    }

    pub fn with_refinement(mut self, beta: f64) -> Self {
        self.refine = true;
        self.beta = beta;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let d = self.kind.dim();
        if self.n_target < d + 2 {
            return Err(Error::InvalidSpec(format!(
                "N_target = {} is below the minimum {} for dimension {d}",
                self.n_target,
                d + 2
            )));
        }
        if !(self.beta > 0.0 && self.beta <= 1.0) {
            return Err(Error::InvalidSpec(format!("refinement offset {} not in (0, 1]", self.beta)));
        }
        Ok(())
    }

    /// Nominal node spacing used by the generators.
    pub fn nominal_spacing(&self) -> f64 {
        let n = self.n_target as f64;
        match self.kind {
            // hexagonal packing density 2 / (sqrt(3) h^2) over area pi
            DomainKind::UnitDisk => (2.0 * PI / (3f64.sqrt() * n)).sqrt(),
            // close packing density sqrt(2) / h^3 over volume 4 pi / 3
            DomainKind::UnitBall => (2f64.sqrt() * 4.0 * PI / 3.0 / n).cbrt(),
            DomainKind::UnitSquare => 2.0 / (n.sqrt() - 1.0).max(1.0),
        }
    }
}

/// Radical inverse of `index` in `base` (the Halton sequence coordinate).
pub fn halton(mut index: u64, base: u64) -> f64 {
    let mut f = 1.0;
    let mut r = 0.0;
    let b = base as f64;
    while index > 0 {
        f /= b;
        r += f * (index % base) as f64;
        index /= base;
    }
    r
}

const HALTON_BASES: [u64; 3] = [2, 3, 5];

/// Halton points (indices starting at 1) inside the centered ball of `radius`,
/// by rejection from the enclosing cube.
fn halton_in_ball(dim: usize, count: usize, radius: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(count * dim);
    let mut index = 1u64;
    let mut p = vec![0.0; dim];
    while out.len() < count * dim {
        for (a, c) in p.iter_mut().enumerate() {
            *c = radius * (2.0 * halton(index, HALTON_BASES[a]) - 1.0);
        }
        index += 1;
        if p.iter().map(|v| v * v).sum::<f64>() <= radius * radius {
            out.extend_from_slice(&p);
        }
    }
    out
}

/// Repulsion smoothing of `free` points against themselves and the `fixed`
/// points, confining free points to the ball of radius `r_max`.
fn repel(dim: usize, fixed: &[f64], free: &mut [f64], h: f64, r_max: f64, iterations: usize) {
    let n_fixed = fixed.len() / dim;
    let n_free = free.len() / dim;
    if n_free == 0 {
        return;
    }
    let k = if dim == 2 { 7 } else { 13 };
    let mut all = fixed.to_vec();
    all.extend_from_slice(free);
    let mut moved = vec![0.0; free.len()];
    for it in 0..iterations {
        let step = 0.2 - 0.15 * it as f64 / iterations.max(1) as f64;
        let tree = KdTree::new(dim, &all);
        for i in 0..n_free {
            let x = &all[(n_fixed + i) * dim..(n_fixed + i + 1) * dim];
            let mut force = [0.0; 3];
            for (j, d2) in tree.knn(x, k + 1) {
                if j == n_fixed + i || d2 == 0.0 {
                    continue;
                }
                let d = d2.sqrt();
                let w = (h / d).powi(3) / d;
                let y = tree.point(j);
                for a in 0..dim {
                    force[a] += w * (x[a] - y[a]);
                }
            }
            let mut disp: Vec<f64> = force[..dim].iter().map(|f| step * h * f).collect();
            let len = disp.iter().map(|v| v * v).sum::<f64>().sqrt();
            if len > 0.3 * h {
                disp.iter_mut().for_each(|v| *v *= 0.3 * h / len);
            }
            let out = &mut moved[i * dim..(i + 1) * dim];
            for a in 0..dim {
                out[a] = x[a] + disp[a];
            }
            let r = out.iter().map(|v| v * v).sum::<f64>().sqrt();
            if r > r_max {
                out.iter_mut().for_each(|v| *v *= r_max / r);
            }
        }
        all[n_fixed * dim..].copy_from_slice(&moved);
    }
    free.copy_from_slice(&all[n_fixed * dim..]);
}

const REPULSION_ITERATIONS: usize = 80;

/// Quasi-uniform nodes on the closed unit disk with an evenly spaced boundary
/// ring and optional boundary refinement.
pub fn generate_disk_nodes(spec: &DomainSpec) -> Result<NodeSet> {
    if spec.kind != DomainKind::UnitDisk {
        return Err(Error::InvalidSpec("generate_disk_nodes needs a unit-disk spec".into()));
    }
    spec.validate()?;
    let h = spec.nominal_spacing();
    let rings = if spec.refine { 2 } else { 1 };
    let max_nb = (spec.n_target - 1) / rings;
    if max_nb < 3 {
        return Err(Error::InvalidSpec(format!(
            "N_target = {} cannot hold a boundary ring",
            spec.n_target
        )));
    }
    let nb = ((2.0 * PI / h).ceil() as usize).clamp(3, max_nb);
    let ni = spec.n_target - nb;

    let mut boundary = Vec::with_capacity(2 * nb);
    let mut normals = Vec::with_capacity(2 * nb);
    for j in 0..nb {
        let t = 2.0 * PI * j as f64 / nb as f64;
        let (s, c) = t.sin_cos();
        boundary.extend_from_slice(&[c, s]);
        normals.extend_from_slice(&[c, s]);
    }
    let offset = spec.beta * h;
    let ring: Vec<f64> = if spec.refine {
        boundary.iter().map(|v| v * (1.0 - offset)).collect()
    } else {
        Vec::new()
    };
    let r_max = if spec.refine { 1.0 - offset - 0.5 * h } else { 1.0 - 0.5 * h };
    let mut free = halton_in_ball(2, ni, r_max.max(0.0));
    let mut fixed = boundary.clone();
    fixed.extend_from_slice(&ring);
    repel(2, &fixed, &mut free, h, r_max.max(0.0), REPULSION_ITERATIONS);
    free.extend_from_slice(&ring);
    NodeSet::new(2, free, boundary, normals)
}

/// Quasi-uniform nodes in the closed unit ball with a quasi-uniform spherical
/// boundary (spherical Fibonacci points).
pub fn generate_ball_nodes(spec: &DomainSpec) -> Result<NodeSet> {
    if spec.kind != DomainKind::UnitBall {
        return Err(Error::InvalidSpec("generate_ball_nodes needs a unit-ball spec".into()));
    }
    spec.validate()?;
    let h = spec.nominal_spacing();
    let rings = if spec.refine { 2 } else { 1 };
    let max_nb = (spec.n_target - 1) / rings;
    if max_nb < 4 {
        return Err(Error::InvalidSpec(format!(
            "N_target = {} cannot hold a boundary sphere",
            spec.n_target
        )));
    }
    // hexagonal surface density 2 / (sqrt(3) h^2) over area 4 pi
    let nb = ((8.0 * PI / (3f64.sqrt() * h * h)).round() as usize).clamp(4, max_nb);
    let ni = spec.n_target - nb;
    let golden = PI * (3.0 - 5f64.sqrt());
    let mut boundary = Vec::with_capacity(3 * nb);
    for j in 0..nb {
        let z = 1.0 - (2 * j + 1) as f64 / nb as f64;
        let r = (1.0 - z * z).sqrt();
        let (s, c) = (golden * j as f64).sin_cos();
        let p = [r * c, r * s, z];
        let len = p.iter().map(|v| v * v).sum::<f64>().sqrt();
        boundary.extend(p.iter().map(|v| v / len));
    }
    let normals = boundary.clone();
    let offset = spec.beta * h;
    let ring: Vec<f64> = if spec.refine {
        boundary.iter().map(|v| v * (1.0 - offset)).collect()
    } else {
        Vec::new()
    };
    let r_max = if spec.refine { 1.0 - offset - 0.5 * h } else { 1.0 - 0.5 * h };
    let mut free = halton_in_ball(3, ni, r_max.max(0.0));
    let mut fixed = boundary.clone();
    fixed.extend_from_slice(&ring);
    repel(3, &fixed, &mut free, h, r_max.max(0.0), REPULSION_ITERATIONS);
    free.extend_from_slice(&ring);
    NodeSet::new(3, free, boundary, normals)
}

/// Generator for `spec.kind`; the square uses Halton nodes.
pub fn generate(spec: &DomainSpec) -> Result<NodeSet> {
    match spec.kind {
        DomainKind::UnitDisk => generate_disk_nodes(spec),
        DomainKind::UnitBall => generate_ball_nodes(spec),
        DomainKind::UnitSquare => generate_structured_nodes(StructuredKind::Halton, spec.n_target),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StructuredKind {
    Cartesian,
    Halton,
}

fn square_normal(x: f64, y: f64) -> [f64; 2] {
    let nx = if x >= 1.0 { 1.0 } else if x <= -1.0 { -1.0 } else { 0.0 };
    let ny = if y >= 1.0 { 1.0 } else if y <= -1.0 { -1.0 } else { 0.0 };
    let len = (nx * nx + ny * ny as f64).sqrt();
    [nx / len, ny / len]
}

/// Evenly spaced perimeter nodes of `[-1,1]^2` matching an `m x m` grid.
fn square_perimeter(m: usize) -> Vec<[f64; 2]> {
    let g = |i: usize| -1.0 + 2.0 * i as f64 / (m - 1) as f64;
    let mut out = Vec::with_capacity(4 * (m - 1));
    for i in 0..m - 1 {
        out.push([g(i), -1.0]);
    }
    for i in 0..m - 1 {
        out.push([1.0, g(i)]);
    }
    for i in 0..m - 1 {
        out.push([g(m - 1 - i), 1.0]);
    }
    for i in 0..m - 1 {
        out.push([-1.0, g(m - 1 - i)]);
    }
    out
}

/// Cartesian or Halton nodes on `[-1,1]^2`. Points on the square's edges are
/// boundary nodes (corner normals point diagonally).
pub fn generate_structured_nodes(kind: StructuredKind, n: usize) -> Result<NodeSet> {
    let mut boundary = Vec::new();
    let mut normals = Vec::new();
    let mut interior = Vec::new();
    match kind {
        StructuredKind::Cartesian => {
            let m = (n as f64).sqrt().round() as usize;
            if m * m != n || m < 2 {
                return Err(Error::InvalidSpec(format!(
                    "Cartesian nodes need a perfect square count >= 4, got {n}"
                )));
            }
            let g = |i: usize| -1.0 + 2.0 * i as f64 / (m - 1) as f64;
            for j in 0..m {
                for i in 0..m {
                    let (x, y) = (g(i), g(j));
                    if i == 0 || j == 0 || i == m - 1 || j == m - 1 {
                        boundary.extend_from_slice(&[x, y]);
                        normals.extend_from_slice(&square_normal(x, y));
                    } else {
                        interior.extend_from_slice(&[x, y]);
                    }
                }
            }
        }
        StructuredKind::Halton => {
            let m = ((n as f64).sqrt().round() as usize).max(2);
            let nb = 4 * (m - 1);
            if n < nb {
                return Err(Error::InvalidSpec(format!(
                    "{n} Halton nodes cannot hold a {nb}-node boundary"
                )));
            }
            for p in square_perimeter(m) {
                boundary.extend_from_slice(&p);
                normals.extend_from_slice(&square_normal(p[0], p[1]));
            }
            for i in 1..=(n - nb) as u64 {
                interior.push(2.0 * halton(i, 2) - 1.0);
                interior.push(2.0 * halton(i, 3) - 1.0);
            }
        }
    }
    NodeSet::new(2, interior, boundary, normals)
}

/// Mean nearest-neighbor distance, used as the fill-distance proxy.
pub fn fill_distance(ns: &NodeSet) -> Result<f64> {
    if ns.len() < 2 {
        return Err(Error::InvalidSpec("fill distance needs at least two nodes".into()));
    }
    let coords = ns.coords();
    let tree = KdTree::new(ns.dim(), &coords);
    let total: f64 = (0..ns.len())
        .map(|i| tree.knn(ns.point(i), 2)[1].1.sqrt())
        .sum();
    Ok(total / ns.len() as f64)
}

/// Node-file text: header `d N_i N_b`, interior rows of `d` coordinates, then
/// boundary rows of `d` coordinates followed by `d` normal components.
pub fn nodeset_to_string(ns: &NodeSet) -> String {
    let mut s = String::new();
    let d = ns.dim();
    let _ = writeln!(s, "{} {} {}", d, ns.n_interior(), ns.n_boundary());
    let fmt = |s: &mut String, vals: &[f64]| {
        let line: Vec<String> = vals.iter().map(|v| format!("{v:.16e}")).collect();
        let _ = writeln!(s, "{}", line.join(" "));
    };
    for p in ns.interior.chunks(d) {
        fmt(&mut s, p);
    }
    for (p, n) in ns.boundary.chunks(d).zip(ns.normals.chunks(d)) {
        let mut row = p.to_vec();
        row.extend_from_slice(n);
        fmt(&mut s, &row);
    }
    s
}

pub fn save_nodeset(ns: &NodeSet, path: &Path) -> Result<()> {
    std::fs::write(path, nodeset_to_string(ns)).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn load_nodeset(path: &Path) -> Result<NodeSet> {
    let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_nodeset(&text, path)
}

/// Parses node-file text; `path` only labels errors.
pub fn parse_nodeset(text: &str, path: &Path) -> Result<NodeSet> {
    let err = |line: usize, msg: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        msg,
    };
    let mut rows = text.lines().enumerate().filter_map(|(i, l)| {
        let content = l.split('#').next().unwrap_or("").trim();
        (!content.is_empty()).then_some((i + 1, content))
    });
    let (hline, header) = rows.next().ok_or_else(|| err(1, "missing header".into()))?;
    let h: Vec<usize> = header
        .split_whitespace()
        .map(|t| t.parse::<usize>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|_| err(hline, "header must be 'd N_i N_b'".into()))?;
    if h.len() != 3 || !(2..=3).contains(&h[0]) {
        return Err(err(hline, "header must be 'd N_i N_b' with d = 2 or 3".into()));
    }
    let (d, ni, nb) = (h[0], h[1], h[2]);
    let mut interior = Vec::with_capacity(ni * d);
    let mut boundary = Vec::with_capacity(nb * d);
    let mut normals = Vec::with_capacity(nb * d);
    for k in 0..ni + nb {
        let (line, content) = rows
            .next()
            .ok_or_else(|| err(text.lines().count(), format!("expected {} node rows, found {k}", ni + nb)))?;
        let vals: Vec<f64> = content
            .split_whitespace()
            .map(str::parse::<f64>)
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| err(line, format!("bad number: {e}")))?;
        let expected = if k < ni { d } else { 2 * d };
        if vals.len() != expected {
            return Err(err(
                line,
                format!("expected {expected} columns for d = {d}, found {}", vals.len()),
            ));
        }
        if vals.iter().any(|v| !v.is_finite()) {
            return Err(err(line, "non-finite value".into()));
        }
        if k < ni {
            interior.extend_from_slice(&vals);
        } else {
            let n = &vals[d..];
            let norm = n.iter().map(|v| v * v).sum::<f64>().sqrt();
            if (norm - 1.0).abs() > NORMAL_TOLERANCE {
                return Err(err(line, format!("normal has length {norm}, expected 1")));
            }
            boundary.extend_from_slice(&vals[..d]);
            normals.extend_from_slice(n);
        }
    }
    if let Some((line, _)) = rows.next() {
        return Err(err(line, "unexpected extra row".into()));
    }
    NodeSet::new(d, interior, boundary, normals)
}
