//! Run settings: command-line flags layered over an optional `key = value`
//! file. Keys are the long flag names without dashes (`N`, `delta`,
//! `phs-order`, ...). Flags win over the file; the file wins over defaults.

use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use anyhow::{anyhow, bail, Context, Result};
use clap::Args;
use orbffd::heat_solver::{Bootstrap, Scheme, SolverKind};
use orbffd::nodeset::{DomainKind, DomainSpec};

#[derive(Args, Debug, Clone, Default)]
pub struct Flags {
    /// Key-value settings file; flags override its entries.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Node files, comma separated. Takes precedence over --domain/--N.
    #[arg(long, global = true)]
    pub nodes: Option<String>,
    /// disk, ball or square.
    #[arg(long, global = true)]
    pub domain: Option<String>,
    /// Target node counts, comma separated.
    #[arg(long = "N", global = true)]
    pub big_n: Option<String>,
    /// Boundary refinement offset as a fraction of the spacing (disk and ball).
    #[arg(long, global = true)]
    pub refine: Option<String>,
    /// Stencil sizes, comma separated.
    #[arg(long = "n", global = true)]
    pub small_n: Option<String>,
    /// Overlap parameters in (0, 1], comma separated.
    #[arg(long, global = true)]
    pub delta: Option<String>,
    #[arg(long = "phs-order", global = true)]
    pub phs_order: Option<String>,
    /// Lebesgue stabilization (optionally `--stabilize=false`).
    #[arg(long, global = true, num_args = 0..=1, default_missing_value = "true")]
    pub stabilize: Option<String>,
    /// dirichlet or neumann.
    #[arg(long, global = true)]
    pub bc: Option<String>,
    #[arg(long, global = true)]
    pub nu: Option<String>,
    #[arg(long, global = true)]
    pub dt: Option<String>,
    /// Final time.
    #[arg(long = "T", global = true)]
    pub t_final: Option<String>,
    /// bdf1 .. bdf4.
    #[arg(long, global = true)]
    pub scheme: Option<String>,
    /// gmres or bicgstab.
    #[arg(long, global = true)]
    pub solver: Option<String>,
    /// Relative residual tolerance of the Krylov solver.
    #[arg(long, global = true)]
    pub tol: Option<String>,
    /// Start the BDF ladder on dt/k instead of dt.
    #[arg(long, global = true)]
    pub substeps: Option<String>,
    /// Output directory.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
}

const KEYS: &[&str] = &[
    "nodes", "domain", "N", "refine", "n", "delta", "phs-order", "stabilize", "bc", "nu", "dt", "T", "scheme",
    "solver", "tol", "substeps", "out",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Bc {
    Dirichlet,
    Neumann,
}

/// Fully resolved settings.
#[derive(Debug, Clone)]
pub struct Settings {
    pub nodes: Vec<PathBuf>,
    pub domain: DomainKind,
    pub big_n: Vec<usize>,
    pub refine: Option<f64>,
    pub small_n: Vec<usize>,
    pub delta: Vec<f64>,
    pub phs_order: u32,
    pub stabilize: bool,
    pub bc: Bc,
    pub nu: f64,
    pub dt: f64,
    pub t_final: f64,
    pub scheme: Scheme,
    pub solver: SolverKind,
    pub tol: f64,
    pub bootstrap: Bootstrap,
    pub out: PathBuf,
}

fn parse_file(path: &Path) -> Result<HashMap<String, String>> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading config file {}", path.display()))?;
    let mut map = HashMap::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| anyhow!("{}:{}: expected 'key = value'", path.display(), i + 1))?;
        let k = k.trim();
        if !KEYS.contains(&k) {
            bail!("{}:{}: unknown key '{k}'", path.display(), i + 1);
        }
        map.insert(k.to_string(), v.trim().to_string());
    }
    Ok(map)
}

fn parse_one<T: FromStr>(key: &str, v: &str) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    v.trim().parse::<T>().map_err(|e| anyhow!("invalid value '{v}' for {key}: {e}"))
}

fn parse_list<T: FromStr>(key: &str, v: &str) -> Result<Vec<T>>
where
    T::Err: std::fmt::Display,
{
    let out: Vec<T> = v
        .split(',')
        .filter(|s| !s.trim().is_empty())
        .map(|s| parse_one(key, s))
        .collect::<Result<_>>()?;
    if out.is_empty() {
        bail!("{key} needs at least one value");
    }
    Ok(out)
}

impl Flags {
    fn get(&self, key: &str) -> Option<String> {
        let s = |v: &Option<String>| v.clone();
        match key {
            "nodes" => s(&self.nodes),
            "domain" => s(&self.domain),
            "N" => s(&self.big_n),
            "refine" => s(&self.refine),
            "n" => s(&self.small_n),
            "delta" => s(&self.delta),
            "phs-order" => s(&self.phs_order),
            "stabilize" => s(&self.stabilize),
            "bc" => s(&self.bc),
            "nu" => s(&self.nu),
            "dt" => s(&self.dt),
            "T" => s(&self.t_final),
            "scheme" => s(&self.scheme),
            "solver" => s(&self.solver),
            "tol" => s(&self.tol),
            "substeps" => s(&self.substeps),
            "out" => self.out.as_ref().map(|p| p.display().to_string()),
            _ => None,
        }
    }

    pub fn resolve(&self) -> Result<Settings> {
        let file = match &self.config {
            Some(p) => parse_file(p)?,
            None => HashMap::new(),
        };
        let get = |key: &str| self.get(key).or_else(|| file.get(key).cloned());

        let domain = match get("domain").as_deref().unwrap_or("disk") {
            "disk" => DomainKind::UnitDisk,
            "ball" => DomainKind::UnitBall,
            "square" => DomainKind::UnitSquare,
            other => bail!("invalid value '{other}' for domain: expected disk, ball or square"),
        };
        let bc = match get("bc").as_deref() {
            Some("dirichlet") => Bc::Dirichlet,
            Some("neumann") => Bc::Neumann,
            Some(other) => bail!("invalid value '{other}' for bc: expected dirichlet or neumann"),
            None if domain == DomainKind::UnitDisk => Bc::Neumann,
            None => Bc::Dirichlet,
        };
        let scheme = match get("scheme") {
            Some(v) => {
                let digits = v.trim().trim_start_matches("bdf").trim_start_matches("BDF");
                Scheme::from_order(parse_one("scheme", digits)?).map_err(|e| anyhow!("scheme: {e}"))?
            }
            None => Scheme::Bdf4,
        };
        let solver = match get("solver").as_deref().unwrap_or("gmres") {
            "gmres" => SolverKind::Gmres,
            "bicgstab" => SolverKind::Bicgstab,
            other => bail!("invalid value '{other}' for solver: expected gmres or bicgstab"),
        };
        let delta: Vec<f64> = match get("delta") {
            Some(v) => parse_list("delta", &v)?,
            None => vec![1.0],
        };
        if let Some(d) = delta.iter().find(|d| !(**d > 0.0 && **d <= 1.0)) {
            bail!("invalid value '{d}' for delta: must lie in (0, 1]");
        }
        let substeps: usize = get("substeps").map(|v| parse_one("substeps", &v)).transpose()?.unwrap_or(1);
        if substeps == 0 {
            bail!("substeps must be at least 1");
        }
        Ok(Settings {
            nodes: get("nodes")
                .map(|v| v.split(',').filter(|s| !s.trim().is_empty()).map(|s| PathBuf::from(s.trim())).collect())
                .unwrap_or_default(),
            domain,
            big_n: match get("N") {
                Some(v) => parse_list("N", &v)?,
                None => vec![1000],
            },
            refine: get("refine").map(|v| parse_one("refine", &v)).transpose()?,
            small_n: match get("n") {
                Some(v) => parse_list("n", &v)?,
                None => vec![30],
            },
            delta,
            phs_order: get("phs-order").map(|v| parse_one("phs-order", &v)).transpose()?.unwrap_or(7),
            stabilize: get("stabilize").map(|v| parse_one("stabilize", &v)).transpose()?.unwrap_or(false),
            bc,
            nu: get("nu").map(|v| parse_one("nu", &v)).transpose()?.unwrap_or(1.0),
            dt: get("dt").map(|v| parse_one("dt", &v)).transpose()?.unwrap_or(1e-3),
            t_final: get("T").map(|v| parse_one("T", &v)).transpose()?.unwrap_or(0.2),
            scheme,
            solver,
            tol: get("tol").map(|v| parse_one("tol", &v)).transpose()?.unwrap_or(1e-12),
            bootstrap: if substeps == 1 { Bootstrap::SingleStep } else { Bootstrap::Substeps(substeps) },
            out: get("out").map(PathBuf::from).unwrap_or_else(|| PathBuf::from(".")),
        })
    }
}

impl Settings {
    pub fn domain_spec(&self, n_target: usize) -> DomainSpec {
        let base = match self.domain {
            DomainKind::UnitBall => DomainSpec::ball(n_target),
            DomainKind::UnitSquare => DomainSpec {
                kind: DomainKind::UnitSquare,
                ..DomainSpec::disk(n_target)
            },
            DomainKind::UnitDisk => DomainSpec::disk(n_target),
        };
        match self.refine {
            Some(beta) => base.with_refinement(beta),
            None => base,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flags_override_file_values() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.cfg");
        std::fs::write(&path, "# sweep\nN = 500, 1000\ndelta = 0.5\nnu = 2\n").unwrap();
        let flags = Flags {
            config: Some(path),
            delta: Some("0.2,1".into()),
            ..Default::default()
        };
        let s = flags.resolve().unwrap();
        assert_eq!(s.big_n, vec![500, 1000]);
        assert_eq!(s.delta, vec![0.2, 1.0]);
        assert_eq!(s.nu, 2.0);
        assert_eq!(s.bc, Bc::Neumann);
        assert_eq!(s.scheme, Scheme::Bdf4);
    }

    #[test]
    fn bad_values_name_the_field() {
        let flags = Flags {
            delta: Some("0".into()),
            ..Default::default()
        };
        assert!(flags.resolve().unwrap_err().to_string().contains("delta"));
        let flags = Flags {
            nu: Some("fast".into()),
            ..Default::default()
        };
        assert!(flags.resolve().unwrap_err().to_string().contains("nu"));
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.cfg");
        std::fs::write(&path, "colour = blue\n").unwrap();
        let flags = Flags {
            config: Some(path),
            ..Default::default()
        };
        assert!(flags.resolve().unwrap_err().to_string().contains("colour"));
    }
}
