//! Run parameters shared by every subcommand. Each value comes from the
//! command line if given, else from the subcommand's table in the config
//! file, else from the file's top level, else from the subcommand default.

use std::path::{Path, PathBuf};

use clap::Args;
use serde::{Deserialize, Serialize};

use rpn_eigen::spectral::{ConformalFactor, HarmonicTerm};

/// A configuration problem; reported with exit status 2.
#[derive(Debug)]
pub struct ConfigError(pub String);

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

macro_rules! params {
    ($( $(#[$doc:meta])* $field:ident : $ty:ty ),* $(,)?) => {
        #[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
        #[serde(default, deny_unknown_fields, rename_all = "kebab-case")]
        #[command(allow_negative_numbers = true)]
        pub struct Params {
            $( $(#[$doc])* #[arg(long)] pub $field: Option<$ty>, )*
        }

        impl Params {
            /// Fills every unset field from `other`.
            pub fn or(self, other: Params) -> Params {
                Params { $( $field: self.$field.or(other.$field), )* }
            }
        }
    };
}

params! {
    /// Dimension of the projective space (or sphere for com-solve).
    n: usize,
    /// Maximal even harmonic degree of the Galerkin basis.
    l: usize,
    /// Polynomial exactness of the sphere quadrature.
    quad_degree: usize,
    /// Conformal factor: round, zonal-eps or harmonic.
    w: String,
    /// Amplitude of the zonal-eps factor.
    eps: f64,
    /// Harmonic terms `degree:index:coefficient`, comma separated.
    terms: String,
    /// Number of eigenvalues to compute.
    k: usize,
    /// Number of random caps for rayleigh-chain.
    caps: usize,
    /// Cap parameter.
    t: f64,
    /// Cap center, Mobius direction or surface fold point (comma separated).
    p: String,
    /// Random seed.
    seed: u64,
    /// Multi-start count.
    starts: usize,
    /// Simplex evaluations per start.
    max_evals: usize,
    /// Largest cap parameter explored by vfield-search.
    t_max: f64,
    /// Early-stop target of vfield-search.
    target: f64,
    /// Radius of the Mobius parameter for com-solve.
    radius: f64,
    /// Samples per dimension for veronese-check.
    samples: usize,
    /// Largest n for veronese-check and ratio-table.
    n_max: usize,
    /// Sphere self-map for degree.
    map: String,
    /// Sphere dimension for degree.
    dim: usize,
    /// Change-of-variables example for degree.
    cov: String,
    /// Quadrature exactness of the degree integral.
    resolution: usize,
    /// Test surface for the limit experiments.
    surface: String,
    /// Increasing parameter sequence, comma separated.
    sequence: String,
    /// Tolerance (meaning depends on the command).
    tol: f64,
    /// Allowed relative excess over the limit bound.
    band: f64,
    /// Also solve at basis degree L + 2 and report the change.
    refine: bool,
    /// Directory for the JSON and CSV reports.
    out_dir: PathBuf,
}

/// Merges command-line values with a config file.
pub fn resolve(cli: Params, file: Option<&Path>, command: &str) -> Result<Params, ConfigError> {
    let Some(path) = file else { return Ok(cli) };
    let text = std::fs::read_to_string(path)
        .map_err(|e| ConfigError(format!("cannot read {}: {e}", path.display())))?;
    let mut table: toml::Table =
        toml::from_str(&text).map_err(|e| ConfigError(format!("{}: {e}", path.display())))?;
    let mut section = Params::default();
    let tables: Vec<String> = table
        .iter()
        .filter(|(_, v)| v.is_table())
        .map(|(k, _)| k.clone())
        .collect();
    for key in tables {
        let value = table.remove(&key).expect("key exists");
        if key == command {
            section = value
                .try_into()
                .map_err(|e| ConfigError(format!("[{key}] in {}: {e}", path.display())))?;
        }
    }
    let base: Params = toml::Value::Table(table)
        .try_into()
        .map_err(|e| ConfigError(format!("{}: {e}", path.display())))?;
    Ok(cli.or(section).or(base))
}

/// Parses a comma-separated list of reals.
pub fn parse_list(name: &str, s: &str) -> Result<Vec<f64>, ConfigError> {
    s.split(',')
        .map(|v| {
            v.trim()
                .parse::<f64>()
                .map_err(|e| ConfigError(format!("{name}: cannot parse '{v}': {e}")))
        })
        .collect()
}

/// Builds the conformal factor named by `w` (default round).
pub fn conformal_factor(p: &Params, n: usize) -> Result<ConformalFactor, ConfigError> {
    match p.w.as_deref().unwrap_or("round") {
        "round" => Ok(ConformalFactor::round(n)),
        "zonal-eps" | "zonal" => {
            let eps = p
                .eps
                .ok_or_else(|| ConfigError("w = zonal-eps needs eps".into()))?;
            Ok(ConformalFactor::zonal(n, eps))
        }
        "harmonic" => {
            let list = p
                .terms
                .as_deref()
                .ok_or_else(|| ConfigError("w = harmonic needs terms".into()))?;
            let terms = list
                .split(',')
                .map(|item| {
                    let parts: Vec<&str> = item.trim().split(':').collect();
                    let bad = || ConfigError(format!("term '{item}' is not degree:index:coefficient"));
                    if parts.len() != 3 {
                        return Err(bad());
                    }
                    Ok(HarmonicTerm {
                        degree: parts[0].parse().map_err(|_| bad())?,
                        index: parts[1].parse().map_err(|_| bad())?,
                        coefficient: parts[2].parse().map_err(|_| bad())?,
                    })
                })
                .collect::<Result<Vec<_>, _>>()?;
            ConformalFactor::from_harmonic_terms(n, terms).map_err(|e| ConfigError(e.to_string()))
        }
        other => Err(ConfigError(format!(
            "unknown conformal factor '{other}' (round, zonal-eps, harmonic)"
        ))),
    }
}

/// A short label for reports.
pub fn factor_label(p: &Params) -> String {
    match p.w.as_deref().unwrap_or("round") {
        "round" => "round".into(),
        "harmonic" => format!("harmonic[{}]", p.terms.as_deref().unwrap_or("")),
        other => format!("{other}[{}]", p.eps.unwrap_or(f64::NAN)),
    }
}
