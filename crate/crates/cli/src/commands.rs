use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::{json, Value};

use rpn_eigen::bounds::ratio_table;
use rpn_eigen::degen_limits::{fold_limit_volume, moebius_limit_volume, shipped_surface, LimitExperiment, DEFAULT_SEQUENCE};
use rpn_eigen::degree_lab::{
    change_of_variables_check, cov_example, degree_both, generic_target, reflection_symmetry_check, standard_region,
    SphereSelfMap, DEFAULT_RESOLUTION,
};
use rpn_eigen::quadrature::build_sphere_rule;
use rpn_eigen::spectral::{default_basis_degree, default_rule_degree, first_excited_state, normalize_volume, GalerkinSpace};
use rpn_eigen::sphere_geom::{BallPoint, SphericalCap, UnitVector};
use rpn_eigen::trial_bound::{
    center_of_mass, rayleigh_bound_chain, search_vector_field_zero, theorem_check, ChainOptions, PushforwardMeasure,
    SearchConfig, TrialSetup, COM_MAX_ITER, COM_TOL,
};
use rpn_eigen::veronese::{veronese_apply, veronese_jacobian};

use crate::config::{conformal_factor, factor_label, parse_list, ConfigError, Params};

#[derive(Debug)]
pub enum CmdError {
    Config(String),
    Numeric(rpn_eigen::Error),
    Io(String),
}

impl From<ConfigError> for CmdError {
    fn from(e: ConfigError) -> Self {
        CmdError::Config(e.0)
    }
}

impl From<rpn_eigen::Error> for CmdError {
    fn from(e: rpn_eigen::Error) -> Self {
        CmdError::Numeric(e)
    }
}

impl std::fmt::Display for CmdError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CmdError::Config(s) => write!(f, "configuration error: {s}"),
            CmdError::Numeric(e) => write!(f, "numeric failure: {e}"),
            CmdError::Io(s) => write!(f, "output error: {s}"),
        }
    }
}

type CmdResult = Result<Outcome, CmdError>;

/// One asserted invariant of a run.
#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub id: String,
    pub passed: bool,
    pub value: f64,
    pub limit: f64,
}

fn check(id: impl Into<String>, passed: bool, value: f64, limit: f64) -> Check {
    Check {
        id: id.into(),
        passed,
        value,
        limit,
    }
}

pub struct Outcome {
    pub checks: Vec<Check>,
    pub detail: Value,
}

fn write_csv<T: Serialize>(dir: &Path, command: &str, rows: &[T]) -> Result<(), CmdError> {
    let path = dir.join(format!("{command}.csv"));
    let io = |e: csv::Error| CmdError::Io(format!("{}: {e}", path.display()));
    let mut w = csv::Writer::from_path(&path).map_err(io)?;
    for r in rows {
        w.serialize(r).map_err(io)?;
    }
    w.flush().map_err(|e| CmdError::Io(format!("{}: {e}", path.display())))
}

fn seed(p: &Params) -> u64 {
    p.seed.unwrap_or(0)
}

fn direction(p: &Params, dim: usize) -> Result<UnitVector, CmdError> {
    match &p.p {
        Some(s) => {
            let v = parse_list("p", s)?;
            if v.len() != dim {
                return Err(CmdError::Config(format!("p must have {dim} coordinates, got {}", v.len())));
            }
            UnitVector::from_direction(DVector::from_vec(v)).map_err(|e| CmdError::Config(e.to_string()))
        }
        None => Ok(UnitVector::basis(dim, dim - 1)),
    }
}

fn basis_degree(p: &Params, n: usize) -> usize {
    p.l.unwrap_or_else(|| default_basis_degree(n))
}

fn space(p: &Params, n: usize, l: usize) -> Result<GalerkinSpace, CmdError> {
    let rule = build_sphere_rule(n, p.quad_degree.unwrap_or_else(|| default_rule_degree(l)))?;
    Ok(GalerkinSpace::new(n, l, rule)?)
}

pub fn veronese_check(p: &Params, dir: &Path) -> CmdResult {
    #[derive(Serialize)]
    struct Row {
        n: usize,
        samples: usize,
        max_norm_defect: f64,
        max_metric_defect: f64,
    }
    let (n_max, samples) = (p.n_max.unwrap_or(8), p.samples.unwrap_or(1000));
    if n_max == 0 {
        return Err(CmdError::Config("n-max must be >= 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed(p));
    let mut rows = Vec::new();
    for n in 1..=n_max {
        let nf = n as f64;
        let (mut a, mut b) = (0.0f64, 0.0f64);
        for _ in 0..samples {
            let x = UnitVector::random(n + 1, &mut rng).into_inner() * rng.random_range(0.2..1.5);
            a = a.max((veronese_apply(n, x.as_slice())?.norm() - x.norm_squared()).abs());
            let j = veronese_jacobian(n, x.as_slice())?;
            let expect = DMatrix::identity(n + 1, n + 1) * (2.0 * (nf + 1.0) / nf * x.norm_squared())
                + &x * x.transpose() * (2.0 * (nf - 1.0) / nf);
            b = b.max((j.transpose() * &j - expect).norm());
        }
        rows.push(Row {
            n,
            samples,
            max_norm_defect: a,
            max_metric_defect: b,
        });
    }
    write_csv(dir, "veronese-check", &rows)?;
    let norm = rows.iter().map(|r| r.max_norm_defect).fold(0.0, f64::max);
    let metric = rows.iter().map(|r| r.max_metric_defect).fold(0.0, f64::max);
    Ok(Outcome {
        checks: vec![
            check("veronese.norm", norm <= 1e-12, norm, 1e-12),
            check("veronese.metric", metric <= 1e-10, metric, 1e-10),
        ],
        detail: json!({ "n_max": n_max, "samples": samples }),
    })
}

pub fn spectrum(p: &Params, dir: &Path) -> CmdResult {
    #[derive(Serialize)]
    struct Row {
        index: usize,
        eigenvalue: f64,
    }
    let n = p.n.unwrap_or(2);
    let l = basis_degree(p, n);
    let space = space(p, n, l)?;
    let w = normalize_volume(&conformal_factor(p, n)?, n, space.rule())?;
    let res = space.solve(&w, p.k.unwrap_or(16))?;
    let rows: Vec<Row> = res
        .eigenvalues
        .iter()
        .enumerate()
        .map(|(index, &eigenvalue)| Row { index, eigenvalue })
        .collect();
    write_csv(dir, "spectrum", &rows)?;
    let ascending = res.eigenvalues.windows(2).all(|w| w[0] <= w[1]);
    let ground = res.lambda(0).abs();
    let clusters: Vec<Value> = res
        .clusters(1e-6)
        .iter()
        .map(|&(v, m)| json!({ "value": v, "multiplicity": m }))
        .collect();
    Ok(Outcome {
        checks: vec![
            check("spectrum.ascending", ascending, 0.0, 0.0),
            check("spectrum.constant-mode", ground <= 1e-8, ground, 1e-8),
        ],
        detail: json!({ "n": n, "basis_degree": l, "w": factor_label(p), "clusters": clusters }),
    })
}

pub fn theorem(p: &Params, dir: &Path) -> CmdResult {
    let n = p.n.unwrap_or(2);
    let l = basis_degree(p, n);
    let w = conformal_factor(p, n)?;
    let c = theorem_check(&w, n, l, p.refine.unwrap_or(false))?;
    #[derive(Serialize)]
    struct Row<'a> {
        n: usize,
        basis_degree: usize,
        w: &'a str,
        lambda1: f64,
        lambda2: f64,
        bound: f64,
        margin: f64,
        passed: bool,
    }
    let label = factor_label(p);
    write_csv(
        dir,
        "theorem-check",
        &[Row {
            n,
            basis_degree: l,
            w: &label,
            lambda1: c.lambda1,
            lambda2: c.lambda2,
            bound: c.bound,
            margin: c.margin,
            passed: c.passed,
        }],
    )?;
    Ok(Outcome {
        checks: vec![check("bound.lambda2", c.passed, c.lambda2, c.bound)],
        detail: serde_json::to_value(&c).expect("serializable"),
    })
}

pub fn rayleigh_chain(p: &Params, dir: &Path) -> CmdResult {
    #[derive(Serialize)]
    struct Row {
        cap: usize,
        t: f64,
        stage: String,
        lhs: f64,
        rhs: f64,
        strict: bool,
        asserted: bool,
        holds: bool,
        relative_margin: f64,
    }
    let n = p.n.unwrap_or(2);
    let l = basis_degree(p, n);
    let space = space(p, n, l)?;
    let w = normalize_volume(&conformal_factor(p, n)?, n, space.rule())?;
    let res = space.solve(&w, 3)?;
    let f = first_excited_state(&res)?;
    let setup = TrialSetup::from_space(&space, &w, Some(&f))?;
    let m = setup.target_dim();
    let caps: Vec<SphericalCap> = match p.t {
        Some(t) => vec![SphericalCap::new(direction(p, m)?, t)?],
        None => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed(p));
            (0..p.caps.unwrap_or(4))
                .map(|_| {
                    let t = rng.random_range(0.0..0.95);
                    SphericalCap::new(UnitVector::random(m, &mut rng), t)
                })
                .collect::<Result<_, _>>()?
        }
    };
    let mut rows = Vec::new();
    let mut reports = Vec::new();
    let (mut denom, mut fin) = (0.0f64, 0.0f64);
    let mut passed = true;
    for (i, cap) in caps.iter().enumerate() {
        let c = setup.solve_center(cap, COM_TOL, COM_MAX_ITER)?.ball_point();
        let rep = rayleigh_bound_chain(&setup, cap, &c, Some(&res), &ChainOptions::default())?;
        passed &= rep.passed;
        denom = denom.max((rep.denominator_sum / rep.volume - 1.0).abs());
        fin = fin.max((rep.final_constant / rep.closed_form_constant - 1.0).abs());
        for s in &rep.stages {
            rows.push(Row {
                cap: i,
                t: cap.t(),
                stage: s.id.clone(),
                lhs: s.lhs,
                rhs: s.rhs,
                strict: s.strict,
                asserted: s.asserted,
                holds: s.holds,
                relative_margin: s.relative_margin,
            });
        }
        reports.push(rep);
    }
    write_csv(dir, "rayleigh-chain", &rows)?;
    Ok(Outcome {
        checks: vec![
            check("chain.stages", passed, 0.0, 0.0),
            check("chain.denominator-identity", denom <= 1e-10, denom, 1e-10),
            check("chain.final-constant", fin <= 1e-12, fin, 1e-12),
        ],
        detail: json!({ "n": n, "basis_degree": l, "w": factor_label(p), "reports": reports }),
    })
}

pub fn com_solve(p: &Params, dir: &Path) -> CmdResult {
    #[derive(Serialize)]
    struct Row {
        iteration: usize,
        residual: f64,
    }
    let n = p.n.unwrap_or(2);
    let r = p.radius.unwrap_or(0.9);
    let rule = build_sphere_rule(n, p.quad_degree.unwrap_or(30))?;
    let d = match &p.p {
        Some(_) => direction(p, n + 1)?,
        None => UnitVector::random(n + 1, &mut ChaCha8Rng::seed_from_u64(seed(p))),
    };
    let d = BallPoint::along(&d, r)?;
    let mu = PushforwardMeasure::uniform(&rule)?.moebius_image(&d)?;
    let tol = p.tol.unwrap_or(COM_TOL);
    let com = center_of_mass(&mu, tol, COM_MAX_ITER)?;
    let rows: Vec<Row> = com
        .history
        .iter()
        .enumerate()
        .map(|(iteration, &residual)| Row { iteration, residual })
        .collect();
    write_csv(dir, "com-solve", &rows)?;
    let err = (DVector::from_column_slice(&com.point) - d.coords()).norm();
    Ok(Outcome {
        checks: vec![
            check("com.residual", com.residual <= tol, com.residual, tol),
            check("com.recovery", err <= 1e-8, err, 1e-8),
            check("com.iterations", com.iterations <= COM_MAX_ITER, com.iterations as f64, COM_MAX_ITER as f64),
        ],
        detail: json!({ "d": d.coords().as_slice(), "center": com }),
    })
}

pub fn vfield_search(p: &Params, dir: &Path) -> CmdResult {
    #[derive(Serialize)]
    struct Row {
        iteration: usize,
        best_relative_residual: f64,
    }
    let n = p.n.unwrap_or(2);
    let l = p.l.unwrap_or(4);
    let space = space(p, n, l)?;
    let w = normalize_volume(&conformal_factor(p, n)?, n, space.rule())?;
    let res = space.solve(&w, 3)?;
    let f = first_excited_state(&res)?;
    let setup = TrialSetup::from_space(&space, &w, Some(&f))?;
    let defaults = SearchConfig::default();
    let config = SearchConfig {
        starts: p.starts.unwrap_or(defaults.starts),
        seed: p.seed.unwrap_or(defaults.seed),
        max_evals_per_start: p.max_evals.unwrap_or(defaults.max_evals_per_start),
        t_max: p.t_max.unwrap_or(defaults.t_max),
        target: p.target.unwrap_or(defaults.target),
    };
    let found = search_vector_field_zero(&setup, &config)?;
    let rows: Vec<Row> = found
        .trace
        .iter()
        .enumerate()
        .map(|(iteration, &best_relative_residual)| Row {
            iteration,
            best_relative_residual,
        })
        .collect();
    write_csv(dir, "vfield-search", &rows)?;
    let limit = p.tol.unwrap_or(1e-3);
    Ok(Outcome {
        checks: vec![check(
            "vfield.zero",
            found.relative_residual <= limit,
            found.relative_residual,
            limit,
        )],
        detail: json!({ "n": n, "basis_degree": l, "w": factor_label(p), "config": config, "result": found }),
    })
}

pub fn degree(p: &Params, dir: &Path) -> CmdResult {
    if let Some(name) = &p.cov {
        let phi = cov_example(name).map_err(|e| CmdError::Config(e.to_string()))?;
        let rep = change_of_variables_check(&phi, &standard_region(), p.resolution.unwrap_or(6))?;
        #[derive(Serialize)]
        struct Row<'a> {
            example: &'a str,
            n: usize,
            degree_minus: i64,
            degree_plus: i64,
            factor: i64,
            holds: bool,
        }
        write_csv(
            dir,
            "degree",
            &[Row {
                example: name,
                n: rep.n,
                degree_minus: rep.degree_minus,
                degree_plus: rep.degree_plus,
                factor: rep.factor,
                holds: rep.holds,
            }],
        )?;
        return Ok(Outcome {
            checks: vec![check(
                "degree.change-of-variables",
                rep.holds,
                rep.degree_minus as f64,
                (rep.factor * rep.degree_plus) as f64,
            )],
            detail: serde_json::to_value(&rep).expect("serializable"),
        });
    }

    let name = p.map.as_deref().unwrap_or("identity");
    let dim = p.dim.unwrap_or(3);
    let map = SphereSelfMap::named(name, dim).map_err(|e| CmdError::Config(e.to_string()))?;
    let rep = match degree_both(
        &map,
        p.resolution.unwrap_or(DEFAULT_RESOLUTION),
        &generic_target(dim, seed(p)),
        p.starts.unwrap_or(256),
        seed(p),
    ) {
        Err(rpn_eigen::Error::DegreeMismatch { integral, count }) => {
            return Ok(Outcome {
                checks: vec![check("degree.agreement", false, integral as f64, count as f64)],
                detail: json!({ "map": name, "dim": dim, "integral": integral, "count": count }),
            })
        }
        other => other?,
    };
    let mut checks = vec![check(
        "degree.agreement",
        true,
        rep.integral.degree as f64,
        rep.count.degree as f64,
    )];
    let symmetry = if dim % 2 == 1 {
        let s = reflection_symmetry_check(&map, (dim - 1) / 2, 500, seed(p))?;
        if s.passed && dim % 4 == 3 {
            // Symmetric maps of S^{2n+1} with n odd have degree 1.
            checks.push(check("degree.symmetric-map", rep.integral.degree == 1, rep.integral.degree as f64, 1.0));
        }
        Some(s)
    } else {
        None
    };
    #[derive(Serialize)]
    struct Row<'a> {
        map: &'a str,
        dim: usize,
        integral: f64,
        degree: i64,
        distance: f64,
        preimage_count: usize,
        preimage_degree: i64,
        symmetric: Option<bool>,
    }
    write_csv(
        dir,
        "degree",
        &[Row {
            map: name,
            dim,
            integral: rep.integral.value,
            degree: rep.integral.degree,
            distance: rep.integral.distance,
            preimage_count: rep.count.preimages.len(),
            preimage_degree: rep.count.degree,
            symmetric: symmetry.map(|s| s.passed),
        }],
    )?;
    Ok(Outcome {
        checks,
        detail: json!({ "report": rep, "symmetry": symmetry }),
    })
}

#[derive(Serialize)]
struct LimitCsv {
    parameter: f64,
    volume: f64,
    direct_volume: f64,
    bound: f64,
    margin: f64,
    within_band: bool,
}

fn limit_rows(exp: &LimitExperiment, band: f64) -> Vec<LimitCsv> {
    exp.rows
        .iter()
        .zip(&exp.direct_volumes)
        .map(|(r, &d)| LimitCsv {
            parameter: r.parameter,
            volume: r.volume,
            direct_volume: d,
            bound: r.bound,
            margin: r.margin,
            within_band: r.within(band),
        })
        .collect()
}

fn sequence(p: &Params) -> Result<Vec<f64>, CmdError> {
    match &p.sequence {
        Some(s) => Ok(parse_list("sequence", s)?),
        None => Ok(DEFAULT_SEQUENCE.to_vec()),
    }
}

fn limits(p: &Params, dir: &Path, command: &str, fold: bool) -> CmdResult {
    let name = p.surface.as_deref().unwrap_or("arc-north");
    let surface = shipped_surface(name).map_err(|e| CmdError::Config(e.to_string()))?;
    let point = direction(p, surface.ambient_dim())?;
    let (seq, tol, band) = (sequence(p)?, p.tol.unwrap_or(1e-9), p.band.unwrap_or(0.02));
    let exp = if fold {
        fold_limit_volume(surface.as_ref(), &point, &seq, tol)?
    } else {
        moebius_limit_volume(surface.as_ref(), &point, &seq, tol)?
    };
    let rows = limit_rows(&exp, band);
    write_csv(dir, command, &rows)?;
    let worst = exp
        .rows
        .iter()
        .map(|r| (r.volume - r.bound) / r.bound)
        .fold(f64::NEG_INFINITY, f64::max);
    let id = if fold { "limits.fold-bound" } else { "limits.moebius-bound" };
    Ok(Outcome {
        checks: vec![check(id, rows.iter().all(|r| r.within_band), worst, band)],
        detail: json!({ "surface": name, "point": point.as_slice(), "band": band, "experiment": exp }),
    })
}

pub fn limits_fold(p: &Params, dir: &Path) -> CmdResult {
    limits(p, dir, "limits-fold", true)
}

pub fn limits_moebius(p: &Params, dir: &Path) -> CmdResult {
    limits(p, dir, "limits-moebius", false)
}

pub fn ratio(p: &Params, dir: &Path) -> CmdResult {
    #[derive(Serialize)]
    struct Row {
        n: usize,
        #[serde(rename = "A_n")]
        a: f64,
        #[serde(rename = "B_n")]
        b: f64,
        ratio: f64,
        lower_bound: f64,
    }
    let n_max = p.n_max.unwrap_or(64);
    let (rows, failure) = match ratio_table(n_max) {
        Ok(rows) => (rows, None),
        Err(rpn_eigen::Error::Numeric(msg)) => {
            let rows = (2..=n_max)
                .map(rpn_eigen::bounds::bound_constants)
                .collect::<Result<Vec<_>, _>>()?;
            (rows, Some(msg))
        }
        Err(e) => return Err(e.into()),
    };
    let csv: Vec<Row> = rows
        .iter()
        .map(|r| Row {
            n: r.n,
            a: r.a,
            b: r.b,
            ratio: r.ratio,
            lower_bound: r.lower_bound,
        })
        .collect();
    write_csv(dir, "ratio-table", &csv)?;
    let worst = rows.iter().map(|r| r.upper_margin).fold(f64::INFINITY, f64::min);
    Ok(Outcome {
        checks: vec![check("ratio.lemma", failure.is_none(), worst, 0.0)],
        detail: json!({ "n_max": n_max, "failure": failure, "rows": rows }),
    })
}
