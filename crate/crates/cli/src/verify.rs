//! The acceptance suite behind `verify-all`.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::f64::consts::PI;
use std::time::Instant;

use nalgebra::DMatrix;
use nctorus::poly::Poly;
use nctorus::quad::integrate_box_checked;
use nctorus::{
    periodize, CoveringMap, LatticePoint, MoyalMatrix, PlaneWave, SchwartzGaussian, SkewMatrix, ThetaEntry,
    TorusElement,
};
use num_complex::Complex64 as C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde_json::json;

use crate::config::ExperimentConfig;
use crate::error::{CliError, Result};
use crate::experiments::{self, random_element, Check, Relation, Report};
use crate::output::{flag, num, Artifact, Table};

pub const MODULES: [&str; 5] = ["nctorus", "covering", "moyal", "periodize", "cli"];

#[derive(Clone, Debug)]
pub struct CriterionResult {
    pub id: u32,
    pub module: &'static str,
    pub name: &'static str,
    pub value: f64,
    pub relation: Relation,
    pub threshold: f64,
    pub detail: String,
    pub seconds: f64,
    pub budget: Option<f64>,
    pub pass: bool,
    pub artifacts: Vec<Artifact>,
}

struct Outcome {
    headline: Check,
    others: Vec<Check>,
    detail: String,
    artifacts: Vec<Artifact>,
}

impl Outcome {
    fn from_checks(mut checks: Vec<Check>, artifacts: Vec<Artifact>) -> Outcome {
        let headline = checks.remove(0);
        let detail = checks.iter().map(|c| format!("{}={}", c.name, short(c.value))).collect::<Vec<_>>().join("; ");
        Outcome { headline, others: checks, detail, artifacts }
    }
}

fn short(x: f64) -> String {
    format!("{:.3e}", x + 0.0)
}

#[derive(Debug)]
struct Criterion {
    id: u32,
    module: &'static str,
    name: &'static str,
    budget: Option<f64>,
    run: fn() -> Result<Outcome>,
}

const CRITERIA: [Criterion; 10] = [
    Criterion { id: 1, module: "nctorus", name: "torus algebra exactness", budget: Some(10.0), run: torus_exactness },
    Criterion { id: 2, module: "nctorus", name: "GNS orthonormality and trace", budget: Some(5.0), run: gns_trace },
    Criterion { id: 3, module: "covering", name: "covering suite", budget: Some(20.0), run: covering_suite },
    Criterion { id: 4, module: "covering", name: "covering tower", budget: None, run: tower },
    Criterion { id: 5, module: "moyal", name: "oscillator product table", budget: Some(2.0), run: moyal_table },
    Criterion { id: 6, module: "moyal", name: "operator-norm bound", budget: Some(30.0), run: opnorm_bound },
    Criterion { id: 7, module: "moyal", name: "plane-wave scaling identity", budget: None, run: scaling },
    Criterion { id: 8, module: "periodize", name: "periodization coefficients", budget: None, run: periodization },
    Criterion { id: 9, module: "periodize", name: "decay experiments", budget: Some(60.0), run: decay },
    Criterion { id: 10, module: "periodize", name: "square condition", budget: Some(60.0), run: square },
];

const DETERMINISM: (u32, &str, &str) = (11, "cli", "determinism");

/// Runs a config through the same path as `nctorus run`, keeping the artifacts in memory.
pub fn run_config(value: serde_json::Value) -> Result<Report> {
    let cfg: ExperimentConfig = serde_json::from_value(value)?;
    let exp = cfg.experiment()?;
    experiments::run(&exp, cfg.seed, Path::new(&cfg.output_path))
}

fn all_checks(reports: &[Report]) -> Vec<Check> {
    reports.iter().flat_map(|r| r.checks.clone()).collect()
}

fn worst(checks: &[Check], names: &[&str], relation: Relation, threshold: f64, label: &str) -> Check {
    let mut value = 0.0f64;
    let mut pass = true;
    for c in checks.iter().filter(|c| names.contains(&c.name.as_str())) {
        value = value.max(c.value);
        pass &= c.pass;
    }
    let mut c = Check::new(label, value, relation, threshold);
    c.pass &= pass;
    c
}

fn artifacts(reports: Vec<Report>) -> Vec<Artifact> {
    reports.into_iter().flat_map(|r| r.artifacts).collect()
}

fn torus_exactness() -> Result<Outcome> {
    let reports = [("1/3", 1, "star_1_3.csv"), ("2/7", 2, "star_2_7.csv")]
        .into_iter()
        .map(|(th, seed, out)| {
            let neg = format!("-{th}");
            run_config(json!({
                "kind": "star-check", "seed": seed, "output_path": out,
                "parameters": { "theta": [["0", th], [neg, "0"]], "radius": 4, "samples": 500 }
            }))
        })
        .collect::<Result<Vec<_>>>()?;
    let checks = all_checks(&reports);
    let outcome = Outcome::from_checks(
        vec![
            worst(&checks, &["associativity", "involution"], Relation::AtMost, 1e-10, "algebra_residual"),
            worst(&checks, &["associativity"], Relation::AtMost, 1e-10, "associativity"),
            worst(&checks, &["involution"], Relation::AtMost, 1e-10, "involution"),
            worst(&checks, &["generator_relation"], Relation::AtMost, 1e-12, "generator_relation"),
        ],
        artifacts(reports),
    );
    Ok(outcome)
}

fn gns_trace() -> Result<Outcome> {
    let theta = Arc::new(SkewMatrix::planar(ThetaEntry::rational(2, 7)?));
    let window: Vec<LatticePoint> = nctorus::window_points(3, 2).collect();
    let mut gns = 0.0f64;
    for k in &window {
        let uk = TorusElement::basis(theta.clone(), k.clone())?;
        for l in &window {
            let ul = TorusElement::basis(theta.clone(), l.clone())?;
            let delta = if k == l { 1.0 } else { 0.0 };
            gns = gns.max((uk.gns_inner(&ul)? - delta).norm());
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let pairs: Vec<_> = (0..1000).map(|_| (random_element(&theta, 4, &mut rng), random_element(&theta, 4, &mut rng))).collect();
    let rows = pairs
        .par_iter()
        .map(|(a, b)| {
            let gap = (a.star(b)?.trace() - b.star(a)?.trace()).norm();
            Ok((gap, a.l1_bound() * b.l1_bound()))
        })
        .collect::<nctorus::Result<Vec<_>>>()?;
    let mut t = Table::new(&["sample", "trace_gap", "l1_product", "pass"]);
    let mut ok = true;
    let mut ratio = 0.0f64;
    for (i, &(gap, scale)) in rows.iter().enumerate() {
        let pass = gap <= 1e-12 * scale;
        ok &= pass;
        if scale > 0.0 {
            ratio = ratio.max(gap / scale);
        }
        t.push(vec![i.to_string(), num(gap), num(scale), flag(pass)]);
    }
    let mut trace = Check::new("trace_ratio", ratio, Relation::AtMost, 1e-12);
    trace.pass &= ok;
    Ok(Outcome::from_checks(
        vec![trace, Check::new("gns_orthonormality", gns, Relation::AtMost, 0.0)],
        vec![Artifact::csv("trace.csv", &t)],
    ))
}

fn covering_suite() -> Result<Outcome> {
    let mut reports = Vec::new();
    for (cover, k, seed, out) in [("1/20", [2, 2], 4, "covering_2_2.csv"), ("1/30", [2, 3], 5, "covering_2_3.csv")] {
        let neg = format!("-{cover}");
        reports.push(run_config(json!({
            "kind": "covering-check", "seed": seed, "output_path": out,
            "parameters": {
                "base": [["0", "1/5"], ["-1/5", "0"]],
                "cover": [["0", cover], [neg, "0"]],
                "k": k, "radius": 3, "samples": 500
            }
        }))?);
    }
    // Commutative sanity: the lift is the coefficient dilation p ↦ 3p, bit for bit.
    let zero = Arc::new(SkewMatrix::zero(1));
    let map = CoveringMap::new(zero.clone(), zero.clone(), vec![3])?;
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut mismatches = 0usize;
    let mut t = Table::new(&["sample", "terms", "exact"]);
    for i in 0..200 {
        let a = random_element(&zero, 6, &mut rng);
        let lifted = map.lift(&a)?;
        let dilated: BTreeMap<LatticePoint, C64> = a.coeffs().iter().map(|(p, c)| (p.dilate(&[3]), *c)).collect();
        let exact = *lifted.coeffs() == dilated;
        mismatches += usize::from(!exact);
        t.push(vec![i.to_string(), a.len().to_string(), flag(exact)]);
    }
    let checks = all_checks(&reports);
    let mut all = artifacts(reports);
    all.push(Artifact::csv("commutative_dilation.csv", &t));
    Ok(Outcome::from_checks(
        vec![
            worst(&checks, &["lift_multiplicativity"], Relation::AtMost, 1e-12, "lift_multiplicativity"),
            worst(&checks, &["congruence"], Relation::AtMost, 1e-14, "congruence"),
            worst(&checks, &["fixed_point"], Relation::AtMost, 1e-14, "fixed_point"),
            worst(&checks, &["module_roundtrip"], Relation::AtMost, 1e-12, "module_roundtrip"),
            worst(&checks, &["hilbert_support"], Relation::AtMost, 1e-14, "hilbert_support"),
            Check::new("dilation_mismatches", mismatches as f64, Relation::AtMost, 0.0),
        ],
        all,
    ))
}

fn tower() -> Result<Outcome> {
    let report = run_config(json!({
        "kind": "tower", "seed": 7, "output_path": "tower.csv",
        "parameters": { "theta": "2", "factors": [2, 3, 2], "N": 1, "radius": 2, "samples": 20 }
    }))?;
    // The orders must be exactly 4, 36, 144.
    let table = &report.artifacts[0].bytes;
    let text = String::from_utf8_lossy(table);
    let orders: Vec<&str> = text.lines().skip(1).map(|l| l.split(',').nth(2).unwrap_or("")).collect();
    let expected = ["4", "36", "144"];
    let orders_ok = orders == expected;
    let mut checks = report.checks.clone();
    checks.push(Check::new("orders_4_36_144", if orders_ok { 0.0 } else { 1.0 }, Relation::AtMost, 0.0));
    Ok(Outcome::from_checks(checks, report.artifacts))
}

fn moyal_table() -> Result<Outcome> {
    let report = run_config(json!({
        "kind": "moyal-table", "seed": 0, "output_path": "moyal_table.csv", "parameters": { "M": 8, "theta": 2.0 }
    }))?;
    Ok(Outcome::from_checks(report.checks.clone(), report.artifacts))
}

fn opnorm_bound() -> Result<Outcome> {
    let k = nctorus::opnorm_calibration();
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mats: Vec<_> = (0..1000)
        .map(|_| DMatrix::from_fn(16, 16, |_, _| C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))))
        .collect();
    let rows = mats
        .into_par_iter()
        .map(|d| Ok(MoyalMatrix::from_dense(1, 2.0, 16, d)?.opnorm_bound_check_with(k)))
        .collect::<nctorus::Result<Vec<_>>>()?;
    let mut t = Table::new(&["sample", "opnorm", "bound", "pass"]);
    let mut excess = f64::NEG_INFINITY;
    let mut ok = true;
    for (i, r) in rows.iter().enumerate() {
        excess = excess.max(r.opnorm - r.bound);
        ok &= r.ok;
        t.push(vec![i.to_string(), num(r.opnorm), num(r.bound), flag(r.ok)]);
    }
    let mut headline = Check::new("max_excess", excess, Relation::AtMost, 1e-12);
    headline.pass &= ok;
    Ok(Outcome::from_checks(
        vec![headline, Check::new("calibration", k, Relation::AtLeast, 0.0)],
        vec![Artifact::csv("opnorm.csv", &t)],
    ))
}

fn scaling() -> Result<Outcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let thetas = [0.5, 2.0, 5.0];
    let mut t = Table::new(&["sample", "theta", "N", "residual"]);
    let mut worst = 0.0f64;
    for i in 0..200 {
        let theta = thetas[rng.random_range(0..thetas.len())];
        let nh = rng.random_range(1..=2usize);
        let wave = |rng: &mut ChaCha8Rng| {
            let k: Vec<f64> = (0..2 * nh).map(|_| rng.random_range(-3.0..3.0)).collect();
            PlaneWave::new(k, C64::from_polar(rng.random_range(0.1..2.0), rng.random_range(-3.0..3.0)))
        };
        let (w1, w2) = (wave(&mut rng), wave(&mut rng));
        let r = nctorus::scaling_identity_check(&w1, &w2, theta)?;
        worst = worst.max(r);
        t.push(vec![i.to_string(), num(theta), nh.to_string(), num(r)]);
    }
    Ok(Outcome::from_checks(
        vec![Check::new("scaling_residual", worst, Relation::AtMost, 1e-12)],
        vec![Artifact::csv("scaling.csv", &t)],
    ))
}

fn skewed() -> Result<SchwartzGaussian> {
    Ok(SchwartzGaussian::new(
        DMatrix::from_row_slice(2, 2, &[1.3, 0.4, 0.4, 0.9]),
        vec![0.4, -0.7],
        vec![0.25, 0.1],
        Poly::var(2, 0).add(&Poly::constant(2, C64::new(0.5, 0.2))),
        C64::new(1.0, 0.3),
    )?)
}

/// `Σ_γ f(x + mγ)` summed directly over `|γ|_∞ ≤ reach`.
fn grid_sum(f: &SchwartzGaussian, x: &[f64], m: u64, reach: i64) -> C64 {
    let mut s = C64::new(0.0, 0.0);
    for g0 in -reach..=reach {
        for g1 in -reach..=reach {
            s += f.eval(&[x[0] + (g0 * m as i64) as f64, x[1] + (g1 * m as i64) as f64]);
        }
    }
    s
}

fn periodization() -> Result<Outcome> {
    let two = ThetaEntry::rational(2, 1)?;
    let functions = [("standard", SchwartzGaussian::standard(2)), ("skewed", skewed()?)];
    // Coefficients at m = 1 against the closed-form transform, and the closed
    // form against direct quadrature of ∫ f(x) e^{−2πik·x} dx.
    let mut coeffs =
        Table::new(&["function", "k1", "k2", "re", "im", "ft_re", "ft_im", "quad_re", "quad_im", "gap"]);
    let mut coeff_gap = 0.0f64;
    for (name, f) in &functions {
        let a = periodize(f, 0, 1, two, 1e-14)?;
        let ft = f.fourier();
        let (lo, hi) = f.bounding_box();
        let ev = f.evaluator();
        let rows = nctorus::window_points(3, 2)
            .collect::<Vec<_>>()
            .into_par_iter()
            .map(|k| {
                let u: Vec<f64> = k.coords().iter().map(|&v| v as f64).collect();
                let integrand = |x: &[f64]| ev.eval(x) * C64::cis(-2.0 * PI * (u[0] * x[0] + u[1] * x[1]));
                let q = integrate_box_checked(&integrand, &lo, &hi, 1e-14, 128)?;
                Ok((k, q))
            })
            .collect::<nctorus::Result<Vec<_>>>()?;
        for (k, q) in rows {
            let u: Vec<f64> = k.coords().iter().map(|&v| v as f64).collect();
            let c = a.coeff(&k);
            let e = ft.eval(&u);
            let gap = (c - e).norm().max((q - e).norm());
            coeff_gap = coeff_gap.max(gap);
            coeffs.push(vec![
                name.to_string(),
                k.coords()[0].to_string(),
                k.coords()[1].to_string(),
                num(c.re),
                num(c.im),
                num(e.re),
                num(e.im),
                num(q.re),
                num(q.im),
                num(gap),
            ]);
        }
    }
    let mut grid = Table::new(&["function", "x1", "x2", "series_re", "series_im", "grid_re", "grid_im", "gap"]);
    let mut grid_gap = 0.0f64;
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    for (name, f) in &functions {
        let a = periodize(f, 1, 2, two, 1e-13)?;
        for _ in 0..8 {
            let x = [rng.random_range(0.0..2.0), rng.random_range(0.0..2.0)];
            let s = a.eval(&x);
            let g = grid_sum(f, &x, 2, 8);
            grid_gap = grid_gap.max((s - g).norm());
            grid.push(vec![
                name.to_string(),
                num(x[0]),
                num(x[1]),
                num(s.re),
                num(s.im),
                num(g.re),
                num(g.im),
                num((s - g).norm()),
            ]);
        }
    }
    Ok(Outcome::from_checks(
        vec![
            Check::new("unit_multiplier_gap", coeff_gap, Relation::AtMost, 1e-12),
            Check::new("grid_oracle_gap", grid_gap, Relation::AtMost, 1e-7),
        ],
        vec![Artifact::csv("periodize_m1.csv", &coeffs), Artifact::csv("periodize_grid.csv", &grid)],
    ))
}

fn decay() -> Result<Outcome> {
    let ray = json!({ "from": 4.0, "to": 32.0, "count": 15, "direction": [1.0, 1.0] });
    let translate = run_config(json!({
        "kind": "decay-translate", "seed": 0, "output_path": "decay_translate.csv",
        "parameters": { "a": { "standard": 2 }, "b": { "standard": 2 }, "deltas": ray,
                        "m_list": [4], "max_slope": -4.0, "min_r2": 0.99 }
    }))?;
    let lattice = run_config(json!({
        "kind": "lattice-decay", "seed": 0, "output_path": "lattice_decay.csv",
        "parameters": { "a": { "standard": 2 }, "deltas": ray, "tower": { "theta": "2", "factors": [2, 2], "N": 1 },
                        "level": 2, "m_list": [4], "max_slope": -4.0, "min_r2": 0.99 }
    }))?;
    let rename = |r: &Report, prefix: &str| {
        r.checks.iter().map(|c| Check { name: format!("{prefix}_{}", c.name), ..c.clone() }).collect::<Vec<_>>()
    };
    let mut checks = rename(&translate, "translate");
    checks.extend(rename(&lattice, "lattice"));
    // The headline is the weakest R²; slopes follow.
    let min_r2 = checks.iter().filter(|c| c.name.ends_with("r_squared")).map(|c| c.value).fold(f64::INFINITY, f64::min);
    let mut headline = Check::new("min_r_squared", min_r2, Relation::AtLeast, 0.99);
    headline.pass &= checks.iter().all(|c| c.pass);
    checks.insert(0, headline);
    Ok(Outcome::from_checks(checks, artifacts(vec![translate, lattice])))
}

fn square() -> Result<Outcome> {
    let report = run_config(json!({
        "kind": "square-condition", "seed": 0, "output_path": "square_condition.csv",
        "parameters": { "candidate": { "type": "f00", "N": 1 },
                        "tower": { "theta": "2", "factors": [2, 2, 2], "N": 1 }, "eps": 1e-3, "tail_tol": 1e-14 }
    }))?;
    let mut checks = report.checks.clone();
    // Lead with the final bound.
    checks.rotate_left(1);
    Ok(Outcome::from_checks(checks, report.artifacts))
}

fn selected(filter: Option<&str>) -> Result<(Vec<&'static Criterion>, bool)> {
    match filter {
        None => Ok((CRITERIA.iter().collect(), true)),
        Some(f) if MODULES.contains(&f) => Ok((CRITERIA.iter().filter(|c| c.module == f).collect(), f == "cli")),
        Some(f) => Err(CliError::Config(format!("unknown module {f:?}; expected one of {}", MODULES.join(", ")))),
    }
}

fn execute(c: &Criterion) -> Result<CriterionResult> {
    let start = Instant::now();
    let o = (c.run)()?;
    let seconds = start.elapsed().as_secs_f64();
    let within = c.budget.is_none_or(|b| seconds < b);
    let pass = o.headline.pass && o.others.iter().all(|x| x.pass) && within;
    let dir = PathBuf::from(format!("criterion_{:02}", c.id));
    Ok(CriterionResult {
        id: c.id,
        module: c.module,
        name: c.name,
        value: o.headline.value,
        relation: o.headline.relation,
        threshold: o.headline.threshold,
        detail: o.detail,
        seconds,
        budget: c.budget,
        pass,
        artifacts: o.artifacts.into_iter().map(|a| Artifact { path: dir.join(&a.path), bytes: a.bytes }).collect(),
    })
}

/// Every byte of every artifact, for comparison.
fn fingerprint(results: &[CriterionResult]) -> Vec<(PathBuf, Vec<u8>)> {
    results.iter().flat_map(|r| r.artifacts.iter().map(|a| (a.path.clone(), a.bytes.clone()))).collect()
}

/// Runs the selected criteria in order. Determinism reruns criteria 1–10 and
/// compares their artifacts byte for byte with the first pass.
pub fn verify_all(filter: Option<&str>) -> Result<Vec<CriterionResult>> {
    let (chosen, determinism) = selected(filter)?;
    let mut results = chosen.iter().map(|c| execute(c)).collect::<Result<Vec<_>>>()?;
    if determinism {
        let start = Instant::now();
        let first = if filter.is_none() {
            fingerprint(&results)
        } else {
            fingerprint(&CRITERIA.iter().map(execute).collect::<Result<Vec<_>>>()?)
        };
        let second = fingerprint(&CRITERIA.iter().map(execute).collect::<Result<Vec<_>>>()?);
        let differing = if first.len() != second.len() {
            first.len().max(second.len())
        } else {
            first.iter().zip(&second).filter(|(a, b)| a != b).count()
        };
        let files = first.len();
        let (id, module, name) = DETERMINISM;
        results.push(CriterionResult {
            id,
            module,
            name,
            value: differing as f64,
            relation: Relation::AtMost,
            threshold: 0.0,
            detail: format!("artifacts_compared={files}"),
            seconds: start.elapsed().as_secs_f64(),
            budget: None,
            pass: differing == 0 && files > 0,
            artifacts: Vec::new(),
        });
    }
    Ok(results)
}

/// `verify_summary.csv`; runtimes are left out so that reruns compare equal.
pub fn summary_table(results: &[CriterionResult]) -> Table {
    let mut t = Table::new(&["criterion", "module", "name", "value", "relation", "threshold", "pass", "detail"]);
    for r in results {
        t.push(vec![
            r.id.to_string(),
            r.module.into(),
            r.name.into(),
            num(r.value),
            r.relation.symbol().into(),
            num(r.threshold),
            flag(r.pass),
            r.detail.clone(),
        ]);
    }
    t
}

/// The human-readable table printed by `verify-all`.
pub fn render(results: &[CriterionResult]) -> String {
    let mut out = format!("{:<4} {:<10} {:<30} {:>12} {:>3} {:>10} {:>9}  {}\n", "#", "module", "criterion", "value", "", "threshold", "time", "result");
    for r in results {
        let time = match r.budget {
            Some(b) => format!("{:.2}s/{b:.0}s", r.seconds),
            None => format!("{:.2}s", r.seconds),
        };
        out.push_str(&format!(
            "{:<4} {:<10} {:<30} {:>12} {:>3} {:>10} {:>9}  {}\n",
            r.id,
            r.module,
            r.name,
            short(r.value),
            r.relation.symbol(),
            short(r.threshold),
            time,
            flag(r.pass)
        ));
        if !r.detail.is_empty() {
            out.push_str(&format!("     {}\n", r.detail));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unknown_filter_is_a_config_error() {
        assert_eq!(selected(Some("bogus")).unwrap_err().kind(), "ConfigError");
        let (moyal, det) = selected(Some("moyal")).unwrap();
        assert_eq!(moyal.iter().map(|c| c.id).collect::<Vec<_>>(), vec![5, 6, 7]);
        assert!(!det);
    }

    #[test]
    fn moyal_suite_passes() {
        let results = verify_all(Some("moyal")).unwrap();
        assert_eq!(results.len(), 3);
        for r in &results {
            assert!(r.pass, "{r:?}");
        }
    }
}
