//! One runner per experiment kind. Each produces CSV artifacts and a list of
//! threshold checks; the run passes when every check does.

use std::path::Path;
use std::sync::Arc;

use nctorus::{
    CoveringMap, DecayRow, DecayTable, LatticePoint, MoyalMatrix, SkewMatrix, TorusElement, window_points,
};
use num_complex::Complex64 as C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::config::{
    CoveringCheck, DecayTranslate, Experiment, FitGate, LatticeDecay, MoyalTable, SquareCondition, StarCheck,
    TowerCheck,
};
use crate::error::Result;
use crate::output::{flag, num, sibling, Artifact, Table};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Relation {
    AtMost,
    AtLeast,
    Below,
}

impl Relation {
    fn holds(self, value: f64, threshold: f64) -> bool {
        match self {
            Relation::AtMost => value <= threshold,
            Relation::AtLeast => value >= threshold,
            Relation::Below => value < threshold,
        }
    }

    pub fn symbol(self) -> &'static str {
        match self {
            Relation::AtMost => "<=",
            Relation::AtLeast => ">=",
            Relation::Below => "<",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub relation: Relation,
    pub threshold: f64,
    pub pass: bool,
}

impl Check {
    pub fn new(name: &str, value: f64, relation: Relation, threshold: f64) -> Self {
        // NaN fails every relation.
        let pass = relation.holds(value, threshold);
        Check { name: name.into(), value, relation, threshold, pass }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Report {
    pub artifacts: Vec<Artifact>,
    pub checks: Vec<Check>,
    /// Human-readable lines for the terminal.
    pub notes: Vec<String>,
}

impl Report {
    pub fn pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    pub fn check(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }

    fn new(path: &Path, main: &Table, checks: Vec<Check>) -> Self {
        let mut t = Table::new(&["check", "value", "relation", "threshold", "pass"]);
        for c in &checks {
            t.push(vec![c.name.clone(), num(c.value), c.relation.symbol().into(), num(c.threshold), flag(c.pass)]);
        }
        Report {
            artifacts: vec![Artifact::csv(path, main), Artifact::csv(sibling(path, "_checks"), &t)],
            checks,
            notes: Vec::new(),
        }
    }
}

pub fn run(exp: &Experiment, seed: u64, path: &Path) -> Result<Report> {
    match exp {
        Experiment::StarCheck(p) => star_check(p, seed, path),
        Experiment::CoveringCheck(p) => covering_check(p, seed, path),
        Experiment::Tower(p) => tower(p, seed, path),
        Experiment::MoyalTable(p) => moyal_table(p, path),
        Experiment::DecayTranslate(p) => decay_translate(p, path),
        Experiment::LatticeDecay(p) => lattice_decay(p, path),
        Experiment::SquareCondition(p) => square_condition(p, path),
    }
}

/// Support radius uniform in `0..=radius`, each window point kept with
/// probability ½, coefficients uniform in the square `[−1, 1]²`.
pub fn random_element(theta: &Arc<SkewMatrix>, radius: u64, rng: &mut ChaCha8Rng) -> TorusElement {
    let r = rng.random_range(0..=radius);
    let mut terms = Vec::new();
    for k in window_points(r, theta.n()) {
        if rng.random_bool(0.5) {
            terms.push((k, C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))));
        }
    }
    TorusElement::from_terms(theta.clone(), terms).expect("window points match Θ")
}

/// Largest value, `0` when empty; NaN propagates.
fn max_of(values: impl Iterator<Item = f64>) -> f64 {
    values.fold(0.0, |m, v| if v.is_nan() || m.is_nan() { f64::NAN } else { m.max(v) })
}

fn coefficient_gap(a: &TorusElement, b: &TorusElement) -> Result<f64> {
    let d = a.sub(b)?;
    Ok(max_of(d.coeffs().values().map(|c| c.norm())))
}

struct StarRow {
    assoc: f64,
    involution: f64,
    trace: f64,
    sizes: [usize; 3],
}

fn star_check(p: &StarCheck, seed: u64, path: &Path) -> Result<Report> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let triples: Vec<[TorusElement; 3]> = (0..p.samples)
        .map(|_| std::array::from_fn(|_| random_element(&p.theta, p.radius, &mut rng)))
        .collect();
    let rows = triples
        .par_iter()
        .map(|[a, b, c]| {
            let assoc = a.star(b)?.star(c)?.l1_distance(&a.star(&b.star(c)?)?)?;
            let involution = a.star(b)?.involution().l1_distance(&b.involution().star(&a.involution())?)?;
            let scale = a.l1_bound() * b.l1_bound();
            let gap = (a.star(b)?.trace() - b.star(a)?.trace()).norm();
            let trace = if scale > 0.0 { gap / scale } else { gap };
            Ok(StarRow { assoc, involution, trace, sizes: [a.len(), b.len(), c.len()] })
        })
        .collect::<Result<Vec<_>>>()?;

    let mut t =
        Table::new(&["sample", "terms_a", "terms_b", "terms_c", "assoc_residual", "involution_residual", "trace_ratio"]);
    for (i, r) in rows.iter().enumerate() {
        t.push(vec![
            i.to_string(),
            r.sizes[0].to_string(),
            r.sizes[1].to_string(),
            r.sizes[2].to_string(),
            num(r.assoc),
            num(r.involution),
            num(r.trace),
        ]);
    }

    let n = p.theta.n();
    let mut relation = 0.0f64;
    for i in 0..n {
        for j in 0..n {
            let ui = TorusElement::generator(p.theta.clone(), i)?;
            let uj = TorusElement::generator(p.theta.clone(), j)?;
            let twist = C64::cis(-2.0 * std::f64::consts::PI * p.theta.value(i, j));
            relation = relation.max(coefficient_gap(&ui.star(&uj)?, &uj.star(&ui)?.scale(twist))?);
        }
    }
    let window: Vec<LatticePoint> = window_points(2, n).collect();
    let mut gns = 0.0f64;
    for k in &window {
        let uk = TorusElement::basis(p.theta.clone(), k.clone())?;
        for l in &window {
            let ul = TorusElement::basis(p.theta.clone(), l.clone())?;
            let delta = if k == l { 1.0 } else { 0.0 };
            gns = gns.max((uk.gns_inner(&ul)? - delta).norm());
        }
    }

    let checks = vec![
        Check::new("associativity", max_of(rows.iter().map(|r| r.assoc)), Relation::AtMost, 1e-10),
        Check::new("involution", max_of(rows.iter().map(|r| r.involution)), Relation::AtMost, 1e-10),
        Check::new("generator_relation", relation, Relation::AtMost, 1e-12),
        Check::new("gns_orthonormality", gns, Relation::AtMost, 0.0),
        Check::new("trace_symmetry", max_of(rows.iter().map(|r| r.trace)), Relation::AtMost, 1e-12),
    ];
    Ok(Report::new(path, &t, checks))
}

struct CoverRow {
    lift: f64,
    fixed: f64,
    roundtrip: f64,
    support: f64,
    support_relative: f64,
}

fn covering_check(p: &CoveringCheck, seed: u64, path: &Path) -> Result<Report> {
    let map = CoveringMap::new(p.base.clone(), p.cover.clone(), p.k.clone())?;
    let group: Vec<_> = map.group_elements().collect();
    let order = C64::new(map.group_order() as f64, 0.0);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let samples: Vec<[TorusElement; 4]> = (0..p.samples)
        .map(|_| {
            [
                random_element(&p.base, p.radius, &mut rng),
                random_element(&p.base, p.radius, &mut rng),
                random_element(&p.cover, p.radius, &mut rng),
                random_element(&p.cover, p.radius, &mut rng),
            ]
        })
        .collect();
    let rows = samples
        .par_iter()
        .map(|[a, b, x, y]| {
            let lift = map.lift(&a.star(b)?)?.l1_distance(&map.lift(a)?.star(&map.lift(b)?)?)?;
            // Averages are fixed, lifts are fixed, and averaging a lift multiplies it by |G|.
            let avg = map.average(x)?;
            let la = map.lift(a)?;
            let mut fixed = map.average(&la)?.l1_distance(&la.scale(order))?;
            for g in &group {
                fixed = fixed.max(map.act(g, &avg)?.l1_distance(&avg)?);
                fixed = fixed.max(map.act(g, &la)?.l1_distance(&la)?);
            }
            let roundtrip = map.module_compose(&map.module_decompose(x)?)?.l1_distance(x)?;
            // Off-sublattice mass left by the explicit group sum, also relative to ‖x*⋆y‖₁.
            let (_, support) = map.hilbert_inner_with_residual(x, y)?;
            let scale = x.involution().star(y)?.l1_bound().max(1.0);
            Ok(CoverRow { lift, fixed, roundtrip, support, support_relative: support / scale })
        })
        .collect::<Result<Vec<_>>>()?;

    let mut t = Table::new(&[
        "sample",
        "lift_residual",
        "fixed_point_residual",
        "roundtrip_residual",
        "support_residual",
        "support_relative",
    ]);
    for (i, r) in rows.iter().enumerate() {
        t.push(vec![
            i.to_string(),
            num(r.lift),
            num(r.fixed),
            num(r.roundtrip),
            num(r.support),
            num(r.support_relative),
        ]);
    }
    let checks = vec![
        Check::new("congruence", map.congruence_residual(), Relation::AtMost, 1e-14),
        Check::new("lift_multiplicativity", max_of(rows.iter().map(|r| r.lift)), Relation::AtMost, 1e-12),
        Check::new("fixed_point", max_of(rows.iter().map(|r| r.fixed)), Relation::AtMost, 1e-14),
        Check::new("module_roundtrip", max_of(rows.iter().map(|r| r.roundtrip)), Relation::AtMost, 1e-12),
        Check::new("hilbert_support", max_of(rows.iter().map(|r| r.support_relative)), Relation::AtMost, 1e-14),
    ];
    Ok(Report::new(path, &t, checks))
}

fn tower(p: &TowerCheck, seed: u64, path: &Path) -> Result<Report> {
    let maps = p.spec.build()?;
    let base = maps[0].base().clone();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let samples: Vec<TorusElement> = (0..p.samples).map(|_| random_element(&base, p.radius, &mut rng)).collect();

    let mut t = Table::new(&["level", "m", "group_order", "expected", "composite_residual", "pass"]);
    let mut worst = 0.0f64;
    let mut orders_ok = true;
    let mut composite = maps[0].clone();
    for (j, map) in maps.iter().enumerate() {
        if j > 0 {
            composite = composite.compose(map)?;
        }
        let level = j + 1;
        let residual = max_of(
            samples
                .par_iter()
                .map(|a| {
                    let mut stepwise = a.clone();
                    for m in &maps[..=j] {
                        stepwise = m.lift(&stepwise)?;
                    }
                    composite.lift(a)?.l1_distance(&stepwise)
                })
                .collect::<nctorus::Result<Vec<_>>>()?
                .into_iter(),
        );
        let order = composite.group_order();
        let expected = (p.spec.m(level) as u128).pow(2 * p.spec.n_half as u32);
        let ok = order == expected && order == p.spec.group_order(level) && residual <= 1e-12;
        orders_ok &= order == expected;
        worst = worst.max(residual);
        t.push(vec![
            level.to_string(),
            p.spec.m(level).to_string(),
            order.to_string(),
            expected.to_string(),
            num(residual),
            flag(ok),
        ]);
    }
    let checks = vec![
        Check::new("composite_lift", worst, Relation::AtMost, 1e-12),
        Check::new("group_orders", if orders_ok { 0.0 } else { 1.0 }, Relation::AtMost, 0.0),
    ];
    Ok(Report::new(path, &t, checks))
}

fn dense_gap(a: &MoyalMatrix, b: &MoyalMatrix) -> f64 {
    (a.to_dense() - b.to_dense()).iter().map(|c| c.norm()).fold(0.0, f64::max)
}

fn moyal_table(p: &MoyalTable, path: &Path) -> Result<Report> {
    let m = p.size;
    let basis = |a: usize, b: usize| MoyalMatrix::basis(p.theta, m, &[a], &[b]);
    let zero = MoyalMatrix::zero(1, p.theta, m)?;
    let rows = (0..m * m)
        .into_par_iter()
        .map(|ab| {
            let (a, b) = (ab / m, ab % m);
            let fab = basis(a, b)?;
            let mut out = Vec::with_capacity(m * m);
            for c in 0..m {
                for d in 0..m {
                    let expected = if b == c { basis(a, d)? } else { zero.clone() };
                    out.push(("product", [a, b, c, d], dense_gap(&fab.mul(&basis(c, d)?)?, &expected)));
                }
            }
            out.push(("involution", [a, b, b, a], dense_gap(&fab.adjoint(), &basis(b, a)?)));
            if a == b {
                out.push(("idempotent", [a, a, a, a], dense_gap(&fab.mul(&fab)?, &fab)));
            }
            Ok(out)
        })
        .collect::<nctorus::Result<Vec<_>>>()?
        .into_iter()
        .flatten()
        .collect::<Vec<_>>();

    let threshold = |kind: &str| if kind == "product" { 1e-13 } else { 0.0 };
    let mut t = Table::new(&["check", "m", "n", "k", "l", "residual", "pass"]);
    for (kind, [a, b, c, d], r) in &rows {
        t.push(vec![
            kind.to_string(),
            a.to_string(),
            b.to_string(),
            c.to_string(),
            d.to_string(),
            num(*r),
            flag(*r <= threshold(kind)),
        ]);
    }
    let worst = |kind: &str| max_of(rows.iter().filter(|r| r.0 == kind).map(|r| r.2));
    let checks = vec![
        Check::new("product_table", worst("product"), Relation::AtMost, 1e-13),
        Check::new("idempotents", worst("idempotent"), Relation::AtMost, 0.0),
        Check::new("involution", worst("involution"), Relation::AtMost, 0.0),
    ];
    Ok(Report::new(path, &t, checks))
}

fn decay_report(table: &DecayTable, value_name: &str, gate: FitGate, path: &Path) -> Report {
    let ln_name = format!("ln_{value_name}");
    let mut t = Table::new(&["delta_norm", value_name, &ln_name, "m", "fitted_m", "C_fit", "ln_C_fit", "R2"]);
    let (slope, r2) = table.fit.map(|f| (f.slope, f.r2)).unwrap_or((f64::NAN, f64::NAN));
    for row in &table.rows {
        for &(m, ln_c) in &table.constants {
            t.push(vec![
                num(row.delta_norm),
                num(row.ln_value.exp()),
                num(row.ln_value),
                m.to_string(),
                num(slope),
                num(ln_c.exp()),
                num(ln_c),
                num(r2),
            ]);
        }
    }
    let mut checks = Vec::new();
    if let Some(s) = gate.max_slope {
        checks.push(Check::new("fitted_slope", slope, Relation::AtMost, s));
    }
    if let Some(r) = gate.min_r2 {
        checks.push(Check::new("r_squared", r2, Relation::AtLeast, r));
    }
    let mut report = Report::new(path, &t, checks);
    report.notes.push(format!("fit of ln {value_name} on ln(1+|Δ|): slope {slope:.6e}, R² {r2:.6}"));
    for &(m, ln_c) in &table.constants {
        report.notes.push(format!("m = {m}: ln C_m = {ln_c:.6e}"));
    }
    report
}

fn decay_translate(p: &DecayTranslate, path: &Path) -> Result<Report> {
    let rows: Vec<DecayRow> = p
        .deltas
        .par_iter()
        .map(|d| Ok(nctorus::decay_translate(&p.a, &p.b, std::slice::from_ref(d), &[])?.rows.remove(0)))
        .collect::<Result<_>>()?;
    let table = DecayTable::from_rows(rows, &p.m_list)?;
    Ok(decay_report(&table, "l2_norm", p.gate, path))
}

fn lattice_decay(p: &LatticeDecay, path: &Path) -> Result<Report> {
    let rows: Vec<DecayRow> = p
        .deltas
        .par_iter()
        .map(|d| Ok(nctorus::lattice_sum_decay(&p.a, std::slice::from_ref(d), &p.tower, p.level, &[])?.rows.remove(0)))
        .collect::<Result<_>>()?;
    let table = DecayTable::from_rows(rows, &p.m_list)?;
    Ok(decay_report(&table, "l1_bound", p.gate, path))
}

fn square_condition(p: &SquareCondition, path: &Path) -> Result<Report> {
    let levels: Vec<usize> = (0..=p.tower.factors.len()).collect();
    let rows = levels
        .par_iter()
        .map(|&j| Ok(nctorus::square_condition(&p.candidate, p.z.as_ref(), &p.tower, j..=j, p.tail_tol)?.remove(0)))
        .collect::<Result<Vec<_>>>()?;
    let mut t = Table::new(&["level", "m", "value", "tail", "bound", "below_eps"]);
    let mut ratio = 0.0f64;
    for (i, r) in rows.iter().enumerate() {
        if i > 0 {
            ratio = ratio.max(r.bound / rows[i - 1].bound);
        }
        t.push(vec![
            r.level.to_string(),
            r.m.to_string(),
            num(r.value),
            num(r.tail),
            num(r.bound),
            (r.bound < p.eps).to_string(),
        ]);
    }
    let last = rows.last().map(|r| r.bound).unwrap_or(f64::NAN);
    let mut checks = vec![Check::new("final_bound", last, Relation::Below, p.eps)];
    if rows.len() > 1 {
        checks.insert(0, Check::new("decrease_ratio", ratio, Relation::Below, 1.0));
    }
    Ok(Report::new(path, &t, checks))
}
