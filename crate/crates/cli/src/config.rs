//! Experiment configuration files.
//!
//! A config is a JSON object `{kind, parameters, seed, output_path}`. The
//! parameters are decoded into a typed struct per kind and validated before
//! anything is computed.

use std::sync::Arc;

use nalgebra::DMatrix;
use nctorus::periodize::RankOneCandidate;
use nctorus::poly::Poly;
use nctorus::{LatticePoint, SchwartzGaussian, SkewMatrix, ThetaEntry, TorusElement, TowerSpec};
use num_complex::Complex64 as C64;
use serde::Deserialize;

use crate::error::{CliError, Result};

const MAX_RADIUS: u64 = 12;
const MAX_SAMPLES: usize = 1_000_000;
const MAX_MOYAL_SIZE: usize = 64;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Kind {
    StarCheck,
    CoveringCheck,
    Tower,
    MoyalTable,
    DecayTranslate,
    LatticeDecay,
    SquareCondition,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub kind: Kind,
    #[serde(default)]
    pub parameters: serde_json::Value,
    #[serde(default)]
    pub seed: u64,
    pub output_path: String,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    /// Decodes and validates the kind-specific parameters.
    pub fn experiment(&self) -> Result<Experiment> {
        let params = if self.parameters.is_null() { serde_json::json!({}) } else { self.parameters.clone() };
        let exp = match self.kind {
            Kind::StarCheck => Experiment::StarCheck(StarCheck::from_raw(serde_json::from_value(params)?)?),
            Kind::CoveringCheck => {
                Experiment::CoveringCheck(CoveringCheck::from_raw(serde_json::from_value(params)?)?)
            }
            Kind::Tower => Experiment::Tower(TowerCheck::from_raw(serde_json::from_value(params)?)?),
            Kind::MoyalTable => Experiment::MoyalTable(MoyalTable::from_raw(serde_json::from_value(params)?)?),
            Kind::DecayTranslate => {
                Experiment::DecayTranslate(DecayTranslate::from_raw(serde_json::from_value(params)?)?)
            }
            Kind::LatticeDecay => Experiment::LatticeDecay(LatticeDecay::from_raw(serde_json::from_value(params)?)?),
            Kind::SquareCondition => {
                Experiment::SquareCondition(SquareCondition::from_raw(serde_json::from_value(params)?)?)
            }
        };
        Ok(exp)
    }
}

#[derive(Clone, Debug)]
pub enum Experiment {
    StarCheck(StarCheck),
    CoveringCheck(CoveringCheck),
    Tower(TowerCheck),
    MoyalTable(MoyalTable),
    DecayTranslate(DecayTranslate),
    LatticeDecay(LatticeDecay),
    SquareCondition(SquareCondition),
}

fn config_err(msg: impl Into<String>) -> CliError {
    CliError::Config(msg.into())
}

fn skew(rows: Vec<Vec<ThetaEntry>>) -> Result<Arc<SkewMatrix>> {
    Ok(Arc::new(SkewMatrix::from_rows(rows)?))
}

fn check_radius(radius: u64) -> Result<()> {
    if radius > MAX_RADIUS {
        return Err(config_err(format!("radius {radius} exceeds {MAX_RADIUS}")));
    }
    Ok(())
}

fn check_samples(samples: usize) -> Result<()> {
    if samples == 0 || samples > MAX_SAMPLES {
        return Err(config_err(format!("samples must lie in 1..={MAX_SAMPLES}, got {samples}")));
    }
    Ok(())
}

fn check_positive(name: &str, x: f64) -> Result<()> {
    if !(x.is_finite() && x > 0.0) {
        return Err(config_err(format!("{name} must be positive and finite, got {x}")));
    }
    Ok(())
}

fn default_samples() -> usize {
    100
}

fn default_radius() -> u64 {
    3
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawStarCheck {
    theta: Vec<Vec<ThetaEntry>>,
    #[serde(default = "default_radius")]
    radius: u64,
    #[serde(default = "default_samples")]
    samples: usize,
}

/// Random triples in `C(𝕋ⁿ_Θ)` checked against the algebra axioms.
#[derive(Clone, Debug)]
pub struct StarCheck {
    pub theta: Arc<SkewMatrix>,
    pub radius: u64,
    pub samples: usize,
}

impl StarCheck {
    fn from_raw(raw: RawStarCheck) -> Result<Self> {
        check_radius(raw.radius)?;
        check_samples(raw.samples)?;
        Ok(StarCheck { theta: skew(raw.theta)?, radius: raw.radius, samples: raw.samples })
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawCoveringCheck {
    base: Vec<Vec<ThetaEntry>>,
    cover: Vec<Vec<ThetaEntry>>,
    k: Vec<u64>,
    #[serde(default = "default_radius")]
    radius: u64,
    #[serde(default = "default_samples")]
    samples: usize,
}

#[derive(Clone, Debug)]
pub struct CoveringCheck {
    pub base: Arc<SkewMatrix>,
    pub cover: Arc<SkewMatrix>,
    pub k: Vec<u64>,
    pub radius: u64,
    pub samples: usize,
}

impl CoveringCheck {
    fn from_raw(raw: RawCoveringCheck) -> Result<Self> {
        check_radius(raw.radius)?;
        check_samples(raw.samples)?;
        let base = skew(raw.base)?;
        let cover = skew(raw.cover)?;
        // Validates the congruence and multiplicities up front.
        nctorus::CoveringMap::new(base.clone(), cover.clone(), raw.k.clone())?;
        Ok(CoveringCheck { base, cover, k: raw.k, radius: raw.radius, samples: raw.samples })
    }
}

fn default_tower_samples() -> usize {
    20
}

fn default_tower_radius() -> u64 {
    2
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawTower {
    theta: ThetaEntry,
    factors: Vec<u64>,
    #[serde(rename = "N")]
    n_half: usize,
    #[serde(default = "default_tower_radius")]
    radius: u64,
    #[serde(default = "default_tower_samples")]
    samples: usize,
}

#[derive(Clone, Debug)]
pub struct TowerCheck {
    pub spec: TowerSpec,
    pub radius: u64,
    pub samples: usize,
}

impl TowerCheck {
    fn from_raw(raw: RawTower) -> Result<Self> {
        check_radius(raw.radius)?;
        check_samples(raw.samples)?;
        let spec = TowerSpec { theta: raw.theta, factors: raw.factors, n_half: raw.n_half };
        if spec.factors.is_empty() {
            return Err(config_err("tower needs at least one factor"));
        }
        spec.build()?;
        Ok(TowerCheck { spec, radius: raw.radius, samples: raw.samples })
    }
}

fn default_moyal_theta() -> f64 {
    2.0
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawMoyalTable {
    #[serde(rename = "M")]
    size: usize,
    #[serde(default = "default_moyal_theta")]
    theta: f64,
}

/// The product table `f_mn · f_kl` for `N = 1` at truncation `M`.
#[derive(Clone, Debug)]
pub struct MoyalTable {
    pub size: usize,
    pub theta: f64,
}

impl MoyalTable {
    fn from_raw(raw: RawMoyalTable) -> Result<Self> {
        if raw.size == 0 || raw.size > MAX_MOYAL_SIZE {
            return Err(config_err(format!("M must lie in 1..={MAX_MOYAL_SIZE}, got {}", raw.size)));
        }
        check_positive("theta", raw.theta)?;
        Ok(MoyalTable { size: raw.size, theta: raw.theta })
    }
}

/// `[re, im]`.
pub type ComplexPair = [f64; 2];

fn complex(p: ComplexPair) -> C64 {
    C64::new(p[0], p[1])
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PolyTerm {
    pub alpha: Vec<u32>,
    pub c: ComplexPair,
}

/// Either `{"standard": d}` for `e^{-π|x|²}` on `ℝᵈ`, or the full form
/// `amplitude · P(x−μ) · e^{−(x−μ)ᵀA(x−μ)} · e^{2πiω·x}`.
#[derive(Clone, Debug, Deserialize)]
#[serde(untagged)]
pub enum GaussianSpec {
    Standard {
        standard: usize,
    },
    Full {
        quad: Vec<Vec<f64>>,
        center: Vec<f64>,
        #[serde(default)]
        modulation: Option<Vec<f64>>,
        #[serde(default)]
        amplitude: Option<ComplexPair>,
        #[serde(default)]
        poly: Option<Vec<PolyTerm>>,
    },
}

impl GaussianSpec {
    pub fn build(&self) -> Result<SchwartzGaussian> {
        match self {
            GaussianSpec::Standard { standard } => {
                if *standard == 0 {
                    return Err(config_err("standard Gaussian needs d ≥ 1"));
                }
                Ok(SchwartzGaussian::standard(*standard))
            }
            GaussianSpec::Full { quad, center, modulation, amplitude, poly } => {
                let d = center.len();
                if d == 0 || quad.len() != d || quad.iter().any(|r| r.len() != d) {
                    return Err(nctorus::Error::Dimension(format!("quad must be {d}×{d}")).into());
                }
                let a = DMatrix::from_fn(d, d, |i, j| quad[i][j]);
                let omega = modulation.clone().unwrap_or_else(|| vec![0.0; d]);
                if omega.len() != d {
                    return Err(nctorus::Error::Dimension("modulation length".into()).into());
                }
                let p = match poly {
                    Some(terms) => {
                        if terms.iter().any(|t| t.alpha.len() != d) {
                            return Err(nctorus::Error::Dimension("multi-index length".into()).into());
                        }
                        Poly::from_terms(d, terms.iter().map(|t| (t.alpha.clone(), complex(t.c))))
                    }
                    None => Poly::constant(d, C64::new(1.0, 0.0)),
                };
                let amp = amplitude.map(complex).unwrap_or(C64::new(1.0, 0.0));
                Ok(SchwartzGaussian::new(a, center.clone(), omega, p, amp)?)
            }
        }
    }
}

fn default_spacing() -> Spacing {
    Spacing::Linear
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Spacing {
    Linear,
    Log,
}

/// Translations, listed or as `count` points on a ray `t · direction/‖direction‖`.
#[derive(Clone, Debug, Deserialize)]
#[serde(untagged)]
pub enum DeltaGrid {
    List(Vec<Vec<f64>>),
    Ray {
        from: f64,
        to: f64,
        count: usize,
        direction: Vec<f64>,
        #[serde(default = "default_spacing")]
        spacing: Spacing,
    },
}

impl DeltaGrid {
    pub fn points(&self, dim: usize) -> Result<Vec<Vec<f64>>> {
        let pts = match self {
            DeltaGrid::List(v) => v.clone(),
            DeltaGrid::Ray { from, to, count, direction, spacing } => {
                let norm = direction.iter().map(|x| x * x).sum::<f64>().sqrt();
                if !(norm > 0.0) || *count < 2 || !(from.is_finite() && to.is_finite() && from < to) {
                    return Err(config_err("ray needs a nonzero direction, count ≥ 2 and from < to"));
                }
                if *spacing == Spacing::Log && *from <= 0.0 {
                    return Err(config_err("log spacing needs from > 0"));
                }
                (0..*count)
                    .map(|i| {
                        let s = i as f64 / (*count - 1) as f64;
                        let t = match spacing {
                            Spacing::Linear => from + s * (to - from),
                            Spacing::Log => (from.ln() + s * (to.ln() - from.ln())).exp(),
                        };
                        direction.iter().map(|x| t * x / norm).collect()
                    })
                    .collect()
            }
        };
        if pts.is_empty() {
            return Err(config_err("no translations given"));
        }
        if let Some(p) = pts.iter().find(|p| p.len() != dim) {
            return Err(nctorus::Error::Dimension(format!("translation of length {} on ℝ^{dim}", p.len())).into());
        }
        if pts.iter().flatten().any(|x| !x.is_finite()) {
            return Err(config_err("translations must be finite"));
        }
        Ok(pts)
    }
}

fn default_m_list() -> Vec<u32> {
    vec![4]
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawDecayTranslate {
    a: GaussianSpec,
    b: GaussianSpec,
    deltas: DeltaGrid,
    #[serde(default = "default_m_list")]
    m_list: Vec<u32>,
    #[serde(default)]
    max_slope: Option<f64>,
    #[serde(default)]
    min_r2: Option<f64>,
}

/// Optional thresholds on the decay fit; without them the experiment only reports.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct FitGate {
    pub max_slope: Option<f64>,
    pub min_r2: Option<f64>,
}

/// `‖a_Δ ⋆₂ b‖₂` over a grid of translations.
#[derive(Clone, Debug)]
pub struct DecayTranslate {
    pub a: SchwartzGaussian,
    pub b: SchwartzGaussian,
    pub deltas: Vec<Vec<f64>>,
    pub m_list: Vec<u32>,
    pub gate: FitGate,
}

fn check_even(dim: usize) -> Result<()> {
    if !dim.is_multiple_of(2) {
        return Err(nctorus::Error::Dimension(format!("Moyal functions live on ℝ^2N, got ℝ^{dim}")).into());
    }
    Ok(())
}

impl DecayTranslate {
    fn from_raw(raw: RawDecayTranslate) -> Result<Self> {
        let a = raw.a.build()?;
        let b = raw.b.build()?;
        if a.dim() != b.dim() {
            return Err(nctorus::Error::Dimension("a and b must share a dimension".into()).into());
        }
        check_even(a.dim())?;
        let deltas = raw.deltas.points(a.dim())?;
        Ok(DecayTranslate { a, b, deltas, m_list: raw.m_list, gate: FitGate { max_slope: raw.max_slope, min_r2: raw.min_r2 } })
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawLatticeDecay {
    a: GaussianSpec,
    deltas: DeltaGrid,
    tower: TowerSpec,
    level: usize,
    #[serde(default = "default_m_list")]
    m_list: Vec<u32>,
    #[serde(default)]
    max_slope: Option<f64>,
    #[serde(default)]
    min_r2: Option<f64>,
}

/// The ℓ¹ coefficient bound of `periodize(a_Δ ⋆₂ a)` at one tower level.
#[derive(Clone, Debug)]
pub struct LatticeDecay {
    pub a: SchwartzGaussian,
    pub deltas: Vec<Vec<f64>>,
    pub tower: TowerSpec,
    pub level: usize,
    pub m_list: Vec<u32>,
    pub gate: FitGate,
}

impl LatticeDecay {
    fn from_raw(raw: RawLatticeDecay) -> Result<Self> {
        let a = raw.a.build()?;
        check_even(a.dim())?;
        if a.dim() != 2 * raw.tower.n_half {
            return Err(nctorus::Error::Dimension("a must live on the tower's ℝ^2N".into()).into());
        }
        raw.tower.build()?;
        if raw.level > raw.tower.factors.len() {
            return Err(config_err(format!("level {} beyond a tower of height {}", raw.level, raw.tower.factors.len())));
        }
        let deltas = raw.deltas.points(a.dim())?;
        Ok(LatticeDecay { a, deltas, tower: raw.tower, level: raw.level, m_list: raw.m_list, gate: FitGate { max_slope: raw.max_slope, min_r2: raw.min_r2 } })
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case", deny_unknown_fields)]
pub enum CandidateSpec {
    F00 {
        #[serde(rename = "N")]
        n_half: usize,
    },
    RankOne {
        vectors: Vec<Vec<ComplexPair>>,
        scale: f64,
    },
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ZTerm {
    pub k: Vec<i64>,
    pub c: ComplexPair,
}

fn default_eps() -> f64 {
    1e-3
}

fn default_tail_tol() -> f64 {
    1e-14
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSquareCondition {
    candidate: CandidateSpec,
    #[serde(default)]
    z: Option<Vec<ZTerm>>,
    tower: TowerSpec,
    #[serde(default = "default_eps")]
    eps: f64,
    #[serde(default = "default_tail_tol")]
    tail_tol: f64,
}

/// `‖b_j² − c_j‖` bounds along a tower for a rank-one candidate.
#[derive(Clone, Debug)]
pub struct SquareCondition {
    pub candidate: RankOneCandidate,
    pub z: Option<TorusElement>,
    pub tower: TowerSpec,
    pub eps: f64,
    pub tail_tol: f64,
}

impl SquareCondition {
    fn from_raw(raw: RawSquareCondition) -> Result<Self> {
        raw.tower.build()?;
        check_positive("eps", raw.eps)?;
        if !(raw.tail_tol > 0.0 && raw.tail_tol < 1.0) {
            return Err(config_err(format!("tail_tol must lie in (0, 1), got {}", raw.tail_tol)));
        }
        let candidate = match raw.candidate {
            CandidateSpec::F00 { n_half } => {
                if n_half == 0 {
                    return Err(config_err("candidate needs N ≥ 1"));
                }
                RankOneCandidate::f00(n_half)
            }
            CandidateSpec::RankOne { vectors, scale } => RankOneCandidate::new(
                vectors.into_iter().map(|v| v.into_iter().map(complex).collect()).collect(),
                scale,
            )?,
        };
        if candidate.n_half() != raw.tower.n_half {
            return Err(nctorus::Error::Dimension(format!(
                "candidate has N = {} but the tower N = {}",
                candidate.n_half(),
                raw.tower.n_half
            ))
            .into());
        }
        let z = match raw.z {
            Some(terms) => {
                let theta = Arc::new(SkewMatrix::symplectic(raw.tower.n_half, raw.tower.theta));
                let terms = terms.into_iter().map(|t| (LatticePoint::new(&t.k), complex(t.c))).collect::<Vec<_>>();
                Some(TorusElement::from_terms(theta, terms)?)
            }
            None => None,
        };
        Ok(SquareCondition { candidate, z, tower: raw.tower, eps: raw.eps, tail_tol: raw.tail_tol })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str) -> Result<Experiment> {
        ExperimentConfig::from_json(text)?.experiment()
    }

    #[test]
    fn unknown_kind_is_rejected_at_parse_time() {
        let err = ExperimentConfig::from_json(r#"{"kind":"nope","output_path":"x.csv"}"#).unwrap_err();
        assert_eq!(err.kind(), "ConfigError");
    }

    #[test]
    fn non_skew_theta_is_a_dimension_error() {
        let err = parse(
            r#"{"kind":"star-check","output_path":"x.csv","parameters":{"theta":[["0","1/3"],["1/3","0"]]}}"#,
        )
        .unwrap_err();
        assert_eq!(err.kind(), "DimensionError");
    }

    #[test]
    fn congruence_is_checked_before_dispatch() {
        let err = parse(
            r#"{"kind":"covering-check","output_path":"x.csv","parameters":
                {"base":[["0","1/5"],["-1/5","0"]],"cover":[["0","1/21"],["-1/21","0"]],"k":[2,2]}}"#,
        )
        .unwrap_err();
        assert_eq!(err.kind(), "ConfigError");
    }

    #[test]
    fn numeric_preconditions() {
        let bad_m = parse(r#"{"kind":"moyal-table","output_path":"x.csv","parameters":{"M":0}}"#).unwrap_err();
        assert_eq!(bad_m.kind(), "ConfigError");
        let bad_level = parse(
            r#"{"kind":"lattice-decay","output_path":"x.csv","parameters":{"a":{"standard":2},
                "deltas":[[1,0]],"tower":{"theta":"2","factors":[2],"N":1},"level":3}}"#,
        )
        .unwrap_err();
        assert_eq!(bad_level.kind(), "ConfigError");
        let bad_dim = parse(
            r#"{"kind":"decay-translate","output_path":"x.csv","parameters":{"a":{"standard":2},
                "b":{"standard":2},"deltas":[[1,0,0]]}}"#,
        )
        .unwrap_err();
        assert_eq!(bad_dim.kind(), "DimensionError");
    }

    #[test]
    fn rays_and_gaussians() {
        let exp = parse(
            r#"{"kind":"decay-translate","output_path":"x.csv","parameters":{
                "a":{"quad":[[3.14159,0],[0,3.14159]],"center":[0,0],"amplitude":[1,0]},
                "b":{"standard":2},
                "deltas":{"from":1,"to":4,"count":4,"direction":[3,4]}}}"#,
        )
        .unwrap();
        let Experiment::DecayTranslate(d) = exp else { panic!("wrong kind") };
        assert_eq!(d.deltas.len(), 4);
        assert!((d.deltas[3][0] - 2.4).abs() < 1e-15 && (d.deltas[3][1] - 3.2).abs() < 1e-15);
        assert_eq!(d.m_list, vec![4]);
    }
}
