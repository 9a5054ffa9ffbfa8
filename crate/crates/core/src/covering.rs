//! Finite-fold coverings of noncommutative tori, `u_j ↦ v_j^{k_j}`.
//!
//! The covering group `G = ℤ_{k_1} × … × ℤ_{k_n}` acts on the cover by the
//! characters `e^{2πi Σ p_j l_j / k_j}`; its fixed points are the image of the
//! base, and `⟨a, b⟩ = Σ_g g(a*b)` makes the cover a Hilbert module over it.

use std::collections::BTreeMap;
use std::sync::Arc;

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::{LatticePoint, SkewMatrix, ThetaEntry};
use crate::torus::{GnsVector, TorusElement};

/// Off-sublattice mass tolerated in a Hilbert-module product, relative to `l1(a*b)`.
const SUBLATTICE_TOL: f64 = 1e-12;

/// The unit `φ(p)` with `u_1^{p_1} ⋆ … ⋆ u_n^{p_n} = φ(p) U_p`.
///
/// Built by multiplying monomials one generator at a time, with
/// `U_q ⋆ U_e = e^{-πi q·Θe} U_{q+e}` at each step.
pub fn ordered_phase(p: &LatticePoint, theta: &SkewMatrix) -> Result<C64> {
    let n = theta.n();
    if p.dim() != n {
        return Err(Error::Dimension(format!("point of dimension {} for Θ of size {n}", p.dim())));
    }
    let mut q = vec![0i64; n];
    let mut phase = C64::new(1.0, 0.0);
    for j in 0..n {
        let step = p.coords()[j].signum();
        let mut e = vec![0i64; n];
        e[j] = step;
        for _ in 0..p.coords()[j].unsigned_abs() {
            phase *= theta.row(&q).phase(&e);
            q[j] += step;
        }
    }
    Ok(phase)
}

/// An element `(p̄_1, …, p̄_n)` of `ℤ_{k_1} × … × ℤ_{k_n}`.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct CoveringGroupElement {
    residues: Vec<u64>,
    moduli: Vec<u64>,
}

impl CoveringGroupElement {
    pub fn new(residues: &[i64], moduli: &[u64]) -> Result<Self> {
        if residues.len() != moduli.len() {
            return Err(Error::Dimension("residues and moduli differ in length".into()));
        }
        if moduli.contains(&0) {
            return Err(Error::Domain("group moduli must be positive".into()));
        }
        let residues = residues.iter().zip(moduli).map(|(&r, &k)| r.rem_euclid(k as i64) as u64).collect();
        Ok(CoveringGroupElement { residues, moduli: moduli.to_vec() })
    }

    pub fn identity(moduli: &[u64]) -> Self {
        CoveringGroupElement { residues: vec![0; moduli.len()], moduli: moduli.to_vec() }
    }

    pub fn residues(&self) -> &[u64] {
        &self.residues
    }

    pub fn moduli(&self) -> &[u64] {
        &self.moduli
    }

    pub fn is_identity(&self) -> bool {
        self.residues.iter().all(|&r| r == 0)
    }

    pub fn compose(&self, other: &Self) -> Result<Self> {
        if self.moduli != other.moduli {
            return Err(Error::Dimension("group elements of different groups".into()));
        }
        let r: Vec<i64> = self.residues.iter().zip(&other.residues).map(|(a, b)| (a + b) as i64).collect();
        Self::new(&r, &self.moduli)
    }

    pub fn inverse(&self) -> Self {
        let r: Vec<i64> = self.residues.iter().map(|&a| -(a as i64)).collect();
        Self::new(&r, &self.moduli).expect("same moduli")
    }
}

/// The covering `C(𝕋ⁿ_Θ) → C(𝕋ⁿ_Θ̃)` determined by `u_j ↦ v_j^{k_j}`.
#[derive(Clone, Debug, PartialEq)]
pub struct CoveringMap {
    base: Arc<SkewMatrix>,
    cover: Arc<SkewMatrix>,
    mult: Vec<u64>,
}

impl CoveringMap {
    /// Validates `θ_rs ≡ θ̃_rs k_r k_s (mod 1)`: exactly for rational entries, to 1e-12 otherwise.
    pub fn new(base: Arc<SkewMatrix>, cover: Arc<SkewMatrix>, mult: Vec<u64>) -> Result<Self> {
        let n = base.n();
        if cover.n() != n || mult.len() != n {
            return Err(Error::Dimension(format!(
                "base {n}, cover {}, multiplicities {}",
                cover.n(),
                mult.len()
            )));
        }
        if mult.contains(&0) {
            return Err(Error::Config("covering multiplicities must be at least 1".into()));
        }
        let map = CoveringMap { base, cover, mult };
        let defect = map.congruence_residual();
        let exact = map.base.is_exact() && map.cover.is_exact();
        if (exact && defect > 0.0) || defect > 1e-12 {
            return Err(Error::Config(format!("congruence θ ≡ θ̃·k_r·k_s (mod 1) fails by {defect:e}")));
        }
        Ok(map)
    }

    /// Largest distance of `θ_rs − θ̃_rs k_r k_s` from an integer.
    pub fn congruence_residual(&self) -> f64 {
        let n = self.base.n();
        let mut worst: f64 = 0.0;
        for r in 0..n {
            for s in r + 1..n {
                let f = (self.mult[r] * self.mult[s]) as i64;
                worst = worst.max(self.base.entry(r, s).congruence_defect(&self.cover.entry(r, s), f));
            }
        }
        worst
    }

    pub fn n(&self) -> usize {
        self.mult.len()
    }

    pub fn base(&self) -> &Arc<SkewMatrix> {
        &self.base
    }

    pub fn cover(&self) -> &Arc<SkewMatrix> {
        &self.cover
    }

    pub fn mult(&self) -> &[u64] {
        &self.mult
    }

    /// `|G| = Π k_j`.
    pub fn group_order(&self) -> u128 {
        self.mult.iter().map(|&k| k as u128).product()
    }

    pub fn group_elements(&self) -> impl Iterator<Item = CoveringGroupElement> + '_ {
        let total = self.group_order();
        (0..total).map(move |mut idx| {
            let mut r = vec![0i64; self.n()];
            for j in (0..self.n()).rev() {
                let k = self.mult[j] as u128;
                r[j] = (idx % k) as i64;
                idx /= k;
            }
            CoveringGroupElement::new(&r, &self.mult).expect("valid moduli")
        })
    }

    fn check_base(&self, a: &TorusElement) -> Result<()> {
        if **a.theta() == *self.base {
            Ok(())
        } else {
            Err(Error::AlgebraMismatch("element is not over the base algebra".into()))
        }
    }

    fn check_cover(&self, a: &TorusElement) -> Result<()> {
        if **a.theta() == *self.cover {
            Ok(())
        } else {
            Err(Error::AlgebraMismatch("element is not over the covering algebra".into()))
        }
    }

    fn on_sublattice(&self, l: &LatticePoint) -> bool {
        l.coords().iter().zip(&self.mult).all(|(&c, &k)| c.rem_euclid(k as i64) == 0)
    }

    fn shrink(&self, l: &LatticePoint) -> LatticePoint {
        LatticePoint::from(l.coords().iter().zip(&self.mult).map(|(&c, &k)| c.div_euclid(k as i64)).collect::<Vec<_>>())
    }

    /// Coefficient picked up by `U_p ↦ φ_base(p)⁻¹ φ_cover(Dp) V_{Dp}`.
    fn lift_phase(&self, p: &LatticePoint) -> Result<C64> {
        Ok(ordered_phase(p, &self.base)?.conj() * ordered_phase(&p.dilate(&self.mult), &self.cover)?)
    }

    /// Image of `a` under the homomorphism `u_j ↦ v_j^{k_j}`.
    pub fn lift(&self, a: &TorusElement) -> Result<TorusElement> {
        self.check_base(a)?;
        let mut terms = Vec::with_capacity(a.len());
        for (p, c) in a.coeffs() {
            terms.push((p.dilate(&self.mult), c * self.lift_phase(p)?));
        }
        TorusElement::from_terms(self.cover.clone(), terms)
    }

    /// Character of `g` at the cover index `l`, `e^{2πi Σ p_j l_j / k_j}`, reduced exactly.
    fn character(&self, g: &CoveringGroupElement, l: &LatticePoint) -> C64 {
        let lcm = self.mult.iter().fold(1u128, |acc, &k| acc / gcd_u128(acc, k as u128) * k as u128);
        let mut t: i128 = 0;
        for ((&p, &k), &c) in g.residues.iter().zip(&self.mult).zip(l.coords()) {
            t += (p as i128) * (c as i128) * (lcm / k as u128) as i128;
        }
        let t = t.rem_euclid(lcm as i128);
        C64::cis(2.0 * std::f64::consts::PI * t as f64 / lcm as f64)
    }

    /// The covering transformation `g` applied to a cover element.
    pub fn act(&self, g: &CoveringGroupElement, a: &TorusElement) -> Result<TorusElement> {
        if g.residues.len() != self.n() || g.moduli != self.mult {
            return Err(Error::Dimension("group element does not belong to this covering".into()));
        }
        self.check_cover(a)?;
        Ok(a.map_coeffs(|l, c| c * self.character(g, l)))
    }

    /// `Σ_{g∈G} g·a` by explicit summation over the group.
    pub fn group_sum(&self, a: &TorusElement) -> Result<TorusElement> {
        self.check_cover(a)?;
        let mut acc: BTreeMap<LatticePoint, C64> = BTreeMap::new();
        for g in self.group_elements() {
            for (l, c) in a.coeffs() {
                *acc.entry(l.clone()).or_default() += c * self.character(&g, l);
            }
        }
        TorusElement::from_terms(self.cover.clone(), acc)
    }

    /// `Σ_{g∈G} g·a`, which is `|G|` times the restriction of `a` to `Dℤⁿ`.
    pub fn average(&self, a: &TorusElement) -> Result<TorusElement> {
        self.check_cover(a)?;
        let order = self.group_order() as f64;
        let terms = a.coeffs().iter().filter(|(l, _)| self.on_sublattice(l)).map(|(l, c)| (l.clone(), c * order));
        TorusElement::from_terms(self.cover.clone(), terms)
    }

    /// `⟨a, b⟩ = Σ_g g(a*b)` as a base element, with the off-sublattice residual.
    pub fn hilbert_inner_with_residual(&self, a: &TorusElement, b: &TorusElement) -> Result<(TorusElement, f64)> {
        self.check_cover(a)?;
        self.check_cover(b)?;
        let prod = a.involution().star(b)?;
        let summed = self.group_sum(&prod)?;
        let mut residual = 0.0;
        let mut terms = Vec::new();
        for (l, c) in summed.coeffs() {
            if self.on_sublattice(l) {
                let q = self.shrink(l);
                terms.push((q.clone(), c * self.lift_phase(&q)?.conj()));
            } else {
                residual += c.norm();
            }
        }
        let scale = prod.l1_bound().max(1.0);
        if residual > SUBLATTICE_TOL * scale {
            return Err(Error::Internal(format!("module product leaves the sublattice by {residual:e}")));
        }
        Ok((TorusElement::from_terms(self.base.clone(), terms)?, residual))
    }

    pub fn hilbert_inner(&self, a: &TorusElement, b: &TorusElement) -> Result<TorusElement> {
        Ok(self.hilbert_inner_with_residual(a, b)?.0)
    }

    /// `v_1^{r_1} ⋆ … ⋆ v_n^{r_n}` in the cover.
    pub fn monomial(&self, r: &LatticePoint) -> Result<TorusElement> {
        let phase = ordered_phase(r, &self.cover)?;
        TorusElement::from_terms(self.cover.clone(), [(r.clone(), phase)])
    }

    /// Components `b_r` with `a = Σ_r v^r ⋆ lift(b_r)`, `r ∈ Π[0, k_j)`.
    pub fn module_decompose(&self, a: &TorusElement) -> Result<BTreeMap<CoveringGroupElement, TorusElement>> {
        self.check_cover(a)?;
        let mut parts: BTreeMap<CoveringGroupElement, Vec<(LatticePoint, C64)>> = BTreeMap::new();
        for (l, c) in a.coeffs() {
            let q = self.shrink(l);
            let r = l - &q.dilate(&self.mult);
            // v^r ⋆ lift(U_q) = φ_c(r) φ_b(q)⁻¹ φ_c(Dq) e^{-πi r·Θ̃Dq} V_l
            let dq = q.dilate(&self.mult);
            let chi = ordered_phase(&r, &self.cover)? * self.lift_phase(&q)? * self.cover.phase(&r, &dq)?;
            let key = CoveringGroupElement::new(r.coords(), &self.mult)?;
            parts.entry(key).or_default().push((q, c / chi));
        }
        parts
            .into_iter()
            .map(|(k, terms)| Ok((k, TorusElement::from_terms(self.base.clone(), terms)?)))
            .collect()
    }

    /// Inverse of [`module_decompose`](Self::module_decompose), using actual products.
    pub fn module_compose(&self, parts: &BTreeMap<CoveringGroupElement, TorusElement>) -> Result<TorusElement> {
        let mut acc = TorusElement::zero(self.cover.clone());
        for (r, b) in parts {
            let rp = LatticePoint::from(r.residues.iter().map(|&x| x as i64).collect::<Vec<_>>());
            acc = acc.add(&self.monomial(&rp)?.star(&self.lift(b)?)?)?;
        }
        Ok(acc)
    }

    /// `(ξ, ⟨a, b⟩ η)` on the base GNS space.
    pub fn induced_inner(&self, a: &TorusElement, xi: &GnsVector, b: &TorusElement, eta: &GnsVector) -> Result<C64> {
        let ab = self.hilbert_inner(a, b)?;
        Ok(xi.inner(&ab.apply(eta)?))
    }

    /// `self` followed by `next`: base of `self` to cover of `next`.
    pub fn compose(&self, next: &CoveringMap) -> Result<CoveringMap> {
        if *self.cover != *next.base {
            return Err(Error::AlgebraMismatch("coverings do not chain".into()));
        }
        let mult = self.mult.iter().zip(&next.mult).map(|(a, b)| a * b).collect();
        CoveringMap::new(self.base.clone(), next.cover.clone(), mult)
    }
}

fn gcd_u128(mut a: u128, mut b: u128) -> u128 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

/// The tower `θ → θ/m_1² → θ/m_2² → …` on `ℝ²ᴺ` with `m_j = p_1 ⋯ p_j`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TowerSpec {
    pub theta: ThetaEntry,
    pub factors: Vec<u64>,
    #[serde(rename = "N")]
    pub n_half: usize,
}

impl TowerSpec {
    fn validate(&self) -> Result<()> {
        if self.n_half == 0 {
            return Err(Error::Config("tower needs N ≥ 1".into()));
        }
        if let Some(p) = self.factors.iter().find(|&&p| p < 2) {
            return Err(Error::Config(format!("tower factor {p} is smaller than 2")));
        }
        Ok(())
    }

    /// `m_j`, with `m_0 = 1`.
    pub fn m(&self, j: usize) -> u64 {
        self.factors[..j].iter().product()
    }

    /// `Θ_j = (θ/m_j²) J`.
    pub fn level_theta(&self, j: usize) -> Result<SkewMatrix> {
        let m = self.m(j) as i64;
        let th = self.theta.mul_ratio(1, m.checked_mul(m).ok_or_else(|| Error::Config("m_j² overflows".into()))?)?;
        Ok(SkewMatrix::symplectic(self.n_half, th))
    }

    /// `|G(j|0)| = m_j^{2N}`.
    pub fn group_order(&self, j: usize) -> u128 {
        (self.m(j) as u128).pow(2 * self.n_half as u32)
    }

    /// Consecutive coverings, level `j−1 → j` with multiplicity `p_j` in every direction.
    pub fn build(&self) -> Result<Vec<CoveringMap>> {
        self.validate()?;
        let levels =
            (0..=self.factors.len()).map(|j| self.level_theta(j).map(Arc::new)).collect::<Result<Vec<_>>>()?;
        self.factors
            .iter()
            .enumerate()
            .map(|(i, &p)| CoveringMap::new(levels[i].clone(), levels[i + 1].clone(), vec![p; 2 * self.n_half]))
            .collect()
    }
}

/// Builds the tower described by `spec`.
pub fn build_tower(spec: &TowerSpec) -> Result<Vec<CoveringMap>> {
    spec.build()
}
