//! From the Moyal plane to the covering tower: periodization onto the level
//! algebras `C(𝕋²ᴺ_{θ/m_j²})`, the partial sums of rank-one special elements,
//! and the translate decay experiments.
//!
//! A level element `Σ c_k e^{2πi (k/m)·x}` is stored as a torus element over
//! `Θ/m²`, which reproduces the plane-wave phases `e^{−πi (k/m)·Θ(l/m)}`.

use std::f64::consts::PI;
use std::sync::Arc;

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;

use crate::covering::TowerSpec;
use crate::error::{Error, Result};
use crate::gaussian::{cutoff_radius, min_eigenvalue, moyal_fourier, ComplexGaussian, SchwartzGaussian};
use crate::lattice::{window_points, LatticePoint, SkewMatrix, ThetaEntry};
use crate::moyal::oscillator_poly;
use crate::poly::Poly;
use crate::quad;
use crate::torus::{f_eps_rank_one, TorusElement};

/// The ambient Moyal matrix `θJ` as a real matrix.
pub fn symplectic_matrix(n_half: usize, theta: f64) -> DMatrix<f64> {
    let d = 2 * n_half;
    DMatrix::from_fn(d, d, |r, c| {
        if c == r + n_half {
            theta
        } else if r == c + n_half {
            -theta
        } else {
            0.0
        }
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct LevelElement {
    level: usize,
    m: u64,
    theta: ThetaEntry,
    element: TorusElement,
    tail: f64,
}

fn level_skew(n_half: usize, theta: ThetaEntry, m: u64) -> Result<SkewMatrix> {
    let m = i64::try_from(m).ok().and_then(|m| m.checked_mul(m)).ok_or_else(|| Error::Config("m_j² overflows".into()))?;
    Ok(SkewMatrix::symplectic(n_half, theta.mul_ratio(1, m)?))
}

impl LevelElement {
    pub fn new(
        level: usize,
        m: u64,
        theta: ThetaEntry,
        n_half: usize,
        terms: impl IntoIterator<Item = (LatticePoint, C64)>,
    ) -> Result<Self> {
        if m == 0 {
            return Err(Error::Config("m_j must be positive".into()));
        }
        let skew = Arc::new(level_skew(n_half, theta, m)?);
        Ok(LevelElement { level, m, theta, element: TorusElement::from_terms(skew, terms)?, tail: 0.0 })
    }

    /// The base-algebra element `z = Σ z_k U_k` seen at level `m` through `k ↦ m k`.
    pub fn embed(z: &TorusElement, level: usize, m: u64, theta: ThetaEntry) -> Result<Self> {
        let n = z.dim();
        if !n.is_multiple_of(2) || **z.theta() != SkewMatrix::symplectic(n / 2, theta) {
            return Err(Error::AlgebraMismatch("z must live in the base algebra θJ".into()));
        }
        let terms = z.coeffs().iter().map(|(k, c)| (k.dilate(&vec![m; n]), *c));
        Self::new(level, m, theta, n / 2, terms)
    }

    pub fn level(&self) -> usize {
        self.level
    }

    pub fn m(&self) -> u64 {
        self.m
    }

    pub fn theta(&self) -> ThetaEntry {
        self.theta
    }

    pub fn n_half(&self) -> usize {
        self.element.dim() / 2
    }

    pub fn element(&self) -> &TorusElement {
        &self.element
    }

    pub fn coeff(&self, k: &LatticePoint) -> C64 {
        self.element.coeff(k)
    }

    /// Certified ℓ¹ norm of the coefficients dropped by truncation.
    pub fn tail(&self) -> f64 {
        self.tail
    }

    pub fn l1_bound(&self) -> f64 {
        self.element.l1_bound()
    }

    pub fn scale(&self, s: C64) -> LevelElement {
        LevelElement { element: self.element.scale(s), tail: self.tail * s.norm(), ..self.clone() }
    }

    fn check_same_level(&self, other: &LevelElement) -> Result<()> {
        if self.level != other.level || self.m != other.m || self.theta != other.theta || self.n_half() != other.n_half() {
            return Err(Error::LevelMismatch(format!(
                "level {} (m={}, θ={}) vs level {} (m={}, θ={})",
                self.level, self.m, self.theta, other.level, other.m, other.theta
            )));
        }
        Ok(())
    }

    pub fn sub(&self, other: &LevelElement) -> Result<LevelElement> {
        self.check_same_level(other)?;
        Ok(LevelElement { element: self.element.sub(&other.element)?, tail: self.tail + other.tail, ..self.clone() })
    }

    /// `Σ c_k e^{2πi (k/m)·x}`.
    pub fn eval(&self, x: &[f64]) -> C64 {
        self.element
            .coeffs()
            .iter()
            .map(|(k, c)| {
                let kx: f64 = k.coords().iter().zip(x).map(|(&a, b)| a as f64 * b).sum();
                c * C64::from_polar(1.0, 2.0 * PI * kx / self.m as f64)
            })
            .sum()
    }
}

/// Twisted product at one level; tails propagate as `t_a(‖b‖₁+t_b) + ‖a‖₁t_b`.
pub fn level_star(a: &LevelElement, b: &LevelElement) -> Result<LevelElement> {
    a.check_same_level(b)?;
    let tail = a.tail * (b.l1_bound() + b.tail) + a.l1_bound() * b.tail;
    Ok(LevelElement { element: a.element.star(&b.element)?, tail, ..a.clone() })
}

/// `|F(u)| ≤ Σ_d w_d |u−c|^d e^{−λ|u−c|²}`.
#[derive(Clone, Debug)]
struct Envelope {
    center: Vec<f64>,
    lambda: f64,
    weights: Vec<f64>,
}

impl Envelope {
    fn of_schwartz(f: &SchwartzGaussian) -> Self {
        let (lambda, weights) = f.envelope();
        Envelope { center: f.center().to_vec(), lambda, weights }
    }

    /// From `−uᵀRu + bᵀu + r ≤ log sup − λ|u−u*|²`.
    fn of_complex(f: &ComplexGaussian) -> Self {
        let (center, log_sup) = f.peak();
        Envelope { center, lambda: f.decay_rate(), weights: vec![log_sup.exp()] }
    }

    /// `Σ_d w_d sup_{s ≥ t} s^d e^{−λs²}`, nonincreasing in `t`.
    fn majorant(&self, t: f64) -> f64 {
        self.weights
            .iter()
            .enumerate()
            .map(|(d, w)| {
                let peak = (d as f64 / (2.0 * self.lambda)).sqrt();
                let s = t.max(peak);
                w * s.powi(d as i32) * (-self.lambda * s * s).exp()
            })
            .sum()
    }

    fn peak_radius(&self) -> f64 {
        ((self.weights.len() - 1) as f64 / (2.0 * self.lambda)).sqrt()
    }
}

fn shell_count(s: u64, d: usize) -> f64 {
    if s == 0 {
        1.0
    } else {
        (2.0 * s as f64 + 1.0).powi(d as i32) - (2.0 * s as f64 - 1.0).powi(d as i32)
    }
}

/// Lattice point nearest to `m·c`.
fn nearest(c: &[f64], m: u64) -> Vec<i64> {
    c.iter().map(|x| (x * m as f64).round() as i64).collect()
}

/// Bounds `Σ_{|l−l₀|∞ = s} |F(l/m)|` for every shell `s ≥ 1` and returns the
/// suffix sums, so `tails[R]` bounds the sum over `|l−l₀|∞ > R`. Beyond the
/// last explicit shell the per-shell ratios decrease, so the remainder is at
/// most a geometric series in the last ratio.
fn shell_tails(env: &Envelope, m: u64, d: usize) -> Vec<f64> {
    let mf = m as f64;
    let term = |s: u64| shell_count(s, d) * env.majorant(((s as f64 - 0.5) / mf).max(0.0));
    let mut terms = vec![0.0];
    let mut s = 1u64;
    let remainder = loop {
        let t = term(s);
        terms.push(t);
        let past_peak = (s as f64 - 0.5) / mf > env.peak_radius();
        if past_peak && t > 0.0 {
            let r = term(s + 1) / t;
            let acc: f64 = terms.iter().sum();
            if r < 0.5 && t * r / (1.0 - r) <= 1e-40 * acc.max(f64::MIN_POSITIVE) {
                break t * r / (1.0 - r);
            }
        } else if past_peak {
            break 0.0;
        }
        s += 1;
    };
    // tails[R] = Σ_{s>R} terms[s] + remainder
    let mut tails = vec![0.0; terms.len()];
    let mut acc = remainder;
    for r in (0..terms.len()).rev() {
        tails[r] = acc;
        acc += terms[r];
    }
    tails
}

fn periodize_with(
    sample: impl Fn(&[f64]) -> C64,
    env: &Envelope,
    level: usize,
    m: u64,
    theta: ThetaEntry,
    tail_tol: f64,
) -> Result<LevelElement> {
    if !(tail_tol > 0.0) {
        return Err(Error::Config(format!("tail_tol must be positive, got {tail_tol}")));
    }
    if m == 0 {
        return Err(Error::Config("m_j must be positive".into()));
    }
    let d = env.center.len();
    if !d.is_multiple_of(2) {
        return Err(Error::Dimension(format!("periodization needs even dimension, got {d}")));
    }
    let norm = (m as f64).powi(d as i32);
    let tails = shell_tails(env, m, d);
    let radius = tails.iter().position(|t| t / norm <= tail_tol).unwrap_or(tails.len() - 1);
    let tail = tails[radius] / norm;
    let l0 = LatticePoint::new(&nearest(&env.center, m));
    let mut u = vec![0.0; d];
    let terms: Vec<_> = window_points(radius as u64, d)
        .map(|p| {
            let l = &p + &l0;
            for (ui, &li) in u.iter_mut().zip(l.coords()) {
                *ui = li as f64 / m as f64;
            }
            let c = sample(&u) / norm;
            (l, c)
        })
        .collect();
    let mut out = LevelElement::new(level, m, theta, d / 2, terms)?;
    out.tail = tail;
    Ok(out)
}

/// `c_k = m^{−2N} 𝓕f(k/m)` over a window whose discarded ℓ¹ mass is certified
/// to be at most `tail_tol`.
pub fn periodize(f: &SchwartzGaussian, level: usize, m: u64, theta: ThetaEntry, tail_tol: f64) -> Result<LevelElement> {
    let ft = f.fourier();
    periodize_with(|u| ft.eval(u), &Envelope::of_schwartz(&ft), level, m, theta, tail_tol)
}

/// [`periodize`] for a complex Gaussian, such as a closed-form Moyal product.
pub fn periodize_complex(f: &ComplexGaussian, level: usize, m: u64, theta: ThetaEntry, tail_tol: f64) -> Result<LevelElement> {
    let ft = f.fourier()?;
    periodize_with(|u| ft.eval(u), &Envelope::of_complex(&ft), level, m, theta, tail_tol)
}

/// `λ · P₁ ⊗ … ⊗ P_N` with `P_i` the projection onto `ξ_i` in the oscillator basis.
#[derive(Clone, Debug, PartialEq)]
pub struct RankOneCandidate {
    vectors: Vec<Vec<C64>>,
    scale: f64,
}

impl RankOneCandidate {
    pub fn new(vectors: Vec<Vec<C64>>, scale: f64) -> Result<Self> {
        if vectors.is_empty() || vectors.iter().any(|v| v.iter().all(|c| c.norm() == 0.0)) {
            return Err(Error::Domain("rank-one candidate needs a nonzero vector per factor".into()));
        }
        if !(scale >= 0.0) {
            return Err(Error::Domain(format!("rank-one scale must be nonnegative, got {scale}")));
        }
        Ok(RankOneCandidate { vectors, scale })
    }

    /// `f₀₀^{⊗N}`.
    pub fn f00(n_half: usize) -> Self {
        RankOneCandidate { vectors: vec![vec![C64::new(1.0, 0.0)]; n_half], scale: 1.0 }
    }

    pub fn n_half(&self) -> usize {
        self.vectors.len()
    }

    /// Operator norm of the candidate.
    pub fn norm(&self) -> f64 {
        self.scale
    }

    /// The candidate as a function on `ℝ²ᴺ` at `θ = 2`.
    pub fn function(&self) -> SchwartzGaussian {
        let nh = self.n_half();
        let d = 2 * nh;
        let mut poly = Poly::constant(d, C64::new(self.scale, 0.0));
        for (i, xi) in self.vectors.iter().enumerate() {
            let norm2: f64 = xi.iter().map(|c| c.norm_sqr()).sum();
            let mut p = Poly::zero(d);
            for (a, xa) in xi.iter().enumerate() {
                for (b, xb) in xi.iter().enumerate() {
                    if xa.norm() > 0.0 && xb.norm() > 0.0 {
                        p = p.add(&oscillator_poly(a, b, d, i, i + nh).scale(xa * xb.conj() / norm2));
                    }
                }
            }
            poly = poly.mul(&p);
        }
        SchwartzGaussian::centered(DMatrix::identity(d, d) * PI, vec![0.0; d])
            .and_then(|g| g.with_poly(poly))
            .expect("πI is positive-definite")
    }
}

#[derive(Clone, Debug)]
pub enum Candidate {
    RankOne(RankOneCandidate),
    General(SchwartzGaussian),
}

impl Candidate {
    pub fn function(&self) -> SchwartzGaussian {
        match self {
            Candidate::RankOne(r) => r.function(),
            Candidate::General(f) => f.clone(),
        }
    }
}

#[derive(Clone, Debug)]
pub struct PartialSums {
    pub a: LevelElement,
    pub b: LevelElement,
    pub c: Option<LevelElement>,
    pub d: Option<LevelElement>,
    /// `‖z f z*‖` for rank-one candidates.
    pub k: Option<f64>,
}

/// `‖z f z*‖ = ‖f‖ ⟨ξ, z*z ξ⟩`, with `⟨ξ, U_k ξ⟩ = 𝓕f(−k)/𝓕f(0)`.
fn rank_one_square_scalar(candidate: &RankOneCandidate, z: Option<&TorusElement>) -> Result<f64> {
    let Some(z) = z else { return Ok(candidate.norm()) };
    if candidate.norm() == 0.0 {
        return Ok(0.0);
    }
    let x = z.involution().star(z)?;
    let ft = candidate.function().fourier();
    let f0 = ft.eval(&vec![0.0; x.dim()]);
    let mut s = C64::new(0.0, 0.0);
    for (k, c) in x.coeffs() {
        let minus: Vec<f64> = k.coords().iter().map(|&v| -(v as f64)).collect();
        s += c * ft.eval(&minus) / f0;
    }
    Ok(candidate.norm() * s.re.max(0.0))
}

/// `a_j`, `b_j = z a_j z*`, and for rank-one candidates `c_j = k b_j` and
/// `d_j = f_ε(k)/k · b_j`, all at level `j` of `tower`.
pub fn partial_sums(
    candidate: &Candidate,
    z: Option<&TorusElement>,
    tower: &TowerSpec,
    j: usize,
    eps: Option<f64>,
    tail_tol: f64,
) -> Result<PartialSums> {
    if j > tower.factors.len() {
        return Err(Error::Config(format!("level {j} beyond tower of height {}", tower.factors.len())));
    }
    let f = candidate.function();
    if f.dim() != 2 * tower.n_half {
        return Err(Error::Dimension(format!("candidate lives on ℝ^{} but the tower on ℝ^{}", f.dim(), 2 * tower.n_half)));
    }
    let m = tower.m(j);
    let a = periodize(&f, j, m, tower.theta, tail_tol)?;
    let b = match z {
        Some(z) => {
            let zj = LevelElement::embed(z, j, m, tower.theta)?;
            let zs = LevelElement { element: zj.element.involution(), ..zj.clone() };
            level_star(&level_star(&zj, &a)?, &zs)?
        }
        None => a.clone(),
    };
    match candidate {
        Candidate::RankOne(r) => {
            let k = rank_one_square_scalar(r, z)?;
            let c = b.scale(C64::new(k, 0.0));
            let d = eps.map(|e| f_eps_rank_one(k, e).map(|s| b.scale(C64::new(s, 0.0)))).transpose()?;
            Ok(PartialSums { a, b, c: Some(c), d, k: Some(k) })
        }
        Candidate::General(g) => {
            if eps.is_some() {
                return Err(Error::UnsupportedCandidate("f_ε is only available for the rank-one family".into()));
            }
            // Without z, c_j periodizes the ambient square when it has a closed form.
            let c = match (z, g.to_complex()) {
                (None, Some(h)) => {
                    let sq = crate::gaussian::moyal_product(&h, &h, &symplectic_matrix(tower.n_half, tower.theta.value()))?;
                    Some(periodize_complex(&sq, j, m, tower.theta, tail_tol)?)
                }
                _ => None,
            };
            Ok(PartialSums { a, b, c, d: None, k: None })
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SquareRow {
    pub level: usize,
    pub m: u64,
    /// `‖B² − kB‖₁` on the truncated coefficients.
    pub value: f64,
    /// Certified contribution of the truncation tails.
    pub tail: f64,
    /// `value + tail`, an upper bound for `‖b_j² − c_j‖`.
    pub bound: f64,
}

/// `‖b_j² − c_j‖` bounds along the tower for a rank-one candidate.
pub fn square_condition(
    candidate: &RankOneCandidate,
    z: Option<&TorusElement>,
    tower: &TowerSpec,
    levels: std::ops::RangeInclusive<usize>,
    tail_tol: f64,
) -> Result<Vec<SquareRow>> {
    let cand = Candidate::RankOne(candidate.clone());
    levels
        .map(|j| {
            let s = partial_sums(&cand, z, tower, j, None, tail_tol)?;
            let c = s.c.expect("rank-one candidates have c_j");
            let diff = level_star(&s.b, &s.b)?.sub(&c)?;
            let value = diff.l1_bound();
            Ok(SquareRow { level: j, m: tower.m(j), value, tail: diff.tail, bound: value + diff.tail })
        })
        .collect()
}

/// Ordinary least squares `y ≈ intercept + slope·x`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
}

pub fn linear_fit(x: &[f64], y: &[f64]) -> Result<LinearFit> {
    let n = x.len();
    if n < 2 || y.len() != n {
        return Err(Error::Config("a fit needs at least two paired points".into()));
    }
    let mx = x.iter().sum::<f64>() / n as f64;
    let my = y.iter().sum::<f64>() / n as f64;
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let syy: f64 = y.iter().map(|b| (b - my).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::Config("fit abscissae are all equal".into()));
    }
    let slope = sxy / sxx;
    let r2 = if syy == 0.0 { 1.0 } else { sxy * sxy / (sxx * syy) };
    Ok(LinearFit { slope, intercept: my - slope * mx, r2 })
}

#[derive(Clone, Debug, PartialEq)]
pub struct DecayRow {
    pub delta: Vec<f64>,
    pub delta_norm: f64,
    /// Natural logarithm of the measured quantity; the value itself underflows
    /// double precision for large `‖Δ‖`.
    pub ln_value: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct DecayTable {
    pub rows: Vec<DecayRow>,
    /// Fit of `ln value` against `ln(1+‖Δ‖)`; `None` with fewer than two finite rows.
    pub fit: Option<LinearFit>,
    /// `(m, ln C_m)` with `C_m = max_Δ value·(1+‖Δ‖)^m`, the least constant on the grid.
    pub constants: Vec<(u32, f64)>,
}

fn norm2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

impl DecayTable {
    /// Fits and constants for rows computed elsewhere, such as in parallel.
    pub fn from_rows(rows: Vec<DecayRow>, m_list: &[u32]) -> Result<DecayTable> {
        decay_table(rows, m_list)
    }
}

fn decay_table(rows: Vec<DecayRow>, m_list: &[u32]) -> Result<DecayTable> {
    let finite: Vec<_> = rows.iter().filter(|r| r.ln_value.is_finite()).collect();
    let fit = if finite.len() >= 2 {
        let x: Vec<f64> = finite.iter().map(|r| (1.0 + r.delta_norm).ln()).collect();
        let y: Vec<f64> = finite.iter().map(|r| r.ln_value).collect();
        Some(linear_fit(&x, &y)?)
    } else {
        None
    };
    let constants = m_list
        .iter()
        .map(|&m| {
            let c = rows.iter().map(|r| r.ln_value + m as f64 * (1.0 + r.delta_norm).ln()).fold(f64::NEG_INFINITY, f64::max);
            (m, c)
        })
        .collect();
    Ok(DecayTable { rows, fit, constants })
}

/// `ln ‖a_Δ ⋆ b‖₂` in closed form when both prefactors are constant.
pub fn translate_product_log_norm(a: &SchwartzGaussian, b: &SchwartzGaussian, delta: &[f64], theta: f64) -> Result<Option<f64>> {
    let (Some(ac), Some(bc)) = (a.to_complex(), b.to_complex()) else { return Ok(None) };
    let nh = a.dim() / 2;
    let h = moyal_fourier(&ac.translate(delta).fourier()?, &bc.fourier()?, &symplectic_matrix(nh, theta))?;
    // Plancherel: ‖a_Δ ⋆ b‖₂ = ‖𝓕(a_Δ ⋆ b)‖₂.
    Ok(Some(h.log_l2_norm()))
}

/// `ln ‖a_Δ ⋆ b‖₂` from the Fourier-space product formula by nested quadrature.
/// Integration boxes come from the Gaussian envelopes of the two transforms;
/// the squared norm must agree between two resolutions to `1e-8` relative.
pub fn translate_product_log_norm_quadrature(a: &SchwartzGaussian, b: &SchwartzGaussian, delta: &[f64], theta: f64) -> Result<f64> {
    let (fa, fb) = (a.translate(delta).fourier(), b.fourier());
    let d = a.dim();
    let th = symplectic_matrix(d / 2, theta);
    let (ea, eb) = (fa.evaluator(), fb.evaluator());
    let (qa, qb) = (fa.quad(), fb.quad());
    let sum = qa + qb;
    let sum_inv = sum.clone().try_inverse().expect("positive-definite");
    let (deg_a, deg_b) = (fa.poly().degree() as usize, fb.poly().degree() as usize);
    // In y the integrand is a bump with form A+B around y*(x).
    let r_in = cutoff_radius(min_eigenvalue(&sum), deg_a + deg_b, 32.0);
    // |𝓕(a⋆b)| is dominated by the convolution of the envelopes, with form A(A+B)⁻¹B.
    let outer_form = qa * &sum_inv * qb;
    let r_out = cutoff_radius(min_eigenvalue(&((&outer_form + outer_form.transpose()) * 0.5)), deg_a + deg_b, 32.0);
    let ca = nalgebra::DVector::from_column_slice(fa.center());
    let cb = nalgebra::DVector::from_column_slice(fb.center());
    let lo: Vec<f64> = (0..d).map(|i| ca[i] + cb[i] - r_out).collect();
    let hi: Vec<f64> = (0..d).map(|i| ca[i] + cb[i] + r_out).collect();
    let squared = |inner_panels: usize, outer_panels: usize| {
        let outer = |x: &[f64]| {
            let xv = nalgebra::DVector::from_column_slice(x);
            let tx = &th * &xv;
            let y_star = &sum_inv * (qa * (&xv - &ca) + qb * &cb);
            let ilo: Vec<f64> = y_star.iter().map(|c| c - r_in).collect();
            let ihi: Vec<f64> = y_star.iter().map(|c| c + r_in).collect();
            let inner = |y: &[f64]| {
                let mut xy = [0.0f64; 16];
                let mut phase = 0.0;
                for i in 0..d {
                    xy[i] = x[i] - y[i];
                    phase += y[i] * tx[i];
                }
                ea.eval(&xy[..d]) * eb.eval(y) * C64::from_polar(1.0, PI * phase)
            };
            C64::new(quad::integrate_box(&inner, &ilo, &ihi, inner_panels).norm_sqr(), 0.0)
        };
        quad::integrate_box(&outer, &lo, &hi, outer_panels).re
    };
    let (coarse, fine) = (squared(2, 4), squared(3, 6));
    let residual = (fine - coarse).abs();
    if residual > 1e-8 * fine.abs() {
        return Err(Error::Numerics { message: "nested quadrature did not settle".into(), residual });
    }
    Ok(0.5 * fine.ln())
}

/// `‖a_Δ ⋆₂ b‖₂` over a grid of translations.
pub fn decay_translate(a: &SchwartzGaussian, b: &SchwartzGaussian, deltas: &[Vec<f64>], m_list: &[u32]) -> Result<DecayTable> {
    let rows = deltas
        .iter()
        .map(|delta| {
            if delta.len() != a.dim() || b.dim() != a.dim() {
                return Err(Error::Dimension("translation and functions must share a dimension".into()));
            }
            let ln_value = if a.is_zero() || b.is_zero() {
                f64::NEG_INFINITY
            } else {
                match translate_product_log_norm(a, b, delta, 2.0)? {
                    Some(v) => v,
                    None => translate_product_log_norm_quadrature(a, b, delta, 2.0)?,
                }
            };
            Ok(DecayRow { delta: delta.clone(), delta_norm: norm2(delta), ln_value })
        })
        .collect::<Result<Vec<_>>>()?;
    decay_table(rows, m_list)
}

/// `ln` of the coefficient ℓ¹ bound of `periodize(a_Δ ⋆₂ a)` at multiplier `m`,
/// including the certified window tail, evaluated without underflow.
pub fn lattice_sum_log_bound(a: &SchwartzGaussian, delta: &[f64], m: u64) -> Result<f64> {
    let ac = a.to_complex().ok_or_else(|| Error::UnsupportedCandidate("lattice sums need a constant prefactor".into()))?;
    if ac.is_zero() {
        return Ok(f64::NEG_INFINITY);
    }
    let nh = a.dim() / 2;
    let h = moyal_fourier(&ac.translate(delta).fourier()?, &ac.fourier()?, &symplectic_matrix(nh, 2.0))?;
    let d = h.dim();
    let (center, log_sup) = h.peak();
    // Work relative to the peak: |𝓕h(u)| ≤ e^{log_sup − λ|u−u*|²}.
    let rel = Envelope { center: center.clone(), lambda: h.decay_rate(), weights: vec![1.0] };
    let tails = shell_tails(&rel, m, d);
    let total_rel: f64 = tails[0];
    let radius = tails.iter().position(|t| *t <= 1e-16 * total_rel.max(1.0)).unwrap_or(tails.len() - 1);
    let l0 = LatticePoint::new(&nearest(&center, m));
    let mut u = vec![0.0; d];
    let mut sum = 0.0;
    for p in window_points(radius as u64, d) {
        let l = &p + &l0;
        for (ui, &li) in u.iter_mut().zip(l.coords()) {
            *ui = li as f64 / m as f64;
        }
        sum += (h.log_eval(&u).re - log_sup).exp();
    }
    Ok(log_sup - d as f64 * (m as f64).ln() + (sum + tails[radius]).ln())
}

/// The lattice-sum bound of `periodize(a_Δ ⋆₂ a)` at level `j` over a grid.
pub fn lattice_sum_decay(a: &SchwartzGaussian, deltas: &[Vec<f64>], tower: &TowerSpec, j: usize, m_list: &[u32]) -> Result<DecayTable> {
    if j > tower.factors.len() {
        return Err(Error::Config(format!("level {j} beyond tower of height {}", tower.factors.len())));
    }
    let m = tower.m(j);
    let rows = deltas
        .iter()
        .map(|delta| {
            if delta.len() != a.dim() {
                return Err(Error::Dimension("translation and function must share a dimension".into()));
            }
            Ok(DecayRow { delta: delta.clone(), delta_norm: norm2(delta), ln_value: lattice_sum_log_bound(a, delta, m)? })
        })
        .collect::<Result<Vec<_>>>()?;
    decay_table(rows, m_list)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::BTreeMap;
    use crate::gaussian::moyal_product;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn two() -> ThetaEntry {
        ThetaEntry::rational(2, 1).unwrap()
    }

    fn tower(factors: &[u64]) -> TowerSpec {
        TowerSpec { theta: two(), factors: factors.to_vec(), n_half: 1 }
    }

    fn grid_sum(f: &SchwartzGaussian, x: &[f64], m: u64, reach: i64) -> C64 {
        let mut s = C64::new(0.0, 0.0);
        for g0 in -reach..=reach {
            for g1 in -reach..=reach {
                s += f.eval(&[x[0] + (g0 * m as i64) as f64, x[1] + (g1 * m as i64) as f64]);
            }
        }
        s
    }

    fn skewed() -> SchwartzGaussian {
        SchwartzGaussian::new(
            DMatrix::from_row_slice(2, 2, &[1.3, 0.4, 0.4, 0.9]),
            vec![0.4, -0.7],
            vec![0.25, 0.1],
            Poly::var(2, 0).add(&Poly::constant(2, C64::new(0.5, 0.2))),
            C64::new(1.0, 0.3),
        )
        .unwrap()
    }

    #[test]
    fn unit_multiplier_samples_the_fourier_transform() {
        let f = skewed();
        let a = periodize(&f, 0, 1, two(), 1e-14).unwrap();
        let ft = f.fourier();
        for (k, c) in a.element().coeffs() {
            let u: Vec<f64> = k.coords().iter().map(|&v| v as f64).collect();
            assert!((c - ft.eval(&u)).norm() <= 1e-12);
        }
        assert!(a.tail() <= 1e-14);
    }

    #[test]
    fn standard_gaussian_coefficients() {
        let f = SchwartzGaussian::standard(2);
        let a = periodize(&f, 1, 2, two(), 1e-15).unwrap();
        assert!((a.coeff(&LatticePoint::zero(2)) - C64::new(0.25, 0.0)).norm() < 1e-16);
        for (k, c) in a.element().coeffs() {
            assert!((c - a.coeff(&-k)).norm() < 1e-17);
        }
    }

    #[test]
    fn certified_tail_covers_a_wider_window() {
        let f = skewed();
        let a = periodize(&f, 1, 3, two(), 1e-6).unwrap();
        let b = periodize(&f, 1, 3, two(), 1e-15).unwrap();
        let dropped: f64 = b.element().coeffs().iter().filter(|(k, _)| a.coeff(k) == C64::new(0.0, 0.0)).map(|(_, c)| c.norm()).sum();
        assert!(dropped <= a.tail() && a.tail() <= 1e-6);
    }

    #[test]
    fn grid_summation_oracle() {
        for f in [SchwartzGaussian::standard(2), skewed()] {
            let a = periodize(&f, 1, 2, two(), 1e-13).unwrap();
            for x in [[0.0, 0.0], [0.3, -0.6], [1.1, 0.45], [-0.9, 1.7]] {
                assert!((a.eval(&x) - grid_sum(&f, &x, 2, 8)).norm() < 1e-7);
            }
        }
    }

    #[test]
    fn level_star_phases_and_mismatch() {
        let m = 3;
        let k = LatticePoint::new(&[1, 2]);
        let l = LatticePoint::new(&[-2, 1]);
        let one = C64::new(1.0, 0.0);
        let a = LevelElement::new(1, m, two(), 1, [(k.clone(), one)]).unwrap();
        let b = LevelElement::new(1, m, two(), 1, [(l.clone(), one)]).unwrap();
        let p = level_star(&a, &b).unwrap();
        // e^{−πi (k/m)·Θ(l/m)} with Θ = 2J.
        let form = 2.0 * (1.0 * 1.0 - 2.0 * (-2.0)) / 9.0;
        assert!((p.coeff(&(&k + &l)) - C64::from_polar(1.0, -PI * form)).norm() < 1e-15);
        let other = LevelElement::new(2, 6, two(), 1, [(k.clone(), one)]).unwrap();
        assert!(matches!(level_star(&a, &other), Err(Error::LevelMismatch(_))));
    }

    #[test]
    fn level_star_against_double_loop() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let m = 4;
        let rand_terms = |rng: &mut ChaCha8Rng| -> Vec<(LatticePoint, C64)> {
            (0..12).map(|_| (LatticePoint::new(&[rng.random_range(-5..=5), rng.random_range(-5..=5)]), C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))).collect()
        };
        let (ta, tb) = (rand_terms(&mut rng), rand_terms(&mut rng));
        let a = LevelElement::new(2, m, two(), 1, ta.clone()).unwrap();
        let b = LevelElement::new(2, m, two(), 1, tb.clone()).unwrap();
        let p = level_star(&a, &b).unwrap();
        let mut oracle: BTreeMap<LatticePoint, C64> = BTreeMap::new();
        for (k, x) in a.element().coeffs() {
            for (l, y) in b.element().coeffs() {
                let (kf, lf) = (k.coords().iter().map(|&v| v as f64 / m as f64).collect::<Vec<_>>(), l.coords().iter().map(|&v| v as f64 / m as f64).collect::<Vec<_>>());
                let form = 2.0 * (kf[0] * lf[1] - kf[1] * lf[0]);
                *oracle.entry(k + l).or_default() += x * y * C64::from_polar(1.0, -PI * form);
            }
        }
        for (k, v) in &oracle {
            assert!((p.coeff(k) - v).norm() < 1e-13);
        }
        let zero = ThetaEntry::ZERO;
        let ca = LevelElement::new(2, m, zero, 1, ta).unwrap();
        let cb = LevelElement::new(2, m, zero, 1, tb).unwrap();
        let x = [0.3, -0.8];
        assert!((level_star(&ca, &cb).unwrap().eval(&x) - ca.eval(&x) * cb.eval(&x)).norm() < 1e-12);
    }

    #[test]
    fn rank_one_partial_sums() {
        let t = tower(&[2, 2, 2]);
        let f00 = Candidate::RankOne(RankOneCandidate::f00(1));
        let base = Arc::new(SkewMatrix::symplectic(1, two()));
        let one = TorusElement::one(base.clone());
        let s = partial_sums(&f00, Some(&one), &t, 1, Some(0.1), 1e-15).unwrap();
        assert!(s.a.sub(&s.b).unwrap().l1_bound() < 1e-15);
        assert!((s.k.unwrap() - 1.0).abs() < 1e-15);
        let d = s.d.unwrap();
        assert!(d.sub(&s.b.scale(C64::new(0.9, 0.0))).unwrap().l1_bound() < 1e-15);
        let zero = TorusElement::zero(base.clone());
        let s0 = partial_sums(&f00, Some(&zero), &t, 2, Some(0.1), 1e-15).unwrap();
        assert!(s0.b.element().is_zero() && s0.c.unwrap().element().is_zero() && s0.d.unwrap().element().is_zero());
        let g = Candidate::General(SchwartzGaussian::standard(2));
        assert!(matches!(partial_sums(&g, None, &t, 1, Some(0.1), 1e-15), Err(Error::UnsupportedCandidate(_))));
    }

    #[test]
    fn rank_one_scalar_matches_direct_square() {
        // (z f z*)² = k z f z* checked through the ambient Gaussian product.
        let f = RankOneCandidate::f00(1);
        let base = Arc::new(SkewMatrix::symplectic(1, two()));
        let z = TorusElement::from_terms(base, [(LatticePoint::new(&[0, 0]), C64::new(1.0, 0.0)), (LatticePoint::new(&[1, 0]), C64::new(0.5, 0.0))]).unwrap();
        let k = rank_one_square_scalar(&f, Some(&z)).unwrap();
        let zz = z.involution().star(&z).unwrap();
        let ft = f.function().fourier();
        // ⟨ξ, X ξ⟩ by direct sum of the four contributions.
        let direct: C64 = zz.coeffs().iter().map(|(p, c)| c * ft.eval(&[-(p.coords()[0] as f64), -(p.coords()[1] as f64)]) / ft.eval(&[0.0, 0.0])).sum();
        assert!((k - direct.re).abs() < 1e-15);
        assert!((k - (1.25 + (-PI).exp())).abs() < 1e-14);
    }

    #[test]
    fn square_condition_decreases_along_the_tower() {
        let rows = square_condition(&RankOneCandidate::f00(1), None, &tower(&[2, 2, 2]), 1..=3, 1e-16).unwrap();
        for w in rows.windows(2) {
            assert!(w[1].bound < w[0].bound, "{rows:?}");
        }
        assert!(rows[2].bound < 1e-3);
    }

    #[test]
    fn commutative_square_condition_matches_grid() {
        let f = SchwartzGaussian::standard(2);
        let zero = ThetaEntry::ZERO;
        let m = 2;
        let b = periodize(&f, 1, m, zero, 1e-15).unwrap();
        let c = periodize(&f.mul(&f).unwrap(), 1, m, zero, 1e-15).unwrap();
        let diff = level_star(&b, &b).unwrap().sub(&c).unwrap();
        for x in [[0.0, 0.0], [0.4, 0.9], [-1.2, 0.3]] {
            let s = grid_sum(&f, &x, m, 8);
            let s2 = grid_sum(&f.mul(&f).unwrap(), &x, m, 8);
            assert!((diff.eval(&x) - (s * s - s2)).norm() < 1e-12, "{} vs {}", diff.eval(&x), s * s - s2);
        }
    }

    #[test]
    fn product_compatibility_at_fine_levels() {
        let f = SchwartzGaussian::standard(2);
        let g = SchwartzGaussian::centered(DMatrix::identity(2, 2) * 2.0, vec![0.3, -0.1]).unwrap();
        let fg = moyal_product(&f.to_complex().unwrap(), &g.to_complex().unwrap(), &symplectic_matrix(1, 2.0)).unwrap();
        let gap = |m: u64| {
            let pf = periodize(&f, 2, m, two(), 1e-15).unwrap();
            let pg = periodize(&g, 2, m, two(), 1e-15).unwrap();
            let diff = level_star(&pf, &pg).unwrap().sub(&periodize_complex(&fg, 2, m, two(), 1e-15).unwrap()).unwrap();
            (diff.l1_bound(), diff.tail())
        };
        // Cross terms between translates by m decay like e^{−πm²/4}.
        let (coarse, _) = gap(4);
        let (fine, tail) = gap(8);
        assert!(fine <= tail + 1e-12, "{fine}");
        assert!(coarse > 1e3 * fine);
    }

    #[test]
    fn decay_closed_form_matches_quadrature() {
        let a = SchwartzGaussian::standard(2);
        let b = SchwartzGaussian::centered(DMatrix::identity(2, 2) * 2.0, vec![0.3, -0.1]).unwrap();
        {
            let delta = [0.8, -0.5];
            let closed = translate_product_log_norm(&a, &b, &delta, 2.0).unwrap().unwrap();
            let numeric = translate_product_log_norm_quadrature(&a, &b, &delta, 2.0).unwrap();
            assert!((closed - numeric).abs() < 1e-7, "{delta:?}: {closed} vs {numeric}");
        }
    }

    #[test]
    fn decay_translate_table() {
        let a = SchwartzGaussian::standard(2);
        let deltas: Vec<Vec<f64>> = (0..8).map(|i| vec![4.0 * (i + 1) as f64, 0.0]).collect();
        let table = decay_translate(&a, &a, &deltas, &[4]).unwrap();
        let fit = table.fit.unwrap();
        assert!(fit.slope <= -4.0);
        // ln‖a_Δ ⋆ a‖₂ is an exact quadratic in ‖Δ‖.
        let q: Vec<f64> = table.rows.iter().map(|r| r.ln_value + PI / 4.0 * r.delta_norm * r.delta_norm).collect();
        assert!(q.iter().all(|v| (v - q[0]).abs() < 1e-9), "{q:?}");
        let zero = a.with_amplitude(C64::new(0.0, 0.0));
        assert!(decay_translate(&a, &zero, &deltas, &[4]).unwrap().rows.iter().all(|r| r.ln_value == f64::NEG_INFINITY));
        let base = decay_translate(&a, &a, &[vec![0.0, 0.0]], &[4]).unwrap();
        assert!(base.rows[0].ln_value.is_finite() && base.fit.is_none());
    }

    #[test]
    fn lattice_sum_bound_decays_faster_outward() {
        let a = SchwartzGaussian::standard(2);
        let t = tower(&[2, 2]);
        let base = lattice_sum_decay(&a, &[vec![0.0, 0.0]], &t, 2, &[4]).unwrap();
        assert!(base.rows[0].ln_value.is_finite());
        let slope = |lo: f64| {
            let deltas: Vec<Vec<f64>> = (0..5).map(|i| vec![lo * (1.0 + i as f64 / 4.0), 0.0]).collect();
            lattice_sum_decay(&a, &deltas, &t, 2, &[4]).unwrap().fit.unwrap().slope
        };
        let (s1, s2, s3) = (slope(4.0), slope(8.0), slope(16.0));
        assert!(s1 <= -4.0 && s2 <= s1 && s3 <= s2, "{s1} {s2} {s3}");
    }

    #[test]
    fn lattice_sum_bound_matches_explicit_sum() {
        let a = SchwartzGaussian::standard(2);
        let delta = [1.5, -0.5];
        let m = 2;
        let ac = a.to_complex().unwrap();
        let h = moyal_product(&ac.translate(&delta), &ac, &symplectic_matrix(1, 2.0)).unwrap();
        let p = periodize_complex(&h, 1, m, two(), 1e-18).unwrap();
        let explicit = p.l1_bound();
        let ln_bound = lattice_sum_log_bound(&a, &delta, m).unwrap();
        assert!((ln_bound.exp() - explicit).abs() <= 1e-10 * explicit, "{} vs {explicit}", ln_bound.exp());
    }

    #[test]
    fn fit_statistics() {
        let x = [0.0, 1.0, 2.0, 3.0];
        let y = [1.0, -1.0, -3.0, -5.0];
        let f = linear_fit(&x, &y).unwrap();
        assert!((f.slope + 2.0).abs() < 1e-15 && (f.intercept - 1.0).abs() < 1e-15 && (f.r2 - 1.0).abs() < 1e-15);
    }
}
