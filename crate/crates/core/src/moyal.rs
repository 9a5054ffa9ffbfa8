//! The Moyal plane in the oscillator basis: a truncated matrix model, its
//! seminorms and norms, the explicit oscillator functions at `θ = 2`, and
//! plane waves with their phase algebra.

use std::f64::consts::PI;
use std::sync::OnceLock;

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gaussian::SchwartzGaussian;
use crate::lattice::SkewMatrix;
use crate::poly::Poly;

/// Per-factor constant `K` in `‖f‖_op ≤ K^N (2πθ)^{−N/2} ‖f‖₂`, fixed on `f₀₀`.
pub fn opnorm_calibration() -> f64 {
    static K: OnceLock<f64> = OnceLock::new();
    *K.get_or_init(|| {
        // f₀₀ is a rank-one projection, so its operator norm is 1.
        let l2 = oscillator_function(0, 0).l2_norm_quadrature().expect("f00 quadrature");
        (2.0 * PI * 2.0).sqrt() / l2
    })
}

#[derive(Clone, Debug, PartialEq)]
pub enum MoyalRepr {
    /// `c₁ ⊗ … ⊗ c_N`, one `M×M` matrix per factor.
    Factors(Vec<DMatrix<C64>>),
    /// One `Mᴺ×Mᴺ` matrix, factor 1 most significant.
    Dense(DMatrix<C64>),
}

/// A truncated element of `𝒮(ℝ²ᴺ_θ)`. `tail` bounds the Hilbert–Schmidt norm
/// of everything outside the truncation; `exact` means that bound is zero.
#[derive(Clone, Debug, PartialEq)]
pub struct MoyalMatrix {
    n_half: usize,
    theta: f64,
    size: usize,
    repr: MoyalRepr,
    exact: bool,
    tail: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OpNormCheck {
    pub opnorm: f64,
    pub bound: f64,
    pub ok: bool,
}

fn matrix_unit(size: usize, m: usize, n: usize) -> DMatrix<C64> {
    let mut e = DMatrix::zeros(size, size);
    e[(m, n)] = C64::new(1.0, 0.0);
    e
}

fn pad(a: &DMatrix<C64>, size: usize) -> DMatrix<C64> {
    let mut out = DMatrix::zeros(size, size);
    out.view_mut((0, 0), (a.nrows(), a.ncols())).copy_from(a);
    out
}

fn sigma_max(a: &DMatrix<C64>) -> f64 {
    if a.iter().all(|z| *z == C64::new(0.0, 0.0)) {
        return 0.0;
    }
    a.clone().svd(false, false).singular_values.max()
}

impl MoyalMatrix {
    fn check_theta(theta: f64) -> Result<()> {
        if theta.is_finite() && theta > 0.0 {
            Ok(())
        } else {
            Err(Error::Domain(format!("θ must be positive, got {theta}")))
        }
    }

    pub fn from_factors(theta: f64, factors: Vec<DMatrix<C64>>) -> Result<Self> {
        Self::check_theta(theta)?;
        let size = factors.first().map(|f| f.nrows()).ok_or_else(|| Error::Shape("no tensor factors".into()))?;
        if size == 0 || factors.iter().any(|f| f.nrows() != size || f.ncols() != size) {
            return Err(Error::Shape("tensor factors must be square of one size".into()));
        }
        Ok(MoyalMatrix { n_half: factors.len(), theta, size, repr: MoyalRepr::Factors(factors), exact: true, tail: 0.0 })
    }

    pub fn from_dense(n_half: usize, theta: f64, size: usize, dense: DMatrix<C64>) -> Result<Self> {
        Self::check_theta(theta)?;
        let dim = size.checked_pow(n_half as u32).filter(|&d| n_half > 0 && d > 0);
        if dim != Some(dense.nrows()) || dense.nrows() != dense.ncols() {
            return Err(Error::Shape(format!("dense matrix must be M^N × M^N with M={size}, N={n_half}")));
        }
        Ok(MoyalMatrix { n_half, theta, size, repr: MoyalRepr::Dense(dense), exact: true, tail: 0.0 })
    }

    /// `f_{m₁n₁} ⊗ … ⊗ f_{m_N n_N}`.
    pub fn basis(theta: f64, size: usize, m: &[usize], n: &[usize]) -> Result<Self> {
        if m.len() != n.len() || m.iter().chain(n).any(|&i| i >= size) {
            return Err(Error::Shape(format!("indices {m:?}, {n:?} outside truncation {size}")));
        }
        Self::from_factors(theta, m.iter().zip(n).map(|(&i, &j)| matrix_unit(size, i, j)).collect())
    }

    pub fn zero(n_half: usize, theta: f64, size: usize) -> Result<Self> {
        Self::from_factors(theta, vec![DMatrix::zeros(size, size); n_half])
    }

    /// Marks the matrix as the truncation of an element whose discarded part has
    /// Hilbert–Schmidt norm at most `tail`.
    pub fn with_tail(mut self, tail: f64) -> Self {
        self.tail = tail;
        self.exact = tail == 0.0;
        self
    }

    pub fn n_half(&self) -> usize {
        self.n_half
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn repr(&self) -> &MoyalRepr {
        &self.repr
    }

    pub fn is_exact(&self) -> bool {
        self.exact
    }

    pub fn tail(&self) -> f64 {
        self.tail
    }

    pub fn to_dense(&self) -> DMatrix<C64> {
        match &self.repr {
            MoyalRepr::Dense(d) => d.clone(),
            MoyalRepr::Factors(f) => f[1..].iter().fold(f[0].clone(), |acc, x| acc.kronecker(x)),
        }
    }

    pub fn expanded(&self) -> MoyalMatrix {
        MoyalMatrix { repr: MoyalRepr::Dense(self.to_dense()), ..self.clone() }
    }

    fn flat(&self, idx: &[usize]) -> usize {
        idx.iter().fold(0, |acc, &i| acc * self.size + i)
    }

    fn unflat(&self, mut k: usize) -> Vec<usize> {
        let mut idx = vec![0; self.n_half];
        for slot in idx.iter_mut().rev() {
            *slot = k % self.size;
            k /= self.size;
        }
        idx
    }

    pub fn entry(&self, m: &[usize], n: &[usize]) -> C64 {
        match &self.repr {
            MoyalRepr::Factors(f) => f.iter().zip(m.iter().zip(n)).map(|(c, (&i, &j))| c[(i, j)]).product(),
            MoyalRepr::Dense(d) => d[(self.flat(m), self.flat(n))],
        }
    }

    /// Zero-padding into a larger truncation, which changes nothing.
    pub fn resized(&self, size: usize) -> Result<MoyalMatrix> {
        if size < self.size {
            return Err(Error::Shape("use truncate to shrink".into()));
        }
        if size == self.size {
            return Ok(self.clone());
        }
        let repr = match &self.repr {
            MoyalRepr::Factors(f) => MoyalRepr::Factors(f.iter().map(|c| pad(c, size)).collect()),
            MoyalRepr::Dense(_) => {
                let big = size.pow(self.n_half as u32);
                let mut d = DMatrix::zeros(big, big);
                let grown = MoyalMatrix { size, ..self.clone() };
                for r in 0..self.size.pow(self.n_half as u32) {
                    for c in 0..self.size.pow(self.n_half as u32) {
                        let (mi, ni) = (self.unflat(r), self.unflat(c));
                        d[(grown.flat(&mi), grown.flat(&ni))] = self.entry(&mi, &ni);
                    }
                }
                MoyalRepr::Dense(d)
            }
        };
        Ok(MoyalMatrix { size, repr, ..self.clone() })
    }

    /// Keeps the corner `[0, size)`, folding the dropped mass into the tail.
    pub fn truncate(&self, size: usize) -> Result<MoyalMatrix> {
        if size == 0 || size > self.size {
            return Err(Error::Shape(format!("cannot truncate {} to {size}", self.size)));
        }
        let full = self.expanded();
        let small_dim = size.pow(self.n_half as u32);
        let mut d = DMatrix::zeros(small_dim, small_dim);
        let small = MoyalMatrix { size, ..self.clone() };
        let mut kept = 0.0;
        for r in 0..small_dim {
            for c in 0..small_dim {
                let (mi, ni) = (small.unflat(r), small.unflat(c));
                let v = full.entry(&mi, &ni);
                kept += v.norm_sqr();
                d[(r, c)] = v;
            }
        }
        let dropped = (full.hs_norm().powi(2) - kept).max(0.0).sqrt();
        let tail = self.tail + dropped;
        Ok(MoyalMatrix { size, repr: MoyalRepr::Dense(d), exact: self.exact && dropped == 0.0, tail, ..self.clone() })
    }

    fn check_compatible(&self, other: &MoyalMatrix) -> Result<()> {
        if self.n_half != other.n_half {
            return Err(Error::Shape(format!("N = {} vs {}", self.n_half, other.n_half)));
        }
        if (self.theta - other.theta).abs() > 1e-15 * self.theta {
            return Err(Error::Shape(format!("θ = {} vs {}", self.theta, other.theta)));
        }
        Ok(())
    }

    fn aligned(&self, other: &MoyalMatrix) -> Result<(MoyalMatrix, MoyalMatrix)> {
        self.check_compatible(other)?;
        let size = self.size.max(other.size);
        Ok((self.resized(size)?, other.resized(size)?))
    }

    /// `(ab)_{mn} = Σ_k a_{mk} b_{kn}`, factorwise when both are tensor products.
    pub fn mul(&self, other: &MoyalMatrix) -> Result<MoyalMatrix> {
        let (a, b) = self.aligned(other)?;
        let repr = match (&a.repr, &b.repr) {
            (MoyalRepr::Factors(x), MoyalRepr::Factors(y)) => MoyalRepr::Factors(x.iter().zip(y).map(|(p, q)| p * q).collect()),
            _ => MoyalRepr::Dense(a.to_dense() * b.to_dense()),
        };
        // ab − a_T b_T = a_R b + a_T b_R, measured in Hilbert–Schmidt norm.
        let tail = a.tail * (b.hs_norm() + b.tail) + a.hs_norm() * b.tail;
        Ok(MoyalMatrix { repr, exact: a.exact && b.exact, tail, ..a })
    }

    pub fn add(&self, other: &MoyalMatrix) -> Result<MoyalMatrix> {
        let (a, b) = self.aligned(other)?;
        let repr = MoyalRepr::Dense(a.to_dense() + b.to_dense());
        Ok(MoyalMatrix { repr, exact: a.exact && b.exact, tail: a.tail + b.tail, ..a })
    }

    pub fn scale(&self, s: C64) -> MoyalMatrix {
        let repr = match &self.repr {
            MoyalRepr::Factors(f) => {
                let mut f = f.clone();
                f[0] *= s;
                MoyalRepr::Factors(f)
            }
            MoyalRepr::Dense(d) => MoyalRepr::Dense(d * s),
        };
        MoyalMatrix { repr, tail: self.tail * s.norm(), ..self.clone() }
    }

    /// The involution `f ↦ f*`, the conjugate transpose.
    pub fn adjoint(&self) -> MoyalMatrix {
        let repr = match &self.repr {
            MoyalRepr::Factors(f) => MoyalRepr::Factors(f.iter().map(|c| c.adjoint()).collect()),
            MoyalRepr::Dense(d) => MoyalRepr::Dense(d.adjoint()),
        };
        MoyalMatrix { repr, ..self.clone() }
    }

    fn weight(&self, k: u32, m: usize, n: usize) -> f64 {
        (self.theta * self.theta * (m as f64 + 0.5) * (n as f64 + 0.5)).powi(k as i32)
    }

    /// `r_k(c) = (Σ Π_i θ^{2k}(m_i+½)^k(n_i+½)^k |c_{mn}|²)^{1/2}`.
    pub fn seminorm_rk(&self, k: u32) -> f64 {
        match &self.repr {
            MoyalRepr::Factors(f) => f
                .iter()
                .map(|c| {
                    let mut s = 0.0;
                    for m in 0..self.size {
                        for n in 0..self.size {
                            s += self.weight(k, m, n) * c[(m, n)].norm_sqr();
                        }
                    }
                    s.sqrt()
                })
                .product(),
            MoyalRepr::Dense(d) => {
                let mut s = 0.0;
                for r in 0..d.nrows() {
                    let mi = self.unflat(r);
                    for c in 0..d.ncols() {
                        let ni = self.unflat(c);
                        let w: f64 = mi.iter().zip(&ni).map(|(&m, &n)| self.weight(k, m, n)).product();
                        s += w * d[(r, c)].norm_sqr();
                    }
                }
                s.sqrt()
            }
        }
    }

    pub fn hs_norm(&self) -> f64 {
        match &self.repr {
            MoyalRepr::Factors(f) => f.iter().map(|c| c.norm()).product(),
            MoyalRepr::Dense(d) => d.norm(),
        }
    }

    /// `‖f‖₂`, using `⟨f_{mn}, f_{kl}⟩ = θᴺ δ_{mk} δ_{nl}`.
    pub fn l2_norm(&self) -> f64 {
        self.theta.powf(self.n_half as f64 / 2.0) * self.hs_norm()
    }

    /// Largest singular value of the truncated matrix.
    pub fn opnorm_trunc(&self) -> f64 {
        match &self.repr {
            MoyalRepr::Factors(f) => f.iter().map(sigma_max).product(),
            MoyalRepr::Dense(d) => sigma_max(d),
        }
    }

    /// `‖f‖_op` against the calibrated bound `K^N (2πθ)^{−N/2} ‖f‖₂`.
    pub fn opnorm_bound_check(&self) -> OpNormCheck {
        self.opnorm_bound_check_with(opnorm_calibration())
    }

    /// The same check with an explicit per-factor constant.
    pub fn opnorm_bound_check_with(&self, k: f64) -> OpNormCheck {
        let n = self.n_half as i32;
        let opnorm = self.opnorm_trunc();
        let bound = k.powi(n) * (2.0 * PI * self.theta).powf(-(n as f64) / 2.0) * self.l2_norm();
        OpNormCheck { opnorm, bound, ok: opnorm <= bound + 1e-12 }
    }

    pub fn to_json(&self) -> serde_json::Value {
        let pairs = |d: &DMatrix<C64>| -> Vec<[f64; 2]> {
            (0..d.nrows()).flat_map(|r| (0..d.ncols()).map(move |c| [d[(r, c)].re, d[(r, c)].im])).collect()
        };
        let (factors, dense) = match &self.repr {
            MoyalRepr::Factors(f) => (Some(f.iter().map(pairs).collect()), None),
            MoyalRepr::Dense(d) => (None, Some(pairs(d))),
        };
        serde_json::to_value(MoyalJson {
            n_half: self.n_half,
            theta: self.theta,
            size: self.size,
            factors,
            dense,
            exact: self.exact,
            tail: self.tail,
        })
        .expect("plain data")
    }

    pub fn from_json(value: &serde_json::Value) -> Result<MoyalMatrix> {
        let j: MoyalJson = serde_json::from_value(value.clone()).map_err(|e| Error::Config(e.to_string()))?;
        let unpack = |v: &[[f64; 2]], n: usize| -> Result<DMatrix<C64>> {
            if v.len() != n * n {
                return Err(Error::Shape(format!("expected {} entries, found {}", n * n, v.len())));
            }
            Ok(DMatrix::from_row_iterator(n, n, v.iter().map(|p| C64::new(p[0], p[1]))))
        };
        let m = match (&j.factors, &j.dense) {
            (Some(f), None) => {
                if f.len() != j.n_half {
                    return Err(Error::Shape("factor count must equal N".into()));
                }
                Self::from_factors(j.theta, f.iter().map(|v| unpack(v, j.size)).collect::<Result<_>>()?)?
            }
            (None, Some(d)) => Self::from_dense(j.n_half, j.theta, j.size, unpack(d, j.size.pow(j.n_half as u32))?)?,
            _ => return Err(Error::Config("exactly one of factors, dense".into())),
        };
        Ok(MoyalMatrix { exact: j.exact, tail: j.tail, ..m })
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct MoyalJson {
    #[serde(rename = "N")]
    n_half: usize,
    theta: f64,
    #[serde(rename = "M")]
    size: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    factors: Option<Vec<Vec<[f64; 2]>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    dense: Option<Vec<[f64; 2]>>,
    #[serde(default = "yes")]
    exact: bool,
    #[serde(default)]
    tail: f64,
}

fn yes() -> bool {
    true
}

fn laguerre(n: usize, alpha: usize, t: &Poly) -> Poly {
    // L_n^{(α)}(t) = Σ_j (−1)^j C(n+α, n−j) t^j / j!
    let d = t.dim();
    let mut out = Poly::zero(d);
    let mut tj = Poly::constant(d, C64::new(1.0, 0.0));
    let mut fact = 1.0;
    for j in 0..=n {
        if j > 0 {
            tj = tj.mul(t);
            fact *= j as f64;
        }
        let binom = (0..n - j).fold(1.0, |acc, i| acc * (n + alpha - i) as f64 / (i + 1) as f64);
        let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
        out = out.add(&tj.scale(C64::new(sign * binom / fact, 0.0)));
    }
    out
}

/// Prefactor of `f_{mn}` at `θ = 2` in the plane `(x_q, x_p)` of `ℝᵈ`.
pub(crate) fn oscillator_poly(m: usize, n: usize, d: usize, q: usize, p: usize) -> Poly {
    if m < n {
        return oscillator_poly(n, m, d, q, p).conj();
    }
    let (xq, xp) = (Poly::var(d, q), Poly::var(d, p));
    let r2 = xq.mul(&xq).add(&xp.mul(&xp));
    let z = xq.add(&xp.scale(C64::new(0.0, -1.0))).scale(C64::new((2.0 * PI).sqrt(), 0.0));
    let norm = ((n + 1)..=m).fold(1.0, |acc, i| acc / (i as f64).sqrt());
    let sign = if n.is_multiple_of(2) { 2.0 } else { -2.0 };
    z.pow((m - n) as u32).mul(&laguerre(n, m - n, &r2.scale(C64::new(2.0 * PI, 0.0)))).scale(C64::new(sign * norm, 0.0))
}

/// The oscillator function `f_{mn}` on `ℝ²` at `θ = 2`: for `m ≥ n`,
/// `2(−1)ⁿ √(n!/m!) (√(2π)(q − ip))^{m−n} L_n^{(m−n)}(2π|x|²) e^{−π|x|²}`.
pub fn oscillator_function(m: usize, n: usize) -> SchwartzGaussian {
    oscillator_tensor(&[m], &[n]).expect("single factor")
}

/// `f_{m₁n₁} ⊗ … ⊗ f_{m_N n_N}` on `ℝ²ᴺ`, coordinates ordered `(q₁…q_N, p₁…p_N)`.
pub fn oscillator_tensor(m: &[usize], n: &[usize]) -> Result<SchwartzGaussian> {
    if m.len() != n.len() || m.is_empty() {
        return Err(Error::Dimension("need one (m, n) pair per factor".into()));
    }
    let nh = m.len();
    let d = 2 * nh;
    let poly = (0..nh).fold(Poly::constant(d, C64::new(1.0, 0.0)), |acc, i| acc.mul(&oscillator_poly(m[i], n[i], d, i, i + nh)));
    SchwartzGaussian::centered(DMatrix::identity(d, d) * PI, vec![0.0; d])?.with_poly(poly)
}

/// `x ↦ amplitude · e^{2πi k·x}`, so that the product phase is `e^{−πi k·Θl}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlaneWave {
    k: Vec<f64>,
    modulus: f64,
    phase: f64,
}

impl PlaneWave {
    pub fn new(k: Vec<f64>, amplitude: C64) -> Self {
        PlaneWave { k, modulus: amplitude.norm(), phase: amplitude.arg() }
    }

    pub fn k(&self) -> &[f64] {
        &self.k
    }

    pub fn modulus(&self) -> f64 {
        self.modulus
    }

    pub fn phase(&self) -> f64 {
        self.phase
    }

    pub fn amplitude(&self) -> C64 {
        C64::from_polar(self.modulus, self.phase)
    }

    /// `|amplitude|`, since `|e^{2πik·x}| = 1`.
    pub fn opnorm(&self) -> f64 {
        self.modulus
    }

    pub fn eval(&self, x: &[f64]) -> C64 {
        let kx: f64 = self.k.iter().zip(x).map(|(a, b)| a * b).sum();
        C64::from_polar(self.modulus, self.phase + 2.0 * PI * kx)
    }

    /// `E_a`: covector `a^{1/2}k`, amplitude times `a^{N/2}`.
    pub fn dilate(&self, a: f64) -> PlaneWave {
        PlaneWave {
            k: self.k.iter().map(|x| a.sqrt() * x).collect(),
            modulus: self.modulus * a.powf(self.k.len() as f64 / 4.0),
            phase: self.phase,
        }
    }

    fn scaled(&self, s: f64) -> PlaneWave {
        PlaneWave { modulus: self.modulus * s, ..self.clone() }
    }
}

fn wrap(x: f64) -> f64 {
    let y = x.rem_euclid(2.0 * PI);
    if y > PI {
        y - 2.0 * PI
    } else {
        y
    }
}

fn skew_form(k: &[f64], theta: &DMatrix<f64>, l: &[f64]) -> f64 {
    let mut s = 0.0;
    for i in 0..k.len() {
        for j in 0..l.len() {
            s += k[i] * theta[(i, j)] * l[j];
        }
    }
    s
}

fn wave_mul(w1: &PlaneWave, w2: &PlaneWave, theta: &DMatrix<f64>) -> PlaneWave {
    PlaneWave {
        k: w1.k.iter().zip(&w2.k).map(|(a, b)| a + b).collect(),
        modulus: w1.modulus * w2.modulus,
        phase: wrap(w1.phase + w2.phase - PI * skew_form(&w1.k, theta, &w2.k)),
    }
}

/// `e^{2πik·} ⋆ e^{2πil·} = e^{2πi(k+l)·} e^{−πi k·Θl}`.
pub fn plane_wave_mul(w1: &PlaneWave, w2: &PlaneWave, theta: &SkewMatrix) -> Result<PlaneWave> {
    let n = theta.n();
    if w1.k.len() != n || w2.k.len() != n {
        return Err(Error::Dimension(format!("wave covectors must have length {n}")));
    }
    let t = DMatrix::from_fn(n, n, |i, j| theta.value(i, j));
    Ok(wave_mul(w1, w2, &t))
}

/// Compares `w₁ ⋆_θ w₂` with `(θ/2)^{−N/2} E_{2/θ}(E_{θ/2}w₁ ⋆₂ E_{θ/2}w₂)` and
/// returns the largest covector, modulus or phase discrepancy.
pub fn scaling_identity_check(w1: &PlaneWave, w2: &PlaneWave, theta: f64) -> Result<f64> {
    if !(theta > 0.0) {
        return Err(Error::Domain(format!("θ must be positive, got {theta}")));
    }
    let d = w1.k.len();
    if d != w2.k.len() || !d.is_multiple_of(2) || d == 0 {
        return Err(Error::Dimension("wave covectors must share an even length".into()));
    }
    let nh = d / 2;
    let j = DMatrix::from_fn(d, d, |r, c| {
        if c == r + nh {
            1.0
        } else if r == c + nh {
            -1.0
        } else {
            0.0
        }
    });
    let lhs = wave_mul(w1, w2, &(&j * theta));
    let inner = wave_mul(&w1.dilate(theta / 2.0), &w2.dilate(theta / 2.0), &(&j * 2.0));
    let rhs = inner.dilate(2.0 / theta).scaled((theta / 2.0).powf(-(nh as f64) / 2.0));
    let dk = lhs.k.iter().zip(&rhs.k).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    let dm = (lhs.modulus - rhs.modulus).abs();
    let dp = if lhs.modulus == 0.0 { 0.0 } else { wrap(lhs.phase - rhs.phase).abs() };
    Ok(dk.max(dm).max(dp))
}
