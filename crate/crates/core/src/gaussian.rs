//! Gaussian×polynomial functions on ℝᵈ with closed-form Fourier transforms, and
//! complex Gaussians `exp(−xᵀPx + qᵀx + r)` on which the Moyal product is closed.
//!
//! Fourier convention: `(𝓕f)(u) = ∫ f(t) e^{−2πi t·u} dt`.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::poly::Poly;
use crate::quad;

const I: C64 = C64::new(0.0, 1.0);

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn check_positive_definite(a: &DMatrix<f64>) -> Result<()> {
    if !a.is_square() {
        return Err(Error::Domain("quadratic form must be square".into()));
    }
    if (a - a.transpose()).amax() > 1e-12 * a.amax().max(1.0) {
        return Err(Error::Domain("quadratic form must be symmetric".into()));
    }
    if a.clone().cholesky().is_none() {
        return Err(Error::Domain("quadratic form must be positive-definite".into()));
    }
    Ok(())
}

/// Radius where `r^deg e^{−λr²}` has dropped below `e^{−depth}`.
pub(crate) fn cutoff_radius(lambda: f64, deg: usize, depth: f64) -> f64 {
    let mut r = (depth / lambda).sqrt();
    for _ in 0..20 {
        r = ((depth + deg as f64 * (1.0 + r).ln()) / lambda).sqrt();
    }
    r
}

/// Smallest eigenvalue of a real symmetric matrix.
pub(crate) fn min_eigenvalue(a: &DMatrix<f64>) -> f64 {
    a.clone().symmetric_eigen().eigenvalues.min()
}

/// Principal branch of `log det S` for complex symmetric `S` with positive-definite
/// real part, continued from the real case through the eigenvalues.
fn log_det(s: &DMatrix<C64>) -> C64 {
    let (_, t) = s.clone().schur().unpack();
    t.diagonal().iter().map(|l| l.ln()).sum()
}

fn bilinear(x: &DVector<C64>, m: &DMatrix<C64>, y: &DVector<C64>) -> C64 {
    (x.transpose() * m * y)[(0, 0)]
}

/// `amplitude · P(x−μ) · exp(−(x−μ)ᵀA(x−μ)) · exp(2πi ω·x)`.
#[derive(Clone, Debug)]
pub struct SchwartzGaussian {
    quad: DMatrix<f64>,
    center: Vec<f64>,
    modulation: Vec<f64>,
    poly: Poly,
    amplitude: C64,
}

impl SchwartzGaussian {
    pub fn new(quad: DMatrix<f64>, center: Vec<f64>, modulation: Vec<f64>, poly: Poly, amplitude: C64) -> Result<Self> {
        check_positive_definite(&quad)?;
        let d = quad.nrows();
        if center.len() != d || modulation.len() != d || poly.dim() != d {
            return Err(Error::Dimension(format!("Gaussian data must all have dimension {d}")));
        }
        let quad = (&quad + quad.transpose()) * 0.5;
        Ok(SchwartzGaussian { quad, center, modulation, poly, amplitude })
    }

    /// `exp(−(x−μ)ᵀA(x−μ))`.
    pub fn centered(quad: DMatrix<f64>, center: Vec<f64>) -> Result<Self> {
        let d = center.len();
        Self::new(quad, center, vec![0.0; d], Poly::constant(d, C64::new(1.0, 0.0)), C64::new(1.0, 0.0))
    }

    /// `e^{−π|x|²}`, fixed by the Fourier transform.
    pub fn standard(d: usize) -> Self {
        Self::centered(DMatrix::identity(d, d) * PI, vec![0.0; d]).expect("πI is positive-definite")
    }

    pub fn dim(&self) -> usize {
        self.center.len()
    }

    pub fn quad(&self) -> &DMatrix<f64> {
        &self.quad
    }

    pub fn center(&self) -> &[f64] {
        &self.center
    }

    pub fn modulation(&self) -> &[f64] {
        &self.modulation
    }

    pub fn poly(&self) -> &Poly {
        &self.poly
    }

    pub fn amplitude(&self) -> C64 {
        self.amplitude
    }

    pub fn with_amplitude(&self, amplitude: C64) -> Self {
        SchwartzGaussian { amplitude, ..self.clone() }
    }

    pub fn with_poly(&self, poly: Poly) -> Result<Self> {
        if poly.dim() != self.dim() {
            return Err(Error::Dimension("polynomial dimension".into()));
        }
        Ok(SchwartzGaussian { poly, ..self.clone() })
    }

    pub fn is_zero(&self) -> bool {
        self.amplitude == C64::new(0.0, 0.0) || self.poly.is_zero()
    }

    fn offset(&self, x: &[f64]) -> Vec<f64> {
        x.iter().zip(&self.center).map(|(a, b)| a - b).collect()
    }

    pub fn eval(&self, x: &[f64]) -> C64 {
        let v = self.offset(x);
        let vv = DVector::from_column_slice(&v);
        let q = (vv.transpose() * &self.quad * &vv)[(0, 0)];
        self.amplitude * self.poly.eval(&v) * (-q).exp() * (2.0 * PI * I * dot(&self.modulation, x)).exp()
    }

    pub fn fourier(&self) -> SchwartzGaussian {
        let d = self.dim();
        let inv = self.quad.clone().try_inverse().expect("positive-definite");
        let a_hat = &inv * (PI * PI);
        let a_hat = (&a_hat + a_hat.transpose()) * 0.5;
        // h(t) = t^α e^{−tᵀAt} transforms to (i/2π ∂)^α of the Gaussian, and
        // ∂_i(Q e^{−uᵀA'u}) = (∂_i Q − 2(A'u)_i Q) e^{−uᵀA'u}.
        let linear: Vec<Poly> = (0..d)
            .map(|i| {
                (0..d).fold(Poly::zero(d), |acc, j| {
                    acc.add(&Poly::var(d, j).scale(C64::new(2.0 * a_hat[(i, j)], 0.0)))
                })
            })
            .collect();
        let step = |p: &Poly, i: usize| p.derivative(i).add(&p.mul(&linear[i]).scale(C64::new(-1.0, 0.0)));
        let mut q = Poly::zero(d);
        for (alpha, c) in self.poly.terms() {
            let mut term = Poly::constant(d, C64::new(1.0, 0.0));
            for (i, &e) in alpha.iter().enumerate() {
                for _ in 0..e {
                    term = step(&term, i);
                }
            }
            let order: u32 = alpha.iter().sum();
            q = q.add(&term.scale(c * (I / (2.0 * PI)).powu(order)));
        }
        let det = self.quad.determinant();
        let scale = PI.powf(d as f64 / 2.0) / det.sqrt();
        let amplitude = self.amplitude * scale * (2.0 * PI * I * dot(&self.center, &self.modulation)).exp();
        SchwartzGaussian {
            quad: a_hat,
            center: self.modulation.clone(),
            modulation: self.center.iter().map(|m| -m).collect(),
            poly: q,
            amplitude,
        }
    }

    /// `x ↦ f(−x)`.
    pub fn reflect(&self) -> SchwartzGaussian {
        SchwartzGaussian {
            quad: self.quad.clone(),
            center: self.center.iter().map(|m| -m).collect(),
            modulation: self.modulation.iter().map(|w| -w).collect(),
            poly: self.poly.reflect(),
            amplitude: self.amplitude,
        }
    }

    pub fn inverse_fourier(&self) -> SchwartzGaussian {
        self.fourier().reflect()
    }

    /// `x ↦ f(x + Δ)`.
    pub fn translate(&self, delta: &[f64]) -> SchwartzGaussian {
        SchwartzGaussian {
            center: self.center.iter().zip(delta).map(|(m, d)| m - d).collect(),
            amplitude: self.amplitude * (2.0 * PI * I * dot(&self.modulation, delta)).exp(),
            ..self.clone()
        }
    }

    pub fn conj(&self) -> SchwartzGaussian {
        SchwartzGaussian {
            modulation: self.modulation.iter().map(|w| -w).collect(),
            poly: self.poly.conj(),
            amplitude: self.amplitude.conj(),
            ..self.clone()
        }
    }

    /// Pointwise product.
    pub fn mul(&self, other: &SchwartzGaussian) -> Result<SchwartzGaussian> {
        if self.dim() != other.dim() {
            return Err(Error::Dimension("pointwise product of different dimensions".into()));
        }
        let a = &self.quad + &other.quad;
        let m1 = DVector::from_column_slice(&self.center);
        let m2 = DVector::from_column_slice(&other.center);
        let rhs = &self.quad * &m1 + &other.quad * &m2;
        let mu = a.clone().cholesky().expect("sum of positive-definite forms").solve(&rhs);
        let constant = m1.dot(&(&self.quad * &m1)) + m2.dot(&(&other.quad * &m2)) - mu.dot(&(&a * &mu));
        let s1: Vec<f64> = (&mu - &m1).iter().copied().collect();
        let s2: Vec<f64> = (&mu - &m2).iter().copied().collect();
        let poly = self.poly.shift(&s1).mul(&other.poly.shift(&s2));
        Ok(SchwartzGaussian {
            quad: a,
            center: mu.iter().copied().collect(),
            modulation: self.modulation.iter().zip(&other.modulation).map(|(a, b)| a + b).collect(),
            poly,
            amplitude: self.amplitude * other.amplitude * (-constant).exp(),
        })
    }

    /// The same function in complex-Gaussian form, when the prefactor is constant.
    pub fn to_complex(&self) -> Option<ComplexGaussian> {
        let c = self.poly.as_constant()? * self.amplitude;
        let a = self.quad.map(|x| C64::new(x, 0.0));
        let mu = DVector::from_column_slice(&self.center);
        let w = DVector::from_column_slice(&self.modulation);
        let q = (&self.quad * &mu * 2.0).map(|x| C64::new(x, 0.0)) + w.map(|x| C64::new(0.0, 2.0 * PI * x));
        let r = if c == C64::new(0.0, 0.0) { C64::new(f64::NEG_INFINITY, 0.0) } else { c.ln() } - mu.dot(&(&self.quad * &mu));
        Some(ComplexGaussian { p: a, q, r })
    }

    /// `(λ, w)` with `|f(x)| ≤ |amplitude| Σ_d w_d |x−μ|^d e^{−λ|x−μ|²}`.
    pub fn envelope(&self) -> (f64, Vec<f64>) {
        let w = self.poly.degree_weights().iter().map(|w| w * self.amplitude.norm()).collect();
        (min_eigenvalue(&self.quad), w)
    }

    /// Radius beyond which the envelope is below `e^{−46}` of its scale.
    pub fn effective_radius(&self) -> f64 {
        let (lambda, w) = self.envelope();
        cutoff_radius(lambda, w.len() - 1, 46.0)
    }

    /// `[μ − R, μ + R]` per axis.
    pub fn bounding_box(&self) -> (Vec<f64>, Vec<f64>) {
        let r = self.effective_radius();
        (self.center.iter().map(|c| c - r).collect(), self.center.iter().map(|c| c + r).collect())
    }

    pub fn evaluator(&self) -> Evaluator {
        assert!(self.dim() <= 16, "evaluator supports up to 16 dimensions");
        Evaluator {
            d: self.dim(),
            quad: self.quad.transpose().iter().copied().collect(),
            center: self.center.clone(),
            modulation: self.modulation.clone(),
            terms: self.poly.terms().iter().map(|(a, c)| (a.clone(), *c)).collect(),
            amplitude: self.amplitude,
        }
    }

    /// Squared `L²` norm by quadrature.
    pub fn l2_norm_quadrature(&self) -> Result<f64> {
        let (lo, hi) = self.bounding_box();
        let f = |x: &[f64]| C64::new(self.eval(x).norm_sqr(), 0.0);
        Ok(quad::integrate_box_checked(&f, &lo, &hi, 1e-10, 64)?.re.sqrt())
    }
}

/// Allocation-free evaluation of a [`SchwartzGaussian`] for quadrature loops.
pub struct Evaluator {
    d: usize,
    quad: Vec<f64>,
    center: Vec<f64>,
    modulation: Vec<f64>,
    terms: Vec<(Vec<u32>, C64)>,
    amplitude: C64,
}

impl Evaluator {
    pub fn eval(&self, x: &[f64]) -> C64 {
        let mut v = [0.0f64; 16];
        let v = &mut v[..self.d];
        let mut phase = 0.0;
        for i in 0..self.d {
            v[i] = x[i] - self.center[i];
            phase += self.modulation[i] * x[i];
        }
        let mut q = 0.0;
        for i in 0..self.d {
            let row = &self.quad[i * self.d..(i + 1) * self.d];
            q += v[i] * row.iter().zip(v.iter()).map(|(a, b)| a * b).sum::<f64>();
        }
        let p: C64 = self.terms.iter().map(|(a, c)| c * a.iter().zip(v.iter()).map(|(&e, &t)| t.powi(e as i32)).product::<f64>()).sum();
        self.amplitude * p * C64::from_polar((-q).exp(), 2.0 * PI * phase)
    }
}

/// `exp(−xᵀPx + qᵀx + r)` with `P` complex symmetric and `Re P` positive-definite.
#[derive(Clone, Debug)]
pub struct ComplexGaussian {
    p: DMatrix<C64>,
    q: DVector<C64>,
    r: C64,
}

impl ComplexGaussian {
    pub fn new(p: DMatrix<C64>, q: DVector<C64>, r: C64) -> Result<Self> {
        if !p.is_square() || q.len() != p.nrows() {
            return Err(Error::Dimension("complex Gaussian shapes".into()));
        }
        let g = ComplexGaussian { p: (&p + p.transpose()) * C64::new(0.5, 0.0), q, r };
        check_positive_definite(&g.real_part())?;
        Ok(g)
    }

    pub fn dim(&self) -> usize {
        self.q.len()
    }

    pub fn p(&self) -> &DMatrix<C64> {
        &self.p
    }

    pub fn q(&self) -> &DVector<C64> {
        &self.q
    }

    pub fn r(&self) -> C64 {
        self.r
    }

    pub fn is_zero(&self) -> bool {
        self.r.re == f64::NEG_INFINITY
    }

    fn real_part(&self) -> DMatrix<f64> {
        self.p.map(|z| z.re)
    }

    /// Decay rate `λ_min(Re P)`.
    pub fn decay_rate(&self) -> f64 {
        min_eigenvalue(&self.real_part())
    }

    pub fn log_eval(&self, x: &[f64]) -> C64 {
        let v = DVector::from_iterator(x.len(), x.iter().map(|&t| C64::new(t, 0.0)));
        -bilinear(&v, &self.p, &v) + (self.q.transpose() * &v)[(0, 0)] + self.r
    }

    pub fn eval(&self, x: &[f64]) -> C64 {
        if self.is_zero() {
            return C64::new(0.0, 0.0);
        }
        self.log_eval(x).exp()
    }

    /// Maximiser of `|f|` over real `x` and `log sup|f|`.
    pub fn peak(&self) -> (Vec<f64>, f64) {
        let re = self.real_part();
        let b = self.q.map(|z| z.re);
        let x = re.cholesky().expect("positive-definite").solve(&b) * 0.5;
        let log_sup = self.r.re + 0.5 * b.dot(&x);
        (x.iter().copied().collect(), log_sup)
    }

    pub fn fourier(&self) -> Result<ComplexGaussian> {
        let d = self.dim() as f64;
        let inv = self.p.clone().try_inverse().ok_or_else(|| Error::Domain("singular quadratic form".into()))?;
        let p = &inv * C64::new(PI * PI, 0.0);
        let q = &inv * &self.q * (-PI * I);
        let r = self.r + 0.25 * bilinear(&self.q, &inv, &self.q) + 0.5 * d * PI.ln() - 0.5 * log_det(&self.p);
        ComplexGaussian::new(p, q, r)
    }

    pub fn reflect(&self) -> ComplexGaussian {
        ComplexGaussian { q: -&self.q, ..self.clone() }
    }

    pub fn inverse_fourier(&self) -> Result<ComplexGaussian> {
        Ok(self.fourier()?.reflect())
    }

    /// `x ↦ f(x + Δ)`.
    pub fn translate(&self, delta: &[f64]) -> ComplexGaussian {
        let dv = DVector::from_iterator(delta.len(), delta.iter().map(|&t| C64::new(t, 0.0)));
        let pd = &self.p * &dv;
        ComplexGaussian {
            p: self.p.clone(),
            q: &self.q - &pd * C64::new(2.0, 0.0),
            r: self.r - dv.dot(&pd) + self.q.dot(&dv),
        }
    }

    /// `log ‖f‖₂`.
    pub fn log_l2_norm(&self) -> f64 {
        if self.is_zero() {
            return f64::NEG_INFINITY;
        }
        let d = self.dim() as f64;
        let m = self.real_part() * 2.0;
        let b = self.q.map(|z| 2.0 * z.re);
        let chol = m.clone().cholesky().expect("positive-definite");
        let log_det: f64 = chol.l().diagonal().iter().map(|x| 2.0 * x.ln()).sum();
        let quad = b.dot(&chol.solve(&b));
        0.5 * (2.0 * self.r.re + 0.5 * d * PI.ln() - 0.5 * log_det + 0.25 * quad)
    }

    pub fn l2_norm(&self) -> f64 {
        self.log_l2_norm().exp()
    }
}

/// Moyal product in Fourier space,
/// `𝓕(f⋆g)(x) = ∫ 𝓕f(x−y) 𝓕g(y) e^{πi y·Θx} dy`, evaluated in closed form.
pub fn moyal_fourier(f_hat: &ComplexGaussian, g_hat: &ComplexGaussian, theta: &DMatrix<f64>) -> Result<ComplexGaussian> {
    let d = f_hat.dim();
    if g_hat.dim() != d || theta.nrows() != d || theta.ncols() != d {
        return Err(Error::Dimension("Moyal product operands".into()));
    }
    if f_hat.is_zero() || g_hat.is_zero() {
        return Ok(ComplexGaussian { r: C64::new(f64::NEG_INFINITY, 0.0), ..f_hat.clone() });
    }
    // Exponent: −yᵀSy + yᵀ(Bx + c) − xᵀP_F x + q_Fᵀx + r_F + r_G.
    let s = &f_hat.p + &g_hat.p;
    let b = &f_hat.p * C64::new(2.0, 0.0) + theta.map(|t| C64::new(0.0, PI * t));
    let c = &g_hat.q - &f_hat.q;
    let s_inv = s.clone().try_inverse().ok_or_else(|| Error::Domain("singular Moyal form".into()))?;
    let bt_s = b.transpose() * &s_inv;
    let p = &f_hat.p - (&bt_s * &b) * C64::new(0.25, 0.0);
    let q = &f_hat.q + (&bt_s * &c) * C64::new(0.5, 0.0);
    let r = f_hat.r + g_hat.r + 0.25 * bilinear(&c, &s_inv, &c) + 0.5 * d as f64 * PI.ln() - 0.5 * log_det(&s);
    ComplexGaussian::new(p, q, r).map_err(|_| Error::Numerics {
        message: "Moyal product left the Gaussian family".into(),
        residual: f64::NAN,
    })
}

/// `f ⋆ g` in position space for constant-prefactor Gaussians.
pub fn moyal_product(f: &ComplexGaussian, g: &ComplexGaussian, theta: &DMatrix<f64>) -> Result<ComplexGaussian> {
    moyal_fourier(&f.fourier()?, &g.fourier()?, theta)?.inverse_fourier()
}

/// `𝓕(f⋆g)(x)` by quadrature over `y`, from the transforms of `f` and `g`.
pub fn moyal_fourier_quadrature(
    f_hat: &SchwartzGaussian,
    g_hat: &SchwartzGaussian,
    theta: &DMatrix<f64>,
    x: &[f64],
) -> Result<C64> {
    let d = x.len();
    // y must sit near the centre of 𝓕g and x − y near the centre of 𝓕f.
    let (rf, rg) = (f_hat.effective_radius(), g_hat.effective_radius());
    let mut lo = vec![0.0; d];
    let mut hi = vec![0.0; d];
    for i in 0..d {
        let cf = x[i] - f_hat.center()[i];
        lo[i] = (g_hat.center()[i] - rg).max(cf - rf);
        hi[i] = (g_hat.center()[i] + rg).min(cf + rf);
        if lo[i] >= hi[i] {
            return Ok(C64::new(0.0, 0.0));
        }
    }
    let tx = theta * DVector::from_column_slice(x);
    let integrand = |y: &[f64]| {
        let xy: Vec<f64> = x.iter().zip(y).map(|(a, b)| a - b).collect();
        f_hat.eval(&xy) * g_hat.eval(y) * (PI * I * dot(y, tx.as_slice())).exp()
    };
    quad::integrate_box_checked(&integrand, &lo, &hi, 1e-10, 64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quad::integrate_box_checked;

    fn ft_quadrature(f: &SchwartzGaussian, u: &[f64]) -> C64 {
        let (lo, hi) = f.bounding_box();
        let g = |x: &[f64]| f.eval(x) * (-2.0 * PI * I * dot(x, u)).exp();
        integrate_box_checked(&g, &lo, &hi, 1e-11, 128).unwrap()
    }

    fn sample() -> SchwartzGaussian {
        let a = DMatrix::from_row_slice(2, 2, &[1.3, 0.4, 0.4, 0.9]);
        let x = Poly::var(2, 0);
        let y = Poly::var(2, 1);
        let p = x.mul(&y).add(&x.pow(2).scale(C64::new(0.0, 0.5))).add(&Poly::constant(2, C64::new(0.3, -0.2)));
        SchwartzGaussian::new(a, vec![0.4, -0.7], vec![0.25, 0.1], p, C64::new(1.2, 0.3)).unwrap()
    }

    #[test]
    fn standard_gaussian_is_fixed() {
        let f = SchwartzGaussian::standard(2);
        let g = f.fourier();
        for x in [[0.0, 0.0], [0.3, -1.1], [2.0, 0.5]] {
            assert!((f.eval(&x) - g.eval(&x)).norm() < 1e-15);
        }
    }

    #[test]
    fn fourier_matches_quadrature() {
        let shifted = SchwartzGaussian::centered(DMatrix::identity(2, 2) * PI, vec![0.5, -0.25]).unwrap();
        for f in [shifted, sample()] {
            let g = f.fourier();
            assert_eq!(g.poly().degree(), f.poly().degree());
            for u in [[0.0, 0.0], [0.3, 0.2], [-0.7, 0.4], [1.1, -0.9], [0.05, 1.4]] {
                let exact = g.eval(&u);
                let numeric = ft_quadrature(&f, &u);
                assert!((exact - numeric).norm() < 1e-9, "{u:?}: {exact} vs {numeric}");
            }
        }
    }

    #[test]
    fn inverse_fourier_round_trip() {
        let f = sample();
        let g = f.fourier().inverse_fourier();
        for x in [[0.1, 0.2], [-1.0, 0.4], [0.9, -1.3]] {
            assert!((f.eval(&x) - g.eval(&x)).norm() < 1e-12);
        }
    }

    #[test]
    fn translation_and_product() {
        let f = sample();
        let delta = [0.6, -0.3];
        let t = f.translate(&delta);
        let g = SchwartzGaussian::centered(DMatrix::from_row_slice(2, 2, &[0.7, -0.1, -0.1, 1.6]), vec![-0.2, 0.3]).unwrap();
        let prod = f.mul(&g).unwrap();
        for x in [[0.1, 0.2], [-1.0, 0.4], [0.9, -1.3]] {
            assert!((t.eval(&x) - f.eval(&[x[0] + delta[0], x[1] + delta[1]])).norm() < 1e-13);
            assert!((prod.eval(&x) - f.eval(&x) * g.eval(&x)).norm() < 1e-13);
        }
    }

    #[test]
    fn complex_form_and_its_transform() {
        let f = SchwartzGaussian::new(
            DMatrix::from_row_slice(2, 2, &[1.3, 0.4, 0.4, 0.9]),
            vec![0.4, -0.7],
            vec![0.25, 0.1],
            Poly::constant(2, C64::new(1.0, 0.0)),
            C64::new(0.8, -0.6),
        )
        .unwrap();
        let c = f.to_complex().unwrap();
        let ch = c.fourier().unwrap();
        let fh = f.fourier();
        for x in [[0.1, 0.2], [-1.0, 0.4], [0.9, -1.3]] {
            assert!((c.eval(&x) - f.eval(&x)).norm() < 1e-14);
            assert!((ch.eval(&x) - fh.eval(&x)).norm() < 1e-13);
        }
        let quad = f.l2_norm_quadrature().unwrap();
        assert!((c.l2_norm() - quad).abs() < 1e-10 * quad);
        let (x, log_sup) = c.peak();
        assert!((c.eval(&x).norm().ln() - log_sup).abs() < 1e-12);
    }

    #[test]
    fn commutative_moyal_product_is_pointwise() {
        let f = SchwartzGaussian::centered(DMatrix::from_row_slice(2, 2, &[1.3, 0.4, 0.4, 0.9]), vec![0.4, -0.7]).unwrap();
        let g = SchwartzGaussian::centered(DMatrix::identity(2, 2) * 2.0, vec![-0.2, 0.1]).unwrap();
        let h = moyal_product(&f.to_complex().unwrap(), &g.to_complex().unwrap(), &DMatrix::zeros(2, 2)).unwrap();
        for x in [[0.1, 0.2], [-1.0, 0.4], [0.9, -1.3]] {
            assert!((h.eval(&x) - f.eval(&x) * g.eval(&x)).norm() < 1e-13);
        }
    }

    #[test]
    fn closed_form_moyal_product_matches_quadrature() {
        let theta = DMatrix::from_row_slice(2, 2, &[0.0, 2.0, -2.0, 0.0]);
        let f = SchwartzGaussian::centered(DMatrix::from_row_slice(2, 2, &[1.3, 0.4, 0.4, 0.9]), vec![0.4, -0.7]).unwrap();
        let g = SchwartzGaussian::new(
            DMatrix::identity(2, 2) * 2.0,
            vec![-0.2, 0.1],
            vec![0.3, 0.0],
            Poly::constant(2, C64::new(1.0, 0.0)),
            C64::new(0.0, 1.0),
        )
        .unwrap();
        let h_hat = moyal_fourier(&f.to_complex().unwrap().fourier().unwrap(), &g.to_complex().unwrap().fourier().unwrap(), &theta).unwrap();
        for x in [[0.0, 0.0], [0.4, -0.3], [-0.5, 0.8]] {
            let numeric = moyal_fourier_quadrature(&f.fourier(), &g.fourier(), &theta, &x).unwrap();
            assert!((h_hat.eval(&x) - numeric).norm() < 1e-9, "{x:?}");
        }
    }
}
