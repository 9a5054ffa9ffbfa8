//! Sparse multivariate polynomials with complex coefficients.

use std::collections::BTreeMap;

use num_complex::Complex64 as C64;

#[derive(Clone, Debug, PartialEq)]
pub struct Poly {
    dim: usize,
    terms: BTreeMap<Vec<u32>, C64>,
}

fn binomial(n: u32, k: u32) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

impl Poly {
    pub fn zero(dim: usize) -> Self {
        Poly { dim, terms: BTreeMap::new() }
    }

    pub fn constant(dim: usize, c: C64) -> Self {
        let mut p = Self::zero(dim);
        p.add_term(vec![0; dim], c);
        p
    }

    /// The coordinate `x_i`.
    pub fn var(dim: usize, i: usize) -> Self {
        let mut alpha = vec![0; dim];
        alpha[i] = 1;
        let mut p = Self::zero(dim);
        p.add_term(alpha, C64::new(1.0, 0.0));
        p
    }

    pub fn from_terms(dim: usize, terms: impl IntoIterator<Item = (Vec<u32>, C64)>) -> Self {
        let mut p = Self::zero(dim);
        for (a, c) in terms {
            assert_eq!(a.len(), dim, "multi-index length");
            p.add_term(a, c);
        }
        p
    }

    fn add_term(&mut self, alpha: Vec<u32>, c: C64) {
        let e = self.terms.entry(alpha.clone()).or_insert(C64::new(0.0, 0.0));
        *e += c;
        if *e == C64::new(0.0, 0.0) {
            self.terms.remove(&alpha);
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn terms(&self) -> &BTreeMap<Vec<u32>, C64> {
        &self.terms
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn degree(&self) -> u32 {
        self.terms.keys().map(|a| a.iter().sum()).max().unwrap_or(0)
    }

    /// `Some(c)` when the polynomial is the constant `c`.
    pub fn as_constant(&self) -> Option<C64> {
        match self.terms.len() {
            0 => Some(C64::new(0.0, 0.0)),
            1 => self.terms.get(&vec![0; self.dim]).copied(),
            _ => None,
        }
    }

    pub fn scale(&self, s: C64) -> Self {
        Poly::from_terms(self.dim, self.terms.iter().map(|(a, c)| (a.clone(), c * s)))
    }

    pub fn conj(&self) -> Self {
        Poly::from_terms(self.dim, self.terms.iter().map(|(a, c)| (a.clone(), c.conj())))
    }

    pub fn add(&self, other: &Self) -> Self {
        let mut p = self.clone();
        for (a, c) in &other.terms {
            p.add_term(a.clone(), *c);
        }
        p
    }

    pub fn mul(&self, other: &Self) -> Self {
        let mut p = Self::zero(self.dim);
        for (a, x) in &self.terms {
            for (b, y) in &other.terms {
                p.add_term(a.iter().zip(b).map(|(i, j)| i + j).collect(), x * y);
            }
        }
        p
    }

    pub fn pow(&self, k: u32) -> Self {
        (0..k).fold(Self::constant(self.dim, C64::new(1.0, 0.0)), |acc, _| acc.mul(self))
    }

    pub fn derivative(&self, i: usize) -> Self {
        let mut p = Self::zero(self.dim);
        for (a, c) in &self.terms {
            if a[i] > 0 {
                let mut b = a.clone();
                b[i] -= 1;
                p.add_term(b, c * a[i] as f64);
            }
        }
        p
    }

    /// `v ↦ P(v + s)`.
    pub fn shift(&self, s: &[f64]) -> Self {
        let mut p = Self::zero(self.dim);
        for (a, c) in &self.terms {
            // Π_i (v_i + s_i)^{a_i} = Π_i Σ_j C(a_i, j) s_i^{a_i−j} v_i^j
            let mut partial: Vec<(Vec<u32>, C64)> = vec![(vec![0; self.dim], *c)];
            for i in 0..self.dim {
                let mut next = Vec::new();
                for (b, x) in &partial {
                    for j in 0..=a[i] {
                        let mut nb = b.clone();
                        nb[i] = j;
                        next.push((nb, x * binomial(a[i], j) * s[i].powi((a[i] - j) as i32)));
                    }
                }
                partial = next;
            }
            for (b, x) in partial {
                p.add_term(b, x);
            }
        }
        p
    }

    /// `v ↦ P(−v)`.
    pub fn reflect(&self) -> Self {
        Poly::from_terms(
            self.dim,
            self.terms.iter().map(|(a, c)| (a.clone(), if a.iter().sum::<u32>() % 2 == 1 { -c } else { *c })),
        )
    }

    pub fn eval(&self, x: &[f64]) -> C64 {
        self.terms.iter().map(|(a, c)| c * a.iter().zip(x).map(|(&e, &v)| v.powi(e as i32)).product::<f64>()).sum()
    }

    /// `w_d = Σ_{|α|=d} |p_α|`, so that `|P(v)| ≤ Σ_d w_d ‖v‖^d`.
    pub fn degree_weights(&self) -> Vec<f64> {
        let mut w = vec![0.0; self.degree() as usize + 1];
        for (a, c) in &self.terms {
            w[a.iter().sum::<u32>() as usize] += c.norm();
        }
        w
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shift_and_reflect_agree_with_evaluation() {
        let x = Poly::var(2, 0);
        let y = Poly::var(2, 1);
        let p = x.pow(3).mul(&y).add(&y.pow(2).scale(C64::new(0.0, 2.0))).add(&Poly::constant(2, C64::new(1.5, 0.0)));
        let s = [0.7, -1.3];
        let v = [0.4, 2.1];
        let shifted = p.shift(&s).eval(&v);
        assert!((shifted - p.eval(&[v[0] + s[0], v[1] + s[1]])).norm() < 1e-12);
        assert!((p.reflect().eval(&v) - p.eval(&[-v[0], -v[1]])).norm() < 1e-12);
        assert_eq!(p.degree(), 4);
        let d = p.derivative(0).eval(&v);
        assert!((d - C64::new(3.0 * v[0] * v[0] * v[1], 0.0)).norm() < 1e-12);
    }
}
