//! Lattice points of ℤⁿ, skew deformation matrices and the phase form `k·Θl`.
//!
//! Rational entries of Θ are kept exact: the phase argument is reduced modulo 2
//! in integer arithmetic before exponentiation, so relations such as
//! `u_j u_k = e^{-2πiθ_jk} u_k u_j` hold to the last bit for large indices too.

use std::fmt;
use std::ops::{Add, Neg, Sub};
use std::str::FromStr;

use num_complex::Complex64 as C64;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use smallvec::SmallVec;

use crate::error::{Error, Result};

/// A point of ℤⁿ. Ordered lexicographically.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct LatticePoint(SmallVec<[i64; 4]>);

impl LatticePoint {
    pub fn new(coords: &[i64]) -> Self {
        LatticePoint(SmallVec::from_slice(coords))
    }

    pub fn zero(n: usize) -> Self {
        LatticePoint(SmallVec::from_elem(0, n))
    }

    /// The `j`-th standard basis vector.
    pub fn unit(n: usize, j: usize) -> Self {
        let mut p = Self::zero(n);
        p.0[j] = 1;
        p
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn coords(&self) -> &[i64] {
        &self.0
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|&c| c == 0)
    }

    /// Euclidean norm.
    pub fn norm(&self) -> f64 {
        self.0.iter().map(|&c| (c as f64) * (c as f64)).sum::<f64>().sqrt()
    }

    /// ℓ∞ norm, the radius of the smallest window containing the point.
    pub fn linf(&self) -> u64 {
        self.0.iter().map(|c| c.unsigned_abs()).max().unwrap_or(0)
    }

    /// Componentwise product with a positive multiplicity vector, `p ↦ Dp`.
    pub fn dilate(&self, mult: &[u64]) -> Self {
        LatticePoint(self.0.iter().zip(mult).map(|(&c, &k)| c * k as i64).collect())
    }

    pub fn checked_add(&self, other: &Self) -> Result<Self> {
        check_dims(self.dim(), other.dim())?;
        Ok(self + other)
    }
}

fn check_dims(a: usize, b: usize) -> Result<()> {
    if a == b {
        Ok(())
    } else {
        Err(Error::Dimension(format!("lattice dimensions {a} and {b} differ")))
    }
}

impl fmt::Debug for LatticePoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}", self.0.as_slice())
    }
}

impl Add for &LatticePoint {
    type Output = LatticePoint;
    fn add(self, rhs: &LatticePoint) -> LatticePoint {
        assert_eq!(self.dim(), rhs.dim(), "lattice dimension mismatch");
        LatticePoint(self.0.iter().zip(&rhs.0).map(|(a, b)| a + b).collect())
    }
}

impl Sub for &LatticePoint {
    type Output = LatticePoint;
    fn sub(self, rhs: &LatticePoint) -> LatticePoint {
        assert_eq!(self.dim(), rhs.dim(), "lattice dimension mismatch");
        LatticePoint(self.0.iter().zip(&rhs.0).map(|(a, b)| a - b).collect())
    }
}

impl Neg for &LatticePoint {
    type Output = LatticePoint;
    fn neg(self) -> LatticePoint {
        LatticePoint(self.0.iter().map(|a| -a).collect())
    }
}

impl From<Vec<i64>> for LatticePoint {
    fn from(v: Vec<i64>) -> Self {
        LatticePoint(SmallVec::from_vec(v))
    }
}

impl Serialize for LatticePoint {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.0.as_slice().serialize(s)
    }
}

impl<'de> Deserialize<'de> for LatticePoint {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        Ok(Vec::<i64>::deserialize(d)?.into())
    }
}

/// Enumerates the `(2r+1)ⁿ` points of the ℓ∞ ball of radius `r`, lexicographically.
pub fn window_points(radius: u64, n: usize) -> WindowPoints {
    WindowPoints { radius: radius as i64, current: Some(vec![-(radius as i64); n]) }
}

pub struct WindowPoints {
    radius: i64,
    current: Option<Vec<i64>>,
}

impl Iterator for WindowPoints {
    type Item = LatticePoint;

    fn next(&mut self) -> Option<LatticePoint> {
        let cur = self.current.as_mut()?;
        let out = LatticePoint::new(cur);
        let mut i = cur.len();
        loop {
            if i == 0 {
                self.current = None;
                break;
            }
            i -= 1;
            if cur[i] < self.radius {
                cur[i] += 1;
                break;
            }
            cur[i] = -self.radius;
        }
        Some(out)
    }
}

/// An ℓ∞ hypercube of lattice points centred at the origin.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SupportWindow {
    pub radius: u64,
    pub n: usize,
}

impl SupportWindow {
    pub fn new(radius: u64, n: usize) -> Self {
        SupportWindow { radius, n }
    }

    pub fn contains(&self, k: &LatticePoint) -> bool {
        k.dim() == self.n && k.linf() <= self.radius
    }

    pub fn len(&self) -> usize {
        (2 * self.radius as usize + 1).pow(self.n as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn points(&self) -> WindowPoints {
        window_points(self.radius, self.n)
    }

    /// Dense index of a point inside the window (mixed radix, last coordinate fastest).
    pub fn index_of(&self, k: &[i64]) -> Option<usize> {
        let r = self.radius as i64;
        let side = 2 * r + 1;
        let mut idx = 0i64;
        for &c in k {
            if c < -r || c > r {
                return None;
            }
            idx = idx * side + (c + r);
        }
        Some(idx as usize)
    }
}

/// One entry of a deformation matrix: exact rational or floating point.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ThetaEntry {
    Rational { num: i64, den: i64 },
    Real(f64),
}

fn gcd(a: i128, b: i128) -> i128 {
    let (mut a, mut b) = (a.abs(), b.abs());
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

impl ThetaEntry {
    pub const ZERO: ThetaEntry = ThetaEntry::Rational { num: 0, den: 1 };

    pub fn rational(num: i64, den: i64) -> Result<Self> {
        if den == 0 {
            return Err(Error::Domain("zero denominator".into()));
        }
        Self::from_i128(num as i128, den as i128)
    }

    fn from_i128(num: i128, den: i128) -> Result<Self> {
        let g = gcd(num, den).max(1);
        let s = if den < 0 { -1 } else { 1 };
        let (n, d) = (s * num / g, s * den / g);
        match (i64::try_from(n), i64::try_from(d)) {
            (Ok(num), Ok(den)) => Ok(ThetaEntry::Rational { num, den }),
            _ => Err(Error::Domain(format!("rational {num}/{den} overflows 64 bits"))),
        }
    }

    pub fn value(&self) -> f64 {
        match *self {
            ThetaEntry::Rational { num, den } => num as f64 / den as f64,
            ThetaEntry::Real(x) => x,
        }
    }

    pub fn is_exact(&self) -> bool {
        matches!(self, ThetaEntry::Rational { .. })
    }

    pub fn neg(&self) -> ThetaEntry {
        match *self {
            ThetaEntry::Rational { num, den } => ThetaEntry::Rational { num: -num, den },
            ThetaEntry::Real(x) => ThetaEntry::Real(-x),
        }
    }

    /// `self · num / den`, exact when `self` is rational.
    pub fn mul_ratio(&self, num: i64, den: i64) -> Result<ThetaEntry> {
        if den == 0 {
            return Err(Error::Domain("zero denominator".into()));
        }
        match *self {
            ThetaEntry::Rational { num: a, den: b } => {
                Self::from_i128(a as i128 * num as i128, b as i128 * den as i128)
            }
            ThetaEntry::Real(x) => Ok(ThetaEntry::Real(x * num as f64 / den as f64)),
        }
    }

    /// Distance from `self − other·factor` to the nearest integer, zero when exact.
    pub fn congruence_defect(&self, other: &ThetaEntry, factor: i64) -> f64 {
        match (*self, *other) {
            (ThetaEntry::Rational { num: a, den: b }, ThetaEntry::Rational { num: c, den: d }) => {
                // a/b − c·f/d = (a d − c f b) / (b d)
                let n = a as i128 * d as i128 - c as i128 * factor as i128 * b as i128;
                let m = b as i128 * d as i128;
                let r = n.rem_euclid(m);
                (r.min(m - r)) as f64 / m as f64
            }
            _ => {
                let x = self.value() - other.value() * factor as f64;
                (x - x.round()).abs()
            }
        }
    }
}

impl fmt::Display for ThetaEntry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            ThetaEntry::Rational { num, den: 1 } => write!(f, "{num}"),
            ThetaEntry::Rational { num, den } => write!(f, "{num}/{den}"),
            ThetaEntry::Real(x) => write!(f, "{x}"),
        }
    }
}

impl FromStr for ThetaEntry {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if let Some((p, q)) = s.split_once('/') {
            let num = p.trim().parse::<i64>();
            let den = q.trim().parse::<i64>();
            return match (num, den) {
                (Ok(n), Ok(d)) => ThetaEntry::rational(n, d),
                _ => Err(Error::Config(format!("cannot parse rational '{s}'"))),
            };
        }
        if let Ok(n) = s.parse::<i64>() {
            return Ok(ThetaEntry::Rational { num: n, den: 1 });
        }
        match s.parse::<f64>() {
            Ok(x) if x.is_finite() => Ok(ThetaEntry::Real(x)),
            _ => Err(Error::Config(format!("cannot parse deformation entry '{s}'"))),
        }
    }
}

impl Serialize for ThetaEntry {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

#[derive(Deserialize)]
#[serde(untagged)]
enum RawEntry {
    Int(i64),
    Float(f64),
    Text(String),
}

impl<'de> Deserialize<'de> for ThetaEntry {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        match RawEntry::deserialize(d)? {
            RawEntry::Int(n) => Ok(ThetaEntry::Rational { num: n, den: 1 }),
            RawEntry::Float(x) if x.is_finite() => Ok(ThetaEntry::Real(x)),
            RawEntry::Float(x) => Err(serde::de::Error::custom(format!("non-finite entry {x}"))),
            RawEntry::Text(s) => s.parse().map_err(serde::de::Error::custom),
        }
    }
}

/// Largest `2·denominator` for which the root-of-unity table is precomputed.
const TABLE_LIMIT: i64 = 1 << 20;

/// A real skew-symmetric n×n matrix Θ.
#[derive(Clone)]
pub struct SkewMatrix {
    n: usize,
    entries: Vec<ThetaEntry>,
    values: Vec<f64>,
    // Rational part as integers over a common denominator.
    denom: i64,
    numer: Vec<i64>,
    // Floating-point part, zero where the entry is rational.
    real: Vec<f64>,
    has_real: bool,
    // e^{-πi t/denom} for t in 0..2·denom.
    table: Vec<C64>,
}

impl PartialEq for SkewMatrix {
    fn eq(&self, other: &Self) -> bool {
        self.n == other.n && self.entries == other.entries
    }
}

impl fmt::Debug for SkewMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let rows: Vec<Vec<String>> = (0..self.n)
            .map(|i| (0..self.n).map(|j| self.entries[i * self.n + j].to_string()).collect())
            .collect();
        write!(f, "SkewMatrix({rows:?})")
    }
}

impl SkewMatrix {
    /// Builds Θ from row-major entries, rejecting anything that is not skew.
    pub fn new(n: usize, entries: Vec<ThetaEntry>) -> Result<Self> {
        if n == 0 || entries.len() != n * n {
            return Err(Error::Dimension(format!(
                "expected {} entries for n = {n}, got {}",
                n * n,
                entries.len()
            )));
        }
        for i in 0..n {
            for j in 0..n {
                let (a, b) = (entries[i * n + j], entries[j * n + i]);
                let skew = match (a, b) {
                    (ThetaEntry::Rational { .. }, ThetaEntry::Rational { .. }) => a == b.neg(),
                    _ => a.value() == -b.value(),
                };
                if !skew {
                    return Err(Error::Dimension(format!(
                        "matrix is not skew-symmetric at ({i},{j}): {a} vs {b}"
                    )));
                }
            }
        }
        let mut denom: i128 = 1;
        for e in &entries {
            if let ThetaEntry::Rational { den, .. } = e {
                let d = *den as i128;
                denom = denom / gcd(denom, d) * d;
                if denom > i64::MAX as i128 / 4 {
                    return Err(Error::Domain("common denominator of Θ is too large".into()));
                }
            }
        }
        let denom = denom as i64;
        let mut numer = vec![0i64; n * n];
        let mut real = vec![0.0; n * n];
        let mut has_real = false;
        for (idx, e) in entries.iter().enumerate() {
            match *e {
                ThetaEntry::Rational { num, den } => numer[idx] = num * (denom / den),
                ThetaEntry::Real(x) => {
                    real[idx] = x;
                    has_real |= x != 0.0;
                }
            }
        }
        let table = if 2 * denom <= TABLE_LIMIT {
            (0..2 * denom)
                .map(|t| C64::cis(-std::f64::consts::PI * t as f64 / denom as f64))
                .collect()
        } else {
            Vec::new()
        };
        let values = entries.iter().map(ThetaEntry::value).collect();
        Ok(SkewMatrix { n, entries, values, denom, numer, real, has_real, table })
    }

    pub fn from_f64(n: usize, values: &[f64]) -> Result<Self> {
        Self::new(n, values.iter().map(|&x| ThetaEntry::Real(x)).collect())
    }

    pub fn zero(n: usize) -> Self {
        Self::new(n, vec![ThetaEntry::ZERO; n * n]).expect("zero matrix is skew")
    }

    /// The 2×2 matrix `[[0, θ], [−θ, 0]]`.
    pub fn planar(theta: ThetaEntry) -> Self {
        Self::symplectic(1, theta)
    }

    /// `θJ` on ℝ²ᴺ with `J = [[0, I], [−I, 0]]`.
    pub fn symplectic(n_half: usize, theta: ThetaEntry) -> Self {
        let n = 2 * n_half;
        let mut e = vec![ThetaEntry::ZERO; n * n];
        for i in 0..n_half {
            e[i * n + i + n_half] = theta;
            e[(i + n_half) * n + i] = theta.neg();
        }
        Self::new(n, e).expect("θJ is skew")
    }

    /// `Θ · num / den`, staying exact for rational entries.
    pub fn scaled(&self, num: i64, den: i64) -> Result<Self> {
        let e = self.entries.iter().map(|x| x.mul_ratio(num, den)).collect::<Result<_>>()?;
        Self::new(self.n, e)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn entry(&self, i: usize, j: usize) -> ThetaEntry {
        self.entries[i * self.n + j]
    }

    pub fn value(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.n + j]
    }

    pub fn entries(&self) -> &[ThetaEntry] {
        &self.entries
    }

    pub fn is_zero(&self) -> bool {
        self.values.iter().all(|&x| x == 0.0)
    }

    pub fn is_exact(&self) -> bool {
        self.entries.iter().all(ThetaEntry::is_exact)
    }

    pub fn rows(&self) -> Vec<Vec<ThetaEntry>> {
        self.entries.chunks(self.n).map(<[ThetaEntry]>::to_vec).collect()
    }

    pub fn from_rows(rows: Vec<Vec<ThetaEntry>>) -> Result<Self> {
        let n = rows.len();
        if rows.iter().any(|r| r.len() != n) {
            return Err(Error::Dimension("deformation matrix is not square".into()));
        }
        Self::new(n, rows.into_iter().flatten().collect())
    }

    /// The bilinear form `k·(Θl)` as a real number.
    pub fn phase_form(&self, k: &LatticePoint, l: &LatticePoint) -> Result<f64> {
        check_dims(self.n, k.dim())?;
        check_dims(self.n, l.dim())?;
        let mut x = 0.0;
        for i in 0..self.n {
            for j in 0..self.n {
                x += k.0[i] as f64 * self.values[i * self.n + j] * l.0[j] as f64;
            }
        }
        Ok(x)
    }

    /// `e^{-πi k·Θl}`, with the argument reduced mod 2 before exponentiation.
    pub fn phase(&self, k: &LatticePoint, l: &LatticePoint) -> Result<C64> {
        check_dims(self.n, k.dim())?;
        check_dims(self.n, l.dim())?;
        Ok(self.row(k.coords()).phase(l.coords()))
    }

    /// Precomputes `kᵀΘ` so that many phases against the same `k` are cheap.
    pub fn row(&self, k: &[i64]) -> PhaseRow<'_> {
        let n = self.n;
        let mut numer: SmallVec<[i128; 4]> = SmallVec::from_elem(0, n);
        let mut real: SmallVec<[f64; 4]> = SmallVec::from_elem(0.0, n);
        for i in 0..n {
            if k[i] == 0 {
                continue;
            }
            for j in 0..n {
                numer[j] += k[i] as i128 * self.numer[i * n + j] as i128;
                if self.has_real {
                    real[j] += k[i] as f64 * self.real[i * n + j];
                }
            }
        }
        PhaseRow { skew: self, numer, real }
    }
}

/// The linear functional `l ↦ e^{-πi k·Θl}` for a fixed `k`.
pub struct PhaseRow<'a> {
    skew: &'a SkewMatrix,
    numer: SmallVec<[i128; 4]>,
    real: SmallVec<[f64; 4]>,
}

impl PhaseRow<'_> {
    /// Reduced argument `x ∈ [0, 2)` of `e^{-πi x}`.
    pub fn argument(&self, l: &[i64]) -> f64 {
        let two_d = 2 * self.skew.denom as i128;
        let t: i128 = self.numer.iter().zip(l).map(|(a, &b)| a * b as i128).sum();
        let mut x = t.rem_euclid(two_d) as f64 / self.skew.denom as f64;
        if self.skew.has_real {
            x += self.real.iter().zip(l).map(|(a, &b)| a * b as f64).sum::<f64>();
            x = x.rem_euclid(2.0);
        }
        x
    }

    pub fn phase(&self, l: &[i64]) -> C64 {
        let sk = self.skew;
        let two_d = 2 * sk.denom as i128;
        let t = self.numer.iter().zip(l).map(|(a, &b)| a * b as i128).sum::<i128>().rem_euclid(two_d);
        let exact = if sk.table.is_empty() {
            C64::cis(-std::f64::consts::PI * t as f64 / sk.denom as f64)
        } else {
            sk.table[t as usize]
        };
        if !sk.has_real {
            return exact;
        }
        let x = self.real.iter().zip(l).map(|(a, &b)| a * b as f64).sum::<f64>().rem_euclid(2.0);
        exact * C64::cis(-std::f64::consts::PI * x)
    }
}

impl Serialize for SkewMatrix {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.rows().serialize(s)
    }
}

impl<'de> Deserialize<'de> for SkewMatrix {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let rows = Vec::<Vec<ThetaEntry>>::deserialize(d)?;
        SkewMatrix::from_rows(rows).map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn third() -> SkewMatrix {
        SkewMatrix::planar(ThetaEntry::rational(1, 3).unwrap())
    }

    #[test]
    fn phase_form_examples() {
        let th = third();
        let e1 = LatticePoint::unit(2, 0);
        let e2 = LatticePoint::unit(2, 1);
        assert!((th.phase_form(&e1, &e2).unwrap() - 1.0 / 3.0).abs() < 1e-16);
        let k = LatticePoint::new(&[2, 3]);
        assert_eq!(th.phase_form(&k, &k).unwrap(), 0.0);
        let l = LatticePoint::new(&[1, -1]);
        // 2·(1/3)·(−1) + 3·(−1/3)·1
        let expected = -(2.0 * (1.0 / 3.0)) + 3.0 * (-1.0 / 3.0) * 1.0;
        assert!((th.phase_form(&k, &l).unwrap() - expected).abs() < 1e-15);
        assert!((expected + 5.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn dimension_errors() {
        let th = third();
        let bad = LatticePoint::new(&[1, 2, 3]);
        assert!(matches!(th.phase_form(&bad, &bad), Err(Error::Dimension(_))));
        let e = SkewMatrix::from_f64(2, &[0.0, 1.0, 1.0, 0.0]);
        assert!(matches!(e, Err(Error::Dimension(_))));
        assert!(matches!(SkewMatrix::from_f64(2, &[0.0; 3]), Err(Error::Dimension(_))));
    }

    #[test]
    fn window_counts() {
        assert_eq!(window_points(0, 3).collect::<Vec<_>>(), vec![LatticePoint::zero(3)]);
        assert_eq!(window_points(1, 2).count(), 9);
        let pts: Vec<_> = window_points(2, 2).collect();
        assert_eq!(pts.len(), 25);
        let mut sorted = pts.clone();
        sorted.sort();
        sorted.dedup();
        assert_eq!(sorted, pts);
        let w = SupportWindow::new(2, 2);
        for (i, p) in pts.iter().enumerate() {
            assert_eq!(w.index_of(p.coords()), Some(i));
        }
    }

    #[test]
    fn parse_entries() {
        assert_eq!("2/6".parse::<ThetaEntry>().unwrap(), ThetaEntry::Rational { num: 1, den: 3 });
        assert_eq!("-3".parse::<ThetaEntry>().unwrap(), ThetaEntry::Rational { num: -3, den: 1 });
        assert_eq!("0.25".parse::<ThetaEntry>().unwrap(), ThetaEntry::Real(0.25));
        assert!("abc".parse::<ThetaEntry>().is_err());
        assert!("1/0".parse::<ThetaEntry>().is_err());
        let m: SkewMatrix = serde_json::from_str(r#"[["0","1/5"],["-1/5",0]]"#).unwrap();
        assert_eq!(m, SkewMatrix::planar(ThetaEntry::rational(1, 5).unwrap()));
        let back: SkewMatrix = serde_json::from_str(&serde_json::to_string(&m).unwrap()).unwrap();
        assert_eq!(back, m);
    }

    #[test]
    fn large_points_keep_exact_phase() {
        let th = third();
        // (3a)·Θ·(b) with θ = 1/3 gives an even integer multiple → phase exactly 1.
        let k = LatticePoint::new(&[3_000_000_006, 0]);
        let l = LatticePoint::new(&[0, 2]);
        let p = th.phase(&k, &l).unwrap();
        assert_eq!(p, C64::new(1.0, 0.0));
    }

    #[test]
    fn congruence_defect_exact() {
        let a = ThetaEntry::rational(1, 5).unwrap();
        let b = ThetaEntry::rational(1, 20).unwrap();
        assert_eq!(a.congruence_defect(&b, 4), 0.0);
        assert!(a.congruence_defect(&b, 2) > 0.0);
        let c = ThetaEntry::rational(6, 5).unwrap();
        assert_eq!(c.congruence_defect(&b, 4), 0.0);
    }

    fn point() -> impl Strategy<Value = LatticePoint> {
        prop::collection::vec(-50i64..50, 3).prop_map(LatticePoint::from)
    }

    fn real_skew() -> impl Strategy<Value = SkewMatrix> {
        prop::collection::vec(-2.0f64..2.0, 3).prop_map(|v| {
            SkewMatrix::from_f64(3, &[0.0, v[0], v[1], -v[0], 0.0, v[2], -v[1], -v[2], 0.0]).unwrap()
        })
    }

    proptest! {
        #[test]
        fn phase_form_antisymmetric(th in real_skew(), k in point(), l in point()) {
            let a = th.phase_form(&k, &l).unwrap();
            let b = th.phase_form(&l, &k).unwrap();
            prop_assert!((a + b).abs() <= 1e-12 * (1.0 + a.abs()));
        }

        #[test]
        fn phase_form_bilinear(th in real_skew(), k in point(), k2 in point(), l in point()) {
            let lhs = th.phase_form(&(&k + &k2), &l).unwrap();
            let rhs = th.phase_form(&k, &l).unwrap() + th.phase_form(&k2, &l).unwrap();
            // Relative to the magnitude of the individual products summed.
            let scale: f64 = (0..3).flat_map(|i| (0..3).map(move |j| (i, j)))
                .map(|(i, j)| (k.coords()[i].abs() + k2.coords()[i].abs()) as f64 * th.value(i, j).abs() * l.coords()[j].abs() as f64)
                .sum();
            prop_assert!((lhs - rhs).abs() <= 1e-14 * scale.max(1.0));
        }

        #[test]
        fn exact_phase_matches_float(num in -20i64..20, den in 1i64..30, k in point(), l in point()) {
            let e = ThetaEntry::rational(num, den).unwrap();
            let z = ThetaEntry::ZERO;
            let th = SkewMatrix::new(3, vec![z, e, z, e.neg(), z, e, z, e.neg(), z]).unwrap();
            let x = th.phase_form(&k, &l).unwrap();
            let p = th.phase(&k, &l).unwrap();
            let q = C64::cis(-std::f64::consts::PI * x);
            prop_assert!((p - q).norm() < 1e-9);
        }
    }
}
