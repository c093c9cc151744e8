use std::collections::BTreeMap;
use std::fmt;

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::cluster::Cluster;
use crate::error::{Error, Result};
use crate::linalg;
use crate::Complex64;

/// Tolerance on the degree-0 coefficient before taking a log.
pub const IDENTITY_TOL: f64 = 1e-12;

/// Coefficient algebra of a truncated series.
pub trait Coefficient: Clone + Send + Sync {
    fn zeros_like(&self) -> Self;
    fn identity_like(&self) -> Self;
    /// `self += a * x`.
    fn axpy(&mut self, a: f64, x: &Self);
    fn mul(&self, other: &Self) -> Self;
    /// Operator norm.
    fn op_norm(&self) -> f64;
    /// Largest entry magnitude.
    fn max_abs(&self) -> f64;

    fn scaled(&self, a: f64) -> Self {
        let mut out = self.zeros_like();
        out.axpy(a, self);
        out
    }
}

impl Coefficient for DMatrix<Complex64> {
    fn zeros_like(&self) -> Self {
        DMatrix::zeros(self.nrows(), self.ncols())
    }
    fn identity_like(&self) -> Self {
        DMatrix::identity(self.nrows(), self.ncols())
    }
    fn axpy(&mut self, a: f64, x: &Self) {
        *self += x * Complex64::new(a, 0.0);
    }
    fn mul(&self, other: &Self) -> Self {
        linalg::complex_matmul(self, other)
    }
    fn op_norm(&self) -> f64 {
        if self.iter().all(|z| *z == Complex64::new(0.0, 0.0)) {
            return 0.0;
        }
        let anti = (self - self.adjoint()).iter().map(|z| z.norm()).fold(0.0, f64::max);
        if anti <= 1e-12 * (1.0 + self.max_abs()) {
            linalg::operator_norm_hermitian(&linalg::hermitian_part(self))
        } else {
            linalg::operator_norm(self)
        }
    }
    fn max_abs(&self) -> f64 {
        self.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }
}

/// Diagonal operator stored as its diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct Diag(pub Vec<f64>);

impl Coefficient for Diag {
    fn zeros_like(&self) -> Self {
        Diag(vec![0.0; self.0.len()])
    }
    fn identity_like(&self) -> Self {
        Diag(vec![1.0; self.0.len()])
    }
    fn axpy(&mut self, a: f64, x: &Self) {
        for (s, v) in self.0.iter_mut().zip(&x.0) {
            *s += a * v;
        }
    }
    fn mul(&self, other: &Self) -> Self {
        Diag(self.0.iter().zip(&other.0).map(|(a, b)| a * b).collect())
    }
    fn op_norm(&self) -> f64 {
        self.max_abs()
    }
    fn max_abs(&self) -> f64 {
        self.0.iter().map(|v| v.abs()).fold(0.0, f64::max)
    }
}

/// Exponent vector `λ^W` as sorted `(variable, power)` pairs; empty is `λ^0`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Monomial(Vec<(usize, u32)>);

impl Monomial {
    pub fn one() -> Self {
        Monomial(Vec::new())
    }

    pub fn var(a: usize, power: u32) -> Self {
        if power == 0 { Monomial::one() } else { Monomial(vec![(a, power)]) }
    }

    pub fn powers(&self) -> &[(usize, u32)] {
        &self.0
    }

    pub fn degree(&self) -> usize {
        self.0.iter().map(|p| p.1 as usize).sum()
    }

    pub fn is_one(&self) -> bool {
        self.0.is_empty()
    }

    pub fn mul(&self, other: &Monomial) -> Monomial {
        let (a, b) = (&self.0, &other.0);
        let (mut i, mut j) = (0, 0);
        let mut out = Vec::with_capacity(a.len() + b.len());
        while i < a.len() || j < b.len() {
            if j == b.len() || (i < a.len() && a[i].0 < b[j].0) {
                out.push(a[i]);
                i += 1;
            } else if i == a.len() || b[j].0 < a[i].0 {
                out.push(b[j]);
                j += 1;
            } else {
                out.push((a[i].0, a[i].1 + b[j].1));
                i += 1;
                j += 1;
            }
        }
        Monomial(out)
    }

    /// `Π μ(a)!`.
    pub fn factorial(&self) -> f64 {
        self.0.iter().map(|&(_, m)| (1..=m).map(f64::from).product::<f64>()).product()
    }

    pub fn evaluate(&self, lambda: &[f64]) -> f64 {
        self.0.iter().map(|&(a, m)| lambda[a].powi(m as i32)).product()
    }

    pub fn to_cluster(&self) -> Option<Cluster> {
        Cluster::new(self.0.iter().copied()).ok()
    }
}

impl From<&Cluster> for Monomial {
    fn from(c: &Cluster) -> Self {
        Monomial(c.entries().to_vec())
    }
}

impl fmt::Display for Monomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.to_cluster() {
            Some(c) => c.fmt(f),
            None => write!(f, "{{}}"),
        }
    }
}

/// Which monomials a series keeps: total degree at most `degree` and, when
/// present, per-variable powers at most `caps[a]` (absent variables get 0).
#[derive(Debug, Clone, PartialEq)]
pub struct Truncation {
    pub degree: usize,
    pub caps: Option<BTreeMap<usize, u32>>,
}

impl Truncation {
    pub fn degree(degree: usize) -> Self {
        Truncation { degree, caps: None }
    }

    /// Only the monomials dividing `λ^W`.
    pub fn dividing(w: &Cluster) -> Self {
        Truncation { degree: w.weight(), caps: Some(w.entries().iter().copied().collect()) }
    }

    pub fn keeps(&self, m: &Monomial) -> bool {
        m.degree() <= self.degree
            && self.caps.as_ref().map_or(true, |caps| {
                m.powers().iter().all(|(a, p)| caps.get(a).is_some_and(|c| p <= c))
            })
    }

    pub fn max_power(&self, a: usize) -> u32 {
        let d = self.degree as u32;
        self.caps.as_ref().map_or(d, |caps| caps.get(&a).map_or(0, |&c| c.min(d)))
    }
}

/// Multivariate polynomial in the `λ_a`, truncated, with operator coefficients.
#[derive(Debug, Clone)]
pub struct TruncatedSeries<C> {
    trunc: Truncation,
    template: C,
    terms: BTreeMap<Monomial, C>,
}

impl<C: Coefficient> TruncatedSeries<C> {
    pub fn zero(template: &C, trunc: Truncation) -> Self {
        TruncatedSeries { trunc, template: template.zeros_like(), terms: BTreeMap::new() }
    }

    pub fn constant(c: C, trunc: Truncation) -> Self {
        let mut s = Self::zero(&c, trunc);
        s.terms.insert(Monomial::one(), c);
        s
    }

    /// `Σ_k coeffs[k] λ_a^k`, dropping powers the truncation excludes.
    pub fn univariate(a: usize, coeffs: Vec<C>, trunc: Truncation) -> Self {
        let mut s = Self::zero(&coeffs[0], trunc);
        for (k, c) in coeffs.into_iter().enumerate() {
            let m = Monomial::var(a, k as u32);
            if s.trunc.keeps(&m) {
                s.terms.insert(m, c);
            }
        }
        s
    }

    pub fn truncation(&self) -> &Truncation {
        &self.trunc
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Monomial, &C)> {
        self.terms.iter()
    }

    pub fn coefficient(&self, m: &Monomial) -> C {
        self.terms.get(m).cloned().unwrap_or_else(|| self.template.zeros_like())
    }

    pub fn constant_term(&self) -> C {
        self.coefficient(&Monomial::one())
    }

    /// `D_W = W! × coefficient of λ^W`.
    pub fn derivative(&self, w: &Cluster) -> Result<C> {
        if w.weight() > self.trunc.degree {
            return Err(Error::CapExceeded { what: "cluster weight vs truncation degree", value: w.weight(), cap: self.trunc.degree });
        }
        let m = Monomial::from(w);
        Ok(self.coefficient(&m).scaled(m.factorial()))
    }

    pub fn add_scaled(&mut self, a: f64, other: &Self) {
        for (m, c) in &other.terms {
            if self.trunc.keeps(m) {
                self.terms.entry(m.clone()).or_insert_with(|| self.template.zeros_like()).axpy(a, c);
            }
        }
    }

    /// Product truncated to `self`'s truncation. Each output coefficient is
    /// summed in a fixed pair order, so results do not depend on scheduling.
    pub fn mul(&self, other: &Self) -> Self {
        let lhs: Vec<(&Monomial, &C)> = self.terms.iter().filter(|(_, c)| c.max_abs() > 0.0).collect();
        let rhs: Vec<(&Monomial, &C)> = other.terms.iter().filter(|(_, c)| c.max_abs() > 0.0).collect();
        let mut pairs: BTreeMap<Monomial, Vec<(usize, usize)>> = BTreeMap::new();
        for (i, (ma, _)) in lhs.iter().enumerate() {
            for (j, (mb, _)) in rhs.iter().enumerate() {
                if ma.degree() + mb.degree() > self.trunc.degree {
                    continue;
                }
                let m = ma.mul(mb);
                if self.trunc.keeps(&m) {
                    pairs.entry(m).or_default().push((i, j));
                }
            }
        }
        let terms = pairs
            .into_par_iter()
            .map(|(m, ps)| {
                let mut acc = lhs[ps[0].0].1.mul(rhs[ps[0].1].1);
                for &(i, j) in &ps[1..] {
                    acc.axpy(1.0, &lhs[i].1.mul(rhs[j].1));
                }
                (m, acc)
            })
            .collect();
        TruncatedSeries { trunc: self.trunc.clone(), template: self.template.clone(), terms }
    }

    pub fn map<D: Coefficient>(&self, f: impl Fn(&C) -> D) -> TruncatedSeries<D> {
        let terms: BTreeMap<Monomial, D> = self.terms.iter().map(|(m, c)| (m.clone(), f(c))).collect();
        TruncatedSeries { trunc: self.trunc.clone(), template: f(&self.template), terms }
    }

    pub fn try_map<D: Coefficient>(&self, f: impl Fn(&C) -> Result<D>) -> Result<TruncatedSeries<D>> {
        let terms = self
            .terms
            .iter()
            .map(|(m, c)| Ok((m.clone(), f(c)?)))
            .collect::<Result<BTreeMap<Monomial, D>>>()?;
        Ok(TruncatedSeries { trunc: self.trunc.clone(), template: f(&self.template)?, terms })
    }

    fn without_constant(&self) -> Self {
        let mut s = self.clone();
        s.terms.remove(&Monomial::one());
        s
    }

    /// `log(I + A) = Σ_{n≥1} (−1)^{n−1} A^n / n`, requiring a degree-0 part of `I`.
    pub fn log(&self) -> Result<Self> {
        let c0 = self.constant_term();
        let mut diff = c0.clone();
        diff.axpy(-1.0, &c0.identity_like());
        if diff.max_abs() > IDENTITY_TOL {
            return Err(Error::Consistency(format!(
                "degree-0 coefficient differs from the identity by {:.3e}",
                diff.max_abs()
            )));
        }
        let a = self.without_constant();
        let mut out = Self::zero(&self.template, self.trunc.clone());
        let mut power = a.clone();
        for n in 1..=self.trunc.degree {
            let sign = if n % 2 == 1 { 1.0 } else { -1.0 };
            out.add_scaled(sign / n as f64, &power);
            if n < self.trunc.degree {
                power = power.mul(&a);
            }
        }
        Ok(out)
    }

    /// `exp(A) = Σ_n A^n / n!` for a series without degree-0 part.
    pub fn exp(&self) -> Result<Self> {
        if self.constant_term().max_abs() > IDENTITY_TOL {
            return Err(Error::Consistency("exp of a series needs a zero degree-0 coefficient".into()));
        }
        let a = self.without_constant();
        let mut out = Self::constant(self.template.identity_like(), self.trunc.clone());
        let mut power = a.clone();
        let mut fact = 1.0;
        for n in 1..=self.trunc.degree {
            fact *= n as f64;
            out.add_scaled(1.0 / fact, &power);
            if n < self.trunc.degree {
                power = power.mul(&a);
            }
        }
        Ok(out)
    }

    /// `Σ_W c_W λ^W` at numeric `λ` (indexed by variable).
    pub fn evaluate(&self, lambda: &[f64]) -> C {
        let mut out = self.template.zeros_like();
        for (m, c) in &self.terms {
            out.axpy(m.evaluate(lambda), c);
        }
        out
    }

    /// Largest coefficient norm among monomials matching `pred`.
    pub fn max_norm_where(&self, pred: impl Fn(&Monomial) -> bool) -> f64 {
        self.terms.iter().filter(|(m, _)| pred(m)).map(|(_, c)| c.op_norm()).fold(0.0, f64::max)
    }
}
