//! Sparse multivariate polynomials with real coefficients.
//!
//! Terms are keyed by [`Monomial`] and kept in graded-lexicographic order,
//! which also fixes the row order of every coefficient-matching system built
//! on top of these polynomials.

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use crate::error::{Error, Result};

/// Exponent multi-index. Ordered by total degree, then lexicographically with
/// the first variable ranked highest (`1 < y1 < y2 < y1^2 < y1 y2 < y2^2 ...`).
#[derive(Clone, PartialEq, Eq, Hash, Debug)]
pub struct Monomial(Vec<u32>);

impl Monomial {
    pub fn new(exponents: Vec<u32>) -> Self {
        Monomial(exponents)
    }

    pub fn one(nvars: usize) -> Self {
        Monomial(vec![0; nvars])
    }

    pub fn var(nvars: usize, i: usize) -> Self {
        let mut e = vec![0; nvars];
        e[i] = 1;
        Monomial(e)
    }

    pub fn exponents(&self) -> &[u32] {
        &self.0
    }

    pub fn nvars(&self) -> usize {
        self.0.len()
    }

    pub fn degree(&self) -> u32 {
        self.0.iter().sum()
    }

    pub fn mul(&self, other: &Monomial) -> Monomial {
        Monomial(self.0.iter().zip(&other.0).map(|(a, b)| a + b).collect())
    }

    /// `self / other` when `other` divides `self`.
    pub fn checked_div(&self, other: &Monomial) -> Option<Monomial> {
        self.0
            .iter()
            .zip(&other.0)
            .map(|(a, b)| a.checked_sub(*b))
            .collect::<Option<Vec<_>>>()
            .map(Monomial)
    }

    pub fn evaluate(&self, y: &[f64]) -> f64 {
        self.0
            .iter()
            .zip(y)
            .map(|(&e, &v)| v.powi(e as i32))
            .product()
    }

    /// All monomials in `nvars` variables of total degree at most `max_degree`,
    /// in graded-lexicographic order.
    pub fn all_up_to(nvars: usize, max_degree: u32) -> Vec<Monomial> {
        let mut out = Vec::new();
        for d in 0..=max_degree {
            let mut cur = vec![0u32; nvars];
            push_degree(nvars, 0, d, &mut cur, &mut out);
        }
        out
    }
}

// Emits exponent vectors of exact total degree `remaining` over variables
// `idx..`, first variable descending, which is grlex order within a degree.
fn push_degree(nvars: usize, idx: usize, remaining: u32, cur: &mut Vec<u32>, out: &mut Vec<Monomial>) {
    if nvars == 0 {
        if remaining == 0 {
            out.push(Monomial(Vec::new()));
        }
        return;
    }
    if idx == nvars - 1 {
        cur[idx] = remaining;
        out.push(Monomial(cur.clone()));
        cur[idx] = 0;
        return;
    }
    for e in (0..=remaining).rev() {
        cur[idx] = e;
        push_degree(nvars, idx + 1, remaining - e, cur, out);
    }
    cur[idx] = 0;
}

impl Ord for Monomial {
    fn cmp(&self, other: &Self) -> Ordering {
        self.degree()
            .cmp(&other.degree())
            .then_with(|| other.0.cmp(&self.0))
    }
}

impl PartialOrd for Monomial {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for Monomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.degree() == 0 {
            return write!(f, "1");
        }
        let mut first = true;
        for (i, &e) in self.0.iter().enumerate() {
            if e == 0 {
                continue;
            }
            if !first {
                write!(f, "*")?;
            }
            first = false;
            write!(f, "y{}", i + 1)?;
            if e > 1 {
                write!(f, "^{e}")?;
            }
        }
        Ok(())
    }
}

/// Polynomial in a fixed number of variables. Zero coefficients are never stored.
#[derive(Clone, PartialEq, Debug)]
pub struct MultiPoly {
    nvars: usize,
    terms: BTreeMap<Monomial, f64>,
}

impl MultiPoly {
    pub fn zero(nvars: usize) -> Self {
        MultiPoly {
            nvars,
            terms: BTreeMap::new(),
        }
    }

    pub fn constant(nvars: usize, c: f64) -> Self {
        let mut p = Self::zero(nvars);
        p.add_term(Monomial::one(nvars), c);
        p
    }

    /// The coordinate polynomial `y_i`.
    pub fn var(nvars: usize, i: usize) -> Self {
        let mut p = Self::zero(nvars);
        p.add_term(Monomial::var(nvars, i), 1.0);
        p
    }

    /// Builds a polynomial from `(exponents, coefficient)` pairs; repeated
    /// monomials are summed.
    pub fn from_terms<I>(nvars: usize, terms: I) -> Result<Self>
    where
        I: IntoIterator<Item = (Vec<u32>, f64)>,
    {
        let mut p = Self::zero(nvars);
        for (exps, c) in terms {
            if exps.len() != nvars {
                return Err(Error::DimensionMismatch {
                    what: "monomial exponent vector",
                    expected: nvars,
                    got: exps.len(),
                });
            }
            if !c.is_finite() {
                return Err(Error::NonFinite("polynomial coefficient"));
            }
            p.add_term(Monomial(exps), c);
        }
        Ok(p)
    }

    pub fn nvars(&self) -> usize {
        self.nvars
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn num_terms(&self) -> usize {
        self.terms.len()
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Monomial, f64)> {
        self.terms.iter().map(|(m, &c)| (m, c))
    }

    pub fn coeff(&self, m: &Monomial) -> f64 {
        self.terms.get(m).copied().unwrap_or(0.0)
    }

    /// Total degree; the zero polynomial has degree 0.
    pub fn degree(&self) -> u32 {
        self.terms.keys().map(Monomial::degree).max().unwrap_or(0)
    }

    pub fn add_term(&mut self, m: Monomial, c: f64) {
        debug_assert_eq!(m.nvars(), self.nvars);
        if c == 0.0 {
            return;
        }
        let entry = self.terms.entry(m);
        match entry {
            std::collections::btree_map::Entry::Vacant(v) => {
                v.insert(c);
            }
            std::collections::btree_map::Entry::Occupied(mut o) => {
                let s = *o.get() + c;
                if s == 0.0 {
                    o.remove();
                } else {
                    *o.get_mut() = s;
                }
            }
        }
    }

    fn check_vars(&self, other: &MultiPoly) -> Result<()> {
        if self.nvars == other.nvars {
            Ok(())
        } else {
            Err(Error::DimensionMismatch {
                what: "polynomial variable count",
                expected: self.nvars,
                got: other.nvars,
            })
        }
    }

    pub fn try_add(&self, other: &MultiPoly) -> Result<MultiPoly> {
        self.check_vars(other)?;
        let mut out = self.clone();
        for (m, &c) in &other.terms {
            out.add_term(m.clone(), c);
        }
        Ok(out)
    }

    pub fn try_sub(&self, other: &MultiPoly) -> Result<MultiPoly> {
        self.check_vars(other)?;
        let mut out = self.clone();
        for (m, &c) in &other.terms {
            out.add_term(m.clone(), -c);
        }
        Ok(out)
    }

    pub fn try_mul(&self, other: &MultiPoly) -> Result<MultiPoly> {
        self.check_vars(other)?;
        let mut out = MultiPoly::zero(self.nvars);
        for (ma, &ca) in &self.terms {
            for (mb, &cb) in &other.terms {
                out.add_term(ma.mul(mb), ca * cb);
            }
        }
        Ok(out)
    }

    pub fn scale(&self, s: f64) -> MultiPoly {
        let mut out = MultiPoly::zero(self.nvars);
        if s != 0.0 {
            for (m, &c) in &self.terms {
                out.add_term(m.clone(), c * s);
            }
        }
        out
    }

    pub fn powi(&self, k: u32) -> MultiPoly {
        let mut out = MultiPoly::constant(self.nvars, 1.0);
        for _ in 0..k {
            out = &out * self;
        }
        out
    }

    /// Evaluates at `y` using a per-variable power table.
    pub fn evaluate(&self, y: &[f64]) -> Result<f64> {
        if y.len() != self.nvars {
            return Err(Error::DimensionMismatch {
                what: "polynomial evaluation point",
                expected: self.nvars,
                got: y.len(),
            });
        }
        let max_deg = self.degree() as usize;
        let powers: Vec<Vec<f64>> = y
            .iter()
            .map(|&v| {
                let mut row = Vec::with_capacity(max_deg + 1);
                let mut acc = 1.0;
                for _ in 0..=max_deg {
                    row.push(acc);
                    acc *= v;
                }
                row
            })
            .collect();
        Ok(self
            .terms
            .iter()
            .map(|(m, &c)| {
                c * m
                    .0
                    .iter()
                    .enumerate()
                    .map(|(i, &e)| powers[i][e as usize])
                    .product::<f64>()
            })
            .sum())
    }

    /// Nested Horner evaluation, recursing on the first variable.
    pub fn evaluate_horner(&self, y: &[f64]) -> Result<f64> {
        if y.len() != self.nvars {
            return Err(Error::DimensionMismatch {
                what: "polynomial evaluation point",
                expected: self.nvars,
                got: y.len(),
            });
        }
        Ok(horner(&self.terms.iter().map(|(m, &c)| (m.0.clone(), c)).collect::<Vec<_>>(), y))
    }

    pub fn partial_derivative(&self, var: usize) -> Result<MultiPoly> {
        if var >= self.nvars {
            return Err(Error::contract(format!(
                "derivative variable {var} out of range for {} variables",
                self.nvars
            )));
        }
        let mut out = MultiPoly::zero(self.nvars);
        for (m, &c) in &self.terms {
            let e = m.0[var];
            if e == 0 {
                continue;
            }
            let mut exps = m.0.clone();
            exps[var] -= 1;
            out.add_term(Monomial(exps), c * e as f64);
        }
        Ok(out)
    }

    /// Largest absolute coefficient difference against `other`.
    pub fn max_coeff_diff(&self, other: &MultiPoly) -> f64 {
        let mut worst: f64 = 0.0;
        for (m, &c) in &self.terms {
            worst = worst.max((c - other.coeff(m)).abs());
        }
        for (m, &c) in &other.terms {
            if !self.terms.contains_key(m) {
                worst = worst.max(c.abs());
            }
        }
        worst
    }
}

fn horner(terms: &[(Vec<u32>, f64)], y: &[f64]) -> f64 {
    if y.is_empty() {
        return terms.iter().map(|(_, c)| c).sum();
    }
    let max_e = terms.iter().map(|(e, _)| e[0]).max().unwrap_or(0);
    let mut acc = 0.0;
    for k in (0..=max_e).rev() {
        let sub: Vec<(Vec<u32>, f64)> = terms
            .iter()
            .filter(|(e, _)| e[0] == k)
            .map(|(e, c)| (e[1..].to_vec(), *c))
            .collect();
        acc = acc * y[0] + horner(&sub, &y[1..]);
    }
    acc
}

impl<'a> Add<&'a MultiPoly> for &'a MultiPoly {
    type Output = MultiPoly;
    fn add(self, rhs: &'a MultiPoly) -> MultiPoly {
        self.try_add(rhs).expect("polynomial variable count mismatch")
    }
}

impl<'a> Sub<&'a MultiPoly> for &'a MultiPoly {
    type Output = MultiPoly;
    fn sub(self, rhs: &'a MultiPoly) -> MultiPoly {
        self.try_sub(rhs).expect("polynomial variable count mismatch")
    }
}

impl<'a> Mul<&'a MultiPoly> for &'a MultiPoly {
    type Output = MultiPoly;
    fn mul(self, rhs: &'a MultiPoly) -> MultiPoly {
        self.try_mul(rhs).expect("polynomial variable count mismatch")
    }
}

impl Add for MultiPoly {
    type Output = MultiPoly;
    fn add(self, rhs: MultiPoly) -> MultiPoly {
        &self + &rhs
    }
}

impl Sub for MultiPoly {
    type Output = MultiPoly;
    fn sub(self, rhs: MultiPoly) -> MultiPoly {
        &self - &rhs
    }
}

impl Mul for MultiPoly {
    type Output = MultiPoly;
    fn mul(self, rhs: MultiPoly) -> MultiPoly {
        &self * &rhs
    }
}

impl Neg for &MultiPoly {
    type Output = MultiPoly;
    fn neg(self) -> MultiPoly {
        self.scale(-1.0)
    }
}

impl fmt::Display for MultiPoly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        for (i, (m, c)) in self.terms.iter().enumerate() {
            if i > 0 {
                write!(f, " + ")?;
            }
            write!(f, "{c}*{m}")?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn y1() -> MultiPoly {
        MultiPoly::var(2, 0)
    }
    fn y2() -> MultiPoly {
        MultiPoly::var(2, 1)
    }

    #[test]
    fn difference_of_squares() {
        let p = (&y1() + &y2()) * (&y1() - &y2());
        let expected =
            MultiPoly::from_terms(2, [(vec![2, 0], 1.0), (vec![0, 2], -1.0)]).unwrap();
        assert_eq!(p, expected);
    }

    #[test]
    fn derivative_of_quartic() {
        let p = y1().powi(4);
        let d = p.partial_derivative(0).unwrap();
        assert_eq!(d, MultiPoly::from_terms(2, [(vec![3, 0], 4.0)]).unwrap());
        assert!(p.partial_derivative(1).unwrap().is_zero());
        assert!(p.partial_derivative(2).is_err());
    }

    #[test]
    fn grlex_listing() {
        let ms = Monomial::all_up_to(2, 2);
        let shown: Vec<String> = ms.iter().map(|m| m.to_string()).collect();
        assert_eq!(shown, ["1", "y1", "y2", "y1^2", "y1*y2", "y2^2"]);
        let mut sorted = ms.clone();
        sorted.sort();
        assert_eq!(sorted, ms);
        // C(2 + 4, 4) monomials up to degree 4
        assert_eq!(Monomial::all_up_to(2, 4).len(), 15);
        assert_eq!(Monomial::all_up_to(3, 2).len(), 10);
    }

    #[test]
    fn cancellation_removes_terms() {
        let p = &y1() - &y1();
        assert!(p.is_zero());
        assert_eq!(p.num_terms(), 0);
    }

    #[test]
    fn variable_count_mismatch() {
        let a = MultiPoly::var(2, 0);
        let b = MultiPoly::var(3, 0);
        assert!(a.try_add(&b).is_err());
        assert!(a.try_mul(&b).is_err());
        assert!(a.evaluate(&[1.0]).is_err());
    }

    #[test]
    fn horner_agrees_with_power_table() {
        let p = MultiPoly::from_terms(
            2,
            [
                (vec![0, 0], -0.3),
                (vec![3, 1], 2.5),
                (vec![0, 4], 1.25),
                (vec![2, 2], -4.0),
                (vec![1, 0], 0.75),
            ],
        )
        .unwrap();
        for &(a, b) in &[(0.3, -1.2), (2.0, 0.5), (-1.7, 3.1)] {
            let v1 = p.evaluate(&[a, b]).unwrap();
            let v2 = p.evaluate_horner(&[a, b]).unwrap();
            assert!((v1 - v2).abs() <= 1e-12 * (1.0 + v1.abs()));
        }
    }
}
