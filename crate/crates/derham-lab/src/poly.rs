//! Multivariate polynomials over exact rational scalars.
//!
//! All algebraic identities in this crate (Cartan homotopies, chain maps,
//! mollifier homotopies with polynomial kernels) are verified as exact
//! identities of these polynomials; floating point only enters through norms.

use std::collections::BTreeMap;
use std::fmt;

use num::bigint::BigInt;
use num::rational::BigRational;
use num::traits::{One, Signed, ToPrimitive, Zero};

pub type Rat = BigRational;

pub fn rat(n: i64, d: i64) -> Rat {
    Rat::new(BigInt::from(n), BigInt::from(d))
}

pub fn rat_i(n: i64) -> Rat {
    Rat::from(BigInt::from(n))
}

pub fn rat_to_f64(r: &Rat) -> f64 {
    r.numer().to_f64().unwrap_or(f64::NAN) / r.denom().to_f64().unwrap_or(f64::NAN)
}

/// Exact conversion; every finite f64 is a rational with power-of-two denominator.
pub fn rat_from_f64(x: f64) -> Rat {
    Rat::from_float(x).expect("finite float")
}

/// Parse "n", "-n" or "n/d".
pub fn parse_rat(s: &str) -> Option<Rat> {
    use std::str::FromStr;
    if let Some((n, d)) = s.split_once('/') {
        let n = BigInt::from_str(n.trim()).ok()?;
        let d = BigInt::from_str(d.trim()).ok()?;
        if d.is_zero() {
            return None;
        }
        Some(Rat::new(n, d))
    } else {
        BigInt::from_str(s.trim()).ok().map(Rat::from)
    }
}

fn factorial(n: usize) -> BigInt {
    let mut acc = BigInt::one();
    for i in 2..=n {
        acc *= BigInt::from(i);
    }
    acc
}

/// A polynomial in `dim` variables with `BigRational` coefficients.
///
/// Terms map exponent vectors (length `dim`) to nonzero coefficients.
#[derive(Clone, PartialEq, Eq)]
pub struct Poly {
    dim: usize,
    terms: BTreeMap<Vec<u32>, Rat>,
}

impl Poly {
    pub fn zero(dim: usize) -> Self {
        Poly { dim, terms: BTreeMap::new() }
    }

    pub fn constant(dim: usize, c: Rat) -> Self {
        let mut p = Poly::zero(dim);
        if !c.is_zero() {
            p.terms.insert(vec![0; dim], c);
        }
        p
    }

    pub fn one(dim: usize) -> Self {
        Poly::constant(dim, Rat::one())
    }

    pub fn var(dim: usize, i: usize) -> Self {
        assert!(i < dim);
        let mut exps = vec![0; dim];
        exps[i] = 1;
        let mut p = Poly::zero(dim);
        p.terms.insert(exps, Rat::one());
        p
    }

    pub fn monomial(dim: usize, exps: Vec<u32>, c: Rat) -> Self {
        assert_eq!(exps.len(), dim);
        let mut p = Poly::zero(dim);
        if !c.is_zero() {
            p.terms.insert(exps, c);
        }
        p
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Vec<u32>, &Rat)> {
        self.terms.iter()
    }

    pub fn total_degree(&self) -> u32 {
        self.terms
            .keys()
            .map(|e| e.iter().sum::<u32>())
            .max()
            .unwrap_or(0)
    }

    fn insert(&mut self, exps: Vec<u32>, c: Rat) {
        if c.is_zero() {
            return;
        }
        use std::collections::btree_map::Entry;
        match self.terms.entry(exps) {
            Entry::Vacant(e) => {
                e.insert(c);
            }
            Entry::Occupied(mut e) => {
                let sum = e.get().clone() + c;
                if sum.is_zero() {
                    e.remove();
                } else {
                    *e.get_mut() = sum;
                }
            }
        }
    }

    pub fn add(&self, other: &Poly) -> Poly {
        assert_eq!(self.dim, other.dim, "dimension mismatch");
        let mut out = self.clone();
        for (e, c) in &other.terms {
            out.insert(e.clone(), c.clone());
        }
        out
    }

    pub fn sub(&self, other: &Poly) -> Poly {
        self.add(&other.neg())
    }

    pub fn neg(&self) -> Poly {
        let mut out = Poly::zero(self.dim);
        for (e, c) in &self.terms {
            out.terms.insert(e.clone(), -c.clone());
        }
        out
    }

    pub fn scale(&self, c: &Rat) -> Poly {
        if c.is_zero() {
            return Poly::zero(self.dim);
        }
        let mut out = Poly::zero(self.dim);
        for (e, k) in &self.terms {
            out.terms.insert(e.clone(), k * c);
        }
        out
    }

    pub fn mul(&self, other: &Poly) -> Poly {
        assert_eq!(self.dim, other.dim, "dimension mismatch");
        let mut out = Poly::zero(self.dim);
        for (ea, ca) in &self.terms {
            for (eb, cb) in &other.terms {
                let exps: Vec<u32> = ea.iter().zip(eb).map(|(a, b)| a + b).collect();
                out.insert(exps, ca * cb);
            }
        }
        out
    }

    pub fn pow(&self, n: u32) -> Poly {
        let mut out = Poly::one(self.dim);
        for _ in 0..n {
            out = out.mul(self);
        }
        out
    }

    pub fn partial(&self, i: usize) -> Poly {
        assert!(i < self.dim);
        let mut out = Poly::zero(self.dim);
        for (e, c) in &self.terms {
            if e[i] == 0 {
                continue;
            }
            let mut exps = e.clone();
            exps[i] -= 1;
            out.insert(exps, c * rat_i(e[i] as i64));
        }
        out
    }

    pub fn eval_rat(&self, x: &[Rat]) -> Rat {
        assert_eq!(x.len(), self.dim);
        let mut acc = Rat::zero();
        for (e, c) in &self.terms {
            let mut t = c.clone();
            for (i, &p) in e.iter().enumerate() {
                for _ in 0..p {
                    t *= &x[i];
                }
            }
            acc += t;
        }
        acc
    }

    pub fn eval_f64(&self, x: &[f64]) -> f64 {
        assert_eq!(x.len(), self.dim);
        let mut acc = 0.0;
        for (e, c) in &self.terms {
            let mut t = rat_to_f64(c);
            for (i, &p) in e.iter().enumerate() {
                t *= x[i].powi(p as i32);
            }
            acc += t;
        }
        acc
    }

    /// Substitute each variable by the given polynomial (all in a common new
    /// dimension). Used for affine pullbacks and flow substitutions.
    pub fn compose(&self, exprs: &[Poly]) -> Poly {
        assert_eq!(exprs.len(), self.dim);
        let new_dim = if exprs.is_empty() { 0 } else { exprs[0].dim };
        for e in exprs {
            assert_eq!(e.dim, new_dim);
        }
        let mut out = Poly::zero(new_dim);
        for (e, c) in &self.terms {
            let mut term = Poly::constant(new_dim, c.clone());
            for (i, &p) in e.iter().enumerate() {
                if p > 0 {
                    term = term.mul(&exprs[i].pow(p));
                }
            }
            out = out.add(&term);
        }
        out
    }

    /// Definite integral of variable `i` over [0, 1]; the variable is
    /// eliminated (exponent forced to zero in the result).
    pub fn integrate_var_01(&self, i: usize) -> Poly {
        assert!(i < self.dim);
        let mut out = Poly::zero(self.dim);
        for (e, c) in &self.terms {
            let mut exps = e.clone();
            let p = exps[i];
            exps[i] = 0;
            out.insert(exps, c / rat_i(p as i64 + 1));
        }
        out
    }

    /// Exact integral over the reference simplex {u_i >= 0, sum u_i <= 1}:
    /// the monomial formula  ∫ u^a du = (∏ a_i!) / (dim + Σ a_i)!.
    pub fn integrate_ref_simplex(&self) -> Rat {
        let mut acc = Rat::zero();
        for (e, c) in &self.terms {
            let mut numer = BigInt::one();
            let mut total = 0usize;
            for &a in e {
                numer *= factorial(a as usize);
                total += a as usize;
            }
            let denom = factorial(self.dim + total);
            acc += c * Rat::new(numer, denom);
        }
        acc
    }

    /// Max absolute coefficient, as f64 (diagnostics only).
    pub fn max_abs_coeff(&self) -> f64 {
        self.terms
            .values()
            .map(|c| rat_to_f64(&c.abs()))
            .fold(0.0, f64::max)
    }
}

impl fmt::Debug for Poly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self)
    }
}

impl fmt::Display for Poly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        let mut first = true;
        for (e, c) in &self.terms {
            if !first {
                write!(f, " + ")?;
            }
            first = false;
            write!(f, "{}", c)?;
            for (i, &p) in e.iter().enumerate() {
                if p == 1 {
                    write!(f, "*x{}", i)?;
                } else if p > 1 {
                    write!(f, "*x{}^{}", i, p)?;
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn arithmetic_basics() {
        let x = Poly::var(2, 0);
        let y = Poly::var(2, 1);
        let p = x.mul(&y).add(&x.pow(2)); // x*y + x^2
        assert_eq!(p.eval_rat(&[rat_i(2), rat_i(3)]), rat_i(10));
        assert_eq!(p.partial(0), x.scale(&rat_i(2)).add(&y));
        assert!(p.sub(&p).is_zero());
    }

    #[test]
    fn compose_affine() {
        // p(x) = x^2, x -> u + 1
        let p = Poly::var(1, 0).pow(2);
        let u_plus_1 = Poly::var(1, 0).add(&Poly::one(1));
        let q = p.compose(&[u_plus_1]);
        // (u+1)^2 = u^2 + 2u + 1
        assert_eq!(q.eval_rat(&[rat_i(3)]), rat_i(16));
    }

    #[test]
    fn simplex_integrals() {
        // ∫_{triangle} 1 = 1/2, ∫ u = 1/6, ∫ u*v = 1/24
        let one = Poly::one(2);
        assert_eq!(one.integrate_ref_simplex(), rat(1, 2));
        let u = Poly::var(2, 0);
        assert_eq!(u.integrate_ref_simplex(), rat(1, 6));
        let uv = u.mul(&Poly::var(2, 1));
        assert_eq!(uv.integrate_ref_simplex(), rat(1, 24));
    }

    #[test]
    fn integrate_01() {
        // ∫_0^1 t^2 x dt = x/3
        let p = Poly::var(2, 1).pow(2).mul(&Poly::var(2, 0));
        let q = p.integrate_var_01(1);
        assert_eq!(q, Poly::var(2, 0).scale(&rat(1, 3)));
    }
}
