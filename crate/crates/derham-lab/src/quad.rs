//! Quadrature rules: Gauss-Legendre on intervals and Grundmann-Moller on
//! reference simplices. The simplex rule is exact for polynomials up to the
//! requested odd degree; exactness is tested against the closed-form monomial
//! integrals.

use num::traits::One;
use num::BigInt;

use crate::poly::{rat_to_f64, Rat};

/// Gauss-Legendre nodes and weights on [-1, 1].
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n {
        // Chebyshev initial guess, Newton refinement on P_n.
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        for _ in 0..100 {
            let (p, dp) = legendre_and_derivative(n, x);
            let dx = p / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, dp) = legendre_and_derivative(n, x);
        nodes[i] = x;
        weights[i] = 2.0 / ((1.0 - x * x) * dp * dp);
    }
    // ascending order
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&a, &b| nodes[a].partial_cmp(&nodes[b]).unwrap());
    let nodes_sorted: Vec<f64> = idx.iter().map(|&i| nodes[i]).collect();
    let weights_sorted: Vec<f64> = idx.iter().map(|&i| weights[i]).collect();
    (nodes_sorted, weights_sorted)
}

fn legendre_and_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, dp)
}

/// Gauss-Legendre rule mapped to [0, 1].
pub fn gauss_legendre_01(n: usize) -> (Vec<f64>, Vec<f64>) {
    let (x, w) = gauss_legendre(n);
    (
        x.iter().map(|t| 0.5 * (t + 1.0)).collect(),
        w.iter().map(|wi| 0.5 * wi).collect(),
    )
}

/// A quadrature node on the reference simplex, in the affine coordinates
/// u_1..u_n (u_i >= 0, sum <= 1), with its weight.
#[derive(Debug, Clone)]
pub struct SimplexNode {
    pub point: Vec<f64>,
    pub weight: f64,
}

/// Grundmann-Moller rule on the reference n-simplex (volume 1/n!), exact for
/// polynomials of total degree <= 2s+1.
pub fn grundmann_moller(n: usize, s: usize) -> Vec<SimplexNode> {
    let d = 2 * s + 1;
    let mut out = Vec::new();
    let two_pow = BigInt::from(1u32) << (2 * s);
    for i in 0..=s {
        let lambda = (d + n - 2 * i) as i64;
        // c_i = (-1)^i 2^{-2s} lambda^d / (i! (d+n-i)!)
        let mut numer = BigInt::one();
        for _ in 0..d {
            numer *= BigInt::from(lambda);
        }
        let mut denom = two_pow.clone();
        for k in 2..=i {
            denom *= BigInt::from(k);
        }
        for k in 2..=(d + n - i) {
            denom *= BigInt::from(k);
        }
        let mut c = Rat::new(numer, denom);
        if i % 2 == 1 {
            c = -c;
        }
        let w = rat_to_f64(&c);
        for beta in compositions(s - i, n + 1) {
            // barycentric ((2b_j+1)/lambda); drop the 0th for u-coordinates
            let point: Vec<f64> = beta[1..]
                .iter()
                .map(|&b| (2 * b + 1) as f64 / lambda as f64)
                .collect();
            out.push(SimplexNode { point, weight: w });
        }
    }
    out
}

/// Rule of exactness degree at least `degree` on the reference n-simplex.
pub fn simplex_rule(n: usize, degree: u32) -> Vec<SimplexNode> {
    let s = (degree as usize).div_ceil(2);
    grundmann_moller(n, s)
}

/// All length-`parts` vectors of nonnegative integers summing to `total`.
fn compositions(total: usize, parts: usize) -> Vec<Vec<usize>> {
    fn rec(total: usize, parts: usize, prefix: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if parts == 1 {
            let mut v = prefix.clone();
            v.push(total);
            out.push(v);
            return;
        }
        for first in 0..=total {
            prefix.push(first);
            rec(total - first, parts - 1, prefix, out);
            prefix.pop();
        }
    }
    let mut out = Vec::new();
    rec(total, parts, &mut Vec::new(), &mut out);
    out
}

/// Tensor Gauss-Legendre rule on [-1,1]^n.
pub fn cube_rule(n: usize, points_per_axis: usize) -> Vec<(Vec<f64>, f64)> {
    let (x, w) = gauss_legendre(points_per_axis);
    let mut out: Vec<(Vec<f64>, f64)> = vec![(Vec::new(), 1.0)];
    for _ in 0..n {
        let mut next = Vec::with_capacity(out.len() * points_per_axis);
        for (pt, wt) in &out {
            for (xi, wi) in x.iter().zip(&w) {
                let mut p = pt.clone();
                p.push(*xi);
                next.push((p, wt * wi));
            }
        }
        out = next;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::poly::{rat_i, Poly};

    fn monomial_integral_check(n: usize, degree: u32) {
        let rule = simplex_rule(n, degree);
        // check all monomials of total degree <= degree against exact values
        let mut exps = vec![0u32; n];
        loop {
            let total: u32 = exps.iter().sum();
            if total <= degree {
                let p = Poly::monomial(n, exps.clone(), rat_i(1));
                let exact = rat_to_f64(&p.integrate_ref_simplex());
                let approx: f64 = rule
                    .iter()
                    .map(|node| node.weight * p.eval_f64(&node.point))
                    .sum();
                assert!(
                    (exact - approx).abs() < 1e-12,
                    "n={n} exps={exps:?}: {exact} vs {approx}"
                );
            }
            // odometer over exponents bounded by degree
            let mut i = 0;
            loop {
                if i == n {
                    return;
                }
                exps[i] += 1;
                if exps[i] <= degree {
                    break;
                }
                exps[i] = 0;
                i += 1;
            }
        }
    }

    #[test]
    fn grundmann_moller_exactness() {
        monomial_integral_check(1, 7);
        monomial_integral_check(2, 7);
        monomial_integral_check(3, 5);
    }

    #[test]
    fn gauss_legendre_exactness() {
        let (x, w) = gauss_legendre(6); // exact through degree 11
        for deg in 0..=11u32 {
            let approx: f64 = x.iter().zip(&w).map(|(xi, wi)| wi * xi.powi(deg as i32)).sum();
            let exact = if deg % 2 == 1 { 0.0 } else { 2.0 / (deg as f64 + 1.0) };
            assert!((approx - exact).abs() < 1e-13, "deg {deg}");
        }
    }

    #[test]
    fn cube_rule_normalization() {
        let rule = cube_rule(2, 5);
        let total: f64 = rule.iter().map(|(_, w)| w).sum();
        assert!((total - 4.0).abs() < 1e-12);
    }
}
