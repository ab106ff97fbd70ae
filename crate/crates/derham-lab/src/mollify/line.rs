//! One-dimensional localized mollification with closure-based functions.
//!
//! Functions carry their derivative as a second closure and a list of
//! breakpoints (kink locations). The regularizing operators integrate with
//! Gauss-Legendre panels split at the images of the breakpoints, so the
//! quadrature only ever sees smooth integrands; derivative closures of the
//! outputs are the analytically differentiated integrals, which makes
//! d R = R d hold by construction.
//!
//! The flow is the localized translation s_v = h . s_v . h^{-1} on (-1, 1)
//! with h(x) = x/sqrt(1+x^2), and the operators are the identity outside.

use std::sync::Arc;

use crate::quad::gauss_legendre_01;

type Fn1 = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// A scalar function on the line with derivative closure and breakpoints.
#[derive(Clone)]
pub struct LineFunc {
    eval: Fn1,
    deriv: Fn1,
    breaks: Vec<f64>,
}

impl LineFunc {
    pub fn new(eval: Fn1, deriv: Fn1, mut breaks: Vec<f64>) -> Self {
        breaks.sort_by(|a, b| a.partial_cmp(b).unwrap());
        breaks.dedup_by(|a, b| (*a - *b).abs() < 1e-13);
        LineFunc { eval, deriv, breaks }
    }

    pub fn zero() -> Self {
        LineFunc::new(Arc::new(|_| 0.0), Arc::new(|_| 0.0), Vec::new())
    }

    pub fn eval(&self, y: f64) -> f64 {
        (self.eval)(y)
    }

    pub fn deriv(&self, y: f64) -> f64 {
        (self.deriv)(y)
    }

    pub fn breaks(&self) -> &[f64] {
        &self.breaks
    }

    /// The derivative as a LineFunc; its own derivative is finite-difference
    /// (only used for diagnostics).
    pub fn derivative(&self) -> LineFunc {
        let d = self.deriv.clone();
        let d2 = self.deriv.clone();
        LineFunc::new(
            d,
            Arc::new(move |y| (d2(y + 5e-6) - d2(y - 5e-6)) / 1e-5),
            self.breaks.clone(),
        )
    }

    pub fn add_scaled(&self, other: &LineFunc, c: f64) -> LineFunc {
        let (e1, d1) = (self.eval.clone(), self.deriv.clone());
        let (e2, d2) = (other.eval.clone(), other.deriv.clone());
        let mut breaks = self.breaks.clone();
        breaks.extend_from_slice(&other.breaks);
        LineFunc::new(
            Arc::new(move |y| e1(y) + c * e2(y)),
            Arc::new(move |y| d1(y) + c * d2(y)),
            breaks,
        )
    }

    pub fn scale(&self, c: f64) -> LineFunc {
        let (e, d) = (self.eval.clone(), self.deriv.clone());
        LineFunc::new(
            Arc::new(move |y| c * e(y)),
            Arc::new(move |y| c * d(y)),
            self.breaks.clone(),
        )
    }

    /// Affine substitution: self(a y + b), with derivative a * f'(a y + b).
    pub fn precompose_affine(&self, a: f64, b: f64) -> LineFunc {
        let (e, d) = (self.eval.clone(), self.deriv.clone());
        let breaks = self.breaks.iter().map(|t| (t - b) / a).collect();
        LineFunc::new(
            Arc::new(move |y| e(a * y + b)),
            Arc::new(move |y| a * d(a * y + b)),
            breaks,
        )
    }
}

// -- the 1-dim ball diffeomorphism and localized flow ------------------------

pub fn h_fwd(z: f64) -> f64 {
    z / (1.0 + z * z).sqrt()
}

pub fn h_inv(y: f64) -> f64 {
    y / (1.0 - y * y).max(f64::MIN_POSITIVE).sqrt()
}

fn h_fwd_d(z: f64) -> f64 {
    (1.0 + z * z).powf(-1.5)
}

fn h_fwd_dd(z: f64) -> f64 {
    -3.0 * z * (1.0 + z * z).powf(-2.5)
}

fn h_inv_d(y: f64) -> f64 {
    (1.0 - y * y).max(f64::MIN_POSITIVE).powf(-1.5)
}

fn h_inv_dd(y: f64) -> f64 {
    3.0 * y * (1.0 - y * y).max(f64::MIN_POSITIVE).powf(-2.5)
}

/// Localized flow: s_v(y) = h(h^{-1}(y) + v) for |y| < 1, identity outside.
pub fn flow(v: f64, y: f64) -> f64 {
    if y.abs() >= 1.0 {
        y
    } else {
        h_fwd(h_inv(y) + v)
    }
}

/// d s_v / d y.
pub fn flow_d(v: f64, y: f64) -> f64 {
    if y.abs() >= 1.0 {
        1.0
    } else {
        h_fwd_d(h_inv(y) + v) * h_inv_d(y)
    }
}

/// d^2 s_v / d y^2.
pub fn flow_dd(v: f64, y: f64) -> f64 {
    if y.abs() >= 1.0 {
        0.0
    } else {
        let z = h_inv(y);
        let zd = h_inv_d(y);
        h_fwd_dd(z + v) * zd * zd + h_fwd_d(z + v) * h_inv_dd(y)
    }
}

/// Generator field X_v(y) = v (1-y^2)^{3/2} inside, 0 outside.
pub fn field(v: f64, y: f64) -> f64 {
    if y.abs() >= 1.0 {
        0.0
    } else {
        v * (1.0 - y * y).powf(1.5)
    }
}

fn field_d(v: f64, y: f64) -> f64 {
    if y.abs() >= 1.0 {
        0.0
    } else {
        -3.0 * v * y * (1.0 - y * y).sqrt()
    }
}

fn kernel(v: f64) -> f64 {
    if v.abs() >= 1.0 {
        0.0
    } else {
        let b = 1.0 - v * v;
        (15.0 / 16.0) * b * b
    }
}

/// Tail mass of the kernel: K(a) = int_a^1 f, for a in [0, 1].
fn kernel_tail(a: f64) -> f64 {
    if a >= 1.0 {
        return 0.0;
    }
    let a = a.max(0.0);
    (15.0 / 16.0) * (8.0 / 15.0 - a + 2.0 * a.powi(3) / 3.0 - a.powi(5) / 5.0)
}

/// Jump discontinuities of f at its interior breakpoints, found by one-sided
/// linear extrapolation (exact to second order for piecewise smooth data).
/// Needed by the derivative closures of the operators: differentiating the
/// averaging integrals in y transports the jump surface, which contributes a
/// boundary term on top of differentiation under the integral sign.
fn jump_table(f: &LineFunc) -> Vec<(f64, f64)> {
    let d = 1e-6;
    f.breaks()
        .iter()
        .filter(|b| b.abs() < 1.0)
        .map(|&b| {
            let right = f.eval(b + d) - d * f.deriv(b + d);
            let left = f.eval(b - d) + d * f.deriv(b - d);
            (b, right - left)
        })
        .filter(|(_, j)| j.abs() > 1e-12)
        .collect()
}

/// Gauss-Legendre over [a, b] with the panel structure split at the given
/// interior points.
pub(crate) fn gl_split(a: f64, b: f64, splits: &[f64], n: usize, f: impl Fn(f64) -> f64) -> f64 {
    let mut edges = vec![a];
    let mut interior: Vec<f64> = splits
        .iter()
        .copied()
        .filter(|s| *s > a + 1e-13 && *s < b - 1e-13)
        .collect();
    interior.sort_by(|x, y| x.partial_cmp(y).unwrap());
    interior.dedup_by(|x, y| (*x - *y).abs() < 1e-13);
    edges.extend(interior);
    edges.push(b);
    let (x, w) = gauss_legendre_01(n);
    let mut total = 0.0;
    for pair in edges.windows(2) {
        let (lo, hi) = (pair[0], pair[1]);
        let scale = hi - lo;
        for (xi, wi) in x.iter().zip(&w) {
            total += scale * wi * f(lo + scale * xi);
        }
    }
    total
}

/// Split locations in v for the averaging integral at y: kernel argument v
/// such that s_{eps v}(y) hits a breakpoint of the integrand.
fn v_splits(breaks: &[f64], y: f64, eps: f64) -> Vec<f64> {
    let zy = h_inv(y);
    breaks
        .iter()
        .filter(|b| b.abs() < 1.0)
        .map(|&b| (h_inv(b) - zy) / eps)
        .filter(|v| v.abs() < 1.0)
        .collect()
}

/// Output breakpoints: each interior breakpoint spreads to the eps-flowed
/// pair, and the ball boundary is always a breakpoint of the operator.
fn spread_breaks(breaks: &[f64], eps: f64) -> Vec<f64> {
    let mut out = vec![-1.0, 1.0];
    for &b in breaks {
        if b.abs() < 1.0 {
            out.push(flow(-eps, b));
            out.push(b);
            out.push(flow(eps, b));
        } else {
            out.push(b);
        }
    }
    out
}

/// R_eps on 0-forms: (R g)(y) = int g(s_{eps v} y) f(v) dv inside the ball.
pub fn r0(g: &LineFunc, eps: f64, n_gl: usize) -> LineFunc {
    let g1 = g.clone();
    let g2 = g.clone();
    let jumps = jump_table(g);
    let breaks = spread_breaks(g.breaks(), eps);
    LineFunc::new(
        Arc::new(move |y| {
            if y.abs() >= 1.0 {
                return g1.eval(y);
            }
            let splits = v_splits(g1.breaks(), y, eps);
            gl_split(-1.0, 1.0, &splits, n_gl, |v| {
                g1.eval(flow(eps * v, y)) * kernel(v)
            })
        }),
        Arc::new(move |y| {
            if y.abs() >= 1.0 {
                return g2.deriv(y);
            }
            let splits = v_splits(g2.breaks(), y, eps);
            let mut out = gl_split(-1.0, 1.0, &splits, n_gl, |v| {
                g2.deriv(flow(eps * v, y)) * flow_d(eps * v, y) * kernel(v)
            });
            // transported jump term: the averaging window slides past each
            // discontinuity of g at speed h_inv'(y)/eps
            for &(b, j) in &jumps {
                let w = h_inv(b) - h_inv(y);
                if w.abs() < eps {
                    out += h_inv_d(y) / eps * j * kernel(w / eps);
                }
            }
            out
        }),
        breaks,
    )
}

/// R_eps on 1-forms c dy: (R c)(y) = int c(s_{eps v} y) s_{eps v}'(y) f(v) dv.
pub fn r1(c: &LineFunc, eps: f64, n_gl: usize) -> LineFunc {
    let c1 = c.clone();
    let c2 = c.clone();
    let jumps = jump_table(c);
    let breaks = spread_breaks(c.breaks(), eps);
    LineFunc::new(
        Arc::new(move |y| {
            if y.abs() >= 1.0 {
                return c1.eval(y);
            }
            let splits = v_splits(c1.breaks(), y, eps);
            gl_split(-1.0, 1.0, &splits, n_gl, |v| {
                c1.eval(flow(eps * v, y)) * flow_d(eps * v, y) * kernel(v)
            })
        }),
        Arc::new(move |y| {
            if y.abs() >= 1.0 {
                return c2.deriv(y);
            }
            let splits = v_splits(c2.breaks(), y, eps);
            let mut out = gl_split(-1.0, 1.0, &splits, n_gl, |v| {
                let sv = eps * v;
                let u = flow(sv, y);
                let sd = flow_d(sv, y);
                (c2.deriv(u) * sd * sd + c2.eval(u) * flow_dd(sv, y)) * kernel(v)
            });
            // transported jump term; the pullback factor at the jump surface
            // is s'(y) = (1-b^2)^{3/2} h_inv'(y)
            for &(b, j) in &jumps {
                let w = h_inv(b) - h_inv(y);
                if w.abs() < eps {
                    let hd = h_inv_d(y);
                    out += hd * hd / eps * j * (1.0 - b * b).powf(1.5) * kernel(w / eps);
                }
            }
            out
        }),
        breaks,
    )
}

/// A_eps on 1-forms c dy, producing a 0-form:
/// (A c)(y) = int_0^1 int c(s_{eps t v} y) X_{eps v}(s_{eps t v} y) f(v) dv dt.
pub fn a1(c: &LineFunc, eps: f64, n_gl: usize, n_t: usize) -> LineFunc {
    let c1 = c.clone();
    let c2 = c.clone();
    let jumps = jump_table(c);
    let breaks = spread_breaks(c.breaks(), eps);

    // t values where a breakpoint's v-split enters the kernel support
    let t_splits = move |breaks: &[f64], y: f64| -> Vec<f64> {
        let zy = h_inv(y);
        breaks
            .iter()
            .filter(|b| b.abs() < 1.0)
            .map(|&b| ((h_inv(b) - zy) / eps).abs())
            .filter(|t| *t > 0.0 && *t < 1.0)
            .collect()
    };

    LineFunc::new(
        Arc::new(move |y| {
            if y.abs() >= 1.0 {
                return 0.0;
            }
            let ts = t_splits(c1.breaks(), y);
            gl_split(0.0, 1.0, &ts, n_t, |t| {
                let zy = h_inv(y);
                let vs: Vec<f64> = c1
                    .breaks()
                    .iter()
                    .filter(|b| b.abs() < 1.0)
                    .map(|&b| (h_inv(b) - zy) / (eps * t))
                    .filter(|v| v.abs() < 1.0)
                    .collect();
                gl_split(-1.0, 1.0, &vs, n_gl, |v| {
                    let u = flow(eps * t * v, y);
                    c1.eval(u) * field(eps * v, u) * kernel(v)
                })
            })
        }),
        Arc::new(move |y| {
            if y.abs() >= 1.0 {
                return 0.0;
            }
            let ts = t_splits(c2.breaks(), y);
            gl_split(0.0, 1.0, &ts, n_t, |t| {
                let zy = h_inv(y);
                let vs: Vec<f64> = c2
                    .breaks()
                    .iter()
                    .filter(|b| b.abs() < 1.0)
                    .map(|&b| (h_inv(b) - zy) / (eps * t))
                    .filter(|v| v.abs() < 1.0)
                    .collect();
                gl_split(-1.0, 1.0, &vs, n_gl, |v| {
                    let u = flow(eps * t * v, y);
                    let sd = flow_d(eps * t * v, y);
                    (c2.deriv(u) * field(eps * v, u) + c2.eval(u) * field_d(eps * v, u))
                        * sd
                        * kernel(v)
                })
            }) + {
                // transported jump term, with the t-integral of the moving
                // surface done in closed form via the kernel tail mass
                let mut corr = 0.0;
                for &(b, j) in &jumps {
                    let w = h_inv(b) - h_inv(y);
                    if w.abs() < eps && w != 0.0 {
                        corr += h_inv_d(y)
                            * j
                            * (1.0 - b * b).powf(1.5)
                            * w.signum()
                            * kernel_tail(w.abs() / eps);
                    }
                }
                corr
            }
        }),
        breaks,
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    /// |y|-like function with a kink at 0: pieces -y and y^2 + y.
    fn kinked() -> LineFunc {
        LineFunc::new(
            Arc::new(|y| if y < 0.0 { -y } else { y * y + y }),
            Arc::new(|y| if y < 0.0 { -1.0 } else { 2.0 * y + 1.0 }),
            vec![0.0],
        )
    }

    fn poly_func(coeffs: &[f64]) -> LineFunc {
        let c1 = coeffs.to_vec();
        let c2 = coeffs.to_vec();
        LineFunc::new(
            Arc::new(move |y| c1.iter().rev().fold(0.0, |acc, c| acc * y + c)),
            Arc::new(move |y| {
                c2.iter()
                    .enumerate()
                    .skip(1)
                    .rev()
                    .fold(0.0, |acc, (i, c)| acc * y + i as f64 * c)
            }),
            Vec::new(),
        )
    }

    #[test]
    fn constants_are_fixed() {
        let g = poly_func(&[2.5]);
        let r = r0(&g, 0.1, 12);
        for y in [-1.5, -0.7, 0.0, 0.4, 2.0] {
            assert!((r.eval(y) - 2.5).abs() < 1e-12, "y={y}");
        }
    }

    #[test]
    fn identity_outside_ball() {
        let g = kinked();
        let r = r0(&g, 0.15, 12);
        for y in [-1.4, 1.01, 3.0] {
            assert_eq!(r.eval(y), g.eval(y));
        }
        let a = a1(&kinked(), 0.15, 12, 10);
        assert_eq!(a.eval(1.2), 0.0);
    }

    #[test]
    fn deriv_closures_match_finite_differences() {
        let eps = 0.12;
        for f in [kinked(), poly_func(&[0.3, -1.0, 0.5, 2.0])] {
            let r = r0(&f, eps, 16);
            let a = a1(&f, eps, 16, 12);
            for y in [-0.8, -0.3, 0.05, 0.4, 0.9] {
                let fd_r = (r.eval(y + 5e-6) - r.eval(y - 5e-6)) / 1e-5;
                assert!((r.deriv(y) - fd_r).abs() < 1e-5, "r0 at {y}: {} vs {fd_r}", r.deriv(y));
                let fd_a = (a.eval(y + 5e-6) - a.eval(y - 5e-6)) / 1e-5;
                assert!((a.deriv(y) - fd_a).abs() < 1e-5, "a1 at {y}: {} vs {fd_a}", a.deriv(y));
            }
        }
    }

    #[test]
    fn homotopy_identity_zero_forms() {
        // R g - g = A(dg) pointwise, with a kinked input
        let eps = 0.15;
        let g = kinked();
        let r = r0(&g, eps, 20);
        let a_dg = a1(&g.derivative(), eps, 20, 16);
        for y in [-0.9, -0.5, -0.07, 0.0, 0.11, 0.6, 0.95] {
            let lhs = r.eval(y) - g.eval(y);
            let rhs = a_dg.eval(y);
            assert!((lhs - rhs).abs() < 1e-8, "y={y}: {lhs} vs {rhs}");
        }
    }

    #[test]
    fn homotopy_identity_one_forms() {
        // R c - c = (A c)' pointwise
        let eps = 0.12;
        for c in [kinked(), poly_func(&[1.0, 0.4, -0.7])] {
            let r = r1(&c, eps, 20);
            let a = a1(&c, eps, 20, 16);
            for y in [-0.85, -0.4, 0.03, 0.3, 0.88] {
                let lhs = r.eval(y) - c.eval(y);
                let rhs = a.deriv(y);
                assert!((lhs - rhs).abs() < 1e-8, "y={y}: {lhs} vs {rhs}");
            }
        }
    }

    #[test]
    fn smoothing_kills_the_kink() {
        // the regularized output is C^1 across the original kink; the second
        // derivative is O(1/eps), so nearby samples differ at that rate
        let g = kinked();
        let r = r0(&g, 0.2, 20);
        let jump = r.deriv(1e-9) - r.deriv(-1e-9);
        assert!(jump.abs() < 1e-7, "derivative jump {jump}");
    }

    /// A genuinely discontinuous 1-form coefficient (sign flip at 0).
    fn jumpy() -> LineFunc {
        LineFunc::new(
            Arc::new(|y| if y < 0.0 { -1.0 - 0.3 * y } else { 1.0 + 0.2 * y }),
            Arc::new(|y| if y < 0.0 { -0.3 } else { 0.2 }),
            vec![0.0],
        )
    }

    #[test]
    fn homotopy_identity_with_jump_input() {
        // R c - c = (A c)' away from the jump, which needs the transported
        // jump terms in the derivative closures
        let eps = 0.15;
        let c = jumpy();
        let r = r1(&c, eps, 20);
        let a = a1(&c, eps, 20, 16);
        for y in [-0.8, -0.3, -0.12, -0.02, 0.04, 0.2, 0.5, 0.9] {
            let lhs = r.eval(y) - c.eval(y);
            let rhs = a.deriv(y);
            assert!((lhs - rhs).abs() < 1e-7, "y={y}: {lhs} vs {rhs}");
        }
        // dR = Rd with a jump: (R0 g)' = R1(g') + transported jump, checked
        // against finite differences of the smooth output
        let r0g = r0(&jumpy(), eps, 20);
        for y in [-0.1, 0.0, 0.08] {
            let fd = (r0g.eval(y + 5e-6) - r0g.eval(y - 5e-6)) / 1e-5;
            assert!((r0g.deriv(y) - fd).abs() < 1e-5, "y={y}");
        }
    }
}
