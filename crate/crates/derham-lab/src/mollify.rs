//! De Rham regularization: mollifier kernels, the exact flat operators
//! R_eps / A_eps for translation flows with a polynomial bump kernel, the
//! localized flow through a ball diffeomorphism, and empirical operator-norm
//! scans.
//!
//! The flat operators run entirely over the rationals: the averaging
//! variable v and flow time t are adjoined as ring variables and integrated
//! out termwise, so the chain homotopy identity
//! R_eps w - w = d A_eps w + A_eps dw is an exact polynomial identity.

pub mod global;
pub mod line;

use std::sync::Arc;

use num::traits::Zero;

use crate::error::{DerhamError, Result};
use crate::forms::PolyForm;
use crate::poly::{rat, rat_to_f64, Poly, Rat};
use crate::quad::{cube_rule, gauss_legendre_01};

/// Kernel profile. The polynomial bump enables the exact pipeline; the
/// smooth bump exp(-1/(1-|v|^2)) is available behind quadrature.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KernelProfile {
    Polynomial,
    Smooth,
}

/// A normalized symmetric mollifier kernel with unit-cube support, scaled
/// by eps: f_eps(u) = f(u/eps)/eps^n.
#[derive(Debug, Clone)]
pub struct KernelSpec {
    pub dim: usize,
    pub profile: KernelProfile,
    pub eps: Rat,
    smooth_norm: f64,
}

/// The default 1-dim profile (15/16)(1 - v^2)^2 on [-1, 1].
pub fn profile_poly_1d() -> Poly {
    let v = Poly::var(1, 0);
    let bump = Poly::one(1).sub(&v.mul(&v));
    bump.mul(&bump).scale(&rat(15, 16))
}

impl KernelSpec {
    pub fn new(dim: usize, profile: KernelProfile, eps: Rat) -> Result<Self> {
        if eps <= Rat::zero() {
            return Err(DerhamError::InvalidParameter(format!(
                "kernel scale eps must be positive, got {eps}"
            )));
        }
        let smooth_norm = if profile == KernelProfile::Smooth {
            // normalize exp(-1/(1-v^2)) per coordinate by quadrature
        let (x, w) = gauss_legendre_01(80);
            let one_dim: f64 = x
                .iter()
                .zip(&w)
                .map(|(xi, wi)| {
                    let v = 2.0 * xi - 1.0;
                    2.0 * wi * (-1.0 / (1.0 - v * v)).exp()
                })
                .sum();
            one_dim.powi(dim as i32).recip()
        } else {
            1.0
        };
        Ok(KernelSpec { dim, profile, eps, smooth_norm })
    }

    pub fn polynomial(dim: usize, eps: Rat) -> Self {
        KernelSpec::new(dim, KernelProfile::Polynomial, eps).expect("eps > 0")
    }

    pub fn eps_f64(&self) -> f64 {
        rat_to_f64(&self.eps)
    }

    /// Product density in n variables (unscaled, unit-cube support).
    /// Polynomial profile only.
    pub fn density_poly(&self) -> Result<Poly> {
        if self.profile != KernelProfile::Polynomial {
            return Err(DerhamError::InvalidParameter(
                "smooth kernel has no polynomial density".into(),
            ));
        }
        let one_d = profile_poly_1d();
        let mut out = Poly::one(self.dim);
        for i in 0..self.dim {
            let vi = Poly::var(self.dim, i);
            out = out.mul(&one_d.compose(&[vi]));
        }
        Ok(out)
    }

    /// Density value at v in the unit cube (unscaled).
    pub fn density_f64(&self, v: &[f64]) -> f64 {
        match self.profile {
            KernelProfile::Polynomial => v
                .iter()
                .map(|&vi| {
                    if vi.abs() >= 1.0 {
                        0.0
                    } else {
                        let b = 1.0 - vi * vi;
                        (15.0 / 16.0) * b * b
                    }
                })
                .product(),
            KernelProfile::Smooth => {
                let prod: f64 = v
                    .iter()
                    .map(|&vi| {
                        if vi.abs() >= 1.0 {
                            0.0
                        } else {
                            (-1.0 / (1.0 - vi * vi)).exp()
                        }
                    })
                    .product();
                self.smooth_norm * prod
            }
        }
    }

    /// Exact 1-dim moment int v^a f(v) dv of the polynomial profile.
    pub fn moment(a: u32) -> Rat {
        if a % 2 == 1 {
            return Rat::zero();
        }
        let a = a as i64;
        // (15/8) (1/(a+1) - 2/(a+3) + 1/(a+5))
        rat(15, 8) * (rat(1, a + 1) - rat(2, a + 3) + rat(1, a + 5))
    }

    /// Exact int |v| f(v) dv = 5/16 for the polynomial profile.
    pub fn abs_moment() -> Rat {
        rat(5, 16)
    }

    /// Lebesgue measure of supp f_eps = [-eps, eps]^n.
    pub fn support_measure(&self) -> f64 {
        (2.0 * self.eps_f64()).powi(self.dim as i32)
    }

    /// sup of the scaled density f_eps.
    pub fn sup_density(&self) -> f64 {
        let peak = match self.profile {
            KernelProfile::Polynomial => (15.0f64 / 16.0).powi(self.dim as i32),
            KernelProfile::Smooth => {
                self.smooth_norm * (-1.0f64).exp().powi(self.dim as i32)
            }
        };
        peak / self.eps_f64().powi(self.dim as i32)
    }
}

/// R_eps w = int_{[-1,1]^n} s_{eps v}^* w f(v) dv, exact.
pub fn regularize_flat(w: &PolyForm, kernel: &KernelSpec) -> Result<PolyForm> {
    let n = w.dim();
    check_kernel_dim(kernel, n)?;
    let density = kernel.density_poly()?;
    // ring: x_0..x_{n-1}, v_0..v_{n-1}
    let exprs: Vec<Poly> = (0..n)
        .map(|i| Poly::var(2 * n, i).add(&Poly::var(2 * n, n + i).scale(&kernel.eps)))
        .collect();
    let density_ext = density.compose(
        &(0..n).map(|i| Poly::var(2 * n, n + i)).collect::<Vec<_>>(),
    );
    let mut out = PolyForm::zero(n, w.degree());
    for (indices, coeff) in w.terms() {
        let mut averaged = coeff.compose(&exprs).mul(&density_ext);
        for i in 0..n {
            averaged = integrate_var_m11(&averaged, n + i);
        }
        out = out.add(&PolyForm::monomial_form(
            n,
            indices.clone(),
            project_vars(&averaged, n),
        ));
    }
    Ok(out)
}

/// A_eps w = int (int_0^1 s_{eps t v}^* (iota_{eps v} w) dt) f(v) dv, exact;
/// chain homotopy partner of R_eps.
pub fn homotopy_flat(w: &PolyForm, kernel: &KernelSpec) -> Result<PolyForm> {
    let n = w.dim();
    check_kernel_dim(kernel, n)?;
    let k = w.degree();
    if k == 0 {
        return Ok(PolyForm::zero(n, 0));
    }
    let density = kernel.density_poly()?;
    // ring: x (n), v (n), t (1)
    let dim_ext = 2 * n + 1;
    let t = Poly::var(dim_ext, 2 * n);
    let exprs: Vec<Poly> = (0..n)
        .map(|i| {
            Poly::var(dim_ext, i)
                .add(&Poly::var(dim_ext, n + i).mul(&t).scale(&kernel.eps))
        })
        .collect();
    let density_ext = density.compose(
        &(0..n).map(|i| Poly::var(dim_ext, n + i)).collect::<Vec<_>>(),
    );
    let mut out = PolyForm::zero(n, k - 1);
    for (indices, coeff) in w.terms() {
        let shifted = coeff.compose(&exprs); // a_I(x + eps t v)
        for (pos, &i) in indices.iter().enumerate() {
            let mut rest = indices.clone();
            rest.remove(pos);
            // contract with eps v
            let mut c = shifted
                .mul(&Poly::var(dim_ext, n + i as usize))
                .scale(&kernel.eps);
            if pos % 2 == 1 {
                c = c.neg();
            }
            let mut averaged = c.integrate_var_01(2 * n).mul(&density_ext);
            for j in 0..n {
                averaged = integrate_var_m11(&averaged, n + j);
            }
            out = out.add(&PolyForm::monomial_form(n, rest, project_vars(&averaged, n)));
        }
    }
    Ok(out)
}

/// Residual R_eps w - w - d A_eps w - A_eps dw; identically zero.
pub fn mollifier_residual(w: &PolyForm, kernel: &KernelSpec) -> Result<PolyForm> {
    let r = regularize_flat(w, kernel)?;
    let a_dw = homotopy_flat(&w.exterior_d(), kernel)?;
    let d_aw = homotopy_flat(w, kernel)?.exterior_d();
    Ok(r.sub(w).sub(&a_dw).sub(&d_aw))
}

/// Exact mollification of a polynomial scalar.
pub fn mollify_scalar_poly(g: &Poly, kernel: &KernelSpec) -> Result<Poly> {
    let form = regularize_flat(&PolyForm::from_poly(g.clone()), kernel)?;
    Ok(form.coeff(&[]))
}

/// Mollified value of a sampled function at x, by tensor Gauss-Legendre
/// quadrature over the kernel cube.
pub fn mollify_scalar(
    g: &dyn Fn(&[f64]) -> f64,
    kernel: &KernelSpec,
    x: &[f64],
    points_per_axis: usize,
) -> f64 {
    let n = kernel.dim;
    let eps = kernel.eps_f64();
    cube_rule(n, points_per_axis)
        .iter()
        .map(|(v, wq)| {
            let shifted: Vec<f64> = x.iter().zip(v).map(|(xi, vi)| xi + eps * vi).collect();
            wq * kernel.density_f64(v) * g(&shifted)
        })
        .sum()
}

fn check_kernel_dim(kernel: &KernelSpec, n: usize) -> Result<()> {
    if kernel.dim != n {
        return Err(DerhamError::DimensionMismatch(format!(
            "kernel dimension {} vs form dimension {n}",
            kernel.dim
        )));
    }
    Ok(())
}

/// int_{-1}^{1} dv_i, eliminating variable i (odd powers vanish).
fn integrate_var_m11(p: &Poly, i: usize) -> Poly {
    let dim = p.dim();
    let mut out = Poly::zero(dim);
    for (e, c) in p.terms() {
        if e[i] % 2 == 1 {
            continue;
        }
        let mut exps = e.clone();
        let pw = exps[i];
        exps[i] = 0;
        out = out.add(&Poly::monomial(dim, exps, c * rat(2, pw as i64 + 1)));
    }
    out
}

/// Keep the first n variables (higher ones must not occur).
fn project_vars(p: &Poly, n: usize) -> Poly {
    let mut out = Poly::zero(n);
    for (e, c) in p.terms() {
        assert!(e[n..].iter().all(|&x| x == 0), "auxiliary variable not eliminated");
        out = out.add(&Poly::monomial(n, e[..n].to_vec(), c.clone()));
    }
    out
}

// ---------------------------------------------------------------------------
// operator-norm scan and the restriction sup bound, flat 1-dim setting
// ---------------------------------------------------------------------------

#[derive(Debug, Clone)]
pub struct ScanRow {
    pub eps: f64,
    pub c_hat: f64,
    pub m_hat: f64,
}

/// L_p norm of a polynomial on [a, b] by Gauss-Legendre quadrature.
pub fn interval_lp_norm(c: &Poly, a: f64, b: f64, p: f64) -> f64 {
    assert_eq!(c.dim(), 1);
    let pts = ((c.total_degree() as f64 * p).ceil() as usize / 2 + 6).max(8);
    let (x, w) = gauss_legendre_01(pts);
    let scale = b - a;
    let integral: f64 = x
        .iter()
        .zip(&w)
        .map(|(xi, wi)| scale * wi * c.eval_f64(&[a + scale * xi]).abs().powf(p))
        .sum();
    integral.powf(1.0 / p)
}

/// Seeded default sample family: 1-forms on the line with polynomial
/// coefficients of degree <= 4.
pub fn default_scan_samples(seed: u64, count: usize) -> Vec<PolyForm> {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let mut c = Poly::zero(1);
            for a in 0..=4u32 {
                c = c.add(&Poly::monomial(
                    1,
                    vec![a],
                    rat(rng.gen_range(-9i64..=9), rng.gen_range(1i64..=4)),
                ));
            }
            PolyForm::monomial_form(1, vec![0], c)
        })
        .collect()
}

/// Empirical operator norms of R_eps and A_eps on L_p[-1, 1] over a sample
/// family: C_hat(eps) = max ||R w|| / ||w||, M_hat(eps) = max ||A w|| / ||w||.
pub fn operator_norm_scan(
    samples: &[PolyForm],
    eps_list: &[Rat],
    p: f64,
) -> Result<Vec<ScanRow>> {
    if samples.is_empty() {
        return Err(DerhamError::InvalidParameter("empty sample set".into()));
    }
    let mut rows = Vec::new();
    for eps in eps_list {
        let kernel = KernelSpec::new(1, KernelProfile::Polynomial, eps.clone())?;
        let mut c_hat = 0.0f64;
        let mut m_hat = 0.0f64;
        for w in samples {
            let base = interval_lp_norm(&w.coeff(&[0]), -1.0, 1.0, p);
            if base == 0.0 {
                continue;
            }
            let r = regularize_flat(w, &kernel)?;
            let a = homotopy_flat(w, &kernel)?;
            c_hat = c_hat.max(interval_lp_norm(&r.coeff(&[0]), -1.0, 1.0, p) / base);
            m_hat = m_hat.max(interval_lp_norm(&a.coeff(&[]), -1.0, 1.0, p) / base);
        }
        rows.push(ScanRow { eps: rat_to_f64(eps), c_hat, m_hat });
    }
    Ok(rows)
}

/// The eps -> 0 limit row of the scan (analytic limits C = 1, M = 0).
pub fn scan_limit_row() -> ScanRow {
    ScanRow { eps: 0.0, c_hat: 1.0, m_hat: 0.0 }
}

/// Check of the restriction sup bound
/// ||res_F R_eps w||_inf <= mes(supp f_eps)^{(p-1)/p} (sup f_eps) ||w||_p
/// in the flat 1-dim setting with F = [-1/2, 1/2] and the L_p norm over
/// [-2, 2]. Returns (lhs, rhs) pairs.
pub fn restriction_sup_bound(
    samples: &[PolyForm],
    kernel: &KernelSpec,
    p: f64,
) -> Result<Vec<(f64, f64)>> {
    let rhs_const = kernel.support_measure().powf((p - 1.0) / p) * kernel.sup_density();
    let mut out = Vec::new();
    for w in samples {
        let r = regularize_flat(w, kernel)?;
        let rc = r.coeff(&[0]);
        let lhs = (0..=200)
            .map(|i| rc.eval_f64(&[-0.5 + i as f64 / 200.0]).abs())
            .fold(0.0, f64::max);
        let rhs = rhs_const * interval_lp_norm(&w.coeff(&[0]), -2.0, 2.0, p);
        out.push((lhs, rhs));
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// localized flow on the unit ball (numerical, any dimension)
// ---------------------------------------------------------------------------

/// The ball diffeomorphism h(x) = x / sqrt(1 + |x|^2) of R^n onto B_1,
/// with inverse h^{-1}(y) = y / sqrt(1 - |y|^2).
#[derive(Debug, Clone, Copy, Default)]
pub struct BallDiffeo;

impl BallDiffeo {
    pub fn forward(&self, x: &[f64]) -> Vec<f64> {
        let s = (1.0 + norm_sq(x)).sqrt();
        x.iter().map(|xi| xi / s).collect()
    }

    pub fn inverse(&self, y: &[f64]) -> Vec<f64> {
        let r = (1.0 - norm_sq(y)).max(f64::MIN_POSITIVE).sqrt();
        y.iter().map(|yi| yi / r).collect()
    }

    /// Jacobian of h at x: (I - h h^T)/s with s = sqrt(1+|x|^2)... computed
    /// directly: d h_i/d x_j = delta_ij / s - x_i x_j / s^3.
    pub fn jac_forward(&self, x: &[f64]) -> Vec<Vec<f64>> {
        let n = x.len();
        let s = (1.0 + norm_sq(x)).sqrt();
        (0..n)
            .map(|i| {
                (0..n)
                    .map(|j| {
                        let d = if i == j { 1.0 / s } else { 0.0 };
                        d - x[i] * x[j] / (s * s * s)
                    })
                    .collect()
            })
            .collect()
    }

    /// d h^{-1}_i / d y_j = delta_ij / r + y_i y_j / r^3, r = sqrt(1-|y|^2).
    pub fn jac_inverse(&self, y: &[f64]) -> Vec<Vec<f64>> {
        let n = y.len();
        let r = (1.0 - norm_sq(y)).max(f64::MIN_POSITIVE).sqrt();
        (0..n)
            .map(|i| {
                (0..n)
                    .map(|j| {
                        let d = if i == j { 1.0 / r } else { 0.0 };
                        d + y[i] * y[j] / (r * r * r)
                    })
                    .collect()
            })
            .collect()
    }

    /// The localized translation flow s_v(y) = h(h^{-1}(y) + v) inside B_1,
    /// identity outside.
    pub fn flow(&self, v: &[f64], y: &[f64]) -> Vec<f64> {
        if norm_sq(y) >= 1.0 {
            return y.to_vec();
        }
        let mut z = self.inverse(y);
        for (zi, vi) in z.iter_mut().zip(v) {
            *zi += vi;
        }
        self.forward(&z)
    }

    /// Jacobian of the localized flow at y inside B_1.
    pub fn jac_flow(&self, v: &[f64], y: &[f64]) -> Vec<Vec<f64>> {
        let n = y.len();
        if norm_sq(y) >= 1.0 {
            return identity_matrix(n);
        }
        let mut z = self.inverse(y);
        let jac_inv = self.jac_inverse(y);
        for (zi, vi) in z.iter_mut().zip(v) {
            *zi += vi;
        }
        mat_mul(&self.jac_forward(&z), &jac_inv)
    }

    /// Generator field X_v(y) = Dh(h^{-1}(y)) v; zero outside B_1.
    pub fn field(&self, v: &[f64], y: &[f64]) -> Vec<f64> {
        let n = y.len();
        if norm_sq(y) >= 1.0 {
            return vec![0.0; n];
        }
        let jac = self.jac_forward(&self.inverse(y));
        mat_vec(&jac, v)
    }
}

fn norm_sq(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum()
}

fn identity_matrix(n: usize) -> Vec<Vec<f64>> {
    (0..n)
        .map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
        .collect()
}

fn mat_mul(a: &[Vec<f64>], b: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let n = a.len();
    let m = b[0].len();
    (0..n)
        .map(|i| {
            (0..m)
                .map(|j| (0..b.len()).map(|k| a[i][k] * b[k][j]).sum())
                .collect()
        })
        .collect()
}

fn mat_vec(a: &[Vec<f64>], x: &[f64]) -> Vec<f64> {
    a.iter()
        .map(|row| row.iter().zip(x).map(|(r, v)| r * v).sum())
        .collect()
}

fn det_f64(mut m: Vec<Vec<f64>>) -> f64 {
    let n = m.len();
    if n == 0 {
        return 1.0;
    }
    let mut det = 1.0;
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&a, &b| m[a][col].abs().partial_cmp(&m[b][col].abs()).unwrap())
            .unwrap();
        if m[pivot][col] == 0.0 {
            return 0.0;
        }
        if pivot != col {
            m.swap(pivot, col);
            det = -det;
        }
        det *= m[col][col];
        for r in col + 1..n {
            let factor = m[r][col] / m[col][col];
            for c in col..n {
                m[r][c] -= factor * m[col][c];
            }
        }
    }
    det
}

/// A numerically evaluable k-form: component values at a point, ordered by
/// lexicographically increasing index sets.
#[derive(Clone)]
pub struct EvalForm {
    pub dim: usize,
    pub degree: usize,
    eval: Arc<dyn Fn(&[f64]) -> Vec<f64> + Send + Sync>,
}

pub fn index_sets(dim: usize, k: usize) -> Vec<Vec<u8>> {
    use itertools::Itertools;
    (0..dim as u8).combinations(k).collect()
}

impl EvalForm {
    pub fn new(
        dim: usize,
        degree: usize,
        eval: Arc<dyn Fn(&[f64]) -> Vec<f64> + Send + Sync>,
    ) -> Self {
        EvalForm { dim, degree, eval }
    }

    pub fn zero(dim: usize, degree: usize) -> Self {
        let count = index_sets(dim, degree).len();
        EvalForm::new(dim, degree, Arc::new(move |_| vec![0.0; count]))
    }

    pub fn from_polyform(w: &PolyForm) -> Self {
        let w = w.clone();
        let sets = index_sets(w.dim(), w.degree());
        EvalForm::new(
            w.dim(),
            w.degree(),
            Arc::new(move |x| sets.iter().map(|s| w.coeff(s).eval_f64(x)).collect()),
        )
    }

    pub fn eval(&self, x: &[f64]) -> Vec<f64> {
        (self.eval)(x)
    }

    pub fn add_scaled(&self, other: &EvalForm, c: f64) -> EvalForm {
        assert_eq!(self.degree, other.degree);
        let a = self.eval.clone();
        let b = other.eval.clone();
        EvalForm::new(
            self.dim,
            self.degree,
            Arc::new(move |x| {
                a(x).iter().zip(b(x)).map(|(u, v)| u + c * v).collect()
            }),
        )
    }

    /// Pullback along a map with known Jacobian (same dimension).
    pub fn pullback_map(
        &self,
        map: Arc<dyn Fn(&[f64]) -> Vec<f64> + Send + Sync>,
        jac: Arc<dyn Fn(&[f64]) -> Vec<Vec<f64>> + Send + Sync>,
    ) -> EvalForm {
        let sets = index_sets(self.dim, self.degree);
        let eval = self.eval.clone();
        EvalForm::new(
            self.dim,
            self.degree,
            Arc::new(move |x| {
                let y = map(x);
                let j = jac(x);
                let comps = eval(&y);
                sets.iter()
                    .map(|target| {
                        sets.iter()
                            .zip(&comps)
                            .map(|(source, a)| {
                                let minor: Vec<Vec<f64>> = source
                                    .iter()
                                    .map(|&r| {
                                        target
                                            .iter()
                                            .map(|&c| j[r as usize][c as usize])
                                            .collect()
                                    })
                                    .collect();
                                a * det_f64(minor)
                            })
                            .sum()
                    })
                    .collect()
            }),
        )
    }

    /// Interior product with a numerically evaluable field.
    pub fn interior_product_field(
        &self,
        field: Arc<dyn Fn(&[f64]) -> Vec<f64> + Send + Sync>,
    ) -> Result<EvalForm> {
        if self.degree == 0 {
            return Err(DerhamError::DegreeOutOfRange(
                "interior product of a 0-form".into(),
            ));
        }
        let in_sets = index_sets(self.dim, self.degree);
        let out_sets = index_sets(self.dim, self.degree - 1);
        let eval = self.eval.clone();
        Ok(EvalForm::new(
            self.dim,
            self.degree - 1,
            Arc::new(move |x| {
                let comps = eval(x);
                let v = field(x);
                let mut out = vec![0.0; out_sets.len()];
                for (indices, a) in in_sets.iter().zip(&comps) {
                    for (pos, &i) in indices.iter().enumerate() {
                        let mut rest = indices.clone();
                        rest.remove(pos);
                        let oi = out_sets.iter().position(|s| *s == rest).unwrap();
                        let sign = if pos % 2 == 1 { -1.0 } else { 1.0 };
                        out[oi] += sign * a * v[i as usize];
                    }
                }
                out
            }),
        ))
    }

    /// Exterior derivative by central finite differences (step h).
    pub fn exterior_d_fd(&self, h: f64) -> EvalForm {
        let in_sets = index_sets(self.dim, self.degree);
        let out_sets = index_sets(self.dim, self.degree + 1);
        let eval = self.eval.clone();
        let dim = self.dim;
        EvalForm::new(
            dim,
            self.degree + 1,
            Arc::new(move |x| {
                let mut out = vec![0.0; out_sets.len()];
                for i in 0..dim as u8 {
                    let mut xp = x.to_vec();
                    let mut xm = x.to_vec();
                    xp[i as usize] += h;
                    xm[i as usize] -= h;
                    let dp = eval(&xp);
                    let dm = eval(&xm);
                    for (indices, (p, m)) in in_sets.iter().zip(dp.iter().zip(&dm)) {
                        if indices.contains(&i) {
                            continue;
                        }
                        let pos = indices.iter().filter(|&&j| j < i).count();
                        let mut merged = indices.clone();
                        merged.insert(pos, i);
                        let oi = out_sets.iter().position(|s| *s == merged).unwrap();
                        let sign = if pos % 2 == 1 { -1.0 } else { 1.0 };
                        out[oi] += sign * (p - m) / (2.0 * h);
                    }
                }
                out
            }),
        )
    }
}

/// Pullback along the localized flow s_v.
pub fn localized_flow_pullback(h: &BallDiffeo, v: &[f64], w: &EvalForm) -> EvalForm {
    let h = *h;
    let v1: Vec<f64> = v.to_vec();
    let v2: Vec<f64> = v.to_vec();
    w.pullback_map(
        Arc::new(move |x| h.flow(&v1, x)),
        Arc::new(move |x| h.jac_flow(&v2, x)),
    )
}

/// R_eps with the localized flow: averages s_{eps v}^* w over the kernel.
pub fn regularize_local(
    w: &EvalForm,
    kernel: &KernelSpec,
    h: &BallDiffeo,
    points_per_axis: usize,
) -> EvalForm {
    let eps = kernel.eps_f64();
    let rule = cube_rule(w.dim, points_per_axis);
    let mut acc = EvalForm::zero(w.dim, w.degree);
    for (v, wq) in &rule {
        let weight = wq * kernel.density_f64(v);
        if weight == 0.0 {
            continue;
        }
        let ev: Vec<f64> = v.iter().map(|vi| vi * eps).collect();
        acc = acc.add_scaled(&localized_flow_pullback(h, &ev, w), weight);
    }
    acc
}

/// A_eps with the localized flow:
/// int_0^1 int s_{eps t v}^* (iota_{X_{eps v}} w) f(v) dv dt.
pub fn homotopy_local(
    w: &EvalForm,
    kernel: &KernelSpec,
    h: &BallDiffeo,
    points_per_axis: usize,
    t_points: usize,
) -> Result<EvalForm> {
    if w.degree == 0 {
        return Ok(EvalForm::zero(w.dim, 0));
    }
    let eps = kernel.eps_f64();
    let rule = cube_rule(w.dim, points_per_axis);
    let (tx, tw) = gauss_legendre_01(t_points);
    let mut acc = EvalForm::zero(w.dim, w.degree - 1);
    for (v, wq) in &rule {
        let weight = wq * kernel.density_f64(v);
        if weight == 0.0 {
            continue;
        }
        let ev: Vec<f64> = v.iter().map(|vi| vi * eps).collect();
        let hcopy = *h;
        let evf = ev.clone();
        let contracted =
            w.interior_product_field(Arc::new(move |x| hcopy.field(&evf, x)))?;
        for (ti, wi) in tx.iter().zip(&tw) {
            let etv: Vec<f64> = ev.iter().map(|c| c * ti).collect();
            acc = acc.add_scaled(
                &localized_flow_pullback(h, &etv, &contracted),
                weight * wi,
            );
        }
    }
    Ok(acc)
}
