//! Cartan homotopies for translation flows, and the radial Poincare
//! primitive. Everything here is an exact polynomial identity: the flow
//! parameter is adjoined as an extra ring variable and integrated out with
//! exact rational arithmetic.

use crate::error::{DerhamError, Result};
use crate::forms::{PolyForm, VectorFieldPoly};
use crate::poly::{Poly, Rat};

/// Drop the trailing variable (which must not occur).
fn poly_project(p: &Poly) -> Poly {
    let n = p.dim() - 1;
    let mut out = Poly::zero(n);
    for (e, c) in p.terms() {
        assert_eq!(e[n], 0, "flow parameter not eliminated");
        out = out.add(&Poly::monomial(n, e[..n].to_vec(), c.clone()));
    }
    out
}

/// Coefficient of t^1 of p, viewed back in R[x_1..x_n].
fn poly_t_linear_part(p: &Poly) -> Poly {
    let n = p.dim() - 1;
    let mut out = Poly::zero(n);
    for (e, c) in p.terms() {
        if e[n] == 1 {
            out = out.add(&Poly::monomial(n, e[..n].to_vec(), c.clone()));
        }
    }
    out
}

/// Pullback along the translation s_v(x) = x + v.
pub fn translation_pullback(w: &PolyForm, v: &[Rat]) -> Result<PolyForm> {
    let n = w.dim();
    if v.len() != n {
        return Err(DerhamError::DimensionMismatch(format!(
            "translation vector has length {}, form lives on R^{n}",
            v.len()
        )));
    }
    let exprs: Vec<Poly> = (0..n)
        .map(|i| Poly::var(n, i).add(&Poly::constant(n, v[i].clone())))
        .collect();
    let mut out = PolyForm::zero(n, w.degree());
    for (indices, coeff) in w.terms() {
        out = out.add(&PolyForm::monomial_form(
            n,
            indices.clone(),
            coeff.compose(&exprs),
        ));
    }
    Ok(out)
}

/// Cartan's homotopy operator for the translation flow:
/// Q_v w = int_0^1 iota_v (s_{tv}^* w) dt, so that
/// s_v^* w - w = Q_v(dw) + d(Q_v w).
pub fn cartan_q(w: &PolyForm, v: &[Rat]) -> Result<PolyForm> {
    let n = w.dim();
    if v.len() != n {
        return Err(DerhamError::DimensionMismatch(format!(
            "translation vector has length {}, form lives on R^{n}",
            v.len()
        )));
    }
    let k = w.degree();
    if k == 0 {
        return Ok(PolyForm::zero(n, 0));
    }
    // substitute x -> x + t v in the extended ring R[x, t]
    let exprs: Vec<Poly> = (0..n)
        .map(|i| {
            Poly::var(n + 1, i).add(&Poly::var(n + 1, n).scale(&v[i].clone()))
        })
        .collect();
    let field = VectorFieldPoly::constant(v);
    let mut out = PolyForm::zero(n, k - 1);
    for (indices, coeff) in w.terms() {
        let shifted = coeff.compose(&exprs); // a_I(x + t v), in R[x, t]
        // contract dx_I with v
        for (pos, &i) in indices.iter().enumerate() {
            let vi = &field.components[i as usize];
            if vi.is_zero() {
                continue;
            }
            let mut rest = indices.clone();
            rest.remove(pos);
            let mut c = shifted.scale(vi.terms().next().map(|(_, c)| c).unwrap());
            if pos % 2 == 1 {
                c = c.neg();
            }
            let integrated = poly_project(&c.integrate_var_01(n));
            out = out.add(&PolyForm::monomial_form(n, rest, integrated));
        }
    }
    Ok(out)
}

/// Residual of the homotopy identity s_v^* w - w - Q_v(dw) - d(Q_v w);
/// identically zero for every polynomial form and translation vector.
pub fn cartan_residual(w: &PolyForm, v: &[Rat]) -> Result<PolyForm> {
    let moved = translation_pullback(w, v)?;
    let q_dw = cartan_q(&w.exterior_d(), v)?;
    let d_qw = cartan_q(w, v)?.exterior_d();
    Ok(moved.sub(w).sub(&q_dw).sub(&d_qw))
}

pub fn verify_cartan_identity(w: &PolyForm, v: &[Rat]) -> Result<bool> {
    Ok(cartan_residual(w, v)?.is_zero())
}

/// d/dt|_{t=0} s_{tv}^* w minus the Lie derivative L_v w (Cartan's magic
/// formula); identically zero for constant fields.
pub fn lie_flow_residual(w: &PolyForm, v: &[Rat]) -> Result<PolyForm> {
    let n = w.dim();
    if v.len() != n {
        return Err(DerhamError::DimensionMismatch(format!(
            "vector has length {}, form lives on R^{n}",
            v.len()
        )));
    }
    let exprs: Vec<Poly> = (0..n)
        .map(|i| Poly::var(n + 1, i).add(&Poly::var(n + 1, n).scale(&v[i].clone())))
        .collect();
    let mut derivative = PolyForm::zero(n, w.degree());
    for (indices, coeff) in w.terms() {
        let shifted = coeff.compose(&exprs);
        derivative = derivative.add(&PolyForm::monomial_form(
            n,
            indices.clone(),
            poly_t_linear_part(&shifted),
        ));
    }
    let lie = w.lie_derivative(&VectorFieldPoly::constant(v));
    Ok(derivative.sub(&lie))
}

/// Radial Poincare primitive on a star-shaped neighbourhood of 0:
/// (P w)(x) = int_0^1 t^{k-1} iota_x(w(t x)) dt  for a closed k-form w,
/// k >= 1, with d(P w) = w.
pub fn poincare_primitive(w: &PolyForm) -> Result<PolyForm> {
    let k = w.degree();
    if k == 0 {
        return Err(DerhamError::DegreeOutOfRange(
            "poincare primitive needs degree >= 1".into(),
        ));
    }
    if !w.exterior_d().is_zero() {
        return Err(DerhamError::NotClosed);
    }
    let n = w.dim();
    // substitute x -> t x in the extended ring R[x, t]
    let exprs: Vec<Poly> = (0..n)
        .map(|i| Poly::var(n + 1, i).mul(&Poly::var(n + 1, n)))
        .collect();
    let t_power = Poly::var(n + 1, n).pow(k as u32 - 1);
    let mut out = PolyForm::zero(n, k - 1);
    for (indices, coeff) in w.terms() {
        let scaled = coeff.compose(&exprs).mul(&t_power); // t^{k-1} a_I(t x)
        for (pos, &i) in indices.iter().enumerate() {
            let mut rest = indices.clone();
            rest.remove(pos);
            // contract with the radial field: component x_i
            let mut c = scaled.mul(&Poly::var(n + 1, i as usize));
            if pos % 2 == 1 {
                c = c.neg();
            }
            let integrated = poly_project(&c.integrate_var_01(n));
            out = out.add(&PolyForm::monomial_form(n, rest, integrated));
        }
    }
    Ok(out)
}

/// Seeded random polynomial form for the randomized verification suites:
/// each component gets a handful of monomials with small rational
/// coefficients.
pub fn random_polyform(
    rng: &mut impl rand::Rng,
    dim: usize,
    degree: usize,
    max_poly_degree: u32,
) -> PolyForm {
    use crate::mollify::index_sets;
    use crate::poly::rat;
    let mut w = PolyForm::zero(dim, degree);
    for indices in index_sets(dim, degree) {
        let mut coeff = Poly::zero(dim);
        for _ in 0..rng.gen_range(1..=3) {
            let mut exps = vec![0u32; dim];
            let mut left = max_poly_degree;
            for e in exps.iter_mut() {
                *e = rng.gen_range(0..=left);
                left -= *e;
            }
            let c = rat(rng.gen_range(-9..=9), rng.gen_range(1..=9));
            coeff = coeff.add(&Poly::monomial(dim, exps, c));
        }
        if !coeff.is_zero() {
            w = w.add(&PolyForm::monomial_form(dim, indices, coeff));
        }
    }
    w
}

/// Seeded random rational vector with small entries.
pub fn random_rational_vector(rng: &mut impl rand::Rng, dim: usize) -> Vec<Rat> {
    use crate::poly::rat;
    (0..dim)
        .map(|_| rat(rng.gen_range(-5..=5), rng.gen_range(1..=7)))
        .collect()
}
