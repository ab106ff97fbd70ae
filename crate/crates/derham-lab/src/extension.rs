//! Extension operators: cylinder extension with the exact 1/(p+1) energy
//! factor, collar extension from the boundary of a simplex, stage-wise
//! extension from a skeleton, extension by zero past a top cell, and the
//! bouquet-to-disk extension.
//!
//! Wherever the construction is piecewise affine-rational the extended form
//! is kept as exact polynomial data; only the skeleton extension (whose
//! stages compose retraction maps with earlier stages) falls back to
//! numerically evaluable closures with analytically propagated exterior
//! derivatives.

use std::collections::BTreeMap;
use std::sync::Arc;

use num::traits::{One, Signed, Zero};

use crate::complex::SimplicialComplex;
use crate::error::{DerhamError, Result};
use crate::forms::{
    face_embedding, simplex_gram_inverse, simplex_volume_factor, AffineMap, Lp, PiecewiseForm,
    PolyForm,
};
use crate::mollify::index_sets;
use crate::poly::{rat, rat_to_f64, Poly, Rat};
use crate::quad::{gauss_legendre_01, simplex_rule};

// ---------------------------------------------------------------------------
// small exact linear algebra helpers
// ---------------------------------------------------------------------------

fn rat_det_small(m: &[Vec<Rat>]) -> Rat {
    match m.len() {
        0 => Rat::one(),
        1 => m[0][0].clone(),
        2 => &(&m[0][0] * &m[1][1]) - &(&m[0][1] * &m[1][0]),
        n => {
            let mut det = Rat::zero();
            for c in 0..n {
                let minor: Vec<Vec<Rat>> = (1..n)
                    .map(|r| (0..n).filter(|&cc| cc != c).map(|cc| m[r][cc].clone()).collect())
                    .collect();
                let term = &m[0][c] * &rat_det_small(&minor);
                if c % 2 == 0 {
                    det += term;
                } else {
                    det -= term;
                }
            }
            det
        }
    }
}

fn det_f64_small(m: &[Vec<f64>]) -> f64 {
    match m.len() {
        0 => 1.0,
        1 => m[0][0],
        2 => m[0][0] * m[1][1] - m[0][1] * m[1][0],
        n => {
            let mut det = 0.0;
            for c in 0..n {
                let minor: Vec<Vec<f64>> = (1..n)
                    .map(|r| (0..n).filter(|&cc| cc != c).map(|cc| m[r][cc]).collect())
                    .collect();
                let term = m[0][c] * det_f64_small(&minor);
                det += if c % 2 == 0 { term } else { -term };
            }
            det
        }
    }
}

/// Linear part and constant of the barycentric coordinate t_j on the
/// reference n-simplex, as a function of u = (t_1, ..., t_n).
fn bary_lin(n: usize, j: usize) -> (Vec<Rat>, Rat) {
    if j == 0 {
        (vec![-Rat::one(); n], Rat::one())
    } else {
        let mut row = vec![Rat::zero(); n];
        row[j - 1] = Rat::one();
        (row, Rat::zero())
    }
}

fn barycentrics_f64(n: usize, u: &[f64]) -> Vec<f64> {
    let mut t = Vec::with_capacity(n + 1);
    t.push(1.0 - u.iter().sum::<f64>());
    t.extend_from_slice(u);
    t
}

// ---------------------------------------------------------------------------
// cylinder extension
// ---------------------------------------------------------------------------

fn poly_lift(p: &Poly) -> Poly {
    let n = p.dim();
    let mut out = Poly::zero(n + 1);
    for (exps, c) in p.terms() {
        let mut e = exps.clone();
        e.push(0);
        out = out.add(&Poly::monomial(n + 1, e, c.clone()));
    }
    out
}

/// The form on the cylinder base x [0,1] obtained by ignoring the last
/// coordinate (constant in t, no dt components).
pub fn cylinder_lift(w: &PolyForm) -> PolyForm {
    let n = w.dim();
    let mut out = PolyForm::zero(n + 1, w.degree());
    for (idx, c) in w.terms() {
        out = out.add(&PolyForm::monomial_form(n + 1, idx.clone(), poly_lift(c)));
    }
    out
}

/// Cylinder extension: w on the base simplex becomes (1 - t) w on
/// base x [0,1], with t the last coordinate. The trace at t = 0 is w
/// exactly and the trace at t = 1 vanishes.
pub fn extend_cylinder(w: &PolyForm) -> PolyForm {
    let n = w.dim();
    let factor = Poly::one(n + 1).sub(&Poly::var(n + 1, n));
    cylinder_lift(w).scale_poly(&factor)
}

fn is_even_exponent(p: f64) -> Option<u32> {
    let half = p / 2.0;
    if half >= 0.5 && (half - half.round()).abs() < 1e-12 && half.round() >= 1.0 {
        Some(half.round() as u32)
    } else {
        None
    }
}

/// L_p norm of a polynomial form on the unit-edge reference simplex. Even
/// integer p is integrated exactly; other finite p uses a simplex rule of
/// the given degree (kept as an explicit argument so that norms entering a
/// ratio can share the same nodes).
pub fn simplex_lp_norm(w: &PolyForm, p: Lp, quad_degree: u32) -> Result<f64> {
    p.validate()?;
    let n = w.dim();
    if n == 0 {
        return Err(DerhamError::DimensionMismatch(
            "simplex_lp_norm needs a positive-dimensional patch".into(),
        ));
    }
    let nsq = w.norm_sq_poly(&simplex_gram_inverse(n));
    let vol = simplex_volume_factor(n);
    match p {
        Lp::Infinity => {
            let mut sup = 0.0f64;
            for node in simplex_rule(n, quad_degree) {
                sup = sup.max(nsq.eval_f64(&node.point).max(0.0).sqrt());
            }
            for corner in 0..=n {
                let mut pt = vec![0.0; n];
                if corner > 0 {
                    pt[corner - 1] = 1.0;
                }
                sup = sup.max(nsq.eval_f64(&pt).max(0.0).sqrt());
            }
            Ok(sup)
        }
        Lp::Finite(p) => {
            if let Some(half) = is_even_exponent(p) {
                let power = nsq.pow(half);
                return Ok((vol * rat_to_f64(&power.integrate_ref_simplex()))
                    .max(0.0)
                    .powf(1.0 / p));
            }
            let total: f64 = simplex_rule(n, quad_degree)
                .iter()
                .map(|node| node.weight * nsq.eval_f64(&node.point).max(0.0).powf(p / 2.0))
                .sum();
            Ok((vol * total).max(0.0).powf(1.0 / p))
        }
    }
}

/// L_p norm on the cylinder base x [0,1] with the product metric (block
/// Gram: base simplex Gram plus dt^2). The base quadrature matches
/// `simplex_lp_norm` at the same degree, so ratios of the two norms are
/// exact up to roundoff.
pub fn cylinder_lp_norm(w: &PolyForm, p: Lp, quad_degree: u32) -> Result<f64> {
    p.validate()?;
    if w.dim() == 0 {
        return Err(DerhamError::DimensionMismatch(
            "cylinder form must have at least the t coordinate".into(),
        ));
    }
    let n = w.dim() - 1;
    let mut ginv = vec![vec![Rat::zero(); n + 1]; n + 1];
    let base = simplex_gram_inverse(n);
    for i in 0..n {
        for j in 0..n {
            ginv[i][j] = base[i][j].clone();
        }
    }
    ginv[n][n] = Rat::one();
    let nsq = w.norm_sq_poly(&ginv);
    let vol = simplex_volume_factor(n);
    let base_nodes: Vec<(Vec<f64>, f64)> = if n == 0 {
        vec![(Vec::new(), 1.0)]
    } else {
        simplex_rule(n, quad_degree)
            .into_iter()
            .map(|node| (node.point, node.weight))
            .collect()
    };
    let (t_nodes, t_weights) = gauss_legendre_01((quad_degree as usize) / 2 + 2);
    match p {
        Lp::Infinity => {
            let mut sup = 0.0f64;
            for (x, _) in &base_nodes {
                for t in t_nodes.iter().chain([0.0, 1.0].iter()) {
                    let mut pt = x.clone();
                    pt.push(*t);
                    sup = sup.max(nsq.eval_f64(&pt).max(0.0).sqrt());
                }
            }
            Ok(sup)
        }
        Lp::Finite(p) => {
            if let Some(half) = is_even_exponent(p) {
                let in_t = nsq.pow(half).integrate_var_01(n);
                let val = if n == 0 {
                    in_t.eval_f64(&[0.0])
                } else {
                    let exprs: Vec<Poly> = (0..n).map(|i| Poly::var(n, i)).collect();
                    let mut padded = exprs;
                    padded.push(Poly::zero(n));
                    rat_to_f64(&in_t.compose(&padded).integrate_ref_simplex())
                };
                return Ok((vol * val).max(0.0).powf(1.0 / p));
            }
            let mut total = 0.0;
            for (x, wx) in &base_nodes {
                for (t, wt) in t_nodes.iter().zip(&t_weights) {
                    let mut pt = x.clone();
                    pt.push(*t);
                    total += wx * wt * nsq.eval_f64(&pt).max(0.0).powf(p / 2.0);
                }
            }
            Ok((vol * total).max(0.0).powf(1.0 / p))
        }
    }
}

// ---------------------------------------------------------------------------
// collar extension from the boundary of a simplex
// ---------------------------------------------------------------------------

const COLLAR_SHRINK: i64 = 2; // the zero region is the inner copy at scale 1/2

fn collar_cutoff(n: usize) -> Rat {
    rat(1, COLLAR_SHRINK * (n as i64 + 1))
}

/// Retraction of the region {t_k minimal} onto the facet opposite vertex k:
/// t_j |-> t_j + t_k / n for j != k, expressed in u-coordinates on both
/// sides. Only used for n >= 2 (for n = 1 the facet is a point).
fn collar_retraction(n: usize, k: usize) -> AffineMap {
    let facet: Vec<usize> = (0..=n).filter(|&j| j != k).collect();
    let (krow, kshift) = bary_lin(n, k);
    let inv_n = rat(1, n as i64);
    let mut matrix = Vec::new();
    let mut shift = Vec::new();
    for &f in &facet[1..] {
        let (row, s) = bary_lin(n, f);
        let r: Vec<Rat> = row
            .iter()
            .zip(&krow)
            .map(|(a, b)| a + &(b * &inv_n))
            .collect();
        matrix.push(r);
        shift.push(&s + &(&kshift * &inv_n));
    }
    AffineMap::new(matrix, shift)
}

/// Cutoff 1 - 2(n+1) t_k, equal to 1 on the facet opposite k and to 0 on
/// the inner simplex copy at scale 1/2.
fn collar_beta(n: usize, k: usize) -> Poly {
    let (row, shift) = bary_lin(n, k);
    let scale = rat(2 * (n as i64 + 1), 1);
    let mut p = Poly::constant(n, Rat::one() - &scale * &shift);
    for j in 0..n {
        let c = &row[j] * &scale;
        if !c.is_zero() {
            p = p.sub(&Poly::var(n, j).scale(&c));
        }
    }
    p
}

/// Triangulation of the region {t_k <= t_j for all j, t_k <= cutoff} of the
/// reference simplex, as rational vertex lists in u-coordinates.
fn collar_cells(n: usize, k: usize) -> Vec<Vec<Vec<Rat>>> {
    let c = collar_cutoff(n);
    match n {
        1 => {
            if k == 0 {
                vec![vec![vec![Rat::one() - &c], vec![Rat::one()]]]
            } else {
                vec![vec![vec![Rat::zero()], vec![c]]]
            }
        }
        2 => {
            let upoint = |t: [Rat; 3]| vec![t[1].clone(), t[2].clone()];
            let vert = |v: usize| {
                let mut t = [Rat::zero(), Rat::zero(), Rat::zero()];
                t[v] = Rat::one();
                upoint(t)
            };
            let others: Vec<usize> = (0..3).filter(|&j| j != k).collect();
            let (i, j) = (others[0], others[1]);
            let mid = |a: usize, b: usize| {
                // t_a = t_b = cutoff, remaining coordinate carries the rest
                let mut t = [Rat::zero(), Rat::zero(), Rat::zero()];
                t[a] = c.clone();
                t[b] = c.clone();
                let rest = (0..3).find(|v| *v != a && *v != b).unwrap();
                t[rest] = Rat::one() - &(&c + &c);
                upoint(t)
            };
            // region polygon: v_i, v_j, (t_k = t_i), (t_k = t_j)
            let q1 = mid(k, i);
            let q2 = mid(k, j);
            vec![
                vec![vert(i), vert(j), q1.clone()],
                vec![vert(i), q1, q2],
            ]
        }
        _ => unreachable!("collar cells only built for n <= 2"),
    }
}

fn cell_affine(verts: &[Vec<Rat>]) -> (AffineMap, Rat) {
    let n = verts[0].len();
    let matrix: Vec<Vec<Rat>> = (0..n)
        .map(|r| (0..n).map(|c| &verts[c + 1][r] - &verts[0][r]).collect())
        .collect();
    let det = rat_det_small(&matrix);
    let map = AffineMap::new(matrix, verts[0].clone());
    (map, det.abs())
}

fn integrate_poly_over_cell(g: &Poly, verts: &[Vec<Rat>]) -> Rat {
    let (map, absdet) = cell_affine(verts);
    let composed = g.compose(&map.coordinate_polys());
    &composed.integrate_ref_simplex() * &absdet
}

/// Extension of a form on the boundary of the reference n-simplex to the
/// whole simplex: on the region nearest the facet opposite vertex k the
/// extension is beta_k times the pullback of the facet datum along the
/// collar retraction, and it vanishes on the inner copy of the simplex at
/// scale 1/2. The trace on each facet reproduces the datum exactly; across
/// the seams between regions the extension is only measurably defined
/// (they have measure zero and all norms ignore them).
pub struct CollarExtension {
    dim: usize,
    degree: usize,
    pieces: Vec<PolyForm>,
}

/// Build the collar extension of `omega`, a piecewise form on the boundary
/// complex of the simplex [0, ..., n] (every facet a maximal simplex).
/// Supported for n <= 2.
pub fn extend_from_boundary(omega: &PiecewiseForm) -> Result<CollarExtension> {
    let complex = omega.complex();
    let verts = complex.vertices().to_vec();
    let n = verts.len().saturating_sub(1);
    if n == 0 || verts != (0..=n as u32).collect::<Vec<_>>() {
        return Err(DerhamError::InvalidParameter(
            "boundary extension expects the boundary complex of [0..n]".into(),
        ));
    }
    let maximal = complex.maximal_simplices();
    let facets: Vec<Vec<u32>> = (0..=n)
        .map(|k| (0..=n as u32).filter(|&v| v != k as u32).collect())
        .collect();
    let mut sorted = maximal.clone();
    sorted.sort();
    let mut expected = facets.clone();
    expected.sort();
    if sorted != expected {
        return Err(DerhamError::InvalidParameter(
            "boundary extension expects exactly the n+1 facets as maximal simplices".into(),
        ));
    }
    if n > 2 {
        return Err(DerhamError::InvalidParameter(format!(
            "boundary extension implemented for ambient dimension <= 2, got {n}"
        )));
    }
    omega.check_face_compatibility()?;
    let degree = omega.degree();
    let mut pieces = Vec::with_capacity(n + 1);
    for k in 0..=n {
        let datum = omega
            .piece(&facets[k])
            .ok_or_else(|| DerhamError::UnknownFace(facets[k].clone()))?;
        let beta = collar_beta(n, k);
        let piece = if n == 1 {
            // the facet is a point: only a 0-form carries data
            if degree == 0 {
                let c = datum.coeff(&[]).eval_rat(&[]);
                PolyForm::constant(1, c).scale_poly(&beta)
            } else {
                PolyForm::zero(1, degree)
            }
        } else {
            let retraction = collar_retraction(n, k);
            datum.pullback(&retraction)?.scale_poly(&beta)
        };
        pieces.push(piece);
    }
    Ok(CollarExtension { dim: n, degree, pieces })
}

impl CollarExtension {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    /// The polynomial expression valid on the region nearest the facet
    /// opposite vertex k (already including the beta cutoff).
    pub fn region_piece(&self, k: usize) -> &PolyForm {
        &self.pieces[k]
    }

    /// Component values at a point of the reference simplex, ordered by
    /// increasing index sets.
    pub fn eval(&self, u: &[f64]) -> Vec<f64> {
        let t = barycentrics_f64(self.dim, u);
        let k = (0..=self.dim)
            .min_by(|&a, &b| t[a].partial_cmp(&t[b]).unwrap())
            .unwrap();
        let cutoff = rat_to_f64(&collar_cutoff(self.dim));
        if t[k] >= cutoff {
            return vec![0.0; index_sets(self.dim, self.degree).len()];
        }
        self.pieces[k].eval_components(u).into_iter().map(|(_, v)| v).collect()
    }

    /// Exact trace on the facet opposite vertex k.
    pub fn trace_on_facet(&self, k: usize) -> Result<PolyForm> {
        let ambient: Vec<u32> = (0..=self.dim as u32).collect();
        let facet: Vec<u32> = ambient.iter().copied().filter(|&v| v != k as u32).collect();
        self.pieces[k].pullback(&face_embedding(&facet, &ambient))
    }

    fn lp_pow(&self, forms: &[PolyForm], p: f64, quad_degree: u32) -> f64 {
        let n = self.dim;
        let ginv = simplex_gram_inverse(n);
        let vol = simplex_volume_factor(n);
        let mut total = 0.0;
        for (k, w) in forms.iter().enumerate() {
            let nsq = w.norm_sq_poly(&ginv);
            for cell in collar_cells(n, k) {
                if let Some(half) = is_even_exponent(p) {
                    total +=
                        vol * rat_to_f64(&integrate_poly_over_cell(&nsq.pow(half), &cell));
                } else {
                    let (map, absdet) = cell_affine(&cell);
                    let scale = rat_to_f64(&absdet);
                    for node in simplex_rule(n, quad_degree) {
                        let x = map.apply_f64(&node.point);
                        total += vol
                            * scale
                            * node.weight
                            * nsq.eval_f64(&x).max(0.0).powf(p / 2.0);
                    }
                }
            }
        }
        total.max(0.0)
    }

    fn sup_norm(&self, forms: &[PolyForm], quad_degree: u32) -> f64 {
        let n = self.dim;
        let ginv = simplex_gram_inverse(n);
        let mut sup = 0.0f64;
        for (k, w) in forms.iter().enumerate() {
            let nsq = w.norm_sq_poly(&ginv);
            for cell in collar_cells(n, k) {
                let (map, _) = cell_affine(&cell);
                for node in simplex_rule(n, quad_degree) {
                    let x = map.apply_f64(&node.point);
                    sup = sup.max(nsq.eval_f64(&x).max(0.0).sqrt());
                }
                for v in &cell {
                    let x: Vec<f64> = v.iter().map(rat_to_f64).collect();
                    sup = sup.max(nsq.eval_f64(&x).max(0.0).sqrt());
                }
            }
        }
        sup
    }

    /// L_p norm over the whole simplex (the extension vanishes outside the
    /// collar regions). Even integer p is exact.
    pub fn lp_norm(&self, p: Lp, quad_degree: u32) -> Result<f64> {
        p.validate()?;
        match p {
            Lp::Infinity => Ok(self.sup_norm(&self.pieces, quad_degree)),
            Lp::Finite(p) => Ok(self.lp_pow(&self.pieces, p, quad_degree).powf(1.0 / p)),
        }
    }

    /// Sobolev graph norm (||w||_p^p + ||dw||_p^p)^(1/p); the exterior
    /// derivative of each region piece includes the d(beta) wedge term.
    pub fn sobolev_norm(&self, p: Lp, quad_degree: u32) -> Result<f64> {
        p.validate()?;
        let d: Vec<PolyForm> = self.pieces.iter().map(|w| w.exterior_d()).collect();
        match p {
            Lp::Infinity => Ok(self
                .sup_norm(&self.pieces, quad_degree)
                .max(self.sup_norm(&d, quad_degree))),
            Lp::Finite(p) => {
                let a = self.lp_pow(&self.pieces, p, quad_degree);
                let b = self.lp_pow(&d, p, quad_degree);
                Ok((a + b).powf(1.0 / p))
            }
        }
    }
}

// ---------------------------------------------------------------------------
// numerically evaluable forms and the skeleton extension
// ---------------------------------------------------------------------------

type EvalFn = Arc<dyn Fn(&[f64]) -> Vec<f64> + Send + Sync>;

/// A numerically evaluable k-form on a reference simplex with an
/// analytically propagated exterior derivative. Components are ordered by
/// increasing index sets.
#[derive(Clone)]
pub struct NumForm {
    dim: usize,
    degree: usize,
    eval: EvalFn,
    d_eval: EvalFn,
}

impl NumForm {
    pub fn new(dim: usize, degree: usize, eval: EvalFn, d_eval: EvalFn) -> Self {
        NumForm { dim, degree, eval, d_eval }
    }

    pub fn from_polyform(w: &PolyForm) -> Self {
        let dim = w.dim();
        let degree = w.degree();
        let w0 = w.clone();
        let wd = w.exterior_d();
        NumForm::new(
            dim,
            degree,
            Arc::new(move |x| w0.eval_components(x).into_iter().map(|(_, v)| v).collect()),
            Arc::new(move |x| wd.eval_components(x).into_iter().map(|(_, v)| v).collect()),
        )
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn eval(&self, x: &[f64]) -> Vec<f64> {
        (self.eval)(x)
    }

    pub fn d_eval(&self, x: &[f64]) -> Vec<f64> {
        (self.d_eval)(x)
    }
}

fn minor_table(m: &[Vec<f64>], sources: &[Vec<u8>], targets: &[Vec<u8>]) -> Vec<Vec<f64>> {
    targets
        .iter()
        .map(|t| {
            sources
                .iter()
                .map(|s| {
                    let minor: Vec<Vec<f64>> = s
                        .iter()
                        .map(|&r| t.iter().map(|&c| m[r as usize][c as usize]).collect())
                        .collect();
                    det_f64_small(&minor)
                })
                .collect()
        })
        .collect()
}

struct CollarRegion {
    matrix: Vec<Vec<f64>>,
    shift: Vec<f64>,
    dbeta: Vec<f64>,
    pull: Vec<Vec<f64>>,
    pull_d: Vec<Vec<f64>>,
}

/// One collar step in floating point: extend facet data (opposite vertex k
/// in position k) over the n-simplex. Mirrors `extend_from_boundary` but
/// accepts numeric facet data, which is what the later skeleton stages
/// produce.
fn collar_step_num(facets: Vec<NumForm>, n: usize, degree: usize) -> NumForm {
    let cutoff = rat_to_f64(&collar_cutoff(n));
    let src_sets = index_sets(n - 1, degree);
    let tgt_sets = index_sets(n, degree);
    let src_d = index_sets(n - 1, degree + 1);
    let tgt_d = index_sets(n, degree + 1);
    let tgt_pos: BTreeMap<Vec<u8>, usize> =
        tgt_sets.iter().cloned().enumerate().map(|(i, s)| (s, i)).collect();
    let scale = 2.0 * (n as f64 + 1.0);
    let regions: Vec<CollarRegion> = (0..=n)
        .map(|k| {
            let facet: Vec<usize> = (0..=n).filter(|&j| j != k).collect();
            let grad = |j: usize| -> Vec<f64> {
                if j == 0 {
                    vec![-1.0; n]
                } else {
                    let mut g = vec![0.0; n];
                    g[j - 1] = 1.0;
                    g
                }
            };
            let const_part = |j: usize| if j == 0 { 1.0 } else { 0.0 };
            let gk = grad(k);
            let mut matrix = Vec::new();
            let mut shift = Vec::new();
            for &f in &facet[1..] {
                let gf = grad(f);
                matrix.push(
                    gf.iter().zip(&gk).map(|(a, b)| a + b / n as f64).collect::<Vec<f64>>(),
                );
                shift.push(const_part(f) + const_part(k) / n as f64);
            }
            let dbeta: Vec<f64> = gk.iter().map(|g| -scale * g).collect();
            CollarRegion {
                pull: minor_table(&matrix, &src_sets, &tgt_sets),
                pull_d: minor_table(&matrix, &src_d, &tgt_d),
                matrix,
                shift,
                dbeta,
            }
        })
        .collect();
    let regions = Arc::new(regions);
    let facets = Arc::new(facets);

    let locate = move |u: &[f64]| -> (usize, f64) {
        let t = barycentrics_f64(n, u);
        let k = (0..=n)
            .min_by(|&a, &b| t[a].partial_cmp(&t[b]).unwrap())
            .unwrap();
        (k, t[k])
    };
    let retract = |reg: &CollarRegion, u: &[f64]| -> Vec<f64> {
        reg.matrix
            .iter()
            .zip(&reg.shift)
            .map(|(row, s)| s + row.iter().zip(u).map(|(a, b)| a * b).sum::<f64>())
            .collect()
    };

    let regions_e = regions.clone();
    let facets_e = facets.clone();
    let n_tgt = tgt_sets.len();
    let eval: EvalFn = Arc::new(move |u| {
        let (k, tk) = locate(u);
        if tk >= cutoff {
            return vec![0.0; n_tgt];
        }
        let reg = &regions_e[k];
        let y = retract(reg, u);
        let w = facets_e[k].eval(&y);
        let beta = 1.0 - scale * tk;
        reg.pull
            .iter()
            .map(|row| beta * row.iter().zip(&w).map(|(m, v)| m * v).sum::<f64>())
            .collect()
    });

    let tgt_sets_d = tgt_d.clone();
    let n_tgt_d = tgt_d.len();
    let d_eval: EvalFn = Arc::new(move |u| {
        let t = barycentrics_f64(n, u);
        let k = (0..=n)
            .min_by(|&a, &b| t[a].partial_cmp(&t[b]).unwrap())
            .unwrap();
        let tk = t[k];
        if tk >= cutoff {
            return vec![0.0; n_tgt_d];
        }
        let reg = &regions[k];
        let y: Vec<f64> = reg
            .matrix
            .iter()
            .zip(&reg.shift)
            .map(|(row, s)| s + row.iter().zip(u).map(|(a, b)| a * b).sum::<f64>())
            .collect();
        let w = facets[k].eval(&y);
        let wd = facets[k].d_eval(&y);
        let beta = 1.0 - scale * tk;
        let pulled: Vec<f64> = reg
            .pull
            .iter()
            .map(|row| row.iter().zip(&w).map(|(m, v)| m * v).sum::<f64>())
            .collect();
        let pulled_d: Vec<f64> = reg
            .pull_d
            .iter()
            .map(|row| row.iter().zip(&wd).map(|(m, v)| m * v).sum::<f64>())
            .collect();
        tgt_sets_d
            .iter()
            .zip(&pulled_d)
            .map(|(set, pd)| {
                let mut v = beta * pd;
                for (pos, &i) in set.iter().enumerate() {
                    let rest: Vec<u8> =
                        set.iter().copied().filter(|&j| j != i).collect();
                    let sign = if pos % 2 == 0 { 1.0 } else { -1.0 };
                    v += sign * reg.dbeta[i as usize] * pulled[tgt_pos[&rest]];
                }
                v
            })
            .collect()
    });

    NumForm::new(n, degree, eval, d_eval)
}

fn subdivided_cells(dim: usize, depth: u32) -> Vec<Vec<Vec<f64>>> {
    match dim {
        0 => vec![vec![Vec::new()]],
        1 => {
            let parts = 1usize << depth;
            (0..parts)
                .map(|i| {
                    vec![
                        vec![i as f64 / parts as f64],
                        vec![(i + 1) as f64 / parts as f64],
                    ]
                })
                .collect()
        }
        2 => {
            let mut cells = vec![vec![vec![0.0, 0.0], vec![1.0, 0.0], vec![0.0, 1.0]]];
            for _ in 0..depth {
                let mut next = Vec::with_capacity(cells.len() * 4);
                for cell in &cells {
                    let (a, b, c) = (&cell[0], &cell[1], &cell[2]);
                    let mid = |p: &Vec<f64>, q: &Vec<f64>| -> Vec<f64> {
                        vec![(p[0] + q[0]) / 2.0, (p[1] + q[1]) / 2.0]
                    };
                    let (ab, bc, ca) = (mid(a, b), mid(b, c), mid(c, a));
                    next.push(vec![a.clone(), ab.clone(), ca.clone()]);
                    next.push(vec![ab.clone(), b.clone(), bc.clone()]);
                    next.push(vec![ca.clone(), bc.clone(), c.clone()]);
                    next.push(vec![ab, bc, ca]);
                }
                cells = next;
            }
            cells
        }
        _ => unreachable!("subdivided quadrature only built for dim <= 2"),
    }
}

fn metric_minors(dim: usize, degree: usize) -> Vec<Vec<f64>> {
    let ginv: Vec<Vec<f64>> = simplex_gram_inverse(dim)
        .iter()
        .map(|row| row.iter().map(rat_to_f64).collect())
        .collect();
    let sets = index_sets(dim, degree);
    minor_table(&ginv, &sets, &sets)
}

/// Integral of |w|^p (or |dw|^p with `use_d`) over the reference simplex,
/// by a fixed-degree rule on a 2^depth-refined subdivision. The refinement
/// absorbs the kinks and measure-zero seams the collar construction
/// introduces.
pub fn numform_lp_pow(f: &NumForm, p: f64, depth: u32, quad_degree: u32, use_d: bool) -> f64 {
    let dim = f.dim();
    let degree = if use_d { f.degree() + 1 } else { f.degree() };
    let comps = |x: &[f64]| if use_d { f.d_eval(x) } else { f.eval(x) };
    if dim == 0 {
        let v = comps(&[]);
        return if v.is_empty() { 0.0 } else { v[0].abs().powf(p) };
    }
    if degree > dim {
        return 0.0;
    }
    let mg = metric_minors(dim, degree);
    let vol = simplex_volume_factor(dim);
    let nodes = simplex_rule(dim, quad_degree);
    let mut total = 0.0;
    for cell in subdivided_cells(dim, depth) {
        let v0 = &cell[0];
        let cols: Vec<Vec<f64>> = (1..=dim)
            .map(|i| (0..dim).map(|r| cell[i][r] - v0[r]).collect())
            .collect();
        let matrix: Vec<Vec<f64>> = (0..dim)
            .map(|r| (0..dim).map(|c| cols[c][r]).collect())
            .collect();
        let absdet = det_f64_small(&matrix).abs();
        for node in &nodes {
            let x: Vec<f64> = (0..dim)
                .map(|r| v0[r] + (0..dim).map(|c| matrix[r][c] * node.point[c]).sum::<f64>())
                .collect();
            let c = comps(&x);
            let mut nsq = 0.0;
            for (i, ci) in c.iter().enumerate() {
                for (j, cj) in c.iter().enumerate() {
                    nsq += ci * cj * mg[i][j];
                }
            }
            total += node.weight * absdet * nsq.max(0.0).powf(p / 2.0);
        }
    }
    vol * total.max(0.0)
}

/// Stage-wise extension of a form on the m-skeleton of a complex to the
/// whole complex: each stage applies the collar construction on every
/// simplex of the next dimension, with facet data taken from the previous
/// stage. The first stage is the exact collar extension; later stages are
/// numeric with analytically propagated exterior derivatives.
pub struct SkeletonExtension {
    complex: Arc<SimplicialComplex>,
    degree: usize,
    source_dim: usize,
    layers: BTreeMap<usize, BTreeMap<Vec<u32>, NumForm>>,
}

pub fn extend_from_skeleton(
    omega: &PiecewiseForm,
    target: &Arc<SimplicialComplex>,
) -> Result<SkeletonExtension> {
    let m = omega.complex().dim();
    let n = target.dim();
    if n > 2 {
        return Err(DerhamError::InvalidParameter(format!(
            "skeleton extension implemented for ambient dimension <= 2, got {n}"
        )));
    }
    if m >= n {
        return Err(DerhamError::InvalidParameter(format!(
            "skeleton dimension {m} must be below the ambient dimension {n}"
        )));
    }
    if omega.complex().simplices(m) != target.simplices(m) {
        return Err(DerhamError::InvalidParameter(
            "source must live on the m-skeleton of the target complex".into(),
        ));
    }
    if omega
        .complex()
        .maximal_simplices()
        .iter()
        .any(|s| s.len() != m + 1)
    {
        return Err(DerhamError::InvalidParameter(
            "skeleton source must be a pure complex".into(),
        ));
    }
    omega.check_face_compatibility()?;
    let degree = omega.degree();
    let mut layers: BTreeMap<usize, BTreeMap<Vec<u32>, NumForm>> = BTreeMap::new();
    let base: BTreeMap<Vec<u32>, NumForm> = target
        .simplices(m)
        .iter()
        .map(|s| {
            let piece = omega.piece(s).expect("maximal piece");
            (s.clone(), NumForm::from_polyform(piece))
        })
        .collect();
    layers.insert(m, base);
    for d in (m + 1)..=n {
        let prev = layers[&(d - 1)].clone();
        let mut layer = BTreeMap::new();
        for sigma in target.simplices(d) {
            let facets: Vec<NumForm> = (0..=d)
                .map(|k| {
                    let facet: Vec<u32> = sigma
                        .iter()
                        .enumerate()
                        .filter(|&(i, _)| i != k)
                        .map(|(_, &v)| v)
                        .collect();
                    prev[&facet].clone()
                })
                .collect();
            layer.insert(sigma.clone(), collar_step_num(facets, d, degree));
        }
        layers.insert(d, layer);
    }
    Ok(SkeletonExtension {
        complex: target.clone(),
        degree,
        source_dim: m,
        layers,
    })
}

impl SkeletonExtension {
    pub fn complex(&self) -> &Arc<SimplicialComplex> {
        &self.complex
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn source_dim(&self) -> usize {
        self.source_dim
    }

    /// The extension restricted to dimension-d simplices (d between the
    /// source dimension and the ambient dimension).
    pub fn layer(&self, d: usize) -> Option<&BTreeMap<Vec<u32>, NumForm>> {
        self.layers.get(&d)
    }

    fn layer_lp_pow(&self, d: usize, p: f64, depth: u32, quad_degree: u32, use_d: bool) -> f64 {
        self.layers[&d]
            .values()
            .map(|f| numform_lp_pow(f, p, depth, quad_degree, use_d))
            .sum()
    }

    /// L_p norm of the top-dimensional extension.
    pub fn lp_norm(&self, p: f64, depth: u32, quad_degree: u32) -> f64 {
        self.layer_lp_pow(self.complex.dim(), p, depth, quad_degree, false)
            .powf(1.0 / p)
    }

    /// Sobolev graph norm of the top-dimensional extension.
    pub fn graph_norm(&self, p: f64, depth: u32, quad_degree: u32) -> f64 {
        let n = self.complex.dim();
        let a = self.layer_lp_pow(n, p, depth, quad_degree, false);
        let b = self.layer_lp_pow(n, p, depth, quad_degree, true);
        (a + b).powf(1.0 / p)
    }
}

// ---------------------------------------------------------------------------
// extension by zero past a top cell
// ---------------------------------------------------------------------------

/// Extension by zero of a top-degree form supported on one top cell of a
/// complex: the collapse of the complement onto the cell boundary pulls a
/// top form back to zero there, so the extension is the form on the cell
/// and zero on every other top cell. Only top degree is admissible (lower
/// degrees would pick up nonzero pullback terms from the collapse).
pub fn extend_by_zero_sphere(
    complex: &Arc<SimplicialComplex>,
    ball: &[u32],
    omega: &PolyForm,
) -> Result<PiecewiseForm> {
    let n = complex.dim();
    if omega.degree() != n || omega.dim() != n {
        return Err(DerhamError::DegreeOutOfRange(format!(
            "extension by zero needs a top-degree form: complex dimension {n}, \
             form degree {} on R^{}",
            omega.degree(),
            omega.dim()
        )));
    }
    if ball.len() != n + 1 || !complex.maximal_simplices().iter().any(|s| s == ball) {
        return Err(DerhamError::UnknownFace(ball.to_vec()));
    }
    let mut out = PiecewiseForm::zero(complex.clone(), n);
    out.set_piece(ball, omega.clone())?;
    Ok(out)
}

// ---------------------------------------------------------------------------
// bouquet extension
// ---------------------------------------------------------------------------

/// The m-bouquet as a 1-complex: rays [0, i] for i = 1..m glued at the
/// center 0.
pub fn bouquet_star_complex(m: usize) -> SimplicialComplex {
    assert!(m >= 1);
    let edges: Vec<Vec<u32>> = (1..=m as u32).map(|i| vec![0, i]).collect();
    let refs: Vec<&[u32]> = edges.iter().map(|e| e.as_slice()).collect();
    SimplicialComplex::from_maximal(&refs)
}

/// A 2-complex disk neighbourhood of the m-bouquet: one midpoint vertex
/// m+i in the gap after ray i, and two triangles per gap joining the
/// neighbouring rays to it. For m = 1 the single ray gets a triangle on
/// each side (midpoints 2 and 3).
pub fn bouquet_disk_complex(m: usize) -> SimplicialComplex {
    assert!(m >= 1);
    let mut triangles: Vec<Vec<u32>> = Vec::new();
    if m == 1 {
        triangles.push(vec![0, 1, 2]);
        triangles.push(vec![0, 1, 3]);
    } else {
        for i in 1..=m as u32 {
            let next = i % m as u32 + 1;
            let mid = m as u32 + i;
            triangles.push(vec![0, i, mid]);
            triangles.push(vec![0, next, mid]);
        }
    }
    triangles.sort();
    let refs: Vec<&[u32]> = triangles.iter().map(|t| t.as_slice()).collect();
    SimplicialComplex::from_maximal(&refs)
}

/// Extension of a form on the m-bouquet to its disk neighbourhood: on each
/// triangle [0, j, mid] the extension is (1 - s) times the pullback of the
/// ray datum along the retraction collapsing the midpoint onto the center,
/// where s is the barycentric coordinate of the midpoint. Traces on the
/// rays reproduce the data exactly; 0-form data must agree at the center
/// so the pieces match across the median edges.
pub fn extend_bouquet(omega: &PiecewiseForm) -> Result<PiecewiseForm> {
    let complex = omega.complex();
    if complex.dim() != 1 {
        return Err(DerhamError::InvalidBouquet(
            "bouquet must be a 1-complex".into(),
        ));
    }
    let m = complex.vertices().len() - 1;
    if m == 0 || **complex != bouquet_star_complex(m) {
        return Err(DerhamError::InvalidBouquet(
            "expected rays [0, i] for i = 1..m".into(),
        ));
    }
    let degree = omega.degree();
    if degree == 0 {
        let center: Vec<Rat> = (1..=m as u32)
            .map(|i| {
                omega
                    .piece(&[0, i])
                    .expect("ray piece")
                    .coeff(&[])
                    .eval_rat(&[Rat::zero()])
            })
            .collect();
        if center.iter().any(|c| *c != center[0]) {
            return Err(DerhamError::IncompatibleTraces(
                "0-form data disagree at the bouquet center".into(),
            ));
        }
    }
    let disk = Arc::new(bouquet_disk_complex(m));
    let mut out = PiecewiseForm::zero(disk.clone(), degree);
    let retraction = AffineMap::new(vec![vec![Rat::one(), Rat::zero()]], vec![Rat::zero()]);
    let cutoff = Poly::one(2).sub(&Poly::var(2, 1));
    for triangle in disk.maximal_simplices() {
        let ray = triangle[1]; // [0, j, mid] with 0 < j <= m < mid
        let datum = omega
            .piece(&[0, ray])
            .ok_or_else(|| DerhamError::UnknownFace(vec![0, ray]))?;
        let piece = datum.pullback(&retraction)?.scale_poly(&cutoff);
        out.set_piece(&triangle, piece)?;
    }
    debug_assert!(out.check_face_compatibility().is_ok());
    Ok(out)
}

// ---------------------------------------------------------------------------
