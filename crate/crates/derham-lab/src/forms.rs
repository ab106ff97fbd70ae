//! Exterior algebra of polynomial differential forms on coordinate patches,
//! and piecewise forms on complexes with L_p / Sobolev graph norms.
//!
//! Forms on a simplex live in the affine coordinates u_1..u_m given by the
//! barycentric coordinates of all vertices but the first. The metric of the
//! unit-edge regular simplex enters through the Gram matrix
//! G_ij = (1 + delta_ij)/2, which is rational, so pointwise norms of forms
//! with rational coefficients stay exactly computable.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use itertools::Itertools;
use num::traits::{One, Zero};
use serde::{Deserialize, Serialize};

use crate::complex::SimplicialComplex;
use crate::error::{DerhamError, Result};
use crate::poly::{parse_rat, rat, rat_to_f64, Poly, Rat};
use crate::quad::simplex_rule;

/// A differential k-form on a patch of R^n with polynomial coefficients.
#[derive(Clone, PartialEq, Eq)]
pub struct PolyForm {
    dim: usize,
    degree: usize,
    /// strictly increasing index sets of length `degree` -> coefficient
    terms: BTreeMap<Vec<u8>, Poly>,
}

impl PolyForm {
    pub fn zero(dim: usize, degree: usize) -> Self {
        PolyForm { dim, degree, terms: BTreeMap::new() }
    }

    pub fn from_poly(p: Poly) -> Self {
        let dim = p.dim();
        let mut f = PolyForm::zero(dim, 0);
        f.insert(Vec::new(), p);
        f
    }

    pub fn constant(dim: usize, c: Rat) -> Self {
        PolyForm::from_poly(Poly::constant(dim, c))
    }

    /// The basis 1-form du_i.
    pub fn basis_one_form(dim: usize, i: u8) -> Self {
        let mut f = PolyForm::zero(dim, 1);
        f.insert(vec![i], Poly::one(dim));
        f
    }

    pub fn monomial_form(dim: usize, indices: Vec<u8>, coeff: Poly) -> Self {
        let degree = indices.len();
        assert!(indices.windows(2).all(|w| w[0] < w[1]));
        assert!(indices.iter().all(|&i| (i as usize) < dim));
        let mut f = PolyForm::zero(dim, degree);
        f.insert(indices, coeff);
        f
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Vec<u8>, &Poly)> {
        self.terms.iter()
    }

    pub fn coeff(&self, indices: &[u8]) -> Poly {
        self.terms
            .get(indices)
            .cloned()
            .unwrap_or_else(|| Poly::zero(self.dim))
    }

    pub fn max_poly_degree(&self) -> u32 {
        self.terms.values().map(|p| p.total_degree()).max().unwrap_or(0)
    }

    fn insert(&mut self, indices: Vec<u8>, coeff: Poly) {
        if coeff.is_zero() {
            return;
        }
        use std::collections::btree_map::Entry;
        match self.terms.entry(indices) {
            Entry::Vacant(e) => {
                e.insert(coeff);
            }
            Entry::Occupied(mut e) => {
                let sum = e.get().add(&coeff);
                if sum.is_zero() {
                    e.remove();
                } else {
                    *e.get_mut() = sum;
                }
            }
        }
    }

    pub fn add(&self, other: &PolyForm) -> PolyForm {
        assert_eq!(self.dim, other.dim, "dimension mismatch");
        assert!(
            self.is_zero() || other.is_zero() || self.degree == other.degree,
            "degree mismatch"
        );
        let mut out = self.clone();
        if out.is_zero() {
            out.degree = other.degree;
        }
        for (i, c) in &other.terms {
            out.insert(i.clone(), c.clone());
        }
        out
    }

    pub fn sub(&self, other: &PolyForm) -> PolyForm {
        self.add(&other.neg())
    }

    pub fn neg(&self) -> PolyForm {
        let mut out = PolyForm::zero(self.dim, self.degree);
        for (i, c) in &self.terms {
            out.terms.insert(i.clone(), c.neg());
        }
        out
    }

    pub fn scale(&self, c: &Rat) -> PolyForm {
        let mut out = PolyForm::zero(self.dim, self.degree);
        if c.is_zero() {
            return out;
        }
        for (i, p) in &self.terms {
            out.terms.insert(i.clone(), p.scale(c));
        }
        out
    }

    pub fn scale_poly(&self, g: &Poly) -> PolyForm {
        let mut out = PolyForm::zero(self.dim, self.degree);
        for (i, p) in &self.terms {
            out.insert(i.clone(), p.mul(g));
        }
        out
    }

    /// Wedge product; result degree deg a + deg b (zero form if > n).
    pub fn wedge(&self, other: &PolyForm) -> Result<PolyForm> {
        if self.dim != other.dim {
            return Err(DerhamError::DimensionMismatch(format!(
                "wedge of forms on R^{} and R^{}",
                self.dim, other.dim
            )));
        }
        let mut out = PolyForm::zero(self.dim, self.degree + other.degree);
        for (ia, ca) in &self.terms {
            for (ib, cb) in &other.terms {
                if let Some((merged, sign)) = merge_indices(ia, ib) {
                    let mut c = ca.mul(cb);
                    if sign < 0 {
                        c = c.neg();
                    }
                    out.insert(merged, c);
                }
            }
        }
        Ok(out)
    }

    /// Exterior derivative.
    pub fn exterior_d(&self) -> PolyForm {
        let mut out = PolyForm::zero(self.dim, self.degree + 1);
        for (indices, coeff) in &self.terms {
            for i in 0..self.dim as u8 {
                if indices.contains(&i) {
                    continue;
                }
                let dc = coeff.partial(i as usize);
                if dc.is_zero() {
                    continue;
                }
                let pos = indices.iter().filter(|&&j| j < i).count();
                let mut merged = indices.clone();
                merged.insert(pos, i);
                let signed = if pos % 2 == 1 { dc.neg() } else { dc };
                out.insert(merged, signed);
            }
        }
        out
    }

    /// Interior product with a polynomial vector field (degree must be >= 1).
    pub fn interior_product(&self, field: &VectorFieldPoly) -> Result<PolyForm> {
        if self.degree == 0 {
            return Err(DerhamError::DegreeOutOfRange(
                "interior product of a 0-form".into(),
            ));
        }
        Ok(self.contract(field))
    }

    /// Contraction; on 0-forms this is zero (internal convenience).
    pub(crate) fn contract(&self, field: &VectorFieldPoly) -> PolyForm {
        assert_eq!(self.dim, field.dim);
        let degree = self.degree.saturating_sub(1);
        let mut out = PolyForm::zero(self.dim, degree);
        for (indices, coeff) in &self.terms {
            for (pos, &i) in indices.iter().enumerate() {
                let comp = &field.components[i as usize];
                if comp.is_zero() {
                    continue;
                }
                let mut rest = indices.clone();
                rest.remove(pos);
                let mut c = coeff.mul(comp);
                if pos % 2 == 1 {
                    c = c.neg();
                }
                out.insert(rest, c);
            }
        }
        out
    }

    /// Cartan's magic formula: L_X = d iota_X + iota_X d.
    pub fn lie_derivative(&self, field: &VectorFieldPoly) -> PolyForm {
        let part1 = self.contract(field).exterior_d();
        let part2 = self.exterior_d().contract(field);
        part1.add(&part2)
    }

    /// Pullback along an affine map.
    pub fn pullback(&self, map: &AffineMap) -> Result<PolyForm> {
        if map.out_dim != self.dim {
            return Err(DerhamError::DimensionMismatch(format!(
                "pullback: map lands in R^{}, form lives on R^{}",
                map.out_dim, self.dim
            )));
        }
        let exprs = map.coordinate_polys();
        let mut out = PolyForm::zero(map.in_dim, self.degree);
        let k = self.degree;
        if k > map.in_dim {
            return Ok(out);
        }
        let target_sets: Vec<Vec<u8>> = (0..map.in_dim as u8).combinations(k).collect();
        for (indices, coeff) in &self.terms {
            let composed = coeff.compose(&exprs);
            if composed.is_zero() {
                continue;
            }
            for target in &target_sets {
                // det of the minor rows = indices, cols = target
                let minor: Vec<Vec<Rat>> = indices
                    .iter()
                    .map(|&r| {
                        target
                            .iter()
                            .map(|&c| map.matrix[r as usize][c as usize].clone())
                            .collect()
                    })
                    .collect();
                let det = rat_det(minor);
                if det.is_zero() {
                    continue;
                }
                out.insert(target.clone(), composed.scale(&det));
            }
        }
        Ok(out)
    }

    /// Component values at a point, ordered by increasing index sets.
    pub fn eval_components(&self, x: &[f64]) -> Vec<(Vec<u8>, f64)> {
        (0..self.dim as u8)
            .combinations(self.degree)
            .map(|indices| {
                let v = self
                    .terms
                    .get(&indices)
                    .map(|p| p.eval_f64(x))
                    .unwrap_or(0.0);
                (indices, v)
            })
            .collect()
    }

    /// Pointwise squared norm as a polynomial, with respect to the inverse
    /// Gram matrix `ginv` of the coordinate frame.
    pub fn norm_sq_poly(&self, ginv: &[Vec<Rat>]) -> Poly {
        let mut acc = Poly::zero(self.dim);
        for (ia, ca) in &self.terms {
            for (ib, cb) in &self.terms {
                let minor: Vec<Vec<Rat>> = ia
                    .iter()
                    .map(|&r| {
                        ib.iter()
                            .map(|&c| ginv[r as usize][c as usize].clone())
                            .collect()
                    })
                    .collect();
                let det = rat_det(minor);
                if det.is_zero() {
                    continue;
                }
                acc = acc.add(&ca.mul(cb).scale(&det));
            }
        }
        acc
    }

    pub fn to_repr(&self) -> PolyFormRepr {
        PolyFormRepr {
            dim: self.dim,
            degree: self.degree,
            terms: self
                .terms
                .iter()
                .map(|(indices, poly)| TermRepr {
                    indices: indices.clone(),
                    monomials: poly
                        .terms()
                        .map(|(exps, coeff)| MonoRepr {
                            exps: exps.clone(),
                            coeff: coeff.to_string(),
                        })
                        .collect(),
                })
                .collect(),
        }
    }

    pub fn from_repr(repr: &PolyFormRepr) -> Result<PolyForm> {
        let mut form = PolyForm::zero(repr.dim, repr.degree);
        for term in &repr.terms {
            let mut poly = Poly::zero(repr.dim);
            for mono in &term.monomials {
                let coeff = parse_rat(&mono.coeff).ok_or_else(|| {
                    DerhamError::InvalidParameter(format!("bad rational '{}'", mono.coeff))
                })?;
                poly = poly.add(&Poly::monomial(repr.dim, mono.exps.clone(), coeff));
            }
            form.insert(term.indices.clone(), poly);
        }
        Ok(form)
    }
}

impl fmt::Display for PolyForm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        let mut first = true;
        for (indices, coeff) in &self.terms {
            if !first {
                write!(f, " + ")?;
            }
            first = false;
            write!(f, "({})", coeff)?;
            if !indices.is_empty() {
                let wedge = indices
                    .iter()
                    .map(|i| format!("dx_{{{i}}}"))
                    .collect::<Vec<_>>()
                    .join("^");
                write!(f, " * {wedge}")?;
            }
        }
        Ok(())
    }
}

impl fmt::Debug for PolyForm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PolyFormRepr {
    pub dim: usize,
    pub degree: usize,
    pub terms: Vec<TermRepr>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TermRepr {
    pub indices: Vec<u8>,
    pub monomials: Vec<MonoRepr>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MonoRepr {
    pub exps: Vec<u32>,
    pub coeff: String,
}

/// Merge two strictly increasing index sets, tracking the permutation sign.
fn merge_indices(a: &[u8], b: &[u8]) -> Option<(Vec<u8>, i32)> {
    let mut inversions = 0usize;
    for &x in b {
        if a.contains(&x) {
            return None;
        }
        inversions += a.iter().filter(|&&y| y > x).count();
    }
    let mut merged: Vec<u8> = a.iter().chain(b.iter()).copied().collect();
    merged.sort_unstable();
    Some((merged, if inversions % 2 == 0 { 1 } else { -1 }))
}

pub fn rat_det(mut m: Vec<Vec<Rat>>) -> Rat {
    let n = m.len();
    if n == 0 {
        return Rat::one();
    }
    let mut det = Rat::one();
    for col in 0..n {
        let pivot = (col..n).find(|&r| !m[r][col].is_zero());
        let Some(p) = pivot else {
            return Rat::zero();
        };
        if p != col {
            m.swap(p, col);
            det = -det;
        }
        let pv = m[col][col].clone();
        det *= &pv;
        for r in col + 1..n {
            if m[r][col].is_zero() {
                continue;
            }
            let factor = &m[r][col] / &pv;
            for c in col..n {
                let sub = &m[col][c] * &factor;
                m[r][c] -= sub;
            }
        }
    }
    det
}

/// A polynomial vector field on R^n.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VectorFieldPoly {
    pub dim: usize,
    pub components: Vec<Poly>,
}

impl VectorFieldPoly {
    pub fn new(components: Vec<Poly>) -> Self {
        let dim = components.len();
        assert!(components.iter().all(|p| p.dim() == dim));
        VectorFieldPoly { dim, components }
    }

    pub fn constant(v: &[Rat]) -> Self {
        let dim = v.len();
        VectorFieldPoly {
            dim,
            components: v.iter().map(|c| Poly::constant(dim, c.clone())).collect(),
        }
    }

    pub fn coordinate(dim: usize, i: usize) -> Self {
        let mut components = vec![Poly::zero(dim); dim];
        components[i] = Poly::one(dim);
        VectorFieldPoly { dim, components }
    }

    /// The radial field x_0 d/dx_0 + ... .
    pub fn radial(dim: usize) -> Self {
        VectorFieldPoly {
            dim,
            components: (0..dim).map(|i| Poly::var(dim, i)).collect(),
        }
    }
}

/// An affine map R^in -> R^out, x |-> M x + b, with rational entries.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AffineMap {
    pub out_dim: usize,
    pub in_dim: usize,
    /// out_dim rows, in_dim columns
    pub matrix: Vec<Vec<Rat>>,
    pub shift: Vec<Rat>,
}

impl AffineMap {
    pub fn new(matrix: Vec<Vec<Rat>>, shift: Vec<Rat>) -> Self {
        let out_dim = matrix.len();
        let in_dim = matrix.first().map(|r| r.len()).unwrap_or(0);
        assert!(matrix.iter().all(|r| r.len() == in_dim));
        assert_eq!(shift.len(), out_dim);
        AffineMap { out_dim, in_dim, matrix, shift }
    }

    pub fn identity(dim: usize) -> Self {
        let matrix = (0..dim)
            .map(|i| {
                (0..dim)
                    .map(|j| if i == j { Rat::one() } else { Rat::zero() })
                    .collect()
            })
            .collect();
        AffineMap::new(matrix, vec![Rat::zero(); dim])
    }

    pub fn translation(v: &[Rat]) -> Self {
        let mut map = AffineMap::identity(v.len());
        map.shift = v.to_vec();
        map
    }

    /// Coordinates of the map as polynomials in the input variables.
    pub fn coordinate_polys(&self) -> Vec<Poly> {
        (0..self.out_dim)
            .map(|i| {
                let mut p = Poly::constant(self.in_dim, self.shift[i].clone());
                for j in 0..self.in_dim {
                    if !self.matrix[i][j].is_zero() {
                        p = p.add(&Poly::var(self.in_dim, j).scale(&self.matrix[i][j]));
                    }
                }
                p
            })
            .collect()
    }

    pub fn compose(&self, inner: &AffineMap) -> AffineMap {
        assert_eq!(self.in_dim, inner.out_dim);
        let mut matrix = vec![vec![Rat::zero(); inner.in_dim]; self.out_dim];
        let mut shift = self.shift.clone();
        for i in 0..self.out_dim {
            for j in 0..inner.in_dim {
                for k in 0..self.in_dim {
                    let add = &self.matrix[i][k] * &inner.matrix[k][j];
                    matrix[i][j] += add;
                }
            }
            for k in 0..self.in_dim {
                let add = &self.matrix[i][k] * &inner.shift[k];
                shift[i] += add;
            }
        }
        AffineMap::new(matrix, shift)
    }

    pub fn apply_f64(&self, x: &[f64]) -> Vec<f64> {
        (0..self.out_dim)
            .map(|i| {
                rat_to_f64(&self.shift[i])
                    + (0..self.in_dim)
                        .map(|j| rat_to_f64(&self.matrix[i][j]) * x[j])
                        .sum::<f64>()
            })
            .collect()
    }
}

/// Inverse Gram matrix of the barycentric frame on the unit-edge regular
/// m-simplex: G = (I + J)/2, G^{-1} = 2(I - J/(m+1)).
pub fn simplex_gram_inverse(m: usize) -> Vec<Vec<Rat>> {
    (0..m)
        .map(|i| {
            (0..m)
                .map(|j| {
                    if i == j {
                        rat(2 * m as i64, m as i64 + 1)
                    } else {
                        rat(-2, m as i64 + 1)
                    }
                })
                .collect()
        })
        .collect()
}

/// sqrt(det G) = sqrt((m+1)/2^m); the Riemannian volume of the unit-edge
/// m-simplex is this divided by m!.
pub fn simplex_volume_factor(m: usize) -> f64 {
    ((m as f64 + 1.0) / 2f64.powi(m as i32)).sqrt()
}

/// det G as an exact rational.
pub fn simplex_gram_det(m: usize) -> Rat {
    rat(m as i64 + 1, 1 << m)
}

/// L_p exponent.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Lp {
    Finite(f64),
    Infinity,
}

impl Lp {
    pub fn validate(&self) -> Result<()> {
        match self {
            Lp::Finite(p) if *p < 1.0 => Err(DerhamError::InvalidParameter(format!(
                "L_p exponent must be >= 1, got {p}"
            ))),
            _ => Ok(()),
        }
    }
}

/// Affine embedding of a face into an ambient simplex, in the u-coordinates
/// of both (vertices sorted ascending; u_i is the barycentric coordinate of
/// vertex i, i >= 1).
pub fn face_embedding(face: &[u32], ambient: &[u32]) -> AffineMap {
    let m = ambient.len() - 1;
    let k = face.len() - 1;
    let mut matrix = vec![vec![Rat::zero(); k]; m];
    let mut shift = vec![Rat::zero(); m];
    for j in 1..=m {
        let w = ambient[j];
        if let Some(i) = face.iter().position(|&v| v == w) {
            if i == 0 {
                // t_{v_0} = 1 - sum u'_i
                shift[j - 1] = Rat::one();
                for c in 0..k {
                    matrix[j - 1][c] = -Rat::one();
                }
            } else {
                matrix[j - 1][i - 1] = Rat::one();
            }
        }
    }
    AffineMap::new(matrix, shift)
}

/// Barycentric coordinate t_v of an ambient simplex as a polynomial of its
/// u-coordinates.
pub fn barycentric_poly(ambient: &[u32], v: u32) -> Poly {
    let m = ambient.len() - 1;
    let pos = ambient
        .iter()
        .position(|&w| w == v)
        .expect("vertex in simplex");
    if pos == 0 {
        let mut p = Poly::one(m);
        for j in 0..m {
            p = p.sub(&Poly::var(m, j));
        }
        p
    } else {
        Poly::var(m, pos - 1)
    }
}

/// A piecewise polynomial form: one PolyForm per maximal simplex, in that
/// simplex's u-coordinates.
#[derive(Clone)]
pub struct PiecewiseForm {
    complex: Arc<SimplicialComplex>,
    degree: usize,
    pieces: BTreeMap<Vec<u32>, PolyForm>,
}

impl PiecewiseForm {
    pub fn zero(complex: Arc<SimplicialComplex>, degree: usize) -> Self {
        let pieces = complex
            .maximal_simplices()
            .into_iter()
            .map(|s| {
                let m = s.len() - 1;
                (s, PolyForm::zero(m, degree))
            })
            .collect();
        PiecewiseForm { complex, degree, pieces }
    }

    pub fn complex(&self) -> &Arc<SimplicialComplex> {
        &self.complex
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn pieces(&self) -> impl Iterator<Item = (&Vec<u32>, &PolyForm)> {
        self.pieces.iter()
    }

    pub fn piece(&self, simplex: &[u32]) -> Option<&PolyForm> {
        self.pieces.get(simplex)
    }

    pub fn set_piece(&mut self, simplex: &[u32], form: PolyForm) -> Result<()> {
        if !self.pieces.contains_key(simplex) {
            return Err(DerhamError::UnknownFace(simplex.to_vec()));
        }
        let m = simplex.len() - 1;
        if form.dim() != m {
            return Err(DerhamError::DimensionMismatch(format!(
                "piece on {simplex:?} must live on R^{m}"
            )));
        }
        if !form.is_zero() && form.degree() != self.degree {
            return Err(DerhamError::DegreeOutOfRange(format!(
                "piece degree {} != form degree {}",
                form.degree(),
                self.degree
            )));
        }
        self.pieces.insert(simplex.to_vec(), form);
        Ok(())
    }

    pub fn add(&self, other: &PiecewiseForm) -> PiecewiseForm {
        assert_eq!(self.degree, other.degree);
        let mut out = self.clone();
        for (s, f) in &other.pieces {
            let merged = out.pieces.get(s).map(|g| g.add(f)).unwrap_or_else(|| f.clone());
            out.pieces.insert(s.clone(), merged);
        }
        out
    }

    pub fn sub(&self, other: &PiecewiseForm) -> PiecewiseForm {
        self.add(&other.scale(&-Rat::one()))
    }

    pub fn scale(&self, c: &Rat) -> PiecewiseForm {
        let mut out = self.clone();
        for f in out.pieces.values_mut() {
            *f = f.scale(c);
        }
        out
    }

    pub fn is_zero(&self) -> bool {
        self.pieces.values().all(|f| f.is_zero())
    }

    pub fn exterior_d(&self) -> PiecewiseForm {
        let mut out = PiecewiseForm::zero(self.complex.clone(), self.degree + 1);
        for (s, f) in &self.pieces {
            out.pieces.insert(s.clone(), f.exterior_d());
        }
        out
    }

    pub fn wedge(&self, other: &PiecewiseForm) -> Result<PiecewiseForm> {
        let mut out = PiecewiseForm::zero(self.complex.clone(), self.degree + other.degree);
        for (s, f) in &self.pieces {
            let g = other
                .pieces
                .get(s)
                .ok_or_else(|| DerhamError::UnknownFace(s.clone()))?;
            out.pieces.insert(s.clone(), f.wedge(g)?);
        }
        Ok(out)
    }

    /// Trace of the form on a face, computed through one containing maximal
    /// simplex. Face compatibility guarantees independence of the choice.
    pub fn trace_on(&self, face: &[u32]) -> Result<PolyForm> {
        if !self.complex.contains(face) {
            return Err(DerhamError::UnknownFace(face.to_vec()));
        }
        for (s, f) in &self.pieces {
            if face.iter().all(|v| s.contains(v)) {
                let embed = face_embedding(face, s);
                return f.pullback(&embed);
            }
        }
        Err(DerhamError::UnknownFace(face.to_vec()))
    }

    /// Restriction to the closed sub-complex generated by a face.
    pub fn restrict_to_face(&self, face: &[u32]) -> Result<PiecewiseForm> {
        let trace = self.trace_on(face)?;
        let sub = Arc::new(SimplicialComplex::from_maximal(&[face]));
        let mut out = PiecewiseForm::zero(sub, self.degree);
        out.pieces.insert(face.to_vec(), trace);
        Ok(out)
    }

    /// Exact check that traces of neighbouring pieces agree on every shared
    /// face (polynomial identity).
    pub fn check_face_compatibility(&self) -> Result<()> {
        let maximal: Vec<&Vec<u32>> = self.pieces.keys().collect();
        for i in 0..maximal.len() {
            for j in i + 1..maximal.len() {
                let shared: Vec<u32> = maximal[i]
                    .iter()
                    .filter(|v| maximal[j].contains(v))
                    .copied()
                    .collect();
                if shared.is_empty() || !self.complex.contains(&shared) {
                    continue;
                }
                let ti = self.pieces[maximal[i]].pullback(&face_embedding(&shared, maximal[i]))?;
                let tj = self.pieces[maximal[j]].pullback(&face_embedding(&shared, maximal[j]))?;
                if ti != tj {
                    return Err(DerhamError::IncompatibleTraces(format!(
                        "pieces on {:?} and {:?} disagree on {:?}",
                        maximal[i], maximal[j], shared
                    )));
                }
            }
        }
        Ok(())
    }

    /// L_p norm: (sum over maximal simplices of the integral of |w|^p against
    /// the unit-edge Riemannian volume)^(1/p). Even integer p is computed
    /// from exact integrals; other p uses a simplex quadrature rule exact to
    /// 2*(coefficient degree)+2; p = infinity takes the max over quadrature
    /// nodes.
    pub fn lp_norm(&self, p: Lp) -> Result<f64> {
        p.validate()?;
        match p {
            Lp::Infinity => {
                let mut sup = 0.0f64;
                for (s, f) in &self.pieces {
                    let m = s.len() - 1;
                    if m == 0 {
                        let v = f.coeff(&[]).eval_f64(&[]);
                        sup = sup.max(v.abs());
                        continue;
                    }
                    let nsq = f.norm_sq_poly(&simplex_gram_inverse(m));
                    let deg = 2 * f.max_poly_degree() + 2;
                    for node in simplex_rule(m, deg) {
                        sup = sup.max(nsq.eval_f64(&node.point).max(0.0).sqrt());
                    }
                    // corners too
                    for corner in 0..=m {
                        let mut pt = vec![0.0; m];
                        if corner > 0 {
                            pt[corner - 1] = 1.0;
                        }
                        sup = sup.max(nsq.eval_f64(&pt).max(0.0).sqrt());
                    }
                }
                Ok(sup)
            }
            Lp::Finite(p) => {
                let mut total = 0.0f64;
                for (s, f) in &self.pieces {
                    let m = s.len() - 1;
                    if m == 0 {
                        let v = f.coeff(&[]).eval_f64(&[]);
                        total += v.abs().powf(p);
                        continue;
                    }
                    let nsq = f.norm_sq_poly(&simplex_gram_inverse(m));
                    let vol = simplex_volume_factor(m);
                    let half_p = p / 2.0;
                    if (half_p.fract()).abs() < 1e-12 {
                        // |w|^p is a polynomial: exact integral
                        let power = nsq.pow(half_p.round() as u32);
                        total += vol * rat_to_f64(&power.integrate_ref_simplex());
                    } else {
                        let deg = (f.max_poly_degree() * p.ceil() as u32) + 8;
                        let integral: f64 = simplex_rule(m, deg)
                            .iter()
                            .map(|node| {
                                node.weight * nsq.eval_f64(&node.point).max(0.0).powf(half_p)
                            })
                            .sum();
                        total += vol * integral;
                    }
                }
                Ok(total.powf(1.0 / p))
            }
        }
    }

    /// Sobolev graph norm (||w||_p^p + ||dw||_p^p)^(1/p); max of the two sup
    /// norms for p = infinity.
    pub fn sobolev_norm(&self, p: Lp) -> Result<f64> {
        p.validate()?;
        let d = self.exterior_d();
        match p {
            Lp::Infinity => Ok(self.lp_norm(p)?.max(d.lp_norm(p)?)),
            Lp::Finite(pf) => {
                let a = self.lp_norm(p)?;
                let b = d.lp_norm(p)?;
                Ok((a.powf(pf) + b.powf(pf)).powf(1.0 / pf))
            }
        }
    }

    pub fn to_json(&self) -> String {
        let repr: BTreeMap<String, PolyFormRepr> = self
            .pieces
            .iter()
            .map(|(s, f)| {
                (
                    s.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(","),
                    f.to_repr(),
                )
            })
            .collect();
        let doc = serde_json::json!({ "degree": self.degree, "pieces": repr });
        serde_json::to_string_pretty(&doc).expect("serializable")
    }

    pub fn from_json(complex: Arc<SimplicialComplex>, text: &str) -> Result<PiecewiseForm> {
        #[derive(Deserialize)]
        struct Doc {
            degree: usize,
            pieces: BTreeMap<String, PolyFormRepr>,
        }
        let doc: Doc = serde_json::from_str(text)?;
        let mut out = PiecewiseForm::zero(complex, doc.degree);
        for (key, repr) in &doc.pieces {
            let simplex: Vec<u32> = key
                .split(',')
                .map(|t| {
                    t.trim().parse().map_err(|_| {
                        DerhamError::InvalidParameter(format!("bad simplex key '{key}'"))
                    })
                })
                .collect::<Result<_>>()?;
            out.set_piece(&simplex, PolyForm::from_repr(repr)?)?;
        }
        Ok(out)
    }
}

impl fmt::Debug for PiecewiseForm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "PiecewiseForm(degree {}):", self.degree)?;
        for (s, form) in &self.pieces {
            writeln!(f, "  {:?}: {}", s, form)?;
        }
        Ok(())
    }
}

impl PartialEq for PiecewiseForm {
    fn eq(&self, other: &Self) -> bool {
        self.degree == other.degree && self.pieces == other.pieces
    }
}

/// Seeded random polynomial form for the verification suites.
pub fn random_polyform<R: rand::Rng>(
    rng: &mut R,
    dim: usize,
    degree: usize,
    max_poly_degree: u32,
) -> PolyForm {
    let mut form = PolyForm::zero(dim, degree);
    let sets: Vec<Vec<u8>> = (0..dim as u8).combinations(degree).collect();
    for indices in sets {
        let mut poly = Poly::zero(dim);
        for _ in 0..3 {
            let exps: Vec<u32> = (0..dim)
                .map(|_| rng.gen_range(0..=max_poly_degree))
                .collect();
            let num = rng.gen_range(-9i64..=9);
            let den = rng.gen_range(1i64..=5);
            poly = poly.add(&Poly::monomial(dim, exps, rat(num, den)));
        }
        form.insert(indices, poly);
    }
    form
}

pub fn random_rat_vector<R: rand::Rng>(rng: &mut R, dim: usize) -> Vec<Rat> {
    (0..dim)
        .map(|_| rat(rng.gen_range(-5i64..=5), rng.gen_range(1i64..=4)))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::complex::reference;
    use crate::poly::rat_i;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn dx(dim: usize, i: u8) -> PolyForm {
        PolyForm::basis_one_form(dim, i)
    }

    #[test]
    fn wedge_examples() {
        let a = dx(2, 0);
        let b = dx(2, 1);
        let ab = a.wedge(&b).unwrap();
        assert_eq!(ab.coeff(&[0, 1]), Poly::one(2));
        assert!(a.wedge(&a).unwrap().is_zero());

        // (x dy) ^ (y dx) = -xy dx^dy
        let x = Poly::var(2, 0);
        let y = Poly::var(2, 1);
        let xdy = dx(2, 1).scale_poly(&x);
        let ydx = dx(2, 0).scale_poly(&y);
        let prod = xdy.wedge(&ydx).unwrap();
        assert_eq!(prod.coeff(&[0, 1]), x.mul(&y).neg());

        // dimension mismatch errors
        assert!(dx(2, 0).wedge(&dx(3, 0)).is_err());
    }

    #[test]
    fn exterior_d_examples() {
        // d(x^2) = 2x dx
        let f = PolyForm::from_poly(Poly::var(1, 0).pow(2));
        let df = f.exterior_d();
        assert_eq!(df.coeff(&[0]), Poly::var(1, 0).scale(&rat_i(2)));

        // d(x dy) = dx^dy
        let xdy = dx(2, 1).scale_poly(&Poly::var(2, 0));
        assert_eq!(xdy.exterior_d().coeff(&[0, 1]), Poly::one(2));

        // d(d(xy dx)) = 0
        let xydx = dx(2, 0).scale_poly(&Poly::var(2, 0).mul(&Poly::var(2, 1)));
        assert!(xydx.exterior_d().exterior_d().is_zero());
    }

    #[test]
    fn d_squared_and_leibniz_random() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..40 {
            let dim = rng.gen_range(1..=4);
            let ka = rng.gen_range(0..=dim.min(4));
            let kb = rng.gen_range(0..=(dim - ka).min(4));
            let a = random_polyform(&mut rng, dim, ka, 4);
            let b = random_polyform(&mut rng, dim, kb, 4);
            assert!(a.exterior_d().exterior_d().is_zero());
            // graded Leibniz for d
            let lhs = a.wedge(&b).unwrap().exterior_d();
            let mut rhs = a.exterior_d().wedge(&b).unwrap();
            let sign = if ka % 2 == 0 { Rat::one() } else { -Rat::one() };
            rhs = rhs.add(&a.wedge(&b.exterior_d()).unwrap().scale(&sign));
            assert_eq!(lhs, rhs);
        }
    }

    #[test]
    fn interior_product_examples() {
        let e0 = VectorFieldPoly::coordinate(2, 0);
        // i_{dx0}(dx0) = 1
        let r = dx(2, 0).interior_product(&e0).unwrap();
        assert_eq!(r.coeff(&[]), Poly::one(2));
        // i_{e0}(dx0^dx1) = dx1
        let r = dx(2, 0).wedge(&dx(2, 1)).unwrap().interior_product(&e0).unwrap();
        assert_eq!(r.coeff(&[1]), Poly::one(2));
        // i_{e0}(f dy) = 0
        let fdy = dx(2, 1).scale_poly(&Poly::var(2, 0));
        assert!(fdy.interior_product(&e0).unwrap().is_zero());
        // 0-form input is an error
        assert!(PolyForm::constant(2, rat_i(1)).interior_product(&e0).is_err());
    }

    #[test]
    fn interior_product_antiderivation_random() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..30 {
            let dim = rng.gen_range(1..=4);
            let ka = rng.gen_range(1..=dim);
            let kb = rng.gen_range(0..=(dim - ka).min(3)).max(0);
            let a = random_polyform(&mut rng, dim, ka, 3);
            let b = random_polyform(&mut rng, dim, kb, 3);
            let field = VectorFieldPoly::new(
                (0..dim)
                    .map(|_| {
                        let mut rng2 = ChaCha8Rng::seed_from_u64(rng.gen());
                        random_polyform(&mut rng2, dim, 0, 2).coeff(&[])
                    })
                    .collect(),
            );
            // iota is a -1-antiderivation
            let lhs = a.wedge(&b).unwrap().contract(&field);
            let sign = if ka % 2 == 0 { Rat::one() } else { -Rat::one() };
            let rhs = a
                .contract(&field)
                .wedge(&b)
                .unwrap()
                .add(&a.wedge(&b.contract(&field)).unwrap().scale(&sign));
            assert_eq!(lhs, rhs);
            // iota^2 = 0
            assert!(a.contract(&field).contract(&field).is_zero());
        }
    }

    #[test]
    fn lie_derivative_examples() {
        let e0 = VectorFieldPoly::coordinate(2, 0);
        // L_{e0}(x dx) = dx
        let xdx = dx(2, 0).scale_poly(&Poly::var(2, 0));
        assert_eq!(xdx.lie_derivative(&e0), dx(2, 0));
        // L_{e0}(c dy) = 0
        assert!(dx(2, 1).scale(&rat_i(3)).lie_derivative(&e0).is_zero());
        // L_{x e0}(dx) = dx
        let scaling = VectorFieldPoly::new(vec![Poly::var(2, 0), Poly::zero(2)]);
        assert_eq!(dx(2, 0).lie_derivative(&scaling), dx(2, 0));
    }

    #[test]
    fn lie_derivative_commutes_with_d() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        for _ in 0..25 {
            let dim = rng.gen_range(1..=3);
            let k = rng.gen_range(0..dim);
            let w = random_polyform(&mut rng, dim, k, 3);
            let field = VectorFieldPoly::new(
                (0..dim)
                    .map(|i| Poly::var(dim, i).scale(&rat(rng.gen_range(-3i64..=3), 1)))
                    .collect(),
            );
            let lhs = w.lie_derivative(&field).exterior_d();
            let rhs = w.exterior_d().lie_derivative(&field);
            assert_eq!(lhs, rhs);
        }
    }

    #[test]
    fn pullback_examples() {
        // translation by (1,0): x dy -> (x+1) dy
        let t = AffineMap::translation(&[rat_i(1), rat_i(0)]);
        let xdy = dx(2, 1).scale_poly(&Poly::var(2, 0));
        let pulled = xdy.pullback(&t).unwrap();
        assert_eq!(pulled.coeff(&[1]), Poly::var(2, 0).add(&Poly::one(2)));

        // identity leaves forms alone
        let id = AffineMap::identity(2);
        assert_eq!(xdy.pullback(&id).unwrap(), xdy);

        // inclusion of the x-axis: dy -> 0
        let incl = AffineMap::new(vec![vec![Rat::one()], vec![Rat::zero()]], vec![Rat::zero(); 2]);
        assert!(dx(2, 1).pullback(&incl).unwrap().is_zero());
    }

    #[test]
    fn pullback_functorial_and_commutes_with_d() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..20 {
            let deg = rng.gen_range(0..=2);
            let w = random_polyform(&mut rng, 3, deg, 3);
            let a = AffineMap::new(
                (0..3)
                    .map(|_| random_rat_vector(&mut rng, 2))
                    .collect(),
                random_rat_vector(&mut rng, 3),
            );
            let b = AffineMap::new(
                (0..2)
                    .map(|_| random_rat_vector(&mut rng, 2))
                    .collect(),
                random_rat_vector(&mut rng, 2),
            );
            // pullback(A after B) = pullback(B) after pullback(A)
            let ab = a.compose(&b);
            let lhs = w.pullback(&ab).unwrap();
            let rhs = w.pullback(&a).unwrap().pullback(&b).unwrap();
            assert_eq!(lhs, rhs);
            // d commutes with pullback
            assert_eq!(
                w.exterior_d().pullback(&a).unwrap(),
                w.pullback(&a).unwrap().exterior_d()
            );
        }
    }

    #[test]
    fn lp_norm_examples() {
        // constant 1 on one unit-edge triangle: area sqrt(3)/4
        let k = Arc::new(reference::triangle());
        let mut f = PiecewiseForm::zero(k.clone(), 0);
        f.set_piece(&[0, 1, 2], PolyForm::constant(2, rat_i(1))).unwrap();
        let area = 3f64.sqrt() / 4.0;
        for p in [1.0, 2.0, 3.5] {
            let norm = f.lp_norm(Lp::Finite(p)).unwrap();
            assert!((norm - area.powf(1.0 / p)).abs() < 1e-10, "p={p}");
        }
        assert!((f.lp_norm(Lp::Infinity).unwrap() - 1.0).abs() < 1e-12);

        // zero form
        let z = PiecewiseForm::zero(k, 1);
        assert_eq!(z.lp_norm(Lp::Finite(2.0)).unwrap(), 0.0);

        // 1 on two disjoint unit edges, p = 1 -> 2
        let k2 = Arc::new(crate::complex::SimplicialComplex::from_maximal(&[&[0, 1], &[2, 3]]));
        let mut g = PiecewiseForm::zero(k2, 0);
        g.set_piece(&[0, 1], PolyForm::constant(1, rat_i(1))).unwrap();
        g.set_piece(&[2, 3], PolyForm::constant(1, rat_i(1))).unwrap();
        assert!((g.lp_norm(Lp::Finite(1.0)).unwrap() - 2.0).abs() < 1e-12);

        // p < 1 rejected
        assert!(g.lp_norm(Lp::Finite(0.5)).is_err());
    }

    #[test]
    fn lp_norm_homogeneity_and_triangle_inequality() {
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        let k = Arc::new(reference::triangle());
        for _ in 0..10 {
            let deg = rng.gen_range(0..=2);
            let mut a = PiecewiseForm::zero(k.clone(), deg);
            let mut b = PiecewiseForm::zero(k.clone(), deg);
            a.set_piece(&[0, 1, 2], random_polyform(&mut rng, 2, deg, 3)).unwrap();
            b.set_piece(&[0, 1, 2], random_polyform(&mut rng, 2, deg, 3)).unwrap();
            for p in [Lp::Finite(1.0), Lp::Finite(2.0), Lp::Infinity] {
                let na = a.lp_norm(p).unwrap();
                let nb = b.lp_norm(p).unwrap();
                let nsum = a.add(&b).lp_norm(p).unwrap();
                // p = 1 integrates sqrt of a polynomial, so only quadrature accuracy
                let tol = if matches!(p, Lp::Finite(q) if q == 1.0) {
                    1e-2 * (1.0 + na + nb)
                } else {
                    1e-10
                };
                assert!(nsum <= na + nb + tol, "p={p:?}: {nsum} vs {na}+{nb}");
                let scaled = a.scale(&rat(-7, 2)).lp_norm(p).unwrap();
                assert!((scaled - 3.5 * na).abs() < 1e-9 * (1.0 + na));
            }
        }
    }

    #[test]
    fn sobolev_norm_examples() {
        // constant 0-form c on a triangle: dw = 0, norm = |c| area^{1/p}
        let k = Arc::new(reference::triangle());
        let mut f = PiecewiseForm::zero(k, 0);
        f.set_piece(&[0, 1, 2], PolyForm::constant(2, rat_i(-3))).unwrap();
        let area = 3f64.sqrt() / 4.0;
        let s = f.sobolev_norm(Lp::Finite(2.0)).unwrap();
        assert!((s - 3.0 * area.sqrt()).abs() < 1e-10);
        assert!((s - f.lp_norm(Lp::Finite(2.0)).unwrap()).abs() < 1e-12);

        // barycentric t0 on one edge, p = 2: (1/3 + 1)^(1/2)
        let edge = Arc::new(crate::complex::SimplicialComplex::from_maximal(&[&[0, 1]]));
        let mut g = PiecewiseForm::zero(edge, 0);
        let t0 = Poly::one(1).sub(&Poly::var(1, 0));
        g.set_piece(&[0, 1], PolyForm::from_poly(t0)).unwrap();
        let s = g.sobolev_norm(Lp::Finite(2.0)).unwrap();
        assert!((s - (4f64 / 3.0).sqrt()).abs() < 1e-12);
    }

    #[test]
    fn trace_functoriality_and_compatibility() {
        let k = Arc::new(reference::sphere2());
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        // build a compatible piecewise form: the differential of a global
        // piecewise-linear 0-form (hat-function combination)
        let mut f = PiecewiseForm::zero(k.clone(), 0);
        let coeffs: Vec<Rat> = (0..4).map(|_| rat(rng.gen_range(-5i64..=5), 1)).collect();
        for (s, _) in PiecewiseForm::zero(k.clone(), 0).pieces() {
            let mut p = Poly::zero(2);
            for (vi, c) in s.iter().zip(s.iter().map(|&v| coeffs[v as usize].clone()).collect::<Vec<_>>()) {
                p = p.add(&barycentric_poly(s, *vi).scale(&c));
            }
            f.set_piece(s, PolyForm::from_poly(p)).unwrap();
        }
        f.check_face_compatibility().unwrap();
        let df = f.exterior_d();
        df.check_face_compatibility().unwrap();

        // res commutes along flags: sigma < tau < K
        let tau = vec![0u32, 1, 2];
        let sigma = vec![0u32, 1];
        let via_tau = df
            .trace_on(&tau)
            .unwrap()
            .pullback(&face_embedding(&sigma, &tau))
            .unwrap();
        let direct = df.trace_on(&sigma).unwrap();
        assert_eq!(via_tau, direct);

        // restriction of a form supported on a disjoint simplex is zero
        let two = Arc::new(crate::complex::SimplicialComplex::from_maximal(&[&[0, 1], &[2, 3]]));
        let mut g = PiecewiseForm::zero(two, 0);
        g.set_piece(&[0, 1], PolyForm::constant(1, rat_i(1))).unwrap();
        assert!(g.trace_on(&[2, 3]).unwrap().is_zero());
    }

    #[test]
    fn piecewise_json_round_trip() {
        let k = Arc::new(reference::circle());
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mut f = PiecewiseForm::zero(k.clone(), 1);
        for s in [[0u32, 1], [1, 2], [0, 2]] {
            f.set_piece(&s, random_polyform(&mut rng, 1, 1, 3)).unwrap();
        }
        let text = f.to_json();
        let g = PiecewiseForm::from_json(k, &text).unwrap();
        assert_eq!(f, g);
    }

    #[test]
    fn compatibility_preserved_by_d_and_wedge() {
        let k = Arc::new(reference::sphere2());
        // Whitney-style compatible 1-form: d of a hat function at vertex 0
        let mut hat = PiecewiseForm::zero(k.clone(), 0);
        for (s, _) in PiecewiseForm::zero(k.clone(), 0).pieces() {
            let p = if s.contains(&0) {
                barycentric_poly(s, 0)
            } else {
                Poly::zero(2)
            };
            hat.set_piece(s, PolyForm::from_poly(p)).unwrap();
        }
        hat.check_face_compatibility().unwrap();
        let dhat = hat.exterior_d();
        dhat.check_face_compatibility().unwrap();
        let w = hat.wedge(&dhat).unwrap();
        w.check_face_compatibility().unwrap();
    }
}
