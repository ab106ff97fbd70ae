//! Cohomology of the simplicial cochain complex and of the Whitney-form
//! subcomplex, with exact rational rank computations, a cross-check report
//! for the de Rham isomorphism, and a constructive exactness witness that
//! produces a primitive for closed forms with vanishing simplex integrals.

use std::collections::BTreeMap;
use std::sync::Arc;

use num::traits::{One, Zero};

use crate::complex::SimplicialComplex;
use crate::error::{DerhamError, Result};
use crate::forms::{face_embedding, Lp, PiecewiseForm, PolyForm};
use crate::mollify::global::global_regularize;
use crate::mollify::index_sets;
use crate::poly::{rat_to_f64, Poly, Rat};
use crate::whitney::{derham_map_exact, whitney, Cochain};

// ---------------------------------------------------------------------------
// exact rational linear algebra
// ---------------------------------------------------------------------------

/// Reduced row echelon form in place; returns the pivot columns.
fn rref(m: &mut [Vec<Rat>]) -> Vec<usize> {
    let rows = m.len();
    let cols = m.first().map(|r| r.len()).unwrap_or(0);
    let mut pivots = Vec::new();
    let mut row = 0;
    for col in 0..cols {
        if row >= rows {
            break;
        }
        let Some(p) = (row..rows).find(|&r| !m[r][col].is_zero()) else {
            continue;
        };
        m.swap(row, p);
        let inv = m[row][col].clone();
        for c in col..cols {
            m[row][c] = &m[row][c] / &inv;
        }
        for r in 0..rows {
            if r != row && !m[r][col].is_zero() {
                let factor = m[r][col].clone();
                for c in col..cols {
                    let sub = &factor * &m[row][c];
                    m[r][c] -= sub;
                }
            }
        }
        pivots.push(col);
        row += 1;
    }
    pivots
}

/// Exact rank of a rational matrix.
pub fn rat_rank(mut m: Vec<Vec<Rat>>) -> usize {
    rref(&mut m).len()
}

/// Basis of the kernel of the matrix (columns = unknowns).
fn nullspace(mut m: Vec<Vec<Rat>>, cols: usize) -> Vec<Vec<Rat>> {
    let pivots = rref(&mut m);
    let free: Vec<usize> = (0..cols).filter(|c| !pivots.contains(c)).collect();
    free.iter()
        .map(|&f| {
            let mut v = vec![Rat::zero(); cols];
            v[f] = Rat::one();
            for (r, &p) in pivots.iter().enumerate() {
                v[p] = -m[r][f].clone();
            }
            v
        })
        .collect()
}

/// Exact solution of A x = b with free variables set to zero; `None` if the
/// system is inconsistent. Also reports the rank of A.
fn solve_exact(a: &[Vec<Rat>], b: &[Rat]) -> (Option<Vec<Rat>>, usize) {
    let cols = a.first().map(|r| r.len()).unwrap_or(0);
    let mut aug: Vec<Vec<Rat>> = a
        .iter()
        .zip(b)
        .map(|(row, rhs)| {
            let mut r = row.clone();
            r.push(rhs.clone());
            r
        })
        .collect();
    let pivots = rref(&mut aug);
    if pivots.contains(&cols) {
        let rank = pivots.len() - 1;
        return (None, rank);
    }
    let mut x = vec![Rat::zero(); cols];
    for (r, &p) in pivots.iter().enumerate() {
        x[p] = aug[r][cols].clone();
    }
    (Some(x), pivots.len())
}

/// Least squares via the normal equations, exact over the rationals (the
/// Gram system is always consistent).
fn solve_least_squares(a: &[Vec<Rat>], b: &[Rat]) -> (Vec<Rat>, usize) {
    let cols = a.first().map(|r| r.len()).unwrap_or(0);
    let mut gram = vec![vec![Rat::zero(); cols]; cols];
    let mut rhs = vec![Rat::zero(); cols];
    for (row, bv) in a.iter().zip(b) {
        for i in 0..cols {
            if row[i].is_zero() {
                continue;
            }
            for j in 0..cols {
                let add = &row[i] * &row[j];
                gram[i][j] += add;
            }
            rhs[i] += &row[i] * bv;
        }
    }
    let (x, rank) = solve_exact(&gram, &rhs);
    (x.expect("normal equations are consistent"), rank)
}

// ---------------------------------------------------------------------------
// cochain cohomology
// ---------------------------------------------------------------------------

/// Matrix of the simplicial coboundary C^k -> C^{k+1}: rows indexed by the
/// (k+1)-simplices, columns by the k-simplices, both in sorted order.
pub fn coboundary_matrix(complex: &Arc<SimplicialComplex>, k: usize) -> Vec<Vec<Rat>> {
    if k >= complex.dim() {
        return Vec::new();
    }
    let n_cols = complex.simplices(k).len();
    let n_rows = complex.simplices(k + 1).len();
    let mut m = vec![vec![Rat::zero(); n_cols]; n_rows];
    for (j, sigma) in complex.simplices(k).iter().enumerate() {
        let c = Cochain::indicator(complex.clone(), sigma).expect("simplex exists");
        for (i, v) in c.coboundary().values().iter().enumerate() {
            m[i][j] = v.clone();
        }
    }
    m
}

/// Betti number and a representative basis of H^k of the cochain complex.
pub struct CohomologyReport {
    pub dimension: usize,
    pub representatives: Vec<Cochain>,
}

/// Greedily pick kernel vectors extending the span of the image vectors.
fn complement_basis(image: &[Vec<Rat>], kernel: &[Vec<Rat>]) -> Vec<Vec<Rat>> {
    let mut chosen: Vec<Vec<Rat>> = Vec::new();
    let mut current = rat_rank(image.to_vec());
    // `current` tracks the rank of image + chosen
    for v in kernel {
        let mut stack = image.to_vec();
        stack.extend(chosen.iter().cloned());
        stack.push(v.clone());
        let r = rat_rank(stack);
        if r == current + 1 {
            chosen.push(v.clone());
            current = r;
        }
    }
    chosen
}

pub fn cochain_cohomology(
    complex: &Arc<SimplicialComplex>,
    k: usize,
) -> Result<CohomologyReport> {
    if k > complex.dim() {
        return Err(DerhamError::DegreeOutOfRange(format!(
            "cohomology degree {k} on a complex of dimension {}",
            complex.dim()
        )));
    }
    let n_k = complex.simplices(k).len();
    let d_k = coboundary_matrix(complex, k);
    let kernel = if d_k.is_empty() {
        // top degree: everything is closed
        (0..n_k)
            .map(|i| {
                let mut v = vec![Rat::zero(); n_k];
                v[i] = Rat::one();
                v
            })
            .collect()
    } else {
        nullspace(d_k, n_k)
    };
    let image: Vec<Vec<Rat>> = if k == 0 {
        Vec::new()
    } else {
        let d_prev = coboundary_matrix(complex, k - 1);
        let n_prev = complex.simplices(k - 1).len();
        (0..n_prev)
            .map(|j| (0..n_k).map(|i| d_prev[i][j].clone()).collect())
            .collect()
    };
    let reps = complement_basis(&image, &kernel);
    let representatives = reps
        .into_iter()
        .map(|v| Cochain::from_values(complex.clone(), k, v).expect("length matches"))
        .collect::<Vec<_>>();
    Ok(CohomologyReport {
        dimension: representatives.len(),
        representatives,
    })
}

/// All Betti numbers b_0..b_dim of the cochain complex.
pub fn betti_numbers(complex: &Arc<SimplicialComplex>) -> Vec<usize> {
    (0..=complex.dim())
        .map(|k| cochain_cohomology(complex, k).expect("degree in range").dimension)
        .collect()
}

// ---------------------------------------------------------------------------
// Whitney subcomplex cohomology
// ---------------------------------------------------------------------------

type FlatKey = (Vec<u32>, Vec<u8>, Vec<u32>);

fn flatten_piecewise(w: &PiecewiseForm) -> BTreeMap<FlatKey, Rat> {
    let mut out = BTreeMap::new();
    for (s, f) in w.pieces() {
        for (idx, coeff) in f.terms() {
            for (exps, c) in coeff.terms() {
                if !c.is_zero() {
                    out.insert((s.clone(), idx.clone(), exps.clone()), c.clone());
                }
            }
        }
    }
    out
}

/// Matrix of the exterior derivative on the degree-k Whitney span, in the
/// Whitney bases, computed from the forms themselves: d of each basis form
/// is compared exactly against the span of the degree-(k+1) basis, which
/// both certifies that the span is closed under d and recovers the matrix.
pub fn whitney_d_matrix(complex: &Arc<SimplicialComplex>, k: usize) -> Result<Vec<Vec<Rat>>> {
    if k >= complex.dim() {
        return Ok(Vec::new());
    }
    let n_k = complex.simplices(k).len();
    let next = complex.simplices(k + 1).to_vec();
    let basis_next: Vec<BTreeMap<FlatKey, Rat>> = next
        .iter()
        .map(|tau| {
            let c = Cochain::indicator(complex.clone(), tau)?;
            Ok(flatten_piecewise(&whitney(&c)))
        })
        .collect::<Result<_>>()?;
    let keys: Vec<FlatKey> = {
        let mut all: BTreeMap<FlatKey, ()> = BTreeMap::new();
        for b in &basis_next {
            for key in b.keys() {
                all.insert(key.clone(), ());
            }
        }
        all.into_keys().collect()
    };
    let mut m = vec![vec![Rat::zero(); n_k]; next.len()];
    for (j, sigma) in complex.simplices(k).iter().enumerate() {
        let c = Cochain::indicator(complex.clone(), sigma)?;
        let dw = flatten_piecewise(&whitney(&c).exterior_d());
        // solve for coordinates of dw in the degree-(k+1) basis
        let rows: Vec<Vec<Rat>> = keys
            .iter()
            .map(|key| {
                basis_next
                    .iter()
                    .map(|b| b.get(key).cloned().unwrap_or_else(Rat::zero))
                    .collect()
            })
            .collect();
        let rhs: Vec<Rat> = keys
            .iter()
            .map(|key| dw.get(key).cloned().unwrap_or_else(Rat::zero))
            .collect();
        if dw.keys().any(|key| !keys.contains(key)) {
            return Err(DerhamError::InvalidParameter(
                "d of a Whitney form left the Whitney span".into(),
            ));
        }
        let (x, _) = solve_exact(&rows, &rhs);
        let x = x.ok_or_else(|| {
            DerhamError::InvalidParameter("d of a Whitney form left the Whitney span".into())
        })?;
        for (i, v) in x.into_iter().enumerate() {
            m[i][j] = v;
        }
    }
    Ok(m)
}

/// Dimension of H^k of the subcomplex spanned by the Whitney forms.
pub fn whitney_subcomplex_cohomology(complex: &Arc<SimplicialComplex>, k: usize) -> Result<usize> {
    if k > complex.dim() {
        return Err(DerhamError::DegreeOutOfRange(format!(
            "cohomology degree {k} on a complex of dimension {}",
            complex.dim()
        )));
    }
    let n_k = complex.simplices(k).len();
    let d_k = whitney_d_matrix(complex, k)?;
    let rank_k = if d_k.is_empty() { 0 } else { rat_rank(d_k) };
    let rank_prev = if k == 0 {
        0
    } else {
        let d_prev = whitney_d_matrix(complex, k - 1)?;
        if d_prev.is_empty() { 0 } else { rat_rank(d_prev) }
    };
    Ok(n_k - rank_k - rank_prev)
}

// ---------------------------------------------------------------------------
// de Rham isomorphism report
// ---------------------------------------------------------------------------

pub struct DerhamIsoReport {
    pub betti_cochain: Vec<usize>,
    pub betti_whitney: Vec<usize>,
    pub dims_agree: bool,
    /// per degree: the de Rham map sends a Whitney-span representative
    /// basis onto a basis of cochain cohomology (modulo coboundaries)
    pub pairing_nonsingular: Vec<bool>,
    pub euler_characteristic_matches: bool,
    /// max homotopy residual ||R w - w - d A w||_2 over sampled closed
    /// forms, when the complex has a chart atlas (dimension 1)
    pub regularization_residual: Option<f64>,
    pub notes: Vec<String>,
}

impl DerhamIsoReport {
    pub fn all_structural_checks_pass(&self) -> bool {
        self.dims_agree
            && self.euler_characteristic_matches
            && self.pairing_nonsingular.iter().all(|&b| b)
    }
}

pub fn derham_iso_check(complex: &Arc<SimplicialComplex>) -> Result<DerhamIsoReport> {
    let betti_cochain = betti_numbers(complex);
    let betti_whitney: Vec<usize> = (0..=complex.dim())
        .map(|k| whitney_subcomplex_cohomology(complex, k))
        .collect::<Result<_>>()?;
    let dims_agree = betti_cochain == betti_whitney;
    let alternating: i64 = betti_cochain
        .iter()
        .enumerate()
        .map(|(k, &b)| if k % 2 == 0 { b as i64 } else { -(b as i64) })
        .sum();
    let euler_characteristic_matches = alternating == complex.euler_characteristic();

    let mut pairing_nonsingular = Vec::new();
    let mut notes = Vec::new();
    for k in 0..=complex.dim() {
        let report = cochain_cohomology(complex, k)?;
        if report.dimension == 0 {
            pairing_nonsingular.push(true);
            continue;
        }
        let n_k = complex.simplices(k).len();
        // Whitney-side representatives, as cochain coordinate vectors
        let d_k = whitney_d_matrix(complex, k)?;
        let kernel = if d_k.is_empty() {
            (0..n_k)
                .map(|i| {
                    let mut v = vec![Rat::zero(); n_k];
                    v[i] = Rat::one();
                    v
                })
                .collect()
        } else {
            nullspace(d_k, n_k)
        };
        let image: Vec<Vec<Rat>> = if k == 0 {
            Vec::new()
        } else {
            let d_prev = whitney_d_matrix(complex, k - 1)?;
            let n_prev = complex.simplices(k - 1).len();
            (0..n_prev)
                .map(|j| (0..n_k).map(|i| d_prev[i][j].clone()).collect())
                .collect()
        };
        let whitney_reps = complement_basis(&image, &kernel);
        // pair: push each Whitney representative through W then I, and
        // express the class against [coboundaries | cochain representatives]
        let im_delta: Vec<Vec<Rat>> = if k == 0 {
            Vec::new()
        } else {
            let d_prev = coboundary_matrix(complex, k - 1);
            let n_prev = complex.simplices(k - 1).len();
            (0..n_prev)
                .map(|j| (0..n_k).map(|i| d_prev[i][j].clone()).collect())
                .collect()
        };
        let n_im = im_delta.len();
        let mut pairing = vec![vec![Rat::zero(); whitney_reps.len()]; report.dimension];
        let mut ok = true;
        for (j, x) in whitney_reps.iter().enumerate() {
            let form = whitney(&Cochain::from_values(complex.clone(), k, x.clone())?);
            let image_cochain = derham_map_exact(&form, k)?;
            // columns: coboundary generators then the representatives
            let rows: Vec<Vec<Rat>> = (0..n_k)
                .map(|i| {
                    let mut row: Vec<Rat> =
                        im_delta.iter().map(|v| v[i].clone()).collect();
                    row.extend(
                        report
                            .representatives
                            .iter()
                            .map(|c| c.values()[i].clone()),
                    );
                    row
                })
                .collect();
            let (sol, _) = solve_exact(&rows, image_cochain.values());
            match sol {
                Some(sol) => {
                    for i in 0..report.dimension {
                        pairing[i][j] = sol[n_im + i].clone();
                    }
                }
                None => ok = false,
            }
        }
        let nonsingular = ok && rat_rank(pairing) == report.dimension;
        pairing_nonsingular.push(nonsingular);
    }

    let regularization_residual = if complex.dim() == 1 {
        // every 1-form on a 1-complex is closed; regularize a couple of
        // Whitney-span samples and report the worst homotopy residual
        let mut worst = 0.0f64;
        for (i, edge) in complex.simplices(1).iter().enumerate().take(2) {
            let c = Cochain::indicator(complex.clone(), edge)?;
            let scaled = c.scale(&crate::poly::rat(i as i64 + 1, 2));
            let reg = global_regularize(&whitney(&scaled), 0.2, 10)?;
            worst = worst.max(reg.report.residual_l2);
        }
        Some(worst)
    } else {
        notes.push(format!(
            "regularization leg skipped: no chart atlas in dimension {}",
            complex.dim()
        ));
        None
    };

    Ok(DerhamIsoReport {
        betti_cochain,
        betti_whitney,
        dims_agree,
        pairing_nonsingular,
        euler_characteristic_matches,
        regularization_residual,
        notes,
    })
}

// ---------------------------------------------------------------------------
// exactness witness
// ---------------------------------------------------------------------------

pub struct ExactnessWitness {
    pub eta: PiecewiseForm,
    pub residual_l2: f64,
    pub eta_norm_l2: f64,
    pub omega_norm_l2: f64,
    pub ansatz_degree: u32,
    pub system_rank: usize,
}

fn monomials_up_to(dim: usize, total: u32) -> Vec<Vec<u32>> {
    fn go(dim: usize, total: u32, prefix: &mut Vec<u32>, out: &mut Vec<Vec<u32>>) {
        if dim == 0 {
            out.push(prefix.clone());
            return;
        }
        for e in 0..=total {
            prefix.push(e);
            go(dim - 1, total - e, prefix, out);
            prefix.pop();
        }
    }
    let mut out = Vec::new();
    go(dim, total, &mut Vec::new(), &mut out);
    out
}

#[derive(Clone, PartialEq, Eq, PartialOrd, Ord)]
enum RowKey {
    /// d-match on a maximal simplex: (simplex, index set, monomial)
    Derivative(Vec<u32>, Vec<u8>, Vec<u32>),
    /// trace agreement on a shared face between two maximal simplices
    Trace(usize, Vec<u8>, Vec<u32>),
}

/// Construct a primitive: eta with d eta = omega, for a closed piecewise
/// form all of whose simplex integrals vanish. The primitive is sought as
/// a face-compatible piecewise polynomial of bounded degree, the degree
/// escalating from (input degree + 2) by steps of two up to `max_degree`
/// (default input degree + 6); each attempt solves the exact linear system
/// of derivative-match and trace-match equations, falling back to exact
/// least squares at the cap.
pub fn exactness_witness(
    omega: &PiecewiseForm,
    max_degree: Option<u32>,
) -> Result<ExactnessWitness> {
    let k = omega.degree();
    if k == 0 {
        return Err(DerhamError::DegreeOutOfRange(
            "a 0-form has no primitive".into(),
        ));
    }
    for (_, f) in omega.pieces() {
        if !f.exterior_d().is_zero() {
            return Err(DerhamError::NotClosed);
        }
    }
    let integrals = derham_map_exact(omega, k)?;
    for (sigma, v) in omega
        .complex()
        .simplices(k)
        .iter()
        .zip(integrals.values())
    {
        if rat_to_f64(v).abs() > 1e-10 {
            return Err(DerhamError::NotInKernel(sigma.clone(), rat_to_f64(v)));
        }
    }

    let input_degree = omega
        .pieces()
        .map(|(_, f)| f.max_poly_degree())
        .max()
        .unwrap_or(0);
    let base_degree = input_degree + 2;
    let cap = max_degree.unwrap_or(input_degree + 6).max(base_degree);
    let mut degree = base_degree;
    loop {
        let (eta, rank, exact) = witness_attempt(omega, k, degree)?;
        let at_cap = degree + 2 > cap;
        if exact || at_cap {
            let residual = omega.sub(&eta.exterior_d()).lp_norm(Lp::Finite(2.0))?;
            let witness = ExactnessWitness {
                residual_l2: residual,
                eta_norm_l2: eta.lp_norm(Lp::Finite(2.0))?,
                omega_norm_l2: omega.lp_norm(Lp::Finite(2.0))?,
                eta,
                ansatz_degree: degree,
                system_rank: rank,
            };
            if !exact && witness.residual_l2 > 1e-8 {
                return Err(DerhamError::InvalidParameter(format!(
                    "degree cap {cap} insufficient: residual {:.3e}",
                    witness.residual_l2
                )));
            }
            return Ok(witness);
        }
        degree += 2;
    }
}

fn witness_attempt(
    omega: &PiecewiseForm,
    k: usize,
    degree: u32,
) -> Result<(PiecewiseForm, usize, bool)> {
    let complex = omega.complex();
    let maximal = complex.maximal_simplices();
    // shared faces between pairs of maximal simplices, as in the exact
    // face-compatibility check
    let mut shared_faces: Vec<(usize, usize, Vec<u32>)> = Vec::new();
    for i in 0..maximal.len() {
        for j in i + 1..maximal.len() {
            let shared: Vec<u32> = maximal[i]
                .iter()
                .filter(|v| maximal[j].contains(v))
                .copied()
                .collect();
            if !shared.is_empty() && complex.contains(&shared) {
                shared_faces.push((i, j, shared));
            }
        }
    }
    // unknowns: per piece, per index set of degree k-1, per monomial
    struct Unknown {
        piece: usize,
        indices: Vec<u8>,
        exps: Vec<u32>,
    }
    let mut unknowns = Vec::new();
    for (pi, s) in maximal.iter().enumerate() {
        let m = s.len() - 1;
        for indices in index_sets(m, k - 1) {
            for exps in monomials_up_to(m, degree) {
                unknowns.push(Unknown { piece: pi, indices: indices.clone(), exps });
            }
        }
    }
    // assemble sparse columns
    let mut columns: Vec<BTreeMap<RowKey, Rat>> = Vec::with_capacity(unknowns.len());
    for u in &unknowns {
        let s = &maximal[u.piece];
        let m = s.len() - 1;
        let basis = PolyForm::monomial_form(
            m,
            u.indices.clone(),
            Poly::monomial(m, u.exps.clone(), Rat::one()),
        );
        let mut col = BTreeMap::new();
        for (idx, coeff) in basis.exterior_d().terms() {
            for (exps, c) in coeff.terms() {
                col.insert(
                    RowKey::Derivative(s.clone(), idx.clone(), exps.clone()),
                    c.clone(),
                );
            }
        }
        for (fi, (i, j, face)) in shared_faces.iter().enumerate() {
            let sign = if u.piece == *i {
                Rat::one()
            } else if u.piece == *j {
                -Rat::one()
            } else {
                continue;
            };
            let trace = basis.pullback(&face_embedding(face, &maximal[u.piece]))?;
            for (idx, coeff) in trace.terms() {
                for (exps, c) in coeff.terms() {
                    let key = RowKey::Trace(
                        fi,
                        idx.clone(),
                        exps.clone(),
                    );
                    let entry = col.entry(key).or_insert_with(Rat::zero);
                    *entry += c * &sign;
                }
            }
        }
        columns.push(col);
    }
    // right-hand side: omega under the derivative keys
    let mut rhs_map: BTreeMap<RowKey, Rat> = BTreeMap::new();
    for (s, f) in omega.pieces() {
        for (idx, coeff) in f.terms() {
            for (exps, c) in coeff.terms() {
                rhs_map.insert(
                    RowKey::Derivative(s.clone(), idx.clone(), exps.clone()),
                    c.clone(),
                );
            }
        }
    }
    let mut keys: BTreeMap<RowKey, ()> = BTreeMap::new();
    for col in &columns {
        for key in col.keys() {
            keys.insert(key.clone(), ());
        }
    }
    for key in rhs_map.keys() {
        keys.insert(key.clone(), ());
    }
    let keys: Vec<RowKey> = keys.into_keys().collect();
    let a: Vec<Vec<Rat>> = keys
        .iter()
        .map(|key| {
            columns
                .iter()
                .map(|col| col.get(key).cloned().unwrap_or_else(Rat::zero))
                .collect()
        })
        .collect();
    let b: Vec<Rat> = keys
        .iter()
        .map(|key| rhs_map.get(key).cloned().unwrap_or_else(Rat::zero))
        .collect();
    let (solution, rank, exact) = match solve_exact(&a, &b) {
        (Some(x), rank) => (x, rank, true),
        (None, _) => {
            let (x, rank) = solve_least_squares(&a, &b);
            (x, rank, false)
        }
    };
    let mut eta = PiecewiseForm::zero(complex.clone(), k - 1);
    for (pi, s) in maximal.iter().enumerate() {
        let m = s.len() - 1;
        let mut piece = PolyForm::zero(m, k - 1);
        for (u, x) in unknowns.iter().zip(&solution) {
            if u.piece != pi || x.is_zero() {
                continue;
            }
            piece = piece.add(&PolyForm::monomial_form(
                m,
                u.indices.clone(),
                Poly::monomial(m, u.exps.clone(), x.clone()),
            ));
        }
        eta.set_piece(s, piece)?;
    }
    Ok((eta, rank, exact))
}

// ---------------------------------------------------------------------------

#[cfg(test)]
mod tests {
    use super::*;
    use crate::complex::reference;
    use crate::poly::{rat, rat_i};
    use crate::whitney::whitney_normalized;

    fn arc(c: SimplicialComplex) -> Arc<SimplicialComplex> {
        Arc::new(c)
    }

    #[test]
    fn betti_numbers_of_the_reference_complexes() {
        assert_eq!(betti_numbers(&arc(reference::circle())), vec![1, 1]);
        assert_eq!(betti_numbers(&arc(reference::triangle())), vec![1, 0, 0]);
        assert_eq!(betti_numbers(&arc(reference::sphere2())), vec![1, 0, 1]);
        assert_eq!(betti_numbers(&arc(reference::torus7())), vec![1, 2, 1]);
    }

    #[test]
    fn whitney_subcomplex_matches_cochain_cohomology() {
        for complex in [
            arc(reference::circle()),
            arc(reference::triangle()),
            arc(reference::sphere2()),
            arc(reference::torus7()),
        ] {
            for k in 0..=complex.dim() {
                assert_eq!(
                    whitney_subcomplex_cohomology(&complex, k).unwrap(),
                    cochain_cohomology(&complex, k).unwrap().dimension,
                    "degree {k}"
                );
            }
        }
    }

    #[test]
    fn representatives_are_closed_and_independent() {
        let complex = arc(reference::torus7());
        let report = cochain_cohomology(&complex, 1).unwrap();
        assert_eq!(report.dimension, 2);
        for c in &report.representatives {
            assert!(c.coboundary().is_zero());
        }
    }

    #[test]
    fn coboundary_ranks_satisfy_the_complex_inequality() {
        for complex in [
            arc(reference::circle()),
            arc(reference::sphere2()),
            arc(reference::torus7()),
        ] {
            for k in 1..=complex.dim() {
                let n_k = complex.simplices(k).len();
                let r_prev = rat_rank(coboundary_matrix(&complex, k - 1));
                let d_k = coboundary_matrix(&complex, k);
                let r_k = if d_k.is_empty() { 0 } else { rat_rank(d_k) };
                assert!(r_prev + r_k <= n_k, "k = {k}");
                // delta^2 = 0: image of the previous map lies in the kernel
                let c = Cochain::indicator(
                    complex.clone(),
                    &complex.simplices(k - 1)[0],
                )
                .unwrap();
                assert!(c.coboundary().coboundary().is_zero());
            }
        }
    }

    #[test]
    fn derham_iso_report_on_the_circle() {
        let report = derham_iso_check(&arc(reference::circle())).unwrap();
        assert!(report.all_structural_checks_pass());
        assert_eq!(report.betti_cochain, vec![1, 1]);
        let residual = report.regularization_residual.expect("1-complex has charts");
        assert!(residual < 1e-4, "residual {residual}");
    }

    #[test]
    fn derham_iso_report_on_the_sphere() {
        let report = derham_iso_check(&arc(reference::sphere2())).unwrap();
        assert!(report.all_structural_checks_pass());
        assert!(report.regularization_residual.is_none());
        assert!(!report.notes.is_empty());
    }

    #[test]
    fn disjoint_triangles_have_two_components() {
        let complex = arc(SimplicialComplex::from_maximal(&[&[0, 1, 2], &[3, 4, 5]]));
        let report = derham_iso_check(&complex).unwrap();
        assert!(report.all_structural_checks_pass());
        assert_eq!(report.betti_cochain[0], 2);
    }

    /// A closed form with vanishing integrals and a known primitive:
    /// d(theta - W(I theta)) for a face-compatible piecewise theta.
    fn kernel_exact_form(theta: &PiecewiseForm) -> PiecewiseForm {
        let k = theta.degree();
        let i_theta = derham_map_exact(theta, k).unwrap();
        let corrected = theta.sub(&whitney(&i_theta));
        corrected.exterior_d()
    }

    #[test]
    fn witness_recovers_a_primitive_on_the_circle() {
        let complex = arc(reference::circle());
        // theta: continuous piecewise 0-form with quadratic profiles
        let mut theta = PiecewiseForm::zero(complex.clone(), 0);
        let edges = [[0u32, 1], [0, 2], [1, 2]];
        // vertex values 1, -2, 3 with a quadratic bump u(1-u) added per edge
        let ends = [(1i64, -2i64), (1, 3), (-2, 3)];
        for (edge, (a, b)) in edges.iter().zip(ends) {
            let u = Poly::var(1, 0);
            let bump = u.mul(&Poly::one(1).sub(&u));
            let p = Poly::constant(1, rat_i(a))
                .add(&u.scale(&rat_i(b - a)))
                .add(&bump.scale(&rat(7, 3)));
            theta.set_piece(edge, PolyForm::from_poly(p)).unwrap();
        }
        theta.check_face_compatibility().unwrap();
        let omega = kernel_exact_form(&theta);
        let witness = exactness_witness(&omega, None).unwrap();
        assert!(
            witness.residual_l2 <= 1e-10,
            "residual {}",
            witness.residual_l2
        );
        assert!(witness.eta_norm_l2.is_finite());
    }

    #[test]
    fn witness_on_a_triangle_two_form() {
        let complex = arc(reference::triangle());
        let theta = {
            let mut t = PiecewiseForm::zero(complex.clone(), 1);
            let coeff = Poly::var(2, 0).mul(&Poly::var(2, 1));
            t.set_piece(&[0, 1, 2], PolyForm::monomial_form(2, vec![0], coeff))
                .unwrap();
            t
        };
        let omega = kernel_exact_form(&theta);
        let witness = exactness_witness(&omega, None).unwrap();
        assert!(
            witness.residual_l2 <= 1e-10,
            "residual {}",
            witness.residual_l2
        );
    }

    #[test]
    fn witness_of_zero_is_zero() {
        let complex = arc(reference::circle());
        let zero = PiecewiseForm::zero(complex, 1);
        let witness = exactness_witness(&zero, None).unwrap();
        assert!(witness.eta.is_zero());
        assert_eq!(witness.residual_l2, 0.0);
    }

    #[test]
    fn witness_rejects_bad_inputs() {
        // not closed
        let triangle = arc(reference::triangle());
        let mut open = PiecewiseForm::zero(triangle.clone(), 1);
        open.set_piece(
            &[0, 1, 2],
            PolyForm::monomial_form(2, vec![1], Poly::var(2, 0)),
        )
        .unwrap();
        assert!(matches!(
            exactness_witness(&open, None),
            Err(DerhamError::NotClosed)
        ));
        // closed but with nonzero integrals
        let circle = arc(reference::circle());
        let c = Cochain::indicator(circle.clone(), &[0, 1]).unwrap();
        let w = whitney_normalized(&c);
        assert!(matches!(
            exactness_witness(&w, None),
            Err(DerhamError::NotInKernel(_, _))
        ));
    }
}
