//! Simplicial cochains, the Whitney map W into piecewise polynomial forms,
//! and the de Rham (integration) map I back to cochains.
//!
//! Integration of a k-form over an oriented k-simplex is the chart integral
//! int_ref a(u) du of the trace coefficient: this is metric-free, exact over
//! the rationals, and satisfies Stokes. With this convention I o W = id on
//! cochains and both d o W = W o delta and I o d = delta o I hold as exact
//! identities. The Riemannian (unit-edge volume) integral differs by the
//! degree-dependent factor sqrt((k+1)/2^k) and is exposed separately.

use std::collections::BTreeMap;
use std::sync::Arc;

use crate::complex::SimplicialComplex;
use crate::error::{DerhamError, Result};
use crate::forms::{barycentric_poly, simplex_volume_factor, PiecewiseForm, PolyForm};
use crate::poly::{parse_rat, rat_i, rat_to_f64, Rat};
use num::traits::Zero;
use serde::{Deserialize, Serialize};

/// A simplicial k-cochain with exact rational values.
#[derive(Clone, PartialEq)]
pub struct Cochain {
    complex: Arc<SimplicialComplex>,
    degree: usize,
    /// one value per k-simplex, in the complex's sorted order
    values: Vec<Rat>,
}

impl Cochain {
    pub fn zero(complex: Arc<SimplicialComplex>, degree: usize) -> Self {
        let n = complex.simplices(degree).len();
        Cochain { complex, degree, values: vec![Rat::zero(); n] }
    }

    /// Indicator cochain of a single k-simplex.
    pub fn indicator(complex: Arc<SimplicialComplex>, simplex: &[u32]) -> Result<Self> {
        let degree = simplex.len() - 1;
        let idx = complex
            .simplices(degree)
            .binary_search_by(|s| s.as_slice().cmp(simplex))
            .map_err(|_| DerhamError::UnknownFace(simplex.to_vec()))?;
        let mut c = Cochain::zero(complex, degree);
        c.values[idx] = rat_i(1);
        Ok(c)
    }

    pub fn from_values(
        complex: Arc<SimplicialComplex>,
        degree: usize,
        values: Vec<Rat>,
    ) -> Result<Self> {
        if values.len() != complex.simplices(degree).len() {
            return Err(DerhamError::DimensionMismatch(format!(
                "{} values for {} simplices of dimension {degree}",
                values.len(),
                complex.simplices(degree).len()
            )));
        }
        Ok(Cochain { complex, degree, values })
    }

    pub fn complex(&self) -> &Arc<SimplicialComplex> {
        &self.complex
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn values(&self) -> &[Rat] {
        &self.values
    }

    pub fn value(&self, simplex: &[u32]) -> Result<&Rat> {
        let idx = self
            .complex
            .simplices(self.degree)
            .binary_search_by(|s| s.as_slice().cmp(simplex))
            .map_err(|_| DerhamError::UnknownFace(simplex.to_vec()))?;
        Ok(&self.values[idx])
    }

    pub fn set_value(&mut self, simplex: &[u32], v: Rat) -> Result<()> {
        let idx = self
            .complex
            .simplices(self.degree)
            .binary_search_by(|s| s.as_slice().cmp(simplex))
            .map_err(|_| DerhamError::UnknownFace(simplex.to_vec()))?;
        self.values[idx] = v;
        Ok(())
    }

    pub fn is_zero(&self) -> bool {
        self.values.iter().all(|v| v.is_zero())
    }

    pub fn add(&self, other: &Cochain) -> Cochain {
        assert_eq!(self.degree, other.degree);
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a + b)
            .collect();
        Cochain { complex: self.complex.clone(), degree: self.degree, values }
    }

    pub fn sub(&self, other: &Cochain) -> Cochain {
        self.add(&other.scale(&-rat_i(1)))
    }

    pub fn scale(&self, c: &Rat) -> Cochain {
        Cochain {
            complex: self.complex.clone(),
            degree: self.degree,
            values: self.values.iter().map(|v| v * c).collect(),
        }
    }

    /// l_p norm of the value vector.
    pub fn lp_norm(&self, p: f64) -> f64 {
        if p.is_infinite() {
            self.values
                .iter()
                .map(|v| rat_to_f64(v).abs())
                .fold(0.0, f64::max)
        } else {
            self.values
                .iter()
                .map(|v| rat_to_f64(v).abs().powf(p))
                .sum::<f64>()
                .powf(1.0 / p)
        }
    }

    /// Simplicial coboundary: (delta c)(tau) = sum_i (-1)^i c(tau with the
    /// i-th vertex removed), vertices in increasing order.
    pub fn coboundary(&self) -> Cochain {
        let out_degree = self.degree + 1;
        let mut out = Cochain::zero(self.complex.clone(), out_degree);
        let faces = self.complex.simplices(self.degree);
        for (ti, tau) in self.complex.simplices(out_degree).iter().enumerate() {
            let mut acc = Rat::zero();
            for i in 0..tau.len() {
                let mut face = tau.clone();
                face.remove(i);
                let fi = faces
                    .binary_search_by(|s| s.as_slice().cmp(&face))
                    .expect("face closure");
                if i % 2 == 0 {
                    acc += &self.values[fi];
                } else {
                    acc -= &self.values[fi];
                }
            }
            out.values[ti] = acc;
        }
        out
    }

    pub fn to_json(&self) -> String {
        let doc = CochainRepr {
            degree: self.degree,
            values: self
                .complex
                .simplices(self.degree)
                .iter()
                .zip(&self.values)
                .map(|(s, v)| {
                    (
                        s.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(","),
                        v.to_string(),
                    )
                })
                .collect(),
        };
        serde_json::to_string_pretty(&doc).expect("serializable")
    }

    pub fn from_json(complex: Arc<SimplicialComplex>, text: &str) -> Result<Cochain> {
        let doc: CochainRepr = serde_json::from_str(text)?;
        let mut out = Cochain::zero(complex, doc.degree);
        for (key, val) in &doc.values {
            let simplex: Vec<u32> = key
                .split(',')
                .map(|t| {
                    t.trim().parse().map_err(|_| {
                        DerhamError::InvalidParameter(format!("bad simplex key '{key}'"))
                    })
                })
                .collect::<Result<_>>()?;
            let v = parse_rat(val)
                .ok_or_else(|| DerhamError::InvalidParameter(format!("bad rational '{val}'")))?;
            out.set_value(&simplex, v)?;
        }
        Ok(out)
    }
}

impl std::fmt::Debug for Cochain {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "Cochain(degree {}):", self.degree)?;
        for (s, v) in self.complex.simplices(self.degree).iter().zip(&self.values) {
            write!(f, " {s:?}={v}")?;
        }
        Ok(())
    }
}

#[derive(Serialize, Deserialize)]
struct CochainRepr {
    degree: usize,
    values: BTreeMap<String, String>,
}

/// The Whitney form of sigma = [v_0..v_k] on a containing simplex, in that
/// simplex's u-coordinates:
/// k! sum_i (-1)^i t_{v_i} dt_{v_0} ^ ... (omit i) ... ^ dt_{v_k}.
pub fn whitney_form_on(ambient: &[u32], sigma: &[u32]) -> PolyForm {
    let m = ambient.len() - 1;
    let k = sigma.len() - 1;
    let ts: Vec<PolyForm> = sigma
        .iter()
        .map(|&v| PolyForm::from_poly(barycentric_poly(ambient, v)))
        .collect();
    let mut acc = PolyForm::zero(m, k);
    for i in 0..=k {
        let mut term = ts[i].clone();
        for (j, t) in ts.iter().enumerate() {
            if j == i {
                continue;
            }
            term = term.wedge(&t.exterior_d()).expect("same patch");
        }
        if i % 2 == 1 {
            term = term.scale(&-rat_i(1));
        }
        acc = acc.add(&term);
    }
    let mut factorial = rat_i(1);
    for j in 2..=k {
        factorial *= rat_i(j as i64);
    }
    acc.scale(&factorial)
}

/// The Whitney map W: cochains -> piecewise polynomial forms.
pub fn whitney(c: &Cochain) -> PiecewiseForm {
    let complex = c.complex().clone();
    let k = c.degree();
    let mut out = PiecewiseForm::zero(complex.clone(), k);
    for top in complex.maximal_simplices() {
        let m = top.len() - 1;
        let mut piece = PolyForm::zero(m, k);
        for (sigma, v) in complex.simplices(k).iter().zip(c.values()) {
            if v.is_zero() || !sigma.iter().all(|x| top.contains(x)) {
                continue;
            }
            piece = piece.add(&whitney_form_on(&top, sigma).scale(v));
        }
        out.set_piece(&top, piece).expect("maximal simplex");
    }
    out
}

/// Chart integral of a k-form over an oriented k-simplex: int_ref a(u) du of
/// the trace coefficient. Exact; I o W = id.
pub fn simplex_integral(w: &PiecewiseForm, sigma: &[u32]) -> Result<Rat> {
    let k = sigma.len() - 1;
    if w.degree() != k {
        return Err(DerhamError::DegreeOutOfRange(format!(
            "integrating a {}-form over a {k}-simplex",
            w.degree()
        )));
    }
    let trace = w.trace_on(sigma)?;
    if k == 0 {
        return Ok(trace.coeff(&[]).eval_rat(&[]));
    }
    let indices: Vec<u8> = (0..k as u8).collect();
    Ok(trace.coeff(&indices).integrate_ref_simplex())
}

/// Riemannian integral: the chart integral rescaled by the unit-edge volume
/// factor sqrt((k+1)/2^k), so the constant volume form du_1..du_k on a
/// k-simplex integrates to its Riemannian volume over k!.
pub fn simplex_integral_riemannian(w: &PiecewiseForm, sigma: &[u32]) -> Result<f64> {
    let k = sigma.len() - 1;
    Ok(rat_to_f64(&simplex_integral(w, sigma)?) * simplex_volume_factor(k))
}

/// The de Rham map in the exact chart convention; I o W = id on the nose.
pub fn derham_map_exact(w: &PiecewiseForm, degree: usize) -> Result<Cochain> {
    if w.degree() != degree {
        return Err(DerhamError::DegreeOutOfRange(format!(
            "de Rham map of a {}-form at degree {degree}",
            w.degree()
        )));
    }
    let complex = w.complex().clone();
    let values = complex
        .simplices(degree)
        .iter()
        .map(|sigma| simplex_integral(w, sigma))
        .collect::<Result<Vec<_>>>()?;
    Cochain::from_values(complex, degree, values)
}

/// A cochain with floating point values (used for the Riemannian-normalized
/// de Rham map, whose values are generally irrational).
#[derive(Debug, Clone)]
pub struct RealCochain {
    pub complex: Arc<SimplicialComplex>,
    pub degree: usize,
    pub values: Vec<f64>,
}

impl RealCochain {
    pub fn value(&self, simplex: &[u32]) -> Result<f64> {
        let idx = self
            .complex
            .simplices(self.degree)
            .binary_search_by(|s| s.as_slice().cmp(simplex))
            .map_err(|_| DerhamError::UnknownFace(simplex.to_vec()))?;
        Ok(self.values[idx])
    }

    pub fn max_abs_diff(&self, c: &Cochain) -> f64 {
        self.values
            .iter()
            .zip(c.values())
            .map(|(a, b)| (a - rat_to_f64(b)).abs())
            .fold(0.0, f64::max)
    }
}

/// The de Rham map I with Riemannian integration: I(W chi_sigma)(sigma) =
/// sqrt(k+1)/sqrt(2^k).
pub fn derham_map(w: &PiecewiseForm, degree: usize) -> Result<RealCochain> {
    let exact = derham_map_exact(w, degree)?;
    let factor = simplex_volume_factor(degree);
    Ok(RealCochain {
        complex: exact.complex.clone(),
        degree,
        values: exact.values.iter().map(|v| rat_to_f64(v) * factor).collect(),
    })
}

/// The normalized Whitney map W~ = (sqrt(2^k)/sqrt(k+1)) W, so that the
/// Riemannian de Rham map retracts it: I o W~ = id. The irrational scale is
/// carried as a nearest-f64 rational, exact to machine precision.
pub fn whitney_normalized(c: &Cochain) -> PiecewiseForm {
    let k = c.degree();
    let scale = crate::poly::rat_from_f64(1.0 / simplex_volume_factor(k));
    whitney(c).scale(&scale)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::complex::reference;
    use crate::forms::Lp;
    use crate::poly::rat;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn coboundary_examples() {
        // on a single edge [0,1]: delta of the vertex indicator chi_0 is -chi_{01}
        let k = Arc::new(SimplicialComplex::from_maximal(&[&[0, 1]]));
        let chi0 = Cochain::indicator(k.clone(), &[0]).unwrap();
        let d = chi0.coboundary();
        assert_eq!(*d.value(&[0, 1]).unwrap(), -rat_i(1));
        let chi1 = Cochain::indicator(k, &[1]).unwrap();
        assert_eq!(*chi1.coboundary().value(&[0, 1]).unwrap(), rat_i(1));
    }

    #[test]
    fn coboundary_squares_to_zero() {
        let k = Arc::new(reference::torus7());
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for deg in 0..=1 {
            let n = k.simplices(deg).len();
            let values = (0..n).map(|_| rat(rng.gen_range(-9i64..=9), 1)).collect();
            let c = Cochain::from_values(k.clone(), deg, values).unwrap();
            assert!(c.coboundary().coboundary().is_zero());
        }
    }

    #[test]
    fn whitney_edge_form() {
        // on the edge [0,1]: W(chi_{01}) = t_0 dt_1 - t_1 dt_0 = du
        let k = Arc::new(SimplicialComplex::from_maximal(&[&[0, 1]]));
        let c = Cochain::indicator(k, &[0, 1]).unwrap();
        let w = whitney(&c);
        let piece = w.piece(&[0, 1]).unwrap();
        assert_eq!(*piece, PolyForm::basis_one_form(1, 0));
        assert_eq!(simplex_integral(&w, &[0, 1]).unwrap(), rat_i(1));
    }

    #[test]
    fn whitney_face_compatible() {
        let k = Arc::new(reference::sphere2());
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        for deg in 0..=2 {
            let n = k.simplices(deg).len();
            let values = (0..n)
                .map(|_| rat(rng.gen_range(-5i64..=5), rng.gen_range(1i64..=3)))
                .collect();
            let c = Cochain::from_values(k.clone(), deg, values).unwrap();
            whitney(&c).check_face_compatibility().unwrap();
        }
    }

    #[test]
    fn whitney_left_inverse_of_derham() {
        // I o W = id, exactly, for random cochains on several complexes
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        for k in [
            Arc::new(reference::circle()),
            Arc::new(reference::sphere2()),
            Arc::new(reference::torus7()),
        ] {
            for deg in 0..=k.dim() {
                let n = k.simplices(deg).len();
                let values: Vec<Rat> = (0..n)
                    .map(|_| rat(rng.gen_range(-7i64..=7), rng.gen_range(1i64..=4)))
                    .collect();
                let c = Cochain::from_values(k.clone(), deg, values).unwrap();
                let back = derham_map_exact(&whitney(&c), deg).unwrap();
                assert_eq!(back, c);
            }
        }
    }

    #[test]
    fn chain_maps_exact() {
        // d o W = W o delta and I o d = delta o I
        let mut rng = ChaCha8Rng::seed_from_u64(44);
        let k = Arc::new(reference::sphere2());
        for deg in 0..k.dim() {
            let n = k.simplices(deg).len();
            let values: Vec<Rat> = (0..n)
                .map(|_| rat(rng.gen_range(-5i64..=5), rng.gen_range(1i64..=3)))
                .collect();
            let c = Cochain::from_values(k.clone(), deg, values).unwrap();
            let lhs = whitney(&c).exterior_d();
            let rhs = whitney(&c.coboundary());
            assert_eq!(lhs, rhs);
            assert_eq!(
                derham_map_exact(&lhs, deg + 1).unwrap(),
                derham_map_exact(&whitney(&c), deg).unwrap().coboundary()
            );
        }
    }

    #[test]
    fn riemannian_pairing_values() {
        // I_riem(W chi_sigma)(sigma) = sqrt(k+1)/sqrt(2^k)
        let tri = Arc::new(reference::triangle());
        for sigma in [vec![0u32, 1], vec![0, 1, 2]] {
            let k = sigma.len() - 1;
            let c = Cochain::indicator(tri.clone(), &sigma).unwrap();
            let val = simplex_integral_riemannian(&whitney(&c), &sigma).unwrap();
            let expect = ((k as f64 + 1.0) / 2f64.powi(k as i32)).sqrt();
            assert!((val - expect).abs() < 1e-14, "{sigma:?}");
        }
        // k = 1 value is exactly 1
        let c = Cochain::indicator(tri.clone(), &[0, 1]).unwrap();
        assert!((simplex_integral_riemannian(&whitney(&c), &[0, 1]).unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn whitney_sup_norm_is_finite_and_positive() {
        let k = Arc::new(reference::torus7());
        let c = Cochain::indicator(k, &[0, 1]).unwrap();
        let w = whitney(&c);
        let sup = w.lp_norm(Lp::Infinity).unwrap();
        assert!(sup > 0.5 && sup < 10.0, "sup = {sup}");
    }

    #[test]
    fn normalized_whitney_round_trip() {
        // I o W~ = id within 1e-12 on random cochains of every degree
        let mut rng = ChaCha8Rng::seed_from_u64(91);
        for k in [Arc::new(reference::circle()), Arc::new(reference::torus7())] {
            for deg in 0..=k.dim() {
                let n = k.simplices(deg).len();
                let values: Vec<Rat> = (0..n)
                    .map(|_| rat(rng.gen_range(-9i64..=9), rng.gen_range(1i64..=5)))
                    .collect();
                let c = Cochain::from_values(k.clone(), deg, values).unwrap();
                let back = derham_map(&whitney_normalized(&c), deg).unwrap();
                assert!(back.max_abs_diff(&c) <= 1e-12, "deg {deg}");
            }
        }
    }

    #[test]
    fn whitney_norm_bound_shape() {
        // ||W(c)||_p^p <= N * C * binom(n+1, k+1)^(p-1) * ||c||_p^p with
        // C measured as the largest basis-form norm
        let k = Arc::new(reference::torus7());
        let report = k.check_geometry(1.0);
        let n_star = report.star_bound as f64;
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let p = 2.0;
        for deg in 0..=2usize {
            let count = k.simplices(deg).len();
            let c_measured: f64 = (0..count)
                .map(|i| {
                    let mut basis = Cochain::zero(k.clone(), deg);
                    basis.values[i] = rat_i(1);
                    whitney(&basis).lp_norm(Lp::Finite(p)).unwrap().powf(p)
                })
                .fold(0.0, f64::max);
            let binom = num::integer::binomial(3u64, deg as u64 + 1) as f64;
            for _ in 0..5 {
                let values: Vec<Rat> = (0..count)
                    .map(|_| rat(rng.gen_range(-9i64..=9), rng.gen_range(1i64..=4)))
                    .collect();
                let c = Cochain::from_values(k.clone(), deg, values).unwrap();
                let lhs = whitney(&c).lp_norm(Lp::Finite(p)).unwrap().powf(p);
                let rhs =
                    n_star * c_measured * binom.powf(p - 1.0) * c.lp_norm(p).powf(p);
                assert!(lhs <= rhs * (1.0 + 1e-9), "deg {deg}: {lhs} vs {rhs}");
            }
        }
    }

    #[test]
    fn cochain_json_round_trip() {
        let k = Arc::new(reference::circle());
        let mut c = Cochain::zero(k.clone(), 1);
        c.set_value(&[0, 1], rat(3, 7)).unwrap();
        c.set_value(&[1, 2], rat(-2, 1)).unwrap();
        let text = c.to_json();
        let back = Cochain::from_json(k, &text).unwrap();
        assert_eq!(c, back);
    }
}
