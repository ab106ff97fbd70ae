//! Global regularization on one-dimensional complexes and on bouquet stars.
//!
//! Each vertex star of a 1-complex with vertex degree two is charted onto an
//! interval [-lambda, lambda] with lambda = 5/4 by signed arc length, so the
//! unit ball sits strictly inside the star. The star operators are the
//! chart-conjugated one-dimensional operators from [`super::line`]; the global
//! operators are the finite composition over stars in ascending vertex order,
//!
//!   R = R_1 R_2 ... R_N,   A = sum_i R_1 ... R_{i-1} A_i,
//!
//! which satisfy R - id = dA + Ad up to quadrature, since each per-star pair
//! does and R commutes with d. Between star applications the edge functions
//! are resampled into piecewise Chebyshev interpolants (split at their
//! breakpoints), which keeps the cost of the composition linear in the number
//! of stars.

use std::collections::BTreeMap;
use std::sync::Arc;

use crate::complex::SimplicialComplex;
use crate::error::{DerhamError, Result};
use crate::forms::{Lp, PiecewiseForm};
use crate::mollify::line::{a1, gl_split, r0, r1, LineFunc};
use crate::quad::gauss_legendre_01;

/// Chart scale: a star of two unit edges maps onto [-lambda, lambda].
pub const CHART_SCALE: f64 = 1.25;

/// Largest eps for which the support-containment check holds: the inner
/// half-star (|y| <= lambda/2) thickened by 2 eps must stay inside the unit
/// ball of the chart.
const EPS_MAX: f64 = 0.1875;

// ---------------------------------------------------------------------------
// piecewise scalar data on a 1-complex
// ---------------------------------------------------------------------------

/// A 0- or 1-form on a one-dimensional complex, stored per edge as a
/// [`LineFunc`] in the edge parameter u in [0, 1] (for degree 1, the
/// coefficient with respect to du, oriented from the smaller vertex).
#[derive(Clone)]
pub struct ComplexFunc {
    complex: Arc<SimplicialComplex>,
    degree: usize,
    edges: BTreeMap<Vec<u32>, LineFunc>,
}

impl ComplexFunc {
    pub fn zero(complex: Arc<SimplicialComplex>, degree: usize) -> Self {
        let edges = complex
            .simplices(1)
            .iter()
            .map(|e| (e.clone(), LineFunc::zero()))
            .collect();
        ComplexFunc { complex, degree, edges }
    }

    /// Convert a piecewise polynomial form on a 1-complex.
    pub fn from_piecewise(omega: &PiecewiseForm) -> Result<Self> {
        let complex = omega.complex().clone();
        if complex.dim() != 1 {
            return Err(DerhamError::DimensionMismatch(format!(
                "expected a 1-complex, got dimension {}",
                complex.dim()
            )));
        }
        let degree = omega.degree();
        if degree > 1 {
            return Err(DerhamError::DegreeOutOfRange(format!(
                "degree {degree} form on a 1-complex"
            )));
        }
        let mut edges = BTreeMap::new();
        for e in complex.simplices(1) {
            let piece = omega.piece(e).cloned().unwrap_or_else(|| {
                crate::forms::PolyForm::zero(1, degree)
            });
            let idx: &[u8] = if degree == 0 { &[] } else { &[0] };
            let p = piece.coeff(idx);
            let dp = p.partial(0);
            edges.insert(
                e.clone(),
                LineFunc::new(
                    Arc::new(move |u| p.eval_f64(&[u])),
                    Arc::new(move |u| dp.eval_f64(&[u])),
                    Vec::new(),
                ),
            );
        }
        Ok(ComplexFunc { complex, degree, edges })
    }

    pub fn complex(&self) -> &Arc<SimplicialComplex> {
        &self.complex
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn eval_on_edge(&self, edge: &[u32], u: f64) -> f64 {
        self.edges[edge].eval(u)
    }

    pub fn add_scaled(&self, other: &ComplexFunc, c: f64) -> ComplexFunc {
        let edges = self
            .edges
            .iter()
            .map(|(e, f)| (e.clone(), f.add_scaled(&other.edges[e], c)))
            .collect();
        ComplexFunc {
            complex: self.complex.clone(),
            degree: self.degree,
            edges,
        }
    }

    /// Exterior derivative of a 0-form (the per-edge derivative closures).
    pub fn d(&self) -> Result<ComplexFunc> {
        if self.degree != 0 {
            return Err(DerhamError::DegreeOutOfRange(
                "d on a 1-complex is only nonzero on 0-forms".into(),
            ));
        }
        let edges = self
            .edges
            .iter()
            .map(|(e, f)| (e.clone(), f.derivative()))
            .collect();
        ComplexFunc {
            complex: self.complex.clone(),
            degree: 1,
            edges,
        }
        .pipe_ok()
    }

    fn pipe_ok(self) -> Result<ComplexFunc> {
        Ok(self)
    }

    /// L_p norm over the complex (unit edges), with quadrature panels split at
    /// the per-edge breakpoints.
    pub fn lp_norm(&self, p: Lp, n_gl: usize) -> f64 {
        match p {
            Lp::Infinity => {
                let (x, _) = gauss_legendre_01(n_gl.max(8));
                let mut best = 0.0f64;
                for f in self.edges.values() {
                    let mut edges_u = vec![0.0, 1.0];
                    edges_u.extend(f.breaks().iter().copied().filter(|b| (0.0..=1.0).contains(b)));
                    for pair in edges_u.windows(2) {
                        for xi in &x {
                            let u = pair[0] + (pair[1] - pair[0]) * xi;
                            best = best.max(f.eval(u).abs());
                        }
                    }
                    best = best.max(f.eval(0.0).abs()).max(f.eval(1.0).abs());
                }
                best
            }
            Lp::Finite(p) => {
                let mut total = 0.0;
                for f in self.edges.values() {
                    total += gl_split(0.0, 1.0, f.breaks(), n_gl, |u| f.eval(u).abs().powf(p));
                }
                total.powf(1.0 / p)
            }
        }
    }

    pub fn l2_norm(&self, n_gl: usize) -> f64 {
        self.lp_norm(Lp::Finite(2.0), n_gl)
    }
}

// ---------------------------------------------------------------------------
// star charts on a 1-complex
// ---------------------------------------------------------------------------

/// The chart of a degree-2 vertex star: the edge toward the smaller-id
/// neighbour spans the negative axis, the other the positive axis, both
/// stretched by CHART_SCALE.
struct StarChart {
    /// (edge, branch sign, orientation): orientation = +1 when the chart
    /// vertex is the edge's first vertex (u grows away from the vertex).
    branches: [(Vec<u32>, f64, f64); 2],
}

fn star_chart(complex: &SimplicialComplex, v: u32) -> Result<StarChart> {
    let mut adjacent: Vec<Vec<u32>> = complex
        .simplices(1)
        .iter()
        .filter(|e| e.contains(&v))
        .cloned()
        .collect();
    if adjacent.len() != 2 {
        return Err(DerhamError::MissingChart(v));
    }
    let other = |e: &[u32]| if e[0] == v { e[1] } else { e[0] };
    adjacent.sort_by_key(|e| other(e));
    let mk = |e: &Vec<u32>, sign: f64| {
        let orient = if e[0] == v { 1.0 } else { -1.0 };
        (e.clone(), sign, orient)
    };
    Ok(StarChart {
        branches: [mk(&adjacent[0], -1.0), mk(&adjacent[1], 1.0)],
    })
}

/// Pull a ComplexFunc back through the chart of vertex v to a LineFunc in the
/// chart coordinate (1-forms as coefficients with respect to dy).
fn star_func(f: &ComplexFunc, chart: &StarChart) -> LineFunc {
    let degree = f.degree;
    let funcs: [LineFunc; 2] = [
        f.edges[&chart.branches[0].0].clone(),
        f.edges[&chart.branches[1].0].clone(),
    ];
    let geom: Vec<(f64, f64)> = chart
        .branches
        .iter()
        .map(|(_, s, o)| (*s, *o))
        .collect();
    let mut breaks = vec![0.0];
    for (b, func) in funcs.iter().enumerate() {
        let (sign, orient) = geom[b];
        for &ub in func.breaks() {
            if (0.0..=1.0).contains(&ub) {
                let s = if orient > 0.0 { ub } else { 1.0 - ub };
                breaks.push(sign * CHART_SCALE * s);
            }
        }
    }
    let pick = |y: f64| usize::from(y >= 0.0);
    let g1 = funcs.clone();
    let g2 = funcs;
    let geom2 = geom.clone();
    let chart_u = move |geom: &[(f64, f64)], b: usize, y: f64| -> (f64, f64) {
        let (sign, orient) = geom[b];
        let s = (sign * y / CHART_SCALE).clamp(0.0, 1.0);
        let u = if orient > 0.0 { s } else { 1.0 - s };
        (u, sign * orient / CHART_SCALE)
    };
    let geom1 = geom;
    LineFunc::new(
        Arc::new(move |y| {
            let b = pick(y);
            let (u, du_dy) = chart_u(&geom1, b, y);
            if degree == 0 {
                g1[b].eval(u)
            } else {
                g1[b].eval(u) * du_dy
            }
        }),
        Arc::new(move |y| {
            let b = pick(y);
            let (u, du_dy) = chart_u(&geom2, b, y);
            if degree == 0 {
                g2[b].deriv(u) * du_dy
            } else {
                g2[b].deriv(u) * du_dy * du_dy
            }
        }),
        breaks,
    )
}

/// Push the operator output on the chart back to the two adjacent edges; on
/// the part of an edge outside the unit ball the input is untouched.
fn unmap_star(
    f: &ComplexFunc,
    chart: &StarChart,
    g: &LineFunc,
    out_degree: usize,
) -> ComplexFunc {
    let mut out = f.clone();
    out.degree = out_degree;
    for branch in 0..2 {
        let edge = chart.branches[branch].0.clone();
        let old = f.edges[&edge].clone();
        let old2 = old.clone();
        let gv = g.clone();
        let gd = g.clone();
        let (sign, orient) = (chart.branches[branch].1, chart.branches[branch].2);
        let to_y = move |u: f64| -> (f64, f64) {
            let s = if orient > 0.0 { u } else { 1.0 - u };
            (sign * CHART_SCALE * s, sign * orient * CHART_SCALE)
        };
        let to_y2 = to_y;
        let same_degree = out_degree == f.degree;
        let mut breaks: Vec<f64> = old
            .breaks()
            .iter()
            .copied()
            .filter(|&u| {
                let (y, _) = to_y(u);
                y.abs() >= 1.0
            })
            .collect();
        for &yb in g.breaks() {
            if yb.abs() <= 1.0 && (yb * sign >= 0.0 || yb == 0.0) {
                let s = yb.abs() / CHART_SCALE;
                if s <= 1.0 {
                    let u = if orient > 0.0 { s } else { 1.0 - s };
                    breaks.push(u);
                }
            }
        }
        let eval = Arc::new(move |u: f64| {
            let (y, dy_du) = to_y(u);
            if y.abs() >= 1.0 {
                if same_degree {
                    return old.eval(u);
                }
                return 0.0;
            }
            if out_degree == 1 {
                gv.eval(y) * dy_du
            } else {
                gv.eval(y)
            }
        });
        let deriv = Arc::new(move |u: f64| {
            let (y, dy_du) = to_y2(u);
            if y.abs() >= 1.0 {
                if same_degree {
                    return old2.deriv(u);
                }
                return 0.0;
            }
            if out_degree == 1 {
                gd.deriv(y) * dy_du * dy_du
            } else {
                gd.deriv(y) * dy_du
            }
        });
        out.edges.insert(edge, LineFunc::new(eval, deriv, breaks));
    }
    // A-outputs (degree drop) vanish away from the star, including on
    // non-adjacent edges
    if out_degree != f.degree {
        for (e, func) in out.edges.iter_mut() {
            if e != &chart.branches[0].0 && e != &chart.branches[1].0 {
                *func = LineFunc::zero();
            }
        }
    }
    out
}

// ---------------------------------------------------------------------------
// Chebyshev resampling between star applications
// ---------------------------------------------------------------------------

/// Barycentric interpolation through Chebyshev points of the second kind.
#[derive(Clone)]
struct ChebPanel {
    a: f64,
    b: f64,
    vals: Vec<f64>,
    dvals: Vec<f64>,
}

fn cheb_nodes(n: usize) -> Vec<f64> {
    (0..n)
        .map(|j| 0.5 - 0.5 * (std::f64::consts::PI * j as f64 / (n - 1) as f64).cos())
        .collect()
}

fn cheb_eval(vals: &[f64], t: f64) -> f64 {
    let n = vals.len();
    let nodes = cheb_nodes(n);
    let mut num = 0.0;
    let mut den = 0.0;
    for j in 0..n {
        let diff = t - nodes[j];
        if diff.abs() < 1e-14 {
            return vals[j];
        }
        let mut w = if j % 2 == 0 { 1.0 } else { -1.0 };
        if j == 0 || j == n - 1 {
            w *= 0.5;
        }
        let q = w / diff;
        num += q * vals[j];
        den += q;
    }
    num / den
}

impl ChebPanel {
    fn sample(f: &LineFunc, a: f64, b: f64, n: usize) -> ChebPanel {
        // stay strictly inside the panel so one-sided limits at breakpoints
        // are sampled consistently
        let pad = 1e-12 * (b - a).max(1.0);
        let map = |t: f64| (a + pad) + ((b - pad) - (a + pad)) * t;
        let vals = cheb_nodes(n).iter().map(|&t| f.eval(map(t))).collect();
        let dvals = cheb_nodes(n).iter().map(|&t| f.deriv(map(t))).collect();
        ChebPanel { a, b, vals, dvals }
    }

    fn local(&self, u: f64) -> f64 {
        ((u - self.a) / (self.b - self.a)).clamp(0.0, 1.0)
    }
}

/// Replace a LineFunc on [0, 1] by a piecewise Chebyshev interpolant with the
/// same breakpoints, so later evaluations are cheap.
fn resample(f: &LineFunc, n: usize) -> LineFunc {
    let mut edges = vec![0.0];
    edges.extend(
        f.breaks()
            .iter()
            .copied()
            .filter(|b| *b > 1e-12 && *b < 1.0 - 1e-12),
    );
    edges.push(1.0);
    edges.sort_by(|a, b| a.partial_cmp(b).unwrap());
    edges.dedup_by(|a, b| (*a - *b).abs() < 1e-11);
    let panels: Vec<ChebPanel> = edges
        .windows(2)
        .map(|pair| ChebPanel::sample(f, pair[0], pair[1], n))
        .collect();
    let panels2 = panels.clone();
    let locate = |panels: &[ChebPanel], u: f64| -> usize {
        panels
            .iter()
            .position(|p| u <= p.b)
            .unwrap_or(panels.len() - 1)
    };
    let breaks = f.breaks().to_vec();
    LineFunc::new(
        Arc::new(move |u| {
            let p = &panels[locate(&panels, u.clamp(0.0, 1.0))];
            cheb_eval(&p.vals, p.local(u))
        }),
        Arc::new(move |u| {
            let p = &panels2[locate(&panels2, u.clamp(0.0, 1.0))];
            cheb_eval(&p.dvals, p.local(u))
        }),
        breaks,
    )
}

fn resample_complex(f: &ComplexFunc, n: usize) -> ComplexFunc {
    let edges = f
        .edges
        .iter()
        .map(|(e, func)| (e.clone(), resample(func, n)))
        .collect();
    ComplexFunc {
        complex: f.complex.clone(),
        degree: f.degree,
        edges,
    }
}

// ---------------------------------------------------------------------------
// per-star and global operators
// ---------------------------------------------------------------------------

struct QuadSetup {
    n_gl: usize,
    n_t: usize,
    n_cheb: usize,
}

impl QuadSetup {
    fn from_degree(quad_degree: usize) -> QuadSetup {
        let n_gl = quad_degree / 2 + 2;
        QuadSetup {
            n_gl,
            n_t: (n_gl - 2).max(6),
            n_cheb: (quad_degree + 6).max(16),
        }
    }
}

fn star_r(f: &ComplexFunc, chart: &StarChart, eps: f64, q: &QuadSetup) -> ComplexFunc {
    let g = star_func(f, chart);
    let rg = if f.degree == 0 {
        r0(&g, eps, q.n_gl)
    } else {
        r1(&g, eps, q.n_gl)
    };
    resample_complex(&unmap_star(f, chart, &rg, f.degree), q.n_cheb)
}

fn star_a(f: &ComplexFunc, chart: &StarChart, eps: f64, q: &QuadSetup) -> ComplexFunc {
    if f.degree == 0 {
        return ComplexFunc::zero(f.complex.clone(), 0);
    }
    let g = star_func(f, chart);
    let ag = a1(&g, eps, q.n_gl, q.n_t);
    resample_complex(&unmap_star(f, chart, &ag, 0), q.n_cheb)
}

/// Per-vertex eps schedule and diagnostics of one global run.
#[derive(Clone, Debug)]
pub struct RegularizationReport {
    /// Final eps per vertex, after halving until support containment holds.
    pub eps_schedule: Vec<(u32, f64)>,
    /// L2 norm of R Omega - Omega - d A Omega - A d Omega.
    pub residual_l2: f64,
    /// Largest |R Omega| or |A Omega| sampled outside the reach of
    /// supp Omega; None when Omega touches every edge.
    pub locality_excess: Option<f64>,
    /// L2 difference between ascending and descending star order.
    pub order_dependence_l2: f64,
}

pub struct GlobalRegularization {
    pub r_omega: ComplexFunc,
    pub a_omega: ComplexFunc,
    pub report: RegularizationReport,
}

fn charts_and_schedule(
    complex: &Arc<SimplicialComplex>,
    eps: f64,
) -> Result<Vec<(u32, StarChart, f64)>> {
    if eps <= 0.0 || !eps.is_finite() {
        return Err(DerhamError::InvalidParameter(format!(
            "eps must be positive, got {eps}"
        )));
    }
    let mut out = Vec::new();
    for &v in complex.vertices() {
        let chart = star_chart(complex, v)?;
        let mut e = eps;
        while e > EPS_MAX {
            e *= 0.5;
        }
        out.push((v, chart, e));
    }
    Ok(out)
}

/// R_1 ... R_N applied to f, innermost star last in the list.
fn apply_r_chain(
    f: &ComplexFunc,
    stars: &[(u32, StarChart, f64)],
    q: &QuadSetup,
) -> ComplexFunc {
    let mut acc = f.clone();
    for (_, chart, e) in stars.iter().rev() {
        acc = star_r(&acc, chart, *e, q);
    }
    acc
}

/// A = sum_i R_1 ... R_{i-1} A_i applied to f.
fn apply_a_chain(
    f: &ComplexFunc,
    stars: &[(u32, StarChart, f64)],
    q: &QuadSetup,
) -> ComplexFunc {
    let mut total = ComplexFunc::zero(f.complex.clone(), f.degree.saturating_sub(1));
    if f.degree == 0 {
        return total;
    }
    for i in 0..stars.len() {
        let mut term = star_a(f, &stars[i].1, stars[i].2, q);
        for (_, chart, e) in stars[..i].iter().rev() {
            term = star_r(&term, chart, *e, q);
        }
        total = total.add_scaled(&term, 1.0);
    }
    total
}

/// Graph distance in edge units from a point at parameter u on `edge` to the
/// nearest edge carrying support.
fn arc_distance_to_support(
    complex: &SimplicialComplex,
    supp: &[Vec<u32>],
    edge: &[u32],
    u: f64,
) -> f64 {
    if supp.iter().any(|e| e == edge) {
        return 0.0;
    }
    // BFS vertex distances to the support edges (unit edge lengths)
    let verts = complex.vertices();
    let mut dist: BTreeMap<u32, f64> = BTreeMap::new();
    let mut frontier: Vec<u32> = Vec::new();
    for e in supp {
        for &v in e {
            dist.insert(v, 0.0);
            frontier.push(v);
        }
    }
    while !frontier.is_empty() {
        let mut next = Vec::new();
        for &v in &frontier {
            let dv = dist[&v];
            for e in complex.simplices(1) {
                if e.contains(&v) {
                    let w = if e[0] == v { e[1] } else { e[0] };
                    if !dist.contains_key(&w) || dist[&w] > dv + 1.0 {
                        dist.insert(w, dv + 1.0);
                        next.push(w);
                    }
                }
            }
        }
        frontier = next;
    }
    let _ = verts;
    let d0 = dist.get(&edge[0]).copied().unwrap_or(f64::INFINITY);
    let d1 = dist.get(&edge[1]).copied().unwrap_or(f64::INFINITY);
    (d0 + u).min(d1 + (1.0 - u))
}

/// Regularize a piecewise polynomial form on a 1-complex (all vertex stars
/// must be intervals, i.e. every vertex has degree 2).
pub fn global_regularize(
    omega: &PiecewiseForm,
    eps: f64,
    quad_degree: usize,
) -> Result<GlobalRegularization> {
    let f = ComplexFunc::from_piecewise(omega)?;
    let complex = f.complex.clone();
    let stars = charts_and_schedule(&complex, eps)?;
    let q = QuadSetup::from_degree(quad_degree.max(8));

    let r_omega = apply_r_chain(&f, &stars, &q);
    let a_omega = apply_a_chain(&f, &stars, &q);

    // residual R Omega - Omega - d(A Omega) - A(d Omega)
    let residual = if f.degree == 1 {
        // d Omega = 0 in top degree; d(A Omega) is the derivative closure
        let d_a = a_omega.d()?;
        r_omega.add_scaled(&f, -1.0).add_scaled(&d_a, -1.0)
    } else {
        let a_df = apply_a_chain(&f.d()?, &stars, &q);
        r_omega.add_scaled(&f, -1.0).add_scaled(&a_df, -1.0)
    };
    let residual_l2 = residual.l2_norm(q.n_gl + 4);

    // locality: beyond reach = 1/CHART_SCALE through any one star, the output
    // must agree with the input (here: vanish, since the input vanishes)
    let supp: Vec<Vec<u32>> = complex
        .simplices(1)
        .iter()
        .filter(|e| {
            let g = &f.edges[*e];
            (0..=8).any(|i| g.eval(i as f64 / 8.0).abs() > 1e-12)
        })
        .cloned()
        .collect();
    let locality_excess = if supp.len() == complex.simplices(1).len() {
        None
    } else {
        let reach = 1.0 / CHART_SCALE + 0.05;
        let mut excess = 0.0f64;
        for e in complex.simplices(1) {
            for i in 0..=16 {
                let u = i as f64 / 16.0;
                if arc_distance_to_support(&complex, &supp, e, u) > reach {
                    excess = excess.max(r_omega.edges[e].eval(u).abs());
                    excess = excess.max(a_omega.edges[e].eval(u).abs());
                }
            }
        }
        Some(excess)
    };

    // order-dependence diagnostic: rerun R with the star order reversed
    let mut reversed = charts_and_schedule(&complex, eps)?;
    reversed.reverse();
    let r_rev = apply_r_chain(&f, &reversed, &q);
    let order_dependence_l2 = r_omega.add_scaled(&r_rev, -1.0).l2_norm(q.n_gl + 4);

    let report = RegularizationReport {
        eps_schedule: stars.iter().map(|(v, _, e)| (*v, *e)).collect(),
        residual_l2,
        locality_excess,
        order_dependence_l2,
    };
    Ok(GlobalRegularization { r_omega, a_omega, report })
}

// ---------------------------------------------------------------------------
// bouquet stars
// ---------------------------------------------------------------------------

/// A 0- or 1-form on a 1-bouquet: m rays of length 1 from a common center,
/// each carrying a LineFunc in arc length s in [0, 1] (1-forms as
/// coefficients with respect to ds, oriented away from the center).
#[derive(Clone)]
pub struct BouquetForm {
    degree: usize,
    rays: Vec<LineFunc>,
}

impl BouquetForm {
    pub fn new(degree: usize, rays: Vec<LineFunc>) -> Result<Self> {
        if rays.is_empty() {
            return Err(DerhamError::InvalidBouquet("no rays".into()));
        }
        if degree > 1 {
            return Err(DerhamError::DegreeOutOfRange(format!(
                "degree {degree} form on a 1-bouquet"
            )));
        }
        Ok(BouquetForm { degree, rays })
    }

    pub fn zero(degree: usize, m: usize) -> Result<Self> {
        BouquetForm::new(degree, (0..m).map(|_| LineFunc::zero()).collect())
    }

    /// A single ball [-1, 1] presented as its two radial rays.
    pub fn from_ball(degree: usize, g: &LineFunc) -> Result<Self> {
        // positive ray: s -> g(s); negative ray: s -> g(-s), with the 1-form
        // coefficient negated by the orientation reversal
        let pos = g.precompose_affine(1.0, 0.0);
        let neg = g.precompose_affine(-1.0, 0.0);
        let neg = if degree == 1 { neg.scale(-1.0) } else { neg };
        BouquetForm::new(degree, vec![neg, pos])
    }

    pub fn rays(&self) -> usize {
        self.rays.len()
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn ray(&self, j: usize) -> &LineFunc {
        &self.rays[j]
    }

    pub fn is_numerically_zero(&self) -> bool {
        self.rays.iter().all(|f| {
            (0..=16).all(|i| f.eval(i as f64 / 16.0).abs() < 1e-12)
        })
    }
}

/// Extension of a bouquet form to the chart line of ray j: the positive axis
/// carries ray j, the negative axis the average of the remaining rays (an
/// even reflection when there are none), which restricts back to ray j as the
/// identity and commutes with d.
fn bouquet_extension(f: &BouquetForm, j: usize) -> LineFunc {
    let degree = f.degree;
    let m = f.rays.len();
    let others: Vec<LineFunc> = if m == 1 {
        vec![f.rays[0].clone()]
    } else {
        f.rays
            .iter()
            .enumerate()
            .filter(|(i, _)| *i != j)
            .map(|(_, g)| g.clone())
            .collect()
    };
    let mine = f.rays[j].clone();
    let mine2 = mine.clone();
    let others2 = others.clone();
    let lam = CHART_SCALE;
    let mut breaks = vec![0.0];
    for &b in mine.breaks() {
        breaks.push(lam * b);
    }
    for g in &others {
        for &b in g.breaks() {
            breaks.push(-lam * b);
        }
    }
    let sample = move |mine: &LineFunc,
                       others: &[LineFunc],
                       y: f64,
                       derivs: bool|
          -> f64 {
        let (s, ds_dy) = if y >= 0.0 {
            ((y / lam).clamp(0.0, 1.0), 1.0 / lam)
        } else {
            ((-y / lam).clamp(0.0, 1.0), -1.0 / lam)
        };
        let raw = |g: &LineFunc| if derivs { g.deriv(s) } else { g.eval(s) };
        let base = if y >= 0.0 {
            raw(mine)
        } else {
            others.iter().map(raw).sum::<f64>() / others.len() as f64
        };
        match (degree, derivs) {
            (0, false) => base,
            (0, true) => base * ds_dy,
            (1, false) => base * ds_dy,
            (1, true) => base * ds_dy * ds_dy,
            _ => unreachable!(),
        }
    };
    let sample2 = sample.clone();
    LineFunc::new(
        Arc::new(move |y| sample(&mine, &others, y, false)),
        Arc::new(move |y| sample2(&mine2, &others2, y, true)),
        breaks,
    )
}

/// Restrict a chart-line function back to ray j.
fn bouquet_restrict(
    original: &LineFunc,
    g: &LineFunc,
    out_degree: usize,
    same_degree: bool,
) -> LineFunc {
    let lam = CHART_SCALE;
    let old = original.clone();
    let old2 = old.clone();
    let gv = g.clone();
    let gd = g.clone();
    let mut breaks: Vec<f64> = old
        .breaks()
        .iter()
        .copied()
        .filter(|&s| lam * s >= 1.0)
        .collect();
    for &yb in g.breaks() {
        if (0.0..1.0).contains(&yb) {
            breaks.push(yb / lam);
        }
    }
    LineFunc::new(
        Arc::new(move |s| {
            let y = lam * s;
            if y >= 1.0 {
                return if same_degree { old.eval(s) } else { 0.0 };
            }
            if out_degree == 1 {
                gv.eval(y) * lam
            } else {
                gv.eval(y)
            }
        }),
        Arc::new(move |s| {
            let y = lam * s;
            if y >= 1.0 {
                return if same_degree { old2.deriv(s) } else { 0.0 };
            }
            if out_degree == 1 {
                gd.deriv(y) * lam * lam
            } else {
                gd.deriv(y) * lam
            }
        }),
        breaks,
    )
}

pub struct BouquetRegularization {
    pub r_omega: BouquetForm,
    pub a_omega: BouquetForm,
    /// Final eps after the support-containment halving.
    pub eps: f64,
    /// Sup of the per-ray homotopy residual over a sample grid.
    pub residual_sup: f64,
}

/// Theorem-9-style star regularization on a 1-bouquet: per ray, extend to the
/// chart line, apply the localized operators, and restrict back. Each ray
/// satisfies the homotopy identity R - id = dA + Ad up to quadrature.
pub fn bouquet_star_regularize(
    omega: &BouquetForm,
    eps: f64,
    quad_degree: usize,
) -> Result<BouquetRegularization> {
    if eps <= 0.0 || !eps.is_finite() {
        return Err(DerhamError::InvalidParameter(format!(
            "eps must be positive, got {eps}"
        )));
    }
    let mut e = eps;
    while e > EPS_MAX {
        e *= 0.5;
    }
    let q = QuadSetup::from_degree(quad_degree.max(8));

    let mut r_rays = Vec::new();
    let mut a_rays = Vec::new();
    for j in 0..omega.rays.len() {
        let ext = bouquet_extension(omega, j);
        let (rg, ag) = if omega.degree == 0 {
            (r0(&ext, e, q.n_gl), LineFunc::zero())
        } else {
            (r1(&ext, e, q.n_gl), a1(&ext, e, q.n_gl, q.n_t))
        };
        r_rays.push(bouquet_restrict(&omega.rays[j], &rg, omega.degree, true));
        a_rays.push(bouquet_restrict(
            &omega.rays[j],
            &ag,
            0,
            omega.degree == 0,
        ));
    }
    let r_omega = BouquetForm::new(omega.degree, r_rays)?;
    let a_omega = BouquetForm::new(omega.degree.saturating_sub(1).min(0), a_rays)?;

    // per-ray residual: for 1-forms R c - c - (A c)'; for 0-forms
    // R g - g - A(dg), where A(dg) needs its own pass over the extensions
    let mut residual_sup = 0.0f64;
    for j in 0..omega.rays.len() {
        let check = |s: f64| -> f64 {
            if omega.degree == 1 {
                r_omega.rays[j].eval(s)
                    - omega.rays[j].eval(s)
                    - a_omega.rays[j].deriv(s)
            } else {
                let ext = bouquet_extension(omega, j);
                let a_dg = a1(&ext.derivative(), e, q.n_gl, q.n_t);
                let y = CHART_SCALE * s;
                let a_val = if y < 1.0 { a_dg.eval(y) } else { 0.0 };
                r_omega.rays[j].eval(s) - omega.rays[j].eval(s) - a_val
            }
        };
        for i in 1..20 {
            let s = i as f64 / 20.0;
            // skip points too close to a breakpoint of the data
            let near_break = omega.rays[j]
                .breaks()
                .iter()
                .any(|b| (b - s).abs() < 1e-3)
                || s.abs() < 1e-3;
            if !near_break {
                residual_sup = residual_sup.max(check(s).abs());
            }
        }
    }

    Ok(BouquetRegularization {
        r_omega,
        a_omega,
        eps: e,
        residual_sup,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::complex::reference;
    use crate::forms::PolyForm;
    use crate::poly::{rat, rat_i, Poly};
    use crate::whitney::{whitney, Cochain};

    fn triangle_boundary() -> Arc<SimplicialComplex> {
        Arc::new(reference::circle())
    }

    fn poly_line(coeffs: &[f64]) -> LineFunc {
        let c1 = coeffs.to_vec();
        let c2 = coeffs.to_vec();
        LineFunc::new(
            Arc::new(move |s| c1.iter().rev().fold(0.0, |acc, c| acc * s + c)),
            Arc::new(move |s| {
                c2.iter()
                    .enumerate()
                    .skip(1)
                    .rev()
                    .fold(0.0, |acc, (i, c)| acc * s + i as f64 * c)
            }),
            Vec::new(),
        )
    }

    #[test]
    fn zero_form_regularizes_to_zero() {
        let k = triangle_boundary();
        let omega = PiecewiseForm::zero(k.clone(), 1);
        let out = global_regularize(&omega, 0.1, 12).unwrap();
        assert!(out.report.residual_l2 < 1e-12);
        for e in k.simplices(1) {
            for i in 0..=8 {
                let u = i as f64 / 8.0;
                assert!(out.r_omega.eval_on_edge(e, u).abs() < 1e-12);
                assert!(out.a_omega.eval_on_edge(e, u).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn eps_schedule_halves_until_containment() {
        let k = triangle_boundary();
        let omega = PiecewiseForm::zero(k, 0);
        let out = global_regularize(&omega, 0.5, 8).unwrap();
        for (_, e) in &out.report.eps_schedule {
            assert!(*e <= EPS_MAX);
            assert!((*e - 0.125).abs() < 1e-15, "0.5 halves twice to 0.125");
        }
    }

    #[test]
    fn whitney_edge_form_residual_small() {
        let k = triangle_boundary();
        let c = Cochain::indicator(k.clone(), &[0, 1]).unwrap();
        let omega = whitney(&c);
        let out = global_regularize(&omega, 0.15, 20).unwrap();
        assert!(
            out.report.residual_l2 <= 1e-4,
            "residual {}",
            out.report.residual_l2
        );
        let excess = out.report.locality_excess.unwrap();
        assert!(excess <= 1e-8, "locality excess {excess}");
    }

    #[test]
    fn smooth_zero_form_residual_small() {
        let k = triangle_boundary();
        let mut omega = PiecewiseForm::zero(k.clone(), 0);
        // continuous hat: vertex values 1, 0, 0 -> Whitney 0-cochain
        let c = Cochain::indicator(k.clone(), &[0]).unwrap();
        omega = omega.add(&whitney(&c));
        let out = global_regularize(&omega, 0.15, 20).unwrap();
        assert!(
            out.report.residual_l2 <= 1e-4,
            "residual {}",
            out.report.residual_l2
        );
    }

    #[test]
    fn d_commutes_with_global_r() {
        let k = triangle_boundary();
        let c = Cochain::indicator(k.clone(), &[1]).unwrap();
        let omega = whitney(&c);
        let d_omega = omega.exterior_d();
        let r_of_omega = global_regularize(&omega, 0.15, 16).unwrap().r_omega;
        let r_of_d = global_regularize(&d_omega, 0.15, 16).unwrap().r_omega;
        let diff = r_of_omega.d().unwrap().add_scaled(&r_of_d, -1.0);
        assert!(diff.l2_norm(16) < 1e-6, "dR - Rd = {}", diff.l2_norm(16));
    }

    #[test]
    fn closed_form_class_is_preserved() {
        // a closed 1-form (constant du on every edge, coherently oriented is
        // not needed for closedness in top degree): R Omega - Omega = d A Omega
        let k = triangle_boundary();
        let mut omega = PiecewiseForm::zero(k.clone(), 1);
        for e in k.simplices(1).to_vec() {
            omega
                .set_piece(&e, PolyForm::monomial_form(1, vec![0], Poly::constant(1, rat_i(1))))
                .unwrap();
        }
        let out = global_regularize(&omega, 0.1, 16).unwrap();
        assert!(out.report.residual_l2 < 1e-5);
    }

    #[test]
    fn missing_chart_and_bad_eps_are_rejected() {
        // a single edge has degree-1 vertices: no interval chart
        let k = Arc::new(SimplicialComplex::from_maximal(&[&[0, 1]]));
        let omega = PiecewiseForm::zero(k, 0);
        assert!(matches!(
            global_regularize(&omega, 0.1, 8),
            Err(DerhamError::MissingChart(_))
        ));

        let k = triangle_boundary();
        let omega = PiecewiseForm::zero(k, 0);
        assert!(matches!(
            global_regularize(&omega, -1.0, 8),
            Err(DerhamError::InvalidParameter(_))
        ));
    }

    #[test]
    fn bouquet_constant_zero_form() {
        // wedge of two segments, constant 0-form: R fixes it, residual tiny
        let omega = BouquetForm::new(0, vec![poly_line(&[1.0]), poly_line(&[1.0])]).unwrap();
        let out = bouquet_star_regularize(&omega, 0.15, 16).unwrap();
        assert!(out.residual_sup <= 1e-6, "residual {}", out.residual_sup);
        for j in 0..2 {
            for i in 0..=10 {
                let s = i as f64 / 10.0;
                assert!((out.r_omega.ray(j).eval(s) - 1.0).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn bouquet_zero_is_zero() {
        let omega = BouquetForm::zero(1, 3).unwrap();
        let out = bouquet_star_regularize(&omega, 0.1, 12).unwrap();
        assert!(out.r_omega.is_numerically_zero());
        assert!(out.a_omega.is_numerically_zero());
    }

    #[test]
    fn bouquet_of_one_ball_matches_local_operators() {
        // a single ball presented as two rays: the averaging extension is the
        // exact even/odd reflection, so the bouquet operator coincides with
        // the chart-conjugated local operator on the interval
        let g = poly_line(&[0.3, 1.0, -0.5, 0.25]);
        let omega = BouquetForm::from_ball(0, &g).unwrap();
        let out = bouquet_star_regularize(&omega, 0.12, 16).unwrap();

        // direct: conjugate g through y = lambda x on [-1, 1]
        let lam = CHART_SCALE;
        let chart_g = g.precompose_affine(1.0 / lam, 0.0);
        let direct = r0(&chart_g, out.eps, 12);
        for i in 0..=10 {
            let s = i as f64 / 10.0;
            let expected = direct.eval(lam * s);
            assert!(
                (out.r_omega.ray(1).eval(s) - expected).abs() < 1e-9,
                "s = {s}"
            );
        }
    }

    #[test]
    fn bouquet_one_form_residual() {
        // three rays carrying 1-forms with matching center values
        let omega = BouquetForm::new(
            1,
            vec![
                poly_line(&[1.0, 0.5]),
                poly_line(&[1.0, -0.3, 0.2]),
                poly_line(&[1.0, 0.0, 0.0, 0.4]),
            ],
        )
        .unwrap();
        let out = bouquet_star_regularize(&omega, 0.15, 18).unwrap();
        assert!(out.residual_sup <= 1e-6, "residual {}", out.residual_sup);
    }

    #[test]
    fn bouquet_rejects_empty() {
        assert!(matches!(
            BouquetForm::new(0, Vec::new()),
            Err(DerhamError::InvalidBouquet(_))
        ));
    }

    #[test]
    fn lp_norm_of_complex_func() {
        let k = triangle_boundary();
        let mut omega = PiecewiseForm::zero(k.clone(), 0);
        for e in k.simplices(1).to_vec() {
            omega
                .set_piece(&e, PolyForm::constant(1, rat(1, 1)))
                .unwrap();
        }
        let f = ComplexFunc::from_piecewise(&omega).unwrap();
        // constant 1 over three unit edges: L2 norm sqrt(3), sup norm 1
        assert!((f.l2_norm(8) - 3.0f64.sqrt()).abs() < 1e-12);
        assert!((f.lp_norm(Lp::Infinity, 8) - 1.0).abs() < 1e-12);
    }
}
