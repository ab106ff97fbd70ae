//! Extension operators with norm control: the cylinder extension scales
//! L_p energy by exactly 1/(p+1), the collar extension from a triangle
//! boundary and the skeleton extension from the vertices contract the
//! graph norm on slope-dominated data, and the bouquet extension pushes
//! edge data onto a disk neighborhood of the wedge point.

use std::sync::Arc;

use derham_lab::extension::{
    bouquet_star_complex, cylinder_lp_norm, extend_bouquet, extend_cylinder, extend_from_boundary,
    extend_from_skeleton, simplex_lp_norm,
};
use derham_lab::forms::{Lp, PiecewiseForm, PolyForm};
use derham_lab::poly::{rat, rat_i, Poly};

/// 0-form profile on an edge that vanishes at both endpoints and
/// oscillates in between, so derivative energy dominates value energy.
fn wiggly() -> Poly {
    let u = Poly::var(1, 0);
    let one = Poly::constant(1, rat_i(1));
    u.mul(&one.sub(&u))
        .mul(&u.scale(&rat_i(2)).sub(&one))
        .mul(
            &u.mul(&u)
                .scale(&rat_i(5))
                .sub(&u.scale(&rat_i(5)))
                .add(&Poly::constant(1, rat_i(1))),
        )
}

fn main() -> derham_lab::Result<()> {
    // cylinder: |omega~|_p^p = |omega|_p^p / (p + 1), exactly
    let w = PolyForm::monomial_form(1, vec![0], Poly::monomial(1, vec![1], rat_i(1)));
    let tilde = extend_cylinder(&w);
    for p in [1.0, 2.0, 4.0] {
        let base = simplex_lp_norm(&w, Lp::Finite(p), 12)?.powf(p);
        let cyl = cylinder_lp_norm(&tilde, Lp::Finite(p), 12)?.powf(p);
        println!(
            "cylinder p={p}: energy ratio = {:.12} (expected {:.12})",
            cyl / base,
            1.0 / (p + 1.0)
        );
    }

    // collar extension from the boundary of the triangle
    let triangle = Arc::new(derham_lab::complex::SimplicialComplex::from_maximal(&[
        &[0, 1],
        &[0, 2],
        &[1, 2],
    ]));
    let mut omega = PiecewiseForm::zero(triangle.clone(), 0);
    for (i, edge) in [[0u32, 1], [0, 2], [1, 2]].iter().enumerate() {
        omega.set_piece(edge, PolyForm::from_poly(wiggly().scale(&rat(i as i64 + 1, 2))))?;
    }
    let ext = extend_from_boundary(&omega)?;
    for p in [1.0, 2.0] {
        let source = omega.sobolev_norm(Lp::Finite(p))?;
        let extended = ext.sobolev_norm(Lp::Finite(p), 12)?;
        println!(
            "collar p={p}: graph norm {:.6} -> {:.6} (contracts: {})",
            source,
            extended,
            extended <= source
        );
    }

    // skeleton extension: vertex data -> full 2-simplex, two collar stages
    let solid = Arc::new(derham_lab::complex::SimplicialComplex::from_maximal(&[&[
        0, 1, 2,
    ]]));
    let mut vertex_data = PiecewiseForm::zero(Arc::new(solid.skeleton(0)?), 0);
    for (v, val) in [(0u32, 3i64), (1, -1), (2, 2)] {
        vertex_data.set_piece(&[v], PolyForm::constant(0, rat_i(val)))?;
    }
    let skel = extend_from_skeleton(&vertex_data, &solid)?;
    println!(
        "skeleton 0 -> 2: L2 norm of extension = {:.6}",
        skel.lp_norm(2.0, 4, 8)
    );

    // bouquet of three rays glued at the wedge point
    let star = Arc::new(bouquet_star_complex(3));
    let mut rays = PiecewiseForm::zero(star, 1);
    for i in 1..=3u32 {
        rays.set_piece(
            &[0, i],
            PolyForm::monomial_form(1, vec![0], Poly::monomial(1, vec![1], rat(i as i64, 3))),
        )?;
    }
    let disk = extend_bouquet(&rays)?;
    println!(
        "bouquet: extended 1-form lives on {} triangles, L2 norm {:.6} (rays {:.6})",
        disk.complex().simplices(2).len(),
        disk.lp_norm(Lp::Finite(2.0))?,
        rays.lp_norm(Lp::Finite(2.0))?
    );
    Ok(())
}
