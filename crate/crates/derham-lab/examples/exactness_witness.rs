//! Solving d eta = Omega: for a closed piecewise form whose periods all
//! vanish, produce an explicit piecewise polynomial primitive with
//! face-compatible traces and report the certified residual.

use std::sync::Arc;

use derham_lab::cohomology::exactness_witness;
use derham_lab::complex::reference;
use derham_lab::forms::{PiecewiseForm, PolyForm};
use derham_lab::poly::{rat, rat_i, Poly};
use derham_lab::whitney::{derham_map_exact, whitney};

fn main() -> derham_lab::Result<()> {
    let circle = Arc::new(reference::circle());

    // a continuous 0-form theta on the circle: linear endpoint
    // interpolation plus a quadratic bump on each edge
    let mut theta = PiecewiseForm::zero(circle.clone(), 0);
    let vals = [1i64, -2, 3];
    for (edge, (a, b)) in [([0u32, 1], (0usize, 1usize)), ([0, 2], (0, 2)), ([1, 2], (1, 2))] {
        let u = Poly::var(1, 0);
        let bump = u.mul(&Poly::constant(1, rat_i(1)).sub(&u)).scale(&rat(7, 3));
        let p = Poly::constant(1, rat_i(vals[a]))
            .add(&u.scale(&rat_i(vals[b] - vals[a])))
            .add(&bump);
        theta.set_piece(&edge, PolyForm::from_poly(p))?;
    }

    // Omega = d(theta - W I theta) is exact with all periods zero
    let periods = derham_map_exact(&theta, 0)?;
    let omega = theta.sub(&whitney(&periods)).exterior_d();

    let witness = exactness_witness(&omega, None)?;
    println!("ansatz degree: {}", witness.ansatz_degree);
    println!("linear system rank: {}", witness.system_rank);
    println!("|d eta - Omega|_2 = {:.3e}", witness.residual_l2);
    println!("|eta|_2 = {:.6}, |Omega|_2 = {:.6}", witness.eta_norm_l2, witness.omega_norm_l2);
    for edge in circle.simplices(1) {
        if let Some(piece) = witness.eta.piece(edge) {
            println!("  eta on {edge:?}: {piece:?}");
        }
    }
    Ok(())
}
