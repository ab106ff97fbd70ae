//! Whitney and de Rham maps: the Riemannian de Rham map splits the Whitney
//! map with the constant sqrt(k+1)/sqrt(2^k) per degree, the exact
//! (reference-coordinate) de Rham map splits it with constant 1, and the
//! chain-map identity d o W = W o delta holds exactly on cochain bases.

use std::sync::Arc;

use derham_lab::complex::reference;
use derham_lab::whitney::{derham_map, derham_map_exact, whitney, Cochain};

fn main() -> derham_lab::Result<()> {
    // split constants on the standard simplex of each degree
    for k in 0..=3usize {
        let verts: Vec<u32> = (0..=k as u32).collect();
        let complex = Arc::new(derham_lab::complex::SimplicialComplex::from_maximal(&[
            &verts,
        ]));
        let c = Cochain::indicator(complex, &verts)?;
        let w = whitney(&c);
        let exact_cochain = derham_map_exact(&w, k)?;
        let exact = exact_cochain.value(&verts)?;
        let riemannian = derham_map(&w, k)?.value(&verts)?;
        let predicted = ((k as f64 + 1.0).sqrt()) / 2f64.powi(k as i32).sqrt();
        println!(
            "k={k}: I_exact(W chi) = {exact}, I_riem(W chi) = {riemannian:.12} \
             (predicted {predicted:.12})"
        );
    }

    // chain map on every basis cochain of every reference complex
    for (name, complex) in [
        ("circle", Arc::new(reference::circle())),
        ("sphere2", Arc::new(reference::sphere2())),
        ("torus7", Arc::new(reference::torus7())),
    ] {
        let mut checked = 0;
        let mut ok = true;
        for k in 0..complex.dim() {
            for sigma in complex.simplices(k).to_vec() {
                let c = Cochain::indicator(complex.clone(), &sigma)?;
                let lhs = whitney(&c).exterior_d();
                let rhs = whitney(&c.coboundary());
                ok &= lhs.sub(&rhs).is_zero();
                checked += 1;
            }
        }
        println!("{name}: d(W chi) = W(delta chi) exactly on {checked} basis cochains: {ok}");
    }
    Ok(())
}
