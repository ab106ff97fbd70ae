//! Verifies the Cartan homotopy identity phi_v^* w - w = d Q w + Q d w
//! exactly, in rational arithmetic, for a batch of random polynomial forms
//! translated along constant vector fields, and prints one worked case.

use derham_lab::forms::PolyForm;
use derham_lab::homotopy::{
    cartan_residual, random_polyform, random_rational_vector, verify_cartan_identity,
};
use derham_lab::poly::{rat, Poly};
use rand::{Rng, SeedableRng};

fn main() -> derham_lab::Result<()> {
    // worked case: w = x0 x1 dx0 on R^2, v = (1/2, -1/3)
    let w = PolyForm::monomial_form(2, vec![0], Poly::monomial(2, vec![1, 1], rat(1, 1)));
    let v = vec![rat(1, 2), rat(-1, 3)];
    let residual = cartan_residual(&w, &v)?;
    println!("worked case  w = x0*x1 dx0, v = (1/2, -1/3)");
    println!(
        "  phi_v^* w - w - (d Q + Q d) w is zero: {}",
        residual.is_zero()
    );

    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0);
    let cases = 200;
    let mut failures = 0;
    for _ in 0..cases {
        let dim = rng.gen_range(1..=4usize);
        let degree = rng.gen_range(0..=dim.min(4));
        let w = random_polyform(&mut rng, dim, degree, 4);
        let v = random_rational_vector(&mut rng, dim);
        if !verify_cartan_identity(&w, &v)? {
            failures += 1;
        }
    }
    println!("random suite: {cases} cases (dim <= 4, degree <= 4), {failures} failures");
    Ok(())
}
