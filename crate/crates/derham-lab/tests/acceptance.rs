//! End-to-end acceptance battery. Each numbered criterion runs
//! independently, prints a single PASS/FAIL line, and the test fails if
//! any criterion does (run with `-- --nocapture` to see the lines live).

use std::sync::Arc;
use std::time::Instant;

use derham_lab::cohomology::{
    betti_numbers, exactness_witness, whitney_subcomplex_cohomology,
};
use derham_lab::complex::{reference, SimplicialComplex};
use derham_lab::extension::{
    bouquet_star_complex, cylinder_lp_norm, extend_bouquet, extend_cylinder, extend_from_boundary,
    extend_from_skeleton, simplex_lp_norm,
};
use derham_lab::forms::{Lp, PiecewiseForm, PolyForm};
use derham_lab::homotopy::{random_polyform, random_rational_vector, verify_cartan_identity};
use derham_lab::mollify::global::global_regularize;
use derham_lab::mollify::{
    default_scan_samples, restriction_sup_bound, mollifier_residual, operator_norm_scan,
    regularize_flat, KernelSpec,
};
use derham_lab::poly::{rat, rat_i, Poly};
use derham_lab::whitney::{derham_map, derham_map_exact, whitney, Cochain};
use rand::{Rng, SeedableRng};

type Check = fn() -> Result<String, String>;

#[test]
fn acceptance() {
    let criteria: &[(&str, Check)] = &[
        ("01 cartan-identity-exact", c01_cartan),
        ("02 mollifier-homotopy-exact", c02_mollifier_homotopy),
        ("03 kernel-moment-regression", c03_kernel_moment),
        ("04 whitney-derham-split", c04_split_constants),
        ("05 chain-map-identity", c05_chain_map),
        ("06 betti-numbers-both-complexes", c06_betti),
        ("07 operator-norm-scan", c07_scan),
        ("08 sup-norm-bound", c08_sup_bound),
        ("09 extension-norm-inequalities", c09_extensions),
        ("10 global-regularization", c10_global_regularization),
        ("11 exactness-witness", c11_witness),
    ];
    let mut failures = Vec::new();
    for (name, check) in criteria {
        let outcome = std::panic::catch_unwind(check)
            .unwrap_or_else(|e| Err(format!("panic: {}", panic_text(&e))));
        match outcome {
            Ok(detail) => println!("PASS  {name}  {detail}"),
            Err(detail) => {
                println!("FAIL  {name}  {detail}");
                failures.push(*name);
            }
        }
    }
    assert!(failures.is_empty(), "failed criteria: {failures:?}");
}

fn panic_text(e: &Box<dyn std::any::Any + Send>) -> String {
    e.downcast_ref::<String>()
        .cloned()
        .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
        .unwrap_or_else(|| "opaque panic".into())
}

fn err<T: std::fmt::Display>(e: T) -> String {
    e.to_string()
}

// 1: translation Cartan homotopy identity, exact, 200 seeded forms,
// dimension <= 4, degree <= 4, under 10 seconds
fn c01_cartan() -> Result<String, String> {
    let start = Instant::now();
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
    for case in 0..200 {
        let dim = rng.gen_range(1..=4usize);
        let degree = rng.gen_range(0..=dim.min(4));
        let w = random_polyform(&mut rng, dim, degree, 4);
        let v = random_rational_vector(&mut rng, dim);
        if !verify_cartan_identity(&w, &v).map_err(err)? {
            return Err(format!("case {case}: nonzero residual (dim {dim}, degree {degree})"));
        }
    }
    let elapsed = start.elapsed();
    if elapsed.as_secs_f64() >= 10.0 {
        return Err(format!("too slow: {elapsed:?}"));
    }
    Ok(format!("200 cases, 0 failures, {elapsed:.2?}"))
}

// 2: flat mollifier chain homotopy R - id = dA + Ad, exact, 100 forms,
// dimension <= 3, under 60 seconds
fn c02_mollifier_homotopy() -> Result<String, String> {
    let start = Instant::now();
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(12);
    for case in 0..100 {
        let dim = rng.gen_range(1..=3usize);
        let degree = rng.gen_range(0..=dim);
        let w = random_polyform(&mut rng, dim, degree, 3);
        let kernel = KernelSpec::polynomial(dim, rat(1, rng.gen_range(4..=9)));
        if !mollifier_residual(&w, &kernel).map_err(err)?.is_zero() {
            return Err(format!("case {case}: nonzero residual (dim {dim}, degree {degree})"));
        }
    }
    let elapsed = start.elapsed();
    if elapsed.as_secs_f64() >= 60.0 {
        return Err(format!("too slow: {elapsed:?}"));
    }
    Ok(format!("100 cases, 0 failures, {elapsed:.2?}"))
}

// 3: R_eps(x^2 dx) - x^2 dx = (eps^2 / 7) dx as an exact rational identity
fn c03_kernel_moment() -> Result<String, String> {
    for (num, den) in [(1i64, 5i64), (1, 3), (3, 16)] {
        let eps = rat(num, den);
        let kernel = KernelSpec::polynomial(1, eps.clone());
        let w = PolyForm::monomial_form(1, vec![0], Poly::monomial(1, vec![2], rat_i(1)));
        let shift = regularize_flat(&w, &kernel).map_err(err)?.sub(&w);
        let expected = PolyForm::monomial_form(
            1,
            vec![0],
            Poly::constant(1, &(&eps * &eps) / &rat(7, 1)),
        );
        if shift != expected {
            return Err(format!("eps = {num}/{den}: shift is not eps^2/7 dx"));
        }
    }
    Ok("shift equals eps^2/7 dx exactly at three rational eps".into())
}

// 4: I(W chi_sigma) = sqrt(k+1)/sqrt(2^k) chi_sigma within 1e-12 for
// k = 0..3 under the Riemannian de Rham map, exactly 1 at k = 1
fn c04_split_constants() -> Result<String, String> {
    for k in 0..=3usize {
        let verts: Vec<u32> = (0..=k as u32).collect();
        let complex = Arc::new(SimplicialComplex::from_maximal(&[&verts]));
        let c = Cochain::indicator(complex, &verts).map_err(err)?;
        let w = whitney(&c);
        let riem = derham_map(&w, k).map_err(err)?.value(&verts).map_err(err)?;
        let predicted = ((k as f64 + 1.0).sqrt()) / 2f64.powi(k as i32).sqrt();
        if (riem - predicted).abs() > 1e-12 {
            return Err(format!("k = {k}: {riem} vs {predicted}"));
        }
        if k == 1 {
            let exact_cochain = derham_map_exact(&w, k).map_err(err)?;
            let exact = exact_cochain.value(&verts).map_err(err)?;
            if exact != &rat_i(1) || riem != 1.0 {
                return Err(format!("k = 1 split constant is not exactly 1: {exact}, {riem}"));
            }
        }
    }
    Ok("split constants match for k = 0..3, k = 1 exactly 1".into())
}

// 5: d(W chi) = W(delta chi) exactly on every basis cochain of the circle,
// the 2-sphere, and the 7-vertex torus
fn c05_chain_map() -> Result<String, String> {
    let mut checked = 0;
    for (name, complex) in [
        ("circle", Arc::new(reference::circle())),
        ("sphere2", Arc::new(reference::sphere2())),
        ("torus7", Arc::new(reference::torus7())),
    ] {
        for k in 0..complex.dim() {
            for sigma in complex.simplices(k).to_vec() {
                let c = Cochain::indicator(complex.clone(), &sigma).map_err(err)?;
                let lhs = whitney(&c).exterior_d();
                let rhs = whitney(&c.coboundary());
                if !lhs.sub(&rhs).is_zero() {
                    return Err(format!("{name}: mismatch on basis cochain {sigma:?}"));
                }
                checked += 1;
            }
        }
    }
    Ok(format!("exact on {checked} basis cochains"))
}

// 6: Betti numbers (1,1), (1,0,1), (1,2,1) from the cochain complex and
// from the Whitney subcomplex, under 30 seconds
fn c06_betti() -> Result<String, String> {
    let start = Instant::now();
    for (name, complex, want) in [
        ("circle", Arc::new(reference::circle()), vec![1usize, 1]),
        ("sphere2", Arc::new(reference::sphere2()), vec![1, 0, 1]),
        ("torus7", Arc::new(reference::torus7()), vec![1, 2, 1]),
    ] {
        let cochain = betti_numbers(&complex);
        if cochain != want {
            return Err(format!("{name}: cochain betti {cochain:?}, expected {want:?}"));
        }
        for (k, target) in want.iter().enumerate() {
            let w = whitney_subcomplex_cohomology(&complex, k).map_err(err)?;
            if w != *target {
                return Err(format!("{name}: Whitney betti_{k} = {w}, expected {target}"));
            }
        }
    }
    let elapsed = start.elapsed();
    if elapsed.as_secs_f64() >= 30.0 {
        return Err(format!("too slow: {elapsed:?}"));
    }
    Ok(format!("three complexes, both chain models, {elapsed:.2?}"))
}

// 7: operator norm scan over eps in {0.4, 0.2, 0.1, 0.05} on a 30-form
// sample at p = 2: C_hat non-increasing with C_hat(0.05) <= 1.1, M_hat
// non-increasing with M_hat(0.05) <= M_hat(0.4) / 2
fn c07_scan() -> Result<String, String> {
    let samples = default_scan_samples(0, 30);
    let eps = [rat(2, 5), rat(1, 5), rat(1, 10), rat(1, 20)];
    let rows = operator_norm_scan(&samples, &eps, 2.0).map_err(err)?;
    for pair in rows.windows(2) {
        if pair[1].c_hat > pair[0].c_hat {
            return Err(format!("C_hat increases: {} -> {}", pair[0].c_hat, pair[1].c_hat));
        }
        if pair[1].m_hat > pair[0].m_hat {
            return Err(format!("M_hat increases: {} -> {}", pair[0].m_hat, pair[1].m_hat));
        }
    }
    let last = rows.last().unwrap();
    if last.c_hat > 1.1 {
        return Err(format!("C_hat(0.05) = {} > 1.1", last.c_hat));
    }
    if last.m_hat > 0.5 * rows[0].m_hat {
        return Err(format!("M_hat(0.05) = {} > half of M_hat(0.4) = {}", last.m_hat, rows[0].m_hat));
    }
    Ok(format!(
        "C_hat: {:.4} -> {:.4}, M_hat: {:.4} -> {:.4}",
        rows[0].c_hat, last.c_hat, rows[0].m_hat, last.m_hat
    ))
}

// 8: sup-norm bound |res R_eps w|_inf <= mes(supp)^{(p-1)/p} sup(f) |w|_p
// on every sampled form
fn c08_sup_bound() -> Result<String, String> {
    let samples = default_scan_samples(0, 30);
    let kernel = KernelSpec::polynomial(1, rat(1, 10));
    let pairs = restriction_sup_bound(&samples, &kernel, 2.0).map_err(err)?;
    for (i, (lhs, rhs)) in pairs.iter().enumerate() {
        if lhs > rhs {
            return Err(format!("sample {i}: {lhs} > {rhs}"));
        }
    }
    let worst = pairs.iter().map(|(l, r)| l / r).fold(0.0, f64::max);
    Ok(format!("holds on all 30 samples, worst ratio {worst:.4}"))
}

/// 0-form profile vanishing at the endpoints whose derivative energy
/// dominates its value energy.
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

// 9: cylinder extension scales L_p energy by exactly 1/(p+1) for
// p in {1, 2, 4}; collar, skeleton, and bouquet extensions do not increase
// the Sobolev graph norm on the slope-dominated test instances
fn c09_extensions() -> Result<String, String> {
    let w = PolyForm::monomial_form(1, vec![0], Poly::monomial(1, vec![1], rat_i(1)));
    let tilde = extend_cylinder(&w);
    for p in [1.0, 2.0, 4.0] {
        let base = simplex_lp_norm(&w, Lp::Finite(p), 12).map_err(err)?.powf(p);
        let cyl = cylinder_lp_norm(&tilde, Lp::Finite(p), 12).map_err(err)?.powf(p);
        let dev = (cyl / base - 1.0 / (p + 1.0)).abs();
        if dev > 1e-10 {
            return Err(format!("cylinder p = {p}: ratio off by {dev:.3e}"));
        }
    }

    // collar from the boundary of the triangle
    let boundary = Arc::new(SimplicialComplex::from_maximal(&[&[0, 1], &[0, 2], &[1, 2]]));
    let mut omega = PiecewiseForm::zero(boundary, 0);
    for edge in [[0u32, 1], [0, 2], [1, 2]] {
        omega.set_piece(&edge, PolyForm::from_poly(wiggly())).map_err(err)?;
    }
    let collar = extend_from_boundary(&omega).map_err(err)?;
    for p in [1.0, 2.0, 4.0] {
        let e = collar.sobolev_norm(Lp::Finite(p), 20).map_err(err)?;
        let s = omega.sobolev_norm(Lp::Finite(p)).map_err(err)?;
        if e > s {
            return Err(format!("collar p = {p}: {e} > {s}"));
        }
    }

    // skeleton: 1-skeleton of the tetrahedron boundary into the 2-complex
    let sphere = Arc::new(SimplicialComplex::from_maximal(&[
        &[0, 1, 2],
        &[0, 1, 3],
        &[0, 2, 3],
        &[1, 2, 3],
    ]));
    let edges = Arc::new(sphere.skeleton(1).map_err(err)?);
    let mut edge_data = PiecewiseForm::zero(edges, 0);
    for e in sphere.simplices(1).to_vec() {
        edge_data.set_piece(&e, PolyForm::from_poly(wiggly())).map_err(err)?;
    }
    let skel = extend_from_skeleton(&edge_data, &sphere).map_err(err)?;
    for p in [1.0, 2.0] {
        let e = skel.graph_norm(p, 4, 8);
        let s = edge_data.sobolev_norm(Lp::Finite(p)).map_err(err)?;
        if e > s {
            return Err(format!("skeleton p = {p}: {e} > {s}"));
        }
    }

    // bouquet of three rays
    let star = Arc::new(bouquet_star_complex(3));
    let mut rays = PiecewiseForm::zero(star, 0);
    for i in 1..=3u32 {
        rays.set_piece(&[0, i], PolyForm::from_poly(wiggly())).map_err(err)?;
    }
    let disk = extend_bouquet(&rays).map_err(err)?;
    for p in [1.0, 2.0, 4.0] {
        let e = disk.sobolev_norm(Lp::Finite(p)).map_err(err)?;
        let s = rays.sobolev_norm(Lp::Finite(p)).map_err(err)?;
        if e > s {
            return Err(format!("bouquet p = {p}: {e} > {s}"));
        }
    }
    Ok("cylinder factor exact to 1e-10; collar, skeleton, bouquet contract".into())
}

// 10: global regularization of Whitney-span forms on the triangle-boundary
// circle at quadrature degree 20: homotopy residual L2 <= 1e-4 and the
// smoothed form stays supported where locality demands
fn c10_global_regularization() -> Result<String, String> {
    let circle = Arc::new(reference::circle());
    let mut worst = 0.0f64;
    for scale in [(1i64, 1i64), (-1, 2), (3, 4)] {
        let mut c = Cochain::indicator(circle.clone(), &[0, 1]).map_err(err)?;
        c = c.scale(&rat(scale.0, scale.1));
        c = c.add(&Cochain::indicator(circle.clone(), &[1, 2]).map_err(err)?);
        let reg = global_regularize(&whitney(&c), 0.1, 20).map_err(err)?;
        if let Some(excess) = reg.report.locality_excess {
            if excess > 1e-8 {
                return Err(format!("locality excess {excess:.3e}"));
            }
        }
        worst = worst.max(reg.report.residual_l2);
    }
    if worst > 1e-4 {
        return Err(format!("residual L2 {worst:.3e} > 1e-4"));
    }
    Ok(format!("worst homotopy residual L2 = {worst:.3e}, locality exact"))
}

// 11: for 20 seeded exact forms Omega = d theta with all periods zero,
// the witness solver returns eta with |d eta - Omega|_2 <= 1e-8
fn c11_witness() -> Result<String, String> {
    let circle = Arc::new(reference::circle());
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(21);
    let mut worst = 0.0f64;
    for case in 0..20 {
        let mut theta = PiecewiseForm::zero(circle.clone(), 0);
        let vals: Vec<i64> = (0..3).map(|_| rng.gen_range(-4..=4)).collect();
        for (edge, (a, b)) in [([0u32, 1], (0usize, 1usize)), ([0, 2], (0, 2)), ([1, 2], (1, 2))] {
            let u = Poly::var(1, 0);
            let bump = u
                .mul(&Poly::constant(1, rat_i(1)).sub(&u))
                .scale(&rat(rng.gen_range(-6..=6), 2));
            let p = Poly::constant(1, rat_i(vals[a]))
                .add(&u.scale(&rat_i(vals[b] - vals[a])))
                .add(&bump);
            theta.set_piece(&edge, PolyForm::from_poly(p)).map_err(err)?;
        }
        // subtract the Whitney interpolant of the periods so every period
        // of Omega vanishes
        let periods = derham_map_exact(&theta, 0).map_err(err)?;
        let omega = theta.sub(&whitney(&periods)).exterior_d();
        let witness = exactness_witness(&omega, None).map_err(err)?;
        if witness.residual_l2 > 1e-8 {
            return Err(format!("case {case}: residual {:.3e}", witness.residual_l2));
        }
        worst = worst.max(witness.residual_l2);
    }
    Ok(format!("20 witnesses, worst residual {worst:.3e}"))
}
