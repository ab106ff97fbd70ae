//! Empirical operator norms of the flat mollifier pair on a seeded sample
//! of forms: C_hat(eps) = max |R_eps w|_p / |w|_p should decrease to 1 and
//! M_hat(eps) = max |R_eps w - w|_p / |w|_p should decrease to 0 as
//! eps -> 0, and every sample obeys the sup-norm bound
//! |R_eps w|_inf <= kernel mass ratio * |w|_inf.

use derham_lab::mollify::{
    default_scan_samples, restriction_sup_bound, operator_norm_scan, scan_limit_row, KernelSpec,
};
use derham_lab::poly::rat;

fn main() -> derham_lab::Result<()> {
    let samples = default_scan_samples(0, 30);
    let eps_list = [rat(2, 5), rat(1, 5), rat(1, 10), rat(1, 20)];
    let rows = operator_norm_scan(&samples, &eps_list, 2.0)?;
    println!("eps      C_hat        M_hat");
    for row in &rows {
        println!("{:<8} {:<12.8} {:<12.8}", row.eps, row.c_hat, row.m_hat);
    }
    let limit = scan_limit_row();
    println!("limit    {:<12.8} {:<12.8}", limit.c_hat, limit.m_hat);

    let kernel = KernelSpec::polynomial(1, rat(1, 10));
    let pairs = restriction_sup_bound(&samples, &kernel, 2.0)?;
    let all_hold = pairs.iter().all(|(lhs, rhs)| lhs <= rhs);
    let worst = pairs.iter().map(|(l, r)| l / r).fold(0.0, f64::max);
    println!(
        "sup-norm bound holds on all {} samples: {all_hold} (worst lhs/rhs ratio {worst:.4})",
        samples.len()
    );
    Ok(())
}
