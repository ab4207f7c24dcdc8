//! Compare the analytic per-sample gradients with central differences.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use videostory::embedding::{sample_gradients, sample_objective, Hyperparams};
use videostory::oracle::finite_difference_grad;

fn main() -> videostory::Result<()> {
    let (m, d, k) = (8, 5, 3);
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let mut uniform = |r, c| DMatrix::from_fn(r, c, |_, _| rng.random_range(-1.0..1.0));
    let a = uniform(m, k);
    let w = uniform(d, k);
    let s: DVector<f64> = uniform(k, 1).column(0).into();
    let x: DVector<f64> = uniform(d, 1).column(0).into();
    let y = DVector::from_fn(m, |i, _| (i % 3 == 0) as u8 as f64);
    let hp = Hyperparams { k, lambda_a: 0.1, lambda_s: 0.1, lambda_w: 0.1, ..Hyperparams::default() };

    let analytic = sample_gradients(&a, &w, &s, &x, &y, &hp)?;
    for h in [1e-3, 1e-5, 1e-7] {
        let numeric = finite_difference_grad(|v| sample_objective(&a, &w, &DVector::from_column_slice(v), &x, &y, &hp), s.as_slice(), h)?;
        let err = (DVector::from_vec(numeric) - &analytic.s).norm() / analytic.s.norm();
        println!("h = {h:e}: relative error of ds {err:.2e}");
    }
    let numeric = finite_difference_grad(|v| sample_objective(&DMatrix::from_column_slice(m, k, v), &w, &s, &x, &y, &hp), a.as_slice(), 1e-6)?;
    let err = (DMatrix::from_column_slice(m, k, &numeric) - &analytic.a).norm() / analytic.a.norm();
    println!("relative error of dA {err:.2e}");
    Ok(())
}
