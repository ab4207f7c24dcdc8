//! Reference machinery for checking the trainers: exact coordinate
//! minimizers, an alternating-minimization optimizer, central finite
//! differences and a synthetic corpus generator with planted structure.
//!
//! Everything here works on whole matrices in float64 and favours
//! directness over speed.

mod synth;

use nalgebra::{DMatrix, DVector};

use crate::corpus::Corpus;
use crate::embedding::{svd_init, Hyperparams};
use crate::error::{shape, Error, Result};
use crate::fusion::{check_gammas, fused_objective};
use crate::linalg::{add_diagonal, spd_solve};

pub use synth::{synth_corpus, write_manifest, SynthCorpus, SynthSpec};

/// Ridge minimizer of the predictability loss for fixed `S`:
/// `W = (X^T X + lambda_w I)^-1 X^T S^T` with `X` stored N x D.
///
/// When `D > N` and `lambda_w > 0` the equivalent dual form
/// `X^T (X X^T + lambda_w I)^-1 S^T` is solved instead.
pub fn closed_form_w(x: &DMatrix<f64>, s: &DMatrix<f64>, lambda_w: f64) -> Result<DMatrix<f64>> {
    let (n, d) = x.shape();
    if s.ncols() != n {
        return Err(shape(format!("S has {} columns, X has {n} rows", s.ncols())));
    }
    if d > n && lambda_w > 0.0 {
        let mut gram = x * x.transpose();
        add_diagonal(&mut gram, lambda_w);
        let c = spd_solve(gram, &s.transpose(), "closed-form W (dual)")?;
        return Ok(x.transpose() * c);
    }
    let mut gram = x.transpose() * x;
    add_diagonal(&mut gram, lambda_w);
    spd_solve(gram, &(x.transpose() * s.transpose()), "closed-form W")
}

/// `A = Y S^T (S S^T + lambda_a I)^-1`.
pub fn closed_form_a(y: &DMatrix<f64>, s: &DMatrix<f64>, lambda_a: f64) -> Result<DMatrix<f64>> {
    if y.ncols() != s.ncols() {
        return Err(shape(format!("Y has {} columns, S has {}", y.ncols(), s.ncols())));
    }
    let mut gram = s * s.transpose();
    add_diagonal(&mut gram, lambda_a);
    let at = spd_solve(gram, &(s * y.transpose()), "closed-form A")?;
    Ok(at.transpose())
}

/// Importance-weighted `A` for a diagonal `H`: row `r` of `A` solves
/// `(S S^T + lambda_a / h_r I) a_r = S y_r` when `h_r > 0`; a zero-weight row
/// is pulled to zero by the regularizer alone.
pub fn closed_form_a_weighted(
    y: &DMatrix<f64>,
    s: &DMatrix<f64>,
    h: &DVector<f64>,
    lambda_a: f64,
) -> Result<DMatrix<f64>> {
    if y.ncols() != s.ncols() || h.len() != y.nrows() {
        return Err(shape("weighted closed-form A: Y, S and h disagree"));
    }
    let k = s.nrows();
    let sst = s * s.transpose();
    let mut a = DMatrix::zeros(y.nrows(), k);
    for r in 0..y.nrows() {
        if h[r] == 0.0 {
            if lambda_a <= 0.0 {
                return Err(Error::Singular(format!("row {r} has zero weight and no regularizer")));
            }
            continue;
        }
        let mut lhs = &sst * h[r];
        add_diagonal(&mut lhs, lambda_a);
        let rhs = (s * y.row(r).transpose()) * h[r];
        let row = spd_solve(lhs, &DMatrix::from_column_slice(k, 1, rhs.as_slice()), "weighted A")?;
        a.row_mut(r).copy_from(&row.transpose());
    }
    Ok(a)
}

/// Column-wise minimizer of descriptiveness plus multimodal predictability
/// for fixed `A` and `W^j`:
/// `s_i = (A^T A + (sum_j gamma_j + lambda_s) I)^-1 (A^T y_i + sum_j gamma_j W^jT x_i^j)`.
pub fn closed_form_s(
    a: &DMatrix<f64>,
    projections: &[DMatrix<f64>],
    y: &DMatrix<f64>,
    features: &[&DMatrix<f64>],
    gammas: &[f64],
    lambda_s: f64,
) -> Result<DMatrix<f64>> {
    let h = DVector::from_element(a.nrows(), 1.0);
    closed_form_s_weighted(a, projections, y, features, &h, gammas, lambda_s)
}

/// As [`closed_form_s`] with the term-sensitive reconstruction weights `h`.
pub fn closed_form_s_weighted(
    a: &DMatrix<f64>,
    projections: &[DMatrix<f64>],
    y: &DMatrix<f64>,
    features: &[&DMatrix<f64>],
    h: &DVector<f64>,
    gammas: &[f64],
    lambda_s: f64,
) -> Result<DMatrix<f64>> {
    check_gammas(gammas, projections.len())?;
    if projections.len() != features.len() {
        return Err(shape("one feature matrix per projection required"));
    }
    let (m, k) = a.shape();
    let n = y.ncols();
    if y.nrows() != m || h.len() != m {
        return Err(shape("closed-form S: A, Y and h disagree"));
    }
    let mut rhs = a.transpose() * DMatrix::from_diagonal(h) * y;
    for ((w, x), &g) in projections.iter().zip(features).zip(gammas) {
        if x.nrows() != n || w.shape() != (x.ncols(), k) {
            return Err(shape("closed-form S: projection and features disagree"));
        }
        rhs += (w.transpose() * x.transpose()) * g;
    }
    let mut lhs = a.transpose() * DMatrix::from_diagonal(h) * a;
    add_diagonal(&mut lhs, gammas.iter().sum::<f64>() + lambda_s);
    spd_solve(lhs, &rhs, "closed-form S")
}

/// `S` minimizing the descriptiveness loss alone: `(A^T A + lambda_s I)^-1 A^T Y`.
pub fn closed_form_s_descriptive(a: &DMatrix<f64>, y: &DMatrix<f64>, lambda_s: f64) -> Result<DMatrix<f64>> {
    if a.nrows() != y.nrows() {
        return Err(shape("A and Y row counts differ"));
    }
    let mut lhs = a.transpose() * a;
    add_diagonal(&mut lhs, lambda_s);
    spd_solve(lhs, &(a.transpose() * y), "descriptive S")
}

/// Gradient of the whole-dataset objective
/// `L_d(A, S) + sum_j gamma_j L_p(S, W^j)`, each regularizer counted once.
pub fn full_gradients(
    a: &DMatrix<f64>,
    projections: &[DMatrix<f64>],
    s: &DMatrix<f64>,
    y: &DMatrix<f64>,
    features: &[&DMatrix<f64>],
    gammas: &[f64],
    hp: &Hyperparams,
) -> Result<FullGradients> {
    let h = DVector::from_element(a.nrows(), 1.0);
    full_gradients_weighted(a, projections, s, y, features, &h, gammas, hp)
}

/// [`full_gradients`] with the term-sensitive reconstruction weights `h`.
#[allow(clippy::too_many_arguments)]
pub fn full_gradients_weighted(
    a: &DMatrix<f64>,
    projections: &[DMatrix<f64>],
    s: &DMatrix<f64>,
    y: &DMatrix<f64>,
    features: &[&DMatrix<f64>],
    h: &DVector<f64>,
    gammas: &[f64],
    hp: &Hyperparams,
) -> Result<FullGradients> {
    check_gammas(gammas, projections.len())?;
    if projections.len() != features.len() || y.shape() != (a.nrows(), s.ncols()) || h.len() != a.nrows() {
        return Err(shape("full gradients: inconsistent shapes"));
    }
    let hr = DMatrix::from_diagonal(h) * (y - a * s);
    let grad_a = -(&hr * s.transpose()) + a * hp.lambda_a;
    let mut grad_s = -(a.transpose() * &hr) + s * hp.lambda_s;
    let mut grad_w = Vec::with_capacity(projections.len());
    for ((w, x), &g) in projections.iter().zip(features).zip(gammas) {
        let e = s - w.transpose() * x.transpose();
        grad_w.push((-(x.transpose() * e.transpose()) + w * hp.lambda_w) * g);
        grad_s += e * g;
    }
    Ok(FullGradients {
        a: grad_a,
        w: grad_w,
        s: grad_s,
    })
}

/// Whole-dataset gradients; `s` is k x N like `S`.
#[derive(Debug, Clone, PartialEq)]
pub struct FullGradients {
    pub a: DMatrix<f64>,
    pub w: Vec<DMatrix<f64>>,
    pub s: DMatrix<f64>,
}

/// Result of [`alternating_minimize`].
#[derive(Debug, Clone)]
pub struct Alternating {
    pub a: DMatrix<f64>,
    pub w: Vec<DMatrix<f64>>,
    pub s: DMatrix<f64>,
    /// Objective before the first sweep, then after every sweep.
    pub trace: Vec<f64>,
    pub iterations: usize,
}

impl Alternating {
    pub fn objective(&self) -> f64 {
        *self.trace.last().expect("trace starts with the initial objective")
    }
}

fn check_regularizers(hp: &Hyperparams) -> Result<()> {
    for (name, v) in [("lambda_a", hp.lambda_a), ("lambda_s", hp.lambda_s), ("lambda_w", hp.lambda_w)] {
        if !(v > 0.0 && v.is_finite()) {
            return Err(Error::BadParam(format!("{name} must be > 0 for alternating minimization, got {v}")));
        }
    }
    if hp.k == 0 {
        return Err(Error::BadParam("k must be at least 1".into()));
    }
    Ok(())
}

fn relative_decrease(prev: f64, cur: f64) -> f64 {
    (prev - cur) / prev.abs().max(f64::MIN_POSITIVE)
}

/// Cycles exact minimization over `S`, `A` and every `W^j` from the SVD
/// initialisation (with `W^j` set by ridge regression on the initial `S`)
/// until the relative objective decrease of a sweep drops below `tol`.
pub fn alternating_minimize(
    corpus: &Corpus,
    hp: &Hyperparams,
    gammas: &[f64],
    max_iters: usize,
    tol: f64,
) -> Result<Alternating> {
    check_regularizers(hp)?;
    check_gammas(gammas, corpus.n_modalities())?;
    let (a, s) = svd_init(corpus.term_matrix(), hp.k)?;
    let w = corpus
        .features()
        .iter()
        .map(|f| closed_form_w(f.values(), &s, hp.lambda_w))
        .collect::<Result<Vec<_>>>()?;
    alternating_minimize_from(corpus, hp, gammas, a, w, s, max_iters, tol)
}

/// [`alternating_minimize`] from a given starting point.
#[allow(clippy::too_many_arguments)]
pub fn alternating_minimize_from(
    corpus: &Corpus,
    hp: &Hyperparams,
    gammas: &[f64],
    mut a: DMatrix<f64>,
    mut w: Vec<DMatrix<f64>>,
    mut s: DMatrix<f64>,
    max_iters: usize,
    tol: f64,
) -> Result<Alternating> {
    check_regularizers(hp)?;
    check_gammas(gammas, corpus.n_modalities())?;
    if max_iters == 0 {
        return Err(Error::BadParam("max_iters must be at least 1".into()));
    }
    let y = corpus.term_matrix().to_dense();
    let xs: Vec<&DMatrix<f64>> = corpus.features().iter().map(|f| f.values()).collect();
    let mut trace = vec![fused_objective(&a, &w, &s, &y, &xs, gammas, hp)?];
    let mut iterations = 0;
    while iterations < max_iters {
        s = closed_form_s(&a, &w, &y, &xs, gammas, hp.lambda_s)?;
        a = closed_form_a(&y, &s, hp.lambda_a)?;
        w = xs
            .iter()
            .map(|x| closed_form_w(x, &s, hp.lambda_w))
            .collect::<Result<Vec<_>>>()?;
        iterations += 1;
        let obj = fused_objective(&a, &w, &s, &y, &xs, gammas, hp)?;
        let prev = *trace.last().expect("non-empty");
        trace.push(obj);
        if !obj.is_finite() {
            return Err(Error::NonFinite("alternating minimization objective".into()));
        }
        if relative_decrease(prev, obj) < tol {
            break;
        }
    }
    Ok(Alternating {
        a,
        w,
        s,
        trace,
        iterations,
    })
}

/// Minimizes the descriptiveness loss alone by alternating exact `S` and `A`
/// updates from the SVD initialisation. Returns `(A, S, trace)`.
pub fn alternating_descriptive(
    y: &crate::corpus::TermMatrix,
    hp: &Hyperparams,
    max_iters: usize,
    tol: f64,
) -> Result<(DMatrix<f64>, DMatrix<f64>, Vec<f64>)> {
    let (mut a, mut s) = svd_init(y, hp.k)?;
    let yd = y.to_dense();
    let loss = |a: &DMatrix<f64>, s: &DMatrix<f64>| {
        crate::embedding::descriptiveness_loss(a, s, &yd, hp.lambda_a, hp.lambda_s)
    };
    let mut trace = vec![loss(&a, &s)?];
    for _ in 0..max_iters {
        s = closed_form_s_descriptive(&a, &yd, hp.lambda_s)?;
        a = closed_form_a(&yd, &s, hp.lambda_a)?;
        let obj = loss(&a, &s)?;
        let prev = *trace.last().expect("non-empty");
        trace.push(obj);
        if relative_decrease(prev, obj).abs() < tol || obj == 0.0 {
            break;
        }
    }
    Ok((a, s, trace))
}

/// Central differences `(f(x + h e_i) - f(x - h e_i)) / 2h` per coordinate.
pub fn finite_difference_grad<F>(f: F, point: &[f64], h: f64) -> Result<Vec<f64>>
where
    F: Fn(&[f64]) -> f64,
{
    if !(h > 0.0 && h.is_finite()) {
        return Err(Error::BadParam(format!("step h must be > 0, got {h}")));
    }
    let mut x = point.to_vec();
    let mut grad = Vec::with_capacity(x.len());
    for i in 0..x.len() {
        let orig = x[i];
        x[i] = orig + h;
        let up = f(&x);
        x[i] = orig - h;
        let down = f(&x);
        x[i] = orig;
        if !(up.is_finite() && down.is_finite()) {
            return Err(Error::NonFinite(format!("objective at coordinate {i}")));
        }
        grad.push((up - down) / (2.0 * h));
    }
    Ok(grad)
}
