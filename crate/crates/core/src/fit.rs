//! Ordinary least-squares slope estimation in log-log coordinates.
//!
//! Every scaling-exponent readout in the crate (volume growth, return
//! probability decay, weighted ball counts) funnels through `loglog_fit`.

use crate::scalar::Scalar;

/// OLS fit of y = a + b x. Returns (slope, intercept, slope standard error).
pub fn linear_fit<F: Scalar>(xs: &[F], ys: &[F]) -> (F, F, F) {
    assert_eq!(xs.len(), ys.len());
    let n = F::of_usize(xs.len());
    let mean_x = xs.iter().copied().sum::<F>() / n;
    let mean_y = ys.iter().copied().sum::<F>() / n;
    let mut sxx = F::zero();
    let mut sxy = F::zero();
    for (&x, &y) in xs.iter().zip(ys) {
        let dx = x - mean_x;
        sxx += dx * dx;
        sxy += dx * (y - mean_y);
    }
    let slope = sxy / sxx;
    let intercept = mean_y - slope * mean_x;
    // residual variance with n-2 degrees of freedom
    let mut ss_res = F::zero();
    for (&x, &y) in xs.iter().zip(ys) {
        let r = y - (intercept + slope * x);
        ss_res += r * r;
    }
    let dof = xs.len().saturating_sub(2);
    let stderr = if dof == 0 {
        F::zero()
    } else {
        (ss_res / (F::of_usize(dof) * sxx)).sqrt()
    };
    (slope, intercept, stderr)
}

/// OLS slope of log(y) against log(x). Pairs with non-positive entries are
/// rejected by the caller; this asserts in debug.
pub fn loglog_fit<F: Scalar>(xs: &[F], ys: &[F]) -> (F, F) {
    debug_assert!(xs.iter().all(|v| *v > F::zero()));
    debug_assert!(ys.iter().all(|v| *v > F::zero()));
    let lx: Vec<F> = xs.iter().map(|v| v.ln()).collect();
    let ly: Vec<F> = ys.iter().map(|v| v.ln()).collect();
    let (slope, _, stderr) = linear_fit(&lx, &ly);
    (slope, stderr)
}
