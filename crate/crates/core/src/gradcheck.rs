//! Central finite-difference gradient verification (64-bit).

use alloc::vec::Vec;

/// Perturbation used by the layer gradient suite.
pub const DEFAULT_STEP: f64 = 1e-5;

/// `|a - n| / max(|a|, |n|, 1e-12)`
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-12)
}

/// Maximum relative error between `analytic` and the central differences
/// `(f(x + eps e_i) - f(x - eps e_i)) / (2 eps)` of `loss` at `point`.
pub fn grad_check<L>(loss: L, point: &[f64], analytic: &[f64], eps: f64) -> f64
where
    L: FnMut(&[f64]) -> f64,
{
    let all: Vec<usize> = (0..point.len()).collect();
    grad_check_indices(loss, point, analytic, eps, &all)
}

/// As [`grad_check`], restricted to the components listed in `indices`.
pub fn grad_check_indices<L>(
    mut loss: L,
    point: &[f64],
    analytic: &[f64],
    eps: f64,
    indices: &[usize],
) -> f64
where
    L: FnMut(&[f64]) -> f64,
{
    assert_eq!(
        point.len(),
        analytic.len(),
        "gradient length must match the point"
    );
    let mut x = point.to_vec();
    let mut worst = 0.0f64;
    for &i in indices {
        let orig = x[i];
        x[i] = orig + eps;
        let up = loss(&x);
        x[i] = orig - eps;
        let down = loss(&x);
        x[i] = orig;
        worst = worst.max(relative_error(analytic[i], (up - down) / (2.0 * eps)));
    }
    worst
}
