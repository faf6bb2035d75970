//! Shared test support: independent f64 oracles and finite-difference
//! helpers. Everything here is deliberately naive -- straight loops, no
//! shortcuts -- so it can serve as a reference the fast path is checked
//! against.
#![allow(dead_code)]

pub mod oracle;
pub mod refmodel;

/// Central finite difference of `f` at `x`, one coordinate at a time.
pub fn fd_grad(f: &dyn Fn(&[f64]) -> f64, x: &[f64], eps: f64) -> Vec<f64> {
    let mut g = vec![0.0; x.len()];
    let mut xp = x.to_vec();
    for i in 0..x.len() {
        let orig = xp[i];
        xp[i] = orig + eps;
        let fp = f(&xp);
        xp[i] = orig - eps;
        let fm = f(&xp);
        xp[i] = orig;
        g[i] = (fp - fm) / (2.0 * eps);
    }
    g
}

/// Central finite difference on a sampled subset of coordinates.
pub fn fd_grad_at(f: &dyn Fn(&[f64]) -> f64, x: &[f64], eps: f64, coords: &[usize]) -> Vec<f64> {
    let mut g = vec![0.0; coords.len()];
    let mut xp = x.to_vec();
    for (slot, &i) in coords.iter().enumerate() {
        let orig = xp[i];
        xp[i] = orig + eps;
        let fp = f(&xp);
        xp[i] = orig - eps;
        let fm = f(&xp);
        xp[i] = orig;
        g[slot] = (fp - fm) / (2.0 * eps);
    }
    g
}

pub fn widen(x: &[f32]) -> Vec<f64> {
    x.iter().map(|&v| v as f64).collect()
}

/// Assert `|a - e| <= rel*|e| + abs` elementwise.
pub fn assert_grads_close(analytic: &[f32], expected: &[f64], rel: f64, abs: f64, what: &str) {
    assert_eq!(analytic.len(), expected.len(), "{what}: length mismatch");
    for (i, (&a, &e)) in analytic.iter().zip(expected).enumerate() {
        let diff = (a as f64 - e).abs();
        let tol = rel * e.abs() + abs;
        assert!(
            diff <= tol,
            "{what}[{i}]: analytic {a} vs fd {e} (diff {diff:.3e} > tol {tol:.3e})"
        );
    }
}

pub fn max_rel_err(analytic: &[f32], expected: &[f64], abs_floor: f64) -> f64 {
    analytic
        .iter()
        .zip(expected)
        .map(|(&a, &e)| (a as f64 - e).abs() / (e.abs() + abs_floor))
        .fold(0.0, f64::max)
}
