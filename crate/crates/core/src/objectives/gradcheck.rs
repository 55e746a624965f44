use alloc::vec::Vec;

/// Outcome of a finite-difference gradient check.
#[derive(Debug, Clone, PartialEq)]
pub struct GradientCheck {
    /// Largest relative error over coordinates not flagged as kinks.
    pub max_rel_error: f64,
    /// Coordinate attaining `max_rel_error`.
    pub worst: Option<usize>,
    /// Coordinates whose one-sided slopes disagree, i.e. the function is not differentiable there.
    pub kinks: Vec<usize>,
}

/// One-sided slopes differing by more than this (relative), without shrinking with the step, mark a kink.
const KINK_TOL: f64 = 1e-3;

/// Compares `analytic` against central differences of `f` at `x`.
///
/// The step for coordinate `i` is `eps · max(1, |x_i|)`. Relative error is
/// `|fd - analytic| / max(|fd|, |analytic|, 1)`.
pub fn check_gradient<F: Fn(&[f64]) -> f64>(f: F, x: &[f64], analytic: &[f64], eps: f64) -> GradientCheck {
    assert!(eps > 0.0, "finite-difference step must be positive");
    assert_eq!(x.len(), analytic.len(), "gradient length mismatch");
    let f0 = f(x);
    let mut probe = x.to_vec();
    let mut slopes = |i: usize, h: f64| {
        probe[i] = x[i] + h;
        let fp = f(&probe);
        probe[i] = x[i] - h;
        let fm = f(&probe);
        probe[i] = x[i];
        (fp, fm, (fp - f0) / h, (f0 - fm) / h)
    };
    let mut out = GradientCheck { max_rel_error: 0.0, worst: None, kinks: Vec::new() };
    for i in 0..x.len() {
        let h = eps * x[i].abs().max(1.0);
        let (fp, fm, forward, backward) = slopes(i, h);
        // Curvature makes one-sided slopes differ in proportion to the step; a kink does not.
        let gap = (forward - backward).abs();
        if gap > KINK_TOL * forward.abs().max(backward.abs()).max(1.0) {
            let (_, _, f_near, b_near) = slopes(i, 0.1 * h);
            if (f_near - b_near).abs() > 0.5 * gap {
                out.kinks.push(i);
                continue;
            }
        }
        let fd = (fp - fm) / (2.0 * h);
        let err = (fd - analytic[i]).abs() / fd.abs().max(analytic[i].abs()).max(1.0);
        if out.worst.is_none() || err > out.max_rel_error {
            out.max_rel_error = err;
            out.worst = Some(i);
        }
    }
    out
}
