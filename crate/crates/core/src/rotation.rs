//! Axis-angle to rotation matrix conversion and its derivative.

use crate::math::{self, Mat3, Vec3, IDENTITY};

/// Below this angle the rotation is evaluated with the first-order series `I + [ω]×`.
pub const SMALL_ANGLE: f64 = 1e-8;

/// Below this angle the derivative coefficients are evaluated by Taylor series.
const SERIES_ANGLE: f64 = 1e-2;

/// Converts an axis-angle vector into a rotation matrix with the Rodrigues formula.
///
/// The rotation angle is `‖ω‖` about the axis `ω / ‖ω‖`.
pub fn rodrigues(omega: Vec3) -> Mat3 {
    let theta = math::norm(omega);
    let k = math::skew(omega);
    if theta < SMALL_ANGLE {
        let mut r = IDENTITY;
        math::mat_add_assign(&mut r, &k);
        return r;
    }
    let (a, b) = coefficients(theta);
    let k2 = math::mat_mul(&k, &k);
    let mut r = IDENTITY;
    for i in 0..3 {
        for j in 0..3 {
            r[i][j] += a * k[i][j] + b * k2[i][j];
        }
    }
    r
}

/// `sin θ / θ` and `(1 - cos θ) / θ²`.
fn coefficients(theta: f64) -> (f64, f64) {
    if theta < SERIES_ANGLE {
        let t2 = theta * theta;
        let a = 1.0 - t2 / 6.0 * (1.0 - t2 / 20.0 * (1.0 - t2 / 42.0));
        let b = 0.5 - t2 / 24.0 * (1.0 - t2 / 30.0 * (1.0 - t2 / 56.0));
        (a, b)
    } else {
        let s = libm::sin(0.5 * theta);
        (libm::sin(theta) / theta, 2.0 * s * s / (theta * theta))
    }
}

/// Derivatives of the two coefficients divided by θ: `a'(θ)/θ` and `b'(θ)/θ`.
fn coefficient_slopes(theta: f64) -> (f64, f64) {
    let t2 = theta * theta;
    if theta < SERIES_ANGLE {
        let ca = -1.0 / 3.0 + t2 / 30.0 - t2 * t2 / 840.0 + t2 * t2 * t2 / 45360.0;
        let cb = -1.0 / 12.0 + t2 / 180.0 - t2 * t2 / 6720.0 + t2 * t2 * t2 / 453600.0;
        (ca, cb)
    } else {
        let (s, c) = (libm::sin(theta), libm::cos(theta));
        let h = libm::sin(0.5 * theta);
        let ca = (theta * c - s) / (t2 * theta);
        let cb = (theta * s - 4.0 * h * h) / (t2 * t2);
        (ca, cb)
    }
}

/// Partial derivatives `∂R/∂ω_m` for `m = 0, 1, 2`.
pub fn rodrigues_jacobian(omega: Vec3) -> [Mat3; 3] {
    let theta = math::norm(omega);
    let (a, b) = coefficients(theta);
    let (ca, cb) = coefficient_slopes(theta);
    let k = math::skew(omega);
    let k2 = math::mat_mul(&k, &k);
    let mut out = [math::ZERO3; 3];
    for (m, d) in out.iter_mut().enumerate() {
        let mut e = [0.0; 3];
        e[m] = 1.0;
        let em = math::skew(e);
        let ek = math::mat_mul(&em, &k);
        let ke = math::mat_mul(&k, &em);
        for i in 0..3 {
            for j in 0..3 {
                d[i][j] = ca * omega[m] * k[i][j]
                    + a * em[i][j]
                    + cb * omega[m] * k2[i][j]
                    + b * (ek[i][j] + ke[i][j]);
            }
        }
    }
    out
}

/// Pulls a cotangent `∂L/∂R` back to `∂L/∂ω`.
pub fn rodrigues_vjp(omega: Vec3, d_rot: &Mat3) -> Vec3 {
    let jac = rodrigues_jacobian(omega);
    [
        math::frob_dot(&jac[0], d_rot),
        math::frob_dot(&jac[1], d_rot),
        math::frob_dot(&jac[2], d_rot),
    ]
}
