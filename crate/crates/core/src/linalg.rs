//! Small dense 3×3 helpers on top of `nalgebra`.

use nalgebra::Matrix3;

pub type Mat3 = Matrix3<f64>;
pub type Rows3 = [[f64; 3]; 3];

pub fn from_rows(r: &Rows3) -> Mat3 {
    Mat3::from_fn(|i, j| r[i][j])
}

pub fn to_rows(m: &Mat3) -> Rows3 {
    let mut r = [[0.0; 3]; 3];
    for (i, row) in r.iter_mut().enumerate() {
        for (j, v) in row.iter_mut().enumerate() {
            *v = m[(i, j)];
        }
    }
    r
}

/// Entrywise maximum absolute difference.
pub fn max_abs_diff(a: &Rows3, b: &Rows3) -> f64 {
    let mut d = 0.0f64;
    for i in 0..3 {
        for j in 0..3 {
            d = d.max((a[i][j] - b[i][j]).abs());
        }
    }
    d
}

pub fn symmetrize(m: &Mat3) -> Mat3 {
    (m + m.transpose()) * 0.5
}

/// Eigenvalues of the symmetric part, ascending.
pub fn symmetric_eigenvalues(m: &Mat3) -> [f64; 3] {
    let e = symmetrize(m).symmetric_eigenvalues();
    let mut v = [e[0], e[1], e[2]];
    v.sort_by(f64::total_cmp);
    v
}

/// Matrix exponential by scaling and squaring with a degree-18 Taylor
/// polynomial on the scaled matrix (norm ≤ 1/2).
pub fn expm(a: &Mat3) -> Mat3 {
    let norm = a.abs().row_sum().max();
    let mut s = 0i32;
    if norm > 0.5 {
        s = (norm / 0.5).log2().ceil() as i32;
    }
    let scaled = a / 2f64.powi(s);
    let mut term = Mat3::identity();
    let mut sum = Mat3::identity();
    for k in 1..=18 {
        term = term * scaled / k as f64;
        sum += term;
    }
    for _ in 0..s {
        sum = sum * sum;
    }
    sum
}

/// `∫_0^∞ e^{Bu} Γ e^{B^t u} du` for a stable `B`, computed by composite
/// Simpson on `[0, U]`.
#[derive(Debug, Clone, Copy)]
pub struct Quadrature {
    pub value: Mat3,
    pub upper: f64,
    pub step: f64,
    /// Estimate of the neglected tail `∫_U^∞`.
    pub tail: f64,
}

/// `gap` is the decay rate of `e^{Bu}` (minus the largest real part of
/// its spectrum); the cut-off is `max(40, 25 / gap)`.
pub fn lyapunov_quadrature(b: &Mat3, gamma: &Mat3, gap: f64, step: f64) -> Quadrature {
    assert!(gap > 0.0, "lyapunov_quadrature needs a stable matrix");
    let upper = 40f64.max(25.0 / gap);
    let n = {
        let n = (upper / step).ceil() as usize;
        n + n % 2
    };
    let h = upper / n as f64;
    let e_h = expm(&(b * h));
    let mut e = Mat3::identity();
    let mut acc = Mat3::zeros();
    let mut last = Mat3::zeros();
    for i in 0..=n {
        let f = e * gamma * e.transpose();
        let w = if i == 0 || i == n {
            1.0
        } else if i % 2 == 1 {
            4.0
        } else {
            2.0
        };
        acc += f * w;
        last = f;
        e *= e_h;
    }
    let value = acc * (h / 3.0);
    let tail = last.norm() / (2.0 * gap);
    Quadrature { value, upper, step: h, tail }
}

/// `B Σ + Σ B^t + Γ`, which vanishes for the integral above.
pub fn lyapunov_residual(b: &Mat3, sigma: &Mat3, gamma: &Mat3) -> Mat3 {
    b * sigma + sigma * b.transpose() + gamma
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn expm_of_diagonal_and_nilpotent() {
        let d = Mat3::from_diagonal(&nalgebra::Vector3::new(-1.0, 0.5, 3.0));
        let e = expm(&d);
        assert!((e[(0, 0)] - (-1f64).exp()).abs() < 1e-15);
        assert!((e[(2, 2)] - 3f64.exp()).abs() < 1e-12);
        let n = from_rows(&[[0.0, 2.0, 0.0], [0.0, 0.0, 3.0], [0.0, 0.0, 0.0]]);
        let e = expm(&n);
        // I + N + N²/2
        assert!((e[(0, 1)] - 2.0).abs() < 1e-15 && (e[(0, 2)] - 3.0).abs() < 1e-15);
    }

    #[test]
    fn expm_of_rotation() {
        let t = 7.3;
        let r = from_rows(&[[0.0, -t, 0.0], [t, 0.0, 0.0], [0.0, 0.0, 0.0]]);
        let e = expm(&r);
        assert!((e[(0, 0)] - t.cos()).abs() < 1e-13);
        assert!((e[(1, 0)] - t.sin()).abs() < 1e-13);
    }

    #[test]
    fn scalar_lyapunov_integral() {
        // ∫ e^{-2 c u} du = 1 / (2c)
        let b = Mat3::identity() * -0.7;
        let q = lyapunov_quadrature(&b, &Mat3::identity(), 0.7, 0.01);
        assert!((q.value[(0, 0)] - 1.0 / 1.4).abs() < 1e-9);
        assert!(lyapunov_residual(&b, &q.value, &Mat3::identity()).norm() < 1e-9);
    }
}
