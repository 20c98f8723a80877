//! Sobel smoothness penalty and its gradient.
//!
//! Only pixels whose full 3x3 neighbourhood lies on the grid contribute, so a
//! constant map scores exactly zero.

use ndarray::Array2;

use crate::grid::PropertyMap;

/// Derivative along x (first index); rows are x offsets -1, 0, +1.
pub const SOBEL_X: [[f64; 3]; 3] = [[-1.0, -2.0, -1.0], [0.0, 0.0, 0.0], [1.0, 2.0, 1.0]];
/// Derivative along z.
pub const SOBEL_Z: [[f64; 3]; 3] = [[-1.0, 0.0, 1.0], [-2.0, 0.0, 2.0], [-1.0, 0.0, 1.0]];

fn respond(u: &Array2<f64>, k: &[[f64; 3]; 3], x: usize, z: usize) -> f64 {
    let mut s = 0.0;
    for (i, row) in k.iter().enumerate() {
        for (j, w) in row.iter().enumerate() {
            s += w * u[[x + i - 1, z + j - 1]];
        }
    }
    s
}

/// `Σ (S_x ∗ θ)² + (S_z ∗ θ)²` over interior pixels.
pub fn sobel_reg_values(u: &Array2<f64>) -> f64 {
    let (nx, nz) = u.dim();
    let mut total = 0.0;
    for x in 1..nx.saturating_sub(1) {
        for z in 1..nz.saturating_sub(1) {
            let gx = respond(u, &SOBEL_X, x, z);
            let gz = respond(u, &SOBEL_Z, x, z);
            total += gx * gx + gz * gz;
        }
    }
    total
}

/// Gradient of [`sobel_reg_values`]: `2 (S_xᵀ (S_x θ) + S_zᵀ (S_z θ))`.
pub fn sobel_reg_gradient_values(u: &Array2<f64>) -> Array2<f64> {
    let (nx, nz) = u.dim();
    let mut g = Array2::zeros((nx, nz));
    for x in 1..nx.saturating_sub(1) {
        for z in 1..nz.saturating_sub(1) {
            for k in [&SOBEL_X, &SOBEL_Z] {
                let r = 2.0 * respond(u, k, x, z);
                for (i, row) in k.iter().enumerate() {
                    for (j, w) in row.iter().enumerate() {
                        g[[x + i - 1, z + j - 1]] += w * r;
                    }
                }
            }
        }
    }
    g
}

pub fn sobel_reg(map: &PropertyMap) -> f64 {
    sobel_reg_values(map.values())
}

pub fn sobel_reg_gradient(map: &PropertyMap) -> Array2<f64> {
    sobel_reg_gradient_values(map.values())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_map_scores_zero() {
        let u = Array2::from_elem((6, 7), 1540.0);
        assert_eq!(sobel_reg_values(&u), 0.0);
        assert!(sobel_reg_gradient_values(&u).iter().all(|&v| v == 0.0));
    }

    #[test]
    fn spike_on_5x5() {
        // Every 3x3 window touching the spike sees one kernel weight; sum of
        // squared weights over both kernels is 2 * (1+4+1+1+4+1) = 24.
        let mut u = Array2::zeros((5, 5));
        u[[2, 2]] = 3.0;
        assert_eq!(sobel_reg_values(&u), 9.0 * 24.0);
        // Spike touching the border is only seen by the windows that fit.
        let mut v = Array2::zeros((5, 5));
        v[[0, 0]] = 1.0;
        // only the window centred at (1, 1) sees it, with weight -1 in both
        assert_eq!(sobel_reg_values(&v), 2.0);
    }

    #[test]
    fn ramp_rows() {
        let u = Array2::from_shape_fn((5, 6), |(x, _)| 2.0 * x as f64);
        // S_x of a slope-2 ramp: (1+2+1) * 2 * 2 = 16, S_z = 0
        assert_eq!(sobel_reg_values(&u), 3.0 * 4.0 * 256.0);
    }

    #[test]
    fn gradient_is_exact_for_the_quadratic_form() {
        // The penalty is quadratic, so a central difference is exact up to
        // round-off for any step.
        let u = Array2::from_shape_fn((5, 6), |(x, z)| ((x * 7 + z * 3) % 5) as f64 - 1.3 * z as f64);
        let g = sobel_reg_gradient_values(&u);
        for x in 0..5 {
            for z in 0..6 {
                let mut p = u.clone();
                let mut m = u.clone();
                p[[x, z]] += 0.5;
                m[[x, z]] -= 0.5;
                let fd = sobel_reg_values(&p) - sobel_reg_values(&m);
                assert!((fd - g[[x, z]]).abs() < 1e-9, "({x},{z}) {fd} vs {}", g[[x, z]]);
            }
        }
    }
}
