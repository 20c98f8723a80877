//! Discrete spatial operators on flattened `[ix * n_z + iz]` rasters with
//! zero padding outside the grid.

/// 5-point Laplacian scaled by `inv_dx2`.
pub(crate) fn laplacian(u: &[f64], n_x: usize, n_z: usize, inv_dx2: f64, out: &mut [f64]) {
    debug_assert_eq!(u.len(), n_x * n_z);
    for ix in 0..n_x {
        let row = ix * n_z;
        for iz in 0..n_z {
            let i = row + iz;
            let mut s = -4.0 * u[i];
            if ix > 0 {
                s += u[i - n_z];
            }
            if ix + 1 < n_x {
                s += u[i + n_z];
            }
            if iz > 0 {
                s += u[i - 1];
            }
            if iz + 1 < n_z {
                s += u[i + 1];
            }
            out[i] = s * inv_dx2;
        }
    }
}

/// Central-difference derivative along x, scaled by `inv_2dx`.
pub(crate) fn grad_x(u: &[f64], n_x: usize, n_z: usize, inv_2dx: f64, out: &mut [f64]) {
    for ix in 0..n_x {
        let row = ix * n_z;
        for iz in 0..n_z {
            let i = row + iz;
            let hi = if ix + 1 < n_x { u[i + n_z] } else { 0.0 };
            let lo = if ix > 0 { u[i - n_z] } else { 0.0 };
            out[i] = (hi - lo) * inv_2dx;
        }
    }
}

/// Central-difference derivative along z, scaled by `inv_2dx`.
pub(crate) fn grad_z(u: &[f64], n_x: usize, n_z: usize, inv_2dx: f64, out: &mut [f64]) {
    for ix in 0..n_x {
        let row = ix * n_z;
        for iz in 0..n_z {
            let i = row + iz;
            let hi = if iz + 1 < n_z { u[i + 1] } else { 0.0 };
            let lo = if iz > 0 { u[i - 1] } else { 0.0 };
            out[i] = (hi - lo) * inv_2dx;
        }
    }
}

/// Central difference along `axis` (0 = x, 1 = z) with edge replication, so
/// constant maps have zero gradient up to the border. Used for material maps.
pub(crate) fn grad_edge(u: &[f64], n_x: usize, n_z: usize, axis: usize, inv_2dx: f64, out: &mut [f64]) {
    for ix in 0..n_x {
        for iz in 0..n_z {
            let (hi, lo) = edge_neighbors(ix, iz, n_x, n_z, axis);
            out[ix * n_z + iz] = (u[hi] - u[lo]) * inv_2dx;
        }
    }
}

/// Transpose of [`grad_edge`]: `out += Gᵀ v`.
pub(crate) fn grad_edge_adjoint_add(
    v: &[f64],
    n_x: usize,
    n_z: usize,
    axis: usize,
    inv_2dx: f64,
    out: &mut [f64],
) {
    for ix in 0..n_x {
        for iz in 0..n_z {
            let (hi, lo) = edge_neighbors(ix, iz, n_x, n_z, axis);
            let w = v[ix * n_z + iz] * inv_2dx;
            out[hi] += w;
            out[lo] -= w;
        }
    }
}

fn edge_neighbors(ix: usize, iz: usize, n_x: usize, n_z: usize, axis: usize) -> (usize, usize) {
    if axis == 0 {
        let hi = (ix + 1).min(n_x - 1);
        let lo = ix.saturating_sub(1);
        (hi * n_z + iz, lo * n_z + iz)
    } else {
        let hi = (iz + 1).min(n_z - 1);
        let lo = iz.saturating_sub(1);
        (ix * n_z + hi, ix * n_z + lo)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dense(op: impl Fn(&[f64], &mut [f64]), n: usize) -> Vec<Vec<f64>> {
        (0..n)
            .map(|j| {
                let mut e = vec![0.0; n];
                e[j] = 1.0;
                let mut col = vec![0.0; n];
                op(&e, &mut col);
                col
            })
            .collect()
    }

    #[test]
    fn laplacian_is_symmetric_and_gradients_antisymmetric() {
        let (nx, nz) = (4, 5);
        let n = nx * nz;
        let l = dense(|u, o| laplacian(u, nx, nz, 1.0, o), n);
        let gx = dense(|u, o| grad_x(u, nx, nz, 1.0, o), n);
        let gz = dense(|u, o| grad_z(u, nx, nz, 1.0, o), n);
        for i in 0..n {
            for j in 0..n {
                assert_eq!(l[i][j], l[j][i]);
                assert_eq!(gx[i][j], -gx[j][i]);
                assert_eq!(gz[i][j], -gz[j][i]);
            }
        }
    }

    #[test]
    fn edge_gradient_adjoint_is_the_transpose() {
        let (nx, nz) = (4, 3);
        let n = nx * nz;
        for axis in 0..2 {
            let g = dense(|u, o| grad_edge(u, nx, nz, axis, 0.7, o), n);
            let gt = dense(
                |v, o| {
                    o.iter_mut().for_each(|x| *x = 0.0);
                    grad_edge_adjoint_add(v, nx, nz, axis, 0.7, o)
                },
                n,
            );
            for i in 0..n {
                for j in 0..n {
                    assert_eq!(g[j][i], gt[i][j]);
                }
            }
            let mut out = vec![1.0; n];
            grad_edge(&vec![2.5; n], nx, nz, axis, 0.7, &mut out);
            assert!(out.iter().all(|&v| v == 0.0));
        }
    }

    #[test]
    fn stencils_on_polynomials() {
        let (nx, nz) = (6, 7);
        let h = 0.5;
        let u: Vec<f64> = (0..nx * nz)
            .map(|i| {
                let (x, z) = ((i / nz) as f64 * h, (i % nz) as f64 * h);
                x * x + 3.0 * z
            })
            .collect();
        let mut lap = vec![0.0; nx * nz];
        let mut gx = vec![0.0; nx * nz];
        let mut gz = vec![0.0; nx * nz];
        laplacian(&u, nx, nz, 1.0 / (h * h), &mut lap);
        grad_x(&u, nx, nz, 0.5 / h, &mut gx);
        grad_z(&u, nx, nz, 0.5 / h, &mut gz);
        for ix in 1..nx - 1 {
            for iz in 1..nz - 1 {
                let i = ix * nz + iz;
                assert!((lap[i] - 2.0).abs() < 1e-12);
                assert!((gx[i] - 2.0 * ix as f64 * h).abs() < 1e-12);
                assert!((gz[i] - 3.0).abs() < 1e-12);
            }
        }
    }
}
