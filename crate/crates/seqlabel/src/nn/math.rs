//! Row-major matrix/vector kernels shared by the layers.

use crate::Real;

/// `out += w @ x` for a row-major `rows x cols` matrix.
pub(crate) fn matvec_acc(w: &[Real], rows: usize, cols: usize, x: &[Real], out: &mut [Real]) {
    debug_assert_eq!(w.len(), rows * cols);
    debug_assert_eq!(x.len(), cols);
    debug_assert_eq!(out.len(), rows);
    for r in 0..rows {
        let row = &w[r * cols..(r + 1) * cols];
        let mut acc = 0.0;
        for (wv, xv) in row.iter().zip(x) {
            acc += wv * xv;
        }
        out[r] += acc;
    }
}

/// `dx += w^T @ dy` for a row-major `rows x cols` matrix.
pub(crate) fn matvec_t_acc(w: &[Real], rows: usize, cols: usize, dy: &[Real], dx: &mut [Real]) {
    debug_assert_eq!(w.len(), rows * cols);
    debug_assert_eq!(dy.len(), rows);
    debug_assert_eq!(dx.len(), cols);
    for r in 0..rows {
        let row = &w[r * cols..(r + 1) * cols];
        let d = dy[r];
        for (dxv, wv) in dx.iter_mut().zip(row) {
            *dxv += wv * d;
        }
    }
}

/// `dw += dy (outer) x` for a row-major `rows x cols` gradient buffer.
pub(crate) fn outer_acc(dw: &mut [Real], rows: usize, cols: usize, dy: &[Real], x: &[Real]) {
    debug_assert_eq!(dw.len(), rows * cols);
    debug_assert_eq!(dy.len(), rows);
    debug_assert_eq!(x.len(), cols);
    for r in 0..rows {
        let d = dy[r];
        let row = &mut dw[r * cols..(r + 1) * cols];
        for (dwv, xv) in row.iter_mut().zip(x) {
            *dwv += d * xv;
        }
    }
}

pub(crate) fn sigmoid(x: Real) -> Real {
    1.0 / (1.0 + (-x).exp())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matvec_against_hand_product() {
        // [[1,2],[3,4],[5,6]] @ [1, -1] = [-1, -1, -1]
        let w = [1.0, 2.0, 3.0, 4.0, 5.0, 6.0];
        let mut out = vec![0.0; 3];
        matvec_acc(&w, 3, 2, &[1.0, -1.0], &mut out);
        assert_eq!(out, vec![-1.0, -1.0, -1.0]);
    }

    #[test]
    fn transpose_matvec_against_hand_product() {
        let w = [1.0, 2.0, 3.0, 4.0, 5.0, 6.0];
        let mut dx = vec![0.0; 2];
        matvec_t_acc(&w, 3, 2, &[1.0, 1.0, 1.0], &mut dx);
        assert_eq!(dx, vec![9.0, 12.0]);
    }

    #[test]
    fn outer_accumulates() {
        let mut dw = vec![0.0; 6];
        outer_acc(&mut dw, 3, 2, &[1.0, 2.0, 3.0], &[10.0, 20.0]);
        outer_acc(&mut dw, 3, 2, &[1.0, 2.0, 3.0], &[10.0, 20.0]);
        assert_eq!(dw, vec![20.0, 40.0, 40.0, 80.0, 60.0, 120.0]);
    }

    #[test]
    fn sigmoid_midpoint() {
        assert_eq!(sigmoid(0.0), 0.5);
        assert!(sigmoid(10.0) > 0.9999);
        assert!(sigmoid(-10.0) < 0.0001);
    }
}
