// SPDX-License-Identifier: Apache-2.0

//! Bilinear table lookup with boundary clamping.

use crate::netlist::Lut2D;

/// Returns `(lo, hi, t)` such that the query lies at `axis[lo] * (1 - t) + axis[hi] * t`.
/// Queries outside the axis clamp to the end point.
fn bracket(axis: &[f64], x: f64) -> (usize, usize, f64) {
    let n = axis.len();
    if n == 1 || x <= axis[0] {
        return (0, 0, 0.0);
    }
    if x >= axis[n - 1] {
        return (n - 1, n - 1, 0.0);
    }
    let hi = axis.partition_point(|&v| v <= x);
    let lo = hi - 1;
    let t = (x - axis[lo]) / (axis[hi] - axis[lo]);
    (lo, hi, t)
}

#[inline]
fn lerp(a: f64, b: f64, t: f64) -> f64 {
    a * (1.0 - t) + b * t
}

/// Evaluates `lut` at (`slew`, `load`).
pub fn interpolate_lut(lut: &Lut2D, slew: f64, load: f64) -> f64 {
    let (i0, i1, ts) = bracket(&lut.slew_axis, slew);
    let (j0, j1, tl) = bracket(&lut.load_axis, load);
    let t = &lut.table;
    let a = lerp(t[i0][j0], t[i0][j1], tl);
    let b = lerp(t[i1][j0], t[i1][j1], tl);
    lerp(a, b, ts)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn square() -> Lut2D {
        Lut2D {
            slew_axis: vec![0.0, 1.0],
            load_axis: vec![0.0, 1.0],
            table: vec![vec![0.0, 1.0], vec![2.0, 3.0]],
        }
    }

    #[test]
    fn midpoint() {
        assert_eq!(interpolate_lut(&square(), 0.5, 0.5), 1.5);
    }

    #[test]
    fn grid_points_are_exact() {
        let lut = Lut2D {
            slew_axis: vec![0.1, 0.3, 0.7],
            load_axis: vec![1.0, 2.0, 5.0, 9.0],
            table: vec![
                vec![0.11, 0.27, 0.31, 0.93],
                vec![1.7, 2.3, 3.1, 4.9],
                vec![5.3, 7.9, 11.3, 13.7],
            ],
        };
        for (i, &s) in lut.slew_axis.iter().enumerate() {
            for (j, &l) in lut.load_axis.iter().enumerate() {
                assert_eq!(interpolate_lut(&lut, s, l), lut.table[i][j]);
            }
        }
    }

    #[test]
    fn clamps_outside_axes() {
        let lut = square();
        assert_eq!(interpolate_lut(&lut, 7.0, 0.0), 2.0);
        assert_eq!(interpolate_lut(&lut, 7.0, 1.0), 3.0);
        assert_eq!(interpolate_lut(&lut, -3.0, 9.0), 1.0);
        assert_eq!(interpolate_lut(&lut, 2.0, 0.5), 2.5);
    }

    #[test]
    fn single_entry_table() {
        assert_eq!(interpolate_lut(&Lut2D::constant(4.25), 123.0, -1.0), 4.25);
    }

    proptest! {
        #[test]
        fn linear_between_grid_points(
            t in 0.0f64..1.0,
            v00 in -10.0f64..10.0, v01 in -10.0f64..10.0,
            v10 in -10.0f64..10.0, v11 in -10.0f64..10.0,
        ) {
            let lut = Lut2D {
                slew_axis: vec![0.0, 2.0],
                load_axis: vec![1.0, 3.0],
                table: vec![vec![v00, v01], vec![v10, v11]],
            };
            let along_load = interpolate_lut(&lut, 0.0, 1.0 + 2.0 * t);
            prop_assert!((along_load - (v00 + (v01 - v00) * t)).abs() < 1e-12);
            let along_slew = interpolate_lut(&lut, 2.0 * t, 3.0);
            prop_assert!((along_slew - (v01 + (v11 - v01) * t)).abs() < 1e-12);
        }
    }
}
