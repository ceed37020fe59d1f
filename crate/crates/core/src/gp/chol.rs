//! Lower-triangular Cholesky factor stored row-packed, so that growing the
//! factor by one row is a single `extend` of the backing buffer.

/// Lower-triangular matrix, row `i` holding `i + 1` entries.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PackedLower {
    data: Vec<f64>,
    order: usize,
}

#[inline]
fn row_start(i: usize) -> usize {
    i * (i + 1) / 2
}

impl PackedLower {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn is_empty(&self) -> bool {
        self.order == 0
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        if j > i {
            0.0
        } else {
            self.data[row_start(i) + j]
        }
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[row_start(i)..row_start(i + 1)]
    }

    pub fn diagonal(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.order).map(move |i| self.data[row_start(i) + i])
    }

    /// Factors the symmetric matrix whose lower triangle is given row-packed.
    /// Returns `None` when a pivot is not strictly positive.
    pub fn factor(lower: &[f64], order: usize) -> Option<Self> {
        debug_assert_eq!(lower.len(), row_start(order));
        let mut l = PackedLower {
            data: Vec::with_capacity(lower.len()),
            order: 0,
        };
        let mut row = Vec::with_capacity(order);
        for i in 0..order {
            row.clear();
            row.extend_from_slice(&lower[row_start(i)..row_start(i) + i]);
            let diag = lower[row_start(i) + i];
            l.push_row(&mut row, diag)?;
        }
        Some(l)
    }

    /// Appends one row given the covariances `cross` between the new point and
    /// the existing ones, and the new diagonal entry. `cross` is overwritten by
    /// the solved row. Returns `None` (leaving `self` untouched) if the new
    /// pivot is not strictly positive.
    pub fn push_row(&mut self, cross: &mut [f64], diag: f64) -> Option<()> {
        debug_assert_eq!(cross.len(), self.order);
        self.forward_solve_in_place(cross);
        let sq: f64 = cross.iter().map(|c| c * c).sum();
        let pivot = diag - sq;
        if pivot.is_nan() || pivot <= 0.0 || pivot.is_infinite() {
            return None;
        }
        self.data.extend_from_slice(cross);
        self.data.push(pivot.sqrt());
        self.order += 1;
        Some(())
    }

    /// Solves `L z = b` in place.
    pub fn forward_solve_in_place(&self, b: &mut [f64]) {
        debug_assert_eq!(b.len(), self.order);
        for i in 0..self.order {
            let row = self.row(i);
            let mut s = b[i];
            for (lij, zj) in row[..i].iter().zip(&b[..i]) {
                s -= lij * zj;
            }
            b[i] = s / row[i];
        }
    }

    /// Solves `Lᵀ x = b` in place.
    pub fn back_solve_in_place(&self, b: &mut [f64]) {
        debug_assert_eq!(b.len(), self.order);
        for i in (0..self.order).rev() {
            let xi = b[i] / self.data[row_start(i) + i];
            b[i] = xi;
            // column i of Lᵀ above the diagonal is row i of L
            for (bj, lij) in b[..i].iter_mut().zip(&self.data[row_start(i)..row_start(i) + i]) {
                *bj -= lij * xi;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn factors_known_matrix() {
        // [[4, 2], [2, 5]] = L Lᵀ with L = [[2, 0], [1, 2]]
        let l = PackedLower::factor(&[4.0, 2.0, 5.0], 2).unwrap();
        assert_eq!(l.row(0), &[2.0]);
        assert_eq!(l.row(1), &[1.0, 2.0]);
        assert_eq!(l.get(0, 1), 0.0);
    }

    #[test]
    fn rejects_indefinite() {
        assert!(PackedLower::factor(&[1.0, 2.0, 1.0], 2).is_none());
        assert!(PackedLower::factor(&[0.0], 1).is_none());
    }

    #[test]
    fn solves_round_trip() {
        let l = PackedLower::factor(&[4.0, 2.0, 5.0, 0.4, -1.0, 3.0], 3).unwrap();
        let b = [1.0, -2.0, 0.5];
        let mut x = b;
        l.forward_solve_in_place(&mut x);
        l.back_solve_in_place(&mut x);
        // A x == b
        let a = [[4.0, 2.0, 0.4], [2.0, 5.0, -1.0], [0.4, -1.0, 3.0]];
        for i in 0..3 {
            let ax: f64 = (0..3).map(|j| a[i][j] * x[j]).sum();
            assert!((ax - b[i]).abs() < 1e-14);
        }
    }

    #[test]
    fn failed_push_leaves_factor_untouched() {
        let mut l = PackedLower::factor(&[1.0], 1).unwrap();
        let before = l.clone();
        assert!(l.push_row(&mut [1.0], 1.0).is_none());
        assert_eq!(l, before);
    }
}
