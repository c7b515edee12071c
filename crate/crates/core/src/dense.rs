//! Dense complex LU for the large coarse and fine systems.

use faer::linalg::solvers::{PartialPivLu, Solve};
use faer::Mat;
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

/// Partial-pivoting LU factorization (sequential, so results are reproducible).
pub(crate) struct DenseLu {
    lu: PartialPivLu<Complex64>,
    n: usize,
}

impl DenseLu {
    pub fn new(m: &DMatrix<Complex64>) -> Self {
        let n = m.nrows();
        let a = Mat::from_fn(n, m.ncols(), |i, j| m[(i, j)]);
        Self {
            lu: a.partial_piv_lu(),
            n,
        }
    }

    /// `None` when the factorization produced non-finite values.
    pub fn solve(&self, b: &DVector<Complex64>) -> Option<DVector<Complex64>> {
        let mut x = Mat::from_fn(self.n, 1, |i, _| b[i]);
        self.lu.solve_in_place(x.as_mut());
        let v = DVector::from_fn(self.n, |i, _| x[(i, 0)]);
        v.iter().all(|z| z.re.is_finite() && z.im.is_finite()).then_some(v)
    }
}

impl std::fmt::Debug for DenseLu {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("DenseLu").field("n", &self.n).finish()
    }
}
