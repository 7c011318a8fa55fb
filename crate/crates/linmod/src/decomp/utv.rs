//! Two-sided orthogonal (ULV/URV) and CR decompositions for matrices of any
//! rank.

use serde::Serialize;

use super::qr::qr_householder;
use crate::error::Result;
use crate::matrix::{permute, rref, Axis, Matrix, PermutationSpec};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum UtvVariant {
    Ulv,
    Urv,
}

/// `X = U T V` with orthogonal `U`, `V` and an `r x r` triangular block
/// `T_11` (lower for ULV, upper for URV) in the top-left corner of `T`.
/// Note `V` multiplies untransposed.
#[derive(Clone, Debug, Serialize)]
pub struct UtvFactors {
    pub u: Matrix,
    pub t: Matrix,
    pub v: Matrix,
    pub rank: usize,
    pub variant: UtvVariant,
}

impl UtvFactors {
    pub fn reconstruct(&self) -> Matrix {
        self.u
            .matmul(&self.t)
            .expect("conformable")
            .matmul(&self.v)
            .expect("conformable")
    }

    /// Top-left `r x r` triangular block.
    pub fn t11(&self) -> Matrix {
        let r = self.rank;
        let mut t11 = Matrix::zeros(r, r);
        for i in 0..r {
            for j in 0..r {
                t11.set(i, j, self.t.get(i, j));
            }
        }
        t11
    }
}

/// ULV: a column permutation moves a maximal independent column set first,
/// a full QR triangularizes it, and a full LQ of the resulting fat block
/// flushes the coupling into a lower-triangular corner.
pub fn ulv(x: &Matrix) -> Result<UtvFactors> {
    let (n, p) = (x.rows, x.cols);
    let pivots = rref(x).pivot_cols;
    let r = pivots.len();
    if r == 0 {
        return Ok(UtvFactors {
            u: Matrix::identity(n),
            t: Matrix::zeros(n, p),
            v: Matrix::identity(p),
            rank: 0,
            variant: UtvVariant::Ulv,
        });
    }
    let mut order = pivots.clone();
    order.extend((0..p).filter(|c| !pivots.contains(c)));
    let perm = PermutationSpec::new(order)?;
    let xp = permute(x, &perm, Axis::Cols)?;

    // full QR of the independent block
    let z = xp.take_cols(&(0..r).collect::<Vec<_>>());
    let qr_z = qr_householder(&z)?;
    let u = qr_z.q;

    // top r rows of U^T X P form the fat triangular block [R  R E]
    let w = u.transpose().matmul(&xp)?;
    let w_top = w.take_rows(&(0..r).collect::<Vec<_>>());

    // full LQ of the fat block via QR of its transpose
    let qr_wt = qr_householder(&w_top.transpose())?;
    let v0 = qr_wt.q.transpose();
    let l = {
        let mut l = Matrix::zeros(r, r);
        for i in 0..r {
            for j in 0..=i {
                l.set(i, j, qr_wt.r.get(j, i));
            }
        }
        l
    };

    let mut t = Matrix::zeros(n, p);
    for i in 0..r {
        for j in 0..r {
            t.set(i, j, l.get(i, j));
        }
    }
    // V = V0 P^{-1}: undo the column permutation
    let v = permute(&v0, &perm.inverse(), Axis::Cols)?;
    Ok(UtvFactors {
        u,
        t,
        v,
        rank: r,
        variant: UtvVariant::Ulv,
    })
}

/// URV: the mirrored construction, permuting a maximal independent row set
/// first, factoring it by LQ, then QR on the resulting tall block.
pub fn urv(x: &Matrix) -> Result<UtvFactors> {
    let (n, p) = (x.rows, x.cols);
    let row_pivots = rref(&x.transpose()).pivot_cols;
    let r = row_pivots.len();
    if r == 0 {
        return Ok(UtvFactors {
            u: Matrix::identity(n),
            t: Matrix::zeros(n, p),
            v: Matrix::identity(p),
            rank: 0,
            variant: UtvVariant::Urv,
        });
    }
    let mut order = row_pivots.clone();
    order.extend((0..n).filter(|row| !row_pivots.contains(row)));
    let perm = PermutationSpec::new(order)?;
    let px = permute(x, &perm, Axis::Rows)?;

    // full LQ of the independent rows via QR of the transpose
    let z = px.take_rows(&(0..r).collect::<Vec<_>>());
    let qr_zt = qr_householder(&z.transpose())?;
    let v = qr_zt.q.transpose();

    // first r columns of P X V^T form the tall block [L; E L]
    let m_full = px.matmul(&v.transpose())?;
    let m = m_full.take_cols(&(0..r).collect::<Vec<_>>());
    let qr_m = qr_householder(&m)?;
    let u0 = qr_m.q;

    let mut t = Matrix::zeros(n, p);
    for i in 0..r {
        for j in i..r {
            t.set(i, j, qr_m.r.get(i, j));
        }
    }
    // U = P^{-1} U0: undo the row permutation
    let u = permute(&u0, &perm.inverse(), Axis::Rows)?;
    Ok(UtvFactors {
        u,
        t,
        v,
        rank: r,
        variant: UtvVariant::Urv,
    })
}

/// `X = C R` where `C` holds the pivot columns of `X` and `R` is the reduced
/// row echelon form without its zero rows; the pivot columns of `R` form an
/// identity submatrix.
#[derive(Clone, Debug, Serialize)]
pub struct CrFactors {
    pub c: Matrix,
    pub r_factor: Matrix,
    pub rank: usize,
    pub pivot_cols: Vec<usize>,
}

impl CrFactors {
    pub fn reconstruct(&self) -> Matrix {
        self.c.matmul(&self.r_factor).expect("conformable")
    }
}

pub fn cr(x: &Matrix) -> Result<CrFactors> {
    let reduced = rref(x);
    let r = reduced.rank;
    let c = x.take_cols(&reduced.pivot_cols);
    let r_factor = reduced.rref.take_rows(&(0..r).collect::<Vec<_>>());
    Ok(CrFactors {
        c,
        r_factor,
        rank: r,
        pivot_cols: reduced.pivot_cols,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::rank;
    use crate::rng::RngStream;

    fn frob_diff(a: &Matrix, b: &Matrix) -> f64 {
        a.sub(b).unwrap().frobenius_norm()
    }

    fn orthogonal_defect(q: &Matrix) -> f64 {
        frob_diff(&q.gram(), &Matrix::identity(q.cols))
    }

    fn rank_deficient(n: usize, p: usize, r: usize, rng: &mut RngStream) -> Matrix {
        let mut x = Matrix::zeros(n, p);
        for _ in 0..r {
            let u = rng.normal_vec(n);
            let v = rng.normal_vec(p);
            for i in 0..n {
                for j in 0..p {
                    x.set(i, j, x.get(i, j) + u[i] * v[j]);
                }
            }
        }
        x
    }

    fn check_utv(x: &Matrix, f: &UtvFactors) {
        let scale = f64::max(1.0, x.frobenius_norm());
        assert!(frob_diff(x, &f.reconstruct()) <= 1e-9 * scale, "reconstruction");
        assert!(orthogonal_defect(&f.u) <= 1e-10 * (f.u.cols as f64).sqrt());
        assert!(orthogonal_defect(&f.v) <= 1e-10 * (f.v.cols as f64).sqrt());
        // zeros outside the leading r x r block
        for i in 0..f.t.rows {
            for j in 0..f.t.cols {
                if i >= f.rank || j >= f.rank {
                    assert_eq!(f.t.get(i, j), 0.0);
                }
            }
        }
        let t11 = f.t11();
        for i in 0..f.rank {
            for j in 0..f.rank {
                let v = t11.get(i, j);
                match f.variant {
                    UtvVariant::Ulv if j > i => assert!(v.abs() <= 1e-12 * scale),
                    UtvVariant::Urv if j < i => assert!(v.abs() <= 1e-12 * scale),
                    _ => {}
                }
            }
        }
    }

    #[test]
    fn full_rank_square_has_full_t11() {
        let mut rng = RngStream::new(41);
        let x = Matrix::new(4, 4, rng.normal_vec(16)).unwrap();
        for f in [ulv(&x).unwrap(), urv(&x).unwrap()] {
            assert_eq!(f.rank, 4);
            check_utv(&x, &f);
        }
    }

    #[test]
    fn rank_one_t11_is_norm_product() {
        let mut rng = RngStream::new(42);
        let a = rng.normal_vec(4);
        let b = rng.normal_vec(3);
        let mut x = Matrix::zeros(4, 3);
        for i in 0..4 {
            for j in 0..3 {
                x.set(i, j, a[i] * b[j]);
            }
        }
        let expected = crate::matrix::norm2(&a) * crate::matrix::norm2(&b);
        for f in [ulv(&x).unwrap(), urv(&x).unwrap()] {
            assert_eq!(f.rank, 1);
            check_utv(&x, &f);
            assert!((f.t11().get(0, 0).abs() - expected).abs() <= 1e-10 * expected);
        }
    }

    #[test]
    fn random_rank_two_reconstructs_and_ranks_agree() {
        let mut rng = RngStream::new(43);
        let x = rank_deficient(5, 4, 2, &mut rng);
        assert_eq!(rank(&x), 2);
        for f in [ulv(&x).unwrap(), urv(&x).unwrap()] {
            assert_eq!(f.rank, 2);
            check_utv(&x, &f);
        }
    }

    #[test]
    fn cr_full_column_rank_is_x_times_identity() {
        let mut rng = RngStream::new(44);
        let x = Matrix::new(5, 3, rng.normal_vec(15)).unwrap();
        let f = cr(&x).unwrap();
        assert_eq!(f.rank, 3);
        assert_eq!(f.c.data, x.data);
        assert!(frob_diff(&f.r_factor, &Matrix::identity(3)) <= 1e-12);
    }

    #[test]
    fn cr_rank_one_hand_example() {
        let x = Matrix::from_rows(&[vec![1.0, 2.0], vec![2.0, 4.0]]);
        let f = cr(&x).unwrap();
        assert_eq!(f.rank, 1);
        assert_eq!(f.c.data, vec![1.0, 2.0]);
        assert_eq!(f.r_factor.data, vec![1.0, 2.0]);
        assert!(frob_diff(&x, &f.reconstruct()) <= 1e-12);
    }

    #[test]
    fn cr_pivot_columns_of_r_form_identity() {
        let mut rng = RngStream::new(45);
        let x = rank_deficient(6, 5, 3, &mut rng);
        let f = cr(&x).unwrap();
        assert_eq!(f.rank, 3);
        let id_block = f.r_factor.take_cols(&f.pivot_cols);
        assert!(frob_diff(&id_block, &Matrix::identity(3)) <= 1e-10);
        assert!(frob_diff(&x, &f.reconstruct()) <= 1e-10 * x.frobenius_norm());
        // both factors have rank r
        assert_eq!(rank(&f.c), 3);
        assert_eq!(rank(&f.r_factor), 3);
    }

    #[test]
    fn trace_of_idempotent_equals_cr_rank() {
        // A = X (X^T X)^{-1} X^T is idempotent with rank = columns of X
        let mut rng = RngStream::new(46);
        let x = Matrix::new(6, 3, rng.normal_vec(18)).unwrap();
        let g = x.gram();
        let spec = crate::decomp::spectral_symmetric(&g).unwrap();
        let g_inv = spec.reassemble(|l| 1.0 / l);
        let h = x.matmul(&g_inv).unwrap().matmul(&x.transpose()).unwrap();
        let f = cr(&h).unwrap();
        let tr = h.trace().unwrap();
        assert!((tr - f.rank as f64).abs() <= 1e-8);
    }
}
