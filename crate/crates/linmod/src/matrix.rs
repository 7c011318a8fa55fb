//! Dense real matrices in row-major order, structured transforms
//! (permutation, selection), triangular solves, and row reduction.
//!
//! Every other module builds on the types here. Values are immutable after
//! construction and all operations are pure functions, so they may be used
//! freely across threads.

use serde::Serialize;

use crate::error::{Error, Result};

/// Relative entry tolerance used by `rref` and rank decisions:
/// `1e-10 * max(1, max |x_ij|)`.
pub fn rank_entry_tolerance(x: &Matrix) -> f64 {
    1e-10 * f64::max(1.0, x.max_abs())
}

/// A dense `rows x cols` matrix of finite `f64` values, stored row-major:
/// `data[r * cols + c]`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Matrix {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl Matrix {
    /// Builds a matrix from row-major data, rejecting length mismatches and
    /// non-finite entries.
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::shape(
                "Matrix::new",
                format!("{} values for a {rows}x{cols} matrix", data.len()),
            ));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("Matrix::new"));
        }
        Ok(Matrix { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Matrix::zeros(n, n);
        for i in 0..n {
            m.set(i, i, 1.0);
        }
        m
    }

    /// Convenience constructor from nested rows; panics on ragged input.
    pub fn from_rows(rows: &[Vec<f64>]) -> Self {
        let r = rows.len();
        let c = rows.first().map_or(0, |row| row.len());
        let mut data = Vec::with_capacity(r * c);
        for row in rows {
            assert_eq!(row.len(), c, "ragged rows");
            data.extend_from_slice(row);
        }
        Matrix { rows: r, cols: c, data }
    }

    pub fn diag(values: &[f64]) -> Self {
        let n = values.len();
        let mut m = Matrix::zeros(n, n);
        for (i, &v) in values.iter().enumerate() {
            m.set(i, i, v);
        }
        m
    }

    /// n x 1 column matrix from a vector.
    pub fn column(values: &[f64]) -> Self {
        Matrix {
            rows: values.len(),
            cols: 1,
            data: values.to_vec(),
        }
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        self.data[r * self.cols + c] = v;
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn col(&self, c: usize) -> Vec<f64> {
        (0..self.rows).map(|r| self.get(r, c)).collect()
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn transpose(&self) -> Matrix {
        let mut t = Matrix::zeros(self.cols, self.rows);
        for r in 0..self.rows {
            for c in 0..self.cols {
                t.set(c, r, self.get(r, c));
            }
        }
        t
    }

    pub fn matmul(&self, other: &Matrix) -> Result<Matrix> {
        if self.cols != other.rows {
            return Err(Error::shape(
                "matmul",
                format!(
                    "{}x{} times {}x{}",
                    self.rows, self.cols, other.rows, other.cols
                ),
            ));
        }
        let mut out = Matrix::zeros(self.rows, other.cols);
        for r in 0..self.rows {
            for k in 0..self.cols {
                let a = self.get(r, k);
                if a == 0.0 {
                    continue;
                }
                let row = &other.data[k * other.cols..(k + 1) * other.cols];
                let dst = &mut out.data[r * other.cols..(r + 1) * other.cols];
                for (d, &b) in dst.iter_mut().zip(row) {
                    *d += a * b;
                }
            }
        }
        Ok(out)
    }

    pub fn matvec(&self, v: &[f64]) -> Result<Vec<f64>> {
        if self.cols != v.len() {
            return Err(Error::shape(
                "matvec",
                format!("{}x{} times length-{}", self.rows, self.cols, v.len()),
            ));
        }
        Ok((0..self.rows)
            .map(|r| dot(self.row(r), v))
            .collect())
    }

    /// `self^T v` without forming the transpose.
    pub fn tr_matvec(&self, v: &[f64]) -> Result<Vec<f64>> {
        if self.rows != v.len() {
            return Err(Error::shape(
                "tr_matvec",
                format!("{}x{} transposed times length-{}", self.rows, self.cols, v.len()),
            ));
        }
        let mut out = vec![0.0; self.cols];
        for r in 0..self.rows {
            let x = v[r];
            if x == 0.0 {
                continue;
            }
            for (o, &a) in out.iter_mut().zip(self.row(r)) {
                *o += x * a;
            }
        }
        Ok(out)
    }

    pub fn add(&self, other: &Matrix) -> Result<Matrix> {
        self.zip_with(other, "add", |a, b| a + b)
    }

    pub fn sub(&self, other: &Matrix) -> Result<Matrix> {
        self.zip_with(other, "sub", |a, b| a - b)
    }

    fn zip_with(&self, other: &Matrix, op: &'static str, f: impl Fn(f64, f64) -> f64) -> Result<Matrix> {
        if self.rows != other.rows || self.cols != other.cols {
            return Err(Error::shape(
                op,
                format!(
                    "{}x{} vs {}x{}",
                    self.rows, self.cols, other.rows, other.cols
                ),
            ));
        }
        let data = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(&a, &b)| f(a, b))
            .collect();
        Ok(Matrix {
            rows: self.rows,
            cols: self.cols,
            data,
        })
    }

    pub fn scale(&self, s: f64) -> Matrix {
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&v| v * s).collect(),
        }
    }

    pub fn trace(&self) -> Result<f64> {
        if !self.is_square() {
            return Err(Error::shape(
                "trace",
                format!("{}x{} is not square", self.rows, self.cols),
            ));
        }
        Ok((0..self.rows).map(|i| self.get(i, i)).sum())
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// Largest entry magnitude.
    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    /// Gram matrix `self^T self`, symmetrized to kill rounding drift.
    pub fn gram(&self) -> Matrix {
        let p = self.cols;
        let mut g = Matrix::zeros(p, p);
        for i in 0..p {
            for j in i..p {
                let mut s = 0.0;
                for r in 0..self.rows {
                    s += self.get(r, i) * self.get(r, j);
                }
                g.set(i, j, s);
                g.set(j, i, s);
            }
        }
        g
    }

    /// Copies the listed columns, in order, into a new matrix.
    pub fn take_cols(&self, cols: &[usize]) -> Matrix {
        let mut out = Matrix::zeros(self.rows, cols.len());
        for (j, &c) in cols.iter().enumerate() {
            assert!(c < self.cols, "column index out of range");
            for r in 0..self.rows {
                out.set(r, j, self.get(r, c));
            }
        }
        out
    }

    pub fn take_rows(&self, rows: &[usize]) -> Matrix {
        let mut out = Matrix::zeros(rows.len(), self.cols);
        for (i, &r) in rows.iter().enumerate() {
            assert!(r < self.rows, "row index out of range");
            out.data[i * self.cols..(i + 1) * self.cols].copy_from_slice(self.row(r));
        }
        out
    }

    /// Stacks `self` on top of `other`.
    pub fn vcat(&self, other: &Matrix) -> Result<Matrix> {
        if self.cols != other.cols {
            return Err(Error::shape(
                "vcat",
                format!("{} vs {} columns", self.cols, other.cols),
            ));
        }
        let mut data = self.data.clone();
        data.extend_from_slice(&other.data);
        Ok(Matrix {
            rows: self.rows + other.rows,
            cols: self.cols,
            data,
        })
    }

    pub fn hcat(&self, other: &Matrix) -> Result<Matrix> {
        if self.rows != other.rows {
            return Err(Error::shape(
                "hcat",
                format!("{} vs {} rows", self.rows, other.rows),
            ));
        }
        let mut out = Matrix::zeros(self.rows, self.cols + other.cols);
        for r in 0..self.rows {
            out.data[r * out.cols..r * out.cols + self.cols].copy_from_slice(self.row(r));
            out.data[r * out.cols + self.cols..(r + 1) * out.cols].copy_from_slice(other.row(r));
        }
        Ok(out)
    }

    /// `(A + A^T) / 2`; requires a square input.
    pub fn symmetrized(&self) -> Matrix {
        assert!(self.is_square(), "symmetrized requires a square matrix");
        let mut out = self.clone();
        for i in 0..self.rows {
            for j in (i + 1)..self.cols {
                let m = 0.5 * (self.get(i, j) + self.get(j, i));
                out.set(i, j, m);
                out.set(j, i, m);
            }
        }
        out
    }

    /// Serializes to the plain text format: a `rows cols` header line, then
    /// one line per row with entries printed to 17 significant digits so the
    /// round-trip is bit-stable.
    pub fn to_text(&self) -> String {
        let mut s = format!("{} {}\n", self.rows, self.cols);
        for r in 0..self.rows {
            let line: Vec<String> = self.row(r).iter().map(|v| format!("{v:.16e}")).collect();
            s.push_str(&line.join(" "));
            s.push('\n');
        }
        s
    }

    /// Parses the text format produced by [`Matrix::to_text`].
    pub fn from_text(text: &str) -> Result<Matrix> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header = lines
            .next()
            .ok_or_else(|| Error::Parse("empty matrix text".into()))?;
        let mut parts = header.split_whitespace();
        let rows: usize = parts
            .next()
            .and_then(|t| t.parse().ok())
            .ok_or_else(|| Error::Parse("bad header row count".into()))?;
        let cols: usize = parts
            .next()
            .and_then(|t| t.parse().ok())
            .ok_or_else(|| Error::Parse("bad header column count".into()))?;
        let mut data = Vec::with_capacity(rows * cols);
        for (i, line) in lines.enumerate() {
            if i >= rows {
                return Err(Error::Parse(format!("more than {rows} data rows")));
            }
            for tok in line.split_whitespace() {
                let v: f64 = tok
                    .parse()
                    .map_err(|_| Error::Parse(format!("bad number {tok:?} in row {i}")))?;
                data.push(v);
            }
        }
        Matrix::new(rows, cols, data)
    }
}

/// Row or column axis selector for [`permute`] and [`select`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Axis {
    Rows,
    Cols,
}

/// A permutation of `{0, ..., n-1}`, stored as the target order: entry `i`
/// of the result is entry `order[i]` of the input.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct PermutationSpec {
    order: Vec<usize>,
}

impl PermutationSpec {
    pub fn new(order: Vec<usize>) -> Result<Self> {
        let n = order.len();
        let mut seen = vec![false; n];
        for &i in &order {
            if i >= n || seen[i] {
                return Err(Error::invalid(format!(
                    "permutation {order:?} is not a bijection on 0..{n}"
                )));
            }
            seen[i] = true;
        }
        Ok(PermutationSpec { order })
    }

    pub fn identity(n: usize) -> Self {
        PermutationSpec {
            order: (0..n).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.order.len()
    }

    pub fn is_empty(&self) -> bool {
        self.order.is_empty()
    }

    pub fn order(&self) -> &[usize] {
        &self.order
    }

    pub fn inverse(&self) -> PermutationSpec {
        let mut inv = vec![0; self.order.len()];
        for (i, &o) in self.order.iter().enumerate() {
            inv[o] = i;
        }
        PermutationSpec { order: inv }
    }

    /// Dense row-permutation matrix `P` with `P X = permute(X, rows)`:
    /// row `i` of `P` is row `order[i]` of the identity.
    pub fn to_row_matrix(&self) -> Matrix {
        let n = self.order.len();
        let mut p = Matrix::zeros(n, n);
        for (i, &o) in self.order.iter().enumerate() {
            p.set(i, o, 1.0);
        }
        p
    }

    /// Dense column-permutation matrix `P` with `X P = permute(X, cols)`:
    /// column `j` of `P` is column `order[j]` of the identity.
    pub fn to_col_matrix(&self) -> Matrix {
        self.to_row_matrix().transpose()
    }
}

/// Reorders rows or columns: entry `i` of the result along the chosen axis is
/// entry `order[i]` of the input, matching the dense products `P X` / `X P`.
pub fn permute(x: &Matrix, p: &PermutationSpec, axis: Axis) -> Result<Matrix> {
    match axis {
        Axis::Rows => {
            if p.len() != x.rows {
                return Err(Error::shape(
                    "permute",
                    format!("order length {} vs {} rows", p.len(), x.rows),
                ));
            }
            Ok(x.take_rows(p.order()))
        }
        Axis::Cols => {
            if p.len() != x.cols {
                return Err(Error::shape(
                    "permute",
                    format!("order length {} vs {} columns", p.len(), x.cols),
                ));
            }
            Ok(x.take_cols(p.order()))
        }
    }
}

/// A 0/1 diagonal mask; masked-out rows or columns are zeroed, not removed.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct SelectionSpec {
    pub mask: Vec<bool>,
}

impl SelectionSpec {
    pub fn new(mask: Vec<bool>) -> Self {
        SelectionSpec { mask }
    }

    pub fn len(&self) -> usize {
        self.mask.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mask.is_empty()
    }

    /// Dense diagonal selection matrix with 1s at kept positions.
    pub fn to_matrix(&self) -> Matrix {
        Matrix::diag(
            &self
                .mask
                .iter()
                .map(|&b| if b { 1.0 } else { 0.0 })
                .collect::<Vec<_>>(),
        )
    }
}

/// Zeroes the masked-out rows (`S X`) or columns (`X S`).
pub fn select(x: &Matrix, s: &SelectionSpec, axis: Axis) -> Result<Matrix> {
    let expect = match axis {
        Axis::Rows => x.rows,
        Axis::Cols => x.cols,
    };
    if s.len() != expect {
        return Err(Error::shape(
            "select",
            format!("mask length {} vs axis length {}", s.len(), expect),
        ));
    }
    let mut out = x.clone();
    match axis {
        Axis::Rows => {
            for (r, &keep) in s.mask.iter().enumerate() {
                if !keep {
                    for c in 0..x.cols {
                        out.set(r, c, 0.0);
                    }
                }
            }
        }
        Axis::Cols => {
            for (c, &keep) in s.mask.iter().enumerate() {
                if !keep {
                    for r in 0..x.rows {
                        out.set(r, c, 0.0);
                    }
                }
            }
        }
    }
    Ok(out)
}

/// Which triangle of the coefficient matrix carries the system.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TriangularShape {
    Upper,
    Lower,
}

/// Solves `T x = b` for triangular `T` by substitution. Entries outside the
/// declared triangle are ignored. A pivot below the singularity tolerance
/// reports the offending index.
pub fn solve_triangular(t: &Matrix, b: &[f64], shape: TriangularShape) -> Result<Vec<f64>> {
    if !t.is_square() {
        return Err(Error::shape(
            "solve_triangular",
            format!("{}x{} is not square", t.rows, t.cols),
        ));
    }
    let n = t.rows;
    if b.len() != n {
        return Err(Error::shape(
            "solve_triangular",
            format!("rhs length {} vs size {n}", b.len()),
        ));
    }
    let max_diag = (0..n).fold(0.0_f64, |m, i| m.max(t.get(i, i).abs()));
    let tol = 1e-12 * f64::max(1.0, max_diag);
    for i in 0..n {
        let d = t.get(i, i);
        if d.abs() <= tol {
            return Err(Error::Singular { index: i, value: d });
        }
    }
    let mut x = vec![0.0; n];
    match shape {
        TriangularShape::Upper => {
            for i in (0..n).rev() {
                let mut s = b[i];
                for j in (i + 1)..n {
                    s -= t.get(i, j) * x[j];
                }
                x[i] = s / t.get(i, i);
            }
        }
        TriangularShape::Lower => {
            for i in 0..n {
                let mut s = b[i];
                for j in 0..i {
                    s -= t.get(i, j) * x[j];
                }
                x[i] = s / t.get(i, i);
            }
        }
    }
    Ok(x)
}

/// Reduced row echelon form with pivot bookkeeping.
#[derive(Clone, Debug, Serialize)]
pub struct RrefResult {
    pub rref: Matrix,
    pub pivot_cols: Vec<usize>,
    pub rank: usize,
}

/// Gauss-Jordan elimination with partial pivoting (largest magnitude in the
/// elimination column). Pivots are normalized to 1 and entries above and
/// below each pivot are zeroed. Entries smaller than the scale-relative
/// tolerance are treated as zero.
pub fn rref(x: &Matrix) -> RrefResult {
    let tol = rank_entry_tolerance(x);
    let mut a = x.clone();
    let (n, p) = (a.rows, a.cols);
    let mut pivot_cols = Vec::new();
    let mut row = 0;
    for col in 0..p {
        if row >= n {
            break;
        }
        // partial pivoting
        let (mut best_row, mut best_val) = (row, a.get(row, col).abs());
        for r in (row + 1)..n {
            let v = a.get(r, col).abs();
            if v > best_val {
                best_row = r;
                best_val = v;
            }
        }
        if best_val <= tol {
            for r in row..n {
                a.set(r, col, 0.0);
            }
            continue;
        }
        if best_row != row {
            for c in 0..p {
                let tmp = a.get(row, c);
                a.set(row, c, a.get(best_row, c));
                a.set(best_row, c, tmp);
            }
        }
        let pivot = a.get(row, col);
        for c in col..p {
            a.set(row, c, a.get(row, c) / pivot);
        }
        a.set(row, col, 1.0);
        for r in 0..n {
            if r == row {
                continue;
            }
            let factor = a.get(r, col);
            if factor == 0.0 {
                continue;
            }
            for c in col..p {
                a.set(r, c, a.get(r, c) - factor * a.get(row, c));
            }
            a.set(r, col, 0.0);
        }
        pivot_cols.push(col);
        row += 1;
    }
    // clean sub-tolerance noise left behind by the eliminations
    for v in a.data.iter_mut() {
        if v.abs() <= tol {
            *v = 0.0;
        }
    }
    let rank = pivot_cols.len();
    RrefResult {
        rref: a,
        pivot_cols,
        rank,
    }
}

/// Matrix rank via `rref` with the scale-relative entry tolerance.
pub fn rank(x: &Matrix) -> usize {
    rref(x).rank
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm2(v: &[f64]) -> f64 {
    dot(v, v).sqrt()
}

pub fn norm_inf(v: &[f64]) -> f64 {
    v.iter().fold(0.0_f64, |m, x| m.max(x.abs()))
}

pub fn sub_vec(a: &[f64], b: &[f64]) -> Vec<f64> {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

pub fn add_vec(a: &[f64], b: &[f64]) -> Vec<f64> {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x + y).collect()
}

pub fn scale_vec(v: &[f64], s: f64) -> Vec<f64> {
    v.iter().map(|x| x * s).collect()
}

/// `dst += alpha * src`
pub fn axpy(dst: &mut [f64], alpha: f64, src: &[f64]) {
    debug_assert_eq!(dst.len(), src.len());
    for (d, &s) in dst.iter_mut().zip(src) {
        *d += alpha * s;
    }
}


#[cfg(test)]
mod prop_tests {
    use super::*;
    use proptest::prelude::*;

    fn small_matrix() -> impl Strategy<Value = Matrix> {
        (1usize..6, 1usize..6).prop_flat_map(|(r, c)| {
            proptest::collection::vec(-100.0..100.0f64, r * c)
                .prop_map(move |data| Matrix::new(r, c, data).unwrap())
        })
    }

    proptest! {
        #[test]
        fn permute_then_inverse_is_identity(x in small_matrix(), seed in 0u64..1000) {
            let mut rng = crate::rng::RngStream::new(seed);
            let p = PermutationSpec::new(rng.shuffled_indices(x.rows)).unwrap();
            let back = permute(&permute(&x, &p, Axis::Rows).unwrap(), &p.inverse(), Axis::Rows).unwrap();
            prop_assert_eq!(back.data.clone(), x.data.clone());
            let q = PermutationSpec::new(rng.shuffled_indices(x.cols)).unwrap();
            let back = permute(&permute(&x, &q, Axis::Cols).unwrap(), &q.inverse(), Axis::Cols).unwrap();
            prop_assert_eq!(back.data, x.data);
        }

        #[test]
        fn rref_rank_never_exceeds_min_dim(x in small_matrix()) {
            let r = rref(&x);
            prop_assert!(r.rank <= x.rows.min(x.cols));
            prop_assert_eq!(r.rank, r.pivot_cols.len());
            let mut sorted = r.pivot_cols.clone();
            sorted.sort_unstable();
            prop_assert_eq!(sorted, r.pivot_cols);
        }

        #[test]
        fn transpose_involution(x in small_matrix()) {
            prop_assert_eq!(x.transpose().transpose().data, x.data);
        }
    }
}
