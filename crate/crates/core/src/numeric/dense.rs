use rayon::prelude::*;

use super::NumericError;
use crate::scalar::Scalar;

/// Row-major dense matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix<T> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

/// Rows per rayon task in the row-parallel kernels.
const ROW_CHUNK: usize = 64;

impl<T: Scalar> DenseMatrix<T> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![T::zero(); rows * cols] }
    }

    pub fn filled(rows: usize, cols: usize, value: T) -> Self {
        Self { rows, cols, data: vec![value; rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = T::one();
        }
        m
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<T>) -> Result<Self, NumericError> {
        if data.len() != rows * cols {
            return Err(NumericError::ShapeMismatch {
                op: "from_vec",
                left: (rows, cols),
                right: (data.len(), 1),
            });
        }
        Ok(Self { rows, cols, data })
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> T) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self { rows, cols, data }
    }

    /// Builds from nested rows; panics on ragged input.
    pub fn from_rows(rows: &[Vec<T>]) -> Self {
        let cols = rows.first().map_or(0, Vec::len);
        assert!(rows.iter().all(|r| r.len() == cols), "ragged rows");
        Self { rows: rows.len(), cols, data: rows.concat() }
    }

    pub fn row_vector(values: &[T]) -> Self {
        Self { rows: 1, cols: values.len(), data: values.to_vec() }
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    #[inline]
    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    #[inline]
    pub fn as_mut_slice(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<T> {
        self.data
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[T] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, i: usize) -> &mut [T] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn cast<U: Scalar>(&self) -> DenseMatrix<U> {
        DenseMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|v| U::cast_from(v.as_f64())).collect(),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    fn check_same_shape(&self, other: &Self, op: &'static str) -> Result<(), NumericError> {
        if self.shape() != other.shape() {
            return Err(NumericError::ShapeMismatch { op, left: self.shape(), right: other.shape() });
        }
        Ok(())
    }

    /// `self · rhs`.
    pub fn matmul(&self, rhs: &Self) -> Result<Self, NumericError> {
        if self.cols != rhs.rows {
            return Err(NumericError::ShapeMismatch { op: "matmul", left: self.shape(), right: rhs.shape() });
        }
        let (k, m) = (self.cols, rhs.cols);
        let mut out = Self::zeros(self.rows, m);
        if m == 0 {
            return Ok(out);
        }
        out.data
            .par_chunks_mut(m * ROW_CHUNK)
            .enumerate()
            .for_each(|(chunk, block)| {
                for (r, out_row) in block.chunks_mut(m).enumerate() {
                    let i = chunk * ROW_CHUNK + r;
                    let a_row = &self.data[i * k..(i + 1) * k];
                    for (p, &a) in a_row.iter().enumerate() {
                        if a == T::zero() {
                            continue;
                        }
                        let b_row = &rhs.data[p * m..(p + 1) * m];
                        for (o, &b) in out_row.iter_mut().zip(b_row) {
                            *o += a * b;
                        }
                    }
                }
            });
        Ok(out)
    }

    /// `selfᵀ · rhs` without materializing the transpose.
    pub fn t_matmul(&self, rhs: &Self) -> Result<Self, NumericError> {
        if self.rows != rhs.rows {
            return Err(NumericError::ShapeMismatch { op: "t_matmul", left: self.shape(), right: rhs.shape() });
        }
        let (k, m) = (self.cols, rhs.cols);
        let mut out = Self::zeros(k, m);
        for i in 0..self.rows {
            let a_row = self.row(i);
            let b_row = rhs.row(i);
            for (p, &a) in a_row.iter().enumerate() {
                if a == T::zero() {
                    continue;
                }
                let out_row = &mut out.data[p * m..(p + 1) * m];
                for (o, &b) in out_row.iter_mut().zip(b_row) {
                    *o += a * b;
                }
            }
        }
        Ok(out)
    }

    /// `self · rhsᵀ`.
    pub fn matmul_t(&self, rhs: &Self) -> Result<Self, NumericError> {
        if self.cols != rhs.cols {
            return Err(NumericError::ShapeMismatch { op: "matmul_t", left: self.shape(), right: rhs.shape() });
        }
        let m = rhs.rows;
        let mut out = Self::zeros(self.rows, m);
        if m == 0 {
            return Ok(out);
        }
        out.data
            .par_chunks_mut(m * ROW_CHUNK)
            .enumerate()
            .for_each(|(chunk, block)| {
                for (r, out_row) in block.chunks_mut(m).enumerate() {
                    let a_row = self.row(chunk * ROW_CHUNK + r);
                    for (j, o) in out_row.iter_mut().enumerate() {
                        *o = dot(a_row, rhs.row(j));
                    }
                }
            });
        Ok(out)
    }

    pub fn transpose(&self) -> Self {
        let mut out = Self::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                out.data[j * self.rows + i] = self.data[i * self.cols + j];
            }
        }
        out
    }

    pub fn add_assign(&mut self, other: &Self) -> Result<(), NumericError> {
        self.check_same_shape(other, "add_assign")?;
        for (a, &b) in self.data.iter_mut().zip(&other.data) {
            *a += b;
        }
        Ok(())
    }

    pub fn add(&self, other: &Self) -> Result<Self, NumericError> {
        let mut out = self.clone();
        out.add_assign(other)?;
        Ok(out)
    }

    pub fn sub(&self, other: &Self) -> Result<Self, NumericError> {
        self.check_same_shape(other, "sub")?;
        let data = self.data.iter().zip(&other.data).map(|(&a, &b)| a - b).collect();
        Ok(Self { rows: self.rows, cols: self.cols, data })
    }

    /// Elementwise product.
    pub fn hadamard(&self, other: &Self) -> Result<Self, NumericError> {
        self.check_same_shape(other, "hadamard")?;
        let data = self.data.iter().zip(&other.data).map(|(&a, &b)| a * b).collect();
        Ok(Self { rows: self.rows, cols: self.cols, data })
    }

    pub fn scale(&mut self, factor: T) {
        self.data.iter_mut().for_each(|v| *v *= factor);
    }

    pub fn scaled(&self, factor: T) -> Self {
        let mut out = self.clone();
        out.scale(factor);
        out
    }

    pub fn map(&self, f: impl Fn(T) -> T) -> Self {
        Self { rows: self.rows, cols: self.cols, data: self.data.iter().map(|&v| f(v)).collect() }
    }

    pub fn fill(&mut self, value: T) {
        self.data.iter_mut().for_each(|v| *v = value);
    }

    /// Adds a `1 × cols` row vector to every row.
    pub fn add_row_broadcast(&mut self, bias: &Self) -> Result<(), NumericError> {
        if bias.rows != 1 || bias.cols != self.cols {
            return Err(NumericError::ShapeMismatch { op: "add_row_broadcast", left: self.shape(), right: bias.shape() });
        }
        for row in self.data.chunks_mut(self.cols.max(1)) {
            for (v, &b) in row.iter_mut().zip(&bias.data) {
                *v += b;
            }
        }
        Ok(())
    }

    /// Column sums as a `1 × cols` matrix, accumulated in f64.
    pub fn column_sums(&self) -> Self {
        let mut acc = vec![0.0f64; self.cols];
        for i in 0..self.rows {
            for (a, v) in acc.iter_mut().zip(self.row(i)) {
                *a += v.as_f64();
            }
        }
        Self { rows: 1, cols: self.cols, data: acc.into_iter().map(T::cast_from).collect() }
    }

    /// Column means as a `1 × cols` matrix.
    pub fn column_means(&self) -> Self {
        let mut sums = self.column_sums();
        if self.rows > 0 {
            let inv = T::cast_from(1.0 / self.rows as f64);
            sums.scale(inv);
        }
        sums
    }

    /// `[self | other]`.
    pub fn hconcat(&self, other: &Self) -> Result<Self, NumericError> {
        if self.rows != other.rows {
            return Err(NumericError::ShapeMismatch { op: "hconcat", left: self.shape(), right: other.shape() });
        }
        let cols = self.cols + other.cols;
        let mut data = Vec::with_capacity(self.rows * cols);
        for i in 0..self.rows {
            data.extend_from_slice(self.row(i));
            data.extend_from_slice(other.row(i));
        }
        Ok(Self { rows: self.rows, cols, data })
    }

    /// Copies columns `[start, end)`.
    pub fn column_slice(&self, start: usize, end: usize) -> Self {
        assert!(start <= end && end <= self.cols, "column range out of bounds");
        let cols = end - start;
        let mut data = Vec::with_capacity(self.rows * cols);
        for i in 0..self.rows {
            data.extend_from_slice(&self.row(i)[start..end]);
        }
        Self { rows: self.rows, cols, data }
    }

    /// Gathers the given rows in order (repeats allowed).
    pub fn select_rows(&self, indices: &[usize]) -> Self {
        let mut data = Vec::with_capacity(indices.len() * self.cols);
        for &i in indices {
            data.extend_from_slice(self.row(i));
        }
        Self { rows: indices.len(), cols: self.cols, data }
    }

    /// Vertically stacks matrices of equal width.
    pub fn vstack(parts: &[&Self]) -> Result<Self, NumericError> {
        let cols = parts.first().map_or(0, |p| p.cols);
        let mut data = Vec::new();
        let mut rows = 0;
        for p in parts {
            if p.cols != cols {
                return Err(NumericError::ShapeMismatch { op: "vstack", left: (rows, cols), right: p.shape() });
            }
            data.extend_from_slice(&p.data);
            rows += p.rows;
        }
        Ok(Self { rows, cols, data })
    }

    pub fn frobenius_sq(&self) -> f64 {
        self.data.iter().map(|v| v.as_f64() * v.as_f64()).sum()
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        assert_eq!(self.shape(), other.shape(), "max_abs_diff shape mismatch");
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a.as_f64() - b.as_f64()).abs())
            .fold(0.0, f64::max)
    }
}

impl<T> std::ops::Index<(usize, usize)> for DenseMatrix<T> {
    type Output = T;

    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &T {
        debug_assert!(i < self.rows && j < self.cols);
        &self.data[i * self.cols + j]
    }
}

impl<T> std::ops::IndexMut<(usize, usize)> for DenseMatrix<T> {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut T {
        debug_assert!(i < self.rows && j < self.cols);
        &mut self.data[i * self.cols + j]
    }
}

#[inline]
pub fn dot<T: Scalar>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).fold(T::zero(), |acc, (&x, &y)| acc + x * y)
}
