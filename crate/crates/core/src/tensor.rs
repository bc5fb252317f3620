//! Dense row-major tensors, the engine's sole numeric carrier.
//!
//! Only the operations the layers actually need are implemented; there is
//! no broadcasting and no view machinery. Shapes are checked at every
//! boundary and violations surface as [`ShapeError`] rather than panics.

use crate::scalar::Scalar;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ShapeError {
    #[error("data length {data} does not match shape {shape:?} (expects {expected})")]
    DataLength {
        shape: Vec<usize>,
        expected: usize,
        data: usize,
    },
    #[error("shape mismatch in {op}: lhs {lhs:?}, rhs {rhs:?}")]
    Mismatch {
        op: &'static str,
        lhs: Vec<usize>,
        rhs: Vec<usize>,
    },
    #[error("{op} requires rank {expected}, got shape {shape:?}")]
    Rank {
        op: &'static str,
        expected: usize,
        shape: Vec<usize>,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Tensor<S: Scalar> {
    shape: Vec<usize>,
    data: Vec<S>,
}

impl<S: Scalar> Tensor<S> {
    pub fn zeros(shape: &[usize]) -> Self {
        let len = shape.iter().product();
        Tensor {
            shape: shape.to_vec(),
            data: vec![S::zero(); len],
        }
    }

    pub fn filled(shape: &[usize], value: S) -> Self {
        let len = shape.iter().product();
        Tensor {
            shape: shape.to_vec(),
            data: vec![value; len],
        }
    }

    pub fn from_vec(shape: &[usize], data: Vec<S>) -> Result<Self, ShapeError> {
        let expected = shape.iter().product();
        if data.len() != expected {
            return Err(ShapeError::DataLength {
                shape: shape.to_vec(),
                expected,
                data: data.len(),
            });
        }
        Ok(Tensor {
            shape: shape.to_vec(),
            data,
        })
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn rank(&self) -> usize {
        self.shape.len()
    }

    pub fn numel(&self) -> usize {
        self.data.len()
    }

    pub fn data(&self) -> &[S] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [S] {
        &mut self.data
    }

    /// Number of rows when viewed as (rows × cols); rank-2 only.
    pub fn rows(&self) -> usize {
        self.shape[0]
    }

    pub fn cols(&self) -> usize {
        self.shape[self.shape.len() - 1]
    }

    pub fn row(&self, i: usize) -> &[S] {
        let c = self.cols();
        &self.data[i * c..(i + 1) * c]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [S] {
        let c = self.cols();
        &mut self.data[i * c..(i + 1) * c]
    }

    fn require_rank(&self, op: &'static str, rank: usize) -> Result<(), ShapeError> {
        if self.rank() != rank {
            return Err(ShapeError::Rank {
                op,
                expected: rank,
                shape: self.shape.clone(),
            });
        }
        Ok(())
    }

    fn require_same_shape(&self, other: &Self, op: &'static str) -> Result<(), ShapeError> {
        if self.shape != other.shape {
            return Err(ShapeError::Mismatch {
                op,
                lhs: self.shape.clone(),
                rhs: other.shape.clone(),
            });
        }
        Ok(())
    }

    /// C = A·B for A (m×k), B (k×n).
    pub fn matmul(&self, rhs: &Self) -> Result<Self, ShapeError> {
        self.require_rank("matmul", 2)?;
        rhs.require_rank("matmul", 2)?;
        let (m, k) = (self.shape[0], self.shape[1]);
        let (k2, n) = (rhs.shape[0], rhs.shape[1]);
        if k != k2 {
            return Err(ShapeError::Mismatch {
                op: "matmul",
                lhs: self.shape.clone(),
                rhs: rhs.shape.clone(),
            });
        }
        let mut out = Tensor::zeros(&[m, n]);
        for i in 0..m {
            for p in 0..k {
                let a = self.data[i * k + p];
                if a == S::zero() {
                    continue;
                }
                let brow = &rhs.data[p * n..(p + 1) * n];
                let orow = &mut out.data[i * n..(i + 1) * n];
                for j in 0..n {
                    orow[j] += a * brow[j];
                }
            }
        }
        Ok(out)
    }

    /// C = A·Bᵀ for A (m×k), B (n×k).
    pub fn matmul_tb(&self, rhs: &Self) -> Result<Self, ShapeError> {
        self.require_rank("matmul_tb", 2)?;
        rhs.require_rank("matmul_tb", 2)?;
        let (m, k) = (self.shape[0], self.shape[1]);
        let (n, k2) = (rhs.shape[0], rhs.shape[1]);
        if k != k2 {
            return Err(ShapeError::Mismatch {
                op: "matmul_tb",
                lhs: self.shape.clone(),
                rhs: rhs.shape.clone(),
            });
        }
        let mut out = Tensor::zeros(&[m, n]);
        for i in 0..m {
            let arow = &self.data[i * k..(i + 1) * k];
            for j in 0..n {
                let brow = &rhs.data[j * k..(j + 1) * k];
                let mut acc = S::zero();
                for p in 0..k {
                    acc += arow[p] * brow[p];
                }
                out.data[i * n + j] = acc;
            }
        }
        Ok(out)
    }

    /// C = Aᵀ·B for A (k×m), B (k×n).
    pub fn matmul_ta(&self, rhs: &Self) -> Result<Self, ShapeError> {
        self.require_rank("matmul_ta", 2)?;
        rhs.require_rank("matmul_ta", 2)?;
        let (k, m) = (self.shape[0], self.shape[1]);
        let (k2, n) = (rhs.shape[0], rhs.shape[1]);
        if k != k2 {
            return Err(ShapeError::Mismatch {
                op: "matmul_ta",
                lhs: self.shape.clone(),
                rhs: rhs.shape.clone(),
            });
        }
        let mut out = Tensor::zeros(&[m, n]);
        for p in 0..k {
            let arow = &self.data[p * m..(p + 1) * m];
            let brow = &rhs.data[p * n..(p + 1) * n];
            for i in 0..m {
                let a = arow[i];
                if a == S::zero() {
                    continue;
                }
                let orow = &mut out.data[i * n..(i + 1) * n];
                for j in 0..n {
                    orow[j] += a * brow[j];
                }
            }
        }
        Ok(out)
    }

    /// Adds a length-`cols` bias vector to every row of a rank-2 tensor.
    pub fn add_bias_rows(&mut self, bias: &Self) -> Result<(), ShapeError> {
        self.require_rank("add_bias_rows", 2)?;
        if bias.shape != [self.shape[1]] {
            return Err(ShapeError::Mismatch {
                op: "add_bias_rows",
                lhs: self.shape.clone(),
                rhs: bias.shape.clone(),
            });
        }
        let n = self.shape[1];
        for i in 0..self.shape[0] {
            let row = &mut self.data[i * n..(i + 1) * n];
            for j in 0..n {
                row[j] += bias.data[j];
            }
        }
        Ok(())
    }

    pub fn add(&self, other: &Self) -> Result<Self, ShapeError> {
        self.require_same_shape(other, "add")?;
        let data = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(&a, &b)| a + b)
            .collect();
        Ok(Tensor {
            shape: self.shape.clone(),
            data,
        })
    }

    pub fn add_assign(&mut self, other: &Self) -> Result<(), ShapeError> {
        self.require_same_shape(other, "add_assign")?;
        for (a, &b) in self.data.iter_mut().zip(&other.data) {
            *a += b;
        }
        Ok(())
    }

    /// Elementwise (Hadamard) product.
    pub fn hadamard(&self, other: &Self) -> Result<Self, ShapeError> {
        self.require_same_shape(other, "hadamard")?;
        let data = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(&a, &b)| a * b)
            .collect();
        Ok(Tensor {
            shape: self.shape.clone(),
            data,
        })
    }

    pub fn scale(&mut self, s: S) {
        for v in &mut self.data {
            *v *= s;
        }
    }

    pub fn map(&self, f: impl Fn(S) -> S) -> Self {
        Tensor {
            shape: self.shape.clone(),
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    /// Copies timestep `t` of an (m×n×d) tensor into an (m×d) matrix.
    pub fn time_slice(&self, t: usize) -> Result<Self, ShapeError> {
        self.require_rank("time_slice", 3)?;
        let (m, n, d) = (self.shape[0], self.shape[1], self.shape[2]);
        let mut out = Tensor::zeros(&[m, d]);
        for i in 0..m {
            let src = i * n * d + t * d;
            out.data[i * d..(i + 1) * d].copy_from_slice(&self.data[src..src + d]);
        }
        Ok(out)
    }

    /// Writes an (m×d) matrix into timestep `t` of this (m×n×d) tensor.
    pub fn set_time_slice(&mut self, t: usize, slice: &Self) -> Result<(), ShapeError> {
        self.require_rank("set_time_slice", 3)?;
        let (m, n, d) = (self.shape[0], self.shape[1], self.shape[2]);
        if slice.shape != [m, d] {
            return Err(ShapeError::Mismatch {
                op: "set_time_slice",
                lhs: self.shape.clone(),
                rhs: slice.shape.clone(),
            });
        }
        for i in 0..m {
            let dst = i * n * d + t * d;
            self.data[dst..dst + d].copy_from_slice(&slice.data[i * d..(i + 1) * d]);
        }
        Ok(())
    }

    /// Reverses the time axis of an (m×n×d) tensor.
    pub fn reverse_time(&self) -> Result<Self, ShapeError> {
        self.require_rank("reverse_time", 3)?;
        let (m, n, d) = (self.shape[0], self.shape[1], self.shape[2]);
        let mut out = Tensor::zeros(&self.shape);
        for i in 0..m {
            for t in 0..n {
                let src = i * n * d + t * d;
                let dst = i * n * d + (n - 1 - t) * d;
                out.data[dst..dst + d].copy_from_slice(&self.data[src..src + d]);
            }
        }
        Ok(out)
    }

    /// Column-wise concatenation of two rank-2 tensors with equal row counts.
    pub fn concat_cols(&self, other: &Self) -> Result<Self, ShapeError> {
        self.require_rank("concat_cols", 2)?;
        other.require_rank("concat_cols", 2)?;
        if self.shape[0] != other.shape[0] {
            return Err(ShapeError::Mismatch {
                op: "concat_cols",
                lhs: self.shape.clone(),
                rhs: other.shape.clone(),
            });
        }
        let (m, a, b) = (self.shape[0], self.shape[1], other.shape[1]);
        let mut out = Tensor::zeros(&[m, a + b]);
        for i in 0..m {
            out.data[i * (a + b)..i * (a + b) + a].copy_from_slice(self.row(i));
            out.data[i * (a + b) + a..(i + 1) * (a + b)].copy_from_slice(other.row(i));
        }
        Ok(out)
    }

    /// Per-row argmax of a rank-2 tensor; ties break to the lowest index.
    pub fn argmax_rows(&self) -> Vec<usize> {
        let c = self.cols();
        (0..self.shape[0])
            .map(|i| {
                let row = self.row(i);
                let mut best = 0;
                for j in 1..c {
                    if row[j] > row[best] {
                        best = j;
                    }
                }
                best
            })
            .collect()
    }

    pub fn is_all_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn cast<T: Scalar>(&self) -> Tensor<T> {
        Tensor {
            shape: self.shape.clone(),
            data: self.data.iter().map(|v| T::from_f64(v.as_f64())).collect(),
        }
    }

    /// Frobenius norm squared.
    pub fn norm_sq(&self) -> S {
        self.data
            .iter()
            .fold(S::zero(), |acc, &v| acc + v * v)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::Tensor64;

    fn t2(rows: usize, cols: usize, data: &[f64]) -> Tensor64 {
        Tensor::from_vec(&[rows, cols], data.to_vec()).unwrap()
    }

    #[test]
    fn from_vec_rejects_bad_length() {
        let err = Tensor::<f64>::from_vec(&[2, 3], vec![0.0; 5]).unwrap_err();
        assert!(matches!(err, ShapeError::DataLength { expected: 6, .. }));
    }

    #[test]
    fn matmul_small_known_product() {
        let a = t2(2, 3, &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
        let b = t2(3, 2, &[7.0, 8.0, 9.0, 10.0, 11.0, 12.0]);
        let c = a.matmul(&b).unwrap();
        assert_eq!(c.data(), &[58.0, 64.0, 139.0, 154.0]);
    }

    #[test]
    fn transposed_matmuls_agree_with_plain() {
        let a = t2(2, 3, &[1.0, -2.0, 0.5, 3.0, 4.0, -1.0]);
        let b = t2(2, 3, &[0.1, 0.2, 0.3, 0.4, 0.5, 0.6]);
        // a (2x3) · bᵀ (3x2)
        let via_tb = a.matmul_tb(&b).unwrap();
        let bt = t2(3, 2, &[0.1, 0.4, 0.2, 0.5, 0.3, 0.6]);
        assert_eq!(via_tb, a.matmul(&bt).unwrap());
        // aᵀ (3x2) · b (2x3)
        let via_ta = a.matmul_ta(&b).unwrap();
        let at = t2(3, 2, &[1.0, 3.0, -2.0, 4.0, 0.5, -1.0]);
        assert_eq!(via_ta, at.matmul(&b).unwrap());
    }

    #[test]
    fn matmul_inner_dim_mismatch_errors() {
        let a = t2(2, 3, &[0.0; 6]);
        let b = t2(2, 2, &[0.0; 4]);
        assert!(a.matmul(&b).is_err());
    }

    #[test]
    fn time_slice_round_trips() {
        let x = Tensor::from_vec(&[2, 3, 2], (0..12).map(|v| v as f64).collect()).unwrap();
        let s1 = x.time_slice(1).unwrap();
        assert_eq!(s1.data(), &[2.0, 3.0, 8.0, 9.0]);
        let mut y = Tensor64::zeros(&[2, 3, 2]);
        for t in 0..3 {
            y.set_time_slice(t, &x.time_slice(t).unwrap()).unwrap();
        }
        assert_eq!(x, y);
    }

    #[test]
    fn reverse_time_is_involutive() {
        let x = Tensor::from_vec(&[2, 4, 3], (0..24).map(|v| v as f64 * 0.5).collect()).unwrap();
        assert_eq!(x.reverse_time().unwrap().reverse_time().unwrap(), x);
    }

    #[test]
    fn concat_cols_layout() {
        let a = t2(2, 2, &[1.0, 2.0, 3.0, 4.0]);
        let b = t2(2, 1, &[5.0, 6.0]);
        let c = a.concat_cols(&b).unwrap();
        assert_eq!(c.shape(), &[2, 3]);
        assert_eq!(c.data(), &[1.0, 2.0, 5.0, 3.0, 4.0, 6.0]);
    }

    #[test]
    fn argmax_ties_break_low() {
        let x = t2(2, 3, &[0.2, 0.7, 0.1, 0.5, 0.5, 0.5]);
        assert_eq!(x.argmax_rows(), vec![1, 0]);
    }

    #[test]
    fn cast_round_trips_f32_values() {
        let x = t2(1, 3, &[0.5, -1.25, 3.0]);
        let y: Tensor<f32> = x.cast();
        let z: Tensor64 = y.cast();
        assert_eq!(x, z);
    }
}
