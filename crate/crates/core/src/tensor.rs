//! Dense complex tensors with pairwise contraction.
//!
//! Storage is a flat row-major `Vec<Complex64>`. Contraction is implemented
//! as transpose + reshape + matrix multiply; axis labels are advisory
//! metadata and never affect which axes get paired.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct DenseTensor {
    shape: Vec<usize>,
    data: Vec<Complex64>,
    labels: Option<Vec<String>>,
}

impl DenseTensor {
    /// Build a tensor from a flat row-major buffer.
    pub fn new(shape: Vec<usize>, data: Vec<Complex64>) -> Result<Self> {
        let len: usize = shape.iter().product();
        if len != data.len() {
            return Err(Error::ReshapeSizeMismatch {
                from: data.len(),
                to: len,
            });
        }
        Ok(Self {
            shape,
            data,
            labels: None,
        })
    }

    pub fn zeros(shape: Vec<usize>) -> Self {
        let len = shape.iter().product();
        Self {
            shape,
            data: vec![Complex64::ZERO; len],
            labels: None,
        }
    }

    pub fn from_fn(shape: Vec<usize>, mut f: impl FnMut(&[usize]) -> Complex64) -> Self {
        let len: usize = shape.iter().product();
        let mut data = Vec::with_capacity(len);
        let mut idx = vec![0usize; shape.len()];
        for _ in 0..len {
            data.push(f(&idx));
            increment_index(&mut idx, &shape);
        }
        Self {
            shape,
            data,
            labels: None,
        }
    }

    /// Rank-2 identity of size `n`.
    pub fn identity(n: usize) -> Self {
        Self::from_fn(vec![n, n], |ix| {
            if ix[0] == ix[1] {
                Complex64::ONE
            } else {
                Complex64::ZERO
            }
        })
    }

    /// Rank-0 tensor holding a single value.
    pub fn scalar_tensor(value: Complex64) -> Self {
        Self {
            shape: vec![],
            data: vec![value],
            labels: None,
        }
    }

    pub fn with_labels(mut self, labels: Vec<String>) -> Result<Self> {
        if labels.len() != self.shape.len() {
            return Err(Error::ShapeMismatch {
                expected: format!("{} labels", self.shape.len()),
                got: format!("{}", labels.len()),
            });
        }
        self.labels = Some(labels);
        Ok(self)
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn rank(&self) -> usize {
        self.shape.len()
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[Complex64] {
        &self.data
    }

    pub fn labels(&self) -> Option<&[String]> {
        self.labels.as_deref()
    }

    /// Value of a rank-0 (or single-element) tensor.
    pub fn scalar(&self) -> Result<Complex64> {
        if self.data.len() == 1 {
            Ok(self.data[0])
        } else {
            Err(Error::ShapeMismatch {
                expected: "scalar".into(),
                got: format!("{:?}", self.shape),
            })
        }
    }

    pub fn get(&self, index: &[usize]) -> Complex64 {
        self.data[self.flat_index(index)]
    }

    pub fn set(&mut self, index: &[usize], value: Complex64) {
        let flat = self.flat_index(index);
        self.data[flat] = value;
    }

    fn flat_index(&self, index: &[usize]) -> usize {
        debug_assert_eq!(index.len(), self.shape.len());
        let mut flat = 0;
        for (i, &ix) in index.iter().enumerate() {
            debug_assert!(ix < self.shape[i]);
            flat = flat * self.shape[i] + ix;
        }
        flat
    }

    pub fn conj(&self) -> Self {
        Self {
            shape: self.shape.clone(),
            data: self.data.iter().map(|z| z.conj()).collect(),
            labels: self.labels.clone(),
        }
    }

    pub fn scale(&self, factor: Complex64) -> Self {
        Self {
            shape: self.shape.clone(),
            data: self.data.iter().map(|z| z * factor).collect(),
            labels: self.labels.clone(),
        }
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        if self.shape != other.shape {
            return Err(Error::ShapeMismatch {
                expected: format!("{:?}", self.shape),
                got: format!("{:?}", other.shape),
            });
        }
        let data = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| a + b)
            .collect();
        Ok(Self {
            shape: self.shape.clone(),
            data,
            labels: None,
        })
    }

    /// Sum over paired axes; result axes are the unpaired axes of `self`
    /// followed by the unpaired axes of `other`.
    pub fn contract(&self, other: &Self, pairs: &[(usize, usize)]) -> Result<Self> {
        let mut seen_a = vec![false; self.rank()];
        let mut seen_b = vec![false; other.rank()];
        for &(ax_a, ax_b) in pairs {
            if ax_a >= self.rank() {
                return Err(Error::AxisOutOfRange {
                    axis: ax_a,
                    rank: self.rank(),
                });
            }
            if ax_b >= other.rank() {
                return Err(Error::AxisOutOfRange {
                    axis: ax_b,
                    rank: other.rank(),
                });
            }
            if seen_a[ax_a] {
                return Err(Error::RepeatedAxis { axis: ax_a });
            }
            if seen_b[ax_b] {
                return Err(Error::RepeatedAxis { axis: ax_b });
            }
            seen_a[ax_a] = true;
            seen_b[ax_b] = true;
            if self.shape[ax_a] != other.shape[ax_b] {
                return Err(Error::AxisLengthMismatch {
                    left: self.shape[ax_a],
                    right: other.shape[ax_b],
                });
            }
        }

        let free_a: Vec<usize> = (0..self.rank()).filter(|&ax| !seen_a[ax]).collect();
        let free_b: Vec<usize> = (0..other.rank()).filter(|&ax| !seen_b[ax]).collect();

        // Permute contracted axes to the back of a / front of b, in pair order.
        let perm_a: Vec<usize> = free_a
            .iter()
            .chain(pairs.iter().map(|(ax_a, _)| ax_a))
            .copied()
            .collect();
        let perm_b: Vec<usize> = pairs
            .iter()
            .map(|(_, ax_b)| *ax_b)
            .chain(free_b.iter().copied())
            .collect();

        let m: usize = free_a.iter().map(|&ax| self.shape[ax]).product();
        let k: usize = pairs.iter().map(|&(ax_a, _)| self.shape[ax_a]).product();
        let n: usize = free_b.iter().map(|&ax| other.shape[ax]).product();

        let a_mat = self.transpose(&perm_a)?;
        let b_mat = other.transpose(&perm_b)?;
        let out = matmul(&a_mat.data, &b_mat.data, m, k, n);

        let mut out_shape: Vec<usize> = free_a.iter().map(|&ax| self.shape[ax]).collect();
        out_shape.extend(free_b.iter().map(|&ax| other.shape[ax]));

        let labels = match (&self.labels, &other.labels) {
            (Some(la), Some(lb)) => {
                let mut l: Vec<String> = free_a.iter().map(|&ax| la[ax].clone()).collect();
                l.extend(free_b.iter().map(|&ax| lb[ax].clone()));
                Some(l)
            }
            _ => None,
        };

        Ok(Self {
            shape: out_shape,
            data: out,
            labels,
        })
    }

    /// Reorder axes: result axis `k` is input axis `perm[k]`.
    pub fn transpose(&self, perm: &[usize]) -> Result<Self> {
        let rank = self.rank();
        let mut seen = vec![false; rank];
        if perm.len() != rank || perm.iter().any(|&p| p >= rank || std::mem::replace(&mut seen[p], true)) {
            return Err(Error::InvalidPermutation {
                perm: perm.to_vec(),
                rank,
            });
        }
        if perm.iter().enumerate().all(|(i, &p)| i == p) {
            return Ok(self.clone());
        }

        let in_strides = row_major_strides(&self.shape);
        let out_shape: Vec<usize> = perm.iter().map(|&p| self.shape[p]).collect();
        let out_strides_in: Vec<usize> = perm.iter().map(|&p| in_strides[p]).collect();

        let mut data = vec![Complex64::ZERO; self.data.len()];
        let mut idx = vec![0usize; rank];
        let mut in_flat = 0usize;
        for slot in data.iter_mut() {
            *slot = self.data[in_flat];
            // Increment the output multi-index, tracking the input offset.
            for ax in (0..rank).rev() {
                idx[ax] += 1;
                in_flat += out_strides_in[ax];
                if idx[ax] < out_shape[ax] {
                    break;
                }
                in_flat -= out_strides_in[ax] * out_shape[ax];
                idx[ax] = 0;
            }
        }

        let labels = self
            .labels
            .as_ref()
            .map(|l| perm.iter().map(|&p| l[p].clone()).collect());
        Ok(Self {
            shape: out_shape,
            data,
            labels,
        })
    }

    /// Reinterpret the flat buffer under a new shape of equal size.
    pub fn reshape(&self, new_shape: &[usize]) -> Result<Self> {
        let new_len: usize = new_shape.iter().product();
        if new_len != self.data.len() {
            return Err(Error::ReshapeSizeMismatch {
                from: self.data.len(),
                to: new_len,
            });
        }
        Ok(Self {
            shape: new_shape.to_vec(),
            data: self.data.clone(),
            labels: None,
        })
    }

    /// Trace of a square rank-2 tensor.
    pub fn trace(&self) -> Result<Complex64> {
        if self.rank() != 2 || self.shape[0] != self.shape[1] {
            return Err(Error::ShapeMismatch {
                expected: "square matrix".into(),
                got: format!("{:?}", self.shape),
            });
        }
        let n = self.shape[0];
        Ok((0..n).map(|i| self.data[i * n + i]).sum())
    }

    /// View a rank-2 tensor as a nalgebra matrix.
    pub fn to_matrix(&self) -> Result<DMatrix<Complex64>> {
        if self.rank() != 2 {
            return Err(Error::ShapeMismatch {
                expected: "rank-2 tensor".into(),
                got: format!("rank-{}", self.rank()),
            });
        }
        let (rows, cols) = (self.shape[0], self.shape[1]);
        Ok(DMatrix::from_fn(rows, cols, |r, c| self.data[r * cols + c]))
    }

    pub fn from_matrix(m: &DMatrix<Complex64>) -> Self {
        let (rows, cols) = m.shape();
        Self::from_fn(vec![rows, cols], |ix| m[(ix[0], ix[1])])
    }
}

fn row_major_strides(shape: &[usize]) -> Vec<usize> {
    let mut strides = vec![1usize; shape.len()];
    for ax in (0..shape.len().saturating_sub(1)).rev() {
        strides[ax] = strides[ax + 1] * shape[ax + 1];
    }
    strides
}

fn increment_index(idx: &mut [usize], shape: &[usize]) {
    for ax in (0..shape.len()).rev() {
        idx[ax] += 1;
        if idx[ax] < shape[ax] {
            return;
        }
        idx[ax] = 0;
    }
}

fn matmul(a: &[Complex64], b: &[Complex64], m: usize, k: usize, n: usize) -> Vec<Complex64> {
    let mut out = vec![Complex64::ZERO; m * n];
    for i in 0..m {
        for kk in 0..k {
            let aik = a[i * k + kk];
            if aik == Complex64::ZERO {
                continue;
            }
            let brow = &b[kk * n..(kk + 1) * n];
            let orow = &mut out[i * n..(i + 1) * n];
            for (o, &bv) in orow.iter_mut().zip(brow) {
                *o += aik * bv;
            }
        }
    }
    out
}
