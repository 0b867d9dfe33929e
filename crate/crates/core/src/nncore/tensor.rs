use serde::{Deserialize, Serialize};

use super::NnError;

/// Dense row-major matrix of `f64`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tensor {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Tensor {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Tensor {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn filled(rows: usize, cols: usize, value: f64) -> Self {
        Tensor {
            rows,
            cols,
            data: vec![value; rows * cols],
        }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self, NnError> {
        if data.len() != rows * cols {
            return Err(NnError::ShapeMismatch {
                op: "from_vec",
                left: (rows, cols),
                right: (data.len(), 1),
            });
        }
        Ok(Tensor { rows, cols, data })
    }

    pub fn scalar(v: f64) -> Self {
        Tensor {
            rows: 1,
            cols: 1,
            data: vec![v],
        }
    }

    /// A single row.
    pub fn row(values: &[f64]) -> Self {
        Tensor {
            rows: 1,
            cols: values.len(),
            data: values.to_vec(),
        }
    }

    /// A single column.
    pub fn column(values: &[f64]) -> Self {
        Tensor {
            rows: values.len(),
            cols: 1,
            data: values.to_vec(),
        }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self, NnError> {
        let cols = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            if r.len() != cols {
                return Err(NnError::ShapeMismatch {
                    op: "from_rows",
                    left: (rows.len(), cols),
                    right: (1, r.len()),
                });
            }
            data.extend_from_slice(r);
        }
        Ok(Tensor {
            rows: rows.len(),
            cols,
            data,
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        self.data[r * self.cols + c] = v;
    }

    pub fn row_slice(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn row_slice_mut(&mut self, r: usize) -> &mut [f64] {
        &mut self.data[r * self.cols..(r + 1) * self.cols]
    }

    /// Value of a 1×1 tensor.
    pub fn item(&self) -> f64 {
        debug_assert_eq!(self.data.len(), 1);
        self.data[0]
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Tensor {
        Tensor {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    pub(crate) fn add_assign(&mut self, other: &Tensor) {
        debug_assert_eq!(self.shape(), other.shape());
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += b;
        }
    }

    pub(crate) fn check_same(&self, other: &Tensor, op: &'static str) -> Result<(), NnError> {
        if self.shape() != other.shape() {
            return Err(NnError::ShapeMismatch {
                op,
                left: self.shape(),
                right: other.shape(),
            });
        }
        Ok(())
    }
}

// Kernels shared by the taped and eager paths.

/// `a · b`
pub(crate) fn matmul(a: &Tensor, b: &Tensor) -> Result<Tensor, NnError> {
    if a.cols != b.rows {
        return Err(NnError::ShapeMismatch {
            op: "matmul",
            left: a.shape(),
            right: b.shape(),
        });
    }
    let (n, k, m) = (a.rows, a.cols, b.cols);
    let mut out = vec![0.0; n * m];
    for i in 0..n {
        let a_row = &a.data[i * k..(i + 1) * k];
        let o_row = &mut out[i * m..(i + 1) * m];
        for (p, &x) in a_row.iter().enumerate() {
            if x == 0.0 {
                continue;
            }
            let b_row = &b.data[p * m..(p + 1) * m];
            for (o, &y) in o_row.iter_mut().zip(b_row) {
                *o += x * y;
            }
        }
    }
    Ok(Tensor {
        rows: n,
        cols: m,
        data: out,
    })
}

/// `aᵀ · b`
pub(crate) fn matmul_tn(a: &Tensor, b: &Tensor) -> Tensor {
    debug_assert_eq!(a.rows, b.rows);
    let (k, m) = (a.cols, b.cols);
    let mut out = vec![0.0; k * m];
    for i in 0..a.rows {
        let a_row = &a.data[i * k..(i + 1) * k];
        let b_row = &b.data[i * m..(i + 1) * m];
        for (p, &x) in a_row.iter().enumerate() {
            if x == 0.0 {
                continue;
            }
            let o_row = &mut out[p * m..(p + 1) * m];
            for (o, &y) in o_row.iter_mut().zip(b_row) {
                *o += x * y;
            }
        }
    }
    Tensor {
        rows: k,
        cols: m,
        data: out,
    }
}

/// `a · bᵀ`
pub(crate) fn matmul_nt(a: &Tensor, b: &Tensor) -> Tensor {
    debug_assert_eq!(a.cols, b.cols);
    let (n, k, c) = (a.rows, b.rows, a.cols);
    let mut out = vec![0.0; n * k];
    for i in 0..n {
        let a_row = &a.data[i * c..(i + 1) * c];
        for p in 0..k {
            let b_row = &b.data[p * c..(p + 1) * c];
            out[i * k + p] = a_row.iter().zip(b_row).map(|(x, y)| x * y).sum();
        }
    }
    Tensor {
        rows: n,
        cols: k,
        data: out,
    }
}

pub(crate) fn add_bias(x: &Tensor, b: &Tensor) -> Result<Tensor, NnError> {
    if b.rows != 1 || b.cols != x.cols {
        return Err(NnError::ShapeMismatch {
            op: "add_bias",
            left: x.shape(),
            right: b.shape(),
        });
    }
    let mut out = x.clone();
    for r in 0..out.rows {
        for (o, &v) in out.row_slice_mut(r).iter_mut().zip(&b.data) {
            *o += v;
        }
    }
    Ok(out)
}

pub(crate) fn leaky_relu(x: &Tensor, slope: f64) -> Tensor {
    x.map(|v| if v > 0.0 { v } else { slope * v })
}

pub(crate) fn zip(a: &Tensor, b: &Tensor, op: &'static str, f: impl Fn(f64, f64) -> f64) -> Result<Tensor, NnError> {
    a.check_same(b, op)?;
    Ok(Tensor {
        rows: a.rows,
        cols: a.cols,
        data: a.data.iter().zip(&b.data).map(|(&x, &y)| f(x, y)).collect(),
    })
}

pub(crate) fn concat_cols(a: &Tensor, b: &Tensor) -> Result<Tensor, NnError> {
    if a.rows != b.rows {
        return Err(NnError::ShapeMismatch {
            op: "concat",
            left: a.shape(),
            right: b.shape(),
        });
    }
    let cols = a.cols + b.cols;
    let mut data = Vec::with_capacity(a.rows * cols);
    for r in 0..a.rows {
        data.extend_from_slice(a.row_slice(r));
        data.extend_from_slice(b.row_slice(r));
    }
    Ok(Tensor {
        rows: a.rows,
        cols,
        data,
    })
}

pub(crate) fn gather_rows(x: &Tensor, index: &[usize]) -> Result<Tensor, NnError> {
    let mut data = Vec::with_capacity(index.len() * x.cols);
    for &r in index {
        if r >= x.rows {
            return Err(NnError::IndexOutOfRange { index: r, len: x.rows });
        }
        data.extend_from_slice(x.row_slice(r));
    }
    Ok(Tensor {
        rows: index.len(),
        cols: x.cols,
        data,
    })
}

/// `out[segment[i]] += x[i]` over rows.
pub(crate) fn segment_sum(x: &Tensor, segment: &[usize], segments: usize) -> Result<Tensor, NnError> {
    if segment.len() != x.rows {
        return Err(NnError::ShapeMismatch {
            op: "segment_sum",
            left: x.shape(),
            right: (segment.len(), 1),
        });
    }
    let mut out = Tensor::zeros(segments, x.cols);
    for (r, &s) in segment.iter().enumerate() {
        if s >= segments {
            return Err(NnError::IndexOutOfRange { index: s, len: segments });
        }
        let src = &x.data[r * x.cols..(r + 1) * x.cols];
        for (o, &v) in out.row_slice_mut(s).iter_mut().zip(src) {
            *o += v;
        }
    }
    Ok(out)
}

pub(crate) fn segment_counts(segment: &[usize], segments: usize) -> Vec<f64> {
    let mut counts = vec![0.0; segments];
    for &s in segment {
        counts[s] += 1.0;
    }
    counts
}

pub(crate) fn scale_rows(x: &Tensor, factors: &[f64]) -> Tensor {
    let mut out = x.clone();
    for (r, &f) in factors.iter().enumerate() {
        for v in out.row_slice_mut(r) {
            *v *= f;
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t(rows: usize, cols: usize, data: &[f64]) -> Tensor {
        Tensor::from_vec(rows, cols, data.to_vec()).unwrap()
    }

    #[test]
    fn matmul_variants_agree() {
        let a = t(2, 3, &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
        let b = t(3, 2, &[7.0, 8.0, 9.0, 10.0, 11.0, 12.0]);
        let ab = matmul(&a, &b).unwrap();
        assert_eq!(ab.data(), &[58.0, 64.0, 139.0, 154.0]);
        let at = t(3, 2, &[1.0, 4.0, 2.0, 5.0, 3.0, 6.0]);
        assert_eq!(matmul_tn(&a, &ab), matmul(&at, &ab).unwrap());
        let bt = t(2, 3, &[7.0, 9.0, 11.0, 8.0, 10.0, 12.0]);
        assert_eq!(matmul_nt(&a, &bt), ab);
        assert!(matmul(&a, &a).is_err());
    }

    #[test]
    fn segment_ops() {
        let x = t(3, 2, &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
        let s = segment_sum(&x, &[1, 0, 1], 2).unwrap();
        assert_eq!(s.data(), &[3.0, 4.0, 6.0, 8.0]);
        let g = gather_rows(&x, &[2, 2, 0]).unwrap();
        assert_eq!(g.data(), &[5.0, 6.0, 5.0, 6.0, 1.0, 2.0]);
        assert!(gather_rows(&x, &[3]).is_err());
    }

    #[test]
    fn leaky_relu_definition() {
        let y = leaky_relu(&Tensor::row(&[-1.0, 2.0]), 0.01);
        assert_eq!(y.data(), &[-0.01, 2.0]);
    }
}
