use crate::error::{Error, Result};

/// Dense row-major array of `f64` values.
///
/// Construction through the public API rejects NaN and infinities, so every
/// tensor a caller can observe holds finite values only.
#[derive(Clone, Debug, PartialEq)]
pub struct Tensor {
    shape: Vec<usize>,
    data: Vec<f64>,
}

impl Tensor {
    pub fn new(shape: Vec<usize>, data: Vec<f64>) -> Result<Self> {
        let expected: usize = shape.iter().product();
        if expected != data.len() {
            return Err(Error::dim(
                "tensor",
                format!(
                    "shape {shape:?} holds {expected} values but {} were supplied",
                    data.len()
                ),
            ));
        }
        if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!(
                "tensor construction (element {pos} is {})",
                data[pos]
            )));
        }
        Ok(Self { shape, data })
    }

    /// Rank-2 tensor with `rows` x `cols` entries.
    pub fn matrix(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        Self::new(vec![rows, cols], data)
    }

    /// Rank-0 tensor.
    pub fn scalar(value: f64) -> Result<Self> {
        Self::new(Vec::new(), vec![value])
    }

    pub fn zeros(shape: &[usize]) -> Self {
        let n = shape.iter().product();
        Self {
            shape: shape.to_vec(),
            data: vec![0.0; n],
        }
    }

    pub fn ones(shape: &[usize]) -> Self {
        let n = shape.iter().product();
        Self {
            shape: shape.to_vec(),
            data: vec![1.0; n],
        }
    }

    /// Skips validation. Kernels use this and check finiteness once per op.
    pub(crate) fn from_parts(shape: Vec<usize>, data: Vec<f64>) -> Self {
        debug_assert_eq!(shape.iter().product::<usize>(), data.len());
        Self { shape, data }
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }


    pub(crate) fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn numel(&self) -> usize {
        self.data.len()
    }

    pub fn is_scalar(&self) -> bool {
        self.data.len() == 1
    }

    /// The single value of a one-element tensor.
    pub fn item(&self) -> Result<f64> {
        if self.data.len() == 1 {
            Ok(self.data[0])
        } else {
            Err(Error::Contract(format!(
                "item() on tensor of shape {:?}",
                self.shape
            )))
        }
    }

    /// `(rows, cols)` of a rank-2 tensor.
    pub fn dims2(&self) -> Result<(usize, usize)> {
        match self.shape.as_slice() {
            [r, c] => Ok((*r, *c)),
            other => Err(Error::dim(
                "tensor",
                format!("expected a matrix, found shape {other:?}"),
            )),
        }
    }

    pub fn all_finite(&self) -> bool {
        // Branch-free so it vectorises: a value is non-finite exactly when
        // all exponent bits are set.
        const EXP: u64 = 0x7ff0_0000_0000_0000;
        !self
            .data
            .iter()
            .fold(false, |bad, v| bad | (v.to_bits() & EXP == EXP))
    }
}

/// `op(a) * op(b)` where `op` optionally transposes. Operands are row-major
/// with the stored dimensions given; the result is row-major.
pub(crate) fn gemm(
    a: &[f64],
    (a_rows, a_cols): (usize, usize),
    trans_a: bool,
    b: &[f64],
    (b_rows, b_cols): (usize, usize),
    trans_b: bool,
) -> Result<(usize, usize, Vec<f64>)> {
    let (m, k, rsa, csa) = if trans_a {
        (a_cols, a_rows, 1isize, a_cols as isize)
    } else {
        (a_rows, a_cols, a_cols as isize, 1isize)
    };
    let (k2, n, rsb, csb) = if trans_b {
        (b_cols, b_rows, 1isize, b_cols as isize)
    } else {
        (b_rows, b_cols, b_cols as isize, 1isize)
    };
    if k != k2 {
        return Err(Error::dim(
            "matmul",
            format!(
                "inner dimensions differ: {m}x{k} times {k2}x{n} \
                 (stored {a_rows}x{a_cols}{}, {b_rows}x{b_cols}{})",
                if trans_a { "^T" } else { "" },
                if trans_b { "^T" } else { "" }
            ),
        ));
    }
    let mut c = vec![0.0; m * n];
    if m > 0 && n > 0 && k > 0 {
        // SAFETY: the strides above describe `a`, `b` and `c` exactly; all
        // three buffers are live and `c` does not alias the inputs.
        unsafe {
            matrixmultiply::dgemm(
                m,
                k,
                n,
                1.0,
                a.as_ptr(),
                rsa,
                csa,
                b.as_ptr(),
                rsb,
                csb,
                0.0,
                c.as_mut_ptr(),
                n as isize,
                1,
            );
        }
    }
    Ok((m, n, c))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_non_finite_and_bad_shapes() {
        assert!(matches!(
            Tensor::new(vec![2], vec![1.0, f64::NAN]),
            Err(Error::NonFinite(_))
        ));
        assert!(matches!(
            Tensor::new(vec![2, 2], vec![1.0; 3]),
            Err(Error::Dimension { .. })
        ));
        assert!(Tensor::new(vec![0, 3], vec![]).is_ok());
    }

    #[test]
    fn gemm_transposes() {
        // a = [[1,2,3],[4,5,6]]
        let a = [1.0, 2.0, 3.0, 4.0, 5.0, 6.0];
        let (m, n, c) = gemm(&a, (2, 3), false, &a, (2, 3), true).unwrap();
        assert_eq!((m, n), (2, 2));
        assert_eq!(c, vec![14.0, 32.0, 32.0, 77.0]);
        let (m, n, c) = gemm(&a, (2, 3), true, &a, (2, 3), false).unwrap();
        assert_eq!((m, n), (3, 3));
        assert_eq!(c[0], 17.0);
        assert_eq!(c[8], 45.0);
        assert!(gemm(&a, (2, 3), false, &a, (2, 3), false).is_err());
    }
}
