use crate::linalg::DenseMatrix;

use super::AutodiffError;

/// Dense row-major real tensor.
#[derive(Clone, Debug, PartialEq)]
pub struct Tensor {
    shape: Vec<usize>,
    data: Vec<f64>,
}

impl Tensor {
    pub fn new(shape: &[usize], data: Vec<f64>) -> Result<Self, AutodiffError> {
        let n: usize = shape.iter().product();
        if n != data.len() {
            return Err(AutodiffError::Shape(format!("shape {shape:?} needs {n} entries, got {}", data.len())));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(AutodiffError::NonFinite("tensor construction".into()));
        }
        Ok(Tensor { shape: shape.to_vec(), data })
    }

    pub fn zeros(shape: &[usize]) -> Self {
        Tensor { shape: shape.to_vec(), data: vec![0.0; shape.iter().product()] }
    }

    pub fn scalar(v: f64) -> Self {
        Tensor { shape: vec![1], data: vec![v] }
    }

    pub fn from_matrix(m: &DenseMatrix) -> Self {
        Tensor { shape: vec![m.rows(), m.cols()], data: m.as_slice().to_vec() }
    }

    pub fn to_matrix(&self) -> Result<DenseMatrix, AutodiffError> {
        match self.shape[..] {
            [r, c] => Ok(DenseMatrix::from_vec(r, c, self.data.clone()).expect("tensor data is finite")),
            [n] => Ok(DenseMatrix::from_vec(n, 1, self.data.clone()).expect("tensor data is finite")),
            _ => Err(AutodiffError::Shape(format!("cannot view {:?} as a matrix", self.shape))),
        }
    }

    pub(crate) fn from_parts(shape: Vec<usize>, data: Vec<f64>) -> Self {
        debug_assert_eq!(shape.iter().product::<usize>(), data.len());
        Tensor { shape, data }
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
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

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    /// Value of a one-element tensor.
    pub fn item(&self) -> f64 {
        assert_eq!(self.data.len(), 1, "item() on a tensor of shape {:?}", self.shape);
        self.data[0]
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// Row `i` of a 2-D tensor.
    pub fn row(&self, i: usize) -> &[f64] {
        let c = *self.shape.last().unwrap();
        &self.data[i * c..(i + 1) * c]
    }
}
