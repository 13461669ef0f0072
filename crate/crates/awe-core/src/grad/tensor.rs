//! Dense row-major tensors. Only rank 0 (scalars), 1 (vectors) and 2
//! (matrices) are ever constructed by the models, but shapes are kept general.

use super::real::Real;

#[derive(Clone, Debug, PartialEq)]
pub struct Tensor<P> {
    shape: Vec<usize>,
    data: Vec<P>,
}

impl<P: Real> Tensor<P> {
    pub fn new(shape: Vec<usize>, data: Vec<P>) -> Self {
        assert_eq!(
            shape.iter().product::<usize>(),
            data.len(),
            "tensor data length {} does not match shape {:?}",
            data.len(),
            shape
        );
        Tensor { shape, data }
    }

    pub fn zeros(shape: &[usize]) -> Self {
        Tensor {
            shape: shape.to_vec(),
            data: vec![P::zero(); shape.iter().product()],
        }
    }

    pub fn scalar(v: P) -> Self {
        Tensor {
            shape: vec![],
            data: vec![v],
        }
    }

    pub fn vector(data: Vec<P>) -> Self {
        Tensor {
            shape: vec![data.len()],
            data,
        }
    }

    /// Row-major `rows x cols` matrix.
    pub fn matrix(rows: usize, cols: usize, data: Vec<P>) -> Self {
        Tensor::new(vec![rows, cols], data)
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[P] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [P] {
        &mut self.data
    }

    /// Value of a rank-0 tensor.
    pub fn item(&self) -> P {
        assert!(self.shape.is_empty(), "item() on non-scalar tensor");
        self.data[0]
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn fill(&mut self, v: P) {
        for x in &mut self.data {
            *x = v;
        }
    }

    /// Squared Frobenius norm.
    pub fn sq_norm(&self) -> P {
        self.data.iter().fold(P::zero(), |acc, &v| acc + v * v)
    }

    pub fn map<Q: Real>(&self, f: impl Fn(P) -> Q) -> Tensor<Q> {
        Tensor {
            shape: self.shape.clone(),
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shape_accounting() {
        let t = Tensor::<f64>::matrix(2, 3, vec![1., 2., 3., 4., 5., 6.]);
        assert_eq!(t.shape(), &[2, 3]);
        assert_eq!(t.len(), 6);
        let s = Tensor::<f64>::scalar(4.0);
        assert_eq!(s.shape(), &[] as &[usize]);
        assert_eq!(s.item(), 4.0);
    }

    #[test]
    #[should_panic]
    fn shape_mismatch_panics() {
        let _ = Tensor::<f64>::new(vec![2, 2], vec![0.0; 3]);
    }

    #[test]
    fn finiteness_check() {
        let mut t = Tensor::<f64>::zeros(&[3]);
        assert!(t.all_finite());
        t.data_mut()[1] = f64::NAN;
        assert!(!t.all_finite());
    }
}
