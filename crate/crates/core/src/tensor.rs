use crate::binary16;
use crate::error::{size_err, Result};
use crate::scalar::{DType, Scalar};

/// Dense row-major n-d array.
///
/// The gradient slot, when present, has the same extent as `data` and
/// accumulates across backward passes until [`Tensor::zero_grad`].
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor<T> {
    shape: Vec<usize>,
    dtype: DType,
    data: Vec<T>,
    grad: Option<Vec<T>>,
}

/// How to populate a new tensor.
pub enum Fill<T> {
    Scalar(T),
    Buffer(Vec<T>),
}

impl<T: Scalar> Tensor<T> {
    pub fn create(shape: &[usize], fill: Fill<T>, dtype: DType) -> Result<Self> {
        let n = shape.iter().product::<usize>();
        let mut data = match fill {
            Fill::Scalar(v) => vec![v; n],
            Fill::Buffer(buf) => {
                if buf.len() != n {
                    return Err(size_err!(
                        "shape {shape:?} holds {n} elements but buffer has {}",
                        buf.len()
                    ));
                }
                buf
            }
        };
        apply_dtype(&mut data, dtype);
        Ok(Self {
            shape: shape.to_vec(),
            dtype,
            data,
            grad: None,
        })
    }

    pub fn from_vec(shape: &[usize], data: Vec<T>) -> Result<Self> {
        Self::create(shape, Fill::Buffer(data), T::DTYPE)
    }

    pub fn zeros(shape: &[usize]) -> Self {
        Self::full(shape, T::zero())
    }

    pub fn full(shape: &[usize], v: T) -> Self {
        Self {
            shape: shape.to_vec(),
            dtype: T::DTYPE,
            data: vec![v; shape.iter().product()],
            grad: None,
        }
    }

    pub fn scalar(v: T) -> Self {
        Self::full(&[1], v)
    }

    pub(crate) fn from_parts(shape: Vec<usize>, data: Vec<T>, dtype: DType) -> Self {
        debug_assert_eq!(shape.iter().product::<usize>(), data.len());
        Self {
            shape,
            dtype,
            data,
            grad: None,
        }
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn dtype(&self) -> DType {
        self.dtype
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<T> {
        self.data
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    /// Extents of an `[N, C, H, W]` tensor.
    pub fn dims4(&self) -> Result<[usize; 4]> {
        match self.shape[..] {
            [n, c, h, w] => Ok([n, c, h, w]),
            _ => Err(size_err!(
                "expected a 4-d tensor, got shape {:?}",
                self.shape
            )),
        }
    }

    pub fn reshape(mut self, shape: &[usize]) -> Result<Self> {
        if shape.iter().product::<usize>() != self.data.len() {
            return Err(size_err!("cannot reshape {:?} into {shape:?}", self.shape));
        }
        self.shape = shape.to_vec();
        Ok(self)
    }

    /// Converts to another storage dtype. Narrowing uses round-to-nearest-even;
    /// non-finite values propagate.
    pub fn cast(&self, to: DType) -> Tensor<T> {
        let mut data = self.data.clone();
        apply_dtype(&mut data, to);
        Tensor {
            shape: self.shape.clone(),
            dtype: to,
            data,
            grad: None,
        }
    }

    pub fn grad(&self) -> Option<&[T]> {
        self.grad.as_deref()
    }

    /// Adds `g` into the gradient slot, creating it on first use.
    pub fn accumulate_grad(&mut self, g: &[T]) -> Result<()> {
        if g.len() != self.data.len() {
            return Err(size_err!(
                "gradient of length {} for tensor of shape {:?}",
                g.len(),
                self.shape
            ));
        }
        match &mut self.grad {
            Some(slot) => slot.iter_mut().zip(g).for_each(|(s, &v)| *s += v),
            None => self.grad = Some(g.to_vec()),
        }
        Ok(())
    }

    pub fn set_grad(&mut self, g: Option<Vec<T>>) {
        if let Some(g) = &g {
            assert_eq!(g.len(), self.data.len(), "gradient extent mismatch");
        }
        self.grad = g;
    }

    pub fn grad_mut(&mut self) -> Option<&mut Vec<T>> {
        self.grad.as_mut()
    }

    pub fn zero_grad(&mut self) {
        self.grad = None;
    }

    /// Element-wise conversion to another scalar type.
    pub fn convert<U: Scalar>(&self) -> Tensor<U> {
        let data = self
            .data
            .iter()
            .map(|v| U::from_f64_lossy(v.as_f64()))
            .collect();
        let dtype = match self.dtype {
            DType::F16E => DType::F16E,
            _ => U::DTYPE,
        };
        Tensor {
            shape: self.shape.clone(),
            dtype,
            data,
            grad: self
                .grad
                .as_ref()
                .map(|g| g.iter().map(|v| U::from_f64_lossy(v.as_f64())).collect()),
        }
    }
}

fn apply_dtype<T: Scalar>(data: &mut [T], dtype: DType) {
    match dtype {
        DType::F64 => {}
        DType::F32 => data.iter_mut().for_each(|v| *v = v.round_f32()),
        DType::F16E => binary16::round_slice(data),
    }
}
