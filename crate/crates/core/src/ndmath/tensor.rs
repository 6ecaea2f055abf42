use super::MathError;

/// Dense row-major `f64` tensor of rank 1 or 2.
///
/// Vectors have shape `[n]`, matrices `[rows, cols]`, and scalars are
/// represented as `[1]` vectors. Equality is exact bitwise equality of
/// shape and data, which the state-locality and determinism tests rely
/// on.
#[derive(Clone, Debug, PartialEq)]
pub struct Tensor {
    shape: Vec<usize>,
    data: Vec<f64>,
}

impl Tensor {
    /// Zero-filled tensor. `shape` must be rank 1 or 2.
    pub fn zeros(shape: &[usize]) -> Tensor {
        assert!(
            shape.len() == 1 || shape.len() == 2,
            "tensor rank must be 1 or 2, got {shape:?}"
        );
        Tensor {
            shape: shape.to_vec(),
            data: vec![0.0; shape.iter().product()],
        }
    }

    /// Build from raw parts, validating that `data` fills `shape`.
    pub fn from_vec(shape: &[usize], data: Vec<f64>) -> Result<Tensor, MathError> {
        if shape.is_empty() || shape.len() > 2 {
            return Err(MathError::domain(
                "from_vec",
                format!("rank must be 1 or 2, got {shape:?}"),
            ));
        }
        let expected: usize = shape.iter().product();
        if expected != data.len() {
            return Err(MathError::domain(
                "from_vec",
                format!("shape {shape:?} wants {expected} values, got {}", data.len()),
            ));
        }
        Ok(Tensor {
            shape: shape.to_vec(),
            data,
        })
    }

    /// Scalar as a 1-element vector.
    pub fn scalar(v: f64) -> Tensor {
        Tensor {
            shape: vec![1],
            data: vec![v],
        }
    }

    pub fn vector(data: Vec<f64>) -> Tensor {
        Tensor {
            shape: vec![data.len()],
            data,
        }
    }

    pub fn matrix(rows: usize, cols: usize, data: Vec<f64>) -> Result<Tensor, MathError> {
        Tensor::from_vec(&[rows, cols], data)
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

    /// Total number of elements.
    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn is_scalar(&self) -> bool {
        self.data.len() == 1
    }

    pub fn is_vector(&self) -> bool {
        self.shape.len() == 1
    }

    pub fn is_matrix(&self) -> bool {
        self.shape.len() == 2
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// First element; panics if empty. Mostly for scalar tensors.
    pub fn item(&self) -> f64 {
        self.data[0]
    }

    fn mismatch(&self, other: &Tensor, op: &'static str) -> MathError {
        MathError::ShapeMismatch {
            op,
            left: self.shape.clone(),
            right: other.shape.clone(),
        }
    }

    /// Matrix-vector product. `self` must be `[m, n]`, `x` must be `[n]`.
    pub fn matvec(&self, x: &Tensor) -> Result<Tensor, MathError> {
        if self.shape.len() != 2 || x.shape.len() != 1 || self.shape[1] != x.shape[0] {
            return Err(self.mismatch(x, "matvec"));
        }
        let (m, n) = (self.shape[0], self.shape[1]);
        let mut out = vec![0.0; m];
        for i in 0..m {
            let row = &self.data[i * n..(i + 1) * n];
            out[i] = row.iter().zip(&x.data).map(|(a, b)| a * b).sum();
        }
        Ok(Tensor::vector(out))
    }

    /// Transposed matrix-vector product `self^T * y` without
    /// materializing the transpose. `self` must be `[m, n]`, `y` `[m]`.
    pub fn matvec_t(&self, y: &Tensor) -> Result<Tensor, MathError> {
        if self.shape.len() != 2 || y.shape.len() != 1 || self.shape[0] != y.shape[0] {
            return Err(self.mismatch(y, "matvec_t"));
        }
        let (m, n) = (self.shape[0], self.shape[1]);
        let mut out = vec![0.0; n];
        for i in 0..m {
            let row = &self.data[i * n..(i + 1) * n];
            let yi = y.data[i];
            for j in 0..n {
                out[j] += row[j] * yi;
            }
        }
        Ok(Tensor::vector(out))
    }

    /// Outer product of two vectors: `[m] x [n] -> [m, n]`.
    pub fn outer(a: &Tensor, b: &Tensor) -> Result<Tensor, MathError> {
        if a.shape.len() != 1 || b.shape.len() != 1 {
            return Err(a.mismatch(b, "outer"));
        }
        let (m, n) = (a.data.len(), b.data.len());
        let mut out = vec![0.0; m * n];
        for i in 0..m {
            for j in 0..n {
                out[i * n + j] = a.data[i] * b.data[j];
            }
        }
        Tensor::from_vec(&[m, n], out)
    }

    fn zip(&self, other: &Tensor, op: &'static str, f: impl Fn(f64, f64) -> f64) -> Result<Tensor, MathError> {
        if self.shape != other.shape {
            return Err(self.mismatch(other, op));
        }
        let data = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(&a, &b)| f(a, b))
            .collect();
        Ok(Tensor {
            shape: self.shape.clone(),
            data,
        })
    }

    pub fn add(&self, other: &Tensor) -> Result<Tensor, MathError> {
        self.zip(other, "add", |a, b| a + b)
    }

    pub fn sub(&self, other: &Tensor) -> Result<Tensor, MathError> {
        self.zip(other, "sub", |a, b| a - b)
    }

    /// Elementwise product.
    pub fn hadamard(&self, other: &Tensor) -> Result<Tensor, MathError> {
        self.zip(other, "hadamard", |a, b| a * b)
    }

    /// In-place `self += other`; shapes must already match.
    pub fn add_assign(&mut self, other: &Tensor) {
        debug_assert_eq!(self.shape, other.shape);
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += b;
        }
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Tensor {
        Tensor {
            shape: self.shape.clone(),
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn scale(&self, c: f64) -> Tensor {
        self.map(|v| c * v)
    }

    pub fn tanh(&self) -> Tensor {
        self.map(f64::tanh)
    }

    /// Elementwise logistic sigmoid.
    pub fn sigmoid(&self) -> Tensor {
        self.map(sigmoid)
    }

    pub fn dot(&self, other: &Tensor) -> Result<f64, MathError> {
        if self.shape.len() != 1 || self.shape != other.shape {
            return Err(self.mismatch(other, "dot"));
        }
        Ok(self.data.iter().zip(&other.data).map(|(a, b)| a * b).sum())
    }

    /// Euclidean norm over all elements.
    pub fn norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// Numerically stable softmax over a nonempty finite vector. The
    /// running max is subtracted before exponentiation so large inputs
    /// cannot overflow.
    pub fn softmax(&self) -> Result<Tensor, MathError> {
        if self.shape.len() != 1 || self.data.is_empty() {
            return Err(MathError::domain(
                "softmax",
                format!("wants a nonempty vector, got shape {:?}", self.shape),
            ));
        }
        if !self.is_finite() {
            return Err(MathError::NonFinite { op: "softmax" });
        }
        let max = self.data.iter().fold(f64::NEG_INFINITY, |m, &v| m.max(v));
        let exps: Vec<f64> = self.data.iter().map(|&v| (v - max).exp()).collect();
        let sum: f64 = exps.iter().sum();
        Ok(Tensor::vector(exps.iter().map(|&e| e / sum).collect()))
    }
}

/// Scalar logistic sigmoid, stable for large |x|.
pub(crate) fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Scalar log-sigmoid, `ln(sigmoid(x))`, stable for large |x|.
pub(crate) fn log_sigmoid(x: f64) -> f64 {
    // min(x, 0) - ln(1 + exp(-|x|))
    x.min(0.0) - (-x.abs()).exp().ln_1p()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn matvec_identity_and_zero() {
        let eye = Tensor::matrix(3, 3, vec![1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0]).unwrap();
        let x = Tensor::vector(vec![1.0, 2.0, 3.0]);
        assert_eq!(eye.matvec(&x).unwrap(), x);

        let zero = Tensor::zeros(&[2, 3]);
        assert_eq!(zero.matvec(&x).unwrap(), Tensor::zeros(&[2]));
    }

    #[test]
    fn matvec_by_hand() {
        let w = Tensor::matrix(2, 3, vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]).unwrap();
        let x = Tensor::vector(vec![1.0, 1.0, 1.0]);
        assert_eq!(w.matvec(&x).unwrap(), Tensor::vector(vec![6.0, 15.0]));
    }

    #[test]
    fn matvec_shape_error_names_both_shapes() {
        let w = Tensor::zeros(&[2, 3]);
        let x = Tensor::zeros(&[4]);
        let err = w.matvec(&x).unwrap_err();
        match err {
            MathError::ShapeMismatch { op, left, right } => {
                assert_eq!(op, "matvec");
                assert_eq!(left, vec![2, 3]);
                assert_eq!(right, vec![4]);
            }
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn matvec_t_is_transpose_product() {
        let w = Tensor::matrix(2, 3, vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]).unwrap();
        let y = Tensor::vector(vec![1.0, 10.0]);
        // W^T y = [1+40, 2+50, 3+60]
        assert_eq!(w.matvec_t(&y).unwrap(), Tensor::vector(vec![41.0, 52.0, 63.0]));
    }

    #[test]
    fn elementwise_ops() {
        let a = Tensor::vector(vec![1.0, 2.0]);
        let b = Tensor::vector(vec![3.0, 4.0]);
        assert_eq!(a.add(&b).unwrap(), Tensor::vector(vec![4.0, 6.0]));
        assert_eq!(a.sub(&b).unwrap(), Tensor::vector(vec![-2.0, -2.0]));
        assert_eq!(a.hadamard(&b).unwrap(), Tensor::vector(vec![3.0, 8.0]));
        assert!(matches!(
            a.add(&Tensor::zeros(&[3])),
            Err(MathError::ShapeMismatch { op: "add", .. })
        ));
    }

    #[test]
    fn activations_at_known_points() {
        let x = Tensor::vector(vec![0.0]);
        assert_eq!(x.tanh(), Tensor::vector(vec![0.0]));
        assert_eq!(x.sigmoid(), Tensor::vector(vec![0.5]));

        // Saturation stays finite and pinned to the asymptotes.
        let big = Tensor::vector(vec![200.0, -200.0]);
        let t = big.tanh();
        assert!((t.data()[0] - 1.0).abs() <= 1e-12);
        assert!((t.data()[1] + 1.0).abs() <= 1e-12);
        let s = big.sigmoid();
        assert!((s.data()[0] - 1.0).abs() <= 1e-12);
        assert!(s.data()[1].abs() <= 1e-12 && s.data()[1] >= 0.0);
    }

    #[test]
    fn softmax_known_values() {
        let even = Tensor::vector(vec![0.0, 0.0]).softmax().unwrap();
        assert_eq!(even, Tensor::vector(vec![0.5, 0.5]));

        let single = Tensor::vector(vec![123.4]).softmax().unwrap();
        assert_eq!(single, Tensor::vector(vec![1.0]));

        // exp(1), exp(2), exp(3) normalized.
        let sm = Tensor::vector(vec![1.0, 2.0, 3.0]).softmax().unwrap();
        let expect = [0.09003057317038046, 0.24472847105479767, 0.6652409557748219];
        for (got, want) in sm.data().iter().zip(expect) {
            assert!((got - want).abs() <= 1e-12, "{got} vs {want}");
        }
    }

    #[test]
    fn softmax_survives_large_inputs() {
        let sm = Tensor::vector(vec![1000.0, 1000.0]).softmax().unwrap();
        assert_eq!(sm, Tensor::vector(vec![0.5, 0.5]));
        let sm = Tensor::vector(vec![-1000.0, 0.0]).softmax().unwrap();
        assert!(sm.is_finite());
        assert!(sm.data()[1] > 0.999_999);
    }

    #[test]
    fn softmax_rejects_empty_and_non_finite() {
        assert!(matches!(
            Tensor::vector(vec![]).softmax(),
            Err(MathError::Domain { op: "softmax", .. })
        ));
        assert!(matches!(
            Tensor::vector(vec![f64::NAN, 0.0]).softmax(),
            Err(MathError::NonFinite { op: "softmax" })
        ));
    }

    #[test]
    fn log_sigmoid_is_stable_at_extremes() {
        assert!((log_sigmoid(0.0) + std::f64::consts::LN_2).abs() <= 1e-15);
        assert!((log_sigmoid(-1000.0) + 1000.0).abs() <= 1e-9);
        assert!(log_sigmoid(1000.0) <= 0.0 && log_sigmoid(1000.0) >= -1e-300);
        assert!(log_sigmoid(-1000.0).is_finite());
    }

    #[test]
    fn dot_and_norm() {
        let a = Tensor::vector(vec![3.0, 4.0]);
        assert_eq!(a.dot(&a).unwrap(), 25.0);
        assert_eq!(a.norm(), 5.0);
        assert!(a.dot(&Tensor::zeros(&[3])).is_err());
    }

    #[test]
    fn from_vec_validates_size() {
        assert!(Tensor::from_vec(&[2, 2], vec![1.0; 3]).is_err());
        assert!(Tensor::from_vec(&[], vec![]).is_err());
        assert!(Tensor::from_vec(&[1, 2, 3], vec![0.0; 6]).is_err());
    }

    proptest! {
        #[test]
        fn softmax_sums_to_one(xs in prop::collection::vec(-50.0f64..50.0, 1..12)) {
            let sm = Tensor::vector(xs).softmax().unwrap();
            let sum: f64 = sm.data().iter().sum();
            prop_assert!((sum - 1.0).abs() <= 1e-12);
            prop_assert!(sm.data().iter().all(|&p| (0.0..=1.0).contains(&p)));
        }

        #[test]
        fn softmax_shift_invariant(
            xs in prop::collection::vec(-50.0f64..50.0, 1..12),
            c in -25.0f64..25.0,
        ) {
            let base = Tensor::vector(xs.clone()).softmax().unwrap();
            let shifted = Tensor::vector(xs.iter().map(|v| v + c).collect())
                .softmax()
                .unwrap();
            for (a, b) in base.data().iter().zip(shifted.data()) {
                prop_assert!((a - b).abs() <= 1e-12);
            }
        }

        #[test]
        fn softmax_preserves_order(xs in prop::collection::vec(-50.0f64..50.0, 2..12)) {
            let sm = Tensor::vector(xs.clone()).softmax().unwrap();
            for i in 0..xs.len() {
                for j in 0..xs.len() {
                    if xs[i] > xs[j] {
                        prop_assert!(sm.data()[i] >= sm.data()[j]);
                    }
                }
            }
        }
    }
}
