//! Single-head attention layers read as discrete geometry: the query-key
//! effective metric, attention weights, the discrete connection
//! `Γ_ij = W^O α_ij W^V`, the layer step, the layer-discretized geodesic
//! residual, the metric gradient, the semantic action and the forced-geodesic
//! update.
//!
//! Token states are `n × d` matrices with one token per row and weights act on
//! the right: `q_i = x_i W^Q`, `x'_i = x_i + (Σ_j α_ij x_j W^V) W^O`.

use std::ops::{Index, IndexMut};

use thiserror::Error;

use crate::scalar::Scalar;

#[derive(Debug, Error, PartialEq)]
pub enum GeometryError {
    #[error("shape mismatch in {context}: expected {expected}, got {actual}")]
    Shape {
        context: &'static str,
        expected: String,
        actual: String,
    },
    #[error("token states must have at least one row")]
    NoTokens,
    #[error("non-finite entry in token states")]
    NonFinite,
    #[error("semantic action needs at least 2 states, got {0}")]
    TooFewStates(usize),
    #[error("coupling lambda must be non-negative, got {0}")]
    NegativeLambda(f64),
    #[error("linear system is singular")]
    Singular,
}

fn shape_err(context: &'static str, expected: (usize, usize), actual: (usize, usize)) -> GeometryError {
    GeometryError::Shape {
        context,
        expected: format!("{}x{}", expected.0, expected.1),
        actual: format!("{}x{}", actual.0, actual.1),
    }
}

/// Dense row-major matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Mat<T> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

impl<T: Scalar> Mat<T> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![T::zero(); rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        Self::from_fn(n, n, |i, j| if i == j { T::one() } else { T::zero() })
    }

    pub fn from_fn(rows: usize, cols: usize, f: impl Fn(usize, usize) -> T) -> Self {
        let data = (0..rows * cols).map(|k| f(k / cols, k % cols)).collect();
        Self { rows, cols, data }
    }

    pub fn from_rows<V: AsRef<[T]>>(rows: &[V]) -> Result<Self, GeometryError> {
        let cols = rows.first().map_or(0, |r| r.as_ref().len());
        if let Some(bad) = rows.iter().find(|r| r.as_ref().len() != cols) {
            return Err(shape_err(
                "from_rows",
                (rows.len(), cols),
                (rows.len(), bad.as_ref().len()),
            ));
        }
        Ok(Self {
            rows: rows.len(),
            cols,
            data: rows.iter().flat_map(|r| r.as_ref().iter().copied()).collect(),
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

    pub fn row(&self, i: usize) -> &[T] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [T] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self[(j, i)])
    }

    pub fn matmul(&self, rhs: &Self) -> Self {
        assert_eq!(self.cols, rhs.rows, "matmul inner dimensions");
        let mut out = Self::zeros(self.rows, rhs.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a == T::zero() {
                    continue;
                }
                let src = rhs.row(k);
                for (o, &b) in out.row_mut(i).iter_mut().zip(src) {
                    *o = *o + a * b;
                }
            }
        }
        out
    }

    pub fn zip_map(&self, rhs: &Self, f: impl Fn(T, T) -> T) -> Self {
        assert_eq!(self.shape(), rhs.shape(), "elementwise shapes");
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&rhs.data).map(|(&a, &b)| f(a, b)).collect(),
        }
    }

    pub fn map(&self, f: impl Fn(T) -> T) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&a| f(a)).collect(),
        }
    }

    pub fn add(&self, rhs: &Self) -> Self {
        self.zip_map(rhs, |a, b| a + b)
    }

    pub fn sub(&self, rhs: &Self) -> Self {
        self.zip_map(rhs, |a, b| a - b)
    }

    pub fn scale(&self, s: T) -> Self {
        self.map(|a| a * s)
    }

    pub fn max_abs(&self) -> T {
        self.data.iter().fold(T::zero(), |m, &a| m.max(a.abs()))
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|a| a.is_finite())
    }
}

impl<T> Index<(usize, usize)> for Mat<T> {
    type Output = T;
    fn index(&self, (i, j): (usize, usize)) -> &T {
        &self.data[i * self.cols + j]
    }
}

impl<T> IndexMut<(usize, usize)> for Mat<T> {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut T {
        &mut self.data[i * self.cols + j]
    }
}

/// `n × d` token representations at one layer.
pub type TokenStates<T> = Mat<T>;

/// Single attention head with a residual connection.
#[derive(Debug, Clone, PartialEq)]
pub struct ToyLayer<T> {
    pub w_q: Mat<T>,
    pub w_k: Mat<T>,
    pub w_v: Mat<T>,
    pub w_o: Mat<T>,
}

impl<T: Scalar> ToyLayer<T> {
    /// `w_q, w_k: d × d_k`, `w_v: d × d_v`, `w_o: d_v × d`.
    pub fn new(w_q: Mat<T>, w_k: Mat<T>, w_v: Mat<T>, w_o: Mat<T>) -> Result<Self, GeometryError> {
        let d = w_q.rows();
        let d_k = w_q.cols();
        if w_k.shape() != (d, d_k) {
            return Err(shape_err("w_k", (d, d_k), w_k.shape()));
        }
        if w_v.rows() != d {
            return Err(shape_err("w_v", (d, w_v.cols()), w_v.shape()));
        }
        let d_v = w_v.cols();
        if w_o.shape() != (d_v, d) {
            return Err(shape_err("w_o", (d_v, d), w_o.shape()));
        }
        Ok(Self { w_q, w_k, w_v, w_o })
    }

    pub fn d(&self) -> usize {
        self.w_q.rows()
    }

    pub fn d_k(&self) -> usize {
        self.w_q.cols()
    }

    pub fn d_v(&self) -> usize {
        self.w_v.cols()
    }

    /// `W^V W^O`, the `d × d` value-output map.
    pub fn value_output(&self) -> Mat<T> {
        self.w_v.matmul(&self.w_o)
    }

    fn check(&self, x: &TokenStates<T>) -> Result<(), GeometryError> {
        if x.rows() == 0 {
            return Err(GeometryError::NoTokens);
        }
        if x.cols() != self.d() {
            return Err(shape_err("token states", (x.rows(), self.d()), x.shape()));
        }
        if !x.is_finite() {
            return Err(GeometryError::NonFinite);
        }
        Ok(())
    }
}

/// `g_ij = (x_i W^Q) · (x_j W^K)`, unscaled.
pub fn effective_metric<T: Scalar>(x: &TokenStates<T>, layer: &ToyLayer<T>) -> Result<Mat<T>, GeometryError> {
    layer.check(x)?;
    let q = x.matmul(&layer.w_q);
    let k = x.matmul(&layer.w_k);
    Ok(q.matmul(&k.transpose()))
}

/// Row-wise softmax with max subtraction.
pub fn softmax_rows<T: Scalar>(logits: &Mat<T>) -> Mat<T> {
    let mut out = logits.clone();
    for i in 0..out.rows() {
        let row = out.row_mut(i);
        let m = row.iter().fold(T::neg_infinity(), |m, &v| m.max(v));
        row.iter_mut().for_each(|v| *v = (*v - m).exp());
        let s: T = row.iter().copied().sum();
        row.iter_mut().for_each(|v| *v = *v / s);
    }
    out
}

/// `softmax(g / √d_k)` by rows.
pub fn attention_weights<T: Scalar>(x: &TokenStates<T>, layer: &ToyLayer<T>) -> Result<Mat<T>, GeometryError> {
    let g = effective_metric(x, layer)?;
    let scale = T::from_usize_lossy(layer.d_k()).sqrt();
    Ok(softmax_rows(&g.map(|v| v / scale)))
}

/// Metric, attention and the connection operator at one state.
#[derive(Debug, Clone, PartialEq)]
pub struct GeometricObjects<T> {
    pub g: Mat<T>,
    pub alpha: Mat<T>,
    value_output: Mat<T>,
}

impl<T: Scalar> GeometricObjects<T> {
    pub fn at(x: &TokenStates<T>, layer: &ToyLayer<T>) -> Result<Self, GeometryError> {
        let g = effective_metric(x, layer)?;
        let scale = T::from_usize_lossy(layer.d_k()).sqrt();
        Ok(Self {
            alpha: softmax_rows(&g.map(|v| v / scale)),
            g,
            value_output: layer.value_output(),
        })
    }

    /// Frozen connection with explicit weights.
    pub fn with_alpha(alpha: Mat<T>, layer: &ToyLayer<T>) -> Self {
        let n = alpha.rows();
        Self {
            g: Mat::zeros(n, n),
            alpha,
            value_output: layer.value_output(),
        }
    }

    /// `Γ_ij v = α_ij v W^V W^O` for a row vector `v`.
    pub fn gamma(&self, i: usize, j: usize, v: &[T]) -> Vec<T> {
        let a = self.alpha[(i, j)];
        let d = self.value_output.cols();
        (0..d)
            .map(|c| {
                v.iter()
                    .enumerate()
                    .map(|(r, &vr)| vr * self.value_output[(r, c)])
                    .sum::<T>()
                    * a
            })
            .collect()
    }

    /// `(Σ_j Γ_ij y_j)_i` for every token, i.e. `α Y W^V W^O`.
    pub fn connect(&self, y: &TokenStates<T>) -> TokenStates<T> {
        self.alpha.matmul(y).matmul(&self.value_output)
    }
}

/// `x'_i = x_i + (Σ_j α_ij x_j W^V) W^O`.
pub fn layer_step<T: Scalar>(x: &TokenStates<T>, layer: &ToyLayer<T>) -> Result<TokenStates<T>, GeometryError> {
    let alpha = attention_weights(x, layer)?;
    let h = alpha.matmul(&x.matmul(&layer.w_v));
    Ok(x.add(&h.matmul(&layer.w_o)))
}

fn max_row_norm<T: Scalar>(m: &Mat<T>) -> T {
    (0..m.rows())
        .map(|i| m.row(i).iter().map(|&v| v * v).sum::<T>().sqrt())
        .fold(T::zero(), T::max)
}

/// `max_i ‖(x'_i - x_i) - Σ_j Γ_ij x_j‖` with `x'` from [`layer_step`].
pub fn discrete_velocity_identity<T: Scalar>(x: &TokenStates<T>, layer: &ToyLayer<T>) -> Result<T, GeometryError> {
    let objects = GeometricObjects::at(x, layer)?;
    discrete_velocity_residual(x, layer, &objects)
}

/// Velocity identity against an explicit connection.
pub fn discrete_velocity_residual<T: Scalar>(
    x: &TokenStates<T>,
    layer: &ToyLayer<T>,
    objects: &GeometricObjects<T>,
) -> Result<T, GeometryError> {
    let velocity = layer_step(x, layer)?.sub(x);
    Ok(max_row_norm(&velocity.sub(&objects.connect(x))))
}

/// Per-token defect `‖(x_next - 2 x_curr + x_prev) - Σ_j Γ_ij (x_curr,j - x_prev,j)‖`
/// with `Γ` evaluated at `x_curr`.
pub fn geodesic_residual<T: Scalar>(
    x_prev: &TokenStates<T>,
    x_curr: &TokenStates<T>,
    x_next: &TokenStates<T>,
    layer: &ToyLayer<T>,
) -> Result<Vec<T>, GeometryError> {
    for (name, m) in [("x_prev", x_prev), ("x_next", x_next)] {
        if m.shape() != x_curr.shape() {
            return Err(shape_err(name, x_curr.shape(), m.shape()));
        }
    }
    let objects = GeometricObjects::at(x_curr, layer)?;
    let accel = x_next.sub(x_curr).sub(&x_curr.sub(x_prev));
    let defect = accel.sub(&objects.connect(&x_curr.sub(x_prev)));
    Ok((0..defect.rows())
        .map(|i| defect.row(i).iter().map(|&v| v * v).sum::<T>().sqrt())
        .collect())
}

/// Solves `x_prev + Σ_j Γ_ij x_prev,j = x_curr` for `x_prev`, with `Γ` frozen
/// at `x_curr`. Together with `x_next = layer_step(x_curr)` this gives a
/// triple on which [`geodesic_residual`] vanishes.
pub fn geodesic_predecessor<T: Scalar>(
    x_curr: &TokenStates<T>,
    layer: &ToyLayer<T>,
) -> Result<TokenStates<T>, GeometryError> {
    let objects = GeometricObjects::at(x_curr, layer)?;
    let (n, d) = x_curr.shape();
    let m = &objects.value_output;
    let size = n * d;
    // (α X M)_{ia} = Σ_{j,b} α_ij M_ba X_jb
    let system = Mat::from_fn(size, size, |r, c| {
        let (i, a) = (r / d, r % d);
        let (j, b) = (c / d, c % d);
        let id = if r == c { T::one() } else { T::zero() };
        id + objects.alpha[(i, j)] * m[(b, a)]
    });
    let sol = solve(system, x_curr.as_slice().to_vec())?;
    Ok(Mat {
        rows: n,
        cols: d,
        data: sol,
    })
}

/// Gaussian elimination with partial pivoting.
fn solve<T: Scalar>(mut a: Mat<T>, mut b: Vec<T>) -> Result<Vec<T>, GeometryError> {
    let n = b.len();
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&p, &q| {
                a[(p, col)]
                    .abs()
                    .partial_cmp(&a[(q, col)].abs())
                    .unwrap_or(std::cmp::Ordering::Equal)
            })
            .unwrap_or(col);
        if a[(pivot, col)].abs() <= T::min_positive_value() {
            return Err(GeometryError::Singular);
        }
        if pivot != col {
            for k in 0..n {
                let tmp = a[(col, k)];
                a[(col, k)] = a[(pivot, k)];
                a[(pivot, k)] = tmp;
            }
            b.swap(col, pivot);
        }
        for r in col + 1..n {
            let f = a[(r, col)] / a[(col, col)];
            if f == T::zero() {
                continue;
            }
            for k in col..n {
                a[(r, k)] = a[(r, k)] - f * a[(col, k)];
            }
            b[r] = b[r] - f * b[col];
        }
    }
    let mut x = vec![T::zero(); n];
    for r in (0..n).rev() {
        let s: T = (r + 1..n).map(|k| a[(r, k)] * x[k]).sum();
        x[r] = (b[r] - s) / a[(r, r)];
    }
    Ok(x)
}

/// `∂g_ij/∂x_k` for all `i, j, k`, each a `d`-vector.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricGradient<T> {
    n: usize,
    d: usize,
    data: Vec<T>,
}

impl<T: Scalar> MetricGradient<T> {
    pub fn get(&self, i: usize, j: usize, k: usize) -> &[T] {
        let off = ((i * self.n + j) * self.n + k) * self.d;
        &self.data[off..off + self.d]
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn d(&self) -> usize {
        self.d
    }
}

/// With `A = W^Q (W^K)ᵀ`, `g_ij = x_i A x_jᵀ`, so
/// `∂g_ij/∂x_k = δ_ik A x_jᵀ + δ_jk Aᵀ x_iᵀ`.
pub fn metric_gradient<T: Scalar>(x: &TokenStates<T>, layer: &ToyLayer<T>) -> Result<MetricGradient<T>, GeometryError> {
    layer.check(x)?;
    let (n, d) = x.shape();
    let a = layer.w_q.matmul(&layer.w_k.transpose());
    let ax = x.matmul(&a.transpose()); // row j: A x_jᵀ
    let atx = x.matmul(&a); // row i: Aᵀ x_iᵀ
    let mut data = vec![T::zero(); n * n * n * d];
    for i in 0..n {
        for j in 0..n {
            let at = |k: usize| ((i * n + j) * n + k) * d;
            for (b, &v) in data[at(i)..at(i) + d].iter_mut().zip(ax.row(j)) {
                *b = *b + v;
            }
            for (b, &v) in data[at(j)..at(j) + d].iter_mut().zip(atx.row(i)) {
                *b = *b + v;
            }
        }
    }
    Ok(MetricGradient { n, d, data })
}

/// How the `n × n` metric contracts with per-token steps.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum KineticMode {
    /// `Σ_t g_tt ‖ẋ_t‖²`.
    #[default]
    Diagonal,
    /// `Σ_ij g_ij ⟨ẋ_i, ẋ_j⟩`.
    Full,
}

/// `Σ_ℓ (kinetic_ℓ - loss_ℓ)` with forward-difference steps
/// `ẋ_ℓ = x_{ℓ+1} - x_ℓ`. `metrics` and `losses` have one entry per step.
pub fn semantic_action<T: Scalar>(
    states: &[TokenStates<T>],
    metrics: &[Mat<T>],
    losses: &[T],
    mode: KineticMode,
) -> Result<T, GeometryError> {
    if states.len() < 2 {
        return Err(GeometryError::TooFewStates(states.len()));
    }
    let steps = states.len() - 1;
    if metrics.len() != steps || losses.len() != steps {
        return Err(GeometryError::Shape {
            context: "semantic_action alignment",
            expected: format!("{steps} metrics and losses"),
            actual: format!("{} metrics, {} losses", metrics.len(), losses.len()),
        });
    }
    let shape = states[0].shape();
    let n = shape.0;
    let mut total = T::zero();
    for (w, (g, &loss)) in states.windows(2).zip(metrics.iter().zip(losses)) {
        if w[1].shape() != shape {
            return Err(shape_err("semantic_action state", shape, w[1].shape()));
        }
        if g.shape() != (n, n) {
            return Err(shape_err("metric", (n, n), g.shape()));
        }
        let v = w[1].sub(&w[0]);
        let inner = |i: usize, j: usize| -> T { v.row(i).iter().zip(v.row(j)).map(|(&a, &b)| a * b).sum() };
        let kinetic: T = match mode {
            KineticMode::Diagonal => (0..n).map(|t| g[(t, t)] * inner(t, t)).sum(),
            KineticMode::Full => (0..n)
                .flat_map(|i| (0..n).map(move |j| (i, j)))
                .map(|(i, j)| g[(i, j)] * inner(i, j))
                .sum(),
        };
        total = total + kinetic - loss;
    }
    Ok(total)
}

/// Preconditioner applied to the loss gradient.
#[derive(Debug, Clone, PartialEq)]
pub enum Preconditioner<T> {
    Identity,
    /// `n × n`, mixes tokens: `P G`.
    Tokens(Mat<T>),
    /// `d × d`, acts on features: `G P`.
    Features(Mat<T>),
}

impl<T: Scalar> Preconditioner<T> {
    pub fn apply(&self, grad: &TokenStates<T>) -> Result<TokenStates<T>, GeometryError> {
        match self {
            Self::Identity => Ok(grad.clone()),
            Self::Tokens(p) => {
                let n = grad.rows();
                if p.shape() != (n, n) {
                    return Err(shape_err("token preconditioner", (n, n), p.shape()));
                }
                Ok(p.matmul(grad))
            }
            Self::Features(p) => {
                let d = grad.cols();
                if p.shape() != (d, d) {
                    return Err(shape_err("feature preconditioner", (d, d), p.shape()));
                }
                Ok(grad.matmul(p))
            }
        }
    }
}

/// `x_next = 2 x_curr - x_prev - Γ[v, v] - λ P ∇L` with `v = x_curr - x_prev`.
/// `gamma` maps the velocity to the quadratic connection term per token.
pub fn forced_geodesic_step<T: Scalar>(
    x_curr: &TokenStates<T>,
    x_prev: &TokenStates<T>,
    gamma: impl Fn(&TokenStates<T>) -> TokenStates<T>,
    grad_loss: &TokenStates<T>,
    preconditioner: &Preconditioner<T>,
    lambda: T,
) -> Result<TokenStates<T>, GeometryError> {
    if lambda.is_nan() || lambda < T::zero() {
        return Err(GeometryError::NegativeLambda(lambda.as_f64()));
    }
    for (name, m) in [("x_prev", x_prev), ("grad_loss", grad_loss)] {
        if m.shape() != x_curr.shape() {
            return Err(shape_err(name, x_curr.shape(), m.shape()));
        }
    }
    let v = x_curr.sub(x_prev);
    let drift = gamma(&v);
    if drift.shape() != x_curr.shape() {
        return Err(shape_err("connection term", x_curr.shape(), drift.shape()));
    }
    let force = preconditioner.apply(grad_loss)?.scale(lambda);
    let two = T::lit(2.0);
    Ok(Mat::from_fn(x_curr.rows(), x_curr.cols(), |i, j| {
        two * x_curr[(i, j)] - x_prev[(i, j)] - drift[(i, j)] - force[(i, j)]
    }))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn m(rows: &[&[f64]]) -> Mat<f64> {
        Mat::from_rows(rows).unwrap()
    }

    fn identity_layer(d: usize) -> ToyLayer<f64> {
        ToyLayer::new(Mat::identity(d), Mat::identity(d), Mat::identity(d), Mat::identity(d)).unwrap()
    }

    #[test]
    fn orthonormal_rows_give_identity_metric() {
        let x = m(&[&[1.0, 0.0, 0.0], &[0.0, 1.0, 0.0]]);
        let g = effective_metric(&x, &identity_layer(3)).unwrap();
        assert_eq!(g, Mat::identity(2));
    }

    #[test]
    fn single_token_attention_is_one() {
        let x = m(&[&[0.3, -2.0]]);
        let a = attention_weights(&x, &identity_layer(2)).unwrap();
        assert_eq!(a[(0, 0)], 1.0);
    }

    #[test]
    fn equal_logits_are_uniform() {
        let a = softmax_rows(&Mat::<f64>::from_fn(3, 3, |_, _| 7.0));
        assert!(a.as_slice().iter().all(|&v| (v - 1.0 / 3.0).abs() < 1e-15));
    }

    #[test]
    fn saturated_logit() {
        let a = softmax_rows(&m(&[&[50.0, 0.0, 0.0]]));
        assert!(a[(0, 0)] > 1.0 - 1e-15);
        let big = softmax_rows(&m(&[&[1000.0, -1000.0, 999.0]]));
        let s: f64 = big.row(0).iter().sum();
        assert!((s - 1.0).abs() < 1e-12);
    }

    #[test]
    fn zero_value_is_pure_residual() {
        let mut layer = identity_layer(2);
        layer.w_v = Mat::zeros(2, 2);
        let x = m(&[&[1.0, 2.0], &[3.0, -1.0]]);
        assert_eq!(layer_step(&x, &layer).unwrap(), x);
    }

    #[test]
    fn single_token_step() {
        let layer = ToyLayer::new(
            Mat::identity(2),
            Mat::identity(2),
            m(&[&[2.0, 0.0], &[0.0, 1.0]]),
            m(&[&[1.0, 1.0], &[0.0, 3.0]]),
        )
        .unwrap();
        let x = m(&[&[1.0, 1.0]]);
        // x W^V W^O = [2, 1] · [[1,1],[0,3]] = [2, 5]
        assert_eq!(layer_step(&x, &layer).unwrap(), m(&[&[3.0, 6.0]]));
    }

    #[test]
    fn quadratic_form_gradient() {
        let x = m(&[&[1.0, -2.0, 0.5], &[0.0, 1.0, 1.0], &[2.0, 2.0, 2.0]]);
        let grad = metric_gradient(&x, &identity_layer(3)).unwrap();
        assert_eq!(grad.get(1, 1, 1), &[0.0, 2.0, 2.0]);
        assert_eq!(grad.get(0, 1, 2), &[0.0, 0.0, 0.0]);
        assert_eq!(grad.get(0, 1, 0), x.row(1));
        assert_eq!(grad.get(0, 1, 1), x.row(0));
    }

    #[test]
    fn straight_line_has_zero_residual_in_flat_space() {
        let mut layer = identity_layer(2);
        layer.w_o = Mat::zeros(2, 2);
        let p = m(&[&[0.0, 0.0], &[1.0, 1.0]]);
        let c = m(&[&[1.0, 2.0], &[2.0, 0.0]]);
        let nx = c.add(&c).sub(&p);
        let r = geodesic_residual(&p, &c, &nx, &layer).unwrap();
        assert!(r.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn action_of_constant_states() {
        let x = m(&[&[1.0, 2.0]]);
        let s = semantic_action(
            &[x.clone(), x.clone(), x],
            &[Mat::identity(1), Mat::identity(1)],
            &[0.5, 0.25],
            KineticMode::Diagonal,
        )
        .unwrap();
        assert_eq!(s, -0.75);
    }

    #[test]
    fn action_alignment_errors() {
        let x = m(&[&[1.0]]);
        assert_eq!(
            semantic_action(std::slice::from_ref(&x), &[], &[], KineticMode::Diagonal),
            Err(GeometryError::TooFewStates(1))
        );
        assert!(semantic_action(&[x.clone(), x], &[], &[0.0], KineticMode::Full).is_err());
    }

    #[test]
    fn flat_force_free_step_is_extrapolation() {
        let p = m(&[&[0.1, 0.2]]);
        let c = m(&[&[0.4, -0.2]]);
        let next = forced_geodesic_step(
            &c,
            &p,
            |v| Mat::zeros(v.rows(), v.cols()),
            &Mat::zeros(1, 2),
            &Preconditioner::Identity,
            0.0,
        )
        .unwrap();
        assert_eq!(next, c.scale(2.0).sub(&p));
    }

    #[test]
    fn euclidean_limit_subtracts_gradient() {
        let p = m(&[&[0.0, 0.0]]);
        let c = m(&[&[1.0, 0.0]]);
        let g = m(&[&[0.5, -1.0]]);
        let next = forced_geodesic_step(
            &c,
            &p,
            |v| Mat::zeros(v.rows(), v.cols()),
            &g,
            &Preconditioner::Identity,
            0.1,
        )
        .unwrap();
        assert_eq!(next, m(&[&[2.0 - 0.05, 0.1]]));
        assert_eq!(
            forced_geodesic_step(&c, &p, |v| v.clone(), &g, &Preconditioner::Identity, -1.0),
            Err(GeometryError::NegativeLambda(-1.0))
        );
    }

    #[test]
    fn layer_shape_validation() {
        let bad = ToyLayer::new(
            Mat::<f64>::zeros(3, 2),
            Mat::zeros(3, 3),
            Mat::zeros(3, 2),
            Mat::zeros(2, 3),
        );
        assert!(matches!(bad, Err(GeometryError::Shape { context: "w_k", .. })));
        let layer = identity_layer(2);
        assert!(effective_metric(&Mat::zeros(2, 3), &layer).is_err());
        assert_eq!(
            effective_metric(&Mat::zeros(0, 2), &layer),
            Err(GeometryError::NoTokens)
        );
    }
}
