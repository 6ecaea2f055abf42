use super::tensor::log_sigmoid;
use super::{MathError, Tensor};

/// Handle to a value recorded on a [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Var(usize);

enum Op {
    Leaf,
    Matvec { w: usize, x: usize },
    Add { a: usize, b: usize },
    Sub { a: usize, b: usize },
    Hadamard { a: usize, b: usize },
    Tanh { x: usize },
    Sigmoid { x: usize },
    Scale { x: usize, c: f64 },
    MulScalar { x: usize, s: usize },
    Dot { a: usize, b: usize },
    Stack { parts: Vec<usize> },
    Index { x: usize, i: usize },
    Softmax { x: usize },
    LogSoftmax { x: usize },
    LogSigmoid { x: usize },
}

struct Node {
    value: Tensor,
    op: Op,
}

/// Append-only record of a forward computation over tensors.
///
/// Every operation validates shapes when recorded and checks its result
/// for NaN/infinity, so a numeric blowup surfaces at the op that
/// produced it rather than as a silent bad gradient. [`Tape::backward`]
/// runs one reverse sweep from a recorded scalar and returns the
/// adjoint of every node that influenced it; leaves that do not reach
/// the root get zero gradients.
#[derive(Default)]
pub struct Tape {
    nodes: Vec<Node>,
}

/// Adjoints produced by [`Tape::backward`], indexed by [`Var`].
pub struct Gradients {
    adjoints: Vec<Option<Tensor>>,
}

impl Gradients {
    /// Adjoint of `v`, or `None` if `v` did not influence the root.
    pub fn get(&self, v: Var) -> Option<&Tensor> {
        self.adjoints.get(v.0).and_then(|g| g.as_ref())
    }

    /// Adjoint of `v`, materializing zeros (shaped like the value) for
    /// vars that did not influence the root.
    pub fn get_or_zeros(&self, tape: &Tape, v: Var) -> Tensor {
        match self.get(v) {
            Some(g) => g.clone(),
            None => Tensor::zeros(tape.value(v).shape()),
        }
    }
}

impl Tape {
    pub fn new() -> Tape {
        Tape::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Value of a recorded var.
    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    fn push(&mut self, op: &'static str, value: Tensor, node_op: Op) -> Result<Var, MathError> {
        if !value.is_finite() {
            return Err(MathError::NonFinite { op });
        }
        self.nodes.push(Node { value, op: node_op });
        Ok(Var(self.nodes.len() - 1))
    }

    /// Record an input. Gradients flow back to leaves; every other op
    /// builds on previously recorded vars.
    pub fn leaf(&mut self, value: Tensor) -> Result<Var, MathError> {
        self.push("leaf", value, Op::Leaf)
    }

    pub fn matvec(&mut self, w: Var, x: Var) -> Result<Var, MathError> {
        let value = self.value(w).matvec(self.value(x))?;
        self.push("matvec", value, Op::Matvec { w: w.0, x: x.0 })
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var, MathError> {
        let value = self.value(a).add(self.value(b))?;
        self.push("add", value, Op::Add { a: a.0, b: b.0 })
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var, MathError> {
        let value = self.value(a).sub(self.value(b))?;
        self.push("sub", value, Op::Sub { a: a.0, b: b.0 })
    }

    pub fn hadamard(&mut self, a: Var, b: Var) -> Result<Var, MathError> {
        let value = self.value(a).hadamard(self.value(b))?;
        self.push("hadamard", value, Op::Hadamard { a: a.0, b: b.0 })
    }

    pub fn tanh(&mut self, x: Var) -> Result<Var, MathError> {
        let value = self.value(x).tanh();
        self.push("tanh", value, Op::Tanh { x: x.0 })
    }

    pub fn sigmoid(&mut self, x: Var) -> Result<Var, MathError> {
        let value = self.value(x).sigmoid();
        self.push("sigmoid", value, Op::Sigmoid { x: x.0 })
    }

    /// Multiply by an untracked constant.
    pub fn scale(&mut self, x: Var, c: f64) -> Result<Var, MathError> {
        let value = self.value(x).scale(c);
        self.push("scale", value, Op::Scale { x: x.0, c })
    }

    /// Multiply a tensor by a tracked scalar var (shape `[1]`).
    pub fn mul_scalar(&mut self, x: Var, s: Var) -> Result<Var, MathError> {
        let sv = self.value(s);
        if !sv.is_scalar() {
            return Err(MathError::domain(
                "mul_scalar",
                format!("scalar operand has shape {:?}", sv.shape()),
            ));
        }
        let value = self.value(x).scale(sv.item());
        self.push("mul_scalar", value, Op::MulScalar { x: x.0, s: s.0 })
    }

    /// Inner product of two equal-length vectors; result is scalar.
    pub fn dot(&mut self, a: Var, b: Var) -> Result<Var, MathError> {
        let value = Tensor::scalar(self.value(a).dot(self.value(b))?);
        self.push("dot", value, Op::Dot { a: a.0, b: b.0 })
    }

    /// Gather scalar vars into one vector.
    pub fn stack(&mut self, parts: &[Var]) -> Result<Var, MathError> {
        if parts.is_empty() {
            return Err(MathError::domain("stack", "no parts to stack"));
        }
        let mut data = Vec::with_capacity(parts.len());
        for &p in parts {
            let v = self.value(p);
            if !v.is_scalar() {
                return Err(MathError::domain(
                    "stack",
                    format!("part has shape {:?}, want scalars", v.shape()),
                ));
            }
            data.push(v.item());
        }
        self.push(
            "stack",
            Tensor::vector(data),
            Op::Stack {
                parts: parts.iter().map(|p| p.0).collect(),
            },
        )
    }

    /// Extract element `i` of a vector as a scalar var.
    pub fn index(&mut self, x: Var, i: usize) -> Result<Var, MathError> {
        let v = self.value(x);
        if !v.is_vector() || i >= v.len() {
            return Err(MathError::domain(
                "index",
                format!("index {i} into shape {:?}", v.shape()),
            ));
        }
        let value = Tensor::scalar(v.data()[i]);
        self.push("index", value, Op::Index { x: x.0, i })
    }

    pub fn softmax(&mut self, x: Var) -> Result<Var, MathError> {
        let value = self.value(x).softmax()?;
        self.push("softmax", value, Op::Softmax { x: x.0 })
    }

    /// Log of softmax, computed directly for stability.
    pub fn log_softmax(&mut self, x: Var) -> Result<Var, MathError> {
        let v = self.value(x);
        if !v.is_vector() || v.is_empty() {
            return Err(MathError::domain(
                "log_softmax",
                format!("wants a nonempty vector, got shape {:?}", v.shape()),
            ));
        }
        let max = v.data().iter().fold(f64::NEG_INFINITY, |m, &x| m.max(x));
        let log_sum = v
            .data()
            .iter()
            .map(|&x| (x - max).exp())
            .sum::<f64>()
            .ln();
        let value = v.map(|x| x - max - log_sum);
        self.push("log_softmax", value, Op::LogSoftmax { x: x.0 })
    }

    /// Elementwise `ln(sigmoid(x))`, stable for large |x|.
    pub fn log_sigmoid(&mut self, x: Var) -> Result<Var, MathError> {
        let value = self.value(x).map(log_sigmoid);
        self.push("log_sigmoid", value, Op::LogSigmoid { x: x.0 })
    }

    /// Reverse sweep from a scalar root. Returns adjoints for every var
    /// on the tape; vars that do not influence `root` report zeros via
    /// [`Gradients::get_or_zeros`].
    pub fn backward(&self, root: Var) -> Result<Gradients, MathError> {
        let root_value = self.value(root);
        if !root_value.is_scalar() {
            return Err(MathError::domain(
                "backward",
                format!("root must be scalar, got shape {:?}", root_value.shape()),
            ));
        }
        let mut adj: Vec<Option<Tensor>> = Vec::with_capacity(self.nodes.len());
        adj.resize_with(self.nodes.len(), || None);
        adj[root.0] = Some(Tensor::scalar(1.0));

        // Every op's inputs precede it on the tape, so one descending
        // pass visits nodes in a valid reverse topological order.
        for i in (0..=root.0).rev() {
            let dz = match &adj[i] {
                Some(g) => g.clone(),
                None => continue,
            };
            match &self.nodes[i].op {
                Op::Leaf => {}
                Op::Matvec { w, x } => {
                    let dw = Tensor::outer(&dz, self.val(*x))?;
                    let dx = self.val(*w).matvec_t(&dz)?;
                    acc(&mut adj[*w], dw);
                    acc(&mut adj[*x], dx);
                }
                Op::Add { a, b } => {
                    acc(&mut adj[*a], dz.clone());
                    acc(&mut adj[*b], dz);
                }
                Op::Sub { a, b } => {
                    acc(&mut adj[*a], dz.clone());
                    acc(&mut adj[*b], dz.scale(-1.0));
                }
                Op::Hadamard { a, b } => {
                    let da = dz.hadamard(self.val(*b))?;
                    let db = dz.hadamard(self.val(*a))?;
                    acc(&mut adj[*a], da);
                    acc(&mut adj[*b], db);
                }
                Op::Tanh { x } => {
                    // d tanh = 1 - y^2, from the stored output.
                    let y = &self.nodes[i].value;
                    let dx = dz.hadamard(&y.map(|v| 1.0 - v * v))?;
                    acc(&mut adj[*x], dx);
                }
                Op::Sigmoid { x } => {
                    let y = &self.nodes[i].value;
                    let dx = dz.hadamard(&y.map(|v| v * (1.0 - v)))?;
                    acc(&mut adj[*x], dx);
                }
                Op::Scale { x, c } => {
                    acc(&mut adj[*x], dz.scale(*c));
                }
                Op::MulScalar { x, s } => {
                    let s_val = self.val(*s).item();
                    let ds = self.val(*x).dot(&dz)?;
                    acc(&mut adj[*x], dz.scale(s_val));
                    acc(&mut adj[*s], Tensor::scalar(ds));
                }
                Op::Dot { a, b } => {
                    let d = dz.item();
                    acc(&mut adj[*a], self.val(*b).scale(d));
                    acc(&mut adj[*b], self.val(*a).scale(d));
                }
                Op::Stack { parts } => {
                    for (k, &p) in parts.iter().enumerate() {
                        acc(&mut adj[p], Tensor::scalar(dz.data()[k]));
                    }
                }
                Op::Index { x, i: idx } => {
                    let mut dx = Tensor::zeros(self.val(*x).shape());
                    dx.data_mut()[*idx] = dz.item();
                    acc(&mut adj[*x], dx);
                }
                Op::Softmax { x } => {
                    // dx_j = y_j * (dz_j - sum_k dz_k y_k)
                    let y = &self.nodes[i].value;
                    let inner: f64 = dz
                        .data()
                        .iter()
                        .zip(y.data())
                        .map(|(d, yv)| d * yv)
                        .sum();
                    let dx = Tensor::vector(
                        dz.data()
                            .iter()
                            .zip(y.data())
                            .map(|(d, yv)| yv * (d - inner))
                            .collect(),
                    );
                    acc(&mut adj[*x], dx);
                }
                Op::LogSoftmax { x } => {
                    // dx_j = dz_j - softmax(x)_j * sum_k dz_k
                    let y = &self.nodes[i].value;
                    let dz_sum: f64 = dz.data().iter().sum();
                    let dx = Tensor::vector(
                        dz.data()
                            .iter()
                            .zip(y.data())
                            .map(|(d, ly)| d - ly.exp() * dz_sum)
                            .collect(),
                    );
                    acc(&mut adj[*x], dx);
                }
                Op::LogSigmoid { x } => {
                    // d log_sigmoid(x) = sigmoid(-x) = 1 - exp(y)
                    let y = &self.nodes[i].value;
                    let dx = dz.hadamard(&y.map(|ly| 1.0 - ly.exp()))?;
                    acc(&mut adj[*x], dx);
                }
            }
        }
        Ok(Gradients { adjoints: adj })
    }

    fn val(&self, i: usize) -> &Tensor {
        &self.nodes[i].value
    }
}

fn acc(slot: &mut Option<Tensor>, delta: Tensor) {
    match slot {
        Some(t) => t.add_assign(&delta),
        None => *slot = Some(delta),
    }
}
