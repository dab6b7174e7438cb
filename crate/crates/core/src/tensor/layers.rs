use super::{Gradients, Tape, Tensor, TensorError, Var, LEAKY_SLOPE};
use rand::Rng;
use serde::{Deserialize, Serialize};

/// Handle to a tensor inside a [`ParamSet`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ParamId(pub usize);

/// Named, ordered parameter storage shared by all layers of a model.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ParamSet {
    names: Vec<String>,
    tensors: Vec<Tensor>,
}

impl ParamSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, name: impl Into<String>, t: Tensor) -> ParamId {
        let name = name.into();
        assert!(!self.names.contains(&name), "duplicate parameter name {name}");
        self.names.push(name);
        self.tensors.push(t);
        ParamId(self.tensors.len() - 1)
    }

    pub fn get(&self, id: ParamId) -> &Tensor {
        &self.tensors[id.0]
    }

    pub fn get_mut(&mut self, id: ParamId) -> &mut Tensor {
        &mut self.tensors[id.0]
    }

    pub fn len(&self) -> usize {
        self.tensors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tensors.is_empty()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn tensors(&self) -> &[Tensor] {
        &self.tensors
    }

    pub fn tensors_mut(&mut self) -> &mut [Tensor] {
        &mut self.tensors
    }

    pub fn num_scalars(&self) -> usize {
        self.tensors.iter().map(Tensor::len).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.tensors.iter().all(Tensor::is_finite)
    }

    /// Records every parameter as a leaf on `tape`.
    pub fn bind(&self, tape: &mut Tape) -> Bound {
        Bound { vars: self.tensors.iter().map(|t| tape.leaf(t.clone())).collect() }
    }

    pub fn zeros_like(&self) -> Vec<Tensor> {
        self.tensors.iter().map(|t| Tensor::zeros(t.rows(), t.cols())).collect()
    }
}

/// Tape variables for a bound [`ParamSet`].
#[derive(Clone, Debug)]
pub struct Bound {
    vars: Vec<Var>,
}

impl Bound {
    /// Binds parameters to existing tape variables, given in parameter order.
    pub fn from_vars(vars: Vec<Var>) -> Self {
        Self { vars }
    }

    pub fn var(&self, id: ParamId) -> Var {
        self.vars[id.0]
    }

    /// Gradients in parameter order; parameters the loss does not reach get
    /// zeros.
    pub fn grads(&self, tape: &Tape, g: &Gradients) -> Vec<Tensor> {
        self.vars
            .iter()
            .map(|&v| {
                g.get(v).cloned().unwrap_or_else(|| {
                    let [r, c] = tape.value(v).shape();
                    Tensor::zeros(r, c)
                })
            })
            .collect()
    }
}

fn glorot(rows: usize, cols: usize, rng: &mut impl Rng) -> Tensor {
    let a = (6.0 / (rows + cols) as f64).sqrt();
    Tensor::from_vec(rows, cols, (0..rows * cols).map(|_| rng.random_range(-a..a)).collect())
}

/// Directed edge list with one self-loop per node appended, split into
/// source and target index arrays.
#[derive(Clone, Debug, PartialEq)]
pub struct EdgeIndex {
    pub num_nodes: usize,
    pub srcs: Vec<usize>,
    pub tgts: Vec<usize>,
}

impl EdgeIndex {
    pub fn with_self_loops(num_nodes: usize, edges: &[(usize, usize)]) -> Result<Self, TensorError> {
        let mut srcs = Vec::with_capacity(edges.len() + num_nodes);
        let mut tgts = Vec::with_capacity(edges.len() + num_nodes);
        for &(s, t) in edges {
            if s >= num_nodes || t >= num_nodes {
                return Err(TensorError::ShapeMismatch(format!(
                    "edge ({s}, {t}) outside {num_nodes} nodes"
                )));
            }
            if s != t {
                srcs.push(s);
                tgts.push(t);
            }
        }
        for i in 0..num_nodes {
            srcs.push(i);
            tgts.push(i);
        }
        Ok(Self { num_nodes, srcs, tgts })
    }
}

/// Single-head graph attention layer.
///
/// For an edge `j -> i` (self-loops included) the score is
/// `leaky_relu(a_src . W x_j + a_tgt . W x_i)`, normalised by softmax over
/// the in-edges of `i`; the output row `i` is the attention-weighted sum of
/// `W x_j`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GatLayer {
    pub weight: ParamId,
    pub attn_src: ParamId,
    pub attn_tgt: ParamId,
    pub d_in: usize,
    pub d_out: usize,
}

impl GatLayer {
    pub fn new(params: &mut ParamSet, prefix: &str, d_in: usize, d_out: usize, rng: &mut impl Rng) -> Self {
        Self {
            weight: params.add(format!("{prefix}.weight"), glorot(d_in, d_out, rng)),
            attn_src: params.add(format!("{prefix}.attn_src"), glorot(d_out, 1, rng)),
            attn_tgt: params.add(format!("{prefix}.attn_tgt"), glorot(d_out, 1, rng)),
            d_in,
            d_out,
        }
    }

    pub fn forward(&self, tape: &mut Tape, p: &Bound, x: Var, edges: &EdgeIndex) -> Var {
        let h = tape.matmul(x, p.var(self.weight));
        let score_src = tape.matmul(h, p.var(self.attn_src));
        let score_tgt = tape.matmul(h, p.var(self.attn_tgt));
        let es = tape.gather_rows(score_src, &edges.srcs);
        let et = tape.gather_rows(score_tgt, &edges.tgts);
        let e = tape.add(es, et);
        let e = tape.leaky_relu(e, LEAKY_SLOPE);
        let alpha = tape.segment_softmax(e, &edges.tgts, edges.num_nodes);
        let msg = tape.gather_rows(h, &edges.srcs);
        let msg = tape.row_scale(msg, alpha);
        tape.scatter_add_rows(msg, &edges.tgts, edges.num_nodes)
    }
}

/// Stack of GAT layers with leaky-relu between consecutive layers.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GatStack {
    pub layers: Vec<GatLayer>,
}

impl GatStack {
    /// `dims = [d_in, h1, ..., d_out]`.
    pub fn new(params: &mut ParamSet, prefix: &str, dims: &[usize], rng: &mut impl Rng) -> Self {
        let layers = dims
            .windows(2)
            .enumerate()
            .map(|(i, w)| GatLayer::new(params, &format!("{prefix}.{i}"), w[0], w[1], rng))
            .collect();
        Self { layers }
    }

    pub fn d_in(&self) -> usize {
        self.layers.first().map_or(0, |l| l.d_in)
    }

    pub fn d_out(&self) -> usize {
        self.layers.last().map_or(0, |l| l.d_out)
    }

    pub fn forward(&self, tape: &mut Tape, p: &Bound, mut x: Var, edges: &EdgeIndex) -> Var {
        for (i, layer) in self.layers.iter().enumerate() {
            if i > 0 {
                x = tape.leaky_relu(x, LEAKY_SLOPE);
            }
            x = layer.forward(tape, p, x, edges);
        }
        x
    }
}

/// Feed-forward stack: affine layers with leaky-relu between them.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Mlp {
    pub layers: Vec<(ParamId, ParamId)>,
    pub dims: Vec<usize>,
}

impl Mlp {
    pub fn new(params: &mut ParamSet, prefix: &str, dims: &[usize], rng: &mut impl Rng) -> Self {
        let layers = dims
            .windows(2)
            .enumerate()
            .map(|(i, w)| {
                let wt = params.add(format!("{prefix}.{i}.weight"), glorot(w[0], w[1], rng));
                let b = params.add(format!("{prefix}.{i}.bias"), Tensor::zeros(1, w[1]));
                (wt, b)
            })
            .collect();
        Self { layers, dims: dims.to_vec() }
    }

    pub fn d_in(&self) -> usize {
        self.dims[0]
    }

    pub fn d_out(&self) -> usize {
        *self.dims.last().unwrap()
    }

    pub fn forward(&self, tape: &mut Tape, p: &Bound, mut x: Var) -> Var {
        for (i, &(w, b)) in self.layers.iter().enumerate() {
            if i > 0 {
                x = tape.leaky_relu(x, LEAKY_SLOPE);
            }
            x = tape.matmul(x, p.var(w));
            x = tape.add_row(x, p.var(b));
        }
        x
    }
}

/// Evaluates one GAT layer on concrete inputs.
pub fn gat_forward(
    params: &ParamSet,
    layer: &GatLayer,
    x: &Tensor,
    edges: &[(usize, usize)],
) -> Result<Tensor, TensorError> {
    if x.cols() != layer.d_in {
        return Err(TensorError::ShapeMismatch(format!(
            "input has {} columns, layer expects {}",
            x.cols(),
            layer.d_in
        )));
    }
    let ei = EdgeIndex::with_self_loops(x.rows(), edges)?;
    let mut tape = Tape::new();
    let p = params.bind(&mut tape);
    let xv = tape.leaf(x.clone());
    let out = layer.forward(&mut tape, &p, xv, &ei);
    Ok(tape.value(out).clone())
}
