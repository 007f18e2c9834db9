//! The multimodal autoencoder: per-modality pre-processing layers feeding a
//! shared encoder/decoder stack, the proximity-preserving loss terms, and
//! analytic gradients for every parameter.
//!
//! Data flows row-wise. For a batch of nodes the structure rows (adjacency
//! vectors) and attribute rows pass through their own sigmoid layer, the
//! results are concatenated and squeezed through the encoder tower to the
//! embedding, and the decoder mirrors the encoder back out to two
//! reconstruction heads. With pre-processing disabled the two input layers
//! collapse into one joint layer over the concatenated raw vectors, and the
//! output mirrors that.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::graph::{AttributedNetwork, SparseVec};
use crate::tensor::{self, Matrix};

/// Layer geometry of the model.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LayerSpec {
    /// Width of the structure pre-processing layer.
    pub pre_struct_dim: usize,
    /// Width of the attribute pre-processing layer.
    pub pre_attr_dim: usize,
    /// Encoder widths after the concatenation, ending in the embedding
    /// dimension d.
    pub hidden_dims: Vec<usize>,
    /// When false, the two pre-processing layers are replaced by one joint
    /// layer of width `pre_struct_dim + pre_attr_dim` over the concatenated
    /// raw input.
    pub preprocess: bool,
}

impl LayerSpec {
    pub fn embedding_dim(&self) -> usize {
        *self.hidden_dims.last().unwrap_or(&0)
    }

    /// Width of the concatenated pre-processed features.
    pub fn concat_dim(&self) -> usize {
        self.pre_struct_dim + self.pre_attr_dim
    }

    /// Total number of encoder levels, counting the pre-processing layer.
    pub fn layer_count(&self) -> usize {
        1 + self.hidden_dims.len()
    }

    /// Check the tower shrinks strictly and fits the data dimensions.
    pub fn validate(&self, n: usize, m: usize) -> Result<()> {
        if self.pre_struct_dim == 0 || self.pre_attr_dim == 0 {
            return Err(Error::InvalidConfig("pre-processing widths must be >= 1".into()));
        }
        if self.hidden_dims.is_empty() {
            return Err(Error::InvalidConfig("hidden_dims must end in the embedding dimension".into()));
        }
        if self.hidden_dims.iter().any(|&d| d == 0) {
            return Err(Error::InvalidConfig("layer widths must be >= 1".into()));
        }
        let mut widths = vec![n + m, self.concat_dim()];
        widths.extend(&self.hidden_dims);
        for w in widths.windows(2) {
            if w[1] >= w[0] {
                return Err(Error::InvalidConfig(format!(
                    "layer widths must strictly decrease, got {} -> {}",
                    w[0], w[1]
                )));
            }
        }
        let d = self.embedding_dim();
        if d >= n.min(m) {
            return Err(Error::InvalidConfig(format!(
                "embedding dimension {d} must be smaller than min(n, m) = {}",
                n.min(m)
            )));
        }
        Ok(())
    }
}

/// Penalty factors for reconstructing nonzero entries (both must be > 1).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PenaltyConfig {
    pub gamma1: f64,
    pub gamma2: f64,
}

impl PenaltyConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.gamma1 > 1.0) || !(self.gamma2 > 1.0) {
            return Err(Error::InvalidConfig(format!(
                "penalties must be > 1, got gamma1 = {}, gamma2 = {}",
                self.gamma1, self.gamma2
            )));
        }
        Ok(())
    }
}

impl Default for PenaltyConfig {
    fn default() -> Self {
        PenaltyConfig {
            gamma1: 10.0,
            gamma2: 10.0,
        }
    }
}

/// Weights of the loss terms. The first-order term carries an implicit
/// weight of one.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossWeights {
    pub lambda: f64,
    pub alpha: f64,
    pub upsilon: f64,
}

impl LossWeights {
    pub fn validate(&self) -> Result<()> {
        if self.lambda < 0.0 || self.alpha < 0.0 || self.upsilon < 0.0 {
            return Err(Error::InvalidConfig("loss weights must be >= 0".into()));
        }
        Ok(())
    }
}

impl Default for LossWeights {
    fn default() -> Self {
        LossWeights {
            lambda: 0.03,
            alpha: 0.5,
            upsilon: 1e-4,
        }
    }
}

/// One dense layer: y = x · w + b.
#[derive(Debug, Clone, PartialEq)]
pub struct Affine {
    pub w: Matrix,
    pub b: Vec<f64>,
}

impl Affine {
    pub fn zeros(inputs: usize, outputs: usize) -> Self {
        Affine {
            w: Matrix::zeros(inputs, outputs),
            b: vec![0.0; outputs],
        }
    }

    fn apply_sigmoid(&self, x: &Matrix) -> Result<Matrix> {
        let mut out = tensor::matmul(x, &self.w)?;
        add_bias(&mut out, &self.b);
        tensor::sigmoid_in_place(&mut out);
        Ok(out)
    }

    fn is_finite(&self) -> bool {
        self.w.is_finite() && self.b.iter().all(|v| v.is_finite())
    }
}

/// The input level of the tower.
#[derive(Debug, Clone, PartialEq)]
pub enum InputLayer {
    /// Fig. 2(b) style: separate structure and attribute layers.
    PerModality { structure: Affine, attribute: Affine },
    /// Fig. 2(a) style: one layer over the concatenated raw input.
    Joint(Affine),
}

/// The output level of the tower, mirroring [`InputLayer`].
#[derive(Debug, Clone, PartialEq)]
pub enum OutputLayer {
    PerModality { structure: Affine, attribute: Affine },
    Joint(Affine),
}

/// All weights and biases of the model, together with the input scaling
/// baked in at training time.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    pub n: usize,
    pub m: usize,
    pub spec: LayerSpec,
    pub input: InputLayer,
    /// Encoder layers after the concatenation; the last one produces the
    /// embedding.
    pub encoder: Vec<Affine>,
    /// Decoder layers back up to the concatenation width.
    pub decoder: Vec<Affine>,
    pub output: OutputLayer,
    /// Multipliers applied to raw structure / attribute values so inputs
    /// lie in [0, 1] (1.0 for binary data).
    pub s_scale: f64,
    pub a_scale: f64,
}

impl ModelParams {
    /// Zero-initialized parameters with the geometry implied by `spec`.
    pub fn zeros(n: usize, m: usize, spec: LayerSpec) -> Result<Self> {
        spec.validate(n, m)?;
        let (ps, pa) = (spec.pre_struct_dim, spec.pre_attr_dim);
        let concat = spec.concat_dim();
        let (input, output) = if spec.preprocess {
            (
                InputLayer::PerModality {
                    structure: Affine::zeros(n, ps),
                    attribute: Affine::zeros(m, pa),
                },
                OutputLayer::PerModality {
                    structure: Affine::zeros(ps, n),
                    attribute: Affine::zeros(pa, m),
                },
            )
        } else {
            (
                InputLayer::Joint(Affine::zeros(n + m, concat)),
                OutputLayer::Joint(Affine::zeros(concat, n + m)),
            )
        };
        let mut encoder = Vec::new();
        let mut prev = concat;
        for &h in &spec.hidden_dims {
            encoder.push(Affine::zeros(prev, h));
            prev = h;
        }
        let mut decoder = Vec::new();
        let mut widths: Vec<usize> = spec.hidden_dims.clone();
        widths.pop();
        widths.insert(0, concat);
        // decoder mirrors encoder: d -> ... -> concat
        let mut prev = spec.embedding_dim();
        for &w in widths.iter().rev() {
            decoder.push(Affine::zeros(prev, w));
            prev = w;
        }
        Ok(ModelParams {
            n,
            m,
            spec,
            input,
            encoder,
            decoder,
            output,
            s_scale: 1.0,
            a_scale: 1.0,
        })
    }

    /// Uniform(-r, r) initialization with r = sqrt(6 / (fan_in + fan_out)),
    /// used when pretraining is disabled.
    pub fn random_init(n: usize, m: usize, spec: LayerSpec, seed: u64) -> Result<Self> {
        let mut params = ModelParams::zeros(n, m, spec)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for aff in params.affines_mut() {
            let (fi, fo) = (aff.w.rows(), aff.w.cols());
            let r = (6.0 / (fi + fo) as f64).sqrt();
            for v in aff.w.data_mut() {
                *v = rng.gen_range(-r..r);
            }
            // biases stay zero
        }
        Ok(params)
    }

    pub fn embedding_dim(&self) -> usize {
        self.spec.embedding_dim()
    }

    /// All layers in a fixed traversal order: input (structure then
    /// attribute, or joint), encoder bottom-up, decoder top-down, output
    /// (structure then attribute, or joint).
    pub fn affines(&self) -> Vec<&Affine> {
        let mut all = Vec::new();
        match &self.input {
            InputLayer::PerModality { structure, attribute } => {
                all.push(structure);
                all.push(attribute);
            }
            InputLayer::Joint(joint) => all.push(joint),
        }
        all.extend(self.encoder.iter());
        all.extend(self.decoder.iter());
        match &self.output {
            OutputLayer::PerModality { structure, attribute } => {
                all.push(structure);
                all.push(attribute);
            }
            OutputLayer::Joint(joint) => all.push(joint),
        }
        all
    }

    pub fn affines_mut(&mut self) -> Vec<&mut Affine> {
        let mut all = Vec::new();
        match &mut self.input {
            InputLayer::PerModality { structure, attribute } => {
                all.push(structure);
                all.push(attribute);
            }
            InputLayer::Joint(joint) => all.push(joint),
        }
        all.extend(self.encoder.iter_mut());
        all.extend(self.decoder.iter_mut());
        match &mut self.output {
            OutputLayer::PerModality { structure, attribute } => {
                all.push(structure);
                all.push(attribute);
            }
            OutputLayer::Joint(joint) => all.push(joint),
        }
        all
    }

    pub fn is_finite(&self) -> bool {
        self.affines().iter().all(|a| a.is_finite())
    }

    /// One SGD step: self ← self − lr · grads.
    pub fn sgd_step(&mut self, grads: &ModelParams, lr: f64) {
        let mut gs = grads.affines();
        for (p, g) in self.affines_mut().into_iter().zip(gs.drain(..)) {
            let pw = p.w.data_mut();
            for (v, d) in pw.iter_mut().zip(g.w.data()) {
                *v -= lr * d;
            }
            for (v, d) in p.b.iter_mut().zip(&g.b) {
                *v -= lr * d;
            }
        }
    }
}

/// One training batch: node rows plus the edges whose both endpoints fall in
/// the batch. Adjacency and attribute values are multiplied by the model's
/// input scales when consumed.
pub struct Batch<'a> {
    pub node_indices: Vec<usize>,
    pub s_rows: Vec<&'a SparseVec>,
    pub a_rows: Vec<&'a SparseVec>,
    /// (local i, local j, scaled weight) with each unordered pair listed
    /// once.
    pub edges: Vec<(usize, usize, f64)>,
    /// Rescale factor keeping the expected first-order gradient unbiased
    /// under mini-batching (1.0 for the full batch).
    pub first_order_scale: f64,
    pub s_scale: f64,
    pub a_scale: f64,
}

impl<'a> Batch<'a> {
    /// Batch covering every node of the network.
    pub fn full(net: &'a AttributedNetwork) -> Batch<'a> {
        let n = net.node_count();
        let s_scale = scale_for(net.max_edge_weight());
        let a_scale = scale_for(max_attr_value(net));
        Batch {
            node_indices: (0..n).collect(),
            s_rows: (0..n).map(|i| net.adjacency_row(i)).collect(),
            a_rows: (0..n).map(|i| net.attribute_row(i)).collect(),
            edges: net
                .edges()
                .iter()
                .map(|&(i, j, w)| (i as usize, j as usize, w * s_scale))
                .collect(),
            first_order_scale: 1.0,
            s_scale,
            a_scale,
        }
    }

    /// Batch over a subset of nodes. Edges are kept when both endpoints are
    /// in the subset, and the first-order term is rescaled by
    /// total_edges / edges_in_batch.
    pub fn from_indices(net: &'a AttributedNetwork, indices: &[usize]) -> Batch<'a> {
        let s_scale = scale_for(net.max_edge_weight());
        let a_scale = scale_for(max_attr_value(net));
        let mut local = vec![usize::MAX; net.node_count()];
        for (li, &gi) in indices.iter().enumerate() {
            local[gi] = li;
        }
        let mut edges = Vec::new();
        for &(i, j, w) in net.edges() {
            let (li, lj) = (local[i as usize], local[j as usize]);
            if li != usize::MAX && lj != usize::MAX {
                edges.push((li, lj, w * s_scale));
            }
        }
        let first_order_scale = if edges.is_empty() {
            1.0
        } else {
            net.edge_count() as f64 / edges.len() as f64
        };
        Batch {
            node_indices: indices.to_vec(),
            s_rows: indices.iter().map(|&i| net.adjacency_row(i)).collect(),
            a_rows: indices.iter().map(|&i| net.attribute_row(i)).collect(),
            edges,
            first_order_scale,
            s_scale,
            a_scale,
        }
    }

    pub fn len(&self) -> usize {
        self.node_indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.node_indices.is_empty()
    }
}

fn scale_for(max_value: f64) -> f64 {
    if max_value > 0.0 && max_value.is_finite() {
        1.0 / max_value.max(1.0)
    } else {
        1.0
    }
}

fn max_attr_value(net: &AttributedNetwork) -> f64 {
    (0..net.node_count())
        .flat_map(|i| net.attribute_row(i).iter().map(|(_, v)| v))
        .fold(0.0, f64::max)
}

/// Everything the backward pass needs from a forward pass: post-activation
/// outputs of every layer (the sigmoid derivative o·(1−o) is recovered from
/// them) plus the reconstructions.
pub struct ForwardCache {
    node_indices: Vec<usize>,
    /// Concatenated pre-processed features, batch × concat_dim.
    z1: Matrix,
    /// Encoder post-activations; the last entry is the embedding Y.
    enc: Vec<Matrix>,
    /// Decoder post-activations; the last entry has concat_dim columns.
    dec: Vec<Matrix>,
    s_hat: Matrix,
    a_hat: Matrix,
}

impl ForwardCache {
    pub fn embedding(&self) -> &Matrix {
        self.enc.last().unwrap_or(&self.z1)
    }

    pub fn s_hat(&self) -> &Matrix {
        &self.s_hat
    }

    pub fn a_hat(&self) -> &Matrix {
        &self.a_hat
    }
}

fn add_bias(x: &mut Matrix, b: &[f64]) {
    let cols = x.cols();
    for row in x.data_mut().chunks_mut(cols) {
        for (v, bias) in row.iter_mut().zip(b) {
            *v += bias;
        }
    }
}

/// rows · w where rows are sparse with a value multiplier.
fn sparse_matmul(rows: &[&SparseVec], scale: f64, w: &Matrix, offset: u32) -> Matrix {
    let mut out = Matrix::zeros(rows.len(), w.cols());
    for (i, row) in rows.iter().enumerate() {
        let out_row = out.row_mut(i);
        for (idx, val) in row.iter() {
            tensor::axpy(out_row, val * scale, w.row((offset + idx) as usize));
        }
    }
    out
}

/// Accumulate rowsᵀ · delta into grad for sparse rows (the input-layer
/// weight gradient).
fn sparse_at_b_into(
    grad: &mut Matrix,
    rows: &[&SparseVec],
    scale: f64,
    delta: &Matrix,
    offset: u32,
) {
    for (i, row) in rows.iter().enumerate() {
        let d_row = delta.row(i);
        for (idx, val) in row.iter() {
            tensor::axpy(grad.row_mut((offset + idx) as usize), val * scale, d_row);
        }
    }
}

fn col_sums(m: &Matrix) -> Vec<f64> {
    let mut out = vec![0.0; m.cols()];
    for i in 0..m.rows() {
        for (s, v) in out.iter_mut().zip(m.row(i)) {
            *s += v;
        }
    }
    out
}

fn split_cols(x: &Matrix, at: usize) -> (Matrix, Matrix) {
    let rows = x.rows();
    let cols = x.cols();
    let mut left = Matrix::zeros(rows, at);
    let mut right = Matrix::zeros(rows, cols - at);
    for i in 0..rows {
        left.row_mut(i).copy_from_slice(&x.row(i)[..at]);
        right.row_mut(i).copy_from_slice(&x.row(i)[at..]);
    }
    (left, right)
}

fn concat_cols(a: &Matrix, b: &Matrix) -> Matrix {
    let rows = a.rows();
    let mut out = Matrix::zeros(rows, a.cols() + b.cols());
    for i in 0..rows {
        out.row_mut(i)[..a.cols()].copy_from_slice(a.row(i));
        out.row_mut(i)[a.cols()..].copy_from_slice(b.row(i));
    }
    out
}

/// Multiply delta by the sigmoid derivative recovered from the
/// post-activation: delta ⊙ act ⊙ (1 − act), in place.
fn apply_sigmoid_grad(delta: &mut Matrix, act: &Matrix) {
    for (d, o) in delta.data_mut().iter_mut().zip(act.data()) {
        *d *= o * (1.0 - o);
    }
}

/// Run the full forward pass for a batch, keeping every activation for the
/// backward pass.
pub fn forward(params: &ModelParams, batch: &Batch) -> Result<ForwardCache> {
    if batch.s_rows.len() != batch.len() || batch.a_rows.len() != batch.len() {
        return Err(Error::InvalidInput("batch row lists disagree in length".into()));
    }
    // input level
    let z1 = match &params.input {
        InputLayer::PerModality { structure, attribute } => {
            let mut hs = sparse_matmul(&batch.s_rows, batch.s_scale, &structure.w, 0);
            add_bias(&mut hs, &structure.b);
            tensor::sigmoid_in_place(&mut hs);
            let mut ha = sparse_matmul(&batch.a_rows, batch.a_scale, &attribute.w, 0);
            add_bias(&mut ha, &attribute.b);
            tensor::sigmoid_in_place(&mut ha);
            concat_cols(&hs, &ha)
        }
        InputLayer::Joint(joint) => {
            let mut h = sparse_matmul(&batch.s_rows, batch.s_scale, &joint.w, 0);
            let ha = sparse_matmul(&batch.a_rows, batch.a_scale, &joint.w, params.n as u32);
            h.add_scaled(&ha, 1.0)?;
            add_bias(&mut h, &joint.b);
            tensor::sigmoid_in_place(&mut h);
            h
        }
    };
    // encoder
    let mut enc = Vec::with_capacity(params.encoder.len());
    let mut cur = &z1;
    for layer in &params.encoder {
        enc.push(layer.apply_sigmoid(cur)?);
        cur = enc.last().unwrap();
    }
    // decoder
    let mut dec = Vec::with_capacity(params.decoder.len());
    for layer in &params.decoder {
        dec.push(layer.apply_sigmoid(cur)?);
        cur = dec.last().unwrap();
    }
    // output level
    let (s_hat, a_hat) = match &params.output {
        OutputLayer::PerModality { structure, attribute } => {
            let (hs, ha) = split_cols(cur, params.spec.pre_struct_dim);
            (structure.apply_sigmoid(&hs)?, attribute.apply_sigmoid(&ha)?)
        }
        OutputLayer::Joint(joint) => {
            let both = joint.apply_sigmoid(cur)?;
            split_cols(&both, params.n)
        }
    };
    Ok(ForwardCache {
        node_indices: batch.node_indices.clone(),
        z1,
        enc,
        dec,
        s_hat,
        a_hat,
    })
}

/// Forward pass through input and encoder only, yielding the embedding rows.
pub fn embed_batch(params: &ModelParams, batch: &Batch) -> Result<Matrix> {
    let z1 = match &params.input {
        InputLayer::PerModality { structure, attribute } => {
            let mut hs = sparse_matmul(&batch.s_rows, batch.s_scale, &structure.w, 0);
            add_bias(&mut hs, &structure.b);
            tensor::sigmoid_in_place(&mut hs);
            let mut ha = sparse_matmul(&batch.a_rows, batch.a_scale, &attribute.w, 0);
            add_bias(&mut ha, &attribute.b);
            tensor::sigmoid_in_place(&mut ha);
            concat_cols(&hs, &ha)
        }
        InputLayer::Joint(joint) => {
            let mut h = sparse_matmul(&batch.s_rows, batch.s_scale, &joint.w, 0);
            let ha = sparse_matmul(&batch.a_rows, batch.a_scale, &joint.w, params.n as u32);
            h.add_scaled(&ha, 1.0)?;
            add_bias(&mut h, &joint.b);
            tensor::sigmoid_in_place(&mut h);
            h
        }
    };
    let mut cur = z1;
    for layer in &params.encoder {
        cur = layer.apply_sigmoid(&cur)?;
    }
    Ok(cur)
}

/// Embedding matrix for every node of a network, computed in fixed-size
/// chunks.
pub fn embed_all(params: &ModelParams, net: &AttributedNetwork) -> Result<Matrix> {
    let n = net.node_count();
    let d = params.embedding_dim();
    let mut out = Matrix::zeros(n, d);
    let chunk = 1024;
    let mut start = 0;
    while start < n {
        let end = (start + chunk).min(n);
        let indices: Vec<usize> = (start..end).collect();
        let batch = Batch::from_indices(net, &indices);
        let emb = embed_batch(params, &batch)?;
        for (local, global) in (start..end).enumerate() {
            out.row_mut(global).copy_from_slice(emb.row(local));
        }
        start = end;
    }
    Ok(out)
}

/// Embed a node from whichever modality vectors are present; a missing
/// modality is replaced by the zero vector. Inputs are raw (unscaled)
/// values; the scales stored in the params are applied here.
pub fn embed_new_node(
    params: &ModelParams,
    s_vec: Option<&SparseVec>,
    a_vec: Option<&SparseVec>,
) -> Result<Vec<f64>> {
    if s_vec.is_none() && a_vec.is_none() {
        return Err(Error::InvalidInput(
            "at least one of the structure / attribute vectors must be present".into(),
        ));
    }
    let empty = SparseVec::new();
    let s = s_vec.unwrap_or(&empty);
    let a = a_vec.unwrap_or(&empty);
    if let Some(max) = s.iter().map(|(i, _)| i).max() {
        if max as usize >= params.n {
            return Err(Error::InvalidInput(format!(
                "structure index {max} out of range (n = {})",
                params.n
            )));
        }
    }
    if let Some(max) = a.iter().map(|(i, _)| i).max() {
        if max as usize >= params.m {
            return Err(Error::InvalidInput(format!(
                "attribute index {max} out of range (m = {})",
                params.m
            )));
        }
    }
    let batch = Batch {
        node_indices: vec![0],
        s_rows: vec![s],
        a_rows: vec![a],
        edges: Vec::new(),
        first_order_scale: 1.0,
        s_scale: params.s_scale,
        a_scale: params.a_scale,
    };
    let emb = embed_batch(params, &batch)?;
    Ok(emb.row(0).to_vec())
}

/// Σ over pairs of w · ‖y_i − y_j‖²; the first-order proximity loss.
pub fn loss_first_order(y: &Matrix, pairs: &[(usize, usize, f64)]) -> f64 {
    let mut total = 0.0;
    for &(i, j, w) in pairs {
        let (yi, yj) = (y.row(i), y.row(j));
        let mut d2 = 0.0;
        for (a, b) in yi.iter().zip(yj) {
            let d = a - b;
            d2 += d * d;
        }
        total += w * d2;
    }
    total
}

/// ‖(X̂ − X) ⊙ R‖²_F with r = gamma where x ≠ 0 and r = 1 elsewhere.
fn masked_sq_err_dense(x_hat: &Matrix, x: &Matrix, gamma: f64, op: &'static str) -> Result<f64> {
    if x_hat.rows() != x.rows() || x_hat.cols() != x.cols() {
        return Err(Error::Shape {
            op,
            left: format!("{}x{}", x_hat.rows(), x_hat.cols()),
            right: format!("{}x{}", x.rows(), x.cols()),
        });
    }
    let mut total = 0.0;
    for (h, v) in x_hat.data().iter().zip(x.data()) {
        let r = if *v != 0.0 { gamma } else { 1.0 };
        let e = (h - v) * r;
        total += e * e;
    }
    Ok(total)
}

/// Second-order (adjacency reconstruction) loss against a dense target.
pub fn loss_second_order(s_hat: &Matrix, s: &Matrix, gamma1: f64) -> Result<f64> {
    masked_sq_err_dense(s_hat, s, gamma1, "loss_second_order")
}

/// Attribute reconstruction loss against a dense target.
pub fn loss_attribute(a_hat: &Matrix, a: &Matrix, gamma2: f64) -> Result<f64> {
    masked_sq_err_dense(a_hat, a, gamma2, "loss_attribute")
}

/// Same masked error against sparse target rows with a value multiplier.
fn masked_sq_err_sparse(x_hat: &Matrix, rows: &[&SparseVec], scale: f64, gamma: f64) -> f64 {
    let mut total = 0.0;
    for (i, row) in rows.iter().enumerate() {
        let hat = x_hat.row(i);
        let mut next = row.iter().peekable();
        for (j, h) in hat.iter().enumerate() {
            let target = match next.peek() {
                Some(&(idx, v)) if idx as usize == j => {
                    next.next();
                    v * scale
                }
                _ => 0.0,
            };
            let r = if target != 0.0 { gamma } else { 1.0 };
            let e = (h - target) * r;
            total += e * e;
        }
    }
    total
}

/// ½ Σ ‖W‖²_F over every weight matrix (biases excluded).
pub fn loss_reg(params: &ModelParams) -> f64 {
    0.5 * params
        .affines()
        .iter()
        .map(|a| tensor::frobenius_sq(&a.w))
        .sum::<f64>()
}

/// Combine the components: λ·attribute + α·second_order + first_order
/// + υ·regularizer.
pub fn loss_total(
    first_order: f64,
    second_order: f64,
    attribute: f64,
    regularizer: f64,
    weights: &LossWeights,
) -> f64 {
    weights.lambda * attribute + weights.alpha * second_order + first_order
        + weights.upsilon * regularizer
}

/// Per-component loss values for one batch.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossBreakdown {
    pub first_order: f64,
    pub second_order: f64,
    pub attribute: f64,
    pub regularizer: f64,
    pub mix: f64,
}

/// Compute every loss component from a forward cache.
pub fn losses(
    params: &ModelParams,
    cache: &ForwardCache,
    batch: &Batch,
    weights: &LossWeights,
    penalties: &PenaltyConfig,
) -> LossBreakdown {
    let first_order =
        batch.first_order_scale * loss_first_order(cache.embedding(), &batch.edges);
    let second_order =
        masked_sq_err_sparse(&cache.s_hat, &batch.s_rows, batch.s_scale, penalties.gamma1);
    let attribute =
        masked_sq_err_sparse(&cache.a_hat, &batch.a_rows, batch.a_scale, penalties.gamma2);
    let regularizer = loss_reg(params);
    let mix = loss_total(first_order, second_order, attribute, regularizer, weights);
    LossBreakdown {
        first_order,
        second_order,
        attribute,
        regularizer,
        mix,
    }
}

/// Output-head delta: 2·w·(x̂ − x)·r² ⊙ x̂(1 − x̂), built row-wise from the
/// sparse target.
fn output_delta(
    x_hat: &Matrix,
    rows: &[&SparseVec],
    scale: f64,
    gamma: f64,
    loss_weight: f64,
) -> Matrix {
    let mut delta = Matrix::zeros(x_hat.rows(), x_hat.cols());
    let g2 = gamma * gamma;
    for (i, row) in rows.iter().enumerate() {
        let hat = x_hat.row(i);
        let out = delta.row_mut(i);
        let mut next = row.iter().peekable();
        for (j, (h, d)) in hat.iter().zip(out.iter_mut()).enumerate() {
            let target = match next.peek() {
                Some(&(idx, v)) if idx as usize == j => {
                    next.next();
                    v * scale
                }
                _ => 0.0,
            };
            let r2 = if target != 0.0 { g2 } else { 1.0 };
            *d = 2.0 * loss_weight * (h - target) * r2 * h * (1.0 - h);
        }
    }
    delta
}

/// Gradient of the first-order term with respect to the embedding rows.
fn first_order_grad(y: &Matrix, pairs: &[(usize, usize, f64)], scale: f64) -> Matrix {
    let mut grad = Matrix::zeros(y.rows(), y.cols());
    for &(i, j, w) in pairs {
        let f = 2.0 * scale * w;
        for c in 0..y.cols() {
            let diff = y.get(i, c) - y.get(j, c);
            let gi = grad.get(i, c) + f * diff;
            grad.set(i, c, gi);
            let gj = grad.get(j, c) - f * diff;
            grad.set(j, c, gj);
        }
    }
    grad
}

/// Gradients of the total loss with respect to every parameter, shaped like
/// the parameters themselves.
pub fn backward(
    params: &ModelParams,
    cache: &ForwardCache,
    batch: &Batch,
    weights: &LossWeights,
    penalties: &PenaltyConfig,
) -> Result<ModelParams> {
    if cache.node_indices != batch.node_indices {
        return Err(Error::StaleCache(format!(
            "cache was built for {} nodes, batch has {}",
            cache.node_indices.len(),
            batch.node_indices.len()
        )));
    }
    if cache.s_hat.cols() != params.n || cache.a_hat.cols() != params.m {
        return Err(Error::StaleCache("cache shapes do not match params".into()));
    }
    let mut grads = ModelParams::zeros(params.n, params.m, params.spec.clone())?;

    let delta_s = output_delta(
        &cache.s_hat,
        &batch.s_rows,
        batch.s_scale,
        penalties.gamma1,
        weights.alpha,
    );
    let delta_a = output_delta(
        &cache.a_hat,
        &batch.a_rows,
        batch.a_scale,
        penalties.gamma2,
        weights.lambda,
    );

    let dec_out = cache.dec.last().unwrap_or_else(|| cache.embedding());
    // output level
    let mut delta = match (&params.output, &mut grads.output) {
        (
            OutputLayer::PerModality { structure, attribute },
            OutputLayer::PerModality { structure: gs, attribute: ga },
        ) => {
            let (hs, ha) = split_cols(dec_out, params.spec.pre_struct_dim);
            gs.w = tensor::matmul_at_b(&hs, &delta_s)?;
            gs.b = col_sums(&delta_s);
            ga.w = tensor::matmul_at_b(&ha, &delta_a)?;
            ga.b = col_sums(&delta_a);
            let dhs = tensor::matmul_a_bt(&delta_s, &structure.w)?;
            let dha = tensor::matmul_a_bt(&delta_a, &attribute.w)?;
            concat_cols(&dhs, &dha)
        }
        (OutputLayer::Joint(joint), OutputLayer::Joint(gj)) => {
            let delta_out = concat_cols(&delta_s, &delta_a);
            gj.w = tensor::matmul_at_b(dec_out, &delta_out)?;
            gj.b = col_sums(&delta_out);
            tensor::matmul_a_bt(&delta_out, &joint.w)?
        }
        _ => unreachable!("grads mirror params"),
    };
    drop(delta_s);
    drop(delta_a);

    // decoder, walking down to the embedding
    for k in (0..params.decoder.len()).rev() {
        let act = &cache.dec[k];
        apply_sigmoid_grad(&mut delta, act);
        let input = if k == 0 {
            cache.embedding()
        } else {
            &cache.dec[k - 1]
        };
        grads.decoder[k].w = tensor::matmul_at_b(input, &delta)?;
        grads.decoder[k].b = col_sums(&delta);
        delta = tensor::matmul_a_bt(&delta, &params.decoder[k].w)?;
    }

    // first-order term joins at the embedding
    delta.add_scaled(
        &first_order_grad(cache.embedding(), &batch.edges, batch.first_order_scale),
        1.0,
    )?;

    // encoder
    for k in (0..params.encoder.len()).rev() {
        let act = &cache.enc[k];
        apply_sigmoid_grad(&mut delta, act);
        let input = if k == 0 { &cache.z1 } else { &cache.enc[k - 1] };
        grads.encoder[k].w = tensor::matmul_at_b(input, &delta)?;
        grads.encoder[k].b = col_sums(&delta);
        delta = tensor::matmul_a_bt(&delta, &params.encoder[k].w)?;
    }

    // input level
    match (&params.input, &mut grads.input) {
        (
            InputLayer::PerModality { .. },
            InputLayer::PerModality { structure: gs, attribute: ga },
        ) => {
            let (mut ds, mut da) = split_cols(&delta, params.spec.pre_struct_dim);
            let (hs, ha) = split_cols(&cache.z1, params.spec.pre_struct_dim);
            apply_sigmoid_grad(&mut ds, &hs);
            apply_sigmoid_grad(&mut da, &ha);
            sparse_at_b_into(&mut gs.w, &batch.s_rows, batch.s_scale, &ds, 0);
            gs.b = col_sums(&ds);
            sparse_at_b_into(&mut ga.w, &batch.a_rows, batch.a_scale, &da, 0);
            ga.b = col_sums(&da);
        }
        (InputLayer::Joint(_), InputLayer::Joint(gj)) => {
            apply_sigmoid_grad(&mut delta, &cache.z1);
            sparse_at_b_into(&mut gj.w, &batch.s_rows, batch.s_scale, &delta, 0);
            sparse_at_b_into(&mut gj.w, &batch.a_rows, batch.a_scale, &delta, params.n as u32);
            gj.b = col_sums(&delta);
        }
        _ => unreachable!("grads mirror params"),
    }

    // regularizer gradient: υ · W on every weight matrix, biases untouched
    if weights.upsilon != 0.0 {
        let sources = params.affines();
        for (g, p) in grads.affines_mut().into_iter().zip(sources) {
            let gw = g.w.data_mut();
            for (gv, pv) in gw.iter_mut().zip(p.w.data()) {
                *gv += weights.upsilon * pv;
            }
        }
    }

    Ok(grads)
}
