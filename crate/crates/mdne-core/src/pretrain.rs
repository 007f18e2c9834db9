//! Greedy layer-wise pretraining. Each level of the tower is trained as a
//! Bernoulli–Bernoulli RBM with one-step contrastive divergence, and the
//! resulting weights seed both the encoder (as-is) and the decoder
//! (transposed copies, so fine-tuning can diverge them).

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::graph::AttributedNetwork;
use crate::model::{Affine, InputLayer, LayerSpec, ModelParams, OutputLayer};
use crate::tensor::{self, Matrix};

/// One restricted Boltzmann machine.
#[derive(Debug, Clone)]
pub struct RbmLayer {
    /// visible × hidden weights.
    pub w: Matrix,
    pub visible_bias: Vec<f64>,
    pub hidden_bias: Vec<f64>,
}

impl RbmLayer {
    pub fn visible_dim(&self) -> usize {
        self.w.rows()
    }

    pub fn hidden_dim(&self) -> usize {
        self.w.cols()
    }

    /// Mean-field hidden activations σ(v·W + c).
    pub fn hidden_probs(&self, v: &Matrix) -> Result<Matrix> {
        let mut h = tensor::matmul(v, &self.w)?;
        add_bias(&mut h, &self.hidden_bias);
        tensor::sigmoid_in_place(&mut h);
        Ok(h)
    }

    /// Mean-field visible reconstruction σ(h·Wᵀ + b).
    pub fn visible_probs(&self, h: &Matrix) -> Result<Matrix> {
        let mut v = tensor::matmul_a_bt(h, &self.w)?;
        add_bias(&mut v, &self.visible_bias);
        tensor::sigmoid_in_place(&mut v);
        Ok(v)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RbmConfig {
    pub lr: f64,
    pub epochs: usize,
    pub batch: usize,
    pub seed: u64,
    /// Momentum on the CD updates: 0.5 for the first five epochs, then this
    /// value. Sparse rows produce tiny per-batch statistics, and without
    /// momentum the weights never reach a scale the fine-tuning stage can
    /// use.
    pub momentum: f64,
}

impl Default for RbmConfig {
    fn default() -> Self {
        RbmConfig {
            lr: 0.1,
            epochs: 30,
            batch: 64,
            seed: 0,
            momentum: 0.9,
        }
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

/// One CD-1 step on a visible batch. Positive statistics come from the batch
/// itself; negative statistics come from the mean-field reconstruction of
/// that same batch (hidden states sampled once).
pub struct Cd1Step {
    pub dw: Matrix,
    pub d_visible_bias: Vec<f64>,
    pub d_hidden_bias: Vec<f64>,
    /// σ(v·W + c) for the input batch.
    pub pos_hidden: Matrix,
    /// Mean-field reconstruction of the input batch.
    pub neg_visible: Matrix,
    pub neg_hidden: Matrix,
}

pub fn cd1_step(rbm: &RbmLayer, v: &Matrix, rng: &mut ChaCha8Rng) -> Result<Cd1Step> {
    let pos_hidden = rbm.hidden_probs(v)?;
    let mut h_sample = pos_hidden.clone();
    for p in h_sample.data_mut() {
        *p = if rng.gen::<f64>() < *p { 1.0 } else { 0.0 };
    }
    let neg_visible = rbm.visible_probs(&h_sample)?;
    let neg_hidden = rbm.hidden_probs(&neg_visible)?;

    let scale = 1.0 / v.rows() as f64;
    let mut dw = tensor::matmul_at_b(v, &pos_hidden)?;
    let neg = tensor::matmul_at_b(&neg_visible, &neg_hidden)?;
    dw.add_scaled(&neg, -1.0)?;
    for x in dw.data_mut() {
        *x *= scale;
    }
    let mut d_visible_bias = vec![0.0; rbm.visible_dim()];
    for i in 0..v.rows() {
        for ((d, a), b) in d_visible_bias.iter_mut().zip(v.row(i)).zip(neg_visible.row(i)) {
            *d += (a - b) * scale;
        }
    }
    let mut d_hidden_bias = vec![0.0; rbm.hidden_dim()];
    for i in 0..v.rows() {
        for ((d, a), b) in d_hidden_bias.iter_mut().zip(pos_hidden.row(i)).zip(neg_hidden.row(i)) {
            *d += (a - b) * scale;
        }
    }
    Ok(Cd1Step {
        dw,
        d_visible_bias,
        d_hidden_bias,
        pos_hidden,
        neg_visible,
        neg_hidden,
    })
}

/// Train an RBM on dense data rows (entries in [0, 1]) with CD-1.
/// Returns the trained layer and the per-epoch mean squared reconstruction
/// error per unit.
pub fn train_rbm(data: &Matrix, hidden_dim: usize, config: &RbmConfig) -> Result<(RbmLayer, Vec<f64>)> {
    if data.rows() == 0 {
        return Err(Error::EmptyInput("rbm training data has no rows".into()));
    }
    if hidden_dim == 0 {
        return Err(Error::InvalidConfig("rbm hidden_dim must be >= 1".into()));
    }
    if config.batch == 0 {
        return Err(Error::InvalidConfig("rbm batch size must be >= 1".into()));
    }
    let visible_dim = data.cols();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);

    // Small gaussian weights, zero biases.
    let mut w = Matrix::zeros(visible_dim, hidden_dim);
    for v in w.data_mut() {
        let u1: f64 = rng.gen_range(f64::EPSILON..1.0);
        let u2: f64 = rng.gen::<f64>();
        *v = 0.01 * (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos();
    }
    let mut rbm = RbmLayer {
        w,
        visible_bias: vec![0.0; visible_dim],
        hidden_bias: vec![0.0; hidden_dim],
    };

    let n = data.rows();
    let mut order: Vec<usize> = (0..n).collect();
    let mut epoch_errors = Vec::with_capacity(config.epochs);
    let mut vel_w = Matrix::zeros(visible_dim, hidden_dim);
    let mut vel_vb = vec![0.0; visible_dim];
    let mut vel_hb = vec![0.0; hidden_dim];
    for epoch in 0..config.epochs {
        let momentum = if epoch < 5 { 0.5 } else { config.momentum };
        for pos in 0..n.saturating_sub(1) {
            let pick = rng.gen_range(pos..n);
            order.swap(pos, pick);
        }
        let mut sq_err = 0.0;
        for chunk in order.chunks(config.batch) {
            let mut v = Matrix::zeros(chunk.len(), visible_dim);
            for (local, &global) in chunk.iter().enumerate() {
                v.row_mut(local).copy_from_slice(data.row(global));
            }
            let step = cd1_step(&rbm, &v, &mut rng)?;
            for ((x, vel), d) in rbm
                .w
                .data_mut()
                .iter_mut()
                .zip(vel_w.data_mut())
                .zip(step.dw.data())
            {
                *vel = momentum * *vel + config.lr * d;
                *x += *vel;
            }
            for ((x, vel), d) in rbm
                .visible_bias
                .iter_mut()
                .zip(&mut vel_vb)
                .zip(&step.d_visible_bias)
            {
                *vel = momentum * *vel + config.lr * d;
                *x += *vel;
            }
            for ((x, vel), d) in rbm
                .hidden_bias
                .iter_mut()
                .zip(&mut vel_hb)
                .zip(&step.d_hidden_bias)
            {
                *vel = momentum * *vel + config.lr * d;
                *x += *vel;
            }
            for (a, b) in v.data().iter().zip(step.neg_visible.data()) {
                let e = a - b;
                sq_err += e * e;
            }
        }
        epoch_errors.push(sq_err / (n * visible_dim) as f64);
    }
    Ok((rbm, epoch_errors))
}

fn mix_seed(seed: u64, layer: u64) -> u64 {
    // splitmix64 of (seed, layer)
    let mut z = seed ^ layer.wrapping_mul(0x9E3779B97F4A7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58476D1CE4E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D049BB133111EB);
    z ^ (z >> 31)
}

fn dense_rows(net: &AttributedNetwork, structural: bool, scale: f64) -> Matrix {
    let n = net.node_count();
    let cols = if structural { n } else { net.attr_count() };
    let mut out = Matrix::zeros(n, cols);
    for i in 0..n {
        let row = if structural {
            net.adjacency_row(i)
        } else {
            net.attribute_row(i)
        };
        let out_row = out.row_mut(i);
        for (j, v) in row.iter() {
            out_row[j as usize] = v * scale;
        }
    }
    out
}

fn scale_for(max_value: f64) -> f64 {
    if max_value > 0.0 && max_value.is_finite() {
        1.0 / max_value.max(1.0)
    } else {
        1.0
    }
}

/// Train the whole tower layer by layer and assemble initial model
/// parameters: encoder weights come from each RBM, decoder weights are the
/// transposed copies, hidden biases seed the encoder side and visible
/// biases the decoder side.
pub fn pretrain_stack(
    net: &AttributedNetwork,
    spec: &LayerSpec,
    config: &RbmConfig,
) -> Result<ModelParams> {
    let n = net.node_count();
    let m = net.attr_count();
    spec.validate(n, m)?;
    let mut params = ModelParams::zeros(n, m, spec.clone())?;
    params.s_scale = scale_for(net.max_edge_weight());
    params.a_scale = scale_for(
        (0..n)
            .flat_map(|i| net.attribute_row(i).iter().map(|(_, v)| v))
            .fold(0.0, f64::max),
    );

    let s_data = dense_rows(net, true, params.s_scale);
    let a_data = dense_rows(net, false, params.a_scale);

    // Pre-processing level.
    let mut layer_idx = 0u64;
    let concat = match (&mut params.input, &mut params.output) {
        (
            InputLayer::PerModality { structure, attribute },
            OutputLayer::PerModality { structure: out_s, attribute: out_a },
        ) => {
            let cfg_s = RbmConfig {
                seed: mix_seed(config.seed, layer_idx),
                ..*config
            };
            layer_idx += 1;
            let (rbm_s, _) = train_rbm(&s_data, spec.pre_struct_dim, &cfg_s)?;
            let cfg_a = RbmConfig {
                seed: mix_seed(config.seed, layer_idx),
                ..*config
            };
            layer_idx += 1;
            let (rbm_a, _) = train_rbm(&a_data, spec.pre_attr_dim, &cfg_a)?;

            let hs = rbm_s.hidden_probs(&s_data)?;
            let ha = rbm_a.hidden_probs(&a_data)?;
            *structure = Affine {
                w: rbm_s.w.clone(),
                b: rbm_s.hidden_bias.clone(),
            };
            *out_s = Affine {
                w: rbm_s.w.transpose(),
                b: rbm_s.visible_bias.clone(),
            };
            *attribute = Affine {
                w: rbm_a.w.clone(),
                b: rbm_a.hidden_bias.clone(),
            };
            *out_a = Affine {
                w: rbm_a.w.transpose(),
                b: rbm_a.visible_bias.clone(),
            };
            hstack(&hs, &ha)
        }
        (InputLayer::Joint(joint), OutputLayer::Joint(out_j)) => {
            let joined = hstack(&s_data, &a_data);
            let cfg = RbmConfig {
                seed: mix_seed(config.seed, layer_idx),
                ..*config
            };
            layer_idx += 1;
            let (rbm, _) = train_rbm(&joined, spec.concat_dim(), &cfg)?;
            let h = rbm.hidden_probs(&joined)?;
            *joint = Affine {
                w: rbm.w.clone(),
                b: rbm.hidden_bias.clone(),
            };
            *out_j = Affine {
                w: rbm.w.transpose(),
                b: rbm.visible_bias.clone(),
            };
            h
        }
        _ => unreachable!("input and output mirror each other"),
    };

    // Encoder tower; each level consumes the previous level's mean-field
    // activations.
    let mut cur = concat;
    let k_enc = params.encoder.len();
    for (k, &hidden) in spec.hidden_dims.iter().enumerate() {
        let cfg = RbmConfig {
            seed: mix_seed(config.seed, layer_idx),
            ..*config
        };
        layer_idx += 1;
        let (rbm, _) = train_rbm(&cur, hidden, &cfg)?;
        params.encoder[k] = Affine {
            w: rbm.w.clone(),
            b: rbm.hidden_bias.clone(),
        };
        params.decoder[k_enc - 1 - k] = Affine {
            w: rbm.w.transpose(),
            b: rbm.visible_bias.clone(),
        };
        cur = rbm.hidden_probs(&cur)?;
    }
    Ok(params)
}

fn hstack(a: &Matrix, b: &Matrix) -> Matrix {
    let rows = a.rows();
    let mut out = Matrix::zeros(rows, a.cols() + b.cols());
    for i in 0..rows {
        out.row_mut(i)[..a.cols()].copy_from_slice(a.row(i));
        out.row_mut(i)[a.cols()..].copy_from_slice(b.row(i));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::SparseVec;
    use crate::model::{forward, losses, Batch, LossWeights, PenaltyConfig};

    fn toy_net() -> AttributedNetwork {
        let attr_rows = vec![
            SparseVec::from_pairs(vec![(0, 1.0), (1, 1.0)]).unwrap(),
            SparseVec::from_pairs(vec![(1, 1.0)]).unwrap(),
            SparseVec::from_pairs(vec![(2, 1.0)]).unwrap(),
            SparseVec::from_pairs(vec![(0, 1.0), (3, 1.0)]).unwrap(),
            SparseVec::from_pairs(vec![(3, 1.0)]).unwrap(),
            SparseVec::new(),
        ];
        AttributedNetwork::from_parts(
            (0..6).map(|i| format!("n{i}")).collect(),
            4,
            vec![(0, 1, 1.0), (1, 2, 1.0), (2, 3, 1.0), (3, 4, 1.0), (0, 5, 1.0)],
            attr_rows,
            None,
            Vec::new(),
        )
        .unwrap()
    }

    fn toy_spec() -> LayerSpec {
        LayerSpec {
            pre_struct_dim: 3,
            pre_attr_dim: 2,
            hidden_dims: vec![2],
            preprocess: true,
        }
    }

    #[test]
    fn repeated_pattern_reconstructs_below_threshold() {
        // Eight copies of one 4-bit pattern; 50 epochs must push the
        // per-unit reconstruction error below 0.01.
        let pattern = vec![1.0, 0.0, 1.0, 0.0];
        let rows: Vec<Vec<f64>> = (0..8).map(|_| pattern.clone()).collect();
        let data = Matrix::from_rows(&rows).unwrap();
        let cfg = RbmConfig {
            lr: 0.5,
            epochs: 50,
            batch: 8,
            seed: 1,
            momentum: 0.9,
        };
        let (rbm, errors) = train_rbm(&data, 3, &cfg).unwrap();
        assert!(
            *errors.last().unwrap() < 0.01,
            "per-unit error {} after 50 epochs",
            errors.last().unwrap()
        );
        // Hidden activations close to deterministic: far from 0.5.
        let h = rbm.hidden_probs(&data).unwrap();
        for p in h.data() {
            assert!((p - 0.5).abs() > 0.25, "hidden unit stuck near 0.5: {p}");
        }
    }

    #[test]
    fn fixed_seed_is_bitwise_reproducible() {
        let data = Matrix::from_rows(&[
            vec![1.0, 0.0, 0.0, 1.0],
            vec![0.0, 1.0, 1.0, 0.0],
            vec![1.0, 1.0, 0.0, 0.0],
        ])
        .unwrap();
        let cfg = RbmConfig {
            lr: 0.1,
            epochs: 5,
            batch: 2,
            seed: 99,
            momentum: 0.9,
        };
        let (a, ea) = train_rbm(&data, 2, &cfg).unwrap();
        let (b, eb) = train_rbm(&data, 2, &cfg).unwrap();
        assert_eq!(a.w, b.w);
        assert_eq!(a.visible_bias, b.visible_bias);
        assert_eq!(a.hidden_bias, b.hidden_bias);
        assert_eq!(ea, eb);
    }

    #[test]
    fn training_beats_random_init_on_identity_data() {
        let rows: Vec<Vec<f64>> = (0..4)
            .map(|i| (0..4).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
            .collect();
        let data = Matrix::from_rows(&rows).unwrap();
        let cfg = RbmConfig {
            lr: 0.3,
            epochs: 60,
            batch: 4,
            seed: 3,
            momentum: 0.9,
        };
        let (trained, errors) = train_rbm(&data, 4, &cfg).unwrap();
        // Baseline: the same init, zero epochs of training.
        let cfg0 = RbmConfig { epochs: 0, ..cfg };
        let (raw, _) = train_rbm(&data, 4, &cfg0).unwrap();
        let recon_err = |rbm: &RbmLayer| {
            let h = rbm.hidden_probs(&data).unwrap();
            let v = rbm.visible_probs(&h).unwrap();
            let mut e = 0.0;
            for (a, b) in data.data().iter().zip(v.data()) {
                e += (a - b) * (a - b);
            }
            e
        };
        assert!(
            recon_err(&trained) < recon_err(&raw),
            "training must beat the untrained baseline"
        );
        assert!(errors.first().unwrap() > errors.last().unwrap());
    }

    #[test]
    fn train_rbm_rejects_degenerate_inputs() {
        let data = Matrix::zeros(0, 4);
        assert!(train_rbm(&data, 2, &RbmConfig::default()).is_err());
        let data = Matrix::zeros(3, 4);
        assert!(train_rbm(&data, 0, &RbmConfig::default()).is_err());
    }

    #[test]
    fn cd1_statistics_come_from_the_same_batch() {
        let data = Matrix::from_rows(&[vec![1.0, 0.0, 1.0], vec![0.0, 1.0, 0.0]]).unwrap();
        let rbm = RbmLayer {
            w: Matrix::from_vec(3, 2, vec![0.1, -0.2, 0.3, 0.0, -0.1, 0.2]).unwrap(),
            visible_bias: vec![0.0; 3],
            hidden_bias: vec![0.1, -0.1],
        };
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let step = cd1_step(&rbm, &data, &mut rng).unwrap();
        // Positive hidden statistics recompute exactly from the input batch.
        let pos = rbm.hidden_probs(&data).unwrap();
        assert_eq!(step.pos_hidden, pos);
        // Negative phase is the reconstruction of that same batch: same row
        // count, and feeding it forward reproduces the negative hidden stats.
        assert_eq!(step.neg_visible.rows(), data.rows());
        let neg_h = rbm.hidden_probs(&step.neg_visible).unwrap();
        assert_eq!(step.neg_hidden, neg_h);
        // No hidden state: same rng seed, same update.
        let mut rng2 = ChaCha8Rng::seed_from_u64(5);
        let step2 = cd1_step(&rbm, &data, &mut rng2).unwrap();
        assert_eq!(step.dw, step2.dw);
    }

    #[test]
    fn stack_produces_expected_shapes() {
        let net = toy_net();
        let cfg = RbmConfig {
            epochs: 2,
            batch: 3,
            ..Default::default()
        };
        let params = pretrain_stack(&net, &toy_spec(), &cfg).unwrap();
        let shapes: Vec<(usize, usize)> = params
            .affines()
            .iter()
            .map(|a| (a.w.rows(), a.w.cols()))
            .collect();
        // input s, input a, encoder, decoder, output s, output a
        assert_eq!(
            shapes,
            vec![(6, 3), (4, 2), (5, 2), (2, 5), (3, 6), (2, 4)]
        );
        assert!(params.is_finite());
        // Decoder is the transposed copy of the encoder at init.
        assert_eq!(params.decoder[0].w, params.encoder[0].w.transpose());
    }

    #[test]
    fn pretrained_init_beats_random_init_on_reconstruction() {
        // CD-1 optimizes the unweighted reconstruction, so the comparison is
        // made with the nonzero penalties at their floor; large γ skews the
        // mix toward mid-range outputs that no reconstruction pass produces.
        let net = toy_net();
        let spec = toy_spec();
        let weights = LossWeights::default();
        let pen = PenaltyConfig {
            gamma1: 1.001,
            gamma2: 1.001,
        };
        let batch = Batch::full(&net);
        let mut pre_total = 0.0;
        let mut rand_total = 0.0;
        for seed in 0..10 {
            let cfg = RbmConfig {
                epochs: 30,
                batch: 3,
                seed,
                ..Default::default()
            };
            let pre = pretrain_stack(&net, &spec, &cfg).unwrap();
            let cache = forward(&pre, &batch).unwrap();
            pre_total += losses(&pre, &cache, &batch, &weights, &pen).mix;

            let rnd = ModelParams::random_init(6, 4, spec.clone(), seed).unwrap();
            let cache = forward(&rnd, &batch).unwrap();
            rand_total += losses(&rnd, &cache, &batch, &weights, &pen).mix;
        }
        assert!(
            pre_total < rand_total,
            "pretrained {pre_total} should start below random {rand_total} over 10 seeds"
        );
    }

    #[test]
    fn random_init_respects_documented_bounds() {
        let params = ModelParams::random_init(6, 4, toy_spec(), 42).unwrap();
        for aff in params.affines() {
            let r = (6.0 / (aff.w.rows() + aff.w.cols()) as f64).sqrt();
            for v in aff.w.data() {
                assert!(v.abs() < r, "weight {v} outside ±{r}");
            }
            assert!(aff.b.iter().all(|b| *b == 0.0));
        }
    }

    #[test]
    fn stack_seeds_joint_mode_too() {
        let net = toy_net();
        let spec = LayerSpec {
            preprocess: false,
            ..toy_spec()
        };
        let cfg = RbmConfig {
            epochs: 2,
            batch: 3,
            ..Default::default()
        };
        let params = pretrain_stack(&net, &spec, &cfg).unwrap();
        let shapes: Vec<(usize, usize)> = params
            .affines()
            .iter()
            .map(|a| (a.w.rows(), a.w.cols()))
            .collect();
        assert_eq!(shapes, vec![(10, 5), (5, 2), (2, 5), (5, 10)]);
    }
}
