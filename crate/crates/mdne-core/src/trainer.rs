//! Fine-tuning: plain SGD on the combined loss until the iteration budget
//! or convergence, starting from layer-wise pretrained weights. Also the
//! coordinate-wise hyperparameter sweep.

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::eval;
use crate::graph::{split_attributes, split_links, AttributedNetwork};
use crate::model::{
    backward, embed_all, forward, losses, Batch, LayerSpec, LossWeights, ModelParams,
    PenaltyConfig,
};
use crate::pretrain::{pretrain_stack, RbmConfig};
use crate::tensor::Matrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BatchPolicy {
    /// Full-batch for small networks, 1024-node batches above 5000 nodes.
    Auto,
    Full,
    Size(usize),
}

impl BatchPolicy {
    fn resolve(&self, n: usize) -> Result<Option<usize>> {
        match self {
            BatchPolicy::Auto => Ok(if n <= 5000 { None } else { Some(1024) }),
            BatchPolicy::Full => Ok(None),
            BatchPolicy::Size(0) => Err(Error::InvalidConfig("batch size must be >= 1".into())),
            BatchPolicy::Size(k) => Ok(Some(*k)),
        }
    }
}

/// Parameter-update rule for fine-tuning.
///
/// Plain constant-rate SGD cannot train this objective at useful speed: the
/// reconstruction heads see gradients several orders of magnitude larger
/// than the encoder layers, and the σ'-attenuated path from the decoder to
/// the embedding is starved while the first-order term pulls the embedding
/// toward collapse. Per-parameter scaling fixes the imbalance, so RMSProp
/// is the default; plain SGD remains available.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Optimizer {
    Sgd,
    RmsProp { decay: f64 },
}

#[derive(Debug, Clone)]
pub struct TrainConfig {
    pub weights: LossWeights,
    pub penalties: PenaltyConfig,
    pub spec: LayerSpec,
    pub lr: f64,
    pub max_iters: usize,
    pub batch: BatchPolicy,
    /// Relative loss-change threshold; training stops early after this
    /// holds for five consecutive iterations.
    pub convergence_tol: f64,
    pub seed: u64,
    pub pretrain: bool,
    pub rbm: RbmConfig,
    pub optimizer: Optimizer,
}

impl TrainConfig {
    pub fn defaults(spec: LayerSpec) -> Self {
        TrainConfig {
            weights: LossWeights::default(),
            penalties: PenaltyConfig::default(),
            spec,
            lr: 0.01,
            max_iters: 400,
            batch: BatchPolicy::Auto,
            convergence_tol: 1e-5,
            seed: 0,
            pretrain: true,
            rbm: RbmConfig::default(),
            optimizer: Optimizer::RmsProp { decay: 0.99 },
        }
    }

    pub fn validate(&self, n: usize, m: usize) -> Result<()> {
        if !(self.lr > 0.0) {
            return Err(Error::InvalidConfig(format!("lr {} must be > 0", self.lr)));
        }
        if self.max_iters == 0 {
            return Err(Error::InvalidConfig("max_iters must be >= 1".into()));
        }
        if self.convergence_tol < 0.0 {
            return Err(Error::InvalidConfig("convergence_tol must be >= 0".into()));
        }
        if let Optimizer::RmsProp { decay } = self.optimizer {
            if !(0.0..1.0).contains(&decay) {
                return Err(Error::InvalidConfig(format!(
                    "rmsprop decay {decay} must be in [0, 1)"
                )));
            }
        }
        self.weights.validate()?;
        self.penalties.validate()?;
        self.spec.validate(n, m)?;
        self.batch.resolve(n)?;
        Ok(())
    }
}

#[derive(Debug, Clone, Copy)]
pub struct IterationRecord {
    pub iter: usize,
    pub first_order: f64,
    pub second_order: f64,
    pub attribute: f64,
    pub regularizer: f64,
    pub mix: f64,
    pub elapsed_ms: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopReason {
    MaxIters,
    Converged,
}

#[derive(Debug, Clone)]
pub struct TrainReport {
    pub records: Vec<IterationRecord>,
    pub wall_time_ms: f64,
    pub stop_reason: StopReason,
    /// Learning rate actually used (halved from the configured one when a
    /// divergent attempt forced a retry).
    pub lr_used: f64,
    pub retries: usize,
}

impl TrainReport {
    /// Plot-ready CSV: one row per iteration.
    pub fn to_csv(&self) -> String {
        let mut out =
            String::from("iteration,first_order,second_order,attribute,regularizer,mix,elapsed_ms\n");
        for r in &self.records {
            out.push_str(&format!(
                "{},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{:.3}\n",
                r.iter, r.first_order, r.second_order, r.attribute, r.regularizer, r.mix, r.elapsed_ms
            ));
        }
        out
    }
}

pub struct FitOutcome {
    pub params: ModelParams,
    pub embedding: Matrix,
    pub report: TrainReport,
}

const CONVERGENCE_PATIENCE: usize = 5;
const MAX_RETRIES: usize = 3;

/// Train on the network per the config: initialize (pretrained or random),
/// descend the combined loss, and return the final parameters, the
/// embedding of every node, and the per-iteration loss trace. A non-finite
/// loss restarts from the same initialization at half the learning rate, up
/// to three times.
pub fn fit(net: &AttributedNetwork, config: &TrainConfig) -> Result<FitOutcome> {
    let n = net.node_count();
    let m = net.attr_count();
    config.validate(n, m)?;
    let start = Instant::now();

    let init = if config.pretrain {
        let rbm = RbmConfig {
            seed: config.seed,
            ..config.rbm
        };
        pretrain_stack(net, &config.spec, &rbm)?
    } else {
        let mut p = ModelParams::random_init(n, m, config.spec.clone(), config.seed)?;
        p.s_scale = scale_of(net.max_edge_weight());
        p.a_scale = scale_of(max_attr(net));
        p
    };

    let batch_size = config.batch.resolve(n)?;
    let mut lr = config.lr;
    let mut retries = 0usize;
    loop {
        match run_sgd(net, config, init.clone(), lr, batch_size) {
            Ok((params, records, stop_reason)) => {
                let embedding = embed_all(&params, net)?;
                return Ok(FitOutcome {
                    params,
                    embedding,
                    report: TrainReport {
                        records,
                        wall_time_ms: start.elapsed().as_secs_f64() * 1e3,
                        stop_reason,
                        lr_used: lr,
                        retries,
                    },
                });
            }
            Err(Error::Diverged { iter, .. }) if retries < MAX_RETRIES => {
                retries += 1;
                lr /= 2.0;
                eprintln!(
                    "training diverged at iteration {iter}; retry {retries}/{MAX_RETRIES} with lr {lr}"
                );
            }
            Err(e) => return Err(e),
        }
    }
}

fn scale_of(max_value: f64) -> f64 {
    if max_value > 0.0 && max_value.is_finite() {
        1.0 / max_value.max(1.0)
    } else {
        1.0
    }
}

fn max_attr(net: &AttributedNetwork) -> f64 {
    (0..net.node_count())
        .flat_map(|i| net.attribute_row(i).iter().map(|(_, v)| v))
        .fold(0.0, f64::max)
}

/// Per-parameter second-moment accumulators for RMSProp, laid out to match
/// the affine traversal order (weights then bias per layer).
struct OptState {
    sq: Vec<Vec<f64>>,
}

impl OptState {
    fn new(params: &ModelParams) -> Self {
        OptState {
            sq: params
                .affines()
                .iter()
                .map(|a| vec![0.0; a.w.data().len() + a.b.len()])
                .collect(),
        }
    }

    fn step(&mut self, params: &mut ModelParams, grads: &ModelParams, lr: f64, opt: &Optimizer) {
        match opt {
            Optimizer::Sgd => params.sgd_step(grads, lr),
            Optimizer::RmsProp { decay } => {
                const EPS: f64 = 1e-8;
                let gs = grads.affines();
                for ((p, g), sq) in params.affines_mut().into_iter().zip(gs).zip(self.sq.iter_mut())
                {
                    let (wsq, bsq) = sq.split_at_mut(p.w.data().len());
                    for ((v, d), s) in p.w.data_mut().iter_mut().zip(g.w.data()).zip(wsq) {
                        *s = decay * *s + (1.0 - decay) * d * d;
                        *v -= lr * d / (s.sqrt() + EPS);
                    }
                    for ((v, d), s) in p.b.iter_mut().zip(&g.b).zip(bsq) {
                        *s = decay * *s + (1.0 - decay) * d * d;
                        *v -= lr * d / (s.sqrt() + EPS);
                    }
                }
            }
        }
    }
}

fn run_sgd(
    net: &AttributedNetwork,
    config: &TrainConfig,
    mut params: ModelParams,
    lr: f64,
    batch_size: Option<usize>,
) -> Result<(ModelParams, Vec<IterationRecord>, StopReason)> {
    let n = net.node_count();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed ^ 0x5DEECE66D);
    let mut records = Vec::with_capacity(config.max_iters);
    let mut patience = 0usize;
    let mut prev_mix: Option<f64> = None;
    let mut opt_state = OptState::new(&params);
    let t0 = Instant::now();

    for iter in 0..config.max_iters {
        let iter_start = Instant::now();
        let mut sums = (0.0, 0.0, 0.0); // first, second, attribute
        let mut reg_at_start = None;

        let mut step = |params: &mut ModelParams,
                        opt_state: &mut OptState,
                        batch: &Batch|
         -> Result<(f64, f64, f64, f64)> {
            let cache = forward(params, batch)?;
            let breakdown = losses(params, &cache, batch, &config.weights, &config.penalties);
            let grads = backward(params, &cache, batch, &config.weights, &config.penalties)?;
            opt_state.step(params, &grads, lr, &config.optimizer);
            Ok((
                breakdown.first_order,
                breakdown.second_order,
                breakdown.attribute,
                breakdown.regularizer,
            ))
        };

        match batch_size {
            None => {
                let batch = Batch::full(net);
                let (f, s, a, r) = step(&mut params, &mut opt_state, &batch)?;
                sums = (f, s, a);
                reg_at_start = Some(r);
            }
            Some(k) => {
                let mut order: Vec<usize> = (0..n).collect();
                for pos in 0..n.saturating_sub(1) {
                    let pick = rng.gen_range(pos..n);
                    order.swap(pos, pick);
                }
                for chunk in order.chunks(k) {
                    let batch = Batch::from_indices(net, chunk);
                    let (f, s, a, r) = step(&mut params, &mut opt_state, &batch)?;
                    sums.0 += f;
                    sums.1 += s;
                    sums.2 += a;
                    reg_at_start.get_or_insert(r);
                }
            }
        }

        let regularizer = reg_at_start.unwrap_or(0.0);
        let mix = config.weights.lambda * sums.2
            + config.weights.alpha * sums.1
            + sums.0
            + config.weights.upsilon * regularizer;
        records.push(IterationRecord {
            iter,
            first_order: sums.0,
            second_order: sums.1,
            attribute: sums.2,
            regularizer,
            mix,
            elapsed_ms: iter_start.elapsed().as_secs_f64() * 1e3,
        });
        if !mix.is_finite() || !params.is_finite() {
            return Err(Error::Diverged { iter, retries: 0 });
        }
        if let Some(prev) = prev_mix {
            let rel = (prev - mix).abs() / mix.abs().max(1e-300);
            if rel < config.convergence_tol {
                patience += 1;
                if patience >= CONVERGENCE_PATIENCE {
                    let _ = t0;
                    return Ok((params, records, StopReason::Converged));
                }
            } else {
                patience = 0;
            }
        }
        prev_mix = Some(mix);
    }
    Ok((params, records, StopReason::MaxIters))
}

/// Objective used to score a sweep cell.
#[derive(Debug, Clone, Copy)]
pub enum SweepObjective {
    /// precision@k of reconstructing the training network.
    ReconstructionPrecision { k: usize },
    /// AUC on a link holdout of the given ratio.
    LinkAuc { ratio: f64 },
    /// AUC on an attribute holdout of the given ratio.
    AttributeAuc { ratio: f64 },
    /// Micro-F1 of node classification at the given test ratio.
    ClassificationMicroF1 { test_ratio: f64 },
}

#[derive(Debug, Clone)]
pub struct GridCell {
    pub assignment: Vec<(String, f64)>,
    pub score: Option<f64>,
    pub error: Option<String>,
}

const SWEEPABLE: &[&str] = &["lambda", "alpha", "upsilon", "gamma1", "gamma2", "lr"];

fn apply_assignment(config: &mut TrainConfig, assignment: &[(String, f64)]) {
    for (name, value) in assignment {
        match name.as_str() {
            "lambda" => config.weights.lambda = *value,
            "alpha" => config.weights.alpha = *value,
            "upsilon" => config.weights.upsilon = *value,
            "gamma1" => config.penalties.gamma1 = *value,
            "gamma2" => config.penalties.gamma2 = *value,
            "lr" => config.lr = *value,
            _ => unreachable!("validated before the sweep"),
        }
    }
}

fn mix_seed(seed: u64, ordinal: u64) -> u64 {
    let mut z = seed ^ ordinal.wrapping_mul(0x9E3779B97F4A7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58476D1CE4E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D049BB133111EB);
    z ^ (z >> 31)
}

/// Coordinate-wise grid search: parameters are tuned one at a time in the
/// given order, holding the others at their current best, and the rounds
/// repeat until the assignment stops changing. Every evaluated cell is
/// returned, ranked by score (failures last); cell training errors are
/// recorded, not fatal.
pub fn grid_search(
    net: &AttributedNetwork,
    base: &TrainConfig,
    grid: &[(String, Vec<f64>)],
    objective: &SweepObjective,
) -> Result<Vec<GridCell>> {
    if grid.is_empty() || grid.iter().any(|(_, vs)| vs.is_empty()) {
        return Err(Error::InvalidConfig("sweep grid must name at least one value per parameter".into()));
    }
    for (name, _) in grid {
        if !SWEEPABLE.contains(&name.as_str()) {
            return Err(Error::InvalidConfig(format!(
                "unknown sweep parameter {name:?} (expected one of {SWEEPABLE:?})"
            )));
        }
    }

    // Shared holdout so every cell is scored on the same instances.
    let link_split = match objective {
        SweepObjective::LinkAuc { ratio } => Some(split_links(net, *ratio, base.seed)?),
        _ => None,
    };
    let attr_split = match objective {
        SweepObjective::AttributeAuc { ratio } => Some(split_attributes(net, *ratio, base.seed)?),
        _ => None,
    };

    let mut current: Vec<(String, f64)> = grid
        .iter()
        .map(|(name, values)| (name.clone(), values[0]))
        .collect();
    let mut cells: Vec<GridCell> = Vec::new();
    let mut seen: std::collections::HashMap<String, usize> = std::collections::HashMap::new();

    let evaluate = |assignment: &Vec<(String, f64)>,
                        cells: &mut Vec<GridCell>,
                        seen: &mut std::collections::HashMap<String, usize>|
     -> usize {
        let key = assignment
            .iter()
            .map(|(n, v)| format!("{n}={}", v.to_bits()))
            .collect::<Vec<_>>()
            .join(",");
        if let Some(&idx) = seen.get(&key) {
            return idx;
        }
        let ordinal = cells.len() as u64;
        let mut config = base.clone();
        apply_assignment(&mut config, assignment);
        config.seed = mix_seed(base.seed, ordinal);
        let train_net = match objective {
            SweepObjective::LinkAuc { .. } => &link_split.as_ref().unwrap().train,
            SweepObjective::AttributeAuc { .. } => &attr_split.as_ref().unwrap().train,
            _ => net,
        };
        let outcome = fit(train_net, &config).and_then(|fit_out| {
            let emb = &fit_out.embedding;
            match objective {
                SweepObjective::ReconstructionPrecision { k } => {
                    let res = eval::network_reconstruction(emb, train_net, &[*k])?;
                    Ok(res.precisions[0].1)
                }
                SweepObjective::LinkAuc { .. } => {
                    eval::link_prediction_auc(emb, link_split.as_ref().unwrap())
                }
                SweepObjective::AttributeAuc { .. } => {
                    Ok(eval::attribute_prediction_auc(emb, attr_split.as_ref().unwrap())?.auc)
                }
                SweepObjective::ClassificationMicroF1 { test_ratio } => {
                    let labels = train_net
                        .labels()
                        .ok_or_else(|| Error::InvalidInput("classification sweep needs labels".into()))?;
                    Ok(eval::classify(emb, labels, *test_ratio, config.seed, 10)?.micro_f1)
                }
            }
        });
        let cell = match outcome {
            Ok(score) => GridCell {
                assignment: assignment.clone(),
                score: Some(score),
                error: None,
            },
            Err(e) => GridCell {
                assignment: assignment.clone(),
                score: None,
                error: Some(e.to_string()),
            },
        };
        cells.push(cell);
        seen.insert(key, cells.len() - 1);
        cells.len() - 1
    };

    // Coordinate rounds until stable (bounded by the grid size).
    let max_rounds = 1 + grid.len();
    for _ in 0..max_rounds {
        let before = current.clone();
        for (pi, (name, values)) in grid.iter().enumerate() {
            let mut best_value = current[pi].1;
            let mut best_score = f64::NEG_INFINITY;
            for &v in values {
                let mut assignment = current.clone();
                assignment[pi] = (name.clone(), v);
                let idx = evaluate(&assignment, &mut cells, &mut seen);
                if let Some(score) = cells[idx].score {
                    if score > best_score {
                        best_score = score;
                        best_value = v;
                    }
                }
            }
            current[pi].1 = best_value;
        }
        if current == before {
            break;
        }
    }

    let mut order: Vec<usize> = (0..cells.len()).collect();
    order.sort_by(|&a, &b| match (cells[a].score, cells[b].score) {
        (Some(x), Some(y)) => y.total_cmp(&x).then(a.cmp(&b)),
        (Some(_), None) => std::cmp::Ordering::Less,
        (None, Some(_)) => std::cmp::Ordering::Greater,
        (None, None) => a.cmp(&b),
    });
    Ok(order.into_iter().map(|i| cells[i].clone()).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::SparseVec;

    fn two_node_net() -> AttributedNetwork {
        AttributedNetwork::from_parts(
            vec!["a".into(), "b".into()],
            4,
            vec![(0, 1, 1.0)],
            vec![
                SparseVec::from_pairs(vec![(0, 1.0), (1, 1.0)]).unwrap(),
                SparseVec::from_pairs(vec![(2, 1.0), (3, 1.0)]).unwrap(),
            ],
            None,
            Vec::new(),
        )
        .unwrap()
    }

    fn tiny_spec() -> LayerSpec {
        LayerSpec {
            pre_struct_dim: 2,
            pre_attr_dim: 2,
            hidden_dims: vec![1],
            preprocess: true,
        }
    }

    fn toy_net() -> AttributedNetwork {
        let attr_rows = vec![
            SparseVec::from_pairs(vec![(0, 1.0), (1, 1.0)]).unwrap(),
            SparseVec::from_pairs(vec![(1, 1.0)]).unwrap(),
            SparseVec::from_pairs(vec![(2, 1.0)]).unwrap(),
            SparseVec::from_pairs(vec![(0, 1.0), (3, 1.0)]).unwrap(),
            SparseVec::from_pairs(vec![(3, 1.0)]).unwrap(),
            SparseVec::from_pairs(vec![(2, 1.0), (3, 1.0)]).unwrap(),
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
    fn first_order_only_pulls_connected_nodes_together() {
        let net = two_node_net();
        let mut config = TrainConfig::defaults(tiny_spec());
        config.weights = LossWeights {
            lambda: 0.0,
            alpha: 0.0,
            upsilon: 0.0,
        };
        config.max_iters = 50;
        config.lr = 0.5;
        config.pretrain = false;
        config.convergence_tol = 0.0;
        config.seed = 3;
        config.optimizer = Optimizer::Sgd;
        let out = fit(&net, &config).unwrap();
        let records = &out.report.records;
        assert_eq!(records.len(), 50);
        for w in records.windows(2) {
            assert!(
                w[1].first_order <= w[0].first_order + 1e-12,
                "first-order loss rose: {} -> {}",
                w[0].first_order,
                w[1].first_order
            );
        }
        assert!(records.last().unwrap().first_order < records[0].first_order);
    }

    #[test]
    fn max_iters_one_produces_one_record() {
        let net = two_node_net();
        let mut config = TrainConfig::defaults(tiny_spec());
        config.max_iters = 1;
        config.pretrain = false;
        let out = fit(&net, &config).unwrap();
        assert_eq!(out.report.records.len(), 1);
        assert_eq!(out.report.stop_reason, StopReason::MaxIters);
    }

    #[test]
    fn max_iters_zero_rejected() {
        let net = two_node_net();
        let mut config = TrainConfig::defaults(tiny_spec());
        config.max_iters = 0;
        assert!(matches!(fit(&net, &config), Err(Error::InvalidConfig(_))));
    }

    #[test]
    fn fit_is_bitwise_reproducible() {
        let net = toy_net();
        let mut config = TrainConfig::defaults(toy_spec());
        config.max_iters = 20;
        config.rbm.epochs = 5;
        config.seed = 11;
        let a = fit(&net, &config).unwrap();
        let b = fit(&net, &config).unwrap();
        assert_eq!(a.embedding, b.embedding);
        assert_eq!(a.params, b.params);
    }

    #[test]
    fn report_mix_is_component_combination() {
        let net = toy_net();
        let mut config = TrainConfig::defaults(toy_spec());
        config.max_iters = 15;
        config.rbm.epochs = 3;
        let out = fit(&net, &config).unwrap();
        for r in &out.report.records {
            let want = config.weights.lambda * r.attribute
                + config.weights.alpha * r.second_order
                + r.first_order
                + config.weights.upsilon * r.regularizer;
            assert!((r.mix - want).abs() < 1e-9);
        }
    }

    #[test]
    fn report_mix_combination_holds_in_minibatch_mode() {
        let net = toy_net();
        let mut config = TrainConfig::defaults(toy_spec());
        config.max_iters = 10;
        config.rbm.epochs = 3;
        config.batch = BatchPolicy::Size(2);
        let out = fit(&net, &config).unwrap();
        for r in &out.report.records {
            let want = config.weights.lambda * r.attribute
                + config.weights.alpha * r.second_order
                + r.first_order
                + config.weights.upsilon * r.regularizer;
            assert!((r.mix - want).abs() < 1e-9);
        }
    }

    #[test]
    fn pure_regularizer_decays_weight_norms() {
        let net = toy_net();
        let mut config = TrainConfig::defaults(toy_spec());
        config.weights = LossWeights {
            lambda: 0.0,
            alpha: 0.0,
            upsilon: 1.0,
        };
        config.max_iters = 30;
        config.pretrain = false;
        config.lr = 0.1;
        config.convergence_tol = 0.0;
        config.optimizer = Optimizer::Sgd;
        let out = fit(&net, &config).unwrap();
        let norms: Vec<f64> = out.report.records.iter().map(|r| r.regularizer).collect();
        for w in norms.windows(2) {
            assert!(w[1] < w[0], "weight norms must decay monotonically: {norms:?}");
        }
    }

    #[test]
    fn convergence_stops_early() {
        let net = toy_net();
        let mut config = TrainConfig::defaults(toy_spec());
        config.max_iters = 400;
        config.convergence_tol = 0.5; // very loose: stop almost immediately
        config.rbm.epochs = 2;
        let out = fit(&net, &config).unwrap();
        assert_eq!(out.report.stop_reason, StopReason::Converged);
        assert!(out.report.records.len() < 400);
    }

    #[test]
    fn csv_has_header_and_rows() {
        let net = two_node_net();
        let mut config = TrainConfig::defaults(tiny_spec());
        config.max_iters = 3;
        config.pretrain = false;
        let out = fit(&net, &config).unwrap();
        let csv = out.report.to_csv();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines.len(), 4);
        assert!(lines[0].starts_with("iteration,first_order"));
        assert_eq!(lines[1].split(',').count(), 7);
    }

    #[test]
    fn grid_two_lambdas_two_rows_deterministic() {
        let net = toy_net();
        let mut base = TrainConfig::defaults(toy_spec());
        base.max_iters = 10;
        base.rbm.epochs = 2;
        base.seed = 5;
        let grid = vec![("lambda".to_string(), vec![0.0, 0.02])];
        let objective = SweepObjective::ReconstructionPrecision { k: 3 };
        let a = grid_search(&net, &base, &grid, &objective).unwrap();
        assert_eq!(a.len(), 2);
        let b = grid_search(&net, &base, &grid, &objective).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert_eq!(x.assignment, y.assignment);
            assert_eq!(x.score, y.score);
        }
        // ranked: best first
        assert!(a[0].score.unwrap_or(-1.0) >= a[1].score.unwrap_or(-1.0));
    }

    #[test]
    fn grid_rejects_empty_and_unknown() {
        let net = toy_net();
        let base = TrainConfig::defaults(toy_spec());
        let objective = SweepObjective::ReconstructionPrecision { k: 3 };
        assert!(grid_search(&net, &base, &[], &objective).is_err());
        let grid = vec![("momentum".to_string(), vec![0.9])];
        assert!(grid_search(&net, &base, &grid, &objective).is_err());
    }
}
