//! One-vs-rest L2-regularized logistic regression, the linear classifier
//! behind the node-classification protocol. Trained by gradient descent
//! with backtracking line search; the objective is convex, so the result is
//! independent of initialization up to the tolerance.

use crate::error::{Error, Result};
use crate::tensor::Matrix;

#[derive(Debug, Clone, Copy)]
pub struct LogRegConfig {
    /// Weight of the summed log-loss relative to the ½‖w‖² penalty.
    pub cost: f64,
    /// Relative objective-change tolerance for stopping.
    pub tol: f64,
    pub max_iters: usize,
}

impl Default for LogRegConfig {
    fn default() -> Self {
        LogRegConfig {
            cost: 1.0,
            tol: 1e-6,
            max_iters: 2000,
        }
    }
}

/// One binary classifier: score = x·w + b. The intercept is not regularized.
#[derive(Debug, Clone)]
pub struct BinaryLogReg {
    pub w: Vec<f64>,
    pub b: f64,
}

/// log(1 + e^x) without overflow.
fn log1p_exp(x: f64) -> f64 {
    if x > 35.0 {
        x
    } else if x < -35.0 {
        x.exp()
    } else {
        x.exp().ln_1p()
    }
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Objective ½‖w‖² + C Σ log(1 + exp(−y·z)) and its gradient.
fn objective_and_grad(
    x: &Matrix,
    y: &[f64],
    w: &[f64],
    b: f64,
    cost: f64,
) -> (f64, Vec<f64>, f64) {
    let d = w.len();
    let mut obj = 0.5 * w.iter().map(|v| v * v).sum::<f64>();
    let mut gw = w.to_vec();
    let mut gb = 0.0;
    for i in 0..x.rows() {
        let row = x.row(i);
        let z: f64 = row.iter().zip(w).map(|(a, b)| a * b).sum::<f64>() + b;
        let yz = y[i] * z;
        obj += cost * log1p_exp(-yz);
        let coeff = -cost * y[i] * sigmoid(-yz);
        for k in 0..d {
            gw[k] += coeff * row[k];
        }
        gb += coeff;
    }
    (obj, gw, gb)
}

/// Fit one binary problem with labels −1/+1 from the given start point.
pub fn fit_binary_from(
    x: &Matrix,
    y: &[f64],
    cfg: &LogRegConfig,
    mut w: Vec<f64>,
    mut b: f64,
) -> Result<BinaryLogReg> {
    if x.rows() != y.len() {
        return Err(Error::Shape {
            op: "fit_binary",
            left: format!("{} rows", x.rows()),
            right: format!("{} labels", y.len()),
        });
    }
    let (mut obj, mut gw, mut gb) = objective_and_grad(x, y, &w, b, cfg.cost);
    for _ in 0..cfg.max_iters {
        let g2: f64 = gw.iter().map(|v| v * v).sum::<f64>() + gb * gb;
        if g2.sqrt() < cfg.tol {
            break;
        }
        // Backtracking line search on the Armijo condition.
        let mut t = 1.0;
        let (next_w, next_b, next_obj) = loop {
            let cand_w: Vec<f64> = w.iter().zip(&gw).map(|(v, g)| v - t * g).collect();
            let cand_b = b - t * gb;
            let (cand_obj, _, _) = objective_and_grad(x, y, &cand_w, cand_b, cfg.cost);
            if cand_obj <= obj - 0.5 * t * g2 || t < 1e-12 {
                break (cand_w, cand_b, cand_obj);
            }
            t *= 0.5;
        };
        let rel = (obj - next_obj).abs() / obj.abs().max(1.0);
        w = next_w;
        b = next_b;
        let refreshed = objective_and_grad(x, y, &w, b, cfg.cost);
        obj = refreshed.0;
        gw = refreshed.1;
        gb = refreshed.2;
        if rel < cfg.tol {
            break;
        }
    }
    Ok(BinaryLogReg { w, b })
}

pub fn fit_binary(x: &Matrix, y: &[f64], cfg: &LogRegConfig) -> Result<BinaryLogReg> {
    fit_binary_from(x, y, cfg, vec![0.0; x.cols()], 0.0)
}

/// One-vs-rest multiclass model.
#[derive(Debug, Clone)]
pub struct OneVsRest {
    pub classes: usize,
    pub models: Vec<BinaryLogReg>,
}

impl OneVsRest {
    pub fn fit(x: &Matrix, labels: &[u32], classes: usize, cfg: &LogRegConfig) -> Result<Self> {
        if classes == 0 {
            return Err(Error::InvalidInput("need at least one class".into()));
        }
        let mut models = Vec::with_capacity(classes);
        for c in 0..classes as u32 {
            let y: Vec<f64> = labels.iter().map(|&l| if l == c { 1.0 } else { -1.0 }).collect();
            models.push(fit_binary(x, &y, cfg)?);
        }
        Ok(OneVsRest {
            classes,
            models,
        })
    }

    /// Highest-scoring class per row; ties break toward the lower class
    /// index.
    pub fn predict(&self, x: &Matrix) -> Vec<u32> {
        (0..x.rows())
            .map(|i| {
                let row = x.row(i);
                let mut best = 0u32;
                let mut best_score = f64::NEG_INFINITY;
                for (c, m) in self.models.iter().enumerate() {
                    let z: f64 = row.iter().zip(&m.w).map(|(a, b)| a * b).sum::<f64>() + m.b;
                    if z > best_score {
                        best_score = z;
                        best = c as u32;
                    }
                }
                best
            })
            .collect()
    }
}

/// Micro- and macro-averaged F1 for single-label predictions.
/// Micro pools true/false positives over all classes (harmonic mean of the
/// pooled precision and recall); macro averages per-class F1, counting a
/// class with no predictions and no members as zero.
pub fn micro_macro_f1(pred: &[u32], truth: &[u32], classes: usize) -> (f64, f64) {
    let mut tp = vec![0usize; classes];
    let mut fp = vec![0usize; classes];
    let mut fnn = vec![0usize; classes];
    for (&p, &t) in pred.iter().zip(truth) {
        if p == t {
            tp[p as usize] += 1;
        } else {
            fp[p as usize] += 1;
            fnn[t as usize] += 1;
        }
    }
    let (tp_sum, fp_sum, fn_sum) = (
        tp.iter().sum::<usize>() as f64,
        fp.iter().sum::<usize>() as f64,
        fnn.iter().sum::<usize>() as f64,
    );
    let micro_p = if tp_sum + fp_sum > 0.0 { tp_sum / (tp_sum + fp_sum) } else { 0.0 };
    let micro_r = if tp_sum + fn_sum > 0.0 { tp_sum / (tp_sum + fn_sum) } else { 0.0 };
    let micro = if micro_p + micro_r > 0.0 {
        2.0 * micro_p * micro_r / (micro_p + micro_r)
    } else {
        0.0
    };
    let mut macro_sum = 0.0;
    for c in 0..classes {
        let denom = 2 * tp[c] + fp[c] + fnn[c];
        if denom > 0 {
            macro_sum += 2.0 * tp[c] as f64 / denom as f64;
        }
        // a class never predicted and never present contributes 0
    }
    (micro, macro_sum / classes as f64)
}
