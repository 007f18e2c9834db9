//! Evaluation protocols: network reconstruction, link prediction, attribute
//! prediction, and node classification.
//!
//! All similarity is cosine over the embedding rows, so every metric here is
//! invariant under a positive rescaling of the whole embedding. Ranking ties
//! break deterministically toward the lexicographically smaller node pair.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::graph::{AttributedNetwork, AttributeSplit, LinkSplit};
use crate::logreg::{micro_macro_f1, LogRegConfig, OneVsRest};
use crate::tensor::{dot, Matrix};

/// Cosine similarity; a zero vector has similarity 0 to everything by
/// convention.
pub fn cosine_similarity(u: &[f64], v: &[f64]) -> f64 {
    let nu = dot(u, u).sqrt();
    let nv = dot(v, v).sqrt();
    if nu == 0.0 || nv == 0.0 {
        return 0.0;
    }
    dot(u, v) / (nu * nv)
}

/// Rows scaled to unit length (zero rows left as zero).
fn normalize_rows(emb: &Matrix) -> Matrix {
    let mut out = emb.clone();
    let cols = out.cols();
    for row in out.data_mut().chunks_mut(cols) {
        let norm = row.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm > 0.0 {
            for v in row.iter_mut() {
                *v /= norm;
            }
        }
    }
    out
}

/// A similarity-ranked list of node pairs and the precision@k values
/// computed from it.
#[derive(Debug, Clone)]
pub struct RankingResult {
    /// Top pairs by (similarity desc, pair asc); truncated to max(ks).
    pub items: Vec<((u32, u32), f64)>,
    /// (k, precision@k) per requested k, in the requested order.
    pub precisions: Vec<(usize, f64)>,
}

/// Rank every unordered node pair by cosine similarity and report the share
/// of the top k that are true edges.
pub fn network_reconstruction(
    emb: &Matrix,
    net: &AttributedNetwork,
    ks: &[usize],
) -> Result<RankingResult> {
    let n = net.node_count();
    if emb.rows() != n {
        return Err(Error::Shape {
            op: "network_reconstruction",
            left: format!("{} embedding rows", emb.rows()),
            right: format!("{n} nodes"),
        });
    }
    let candidates = n * (n - 1) / 2;
    let Some(&k_max) = ks.iter().max() else {
        return Err(Error::InvalidInput("no k values given".into()));
    };
    if k_max > candidates {
        return Err(Error::InvalidInput(format!(
            "k = {k_max} exceeds the {candidates} candidate pairs"
        )));
    }
    let unit = normalize_rows(emb);
    let mut scored: Vec<(f64, u32, u32)> = Vec::with_capacity(candidates);
    for i in 0..n {
        let ri = unit.row(i);
        for j in (i + 1)..n {
            scored.push((dot(ri, unit.row(j)), i as u32, j as u32));
        }
    }
    scored.sort_unstable_by(|a, b| {
        b.0.total_cmp(&a.0).then_with(|| (a.1, a.2).cmp(&(b.1, b.2)))
    });
    scored.truncate(k_max);

    let mut hits_prefix = Vec::with_capacity(k_max);
    let mut hits = 0usize;
    for &(_, i, j) in &scored {
        if net.has_edge(i, j) {
            hits += 1;
        }
        hits_prefix.push(hits);
    }
    let precisions = ks
        .iter()
        .map(|&k| (k, hits_prefix[k - 1] as f64 / k as f64))
        .collect();
    Ok(RankingResult {
        items: scored.into_iter().map(|(s, i, j)| ((i, j), s)).collect(),
        precisions,
    })
}

/// AUC by pair counting: (concordant + 0.5 · ties) / (P · N), computed from
/// average ranks.
pub fn auc_from_scores(positives: &[f64], negatives: &[f64]) -> Result<f64> {
    if positives.is_empty() || negatives.is_empty() {
        return Err(Error::InvalidInput(
            "AUC needs at least one positive and one negative score".into(),
        ));
    }
    let mut all: Vec<(f64, bool)> = positives
        .iter()
        .map(|&s| (s, true))
        .chain(negatives.iter().map(|&s| (s, false)))
        .collect();
    all.sort_unstable_by(|a, b| a.0.total_cmp(&b.0));
    // average ranks over tie groups (ranks are 1-based)
    let mut rank_sum_pos = 0.0;
    let mut idx = 0usize;
    while idx < all.len() {
        let mut end = idx + 1;
        while end < all.len() && all[end].0 == all[idx].0 {
            end += 1;
        }
        let avg_rank = (idx + 1 + end) as f64 / 2.0;
        for item in &all[idx..end] {
            if item.1 {
                rank_sum_pos += avg_rank;
            }
        }
        idx = end;
    }
    let p = positives.len() as f64;
    let n = negatives.len() as f64;
    Ok((rank_sum_pos - p * (p + 1.0) / 2.0) / (p * n))
}

/// Score the held-out positive and negative pairs by cosine similarity and
/// return the AUC.
pub fn link_prediction_auc(emb: &Matrix, split: &LinkSplit) -> Result<f64> {
    let unit = normalize_rows(emb);
    let score = |pairs: &[(u32, u32)]| {
        pairs
            .iter()
            .map(|&(i, j)| dot(unit.row(i as usize), unit.row(j as usize)))
            .collect::<Vec<f64>>()
    };
    auc_from_scores(&score(&split.positives), &score(&split.negatives))
}

pub struct AttributePredictionResult {
    pub auc: f64,
    /// How many neighborhoods had fewer than the nominal 10 candidates.
    pub shrunk_neighborhoods: usize,
}

/// Number of most-similar nodes consulted per prediction.
const NEIGHBORHOOD: usize = 10;

/// For every hidden cell (j, k): take the 10 nodes most similar to j, split
/// them by whether they carry attribute k in the training matrix, and score
/// the cell by the ratio of the two groups' similarity sums. Cells are then
/// ranked by that score and the AUC is computed with hidden ones as
/// positives.
pub fn attribute_prediction_auc(
    emb: &Matrix,
    split: &AttributeSplit,
) -> Result<AttributePredictionResult> {
    let net = &split.train;
    let n = net.node_count();
    if emb.rows() != n {
        return Err(Error::Shape {
            op: "attribute_prediction_auc",
            left: format!("{} embedding rows", emb.rows()),
            right: format!("{n} nodes"),
        });
    }
    let unit = normalize_rows(emb);
    let keep = NEIGHBORHOOD.min(n.saturating_sub(1));
    let shrunk_per_node = keep < NEIGHBORHOOD;

    // Top-`keep` similar nodes per node that occurs in the hidden set.
    let mut needed = vec![false; n];
    for cell in &split.hidden {
        needed[cell.node as usize] = true;
    }
    let mut neighborhoods: Vec<Vec<(u32, f64)>> = vec![Vec::new(); n];
    for j in 0..n {
        if !needed[j] {
            continue;
        }
        let rj = unit.row(j);
        // (sim desc, index asc) selection
        let mut top: Vec<(u32, f64)> = Vec::with_capacity(keep + 1);
        for i in 0..n {
            if i == j {
                continue;
            }
            let s = dot(rj, unit.row(i));
            if top.len() == keep {
                let worst = top.last().unwrap();
                if s < worst.1 || (s == worst.1 && i as u32 > worst.0) {
                    continue;
                }
            }
            let pos = top
                .iter()
                .position(|&(pi, ps)| s > ps || (s == ps && (i as u32) < pi))
                .unwrap_or(top.len());
            top.insert(pos, (i as u32, s));
            if top.len() > keep {
                top.pop();
            }
        }
        neighborhoods[j] = top;
    }

    let mut pos_scores = Vec::new();
    let mut neg_scores = Vec::new();
    let mut shrunk = 0usize;
    for cell in &split.hidden {
        let j = cell.node as usize;
        if shrunk_per_node {
            shrunk += 1;
        }
        let mut sum_with = 0.0;
        let mut sum_without = 0.0;
        let mut any_with = false;
        for &(i, sim) in &neighborhoods[j] {
            if net.attribute_row(i as usize).get(cell.attr) != 0.0 {
                sum_with += sim;
                any_with = true;
            } else {
                sum_without += sim;
            }
        }
        let p = if !any_with {
            0.0
        } else if sum_without == 0.0 {
            sum_with / 1e-12
        } else {
            sum_with / sum_without
        };
        if cell.value != 0.0 {
            pos_scores.push(p);
        } else {
            neg_scores.push(p);
        }
    }
    let auc = auc_from_scores(&pos_scores, &neg_scores)?;
    Ok(AttributePredictionResult {
        auc,
        shrunk_neighborhoods: shrunk,
    })
}

#[derive(Debug, Clone, Copy)]
pub struct ClassificationResult {
    pub micro_f1: f64,
    pub macro_f1: f64,
    /// True when the data carries a single class, which makes both scores
    /// trivially perfect.
    pub degenerate: bool,
}

/// Train the one-vs-rest logistic classifier on a random train portion of
/// the embeddings and score the held-out rest, averaged over `repeats`
/// random splits. A split that loses a class from its training portion is
/// redrawn (at most 20 attempts each).
pub fn classify(
    emb: &Matrix,
    labels: &[u32],
    test_ratio: f64,
    seed: u64,
    repeats: usize,
) -> Result<ClassificationResult> {
    if labels.len() != emb.rows() {
        return Err(Error::Shape {
            op: "classify",
            left: format!("{} embedding rows", emb.rows()),
            right: format!("{} labels", labels.len()),
        });
    }
    if !(test_ratio > 0.0 && test_ratio < 1.0) {
        return Err(Error::InvalidInput(format!(
            "test_ratio {test_ratio} must be in (0, 1)"
        )));
    }
    let n = emb.rows();
    let classes = labels.iter().copied().max().map_or(0, |c| c as usize + 1);
    let degenerate = labels.iter().all(|&l| l == labels[0]);
    let test_size = ((test_ratio * n as f64).round() as usize).clamp(1, n - 1);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let cfg = LogRegConfig::default();

    let mut micro_sum = 0.0;
    let mut macro_sum = 0.0;
    for _ in 0..repeats {
        let mut order: Vec<usize> = (0..n).collect();
        let (train_idx, test_idx) = loop {
            let mut ok = false;
            for attempt in 0..20 {
                for pos in 0..n - 1 {
                    let pick = rng.gen_range(pos..n);
                    order.swap(pos, pick);
                }
                let (_, train) = order.split_at(test_size);
                let mut present = vec![false; classes.max(1)];
                for &i in train {
                    present[labels[i] as usize] = true;
                }
                if (0..classes).all(|c| present[c]) || degenerate {
                    ok = true;
                    break;
                }
                if attempt == 19 {
                    return Err(Error::InvalidInput(
                        "could not draw a split containing every class in 20 attempts".into(),
                    ));
                }
            }
            assert!(ok);
            let (test, train) = order.split_at(test_size);
            break (train.to_vec(), test.to_vec());
        };

        let gather = |idx: &[usize]| {
            let mut x = Matrix::zeros(idx.len(), emb.cols());
            let mut y = Vec::with_capacity(idx.len());
            for (local, &global) in idx.iter().enumerate() {
                x.row_mut(local).copy_from_slice(emb.row(global));
                y.push(labels[global]);
            }
            (x, y)
        };
        let (x_train, y_train) = gather(&train_idx);
        let (x_test, y_test) = gather(&test_idx);
        let model = OneVsRest::fit(&x_train, &y_train, classes.max(1), &cfg)?;
        let pred = model.predict(&x_test);
        let (micro, macro_) = micro_macro_f1(&pred, &y_test, classes.max(1));
        micro_sum += micro;
        macro_sum += macro_;
    }
    Ok(ClassificationResult {
        micro_f1: micro_sum / repeats as f64,
        macro_f1: macro_sum / repeats as f64,
        degenerate,
    })
}
