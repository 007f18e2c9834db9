use mdne_core::eval::{classify, network_reconstruction};
use mdne_core::graph::load_cora_format;
use mdne_core::model::{backward, embed_all, forward, losses, Batch, LayerSpec, LossWeights, PenaltyConfig};
use mdne_core::model::ModelParams;
use mdne_core::pretrain::{pretrain_stack, RbmConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::path::Path;
use std::time::Instant;

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let epochs: usize = args.get(1).and_then(|s| s.parse().ok()).unwrap_or(40);
    let batch: usize = args.get(2).and_then(|s| s.parse().ok()).unwrap_or(256);
    let rbm_epochs: usize = args.get(3).and_then(|s| s.parse().ok()).unwrap_or(10);
    // remaining args: gamma1,lr pairs like "10:3e-4" "30:1e-3"
    let cells: Vec<(f64, f64)> = args[4..]
        .iter()
        .map(|s| {
            let (g, l) = s.split_once(':').unwrap();
            (g.parse().unwrap(), l.parse().unwrap())
        })
        .collect();

    let (net, _) = load_cora_format(
        Path::new("data/cora/cora.content"),
        Path::new("data/cora/cora.cites"),
    )
    .unwrap();
    let n = net.node_count();
    let spec = LayerSpec {
        pre_struct_dim: 300,
        pre_attr_dim: 200,
        hidden_dims: vec![128],
        preprocess: true,
    };
    let t = Instant::now();
    let init = if std::env::var("BIG_INIT").is_ok() {
        let mut p = ModelParams::random_init(n, net.attr_count(), spec.clone(), 1).unwrap();
        for aff in p.affines_mut() {
            let r = (6.0 / (aff.w.rows() + aff.w.cols()) as f64).sqrt();
            for v in aff.w.data_mut() {
                *v /= r;
            }
        }
        eprintln!("big uniform(-1,1) init");
        p
    } else {
        let rbm = RbmConfig { seed: 1, epochs: rbm_epochs, ..Default::default() };
        let p = pretrain_stack(&net, &spec, &rbm).unwrap();
        eprintln!("pretrained in {:.0}s", t.elapsed().as_secs_f64());
        p
    };

    for (gamma1, lr) in cells {
        let weights = LossWeights::default();
        let pen = PenaltyConfig { gamma1, gamma2: 10.0 };
        let mut params = init.clone();
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        let t = Instant::now();
        let mut last = (0.0, 0.0, 0.0);
        for ep in 0..epochs {
            let mut order: Vec<usize> = (0..n).collect();
            for pos in 0..n - 1 {
                let pick = rng.gen_range(pos..n);
                order.swap(pos, pick);
            }
            let mut sums = (0.0, 0.0, 0.0);
            for chunk in order.chunks(batch) {
                let mut b = Batch::from_indices(&net, chunk);
                if std::env::var("NO_EDGES").is_ok() {
                    b.edges.clear();
                }
                let cache = forward(&params, &b).unwrap();
                let l = losses(&params, &cache, &b, &weights, &pen);
                sums.0 += l.first_order;
                sums.1 += l.second_order;
                sums.2 += l.attribute;
                let g = backward(&params, &cache, &b, &weights, &pen).unwrap();
                params.sgd_step(&g, lr);
            }
            last = sums;
            if !sums.1.is_finite() {
                eprintln!("g1={gamma1} lr={lr}: DIVERGED at epoch {ep}");
                break;
            }
        }
        let emb = embed_all(&params, &net).unwrap();
        let rec = network_reconstruction(&emb, &net, &[1000, 5000]).unwrap();
        let cls = classify(&emb, net.labels().unwrap(), 0.1, 7, 3).unwrap();
        eprintln!(
            "g1={gamma1:<5} lr={lr:<8}: 1st {:11.1} 2nd {:12.1} att {:12.1} | P@1000 {:.3} P@5000 {:.3} micro {:.3} ({:.0}s)",
            last.0, last.1, last.2,
            rec.precisions[0].1, rec.precisions[1].1, cls.micro_f1,
            t.elapsed().as_secs_f64()
        );
    }
}
