use mdne_core::eval::{classify, network_reconstruction};
use mdne_core::graph::load_cora_format;
use mdne_core::model::{embed_all, LayerSpec, ModelParams};
use mdne_core::pretrain::{pretrain_stack, RbmConfig};
use mdne_core::trainer::{fit, BatchPolicy, TrainConfig};
use std::path::Path;
use std::time::Instant;

fn spread(emb: &mdne_core::tensor::Matrix) -> f64 {
    // mean per-column std across nodes
    let (n, d) = (emb.rows(), emb.cols());
    let mut total = 0.0;
    for c in 0..d {
        let mut mean = 0.0;
        for i in 0..n {
            mean += emb.get(i, c);
        }
        mean /= n as f64;
        let mut var = 0.0;
        for i in 0..n {
            let x = emb.get(i, c) - mean;
            var += x * x;
        }
        total += (var / n as f64).sqrt();
    }
    total / d as f64
}

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let mode = args.get(1).map(|s| s.as_str()).unwrap_or("spread");
    let (net, _) = load_cora_format(
        Path::new("data/cora/cora.content"),
        Path::new("data/cora/cora.cites"),
    )
    .unwrap();
    let spec = LayerSpec {
        pre_struct_dim: 300,
        pre_attr_dim: 200,
        hidden_dims: vec![128],
        preprocess: true,
    };

    match mode {
        "spread" => {
            let rbm = RbmConfig { seed: 1, ..Default::default() };
            let t = Instant::now();
            let pre = pretrain_stack(&net, &spec, &rbm).unwrap();
            let e = embed_all(&pre, &net).unwrap();
            eprintln!("pretrained (30 epochs): spread {:.5} ({:.0}s)", spread(&e), t.elapsed().as_secs_f64());
            let rnd = ModelParams::random_init(2708, 1433, spec.clone(), 1).unwrap();
            let e = embed_all(&rnd, &net).unwrap();
            eprintln!("random xavier-ish:      spread {:.5}", spread(&e));
            let mut big = ModelParams::random_init(2708, 1433, spec.clone(), 1).unwrap();
            for aff in big.affines_mut() {
                let r = (6.0 / (aff.w.rows() + aff.w.cols()) as f64).sqrt();
                for v in aff.w.data_mut() {
                    *v /= r; // uniform(-1, 1)
                }
            }
            let e = embed_all(&big, &net).unwrap();
            eprintln!("random uniform(-1,1):   spread {:.5}", spread(&e));
        }
        "big" => {
            let iters: usize = args.get(2).and_then(|s| s.parse().ok()).unwrap_or(50);
            let lr: f64 = args.get(3).and_then(|s| s.parse().ok()).unwrap_or(1e-4);
            let batch: usize = args.get(4).and_then(|s| s.parse().ok()).unwrap_or(0);
            // train from a uniform(-1,1) init without pretraining
            let mut config = TrainConfig::defaults(spec.clone());
            config.max_iters = iters;
            config.lr = lr;
            config.seed = 1;
            config.pretrain = false;
            config.batch = if batch == 0 { BatchPolicy::Full } else { BatchPolicy::Size(batch) };
            // fit() would use random_init; emulate by scaling inside a custom loop.
            // Instead: hack — pretrain=false then overwrite params? fit() owns init.
            // Simplest honest probe: temporarily train via the library path but
            // with a scaled spec?? Not available; so replicate fit minimally here.
            use mdne_core::model::{backward, forward, losses, Batch};
            let mut params = ModelParams::random_init(2708, 1433, spec.clone(), 1).unwrap();
            for aff in params.affines_mut() {
                let r = (6.0 / (aff.w.rows() + aff.w.cols()) as f64).sqrt();
                for v in aff.w.data_mut() {
                    *v /= r;
                }
            }
            let t = Instant::now();
            let b = Batch::full(&net);
            for it in 0..iters {
                let cache = forward(&params, &b).unwrap();
                let l = losses(&params, &cache, &b, &config.weights, &config.penalties);
                if it % 5 == 0 || it == iters - 1 {
                    eprintln!("iter {it:3}: mix {:14.2} 1st {:10.2} 2nd {:12.2} att {:12.2}", l.mix, l.first_order, l.second_order, l.attribute);
                }
                let g = backward(&params, &cache, &b, &config.weights, &config.penalties).unwrap();
                params.sgd_step(&g, lr);
            }
            eprintln!("{iters} iters in {:.0}s", t.elapsed().as_secs_f64());
            let emb = embed_all(&params, &net).unwrap();
            let rec = network_reconstruction(&emb, &net, &[1000, 5000]).unwrap();
            for (k, p) in rec.precisions {
                eprintln!("precision@{k} = {p:.4}");
            }
            let cls = classify(&emb, net.labels().unwrap(), 0.1, 7, 3).unwrap();
            eprintln!("micro {:.4} macro {:.4}", cls.micro_f1, cls.macro_f1);
        }
        _ => eprintln!("unknown mode"),
    }
}
