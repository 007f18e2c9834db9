use mdne_core::eval::{classify, network_reconstruction};
use mdne_core::graph::load_cora_format;
use mdne_core::model::{
    backward, embed_all, forward, losses, Batch, LayerSpec, LossWeights, ModelParams,
    PenaltyConfig,
};
use mdne_core::pretrain::{pretrain_stack, RbmConfig};
use std::path::Path;
use std::time::Instant;

struct RmsProp {
    sq: Vec<Vec<f64>>, // per affine: w then b flattened
    mo: Vec<Vec<f64>>,
    decay: f64,
    eps: f64,
    adam: bool,
    t: usize,
}

impl RmsProp {
    fn new(params: &ModelParams) -> Self {
        let sq: Vec<Vec<f64>> = params
            .affines()
            .iter()
            .map(|a| vec![0.0; a.w.data().len() + a.b.len()])
            .collect();
        let adam = std::env::var("ADAM").is_ok();
        RmsProp { mo: sq.clone(), sq, decay: 0.99, eps: 1e-8, adam, t: 0 }
    }
    fn step(&mut self, params: &mut ModelParams, grads: &ModelParams, lr: f64) {
        self.t += 1;
        let gs = grads.affines();
        if self.adam {
            let (b1, b2) = (0.9, 0.999);
            let bc1 = 1.0 - b1f64::powi(b1, self.t as i32);
            let bc2 = 1.0 - b1f64::powi(b2, self.t as i32);
            for (((p, g), sq), mo) in params
                .affines_mut()
                .into_iter()
                .zip(gs)
                .zip(self.sq.iter_mut())
                .zip(self.mo.iter_mut())
            {
                let wlen = p.w.data().len();
                let (wsq, bsq) = sq.split_at_mut(wlen);
                let (wmo, bmo) = mo.split_at_mut(wlen);
                for (((v, d), s), m) in p.w.data_mut().iter_mut().zip(g.w.data()).zip(wsq).zip(wmo) {
                    *m = b1 * *m + (1.0 - b1) * d;
                    *s = b2 * *s + (1.0 - b2) * d * d;
                    *v -= lr * (*m / bc1) / ((*s / bc2).sqrt() + self.eps);
                }
                for (((v, d), s), m) in p.b.iter_mut().zip(&g.b).zip(bsq).zip(bmo) {
                    *m = b1 * *m + (1.0 - b1) * d;
                    *s = b2 * *s + (1.0 - b2) * d * d;
                    *v -= lr * (*m / bc1) / ((*s / bc2).sqrt() + self.eps);
                }
            }
            return;
        }
        for ((p, g), sq) in params.affines_mut().into_iter().zip(gs).zip(self.sq.iter_mut()) {
            let (wsq, bsq) = sq.split_at_mut(p.w.data().len());
            for ((v, d), s) in p.w.data_mut().iter_mut().zip(g.w.data()).zip(wsq) {
                *s = self.decay * *s + (1.0 - self.decay) * d * d;
                *v -= lr * d / (s.sqrt() + self.eps);
            }
            for ((v, d), s) in p.b.iter_mut().zip(&g.b).zip(bsq) {
                *s = self.decay * *s + (1.0 - self.decay) * d * d;
                *v -= lr * d / (s.sqrt() + self.eps);
            }
        }
    }
}

mod b1f64 {
    pub fn powi(base: f64, exp: i32) -> f64 {
        base.powi(exp)
    }
}

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let iters: usize = args.get(1).and_then(|s| s.parse().ok()).unwrap_or(60);
    let rbm_epochs: usize = args.get(2).and_then(|s| s.parse().ok()).unwrap_or(30);
    let cells: Vec<(f64, f64)> = args[3..]
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
    let spec = LayerSpec {
        pre_struct_dim: 300,
        pre_attr_dim: 200,
        hidden_dims: vec![128],
        preprocess: true,
    };
    let rbm = RbmConfig { seed: 1, epochs: rbm_epochs, ..Default::default() };
    let t = Instant::now();
    let init = pretrain_stack(&net, &spec, &rbm).unwrap();
    eprintln!("pretrained {rbm_epochs} epochs in {:.0}s", t.elapsed().as_secs_f64());

    for (gamma1, lr) in cells {
        let weights = LossWeights::default();
        let pen = PenaltyConfig { gamma1, gamma2: 10.0 };
        let mut params = init.clone();
        let mut opt = RmsProp::new(&params);
        let t = Instant::now();
        let batch = Batch::full(&net);
        let mut first = 0.0;
        let mut lastl = (0.0, 0.0, 0.0);
        for it in 0..iters {
            let cache = forward(&params, &batch).unwrap();
            let l = losses(&params, &cache, &batch, &weights, &pen);
            if it == 0 {
                first = l.mix;
            }
            lastl = (l.first_order, l.second_order, l.attribute);
            if !l.mix.is_finite() {
                eprintln!("g1={gamma1} lr={lr}: DIVERGED at {it}");
                break;
            }
            let g = backward(&params, &cache, &batch, &weights, &pen).unwrap();
            opt.step(&mut params, &g, lr);
        }
        let emb = embed_all(&params, &net).unwrap();
        let rec = network_reconstruction(&emb, &net, &[1000, 5000]).unwrap();
        let cls = classify(&emb, net.labels().unwrap(), 0.1, 7, 3).unwrap();
        eprintln!(
            "g1={gamma1:<4} lr={lr:<7}: mix {first:.0}->... 1st {:9.1} 2nd {:11.1} att {:11.1} | P@1k {:.3} P@5k {:.3} micro {:.3} ({:.0}s)",
            lastl.0, lastl.1, lastl.2,
            rec.precisions[0].1, rec.precisions[1].1, cls.micro_f1,
            t.elapsed().as_secs_f64()
        );
    }
}
