use mdne_core::eval::{classify, network_reconstruction};
use mdne_core::graph::load_cora_format;
use mdne_core::model::{embed_all, LayerSpec, ModelParams};
use mdne_core::pretrain::{pretrain_stack, RbmConfig};
use std::path::Path;

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let epochs: usize = args.get(1).and_then(|s| s.parse().ok()).unwrap_or(30);
    let rbm_lr: f64 = args.get(2).and_then(|s| s.parse().ok()).unwrap_or(0.1);
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
    let emb = if epochs == 0 {
        let p = ModelParams::random_init(2708, 1433, spec, 1).unwrap();
        embed_all(&p, &net).unwrap()
    } else {
        let rbm = RbmConfig { seed: 1, epochs, lr: rbm_lr, ..Default::default() };
        let p = pretrain_stack(&net, &spec, &rbm).unwrap();
        embed_all(&p, &net).unwrap()
    };
    let rec = network_reconstruction(&emb, &net, &[1000, 5000]).unwrap();
    let cls = classify(&emb, net.labels().unwrap(), 0.1, 7, 3).unwrap();
    println!(
        "rbm epochs {epochs} lr {rbm_lr}: P@1000 {:.3} P@5000 {:.3} micro {:.3} macro {:.3}",
        rec.precisions[0].1, rec.precisions[1].1, cls.micro_f1, cls.macro_f1
    );
}
