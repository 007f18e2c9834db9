use mdne_core::tensor::{matmul, matmul_a_bt, matmul_at_b, Matrix};
use std::time::Instant;

fn mat(r: usize, c: usize, seed: u64) -> Matrix {
    let mut state = seed.wrapping_mul(0x9E3779B97F4A7C15) | 1;
    let data = (0..r * c)
        .map(|_| {
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            (state as f64 / u64::MAX as f64) - 0.5
        })
        .collect();
    Matrix::from_vec(r, c, data).unwrap()
}

fn main() {
    let n = 2708usize;
    let h = 300usize;
    let a = mat(n, h, 1);
    let w = mat(h, n, 2);
    let d = mat(n, n, 3);
    let macs = (n * h * n) as f64;

    let t = Instant::now();
    let s_hat = matmul(&a, &w).unwrap();
    let dt = t.elapsed().as_secs_f64();
    println!("matmul      : {:.2}s  {:.2} GMac/s  [{:.3}]", dt, macs / dt / 1e9, s_hat.get(0, 0));

    let t = Instant::now();
    let dw = matmul_at_b(&a, &d).unwrap();
    let dt = t.elapsed().as_secs_f64();
    println!("matmul_at_b : {:.2}s  {:.2} GMac/s  [{:.3}]", dt, macs / dt / 1e9, dw.get(0, 0));

    let t = Instant::now();
    let dx = matmul_a_bt(&d, &w).unwrap();
    let dt = t.elapsed().as_secs_f64();
    println!("matmul_a_bt : {:.2}s  {:.2} GMac/s  [{:.3}]", dt, macs / dt / 1e9, dx.get(0, 0));
}
