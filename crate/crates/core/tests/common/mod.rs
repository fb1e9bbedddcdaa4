#![allow(dead_code)]

use linx::instance::SymMatrix;
use nalgebra::DMatrix;
use rand::Rng;

/// `B Bᵀ` with `B` an `n × r` matrix of uniform entries in `[-1, 1]`; rank `r` almost surely.
pub fn random_gram<R: Rng>(rng: &mut R, n: usize, r: usize) -> SymMatrix {
    let b = DMatrix::from_fn(n, r, |_, _| rng.random_range(-1.0..1.0));
    let c = &b * b.transpose();
    SymMatrix::new((&c + c.transpose()) * 0.5).expect("gram matrix is symmetric")
}

pub fn random_diagonal<R: Rng>(rng: &mut R, n: usize, lo: f64, hi: f64) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(lo..hi)).collect()
}

pub fn sorted_desc(d: &[f64]) -> (Vec<f64>, Vec<usize>) {
    let mut perm: Vec<usize> = (0..d.len()).collect();
    perm.sort_by(|&a, &b| d[b].total_cmp(&d[a]));
    (perm.iter().map(|&i| d[i]).collect(), perm)
}
