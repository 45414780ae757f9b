#![allow(dead_code)]

use cimmino_core::sparse::SparseMatrix;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Square matrix with the given density plus one guaranteed entry per row
/// (no empty rows).
pub fn random_sparse(rng: &mut ChaCha8Rng, n: usize, density: f64) -> SparseMatrix {
    let mut t = Vec::new();
    for i in 0..n {
        t.push((i, rng.random_range(0..n), rng.random_range(0.5..1.5)));
        for j in 0..n {
            if rng.random::<f64>() < density {
                t.push((i, j, rng.random_range(-1.0..1.0)));
            }
        }
    }
    SparseMatrix::from_triplets(n, n, &t).unwrap()
}

/// Diagonally dominant, hence nonsingular.
pub fn random_nonsingular(rng: &mut ChaCha8Rng, n: usize, per_row: usize) -> SparseMatrix {
    let mut t = Vec::new();
    for i in 0..n {
        t.push((i, i, per_row as f64 + 1.0 + rng.random::<f64>()));
        for _ in 0..per_row {
            t.push((i, rng.random_range(0..n), rng.random_range(-1.0..1.0)));
        }
    }
    SparseMatrix::from_triplets(n, n, &t).unwrap()
}

/// `nblocks` diagonally dominant diagonal blocks of `size` rows, each with a
/// connected row inner-product graph.
pub fn block_diagonal(rng: &mut ChaCha8Rng, nblocks: usize, size: usize) -> SparseMatrix {
    let mut t = Vec::new();
    for b in 0..nblocks {
        let o = b * size;
        for i in 0..size {
            t.push((o + i, o + i, 5.0 + rng.random::<f64>()));
            t.push((o + i, o + (i + 1) % size, rng.random_range(-1.0..1.0)));
            for _ in 0..2 {
                t.push((o + i, o + rng.random_range(0..size), rng.random_range(-1.0..1.0)));
            }
        }
    }
    SparseMatrix::from_triplets(nblocks * size, nblocks * size, &t).unwrap()
}

pub fn shuffle_rows(rng: &mut ChaCha8Rng, a: &SparseMatrix) -> SparseMatrix {
    let mut perm: Vec<usize> = (0..a.nrows()).collect();
    perm.shuffle(rng);
    a.select_rows(&perm)
}

pub fn random_assignment(rng: &mut ChaCha8Rng, n: usize, k: usize) -> Vec<usize> {
    // every part gets at least one row
    let mut a: Vec<usize> = (0..n).map(|i| if i < k { i } else { rng.random_range(0..k) }).collect();
    a.shuffle(rng);
    a
}
