#![allow(dead_code)]

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tricon::network::{load_network_file, SignedNetwork};

pub fn fixture_path(name: &str) -> String {
    format!("{}/data/{name}", env!("CARGO_MANIFEST_DIR"))
}

pub fn fixture(name: &str) -> SignedNetwork {
    load_network_file(fixture_path(name)).expect("fixture loads")
}

fn weight(rng: &mut ChaCha8Rng) -> f64 {
    rng.random_range(1..=6) as f64 * 0.5
}

fn set(w: &mut DMatrix<f64>, i: usize, j: usize, v: f64) {
    w[(i, j)] = v;
    w[(j, i)] = v;
}

/// Random cluster sizes in `1..=max_size` and the resulting partition.
fn partition(rng: &mut ChaCha8Rng, max_size: usize) -> [Vec<usize>; 3] {
    let sizes: [usize; 3] = std::array::from_fn(|_| rng.random_range(1..=max_size));
    let mut next = 0;
    sizes.map(|s| {
        let c: Vec<usize> = (next..next + s).collect();
        next += s;
        c
    })
}

/// A network where every labeling is admissible for both synthesis modes:
/// each cluster's friendship graph is connected (a random spanning tree
/// plus extra edges) and every agent has an enemy in each other cluster.
pub fn random_admissible(seed: u64, max_size: usize) -> SignedNetwork {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let clusters = partition(&mut rng, max_size);
    let n: usize = clusters.iter().map(Vec::len).sum();
    let mut w = DMatrix::zeros(n, n);
    for c in &clusters {
        for k in 1..c.len() {
            let j = c[rng.random_range(0..k)];
            set(&mut w, c[k], j, weight(&mut rng));
        }
        for a in 0..c.len() {
            for b in (a + 1)..c.len() {
                if w[(c[a], c[b])] == 0.0 && rng.random_bool(0.3) {
                    set(&mut w, c[a], c[b], weight(&mut rng));
                }
            }
        }
    }
    for p in 0..3 {
        for q in 0..3 {
            if p == q {
                continue;
            }
            for &i in &clusters[p] {
                if clusters[q].iter().all(|&j| w[(i, j)] == 0.0) {
                    let j = clusters[q][rng.random_range(0..clusters[q].len())];
                    set(&mut w, i, j, -weight(&mut rng));
                }
                for &j in &clusters[q] {
                    if w[(i, j)] == 0.0 && rng.random_bool(0.2) {
                        set(&mut w, i, j, -weight(&mut rng));
                    }
                }
            }
        }
    }
    SignedNetwork::new(w, clusters).expect("generated network is well formed")
}

/// Sign-respecting network with sparse random edges and no admissibility
/// guarantees.
pub fn random_sparse(seed: u64, max_size: usize, density: f64) -> SignedNetwork {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let clusters = partition(&mut rng, max_size);
    let n: usize = clusters.iter().map(Vec::len).sum();
    let mut member = vec![0; n];
    for (p, c) in clusters.iter().enumerate() {
        for &a in c {
            member[a] = p;
        }
    }
    let mut w = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in (i + 1)..n {
            if rng.random_bool(density) {
                let v = weight(&mut rng);
                set(&mut w, i, j, if member[i] == member[j] { v } else { -v });
            }
        }
    }
    SignedNetwork::new(w, clusters).expect("generated network is well formed")
}
