#![allow(dead_code)]

use passnet_core::graph::Graph;
use rand::seq::SliceRandom;
use rand::Rng;

/// Random connected graph: a random spanning tree plus `extra` chords, with
/// random orientations and shuffled edge order.
pub fn connected_graph<R: Rng>(rng: &mut R, n: usize, extra: usize) -> Graph {
    let mut order: Vec<usize> = (1..=n).collect();
    order.shuffle(rng);
    let mut pairs: Vec<(usize, usize)> = Vec::new();
    for k in 1..n {
        let parent = order[rng.random_range(0..k)];
        pairs.push((order[k], parent));
    }
    let max_edges = n * (n - 1) / 2;
    let mut tries = 0;
    while pairs.len() < (n - 1 + extra).min(max_edges) && tries < 1000 {
        tries += 1;
        let i = rng.random_range(1..=n);
        let j = rng.random_range(1..=n);
        if i != j && !pairs.iter().any(|&(a, b)| (a, b) == (i, j) || (a, b) == (j, i)) {
            pairs.push((i, j));
        }
    }
    orient_and_shuffle(rng, n, pairs)
}

/// Random graph that may be disconnected (each pair present with probability `prob`).
pub fn any_graph<R: Rng>(rng: &mut R, n: usize, prob: f64) -> Option<Graph> {
    let mut pairs = Vec::new();
    for i in 1..=n {
        for j in i + 1..=n {
            if rng.random_bool(prob) {
                pairs.push((i, j));
            }
        }
    }
    if pairs.is_empty() {
        return None;
    }
    Some(orient_and_shuffle(rng, n, pairs))
}

fn orient_and_shuffle<R: Rng>(rng: &mut R, n: usize, mut pairs: Vec<(usize, usize)>) -> Graph {
    for p in pairs.iter_mut() {
        if rng.random_bool(0.5) {
            *p = (p.1, p.0);
        }
    }
    pairs.shuffle(rng);
    Graph::from_edge_list(n, &pairs).expect("generated graph is valid")
}

/// Union-find acyclicity check over 0-based node pairs.
pub fn is_forest(n: usize, pairs: impl IntoIterator<Item = (usize, usize)>) -> bool {
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(p: &mut [usize], mut x: usize) -> usize {
        while p[x] != x {
            p[x] = p[p[x]];
            x = p[x];
        }
        x
    }
    for (a, b) in pairs {
        let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
        if ra == rb {
            return false;
        }
        parent[ra] = rb;
    }
    true
}
