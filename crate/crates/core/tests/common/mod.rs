//! Independent oracles shared by the integration tests and the acceptance
//! runner. Nothing here calls the library routine it is used to check.
#![allow(dead_code)]

use ndarray::Array2;
use rand::{Rng as _, SeedableRng};
use rand_chacha::ChaCha8Rng;
use relnet::graph::Graph;
use relnet::mlp::MlpModel;
use relnet::mlp::ParamId;
use relnet::train::batch_loss;

pub fn test_rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// G(n, p) drawn directly from the test RNG.
pub fn random_graph(n: usize, p: f64, seed: u64) -> Graph {
    let mut rng = test_rng(seed);
    let mut pairs = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            if rng.random::<f64>() < p {
                pairs.push((i, j));
            }
        }
    }
    Graph::from_edge_pairs(n, pairs).unwrap()
}

pub fn adjacency(g: &Graph) -> Vec<Vec<bool>> {
    let n = g.node_count();
    let mut a = vec![vec![false; n]; n];
    for (u, v) in g.edges() {
        a[u][v] = true;
        a[v][u] = true;
    }
    a
}

/// All-pairs shortest paths; `usize::MAX` marks unreachable pairs.
pub fn floyd_warshall(g: &Graph) -> Vec<Vec<usize>> {
    let n = g.node_count();
    let inf = usize::MAX / 4;
    let a = adjacency(g);
    let mut d = vec![vec![inf; n]; n];
    for i in 0..n {
        d[i][i] = 0;
        for j in 0..n {
            if a[i][j] {
                d[i][j] = 1;
            }
        }
    }
    for k in 0..n {
        for i in 0..n {
            for j in 0..n {
                if d[i][k] + d[k][j] < d[i][j] {
                    d[i][j] = d[i][k] + d[k][j];
                }
            }
        }
    }
    for row in &mut d {
        for v in row.iter_mut() {
            if *v >= inf {
                *v = usize::MAX;
            }
        }
    }
    d
}

/// Mean shortest-path length over unordered pairs; `None` if disconnected.
#[allow(clippy::needless_range_loop)]
pub fn oracle_avg_path(g: &Graph) -> Option<f64> {
    let d = floyd_warshall(g);
    let n = g.node_count();
    let (mut sum, mut pairs) = (0usize, 0usize);
    for i in 0..n {
        for j in i + 1..n {
            if d[i][j] == usize::MAX {
                return None;
            }
            sum += d[i][j];
            pairs += 1;
        }
    }
    (pairs > 0).then(|| sum as f64 / pairs as f64)
}

/// Mean local clustering by enumerating neighbor pairs.
pub fn oracle_clustering(g: &Graph) -> f64 {
    let n = g.node_count();
    let a = adjacency(g);
    let mut total = 0.0;
    for v in 0..n {
        let nbrs: Vec<usize> = (0..n).filter(|&u| a[v][u]).collect();
        let k = nbrs.len();
        if k < 2 {
            continue;
        }
        let mut links = 0;
        for x in 0..k {
            for y in x + 1..k {
                if a[nbrs[x]][nbrs[y]] {
                    links += 1;
                }
            }
        }
        total += links as f64 / (k * (k - 1) / 2) as f64;
    }
    total / n as f64
}

/// Newman modularity as the double sum over node pairs.
pub fn oracle_modularity(g: &Graph, labels: &[usize]) -> f64 {
    let n = g.node_count();
    let a = adjacency(g);
    let two_m = 2.0 * g.edge_count() as f64;
    let deg: Vec<f64> = (0..n).map(|i| a[i].iter().filter(|&&x| x).count() as f64).collect();
    let mut q = 0.0;
    for i in 0..n {
        for j in 0..n {
            if labels[i] == labels[j] {
                q += (a[i][j] as u8 as f64) - deg[i] * deg[j] / two_m;
            }
        }
    }
    q / two_m
}

/// Every labeled simple graph on `n` nodes.
pub fn all_graphs(n: usize) -> Vec<Graph> {
    let pairs: Vec<(usize, usize)> =
        (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))).collect();
    (0u32..1 << pairs.len())
        .map(|bits| {
            let chosen = pairs
                .iter()
                .enumerate()
                .filter(|(k, _)| bits >> k & 1 == 1)
                .map(|(_, &p)| p);
            Graph::from_edge_pairs(n, chosen).unwrap()
        })
        .collect()
}

/// Unit ranges per node: widths differ by at most one, larger ones first.
pub fn oracle_slices(n: usize, width: usize) -> Vec<std::ops::Range<usize>> {
    let mut start = 0;
    (0..n)
        .map(|v| {
            let len = width / n + usize::from(v < width % n);
            let r = start..start + len;
            start += len;
            r
        })
        .collect()
}

/// Forward pass that iterates the message-exchange rule node by node:
/// unit `i` of node `v` sums `w_ij x_j` over the units `j` of `v` itself and
/// of its graph neighbors, adds its bias, then applies ReLU.
pub fn eq1_forward(model: &MlpModel<f64>, graph: &Graph, x: &Array2<f64>) -> Array2<f64> {
    let cfg = model.config();
    let p = model.params();
    let slices = oracle_slices(graph.node_count(), cfg.width);
    let adj = adjacency(graph);
    let relu = |v: f64| if v > 0.0 { v } else { 0.0 };
    let mut out = Array2::zeros((x.nrows(), cfg.out_dim));
    for b in 0..x.nrows() {
        let mut h: Vec<f64> = (0..cfg.width)
            .map(|u| {
                let mut s = p.input_bias[u];
                for k in 0..cfg.in_dim {
                    s += x[[b, k]] * p.input_weights[[k, u]];
                }
                relu(s)
            })
            .collect();
        for r in 0..cfg.rounds {
            let w = &p.round_weights[r];
            let mut next = vec![0.0; cfg.width];
            for v in 0..graph.node_count() {
                for i in slices[v].clone() {
                    let mut s = p.round_biases[r][i];
                    for u in 0..graph.node_count() {
                        if u != v && !adj[v][u] {
                            continue;
                        }
                        for j in slices[u].clone() {
                            s += w[[i, j]] * h[j];
                        }
                    }
                    next[i] = relu(s);
                }
            }
            h = next;
        }
        for c in 0..cfg.out_dim {
            let mut s = p.output_bias[c];
            for (u, hu) in h.iter().enumerate() {
                s += hu * p.output_weights[[u, c]];
            }
            out[[b, c]] = s;
        }
    }
    out
}

/// Relative error with a small absolute floor so exact zeros compare cleanly.
pub fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-6)
}

/// Largest relative error between backprop and central differences over
/// every trainable entry. Closed mask entries, and biases of a bias-free
/// model, are not parameters; their gradient must be exactly zero.
pub fn grad_check(model: &MlpModel<f64>, x: &Array2<f64>, labels: &[usize], eps: f64) -> f64 {
    let (_, grads) = relnet::train::loss_and_grads(model, x.view(), labels).unwrap();
    let open = model.mask().map(|m| m.units().clone());
    let width = model.config().width;
    let mut probe = model.clone();
    let mut worst = 0f64;
    for id in model.params().ids() {
        let n = model.params().get(id).len();
        if id.is_bias() && !model.config().bias {
            assert!(grads.get(id).iter().all(|&g| g == 0.0), "disabled bias has a gradient");
            continue;
        }
        for k in 0..n {
            if let (ParamId::RoundWeights(_), Some(open)) = (id, &open) {
                if !open[[k / width, k % width]] {
                    assert_eq!(grads.get(id)[k], 0.0, "closed entry has a gradient");
                    continue;
                }
            }
            let orig = probe.params().get(id)[k];
            probe.params_mut().get_mut(id)[k] = orig + eps;
            let up = batch_loss(&probe, x.view(), labels).unwrap();
            probe.params_mut().get_mut(id)[k] = orig - eps;
            let down = batch_loss(&probe, x.view(), labels).unwrap();
            probe.params_mut().get_mut(id)[k] = orig;
            let fd = (up - down) / (2.0 * eps);
            let e = rel_err(grads.get(id)[k], fd);
            if e > 1e-4 && std::env::var("RELNET_DEBUG_GRAD").is_ok() {
                eprintln!("{id:?}[{k}]: backprop {} vs fd {fd}", grads.get(id)[k]);
            }
            worst = worst.max(e);
        }
    }
    worst
}

/// Discrete power-law exponent by maximum likelihood, with the lower cutoff
/// chosen to minimize the Kolmogorov-Smirnov distance of the tail fit.
pub fn power_law_exponent(degrees: &[usize], min_tail: usize) -> (f64, usize) {
    let mut ks: Vec<usize> = degrees.iter().copied().filter(|&k| k > 0).collect();
    ks.sort_unstable();
    let mut candidates = ks.clone();
    candidates.dedup();
    let mut best = (f64::INFINITY, 0.0, 0);
    for &kmin in &candidates {
        let tail: Vec<usize> = ks.iter().copied().filter(|&k| k >= kmin).collect();
        if tail.len() < min_tail {
            break;
        }
        let n = tail.len() as f64;
        let s: f64 = tail.iter().map(|&k| (k as f64 / (kmin as f64 - 0.5)).ln()).sum();
        let alpha = 1.0 + n / s;
        // Empirical vs fitted complementary CDF on the tail support.
        let mut dist = 0f64;
        let mut idx = 0;
        for &k in tail.iter() {
            while idx < tail.len() && tail[idx] < k {
                idx += 1;
            }
            let emp = (tail.len() - idx) as f64 / n;
            let fit = ((k as f64 - 0.5) / (kmin as f64 - 0.5)).powf(1.0 - alpha);
            dist = dist.max((emp - fit).abs());
        }
        if dist < best.0 {
            best = (dist, alpha, kmin);
        }
    }
    (best.1, best.2)
}

/// Normal-approximation binomial interval at the given z.
pub fn binomial_interval(trials: f64, p: f64, z: f64) -> (f64, f64) {
    let sd = (trials * p * (1.0 - p)).sqrt();
    (trials * p - z * sd, trials * p + z * sd)
}
