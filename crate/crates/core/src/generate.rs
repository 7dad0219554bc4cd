//! Seeded generators: complete graph, Erdős–Rényi, the static scale-free
//! model, and a community composer that wires independently generated
//! communities together with inter-community probability `mu`.
//!
//! Every generator is a pure function of its [`GeneratorSpec`]; the same
//! spec always yields the same edge set.

use std::collections::HashSet;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::seq::IndexedRandom;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::rng::{derive_seed, rng_from_seed, stream};

/// Consecutive failed draws (per target edge) tolerated by the static model.
pub const SATURATION_FACTOR: u64 = 200;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    Complete,
    Er,
    StaticSf,
    CommunityComposed,
}

/// Generator used inside each community of a composed graph.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BaseFamily {
    Er,
    StaticSf,
}

impl std::str::FromStr for Family {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "complete" => Ok(Family::Complete),
            "er" => Ok(Family::Er),
            "sf" | "static_sf" | "static-sf" => Ok(Family::StaticSf),
            "composed" | "community_composed" | "community-composed" => {
                Ok(Family::CommunityComposed)
            }
            other => Err(Error::InvalidSpec(format!("unknown family {other:?}"))),
        }
    }
}

impl std::str::FromStr for BaseFamily {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "er" => Ok(BaseFamily::Er),
            "sf" | "static_sf" | "static-sf" => Ok(BaseFamily::StaticSf),
            other => Err(Error::InvalidSpec(format!("unknown base family {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratorSpec {
    pub family: Family,
    pub n: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub m: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub communities: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mu: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub base: Option<BaseFamily>,
    #[serde(default)]
    pub seed: u64,
}

impl GeneratorSpec {
    fn bare(family: Family, n: usize, seed: u64) -> Self {
        GeneratorSpec {
            family,
            n,
            p: None,
            gamma: None,
            m: None,
            communities: None,
            mu: None,
            base: None,
            seed,
        }
    }

    pub fn complete(n: usize) -> Self {
        Self::bare(Family::Complete, n, 0)
    }

    pub fn er(n: usize, p: f64, seed: u64) -> Self {
        GeneratorSpec {
            p: Some(p),
            ..Self::bare(Family::Er, n, seed)
        }
    }

    pub fn static_sf(n: usize, gamma: f64, m: f64, seed: u64) -> Self {
        GeneratorSpec {
            gamma: Some(gamma),
            m: Some(m),
            ..Self::bare(Family::StaticSf, n, seed)
        }
    }

    /// Composed graph with ER communities of internal probability `p`.
    pub fn composed_er(n: usize, communities: usize, p: f64, mu: f64, seed: u64) -> Self {
        GeneratorSpec {
            p: Some(p),
            communities: Some(communities),
            mu: Some(mu),
            base: Some(BaseFamily::Er),
            ..Self::bare(Family::CommunityComposed, n, seed)
        }
    }

    /// Composed graph with static scale-free communities.
    pub fn composed_sf(
        n: usize,
        communities: usize,
        gamma: f64,
        m: f64,
        mu: f64,
        seed: u64,
    ) -> Self {
        GeneratorSpec {
            gamma: Some(gamma),
            m: Some(m),
            communities: Some(communities),
            mu: Some(mu),
            base: Some(BaseFamily::StaticSf),
            ..Self::bare(Family::CommunityComposed, n, seed)
        }
    }

    /// Checks that exactly the parameters the family needs are present and
    /// within range.
    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::InvalidSpec(msg));
        if self.n < 2 {
            return Err(Error::TooSmall { n: self.n });
        }
        let (needs_p, needs_sf, composed) = match self.family {
            Family::Complete => (false, false, false),
            Family::Er => (true, false, false),
            Family::StaticSf => (false, true, false),
            Family::CommunityComposed => match self.base {
                Some(BaseFamily::Er) => (true, false, true),
                Some(BaseFamily::StaticSf) => (false, true, true),
                None => return fail("composed family needs a base generator".into()),
            },
        };
        check_presence("p", self.p.is_some(), needs_p)?;
        check_presence("gamma", self.gamma.is_some(), needs_sf)?;
        check_presence("m", self.m.is_some(), needs_sf)?;
        check_presence("communities", self.communities.is_some(), composed)?;
        check_presence("mu", self.mu.is_some(), composed)?;
        check_presence("base", self.base.is_some(), composed)?;

        if let Some(p) = self.p {
            if !(0.0..=1.0).contains(&p) {
                return fail(format!("p = {p} outside [0, 1]"));
            }
        }
        if let Some(mu) = self.mu {
            if !(0.0..=1.0).contains(&mu) {
                return fail(format!("mu = {mu} outside [0, 1]"));
            }
        }
        if let Some(gamma) = self.gamma {
            // NaN fails this comparison too.
            if gamma.is_nan() || gamma < 2.0 {
                return fail(format!("gamma = {gamma} below 2"));
            }
        }
        if let Some(m) = self.m {
            if !m.is_finite() || m <= 0.0 {
                return fail(format!("mean degree m = {m} must be positive"));
            }
        }
        if let Some(k) = self.communities {
            if k == 0 {
                return fail("communities must be at least 1".into());
            }
            if 2 * k > self.n {
                return Err(Error::TooManyCommunities {
                    communities: k,
                    n: self.n,
                });
            }
        }
        if needs_sf {
            let size = match self.communities {
                Some(k) => self.n / k,
                None => self.n,
            };
            let m = self.m.unwrap_or_default();
            let target = static_sf_target_edges(size, m);
            let max_edges = size * (size - 1) / 2;
            if target > max_edges {
                return fail(format!(
                    "m = {m} asks for {target} edges on {size} nodes (at most {max_edges})"
                ));
            }
        }
        Ok(())
    }
}

fn check_presence(name: &str, present: bool, required: bool) -> Result<()> {
    match (present, required) {
        (true, false) => Err(Error::InvalidSpec(format!(
            "parameter {name} is not used by this family"
        ))),
        (false, true) => Err(Error::InvalidSpec(format!("parameter {name} is required"))),
        _ => Ok(()),
    }
}

/// Output of a generator run.
#[derive(Debug, Clone)]
pub struct Generated {
    pub graph: Graph,
    /// Connectivity-repair edges added by the composer.
    pub bridges: usize,
    /// Inter-community edges drawn with probability `mu`, before repair.
    pub sampled_cross_edges: usize,
    /// Inter-community node pairs among surviving nodes.
    pub cross_pairs: usize,
}

impl Generated {
    fn plain(graph: Graph) -> Self {
        Generated {
            graph,
            bridges: 0,
            sampled_cross_edges: 0,
            cross_pairs: 0,
        }
    }

    /// Realized inter-community density before bridge edges were added.
    pub fn sampled_cross_density(&self) -> Option<f64> {
        (self.cross_pairs > 0).then(|| self.sampled_cross_edges as f64 / self.cross_pairs as f64)
    }
}

pub fn generate(spec: &GeneratorSpec) -> Result<Generated> {
    spec.validate()?;
    match spec.family {
        Family::Complete => gen_complete(spec.n).map(Generated::plain),
        Family::Er => gen_er(spec.n, spec.p.unwrap_or_default(), spec.seed).map(Generated::plain),
        Family::StaticSf => gen_static_sf(
            spec.n,
            spec.gamma.unwrap_or_default(),
            spec.m.unwrap_or_default(),
            spec.seed,
        )
        .map(Generated::plain),
        Family::CommunityComposed => compose_communities(spec),
    }
}

pub fn gen_complete(n: usize) -> Result<Graph> {
    if n < 2 {
        return Err(Error::TooSmall { n });
    }
    Graph::from_edge_pairs(n, (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))))
}

/// Each of the `n(n-1)/2` pairs is included independently with probability `p`.
pub fn gen_er(n: usize, p: f64, seed: u64) -> Result<Graph> {
    if n < 2 {
        return Err(Error::TooSmall { n });
    }
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::InvalidSpec(format!("p = {p} outside [0, 1]")));
    }
    let mut rng = rng_from_seed(seed);
    let mut pairs = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            // random::<f64>() lies in [0, 1): p = 1 always fires, p = 0 never does.
            if rng.random::<f64>() < p {
                pairs.push((i, j));
            }
        }
    }
    Graph::from_edge_pairs(n, pairs)
}

pub fn static_sf_target_edges(n: usize, m: f64) -> usize {
    (m * n as f64 / 2.0).floor() as usize
}

/// Static scale-free model: node `i` (1-based) gets weight `i^(-alpha)`,
/// `alpha = 1 / (gamma - 1)`. Endpoint pairs are drawn proportionally to the
/// weights until exactly `floor(m n / 2)` distinct edges exist.
pub fn gen_static_sf(n: usize, gamma: f64, m: f64, seed: u64) -> Result<Graph> {
    static_sf_with_budget(n, gamma, m, seed, SATURATION_FACTOR)
}

fn static_sf_with_budget(
    n: usize,
    gamma: f64,
    m: f64,
    seed: u64,
    saturation_factor: u64,
) -> Result<Graph> {
    if n < 2 {
        return Err(Error::TooSmall { n });
    }
    if gamma.is_nan() || gamma < 2.0 {
        return Err(Error::InvalidSpec(format!("gamma = {gamma} below 2")));
    }
    if !m.is_finite() || m <= 0.0 {
        return Err(Error::InvalidSpec(format!("mean degree m = {m} must be positive")));
    }
    let target = static_sf_target_edges(n, m);
    if target > n * (n - 1) / 2 {
        return Err(Error::InvalidSpec(format!(
            "m = {m} asks for {target} edges on {n} nodes"
        )));
    }
    let alpha = 1.0 / (gamma - 1.0);
    let weights: Vec<f64> = (1..=n).map(|i| (i as f64).powf(-alpha)).collect();
    let sampler = WeightedIndex::new(&weights)
        .map_err(|e| Error::InvalidSpec(format!("static model weights: {e}")))?;

    let mut rng = rng_from_seed(seed);
    let mut present: HashSet<(usize, usize)> = HashSet::with_capacity(target);
    let mut pairs = Vec::with_capacity(target);
    let budget = saturation_factor * target as u64;
    let mut failures: u64 = 0;
    while pairs.len() < target {
        let a = sampler.sample(&mut rng);
        let b = sampler.sample(&mut rng);
        let key = (a.min(b), a.max(b));
        if a != b && present.insert(key) {
            pairs.push(key);
            failures = 0;
        } else {
            failures += 1;
            if failures >= budget {
                return Err(Error::EdgeSaturation {
                    attempts: failures,
                    edges: pairs.len(),
                    target,
                });
            }
        }
    }
    Graph::from_edge_pairs(n, pairs)
}

/// Splits `n` into `k` sizes that differ by at most one, larger sizes first.
pub fn community_sizes(n: usize, k: usize) -> Vec<usize> {
    let base = n / k;
    let extra = n % k;
    (0..k).map(|c| base + usize::from(c < extra)).collect()
}

/// Seed for community `index` of a composed graph.
pub fn community_seed(seed: u64, index: usize) -> u64 {
    derive_seed(seed, stream::COMMUNITY_BASE + index as u64)
}

/// Builds a community-structured graph:
///
/// 1. split `n` into `k` near-equal sizes;
/// 2. generate each community with the base generator and its own seed;
/// 3. keep each community's largest component;
/// 4. add every inter-community pair independently with probability `mu`;
/// 5. bridge any community not reached from community 0 with one random edge.
pub fn compose_communities(spec: &GeneratorSpec) -> Result<Generated> {
    if spec.family != Family::CommunityComposed {
        return Err(Error::InvalidSpec("compose_communities needs the composed family".into()));
    }
    spec.validate()?;
    let k = spec.communities.unwrap_or(1);
    let mu = spec.mu.unwrap_or_default();

    let mut pairs: Vec<(usize, usize)> = Vec::new();
    let mut labels: Vec<usize> = Vec::new();
    for (c, size) in community_sizes(spec.n, k).into_iter().enumerate() {
        let seed = community_seed(spec.seed, c);
        let sub = if size < 2 {
            Graph::empty(size.max(1))?
        } else {
            match spec.base {
                Some(BaseFamily::StaticSf) => gen_static_sf(
                    size,
                    spec.gamma.unwrap_or_default(),
                    spec.m.unwrap_or_default(),
                    seed,
                )?,
                _ => gen_er(size, spec.p.unwrap_or_default(), seed)?,
            }
        }
        .largest_component();
        let offset = labels.len();
        pairs.extend(sub.edges().map(|(a, b)| (a + offset, b + offset)));
        labels.extend(std::iter::repeat_n(c, sub.node_count()));
    }
    let n = labels.len();

    let mut rng = rng_from_seed(derive_seed(spec.seed, stream::INTER_COMMUNITY));
    let mut sampled_cross_edges = 0;
    let mut cross_pairs = 0;
    for a in 0..n {
        for b in a + 1..n {
            if labels[a] != labels[b] {
                cross_pairs += 1;
                if rng.random::<f64>() < mu {
                    pairs.push((a, b));
                    sampled_cross_edges += 1;
                }
            }
        }
    }

    let mut graph = Graph::from_edge_pairs(n, pairs.iter().copied())?;
    let bridges = bridge_communities(&mut graph, &mut pairs, &labels, k, spec.seed)?;
    let graph = graph.with_communities(labels)?;
    Ok(Generated {
        graph,
        bridges,
        sampled_cross_edges,
        cross_pairs,
    })
}

/// Adds one random edge between each community outside the component of
/// community 0 and that component, growing it as it goes. Returns the count.
fn bridge_communities(
    graph: &mut Graph,
    pairs: &mut Vec<(usize, usize)>,
    labels: &[usize],
    k: usize,
    seed: u64,
) -> Result<usize> {
    if graph.is_connected() {
        return Ok(0);
    }
    let n = labels.len();
    let mut members: Vec<Vec<usize>> = vec![Vec::new(); k];
    for (v, &c) in labels.iter().enumerate() {
        members[c].push(v);
    }
    let mut rng = rng_from_seed(derive_seed(seed, stream::BRIDGES));
    let mut reached = vec![false; n];
    let mut reached_list: Vec<usize> = Vec::new();
    fn mark_from(start: usize, reached: &mut [bool], list: &mut Vec<usize>, g: &Graph) {
        if reached[start] {
            return;
        }
        let mut stack = vec![start];
        reached[start] = true;
        while let Some(v) = stack.pop() {
            list.push(v);
            for &w in g.neighbors(v) {
                if !reached[w] {
                    reached[w] = true;
                    stack.push(w);
                }
            }
        }
    }
    mark_from(0, &mut reached, &mut reached_list, graph);

    let mut bridges = 0;
    for community in members.iter().skip(1) {
        let Some(&first) = community.first() else {
            continue;
        };
        if reached[first] {
            continue;
        }
        // Each community is internally connected, so `first` stands for all of it.
        let inside = *community.choose(&mut rng).expect("non-empty community");
        let anchor = *reached_list.choose(&mut rng).expect("component of node 0");
        pairs.push((anchor.min(inside), anchor.max(inside)));
        bridges += 1;
        *graph = Graph::from_edge_pairs(n, pairs.iter().copied())?;
        mark_from(inside, &mut reached, &mut reached_list, graph);
    }
    Ok(bridges)
}
