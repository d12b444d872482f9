//! Random networks with prescribed statistics, and the two-stage branching
//! process that describes their local neighbourhoods.
//!
//! Both configuration models realise the statistics exactly: node
//! attributes are fixed by the cell counts and only the wiring is random.
//! Parallel links and self-loops are kept.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::weighted::WeightedAliasIndex;
use rand_distr::Distribution;
use serde::{Deserialize, Serialize};

use crate::graph::{Network, NodeId, StateVector};
use crate::rng::{purpose, stream, StreamRng};
use crate::statistics::{NetworkStatistics, UndirectedStatistics};
use crate::{Error, Result};

pub const DEFAULT_NODE_CAP: usize = 10_000_000;

#[derive(Debug, Clone)]
pub struct EnsembleSample {
    pub network: Network,
    /// The wiring is `shuffle(stubs)` on `stream(seed, [WIRING])`.
    pub seed: u64,
}

/// Node attribute vectors in cell order: `(d, k, r, s)` per node.
fn design<K: Copy>(counts: &BTreeMap<K, u64>) -> Vec<K> {
    counts
        .iter()
        .flat_map(|(&c, &m)| std::iter::repeat_n(c, m as usize))
        .collect()
}

/// Directed configuration model: out-stub `h` (in node order) is wired to
/// the in-stub at position `pi(h)` of a uniform permutation.
pub fn sample_directed_cm(stats: &NetworkStatistics, n: u64, seed: u64) -> Result<EnsembleSample> {
    let nodes = design(&stats.counts(n)?);
    let mut offsets = Vec::with_capacity(nodes.len() + 1);
    offsets.push(0usize);
    let mut heads: Vec<NodeId> = Vec::new();
    for (i, c) in nodes.iter().enumerate() {
        offsets.push(offsets[i] + c.k as usize);
        heads.extend(std::iter::repeat_n(i as NodeId, c.d as usize));
    }
    let mut rng = stream(seed, &[purpose::WIRING]);
    heads.shuffle(&mut rng);
    let thresholds = nodes.iter().map(|c| c.r).collect();
    let states = StateVector::from_bits(nodes.iter().map(|c| c.s).collect())?;
    Ok(EnsembleSample {
        network: Network::from_csr(offsets, heads, thresholds, states)?,
        seed,
    })
}

/// Undirected configuration model: stubs are shuffled and consecutive pairs
/// become an undirected edge, stored as two opposite links.
pub fn sample_undirected_cm(stats: &UndirectedStatistics, n: u64, seed: u64) -> Result<EnsembleSample> {
    let nodes = design(&stats.counts(n)?);
    let mut stubs: Vec<NodeId> = nodes
        .iter()
        .enumerate()
        .flat_map(|(i, &(k, _, _))| std::iter::repeat_n(i as NodeId, k as usize))
        .collect();
    let mut rng = stream(seed, &[purpose::WIRING]);
    stubs.shuffle(&mut rng);
    let edges: Vec<(NodeId, NodeId)> = stubs
        .chunks_exact(2)
        .flat_map(|p| [(p[0], p[1]), (p[1], p[0])])
        .collect();
    let thresholds = nodes.iter().map(|c| c.1).collect();
    let states = StateVector::from_bits(nodes.iter().map(|c| c.2).collect())?;
    Ok(EnsembleSample {
        network: Network::build(&edges, thresholds, states)?,
        seed,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TreeNode {
    pub k: u32,
    pub r: u32,
    pub s: u8,
    pub generation: u32,
}

/// A depth-`t` sample of the two-stage branching process in breadth-first
/// order. Every node of generation `< depth` has exactly `k` children, stored
/// contiguously from `first_child`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BranchingTree {
    pub nodes: Vec<TreeNode>,
    pub first_child: Vec<usize>,
    pub depth: u32,
    /// The node cap was hit and the tree is incomplete.
    pub truncated: bool,
}

/// Alias table over `(k, r, s)` triples.
struct AttributeLaw {
    items: Vec<(u32, u32, u8)>,
    alias: Option<WeightedAliasIndex<f64>>,
}

impl AttributeLaw {
    fn new(law: &BTreeMap<(u32, u32, u8), f64>) -> Result<Self> {
        let items: Vec<_> = law.keys().copied().collect();
        let alias = if items.is_empty() {
            None
        } else {
            let w = law.values().copied().collect();
            Some(WeightedAliasIndex::new(w).map_err(|e| Error::InvalidStatistics(format!("attribute law: {e}")))?)
        };
        Ok(AttributeLaw { items, alias })
    }

    fn draw(&self, rng: &mut StreamRng) -> Result<(u32, u32, u8)> {
        match &self.alias {
            Some(a) => Ok(self.items[a.sample(rng)]),
            None => Err(Error::InvalidStatistics("link-biased law is empty".into())),
        }
    }
}

/// Samplers for the root law `p_{k,r,s}` and the offspring law `q_{k,r,s}`.
pub struct BranchingLaw {
    root: AttributeLaw,
    offspring: AttributeLaw,
}

impl BranchingLaw {
    pub fn new(stats: &NetworkStatistics) -> Result<Self> {
        Ok(BranchingLaw {
            root: AttributeLaw::new(stats.p_krs())?,
            offspring: AttributeLaw::new(stats.q_krs())?,
        })
    }

    pub fn sample(&self, depth: u32, rng: &mut StreamRng, cap: usize) -> Result<BranchingTree> {
        let (k, r, s) = self.root.draw(rng)?;
        let mut nodes = vec![TreeNode { k, r, s, generation: 0 }];
        let mut first_child = Vec::new();
        let mut truncated = false;
        let mut v = 0;
        while v < nodes.len() {
            let node = nodes[v];
            first_child.push(nodes.len());
            if node.generation < depth {
                if nodes.len() + node.k as usize > cap {
                    truncated = true;
                    break;
                }
                for _ in 0..node.k {
                    let (k, r, s) = self.offspring.draw(rng)?;
                    nodes.push(TreeNode {
                        k,
                        r,
                        s,
                        generation: node.generation + 1,
                    });
                }
            }
            v += 1;
        }
        first_child.resize(nodes.len(), nodes.len());
        Ok(BranchingTree {
            nodes,
            first_child,
            depth,
            truncated,
        })
    }
}

pub fn sample_branching(stats: &NetworkStatistics, depth: u32, seed: u64, cap: usize) -> Result<BranchingTree> {
    let mut rng = stream(seed, &[purpose::BRANCHING]);
    BranchingLaw::new(stats)?.sample(depth, &mut rng, cap)
}

impl BranchingTree {
    /// Root state at time `depth` under the LTM, where every node watches
    /// its children. `None` for truncated trees.
    pub fn root_state(&self) -> Option<bool> {
        if self.truncated {
            return None;
        }
        let mut state = vec![false; self.nodes.len()];
        for v in (0..self.nodes.len()).rev() {
            let node = self.nodes[v];
            state[v] = if node.generation == self.depth {
                node.s == 1
            } else {
                let c = self.first_child[v];
                let active = state[c..c + node.k as usize].iter().filter(|&&b| b).count();
                active as u32 >= node.r
            };
        }
        Some(state[0])
    }

    /// The tree as a network with links parent -> child. Leaves get
    /// threshold 0; their later states never reach the root by time `depth`.
    pub fn to_network(&self) -> Result<Network> {
        let mut edges = Vec::new();
        for (v, node) in self.nodes.iter().enumerate() {
            if node.generation < self.depth {
                let c = self.first_child[v];
                edges.extend((c..c + node.k as usize).map(|u| (v as NodeId, u as NodeId)));
            }
        }
        let thresholds = self
            .nodes
            .iter()
            .map(|n| if n.generation < self.depth { n.r } else { 0 })
            .collect();
        let states = StateVector::from_bits(self.nodes.iter().map(|n| n.s).collect())?;
        Network::build(&edges, thresholds, states)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BranchingEstimate {
    pub t: u32,
    pub mean: f64,
    pub std_err: f64,
    pub used: usize,
    /// Trees dropped at the node cap.
    pub discarded: usize,
}

/// Monte Carlo mean of the root state at time `t` over `replicas` trees.
/// Replica `i` draws from `stream(seed, [BRANCHING, i])`.
pub fn branching_root_expectation(
    stats: &NetworkStatistics,
    t: u32,
    replicas: usize,
    seed: u64,
    cap: usize,
) -> Result<BranchingEstimate> {
    if replicas == 0 {
        return Err(Error::InvalidArgument("replicas must be at least 1".into()));
    }
    let law = BranchingLaw::new(stats)?;
    let one = |i: usize| -> Result<Option<bool>> {
        let mut rng = stream(seed, &[purpose::BRANCHING, i as u64]);
        Ok(law.sample(t, &mut rng, cap)?.root_state())
    };
    #[cfg(feature = "parallel")]
    let outcomes: Vec<Option<bool>> = {
        use rayon::prelude::*;
        (0..replicas).into_par_iter().map(one).collect::<Result<_>>()?
    };
    #[cfg(not(feature = "parallel"))]
    let outcomes: Vec<Option<bool>> = (0..replicas).map(one).collect::<Result<_>>()?;

    let used = outcomes.iter().filter(|o| o.is_some()).count();
    let ones = outcomes.iter().filter(|o| **o == Some(true)).count();
    let discarded = replicas - used;
    if used == 0 {
        return Err(Error::InvalidArgument(format!("all {replicas} trees exceeded the node cap {cap}")));
    }
    let mean = ones as f64 / used as f64;
    let std_err = if used > 1 {
        (mean * (1.0 - mean) / (used - 1) as f64).sqrt()
    } else {
        0.0
    };
    Ok(BranchingEstimate {
        t,
        mean,
        std_err,
        used,
        discarded,
    })
}

/// Uniform random permutation of `0..n`.
pub(crate) fn permutation(n: usize, rng: &mut impl Rng) -> Vec<usize> {
    let mut p: Vec<usize> = (0..n).collect();
    p.shuffle(rng);
    p
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{run, Mode, RunOptions};
    use crate::meanfield::{iterate, MeanFieldMaps};
    use crate::statistics::{extract, extract_undirected, synthesize, Cell, DegreeLaw};
    use crate::threshold::{Fraction, ThresholdCdf};
    use proptest::prelude::*;
    use std::collections::HashMap;

    fn regular(k: u32, r: u32, upsilon: f64, n: u64) -> NetworkStatistics {
        let cdf = ThresholdCdf::step(Fraction::new(r as u64, k as u64).unwrap());
        synthesize(&cdf, &DegreeLaw::regular(k), upsilon, n).unwrap()
    }

    #[test]
    fn forced_degrees() {
        let s = regular(2, 1, 0.0, 3);
        for seed in 0..20 {
            let net = sample_directed_cm(&s, 3, seed).unwrap().network;
            assert!((0..3).all(|i| net.in_degree(i) == 2 && net.out_degree(i) == 2));
        }
    }

    #[test]
    fn two_node_wirings_are_uniform() {
        let s = regular(1, 1, 0.0, 2);
        let identity = (0..10_000)
            .filter(|&seed| sample_directed_cm(&s, 2, seed).unwrap().network.out_neighbors(0) == [0])
            .count();
        assert!((identity as f64 / 1e4 - 0.5).abs() < 0.05);
    }

    #[test]
    fn three_stub_wirings_are_uniform() {
        let s = regular(1, 1, 0.0, 3);
        let mut seen: HashMap<Vec<NodeId>, usize> = HashMap::new();
        let draws = 12_000;
        for seed in 0..draws {
            let net = sample_directed_cm(&s, 3, seed).unwrap().network;
            *seen.entry(net.edges().map(|e| e.1).collect()).or_default() += 1;
        }
        assert_eq!(seen.len(), 6);
        let expect = draws as f64 / 6.0;
        let chi2: f64 = seen.values().map(|&c| (c as f64 - expect).powi(2) / expect).sum();
        // 5 degrees of freedom, 99.9% quantile 20.5
        assert!(chi2 < 20.5, "chi2 = {chi2}");
    }

    #[test]
    fn undirected_pairings() {
        let u = UndirectedStatistics::from_joint(BTreeMap::from([((1, 0, 0), 1.0)])).unwrap();
        for seed in 0..10 {
            let net = sample_undirected_cm(&u, 2, seed).unwrap().network;
            assert_eq!(net.out_neighbors(0), [1]);
            assert!(net.is_symmetric());
        }
        let odd = UndirectedStatistics::from_joint(BTreeMap::from([((3, 1, 0), 1.0)])).unwrap();
        assert!(sample_undirected_cm(&odd, 3, 0).is_err());
    }

    #[test]
    fn tree_sizes() {
        let s = regular(2, 1, 0.5, 10);
        for t in 0..6 {
            let tree = sample_branching(&s, t, 9, DEFAULT_NODE_CAP).unwrap();
            assert_eq!(tree.nodes.len(), (1 << (t + 1)) - 1);
            assert!(!tree.truncated);
        }
        let capped = sample_branching(&s, 10, 9, 100).unwrap();
        assert!(capped.truncated);
        assert_eq!(capped.root_state(), None);
    }

    #[test]
    fn isolated_root() {
        let s = NetworkStatistics::from_joint(BTreeMap::from([(Cell::new(0, 0, 0, 1), 1.0)]), None).unwrap();
        let tree = sample_branching(&s, 4, 1, DEFAULT_NODE_CAP).unwrap();
        assert_eq!(tree.nodes.len(), 1);
    }

    #[test]
    fn root_state_matches_dynamics() {
        let s = NetworkStatistics::from_joint(
            BTreeMap::from([
                (Cell::new(2, 1, 1, 0), 0.25),
                (Cell::new(2, 3, 2, 1), 0.25),
                (Cell::new(1, 2, 0, 0), 0.25),
                (Cell::new(3, 2, 2, 1), 0.25),
            ]),
            None,
        )
        .unwrap();
        let law = BranchingLaw::new(&s).unwrap();
        for i in 0..300 {
            let mut rng = stream(5, &[i]);
            let t = (i % 5) as u32;
            let tree = law.sample(t, &mut rng, DEFAULT_NODE_CAP).unwrap();
            let rec = run(&tree.to_network().unwrap(), RunOptions {
                record_states: true,
                ..RunOptions::new(Mode::Ltm, t as usize)
            });
            let z_root = rec.state_at(t as usize).unwrap().get(0);
            assert_eq!(tree.root_state(), Some(z_root));
        }
    }

    #[test]
    fn offspring_mean() {
        let s = NetworkStatistics::from_joint(
            BTreeMap::from([(Cell::new(1, 3, 1, 0), 0.5), (Cell::new(3, 1, 1, 1), 0.5)]),
            None,
        )
        .unwrap();
        // q puts 3/4 on k = 1 and 1/4 on k = 3
        let want = 0.75 * 1.0 + 0.25 * 3.0;
        let law = BranchingLaw::new(&s).unwrap();
        let mut rng = stream(11, &[]);
        let mut xs = Vec::new();
        for _ in 0..10_000 {
            let tree = law.sample(2, &mut rng, DEFAULT_NODE_CAP).unwrap();
            let root_k = tree.nodes[0].k as usize;
            for c in 1..=root_k {
                xs.push(tree.nodes[c].k as f64);
            }
        }
        let m = xs.iter().sum::<f64>() / xs.len() as f64;
        let var = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (xs.len() - 1) as f64;
        assert!((m - want).abs() < 3.0 * (var / xs.len() as f64).sqrt());
    }

    #[test]
    fn expectation_edge_cases() {
        let s = regular(3, 2, 0.3, 10);
        let e0 = branching_root_expectation(&s, 0, 2000, 1, DEFAULT_NODE_CAP).unwrap();
        assert!((e0.mean - 0.3).abs() < 4.0 * e0.std_err);
        let all = regular(3, 2, 1.0, 10);
        assert_eq!(branching_root_expectation(&all, 3, 100, 1, DEFAULT_NODE_CAP).unwrap().mean, 1.0);
        let free = regular(3, 0, 0.0, 10);
        assert_eq!(branching_root_expectation(&free, 2, 100, 1, DEFAULT_NODE_CAP).unwrap().mean, 1.0);
        assert!(branching_root_expectation(&s, 1, 0, 1, DEFAULT_NODE_CAP).is_err());
    }

    #[test]
    fn expectation_tracks_recursion() {
        let s = regular(7, 3, 0.3, 10);
        let maps = MeanFieldMaps::from_stats(&s).unwrap();
        let tr = iterate(&maps, s.xi(), s.upsilon(), 3).unwrap();
        let e = branching_root_expectation(&s, 3, 20_000, 42, DEFAULT_NODE_CAP).unwrap();
        assert!((e.mean - tr.y_at(3)).abs() <= 3.0 * e.std_err, "{} vs {}", e.mean, tr.y_at(3));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]
        #[test]
        fn samples_reproduce_statistics(seed in any::<u64>(), k in 1u32..6, ups in 0.0f64..1.0) {
            let n = 60;
            let s = regular(k, (k + 1) / 2, (ups * 10.0).round() / 10.0, n);
            let sample = sample_directed_cm(&s, n, seed).unwrap();
            prop_assert_eq!(extract(&sample.network), s);
        }

        #[test]
        fn undirected_samples_are_symmetric(seed in any::<u64>()) {
            let u = UndirectedStatistics::from_joint(BTreeMap::from([((2, 1, 0), 0.4), ((3, 2, 1), 0.6)])).unwrap();
            let net = sample_undirected_cm(&u, 10, seed).unwrap().network;
            prop_assert!(net.is_symmetric());
            prop_assert_eq!(extract_undirected(&net).unwrap(), u);
        }
    }
}
