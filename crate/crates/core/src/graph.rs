//! Directed multigraphs with per-node thresholds and initial states.
//!
//! Links point from the observing node to the observed one: a link `(i, j)`
//! means `i` counts the state of `j`. Out-neighbors are stored in a
//! compressed-row layout (`offsets`/`heads`), so a synchronous sweep is a
//! single sequential pass over `heads`.

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

pub type NodeId = u32;

/// Binary state, one byte per node (0 or 1).
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct StateVector(Vec<u8>);

impl StateVector {
    pub fn zeros(n: usize) -> Self {
        StateVector(vec![0; n])
    }

    pub fn ones(n: usize) -> Self {
        StateVector(vec![1; n])
    }

    pub fn from_bools(bits: &[bool]) -> Self {
        StateVector(bits.iter().map(|&b| b as u8).collect())
    }

    /// Errors if any entry is not 0 or 1.
    pub fn from_bits(bits: Vec<u8>) -> Result<Self> {
        if let Some(i) = bits.iter().position(|&b| b > 1) {
            return Err(Error::InvalidArgument(format!(
                "state entry {i} is {}, expected 0 or 1",
                bits[i]
            )));
        }
        Ok(StateVector(bits))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    #[inline]
    pub fn get(&self, i: usize) -> bool {
        self.0[i] != 0
    }

    pub fn set(&mut self, i: usize, on: bool) {
        self.0[i] = on as u8;
    }

    pub fn as_bits(&self) -> &[u8] {
        &self.0
    }

    pub(crate) fn bits_mut(&mut self) -> &mut [u8] {
        &mut self.0
    }

    pub fn count_ones(&self) -> usize {
        self.0.iter().map(|&b| b as usize).sum()
    }

    /// Entrywise `self <= other`.
    pub fn le(&self, other: &StateVector) -> bool {
        self.0.len() == other.0.len() && self.0.iter().zip(&other.0).all(|(a, b)| a <= b)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Network {
    offsets: Vec<usize>,
    heads: Vec<NodeId>,
    in_degree: Vec<u32>,
    threshold: Vec<u32>,
    initial_state: StateVector,
}

impl Network {
    /// Builds a network from `(tail, head)` pairs. `n` is taken from the
    /// threshold vector; duplicate pairs become parallel links.
    pub fn build(
        edges: &[(NodeId, NodeId)],
        thresholds: Vec<u32>,
        initial_state: StateVector,
    ) -> Result<Self> {
        let n = thresholds.len();
        let topo = Self::topology(n, edges)?;
        topo.with_attributes(thresholds, initial_state)
    }

    /// Topology only: thresholds and initial states all zero.
    pub fn topology(n: usize, edges: &[(NodeId, NodeId)]) -> Result<Self> {
        let mut offsets = vec![0usize; n + 1];
        let mut in_degree = vec![0u32; n];
        for &(tail, head) in edges {
            for id in [tail, head] {
                if id as usize >= n {
                    return Err(Error::NodeOutOfRange { id: id as usize, n });
                }
            }
            offsets[tail as usize + 1] += 1;
            in_degree[head as usize] += 1;
        }
        for i in 0..n {
            offsets[i + 1] += offsets[i];
        }
        let mut cursor = offsets[..n].to_vec();
        let mut heads = vec![0; edges.len()];
        for &(tail, head) in edges {
            heads[cursor[tail as usize]] = head;
            cursor[tail as usize] += 1;
        }
        Ok(Network {
            offsets,
            heads,
            in_degree,
            threshold: vec![0; n],
            initial_state: StateVector::zeros(n),
        })
    }

    /// Compressed-row constructor used by the ensemble samplers.
    pub(crate) fn from_csr(
        offsets: Vec<usize>,
        heads: Vec<NodeId>,
        thresholds: Vec<u32>,
        initial_state: StateVector,
    ) -> Result<Self> {
        let n = offsets.len() - 1;
        let mut in_degree = vec![0u32; n];
        for &h in &heads {
            if h as usize >= n {
                return Err(Error::NodeOutOfRange { id: h as usize, n });
            }
            in_degree[h as usize] += 1;
        }
        let topo = Network {
            offsets,
            heads,
            in_degree,
            threshold: vec![0; n],
            initial_state: StateVector::zeros(n),
        };
        topo.with_attributes(thresholds, initial_state)
    }

    /// Same topology with new thresholds and initial states.
    pub fn with_attributes(mut self, thresholds: Vec<u32>, initial_state: StateVector) -> Result<Self> {
        let n = self.node_count();
        self.check_thresholds(&thresholds)?;
        if initial_state.len() != n {
            return Err(Error::LengthMismatch {
                what: "initial states",
                expected: n,
                got: initial_state.len(),
            });
        }
        self.threshold = thresholds;
        self.initial_state = initial_state;
        Ok(self)
    }

    pub fn with_initial_state(&self, initial_state: StateVector) -> Result<Self> {
        self.clone().with_attributes(self.threshold.clone(), initial_state)
    }

    pub fn with_thresholds(&self, thresholds: Vec<u32>) -> Result<Self> {
        self.clone().with_attributes(thresholds, self.initial_state.clone())
    }

    /// Validates `0 <= rho_i <= kappa_i` for a candidate threshold vector.
    pub fn check_thresholds(&self, thresholds: &[u32]) -> Result<()> {
        let n = self.node_count();
        if thresholds.len() != n {
            return Err(Error::LengthMismatch {
                what: "thresholds",
                expected: n,
                got: thresholds.len(),
            });
        }
        for (i, &r) in thresholds.iter().enumerate() {
            let k = self.out_degree(i);
            if r > k {
                return Err(Error::ThresholdExceedsDegree {
                    node: i,
                    threshold: r,
                    out_degree: k,
                });
            }
        }
        Ok(())
    }

    pub fn node_count(&self) -> usize {
        self.in_degree.len()
    }

    /// Total number of links `l`.
    pub fn link_count(&self) -> usize {
        self.heads.len()
    }

    #[inline]
    pub fn out_neighbors(&self, i: usize) -> &[NodeId] {
        &self.heads[self.offsets[i]..self.offsets[i + 1]]
    }

    #[inline]
    pub fn out_degree(&self, i: usize) -> u32 {
        (self.offsets[i + 1] - self.offsets[i]) as u32
    }

    pub fn out_degrees(&self) -> Vec<u32> {
        self.offsets.windows(2).map(|w| (w[1] - w[0]) as u32).collect()
    }

    #[inline]
    pub fn in_degree(&self, i: usize) -> u32 {
        self.in_degree[i]
    }

    pub fn in_degrees(&self) -> &[u32] {
        &self.in_degree
    }

    #[inline]
    pub fn threshold(&self, i: usize) -> u32 {
        self.threshold[i]
    }

    pub fn thresholds(&self) -> &[u32] {
        &self.threshold
    }

    pub fn initial_state(&self) -> &StateVector {
        &self.initial_state
    }

    /// All links as `(tail, head)`, grouped by tail in node order.
    pub fn edges(&self) -> impl Iterator<Item = (NodeId, NodeId)> + '_ {
        (0..self.node_count())
            .flat_map(move |i| self.out_neighbors(i).iter().map(move |&h| (i as NodeId, h)))
    }

    /// Number of active out-neighbors of `i`, counted with multiplicity.
    pub fn neighbor_sum(&self, z: &StateVector, i: usize) -> Result<u32> {
        let n = self.node_count();
        if i >= n {
            return Err(Error::NodeOutOfRange { id: i, n });
        }
        if z.len() != n {
            return Err(Error::LengthMismatch {
                what: "state vector",
                expected: n,
                got: z.len(),
            });
        }
        Ok(self.active_count(z.as_bits(), i))
    }

    #[inline]
    pub(crate) fn active_count(&self, bits: &[u8], i: usize) -> u32 {
        self.out_neighbors(i)
            .iter()
            .map(|&j| bits[j as usize] as u32)
            .sum()
    }

    /// True when every link has a reciprocal link of the same multiplicity.
    pub fn is_symmetric(&self) -> bool {
        let mut fwd: Vec<(NodeId, NodeId)> = self.edges().collect();
        let mut bwd: Vec<(NodeId, NodeId)> = fwd.iter().map(|&(a, b)| (b, a)).collect();
        fwd.sort_unstable();
        bwd.sort_unstable();
        fwd == bwd
    }
}
