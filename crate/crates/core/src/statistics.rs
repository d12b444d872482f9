//! Network statistics `p_{d,k,r,s}` and the marginals fed to the recursion.
//!
//! `p_{d,k,r,s}` is the fraction of nodes with in-degree `d`, out-degree `k`,
//! threshold `r` and initial state `s`. The link-weighted marginals use
//! `q = d p / dbar`, i.e. the law of the node a uniformly chosen link points
//! to.

use std::collections::BTreeMap;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::graph::Network;
use crate::threshold::ThresholdCdf;
use crate::{Error, Result};

/// One cell of the joint law.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Cell {
    pub d: u32,
    pub k: u32,
    pub r: u32,
    pub s: u8,
}

impl Cell {
    pub fn new(d: u32, k: u32, r: u32, s: u8) -> Self {
        Cell { d, k, r, s }
    }
}

const SUM_TOL: f64 = 1e-9;
const INTEGRAL_TOL: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct NetworkStatistics {
    joint: BTreeMap<Cell, f64>,
    n: Option<u64>,
    mean_degree: f64,
    p_kr: BTreeMap<(u32, u32), f64>,
    q_kr: BTreeMap<(u32, u32), f64>,
    p_krs: BTreeMap<(u32, u32, u8), f64>,
    q_krs: BTreeMap<(u32, u32, u8), f64>,
    upsilon: f64,
    xi: f64,
    d_max: u32,
    k_max: u32,
}

impl NetworkStatistics {
    /// Validates and derives all marginals. Zero cells are dropped.
    pub fn from_joint(joint: BTreeMap<Cell, f64>, n: Option<u64>) -> Result<Self> {
        let joint: BTreeMap<Cell, f64> = joint.into_iter().filter(|&(_, p)| p != 0.0).collect();
        let mut total = 0.0;
        let (mut sum_d, mut sum_k) = (0.0, 0.0);
        for (c, &p) in &joint {
            if !(p > 0.0) || !p.is_finite() {
                return Err(Error::InvalidStatistics(format!("cell {c:?} has fraction {p}")));
            }
            if c.r > c.k {
                return Err(Error::InvalidStatistics(format!("cell {c:?} has r > k")));
            }
            if c.s > 1 {
                return Err(Error::InvalidStatistics(format!("cell {c:?} has s > 1")));
            }
            total += p;
            sum_d += c.d as f64 * p;
            sum_k += c.k as f64 * p;
        }
        if (total - 1.0).abs() > SUM_TOL {
            return Err(Error::InvalidStatistics(format!("fractions sum to {total}")));
        }
        if (sum_d - sum_k).abs() > SUM_TOL * sum_d.max(1.0) {
            return Err(Error::InvalidStatistics(format!(
                "mean in-degree {sum_d} differs from mean out-degree {sum_k}"
            )));
        }
        let mean_degree = sum_d;
        let mut stats = NetworkStatistics {
            joint: BTreeMap::new(),
            n,
            mean_degree,
            p_kr: BTreeMap::new(),
            q_kr: BTreeMap::new(),
            p_krs: BTreeMap::new(),
            q_krs: BTreeMap::new(),
            upsilon: 0.0,
            xi: 0.0,
            d_max: 0,
            k_max: 0,
        };
        for (c, &p) in &joint {
            *stats.p_kr.entry((c.k, c.r)).or_default() += p;
            *stats.p_krs.entry((c.k, c.r, c.s)).or_default() += p;
            if mean_degree > 0.0 && c.d > 0 {
                let q = c.d as f64 * p / mean_degree;
                *stats.q_kr.entry((c.k, c.r)).or_default() += q;
                *stats.q_krs.entry((c.k, c.r, c.s)).or_default() += q;
                if c.s == 1 {
                    stats.xi += q;
                }
            }
            if c.s == 1 {
                stats.upsilon += p;
            }
            stats.d_max = stats.d_max.max(c.d);
            stats.k_max = stats.k_max.max(c.k);
        }
        stats.joint = joint;
        Ok(stats)
    }

    /// Exact empirical statistics from cell counts.
    pub fn from_counts(counts: &BTreeMap<Cell, u64>) -> Result<Self> {
        let n: u64 = counts.values().sum();
        if n == 0 {
            return Err(Error::InvalidStatistics("no nodes".into()));
        }
        let joint = counts
            .iter()
            .map(|(&c, &m)| (c, m as f64 / n as f64))
            .collect();
        Self::from_joint(joint, Some(n))
    }

    pub fn joint(&self) -> &BTreeMap<Cell, f64> {
        &self.joint
    }

    pub fn n(&self) -> Option<u64> {
        self.n
    }

    pub fn mean_degree(&self) -> f64 {
        self.mean_degree
    }

    pub fn p_kr(&self) -> &BTreeMap<(u32, u32), f64> {
        &self.p_kr
    }

    pub fn q_kr(&self) -> &BTreeMap<(u32, u32), f64> {
        &self.q_kr
    }

    pub fn p_krs(&self) -> &BTreeMap<(u32, u32, u8), f64> {
        &self.p_krs
    }

    pub fn q_krs(&self) -> &BTreeMap<(u32, u32, u8), f64> {
        &self.q_krs
    }

    pub fn upsilon(&self) -> f64 {
        self.upsilon
    }

    pub fn xi(&self) -> f64 {
        self.xi
    }

    pub fn d_max(&self) -> u32 {
        self.d_max
    }

    pub fn k_max(&self) -> u32 {
        self.k_max
    }

    /// In-degree marginal `p_d`.
    pub fn in_degree_marginal(&self) -> BTreeMap<u32, f64> {
        let mut m = BTreeMap::new();
        for (c, &p) in &self.joint {
            *m.entry(c.d).or_default() += p;
        }
        m
    }

    /// Out-degree marginal `p_k`.
    pub fn out_degree_marginal(&self) -> BTreeMap<u32, f64> {
        let mut m = BTreeMap::new();
        for (c, &p) in &self.joint {
            *m.entry(c.k).or_default() += p;
        }
        m
    }

    /// Joint degree law `p_{d,k}`.
    pub fn degree_law(&self) -> DegreeLaw {
        let mut m = BTreeMap::new();
        for (c, &p) in &self.joint {
            *m.entry((c.d, c.k)).or_default() += p;
        }
        DegreeLaw(m)
    }

    /// True iff no seeded node has a positive threshold, i.e. the PLTM and
    /// LTM coincide on every network with these statistics.
    pub fn progressive_condition(&self) -> bool {
        self.joint.keys().all(|c| c.s == 0 || c.r == 0)
    }

    /// Integer cell counts for size `n`; errors unless compatible.
    pub fn counts(&self, n: u64) -> Result<BTreeMap<Cell, u64>> {
        let report = check_compatibility(self, n);
        if !report.compatible {
            return Err(Error::Incompatible {
                n,
                reason: report.describe(),
            });
        }
        Ok(self
            .joint
            .iter()
            .map(|(&c, &p)| (c, (p * n as f64).round() as u64))
            .collect())
    }
}

/// `d -> k -> r -> s -> p`, the on-disk layout.
type NestedJoint = BTreeMap<u32, BTreeMap<u32, BTreeMap<u32, BTreeMap<u8, f64>>>>;

#[derive(Serialize, Deserialize)]
struct StatisticsFile {
    #[serde(skip_serializing_if = "Option::is_none", default)]
    n: Option<u64>,
    joint: NestedJoint,
}

impl Serialize for NetworkStatistics {
    /// Nested sparse map `joint[d][k][r][s] = p`.
    fn serialize<S: Serializer>(&self, ser: S) -> std::result::Result<S::Ok, S::Error> {
        let mut joint: NestedJoint = BTreeMap::new();
        for (c, &p) in &self.joint {
            joint
                .entry(c.d)
                .or_default()
                .entry(c.k)
                .or_default()
                .entry(c.r)
                .or_default()
                .insert(c.s, p);
        }
        StatisticsFile { n: self.n, joint }.serialize(ser)
    }
}

impl<'de> Deserialize<'de> for NetworkStatistics {
    fn deserialize<D: Deserializer<'de>>(de: D) -> std::result::Result<Self, D::Error> {
        let file = StatisticsFile::deserialize(de)?;
        let mut joint = BTreeMap::new();
        for (d, ks) in file.joint {
            for (k, rs) in ks {
                for (r, ss) in rs {
                    for (s, p) in ss {
                        joint.insert(Cell::new(d, k, r, s), p);
                    }
                }
            }
        }
        NetworkStatistics::from_joint(joint, file.n).map_err(serde::de::Error::custom)
    }
}

/// Empirical statistics of a network.
pub fn extract(net: &Network) -> NetworkStatistics {
    let mut counts: BTreeMap<Cell, u64> = BTreeMap::new();
    let sigma = net.initial_state();
    for i in 0..net.node_count() {
        let c = Cell::new(net.in_degree(i), net.out_degree(i), net.threshold(i), sigma.get(i) as u8);
        *counts.entry(c).or_default() += 1;
    }
    NetworkStatistics::from_counts(&counts).expect("empirical counts are valid statistics")
}

/// Statistics of `net` with the step-`t` thresholds of `schedule`.
pub fn extract_at(net: &Network, schedule: &ThresholdSchedule, t: usize) -> Result<NetworkStatistics> {
    let net = net.with_thresholds(schedule.at(t).to_vec())?;
    Ok(extract(&net))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CompatibilityReport {
    pub n: u64,
    pub compatible: bool,
    /// Cells where `n p` is not an integer, with the offending product.
    pub non_integer_cells: Vec<(Cell, f64)>,
    /// `sum d n p - sum k n p`.
    pub balance_gap: f64,
}

impl CompatibilityReport {
    pub fn describe(&self) -> String {
        let mut parts = Vec::new();
        if let Some((c, v)) = self.non_integer_cells.first() {
            parts.push(format!(
                "{} non-integer cell(s), first {c:?} with n*p = {v}",
                self.non_integer_cells.len()
            ));
        }
        if self.balance_gap.abs() > INTEGRAL_TOL {
            parts.push(format!("in/out link totals differ by {}", self.balance_gap));
        }
        parts.join("; ")
    }
}

/// Integrality of `n p` in every cell and in/out link balance.
pub fn check_compatibility(stats: &NetworkStatistics, n: u64) -> CompatibilityReport {
    let nf = n as f64;
    let mut non_integer_cells = Vec::new();
    let mut gap = 0.0;
    for (&c, &p) in stats.joint() {
        let v = p * nf;
        let m = v.round();
        if (v - m).abs() > INTEGRAL_TOL {
            non_integer_cells.push((c, v));
        }
        gap += (c.d as f64 - c.k as f64) * m;
    }
    let compatible = non_integer_cells.is_empty() && gap.abs() <= INTEGRAL_TOL;
    CompatibilityReport {
        n,
        compatible,
        non_integer_cells,
        balance_gap: gap,
    }
}

/// Joint in/out degree law `p_{d,k}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DegreeLaw(pub BTreeMap<(u32, u32), f64>);

impl DegreeLaw {
    /// In- and out-degrees drawn independently from the same law `p_k`,
    /// which keeps the in/out balance.
    pub fn independent_symmetric(p_k: &BTreeMap<u32, f64>) -> Self {
        let mut m = BTreeMap::new();
        for (&d, &pd) in p_k {
            for (&k, &pk) in p_k {
                m.insert((d, k), pd * pk);
            }
        }
        DegreeLaw(m)
    }

    pub fn regular(k: u32) -> Self {
        DegreeLaw(BTreeMap::from([((k, k), 1.0)]))
    }
}

/// Largest-remainder apportionment of `total` over `weights`; ties go to the
/// earlier index.
pub fn apportion(total: u64, weights: &[f64]) -> Vec<u64> {
    let sum: f64 = weights.iter().sum();
    if weights.is_empty() || sum <= 0.0 {
        return vec![0; weights.len()];
    }
    let quotas: Vec<f64> = weights.iter().map(|w| w / sum * total as f64).collect();
    let mut counts: Vec<u64> = quotas.iter().map(|q| q.floor() as u64).collect();
    let assigned: u64 = counts.iter().sum();
    let mut order: Vec<usize> = (0..weights.len()).collect();
    order.sort_by(|&a, &b| {
        let ra = quotas[a] - quotas[a].floor();
        let rb = quotas[b] - quotas[b].floor();
        rb.partial_cmp(&ra).unwrap().then(a.cmp(&b))
    });
    for &i in order.iter().take(total.saturating_sub(assigned) as usize) {
        counts[i] += 1;
    }
    counts
}

/// Builds n-compatible statistics `p_{d,k} (F(r/k) - F((r-1)/k)) (upsilon
/// 1{s=1} + (1-upsilon) 1{s=0})`.
///
/// Counts are apportioned first over `(d, k)`, then within each `(d, k)`
/// group over `(r, s)`, so the in/out link balance depends only on the
/// degree law at size `n`.
pub fn synthesize(cdf: &ThresholdCdf, degrees: &DegreeLaw, upsilon: f64, n: u64) -> Result<NetworkStatistics> {
    let dk: Vec<(u32, u32)> = degrees.0.keys().copied().collect();
    let dk_counts = apportion(n, &degrees.0.values().copied().collect::<Vec<_>>());
    let gap: i64 = dk
        .iter()
        .zip(&dk_counts)
        .map(|((d, k), &m)| (*d as i64 - *k as i64) * m as i64)
        .sum();
    if gap != 0 {
        return Err(Error::Incompatible {
            n,
            reason: format!("degree law rounds to unbalanced link totals (gap {gap})"),
        });
    }
    synthesize_with(dk.into_iter().zip(dk_counts).collect(), upsilon, |k| {
        (0..=k).map(|r| (r, cdf.threshold_mass(k, r))).collect()
    })
}

/// Population given as `(weight, k, r)` triples. In-degrees follow the
/// out-degree marginal, independently of `(k, r, s)`.
///
/// The out-degree counts are apportioned once and reused as in-degree
/// counts, so link totals balance at every `n`.
pub fn synthesize_mixture(mix: &[(f64, u32, u32)], upsilon: f64, n: u64) -> Result<NetworkStatistics> {
    let mut p_k: BTreeMap<u32, f64> = BTreeMap::new();
    for &(w, k, r) in mix {
        if r > k || !(w >= 0.0) {
            return Err(Error::InvalidArgument(format!("bad mixture term {w}:{k}:{r}")));
        }
        *p_k.entry(k).or_default() += w;
    }
    let total: f64 = p_k.values().sum();
    if (total - 1.0).abs() > SUM_TOL {
        return Err(Error::InvalidArgument(format!("mixture weights sum to {total}")));
    }
    let ks: Vec<u32> = p_k.keys().copied().collect();
    let m_k = apportion(n, &p_k.values().copied().collect::<Vec<_>>());
    synthesize_with(independent_pairs(&ks, &m_k), upsilon, |k| {
        mix.iter()
            .filter(|m| m.1 == k)
            .map(|m| (m.2, m.0 / p_k[&k]))
            .collect()
    })
}

/// `(d, k)` counts with both margins equal to `m` and near-product interior:
/// nodes grouped by `k` take in-degree labels from a low-discrepancy
/// ordering of the same multiset.
fn independent_pairs(labels: &[u32], m: &[u64]) -> Vec<((u32, u32), u64)> {
    let mut seq: Vec<(f64, usize)> = Vec::new();
    for (c, &mc) in m.iter().enumerate() {
        seq.extend((0..mc).map(|j| ((j as f64 + 0.5) / mc as f64, c)));
    }
    seq.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    let mut table: BTreeMap<(u32, u32), u64> = BTreeMap::new();
    let mut pos = 0;
    for (ck, &mk) in m.iter().enumerate() {
        for &(_, cd) in &seq[pos..pos + mk as usize] {
            *table.entry((labels[cd], labels[ck])).or_default() += 1;
        }
        pos += mk as usize;
    }
    table.into_iter().collect()
}

/// Shared rounding scheme: `(d, k)` group sizes are given, and each group
/// is apportioned over `(r, s)`. `rule(k)` lists `(r, P(r | k))`.
fn synthesize_with(
    dk_counts: Vec<((u32, u32), u64)>,
    upsilon: f64,
    rule: impl Fn(u32) -> Vec<(u32, f64)>,
) -> Result<NetworkStatistics> {
    if !(0.0..=1.0).contains(&upsilon) {
        return Err(Error::InvalidArgument(format!("upsilon {upsilon} outside [0, 1]")));
    }
    let mut counts = BTreeMap::new();
    for ((d, k), m) in dk_counts {
        if m == 0 {
            continue;
        }
        let mut cells = Vec::new();
        let mut weights = Vec::new();
        for (r, w) in rule(k) {
            if w == 0.0 {
                continue;
            }
            for (s, ws) in [(0u8, 1.0 - upsilon), (1u8, upsilon)] {
                if ws > 0.0 {
                    cells.push(Cell::new(d, k, r, s));
                    weights.push(w * ws);
                }
            }
        }
        for (c, cnt) in cells.into_iter().zip(apportion(m, &weights)) {
            if cnt > 0 {
                counts.insert(c, cnt);
            }
        }
    }
    NetworkStatistics::from_counts(&counts)
}

/// Statistics expected after assigning `cdf` thresholds and a seed fraction
/// `upsilon` independently of the topology: `p_{d,k} P(r | k) P(s)`.
pub fn expected_assignment(topology: &Network, cdf: &ThresholdCdf, upsilon: f64) -> Result<NetworkStatistics> {
    let n = topology.node_count() as f64;
    let mut dk: BTreeMap<(u32, u32), f64> = BTreeMap::new();
    for i in 0..topology.node_count() {
        *dk.entry((topology.in_degree(i), topology.out_degree(i))).or_default() += 1.0 / n;
    }
    let mut joint = BTreeMap::new();
    for (&(d, k), &p) in &dk {
        for r in 0..=k {
            let w = cdf.threshold_mass(k, r);
            for (s, ws) in [(0u8, 1.0 - upsilon), (1u8, upsilon)] {
                if w * ws > 0.0 {
                    joint.insert(Cell::new(d, k, r, s), p * w * ws);
                }
            }
        }
    }
    NetworkStatistics::from_joint(joint, None)
}

/// Progressive seeding: a fraction `xi` of each `(d, k, r)` class starts
/// active with threshold 0, the rest keep their threshold and start
/// inactive. `base` supplies `pbar_{d,k,r}` (its states are summed out).
pub fn seed_progressive(base: &NetworkStatistics, xi: f64) -> Result<NetworkStatistics> {
    let mut joint: BTreeMap<Cell, f64> = BTreeMap::new();
    for (c, &p) in base.joint() {
        if xi > 0.0 {
            *joint.entry(Cell::new(c.d, c.k, 0, 1)).or_default() += xi * p;
        }
        if xi < 1.0 {
            *joint.entry(Cell::new(c.d, c.k, c.r, 0)).or_default() += (1.0 - xi) * p;
        }
    }
    NetworkStatistics::from_joint(joint, None)
}

/// Statistics `u_{k,r,s}` of an undirected network (degree `k`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UndirectedStatistics {
    joint: BTreeMap<(u32, u32, u8), f64>,
    mean_degree: f64,
}

impl UndirectedStatistics {
    pub fn from_joint(joint: BTreeMap<(u32, u32, u8), f64>) -> Result<Self> {
        let joint: BTreeMap<_, _> = joint.into_iter().filter(|&(_, p)| p != 0.0).collect();
        let mut total = 0.0;
        let mut mean = 0.0;
        for (&(k, r, s), &p) in &joint {
            if !(p > 0.0) || r > k || s > 1 {
                return Err(Error::InvalidStatistics(format!("bad cell ({k}, {r}, {s}) = {p}")));
            }
            total += p;
            mean += k as f64 * p;
        }
        if (total - 1.0).abs() > SUM_TOL {
            return Err(Error::InvalidStatistics(format!("fractions sum to {total}")));
        }
        Ok(UndirectedStatistics {
            joint,
            mean_degree: mean,
        })
    }

    pub fn joint(&self) -> &BTreeMap<(u32, u32, u8), f64> {
        &self.joint
    }

    pub fn mean_degree(&self) -> f64 {
        self.mean_degree
    }

    /// Integer counts for size `n`; requires integral cells and an even
    /// number of stubs.
    pub fn counts(&self, n: u64) -> Result<BTreeMap<(u32, u32, u8), u64>> {
        let mut counts = BTreeMap::new();
        let mut stubs = 0u64;
        for (&key, &p) in &self.joint {
            let v = p * n as f64;
            let m = v.round();
            if (v - m).abs() > INTEGRAL_TOL {
                return Err(Error::Incompatible {
                    n,
                    reason: format!("n*u{key:?} = {v} is not an integer"),
                });
            }
            stubs += key.0 as u64 * m as u64;
            counts.insert(key, m as u64);
        }
        if stubs % 2 == 1 {
            return Err(Error::Incompatible {
                n,
                reason: format!("odd stub total {stubs}"),
            });
        }
        Ok(counts)
    }

    /// The directed statistics `p_{k,k,r,s} = u_{k,r,s}` of the symmetric
    /// network.
    pub fn to_directed(&self) -> Result<NetworkStatistics> {
        let joint = self
            .joint
            .iter()
            .map(|(&(k, r, s), &p)| (Cell::new(k, k, r, s), p))
            .collect();
        NetworkStatistics::from_joint(joint, None)
    }
}

/// Undirected statistics of a symmetric network (degree = out-degree).
pub fn extract_undirected(net: &Network) -> Result<UndirectedStatistics> {
    if !net.is_symmetric() {
        return Err(Error::InvalidArgument("network is not symmetric".into()));
    }
    let n = net.node_count() as f64;
    let mut joint: BTreeMap<(u32, u32, u8), f64> = BTreeMap::new();
    for i in 0..net.node_count() {
        let key = (net.out_degree(i), net.threshold(i), net.initial_state().get(i) as u8);
        *joint.entry(key).or_default() += 1.0;
    }
    for v in joint.values_mut() {
        *v /= n;
    }
    UndirectedStatistics::from_joint(joint)
}

/// Step-dependent thresholds: phase `(start, rho)` applies from `start`
/// until the next phase begins.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdSchedule {
    phases: Vec<(usize, Vec<u32>)>,
}

impl ThresholdSchedule {
    pub fn constant(thresholds: Vec<u32>) -> Self {
        ThresholdSchedule {
            phases: vec![(0, thresholds)],
        }
    }

    pub fn piecewise(mut phases: Vec<(usize, Vec<u32>)>) -> Result<Self> {
        phases.sort_by_key(|p| p.0);
        if phases.first().map(|p| p.0) != Some(0) {
            return Err(Error::InvalidArgument("schedule must start at t = 0".into()));
        }
        if phases.windows(2).any(|w| w[0].0 == w[1].0) {
            return Err(Error::InvalidArgument("duplicate phase start".into()));
        }
        let n = phases[0].1.len();
        if phases.iter().any(|p| p.1.len() != n) {
            return Err(Error::InvalidArgument("phases of different lengths".into()));
        }
        Ok(ThresholdSchedule { phases })
    }

    /// Dense schedule from a rule `rho_i(t)`, for `t < horizon`; the last
    /// step's thresholds persist afterwards.
    pub fn from_fn(n: usize, horizon: usize, rule: impl Fn(usize, usize) -> u32) -> Self {
        let mut phases: Vec<(usize, Vec<u32>)> = Vec::new();
        for t in 0..horizon.max(1) {
            let rho: Vec<u32> = (0..n).map(|i| rule(t, i)).collect();
            if phases.last().map(|p| &p.1) != Some(&rho) {
                phases.push((t, rho));
            }
        }
        ThresholdSchedule { phases }
    }

    pub fn at(&self, t: usize) -> &[u32] {
        let idx = self.phases.partition_point(|p| p.0 <= t) - 1;
        &self.phases[idx].1
    }

    /// Start of the last phase; thresholds are constant from here on.
    pub fn last_change(&self) -> usize {
        self.phases.last().map_or(0, |p| p.0)
    }

    /// `0 <= rho_i(t) <= kappa_i` for every phase active at some `t < horizon`.
    pub fn validate(&self, net: &Network, horizon: usize) -> Result<()> {
        for (start, rho) in &self.phases {
            if *start == 0 || *start < horizon {
                net.check_thresholds(rho)?;
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::StateVector;
    use crate::threshold::Fraction;

    fn two_cycle() -> Network {
        Network::build(&[(0, 1), (1, 0)], vec![1, 1], StateVector::from_bools(&[true, false])).unwrap()
    }

    #[test]
    fn extract_two_cycle() {
        let s = extract(&two_cycle());
        assert_eq!(s.joint().get(&Cell::new(1, 1, 1, 1)), Some(&0.5));
        assert_eq!(s.joint().get(&Cell::new(1, 1, 1, 0)), Some(&0.5));
        assert_eq!(s.mean_degree(), 1.0);
        assert_eq!(s.upsilon(), 0.5);
        assert_eq!(s.xi(), 0.5);
        assert_eq!(s.n(), Some(2));
        assert!(check_compatibility(&s, 2).compatible);
    }

    #[test]
    fn constant_in_degree_gives_q_equal_p() {
        // every node has in-degree 2
        let edges = [(0, 1), (0, 2), (1, 2), (1, 0), (2, 0), (2, 1)];
        let net = Network::build(&edges, vec![0, 1, 2], StateVector::zeros(3)).unwrap();
        let s = extract(&net);
        assert_eq!(s.p_kr(), s.q_kr());
    }

    #[test]
    fn compatibility_reports_fractional_cells() {
        let joint = BTreeMap::from([(Cell::new(1, 1, 1, 1), 1.0 / 3.0), (Cell::new(1, 1, 0, 0), 2.0 / 3.0)]);
        let s = NetworkStatistics::from_joint(joint, None).unwrap();
        let rep = check_compatibility(&s, 10);
        assert!(!rep.compatible);
        assert_eq!(rep.non_integer_cells.len(), 2);
        assert!(s.counts(10).is_err());
        assert!(s.counts(9).is_ok());
    }

    #[test]
    fn homogeneous_design_is_compatible() {
        let cdf = ThresholdCdf::step(Fraction::new(3, 7).unwrap());
        let s = synthesize(&cdf, &DegreeLaw::regular(7), 0.25, 2000).unwrap();
        assert!(check_compatibility(&s, 2000).compatible);
        assert_eq!(s.k_max(), 7);
        assert_eq!(s.upsilon(), 0.25);
    }

    #[test]
    fn synthesize_step_at_half() {
        let cdf = ThresholdCdf::step(Fraction::new(1, 2).unwrap());
        let s = synthesize(&cdf, &DegreeLaw::regular(7), 0.3, 100).unwrap();
        assert!(s.joint().keys().all(|c| c.d == 7 && c.k == 7 && c.r == 4));
        let none = synthesize(&cdf, &DegreeLaw::regular(7), 0.0, 100).unwrap();
        assert!(none.joint().keys().all(|c| c.s == 0));
        assert_eq!(none.xi(), 0.0);
    }

    #[test]
    fn synthesize_rejects_unbalanced_law() {
        let law = DegreeLaw(BTreeMap::from([((1, 2), 1.0)]));
        let cdf = ThresholdCdf::step(Fraction::new(1, 2).unwrap());
        assert!(synthesize(&cdf, &law, 0.5, 10).is_err());
    }

    #[test]
    fn independent_states_give_xi_equal_upsilon() {
        let p_k = BTreeMap::from([(11, 0.55), (14, 0.45)]);
        let cdf: ThresholdCdf = "0.4@1/4,0.6@3/4".parse().unwrap();
        let s = synthesize(&cdf, &DegreeLaw::independent_symmetric(&p_k), 0.5, 4000).unwrap();
        assert!((s.xi() - s.upsilon()).abs() < 1e-3);
    }

    #[test]
    fn mixture_design_counts() {
        let s = synthesize_mixture(&[(0.45, 14, 3), (0.55, 11, 9)], 0.5, 2000).unwrap();
        let law = s.degree_law();
        let m = |d, k| (law.0[&(d, k)] * 2000.0).round() as u64;
        assert_eq!((m(14, 14), m(14, 11), m(11, 14), m(11, 11)), (405, 495, 495, 605));
        assert!((s.xi() - s.upsilon()).abs() < 1e-3);
        for (key, p) in s.p_kr() {
            assert!((p - s.q_kr()[key]).abs() < 1e-12);
        }
        assert!(synthesize_mixture(&[(0.5, 3, 1)], 0.5, 10).is_err());
    }

    #[test]
    fn expected_assignment_is_topology_times_law() {
        let net = Network::topology(3, &[(0, 1), (1, 2), (2, 0), (0, 2)]).unwrap();
        let cdf: ThresholdCdf = "0.5@0,0.5@1".parse().unwrap();
        let s = expected_assignment(&net, &cdf, 0.25).unwrap();
        assert!((s.upsilon() - 0.25).abs() < 1e-15);
        assert!((s.xi() - 0.25).abs() < 1e-15);
        // node 0 has k = 2: r = 0 or 2 with probability 1/2 each
        assert!((s.p_kr()[&(2, 2)] - 1.0 / 6.0).abs() < 1e-15);
    }

    #[test]
    fn apportion_hits_total() {
        assert_eq!(apportion(10, &[1.0, 1.0, 1.0]), vec![4, 3, 3]);
        assert_eq!(apportion(7, &[0.5, 0.5]).iter().sum::<u64>(), 7);
        assert_eq!(apportion(0, &[0.2, 0.8]), vec![0, 0]);
    }

    #[test]
    fn progressive_condition() {
        let net = two_cycle();
        assert!(!extract(&net).progressive_condition());
        let reduced = crate::dynamics::pltm_as_ltm(&net);
        assert!(extract(&reduced).progressive_condition());
    }

    #[test]
    fn json_round_trip() {
        let s = extract(&two_cycle());
        let text = serde_json::to_string(&s).unwrap();
        assert!(text.contains("\"joint\":{\"1\":{\"1\":{\"1\":{\"0\":0.5,\"1\":0.5}}}}"));
        let back: NetworkStatistics = serde_json::from_str(&text).unwrap();
        assert_eq!(back, s);
    }

    #[test]
    fn undirected_counts_require_even_stubs() {
        let u = UndirectedStatistics::from_joint(BTreeMap::from([((1, 0, 0), 1.0)])).unwrap();
        assert!(u.counts(2).is_ok());
        assert!(u.counts(3).is_err());
    }

    #[test]
    fn schedule_lookup() {
        let s = ThresholdSchedule::piecewise(vec![(3, vec![0]), (0, vec![1])]).unwrap();
        assert_eq!(s.at(0), &[1]);
        assert_eq!(s.at(2), &[1]);
        assert_eq!(s.at(3), &[0]);
        assert_eq!(s.at(100), &[0]);
        assert_eq!(s.last_change(), 3);
        let dense = ThresholdSchedule::from_fn(1, 6, |t, _| if t < 4 { 1 } else { 0 });
        assert_eq!(dense, ThresholdSchedule::piecewise(vec![(0, vec![1]), (4, vec![0])]).unwrap());
    }

    #[test]
    fn extract_at_uses_scheduled_thresholds() {
        let net = two_cycle();
        let sched = ThresholdSchedule::piecewise(vec![(0, vec![1, 1]), (2, vec![0, 0])]).unwrap();
        let s = extract_at(&net, &sched, 2).unwrap();
        assert!(s.joint().keys().all(|c| c.r == 0));
    }

    proptest::proptest! {
        #[test]
        fn mixtures_balance_at_every_size(n in 1u64..3000, w in 0.01f64..0.99, k1 in 1u32..20, k2 in 1u32..20) {
            let s = synthesize_mixture(&[(w, k1, 1), (1.0 - w, k2, k2)], 0.3, n).unwrap();
            let c = s.counts(n).unwrap();
            let (ins, outs) = c.iter().fold((0, 0), |(a, b), (cell, m)| (a + cell.d as u64 * m, b + cell.k as u64 * m));
            proptest::prop_assert_eq!(ins, outs);
            proptest::prop_assert_eq!(c.values().sum::<u64>(), n);
        }
    }
}
