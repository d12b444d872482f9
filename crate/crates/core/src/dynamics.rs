//! Exact synchronous LTM / PLTM dynamics.
//!
//! One step reads only the previous state buffer and writes the next one, so
//! the node sweep is embarrassingly parallel. Runs stop early at a fixed
//! point or at a period-2 cycle, detected by comparing full state vectors.

use serde::{Deserialize, Serialize};

use crate::graph::{Network, StateVector};
use crate::statistics::ThresholdSchedule;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    #[default]
    Ltm,
    Pltm,
}

impl std::str::FromStr for Mode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ltm" => Ok(Mode::Ltm),
            "pltm" => Ok(Mode::Pltm),
            _ => Err(Error::InvalidArgument(format!("unknown mode {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Convergence {
    /// `Z(at + 1) == Z(at)`.
    FixedPoint { at: usize },
    /// `Z(at + 2) == Z(at) != Z(at + 1)`.
    Cycle2 { at: usize },
    /// Neither seen by the horizon.
    Horizon,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryRecord {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub states: Option<Vec<StateVector>>,
    /// Fraction of state-1 nodes, `z[t]` for `t = 0..=last_time()`.
    pub z: Vec<f64>,
    /// In-degree weighted fraction `(1/l) sum_i delta_i Z_i(t)`.
    pub a: Vec<f64>,
    pub horizon: usize,
    pub convergence: Convergence,
}

impl TrajectoryRecord {
    /// Last explicitly computed time step.
    pub fn last_time(&self) -> usize {
        self.z.len() - 1
    }

    fn index_at(&self, t: usize) -> usize {
        let last = self.last_time();
        if t <= last {
            return t;
        }
        match self.convergence {
            Convergence::FixedPoint { .. } | Convergence::Horizon => last,
            Convergence::Cycle2 { at } => at + (t - at) % 2,
        }
    }

    /// `z(t)` for any `t`, extended past early termination.
    pub fn z_at(&self, t: usize) -> f64 {
        self.z[self.index_at(t)]
    }

    pub fn a_at(&self, t: usize) -> f64 {
        self.a[self.index_at(t)]
    }

    /// `Z(t)` when states were recorded.
    pub fn state_at(&self, t: usize) -> Option<&StateVector> {
        self.states.as_ref().map(|s| &s[self.index_at(t)])
    }

    pub fn final_z(&self) -> f64 {
        self.z_at(self.horizon)
    }

    pub fn final_a(&self) -> f64 {
        self.a_at(self.horizon)
    }

    /// Settling value of `z`: the mean of the two cycle values when a
    /// period-2 cycle was detected, otherwise `z(T)`.
    pub fn settling_z(&self) -> f64 {
        match self.convergence {
            Convergence::Cycle2 { at } => 0.5 * (self.z[at] + self.z[at + 1]),
            _ => self.final_z(),
        }
    }

    pub fn settling_a(&self) -> f64 {
        match self.convergence {
            Convergence::Cycle2 { at } => 0.5 * (self.a[at] + self.a[at + 1]),
            _ => self.final_a(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunOptions {
    pub mode: Mode,
    pub horizon: usize,
    pub record_states: bool,
    /// Keep nodes with out-degree 0 at their initial state instead of
    /// letting the empty sum `0 >= 0` switch them on.
    pub freeze_zero_out_degree: bool,
}

impl RunOptions {
    pub fn new(mode: Mode, horizon: usize) -> Self {
        RunOptions {
            mode,
            horizon,
            record_states: false,
            freeze_zero_out_degree: false,
        }
    }
}

#[cfg(feature = "parallel")]
const PARALLEL_MIN_NODES: usize = 1 << 15;

struct StepRule<'a> {
    net: &'a Network,
    mode: Mode,
    freeze: bool,
}

impl StepRule<'_> {
    #[inline]
    fn node(&self, thresholds: &[u32], cur: &[u8], i: usize) -> u8 {
        if self.freeze && self.net.out_degree(i) == 0 {
            return self.net.initial_state().as_bits()[i];
        }
        let rho = match self.mode {
            Mode::Ltm => thresholds[i],
            Mode::Pltm if cur[i] == 1 => 0,
            Mode::Pltm => thresholds[i],
        };
        (self.net.active_count(cur, i) >= rho) as u8
    }

    fn apply(&self, thresholds: &[u32], cur: &[u8], next: &mut [u8]) {
        #[cfg(feature = "parallel")]
        if next.len() >= PARALLEL_MIN_NODES {
            use rayon::prelude::*;
            const CHUNK: usize = 4096;
            next.par_chunks_mut(CHUNK).enumerate().for_each(|(c, out)| {
                let base = c * CHUNK;
                for (off, slot) in out.iter_mut().enumerate() {
                    *slot = self.node(thresholds, cur, base + off);
                }
            });
            return;
        }
        for (i, slot) in next.iter_mut().enumerate() {
            *slot = self.node(thresholds, cur, i);
        }
    }
}

fn step(net: &Network, z: &StateVector, mode: Mode) -> StateVector {
    assert_eq!(z.len(), net.node_count(), "state length must equal node count");
    let mut next = StateVector::zeros(z.len());
    StepRule {
        net,
        mode,
        freeze: false,
    }
    .apply(net.thresholds(), z.as_bits(), next.bits_mut());
    next
}

/// One LTM step: `Z_i' = 1` iff at least `rho_i` out-neighbors are active.
///
/// Panics if `z` has the wrong length.
pub fn ltm_step(net: &Network, z: &StateVector) -> StateVector {
    step(net, z, Mode::Ltm)
}

/// One PLTM step: active nodes stay active, inactive ones follow the LTM rule.
pub fn pltm_step(net: &Network, z: &StateVector) -> StateVector {
    step(net, z, Mode::Pltm)
}

/// Copy of `net` with thresholds `(1 - sigma_i) rho_i`; LTM on the result
/// reproduces PLTM on `net`.
pub fn pltm_as_ltm(net: &Network) -> Network {
    let sigma = net.initial_state();
    let rho = net
        .thresholds()
        .iter()
        .enumerate()
        .map(|(i, &r)| if sigma.get(i) { 0 } else { r })
        .collect();
    net.with_thresholds(rho).expect("lowering thresholds keeps them valid")
}

struct Fractions {
    n: f64,
    l: f64,
}

impl Fractions {
    fn new(net: &Network) -> Self {
        Fractions {
            n: net.node_count() as f64,
            l: net.link_count() as f64,
        }
    }

    fn z(&self, bits: &[u8]) -> f64 {
        if self.n == 0.0 {
            return 0.0;
        }
        bits.iter().map(|&b| b as u64).sum::<u64>() as f64 / self.n
    }

    fn a(&self, net: &Network, bits: &[u8]) -> f64 {
        if self.l == 0.0 {
            return 0.0;
        }
        let s: u64 = bits
            .iter()
            .zip(net.in_degrees())
            .map(|(&b, &d)| b as u64 * d as u64)
            .sum();
        s as f64 / self.l
    }
}

fn simulate<'s>(
    net: &Network,
    opts: RunOptions,
    thresholds_at: impl Fn(usize) -> &'s [u32],
    stable_from: usize,
) -> TrajectoryRecord {
    let rule = StepRule {
        net,
        mode: opts.mode,
        freeze: opts.freeze_zero_out_degree,
    };
    let frac = Fractions::new(net);
    let mut cur = net.initial_state().as_bits().to_vec();
    let mut next = vec![0u8; cur.len()];
    let mut prev: Option<Vec<u8>> = None;
    let mut z = vec![frac.z(&cur)];
    let mut a = vec![frac.a(net, &cur)];
    let mut states = opts.record_states.then(|| vec![net.initial_state().clone()]);
    let mut convergence = Convergence::Horizon;

    for t in 0..opts.horizon {
        rule.apply(thresholds_at(t), &cur, &mut next);
        if t >= stable_from {
            if next == cur {
                convergence = Convergence::FixedPoint { at: t };
                break;
            }
            if t > stable_from && prev.as_deref() == Some(&next[..]) {
                convergence = Convergence::Cycle2 { at: t - 1 };
                break;
            }
        }
        z.push(frac.z(&next));
        a.push(frac.a(net, &next));
        if let Some(s) = states.as_mut() {
            s.push(StateVector::from_bits(next.clone()).expect("binary"));
        }
        let recycled = prev.take().unwrap_or_else(|| vec![0u8; cur.len()]);
        prev = Some(std::mem::replace(&mut cur, std::mem::replace(&mut next, recycled)));
    }

    TrajectoryRecord {
        states,
        z,
        a,
        horizon: opts.horizon,
        convergence,
    }
}

/// Iterates the chosen step map up to `opts.horizon`, recording `z(t)` and
/// `a(t)`, and stops at the first fixed point or period-2 cycle.
pub fn run(net: &Network, opts: RunOptions) -> TrajectoryRecord {
    simulate(net, opts, |_| net.thresholds(), 0)
}

/// LTM with step-dependent thresholds: `Z(t+1)` uses `rho(t)`.
pub fn run_time_varying(
    net: &Network,
    schedule: &ThresholdSchedule,
    horizon: usize,
) -> Result<TrajectoryRecord> {
    schedule.validate(net, horizon)?;
    Ok(simulate(
        net,
        RunOptions::new(Mode::Ltm, horizon),
        |t| schedule.at(t),
        schedule.last_change(),
    ))
}

/// Checks that `tree` stores an undirected tree: reciprocal links, no
/// self-loops, `n - 1` undirected edges, connected.
pub fn validate_undirected_tree(tree: &Network) -> Result<()> {
    let n = tree.node_count();
    if n == 0 {
        return Err(Error::NotATree("empty network".into()));
    }
    if tree.link_count() != 2 * (n - 1) {
        return Err(Error::NotATree(format!(
            "{} directed links, expected {}",
            tree.link_count(),
            2 * (n - 1)
        )));
    }
    if tree.edges().any(|(a, b)| a == b) {
        return Err(Error::NotATree("self-loop".into()));
    }
    if !tree.is_symmetric() {
        return Err(Error::NotATree("link without reciprocal".into()));
    }
    let mut seen = vec![false; n];
    let mut stack = vec![0usize];
    seen[0] = true;
    let mut reached = 1;
    while let Some(v) = stack.pop() {
        for &w in tree.out_neighbors(v) {
            if !seen[w as usize] {
                seen[w as usize] = true;
                reached += 1;
                stack.push(w as usize);
            }
        }
    }
    if reached != n {
        return Err(Error::NotATree("disconnected".into()));
    }
    Ok(())
}

/// Root states `Z_root(0..=horizon)` of the PLTM run on the undirected tree.
pub fn pltm_root_on_undirected_tree(tree: &Network, root: usize, horizon: usize) -> Result<Vec<bool>> {
    validate_undirected_tree(tree)?;
    if root >= tree.node_count() {
        return Err(Error::NodeOutOfRange {
            id: root,
            n: tree.node_count(),
        });
    }
    let mut z = tree.initial_state().clone();
    let mut out = Vec::with_capacity(horizon + 1);
    out.push(z.get(root));
    for _ in 0..horizon {
        z = pltm_step(tree, &z);
        out.push(z.get(root));
    }
    Ok(out)
}

/// Root states of the PLTM on the orientation of `tree` away from `root`.
///
/// In the oriented tree a node has one neighbor fewer than in the undirected
/// one, so thresholds may exceed the oriented out-degree; such nodes only
/// ever hold their initial state. The evaluation therefore works on child
/// lists rather than on a [`Network`].
pub fn pltm_root_on_rooted_tree(tree: &Network, root: usize, horizon: usize) -> Result<Vec<bool>> {
    validate_undirected_tree(tree)?;
    let n = tree.node_count();
    if root >= n {
        return Err(Error::NodeOutOfRange { id: root, n });
    }
    let mut children: Vec<Vec<usize>> = vec![Vec::new(); n];
    let mut seen = vec![false; n];
    let mut queue = std::collections::VecDeque::from([root]);
    seen[root] = true;
    while let Some(v) = queue.pop_front() {
        for &w in tree.out_neighbors(v) {
            let w = w as usize;
            if !seen[w] {
                seen[w] = true;
                children[v].push(w);
                queue.push_back(w);
            }
        }
    }
    let rho = tree.thresholds();
    let mut cur: Vec<bool> = (0..n).map(|i| tree.initial_state().get(i)).collect();
    let mut out = vec![cur[root]];
    for _ in 0..horizon {
        let next: Vec<bool> = (0..n)
            .map(|i| cur[i] || children[i].iter().filter(|&&c| cur[c]).count() as u32 >= rho[i])
            .collect();
        cur = next;
        out.push(cur[root]);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;
    use rand::Rng;

    fn sv(bits: &[u8]) -> StateVector {
        StateVector::from_bits(bits.to_vec()).unwrap()
    }

    fn complete_with_loops(n: usize) -> Vec<(u32, u32)> {
        (0..n as u32).flat_map(|i| (0..n as u32).map(move |j| (i, j))).collect()
    }

    #[test]
    fn ltm_step_on_complete_graph() {
        // rho = ceil(4 * theta) for theta = [.25, .25, .75, .75] -> [1, 1, 3, 3]
        let net = Network::build(&complete_with_loops(4), vec![1, 1, 3, 3], sv(&[1, 1, 0, 0])).unwrap();
        assert_eq!(ltm_step(&net, &sv(&[1, 1, 0, 0])), sv(&[1, 1, 0, 0]));
    }

    #[test]
    fn all_ones_is_fixed_and_zero_thresholds_activate() {
        let net = Network::build(&[(0, 1), (1, 2), (2, 0), (0, 2)], vec![2, 1, 0], StateVector::zeros(3)).unwrap();
        assert_eq!(ltm_step(&net, &StateVector::ones(3)), StateVector::ones(3));
        let zero = net.with_thresholds(vec![0, 0, 0]).unwrap();
        assert_eq!(ltm_step(&zero, &StateVector::zeros(3)), StateVector::ones(3));
    }

    #[test]
    fn pltm_steps() {
        let net = Network::build(&[(0, 1), (1, 0)], vec![1, 1], sv(&[1, 0])).unwrap();
        assert_eq!(pltm_step(&net, &sv(&[1, 0])), sv(&[1, 1]));
        assert_eq!(pltm_step(&net, &sv(&[1, 1])), sv(&[1, 1]));

        let path = Network::build(&[(0, 1), (1, 2)], vec![1, 1, 0], sv(&[0, 0, 1])).unwrap();
        let z1 = pltm_step(&path, &sv(&[0, 0, 1]));
        assert_eq!(z1, sv(&[0, 1, 1]));
        assert_eq!(pltm_step(&path, &z1), sv(&[1, 1, 1]));
    }

    #[test]
    fn pltm_as_ltm_zeroes_seeded_thresholds() {
        let net = Network::build(&[(0, 1), (0, 1), (0, 0), (1, 0), (1, 1)], vec![3, 2], sv(&[1, 0])).unwrap();
        assert_eq!(pltm_as_ltm(&net).thresholds(), &[0, 2]);
        let unseeded = net.with_initial_state(StateVector::zeros(2)).unwrap();
        assert_eq!(pltm_as_ltm(&unseeded).thresholds(), &[3, 2]);
    }

    fn random_net(rng: &mut impl Rng, n: usize) -> Network {
        let m = rng.random_range(0..4 * n);
        let edges: Vec<_> = (0..m)
            .map(|_| (rng.random_range(0..n as u32), rng.random_range(0..n as u32)))
            .collect();
        let topo = Network::topology(n, &edges).unwrap();
        let rho = (0..n).map(|i| rng.random_range(0..=topo.out_degree(i))).collect();
        let sigma = StateVector::from_bools(&(0..n).map(|_| rng.random_bool(0.4)).collect::<Vec<_>>());
        topo.with_attributes(rho, sigma).unwrap()
    }

    #[test]
    fn pltm_as_ltm_trajectories_match() {
        let mut rng = rng::stream(11, &[]);
        for _ in 0..50 {
            let net = random_net(&mut rng, 8);
            let reduced = pltm_as_ltm(&net);
            let mut zp = net.initial_state().clone();
            let mut zl = zp.clone();
            for _ in 0..20 {
                zp = pltm_step(&net, &zp);
                zl = ltm_step(&reduced, &zl);
                assert_eq!(zp, zl);
            }
        }
    }

    #[test]
    fn run_detects_two_cycle() {
        let net = Network::build(&[(0, 1), (1, 0)], vec![1, 1], sv(&[1, 0])).unwrap();
        let mut opts = RunOptions::new(Mode::Ltm, 50);
        opts.record_states = true;
        let rec = run(&net, opts);
        assert_eq!(rec.convergence, Convergence::Cycle2 { at: 0 });
        let states = rec.states.as_ref().unwrap();
        assert_eq!(states[0], sv(&[1, 0]));
        assert_eq!(states[1], sv(&[0, 1]));
        assert_eq!(rec.z_at(50), 0.5);
        assert_eq!(rec.a_at(7), 0.5);
        assert_eq!(rec.settling_z(), 0.5);
    }

    #[test]
    fn run_all_ones_is_constant() {
        let mut rng = rng::stream(3, &[]);
        let net = random_net(&mut rng, 10);
        let net = net.with_initial_state(StateVector::ones(10)).unwrap();
        let rec = run(&net, RunOptions::new(Mode::Ltm, 30));
        assert_eq!(rec.convergence, Convergence::FixedPoint { at: 0 });
        assert!((0..=30).all(|t| rec.z_at(t) == 1.0));
    }

    #[test]
    fn frozen_sinks_keep_initial_state() {
        // node 1 has no out-links and threshold 0
        let net = Network::build(&[(0, 1)], vec![1, 0], sv(&[0, 0])).unwrap();
        let literal = run(&net, RunOptions::new(Mode::Ltm, 5));
        assert_eq!(literal.final_z(), 1.0);
        let mut opts = RunOptions::new(Mode::Ltm, 5);
        opts.freeze_zero_out_degree = true;
        assert_eq!(run(&net, opts).final_z(), 0.0);
    }

    #[test]
    fn time_varying_constant_schedule_matches_run() {
        let mut rng = rng::stream(5, &[]);
        for _ in 0..20 {
            let net = random_net(&mut rng, 12);
            let sched = ThresholdSchedule::constant(net.thresholds().to_vec());
            let a = run_time_varying(&net, &sched, 25).unwrap();
            let b = run(&net, RunOptions::new(Mode::Ltm, 25));
            assert_eq!(a, b);
        }
    }

    #[test]
    fn time_varying_release_at_five() {
        let edges = [(0, 1), (1, 2), (2, 0), (2, 1)];
        let net = Network::topology(3, &edges).unwrap();
        let kappa = net.out_degrees();
        let sched = ThresholdSchedule::piecewise(vec![(0, kappa), (5, vec![0; 3])]).unwrap();
        let rec = run_time_varying(&net, &sched, 10).unwrap();
        for t in 0..=5 {
            assert_eq!(rec.z_at(t), 0.0, "t = {t}");
        }
        assert_eq!(rec.z_at(6), 1.0);
    }

    #[test]
    fn time_varying_rejects_invalid_schedule() {
        let net = Network::topology(2, &[(0, 1)]).unwrap();
        let sched = ThresholdSchedule::piecewise(vec![(0, vec![0, 0]), (3, vec![2, 0])]).unwrap();
        assert!(run_time_varying(&net, &sched, 5).is_err());
        // invalid phase beyond the horizon is not reached
        assert!(run_time_varying(&net, &sched, 3).is_ok());
    }

    #[test]
    fn non_increasing_schedule_gives_monotone_trajectory() {
        let mut rng = rng::stream(9, &[]);
        for _ in 0..50 {
            let n = 10;
            let net = random_net(&mut rng, n);
            let sigma = net.initial_state().clone();
            let cap: Vec<u32> = (0..n).map(|i| if sigma.get(i) { 0 } else { net.out_degree(i) }).collect();
            let mut phases = Vec::new();
            let mut cur: Vec<u32> = cap.iter().map(|&c| rng.random_range(0..=c)).collect();
            for start in [0usize, 2, 4, 7] {
                phases.push((start, cur.clone()));
                cur = cur.iter().map(|&r| rng.random_range(0..=r)).collect();
            }
            let sched = ThresholdSchedule::piecewise(phases).unwrap();
            let mut opts_states = run_time_varying(&net, &sched, 15).unwrap();
            opts_states.states = None;
            let z = &opts_states.z;
            assert!(z.windows(2).all(|w| w[0] <= w[1]), "{z:?}");
        }
    }

    fn star4() -> Network {
        let edges = [(0, 1), (1, 0), (0, 2), (2, 0), (0, 3), (3, 0)];
        Network::build(&edges, vec![2, 1, 1, 1], sv(&[0, 1, 1, 1])).unwrap()
    }

    #[test]
    fn tree_root_examples() {
        let single = Network::build(&[], vec![0], sv(&[1])).unwrap();
        assert_eq!(pltm_root_on_undirected_tree(&single, 0, 3).unwrap(), vec![true; 4]);
        let star = star4();
        assert_eq!(pltm_root_on_undirected_tree(&star, 0, 2).unwrap(), vec![false, true, true]);
        assert_eq!(pltm_root_on_rooted_tree(&star, 0, 2).unwrap(), vec![false, true, true]);
    }

    #[test]
    fn tree_validation() {
        let cyc = Network::topology(3, &[(0, 1), (1, 0), (1, 2), (2, 1), (2, 0), (0, 2)]).unwrap();
        assert!(matches!(validate_undirected_tree(&cyc), Err(Error::NotATree(_))));
        let directed = Network::topology(2, &[(0, 1), (0, 1)]).unwrap();
        assert!(validate_undirected_tree(&directed).is_err());
        assert!(validate_undirected_tree(&star4()).is_ok());
    }
}
