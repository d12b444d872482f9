//! The one-dimensional recursion `x(t+1) = phi(x(t))`, `y(t+1) = psi(x(t))`.
//!
//! `phi` and `psi` are mixtures of binomial tails `phi_{k,r}` weighted by the
//! link-biased marginal `q_{k,r}` and the node marginal `p_{k,r}`.

mod binomial;
mod roots;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::statistics::NetworkStatistics;
use crate::threshold::ThresholdCdf;
use crate::{Error, Result};

pub use binomial::{varphi, varphi_derivative, varphi_second};
pub use roots::{fixed_points, FixedPoint, LimitPoint, LimitProfile, Stability};

use binomial::{Compensated, Row};

/// One `weight * phi_{k,r}` term.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Term {
    pub k: u32,
    pub r: u32,
    pub weight: f64,
}

impl Term {
    pub fn new(k: u32, r: u32, weight: f64) -> Self {
        Term { k, r, weight }
    }
}

#[derive(Debug, Clone, PartialEq)]
struct Group {
    k: u32,
    /// `w[r]`
    weights: Vec<f64>,
    /// `cum[u] = sum_{r <= u} w[r]`
    cum: Vec<f64>,
}

/// A convex combination of `phi_{k,r}`, evaluated per out-degree as
/// `sum_u P(Bin(k, x) = u) W_k(u)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Mixture {
    terms: Vec<Term>,
    groups: Vec<Group>,
}

impl Mixture {
    pub fn new(terms: Vec<Term>) -> Result<Self> {
        let mut by_k: BTreeMap<u32, Vec<f64>> = BTreeMap::new();
        let mut total = 0.0;
        for t in &terms {
            if t.r > t.k {
                return Err(Error::InvalidStatistics(format!("term ({}, {}) has r > k", t.k, t.r)));
            }
            if !(t.weight >= 0.0) || !t.weight.is_finite() {
                return Err(Error::InvalidStatistics(format!("term weight {}", t.weight)));
            }
            total += t.weight;
            by_k.entry(t.k).or_insert_with(|| vec![0.0; t.k as usize + 1])[t.r as usize] += t.weight;
        }
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidStatistics(format!("map weights sum to {total}")));
        }
        let groups = by_k
            .into_iter()
            .map(|(k, weights)| {
                let mut acc = 0.0;
                let cum = weights
                    .iter()
                    .map(|w| {
                        acc += w;
                        acc
                    })
                    .collect();
                Group { k, weights, cum }
            })
            .collect();
        Ok(Mixture { terms, groups })
    }

    pub fn single(k: u32, r: u32) -> Result<Self> {
        Mixture::new(vec![Term::new(k, r, 1.0)])
    }

    pub fn terms(&self) -> &[Term] {
        &self.terms
    }

    pub fn eval(&self, x: f64) -> f64 {
        let x = x.clamp(0.0, 1.0);
        let mut acc = Compensated::default();
        for g in &self.groups {
            let row = Row::new(g.k, x);
            for (j, &p) in row.terms.iter().enumerate() {
                acc.add(p * g.cum[row.lo as usize + j]);
            }
        }
        acc.value().clamp(0.0, 1.0)
    }

    pub fn derivative(&self, x: f64) -> f64 {
        let x = x.clamp(0.0, 1.0);
        let mut acc = Compensated::default();
        for g in self.groups.iter().filter(|g| g.k > 0) {
            let row = Row::new(g.k - 1, x);
            for (j, &p) in row.terms.iter().enumerate() {
                acc.add(g.k as f64 * p * g.weights[row.lo as usize + j + 1]);
            }
        }
        acc.value()
    }

    /// `sum_r w_{k,r} phi''_{k,r}(x)`.
    pub fn second_derivative(&self, x: f64) -> f64 {
        let mut acc = Compensated::default();
        for t in &self.terms {
            acc.add(t.weight * varphi_second(t.k, t.r, x.clamp(0.0, 1.0)).unwrap_or(0.0));
        }
        acc.value()
    }

    /// Total weight on `r = 0`, i.e. the value at 0.
    pub fn at_zero(&self) -> f64 {
        self.groups.iter().map(|g| g.weights[0]).sum()
    }

    /// `sum_k k w_{k,1}`, the slope at 0.
    pub fn slope_at_zero(&self) -> f64 {
        self.groups
            .iter()
            .filter(|g| g.k >= 1)
            .map(|g| g.k as f64 * g.weights[1])
            .sum()
    }

    /// `sum_k k w_{k,k}`, the slope at 1.
    pub fn slope_at_one(&self) -> f64 {
        self.groups
            .iter()
            .filter(|g| g.k >= 1)
            .map(|g| g.k as f64 * g.weights[g.k as usize])
            .sum()
    }
}

/// The pair `(phi, psi)`.
#[derive(Debug, Clone, PartialEq)]
pub struct MeanFieldMaps {
    phi: Mixture,
    psi: Mixture,
}

impl MeanFieldMaps {
    /// `phi = sum q_{k,r} phi_{k,r}`, `psi = sum p_{k,r} phi_{k,r}`.
    pub fn from_stats(stats: &NetworkStatistics) -> Result<Self> {
        if stats.mean_degree() <= 0.0 {
            return Err(Error::InvalidStatistics("statistics without links".into()));
        }
        let phi = stats.q_kr().iter().map(|(&(k, r), &w)| Term::new(k, r, w)).collect();
        let psi = stats.p_kr().iter().map(|(&(k, r), &w)| Term::new(k, r, w)).collect();
        Self::from_terms(phi, psi)
    }

    pub fn from_terms(phi: Vec<Term>, psi: Vec<Term>) -> Result<Self> {
        Ok(MeanFieldMaps {
            phi: Mixture::new(phi)?,
            psi: Mixture::new(psi)?,
        })
    }

    /// `phi = psi`.
    pub fn symmetric(terms: Vec<Term>) -> Result<Self> {
        let m = Mixture::new(terms)?;
        Ok(MeanFieldMaps { phi: m.clone(), psi: m })
    }

    pub fn homogeneous(k: u32, r: u32) -> Result<Self> {
        Self::symmetric(vec![Term::new(k, r, 1.0)])
    }

    pub fn phi_map(&self) -> &Mixture {
        &self.phi
    }

    pub fn psi_map(&self) -> &Mixture {
        &self.psi
    }

    pub fn phi(&self, x: f64) -> f64 {
        self.phi.eval(x)
    }

    pub fn psi(&self, x: f64) -> f64 {
        self.psi.eval(x)
    }

    pub fn phi_prime(&self, x: f64) -> f64 {
        self.phi.derivative(x)
    }

    pub fn psi_prime(&self, x: f64) -> f64 {
        self.psi.derivative(x)
    }
}

pub const STOP_TOL: f64 = 1e-12;
pub const HORIZON_CAP: usize = 100_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecursionTrajectory {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub horizon: usize,
    /// First `t` with `|x(t) - x(t-1)| < 1e-12`; later values repeat.
    pub converged_at: Option<usize>,
}

impl RecursionTrajectory {
    pub fn x_at(&self, t: usize) -> f64 {
        self.x[t.min(self.x.len() - 1)]
    }

    pub fn y_at(&self, t: usize) -> f64 {
        self.y[t.min(self.y.len() - 1)]
    }

    pub fn final_x(&self) -> f64 {
        *self.x.last().unwrap()
    }

    pub fn final_y(&self) -> f64 {
        *self.y.last().unwrap()
    }
}

fn check_unit(name: &str, v: f64) -> Result<()> {
    if (0.0..=1.0).contains(&v) {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("{name} = {v} outside [0, 1]")))
    }
}

/// Runs the recursion for `horizon` steps (capped at `1e5`) from
/// `x(0) = xi`, `y(0) = upsilon`, stopping once `x` stalls.
pub fn iterate(maps: &MeanFieldMaps, xi: f64, upsilon: f64, horizon: usize) -> Result<RecursionTrajectory> {
    iterate_time_varying(std::slice::from_ref(maps), xi, upsilon, horizon)
}

/// Like [`iterate`] but step `t` uses `schedule[t]`, the last entry
/// repeating. Early stopping only starts once the schedule is exhausted.
pub fn iterate_time_varying(
    schedule: &[MeanFieldMaps],
    xi: f64,
    upsilon: f64,
    horizon: usize,
) -> Result<RecursionTrajectory> {
    check_unit("xi", xi)?;
    check_unit("upsilon", upsilon)?;
    if schedule.is_empty() {
        return Err(Error::InvalidArgument("empty map schedule".into()));
    }
    let horizon = horizon.min(HORIZON_CAP);
    let mut x = vec![xi];
    let mut y = vec![upsilon];
    let mut converged_at = None;
    for t in 0..horizon {
        let maps = &schedule[t.min(schedule.len() - 1)];
        let xt = x[t];
        let next = maps.phi(xt);
        x.push(next);
        y.push(maps.psi(xt));
        if t + 1 >= schedule.len() && (next - xt).abs() < STOP_TOL {
            converged_at = Some(t + 1);
            break;
        }
    }
    Ok(RecursionTrajectory {
        x,
        y,
        horizon,
        converged_at,
    })
}

/// Behaviour of the recursion for seeds near an endpoint.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EndpointBehavior {
    /// `phi(x) > x` next to the endpoint.
    Rises,
    /// `phi(x) < x` next to the endpoint.
    Falls,
    /// Slope exactly 1; higher-order terms decide.
    Undetermined,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocalIndicators {
    /// `sum_k k q_{k,1}`
    pub gamma: f64,
    /// `sum_k k q_{k,k}`
    pub vartheta: f64,
    pub phi0: f64,
    pub psi0: f64,
    pub near_zero: EndpointBehavior,
    pub near_one: EndpointBehavior,
}

fn by_slope(slope: f64, rising_if_above: bool) -> EndpointBehavior {
    if slope == 1.0 {
        EndpointBehavior::Undetermined
    } else if (slope > 1.0) == rising_if_above {
        EndpointBehavior::Rises
    } else {
        EndpointBehavior::Falls
    }
}

pub fn local_indicators(maps: &MeanFieldMaps) -> LocalIndicators {
    let gamma = maps.phi.slope_at_zero();
    let vartheta = maps.phi.slope_at_one();
    let phi0 = maps.phi.at_zero();
    let near_zero = if phi0 > 0.0 {
        EndpointBehavior::Rises
    } else {
        by_slope(gamma, true)
    };
    LocalIndicators {
        gamma,
        vartheta,
        phi0,
        psi0: maps.psi.at_zero(),
        near_zero,
        near_one: by_slope(vartheta, false),
    }
}

/// How close `phi` gets to the threshold CDF at one out-degree.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CdfDistance {
    pub k: u32,
    /// `max |phi(x) - F(x)|` over grid points at least `margin` from every atom.
    pub sup_away_from_atoms: f64,
    /// `max |phi(x) - F(x)|` over the whole grid.
    pub sup: f64,
}

/// Compares `phi = sum_r (F(r/k) - F((r-1)/k)) phi_{k,r}` with `F` for each
/// out-degree in `degrees` on a `points`-point grid.
pub fn granovetter_limit(cdf: &ThresholdCdf, degrees: &[u32], points: usize, margin: f64) -> Result<Vec<CdfDistance>> {
    let atoms: Vec<f64> = cdf.atoms().iter().map(|a| a.0.to_f64()).collect();
    let points = points.max(2);
    degrees
        .iter()
        .map(|&k| {
            let terms = (0..=k)
                .map(|r| Term::new(k, r, cdf.threshold_mass(k, r)))
                .filter(|t| t.weight > 0.0)
                .collect();
            let m = Mixture::new(terms)?;
            let (mut sup, mut away) = (0.0f64, 0.0f64);
            for i in 0..points {
                let x = i as f64 / (points - 1) as f64;
                let d = (m.eval(x) - cdf.eval(x)).abs();
                sup = sup.max(d);
                if atoms.iter().all(|a| (x - a).abs() >= margin) {
                    away = away.max(d);
                }
            }
            Ok(CdfDistance {
                k,
                sup_away_from_atoms: away,
                sup,
            })
        })
        .collect()
}

/// Plug-in constants of the simulation/recursion concentration bound, kept
/// in the log domain since `k_max^(2t+3)` overflows quickly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConcentrationBounds {
    pub t: u32,
    /// `ln(d_max k_max^(2t+3) / dbar)`
    pub ln_gamma_t: f64,
    /// `ln(1 / (32 dbar k_max^(2t)))`
    pub ln_beta: f64,
}

impl ConcentrationBounds {
    pub fn gamma_t(&self) -> f64 {
        self.ln_gamma_t.exp()
    }

    pub fn beta(&self) -> f64 {
        self.ln_beta.exp()
    }

    /// Size from which the mean term `gamma_t / n` is at most `epsilon`.
    pub fn n_min(&self, epsilon: f64) -> f64 {
        (self.ln_gamma_t - epsilon.ln()).exp()
    }

    /// `2 exp(-epsilon^2 beta n)`.
    pub fn tail(&self, epsilon: f64, n: f64) -> f64 {
        let ln_rate = 2.0 * epsilon.ln() + self.ln_beta + n.ln();
        2.0 * (-ln_rate.exp()).exp()
    }

    /// True when the bound says nothing at size `n`.
    pub fn vacuous(&self, epsilon: f64, n: f64) -> bool {
        n < self.n_min(epsilon) || self.tail(epsilon, n) >= 1.0
    }
}

pub fn concentration_constants(stats: &NetworkStatistics, t: u32) -> Result<ConcentrationBounds> {
    let dbar = stats.mean_degree();
    if dbar <= 0.0 || stats.d_max() == 0 || stats.k_max() == 0 {
        return Err(Error::InvalidStatistics("statistics without links".into()));
    }
    let ln_k = (stats.k_max() as f64).ln();
    Ok(ConcentrationBounds {
        t,
        ln_gamma_t: (stats.d_max() as f64).ln() + (2 * t + 3) as f64 * ln_k - dbar.ln(),
        ln_beta: -(32.0f64.ln() + dbar.ln() + (2 * t) as f64 * ln_k),
    })
}
