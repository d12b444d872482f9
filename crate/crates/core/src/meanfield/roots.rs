//! Fixed points of `phi` and the limit map `xi -> (x*, y*)`.
//!
//! `g(x) = phi(x) - x` is scanned on a uniform grid. Cells with a sign change
//! are split ten-fold until `g` is monotone on the cell holding the change,
//! then bisected. Cells without a sign change are checked for a hidden pair
//! of roots through the extremum of `g` when `g'` changes sign across them.

use serde::{Deserialize, Serialize};

use super::MeanFieldMaps;
use crate::{Error, Result};

const GRID: usize = 10_000;
const ZERO_TOL: f64 = 1e-12;
const ROOT_TOL: f64 = 1e-10;
const DEDUP_TOL: f64 = 1e-9;
const MARGINAL_TOL: f64 = 1e-6;
const MAX_DEPTH: u32 = 6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stability {
    Stable,
    Unstable,
    Marginal,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FixedPoint {
    pub x: f64,
    pub slope: f64,
    pub stability: Stability,
}

/// One row of a tabulated limit map.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LimitPoint {
    pub xi: f64,
    pub x_star: f64,
    pub y_star: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LimitProfile {
    pub fixed_points: Vec<FixedPoint>,
    /// Fixed points at which `x*` jumps.
    pub discontinuities: Vec<f64>,
}

struct Scan<'a> {
    maps: &'a MeanFieldMaps,
    roots: Vec<f64>,
}

fn sign(v: f64) -> i8 {
    if v.abs() <= ZERO_TOL {
        0
    } else if v > 0.0 {
        1
    } else {
        -1
    }
}

impl Scan<'_> {
    fn g(&self, x: f64) -> f64 {
        self.maps.phi(x) - x
    }

    fn dg(&self, x: f64) -> f64 {
        self.maps.phi_prime(x) - 1.0
    }

    fn bisect(&self, mut a: f64, mut b: f64, mut fa: f64) -> f64 {
        while b - a > ROOT_TOL {
            let m = 0.5 * (a + b);
            let fm = self.g(m);
            if fm == 0.0 {
                return m;
            }
            if (fm > 0.0) == (fa > 0.0) {
                a = m;
                fa = fm;
            } else {
                b = m;
            }
        }
        0.5 * (a + b)
    }

    /// Locates the root(s) in a cell whose ends have opposite signs.
    fn crossing(&mut self, a: f64, b: f64, fa: f64, fb: f64, depth: u32) -> Result<()> {
        if self.dg(a).signum() == self.dg(b).signum() {
            let r = self.bisect(a, b, fa);
            self.roots.push(r);
            return Ok(());
        }
        if depth >= MAX_DEPTH {
            return Err(Error::RootsNotSeparated { depth, x: 0.5 * (a + b) });
        }
        self.refine(a, b, fa, fb, depth + 1)
    }

    fn refine(&mut self, a: f64, b: f64, fa: f64, fb: f64, depth: u32) -> Result<()> {
        let h = (b - a) / 10.0;
        let mut xs: Vec<f64> = (0..=10).map(|i| a + h * i as f64).collect();
        xs[10] = b;
        let mut gs: Vec<f64> = xs.iter().map(|&x| self.g(x)).collect();
        gs[0] = fa;
        gs[10] = fb;
        self.cells(&xs, &gs, depth)
    }

    /// A cell with equal nonzero end signs: look for a pair of roots around
    /// an interior extremum of `g`.
    fn hidden_pair(&mut self, a: f64, b: f64, fa: f64) {
        let (da, db) = (self.dg(a), self.dg(b));
        // an extremum pointing towards zero: g > 0 with a minimum, or g < 0 with a maximum
        let towards_zero = if fa > 0.0 { da < 0.0 && db > 0.0 } else { da > 0.0 && db < 0.0 };
        if !towards_zero {
            return;
        }
        let (mut lo, mut hi) = (a, b);
        while hi - lo > ROOT_TOL {
            let m = 0.5 * (lo + hi);
            if (self.dg(m) > 0.0) == (da > 0.0) {
                lo = m;
            } else {
                hi = m;
            }
        }
        let c = 0.5 * (lo + hi);
        let gc = self.g(c);
        match sign(gc) {
            0 => self.roots.push(c),
            s if s != sign(fa) => {
                let r1 = self.bisect(a, c, fa);
                let r2 = self.bisect(c, b, gc);
                self.roots.push(r1);
                self.roots.push(r2);
            }
            _ => {}
        }
    }

    fn cells(&mut self, xs: &[f64], gs: &[f64], depth: u32) -> Result<()> {
        let signs: Vec<i8> = gs.iter().map(|&g| sign(g)).collect();
        // flat stretches of g = 0 are reported by their ends
        let mut i = 0;
        while i < xs.len() {
            if signs[i] == 0 {
                let mut j = i;
                while j + 1 < xs.len() && signs[j + 1] == 0 {
                    j += 1;
                }
                if j - i >= 2 {
                    self.roots.push(xs[i]);
                    self.roots.push(xs[j]);
                } else {
                    let best = (i..=j).min_by(|&p, &q| gs[p].abs().total_cmp(&gs[q].abs())).unwrap();
                    self.roots.push(xs[best]);
                }
                i = j + 1;
            } else {
                i += 1;
            }
        }
        for c in 0..xs.len() - 1 {
            let (sa, sb) = (signs[c], signs[c + 1]);
            if sa == 0 || sb == 0 {
                continue;
            }
            if sa != sb {
                self.crossing(xs[c], xs[c + 1], gs[c], gs[c + 1], depth)?;
            } else {
                self.hidden_pair(xs[c], xs[c + 1], gs[c]);
            }
        }
        Ok(())
    }
}

fn classify(maps: &MeanFieldMaps, x: f64) -> FixedPoint {
    let slope = maps.phi_prime(x);
    let stability = if slope < 1.0 - MARGINAL_TOL {
        Stability::Stable
    } else if slope > 1.0 + MARGINAL_TOL {
        Stability::Unstable
    } else {
        Stability::Marginal
    };
    FixedPoint { x, slope, stability }
}

/// All roots of `phi(x) = x` on `[0, 1]` and the jump points of `x*`.
pub fn fixed_points(maps: &MeanFieldMaps) -> Result<LimitProfile> {
    let xs: Vec<f64> = (0..=GRID).map(|i| i as f64 / GRID as f64).collect();
    let mut scan = Scan {
        maps,
        roots: Vec::new(),
    };
    let gs: Vec<f64> = xs.iter().map(|&x| scan.g(x)).collect();
    scan.cells(&xs, &gs, 0)?;
    let mut roots = scan.roots;
    roots.sort_by(f64::total_cmp);
    roots.dedup_by(|b, a| (*b - *a).abs() <= DEDUP_TOL);

    let g = |x: f64| maps.phi(x) - x;
    let mut discontinuities = Vec::new();
    for (i, &c) in roots.iter().enumerate() {
        let left = i.checked_sub(1).map(|j| sign(g(0.5 * (roots[j] + c))));
        let right = roots.get(i + 1).map(|&d| sign(g(0.5 * (c + d))));
        if left == Some(-1) || right == Some(1) {
            discontinuities.push(c);
        }
    }
    Ok(LimitProfile {
        fixed_points: roots.iter().map(|&x| classify(maps, x)).collect(),
        discontinuities,
    })
}

impl LimitProfile {
    pub fn roots(&self) -> Vec<f64> {
        self.fixed_points.iter().map(|f| f.x).collect()
    }

    /// `x*(xi)`: the largest root below `xi` if `phi(xi) < xi`, `xi` itself
    /// if it is a root, the smallest root above otherwise.
    pub fn x_star(&self, maps: &MeanFieldMaps, xi: f64) -> f64 {
        if let Some(fp) = self.fixed_points.iter().find(|f| (f.x - xi).abs() <= ROOT_TOL) {
            return fp.x;
        }
        let g = maps.phi(xi) - xi;
        match sign(g) {
            0 => xi,
            -1 => self
                .fixed_points
                .iter()
                .rev()
                .find(|f| f.x < xi)
                .map_or(0.0, |f| f.x),
            _ => self.fixed_points.iter().find(|f| f.x > xi).map_or(1.0, |f| f.x),
        }
    }

    pub fn evaluate(&self, maps: &MeanFieldMaps, xi: f64) -> LimitPoint {
        let x_star = self.x_star(maps, xi);
        LimitPoint {
            xi,
            x_star,
            y_star: maps.psi(x_star),
        }
    }

    pub fn tabulate(&self, maps: &MeanFieldMaps, grid: &[f64]) -> Vec<LimitPoint> {
        grid.iter().map(|&xi| self.evaluate(maps, xi)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::meanfield::{iterate, Term, HORIZON_CAP};
    use proptest::prelude::*;

    fn close(roots: &[f64], want: &[f64], tol: f64) -> bool {
        roots.len() == want.len() && roots.iter().zip(want).all(|(a, b)| (a - b).abs() <= tol)
    }

    #[test]
    fn seven_three() {
        let maps = MeanFieldMaps::homogeneous(7, 3).unwrap();
        let p = fixed_points(&maps).unwrap();
        assert!(close(&p.roots(), &[0.0, 0.256, 1.0], 0.002), "{:?}", p.roots());
        let st: Vec<Stability> = p.fixed_points.iter().map(|f| f.stability).collect();
        assert_eq!(st, [Stability::Stable, Stability::Unstable, Stability::Stable]);
        assert!(p.fixed_points[1].slope > 1.0);
        assert_eq!(p.discontinuities.len(), 1);
        assert_eq!(p.x_star(&maps, 0.2), 0.0);
        assert_eq!(p.x_star(&maps, 0.3), 1.0);
        let mid = p.fixed_points[1].x;
        assert_eq!(p.x_star(&maps, mid), mid);
    }

    #[test]
    fn example_two_mixture() {
        let maps = MeanFieldMaps::symmetric(vec![Term::new(14, 3, 0.45), Term::new(11, 9, 0.55)]).unwrap();
        let p = fixed_points(&maps).unwrap();
        let r = p.roots();
        assert_eq!(r.len(), 5, "{r:?}");
        assert!(close(&r[1..4], &[0.140, 0.451, 0.813], 0.002), "{r:?}");
        assert_eq!(p.discontinuities.len(), 2);
    }

    #[test]
    fn constant_one_map() {
        let maps = MeanFieldMaps::homogeneous(5, 0).unwrap();
        let p = fixed_points(&maps).unwrap();
        assert_eq!(p.roots(), vec![1.0]);
        assert_eq!(p.x_star(&maps, 0.0), 1.0);
    }

    #[test]
    fn identity_map_has_flat_roots() {
        let maps = MeanFieldMaps::homogeneous(1, 1).unwrap();
        let p = fixed_points(&maps).unwrap();
        assert_eq!(p.roots(), vec![0.0, 1.0]);
        assert_eq!(p.fixed_points[0].stability, Stability::Marginal);
        assert_eq!(p.x_star(&maps, 0.42), 0.42);
    }

    #[test]
    fn root_on_grid_point() {
        // phi(x) - x = -x (2x - 1)(x - 1) / 2
        let maps = MeanFieldMaps::symmetric(vec![Term::new(3, 2, 0.5), Term::new(1, 1, 0.5)]).unwrap();
        let p = fixed_points(&maps).unwrap();
        assert!(close(&p.roots(), &[0.0, 0.5, 1.0], 1e-9), "{:?}", p.roots());
    }

    #[test]
    fn limit_profile_is_monotone() {
        let maps = MeanFieldMaps::symmetric(vec![Term::new(14, 3, 0.45), Term::new(11, 9, 0.55)]).unwrap();
        let p = fixed_points(&maps).unwrap();
        let grid: Vec<f64> = (0..=400).map(|i| i as f64 / 400.0).collect();
        let tab = p.tabulate(&maps, &grid);
        assert!(tab.windows(2).all(|w| w[1].x_star >= w[0].x_star && w[1].y_star >= w[0].y_star));
    }

    fn mixture() -> impl Strategy<Value = Vec<Term>> {
        prop::collection::vec((1u32..12, 0u32..12, 0.05f64..1.0), 1..4).prop_map(|v| {
            let total: f64 = v.iter().map(|t| t.2).sum();
            v.into_iter().map(|(k, r, w)| Term::new(k, r.min(k), w / total)).collect()
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(100))]
        #[test]
        fn profile_matches_iteration(terms in mixture(), xi in 0.0f64..1.0) {
            let maps = MeanFieldMaps::symmetric(terms).unwrap();
            let p = fixed_points(&maps).unwrap();
            prop_assert!(p.roots().last().map_or(false, |&r| (r - 1.0).abs() < 1e-9));
            let tr = iterate(&maps, xi, xi, HORIZON_CAP).unwrap();
            let star = p.x_star(&maps, xi);
            // slow convergence next to marginal roots only
            if tr.converged_at.is_some() {
                prop_assert!((tr.final_x() - star).abs() < 1e-4, "xi={} iter={} profile={} roots={:?}", xi, tr.final_x(), star, p.roots());
            }
        }
    }
}
