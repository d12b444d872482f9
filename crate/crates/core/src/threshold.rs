//! Normalized thresholds as exact rationals, and finite threshold CDFs.
//!
//! Integer thresholds are `rho = ceil(theta * kappa)`. Doing this in floating
//! point misplaces boundary cases such as `theta = 0.3, kappa = 10`, so atoms
//! are kept as `num/den` and every comparison with `r/k` is done in integers.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// A rational in `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Fraction {
    num: u64,
    den: u64,
}

fn gcd(mut a: u64, mut b: u64) -> u64 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

impl Fraction {
    pub fn new(num: u64, den: u64) -> Result<Self> {
        if den == 0 || num > den {
            return Err(Error::InvalidArgument(format!(
                "normalized threshold {num}/{den} outside [0, 1]"
            )));
        }
        let g = gcd(num, den).max(1);
        Ok(Fraction {
            num: num / g,
            den: den / g,
        })
    }

    pub fn num(self) -> u64 {
        self.num
    }

    pub fn den(self) -> u64 {
        self.den
    }

    pub fn to_f64(self) -> f64 {
        self.num as f64 / self.den as f64
    }

    /// `self <= r/k`, exact. `k = 0` is read as `r/k = 0`.
    pub fn le_ratio(self, r: i64, k: u64) -> bool {
        if k == 0 {
            return self.num == 0 && r >= 0;
        }
        (self.num as i128) * (k as i128) <= (r as i128) * (self.den as i128)
    }

    /// `ceil(self * kappa)`.
    pub fn ceil_mul(self, kappa: u32) -> u32 {
        let p = self.num as u128 * kappa as u128;
        p.div_ceil(self.den as u128) as u32
    }
}

impl fmt::Display for Fraction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.num, self.den)
    }
}

impl FromStr for Fraction {
    type Err = Error;

    /// Accepts `a/b` or a plain decimal such as `0.25`, converted exactly.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let bad = || Error::InvalidArgument(format!("cannot parse threshold {s:?}"));
        if let Some((a, b)) = s.split_once('/') {
            let a = a.trim().parse::<u64>().map_err(|_| bad())?;
            let b = b.trim().parse::<u64>().map_err(|_| bad())?;
            return Fraction::new(a, b);
        }
        let (int, frac) = s.split_once('.').unwrap_or((s, ""));
        if frac.len() > 18 || !frac.chars().all(|c| c.is_ascii_digit()) {
            return Err(bad());
        }
        let int: u64 = if int.is_empty() { 0 } else { int.parse().map_err(|_| bad())? };
        let den = 10u64.pow(frac.len() as u32);
        let frac_val: u64 = if frac.is_empty() { 0 } else { frac.parse().map_err(|_| bad())? };
        let num = int
            .checked_mul(den)
            .and_then(|v| v.checked_add(frac_val))
            .ok_or_else(bad)?;
        Fraction::new(num, den)
    }
}

/// Threshold CDF with finitely many atoms: `F(theta) = sum of masses of
/// atoms <= theta`. Right-continuous, `F(1) = 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdCdf {
    atoms: Vec<(Fraction, f64)>,
}

impl ThresholdCdf {
    pub fn new(mut atoms: Vec<(Fraction, f64)>) -> Result<Self> {
        if atoms.is_empty() {
            return Err(Error::InvalidArgument("threshold CDF without atoms".into()));
        }
        if atoms.iter().any(|&(_, w)| !(w >= 0.0) || !w.is_finite()) {
            return Err(Error::InvalidArgument("negative or non-finite atom mass".into()));
        }
        let total: f64 = atoms.iter().map(|a| a.1).sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidArgument(format!(
                "atom masses sum to {total}, expected 1"
            )));
        }
        atoms.sort_by(|a, b| (a.0.num as u128 * b.0.den as u128).cmp(&(b.0.num as u128 * a.0.den as u128)));
        let mut merged: Vec<(Fraction, f64)> = Vec::with_capacity(atoms.len());
        for (a, w) in atoms {
            match merged.last_mut() {
                Some(last) if last.0 == a => last.1 += w,
                _ => merged.push((a, w)),
            }
        }
        Ok(ThresholdCdf { atoms: merged })
    }

    /// Point mass at `theta` (a common normalized threshold).
    pub fn step(theta: Fraction) -> Self {
        ThresholdCdf {
            atoms: vec![(theta, 1.0)],
        }
    }

    pub fn atoms(&self) -> &[(Fraction, f64)] {
        &self.atoms
    }

    /// `F(r/k)`, exact comparison; negative `r` gives 0.
    pub fn at_ratio(&self, r: i64, k: u64) -> f64 {
        self.atoms
            .iter()
            .filter(|(a, _)| a.le_ratio(r, k))
            .map(|a| a.1)
            .sum()
    }

    /// Probability that `ceil(Theta * k) = r`, i.e. `F(r/k) - F((r-1)/k)`.
    /// For `k = 0` all mass sits at `r = 0`.
    pub fn threshold_mass(&self, k: u32, r: u32) -> f64 {
        if k == 0 {
            return if r == 0 { 1.0 } else { 0.0 };
        }
        self.atoms
            .iter()
            .filter(|(a, _)| a.ceil_mul(k) == r)
            .map(|a| a.1)
            .sum()
    }

    /// `F(x)` for a real argument.
    pub fn eval(&self, x: f64) -> f64 {
        self.atoms
            .iter()
            .filter(|(a, _)| a.to_f64() <= x)
            .map(|a| a.1)
            .sum()
    }
}

impl FromStr for ThresholdCdf {
    type Err = Error;

    /// `"0.4@1/4,0.6@3/4"`: comma-separated `mass@atom`. A bare atom such as
    /// `"1/2"` is a point mass.
    fn from_str(s: &str) -> Result<Self> {
        let mut atoms = Vec::new();
        for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            match part.split_once('@') {
                Some((w, a)) => {
                    let w: f64 = w.trim().parse().map_err(|_| {
                        Error::InvalidArgument(format!("bad atom mass in {part:?}"))
                    })?;
                    atoms.push((a.parse()?, w));
                }
                None => atoms.push((part.parse()?, 1.0)),
            }
        }
        ThresholdCdf::new(atoms)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_fractions_exactly() {
        assert_eq!("0.25".parse::<Fraction>().unwrap(), Fraction::new(1, 4).unwrap());
        assert_eq!("3/4".parse::<Fraction>().unwrap(), Fraction::new(3, 4).unwrap());
        assert_eq!("1".parse::<Fraction>().unwrap(), Fraction::new(1, 1).unwrap());
        assert!("1.5".parse::<Fraction>().is_err());
        assert!("x".parse::<Fraction>().is_err());
    }

    #[test]
    fn ceiling_is_exact_at_boundaries() {
        let half = Fraction::new(1, 2).unwrap();
        assert_eq!(half.ceil_mul(7), 4);
        assert_eq!(half.ceil_mul(8), 4);
        assert_eq!(half.ceil_mul(0), 0);
        // 0.3 * 10 = 3 exactly; a float product gives 3.0000000000000004.
        let tenths: Fraction = "0.3".parse().unwrap();
        assert_eq!(tenths.ceil_mul(10), 3);
    }

    #[test]
    fn threshold_mass_matches_cdf_differences() {
        let cdf: ThresholdCdf = "0.4@1/4,0.6@3/4".parse().unwrap();
        for k in 1..20u32 {
            let mut total = 0.0;
            for r in 0..=k {
                let diff = cdf.at_ratio(r as i64, k as u64) - cdf.at_ratio(r as i64 - 1, k as u64);
                assert!((cdf.threshold_mass(k, r) - diff).abs() < 1e-15);
                total += diff;
            }
            assert!((total - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn rejects_bad_masses() {
        assert!("0.4@1/4,0.5@3/4".parse::<ThresholdCdf>().is_err());
        assert!("".parse::<ThresholdCdf>().is_err());
    }
}
