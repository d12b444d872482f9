//! Binomial probabilities and tails for `phi_{k,r}`.
//!
//! Small `k` uses direct powers. Large `k` starts from the mode in the log
//! domain and walks outwards with the term ratio, dropping terms below
//! `1e-18` of the mode, then renormalizes. Out-degrees run past 1800 on
//! real data, where `C(k, u)` alone overflows `f64`.

use crate::{Error, Result};

const DIRECT_MAX_K: u32 = 64;
const CUTOFF: f64 = 1e-18;

/// Neumaier compensated sum.
#[derive(Debug, Default, Clone, Copy)]
pub(crate) struct Compensated {
    sum: f64,
    c: f64,
}

impl Compensated {
    pub(crate) fn add(&mut self, v: f64) {
        let t = self.sum + v;
        if self.sum.abs() >= v.abs() {
            self.c += (self.sum - t) + v;
        } else {
            self.c += (v - t) + self.sum;
        }
        self.sum = t;
    }

    pub(crate) fn value(self) -> f64 {
        self.sum + self.c
    }
}

/// Non-negligible part of the `Bin(k, x)` mass function: `terms[j]` is the
/// probability of `lo + j`.
#[derive(Debug, Clone)]
pub(crate) struct Row {
    pub(crate) lo: u32,
    pub(crate) terms: Vec<f64>,
}

impl Row {
    pub(crate) fn new(k: u32, x: f64) -> Row {
        if x <= 0.0 {
            return Row { lo: 0, terms: vec![1.0] };
        }
        if x >= 1.0 {
            return Row { lo: k, terms: vec![1.0] };
        }
        if k <= DIRECT_MAX_K {
            return Row { lo: 0, terms: direct(k, x) };
        }
        walk(k, x)
    }

    pub(crate) fn hi(&self) -> u32 {
        self.lo + self.terms.len() as u32 - 1
    }

    pub(crate) fn at(&self, u: u32) -> f64 {
        if u < self.lo || u > self.hi() {
            0.0
        } else {
            self.terms[(u - self.lo) as usize]
        }
    }

    /// `P(U >= r)`, summing whichever tail is shorter.
    pub(crate) fn upper_tail(&self, r: u32) -> f64 {
        if r <= self.lo {
            return 1.0;
        }
        if r > self.hi() {
            return 0.0;
        }
        let split = (r - self.lo) as usize;
        let mut acc = Compensated::default();
        if split * 2 >= self.terms.len() {
            self.terms[split..].iter().rev().for_each(|&t| acc.add(t));
            acc.value().min(1.0)
        } else {
            self.terms[..split].iter().for_each(|&t| acc.add(t));
            (1.0 - acc.value()).clamp(0.0, 1.0)
        }
    }
}

fn direct(k: u32, x: f64) -> Vec<f64> {
    let y = 1.0 - x;
    let mut c = 1.0f64;
    (0..=k)
        .map(|u| {
            let t = c * x.powi(u as i32) * y.powi((k - u) as i32);
            c = c * (k - u) as f64 / (u + 1) as f64;
            t
        })
        .collect()
}

fn ln_choose(k: u32, u: u32) -> f64 {
    libm::lgamma(k as f64 + 1.0) - libm::lgamma(u as f64 + 1.0) - libm::lgamma((k - u) as f64 + 1.0)
}

fn walk(k: u32, x: f64) -> Row {
    let y = 1.0 - x;
    let mode = (((k as f64 + 1.0) * x).floor() as u32).min(k);
    let peak = (ln_choose(k, mode) + mode as f64 * x.ln() + (k - mode) as f64 * y.ln()).exp();
    let odds = x / y;
    let floor = peak * CUTOFF;

    let mut up = Vec::new();
    let mut t = peak;
    let mut u = mode;
    while u < k {
        t *= (k - u) as f64 / (u + 1) as f64 * odds;
        if t < floor {
            break;
        }
        up.push(t);
        u += 1;
    }
    let mut down = Vec::new();
    let mut t = peak;
    let mut u = mode;
    while u > 0 {
        t *= u as f64 / (k - u + 1) as f64 / odds;
        if t < floor {
            break;
        }
        down.push(t);
        u -= 1;
    }
    let lo = mode - down.len() as u32;
    let mut terms = down;
    terms.reverse();
    terms.push(peak);
    terms.extend(up);
    // all terms share the lgamma error of the peak; the mass must be 1
    let mut total = Compensated::default();
    terms.iter().for_each(|&t| total.add(t));
    let total = total.value();
    terms.iter_mut().for_each(|t| *t /= total);
    Row { lo, terms }
}

fn check(k: u32, r: u32, x: f64) -> Result<()> {
    if r > k {
        return Err(Error::InvalidArgument(format!("threshold r = {r} exceeds k = {k}")));
    }
    if !(0.0..=1.0).contains(&x) {
        return Err(Error::InvalidArgument(format!("x = {x} outside [0, 1]")));
    }
    Ok(())
}

/// `phi_{k,r}(x) = P(Bin(k, x) >= r)`.
pub fn varphi(k: u32, r: u32, x: f64) -> Result<f64> {
    check(k, r, x)?;
    Ok(Row::new(k, x).upper_tail(r))
}

/// `phi'_{k,r}(x) = k P(Bin(k-1, x) = r-1)`; zero for `r = 0`.
pub fn varphi_derivative(k: u32, r: u32, x: f64) -> Result<f64> {
    check(k, r, x)?;
    if r == 0 {
        return Ok(0.0);
    }
    Ok(k as f64 * Row::new(k - 1, x).at(r - 1))
}

/// `phi''_{k,r}(x) = k (k-1) [P(Bin(k-2, x) = r-2) - P(Bin(k-2, x) = r-1)]`.
pub fn varphi_second(k: u32, r: u32, x: f64) -> Result<f64> {
    check(k, r, x)?;
    if r == 0 || k < 2 {
        return Ok(0.0);
    }
    let row = Row::new(k - 2, x);
    let left = if r >= 2 { row.at(r - 2) } else { 0.0 };
    Ok(k as f64 * (k - 1) as f64 * (left - row.at(r - 1)))
}
