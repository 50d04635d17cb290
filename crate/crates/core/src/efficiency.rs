//! Binomial-ensemble model of one Winnow pass and of a whole schedule.
//!
//! Errors are assumed independent with per-bit probability `p0` before every
//! pass, which is what a perfect shuffle between passes would give.

use std::sync::OnceLock;

use crate::analysis::transition_table;
use crate::hamming::{HammingParams, MAX_SYNDROME_BITS};
use crate::schedule::{Schedule, BLOCK_SIZES};
use crate::{Error, Result};

/// Compensated summation.
#[derive(Debug, Default, Clone, Copy)]
pub struct KahanSum {
    sum: f64,
    carry: f64,
}

impl KahanSum {
    pub fn add(&mut self, x: f64) {
        let y = x - self.carry;
        let t = self.sum + y;
        self.carry = (t - self.sum) - y;
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum
    }
}

fn ln_binomial(n: usize, k: usize) -> f64 {
    let k = k.min(n - k);
    let mut acc = KahanSum::default();
    for i in 0..k {
        acc.add(((n - i) as f64).ln() - ((i + 1) as f64).ln());
    }
    acc.value()
}

fn check_p0(p0: f64, upper: f64) -> Result<()> {
    if !(0.0..=upper).contains(&p0) {
        return Err(Error::Parameter(format!("p0 = {p0} outside [0, {upper}]")));
    }
    Ok(())
}

/// `C(n, n_i) p0^n_i (1 - p0)^(n - n_i)`, evaluated in log space.
pub fn binomial_pmf(n_i: usize, n: usize, p0: f64) -> Result<f64> {
    check_p0(p0, 1.0)?;
    if n_i > n {
        return Err(Error::ErrorCountOutOfRange { n_i, n });
    }
    Ok(pmf_unchecked(n_i, n, p0))
}

fn pmf_unchecked(n_i: usize, n: usize, p0: f64) -> f64 {
    if p0 == 0.0 {
        return if n_i == 0 { 1.0 } else { 0.0 };
    }
    if p0 == 1.0 {
        return if n_i == n { 1.0 } else { 0.0 };
    }
    let ln = ln_binomial(n, n_i) + n_i as f64 * p0.ln() + (n - n_i) as f64 * (-p0).ln_1p();
    ln.exp()
}

/// Probability an `n`-bit block holds an odd number of errors.
pub fn odd_parity_probability(n: usize, p0: f64) -> f64 {
    (1.0 - (1.0 - 2.0 * p0).powi(n as i32)) / 2.0
}

/// The same probability as an explicit sum over odd error counts.
pub fn odd_parity_probability_by_sum(n: usize, p0: f64) -> f64 {
    let mut acc = KahanSum::default();
    for n_i in (1..=n).step_by(2) {
        acc.add(pmf_unchecked(n_i, n, p0));
    }
    acc.value()
}

/// Per-block expected final error counts for one block size, exact values
/// converted to `f64` once.
#[derive(Debug, Clone)]
pub struct WinnowPassModel {
    params: HammingParams,
    nf_final: Vec<f64>,
}

/// Outcome of one pass over a binomial ensemble.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PassModel {
    pub params: HammingParams,
    pub p0: f64,
    /// Fraction of bits remaining after the pass.
    pub mu: f64,
    /// Per-bit error probability after the pass.
    pub p_n: f64,
}

impl WinnowPassModel {
    pub fn build(params: HammingParams) -> Result<Self> {
        let table = transition_table(params)?;
        Ok(Self {
            params,
            nf_final: table.nf_final_f64(),
        })
    }

    /// Shared model for `params`, built on first use.
    pub fn cached(params: HammingParams) -> &'static WinnowPassModel {
        static MODELS: [OnceLock<WinnowPassModel>; MAX_SYNDROME_BITS as usize + 1] =
            [const { OnceLock::new() }; MAX_SYNDROME_BITS as usize + 1];
        MODELS[params.m() as usize]
            .get_or_init(|| WinnowPassModel::build(params).expect("supported parameters"))
    }

    pub fn params(&self) -> HammingParams {
        self.params
    }

    pub fn nf_final(&self) -> &[f64] {
        &self.nf_final
    }

    pub fn evaluate(&self, p0: f64) -> PassModel {
        let n = self.params.n();
        let m = self.params.m() as f64;
        let mu = (n as f64 - 1.0 - m * odd_parity_probability(n, p0)) / n as f64;
        let mut errors = KahanSum::default();
        for (n_i, nf) in self.nf_final.iter().enumerate() {
            if *nf != 0.0 {
                errors.add(nf * pmf_unchecked(n_i, n, p0));
            }
        }
        PassModel {
            params: self.params,
            p0,
            mu,
            p_n: errors.value() / (n as f64 * mu),
        }
    }
}

/// Fraction of the key left after one pass at error rate `p0`.
pub fn pass_mu(params: HammingParams, p0: f64) -> Result<f64> {
    check_p0(p0, 0.5)?;
    Ok(WinnowPassModel::cached(params).evaluate(p0).mu)
}

/// `pass_mu` with the odd-parity probability as an explicit binomial sum.
pub fn pass_mu_by_sum(params: HammingParams, p0: f64) -> Result<f64> {
    check_p0(p0, 0.5)?;
    let n = params.n() as f64;
    Ok((n - 1.0 - params.m() as f64 * odd_parity_probability_by_sum(params.n(), p0)) / n)
}

/// Per-bit error probability after one pass at error rate `p0`.
pub fn pass_error_rate(params: HammingParams, p0: f64) -> Result<f64> {
    check_p0(p0, 0.5)?;
    Ok(WinnowPassModel::cached(params).evaluate(p0).p_n)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PassStep {
    pub block_size: usize,
    pub p_before: f64,
    pub p_after: f64,
    pub mu_step: f64,
}

/// Error rate and remaining fraction along a schedule.
#[derive(Debug, Clone, PartialEq)]
pub struct CascadeState {
    pub schedule: Schedule,
    pub p0: f64,
    pub trajectory: Vec<PassStep>,
    pub p_final: f64,
    pub mu_total: f64,
}

pub fn run_schedule(schedule: Schedule, p0: f64) -> Result<CascadeState> {
    check_p0(p0, 0.5)?;
    let mut p = p0;
    let mut mu_total = 1.0;
    let mut trajectory = Vec::with_capacity(schedule.total_passes() as usize);
    for params in schedule.passes() {
        let step = WinnowPassModel::cached(params).evaluate(p);
        trajectory.push(PassStep {
            block_size: params.n(),
            p_before: p,
            p_after: step.p_n,
            mu_step: step.mu,
        });
        mu_total *= step.mu;
        p = step.p_n;
    }
    Ok(CascadeState {
        schedule,
        p0,
        trajectory,
        p_final: p,
        mu_total,
    })
}

/// One grid point of the `p_N / p0` curves.
#[derive(Debug, Clone, PartialEq)]
pub struct FigureRow {
    pub p0: f64,
    pub ratios: Vec<f64>,
}

/// `p_N / p0` for each block size on the grid `step, 2 step, ...` strictly below 0.5.
pub fn figure_rows(block_sizes: &[usize], step: f64) -> Result<Vec<FigureRow>> {
    if !(step > 0.0 && step < 0.5) {
        return Err(Error::Parameter(format!(
            "grid step {step} outside (0, 0.5)"
        )));
    }
    let models = block_sizes
        .iter()
        .map(|&n| HammingParams::from_block_size(n).map(WinnowPassModel::cached))
        .collect::<Result<Vec<_>>>()?;
    let points = ((0.5 / step) - 1e-9).floor() as usize;
    Ok((1..=points)
        .map(|i| {
            let p0 = i as f64 * step;
            FigureRow {
                p0,
                ratios: models.iter().map(|m| m.evaluate(p0).p_n / p0).collect(),
            }
        })
        .collect())
}

/// `p0` in `(0, 0.5)` where `p_N / p0` crosses 1, located by bisection after a
/// scan for a sign change. `None` if the ratio never reaches 1 below 0.5.
pub fn ratio_crossing(params: HammingParams) -> Option<f64> {
    let model = WinnowPassModel::cached(params);
    let f = |p: f64| model.evaluate(p).p_n / p - 1.0;
    let steps = 1000;
    let mut prev = 0.5 / steps as f64;
    for i in 2..steps {
        let x = i as f64 * 0.5 / steps as f64;
        if f(prev) < 0.0 && f(x) >= 0.0 {
            let (mut lo, mut hi) = (prev, x);
            for _ in 0..60 {
                let mid = 0.5 * (lo + hi);
                if f(mid) < 0.0 {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            return Some(0.5 * (lo + hi));
        }
        prev = x;
    }
    None
}

/// Supported block sizes as parameter sets.
pub fn schedule_params() -> impl Iterator<Item = HammingParams> {
    BLOCK_SIZES
        .iter()
        .map(|&n| HammingParams::from_block_size(n).expect("fixed block sizes are valid"))
}
