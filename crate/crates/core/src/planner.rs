//! Operating decisions: estimating `p0` from a parity census, the secure
//! yield left after privacy amplification, and schedule search.
//!
//! Yield models charge Eve's information linearly in `p0`:
//!
//! - BB84 with Breidbart-basis intercept-resend: every 1/4 error rate buys
//!   Eve 0.59 of the key, so `nu = mu - 0.59 * 4 * p0`.
//! - Generic individual attacks: `nu = mu - 2 sqrt(2) p0`.
//! - Worst case: `nu = mu - 4 p0`.
//!
//! A schedule is feasible at `p0` when its final error rate is at most the
//! target and it leaves a positive yield.

use std::collections::HashMap;
use std::f64::consts::SQRT_2;
use std::fmt::{self, Write as _};
use std::str::FromStr;
use std::sync::Mutex;

use rayon::prelude::*;

use crate::efficiency::{odd_parity_probability, WinnowPassModel};
use crate::hamming::HammingParams;
use crate::protocol::{binary_pass, LeakLedger};
use crate::schedule::{Schedule, BLOCK_SIZES};
use crate::simulator::{generate_pair, trial_seed, ErrorKind, ErrorModel};
use crate::{Error, Result};

/// Fraction of the key a Breidbart-basis attack reveals.
pub const BREIDBART_INFORMATION: f64 = 0.59;
/// Error rate such an attack induces is 1/4.
pub const BREIDBART_ERRORS_PER_ATTACK: f64 = 4.0;
pub const GENERIC_FACTOR: f64 = 2.0 * SQRT_2;
pub const WORST_CASE_FACTOR: f64 = 4.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EveModel {
    Bb84Breidbart,
    Generic,
    WorstCase,
}

impl EveModel {
    pub const ALL: [EveModel; 3] = [
        EveModel::Bb84Breidbart,
        EveModel::Generic,
        EveModel::WorstCase,
    ];

    /// Key fraction lost to privacy amplification per unit of `p0`.
    pub fn leak_factor(self) -> f64 {
        match self {
            EveModel::Bb84Breidbart => BREIDBART_INFORMATION * BREIDBART_ERRORS_PER_ATTACK,
            EveModel::Generic => GENERIC_FACTOR,
            EveModel::WorstCase => WORST_CASE_FACTOR,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            EveModel::Bb84Breidbart => "bb84",
            EveModel::Generic => "generic",
            EveModel::WorstCase => "worst",
        }
    }
}

impl fmt::Display for EveModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for EveModel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "bb84" => Ok(EveModel::Bb84Breidbart),
            "generic" => Ok(EveModel::Generic),
            "worst" => Ok(EveModel::WorstCase),
            other => Err(Error::Parameter(format!(
                "unknown eavesdropper model '{other}'"
            ))),
        }
    }
}

/// Secure fraction left; negative means no secret key survives.
pub fn secure_yield(mu: f64, p0: f64, model: EveModel) -> f64 {
    mu - model.leak_factor() * p0
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum P0Estimate {
    Estimate(f64),
    /// Half or more of the blocks disagree: indistinguishable from `p0 = 0.5`.
    Saturated,
}

/// Inverts `M_odd / M_total = (1 - (1 - 2 p0)^N) / 2`.
pub fn estimate_p0(m_odd: u64, m_total: u64, n: usize) -> Result<P0Estimate> {
    if m_total == 0 || m_odd > m_total {
        return Err(Error::Parameter(format!(
            "census {m_odd} odd of {m_total} blocks"
        )));
    }
    if n == 0 {
        return Err(Error::InvalidBlockSize(n));
    }
    Ok(estimate_from_fraction(m_odd as f64 / m_total as f64, n))
}

/// Inversion for an odd-block fraction `f` in `[0, 1]`.
pub fn estimate_from_fraction(f: f64, n: usize) -> P0Estimate {
    if f >= 0.5 {
        return P0Estimate::Saturated;
    }
    P0Estimate::Estimate((1.0 - (1.0 - 2.0 * f).powf(1.0 / n as f64)) / 2.0)
}

/// Upper bound on passes per block size, `{j_8, ..., j_128}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SearchBounds {
    pub max_passes: [u32; 5],
}

impl SearchBounds {
    pub const fn uniform(j: u32) -> Self {
        Self { max_passes: [j; 5] }
    }
}

impl Default for SearchBounds {
    fn default() -> Self {
        Self::uniform(6)
    }
}

impl fmt::Display for SearchBounds {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let b = self.max_passes;
        write!(f, "{},{},{},{},{}", b[0], b[1], b[2], b[3], b[4])
    }
}

/// What one pass at a given block size does to a key with error rate `p`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PassEffect {
    pub p_after: f64,
    /// Fraction of the key kept.
    pub keep: f64,
    /// Revealed bits not paid for by discards, per bit entering the pass.
    pub debt: f64,
}

pub trait PassEvaluator: Sync {
    fn effect(&self, params: HammingParams, p: f64) -> Result<PassEffect>;
}

/// The exact binomial-ensemble Winnow model.
#[derive(Debug, Clone, Copy, Default)]
pub struct WinnowEvaluator;

impl PassEvaluator for WinnowEvaluator {
    fn effect(&self, params: HammingParams, p: f64) -> Result<PassEffect> {
        let step = WinnowPassModel::cached(params).evaluate(p);
        Ok(PassEffect {
            p_after: step.p_n,
            keep: step.mu,
            debt: 0.0,
        })
    }
}

/// BINARY without privacy maintenance, measured by running the protocol on
/// a planted-error key. Every revealed parity is deferred to privacy
/// amplification.
///
/// Input rates are snapped to a logarithmic grid (`GRID_STEPS` points per
/// e-fold) and each grid point is simulated once with a seed derived from the
/// point, so evaluations are deterministic and shared across searches.
#[derive(Debug)]
pub struct BinaryEvaluator {
    bits: usize,
    seed: u64,
    cache: Mutex<HashMap<(u32, i64), PassEffect>>,
}

impl BinaryEvaluator {
    pub const DEFAULT_BITS: usize = 1_000_000;
    pub const DEFAULT_SEED: u64 = 0x5EED_B1A4;
    pub const GRID_STEPS: f64 = 200.0;

    pub fn new(bits: usize, seed: u64) -> Self {
        Self {
            bits,
            seed,
            cache: Mutex::new(HashMap::new()),
        }
    }

    /// Grid point used for rate `p > 0`.
    pub fn grid_point(p: f64) -> (i64, f64) {
        let key = (p.ln() * Self::GRID_STEPS).round() as i64;
        (key, (key as f64 / Self::GRID_STEPS).exp().min(0.5))
    }

    fn simulate(&self, params: HammingParams, key: i64, p: f64) -> Result<PassEffect> {
        let seed = trial_seed(self.seed ^ u64::from(params.m()), key as u64);
        let model = ErrorModel {
            kind: ErrorKind::Binomial { p0: p },
            seed,
        };
        let (alice, bob) = generate_pair(self.bits, &model)?;
        let mut ledger = LeakLedger::new();
        let (a, b) = binary_pass(&alice, &bob, params, &mut ledger, false)?;
        Ok(PassEffect {
            p_after: a.error_count(&b) as f64 / a.len() as f64,
            keep: 1.0,
            debt: ledger.total_deferred() as f64 / alice.len() as f64,
        })
    }
}

impl Default for BinaryEvaluator {
    fn default() -> Self {
        Self::new(Self::DEFAULT_BITS, Self::DEFAULT_SEED)
    }
}

impl PassEvaluator for BinaryEvaluator {
    fn effect(&self, params: HammingParams, p: f64) -> Result<PassEffect> {
        if p <= 0.0 {
            return Ok(PassEffect {
                p_after: 0.0,
                keep: 1.0,
                debt: 1.0 / params.n() as f64,
            });
        }
        let (key, grid_p) = Self::grid_point(p);
        if let Some(hit) = self
            .cache
            .lock()
            .expect("cache lock")
            .get(&(params.m(), key))
        {
            return Ok(*hit);
        }
        let effect = self.simulate(params, key, grid_p)?;
        self.cache
            .lock()
            .expect("cache lock")
            .insert((params.m(), key), effect);
        Ok(effect)
    }
}

/// Expected BINARY effect under the binomial assumption: every odd block
/// loses exactly one error and reveals `1 + log2 N` parities.
pub fn binary_effect_estimate(params: HammingParams, p: f64) -> PassEffect {
    let n = params.n() as f64;
    let odd = odd_parity_probability(params.n(), p);
    PassEffect {
        p_after: p - odd / n,
        keep: 1.0,
        debt: (1.0 + params.m() as f64 * odd) / n,
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Plan {
    pub schedule: Schedule,
    pub mu: f64,
    /// Deferred revealed bits per initial bit.
    pub debt: f64,
    pub nu: f64,
    pub p_final: f64,
}

impl Plan {
    fn beats(&self, other: &Plan) -> bool {
        if self.nu != other.nu {
            return self.nu > other.nu;
        }
        let (a, b) = (self.schedule.total_passes(), other.schedule.total_passes());
        if a != b {
            return a < b;
        }
        self.schedule.counts() < other.schedule.counts()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Optimization {
    Feasible(Plan),
    /// No schedule within bounds reaches the target with positive yield.
    Infeasible,
}

impl Optimization {
    pub fn plan(&self) -> Option<&Plan> {
        match self {
            Optimization::Feasible(p) => Some(p),
            Optimization::Infeasible => None,
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct State {
    p: f64,
    mu: f64,
    debt: f64,
    counts: [u32; 5],
}

impl State {
    fn nu(&self, p0: f64, model: EveModel) -> f64 {
        secure_yield(self.mu - self.debt, p0, model)
    }

    fn apply(&self, evaluator: &dyn PassEvaluator, level: usize) -> Result<State> {
        let params = HammingParams::from_block_size(BLOCK_SIZES[level])?;
        let e = evaluator.effect(params, self.p)?;
        let mut counts = self.counts;
        counts[level] += 1;
        Ok(State {
            p: e.p_after,
            mu: self.mu * e.keep,
            debt: self.debt + self.mu * e.debt,
            counts,
        })
    }
}

struct Search<'a> {
    p0: f64,
    model: EveModel,
    target: f64,
    bounds: SearchBounds,
    evaluator: &'a dyn PassEvaluator,
    first_only: bool,
}

impl Search<'_> {
    /// Depth-first over `j_N` for `N` at `level` and above. Passes only ever
    /// lower the yield, so a prefix already below the incumbent is cut.
    fn walk(&self, level: usize, state: State, best: &mut Option<Plan>) -> Result<()> {
        if state.nu(self.p0, self.model) <= 0.0 {
            return Ok(());
        }
        if let Some(b) = best {
            if state.nu(self.p0, self.model) < b.nu || self.first_only {
                return Ok(());
            }
        }
        if level == BLOCK_SIZES.len() {
            if state.p <= self.target {
                let plan = Plan {
                    schedule: Schedule::new(state.counts),
                    mu: state.mu,
                    debt: state.debt,
                    nu: state.nu(self.p0, self.model),
                    p_final: state.p,
                };
                if best.as_ref().is_none_or(|b| plan.beats(b)) {
                    *best = Some(plan);
                }
            }
            return Ok(());
        }
        let mut s = state;
        for j in 0..=self.bounds.max_passes[level] {
            if j > 0 {
                s = s.apply(self.evaluator, level)?;
            }
            self.walk(level + 1, s, best)?;
        }
        Ok(())
    }

    fn run(&self) -> Result<Optimization> {
        let root = State {
            p: self.p0,
            mu: 1.0,
            debt: 0.0,
            counts: [0; 5],
        };
        // Top-level prefixes are independent; results are reduced in prefix order.
        let mut prefixes = vec![root];
        for _ in 0..self.bounds.max_passes[0] {
            let next = prefixes.last().unwrap().apply(self.evaluator, 0)?;
            prefixes.push(next);
        }
        let found = prefixes
            .into_par_iter()
            .map(|s| {
                let mut best = None;
                self.walk(1, s, &mut best).map(|_| best)
            })
            .collect::<Result<Vec<_>>>()?;
        let mut best: Option<Plan> = None;
        for plan in found.into_iter().flatten() {
            if best.as_ref().is_none_or(|b| plan.beats(b)) {
                best = Some(plan);
            }
        }
        Ok(best.map_or(Optimization::Infeasible, Optimization::Feasible))
    }
}

fn check_inputs(p0: f64, target: f64) -> Result<()> {
    if !(0.0..=0.5).contains(&p0) {
        return Err(Error::Parameter(format!("p0 = {p0} outside [0, 0.5]")));
    }
    if target.is_nan() || target <= 0.0 {
        return Err(Error::Parameter(format!(
            "target error {target} must be positive"
        )));
    }
    Ok(())
}

/// Best schedule within `bounds` under an arbitrary pass model.
pub fn optimize_with(
    evaluator: &dyn PassEvaluator,
    p0: f64,
    model: EveModel,
    target: f64,
    bounds: SearchBounds,
) -> Result<Optimization> {
    check_inputs(p0, target)?;
    Search {
        p0,
        model,
        target,
        bounds,
        evaluator,
        first_only: false,
    }
    .run()
}

/// Exhaustive Winnow schedule search: the feasible schedule with the largest
/// yield, ties going to fewer passes and then the lexicographically smaller
/// schedule.
pub fn optimize_schedule(
    p0: f64,
    model: EveModel,
    target: f64,
    bounds: SearchBounds,
) -> Result<Optimization> {
    optimize_with(&WinnowEvaluator, p0, model, target, bounds)
}

fn any_feasible(
    evaluator: &dyn PassEvaluator,
    p0: f64,
    model: EveModel,
    target: f64,
    bounds: SearchBounds,
) -> Result<bool> {
    let search = Search {
        p0,
        model,
        target,
        bounds,
        evaluator,
        first_only: true,
    };
    let mut best = None;
    search.walk(
        0,
        State {
            p: p0,
            mu: 1.0,
            debt: 0.0,
            counts: [0; 5],
        },
        &mut best,
    )?;
    Ok(best.is_some())
}

#[derive(Debug, Clone, PartialEq)]
pub struct MaxP0 {
    pub protocol: &'static str,
    pub model: EveModel,
    pub target: f64,
    pub bounds: SearchBounds,
    pub tolerance: f64,
    pub p0_max: f64,
    /// Optimal plan at `p0_max`.
    pub plan: Plan,
}

impl MaxP0 {
    pub fn render(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "protocol: {}", self.protocol);
        let _ = writeln!(s, "model: {}", self.model);
        let _ = writeln!(s, "p0_max: {:.6}", self.p0_max);
        let _ = writeln!(s, "schedule: {}", self.plan.schedule);
        let _ = writeln!(s, "mu: {:.6}", self.plan.mu);
        let _ = writeln!(s, "deferred: {:.6}", self.plan.debt);
        let _ = writeln!(s, "nu: {:.6}", self.plan.nu);
        let _ = writeln!(s, "p_final: {:.6e}", self.plan.p_final);
        let _ = writeln!(s, "target_error: {:e}", self.target);
        let _ = writeln!(s, "search_bounds: {}", self.bounds);
        let _ = writeln!(s, "tolerance: {:e}", self.tolerance);
        s
    }
}

/// Largest `p0` at which some schedule is feasible, by bisection on [0, 0.5].
pub fn max_p0_with(
    evaluator: &dyn PassEvaluator,
    protocol: &'static str,
    model: EveModel,
    target: f64,
    bounds: SearchBounds,
    tolerance: f64,
) -> Result<MaxP0> {
    check_inputs(0.0, target)?;
    if tolerance.is_nan() || tolerance <= 0.0 {
        return Err(Error::Parameter(format!(
            "tolerance {tolerance} must be positive"
        )));
    }
    let (mut lo, mut hi) = (0.0, 0.5);
    if any_feasible(evaluator, hi, model, target, bounds)? {
        lo = hi;
    }
    while hi - lo > tolerance {
        let mid = 0.5 * (lo + hi);
        if any_feasible(evaluator, mid, model, target, bounds)? {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let plan = match optimize_with(evaluator, lo, model, target, bounds)? {
        Optimization::Feasible(plan) => plan,
        Optimization::Infeasible => {
            return Err(Error::InvariantViolation(format!(
                "bisection settled on infeasible p0 = {lo}"
            )))
        }
    };
    Ok(MaxP0 {
        protocol,
        model,
        target,
        bounds,
        tolerance,
        p0_max: lo,
        plan,
    })
}

pub const MAX_P0_TOLERANCE: f64 = 1e-4;

/// Largest correctable `p0` for Winnow, to within [`MAX_P0_TOLERANCE`].
pub fn max_correctable_p0(model: EveModel, target: f64) -> Result<MaxP0> {
    max_p0_with(
        &WinnowEvaluator,
        "winnow",
        model,
        target,
        SearchBounds::default(),
        MAX_P0_TOLERANCE,
    )
}

pub const BINARY_BOUNDS: SearchBounds = SearchBounds::uniform(3);
pub const BINARY_TOLERANCE: f64 = 1e-3;

/// Largest correctable `p0` for BINARY, using simulated passes.
pub fn binary_max_p0(model: EveModel, target: f64) -> Result<MaxP0> {
    let evaluator = BinaryEvaluator::default();
    max_p0_with(
        &evaluator,
        "binary",
        model,
        target,
        BINARY_BOUNDS,
        BINARY_TOLERANCE,
    )
}

/// Structured rendering of a single-`p0` optimization.
pub fn render_optimization(
    p0: f64,
    model: EveModel,
    target: f64,
    bounds: SearchBounds,
    result: &Optimization,
) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "model: {model}");
    let _ = writeln!(s, "p0: {p0}");
    match result {
        Optimization::Feasible(plan) => {
            let _ = writeln!(s, "status: feasible");
            let _ = writeln!(s, "schedule: {}", plan.schedule);
            let _ = writeln!(s, "mu: {:.6}", plan.mu);
            let _ = writeln!(s, "nu: {:.6}", plan.nu);
            let _ = writeln!(s, "p_final: {:.6e}", plan.p_final);
        }
        Optimization::Infeasible => {
            let _ = writeln!(s, "status: infeasible");
        }
    }
    let _ = writeln!(s, "target_error: {target:e}");
    let _ = writeln!(s, "search_bounds: {bounds}");
    s
}
