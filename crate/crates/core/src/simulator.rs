//! Monte Carlo harness: planted-error key pairs pushed through complete
//! sessions.
//!
//! Seeds fan out from one master seed with SplitMix64: trial `i` uses
//! `splitmix(master + (i + 1) * GOLDEN)`. Inside a trial the same generator,
//! started at the trial seed, yields the key/error seed first, then the
//! session id, then one shuffle seed per pass. Any trial can therefore be
//! replayed on its own.

use std::fmt::{self, Write as _};

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::hamming::HammingParams;
use crate::protocol::{
    communications_per_pass, parity, shuffle, KeyString, PassOutcome, ProtocolKind, Session,
    ShufflePlan, Transcript,
};
use crate::schedule::Schedule;
use crate::{Error, Result};

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

fn mix(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// SplitMix64 stream.
#[derive(Debug, Clone)]
pub struct SeedStream {
    state: u64,
}

impl SeedStream {
    pub fn new(seed: u64) -> Self {
        Self { state: seed }
    }

    pub fn next_seed(&mut self) -> u64 {
        self.state = self.state.wrapping_add(GOLDEN);
        mix(self.state)
    }
}

/// Seed of trial `index` under `master`.
pub fn trial_seed(master: u64, index: u64) -> u64 {
    mix(master.wrapping_add(index.wrapping_add(1).wrapping_mul(GOLDEN)))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ErrorKind {
    /// Independent errors with probability `p0` per bit.
    Binomial { p0: f64 },
    /// Exactly `per_block` errors in every full `block_size` block, uniformly
    /// placed; trailing bits stay clean.
    ExactCount { per_block: usize, block_size: usize },
    /// Runs of `length` consecutive errors. A run starts at each position with
    /// probability `rate / length`, so roughly `rate` of the bits end up wrong.
    Burst { length: usize, rate: f64 },
}

impl ErrorKind {
    pub fn validate(&self) -> Result<()> {
        match *self {
            ErrorKind::Binomial { p0 } if !(0.0..=1.0).contains(&p0) => {
                Err(Error::Parameter(format!("p0 = {p0} outside [0, 1]")))
            }
            ErrorKind::ExactCount {
                per_block,
                block_size,
            } if block_size == 0 || per_block > block_size => Err(Error::Parameter(format!(
                "{per_block} errors do not fit a {block_size}-bit block"
            ))),
            ErrorKind::Burst { length: 0, .. } => {
                Err(Error::Parameter("burst length must be at least 1".into()))
            }
            ErrorKind::Burst { rate, .. } if !(0.0..=1.0).contains(&rate) => Err(Error::Parameter(
                format!("burst rate {rate} outside [0, 1]"),
            )),
            _ => Ok(()),
        }
    }
}

impl fmt::Display for ErrorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ErrorKind::Binomial { p0 } => write!(f, "binomial(p0={p0})"),
            ErrorKind::ExactCount {
                per_block,
                block_size,
            } => {
                write!(f, "exact(n={per_block} per {block_size}-bit block)")
            }
            ErrorKind::Burst { length, rate } => write!(f, "burst(length={length}, rate={rate})"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErrorModel {
    pub kind: ErrorKind,
    pub seed: u64,
}

/// Alice's bits are uniform; Bob's are Alice's XOR an error pattern from the
/// model. Deterministic in the model seed.
pub fn generate_pair(length: usize, model: &ErrorModel) -> Result<(KeyString, KeyString)> {
    if length == 0 {
        return Err(Error::Parameter("key length must be at least 1".into()));
    }
    model.kind.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(model.seed);
    let mut alice = Vec::with_capacity(length);
    while alice.len() < length {
        let word: u64 = rng.gen();
        let take = (length - alice.len()).min(64);
        alice.extend((0..take).map(|i| ((word >> i) & 1) as u8));
    }
    let mut errors = vec![0u8; length];
    match model.kind {
        ErrorKind::Binomial { p0 } => {
            for e in errors.iter_mut() {
                *e = rng.gen_bool(p0) as u8;
            }
        }
        ErrorKind::ExactCount {
            per_block,
            block_size,
        } => {
            for block in errors.chunks_exact_mut(block_size) {
                for i in sample(&mut rng, block_size, per_block) {
                    block[i] = 1;
                }
            }
        }
        ErrorKind::Burst { length: run, rate } => {
            let start = rate / run as f64;
            for i in 0..length {
                if rng.gen_bool(start) {
                    errors[i..(i + run).min(length)].fill(1);
                }
            }
        }
    }
    let bob = alice.iter().zip(&errors).map(|(a, e)| a ^ e).collect();
    Ok((KeyString::new(alice)?, KeyString::new(bob)?))
}

/// Blocks of `params.n()` bits whose parities disagree / agree (zero errors
/// counts as agreeing). Trailing bits are ignored.
pub fn census_parity(alice: &KeyString, bob: &KeyString, params: HammingParams) -> (usize, usize) {
    let n = params.n();
    let odd = alice
        .bits()
        .chunks_exact(n)
        .zip(bob.bits().chunks_exact(n))
        .filter(|(a, b)| parity(a) != parity(b))
        .count();
    (odd, alice.len().min(bob.len()) / n - odd)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProtocolChoice {
    Winnow,
    Binary { privacy_maintenance: bool },
}

impl ProtocolChoice {
    pub fn kind(&self) -> ProtocolKind {
        match self {
            ProtocolChoice::Winnow => ProtocolKind::Winnow,
            ProtocolChoice::Binary { .. } => ProtocolKind::Binary,
        }
    }
}

impl fmt::Display for ProtocolChoice {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ProtocolChoice::Winnow => f.write_str("winnow"),
            ProtocolChoice::Binary {
                privacy_maintenance,
            } => {
                write!(
                    f,
                    "binary(privacy_maintenance={})",
                    if *privacy_maintenance { "on" } else { "off" }
                )
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialConfig {
    pub length: usize,
    pub errors: ErrorKind,
    pub schedule: Schedule,
    pub protocol: ProtocolChoice,
    pub trials: usize,
    pub master_seed: u64,
    /// Public random permutation of both keys before every pass but the first.
    pub shuffle: bool,
    pub capture_transcripts: bool,
}

impl TrialConfig {
    pub fn new(length: usize, errors: ErrorKind, schedule: Schedule) -> Self {
        Self {
            length,
            errors,
            schedule,
            protocol: ProtocolChoice::Winnow,
            trials: 1,
            master_seed: 0,
            shuffle: true,
            capture_transcripts: false,
        }
    }
}

/// Mean and standard error of a sample, accumulated as sums.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SampleStats {
    pub count: u64,
    pub sum: f64,
    pub sum_sq: f64,
}

impl SampleStats {
    pub fn push(&mut self, x: f64) {
        self.count += 1;
        self.sum += x;
        self.sum_sq += x * x;
    }

    pub fn merge(&mut self, other: &SampleStats) {
        self.count += other.count;
        self.sum += other.sum;
        self.sum_sq += other.sum_sq;
    }

    pub fn mean(&self) -> f64 {
        if self.count == 0 {
            0.0
        } else {
            self.sum / self.count as f64
        }
    }

    pub fn std_error(&self) -> f64 {
        if self.count < 2 {
            return 0.0;
        }
        let n = self.count as f64;
        let var = ((self.sum_sq - self.sum * self.sum / n) / (n - 1.0)).max(0.0);
        (var / n).sqrt()
    }
}

#[derive(Debug, Clone, PartialEq)]
struct TrialOutcome {
    initial_bits: usize,
    initial_errors: usize,
    final_bits: usize,
    final_errors: usize,
    identical: bool,
    census: (usize, usize),
    revealed: usize,
    discarded: usize,
    deferred: usize,
    messages: u64,
    passes: usize,
    last_pass_blocks: SampleStats,
    transcript: Option<Transcript>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialReport {
    pub config: TrialConfig,
    pub trials: usize,
    pub initial_bits: u64,
    pub initial_error_rate: f64,
    pub final_bits: u64,
    pub final_errors: u64,
    pub final_error_rate: f64,
    /// Normal-approximation standard error over the pooled final bits.
    pub final_error_rate_stderr: f64,
    pub fraction_remaining: f64,
    pub identical_fraction: f64,
    /// Blocks of the first pass with odd / even error counts, before any pass.
    pub census_odd: u64,
    pub census_even: u64,
    pub bits_revealed: u64,
    pub bits_discarded: u64,
    pub bits_deferred: u64,
    pub messages: u64,
    pub passes: u64,
    /// Errors per block left by the last pass, over all of its blocks.
    pub last_pass_block_errors: SampleStats,
    pub transcripts: Vec<Transcript>,
}

impl TrialReport {
    /// Stable `key: value` rendering, one field per line.
    pub fn render(&self) -> String {
        let c = &self.config;
        let mut s = String::new();
        let mut line = |k: &str, v: String| {
            let _ = writeln!(s, "{k}: {v}");
        };
        line("protocol", c.protocol.to_string());
        line("error_model", c.errors.to_string());
        line("schedule", c.schedule.to_string());
        line("length", c.length.to_string());
        line("trials", self.trials.to_string());
        line("master_seed", c.master_seed.to_string());
        line("shuffle", if c.shuffle { "on" } else { "off" }.to_string());
        line("initial_bits", self.initial_bits.to_string());
        line(
            "initial_error_rate",
            format!("{:.9e}", self.initial_error_rate),
        );
        line("census_odd", self.census_odd.to_string());
        line("census_even", self.census_even.to_string());
        line("final_bits", self.final_bits.to_string());
        line("final_errors", self.final_errors.to_string());
        line("final_error_rate", format!("{:.9e}", self.final_error_rate));
        line(
            "final_error_rate_stderr",
            format!("{:.9e}", self.final_error_rate_stderr),
        );
        line(
            "fraction_remaining",
            format!("{:.9}", self.fraction_remaining),
        );
        line(
            "identical_fraction",
            format!("{:.6}", self.identical_fraction),
        );
        line("bits_revealed", self.bits_revealed.to_string());
        line("bits_discarded", self.bits_discarded.to_string());
        line("bits_deferred", self.bits_deferred.to_string());
        line("messages", self.messages.to_string());
        line("passes", self.passes.to_string());
        line(
            "last_pass_blocks",
            self.last_pass_block_errors.count.to_string(),
        );
        line(
            "last_pass_mean_block_errors",
            format!("{:.9}", self.last_pass_block_errors.mean()),
        );
        line(
            "last_pass_mean_block_errors_stderr",
            format!("{:.9}", self.last_pass_block_errors.std_error()),
        );
        s
    }
}

impl fmt::Display for TrialReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.render())
    }
}

/// Accounting rules every pass must satisfy.
pub fn check_pass(
    protocol: ProtocolChoice,
    params: HammingParams,
    length_before: usize,
    outcome: &PassOutcome,
) -> Result<()> {
    let ledger = &outcome.ledger;
    let fail = |what: String| {
        Err(Error::InvariantViolation(format!(
            "pass {}: {what}",
            ledger.pass_index
        )))
    };
    let m = params.m() as usize;
    let expected_revealed = ledger.blocks + m * ledger.mismatched_blocks;
    let expected_messages =
        communications_per_pass(protocol.kind(), params, ledger.mismatched_blocks > 0);
    if ledger.bits_revealed != expected_revealed {
        return fail(format!(
            "revealed {} bits, expected {expected_revealed}",
            ledger.bits_revealed
        ));
    }
    if ledger.messages_sent != expected_messages {
        return fail(format!(
            "{} messages, expected {expected_messages}",
            ledger.messages_sent
        ));
    }
    let expected_discarded = match protocol {
        ProtocolChoice::Winnow
        | ProtocolChoice::Binary {
            privacy_maintenance: true,
        } => expected_revealed,
        ProtocolChoice::Binary {
            privacy_maintenance: false,
        } => 0,
    };
    if ledger.bits_discarded != expected_discarded {
        return fail(format!(
            "discarded {} bits, expected {expected_discarded}",
            ledger.bits_discarded
        ));
    }
    if protocol == ProtocolChoice::Winnow && ledger.messages_sent > 2 {
        return fail(format!(
            "{} messages in a Winnow pass",
            ledger.messages_sent
        ));
    }
    let len = outcome.alice.len();
    if len != outcome.bob.len() || len + ledger.bits_discarded != length_before {
        return fail(format!(
            "length {length_before} -> {len}/{} after discarding {}",
            outcome.bob.len(),
            ledger.bits_discarded
        ));
    }
    Ok(())
}

fn run_trial(config: &TrialConfig, index: usize) -> Result<TrialOutcome> {
    let mut seeds = SeedStream::new(trial_seed(config.master_seed, index as u64));
    let model = ErrorModel {
        kind: config.errors,
        seed: seeds.next_seed(),
    };
    let session_id = seeds.next_seed();
    let (mut alice, mut bob) = generate_pair(config.length, &model)?;
    let initial_bits = alice.len();
    let initial_errors = alice.error_count(&bob);
    let passes = config.schedule.passes();
    let census = passes
        .first()
        .map(|&p| census_parity(&alice, &bob, p))
        .unwrap_or((0, 0));

    let mut session = if config.capture_transcripts {
        Session::capturing(session_id)
    } else {
        Session::new(session_id)
    };
    let (mut revealed, mut discarded, mut deferred, mut messages) = (0, 0, 0, 0u64);
    let mut last_pass_blocks = SampleStats::default();
    for (k, &params) in passes.iter().enumerate() {
        let shuffle_seed = seeds.next_seed();
        if k > 0 && config.shuffle {
            let plan = ShufflePlan::from_seed(shuffle_seed, alice.len());
            alice = shuffle(&alice, &plan)?;
            bob = shuffle(&bob, &plan)?;
        }
        let before = alice.len();
        let out = match config.protocol {
            ProtocolChoice::Winnow => session.winnow_pass(&alice, &bob, params)?,
            ProtocolChoice::Binary {
                privacy_maintenance,
            } => session.binary_pass(&alice, &bob, params, privacy_maintenance)?,
        };
        check_pass(config.protocol, params, before, &out)?;
        revealed += out.ledger.bits_revealed;
        discarded += out.ledger.bits_discarded;
        deferred += out.ledger.deferred_bits();
        messages += out.ledger.messages_sent as u64;
        if k + 1 == passes.len() {
            let mut at = 0;
            for &len in &out.block_lengths {
                let errs = out.alice.bits()[at..at + len]
                    .iter()
                    .zip(&out.bob.bits()[at..at + len])
                    .filter(|(a, b)| a != b)
                    .count();
                last_pass_blocks.push(errs as f64);
                at += len;
            }
        }
        alice = out.alice;
        bob = out.bob;
    }
    if alice.len() + discarded != initial_bits {
        return Err(Error::InvariantViolation(format!(
            "trial {index}: {initial_bits} bits in, {} out, {discarded} discarded",
            alice.len()
        )));
    }
    let transcript = config.capture_transcripts.then(|| {
        session.transcript(format!(
            "trial={index} session={session_id:#018x} schedule={} protocol={}",
            config.schedule, config.protocol
        ))
    });
    Ok(TrialOutcome {
        initial_bits,
        initial_errors,
        final_bits: alice.len(),
        final_errors: alice.error_count(&bob),
        identical: alice == bob,
        census,
        revealed,
        discarded,
        deferred,
        messages,
        passes: passes.len(),
        last_pass_blocks,
        transcript,
    })
}

/// Runs `config.trials` independent sessions in parallel and merges them in
/// trial order.
pub fn run_trials(config: &TrialConfig) -> Result<TrialReport> {
    if config.trials == 0 {
        return Err(Error::Parameter("at least one trial is required".into()));
    }
    if config.length == 0 {
        return Err(Error::Parameter("key length must be at least 1".into()));
    }
    config.errors.validate()?;
    let outcomes = (0..config.trials)
        .into_par_iter()
        .map(|i| run_trial(config, i))
        .collect::<Result<Vec<_>>>()?;

    let sum = |f: fn(&TrialOutcome) -> usize| outcomes.iter().map(|o| f(o) as u64).sum::<u64>();
    let initial_bits = sum(|o| o.initial_bits);
    let initial_errors = sum(|o| o.initial_errors);
    let final_bits = sum(|o| o.final_bits);
    let final_errors = sum(|o| o.final_errors);
    let final_error_rate = if final_bits == 0 {
        0.0
    } else {
        final_errors as f64 / final_bits as f64
    };
    let mut blocks = SampleStats::default();
    outcomes
        .iter()
        .for_each(|o| blocks.merge(&o.last_pass_blocks));
    Ok(TrialReport {
        config: config.clone(),
        trials: config.trials,
        initial_bits,
        initial_error_rate: initial_errors as f64 / initial_bits as f64,
        final_bits,
        final_errors,
        final_error_rate,
        final_error_rate_stderr: if final_bits == 0 {
            0.0
        } else {
            (final_error_rate * (1.0 - final_error_rate) / final_bits as f64).sqrt()
        },
        fraction_remaining: final_bits as f64 / initial_bits as f64,
        identical_fraction: outcomes.iter().filter(|o| o.identical).count() as f64
            / config.trials as f64,
        census_odd: sum(|o| o.census.0),
        census_even: sum(|o| o.census.1),
        bits_revealed: sum(|o| o.revealed),
        bits_discarded: sum(|o| o.discarded),
        bits_deferred: sum(|o| o.deferred),
        messages: outcomes.iter().map(|o| o.messages).sum(),
        passes: sum(|o| o.passes),
        last_pass_block_errors: blocks,
        transcripts: outcomes.into_iter().filter_map(|o| o.transcript).collect(),
    })
}
