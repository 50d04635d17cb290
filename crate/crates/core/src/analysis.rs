//! Exact error-transition combinatorics for one Winnow pass.
//!
//! Everything here is exact rational arithmetic over big integers. Decimal
//! conversion happens only at the presentation layer.

use num_bigint::{BigInt, BigUint};
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};

use crate::hamming::HammingParams;
use crate::{Error, Result};

/// Largest number of patterns [`brute_force_counts`] will enumerate.
pub const BRUTE_FORCE_CAP: u128 = 10_000_000;

pub fn binomial(n: usize, k: usize) -> BigUint {
    if k > n {
        return BigUint::zero();
    }
    let k = k.min(n - k);
    let mut acc = BigUint::one();
    for i in 0..k {
        acc *= BigUint::from(n - i);
        acc /= BigUint::from(i + 1);
    }
    acc
}

pub fn ratio(num: &BigUint, den: &BigUint) -> BigRational {
    BigRational::new(BigInt::from(num.clone()), BigInt::from(den.clone()))
}

pub fn ratio_usize(num: usize, den: usize) -> BigRational {
    BigRational::new(BigInt::from(num), BigInt::from(den))
}

pub fn to_f64(r: &BigRational) -> f64 {
    r.to_f64().unwrap_or(f64::NAN)
}

/// `p/q` rendering of an exact value (integers print without a denominator).
pub fn fraction_string(r: &BigRational) -> String {
    if r.denom().is_one() {
        r.numer().to_string()
    } else {
        format!("{}/{}", r.numer(), r.denom())
    }
}

/// Numbers of weight-`n_i` error patterns in `n_h` bits whose syndrome is zero
/// and nonzero.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SyndromeZeroCounts {
    pub n_h: usize,
    pub n_i: usize,
    pub count_zero: BigUint,
    pub count_nonzero: BigUint,
}

impl SyndromeZeroCounts {
    pub fn total(&self) -> BigUint {
        &self.count_zero + &self.count_nonzero
    }

    /// `Pi_{S_d=0}`: probability a uniformly random weight-`n_i` pattern goes undetected.
    pub fn prob_zero(&self) -> BigRational {
        ratio(&self.count_zero, &self.total())
    }

    /// `Pi_{S_d!=0}`.
    pub fn prob_nonzero(&self) -> BigRational {
        ratio(&self.count_nonzero, &self.total())
    }
}

fn check_counts_args(n_h: usize, n_i: usize) -> Result<()> {
    HammingParams::from_hamming_length(n_h)?;
    if n_i > n_h {
        return Err(Error::ErrorCountOutOfRange { n_i, n: n_h });
    }
    Ok(())
}

/// Solves the 2x2 system
///
/// ```text
///  N_nz + N_z       = C(n_h, n_i)
/// -N_nz + n_h * N_z = (-1)^q * n_h * C((n_h - 1)/2, p),   q = ceil(n_i/2), p = floor(n_i/2)
/// ```
///
/// in exact integers. This is the weight distribution of the Hamming code.
pub fn count_syndrome_zero(n_h: usize, n_i: usize) -> Result<SyndromeZeroCounts> {
    check_counts_args(n_h, n_i)?;
    let q = n_i.div_ceil(2);
    let p = n_i / 2;
    let total = BigInt::from(binomial(n_h, n_i));
    let mut rhs = BigInt::from(n_h) * BigInt::from(binomial((n_h - 1) / 2, p));
    if q % 2 == 1 {
        rhs = -rhs;
    }
    // (n_h + 1) * N_z = C + rhs
    let (zero, rem) = (&total + &rhs).div_rem(&BigInt::from(n_h + 1));
    if !rem.is_zero() || zero.sign() == num_bigint::Sign::Minus {
        return Err(Error::InvariantViolation(format!(
            "syndrome-zero system has no nonnegative integer solution at ({n_h}, {n_i})"
        )));
    }
    let nonzero = &total - &zero;
    Ok(SyndromeZeroCounts {
        n_h,
        n_i,
        count_zero: zero.to_biguint().expect("nonnegative"),
        count_nonzero: nonzero.to_biguint().expect("nonnegative"),
    })
}

/// Visits every `n`-bit mask of weight `k` (Gosper's hack), up to `n = 127`.
pub(crate) fn for_each_weight_mask(n: usize, k: usize, mut f: impl FnMut(u128)) {
    if k > n {
        return;
    }
    if k == 0 {
        f(0);
        return;
    }
    let total = binomial(n, k).to_u128().expect("pattern count fits u128");
    let mut x: u128 = (1u128 << k) - 1;
    for i in 0..total {
        f(x);
        if i + 1 == total {
            break;
        }
        let c = x & x.wrapping_neg();
        let r = x + c;
        x = (((r ^ x) >> 2) / c) | r;
    }
}

/// Syndrome of an error mask whose bit `j - 1` is Hamming position `j`.
pub(crate) fn mask_syndrome(mut mask: u128) -> u32 {
    let mut s = 0u32;
    while mask != 0 {
        let tz = mask.trailing_zeros();
        s ^= tz + 1;
        mask &= mask - 1;
    }
    s
}

/// Enumerates every weight-`n_i` pattern and tallies zero/nonzero syndromes.
pub fn brute_force_counts(n_h: usize, n_i: usize) -> Result<SyndromeZeroCounts> {
    check_counts_args(n_h, n_i)?;
    let patterns = binomial(n_h, n_i).to_u128().unwrap_or(u128::MAX);
    if patterns > BRUTE_FORCE_CAP {
        return Err(Error::EnumerationCapExceeded {
            patterns,
            cap: BRUTE_FORCE_CAP,
        });
    }
    let mut zero = 0u64;
    let mut nonzero = 0u64;
    for_each_weight_mask(n_h, n_i, |mask| {
        if mask_syndrome(mask) == 0 {
            zero += 1;
        } else {
            nonzero += 1;
        }
    });
    Ok(SyndromeZeroCounts {
        n_h,
        n_i,
        count_zero: zero.into(),
        count_nonzero: nonzero.into(),
    })
}

/// Direction of the error-count change under a Hamming correction, conditioned
/// on a nonzero syndrome difference.
#[derive(Debug, Clone, PartialEq)]
pub struct ConditionalTransition {
    pub n_h: usize,
    pub n_i: usize,
    pub prob_up_given_nonzero: BigRational,
    pub prob_down_given_nonzero: BigRational,
}

/// Ways for a weight-`n_i` pattern to move up by one: each weight-`(n_i+1)`
/// zero-syndrome pattern is reached from exactly `n_i + 1` of them.
fn ways_up(n_h: usize, n_i: usize) -> Result<BigUint> {
    if n_i + 1 > n_h {
        return Ok(BigUint::zero());
    }
    Ok(count_syndrome_zero(n_h, n_i + 1)?.count_zero * BigUint::from(n_i + 1))
}

pub fn conditional_transition(n_h: usize, n_i: usize) -> Result<ConditionalTransition> {
    let counts = count_syndrome_zero(n_h, n_i)?;
    if counts.count_nonzero.is_zero() {
        return Err(Error::UndefinedConditional { n_h, n_i });
    }
    let up = ratio(&ways_up(n_h, n_i)?, &counts.count_nonzero);
    let down = BigRational::one() - &up;
    Ok(ConditionalTransition {
        n_h,
        n_i,
        prob_up_given_nonzero: up,
        prob_down_given_nonzero: down,
    })
}

/// The unconditional reading: `n+ = N_z(n_i) + (n_i+1) N_z(n_i+1)` over
/// `C(n_h, n_i)`. Kept for comparison only; nothing downstream uses it.
#[derive(Debug, Clone, PartialEq)]
pub struct UnconditionalTransition {
    pub n_h: usize,
    pub n_i: usize,
    pub ways_up: BigUint,
    pub ways_down: BigInt,
    pub prob_up: BigRational,
    pub prob_down: BigRational,
}

pub fn unconditional_transition(n_h: usize, n_i: usize) -> Result<UnconditionalTransition> {
    let counts = count_syndrome_zero(n_h, n_i)?;
    let up = &counts.count_zero + ways_up(n_h, n_i)?;
    let total = counts.total();
    let down = BigInt::from(total.clone()) - BigInt::from(up.clone());
    let prob_up = ratio(&up, &total);
    let prob_down = BigRational::one() - &prob_up;
    Ok(UnconditionalTransition {
        n_h,
        n_i,
        ways_up: up,
        ways_down: down,
        prob_up,
        prob_down,
    })
}

/// Zero-syndrome (codeword) counts split by weight on the payload positions.
///
/// `table[u][r]` is the number of codewords of total weight `u` with `r` ones
/// outside the `{2^j}` positions. Codeword payload bits are free; the `{2^j}`
/// bits are fixed by the payload syndrome, so a DP over payload positions with
/// the running syndrome as state enumerates them exactly.
pub fn payload_split_enumerator(params: HammingParams) -> Vec<Vec<BigUint>> {
    let n_h = params.n_h();
    let k = params.k();
    let states = 1usize << params.m();
    // dp[s][r]: payload prefixes with syndrome s and r ones.
    let mut dp = vec![vec![BigUint::zero(); k + 1]; states];
    dp[0][0] = BigUint::one();
    for pos in (1..=n_h).filter(|p| !p.is_power_of_two()) {
        let mut next = dp.clone();
        for s in 0..states {
            for r in 0..k {
                if dp[s][r].is_zero() {
                    continue;
                }
                let add = dp[s][r].clone();
                next[s ^ pos][r + 1] += add;
            }
        }
        dp = next;
    }
    let mut table = vec![vec![BigUint::zero(); k + 1]; n_h + 1];
    for (s, row) in dp.iter().enumerate() {
        let pm_weight = s.count_ones() as usize;
        for (r, count) in row.iter().enumerate() {
            if !count.is_zero() {
                table[r + pm_weight][r] += count;
            }
        }
    }
    table
}

/// Result of applying the Hamming step to a uniformly random weight-`w`
/// pattern in `n_h` bits, after a parity mismatch triggered it.
#[derive(Debug, Clone, PartialEq)]
pub struct HammingOutcome {
    pub weight: usize,
    pub prob_stay: BigRational,
    pub prob_up: BigRational,
    pub prob_down: BigRational,
    pub mean_final_weight: BigRational,
    /// Expected errors left on the payload positions once `{2^j}` are dropped.
    pub mean_final_payload_errors: BigRational,
}

/// Exact outcome tables for every `w` in `0..=n_h`.
pub fn hamming_outcomes(params: HammingParams) -> Result<Vec<HammingOutcome>> {
    let n_h = params.n_h();
    let split = payload_split_enumerator(params);
    let payload_sum: Vec<BigUint> = split
        .iter()
        .map(|row| {
            row.iter()
                .enumerate()
                .map(|(r, c)| c * BigUint::from(r))
                .sum()
        })
        .collect();
    (0..=n_h)
        .map(|w| {
            let counts = count_syndrome_zero(n_h, w)?;
            let total = counts.total();
            let prob_stay = counts.prob_zero();
            let (prob_up, prob_down) = match conditional_transition(n_h, w) {
                Ok(t) => {
                    let nz = counts.prob_nonzero();
                    (
                        &nz * t.prob_up_given_nonzero,
                        nz * t.prob_down_given_nonzero,
                    )
                }
                Err(Error::UndefinedConditional { .. }) => {
                    (BigRational::zero(), BigRational::zero())
                }
                Err(e) => return Err(e),
            };
            let mean_final_weight =
                BigRational::from_integer(BigInt::from(w)) + &prob_up - &prob_down;

            // Each final codeword c is reached from: itself (weight w), from
            // w + 1 patterns if |c| = w + 1, and from n_h - w + 1 patterns if |c| = w - 1.
            let mut payload = payload_sum[w].clone();
            if w < n_h {
                payload += &payload_sum[w + 1] * BigUint::from(w + 1);
            }
            if w > 0 {
                payload += &payload_sum[w - 1] * BigUint::from(n_h - w + 1);
            }
            Ok(HammingOutcome {
                weight: w,
                prob_stay,
                prob_up,
                prob_down,
                mean_final_weight,
                mean_final_payload_errors: ratio(&payload, &total),
            })
        })
        .collect()
}

/// One row of the per-block transition table for `n_i` initial errors in an
/// `N`-bit Winnow block.
#[derive(Debug, Clone, PartialEq)]
pub struct TransitionRow {
    pub n_i: usize,
    pub p_plus1: BigRational,
    pub p_zero: BigRational,
    pub p_minus1: BigRational,
    pub p_minus2: BigRational,
    /// Mean change contributed when the discarded parity bit was correct.
    pub mean_change_kept: BigRational,
    /// Mean change contributed when the discarded parity bit was in error.
    pub mean_change_discarded: BigRational,
    /// Expected errors after the parity bit is discarded.
    pub nf_p: BigRational,
    /// ... and after Hamming correction.
    pub nf_ph: BigRational,
    /// ... and after the `{2^j}` bits are discarded.
    pub nf_final: BigRational,
    /// Bits remaining in the block at the end of the pass.
    pub n_f: usize,
    pub pf_p: BigRational,
    pub pf_ph: BigRational,
    pub p_f: BigRational,
}

impl TransitionRow {
    pub fn mean_change(&self) -> BigRational {
        &self.nf_ph - BigRational::from_integer(BigInt::from(self.n_i))
    }

    pub fn probability_sum(&self) -> BigRational {
        &self.p_plus1 + &self.p_zero + &self.p_minus1 + &self.p_minus2
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TransitionTable {
    pub params: HammingParams,
    pub rows: Vec<TransitionRow>,
}

impl TransitionTable {
    pub fn nf_final_f64(&self) -> Vec<f64> {
        self.rows.iter().map(|r| to_f64(&r.nf_final)).collect()
    }

    pub fn row(&self, n_i: usize) -> &TransitionRow {
        &self.rows[n_i]
    }
}

pub fn transition_table(params: HammingParams) -> Result<TransitionTable> {
    let n = params.n();
    let n_h = params.n_h();
    let m = params.m() as usize;
    let outcomes = hamming_outcomes(params)?;
    let zero = BigRational::zero;
    let int = |x: usize| BigRational::from_integer(BigInt::from(x));

    let rows = (0..=n)
        .map(|n_i| {
            // Probability the discarded first bit carried one of the errors.
            let pi_y = ratio_usize(n_i, n);
            let pi_n = BigRational::one() - &pi_y;
            let nf_p = int(n_i) * ratio_usize(n - 1, n);

            if n_i % 2 == 0 {
                // Parities agree: no syndrome exchange, only the first bit goes.
                let nf = nf_p.clone();
                let pf = &nf / int(n - 1);
                return TransitionRow {
                    n_i,
                    p_plus1: zero(),
                    p_zero: pi_n.clone(),
                    p_minus1: pi_y.clone(),
                    p_minus2: zero(),
                    mean_change_kept: zero(),
                    mean_change_discarded: -pi_y,
                    nf_p,
                    nf_ph: nf.clone(),
                    nf_final: nf,
                    n_f: n - 1,
                    pf_p: pf.clone(),
                    pf_ph: pf.clone(),
                    p_f: pf,
                };
            }

            // n_i odd implies 1 <= n_i <= n_h.
            let kept = &outcomes[n_i];
            let disc = &outcomes[n_i - 1];
            let p_plus1 = &pi_n * &kept.prob_up;
            let p_zero = &pi_n * &kept.prob_stay + &pi_y * &disc.prob_up;
            let p_minus1 = &pi_n * &kept.prob_down + &pi_y * &disc.prob_stay;
            let p_minus2 = &pi_y * &disc.prob_down;
            let mean_change_kept = &pi_n * (&kept.prob_up - &kept.prob_down);
            let mean_change_discarded = &pi_y * (&disc.prob_up - &disc.prob_down) - &pi_y;
            let mean_change = &p_plus1 - &p_minus1 - int(2) * &p_minus2;
            let nf_ph = int(n_i) + mean_change;
            let nf_final =
                &pi_n * &kept.mean_final_payload_errors + &pi_y * &disc.mean_final_payload_errors;
            let n_f = n - m - 1;
            debug_assert_eq!(n_f, params.k());
            TransitionRow {
                n_i,
                pf_p: &nf_p / int(n_h),
                pf_ph: &nf_ph / int(n_h),
                p_f: &nf_final / int(n_f),
                p_plus1,
                p_zero,
                p_minus1,
                p_minus2,
                mean_change_kept,
                mean_change_discarded,
                nf_p,
                nf_ph,
                nf_final,
                n_f,
            }
        })
        .collect();
    Ok(TransitionTable { params, rows })
}
