//! Acceptance suite: one PASS/FAIL line per criterion, then a single verdict.
//!
//! Run with `cargo test -p winnow-qkd --test acceptance -- --nocapture` to see
//! the report.

use std::path::Path;
use std::process::Command;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Zero};

use winnow_qkd::analysis::{brute_force_counts, count_syndrome_zero, transition_table};
use winnow_qkd::efficiency::{figure_rows, run_schedule};
use winnow_qkd::planner::{
    binary_max_p0, max_correctable_p0, optimize_schedule, EveModel, SearchBounds,
};
use winnow_qkd::protocol::{winnow_pass, KeyString, LeakLedger};
use winnow_qkd::simulator::{run_trials, ErrorKind, ProtocolChoice, TrialConfig};
use winnow_qkd::{HammingParams, Schedule};

type Check = Result<String, String>;
type Criterion = (&'static str, fn() -> Check);

const TARGET: f64 = 1e-6;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn c1_syndrome_counts() -> Check {
    for m in [3, 4] {
        let n_h = (1usize << m) - 1;
        for n_i in 0..=n_h {
            let closed = count_syndrome_zero(n_h, n_i).map_err(|e| e.to_string())?;
            let brute = brute_force_counts(n_h, n_i).map_err(|e| e.to_string())?;
            ensure(closed == brute, || {
                format!("n_h={n_h} n_i={n_i}: {closed:?} vs {brute:?}")
            })?;
        }
    }
    let c = count_syndrome_zero(7, 3).map_err(|e| e.to_string())?;
    ensure(
        c.count_zero == 7u32.into() && c.count_nonzero == 28u32.into(),
        || format!("(7,3) split {}/{}", c.count_zero, c.count_nonzero),
    )?;
    Ok("m=3,4 all n_i exact; (7,3) -> 7 zero of 35".into())
}

/// Rounds half up to `printed`'s number of decimals and compares exactly.
fn matches_printed(value: &BigRational, printed: &str) -> bool {
    let decimals = printed.split_once('.').map_or(0, |(_, f)| f.len());
    let scale = BigRational::from_integer(BigInt::from(10u32).pow(decimals as u32));
    let half = BigRational::new(BigInt::one(), BigInt::from(2));
    let rounded = (value * &scale + half).floor();
    let expected = BigRational::from_integer(printed.replace('.', "").parse::<BigInt>().unwrap());
    rounded == expected
}

fn c2_tables() -> Check {
    let table = transition_table(HammingParams::new(3).unwrap()).map_err(|e| e.to_string())?;
    let reference: [(&str, [&str; 9]); 6] = [
        (
            "nf_p",
            [
                "0", "0.88", "1.75", "2.63", "3.5", "4.38", "5.25", "6.13", "7",
            ],
        ),
        (
            "nf_ph",
            ["0", "0", "1.75", "3.5", "3.5", "3.5", "5.25", "7", "7"],
        ),
        (
            "nf",
            ["0", "0", "1.75", "2.0", "3.5", "2.0", "5.25", "4", "7"],
        ),
        (
            "pf_p",
            [
                "0", "0.13", "0.25", "0.38", "0.5", "0.63", "0.75", "0.88", "1",
            ],
        ),
        (
            "pf_ph",
            ["0", "0", "0.25", "0.5", "0.5", "0.5", "0.75", "1", "1"],
        ),
        (
            "p_f",
            ["0", "0", "0.25", "0.5", "0.5", "0.5", "0.75", "1", "1"],
        ),
    ];
    for (name, printed) in reference {
        for (n_i, text) in printed.iter().enumerate() {
            let r = table.row(n_i);
            let v = match name {
                "nf_p" => &r.nf_p,
                "nf_ph" => &r.nf_ph,
                "nf" => &r.nf_final,
                "pf_p" => &r.pf_p,
                "pf_ph" => &r.pf_ph,
                _ => &r.p_f,
            };
            ensure(matches_printed(v, text), || {
                format!("{name}[{n_i}] = {v} vs {text}")
            })?;
        }
    }
    let int = |x: i64| BigRational::from_integer(BigInt::from(x));
    ensure(table.row(3).nf_final == int(2), || {
        "n_i=3 not exactly 2".into()
    })?;
    ensure(table.row(2).nf_final == int(7) / int(4), || {
        "n_i=2 not exactly 7/4".into()
    })?;
    ensure(table.row(0).nf_final.is_zero(), || "n_i=0 not zero".into())?;
    Ok("54 entries at printed precision; n_i=3 -> 2, n_i=2 -> 7/4 exactly".into())
}

fn c3_monte_carlo_table() -> Check {
    let table = transition_table(HammingParams::new(3).unwrap()).map_err(|e| e.to_string())?;
    let expected = table.nf_final_f64();
    let mut worst: f64 = 0.0;
    for (n_i, &want) in expected.iter().enumerate() {
        let kind = ErrorKind::ExactCount {
            per_block: n_i,
            block_size: 8,
        };
        let mut c = TrialConfig::new(800_000, kind, Schedule::new([1, 0, 0, 0, 0]));
        c.master_seed = 2024;
        let r = run_trials(&c).map_err(|e| e.to_string())?;
        let stats = r.last_pass_block_errors;
        ensure(stats.count >= 100_000, || {
            format!("only {} blocks", stats.count)
        })?;
        let (mean, se) = (stats.mean(), stats.std_error());
        let ok = if se == 0.0 {
            (mean - want).abs() < 1e-12
        } else {
            (mean - want).abs() <= 3.0 * se
        };
        ensure(ok, || format!("n_i={n_i}: mean {mean} vs {want} (se {se})"))?;
        if se > 0.0 {
            worst = worst.max((mean - want).abs() / se);
        }
    }
    Ok(format!(
        "10^5 blocks per n_i, largest deviation {worst:.2} sigma"
    ))
}

fn c4_single_error() -> Check {
    let mut runs = 0;
    for params in HammingParams::all() {
        let n = params.n();
        let alice: Vec<u8> = (0..n).map(|i| ((i * 7 + i / 3) % 2) as u8).collect();
        for pos in 0..n {
            let mut bob = alice.clone();
            bob[pos] ^= 1;
            let a = KeyString::new(alice.clone()).unwrap();
            let b = KeyString::new(bob).unwrap();
            let (a2, b2) =
                winnow_pass(&a, &b, params, &mut LeakLedger::new()).map_err(|e| e.to_string())?;
            ensure(a2 == b2, || format!("N={n} position {pos} left errors"))?;
            runs += 1;
        }
    }
    Ok(format!("{runs} single-error blocks, zero failures"))
}

fn c5_curves() -> Check {
    let rows = figure_rows(&[8, 16, 32, 64, 128], 0.005).map_err(|e| e.to_string())?;
    // First grid point where the ordering fails must sit within 0.01 of the bound.
    let first_failure = |a: usize, b: usize| {
        rows.iter()
            .find(|r| r.ratios[a] >= r.ratios[b])
            .map(|r| r.p0)
    };
    let f816 = first_failure(0, 1).ok_or("p8 < p16 everywhere")?;
    let f1632 = first_failure(1, 2).ok_or("p16 < p32 everywhere")?;
    ensure((f816 - 0.38).abs() <= 0.01, || {
        format!("p8 < p16 fails first at {f816}")
    })?;
    ensure((f1632 - 0.20).abs() <= 0.01, || {
        format!("p16 < p32 fails first at {f1632}")
    })?;
    let mut crossings = Vec::new();
    for (k, n) in [8, 16, 32, 64, 128].iter().enumerate() {
        let signs: Vec<bool> = rows.iter().map(|r| r.ratios[k] >= 1.0).collect();
        let changes = signs.windows(2).filter(|w| w[0] != w[1]).count();
        ensure(changes == 1 && !signs[0], || {
            format!("N={n}: {changes} crossings of 1")
        })?;
        let at = rows[signs.iter().position(|&s| s).unwrap()].p0;
        crossings.push(format!("{n}:{at:.3}"));
    }
    Ok(format!(
        "p8<p16 up to {:.3}, p16<p32 up to {:.3}; single crossings {}",
        f816 - 0.005,
        f1632 - 0.005,
        crossings.join(" ")
    ))
}

fn c6_schedules() -> Check {
    let cases = [
        (EveModel::Bb84Breidbart, 0.1322, [3, 1, 0, 1, 3], 0.0017),
        (EveModel::Generic, 0.1222, [3, 0, 1, 0, 4], 0.0017),
        (EveModel::WorstCase, 0.1037, [2, 1, 1, 0, 3], 0.0020),
    ];
    let mut notes = Vec::new();
    for (model, p0, counts, nu) in cases {
        let max = max_correctable_p0(model, TARGET).map_err(|e| e.to_string())?;
        ensure((max.p0_max - p0).abs() <= 0.002, || {
            format!("{model}: p0_max {}", max.p0_max)
        })?;
        let opt = optimize_schedule(p0, model, TARGET, SearchBounds::default())
            .map_err(|e| e.to_string())?;
        let plan = opt
            .plan()
            .ok_or_else(|| format!("{model}: infeasible at {p0}"))?;
        ensure(plan.schedule == Schedule::new(counts), || {
            format!(
                "{model}: optimum at {p0} is {} not {:?}",
                plan.schedule, counts
            )
        })?;
        let direct = run_schedule(Schedule::new(counts), p0).map_err(|e| e.to_string())?;
        ensure(direct.p_final <= TARGET, || {
            format!("{model}: schedule misses target")
        })?;
        ensure((plan.nu - nu).abs() <= 0.0005, || {
            format!("{model}: nu {} vs {nu}", plan.nu)
        })?;
        notes.push(format!(
            "{model} {:.4} {{{}}} nu={:.4}",
            max.p0_max, plan.schedule, plan.nu
        ));
    }
    Ok(notes.join("; "))
}

fn c7_binary() -> Check {
    let binary = binary_max_p0(EveModel::Bb84Breidbart, TARGET).map_err(|e| e.to_string())?;
    let winnow = max_correctable_p0(EveModel::Bb84Breidbart, TARGET).map_err(|e| e.to_string())?;
    ensure((binary.p0_max - 0.114).abs() <= 0.01, || {
        format!("BINARY p0_max {}", binary.p0_max)
    })?;
    ensure(binary.p0_max < winnow.p0_max, || {
        format!(
            "BINARY {} not below Winnow {}",
            binary.p0_max, winnow.p0_max
        )
    })?;
    Ok(format!(
        "BINARY {:.4} {{{}}} nu={:.4} < Winnow {:.4}",
        binary.p0_max, binary.plan.schedule, binary.plan.nu, winnow.p0_max
    ))
}

fn c8_accounting() -> Check {
    // run_trials checks every pass and fails with an invariant violation otherwise.
    let protocols = [
        ProtocolChoice::Winnow,
        ProtocolChoice::Binary {
            privacy_maintenance: true,
        },
        ProtocolChoice::Binary {
            privacy_maintenance: false,
        },
    ];
    let mut passes = 0;
    for protocol in protocols {
        for (p0, schedule) in [
            (0.02, [1, 1, 1, 1, 1]),
            (0.1, [3, 1, 0, 1, 3]),
            (0.0, [1, 0, 0, 0, 1]),
        ] {
            let mut c =
                TrialConfig::new(20_000, ErrorKind::Binomial { p0 }, Schedule::new(schedule));
            c.protocol = protocol;
            c.trials = 8;
            c.master_seed = 99;
            let r = run_trials(&c).map_err(|e| format!("{protocol}: {e}"))?;
            ensure(r.initial_bits == r.final_bits + r.bits_discarded, || {
                "length not conserved".into()
            })?;
            if protocol == ProtocolChoice::Winnow {
                ensure(r.messages <= 2 * r.passes, || {
                    "more than 2 messages per pass".into()
                })?;
            }
            passes += r.passes;
        }
    }
    Ok(format!("{passes} passes checked across Winnow and BINARY"))
}

fn c9_shuffle() -> Check {
    let run = |shuffle: bool| {
        let kind = ErrorKind::Burst {
            length: 8,
            rate: 0.05,
        };
        let mut c = TrialConfig::new(1 << 20, kind, Schedule::new([3, 1, 0, 1, 3]));
        c.trials = 2;
        c.master_seed = 7;
        c.shuffle = shuffle;
        run_trials(&c).map_err(|e| e.to_string())
    };
    let with = run(true)?;
    let without = run(false)?;
    // A residual of zero is floored at one error so the ratio stays finite.
    let floor = with.final_errors.max(1);
    ensure(without.final_errors >= 10 * floor, || {
        format!(
            "unshuffled {} vs shuffled {}",
            without.final_errors, with.final_errors
        )
    })?;
    Ok(format!(
        "residual errors: shuffled {} ({:.2e}), unshuffled {} ({:.2e})",
        with.final_errors, with.final_error_rate, without.final_errors, without.final_error_rate
    ))
}

fn run_cli(args: &[&str]) -> Result<(i32, Vec<u8>), String> {
    let out = Command::new(env!("CARGO_BIN_EXE_winnow"))
        .args(args)
        .output()
        .map_err(|e| e.to_string())?;
    Ok((out.status.code().unwrap_or(-1), out.stdout))
}

fn read_dir_sorted(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<_> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (
                e.file_name().to_string_lossy().into_owned(),
                std::fs::read(e.path()).unwrap(),
            )
        })
        .collect();
    files.sort();
    files
}

fn c10_determinism() -> Check {
    let commands: Vec<Vec<&str>> = vec![
        vec!["tables", "--m", "3"],
        vec!["tables", "--m", "5", "--format", "txt"],
        vec!["figure", "--step", "0.01"],
        vec!["optimize", "--p0", "0.1322", "--model", "bb84"],
        vec!["optimize", "--find-max", "--model", "worst"],
        vec![
            "optimize",
            "--p0",
            "0.08",
            "--model",
            "bb84",
            "--protocol",
            "binary",
            "--max-passes",
            "2",
        ],
        vec![
            "simulate",
            "--p0",
            "0.1",
            "--schedule",
            "3,1,0,1,3",
            "--length",
            "100000",
            "--trials",
            "3",
            "--seed",
            "5",
        ],
        vec![
            "simulate",
            "--p0",
            "0.05",
            "--N",
            "16",
            "--passes",
            "2",
            "--protocol",
            "binary",
            "--privacy-maintenance",
            "on",
            "--length",
            "5000",
            "--seed",
            "8",
        ],
    ];
    for args in &commands {
        let first = run_cli(args)?;
        let second = run_cli(args)?;
        ensure(first.0 == 0, || format!("{args:?} exited {}", first.0))?;
        ensure(first == second, || format!("{args:?} differs between runs"))?;
    }
    let dirs = [tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap()];
    let mut captured = Vec::new();
    for dir in &dirs {
        let path = dir.path().join("t");
        let out = dir.path().join("report.txt");
        let (code, _) = run_cli(&[
            "simulate",
            "--p0",
            "0.08",
            "--schedule",
            "1,1,0,0,0",
            "--length",
            "2000",
            "--trials",
            "2",
            "--seed",
            "3",
            "--capture-transcripts",
            path.to_str().unwrap(),
            "--out",
            out.to_str().unwrap(),
        ])?;
        ensure(code == 0, || format!("capture run exited {code}"))?;
        captured.push((read_dir_sorted(&path), std::fs::read(out).unwrap()));
    }
    ensure(captured[0] == captured[1], || {
        "transcripts or report differ".into()
    })?;
    Ok(format!(
        "{} commands plus transcript capture byte-identical",
        commands.len()
    ))
}

#[test]
fn acceptance() {
    let criteria: [Criterion; 10] = [
        (
            "C1 syndrome-zero closed form equals brute force",
            c1_syndrome_counts,
        ),
        ("C2 N=8 transition tables at printed precision", c2_tables),
        (
            "C3 Monte Carlo agrees with the N=8 table",
            c3_monte_carlo_table,
        ),
        ("C4 single errors always corrected", c4_single_error),
        ("C5 p_N/p0 curve ordering and crossings", c5_curves),
        ("C6 maximum p0, schedules and yields", c6_schedules),
        ("C7 BINARY maximum p0", c7_binary),
        ("C8 ledger and communication accounting", c8_accounting),
        ("C9 shuffling is necessary for burst errors", c9_shuffle),
        ("C10 CLI output is deterministic", c10_determinism),
    ];
    let mut failures = Vec::new();
    println!();
    for (name, check) in criteria {
        match check() {
            Ok(detail) => println!("PASS {name}: {detail}"),
            Err(why) => {
                println!("FAIL {name}: {why}");
                failures.push(name);
            }
        }
    }
    assert!(failures.is_empty(), "failed: {failures:?}");
}
