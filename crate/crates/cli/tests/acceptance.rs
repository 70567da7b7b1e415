//! Acceptance suite: one line per criterion, tolerances pinned below.
//!
//! Run with `cargo test -p cnl --test acceptance`. A criterion that fails
//! only for its documented reason prints `FAIL (known)` and does not fail the
//! process; any other failure does.

use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use num_bigint::BigUint;
use num_traits::{One, Signed, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use cnl_core::dimension::{
    basic_intervals, bound_substituted_logs, falconer_from_logs, falconer_lower_bound, theta_geometry,
};
use cnl_core::equidist::{aap_bound, concat_bound, star_discrepancy, verify_aap, PointSequence};
use cnl_core::expansion::transcode;
use cnl_core::io::ThetaConfig;
use cnl_core::numeric::{rat, LogScale};
use cnl_core::theta::{build_schedule, check_y_blocks, generate_digits, prefix_bound_check, BoundStatus, SelectionPolicy};
use cnl_core::Rational;

const REPRO_HORIZON: u64 = 5000;
const STREAM_LEN: u64 = 5000;
const PHI_RANGE: u64 = 36288;
const ORACLE_CASES: usize = 200;
const ORACLE_MAX_LEN: usize = 50;
const DIM_DEPTH: u64 = 2000;
const DIM_RANGE: (f64, f64) = (0.6, 0.7);
const DIM_TOL: f64 = 1e-9;
const INTERVAL_GUARD: u64 = 10_000;
/// Points past the start of level 4 in the depth-5 stream.
const LEVEL4_EXTRA: u64 = 64;

const LIMIT_REPRO: Duration = Duration::from_secs(60);
const LIMIT_SCHEDULE: Duration = Duration::from_secs(1);
const LIMIT_WINDOWS: Duration = Duration::from_secs(300);
const LIMIT_DIM: Duration = Duration::from_secs(300);

struct Verdict {
    passed: bool,
    /// The failure is exactly the documented, unmeetable part of the criterion.
    known: bool,
    detail: String,
}

fn verdict(passed: bool, detail: impl Into<String>) -> Verdict {
    Verdict { passed, known: false, detail: detail.into() }
}

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_cnl"))
}

fn schedule(depth: usize) -> cnl_core::theta::ThetaSchedule {
    let mut cfg = ThetaConfig::config_a();
    cfg.depth = depth;
    build_schedule(&cfg.chain_spec().unwrap()).unwrap()
}

fn criterion_1() -> Verdict {
    let dir = tempfile::tempdir().unwrap();
    let status = bin()
        .args(["theta", "repro-sec1", "--n", &REPRO_HORIZON.to_string(), "--out"])
        .arg(dir.path())
        .output()
        .unwrap();
    let text = std::fs::read_to_string(dir.path().join("pair_report.json")).unwrap();
    let r: serde_json::Value = serde_json::from_str(&text).unwrap();
    let q = r["q_values"]["matches"] == true;
    let x = r["x_tail"]["computed"] == serde_json::json!([2, 7, 3, 10, 17, 4, 13, 22, 31]);
    let y = r["y_p_digits"]["computed"] == "00002000204000204060";
    let enc = r["enclosure"]["all_below_half"] == true && r["enclosure"]["horizon"] == REPRO_HORIZON;
    let flags = r["flags"].as_array().map_or(0, |f| f.len());
    let erratum_x = r["x_first"]["listed"] == 2 && r["x_first"]["computed"] == 1;
    let erratum_f = r["f10_listed"] == 64 && r["f10_used"] == 48 && r["f10_listed_valid"] == false;
    let ok = status.status.code() == Some(0) && q && x && y && enc && flags == 2 && erratum_x && erratum_f;
    verdict(
        ok,
        format!(
            "Q prefix {q}, x positions 2-10 {x}, y P-digits {y}, T_(Q,n)(x) < 1/2 for n <= {REPRO_HORIZON} {enc} (max {}), {flags} errata flagged",
            r["enclosure"]["max_upper_approx"]
        ),
    )
}

fn criterion_2() -> Verdict {
    let sch = schedule(4);
    let nu_ok = sch.nu_table() == [None, Some(1), Some(9), Some(21)];
    let l_ok = sch.ell_table() == [2, 71, 9036];
    let big_l_ok = sch.big_l_table() == [2, 144, 36288];
    // integer identities checked here independently of the library's own check
    let s = sch.s_table();
    let mut ident = sch.check_invariants().is_ok();
    for j in 1..=3usize {
        let nu_next = sch.nu(j + 1).unwrap();
        // q_n = 2^(n+3) >= S_{j+1}^(2(j+1)) = 2^(2j(j+1)) first at n = 2j(j+1) - 3
        ident &= nu_next == (2 * j as u64 * (j as u64 + 1)).saturating_sub(3).max(1);
        ident &= s[j] == 2 * s[j - 1];
        let (prev, cur) = (sch.big_l(j - 1).unwrap(), sch.big_l(j).unwrap());
        ident &= cur == prev + s[j - 1] * sch.ell_table()[j - 1];
        ident &= cur % s[j] == 0;
        if j >= 2 {
            ident &= sch.ell_table()[j - 1] * s[j - 1] == prev * (2 * j as u64 * 2 * nu_next - 1);
        }
    }
    verdict(nu_ok && l_ok && big_l_ok && ident, format!("nu {nu_ok}, l {l_ok}, L {big_l_ok}, identities {ident}"))
}

fn criterion_3() -> Verdict {
    let sch = schedule(4);
    let mut phi_ok = true;
    for n in 1..=PHI_RANGE {
        let p = sch.phi_inv(n).unwrap();
        let s_i = sch.big_s(p.i).unwrap();
        phi_ok &= p.b <= sch.ell(p.i).unwrap() && p.c <= s_i && sch.phi(p.i, p.b, p.c).unwrap() == n;
    }
    let bases = sch.spec().base.prefix(STREAM_LEN).unwrap();
    let (mut omega_ok, mut literal_misses) = (true, 0);
    for n in 1..=STREAM_LEN {
        let p = sch.phi_inv(n).unwrap();
        let w = sch.omega(n).unwrap();
        let floor = &bases[n as usize - 1] / BigUint::from(p.a * p.a);
        if w < floor {
            literal_misses += 1;
            // level-1 digits are forced, so only a single candidate exists there
            omega_ok &= p.i == 1 && w.is_one();
        }
    }
    let stream = generate_digits(&sch, SelectionPolicy::Min, STREAM_LEN).unwrap();
    let mut nonzero = true;
    for j in 1..=4 {
        let coarse = transcode(&stream, sch.spec(), j).unwrap();
        nonzero &= !coarse.is_empty() && coarse.digits().iter().all(|d| !d.is_zero());
    }
    let rest = phi_ok && omega_ok && nonzero;
    Verdict {
        passed: rest && literal_misses == 0,
        known: rest,
        detail: format!(
            "phi bijective on n <= {PHI_RANGE} {phi_ok}; omega >= floor(q/a^2) fails at {literal_misses} of {STREAM_LEN} positions, all level-1 with omega = 1 {omega_ok}; nonzero digits in Q_1..Q_4 {nonzero}"
        ),
    }
}

/// Conditions of an almost-arithmetic progression checked directly at `eta`.
fn aap_holds(x: &[Rational], delta: &Rational, eps: &Rational, eta: &Rational) -> bool {
    let up = Rational::one() + delta;
    let down = Rational::one() - delta;
    let mut ok = eta.is_positive() && eta <= eps && x[0] <= eta * &up && Rational::one() - &x[x.len() - 1] <= eta * &up;
    for w in x.windows(2) {
        let g = &w[1] - &w[0];
        ok &= eta * &down <= g && g <= eta * &up;
    }
    ok
}

fn criterion_4() -> Verdict {
    let mut blocks = 0usize;
    let mut bad_blocks = 0usize;
    let mut max_k = 0;
    let sch4 = schedule(4);
    let stream4 = generate_digits(&sch4, SelectionPolicy::Min, STREAM_LEN).unwrap();
    let sch5 = schedule(5);
    let stream5 = generate_digits(&sch5, SelectionPolicy::Min, PHI_RANGE + LEVEL4_EXTRA).unwrap();
    for (sch, stream) in [(&sch4, &stream4), (&sch5, &stream5)] {
        for c in check_y_blocks(sch, stream).unwrap() {
            if c.k > 4 {
                continue;
            }
            let (s_j, s_k) = (sch.big_s(c.j).unwrap(), sch.big_s(c.k).unwrap());
            let delta = rat(1, (s_j * s_k) as i64);
            let eps = rat(s_j as i64, s_k as i64);
            let y = cnl_core::theta::extract_y(sch, stream, c.j, c.k, c.b).unwrap();
            let witnessed = c.certificate.eta.as_ref().is_some_and(|eta| aap_holds(y.values(), &delta, &eps, eta));
            let dbnd = rat(2 * s_j as i64, s_k as i64);
            blocks += 1;
            max_k = max_k.max(c.k);
            if !(c.passed() && witnessed && c.dstar <= dbnd) {
                bad_blocks += 1;
            }
        }
    }

    let (mut rows, mut strict, mut degenerate, mut violations) = (0, 0, 0, 0);
    let mut degenerate_ok = true;
    for (sch, stream) in [(&sch4, &stream4), (&sch5, &stream5)] {
        for j in 1..=3usize {
            let s_j = sch.big_s(j).unwrap();
            let avail = (stream.len() - 1) / s_j + 1;
            let mut lens: Vec<u64> = [1, 2, 3, 4, 10, 50, 100, 144, 500, 1000, 2500, 5000, 9000, 18000, 36000]
                .into_iter()
                .filter(|&n| n <= avail)
                .collect();
            lens.extend([avail - 8, avail - 1, avail].into_iter().filter(|&n| n >= 1));
            lens.sort_unstable();
            lens.dedup();
            let rep = prefix_bound_check(sch, stream, j, &lens).unwrap();
            for r in &rep.rows {
                rows += 1;
                match r.status {
                    BoundStatus::Holds => strict += 1,
                    BoundStatus::Degenerate => {
                        degenerate += 1;
                        // only where the envelope is identically 1
                        degenerate_ok &= sch.envelope_sup(j, r.decomposition.i).unwrap().is_one();
                    }
                    BoundStatus::Violated => violations += 1,
                }
            }
        }
    }

    let sch = &sch5;
    let eps = [2usize, 3, 4].map(|t| sch.envelope_sup(1, t).unwrap());
    let eps_ok = eps == [rat(1, 1), rat(1, 1), rat(18224, 36296)];
    let rest = bad_blocks == 0 && blocks > 0 && max_k == 4 && violations == 0 && degenerate_ok && eps_ok;
    Verdict {
        passed: rest && degenerate == 0,
        known: rest,
        detail: format!(
            "{blocks} Y blocks (k <= {max_k}), {bad_blocks} failing AAP/witness/DBND; {rows} prefix rows: {strict} with D* <= f < eps_bar, {degenerate} with D* <= f = eps_bar = 1 where the strict inequality is false, {violations} other violations; eps_bar_(1,2..4) exact {eps_ok}"
        ),
    }
}

fn brute_dstar(values: &[Rational]) -> Rational {
    let n = Rational::from_integer(values.len().into());
    let mut best = Rational::zero();
    for g in values.iter().chain(std::iter::once(&Rational::one())) {
        let below = Rational::from_integer(values.iter().filter(|v| *v < g).count().into());
        let upto = Rational::from_integer(values.iter().filter(|v| *v <= g).count().into());
        best = best.max((&below / &n - g).abs());
        if g < &Rational::one() {
            best = best.max((&upto / &n - g).abs());
        }
    }
    best
}

fn random_points(rng: &mut ChaCha8Rng, len: usize) -> Vec<Rational> {
    (0..len)
        .map(|_| {
            let den: i64 = rng.gen_range(1..=64);
            rat(rng.gen_range(0..den), den)
        })
        .collect()
}

fn criterion_5() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut equal = 0;
    for _ in 0..ORACLE_CASES {
        let len = rng.gen_range(1..=ORACLE_MAX_LEN);
        let v = random_points(&mut rng, len);
        if star_discrepancy(&PointSequence::new(v.clone()).unwrap()).unwrap() == brute_dstar(&v) {
            equal += 1;
        }
    }

    let (mut certified, mut aap_ok) = (0, true);
    for _ in 0..ORACLE_CASES {
        let n: i64 = rng.gen_range(2..=40);
        let delta = rat(rng.gen_range(0..50), 100);
        let shift = rat(rng.gen_range(0..1000), 1000 * n);
        let vals: Vec<Rational> =
            (0..n).map(|i| rat(i, n) + &shift + rat(rng.gen_range(0..100), 100_000 * n)).collect();
        if vals.iter().any(|v| v >= &Rational::one()) {
            continue;
        }
        let seq = PointSequence::new(vals).unwrap();
        let cert = verify_aap(&seq, &delta, &rat(1, n)).unwrap();
        if let Some(eta) = &cert.eta {
            certified += 1;
            let d = star_discrepancy(&seq).unwrap();
            let b = aap_bound(n as u64, &delta, eta).unwrap();
            aap_ok &= d <= b.coarse && d <= b.sharp;
        }
    }

    let mut concat_ok = true;
    for _ in 0..ORACLE_CASES {
        let parts = rng.gen_range(1..=4);
        let (mut seqs, mut entries) = (Vec::new(), Vec::new());
        for _ in 0..parts {
            let len = rng.gen_range(1..=20);
            let s = PointSequence::new(random_points(&mut rng, len)).unwrap();
            let reps: u64 = rng.gen_range(1..=3);
            entries.push((reps * len as u64, star_discrepancy(&s).unwrap()));
            seqs.extend(std::iter::repeat_n(s, reps as usize));
        }
        concat_ok &= star_discrepancy(&PointSequence::concat(&seqs)).unwrap() <= concat_bound(&entries).unwrap();
    }
    verdict(
        equal == ORACLE_CASES && certified > 0 && aap_ok && concat_ok,
        format!(
            "closed form = brute force on {equal}/{ORACLE_CASES}; AAP bound on {certified} certified progressions {aap_ok}; concatenation bound on {ORACLE_CASES} cases {concat_ok}"
        ),
    )
}

fn level(n: u64) -> u64 {
    match n {
        0..=2 => 1,
        3..=144 => 2,
        145..=36288 => 3,
        _ => 4,
    }
}

/// `log2` of the fraction of `q_n` that survives at position `n`.
fn kept_log2(n: u64) -> f64 {
    match level(n) {
        1 => -((n + 3) as f64),
        i => -2.0 * (i - 1) as f64,
    }
}

fn weight(n: u64) -> f64 {
    1.0 - 1.0 / level(n) as f64
}

/// Falconer quotient under `m_k = q_k^(1 - 1/i(k))`, evaluated in floating point.
fn quotient_oracle(k: u64) -> f64 {
    let num: f64 = (1..k).map(|n| weight(n) * (n + 3) as f64).sum();
    let gap = (1.0 - 2f64.powf(kept_log2(k + 1))).log2();
    let den: f64 = (1..=k).map(|n| (n + 3) as f64).sum::<f64>() - weight(k) * (k + 3) as f64 - gap;
    num / den
}

/// The simplified closed form as printed; it drops `log q_k` and the gap factor.
fn printed_closed_form(k: u64) -> f64 {
    let num: f64 = (1..k).map(|n| weight(n) * (n + 3) as f64).sum();
    let den: f64 = (1..k).map(|n| (n + 3) as f64).sum::<f64>() - weight(k) * (k + 3) as f64;
    num / den
}

fn criterion_6() -> Verdict {
    let sch = schedule(4);
    let scale = LogScale::new(64);
    let geometry = theta_geometry(&sch, DIM_DEPTH).unwrap();
    let exact = falconer_lower_bound(&geometry, &scale, 100).unwrap();
    let bound = falconer_from_logs(&bound_substituted_logs(&geometry, &scale).unwrap(), 1, 100).unwrap();
    let d_final = bound.last().unwrap().approx;
    let in_range = (DIM_RANGE.0..=DIM_RANGE.1).contains(&d_final);
    let (mut dev_quotient, mut dev_printed) = (0f64, 0f64);
    let mut dominates = true;
    for (e, b) in exact.points.iter().zip(&bound.points) {
        dev_quotient = dev_quotient.max((b.approx - quotient_oracle(b.k)).abs());
        dev_printed = dev_printed.max((b.approx - printed_closed_form(b.k)).abs());
        dominates &= e.approx >= b.approx - DIM_TOL;
    }

    let mut valid = true;
    let mut levels_checked = 0;
    let mut steps = BigUint::one();
    let mut parent: Option<Vec<(Rational, Rational)>> = None;
    for g in &geometry {
        steps *= &g.scale_step;
        let Ok(set) = basic_intervals(&sch, g.k, INTERVAL_GUARD) else { break };
        let eps = g.eps(&steps);
        valid &= set.min_gap().is_none_or(|gap| gap.is_positive() && gap >= eps);
        let cur = set.as_rationals();
        if let Some(outer) = &parent {
            valid &= cur.iter().all(|(lo, hi)| outer.iter().any(|(a, b)| a <= lo && hi <= b));
        }
        parent = Some(cur);
        levels_checked += 1;
    }
    let dev_final = (d_final - printed_closed_form(DIM_DEPTH)).abs();
    let rest = in_range && dev_quotient <= DIM_TOL && dominates && valid;
    Verdict {
        passed: rest && dev_printed <= DIM_TOL,
        known: rest,
        detail: format!(
            "d_{DIM_DEPTH} = {d_final:.6} under the bound substitution (exact omega gives {:.6}); |trace - Falconer quotient oracle| <= {dev_quotient:.1e}; |trace - printed closed form| max {dev_printed:.1e}, {dev_final:.1e} at k = {DIM_DEPTH}, vs tol {DIM_TOL:.0e}; intervals exact-valid on {levels_checked} levels {valid}",
            exact.last().unwrap().approx
        ),
    }
}

fn files(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out: Vec<(String, Vec<u8>)> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (e.file_name().to_string_lossy().into_owned(), std::fs::read(e.path()).unwrap())
        })
        .collect();
    out.sort();
    out
}

fn criterion_7() -> Verdict {
    let mut identical = true;
    let mut count = 0;
    for policy in ["min", "seeded:11"] {
        let runs: Vec<_> = (0..2)
            .map(|_| {
                let dir = tempfile::tempdir().unwrap();
                let code = bin()
                    .args(["theta", "generate", "--n", "2000", "--policy", policy, "--out"])
                    .arg(dir.path())
                    .output()
                    .unwrap()
                    .status
                    .code();
                (code, files(dir.path()))
            })
            .collect();
        identical &= runs[0].0 == Some(0) && runs[0] == runs[1];
        count += runs[0].1.len();
    }
    verdict(identical, format!("{count} output files byte-identical across repeated runs {identical}"))
}

fn main() {
    let criteria: [(u32, &str, fn() -> Verdict, Option<Duration>); 7] = [
        (1, "counterexample reproduction", criterion_1, Some(LIMIT_REPRO)),
        (2, "schedule exactness", criterion_2, Some(LIMIT_SCHEDULE)),
        (3, "bijection and windows", criterion_3, Some(LIMIT_WINDOWS)),
        (4, "equidistribution suite", criterion_4, None),
        (5, "discrepancy oracle", criterion_5, None),
        (6, "dimension trace", criterion_6, Some(LIMIT_DIM)),
        (7, "determinism", criterion_7, None),
    ];
    let mut unexpected = 0;
    for (id, name, run, limit) in criteria {
        let start = Instant::now();
        let v = run();
        let took = start.elapsed();
        let timely = limit.is_none_or(|l| took <= l);
        let passed = v.passed && timely;
        let limit_note = limit.map(|l| format!(" / limit {:.0}s", l.as_secs_f64())).unwrap_or_default();
        let known = !passed && v.known && timely;
        let mark = if passed { "PASS" } else if known { "FAIL (known)" } else { "FAIL" };
        println!("[{mark}] {id} {name}: {} [{:.2}s{limit_note}]", v.detail, took.as_secs_f64());
        if !passed && !known {
            unexpected += 1;
        }
    }
    if unexpected > 0 {
        eprintln!("{unexpected} acceptance criteria failed");
        std::process::exit(1);
    }
}
