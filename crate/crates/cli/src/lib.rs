//! Batch commands behind the `cnl` binary.
//!
//! Every command writes its artifacts into an output directory and returns a
//! [`Outcome`]; the binary maps failures to exit code 1 and bad input to 2.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use num_bigint::BigUint;
use num_traits::Zero;
use serde::Serialize;

use cnl_core::counterexample::{self, PairReport};
use cnl_core::dimension::{
    basic_intervals, bound_substituted_logs, falconer_from_logs, falconer_lower_bound, theta_geometry, write_trace_csv,
    FalconerTrace,
};
use cnl_core::equidist::{dn_diagnostic, normality_report, DiscrepancyReport};
use cnl_core::expansion::{transcode, transcode_shifted, Block, DigitStream};
use cnl_core::io::{load_digits, write_digits_jsonl, ThetaConfig};
use cnl_core::numeric::{decimal, LogScale};
use cnl_core::sequences::{growth_condition_trace, shifted_rule};
use cnl_core::theta::{
    build_schedule, check_y_blocks, generate_digits, prefix_bound_check, BoundStatus, SelectionPolicy, ThetaSchedule,
};
use cnl_core::{Error, Rational};

/// Interval enumeration limit for the exact Falconer input checks.
pub const INTERVAL_GUARD: u64 = 10_000;
/// Levels at the end of the trace whose minimum is reported.
pub const TRAILING_WINDOW: usize = 100;

#[derive(Debug)]
pub enum CliError {
    /// Bad configuration or arguments: exit code 2.
    Input(String),
    /// A verification or invariant check failed, or a runtime error: exit code 1.
    Failed(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Input(_) => 2,
            CliError::Failed(_) => 1,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Input(m) => write!(f, "invalid input: {m}"),
            CliError::Failed(m) => write!(f, "{m}"),
        }
    }
}

/// Core errors that stem from the request itself rather than a failed check.
fn classify(e: Error) -> CliError {
    match e {
        Error::InvalidRule(_)
        | Error::InvalidArgument(_)
        | Error::InvalidThreshold(_)
        | Error::UncertifiedTail(_)
        | Error::ThresholdNotCrossed { .. }
        | Error::ShiftOutOfRange { .. }
        | Error::LevelOutOfRange { .. }
        | Error::BeyondSchedule { .. }
        | Error::ZeroPosition
        | Error::Json(_) => CliError::Input(e.to_string()),
        other => CliError::Failed(other.to_string()),
    }
}

fn failed(e: Error) -> CliError {
    CliError::Failed(e.to_string())
}

pub type CliResult<T> = std::result::Result<T, CliError>;

/// Named pass/fail line of a command summary.
#[derive(Clone, Debug, Serialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl Check {
    fn new(name: &str, passed: bool, detail: impl Into<String>) -> Self {
        Self { name: name.into(), passed, detail: detail.into() }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct Outcome {
    pub command: String,
    pub checks: Vec<Check>,
    pub passed: bool,
}

impl Outcome {
    fn new(command: &str, checks: Vec<Check>) -> Self {
        let passed = checks.iter().all(|c| c.passed);
        Self { command: command.into(), checks, passed }
    }

    pub fn into_result(self) -> CliResult<Self> {
        if self.passed {
            Ok(self)
        } else {
            let bad: Vec<&str> = self.checks.iter().filter(|c| !c.passed).map(|c| c.name.as_str()).collect();
            Err(CliError::Failed(format!("{} failed: {}", self.command, bad.join(", "))))
        }
    }
}

/// Options shared by the `theta` subcommands.
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub config: Option<PathBuf>,
    pub depth: Option<usize>,
    pub policy: Option<SelectionPolicy>,
    pub seed: Option<u64>,
}

impl Overrides {
    pub fn resolve(&self) -> CliResult<ThetaConfig> {
        let mut cfg = match &self.config {
            Some(p) => ThetaConfig::load(p).map_err(|e| CliError::Input(format!("{}: {e}", p.display())))?,
            None => ThetaConfig::config_a(),
        };
        if let Some(d) = self.depth {
            cfg.depth = d;
        }
        if let Some(p) = self.policy {
            cfg.policy = p;
        }
        if let Some(s) = self.seed {
            cfg.seed = Some(s);
        }
        cfg.validate().map_err(classify)?;
        Ok(cfg)
    }
}

fn schedule_for(cfg: &ThetaConfig) -> CliResult<ThetaSchedule> {
    let spec = cfg.chain_spec().map_err(classify)?;
    build_schedule(&spec).map_err(|e| match e {
        Error::ScheduleInvariant(_) => failed(e),
        other => CliError::Input(format!("cannot build the schedule: {other}")),
    })
}

fn create(dir: &Path, name: &str) -> CliResult<BufWriter<File>> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::Input(format!("{}: {e}", dir.display())))?;
    let path = dir.join(name);
    File::create(&path).map(BufWriter::new).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))
}

fn write_json<T: Serialize>(dir: &Path, name: &str, value: &T) -> CliResult<()> {
    let mut w = create(dir, name)?;
    serde_json::to_writer_pretty(&mut w, value).map_err(|e| failed(e.into()))?;
    w.write_all(b"\n").and_then(|_| w.flush()).map_err(|e| failed(e.into()))
}

fn frac(r: &Rational) -> (String, String) {
    (r.numer().to_string(), r.denom().to_string())
}

/// `10, 100, ...` below `len`, then `len` itself.
pub fn decades(len: u64) -> Vec<u64> {
    let mut out: Vec<u64> =
        std::iter::successors(Some(10u64), |n| n.checked_mul(10)).take_while(|&n| n < len).collect();
    if len > 0 {
        out.push(len);
    }
    out
}

fn zero_positions(stream: &DigitStream) -> Vec<u64> {
    stream.digits().iter().enumerate().filter(|(_, d)| d.is_zero()).map(|(i, _)| i as u64 + 1).collect()
}

#[derive(Serialize)]
struct GenerateSummary<'a> {
    config: &'a ThetaConfig,
    policy: String,
    n_requested: u64,
    n_written: u64,
    coverage: u64,
    outcome: &'a Outcome,
}

/// `theta generate`: digits, schedule dump and build-time checks.
pub fn cmd_generate(ov: &Overrides, n: u64, out: &Path) -> CliResult<Outcome> {
    let cfg = ov.resolve()?;
    if n == 0 {
        return Err(CliError::Input("--n must be positive".into()));
    }
    let sch = schedule_for(&cfg)?;
    let policy = cfg.effective_policy();
    let n_written = n.min(sch.coverage());
    let stream = generate_digits(&sch, policy, n_written).map_err(classify)?;

    let mut checks = vec![Check::new("schedule invariants", sch.check_invariants().is_ok(), "")];

    let mut phi_ok = true;
    let mut window_ok = true;
    for pos in 1..=n_written {
        let info = sch.phi_inv(pos).map_err(failed)?;
        phi_ok &= sch.phi(info.i, info.b, info.c).map_err(failed)? == pos;
        let cands = sch.candidates_at(&info, stream.base(pos).map_err(failed)?);
        let ok = cands.contains(stream.digit(pos).map_err(failed)?);
        let floor = if info.i == 1 {
            BigUint::from(1u32)
        } else {
            stream.base(pos).map_err(failed)? / BigUint::from(info.a * info.a)
        };
        window_ok &= ok && cands.count >= floor;
    }
    checks.push(Check::new("phi round trip", phi_ok, format!("n <= {n_written}")));
    checks.push(Check::new("digits inside windows", window_ok, "omega(n) >= floor(q_n / a^2) above level 1"));

    let mut zero_detail = Vec::new();
    for j in 1..=cfg.depth {
        let coarse = transcode(&stream, sch.spec(), j).map_err(failed)?;
        let zeros = zero_positions(&coarse);
        if !zeros.is_empty() {
            zero_detail.push(format!("Q_{j} position {}", zeros[0]));
        }
    }
    checks.push(Check::new(
        "nonzero digits in every chain base",
        zero_detail.is_empty(),
        if zero_detail.is_empty() { format!("Q_1..Q_{}", cfg.depth) } else { zero_detail.join("; ") },
    ));

    let mut w = create(out, "digits.jsonl")?;
    write_digits_jsonl(&stream, &mut w).map_err(failed)?;
    write_json(out, "schedule.json", &sch.dump())?;
    let outcome = Outcome::new("theta generate", checks);
    let summary = GenerateSummary {
        config: &cfg,
        policy: policy.to_string(),
        n_requested: n,
        n_written,
        coverage: sch.coverage(),
        outcome: &outcome,
    };
    write_json(out, "summary.json", &summary)?;
    Ok(outcome)
}

pub struct AnalyzeArgs {
    pub digits: PathBuf,
    pub levels: Option<Vec<usize>>,
    pub shifts: Vec<u64>,
    pub n: Option<u64>,
}

fn write_envelope_csv(out: &Path, name: &str, report: &cnl_core::theta::PrefixBoundReport) -> CliResult<()> {
    let mut w = csv::Writer::from_writer(create(out, name)?);
    let head = ["N", "i", "m", "alpha", "beta", "Dstar_num", "Dstar_den", "f_num", "f_den", "eps_num", "eps_den", "status", "Dstar", "f", "eps_bar"];
    w.write_record(head).map_err(|e| failed(e.into()))?;
    for r in &report.rows {
        let (dn, dd) = frac(&r.dstar);
        let (fnum, fden) = frac(&r.f);
        let (en, ed) = frac(&r.eps_bar);
        let status = match r.status {
            BoundStatus::Holds => "PASS",
            BoundStatus::Degenerate => "PASS (eps_bar = 1)",
            BoundStatus::Violated => "FAIL",
        };
        let d = &r.decomposition;
        w.write_record([
            r.n.to_string(),
            d.i.to_string(),
            d.m.to_string(),
            d.alpha.to_string(),
            d.beta.to_string(),
            dn,
            dd,
            fnum,
            fden,
            en,
            ed,
            status.to_string(),
            decimal(&r.dstar, 12),
            decimal(&r.f, 12),
            decimal(&r.eps_bar, 12),
        ])
        .map_err(|e| failed(e.into()))?;
    }
    w.flush().map_err(|e| failed(e.into()))
}

fn write_rn_csv(out: &Path, name: &str, stream: &DigitStream, rule: &cnl_core::sequences::BasicSequence, lens: &[u64]) -> CliResult<()> {
    let zero = Block::from_u64(&[0]).map_err(failed)?;
    let mut w = csv::Writer::from_writer(create(out, name)?);
    w.write_record(["N", "block", "count", "Qn1", "ratio_num", "ratio_den"]).map_err(|e| failed(e.into()))?;
    for &n in lens {
        let rep = normality_report(stream, rule, 1, n, std::slice::from_ref(&zero)).map_err(failed)?;
        let row = &rep.rows[0];
        let (rn, rd) = row.ratio.as_ref().map(frac).unwrap_or_default();
        w.write_record([n.to_string(), row.block.to_string(), row.count.to_string(), decimal(&rep.qnk, 12), rn, rd])
            .map_err(|e| failed(e.into()))?;
    }
    w.flush().map_err(|e| failed(e.into()))
}

fn write_report(out: &Path, name: &str, report: &DiscrepancyReport) -> CliResult<()> {
    let w = create(out, name)?;
    report.write_csv(w).map_err(failed)
}

/// `theta analyze`: per-level and per-shift reports for an existing digit file.
pub fn cmd_analyze(ov: &Overrides, args: &AnalyzeArgs, out: &Path) -> CliResult<Outcome> {
    let cfg = ov.resolve()?;
    let sch = schedule_for(&cfg)?;
    let spec = sch.spec().clone();
    let mut stream = load_digits(&args.digits).map_err(|e| CliError::Failed(format!("{}: {e}", args.digits.display())))?;
    let expected = spec.base.prefix(stream.len()).map_err(classify)?;
    if expected.as_slice() != stream.bases() {
        return Err(CliError::Input("digit file bases do not match the configured Q".into()));
    }
    if let Some(n) = args.n {
        if n == 0 || n > stream.len() {
            return Err(CliError::Input(format!("--n must lie in 1..={}", stream.len())));
        }
        stream = stream.truncated(n).map_err(failed)?;
    }
    let levels = args.levels.clone().unwrap_or_else(|| (1..=cfg.depth).collect());
    for &j in &levels {
        if j == 0 || j > cfg.depth {
            return Err(CliError::Input(format!("level {j} outside 1..={}", cfg.depth)));
        }
        for &k in &args.shifts {
            let s = spec.big_s(j).map_err(classify)?;
            if k >= s {
                return Err(CliError::Input(format!("shift {k} needs to be below S_{j} = {s}")));
            }
        }
    }

    let mut checks = Vec::new();
    let mut zero_hits = Vec::new();
    for &j in &levels {
        for &k in &args.shifts {
            let coarse = transcode_shifted(&stream, &spec, j, k).map_err(classify)?;
            if coarse.is_empty() {
                continue;
            }
            let rule = shifted_rule(&spec, j, k).map_err(classify)?;
            let lens = decades(coarse.len());
            let tag = format!("j{j}_k{k}");
            let report = if k == 0 {
                cnl_core::theta::dn_envelope_report(&sch, &stream, j, &lens).map_err(failed)?
            } else {
                dn_diagnostic(&coarse, &lens).map_err(failed)?
            };
            write_report(out, &format!("dn_{tag}.csv"), &report)?;
            if report.violations() > 0 {
                checks.push(Check::new(&format!("dn envelope {tag}"), false, format!("{} rows", report.violations())));
            }
            write_rn_csv(out, &format!("rn_{tag}.csv"), &coarse, &rule, &lens)?;
            if let Some(p) = zero_positions(&coarse).first() {
                zero_hits.push(format!("Q_{{{j},{k}}} position {p}"));
            }
        }
    }
    checks.push(Check::new(
        "no zero digit in any analysed base",
        zero_hits.is_empty(),
        if zero_hits.is_empty() { "RN witness: block (0) never occurs".to_string() } else { zero_hits.join("; ") },
    ));

    for &j in &levels {
        if j > sch.levels() {
            continue;
        }
        let s_j = sch.big_s(j).map_err(failed)?;
        let available = (stream.len() - 1) / s_j + 1;
        let report = prefix_bound_check(&sch, &stream, j, &decades(available)).map_err(failed)?;
        write_envelope_csv(out, &format!("envelope_j{j}.csv"), &report)?;
        checks.push(Check::new(
            &format!("prefix envelope j={j}"),
            report.violations() == 0,
            format!("{} rows, {} violations", report.rows.len(), report.violations()),
        ));
    }

    let ys = check_y_blocks(&sch, &stream).map_err(failed)?;
    let bad = ys.iter().filter(|y| !y.passed()).count();
    checks.push(Check::new("complete Y blocks", bad == 0, format!("{} blocks, {bad} failures", ys.len())));

    let outcome = Outcome::new("theta analyze", checks);
    write_json(out, "analyze_summary.json", &outcome)?;
    Ok(outcome)
}

#[derive(Serialize)]
struct IntervalCheck {
    k: u64,
    count: usize,
    disjoint: bool,
    gaps_at_least_eps: bool,
    nested: bool,
}

#[derive(Serialize)]
struct DimSummary {
    depth: u64,
    d_final: String,
    d_final_bound_substituted: String,
    trailing_min: String,
    trailing_window: usize,
    growth: String,
    interval_checks: Vec<IntervalCheck>,
    outcome: Outcome,
}

fn trace_last(t: &FalconerTrace) -> String {
    t.last().map(|p| decimal(&p.d, 12)).unwrap_or_default()
}

/// `theta dim`: Falconer trace to depth `k`.
pub fn cmd_dim(ov: &Overrides, k: u64, out: &Path) -> CliResult<DimOutcome> {
    let cfg = ov.resolve()?;
    if k < 2 {
        return Err(CliError::Input("the dimension trace needs K >= 2".into()));
    }
    let sch = schedule_for(&cfg)?;
    let scale = LogScale::from_env();
    let geometry = theta_geometry(&sch, k).map_err(|e| match e {
        Error::GapsNotDecreasing(_) => failed(e),
        other => classify(other),
    })?;
    let exact = falconer_lower_bound(&geometry, &scale, TRAILING_WINDOW).map_err(failed)?;
    let bound_logs = bound_substituted_logs(&geometry, &scale).map_err(failed)?;
    let bound = falconer_from_logs(&bound_logs, 1, TRAILING_WINDOW).map_err(failed)?;
    write_trace_csv(&geometry, &exact, 60, create(out, "dim_trace.csv")?).map_err(failed)?;
    write_trace_csv(&geometry, &bound, 60, create(out, "dim_trace_bound.csv")?).map_err(failed)?;

    let growth = growth_condition_trace(&cfg.base, k, &scale).map_err(failed)?;
    {
        let mut w = csv::Writer::from_writer(create(out, "growth.csv")?);
        w.write_record(["k", "ratio"]).map_err(|e| failed(e.into()))?;
        for p in &growth.points {
            w.write_record([p.k.to_string(), decimal(&p.ratio, 12)]).map_err(|e| failed(e.into()))?;
        }
        w.flush().map_err(|e| failed(e.into()))?;
    }

    let mut interval_checks = Vec::new();
    let mut parent: Option<Vec<(Rational, Rational)>> = None;
    let mut steps = BigUint::from(1u32);
    for g in &geometry {
        steps *= &g.scale_step;
        let set = match basic_intervals(&sch, g.k, INTERVAL_GUARD) {
            Ok(s) => s,
            Err(Error::TooManyIntervals { .. }) | Err(Error::BeyondSchedule { .. }) => break,
            Err(e) => return Err(failed(e)),
        };
        let gap = set.min_gap();
        let eps = g.eps(&steps);
        let intervals = set.as_rationals();
        let nested = match &parent {
            None => true,
            Some(outer) => intervals.iter().all(|(lo, hi)| outer.iter().any(|(a, b)| a <= lo && hi <= b)),
        };
        interval_checks.push(IntervalCheck {
            k: g.k,
            count: intervals.len(),
            disjoint: gap.as_ref().is_none_or(|g| g > &Rational::from_integer(0.into())),
            gaps_at_least_eps: gap.as_ref().is_none_or(|g| g >= &eps),
            nested,
        });
        parent = Some(intervals);
    }
    let checks = vec![
        Check::new(
            "Falconer inputs",
            interval_checks.iter().all(|c| c.disjoint && c.gaps_at_least_eps && c.nested),
            format!("exact interval checks for k <= {}", interval_checks.len()),
        ),
        Check::new("d_k within [0, 1]", exact.points.iter().all(|p| p.approx >= 0.0 && p.approx <= 1.0), ""),
    ];
    let outcome = Outcome::new("theta dim", checks);
    let summary = DimSummary {
        depth: k,
        d_final: trace_last(&exact),
        d_final_bound_substituted: trace_last(&bound),
        trailing_min: exact.trailing_min.as_ref().map(|d| decimal(d, 12)).unwrap_or_default(),
        trailing_window: exact.window,
        growth: growth.flag().to_string(),
        interval_checks,
        outcome: outcome.clone(),
    };
    write_json(out, "dim_summary.json", &summary)?;
    Ok(DimOutcome {
        outcome,
        d_final: exact.last().map(|p| p.approx).unwrap_or(f64::NAN),
        d_final_bound: bound.last().map(|p| p.approx).unwrap_or(f64::NAN),
        points: exact.points.len(),
        growth: growth.flag().to_string(),
    })
}

pub struct DimOutcome {
    pub outcome: Outcome,
    pub d_final: f64,
    pub d_final_bound: f64,
    pub points: usize,
    pub growth: String,
}

/// `theta repro-sec1`: the explicit counterexample pair.
pub fn cmd_repro_sec1(n: u64, out: &Path) -> CliResult<(Outcome, PairReport)> {
    if n == 0 {
        return Err(CliError::Input("--n must be positive".into()));
    }
    let report = counterexample::reproduce(n).map_err(failed)?;
    let show = |v: &[u64]| v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",");
    let e = &report.enclosure;
    let checks = vec![
        Check::new("contraction P ~_2 Q", report.q_values.matches, show(&report.q_values.computed)),
        Check::new("x in base Q, positions 2-10", report.x_tail.matches, show(&report.x_tail.computed)),
        Check::new("y in base P", report.y_p_digits.matches, report.y_p_digits.computed.clone()),
        Check::new(
            "T_{Q,n}(x) < 1/2",
            e.all_below_half,
            format!("n <= {}, max upper bound {} at n = {}", e.horizon, e.max_upper_approx, e.argmax),
        ),
    ];
    let outcome = Outcome::new("theta repro-sec1", checks);
    write_json(out, "pair_report.json", &report)?;
    Ok((outcome, report))
}

pub fn print_outcome(o: &Outcome) {
    for c in &o.checks {
        let mark = if c.passed { "PASS" } else { "FAIL" };
        if c.detail.is_empty() {
            println!("{mark}  {}", c.name);
        } else {
            println!("{mark}  {}  ({})", c.name, c.detail);
        }
    }
}

