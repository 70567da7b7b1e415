//! Nested-interval geometry of `Theta_{Q,S}` and the Falconer lower bound
//! `log(m_1 ... m_{k-1}) / -log(m_k eps_k)` for its Hausdorff dimension.
//!
//! Level `k` basic intervals are indexed by the digits `E_1, ..., E_k`: the
//! interval for a prefix is the hull of every admissible continuation,
//! `[B + first_{k+1} / Q_{k+1}, B + (last_{k+1} + 1) / Q_{k+1}]` with
//! `Q_k = q_1 ... q_k`. Siblings differ by one in `E_k`, so the gap between
//! neighbours is exactly `(1 - omega(k+1) / q_{k+1}) / Q_k`.

use num_bigint::{BigInt, BigUint};
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::error::{Error, Result};
use crate::numeric::{decimal, rat_big, FixedLog, LogScale, Rational};
use crate::theta::ThetaSchedule;

/// Children per parent and minimal gap at one level.
///
/// The gap is kept as `eps_k = gap_fraction / (step_1 ... step_k)` so that
/// levels with enormous denominators stay cheap.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LevelGeometry {
    pub k: u64,
    /// `i(k)` for geometries read off a schedule.
    pub level: Option<usize>,
    pub m: BigUint,
    pub gap_fraction: Rational,
    pub scale_step: BigUint,
}

impl LevelGeometry {
    /// Exact `eps_k` given the product of the steps up to this level.
    pub fn eps(&self, scale: &BigUint) -> Rational {
        &self.gap_fraction / Rational::from_integer(BigInt::from(scale.clone()))
    }
}

/// Checks `m_k >= 1`, `eps_k > 0` and `eps_{k+1} < eps_k`.
pub fn validate_geometry(levels: &[LevelGeometry]) -> Result<()> {
    for g in levels {
        if g.m.is_zero() || !g.gap_fraction.is_positive() || g.scale_step.is_zero() {
            return Err(Error::InvalidArgument(format!("level {} needs m >= 1 and a positive gap", g.k)));
        }
    }
    for w in levels.windows(2) {
        // eps_{k+1} < eps_k  <=>  fraction_{k+1} < fraction_k * step_{k+1}
        let scaled = &w[0].gap_fraction * Rational::from_integer(BigInt::from(w[1].scale_step.clone()));
        if w[1].gap_fraction >= scaled {
            return Err(Error::GapsNotDecreasing(w[1].k as usize));
        }
    }
    Ok(())
}

/// `m_k = omega(k)` and the exact sibling gap for `k = 1..=depth`.
pub fn theta_geometry(schedule: &ThetaSchedule, depth: u64) -> Result<Vec<LevelGeometry>> {
    if depth + 1 > schedule.coverage() {
        return Err(Error::BeyondSchedule { n: depth + 1, last: schedule.coverage() });
    }
    let bases = schedule.spec().base.prefix(depth + 1)?;
    let mut omega = Vec::with_capacity(bases.len());
    let mut levels = Vec::with_capacity(bases.len());
    for (idx, q) in bases.iter().enumerate() {
        let info = schedule.phi_inv(idx as u64 + 1)?;
        omega.push(schedule.candidates_at(&info, q).count);
        levels.push(info.i);
    }
    let mut out = Vec::with_capacity(depth as usize);
    for k in 1..=depth as usize {
        let next = rat_big(&omega[k], &bases[k]);
        out.push(LevelGeometry {
            k: k as u64,
            level: Some(levels[k - 1]),
            m: omega[k - 1].clone(),
            gap_fraction: Rational::one() - next,
            scale_step: bases[k - 1].clone(),
        });
    }
    validate_geometry(&out)?;
    Ok(out)
}

/// Level `k` basic intervals over the common denominator `Q_{k+1}`.
#[derive(Clone, Debug)]
pub struct IntervalSet {
    pub k: u64,
    pub den: BigUint,
    /// Sorted closed intervals `[lo / den, hi / den]`.
    pub intervals: Vec<(BigUint, BigUint)>,
}

impl IntervalSet {
    /// Smallest gap between neighbours, `None` for a single interval.
    /// Negative values mean overlap.
    pub fn min_gap(&self) -> Option<Rational> {
        self.intervals
            .windows(2)
            .map(|w| {
                let gap = BigInt::from(w[1].0.clone()) - BigInt::from(w[0].1.clone());
                Rational::new(gap, BigInt::from(self.den.clone()))
            })
            .min()
    }

    pub fn as_rationals(&self) -> Vec<(Rational, Rational)> {
        self.intervals.iter().map(|(a, b)| (rat_big(a, &self.den), rat_big(b, &self.den))).collect()
    }
}

/// Enumerates every level-`k` basic interval, refusing more than `guard`.
pub fn basic_intervals(schedule: &ThetaSchedule, k: u64, guard: u64) -> Result<IntervalSet> {
    if k == 0 {
        return Err(Error::ZeroPosition);
    }
    if k + 1 > schedule.coverage() {
        return Err(Error::BeyondSchedule { n: k + 1, last: schedule.coverage() });
    }
    let bases = schedule.spec().base.prefix(k + 1)?;
    let mut ranges = Vec::with_capacity(bases.len());
    for (idx, q) in bases.iter().enumerate() {
        let info = schedule.phi_inv(idx as u64 + 1)?;
        ranges.push(schedule.candidates_at(&info, q));
    }
    let total: BigUint = ranges[..k as usize].iter().map(|c| c.count.clone()).product();
    if total > BigUint::from(guard) {
        return Err(Error::TooManyIntervals { count: total.to_string(), guard });
    }
    // numerators over Q_k of every digit prefix, in increasing order
    let mut prefixes = vec![BigUint::zero()];
    for (q, c) in bases.iter().zip(&ranges).take(k as usize) {
        let count = c.count.to_u64().expect("guarded");
        let mut next = Vec::with_capacity(prefixes.len() * count as usize);
        for p in &prefixes {
            let base = p * q;
            for e in 0..count {
                next.push(&base + &c.first + e);
            }
        }
        prefixes = next;
    }
    let q_next = &bases[k as usize];
    let last = &ranges[k as usize];
    let lo_off = last.first.clone();
    let hi_off = last.last() + 1u32;
    let intervals = prefixes
        .iter()
        .map(|p| {
            let base = p * q_next;
            (&base + &lo_off, &base + &hi_off)
        })
        .collect();
    let den: BigUint = bases.iter().product();
    Ok(IntervalSet { k, den, intervals })
}

/// Fixed-point inputs to the Falconer quotient at each level.
#[derive(Clone, Debug)]
pub struct LevelLogs {
    pub ln_m: FixedLog,
    /// `ln eps_k`, negative for proper gaps.
    pub ln_eps: FixedLog,
}

pub fn level_logs(levels: &[LevelGeometry], scale: &LogScale) -> Vec<LevelLogs> {
    let mut cumulative = FixedLog::zero(scale.frac_bits());
    levels
        .iter()
        .map(|g| {
            cumulative = &cumulative + &scale.ln(&g.scale_step);
            LevelLogs { ln_m: scale.ln(&g.m), ln_eps: &scale.ln_rational(&g.gap_fraction) - &cumulative }
        })
        .collect()
}

/// The same logs with `m_k` replaced by the lower bound `q_k^(1 - 1/i(k))`.
pub fn bound_substituted_logs(levels: &[LevelGeometry], scale: &LogScale) -> Result<Vec<LevelLogs>> {
    let mut logs = level_logs(levels, scale);
    for (g, l) in levels.iter().zip(logs.iter_mut()) {
        let i = g.level.ok_or_else(|| Error::InvalidArgument("bound substitution needs schedule levels".into()))?;
        l.ln_m = scale.ln(&g.scale_step).scale(i as u64 - 1, i as u64);
    }
    Ok(logs)
}

#[derive(Clone, Debug)]
pub struct FalconerPoint {
    pub k: u64,
    /// Exact quotient of the two fixed-point logarithms.
    pub d: Rational,
    pub approx: f64,
}

#[derive(Clone, Debug)]
pub struct FalconerTrace {
    pub points: Vec<FalconerPoint>,
    /// Minimum of `d_k` over the final `window` levels; not a limit claim.
    pub trailing_min: Option<Rational>,
    pub window: usize,
}

impl FalconerTrace {
    pub fn last(&self) -> Option<&FalconerPoint> {
        self.points.last()
    }
}

/// `d_k` for `k >= 2` from precomputed logs of `m_k` and `eps_k`.
pub fn falconer_from_logs(logs: &[LevelLogs], first_k: u64, window: usize) -> Result<FalconerTrace> {
    if logs.len() < 2 {
        return Err(Error::InvalidArgument("the Falconer bound needs at least two levels".into()));
    }
    let bits = logs[0].ln_m.frac_bits();
    let mut numerator = FixedLog::zero(bits);
    let mut points = Vec::with_capacity(logs.len() - 1);
    for (idx, l) in logs.iter().enumerate() {
        if idx >= 1 {
            let k = first_k + idx as u64;
            let denominator = (&l.ln_m + &l.ln_eps).neg();
            if !denominator.is_positive() {
                return Err(Error::NonpositiveLogArgument(k as usize));
            }
            let d = numerator.ratio(&denominator);
            let approx = crate::numeric::approx_f64(&d);
            points.push(FalconerPoint { k, d, approx });
        }
        numerator = &numerator + &l.ln_m;
    }
    let window = window.clamp(1, points.len());
    let trailing_min = points[points.len() - window..].iter().map(|p| p.d.clone()).min();
    Ok(FalconerTrace { points, trailing_min, window })
}

/// The Falconer sequence for a validated geometry.
///
/// A level whose `m_k eps_k` is at least 1 is reported as
/// [`Error::NonpositiveLogArgument`]; borderline cases are settled exactly.
pub fn falconer_lower_bound(levels: &[LevelGeometry], scale: &LogScale, window: usize) -> Result<FalconerTrace> {
    validate_geometry(levels)?;
    let logs = level_logs(levels, scale);
    let mut steps = BigUint::one();
    for (idx, (g, l)) in levels.iter().zip(&logs).enumerate() {
        steps *= &g.scale_step;
        // only levels past the first enter a denominator
        if idx == 0 {
            continue;
        }
        let margin = (&l.ln_m + &l.ln_eps).to_f64();
        if margin.abs() < 1e-6 {
            let product = Rational::from_integer(BigInt::from(g.m.clone())) * g.eps(&steps);
            if product >= Rational::one() {
                return Err(Error::NonpositiveLogArgument(g.k as usize));
            }
        }
    }
    let first = levels.first().map(|g| g.k).unwrap_or(1);
    falconer_from_logs(&logs, first, window)
}

/// CSV trace: `k, i(k), omega_k, eps_num, eps_den, d_k`.
///
/// `eps_den` is printed exactly when it has at most `max_digits` decimal
/// digits and otherwise as the exact product `q[1..k]*D`.
pub fn write_trace_csv<W: std::io::Write>(
    levels: &[LevelGeometry],
    trace: &FalconerTrace,
    max_digits: usize,
    out: W,
) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["k", "i(k)", "omega_k", "eps_num", "eps_den", "d_k"])?;
    let mut steps = BigUint::one();
    let mut exact = true;
    let mut d_iter = trace.points.iter().peekable();
    for g in levels {
        if exact {
            steps *= &g.scale_step;
            exact = (steps.bits() as f64) * std::f64::consts::LOG10_2 < max_digits as f64;
        }
        let (num, den) = if exact {
            let e = g.eps(&steps);
            (e.numer().to_string(), e.denom().to_string())
        } else {
            (g.gap_fraction.numer().to_string(), format!("q[1..{}]*{}", g.k, g.gap_fraction.denom()))
        };
        let d = match d_iter.peek() {
            Some(p) if p.k == g.k => decimal(&d_iter.next().expect("peeked").d, 12),
            _ => String::new(),
        };
        w.write_record([
            g.k.to_string(),
            g.level.map(|i| i.to_string()).unwrap_or_default(),
            g.m.to_string(),
            num,
            den,
            d,
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numeric::rat;
    use crate::sequences::{BasicSequence, ChainSpec};
    use crate::theta::build_schedule;

    fn config_a() -> ThetaSchedule {
        let spec =
            ChainSpec::new(BasicSequence::geometric(8, 2).unwrap(), BasicSequence::constant(2).unwrap(), 4).unwrap();
        build_schedule(&spec).unwrap()
    }

    fn uniform(m: u64, step: u64, k: u64) -> Vec<LevelGeometry> {
        (1..=k)
            .map(|k| LevelGeometry {
                k,
                level: None,
                m: BigUint::from(m),
                gap_fraction: rat(1, 1),
                scale_step: BigUint::from(step),
            })
            .collect()
    }

    #[test]
    fn closed_form_example() {
        let tr = falconer_lower_bound(&uniform(2, 4, 10), &LogScale::new(64), 3).unwrap();
        let d10 = tr.last().unwrap();
        assert_eq!(d10.k, 10);
        assert!((d10.approx - 9.0 / 19.0).abs() < 1e-15);
        for p in &tr.points {
            let k = p.k as f64;
            assert!((p.approx - (k - 1.0) / (2.0 * k - 1.0)).abs() < 1e-15);
        }
    }

    #[test]
    fn single_children_give_zero() {
        let tr = falconer_lower_bound(&uniform(1, 3, 8), &LogScale::new(64), 8).unwrap();
        assert!(tr.points.iter().all(|p| p.d.is_zero()));
    }

    #[test]
    fn nonpositive_argument_is_flagged() {
        // m_2 eps_2 = 16 / 16 = 1
        let g = uniform(16, 4, 2);
        assert!(matches!(falconer_lower_bound(&g, &LogScale::new(64), 1), Err(Error::NonpositiveLogArgument(2))));
    }

    #[test]
    fn increasing_gaps_are_rejected() {
        let mut g = uniform(2, 4, 3);
        g[2].scale_step = BigUint::one();
        assert!(matches!(validate_geometry(&g), Err(Error::GapsNotDecreasing(3))));
    }

    #[test]
    fn theta_geometry_examples() {
        let sch = config_a();
        let g = theta_geometry(&sch, 40).unwrap();
        assert_eq!(g[0].m, BigUint::one());
        assert_eq!(g[2].m, BigUint::from(16u32));
        // eps_3 = (1 - 32/128) / (16 * 32 * 64)
        assert_eq!(g[2].eps(&BigUint::from(16u32 * 32 * 64)), rat(3, 4 * 16 * 32 * 64));
        for lg in &g {
            let a = sch.phi_inv(lg.k).unwrap().a;
            if lg.level == Some(1) {
                assert!(lg.m.is_one());
            } else {
                assert!(lg.m >= &lg.scale_step / BigUint::from(a * a));
            }
        }
    }

    #[test]
    fn basic_interval_examples() {
        let sch = config_a();
        let g = theta_geometry(&sch, 5).unwrap();
        assert_eq!(basic_intervals(&sch, 1, 100).unwrap().intervals.len(), 1);
        let mut parent: Option<IntervalSet> = None;
        let mut steps = BigUint::one();
        for k in 1..=4u64 {
            steps *= &g[k as usize - 1].scale_step;
            let set = basic_intervals(&sch, k, 10_000).unwrap();
            let expected: BigUint = g[..k as usize].iter().map(|l| l.m.clone()).product();
            assert_eq!(BigUint::from(set.intervals.len()), expected);
            if let Some(gap) = set.min_gap() {
                assert!(gap >= g[k as usize - 1].eps(&steps));
            }
            if let Some(p) = &parent {
                let outer = p.as_rationals();
                for (lo, hi) in set.as_rationals() {
                    assert!(outer.iter().any(|(a, b)| a <= &lo && &hi <= b));
                }
            }
            parent = Some(set);
        }
        assert_eq!(basic_intervals(&sch, 3, 100).unwrap().intervals.len(), 16);
        assert!(matches!(basic_intervals(&sch, 5, 10_000), Err(Error::TooManyIntervals { .. })));
    }

    #[test]
    fn trace_stays_in_unit_interval() {
        let sch = config_a();
        let g = theta_geometry(&sch, 300).unwrap();
        let exact = falconer_lower_bound(&g, &LogScale::new(64), 50).unwrap();
        let bound = falconer_from_logs(&bound_substituted_logs(&g, &LogScale::new(64)).unwrap(), 1, 50).unwrap();
        for (e, b) in exact.points.iter().zip(&bound.points) {
            assert!(e.approx >= 0.0 && e.approx <= 1.0);
            assert!(e.approx >= b.approx - 1e-9);
        }
    }

    #[test]
    fn csv_switches_to_symbolic_denominators() {
        let sch = config_a();
        let g = theta_geometry(&sch, 30).unwrap();
        let tr = falconer_lower_bound(&g, &LogScale::new(64), 5).unwrap();
        let mut buf = Vec::new();
        write_trace_csv(&g, &tr, 40, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "k,i(k),omega_k,eps_num,eps_den,d_k");
        assert!(lines[1].starts_with("1,1,1,"));
        assert!(lines[1].ends_with(','));
        assert!(lines[3].starts_with("3,2,16,3,"));
        assert!(lines[30].contains("q[1..30]*4"));
    }
}
