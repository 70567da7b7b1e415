//! The pair `P ~_2 Q` with `x` normal for `P` only and `y` normal for `Q` only.
//!
//! `P` repeats `2m` exactly `2m` times. `x` has P-digits `(t, m + t)` for
//! `t = 0..m` in block `m`, and `y` has Q-digits `4mt` for `t = 0..m` in the
//! `m`-th block of `Q = (4m^2 repeated m times)`.

use num_bigint::BigUint;
use serde::Serialize;

use crate::equidist::{dn_diagnostic, DiscrepancyReport};
use crate::error::{Error, Result};
use crate::expansion::{refine, t_enclosure, transcode, DigitStream, Provenance};
use crate::numeric::{approx_f64, rat, Rational};
use crate::sequences::{contract, Affine, BasicSequence, ChainSpec};

/// First ten values of `Q` as printed.
pub const LISTED_Q: [u64; 10] = [4, 16, 16, 36, 36, 36, 64, 64, 64, 64];
/// First ten Q-digits of `x` as printed.
pub const LISTED_X_Q: [u64; 10] = [2, 2, 7, 3, 10, 17, 4, 13, 22, 31];
/// First ten digits of `y` as printed; the last entry is not below `q_10 = 64`.
pub const LISTED_F: [u64; 10] = [0, 0, 8, 0, 12, 24, 0, 16, 32, 64];
/// Printed P-expansion of `y`.
pub const LISTED_Y_P: &str = "00002000204000204060";

/// Largest look-ahead tried when bounding `T_{Q,n}(x)` away from 1/2.
pub const MAX_ENCLOSURE_DEPTH: u64 = 8;

pub fn rule_p() -> BasicSequence {
    BasicSequence::block_repetition(Affine::new(2, 0), Affine::new(2, 0)).expect("valid block rule")
}

pub fn rule_q() -> BasicSequence {
    contract(&rule_p(), 2).expect("valid contraction")
}

pub fn chain() -> ChainSpec {
    ChainSpec::new(rule_p(), BasicSequence::constant(2).expect("constant"), 2).expect("valid chain")
}

/// The first `len` P-digits of `x`.
pub fn x_digits(len: usize) -> Vec<BigUint> {
    let mut out = Vec::with_capacity(len);
    let mut m = 1u64;
    while out.len() < len {
        for t in 0..m {
            out.push(BigUint::from(t));
            out.push(BigUint::from(m + t));
        }
        m += 1;
    }
    out.truncate(len);
    out
}

/// The first `len` Q-digits of `y`.
pub fn y_digits(len: usize) -> Vec<BigUint> {
    let mut out = Vec::with_capacity(len);
    let mut m = 1u64;
    while out.len() < len {
        out.extend((0..m).map(|t| BigUint::from(4 * m * t)));
        m += 1;
    }
    out.truncate(len);
    out
}

pub fn x_stream(len: u64) -> Result<DigitStream> {
    DigitStream::from_rule(&rule_p(), x_digits(len as usize), Provenance::Pattern)
}

pub fn y_stream(len: u64) -> Result<DigitStream> {
    DigitStream::from_rule(&rule_q(), y_digits(len as usize), Provenance::Pattern)
}

#[derive(Clone, Debug, Serialize)]
pub struct ListedCheck<T> {
    pub listed: T,
    pub computed: T,
    pub matches: bool,
}

impl<T: PartialEq + Clone> ListedCheck<T> {
    fn new(listed: T, computed: T) -> Self {
        let matches = listed == computed;
        Self { listed, computed, matches }
    }
}

/// Outcome of bounding every `T_{Q,n}(x)`, `n <= horizon`, strictly below 1/2.
#[derive(Clone, Debug, Serialize)]
pub struct EnclosureSummary {
    pub horizon: u64,
    pub all_below_half: bool,
    /// First `n` whose enclosure could not be pushed below 1/2.
    pub first_failure: Option<u64>,
    /// Largest upper bound over all `n`, as `num/den`.
    pub max_upper: String,
    pub max_upper_approx: f64,
    pub argmax: u64,
    pub deepest_lookahead: u64,
}

#[derive(Clone, Debug, Serialize)]
pub struct TrendRow {
    pub n: u64,
    pub dstar: String,
    pub dstar_approx: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct Trend {
    pub label: String,
    pub rows: Vec<TrendRow>,
}

impl Trend {
    fn new(label: &str, report: DiscrepancyReport) -> Self {
        let rows = report
            .rows
            .iter()
            .map(|r| TrendRow { n: r.n, dstar: r.dstar.to_string(), dstar_approx: approx_f64(&r.dstar) })
            .collect();
        Self { label: label.into(), rows }
    }

    /// `D*` at the longest prefix.
    pub fn last(&self) -> f64 {
        self.rows.last().map(|r| r.dstar_approx).unwrap_or(f64::NAN)
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct PairReport {
    pub q_values: ListedCheck<Vec<u64>>,
    /// Positions 2 to 10 of `x` in base `Q`.
    pub x_tail: ListedCheck<Vec<u64>>,
    /// Position 1 of `x` in base `Q`; a mismatch here is the known misprint.
    pub x_first: ListedCheck<u64>,
    pub y_p_digits: ListedCheck<String>,
    /// The printed `F_10` and the value actually used.
    pub f10_listed: u64,
    pub f10_used: u64,
    pub f10_listed_valid: bool,
    pub enclosure: EnclosureSummary,
    pub trends: Vec<Trend>,
    pub flags: Vec<String>,
}

impl PairReport {
    /// Every check except the two documented misprints.
    pub fn passed(&self) -> bool {
        self.q_values.matches && self.x_tail.matches && self.y_p_digits.matches && self.enclosure.all_below_half
    }
}

fn small(v: &[BigUint]) -> Vec<u64> {
    v.iter().map(|d| u64::try_from(d).expect("small digit")).collect()
}

/// Bounds `T_{Q,n}(x)` for `n = 0..=horizon`, deepening the look-ahead until
/// the upper end is strictly below 1/2.
pub fn enclosure_summary(x_q: &DigitStream, horizon: u64) -> Result<EnclosureSummary> {
    let half = rat(1, 2);
    let mut max_upper = Rational::from_integer(0.into());
    let (mut argmax, mut deepest) = (0, 0);
    let mut first_failure = None;
    for n in 0..=horizon {
        let mut found = None;
        for depth in 1..=MAX_ENCLOSURE_DEPTH {
            let e = t_enclosure(x_q, n, depth)?;
            if e.hi < half {
                found = Some((depth, e.hi));
                break;
            }
        }
        match found {
            Some((depth, hi)) => {
                deepest = deepest.max(depth);
                if hi > max_upper {
                    max_upper = hi;
                    argmax = n;
                }
            }
            None => {
                first_failure = Some(n);
                break;
            }
        }
    }
    Ok(EnclosureSummary {
        horizon,
        all_below_half: first_failure.is_none(),
        first_failure,
        max_upper: max_upper.to_string(),
        max_upper_approx: approx_f64(&max_upper),
        argmax,
        deepest_lookahead: deepest,
    })
}

fn horizons(len: u64) -> Vec<u64> {
    let mut out: Vec<u64> = std::iter::successors(Some(10u64), |n| n.checked_mul(10)).take_while(|&n| n < len).collect();
    out.push(len);
    out
}

/// Runs every check with `T_{Q,n}(x)` bounded for `n <= horizon`.
pub fn reproduce(horizon: u64) -> Result<PairReport> {
    if horizon == 0 {
        return Err(Error::InvalidArgument("horizon must be positive".into()));
    }
    let spec = chain();
    let q_len = horizon + MAX_ENCLOSURE_DEPTH;
    let x = x_stream(2 * q_len)?;
    let x_q = transcode(&x, &spec, 2)?;
    let y = y_stream(q_len)?;
    let y_p = refine(&y.truncated(10)?, &rule_p(), 2)?;

    let q_values = ListedCheck::new(LISTED_Q.to_vec(), small(&rule_q().prefix(10)?));
    let computed_x = small(&x_q.digits()[..10]);
    let x_tail = ListedCheck::new(LISTED_X_Q[1..].to_vec(), computed_x[1..].to_vec());
    let x_first = ListedCheck::new(LISTED_X_Q[0], computed_x[0]);
    let y_listed: String = y_p.digits().iter().map(|d| d.to_string()).collect();
    let y_p_digits = ListedCheck::new(LISTED_Y_P.to_string(), y_listed);
    let f10_used = u64::try_from(&y.digits()[9]).expect("small digit");
    let f10_listed_valid = BigUint::from(LISTED_F[9]) < *y.base(10)?;

    let enclosure = enclosure_summary(&x_q, horizon)?;

    let mut trends = Vec::new();
    for (label, stream) in [("x under P", &x), ("x under Q", &x_q), ("y under Q", &y)] {
        trends.push(Trend::new(label, dn_diagnostic(stream, &horizons(stream.len()))?));
    }
    let y_p_full = refine(&y, &rule_p(), 2)?;
    trends.push(Trend::new("y under P", dn_diagnostic(&y_p_full, &horizons(y_p_full.len()))?));

    let mut flags = Vec::new();
    if !x_first.matches {
        flags.push(format!(
            "x position 1 in base Q: printed {}, digits (E_1, E_2) = (0, 1) give {}",
            x_first.listed, x_first.computed
        ));
    }
    if !f10_listed_valid || f10_used != LISTED_F[9] {
        flags.push(format!(
            "F_10 printed as {} (not below q_10 = {}); using {} from the block pattern",
            LISTED_F[9],
            y.base(10)?,
            f10_used
        ));
    }
    Ok(PairReport { q_values, x_tail, x_first, y_p_digits, f10_listed: LISTED_F[9], f10_used, f10_listed_valid, enclosure, trends, flags })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn generators_follow_listed_prefixes() {
        assert_eq!(small(&x_digits(20)), vec![0, 1, 0, 2, 1, 3, 0, 3, 1, 4, 2, 5, 0, 4, 1, 5, 2, 6, 3, 7]);
        assert_eq!(small(&y_digits(10)), vec![0, 0, 8, 0, 12, 24, 0, 16, 32, 48]);
        assert_eq!(small(&rule_p().prefix(20).unwrap())[..8], [2, 2, 4, 4, 4, 4, 6, 6]);
    }

    #[test]
    fn reproduction_passes_with_flags() {
        let r = reproduce(200).unwrap();
        assert!(r.passed());
        assert!(!r.x_first.matches);
        assert_eq!((r.x_first.listed, r.x_first.computed), (2, 1));
        assert!(!r.f10_listed_valid);
        assert_eq!(r.f10_used, 48);
        assert_eq!(r.flags.len(), 2);
        assert_eq!(r.enclosure.deepest_lookahead, 2);
        assert!(r.enclosure.max_upper_approx < 0.5);
    }

    #[test]
    fn discrepancy_trends_separate_the_bases() {
        let r = reproduce(500).unwrap();
        let last = |label: &str| r.trends.iter().find(|t| t.label == label).unwrap().last();
        assert!(last("x under P") < 0.1);
        assert!(last("y under Q") < 0.1);
        assert!(last("x under Q") >= 0.5);
        assert!(last("y under P") > 0.4);
    }
}
