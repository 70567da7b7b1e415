//! Star discrepancy, almost-arithmetic progressions, discrepancy bounds and
//! the block-count normality diagnostics.

use num_bigint::BigInt;
use num_traits::{One, Signed, Zero};

use crate::error::{Error, Result};
use crate::expansion::{count_block, Block, DigitStream};
use crate::numeric::{approx_f64, cmp_with_hint, in_unit_interval, rat, rat_big, rat_u64, sqrt_lower, Rational};
use crate::sequences::{partial_sum_qnk, BasicSequence};

/// Finite sequence of points in `[0, 1)`, with cached float approximations
/// used only to order points and shortlist candidates.
#[derive(Clone, Debug)]
pub struct PointSequence {
    values: Vec<Rational>,
    approx: Vec<f64>,
}

impl PointSequence {
    pub fn new(values: Vec<Rational>) -> Result<Self> {
        if let Some(v) = values.iter().find(|v| !in_unit_interval(v)) {
            return Err(Error::OutsideUnitInterval(v.to_string()));
        }
        let approx = values.iter().map(approx_f64).collect();
        Ok(Self { values, approx })
    }

    /// The points `E_n / q_n` of a digit prefix.
    pub fn from_digits(stream: &DigitStream) -> Self {
        Self::new(stream.ratios()).expect("digits are below their bases")
    }

    pub fn values(&self) -> &[Rational] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn prefix(&self, n: usize) -> Self {
        Self { values: self.values[..n].to_vec(), approx: self.approx[..n].to_vec() }
    }

    pub fn concat(parts: &[PointSequence]) -> Self {
        Self {
            values: parts.iter().flat_map(|p| p.values.iter().cloned()).collect(),
            approx: parts.iter().flat_map(|p| p.approx.iter().copied()).collect(),
        }
    }

    fn sorted_order(&self) -> Vec<usize> {
        let mut idx: Vec<usize> = (0..self.values.len()).collect();
        idx.sort_by(|&a, &b| cmp_with_hint(&self.values[a], self.approx[a], &self.values[b], self.approx[b]));
        idx
    }
}

/// `A([0, gamma), z)` for `gamma` in `(0, 1]`.
pub fn count_below(seq: &PointSequence, gamma: &Rational) -> Result<u64> {
    if !gamma.is_positive() || gamma > &Rational::one() {
        return Err(Error::InvalidThreshold(gamma.to_string()));
    }
    Ok(seq.values.iter().filter(|v| *v < gamma).count() as u64)
}

/// Exact `D_N^*` from the sorted-points formula
/// `max_i max(x_(i) - (i-1)/N, i/N - x_(i))`.
pub fn star_discrepancy(seq: &PointSequence) -> Result<Rational> {
    if seq.is_empty() {
        return Err(Error::EmptySequence);
    }
    let order = seq.sorted_order();
    let n = order.len() as f64;
    // Shortlist terms whose float value is near the float maximum, then decide exactly.
    let terms: Vec<(f64, f64)> = order
        .iter()
        .enumerate()
        .map(|(i, &p)| {
            let x = seq.approx[p];
            (x - i as f64 / n, (i + 1) as f64 / n - x)
        })
        .collect();
    let best = terms.iter().fold(f64::NEG_INFINITY, |m, &(a, b)| m.max(a).max(b));
    let cutoff = best - 1e-9;
    let big_n = seq.len() as u64;
    let mut exact: Option<Rational> = None;
    for (i, &(a, b)) in terms.iter().enumerate() {
        let x = &seq.values[order[i]];
        if a >= cutoff {
            let v = x - Rational::new(BigInt::from(i), BigInt::from(big_n));
            if exact.as_ref().is_none_or(|e| &v > e) {
                exact = Some(v);
            }
        }
        if b >= cutoff {
            let v = Rational::new(BigInt::from(i + 1), BigInt::from(big_n)) - x;
            if exact.as_ref().is_none_or(|e| &v > e) {
                exact = Some(v);
            }
        }
    }
    Ok(exact.expect("at least one term reaches the maximum"))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum AapCondition {
    /// `0 <= x_1 <= eta + delta eta`
    First = 61,
    /// `eta - delta eta <= x_{n+1} - x_n <= eta + delta eta`
    Gaps = 62,
    /// `1 - eta - delta eta <= x_N < 1`
    Last = 63,
}

impl AapCondition {
    pub fn number(self) -> u32 {
        self as u32
    }
}

/// Outcome of the exact search for an almost-arithmetic progression witness.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AapCertificate {
    pub delta: Rational,
    pub epsilon: Rational,
    /// Largest admissible `eta` when accepted.
    pub eta: Option<Rational>,
    pub failing_condition: Option<AapCondition>,
}

impl AapCertificate {
    pub fn accepted(&self) -> bool {
        self.eta.is_some()
    }
}

/// Decides whether sorted points form an almost-arithmetic progression-`(delta, epsilon)`.
///
/// Every condition is linear in `eta`, so the admissible set is an interval;
/// it is intersected condition by condition and the first condition that
/// empties it is reported.
pub fn verify_aap(seq: &PointSequence, delta: &Rational, epsilon: &Rational) -> Result<AapCertificate> {
    if delta.is_negative() || delta >= &Rational::one() {
        return Err(Error::InvalidArgument(format!("delta {delta} is outside [0, 1)")));
    }
    if !epsilon.is_positive() {
        return Err(Error::InvalidArgument(format!("epsilon {epsilon} is not positive")));
    }
    let x = seq.values();
    if x.is_empty() {
        return Err(Error::EmptySequence);
    }
    if let Some(i) = x.windows(2).position(|w| w[0] >= w[1]) {
        return Err(Error::Unsorted(i + 1));
    }
    let up = Rational::one() + delta;
    let down = Rational::one() - delta;
    // eta ranges over (lo, hi] initially, then [lo, hi] once lo is set by a constraint.
    let mut lo = Rational::zero();
    let mut hi = epsilon.clone();
    let rejected = |c| AapCertificate {
        delta: delta.clone(),
        epsilon: epsilon.clone(),
        eta: None,
        failing_condition: Some(c),
    };

    lo = lo.max(&x[0] / &up);
    if lo > hi {
        return Ok(rejected(AapCondition::First));
    }
    for w in x.windows(2) {
        let gap = &w[1] - &w[0];
        lo = lo.max(&gap / &up);
        hi = hi.min(&gap / &down);
        if lo > hi {
            return Ok(rejected(AapCondition::Gaps));
        }
    }
    let last = (Rational::one() - &x[x.len() - 1]) / &up;
    lo = lo.max(last);
    if lo > hi {
        return Ok(rejected(AapCondition::Last));
    }
    Ok(AapCertificate { delta: delta.clone(), epsilon: epsilon.clone(), eta: Some(hi), failing_condition: None })
}

/// Upper bounds for `D_N^*` of an almost-arithmetic progression.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AapBound {
    /// `1/N + delta / (1 + sqrt(1 - delta^2))`, or `min(eta, 1/N)` when `delta = 0`.
    pub sharp: Rational,
    /// `1/N + delta`.
    pub coarse: Rational,
}

/// The square root is bounded below to 64 bits, so `sharp` is never too small.
pub fn aap_bound(n: u64, delta: &Rational, eta: &Rational) -> Result<AapBound> {
    if n == 0 {
        return Err(Error::InvalidArgument("N must be positive".into()));
    }
    if delta.is_negative() || delta >= &Rational::one() {
        return Err(Error::InvalidArgument(format!("delta {delta} is outside [0, 1)")));
    }
    let inv = rat(1, 1) / rat_u64(n);
    let coarse = &inv + delta;
    let sharp = if delta.is_zero() {
        eta.clone().min(inv)
    } else {
        let root = sqrt_lower(&(Rational::one() - delta * delta), 64);
        inv + delta / (Rational::one() + root)
    };
    Ok(AapBound { sharp, coarse })
}

/// Weighted mean `sum w_i e_i / sum w_i` bounding the star discrepancy of a
/// concatenation; each entry is `(points contributed, per-block bound)`.
pub fn concat_bound(blocks: &[(u64, Rational)]) -> Result<Rational> {
    if blocks.is_empty() {
        return Err(Error::EmptySequence);
    }
    let mut num = Rational::zero();
    let mut den = 0u64;
    for (w, e) in blocks {
        if *w == 0 {
            return Err(Error::InvalidArgument("block weights must be positive".into()));
        }
        num += rat_u64(*w) * e;
        den = den.checked_add(*w).ok_or(Error::Overflow("block weights"))?;
    }
    Ok(num / rat_u64(den))
}

/// `N_n(B)` and its normalizations for one block.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BlockRow {
    pub block: Block,
    pub count: u64,
    /// `N_n(B) / Q_n^{(k)}`, undefined when `Q_n^{(k)} = 0`.
    pub ratio: Option<Rational>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct NormalityReport {
    pub k: u64,
    pub n: u64,
    pub qnk: Rational,
    pub rows: Vec<BlockRow>,
    /// `(a, b, N_n(B_a) / N_n(B_b))` for all ordered pairs `a != b`.
    pub pairwise: Vec<(usize, usize, Option<Rational>)>,
}

pub fn normality_report(
    stream: &DigitStream,
    rule: &BasicSequence,
    k: u64,
    n: u64,
    blocks: &[Block],
) -> Result<NormalityReport> {
    if let Some(b) = blocks.iter().find(|b| b.len() != k) {
        return Err(Error::InvalidArgument(format!("block {b} does not have length {k}")));
    }
    let qnk = partial_sum_qnk(rule, n, k)?;
    let mut rows = Vec::with_capacity(blocks.len());
    for b in blocks {
        let count = count_block(stream, b, n)?;
        let ratio = (!qnk.is_zero()).then(|| rat_u64(count) / &qnk);
        rows.push(BlockRow { block: b.clone(), count, ratio });
    }
    let mut pairwise = Vec::new();
    for a in 0..rows.len() {
        for b in 0..rows.len() {
            if a != b {
                let r = (rows[b].count != 0).then(|| rat_u64(rows[a].count) / rat_u64(rows[b].count));
                pairwise.push((a, b, r));
            }
        }
    }
    Ok(NormalityReport { k, n, qnk, rows, pairwise })
}

/// One row of a discrepancy report.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DiscrepancyRow {
    pub n: u64,
    pub dstar: Rational,
    pub bound: Option<Rational>,
    pub certificate: String,
    /// `(1/N) sum_{n<=N} 1/q_n`, printed beside the distribution test.
    pub salat_proxy: Rational,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct DiscrepancyReport {
    pub rows: Vec<DiscrepancyRow>,
}

impl DiscrepancyReport {
    pub fn violations(&self) -> usize {
        self.rows.iter().filter(|r| r.certificate.starts_with("FAIL")).count()
    }

    /// CSV with exact numerator/denominator columns and decimal conveniences.
    pub fn write_csv<W: std::io::Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["N", "Dstar_num", "Dstar_den", "bound_num", "bound_den", "certificate", "Dstar", "salat_proxy"])?;
        for r in &self.rows {
            let (bn, bd) = match &r.bound {
                Some(b) => (b.numer().to_string(), b.denom().to_string()),
                None => (String::new(), String::new()),
            };
            w.write_record([
                r.n.to_string(),
                r.dstar.numer().to_string(),
                r.dstar.denom().to_string(),
                bn,
                bd,
                r.certificate.clone(),
                crate::numeric::decimal(&r.dstar, 12),
                crate::numeric::decimal(&r.salat_proxy, 12),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// `D_N^*` of `(E_n / q_n)_{n <= N}` for each requested `N`. Rows carry no bound.
pub fn dn_diagnostic(stream: &DigitStream, prefix_lengths: &[u64]) -> Result<DiscrepancyReport> {
    let points = PointSequence::from_digits(stream);
    let mut rows = Vec::with_capacity(prefix_lengths.len());
    for &n in prefix_lengths {
        if n == 0 || n > stream.len() {
            return Err(Error::InsufficientDigits { needed: n.max(1), available: stream.len() });
        }
        let dstar = star_discrepancy(&points.prefix(n as usize))?;
        let recip: Rational = stream.bases()[..n as usize]
            .iter()
            .map(|q| rat_big(&num_bigint::BigUint::one(), q))
            .sum();
        rows.push(DiscrepancyRow {
            n,
            dstar,
            bound: None,
            certificate: "none".into(),
            salat_proxy: recip / rat_u64(n),
        });
    }
    Ok(DiscrepancyReport { rows })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expansion::Provenance;
    use num_bigint::BigUint;
    use proptest::prelude::*;

    fn pts(v: &[(i64, i64)]) -> PointSequence {
        PointSequence::new(v.iter().map(|&(a, b)| rat(a, b)).collect()).unwrap()
    }

    /// Supremum of `|A([0,g))/N - g|` over `g = x` and `g -> x+` at each point, and `g = 1`.
    fn brute_dstar(values: &[Rational]) -> Rational {
        let n = rat_u64(values.len() as u64);
        let mut best = Rational::zero();
        let mut gammas: Vec<Rational> = values.to_vec();
        gammas.push(Rational::one());
        for g in &gammas {
            let below = values.iter().filter(|v| *v < g).count() as u64;
            let at_or_below = values.iter().filter(|v| *v <= g).count() as u64;
            best = best.max((rat_u64(below) / &n - g).abs());
            // right limit at g: count includes g itself
            if g < &Rational::one() {
                best = best.max((rat_u64(at_or_below) / &n - g).abs());
            }
        }
        best
    }

    #[test]
    fn count_below_examples() {
        assert_eq!(count_below(&pts(&[(0, 1)]), &rat(1, 1)).unwrap(), 1);
        assert_eq!(count_below(&pts(&[(1, 4), (3, 4)]), &rat(1, 2)).unwrap(), 1);
        assert_eq!(count_below(&pts(&[]), &rat(1, 2)).unwrap(), 0);
        assert!(count_below(&pts(&[]), &rat(0, 1)).is_err());
        assert!(count_below(&pts(&[]), &rat(3, 2)).is_err());
    }

    #[test]
    fn star_discrepancy_examples() {
        assert_eq!(star_discrepancy(&pts(&[(0, 1)])).unwrap(), rat(1, 1));
        assert_eq!(star_discrepancy(&pts(&[(1, 2)])).unwrap(), rat(1, 2));
        assert_eq!(star_discrepancy(&pts(&[(1, 4), (3, 4)])).unwrap(), rat(1, 4));
        assert!(matches!(star_discrepancy(&pts(&[])), Err(Error::EmptySequence)));
        assert!(PointSequence::new(vec![rat(1, 1)]).is_err());
    }

    #[test]
    fn aap_examples() {
        let c = verify_aap(&pts(&[(1, 4), (2, 4), (3, 4)]), &rat(0, 1), &rat(1, 4)).unwrap();
        assert_eq!(c.eta, Some(rat(1, 4)));
        let c = verify_aap(&pts(&[(1, 10), (9, 10)]), &rat(0, 1), &rat(1, 4)).unwrap();
        assert!(!c.accepted());
        assert_eq!(c.failing_condition, Some(AapCondition::Gaps));
        let c = verify_aap(&pts(&[(1, 4), (3, 4)]), &rat(1, 2), &rat(1, 2)).unwrap();
        assert_eq!(c.eta, Some(rat(1, 2)));
        assert!(matches!(verify_aap(&pts(&[(1, 2), (1, 4)]), &rat(0, 1), &rat(1, 2)), Err(Error::Unsorted(1))));
        let c = verify_aap(&pts(&[(1, 2), (3, 4)]), &rat(0, 1), &rat(1, 4)).unwrap();
        assert_eq!(c.failing_condition, Some(AapCondition::First));
        let c = verify_aap(&pts(&[(1, 8), (2, 8)]), &rat(0, 1), &rat(1, 8)).unwrap();
        assert_eq!(c.failing_condition, Some(AapCondition::Last));
    }

    #[test]
    fn aap_bound_examples() {
        assert_eq!(aap_bound(8, &rat(0, 1), &rat(1, 4)).unwrap().sharp, rat(1, 8));
        let b = aap_bound(4, &rat(1, 2), &rat(1, 4)).unwrap();
        assert_eq!(b.coarse, rat(3, 4));
        // 1/4 + (1/2)/(1 + sqrt(3)/2) = 1/4 + 1/(2 + sqrt 3)
        let exact = 0.25 + 1.0 / (2.0 + 3f64.sqrt());
        assert!(approx_f64(&b.sharp) >= exact - 1e-15);
        assert!(approx_f64(&b.sharp) - exact < 1e-12);
        for d in [(1i64, 100i64), (1, 10), (1, 3), (9, 10)] {
            let delta = rat(d.0, d.1);
            let zero = aap_bound(10, &rat(0, 1), &rat(1, 5)).unwrap().sharp;
            assert!(zero <= aap_bound(10, &delta, &rat(1, 5)).unwrap().sharp + &delta);
        }
    }

    #[test]
    fn concat_bound_examples() {
        assert_eq!(concat_bound(&[(7, rat(2, 9))]).unwrap(), rat(2, 9));
        assert_eq!(concat_bound(&[(10, rat(1, 10)), (10, rat(3, 10))]).unwrap(), rat(1, 5));
        assert_eq!(concat_bound(&[(3, rat(1, 1)), (5, rat(1, 1))]).unwrap(), rat(1, 1));
        assert!(concat_bound(&[]).is_err());
    }

    fn alternating(n: usize) -> DigitStream {
        let c2 = BasicSequence::constant(2).unwrap();
        let d = (0..n).map(|i| BigUint::from((i % 2) as u32)).collect();
        DigitStream::from_rule(&c2, d, Provenance::Pattern).unwrap()
    }

    #[test]
    fn normality_examples() {
        let c2 = BasicSequence::constant(2).unwrap();
        let s = alternating(101);
        let zero = Block::from_u64(&[0]).unwrap();
        let one = Block::from_u64(&[1]).unwrap();
        let r = normality_report(&s, &c2, 1, 100, &[zero.clone(), one]).unwrap();
        assert_eq!(r.rows[0].count, 50);
        assert_eq!(r.rows[0].ratio, Some(rat(1, 1)));
        assert_eq!(r.pairwise[0].2, Some(rat(1, 1)));
        let r = normality_report(&s, &c2, 1, 0, std::slice::from_ref(&zero)).unwrap();
        assert_eq!(r.rows[0].count, 0);
        assert_eq!(r.rows[0].ratio, None);
        assert!(normality_report(&s, &c2, 2, 10, &[zero]).is_err());
    }

    #[test]
    fn dn_examples() {
        let c3 = BasicSequence::constant(3).unwrap();
        let z = DigitStream::from_rule(&c3, vec![BigUint::zero(); 12], Provenance::Pattern).unwrap();
        let rep = dn_diagnostic(&z, &[1, 5, 12]).unwrap();
        assert!(rep.rows.iter().all(|r| r.dstar == rat(1, 1)));
        assert_eq!(rep.rows[0].salat_proxy, rat(1, 3));
        let mut buf = Vec::new();
        rep.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("N,Dstar_num,Dstar_den,bound_num,bound_den,certificate"));
        assert!(text.contains("\n12,1,1,,,none,1.000000000000,0.333333333333"));
    }

    fn random_points() -> impl Strategy<Value = Vec<Rational>> {
        prop::collection::vec((0i64..1000, 1i64..1000), 1..50).prop_map(|v| {
            v.into_iter().map(|(a, b)| rat(a % b, b)).collect()
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(200))]

        #[test]
        fn closed_form_matches_brute_force(v in random_points()) {
            let seq = PointSequence::new(v.clone()).unwrap();
            let d = star_discrepancy(&seq).unwrap();
            prop_assert_eq!(&d, &brute_dstar(&v));
            let n = rat_u64(v.len() as u64);
            prop_assert!(d >= rat(1, 2) / &n && d <= rat(1, 1));
        }

        #[test]
        fn accepted_progressions_obey_coarse_bound(
            n in 2u64..40, shift in 0u64..1000, jitter in prop::collection::vec(0u64..100, 40), dnum in 0i64..50
        ) {
            // near-arithmetic points (i + theta_i) / n with small perturbations
            let delta = rat(dnum, 100);
            let base = rat(shift as i64, 1000 * n as i64);
            let mut vals = Vec::new();
            for i in 0..n {
                let wiggle = rat(jitter[i as usize] as i64, 100_000 * n as i64);
                vals.push(rat(i as i64, n as i64) + &base + wiggle);
            }
            prop_assume!(vals.iter().all(in_unit_interval));
            let seq = PointSequence::new(vals).unwrap();
            let cert = verify_aap(&seq, &delta, &rat(1, n as i64)).unwrap();
            if let Some(eta) = &cert.eta {
                let d = star_discrepancy(&seq).unwrap();
                let b = aap_bound(n, &delta, eta).unwrap();
                prop_assert!(d <= b.coarse);
                prop_assert!(d <= b.sharp);
            }
        }

        #[test]
        fn concatenation_obeys_weighted_bound(parts in prop::collection::vec((random_points(), 1u64..4), 1..5)) {
            let mut seqs = Vec::new();
            let mut entries = Vec::new();
            for (v, reps) in &parts {
                let s = PointSequence::new(v.clone()).unwrap();
                let d = star_discrepancy(&s).unwrap();
                for _ in 0..*reps {
                    seqs.push(s.clone());
                }
                entries.push((reps * v.len() as u64, d));
            }
            let whole = PointSequence::concat(&seqs);
            prop_assert!(star_discrepancy(&whole).unwrap() <= concat_bound(&entries).unwrap());
        }

        #[test]
        fn pairwise_ratios_are_reciprocal(digits in prop::collection::vec(0u32..3, 5..60)) {
            let c3 = BasicSequence::constant(3).unwrap();
            let d: Vec<BigUint> = digits.iter().map(|&x| BigUint::from(x)).collect();
            let n = d.len() as u64;
            let s = DigitStream::from_rule(&c3, d, Provenance::Pattern).unwrap();
            let blocks: Vec<Block> = (0..3).map(|b| Block::from_u64(&[b]).unwrap()).collect();
            let r = normality_report(&s, &c3, 1, n, &blocks).unwrap();
            for (a, b, x) in &r.pairwise {
                let back = r.pairwise.iter().find(|(c, e, _)| c == b && e == a).unwrap();
                if let (Some(x), Some(y)) = (x, &back.2) {
                    prop_assert_eq!(x * y, rat(1, 1));
                }
            }
        }
    }
}
