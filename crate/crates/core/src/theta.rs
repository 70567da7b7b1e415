//! The `Theta_{Q,S}` construction: schedule tables, the coordinate bijection,
//! digit windows, digit generation, `Y` subsequences and discrepancy envelopes.

use std::fmt;
use std::str::FromStr;

use num_bigint::{BigUint, RandBigInt};
use num_traits::{One, ToPrimitive, Zero};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::equidist::{star_discrepancy, verify_aap, AapCertificate, DiscrepancyReport, DiscrepancyRow, PointSequence};
use crate::error::{Error, Result};
use crate::expansion::{mod_s_gap, transcode, DigitStream, Provenance};
use crate::numeric::{ceil_div, rat, rat_big, rat_u64, Rational};
use crate::sequences::ChainSpec;

/// Positions scanned when looking for the first threshold crossing.
pub const NU_SCAN_BUDGET: u64 = 1 << 20;

/// Window convention written into every schedule dump.
pub const WINDOW_SHIFT: &str = "c-1";

/// Sampling convention for `Y` blocks.
pub const Y_SAMPLING: &str = "c = 1 + S_j*m for m = 0..S_k/S_j-1";

/// `nu_j`: the least `t` with `q_m >= S_j^(2j)` for every `m >= t`.
///
/// Needs a certified monotone tail. The scan stops at the first crossing at or
/// beyond the certified index; every later value is at least as large.
pub fn compute_nu(spec: &ChainSpec, j: usize) -> Result<u64> {
    if j < 2 {
        return Err(Error::InvalidArgument("nu_j is defined for j >= 2".into()));
    }
    let tail = spec.base.monotone_tail_from().ok_or(Error::UncertifiedTail(j))?.max(1);
    let threshold = BigUint::from(spec.big_s(j)?).pow(2 * j as u32);
    let mut last_below = 0u64;
    for m in 1..=NU_SCAN_BUDGET {
        if spec.base.qn(m)? >= threshold {
            if m >= tail {
                return Ok(last_below + 1);
            }
        } else {
            last_below = m;
        }
    }
    Err(Error::ThresholdNotCrossed { j, threshold: threshold.to_string(), budget: NU_SCAN_BUDGET })
}

/// Derived tables of the construction.
///
/// A chain of depth `J` schedules levels `1..=max(J-1, 1)`, since level `j`
/// needs `nu_{j+1}`.
#[derive(Clone, Debug)]
pub struct ThetaSchedule {
    spec: ChainSpec,
    /// `S_1, ..., S_{levels+1}`
    big_s: Vec<u64>,
    /// `s_1, ..., s_levels`
    small_s: Vec<u64>,
    /// `nu_1, ..., nu_{levels+1}`; `nu_1` is undefined.
    nu: Vec<Option<u64>>,
    /// `l_1, ..., l_levels`
    ell: Vec<u64>,
    /// `L_0, L_1, ..., L_levels`
    big_l: Vec<u64>,
}

fn mul(a: u64, b: u64) -> Result<u64> {
    a.checked_mul(b).ok_or(Error::Overflow("schedule table"))
}

pub fn build_schedule(spec: &ChainSpec) -> Result<ThetaSchedule> {
    let levels = spec.depth.saturating_sub(1).max(1);
    let big_s: Vec<u64> = (1..=levels + 1).map(|j| spec.big_s(j)).collect::<Result<_>>()?;
    let small_s: Vec<u64> = (1..=levels).map(|j| spec.s_at(j)).collect::<Result<_>>()?;
    let mut nu = vec![None];
    for j in 2..=levels + 1 {
        nu.push(Some(compute_nu(spec, j)?));
    }
    let nu_at = |j: usize| nu[j - 1].expect("nu_j for j >= 2");
    let mut ell = Vec::with_capacity(levels);
    let mut big_l = vec![0u64];
    for j in 1..=levels {
        let prev = big_l[j - 1];
        let s_j = big_s[j - 1];
        let l = if j == 1 {
            mul(small_s[0], nu_at(2))?
        } else {
            let factor = mul(mul(2 * j as u64, small_s[j - 1])?, nu_at(j + 1))? - 1;
            let total = mul(prev, factor)?;
            if total % s_j != 0 {
                return Err(Error::ScheduleInvariant(format!("S_{j} does not divide L_{} (2 j s_j nu_{} - 1)", j - 1, j + 1)));
            }
            total / s_j
        };
        ell.push(l);
        big_l.push(prev.checked_add(mul(s_j, l)?).ok_or(Error::Overflow("L_j"))?);
    }
    let schedule = ThetaSchedule { spec: spec.clone(), big_s, small_s, nu, ell, big_l };
    schedule.check_invariants()?;
    Ok(schedule)
}

/// Coordinates and digit window of one scheduled position.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PositionInfo {
    pub n: u64,
    pub i: usize,
    pub b: u64,
    pub c: u64,
    /// `a(n) = S_{i(n)}`
    pub a: u64,
    /// Half-open window `[lo, hi)` for `E_n / q_n`.
    pub lo: Rational,
    pub hi: Rational,
}

/// The admissible digits at one position: the contiguous range
/// `first, first + 1, ..., first + count - 1`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Candidates {
    pub first: BigUint,
    pub count: BigUint,
}

impl Candidates {
    pub fn last(&self) -> BigUint {
        &self.first + &self.count - 1u32
    }

    pub fn contains(&self, f: &BigUint) -> bool {
        f >= &self.first && f < &(&self.first + &self.count)
    }

    /// All candidates, refusing lists longer than `guard`.
    pub fn list(&self, guard: u64) -> Result<Vec<BigUint>> {
        let count = self.count.to_u64().filter(|&c| c <= guard).ok_or(Error::TooManyIntervals {
            count: self.count.to_string(),
            guard,
        })?;
        Ok((0..count).map(|i| &self.first + i).collect())
    }
}

impl ThetaSchedule {
    pub fn spec(&self) -> &ChainSpec {
        &self.spec
    }

    /// Number of scheduled levels.
    pub fn levels(&self) -> usize {
        self.ell.len()
    }

    /// Last scheduled position, `L_levels`.
    pub fn coverage(&self) -> u64 {
        self.big_l[self.levels()]
    }

    pub fn big_s(&self, j: usize) -> Result<u64> {
        self.big_s.get(j.wrapping_sub(1)).copied().ok_or(Error::LevelOutOfRange { j, depth: self.big_s.len() })
    }

    pub fn nu(&self, j: usize) -> Option<u64> {
        self.nu.get(j.wrapping_sub(1)).copied().flatten()
    }

    pub fn ell(&self, j: usize) -> Result<u64> {
        self.ell.get(j.wrapping_sub(1)).copied().ok_or(Error::LevelOutOfRange { j, depth: self.levels() })
    }

    /// `L_j` for `0 <= j <= levels`.
    pub fn big_l(&self, j: usize) -> Result<u64> {
        self.big_l.get(j).copied().ok_or(Error::LevelOutOfRange { j, depth: self.levels() })
    }

    pub fn s_table(&self) -> &[u64] {
        &self.big_s
    }

    pub fn nu_table(&self) -> &[Option<u64>] {
        &self.nu
    }

    pub fn ell_table(&self) -> &[u64] {
        &self.ell
    }

    /// `L_1, ..., L_levels`.
    pub fn big_l_table(&self) -> &[u64] {
        &self.big_l[1..]
    }

    /// Rechecks the divisibility and size identities of the tables.
    pub fn check_invariants(&self) -> Result<()> {
        for j in 1..=self.levels() {
            let s_j = self.big_s[j - 1];
            let s_next = self.big_s[j];
            let (l, prev, cur) = (self.ell[j - 1], self.big_l[j - 1], self.big_l[j]);
            let nu_next = self.nu(j + 1).expect("nu beyond level 1");
            let fail = |what: String| Err(Error::ScheduleInvariant(what));
            if s_next != s_j * self.small_s[j - 1] {
                return fail(format!("S_{} != S_{j} s_{j}", j + 1));
            }
            if cur % s_next != 0 {
                return fail(format!("S_{} does not divide L_{j} = {cur}", j + 1));
            }
            if l < j as u64 * self.small_s[j - 1] {
                return fail(format!("l_{j} = {l} < j s_j"));
            }
            if cur + 1 < nu_next {
                return fail(format!("L_{j} = {cur} < nu_{} - 1", j + 1));
            }
            if cur != prev + s_j * l {
                return fail(format!("L_{j} != L_{} + S_{j} l_{j}", j - 1));
            }
            if j >= 2 {
                let rhs = prev as u128 * (2 * j as u128 * self.small_s[j - 1] as u128 * nu_next as u128 - 1);
                if l as u128 * s_j as u128 != rhs {
                    return fail(format!("l_{j} S_{j} != L_{} (2 j s_j nu_{} - 1)", j - 1, j + 1));
                }
            }
        }
        Ok(())
    }

    /// `phi(j, b, c) = L_{j-1} + (b - 1) S_j + c`.
    pub fn phi(&self, j: usize, b: u64, c: u64) -> Result<u64> {
        let ok = j >= 1 && j <= self.levels() && b >= 1 && c >= 1;
        if !ok || b > self.ell[j - 1] || c > self.big_s[j - 1] {
            return Err(Error::NotInSchedule { j, b, c });
        }
        Ok(self.big_l[j - 1] + (b - 1) * self.big_s[j - 1] + c)
    }

    /// Level of position `n`.
    pub fn level_of(&self, n: u64) -> Result<usize> {
        if n == 0 {
            return Err(Error::ZeroPosition);
        }
        if n > self.coverage() {
            return Err(Error::BeyondSchedule { n, last: self.coverage() });
        }
        Ok(self.big_l.partition_point(|&l| l < n))
    }

    pub fn phi_inv(&self, n: u64) -> Result<PositionInfo> {
        let i = self.level_of(n)?;
        let a = self.big_s[i - 1];
        let r = n - self.big_l[i - 1] - 1;
        let (b, c) = (r / a + 1, r % a + 1);
        let (lo, hi) = self.window(i, c)?;
        Ok(PositionInfo { n, i, b, c, a, lo, hi })
    }

    /// Window for levels `i >= 2`: `[(c-1)/a + 1/a^2, (c-1)/a + 2/a^2)`.
    /// Level 1 uses `[1/q_n, 2/q_n)`, returned here with a zero placeholder.
    fn window(&self, i: usize, c: u64) -> Result<(Rational, Rational)> {
        if i == 1 {
            return Ok((Rational::zero(), Rational::zero()));
        }
        let a = self.big_s[i - 1] as i64;
        let lo = rat(c as i64 - 1, a) + rat(1, a * a);
        let hi = &lo + rat(1, a * a);
        Ok((lo, hi))
    }

    /// Digits `F` with `F / q_n` in the window at `n`.
    pub fn digit_candidates(&self, n: u64) -> Result<Candidates> {
        let info = self.phi_inv(n)?;
        let q = self.spec.base.qn(n)?;
        Ok(candidates_for(&info, &q))
    }

    /// `omega(n)`, the number of admissible digits.
    /// Candidate range at a decoded position for a known base `q`.
    pub fn candidates_at(&self, info: &PositionInfo, q: &BigUint) -> Candidates {
        candidates_for(info, q)
    }

    pub fn omega(&self, n: u64) -> Result<BigUint> {
        Ok(self.digit_candidates(n)?.count)
    }

    /// `f_{j,t}(w, z)`.
    pub fn envelope(&self, j: usize, t: usize, w: u64, z: u64) -> Result<Rational> {
        self.check_envelope_args(j, t)?;
        let w_max = if t <= self.levels() { self.ell[t - 1] } else { 0 };
        let s_j = self.big_s[j - 1];
        let ratio_t = self.big_s[t - 1] / s_j;
        if w > w_max || z > ratio_t {
            return Err(Error::InvalidArgument(format!(
                "(w, z) = ({w}, {z}) outside [0, {w_max}] x [0, {ratio_t}]"
            )));
        }
        let mut num = (self.big_l[j] / s_j) as u128;
        let mut den = num;
        for k in j + 1..t {
            num += 2 * self.ell[k - 1] as u128;
            den += self.ell[k - 1] as u128 * (self.big_s[k - 1] / s_j) as u128;
        }
        num += 2 * w as u128 + z as u128;
        den += ratio_t as u128 * w as u128 + z as u128;
        Ok(Rational::new(num.into(), den.into()))
    }

    /// `eps_bar_{j,t} = f_{j,t}(0, S_t / S_j)`.
    pub fn envelope_sup(&self, j: usize, t: usize) -> Result<Rational> {
        self.check_envelope_args(j, t)?;
        self.envelope(j, t, 0, self.big_s[t - 1] / self.big_s[j - 1])
    }

    fn check_envelope_args(&self, j: usize, t: usize) -> Result<()> {
        if j == 0 || j >= t || t > self.levels() + 1 {
            return Err(Error::InvalidArgument(format!(
                "envelope needs 1 <= j < t <= {}, got j = {j}, t = {t}",
                self.levels() + 1
            )));
        }
        Ok(())
    }

    /// Decomposes a `Y_{F,j}` prefix length `n` as
    /// `n = L_{i-1}/S_j + alpha S_i/S_j + beta`, where `i` is the level of the
    /// `n`-th sample position `S_j (n - 1) + 1`.
    pub fn position_decomposition(&self, j: usize, n: u64) -> Result<Decomposition> {
        if n == 0 {
            return Err(Error::ZeroPosition);
        }
        let s_j = self.big_s(j)?;
        let i = self.level_of(s_j * (n - 1) + 1)?;
        if j >= i {
            return Err(Error::InvalidArgument(format!("sample {n} of Y_{j} lies at level {i} <= {j}")));
        }
        let m = n - self.big_l[i - 1] / s_j;
        let r = self.big_s[i - 1] / s_j;
        let d = Decomposition { i, m, alpha: m / r, beta: m % r };
        debug_assert!(d.alpha <= self.ell[i - 1]);
        Ok(d)
    }
}

fn candidates_for(info: &PositionInfo, q: &BigUint) -> Candidates {
    if info.i == 1 {
        return Candidates { first: BigUint::one(), count: BigUint::one() };
    }
    let ceil_mul = |x: &Rational| {
        let num = x.numer().magnitude() * q;
        ceil_div(&num, x.denom().magnitude())
    };
    let first = ceil_mul(&info.lo).max(BigUint::one());
    let end = ceil_mul(&info.hi).min(q.clone());
    let count = if end > first { end - &first } else { BigUint::zero() };
    Candidates { first, count }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Decomposition {
    pub i: usize,
    pub m: u64,
    pub alpha: u64,
    pub beta: u64,
}

/// How one admissible digit is chosen at each position.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SelectionPolicy {
    Min,
    Max,
    Mid,
    Seeded(u64),
}

impl SelectionPolicy {
    pub fn pick(&self, cands: &Candidates, n: u64) -> BigUint {
        match self {
            Self::Min => cands.first.clone(),
            Self::Max => cands.last(),
            Self::Mid => &cands.first + (&cands.count >> 1usize),
            Self::Seeded(seed) => {
                let mut rng = ChaCha8Rng::seed_from_u64(*seed);
                rng.set_stream(n);
                &cands.first + rng.gen_biguint_below(&cands.count)
            }
        }
    }
}

impl fmt::Display for SelectionPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Min => f.write_str("min"),
            Self::Max => f.write_str("max"),
            Self::Mid => f.write_str("mid"),
            Self::Seeded(s) => write!(f, "seeded:{s}"),
        }
    }
}

impl FromStr for SelectionPolicy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "min" => Ok(Self::Min),
            "max" => Ok(Self::Max),
            "mid" => Ok(Self::Mid),
            other => other
                .strip_prefix("seeded:")
                .and_then(|v| v.parse().ok())
                .map(Self::Seeded)
                .ok_or_else(|| Error::Parse(format!("unknown policy {other:?}; expected min, max, mid or seeded:<u64>"))),
        }
    }
}

impl Serialize for SelectionPolicy {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for SelectionPolicy {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// The first `n` digits of `x_F` for the `F` selected by `policy`.
pub fn generate_digits(schedule: &ThetaSchedule, policy: SelectionPolicy, n: u64) -> Result<DigitStream> {
    if n > schedule.coverage() {
        return Err(Error::BeyondSchedule { n, last: schedule.coverage() });
    }
    let bases = schedule.spec.base.prefix(n)?;
    let mut digits = Vec::with_capacity(n as usize);
    for (idx, q) in bases.iter().enumerate() {
        let pos = idx as u64 + 1;
        let info = schedule.phi_inv(pos)?;
        let cands = candidates_for(&info, q);
        digits.push(policy.pick(&cands, pos));
    }
    DigitStream::new(bases, digits, Provenance::ThetaGenerated { policy: policy.to_string() })
}

fn point_at(stream: &DigitStream, pos: u64) -> Result<Rational> {
    Ok(rat_big(stream.digit(pos)?, stream.base(pos)?))
}

/// `Y_{F,j,k,b}`: the points at `phi(k, b, 1 + S_j m)` for `m = 0..S_k/S_j - 1`.
pub fn extract_y(schedule: &ThetaSchedule, stream: &DigitStream, j: usize, k: usize, b: u64) -> Result<PointSequence> {
    if j == 0 || j >= k || k > schedule.levels() {
        return Err(Error::InvalidArgument(format!(
            "Y blocks need 1 <= j < k <= {}, got j = {j}, k = {k}",
            schedule.levels()
        )));
    }
    let s_j = schedule.big_s[j - 1];
    let count = schedule.big_s[k - 1] / s_j;
    let mut values = Vec::with_capacity(count as usize);
    for m in 0..count {
        values.push(point_at(stream, schedule.phi(k, b, 1 + s_j * m)?)?);
    }
    PointSequence::new(values)
}

/// The first `len` points of `Y_{F,j}`, taken at positions `S_j (i - 1) + 1`.
pub fn y_prefix(schedule: &ThetaSchedule, stream: &DigitStream, j: usize, len: u64) -> Result<PointSequence> {
    let s_j = schedule.big_s(j)?;
    let values = (0..len).map(|i| point_at(stream, s_j * i + 1)).collect::<Result<Vec<_>>>()?;
    PointSequence::new(values)
}

/// The `Y_{F,j}` prefix made of every sample position up to global position `n`.
pub fn extract_y_prefix(schedule: &ThetaSchedule, stream: &DigitStream, j: usize, n: u64) -> Result<PointSequence> {
    let s_j = schedule.big_s(j)?;
    let len = if n == 0 { 0 } else { (n - 1) / s_j + 1 };
    y_prefix(schedule, stream, j, len)
}

/// Result of checking one complete `Y_{F,j,k,b}` block.
#[derive(Clone, Debug)]
pub struct YBlockCheck {
    pub j: usize,
    pub k: usize,
    pub b: u64,
    pub certificate: AapCertificate,
    pub dstar: Rational,
    /// `2 S_j / S_k`
    pub dbnd: Rational,
}

impl YBlockCheck {
    pub fn passed(&self) -> bool {
        self.certificate.accepted() && self.dstar <= self.dbnd
    }
}

/// Checks every `Y_{F,j,k,b}` whose positions all lie in the stream.
pub fn check_y_blocks(schedule: &ThetaSchedule, stream: &DigitStream) -> Result<Vec<YBlockCheck>> {
    let mut out = Vec::new();
    for k in 2..=schedule.levels() {
        let s_k = schedule.big_s[k - 1];
        for b in 1..=schedule.ell[k - 1] {
            if schedule.phi(k, b, s_k)? > stream.len() {
                break;
            }
            for j in 1..k {
                let s_j = schedule.big_s[j - 1];
                let y = extract_y(schedule, stream, j, k, b)?;
                let delta = rat(1, (s_j * s_k) as i64);
                let epsilon = rat(s_j as i64, s_k as i64);
                let certificate = verify_aap(&y, &delta, &epsilon)?;
                let dstar = star_discrepancy(&y)?;
                out.push(YBlockCheck { j, k, b, certificate, dstar, dbnd: epsilon * rat(2, 1) });
            }
        }
    }
    Ok(out)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum BoundStatus {
    /// `D* <= f < eps_bar`
    Holds,
    /// `D* <= f = eps_bar = 1`: the envelope carries no information yet.
    Degenerate,
    Violated,
}

#[derive(Clone, Debug)]
pub struct PrefixBoundRow {
    pub n: u64,
    pub decomposition: Decomposition,
    pub dstar: Rational,
    pub f: Rational,
    pub eps_bar: Rational,
    pub status: BoundStatus,
}

#[derive(Clone, Debug)]
pub struct PrefixBoundReport {
    pub j: usize,
    pub rows: Vec<PrefixBoundRow>,
    /// `(t, eps_bar_{j,t})` for every available `t > j`.
    pub eps_trend: Vec<(usize, Rational)>,
}

impl PrefixBoundReport {
    pub fn violations(&self) -> usize {
        self.rows.iter().filter(|r| r.status == BoundStatus::Violated).count()
    }
}

fn classify(dstar: &Rational, f: &Rational, eps_bar: &Rational) -> BoundStatus {
    if dstar > f {
        BoundStatus::Violated
    } else if f < eps_bar {
        BoundStatus::Holds
    } else if f == eps_bar && eps_bar == &Rational::one() {
        BoundStatus::Degenerate
    } else {
        BoundStatus::Violated
    }
}

/// Pairs `D*` of each `Y_{F,j}` prefix with `f_{j,i}(alpha, beta)` and `eps_bar_{j,i}`.
/// Prefix lengths whose last sample lies at a level `<= j` are skipped.
pub fn prefix_bound_check(
    schedule: &ThetaSchedule,
    stream: &DigitStream,
    j: usize,
    prefix_lengths: &[u64],
) -> Result<PrefixBoundReport> {
    let s_j = schedule.big_s(j)?;
    let available = if stream.is_empty() { 0 } else { (stream.len() - 1) / s_j + 1 };
    let max_len = prefix_lengths.iter().copied().max().unwrap_or(0);
    if max_len > available {
        return Err(Error::InsufficientDigits { needed: s_j * (max_len - 1) + 1, available: stream.len() });
    }
    let y = y_prefix(schedule, stream, j, max_len)?;
    let mut rows = Vec::new();
    for &n in prefix_lengths {
        let level = schedule.level_of(s_j * (n.max(1) - 1) + 1)?;
        if n == 0 || level <= j {
            continue;
        }
        let decomposition = schedule.position_decomposition(j, n)?;
        let f = schedule.envelope(j, decomposition.i, decomposition.alpha, decomposition.beta)?;
        let eps_bar = schedule.envelope_sup(j, decomposition.i)?;
        let dstar = star_discrepancy(&y.prefix(n as usize))?;
        let status = classify(&dstar, &f, &eps_bar);
        rows.push(PrefixBoundRow { n, decomposition, dstar, f, eps_bar, status });
    }
    let eps_trend = (j + 1..=schedule.levels() + 1)
        .map(|t| schedule.envelope_sup(j, t).map(|e| (t, e)))
        .collect::<Result<_>>()?;
    Ok(PrefixBoundReport { j, rows, eps_trend })
}

/// `D_N^*` of the base-`Q_j` points `E_{j,n} / q_{j,n}`, bounded by the
/// envelope of the matching `Y_{F,j}` prefix plus the largest regrouping gap
/// seen so far (moving every point right by at most `g` raises `D*` by at most `g`).
pub fn dn_envelope_report(
    schedule: &ThetaSchedule,
    stream: &DigitStream,
    j: usize,
    prefix_lengths: &[u64],
) -> Result<DiscrepancyReport> {
    let coarse = transcode(stream, schedule.spec(), j)?;
    let points = PointSequence::from_digits(&coarse);
    let s_j = schedule.big_s(j)?;
    let max_len = prefix_lengths.iter().copied().max().unwrap_or(0);
    if max_len > coarse.len() {
        return Err(Error::InsufficientDigits { needed: s_j * max_len, available: stream.len() });
    }
    let mut gap_max = vec![Rational::zero()];
    for n in 1..=max_len {
        let g = if s_j == 1 { Rational::zero() } else { mod_s_gap(stream, schedule.spec(), j, n)? };
        let prev = gap_max[n as usize - 1].clone();
        gap_max.push(prev.max(g));
    }
    let mut rows = Vec::new();
    for &n in prefix_lengths {
        if n == 0 {
            return Err(Error::ZeroPosition);
        }
        let dstar = star_discrepancy(&points.prefix(n as usize))?;
        let recip: Rational = coarse.bases()[..n as usize].iter().map(|q| rat_big(&BigUint::one(), q)).sum();
        let (bound, certificate) = match schedule.position_decomposition(j, n) {
            Ok(d) => {
                let b = schedule.envelope(j, d.i, d.alpha, d.beta)? + &gap_max[n as usize];
                let tag = if dstar <= b { "PASS" } else { "FAIL" };
                (Some(b), tag.to_string())
            }
            Err(_) => (None, "n/a".to_string()),
        };
        rows.push(DiscrepancyRow { n, dstar, bound, certificate, salat_proxy: recip / rat_u64(n) });
    }
    Ok(DiscrepancyReport { rows })
}

/// JSON form of the schedule tables.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq, Eq)]
pub struct ScheduleDump {
    #[serde(rename = "S")]
    pub s: Vec<String>,
    pub nu: Vec<Option<String>>,
    pub l: Vec<String>,
    #[serde(rename = "L")]
    pub big_l: Vec<String>,
    pub window_shift: String,
    pub y_index_base: u32,
    pub y_sampling: String,
}

impl ThetaSchedule {
    pub fn dump(&self) -> ScheduleDump {
        let strs = |v: &[u64]| v.iter().map(|x| x.to_string()).collect();
        ScheduleDump {
            s: strs(&self.big_s),
            nu: self.nu.iter().map(|v| v.map(|x| x.to_string())).collect(),
            l: strs(&self.ell),
            big_l: strs(self.big_l_table()),
            window_shift: WINDOW_SHIFT.into(),
            y_index_base: 0,
            y_sampling: Y_SAMPLING.into(),
        }
    }
}
