//! Basic sequences, the `~_s` contraction, chains of contracted bases and
//! finite-horizon divergence and growth diagnostics.

use std::sync::Arc;

use num_bigint::{BigInt, BigUint};
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::{dec, dec_signed, rat, rat_u64, FixedLog, LogScale, Rational};

/// `slope * m + offset` for block index `m >= 1`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Affine {
    #[serde(with = "dec_signed")]
    pub slope: BigInt,
    #[serde(with = "dec_signed")]
    pub offset: BigInt,
}

impl Affine {
    pub fn new(slope: i64, offset: i64) -> Self {
        Self { slope: BigInt::from(slope), offset: BigInt::from(offset) }
    }

    pub fn at(&self, m: u64) -> BigInt {
        &self.slope * BigInt::from(m) + &self.offset
    }
}

/// How a basic sequence produces `q_n`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "params", rename_all = "kebab-case")]
pub enum RuleKind {
    ExplicitList {
        #[serde(with = "dec::vec")]
        values: Vec<BigUint>,
    },
    Constant {
        #[serde(with = "dec")]
        value: BigUint,
    },
    /// `q_n = coefficient * ratio^n`.
    Geometric {
        #[serde(with = "dec")]
        coefficient: BigUint,
        #[serde(with = "dec")]
        ratio: BigUint,
    },
    /// Block `m` holds the value `value(m)` repeated `count(m)` times.
    BlockRepetition { value: Affine, count: Affine },
    /// Products of `block` consecutive source values. With `offset = k > 0` the
    /// first value is `q_1 ... q_k` and later blocks start after it.
    ComposedContraction {
        source: Arc<BasicSequence>,
        block: u64,
        #[serde(default)]
        offset: u64,
    },
}

/// A finitely described basic sequence `Q = (q_n)` with every `q_n >= 2`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BasicSequence {
    #[serde(flatten)]
    kind: RuleKind,
    /// First index from which `q_n` is asserted to be nondecreasing.
    #[serde(default)]
    monotone_tail_from: Option<u64>,
}

impl BasicSequence {
    pub fn new(kind: RuleKind, monotone_tail_from: Option<u64>) -> Result<Self> {
        let rule = Self { kind, monotone_tail_from };
        rule.validate()?;
        Ok(rule)
    }

    pub fn explicit(values: Vec<BigUint>) -> Result<Self> {
        Self::new(RuleKind::ExplicitList { values }, None)
    }

    pub fn explicit_u64(values: &[u64]) -> Result<Self> {
        Self::explicit(values.iter().map(|&v| BigUint::from(v)).collect())
    }

    pub fn constant(value: u64) -> Result<Self> {
        Self::new(RuleKind::Constant { value: BigUint::from(value) }, Some(1))
    }

    pub fn geometric(coefficient: u64, ratio: u64) -> Result<Self> {
        Self::new(
            RuleKind::Geometric { coefficient: BigUint::from(coefficient), ratio: BigUint::from(ratio) },
            Some(1),
        )
    }

    pub fn block_repetition(value: Affine, count: Affine) -> Result<Self> {
        let monotone = if value.slope.is_negative() { None } else { Some(1) };
        Self::new(RuleKind::BlockRepetition { value, count }, monotone)
    }

    pub fn with_monotone_tail(mut self, from: Option<u64>) -> Self {
        self.monotone_tail_from = from;
        self
    }

    pub fn kind(&self) -> &RuleKind {
        &self.kind
    }

    pub fn monotone_tail_from(&self) -> Option<u64> {
        self.monotone_tail_from
    }

    /// Revalidates a rule obtained from deserialization.
    pub fn validate(&self) -> Result<()> {
        let two = BigUint::from(2u32);
        match &self.kind {
            RuleKind::ExplicitList { values } => {
                if let Some((i, v)) = values.iter().enumerate().find(|(_, v)| **v < two) {
                    return Err(Error::InvalidRule(format!("q_{} = {v} is below 2", i + 1)));
                }
            }
            RuleKind::Constant { value } => {
                if *value < two {
                    return Err(Error::InvalidRule(format!("constant {value} is below 2")));
                }
            }
            RuleKind::Geometric { coefficient, ratio } => {
                if ratio.is_zero() || coefficient.is_zero() || coefficient * ratio < two {
                    return Err(Error::InvalidRule("geometric rule needs coefficient * ratio >= 2".into()));
                }
            }
            RuleKind::BlockRepetition { value, count } => {
                // Affine forms are monotone in m, so checking both ends of the slope suffices.
                if value.slope.is_negative() || value.at(1) < BigInt::from(2) {
                    return Err(Error::InvalidRule("block values need slope >= 0 and value(1) >= 2".into()));
                }
                if count.slope.is_negative() || count.at(1) < BigInt::one() {
                    return Err(Error::InvalidRule("block counts need slope >= 0 and count(1) >= 1".into()));
                }
                if count.slope.to_u64().is_none() || count.offset.to_i64().is_none() {
                    return Err(Error::InvalidRule("block count parameters are too large".into()));
                }
            }
            RuleKind::ComposedContraction { source, block, .. } => {
                if *block == 0 {
                    return Err(Error::InvalidRule("contraction block must be positive".into()));
                }
                source.validate()?;
            }
        }
        Ok(())
    }

    /// Number of defined positions, `None` for infinite rules.
    pub fn domain_len(&self) -> Option<u64> {
        match &self.kind {
            RuleKind::ExplicitList { values } => Some(values.len() as u64),
            RuleKind::ComposedContraction { source, block, offset } => source.domain_len().map(|len| {
                if *offset == 0 {
                    len / block
                } else if len < *offset {
                    0
                } else {
                    1 + (len - offset) / block
                }
            }),
            _ => None,
        }
    }

    /// `q_n` for `n >= 1`.
    pub fn qn(&self, n: u64) -> Result<BigUint> {
        if n == 0 {
            return Err(Error::ZeroPosition);
        }
        match &self.kind {
            RuleKind::ExplicitList { values } => values
                .get((n - 1) as usize)
                .cloned()
                .ok_or(Error::OutOfDomain { n, len: values.len() as u64 }),
            RuleKind::Constant { value } => Ok(value.clone()),
            RuleKind::Geometric { coefficient, ratio } => {
                let e = u32::try_from(n).map_err(|_| Error::Overflow("geometric exponent"))?;
                Ok(coefficient * ratio.pow(e))
            }
            RuleKind::BlockRepetition { value, count } => {
                let m = block_index(count, n)?;
                Ok(value.at(m).to_biguint().expect("validated block value"))
            }
            RuleKind::ComposedContraction { source, block, offset } => {
                let (start, len) = contraction_span(*block, *offset, n);
                let mut p = BigUint::one();
                for pos in start..start + len {
                    p *= source.qn(pos)?;
                }
                Ok(p)
            }
        }
    }

    /// `(q_1, ..., q_n)`.
    pub fn prefix(&self, n: u64) -> Result<Vec<BigUint>> {
        if let Some(len) = self.domain_len() {
            if n > len {
                return Err(Error::OutOfDomain { n, len });
            }
        }
        match &self.kind {
            RuleKind::Geometric { coefficient, ratio } => {
                let mut out = Vec::with_capacity(n as usize);
                let mut cur = coefficient * ratio;
                for _ in 0..n {
                    out.push(cur.clone());
                    cur *= ratio;
                }
                Ok(out)
            }
            RuleKind::ComposedContraction { source, block, offset } => {
                if n == 0 {
                    return Ok(Vec::new());
                }
                let (start, len) = contraction_span(*block, *offset, n);
                let src = source.prefix(start + len - 1)?;
                Ok((1..=n)
                    .map(|i| {
                        let (s, l) = contraction_span(*block, *offset, i);
                        src[(s - 1) as usize..(s - 1 + l) as usize].iter().product()
                    })
                    .collect())
            }
            _ => (1..=n).map(|i| self.qn(i)).collect(),
        }
    }
}

/// First source position and block length of contracted value `n`.
fn contraction_span(block: u64, offset: u64, n: u64) -> (u64, u64) {
    if offset == 0 {
        (block * (n - 1) + 1, block)
    } else if n == 1 {
        (1, offset)
    } else {
        (block * (n - 2) + offset + 1, block)
    }
}

/// Index `m` of the block containing position `n`.
fn block_index(count: &Affine, n: u64) -> Result<u64> {
    let a = count.slope.to_u64().expect("validated") as u128;
    let b = count.offset.to_i64().expect("validated") as i128;
    // T(m) = a m (m + 1) / 2 + b m, the number of positions in blocks 1..=m.
    let total = |m: u128| -> i128 { (a * m * (m + 1) / 2) as i128 + b * m as i128 };
    let (mut lo, mut hi) = (1u128, n as u128);
    while lo < hi {
        let mid = (lo + hi) / 2;
        if total(mid) >= n as i128 {
            hi = mid;
        } else {
            lo = mid + 1;
        }
    }
    Ok(lo as u64)
}

/// `P ~_s Q`: the `n`-th value is the product of `s` consecutive source values.
pub fn contract(rule: &BasicSequence, s: u64) -> Result<BasicSequence> {
    if s == 0 {
        return Err(Error::InvalidArgument("contraction size must be positive".into()));
    }
    if s == 1 {
        return Ok(rule.clone());
    }
    if let RuleKind::Constant { value } = &rule.kind {
        let e = u32::try_from(s).map_err(|_| Error::Overflow("constant power"))?;
        return BasicSequence::new(RuleKind::Constant { value: value.pow(e) }, rule.monotone_tail_from);
    }
    let tail = rule.monotone_tail_from.map(|t| (t.saturating_sub(1)).div_ceil(s) + 1);
    BasicSequence::new(
        RuleKind::ComposedContraction { source: Arc::new(rule.clone()), block: s, offset: 0 },
        tail,
    )
}

/// Base sequence, contraction sequence `S = (s_n)` and chain depth.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChainSpec {
    pub base: BasicSequence,
    pub s: BasicSequence,
    pub depth: usize,
}

impl ChainSpec {
    pub fn new(base: BasicSequence, s: BasicSequence, depth: usize) -> Result<Self> {
        if depth == 0 {
            return Err(Error::InvalidArgument("chain depth must be positive".into()));
        }
        Ok(Self { base, s, depth })
    }

    /// `s_j` as a machine integer.
    pub fn s_at(&self, j: usize) -> Result<u64> {
        self.s.qn(j as u64)?.to_u64().ok_or(Error::Overflow("s_j"))
    }

    /// `S_j = s_1 s_2 ... s_{j-1}`, so `S_1 = 1`.
    pub fn big_s(&self, j: usize) -> Result<u64> {
        if j == 0 {
            return Err(Error::ZeroPosition);
        }
        let mut acc = 1u64;
        for k in 1..j {
            acc = acc.checked_mul(self.s_at(k)?).ok_or(Error::Overflow("S_j"))?;
        }
        Ok(acc)
    }
}

/// `Q_1, ..., Q_J` with `Q_{j+1} = contract(Q_j, s_j)`.
pub fn derive_chain(spec: &ChainSpec) -> Result<Vec<BasicSequence>> {
    let mut chain = vec![spec.base.clone()];
    for j in 1..spec.depth {
        let next = contract(&chain[j - 1], spec.s_at(j)?)?;
        chain.push(next);
    }
    Ok(chain)
}

/// The shifted base `Q_{j,k}`: `q_1 ... q_k` followed by blocks of `S_j`
/// consecutive base values. `Q_{j,0}` is `Q_j` itself.
pub fn shifted_rule(spec: &ChainSpec, j: usize, k: u64) -> Result<BasicSequence> {
    if j == 0 || j > spec.depth {
        return Err(Error::LevelOutOfRange { j, depth: spec.depth });
    }
    let s = spec.big_s(j)?;
    if k >= s {
        return Err(Error::ShiftOutOfRange { j, k, s });
    }
    if k == 0 {
        return Ok(derive_chain(spec)?.swap_remove(j - 1));
    }
    BasicSequence::new(
        RuleKind::ComposedContraction { source: Arc::new(spec.base.clone()), block: s, offset: k },
        None,
    )
}

/// `Q_n^{(k)} = sum_{j=1}^n 1 / (q_j q_{j+1} ... q_{j+k-1})`.
pub fn partial_sum_qnk(rule: &BasicSequence, n: u64, k: u64) -> Result<Rational> {
    Ok(partial_sums_qnk(rule, n, k)?.pop().unwrap_or_else(Rational::zero))
}

/// `Q_0^{(k)}, Q_1^{(k)}, ..., Q_n^{(k)}`.
pub fn partial_sums_qnk(rule: &BasicSequence, n: u64, k: u64) -> Result<Vec<Rational>> {
    if k == 0 {
        return Err(Error::InvalidArgument("block length k must be positive".into()));
    }
    let q = if n == 0 { Vec::new() } else { rule.prefix(n + k - 1)? };
    let mut out = Vec::with_capacity(n as usize + 1);
    let mut acc = Rational::zero();
    out.push(acc.clone());
    for j in 0..n as usize {
        let den: BigUint = q[j..j + k as usize].iter().product();
        acc += Rational::new(BigInt::one(), BigInt::from(den));
        out.push(acc.clone());
    }
    Ok(out)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum GrowthTrend {
    #[serde(rename = "linear growth")]
    Linear,
    #[serde(rename = "slow growth")]
    Slow,
    #[serde(rename = "bounded at horizon")]
    BoundedAtHorizon,
}

impl std::fmt::Display for GrowthTrend {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Linear => "linear growth",
            Self::Slow => "slow growth",
            Self::BoundedAtHorizon => "bounded at horizon",
        })
    }
}

/// Finite-horizon evidence about `k`-divergence. Never a limit claim.
#[derive(Clone, Debug)]
pub struct DivergenceReport {
    /// `values[n] = Q_n^{(k)}` for `0 <= n <= horizon`.
    pub values: Vec<Rational>,
    /// Mean increment over the last decade divided by the mean value per term.
    pub tail_rate: Rational,
    pub trend: GrowthTrend,
}

pub fn divergence_report(rule: &BasicSequence, k: u64, horizon: u64) -> Result<DivergenceReport> {
    if horizon == 0 {
        return Err(Error::InvalidArgument("horizon must be positive".into()));
    }
    let values = partial_sums_qnk(rule, horizon, k)?;
    let h = horizon as usize;
    let d = (h - 1).clamp(1, 10);
    let start = h - d;
    let increment = &values[h] - &values[start];
    // (increment / d) / (values[h] / h)
    let tail_rate = increment * rat_u64(horizon) / (&values[h] * rat_u64(d as u64));
    let trend = if tail_rate >= rat(1, 2) {
        GrowthTrend::Linear
    } else if tail_rate < rat(1, 100) {
        GrowthTrend::BoundedAtHorizon
    } else {
        GrowthTrend::Slow
    };
    Ok(DivergenceReport { values, tail_rate, trend })
}

#[derive(Clone, Debug)]
pub struct GrowthPoint {
    pub k: u64,
    /// Exact quotient of the two fixed-point logarithms.
    pub ratio: Rational,
    pub approx: f64,
}

#[derive(Clone, Debug)]
pub struct GrowthTrace {
    pub points: Vec<GrowthPoint>,
    pub decreasing: bool,
}

impl GrowthTrace {
    pub fn flag(&self) -> &'static str {
        if self.decreasing {
            "decreasing at horizon"
        } else {
            "not decreasing"
        }
    }
}

/// Ratios `log q_k / sum_{n<k} log q_n` for `2 <= k <= horizon`.
///
/// The trace is flagged decreasing when the ratios fall strictly over the
/// second half of the horizon and the final ratio is below 3/4 of the ratio
/// at the midpoint (so a ratio settling at a positive constant does not count).
pub fn growth_condition_trace(rule: &BasicSequence, horizon: u64, scale: &LogScale) -> Result<GrowthTrace> {
    if horizon < 2 {
        return Err(Error::InvalidArgument("growth trace needs horizon >= 2".into()));
    }
    let q = rule.prefix(horizon)?;
    let mut cumulative = FixedLog::zero(scale.frac_bits());
    let mut points = Vec::with_capacity(horizon as usize - 1);
    for (idx, qk) in q.iter().enumerate() {
        let ln = scale.ln(qk);
        if idx >= 1 {
            let ratio = ln.ratio(&cumulative);
            let approx = crate::numeric::approx_f64(&ratio);
            points.push(GrowthPoint { k: idx as u64 + 1, ratio, approx });
        }
        cumulative = &cumulative + &ln;
    }
    let mid = points.len() / 2;
    let tail = &points[mid..];
    let falling = tail.windows(2).all(|w| w[1].ratio < w[0].ratio);
    let last = &points[points.len() - 1].ratio;
    let decayed = last * rat(4, 1) < &points[mid].ratio * rat(3, 1);
    Ok(GrowthTrace { points, decreasing: falling && decayed })
}
