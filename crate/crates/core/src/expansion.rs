//! Cantor series digits: expansion of rationals, evaluation, the shift map
//! enclosure, block counts and regrouping between chain levels.

use std::collections::BTreeSet;

use num_bigint::{BigInt, BigUint};
use num_integer::Integer;
use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::{in_unit_interval, rat_big, Rational};
use crate::sequences::{BasicSequence, ChainSpec};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Provenance {
    ExpandedFromRational,
    Pattern,
    ThetaGenerated { policy: String },
    File,
    /// Regrouped from another stream into blocks of `group` digits.
    Transcoded { group: u64, offset: u64 },
}

/// A finite digit prefix `E_1, ..., E_N` together with its bases `q_1, ..., q_N`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DigitStream {
    bases: Vec<BigUint>,
    digits: Vec<BigUint>,
    provenance: Provenance,
}

impl DigitStream {
    pub fn new(bases: Vec<BigUint>, digits: Vec<BigUint>, provenance: Provenance) -> Result<Self> {
        if bases.len() != digits.len() {
            return Err(Error::InvalidArgument(format!(
                "{} bases but {} digits",
                bases.len(),
                digits.len()
            )));
        }
        for (i, (q, e)) in bases.iter().zip(&digits).enumerate() {
            if e >= q {
                return Err(Error::DigitOutOfRange { n: i as u64 + 1, digit: e.to_string(), q: q.to_string() });
            }
        }
        Ok(Self { bases, digits, provenance })
    }

    /// Digits paired with the first `digits.len()` values of `rule`.
    pub fn from_rule(rule: &BasicSequence, digits: Vec<BigUint>, provenance: Provenance) -> Result<Self> {
        let bases = rule.prefix(digits.len() as u64)?;
        Self::new(bases, digits, provenance)
    }

    pub fn len(&self) -> u64 {
        self.digits.len() as u64
    }

    pub fn is_empty(&self) -> bool {
        self.digits.is_empty()
    }

    pub fn digits(&self) -> &[BigUint] {
        &self.digits
    }

    pub fn bases(&self) -> &[BigUint] {
        &self.bases
    }

    pub fn provenance(&self) -> &Provenance {
        &self.provenance
    }

    pub fn digit(&self, n: u64) -> Result<&BigUint> {
        self.check_available(n)?;
        Ok(&self.digits[n as usize - 1])
    }

    pub fn base(&self, n: u64) -> Result<&BigUint> {
        self.check_available(n)?;
        Ok(&self.bases[n as usize - 1])
    }

    fn check_available(&self, n: u64) -> Result<()> {
        if n == 0 {
            return Err(Error::ZeroPosition);
        }
        if n > self.len() {
            return Err(Error::InsufficientDigits { needed: n, available: self.len() });
        }
        Ok(())
    }

    pub fn truncated(&self, n: u64) -> Result<Self> {
        if n > self.len() {
            return Err(Error::InsufficientDigits { needed: n, available: self.len() });
        }
        Ok(Self {
            bases: self.bases[..n as usize].to_vec(),
            digits: self.digits[..n as usize].to_vec(),
            provenance: self.provenance.clone(),
        })
    }

    /// Whether the bases agree with `rule` on the whole prefix.
    pub fn matches_rule(&self, rule: &BasicSequence) -> Result<bool> {
        Ok(rule.prefix(self.len())? == self.bases)
    }

    /// Length of the final run of maximal digits `E_n = q_n - 1`.
    ///
    /// A nonzero run means the prefix has not yet witnessed the digit
    /// condition that makes expansions unique; it is a diagnostic only.
    pub fn trailing_max_run(&self) -> u64 {
        self.digits
            .iter()
            .zip(&self.bases)
            .rev()
            .take_while(|(e, q)| *e + 1u32 == **q)
            .count() as u64
    }

    /// The points `E_n / q_n`.
    pub fn ratios(&self) -> Vec<Rational> {
        self.digits.iter().zip(&self.bases).map(|(e, q)| rat_big(e, q)).collect()
    }
}

/// A nonempty digit block `B = (b_1, ..., b_k)`.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub struct Block(Vec<BigUint>);

impl Block {
    pub fn new(entries: Vec<BigUint>) -> Result<Self> {
        if entries.is_empty() {
            return Err(Error::EmptyBlock);
        }
        Ok(Self(entries))
    }

    pub fn from_u64(entries: &[u64]) -> Result<Self> {
        Self::new(entries.iter().map(|&v| BigUint::from(v)).collect())
    }

    pub fn entries(&self) -> &[BigUint] {
        &self.0
    }

    pub fn len(&self) -> u64 {
        self.0.len() as u64
    }

    pub fn is_empty(&self) -> bool {
        false
    }
}

impl std::fmt::Display for Block {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let parts: Vec<String> = self.0.iter().map(|e| e.to_string()).collect();
        write!(f, "({})", parts.join(","))
    }
}

/// The first `n` digits of `x` in base `rule`, by the greedy floor recurrence.
pub fn expand(x: &Rational, rule: &BasicSequence, n: u64) -> Result<DigitStream> {
    if !in_unit_interval(x) {
        return Err(Error::OutsideUnitInterval(x.to_string()));
    }
    let bases = rule.prefix(n)?;
    let den = x.denom().magnitude().clone();
    let mut num = x.numer().magnitude().clone();
    let mut digits = Vec::with_capacity(n as usize);
    for q in &bases {
        let (e, r) = (q * &num).div_rem(&den);
        digits.push(e);
        num = r;
    }
    DigitStream::new(bases, digits, Provenance::ExpandedFromRational)
}

/// `sum E_n / (q_1 ... q_n)` over the prefix.
pub fn evaluate(stream: &DigitStream) -> Rational {
    let mut num = BigUint::zero();
    let mut den = BigUint::one();
    for (e, q) in stream.digits.iter().zip(&stream.bases) {
        num = num * q + e;
        den *= q;
    }
    rat_big(&num, &den)
}

/// Validating form of [`evaluate`] for raw digits under `rule`.
pub fn evaluate_digits(digits: &[BigUint], rule: &BasicSequence) -> Result<Rational> {
    let stream = DigitStream::from_rule(rule, digits.to_vec(), Provenance::File)?;
    Ok(evaluate(&stream))
}

/// Closed interval known to contain `T_{Q,n}(x)`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Enclosure {
    pub lo: Rational,
    pub hi: Rational,
}

/// Encloses `T_{Q,n}(x) = (q_1 ... q_n) x mod 1` using `depth` further digits.
pub fn t_enclosure(stream: &DigitStream, n: u64, depth: u64) -> Result<Enclosure> {
    if depth == 0 {
        return Err(Error::InvalidArgument("enclosure depth must be positive".into()));
    }
    let end = n + depth;
    if end > stream.len() {
        return Err(Error::InsufficientDigits { needed: end, available: stream.len() });
    }
    let mut num = BigUint::zero();
    let mut den = BigUint::one();
    for idx in n as usize..end as usize {
        num = num * &stream.bases[idx] + &stream.digits[idx];
        den *= &stream.bases[idx];
    }
    let lo = rat_big(&num, &den);
    let hi = rat_big(&(num + 1u32), &den);
    Ok(Enclosure { lo, hi })
}

/// Number of positions `p <= n` where `block` starts.
pub fn count_block(stream: &DigitStream, block: &Block, n: u64) -> Result<u64> {
    if n == 0 {
        return Ok(0);
    }
    let needed = n + block.len() - 1;
    if needed > stream.len() {
        return Err(Error::InsufficientDigits { needed, available: stream.len() });
    }
    let k = block.len() as usize;
    Ok(stream.digits[..needed as usize]
        .windows(k)
        .filter(|w| *w == block.entries())
        .count() as u64)
}

/// Regroups digits: the first group has `first` digits, the rest `group` each.
/// Only complete groups are emitted.
pub fn regroup(stream: &DigitStream, first: u64, group: u64) -> Result<DigitStream> {
    if first == 0 || group == 0 {
        return Err(Error::InvalidArgument("group sizes must be positive".into()));
    }
    let len = stream.len();
    let mut bases = Vec::new();
    let mut digits = Vec::new();
    let mut start = 0u64;
    let mut size = first;
    while start + size <= len {
        let mut e = BigUint::zero();
        let mut q = BigUint::one();
        for idx in start as usize..(start + size) as usize {
            e = e * &stream.bases[idx] + &stream.digits[idx];
            q *= &stream.bases[idx];
        }
        digits.push(e);
        bases.push(q);
        start += size;
        size = group;
    }
    let offset = if first == group { 0 } else { first };
    DigitStream::new(bases, digits, Provenance::Transcoded { group, offset })
}

/// The digits `E_{j,n}` of the same number in base `Q_j`.
pub fn transcode(stream: &DigitStream, spec: &ChainSpec, j: usize) -> Result<DigitStream> {
    if j == 0 || j > spec.depth {
        return Err(Error::LevelOutOfRange { j, depth: spec.depth });
    }
    let s = spec.big_s(j)?;
    if s == 1 {
        return Ok(stream.clone());
    }
    regroup(stream, s, s)
}

/// The digits in the shifted base `Q_{j,k}`.
pub fn transcode_shifted(stream: &DigitStream, spec: &ChainSpec, j: usize, k: u64) -> Result<DigitStream> {
    if j == 0 || j > spec.depth {
        return Err(Error::LevelOutOfRange { j, depth: spec.depth });
    }
    let s = spec.big_s(j)?;
    if k >= s {
        return Err(Error::ShiftOutOfRange { j, k, s });
    }
    if k == 0 {
        return transcode(stream, spec, j);
    }
    regroup(stream, k, s)
}

/// Splits each digit of a coarse stream into `s` digits of the finer base
/// `fine`, whose groups of `s` consecutive values multiply to the coarse bases.
pub fn refine(stream: &DigitStream, fine: &BasicSequence, s: u64) -> Result<DigitStream> {
    let bases = fine.prefix(stream.len() * s)?;
    let mut digits = Vec::with_capacity(bases.len());
    for (n, (e, q)) in stream.digits.iter().zip(&stream.bases).enumerate() {
        let group = &bases[n * s as usize..(n + 1) * s as usize];
        let product: BigUint = group.iter().product();
        if product != *q {
            return Err(Error::InvalidArgument(format!(
                "coarse base {q} at position {} is not the product of the fine bases",
                n + 1
            )));
        }
        let mut rest = e.clone();
        let mut split = vec![BigUint::zero(); s as usize];
        for (slot, p) in split.iter_mut().zip(group).rev() {
            let (quot, rem) = rest.div_rem(p);
            *slot = rem;
            rest = quot;
        }
        digits.extend(split);
    }
    DigitStream::new(bases, digits, Provenance::Transcoded { group: 1, offset: 0 })
}

/// `E_{j,n} / q_{j,n} - E_p / q_p` with `p = S_j (n - 1) + 1`. Always in `[0, S_j / q_p)`.
pub fn mod_s_gap(stream: &DigitStream, spec: &ChainSpec, j: usize, n: u64) -> Result<Rational> {
    if n == 0 {
        return Err(Error::ZeroPosition);
    }
    let s = spec.big_s(j)?;
    let end = s * n;
    if end > stream.len() {
        return Err(Error::InsufficientDigits { needed: end, available: stream.len() });
    }
    let start = (s * (n - 1)) as usize;
    let mut e = BigUint::zero();
    let mut q = BigUint::one();
    for idx in start..end as usize {
        e = e * &stream.bases[idx] + &stream.digits[idx];
        q *= &stream.bases[idx];
    }
    Ok(rat_big(&e, &q) - rat_big(&stream.digits[start], &stream.bases[start]))
}

/// Zero digits and the set of positive digit values in a prefix.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DigitCensus {
    pub zero_count: u64,
    pub value_set: BTreeSet<BigUint>,
}

pub fn digit_census(stream: &DigitStream, n: u64) -> Result<DigitCensus> {
    if n > stream.len() {
        return Err(Error::InsufficientDigits { needed: n, available: stream.len() });
    }
    let mut census = DigitCensus { zero_count: 0, value_set: BTreeSet::new() };
    for e in &stream.digits[..n as usize] {
        if e.is_zero() {
            census.zero_count += 1;
        } else {
            census.value_set.insert(e.clone());
        }
    }
    Ok(census)
}

/// Exact check that `lo <= x < lo + 1/(q_1 ... q_N)` for the evaluated prefix.
pub fn brackets(stream: &DigitStream, x: &Rational) -> bool {
    let lo = evaluate(stream);
    let den: BigUint = stream.bases.iter().product();
    let width = Rational::new(BigInt::one(), BigInt::from(den));
    &lo <= x && x < &(lo + width)
}
