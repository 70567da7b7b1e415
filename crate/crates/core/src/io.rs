//! Config files and the self-validating JSONL digit format.

use std::io::{BufRead, Write};
use std::path::Path;

use num_bigint::BigUint;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::expansion::{DigitStream, Provenance};
use crate::numeric::dec;
use crate::sequences::{BasicSequence, ChainSpec};
use crate::theta::SelectionPolicy;

/// Parameters of one `Theta` construction.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ThetaConfig {
    #[serde(rename = "Q")]
    pub base: BasicSequence,
    #[serde(rename = "S")]
    pub s: BasicSequence,
    pub depth: usize,
    #[serde(default = "default_policy")]
    pub policy: SelectionPolicy,
    /// Overrides the seed of a seeded policy.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

fn default_policy() -> SelectionPolicy {
    SelectionPolicy::Min
}

impl ThetaConfig {
    /// `q_n = 2^(n+3)`, `s_j = 2`, four chain levels, min policy.
    pub fn config_a() -> Self {
        Self {
            base: BasicSequence::geometric(8, 2).expect("valid"),
            s: BasicSequence::constant(2).expect("valid"),
            depth: 4,
            policy: SelectionPolicy::Min,
            seed: None,
        }
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let cfg: Self = serde_json::from_str(&text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.base.validate()?;
        self.s.validate()?;
        if self.depth == 0 {
            return Err(Error::InvalidArgument("depth must be positive".into()));
        }
        Ok(())
    }

    pub fn chain_spec(&self) -> Result<ChainSpec> {
        ChainSpec::new(self.base.clone(), self.s.clone(), self.depth)
    }

    pub fn effective_policy(&self) -> SelectionPolicy {
        match (self.policy, self.seed) {
            (SelectionPolicy::Seeded(_), Some(seed)) => SelectionPolicy::Seeded(seed),
            (p, _) => p,
        }
    }
}

#[derive(Serialize, Deserialize)]
struct DigitRecord {
    n: u64,
    #[serde(with = "dec")]
    q: BigUint,
    #[serde(rename = "E", with = "dec")]
    e: BigUint,
}

pub fn write_digits_jsonl<W: Write>(stream: &DigitStream, mut out: W) -> Result<()> {
    for (idx, (q, e)) in stream.bases().iter().zip(stream.digits()).enumerate() {
        let rec = DigitRecord { n: idx as u64 + 1, q: q.clone(), e: e.clone() };
        serde_json::to_writer(&mut out, &rec)?;
        out.write_all(b"\n")?;
    }
    out.flush()?;
    Ok(())
}

/// Reads a digit file, requiring `n = 1, 2, ...` and `0 <= E < q` with `q >= 2`.
pub fn read_digits_jsonl<R: BufRead>(input: R) -> Result<DigitStream> {
    let (mut bases, mut digits) = (Vec::new(), Vec::new());
    for (idx, line) in input.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: DigitRecord =
            serde_json::from_str(&line).map_err(|e| Error::Parse(format!("line {}: {e}", idx + 1)))?;
        let expected = bases.len() as u64 + 1;
        if rec.n != expected {
            return Err(Error::Parse(format!("line {}: expected n = {expected}, found {}", idx + 1, rec.n)));
        }
        bases.push(rec.q);
        digits.push(rec.e);
    }
    if bases.is_empty() {
        return Err(Error::EmptySequence);
    }
    DigitStream::new(bases, digits, Provenance::File)
}

pub fn load_digits(path: &Path) -> Result<DigitStream> {
    let file = std::fs::File::open(path)?;
    read_digits_jsonl(std::io::BufReader::new(file))
}
