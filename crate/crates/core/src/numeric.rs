//! Exact rational helpers and fixed-point natural logarithms of big integers.

use std::cmp::Ordering;
use std::ops::{Add, Sub};

use num_bigint::{BigInt, BigUint, Sign};
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

pub type Rational = BigRational;

/// Default number of fractional bits for logarithms.
pub const DEFAULT_PRECISION_BITS: u32 = 64;

/// Environment variable overriding [`DEFAULT_PRECISION_BITS`].
pub const PRECISION_ENV: &str = "CNL_PRECISION_BITS";

const GUARD_BITS: u32 = 32;

pub fn rat(n: i64, d: i64) -> Rational {
    Rational::new(BigInt::from(n), BigInt::from(d))
}

pub fn rat_big(n: &BigUint, d: &BigUint) -> Rational {
    Rational::new(BigInt::from(n.clone()), BigInt::from(d.clone()))
}

pub fn rat_int(n: &BigUint) -> Rational {
    Rational::from_integer(BigInt::from(n.clone()))
}

pub fn rat_u64(n: u64) -> Rational {
    Rational::from_integer(BigInt::from(n))
}

pub fn in_unit_interval(x: &Rational) -> bool {
    !x.is_negative() && x < &Rational::one()
}

/// Nonnegative integer part of a nonnegative rational.
pub fn floor_nonneg(x: &Rational) -> BigUint {
    x.floor()
        .to_integer()
        .to_biguint()
        .expect("floor of a nonnegative rational")
}

/// `ceil(n / d)` for positive `d`.
pub fn ceil_div(n: &BigUint, d: &BigUint) -> BigUint {
    let (q, r) = n.div_rem(d);
    if r.is_zero() {
        q
    } else {
        q + 1u32
    }
}

/// Approximates a big integer by `(mantissa, exponent)` with a 64-bit mantissa.
fn top_bits(x: &BigUint) -> (f64, i64) {
    let bits = x.bits();
    if bits <= 64 {
        (x.to_u64().unwrap_or(0) as f64, 0)
    } else {
        let shift = bits - 64;
        ((x >> shift).to_u64().unwrap_or(u64::MAX) as f64, shift as i64)
    }
}

/// Relative error below 2^-50. Never used to decide a comparison on its own.
pub fn approx_f64(x: &Rational) -> f64 {
    if x.is_zero() {
        return 0.0;
    }
    let (nm, ne) = top_bits(x.numer().magnitude());
    let (dm, de) = top_bits(x.denom().magnitude());
    let v = (nm / dm) * 2f64.powi((ne - de).clamp(-2000, 2000) as i32);
    if x.is_negative() {
        -v
    } else {
        v
    }
}

/// Decimal rendering truncated toward zero at `places` fractional digits.
pub fn decimal(x: &Rational, places: usize) -> String {
    let neg = x.is_negative();
    let abs = x.abs();
    let scale = BigInt::from(10u32).pow(places as u32);
    let scaled = (abs * Rational::from_integer(scale.clone())).floor().to_integer();
    let (int, frac) = scaled.div_rem(&scale);
    let mut s = String::new();
    if neg && !scaled.is_zero() {
        s.push('-');
    }
    s.push_str(&int.to_string());
    if places > 0 {
        s.push('.');
        let f = frac.to_string();
        s.extend(std::iter::repeat_n('0', places - f.len()));
        s.push_str(&f);
    }
    s
}

/// A rational `r` with `r <= sqrt(x)` and `sqrt(x) - r < 2^-bits` for `x` in `[0, 1]`.
pub fn sqrt_lower(x: &Rational, bits: u32) -> Rational {
    assert!(!x.is_negative(), "sqrt of a negative rational");
    let p = x.numer().magnitude();
    let q = x.denom().magnitude();
    // sqrt(p/q) = sqrt(p*q)/q, scaled by 2^bits.
    let radicand: BigUint = (p * q) << (2 * bits as u64);
    let root = radicand.sqrt();
    Rational::new(BigInt::from(root), BigInt::from(q << bits as u64))
}

/// Compare two points quickly with an exact fallback for near ties.
pub fn cmp_with_hint(a: &Rational, fa: f64, b: &Rational, fb: f64) -> Ordering {
    const TIE: f64 = 1e-12;
    if (fa - fb).abs() > TIE * fa.abs().max(fb.abs()).max(1.0) {
        fa.partial_cmp(&fb).unwrap_or(Ordering::Equal)
    } else {
        a.cmp(b)
    }
}

/// A real value stored as `raw / 2^frac_bits`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FixedLog {
    raw: BigInt,
    frac_bits: u32,
}

impl FixedLog {
    pub fn zero(frac_bits: u32) -> Self {
        Self { raw: BigInt::zero(), frac_bits }
    }

    pub fn raw(&self) -> &BigInt {
        &self.raw
    }

    pub fn frac_bits(&self) -> u32 {
        self.frac_bits
    }

    pub fn is_positive(&self) -> bool {
        self.raw.sign() == Sign::Plus
    }

    pub fn to_f64(&self) -> f64 {
        let r = Rational::new(self.raw.clone(), BigInt::one() << self.frac_bits as usize);
        approx_f64(&r)
    }

    pub fn to_rational(&self) -> Rational {
        Rational::new(self.raw.clone(), BigInt::one() << self.frac_bits as usize)
    }

    /// Multiply by the rational `num/den`, truncating toward zero.
    pub fn scale(&self, num: u64, den: u64) -> Self {
        Self { raw: &self.raw * BigInt::from(num) / BigInt::from(den), frac_bits: self.frac_bits }
    }

    pub fn neg(&self) -> Self {
        Self { raw: -self.raw.clone(), frac_bits: self.frac_bits }
    }

    /// The exact quotient of the two stored approximations.
    pub fn ratio(&self, other: &FixedLog) -> Rational {
        assert_eq!(self.frac_bits, other.frac_bits);
        Rational::new(self.raw.clone(), other.raw.clone())
    }
}

impl Add for &FixedLog {
    type Output = FixedLog;
    fn add(self, rhs: &FixedLog) -> FixedLog {
        assert_eq!(self.frac_bits, rhs.frac_bits);
        FixedLog { raw: &self.raw + &rhs.raw, frac_bits: self.frac_bits }
    }
}

impl Sub for &FixedLog {
    type Output = FixedLog;
    fn sub(self, rhs: &FixedLog) -> FixedLog {
        assert_eq!(self.frac_bits, rhs.frac_bits);
        FixedLog { raw: &self.raw - &rhs.raw, frac_bits: self.frac_bits }
    }
}

/// Natural logarithms of big integers to a fixed number of fractional bits.
///
/// `ln x = (b - 1) ln 2 + ln y` with `y = x / 2^(b-1)` in `[1, 2)`, and
/// `ln y = 2 atanh((y - 1) / (y + 1))` summed in fixed point with guard bits.
#[derive(Clone, Debug)]
pub struct LogScale {
    frac_bits: u32,
    work_bits: u32,
    ln2: BigUint,
}

impl LogScale {
    pub fn new(frac_bits: u32) -> Self {
        let frac_bits = frac_bits.max(8);
        let work_bits = frac_bits + GUARD_BITS;
        let one = BigUint::one() << work_bits as usize;
        let third = &one / 3u32;
        let ln2 = atanh_fixed(&third, work_bits) << 1usize;
        Self { frac_bits, work_bits, ln2 }
    }

    /// Reads [`PRECISION_ENV`], falling back to the default.
    pub fn from_env() -> Self {
        let bits = std::env::var(PRECISION_ENV)
            .ok()
            .and_then(|v| v.trim().parse::<u32>().ok())
            .unwrap_or(DEFAULT_PRECISION_BITS);
        Self::new(bits)
    }

    pub fn frac_bits(&self) -> u32 {
        self.frac_bits
    }

    /// `ln x` for `x >= 1`.
    pub fn ln(&self, x: &BigUint) -> FixedLog {
        assert!(!x.is_zero(), "logarithm of zero");
        let w = self.work_bits as u64;
        let e = x.bits() - 1;
        let y = if e >= w { x >> (e - w) } else { x << (w - e) };
        let one = BigUint::one() << w as usize;
        let ln_y = if y == one {
            BigUint::zero()
        } else {
            let z = ((&y - &one) << w as usize) / (&y + &one);
            atanh_fixed(&z, self.work_bits) << 1usize
        };
        let total = &self.ln2 * BigUint::from(e) + ln_y;
        // round to nearest at frac_bits
        let half = BigUint::one() << (GUARD_BITS - 1) as usize;
        let raw = (total + half) >> GUARD_BITS as usize;
        FixedLog { raw: BigInt::from(raw), frac_bits: self.frac_bits }
    }

    pub fn ln_u64(&self, x: u64) -> FixedLog {
        self.ln(&BigUint::from(x))
    }

    /// `ln r` for a positive rational.
    pub fn ln_rational(&self, r: &Rational) -> FixedLog {
        assert!(r.is_positive(), "logarithm of a nonpositive rational");
        let n = self.ln(r.numer().magnitude());
        let d = self.ln(r.denom().magnitude());
        &n - &d
    }
}

/// `atanh(z)` in fixed point with `w` fractional bits, `0 <= z < 1/2`.
fn atanh_fixed(z: &BigUint, w: u32) -> BigUint {
    let z2 = (z * z) >> w as usize;
    let mut term = z.clone();
    let mut sum = BigUint::zero();
    let mut k = 1u32;
    while !term.is_zero() {
        sum += &term / k;
        term = (&term * &z2) >> w as usize;
        k += 2;
    }
    sum
}

/// Serde adapters writing big integers as decimal strings.
pub mod dec {
    use num_bigint::BigUint;
    use serde::de::{self, Visitor};
    use serde::{Deserializer, Serializer};
    use std::fmt;

    pub fn serialize<S: Serializer>(v: &BigUint, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&v.to_string())
    }

    struct DecVisitor;

    impl<'de> Visitor<'de> for DecVisitor {
        type Value = BigUint;

        fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
            f.write_str("a nonnegative integer as a decimal string")
        }

        fn visit_str<E: de::Error>(self, v: &str) -> Result<BigUint, E> {
            v.trim().parse::<BigUint>().map_err(|_| E::custom(format!("not a decimal integer: {v:?}")))
        }

        fn visit_u64<E: de::Error>(self, v: u64) -> Result<BigUint, E> {
            Ok(BigUint::from(v))
        }

        fn visit_i64<E: de::Error>(self, v: i64) -> Result<BigUint, E> {
            u64::try_from(v).map(BigUint::from).map_err(|_| E::custom("negative integer"))
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<BigUint, D::Error> {
        d.deserialize_any(DecVisitor)
    }

    pub mod vec {
        use num_bigint::BigUint;
        use serde::{Deserialize, Deserializer, Serialize, Serializer};

        #[derive(Serialize, Deserialize)]
        struct Wrap(#[serde(with = "super")] BigUint);

        pub fn serialize<S: Serializer>(v: &[BigUint], s: S) -> Result<S::Ok, S::Error> {
            let w: Vec<Wrap> = v.iter().cloned().map(Wrap).collect();
            w.serialize(s)
        }

        pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<BigUint>, D::Error> {
            let w: Vec<Wrap> = Vec::deserialize(d)?;
            Ok(w.into_iter().map(|w| w.0).collect())
        }
    }
}

/// Serde adapter for signed big integers as decimal strings.
pub mod dec_signed {
    use num_bigint::BigInt;
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &BigInt, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&v.to_string())
    }

    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Raw {
        Str(String),
        Int(i64),
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<BigInt, D::Error> {
        match Raw::deserialize(d)? {
            Raw::Str(s) => s
                .trim()
                .parse::<BigInt>()
                .map_err(|_| serde::de::Error::custom(format!("not a decimal integer: {s:?}"))),
            Raw::Int(i) => Ok(BigInt::from(i)),
        }
    }
}
