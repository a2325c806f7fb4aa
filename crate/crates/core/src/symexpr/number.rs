use std::cmp::Ordering;
use std::fmt;
use std::hash::{Hash, Hasher};

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

/// A numeric literal: exact rational, or a float once rounding has happened.
///
/// Arithmetic between two rationals stays exact; anything touching a float
/// produces a float.
#[derive(Clone, Debug)]
pub enum Number {
    Rational(BigRational),
    Float(f64),
}

impl Number {
    pub fn rational(num: i64, den: i64) -> Self {
        Number::Rational(BigRational::new(BigInt::from(num), BigInt::from(den)))
    }

    pub fn is_zero(&self) -> bool {
        match self {
            Number::Rational(r) => r.is_zero(),
            Number::Float(f) => *f == 0.0,
        }
    }

    pub fn is_one(&self) -> bool {
        match self {
            Number::Rational(r) => r.is_one(),
            Number::Float(f) => *f == 1.0,
        }
    }

    pub fn is_negative(&self) -> bool {
        match self {
            Number::Rational(r) => r.is_negative(),
            Number::Float(f) => *f < 0.0,
        }
    }

    pub fn to_f64(&self) -> f64 {
        match self {
            Number::Rational(r) => r.to_f64().unwrap_or(f64::NAN),
            Number::Float(f) => *f,
        }
    }

    pub fn add(&self, other: &Number) -> Number {
        match (self, other) {
            (Number::Rational(a), Number::Rational(b)) => Number::Rational(a + b),
            _ => Number::Float(self.to_f64() + other.to_f64()),
        }
    }

    pub fn mul(&self, other: &Number) -> Number {
        match (self, other) {
            (Number::Rational(a), Number::Rational(b)) => Number::Rational(a * b),
            _ => Number::Float(self.to_f64() * other.to_f64()),
        }
    }

    pub fn neg(&self) -> Number {
        match self {
            Number::Rational(r) => Number::Rational(-r),
            Number::Float(f) => Number::Float(-f),
        }
    }

    /// Integer power; `None` for `0^n` with `n < 0`.
    pub fn powi(&self, n: i64) -> Option<Number> {
        if n < 0 && self.is_zero() {
            return None;
        }
        Some(match self {
            Number::Rational(r) => {
                let e = i32::try_from(n).ok()?;
                Number::Rational(num_traits::pow::Pow::pow(r, e))
            }
            Number::Float(f) => Number::Float(f.powi(i32::try_from(n).ok()?)),
        })
    }

    /// Integer value if this is an exact integer.
    pub fn as_integer(&self) -> Option<&BigInt> {
        match self {
            Number::Rational(r) if r.is_integer() => Some(r.numer()),
            _ => None,
        }
    }
}

impl From<i64> for Number {
    fn from(v: i64) -> Self {
        Number::Rational(BigRational::from_integer(BigInt::from(v)))
    }
}

impl PartialEq for Number {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Number {}

impl PartialOrd for Number {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Total order: rationals before floats, floats by `total_cmp`.
impl Ord for Number {
    fn cmp(&self, other: &Self) -> Ordering {
        match (self, other) {
            (Number::Rational(a), Number::Rational(b)) => a.cmp(b),
            (Number::Float(a), Number::Float(b)) => a.total_cmp(b),
            (Number::Rational(_), Number::Float(_)) => Ordering::Less,
            (Number::Float(_), Number::Rational(_)) => Ordering::Greater,
        }
    }
}

impl Hash for Number {
    fn hash<H: Hasher>(&self, state: &mut H) {
        match self {
            Number::Rational(r) => {
                0u8.hash(state);
                r.hash(state);
            }
            Number::Float(f) => {
                1u8.hash(state);
                f.to_bits().hash(state);
            }
        }
    }
}

/// Renders rationals with a terminating decimal expansion as decimals and
/// everything else as `(a/b)`, so the text parses back to the same value.
impl fmt::Display for Number {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Number::Rational(r) => {
                if r.is_integer() {
                    return write!(f, "{}", r.numer());
                }
                match terminating_decimal(r) {
                    Some(s) => f.write_str(&s),
                    None => {
                        if r.is_negative() {
                            write!(f, "-({}/{})", -r.numer(), r.denom())
                        } else {
                            write!(f, "({}/{})", r.numer(), r.denom())
                        }
                    }
                }
            }
            Number::Float(x) => write!(f, "{x:?}"),
        }
    }
}

fn terminating_decimal(r: &BigRational) -> Option<String> {
    let two = BigInt::from(2);
    let five = BigInt::from(5);
    let mut den = r.denom().clone();
    let (mut twos, mut fives) = (0u32, 0u32);
    while (&den % &two).is_zero() {
        den /= &two;
        twos += 1;
    }
    while (&den % &five).is_zero() {
        den /= &five;
        fives += 1;
    }
    if !den.is_one() {
        return None;
    }
    let digits = twos.max(fives);
    let scale = num_traits::pow(BigInt::from(10), digits as usize);
    let scaled = (r * BigRational::from_integer(scale)).to_integer();
    let neg = scaled.is_negative();
    let mut s = scaled.abs().to_string();
    let digits = digits as usize;
    if s.len() <= digits {
        s = "0".repeat(digits + 1 - s.len()) + &s;
    }
    let split = s.len() - digits;
    let out = format!("{}.{}", &s[..split], &s[split..]);
    Some(if neg { format!("-{out}") } else { out })
}
