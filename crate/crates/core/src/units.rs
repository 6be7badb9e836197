//! SI dimension vectors and the unit-expression parser.
//!
//! A [`Dimension`] maps the seven SI base dimensions to exact rational
//! exponents. Unit expressions follow a deliberately small grammar:
//!
//! ```text
//! expr := term (('*' | '/') term)*
//! term := unit ('^' signed_rational)?
//! unit := identifier | '1'
//! ```
//!
//! Exponents may be written `^2`, `^-1`, `^1/2` or `^(-1/2)`. SI prefixes are
//! not recognised; `km` is an unknown unit.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use num_rational::Rational64;
use num_traits::{One, Signed, Zero};
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

/// The seven SI base dimensions, in canonical order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum BaseDimension {
    Length,
    Mass,
    Time,
    Current,
    Temperature,
    Amount,
    Luminosity,
}

impl BaseDimension {
    pub const ALL: [BaseDimension; 7] = [
        BaseDimension::Length,
        BaseDimension::Mass,
        BaseDimension::Time,
        BaseDimension::Current,
        BaseDimension::Temperature,
        BaseDimension::Amount,
        BaseDimension::Luminosity,
    ];

    pub fn symbol(self) -> &'static str {
        match self {
            BaseDimension::Length => "L",
            BaseDimension::Mass => "M",
            BaseDimension::Time => "T",
            BaseDimension::Current => "I",
            BaseDimension::Temperature => "Θ",
            BaseDimension::Amount => "N",
            BaseDimension::Luminosity => "J",
        }
    }

    pub fn from_symbol(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|d| d.symbol() == s)
    }

    fn index(self) -> usize {
        self as usize
    }
}

/// Exponent vector over the SI base dimensions.
///
/// Exponents are reduced fractions, so equality is exact.
#[derive(Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct Dimension {
    exponents: [Rational64; 7],
}

impl Dimension {
    pub fn dimensionless() -> Self {
        Self::default()
    }

    pub fn base(dim: BaseDimension) -> Self {
        Self::dimensionless().with(dim, Rational64::one())
    }

    /// Builds a dimension from integer exponents, e.g. `[(Length, 1), (Time, -1)]`.
    pub fn from_ints(pairs: &[(BaseDimension, i64)]) -> Self {
        pairs
            .iter()
            .fold(Self::dimensionless(), |acc, &(d, e)| acc.with(d, Rational64::from_integer(e)))
    }

    pub fn with(mut self, dim: BaseDimension, exponent: Rational64) -> Self {
        self.exponents[dim.index()] = exponent;
        self
    }

    pub fn exponent(&self, dim: BaseDimension) -> Rational64 {
        self.exponents[dim.index()]
    }

    pub fn is_dimensionless(&self) -> bool {
        self.exponents.iter().all(Zero::is_zero)
    }

    pub fn mul(&self, other: &Dimension) -> Dimension {
        let mut out = *self;
        for (o, e) in out.exponents.iter_mut().zip(other.exponents.iter()) {
            *o += *e;
        }
        out
    }

    pub fn div(&self, other: &Dimension) -> Dimension {
        let mut out = *self;
        for (o, e) in out.exponents.iter_mut().zip(other.exponents.iter()) {
            *o -= *e;
        }
        out
    }

    pub fn pow(&self, q: Rational64) -> Dimension {
        let mut out = *self;
        for o in out.exponents.iter_mut() {
            *o *= q;
        }
        out
    }

    pub fn recip(&self) -> Dimension {
        self.pow(-Rational64::one())
    }

    /// Non-zero exponents keyed by base-dimension symbol.
    pub fn to_map(&self) -> BTreeMap<BaseDimension, Rational64> {
        BaseDimension::ALL
            .into_iter()
            .filter(|d| !self.exponent(*d).is_zero())
            .map(|d| (d, self.exponent(d)))
            .collect()
    }
}

fn fmt_rational(q: Rational64) -> String {
    if q.is_integer() {
        q.numer().to_string()
    } else {
        format!("{}/{}", q.numer(), q.denom())
    }
}

fn parse_rational(s: &str) -> Option<Rational64> {
    let (n, d) = match s.split_once('/') {
        Some((n, d)) => (n.trim().parse::<i64>().ok()?, d.trim().parse::<i64>().ok()?),
        None => (s.trim().parse::<i64>().ok()?, 1),
    };
    if d == 0 {
        return None;
    }
    Some(Rational64::new(n, d))
}

impl fmt::Debug for Dimension {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Dimension({self})")
    }
}

impl fmt::Display for Dimension {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_dimensionless() {
            return f.write_str("1");
        }
        let parts: Vec<String> = self
            .to_map()
            .into_iter()
            .map(|(d, e)| {
                if e.is_one() {
                    d.symbol().to_string()
                } else {
                    format!("{}^{}", d.symbol(), fmt_rational(e))
                }
            })
            .collect();
        f.write_str(&parts.join("·"))
    }
}

impl Serialize for Dimension {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        let map: BTreeMap<&'static str, String> = self
            .to_map()
            .into_iter()
            .map(|(d, e)| (d.symbol(), fmt_rational(e)))
            .collect();
        map.serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for Dimension {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        use serde::de::Error;
        let raw = BTreeMap::<String, String>::deserialize(deserializer)?;
        let mut dim = Dimension::dimensionless();
        for (k, v) in raw {
            let base = BaseDimension::from_symbol(&k)
                .ok_or_else(|| D::Error::custom(format!("unknown base dimension `{k}`")))?;
            let e = parse_rational(&v)
                .ok_or_else(|| D::Error::custom(format!("bad exponent `{v}` for `{k}`")))?;
            dim = dim.with(base, e);
        }
        Ok(dim)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum UnitError {
    #[error("unknown unit `{0}`")]
    UnknownUnit(String),
    #[error("malformed unit expression at byte {0}")]
    MalformedExpression(usize),
}

/// Named units understood by the parser.
pub fn lookup_unit(name: &str) -> Option<Dimension> {
    use BaseDimension::*;
    let d = match name {
        "m" => Dimension::base(Length),
        "s" => Dimension::base(Time),
        "kg" => Dimension::base(Mass),
        "A" => Dimension::base(Current),
        "K" => Dimension::base(Temperature),
        "mol" => Dimension::base(Amount),
        "cd" => Dimension::base(Luminosity),
        "rad" | "sr" => Dimension::dimensionless(),
        "Hz" => Dimension::from_ints(&[(Time, -1)]),
        "N" => Dimension::from_ints(&[(Mass, 1), (Length, 1), (Time, -2)]),
        "J" => Dimension::from_ints(&[(Mass, 1), (Length, 2), (Time, -2)]),
        "W" => Dimension::from_ints(&[(Mass, 1), (Length, 2), (Time, -3)]),
        "Pa" => Dimension::from_ints(&[(Mass, 1), (Length, -1), (Time, -2)]),
        "C" => Dimension::from_ints(&[(Current, 1), (Time, 1)]),
        "V" => Dimension::from_ints(&[(Mass, 1), (Length, 2), (Time, -3), (Current, -1)]),
        _ => return None,
    };
    Some(d)
}

/// Names accepted by [`lookup_unit`], in a stable order.
pub const KNOWN_UNITS: &[&str] = &[
    "m", "s", "kg", "A", "K", "mol", "cd", "rad", "sr", "Hz", "N", "J", "W", "Pa", "C", "V",
];

struct Parser<'a> {
    src: &'a str,
    pos: usize,
}

impl<'a> Parser<'a> {
    fn skip_ws(&mut self) {
        while let Some(c) = self.peek() {
            if c.is_whitespace() {
                self.pos += c.len_utf8();
            } else {
                break;
            }
        }
    }

    fn peek(&self) -> Option<char> {
        self.src[self.pos..].chars().next()
    }

    fn bump(&mut self) -> Option<char> {
        let c = self.peek()?;
        self.pos += c.len_utf8();
        Some(c)
    }

    fn malformed(&self) -> UnitError {
        UnitError::MalformedExpression(self.pos)
    }

    fn expr(&mut self) -> Result<Dimension, UnitError> {
        let mut acc = self.term()?;
        loop {
            self.skip_ws();
            match self.peek() {
                None => return Ok(acc),
                Some('*') => {
                    self.bump();
                    acc = acc.mul(&self.term()?);
                }
                Some('/') => {
                    self.bump();
                    acc = acc.div(&self.term()?);
                }
                Some(_) => return Err(self.malformed()),
            }
        }
    }

    fn term(&mut self) -> Result<Dimension, UnitError> {
        let base = self.unit()?;
        self.skip_ws();
        if self.peek() == Some('^') {
            self.bump();
            let q = self.exponent()?;
            Ok(base.pow(q))
        } else {
            Ok(base)
        }
    }

    fn unit(&mut self) -> Result<Dimension, UnitError> {
        self.skip_ws();
        let start = self.pos;
        match self.peek() {
            Some('1') => {
                self.bump();
                if matches!(self.peek(), Some(c) if c.is_ascii_digit()) {
                    return Err(self.malformed());
                }
                Ok(Dimension::dimensionless())
            }
            Some(c) if c.is_alphabetic() || c == '_' => {
                while matches!(self.peek(), Some(c) if c.is_alphanumeric() || c == '_') {
                    self.bump();
                }
                let name = &self.src[start..self.pos];
                lookup_unit(name).ok_or_else(|| UnitError::UnknownUnit(name.to_string()))
            }
            _ => Err(self.malformed()),
        }
    }

    fn integer(&mut self) -> Result<i64, UnitError> {
        self.skip_ws();
        let start = self.pos;
        if matches!(self.peek(), Some('-') | Some('+')) {
            self.bump();
        }
        while matches!(self.peek(), Some(c) if c.is_ascii_digit()) {
            self.bump();
        }
        self.src[start..self.pos]
            .parse::<i64>()
            .map_err(|_| UnitError::MalformedExpression(start))
    }

    fn exponent(&mut self) -> Result<Rational64, UnitError> {
        self.skip_ws();
        let parenthesised = self.peek() == Some('(');
        if parenthesised {
            self.bump();
        }
        let numer = self.integer()?;
        let mut denom = 1;
        // `m^1/2` reads the slash as part of the exponent only when a digit follows;
        // units never start with a digit other than the standalone `1`.
        let save = self.pos;
        self.skip_ws();
        if self.peek() == Some('/') {
            let slash = self.pos;
            self.bump();
            self.skip_ws();
            let digit_follows = matches!(self.peek(), Some(c) if c.is_ascii_digit());
            let lone_one = self.src[self.pos..].starts_with('1')
                && !matches!(self.src[self.pos + 1..].chars().next(), Some(c) if c.is_ascii_digit());
            if digit_follows && (parenthesised || !lone_one) {
                denom = self.integer()?;
                if denom <= 0 {
                    return Err(UnitError::MalformedExpression(slash));
                }
            } else {
                self.pos = save;
            }
        } else {
            self.pos = save;
        }
        if parenthesised {
            self.skip_ws();
            if self.bump() != Some(')') {
                return Err(self.malformed());
            }
        }
        Ok(Rational64::new(numer, denom))
    }
}

/// Parses a unit expression into its dimension vector.
pub fn parse_unit(expr: &str) -> Result<Dimension, UnitError> {
    let mut p = Parser { src: expr, pos: 0 };
    p.skip_ws();
    if p.peek().is_none() {
        return Err(UnitError::MalformedExpression(0));
    }
    p.expr()
}

impl FromStr for Dimension {
    type Err = UnitError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse_unit(s)
    }
}

/// Writes a dimension back as a canonical unit expression over base units.
pub fn format_base_units(dim: &Dimension) -> String {
    if dim.is_dimensionless() {
        return "1".to_string();
    }
    let unit = |d: BaseDimension| match d {
        BaseDimension::Length => "m",
        BaseDimension::Mass => "kg",
        BaseDimension::Time => "s",
        BaseDimension::Current => "A",
        BaseDimension::Temperature => "K",
        BaseDimension::Amount => "mol",
        BaseDimension::Luminosity => "cd",
    };
    dim.to_map()
        .into_iter()
        .map(|(d, e)| {
            if e.is_one() {
                unit(d).to_string()
            } else if e.is_integer() {
                format!("{}^{}", unit(d), e.numer())
            } else {
                let sign = if e.is_negative() { "-" } else { "" };
                format!("{}^({}{}/{})", unit(d), sign, e.numer().abs(), e.denom())
            }
        })
        .collect::<Vec<_>>()
        .join("*")
}

#[cfg(test)]
mod tests {
    use super::*;
    use BaseDimension::*;

    fn q(n: i64, d: i64) -> Rational64 {
        Rational64::new(n, d)
    }

    #[test]
    fn speed() {
        assert_eq!(parse_unit("m/s").unwrap(), Dimension::from_ints(&[(Length, 1), (Time, -1)]));
    }

    #[test]
    fn one_is_dimensionless() {
        assert!(parse_unit("1").unwrap().is_dimensionless());
        assert!(parse_unit("rad").unwrap().is_dimensionless());
    }

    #[test]
    fn newton_by_hand() {
        let hand = Dimension::from_ints(&[(Mass, 1), (Length, 1), (Time, -2)]);
        assert_eq!(parse_unit("kg*m/s^2").unwrap(), hand);
        assert_eq!(parse_unit("N").unwrap(), hand);
    }

    #[test]
    fn rational_exponents() {
        let d = parse_unit("m^1/2").unwrap();
        assert_eq!(d.exponent(Length), q(1, 2));
        let d = parse_unit("m^(-3/6) * s").unwrap();
        assert_eq!(d.exponent(Length), q(-1, 2));
        assert_eq!(d.exponent(Time), q(1, 1));
        // division by the dimensionless unit, not an exponent denominator
        assert_eq!(parse_unit("m^2/1").unwrap(), Dimension::from_ints(&[(Length, 2)]));
    }

    #[test]
    fn division_is_left_associative() {
        let d = parse_unit("m/s*kg").unwrap();
        assert_eq!(d, Dimension::from_ints(&[(Length, 1), (Time, -1), (Mass, 1)]));
    }

    #[test]
    fn errors() {
        assert_eq!(parse_unit("km"), Err(UnitError::UnknownUnit("km".into())));
        assert_eq!(parse_unit("m//s"), Err(UnitError::MalformedExpression(2)));
        assert_eq!(parse_unit(""), Err(UnitError::MalformedExpression(0)));
        assert!(matches!(parse_unit("m^"), Err(UnitError::MalformedExpression(_))));
        assert!(matches!(parse_unit("m^(1/0)"), Err(UnitError::MalformedExpression(_))));
        assert!(matches!(parse_unit("m s"), Err(UnitError::MalformedExpression(2))));
        assert!(matches!(parse_unit("12"), Err(UnitError::MalformedExpression(_))));
    }

    #[test]
    fn algebra() {
        let v = Dimension::from_ints(&[(Length, 1), (Time, -1)]);
        assert_eq!(Dimension::base(Length).mul(&Dimension::from_ints(&[(Time, -1)])), v);
        assert!(v.div(&v).is_dimensionless());
        assert_eq!(v.pow(q(2, 1)), Dimension::from_ints(&[(Length, 2), (Time, -2)]));
        assert_eq!(v.pow(q(1, 1)), v);
    }

    #[test]
    fn serde_round_trip_and_sparse_form() {
        let d = parse_unit("kg*m^(1/2)").unwrap();
        let json = serde_json::to_string(&d).unwrap();
        assert_eq!(json, r#"{"L":"1/2","M":"1"}"#);
        assert_eq!(serde_json::from_str::<Dimension>(&json).unwrap(), d);
        assert_eq!(serde_json::to_string(&Dimension::dimensionless()).unwrap(), "{}");
    }

    #[test]
    fn base_unit_formatting_reparses() {
        let d = parse_unit("N*m^(1/3)/A").unwrap();
        assert_eq!(parse_unit(&format_base_units(&d)).unwrap(), d);
    }
}
