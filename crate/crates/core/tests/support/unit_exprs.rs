// Shared by the core unit tests and the cli acceptance suite.

use num_rational::Rational64;
use proptest::prelude::*;
use scenesmith_core::units::{parse_unit, BaseDimension, Dimension, KNOWN_UNITS};

/// A unit expression paired with the dimension it should denote, built
/// through the algebra rather than the parser.
#[derive(Debug, Clone)]
pub struct Expr {
    pub text: String,
    pub dim: Dimension,
}

pub fn unit() -> impl Strategy<Value = Expr> {
    prop::sample::select(KNOWN_UNITS).prop_map(|u| Expr { text: u.to_string(), dim: parse_unit(u).unwrap() })
}

pub fn exponent() -> impl Strategy<Value = Rational64> {
    (-4i64..=4, 1i64..=3).prop_filter("non-zero", |(n, _)| *n != 0).prop_map(|(n, d)| Rational64::new(n, d))
}

pub fn term() -> impl Strategy<Value = Expr> {
    (unit(), prop::option::of(exponent())).prop_map(|(u, q)| match q {
        None => u,
        Some(q) => Expr { text: format!("{}^({}/{})", u.text, q.numer(), q.denom()), dim: u.dim.pow(q) },
    })
}

/// Flat product/quotient chains, evaluated left to right.
pub fn expr() -> impl Strategy<Value = Expr> {
    (term(), prop::collection::vec((any::<bool>(), term()), 0..5)).prop_map(|(first, rest)| {
        rest.into_iter().fold(first, |acc, (mul, t)| Expr {
            text: format!("{} {} {}", acc.text, if mul { '*' } else { '/' }, t.text),
            dim: if mul { acc.dim.mul(&t.dim) } else { acc.dim.div(&t.dim) },
        })
    })
}

pub fn dimension() -> impl Strategy<Value = Dimension> {
    prop::collection::vec(prop::option::of(exponent()), 7).prop_map(|es| {
        BaseDimension::ALL
            .into_iter()
            .zip(es)
            .fold(Dimension::dimensionless(), |d, (b, e)| match e {
                Some(q) => d.with(b, q),
                None => d,
            })
    })
}
