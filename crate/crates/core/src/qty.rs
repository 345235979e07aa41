//! Exact item quantities.

use num_rational::Ratio;
use num_traits::{ToPrimitive, Zero};
use serde::de::{self, Deserializer, Visitor};
use serde::Serializer;
use std::fmt;

pub type Qty = Ratio<i64>;

pub fn qty(n: i64) -> Qty {
    Ratio::from_integer(n)
}

/// One-decimal rendering used in observations and requirement lists ("8.0").
pub fn fmt1(q: &Qty) -> String {
    format!("{:.1}", q.to_f64().unwrap_or(0.0))
}

/// Bare rendering used in gap lines ("8"), one decimal when fractional.
pub fn fmt_bare(q: &Qty) -> String {
    if q.is_integer() {
        q.to_integer().to_string()
    } else {
        fmt1(q)
    }
}

pub fn parse_qty(s: &str) -> Option<Qty> {
    let s = s.trim();
    if let Some((n, d)) = s.split_once('/') {
        let n: i64 = n.trim().parse().ok()?;
        let d: i64 = d.trim().parse().ok()?;
        if d == 0 {
            return None;
        }
        return Some(Ratio::new(n, d));
    }
    if let Ok(n) = s.parse::<i64>() {
        return Some(qty(n));
    }
    let f: f64 = s.parse().ok()?;
    from_f64(f)
}

fn from_f64(f: f64) -> Option<Qty> {
    if !f.is_finite() {
        return None;
    }
    // Decimal literals like 0.5 or 2.25 come out exact; others are approximated.
    Ratio::approximate_float(f)
}

pub fn serialize<S: Serializer>(q: &Qty, s: S) -> Result<S::Ok, S::Error> {
    if q.is_integer() {
        s.serialize_i64(q.to_integer())
    } else {
        s.serialize_str(&format!("{}/{}", q.numer(), q.denom()))
    }
}

pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Qty, D::Error> {
    struct V;
    impl<'de> Visitor<'de> for V {
        type Value = Qty;
        fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
            f.write_str("a quantity (number or \"n/d\")")
        }
        fn visit_i64<E: de::Error>(self, v: i64) -> Result<Qty, E> {
            Ok(qty(v))
        }
        fn visit_u64<E: de::Error>(self, v: u64) -> Result<Qty, E> {
            i64::try_from(v).map(qty).map_err(|_| E::custom("quantity too large"))
        }
        fn visit_f64<E: de::Error>(self, v: f64) -> Result<Qty, E> {
            from_f64(v).ok_or_else(|| E::custom("quantity is not a finite number"))
        }
        fn visit_str<E: de::Error>(self, v: &str) -> Result<Qty, E> {
            parse_qty(v).ok_or_else(|| E::custom(format!("bad quantity `{v}`")))
        }
    }
    d.deserialize_any(V)
}

pub fn is_positive(q: &Qty) -> bool {
    *q > Qty::zero()
}
