//! Literal quantities with SI prefixes: `"10nA"`, `"200us"`, `"1.5pF"`, `"2kHz"`.

use crate::error::{Error, Result};
use crate::params::{decode_bias, BiasCode};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Dim {
    Current,
    Time,
    Capacitance,
    Frequency,
}

impl Dim {
    fn unit(self) -> &'static str {
        match self {
            Dim::Current => "A",
            Dim::Time => "s",
            Dim::Capacitance => "F",
            Dim::Frequency => "Hz",
        }
    }
}

/// Decimal exponent of an SI prefix.
fn prefix(p: &str) -> Option<i32> {
    Some(match p {
        "" => 0,
        "f" => -15,
        "p" => -12,
        "n" => -9,
        "u" | "µ" => -6,
        "m" => -3,
        "k" => 3,
        "M" => 6,
        _ => return None,
    })
}

/// Parse `"<number><prefix><unit>"`. A bare number is taken in base units.
pub fn parse_quantity(text: &str, dim: Dim) -> Result<f64> {
    let s = text.trim();
    let split = s
        .char_indices()
        .find(|&(i, c)| {
            c.is_alphabetic() && !((c == 'e' || c == 'E') && follows_digit_exponent(s, i))
        })
        .map_or(s.len(), |(i, _)| i);
    let (num, suffix) = s.split_at(split);
    let value: f64 = num
        .trim()
        .parse()
        .map_err(|_| Error::config(format!("cannot parse number in {text:?}")))?;
    let suffix = suffix.trim();
    let exp = if suffix.is_empty() {
        0
    } else {
        let p = suffix.strip_suffix(dim.unit()).ok_or_else(|| {
            Error::config(format!("{text:?}: expected a value in {}", dim.unit()))
        })?;
        prefix(p).ok_or_else(|| Error::config(format!("{text:?}: unknown prefix {p:?}")))?
    };
    // dividing by an exact power of ten keeps "200us" equal to 200e-6
    let v = if exp < 0 {
        value / 10f64.powi(-exp)
    } else {
        value * 10f64.powi(exp)
    };
    if !v.is_finite() {
        return Err(Error::config(format!("{text:?} is not finite")));
    }
    Ok(v)
}

/// `e`/`E` is an exponent marker when followed by a digit or sign and preceded by a digit.
fn follows_digit_exponent(s: &str, i: usize) -> bool {
    let before = s[..i]
        .chars()
        .last()
        .is_some_and(|c| c.is_ascii_digit() || c == '.');
    let after = s[i + 1..]
        .chars()
        .next()
        .is_some_and(|c| c.is_ascii_digit() || c == '-' || c == '+');
    before && after
}

/// A bias current given as a literal, a `"code:C/F"` pair, or a packed 10-bit code.
pub fn parse_current_or_code(text: &str) -> Result<f64> {
    if let Some(rest) = text.trim().strip_prefix("code:") {
        let (c, f) = rest
            .split_once('/')
            .ok_or_else(|| Error::config(format!("{text:?}: expected code:COARSE/FINE")))?;
        let parse = |x: &str| {
            x.trim()
                .parse::<u8>()
                .map_err(|_| Error::config(format!("{text:?}: bad code field {x:?}")))
        };
        let code = BiasCode::new(parse(c)?, parse(f)?).map_err(|e| Error::config(e.to_string()))?;
        return Ok(decode_bias(code)
            .map_err(|e| Error::config(e.to_string()))?
            .amps());
    }
    parse_quantity(text, Dim::Current)
}

pub fn current_from_code(value: i64) -> Result<f64> {
    let v = u16::try_from(value)
        .map_err(|_| Error::config(format!("bias code {value} out of range")))?;
    let code = BiasCode::from_value(v).map_err(|e| Error::config(e.to_string()))?;
    Ok(decode_bias(code)
        .map_err(|e| Error::config(e.to_string()))?
        .amps())
}
