//! Compact JSON with full-fidelity floats.
//!
//! Every float is written as `{:.16e}`: one leading digit plus sixteen
//! after the point, 17 significant digits in total, which is always enough
//! to reproduce the exact `f64` on parse. The trade is readability for a
//! hard guarantee: serialize, read back, and the model is bit-identical.
//!
//! Non-finite floats have no JSON representation; callers validate
//! finiteness before anything reaches a file (network and rule constructors
//! already refuse NaN and infinity).

use serde::Serialize;
use serde_json::ser::{Formatter, Serializer};
use std::io;
use std::path::Path;

use crate::Result;

struct FullFloat;

impl Formatter for FullFloat {
    fn write_f64<W: io::Write + ?Sized>(&mut self, writer: &mut W, value: f64) -> io::Result<()> {
        write!(writer, "{value:.16e}")
    }

    fn write_f32<W: io::Write + ?Sized>(&mut self, writer: &mut W, value: f32) -> io::Result<()> {
        write!(writer, "{value:.8e}")
    }
}

/// Serializes compactly with 17-significant-digit floats.
pub fn to_string<T: Serialize>(value: &T) -> Result<String> {
    let mut out = Vec::new();
    let mut ser = Serializer::with_formatter(&mut out, FullFloat);
    value.serialize(&mut ser)?;
    Ok(String::from_utf8(out).expect("JSON serializer emits UTF-8"))
}

/// Writes the value as one JSON document plus a trailing newline.
pub fn write_file<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut body = to_string(value)?;
    body.push('\n');
    std::fs::write(path, body)?;
    Ok(())
}

pub fn read_file<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let body = std::fs::read_to_string(path)?;
    Ok(serde_json::from_str(&body)?)
}

/// The float format used everywhere a float lands in a text file.
pub fn fmt_f64(value: f64) -> String {
    format!("{value:.16e}")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn floats_round_trip_exactly() {
        for v in [
            1.0 / 3.0,
            f64::MAX,
            f64::MIN_POSITIVE,
            5e-324,
            -0.0,
            0.1 + 0.2,
            -1.2345678901234567e-89,
            // Off by one ulp under serde_json's default best-effort parser;
            // needs the float_roundtrip feature.
            -0.9839553923821913,
        ] {
            let s = fmt_f64(v);
            let back: f64 = s.parse().unwrap();
            assert_eq!(back.to_bits(), v.to_bits(), "{v} -> {s} -> {back}");
            let json: f64 = serde_json::from_str(&to_string(&v).unwrap()).unwrap();
            assert_eq!(json.to_bits(), v.to_bits(), "json {v} -> {json}");
        }
    }

    #[test]
    fn serialized_floats_are_valid_json() {
        let s = to_string(&vec![1.5, -0.25, 1e300]).unwrap();
        let back: Vec<f64> = serde_json::from_str(&s).unwrap();
        assert_eq!(back, vec![1.5, -0.25, 1e300]);
    }
}
