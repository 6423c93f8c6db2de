//! Canonical JSON emission: compact layout, declaration-order keys, floats
//! rendered with 17 significant digits so repeated runs are byte-identical
//! and values round-trip exactly.

use std::io;

use serde::Serialize;
use serde_json::ser::Formatter;

use crate::error::{Error, Result};

pub struct CanonicalFormatter;

impl Formatter for CanonicalFormatter {
    fn write_f64<W: ?Sized + io::Write>(&mut self, writer: &mut W, value: f64) -> io::Result<()> {
        write!(writer, "{value:.16e}")
    }

    fn write_f32<W: ?Sized + io::Write>(&mut self, writer: &mut W, value: f32) -> io::Result<()> {
        write!(writer, "{value:.8e}")
    }
}

pub fn to_canonical_json<T: Serialize>(value: &T) -> String {
    let mut out = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut out, CanonicalFormatter);
    value
        .serialize(&mut ser)
        .expect("report serialization cannot fail");
    out.push(b'\n');
    String::from_utf8(out).expect("json output is utf8")
}

pub fn from_json_str<T: serde::de::DeserializeOwned>(text: &str) -> Result<T> {
    serde_json::from_str(text)
        .map_err(|e| Error::Parse(format!("{}:{}: {e}", e.line(), e.column())))
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde::Deserialize;

    #[derive(Serialize, Deserialize, PartialEq, Debug)]
    struct Demo {
        b: f64,
        a: u32,
    }

    #[test]
    fn keys_keep_declaration_order() {
        let json = to_canonical_json(&Demo { b: 0.5, a: 7 });
        assert_eq!(json, "{\"b\":5.0000000000000000e-1,\"a\":7}\n");
    }

    #[test]
    fn parse_errors_carry_positions() {
        let err = from_json_str::<Demo>("{\n  \"b\": oops\n}").unwrap_err();
        assert!(err.to_string().contains("2:"), "{err}");
    }
}
