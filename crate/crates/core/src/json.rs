//! Canonical JSON: struct field order, two-space indentation and every float
//! written with 17 significant digits, so that parsing and re-emitting a
//! document reproduces it byte for byte.

use std::io;

use serde::Serialize;
use serde_json::ser::{Formatter, PrettyFormatter};

/// Pretty printer that writes floats in `d.dddddddddddddddde±x` form.
pub struct CanonicalFormatter {
    inner: PrettyFormatter<'static>,
}

impl Default for CanonicalFormatter {
    fn default() -> Self {
        CanonicalFormatter { inner: PrettyFormatter::with_indent(b"  ") }
    }
}

impl Formatter for CanonicalFormatter {
    fn write_f64<W: ?Sized + io::Write>(&mut self, writer: &mut W, value: f64) -> io::Result<()> {
        write!(writer, "{value:.16e}")
    }

    fn write_f32<W: ?Sized + io::Write>(&mut self, writer: &mut W, value: f32) -> io::Result<()> {
        self.write_f64(writer, f64::from(value))
    }

    fn begin_array<W: ?Sized + io::Write>(&mut self, writer: &mut W) -> io::Result<()> {
        self.inner.begin_array(writer)
    }

    fn end_array<W: ?Sized + io::Write>(&mut self, writer: &mut W) -> io::Result<()> {
        self.inner.end_array(writer)
    }

    fn begin_array_value<W: ?Sized + io::Write>(&mut self, writer: &mut W, first: bool) -> io::Result<()> {
        self.inner.begin_array_value(writer, first)
    }

    fn end_array_value<W: ?Sized + io::Write>(&mut self, writer: &mut W) -> io::Result<()> {
        self.inner.end_array_value(writer)
    }

    fn begin_object<W: ?Sized + io::Write>(&mut self, writer: &mut W) -> io::Result<()> {
        self.inner.begin_object(writer)
    }

    fn end_object<W: ?Sized + io::Write>(&mut self, writer: &mut W) -> io::Result<()> {
        self.inner.end_object(writer)
    }

    fn begin_object_key<W: ?Sized + io::Write>(&mut self, writer: &mut W, first: bool) -> io::Result<()> {
        self.inner.begin_object_key(writer, first)
    }

    fn begin_object_value<W: ?Sized + io::Write>(&mut self, writer: &mut W) -> io::Result<()> {
        self.inner.begin_object_value(writer)
    }

    fn end_object_value<W: ?Sized + io::Write>(&mut self, writer: &mut W) -> io::Result<()> {
        self.inner.end_object_value(writer)
    }
}

/// Serializes `value` canonically. Non-finite floats become `null`.
pub fn to_canonical_string<T: Serialize + ?Sized>(value: &T) -> serde_json::Result<String> {
    let mut out = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut out, CanonicalFormatter::default());
    value.serialize(&mut ser)?;
    out.push(b'\n');
    Ok(String::from_utf8(out).expect("serde_json emits UTF-8"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use serde::Deserialize;

    #[derive(Debug, Serialize, Deserialize, PartialEq)]
    struct Doc {
        b: f64,
        a: Vec<f64>,
        name: String,
        missing: Option<f64>,
    }

    #[test]
    fn floats_have_seventeen_digits() {
        let s = to_canonical_string(&[0.1, 1.0, -2.5e-300]).unwrap();
        assert_eq!(s, "[\n  1.0000000000000001e-1,\n  1.0000000000000000e0,\n  -2.5000000000000000e-300\n]\n");
    }

    #[test]
    fn non_finite_is_null() {
        assert_eq!(to_canonical_string(&f64::NAN).unwrap(), "null\n");
    }

    proptest! {
        #[test]
        fn reparse_is_byte_identical(b in proptest::num::f64::NORMAL | proptest::num::f64::SUBNORMAL | proptest::num::f64::ZERO,
                                     a in proptest::collection::vec(-1e12f64..1e12, 0..5)) {
            let doc = Doc { b, a, name: "x\"y".into(), missing: None };
            let first = to_canonical_string(&doc).unwrap();
            let back: Doc = serde_json::from_str(&first).unwrap();
            prop_assert_eq!(&back, &doc);
            prop_assert_eq!(to_canonical_string(&back).unwrap(), first);
        }
    }
}
