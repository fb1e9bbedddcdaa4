//! JSON has no infinities; non-finite floats go out as strings.

use serde::Serializer;

pub fn fmt_nonfinite(v: f64) -> &'static str {
    if v.is_nan() {
        "nan"
    } else if v > 0.0 {
        "inf"
    } else {
        "-inf"
    }
}

pub fn serialize_f64<S: Serializer>(v: &f64, ser: S) -> std::result::Result<S::Ok, S::Error> {
    if v.is_finite() {
        ser.serialize_f64(*v)
    } else {
        ser.serialize_str(fmt_nonfinite(*v))
    }
}

/// Finite values as `serde_json::Value` numbers, others as strings.
pub fn json_f64(v: f64) -> serde_json::Value {
    if v.is_finite() {
        serde_json::Value::from(v)
    } else {
        serde_json::Value::from(fmt_nonfinite(v))
    }
}
