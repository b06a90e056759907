//! Serde helpers for values that may be infinite (JSON has no inf literal).

/// Serializes a possibly-infinite f64 as either a JSON number or the string
/// `"inf"` / `"-inf"`, and reads both back.
pub mod float_or_inf {
    use serde::{de, Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, ser: S) -> Result<S::Ok, S::Error> {
        if v.is_finite() {
            ser.serialize_f64(*v)
        } else if *v > 0.0 {
            ser.serialize_str("inf")
        } else if *v < 0.0 {
            ser.serialize_str("-inf")
        } else {
            ser.serialize_str("nan")
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(de: D) -> Result<f64, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Str(String),
        }
        match Raw::deserialize(de)? {
            Raw::Num(x) => Ok(x),
            Raw::Str(s) => match s.as_str() {
                "inf" => Ok(f64::INFINITY),
                "-inf" => Ok(f64::NEG_INFINITY),
                "nan" => Ok(f64::NAN),
                other => Err(de::Error::custom(format!("bad float literal '{other}'"))),
            },
        }
    }
}

/// Text form used in CSV output: plain shortest-roundtrip decimal, with
/// `inf` for infinities.
pub fn float_to_text(v: f64) -> String {
    if v.is_finite() {
        format!("{v}")
    } else if v > 0.0 {
        "inf".to_string()
    } else if v < 0.0 {
        "-inf".to_string()
    } else {
        "nan".to_string()
    }
}
