//! Lossless serde encoding of `f64` as the 16 hex digits of its IEEE-754 bit
//! pattern. Used wherever a persisted model must round-trip bit-exactly.

use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serializer};

pub fn encode(x: f64) -> String {
    format!("{:016x}", x.to_bits())
}

pub fn decode(s: &str) -> Option<f64> {
    let s = s.strip_prefix("0x").unwrap_or(s);
    if s.len() != 16 || !s.bytes().all(|b| b.is_ascii_hexdigit()) {
        return None;
    }
    u64::from_str_radix(s, 16).ok().map(f64::from_bits)
}

fn decode_de<'de, D: Deserializer<'de>>(s: &str) -> Result<f64, D::Error> {
    decode(s).ok_or_else(|| D::Error::custom(format!("invalid hex-encoded f64 `{s}`")))
}

pub mod scalar {
    use super::*;

    pub fn serialize<S: Serializer>(x: &f64, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&encode(*x))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        let s = String::deserialize(d)?;
        decode_de::<D>(&s)
    }
}

pub mod option {
    use super::*;

    pub fn serialize<S: Serializer>(x: &Option<f64>, s: S) -> Result<S::Ok, S::Error> {
        match x {
            Some(v) => s.serialize_some(&encode(*v)),
            None => s.serialize_none(),
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<f64>, D::Error> {
        match Option::<String>::deserialize(d)? {
            Some(s) => decode_de::<D>(&s).map(Some),
            None => Ok(None),
        }
    }
}

pub mod vec {
    use super::*;
    use serde::ser::SerializeSeq;

    pub fn serialize<S: Serializer>(xs: &[f64], s: S) -> Result<S::Ok, S::Error> {
        let mut seq = s.serialize_seq(Some(xs.len()))?;
        for x in xs {
            seq.serialize_element(&encode(*x))?;
        }
        seq.end()
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<f64>, D::Error> {
        let raw = Vec::<String>::deserialize(d)?;
        raw.iter().map(|s| decode_de::<D>(s)).collect()
    }
}
