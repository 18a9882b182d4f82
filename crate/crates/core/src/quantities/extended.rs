//! Serde adapter for lengths that may be infinite (a half-space, a
//! massless mediator). JSON has no infinity, so it is written as "inf".

use serde::{Deserialize, Deserializer, Serializer};

pub fn serialize<S: Serializer>(value: &f64, s: S) -> Result<S::Ok, S::Error> {
    if value.is_infinite() {
        s.serialize_str(if *value > 0.0 { "inf" } else { "-inf" })
    } else {
        s.serialize_f64(*value)
    }
}

#[derive(Deserialize)]
#[serde(untagged)]
enum Repr {
    Number(f64),
    Text(String),
}

pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
    match Repr::deserialize(d)? {
        Repr::Number(v) => Ok(v),
        Repr::Text(t) => match t.as_str() {
            "inf" => Ok(f64::INFINITY),
            "-inf" => Ok(f64::NEG_INFINITY),
            other => Err(serde::de::Error::custom(format!(
                "expected a number or \"inf\", got {other:?}"
            ))),
        },
    }
}

#[cfg(test)]
mod tests {
    #[derive(serde::Serialize, serde::Deserialize, PartialEq, Debug)]
    struct Wrap {
        #[serde(with = "super")]
        x: f64,
    }

    #[test]
    fn round_trip() {
        for x in [1.5e-6, f64::INFINITY] {
            let json = serde_json::to_string(&Wrap { x }).unwrap();
            assert_eq!(serde_json::from_str::<Wrap>(&json).unwrap(), Wrap { x });
        }
        assert_eq!(
            serde_json::to_string(&Wrap { x: f64::INFINITY }).unwrap(),
            r#"{"x":"inf"}"#
        );
        assert!(serde_json::from_str::<Wrap>(r#"{"x":"big"}"#).is_err());
    }
}
