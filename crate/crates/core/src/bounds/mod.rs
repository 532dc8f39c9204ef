//! Explicit constants and inequality checks producing machine-readable reports.

mod appendix;
mod checks;
mod constants;
mod qmatrix;

pub use appendix::*;
pub use checks::*;
pub use constants::*;
pub use qmatrix::*;

use serde::{Deserialize, Serialize};

/// Parameters an inequality was evaluated at.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ReportInputs {
    pub domain_hash: Option<String>,
    #[serde(rename = "N")]
    pub n_electrons: Option<usize>,
    pub beta: Option<f64>,
    pub mu: Option<f64>,
    /// `U`; infinite repulsion is written as the string `"inf"`.
    #[serde(rename = "U", with = "repulsion")]
    pub u: Option<f64>,
}

/// One evaluated inequality `lhs ≥ rhs`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub name: String,
    pub lhs: f64,
    pub rhs: f64,
    pub slack: f64,
    pub tol: f64,
    pub inputs: ReportInputs,
    pub pass: bool,
}

impl BoundReport {
    pub fn new(name: impl Into<String>, lhs: f64, rhs: f64, tol: f64, inputs: ReportInputs) -> Self {
        let slack = lhs - rhs;
        Self {
            name: name.into(),
            lhs,
            rhs,
            slack,
            tol,
            inputs,
            pass: slack >= -tol,
        }
    }
}

mod repulsion {
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    #[derive(Serialize, Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Num(f64),
        Text(String),
    }

    pub fn serialize<S: Serializer>(u: &Option<f64>, s: S) -> Result<S::Ok, S::Error> {
        match u {
            Some(v) if v.is_infinite() => s.serialize_str("inf"),
            Some(v) => s.serialize_f64(*v),
            None => s.serialize_none(),
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<f64>, D::Error> {
        match Option::<Repr>::deserialize(d)? {
            None => Ok(None),
            Some(Repr::Num(v)) => Ok(Some(v)),
            Some(Repr::Text(t)) if t == "inf" => Ok(Some(f64::INFINITY)),
            Some(Repr::Text(t)) => Err(serde::de::Error::custom(format!("bad U value {t:?}"))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pass_follows_slack() {
        let r = BoundReport::new("x", 1.0, 1.0 + 1e-9, 1e-8, ReportInputs::default());
        assert!(r.pass);
        let r = BoundReport::new("x", 1.0, 1.1, 1e-8, ReportInputs::default());
        assert!(!r.pass);
        assert!((r.slack + 0.1).abs() < 1e-15);
    }

    #[test]
    fn json_round_trip_with_infinite_u() {
        let inputs = ReportInputs {
            domain_hash: Some("abc".into()),
            n_electrons: Some(3),
            u: Some(f64::INFINITY),
            ..Default::default()
        };
        let r = BoundReport::new("theorem1_upper", 2.0, 1.0, 1e-8, inputs);
        let text = serde_json::to_string(&r).unwrap();
        assert!(text.contains("\"U\":\"inf\""));
        assert!(text.contains("\"N\":3"));
        let back: BoundReport = serde_json::from_str(&text).unwrap();
        assert_eq!(back, r);
    }
}
