//! Domain types shared by every other module.

use std::fmt;
use std::str::FromStr;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Deserializer, Serialize};
use serde_json::{Map, Value};

use crate::error::{Error, Result};

/// A probability in the closed unit interval.
///
/// Stored as a double and never rounded; serialization is the shortest
/// representation that round-trips exactly.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct Probability(f64);

impl Probability {
    pub fn new(value: f64) -> Result<Self> {
        if value.is_finite() && (0.0..=1.0).contains(&value) {
            Ok(Self(value))
        } else {
            Err(Error::InvalidProbability(value))
        }
    }

    pub fn value(self) -> f64 {
        self.0
    }

    pub fn complement(self) -> Self {
        Self(1.0 - self.0)
    }

    pub fn from_slice(values: &[f64]) -> Result<Vec<Self>> {
        values.iter().map(|&v| Self::new(v)).collect()
    }
}

impl TryFrom<f64> for Probability {
    type Error = Error;

    fn try_from(value: f64) -> Result<Self> {
        Self::new(value)
    }
}

impl From<Probability> for f64 {
    fn from(p: Probability) -> f64 {
        p.0
    }
}

impl fmt::Display for Probability {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

/// Resolution of a question inside a tuple; conditional questions whose
/// condition fails resolve to `NotApplicable`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ResolutionOpt {
    True,
    False,
    NotApplicable,
}

impl ResolutionOpt {
    pub const ALL: [ResolutionOpt; 3] = [Self::True, Self::False, Self::NotApplicable];
}

impl From<bool> for ResolutionOpt {
    fn from(b: bool) -> Self {
        if b {
            Self::True
        } else {
            Self::False
        }
    }
}

impl fmt::Display for ResolutionOpt {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::True => "T",
            Self::False => "F",
            Self::NotApplicable => "N/A",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum QuestionType {
    #[default]
    Binary,
    ConditionalBinary,
}

/// A binary forecasting question.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForecastingQuestion {
    pub id: String,
    pub title: String,
    pub body: String,
    #[serde(with = "timestamp")]
    pub resolution_date: DateTime<Utc>,
    #[serde(default)]
    pub question_type: QuestionType,
    #[serde(default = "default_data_source")]
    pub data_source: String,
    #[serde(default, with = "timestamp::option", skip_serializing_if = "Option::is_none")]
    pub created_date: Option<DateTime<Utc>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub url: Option<String>,
    #[serde(default, deserialize_with = "null_as_empty_map")]
    pub metadata: Map<String, Value>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub resolution: Option<bool>,
}

fn default_data_source() -> String {
    "unknown".to_string()
}

fn null_as_empty_map<'de, D: Deserializer<'de>>(d: D) -> Result<Map<String, Value>, D::Error> {
    Ok(Option::<Map<String, Value>>::deserialize(d)?.unwrap_or_default())
}

impl ForecastingQuestion {
    /// Minimal question with the given id and title, resolving at `resolution_date`.
    pub fn new(id: impl Into<String>, title: impl Into<String>, resolution_date: DateTime<Utc>) -> Self {
        Self {
            id: id.into(),
            title: title.into(),
            body: String::new(),
            resolution_date,
            question_type: QuestionType::Binary,
            data_source: "synthetic".to_string(),
            created_date: None,
            url: None,
            metadata: Map::new(),
            resolution: None,
        }
    }
}

/// The ten consistency checks, in canonical table order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum CheckKind {
    Negation,
    Paraphrase,
    Consequence,
    AndOr,
    And,
    Or,
    But,
    Cond,
    CondCond,
    ExpEvidence,
}

impl CheckKind {
    pub const ALL: [CheckKind; 10] = [
        Self::Negation,
        Self::Paraphrase,
        Self::Consequence,
        Self::AndOr,
        Self::And,
        Self::Or,
        Self::But,
        Self::Cond,
        Self::CondCond,
        Self::ExpEvidence,
    ];

    pub fn arity(self) -> usize {
        self.roles().len()
    }

    /// Canonical role sequence of the tuple.
    pub fn roles(self) -> &'static [Role] {
        use Role::*;
        match self {
            Self::Negation => &[P, NotP],
            Self::Paraphrase | Self::Consequence => &[P, Q],
            Self::AndOr => &[P, Q, PAndQ, POrQ],
            Self::And => &[P, Q, PAndQ],
            Self::Or => &[P, Q, POrQ],
            Self::But => &[P, NotPAndQ, POrQ],
            Self::Cond => &[P, QGivenP, PAndQ],
            Self::CondCond => &[P, QGivenP, RGivenPAndQ, PAndQAndR],
            Self::ExpEvidence => &[P, Q, PGivenQ, PGivenNotQ],
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::Negation => "Negation",
            Self::Paraphrase => "Paraphrase",
            Self::Consequence => "Consequence",
            Self::AndOr => "AndOr",
            Self::And => "And",
            Self::Or => "Or",
            Self::But => "But",
            Self::Cond => "Cond",
            Self::CondCond => "CondCond",
            Self::ExpEvidence => "ExpEvidence",
        }
    }

    /// Position in canonical table order.
    pub fn index(self) -> usize {
        self as usize
    }

    pub(crate) fn check_arity(self, field: &'static str, found: usize) -> Result<()> {
        if found == self.arity() {
            Ok(())
        } else {
            Err(Error::ArityMismatch {
                kind: self,
                field,
                expected: self.arity(),
                found,
            })
        }
    }
}

impl fmt::Display for CheckKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for CheckKind {
    type Err = Error;

    /// Case-insensitive; underscores and dashes are ignored (`cond_cond`, `exp-evidence`).
    fn from_str(s: &str) -> Result<Self> {
        let norm: String = s
            .chars()
            .filter(|c| *c != '_' && *c != '-')
            .collect::<String>()
            .to_ascii_lowercase();
        Self::ALL
            .into_iter()
            .find(|k| k.name().to_ascii_lowercase() == norm)
            .ok_or_else(|| Error::Config(format!("unknown check kind `{s}`")))
    }
}

/// Position labels inside a check tuple.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Role {
    #[serde(rename = "P")]
    P,
    #[serde(rename = "not_P")]
    NotP,
    #[serde(rename = "Q")]
    Q,
    #[serde(rename = "P_and_Q")]
    PAndQ,
    #[serde(rename = "P_or_Q")]
    POrQ,
    #[serde(rename = "not_P_and_Q")]
    NotPAndQ,
    #[serde(rename = "Q_given_P")]
    QGivenP,
    #[serde(rename = "R_given_P_and_Q")]
    RGivenPAndQ,
    #[serde(rename = "P_and_Q_and_R")]
    PAndQAndR,
    #[serde(rename = "P_given_Q")]
    PGivenQ,
    #[serde(rename = "P_given_not_Q")]
    PGivenNotQ,
}

impl Role {
    pub const ALL: [Role; 11] = [
        Self::P,
        Self::NotP,
        Self::Q,
        Self::PAndQ,
        Self::POrQ,
        Self::NotPAndQ,
        Self::QGivenP,
        Self::RGivenPAndQ,
        Self::PAndQAndR,
        Self::PGivenQ,
        Self::PGivenNotQ,
    ];

    /// Key used for this role in tuple files.
    pub fn key(self) -> &'static str {
        match self {
            Self::P => "P",
            Self::NotP => "not_P",
            Self::Q => "Q",
            Self::PAndQ => "P_and_Q",
            Self::POrQ => "P_or_Q",
            Self::NotPAndQ => "not_P_and_Q",
            Self::QGivenP => "Q_given_P",
            Self::RGivenPAndQ => "R_given_P_and_Q",
            Self::PAndQAndR => "P_and_Q_and_R",
            Self::PGivenQ => "P_given_Q",
            Self::PGivenNotQ => "P_given_not_Q",
        }
    }

    pub fn from_key(key: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|r| r.key() == key)
    }

    /// Whether the role is a conditional question that can resolve N/A.
    pub fn is_conditional(self) -> bool {
        matches!(
            self,
            Self::QGivenP | Self::RGivenPAndQ | Self::PGivenQ | Self::PGivenNotQ
        )
    }
}

impl fmt::Display for Role {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.key())
    }
}

/// An ordered tuple of questions instantiating one consistency check.
#[derive(Debug, Clone, PartialEq)]
pub struct CheckTuple {
    pub tuple_id: String,
    pub kind: CheckKind,
    pub questions: Vec<ForecastingQuestion>,
    pub roles: Vec<Role>,
    pub metadata: Map<String, Value>,
}

impl CheckTuple {
    /// Builds a tuple with the canonical roles of `kind`.
    pub fn new(tuple_id: impl Into<String>, kind: CheckKind, questions: Vec<ForecastingQuestion>) -> Self {
        Self {
            tuple_id: tuple_id.into(),
            kind,
            questions,
            roles: kind.roles().to_vec(),
            metadata: Map::new(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let kind = self.kind;
        let canonical = kind.roles();
        kind.check_arity("roles", self.roles.len())?;
        for (position, (&found, &expected)) in self.roles.iter().zip(canonical).enumerate() {
            if found != expected {
                return Err(Error::RoleOrderMismatch {
                    kind,
                    position,
                    expected,
                    found,
                });
            }
        }
        if self.questions.len() < canonical.len() {
            return Err(Error::MissingQuestion {
                kind,
                role: canonical[self.questions.len()],
            });
        }
        kind.check_arity("questions", self.questions.len())?;
        if let Some(i) = self.questions.iter().position(|q| q.id.is_empty()) {
            return Err(Error::MissingQuestion {
                kind,
                role: canonical[i],
            });
        }
        Ok(())
    }

    pub fn question(&self, role: Role) -> Option<&ForecastingQuestion> {
        self.roles
            .iter()
            .position(|&r| r == role)
            .and_then(|i| self.questions.get(i))
    }
}

/// Returns `t` unchanged if it is structurally sound.
pub fn validate_tuple(t: CheckTuple) -> Result<CheckTuple> {
    t.validate()?;
    Ok(t)
}

/// Forecasts for one tuple, aligned with its roles.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForecastAssignment {
    pub tuple_id: String,
    pub probs: Vec<Probability>,
    pub forecaster_id: String,
    #[serde(default)]
    pub reasoning: Option<Vec<Option<String>>>,
}

impl ForecastAssignment {
    pub fn values(&self) -> Vec<f64> {
        self.probs.iter().map(|p| p.value()).collect()
    }

    pub fn check_against(&self, tuple: &CheckTuple) -> Result<()> {
        tuple.kind.check_arity("probs", self.probs.len())
    }
}

/// ISO-8601 timestamps. Accepts RFC 3339, `YYYY-MM-DD HH:MM:SS+HH:MM`,
/// naive date-times (taken as UTC) and bare dates (midnight UTC); always
/// writes `YYYY-MM-DDTHH:MM:SSZ`.
pub mod timestamp {
    use chrono::{DateTime, NaiveDate, NaiveDateTime, SecondsFormat, Utc};
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn parse(s: &str) -> Option<DateTime<Utc>> {
        let s = s.trim();
        if let Ok(t) = DateTime::parse_from_rfc3339(s) {
            return Some(t.with_timezone(&Utc));
        }
        for fmt in ["%Y-%m-%d %H:%M:%S%.f%:z", "%Y-%m-%d %H:%M:%S%.f%z", "%Y-%m-%dT%H:%M:%S%.f%z"] {
            if let Ok(t) = DateTime::parse_from_str(s, fmt) {
                return Some(t.with_timezone(&Utc));
            }
        }
        for fmt in ["%Y-%m-%d %H:%M:%S%.f", "%Y-%m-%dT%H:%M:%S%.f"] {
            if let Ok(t) = NaiveDateTime::parse_from_str(s, fmt) {
                return Some(t.and_utc());
            }
        }
        NaiveDate::parse_from_str(s, "%Y-%m-%d")
            .ok()
            .and_then(|d| d.and_hms_opt(0, 0, 0))
            .map(|t| t.and_utc())
    }

    pub fn format(t: &DateTime<Utc>) -> String {
        t.to_rfc3339_opts(SecondsFormat::AutoSi, true)
    }

    pub fn serialize<S: Serializer>(t: &DateTime<Utc>, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&format(t))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<DateTime<Utc>, D::Error> {
        let raw = String::deserialize(d)?;
        parse(&raw).ok_or_else(|| serde::de::Error::custom(format!("invalid timestamp `{raw}`")))
    }

    pub mod option {
        use chrono::{DateTime, Utc};
        use serde::{Deserialize, Deserializer, Serializer};

        pub fn serialize<S: Serializer>(t: &Option<DateTime<Utc>>, s: S) -> Result<S::Ok, S::Error> {
            match t {
                Some(t) => s.serialize_str(&super::format(t)),
                None => s.serialize_none(),
            }
        }

        pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<DateTime<Utc>>, D::Error> {
            match Option::<String>::deserialize(d)? {
                None => Ok(None),
                Some(raw) => super::parse(&raw)
                    .map(Some)
                    .ok_or_else(|| serde::de::Error::custom(format!("invalid timestamp `{raw}`"))),
            }
        }
    }
}
