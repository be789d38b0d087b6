//! JSONL and JSON file formats: questions, check tuples, tuple forecasts,
//! per-tuple scores, ground-truth results and summaries.
//!
//! Every writer is byte-deterministic: keys come out in a fixed order, floats
//! use the shortest representation that round-trips, and lines end in `\n`.
//! Readers report the 1-based line of the first bad record.

use std::fs;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::error::{Error, Result};
use crate::evaluation::{brier_score, AggregateReport, BrierSummary, TupleScore};
use crate::model::{timestamp, CheckKind, CheckTuple, ForecastAssignment, ForecastingQuestion, Probability, Role};

/// Recorded and recomputed Brier scores may differ by this much before a
/// results file is reported as inconsistent.
pub const BRIER_TOLERANCE: f64 = 1e-9;

const QUESTION_FIELDS: [&str; 10] = [
    "id",
    "title",
    "body",
    "resolution_date",
    "question_type",
    "data_source",
    "created_date",
    "url",
    "metadata",
    "resolution",
];

#[derive(Debug, Clone, PartialEq)]
pub struct QuestionFile {
    pub path: PathBuf,
    pub entries: Vec<ForecastingQuestion>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TupleFile {
    pub path: PathBuf,
    pub entries: Vec<CheckTuple>,
}

/// One forecast question together with its outcome.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultEntry {
    pub question: ForecastingQuestion,
    pub resolution: bool,
    pub forecast: f64,
    pub brier: f64,
    #[serde(default)]
    pub metadata: Map<String, Value>,
    #[serde(default)]
    pub reasoning: Option<String>,
}

impl ResultEntry {
    pub fn new(question: ForecastingQuestion, resolution: bool, forecast: f64, reasoning: Option<String>) -> Result<Self> {
        Probability::new(forecast)?;
        Ok(Self {
            question,
            resolution,
            forecast,
            brier: brier_score(forecast, resolution),
            metadata: Map::new(),
            reasoning,
        })
    }
}

/// A results line whose stored Brier score disagrees with its forecast.
#[derive(Debug, Clone, PartialEq)]
pub struct IntegrityWarning {
    pub line: usize,
    pub question_id: String,
    pub recorded: f64,
    pub recomputed: f64,
}

impl std::fmt::Display for IntegrityWarning {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "line {}: question `{}` records brier {} but forecast and resolution give {}",
            self.line, self.question_id, self.recorded, self.recomputed
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ForecastResultsFile {
    pub path: PathBuf,
    pub entries: Vec<ResultEntry>,
    pub warnings: Vec<IntegrityWarning>,
}

impl ForecastResultsFile {
    pub fn brier_summary(&self) -> Result<BrierSummary> {
        BrierSummary::from_forecasts(
            self.entries
                .iter()
                .map(|e| (e.question.id.clone(), e.forecast, e.resolution)),
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ForecastStatus {
    Ok,
    ElicitationFailed,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RoleForecast {
    pub role: Role,
    pub question_id: String,
    pub prob: f64,
    pub reasoning: Option<String>,
}

/// The forecasts one forecaster gave on one tuple, or the reason it gave none.
#[derive(Debug, Clone, PartialEq)]
pub struct ForecastRecord {
    pub tuple_id: String,
    pub kind: CheckKind,
    pub forecaster_id: String,
    pub status: ForecastStatus,
    /// In canonical role order; empty when elicitation failed.
    pub forecasts: Vec<RoleForecast>,
    pub error: Option<String>,
}

impl ForecastRecord {
    pub fn ok(tuple: &CheckTuple, a: &ForecastAssignment) -> Result<Self> {
        a.check_against(tuple)?;
        let reasoning = |i: usize| a.reasoning.as_ref().and_then(|r| r.get(i).cloned().flatten());
        let forecasts = tuple
            .roles
            .iter()
            .zip(&tuple.questions)
            .zip(&a.probs)
            .enumerate()
            .map(|(i, ((&role, q), p))| RoleForecast {
                role,
                question_id: q.id.clone(),
                prob: p.value(),
                reasoning: reasoning(i),
            })
            .collect();
        Ok(Self {
            tuple_id: tuple.tuple_id.clone(),
            kind: tuple.kind,
            forecaster_id: a.forecaster_id.clone(),
            status: ForecastStatus::Ok,
            forecasts,
            error: None,
        })
    }

    pub fn failed(tuple: &CheckTuple, forecaster_id: &str, error: &Error) -> Self {
        Self {
            tuple_id: tuple.tuple_id.clone(),
            kind: tuple.kind,
            forecaster_id: forecaster_id.to_string(),
            status: ForecastStatus::ElicitationFailed,
            forecasts: Vec::new(),
            error: Some(error.to_string()),
        }
    }

    pub fn probs(&self) -> Vec<f64> {
        self.forecasts.iter().map(|f| f.prob).collect()
    }

    fn to_value(&self) -> Value {
        let mut forecasts = Map::new();
        for f in &self.forecasts {
            let mut m = Map::new();
            m.insert("question_id".into(), Value::from(f.question_id.clone()));
            m.insert("prob".into(), Value::from(f.prob));
            m.insert("reasoning".into(), f.reasoning.clone().map_or(Value::Null, Value::from));
            forecasts.insert(f.role.key().into(), Value::Object(m));
        }
        let mut m = Map::new();
        m.insert("tuple_id".into(), Value::from(self.tuple_id.clone()));
        m.insert("kind".into(), Value::from(self.kind.name()));
        m.insert("forecaster_id".into(), Value::from(self.forecaster_id.clone()));
        m.insert("status".into(), serde_json::to_value(self.status).expect("status serializes"));
        m.insert("forecasts".into(), Value::Object(forecasts));
        m.insert("error".into(), self.error.clone().map_or(Value::Null, Value::from));
        Value::Object(m)
    }

    fn from_value(v: Value, ctx: &Ctx) -> Result<Self> {
        let mut obj = ctx.object(v)?;
        let tuple_id = ctx.string(&mut obj, "tuple_id")?;
        let kind = ctx.kind(&mut obj)?;
        let forecaster_id = ctx.string(&mut obj, "forecaster_id")?;
        let status: ForecastStatus = match obj.remove("status") {
            Some(s) => serde_json::from_value(s).map_err(|e| ctx.schema("status", e.to_string()))?,
            None => return Err(ctx.schema("status", "missing")),
        };
        let error = ctx.opt_string(&mut obj, "error")?;
        let mut raw = match obj.remove("forecasts") {
            Some(Value::Object(m)) => m,
            Some(Value::Null) | None => Map::new(),
            Some(_) => return Err(ctx.schema("forecasts", "expected an object keyed by role")),
        };
        let mut forecasts = Vec::new();
        if status == ForecastStatus::Ok {
            for &role in kind.roles() {
                let field = format!("forecasts.{}", role.key());
                let mut f = match raw.remove(role.key()) {
                    Some(Value::Object(m)) => m,
                    Some(_) => return Err(ctx.schema(&field, "expected an object")),
                    None => return Err(ctx.schema(&field, "missing")),
                };
                let question_id = ctx.string(&mut f, &format!("{field}.question_id"))?;
                let prob = match f.remove("prob").as_ref().and_then(Value::as_f64) {
                    Some(p) if (0.0..=1.0).contains(&p) => p,
                    Some(p) => return Err(ctx.schema(&format!("{field}.prob"), format!("{p} is not a probability"))),
                    None => return Err(ctx.schema(&format!("{field}.prob"), "expected a number")),
                };
                let reasoning = ctx.opt_string(&mut f, &format!("{field}.reasoning"))?;
                forecasts.push(RoleForecast { role, question_id, prob, reasoning });
            }
        }
        if let Some(extra) = raw.keys().next() {
            return Err(ctx.schema(&format!("forecasts.{extra}"), format!("not a role of {kind}")));
        }
        Ok(Self { tuple_id, kind, forecaster_id, status, forecasts, error })
    }
}

/// Location of the record being parsed, for error messages.
struct Ctx {
    source_name: String,
    line: usize,
}

impl Ctx {
    fn schema(&self, field: &str, message: impl Into<String>) -> Error {
        Error::Schema {
            source_name: self.source_name.clone(),
            line: self.line,
            field: field.to_string(),
            message: message.into(),
        }
    }

    fn parse(&self, message: impl Into<String>) -> Error {
        Error::Parse {
            source_name: self.source_name.clone(),
            line: self.line,
            message: message.into(),
        }
    }

    fn object(&self, v: Value) -> Result<Map<String, Value>> {
        match v {
            Value::Object(m) => Ok(m),
            other => Err(self.parse(format!("expected a JSON object, found {}", type_name(&other)))),
        }
    }

    fn string(&self, obj: &mut Map<String, Value>, field: &str) -> Result<String> {
        let key = field.rsplit('.').next().unwrap_or(field);
        match obj.remove(key) {
            Some(Value::String(s)) => Ok(s),
            Some(other) => Err(self.schema(field, format!("expected a string, found {}", type_name(&other)))),
            None => Err(self.schema(field, "missing")),
        }
    }

    fn opt_string(&self, obj: &mut Map<String, Value>, field: &str) -> Result<Option<String>> {
        let key = field.rsplit('.').next().unwrap_or(field);
        match obj.remove(key) {
            Some(Value::String(s)) => Ok(Some(s)),
            Some(Value::Null) | None => Ok(None),
            Some(other) => Err(self.schema(field, format!("expected a string or null, found {}", type_name(&other)))),
        }
    }

    fn kind(&self, obj: &mut Map<String, Value>) -> Result<CheckKind> {
        let s = self.string(obj, "kind")?;
        s.parse().map_err(|_| self.schema("kind", format!("unknown check `{s}`")))
    }

    fn metadata(&self, obj: &mut Map<String, Value>, field: &str) -> Result<Map<String, Value>> {
        match obj.remove("metadata") {
            Some(Value::Object(m)) => Ok(m),
            Some(Value::Null) | None => Ok(Map::new()),
            Some(other) => Err(self.schema(field, format!("expected an object, found {}", type_name(&other)))),
        }
    }

    /// Checks every known question field so a bad one is named, then
    /// deserializes. Unknown top-level keys move into `metadata` unless that
    /// already has the key.
    fn question(&self, v: Value, prefix: &str) -> Result<ForecastingQuestion> {
        let field = |f: &str| if prefix.is_empty() { f.to_string() } else { format!("{prefix}.{f}") };
        let mut obj = match v {
            Value::Object(m) => m,
            other => return Err(self.schema(prefix, format!("expected a question object, found {}", type_name(&other)))),
        };
        for required in ["id", "title", "body"] {
            match obj.get(required) {
                Some(Value::String(s)) if required != "id" || !s.is_empty() => {}
                Some(Value::String(_)) => return Err(self.schema(&field(required), "must not be empty")),
                Some(other) => {
                    return Err(self.schema(&field(required), format!("expected a string, found {}", type_name(other))))
                }
                None => return Err(self.schema(&field(required), "missing")),
            }
        }
        for (name, required) in [("resolution_date", true), ("created_date", false)] {
            match obj.get(name) {
                Some(Value::String(s)) if timestamp::parse(s).is_some() => {}
                Some(Value::String(s)) => return Err(self.schema(&field(name), format!("unparseable timestamp `{s}`"))),
                Some(Value::Null) | None if !required => {}
                None => return Err(self.schema(&field(name), "missing")),
                Some(other) => {
                    return Err(self.schema(&field(name), format!("expected a timestamp string, found {}", type_name(other))))
                }
            }
        }
        for name in ["data_source", "url"] {
            match obj.get(name) {
                None | Some(Value::String(_)) | Some(Value::Null) => {}
                Some(other) => return Err(self.schema(&field(name), format!("expected a string, found {}", type_name(other)))),
            }
        }
        if obj.get("data_source") == Some(&Value::Null) {
            obj.remove("data_source");
        }
        match obj.get("question_type") {
            None => {}
            Some(Value::Null) => {
                obj.remove("question_type");
            }
            Some(Value::String(s)) if s == "binary" || s == "conditional-binary" => {}
            Some(other) => return Err(self.schema(&field("question_type"), format!("unsupported question type {other}"))),
        }
        match obj.get("resolution") {
            None | Some(Value::Bool(_)) | Some(Value::Null) => {}
            Some(other) => return Err(self.schema(&field("resolution"), format!("expected a boolean or null, found {}", type_name(other)))),
        }
        let mut metadata = self.metadata(&mut obj, &field("metadata"))?;
        let extra: Vec<String> = obj.keys().filter(|k| !QUESTION_FIELDS.contains(&k.as_str())).cloned().collect();
        for k in extra {
            let v = obj.remove(&k).expect("key listed above");
            if !metadata.contains_key(&k) {
                log::debug!("{}:{}: keeping unknown question field `{k}` in metadata", self.source_name, self.line);
                metadata.insert(k, v);
            }
        }
        obj.insert("metadata".into(), Value::Object(metadata));
        serde_json::from_value(Value::Object(obj)).map_err(|e| self.schema(prefix, e.to_string()))
    }
}

fn type_name(v: &Value) -> &'static str {
    match v {
        Value::Null => "null",
        Value::Bool(_) => "a boolean",
        Value::Number(_) => "a number",
        Value::String(_) => "a string",
        Value::Array(_) => "an array",
        Value::Object(_) => "an object",
    }
}

/// Calls `f` on every non-blank line of a JSONL file with the parsed value
/// and its 1-based line number.
fn read_jsonl<T>(path: &Path, mut f: impl FnMut(Value, &Ctx) -> Result<T>) -> Result<Vec<T>> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let source_name = path.display().to_string();
    let mut out = Vec::new();
    for (i, raw) in bytes.split(|&b| b == b'\n').enumerate() {
        let ctx = Ctx { source_name: source_name.clone(), line: i + 1 };
        let line = std::str::from_utf8(raw).map_err(|e| ctx.parse(format!("invalid UTF-8: {e}")))?;
        let line = line.strip_suffix('\r').unwrap_or(line);
        if line.trim().is_empty() {
            continue;
        }
        let value: Value = serde_json::from_str(line).map_err(|e| ctx.parse(e.to_string()))?;
        out.push(f(value, &ctx)?);
    }
    Ok(out)
}

fn write_lines(path: &Path, lines: impl IntoIterator<Item = Result<String>>) -> Result<()> {
    let mut buf = String::new();
    for l in lines {
        buf.push_str(&l?);
        buf.push('\n');
    }
    fs::write(path, buf).map_err(|e| Error::io(path, e))
}

/// Writes any serializable records as JSONL, one compact object per line.
pub fn write_jsonl<T: Serialize>(path: &Path, items: &[T]) -> Result<()> {
    write_lines(path, items.iter().map(|t| Ok(serde_json::to_string(t)?)))
}

/// Reads JSONL records of a plain serde type.
pub fn read_jsonl_as<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    read_jsonl(path, |v, ctx| serde_json::from_value(v).map_err(|e| ctx.parse(e.to_string())))
}

/// Writes a single pretty-printed JSON document with a trailing newline.
pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    fs::write(path, s).map_err(|e| Error::io(path, e))
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let s = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&s).map_err(|e| Error::Parse {
        source_name: path.display().to_string(),
        line: e.line(),
        message: e.to_string(),
    })
}

fn check_unique<'a>(ids: impl IntoIterator<Item = (&'a str, usize)>, source_name: &str) -> Result<()> {
    let mut seen = std::collections::HashSet::new();
    for (id, line) in ids {
        if !seen.insert(id) {
            return Err(Error::DuplicateId {
                source_name: source_name.to_string(),
                line,
                id: id.to_string(),
            });
        }
    }
    Ok(())
}

pub fn load_questions(path: &Path) -> Result<QuestionFile> {
    let parsed = read_jsonl(path, |v, ctx| Ok((ctx.question(v, "")?, ctx.line)))?;
    check_unique(parsed.iter().map(|(q, l)| (q.id.as_str(), *l)), &path.display().to_string())?;
    Ok(QuestionFile {
        path: path.to_path_buf(),
        entries: parsed.into_iter().map(|(q, _)| q).collect(),
    })
}

pub fn write_questions(path: &Path, questions: &[ForecastingQuestion]) -> Result<()> {
    write_jsonl(path, questions)
}

/// A tuple as one JSON object: id, kind, one key per role holding the
/// question, then metadata.
pub fn tuple_to_value(t: &CheckTuple) -> Result<Value> {
    let mut m = Map::new();
    m.insert("tuple_id".into(), Value::from(t.tuple_id.clone()));
    m.insert("kind".into(), Value::from(t.kind.name()));
    for (role, q) in t.roles.iter().zip(&t.questions) {
        m.insert(role.key().into(), serde_json::to_value(q)?);
    }
    m.insert("metadata".into(), Value::Object(t.metadata.clone()));
    Ok(Value::Object(m))
}

fn tuple_from_value(v: Value, ctx: &Ctx) -> Result<CheckTuple> {
    let mut obj = ctx.object(v)?;
    let tuple_id = ctx.string(&mut obj, "tuple_id")?;
    if tuple_id.is_empty() {
        return Err(ctx.schema("tuple_id", "must not be empty"));
    }
    let kind = ctx.kind(&mut obj)?;
    let metadata = ctx.metadata(&mut obj, "metadata")?;
    // Questions may also sit under a nested "questions" object.
    if let Some(nested) = obj.remove("questions") {
        match nested {
            Value::Object(q) => {
                for (k, v) in q {
                    if obj.insert(k.clone(), v).is_some() {
                        return Err(ctx.schema(&k, "given both inline and under `questions`"));
                    }
                }
            }
            other => return Err(ctx.schema("questions", format!("expected an object, found {}", type_name(&other)))),
        }
    }
    let mut questions = Vec::with_capacity(kind.arity());
    for &role in kind.roles() {
        let v = obj
            .remove(role.key())
            .ok_or_else(|| ctx.schema(role.key(), format!("missing question for role of {kind}")))?;
        questions.push(ctx.question(v, role.key())?);
    }
    if let Some(extra) = obj.keys().next() {
        let msg = if Role::from_key(extra).is_some() {
            format!("role is not part of {kind}")
        } else {
            "unknown field".to_string()
        };
        return Err(ctx.schema(extra, msg));
    }
    let mut t = CheckTuple::new(tuple_id, kind, questions);
    t.metadata = metadata;
    t.validate().map_err(|e| ctx.schema("tuple", e.to_string()))?;
    Ok(t)
}

pub fn load_tuples(path: &Path) -> Result<TupleFile> {
    let parsed = read_jsonl(path, |v, ctx| Ok((tuple_from_value(v, ctx)?, ctx.line)))?;
    check_unique(parsed.iter().map(|(t, l)| (t.tuple_id.as_str(), *l)), &path.display().to_string())?;
    Ok(TupleFile {
        path: path.to_path_buf(),
        entries: parsed.into_iter().map(|(t, _)| t).collect(),
    })
}

/// Checks every line of a tuple file and returns one error per bad line,
/// rather than stopping at the first.
pub fn validate_tuple_file(path: &Path) -> Result<(usize, Vec<Error>)> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let source_name = path.display().to_string();
    let mut ok = 0;
    let mut errors = Vec::new();
    let mut seen = std::collections::HashSet::new();
    for (i, raw) in bytes.split(|&b| b == b'\n').enumerate() {
        let ctx = Ctx { source_name: source_name.clone(), line: i + 1 };
        let parsed = std::str::from_utf8(raw)
            .map_err(|e| ctx.parse(format!("invalid UTF-8: {e}")))
            .map(|l| l.strip_suffix('\r').unwrap_or(l))
            .and_then(|l| {
                if l.trim().is_empty() {
                    return Ok(None);
                }
                let v: Value = serde_json::from_str(l).map_err(|e| ctx.parse(e.to_string()))?;
                tuple_from_value(v, &ctx).map(Some)
            });
        match parsed {
            Ok(None) => {}
            Ok(Some(t)) if !seen.insert(t.tuple_id.clone()) => errors.push(Error::DuplicateId {
                source_name: source_name.clone(),
                line: i + 1,
                id: t.tuple_id,
            }),
            Ok(Some(_)) => ok += 1,
            Err(e) => errors.push(e),
        }
    }
    Ok((ok, errors))
}

pub fn write_tuples(path: &Path, tuples: &[CheckTuple]) -> Result<()> {
    write_lines(path, tuples.iter().map(|t| Ok(serde_json::to_string(&tuple_to_value(t)?)?)))
}

pub fn load_forecasts(path: &Path) -> Result<Vec<ForecastRecord>> {
    read_jsonl(path, ForecastRecord::from_value)
}

pub fn write_forecasts(path: &Path, records: &[ForecastRecord]) -> Result<()> {
    write_lines(path, records.iter().map(|r| Ok(serde_json::to_string(&r.to_value())?)))
}

pub fn load_scores(path: &Path) -> Result<Vec<TupleScore>> {
    read_jsonl_as(path)
}

pub fn write_scores(path: &Path, scores: &[TupleScore]) -> Result<()> {
    write_jsonl(path, scores)
}

/// Loads a results file. Entries whose Brier score cannot be recomputed
/// from forecast and resolution are kept but reported.
pub fn load_results(path: &Path) -> Result<ForecastResultsFile> {
    let parsed = read_jsonl(path, |v, ctx| {
        let mut obj = ctx.object(v)?;
        let question = ctx.question(obj.remove("question").unwrap_or(Value::Null), "question")?;
        let resolution = match obj.remove("resolution") {
            Some(Value::Bool(b)) => b,
            _ => return Err(ctx.schema("resolution", "expected a boolean")),
        };
        let mut num = |field: &str| match obj.remove(field).as_ref().and_then(Value::as_f64) {
            Some(x) => Ok(x),
            None => Err(ctx.schema(field, "expected a number")),
        };
        let forecast = num("forecast")?;
        let brier = num("brier")?;
        Probability::new(forecast).map_err(|e| ctx.schema("forecast", e.to_string()))?;
        let metadata = ctx.metadata(&mut obj, "metadata")?;
        let reasoning = ctx.opt_string(&mut obj, "reasoning")?;
        let entry = ResultEntry { question, resolution, forecast, brier, metadata, reasoning };
        let recomputed = brier_score(forecast, resolution);
        let warning = ((brier - recomputed).abs() > BRIER_TOLERANCE).then(|| IntegrityWarning {
            line: ctx.line,
            question_id: entry.question.id.clone(),
            recorded: brier,
            recomputed,
        });
        Ok((entry, warning, ctx.line))
    })?;
    check_unique(parsed.iter().map(|(e, _, l)| (e.question.id.as_str(), *l)), &path.display().to_string())?;
    let mut entries = Vec::with_capacity(parsed.len());
    let mut warnings = Vec::new();
    for (e, w, _) in parsed {
        if let Some(w) = w {
            log::warn!("{}: {w}", path.display());
            warnings.push(w);
        }
        entries.push(e);
    }
    Ok(ForecastResultsFile { path: path.to_path_buf(), entries, warnings })
}

pub fn write_results(path: &Path, entries: &[ResultEntry]) -> Result<()> {
    write_jsonl(path, entries)
}

pub fn write_summary(path: &Path, report: &AggregateReport) -> Result<()> {
    write_json(path, report)
}

pub fn load_summary(path: &Path) -> Result<AggregateReport> {
    read_json(path)
}
