//! Chat-completion forecaster.
//!
//! Requests use the common `{"model", "messages", "temperature"}` body and
//! read `choices[0].message.content` from the response. Transport errors,
//! 429 and 5xx responses are retried with exponential backoff; the number of
//! requests in flight is capped per forecaster.

use std::sync::{Condvar, Mutex};
use std::time::Duration;

use log::{debug, warn};
use regex::Regex;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::prompts;
use super::{Forecast, Forecaster, ForecasterSpec};
use crate::error::{Error, Result};
use crate::model::ForecastingQuestion;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PromptStyle {
    #[default]
    Basic,
    Cot,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HttpConfig {
    /// Full URL of the chat-completions route.
    pub endpoint: String,
    pub model_name: String,
    pub temperature: f64,
    pub prompt_style: PromptStyle,
    /// Environment variable holding the bearer token; no header when unset.
    pub api_key_env: String,
    pub max_retries: u32,
    pub backoff_ms: u64,
    pub concurrency: usize,
    pub timeout_secs: u64,
    /// Model used for the structured-extraction step of the reasoning prompt.
    pub extraction_model: Option<String>,
}

impl HttpConfig {
    pub fn new(endpoint: impl Into<String>, model_name: impl Into<String>) -> Self {
        Self {
            endpoint: endpoint.into(),
            model_name: model_name.into(),
            temperature: 0.0,
            prompt_style: PromptStyle::Basic,
            api_key_env: "OPENAI_API_KEY".into(),
            max_retries: 3,
            backoff_ms: 500,
            concurrency: 8,
            timeout_secs: 120,
            extraction_model: None,
        }
    }

    pub fn from_spec(spec: &ForecasterSpec) -> Result<Self> {
        let missing = |k: &str| Error::Config(format!("forecaster `{}` (http_llm) needs param `{k}`", spec.id));
        let endpoint = spec.str_param("endpoint")?.ok_or_else(|| missing("endpoint"))?;
        let model = spec.str_param("model_name")?.ok_or_else(|| missing("model_name"))?;
        let mut cfg = Self::new(endpoint, model);
        if let Some(t) = spec.f64_param("temperature")? {
            cfg.temperature = t;
        }
        if let Some(style) = spec.params.get("prompt_style") {
            cfg.prompt_style = serde_json::from_value(style.clone())
                .map_err(|_| Error::Config(format!("prompt_style must be `basic` or `cot`, got {style}")))?;
        }
        if let Some(env) = spec.str_param("api_key_env")? {
            cfg.api_key_env = env.to_string();
        }
        if let Some(n) = spec.u64_param("max_retries")? {
            cfg.max_retries = n as u32;
        }
        if let Some(ms) = spec.u64_param("backoff_ms")? {
            cfg.backoff_ms = ms;
        }
        if let Some(c) = spec.u64_param("concurrency")? {
            cfg.concurrency = (c as usize).max(1);
        }
        if let Some(s) = spec.u64_param("timeout_secs")? {
            cfg.timeout_secs = s;
        }
        cfg.extraction_model = spec.str_param("extraction_model")?.map(str::to_string);
        Ok(cfg)
    }
}

/// Counting semaphore bounding concurrent requests.
struct Gate {
    free: Mutex<usize>,
    cv: Condvar,
}

struct Permit<'a>(&'a Gate);

impl Gate {
    fn new(n: usize) -> Self {
        Self { free: Mutex::new(n), cv: Condvar::new() }
    }

    fn acquire(&self) -> Permit<'_> {
        let mut free = self.free.lock().unwrap_or_else(|e| e.into_inner());
        while *free == 0 {
            free = self.cv.wait(free).unwrap_or_else(|e| e.into_inner());
        }
        *free -= 1;
        Permit(self)
    }
}

impl Drop for Permit<'_> {
    fn drop(&mut self) {
        *self.0.free.lock().unwrap_or_else(|e| e.into_inner()) += 1;
        self.0.cv.notify_one();
    }
}

pub struct HttpForecaster {
    id: String,
    cfg: HttpConfig,
    agent: ureq::Agent,
    gate: Gate,
}

impl HttpForecaster {
    pub fn new(id: impl Into<String>, cfg: HttpConfig) -> Self {
        let agent = ureq::Agent::config_builder()
            .http_status_as_error(false)
            .timeout_global(Some(Duration::from_secs(cfg.timeout_secs)))
            .build()
            .into();
        let gate = Gate::new(cfg.concurrency.max(1));
        Self { id: id.into(), cfg, agent, gate }
    }

    pub fn from_spec(spec: &ForecasterSpec) -> Result<Self> {
        Ok(Self::new(spec.id.clone(), HttpConfig::from_spec(spec)?))
    }

    pub fn config(&self) -> &HttpConfig {
        &self.cfg
    }

    fn backoff(&self, attempt: u32) {
        let ms = self.cfg.backoff_ms.saturating_mul(1 << attempt.min(16));
        std::thread::sleep(Duration::from_millis(ms));
    }

    /// One completion with retries on transient failures; returns the message content.
    fn complete(&self, model: &str, prompt: &str, seed: u64) -> Result<String> {
        let body = json!({
            "model": model,
            "messages": [{"role": "user", "content": prompt}],
            "temperature": self.cfg.temperature,
            "seed": seed,
        });
        let token = std::env::var(&self.cfg.api_key_env).ok().filter(|t| !t.is_empty());
        let mut last = None;
        for attempt in 0..=self.cfg.max_retries {
            if attempt > 0 {
                self.backoff(attempt - 1);
            }
            let _permit = self.gate.acquire();
            let mut req = self.agent.post(&self.cfg.endpoint).header("Content-Type", "application/json");
            if let Some(t) = &token {
                req = req.header("Authorization", &format!("Bearer {t}"));
            }
            let mut resp = match req.send_json(&body) {
                Ok(r) => r,
                Err(e) => {
                    warn!("{}: request failed (attempt {}): {e}", self.id, attempt + 1);
                    last = Some(Error::Http { message: e.to_string(), payload: None });
                    continue;
                }
            };
            let status = resp.status().as_u16();
            let text = resp.body_mut().read_to_string().unwrap_or_default();
            if status == 429 || status >= 500 {
                warn!("{}: status {status} (attempt {})", self.id, attempt + 1);
                last = Some(Error::Http { message: format!("status {status}"), payload: Some(text) });
                continue;
            }
            if !(200..300).contains(&status) {
                return Err(Error::Http { message: format!("status {status}"), payload: Some(text) });
            }
            debug!("{}: response {text}", self.id);
            return message_content(&text);
        }
        Err(last.unwrap_or_else(|| Error::Http { message: "no attempts made".into(), payload: None }))
    }

    fn extract(&self, response: &str, seed: u64) -> Result<Forecast> {
        let model = self.cfg.extraction_model.as_deref().unwrap_or(&self.cfg.model_name);
        let prompt = prompts::extraction_prompt(response);
        let mut last = None;
        for attempt in 0..=self.cfg.max_retries {
            let content = self.complete(model, &prompt, seed.wrapping_add(attempt as u64))?;
            match parse_extraction(&content) {
                Ok((prob, summary)) => {
                    let reasoning = if summary.is_empty() { response.to_string() } else { format!("{response}\n\n{summary}") };
                    return Ok(Forecast { prob, reasoning: Some(reasoning) });
                }
                Err(e) => last = Some(e),
            }
        }
        Err(last.expect("at least one extraction attempt"))
    }
}

impl Forecaster for HttpForecaster {
    fn id(&self) -> &str {
        &self.id
    }

    fn forecast(&self, q: &ForecastingQuestion, seed: u64) -> Result<Forecast> {
        match self.cfg.prompt_style {
            PromptStyle::Basic => {
                let content = self.complete(&self.cfg.model_name, &prompts::basic_prompt(q), seed)?;
                Ok(Forecast { prob: parse_probability(&content)?, reasoning: None })
            }
            PromptStyle::Cot => {
                let content = self.complete(&self.cfg.model_name, &prompts::cot_prompt(q), seed)?;
                self.extract(&content, seed)
            }
        }
    }
}

fn parse_error(message: &str, payload: &str) -> Error {
    Error::ForecastParse { message: message.to_string(), payload: payload.to_string() }
}

fn message_content(body: &str) -> Result<String> {
    let v: Value = serde_json::from_str(body).map_err(|e| parse_error(&format!("response is not JSON: {e}"), body))?;
    v.pointer("/choices/0/message/content")
        .and_then(Value::as_str)
        .map(str::to_string)
        .ok_or_else(|| parse_error("response has no choices[0].message.content", body))
}

fn checked_prob(p: f64, payload: &str) -> Result<f64> {
    if p.is_finite() && (0.0..=1.0).contains(&p) {
        Ok(p)
    } else {
        Err(parse_error(&format!("probability {p} outside [0, 1]"), payload))
    }
}

/// Probability from a basic-prompt answer: a bare number, a JSON object with
/// `prob`, or text ending in `Probability: x`.
pub fn parse_probability(content: &str) -> Result<f64> {
    let trimmed = content.trim().trim_matches('`').trim();
    if let Ok(p) = trimmed.parse::<f64>() {
        return checked_prob(p, content);
    }
    if let Ok(v) = serde_json::from_str::<Value>(trimmed) {
        if let Some(p) = v.get("prob").and_then(Value::as_f64) {
            return checked_prob(p, content);
        }
    }
    let re = Regex::new(r"(?i)probability\**\s*[:=]\s*\**\s*([01]?\.\d+|[01])").expect("static regex");
    if let Some(c) = re.captures_iter(content).last() {
        let p: f64 = c[1].parse().map_err(|_| parse_error("bad number", content))?;
        return checked_prob(p, content);
    }
    Err(parse_error("no probability found", content))
}

/// `(prob, reasoning)` from the extraction step's JSON answer.
fn parse_extraction(content: &str) -> Result<(f64, String)> {
    let start = content.find('{');
    let end = content.rfind('}');
    let json = match (start, end) {
        (Some(s), Some(e)) if s < e => &content[s..=e],
        _ => return Err(parse_error("extraction answer contains no JSON object", content)),
    };
    let v: Value = serde_json::from_str(json).map_err(|e| parse_error(&format!("extraction answer: {e}"), content))?;
    let prob = v
        .get("prob")
        .and_then(Value::as_f64)
        .ok_or_else(|| parse_error("extraction answer has no numeric `prob`", content))?;
    let reasoning = v.get("reasoning").and_then(Value::as_str).unwrap_or_default().to_string();
    Ok((checked_prob(prob, content)?, reasoning))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn probability_formats() {
        assert_eq!(parse_probability("0.35").unwrap(), 0.35);
        assert_eq!(parse_probability(" 1 \n").unwrap(), 1.0);
        assert_eq!(parse_probability("{\"prob\": 0.2}").unwrap(), 0.2);
        assert_eq!(parse_probability("Reasoning: meh. Probability: 0.7").unwrap(), 0.7);
        assert!(matches!(parse_probability("1.7"), Err(Error::ForecastParse { .. })));
        assert!(matches!(parse_probability("no idea"), Err(Error::ForecastParse { .. })));
    }

    #[test]
    fn extraction_json() {
        let (p, r) = parse_extraction("```json\n{\"reasoning\": \"r\", \"prob\": 0.4}\n```").unwrap();
        assert_eq!((p, r.as_str()), (0.4, "r"));
        assert!(parse_extraction("{\"reasoning\": \"r\"}").is_err());
    }

    #[test]
    fn content_pointer() {
        let body = r#"{"choices":[{"message":{"role":"assistant","content":"0.5"}}]}"#;
        assert_eq!(message_content(body).unwrap(), "0.5");
        match message_content("{}") {
            Err(Error::ForecastParse { payload, .. }) => assert_eq!(payload, "{}"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn spec_parsing() {
        let spec = ForecasterSpec::new("h", super::super::Backend::HttpLlm)
            .with_param("endpoint", "http://localhost:1/v1/chat/completions")
            .with_param("model_name", "m")
            .with_param("prompt_style", "cot");
        let cfg = HttpConfig::from_spec(&spec).unwrap();
        assert_eq!(cfg.prompt_style, PromptStyle::Cot);
        assert_eq!(cfg.temperature, 0.0);
        let bad = spec.clone().with_param("prompt_style", "fancy");
        assert!(HttpConfig::from_spec(&bad).is_err());
    }
}
