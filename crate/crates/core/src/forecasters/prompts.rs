//! Prompt templates for the chat-completion forecaster.

use serde_json::{Map, Value};

use crate::model::ForecastingQuestion;

pub const BASIC_PROMPT: &str = "You are an informed and well-calibrated forecaster. I need you to give me your best probability estimate for the following sentence or question resolving YES. Your answer should be a float between 0 and 1, with nothing else in your response.\nQuestion: {question}";

pub const COT_PROMPT: &str = "You are an informed and well-calibrated forecaster. I need you to give me your best probability estimate for the following question resolving YES. If you think it is likely the question resolves YES, the probability should be large; if you think it is unlikely the question resolves NO, the probability should be small. I want you to first provide a detailed reasoning for your answer, and then give me the probability. Your answer should be in the format: 'Reasoning: [your reasoning here] Probability: [float between 0 and 1]'\n\nNote: unless explicitly stated in the prompt, do not worry about the exact formatting of the output.\nThere will be an extra step that will summarize your output into the final answer format.\nFor context, the final answer format is described by the following Pydantic model:\n{response_model.model_fields=}\n\nAgain, just try to answer the question as best as you can, with all the necessary information; the output will be cleaned up in the final step.\nQuestion: {question}";

/// Rendering of the structured answer type that the reasoning step is told about.
pub const RESPONSE_MODEL_FIELDS: &str = "response_model.model_fields={'reasoning': FieldInfo(annotation=str, required=True), 'prob': FieldInfo(annotation=float, required=True, metadata=[Ge(ge=0.0), Le(le=1.0)])}";

pub const EXTRACTION_PROMPT: &str = "Below is a forecaster's answer to a forecasting question. Extract the final probability estimate and a short summary of the reasoning. Respond with a single JSON object of the form {\"reasoning\": string, \"prob\": float between 0 and 1} and nothing else.\n\nAnswer:\n{response}";

/// JSON view of a question shown to the model: title, body, resolution date
/// and, when known, creation date.
pub fn render_question(q: &ForecastingQuestion) -> String {
    let mut obj = Map::new();
    obj.insert("title".into(), Value::from(q.title.clone()));
    obj.insert("body".into(), Value::from(q.body.clone()));
    obj.insert(
        "resolution_date".into(),
        Value::from(q.resolution_date.format("%Y-%m-%d").to_string()),
    );
    if let Some(created) = q.created_date {
        obj.insert("created_date".into(), Value::from(created.format("%Y-%m-%d").to_string()));
    }
    serde_json::to_string_pretty(&Value::Object(obj)).expect("map of strings serializes")
}

pub fn basic_prompt(q: &ForecastingQuestion) -> String {
    BASIC_PROMPT.replace("{question}", &render_question(q))
}

pub fn cot_prompt(q: &ForecastingQuestion) -> String {
    COT_PROMPT
        .replace("{response_model.model_fields=}", RESPONSE_MODEL_FIELDS)
        .replace("{question}", &render_question(q))
}

pub fn extraction_prompt(response: &str) -> String {
    EXTRACTION_PROMPT.replace("{response}", response)
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::{TimeZone, Utc};

    fn question() -> ForecastingQuestion {
        let mut q = ForecastingQuestion::new("x", "Will it rain?", Utc.with_ymd_and_hms(2025, 3, 4, 12, 0, 0).unwrap());
        q.body = "Resolves YES if it rains.".into();
        q
    }

    #[test]
    fn created_date_omitted_when_absent() {
        let s = render_question(&question());
        assert!(s.contains("\"resolution_date\": \"2025-03-04\""));
        assert!(!s.contains("created_date"));
        let mut q = question();
        q.created_date = Some(Utc.with_ymd_and_hms(2024, 1, 2, 0, 0, 0).unwrap());
        assert!(render_question(&q).contains("\"created_date\": \"2024-01-02\""));
    }

    #[test]
    fn prompts_substitute_question() {
        let b = basic_prompt(&question());
        assert!(b.ends_with("}"));
        assert!(b.contains("Question: {\n"));
        let c = cot_prompt(&question());
        assert!(!c.contains("{question}"));
        assert!(c.contains("'prob': FieldInfo"));
        assert!(extraction_prompt("Probability: 0.3").ends_with("Probability: 0.3"));
    }
}
