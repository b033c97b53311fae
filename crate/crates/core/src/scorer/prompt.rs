use std::sync::LazyLock;

use regex::Regex;

use super::ScorerError;

pub(crate) const TRANSLATION_HEADER: &str =
    "Translate the following code-mixed text to English. Only state the translation.";

/// The relevance prompt with `query` and `document` substituted verbatim.
pub fn build_relevance_prompt(query: &str, document: &str) -> Result<String, ScorerError> {
    if query.is_empty() {
        return Err(ScorerError::EmptyInput("query"));
    }
    if document.is_empty() {
        return Err(ScorerError::EmptyInput("document"));
    }
    Ok(format!(
        "Given the query {query} and the document {document}, find how relevant is the query \
         to the document based on semantic similarity. Provide a relevance score between 0 and 1. \
         Only state the score."
    ))
}

pub fn build_translation_prompt(text: &str) -> Result<String, ScorerError> {
    if text.is_empty() {
        return Err(ScorerError::EmptyInput("text"));
    }
    Ok(format!("{TRANSLATION_HEADER}\n{text}"))
}

static NUMBER: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"\d+(?:\.\d+)?|\.\d+").expect("valid number pattern"));

/// First unsigned decimal in `response`, clamped to `[0, 1]`.
pub fn parse_score_response(response: &str) -> Result<f64, ScorerError> {
    let m = NUMBER
        .find(response)
        .ok_or_else(|| ScorerError::NoNumber(response.to_string()))?;
    let value: f64 = m
        .as_str()
        .parse()
        .map_err(|_| ScorerError::NoNumber(response.to_string()))?;
    Ok(value.clamp(0.0, 1.0))
}
