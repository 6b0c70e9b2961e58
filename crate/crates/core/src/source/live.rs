use std::time::Duration;

use log::{debug, warn};
use percent_encoding::{utf8_percent_encode, NON_ALPHANUMERIC};
use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::{Query, RateGate, SourceError, SuggestionList, SuggestionSource};

/// Settings for a templated autocomplete endpoint.
///
/// `endpoint_template` must contain exactly one `{q}` placeholder (the
/// percent-encoded UTF-8 query) and may contain `{hl}` for the locale.
/// `response_path` selects the suggestion array inside the JSON response:
/// dot-separated object keys or array indices, empty for the top level.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SourceConfig {
    pub endpoint_template: String,
    pub locale: String,
    pub min_interval_ms: u64,
    pub max_retries: u32,
    pub backoff_base_ms: u64,
    pub timeout_ms: u64,
    pub response_path: String,
}

impl Default for SourceConfig {
    fn default() -> Self {
        Self {
            endpoint_template:
                "https://suggestqueries.google.com/complete/search?client=firefox&hl={hl}&q={q}"
                    .to_string(),
            locale: "de".to_string(),
            min_interval_ms: 1000,
            max_retries: 3,
            backoff_base_ms: 500,
            timeout_ms: 10_000,
            response_path: "1".to_string(),
        }
    }
}

impl SourceConfig {
    pub fn validate(&self) -> Result<(), SourceError> {
        let n = self.endpoint_template.matches("{q}").count();
        if n != 1 {
            return Err(SourceError::InvalidConfig(format!(
                "endpoint_template must contain exactly one {{q}} placeholder, found {n}"
            )));
        }
        if self.timeout_ms == 0 {
            return Err(SourceError::InvalidConfig("timeout_ms must be > 0".into()));
        }
        Ok(())
    }

    pub fn url_for(&self, query: &str) -> String {
        let q = utf8_percent_encode(query, NON_ALPHANUMERIC).to_string();
        let hl = utf8_percent_encode(&self.locale, NON_ALPHANUMERIC).to_string();
        self.endpoint_template.replace("{hl}", &hl).replace("{q}", &q)
    }
}

/// Extracts suggestion strings from `body` at `path`.
///
/// Array entries may be plain strings or arrays whose first element is
/// the suggestion string (the shape some engines use to attach metadata).
pub fn extract_suggestions(body: &Value, path: &str) -> Result<Vec<String>, String> {
    let mut cur = body;
    for seg in path.split('.').filter(|s| !s.is_empty()) {
        cur = match cur {
            Value::Array(items) => {
                let idx: usize = seg
                    .parse()
                    .map_err(|_| format!("path segment {seg:?} is not an array index"))?;
                items
                    .get(idx)
                    .ok_or_else(|| format!("index {idx} out of bounds"))?
            }
            Value::Object(map) => map
                .get(seg)
                .ok_or_else(|| format!("missing key {seg:?}"))?,
            _ => return Err(format!("cannot descend into scalar at {seg:?}")),
        };
    }
    let items = cur
        .as_array()
        .ok_or_else(|| "selected value is not an array".to_string())?;
    Ok(items
        .iter()
        .filter_map(|v| match v {
            Value::String(s) => Some(s.clone()),
            Value::Array(inner) => inner.first().and_then(Value::as_str).map(str::to_string),
            _ => None,
        })
        .collect())
}

enum Attempt {
    Done(Result<SuggestionList, SourceError>),
    Retry(SourceError),
}

/// Blocking HTTP source with a shared rate gate and exponential backoff.
pub struct LiveSource {
    config: SourceConfig,
    client: reqwest::blocking::Client,
    gate: RateGate,
}

impl LiveSource {
    pub fn new(config: SourceConfig) -> Result<Self, SourceError> {
        config.validate()?;
        let client = reqwest::blocking::Client::builder()
            .timeout(Duration::from_millis(config.timeout_ms))
            .build()
            .map_err(|e| SourceError::InvalidConfig(e.to_string()))?;
        let gate = RateGate::new(Duration::from_millis(config.min_interval_ms));
        Ok(Self {
            config,
            client,
            gate,
        })
    }

    pub fn config(&self) -> &SourceConfig {
        &self.config
    }

    pub fn gate(&self) -> &RateGate {
        &self.gate
    }

    fn attempt(&self, query: &Query, url: &str, attempts: usize) -> Attempt {
        self.gate.acquire();
        let resp = match self.client.get(url).send() {
            Ok(r) => r,
            Err(e) => {
                return Attempt::Retry(SourceError::Transport {
                    query: query.text().to_string(),
                    attempts,
                    message: e.to_string(),
                })
            }
        };
        let status = resp.status();
        if status.is_server_error() || status.as_u16() == 429 {
            return Attempt::Retry(SourceError::Protocol {
                query: query.text().to_string(),
                status: status.as_u16(),
            });
        }
        if !status.is_success() {
            return Attempt::Done(Err(SourceError::Protocol {
                query: query.text().to_string(),
                status: status.as_u16(),
            }));
        }
        let text = match resp.text() {
            Ok(t) => t,
            Err(e) => {
                return Attempt::Retry(SourceError::Transport {
                    query: query.text().to_string(),
                    attempts,
                    message: e.to_string(),
                })
            }
        };
        let decoded = serde_json::from_str::<Value>(&text)
            .map_err(|e| e.to_string())
            .and_then(|v| extract_suggestions(&v, &self.config.response_path));
        Attempt::Done(match decoded {
            Ok(items) => Ok(SuggestionList::new(query.clone(), items)),
            Err(message) => Err(SourceError::Decode {
                query: query.text().to_string(),
                message,
            }),
        })
    }
}

impl SuggestionSource for LiveSource {
    fn fetch(&self, query: &Query) -> Result<SuggestionList, SourceError> {
        let url = self.config.url_for(query.text());
        let mut attempt = 0u32;
        loop {
            debug!("GET {url} (attempt {})", attempt + 1);
            match self.attempt(query, &url, attempt as usize + 1) {
                Attempt::Done(r) => return r,
                Attempt::Retry(err) => {
                    if attempt >= self.config.max_retries {
                        return Err(err);
                    }
                    let wait = self.config.backoff_base_ms.saturating_mul(1 << attempt.min(16));
                    warn!("{err}; retrying in {wait} ms");
                    std::thread::sleep(Duration::from_millis(wait));
                    attempt += 1;
                }
            }
        }
    }
}
