use std::sync::{Condvar, Mutex};
use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::{build_prompt, GeneratorConfig, GeneratorError, StepGenerator};
use crate::state::ProofState;
use crate::step::{dedup_keep_max, parse_step, sort_candidates, Candidate, Origin};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompletionRequest {
    pub prompt: String,
    pub n: usize,
    pub temperature: f64,
    pub top_p: f64,
    pub max_tokens: usize,
    pub logprobs: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompletionChoice {
    pub text: String,
    /// Per-token log-probabilities of `text`, when the server reports them.
    #[serde(default)]
    pub token_logprobs: Option<Vec<f64>>,
    /// Token strings aligned with `token_logprobs`, when reported.
    #[serde(default)]
    pub tokens: Option<Vec<String>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompletionResponse {
    pub choices: Vec<CompletionChoice>,
}

/// Log-probability of the first line of a sample. With token strings, only
/// tokens up to the end of that line count; otherwise all tokens do.
fn first_line_logprob(choice: &CompletionChoice, line_end: usize) -> Option<f64> {
    let logprobs = choice.token_logprobs.as_ref()?;
    let total = match &choice.tokens {
        Some(tokens) if tokens.len() == logprobs.len() => {
            let mut covered = 0;
            let mut sum = 0.0;
            for (tok, lp) in tokens.iter().zip(logprobs) {
                if covered >= line_end {
                    break;
                }
                sum += lp;
                covered += tok.len();
            }
            sum
        }
        _ => logprobs.iter().sum(),
    };
    total.is_finite().then_some(total.min(0.0))
}

/// Turns raw samples into ranked candidates. Each sample contributes its
/// first non-empty line; unparseable lines are dropped; duplicates keep
/// the best score. Without log-probabilities the i-th distinct sample
/// scores `-i`.
pub fn parse_completion(response: &CompletionResponse) -> Result<Vec<Candidate>, GeneratorError> {
    let have_logprobs = response.choices.iter().any(|c| c.token_logprobs.is_some());
    let mut parsed = Vec::new();
    let mut rank = 0usize;
    for choice in &response.choices {
        let Some(line) = choice.text.lines().find(|l| !l.trim().is_empty()) else {
            continue;
        };
        let Ok(step) = parse_step(line.trim()) else {
            continue;
        };
        let line_end = choice.text.find(line).unwrap_or(0) + line.len();
        let log_prob = if have_logprobs {
            first_line_logprob(choice, line_end).unwrap_or(f64::MIN / 2.0)
        } else {
            rank += 1;
            -(rank as f64)
        };
        let cand = Candidate::new(step, log_prob, Origin::Generated)
            .map_err(|e| GeneratorError::BadResponse(e.to_string()))?;
        parsed.push(cand);
    }
    let mut out = dedup_keep_max(parsed);
    if out.is_empty() {
        return Err(GeneratorError::EmptyResult);
    }
    sort_candidates(&mut out);
    Ok(out)
}

struct InFlight {
    count: Mutex<usize>,
    freed: Condvar,
    limit: usize,
}

impl InFlight {
    fn acquire(&self) -> InFlightGuard<'_> {
        let mut count = self.count.lock().unwrap_or_else(|e| e.into_inner());
        while *count >= self.limit {
            count = self.freed.wait(count).unwrap_or_else(|e| e.into_inner());
        }
        *count += 1;
        InFlightGuard(self)
    }
}

struct InFlightGuard<'a>(&'a InFlight);

impl Drop for InFlightGuard<'_> {
    fn drop(&mut self) {
        let mut count = self.0.count.lock().unwrap_or_else(|e| e.into_inner());
        *count -= 1;
        self.0.freed.notify_one();
    }
}

/// Client for a remote completion endpoint speaking JSON over HTTP POST.
pub struct LlmGenerator {
    endpoint: String,
    config: GeneratorConfig,
    agent: ureq::Agent,
    in_flight: InFlight,
}

impl LlmGenerator {
    pub fn new(endpoint: impl Into<String>, config: GeneratorConfig) -> Result<Self, GeneratorError> {
        config.validate()?;
        let agent = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_millis(config.request_timeout_ms)))
            .build()
            .into();
        let limit = config.max_in_flight.max(1);
        Ok(LlmGenerator {
            endpoint: endpoint.into(),
            config,
            agent,
            in_flight: InFlight { count: Mutex::new(0), freed: Condvar::new(), limit },
        })
    }

    pub fn request_for(&self, state: &ProofState, n: usize) -> CompletionRequest {
        CompletionRequest {
            prompt: build_prompt(state),
            n,
            temperature: self.config.temperature,
            top_p: self.config.top_p,
            max_tokens: self.config.max_tokens,
            logprobs: true,
        }
    }
}

impl StepGenerator for LlmGenerator {
    fn generate(&self, state: &ProofState, n: usize) -> Result<Vec<Candidate>, GeneratorError> {
        let n = n.min(self.config.n_candidates);
        let body = serde_json::to_string(&self.request_for(state, n)).expect("request serializes");
        let text = {
            let _slot = self.in_flight.acquire();
            let mut response = self
                .agent
                .post(&self.endpoint)
                .header("Content-Type", "application/json")
                .send(body.as_str())
                .map_err(|e| GeneratorError::Transport(e.to_string()))?;
            response.body_mut().read_to_string().map_err(|e| GeneratorError::Transport(e.to_string()))?
        };
        let parsed: CompletionResponse =
            serde_json::from_str(&text).map_err(|e| GeneratorError::BadResponse(e.to_string()))?;
        let mut out = parse_completion(&parsed)?;
        out.truncate(n);
        Ok(out)
    }
}
