use std::time::Duration;

use serde_json::{json, Value};
use tracing::warn;

use super::{CompletionRequest, Completer, LlmError, ProviderConfig};

/// Blocking chat-completions client with retry and exponential backoff.
pub struct HttpCompleter {
    config: ProviderConfig,
    client: reqwest::blocking::Client,
}

impl HttpCompleter {
    pub fn new(config: ProviderConfig) -> Result<Self, LlmError> {
        config.validate()?;
        let client = reqwest::blocking::Client::builder()
            .build()
            .map_err(|e| LlmError::Transport(e.to_string()))?;
        Ok(Self { config, client })
    }

    fn body(&self, request: &CompletionRequest) -> Value {
        json!({
            "model": self.config.model,
            "messages": [
                {"role": "system", "content": request.system_prompt},
                {"role": "user", "content": request.user_prompt},
            ],
            "temperature": request.temperature,
            "max_tokens": request.max_tokens,
        })
    }
}

enum Attempt {
    Done(Result<String, LlmError>),
    Retry(LlmError),
}

fn first_choice(body: &str) -> Result<String, LlmError> {
    let v: Value = serde_json::from_str(body).map_err(|e| LlmError::MalformedResponse(e.to_string()))?;
    v.pointer("/choices/0/message/content")
        .and_then(Value::as_str)
        .map(str::to_string)
        .ok_or_else(|| LlmError::MalformedResponse("missing choices[0].message.content".into()))
}

impl HttpCompleter {
    fn attempt(&self, body: &Value, token: Option<&str>, timeout: Duration, n: u32) -> Attempt {
        let mut req = self.client.post(&self.config.endpoint).timeout(timeout).json(body);
        if let Some(t) = token {
            req = req.bearer_auth(t);
        }
        let resp = match req.send() {
            Ok(r) => r,
            Err(e) if e.is_timeout() => return Attempt::Retry(LlmError::Timeout(n)),
            Err(e) => return Attempt::Retry(LlmError::Transport(e.to_string())),
        };
        let status = resp.status().as_u16();
        match status {
            401 | 403 => Attempt::Done(Err(LlmError::Auth(status))),
            429 => Attempt::Retry(LlmError::RateLimited(n)),
            500..=599 => Attempt::Retry(LlmError::Server { status, attempts: n }),
            200..=299 => match resp.text() {
                Ok(text) => Attempt::Done(first_choice(&text)),
                Err(e) if e.is_timeout() => Attempt::Retry(LlmError::Timeout(n)),
                Err(e) => Attempt::Done(Err(LlmError::Transport(e.to_string()))),
            },
            other => Attempt::Done(Err(LlmError::MalformedResponse(format!("unexpected HTTP status {other}")))),
        }
    }
}

impl Completer for HttpCompleter {
    fn complete(&self, request: &CompletionRequest) -> Result<String, LlmError> {
        request.validate()?;
        let token = match &self.config.token_env {
            Some(var) => Some(std::env::var(var).map_err(|_| LlmError::MissingToken(var.clone()))?),
            None => None,
        };
        let body = self.body(request);
        let attempts = self.config.retries + 1;
        let mut backoff = Duration::from_millis(self.config.backoff_ms);
        let mut last = LlmError::Transport("no attempt made".into());
        for n in 1..=attempts {
            match self.attempt(&body, token.as_deref(), request.timeout, n) {
                Attempt::Done(result) => return result,
                Attempt::Retry(err) => {
                    warn!(attempt = n, error = %err, "completion attempt failed");
                    last = err;
                    if n < attempts {
                        std::thread::sleep(backoff);
                        backoff *= 2;
                    }
                }
            }
        }
        Err(last)
    }

    fn name(&self) -> String {
        format!("http:{}", self.config.model)
    }
}
