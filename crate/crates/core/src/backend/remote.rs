//! JSON-over-HTTP client for a local model server.
//!
//! The server must expose the full logits vector (`logits_mode: "full"`);
//! top-k-only servers are rejected at handshake because grammar masking needs
//! arbitrary tokens' scores. Endpoints and schemas are documented in
//! `docs/remote-protocol.md`.

use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::backend::{BackendDescriptor, BackendError, BackendKind, LmBackend};
use crate::recognizer::Vocabulary;
use crate::sampler::LogitVector;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RemoteConfig {
    /// Base URL, e.g. `http://127.0.0.1:8080`.
    pub endpoint: String,
    pub timeout_secs: u64,
    /// Additional attempts after a failed transport (not protocol) error.
    pub retries: u32,
}

impl Default for RemoteConfig {
    fn default() -> Self {
        RemoteConfig {
            endpoint: "http://127.0.0.1:8080".into(),
            timeout_secs: 30,
            retries: 2,
        }
    }
}

#[derive(Debug, Deserialize)]
struct HandshakeResponse {
    vocab_size: usize,
    eos_id: u32,
    model: String,
    #[serde(default = "default_logits_mode")]
    logits_mode: String,
}

fn default_logits_mode() -> String {
    "full".into()
}

#[derive(Debug, Deserialize)]
struct VocabResponse {
    tokens: Vec<Vec<u8>>,
}

#[derive(Debug, Serialize)]
struct LogitsRequest<'a> {
    context: &'a [u32],
}

#[derive(Debug, Deserialize)]
struct LogitsResponse {
    logits: Vec<f64>,
}

#[derive(Debug, Serialize)]
struct TokenizeRequest<'a> {
    text: &'a str,
}

#[derive(Debug, Deserialize)]
struct TokenizeResponse {
    ids: Vec<u32>,
}

#[derive(Debug, Serialize)]
struct DetokenizeRequest<'a> {
    ids: &'a [u32],
}

#[derive(Debug, Deserialize)]
struct DetokenizeResponse {
    bytes: Vec<u8>,
}

pub struct RemoteBackend {
    config: RemoteConfig,
    client: reqwest::blocking::Client,
    vocabulary: Vocabulary,
    model_label: String,
}

impl RemoteBackend {
    /// Handshake with the server, fetch its token table, and validate both.
    pub fn connect(config: RemoteConfig) -> Result<Self, BackendError> {
        let client = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs(config.timeout_secs))
            .build()
            .map_err(|source| BackendError::Http {
                endpoint: config.endpoint.clone(),
                source,
            })?;
        let base = config.endpoint.trim_end_matches('/').to_string();

        let handshake: HandshakeResponse =
            get_with_retries(&client, &format!("{base}/handshake"), config.retries)?;
        if handshake.logits_mode != "full" {
            return Err(BackendError::Handshake(format!(
                "server reports logits_mode `{}`; grammar masking needs the full logits vector",
                handshake.logits_mode
            )));
        }
        if handshake.vocab_size == 0 {
            return Err(BackendError::Handshake("server reports an empty vocabulary".into()));
        }

        let vocab: VocabResponse =
            get_with_retries(&client, &format!("{base}/vocab"), config.retries)?;
        if vocab.tokens.len() != handshake.vocab_size {
            return Err(BackendError::Protocol(format!(
                "vocab endpoint returned {} tokens but handshake reported vocab_size {}",
                vocab.tokens.len(),
                handshake.vocab_size
            )));
        }
        let vocabulary = Vocabulary::new(vocab.tokens, handshake.eos_id)?;

        Ok(RemoteBackend {
            config: RemoteConfig {
                endpoint: base,
                ..config
            },
            client,
            vocabulary,
            model_label: handshake.model,
        })
    }

    pub fn endpoint(&self) -> &str {
        &self.config.endpoint
    }

    pub fn model_label(&self) -> &str {
        &self.model_label
    }

    fn post<Req: Serialize, Resp: for<'de> Deserialize<'de>>(
        &self,
        path: &str,
        request: &Req,
    ) -> Result<Resp, BackendError> {
        let url = format!("{}{path}", self.config.endpoint);
        let mut last_err = None;
        for attempt in 0..=self.config.retries {
            if attempt > 0 {
                std::thread::sleep(Duration::from_millis(50 * u64::from(attempt)));
            }
            match self.client.post(&url).json(request).send() {
                Ok(response) => {
                    let response = response.error_for_status().map_err(|source| {
                        BackendError::Http {
                            endpoint: url.clone(),
                            source,
                        }
                    })?;
                    return response.json::<Resp>().map_err(|source| BackendError::Http {
                        endpoint: url.clone(),
                        source,
                    });
                }
                Err(source) if attempt < self.config.retries => {
                    last_err = Some(source);
                    continue;
                }
                Err(source) => {
                    return Err(BackendError::Http {
                        endpoint: url.clone(),
                        source,
                    })
                }
            }
        }
        Err(BackendError::Http {
            endpoint: url,
            source: last_err.expect("loop runs at least once"),
        })
    }
}

fn get_with_retries<Resp: for<'de> Deserialize<'de>>(
    client: &reqwest::blocking::Client,
    url: &str,
    retries: u32,
) -> Result<Resp, BackendError> {
    let mut last_err = None;
    for attempt in 0..=retries {
        if attempt > 0 {
            std::thread::sleep(Duration::from_millis(50 * u64::from(attempt)));
        }
        match client.get(url).send() {
            Ok(response) => {
                let response = response.error_for_status().map_err(|source| BackendError::Http {
                    endpoint: url.to_string(),
                    source,
                })?;
                return response.json::<Resp>().map_err(|source| BackendError::Http {
                    endpoint: url.to_string(),
                    source,
                });
            }
            Err(source) => last_err = Some(source),
        }
    }
    Err(BackendError::Http {
        endpoint: url.to_string(),
        source: last_err.expect("loop runs at least once"),
    })
}

impl LmBackend for RemoteBackend {
    fn next_logits(&self, context: &[u32]) -> Result<LogitVector, BackendError> {
        let response: LogitsResponse = self.post("/logits", &LogitsRequest { context })?;
        if response.logits.len() != self.vocabulary.len() {
            return Err(BackendError::WrongLogitsLength {
                expected: self.vocabulary.len(),
                got: response.logits.len(),
            });
        }
        if let Some(bad) = response.logits.iter().find(|s| !s.is_finite()) {
            return Err(BackendError::Protocol(format!(
                "server returned a non-finite logit ({bad})"
            )));
        }
        Ok(LogitVector::new(response.logits))
    }

    fn tokenize(&self, text: &str) -> Result<Vec<u32>, BackendError> {
        let response: TokenizeResponse = self.post("/tokenize", &TokenizeRequest { text })?;
        for &id in &response.ids {
            if id as usize >= self.vocabulary.len() {
                return Err(BackendError::Protocol(format!(
                    "tokenize returned id {id} outside vocabulary of {}",
                    self.vocabulary.len()
                )));
            }
        }
        Ok(response.ids)
    }

    fn detokenize(&self, ids: &[u32]) -> Result<Vec<u8>, BackendError> {
        let response: DetokenizeResponse = self.post("/detokenize", &DetokenizeRequest { ids })?;
        Ok(response.bytes)
    }

    fn vocabulary(&self) -> &Vocabulary {
        &self.vocabulary
    }

    fn descriptor(&self) -> BackendDescriptor {
        BackendDescriptor {
            kind: BackendKind::Remote,
            model_label: self.model_label.clone(),
            vocab_size: self.vocabulary.len(),
        }
    }
}
