//! Typed client for the annotation service.

use pairpop_server::api::{ApiError, Choice, JudgmentAck, JudgmentRequest, NextPair, SessionInfo, Stats};
use reqwest::StatusCode;
use serde::de::DeserializeOwned;

pub use pairpop_server::api;

#[derive(Debug, thiserror::Error)]
pub enum ClientError {
    #[error("{status}: {message}")]
    Api { status: StatusCode, message: String },
    #[error(transparent)]
    Http(#[from] reqwest::Error),
}

impl ClientError {
    pub fn status(&self) -> Option<StatusCode> {
        match self {
            ClientError::Api { status, .. } => Some(*status),
            ClientError::Http(e) => e.status(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct AnnotationClient {
    base: String,
    http: reqwest::Client,
}

impl AnnotationClient {
    /// `base` is the service root, e.g. `http://127.0.0.1:8080`.
    pub fn new(base: impl Into<String>) -> Self {
        Self { base: base.into().trim_end_matches('/').to_owned(), http: reqwest::Client::new() }
    }

    fn url(&self, path: &str) -> String {
        format!("{}{path}", self.base)
    }

    async fn decode<T: DeserializeOwned>(resp: reqwest::Response) -> Result<T, ClientError> {
        let status = resp.status();
        if status.is_success() {
            return Ok(resp.json().await?);
        }
        let message = match resp.json::<ApiError>().await {
            Ok(e) => e.error,
            Err(_) => status.canonical_reason().unwrap_or("error").to_owned(),
        };
        Err(ClientError::Api { status, message })
    }

    pub async fn session(&self) -> Result<SessionInfo, ClientError> {
        Self::decode(self.http.get(self.url("/api/session")).send().await?).await
    }

    pub async fn next_pair(&self, session_id: &str) -> Result<NextPair, ClientError> {
        Self::decode(self.http.get(self.url("/api/pairs/next")).query(&[("session", session_id)]).send().await?).await
    }

    pub async fn judge(&self, session_id: &str, pair_id: &str, choice: Choice, rationale: Option<&str>) -> Result<JudgmentAck, ClientError> {
        let body = JudgmentRequest {
            session_id: session_id.to_owned(),
            pair_id: pair_id.to_owned(),
            choice,
            rationale: rationale.map(str::to_owned),
        };
        Self::decode(self.http.post(self.url("/api/judgments")).json(&body).send().await?).await
    }

    /// Posts an arbitrary body to the judgments endpoint.
    pub async fn judge_raw(&self, body: impl Into<reqwest::Body>) -> Result<JudgmentAck, ClientError> {
        let req = self.http.post(self.url("/api/judgments")).header(reqwest::header::CONTENT_TYPE, "application/json").body(body);
        Self::decode(req.send().await?).await
    }

    pub async fn stats(&self) -> Result<Stats, ClientError> {
        Self::decode(self.http.get(self.url("/api/stats")).send().await?).await
    }

    /// Body of a GET on a server path such as an image URL, or `None` on 404.
    pub async fn fetch(&self, path: &str) -> Result<Option<Vec<u8>>, ClientError> {
        let resp = self.http.get(self.url(path)).send().await?;
        if resp.status() == StatusCode::NOT_FOUND {
            return Ok(None);
        }
        let resp = resp.error_for_status()?;
        Ok(Some(resp.bytes().await?.to_vec()))
    }
}
