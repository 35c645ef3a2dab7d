//! Thin async client for the classification service.

use thiserror::Error;

use hosvd_core::api::{ClassifyResponse, ErrorResponse, HealthResponse};

#[derive(Debug, Error)]
pub enum ClientError {
    #[error("request failed: {0}")]
    Http(#[from] reqwest::Error),
    #[error("server answered {status}: {message}")]
    Status { status: u16, message: String },
}

#[derive(Debug, Clone)]
pub struct Client {
    base: String,
    http: reqwest::Client,
}

impl Client {
    /// `base_url` such as `http://127.0.0.1:8080`; a trailing slash is fine.
    pub fn new(base_url: &str) -> Self {
        Self {
            base: base_url.trim_end_matches('/').to_string(),
            http: reqwest::Client::new(),
        }
    }

    pub fn base_url(&self) -> &str {
        &self.base
    }

    /// Sends raw P5/P6 bytes to `POST /v1/classify`.
    pub async fn classify(&self, image: Vec<u8>) -> Result<ClassifyResponse, ClientError> {
        let resp = self
            .http
            .post(format!("{}/v1/classify", self.base))
            .header(reqwest::header::CONTENT_TYPE, "application/octet-stream")
            .body(image)
            .send()
            .await?;
        decode(resp).await
    }

    pub async fn health(&self) -> Result<HealthResponse, ClientError> {
        decode(
            self.http
                .get(format!("{}/v1/health", self.base))
                .send()
                .await?,
        )
        .await
    }
}

async fn decode<T: serde::de::DeserializeOwned>(resp: reqwest::Response) -> Result<T, ClientError> {
    let status = resp.status();
    if status.is_success() {
        return Ok(resp.json().await?);
    }
    let text = resp.text().await.unwrap_or_default();
    let message = match serde_json_error(&text) {
        Some(e) => e,
        None => text,
    };
    Err(ClientError::Status {
        status: status.as_u16(),
        message,
    })
}

fn serde_json_error(text: &str) -> Option<String> {
    serde_json::from_str::<ErrorResponse>(text)
        .ok()
        .map(|e| e.error)
}
