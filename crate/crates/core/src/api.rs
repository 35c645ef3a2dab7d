//! JSON bodies exchanged by the service and its client.

use serde::{Deserialize, Serialize};

use crate::classifier::{label_name, ClassificationResult, ALL, HEALTHY};
use crate::container::crc32;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Residuals {
    pub healthy: f64,
    #[serde(rename = "ALL")]
    pub all: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassifyResponse {
    /// `"healthy"` or `"ALL"`.
    pub label: String,
    pub residuals: Residuals,
    pub margin: f64,
    pub model_id: String,
}

impl ClassifyResponse {
    /// Assumes the binary label set `{0, 1}` in `class_labels` order.
    pub fn from_result(
        result: &ClassificationResult,
        class_labels: &[u32],
        model_id: &str,
    ) -> Self {
        let residual = |label: u32| {
            class_labels
                .iter()
                .position(|&l| l == label)
                .map_or(f64::NAN, |i| result.residuals[i])
        };
        Self {
            label: label_name(result.label).to_string(),
            residuals: Residuals {
                healthy: residual(HEALTHY),
                all: residual(ALL),
            },
            margin: result.margin,
            model_id: model_id.to_string(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HealthResponse {
    pub status: String,
    pub model_id: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ErrorResponse {
    pub error: String,
}

/// Hex CRC32 of the model file bytes.
pub fn model_id(model_bytes: &[u8]) -> String {
    format!("{:08x}", crc32(model_bytes))
}
