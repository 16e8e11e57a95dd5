// SPDX-License-Identifier: Apache-2.0

//! Typed client for the ifusion HTTP service.

use ifusion_core::model::{Identifier, ServiceIntent};
use ifusion_core::scenario::{ScenarioFile, ScenarioReport};
use ifusion_core::sdtn::{AbstractTopology, E2eService, LogEntry};
use ifusion_core::system::{AuditReport, FaultSpec, RunMetrics, SystemSummary};
use ifusion_core::topofile::TopologyFile;
use ifusion_core::ErrorCode;
use reqwest::{Method, Response, StatusCode};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use thiserror::Error;

pub const STATE_VERSION_HEADER: &str = "x-state-version";

#[derive(Debug, Clone, Deserialize)]
pub struct ApiErrorBody {
    pub code: ErrorCode,
    pub message: String,
    #[serde(default)]
    pub detail: Option<Value>,
}

#[derive(Debug, Error)]
pub enum ClientError {
    #[error("{status} {}: {}", .body.code.as_str(), .body.message)]
    Api { status: StatusCode, body: ApiErrorBody },
    #[error("transport: {0}")]
    Transport(#[from] reqwest::Error),
    #[error("unexpected response ({status}): {message}")]
    Decode { status: StatusCode, message: String },
}

impl ClientError {
    pub fn code(&self) -> Option<ErrorCode> {
        match self {
            ClientError::Api { body, .. } => Some(body.code),
            _ => None,
        }
    }

    pub fn status(&self) -> Option<StatusCode> {
        match self {
            ClientError::Api { status, .. } | ClientError::Decode { status, .. } => Some(*status),
            ClientError::Transport(e) => e.status(),
        }
    }
}

/// A decoded body and the state version it was served at.
#[derive(Debug, Clone)]
pub struct Versioned<T> {
    pub version: u64,
    pub value: T,
}

#[derive(Debug, Clone)]
pub struct Client {
    http: reqwest::Client,
    base: String,
}

impl Client {
    pub fn new(base: impl Into<String>) -> Self {
        Client {
            http: reqwest::Client::new(),
            base: base.into().trim_end_matches('/').to_string(),
        }
    }

    pub fn base_url(&self) -> &str {
        &self.base
    }

    async fn send(&self, method: Method, path: &str, body: Option<&(impl Serialize + ?Sized)>) -> Result<Response, ClientError> {
        let mut req = self.http.request(method, format!("{}{}", self.base, path));
        if let Some(b) = body {
            req = req.json(b);
        }
        Ok(req.send().await?)
    }

    async fn decode<T: DeserializeOwned>(resp: Response) -> Result<Versioned<T>, ClientError> {
        let status = resp.status();
        let version = resp
            .headers()
            .get(STATE_VERSION_HEADER)
            .and_then(|v| v.to_str().ok())
            .and_then(|v| v.parse().ok())
            .ok_or_else(|| ClientError::Decode {
                status,
                message: format!("missing {STATE_VERSION_HEADER} header"),
            })?;
        let bytes = resp.bytes().await?;
        if !status.is_success() {
            let body = serde_json::from_slice(&bytes).map_err(|e| ClientError::Decode {
                status,
                message: e.to_string(),
            })?;
            return Err(ClientError::Api { status, body });
        }
        let value = serde_json::from_slice(&bytes).map_err(|e| ClientError::Decode {
            status,
            message: e.to_string(),
        })?;
        Ok(Versioned { version, value })
    }

    pub async fn get<T: DeserializeOwned>(&self, path: &str) -> Result<Versioned<T>, ClientError> {
        Self::decode(self.send(Method::GET, path, None::<&Value>).await?).await
    }

    pub async fn post<B: Serialize + ?Sized, T: DeserializeOwned>(&self, path: &str, body: &B) -> Result<Versioned<T>, ClientError> {
        Self::decode(self.send(Method::POST, path, Some(body)).await?).await
    }

    pub async fn delete<T: DeserializeOwned>(&self, path: &str) -> Result<Versioned<T>, ClientError> {
        Self::decode(self.send(Method::DELETE, path, None::<&Value>).await?).await
    }

    pub async fn health(&self) -> Result<SystemSummary, ClientError> {
        Ok(self.get("/health").await?.value)
    }

    pub async fn topology(&self, level: &str, domain: Option<&str>) -> Result<Versioned<AbstractTopology>, ClientError> {
        let mut path = format!("/sdtn/topology?level={}", encode(level));
        if let Some(d) = domain {
            path.push_str(&format!("&domain={}", encode(d)));
        }
        self.get(&path).await
    }

    pub async fn provision(&self, intent: &ServiceIntent) -> Result<E2eService, ClientError> {
        Ok(self.post("/sdtn/services", intent).await?.value)
    }

    pub async fn teardown(&self, id: &Identifier) -> Result<E2eService, ClientError> {
        Ok(self.delete(&service_path(id)).await?.value)
    }

    pub async fn services(&self) -> Result<Vec<E2eService>, ClientError> {
        Ok(self.get("/sdtn/services").await?.value)
    }

    pub async fn service(&self, id: &Identifier) -> Result<E2eService, ClientError> {
        Ok(self.get(&service_path(id)).await?.value)
    }

    pub async fn service_log(&self, id: &Identifier) -> Result<Vec<LogEntry>, ClientError> {
        Ok(self.get(&format!("{}/log", service_path(id))).await?.value)
    }

    pub async fn inject(&self, fault: &FaultSpec) -> Result<(), ClientError> {
        self.post::<_, Value>("/admin/faults", fault).await.map(|_| ())
    }

    pub async fn tick(&self, ticks: u64) -> Result<u64, ClientError> {
        let v: Value = self.post("/admin/tick", &json!({ "ticks": ticks })).await?.value;
        Ok(v["clock"].as_u64().unwrap_or_default())
    }

    pub async fn load_topology(&self, file: &TopologyFile) -> Result<SystemSummary, ClientError> {
        Ok(self.post("/admin/topology", file).await?.value)
    }

    /// A failed step comes back as `STEP_FAILED` with the report attached.
    pub async fn scenario(&self, file: &ScenarioFile) -> Result<ScenarioReport, ClientError> {
        match self.post("/admin/scenario", file).await {
            Ok(v) => Ok(v.value),
            Err(ClientError::Api { status, body }) if body.code == ErrorCode::StepFailed => {
                match body.detail.clone().map(serde_json::from_value) {
                    Some(Ok(report)) => Ok(report),
                    _ => Err(ClientError::Api { status, body }),
                }
            }
            Err(e) => Err(e),
        }
    }

    pub async fn audit(&self) -> Result<AuditReport, ClientError> {
        Ok(self.get("/audit").await?.value)
    }

    pub async fn metrics(&self) -> Result<RunMetrics, ClientError> {
        Ok(self.get("/metrics").await?.value)
    }
}

fn service_path(id: &Identifier) -> String {
    format!("/sdtn/services/{}", encode(&id.render()))
}

fn encode(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for b in s.bytes() {
        match b {
            b'A'..=b'Z' | b'a'..=b'z' | b'0'..=b'9' | b'-' | b'_' | b'.' | b'~' => out.push(b as char),
            _ => out.push_str(&format!("%{b:02X}")),
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn service_ids_are_percent_encoded() {
        let id: Identifier = "sdtn/svc-1".parse().unwrap();
        assert_eq!(service_path(&id), "/sdtn/services/sdtn%2Fsvc-1");
    }
}
