//! HTTP transport for the live oracle and client selection from the
//! environment.

use std::sync::Mutex;
use std::time::Duration;

use anyhow::{bail, Context};
use contactfit::retrieval::{OracleClient, OracleRequest, OracleTransport};
use serde::Deserialize;

pub const MODE_VAR: &str = "CONTACTFIT_ORACLE_MODE";
pub const ENDPOINT_VAR: &str = "CONTACTFIT_ORACLE_ENDPOINT";

#[derive(Deserialize)]
struct Reply {
    answer: String,
}

/// POSTs each request as JSON and expects `{"answer": "..."}` back.
/// Requests to one endpoint are sent one at a time.
pub struct HttpTransport {
    endpoint: String,
    agent: ureq::Agent,
    lock: Mutex<()>,
}

impl HttpTransport {
    pub fn new(endpoint: impl Into<String>, timeout: Duration) -> Self {
        let agent = ureq::Agent::config_builder()
            .timeout_global(Some(timeout))
            .build()
            .into();
        Self {
            endpoint: endpoint.into(),
            agent,
            lock: Mutex::new(()),
        }
    }
}

impl OracleTransport for HttpTransport {
    fn ask(&self, request: &OracleRequest) -> Result<String, String> {
        let _guard = self.lock.lock().unwrap_or_else(|e| e.into_inner());
        let body = serde_json::to_string(request).map_err(|e| e.to_string())?;
        let mut response = self
            .agent
            .post(&self.endpoint)
            .header("Content-Type", "application/json")
            .send(body)
            .map_err(|e| e.to_string())?;
        let text = response.body_mut().read_to_string().map_err(|e| e.to_string())?;
        let reply: Reply = serde_json::from_str(&text).map_err(|e| format!("bad oracle reply: {e}"))?;
        Ok(reply.answer)
    }
}

/// Canned mode reads `canned` (or fails without it); live mode needs an
/// endpoint. The mode defaults to canned.
pub fn client_from_env(canned: Option<&std::path::Path>) -> anyhow::Result<OracleClient> {
    let mode = std::env::var(MODE_VAR).unwrap_or_else(|_| "canned".into());
    match mode.as_str() {
        "canned" => {
            let path = canned.context("canned oracle mode needs --oracle-file")?;
            Ok(OracleClient::canned_from_file(path)?)
        }
        "live" => {
            let endpoint =
                std::env::var(ENDPOINT_VAR).with_context(|| format!("live oracle mode needs {ENDPOINT_VAR}"))?;
            Ok(OracleClient::live(HttpTransport::new(
                endpoint,
                Duration::from_secs(60),
            )))
        }
        other => bail!("{MODE_VAR} must be canned or live, not {other:?}"),
    }
}
