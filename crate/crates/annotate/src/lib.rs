//! Blinded annotation service for edit diffs.
//!
//! Annotators open a session, label a practice diff, then receive sample
//! diffs least-annotated first until they reach the per-session cap. Labels
//! are appended to a JSONL log; restarting the service replays it.

pub mod blind;
pub mod config;
pub mod http;
pub mod state;

use std::fs::File;
use std::io::BufReader;
use std::sync::{Arc, Mutex};

use thiserror::Error;

use sentqual_core::eval::StudySample;

pub use blind::{forbidden_keys_in, BlindedDiff};
pub use config::{Config, ConfigError};
pub use http::router;
pub use state::{Metrics, Next, Session, Study, StudyError, StudySettings, Submission};

#[derive(Debug, Error)]
pub enum ServeError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("sample {path}: {message}")]
    Sample { path: String, message: String },
    #[error(transparent)]
    Study(#[from] StudyError),
    #[error("server: {0}")]
    Io(#[from] std::io::Error),
}

pub fn load_sample(path: &std::path::Path) -> Result<StudySample, ServeError> {
    let err = |message: String| ServeError::Sample {
        path: path.display().to_string(),
        message,
    };
    let file = File::open(path).map_err(|e| err(e.to_string()))?;
    serde_json::from_reader(BufReader::new(file)).map_err(|e| err(e.to_string()))
}

/// Loads the sample, replays the log and builds the study for `config`.
pub fn open_study(config: &Config) -> Result<Study, ServeError> {
    let sample = load_sample(&config.sample)?;
    let settings = StudySettings {
        cap: config.cap,
        seed: config.seed,
        min_annotators: config.min_annotators,
        idle_timeout: config.idle_timeout,
    };
    Ok(Study::new(sample, settings).with_log(&config.log)?)
}

/// Serves until the process is stopped. `on_bound` receives the bound
/// address, which matters when the config asks for port 0.
pub fn serve(config: &Config, on_bound: impl FnOnce(std::net::SocketAddr)) -> Result<(), ServeError> {
    let study = open_study(config)?;
    let app = router(Arc::new(Mutex::new(study)));
    let runtime = tokio::runtime::Builder::new_multi_thread().enable_all().build()?;
    runtime.block_on(async {
        let listener = tokio::net::TcpListener::bind(config.listen).await?;
        on_bound(listener.local_addr()?);
        axum::serve(listener, app).await
    })?;
    Ok(())
}
