//! Minimal MediaWiki action-API client for pulling page histories.

use std::sync::Mutex;
use std::thread;
use std::time::{Duration, Instant};

use serde::Deserialize;

use crate::error::FetchError;
use crate::revision::{sha1_hex, timestamp_format, Revision};
use crate::store::Store;

#[derive(Debug, Clone)]
pub struct FetchConfig {
    /// Minimum spacing between consecutive requests.
    pub min_interval: Duration,
    /// Retries after the first failed attempt (5xx, 429, transport errors).
    pub max_retries: u32,
    /// First backoff delay; doubles each retry.
    pub backoff: Duration,
    pub timeout: Duration,
    pub user_agent: String,
}

impl Default for FetchConfig {
    fn default() -> Self {
        FetchConfig {
            min_interval: Duration::from_millis(500),
            max_retries: 4,
            backoff: Duration::from_secs(1),
            timeout: Duration::from_secs(60),
            user_agent: concat!("sentqual/", env!("CARGO_PKG_VERSION"), " (research tooling)").to_string(),
        }
    }
}

#[derive(Debug, Default)]
pub struct FetchReport {
    pub fetched: usize,
    /// Newly stored revisions (re-fetched ones are deduplicated by id).
    pub stored: usize,
    pub errors: Vec<(String, FetchError)>,
}

pub struct WikiClient {
    api: String,
    http: reqwest::blocking::Client,
    config: FetchConfig,
    last_request: Mutex<Option<Instant>>,
}

#[derive(Deserialize)]
struct ApiResponse {
    #[serde(default)]
    query: Option<ApiQuery>,
    #[serde(rename = "continue", default)]
    cont: Option<ApiContinue>,
    #[serde(default)]
    error: Option<serde_json::Value>,
}

#[derive(Deserialize)]
struct ApiContinue {
    rvcontinue: Option<String>,
}

#[derive(Deserialize)]
struct ApiQuery {
    #[serde(default)]
    pages: Vec<ApiPage>,
}

#[derive(Deserialize)]
struct ApiPage {
    #[serde(default)]
    pageid: Option<u64>,
    title: String,
    #[serde(default)]
    missing: bool,
    #[serde(default)]
    invalid: bool,
    #[serde(default)]
    revisions: Vec<ApiRevision>,
}

#[derive(Deserialize)]
struct ApiRevision {
    revid: u64,
    #[serde(default)]
    parentid: Option<u64>,
    timestamp: String,
    #[serde(default)]
    comment: String,
    #[serde(default)]
    sha1: Option<String>,
    #[serde(default)]
    slots: Option<ApiSlots>,
}

#[derive(Deserialize)]
struct ApiSlots {
    main: ApiSlot,
}

#[derive(Deserialize)]
struct ApiSlot {
    #[serde(default)]
    content: Option<String>,
}

impl WikiClient {
    /// `api` is the full `api.php` endpoint URL.
    pub fn new(api: impl Into<String>, config: FetchConfig) -> Result<WikiClient, FetchError> {
        let api = api.into();
        let http = reqwest::blocking::Client::builder()
            .user_agent(config.user_agent.clone())
            .timeout(config.timeout)
            .build()
            .map_err(|e| FetchError::Transport {
                url: api.clone(),
                message: e.to_string(),
            })?;
        Ok(WikiClient {
            api,
            http,
            config,
            last_request: Mutex::new(None),
        })
    }

    fn throttle(&self) {
        let mut last = self.last_request.lock().unwrap();
        if let Some(prev) = *last {
            let elapsed = prev.elapsed();
            if elapsed < self.config.min_interval {
                thread::sleep(self.config.min_interval - elapsed);
            }
        }
        *last = Some(Instant::now());
    }

    fn get(&self, params: &[(&str, String)]) -> Result<ApiResponse, FetchError> {
        let mut attempt = 0;
        loop {
            self.throttle();
            let result = self.http.get(&self.api).query(params).send();
            let retryable = match result {
                Ok(resp) => {
                    let status = resp.status();
                    if status.is_success() {
                        let body = resp.text().map_err(|e| FetchError::Transport {
                            url: self.api.clone(),
                            message: e.to_string(),
                        })?;
                        return serde_json::from_str(&body).map_err(|e| FetchError::Decode(e.to_string()));
                    }
                    let err = FetchError::Status {
                        status: status.as_u16(),
                        url: self.api.clone(),
                    };
                    if !(status.is_server_error() || status.as_u16() == 429) {
                        return Err(err);
                    }
                    err
                }
                Err(e) => FetchError::Transport {
                    url: self.api.clone(),
                    message: e.to_string(),
                },
            };
            if attempt >= self.config.max_retries {
                return Err(retryable);
            }
            log::warn!("request failed ({retryable}), retry {}", attempt + 1);
            thread::sleep(self.config.backoff * 2u32.saturating_pow(attempt));
            attempt += 1;
        }
    }

    /// Up to `limit` revisions of one page, oldest first.
    pub fn page_revisions(&self, title: &str, limit: usize) -> Result<Vec<Revision>, FetchError> {
        let mut out = Vec::new();
        let mut cont: Option<String> = None;
        while out.len() < limit {
            let batch = (limit - out.len()).min(50);
            let mut params = vec![
                ("action", "query".to_string()),
                ("format", "json".to_string()),
                ("formatversion", "2".to_string()),
                ("prop", "revisions".to_string()),
                ("titles", title.to_string()),
                ("rvprop", "ids|timestamp|comment|sha1|content".to_string()),
                ("rvslots", "main".to_string()),
                ("rvdir", "newer".to_string()),
                ("rvlimit", batch.to_string()),
            ];
            if let Some(c) = &cont {
                params.push(("rvcontinue", c.clone()));
            }
            let resp = self.get(&params)?;
            if let Some(err) = resp.error {
                return Err(FetchError::Decode(err.to_string()));
            }
            let page = resp
                .query
                .and_then(|q| q.pages.into_iter().next())
                .ok_or_else(|| FetchError::Decode("response lacks query.pages".into()))?;
            if page.missing || page.invalid {
                return Err(FetchError::UnknownTitle { title: title.to_string() });
            }
            let page_id = page
                .pageid
                .ok_or_else(|| FetchError::Decode("page without pageid".into()))?;
            for api_rev in page.revisions {
                let Some(text) = api_rev.slots.and_then(|s| s.main.content) else {
                    continue;
                };
                let timestamp = timestamp_format::parse(&api_rev.timestamp)
                    .map_err(|e| FetchError::Decode(format!("timestamp {:?}: {e}", api_rev.timestamp)))?;
                let digest = sha1_hex(&text);
                if api_rev.sha1.as_deref().is_some_and(|s| s != digest) {
                    log::warn!("revision {} sha1 disagrees with content", api_rev.revid);
                }
                out.push(Revision {
                    rev_id: api_rev.revid,
                    page_id,
                    parent_id: api_rev.parentid.filter(|&p| p != 0),
                    timestamp,
                    comment: api_rev.comment,
                    sha1: digest,
                    text,
                    page_title: page.title.clone(),
                    quality_class: None,
                });
                if out.len() >= limit {
                    break;
                }
            }
            cont = resp.cont.and_then(|c| c.rvcontinue);
            if cont.is_none() {
                break;
            }
        }
        Ok(out)
    }

    /// Fetches each title and persists its revisions. Per-title failures are
    /// collected and the remaining titles are still fetched.
    pub fn fetch_revisions<S: AsRef<str>>(&self, titles: &[S], limit_per_page: usize, store: &Store) -> FetchReport {
        let mut report = FetchReport::default();
        for title in titles {
            let title = title.as_ref();
            match self.page_revisions(title, limit_per_page) {
                Ok(revs) => {
                    report.fetched += revs.len();
                    match store.put_all(&revs) {
                        Ok(n) => report.stored += n,
                        Err(e) => report.errors.push((title.to_string(), e.into())),
                    }
                }
                Err(e) => report.errors.push((title.to_string(), e)),
            }
        }
        report
    }
}
