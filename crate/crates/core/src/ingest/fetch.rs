//! Rate-limited page fetching for live directory scrapes.
//!
//! Not exercised against the real directory in tests; a local server and a
//! fake clock cover the contract.

use std::sync::Mutex;
use std::time::{Duration, Instant};

use serde::Serialize;
use thiserror::Error;

use super::html::PageParser;

pub const USER_AGENT: &str = concat!(
    "pantry-assistant-ingest/",
    env!("CARGO_PKG_VERSION"),
    " (directory normalization; polite crawler)"
);
pub const MAX_ATTEMPTS: u32 = 3;

#[derive(Debug, Clone, Error, PartialEq, Eq, Serialize)]
#[error("fetching {url} failed after {attempts} attempt(s): {message}")]
pub struct NetworkError {
    pub url: String,
    pub attempts: u32,
    pub message: String,
}

/// A failed single request.
#[derive(Debug, Clone)]
pub struct RequestFailure {
    pub message: String,
    pub retryable: bool,
}

pub trait PageSource {
    fn get(&self, url: &str) -> Result<String, RequestFailure>;
}

pub trait Clock {
    /// Monotonic time since an arbitrary origin.
    fn elapsed(&self) -> Duration;
    fn sleep(&self, d: Duration);
}

pub struct SystemClock {
    origin: Instant,
}

impl Default for SystemClock {
    fn default() -> Self {
        SystemClock { origin: Instant::now() }
    }
}

impl Clock for SystemClock {
    fn elapsed(&self) -> Duration {
        self.origin.elapsed()
    }

    fn sleep(&self, d: Duration) {
        std::thread::sleep(d);
    }
}

/// Clock that advances only when slept on.
#[derive(Default)]
pub struct ManualClock {
    now: Mutex<Duration>,
}

impl Clock for ManualClock {
    fn elapsed(&self) -> Duration {
        *self.now.lock().unwrap()
    }

    fn sleep(&self, d: Duration) {
        *self.now.lock().unwrap() += d;
    }
}

pub struct HttpPageSource {
    client: reqwest::blocking::Client,
}

impl HttpPageSource {
    pub fn new(timeout: Duration) -> Result<Self, reqwest::Error> {
        let client = reqwest::blocking::Client::builder()
            .user_agent(USER_AGENT)
            .timeout(timeout)
            .build()?;
        Ok(HttpPageSource { client })
    }
}

impl PageSource for HttpPageSource {
    fn get(&self, url: &str) -> Result<String, RequestFailure> {
        let resp = self.client.get(url).send().map_err(|e| RequestFailure {
            message: e.to_string(),
            retryable: true,
        })?;
        let status = resp.status();
        if !status.is_success() {
            return Err(RequestFailure {
                message: format!("HTTP {status}"),
                retryable: status.is_server_error() || status.as_u16() == 429 || status.as_u16() == 408,
            });
        }
        resp.text().map_err(|e| RequestFailure {
            message: e.to_string(),
            retryable: true,
        })
    }
}

#[derive(Debug, Default, Serialize)]
pub struct FetchOutcome {
    pub pages: Vec<(String, String)>,
    pub errors: Vec<NetworkError>,
}

pub struct Fetcher<S, C> {
    source: S,
    clock: C,
    min_gap: Duration,
    base_backoff: Duration,
    last_request: Option<Duration>,
}

impl<S: PageSource, C: Clock> Fetcher<S, C> {
    /// `rate_limit` is in requests per minute and must be at least 1.
    pub fn new(source: S, clock: C, rate_limit: u32) -> Option<Self> {
        if rate_limit == 0 {
            return None;
        }
        Some(Fetcher {
            source,
            clock,
            min_gap: Duration::from_secs_f64(60.0 / f64::from(rate_limit)),
            base_backoff: Duration::from_secs(1),
            last_request: None,
        })
    }

    pub fn with_backoff(mut self, base: Duration) -> Self {
        self.base_backoff = base;
        self
    }

    pub fn clock(&self) -> &C {
        &self.clock
    }

    fn wait_for_slot(&mut self) {
        if let Some(last) = self.last_request {
            let since = self.clock.elapsed().saturating_sub(last);
            if since < self.min_gap {
                self.clock.sleep(self.min_gap - since);
            }
        }
        self.last_request = Some(self.clock.elapsed());
    }

    /// One page with up to [`MAX_ATTEMPTS`] tries and exponential backoff.
    /// Every attempt counts against the rate limit.
    pub fn fetch(&mut self, url: &str) -> Result<String, NetworkError> {
        let mut attempt = 0;
        loop {
            attempt += 1;
            self.wait_for_slot();
            match self.source.get(url) {
                Ok(body) => return Ok(body),
                Err(f) if f.retryable && attempt < MAX_ATTEMPTS => {
                    log::debug!("retrying {url} after attempt {attempt}: {}", f.message);
                    self.clock.sleep(self.base_backoff * 2u32.pow(attempt - 1));
                }
                Err(f) => {
                    return Err(NetworkError {
                        url: url.to_string(),
                        attempts: attempt,
                        message: f.message,
                    })
                }
            }
        }
    }

    pub fn fetch_all(&mut self, urls: &[String]) -> FetchOutcome {
        let mut out = FetchOutcome::default();
        for url in urls {
            match self.fetch(url) {
                Ok(html) => out.pages.push((url.clone(), html)),
                Err(e) => out.errors.push(e),
            }
        }
        out
    }

    /// Fetches the listing page at `source_url`, then every detail page it
    /// links to, in listing order.
    pub fn crawl(&mut self, source_url: &str, parser: &PageParser) -> FetchOutcome {
        match self.fetch(source_url) {
            Ok(listing) => {
                let links = parser.extract_links(&listing, source_url);
                self.fetch_all(&links)
            }
            Err(e) => FetchOutcome {
                pages: Vec::new(),
                errors: vec![e],
            },
        }
    }
}

/// Live scrape with the real HTTP client and wall clock.
pub fn fetch_live(source_url: &str, rate_limit: u32) -> Result<FetchOutcome, NetworkError> {
    let bad = |message: String| NetworkError {
        url: source_url.to_string(),
        attempts: 0,
        message,
    };
    let source = HttpPageSource::new(Duration::from_secs(30)).map_err(|e| bad(e.to_string()))?;
    let mut fetcher = Fetcher::new(source, SystemClock::default(), rate_limit)
        .ok_or_else(|| bad("rate limit must be at least 1 request per minute".into()))?;
    Ok(fetcher.crawl(source_url, &PageParser::default()))
}
