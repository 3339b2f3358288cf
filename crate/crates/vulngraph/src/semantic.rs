//! Per-sample semantic embeddings `h_L` from a local code model.
//!
//! Three backends sit behind [`Provider`]:
//!
//! * `stub`: hashed bag-of-tokens random projection. Deterministic, hermetic,
//!   and **not semantic**. It carries lexical signal only and exists for tests
//!   and offline demos.
//! * `file:<path>`: lookup by sample id in an [`EmbeddingCache`] file.
//! * `http://host:port`: a local server speaking
//!   `POST /embed {model, input} -> {embedding}` and
//!   `POST /generate {model, prompt, max_tokens, temperature} -> {text}`.
//!
//! The `VULNGRAPH_ENDPOINT` environment variable overrides the configured
//! endpoint.

use std::collections::HashMap;
use std::path::PathBuf;
use std::sync::{OnceLock, RwLock};
use std::time::Duration;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use regex::Regex;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::cache::EmbeddingCache;
use crate::encoders::label_tokens;
use crate::error::{Error, Result};

pub const ENDPOINT_ENV: &str = "VULNGRAPH_ENDPOINT";

/// Code models under 4B parameters that the toolkit is meant to sit behind.
pub const LIGHTWEIGHT_MODELS: [&str; 4] = [
    "Qwen2.5-Coder-3B",
    "DeepSeek-Coder-1.3B",
    "Stable-Code-3B",
    "Phi-3.5-Mini",
];

pub const STUB_MODEL: &str = "stub-hash-v1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ProviderConfig {
    /// `stub`, `file:<path>` or an `http://` base URL.
    pub endpoint: String,
    pub model_name: String,
    pub timeout_secs: u64,
    pub retries: u32,
    /// Code is cut to this many characters before it is sent.
    pub max_chars: usize,
    /// Output width of the stub backend.
    pub stub_dims: usize,
    /// Upper bound on concurrent provider calls.
    pub max_concurrent: usize,
}

impl Default for ProviderConfig {
    fn default() -> Self {
        Self {
            endpoint: "stub".into(),
            model_name: STUB_MODEL.into(),
            timeout_secs: 60,
            retries: 2,
            max_chars: 8000,
            stub_dims: 256,
            max_concurrent: 4,
        }
    }
}

impl ProviderConfig {
    /// Applies the endpoint environment override, if set.
    pub fn with_env_override(mut self) -> Self {
        if let Ok(ep) = std::env::var(ENDPOINT_ENV) {
            if !ep.trim().is_empty() {
                self.endpoint = ep.trim().to_string();
            }
        }
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SemanticEmbedding {
    pub sample_id: String,
    pub vector: Vec<f64>,
    pub model_name: String,
    pub d_l: usize,
}

pub trait Provider: Send + Sync {
    fn model_name(&self) -> &str;

    /// Raw embedding for `code`. `sample_id` is used by lookup backends.
    fn embed_raw(&self, code: &str, sample_id: &str) -> Result<Vec<f64>>;

    fn generate(&self, prompt: &str, max_tokens: usize, temperature: f64) -> Result<String>;

    /// False for backends whose vectors carry no learned semantics.
    fn is_semantic(&self) -> bool {
        true
    }
}

#[derive(Debug, Clone)]
pub struct StubProvider {
    pub dims: usize,
}

impl StubProvider {
    fn token_vector(&self, token: &str) -> Vec<f64> {
        let digest = Sha256::new()
            .chain_update(STUB_MODEL.as_bytes())
            .chain_update([0u8])
            .chain_update(token.as_bytes())
            .finalize();
        let seed = u64::from_le_bytes(digest[..8].try_into().expect("8 bytes"));
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..self.dims)
            .map(|_| StandardNormal.sample(&mut rng))
            .collect()
    }
}

impl Provider for StubProvider {
    fn model_name(&self) -> &str {
        STUB_MODEL
    }

    fn embed_raw(&self, code: &str, _sample_id: &str) -> Result<Vec<f64>> {
        let mut counts: HashMap<String, f64> = HashMap::new();
        for t in label_tokens(code) {
            *counts.entry(t).or_default() += 1.0;
        }
        let mut keys: Vec<_> = counts.into_iter().collect();
        keys.sort_by(|a, b| a.0.cmp(&b.0));
        let mut out = vec![0.0; self.dims];
        for (tok, c) in keys {
            // sublinear weighting keeps boilerplate from dominating
            let w = 1.0 + c.ln();
            for (o, v) in out.iter_mut().zip(self.token_vector(&tok)) {
                *o += w * v;
            }
        }
        Ok(out)
    }

    fn generate(&self, _prompt: &str, _max_tokens: usize, _temperature: f64) -> Result<String> {
        Err(Error::ProviderUnavailable {
            reason: "the stub backend cannot generate text".into(),
            sample_id: None,
        })
    }

    fn is_semantic(&self) -> bool {
        false
    }
}

#[derive(Debug, Clone)]
pub struct FileProvider {
    pub path: PathBuf,
    pub cache: EmbeddingCache,
    pub model: String,
}

impl Provider for FileProvider {
    fn model_name(&self) -> &str {
        &self.model
    }

    fn embed_raw(&self, _code: &str, sample_id: &str) -> Result<Vec<f64>> {
        self.cache
            .get(sample_id)
            .map(<[f64]>::to_vec)
            .ok_or_else(|| Error::MissingEmbedding(sample_id.to_string()))
    }

    fn generate(&self, _prompt: &str, _max_tokens: usize, _temperature: f64) -> Result<String> {
        Err(Error::ProviderUnavailable {
            reason: format!(
                "embedding file {} cannot generate text",
                self.path.display()
            ),
            sample_id: None,
        })
    }
}

pub struct HttpProvider {
    pub base_url: String,
    pub model: String,
    pub retries: u32,
    agent: ureq::Agent,
}

#[derive(Serialize)]
struct EmbedRequest<'a> {
    model: &'a str,
    input: &'a str,
}

#[derive(Deserialize)]
struct EmbedResponse {
    embedding: Vec<f64>,
}

#[derive(Serialize)]
struct GenerateRequest<'a> {
    model: &'a str,
    prompt: &'a str,
    max_tokens: usize,
    temperature: f64,
}

#[derive(Deserialize)]
struct GenerateResponse {
    text: String,
}

impl HttpProvider {
    pub fn new(base_url: &str, model: &str, timeout: Duration, retries: u32) -> Self {
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(timeout))
            .build()
            .into();
        Self {
            base_url: base_url.trim_end_matches('/').to_string(),
            model: model.to_string(),
            retries,
            agent,
        }
    }

    fn post<B: Serialize, R: serde::de::DeserializeOwned>(
        &self,
        route: &str,
        body: &B,
        sample_id: Option<&str>,
    ) -> Result<R> {
        let url = format!("{}/{route}", self.base_url);
        let mut last = String::new();
        for attempt in 0..=self.retries {
            match self.agent.post(&url).send_json(body) {
                Ok(mut resp) => {
                    return resp.body_mut().read_json::<R>().map_err(|e| {
                        Error::ProviderUnavailable {
                            reason: format!("bad response from {url}: {e}"),
                            sample_id: sample_id.map(str::to_string),
                        }
                    })
                }
                Err(e) => {
                    log::warn!("POST {url} failed (attempt {}): {e}", attempt + 1);
                    last = e.to_string();
                }
            }
        }
        Err(Error::ProviderUnavailable {
            reason: format!("POST {url}: {last}"),
            sample_id: sample_id.map(str::to_string),
        })
    }
}

impl Provider for HttpProvider {
    fn model_name(&self) -> &str {
        &self.model
    }

    fn embed_raw(&self, code: &str, sample_id: &str) -> Result<Vec<f64>> {
        let body = EmbedRequest {
            model: &self.model,
            input: code,
        };
        let resp: EmbedResponse = self.post("embed", &body, Some(sample_id))?;
        Ok(resp.embedding)
    }

    fn generate(&self, prompt: &str, max_tokens: usize, temperature: f64) -> Result<String> {
        let body = GenerateRequest {
            model: &self.model,
            prompt,
            max_tokens,
            temperature,
        };
        let resp: GenerateResponse = self.post("generate", &body, None)?;
        Ok(resp.text)
    }
}

/// Builds the backend named by `cfg.endpoint`.
pub fn build_provider(cfg: &ProviderConfig) -> Result<Box<dyn Provider>> {
    let ep = cfg.endpoint.trim();
    if ep == "stub" {
        if cfg.stub_dims == 0 {
            return Err(Error::Config("stub_dims must be positive".into()));
        }
        return Ok(Box::new(StubProvider {
            dims: cfg.stub_dims,
        }));
    }
    if let Some(path) = ep.strip_prefix("file:") {
        let path = PathBuf::from(path);
        let cache = EmbeddingCache::read(&path)?;
        return Ok(Box::new(FileProvider {
            path,
            cache,
            model: cfg.model_name.clone(),
        }));
    }
    if ep.starts_with("http://") || ep.starts_with("https://") {
        return Ok(Box::new(HttpProvider::new(
            ep,
            &cfg.model_name,
            Duration::from_secs(cfg.timeout_secs),
            cfg.retries,
        )));
    }
    Err(Error::Config(format!("unrecognized endpoint {ep:?}")))
}

/// First `max_chars` characters of `code`.
pub fn head_truncate(code: &str, max_chars: usize) -> &str {
    match code.char_indices().nth(max_chars) {
        Some((i, _)) => &code[..i],
        None => code,
    }
}

/// Caching front end over a [`Provider`]. Reads are concurrent; inserts are
/// serialized by the lock.
pub struct Embedder {
    provider: Box<dyn Provider>,
    max_chars: usize,
    cache: RwLock<EmbeddingCache>,
}

impl Embedder {
    pub fn new(provider: Box<dyn Provider>, max_chars: usize) -> Self {
        Self {
            provider,
            max_chars,
            cache: RwLock::new(EmbeddingCache::new()),
        }
    }

    pub fn from_config(cfg: &ProviderConfig) -> Result<Self> {
        Ok(Self::new(build_provider(cfg)?, cfg.max_chars))
    }

    /// Pre-populates the in-memory cache so covered samples never hit the backend.
    pub fn with_cache(self, cache: EmbeddingCache) -> Self {
        *self.cache.write().expect("cache lock") = cache;
        self
    }

    pub fn provider(&self) -> &dyn Provider {
        self.provider.as_ref()
    }

    pub fn model_name(&self) -> &str {
        self.provider.model_name()
    }

    pub fn d_l(&self) -> Option<usize> {
        self.cache.read().expect("cache lock").dims()
    }

    pub fn snapshot(&self) -> EmbeddingCache {
        self.cache.read().expect("cache lock").clone()
    }

    pub fn embed(&self, code: &str, sample_id: &str) -> Result<SemanticEmbedding> {
        if code.trim().is_empty() {
            return Err(Error::Config(format!("empty code for sample {sample_id}")));
        }
        if let Some(v) = self.cache.read().expect("cache lock").get(sample_id) {
            return Ok(self.wrap(sample_id, v.to_vec()));
        }
        let vector = self
            .provider
            .embed_raw(head_truncate(code, self.max_chars), sample_id)?;
        if let Some(bad) = vector.iter().find(|v| !v.is_finite()) {
            return Err(Error::ProviderUnavailable {
                reason: format!("non-finite value {bad} in embedding"),
                sample_id: Some(sample_id.to_string()),
            });
        }
        let mut cache = self.cache.write().expect("cache lock");
        if let Some(v) = cache.get(sample_id) {
            return Ok(self.wrap(sample_id, v.to_vec()));
        }
        cache.insert(sample_id, vector.clone())?;
        Ok(self.wrap(sample_id, vector))
    }

    fn wrap(&self, sample_id: &str, vector: Vec<f64>) -> SemanticEmbedding {
        SemanticEmbedding {
            sample_id: sample_id.to_string(),
            d_l: vector.len(),
            vector,
            model_name: self.model_name().to_string(),
        }
    }
}

/// L2 normalization with the same zero-vector convention as the tensor op.
pub fn l2_normalized(v: &[f64]) -> Vec<f64> {
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    let d = norm.max(crate::tensor::NORM_EPS);
    v.iter().map(|x| x / d).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Safe,
    Vulnerable,
}

impl Verdict {
    pub fn label(self) -> u8 {
        match self {
            Verdict::Safe => 0,
            Verdict::Vulnerable => 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ZeroShotResult {
    /// `None` when the reply names neither class.
    pub label: Option<Verdict>,
    pub raw: String,
}

pub fn zero_shot_prompt(code: &str) -> String {
    format!(
        "Is the following Java code safe or vulnerable? Answer with one word: safe or vulnerable.\n\n{code}\n"
    )
}

/// First case-insensitive whole-word "vulnerable" or "safe" in `reply`.
pub fn parse_verdict(reply: &str) -> Option<Verdict> {
    static RE: OnceLock<Regex> = OnceLock::new();
    let re =
        RE.get_or_init(|| Regex::new(r"(?i)\b(vulnerable|safe)\b").expect("valid verdict regex"));
    re.find(reply).map(|m| {
        if m.as_str().eq_ignore_ascii_case("safe") {
            Verdict::Safe
        } else {
            Verdict::Vulnerable
        }
    })
}

pub fn zero_shot_classify(
    code: &str,
    provider: &dyn Provider,
    max_chars: usize,
) -> Result<ZeroShotResult> {
    let prompt = zero_shot_prompt(head_truncate(code, max_chars));
    let raw = provider.generate(&prompt, 16, 0.0)?;
    Ok(ZeroShotResult {
        label: parse_verdict(&raw),
        raw,
    })
}

/// Accuracy bookkeeping for zero-shot runs. Abstentions are excluded from
/// the accuracy denominator and counted separately.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct ZeroShotTally {
    pub correct: usize,
    pub answered: usize,
    pub abstentions: usize,
}

impl ZeroShotTally {
    pub fn record(&mut self, result: &ZeroShotResult, truth: u8) {
        match result.label {
            Some(v) => {
                self.answered += 1;
                if v.label() == truth {
                    self.correct += 1;
                }
            }
            None => self.abstentions += 1,
        }
    }

    pub fn accuracy(&self) -> f64 {
        if self.answered == 0 {
            0.0
        } else {
            self.correct as f64 / self.answered as f64
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stub_is_deterministic() {
        let e = Embedder::new(Box::new(StubProvider { dims: 32 }), 1000);
        let a = e.embed("int f(){}", "a").unwrap();
        let fresh = Embedder::new(Box::new(StubProvider { dims: 32 }), 1000);
        let b = fresh.embed("int f(){}", "a").unwrap();
        assert_eq!(a, b);
        assert_eq!(a.d_l, 32);
        assert!(!e.provider().is_semantic());
    }

    #[test]
    fn file_provider_returns_stored_vector() {
        let mut cache = EmbeddingCache::new();
        cache.insert("s1", vec![1.0, 2.0]).unwrap();
        cache.insert("s2", vec![3.0, 4.0]).unwrap();
        cache.insert("s3", vec![5.0, 6.0]).unwrap();
        let p = FileProvider {
            path: "mem".into(),
            cache,
            model: "m".into(),
        };
        assert_eq!(p.embed_raw("", "s2").unwrap(), vec![3.0, 4.0]);
        assert!(matches!(
            p.embed_raw("", "zz"),
            Err(Error::MissingEmbedding(_))
        ));
    }

    struct Sized(usize);

    impl Provider for Sized {
        fn model_name(&self) -> &str {
            "sized"
        }
        fn embed_raw(&self, code: &str, _: &str) -> Result<Vec<f64>> {
            Ok(vec![1.0; self.0 + code.len() % 2])
        }
        fn generate(&self, _: &str, _: usize, _: f64) -> Result<String> {
            Ok("This is safe. Really.".into())
        }
    }

    #[test]
    fn width_fixed_by_first_call() {
        let e = Embedder::new(Box::new(Sized(4)), 100);
        e.embed("ab", "x").unwrap();
        assert_eq!(e.d_l(), Some(4));
        assert!(matches!(
            e.embed("abc", "y"),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn normalized_norm_is_one() {
        let v = l2_normalized(&[3.0, 4.0]);
        assert!((v[0].hypot(v[1]) - 1.0).abs() < 1e-9);
        assert_eq!(l2_normalized(&[0.0, 0.0]), vec![0.0, 0.0]);
    }

    #[test]
    fn verdict_parse_rule() {
        assert_eq!(
            parse_verdict("VULNERABLE: SQL concat"),
            Some(Verdict::Vulnerable)
        );
        assert_eq!(parse_verdict("This is safe."), Some(Verdict::Safe));
        assert_eq!(parse_verdict("cannot determine"), None);
        assert_eq!(parse_verdict("unsafe"), None);
    }

    #[test]
    fn zero_shot_and_tally() {
        let r = zero_shot_classify("class A {}", &Sized(1), 100).unwrap();
        assert_eq!(r.label, Some(Verdict::Safe));
        let mut t = ZeroShotTally::default();
        t.record(&r, 0);
        t.record(
            &ZeroShotResult {
                label: None,
                raw: String::new(),
            },
            1,
        );
        assert_eq!((t.correct, t.answered, t.abstentions), (1, 1, 1));
        assert_eq!(t.accuracy(), 1.0);
    }

    #[test]
    fn truncation_counts_chars() {
        assert_eq!(head_truncate("héllo", 2), "hé");
        assert_eq!(head_truncate("hi", 10), "hi");
    }

    #[test]
    fn unknown_endpoint_is_config_error() {
        let cfg = ProviderConfig {
            endpoint: "ftp://x".into(),
            ..Default::default()
        };
        assert!(matches!(build_provider(&cfg), Err(Error::Config(_))));
    }
}
