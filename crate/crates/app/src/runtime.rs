//! Assembles providers and a [`Pipeline`] from a [`PipelineConfig`].

use std::collections::BTreeMap;
use std::sync::Arc;

use factcheck_core::evidence::{RankOptions, SearchOptions};
use factcheck_core::providers::{
    Embedder, Generator, NliPair, NliPrediction, NliProvider, ProviderError, SearchProvider,
};
use factcheck_core::questiongen::Backend;
use factcheck_core::verification::{Pipeline, PipelineSettings, StanceOptions};

use crate::cache::{CacheMode, CachedEmbedder, CachedGenerator, CachedNli, CachedSearch, ResponseCache};
use crate::config::PipelineConfig;
use crate::error::AppError;
use crate::http::{client, HttpEmbedder, HttpGenerator, HttpNli, HttpSearch};

/// Raw provider clients, before caching.
#[derive(Clone, Default)]
pub struct Providers {
    pub generators: BTreeMap<String, Arc<dyn Generator>>,
    pub search: Vec<Arc<dyn SearchProvider>>,
    pub embedder: Option<Arc<dyn Embedder>>,
    pub nli: Option<Arc<dyn NliProvider>>,
}

impl Providers {
    /// HTTP clients for everything the config names.
    pub fn http(config: &PipelineConfig) -> Result<Self, AppError> {
        let c = client();
        let mut p = Self::default();
        for b in &config.backends {
            p.generators
                .insert(b.id.clone(), Arc::new(HttpGenerator::new(&b.id, &b.endpoint, c.clone())));
        }
        for s in &config.search {
            p.search.push(Arc::new(HttpSearch::from_config(s, c.clone())?));
        }
        if let Some(e) = &config.embedder {
            p.embedder = Some(Arc::new(HttpEmbedder::from_config(e, c.clone())?));
        }
        if let Some(n) = &config.nli {
            p.nli = Some(Arc::new(HttpNli::from_config(n, c.clone())?));
        }
        Ok(p)
    }

    /// Wraps every client in the response cache.
    pub fn cached(self, cache: &Arc<ResponseCache>) -> Self {
        Self {
            generators: self
                .generators
                .into_iter()
                .map(|(k, g)| (k, Arc::new(CachedGenerator::new(g, cache.clone())) as Arc<dyn Generator>))
                .collect(),
            search: self
                .search
                .into_iter()
                .map(|s| Arc::new(CachedSearch::new(s, cache.clone())) as Arc<dyn SearchProvider>)
                .collect(),
            embedder: self
                .embedder
                .map(|e| Arc::new(CachedEmbedder::new(e, cache.clone())) as Arc<dyn Embedder>),
            nli: self.nli.map(|n| Arc::new(CachedNli::new(n, cache.clone())) as Arc<dyn NliProvider>),
        }
    }
}

/// Command-line overrides layered on top of the config file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub cache_mode: Option<CacheMode>,
    pub top_k: Option<usize>,
    /// Restrict search to these provider names.
    pub providers: Option<Vec<String>>,
    pub blocklist: Option<std::path::PathBuf>,
}

impl Overrides {
    pub fn apply(&self, config: &mut PipelineConfig) -> Result<(), AppError> {
        if let Some(m) = self.cache_mode {
            config.cache.mode = m;
        }
        if let Some(k) = self.top_k {
            config.top_k = k;
        }
        if let Some(names) = &self.providers {
            for n in names {
                if !config.search.iter().any(|s| &s.name == n) {
                    return Err(AppError::validation(format!("unknown search provider {n:?}")));
                }
            }
            config.search.retain(|s| names.contains(&s.name));
        }
        if let Some(b) = &self.blocklist {
            config.blocklist = Some(b.clone());
        }
        config.validate()
    }
}

/// Everything needed to serve requests or run benchmarks.
pub struct Runtime {
    pub config: PipelineConfig,
    pub cache: Arc<ResponseCache>,
    pub pipeline: Arc<Pipeline>,
}

impl Runtime {
    /// Uses HTTP clients for all configured providers.
    pub fn from_config(config: PipelineConfig) -> Result<Self, AppError> {
        let providers = Providers::http(&config)?;
        Self::with_providers(config, providers)
    }

    /// Uses the given clients (scripted ones in tests), wrapped in the
    /// configured cache.
    pub fn with_providers(config: PipelineConfig, providers: Providers) -> Result<Self, AppError> {
        let cache = Arc::new(match &config.cache.dir {
            Some(dir) => ResponseCache::new(Some(dir.clone()), config.cache.mode),
            None if config.cache.mode == CacheMode::Offline => {
                return Err(AppError::validation("offline mode needs cache.dir"));
            }
            None => ResponseCache::disabled(),
        });
        let providers = providers.cached(&cache);
        let pipeline = build_pipeline(&config, providers)?;
        Ok(Self {
            config,
            cache,
            pipeline: Arc::new(pipeline),
        })
    }
}

fn build_pipeline(config: &PipelineConfig, providers: Providers) -> Result<Pipeline, AppError> {
    let policy = config.timeouts.policy();
    let mut backends = BTreeMap::new();
    for d in config.backend_descriptors() {
        let client = providers
            .generators
            .get(&d.id)
            .cloned()
            .ok_or_else(|| AppError::validation(format!("no client for backend {}", d.id)))?;
        backends.insert(d.id.clone(), Backend::new(d, client));
    }
    let settings = PipelineSettings {
        blocklist: config.blocklist()?,
        top_k: config.top_k,
        questions_per_claim: config.questions_per_claim,
        search: SearchOptions {
            max_results: config.max_results,
            parallelism: config.parallelism,
            policy,
        },
        rank: RankOptions {
            anchor: config.rank_anchor,
            batch_size: config.embed_batch_size,
            policy,
        },
        stance: StanceOptions {
            batch_size: config.nli_batch_size,
            policy,
        },
        vote: config.vote,
    };
    Ok(Pipeline {
        backends,
        search: providers.search,
        embedder: providers.embedder.unwrap_or_else(|| Arc::new(Missing("embedder"))),
        nli: providers.nli.unwrap_or_else(|| Arc::new(Missing("nli"))),
        template: config.template()?,
        settings,
        audit_dir: config.audit_dir.clone(),
    })
}

/// Placeholder for an unconfigured provider; every call fails with a clear
/// message so commands that do not need it still run.
struct Missing(&'static str);

#[async_trait::async_trait]
impl Embedder for Missing {
    fn id(&self) -> &str {
        "unconfigured-embedder"
    }
    async fn embed(&self, _: &[String]) -> Result<Vec<Vec<f64>>, ProviderError> {
        Err(ProviderError::protocol(
            self.0,
            format!("no {} configured", self.0),
        ))
    }
}

#[async_trait::async_trait]
impl NliProvider for Missing {
    fn id(&self) -> &str {
        "unconfigured-nli"
    }
    async fn classify(
        &self,
        _: &[NliPair],
    ) -> Result<Vec<NliPrediction>, ProviderError> {
        Err(ProviderError::protocol(
            self.0,
            format!("no {} configured", self.0),
        ))
    }
}

/// Checks that the providers a verification run needs are configured.
pub fn require_verification_providers(config: &PipelineConfig) -> Result<(), AppError> {
    if config.search.is_empty() {
        return Err(AppError::validation("no search providers configured"));
    }
    if config.embedder.is_none() {
        return Err(AppError::validation("no embedder configured"));
    }
    if config.nli.is_none() {
        return Err(AppError::validation("no nli provider configured"));
    }
    Ok(())
}
