use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};
use factcheck::bench::{
    persist_run, results_json, run_qg_benchmark, run_verdict_benchmark, Alignment, InputFile, MethodSpec, NamedDataset,
    QgOptions, RunClock, RunOutput,
};
use factcheck::cache::CacheMode;
use factcheck::config::PipelineConfig;
use factcheck::runtime::{require_verification_providers, Overrides, Runtime};
use factcheck::{server, AppError};
use factcheck_core::datasets::{
    compute_stats, curriculum_order, expand_split, load_dataset, write_curriculum, Claim, DatasetRecord, FormatHint,
    NamedPairs, Split, StatsManifest,
};
use factcheck_core::metrics::{manual_eval_report, AnnotationRecord, KappaWeighting};
use factcheck_core::questiongen::{generate_questions, synthesize_dataset, SynthesisOptions};
use factcheck_core::verification::{verify_claim, Method};

#[derive(Parser)]
#[command(name = "factcheck", version, about = "Question-guided claim verification and benchmarks")]
struct Cli {
    /// Serve provider responses from the cache only; misses fail.
    #[arg(long, global = true, conflicts_with = "no_cache")]
    offline: bool,
    /// Always call providers live and leave the cache untouched.
    #[arg(long, global = true)]
    no_cache: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct ConfigArg {
    #[arg(long)]
    config: PathBuf,
}

#[derive(Args)]
struct DatasetArgs {
    /// `[NAME=]PATH`; repeatable. NAME defaults to the file stem.
    #[arg(long = "dataset", required = true)]
    datasets: Vec<String>,
    #[arg(long, default_value = "canonical")]
    format: FormatHint,
}

#[derive(Subcommand)]
enum Command {
    /// Verify one claim.
    Check {
        #[command(flatten)]
        config: ConfigArg,
        #[arg(long)]
        claim: String,
        #[arg(long, default_value = "request")]
        claim_id: String,
        /// `claim_only`, `human` (with --question) or a backend id.
        #[arg(long, default_value = "claim_only")]
        method: String,
        #[arg(long = "question")]
        questions: Vec<String>,
        /// Comma-separated search provider names to use.
        #[arg(long, value_delimiter = ',')]
        providers: Option<Vec<String>>,
        #[arg(long)]
        topk: Option<usize>,
        #[arg(long)]
        blocklist: Option<PathBuf>,
    },
    /// Generate questions for one claim.
    Generate {
        #[command(flatten)]
        config: ConfigArg,
        #[arg(long)]
        claim: String,
        #[arg(long)]
        backend: String,
        #[arg(short = 'n', long = "count")]
        n: Option<usize>,
    },
    /// Build a synthetic claim-question dataset.
    Synthesize {
        #[command(flatten)]
        config: ConfigArg,
        #[arg(long)]
        claims: PathBuf,
        #[arg(long, default_value = "canonical")]
        format: FormatHint,
        #[arg(long)]
        backend: String,
        #[arg(long)]
        out: PathBuf,
        #[arg(short = 'n', long = "count")]
        n: Option<usize>,
        #[arg(long, default_value_t = 0.2)]
        test_fraction: f64,
    },
    /// Score question-generation backends on dataset test splits.
    EvalQg {
        #[command(flatten)]
        config: ConfigArg,
        #[command(flatten)]
        data: DatasetArgs,
        /// Backend ids; all configured backends when omitted.
        #[arg(long = "backend")]
        backends: Vec<String>,
        #[arg(long)]
        baseline: Option<String>,
        #[arg(long, default_value_t = 0.05)]
        alpha: f64,
        #[arg(long, value_enum, default_value = "faithful")]
        alignment: AlignmentArg,
        #[arg(long)]
        out: PathBuf,
    },
    /// Classify labeled claims with each question-generation method.
    EvalVerdict {
        #[command(flatten)]
        config: ConfigArg,
        #[arg(long)]
        claims: PathBuf,
        #[arg(long, default_value = "canonical")]
        format: FormatHint,
        /// `claim_only`, `human` or a backend id; repeatable.
        #[arg(long = "method", required = true)]
        methods: Vec<String>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Dataset statistics, optionally checked against a manifest.
    Stats {
        #[arg(long)]
        config: Option<PathBuf>,
        #[command(flatten)]
        data: DatasetArgs,
        #[arg(long)]
        manifest: Option<PathBuf>,
    },
    /// Concatenate training pairs smallest dataset first.
    Curriculum {
        #[arg(long)]
        config: Option<PathBuf>,
        #[command(flatten)]
        data: DatasetArgs,
        #[arg(long)]
        out: PathBuf,
    },
    /// Rating means and inter-annotator agreement.
    Agreement {
        #[arg(long)]
        config: Option<PathBuf>,
        /// JSON lines of annotation records.
        #[arg(long)]
        annotations: PathBuf,
        #[arg(long, default_value = "quadratic")]
        weighting: KappaWeighting,
    },
    /// Run the HTTP service.
    Serve {
        #[command(flatten)]
        config: ConfigArg,
        #[arg(long, default_value = "127.0.0.1:8080")]
        addr: String,
    },
}

#[derive(Clone, Copy, clap::ValueEnum)]
enum AlignmentArg {
    Faithful,
    BestMatch,
}

fn named_datasets(args: &DatasetArgs) -> Result<Vec<(NamedDataset, PathBuf)>, AppError> {
    args.datasets
        .iter()
        .map(|spec| {
            let (name, path) = match spec.split_once('=') {
                Some((n, p)) => (n.to_string(), PathBuf::from(p)),
                None => {
                    let p = PathBuf::from(spec);
                    let stem = p.file_stem().and_then(|s| s.to_str()).unwrap_or(spec).to_string();
                    (stem, p)
                }
            };
            let records = load_dataset(&path, args.format)?;
            Ok((NamedDataset { name, records }, path))
        })
        .collect()
}

fn print_json<T: serde::Serialize>(value: &T) {
    println!("{}", serde_json::to_string_pretty(value).expect("output serializes"));
}

struct Ctx {
    overrides: Overrides,
}

impl Ctx {
    fn runtime(&self, path: &Path) -> Result<Runtime, AppError> {
        let mut config = PipelineConfig::load(path)?;
        self.overrides.apply(&mut config)?;
        Runtime::from_config(config)
    }
}

async fn run(cli: Cli) -> Result<(), AppError> {
    let mut ctx = Ctx {
        overrides: Overrides::default(),
    };
    if cli.offline {
        ctx.overrides.cache_mode = Some(CacheMode::Offline);
    } else if cli.no_cache {
        ctx.overrides.cache_mode = Some(CacheMode::Bypass);
    }
    match cli.command {
        Command::Check {
            config,
            claim,
            claim_id,
            method,
            questions,
            providers,
            topk,
            blocklist,
        } => {
            ctx.overrides.providers = providers;
            ctx.overrides.top_k = topk;
            ctx.overrides.blocklist = blocklist;
            let rt = ctx.runtime(&config.config)?;
            require_verification_providers(&rt.config)?;
            let claim = Claim::new(claim_id, claim)?;
            let method = match (method.as_str(), questions.is_empty()) {
                ("human", true) => return Err(AppError::validation("method human needs at least one --question")),
                ("human", false) => Method::HumanQuestions {
                    name: "human_written".into(),
                    questions: Arc::new(BTreeMap::from([(claim.id.clone(), questions)])),
                },
                (_, false) => return Err(AppError::validation("--question is only used with --method human")),
                ("claim_only", true) => Method::ClaimOnly,
                (id, true) => Method::Backend(id.to_string()),
            };
            let record = verify_claim(&claim, &method, &rt.pipeline).await?;
            print_json(&record);
        }
        Command::Generate { config, claim, backend, n } => {
            let rt = ctx.runtime(&config.config)?;
            let b = rt
                .pipeline
                .backend(&backend)
                .ok_or_else(|| AppError::validation(format!("unknown backend {backend:?}")))?;
            let claim = Claim::new("request", claim)?;
            let n = n.unwrap_or(rt.config.questions_per_claim);
            let set = generate_questions(&claim, b, &rt.pipeline.template, n).await?;
            print_json(&set);
        }
        Command::Synthesize {
            config,
            claims,
            format,
            backend,
            out,
            n,
            test_fraction,
        } => {
            let rt = ctx.runtime(&config.config)?;
            let b = rt
                .pipeline
                .backend(&backend)
                .ok_or_else(|| AppError::validation(format!("unknown backend {backend:?}")))?;
            let claims: Vec<Claim> = load_dataset(&claims, format)?.into_iter().map(|r| r.claim).collect();
            let options = SynthesisOptions {
                questions_per_claim: n.unwrap_or(rt.config.questions_per_claim),
                test_fraction,
                parallelism: rt.config.parallelism,
            };
            let report = synthesize_dataset(&claims, b, &rt.pipeline.template, &options, &out).await?;
            print_json(&report);
        }
        Command::EvalQg {
            config,
            data,
            backends,
            baseline,
            alpha,
            alignment,
            out,
        } => {
            let clock = RunClock::start();
            let rt = ctx.runtime(&config.config)?;
            let loaded = named_datasets(&data)?;
            let selected: Vec<_> = if backends.is_empty() {
                rt.pipeline.backends.values().cloned().collect()
            } else {
                backends
                    .iter()
                    .map(|id| {
                        rt.pipeline
                            .backend(id)
                            .cloned()
                            .ok_or_else(|| AppError::validation(format!("unknown backend {id:?}")))
                    })
                    .collect::<Result<_, _>>()?
            };
            let options = QgOptions {
                alignment: match alignment {
                    AlignmentArg::Faithful => Alignment::Faithful,
                    AlignmentArg::BestMatch => Alignment::BestMatch,
                },
                baseline: baseline.clone(),
                alpha,
                parallelism: rt.config.parallelism,
            };
            let datasets: Vec<NamedDataset> = loaded.iter().map(|(d, _)| d.clone()).collect();
            let bench = run_qg_benchmark(&datasets, &selected, &rt.pipeline.template, &options).await?;
            let inputs = loaded
                .iter()
                .map(|(d, p)| InputFile::hash(&d.name, p))
                .collect::<Result<Vec<_>, _>>()?;
            let selection = BTreeMap::from([
                ("backends".to_string(), bench.backends.join(",")),
                ("baseline".to_string(), baseline.unwrap_or_default()),
                ("alpha".to_string(), alpha.to_string()),
                ("alignment".to_string(), format!("{:?}", options.alignment)),
                ("format".to_string(), data.format.name().to_string()),
            ]);
            let text = bench.to_text();
            persist_run(
                &out,
                clock,
                RunOutput {
                    kind: "qg",
                    config: &rt.config,
                    inputs,
                    selection,
                    cache: rt.cache.stats(),
                    files: vec![
                        ("report.tsv", bench.to_tsv()),
                        ("cells.tsv", bench.to_cells_tsv()),
                        ("report.txt", text.clone()),
                        ("results.json", results_json(&bench)),
                    ],
                },
            )?;
            print!("{text}");
        }
        Command::EvalVerdict {
            config,
            claims,
            format,
            methods,
            out,
        } => {
            let clock = RunClock::start();
            let rt = ctx.runtime(&config.config)?;
            require_verification_providers(&rt.config)?;
            let records: Vec<DatasetRecord> = load_dataset(&claims, format)?;
            let specs: Vec<MethodSpec> = methods.iter().map(|m| MethodSpec::parse(m)).collect();
            let bench = run_verdict_benchmark(&records, &specs, &rt.pipeline, rt.config.parallelism).await?;
            let selection = BTreeMap::from([
                ("methods".to_string(), specs.iter().map(MethodSpec::name).collect::<Vec<_>>().join(",")),
                ("format".to_string(), format.name().to_string()),
            ]);
            let text = bench.to_text();
            persist_run(
                &out,
                clock,
                RunOutput {
                    kind: "verdict",
                    config: &rt.config,
                    inputs: vec![InputFile::hash("claims", &claims)?],
                    selection,
                    cache: rt.cache.stats(),
                    files: vec![
                        ("report.tsv", bench.to_tsv()),
                        ("report.txt", text.clone()),
                        ("results.json", results_json(&bench)),
                    ],
                },
            )?;
            print!("{text}");
        }
        Command::Stats { data, manifest, .. } => {
            let loaded = named_datasets(&data)?;
            let manifest = manifest.map(|p| StatsManifest::load(&p)).transpose()?;
            let mut problems = Vec::new();
            for (d, _) in &loaded {
                let s = compute_stats(&d.records)?;
                println!(
                    "{}\tclaims={}\tquestions={}\tavg={}\ttrain={}\ttest={}",
                    d.name,
                    s.num_claims,
                    s.total_questions,
                    s.avg_questions_display(),
                    s.train_size,
                    s.test_size
                );
                if let Some(m) = &manifest {
                    problems.extend(m.mismatches(&s).into_iter().map(|p| format!("{}: {p}", d.name)));
                }
            }
            if !problems.is_empty() {
                return Err(AppError::validation(format!("manifest mismatch: {}", problems.join("; "))));
            }
        }
        Command::Curriculum { data, out, .. } => {
            let collections = named_datasets(&data)?
                .into_iter()
                .map(|(d, _)| NamedPairs {
                    pairs: expand_split(&d.records, Split::Train),
                    name: d.name,
                })
                .collect();
            let export = curriculum_order(collections)?;
            let manifest = write_curriculum(&export, &out)?;
            for e in &export.manifest {
                println!("{}\t{}\t{}", e.position, e.name, e.pair_count);
            }
            eprintln!("wrote {} and {}", out.display(), manifest.display());
        }
        Command::Agreement {
            annotations, weighting, ..
        } => {
            let text = std::fs::read_to_string(&annotations)
                .map_err(|e| AppError::validation(format!("{}: {e}", annotations.display())))?;
            let records = text
                .lines()
                .enumerate()
                .filter(|(_, l)| !l.trim().is_empty())
                .map(|(i, l)| {
                    serde_json::from_str::<AnnotationRecord>(l)
                        .map_err(|e| AppError::validation(format!("{}:{}: {e}", annotations.display(), i + 1)))
                })
                .collect::<Result<Vec<_>, _>>()?;
            print_json(&manual_eval_report(&records, weighting)?);
        }
        Command::Serve { config, addr } => {
            let rt = ctx.runtime(&config.config)?;
            server::serve(rt.pipeline.clone(), &addr).await?;
        }
    }
    Ok(())
}

#[tokio::main]
async fn main() -> ExitCode {
    tracing_subscriber::fmt()
        .with_env_filter(
            tracing_subscriber::EnvFilter::try_from_default_env().unwrap_or_else(|_| "warn".into()),
        )
        .with_writer(std::io::stderr)
        .init();
    let cli = Cli::parse();
    match run(cli).await {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
