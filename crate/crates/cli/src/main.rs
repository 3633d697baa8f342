use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, ensure, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use log::info;

use fastforward::bench::{self, QuerySource};
use fastforward::encode::{self, QueryEncoder, UnkPolicy};
use fastforward::ingest::{self, BuildOptions};
use fastforward::rerank::{self, DEFAULT_ALPHA};
use fastforward::{coalesce, eval, run, storage, synth, vector};
use fastforward::{DenseVector, InterpolationConfig, Metric, MissingPolicy, Mode, RankedRun};

#[derive(Parser)]
#[command(
    name = "fastforward",
    version,
    about = "Interpolation re-ranking over forward indexes"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build an index file from passage vectors or passage texts.
    IndexBuild(IndexBuildArgs),
    /// Merge runs of similar consecutive passage vectors.
    Coalesce(CoalesceArgs),
    /// Re-rank a sparse run with dense scores from an index.
    Rerank(RerankArgs),
    /// Merge a sparse and a dense run over the sparse candidates.
    Hybrid(HybridArgs),
    /// Score a run against relevance judgments.
    Evaluate(EvaluateArgs),
    /// Time re-ranking with the best-of-n protocol.
    Bench(BenchArgs),
    /// Run internal consistency checks on seeded synthetic data.
    Selftest(SelftestArgs),
}

#[derive(Args)]
struct IndexBuildArgs {
    /// Passage vectors, `doc_id<TAB>passage_index<TAB>floats`.
    #[arg(long, conflicts_with_all = ["passages", "embeddings"])]
    vectors: Option<PathBuf>,
    /// Passage texts, `doc_id<TAB>passage_index<TAB>text`; needs --embeddings.
    #[arg(long, requires = "embeddings")]
    passages: Option<PathBuf>,
    /// Token embedding table used to encode passage texts.
    #[arg(long)]
    embeddings: Option<PathBuf>,
    /// Fraction of tokens kept per passage batch, in [0, 1].
    #[arg(long, requires = "passages")]
    keep_ratio: Option<f64>,
    #[arg(long, default_value_t = 32)]
    batch_size: usize,
    /// Scale every passage vector to unit length.
    #[arg(long)]
    normalize: bool,
    #[command(flatten)]
    encoder: EncoderArgs,
    #[arg(long)]
    output: PathBuf,
}

#[derive(Args)]
struct CoalesceArgs {
    #[arg(long)]
    index: PathBuf,
    /// Cosine-distance threshold; 0 keeps every vector.
    #[arg(long)]
    delta: f64,
    #[arg(long)]
    output: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Exhaustive,
    EarlyStop,
    EarlyStopBound,
}

#[derive(Clone, Copy, ValueEnum)]
enum MissingArg {
    Abort,
    Skip,
}

#[derive(Clone, Copy, ValueEnum)]
enum UnkArg {
    Skip,
    Error,
}

#[derive(Args)]
struct EncoderArgs {
    /// What to do with tokens missing from the embedding table.
    #[arg(long, value_enum, default_value_t = UnkArg::Skip)]
    unk: UnkArg,
    /// Average [CLS]/[SEP] embeddings too, when the table has them.
    #[arg(long)]
    special_tokens: bool,
}

#[derive(Args)]
struct QueryArgs {
    /// Pre-computed query vectors, `query_id<TAB>floats`.
    #[arg(long, conflicts_with_all = ["embeddings", "queries"])]
    query_vectors: Option<PathBuf>,
    /// Token embedding table for encoding query texts.
    #[arg(long, requires = "queries")]
    embeddings: Option<PathBuf>,
    /// Query texts, `query_id<TAB>text`.
    #[arg(long, requires = "embeddings")]
    queries: Option<PathBuf>,
    #[command(flatten)]
    encoder: EncoderArgs,
}

#[derive(Args)]
struct RerankConfigArgs {
    #[arg(long, default_value_t = DEFAULT_ALPHA)]
    alpha: f64,
    /// Sparse candidates considered per query.
    #[arg(long, default_value_t = 1000)]
    k_s: usize,
    /// Documents returned per query; defaults to --k-s.
    #[arg(long)]
    k: Option<usize>,
    #[arg(long, value_enum, default_value_t = ModeArg::Exhaustive)]
    mode: ModeArg,
    /// Upper bound on dense scores, for --mode early-stop-bound.
    #[arg(long)]
    bound: Option<f64>,
    #[arg(long, value_enum, default_value_t = MissingArg::Abort)]
    on_missing: MissingArg,
}

#[derive(Args)]
struct RerankArgs {
    /// Sparse run in TREC format.
    #[arg(long)]
    run: PathBuf,
    #[arg(long)]
    index: PathBuf,
    #[command(flatten)]
    queries: QueryArgs,
    #[command(flatten)]
    config: RerankConfigArgs,
    #[arg(long, default_value_t = 1)]
    threads: usize,
    #[arg(long)]
    output: PathBuf,
}

#[derive(Args)]
struct HybridArgs {
    #[arg(long)]
    sparse: PathBuf,
    #[arg(long)]
    dense: PathBuf,
    #[arg(long, default_value_t = DEFAULT_ALPHA)]
    alpha: f64,
    #[arg(long)]
    output: PathBuf,
}

#[derive(Args)]
struct EvaluateArgs {
    #[arg(long)]
    run: PathBuf,
    #[arg(long)]
    qrels: PathBuf,
    /// Lowest grade counted as relevant by AP, RR and recall.
    #[arg(long, default_value_t = 1)]
    min_rel: u32,
    /// Comma-separated metrics such as nDCG@10,AP@1000,RR@10,R@1000.
    #[arg(long, value_delimiter = ',')]
    metrics: Vec<String>,
    /// Write per-query records here instead of stdout.
    #[arg(long)]
    records: Option<PathBuf>,
}

#[derive(Args)]
struct BenchArgs {
    #[arg(long)]
    run: PathBuf,
    #[arg(long)]
    index: PathBuf,
    #[command(flatten)]
    queries: QueryArgs,
    #[command(flatten)]
    config: RerankConfigArgs,
    #[arg(long, default_value_t = 3)]
    repeats: usize,
}

#[derive(Args)]
struct SelftestArgs {
    #[arg(long, default_value_t = 42)]
    seed: u64,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("FF_LOG", "warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::IndexBuild(a) => cmd_index_build(a),
        Command::Coalesce(a) => cmd_coalesce(a),
        Command::Rerank(a) => cmd_rerank(a),
        Command::Hybrid(a) => cmd_hybrid(a),
        Command::Evaluate(a) => cmd_evaluate(a),
        Command::Bench(a) => cmd_bench(a),
        Command::Selftest(a) => cmd_selftest(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn load_encoder(path: &Path, args: &EncoderArgs) -> Result<QueryEncoder> {
    let table = encode::load_embedding_table(path)
        .with_context(|| format!("reading embedding table {}", path.display()))?;
    let policy = match args.unk {
        UnkArg::Skip => UnkPolicy::Skip,
        UnkArg::Error => UnkPolicy::Error,
    };
    Ok(QueryEncoder::new(table.with_unk_policy(policy)?).with_special_tokens(args.special_tokens))
}

fn load_index(path: &Path) -> Result<fastforward::ForwardIndex> {
    storage::load(path).with_context(|| format!("reading index {}", path.display()))
}

fn load_run(path: &Path) -> Result<RankedRun> {
    run::read_run(path).with_context(|| format!("reading run {}", path.display()))
}

fn print_index_summary(index: &fastforward::ForwardIndex) {
    println!("docs       {}", index.num_docs());
    println!("vectors    {}", index.num_vectors());
    println!("dim        {}", index.dim());
}

fn cmd_index_build(a: IndexBuildArgs) -> Result<()> {
    let index = match (&a.vectors, &a.passages, &a.embeddings) {
        (Some(path), None, None) => {
            let docs = storage::read_passage_vectors(path)
                .with_context(|| format!("reading passage vectors {}", path.display()))?;
            ingest::index_from_vectors(docs, a.normalize)?
        }
        (None, Some(path), Some(table)) => {
            let encoder = load_encoder(table, &a.encoder)?;
            let docs = storage::read_passage_texts(path)
                .with_context(|| format!("reading passages {}", path.display()))?;
            let opts = BuildOptions {
                keep_ratio: a.keep_ratio,
                batch_size: a.batch_size,
                normalize: a.normalize,
            };
            ingest::index_from_texts(&docs, &encoder, &opts)?
        }
        _ => bail!("give either --vectors, or --passages with --embeddings"),
    };
    storage::save(&index, &a.output).with_context(|| format!("writing {}", a.output.display()))?;
    print_index_summary(&index);
    Ok(())
}

fn cmd_coalesce(a: CoalesceArgs) -> Result<()> {
    let index = load_index(&a.index)?;
    let (out, report) = coalesce::coalesce(&index, a.delta)?;
    storage::save(&out, &a.output).with_context(|| format!("writing {}", a.output.display()))?;
    println!("docs            {}", report.docs_processed);
    println!("vectors_before  {}", report.vectors_before);
    println!("vectors_after   {}", report.vectors_after);
    println!("reduction       {:.2}%", report.reduction() * 100.0);
    Ok(())
}

fn interpolation_config(a: &RerankConfigArgs) -> Result<InterpolationConfig> {
    let mode = match (a.mode, a.bound) {
        (ModeArg::Exhaustive, None) => Mode::Exhaustive,
        (ModeArg::EarlyStop, None) => Mode::EarlyStopRunningMax,
        (ModeArg::EarlyStopBound, Some(b)) => Mode::EarlyStopWithBound(b),
        (ModeArg::EarlyStopBound, None) => bail!("--mode early-stop-bound needs --bound"),
        (_, Some(_)) => bail!("--bound only applies to --mode early-stop-bound"),
    };
    let missing = match a.on_missing {
        MissingArg::Abort => MissingPolicy::Abort,
        MissingArg::Skip => MissingPolicy::Skip,
    };
    let k = a.k.unwrap_or(a.k_s);
    Ok(InterpolationConfig::new(a.alpha, a.k_s, k, mode)?.with_missing_policy(missing))
}

enum Queries {
    Vectors(HashMap<String, DenseVector>),
    Text(QueryEncoder, HashMap<String, String>),
}

fn load_queries(a: &QueryArgs) -> Result<Queries> {
    match (&a.query_vectors, &a.embeddings, &a.queries) {
        (Some(path), None, None) => Ok(Queries::Vectors(
            encode::load_precomputed_queries(path)
                .with_context(|| format!("reading query vectors {}", path.display()))?,
        )),
        (None, Some(table), Some(path)) => {
            let encoder = load_encoder(table, &a.encoder)?;
            let texts = encode::load_query_texts(path)
                .with_context(|| format!("reading queries {}", path.display()))?;
            Ok(Queries::Text(encoder, texts.into_iter().collect()))
        }
        _ => bail!("give either --query-vectors, or --embeddings with --queries"),
    }
}

fn encode_queries(queries: Queries) -> Result<HashMap<String, DenseVector>> {
    match queries {
        Queries::Vectors(v) => Ok(v),
        Queries::Text(encoder, texts) => texts
            .into_iter()
            .map(|(qid, text)| {
                let v = encoder
                    .encode(&text)
                    .with_context(|| format!("encoding query {qid}"))?;
                Ok((qid, v))
            })
            .collect(),
    }
}

fn cmd_rerank(a: RerankArgs) -> Result<()> {
    ensure!(a.threads >= 1, "--threads must be at least 1");
    let cfg = interpolation_config(&a.config)?;
    let sparse = load_run(&a.run)?;
    let index = load_index(&a.index)?;
    let queries = encode_queries(load_queries(&a.queries)?)?;
    info!(
        "re-ranking {} queries against {} documents",
        sparse.num_queries(),
        index.num_docs()
    );
    let (out, stats) = rerank::rerank_run(&sparse, &index, &queries, &cfg, a.threads)?;
    run::write_run(&out, &a.output).with_context(|| format!("writing {}", a.output.display()))?;
    println!("queries            {}", stats.queries);
    println!("lookups            {}", stats.lookups);
    println!("lookups_per_query  {:.2}", stats.mean_lookups());
    println!("early_stops        {}", stats.early_stops);
    println!("missing            {}", stats.missing);
    Ok(())
}

fn cmd_hybrid(a: HybridArgs) -> Result<()> {
    let sparse = load_run(&a.sparse)?;
    let dense = load_run(&a.dense)?;
    let (out, stats) = rerank::hybrid_score(&sparse, &dense, a.alpha)?;
    run::write_run(&out, &a.output).with_context(|| format!("writing {}", a.output.display()))?;
    println!("queries                {}", out.num_queries());
    println!("queries_without_dense  {}", stats.queries_without_dense);
    println!("sparse_fallbacks       {}", stats.fallbacks);
    Ok(())
}

fn cmd_evaluate(a: EvaluateArgs) -> Result<()> {
    ensure!(a.min_rel >= 1, "--min-rel must be at least 1");
    let metrics = if a.metrics.is_empty() {
        Metric::DEFAULT_SET.to_vec()
    } else {
        a.metrics
            .iter()
            .map(|m| Metric::parse(m.trim()))
            .collect::<fastforward::Result<Vec<_>>>()?
    };
    let run = load_run(&a.run)?;
    let qrels = eval::read_qrels(&a.qrels)
        .with_context(|| format!("reading qrels {}", a.qrels.display()))?;
    let report = eval::evaluate(&run, &qrels, &metrics, a.min_rel);
    print!("{}", report.to_table());
    match &a.records {
        Some(path) => storage::write_atomic(path, report.to_records().as_bytes())
            .with_context(|| format!("writing {}", path.display()))?,
        None => print!("\n{}", report.to_records()),
    }
    Ok(())
}

fn cmd_bench(a: BenchArgs) -> Result<()> {
    let cfg = interpolation_config(&a.config)?;
    let sparse = load_run(&a.run)?;
    let index = load_index(&a.index)?;
    let queries = load_queries(&a.queries)?;
    let source = match &queries {
        Queries::Vectors(v) => QuerySource::Vectors(v),
        Queries::Text(encoder, texts) => QuerySource::Text {
            encoder,
            queries: texts,
        },
    };
    let report = bench::benchmark_rerank(&index, &sparse, &source, &cfg, a.repeats)?;
    println!("{report}");
    Ok(())
}

fn check(name: &str, ok: bool, failures: &mut usize) {
    println!("{} {name}", if ok { "ok  " } else { "FAIL" });
    if !ok {
        *failures += 1;
    }
}

fn cmd_selftest(a: SelftestArgs) -> Result<()> {
    let mut rng = synth::rng(a.seed);
    let mut failures = 0;

    let mut exact = true;
    let mut fewer_lookups = true;
    for i in 0..200 {
        let k_s = [100, 500, 1000][i % 3];
        let k = [1, 10, 100][(i / 3) % 3];
        let (ranking, dense) = synth::score_instance(&mut rng, k_s, 0.7);
        let bound = dense.values().copied().fold(f64::NEG_INFINITY, f64::max);
        let cfg = InterpolationConfig::new(0.5, k_s, k, Mode::Exhaustive)?;
        let (full, full_stats) = rerank::rerank_query(&ranking, &dense, &cfg)?;
        let (es, es_stats) = rerank::rerank_query(
            &ranking,
            &dense,
            &cfg.with_mode(Mode::EarlyStopWithBound(bound)),
        )?;
        let scores =
            |r: &[fastforward::ScoredDoc]| r.iter().map(|d| d.score.to_bits()).collect::<Vec<_>>();
        exact &= scores(&full) == scores(&es);
        fewer_lookups &= es_stats.lookups <= full_stats.lookups;
    }
    check(
        "early stopping with a true bound matches exhaustive top-k",
        exact,
        &mut failures,
    );
    check(
        "early stopping never needs more lookups",
        fewer_lookups,
        &mut failures,
    );

    let index = synth::clustered_index(&mut rng, 200, 16, 6, 0.3);
    let (same, r0) = coalesce::coalesce(&index, 0.0)?;
    check(
        "coalescing at delta 0 keeps the index",
        same == index && r0.reduction() == 0.0,
        &mut failures,
    );
    let (_, rmax) = coalesce::coalesce(&index, 2.1)?;
    check(
        "coalescing at delta 2.1 leaves one vector per document",
        rmax.vectors_after == index.num_docs(),
        &mut failures,
    );

    let decoded = storage::decode(&storage::encode(&index))?;
    check("index file round trip", decoded == index, &mut failures);

    let c = synth::collection(&mut rng, 300, 16, 4, 5, 100);
    let formatted = run::format_run(&c.run);
    check(
        "run file round trip",
        run::format_run(&run::parse_run(&formatted)?) == formatted,
        &mut failures,
    );

    let q = c.queries.values().next().expect("queries");
    let twice = DenseVector::new(q.iter().map(|x| x * 2.0).collect())?;
    let unit = vector::l2_normalize(q)?;
    check(
        "normalization ignores query scale",
        vector::l2_normalize(&twice)? == unit,
        &mut failures,
    );

    ensure!(failures == 0, "{failures} self-test check(s) failed");
    println!("all checks passed");
    Ok(())
}
