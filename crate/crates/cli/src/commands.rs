use std::collections::{BTreeMap, HashMap};
use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use anyhow::{Context, Result};
use avs_core::concepts::{bank_stats, build_bank, count_concepts_sharded, ConceptBank, NormalizationConfig};
use avs_core::dataset::{corpus_stats, emit_manifest, frame_schedule, Corpus};
use avs_core::engine::{batch_search, read_run, write_run, CorpusIndex, SearchMode, SearchRequest};
use avs_core::eval::{evaluate, Metric, Qrels, StrataSpec, DEFAULT_EPSILON};
use avs_core::treebank::{read_trees_jsonl, ParseTree, TreeSource};
use avs_core::vectors::{
    captions_to_video_concept_vector, read_sparse_jsonl, text_to_concept_vector, write_sparse_jsonl, ConceptVector,
    DenseStore, WeightingScheme,
};

use crate::{
    BankBuildArgs, BankCommand, BankStatsArgs, BankVectorizeArgs, Command, DatasetCommand, EvalArgs, FramesArgs,
    IndexBuildArgs, IndexCommand, ManifestArgs, Mode, SearchArgs, Weighting,
};

/// Invalid combination of otherwise well-formed arguments (exit status 1).
#[derive(Debug)]
pub struct UsageError(pub String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

fn usage(msg: impl Into<String>) -> anyhow::Error {
    UsageError(msg.into()).into()
}

pub fn run(command: Command) -> Result<()> {
    match command {
        Command::Bank(BankCommand::Build(a)) => bank_build(a),
        Command::Bank(BankCommand::Stats(a)) => bank_stats_cmd(a),
        Command::Bank(BankCommand::Vectorize(a)) => bank_vectorize(a),
        Command::Index(IndexCommand::Build(a)) => index_build(a),
        Command::Search(a) => search(a),
        Command::Eval(a) => eval(a),
        Command::Dataset(DatasetCommand::Stats(a)) => dataset_stats(&a.corpus),
        Command::Dataset(DatasetCommand::Frames(a)) => frames(a),
        Command::Dataset(DatasetCommand::Manifest(a)) => manifest(a),
    }
}

fn open(path: &Path) -> Result<BufReader<File>> {
    let f = File::open(path).with_context(|| format!("{}: cannot open", path.display()))?;
    Ok(BufReader::new(f))
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    let f = File::create(path).with_context(|| format!("{}: cannot create", path.display()))?;
    Ok(BufWriter::new(f))
}

fn in_file<T, E>(path: &Path, r: std::result::Result<T, E>) -> Result<T>
where
    E: std::error::Error + Send + Sync + 'static,
{
    r.with_context(|| path.display().to_string())
}

fn load_config(path: Option<&Path>) -> Result<NormalizationConfig> {
    match path {
        None => Ok(NormalizationConfig::default()),
        Some(p) => {
            let text = fs::read_to_string(p).with_context(|| format!("{}: cannot read", p.display()))?;
            in_file(p, NormalizationConfig::parse(&text))
        }
    }
}

fn load_trees(path: &Path) -> Result<Vec<TreeSource>> {
    in_file(path, read_trees_jsonl(open(path)?))
}

fn load_bank(path: &Path) -> Result<ConceptBank> {
    in_file(path, ConceptBank::read_tsv(open(path)?))
}

fn thread_pool(threads: usize) -> Result<rayon::ThreadPool> {
    if threads == 0 {
        return Err(usage("--threads must be at least 1"));
    }
    rayon::ThreadPoolBuilder::new().num_threads(threads).build().context("cannot start worker threads")
}

fn bank_build(a: BankBuildArgs) -> Result<()> {
    if a.min_freq == 0 {
        return Err(usage("--min-freq must be at least 1"));
    }
    if a.shards == 0 {
        return Err(usage("--shards must be at least 1"));
    }
    let cfg = load_config(a.config.as_deref())?;
    let mut trees: Vec<ParseTree> = Vec::new();
    for path in &a.trees {
        trees.extend(load_trees(path)?.into_iter().map(|t| t.tree));
    }
    let counts = count_concepts_sharded(&trees, &cfg, a.shards);
    let bank = build_bank(&counts, a.min_freq);
    fs::write(&a.out, bank.to_tsv()).with_context(|| format!("{}: cannot write", a.out.display()))?;
    eprintln!(
        "bank: {} of {} concepts kept from {} sentences (min_freq {})",
        bank.len(),
        counts.len(),
        counts.sentences(),
        a.min_freq
    );
    Ok(())
}

fn bank_stats_cmd(a: BankStatsArgs) -> Result<()> {
    let bank = load_bank(&a.bank)?;
    let s = bank_stats(&bank);
    let mut out = std::io::stdout().lock();
    if a.json {
        let v = serde_json::json!({
            "n": s.n,
            "min_freq": bank.min_freq(),
            "phrases": s.phrase_count,
            "words": s.word_count,
            "phrase_bands": {
                "le50": { "count": s.band_counts[0], "fraction": s.band_fractions[0] },
                "51to100": { "count": s.band_counts[1], "fraction": s.band_fractions[1] },
                "gt100": { "count": s.band_counts[2], "fraction": s.band_fractions[2] },
            },
            "no_phrases": s.no_phrases,
        });
        writeln!(out, "{v}")?;
    } else {
        writeln!(out, "concepts\t{}", s.n)?;
        writeln!(out, "min_freq\t{}", bank.min_freq())?;
        writeln!(out, "words\t{}", s.word_count)?;
        writeln!(out, "phrases\t{}", s.phrase_count)?;
        let names = ["freq<=50", "50<freq<=100", "freq>100"];
        for (i, name) in names.iter().enumerate() {
            writeln!(out, "{name}\t{}\t{:.4}", s.band_counts[i], s.band_fractions[i])?;
        }
    }
    Ok(())
}

fn scheme(w: Weighting) -> WeightingScheme {
    match w {
        Weighting::Binary => WeightingScheme::Binary,
        Weighting::Tf => WeightingScheme::TermFrequency,
    }
}

fn bank_vectorize(a: BankVectorizeArgs) -> Result<()> {
    let cfg = load_config(a.config.as_deref())?;
    let bank = load_bank(&a.bank)?;
    let trees = load_trees(&a.trees)?;
    let vectors: Vec<ConceptVector> = match &a.corpus {
        None => trees
            .iter()
            .map(|t| text_to_concept_vector(&t.sentence_id, &t.tree, &bank, &scheme(a.weighting), &cfg))
            .collect::<std::result::Result<_, _>>()?,
        Some(corpus_path) => {
            let corpus = in_file(corpus_path, Corpus::read_jsonl(open(corpus_path)?))?;
            let video_of: HashMap<&str, &str> =
                corpus.captions.iter().map(|c| (c.caption_id.as_str(), c.video_id.as_str())).collect();
            let mut grouped: BTreeMap<&str, Vec<&ParseTree>> = BTreeMap::new();
            for t in &trees {
                let video = video_of.get(t.sentence_id.as_str()).with_context(|| {
                    format!("{}: tree {:?} is not a caption in {}", a.trees.display(), t.sentence_id, corpus_path.display())
                })?;
                grouped.entry(video).or_default().push(&t.tree);
            }
            grouped
                .into_iter()
                .map(|(video, ts)| captions_to_video_concept_vector(video, ts, &bank, &cfg))
                .collect()
        }
    };
    let empty = vectors.iter().filter(|v| v.is_empty()).count();
    let kept: Vec<ConceptVector> = vectors.into_iter().filter(|v| !v.is_empty()).collect();
    let mut w = create(&a.out)?;
    write_sparse_jsonl(&kept, &mut w).with_context(|| format!("{}: cannot write", a.out.display()))?;
    eprintln!("vectorize: {} vectors written, {} without in-bank concepts skipped", kept.len(), empty);
    Ok(())
}

fn load_dense(path: &Path) -> Result<DenseStore> {
    let f = File::open(path).with_context(|| format!("{}: cannot open", path.display()))?;
    in_file(path, DenseStore::read_avsv(BufReader::with_capacity(1 << 20, f)))
}

fn index_build(a: IndexBuildArgs) -> Result<()> {
    if a.embeddings.is_none() && a.concepts.is_none() {
        return Err(usage("index build needs --embeddings, --concepts or both"));
    }
    let bank = load_bank(&a.bank)?;
    let dense = a.embeddings.as_deref().map(load_dense).transpose()?;
    let sparse = match &a.concepts {
        Some(p) => in_file(p, read_sparse_jsonl(open(p)?, Some(bank.len()), a.top_m))?,
        None => Vec::new(),
    };
    let index = CorpusIndex::build(dense, sparse, bank)?;
    let mut w = create(&a.out)?;
    index.write_to(&mut w).with_context(|| format!("{}: cannot write", a.out.display()))?;
    w.flush()?;
    eprintln!("index: {} items, dim {}, {} concepts", index.len(), index.dim(), index.bank().len());
    Ok(())
}

fn search(a: SearchArgs) -> Result<()> {
    if !(0.0..=1.0).contains(&a.alpha) {
        return Err(usage(format!("--alpha must lie in [0, 1], got {}", a.alpha)));
    }
    if a.k == 0 {
        return Err(usage("--k must be at least 1"));
    }
    let mode = match a.mode {
        Mode::Concept => SearchMode::Concept,
        Mode::Embedding => SearchMode::Embedding,
        Mode::Fusion => SearchMode::Fusion,
    };
    if mode != SearchMode::Concept && a.query_embeddings.is_none() {
        return Err(usage(format!("--mode {mode} needs --query-embeddings")));
    }
    let pool = thread_pool(a.threads)?;
    let cfg = load_config(a.config.as_deref())?;
    let index = {
        let f = File::open(&a.index).with_context(|| format!("{}: cannot open", a.index.display()))?;
        in_file(&a.index, CorpusIndex::read_from(BufReader::with_capacity(1 << 20, f)))?
    };
    let queries = load_trees(&a.queries)?;
    let embeddings = a.query_embeddings.as_deref().map(load_dense).transpose()?;
    let overrides: HashMap<String, ConceptVector> = match &a.query_concepts {
        Some(p) => in_file(p, read_sparse_jsonl(open(p)?, Some(index.bank().len()), None))?
            .into_iter()
            .map(|v| (v.item_id.clone(), v))
            .collect(),
        None => HashMap::new(),
    };

    let mut requests = Vec::with_capacity(queries.len());
    for q in &queries {
        let mut req = SearchRequest::new(q.sentence_id.clone(), mode).with_alpha(a.alpha).with_k(a.k);
        if mode != SearchMode::Embedding {
            let v = match overrides.get(&q.sentence_id) {
                Some(v) => v.clone(),
                None => text_to_concept_vector(&q.sentence_id, &q.tree, index.bank(), &scheme(a.weighting), &cfg)?,
            };
            req = req.with_concepts(v);
        }
        if let Some(store) = &embeddings {
            if mode != SearchMode::Concept {
                let row = store.get(&q.sentence_id).with_context(|| {
                    format!(
                        "{}: no embedding for query {:?}",
                        a.query_embeddings.as_ref().expect("checked above").display(),
                        q.sentence_id
                    )
                })?;
                req = req.with_embedding(row.to_vec());
            }
        }
        requests.push(req);
    }

    let results = batch_search(&index, &requests, pool.current_num_threads());
    let mut runs = Vec::with_capacity(results.len());
    for (req, r) in requests.iter().zip(results) {
        runs.push(r.with_context(|| format!("{}: query {:?}", a.queries.display(), req.query_id))?);
    }
    let mut w = create(&a.out)?;
    write_run(&runs, &a.tag, &mut w).with_context(|| format!("{}: cannot write", a.out.display()))?;
    eprintln!("search: {} queries, mode {mode}, k {}", runs.len(), a.k);
    Ok(())
}

fn eval(a: EvalArgs) -> Result<()> {
    let metrics = Metric::parse_list(&a.metrics).map_err(usage)?;
    if a.depth == 0 {
        return Err(usage("--depth must be at least 1"));
    }
    let pool = thread_pool(a.threads)?;
    let runs = in_file(&a.runs, read_run(open(&a.runs)?))?;
    let qrels = in_file(&a.qrels, Qrels::read(open(&a.qrels)?))?;
    let strata = match &a.strata {
        Some(p) => {
            let mut spec = in_file(p, StrataSpec::read(open(p)?))?;
            if let Some(m) = &a.membership {
                in_file(m, spec.read_membership(open(m)?))?;
            }
            Some(spec)
        }
        None => None,
    };
    let report = pool
        .install(|| evaluate(&runs, &qrels, strata.as_ref(), a.depth, DEFAULT_EPSILON))
        .with_context(|| a.qrels.display().to_string())?;
    let missing = report.per_query.iter().filter(|q| q.missing_run).count();
    if missing > 0 {
        eprintln!("eval: {missing} judged queries have no run and score 0");
    }
    let text = report.render(&metrics, a.per_query);
    match &a.out {
        Some(p) => fs::write(p, text).with_context(|| format!("{}: cannot write", p.display()))?,
        None => std::io::stdout().lock().write_all(text.as_bytes())?,
    }
    Ok(())
}

fn load_corpus(path: &Path) -> Result<Corpus> {
    in_file(path, Corpus::read_jsonl(open(path)?))
}

fn dataset_stats(path: &Path) -> Result<()> {
    let corpus = load_corpus(path)?;
    let s = corpus_stats(&corpus.captions);
    let mut out = std::io::stdout().lock();
    writeln!(out, "videos\t{}", corpus.videos.len())?;
    writeln!(out, "videos_with_captions\t{}", s.num_videos)?;
    writeln!(out, "captions\t{}", s.num_captions)?;
    writeln!(out, "avg_tokens_per_caption\t{:.4}", s.avg_tokens_per_caption)?;
    writeln!(out, "captions_per_video\t{:.4}", s.captions_per_video)?;
    Ok(())
}

fn frames(a: FramesArgs) -> Result<()> {
    let ts = frame_schedule(a.duration, a.spacing, a.frames).map_err(|e| usage(e.to_string()))?;
    let mut out = std::io::stdout().lock();
    for t in ts {
        writeln!(out, "{t:.3}")?;
    }
    Ok(())
}

fn manifest(a: ManifestArgs) -> Result<()> {
    if !(a.ratio > 0.0 && a.ratio < 1.0) {
        return Err(usage(format!("--ratio must lie strictly between 0 and 1, got {}", a.ratio)));
    }
    let corpus = load_corpus(&a.corpus)?;
    let m = in_file(&a.corpus, emit_manifest(&corpus.videos, &corpus.captions, a.ratio, a.seed))?;
    fs::create_dir_all(&a.out_dir).with_context(|| format!("{}: cannot create directory", a.out_dir.display()))?;
    for (name, text) in [("train.txt", m.train_text()), ("val.txt", m.val_text())] {
        let p = a.out_dir.join(name);
        fs::write(&p, text).with_context(|| format!("{}: cannot write", p.display()))?;
    }
    eprintln!("manifest: {} train, {} val", m.train.len(), m.val.len());
    Ok(())
}
