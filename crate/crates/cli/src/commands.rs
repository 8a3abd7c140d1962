use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use garec_core::contrastive::{train_adapter, LinearAdapter, TrainConfig};
use garec_core::corpus::{compute_stats, ground_truth_set, Corpus, Split};
use garec_core::embed_store::EmbeddingStore;
use garec_core::inter_metrics::{aggregate_inter, evaluate_inter_query, ClipScore};
use garec_core::metrics::{aggregate_intra, evaluate_intra_query, CarConfig};
use garec_core::retrieval::{
    build_candidates, caption_idf, format_score, read_score_matrix, write_score_matrix, Method,
    MethodConfig, RankedList, RetrievalError, Scorer, Task,
};
use rayon::prelude::*;
use serde_json::{json, Value};

use crate::args::{Cli, EvalArgs, GlobalOpts, IngestArgs, ScoreArgs, StatsArgs, TrainArgs};
use crate::manifest::{now, RunManifest};
use crate::Usage;

fn usage(msg: impl Into<String>) -> anyhow::Error {
    Usage(msg.into()).into()
}

fn load_corpus(path: &Path) -> Result<Corpus> {
    match Corpus::load(path) {
        Ok(c) => Ok(c),
        Err(e) => {
            for issue in e.issues() {
                eprintln!("{}: {issue}", path.display());
            }
            Err(anyhow::Error::new(e).context(format!("loading corpus {}", path.display())))
        }
    }
}

fn load_store(path: &Path) -> Result<EmbeddingStore> {
    EmbeddingStore::load(path).with_context(|| format!("loading embeddings {}", path.display()))
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    let f = File::create(path).with_context(|| format!("creating {}", path.display()))?;
    Ok(BufWriter::new(f))
}

fn write_json(path: &Path, value: &Value) -> Result<()> {
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, value)?;
    w.write_all(b"\n")?;
    w.flush()?;
    Ok(())
}

fn pool(jobs: usize) -> Result<rayon::ThreadPool> {
    Ok(rayon::ThreadPoolBuilder::new().num_threads(jobs).build()?)
}

fn check_globals(g: &GlobalOpts) -> Result<()> {
    if g.k.is_empty() || g.k.contains(&0) {
        return Err(usage("--k needs one or more cutoffs, each at least 1"));
    }
    if g.alpha.is_empty() {
        return Err(usage("--alpha needs at least one value"));
    }
    if let Some(a) = g.alpha.iter().find(|a| !(0.0..=1.0).contains(*a)) {
        return Err(usage(format!("--alpha values must lie in [0, 1], got {a}")));
    }
    if !(g.tau > 0.0 && g.tau.is_finite()) {
        return Err(usage(format!("--tau must be positive, got {}", g.tau)));
    }
    Ok(())
}

pub fn run(cli: &Cli) -> Result<()> {
    use crate::args::Command::*;
    check_globals(&cli.global)?;
    let config = serde_json::to_value(cli)?;
    match &cli.command {
        Ingest(a) => ingest(a),
        Stats(a) => stats(a),
        Score(a) => score(a, &cli.global, config),
        Eval(a) => eval(a, &cli.global, config),
        Train(a) => train(a, &cli.global, config),
    }
}

fn ingest(a: &IngestArgs) -> Result<()> {
    let corpus = load_corpus(&a.input)?;
    corpus
        .save(&a.output)
        .with_context(|| format!("writing {}", a.output.display()))?;
    let count = |s| corpus.split(s).count();
    eprintln!(
        "ingested {} papers (train {}, val {}, test {})",
        corpus.len(),
        count(Split::Train),
        count(Split::Val),
        count(Split::Test)
    );
    Ok(())
}

fn stats(a: &StatsArgs) -> Result<()> {
    let corpus = load_corpus(&a.corpus)?;
    let value = serde_json::to_value(compute_stats(&corpus, a.split))?;
    match &a.output {
        Some(p) => write_json(p, &value),
        None => {
            let text = serde_json::to_string_pretty(&value)?;
            match writeln!(std::io::stdout().lock(), "{text}") {
                // a closed pipe (`| head`) is not a failure
                Err(e) if e.kind() == std::io::ErrorKind::BrokenPipe => Ok(()),
                r => r.context("writing to stdout"),
            }
        }
    }
}

fn score(a: &ScoreArgs, g: &GlobalOpts, config: Value) -> Result<()> {
    let started = now();
    if a.method == Method::Random && g.seed.is_none() {
        return Err(usage("method `random` needs --seed"));
    }
    if a.method.needs_store() && a.embeddings.is_none() {
        return Err(usage(format!("method `{}` needs --embeddings", a.method)));
    }
    let corpus = load_corpus(&a.corpus)?;
    let store = a.embeddings.as_deref().map(load_store).transpose()?;
    let adapter = match &a.adapter {
        Some(p) => {
            Some(LinearAdapter::<f64>::from_store(&load_store(p)?).context("reading adapter")?)
        }
        None => None,
    };

    let mut sets = Vec::new();
    let mut no_gt = 0;
    for paper in corpus.split(a.query_split) {
        match build_candidates(
            &corpus,
            &paper.paper_id,
            a.task,
            a.reference_split,
            a.gt_policy,
        ) {
            Ok(s) => sets.push(s),
            Err(RetrievalError::NoGroundTruth(_)) => no_gt += 1,
            Err(e) => return Err(e.into()),
        }
    }
    if no_gt > 0 {
        log::warn!("skipped {no_gt} query paper(s) without ground truth");
    }

    let subfigure_captions = !a.no_subfigure_captions;
    let method = MethodConfig {
        method: a.method,
        seed: g.seed,
        adapter,
        subfigure_captions,
    };
    let mut scorer = Scorer::new(&corpus, store.as_ref(), method)?;
    if a.method == Method::Cider {
        scorer = scorer.with_idf(caption_idf(&corpus, &sets, subfigure_captions));
    }
    let lists: Vec<RankedList<f64>> = pool(g.jobs)?.install(|| {
        sets.par_iter()
            .map(|s| scorer.score(s))
            .collect::<Result<_, _>>()
    })?;
    let unscored: usize = lists.iter().map(RankedList::unscored_len).sum();
    if unscored > 0 {
        log::warn!("{unscored} candidate(s) had no usable score and were ranked last");
    }

    let mut w = create(&a.out)?;
    write_score_matrix(&lists, &mut w)?;
    w.flush()?;

    let mut inputs = vec![a.corpus.as_path()];
    inputs.extend(a.embeddings.as_deref());
    inputs.extend(a.adapter.as_deref());
    let manifest_path = PathBuf::from(format!("{}.manifest.json", a.out.display()));
    RunManifest::new(config, g.seed, started)
        .inputs(inputs)?
        .write(std::slice::from_ref(&a.out), &manifest_path)
}

/// Directory name for one alpha of a sweep, e.g. `alpha_0.25`.
pub fn alpha_dir(alpha: f64) -> String {
    format!("alpha_{}", format_score(Some(alpha)))
}

fn eval(a: &EvalArgs, g: &GlobalOpts, config: Value) -> Result<()> {
    let started = now();
    let corpus = load_corpus(&a.corpus)?;
    let file = File::open(&a.scores).with_context(|| format!("opening {}", a.scores.display()))?;
    let lists = read_score_matrix::<f64, _>(std::io::BufReader::new(file), "scores")
        .with_context(|| format!("reading {}", a.scores.display()))?;
    for l in &lists {
        if corpus.get(&l.query_id).is_none() {
            return Err(usage(format!(
                "query `{}` is not in the corpus",
                l.query_id
            )));
        }
    }
    let empty = lists.iter().filter(|l| l.scored_len() == 0).count();
    if empty > 0 {
        log::warn!("skipped {empty} query(ies) with no scored candidates");
    }
    let scored: Vec<&RankedList<f64>> = lists.iter().filter(|l| l.scored_len() > 0).collect();
    fs::create_dir_all(&a.out_dir).with_context(|| format!("creating {}", a.out_dir.display()))?;
    let pool = pool(g.jobs)?;

    let mut outputs = Vec::new();
    let mut inputs = vec![a.scores.as_path(), a.corpus.as_path()];
    match a.task {
        Task::Intra => {
            if a.car_k == 0 || a.ndcg_k == 0 {
                return Err(usage("--car-k and --ndcg-k must be at least 1"));
            }
            let mut with_gt = Vec::new();
            let mut no_gt = 0;
            for l in &scored {
                match ground_truth_set(corpus.get(&l.query_id).expect("checked above"), a.gt_policy)
                {
                    Ok(gt) => with_gt.push((*l, gt)),
                    Err(_) => no_gt += 1,
                }
            }
            if no_gt > 0 {
                log::warn!("skipped {no_gt} query(ies) without ground truth");
            }
            let sweep = g.alpha.len() > 1;
            for &alpha in &g.alpha {
                let car = CarConfig::new(a.car_k, alpha)?.with_scope(a.zscore_scope);
                let rows = pool.install(|| {
                    with_gt
                        .par_iter()
                        .map(|(l, gt)| evaluate_intra_query(l, gt, &g.k, a.ndcg_k, &car))
                        .collect::<Result<Vec<_>, _>>()
                })?;
                let report = aggregate_intra(rows).context("no query could be evaluated")?;
                let dir = if sweep {
                    a.out_dir.join(alpha_dir(alpha))
                } else {
                    a.out_dir.clone()
                };
                fs::create_dir_all(&dir)?;

                let rows_path = dir.join("per_query.csv");
                let mut w = create(&rows_path)?;
                report.write_rows_csv(&mut w)?;
                w.flush()?;
                let hist_path = dir.join("car_histogram.csv");
                let mut w = create(&hist_path)?;
                report.write_histogram_csv(&mut w)?;
                w.flush()?;

                let mut summary = report.summary_json();
                summary["alpha"] = json!(alpha);
                summary["zscore_scope"] = json!(format!("{:?}", a.zscore_scope).to_lowercase());
                summary["skipped"] =
                    json!({"no_ground_truth": no_gt, "no_scored_candidates": empty});
                let summary_path = dir.join("summary.json");
                write_json(&summary_path, &summary)?;
                outputs.extend([rows_path, hist_path, summary_path]);
            }
        }
        Task::Inter => {
            let Some(emb) = &a.embeddings else {
                return Err(usage("inter evaluation needs --embeddings"));
            };
            if a.inter_k == 0 {
                return Err(usage("--inter-k must be at least 1"));
            }
            let store = load_store(emb)?;
            inputs.push(emb.as_path());
            let clip = ClipScore {
                weight: a.clip_weight,
                clamp: !a.no_clip_clamp,
            };
            let rows = pool.install(|| {
                scored
                    .par_iter()
                    .map(|l| evaluate_inter_query(l, a.inter_k, &corpus, &store, &clip))
                    .collect::<Result<Vec<_>, _>>()
            })?;
            let report = aggregate_inter(rows).context("no query could be evaluated")?;
            let missing_ga = report.aggregate.queries - report.aggregate.ga2ga_queries;
            if missing_ga > 0 {
                log::warn!("GA2GA skipped for {missing_ga} query(ies) lacking GA embeddings");
            }
            let rows_path = a.out_dir.join("per_query.csv");
            let mut w = create(&rows_path)?;
            report.write_rows_csv(&mut w)?;
            w.flush()?;
            let mut summary = report.summary_json();
            summary["clip_weight"] = json!(a.clip_weight);
            summary["clip_clamp"] = json!(!a.no_clip_clamp);
            summary["skipped"] = json!({"no_scored_candidates": empty});
            let summary_path = a.out_dir.join("summary.json");
            write_json(&summary_path, &summary)?;
            outputs.extend([rows_path, summary_path]);
        }
    }
    RunManifest::new(config, g.seed, started)
        .inputs(inputs)?
        .write(&outputs, &a.out_dir.join("manifest.json"))
}

fn train(a: &TrainArgs, g: &GlobalOpts, config: Value) -> Result<()> {
    let started = now();
    let corpus = load_corpus(&a.corpus)?;
    let store = load_store(&a.embeddings)?;
    let seed = g.seed.unwrap_or(0);
    let cfg = TrainConfig {
        m: a.m,
        batch_size: a.batch_size,
        steps: a.steps,
        lr: a.lr,
        seed,
        tau: g.tau,
        eval_papers: a.eval_papers,
    };
    let out = train_adapter(&corpus, &store, &cfg, a.objective, a.fusion)?;
    fs::create_dir_all(&a.out_dir).with_context(|| format!("creating {}", a.out_dir.display()))?;

    let adapter_path = a.out_dir.join("adapter.sgem");
    out.adapter
        .to_store()
        .save(&adapter_path)
        .with_context(|| format!("writing {}", adapter_path.display()))?;

    let trace_path = a.out_dir.join("loss_trace.csv");
    let mut w = csv::Writer::from_writer(create(&trace_path)?);
    w.write_record(["step", "loss"])?;
    for (step, loss) in out.trace.iter().enumerate() {
        w.write_record([step.to_string(), format_score(Some(*loss))])?;
    }
    w.flush()?;

    let summary_path = a.out_dir.join("summary.json");
    write_json(
        &summary_path,
        &json!({
            "initial_loss": out.initial_loss,
            "final_loss": out.final_loss,
            "steps": a.steps,
            "seed": seed,
        }),
    )?;
    eprintln!("loss {} -> {}", out.initial_loss, out.final_loss);

    RunManifest::new(config, Some(seed), started)
        .inputs([a.corpus.as_path(), a.embeddings.as_path()])?
        .write(
            &[adapter_path, trace_path, summary_path],
            &a.out_dir.join("manifest.json"),
        )
}
