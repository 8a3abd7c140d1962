use std::str::FromStr;

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::corpus::{Corpus, PaperRecord, Split};
use crate::embed_store::{fuse_hadamard, EmbeddingStore, EntityKey};
use crate::scalar::{lit, Scalar};

use super::{
    info_nce_grad, loss_inter, loss_inter_grad, loss_intra, ContrastiveError, LinearAdapter,
    LossBatch,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Objective {
    Intra,
    Inter,
}

impl FromStr for Objective {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "intra" => Ok(Objective::Intra),
            "inter" => Ok(Objective::Inter),
            other => Err(format!("unknown objective `{other}`")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig<T> {
    /// Non-GA figures sampled per paper; fewer available are zero-padded.
    pub m: usize,
    pub batch_size: usize,
    pub steps: usize,
    pub lr: T,
    pub seed: u64,
    pub tau: T,
    /// Cap on the number of training papers in the fixed evaluation set.
    pub eval_papers: usize,
}

impl<T: Scalar> Default for TrainConfig<T> {
    fn default() -> Self {
        Self {
            m: 4,
            batch_size: 8,
            steps: 200,
            lr: lit(1.0),
            seed: 0,
            tau: lit(super::DEFAULT_TAU),
            eval_papers: 1024,
        }
    }
}

impl<T: Scalar> TrainConfig<T> {
    fn validate(&self) -> Result<(), ContrastiveError> {
        if self.m == 0 {
            return Err(ContrastiveError::Config("m must be at least 1".into()));
        }
        if self.batch_size == 0 {
            return Err(ContrastiveError::Config(
                "batch size must be at least 1".into(),
            ));
        }
        if !self.lr.is_finite() || self.lr < T::zero() {
            return Err(ContrastiveError::Config(
                "learning rate must be finite and >= 0".into(),
            ));
        }
        if !self.tau.is_finite() || self.tau <= T::zero() {
            return Err(ContrastiveError::Temperature(
                self.tau.to_f64().unwrap_or(f64::NAN),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainOutcome<T> {
    pub adapter: LinearAdapter<T>,
    /// Loss on the fixed evaluation set before each step, plus one entry
    /// after the last step (`steps + 1` values).
    pub trace: Vec<T>,
    pub initial_loss: T,
    pub final_loss: T,
}

struct Image<T> {
    raw: Vec<T>,
    caption: Option<Vec<T>>,
}

struct TrainPaper<T> {
    abstract_vec: Vec<T>,
    ga: Image<T>,
    others: Vec<Image<T>>,
}

fn fetch<T: Scalar>(store: &EmbeddingStore, key: &EntityKey) -> Result<Vec<T>, ContrastiveError> {
    store
        .vector(key)
        .ok_or_else(|| ContrastiveError::MissingEmbedding(key.to_string()))
}

fn image<T: Scalar>(
    store: &EmbeddingStore,
    keys: &[EntityKey],
    caption: Option<EntityKey>,
) -> Result<Image<T>, ContrastiveError> {
    let raw = keys
        .iter()
        .find_map(|k| store.vector(k))
        .ok_or_else(|| ContrastiveError::MissingEmbedding(keys[0].to_string()))?;
    let caption = caption.map(|k| fetch(store, &k)).transpose()?;
    Ok(Image { raw, caption })
}

fn load_paper<T: Scalar>(
    paper: &PaperRecord,
    store: &EmbeddingStore,
    objective: Objective,
    fusion: bool,
) -> Result<Option<TrainPaper<T>>, ContrastiveError> {
    let Some(ga) = &paper.ga else {
        return Ok(None);
    };
    let pid = paper.paper_id.as_str();
    let ga_fig = ga.ga_figure_id.as_str();
    let cap = |f: &str| fusion.then(|| EntityKey::figure_caption(pid, f));
    let ga_keys = match objective {
        Objective::Intra => vec![EntityKey::figure(pid, ga_fig)],
        Objective::Inter => vec![EntityKey::ga_of(pid), EntityKey::figure(pid, ga_fig)],
    };
    let ga_image = image(store, &ga_keys, cap(ga_fig))?;
    let others = match objective {
        Objective::Intra => paper
            .figures
            .iter()
            .filter(|f| f.figure_id != ga_fig)
            .map(|f| {
                image(
                    store,
                    &[EntityKey::figure(pid, &f.figure_id)],
                    cap(&f.figure_id),
                )
            })
            .collect::<Result<Vec<_>, _>>()?,
        Objective::Inter => Vec::new(),
    };
    Ok(Some(TrainPaper {
        abstract_vec: fetch(store, &EntityKey::abstract_of(pid))?,
        ga: ga_image,
        others,
    }))
}

fn project<T: Scalar>(
    adapter: &LinearAdapter<T>,
    img: &Image<T>,
) -> Result<Vec<T>, ContrastiveError> {
    let z = adapter.apply(&img.raw)?;
    match &img.caption {
        Some(c) => Ok(fuse_hadamard(&z, c)?),
        None => Ok(z),
    }
}

/// Builds the intra batch for `papers`, with `negatives[i]` naming which
/// non-GA figures of each paper fill its `m` slots.
fn intra_batch<T: Scalar>(
    papers: &[&TrainPaper<T>],
    negatives: &[Vec<usize>],
    adapter: &LinearAdapter<T>,
    m: usize,
    tau: T,
) -> Result<LossBatch<T>, ContrastiveError> {
    let dim = adapter.rows();
    let mut batch = LossBatch {
        queries: Vec::with_capacity(papers.len()),
        positives: Vec::with_capacity(papers.len()),
        negatives: Vec::with_capacity(papers.len()),
        masks: Vec::with_capacity(papers.len()),
        tau,
    };
    for (paper, chosen) in papers.iter().zip(negatives) {
        batch.queries.push(paper.abstract_vec.clone());
        batch.positives.push(project(adapter, &paper.ga)?);
        let mut negs = Vec::with_capacity(m);
        let mut mask = Vec::with_capacity(m);
        for &j in chosen {
            negs.push(project(adapter, &paper.others[j])?);
            mask.push(true);
        }
        while negs.len() < m {
            negs.push(vec![T::zero(); dim]);
            mask.push(false);
        }
        batch.negatives.push(negs);
        batch.masks.push(mask);
    }
    Ok(batch)
}

fn load_all<T: Scalar>(
    corpus: &Corpus,
    store: &EmbeddingStore,
    objective: Objective,
    fusion: bool,
) -> Result<Vec<TrainPaper<T>>, ContrastiveError> {
    let mut out = Vec::new();
    for p in corpus.split(Split::Train) {
        if let Some(tp) = load_paper(p, store, objective, fusion)? {
            out.push(tp);
        }
    }
    if out.is_empty() {
        return Err(ContrastiveError::EmptyTrainSplit);
    }
    if objective == Objective::Inter && out.len() < 2 {
        return Err(ContrastiveError::BatchTooSmall(out.len()));
    }
    Ok(out)
}

fn eval_loss<T: Scalar>(
    papers: &[TrainPaper<T>],
    adapter: &LinearAdapter<T>,
    config: &TrainConfig<T>,
    objective: Objective,
) -> Result<T, ContrastiveError> {
    let subset: Vec<&TrainPaper<T>> = papers.iter().take(config.eval_papers.max(2)).collect();
    match objective {
        Objective::Intra => {
            let negs: Vec<Vec<usize>> = subset
                .iter()
                .map(|p| (0..p.others.len().min(config.m)).collect())
                .collect();
            loss_intra(&intra_batch(&subset, &negs, adapter, config.m, config.tau)?)
        }
        Objective::Inter => {
            let abstracts: Vec<Vec<T>> = subset.iter().map(|p| p.abstract_vec.clone()).collect();
            let gas = subset
                .iter()
                .map(|p| project(adapter, &p.ga))
                .collect::<Result<Vec<_>, _>>()?;
            loss_inter(&abstracts, &gas, config.tau)
        }
    }
}

/// Loss of `adapter` on the fixed evaluation set: the first
/// `config.eval_papers` training papers, each with its first `m` non-GA
/// figures in document order.
pub fn evaluation_batch<T: Scalar>(
    corpus: &Corpus,
    store: &EmbeddingStore,
    adapter: &LinearAdapter<T>,
    config: &TrainConfig<T>,
    objective: Objective,
    fusion: bool,
) -> Result<T, ContrastiveError> {
    config.validate()?;
    let papers = load_all(corpus, store, objective, fusion)?;
    eval_loss(&papers, adapter, config, objective)
}

/// Plain gradient descent on an identity-initialized adapter applied to the
/// image side (figures and graphical abstracts). Deterministic given the seed.
pub fn train_adapter<T: Scalar>(
    corpus: &Corpus,
    store: &EmbeddingStore,
    config: &TrainConfig<T>,
    objective: Objective,
    fusion: bool,
) -> Result<TrainOutcome<T>, ContrastiveError> {
    config.validate()?;
    let papers = load_all(corpus, store, objective, fusion)?;
    let mut adapter = LinearAdapter::identity(store.dim());
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut trace = Vec::with_capacity(config.steps + 1);

    for _ in 0..config.steps {
        trace.push(eval_loss(&papers, &adapter, config, objective)?);
        let picked = sample(&mut rng, papers.len(), config.batch_size.min(papers.len())).into_vec();
        let chosen: Vec<&TrainPaper<T>> = picked.iter().map(|&i| &papers[i]).collect();
        let mut grad = adapter.zeros_like();
        match objective {
            Objective::Intra => {
                let negs: Vec<Vec<usize>> = chosen
                    .iter()
                    .map(|p| {
                        let n = p.others.len();
                        sample(&mut rng, n, config.m.min(n)).into_vec()
                    })
                    .collect();
                let batch = intra_batch(&chosen, &negs, &adapter, config.m, config.tau)?;
                let g = info_nce_grad(&batch)?;
                for (i, paper) in chosen.iter().enumerate() {
                    accumulate(&mut grad, &g.positives[i], &paper.ga);
                    for (slot, &j) in negs[i].iter().enumerate() {
                        accumulate(&mut grad, &g.negatives[i][slot], &paper.others[j]);
                    }
                }
            }
            Objective::Inter => {
                if chosen.len() < 2 {
                    return Err(ContrastiveError::BatchTooSmall(chosen.len()));
                }
                let abstracts: Vec<Vec<T>> =
                    chosen.iter().map(|p| p.abstract_vec.clone()).collect();
                let gas = chosen
                    .iter()
                    .map(|p| project(&adapter, &p.ga))
                    .collect::<Result<Vec<_>, _>>()?;
                let (_, _, d_gas) = loss_inter_grad(&abstracts, &gas, config.tau)?;
                for (paper, g) in chosen.iter().zip(&d_gas) {
                    accumulate(&mut grad, g, &paper.ga);
                }
            }
        }
        adapter.axpy(-config.lr, &grad);
    }
    trace.push(eval_loss(&papers, &adapter, config, objective)?);
    Ok(TrainOutcome {
        initial_loss: trace[0],
        final_loss: *trace.last().expect("trace has at least one entry"),
        adapter,
        trace,
    })
}

/// dL/dW += (dL/dz * caption) x^T for `z = (W x) * caption`.
fn accumulate<T: Scalar>(grad: &mut LinearAdapter<T>, dz: &[T], img: &Image<T>) {
    match &img.caption {
        Some(c) => {
            let dwx: Vec<T> = dz.iter().zip(c).map(|(&g, &ci)| g * ci).collect();
            grad.add_outer(T::one(), &dwx, &img.raw);
        }
        None => grad.add_outer(T::one(), dz, &img.raw),
    }
}
