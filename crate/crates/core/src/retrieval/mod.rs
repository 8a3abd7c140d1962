//! Candidate sets for both tasks, per-method relevance scoring and ranking.
//!
//! Intra ranks a paper's own figures; inter ranks the graphical abstracts
//! of other papers in a reference split. Candidate order never feeds into a
//! score; it only breaks ties.

mod ranked;
mod score_matrix;

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::contrastive::{ContrastiveError, LinearAdapter};
use crate::corpus::{
    clean_abstract, clean_caption, ground_truth_set, Corpus, GtPolicy, NoGroundTruth, Split,
};
use crate::embed_store::{cosine, fuse_hadamard, EmbeddingStore, EntityKey, VectorError};
use crate::lexical::{cider, normalize, rouge_l, Bm25Index, IdfTable, TokenSeq};
use crate::scalar::{lit, Scalar};

pub use ranked::{RankedEntry, RankedList, TIE_BREAK};
pub use score_matrix::{format_score, read_score_matrix, write_score_matrix, UNSCORED};

#[derive(Debug, Error)]
pub enum RetrievalError {
    #[error("unknown paper `{0}`")]
    UnknownPaper(String),
    #[error(transparent)]
    NoGroundTruth(#[from] NoGroundTruth),
    #[error("missing embedding `{0}`")]
    MissingEmbedding(String),
    #[error("zero-norm embedding `{0}`")]
    ZeroNorm(String),
    #[error(transparent)]
    Vector(#[from] VectorError),
    #[error(transparent)]
    Adapter(#[from] ContrastiveError),
    #[error("method `{0}` needs an embedding store")]
    NeedsStore(Method),
    #[error("method `random` needs a seed")]
    NeedsSeed,
    #[error("method `abs2cap-cider` needs an idf table")]
    NeedsIdf,
    #[error("non-finite score for `{candidate}` in query `{query}`")]
    NonFiniteScore { query: String, candidate: String },
    #[error("candidate `{candidate}` listed twice in query `{query}`")]
    DuplicateCandidate { query: String, candidate: String },
    #[error("score matrix line {line}: {message}")]
    ScoreMatrix { line: usize, message: String },
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Task {
    Intra,
    Inter,
}

impl Task {
    pub fn as_str(self) -> &'static str {
        match self {
            Task::Intra => "intra",
            Task::Inter => "inter",
        }
    }
}

impl fmt::Display for Task {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Task {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "intra" => Ok(Task::Intra),
            "inter" => Ok(Task::Inter),
            other => Err(format!("unknown task `{other}`")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Method {
    RougeL,
    Bm25,
    Cider,
    Abs2Fig,
    Abs2FigCap,
    Random,
}

impl Method {
    pub const ALL: [Method; 6] = [
        Method::RougeL,
        Method::Bm25,
        Method::Cider,
        Method::Abs2Fig,
        Method::Abs2FigCap,
        Method::Random,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Method::RougeL => "abs2cap-rougeL",
            Method::Bm25 => "abs2cap-bm25",
            Method::Cider => "abs2cap-cider",
            Method::Abs2Fig => "abs2fig",
            Method::Abs2FigCap => "abs2fig-cap",
            Method::Random => "random",
        }
    }

    pub fn needs_store(self) -> bool {
        matches!(self, Method::Abs2Fig | Method::Abs2FigCap)
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = String;

    /// Accepts the canonical names and the short forms `rougeL`, `bm25`, `cider`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let short = s.strip_prefix("abs2cap-").unwrap_or(s);
        match short.to_ascii_lowercase().as_str() {
            "rougel" | "rouge-l" => Ok(Method::RougeL),
            "bm25" => Ok(Method::Bm25),
            "cider" => Ok(Method::Cider),
            "abs2fig" => Ok(Method::Abs2Fig),
            "abs2fig-cap" => Ok(Method::Abs2FigCap),
            "random" => Ok(Method::Random),
            _ => Err(format!("unknown method `{s}`")),
        }
    }
}

/// One rankable item: a figure of the query paper (intra) or another
/// paper's graphical abstract (inter).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Candidate {
    /// Figure id for intra, the owning paper's id for inter.
    pub id: String,
    pub paper_id: String,
    pub figure_id: String,
    pub subfigure_ids: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CandidateSet {
    pub query_paper_id: String,
    pub task: Task,
    pub candidates: Vec<Candidate>,
    /// Empty for inter.
    pub gt_ids: BTreeSet<String>,
}

/// Intra: every figure of the paper in document order. Inter: the GA of
/// every other paper in `reference`, in corpus order.
pub fn build_candidates(
    corpus: &Corpus,
    paper_id: &str,
    task: Task,
    reference: Split,
    policy: GtPolicy,
) -> Result<CandidateSet, RetrievalError> {
    let paper = corpus
        .get(paper_id)
        .ok_or_else(|| RetrievalError::UnknownPaper(paper_id.to_string()))?;
    let (candidates, gt_ids) = match task {
        Task::Intra => {
            let gt = ground_truth_set(paper, policy)?;
            let cands = paper
                .figures
                .iter()
                .map(|f| Candidate {
                    id: f.figure_id.clone(),
                    paper_id: paper.paper_id.clone(),
                    figure_id: f.figure_id.clone(),
                    subfigure_ids: f
                        .subfigures
                        .iter()
                        .map(|s| s.subfigure_id.clone())
                        .collect(),
                })
                .collect();
            (cands, gt)
        }
        Task::Inter => {
            let cands = corpus
                .split(reference)
                .filter(|p| p.paper_id != paper.paper_id)
                .filter_map(|p| {
                    p.ga.as_ref().map(|ga| Candidate {
                        id: p.paper_id.clone(),
                        paper_id: p.paper_id.clone(),
                        figure_id: ga.ga_figure_id.clone(),
                        subfigure_ids: Vec::new(),
                    })
                })
                .collect();
            (cands, BTreeSet::new())
        }
    };
    Ok(CandidateSet {
        query_paper_id: paper.paper_id.clone(),
        task,
        candidates,
        gt_ids,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct MethodConfig<T> {
    pub method: Method,
    pub seed: Option<u64>,
    /// Applied to image vectors before fusion and similarity.
    pub adapter: Option<LinearAdapter<T>>,
    /// Let subfigure captions compete with the figure caption in lexical scoring.
    pub subfigure_captions: bool,
}

impl<T> MethodConfig<T> {
    pub fn new(method: Method) -> Self {
        Self {
            method,
            seed: None,
            adapter: None,
            subfigure_captions: true,
        }
    }
}

/// Caption texts a candidate is lexically scored by: its own caption first,
/// then subfigure captions when enabled.
fn caption_texts(corpus: &Corpus, c: &Candidate, with_subfigures: bool) -> Vec<String> {
    let Some(fig) = corpus.get(&c.paper_id).and_then(|p| p.figure(&c.figure_id)) else {
        return Vec::new();
    };
    let mut out = vec![clean_caption(&fig.caption)];
    if with_subfigures {
        out.extend(
            fig.subfigures
                .iter()
                .filter(|s| c.subfigure_ids.contains(&s.subfigure_id))
                .map(|s| clean_caption(&s.caption)),
        );
    }
    out
}

/// CIDEr idf over every distinct candidate caption across `sets`.
pub fn caption_idf(corpus: &Corpus, sets: &[CandidateSet], with_subfigures: bool) -> IdfTable {
    let mut seen = BTreeSet::new();
    let mut docs = Vec::new();
    for set in sets {
        for c in &set.candidates {
            if seen.insert((c.paper_id.clone(), c.figure_id.clone())) {
                docs.extend(
                    caption_texts(corpus, c, with_subfigures)
                        .iter()
                        .map(|t| normalize(t)),
                );
            }
        }
    }
    IdfTable::build(docs.iter())
}

/// FNV-1a, used to give every query its own random stream.
fn fnv1a(s: &str) -> u64 {
    s.bytes().fold(0xcbf2_9ce4_8422_2325, |h, b| {
        (h ^ u64::from(b)).wrapping_mul(0x0100_0000_01b3)
    })
}

pub struct Scorer<'a, T> {
    corpus: &'a Corpus,
    store: Option<&'a EmbeddingStore>,
    config: MethodConfig<T>,
    idf: Option<IdfTable>,
}

impl<'a, T: Scalar> Scorer<'a, T> {
    pub fn new(
        corpus: &'a Corpus,
        store: Option<&'a EmbeddingStore>,
        config: MethodConfig<T>,
    ) -> Result<Self, RetrievalError> {
        if config.method.needs_store() && store.is_none() {
            return Err(RetrievalError::NeedsStore(config.method));
        }
        if config.method == Method::Random && config.seed.is_none() {
            return Err(RetrievalError::NeedsSeed);
        }
        if let (Some(a), Some(s)) = (&config.adapter, store) {
            if a.cols() != s.dim() {
                return Err(ContrastiveError::Shape(format!(
                    "adapter takes {} inputs but embeddings have dim {}",
                    a.cols(),
                    s.dim()
                ))
                .into());
            }
        }
        Ok(Self {
            corpus,
            store,
            config,
            idf: None,
        })
    }

    pub fn with_idf(mut self, idf: IdfTable) -> Self {
        self.idf = Some(idf);
        self
    }

    pub fn method(&self) -> Method {
        self.config.method
    }

    pub fn score(&self, set: &CandidateSet) -> Result<RankedList<T>, RetrievalError> {
        let scores = match self.config.method {
            Method::RougeL | Method::Bm25 | Method::Cider => self.lexical(set)?,
            Method::Abs2Fig => self.embedding(set, false)?,
            Method::Abs2FigCap => self.embedding(set, true)?,
            Method::Random => self.random(set),
        };
        let pairs = set
            .candidates
            .iter()
            .zip(scores)
            .map(|(c, s)| (c.id.clone(), s))
            .collect();
        RankedList::from_scores(
            set.query_paper_id.clone(),
            self.config.method.as_str(),
            pairs,
        )
    }

    fn lexical(&self, set: &CandidateSet) -> Result<Vec<Option<T>>, RetrievalError> {
        let paper = self
            .corpus
            .get(&set.query_paper_id)
            .ok_or_else(|| RetrievalError::UnknownPaper(set.query_paper_id.clone()))?;
        let query = normalize(&clean_abstract(&paper.abstract_text));
        let docs: Vec<Vec<TokenSeq>> = set
            .candidates
            .iter()
            .map(|c| {
                caption_texts(self.corpus, c, self.config.subfigure_captions)
                    .iter()
                    .map(|t| normalize(t))
                    .collect()
            })
            .collect();
        let best = |f: &dyn Fn(&TokenSeq) -> f64| -> Vec<Option<T>> {
            docs.iter()
                .map(|ds| ds.iter().map(f).reduce(f64::max).map(lit::<T>))
                .collect()
        };
        Ok(match self.config.method {
            Method::RougeL => best(&|d| rouge_l(d, &query)),
            Method::Bm25 => {
                let index = Bm25Index::build(docs.iter().flatten());
                best(&|d| index.score(&query, d))
            }
            Method::Cider => {
                let idf = self.idf.as_ref().ok_or(RetrievalError::NeedsIdf)?;
                best(&|d| cider(d, &query, idf))
            }
            _ => unreachable!("lexical scoring called for an embedding method"),
        })
    }

    fn image_vector(&self, keys: &[EntityKey]) -> Option<(EntityKey, Vec<T>)> {
        let store = self.store?;
        keys.iter()
            .find_map(|k| store.vector::<T>(k).map(|v| (k.clone(), v)))
    }

    fn embedding(&self, set: &CandidateSet, fused: bool) -> Result<Vec<Option<T>>, RetrievalError> {
        let store = self
            .store
            .ok_or(RetrievalError::NeedsStore(self.config.method))?;
        let pid = set.query_paper_id.as_str();
        let qkey = EntityKey::abstract_of(pid);
        let query: Vec<T> = store
            .vector(&qkey)
            .ok_or_else(|| RetrievalError::MissingEmbedding(qkey.to_string()))?;

        let mut out = Vec::with_capacity(set.candidates.len());
        for c in &set.candidates {
            // (image keys in fallback order, caption key) for the candidate
            // itself and each of its subfigures.
            let mut parts = Vec::with_capacity(1 + c.subfigure_ids.len());
            match set.task {
                Task::Intra => {
                    parts.push((
                        vec![EntityKey::figure(&c.paper_id, &c.figure_id)],
                        EntityKey::figure_caption(&c.paper_id, &c.figure_id),
                    ));
                    for s in &c.subfigure_ids {
                        parts.push((
                            vec![EntityKey::subfigure(&c.paper_id, &c.figure_id, s)],
                            EntityKey::subfigure_caption(&c.paper_id, &c.figure_id, s),
                        ));
                    }
                }
                Task::Inter => parts.push((
                    vec![
                        EntityKey::ga_of(&c.paper_id),
                        EntityKey::figure(&c.paper_id, &c.figure_id),
                    ],
                    EntityKey::figure_caption(&c.paper_id, &c.figure_id),
                )),
            }

            let mut best: Option<T> = None;
            for (image_keys, caption_key) in parts {
                let Some((ikey, raw)) = self.image_vector(&image_keys) else {
                    continue;
                };
                let mut v = match &self.config.adapter {
                    Some(a) => a.apply(&raw)?,
                    None => raw,
                };
                let mut name = ikey.to_string();
                if fused {
                    let Some(cap) = store.vector::<T>(&caption_key) else {
                        continue;
                    };
                    v = fuse_hadamard(&v, &cap)?;
                    name = format!("{ikey} * {caption_key}");
                }
                let s = match cosine(&query, &v) {
                    Ok(s) => s,
                    Err(VectorError::ZeroNorm { side: 0 }) => {
                        return Err(RetrievalError::ZeroNorm(qkey.to_string()))
                    }
                    Err(VectorError::ZeroNorm { .. }) => {
                        return Err(RetrievalError::ZeroNorm(name))
                    }
                    Err(e) => return Err(e.into()),
                };
                best = Some(best.map_or(s, |b| b.max(s)));
            }
            out.push(best);
        }
        Ok(out)
    }

    fn random(&self, set: &CandidateSet) -> Vec<Option<T>> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.config.seed.expect("checked in new"));
        rng.set_stream(fnv1a(&set.query_paper_id));
        set.candidates
            .iter()
            .map(|_| Some(lit::<T>(rng.gen::<f64>())))
            .collect()
    }
}
