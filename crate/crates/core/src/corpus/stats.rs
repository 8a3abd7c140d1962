use std::collections::BTreeMap;

use serde::Serialize;

use super::{whitespace_tokens, Corpus, Split};

/// Mean, population standard deviation and maximum of a count series.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct LengthSummary {
    pub count: usize,
    pub mean: f64,
    pub std: f64,
    pub max: usize,
}

impl LengthSummary {
    pub fn of(values: &[usize]) -> Self {
        if values.is_empty() {
            return Self::default();
        }
        let n = values.len() as f64;
        let mean = values.iter().map(|&v| v as f64).sum::<f64>() / n;
        let var = values
            .iter()
            .map(|&v| (v as f64 - mean).powi(2))
            .sum::<f64>()
            / n;
        Self {
            count: values.len(),
            mean,
            std: var.sqrt(),
            max: values.iter().copied().max().unwrap_or(0),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct CorpusStats {
    pub papers: usize,
    pub categories: BTreeMap<String, usize>,
    pub title_tokens: LengthSummary,
    pub abstract_tokens: LengthSummary,
    pub caption_tokens: LengthSummary,
    pub figures_per_paper: LengthSummary,
    /// A figure with subfigures counts once per subfigure.
    pub figures_per_paper_with_subfigures: LengthSummary,
}

/// Summary over one split, or the whole corpus when `split` is `None`.
pub fn compute_stats(corpus: &Corpus, split: Option<Split>) -> CorpusStats {
    let papers: Vec<_> = corpus
        .papers()
        .iter()
        .filter(|p| split.is_none_or(|s| p.split == s))
        .collect();
    let mut categories = BTreeMap::new();
    for p in &papers {
        *categories.entry(p.primary_category.clone()).or_insert(0) += 1;
    }
    let titles: Vec<usize> = papers.iter().map(|p| whitespace_tokens(&p.title)).collect();
    let abstracts: Vec<usize> = papers
        .iter()
        .map(|p| whitespace_tokens(&p.abstract_text))
        .collect();
    let captions: Vec<usize> = papers
        .iter()
        .flat_map(|p| p.figures.iter().map(|f| whitespace_tokens(&f.caption)))
        .collect();
    let figures: Vec<usize> = papers.iter().map(|p| p.figures.len()).collect();
    let with_subs: Vec<usize> = papers
        .iter()
        .map(|p| p.figures.iter().map(|f| f.subfigures.len().max(1)).sum())
        .collect();
    CorpusStats {
        papers: papers.len(),
        categories,
        title_tokens: LengthSummary::of(&titles),
        abstract_tokens: LengthSummary::of(&abstracts),
        caption_tokens: LengthSummary::of(&captions),
        figures_per_paper: LengthSummary::of(&figures),
        figures_per_paper_with_subfigures: LengthSummary::of(&with_subs),
    }
}
