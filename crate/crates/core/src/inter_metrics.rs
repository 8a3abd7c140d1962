//! Inter-task evaluation: field precision of the recommended graphical
//! abstracts, and similarity statistics between the query and the papers
//! and graphical abstracts it was matched with.

use std::io::Write;

use serde_json::{json, Value};

use crate::corpus::Corpus;
use crate::embed_store::{cosine, EmbeddingStore, EntityKey, VectorError};
use crate::metrics::MetricError;
use crate::retrieval::{format_score, RankedList};
use crate::scalar::{count, lit, Scalar};

/// Weight applied to image-image cosine, following the usual CLIPScore scale.
pub const DEFAULT_CLIP_WEIGHT: f64 = 2.5;

/// Fraction of the first `k` scored candidates whose paper shares the
/// query paper's primary category. Candidate ids are paper ids.
pub fn field_precision_at_k<T: Scalar>(
    list: &RankedList<T>,
    k: usize,
    corpus: &Corpus,
    query_paper_id: &str,
) -> Result<T, MetricError> {
    if k == 0 {
        return Err(MetricError::ZeroK);
    }
    let category = |id: &str| {
        corpus
            .get(id)
            .map(|p| p.primary_category.as_str())
            .ok_or_else(|| MetricError::UnknownCategory(id.to_string()))
    };
    let want = category(query_paper_id)?;
    let top = &list.scored()[..k.min(list.scored_len())];
    if top.is_empty() {
        return Err(MetricError::EmptyList);
    }
    let mut hits = 0usize;
    for e in top {
        if category(&e.candidate_id)? == want {
            hits += 1;
        }
    }
    Ok(count::<T>(hits) / count::<T>(top.len()))
}

/// Population mean and standard deviation of the cosines between `query`
/// and each candidate.
pub fn sim_stats_at_k<T: Scalar>(
    query: &[T],
    candidates: &[Vec<T>],
) -> Result<(T, T), MetricError> {
    let sims = candidates
        .iter()
        .map(|c| cosine(query, c))
        .collect::<Result<Vec<T>, _>>()?;
    mean_std(&sims)
}

fn mean_std<T: Scalar>(xs: &[T]) -> Result<(T, T), MetricError> {
    if xs.is_empty() {
        return Err(MetricError::EmptyList);
    }
    let n: T = count(xs.len());
    let mean = xs.iter().copied().sum::<T>() / n;
    let var = xs.iter().map(|&x| (x - mean) * (x - mean)).sum::<T>() / n;
    Ok((mean, var.sqrt()))
}

/// Image-image CLIPScore-style similarity: `weight * max(cos, 0)`, or the
/// plain scaled cosine with clamping off.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClipScore<T> {
    pub weight: T,
    pub clamp: bool,
}

impl<T: Scalar> Default for ClipScore<T> {
    fn default() -> Self {
        Self {
            weight: lit(DEFAULT_CLIP_WEIGHT),
            clamp: true,
        }
    }
}

impl<T: Scalar> ClipScore<T> {
    pub fn score(&self, u: &[T], v: &[T]) -> Result<T, VectorError> {
        let rho = cosine(u, v)?;
        let rho = if self.clamp { rho.max(T::zero()) } else { rho };
        Ok(self.weight * rho)
    }
}

/// `weight * max(cos(u, v), 0)`.
pub fn clip_score_pair<T: Scalar>(u: &[T], v: &[T], weight: T) -> Result<T, VectorError> {
    ClipScore {
        weight,
        clamp: true,
    }
    .score(u, v)
}

#[derive(Debug, Clone, PartialEq)]
pub struct InterRow<T> {
    pub query_id: String,
    pub k: usize,
    pub field_p: T,
    pub abs2abs_mean: T,
    pub abs2abs_std: T,
    /// `None` when the query or a recommended paper has no GA embedding.
    pub ga2ga: Option<(T, T)>,
}

fn ga_vector<T: Scalar>(
    corpus: &Corpus,
    store: &EmbeddingStore,
    paper_id: &str,
) -> Option<(EntityKey, Vec<T>)> {
    let mut keys = vec![EntityKey::ga_of(paper_id)];
    if let Some(ga) = corpus.get(paper_id).and_then(|p| p.ga.as_ref()) {
        keys.push(EntityKey::figure(paper_id, &ga.ga_figure_id));
    }
    keys.into_iter()
        .find_map(|k| store.vector::<T>(&k).map(|v| (k, v)))
}

fn named(err: VectorError, query: &EntityKey, other: &EntityKey) -> MetricError {
    match err {
        VectorError::ZeroNorm { side: 0 } => MetricError::ZeroNorm(query.to_string()),
        VectorError::ZeroNorm { .. } => MetricError::ZeroNorm(other.to_string()),
        e => e.into(),
    }
}

/// Field precision, abstract-abstract and GA-GA statistics over the first
/// `k` scored recommendations for one query.
pub fn evaluate_inter_query<T: Scalar>(
    list: &RankedList<T>,
    k: usize,
    corpus: &Corpus,
    store: &EmbeddingStore,
    clip: &ClipScore<T>,
) -> Result<InterRow<T>, MetricError> {
    let qid = list.query_id.as_str();
    let field_p = field_precision_at_k(list, k, corpus, qid)?;
    let top = &list.scored()[..k.min(list.scored_len())];

    let abstract_of = |id: &str| {
        let key = EntityKey::abstract_of(id);
        store
            .vector::<T>(&key)
            .map(|v| (key.clone(), v))
            .ok_or_else(|| MetricError::MissingEmbedding(key.to_string()))
    };
    let (qkey, qvec) = abstract_of(qid)?;
    let mut sims = Vec::with_capacity(top.len());
    for e in top {
        let (ckey, cvec) = abstract_of(&e.candidate_id)?;
        sims.push(cosine(&qvec, &cvec).map_err(|err| named(err, &qkey, &ckey))?);
    }
    let (abs2abs_mean, abs2abs_std) = mean_std(&sims)?;

    let ga2ga = match ga_vector::<T>(corpus, store, qid) {
        None => None,
        Some((gkey, gvec)) => {
            let mut scores = Vec::with_capacity(top.len());
            for e in top {
                match ga_vector::<T>(corpus, store, &e.candidate_id) {
                    Some((ckey, cvec)) => scores.push(
                        clip.score(&gvec, &cvec)
                            .map_err(|err| named(err, &gkey, &ckey))?,
                    ),
                    None => {
                        log::debug!(
                            "no GA embedding for `{}`; GA2GA skipped for `{qid}`",
                            e.candidate_id
                        );
                        scores.clear();
                        break;
                    }
                }
            }
            if scores.is_empty() {
                None
            } else {
                Some(mean_std(&scores)?)
            }
        }
    };
    Ok(InterRow {
        query_id: qid.to_string(),
        k,
        field_p,
        abs2abs_mean,
        abs2abs_std,
        ga2ga,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct InterAggregate<T> {
    pub queries: usize,
    pub field_p: T,
    pub abs2abs_mean: T,
    /// Mean of the per-query standard deviations.
    pub abs2abs_std: T,
    /// Queries that contributed GA-GA statistics.
    pub ga2ga_queries: usize,
    pub ga2ga_mean: Option<T>,
    pub ga2ga_std: Option<T>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct InterMetricReport<T> {
    pub k: usize,
    pub rows: Vec<InterRow<T>>,
    pub aggregate: InterAggregate<T>,
}

pub fn aggregate_inter<T: Scalar>(
    rows: Vec<InterRow<T>>,
) -> Result<InterMetricReport<T>, MetricError> {
    let k = rows.first().ok_or(MetricError::NoRows)?.k;
    if rows.iter().any(|r| r.k != k) {
        return Err(MetricError::MixedRows);
    }
    let n = rows.len();
    let avg = |xs: Vec<T>| -> Option<T> {
        (!xs.is_empty()).then(|| xs.iter().copied().sum::<T>() / count::<T>(xs.len()))
    };
    let ga: Vec<(T, T)> = rows.iter().filter_map(|r| r.ga2ga).collect();
    let aggregate = InterAggregate {
        queries: n,
        field_p: avg(rows.iter().map(|r| r.field_p).collect()).expect("nonempty"),
        abs2abs_mean: avg(rows.iter().map(|r| r.abs2abs_mean).collect()).expect("nonempty"),
        abs2abs_std: avg(rows.iter().map(|r| r.abs2abs_std).collect()).expect("nonempty"),
        ga2ga_queries: ga.len(),
        ga2ga_mean: avg(ga.iter().map(|g| g.0).collect()),
        ga2ga_std: avg(ga.iter().map(|g| g.1).collect()),
    };
    Ok(InterMetricReport { k, rows, aggregate })
}

impl<T: Scalar> InterMetricReport<T> {
    pub fn columns(&self) -> Vec<String> {
        let k = self.k;
        vec![
            "query_id".into(),
            format!("field_p_at_{k}"),
            format!("abs2abs_mean_{k}"),
            format!("abs2abs_std_{k}"),
            format!("ga2ga_mean_{k}"),
            format!("ga2ga_std_{k}"),
        ]
    }

    pub fn write_rows_csv<W: Write>(&self, out: W) -> Result<(), MetricError> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(self.columns())?;
        for r in &self.rows {
            w.write_record([
                r.query_id.clone(),
                format_score(Some(r.field_p)),
                format_score(Some(r.abs2abs_mean)),
                format_score(Some(r.abs2abs_std)),
                format_score(r.ga2ga.map(|g| g.0)),
                format_score(r.ga2ga.map(|g| g.1)),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn summary_json(&self) -> Value {
        let a = &self.aggregate;
        let k = self.k;
        let f = |x: Option<T>| x.and_then(|v| v.to_f64());
        json!({
            "queries": a.queries,
            "ga2ga_queries": a.ga2ga_queries,
            "means": {
                format!("field_p_at_{k}"): f(Some(a.field_p)),
                format!("abs2abs_mean_{k}"): f(Some(a.abs2abs_mean)),
                format!("abs2abs_std_{k}"): f(Some(a.abs2abs_std)),
                format!("ga2ga_mean_{k}"): f(a.ga2ga_mean),
                format!("ga2ga_std_{k}"): f(a.ga2ga_std),
            },
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn corpus(cats: &[(&str, &str, bool)]) -> Corpus {
        let lines: Vec<String> = cats
            .iter()
            .map(|(id, cat, ga)| {
                let ga = if *ga { r#"{"ga_figure_id":"f1","ga_type":"Original"}"# } else { "null" };
                format!(
                    r#"{{"paper_id":"{id}","title":"t","abstract":"a","primary_category":"{cat}","split":"train","figures":[{{"figure_id":"f1","caption":"c"}}],"ga":{ga},"teaser_figure_id":null}}"#
                )
            })
            .collect();
        Corpus::parse(&lines.join("\n")).unwrap()
    }

    fn ranked(ids: &[&str]) -> RankedList<f64> {
        RankedList::from_scores(
            "q",
            "t",
            ids.iter()
                .enumerate()
                .map(|(i, id)| (id.to_string(), Some(-(i as f64))))
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn field_precision_counts_matches() {
        let c = corpus(&[
            ("q", "cs.CV", true),
            ("a", "cs.CV", true),
            ("b", "cs.LG", true),
            ("c", "cs.CV", true),
            ("d", "cs.CL", true),
            ("e", "cs.CV", true),
        ]);
        let l = ranked(&["a", "b", "c", "d", "e"]);
        assert_eq!(field_precision_at_k(&l, 5, &c, "q").unwrap(), 0.6);
        assert_eq!(field_precision_at_k(&l, 1, &c, "q").unwrap(), 1.0);
        assert_eq!(field_precision_at_k(&l, 2, &c, "q").unwrap(), 0.5);
        assert!(field_precision_at_k(&ranked(&["zz"]), 1, &c, "q").is_err());
    }

    #[test]
    fn sim_stats_fixture() {
        // tests/oracles/metrics_oracle.py
        let (m, s) = sim_stats_at_k(
            &[1.0, 0.0, 1.0],
            &[
                vec![1.0, 1.0, 0.0],
                vec![0.0, 1.0, 0.0],
                vec![2.0, 0.0, 1.0],
            ],
        )
        .unwrap();
        assert_relative_eq!(m, 0.4828944326835046, max_relative = 1e-12);
        assert_relative_eq!(s, 0.38748716135713397, max_relative = 1e-12);
        let (m1, s1) = sim_stats_at_k(&[1.0, 2.0], &[vec![3.0, -1.0]]).unwrap();
        assert_eq!(s1, 0.0);
        assert_relative_eq!(m1, 1.0 / (50.0_f64).sqrt(), max_relative = 1e-12);
        assert!(sim_stats_at_k(&[1.0, 2.0], &[vec![0.0, 0.0]]).is_err());
    }

    #[test]
    fn clip_score_values() {
        assert_relative_eq!(
            clip_score_pair(&[1.0, 2.0], &[2.0, 4.0], 2.5).unwrap(),
            2.5,
            max_relative = 1e-15
        );
        assert_eq!(
            clip_score_pair(&[1.0, 0.0], &[-1.0, 0.5], 2.5).unwrap(),
            0.0
        );
        assert_relative_eq!(
            clip_score_pair(&[1.0, 2.0, 3.0], &[4.0, 5.0, 6.0], 2.5).unwrap(),
            2.4365796154926907,
            max_relative = 1e-12
        );
        let raw = ClipScore {
            weight: 2.5,
            clamp: false,
        };
        assert_eq!(raw.score(&[1.0, 0.0], &[-1.0, 0.0]).unwrap(), -2.5);
    }

    #[test]
    fn query_row_and_missing_ga() {
        let c = corpus(&[("q", "x", true), ("a", "x", true), ("b", "y", false)]);
        let mut s = EmbeddingStore::new(2).unwrap();
        for (k, v) in [
            ("abstract:q", [1.0, 0.0]),
            ("abstract:a", [1.0, 0.0]),
            ("abstract:b", [0.0, 1.0]),
            ("ga:q", [1.0, 1.0]),
            ("figure:a/f1", [1.0, 1.0]),
        ] {
            s.insert(k.parse().unwrap(), v.to_vec()).unwrap();
        }
        let clip = ClipScore::default();
        let r = evaluate_inter_query(&ranked(&["a", "b"]), 2, &c, &s, &clip).unwrap();
        assert_eq!(r.field_p, 0.5);
        assert_eq!((r.abs2abs_mean, r.abs2abs_std), (0.5, 0.5));
        assert_eq!(r.ga2ga, None);
        let r1 = evaluate_inter_query(&ranked(&["a", "b"]), 1, &c, &s, &clip).unwrap();
        let (gm, gs) = r1.ga2ga.unwrap();
        assert_relative_eq!(gm, 2.5, max_relative = 1e-15);
        assert_eq!(gs, 0.0);

        let rep = aggregate_inter(vec![r, r1]).unwrap_err();
        assert!(matches!(rep, MetricError::MixedRows));
    }

    #[test]
    fn report_columns() {
        let row = InterRow {
            query_id: "q".into(),
            k: 5,
            field_p: 0.6,
            abs2abs_mean: 0.5,
            abs2abs_std: 0.1,
            ga2ga: None,
        };
        let rep = aggregate_inter(vec![row]).unwrap();
        let mut buf = Vec::new();
        rep.write_rows_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(
            text,
            "query_id,field_p_at_5,abs2abs_mean_5,abs2abs_std_5,ga2ga_mean_5,ga2ga_std_5\nq,0.6,0.5,0.1,NA,NA\n"
        );
        assert_eq!(rep.summary_json()["means"]["ga2ga_mean_5"], Value::Null);
    }
}
