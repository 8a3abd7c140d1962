//! `query_id,candidate_id,raw_score,rank` CSV dump of ranked lists.

use std::io::{Read, Write};

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use crate::scalar::{lit, Scalar};

use super::{RankedList, RetrievalError};

/// Written in place of a score for candidates that could not be scored.
pub const UNSCORED: &str = "NA";

#[derive(Debug, Serialize, Deserialize)]
struct Row {
    query_id: String,
    candidate_id: String,
    raw_score: String,
    rank: usize,
}

/// Shortest decimal that parses back to the same `f64`.
pub fn format_score<T: Scalar>(score: Option<T>) -> String {
    match score {
        Some(s) => format!("{}", s.to_f64().expect("finite score")),
        None => UNSCORED.to_string(),
    }
}

pub fn write_score_matrix<T: Scalar, W: Write>(
    lists: &[RankedList<T>],
    out: W,
) -> Result<(), RetrievalError> {
    let mut w = csv::Writer::from_writer(out);
    for list in lists {
        for (i, e) in list.entries().iter().enumerate() {
            w.serialize(Row {
                query_id: list.query_id.clone(),
                candidate_id: e.candidate_id.clone(),
                raw_score: format_score(e.score),
                rank: i + 1,
            })?;
        }
    }
    if lists.iter().all(RankedList::is_empty) {
        w.write_record(["query_id", "candidate_id", "raw_score", "rank"])?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a dump back into ranked lists, in first-appearance order of
/// queries. Ranks must run 1..n per query and agree with the scores.
pub fn read_score_matrix<T: Scalar, R: Read>(
    input: R,
    method: &str,
) -> Result<Vec<RankedList<T>>, RetrievalError> {
    let mut rdr = csv::Reader::from_reader(input);
    let mut groups: IndexMap<String, Vec<(usize, String, Option<T>)>> = IndexMap::new();
    for (i, row) in rdr.deserialize::<Row>().enumerate() {
        let line = i + 2;
        let row = row?;
        let score = if row.raw_score == UNSCORED {
            None
        } else {
            let v: f64 = row
                .raw_score
                .parse()
                .map_err(|_| RetrievalError::ScoreMatrix {
                    line,
                    message: format!("bad score `{}`", row.raw_score),
                })?;
            Some(lit::<T>(v))
        };
        groups
            .entry(row.query_id)
            .or_default()
            .push((row.rank, row.candidate_id, score));
    }
    let mut lists = Vec::with_capacity(groups.len());
    for (query, mut rows) in groups {
        rows.sort_by_key(|r| r.0);
        if rows.iter().enumerate().any(|(i, r)| r.0 != i + 1) {
            return Err(RetrievalError::ScoreMatrix {
                line: 0,
                message: format!("ranks for query `{query}` are not 1..{}", rows.len()),
            });
        }
        let pairs: Vec<(String, Option<T>)> = rows.into_iter().map(|(_, c, s)| (c, s)).collect();
        let list = RankedList::from_scores(query.clone(), method, pairs.clone())?;
        let consistent = list
            .entries()
            .iter()
            .zip(&pairs)
            .all(|(e, (c, _))| &e.candidate_id == c);
        if !consistent {
            return Err(RetrievalError::ScoreMatrix {
                line: 0,
                message: format!("ranks for query `{query}` disagree with scores"),
            });
        }
        lists.push(list);
    }
    Ok(lists)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_is_exact() {
        let a = RankedList::from_scores(
            "p1",
            "abs2fig",
            vec![
                ("f1".into(), Some(0.1_f64 + 0.2)),
                ("f2".into(), None),
                ("f3".into(), Some(-1e-300)),
                ("f4".into(), Some(0.30000000000000004)),
            ],
        )
        .unwrap();
        let b = RankedList::from_scores("p2", "abs2fig", vec![("x".into(), Some(2.0))]).unwrap();
        let mut buf = Vec::new();
        write_score_matrix(&[a.clone(), b.clone()], &mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("query_id,candidate_id,raw_score,rank\n"));
        assert!(text.contains("p1,f2,NA,4"));
        let back: Vec<RankedList<f64>> = read_score_matrix(&buf[..], "abs2fig").unwrap();
        assert_eq!(back.len(), 2);
        assert_eq!(
            back[0].entries(),
            a.entries()
                .iter()
                .enumerate()
                .map(|(i, e)| {
                    let mut e = e.clone();
                    e.insertion = i;
                    e
                })
                .collect::<Vec<_>>()
                .as_slice()
        );
        assert_eq!(back[1].scores(), vec![2.0]);
    }

    #[test]
    fn rejects_inconsistent_ranks() {
        let bad = "query_id,candidate_id,raw_score,rank\nq,a,0.1,1\nq,b,0.9,2\n";
        assert!(read_score_matrix::<f64, _>(bad.as_bytes(), "m").is_err());
        let gap = "query_id,candidate_id,raw_score,rank\nq,a,0.9,1\nq,b,0.1,3\n";
        assert!(read_score_matrix::<f64, _>(gap.as_bytes(), "m").is_err());
        let na_first = "query_id,candidate_id,raw_score,rank\nq,a,NA,1\nq,b,0.1,2\n";
        assert!(read_score_matrix::<f64, _>(na_first.as_bytes(), "m").is_err());
    }

    #[test]
    fn tied_scores_keep_dump_order() {
        let text = "query_id,candidate_id,raw_score,rank\nq,b,0.5,1\nq,a,0.5,2\n";
        let l: Vec<RankedList<f64>> = read_score_matrix(text.as_bytes(), "m").unwrap();
        assert_eq!(l[0].rank_of("b"), Some(1));
    }
}
