use std::collections::BTreeSet;
use std::io::Write;

use serde::Serialize;
use serde_json::{json, Map, Value};

use crate::retrieval::{format_score, RankedList};
use crate::scalar::{count, lit, Scalar};

use super::{car_at_k, mrr, ndcg_at_k, recall_at_k, CarBreakdown, CarConfig, MetricError};

/// Number of equal-width CAR histogram bins over [0, 1].
pub const HISTOGRAM_BINS: usize = 20;

#[derive(Debug, Clone, PartialEq)]
pub struct IntraRow<T> {
    pub query_id: String,
    /// `(k, R@k)` in the order requested.
    pub recall: Vec<(usize, T)>,
    pub mrr: T,
    pub ndcg_k: usize,
    pub ndcg: T,
    pub car_k: usize,
    pub car: CarBreakdown<T>,
}

/// Every intra metric for one query.
pub fn evaluate_intra_query<T: Scalar>(
    list: &RankedList<T>,
    gt_ids: &BTreeSet<String>,
    recall_ks: &[usize],
    ndcg_k: usize,
    car: &CarConfig<T>,
) -> Result<IntraRow<T>, MetricError> {
    let recall = recall_ks
        .iter()
        .map(|&k| recall_at_k(list, gt_ids, k).map(|r| (k, r)))
        .collect::<Result<_, _>>()?;
    Ok(IntraRow {
        query_id: list.query_id.clone(),
        recall,
        mrr: mrr(list, gt_ids)?,
        ndcg_k,
        ndcg: ndcg_at_k(list, gt_ids, ndcg_k)?,
        car_k: car.k,
        car: car_at_k(list, gt_ids, car)?,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HistogramBin {
    pub lo: f64,
    pub hi: f64,
    pub count: usize,
}

/// Bin `i` holds values in `[i/20, (i+1)/20)`; 1.0 falls in the last bin.
pub fn car_histogram(values: impl IntoIterator<Item = f64>) -> Vec<HistogramBin> {
    let mut counts = [0usize; HISTOGRAM_BINS];
    for v in values {
        let i = ((v * HISTOGRAM_BINS as f64).floor().max(0.0) as usize).min(HISTOGRAM_BINS - 1);
        counts[i] += 1;
    }
    counts
        .iter()
        .enumerate()
        .map(|(i, &count)| HistogramBin {
            lo: i as f64 / HISTOGRAM_BINS as f64,
            hi: (i + 1) as f64 / HISTOGRAM_BINS as f64,
            count,
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct IntraAggregate<T> {
    pub queries: usize,
    pub recall: Vec<(usize, T)>,
    pub mrr: T,
    pub ndcg: T,
    pub car: T,
    pub car_ratio: T,
    pub car_confidence: T,
    pub car_entropy: T,
    pub gt_in_top_k: T,
    /// Fraction of queries with CAR strictly above 0.5.
    pub car_above_half: T,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IntraMetricReport<T> {
    pub rows: Vec<IntraRow<T>>,
    pub aggregate: IntraAggregate<T>,
    pub histogram: Vec<HistogramBin>,
}

fn mean<T: Scalar>(xs: impl Iterator<Item = T>, n: usize) -> T {
    xs.sum::<T>() / count::<T>(n)
}

/// Means over rows in the order given.
pub fn aggregate_intra<T: Scalar>(
    rows: Vec<IntraRow<T>>,
) -> Result<IntraMetricReport<T>, MetricError> {
    let first = rows.first().ok_or(MetricError::NoRows)?;
    let ks: Vec<usize> = first.recall.iter().map(|r| r.0).collect();
    let (ndcg_k, car_k) = (first.ndcg_k, first.car_k);
    if rows.iter().any(|r| {
        r.ndcg_k != ndcg_k
            || r.car_k != car_k
            || r.recall.iter().map(|x| x.0).ne(ks.iter().copied())
    }) {
        return Err(MetricError::MixedRows);
    }
    let n = rows.len();
    let recall = ks
        .iter()
        .enumerate()
        .map(|(j, &k)| (k, mean(rows.iter().map(|r| r.recall[j].1), n)))
        .collect();
    let flag = |b: bool| if b { T::one() } else { T::zero() };
    let aggregate = IntraAggregate {
        queries: n,
        recall,
        mrr: mean(rows.iter().map(|r| r.mrr), n),
        ndcg: mean(rows.iter().map(|r| r.ndcg), n),
        car: mean(rows.iter().map(|r| r.car.car), n),
        car_ratio: mean(rows.iter().map(|r| r.car.ratio), n),
        car_confidence: mean(rows.iter().map(|r| r.car.confidence), n),
        car_entropy: mean(rows.iter().map(|r| r.car.entropy), n),
        gt_in_top_k: mean(rows.iter().map(|r| flag(r.car.gt_in_top_k)), n),
        car_above_half: mean(rows.iter().map(|r| flag(r.car.car > lit(0.5))), n),
    };
    let histogram = car_histogram(rows.iter().map(|r| r.car.car.to_f64().unwrap_or(0.0)));
    Ok(IntraMetricReport {
        rows,
        aggregate,
        histogram,
    })
}

fn num<T: Scalar>(x: T) -> String {
    format_score(Some(x))
}

fn json_num<T: Scalar>(x: T) -> Value {
    json!(x.to_f64().unwrap_or(f64::NAN))
}

impl<T: Scalar> IntraMetricReport<T> {
    fn car_k(&self) -> usize {
        self.rows[0].car_k
    }

    pub fn columns(&self) -> Vec<String> {
        let car_k = self.car_k();
        let mut cols = vec!["query_id".to_string()];
        cols.extend(
            self.aggregate
                .recall
                .iter()
                .map(|(k, _)| format!("r_at_{k}")),
        );
        cols.push("mrr".into());
        cols.push(format!("ndcg_at_{}", self.rows[0].ndcg_k));
        cols.push(format!("car_at_{car_k}"));
        cols.extend(
            ["car_ratio", "car_confidence", "car_entropy", "gt_in_top_k"].map(String::from),
        );
        cols
    }

    /// One line per query.
    pub fn write_rows_csv<W: Write>(&self, out: W) -> Result<(), MetricError> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(self.columns())?;
        for r in &self.rows {
            let mut rec = vec![r.query_id.clone()];
            rec.extend(r.recall.iter().map(|&(_, v)| num(v)));
            rec.push(num(r.mrr));
            rec.push(num(r.ndcg));
            rec.push(num(r.car.car));
            rec.push(num(r.car.ratio));
            rec.push(num(r.car.confidence));
            rec.push(num(r.car.entropy));
            rec.push(u8::from(r.car.gt_in_top_k).to_string());
            w.write_record(rec)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn write_histogram_csv<W: Write>(&self, out: W) -> Result<(), MetricError> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["bin_lo", "bin_hi", "count"])?;
        for b in &self.histogram {
            w.write_record([b.lo.to_string(), b.hi.to_string(), b.count.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }

    /// Aggregates and histogram as a JSON object.
    pub fn summary_json(&self) -> Value {
        let a = &self.aggregate;
        let car_k = self.car_k();
        let mut means = Map::new();
        for (k, v) in &a.recall {
            means.insert(format!("r_at_{k}"), json_num(*v));
        }
        means.insert("mrr".into(), json_num(a.mrr));
        means.insert(format!("ndcg_at_{}", self.rows[0].ndcg_k), json_num(a.ndcg));
        means.insert(format!("car_at_{car_k}"), json_num(a.car));
        means.insert("car_ratio".into(), json_num(a.car_ratio));
        means.insert("car_confidence".into(), json_num(a.car_confidence));
        means.insert("car_entropy".into(), json_num(a.car_entropy));
        means.insert("gt_in_top_k".into(), json_num(a.gt_in_top_k));
        json!({
            "queries": a.queries,
            "means": means,
            format!("car_at_{car_k}_above_half"): json_num(a.car_above_half),
            "histogram": self.histogram,
        })
    }
}
