//! Synthetic corpora shared by the integration tests.

use garec_core::corpus::Corpus;
use garec_core::embed_store::{EmbeddingStore, EntityKey};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::json;

fn gauss(rng: &mut ChaCha8Rng) -> f64 {
    // Box-Muller
    let u: f64 = rng.gen_range(f64::EPSILON..1.0);
    let v: f64 = rng.gen();
    (-2.0 * u.ln()).sqrt() * (std::f64::consts::TAU * v).cos()
}

fn noisy(rng: &mut ChaCha8Rng, base: &[f64], scale: f64) -> Vec<f64> {
    base.iter().map(|x| x + scale * gauss(rng)).collect()
}

/// Random orthogonal matrix by Gram-Schmidt on Gaussian rows.
fn orthogonal(rng: &mut ChaCha8Rng, dim: usize) -> Vec<Vec<f64>> {
    let mut rows: Vec<Vec<f64>> = Vec::with_capacity(dim);
    while rows.len() < dim {
        let mut v = noisy(rng, &vec![0.0; dim], 1.0);
        for r in &rows {
            let d: f64 = v.iter().zip(r).map(|(a, b)| a * b).sum();
            v.iter_mut().zip(r).for_each(|(a, b)| *a -= d * b);
        }
        let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if n > 1e-6 {
            rows.push(v.iter().map(|x| x / n).collect());
        }
    }
    rows
}

/// Papers in `clusters` topical clusters. Every image vector carries a large
/// shared offset that the abstracts lack, so raw cosines barely separate the
/// GA from the other figures until an adapter learns to project it out.
pub struct ClusterCorpus {
    pub corpus: Corpus,
    pub store: EmbeddingStore,
}

pub fn cluster_corpus(
    train: usize,
    test: usize,
    dim: usize,
    clusters: usize,
    figures: usize,
    seed: u64,
) -> ClusterCorpus {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let centers: Vec<Vec<f64>> = (0..clusters)
        .map(|_| noisy(&mut rng, &vec![0.0; dim], 1.0))
        .collect();
    let rotation = orthogonal(&mut rng, dim);
    let image = |latent: Vec<f64>| -> Vec<f32> {
        rotation
            .iter()
            .map(|row| row.iter().zip(&latent).map(|(a, b)| a * b).sum::<f64>() as f32)
            .collect()
    };
    let mut store = EmbeddingStore::new(dim).unwrap();
    let mut lines = Vec::new();
    for i in 0..train + test {
        let pid = format!("s{i:03}");
        let c = i % clusters;
        let abs = noisy(&mut rng, &centers[c], 0.6);
        let ga = noisy(&mut rng, &abs, 0.8);
        store
            .insert(
                EntityKey::abstract_of(&pid),
                abs.iter().map(|&x| x as f32).collect(),
            )
            .unwrap();
        store
            .insert(EntityKey::figure(&pid, "f0"), image(ga))
            .unwrap();
        for j in 1..=figures {
            let other = rng.gen_range(0..clusters);
            let neg = noisy(&mut rng, &centers[other], 0.6);
            store
                .insert(EntityKey::figure(&pid, &format!("f{j}")), image(neg))
                .unwrap();
        }
        let figs: Vec<_> = (0..=figures)
            .map(|j| json!({"figure_id": format!("f{j}"), "caption": ""}))
            .collect();
        lines.push(
            json!({
                "paper_id": pid,
                "abstract": "",
                "primary_category": format!("cs.C{c}"),
                "split": if i < train { "train" } else { "test" },
                "figures": figs,
                "ga": {"ga_figure_id": "f0", "ga_type": "Original"},
            })
            .to_string(),
        );
    }
    ClusterCorpus {
        corpus: Corpus::parse(&lines.join("\n")).unwrap(),
        store,
    }
}
