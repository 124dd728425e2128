//! Synthetic corpora with known ground truth, for tests, benches and the
//! acceptance runs.

use rand::distr::weighted::WeightedIndex;
use rand::Rng;
use rand_distr::{Distribution, Gamma, Normal};

use super::{FeatureDocument, SymbolDocument};
use crate::error::{Error, Result};
use crate::math::argmax_first;
use crate::rng::{seeded, SeededRng};

/// Documents drawn from the LDA generative process, with the per-document
/// topic proportions that generated them.
#[derive(Debug, Clone)]
pub struct SyntheticLdaCorpus {
    pub docs: Vec<SymbolDocument>,
    pub thetas: Vec<Vec<f64>>,
}

impl SyntheticLdaCorpus {
    /// argmax of each generating θ (lowest index on ties).
    pub fn dominant_topics(&self) -> Vec<usize> {
        self.thetas.iter().map(|t| argmax_first(t)).collect()
    }
}

/// Samples θ ~ Dir(α·1) in log space so tiny concentrations cannot underflow
/// every component to zero.
pub fn sample_dirichlet(rng: &mut SeededRng, alpha: f64, k: usize) -> Vec<f64> {
    let log_g: Vec<f64> = (0..k)
        .map(|_| {
            if alpha >= 1.0 {
                let g: f64 = Gamma::new(alpha, 1.0).expect("alpha > 0").sample(rng);
                g.ln()
            } else {
                // Gamma(a) = Gamma(a + 1) · U^{1/a}
                let g: f64 = Gamma::new(alpha + 1.0, 1.0).expect("alpha > 0").sample(rng);
                let u: f64 = 1.0 - rng.random::<f64>();
                g.ln() + u.ln() / alpha
            }
        })
        .collect();
    let mut theta = log_g;
    crate::math::normalize_log_in_place(&mut theta);
    theta
}

/// Draws `num_docs` documents of `doc_len` symbols: θ_m ~ Dir(α), then per
/// token z ~ Mult(θ_m) and w ~ Mult(β_z). `beta` holds K rows over V symbols.
pub fn generate_synthetic_lda_corpus(
    alpha: f64,
    beta: &[Vec<f64>],
    num_docs: usize,
    doc_len: usize,
    seed: u64,
) -> Result<SyntheticLdaCorpus> {
    if !(alpha > 0.0) || !alpha.is_finite() {
        return Err(Error::InvalidArgument(format!("alpha must be positive, got {alpha}")));
    }
    if beta.is_empty() {
        return Err(Error::InvalidArgument("beta has no rows".into()));
    }
    if num_docs == 0 || doc_len == 0 {
        return Err(Error::InvalidArgument("num_docs and doc_len must be >= 1".into()));
    }
    let vocab = beta[0].len();
    let mut word_dists = Vec::with_capacity(beta.len());
    for (k, row) in beta.iter().enumerate() {
        if row.len() != vocab {
            return Err(Error::dims(format!("beta row {k}"), vocab, row.len()));
        }
        let sum: f64 = row.iter().sum();
        if row.iter().any(|&p| !(p >= 0.0)) || (sum - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidArgument(format!(
                "beta row {k} is not a probability distribution (sum {sum})"
            )));
        }
        word_dists.push(WeightedIndex::new(row).map_err(|e| {
            Error::InvalidArgument(format!("beta row {k}: {e}"))
        })?);
    }
    let k = beta.len();
    let mut rng = seeded(seed);
    let mut docs = Vec::with_capacity(num_docs);
    let mut thetas = Vec::with_capacity(num_docs);
    for m in 0..num_docs {
        let theta = sample_dirichlet(&mut rng, alpha, k);
        let topic_dist = WeightedIndex::new(&theta)
            .map_err(|e| Error::Numerical(format!("theta for document {m}: {e}")))?;
        let symbols = (0..doc_len)
            .map(|_| {
                let z = topic_dist.sample(&mut rng);
                word_dists[z].sample(&mut rng)
            })
            .collect();
        docs.push(SymbolDocument::new(format!("doc{m:05}"), None, symbols));
        thetas.push(theta);
    }
    Ok(SyntheticLdaCorpus { docs, thetas })
}

/// Samples `n_per_cluster` frames around each center with isotropic noise.
/// Returns frames (cluster-major order) and the generating cluster index.
pub fn gaussian_clusters(
    centers: &[Vec<f64>],
    std: f64,
    n_per_cluster: usize,
    seed: u64,
) -> (Vec<Vec<f64>>, Vec<usize>) {
    let mut rng = seeded(seed);
    let noise = Normal::new(0.0, std).expect("finite std");
    let mut frames = Vec::with_capacity(centers.len() * n_per_cluster);
    let mut labels = Vec::with_capacity(frames.capacity());
    for (c, center) in centers.iter().enumerate() {
        for _ in 0..n_per_cluster {
            frames.push(center.iter().map(|m| m + noise.sample(&mut rng)).collect());
            labels.push(c);
        }
    }
    (frames, labels)
}

#[derive(Debug, Clone)]
pub struct DomainShiftConfig {
    pub num_domains: usize,
    pub num_classes: usize,
    pub dim: usize,
    /// Std. dev. of the random class means.
    pub class_spread: f64,
    /// Std. dev. of the random per-domain offsets.
    pub domain_spread: f64,
    pub noise_std: f64,
    pub frames_per_doc: usize,
    pub seed: u64,
}

impl Default for DomainShiftConfig {
    fn default() -> Self {
        Self {
            num_domains: 4,
            num_classes: 8,
            dim: 4,
            class_spread: 1.5,
            domain_spread: 1.5,
            noise_std: 1.0,
            frames_per_doc: 50,
            seed: 0,
        }
    }
}

/// A frame classification task whose class-conditional distributions are
/// shifted by a latent per-document domain: frame = class_mean + domain_shift
/// + noise. Every frame of a document shares its domain.
#[derive(Debug, Clone)]
pub struct DomainShiftTask {
    pub config: DomainShiftConfig,
    pub class_means: Vec<Vec<f64>>,
    pub domain_shifts: Vec<Vec<f64>>,
}

#[derive(Debug, Clone)]
pub struct LabeledDocument {
    pub doc: FeatureDocument,
    pub labels: Vec<usize>,
    pub domain: usize,
}

impl DomainShiftTask {
    pub fn new(config: DomainShiftConfig) -> Result<Self> {
        if config.num_domains == 0 || config.num_classes == 0 || config.dim == 0 {
            return Err(Error::InvalidArgument(
                "domains, classes and dim must be >= 1".into(),
            ));
        }
        if config.frames_per_doc == 0 {
            return Err(Error::InvalidArgument("frames_per_doc must be >= 1".into()));
        }
        let mut rng = seeded(config.seed);
        let class = Normal::new(0.0, config.class_spread)
            .map_err(|e| Error::InvalidArgument(e.to_string()))?;
        let domain = Normal::new(0.0, config.domain_spread)
            .map_err(|e| Error::InvalidArgument(e.to_string()))?;
        let class_means = (0..config.num_classes)
            .map(|_| (0..config.dim).map(|_| class.sample(&mut rng)).collect())
            .collect();
        let domain_shifts = (0..config.num_domains)
            .map(|_| (0..config.dim).map(|_| domain.sample(&mut rng)).collect())
            .collect();
        Ok(Self {
            config,
            class_means,
            domain_shifts,
        })
    }

    pub fn sample(&self, num_docs: usize, id_prefix: &str, seed: u64) -> Vec<LabeledDocument> {
        let mut rng = seeded(seed);
        let noise = Normal::new(0.0, self.config.noise_std).expect("finite noise std");
        (0..num_docs)
            .map(|m| {
                let domain = rng.random_range(0..self.config.num_domains);
                let shift = &self.domain_shifts[domain];
                let mut frames = Vec::with_capacity(self.config.frames_per_doc);
                let mut labels = Vec::with_capacity(self.config.frames_per_doc);
                for _ in 0..self.config.frames_per_doc {
                    let class = rng.random_range(0..self.config.num_classes);
                    let frame = self.class_means[class]
                        .iter()
                        .zip(shift)
                        .map(|(c, s)| c + s + noise.sample(&mut rng))
                        .collect();
                    frames.push(frame);
                    labels.push(class);
                }
                LabeledDocument {
                    doc: FeatureDocument::new(
                        format!("{id_prefix}{m:05}"),
                        Some(format!("g{domain}")),
                        frames,
                    ),
                    labels,
                    domain,
                }
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_topic_follows_beta_row() {
        let beta = vec![vec![0.5, 0.25, 0.25, 0.0]];
        let corpus = generate_synthetic_lda_corpus(0.3, &beta, 200, 100, 1).unwrap();
        let mut counts = [0usize; 4];
        for d in &corpus.docs {
            for &s in &d.symbols {
                counts[s] += 1;
            }
        }
        let n = 20_000.0;
        assert_eq!(counts[3], 0);
        assert!((counts[0] as f64 / n - 0.5).abs() < 0.02);
        assert!((counts[1] as f64 / n - 0.25).abs() < 0.02);
        assert!(corpus.thetas.iter().all(|t| t == &vec![1.0]));
    }

    #[test]
    fn sparse_alpha_concentrates_documents() {
        // disjoint supports {0,1} and {2,3}
        let beta = vec![vec![0.5, 0.5, 0.0, 0.0], vec![0.0, 0.0, 0.5, 0.5]];
        let corpus = generate_synthetic_lda_corpus(0.01, &beta, 1000, 50, 11).unwrap();
        let concentrated = corpus
            .docs
            .iter()
            .filter(|d| {
                let low = d.symbols.iter().filter(|&&s| s < 2).count() as f64;
                let frac = low / d.symbols.len() as f64;
                frac >= 0.9 || frac <= 0.1
            })
            .count();
        assert!(concentrated as f64 >= 0.95 * 1000.0, "{concentrated}");
    }

    #[test]
    fn same_seed_same_corpus() {
        let beta = vec![vec![0.2, 0.8], vec![0.6, 0.4]];
        let a = generate_synthetic_lda_corpus(0.5, &beta, 30, 20, 99).unwrap();
        let b = generate_synthetic_lda_corpus(0.5, &beta, 30, 20, 99).unwrap();
        assert_eq!(a.docs, b.docs);
        assert_eq!(a.thetas, b.thetas);
        let c = generate_synthetic_lda_corpus(0.5, &beta, 30, 20, 100).unwrap();
        assert_ne!(a.docs, c.docs);
    }

    #[test]
    fn rejects_bad_parameters() {
        let good = vec![vec![0.5, 0.5]];
        assert!(generate_synthetic_lda_corpus(0.0, &good, 1, 1, 0).is_err());
        assert!(generate_synthetic_lda_corpus(-1.0, &good, 1, 1, 0).is_err());
        let bad = vec![vec![0.5, 0.6]];
        assert!(generate_synthetic_lda_corpus(1.0, &bad, 1, 1, 0).is_err());
        assert!(generate_synthetic_lda_corpus(1.0, &good, 0, 1, 0).is_err());
    }

    #[test]
    fn dirichlet_samples_are_normalized_even_for_tiny_alpha() {
        let mut rng = seeded(5);
        for _ in 0..100 {
            let t = sample_dirichlet(&mut rng, 1e-3, 6);
            assert!((t.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            assert!(t.iter().all(|p| p.is_finite() && *p >= 0.0));
        }
    }

    #[test]
    fn domain_shift_documents_share_domain() {
        let task = DomainShiftTask::new(DomainShiftConfig::default()).unwrap();
        let docs = task.sample(10, "t", 3);
        assert_eq!(docs.len(), 10);
        for d in &docs {
            assert_eq!(d.doc.frames.len(), 50);
            assert_eq!(d.labels.len(), 50);
            assert_eq!(d.doc.group_label.as_deref(), Some(&*format!("g{}", d.domain)));
        }
    }
}
