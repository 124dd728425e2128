//! Fixed-seed fixtures shared by the benchmarks.

use ldat_core::corpus::synthetic::{
    gaussian_clusters, generate_synthetic_lda_corpus, sample_dirichlet,
};
use ldat_core::ldat::{Example, LdatNetwork, NetworkConfig};
use ldat_core::rng::seeded;
use ldat_core::{to_bag, BagOfSounds, GmmConfig, GmmModel, LdaConfig, LdaModel, UbicVector};

/// Bags-of-sounds drawn from a `k`-topic model over `vocab` symbols.
pub fn lda_corpus(k: usize, vocab: usize, docs: usize, doc_len: usize) -> Vec<BagOfSounds> {
    let mut rng = seeded(1);
    let beta: Vec<Vec<f64>> = (0..k).map(|_| sample_dirichlet(&mut rng, 0.2, vocab)).collect();
    generate_synthetic_lda_corpus(0.1, &beta, docs, doc_len, 2)
        .expect("valid generator settings")
        .docs
        .iter()
        .map(|d| to_bag(d, vocab).expect("symbols in range"))
        .collect()
}

pub fn lda_model(bags: &[BagOfSounds], k: usize) -> LdaModel {
    ldat_core::fit(bags, k, &LdaConfig::default()).expect("fit succeeds")
}

/// Frames around `clusters` random centers in `dim` dimensions.
pub fn frames(clusters: usize, dim: usize, per_cluster: usize) -> Vec<Vec<f64>> {
    let centers: Vec<Vec<f64>> = (0..clusters)
        .map(|c| (0..dim).map(|d| ((c * 7 + d * 3) % 11) as f64 - 5.0).collect())
        .collect();
    gaussian_clusters(&centers, 1.0, per_cluster, 3).0
}

pub fn gmm(frames: &[Vec<f64>], components: usize) -> GmmModel {
    ldat_core::train_gmm(frames, components, &GmmConfig::default()).expect("GMM trains")
}

pub fn network(input: usize, domains: usize, hidden: Vec<usize>, output: usize) -> LdatNetwork {
    LdatNetwork::new(&NetworkConfig {
        domain_dim: domains,
        hidden_dims: hidden,
        ..NetworkConfig::new(input, output)
    })
    .expect("valid network")
}

pub fn examples(net: &LdatNetwork, n: usize) -> Vec<Example> {
    (0..n)
        .map(|i| Example {
            features: (0..net.input_dim).map(|d| ((i * 31 + d * 17) % 13) as f64 / 6.5 - 1.0).collect(),
            ubic: (net.domain_dim > 0)
                .then(|| UbicVector::new(net.domain_dim, i % net.domain_dim).expect("index < K")),
            label: i % net.output_dim(),
        })
        .collect()
}
