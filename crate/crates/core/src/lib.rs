//! Unsupervised discovery of latent acoustic domains and domain-aware
//! network training.
//!
//! The pipeline runs in stages, each with its own module:
//!
//! 1. [`gmm`]: train a diagonal GMM codebook on pooled feature frames and
//!    quantize every frame to its most likely component.
//! 2. [`corpus`]: turn each symbol sequence into a bag-of-sounds histogram.
//! 3. [`lda`]: fit latent Dirichlet allocation by variational EM and infer
//!    per-document domain posteriors.
//! 4. [`domains`]: take MAP domains, encode them as one-hot UBIC vectors,
//!    measure posterior entropy, and filter data by agreement between two
//!    models of different size.
//! 5. [`ldat`]: train a feedforward classifier whose input is augmented with
//!    the UBIC vector, which amounts to a learned per-domain first-layer bias.

// `!(x > 0.0)` is deliberate throughout: NaN must fail validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]
#![allow(clippy::needless_range_loop)]

pub mod corpus;
pub mod domains;
pub mod error;
pub mod gmm;
pub mod io;
pub mod lda;
pub mod ldat;
pub mod math;
pub mod rng;

pub use corpus::{to_bag, BagOfSounds, FeatureDocument, SymbolDocument};
pub use domains::{
    assign, average_domain_entropy, cross_agreement_filter, distribution_stats, ubic_encode,
    DomainAssignment, DomainLabel, EntropyUnit, FilterResult, StatRow, TupleBin, UbicVector,
};
pub use error::{Error, Result};
pub use gmm::{train_gmm, GmmConfig, GmmModel};
pub use lda::{e_step_document, elbo, fit, infer_theta, Alpha, LdaConfig, LdaModel, VariationalState};
pub use ldat::{
    gradient_check, init_augmented_from_baseline, train, Activation, Example, LdatNetwork,
    NetworkConfig, TrainConfig,
};
