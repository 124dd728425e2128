//! Latent Dirichlet allocation over bags-of-sounds, trained by variational EM.
//!
//! Topic-symbol probabilities are stored as `log_beta[k][w]` (K rows over V
//! symbols). The per-document variational posterior is a Dirichlet over θ
//! (`gamma`) and one multinomial over topics per *distinct* symbol (`phi`);
//! storing φ per symbol type is exact because every token of the same symbol
//! receives the same update.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::{validate_bags, BagOfSounds};
use crate::error::{Error, Result};
use crate::io::log_matrix;
use crate::math::{digamma, ln_gamma, log_sum_exp};
use crate::rng::seeded;

/// Dirichlet prior over per-document topic proportions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Alpha {
    Symmetric(f64),
    Vector(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LdaModel {
    #[serde(rename = "K")]
    pub num_topics: usize,
    #[serde(rename = "V")]
    pub vocab_size: usize,
    pub alpha: Alpha,
    #[serde(with = "log_matrix")]
    pub log_beta: Vec<Vec<f64>>,
}

#[derive(Debug, Clone)]
pub struct LdaConfig {
    /// Symmetric Dirichlet parameter; `None` means 1/K.
    pub alpha: Option<f64>,
    /// E-step stops when the max relative change of γ falls below this.
    pub gamma_tol: f64,
    pub max_e_iters: usize,
    /// EM stops when the relative change of the corpus objective falls below this.
    pub em_tol: f64,
    pub max_em_iters: usize,
    /// Additive pseudo-count per (topic, symbol) cell in the M-step.
    pub smoothing: Option<f64>,
    /// Report θ from γ − α instead of γ.
    pub subtract_prior: bool,
    pub seed: u64,
}

impl Default for LdaConfig {
    fn default() -> Self {
        Self {
            alpha: None,
            gamma_tol: 1e-5,
            max_e_iters: 100,
            em_tol: 1e-4,
            max_em_iters: 50,
            smoothing: Some(1e-3),
            subtract_prior: false,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct VariationalState {
    pub gamma: Vec<f64>,
    /// Distinct symbols of the document, ascending; row i of `phi` belongs to `words[i]`.
    pub words: Vec<usize>,
    pub phi: Vec<Vec<f64>>,
}

/// Objective values recorded once per EM iteration, before the M-step.
#[derive(Debug, Clone, Default)]
pub struct LdaTrace {
    /// Σ over documents of the per-document ELBO.
    pub corpus_elbo: Vec<f64>,
    /// `corpus_elbo` plus the log Dirichlet(1 + η) density of β implied by
    /// smoothing. This is the quantity EM with smoothing never decreases;
    /// it equals `corpus_elbo` when smoothing is off.
    pub objective: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ThetaInference {
    pub theta: Vec<f64>,
    /// Set when the document had no symbols and θ defaulted to uniform.
    pub empty_document: bool,
}

impl LdaModel {
    pub fn alpha_vec(&self) -> Vec<f64> {
        match &self.alpha {
            Alpha::Symmetric(a) => vec![*a; self.num_topics],
            Alpha::Vector(v) => v.clone(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.num_topics == 0 || self.vocab_size == 0 {
            return Err(Error::InvalidArgument("LDA needs K >= 1 and V >= 1".into()));
        }
        let alpha = self.alpha_vec();
        if alpha.len() != self.num_topics {
            return Err(Error::dims("alpha", self.num_topics, alpha.len()));
        }
        if alpha.iter().any(|a| !(*a > 0.0) || !a.is_finite()) {
            return Err(Error::InvalidArgument("alpha entries must be positive".into()));
        }
        if self.log_beta.len() != self.num_topics {
            return Err(Error::dims("log_beta rows", self.num_topics, self.log_beta.len()));
        }
        for (k, row) in self.log_beta.iter().enumerate() {
            if row.len() != self.vocab_size {
                return Err(Error::dims(format!("log_beta row {k}"), self.vocab_size, row.len()));
            }
            let sum: f64 = row.iter().map(|l| l.exp()).sum();
            if (sum - 1.0).abs() > 1e-8 || row.iter().any(|l| l.is_nan() || *l > 0.0) {
                return Err(Error::InvalidArgument(format!(
                    "log_beta row {k} is not a normalized distribution (sum {sum})"
                )));
            }
        }
        Ok(())
    }

    fn check_doc(&self, doc: &BagOfSounds) -> Result<()> {
        if doc.vocab_size() != self.vocab_size {
            return Err(Error::dims(
                format!("bag `{}` vocabulary", doc.id),
                self.vocab_size,
                doc.vocab_size(),
            ));
        }
        Ok(())
    }
}

/// Sparse view of a bag: distinct symbols and their counts.
struct SparseDoc {
    words: Vec<usize>,
    counts: Vec<f64>,
}

impl SparseDoc {
    fn from_bag(doc: &BagOfSounds) -> Self {
        let (words, counts) = doc.nonzero().map(|(w, c)| (w, c as f64)).unzip();
        Self { words, counts }
    }

    fn total(&self) -> f64 {
        self.counts.iter().sum()
    }
}

/// Coordinate ascent on (γ, φ) for one document.
pub fn e_step_document(
    model: &LdaModel,
    doc: &BagOfSounds,
    config: &LdaConfig,
) -> Result<VariationalState> {
    e_step_document_traced(model, doc, config).map(|(s, _)| s)
}

/// As [`e_step_document`], also returning the ELBO after every iteration.
pub fn e_step_document_traced(
    model: &LdaModel,
    doc: &BagOfSounds,
    config: &LdaConfig,
) -> Result<(VariationalState, Vec<f64>)> {
    model.check_doc(doc)?;
    if doc.total == 0 {
        return Err(Error::Empty(format!("document `{}` has no symbols", doc.id)));
    }
    let sparse = SparseDoc::from_bag(doc);
    let alpha = model.alpha_vec();
    let mut trace = Vec::new();
    let state = coordinate_ascent(model, &alpha, &sparse, None, config, Some(&mut trace))
        .map_err(|e| tag_doc(e, &doc.id))?;
    Ok((state, trace))
}

fn tag_doc(e: Error, id: &str) -> Error {
    match e {
        Error::Numerical(m) => Error::Numerical(format!("document `{id}`: {m}")),
        other => other,
    }
}

fn coordinate_ascent(
    model: &LdaModel,
    alpha: &[f64],
    doc: &SparseDoc,
    warm_gamma: Option<&[f64]>,
    config: &LdaConfig,
    mut trace: Option<&mut Vec<f64>>,
) -> Result<VariationalState> {
    let k = model.num_topics;
    let mut gamma: Vec<f64> = match warm_gamma {
        Some(g) => g.to_vec(),
        None => {
            let share = doc.total() / k as f64;
            alpha.iter().map(|a| a + share).collect()
        }
    };
    let mut phi = vec![vec![1.0 / k as f64; k]; doc.words.len()];
    let mut dig = vec![0.0; k];
    for _ in 0..config.max_e_iters.max(1) {
        for (d, g) in dig.iter_mut().zip(&gamma) {
            *d = digamma(*g);
        }
        for (row, &w) in phi.iter_mut().zip(&doc.words) {
            for t in 0..k {
                row[t] = model.log_beta[t][w] + dig[t];
            }
            let lse = log_sum_exp(row);
            if !lse.is_finite() {
                return Err(Error::Numerical(format!(
                    "symbol {w} has zero probability under every topic"
                )));
            }
            for v in row.iter_mut() {
                *v = (*v - lse).exp();
            }
        }
        let mut new_gamma = alpha.to_vec();
        for (row, &n) in phi.iter().zip(&doc.counts) {
            for t in 0..k {
                new_gamma[t] += n * row[t];
            }
        }
        let max_rel = new_gamma
            .iter()
            .zip(&gamma)
            .map(|(n, o)| ((n - o) / o).abs())
            .fold(0.0, f64::max);
        gamma = new_gamma;
        if let Some(t) = trace.as_deref_mut() {
            t.push(elbo_sparse(model, alpha, doc, &gamma, &phi));
        }
        if !max_rel.is_finite() {
            return Err(Error::Numerical("gamma became non-finite".into()));
        }
        if max_rel < config.gamma_tol {
            break;
        }
    }
    Ok(VariationalState {
        gamma,
        words: doc.words.clone(),
        phi,
    })
}

fn elbo_sparse(
    model: &LdaModel,
    alpha: &[f64],
    doc: &SparseDoc,
    gamma: &[f64],
    phi: &[Vec<f64>],
) -> f64 {
    let k = model.num_topics;
    let gamma_sum: f64 = gamma.iter().sum();
    let dig_sum = digamma(gamma_sum);
    let e_log_theta: Vec<f64> = gamma.iter().map(|g| digamma(*g) - dig_sum).collect();
    let alpha_sum: f64 = alpha.iter().sum();

    // E_q[log p(θ|α)] − E_q[log q(θ|γ)]
    let mut bound = ln_gamma(alpha_sum) - ln_gamma(gamma_sum);
    for t in 0..k {
        bound += ln_gamma(gamma[t]) - ln_gamma(alpha[t]);
        bound += (alpha[t] - gamma[t]) * e_log_theta[t];
    }
    // E_q[log p(z|θ)] + E_q[log p(w|z,β)] − E_q[log q(z|φ)]
    for ((row, &w), &n) in phi.iter().zip(&doc.words).zip(&doc.counts) {
        let mut acc = 0.0;
        for t in 0..k {
            let p = row[t];
            if p > 0.0 {
                acc += p * (e_log_theta[t] + model.log_beta[t][w] - p.ln());
            }
        }
        bound += n * acc;
    }
    bound
}

/// Evidence lower bound of `doc` under `state`.
pub fn elbo(model: &LdaModel, doc: &BagOfSounds, state: &VariationalState) -> Result<f64> {
    model.check_doc(doc)?;
    let k = model.num_topics;
    if state.gamma.len() != k {
        return Err(Error::dims("gamma", k, state.gamma.len()));
    }
    let sparse = SparseDoc::from_bag(doc);
    if state.words != sparse.words {
        return Err(Error::dims(
            "phi rows (distinct symbols)",
            sparse.words.len(),
            state.words.len(),
        ));
    }
    if state.phi.len() != sparse.words.len() {
        return Err(Error::dims("phi rows", sparse.words.len(), state.phi.len()));
    }
    if let Some(row) = state.phi.iter().find(|r| r.len() != k) {
        return Err(Error::dims("phi row", k, row.len()));
    }
    Ok(elbo_sparse(
        model,
        &model.alpha_vec(),
        &sparse,
        &state.gamma,
        &state.phi,
    ))
}

/// Fits a K-topic model by variational EM.
pub fn fit(corpus: &[BagOfSounds], num_topics: usize, config: &LdaConfig) -> Result<LdaModel> {
    fit_traced(corpus, num_topics, config).map(|(m, _)| m)
}

pub fn fit_traced(
    corpus: &[BagOfSounds],
    num_topics: usize,
    config: &LdaConfig,
) -> Result<(LdaModel, LdaTrace)> {
    if corpus.is_empty() {
        return Err(Error::Empty("LDA training corpus has no documents".into()));
    }
    if num_topics == 0 {
        return Err(Error::InvalidArgument("K must be >= 1".into()));
    }
    let vocab = validate_bags(corpus)?.expect("corpus is non-empty");
    if let Some(doc) = corpus.iter().find(|d| d.total == 0) {
        return Err(Error::Empty(format!(
            "training document `{}` has no symbols",
            doc.id
        )));
    }
    let alpha_value = config.alpha.unwrap_or(1.0 / num_topics as f64);
    if !(alpha_value > 0.0) || !alpha_value.is_finite() {
        return Err(Error::InvalidArgument(format!("alpha must be positive, got {alpha_value}")));
    }
    let eta = config.smoothing.unwrap_or(0.0);
    if !(eta >= 0.0) || !eta.is_finite() {
        return Err(Error::InvalidArgument(format!("smoothing must be >= 0, got {eta}")));
    }

    let docs: Vec<SparseDoc> = corpus.iter().map(SparseDoc::from_bag).collect();
    let mut model = LdaModel {
        num_topics,
        vocab_size: vocab,
        alpha: Alpha::Symmetric(alpha_value),
        log_beta: initial_log_beta(corpus, num_topics, vocab, eta, config.seed),
    };
    let alpha = model.alpha_vec();
    let mut gammas: Vec<Option<Vec<f64>>> = vec![None; docs.len()];
    let mut trace = LdaTrace::default();

    for iter in 0..config.max_em_iters.max(1) {
        let results: Vec<Result<(VariationalState, f64)>> = docs
            .par_iter()
            .zip(gammas.par_iter())
            .zip(corpus.par_iter())
            .map(|((doc, warm), bag)| {
                let state =
                    coordinate_ascent(&model, &alpha, doc, warm.as_deref(), config, None)
                        .map_err(|e| tag_doc(e, &bag.id))?;
                let bound = elbo_sparse(&model, &alpha, doc, &state.gamma, &state.phi);
                Ok((state, bound))
            })
            .collect();
        let mut states = Vec::with_capacity(docs.len());
        let mut corpus_elbo = 0.0;
        for r in results {
            let (state, bound) = r?;
            corpus_elbo += bound;
            states.push(state);
        }
        let objective = corpus_elbo + log_beta_prior(&model.log_beta, eta);
        if !objective.is_finite() {
            return Err(Error::Numerical(format!(
                "corpus objective became {objective} at EM iteration {iter}"
            )));
        }
        let converged = trace
            .objective
            .last()
            .map(|prev| ((objective - prev) / prev).abs() < config.em_tol)
            .unwrap_or(false);
        trace.corpus_elbo.push(corpus_elbo);
        trace.objective.push(objective);
        log::debug!("EM iteration {iter}: corpus ELBO {corpus_elbo:.6}");

        model.log_beta = m_step(&docs, &states, num_topics, vocab, eta)?;
        for (g, s) in gammas.iter_mut().zip(states) {
            *g = Some(s.gamma);
        }
        if converged {
            break;
        }
    }
    Ok((model, trace))
}

/// log of the Dirichlet(1 + η) density over each β row, up to a constant.
fn log_beta_prior(log_beta: &[Vec<f64>], eta: f64) -> f64 {
    if eta == 0.0 {
        return 0.0;
    }
    eta * log_beta.iter().flatten().sum::<f64>()
}

/// Rows start at the (smoothed) corpus symbol distribution times seeded
/// U[0.5, 1.5] noise, renormalized.
fn initial_log_beta(
    corpus: &[BagOfSounds],
    k: usize,
    vocab: usize,
    eta: f64,
    seed: u64,
) -> Vec<Vec<f64>> {
    let mut empirical = vec![eta; vocab];
    for doc in corpus {
        for (w, c) in doc.nonzero() {
            empirical[w] += c as f64;
        }
    }
    let mut rng = seeded(seed);
    (0..k)
        .map(|_| {
            let row: Vec<f64> = empirical
                .iter()
                .map(|p| p * rng.random_range(0.5..1.5))
                .collect();
            let sum: f64 = row.iter().sum();
            row.iter().map(|p| (p / sum).ln()).collect()
        })
        .collect()
}

fn m_step(
    docs: &[SparseDoc],
    states: &[VariationalState],
    k: usize,
    vocab: usize,
    eta: f64,
) -> Result<Vec<Vec<f64>>> {
    let mut ss = vec![vec![eta; vocab]; k];
    for (doc, state) in docs.iter().zip(states) {
        for ((row, &w), &n) in state.phi.iter().zip(&doc.words).zip(&doc.counts) {
            for t in 0..k {
                ss[t][w] += n * row[t];
            }
        }
    }
    ss.into_iter()
        .enumerate()
        .map(|(t, row)| {
            let sum: f64 = row.iter().sum();
            if !(sum > 0.0) || !sum.is_finite() {
                return Err(Error::Numerical(format!(
                    "topic {t} lost all probability mass (enable smoothing)"
                )));
            }
            Ok(row.iter().map(|c| (c / sum).ln()).collect())
        })
        .collect()
}

/// Normalized posterior topic proportions for one document.
pub fn infer_theta(
    model: &LdaModel,
    doc: &BagOfSounds,
    config: &LdaConfig,
) -> Result<ThetaInference> {
    model.check_doc(doc)?;
    let k = model.num_topics;
    if doc.total == 0 {
        log::warn!("document `{}` is empty; returning uniform theta", doc.id);
        return Ok(ThetaInference {
            theta: vec![1.0 / k as f64; k],
            empty_document: true,
        });
    }
    let alpha = model.alpha_vec();
    let sparse = SparseDoc::from_bag(doc);
    let state = coordinate_ascent(model, &alpha, &sparse, None, config, None)
        .map_err(|e| tag_doc(e, &doc.id))?;
    let mass: Vec<f64> = if config.subtract_prior {
        state
            .gamma
            .iter()
            .zip(&alpha)
            .map(|(g, a)| (g - a).max(0.0))
            .collect()
    } else {
        state.gamma
    };
    let sum: f64 = mass.iter().sum();
    Ok(ThetaInference {
        theta: mass.iter().map(|m| m / sum).collect(),
        empty_document: false,
    })
}

/// [`infer_theta`] over a corpus, in parallel, preserving order.
pub fn infer_all(
    model: &LdaModel,
    docs: &[BagOfSounds],
    config: &LdaConfig,
) -> Result<Vec<ThetaInference>> {
    docs.par_iter()
        .map(|d| infer_theta(model, d, config))
        .collect()
}
