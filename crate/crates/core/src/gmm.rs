//! Diagonal-covariance Gaussian mixture codebook.
//!
//! Training grows the mixture from one component by repeatedly splitting the
//! heaviest component ("mix-up") and running a few EM passes after each
//! split, then runs EM to convergence at the target size. Quantization maps
//! each frame to the component with the largest posterior.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::{FeatureDocument, SymbolDocument};
use crate::error::{Error, Result};
use crate::math::{argmax_first, log_sum_exp, normalize_log_in_place};

const LN_2PI: f64 = 1.837_877_066_409_345_5;
/// Frames per E-step work unit. Fixed so the reduction order, and therefore
/// the result, does not depend on the thread count.
const CHUNK: usize = 2048;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GmmModel {
    #[serde(rename = "D")]
    pub dim: usize,
    #[serde(rename = "V")]
    pub num_components: usize,
    pub weights: Vec<f64>,
    pub means: Vec<Vec<f64>>,
    pub variances: Vec<Vec<f64>>,
}

#[derive(Debug, Clone)]
pub struct GmmConfig {
    /// Variance floor as a fraction of the global per-dimension variance.
    pub variance_floor_frac: f64,
    /// EM passes after each split.
    pub iters_per_split: usize,
    /// Cap on EM passes once the target size is reached.
    pub max_final_iters: usize,
    /// Relative change in average log-likelihood that ends the final EM.
    pub tol: f64,
    /// Split offset in standard deviations.
    pub split_offset: f64,
    /// Components whose total responsibility falls below this are re-seeded.
    pub min_component_mass: f64,
}

impl Default for GmmConfig {
    fn default() -> Self {
        Self {
            variance_floor_frac: 1e-4,
            iters_per_split: 4,
            max_final_iters: 50,
            tol: 1e-6,
            split_offset: 0.2,
            min_component_mass: 1e-8,
        }
    }
}

/// Average per-frame log-likelihood before each EM update, grouped into runs
/// of constant component count. A split or a re-seed starts a new run.
#[derive(Debug, Clone, Default)]
pub struct GmmTrace {
    pub stages: Vec<GmmStage>,
}

#[derive(Debug, Clone)]
pub struct GmmStage {
    pub num_components: usize,
    pub avg_log_likelihood: Vec<f64>,
}

/// Per-component terms that do not depend on the frame.
struct Scorer {
    offsets: Vec<f64>,
    inv_var: Vec<Vec<f64>>,
}

impl GmmModel {
    pub fn validate(&self) -> Result<()> {
        let v = self.num_components;
        if v == 0 || self.dim == 0 {
            return Err(Error::InvalidArgument("GMM needs V >= 1 and D >= 1".into()));
        }
        if self.weights.len() != v || self.means.len() != v || self.variances.len() != v {
            return Err(Error::dims("GMM component arrays", v, self.weights.len()));
        }
        for (m, var) in self.means.iter().zip(&self.variances) {
            if m.len() != self.dim {
                return Err(Error::dims("GMM mean", self.dim, m.len()));
            }
            if var.len() != self.dim {
                return Err(Error::dims("GMM variance", self.dim, var.len()));
            }
            if var.iter().any(|&s| !(s > 0.0) || !s.is_finite()) {
                return Err(Error::InvalidArgument("GMM variances must be positive".into()));
            }
        }
        let sum: f64 = self.weights.iter().sum();
        if self.weights.iter().any(|&w| !(w >= 0.0)) || (sum - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidArgument(format!(
                "GMM weights must be a distribution (sum {sum})"
            )));
        }
        Ok(())
    }

    fn scorer(&self) -> Scorer {
        let offsets = self
            .weights
            .iter()
            .zip(&self.variances)
            .map(|(w, var)| {
                let log_det: f64 = var.iter().map(|s| s.ln()).sum();
                w.ln() - 0.5 * (self.dim as f64 * LN_2PI + log_det)
            })
            .collect();
        let inv_var = self
            .variances
            .iter()
            .map(|var| var.iter().map(|s| 1.0 / s).collect())
            .collect();
        Scorer { offsets, inv_var }
    }

    fn check_frame(&self, frame: &[f64]) -> Result<()> {
        if frame.len() != self.dim {
            return Err(Error::dims("frame", self.dim, frame.len()));
        }
        Ok(())
    }

    /// Posterior P(G_i | x) over all components, computed in the log domain.
    pub fn responsibilities(&self, frame: &[f64]) -> Result<Vec<f64>> {
        self.check_frame(frame)?;
        let mut out = vec![0.0; self.num_components];
        self.scorer().log_joint(self, frame, &mut out);
        normalize_log_in_place(&mut out);
        Ok(out)
    }

    /// log p(x) under the mixture.
    pub fn log_density(&self, frame: &[f64]) -> Result<f64> {
        self.check_frame(frame)?;
        let mut out = vec![0.0; self.num_components];
        self.scorer().log_joint(self, frame, &mut out);
        Ok(log_sum_exp(&out))
    }

    /// Average per-frame log-likelihood of `frames`.
    pub fn avg_log_likelihood(&self, frames: &[Vec<f64>]) -> Result<f64> {
        if frames.is_empty() {
            return Err(Error::Empty("no frames".into()));
        }
        let scorer = self.scorer();
        let mut buf = vec![0.0; self.num_components];
        let mut total = 0.0;
        for f in frames {
            self.check_frame(f)?;
            scorer.log_joint(self, f, &mut buf);
            total += log_sum_exp(&buf);
        }
        Ok(total / frames.len() as f64)
    }

    /// Maximum-posterior component index per frame (lowest index on ties).
    pub fn quantize_frames(&self, frames: &[Vec<f64>]) -> Result<Vec<usize>> {
        let scorer = self.scorer();
        let mut buf = vec![0.0; self.num_components];
        frames
            .iter()
            .map(|f| {
                self.check_frame(f)?;
                scorer.log_joint(self, f, &mut buf);
                // argmax of the joint equals argmax of the posterior
                Ok(argmax_first(&buf))
            })
            .collect()
    }

    pub fn quantize(&self, doc: &FeatureDocument) -> Result<SymbolDocument> {
        let symbols = self.quantize_frames(&doc.frames)?;
        Ok(SymbolDocument::new(
            doc.id.clone(),
            doc.group_label.clone(),
            symbols,
        ))
    }

    /// Quantizes many documents in parallel, preserving order.
    pub fn quantize_all(&self, docs: &[FeatureDocument]) -> Result<Vec<SymbolDocument>> {
        docs.par_iter().map(|d| self.quantize(d)).collect()
    }
}

impl Scorer {
    fn log_joint(&self, model: &GmmModel, frame: &[f64], out: &mut [f64]) {
        for (i, o) in out.iter_mut().enumerate() {
            let mean = &model.means[i];
            let iv = &self.inv_var[i];
            let mut q = 0.0;
            for d in 0..frame.len() {
                let diff = frame[d] - mean[d];
                q += diff * diff * iv[d];
            }
            *o = self.offsets[i] - 0.5 * q;
        }
    }
}

/// Trains a `target_components`-component GMM on pooled frames.
pub fn train_gmm(
    frames: &[Vec<f64>],
    target_components: usize,
    config: &GmmConfig,
) -> Result<GmmModel> {
    train_gmm_traced(frames, target_components, config).map(|(m, _)| m)
}

pub fn train_gmm_traced(
    frames: &[Vec<f64>],
    target_components: usize,
    config: &GmmConfig,
) -> Result<(GmmModel, GmmTrace)> {
    if target_components == 0 {
        return Err(Error::InvalidArgument("target component count must be >= 1".into()));
    }
    if frames.len() < target_components {
        return Err(Error::InvalidArgument(format!(
            "need at least as many frames as components: N={} < V={target_components}",
            frames.len()
        )));
    }
    let dim = frames[0].len();
    if dim == 0 {
        return Err(Error::InvalidArgument("frames have dimension 0".into()));
    }
    for (t, f) in frames.iter().enumerate() {
        if f.len() != dim {
            return Err(Error::dims(format!("frame {t}"), dim, f.len()));
        }
        if f.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                doc_id: "<pooled>".into(),
                frame: t,
            });
        }
    }

    let n = frames.len() as f64;
    let mut mean = vec![0.0; dim];
    for f in frames {
        for (m, x) in mean.iter_mut().zip(f) {
            *m += x;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n);
    let mut var = vec![0.0; dim];
    for f in frames {
        for d in 0..dim {
            let diff = f[d] - mean[d];
            var[d] += diff * diff;
        }
    }
    var.iter_mut().for_each(|v| *v /= n);
    let floors: Vec<f64> = var
        .iter()
        .map(|v| (config.variance_floor_frac * v).max(1e-12))
        .collect();

    let mut model = GmmModel {
        dim,
        num_components: 1,
        weights: vec![1.0],
        variances: vec![var.iter().zip(&floors).map(|(v, f)| v.max(*f)).collect()],
        means: vec![mean],
    };
    let mut trace = GmmTrace::default();
    let mut trainer = Trainer {
        frames,
        floors: &floors,
        config,
        trace: &mut trace,
    };

    trainer.new_stage(1);
    if target_components > 1 {
        trainer.run(&mut model, config.iters_per_split.max(1), None)?;
    }
    while model.num_components < target_components {
        split_heaviest(&mut model, None, config.split_offset);
        trainer.new_stage(model.num_components);
        let budget = if model.num_components == target_components {
            config.iters_per_split + config.max_final_iters
        } else {
            config.iters_per_split
        };
        let tol = (model.num_components == target_components).then_some(config.tol);
        trainer.run(&mut model, budget.max(1), tol)?;
    }
    if target_components == 1 {
        trainer.run(&mut model, config.max_final_iters.max(1), Some(config.tol))?;
    }
    log::debug!(
        "GMM trained: V={} D={} stages={}",
        model.num_components,
        dim,
        trace.stages.len()
    );
    Ok((model, trace))
}

struct Trainer<'a> {
    frames: &'a [Vec<f64>],
    floors: &'a [f64],
    config: &'a GmmConfig,
    trace: &'a mut GmmTrace,
}

struct Accum {
    log_lik: f64,
    mass: Vec<f64>,
    sum_x: Vec<Vec<f64>>,
    sum_x2: Vec<Vec<f64>>,
}

impl Accum {
    fn new(v: usize, d: usize) -> Self {
        Self {
            log_lik: 0.0,
            mass: vec![0.0; v],
            sum_x: vec![vec![0.0; d]; v],
            sum_x2: vec![vec![0.0; d]; v],
        }
    }

    fn merge(&mut self, other: &Accum) {
        self.log_lik += other.log_lik;
        for i in 0..self.mass.len() {
            self.mass[i] += other.mass[i];
            for d in 0..self.sum_x[i].len() {
                self.sum_x[i][d] += other.sum_x[i][d];
                self.sum_x2[i][d] += other.sum_x2[i][d];
            }
        }
    }
}

impl Trainer<'_> {
    fn new_stage(&mut self, num_components: usize) {
        self.trace.stages.push(GmmStage {
            num_components,
            avg_log_likelihood: Vec::new(),
        });
    }

    /// Runs up to `iters` EM passes; with `tol`, stops early on convergence.
    fn run(&mut self, model: &mut GmmModel, iters: usize, tol: Option<f64>) -> Result<()> {
        let mut prev: Option<f64> = None;
        for _ in 0..iters {
            let (avg_ll, reseeded) = self.em_step(model)?;
            self.trace
                .stages
                .last_mut()
                .expect("stage opened before run")
                .avg_log_likelihood
                .push(avg_ll);
            if reseeded {
                self.new_stage(model.num_components);
                prev = None;
                continue;
            }
            if let (Some(tol), Some(p)) = (tol, prev) {
                if (avg_ll - p).abs() <= tol * p.abs().max(f64::MIN_POSITIVE) {
                    break;
                }
            }
            prev = Some(avg_ll);
        }
        Ok(())
    }

    /// One E + M pass. Returns the average log-likelihood of the parameters
    /// before the update and whether any component had to be re-seeded.
    fn em_step(&mut self, model: &mut GmmModel) -> Result<(f64, bool)> {
        let v = model.num_components;
        let dim = model.dim;
        let scorer = model.scorer();
        let m: &GmmModel = model;
        let partials: Vec<Accum> = self
            .frames
            .par_chunks(CHUNK)
            .map(|chunk| {
                let mut acc = Accum::new(v, dim);
                let mut post = vec![0.0; v];
                for f in chunk {
                    scorer.log_joint(m, f, &mut post);
                    acc.log_lik += normalize_log_in_place(&mut post);
                    for i in 0..v {
                        let r = post[i];
                        if r == 0.0 {
                            continue;
                        }
                        acc.mass[i] += r;
                        let sx = &mut acc.sum_x[i];
                        let sx2 = &mut acc.sum_x2[i];
                        for d in 0..dim {
                            let x = f[d];
                            sx[d] += r * x;
                            sx2[d] += r * x * x;
                        }
                    }
                }
                acc
            })
            .collect();
        let mut total = Accum::new(v, dim);
        for p in &partials {
            total.merge(p);
        }
        let n = self.frames.len() as f64;
        let avg_ll = total.log_lik / n;
        if !avg_ll.is_finite() {
            return Err(Error::Numerical(format!(
                "GMM log-likelihood became {avg_ll} with {v} components"
            )));
        }

        let mut empty = Vec::new();
        for i in 0..v {
            let mass = total.mass[i];
            if mass < self.config.min_component_mass {
                empty.push(i);
                continue;
            }
            model.weights[i] = mass / n;
            for d in 0..dim {
                let mu = total.sum_x[i][d] / mass;
                let s = total.sum_x2[i][d] / mass - mu * mu;
                model.means[i][d] = mu;
                model.variances[i][d] = s.max(self.floors[d]);
            }
        }
        if !empty.is_empty() {
            for &i in &empty {
                model.weights[i] = 0.0;
            }
            for &i in &empty {
                log::debug!("re-seeding empty GMM component {i}");
                split_heaviest(model, Some(i), self.config.split_offset);
            }
        }
        let wsum: f64 = model.weights.iter().sum();
        model.weights.iter_mut().for_each(|w| *w /= wsum);
        Ok((avg_ll, !empty.is_empty()))
    }
}

/// Splits the heaviest component (lowest index on ties) into two halves with
/// means offset by ±`offset`·σ per dimension. The "+" half stays in place;
/// the "−" half goes to `slot`, or is appended when `slot` is `None`.
fn split_heaviest(model: &mut GmmModel, slot: Option<usize>, offset: f64) {
    let heaviest = argmax_first(&model.weights);
    let w = model.weights[heaviest] / 2.0;
    let var = model.variances[heaviest].clone();
    let base = model.means[heaviest].clone();
    let plus: Vec<f64> = base
        .iter()
        .zip(&var)
        .map(|(m, s)| m + offset * s.sqrt())
        .collect();
    let minus: Vec<f64> = base
        .iter()
        .zip(&var)
        .map(|(m, s)| m - offset * s.sqrt())
        .collect();
    model.weights[heaviest] = w;
    model.means[heaviest] = plus;
    match slot {
        Some(i) => {
            model.weights[i] = w;
            model.means[i] = minus;
            model.variances[i] = var;
        }
        None => {
            model.weights.push(w);
            model.means.push(minus);
            model.variances.push(var);
            model.num_components += 1;
        }
    }
}
