//! One function per subcommand. Each resolves its settings (flag, then
//! manifest, then default), checks that no output overwrites an input, runs
//! the library and writes its artifacts with a provenance header.

use std::collections::HashMap;
use std::io::Write;
use std::path::{Path, PathBuf};

use ldat_core::corpus::synthetic::{DomainShiftConfig, DomainShiftTask};
use ldat_core::corpus::{pool_frames, to_bag, validate_features};
use ldat_core::domains::DomainAssignment;
use ldat_core::ldat::{evaluate, Evaluation};
use ldat_core::rng::derive;
use ldat_core::{
    assign as assign_domains, average_domain_entropy, cross_agreement_filter, distribution_stats,
    fit, init_augmented_from_baseline, train, train_gmm as fit_gmm, ubic_encode, Activation,
    EntropyUnit, Error, Example, FeatureDocument, GmmConfig, GmmModel, LdaConfig, LdaModel,
    LdatNetwork, NetworkConfig, TrainConfig, UbicVector,
};
use rand::seq::SliceRandom;
use serde::Serialize;
use serde_json::{json, Value};

use crate::data::{self, LabelRecord};
use crate::error::{CliError, CliResult};
use crate::manifest::Stage;
use crate::output::{check_paths, meta, read_json, write_atomic, write_json};
use crate::{
    ActivationArg, AssignArgs, AugmentTrainArgs, Context, EntropyArgs, EvalArgs, FilterArgs,
    GroupBy, InferenceArgs, QuantizeArgs, StatsArgs, SynthArgs, TrainGmmArgs, TrainLdaArgs,
    UnitArg,
};

/// RNG stream of the held-out split; epoch shuffles use streams 1, 2, ...
const CV_SPLIT_STREAM: u64 = 1 << 40;

fn at_least_one(value: usize, key: &str) -> CliResult<usize> {
    if value == 0 {
        return Err(CliError::usage(format!("--{key} must be >= 1")));
    }
    Ok(value)
}

fn positive(value: f64, key: &str) -> CliResult<f64> {
    if !(value > 0.0 && value.is_finite()) {
        return Err(CliError::usage(format!("--{key} must be a positive number")));
    }
    Ok(value)
}

fn csv_writer<'a>(w: &'a mut dyn Write, meta: &Value) -> CliResult<csv::Writer<&'a mut dyn Write>> {
    writeln!(w, "# {meta}").map_err(|e| CliError::Data(e.into()))?;
    Ok(csv::Writer::from_writer(w))
}

fn csv_err(e: csv::Error) -> CliError {
    CliError::Data(e.into())
}

pub fn synth(ctx: &Context, a: SynthArgs) -> CliResult<()> {
    let st = ctx.manifest.stage("synth")?;
    let out_features = st.path(a.out_features, "out-features")?;
    let out_labels = st.path(a.out_labels, "out-labels")?;
    check_paths(&[], &[&out_features, &out_labels])?;
    let format = data::feature_format(&out_features, st.opt(a.format, "format")?.map(Into::into));
    let d = DomainShiftConfig::default();
    let config = DomainShiftConfig {
        num_domains: at_least_one(st.or(a.domains, "domains", d.num_domains)?, "domains")?,
        num_classes: at_least_one(st.or(a.classes, "classes", d.num_classes)?, "classes")?,
        dim: at_least_one(st.or(a.dim, "dim", d.dim)?, "dim")?,
        class_spread: st.or(a.class_spread, "class-spread", d.class_spread)?,
        domain_spread: st.or(a.domain_spread, "domain-spread", d.domain_spread)?,
        noise_std: positive(st.or(a.noise_std, "noise-std", d.noise_std)?, "noise-std")?,
        frames_per_doc: at_least_one(
            st.or(a.frames_per_doc, "frames-per-doc", d.frames_per_doc)?,
            "frames-per-doc",
        )?,
        seed: st.or(a.task_seed, "task-seed", d.seed)?,
    };
    let docs = at_least_one(st.or(a.docs, "docs", 400)?, "docs")?;
    let prefix: String = st.or(a.id_prefix, "id-prefix", "utt".to_string())?;
    let m = meta(
        "synth",
        ctx.seed,
        json!({
            "task_seed": config.seed,
            "domains": config.num_domains,
            "classes": config.num_classes,
            "dim": config.dim,
        }),
    );
    let task = DomainShiftTask::new(config)?;
    let sample = task.sample(docs, &prefix, ctx.seed);
    let labels: Vec<LabelRecord> = sample
        .iter()
        .map(|s| LabelRecord {
            id: s.doc.id.clone(),
            labels: s.labels.clone(),
            domain: Some(s.domain),
        })
        .collect();
    let features: Vec<FeatureDocument> = sample.into_iter().map(|s| s.doc).collect();
    data::write_features(&out_features, format, &m, &features)?;
    data::write_records(&out_labels, &m, &labels)
}

pub fn train_gmm(ctx: &Context, a: TrainGmmArgs) -> CliResult<()> {
    let st = ctx.manifest.stage("train-gmm")?;
    let features = st.path(a.features, "features")?;
    let out = st.path(a.out, "out")?;
    check_paths(&[&features], &[&out])?;
    let format = data::feature_format(&features, st.opt(a.format, "format")?.map(Into::into));
    let components = at_least_one(st.or(a.components, "components", 64)?, "components")?;
    let d = GmmConfig::default();
    let config = GmmConfig {
        variance_floor_frac: positive(
            st.or(a.variance_floor, "variance-floor", d.variance_floor_frac)?,
            "variance-floor",
        )?,
        iters_per_split: st.or(a.iters_per_split, "iters-per-split", d.iters_per_split)?,
        max_final_iters: st.or(a.max_iters, "max-iters", d.max_final_iters)?,
        tol: positive(st.or(a.tol, "tol", d.tol)?, "tol")?,
        ..d
    };
    let docs = data::load_features(&features, format)?;
    let frames = pool_frames(&docs);
    if frames.is_empty() {
        return Err(Error::Empty(format!("{} has no frames", features.display())).into());
    }
    let model = fit_gmm(&frames, components, &config)?;
    let ll = model.avg_log_likelihood(&frames)?;
    log::info!("GMM with {components} components: average log-likelihood {ll}");
    write_json(
        &out,
        &model,
        meta(
            "train-gmm",
            ctx.seed,
            json!({"frames": frames.len(), "avg_log_likelihood": ll}),
        ),
    )
}

pub fn quantize(ctx: &Context, a: QuantizeArgs) -> CliResult<()> {
    let st = ctx.manifest.stage("quantize")?;
    let gmm = st.path(a.gmm, "gmm")?;
    let features = st.path(a.features, "features")?;
    let out_symbols = st.opt_path(a.out_symbols, "out-symbols")?;
    let out_bags = st.opt_path(a.out_bags, "out-bags")?;
    let outputs: Vec<&Path> = out_symbols.iter().chain(&out_bags).map(PathBuf::as_path).collect();
    if outputs.is_empty() {
        return Err(CliError::usage("quantize: give --out-symbols and/or --out-bags"));
    }
    check_paths(&[&gmm, &features], &outputs)?;
    let format = data::feature_format(&features, st.opt(a.format, "format")?.map(Into::into));
    let model: GmmModel = read_json(&gmm)?;
    model.validate()?;
    let docs = data::load_features(&features, format)?;
    let symbols = model.quantize_all(&docs)?;
    let m = meta("quantize", ctx.seed, json!({"V": model.num_components}));
    if let Some(path) = &out_symbols {
        data::write_records(path, &m, &symbols)?;
    }
    if let Some(path) = &out_bags {
        let bags = symbols
            .iter()
            .map(|s| to_bag(s, model.num_components))
            .collect::<ldat_core::Result<Vec<_>>>()?;
        data::write_records(path, &m, &bags)?;
    }
    Ok(())
}

pub fn train_lda(ctx: &Context, a: TrainLdaArgs) -> CliResult<()> {
    let st = ctx.manifest.stage("train-lda")?;
    let bags_path = st.path(a.bags, "bags")?;
    let out = st.path(a.out, "out")?;
    check_paths(&[&bags_path], &[&out])?;
    let k = at_least_one(st.required(a.k, "k")?, "k")?;
    let d = LdaConfig::default();
    let alpha = st.opt(a.alpha, "alpha")?.map(|v| positive(v, "alpha")).transpose()?;
    let smoothing = st.or(a.smoothing, "smoothing", d.smoothing.unwrap_or(0.0))?;
    if !(smoothing >= 0.0 && smoothing.is_finite()) {
        return Err(CliError::usage("--smoothing must be >= 0"));
    }
    let config = LdaConfig {
        alpha,
        smoothing: (smoothing > 0.0).then_some(smoothing),
        em_tol: positive(st.or(a.em_tol, "em-tol", d.em_tol)?, "em-tol")?,
        max_em_iters: st.or(a.max_em_iters, "max-em-iters", d.max_em_iters)?,
        gamma_tol: positive(st.or(a.gamma_tol, "gamma-tol", d.gamma_tol)?, "gamma-tol")?,
        max_e_iters: at_least_one(st.or(a.max_e_iters, "max-e-iters", d.max_e_iters)?, "max-e-iters")?,
        seed: ctx.seed,
        ..d
    };
    let bags = data::read_bags(&bags_path)?;
    let model = fit(&bags, k, &config)?;
    write_json(
        &out,
        &model,
        meta("train-lda", ctx.seed, json!({"documents": bags.len()})),
    )
}

fn inference_config(st: &Stage<'_>, a: InferenceArgs) -> CliResult<LdaConfig> {
    let d = LdaConfig::default();
    Ok(LdaConfig {
        subtract_prior: st.flag(a.subtract_prior, "subtract-prior")?,
        gamma_tol: positive(st.or(a.gamma_tol, "gamma-tol", d.gamma_tol)?, "gamma-tol")?,
        max_e_iters: at_least_one(st.or(a.max_e_iters, "max-e-iters", d.max_e_iters)?, "max-e-iters")?,
        ..d
    })
}

fn infer(model_path: &Path, bags_path: &Path, config: &LdaConfig) -> CliResult<Vec<DomainAssignment>> {
    let model: LdaModel = read_json(model_path)?;
    model.validate()?;
    let bags = data::read_bags(bags_path)?;
    Ok(assign_domains(&model, &bags, config)?)
}

pub fn assign(ctx: &Context, a: AssignArgs) -> CliResult<()> {
    let st = ctx.manifest.stage("assign")?;
    let model = st.path(a.model, "model")?;
    let bags = st.path(a.bags, "bags")?;
    let out = st.path(a.out, "out")?;
    check_paths(&[&model, &bags], &[&out])?;
    let config = inference_config(&st, a.inference)?;
    let assignments = infer(&model, &bags, &config)?;
    let m = meta(
        "assign",
        ctx.seed,
        json!({"subtract_prior": config.subtract_prior}),
    );
    data::write_records(&out, &m, &assignments)
}

pub fn entropy(ctx: &Context, a: EntropyArgs) -> CliResult<()> {
    let st = ctx.manifest.stage("entropy")?;
    let unit = match st.or(a.unit, "unit", UnitArg::Bits)? {
        UnitArg::Bits => EntropyUnit::Bits,
        UnitArg::Nats => EntropyUnit::Nats,
    };
    let precomputed = if a.model.is_some() || a.bags.is_some() {
        None
    } else {
        st.opt_path(a.assignments, "assignments")?
    };
    let assignments = match precomputed {
        Some(path) => data::read_assignments(&path)?,
        None => {
            let model = st.path(a.model, "model")?;
            let bags = st.path(a.bags, "bags")?;
            infer(&model, &bags, &inference_config(&st, a.inference)?)?
        }
    };
    let h = average_domain_entropy(&assignments, unit)?;
    println!("{h:?}");
    Ok(())
}

pub fn filter(ctx: &Context, a: FilterArgs) -> CliResult<()> {
    let st = ctx.manifest.stage("filter")?;
    let path_a = st.path(a.assign_a, "assign-a")?;
    let path_b = st.path(a.assign_b, "assign-b")?;
    let out = st.path(a.out, "out")?;
    let histogram = st.opt_path(a.histogram, "histogram")?;
    let mut outputs: Vec<&Path> = vec![&out];
    outputs.extend(histogram.as_deref());
    check_paths(&[&path_a, &path_b], &outputs)?;
    let (frac, weight) = if a.target_frac.is_some() || a.target_weight.is_some() {
        (a.target_frac, a.target_weight)
    } else {
        (st.opt(None, "target-frac")?, st.opt(None, "target-weight")?)
    };
    enum Target {
        Fraction(f64),
        Weight(f64),
    }
    let target = match (frac, weight) {
        (Some(frac), None) => {
            if !(frac > 0.0 && frac <= 1.0) {
                return Err(CliError::usage("--target-frac must be in (0, 1]"));
            }
            Target::Fraction(frac)
        }
        (None, Some(weight)) => Target::Weight(positive(weight, "target-weight")?),
        (Some(_), Some(_)) => {
            return Err(CliError::usage("filter: set only one of target-frac and target-weight"))
        }
        (None, None) => return Err(CliError::usage("filter: missing --target-frac or --target-weight")),
    };
    let list_a = data::read_assignments(&path_a)?;
    let list_b = data::read_assignments(&path_b)?;
    let total: f64 = list_a.iter().map(|x| x.weight).sum();
    let target = match target {
        Target::Fraction(frac) => frac * total,
        Target::Weight(weight) => weight,
    };
    let result = cross_agreement_filter(&list_a, &list_b, target)?;
    let c = &result.cutoff;
    log::info!(
        "kept {} of {} documents ({} of {} weight); cut-off tuple {:?} at rank {}",
        result.kept_ids.len(),
        list_a.len(),
        c.kept_weight,
        c.total_weight,
        c.tuple,
        c.rank
    );
    let m = meta("filter", ctx.seed, json!({"cutoff": c}));
    #[derive(Serialize)]
    struct Kept<'a> {
        id: &'a str,
    }
    let kept: Vec<Kept<'_>> = result.kept_ids.iter().map(|id| Kept { id }).collect();
    data::write_records(&out, &m, &kept)?;
    if let Some(path) = &histogram {
        write_atomic(path, |w| {
            let mut csv = csv_writer(w, &m)?;
            for bin in &result.tuple_histogram {
                csv.serialize(bin).map_err(csv_err)?;
            }
            csv.flush().map_err(|e| CliError::io(path, e))
        })?;
    }
    Ok(())
}

/// Per-document frame examples; labels must cover every frame.
fn build_examples(
    docs: &[FeatureDocument],
    labels: &HashMap<String, Vec<usize>>,
    ubic: Option<&HashMap<String, UbicVector>>,
) -> CliResult<Vec<Vec<Example>>> {
    docs.iter()
        .map(|doc| {
            let doc_labels = labels.get(&doc.id).ok_or_else(|| {
                Error::MismatchedIds(format!("no labels for document `{}`", doc.id))
            })?;
            if doc_labels.len() != doc.frames.len() {
                return Err(Error::DimensionMismatch {
                    context: format!("labels of `{}`", doc.id),
                    expected: doc.frames.len(),
                    found: doc_labels.len(),
                }
                .into());
            }
            let code = match ubic {
                Some(map) => Some(map.get(&doc.id).cloned().ok_or_else(|| {
                    Error::MismatchedIds(format!("no domain assignment for document `{}`", doc.id))
                })?),
                None => None,
            };
            Ok(doc
                .frames
                .iter()
                .zip(doc_labels)
                .map(|(f, &label)| Example {
                    features: f.clone(),
                    ubic: code,
                    label,
                })
                .collect())
        })
        .collect()
}

fn read_ubic(path: &Path) -> CliResult<(usize, HashMap<String, UbicVector>)> {
    let assignments = data::read_assignments(path)?;
    let k = assignments
        .first()
        .map(DomainAssignment::num_domains)
        .ok_or_else(|| Error::Empty(format!("{} has no assignments", path.display())))?;
    let map = assignments
        .iter()
        .map(|x| (x.doc_id.clone(), ubic_encode(x)))
        .collect();
    Ok((k, map))
}

fn describe(e: &Evaluation) -> Value {
    json!({"loss": e.loss, "accuracy": e.accuracy})
}

pub fn augment_train(ctx: &Context, a: AugmentTrainArgs) -> CliResult<()> {
    let st = ctx.manifest.stage("augment-train")?;
    let features = st.path(a.features, "features")?;
    let labels_path = st.path(a.labels, "labels")?;
    let assignments = st.opt_path(a.assignments, "assignments")?;
    let init_from = st.opt_path(a.init_from, "init-from")?;
    let keep = st.opt_path(a.keep, "keep")?;
    let out = st.path(a.out, "out")?;
    let metrics = st.opt_path(a.metrics, "metrics")?;
    let mut inputs: Vec<&Path> = vec![&features, &labels_path];
    inputs.extend(assignments.as_deref());
    inputs.extend(init_from.as_deref());
    inputs.extend(keep.as_deref());
    let mut outputs: Vec<&Path> = vec![&out];
    outputs.extend(metrics.as_deref());
    check_paths(&inputs, &outputs)?;

    let format = data::feature_format(&features, st.opt(a.format, "format")?.map(Into::into));
    let d = TrainConfig::default();
    let cv_frac = st.or(a.cv_frac, "cv-frac", 0.1)?;
    if !(0.0..1.0).contains(&cv_frac) {
        return Err(CliError::usage("--cv-frac must be in [0, 1)"));
    }
    let config = TrainConfig {
        epochs: st.or(a.epochs, "epochs", d.epochs)?,
        learning_rate: positive(st.or(a.learning_rate, "learning-rate", d.learning_rate)?, "learning-rate")?,
        batch_size: at_least_one(st.or(a.batch_size, "batch-size", d.batch_size)?, "batch-size")?,
        halve_on_cv_increase: !st.flag(a.no_halving, "no-halving")?,
        seed: ctx.seed,
    };

    let mut docs = data::load_features(&features, format)?;
    if let Some(path) = &keep {
        let ids = data::read_ids(path)?;
        docs.retain(|doc| ids.contains(&doc.id));
        log::info!("training on {} documents listed in {}", docs.len(), path.display());
    }
    let dim = validate_features(&docs)?
        .ok_or_else(|| Error::Empty("no training frames".into()))?;
    let labels = data::read_labels(&labels_path)?;
    let ubic = assignments.as_deref().map(read_ubic).transpose()?;
    let num_domains = ubic.as_ref().map(|(k, _)| *k);

    let net = match &init_from {
        Some(path) => {
            let base: LdatNetwork = read_json(path)?;
            base.validate()?;
            match (base.domain_dim, num_domains) {
                (0, Some(k)) => init_augmented_from_baseline(&base, k)?,
                (have, Some(k)) if have != k => {
                    return Err(Error::DimensionMismatch {
                        context: format!("domain inputs of {}", path.display()),
                        expected: have,
                        found: k,
                    }
                    .into())
                }
                (have, None) if have > 0 => {
                    return Err(CliError::usage(format!(
                        "{} expects {have} domain inputs; give --assignments",
                        path.display()
                    )))
                }
                _ => base,
            }
        }
        None => {
            let classes = match st.opt(a.classes, "classes")? {
                Some(c) => at_least_one(c, "classes")?,
                None => {
                    docs.iter()
                        .filter_map(|doc| labels.get(&doc.id))
                        .flatten()
                        .max()
                        .copied()
                        .unwrap_or(0)
                        + 1
                }
            };
            let defaults = NetworkConfig::new(dim, classes);
            let activation = match st.opt(a.activation, "activation")? {
                Some(ActivationArg::Relu) => Activation::Relu,
                Some(ActivationArg::Sigmoid) => Activation::Sigmoid,
                None => defaults.activation,
            };
            LdatNetwork::new(&NetworkConfig {
                domain_dim: num_domains.unwrap_or(0),
                hidden_dims: st.or(a.hidden, "hidden", defaults.hidden_dims.clone())?,
                activation,
                seed: ctx.seed,
                ..defaults
            })?
        }
    };

    let per_doc = build_examples(&docs, &labels, ubic.as_ref().map(|(_, m)| m))?;
    let mut order: Vec<usize> = (0..per_doc.len()).collect();
    order.shuffle(&mut derive(ctx.seed, CV_SPLIT_STREAM));
    let mut n_cv = (cv_frac * per_doc.len() as f64).round() as usize;
    if cv_frac > 0.0 && per_doc.len() > 1 {
        n_cv = n_cv.clamp(1, per_doc.len() - 1);
    }
    let mut is_cv = vec![false; per_doc.len()];
    for &i in &order[..n_cv] {
        is_cv[i] = true;
    }
    let mut train_set = Vec::new();
    let mut cv_set = Vec::new();
    for (examples, cv) in per_doc.into_iter().zip(is_cv) {
        if cv {
            cv_set.extend(examples);
        } else {
            train_set.extend(examples);
        }
    }
    log::info!(
        "{} training frames, {} held-out frames, {} parameters",
        train_set.len(),
        cv_set.len(),
        net.num_parameters()
    );
    let (net, history) = train(net, &train_set, &cv_set, &config)?;
    let final_eval = describe(&evaluate(&net, &cv_set)?);
    log::info!("held-out after training: {final_eval}");
    let m = meta(
        "augment-train",
        ctx.seed,
        json!({
            "epochs": config.epochs,
            "train_frames": train_set.len(),
            "cv_frames": cv_set.len(),
            "cv": final_eval,
        }),
    );
    write_json(&out, &net, m.clone())?;
    if let Some(path) = &metrics {
        write_atomic(path, |w| {
            let mut csv = csv_writer(w, &m)?;
            csv.write_record(["epoch", "train_loss", "cv_accuracy", "cv_loss", "learning_rate"])
                .map_err(csv_err)?;
            for e in &history {
                csv.write_record([
                    e.epoch.to_string(),
                    format!("{:?}", e.train_loss),
                    format!("{:?}", e.cv_accuracy),
                    format!("{:?}", e.cv_loss),
                    format!("{:?}", e.learning_rate),
                ])
                .map_err(csv_err)?;
            }
            csv.flush().map_err(|e| CliError::io(path, e))
        })?;
    }
    Ok(())
}

pub fn eval(ctx: &Context, a: EvalArgs) -> CliResult<()> {
    let st = ctx.manifest.stage("eval")?;
    let model = st.path(a.model, "model")?;
    let features = st.path(a.features, "features")?;
    let labels_path = st.path(a.labels, "labels")?;
    let assignments = st.opt_path(a.assignments, "assignments")?;
    let out = st.opt_path(a.out, "out")?;
    let mut inputs: Vec<&Path> = vec![&model, &features, &labels_path];
    inputs.extend(assignments.as_deref());
    check_paths(&inputs, &out.iter().map(PathBuf::as_path).collect::<Vec<_>>())?;

    let format = data::feature_format(&features, st.opt(a.format, "format")?.map(Into::into));
    let net: LdatNetwork = read_json(&model)?;
    net.validate()?;
    let ubic = match (&assignments, net.domain_dim) {
        (Some(path), _) => Some(read_ubic(path)?.1),
        (None, 0) => None,
        (None, k) => {
            return Err(CliError::usage(format!(
                "network expects {k} domain inputs; give --assignments"
            )))
        }
    };
    let docs = data::load_features(&features, format)?;
    let labels = data::read_labels(&labels_path)?;
    let examples: Vec<Example> = build_examples(&docs, &labels, ubic.as_ref())?
        .into_iter()
        .flatten()
        .collect();
    let result = evaluate(&net, &examples)?;
    let report = json!({
        "documents": docs.len(),
        "frames": examples.len(),
        "accuracy": result.accuracy,
        "loss": result.loss,
    });
    println!("{report}");
    if let Some(path) = &out {
        write_json(path, &report, meta("eval", ctx.seed, json!({})))?;
    }
    Ok(())
}

pub fn stats(ctx: &Context, a: StatsArgs) -> CliResult<()> {
    let st = ctx.manifest.stage("stats")?;
    let assignments_path = st.path(a.assignments, "assignments")?;
    let groups_from = st.opt_path(a.groups_from, "groups-from")?;
    let out = st.path(a.out, "out")?;
    let mut inputs: Vec<&Path> = vec![&assignments_path];
    inputs.extend(groups_from.as_deref());
    check_paths(&inputs, &[&out])?;
    let default_grouping = if groups_from.is_some() {
        GroupBy::Label
    } else {
        GroupBy::None
    };
    let group_by = st.or(a.group_by, "group-by", default_grouping)?;
    let top_n = at_least_one(st.or(a.top_n, "top-n", 16)?, "top-n")?;

    let assignments = data::read_assignments(&assignments_path)?;
    let group_of: HashMap<String, String> = match group_by {
        GroupBy::None => assignments
            .iter()
            .map(|x| (x.doc_id.clone(), "all".to_string()))
            .collect(),
        GroupBy::Label => {
            let path = groups_from
                .as_deref()
                .ok_or_else(|| CliError::usage("--group-by label needs --groups-from"))?;
            data::read_groups(path)?
        }
    };
    let rows = distribution_stats(&assignments, &group_of, top_n)?;
    let m = meta("stats", ctx.seed, json!({"top_n": top_n}));
    write_atomic(&out, |w| {
        let mut csv = csv_writer(w, &m)?;
        csv.write_record(["group", "domain", "weight"]).map_err(csv_err)?;
        for r in &rows {
            csv.write_record([r.group.clone(), r.domain.to_string(), format!("{:?}", r.weight)])
                .map_err(csv_err)?;
        }
        csv.flush().map_err(|e| CliError::io(&out, e))
    })
}
