//! Hard domain assignment, UBIC codes, entropy diagnostics, two-model
//! cross-agreement filtering and per-group distribution tables.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::corpus::BagOfSounds;
use crate::error::{Error, Result};
use crate::lda::{infer_all, LdaConfig, LdaModel};
use crate::math::{argmax_first, entropy_nats};

/// MAP domain of one document together with its posterior.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DomainAssignment {
    #[serde(rename = "id")]
    pub doc_id: String,
    pub theta: Vec<f64>,
    pub map_domain: usize,
    /// Aggregation weight; the document's token (frame) count by default.
    #[serde(default = "unit_weight")]
    pub weight: f64,
}

fn unit_weight() -> f64 {
    1.0
}

impl DomainAssignment {
    /// Builds an assignment whose MAP domain is argmax θ (lowest index on ties).
    pub fn from_theta(doc_id: impl Into<String>, theta: Vec<f64>, weight: f64) -> Self {
        let map_domain = argmax_first(&theta);
        Self {
            doc_id: doc_id.into(),
            theta,
            map_domain,
            weight,
        }
    }

    pub fn num_domains(&self) -> usize {
        self.theta.len()
    }

    pub fn validate(&self) -> Result<()> {
        let k = self.theta.len();
        if k == 0 {
            return Err(Error::InvalidArgument(format!(
                "assignment `{}` has an empty theta",
                self.doc_id
            )));
        }
        let sum: f64 = self.theta.iter().sum();
        if (sum - 1.0).abs() > 1e-9 || self.theta.iter().any(|t| !(*t >= 0.0)) {
            return Err(Error::InvalidArgument(format!(
                "assignment `{}`: theta is not a distribution (sum {sum})",
                self.doc_id
            )));
        }
        if self.map_domain != argmax_first(&self.theta) {
            return Err(Error::InvalidArgument(format!(
                "assignment `{}`: map_domain {} is not argmax theta",
                self.doc_id, self.map_domain
            )));
        }
        if !(self.weight >= 0.0) || !self.weight.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "assignment `{}`: weight must be non-negative",
                self.doc_id
            )));
        }
        Ok(())
    }
}

/// Unique Binary Index Code: a one-hot K-vector marking the MAP domain.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct UbicVector {
    num_domains: usize,
    index: usize,
}

impl UbicVector {
    pub fn new(num_domains: usize, index: usize) -> Result<Self> {
        if index >= num_domains {
            return Err(Error::InvalidArgument(format!(
                "UBIC index {index} out of range for K={num_domains}"
            )));
        }
        Ok(Self { num_domains, index })
    }

    /// Parses a dense vector that must contain exactly one 1 and zeros elsewhere.
    pub fn from_dense(code: &[f64]) -> Result<Self> {
        let mut index = None;
        for (i, &v) in code.iter().enumerate() {
            if v == 1.0 && index.is_none() {
                index = Some(i);
            } else if v != 0.0 {
                return Err(Error::InvalidArgument(format!(
                    "UBIC must be one-hot, found {v} at position {i}"
                )));
            }
        }
        let index = index
            .ok_or_else(|| Error::InvalidArgument("UBIC must contain exactly one 1".into()))?;
        Self::new(code.len(), index)
    }

    pub fn num_domains(&self) -> usize {
        self.num_domains
    }

    pub fn index(&self) -> usize {
        self.index
    }

    pub fn to_dense(&self) -> Vec<f64> {
        let mut v = vec![0.0; self.num_domains];
        v[self.index] = 1.0;
        v
    }
}

pub fn ubic_encode(assignment: &DomainAssignment) -> UbicVector {
    UbicVector {
        num_domains: assignment.num_domains(),
        index: assignment.map_domain,
    }
}

/// Infers θ for every document and takes the MAP domain. Each assignment is
/// weighted by the document's token count.
pub fn assign(
    model: &LdaModel,
    corpus: &[BagOfSounds],
    config: &LdaConfig,
) -> Result<Vec<DomainAssignment>> {
    if corpus.is_empty() {
        return Err(Error::Empty("no documents to assign".into()));
    }
    let thetas = infer_all(model, corpus, config)?;
    Ok(corpus
        .iter()
        .zip(thetas)
        .map(|(doc, inf)| DomainAssignment::from_theta(doc.id.clone(), inf.theta, doc.total as f64))
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum EntropyUnit {
    #[default]
    Bits,
    Nats,
}

/// Mean over documents of the posterior entropy −Σ θ log θ.
pub fn average_domain_entropy(assignments: &[DomainAssignment], unit: EntropyUnit) -> Result<f64> {
    if assignments.is_empty() {
        return Err(Error::Empty("no assignments for entropy".into()));
    }
    let total: f64 = assignments.iter().map(|a| entropy_nats(&a.theta)).sum();
    let mean = total / assignments.len() as f64;
    Ok(match unit {
        EntropyUnit::Nats => mean,
        EntropyUnit::Bits => mean / std::f64::consts::LN_2,
    })
}

/// One cell of the K_a × K_b domain-tuple histogram.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TupleBin {
    pub domain_a: usize,
    pub domain_b: usize,
    pub weight: f64,
    /// `weight` divided by the total corpus weight.
    pub normalized: f64,
    pub docs: usize,
    /// Position in the descending-weight order (0 = most frequent).
    pub rank: usize,
    pub kept: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FilterCutoff {
    /// Lowest-ranked tuple that was kept.
    pub tuple: (usize, usize),
    pub rank: usize,
    /// Normalized weight of the cut-off tuple.
    pub normalized_weight: f64,
    pub kept_weight: f64,
    pub target_weight: f64,
    pub total_weight: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FilterResult {
    /// Kept document ids, in the order of the first assignment list.
    pub kept_ids: Vec<String>,
    /// All K_a·K_b tuples, in rank order.
    pub tuple_histogram: Vec<TupleBin>,
    pub cutoff: FilterCutoff,
}

fn common_k(assignments: &[DomainAssignment], which: &str) -> Result<usize> {
    let k = assignments
        .first()
        .map(DomainAssignment::num_domains)
        .ok_or_else(|| Error::Empty(format!("assignment list {which} is empty")))?;
    for a in assignments {
        if a.num_domains() != k {
            return Err(Error::dims(format!("assignment list {which}"), k, a.num_domains()));
        }
        if a.map_domain >= k {
            return Err(Error::InvalidArgument(format!(
                "assignment `{}` has map_domain {} >= K={k}",
                a.doc_id, a.map_domain
            )));
        }
    }
    Ok(k)
}

/// Keeps the documents whose (domain_a, domain_b) tuple is among the most
/// frequent tuples, taking whole tuples in descending weight order (ties by
/// tuple index a·K_b + b) until the kept weight first reaches `target_weight`.
/// Document weights come from `assign_a`.
pub fn cross_agreement_filter(
    assign_a: &[DomainAssignment],
    assign_b: &[DomainAssignment],
    target_weight: f64,
) -> Result<FilterResult> {
    if !(target_weight > 0.0) || !target_weight.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "target weight must be positive, got {target_weight}"
        )));
    }
    let ka = common_k(assign_a, "a")?;
    let kb = common_k(assign_b, "b")?;
    let mut b_by_id: HashMap<&str, usize> = HashMap::with_capacity(assign_b.len());
    for b in assign_b {
        if b_by_id.insert(b.doc_id.as_str(), b.map_domain).is_some() {
            return Err(Error::DuplicateId(b.doc_id.clone()));
        }
    }
    let mut seen = HashSet::with_capacity(assign_a.len());
    let mut doc_tuples = Vec::with_capacity(assign_a.len());
    for a in assign_a {
        if !seen.insert(a.doc_id.as_str()) {
            return Err(Error::DuplicateId(a.doc_id.clone()));
        }
        let b = b_by_id.get(a.doc_id.as_str()).ok_or_else(|| {
            Error::MismatchedIds(format!("`{}` missing from assignment list b", a.doc_id))
        })?;
        doc_tuples.push(a.map_domain * kb + b);
    }
    if assign_a.len() != assign_b.len() {
        let extra = assign_b
            .iter()
            .find(|b| !seen.contains(b.doc_id.as_str()))
            .map(|b| b.doc_id.clone())
            .unwrap_or_default();
        return Err(Error::MismatchedIds(format!(
            "`{extra}` missing from assignment list a"
        )));
    }

    let mut weights = vec![0.0; ka * kb];
    let mut counts = vec![0usize; ka * kb];
    for (a, &t) in assign_a.iter().zip(&doc_tuples) {
        weights[t] += a.weight;
        counts[t] += 1;
    }
    let mut order: Vec<usize> = (0..ka * kb).collect();
    order.sort_by(|&x, &y| weights[y].total_cmp(&weights[x]).then(x.cmp(&y)));

    let total: f64 = order.iter().map(|&t| weights[t]).sum();
    if target_weight > total * (1.0 + 1e-12) {
        return Err(Error::InvalidArgument(format!(
            "target weight {target_weight} exceeds total corpus weight {total}"
        )));
    }
    let mut kept_weight = 0.0;
    let mut last_rank = order.len() - 1;
    for (rank, &t) in order.iter().enumerate() {
        kept_weight += weights[t];
        if kept_weight >= target_weight {
            last_rank = rank;
            break;
        }
    }
    let mut kept_tuple = vec![false; ka * kb];
    for &t in &order[..=last_rank] {
        kept_tuple[t] = true;
    }
    let kept_ids = assign_a
        .iter()
        .zip(&doc_tuples)
        .filter(|(_, &t)| kept_tuple[t])
        .map(|(a, _)| a.doc_id.clone())
        .collect();
    let normalize = |w: f64| if total > 0.0 { w / total } else { 0.0 };
    let tuple_histogram = order
        .iter()
        .enumerate()
        .map(|(rank, &t)| TupleBin {
            domain_a: t / kb,
            domain_b: t % kb,
            weight: weights[t],
            normalized: normalize(weights[t]),
            docs: counts[t],
            rank,
            kept: kept_tuple[t],
        })
        .collect();
    let cut = order[last_rank];
    Ok(FilterResult {
        kept_ids,
        tuple_histogram,
        cutoff: FilterCutoff {
            tuple: (cut / kb, cut % kb),
            rank: last_rank,
            normalized_weight: normalize(weights[cut]),
            kept_weight,
            target_weight,
            total_weight: total,
        },
    })
}

/// Domain column of a distribution table: a ranked domain or the remainder.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum DomainLabel {
    Domain(usize),
    Other,
}

impl fmt::Display for DomainLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DomainLabel::Domain(k) => write!(f, "{k}"),
            DomainLabel::Other => f.write_str("other"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StatRow {
    pub group: String,
    pub domain: DomainLabel,
    pub weight: f64,
}

/// Aggregates assignment weight per (group, MAP domain). Domains are ranked
/// by total weight across all groups (ties by index); the top `top_n` are
/// reported individually and the rest are summed into `other`. Every group
/// gets a row for every reported category, so groups line up for plotting.
/// Groups appear in lexical order.
pub fn distribution_stats(
    assignments: &[DomainAssignment],
    group_of: &HashMap<String, String>,
    top_n: usize,
) -> Result<Vec<StatRow>> {
    if assignments.is_empty() {
        return Ok(Vec::new());
    }
    let k = common_k(assignments, "for stats")?;
    let mut domain_total = vec![0.0; k];
    let mut per_group: BTreeMap<&str, Vec<f64>> = BTreeMap::new();
    for a in assignments {
        let group = group_of.get(&a.doc_id).ok_or_else(|| {
            Error::InvalidArgument(format!("no group mapping for document `{}`", a.doc_id))
        })?;
        domain_total[a.map_domain] += a.weight;
        per_group.entry(group.as_str()).or_insert_with(|| vec![0.0; k])[a.map_domain] += a.weight;
    }
    let mut ranked: Vec<usize> = (0..k).collect();
    ranked.sort_by(|&x, &y| domain_total[y].total_cmp(&domain_total[x]).then(x.cmp(&y)));
    let shown = top_n.min(k);
    let mut rows = Vec::new();
    for (group, weights) in per_group {
        for &d in &ranked[..shown] {
            rows.push(StatRow {
                group: group.to_string(),
                domain: DomainLabel::Domain(d),
                weight: weights[d],
            });
        }
        if shown < k {
            rows.push(StatRow {
                group: group.to_string(),
                domain: DomainLabel::Other,
                weight: ranked[shown..].iter().map(|&d| weights[d]).sum(),
            });
        }
    }
    Ok(rows)
}
