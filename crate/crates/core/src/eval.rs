//! Retrieval evaluation: rankings, precision-recall curves and mean average
//! precision over a labeled collection, plus object-level (downstream)
//! similarity network fusion.

use std::collections::BTreeMap;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::kernel::{self, KernelParams};
use crate::matrix::SquareMatrix;
use crate::snf::{self, SnfParams};

/// Object-level scores: smaller distance or larger similarity ranks first.
#[derive(Debug, Clone, PartialEq)]
pub enum ObjectScores {
    Distance(SquareMatrix),
    Similarity(SquareMatrix),
}

impl ObjectScores {
    pub fn matrix(&self) -> &SquareMatrix {
        match self {
            ObjectScores::Distance(m) | ObjectScores::Similarity(m) => m,
        }
    }
}

/// Items with class labels and pairwise scores.
#[derive(Debug, Clone)]
pub struct LabeledCollection {
    labels: Vec<String>,
    class_of: Vec<usize>,
    class_sizes: Vec<usize>,
    scores: ObjectScores,
}

impl LabeledCollection {
    pub fn new(labels: Vec<String>, scores: ObjectScores) -> Result<Self> {
        let n = scores.matrix().n();
        if labels.len() != n {
            return Err(Error::SizeMismatch {
                expected: n,
                found: labels.len(),
            });
        }
        if let Some(index) = scores.matrix().values().iter().position(|v| v.is_nan()) {
            return Err(Error::NonFinite { index });
        }
        let mut ids: BTreeMap<&str, usize> = BTreeMap::new();
        for l in &labels {
            let next = ids.len();
            ids.entry(l.as_str()).or_insert(next);
        }
        let class_of: Vec<usize> = labels.iter().map(|l| ids[l.as_str()]).collect();
        let mut class_sizes = vec![0; ids.len()];
        for &c in &class_of {
            class_sizes[c] += 1;
        }
        Ok(Self {
            labels,
            class_of,
            class_sizes,
            scores,
        })
    }

    pub fn with_distances(labels: Vec<String>, d: SquareMatrix) -> Result<Self> {
        Self::new(labels, ObjectScores::Distance(d))
    }

    pub fn with_similarities(labels: Vec<String>, s: SquareMatrix) -> Result<Self> {
        Self::new(labels, ObjectScores::Similarity(s))
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn scores(&self) -> &ObjectScores {
        &self.scores
    }

    /// Number of items sharing `item`'s class, `item` excluded.
    pub fn relevant_count(&self, item: usize) -> usize {
        self.class_sizes[self.class_of[item]] - 1
    }

    pub fn is_relevant(&self, query: usize, item: usize) -> bool {
        item != query && self.class_of[item] == self.class_of[query]
    }
}

/// The other `n - 1` items ordered best-first; ties go to the lower index.
pub fn rank_items(query: usize, collection: &LabeledCollection) -> Result<Vec<usize>> {
    let n = collection.len();
    if query >= n {
        return Err(Error::IndexOutOfRange { index: query, len: n });
    }
    let mut order: Vec<usize> = (0..n).filter(|&i| i != query).collect();
    match &collection.scores {
        ObjectScores::Distance(d) => {
            let row = d.row(query);
            order.sort_unstable_by(|&a, &b| row[a].total_cmp(&row[b]).then(a.cmp(&b)));
        }
        ObjectScores::Similarity(s) => {
            let row = s.row(query);
            order.sort_unstable_by(|&a, &b| row[b].total_cmp(&row[a]).then(a.cmp(&b)));
        }
    }
    Ok(order)
}

/// One point per relevant item: recall `i / R` and precision `i / rank`.
#[derive(Debug, Clone, PartialEq)]
pub struct PrCurve {
    pub recalls: Vec<f64>,
    pub precisions: Vec<f64>,
}

impl PrCurve {
    /// Mean of the precisions at the relevant items.
    pub fn average_precision(&self) -> f64 {
        self.precisions.iter().sum::<f64>() / self.precisions.len() as f64
    }
}

pub fn precision_recall(query: usize, collection: &LabeledCollection) -> Result<PrCurve> {
    let ranking = rank_items(query, collection)?;
    let total = collection.relevant_count(query);
    if total == 0 {
        return Err(Error::SingletonClass { item: query });
    }
    let mut recalls = Vec::with_capacity(total);
    let mut precisions = Vec::with_capacity(total);
    let mut hits = 0usize;
    for (pos, &item) in ranking.iter().enumerate() {
        if collection.is_relevant(query, item) {
            hits += 1;
            recalls.push(hits as f64 / total as f64);
            precisions.push(hits as f64 / (pos + 1) as f64);
            if hits == total {
                break;
            }
        }
    }
    Ok(PrCurve { recalls, precisions })
}

/// Per-query average precision for every item, in item order.
pub fn average_precisions(collection: &LabeledCollection) -> Result<Vec<f64>> {
    (0..collection.len())
        .into_par_iter()
        .map(|q| precision_recall(q, collection).map(|c| c.average_precision()))
        .collect()
}

/// Mean over all queries of their average precision.
pub fn mean_average_precision(collection: &LabeledCollection) -> Result<f64> {
    let aps = average_precisions(collection)?;
    if aps.is_empty() {
        return Err(Error::EmptyInput);
    }
    Ok(aps.iter().sum::<f64>() / aps.len() as f64)
}

/// Summary of a retrieval evaluation.
#[derive(Debug, Clone, PartialEq)]
pub struct RetrievalReport {
    pub map: f64,
    pub per_class_map: BTreeMap<String, f64>,
    pub average_precisions: Vec<f64>,
    /// Mean precision at each distinct recall level, ascending in recall.
    pub mean_curve: Vec<(f64, f64)>,
}

pub fn evaluate(collection: &LabeledCollection) -> Result<RetrievalReport> {
    let curves: Vec<PrCurve> = (0..collection.len())
        .into_par_iter()
        .map(|q| precision_recall(q, collection))
        .collect::<Result<_>>()?;
    if curves.is_empty() {
        return Err(Error::EmptyInput);
    }
    let aps: Vec<f64> = curves.iter().map(PrCurve::average_precision).collect();
    let map = aps.iter().sum::<f64>() / aps.len() as f64;

    let mut by_class: BTreeMap<String, (f64, usize)> = BTreeMap::new();
    for (label, ap) in collection.labels.iter().zip(&aps) {
        let e = by_class.entry(label.clone()).or_insert((0.0, 0));
        e.0 += ap;
        e.1 += 1;
    }
    let per_class_map = by_class
        .into_iter()
        .map(|(k, (sum, count))| (k, sum / count as f64))
        .collect();

    // Recalls i/R are correctly rounded quotients, so equal rationals share
    // a bit pattern; positive floats order like their bits.
    let mut levels: BTreeMap<u64, (f64, usize)> = BTreeMap::new();
    for c in &curves {
        for (&r, &p) in c.recalls.iter().zip(&c.precisions) {
            let e = levels.entry(r.to_bits()).or_insert((0.0, 0));
            e.0 += p;
            e.1 += 1;
        }
    }
    let mean_curve = levels
        .into_iter()
        .map(|(bits, (sum, count))| (f64::from_bits(bits), sum / count as f64))
        .collect();

    Ok(RetrievalReport {
        map,
        per_class_map,
        average_precisions: aps,
        mean_curve,
    })
}

/// Downstream fusion: converts each object-level distance matrix into an
/// affinity with the autotuned kernel and fuses them. The result is a
/// similarity, to be ranked in descending order.
pub fn downstream_fuse(
    mus: &[SquareMatrix],
    kernel_params: &KernelParams,
    snf_params: &SnfParams,
) -> Result<SquareMatrix> {
    if mus.len() < 2 {
        return Err(Error::TooFewModalities { found: mus.len() });
    }
    let n = mus[0].n();
    if let Some(bad) = mus.iter().find(|m| m.n() != n) {
        return Err(Error::SizeMismatch {
            expected: n,
            found: bad.n(),
        });
    }
    let ws = mus
        .iter()
        .map(|mu| kernel::affinity(mu, kernel_params))
        .collect::<Result<Vec<_>>>()?;
    snf::snf_fuse(&ws, snf_params)
}
