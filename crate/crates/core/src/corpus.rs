//! Labeled corpora for the three evaluation regimes, judgment filtering,
//! annotator agreement, and the stratified train/validation/test split.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("no aggregation for item `{item}`")]
    MissingAggregation { item: String },
    #[error("agreement undefined: fewer than two pairable ratings")]
    UndefinedAgreement,
    #[error("worker `{worker}` rated item `{item}` more than once")]
    DuplicateJudgment { worker: String, item: String },
    #[error("duplicate statement id `{id}`")]
    DuplicateId { id: String },
    #[error("neutral pool exhausted: need {needed}, have {available}")]
    PoolExhausted { needed: usize, available: usize },
    #[error("stratum `{article_type}` exhausted: need {needed}, have {available}")]
    StratumExhausted {
        article_type: String,
        needed: usize,
        available: usize,
    },
    #[error("need at least {min} statements, got {n}")]
    TooSmall { n: usize, min: usize },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Label {
    Biased,
    Neutral,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Rating {
    Neutral,
    Biased,
    DontKnow,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Source {
    CrowdPov,
    FeaturedArticle,
}

/// One line of the corpus JSONL format.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct LabeledStatement {
    pub id: String,
    pub text: String,
    pub label: Label,
    pub confidence: f64,
    pub article_type: String,
    pub source: Source,
    /// Optional pre-supplied POS tags; bypasses the built-in tagger.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pos: Option<Vec<String>>,
}

/// One line of the judgments JSONL format.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct JudgmentRecord {
    pub worker_id: String,
    pub item_id: String,
    pub rating: Rating,
}

/// Sparse worker-by-item rating table.
#[derive(Clone, Debug, Default)]
pub struct JudgmentTable {
    pub items: Vec<String>,
    pub workers: Vec<String>,
    /// (worker index, item index) -> rating.
    ratings: BTreeMap<(usize, usize), Rating>,
}

impl JudgmentTable {
    pub fn from_records<I>(records: I) -> Result<Self, CorpusError>
    where
        I: IntoIterator<Item = JudgmentRecord>,
    {
        let mut table = JudgmentTable::default();
        let mut worker_idx: BTreeMap<String, usize> = BTreeMap::new();
        let mut item_idx: BTreeMap<String, usize> = BTreeMap::new();
        for rec in records {
            let w = *worker_idx.entry(rec.worker_id.clone()).or_insert_with(|| {
                table.workers.push(rec.worker_id.clone());
                table.workers.len() - 1
            });
            let i = *item_idx.entry(rec.item_id.clone()).or_insert_with(|| {
                table.items.push(rec.item_id.clone());
                table.items.len() - 1
            });
            if table.ratings.insert((w, i), rec.rating).is_some() {
                return Err(CorpusError::DuplicateJudgment {
                    worker: rec.worker_id,
                    item: rec.item_id,
                });
            }
        }
        Ok(table)
    }

    pub fn rating(&self, worker: usize, item: usize) -> Option<Rating> {
        self.ratings.get(&(worker, item)).copied()
    }

    pub fn len(&self) -> usize {
        self.ratings.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ratings.is_empty()
    }

    /// Ratings grouped per item, in item order.
    fn ratings_by_item(&self) -> Vec<Vec<Rating>> {
        let mut per_item = vec![Vec::new(); self.items.len()];
        for (&(_, item), &rating) in &self.ratings {
            per_item[item].push(rating);
        }
        per_item
    }
}

/// Krippendorff's alpha for nominal data: `1 - D_o / D_e` over the
/// coincidence matrix. Items with a single rating cannot form pairs and are
/// excluded. Exactly 1.0 on perfect agreement; can be negative.
pub fn krippendorff_alpha(table: &JudgmentTable) -> Result<f64, CorpusError> {
    const K: usize = 3; // Neutral, Biased, DontKnow
    let cat = |r: Rating| match r {
        Rating::Neutral => 0usize,
        Rating::Biased => 1,
        Rating::DontKnow => 2,
    };

    let mut coincidence = [[0.0f64; K]; K];
    let mut pairable = 0usize;
    for ratings in table.ratings_by_item() {
        let m = ratings.len();
        if m < 2 {
            continue;
        }
        pairable += m;
        let mut counts = [0usize; K];
        for &r in &ratings {
            counts[cat(r)] += 1;
        }
        // Each ordered pair of distinct rating instances in the item
        // contributes weight 1/(m-1).
        let w = 1.0 / (m as f64 - 1.0);
        for c in 0..K {
            for k in 0..K {
                let pairs = if c == k {
                    counts[c] * counts[c].saturating_sub(1)
                } else {
                    counts[c] * counts[k]
                };
                coincidence[c][k] += w * pairs as f64;
            }
        }
    }
    if pairable < 2 {
        return Err(CorpusError::UndefinedAgreement);
    }

    let marginals: Vec<f64> = (0..K).map(|c| coincidence[c].iter().sum()).collect();
    let n: f64 = marginals.iter().sum();
    let observed: f64 = (0..K)
        .flat_map(|c| (0..K).filter(move |&k| k != c).map(move |k| (c, k)))
        .map(|(c, k)| coincidence[c][k])
        .sum();
    let expected: f64 = (0..K)
        .flat_map(|c| (0..K).filter(move |&k| k != c).map(move |k| (c, k)))
        .map(|(c, k)| marginals[c] * marginals[k])
        .sum::<f64>()
        / (n - 1.0);

    if expected == 0.0 {
        // Only one category present anywhere: perfect agreement.
        return Ok(1.0);
    }
    Ok(1.0 - observed / expected)
}

/// Aggregated label, confidence and statement payload for one item. The
/// payload is carried here so retained items come out as full
/// `LabeledStatement`s.
#[derive(Clone, Debug)]
pub struct AggregatedStatement {
    pub text: String,
    pub article_type: String,
    pub label: Rating,
    pub confidence: f64,
}

/// Minimum aggregation confidence for a statement to be retained.
pub const CONFIDENCE_THRESHOLD: f64 = 0.6;

/// Drop don't-know items and items below the confidence threshold; keep the
/// rest with their labels. Every item in the table must be aggregated.
pub fn filter_judgments(
    table: &JudgmentTable,
    aggregated: &BTreeMap<String, AggregatedStatement>,
) -> Result<Vec<LabeledStatement>, CorpusError> {
    let mut kept = Vec::new();
    for item in &table.items {
        let agg = aggregated
            .get(item)
            .ok_or_else(|| CorpusError::MissingAggregation { item: item.clone() })?;
        let label = match agg.label {
            Rating::DontKnow => continue,
            Rating::Biased => Label::Biased,
            Rating::Neutral => Label::Neutral,
        };
        if agg.confidence < CONFIDENCE_THRESHOLD {
            continue;
        }
        kept.push(LabeledStatement {
            id: item.clone(),
            text: agg.text.clone(),
            label,
            confidence: agg.confidence,
            article_type: agg.article_type.clone(),
            source: Source::CrowdPov,
            pos: None,
        });
    }
    Ok(kept)
}

/// Fallback aggregation for self-annotated fixtures: majority rating with
/// confidence = fraction of judgments agreeing with the majority. A tied
/// majority aggregates as don't-know (and is later dropped).
pub fn aggregate_judgments(table: &JudgmentTable) -> BTreeMap<String, (Rating, f64)> {
    let per_item = table.ratings_by_item();
    let mut out = BTreeMap::new();
    for (idx, ratings) in per_item.iter().enumerate() {
        if ratings.is_empty() {
            continue;
        }
        let mut counts: BTreeMap<Rating, usize> = BTreeMap::new();
        for &r in ratings {
            *counts.entry(r).or_insert(0) += 1;
        }
        let top = counts.values().copied().max().unwrap_or(0);
        let winners: Vec<Rating> = counts
            .iter()
            .filter(|(_, &c)| c == top)
            .map(|(&r, _)| r)
            .collect();
        let (label, agree) = if winners.len() == 1 {
            (winners[0], top)
        } else {
            (Rating::DontKnow, top)
        };
        let confidence = agree as f64 / ratings.len() as f64;
        out.insert(table.items[idx].clone(), (label, confidence));
    }
    out
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Regime {
    CwHard,
    Featured,
    TypeBalanced,
}

/// Select the neutral side of a regime dataset. `CwHard` returns the pool
/// unchanged (the crowdsourced neutrals); the other regimes sample
/// `|biased|` statements from the featured pool, uniformly or stratified to
/// the article-type histogram of the biased set.
pub fn build_regime(
    biased: &[LabeledStatement],
    neutral_pool: &[LabeledStatement],
    regime: Regime,
    seed: u64,
) -> Result<Vec<LabeledStatement>, CorpusError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    match regime {
        Regime::CwHard => Ok(neutral_pool.to_vec()),
        Regime::Featured => {
            if neutral_pool.len() < biased.len() {
                return Err(CorpusError::PoolExhausted {
                    needed: biased.len(),
                    available: neutral_pool.len(),
                });
            }
            Ok(sample_without_replacement(
                &mut rng,
                neutral_pool,
                biased.len(),
            ))
        }
        Regime::TypeBalanced => {
            let mut histogram: BTreeMap<&str, usize> = BTreeMap::new();
            for s in biased {
                *histogram.entry(s.article_type.as_str()).or_insert(0) += 1;
            }
            let targets: Vec<(&str, usize)> =
                largest_remainder(&histogram, biased.len());
            let mut selected = Vec::with_capacity(biased.len());
            for (article_type, needed) in targets {
                if needed == 0 {
                    continue;
                }
                let stratum: Vec<LabeledStatement> = neutral_pool
                    .iter()
                    .filter(|s| s.article_type == article_type)
                    .cloned()
                    .collect();
                if stratum.len() < needed {
                    return Err(CorpusError::StratumExhausted {
                        article_type: article_type.to_string(),
                        needed,
                        available: stratum.len(),
                    });
                }
                selected.extend(sample_without_replacement(&mut rng, &stratum, needed));
            }
            Ok(selected)
        }
    }
}

/// Largest-remainder apportionment of `target` across the histogram, with
/// ties broken by key order. Pure integer arithmetic, so a target equal to
/// the histogram total reproduces the histogram exactly.
fn largest_remainder<'a>(
    histogram: &BTreeMap<&'a str, usize>,
    target: usize,
) -> Vec<(&'a str, usize)> {
    let total: usize = histogram.values().sum();
    if total == 0 {
        return Vec::new();
    }
    let mut allocation: Vec<(&str, usize, usize)> = histogram
        .iter()
        .map(|(&k, &count)| {
            let numerator = count * target;
            (k, numerator / total, numerator % total)
        })
        .collect();
    let assigned: usize = allocation.iter().map(|(_, base, _)| base).sum();
    let mut leftover = target - assigned;
    // BTreeMap gave key order; stable sort keeps it among equal remainders.
    let mut by_remainder: Vec<usize> = (0..allocation.len()).collect();
    by_remainder.sort_by(|&a, &b| allocation[b].2.cmp(&allocation[a].2));
    for idx in by_remainder {
        if leftover == 0 {
            break;
        }
        allocation[idx].1 += 1;
        leftover -= 1;
    }
    allocation.into_iter().map(|(k, n, _)| (k, n)).collect()
}

/// Uniform sample of `k` items without replacement, returned in pool order.
fn sample_without_replacement(
    rng: &mut ChaCha8Rng,
    pool: &[LabeledStatement],
    k: usize,
) -> Vec<LabeledStatement> {
    debug_assert!(k <= pool.len());
    let mut indices: Vec<usize> = (0..pool.len()).collect();
    indices.shuffle(rng);
    let mut chosen: Vec<usize> = indices[..k].to_vec();
    chosen.sort_unstable();
    chosen.into_iter().map(|i| pool[i].clone()).collect()
}

#[derive(Clone, Debug)]
pub struct DatasetSplit {
    pub train: Vec<LabeledStatement>,
    pub validation: Vec<LabeledStatement>,
    pub test: Vec<LabeledStatement>,
    pub seed: u64,
}

pub const SPLIT_MIN: usize = 10;
/// Train/validation/test proportions in tenths: 70% / 10% / 20%.
const SPLIT_TENTHS: [usize; 3] = [7, 1, 2];

/// Deterministic label-stratified 70/10/20 split. Within each label group
/// the statements are shuffled under the seed and apportioned by largest
/// remainder, so every split preserves the class ratio within one statement.
pub fn split(data: &[LabeledStatement], seed: u64) -> Result<DatasetSplit, CorpusError> {
    if data.len() < SPLIT_MIN {
        return Err(CorpusError::TooSmall {
            n: data.len(),
            min: SPLIT_MIN,
        });
    }
    {
        let mut seen = std::collections::BTreeSet::new();
        for s in data {
            if !seen.insert(s.id.as_str()) {
                return Err(CorpusError::DuplicateId { id: s.id.clone() });
            }
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut result = DatasetSplit {
        train: Vec::new(),
        validation: Vec::new(),
        test: Vec::new(),
        seed,
    };
    for label in [Label::Biased, Label::Neutral] {
        let mut group: Vec<&LabeledStatement> = data.iter().filter(|s| s.label == label).collect();
        if group.is_empty() {
            continue;
        }
        group.shuffle(&mut rng);
        let counts = apportion_three(group.len());
        let (train_n, val_n) = (counts[0], counts[1]);
        for (i, s) in group.into_iter().enumerate() {
            if i < train_n {
                result.train.push(s.clone());
            } else if i < train_n + val_n {
                result.validation.push(s.clone());
            } else {
                result.test.push(s.clone());
            }
        }
    }
    Ok(result)
}

/// 70/10/20 apportionment of `n` by largest remainder. Ties favor the
/// split with the smaller share, which keeps validation populated on tiny
/// corpora (a group of 5 goes 3/1/1, not 4/0/1).
fn apportion_three(n: usize) -> [usize; 3] {
    let mut counts = [0usize; 3];
    let mut remainders = [(0usize, 0usize, 0usize); 3];
    let mut assigned = 0;
    for (i, tenths) in SPLIT_TENTHS.iter().enumerate() {
        let numerator = n * tenths;
        counts[i] = numerator / 10;
        remainders[i] = (numerator % 10, *tenths, i);
        assigned += counts[i];
    }
    let mut order: Vec<(usize, usize, usize)> = remainders.to_vec();
    order.sort_by(|a, b| b.0.cmp(&a.0).then(a.1.cmp(&b.1)));
    for (_, _, idx) in order.into_iter().take(n - assigned) {
        counts[idx] += 1;
    }
    counts
}
