//! Cross-validation, ROC/AUC and experiment reports.

use std::cmp::Ordering;
use std::fmt;
use std::io::{self, Write};
use std::str::FromStr;

use rand::distributions::{Distribution, WeightedIndex};
use rand::seq::SliceRandom;

use crate::align::{GapPenalty, SubstitutionMatrix};
use crate::error::{Error, Result};
use crate::hmm::{self, HmmModel, TrainWarning};
use crate::msa::build_msa;
use crate::phmm::{build_phmm, phmm_forward_score};
use crate::rng::{derive_seed, seeded_rng};
use crate::seq_data::ObservationSequence;

pub const DEFAULT_FOLDS: usize = 5;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FoldPlan {
    pub k: usize,
    /// Fold id of each item.
    pub assignments: Vec<usize>,
    pub seed: u64,
}

impl FoldPlan {
    pub fn test_indices(&self, fold: usize) -> Vec<usize> {
        (0..self.assignments.len()).filter(|&i| self.assignments[i] == fold).collect()
    }

    pub fn train_indices(&self, fold: usize) -> Vec<usize> {
        (0..self.assignments.len()).filter(|&i| self.assignments[i] != fold).collect()
    }

    pub fn fold_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.k];
        for &f in &self.assignments {
            sizes[f] += 1;
        }
        sizes
    }
}

/// Seeded shuffle, then round-robin assignment to `k` folds.
pub fn kfold_split(n_items: usize, k: usize, seed: u64) -> Result<FoldPlan> {
    if k < 2 {
        return Err(Error::InvalidArgument(format!("fold count must be at least 2, got {k}")));
    }
    if n_items < k {
        return Err(Error::InvalidArgument(format!("{n_items} items cannot fill {k} folds")));
    }
    let mut order: Vec<usize> = (0..n_items).collect();
    order.shuffle(&mut seeded_rng(seed));
    let mut assignments = vec![0; n_items];
    for (pos, &item) in order.iter().enumerate() {
        assignments[item] = pos % k;
    }
    Ok(FoldPlan { k, assignments, seed })
}

/// The first `size` items of `items` after a seeded shuffle.
pub fn select_group(items: &[usize], size: usize, seed: u64) -> Result<Vec<usize>> {
    if size == 0 || size > items.len() {
        return Err(Error::InvalidArgument(format!(
            "group size {size} does not fit a training set of {} sequences",
            items.len()
        )));
    }
    let mut shuffled = items.to_vec();
    shuffled.shuffle(&mut seeded_rng(seed));
    shuffled.truncate(size);
    Ok(shuffled)
}

fn check_scores(scores: &[f64], what: &str) -> Result<()> {
    if scores.is_empty() {
        return Err(Error::InvalidArgument(format!("{what} score list is empty")));
    }
    if scores.iter().any(|s| s.is_nan()) {
        return Err(Error::InvalidArgument(format!("{what} scores contain NaN")));
    }
    Ok(())
}

/// Groups of equal scores in descending order, as (score, positives, negatives).
fn tie_groups(positive: &[f64], negative: &[f64]) -> Vec<(f64, u64, u64)> {
    let mut all: Vec<(f64, bool)> = positive
        .iter()
        .map(|&s| (s, true))
        .chain(negative.iter().map(|&s| (s, false)))
        .collect();
    all.sort_by(|x, y| y.0.partial_cmp(&x.0).unwrap_or(Ordering::Equal));
    let mut groups: Vec<(f64, u64, u64)> = Vec::new();
    for (s, is_pos) in all {
        match groups.last_mut() {
            Some(g) if g.0 == s => {}
            _ => groups.push((s, 0, 0)),
        }
        let g = groups.last_mut().expect("group just pushed");
        if is_pos {
            g.1 += 1;
        } else {
            g.2 += 1;
        }
    }
    groups
}

/// Mann-Whitney AUC: the fraction of (positive, negative) pairs where the
/// positive scores higher, ties counting one half. `-inf` is allowed.
pub fn auc(positive: &[f64], negative: &[f64]) -> Result<f64> {
    check_scores(positive, "positive")?;
    check_scores(negative, "negative")?;
    let mut twice_wins = 0u64;
    let mut neg_below = negative.len() as u64;
    for (_, p, n) in tie_groups(positive, negative) {
        neg_below -= n;
        twice_wins += p * (2 * neg_below + n);
    }
    Ok(twice_wins as f64 / (2 * positive.len() as u64 * negative.len() as u64) as f64)
}

#[derive(Debug, Clone, PartialEq)]
pub struct RocCurve {
    /// (false positive rate, true positive rate), from (0, 0) to (1, 1).
    pub points: Vec<(f64, f64)>,
    /// Threshold of each point; a score `>= threshold` is called positive.
    /// The first point uses `+inf` and classifies nothing as positive.
    pub thresholds: Vec<f64>,
    pub auc: f64,
}

impl RocCurve {
    pub fn trapezoid_area(&self) -> f64 {
        self.points
            .windows(2)
            .map(|w| (w[1].0 - w[0].0) * (w[1].1 + w[0].1) / 2.0)
            .sum()
    }
}

/// Sweeps the threshold over every distinct score, highest first.
pub fn roc_curve(positive: &[f64], negative: &[f64]) -> Result<RocCurve> {
    let auc = auc(positive, negative)?;
    let (p, n) = (positive.len() as f64, negative.len() as f64);
    let mut points = vec![(0.0, 0.0)];
    let mut thresholds = vec![f64::INFINITY];
    let (mut tp, mut fp) = (0u64, 0u64);
    for (s, gp, gn) in tie_groups(positive, negative) {
        tp += gp;
        fp += gn;
        points.push((fp as f64 / n, tp as f64 / p));
        thresholds.push(s);
    }
    Ok(RocCurve { points, thresholds, auc })
}

/// Samples a state path from `pi` and `A` and emits one symbol per step.
pub fn generate_from_hmm(model: &HmmModel, length: usize, seed: u64) -> Result<ObservationSequence> {
    if length == 0 {
        return Err(Error::InvalidArgument("length must be at least 1".into()));
    }
    let dist = |row: &[f64]| WeightedIndex::new(row).map_err(|e| Error::InvalidModel(e.to_string()));
    let start = dist(model.pi())?;
    let trans = model.a().iter().map(|r| dist(r)).collect::<Result<Vec<_>>>()?;
    let emit = model.b().iter().map(|r| dist(r)).collect::<Result<Vec<_>>>()?;
    let mut rng = seeded_rng(seed);
    let mut state = start.sample(&mut rng);
    let mut ids = Vec::with_capacity(length);
    for t in 0..length {
        if t > 0 {
            state = trans[state].sample(&mut rng);
        }
        ids.push(emit[state].sample(&mut rng));
    }
    Ok(ObservationSequence::new(ids, format!("synthetic-{seed}")))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ModelKind {
    HmmStatic,
    HmmDynamic,
    Phmm,
}

impl ModelKind {
    pub fn is_hmm(self) -> bool {
        matches!(self, ModelKind::HmmStatic | ModelKind::HmmDynamic)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            ModelKind::HmmStatic => "hmm-static",
            ModelKind::HmmDynamic => "hmm-dynamic",
            ModelKind::Phmm => "phmm",
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "hmm-static" => Ok(ModelKind::HmmStatic),
            "hmm-dynamic" => Ok(ModelKind::HmmDynamic),
            "phmm" => Ok(ModelKind::Phmm),
            other => Err(Error::InvalidArgument(format!(
                "unknown model kind {other:?} (expected hmm-static, hmm-dynamic or phmm)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentParams {
    pub family_name: String,
    pub model: ModelKind,
    pub n_states: usize,
    pub iterations: usize,
    pub folds: usize,
    pub group_size: usize,
    pub seed: u64,
    pub subst: SubstitutionMatrix,
    pub gap: GapPenalty,
}

impl ExperimentParams {
    /// Defaults for everything except the family name, model and scoring matrix.
    pub fn new(family_name: impl Into<String>, model: ModelKind, subst: SubstitutionMatrix) -> Self {
        ExperimentParams {
            family_name: family_name.into(),
            model,
            n_states: hmm::DEFAULT_STATES,
            iterations: hmm::DEFAULT_ITERATIONS,
            folds: DEFAULT_FOLDS,
            group_size: 10,
            seed: 0,
            subst,
            gap: GapPenalty::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScoredItem {
    pub fold: usize,
    pub name: String,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FoldResult {
    pub auc: f64,
    pub roc: RocCurve,
    pub warnings: Vec<TrainWarning>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentReport {
    pub family: String,
    pub model: ModelKind,
    pub folds: Vec<FoldResult>,
    pub malware_scores: Vec<ScoredItem>,
    pub benign_scores: Vec<ScoredItem>,
}

impl ExperimentReport {
    pub fn fold_aucs(&self) -> Vec<f64> {
        self.folds.iter().map(|f| f.auc).collect()
    }

    pub fn mean_auc(&self) -> f64 {
        self.folds.iter().map(|f| f.auc).sum::<f64>() / self.folds.len() as f64
    }

    pub fn warning_count(&self) -> usize {
        self.folds.iter().map(|f| f.warnings.len()).sum()
    }
}

enum TrainedModel {
    Hmm(HmmModel),
    Phmm(crate::phmm::PhmmModel),
}

impl TrainedModel {
    fn score(&self, obs: &[usize]) -> Result<f64> {
        match self {
            TrainedModel::Hmm(m) => hmm::score(m, obs),
            TrainedModel::Phmm(m) => phmm_forward_score(m, obs).map(|s| s.per_symbol),
        }
    }
}

struct FoldOutput {
    result: FoldResult,
    malware: Vec<ScoredItem>,
    benign: Vec<ScoredItem>,
}

fn run_fold(
    params: &ExperimentParams,
    plan: &FoldPlan,
    fold: usize,
    family: &[ObservationSequence],
    benign: &[ObservationSequence],
    n_symbols: usize,
) -> Result<FoldOutput> {
    let train = plan.train_indices(fold);
    let fold_seed = derive_seed(params.seed, fold as u64);
    let (model, warnings) = if params.model.is_hmm() {
        let seqs: Vec<ObservationSequence> = train.iter().map(|&i| family[i].clone()).collect();
        let report = hmm::train_multi(&seqs, params.n_states, n_symbols, params.iterations, fold_seed)?;
        (TrainedModel::Hmm(report.final_model), report.warnings)
    } else {
        let group: Vec<&[usize]> = select_group(&train, params.group_size, fold_seed)?
            .into_iter()
            .map(|i| family[i].ids.as_slice())
            .collect();
        let msa = build_msa(&group, &params.subst, params.gap)?;
        (TrainedModel::Phmm(build_phmm(&msa, n_symbols)?), Vec::new())
    };

    let malware = plan
        .test_indices(fold)
        .into_iter()
        .map(|i| {
            Ok(ScoredItem {
                fold,
                name: family[i].source_name.clone(),
                score: model.score(&family[i].ids)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let benign = benign
        .iter()
        .map(|s| {
            Ok(ScoredItem {
                fold,
                name: format!("fold{fold}/{}", s.source_name),
                score: model.score(&s.ids)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let pos: Vec<f64> = malware.iter().map(|s| s.score).collect();
    let neg: Vec<f64> = benign.iter().map(|s| s.score).collect();
    let roc = roc_curve(&pos, &neg)?;
    Ok(FoldOutput {
        result: FoldResult {
            auc: roc.auc,
            roc,
            warnings,
        },
        malware,
        benign,
    })
}

/// k-fold cross-validation: each fold trains on the other folds, then scores
/// its held-out family sequences and the whole benign set. Folds run in
/// parallel; results are assembled in fold order.
pub fn run_experiment(
    params: &ExperimentParams,
    family: &[ObservationSequence],
    benign: &[ObservationSequence],
    n_symbols: usize,
) -> Result<ExperimentReport> {
    if benign.is_empty() {
        return Err(Error::InvalidArgument("benign set is empty".into()));
    }
    if params.subst.size() != n_symbols && !params.model.is_hmm() {
        return Err(Error::AlphabetMismatch(format!(
            "substitution matrix has {} symbols, alphabet has {n_symbols}",
            params.subst.size()
        )));
    }
    let plan = kfold_split(family.len(), params.folds, params.seed)?;
    let outputs: Vec<Result<FoldOutput>> = std::thread::scope(|scope| {
        let handles: Vec<_> = (0..plan.k)
            .map(|fold| {
                let plan = &plan;
                scope.spawn(move || run_fold(params, plan, fold, family, benign, n_symbols))
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("fold worker panicked"))
            .collect()
    });

    let mut report = ExperimentReport {
        family: params.family_name.clone(),
        model: params.model,
        folds: Vec::with_capacity(plan.k),
        malware_scores: Vec::new(),
        benign_scores: Vec::new(),
    };
    for out in outputs {
        let out = out?;
        report.folds.push(out.result);
        report.malware_scores.extend(out.malware);
        report.benign_scores.extend(out.benign);
    }
    Ok(report)
}

/// Header plus one row per (family, model, fold); a final row with fold
/// `mean` per report.
pub fn write_report_tsv<W: Write>(reports: &[ExperimentReport], mut out: W) -> io::Result<()> {
    writeln!(out, "family\tmodel\tfold\tauc")?;
    for r in reports {
        for (k, f) in r.folds.iter().enumerate() {
            writeln!(out, "{}\t{}\t{}\t{}", r.family, r.model, k, f.auc)?;
        }
        writeln!(out, "{}\t{}\tmean\t{}", r.family, r.model, r.mean_auc())?;
    }
    Ok(())
}

pub fn scores_file_name(report: &ExperimentReport) -> String {
    format!("scores_{}_{}.tsv", report.family, report.model)
}

pub fn roc_file_name(report: &ExperimentReport, fold: usize) -> String {
    format!("roc_{}_{}_fold{}.csv", report.family, report.model, fold)
}

pub fn write_scores_tsv<W: Write>(report: &ExperimentReport, mut out: W) -> io::Result<()> {
    writeln!(out, "label\tname\tscore")?;
    for s in &report.malware_scores {
        writeln!(out, "malware\t{}\t{}", s.name, s.score)?;
    }
    for s in &report.benign_scores {
        writeln!(out, "benign\t{}\t{}", s.name, s.score)?;
    }
    Ok(())
}

pub fn write_roc_csv<W: Write>(curve: &RocCurve, mut out: W) -> io::Result<()> {
    writeln!(out, "fpr,tpr")?;
    for (fpr, tpr) in &curve.points {
        writeln!(out, "{fpr},{tpr}")?;
    }
    Ok(())
}
