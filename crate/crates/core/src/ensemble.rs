//! Paired 5x5 cross-validation with per-subject ensemble voting.
//!
//! Each class is split into five folds. Combination `(i, j)` validates on normal fold
//! `i` together with abnormal fold `j` and trains on the remaining eight folds, giving
//! 25 train/validation partitions. Every held-out test subject is classified once per
//! partition and the 25 ballots are aggregated into a vote proportion.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::classify::{compute_metrics, Classifier, ClassifierKind, Metrics};
use crate::data::{Dataset, Label};
use crate::error::{Error, Result};
use crate::manifold::{fit, EmbedderSpec};
use crate::par::map_indices;

pub const FOLDS_PER_CLASS: usize = 5;
pub const COMBOS: usize = FOLDS_PER_CLASS * FOLDS_PER_CLASS;
pub const DEFAULT_THRESHOLD: f64 = 0.5;

/// How the fixed test set is chosen.
#[derive(Debug, Clone, PartialEq)]
pub enum TestSelection {
    None,
    /// A stratified random draw of this many subjects.
    Count(usize),
    /// A stratified random draw of this fraction of subjects.
    Fraction(f64),
    Ids(Vec<String>),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldPlan {
    pub normal_folds: Vec<Vec<usize>>,
    pub abnormal_folds: Vec<Vec<usize>>,
    /// `(normal fold, abnormal fold)` pairs in row-major order, zero-based.
    pub combos: Vec<(usize, usize)>,
    pub test_set: Vec<usize>,
    pub seed: u64,
}

fn split_folds(indices: &[usize]) -> Vec<Vec<usize>> {
    let n = indices.len();
    let base = n / FOLDS_PER_CLASS;
    let extra = n % FOLDS_PER_CLASS;
    let mut folds = Vec::with_capacity(FOLDS_PER_CLASS);
    let mut start = 0;
    for f in 0..FOLDS_PER_CLASS {
        let size = base + usize::from(f < extra);
        let mut fold = indices[start..start + size].to_vec();
        fold.sort_unstable();
        folds.push(fold);
        start += size;
    }
    folds
}

pub fn build_fold_plan(dataset: &Dataset, test: &TestSelection, seed: u64) -> Result<FoldPlan> {
    let labels = dataset.labels()?;
    let n = labels.len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut by_class: [Vec<usize>; 2] = [Vec::new(), Vec::new()];
    for (i, &l) in labels.iter().enumerate() {
        if l > 1 {
            return Err(Error::Config(format!("label {l} is not binary")));
        }
        by_class[l as usize].push(i);
    }
    for class in by_class.iter_mut() {
        class.shuffle(&mut rng);
    }

    let mut test_set: Vec<usize> = match test {
        TestSelection::None => Vec::new(),
        TestSelection::Ids(ids) => {
            let lookup: BTreeMap<&str, usize> =
                dataset.ids().into_iter().enumerate().map(|(i, id)| (id, i)).collect();
            let mut chosen = BTreeSet::new();
            for id in ids {
                let idx = *lookup
                    .get(id.as_str())
                    .ok_or_else(|| Error::Config(format!("test id `{id}` not in dataset")))?;
                chosen.insert(idx);
            }
            for class in by_class.iter_mut() {
                class.retain(|i| !chosen.contains(i));
            }
            chosen.into_iter().collect()
        }
        TestSelection::Count(_) | TestSelection::Fraction(_) => {
            let count = match *test {
                TestSelection::Count(c) => c,
                TestSelection::Fraction(f) => {
                    if !(0.0..1.0).contains(&f) {
                        return Err(Error::Config(format!("test fraction {f} not in [0, 1)")));
                    }
                    (f * n as f64).round() as usize
                }
                _ => unreachable!(),
            };
            if count > n {
                return Err(Error::TooFewSamples(format!("test set of {count} from {n} subjects")));
            }
            let abnormal = ((count as f64) * by_class[1].len() as f64 / n as f64).round() as usize;
            let abnormal = abnormal.min(by_class[1].len());
            let normal = (count - abnormal).min(by_class[0].len());
            let mut chosen: Vec<usize> = by_class[0].drain(..normal).collect();
            chosen.extend(by_class[1].drain(..abnormal));
            chosen
        }
    };
    test_set.sort_unstable();

    for (label, class) in by_class.iter().enumerate() {
        if class.len() < FOLDS_PER_CLASS {
            return Err(Error::TooFewSamples(format!(
                "class {label} has {} training subjects, need at least {FOLDS_PER_CLASS}",
                class.len()
            )));
        }
    }
    let combos = (0..FOLDS_PER_CLASS)
        .flat_map(|i| (0..FOLDS_PER_CLASS).map(move |j| (i, j)))
        .collect();
    Ok(FoldPlan {
        normal_folds: split_folds(&by_class[0]),
        abnormal_folds: split_folds(&by_class[1]),
        combos,
        test_set,
        seed,
    })
}

impl FoldPlan {
    fn check_combo(&self, combo: usize) -> Result<(usize, usize)> {
        self.combos.get(combo).copied().ok_or(Error::IndexOutOfRange {
            index: combo,
            len: self.combos.len(),
        })
    }

    /// Validation indices of a combination, ascending.
    pub fn validation(&self, combo: usize) -> Result<Vec<usize>> {
        let (i, j) = self.check_combo(combo)?;
        let mut v: Vec<usize> = self.normal_folds[i]
            .iter()
            .chain(&self.abnormal_folds[j])
            .copied()
            .collect();
        v.sort_unstable();
        Ok(v)
    }

    /// Training indices of a combination: every pool fold except its validation pair.
    pub fn training(&self, combo: usize) -> Result<Vec<usize>> {
        let (i, j) = self.check_combo(combo)?;
        let mut t: Vec<usize> = Vec::new();
        for (f, fold) in self.normal_folds.iter().enumerate() {
            if f != i {
                t.extend(fold);
            }
        }
        for (f, fold) in self.abnormal_folds.iter().enumerate() {
            if f != j {
                t.extend(fold);
            }
        }
        t.sort_unstable();
        Ok(t)
    }

    /// All training-pool indices, ascending.
    pub fn pool(&self) -> Vec<usize> {
        let mut p: Vec<usize> = self
            .normal_folds
            .iter()
            .chain(&self.abnormal_folds)
            .flatten()
            .copied()
            .collect();
        p.sort_unstable();
        p
    }
}

/// Outcome of one train/validation combination.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldResult {
    pub combo: usize,
    pub fold_i: usize,
    pub fold_j: usize,
    pub validation: Metrics,
    pub train_accuracy: f64,
    /// One ballot per test subject, aligned with `FoldPlan::test_set`.
    pub test_votes: Vec<Label>,
    pub test_scores: Vec<f64>,
}

/// Fits the embedder and classifier on one combination's training folds, then extends and
/// classifies its validation folds and the test set. `dataset` must be standardized.
pub fn run_fold(
    plan: &FoldPlan,
    combo: usize,
    spec: &EmbedderSpec,
    classifier: ClassifierKind,
    dataset: &Dataset,
) -> Result<FoldResult> {
    let (fold_i, fold_j) = plan.check_combo(combo)?;
    let inner = || -> Result<FoldResult> {
        let labels = dataset.labels()?;
        let train_idx = plan.training(combo)?;
        let val_idx = plan.validation(combo)?;
        let pick = |idx: &[usize]| idx.iter().map(|&i| labels[i]).collect::<Vec<_>>();

        let embedder = fit(spec, &dataset.subset(&train_idx))?;
        let train_labels = pick(&train_idx);
        let model = Classifier::fit(classifier, embedder.coords(), &train_labels)?;
        let train_pred = model.predict(embedder.coords())?;
        let train_accuracy = compute_metrics(&train_pred.labels, &train_labels)?.accuracy;

        let val_coords = embedder.extend_dataset(&dataset.subset(&val_idx))?;
        let val_pred = model.predict(&val_coords)?;
        let validation = compute_metrics(&val_pred.labels, &pick(&val_idx))?;

        let test_coords = embedder.extend_dataset(&dataset.subset(&plan.test_set))?;
        let test_pred = model.predict(&test_coords)?;
        Ok(FoldResult {
            combo,
            fold_i,
            fold_j,
            validation,
            train_accuracy,
            test_votes: test_pred.labels,
            test_scores: test_pred.scores,
        })
    };
    inner().map_err(|e| e.in_fold(combo))
}

/// Per-subject ballots and their aggregate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VoteRecord {
    pub subject_id: String,
    pub votes: Vec<Label>,
    pub proportion: f64,
    #[serde(rename = "final")]
    pub final_call: Label,
    pub true_label: Option<Label>,
    pub age: Option<f64>,
}

/// Identity and metadata of a voted subject.
#[derive(Debug, Clone, PartialEq)]
pub struct Subject {
    pub id: String,
    pub true_label: Option<Label>,
    pub age: Option<f64>,
}

/// `p = sum(votes) / 25`, final call `p > threshold`.
pub fn aggregate_votes(subjects: &[Subject], ballots: &[Vec<Label>], threshold: f64) -> Result<Vec<VoteRecord>> {
    if subjects.len() != ballots.len() {
        return Err(Error::LengthMismatch {
            left: subjects.len(),
            right: ballots.len(),
        });
    }
    subjects
        .iter()
        .zip(ballots)
        .map(|(s, votes)| {
            if votes.len() != COMBOS {
                return Err(Error::IncompleteVotes {
                    id: s.id.clone(),
                    count: votes.len(),
                    expected: COMBOS,
                });
            }
            let yes = votes.iter().filter(|&&v| v == 1).count();
            let proportion = yes as f64 / COMBOS as f64;
            Ok(VoteRecord {
                subject_id: s.id.clone(),
                votes: votes.clone(),
                proportion,
                final_call: (proportion > threshold) as Label,
                true_label: s.true_label,
                age: s.age,
            })
        })
        .collect()
}

/// Transposes fold results into per-test-subject ballots and aggregates them.
pub fn aggregate_fold_results(
    dataset: &Dataset,
    plan: &FoldPlan,
    results: &[FoldResult],
    threshold: f64,
) -> Result<Vec<VoteRecord>> {
    let subjects: Vec<Subject> = plan
        .test_set
        .iter()
        .map(|&i| {
            let s = &dataset.samples()[i];
            Subject {
                id: s.id.clone(),
                true_label: s.label,
                age: s.age,
            }
        })
        .collect();
    let mut ballots = vec![Vec::with_capacity(COMBOS); subjects.len()];
    for r in results {
        if r.test_votes.len() != subjects.len() {
            return Err(Error::LengthMismatch {
                left: r.test_votes.len(),
                right: subjects.len(),
            });
        }
        for (b, &v) in ballots.iter_mut().zip(&r.test_votes) {
            b.push(v);
        }
    }
    aggregate_votes(&subjects, &ballots, threshold)
}

/// One cell of a two-model table: subjects called `a` by model A and `b` by model B.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Cell {
    pub count: usize,
    pub ids: Vec<String>,
}

/// Rows index model A's call, columns model B's call.
pub type CallTable = [[Cell; 2]; 2];

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TwoModelConfusion {
    pub model_a: String,
    pub model_b: String,
    pub true_label_0: CallTable,
    pub true_label_1: CallTable,
}

impl TwoModelConfusion {
    pub fn table(&self, true_label: Label) -> &CallTable {
        if true_label == 0 {
            &self.true_label_0
        } else {
            &self.true_label_1
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

pub fn two_model_confusion(
    model_a: &str,
    records_a: &[VoteRecord],
    model_b: &str,
    records_b: &[VoteRecord],
) -> Result<TwoModelConfusion> {
    let b_by_id: BTreeMap<&str, &VoteRecord> =
        records_b.iter().map(|r| (r.subject_id.as_str(), r)).collect();
    let a_ids: BTreeSet<&str> = records_a.iter().map(|r| r.subject_id.as_str()).collect();
    if a_ids.len() != records_a.len() || b_by_id.len() != records_b.len() {
        return Err(Error::SubjectSetMismatch("duplicate subject ids".into()));
    }
    if let Some(missing) = a_ids.iter().find(|id| !b_by_id.contains_key(*id)) {
        return Err(Error::SubjectSetMismatch(format!("`{missing}` only in {model_a}")));
    }
    if let Some(missing) = b_by_id.keys().find(|id| !a_ids.contains(*id)) {
        return Err(Error::SubjectSetMismatch(format!("`{missing}` only in {model_b}")));
    }

    let mut out = TwoModelConfusion {
        model_a: model_a.to_string(),
        model_b: model_b.to_string(),
        true_label_0: Default::default(),
        true_label_1: Default::default(),
    };
    for a in records_a {
        let b = b_by_id[a.subject_id.as_str()];
        let truth = a
            .true_label
            .ok_or_else(|| Error::MissingLabel(a.subject_id.clone()))?;
        if b.true_label != Some(truth) {
            return Err(Error::SubjectSetMismatch(format!(
                "`{}` has different true labels",
                a.subject_id
            )));
        }
        let table = if truth == 0 {
            &mut out.true_label_0
        } else {
            &mut out.true_label_1
        };
        let cell = &mut table[a.final_call as usize][b.final_call as usize];
        cell.count += 1;
        cell.ids.push(a.subject_id.clone());
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagnosisRow {
    pub id: String,
    pub age: Option<f64>,
    pub proportion: f64,
}

/// False negatives (true 1, called 0), highest vote proportion first.
pub fn diagnosis_table(records: &[VoteRecord]) -> Vec<DiagnosisRow> {
    let mut rows: Vec<DiagnosisRow> = records
        .iter()
        .filter(|r| r.true_label == Some(1) && r.final_call == 0)
        .map(|r| DiagnosisRow {
            id: r.subject_id.clone(),
            age: r.age,
            proportion: r.proportion,
        })
        .collect();
    rows.sort_by(|a, b| b.proportion.total_cmp(&a.proportion).then_with(|| a.id.cmp(&b.id)));
    rows
}

/// Mean and population standard deviation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanStd {
    pub mean: f64,
    pub std: f64,
}

impl MeanStd {
    /// `None` when there are no values.
    pub fn of(values: &[f64]) -> Option<Self> {
        if values.is_empty() {
            return None;
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
        Some(MeanStd { mean, std: var.sqrt() })
    }
}

/// Validation metrics averaged over combinations, and test metrics after voting.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrossValSummary {
    pub method: String,
    pub classifier: String,
    pub dimension: usize,
    pub validation_accuracy: MeanStd,
    pub validation_sensitivity: Option<MeanStd>,
    pub validation_specificity: Option<MeanStd>,
    pub validation_precision: Option<MeanStd>,
    pub train_accuracy: MeanStd,
    pub test_after_voting: Option<Metrics>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CrossValReport {
    pub spec: EmbedderSpec,
    pub classifier: ClassifierKind,
    pub folds: Vec<FoldResult>,
    pub votes: Vec<VoteRecord>,
    pub summary: CrossValSummary,
}

/// Runs all 25 combinations (concurrently when enabled) and aggregates test votes.
pub fn cross_validate(
    dataset: &Dataset,
    plan: &FoldPlan,
    spec: &EmbedderSpec,
    classifier: ClassifierKind,
    threshold: f64,
) -> Result<CrossValReport> {
    if !(threshold > 0.0 && threshold < 1.0) {
        return Err(Error::Config(format!("threshold {threshold} not in (0, 1)")));
    }
    let folds = map_indices(plan.combos.len(), |c| run_fold(plan, c, spec, classifier, dataset))
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
    let votes = aggregate_fold_results(dataset, plan, &folds, threshold)?;

    let collect = |f: &dyn Fn(&Metrics) -> Option<f64>| -> Vec<f64> {
        folds.iter().filter_map(|r| f(&r.validation)).collect()
    };
    let test_after_voting = if votes.is_empty() {
        None
    } else {
        let pred: Vec<Label> = votes.iter().map(|v| v.final_call).collect();
        let truth: Vec<Label> = votes
            .iter()
            .map(|v| v.true_label.ok_or_else(|| Error::MissingLabel(v.subject_id.clone())))
            .collect::<Result<_>>()?;
        Some(compute_metrics(&pred, &truth)?)
    };
    let summary = CrossValSummary {
        method: spec.method.to_string(),
        classifier: classifier.to_string(),
        dimension: spec.k,
        validation_accuracy: MeanStd::of(&collect(&|m| Some(m.accuracy))).expect("25 folds"),
        validation_sensitivity: MeanStd::of(&collect(&|m| m.sensitivity)),
        validation_specificity: MeanStd::of(&collect(&|m| m.specificity)),
        validation_precision: MeanStd::of(&collect(&|m| m.precision)),
        train_accuracy: MeanStd::of(&folds.iter().map(|r| r.train_accuracy).collect::<Vec<_>>())
            .expect("25 folds"),
        test_after_voting,
    };
    Ok(CrossValReport {
        spec: *spec,
        classifier,
        folds,
        votes,
        summary,
    })
}

fn opt_field(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// One row per combination and report, fold numbers one-based.
pub fn write_metrics_csv(path: &Path, reports: &[&CrossValReport]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["method", "classifier", "dimension", "fold_i", "fold_j", "acc", "sens", "spec", "prec"])?;
    for (report, f) in reports.iter().flat_map(|r| r.folds.iter().map(move |f| (r, f))) {
        w.write_record([
            report.spec.method.to_string(),
            report.classifier.to_string(),
            report.spec.k.to_string(),
            (f.fold_i + 1).to_string(),
            (f.fold_j + 1).to_string(),
            f.validation.accuracy.to_string(),
            opt_field(f.validation.sensitivity),
            opt_field(f.validation.specificity),
            opt_field(f.validation.precision),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_votes_csv(path: &Path, records: &[VoteRecord]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    let mut header: Vec<String> = ["id", "true_label", "age", "p", "final"].map(String::from).to_vec();
    header.extend((1..=COMBOS).map(|v| format!("v{v}")));
    w.write_record(&header)?;
    for r in records {
        let mut rec = vec![
            r.subject_id.clone(),
            r.true_label.map(|l| l.to_string()).unwrap_or_default(),
            opt_field(r.age),
            r.proportion.to_string(),
            r.final_call.to_string(),
        ];
        rec.extend(r.votes.iter().map(|v| v.to_string()));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a votes file back; the final call and proportion are recomputed from the ballots.
pub fn read_votes_csv(path: &Path, threshold: f64) -> Result<Vec<VoteRecord>> {
    let bad = |reason: String| Error::ManifestParse {
        path: path.to_path_buf(),
        reason,
    };
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_path(path)?;
    let headers = reader.headers()?.clone();
    if headers.len() != 5 + COMBOS || &headers[0] != "id" {
        return Err(bad(format!("expected `id,true_label,age,p,final,v1..v{COMBOS}`")));
    }
    let mut subjects = Vec::new();
    let mut ballots = Vec::new();
    for (line, rec) in reader.records().enumerate() {
        let rec = rec?;
        let parse_label = |s: &str| -> Result<Label> {
            match s {
                "0" => Ok(0),
                "1" => Ok(1),
                other => Err(bad(format!("row {}: `{other}` is not a 0/1 label", line + 1))),
            }
        };
        let true_label = match &rec[1] {
            "" => None,
            s => Some(parse_label(s)?),
        };
        let age = match &rec[2] {
            "" => None,
            s => Some(s.parse::<f64>().map_err(|e| bad(format!("row {}: {e}", line + 1)))?),
        };
        subjects.push(Subject {
            id: rec[0].to_string(),
            true_label,
            age,
        });
        ballots.push((5..5 + COMBOS).map(|c| parse_label(&rec[c])).collect::<Result<Vec<_>>>()?);
    }
    aggregate_votes(&subjects, &ballots, threshold)
}

pub fn write_diagnosis_csv(path: &Path, rows: &[DiagnosisRow]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["id", "age", "proportion"])?;
    for r in rows {
        w.write_record([r.id.clone(), opt_field(r.age), r.proportion.to_string()])?;
    }
    w.flush()?;
    Ok(())
}
