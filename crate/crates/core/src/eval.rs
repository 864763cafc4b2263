//! Precision/recall/F1 of predicted justification sets against gold sets.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use serde::Serialize;

use crate::datasets::{Label, QAInstance};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Prf {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

impl Prf {
    pub fn from_pr(precision: f64, recall: f64) -> Self {
        let f1 = if precision + recall > 0.0 {
            2.0 * precision * recall / (precision + recall)
        } else {
            0.0
        };
        Self {
            precision,
            recall,
            f1,
        }
    }
}

/// Overlap counts for one instance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Counts {
    pub hits: usize,
    pub predicted: usize,
    pub gold: usize,
}

impl Counts {
    pub fn new(pred: &BTreeSet<usize>, gold: &BTreeSet<usize>) -> Self {
        Self {
            hits: pred.intersection(gold).count(),
            predicted: pred.len(),
            gold: gold.len(),
        }
    }

    pub fn prf(&self) -> Prf {
        let ratio = |a: usize, b: usize| if b == 0 { 0.0 } else { a as f64 / b as f64 };
        Prf::from_pr(
            ratio(self.hits, self.predicted),
            ratio(self.hits, self.gold),
        )
    }
}

/// P/R/F1 for one instance; `None` when the gold set is empty.
pub fn prf_single(pred: &BTreeSet<usize>, gold: &BTreeSet<usize>) -> Option<Prf> {
    (!gold.is_empty()).then(|| Counts::new(pred, gold).prf())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Aggregate {
    /// Pooled over all scored instances.
    pub micro: Prf,
    /// Mean of per-instance scores.
    #[serde(rename = "macro")]
    pub macro_: Prf,
    pub scored: usize,
}

/// Micro and macro averages. Errors when `counts` is empty.
pub fn aggregate(counts: &[Counts]) -> Result<Aggregate> {
    if counts.is_empty() {
        return Err(Error::InvalidData(
            "no instances with gold justifications to score".into(),
        ));
    }
    let total = counts.iter().fold(
        Counts {
            hits: 0,
            predicted: 0,
            gold: 0,
        },
        |a, c| Counts {
            hits: a.hits + c.hits,
            predicted: a.predicted + c.predicted,
            gold: a.gold + c.gold,
        },
    );
    let n = counts.len() as f64;
    let per: Vec<Prf> = counts.iter().map(Counts::prf).collect();
    let macro_ = Prf {
        precision: per.iter().map(|p| p.precision).sum::<f64>() / n,
        recall: per.iter().map(|p| p.recall).sum::<f64>() / n,
        f1: per.iter().map(|p| p.f1).sum::<f64>() / n,
    };
    Ok(Aggregate {
        micro: total.prf(),
        macro_,
        scored: counts.len(),
    })
}

/// A prediction to evaluate: `None` marks an instance whose selection failed,
/// scored as an empty set.
pub type Prediction = Option<BTreeSet<usize>>;

#[derive(Debug, Clone, Default)]
pub struct EvalOptions {
    /// Score only instances labelled correct.
    pub correct_only: bool,
    /// Optional id -> group mapping for per-group breakdowns.
    pub groups: Option<HashMap<String, String>>,
}

#[derive(Debug, Clone, Serialize)]
pub struct InstanceScore {
    pub id: String,
    #[serde(flatten)]
    pub counts: Counts,
    #[serde(flatten)]
    pub prf: Prf,
    pub failed: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct EvalReport {
    pub overall: Aggregate,
    #[serde(skip_serializing_if = "BTreeMap::is_empty")]
    pub groups: BTreeMap<String, Aggregate>,
    /// Instances without gold justifications.
    pub skipped_no_gold: usize,
    /// Instances excluded by `correct_only`.
    pub skipped_label: usize,
    /// Dataset instances with no prediction at all.
    pub missing_predictions: usize,
    /// Predictions recorded as failures (scored as empty sets).
    pub failed: usize,
    pub per_instance: Vec<InstanceScore>,
}

/// Scores `predictions` (by instance id) against the gold sets in `dataset`.
/// A prediction whose id is not in the dataset is an error.
pub fn evaluate(
    dataset: &[QAInstance],
    predictions: &HashMap<String, Prediction>,
    opts: &EvalOptions,
) -> Result<EvalReport> {
    let by_id: HashMap<&str, &QAInstance> = dataset.iter().map(|i| (i.id.as_str(), i)).collect();
    let mut unknown: Vec<&String> = predictions
        .keys()
        .filter(|id| !by_id.contains_key(id.as_str()))
        .collect();
    if !unknown.is_empty() {
        unknown.sort();
        return Err(Error::InvalidData(format!(
            "{} prediction id(s) not in the dataset, first {:?}",
            unknown.len(),
            unknown[0]
        )));
    }
    let mut skipped_no_gold = 0;
    let mut skipped_label = 0;
    let mut missing_predictions = 0;
    let mut failed = 0;
    let mut per_instance = Vec::new();
    let mut all = Vec::new();
    let mut grouped: BTreeMap<String, Vec<Counts>> = BTreeMap::new();
    let empty = BTreeSet::new();
    for inst in dataset {
        if opts.correct_only && inst.label != Some(Label::Correct) {
            skipped_label += 1;
            continue;
        }
        let Some(gold) = inst.gold_idxs.as_ref().filter(|g| !g.is_empty()) else {
            skipped_no_gold += 1;
            continue;
        };
        let Some(pred) = predictions.get(&inst.id) else {
            missing_predictions += 1;
            continue;
        };
        failed += pred.is_none() as usize;
        let counts = Counts::new(pred.as_ref().unwrap_or(&empty), gold);
        all.push(counts);
        if let Some(g) = opts.groups.as_ref().and_then(|m| m.get(&inst.id)) {
            grouped.entry(g.clone()).or_default().push(counts);
        }
        per_instance.push(InstanceScore {
            id: inst.id.clone(),
            counts,
            prf: counts.prf(),
            failed: pred.is_none(),
        });
    }
    let groups = grouped
        .into_iter()
        .map(|(g, c)| Ok((g, aggregate(&c)?)))
        .collect::<Result<_>>()?;
    Ok(EvalReport {
        overall: aggregate(&all)?,
        groups,
        skipped_no_gold,
        skipped_label,
        missing_predictions,
        failed,
        per_instance,
    })
}

/// Reads `id<TAB>group` lines.
pub fn parse_groups(text: &str, source_name: &str) -> Result<HashMap<String, String>> {
    let mut out = HashMap::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let Some((id, group)) = line.split_once('\t') else {
            return Err(Error::parse(source_name, i + 1, "expected `id<TAB>group`"));
        };
        out.insert(id.to_string(), group.trim().to_string());
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn set(v: &[usize]) -> BTreeSet<usize> {
        v.iter().copied().collect()
    }

    #[test]
    fn single_instance() {
        let p = prf_single(&set(&[1, 2, 4]), &set(&[1, 2, 3])).unwrap();
        assert!((p.precision - 2.0 / 3.0).abs() < 1e-12);
        assert!((p.recall - 2.0 / 3.0).abs() < 1e-12);
        assert!((p.f1 - 2.0 / 3.0).abs() < 1e-12);
        assert_eq!(prf_single(&set(&[1]), &set(&[])), None);
        assert_eq!(prf_single(&set(&[]), &set(&[1])).unwrap().f1, 0.0);
    }

    #[test]
    fn f1_from_pr() {
        let p = Prf::from_pr(0.482, 0.682);
        assert!((p.f1 - 0.5648).abs() < 5e-4, "{}", p.f1);
    }

    #[test]
    fn micro_pools_counts() {
        let a = Counts::new(&set(&[0]), &set(&[0]));
        let b = Counts::new(&set(&[1, 2, 3]), &set(&[4]));
        let agg = aggregate(&[a, b]).unwrap();
        assert!((agg.micro.precision - 0.25).abs() < 1e-12);
        assert!((agg.micro.recall - 0.5).abs() < 1e-12);
        assert!((agg.macro_.precision - 0.5).abs() < 1e-12);
        assert!(aggregate(&[]).is_err());
    }

    fn inst(id: &str, label: Label, gold: Option<&[usize]>) -> QAInstance {
        QAInstance {
            id: id.into(),
            question: "q".into(),
            answer: "a".into(),
            label: Some(label),
            candidates: None,
            gold_idxs: gold.map(set),
        }
    }

    #[test]
    fn evaluate_bookkeeping() {
        let data = vec![
            inst("a", Label::Correct, Some(&[0, 1])),
            inst("b", Label::Incorrect, Some(&[2])),
            inst("c", Label::Correct, None),
            inst("d", Label::Correct, Some(&[3])),
            inst("e", Label::Correct, Some(&[3])),
        ];
        let preds: HashMap<String, Prediction> = [
            ("a".to_string(), Some(set(&[0, 1]))),
            ("b".to_string(), Some(set(&[2]))),
            ("d".to_string(), None),
        ]
        .into();
        let r = evaluate(&data, &preds, &EvalOptions::default()).unwrap();
        assert_eq!(
            (
                r.overall.scored,
                r.skipped_no_gold,
                r.missing_predictions,
                r.failed
            ),
            (3, 1, 1, 1)
        );
        assert!((r.overall.micro.recall - 0.75).abs() < 1e-12);

        let opts = EvalOptions {
            correct_only: true,
            ..Default::default()
        };
        let r = evaluate(&data, &preds, &opts).unwrap();
        assert_eq!((r.overall.scored, r.skipped_label), (2, 1));

        let mut bad = preds.clone();
        bad.insert("zzz".into(), None);
        assert!(evaluate(&data, &bad, &opts).is_err());
    }

    #[test]
    fn groups() {
        let g = parse_groups("a\tNews\n\nb\tFiction\n", "g").unwrap();
        assert_eq!(g["b"], "Fiction");
        assert!(parse_groups("a News", "g").is_err());
        let data = vec![
            inst("a", Label::Correct, Some(&[0])),
            inst("b", Label::Correct, Some(&[1])),
        ];
        let preds: HashMap<String, Prediction> = [
            ("a".to_string(), Some(set(&[0]))),
            ("b".to_string(), Some(set(&[0]))),
        ]
        .into();
        let r = evaluate(
            &data,
            &preds,
            &EvalOptions {
                correct_only: false,
                groups: Some(g),
            },
        )
        .unwrap();
        assert_eq!(r.groups["News"].micro.f1, 1.0);
        assert_eq!(r.groups["Fiction"].micro.f1, 0.0);
    }
}
