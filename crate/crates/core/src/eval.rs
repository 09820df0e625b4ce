//! Exact-match micro precision/recall/F1 per task and the cross-task average.

use std::collections::{BTreeMap, HashSet};
use std::fmt::Write as _;
use std::ops::{Add, AddAssign};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::schema::{TaskKind, Term, Tuple};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct MatchOptions {
    /// Compare aspect and opinion terms ignoring case.
    pub case_insensitive: bool,
}

/// Raw micro counts. Shards merge by addition.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Counts {
    pub tp: usize,
    pub n_pred: usize,
    pub n_gold: usize,
}

impl Add for Counts {
    type Output = Counts;

    fn add(self, rhs: Counts) -> Counts {
        Counts {
            tp: self.tp + rhs.tp,
            n_pred: self.n_pred + rhs.n_pred,
            n_gold: self.n_gold + rhs.n_gold,
        }
    }
}

impl AddAssign for Counts {
    fn add_assign(&mut self, rhs: Counts) {
        *self = *self + rhs;
    }
}

impl Counts {
    /// Counts for one instance, with set semantics on both sides.
    pub fn of_instance(pred: &[Tuple], gold: &[Tuple], opts: MatchOptions) -> Self {
        let pred: HashSet<Tuple> = pred.iter().map(|t| normalize(t, opts)).collect();
        let gold: HashSet<Tuple> = gold.iter().map(|t| normalize(t, opts)).collect();
        Counts {
            tp: pred.intersection(&gold).count(),
            n_pred: pred.len(),
            n_gold: gold.len(),
        }
    }

    pub fn metrics(self) -> TaskMetrics {
        let ratio = |num: usize, den: usize| {
            if den == 0 {
                0.0
            } else {
                num as f64 / den as f64
            }
        };
        let precision = ratio(self.tp, self.n_pred);
        let recall = ratio(self.tp, self.n_gold);
        let f1 = if precision + recall > 0.0 {
            2.0 * precision * recall / (precision + recall)
        } else {
            0.0
        };
        TaskMetrics {
            tp: self.tp,
            n_pred: self.n_pred,
            n_gold: self.n_gold,
            precision,
            recall,
            f1,
        }
    }
}

fn normalize(tuple: &Tuple, opts: MatchOptions) -> Tuple {
    let norm = |term: &Option<Term>| {
        term.as_ref().map(|t| match t {
            Term::Implicit => Term::Implicit,
            Term::Explicit(s) if opts.case_insensitive => Term::Explicit(s.trim().to_lowercase()),
            Term::Explicit(s) => Term::Explicit(s.trim().to_string()),
        })
    };
    Tuple {
        aspect: norm(&tuple.aspect),
        category: tuple.category.clone(),
        opinion: norm(&tuple.opinion),
        polarity: tuple.polarity,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TaskMetrics {
    pub tp: usize,
    pub n_pred: usize,
    pub n_gold: usize,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

/// Micro-averaged scores over instance-aligned prediction and gold sets.
pub fn score_task<P, G>(preds: &[P], golds: &[G], opts: MatchOptions) -> Result<TaskMetrics>
where
    P: AsRef<[Tuple]>,
    G: AsRef<[Tuple]>,
{
    if preds.len() != golds.len() {
        return Err(Error::LengthMismatch {
            preds: preds.len(),
            golds: golds.len(),
        });
    }
    let counts = preds
        .iter()
        .zip(golds)
        .map(|(p, g)| Counts::of_instance(p.as_ref(), g.as_ref(), opts))
        .fold(Counts::default(), Add::add);
    Ok(counts.metrics())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub per_task: BTreeMap<TaskKind, TaskMetrics>,
    pub average_f1: f64,
    pub parse_failure_count: usize,
}

pub type TaskPredictions = BTreeMap<TaskKind, Vec<Vec<Tuple>>>;

pub fn score_run(
    preds: &TaskPredictions,
    golds: &TaskPredictions,
    opts: MatchOptions,
) -> Result<EvalReport> {
    if !preds.keys().eq(golds.keys()) {
        let names = |m: &TaskPredictions| m.keys().map(|t| t.name()).collect::<Vec<_>>().join(",");
        return Err(Error::TaskSetMismatch(format!(
            "predictions [{}] vs gold [{}]",
            names(preds),
            names(golds)
        )));
    }
    let mut per_task = BTreeMap::new();
    for (task, p) in preds {
        per_task.insert(*task, score_task(p, &golds[task], opts)?);
    }
    let average_f1 = if per_task.is_empty() {
        0.0
    } else {
        per_task.values().map(|m| m.f1).sum::<f64>() / per_task.len() as f64
    };
    Ok(EvalReport {
        per_task,
        average_f1,
        parse_failure_count: 0,
    })
}

impl EvalReport {
    /// Plain-text table: one row per task in registry order, then `Ave.`.
    pub fn to_table(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "{:<8} {:>7} {:>7} {:>7} {:>6} {:>6} {:>6}",
            "Task", "P", "R", "F1", "TP", "#Pred", "#Gold"
        );
        let _ = writeln!(out, "{}", "-".repeat(53));
        for (task, m) in &self.per_task {
            let _ = writeln!(
                out,
                "{:<8} {:>7.2} {:>7.2} {:>7.2} {:>6} {:>6} {:>6}",
                task.name(),
                m.precision * 100.0,
                m.recall * 100.0,
                m.f1 * 100.0,
                m.tp,
                m.n_pred,
                m.n_gold
            );
        }
        let _ = writeln!(out, "{}", "-".repeat(53));
        let _ = writeln!(
            out,
            "{:<8} {:>7} {:>7} {:>7.2}",
            "Ave.",
            "",
            "",
            self.average_f1 * 100.0
        );
        let _ = writeln!(out, "parse failures: {}", self.parse_failure_count);
        out
    }
}
