//! Multi-task training mixtures.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::schema::{Element, TaskKind};
use crate::seed;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Strategy {
    /// Union of every task dataset, globally shuffled.
    Random,
    /// Every task downsampled to the smallest task.
    UniformUnder,
    /// Every task replicated up to the largest task.
    UniformOver,
    /// Fixed per-task quota inside each batch.
    BatchUniform,
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Strategy::Random => "random",
            Strategy::UniformUnder => "uniform-under",
            Strategy::UniformOver => "uniform-over",
            Strategy::BatchUniform => "batch-uniform",
        })
    }
}

impl FromStr for Strategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().replace('_', "-").as_str() {
            "random" => Ok(Strategy::Random),
            "uniform-under" | "under" => Ok(Strategy::UniformUnder),
            "uniform-over" | "over" => Ok(Strategy::UniformOver),
            "batch-uniform" | "batch" => Ok(Strategy::BatchUniform),
            _ => Err(Error::Config(format!("unknown mixing strategy {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MixtureSpec {
    pub strategy: Strategy,
    pub tasks: Vec<TaskKind>,
    pub seed: u64,
    /// Only used by [`Strategy::BatchUniform`].
    pub batch_size: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MixedExample<T> {
    pub task: TaskKind,
    /// Batch index under [`Strategy::BatchUniform`].
    pub batch: Option<usize>,
    pub item: T,
}

/// Builds the mixture sequence. Deterministic in `(datasets, spec)`.
pub fn mix<T: Clone>(
    datasets: &BTreeMap<TaskKind, Vec<T>>,
    spec: &MixtureSpec,
) -> Result<Vec<MixedExample<T>>> {
    if spec.tasks.is_empty() {
        return Err(Error::EmptyTaskList);
    }
    let mut tasks = spec.tasks.clone();
    tasks.sort();
    tasks.dedup();
    let mut sources = Vec::with_capacity(tasks.len());
    for &task in &tasks {
        match datasets.get(&task) {
            Some(items) if !items.is_empty() => sources.push((task, items.as_slice())),
            _ => return Err(Error::EmptyTaskDataset(task.name().to_string())),
        }
    }
    let mut rng = seed::rng(spec.seed);
    let tag = |task: TaskKind, items: &[T], batch: Option<usize>, idx: &[usize]| {
        idx.iter()
            .map(|&i| MixedExample {
                task,
                batch,
                item: items[i].clone(),
            })
            .collect::<Vec<_>>()
    };
    let min = sources.iter().map(|(_, s)| s.len()).min().unwrap_or(0);
    let max = sources.iter().map(|(_, s)| s.len()).max().unwrap_or(0);
    let mut out = Vec::new();
    match spec.strategy {
        Strategy::Random => {
            for (task, items) in &sources {
                let all: Vec<usize> = (0..items.len()).collect();
                out.extend(tag(*task, items, None, &all));
            }
            out.shuffle(&mut rng);
        }
        Strategy::UniformUnder => {
            for (task, items) in &sources {
                let mut picked = rand::seq::index::sample(&mut rng, items.len(), min).into_vec();
                picked.sort_unstable();
                out.extend(tag(*task, items, None, &picked));
            }
            out.shuffle(&mut rng);
        }
        Strategy::UniformOver => {
            for (task, items) in &sources {
                let idx = replicate(items.len(), max, &mut rng);
                out.extend(tag(*task, items, None, &idx));
            }
            out.shuffle(&mut rng);
        }
        Strategy::BatchUniform => {
            let batch_size = spec
                .batch_size
                .filter(|&b| b > 0)
                .ok_or_else(|| Error::Config("batch-uniform mixing needs a batch size".into()))?;
            let k = sources.len();
            if batch_size % k != 0 {
                return Err(Error::BatchSizeIndivisible {
                    batch_size,
                    tasks: k,
                });
            }
            let quota = batch_size / k;
            let batches = max.div_ceil(quota);
            let streams: Vec<Vec<usize>> = sources
                .iter()
                .map(|(_, items)| {
                    let mut idx = replicate(items.len(), batches * quota, &mut rng);
                    idx.shuffle(&mut rng);
                    idx
                })
                .collect();
            for b in 0..batches {
                let mut batch = Vec::with_capacity(batch_size);
                for ((task, items), stream) in sources.iter().zip(&streams) {
                    batch.extend(tag(
                        *task,
                        items,
                        Some(b),
                        &stream[b * quota..(b + 1) * quota],
                    ));
                }
                batch.shuffle(&mut rng);
                out.extend(batch);
            }
        }
    }
    Ok(out)
}

/// One copy of every index, then uniform draws with replacement up to
/// `target`.
fn replicate(len: usize, target: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..len).collect();
    while idx.len() < target {
        idx.push(rng.random_range(0..len));
    }
    idx
}

/// Keeps the tasks whose output or given anchor involves `element`.
pub fn task_subset<T: Clone>(
    datasets: &BTreeMap<TaskKind, Vec<T>>,
    element: Element,
) -> BTreeMap<TaskKind, Vec<T>> {
    datasets
        .iter()
        .filter(|(task, _)| task.involved().contains(element))
        .map(|(task, items)| (*task, items.clone()))
        .collect()
}
