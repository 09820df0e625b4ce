//! Stage functions shared by the subcommands and `pipeline`.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::path::{Path, PathBuf};
use std::time::Duration;

use absa_kit::derivation::{flatten, group_by_task};
use absa_kit::eval::TaskPredictions;
use absa_kit::gateway::{
    infer as run_backend, Backend, GatewayOptions, OracleContext, OracleMode, Prediction,
};
use absa_kit::io::{load_acos_tsv, read_taxonomy, unify_taxonomies, AcosLoadOptions, TaxonomyMode};
use absa_kit::mixer::{mix as build_mixture, MixtureSpec, Strategy};
use absa_kit::parser::ParseFailure;
use absa_kit::seed::derive_seed;
use absa_kit::{
    derive_all, kshot_sample, parse_batch, render, score_run, DatasetManifest, EvalReport,
    MatchOptions, RecordFile, RenderedExample, Review, ShotConfig, Split, TaskInstance, TaskKind,
    TemplateTable, Tuple,
};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Failure, Kind, StageExt};

pub const CATEGORY_FILE: &str = "categories.txt";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixtureRecord {
    #[serde(flatten)]
    pub example: RenderedExample,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub batch: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParsedRecord {
    pub id: String,
    pub task: TaskKind,
    pub tuples: Vec<Tuple>,
    pub failures: Vec<ParseFailure>,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub timed_out: bool,
}

pub fn read<T: DeserializeOwned>(
    path: &Path,
    stage: &'static str,
) -> Result<RecordFile<T>, Failure> {
    RecordFile::read_path(path).stage(stage)
}

pub fn write<T: Serialize>(
    file: &RecordFile<T>,
    path: &Path,
    stage: &'static str,
) -> Result<(), Failure> {
    file.write_path(path).stage(stage)
}

pub fn reviews_path(dir: &Path, split: Split) -> PathBuf {
    dir.join(format!("reviews-{split}.jsonl"))
}

pub fn load_templates(path: Option<&Path>, stage: &'static str) -> Result<TemplateTable, Failure> {
    match path {
        Some(p) => {
            TemplateTable::load(p).map_err(|e| Failure::new(stage, Kind::Config, e.to_string()))
        }
        None => Ok(TemplateTable::default()),
    }
}

pub fn parse_tasks(spec: &str, stage: &'static str) -> Result<Vec<TaskKind>, Failure> {
    TaskKind::parse_list(spec).stage(stage)
}

/// Finds the source file for `split` in `dir`: `train.tsv`, or a single
/// file ending in `_train.tsv` such as `rest16_quad_train.tsv`.
fn find_split_file(dir: &Path, split: Split) -> Result<PathBuf, Failure> {
    let names: &[&str] = match split {
        Split::Train => &["train"],
        Split::Dev => &["dev", "valid", "validation"],
        Split::Test => &["test"],
    };
    let entries = std::fs::read_dir(dir)
        .map_err(|e| Failure::new("convert", Kind::Data, format!("{}: {e}", dir.display())))?;
    let mut files: Vec<PathBuf> = entries.flatten().map(|e| e.path()).collect();
    files.sort();
    let matches: Vec<PathBuf> = files
        .into_iter()
        .filter(|p| {
            let Some(file) = p.file_name().and_then(|f| f.to_str()) else {
                return false;
            };
            let Some(stem) = file.strip_suffix(".tsv") else {
                return false;
            };
            names
                .iter()
                .any(|n| stem == *n || stem.ends_with(&format!("_{n}")))
        })
        .collect();
    match matches.as_slice() {
        [one] => Ok(one.clone()),
        [] => Err(Failure::new(
            "convert",
            Kind::Data,
            format!("no {split} file in {}", dir.display()),
        )),
        _ => Err(Failure::new(
            "convert",
            Kind::Data,
            format!("several {split} files in {}", dir.display()),
        )),
    }
}

/// Loads the three splits of an ACOS directory with one shared taxonomy:
/// the category list file when given or present in the directory, otherwise
/// the union of the categories seen, in order of appearance.
pub fn convert(
    data_dir: &Path,
    name: Option<&str>,
    categories: Option<&Path>,
) -> Result<Vec<DatasetManifest>, Failure> {
    let name = match name {
        Some(n) => n.to_string(),
        None => data_dir
            .file_name()
            .and_then(|n| n.to_str())
            .unwrap_or("dataset")
            .to_string(),
    };
    let bundled = data_dir.join(CATEGORY_FILE);
    let category_file = categories
        .map(Path::to_path_buf)
        .or_else(|| bundled.is_file().then_some(bundled));
    let taxonomy = match &category_file {
        Some(p) => TaxonomyMode::Fixed(read_taxonomy(p).stage("convert")?),
        None => TaxonomyMode::Infer,
    };
    let opts = AcosLoadOptions {
        taxonomy,
        ..AcosLoadOptions::default()
    };
    let mut manifests = Vec::new();
    for split in Split::ALL {
        let path = find_split_file(data_dir, split)?;
        let manifest = load_acos_tsv(&path, &name, split, &opts)
            .map_err(|e| Failure::new("convert", Kind::Data, format!("{}: {e}", path.display())))?;
        manifests.push(manifest);
    }
    unify_taxonomies(&mut manifests).stage("convert")?;
    for m in &manifests {
        m.validate().stage("convert")?;
    }
    Ok(manifests)
}

pub fn manifest_file(m: &DatasetManifest) -> RecordFile<Review> {
    RecordFile::new(m.header(), m.reviews.clone())
}

pub fn manifest_from(
    file: RecordFile<Review>,
    stage: &'static str,
) -> Result<DatasetManifest, Failure> {
    let m = DatasetManifest {
        name: file.header.name,
        split: file.header.split,
        taxonomy: file.header.taxonomy,
        reviews: file.records,
    };
    m.validate().stage(stage)?;
    Ok(m)
}

pub fn kshot_seed(global: u64, split: Split) -> u64 {
    derive_seed(global, &format!("kshot/{split}"))
}

pub fn kshot(
    manifest: &DatasetManifest,
    k: usize,
    global_seed: u64,
) -> Result<DatasetManifest, Failure> {
    let seed = kshot_seed(global_seed, manifest.split);
    kshot_sample(manifest, ShotConfig { k, seed }).stage("kshot")
}

pub fn derive(manifest: &DatasetManifest, tasks: &[TaskKind]) -> RecordFile<TaskInstance> {
    RecordFile::new(manifest.header(), flatten(&derive_all(manifest, tasks)))
}

pub fn render_file(
    derived: &RecordFile<TaskInstance>,
    table: &TemplateTable,
) -> Result<RecordFile<RenderedExample>, Failure> {
    let records = derived
        .records
        .iter()
        .map(|i| render(i, &derived.header.taxonomy, table))
        .collect::<absa_kit::Result<Vec<_>>>()
        .stage("render")?;
    Ok(RecordFile::new(derived.header.clone(), records))
}

pub fn tasks_present<T>(records: &[T], task: impl Fn(&T) -> TaskKind) -> Vec<TaskKind> {
    let set: BTreeSet<TaskKind> = records.iter().map(task).collect();
    set.into_iter().collect()
}

pub fn mix(
    rendered: &RecordFile<RenderedExample>,
    strategy: Strategy,
    tasks: &[TaskKind],
    global_seed: u64,
    batch_size: Option<usize>,
) -> Result<RecordFile<MixtureRecord>, Failure> {
    let mut by_task: BTreeMap<TaskKind, Vec<RenderedExample>> = BTreeMap::new();
    for e in &rendered.records {
        by_task.entry(e.instance.task).or_default().push(e.clone());
    }
    let spec = MixtureSpec {
        strategy,
        tasks: tasks.to_vec(),
        seed: derive_seed(global_seed, "mix"),
        batch_size,
    };
    let mixed = build_mixture(&by_task, &spec).stage("mix")?;
    Ok(RecordFile::new(
        rendered.header.clone(),
        mixed
            .into_iter()
            .map(|m| MixtureRecord {
                example: m.item,
                batch: m.batch,
            })
            .collect(),
    ))
}

/// Parses a backend spec. A corrupting oracle without an explicit seed
/// takes one derived from the global seed.
pub fn backend(spec: &str, global_seed: u64) -> Result<Backend, Failure> {
    let mut backend: Backend = spec.parse().stage("infer")?;
    if let Backend::Oracle(cfg) = &mut backend {
        let explicit = spec
            .split([':', ','])
            .any(|p| p.trim().starts_with("seed="));
        if cfg.mode == OracleMode::Corrupt && !explicit {
            cfg.seed = derive_seed(global_seed, "infer");
        }
    }
    Ok(backend)
}

pub fn infer(
    rendered: &RecordFile<RenderedExample>,
    backend: &Backend,
    table: &TemplateTable,
    timeout_ms: u64,
    max_in_flight: usize,
) -> Result<RecordFile<Prediction>, Failure> {
    let ctx = OracleContext {
        templates: table,
        taxonomy: &rendered.header.taxonomy,
    };
    let opts = GatewayOptions {
        timeout: Duration::from_millis(timeout_ms),
        max_in_flight,
    };
    let preds = run_backend(&rendered.records, backend, ctx, &opts).stage("infer")?;
    Ok(RecordFile::new(rendered.header.clone(), preds))
}

pub fn parse(
    predictions: &RecordFile<Prediction>,
    table: &TemplateTable,
) -> RecordFile<ParsedRecord> {
    let mut records = Vec::with_capacity(predictions.records.len());
    // batch per task so each template is compiled once
    let mut by_task: BTreeMap<TaskKind, Vec<usize>> = BTreeMap::new();
    for (i, p) in predictions.records.iter().enumerate() {
        by_task.entry(p.task).or_default().push(i);
    }
    let mut outcomes = vec![None; predictions.records.len()];
    for (task, idx) in &by_task {
        let outputs: Vec<&str> = idx
            .iter()
            .map(|&i| predictions.records[i].output.as_str())
            .collect();
        let parsed = parse_batch(
            *task,
            table.template(*task),
            &outputs,
            &predictions.header.taxonomy,
        );
        for (&i, outcome) in idx.iter().zip(parsed) {
            outcomes[i] = Some(outcome);
        }
    }
    for (p, outcome) in predictions.records.iter().zip(outcomes) {
        let outcome = outcome.expect("every prediction parsed");
        records.push(ParsedRecord {
            id: p.id.clone(),
            task: p.task,
            tuples: outcome.tuples,
            failures: outcome.failures,
            timed_out: p.timed_out,
        });
    }
    RecordFile::new(predictions.header.clone(), records)
}

pub fn failure_count(parsed: &RecordFile<ParsedRecord>) -> usize {
    parsed.records.iter().map(|r| r.failures.len()).sum()
}

pub struct Scored {
    pub report: EvalReport,
    /// Gold instances without a prediction, scored as empty.
    pub missing: usize,
}

/// Aligns parsed predictions with gold instances by id and scores every
/// task in `tasks`, or every task of the gold file.
pub fn score(
    parsed: &RecordFile<ParsedRecord>,
    gold: &RecordFile<TaskInstance>,
    tasks: Option<&[TaskKind]>,
    opts: MatchOptions,
) -> Result<Scored, Failure> {
    let wanted: BTreeSet<TaskKind> = match tasks {
        Some(t) => t.iter().copied().collect(),
        None => gold.records.iter().map(|i| i.task).collect(),
    };
    let gold_tasks: HashMap<&str, TaskKind> = gold
        .records
        .iter()
        .map(|i| (i.id.as_str(), i.task))
        .collect();
    let mut by_id: HashMap<&str, &ParsedRecord> = HashMap::new();
    for p in &parsed.records {
        match gold_tasks.get(p.id.as_str()) {
            None => {
                return Err(Failure::new(
                    "score",
                    Kind::Data,
                    format!("prediction {:?} has no gold instance", p.id),
                ))
            }
            Some(t) if *t != p.task => {
                return Err(Failure::new(
                    "score",
                    Kind::Data,
                    format!("prediction {:?} is {} but gold is {t}", p.id, p.task),
                ))
            }
            Some(_) => {}
        }
        if by_id.insert(p.id.as_str(), p).is_some() {
            return Err(Failure::new(
                "score",
                Kind::Data,
                format!("duplicate prediction {:?}", p.id),
            ));
        }
    }
    let grouped = group_by_task(
        gold.records
            .iter()
            .filter(|i| wanted.contains(&i.task))
            .cloned()
            .collect(),
    );
    let mut preds = TaskPredictions::new();
    let mut golds = TaskPredictions::new();
    let mut missing = 0;
    let mut failures = 0;
    for task in &wanted {
        let instances = grouped.get(task).map(Vec::as_slice).unwrap_or_default();
        if instances.is_empty() {
            return Err(Failure::new(
                "score",
                Kind::Data,
                format!("no gold instances for {task}"),
            ));
        }
        let mut p = Vec::with_capacity(instances.len());
        for inst in instances {
            match by_id.get(inst.id.as_str()) {
                Some(r) => {
                    failures += r.failures.len();
                    p.push(r.tuples.clone());
                }
                None => {
                    missing += 1;
                    p.push(Vec::new());
                }
            }
        }
        preds.insert(*task, p);
        golds.insert(*task, instances.iter().map(|i| i.targets.clone()).collect());
    }
    let mut report = score_run(&preds, &golds, opts).stage("score")?;
    report.parse_failure_count = failures;
    Ok(Scored { report, missing })
}

pub fn write_report(
    report: &EvalReport,
    json: Option<&Path>,
    table: Option<&Path>,
) -> Result<(), Failure> {
    let io_err = |p: &Path, e: std::io::Error| {
        Failure::new("score", Kind::Data, format!("{}: {e}", p.display()))
    };
    for (path, body) in [
        (
            json,
            serde_json::to_string_pretty(report).expect("report serializes") + "\n",
        ),
        (table, report.to_table()),
    ] {
        if let Some(path) = path {
            if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
                std::fs::create_dir_all(parent).map_err(|e| io_err(parent, e))?;
            }
            std::fs::write(path, body).map_err(|e| io_err(path, e))?;
        }
    }
    Ok(())
}
