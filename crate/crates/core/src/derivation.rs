//! Turning ACOS quads into labeled instances for every task, and K-shot
//! review sampling.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::DatasetManifest;
use crate::schema::{CategoryLabel, Element, Review, Signature, TaskKind, Term, Tuple};
use crate::seed;

/// Anchor supplied in the input of ABSC/AOOE (an aspect) and COSC (a category).
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Given {
    Aspect(String),
    Category(CategoryLabel),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaskInstance {
    pub id: String,
    pub review_id: String,
    pub text: String,
    pub task: TaskKind,
    #[serde(default)]
    pub given: Option<Given>,
    pub targets: Vec<Tuple>,
}

pub type TaskDatasets = BTreeMap<TaskKind, Vec<TaskInstance>>;

/// Implicit aspects survive only alongside a category, implicit opinions
/// only alongside a sentiment.
pub fn keeps_tuple(tuple: &Tuple, signature: Signature) -> bool {
    let implicit_aspect = tuple.aspect.as_ref().is_some_and(Term::is_implicit);
    let implicit_opinion = tuple.opinion.as_ref().is_some_and(Term::is_implicit);
    !(implicit_aspect && !signature.contains(Element::Category)
        || implicit_opinion && !signature.contains(Element::Sentiment))
}

fn project_all<'a, I>(quads: I, signature: Signature) -> Vec<Tuple>
where
    I: IntoIterator<Item = &'a crate::schema::AcosQuad>,
{
    let mut out: Vec<Tuple> = Vec::new();
    for quad in quads {
        let tuple = Tuple::project(quad, signature);
        if keeps_tuple(&tuple, signature) && !out.contains(&tuple) {
            out.push(tuple);
        }
    }
    out
}

/// Instances of `task` for one review. Targets keep first-appearance order.
pub fn derive(review: &Review, task: TaskKind) -> Vec<TaskInstance> {
    let signature = task.signature();
    let instance = |suffix: String, given: Option<Given>, targets: Vec<Tuple>| TaskInstance {
        id: format!("{}/{}{}", review.id, task.name(), suffix),
        review_id: review.id.clone(),
        text: review.text.clone(),
        task,
        given,
        targets,
    };
    match task.given() {
        None => vec![instance(
            String::new(),
            None,
            project_all(&review.quads, signature),
        )],
        Some(Element::Aspect) => {
            let mut anchors: Vec<&str> = Vec::new();
            for quad in &review.quads {
                if let Term::Explicit(a) = &quad.aspect {
                    if !anchors.contains(&a.as_str()) {
                        anchors.push(a);
                    }
                }
            }
            anchors
                .into_iter()
                .enumerate()
                .map(|(i, anchor)| {
                    let quads = review
                        .quads
                        .iter()
                        .filter(|q| q.aspect.as_explicit() == Some(anchor));
                    instance(
                        format!("/{i}"),
                        Some(Given::Aspect(anchor.to_string())),
                        project_all(quads, signature),
                    )
                })
                .collect()
        }
        Some(Element::Category) => {
            let mut anchors: Vec<&CategoryLabel> = Vec::new();
            for quad in &review.quads {
                if !anchors.contains(&&quad.category) {
                    anchors.push(&quad.category);
                }
            }
            anchors
                .into_iter()
                .enumerate()
                .map(|(i, anchor)| {
                    let quads = review.quads.iter().filter(|q| &q.category == anchor);
                    instance(
                        format!("/{i}"),
                        Some(Given::Category(anchor.clone())),
                        project_all(quads, signature),
                    )
                })
                .collect()
        }
        Some(other) => unreachable!("no task is anchored on {other:?}"),
    }
}

/// Derives every requested task over the manifest, keeping review order
/// within each task.
pub fn derive_all(manifest: &DatasetManifest, tasks: &[TaskKind]) -> TaskDatasets {
    tasks
        .iter()
        .map(|&task| {
            let instances = manifest
                .reviews
                .iter()
                .flat_map(|r| derive(r, task))
                .collect();
            (task, instances)
        })
        .collect()
}

/// Flattens per-task datasets in registry order.
pub fn flatten(datasets: &TaskDatasets) -> Vec<TaskInstance> {
    datasets.values().flatten().cloned().collect()
}

pub fn group_by_task(instances: Vec<TaskInstance>) -> TaskDatasets {
    let mut out = TaskDatasets::new();
    for instance in instances {
        out.entry(instance.task).or_default().push(instance);
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ShotConfig {
    pub k: usize,
    pub seed: u64,
}

/// Samples `k` whole reviews without replacement. The subset keeps the
/// manifest's review order.
pub fn kshot_sample(manifest: &DatasetManifest, config: ShotConfig) -> Result<DatasetManifest> {
    let n = manifest.reviews.len();
    if config.k > n {
        return Err(Error::KTooLarge {
            k: config.k,
            available: n,
        });
    }
    let mut rng = seed::rng(config.seed);
    let mut picked = rand::seq::index::sample(&mut rng, n, config.k).into_vec();
    picked.sort_unstable();
    Ok(DatasetManifest {
        name: manifest.name.clone(),
        split: manifest.split,
        taxonomy: manifest.taxonomy.clone(),
        reviews: picked
            .into_iter()
            .map(|i| manifest.reviews[i].clone())
            .collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::io::Split;
    use crate::schema::{AcosQuad, Polarity, Taxonomy};

    fn quad(a: Option<&str>, c: &str, o: Option<&str>, p: Polarity) -> AcosQuad {
        AcosQuad {
            aspect: a.map_or(Term::Implicit, Term::explicit),
            category: CategoryLabel::new(c),
            opinion: o.map_or(Term::Implicit, Term::explicit),
            polarity: p,
        }
    }

    fn review(id: &str, text: &str, quads: Vec<AcosQuad>) -> Review {
        Review {
            id: id.into(),
            text: text.into(),
            quads,
        }
    }

    #[test]
    fn aope_on_sushi() {
        let r = review(
            "r0",
            "The sushi is delicious.",
            vec![quad(
                Some("sushi"),
                "FOOD#QUALITY",
                Some("delicious"),
                Polarity::Positive,
            )],
        );
        let out = derive(&r, TaskKind::Aope);
        assert_eq!(out.len(), 1);
        assert_eq!(
            out[0].targets,
            vec![Tuple {
                aspect: Some(Term::explicit("sushi")),
                opinion: Some(Term::explicit("delicious")),
                ..Default::default()
            }]
        );
    }

    #[test]
    fn implicit_aspect_dropped_for_ate() {
        let r = review(
            "r0",
            "Great place.",
            vec![quad(
                None,
                "RESTAURANT#GENERAL",
                Some("Great"),
                Polarity::Positive,
            )],
        );
        let ate = derive(&r, TaskKind::Ate);
        assert_eq!(ate.len(), 1);
        assert!(ate[0].targets.is_empty());
        let acste = derive(&r, TaskKind::Acste);
        assert_eq!(acste[0].targets[0].aspect, Some(Term::Implicit));
        assert!(derive(&r, TaskKind::Absc).is_empty());
        assert!(derive(&r, TaskKind::Aooe).is_empty());
        let cosc = derive(&r, TaskKind::Cosc);
        assert_eq!(cosc.len(), 1);
        assert_eq!(cosc[0].targets[0].polarity, Some(Polarity::Positive));
    }

    #[test]
    fn implicit_opinion_needs_sentiment() {
        let r = review(
            "r0",
            "The staff could be more attentive.",
            vec![quad(
                Some("staff"),
                "SERVICE#GENERAL",
                None,
                Polarity::Negative,
            )],
        );
        assert!(derive(&r, TaskKind::Aope)[0].targets.is_empty());
        assert_eq!(derive(&r, TaskKind::Aooe)[0].targets, vec![]);
        assert_eq!(
            derive(&r, TaskKind::Aoste)[0].targets[0].opinion,
            Some(Term::Implicit)
        );
    }

    #[test]
    fn aspe_dedupes() {
        let r = review(
            "r0",
            "The sushi is delicious and fresh.",
            vec![
                quad(
                    Some("sushi"),
                    "FOOD#QUALITY",
                    Some("delicious"),
                    Polarity::Positive,
                ),
                quad(
                    Some("sushi"),
                    "FOOD#QUALITY",
                    Some("fresh"),
                    Polarity::Positive,
                ),
            ],
        );
        let out = derive(&r, TaskKind::Aspe);
        assert_eq!(
            out[0].targets,
            vec![Tuple {
                aspect: Some(Term::explicit("sushi")),
                polarity: Some(Polarity::Positive),
                ..Default::default()
            }]
        );
        // one anchor for the repeated aspect
        let absc = derive(&r, TaskKind::Absc);
        assert_eq!(absc.len(), 1);
        assert_eq!(absc[0].given, Some(Given::Aspect("sushi".into())));
        let aooe = derive(&r, TaskKind::Aooe);
        assert_eq!(aooe[0].targets.len(), 2);
    }

    fn manifest(n: usize) -> DatasetManifest {
        let reviews = (0..n)
            .map(|i| {
                review(
                    &format!("train-{i}"),
                    "The sushi is delicious.",
                    vec![quad(
                        Some("sushi"),
                        "FOOD#QUALITY",
                        Some("delicious"),
                        Polarity::Positive,
                    )],
                )
            })
            .collect();
        DatasetManifest {
            name: "t".into(),
            split: Split::Train,
            taxonomy: Taxonomy::new([CategoryLabel::new("FOOD#QUALITY")]).unwrap(),
            reviews,
        }
    }

    #[test]
    fn derive_all_counts() {
        let m = manifest(5);
        let out = derive_all(&m, &[TaskKind::Acosqe]);
        assert_eq!(out[&TaskKind::Acosqe].len(), 5);
        assert!(derive_all(&m, &[]).is_empty());
    }

    #[test]
    fn kshot() {
        let m = manifest(100);
        let cfg = ShotConfig { k: 32, seed: 7 };
        let a = kshot_sample(&m, cfg).unwrap();
        let b = kshot_sample(&m, cfg).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.reviews.len(), 32);
        assert!(kshot_sample(&m, ShotConfig { k: 0, seed: 1 })
            .unwrap()
            .reviews
            .is_empty());
        assert!(matches!(
            kshot_sample(&m, ShotConfig { k: 101, seed: 1 }),
            Err(Error::KTooLarge { .. })
        ));
    }
}
