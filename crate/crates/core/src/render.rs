//! Instruction rendering: the five-section prompt wrapped around a review,
//! and the summary sentences a model is trained to produce.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::derivation::{Given, TaskInstance};
use crate::error::{Error, Result};
use crate::schema::{Element, Polarity, TaskKind, Taxonomy, Term, Tuple};

pub const SUMMARY_SEPARATOR: &str = " [SSEP] ";
pub const EMPTY_MARKER: &str = "none";
pub const IMPLICIT_ASPECT: &str = "it";
pub const IMPLICIT_OPINION: &str = "unstated";
pub const SENTINEL: &str = "<extra_id_0>";

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Segment {
    Literal(String),
    Slot(Element),
}

/// A task's summary pattern, split into literals and placeholders.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Template {
    task: TaskKind,
    pattern: String,
    segments: Vec<Segment>,
}

impl Template {
    /// Validates that every element of the task signature appears exactly
    /// once and that adjacent placeholders are separated by literal text.
    pub fn new(task: TaskKind, pattern: &str) -> Result<Self> {
        let invalid = |reason: String| Error::InvalidTemplate {
            task: task.name().to_string(),
            reason,
        };
        let mut segments: Vec<Segment> = Vec::new();
        let mut literal = String::new();
        let mut rest = pattern;
        while !rest.is_empty() {
            let slot = Element::ALL
                .into_iter()
                .find(|e| rest.starts_with(e.placeholder()));
            match slot {
                Some(e) => {
                    if !literal.is_empty() {
                        segments.push(Segment::Literal(std::mem::take(&mut literal)));
                    }
                    if matches!(segments.last(), Some(Segment::Slot(_))) {
                        return Err(invalid(format!(
                            "placeholder {} directly follows another placeholder",
                            e.placeholder()
                        )));
                    }
                    segments.push(Segment::Slot(e));
                    rest = &rest[e.placeholder().len()..];
                }
                None => {
                    let ch = rest.chars().next().expect("non-empty");
                    literal.push(ch);
                    rest = &rest[ch.len_utf8()..];
                }
            }
        }
        if !literal.is_empty() {
            segments.push(Segment::Literal(literal));
        }
        let signature = task.signature();
        for e in Element::ALL {
            let count = segments.iter().filter(|s| **s == Segment::Slot(e)).count();
            let wanted = usize::from(signature.contains(e));
            if count != wanted {
                return Err(invalid(format!(
                    "{} appears {count} times, expected {wanted}",
                    e.placeholder()
                )));
            }
        }
        Ok(Self {
            task,
            pattern: pattern.to_string(),
            segments,
        })
    }

    pub fn task(&self) -> TaskKind {
        self.task
    }

    pub fn pattern(&self) -> &str {
        &self.pattern
    }

    pub fn segments(&self) -> &[Segment] {
        &self.segments
    }

    /// Instantiates the pattern for one tuple.
    pub fn summary(&self, tuple: &Tuple) -> String {
        let mut out = String::new();
        for segment in &self.segments {
            match segment {
                Segment::Literal(s) => out.push_str(s),
                Segment::Slot(Element::Aspect) => {
                    out.push_str(term_surface(tuple.aspect.as_ref(), IMPLICIT_ASPECT))
                }
                Segment::Slot(Element::Opinion) => {
                    out.push_str(term_surface(tuple.opinion.as_ref(), IMPLICIT_OPINION))
                }
                Segment::Slot(Element::Category) => {
                    if let Some(c) = &tuple.category {
                        out.push_str(&c.surface());
                    }
                }
                Segment::Slot(Element::Sentiment) => {
                    out.push_str(tuple.polarity.map_or("", Polarity::label_word))
                }
            }
        }
        out
    }
}

fn term_surface<'a>(term: Option<&'a Term>, implicit: &'a str) -> &'a str {
    match term {
        Some(Term::Explicit(s)) => s,
        Some(Term::Implicit) => implicit,
        None => "",
    }
}

pub fn default_pattern(task: TaskKind) -> &'static str {
    match task {
        TaskKind::Ate => "the aspect is <aspect>",
        TaskKind::Acd => "the category is <category>",
        TaskKind::Absc | TaskKind::Cosc => "<extra_id_0> <sentiment>",
        TaskKind::Aooe => "the opinion is <opinion>",
        TaskKind::Aspe => "<aspect> is <sentiment>",
        TaskKind::Aope => "<aspect> is <opinion>",
        TaskKind::Cspe => "<category> is <sentiment>",
        TaskKind::Aoste => "it is <sentiment> because <aspect> is <opinion>",
        TaskKind::Acste => "<category> is <sentiment> because of <aspect>",
        TaskKind::Acosqe => "<category> is <sentiment> because <aspect> is <opinion>",
    }
}

/// Per-task templates and task-name tokens.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TemplateTable {
    templates: BTreeMap<TaskKind, Template>,
    names: BTreeMap<TaskKind, String>,
}

impl Default for TemplateTable {
    fn default() -> Self {
        let templates = TaskKind::ALL
            .into_iter()
            .map(|t| {
                let template = Template::new(t, default_pattern(t)).expect("default template");
                (t, template)
            })
            .collect();
        let names = TaskKind::ALL
            .into_iter()
            .map(|t| (t, format!("<{}>", t.name())))
            .collect();
        Self { templates, names }
    }
}

#[derive(Debug, Default, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
struct TemplateConfig {
    #[serde(default)]
    templates: BTreeMap<String, String>,
    #[serde(default)]
    task_names: BTreeMap<String, String>,
}

impl TemplateTable {
    pub fn template(&self, task: TaskKind) -> &Template {
        &self.templates[&task]
    }

    pub fn task_name_token(&self, task: TaskKind) -> &str {
        &self.names[&task]
    }

    pub fn set_template(&mut self, task: TaskKind, pattern: &str) -> Result<()> {
        self.templates.insert(task, Template::new(task, pattern)?);
        Ok(())
    }

    /// Defaults overridden by a TOML document with optional `[templates]`
    /// and `[task_names]` tables keyed by task name:
    ///
    /// ```toml
    /// [templates]
    /// ABSC = "<sentiment>"
    /// ```
    pub fn from_toml_str(s: &str) -> Result<Self> {
        let config: TemplateConfig =
            toml::from_str(s).map_err(|e| Error::Config(format!("template table: {e}")))?;
        let mut table = Self::default();
        for (task, pattern) in &config.templates {
            table.set_template(task.parse()?, pattern)?;
        }
        for (task, token) in config.task_names {
            table.names.insert(task.parse()?, token);
        }
        Ok(table)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let s = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&s)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RenderedExample {
    #[serde(flatten)]
    pub instance: TaskInstance,
    pub input: String,
    pub target: String,
}

/// The instruction prompt: task name, input, optional option lists and the
/// template, one section per line.
pub fn render_input(
    instance: &TaskInstance,
    taxonomy: &Taxonomy,
    table: &TemplateTable,
) -> Result<String> {
    let task = instance.task;
    let missing = || Error::MissingAnchor {
        task: task.name().to_string(),
        id: instance.id.clone(),
    };
    let input = match (task, &instance.given) {
        (TaskKind::Absc, Some(Given::Aspect(a))) => {
            format!("{} The {a} is {SENTINEL}", instance.text)
        }
        (TaskKind::Cosc, Some(Given::Category(c))) => {
            format!("{} The {} is {SENTINEL}", instance.text, c.surface())
        }
        (TaskKind::Aooe, Some(Given::Aspect(a))) => {
            format!("{} What about the {a}?", instance.text)
        }
        (TaskKind::Absc | TaskKind::Cosc | TaskKind::Aooe, _) => return Err(missing()),
        _ => instance.text.clone(),
    };
    let mut sections = vec![
        format!("Task Name: {}", table.task_name_token(task)),
        format!("Input: {input}"),
    ];
    if task.uses_sentiment_options() {
        let words: Vec<&str> = Polarity::ALL.iter().map(|p| p.label_word()).collect();
        sections.push(format!("Sentiment Options: {}", words.join(", ")));
    }
    if task.uses_category_options() {
        let surfaces: Vec<String> = taxonomy.labels().iter().map(|c| c.surface()).collect();
        sections.push(format!("Category Options: {}", surfaces.join(", ")));
    }
    sections.push(format!("Template: {}", table.template(task).pattern()));
    Ok(sections.join("\n"))
}

/// Summary sentences joined by `[SSEP]`, or `none` for an empty target set.
pub fn render_target(instance: &TaskInstance, table: &TemplateTable) -> String {
    render_tuples(&instance.targets, table.template(instance.task))
}

pub fn render_tuples(tuples: &[Tuple], template: &Template) -> String {
    if tuples.is_empty() {
        return EMPTY_MARKER.to_string();
    }
    tuples
        .iter()
        .map(|t| template.summary(t))
        .collect::<Vec<_>>()
        .join(SUMMARY_SEPARATOR)
}

pub fn render(
    instance: &TaskInstance,
    taxonomy: &Taxonomy,
    table: &TemplateTable,
) -> Result<RenderedExample> {
    Ok(RenderedExample {
        input: render_input(instance, taxonomy, table)?,
        target: render_target(instance, table),
        instance: instance.clone(),
    })
}

pub fn render_all(
    instances: &[TaskInstance],
    taxonomy: &Taxonomy,
    table: &TemplateTable,
) -> Result<Vec<RenderedExample>> {
    instances
        .iter()
        .map(|i| render(i, taxonomy, table))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::schema::CategoryLabel;

    fn taxonomy() -> Taxonomy {
        Taxonomy::new([
            CategoryLabel::new("FOOD#QUALITY"),
            CategoryLabel::new("SERVICE#GENERAL"),
        ])
        .unwrap()
    }

    fn sushi_tuple() -> Tuple {
        Tuple {
            aspect: Some(Term::explicit("sushi")),
            category: Some(CategoryLabel::new("FOOD#QUALITY")),
            opinion: Some(Term::explicit("delicious")),
            polarity: Some(Polarity::Positive),
        }
    }

    fn instance(task: TaskKind, given: Option<Given>, targets: Vec<Tuple>) -> TaskInstance {
        TaskInstance {
            id: "r0/X".into(),
            review_id: "r0".into(),
            text: "The sushi is delicious.".into(),
            task,
            given,
            targets,
        }
    }

    #[test]
    fn acosqe_input() {
        let table = TemplateTable::default();
        let inst = instance(TaskKind::Acosqe, None, vec![sushi_tuple()]);
        assert_eq!(
            render_input(&inst, &taxonomy(), &table).unwrap(),
            "Task Name: <ACOSQE>\nInput: The sushi is delicious.\nSentiment Options: good, ok, bad\n\
             Category Options: food quality, service general\n\
             Template: <category> is <sentiment> because <aspect> is <opinion>"
        );
        assert_eq!(
            render_target(&inst, &table),
            "food quality is good because sushi is delicious"
        );
    }

    #[test]
    fn aope_has_no_options() {
        let table = TemplateTable::default();
        let inst = instance(TaskKind::Aope, None, vec![]);
        let input = render_input(&inst, &taxonomy(), &table).unwrap();
        assert!(!input.contains("Sentiment Options"));
        assert!(!input.contains("Category Options"));
        assert_eq!(render_target(&inst, &table), "none");
    }

    #[test]
    fn anchored_inputs() {
        let table = TemplateTable::default();
        let absc = instance(TaskKind::Absc, Some(Given::Aspect("sushi".into())), vec![]);
        let input = render_input(&absc, &taxonomy(), &table).unwrap();
        assert!(input
            .lines()
            .any(|l| l == "Input: The sushi is delicious. The sushi is <extra_id_0>"));
        let cosc = instance(
            TaskKind::Cosc,
            Some(Given::Category(CategoryLabel::new("FOOD#QUALITY"))),
            vec![],
        );
        let input = render_input(&cosc, &taxonomy(), &table).unwrap();
        assert!(input.contains("Input: The sushi is delicious. The food quality is <extra_id_0>\n"));
        let aooe = instance(TaskKind::Aooe, Some(Given::Aspect("sushi".into())), vec![]);
        let input = render_input(&aooe, &taxonomy(), &table).unwrap();
        assert!(input.contains("Input: The sushi is delicious. What about the sushi?\n"));
        let bad = instance(TaskKind::Aooe, None, vec![]);
        assert!(matches!(
            render_input(&bad, &taxonomy(), &table),
            Err(Error::MissingAnchor { .. })
        ));
    }

    #[test]
    fn two_aope_pairs() {
        let table = TemplateTable::default();
        let pair = |a: &str, o: &str| Tuple {
            aspect: Some(Term::explicit(a)),
            opinion: Some(Term::explicit(o)),
            ..Default::default()
        };
        let inst = instance(
            TaskKind::Aope,
            None,
            vec![pair("sushi", "delicious"), pair("service", "slow")],
        );
        assert_eq!(
            render_target(&inst, &table),
            "sushi is delicious [SSEP] service is slow"
        );
    }

    #[test]
    fn implicit_surfaces() {
        let table = TemplateTable::default();
        let t = Tuple {
            aspect: Some(Term::Implicit),
            category: Some(CategoryLabel::new("SERVICE#GENERAL")),
            opinion: Some(Term::Implicit),
            polarity: Some(Polarity::Negative),
        };
        assert_eq!(
            table.template(TaskKind::Acosqe).summary(&t),
            "service general is bad because it is unstated"
        );
    }

    #[test]
    fn section_presence_follows_flags() {
        let table = TemplateTable::default();
        for task in TaskKind::ALL {
            let given = match task.given() {
                Some(Element::Aspect) => Some(Given::Aspect("sushi".into())),
                Some(_) => Some(Given::Category(CategoryLabel::new("FOOD#QUALITY"))),
                None => None,
            };
            let input = render_input(&instance(task, given, vec![]), &taxonomy(), &table).unwrap();
            let prefixes: Vec<&str> = input
                .lines()
                .map(|l| l.split_once(": ").unwrap().0)
                .collect();
            let mut expected = vec!["Task Name", "Input"];
            if task.uses_sentiment_options() {
                expected.push("Sentiment Options");
            }
            if task.uses_category_options() {
                expected.push("Category Options");
            }
            expected.push("Template");
            assert_eq!(prefixes, expected, "{task}");
        }
    }

    #[test]
    fn template_validation() {
        assert!(Template::new(TaskKind::Aope, "<aspect><opinion>").is_err());
        assert!(Template::new(TaskKind::Aope, "<aspect> is").is_err());
        assert!(Template::new(TaskKind::Aope, "<aspect> is <opinion> <aspect>").is_err());
        assert!(Template::new(TaskKind::Ate, "<aspect> is <sentiment>").is_err());
        let t = Template::new(TaskKind::Absc, "<extra_id_0> <sentiment>").unwrap();
        assert_eq!(
            t.segments(),
            &[
                Segment::Literal("<extra_id_0> ".into()),
                Segment::Slot(Element::Sentiment)
            ]
        );
    }

    #[test]
    fn toml_overrides() {
        let table = TemplateTable::from_toml_str(
            "[templates]\nABSC = \"<sentiment>\"\n[task_names]\nATE = \"<aspect-extraction>\"\n",
        )
        .unwrap();
        assert_eq!(table.template(TaskKind::Absc).pattern(), "<sentiment>");
        assert_eq!(table.task_name_token(TaskKind::Ate), "<aspect-extraction>");
        assert_eq!(table.task_name_token(TaskKind::Acd), "<ACD>");
        assert!(TemplateTable::from_toml_str("[templates]\nXYZ = \"a\"").is_err());
        assert!(TemplateTable::from_toml_str("[templates]\nATE = \"<opinion>\"").is_err());
    }
}
