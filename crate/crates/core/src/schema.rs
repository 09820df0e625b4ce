//! Domain types shared by every stage: sentiment polarities and their label
//! words, aspect/opinion terms, category labels and taxonomies, ACOS quads,
//! reviews, the task registry, and task-projected tuples.

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// Sentinel used for implicit terms in record files.
pub const IMPLICIT_MARKER: &str = "IMPLICIT";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Polarity {
    Positive,
    Neutral,
    Negative,
}

impl Polarity {
    pub const ALL: [Polarity; 3] = [Polarity::Positive, Polarity::Neutral, Polarity::Negative];

    /// The label word shown to the model: `good`, `ok` or `bad`.
    pub fn label_word(self) -> &'static str {
        match self {
            Polarity::Positive => "good",
            Polarity::Neutral => "ok",
            Polarity::Negative => "bad",
        }
    }

    /// Inverse of [`Polarity::label_word`], after trimming and lowercasing.
    pub fn from_label_word(word: &str) -> Result<Self> {
        match word.trim().to_lowercase().as_str() {
            "good" => Ok(Polarity::Positive),
            "ok" => Ok(Polarity::Neutral),
            "bad" => Ok(Polarity::Negative),
            _ => Err(Error::UnknownLabelWord(word.to_string())),
        }
    }
}

impl fmt::Display for Polarity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Polarity::Positive => "POSITIVE",
            Polarity::Neutral => "NEUTRAL",
            Polarity::Negative => "NEGATIVE",
        })
    }
}

pub fn polarity_to_word(p: Polarity) -> &'static str {
    p.label_word()
}

pub fn word_to_polarity(w: &str) -> Result<Polarity> {
    Polarity::from_label_word(w)
}

/// An aspect or opinion term: a verbatim span of the review, or implicit.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Term {
    Implicit,
    Explicit(String),
}

impl Term {
    pub fn explicit(s: impl Into<String>) -> Self {
        Term::Explicit(s.into())
    }

    pub fn is_implicit(&self) -> bool {
        matches!(self, Term::Implicit)
    }

    pub fn as_explicit(&self) -> Option<&str> {
        match self {
            Term::Explicit(s) => Some(s),
            Term::Implicit => None,
        }
    }
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Term::Implicit => f.write_str(IMPLICIT_MARKER),
            Term::Explicit(s) => f.write_str(s),
        }
    }
}

impl Serialize for Term {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Term::Implicit => serializer.serialize_str(IMPLICIT_MARKER),
            Term::Explicit(s) => serializer.serialize_str(s),
        }
    }
}

impl<'de> Deserialize<'de> for Term {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        if s == IMPLICIT_MARKER {
            Ok(Term::Implicit)
        } else if s.is_empty() {
            Err(serde::de::Error::custom(
                "empty term; use \"IMPLICIT\" for implicit terms",
            ))
        } else {
            Ok(Term::Explicit(s))
        }
    }
}

/// Canonical category identifier such as `FOOD#QUALITY`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct CategoryLabel(String);

impl CategoryLabel {
    pub fn new(canonical: impl Into<String>) -> Self {
        CategoryLabel(canonical.into())
    }

    pub fn canonical(&self) -> &str {
        &self.0
    }

    /// Natural-language form: lowercase with `#` and `_` turned into spaces.
    pub fn surface(&self) -> String {
        category_surface(&self.0)
    }
}

impl fmt::Display for CategoryLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

pub fn category_surface(canonical: &str) -> String {
    normalize_surface(&canonical.replace(['#', '_'], " "))
}

fn normalize_surface(s: &str) -> String {
    s.split_whitespace()
        .collect::<Vec<_>>()
        .join(" ")
        .to_lowercase()
}

/// Ordered category inventory of a dataset with an invertible surface map.
#[derive(Debug, Clone, Default)]
pub struct Taxonomy {
    labels: Vec<CategoryLabel>,
    by_surface: HashMap<String, usize>,
}

impl Taxonomy {
    /// Builds a taxonomy, dropping repeated labels and rejecting two labels
    /// that render to the same surface form.
    pub fn new<I>(labels: I) -> Result<Self>
    where
        I: IntoIterator<Item = CategoryLabel>,
    {
        let mut taxonomy = Taxonomy::default();
        for label in labels {
            taxonomy.insert(label)?;
        }
        Ok(taxonomy)
    }

    pub fn insert(&mut self, label: CategoryLabel) -> Result<()> {
        let surface = label.surface();
        match self.by_surface.get(&surface) {
            Some(&i) if self.labels[i] == label => Ok(()),
            Some(&i) => Err(Error::AmbiguousCategorySurface {
                first: self.labels[i].to_string(),
                second: label.to_string(),
                surface,
            }),
            None => {
                self.by_surface.insert(surface, self.labels.len());
                self.labels.push(label);
                Ok(())
            }
        }
    }

    pub fn labels(&self) -> &[CategoryLabel] {
        &self.labels
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn contains(&self, label: &CategoryLabel) -> bool {
        self.by_surface
            .get(&label.surface())
            .is_some_and(|&i| &self.labels[i] == label)
    }

    pub fn get(&self, index: usize) -> Option<&CategoryLabel> {
        self.labels.get(index)
    }

    /// Inverse of [`CategoryLabel::surface`]. Matching ignores case and
    /// collapses runs of whitespace.
    pub fn from_surface(&self, surface: &str) -> Result<&CategoryLabel> {
        self.by_surface
            .get(&normalize_surface(surface))
            .map(|&i| &self.labels[i])
            .ok_or_else(|| Error::UnknownCategory(surface.to_string()))
    }

    /// Looks a canonical identifier up, e.g. while validating loaded data.
    pub fn resolve(&self, canonical: &str) -> Result<&CategoryLabel> {
        let label = CategoryLabel::new(canonical);
        self.by_surface
            .get(&label.surface())
            .map(|&i| &self.labels[i])
            .filter(|found| **found == label)
            .ok_or_else(|| Error::UnknownCategory(canonical.to_string()))
    }
}

impl PartialEq for Taxonomy {
    fn eq(&self, other: &Self) -> bool {
        self.labels == other.labels
    }
}

impl Eq for Taxonomy {}

impl Serialize for Taxonomy {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        self.labels.serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for Taxonomy {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let labels = Vec::<CategoryLabel>::deserialize(deserializer)?;
        Taxonomy::new(labels).map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct AcosQuad {
    pub aspect: Term,
    pub category: CategoryLabel,
    pub opinion: Term,
    pub polarity: Polarity,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Review {
    pub id: String,
    pub text: String,
    pub quads: Vec<AcosQuad>,
}

/// One of the four sentiment elements.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Element {
    Aspect,
    Category,
    Opinion,
    Sentiment,
}

impl Element {
    pub const ALL: [Element; 4] = [
        Element::Aspect,
        Element::Category,
        Element::Opinion,
        Element::Sentiment,
    ];

    pub fn placeholder(self) -> &'static str {
        match self {
            Element::Aspect => "<aspect>",
            Element::Category => "<category>",
            Element::Opinion => "<opinion>",
            Element::Sentiment => "<sentiment>",
        }
    }

    fn bit(self) -> u8 {
        1 << self as u8
    }
}

impl FromStr for Element {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "a" | "aspect" => Ok(Element::Aspect),
            "c" | "category" => Ok(Element::Category),
            "o" | "opinion" => Ok(Element::Opinion),
            "s" | "sentiment" => Ok(Element::Sentiment),
            _ => Err(Error::Config(format!("unknown sentiment element {s:?}"))),
        }
    }
}

/// Subset of the four elements, used for task output signatures.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct Signature(u8);

impl Signature {
    pub fn of(elements: &[Element]) -> Self {
        Signature(elements.iter().fold(0, |acc, e| acc | e.bit()))
    }

    pub fn contains(self, e: Element) -> bool {
        self.0 & e.bit() != 0
    }

    pub fn insert(&mut self, e: Element) {
        self.0 |= e.bit();
    }

    pub fn elements(self) -> impl Iterator<Item = Element> {
        Element::ALL.into_iter().filter(move |e| self.contains(*e))
    }

    pub fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }
}

/// The eleven tasks, in report-table order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum TaskKind {
    Ate,
    Acd,
    Absc,
    Cosc,
    Aooe,
    Aspe,
    Aope,
    Cspe,
    Aoste,
    Acste,
    Acosqe,
}

impl TaskKind {
    pub const ALL: [TaskKind; 11] = [
        TaskKind::Ate,
        TaskKind::Acd,
        TaskKind::Absc,
        TaskKind::Cosc,
        TaskKind::Aooe,
        TaskKind::Aspe,
        TaskKind::Aope,
        TaskKind::Cspe,
        TaskKind::Aoste,
        TaskKind::Acste,
        TaskKind::Acosqe,
    ];

    pub fn name(self) -> &'static str {
        match self {
            TaskKind::Ate => "ATE",
            TaskKind::Acd => "ACD",
            TaskKind::Absc => "ABSC",
            TaskKind::Cosc => "COSC",
            TaskKind::Aooe => "AOOE",
            TaskKind::Aspe => "ASPE",
            TaskKind::Aope => "AOPE",
            TaskKind::Cspe => "CSPE",
            TaskKind::Aoste => "AOSTE",
            TaskKind::Acste => "ACSTE",
            TaskKind::Acosqe => "ACOSQE",
        }
    }

    /// Elements the task outputs.
    pub fn signature(self) -> Signature {
        use Element::*;
        match self {
            TaskKind::Ate => Signature::of(&[Aspect]),
            TaskKind::Acd => Signature::of(&[Category]),
            TaskKind::Absc | TaskKind::Cosc => Signature::of(&[Sentiment]),
            TaskKind::Aooe => Signature::of(&[Opinion]),
            TaskKind::Aspe => Signature::of(&[Aspect, Sentiment]),
            TaskKind::Aope => Signature::of(&[Aspect, Opinion]),
            TaskKind::Cspe => Signature::of(&[Category, Sentiment]),
            TaskKind::Aoste => Signature::of(&[Aspect, Opinion, Sentiment]),
            TaskKind::Acste => Signature::of(&[Aspect, Category, Sentiment]),
            TaskKind::Acosqe => Signature::of(&[Aspect, Category, Opinion, Sentiment]),
        }
    }

    /// Anchor element supplied in the input, for ABSC, COSC and AOOE.
    pub fn given(self) -> Option<Element> {
        match self {
            TaskKind::Absc | TaskKind::Aooe => Some(Element::Aspect),
            TaskKind::Cosc => Some(Element::Category),
            _ => None,
        }
    }

    /// Output signature plus the given anchor, if any.
    pub fn involved(self) -> Signature {
        let mut sig = self.signature();
        if let Some(e) = self.given() {
            sig.insert(e);
        }
        sig
    }

    pub fn uses_sentiment_options(self) -> bool {
        self.signature().contains(Element::Sentiment)
    }

    pub fn uses_category_options(self) -> bool {
        self.signature().contains(Element::Category)
    }

    /// Parses a comma-separated list; `all` selects the whole registry.
    pub fn parse_list(s: &str) -> Result<Vec<TaskKind>> {
        if s.trim().eq_ignore_ascii_case("all") {
            return Ok(TaskKind::ALL.to_vec());
        }
        let mut tasks = Vec::new();
        for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            let task: TaskKind = part.parse()?;
            if !tasks.contains(&task) {
                tasks.push(task);
            }
        }
        Ok(tasks)
    }
}

impl fmt::Display for TaskKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for TaskKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let wanted = s.trim();
        TaskKind::ALL
            .into_iter()
            .find(|t| t.name().eq_ignore_ascii_case(wanted))
            .ok_or_else(|| Error::UnknownTask(s.to_string()))
    }
}

impl Serialize for TaskKind {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.serialize_str(self.name())
    }
}

impl<'de> Deserialize<'de> for TaskKind {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// A quad projected onto a task signature. Slots outside the signature are
/// `None`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Default, Serialize, Deserialize)]
pub struct Tuple {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub aspect: Option<Term>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub category: Option<CategoryLabel>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub opinion: Option<Term>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub polarity: Option<Polarity>,
}

impl Tuple {
    pub fn project(quad: &AcosQuad, signature: Signature) -> Self {
        Tuple {
            aspect: signature
                .contains(Element::Aspect)
                .then(|| quad.aspect.clone()),
            category: signature
                .contains(Element::Category)
                .then(|| quad.category.clone()),
            opinion: signature
                .contains(Element::Opinion)
                .then(|| quad.opinion.clone()),
            polarity: signature
                .contains(Element::Sentiment)
                .then_some(quad.polarity),
        }
    }

    /// The set of filled slots.
    pub fn slots(&self) -> Signature {
        let mut sig = Signature::default();
        if self.aspect.is_some() {
            sig.insert(Element::Aspect);
        }
        if self.category.is_some() {
            sig.insert(Element::Category);
        }
        if self.opinion.is_some() {
            sig.insert(Element::Opinion);
        }
        if self.polarity.is_some() {
            sig.insert(Element::Sentiment);
        }
        sig
    }
}

impl fmt::Display for Tuple {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut parts = Vec::new();
        if let Some(a) = &self.aspect {
            parts.push(a.to_string());
        }
        if let Some(c) = &self.category {
            parts.push(c.to_string());
        }
        if let Some(o) = &self.opinion {
            parts.push(o.to_string());
        }
        if let Some(p) = &self.polarity {
            parts.push(p.to_string());
        }
        write!(f, "({})", parts.join(", "))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn label_words() {
        assert_eq!(polarity_to_word(Polarity::Positive), "good");
        assert_eq!(polarity_to_word(Polarity::Neutral), "ok");
        assert_eq!(polarity_to_word(Polarity::Negative), "bad");
        assert_eq!(word_to_polarity("ok").unwrap(), Polarity::Neutral);
        assert_eq!(word_to_polarity("GOOD ").unwrap(), Polarity::Positive);
        assert!(matches!(
            word_to_polarity("great"),
            Err(Error::UnknownLabelWord(_))
        ));
        for p in Polarity::ALL {
            assert_eq!(word_to_polarity(polarity_to_word(p)).unwrap(), p);
        }
    }

    #[test]
    fn category_surface_roundtrip() {
        let taxonomy = Taxonomy::new([
            CategoryLabel::new("FOOD#QUALITY"),
            CategoryLabel::new("FOOD#STYLE_OPTIONS"),
            CategoryLabel::new("RESTAURANT#GENERAL"),
        ])
        .unwrap();
        assert_eq!(CategoryLabel::new("FOOD#QUALITY").surface(), "food quality");
        assert_eq!(
            CategoryLabel::new("FOOD#STYLE_OPTIONS").surface(),
            "food style options"
        );
        assert_eq!(
            taxonomy.from_surface("food quality").unwrap().canonical(),
            "FOOD#QUALITY"
        );
        assert!(matches!(
            taxonomy.from_surface("fud quality"),
            Err(Error::UnknownCategory(_))
        ));
        for label in taxonomy.labels() {
            assert_eq!(taxonomy.from_surface(&label.surface()).unwrap(), label);
        }
    }

    #[test]
    fn colliding_surfaces_are_rejected() {
        let err =
            Taxonomy::new([CategoryLabel::new("A#B_C"), CategoryLabel::new("A_B#C")]).unwrap_err();
        assert!(matches!(err, Error::AmbiguousCategorySurface { .. }));
    }

    #[test]
    fn registry() {
        use Element::*;
        assert_eq!(TaskKind::ALL.len(), 11);
        let expect: [(TaskKind, &[Element], Option<Element>); 11] = [
            (TaskKind::Ate, &[Aspect], None),
            (TaskKind::Acd, &[Category], None),
            (TaskKind::Absc, &[Sentiment], Some(Aspect)),
            (TaskKind::Cosc, &[Sentiment], Some(Category)),
            (TaskKind::Aooe, &[Opinion], Some(Aspect)),
            (TaskKind::Aspe, &[Aspect, Sentiment], None),
            (TaskKind::Aope, &[Aspect, Opinion], None),
            (TaskKind::Cspe, &[Category, Sentiment], None),
            (TaskKind::Aoste, &[Aspect, Opinion, Sentiment], None),
            (TaskKind::Acste, &[Aspect, Category, Sentiment], None),
            (
                TaskKind::Acosqe,
                &[Aspect, Category, Opinion, Sentiment],
                None,
            ),
        ];
        for (task, sig, given) in expect {
            assert_eq!(task.signature(), Signature::of(sig), "{task}");
            assert_eq!(task.given(), given, "{task}");
            assert_eq!(task.uses_sentiment_options(), sig.contains(&Sentiment));
            assert_eq!(task.uses_category_options(), sig.contains(&Category));
            assert_eq!(task.name().parse::<TaskKind>().unwrap(), task);
        }
    }

    #[test]
    fn task_list_parsing() {
        assert_eq!(TaskKind::parse_list("all").unwrap().len(), 11);
        assert_eq!(
            TaskKind::parse_list("aope, ATE,AOPE").unwrap(),
            vec![TaskKind::Aope, TaskKind::Ate]
        );
        assert!(TaskKind::parse_list("XYZ").is_err());
    }

    #[test]
    fn implicit_term_serde() {
        let quad = AcosQuad {
            aspect: Term::Implicit,
            category: CategoryLabel::new("RESTAURANT#GENERAL"),
            opinion: Term::explicit("great"),
            polarity: Polarity::Positive,
        };
        let json = serde_json::to_string(&quad).unwrap();
        assert_eq!(
            json,
            r#"{"aspect":"IMPLICIT","category":"RESTAURANT#GENERAL","opinion":"great","polarity":"positive"}"#
        );
        assert_eq!(serde_json::from_str::<AcosQuad>(&json).unwrap(), quad);
        assert!(serde_json::from_str::<Term>(r#""""#).is_err());
    }
}
