//! Recovering predicted tuples from generated text by matching each summary
//! sentence against the task template.
//!
//! Summaries are split on `[SSEP]`. Within a summary, template literals are
//! anchored left to right; each placeholder captures the text up to the next
//! literal occurrence, shortest capture first, backtracking to the next
//! occurrence when a later literal or a vocabulary lookup fails. Literals
//! match ASCII case-insensitively and any run of whitespace in a literal
//! matches one or more whitespace characters. Captured terms are trimmed but
//! otherwise kept verbatim.
//!
//! Malformed summaries never abort parsing: they are recorded as failures
//! and contribute no tuple.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::render::{Segment, Template, EMPTY_MARKER, IMPLICIT_ASPECT, IMPLICIT_OPINION};
use crate::schema::{Element, Polarity, TaskKind, Taxonomy, Term, Tuple};

/// Upper bound on literal match attempts per summary.
const SEARCH_BUDGET: usize = 200_000;

const SEPARATOR_TOKEN: &str = "[SSEP]";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FailureReason {
    EmptySummary,
    TemplateMismatch,
    UnknownLabelWord(String),
    UnknownCategory(String),
    SearchLimit,
}

impl fmt::Display for FailureReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FailureReason::EmptySummary => f.write_str("empty summary"),
            FailureReason::TemplateMismatch => f.write_str("does not match the template"),
            FailureReason::UnknownLabelWord(w) => write!(f, "unknown sentiment word {w:?}"),
            FailureReason::UnknownCategory(c) => write!(f, "unknown category {c:?}"),
            FailureReason::SearchLimit => f.write_str("search limit exceeded"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParseFailure {
    pub summary: String,
    pub reason: FailureReason,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParseOutcome {
    pub tuples: Vec<Tuple>,
    pub failures: Vec<ParseFailure>,
}

/// Parses generated `text` for `task` with the template used at render time.
pub fn parse(task: TaskKind, template: &Template, text: &str, taxonomy: &Taxonomy) -> ParseOutcome {
    debug_assert_eq!(task, template.task());
    let text = text.trim();
    let mut outcome = ParseOutcome::default();
    if text.eq_ignore_ascii_case(EMPTY_MARKER) {
        return outcome;
    }
    let pattern = CompiledTemplate::new(template);
    for summary in split_summaries(text) {
        let summary = summary.trim();
        let result = if summary.is_empty() {
            Err(FailureReason::EmptySummary)
        } else {
            pattern.match_summary(summary, taxonomy)
        };
        match result {
            Ok(tuple) => {
                if !outcome.tuples.contains(&tuple) {
                    outcome.tuples.push(tuple);
                }
            }
            Err(reason) => outcome.failures.push(ParseFailure {
                summary: summary.to_string(),
                reason,
            }),
        }
    }
    outcome
}

/// Element-wise [`parse`], order preserved.
pub fn parse_batch<S: AsRef<str>>(
    task: TaskKind,
    template: &Template,
    outputs: &[S],
    taxonomy: &Taxonomy,
) -> Vec<ParseOutcome> {
    outputs
        .iter()
        .map(|o| parse(task, template, o.as_ref(), taxonomy))
        .collect()
}

fn split_summaries(text: &str) -> Vec<&str> {
    let mut parts = Vec::new();
    let mut start = 0;
    let mut i = 0;
    let bytes = text.as_bytes();
    let sep = SEPARATOR_TOKEN.as_bytes();
    while i + sep.len() <= bytes.len() {
        if bytes[i..i + sep.len()].eq_ignore_ascii_case(sep) {
            parts.push(&text[start..i]);
            i += sep.len();
            start = i;
        } else {
            i += 1;
        }
    }
    parts.push(&text[start..]);
    parts
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Piece {
    Space,
    Char(char),
}

#[derive(Debug)]
enum Compiled {
    Literal(Vec<Piece>),
    Slot(Element),
}

struct CompiledTemplate {
    segments: Vec<Compiled>,
}

impl CompiledTemplate {
    fn new(template: &Template) -> Self {
        let segments = template
            .segments()
            .iter()
            .map(|s| match s {
                Segment::Slot(e) => Compiled::Slot(*e),
                Segment::Literal(lit) => {
                    let mut pieces = Vec::new();
                    for ch in lit.chars() {
                        if ch.is_whitespace() {
                            if pieces.last() != Some(&Piece::Space) {
                                pieces.push(Piece::Space);
                            }
                        } else {
                            pieces.push(Piece::Char(ch));
                        }
                    }
                    Compiled::Literal(pieces)
                }
            })
            .collect();
        Self { segments }
    }

    fn match_summary(&self, summary: &str, taxonomy: &Taxonomy) -> Result<Tuple, FailureReason> {
        let mut search = Search {
            text: summary,
            segments: &self.segments,
            taxonomy,
            budget: SEARCH_BUDGET,
            found: None,
            first_error: None,
        };
        let mut captures = Vec::with_capacity(4);
        search.walk(0, 0, &mut captures);
        if let Some(tuple) = search.found {
            return Ok(tuple);
        }
        if search.budget == 0 {
            return Err(FailureReason::SearchLimit);
        }
        Err(search
            .first_error
            .unwrap_or(FailureReason::TemplateMismatch))
    }
}

struct Search<'a> {
    text: &'a str,
    segments: &'a [Compiled],
    taxonomy: &'a Taxonomy,
    budget: usize,
    found: Option<Tuple>,
    first_error: Option<FailureReason>,
}

impl<'a> Search<'a> {
    /// Returns true once the search should stop (match found or budget spent).
    fn walk(&mut self, idx: usize, pos: usize, captures: &mut Vec<(Element, &'a str)>) -> bool {
        let text = self.text;
        let Some(segment) = self.segments.get(idx) else {
            return pos == text.len() && self.accept(captures);
        };
        match segment {
            Compiled::Literal(pieces) => match self.match_literal(pieces, pos) {
                Some(end) => self.walk(idx + 1, end, captures),
                None => self.budget == 0,
            },
            Compiled::Slot(element) => {
                let element = *element;
                let next = match self.segments.get(idx + 1) {
                    None => {
                        let capture = text[pos..].trim();
                        if capture.is_empty() {
                            return false;
                        }
                        captures.push((element, capture));
                        let done = self.walk(idx + 1, text.len(), captures);
                        captures.pop();
                        return done;
                    }
                    Some(Compiled::Literal(pieces)) => pieces,
                    Some(Compiled::Slot(_)) => unreachable!("templates separate placeholders"),
                };
                let starts = text[pos..].char_indices().skip(1).map(|(i, _)| pos + i);
                for start in starts {
                    if self.budget == 0 {
                        return true;
                    }
                    let Some(end) = self.match_literal(next, start) else {
                        continue;
                    };
                    let capture = text[pos..start].trim();
                    if capture.is_empty() {
                        continue;
                    }
                    captures.push((element, capture));
                    let done = self.walk(idx + 2, end, captures);
                    captures.pop();
                    if done {
                        return true;
                    }
                }
                false
            }
        }
    }

    fn match_literal(&mut self, pieces: &[Piece], at: usize) -> Option<usize> {
        if self.budget == 0 {
            return None;
        }
        self.budget -= 1;
        let mut chars = self.text[at..].char_indices().peekable();
        for piece in pieces {
            match piece {
                Piece::Space => {
                    let mut seen = false;
                    while let Some((_, c)) = chars.peek() {
                        if !c.is_whitespace() {
                            break;
                        }
                        seen = true;
                        chars.next();
                    }
                    if !seen {
                        return None;
                    }
                }
                Piece::Char(want) => match chars.next() {
                    Some((_, c)) if c.eq_ignore_ascii_case(want) => {}
                    _ => return None,
                },
            }
        }
        Some(chars.peek().map_or(self.text.len(), |(i, _)| at + i))
    }

    fn accept(&mut self, captures: &[(Element, &str)]) -> bool {
        match build_tuple(captures, self.taxonomy) {
            Ok(tuple) => {
                self.found = Some(tuple);
                true
            }
            Err(reason) => {
                self.first_error.get_or_insert(reason);
                false
            }
        }
    }
}

fn build_tuple(captures: &[(Element, &str)], taxonomy: &Taxonomy) -> Result<Tuple, FailureReason> {
    let mut tuple = Tuple::default();
    for &(element, capture) in captures {
        match element {
            Element::Aspect => tuple.aspect = Some(term(capture, IMPLICIT_ASPECT)),
            Element::Opinion => tuple.opinion = Some(term(capture, IMPLICIT_OPINION)),
            Element::Sentiment => {
                tuple.polarity = Some(
                    Polarity::from_label_word(capture)
                        .map_err(|_| FailureReason::UnknownLabelWord(capture.to_string()))?,
                )
            }
            Element::Category => {
                tuple.category = Some(
                    taxonomy
                        .from_surface(capture)
                        .map_err(|_| FailureReason::UnknownCategory(capture.to_string()))?
                        .clone(),
                )
            }
        }
    }
    Ok(tuple)
}

fn term(capture: &str, implicit: &str) -> Term {
    if capture == implicit {
        Term::Implicit
    } else {
        Term::Explicit(capture.to_string())
    }
}
