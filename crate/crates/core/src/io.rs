//! Loading ACOS tab-separated source files and reading/writing the
//! line-delimited JSON record files every stage exchanges.
//!
//! A record file starts with one header line carrying the dataset name,
//! split and category taxonomy, followed by one record per line.

use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;
use std::str::FromStr;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::schema::{AcosQuad, CategoryLabel, Polarity, Review, Taxonomy, Term};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Dev,
    Test,
}

impl Split {
    pub const ALL: [Split; 3] = [Split::Train, Split::Dev, Split::Test];

    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Dev => "dev",
            Split::Test => "test",
        }
    }
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Split {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "train" => Ok(Split::Train),
            "dev" | "valid" | "validation" => Ok(Split::Dev),
            "test" => Ok(Split::Test),
            _ => Err(Error::Config(format!("unknown split {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DatasetManifest {
    pub name: String,
    pub split: Split,
    pub taxonomy: Taxonomy,
    pub reviews: Vec<Review>,
}

impl DatasetManifest {
    pub fn quad_count(&self) -> usize {
        self.reviews.iter().map(|r| r.quads.len()).sum()
    }

    pub fn header(&self) -> RecordHeader {
        RecordHeader {
            name: self.name.clone(),
            split: self.split,
            taxonomy: self.taxonomy.clone(),
        }
    }

    /// Checks that quads are non-empty, categories belong to the taxonomy
    /// and explicit terms occur verbatim in the review text.
    pub fn validate(&self) -> Result<()> {
        for (i, review) in self.reviews.iter().enumerate() {
            check_review(review, &self.taxonomy).map_err(|reason| Error::SchemaViolation {
                line: i + 2,
                reason,
            })?;
        }
        Ok(())
    }
}

fn check_review(review: &Review, taxonomy: &Taxonomy) -> std::result::Result<(), String> {
    if review.quads.is_empty() {
        return Err(format!("review {} has no quads", review.id));
    }
    for quad in &review.quads {
        if !taxonomy.contains(&quad.category) {
            return Err(format!(
                "review {}: category {} not in taxonomy",
                review.id, quad.category
            ));
        }
        for term in [&quad.aspect, &quad.opinion] {
            if let Term::Explicit(s) = term {
                if s.trim().is_empty() || !review.text.contains(s.as_str()) {
                    return Err(format!(
                        "review {}: term {s:?} is not a span of the text",
                        review.id
                    ));
                }
            }
        }
    }
    Ok(())
}

/// How categories are collected while loading source files.
#[derive(Debug, Clone, Default)]
pub enum TaxonomyMode {
    /// Collect categories in order of first appearance.
    #[default]
    Infer,
    /// Every category must belong to this list. Numeric category columns
    /// index into it.
    Fixed(Taxonomy),
}

#[derive(Debug, Clone)]
pub struct AcosLoadOptions {
    pub taxonomy: TaxonomyMode,
    /// Treat the end of each token span as inclusive.
    pub inclusive_span_end: bool,
    /// Polarity for sentiment index 0, 1 and 2.
    pub sentiment_order: [Polarity; 3],
}

impl Default for AcosLoadOptions {
    fn default() -> Self {
        Self {
            taxonomy: TaxonomyMode::Infer,
            inclusive_span_end: false,
            sentiment_order: [Polarity::Negative, Polarity::Neutral, Polarity::Positive],
        }
    }
}

/// Reads an ACOS quad file: `sentence<TAB>quad<TAB>quad...` where each quad
/// is `i,j CATEGORY sentiment k,l` over whitespace tokens and `-1,-1` marks
/// an implicit term.
pub fn load_acos_tsv(
    path: impl AsRef<Path>,
    name: &str,
    split: Split,
    opts: &AcosLoadOptions,
) -> Result<DatasetManifest> {
    let path = path.as_ref();
    let mut content = String::new();
    File::open(path)
        .and_then(|mut f| f.read_to_string(&mut content))
        .map_err(|e| Error::io(path, e))?;
    parse_acos(&content, name, split, opts)
}

pub fn parse_acos(
    content: &str,
    name: &str,
    split: Split,
    opts: &AcosLoadOptions,
) -> Result<DatasetManifest> {
    let mut taxonomy = match &opts.taxonomy {
        TaxonomyMode::Infer => Taxonomy::default(),
        TaxonomyMode::Fixed(t) => t.clone(),
    };
    let mut reviews = Vec::new();
    for (i, raw) in content.lines().enumerate() {
        let line_no = i + 1;
        if raw.trim().is_empty() {
            continue;
        }
        let mut fields = raw.split('\t');
        let text = fields.next().unwrap_or_default().trim().to_string();
        let groups: Vec<&str> = fields.filter(|g| !g.trim().is_empty()).collect();
        if text.is_empty() || groups.is_empty() {
            return Err(Error::MalformedLine {
                line: line_no,
                reason: "expected a sentence followed by at least one quad".into(),
            });
        }
        let tokens: Vec<&str> = text.split_whitespace().collect();
        let mut quads = Vec::with_capacity(groups.len());
        for group in groups {
            quads.push(parse_quad(group, &tokens, &mut taxonomy, opts, line_no)?);
        }
        reviews.push(Review {
            id: format!("{split}-{}", reviews.len()),
            text,
            quads,
        });
    }
    Ok(DatasetManifest {
        name: name.to_string(),
        split,
        taxonomy,
        reviews,
    })
}

fn parse_quad(
    group: &str,
    tokens: &[&str],
    taxonomy: &mut Taxonomy,
    opts: &AcosLoadOptions,
    line: usize,
) -> Result<AcosQuad> {
    let parts: Vec<&str> = group.split_whitespace().collect();
    let [aspect, category, sentiment, opinion] = parts.as_slice() else {
        return Err(Error::MalformedLine {
            line,
            reason: format!("quad {group:?} must have 4 fields, found {}", parts.len()),
        });
    };
    let category = resolve_category(category, taxonomy, opts)?;
    let polarity = sentiment
        .parse::<usize>()
        .ok()
        .and_then(|i| opts.sentiment_order.get(i).copied())
        .ok_or_else(|| Error::UnknownSentimentIndex {
            line,
            value: sentiment.to_string(),
        })?;
    Ok(AcosQuad {
        aspect: resolve_span(aspect, tokens, opts.inclusive_span_end, line)?,
        category,
        opinion: resolve_span(opinion, tokens, opts.inclusive_span_end, line)?,
        polarity,
    })
}

fn resolve_category(
    raw: &str,
    taxonomy: &mut Taxonomy,
    opts: &AcosLoadOptions,
) -> Result<CategoryLabel> {
    match &opts.taxonomy {
        TaxonomyMode::Fixed(_) => {
            if let Ok(index) = raw.parse::<usize>() {
                return taxonomy
                    .get(index)
                    .cloned()
                    .ok_or_else(|| Error::UnknownCategory(raw.to_string()));
            }
            taxonomy.resolve(raw).cloned()
        }
        TaxonomyMode::Infer => {
            if raw.parse::<usize>().is_ok() {
                // numeric columns need a fixed taxonomy to index into
                return Err(Error::UnknownCategory(raw.to_string()));
            }
            let label = CategoryLabel::new(raw);
            taxonomy.insert(label.clone())?;
            Ok(label)
        }
    }
}

fn resolve_span(raw: &str, tokens: &[&str], inclusive: bool, line: usize) -> Result<Term> {
    let out_of_range = || Error::SpanOutOfRange {
        line,
        span: raw.to_string(),
        tokens: tokens.len(),
    };
    let (start, end) = raw.split_once(',').ok_or_else(|| Error::MalformedLine {
        line,
        reason: format!("span {raw:?} is not of the form i,j"),
    })?;
    let start: i64 = start.trim().parse().map_err(|_| out_of_range())?;
    let end: i64 = end.trim().parse().map_err(|_| out_of_range())?;
    if start == -1 && end == -1 {
        return Ok(Term::Implicit);
    }
    let end = if inclusive { end + 1 } else { end };
    if start < 0 || end <= start || end as usize > tokens.len() {
        return Err(out_of_range());
    }
    Ok(Term::Explicit(
        tokens[start as usize..end as usize].join(" "),
    ))
}

/// Reads a category list, one canonical identifier per line; `#` at the
/// start of a line begins a comment.
pub fn read_taxonomy(path: impl AsRef<Path>) -> Result<Taxonomy> {
    let path = path.as_ref();
    let content = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_taxonomy(&content)
}

pub fn parse_taxonomy(content: &str) -> Result<Taxonomy> {
    Taxonomy::new(
        content
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty() && !l.starts_with('#'))
            .map(CategoryLabel::new),
    )
}

/// Gives every manifest the union of their taxonomies, in order of first
/// appearance across the slice.
pub fn unify_taxonomies(manifests: &mut [DatasetManifest]) -> Result<()> {
    let mut union = Taxonomy::default();
    for m in manifests.iter() {
        for label in m.taxonomy.labels() {
            union.insert(label.clone())?;
        }
    }
    for m in manifests.iter_mut() {
        m.taxonomy = union.clone();
    }
    Ok(())
}

/// First line of every record file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RecordHeader {
    pub name: String,
    pub split: Split,
    pub taxonomy: Taxonomy,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RecordFile<T> {
    pub header: RecordHeader,
    pub records: Vec<T>,
}

impl<T> RecordFile<T> {
    pub fn new(header: RecordHeader, records: Vec<T>) -> Self {
        Self { header, records }
    }
}

impl<T: Serialize> RecordFile<T> {
    pub fn write_to<W: Write>(&self, mut w: W) -> Result<()> {
        let to_io = |e: serde_json::Error| std::io::Error::other(e);
        let mut write = || -> std::io::Result<()> {
            serde_json::to_writer(&mut w, &self.header).map_err(to_io)?;
            w.write_all(b"\n")?;
            for record in &self.records {
                serde_json::to_writer(&mut w, record).map_err(to_io)?;
                w.write_all(b"\n")?;
            }
            w.flush()
        };
        write().map_err(|e| Error::io("<writer>", e))
    }

    pub fn write_path(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
            std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
        }
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_to(BufWriter::new(file)).map_err(|e| match e {
            Error::Io { source, .. } => Error::io(path, source),
            other => other,
        })
    }
}

impl<T: DeserializeOwned> RecordFile<T> {
    pub fn read_from<R: BufRead>(r: R) -> Result<Self> {
        let mut header = None;
        let mut records = Vec::new();
        for (i, line) in r.lines().enumerate() {
            let line_no = i + 1;
            let line = line.map_err(|e| Error::io("<reader>", e))?;
            if line.trim().is_empty() {
                continue;
            }
            let violation = |e: serde_json::Error| Error::SchemaViolation {
                line: line_no,
                reason: e.to_string(),
            };
            if header.is_none() {
                header = Some(serde_json::from_str(&line).map_err(violation)?);
            } else {
                records.push(serde_json::from_str(&line).map_err(violation)?);
            }
        }
        let header = header.ok_or_else(|| Error::SchemaViolation {
            line: 1,
            reason: "missing header record".into(),
        })?;
        Ok(Self { header, records })
    }

    pub fn read_path(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        Self::read_from(BufReader::new(file)).map_err(|e| match e {
            Error::Io { source, .. } => Error::io(path, source),
            other => other,
        })
    }
}

pub fn write_records<W: Write>(manifest: &DatasetManifest, w: W) -> Result<()> {
    RecordFile::new(manifest.header(), manifest.reviews.clone()).write_to(w)
}

pub fn read_records<R: BufRead>(r: R) -> Result<DatasetManifest> {
    manifest_from_file(RecordFile::<Review>::read_from(r)?)
}

pub fn write_records_path(manifest: &DatasetManifest, path: impl AsRef<Path>) -> Result<()> {
    RecordFile::new(manifest.header(), manifest.reviews.clone()).write_path(path)
}

pub fn read_records_path(path: impl AsRef<Path>) -> Result<DatasetManifest> {
    manifest_from_file(RecordFile::<Review>::read_path(path)?)
}

fn manifest_from_file(file: RecordFile<Review>) -> Result<DatasetManifest> {
    let manifest = DatasetManifest {
        name: file.header.name,
        split: file.header.split,
        taxonomy: file.header.taxonomy,
        reviews: file.records,
    };
    manifest.validate()?;
    Ok(manifest)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::schema::Polarity;

    fn load(content: &str) -> Result<DatasetManifest> {
        parse_acos(content, "rest", Split::Train, &AcosLoadOptions::default())
    }

    #[test]
    fn sushi_line() {
        let m = load("The sushi is delicious .\t1,2 FOOD#QUALITY 2 3,4\n").unwrap();
        assert_eq!(m.reviews.len(), 1);
        let r = &m.reviews[0];
        assert_eq!(r.text, "The sushi is delicious .");
        assert_eq!(
            r.quads,
            vec![AcosQuad {
                aspect: Term::explicit("sushi"),
                category: CategoryLabel::new("FOOD#QUALITY"),
                opinion: Term::explicit("delicious"),
                polarity: Polarity::Positive,
            }]
        );
        assert_eq!(m.taxonomy.labels(), &[CategoryLabel::new("FOOD#QUALITY")]);
    }

    #[test]
    fn implicit_spans() {
        let m = load("Would not recommend .\t-1,-1 RESTAURANT#GENERAL 0 -1,-1").unwrap();
        let q = &m.reviews[0].quads[0];
        assert_eq!(q.aspect, Term::Implicit);
        assert_eq!(q.opinion, Term::Implicit);
        assert_eq!(q.polarity, Polarity::Negative);
    }

    #[test]
    fn malformed_lines() {
        assert!(matches!(
            load("text only, no tab"),
            Err(Error::MalformedLine { line: 1, .. })
        ));
        assert!(matches!(
            load("a b\t0,1 FOOD#QUALITY 2"),
            Err(Error::MalformedLine { .. })
        ));
        assert!(matches!(
            load("a b\t0,3 FOOD#QUALITY 2 1,2"),
            Err(Error::SpanOutOfRange { .. })
        ));
        assert!(matches!(
            load("a b\t0,1 FOOD#QUALITY 7 1,2"),
            Err(Error::UnknownSentimentIndex { .. })
        ));
        assert!(matches!(
            load("a b\t-2,1 FOOD#QUALITY 1 1,2"),
            Err(Error::SpanOutOfRange { .. })
        ));
    }

    #[test]
    fn fixed_taxonomy_and_numeric_categories() {
        let taxonomy = Taxonomy::new([
            CategoryLabel::new("FOOD#QUALITY"),
            CategoryLabel::new("SERVICE#GENERAL"),
        ])
        .unwrap();
        let opts = AcosLoadOptions {
            taxonomy: TaxonomyMode::Fixed(taxonomy),
            ..Default::default()
        };
        let m = parse_acos("slow staff\t1,2 1 0 0,1", "r", Split::Dev, &opts).unwrap();
        assert_eq!(
            m.reviews[0].quads[0].category.canonical(),
            "SERVICE#GENERAL"
        );
        assert!(matches!(
            parse_acos(
                "slow staff\t1,2 DRINKS#PRICES 0 0,1",
                "r",
                Split::Dev,
                &opts
            ),
            Err(Error::UnknownCategory(_))
        ));
        assert!(matches!(
            load("slow staff\t1,2 1 0 0,1"),
            Err(Error::UnknownCategory(_))
        ));
    }

    #[test]
    fn inclusive_span_switch() {
        let opts = AcosLoadOptions {
            inclusive_span_end: true,
            ..Default::default()
        };
        let m = parse_acos(
            "The kafta plate was perfect .\t1,2 FOOD#QUALITY 2 4,4",
            "r",
            Split::Train,
            &opts,
        )
        .unwrap();
        assert_eq!(m.reviews[0].quads[0].aspect, Term::explicit("kafta plate"));
        assert_eq!(m.reviews[0].quads[0].opinion, Term::explicit("perfect"));
    }

    #[test]
    fn taxonomy_files_and_union() {
        let t = parse_taxonomy("# restaurant\nFOOD#QUALITY\n\nSERVICE#GENERAL\n").unwrap();
        assert_eq!(t.len(), 2);
        let mut ms = vec![
            load("a b\t0,1 FOOD#QUALITY 2 1,2").unwrap(),
            load("a b\t0,1 SERVICE#GENERAL 2 1,2\na b\t0,1 FOOD#QUALITY 2 1,2").unwrap(),
        ];
        unify_taxonomies(&mut ms).unwrap();
        assert_eq!(ms[0].taxonomy, ms[1].taxonomy);
        assert_eq!(ms[1].taxonomy.labels()[0].canonical(), "FOOD#QUALITY");
    }

    #[test]
    fn records_missing_text_are_rejected() {
        let file = concat!(
            r#"{"name":"r","split":"train","taxonomy":["FOOD#QUALITY"]}"#,
            "\n",
            r#"{"id":"x","quads":[]}"#,
            "\n"
        );
        match read_records(file.as_bytes()) {
            Err(Error::SchemaViolation { line, reason }) => {
                assert_eq!(line, 2);
                assert!(reason.contains("text"), "{reason}");
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn records_with_foreign_terms_are_rejected() {
        let file = concat!(
            r#"{"name":"r","split":"train","taxonomy":["FOOD#QUALITY"]}"#,
            "\n",
            r#"{"id":"x","text":"good soup","quads":[{"aspect":"bread","category":"FOOD#QUALITY","opinion":"good","polarity":"positive"}]}"#,
            "\n"
        );
        assert!(matches!(
            read_records(file.as_bytes()),
            Err(Error::SchemaViolation { line: 2, .. })
        ));
    }
}
