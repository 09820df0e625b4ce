use std::collections::HashSet;

use rand::Rng;

use super::OracleContext;
use crate::error::{Error, Result};
use crate::parser;
use crate::render::{RenderedExample, Template, EMPTY_MARKER, SUMMARY_SEPARATOR};
use crate::schema::{Polarity, Term, Tuple};
use crate::seed;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OracleMode {
    Gold,
    Corrupt,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OracleConfig {
    pub mode: OracleMode,
    pub drop_prob: f64,
    pub mangle_prob: f64,
    pub seed: u64,
}

impl OracleConfig {
    pub fn gold() -> Self {
        Self {
            mode: OracleMode::Gold,
            drop_prob: 0.0,
            mangle_prob: 0.0,
            seed: 0,
        }
    }

    pub fn corrupt(drop_prob: f64, mangle_prob: f64, seed: u64) -> Self {
        Self {
            mode: OracleMode::Corrupt,
            drop_prob,
            mangle_prob,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, p) in [("drop", self.drop_prob), ("mangle", self.mangle_prob)] {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::Config(format!(
                    "{name} probability {p} outside [0, 1]"
                )));
            }
        }
        Ok(())
    }
}

/// Echoes the gold target.
pub fn gold_oracle(example: &RenderedExample) -> String {
    example.target.clone()
}

/// Drops and mangles gold summaries at random.
///
/// Each example gets its own stream seeded from `(cfg.seed, example id)`.
/// For every summary, in order, two uniform draws in `[0, 1)` are taken:
/// the summary is dropped when the first is below `drop_prob`, otherwise
/// mangled when the second is below `mangle_prob`. Both draws happen for
/// every summary so the stream layout does not depend on the probabilities.
/// A mangled summary never equals a gold summary or an earlier output.
pub fn corrupt_oracle(
    example: &RenderedExample,
    cfg: &OracleConfig,
    ctx: OracleContext<'_>,
) -> String {
    if example.target.trim() == EMPTY_MARKER {
        return EMPTY_MARKER.to_string();
    }
    let template = ctx.templates.template(example.instance.task);
    let mut rng = seed::rng(seed::derive_seed(cfg.seed, &example.instance.id));
    let gold: Vec<&str> = example.target.split(SUMMARY_SEPARATOR).collect();
    let mut avoid: HashSet<String> = gold.iter().map(|s| s.to_string()).collect();
    let mut kept = Vec::new();
    for summary in gold {
        let drop_draw: f64 = rng.random();
        let mangle_draw: f64 = rng.random();
        if drop_draw < cfg.drop_prob {
            continue;
        }
        if mangle_draw < cfg.mangle_prob {
            let mangled = mangle_avoiding(summary, template, ctx, &avoid);
            avoid.insert(mangled.clone());
            kept.push(mangled);
        } else {
            kept.push(summary.to_string());
        }
    }
    if kept.is_empty() {
        EMPTY_MARKER.to_string()
    } else {
        kept.join(SUMMARY_SEPARATOR)
    }
}

/// Rewrites one summary so it no longer states the gold tuple: flips the
/// sentiment when there is one, otherwise moves the category to the next
/// one in the taxonomy, otherwise alters a term.
pub fn mangle_summary(summary: &str, template: &Template, ctx: OracleContext<'_>) -> String {
    mangle_avoiding(summary, template, ctx, &HashSet::new())
}

fn mangle_avoiding(
    summary: &str,
    template: &Template,
    ctx: OracleContext<'_>,
    avoid: &HashSet<String>,
) -> String {
    let parsed = parser::parse(template.task(), template, summary, ctx.taxonomy);
    let Some(tuple) = parsed.tuples.into_iter().next() else {
        return format!("{summary} x");
    };
    candidates(&tuple, ctx)
        .into_iter()
        .map(|t| template.summary(&t))
        .find(|s| s != summary && !avoid.contains(s))
        .unwrap_or_else(|| {
            if tuple.aspect.is_none() && tuple.opinion.is_none() {
                // no free category left and no term to alter
                return format!("{summary} x");
            }
            // every cheap rewrite collides; keep negating a term
            let mut t = tuple;
            loop {
                t = alter_term(t);
                let s = template.summary(&t);
                if !avoid.contains(&s) {
                    break s;
                }
            }
        })
}

/// Rewrites of `tuple` in order of preference.
fn candidates(tuple: &Tuple, ctx: OracleContext<'_>) -> Vec<Tuple> {
    let mut out = Vec::new();
    if let Some(p) = tuple.polarity {
        let flipped = match p {
            Polarity::Positive => Polarity::Negative,
            Polarity::Negative => Polarity::Positive,
            Polarity::Neutral => Polarity::Negative,
        };
        let others = Polarity::ALL
            .into_iter()
            .filter(|&q| q != p && q != flipped);
        for q in std::iter::once(flipped).chain(others) {
            out.push(Tuple {
                polarity: Some(q),
                ..tuple.clone()
            });
        }
    }
    if let Some(c) = &tuple.category {
        let labels = ctx.taxonomy.labels();
        let i = labels.iter().position(|l| l == c).unwrap_or(0);
        for step in 1..labels.len() {
            out.push(Tuple {
                category: Some(labels[(i + step) % labels.len()].clone()),
                ..tuple.clone()
            });
        }
    }
    out.push(alter_term(tuple.clone()));
    out
}

fn alter_term(mut tuple: Tuple) -> Tuple {
    let alter = |t: &Term| match t {
        Term::Implicit => Term::explicit("something"),
        Term::Explicit(s) => Term::Explicit(format!("not {s}")),
    };
    if let Some(a) = &tuple.aspect {
        tuple.aspect = Some(alter(a));
    } else if let Some(o) = &tuple.opinion {
        tuple.opinion = Some(alter(o));
    }
    tuple
}
