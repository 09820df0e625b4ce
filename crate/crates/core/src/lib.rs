//! Multi-task instruction data for aspect-based sentiment analysis.
//!
//! The crate turns ACOS quadruple annotations into instruction-formatted
//! examples for eleven extraction and classification tasks, mixes them into
//! multi-task training sets, drives any text generator through a line
//! protocol, parses the generated summaries back into sentiment tuples and
//! scores them with exact-match micro F1.
//!
//! Pipeline stages map onto modules:
//!
//! | stage | module |
//! | ----- | ------ |
//! | load ACOS files, record I/O | [`io`] |
//! | quads → per-task instances, K-shot | [`derivation`] |
//! | instruction prompt and target text | [`render`] |
//! | multi-task mixtures | [`mixer`] |
//! | model inference | [`gateway`] |
//! | generated text → tuples | [`parser`] |
//! | micro P/R/F1 | [`eval`] |

pub mod derivation;
pub mod error;
pub mod eval;
pub mod gateway;
pub mod io;
pub mod mixer;
pub mod parser;
pub mod render;
pub mod schema;
pub mod seed;

pub use derivation::{
    derive, derive_all, kshot_sample, Given, ShotConfig, TaskDatasets, TaskInstance,
};
pub use error::{Error, Result};
pub use eval::{score_run, score_task, EvalReport, MatchOptions, TaskMetrics};
pub use io::{DatasetManifest, RecordFile, RecordHeader, Split};
pub use parser::{parse, parse_batch, ParseOutcome};
pub use render::{render, render_input, render_target, RenderedExample, Template, TemplateTable};
pub use schema::{
    AcosQuad, CategoryLabel, Element, Polarity, Review, TaskKind, Taxonomy, Term, Tuple,
};
