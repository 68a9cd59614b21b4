//! Revision ingestion, edit diffing, intent labeling, corpus building and
//! evaluation for sentence-level quality signals mined from Wikipedia edits.

pub mod baseline;
pub mod corpus;
pub mod diff;
pub mod dump;
pub mod error;
pub mod eval;
pub mod fetch;
pub mod jsonl;
pub mod reverts;
pub mod rules;
pub mod revision;
pub mod store;
pub mod wikitext;

pub use diff::{align_sentences, diff_pair, diff_revisions, ChangedSentence, EditDiff, LineChange, Segment};
pub use error::{FetchError, ParseError, RevertError, StoreError};
pub use revision::{QualityClass, Revision};
pub use store::Store;
pub use rules::{label_edit, Category, RuleVerdict};
pub use wikitext::Mode;
