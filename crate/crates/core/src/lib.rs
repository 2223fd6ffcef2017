//! Reference publication year spectroscopy (RPYS) on field-tagged
//! bibliographic exports.
//!
//! The pipeline mirrors how an analyst works through a citation corpus:
//!
//! 1. [`ingest`] reads a tagged export file into [`ingest::CitingRecord`]s and
//!    splits every cited-reference line into author, year, source, volume,
//!    page and DOI.
//! 2. [`store`] aggregates identical reference strings into variants with
//!    their citation counts (NCR) and keeps a replayable operation history.
//! 3. [`disambiguation`] clusters spelling variants of the same work with a
//!    normalized Levenshtein similarity and merges them.
//! 4. [`spectroscopy`] restricts the corpus to papers co-citing marker
//!    papers, bins NCR by reference publication year, computes the deviation
//!    from the 5-year median and reports peak years with their main
//!    contributing references.
//! 5. [`script`] runs the whole pipeline from a small command language.

pub mod disambiguation;
pub mod error;
pub mod ingest;
pub mod script;
pub mod spectroscopy;
pub mod store;

pub use error::{Error, Result};

/// A calendar year as it appears in PY and RPY fields.
pub type Year = i32;
