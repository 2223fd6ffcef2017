//! Reading field-tagged export files into citing records.
//!
//! The accepted input is the plain-text "other reference software" layout:
//! every line starts with a two-letter tag in columns 1-2, the value starts
//! in column 4, continuation lines start with three spaces, records end with
//! `ER` and the file ends with `EF`. See `docs/export-format.md` at the
//! repository root for the byte-level description.

mod reference;
mod tagged;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::{Error, Result, Year};

pub use reference::{apply_rpy_window, parse_reference_string, parse_year};
pub use tagged::{parse_export, parse_export_bytes, read_export_file, write_export};

/// Inclusive year range plus the policy for items that carry no year.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct YearWindow {
    pub lo: Year,
    pub hi: Year,
    pub keep_missing: bool,
}

impl YearWindow {
    pub fn new(lo: Year, hi: Year, keep_missing: bool) -> Result<Self> {
        if lo > hi {
            return Err(Error::invalid(
                "window",
                format!("lower bound {lo} exceeds upper bound {hi}"),
            ));
        }
        Ok(Self {
            lo,
            hi,
            keep_missing,
        })
    }

    pub fn admits(&self, year: Option<Year>) -> bool {
        match year {
            Some(y) => self.lo <= y && y <= self.hi,
            None => self.keep_missing,
        }
    }

    pub fn span(&self) -> usize {
        (self.hi - self.lo) as usize + 1
    }
}

impl fmt::Display for YearWindow {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.lo, self.hi)?;
        if self.keep_missing {
            f.write_str(":keep-missing")?;
        }
        Ok(())
    }
}

/// Parses `LO:HI` or `LO:HI:FLAG`, where FLAG is `keep-missing`, `true` or `false`.
impl FromStr for YearWindow {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.split(':').map(str::trim).collect();
        let year = |p: &str| {
            p.parse::<Year>()
                .map_err(|_| Error::invalid("window", format!("`{p}` is not a year")))
        };
        let keep_missing = match parts.get(2).copied() {
            None | Some("false") => false,
            Some("keep-missing") | Some("true") => true,
            Some(other) => {
                return Err(Error::invalid(
                    "window",
                    format!("unknown flag `{other}` (expected keep-missing, true or false)"),
                ))
            }
        };
        if parts.len() < 2 || parts.len() > 3 {
            return Err(Error::invalid(
                "window",
                format!("`{s}` is not of the form LO:HI[:keep-missing]"),
            ));
        }
        YearWindow::new(year(parts[0])?, year(parts[1])?, keep_missing)
    }
}

/// Import-time filters. `None` windows admit everything.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ImportConfig {
    pub rpy_window: Option<YearWindow>,
    pub py_window: Option<YearWindow>,
    /// Maximum cited references kept per record; 0 keeps all.
    pub max_cr_per_record: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct RecordId(pub String);

impl fmt::Display for RecordId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for RecordId {
    fn from(s: &str) -> Self {
        RecordId(s.to_owned())
    }
}

/// A tag this crate does not interpret, kept so that records survive a
/// write/read cycle unchanged.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaggedField {
    pub tag: String,
    pub lines: Vec<String>,
}

/// One publication of the export file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CitingRecord {
    pub record_id: RecordId,
    pub py: Option<Year>,
    pub source_title: String,
    pub raw_cr_lines: Vec<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub extra_fields: Vec<TaggedField>,
}

/// Fields recovered from one cited-reference string.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct CitedRefFields {
    pub raw: String,
    pub first_author: Option<String>,
    pub rpy: Option<Year>,
    pub source: Option<String>,
    pub volume: Option<String>,
    pub start_page: Option<String>,
    pub doi: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MalformedLine {
    pub line: usize,
    pub reason: String,
}

/// Totals of a parse run. For records,
/// `records_read == records_retained + records_dropped_by_window`; for cited
/// references,
/// `cr_lines_read == cr_lines_retained + cr_lines_dropped_by_window + cr_lines_truncated`.
/// Cited references of a record dropped by the PY window count as dropped by
/// window.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParseReport {
    pub records_read: usize,
    pub records_retained: usize,
    pub records_dropped_by_window: usize,
    pub cr_lines_read: usize,
    pub cr_lines_retained: usize,
    pub cr_lines_dropped_by_window: usize,
    pub cr_lines_truncated: usize,
    pub malformed_lines: Vec<MalformedLine>,
}
