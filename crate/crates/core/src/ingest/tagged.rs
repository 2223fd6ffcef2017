use std::collections::HashSet;
use std::fmt::Write as _;
use std::path::Path;

use super::{
    parse_reference_string, parse_year, CitingRecord, ImportConfig, MalformedLine, ParseReport,
    RecordId, TaggedField,
};
use crate::{Error, Result};

const HEADER_TAGS: [&str; 2] = ["FN", "VR"];

enum Line<'a> {
    Blank,
    Continuation(&'a str),
    Tagged(&'a str, &'a str),
    Unrecognized,
}

fn classify(line: &str) -> Line<'_> {
    if line.trim().is_empty() {
        return Line::Blank;
    }
    if let Some(rest) = line.strip_prefix("   ") {
        return Line::Continuation(rest.trim());
    }
    let b = line.as_bytes();
    let tag_char = |c: u8| c.is_ascii_uppercase() || c.is_ascii_digit();
    if b.len() >= 2 && tag_char(b[0]) && tag_char(b[1]) && (b.len() == 2 || b[2] == b' ') {
        let value = if b.len() > 3 { line[3..].trim() } else { "" };
        return Line::Tagged(&line[..2], value);
    }
    Line::Unrecognized
}

struct RecordBuilder {
    start_line: usize,
    fields: Vec<(String, Vec<String>, usize)>,
}

impl RecordBuilder {
    fn push_line(&mut self, line: &str) {
        if let Some((_, lines, _)) = self.fields.last_mut() {
            lines.push(line.to_owned());
        }
    }

    fn finish(self, ordinal: usize, report: &mut ParseReport) -> CitingRecord {
        let mut record = CitingRecord {
            record_id: RecordId(String::new()),
            py: None,
            source_title: String::new(),
            raw_cr_lines: Vec::new(),
            extra_fields: Vec::new(),
        };
        let mut id = None;
        let mut seen_py = false;
        let mut seen_so = false;
        for (tag, lines, line_no) in self.fields {
            match tag.as_str() {
                "UT" if id.is_none() => id = Some(lines.join(" ")),
                "PY" if !seen_py => {
                    seen_py = true;
                    record.py = parse_year(&lines[0]);
                    if record.py.is_none() {
                        report.malformed_lines.push(MalformedLine {
                            line: line_no,
                            reason: format!("unparseable publication year `{}`", lines[0]),
                        });
                    }
                }
                "SO" if !seen_so => {
                    seen_so = true;
                    record.source_title = lines.join(" ");
                }
                "CR" => {
                    for (offset, cr) in lines.into_iter().enumerate() {
                        if cr.is_empty() {
                            report.malformed_lines.push(MalformedLine {
                                line: line_no + offset,
                                reason: "empty cited reference".into(),
                            });
                        } else {
                            record.raw_cr_lines.push(cr);
                        }
                    }
                }
                _ => record.extra_fields.push(TaggedField { tag, lines }),
            }
        }
        record.record_id = RecordId(id.unwrap_or_else(|| format!("record-{ordinal}")));
        record
    }
}

/// Decodes bytes as UTF-8 (invalid sequences become U+FFFD) and parses them.
pub fn parse_export_bytes(
    input: &[u8],
    cfg: &ImportConfig,
) -> Result<(Vec<CitingRecord>, ParseReport)> {
    parse_export(&String::from_utf8_lossy(input), cfg)
}

pub fn read_export_file(
    path: impl AsRef<Path>,
    cfg: &ImportConfig,
) -> Result<(Vec<CitingRecord>, ParseReport)> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    parse_export_bytes(&bytes, cfg)
}

/// Parses a tagged export and applies the PY window, the per-record CR cap
/// and the RPY window, in that order.
///
/// Unknown tags are kept on the record but otherwise ignored. Lines that fit
/// no part of the grammar are listed in the report rather than failing the
/// parse.
pub fn parse_export(input: &str, cfg: &ImportConfig) -> Result<(Vec<CitingRecord>, ParseReport)> {
    let input = input.strip_prefix('\u{feff}').unwrap_or(input);
    let mut report = ParseReport::default();
    let mut records = Vec::new();
    let mut ids = HashSet::new();
    let mut seen_header = false;
    let mut current: Option<RecordBuilder> = None;
    let mut last_line = 0;

    for (idx, line) in input.lines().enumerate() {
        let line_no = idx + 1;
        last_line = line_no;
        let kind = classify(line);
        if !seen_header {
            match kind {
                Line::Blank => continue,
                Line::Tagged("FN", _) => {
                    seen_header = true;
                    continue;
                }
                _ => return Err(Error::MissingHeader),
            }
        }
        match kind {
            Line::Blank => {}
            Line::Unrecognized => report.malformed_lines.push(MalformedLine {
                line: line_no,
                reason: "line is neither tagged nor a continuation".into(),
            }),
            Line::Continuation(value) => match current.as_mut() {
                Some(rec) if !rec.fields.is_empty() => rec.push_line(value),
                _ => report.malformed_lines.push(MalformedLine {
                    line: line_no,
                    reason: "continuation line outside a record field".into(),
                }),
            },
            Line::Tagged(tag, value) => match (current.take(), tag) {
                (None, "EF") => {
                    current = None;
                    break;
                }
                (None, "ER") => report.malformed_lines.push(MalformedLine {
                    line: line_no,
                    reason: "end-of-record tag outside a record".into(),
                }),
                (None, t) if HEADER_TAGS.contains(&t) => {}
                (None, t) => {
                    current = Some(RecordBuilder {
                        start_line: line_no,
                        fields: vec![(t.to_owned(), vec![value.to_owned()], line_no)],
                    });
                }
                (Some(rec), "EF") => {
                    return Err(Error::TruncatedRecord {
                        start_line: rec.start_line,
                        line: line_no,
                    })
                }
                (Some(rec), "ER") => {
                    let start_line = rec.start_line;
                    report.records_read += 1;
                    let record = rec.finish(report.records_read, &mut report);
                    if !ids.insert(record.record_id.clone()) {
                        return Err(Error::DuplicateRecord {
                            id: record.record_id.0,
                            line: start_line,
                        });
                    }
                    if let Some(r) = admit(record, cfg, &mut report) {
                        records.push(r);
                    }
                }
                (Some(mut rec), t) => {
                    rec.fields
                        .push((t.to_owned(), vec![value.to_owned()], line_no));
                    current = Some(rec);
                }
            },
        }
    }
    if !seen_header {
        return Err(Error::MissingHeader);
    }
    if let Some(rec) = current {
        return Err(Error::TruncatedRecord {
            start_line: rec.start_line,
            line: last_line,
        });
    }
    Ok((records, report))
}

fn admit(
    mut record: CitingRecord,
    cfg: &ImportConfig,
    report: &mut ParseReport,
) -> Option<CitingRecord> {
    let n = record.raw_cr_lines.len();
    report.cr_lines_read += n;
    if let Some(w) = cfg.py_window {
        if !w.admits(record.py) {
            report.records_dropped_by_window += 1;
            report.cr_lines_dropped_by_window += n;
            return None;
        }
    }
    if cfg.max_cr_per_record > 0 && n > cfg.max_cr_per_record {
        report.cr_lines_truncated += n - cfg.max_cr_per_record;
        record.raw_cr_lines.truncate(cfg.max_cr_per_record);
    }
    if let Some(w) = cfg.rpy_window {
        let before = record.raw_cr_lines.len();
        record
            .raw_cr_lines
            .retain(|cr| w.admits(parse_reference_string(cr).rpy));
        report.cr_lines_dropped_by_window += before - record.raw_cr_lines.len();
    }
    report.records_retained += 1;
    report.cr_lines_retained += record.raw_cr_lines.len();
    Some(record)
}

/// Writes records back in the tagged layout. Within each record the
/// uninterpreted fields come first (in their original order), then `SO`,
/// `CR`, `PY` and `UT`.
pub fn write_export(records: &[CitingRecord]) -> String {
    let mut out = String::from("FN Clarivate Analytics Web of Science\nVR 1.0\n");
    for r in records {
        for field in &r.extra_fields {
            write_field(&mut out, &field.tag, &field.lines);
        }
        if !r.source_title.is_empty() {
            write_field(&mut out, "SO", std::slice::from_ref(&r.source_title));
        }
        if !r.raw_cr_lines.is_empty() {
            write_field(&mut out, "CR", &r.raw_cr_lines);
        }
        if let Some(py) = r.py {
            let _ = writeln!(out, "PY {py}");
        }
        let _ = writeln!(out, "UT {}", r.record_id);
        out.push_str("ER\n\n");
    }
    out.push_str("EF\n");
    out
}

fn write_field(out: &mut String, tag: &str, lines: &[String]) {
    for (i, line) in lines.iter().enumerate() {
        let prefix = if i == 0 { tag } else { "  " };
        if line.is_empty() {
            let _ = writeln!(out, "{prefix}");
        } else {
            let _ = writeln!(out, "{prefix} {line}");
        }
    }
}
