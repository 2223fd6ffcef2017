use super::{CitedRefFields, ImportConfig};
use crate::Year;

/// Four ASCII digits within 1000..=2999.
pub fn parse_year(s: &str) -> Option<Year> {
    let s = s.trim();
    if s.len() != 4 || !s.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    let y: Year = s.parse().ok()?;
    (1000..=2999).contains(&y).then_some(y)
}

/// Splits a cited-reference line such as
/// `Liu BYH, 1960, SOLAR ENERGY, V4, P1, DOI 10.1016/0038-092X(60)90062-1`
/// into its fields.
///
/// Segments are comma separated. The first segment is the author unless it
/// is itself a year; the first year-shaped segment is the RPY and the one
/// right after it the source. `V…` and `P…` segments containing a digit give
/// volume and start page, `DOI …` the lower-cased DOI. Anything else is
/// ignored. Never fails, and `raw` is kept verbatim.
pub fn parse_reference_string(raw: &str) -> CitedRefFields {
    let mut fields = CitedRefFields {
        raw: raw.to_owned(),
        ..Default::default()
    };
    let segments: Vec<&str> = raw.split(',').map(str::trim).collect();

    let mut year_idx = None;
    if let Some(first) = segments.first() {
        if let Some(y) = parse_year(first) {
            fields.rpy = Some(y);
            year_idx = Some(0);
        } else if !first.is_empty() {
            fields.first_author = Some((*first).to_owned());
        }
    }
    if year_idx.is_none() {
        year_idx = segments
            .iter()
            .enumerate()
            .skip(1)
            .find(|(_, s)| parse_year(s).is_some())
            .map(|(i, _)| i);
        fields.rpy = year_idx.and_then(|i| parse_year(segments[i]));
    }

    for (i, seg) in segments.iter().enumerate().skip(1) {
        if Some(i) == year_idx || seg.is_empty() {
            continue;
        }
        if let Some(doi) = doi_segment(seg) {
            fields.doi.get_or_insert(doi);
            continue;
        }
        let volume = prefixed_token(seg, 'V');
        let page = prefixed_token(seg, 'P');
        let after_year = year_idx.is_some_and(|y| i == y + 1);
        if after_year && volume.is_none() && page.is_none() {
            fields.source = Some((*seg).to_owned());
        } else if let Some(v) = volume {
            fields.volume.get_or_insert_with(|| v.to_owned());
        } else if let Some(p) = page {
            fields.start_page.get_or_insert_with(|| p.to_owned());
        }
    }
    fields
}

/// `V4`, `VB14`, `P121`: the marker letter followed by a single token that
/// contains at least one digit.
fn prefixed_token(seg: &str, marker: char) -> Option<&str> {
    let rest = seg.strip_prefix(marker)?;
    let ok = !rest.is_empty()
        && !rest.chars().any(char::is_whitespace)
        && rest.chars().any(|c| c.is_ascii_digit());
    ok.then_some(rest)
}

fn doi_segment(seg: &str) -> Option<String> {
    if seg.len() < 4 || !seg.is_char_boundary(3) || !seg[..3].eq_ignore_ascii_case("doi") {
        return None;
    }
    let rest = &seg[3..];
    let rest = rest
        .strip_prefix(':')
        .or_else(|| rest.starts_with(char::is_whitespace).then_some(rest))?;
    let doi = rest
        .trim()
        .trim_start_matches('[')
        .trim_end_matches(']')
        .trim()
        .to_lowercase();
    (!doi.is_empty()).then_some(doi)
}

/// Keeps references whose RPY lies in the configured window, and those
/// without a year when the window says to keep them.
pub fn apply_rpy_window(refs: Vec<CitedRefFields>, cfg: &ImportConfig) -> Vec<CitedRefFields> {
    match cfg.rpy_window {
        None => refs,
        Some(w) => refs.into_iter().filter(|r| w.admits(r.rpy)).collect(),
    }
}
