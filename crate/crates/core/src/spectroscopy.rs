//! Co-citation filtering, the RPYS spectrogram and peak inspection.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::ingest::{parse_reference_string, CitedRefFields, RecordId};
use crate::store::{Operation, ReferenceVariant, VariantId, Workspace};
use crate::{Error, Result, Year};

/// Identifies a marker paper among cited references. Every field that is
/// present must match; the year always must.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MarkerSpec {
    pub first_author_prefix: Option<String>,
    pub rpy: Year,
    pub volume: Option<String>,
    pub start_page: Option<String>,
    pub doi: Option<String>,
}

impl MarkerSpec {
    pub fn validate(&self) -> Result<()> {
        let blank = |s: &Option<String>| s.as_deref().is_none_or(|s| s.trim().is_empty());
        if blank(&self.first_author_prefix) && blank(&self.doi) {
            return Err(Error::invalid(
                "marker",
                "a marker needs an author prefix or a DOI besides the year",
            ));
        }
        Ok(())
    }
}

/// `author=Liu,rpy=1960,volume=4,page=1,doi=10.1016/...`
impl FromStr for MarkerSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let mut author = None;
        let mut rpy = None;
        let mut volume = None;
        let mut page = None;
        let mut doi = None;
        for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            let (key, value) = part
                .split_once('=')
                .ok_or_else(|| Error::invalid("marker", format!("`{part}` is not key=value")))?;
            let value = value.trim().to_owned();
            match key.trim() {
                "author" => author = Some(value),
                "rpy" | "year" => {
                    rpy = Some(value.parse::<Year>().map_err(|_| {
                        Error::invalid("marker", format!("`{value}` is not a year"))
                    })?)
                }
                "volume" => volume = Some(value),
                "page" => page = Some(value),
                "doi" => doi = Some(value),
                other => {
                    return Err(Error::invalid(
                        "marker",
                        format!("unknown key `{other}` (expected author, rpy, volume, page, doi)"),
                    ))
                }
            }
        }
        let marker = MarkerSpec {
            first_author_prefix: author,
            rpy: rpy.ok_or_else(|| Error::invalid("marker", "rpy is required"))?,
            volume,
            start_page: page,
            doi,
        };
        marker.validate()?;
        Ok(marker)
    }
}

impl fmt::Display for MarkerSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if let Some(a) = &self.first_author_prefix {
            write!(f, "author={a},")?;
        }
        write!(f, "rpy={}", self.rpy)?;
        for (key, value) in [
            ("volume", &self.volume),
            ("page", &self.start_page),
            ("doi", &self.doi),
        ] {
            if let Some(v) = value {
                write!(f, ",{key}={v}")?;
            }
        }
        Ok(())
    }
}

/// Whether a record must cite at least one marker or all of them.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MarkerMode {
    #[default]
    Any,
    All,
}

impl FromStr for MarkerMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "any" => Ok(MarkerMode::Any),
            "all" => Ok(MarkerMode::All),
            other => Err(Error::invalid(
                "mode",
                format!("`{other}` is not a marker mode (expected any or all)"),
            )),
        }
    }
}

pub fn matches_marker(fields: &CitedRefFields, m: &MarkerSpec) -> bool {
    if fields.rpy != Some(m.rpy) {
        return false;
    }
    let trimmed_eq = |want: &Option<String>, have: &Option<String>| match (want, have) {
        (None, _) => true,
        (Some(w), Some(h)) => w.trim() == h.trim(),
        (Some(_), None) => false,
    };
    let author_ok = match (&m.first_author_prefix, &fields.first_author) {
        (None, _) => true,
        (Some(p), Some(a)) => a
            .trim()
            .to_lowercase()
            .starts_with(&p.trim().to_lowercase()),
        (Some(_), None) => false,
    };
    let doi_ok = match (&m.doi, &fields.doi) {
        (None, _) => true,
        (Some(w), Some(h)) => w.trim().eq_ignore_ascii_case(h.trim()),
        (Some(_), None) => false,
    };
    author_ok
        && doi_ok
        && trimmed_eq(&m.volume, &fields.volume)
        && trimmed_eq(&m.start_page, &fields.start_page)
}

pub fn variant_matches_marker(v: &ReferenceVariant, m: &MarkerSpec) -> bool {
    matches_marker(&v.fields, m)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FilterOutcome {
    pub retained: usize,
    pub excluded: usize,
    pub warning: Option<String>,
}

/// Keeps only records whose own reference list cites the markers (any or
/// all of them) and recounts the variants over those records. Merges made
/// earlier are kept.
pub fn cocitation_filter(
    ws: &mut Workspace,
    markers: &[MarkerSpec],
    mode: MarkerMode,
) -> Result<FilterOutcome> {
    if markers.is_empty() {
        return Err(Error::invalid("markers", "at least one marker is required"));
    }
    for m in markers {
        m.validate()?;
    }
    let mut dropped: Vec<RecordId> = Vec::new();
    let mut retained = 0;
    for r in ws.active_records() {
        let refs: Vec<CitedRefFields> = r
            .raw_cr_lines
            .iter()
            .map(|cr| parse_reference_string(cr))
            .collect();
        let cites = |m: &MarkerSpec| refs.iter().any(|f| matches_marker(f, m));
        let keep = match mode {
            MarkerMode::Any => markers.iter().any(cites),
            MarkerMode::All => markers.iter().all(cites),
        };
        if keep {
            retained += 1;
        } else {
            dropped.push(r.record_id.clone());
        }
    }
    let excluded = dropped.len();
    let gone: BTreeSet<RecordId> = dropped.iter().cloned().collect();
    ws.exclude_records(dropped);
    let variants = ws.variants_mut();
    for v in variants.iter_mut() {
        v.citing_ids.retain(|id| !gone.contains(id));
        v.ncr = v.citing_ids.len();
    }
    variants.retain(|v| v.ncr > 0);
    ws.push_history(Operation::CocitationFilter {
        markers: markers.to_vec(),
        mode,
    });
    let warning = (retained == 0)
        .then(|| "no record cites the given marker(s); the workspace is now empty".to_owned());
    Ok(FilterOutcome {
        retained,
        excluded,
        warning,
    })
}

/// Aggregate of one reference publication year.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectrumPoint {
    pub rpy: Year,
    pub ncr: usize,
    pub distinct: usize,
    /// NCR minus the median NCR of the years `rpy-2 ..= rpy+2`, clipped to
    /// the spectrum range.
    pub median_dev: f64,
}

fn median_of(window: &mut [usize]) -> f64 {
    window.sort_unstable();
    let n = window.len();
    if n % 2 == 1 {
        window[n / 2] as f64
    } else {
        (window[n / 2 - 1] + window[n / 2]) as f64 / 2.0
    }
}

/// Deviation of each value from the median of itself, the two values before
/// and the two after. Windows are cut at both ends of the series, so the
/// first and last two entries use three or four values.
pub fn median_deviation(series: &[usize]) -> Vec<f64> {
    let n = series.len();
    (0..n)
        .map(|i| {
            let lo = i.saturating_sub(2);
            let hi = (i + 2).min(n - 1);
            let mut window = series[lo..=hi].to_vec();
            series[i] as f64 - median_of(&mut window)
        })
        .collect()
}

/// Builds a dense spectrum from per-year counts starting at `first_year`.
pub fn spectrum_from_counts(
    first_year: Year,
    ncr: &[usize],
    distinct: &[usize],
) -> Vec<SpectrumPoint> {
    median_deviation(ncr)
        .into_iter()
        .enumerate()
        .map(|(i, median_dev)| SpectrumPoint {
            rpy: first_year + i as Year,
            ncr: ncr[i],
            distinct: distinct.get(i).copied().unwrap_or(0),
            median_dev,
        })
        .collect()
}

/// One point per year of `lo..=hi`; years without references have zero
/// counts and take part in the median windows.
pub fn spectrum(ws: &Workspace, lo: Year, hi: Year) -> Result<Vec<SpectrumPoint>> {
    if lo > hi {
        return Err(Error::invalid(
            "range",
            format!("lower year {lo} exceeds upper year {hi}"),
        ));
    }
    let len = (hi - lo) as usize + 1;
    let mut ncr = vec![0; len];
    let mut distinct = vec![0; len];
    for v in ws.variants() {
        if let Some(y) = v.rpy().filter(|y| (lo..=hi).contains(y)) {
            let i = (y - lo) as usize;
            ncr[i] += v.ncr;
            distinct[i] += 1;
        }
    }
    Ok(spectrum_from_counts(lo, &ncr, &distinct))
}

/// Years whose NCR is a strict local maximum (for a plateau, its first
/// year) and whose median deviation is at least `min_dev`. Ascending.
pub fn detect_peaks(spec: &[SpectrumPoint], min_dev: f64) -> Vec<Year> {
    let mut peaks = Vec::new();
    let mut i = 0;
    while i < spec.len() {
        let mut j = i;
        while j + 1 < spec.len() && spec[j + 1].ncr == spec[i].ncr {
            j += 1;
        }
        let rises = i == 0 || spec[i - 1].ncr < spec[i].ncr;
        let falls = j + 1 == spec.len() || spec[j + 1].ncr < spec[i].ncr;
        if rises && falls && spec[i].median_dev >= min_dev {
            peaks.push(spec[i].rpy);
        }
        i = j + 1;
    }
    peaks
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Contributor {
    pub variant_id: VariantId,
    pub raw: String,
    pub ncr: usize,
    /// Fraction of the year's total NCR.
    pub share: f64,
}

/// Every variant of the year with its share, by NCR descending then raw
/// string ascending.
pub fn year_shares(ws: &Workspace, rpy: Year) -> Vec<Contributor> {
    let in_year: Vec<&ReferenceVariant> = ws
        .variants()
        .iter()
        .filter(|v| v.rpy() == Some(rpy))
        .collect();
    let total: usize = in_year.iter().map(|v| v.ncr).sum();
    if total == 0 {
        return Vec::new();
    }
    let mut out: Vec<Contributor> = in_year
        .into_iter()
        .map(|v| Contributor {
            variant_id: v.variant_id,
            raw: v.raw().to_owned(),
            ncr: v.ncr,
            share: v.ncr as f64 / total as f64,
        })
        .collect();
    out.sort_by(|a, b| b.ncr.cmp(&a.ncr).then_with(|| a.raw.cmp(&b.raw)));
    out
}

/// Variants of the year whose share of the year's NCR is strictly above
/// `share_threshold`.
pub fn top_contributors(
    ws: &Workspace,
    rpy: Year,
    share_threshold: f64,
) -> Result<Vec<Contributor>> {
    if !(0.0..1.0).contains(&share_threshold) {
        return Err(Error::invalid(
            "share",
            format!("{share_threshold} is outside [0, 1)"),
        ));
    }
    Ok(year_shares(ws, rpy)
        .into_iter()
        .filter(|c| c.share > share_threshold)
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NamedSpectrum {
    pub name: String,
    pub points: Vec<SpectrumPoint>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub rpy: Year,
    pub ncr: Vec<usize>,
    pub median_dev: Vec<f64>,
    /// NCR of spectrum `k + 1` minus NCR of the first spectrum.
    pub delta_ncr: Vec<i64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub names: Vec<String>,
    pub lo: Year,
    pub hi: Year,
    pub rows: Vec<ComparisonRow>,
    pub warnings: Vec<String>,
}

/// Aligns spectra year by year for overlay plots. Spectra covering
/// different ranges are cut to the common range, with a warning.
pub fn compare_spectra(specs: &[NamedSpectrum]) -> Result<Comparison> {
    if specs.len() < 2 {
        return Err(Error::invalid("spectra", "at least two spectra are needed"));
    }
    let mut warnings = Vec::new();
    let mut lookups = Vec::with_capacity(specs.len());
    let (mut lo, mut hi) = (Year::MIN, Year::MAX);
    for s in specs {
        let (Some(first), Some(last)) = (s.points.first(), s.points.last()) else {
            return Err(Error::invalid(
                "spectra",
                format!("spectrum `{}` is empty", s.name),
            ));
        };
        lo = lo.max(first.rpy);
        hi = hi.min(last.rpy);
        lookups.push(
            s.points
                .iter()
                .map(|p| (p.rpy, *p))
                .collect::<BTreeMap<_, _>>(),
        );
    }
    if lo > hi {
        return Err(Error::invalid("spectra", "the spectra share no year"));
    }
    for s in specs {
        let (first, last) = (s.points[0].rpy, s.points[s.points.len() - 1].rpy);
        if (first, last) != (lo, hi) {
            warnings.push(format!(
                "spectrum `{}` covers {first}..{last}; compared over {lo}..{hi}",
                s.name
            ));
        }
    }
    let rows = (lo..=hi)
        .map(|rpy| {
            let points: Vec<Option<&SpectrumPoint>> = lookups.iter().map(|l| l.get(&rpy)).collect();
            let ncr: Vec<usize> = points.iter().map(|p| p.map_or(0, |p| p.ncr)).collect();
            let median_dev = points
                .iter()
                .map(|p| p.map_or(0.0, |p| p.median_dev))
                .collect();
            let delta_ncr = ncr[1..].iter().map(|n| *n as i64 - ncr[0] as i64).collect();
            ComparisonRow {
                rpy,
                ncr,
                median_dev,
                delta_ncr,
            }
        })
        .collect();
    Ok(Comparison {
        names: specs.iter().map(|s| s.name.clone()).collect(),
        lo,
        hi,
        rows,
        warnings,
    })
}
