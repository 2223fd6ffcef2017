//! WebAssembly bindings for the static demo page in `www/`.
//!
//! Every export takes plain strings and numbers and returns a JSON string, so
//! the page needs no generated TypeScript types. The same functions are
//! callable natively, which is how they are tested.

use serde::Serialize;
use wasm_bindgen::prelude::*;

use rpys_core::disambiguation::{normalize, similarity, ClusterParams};
use rpys_core::ingest::{
    parse_export, parse_reference_string, CitedRefFields, ImportConfig, YearWindow,
};
use rpys_core::spectroscopy::{
    detect_peaks, spectrum, top_contributors, Contributor, SpectrumPoint,
};
use rpys_core::store::{graph_range, Info, Workspace};
use rpys_core::{Error, Year};

#[derive(Serialize)]
struct Peak {
    rpy: Year,
    ncr: usize,
    median_dev: f64,
    top: Vec<Contributor>,
}

#[derive(Serialize)]
struct SpectrumView {
    info: Info,
    merged_away: usize,
    malformed_lines: usize,
    points: Vec<SpectrumPoint>,
    peaks: Vec<Peak>,
}

/// Controls of the spectrogram panel. A threshold of 0 skips clustering.
#[derive(Debug, Clone, Copy)]
pub struct Controls {
    pub rpy_lo: Option<Year>,
    pub rpy_hi: Option<Year>,
    pub threshold: f64,
    pub min_dev: f64,
    pub top_share: f64,
}

pub fn spectrum_view(export_text: &str, c: Controls) -> Result<String, Error> {
    let config = ImportConfig {
        rpy_window: match (c.rpy_lo, c.rpy_hi) {
            (Some(lo), Some(hi)) => Some(YearWindow::new(lo, hi, false)?),
            _ => None,
        },
        ..Default::default()
    };
    let (records, report) = parse_export(export_text, &config)?;
    let mut ws = Workspace::aggregate(records, config);
    let mut merged_away = 0;
    if c.threshold > 0.0 {
        ws.apply_clustering(&ClusterParams {
            threshold: c.threshold,
            ..Default::default()
        })?;
        let s = ws.merge_last_assignment()?;
        merged_away = s.variants_before - s.variants_after;
    }
    let (lo, hi) = graph_range(&ws)?;
    let points = spectrum(&ws, lo, hi)?;
    let peaks = detect_peaks(&points, c.min_dev)
        .into_iter()
        .map(|rpy| {
            let p = points[(rpy - lo) as usize];
            Ok(Peak {
                rpy,
                ncr: p.ncr,
                median_dev: p.median_dev,
                top: top_contributors(&ws, rpy, c.top_share)?,
            })
        })
        .collect::<Result<Vec<_>, Error>>()?;
    Ok(to_json(&SpectrumView {
        info: ws.info(),
        merged_away,
        malformed_lines: report.malformed_lines.len(),
        points,
        peaks,
    }))
}

#[derive(Serialize)]
struct ParsedReference {
    #[serde(flatten)]
    fields: CitedRefFields,
    /// Text the similarity is computed on.
    key: String,
}

pub fn reference_fields(raw: &str) -> String {
    let fields = parse_reference_string(raw);
    let key = normalize(&fields);
    to_json(&ParsedReference { fields, key })
}

#[derive(Serialize)]
struct Comparison {
    similarity: f64,
    same_year: bool,
    /// Whether clustering at `threshold` with volume and page constraints
    /// would put the two into one cluster.
    would_merge: bool,
    a: ParsedReference,
    b: ParsedReference,
}

pub fn compare(a: &str, b: &str, threshold: f64) -> String {
    let (fa, fb) = (parse_reference_string(a), parse_reference_string(b));
    let (ka, kb) = (normalize(&fa), normalize(&fb));
    let sim = similarity(&ka, &kb);
    let agree = |x: &Option<String>, y: &Option<String>| x.is_none() || y.is_none() || x == y;
    let same_year = fa.rpy.is_some() && fa.rpy == fb.rpy;
    let would_merge = same_year
        && agree(&fa.volume, &fb.volume)
        && agree(&fa.start_page, &fb.start_page)
        && sim >= threshold;
    to_json(&Comparison {
        similarity: sim,
        same_year,
        would_merge,
        a: ParsedReference {
            fields: fa,
            key: ka,
        },
        b: ParsedReference {
            fields: fb,
            key: kb,
        },
    })
}

fn to_json<T: Serialize>(v: &T) -> String {
    serde_json::to_string(v).expect("view types serialize")
}

fn js_error(e: Error) -> JsError {
    JsError::new(&e.to_string())
}

fn year(v: f64) -> Option<Year> {
    (v.is_finite() && v > 0.0).then_some(v as Year)
}

/// Spectrum, peaks and main contributors of an export file. Year bounds of
/// 0 or NaN mean no window.
#[wasm_bindgen(js_name = spectrumFromExport)]
pub fn spectrum_from_export(
    export_text: &str,
    rpy_lo: f64,
    rpy_hi: f64,
    threshold: f64,
    min_dev: f64,
    top_share: f64,
) -> Result<String, JsError> {
    spectrum_view(
        export_text,
        Controls {
            rpy_lo: year(rpy_lo),
            rpy_hi: year(rpy_hi),
            threshold,
            min_dev,
            top_share,
        },
    )
    .map_err(js_error)
}

#[wasm_bindgen(js_name = parseReference)]
pub fn parse_reference(raw: &str) -> String {
    reference_fields(raw)
}

#[wasm_bindgen(js_name = compareReferences)]
pub fn compare_references(a: &str, b: &str, threshold: f64) -> String {
    compare(a, b, threshold)
}
