//! CSV_CR and CSV_GRAPH exports.
//!
//! Both files are UTF-8, comma separated, with a header row, LF line
//! endings, and quotes only around fields that contain a comma, a quote or
//! a line break. Absent values are empty fields.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{ClusterId, ReferenceVariant, VariantId, Workspace};
use crate::spectroscopy::{spectrum, SpectrumPoint};
use crate::{Error, Result, Year};

/// One line of a CSV_CR file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CrRow {
    pub variant_id: VariantId,
    pub raw: String,
    pub first_author: Option<String>,
    pub rpy: Option<Year>,
    pub source: Option<String>,
    pub volume: Option<String>,
    pub start_page: Option<String>,
    pub doi: Option<String>,
    pub ncr: usize,
    pub cluster_id: Option<ClusterId>,
}

impl From<&ReferenceVariant> for CrRow {
    fn from(v: &ReferenceVariant) -> Self {
        let f = &v.fields;
        CrRow {
            variant_id: v.variant_id,
            raw: f.raw.clone(),
            first_author: f.first_author.clone(),
            rpy: f.rpy,
            source: f.source.clone(),
            volume: f.volume.clone(),
            start_page: f.start_page.clone(),
            doi: f.doi.clone(),
            ncr: v.ncr,
            cluster_id: v.cluster_id,
        }
    }
}

fn writer() -> csv::Writer<Vec<u8>> {
    csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .quote_style(csv::QuoteStyle::Necessary)
        .from_writer(Vec::new())
}

fn finish(w: csv::Writer<Vec<u8>>) -> String {
    let bytes = w.into_inner().expect("in-memory csv writer cannot fail");
    String::from_utf8(bytes).expect("csv output is utf-8")
}

/// Rows in variant-id order.
pub fn render_cr_table(ws: &Workspace) -> String {
    let mut w = writer();
    if ws.variants().is_empty() {
        w.write_record([
            "variant_id",
            "raw",
            "first_author",
            "rpy",
            "source",
            "volume",
            "start_page",
            "doi",
            "ncr",
            "cluster_id",
        ])
        .expect("in-memory csv writer cannot fail");
    }
    for v in ws.variants() {
        w.serialize(CrRow::from(v))
            .expect("in-memory csv writer cannot fail");
    }
    finish(w)
}

pub fn read_cr_table(text: &str) -> Result<Vec<CrRow>> {
    let mut r = csv::ReaderBuilder::new().from_reader(text.as_bytes());
    let rows = r
        .deserialize()
        .collect::<std::result::Result<Vec<CrRow>, _>>()?;
    Ok(rows)
}

/// Year range of the graph: the configured RPY window, or the span of the
/// variants' years when no window was configured.
pub fn graph_range(ws: &Workspace) -> Result<(Year, Year)> {
    let info = ws.info();
    let Some(span) = info.rpy_span else {
        return Err(Error::EmptyGraph(
            "no reference in the workspace has a publication year".into(),
        ));
    };
    Ok(ws.config().rpy_window.map(|w| (w.lo, w.hi)).unwrap_or(span))
}

fn write_points(w: &mut csv::Writer<Vec<u8>>, points: &[SpectrumPoint]) {
    w.write_record(["rpy", "ncr", "distinct_variants", "median_dev"])
        .expect("in-memory csv writer cannot fail");
    for p in points {
        w.write_record([
            p.rpy.to_string(),
            p.ncr.to_string(),
            p.distinct.to_string(),
            p.median_dev.to_string(),
        ])
        .expect("in-memory csv writer cannot fail");
    }
}

/// One row per year of [`graph_range`], years without references included
/// with zero counts.
pub fn render_graph(ws: &Workspace) -> Result<String> {
    let (lo, hi) = graph_range(ws)?;
    let points = spectrum(ws, lo, hi)?;
    let mut w = writer();
    write_points(&mut w, &points);
    Ok(finish(w))
}

/// Peak table: `rpy,ncr,median_dev`, one row per peak year in ascending order.
pub fn render_peaks(points: &[SpectrumPoint], peaks: &[Year]) -> String {
    let mut w = writer();
    w.write_record(["rpy", "ncr", "median_dev"])
        .expect("in-memory csv writer cannot fail");
    for p in points.iter().filter(|p| peaks.contains(&p.rpy)) {
        w.write_record([
            p.rpy.to_string(),
            p.ncr.to_string(),
            p.median_dev.to_string(),
        ])
        .expect("in-memory csv writer cannot fail");
    }
    finish(w)
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn write_cr_table(ws: &Workspace, path: impl AsRef<Path>) -> Result<()> {
    write_file(path.as_ref(), &render_cr_table(ws))
}

pub fn write_graph(ws: &Workspace, path: impl AsRef<Path>) -> Result<()> {
    let text = render_graph(ws)?;
    write_file(path.as_ref(), &text)
}

pub fn write_peaks(points: &[SpectrumPoint], peaks: &[Year], path: impl AsRef<Path>) -> Result<()> {
    write_file(path.as_ref(), &render_peaks(points, peaks))
}
