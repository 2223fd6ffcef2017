use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::ValueEnum;

use rpys_core::disambiguation::ClusterParams;
use rpys_core::ingest::{read_export_file, ImportConfig, YearWindow};
use rpys_core::spectroscopy::{
    cocitation_filter, detect_peaks, spectrum, top_contributors, MarkerMode, MarkerSpec,
};
use rpys_core::store::{
    graph_range, load_workspace, save_workspace, write_cr_table, write_graph, write_peaks,
    Workspace,
};

#[derive(Clone, Copy, ValueEnum)]
enum Constraint {
    Volume,
    Page,
    Doi,
}

#[derive(clap::Args)]
pub struct Args {
    /// Tagged export file to import.
    #[arg(long, conflicts_with = "load", required_unless_present = "load")]
    input: Option<PathBuf>,
    /// Workspace file to continue from.
    #[arg(long)]
    load: Option<PathBuf>,
    /// Reference year window, LO:HI[:keep-missing].
    #[arg(long, requires = "input")]
    rpy: Option<YearWindow>,
    /// Publication year window of the citing records, LO:HI[:keep-missing].
    #[arg(long, requires = "input")]
    py: Option<YearWindow>,
    /// Keep at most N references per record; 0 keeps all.
    #[arg(long, default_value_t = 0, requires = "input")]
    max_cr: usize,
    /// Cluster and merge spelling variants at this similarity.
    #[arg(long)]
    cluster_threshold: Option<f64>,
    /// Fields that must agree when both variants carry them.
    #[arg(
        long,
        value_delimiter = ',',
        default_value = "volume,page",
        requires = "cluster_threshold"
    )]
    cluster_use: Vec<Constraint>,
    /// Keep only records citing this marker, e.g. "author=Liu,rpy=1960". Repeatable.
    #[arg(long)]
    marker: Vec<MarkerSpec>,
    /// any: cite at least one marker; all: cite every marker.
    #[arg(long, default_value = "any")]
    marker_mode: MarkerMode,
    /// Drop variants with LO <= NCR <= HI, given as LO:HI.
    #[arg(long)]
    remove_ncr: Option<String>,
    /// Deviation floor for reported peaks.
    #[arg(long, default_value_t = 1.0)]
    peaks_min_dev: f64,
    /// Share above which a reference counts as a main contributor of a peak.
    #[arg(long, default_value_t = 0.1)]
    top_share: f64,
    #[arg(long)]
    export_cr: Option<PathBuf>,
    #[arg(long)]
    export_graph: Option<PathBuf>,
    /// Peaks CSV with columns rpy,ncr,median_dev.
    #[arg(long)]
    export_peaks: Option<PathBuf>,
    #[arg(long)]
    save: Option<PathBuf>,
}

fn ncr_range(s: &str) -> Result<(usize, usize)> {
    let (lo, hi) = s
        .split_once(':')
        .with_context(|| format!("--remove-ncr `{s}` is not LO:HI"))?;
    Ok((lo.trim().parse()?, hi.trim().parse()?))
}

pub fn run(args: Args) -> Result<()> {
    let mut ws = match (&args.input, &args.load) {
        (Some(path), _) => {
            let config = ImportConfig {
                rpy_window: args.rpy,
                py_window: args.py,
                max_cr_per_record: args.max_cr,
            };
            let (records, report) = read_export_file(path, &config)?;
            for m in &report.malformed_lines {
                tracing::warn!("{}:{}: {}", path.display(), m.line, m.reason);
            }
            Workspace::aggregate_from(records, config, Some(path.display().to_string()))
        }
        (None, Some(path)) => load_workspace(path)?,
        (None, None) => bail!("one of --input or --load is required"),
    };
    println!("imported: {}", ws.info());

    if let Some(threshold) = args.cluster_threshold {
        let has = |c: fn(&Constraint) -> bool| args.cluster_use.iter().any(c);
        let params = ClusterParams {
            threshold,
            use_volume: has(|c| matches!(c, Constraint::Volume)),
            use_page: has(|c| matches!(c, Constraint::Page)),
            use_doi: has(|c| matches!(c, Constraint::Doi)),
        };
        ws.apply_clustering(&params)?;
        let s = ws.merge_last_assignment()?;
        println!(
            "merged: {} clusters, {} -> {} variants",
            s.clusters_merged, s.variants_before, s.variants_after
        );
    }

    if !args.marker.is_empty() {
        let out = cocitation_filter(&mut ws, &args.marker, args.marker_mode)?;
        println!(
            "filter: {} records kept, {} excluded",
            out.retained, out.excluded
        );
        if let Some(w) = out.warning {
            tracing::warn!("{w}");
        }
    }

    if let Some(r) = &args.remove_ncr {
        let (lo, hi) = ncr_range(r)?;
        let n = ws.remove_by_ncr(lo, hi)?;
        println!("removed: {n} variants with {lo} <= NCR <= {hi}");
    }
    println!("final: {}", ws.info());

    if let Some(p) = &args.export_cr {
        write_cr_table(&ws, p)?;
    }
    if let Some(p) = &args.export_graph {
        write_graph(&ws, p)?;
    }
    if let Some(p) = &args.save {
        save_workspace(&ws, p)?;
    }

    let (lo, hi) = match graph_range(&ws) {
        Ok(r) => r,
        Err(e) if args.export_peaks.is_none() => {
            println!("no spectrum: {e}");
            return Ok(());
        }
        Err(e) => return Err(e.into()),
    };
    let points = spectrum(&ws, lo, hi)?;
    let peaks = detect_peaks(&points, args.peaks_min_dev);
    if let Some(p) = &args.export_peaks {
        write_peaks(&points, &peaks, p)?;
    }
    println!("peaks (median_dev >= {}):", args.peaks_min_dev);
    for year in peaks {
        let point = points
            .iter()
            .find(|p| p.rpy == year)
            .expect("peak is in range");
        println!("  {year}  ncr={} dev={}", point.ncr, point.median_dev);
        for c in top_contributors(&ws, year, args.top_share)? {
            println!("    {:5.1}%  {:>4}  {}", c.share * 100.0, c.ncr, c.raw);
        }
    }
    Ok(())
}
