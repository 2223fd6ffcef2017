use std::collections::BTreeSet;
use std::fmt::{self, Write as _};
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use super::{Arg, Command, CommandError, ScriptError, ScriptProgram, Span, Value};
use crate::disambiguation::{ClusterParams, MergeSummary};
use crate::ingest::{read_export_file, ImportConfig, ParseReport, YearWindow};
use crate::spectroscopy::{
    cocitation_filter, detect_peaks, spectrum, top_contributors, Contributor, FilterOutcome,
    MarkerMode, MarkerSpec, SpectrumPoint,
};
use crate::store::{
    graph_range, load_workspace, save_workspace, write_cr_table, write_graph, write_peaks, Info,
    Workspace,
};
use crate::{Error, Year};

/// State a script runs against. Relative paths resolve against `work_dir`.
#[derive(Debug, Clone, Default)]
pub struct ExecContext {
    pub work_dir: PathBuf,
    pub workspace: Option<Workspace>,
}

impl ExecContext {
    pub fn new(work_dir: impl Into<PathBuf>) -> Self {
        Self {
            work_dir: work_dir.into(),
            workspace: None,
        }
    }

    fn resolve(&self, file: &str) -> PathBuf {
        let p = Path::new(file);
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.work_dir.join(p)
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum CommandOutput {
    Imported {
        report: ParseReport,
        info: Info,
    },
    Loaded(Info),
    Info(Info),
    Clustered {
        clusters: usize,
        multi_member: usize,
    },
    Merged(MergeSummary),
    Removed(usize),
    Saved(PathBuf),
    Exported(PathBuf),
    Filtered(FilterOutcome),
    Spectrum(Vec<SpectrumPoint>),
    Peaks(Vec<SpectrumPoint>),
    TopRefs {
        rpy: Year,
        refs: Vec<Contributor>,
    },
}

impl fmt::Display for CommandOutput {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CommandOutput::Imported { report, info } => write!(
                f,
                "{info} (read {} records, {} dropped by window; {} CR lines truncated, {} malformed lines)",
                report.records_read,
                report.records_dropped_by_window,
                report.cr_lines_truncated,
                report.malformed_lines.len()
            ),
            CommandOutput::Loaded(info) | CommandOutput::Info(info) => write!(f, "{info}"),
            CommandOutput::Clustered {
                clusters,
                multi_member,
            } => write!(f, "{clusters} clusters, {multi_member} with several variants"),
            CommandOutput::Merged(s) => write!(
                f,
                "merged {} clusters: {} -> {} variants",
                s.clusters_merged, s.variants_before, s.variants_after
            ),
            CommandOutput::Removed(n) => write!(f, "removed {n} variants"),
            CommandOutput::Saved(p) => write!(f, "saved {}", p.display()),
            CommandOutput::Exported(p) => write!(f, "wrote {}", p.display()),
            CommandOutput::Filtered(o) => {
                write!(f, "retained {} records, excluded {}", o.retained, o.excluded)?;
                if let Some(w) = &o.warning {
                    write!(f, "; warning: {w}")?;
                }
                Ok(())
            }
            CommandOutput::Spectrum(points) => {
                let total: usize = points.iter().map(|p| p.ncr).sum();
                match (points.first(), points.last()) {
                    (Some(a), Some(b)) => {
                        write!(f, "{} years {}..{}, total NCR {total}", points.len(), a.rpy, b.rpy)
                    }
                    _ => f.write_str("empty spectrum"),
                }
            }
            CommandOutput::Peaks(peaks) => {
                write!(f, "{} peaks", peaks.len())?;
                for p in peaks {
                    write!(f, "\n    {} ncr={} median_dev={}", p.rpy, p.ncr, p.median_dev)?;
                }
                Ok(())
            }
            CommandOutput::TopRefs { rpy, refs } => {
                write!(f, "{} references above threshold in {rpy}", refs.len())?;
                for c in refs {
                    write!(f, "\n    {:.3} ncr={} {}", c.share, c.ncr, c.raw)?;
                }
                Ok(())
            }
        }
    }
}

#[derive(Debug, Clone)]
pub struct CommandReport {
    pub command: String,
    pub span: Span,
    pub output: CommandOutput,
    pub elapsed: Duration,
}

#[derive(Debug, Clone, Default)]
pub struct RunReport {
    pub commands: Vec<CommandReport>,
}

impl RunReport {
    /// One block per command. Timings are optional so output can be compared
    /// across runs.
    pub fn render(&self, timings: bool) -> String {
        let mut out = String::new();
        for (i, c) in self.commands.iter().enumerate() {
            let _ = write!(out, "[{}] {}", i + 1, c.command);
            if timings {
                let _ = write!(out, " ({:.1} ms)", c.elapsed.as_secs_f64() * 1e3);
            }
            let _ = writeln!(out, "\n    {}", c.output);
        }
        out
    }
}

/// A run that stopped at a failing command. `report` holds the commands that
/// completed before it.
#[derive(Debug)]
pub struct RunFailure {
    pub report: RunReport,
    pub error: ScriptError,
}

impl fmt::Display for RunFailure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.error)
    }
}

impl std::error::Error for RunFailure {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        Some(&self.error)
    }
}

/// Runs the commands in order and stops at the first failure. A failing
/// command leaves the workspace as it was before that command.
pub fn execute(prog: &ScriptProgram, ctx: &mut ExecContext) -> Result<RunReport, RunFailure> {
    let mut report = RunReport::default();
    for cmd in &prog.commands {
        let started = Instant::now();
        match run_command(cmd, ctx) {
            Ok(output) => report.commands.push(CommandReport {
                command: cmd.to_string(),
                span: cmd.span,
                output,
                elapsed: started.elapsed(),
            }),
            Err(source) => {
                return Err(RunFailure {
                    report,
                    error: ScriptError::Command {
                        command: cmd.name.clone(),
                        span: cmd.span,
                        source,
                    },
                })
            }
        }
    }
    Ok(report)
}

/// Typed access to a command's arguments; `finish` rejects leftovers.
struct Args<'a> {
    cmd: &'a Command,
    used: BTreeSet<&'a str>,
}

type CmdResult<T> = Result<T, CommandError>;

impl<'a> Args<'a> {
    fn new(cmd: &'a Command) -> Self {
        Self {
            cmd,
            used: BTreeSet::new(),
        }
    }

    fn get(&mut self, key: &'a str) -> Option<&'a Arg> {
        let arg = self.cmd.arg(key)?;
        self.used.insert(key);
        Some(arg)
    }

    fn required(&mut self, key: &'a str) -> CmdResult<&'a Value> {
        self.get(key)
            .map(|a| &a.value)
            .ok_or_else(|| CommandError::MissingArg(key.to_owned()))
    }

    fn finish(self) -> CmdResult<()> {
        match self
            .cmd
            .args
            .iter()
            .find(|a| !self.used.contains(a.key.as_str()))
        {
            Some(a) => Err(CommandError::UnknownArg(a.key.clone())),
            None => Ok(()),
        }
    }

    fn str(&mut self, key: &'a str) -> CmdResult<Option<&'a str>> {
        self.get(key).map(|a| as_str(key, &a.value)).transpose()
    }

    fn real(&mut self, key: &'a str) -> CmdResult<Option<f64>> {
        self.get(key).map(|a| as_real(key, &a.value)).transpose()
    }

    fn bool(&mut self, key: &'a str) -> CmdResult<Option<bool>> {
        match self.get(key).map(|a| &a.value) {
            None => Ok(None),
            Some(Value::Bool(b)) => Ok(Some(*b)),
            Some(v) => Err(mismatch(key, "a boolean", v)),
        }
    }

    fn window(&mut self, key: &'a str) -> CmdResult<Option<YearWindow>> {
        self.get(key).map(|a| as_window(key, &a.value)).transpose()
    }
}

fn mismatch(key: &str, expected: &'static str, v: &Value) -> CommandError {
    CommandError::TypeMismatch {
        key: key.to_owned(),
        expected,
        found: v.type_name(),
    }
}

fn bad(key: &str, message: impl Into<String>) -> CommandError {
    CommandError::BadValue {
        key: key.to_owned(),
        message: message.into(),
    }
}

fn as_str<'v>(key: &str, v: &'v Value) -> CmdResult<&'v str> {
    match v {
        Value::Str(s) => Ok(s),
        v => Err(mismatch(key, "a string", v)),
    }
}

fn as_int(key: &str, v: &Value) -> CmdResult<i64> {
    match v {
        Value::Int(i) => Ok(*i),
        v => Err(mismatch(key, "an integer", v)),
    }
}

fn as_real(key: &str, v: &Value) -> CmdResult<f64> {
    match v {
        Value::Int(i) => Ok(*i as f64),
        Value::Real(x) => Ok(*x),
        v => Err(mismatch(key, "a number", v)),
    }
}

fn as_year(key: &str, v: &Value) -> CmdResult<Year> {
    let i = as_int(key, v)?;
    Year::try_from(i).map_err(|_| bad(key, format!("{i} is not a year")))
}

fn as_count(key: &str, v: &Value) -> CmdResult<usize> {
    let i = as_int(key, v)?;
    usize::try_from(i).map_err(|_| bad(key, format!("{i} is negative")))
}

/// `[lo, hi]` or `[lo, hi, keep_missing]`.
fn as_window(key: &str, v: &Value) -> CmdResult<YearWindow> {
    let Value::List(items) = v else {
        return Err(mismatch(
            key,
            "a list [lo, hi] or [lo, hi, keep_missing]",
            v,
        ));
    };
    let keep_missing = match items.len() {
        2 => false,
        3 => match &items[2] {
            Value::Bool(b) => *b,
            v => return Err(mismatch(key, "a boolean third element", v)),
        },
        n => return Err(bad(key, format!("expected 2 or 3 elements, found {n}"))),
    };
    let lo = as_year(key, &items[0])?;
    let hi = as_year(key, &items[1])?;
    YearWindow::new(lo, hi, keep_missing).map_err(|e| bad(key, e.to_string()))
}

fn as_ncr_range(key: &str, v: &Value) -> CmdResult<(usize, usize)> {
    match v {
        Value::List(items) if items.len() == 2 => {
            Ok((as_count(key, &items[0])?, as_count(key, &items[1])?))
        }
        Value::List(items) => Err(bad(
            key,
            format!("expected [lo, hi], found {} elements", items.len()),
        )),
        v => Err(mismatch(key, "a list [lo, hi]", v)),
    }
}

fn workspace<'c>(ctx: &'c ExecContext, cmd: &str) -> CmdResult<&'c Workspace> {
    ctx.workspace.as_ref().ok_or_else(|| {
        CommandError::Core(Error::Refused(format!(
            "`{cmd}` needs a workspace; run importFile or loadFile first"
        )))
    })
}

/// Runs `f` on a copy of the workspace and keeps the copy only on success.
fn mutate<T>(
    ctx: &mut ExecContext,
    cmd: &str,
    f: impl FnOnce(&mut Workspace) -> crate::Result<T>,
) -> CmdResult<T> {
    let mut ws = workspace(ctx, cmd)?.clone();
    let out = f(&mut ws)?;
    ctx.workspace = Some(ws);
    Ok(out)
}

fn range_or_graph(ws: &Workspace, window: Option<YearWindow>) -> CmdResult<(Year, Year)> {
    match window {
        Some(w) => Ok((w.lo, w.hi)),
        None => Ok(graph_range(ws)?),
    }
}

fn run_command(cmd: &Command, ctx: &mut ExecContext) -> CmdResult<CommandOutput> {
    let mut args = Args::new(cmd);
    let name = cmd.name.as_str();
    let out = match name {
        "importFile" => {
            let file = as_str("file", args.required("file")?)?;
            let kind = args.str("type")?.unwrap_or("WOS");
            if !kind.eq_ignore_ascii_case("WOS") {
                return Err(bad(
                    "type",
                    format!("unsupported import type `{kind}` (expected WOS)"),
                ));
            }
            let config = ImportConfig {
                rpy_window: args.window("RPY")?,
                py_window: args.window("PY")?,
                max_cr_per_record: match args.get("maxCR") {
                    Some(a) => as_count("maxCR", &a.value)?,
                    None => 0,
                },
            };
            args.finish()?;
            let path = ctx.resolve(file);
            let (records, report) = read_export_file(&path, &config)?;
            let ws = Workspace::aggregate_from(records, config, Some(file.to_owned()));
            let info = ws.info();
            ctx.workspace = Some(ws);
            CommandOutput::Imported { report, info }
        }
        "loadFile" => {
            let file = as_str("file", args.required("file")?)?;
            args.finish()?;
            let ws = load_workspace(ctx.resolve(file))?;
            let info = ws.info();
            ctx.workspace = Some(ws);
            CommandOutput::Loaded(info)
        }
        "info" => {
            args.finish()?;
            CommandOutput::Info(workspace(ctx, name)?.info())
        }
        "cluster" => {
            let defaults = ClusterParams::default();
            let params = ClusterParams {
                threshold: as_real("threshold", args.required("threshold")?)?,
                use_volume: args.bool("volume")?.unwrap_or(defaults.use_volume),
                use_page: args.bool("page")?.unwrap_or(defaults.use_page),
                use_doi: args.bool("DOI")?.unwrap_or(defaults.use_doi),
            };
            args.finish()?;
            let asg = mutate(ctx, name, |ws| ws.apply_clustering(&params))?;
            CommandOutput::Clustered {
                clusters: asg.len(),
                multi_member: asg.multi_member().count(),
            }
        }
        "merge" => {
            args.finish()?;
            CommandOutput::Merged(mutate(ctx, name, |ws| ws.merge_last_assignment())?)
        }
        "removeCR" => {
            let (lo, hi) = as_ncr_range("N_CR", args.required("N_CR")?)?;
            args.finish()?;
            CommandOutput::Removed(mutate(ctx, name, |ws| ws.remove_by_ncr(lo, hi))?)
        }
        "saveFile" => {
            let file = as_str("file", args.required("file")?)?;
            args.finish()?;
            let path = ctx.resolve(file);
            save_workspace(workspace(ctx, name)?, &path)?;
            CommandOutput::Saved(path)
        }
        "exportFile" => {
            let file = as_str("file", args.required("file")?)?;
            let kind = args.str("type")?.unwrap_or("CSV_CR");
            args.finish()?;
            let path = ctx.resolve(file);
            let ws = workspace(ctx, name)?;
            match kind {
                "CSV_CR" => write_cr_table(ws, &path)?,
                "CSV_GRAPH" => write_graph(ws, &path)?,
                other => {
                    return Err(bad(
                        "type",
                        format!("unsupported export type `{other}` (expected CSV_CR or CSV_GRAPH)"),
                    ))
                }
            }
            CommandOutput::Exported(path)
        }
        "cocite" => {
            let markers = match args.required("marker")? {
                Value::Str(s) => vec![s.parse::<MarkerSpec>()?],
                Value::List(items) => items
                    .iter()
                    .map(|v| Ok(as_str("marker", v)?.parse::<MarkerSpec>()?))
                    .collect::<CmdResult<Vec<_>>>()?,
                v => return Err(mismatch("marker", "a string or a list of strings", v)),
            };
            let mode = match args.str("mode")? {
                Some(m) => m.parse::<MarkerMode>()?,
                None => MarkerMode::default(),
            };
            args.finish()?;
            CommandOutput::Filtered(mutate(ctx, name, |ws| {
                cocitation_filter(ws, &markers, mode)
            })?)
        }
        "spectrum" => {
            let window = args.window("RPY")?;
            args.finish()?;
            let ws = workspace(ctx, name)?;
            let (lo, hi) = range_or_graph(ws, window)?;
            CommandOutput::Spectrum(spectrum(ws, lo, hi)?)
        }
        "peaks" => {
            let min_dev = args.real("minDev")?.unwrap_or(1.0);
            let window = args.window("RPY")?;
            let file = args.str("file")?;
            args.finish()?;
            let ws = workspace(ctx, name)?;
            let (lo, hi) = range_or_graph(ws, window)?;
            let points = spectrum(ws, lo, hi)?;
            let years = detect_peaks(&points, min_dev);
            if let Some(file) = file {
                write_peaks(&points, &years, ctx.resolve(file))?;
            }
            let peaks = points
                .into_iter()
                .filter(|p| years.binary_search(&p.rpy).is_ok())
                .collect();
            CommandOutput::Peaks(peaks)
        }
        "topRefs" => {
            let rpy = as_year("RPY", args.required("RPY")?)?;
            let share = args.real("share")?.unwrap_or(0.1);
            args.finish()?;
            let refs = top_contributors(workspace(ctx, name)?, rpy, share)?;
            CommandOutput::TopRefs { rpy, refs }
        }
        other => return Err(CommandError::UnknownCommand(other.to_owned())),
    };
    Ok(out)
}

/// Names accepted by [`execute`].
pub const COMMANDS: &[&str] = &[
    "importFile",
    "loadFile",
    "info",
    "cluster",
    "merge",
    "removeCR",
    "saveFile",
    "exportFile",
    "cocite",
    "spectrum",
    "peaks",
    "topRefs",
];
