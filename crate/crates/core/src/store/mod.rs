//! The analysis workspace: reference variants with their citation counts,
//! the records they come from, and the history of operations applied.

mod export;
mod persist;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::disambiguation::{ClusterAssignment, ClusterParams};
use crate::ingest::{parse_reference_string, CitedRefFields, CitingRecord, ImportConfig, RecordId};
use crate::spectroscopy::{MarkerMode, MarkerSpec};
use crate::{Error, Result, Year};

pub use export::{
    graph_range, read_cr_table, render_cr_table, render_graph, render_peaks, write_cr_table,
    write_graph, write_peaks, CrRow,
};
pub use persist::{
    decode_workspace, encode_workspace, load_workspace, looks_like_workspace, save_workspace,
    WORKSPACE_FORMAT, WORKSPACE_VERSION,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct VariantId(pub u32);

impl fmt::Display for VariantId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ClusterId(pub u32);

impl fmt::Display for ClusterId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// One distinct cited-reference string (or, after merging, one work) and
/// the records citing it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReferenceVariant {
    pub variant_id: VariantId,
    pub fields: CitedRefFields,
    pub ncr: usize,
    pub citing_ids: BTreeSet<RecordId>,
    pub cluster_id: Option<ClusterId>,
}

impl ReferenceVariant {
    pub fn rpy(&self) -> Option<Year> {
        self.fields.rpy
    }

    pub fn raw(&self) -> &str {
        &self.fields.raw
    }
}

/// An entry of the workspace history. Replaying the entries in order on the
/// imported records rebuilds the variant table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case")]
pub enum Operation {
    Import {
        source: Option<String>,
        config: ImportConfig,
    },
    RemoveByNcr {
        lo: usize,
        hi: usize,
    },
    Cluster {
        params: ClusterParams,
    },
    Merge,
    MergeGroups {
        groups: Vec<Vec<VariantId>>,
    },
    ManualMerge {
        variant_ids: Vec<VariantId>,
    },
    ManualSplit {
        variant_id: VariantId,
    },
    CocitationFilter {
        markers: Vec<MarkerSpec>,
        mode: MarkerMode,
    },
}

impl Operation {
    pub fn name(&self) -> &'static str {
        match self {
            Operation::Import { .. } => "import",
            Operation::RemoveByNcr { .. } => "remove_by_ncr",
            Operation::Cluster { .. } => "cluster",
            Operation::Merge => "merge",
            Operation::MergeGroups { .. } => "merge_groups",
            Operation::ManualMerge { .. } => "manual_merge",
            Operation::ManualSplit { .. } => "manual_split",
            Operation::CocitationFilter { .. } => "cocitation_filter",
        }
    }
}

/// Members of one merge, kept so the merge can be undone.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MergeRecord {
    pub manual: bool,
    pub members: Vec<ReferenceVariant>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Info {
    pub records: usize,
    pub cr_mentions: usize,
    pub distinct_variants: usize,
    pub rpy_span: Option<(Year, Year)>,
}

impl fmt::Display for Info {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "records={} cr_mentions={} variants={}",
            self.records, self.cr_mentions, self.distinct_variants
        )?;
        match self.rpy_span {
            Some((lo, hi)) => write!(f, " rpy={lo}..{hi}"),
            None => f.write_str(" rpy=-"),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Workspace {
    records: Vec<CitingRecord>,
    excluded: BTreeSet<RecordId>,
    variants: Vec<ReferenceVariant>,
    config: ImportConfig,
    history: Vec<Operation>,
    merges: BTreeMap<VariantId, Vec<MergeRecord>>,
    #[serde(default)]
    last_assignment: Option<ClusterAssignment>,
}

impl Workspace {
    /// Builds one variant per distinct raw reference string. A record citing
    /// the same string twice counts once.
    pub fn aggregate(records: Vec<CitingRecord>, config: ImportConfig) -> Self {
        Self::aggregate_from(records, config, None)
    }

    pub fn aggregate_from(
        records: Vec<CitingRecord>,
        config: ImportConfig,
        source: Option<String>,
    ) -> Self {
        let mut ws = Workspace {
            records,
            config: config.clone(),
            history: vec![Operation::Import { source, config }],
            ..Default::default()
        };
        ws.variants = aggregate_variants(&ws.records, &ws.excluded);
        ws
    }

    pub fn records(&self) -> &[CitingRecord] {
        &self.records
    }

    /// Records not removed by a co-citation filter.
    pub fn active_records(&self) -> impl Iterator<Item = &CitingRecord> {
        self.records
            .iter()
            .filter(|r| !self.excluded.contains(&r.record_id))
    }

    pub fn is_active(&self, id: &RecordId) -> bool {
        !self.excluded.contains(id)
    }

    pub fn variants(&self) -> &[ReferenceVariant] {
        &self.variants
    }

    pub fn variant(&self, id: VariantId) -> Option<&ReferenceVariant> {
        self.variants
            .binary_search_by_key(&id, |v| v.variant_id)
            .ok()
            .map(|i| &self.variants[i])
    }

    pub fn config(&self) -> &ImportConfig {
        &self.config
    }

    pub fn history(&self) -> &[Operation] {
        &self.history
    }

    /// True when the variant is the product of a merge that can be split.
    pub fn is_merged(&self, id: VariantId) -> bool {
        self.merges.get(&id).is_some_and(|stack| !stack.is_empty())
    }

    pub fn is_manually_merged(&self, id: VariantId) -> bool {
        self.merges
            .get(&id)
            .is_some_and(|stack| stack.iter().any(|m| m.manual))
    }

    pub fn merge_records(&self, id: VariantId) -> &[MergeRecord] {
        self.merges.get(&id).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn last_assignment(&self) -> Option<&ClusterAssignment> {
        self.last_assignment.as_ref()
    }

    pub fn info(&self) -> Info {
        let (records, cr_mentions) = self
            .active_records()
            .fold((0, 0), |(n, m), r| (n + 1, m + r.raw_cr_lines.len()));
        let years = self.variants.iter().filter_map(ReferenceVariant::rpy);
        let rpy_span = years.fold(None, |span, y| match span {
            None => Some((y, y)),
            Some((lo, hi)) => Some((Year::min(lo, y), Year::max(hi, y))),
        });
        Info {
            records,
            cr_mentions,
            distinct_variants: self.variants.len(),
            rpy_span,
        }
    }

    /// Removes every variant with `lo <= ncr <= hi`; records are untouched.
    pub fn remove_by_ncr(&mut self, lo: usize, hi: usize) -> Result<usize> {
        if lo > hi {
            return Err(Error::invalid(
                "N_CR",
                format!("lower bound {lo} exceeds upper bound {hi}"),
            ));
        }
        let before = self.variants.len();
        self.variants.retain(|v| !(lo <= v.ncr && v.ncr <= hi));
        self.history.push(Operation::RemoveByNcr { lo, hi });
        Ok(before - self.variants.len())
    }

    /// Re-executes `history` starting from `records`. The first entry must be
    /// the import.
    pub fn replay(records: Vec<CitingRecord>, history: &[Operation]) -> Result<Self> {
        let (first, rest) = history
            .split_first()
            .ok_or_else(|| Error::Consistency("history is empty".into()))?;
        let Operation::Import { source, config } = first else {
            return Err(Error::Consistency(
                "history must start with an import".into(),
            ));
        };
        let mut ws = Workspace::aggregate_from(records, config.clone(), source.clone());
        for op in rest {
            ws.apply(op)?;
        }
        Ok(ws)
    }

    /// Applies one history entry.
    pub fn apply(&mut self, op: &Operation) -> Result<()> {
        match op {
            Operation::Import { .. } => {
                return Err(Error::Consistency(
                    "import can only be the first operation".into(),
                ))
            }
            Operation::RemoveByNcr { lo, hi } => {
                self.remove_by_ncr(*lo, *hi)?;
            }
            Operation::Cluster { params } => {
                self.apply_clustering(params)?;
            }
            Operation::Merge => {
                self.merge_last_assignment()?;
            }
            Operation::MergeGroups { groups } => {
                self.merge_explicit_groups(groups)?;
            }
            Operation::ManualMerge { variant_ids } => {
                self.manual_merge(variant_ids)?;
            }
            Operation::ManualSplit { variant_id } => {
                self.manual_split(*variant_id)?;
            }
            Operation::CocitationFilter { markers, mode } => {
                crate::spectroscopy::cocitation_filter(self, markers, *mode)?;
            }
        }
        Ok(())
    }

    /// Compares the variant tables of two workspaces, ignoring history.
    pub fn same_variant_table(&self, other: &Workspace) -> bool {
        self.variants == other.variants
    }

    pub(crate) fn variants_mut(&mut self) -> &mut Vec<ReferenceVariant> {
        &mut self.variants
    }

    pub(crate) fn push_history(&mut self, op: Operation) {
        self.history.push(op);
    }

    pub(crate) fn set_last_assignment(&mut self, asg: Option<ClusterAssignment>) {
        self.last_assignment = asg;
    }

    pub(crate) fn merges_mut(&mut self) -> &mut BTreeMap<VariantId, Vec<MergeRecord>> {
        &mut self.merges
    }

    pub(crate) fn exclude_records(&mut self, ids: impl IntoIterator<Item = RecordId>) {
        self.excluded.extend(ids);
    }

    pub(crate) fn validate(&self) -> Result<()> {
        let known: BTreeSet<&RecordId> = self.records.iter().map(|r| &r.record_id).collect();
        if known.len() != self.records.len() {
            return Err(Error::Consistency("duplicate record ids".into()));
        }
        let mut raws = BTreeSet::new();
        for pair in self.variants.windows(2) {
            if pair[0].variant_id >= pair[1].variant_id {
                return Err(Error::Consistency("variant ids out of order".into()));
            }
        }
        for v in &self.variants {
            if v.ncr != v.citing_ids.len() || v.ncr == 0 {
                return Err(Error::Consistency(format!(
                    "variant {} has ncr {} but {} citing records",
                    v.variant_id,
                    v.ncr,
                    v.citing_ids.len()
                )));
            }
            if let Some(id) = v.citing_ids.iter().find(|id| !known.contains(id)) {
                return Err(Error::Consistency(format!(
                    "variant {} cites unknown record {id}",
                    v.variant_id
                )));
            }
            if !raws.insert(v.raw()) {
                return Err(Error::Consistency(format!(
                    "raw string of variant {} is not unique",
                    v.variant_id
                )));
            }
        }
        Ok(())
    }
}

fn aggregate_variants(
    records: &[CitingRecord],
    excluded: &BTreeSet<RecordId>,
) -> Vec<ReferenceVariant> {
    let mut by_raw: BTreeMap<&str, BTreeSet<RecordId>> = BTreeMap::new();
    for r in records.iter().filter(|r| !excluded.contains(&r.record_id)) {
        for cr in &r.raw_cr_lines {
            by_raw.entry(cr).or_default().insert(r.record_id.clone());
        }
    }
    by_raw
        .into_iter()
        .zip(1u32..)
        .map(|((raw, citing_ids), id)| ReferenceVariant {
            variant_id: VariantId(id),
            fields: parse_reference_string(raw),
            ncr: citing_ids.len(),
            citing_ids,
            cluster_id: None,
        })
        .collect()
}
