//! Finding and merging variant spellings of the same cited work.
//!
//! Variants are compared only within the same reference publication year.
//! Two variants are linked when the normalized Levenshtein similarity of
//! their author+source keys reaches the threshold and every enabled
//! constraint (volume, start page, DOI) agrees wherever both sides carry a
//! value. Clusters are the connected components of these links.

mod similarity;

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::ingest::CitedRefFields;
use crate::store::{ClusterId, MergeRecord, Operation, ReferenceVariant, VariantId, Workspace};
use crate::{Error, Result, Year};

use similarity::similarity_chars;
pub use similarity::{fold_text, levenshtein, normalize, similarity};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClusterParams {
    pub threshold: f64,
    pub use_volume: bool,
    pub use_page: bool,
    pub use_doi: bool,
}

impl Default for ClusterParams {
    fn default() -> Self {
        Self {
            threshold: 0.75,
            use_volume: true,
            use_page: true,
            use_doi: false,
        }
    }
}

impl ClusterParams {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.threshold) {
            return Err(Error::invalid(
                "threshold",
                format!("{} is outside [0, 1]", self.threshold),
            ));
        }
        Ok(())
    }

    fn compatible(&self, a: &CitedRefFields, b: &CitedRefFields) -> bool {
        fn agree(a: &Option<String>, b: &Option<String>) -> bool {
            match (a, b) {
                (Some(x), Some(y)) => x.trim() == y.trim(),
                _ => true,
            }
        }
        (!self.use_volume || agree(&a.volume, &b.volume))
            && (!self.use_page || agree(&a.start_page, &b.start_page))
            && (!self.use_doi || agree(&a.doi, &b.doi))
    }
}

/// A partition of variants into clusters. A cluster is named after its
/// smallest variant id.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClusterAssignment {
    members: BTreeMap<ClusterId, Vec<VariantId>>,
}

impl ClusterAssignment {
    /// Builds an assignment from disjoint groups.
    pub fn from_groups(groups: impl IntoIterator<Item = Vec<VariantId>>) -> Result<Self> {
        let mut seen = BTreeSet::new();
        let mut members = BTreeMap::new();
        for mut group in groups {
            group.sort_unstable();
            group.dedup();
            let Some(&first) = group.first() else {
                continue;
            };
            if let Some(dup) = group.iter().find(|id| !seen.insert(**id)) {
                return Err(Error::Consistency(format!(
                    "variant {dup} appears in two clusters"
                )));
            }
            members.insert(ClusterId(first.0), group);
        }
        Ok(Self { members })
    }

    pub fn cluster_of(&self, id: VariantId) -> Option<ClusterId> {
        self.members
            .iter()
            .find(|(_, m)| m.binary_search(&id).is_ok())
            .map(|(c, _)| *c)
    }

    pub fn clusters(&self) -> &BTreeMap<ClusterId, Vec<VariantId>> {
        &self.members
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    /// Clusters with more than one member.
    pub fn multi_member(&self) -> impl Iterator<Item = &[VariantId]> {
        self.members
            .values()
            .filter(|m| m.len() > 1)
            .map(Vec::as_slice)
    }

    fn id_map(&self) -> BTreeMap<VariantId, ClusterId> {
        self.members
            .iter()
            .flat_map(|(c, m)| m.iter().map(move |v| (*v, *c)))
            .collect()
    }
}

struct UnionFind(Vec<usize>);

impl UnionFind {
    fn new(n: usize) -> Self {
        UnionFind((0..n).collect())
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.0[x] != x {
            self.0[x] = self.0[self.0[x]];
            x = self.0[x];
        }
        x
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            let (lo, hi) = if ra < rb { (ra, rb) } else { (rb, ra) };
            self.0[hi] = lo;
        }
    }
}

struct Keyed<'a> {
    idx: usize,
    fields: &'a CitedRefFields,
    key: Vec<char>,
}

fn block_links(block: &[Keyed<'_>], p: &ClusterParams) -> Vec<(usize, usize)> {
    let mut links = Vec::new();
    for (i, a) in block.iter().enumerate() {
        for b in &block[i + 1..] {
            if !p.compatible(a.fields, b.fields) {
                continue;
            }
            let (la, lb) = (a.key.len(), b.key.len());
            let longest = la.max(lb);
            if longest > 0 {
                // distance >= length difference, so this bounds the similarity
                let bound = 1.0 - la.abs_diff(lb) as f64 / longest as f64;
                if bound < p.threshold {
                    continue;
                }
            }
            let sim = if a.key == b.key {
                1.0
            } else {
                similarity_chars(&a.key, &b.key)
            };
            if sim >= p.threshold {
                links.push((a.idx, b.idx));
            }
        }
    }
    links
}

/// Single-linkage clustering of the workspace variants, blocked by RPY.
/// Deterministic for a given workspace and parameters.
pub fn cluster(ws: &Workspace, p: &ClusterParams) -> Result<ClusterAssignment> {
    p.validate()?;
    let variants = ws.variants();
    let mut blocks: BTreeMap<Option<Year>, Vec<Keyed<'_>>> = BTreeMap::new();
    for (idx, v) in variants.iter().enumerate() {
        blocks.entry(v.rpy()).or_default().push(Keyed {
            idx,
            fields: &v.fields,
            key: normalize(&v.fields).chars().collect(),
        });
    }
    let blocks: Vec<Vec<Keyed<'_>>> = blocks.into_values().collect();

    #[cfg(feature = "parallel")]
    let links: Vec<Vec<(usize, usize)>> = {
        use rayon::prelude::*;
        blocks.par_iter().map(|b| block_links(b, p)).collect()
    };
    #[cfg(not(feature = "parallel"))]
    let links: Vec<Vec<(usize, usize)>> = blocks.iter().map(|b| block_links(b, p)).collect();

    let mut uf = UnionFind::new(variants.len());
    for (a, b) in links.into_iter().flatten() {
        uf.union(a, b);
    }
    let mut groups: BTreeMap<usize, Vec<VariantId>> = BTreeMap::new();
    for (idx, v) in variants.iter().enumerate() {
        groups.entry(uf.find(idx)).or_default().push(v.variant_id);
    }
    ClusterAssignment::from_groups(groups.into_values())
}

/// Counts of a merge run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MergeSummary {
    pub clusters_merged: usize,
    pub variants_before: usize,
    pub variants_after: usize,
}

/// Collapses every multi-member cluster into one variant.
///
/// The member with the highest NCR (ties: smallest raw string) provides the
/// merged variant's id and fields. Its citing records are the union of the
/// members', so a record citing two spellings of a work counts once.
pub fn merge(ws: &mut Workspace, asg: &ClusterAssignment) -> Result<MergeSummary> {
    let groups = checked_groups(ws, asg)?;
    let op = if ws.last_assignment() == Some(asg) {
        Operation::Merge
    } else {
        Operation::MergeGroups {
            groups: groups.clone(),
        }
    };
    let summary = merge_groups(ws, &groups, false);
    ws.set_last_assignment(None);
    ws.push_history(op);
    Ok(summary)
}

fn checked_groups(ws: &Workspace, asg: &ClusterAssignment) -> Result<Vec<Vec<VariantId>>> {
    let mut groups = Vec::new();
    for members in asg.multi_member() {
        let mut years = BTreeSet::new();
        for id in members {
            let v = ws.variant(*id).ok_or_else(|| {
                Error::Consistency(format!("cluster assignment names unknown variant {id}"))
            })?;
            years.insert(v.rpy());
        }
        if years.len() > 1 {
            return Err(Error::Consistency(format!(
                "cluster {} spans several publication years",
                members[0]
            )));
        }
        groups.push(members.to_vec());
    }
    for id in asg.clusters().values().flatten() {
        if ws.variant(*id).is_none() {
            return Err(Error::Consistency(format!(
                "cluster assignment names unknown variant {id}"
            )));
        }
    }
    Ok(groups)
}

fn pick_representative(members: &[ReferenceVariant]) -> usize {
    let mut best = 0;
    for (i, m) in members.iter().enumerate().skip(1) {
        let b = &members[best];
        if m.ncr > b.ncr || (m.ncr == b.ncr && m.raw() < b.raw()) {
            best = i;
        }
    }
    best
}

fn merge_groups(ws: &mut Workspace, groups: &[Vec<VariantId>], manual: bool) -> MergeSummary {
    let before = ws.variants().len();
    let mut table: BTreeMap<VariantId, ReferenceVariant> = std::mem::take(ws.variants_mut())
        .into_iter()
        .map(|v| (v.variant_id, v))
        .collect();
    let mut new_records = Vec::new();
    for group in groups {
        let members: Vec<ReferenceVariant> =
            group.iter().filter_map(|id| table.remove(id)).collect();
        let rep = &members[pick_representative(&members)];
        let citing_ids: BTreeSet<_> = members
            .iter()
            .flat_map(|m| m.citing_ids.iter().cloned())
            .collect();
        let merged = ReferenceVariant {
            variant_id: rep.variant_id,
            fields: rep.fields.clone(),
            ncr: citing_ids.len(),
            citing_ids,
            cluster_id: rep.cluster_id,
        };
        new_records.push((merged.variant_id, MergeRecord { manual, members }));
        table.insert(merged.variant_id, merged);
    }
    *ws.variants_mut() = table.into_values().collect();
    for (id, record) in new_records {
        ws.merges_mut().entry(id).or_default().push(record);
    }
    MergeSummary {
        clusters_merged: groups.len(),
        variants_before: before,
        variants_after: ws.variants().len(),
    }
}

impl Workspace {
    /// Clusters the variants, labels each with its cluster id and remembers
    /// the assignment for a following [`Workspace::merge_last_assignment`].
    pub fn apply_clustering(&mut self, p: &ClusterParams) -> Result<ClusterAssignment> {
        let asg = cluster(self, p)?;
        let ids = asg.id_map();
        for v in self.variants_mut() {
            v.cluster_id = ids.get(&v.variant_id).copied();
        }
        self.set_last_assignment(Some(asg.clone()));
        self.push_history(Operation::Cluster { params: *p });
        Ok(asg)
    }

    pub fn merge_last_assignment(&mut self) -> Result<MergeSummary> {
        let asg = self
            .last_assignment()
            .cloned()
            .ok_or_else(|| Error::Refused("merge before cluster".into()))?;
        merge(self, &asg)
    }

    pub(crate) fn merge_explicit_groups(
        &mut self,
        groups: &[Vec<VariantId>],
    ) -> Result<MergeSummary> {
        let asg = ClusterAssignment::from_groups(groups.iter().cloned())?;
        let groups = checked_groups(self, &asg)?;
        let summary = merge_groups(self, &groups, false);
        self.push_history(Operation::MergeGroups { groups });
        Ok(summary)
    }

    /// Merges the given variants into one. Fewer than two distinct ids is a
    /// no-op and returns `None`.
    pub fn manual_merge(&mut self, ids: &[VariantId]) -> Result<Option<VariantId>> {
        let ids: Vec<VariantId> = ids
            .iter()
            .copied()
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect();
        let mut years = BTreeSet::new();
        for id in &ids {
            let v = self
                .variant(*id)
                .ok_or_else(|| Error::invalid("variant_ids", format!("unknown variant {id}")))?;
            years.insert(v.rpy());
        }
        if ids.len() < 2 {
            return Ok(None);
        }
        if years.len() > 1 {
            let shown: Vec<String> = years
                .iter()
                .map(|y| y.map_or_else(|| "none".to_owned(), |y| y.to_string()))
                .collect();
            return Err(Error::Refused(format!(
                "variants have different publication years ({}); only references from the same year can be merged",
                shown.join(", ")
            )));
        }
        merge_groups(self, std::slice::from_ref(&ids), true);
        let merged = self
            .variants()
            .iter()
            .find(|v| ids.contains(&v.variant_id))
            .map(|v| v.variant_id)
            .expect("merged variant is in the table");
        self.push_history(Operation::ManualMerge { variant_ids: ids });
        Ok(Some(merged))
    }

    /// Undoes the most recent merge that produced `id`, restoring its
    /// members. Citations from records excluded since the merge are not
    /// restored.
    pub fn manual_split(&mut self, id: VariantId) -> Result<Vec<VariantId>> {
        if self.variant(id).is_none() {
            return Err(Error::invalid(
                "variant_id",
                format!("unknown variant {id}"),
            ));
        }
        let record = self
            .merges_mut()
            .get_mut(&id)
            .and_then(Vec::pop)
            .ok_or_else(|| Error::Refused(format!("variant {id} is not the result of a merge")))?;
        if self.merge_records(id).is_empty() {
            self.merges_mut().remove(&id);
        }
        let mut restored = Vec::new();
        let mut members = record.members;
        for m in &mut members {
            m.citing_ids.retain(|r| self.is_active(r));
            m.ncr = m.citing_ids.len();
        }
        let table = self.variants_mut();
        table.retain(|v| v.variant_id != id);
        for m in members.into_iter().filter(|m| m.ncr > 0) {
            restored.push(m.variant_id);
            table.push(m);
        }
        table.sort_by_key(|v| v.variant_id);
        self.push_history(Operation::ManualSplit { variant_id: id });
        Ok(restored)
    }
}
