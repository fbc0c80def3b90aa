use serde::{Deserialize, Serialize};

use super::objectives::{dominates_keys, ObjectiveVector};
use crate::analysis::{FeasibilityReport, Mapping};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArchiveEntry {
    pub mapping: Mapping,
    pub objectives: ObjectiveVector,
    pub report: FeasibilityReport,
}

/// Feasible, mutually non-dominated mappings in insertion order.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ParetoArchive {
    entries: Vec<ArchiveEntry>,
}

impl ParetoArchive {
    pub fn new() -> Self {
        Self::default()
    }

    /// Insert a candidate. Infeasible candidates, candidates dominated by a
    /// member and duplicates of a member's objective vector are rejected;
    /// members dominated by an accepted candidate are evicted.
    pub fn insert(&mut self, entry: ArchiveEntry) -> bool {
        if !entry.report.is_feasible() {
            return false;
        }
        let key = entry.objectives.minimization_key();
        for e in &self.entries {
            let other = e.objectives.minimization_key();
            if other == key || dominates_keys(&other, &key) {
                return false;
            }
        }
        self.entries.retain(|e| !dominates_keys(&key, &e.objectives.minimization_key()));
        self.entries.push(entry);
        true
    }

    pub fn entries(&self) -> &[ArchiveEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Entries ordered by ascending energy, the order the run-time
    /// manager tries them in.
    pub fn sorted_by_energy(&self) -> Vec<&ArchiveEntry> {
        let mut v: Vec<&ArchiveEntry> = self.entries.iter().collect();
        v.sort_by(|a, b| a.objectives.energy.total_cmp(&b.objectives.energy));
        v
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::PeId;

    fn entry(energy: f64, min_hop: u32, feasible: bool) -> ArchiveEntry {
        let mut report = FeasibilityReport::default();
        if !feasible {
            report.violations.push(crate::analysis::Violation::Malformed("x".into()));
        }
        ArchiveEntry {
            mapping: Mapping { bind: vec![PeId(0)], route: vec![], prio: vec![0], sl: vec![] },
            objectives: ObjectiveVector {
                energy,
                msg_count: 0,
                avg_hop: f64::from(min_hop),
                min_hop,
                alloc_per_type: vec![1],
            },
            report,
        }
    }

    #[test]
    fn insertion_keeps_front() {
        let mut a = ParetoArchive::new();
        assert!(a.insert(entry(10.0, 2, true)));
        assert!(!a.insert(entry(10.0, 2, true)), "duplicate objective vector");
        assert!(!a.insert(entry(11.0, 2, true)), "dominated");
        assert!(!a.insert(entry(1.0, 9, false)), "infeasible");
        assert!(a.insert(entry(12.0, 3, true)), "trade-off");
        assert_eq!(a.len(), 2);
        assert!(a.insert(entry(5.0, 3, true)), "dominates both");
        assert_eq!(a.len(), 1);
        assert_eq!(a.entries()[0].objectives.energy, 5.0);
    }
}
