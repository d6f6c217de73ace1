//! Labels, per-scan association maps and association histories.
//!
//! An association map assigns every candidate label at one scan to a
//! measurement index (`> 0`), a misdetection (`0`) or non-existence (`-1`).
//! Maps only store explicit entries for the candidate labels of their scan,
//! i.e. the birth labels of that scan plus the labels live at the previous
//! scan. Any other label is implicitly `-1`.
//!
//! Histories serialize to a line-oriented text format, one scan per line:
//!
//! ```text
//! 0[0]:
//! 1[2]: 1/1=2,1/2=-1
//! 2[1]: 1/1=0,2/1=-1,2/2=1
//! ```
//!
//! `j[M]` is the scan index and its measurement count, and `s/i=alpha` is
//! the entry for label `(s, i)`.

use std::collections::BTreeSet;
use std::fmt;
use std::hash::{Hash, Hasher};
use std::str::FromStr;
use std::sync::Arc;

use nalgebra::Vector4;

use crate::error::{GlmbError, Result};

/// Identity of one object: birth scan and birth index.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Label {
    pub s: usize,
    pub iota: usize,
}

impl Label {
    pub const fn new(s: usize, iota: usize) -> Self {
        Label { s, iota }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.s, self.iota)
    }
}

impl FromStr for Label {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        let (a, b) = s
            .split_once('/')
            .ok_or_else(|| format!("label `{s}` is not of the form s/i"))?;
        let s_val = a.trim().parse().map_err(|e| format!("label `{s}`: {e}"))?;
        let iota = b.trim().parse().map_err(|e| format!("label `{s}`: {e}"))?;
        Ok(Label::new(s_val, iota))
    }
}

/// Association map of a single scan.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct AssociationMap {
    scan: usize,
    m_count: usize,
    /// Sorted by label, labels unique.
    entries: Vec<(Label, i32)>,
}

impl AssociationMap {
    pub fn new(scan: usize, m_count: usize) -> Self {
        AssociationMap {
            scan,
            m_count,
            entries: Vec::new(),
        }
    }

    /// Builds a map from arbitrary entries. Later duplicates overwrite earlier ones.
    pub fn from_entries<I>(scan: usize, m_count: usize, entries: I) -> Self
    where
        I: IntoIterator<Item = (Label, i32)>,
    {
        let mut map = AssociationMap::new(scan, m_count);
        for (label, alpha) in entries {
            map.set(label, alpha);
        }
        map
    }

    pub fn scan(&self) -> usize {
        self.scan
    }

    pub fn m_count(&self) -> usize {
        self.m_count
    }

    pub fn entries(&self) -> &[(Label, i32)] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Value of the map at `label`; labels without an entry map to `-1`.
    pub fn get(&self, label: Label) -> i32 {
        match self.entries.binary_search_by(|(l, _)| l.cmp(&label)) {
            Ok(i) => self.entries[i].1,
            Err(_) => -1,
        }
    }

    pub fn contains(&self, label: Label) -> bool {
        self.entries.binary_search_by(|(l, _)| l.cmp(&label)).is_ok()
    }

    pub fn set(&mut self, label: Label, alpha: i32) {
        match self.entries.binary_search_by(|(l, _)| l.cmp(&label)) {
            Ok(i) => self.entries[i].1 = alpha,
            Err(i) => self.entries.insert(i, (label, alpha)),
        }
    }

    pub fn remove(&mut self, label: Label) -> Option<i32> {
        match self.entries.binary_search_by(|(l, _)| l.cmp(&label)) {
            Ok(i) => Some(self.entries.remove(i).1),
            Err(_) => None,
        }
    }

    /// Labels with a non-negative value, in label order.
    pub fn live(&self) -> impl Iterator<Item = Label> + '_ {
        self.entries
            .iter()
            .filter(|(_, a)| *a >= 0)
            .map(|(l, _)| *l)
    }

    /// Measurement indices already claimed, excluding the entry of `skip`.
    pub fn used_measurements(&self, skip: Label) -> Vec<i32> {
        self.entries
            .iter()
            .filter(|(l, a)| *l != skip && *a > 0)
            .map(|(_, a)| *a)
            .collect()
    }

    /// True when no two labels share a positive value.
    pub fn is_positive_one_to_one(&self) -> bool {
        let mut seen: Vec<i32> = self.entries.iter().map(|e| e.1).filter(|a| *a > 0).collect();
        let n = seen.len();
        seen.sort_unstable();
        seen.dedup();
        seen.len() == n
    }
}

/// The set of labels live under `map`.
pub fn live_labels(map: &AssociationMap) -> BTreeSet<Label> {
    map.live().collect()
}

/// Sequence of association maps for scans `0..=k`. Scan 0 never has live labels.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub struct AssociationHistory {
    maps: Vec<Arc<AssociationMap>>,
}

impl Default for AssociationHistory {
    fn default() -> Self {
        AssociationHistory::new()
    }
}

impl AssociationHistory {
    /// History holding only the empty scan-0 map.
    pub fn new() -> Self {
        AssociationHistory {
            maps: vec![Arc::new(AssociationMap::new(0, 0))],
        }
    }

    pub fn from_maps(maps: Vec<AssociationMap>) -> Self {
        AssociationHistory {
            maps: maps.into_iter().map(Arc::new).collect(),
        }
    }

    pub(crate) fn from_shared(maps: Vec<Arc<AssociationMap>>) -> Self {
        AssociationHistory { maps }
    }

    pub(crate) fn shared_maps(&self) -> &[Arc<AssociationMap>] {
        &self.maps
    }

    /// Index of the last scan.
    pub fn last_scan(&self) -> usize {
        self.maps.len().saturating_sub(1)
    }

    pub fn map(&self, j: usize) -> &AssociationMap {
        &self.maps[j]
    }

    pub fn maps(&self) -> impl Iterator<Item = &AssociationMap> {
        self.maps.iter().map(|m| m.as_ref())
    }

    pub fn push(&mut self, map: AssociationMap) {
        self.maps.push(Arc::new(map));
    }

    /// `gamma_j(label)`, `-1` beyond the history.
    pub fn get(&self, j: usize, label: Label) -> i32 {
        self.maps.get(j).map_or(-1, |m| m.get(label))
    }

    pub fn fingerprint(&self) -> u64 {
        let mut h = std::collections::hash_map::DefaultHasher::new();
        for m in &self.maps {
            m.hash(&mut h);
        }
        h.finish()
    }

    /// Every label that is live at some scan.
    pub fn labels_ever_live(&self) -> BTreeSet<Label> {
        self.maps.iter().flat_map(|m| m.live()).collect()
    }
}

/// First and last scans at which `ell` is live, or `None` if it never is.
pub fn lifespan(gamma: &AssociationHistory, ell: Label) -> Option<(usize, usize)> {
    let mut span: Option<(usize, usize)> = None;
    for (j, map) in gamma.maps.iter().enumerate() {
        if map.get(ell) >= 0 {
            span = Some(match span {
                None => (j, j),
                Some((s, _)) => (s, j),
            });
        }
    }
    span
}

/// Checks the structural validity of a history: scan numbering, value ranges,
/// positive 1-1 maps, domains restricted to births plus previously live
/// labels, and dead labels staying dead.
pub fn validate_history(gamma: &AssociationHistory) -> bool {
    check_history(gamma).is_ok()
}

/// Like [`validate_history`] but reports the first violation found.
pub fn check_history(gamma: &AssociationHistory) -> std::result::Result<(), String> {
    let Some(first) = gamma.maps.first() else {
        return Err("history has no scan-0 map".into());
    };
    if first.live().next().is_some() {
        return Err("scan 0 has live labels".into());
    }
    for (j, map) in gamma.maps.iter().enumerate() {
        if map.scan != j {
            return Err(format!("map at position {j} carries scan {}", map.scan));
        }
        for &(label, alpha) in &map.entries {
            if alpha < -1 || alpha > map.m_count as i32 {
                return Err(format!("scan {j}: {label}={alpha} out of range -1..={}", map.m_count));
            }
            if j == 0 {
                continue;
            }
            let in_domain = label.s == j || (label.s < j && gamma.maps[j - 1].get(label) >= 0);
            if !in_domain {
                return Err(format!("scan {j}: {label} is outside the candidate domain"));
            }
        }
        if !map.is_positive_one_to_one() {
            return Err(format!("scan {j}: map is not positive 1-1"));
        }
    }
    Ok(())
}

impl fmt::Display for AssociationMap {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}[{}]:", self.scan, self.m_count)?;
        for (i, (label, alpha)) in self.entries.iter().enumerate() {
            let sep = if i == 0 { " " } else { "," };
            write!(f, "{sep}{label}={alpha}")?;
        }
        Ok(())
    }
}

impl FromStr for AssociationMap {
    type Err = String;

    fn from_str(line: &str) -> std::result::Result<Self, Self::Err> {
        let (head, body) = line
            .split_once(':')
            .ok_or_else(|| "missing `:` after scan header".to_string())?;
        let head = head.trim();
        let (scan, m_count) = head
            .strip_suffix(']')
            .and_then(|h| h.split_once('['))
            .ok_or_else(|| format!("bad scan header `{head}`"))?;
        let scan: usize = scan.parse().map_err(|e| format!("scan index: {e}"))?;
        let m_count: usize = m_count.parse().map_err(|e| format!("measurement count: {e}"))?;
        let mut map = AssociationMap::new(scan, m_count);
        for item in body.split(',').map(str::trim).filter(|s| !s.is_empty()) {
            let (label, alpha) = item
                .split_once('=')
                .ok_or_else(|| format!("entry `{item}` lacks `=`"))?;
            let label: Label = label.parse()?;
            let alpha: i32 = alpha.trim().parse().map_err(|e| format!("entry `{item}`: {e}"))?;
            if map.contains(label) {
                return Err(format!("duplicate entry for {label}"));
            }
            map.set(label, alpha);
        }
        Ok(map)
    }
}

impl fmt::Display for AssociationHistory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for map in &self.maps {
            writeln!(f, "{map}")?;
        }
        Ok(())
    }
}

impl FromStr for AssociationHistory {
    type Err = GlmbError;

    fn from_str(text: &str) -> Result<Self> {
        let mut maps = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let map = line.parse::<AssociationMap>().map_err(|message| GlmbError::Parse {
                line: i + 1,
                message,
            })?;
            maps.push(map);
        }
        Ok(AssociationHistory::from_maps(maps))
    }
}

/// Labeled multi-object state at one scan.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct LabeledStateSet {
    pub scan: usize,
    items: Vec<(Vector4<f64>, Label)>,
}

impl LabeledStateSet {
    pub fn new(scan: usize) -> Self {
        LabeledStateSet {
            scan,
            items: Vec::new(),
        }
    }

    /// Adds a labeled state; rejects a label that is already present.
    pub fn insert(&mut self, state: Vector4<f64>, label: Label) -> Result<()> {
        if self.items.iter().any(|(_, l)| *l == label) {
            return Err(GlmbError::InvalidArgument(format!(
                "label {label} already present at scan {}",
                self.scan
            )));
        }
        self.items.push((state, label));
        Ok(())
    }

    pub fn items(&self) -> &[(Vector4<f64>, Label)] {
        &self.items
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn labels(&self) -> impl Iterator<Item = Label> + '_ {
        self.items.iter().map(|(_, l)| *l)
    }

    pub fn get(&self, label: Label) -> Option<&Vector4<f64>> {
        self.items.iter().find(|(_, l)| *l == label).map(|(x, _)| x)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn l(s: usize, i: usize) -> Label {
        Label::new(s, i)
    }

    #[test]
    fn live_labels_of_empty_map() {
        assert!(live_labels(&AssociationMap::new(3, 2)).is_empty());
    }

    #[test]
    fn live_labels_filters_nonnegative() {
        let map = AssociationMap::from_entries(1, 3, [(l(1, 1), 0), (l(1, 2), -1), (l(1, 3), 2)]);
        let live: Vec<_> = live_labels(&map).into_iter().collect();
        assert_eq!(live, vec![l(1, 1), l(1, 3)]);
    }

    proptest! {
        #[test]
        fn live_labels_match_direct_filter(values in proptest::collection::vec(-1i32..=3, 5)) {
            let entries: Vec<_> = values.iter().enumerate().map(|(i, &a)| (l(2, i + 1), a)).collect();
            let map = AssociationMap::from_entries(2, 3, entries.clone());
            let mut expected = BTreeSet::new();
            for (label, a) in &entries {
                if *a >= 0 {
                    expected.insert(*label);
                }
            }
            prop_assert_eq!(live_labels(&map), expected);
        }
    }

    #[test]
    fn empty_history_is_valid() {
        let mut h = AssociationHistory::new();
        h.push(AssociationMap::new(1, 0));
        h.push(AssociationMap::new(2, 4));
        assert!(validate_history(&h));
    }

    #[test]
    fn shared_measurement_is_invalid() {
        let mut h = AssociationHistory::new();
        h.push(AssociationMap::from_entries(1, 3, [(l(1, 1), 3), (l(1, 2), 3)]));
        assert!(!validate_history(&h));
    }

    #[test]
    fn resurrection_is_invalid() {
        let mut h = AssociationHistory::new();
        for j in 1..=4 {
            h.push(AssociationMap::from_entries(j, 2, [(l(1, 1), 0)]));
        }
        h.push(AssociationMap::from_entries(5, 2, [(l(1, 1), -1)]));
        assert!(validate_history(&h));
        h.push(AssociationMap::from_entries(6, 2, [(l(1, 1), 2)]));
        assert!(!validate_history(&h));
    }

    #[test]
    fn out_of_range_value_is_invalid() {
        let mut h = AssociationHistory::new();
        h.push(AssociationMap::from_entries(1, 1, [(l(1, 1), 2)]));
        assert!(!validate_history(&h));
    }

    #[test]
    fn future_label_is_invalid() {
        let mut h = AssociationHistory::new();
        h.push(AssociationMap::from_entries(1, 1, [(l(2, 1), -1)]));
        assert!(!validate_history(&h));
    }

    #[test]
    fn lifespan_of_contiguous_label() {
        let mut h = AssociationHistory::new();
        for j in 1..=9 {
            let alpha = if (3..=7).contains(&j) { 0 } else { -1 };
            h.push(AssociationMap::from_entries(j, 0, [(l(3, 1), alpha)]));
        }
        assert_eq!(lifespan(&h, l(3, 1)), Some((3, 7)));
        assert_eq!(lifespan(&h, l(4, 1)), None);
    }

    proptest! {
        #[test]
        fn lifespan_matches_linear_scan(values in proptest::collection::vec(-1i32..=1, 1..12)) {
            let ell = l(1, 1);
            let mut h = AssociationHistory::new();
            for (i, a) in values.iter().enumerate() {
                h.push(AssociationMap::from_entries(i + 1, 1, [(ell, *a)]));
            }
            let mut first = None;
            let mut last = None;
            for j in 0..=h.last_scan() {
                if h.get(j, ell) >= 0 {
                    if first.is_none() {
                        first = Some(j);
                    }
                    last = Some(j);
                }
            }
            prop_assert_eq!(lifespan(&h, ell), first.zip(last));
        }

        #[test]
        fn lifespan_extends_monotonically(len in 1usize..8) {
            let ell = l(1, 1);
            let mut h = AssociationHistory::new();
            for j in 1..=len {
                h.push(AssociationMap::from_entries(j, 0, [(ell, 0)]));
            }
            let (s, _) = lifespan(&h, ell).unwrap();
            h.push(AssociationMap::from_entries(len + 1, 0, [(ell, 0)]));
            prop_assert_eq!(lifespan(&h, ell), Some((s, len + 1)));
        }
    }

    #[test]
    fn text_format_round_trips() {
        let mut h = AssociationHistory::new();
        h.push(AssociationMap::from_entries(1, 2, [(l(1, 1), 2), (l(1, 2), -1)]));
        h.push(AssociationMap::from_entries(2, 1, [(l(1, 1), 0), (l(2, 1), -1), (l(2, 2), 1)]));
        let text = h.to_string();
        assert_eq!(text, "0[0]:\n1[2]: 1/1=2,1/2=-1\n2[1]: 1/1=0,2/1=-1,2/2=1\n");
        let parsed: AssociationHistory = text.parse().unwrap();
        assert_eq!(parsed, h);
    }

    #[test]
    fn parse_rejects_garbage() {
        let err = "0[0]:\n1[2] 1/1=2".parse::<AssociationHistory>().unwrap_err();
        assert!(matches!(err, GlmbError::Parse { line: 2, .. }));
    }

    #[test]
    fn labeled_state_set_rejects_duplicate_labels() {
        let mut set = LabeledStateSet::new(4);
        set.insert(Vector4::zeros(), l(1, 1)).unwrap();
        assert!(set.insert(Vector4::zeros(), l(1, 1)).is_err());
        assert_eq!(set.len(), 1);
    }
}
