use std::cmp::Reverse;
use std::collections::{BinaryHeap, HashSet};

use super::Candidate;
use crate::measmodel::{Location, MeasurementConfig, MeasurementKind, MeasurementSpec};
use crate::netcase::{NetworkCase, Side};
use crate::Result;

/// State variables the converter's `(P_s, Q_s)` depend on.
pub fn target_coupled(case: &NetworkCase, side: Side) -> Result<Vec<usize>> {
    let loc = Location::Converter(side);
    let specs = vec![
        MeasurementSpec::real(MeasurementKind::Ps, loc, 1.0),
        MeasurementSpec::real(MeasurementKind::Qs, loc, 1.0),
    ];
    let c = MeasurementConfig::new(case, specs)?;
    let mut t: Vec<usize> = c.dep(0).iter().chain(c.dep(1)).copied().collect();
    t.sort_unstable();
    t.dedup();
    Ok(t)
}

/// Best-first search over free sets, ordered by the number of attackable
/// measurements touching the set, then by set size, then by discovery order.
///
/// The search starts from single target-coupled variables. A set grows by
/// one variable at a time, drawn from the target-coupled variables and from
/// the variables of any non-attackable measurement that already touches the
/// set; those measurements must keep their values, so their other variables
/// are the only ones that can help satisfy them.
pub struct Enumerator<'a> {
    config: &'a MeasurementConfig,
    attackable: Vec<bool>,
    seeds: Vec<usize>,
    var_meas: Vec<Vec<usize>>,
    heap: BinaryHeap<Reverse<(usize, usize, u64, Vec<usize>)>>,
    seen: HashSet<Vec<usize>>,
    seq: u64,
    popped: usize,
    cap: usize,
    truncated: bool,
}

impl<'a> Enumerator<'a> {
    pub fn new(
        config: &'a MeasurementConfig,
        attackable: Vec<bool>,
        seeds: Vec<usize>,
        cap: usize,
    ) -> Self {
        let n = config.layout().len();
        let mut var_meas = vec![Vec::new(); n];
        for i in 0..config.len() {
            for &j in config.dep(i) {
                var_meas[j].push(i);
            }
        }
        let mut en = Self {
            config,
            attackable,
            seeds: seeds.clone(),
            var_meas,
            heap: BinaryHeap::new(),
            seen: HashSet::new(),
            seq: 0,
            popped: 0,
            cap,
            truncated: false,
        };
        for v in seeds {
            en.push(vec![v]);
        }
        en
    }

    fn related(&self, free: &[usize]) -> Vec<usize> {
        let mut rel: Vec<usize> = free
            .iter()
            .flat_map(|&j| self.var_meas[j].iter().copied())
            .filter(|&i| self.attackable[i])
            .collect();
        rel.sort_unstable();
        rel.dedup();
        rel
    }

    fn push(&mut self, free: Vec<usize>) {
        if self.seen.insert(free.clone()) {
            let bound = self.related(&free).len();
            self.seq += 1;
            self.heap.push(Reverse((bound, free.len(), self.seq, free)));
        }
    }

    fn frontier(&self, free: &[usize]) -> Vec<usize> {
        let mut out = self.seeds.clone();
        for &j in free {
            for &i in &self.var_meas[j] {
                if !self.attackable[i] {
                    out.extend_from_slice(self.config.dep(i));
                }
            }
        }
        out.sort_unstable();
        out.dedup();
        out.retain(|v| free.binary_search(v).is_err());
        out
    }

    /// Next candidate whose bound does not exceed `incumbent`, or `None`
    /// when the search is exhausted, pruned or capped.
    pub fn next(&mut self, incumbent: Option<usize>) -> Option<Candidate> {
        let Reverse((bound, _, _, free)) = self.heap.pop()?;
        if incumbent.is_some_and(|c| bound > c) {
            self.heap.clear();
            return None;
        }
        if self.popped >= self.cap {
            self.truncated = true;
            self.heap.clear();
            return None;
        }
        self.popped += 1;
        for v in self.frontier(&free) {
            let mut child = free.clone();
            let pos = child.binary_search(&v).unwrap_err();
            child.insert(pos, v);
            self.push(child);
        }
        let related = self.related(&free);
        Some(Candidate {
            free,
            related,
            bound,
        })
    }

    pub fn truncated(&self) -> bool {
        self.truncated
    }

    pub fn examined(&self) -> usize {
        self.popped
    }
}
