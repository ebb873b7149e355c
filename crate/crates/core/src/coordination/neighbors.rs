use alloc::collections::BTreeMap;
use alloc::vec::Vec;

use crate::AgentId;

/// One fused localization result about another agent.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LocResult {
    pub id: AgentId,
    pub distance_m: f64,
    pub bearing_rad: f64,
    pub confidence: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NeighborEntry {
    pub id: AgentId,
    pub distance_m: f64,
    pub bearing_rad: f64,
    pub confidence: f64,
    pub age_ticks: u64,
}

/// Relative position of every agent heard recently. Entries older than the
/// TTL disappear from snapshots.
#[derive(Debug, Clone)]
pub struct NeighborRegistry {
    ttl_ticks: u64,
    entries: BTreeMap<AgentId, (LocResult, u64)>,
}

impl NeighborRegistry {
    pub fn new(ttl_ticks: u64) -> Self {
        Self {
            ttl_ticks,
            entries: BTreeMap::new(),
        }
    }

    pub fn ttl_ticks(&self) -> u64 {
        self.ttl_ticks
    }

    pub fn update(&mut self, now: u64, result: LocResult) {
        self.entries.insert(result.id, (result, now));
    }

    pub fn get(&self, now: u64, id: AgentId) -> Option<NeighborEntry> {
        self.entries.get(&id).and_then(|(r, at)| self.fresh(now, r, *at))
    }

    pub fn snapshot(&self, now: u64) -> Vec<NeighborEntry> {
        self.entries
            .values()
            .filter_map(|(r, at)| self.fresh(now, r, *at))
            .collect()
    }

    /// Drops expired entries for good.
    pub fn prune(&mut self, now: u64) {
        let ttl = self.ttl_ticks;
        self.entries.retain(|_, (_, at)| now.saturating_sub(*at) <= ttl);
    }

    fn fresh(&self, now: u64, r: &LocResult, at: u64) -> Option<NeighborEntry> {
        let age = now.saturating_sub(at);
        (age <= self.ttl_ticks).then_some(NeighborEntry {
            id: r.id,
            distance_m: r.distance_m,
            bearing_rad: r.bearing_rad,
            confidence: r.confidence,
            age_ticks: age,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const R: LocResult = LocResult {
        id: 3,
        distance_m: 2.0,
        bearing_rad: 1.0,
        confidence: 0.9,
    };

    #[test]
    fn fresh_update_has_age_zero() {
        let mut n = NeighborRegistry::new(10);
        n.update(5, R);
        let s = n.snapshot(5);
        assert_eq!(s.len(), 1);
        assert_eq!(s[0].age_ticks, 0);
        assert_eq!(n.get(9, 3).unwrap().age_ticks, 4);
    }

    #[test]
    fn expires_after_ttl() {
        let mut n = NeighborRegistry::new(10);
        n.update(0, R);
        assert_eq!(n.snapshot(10).len(), 1);
        assert!(n.snapshot(11).is_empty());
        n.update(11, R);
        assert_eq!(n.snapshot(11).len(), 1);
        n.prune(30);
        assert!(n.get(11, 3).is_none());
    }
}
