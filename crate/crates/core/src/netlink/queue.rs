use alloc::collections::VecDeque;
use alloc::vec::Vec;

/// Fixed-capacity FIFO in front of one datapath hop.
///
/// The server handles one item at a time: service of an item begins when it
/// reaches the head (or when it arrives, if the server is idle) and it
/// departs exactly `latency` ticks later. Arrivals to a full queue are
/// dropped and counted. The item being served still occupies a place.
#[derive(Debug, Clone)]
pub struct HopQueue<T> {
    capacity: usize,
    latency: u64,
    items: VecDeque<(T, u64)>,
    /// Departure time of the last item served.
    free_at: u64,
    /// Earliest retry time after a gate refused the head.
    hold_until: u64,
    dropped: u64,
    accepted: u64,
}

impl<T> HopQueue<T> {
    pub const DEFAULT_CAPACITY: usize = 16;

    pub fn new(capacity: usize, latency: u64) -> Self {
        Self {
            capacity,
            latency,
            items: VecDeque::with_capacity(capacity.min(64)),
            free_at: 0,
            hold_until: 0,
            dropped: 0,
            accepted: 0,
        }
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn latency(&self) -> u64 {
        self.latency
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn dropped_count(&self) -> u64 {
        self.dropped
    }

    pub fn accepted_count(&self) -> u64 {
        self.accepted
    }

    /// Returns `false` (and counts a drop) when the queue is full.
    pub fn enqueue(&mut self, item: T, now: u64) -> bool {
        if self.items.len() >= self.capacity {
            self.dropped += 1;
            return false;
        }
        self.items.push_back((item, now));
        self.accepted += 1;
        true
    }

    /// Scheduled departure of the head item, if any.
    pub fn next_departure(&self) -> Option<u64> {
        self.items.front().map(|(_, enq)| {
            let start = (*enq).max(self.free_at);
            (start + self.latency).max(self.hold_until)
        })
    }

    /// Releases every item whose departure time is `<= now`, in FIFO order,
    /// paired with its departure time.
    pub fn service(&mut self, now: u64) -> Vec<(T, u64)> {
        self.service_gated(now, |_, _| true)
    }

    /// Like [`service`](Self::service), but `admit` may refuse the head; it
    /// then stays queued and is retried from the next tick on.
    pub fn service_gated(&mut self, now: u64, mut admit: impl FnMut(&T, u64) -> bool) -> Vec<(T, u64)> {
        let mut out = Vec::new();
        while let Some(depart) = self.next_departure() {
            if depart > now {
                break;
            }
            let head = &self.items.front().expect("head exists").0;
            if !admit(head, depart) {
                self.hold_until = now + 1;
                break;
            }
            let (item, _) = self.items.pop_front().expect("head exists");
            self.free_at = depart;
            out.push((item, depart));
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_message_departs_after_latency() {
        let mut q = HopQueue::new(16, 9);
        assert!(q.enqueue("m", 100));
        assert!(q.service(108).is_empty());
        assert_eq!(q.service(109), [("m", 109)]);
    }

    #[test]
    fn one_departure_per_latency_interval() {
        let mut q = HopQueue::new(16, 9);
        for i in 0..3 {
            q.enqueue(i, 0);
        }
        let out = q.service(100);
        assert_eq!(out, [(0, 9), (1, 18), (2, 27)]);
    }

    #[test]
    fn overflow_drops() {
        let mut q = HopQueue::new(2, 5);
        assert!(q.enqueue(1, 0));
        assert!(q.enqueue(2, 0));
        assert!(!q.enqueue(3, 0));
        assert_eq!(q.dropped_count(), 1);
        assert_eq!(q.len(), 2);
    }

    #[test]
    fn gate_holds_head() {
        let mut q = HopQueue::new(4, 1);
        q.enqueue('a', 0);
        q.enqueue('b', 0);
        assert!(q.service_gated(5, |_, _| false).is_empty());
        assert_eq!(q.len(), 2);
        let out = q.service_gated(6, |_, _| true);
        assert_eq!(
            out,
            [('a', 6), ('b', 7)]
                .into_iter()
                .filter(|(_, t)| *t <= 6)
                .collect::<Vec<_>>()
        );
        assert_eq!(q.service(7), [('b', 7)]);
    }

    #[test]
    fn zero_latency_passes_through() {
        let mut q = HopQueue::new(4, 0);
        q.enqueue(1, 3);
        q.enqueue(2, 3);
        assert_eq!(q.service(3), [(1, 3), (2, 3)]);
    }
}
