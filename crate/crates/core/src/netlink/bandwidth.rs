/// Offered load of periodic all-to-all stigmergy updates: every agent sends
/// `size_bytes` at `frequency_hz`, and every copy is counted where it
/// crosses the radio.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BandwidthModel {
    pub size_bytes: usize,
    pub frequency_hz: f64,
    pub n_agents: usize,
}

/// `size · frequency · N²` bytes per second.
pub fn predicted_bandwidth(m: &BandwidthModel) -> f64 {
    let n = m.n_agents as f64;
    m.size_bytes as f64 * m.frequency_hz * n * n
}
