use super::LocError;

pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

const PS: f64 = 1e-12;

/// Timestamp basis of one UWB radio: an affine map from true time to a
/// quantized picosecond counter.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DeviceClock {
    pub offset_ps: i64,
    pub drift_ppm: f64,
    pub resolution_ps: i64,
}

impl Default for DeviceClock {
    fn default() -> Self {
        Self {
            offset_ps: 0,
            drift_ppm: 0.0,
            resolution_ps: 16,
        }
    }
}

impl DeviceClock {
    pub const MAX_DRIFT_PPM: f64 = 100.0;

    pub fn new(offset_ps: i64, drift_ppm: f64, resolution_ps: i64) -> Result<Self, LocError> {
        if !(libm::fabs(drift_ppm) <= Self::MAX_DRIFT_PPM) || resolution_ps < 1 {
            return Err(LocError::InvalidClock);
        }
        Ok(Self {
            offset_ps,
            drift_ppm,
            resolution_ps,
        })
    }

    fn rate(&self) -> f64 {
        1.0 + self.drift_ppm * 1e-6
    }

    /// Unquantized local reading at true time `true_ps`; strictly increasing.
    pub fn local_time(&self, true_ps: f64) -> f64 {
        self.offset_ps as f64 + true_ps * self.rate()
    }

    /// Counter value latched at true time `true_ps`.
    pub fn stamp(&self, true_ps: f64) -> i64 {
        let ticks = libm::floor(self.local_time(true_ps) / self.resolution_ps as f64);
        ticks as i64 * self.resolution_ps
    }

    /// True duration that elapses while this clock counts `local_ps`.
    pub fn true_duration(&self, local_ps: f64) -> f64 {
        local_ps / self.rate()
    }
}

/// The six timestamps of a poll / response / final exchange. Initiator
/// stamps (`poll_tx`, `resp_rx`, `final_tx`) are on the initiator clock,
/// the other three on the responder clock.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TwrExchange {
    pub t_poll_tx: i64,
    pub t_poll_rx: i64,
    pub t_resp_tx: i64,
    pub t_resp_rx: i64,
    pub t_final_tx: i64,
    pub t_final_rx: i64,
}

impl TwrExchange {
    fn is_ordered(&self) -> bool {
        self.t_poll_tx < self.t_resp_rx
            && self.t_resp_rx < self.t_final_tx
            && self.t_poll_rx < self.t_resp_tx
            && self.t_resp_tx < self.t_final_rx
    }
}

/// Asymmetric double-sided TWR distance in meters.
///
/// `tof = (Tround1·Tround2 − Treply1·Treply2) / (Tround1 + Tround2 + Treply1 + Treply2)`;
/// first-order clock drift of either side cancels out. The products are
/// formed in `i128` so no precision is lost before the final division.
pub fn ds_twr_distance(ex: &TwrExchange, c_mps: f64) -> Result<f64, LocError> {
    if !ex.is_ordered() {
        return Err(LocError::InvalidExchange);
    }
    let round1 = (ex.t_resp_rx - ex.t_poll_tx) as i128;
    let reply1 = (ex.t_resp_tx - ex.t_poll_rx) as i128;
    let round2 = (ex.t_final_rx - ex.t_resp_tx) as i128;
    let reply2 = (ex.t_final_tx - ex.t_resp_rx) as i128;
    let num = round1 * round2 - reply1 * reply2;
    let den = round1 + round2 + reply1 + reply2;
    let tof_ps = num as f64 / den as f64;
    Ok(libm::fmax(tof_ps * PS * c_mps, 0.0))
}

/// Forward-simulates an exchange over a line-of-sight path of
/// `distance_m`. The poll leaves at true time `start_ps`; each side answers
/// `reply_delay_ps` later as counted on its own clock.
pub fn synthesize_exchange(
    distance_m: f64,
    c_mps: f64,
    initiator: &DeviceClock,
    responder: &DeviceClock,
    start_ps: f64,
    reply_delay_ps: f64,
) -> TwrExchange {
    let tof = distance_m / c_mps / PS;
    let poll_tx = start_ps;
    let poll_rx = poll_tx + tof;
    let resp_tx = poll_rx + responder.true_duration(reply_delay_ps);
    let resp_rx = resp_tx + tof;
    let final_tx = resp_rx + initiator.true_duration(reply_delay_ps);
    let final_rx = final_tx + tof;
    TwrExchange {
        t_poll_tx: initiator.stamp(poll_tx),
        t_poll_rx: responder.stamp(poll_rx),
        t_resp_tx: responder.stamp(resp_tx),
        t_resp_rx: initiator.stamp(resp_rx),
        t_final_tx: initiator.stamp(final_tx),
        t_final_rx: responder.stamp(final_rx),
    }
}
