use super::Trajectory;

/// Magnitude past which a population counts as diverged.
pub const DIVERGENCE_LIMIT: f64 = 1e15;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OutcomeReport {
    /// First sample with `x1` below the clearance threshold.
    pub clearance_time: Option<f64>,
    /// First sample after the nadir where `x1` reaches `relapse_factor` times
    /// the nadir value (and is at least the clearance threshold).
    pub relapse_time: Option<f64>,
    pub diverged: bool,
    /// `(t, x1)` at the minimum tumor burden.
    pub nadir: (f64, f64),
    /// CAR T population grew over every recorded interval of the last tenth of
    /// the run.
    pub car_t_growing: bool,
}

/// Classify a trajectory.
///
/// Panics if the trajectory has no samples.
pub fn analyze_outcome(traj: &Trajectory, clearance_threshold: f64, relapse_factor: f64) -> OutcomeReport {
    let samples = &traj.samples;
    assert!(!samples.is_empty(), "empty trajectory");

    let diverged = samples
        .iter()
        .any(|s| !s.state.is_finite() || s.state.max_abs() > DIVERGENCE_LIMIT);

    let mut nadir_idx = 0;
    for (i, s) in samples.iter().enumerate() {
        if s.state.x1 < samples[nadir_idx].state.x1 {
            nadir_idx = i;
        }
    }
    let nadir = (samples[nadir_idx].t, samples[nadir_idx].state.x1);

    let clearance_time = samples
        .iter()
        .find(|s| s.state.x1 < clearance_threshold)
        .map(|s| s.t);

    let level = (relapse_factor * nadir.1).max(clearance_threshold);
    let relapse_time = samples[nadir_idx..]
        .iter()
        .find(|s| s.state.x1 >= level)
        .map(|s| s.t);

    let t_end = samples[samples.len() - 1].t;
    let tail_from = t_end - 0.1 * (t_end - samples[0].t);
    let tail: Vec<f64> = samples
        .iter()
        .filter(|s| s.t >= tail_from)
        .map(|s| s.state.x2)
        .collect();
    let car_t_growing = tail.len() >= 2 && tail.windows(2).all(|w| w[1] > w[0]);

    OutcomeReport {
        clearance_time,
        relapse_time,
        diverged,
        nadir,
        car_t_growing,
    }
}
