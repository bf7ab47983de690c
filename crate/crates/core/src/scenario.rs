//! Speed trajectories, fixed-length speed-profile windows and a synthetic
//! trajectory generator.

use rand::Rng;

use crate::error::{Error, Result};

/// Relative tolerance (in units of `dt`) for treating a time stamp as a grid point.
const GRID_TOL: f64 = 1e-9;

/// Time-ordered speed series of one vehicle.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    id: String,
    times: Vec<f64>,
    speeds: Vec<f64>,
}

impl Trajectory {
    pub fn new(id: impl Into<String>, times: Vec<f64>, speeds: Vec<f64>) -> Result<Self> {
        if times.len() != speeds.len() {
            return Err(Error::DimensionMismatch {
                expected: times.len(),
                got: speeds.len(),
            });
        }
        if times.is_empty() {
            return Err(Error::EmptyInput("trajectory".into()));
        }
        if times.iter().chain(&speeds).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("trajectory".into()));
        }
        if times.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidArgument(
                "trajectory times must be strictly increasing".into(),
            ));
        }
        if speeds.iter().any(|v| *v < 0.0) {
            return Err(Error::InvalidArgument("speeds must be non-negative".into()));
        }
        Ok(Self {
            id: id.into(),
            times,
            speeds,
        })
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn speeds(&self) -> &[f64] {
        &self.speeds
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn span(&self) -> f64 {
        self.times[self.times.len() - 1] - self.times[0]
    }
}

/// `n_t + 1` speeds sampled every `dt` seconds starting at `t0`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpeedProfile {
    t0: f64,
    dt: f64,
    speeds: Vec<f64>,
}

impl SpeedProfile {
    pub fn new(t0: f64, dt: f64, speeds: Vec<f64>) -> Result<Self> {
        if !(dt > 0.0) || !dt.is_finite() || !t0.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "invalid time base t0={t0}, dt={dt}"
            )));
        }
        if speeds.len() < 2 {
            return Err(Error::InvalidArgument(
                "a profile needs at least two speeds".into(),
            ));
        }
        if speeds.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("profile speeds".into()));
        }
        if speeds.iter().any(|v| *v < 0.0) {
            return Err(Error::InvalidArgument("speeds must be non-negative".into()));
        }
        Ok(Self { t0, dt, speeds })
    }

    pub fn t0(&self) -> f64 {
        self.t0
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn speeds(&self) -> &[f64] {
        &self.speeds
    }

    /// Number of intervals, one less than the number of speeds.
    pub fn n_t(&self) -> usize {
        self.speeds.len() - 1
    }

    pub fn duration(&self) -> f64 {
        self.n_t() as f64 * self.dt
    }
}

/// Cuts a trajectory into windows of `n_t + 1` speeds spaced `dt` apart,
/// advancing `stride` grid steps between windows. Speeds off the original
/// sample times are linearly interpolated.
pub fn window_profiles(
    traj: &Trajectory,
    dt: f64,
    n_t: usize,
    stride: usize,
) -> Result<Vec<SpeedProfile>> {
    if !(dt > 0.0) || !dt.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "time step must be positive, got {dt}"
        )));
    }
    if n_t == 0 || stride == 0 {
        return Err(Error::InvalidArgument(
            "n_t and stride must be positive".into(),
        ));
    }
    let span = traj.span();
    let needed = n_t as f64 * dt;
    if span < needed * (1.0 - GRID_TOL) {
        return Err(Error::TooShort { span, needed });
    }
    let steps = (span / dt + GRID_TOL).floor() as usize;
    let t0 = traj.times[0];
    let grid = resample(traj, t0, dt, steps);

    let mut out = Vec::new();
    let mut start = 0;
    while start + n_t <= steps {
        out.push(SpeedProfile::new(
            t0 + start as f64 * dt,
            dt,
            grid[start..=start + n_t].to_vec(),
        )?);
        start += stride;
    }
    Ok(out)
}

fn resample(traj: &Trajectory, t0: f64, dt: f64, steps: usize) -> Vec<f64> {
    let (times, speeds) = (&traj.times, &traj.speeds);
    let tol = GRID_TOL * dt;
    let mut j = 0;
    (0..=steps)
        .map(|k| {
            let t = t0 + k as f64 * dt;
            while j + 1 < times.len() && times[j + 1] <= t + tol {
                j += 1;
            }
            if (times[j] - t).abs() <= tol || j + 1 == times.len() {
                speeds[j]
            } else {
                let frac = (t - times[j]) / (times[j + 1] - times[j]);
                speeds[j] + frac * (speeds[j + 1] - speeds[j])
            }
        })
        .collect()
}

/// Ranges for the synthetic trajectory generator. All ranges are closed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SynthParams {
    /// m/s; speeds are clipped to this range.
    pub speed_range: (f64, f64),
    /// m/s^2; each segment draws its acceleration uniformly from here.
    pub accel_bounds: (f64, f64),
    /// Seconds; segment lengths are uniform on this range.
    pub segment_duration: (f64, f64),
}

impl Default for SynthParams {
    fn default() -> Self {
        Self {
            speed_range: (0.0, 40.0),
            accel_bounds: (-1.5, 1.5),
            segment_duration: (1.0, 4.0),
        }
    }
}

impl SynthParams {
    fn validate(&self) -> Result<()> {
        let check = |(lo, hi): (f64, f64), what: &str| {
            if !lo.is_finite() || !hi.is_finite() || lo > hi {
                Err(Error::InvalidArgument(format!(
                    "empty {what} range [{lo}, {hi}]"
                )))
            } else {
                Ok(())
            }
        };
        check(self.speed_range, "speed")?;
        check(self.accel_bounds, "acceleration")?;
        check(self.segment_duration, "segment duration")?;
        if self.speed_range.0 < 0.0 {
            return Err(Error::InvalidArgument(
                "speed range must be non-negative".into(),
            ));
        }
        if self.segment_duration.0 <= 0.0 {
            return Err(Error::InvalidArgument(
                "segment durations must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// Piecewise-constant-acceleration speed traces sampled every `dt` seconds.
pub fn synthesize_trajectories<R: Rng + ?Sized>(
    rng: &mut R,
    n_vehicles: usize,
    duration: f64,
    dt: f64,
    params: &SynthParams,
) -> Result<Vec<Trajectory>> {
    params.validate()?;
    if !(dt > 0.0) || !dt.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "time step must be positive, got {dt}"
        )));
    }
    if !(duration >= dt) || !duration.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "duration {duration} shorter than dt"
        )));
    }
    let steps = (duration / dt + GRID_TOL).floor() as usize;
    let (v_lo, v_hi) = params.speed_range;
    (0..n_vehicles)
        .map(|vehicle| {
            let mut speeds = Vec::with_capacity(steps + 1);
            let mut v = rng.random_range(v_lo..=v_hi);
            speeds.push(v);
            while speeds.len() <= steps {
                let a = rng.random_range(params.accel_bounds.0..=params.accel_bounds.1);
                let len = rng.random_range(params.segment_duration.0..=params.segment_duration.1);
                let seg_steps = ((len / dt).round() as usize).max(1);
                for _ in 0..seg_steps {
                    if speeds.len() > steps {
                        break;
                    }
                    v = (v + a * dt).clamp(v_lo, v_hi);
                    speeds.push(v);
                }
            }
            let times = (0..=steps).map(|k| k as f64 * dt).collect();
            Trajectory::new(vehicle.to_string(), times, speeds)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn series(n: usize, dt: f64, f: impl Fn(f64) -> f64) -> Trajectory {
        let times: Vec<f64> = (0..n).map(|k| k as f64 * dt).collect();
        let speeds = times.iter().map(|t| f(*t)).collect();
        Trajectory::new("v", times, speeds).unwrap()
    }

    #[test]
    fn two_non_overlapping_windows() {
        let traj = series(101, 0.1, |t| 10.0 + t);
        let profiles = window_profiles(&traj, 0.1, 50, 50).unwrap();
        assert_eq!(profiles.len(), 2);
        for p in &profiles {
            assert_eq!(p.speeds().len(), 51);
            assert!((p.duration() - 5.0).abs() < 1e-12);
        }
        assert_eq!(profiles[0].speeds(), &traj.speeds()[0..51]);
        assert_eq!(profiles[1].speeds(), &traj.speeds()[50..101]);
    }

    #[test]
    fn constant_speed_gives_constant_profiles() {
        let traj = series(300, 0.1, |_| 12.5);
        for p in window_profiles(&traj, 0.1, 50, 17).unwrap() {
            assert!(p.speeds().iter().all(|v| *v == 12.5));
        }
    }

    #[test]
    fn coarse_series_is_interpolated() {
        let traj = series(11, 1.0, |t| 2.0 * t);
        let profiles = window_profiles(&traj, 0.1, 50, 50).unwrap();
        assert_eq!(profiles.len(), 2);
        for p in &profiles {
            for (k, v) in p.speeds().iter().enumerate() {
                let t = p.t0() + k as f64 * 0.1;
                assert!((v - 2.0 * t).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn overlapping_windows() {
        let traj = series(101, 0.1, |t| t);
        assert_eq!(window_profiles(&traj, 0.1, 50, 10).unwrap().len(), 6);
    }

    #[test]
    fn too_short() {
        let traj = series(50, 0.1, |_| 1.0);
        assert!(matches!(
            window_profiles(&traj, 0.1, 50, 50),
            Err(Error::TooShort { .. })
        ));
    }

    #[test]
    fn rejects_unsorted_series() {
        assert!(Trajectory::new("x", vec![0.0, 0.2, 0.1], vec![1.0, 1.0, 1.0]).is_err());
        assert!(Trajectory::new("x", vec![0.0, 0.1], vec![1.0, -1.0]).is_err());
    }

    #[test]
    fn zero_acceleration_gives_constant_speed() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let params = SynthParams {
            accel_bounds: (0.0, 0.0),
            ..SynthParams::default()
        };
        for traj in synthesize_trajectories(&mut rng, 5, 10.0, 0.1, &params).unwrap() {
            let v0 = traj.speeds()[0];
            assert!(traj.speeds().iter().all(|v| *v == v0));
            assert_eq!(traj.len(), 101);
        }
    }

    #[test]
    fn same_seed_same_corpus() {
        let p = SynthParams::default();
        let a =
            synthesize_trajectories(&mut ChaCha8Rng::seed_from_u64(9), 4, 20.0, 0.1, &p).unwrap();
        let b =
            synthesize_trajectories(&mut ChaCha8Rng::seed_from_u64(9), 4, 20.0, 0.1, &p).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn empty_ranges_are_rejected() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let params = SynthParams {
            speed_range: (10.0, 5.0),
            ..SynthParams::default()
        };
        assert!(matches!(
            synthesize_trajectories(&mut rng, 1, 10.0, 0.1, &params),
            Err(Error::InvalidArgument(_))
        ));
    }

    proptest! {
        #[test]
        fn speeds_stay_in_range(seed in any::<u64>(), lo in 0.0..20.0f64, width in 0.0..30.0f64) {
            let params = SynthParams {
                speed_range: (lo, lo + width),
                accel_bounds: (-5.0, 5.0),
                segment_duration: (0.1, 2.0),
            };
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            for traj in synthesize_trajectories(&mut rng, 3, 15.0, 0.1, &params).unwrap() {
                prop_assert!(traj.speeds().iter().all(|v| *v >= lo && *v <= lo + width));
                // C0: no jump larger than one step of the largest acceleration
                prop_assert!(traj.speeds().windows(2).all(|w| (w[1] - w[0]).abs() <= 0.5 + 1e-12));
            }
        }

        #[test]
        fn windows_are_slices_of_the_source(seed in any::<u64>(), n_t in 1usize..40, stride in 1usize..40) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let traj = synthesize_trajectories(&mut rng, 1, 12.0, 0.1, &SynthParams::default()).unwrap().remove(0);
            for p in window_profiles(&traj, 0.1, n_t, stride).unwrap() {
                let start = (p.t0() / 0.1).round() as usize;
                prop_assert_eq!(p.speeds(), &traj.speeds()[start..=start + n_t]);
            }
        }
    }
}
