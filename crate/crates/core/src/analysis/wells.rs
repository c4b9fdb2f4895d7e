//! Coarse-graining of membrane trajectories into wells, hop statistics and
//! empirical escape rates.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use statrs::distribution::{Binomial, Discrete};

use super::AnalysisError;
use crate::model::{self, Region};
use crate::params::SystemParams;
use crate::sde::Trajectory;

/// Guard band as a fraction of the middle-to-side well distance.
pub const GUARD_FRACTION: f64 = 0.1;
/// Fewest middle-well exits accepted by [`direction_stats`].
pub const MIN_DIRECTION_EVENTS: usize = 20;
/// Fewest residence intervals accepted by the rate estimators.
pub const MIN_RESIDENCES: usize = 20;

const BOOTSTRAP_RESAMPLES: usize = 2000;
const BOOTSTRAP_SEED: u64 = 0x5eed_b007;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Well {
    Left,
    Middle,
    Right,
}

impl Well {
    pub fn name(self) -> &'static str {
        match self {
            Well::Left => "left",
            Well::Middle => "middle",
            Well::Right => "right",
        }
    }
}

/// Unstable and outer stable steady-state positions of a tristable system.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Separatrices {
    /// `x_u > 0`; the barriers sit at `+-x_u`.
    pub x_unstable: f64,
    /// `x_s > x_u`; the side wells sit at `+-x_s`.
    pub x_stable: f64,
}

impl Separatrices {
    pub fn from_params(params: &SystemParams) -> Result<Self, AnalysisError> {
        let signal_free = params.without_signals();
        let region = model::classify_region(&signal_free)?;
        if region.region != Region::Tristable {
            return Err(AnalysisError::NotTristable(region.region));
        }
        let roots = model::steady_state_positions(&signal_free);
        Ok(Self {
            x_unstable: roots[3],
            x_stable: roots[4],
        })
    }

    pub fn guard(&self) -> f64 {
        GUARD_FRACTION * self.x_stable
    }

    /// Well by the bare separatrices, without hysteresis.
    pub fn classify(&self, x: f64) -> Well {
        if x < -self.x_unstable {
            Well::Left
        } else if x > self.x_unstable {
            Well::Right
        } else {
            Well::Middle
        }
    }

    fn next_well(&self, current: Well, x: f64) -> Option<Well> {
        let g = self.guard();
        let xu = self.x_unstable;
        match current {
            Well::Middle if x > xu + g => Some(Well::Right),
            Well::Middle if x < -xu - g => Some(Well::Left),
            Well::Right if x < xu - g => Some(Well::Middle),
            Well::Left if x > -xu + g => Some(Well::Middle),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Transition {
    pub t: f64,
    pub from: Well,
    pub to: Well,
}

/// A complete stay in one well, bounded by two observed transitions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Residence {
    pub well: Well,
    pub start: f64,
    pub duration: f64,
    pub exit_to: Well,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Symbolization {
    pub initial: Well,
    pub transitions: Vec<Transition>,
    pub residences: Vec<Residence>,
}

impl Symbolization {
    pub fn residence_times(&self, well: Well) -> Vec<f64> {
        self.residences
            .iter()
            .filter(|r| r.well == well)
            .map(|r| r.duration)
            .collect()
    }

    pub fn transitions_between(&self, t_start: f64, t_stop: f64) -> usize {
        self.transitions
            .iter()
            .filter(|tr| tr.t >= t_start && tr.t < t_stop)
            .count()
    }
}

/// Hysteretic three-well symbolization: leaving a well requires crossing
/// its separatrix by the guard band.
pub fn symbolize(times: &[f64], x: &[f64], separatrices: &Separatrices) -> Symbolization {
    let Some(&x0) = x.first() else {
        return Symbolization {
            initial: Well::Middle,
            transitions: Vec::new(),
            residences: Vec::new(),
        };
    };
    let initial = separatrices.classify(x0);
    let mut current = initial;
    let mut entered: Option<f64> = None;
    let mut transitions = Vec::new();
    let mut residences = Vec::new();
    for (&t, &xi) in times.iter().zip(x).skip(1) {
        while let Some(next) = separatrices.next_well(current, xi) {
            if let Some(start) = entered {
                residences.push(Residence {
                    well: current,
                    start,
                    duration: t - start,
                    exit_to: next,
                });
            }
            transitions.push(Transition {
                t,
                from: current,
                to: next,
            });
            current = next;
            entered = Some(t);
        }
    }
    Symbolization {
        initial,
        transitions,
        residences,
    }
}

pub fn symbolize_trajectory(
    traj: &Trajectory,
    separatrices: &Separatrices,
) -> Symbolization {
    symbolize(&traj.times, &traj.x, separatrices)
}

/// Direction statistics of exits from the middle well.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DirectionStats {
    pub to_left: usize,
    pub to_right: usize,
    /// `(R - L) / (R + L)`.
    pub bias: f64,
    /// Two-sided exact binomial p-value against a fair coin.
    pub p_value: f64,
    /// Fraction of consecutive middle exits (within one run) that go to
    /// opposite sides. `NaN` when no run has two exits.
    pub alternation: f64,
}

pub fn direction_stats(transitions: &[Transition]) -> Result<DirectionStats, AnalysisError> {
    direction_stats_pooled(&[transitions])
}

/// Pools middle exits over independent runs; alternation is only counted
/// between exits of the same run.
pub fn direction_stats_pooled<T: AsRef<[Transition]>>(
    runs: &[T],
) -> Result<DirectionStats, AnalysisError> {
    let mut to_left = 0usize;
    let mut to_right = 0usize;
    let mut pairs = 0usize;
    let mut alternating = 0usize;
    for run in runs {
        let mut previous: Option<Well> = None;
        for tr in run.as_ref().iter().filter(|tr| tr.from == Well::Middle) {
            match tr.to {
                Well::Left => to_left += 1,
                Well::Right => to_right += 1,
                Well::Middle => continue,
            }
            if let Some(prev) = previous {
                pairs += 1;
                if prev != tr.to {
                    alternating += 1;
                }
            }
            previous = Some(tr.to);
        }
    }
    let n = to_left + to_right;
    if n < MIN_DIRECTION_EVENTS {
        return Err(AnalysisError::TooFewEvents {
            found: n,
            required: MIN_DIRECTION_EVENTS,
        });
    }
    Ok(DirectionStats {
        to_left,
        to_right,
        bias: (to_right as f64 - to_left as f64) / n as f64,
        p_value: binomial_two_sided(to_right as u64, n as u64),
        alternation: if pairs > 0 {
            alternating as f64 / pairs as f64
        } else {
            f64::NAN
        },
    })
}

fn binomial_two_sided(k: u64, n: u64) -> f64 {
    let dist = Binomial::new(0.5, n).expect("p = 0.5 is a valid probability");
    let observed = dist.pmf(k);
    let p: f64 = (0..=n)
        .map(|i| dist.pmf(i))
        .filter(|&pi| pi <= observed * (1.0 + 1e-9))
        .sum();
    p.min(1.0)
}

/// Inverse mean residence time with a bootstrap 95 % interval.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateEstimate {
    pub rate: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub n_intervals: usize,
}

impl RateEstimate {
    pub fn overlaps(&self, other: &RateEstimate) -> bool {
        self.ci_low <= other.ci_high && other.ci_low <= self.ci_high
    }
}

pub fn switching_rate(residences: &[f64]) -> Result<RateEstimate, AnalysisError> {
    if residences.len() < MIN_RESIDENCES {
        return Err(AnalysisError::TooFewEvents {
            found: residences.len(),
            required: MIN_RESIDENCES,
        });
    }
    let rate_of = |total: f64, n: usize| n as f64 / total;
    let total: f64 = residences.iter().sum();
    let n = residences.len();
    let mut rng = ChaCha8Rng::seed_from_u64(BOOTSTRAP_SEED);
    let mut samples: Vec<f64> = (0..BOOTSTRAP_RESAMPLES)
        .map(|_| {
            let s: f64 = (0..n).map(|_| residences[rng.gen_range(0..n)]).sum();
            rate_of(s, n)
        })
        .collect();
    let (ci_low, ci_high) = percentile_interval(&mut samples);
    Ok(RateEstimate {
        rate: rate_of(total, n),
        ci_low,
        ci_high,
        n_intervals: n,
    })
}

/// Exit rates from `well` split by destination: the number of exits in
/// each direction divided by the total residence time in `well`.
pub fn directional_exit_rates(
    residences: &[Residence],
    well: Well,
) -> Result<Vec<(Well, RateEstimate)>, AnalysisError> {
    let stays: Vec<&Residence> = residences.iter().filter(|r| r.well == well).collect();
    if stays.len() < MIN_RESIDENCES {
        return Err(AnalysisError::TooFewEvents {
            found: stays.len(),
            required: MIN_RESIDENCES,
        });
    }
    let mut destinations: Vec<Well> = stays.iter().map(|r| r.exit_to).collect();
    destinations.sort();
    destinations.dedup();
    let n = stays.len();
    let mut out = Vec::new();
    for dest in destinations {
        let rate = |sample: &mut dyn Iterator<Item = &Residence>| {
            let (time, count) = sample.fold((0.0, 0usize), |(t, c), r| {
                (t + r.duration, c + usize::from(r.exit_to == dest))
            });
            count as f64 / time
        };
        let point = rate(&mut stays.iter().copied());
        let mut rng = ChaCha8Rng::seed_from_u64(BOOTSTRAP_SEED);
        let mut samples: Vec<f64> = (0..BOOTSTRAP_RESAMPLES)
            .map(|_| {
                let picks: Vec<&Residence> = (0..n).map(|_| stays[rng.gen_range(0..n)]).collect();
                rate(&mut picks.into_iter())
            })
            .collect();
        let (ci_low, ci_high) = percentile_interval(&mut samples);
        out.push((
            dest,
            RateEstimate {
                rate: point,
                ci_low,
                ci_high,
                n_intervals: n,
            },
        ));
    }
    Ok(out)
}

fn percentile_interval(samples: &mut [f64]) -> (f64, f64) {
    samples.sort_by(f64::total_cmp);
    let at = |q: f64| samples[((samples.len() - 1) as f64 * q).round() as usize];
    (at(0.025), at(0.975))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn seps() -> Separatrices {
        Separatrices::from_params(&SystemParams::synchronization()).unwrap()
    }

    #[test]
    fn separatrices_from_reference_point() {
        let s = seps();
        assert!((s.x_unstable - 2.010_751_8).abs() < 1e-6);
        assert!((s.x_stable - 3.310_117_4).abs() < 1e-6);
    }

    #[test]
    fn non_tristable_params_rejected() {
        let p = SystemParams::stability_diagram(7.0);
        assert!(matches!(
            Separatrices::from_params(&p),
            Err(AnalysisError::NotTristable(Region::Bistable))
        ));
    }

    #[test]
    fn constant_series_never_switches() {
        let t: Vec<f64> = (0..100).map(f64::from).collect();
        let x = vec![3.3; 100];
        let s = symbolize(&t, &x, &seps());
        assert_eq!(s.initial, Well::Right);
        assert!(s.transitions.is_empty());
    }

    #[test]
    fn chatter_inside_guard_band_is_ignored() {
        let sep = seps();
        let t: Vec<f64> = (0..200).map(f64::from).collect();
        let x: Vec<f64> = (0..200)
            .map(|i| sep.x_unstable + if i % 2 == 0 { 0.2 } else { -0.2 })
            .collect();
        assert!(symbolize(&t, &x, &sep).transitions.is_empty());
    }

    #[test]
    fn full_excursion_produces_residences() {
        let sep = seps();
        let pattern = [0.0, 3.3, 3.3, 0.0, 0.0, -3.3, 0.0, 3.3, 0.0];
        let t: Vec<f64> = (0..pattern.len()).map(|i| i as f64).collect();
        let s = symbolize(&t, &pattern, &sep);
        let wells: Vec<(Well, Well)> = s.transitions.iter().map(|tr| (tr.from, tr.to)).collect();
        assert_eq!(
            wells,
            vec![
                (Well::Middle, Well::Right),
                (Well::Right, Well::Middle),
                (Well::Middle, Well::Left),
                (Well::Left, Well::Middle),
                (Well::Middle, Well::Right),
                (Well::Right, Well::Middle),
            ]
        );
        assert_eq!(s.residence_times(Well::Right), vec![2.0, 1.0]);
        assert_eq!(s.residence_times(Well::Middle), vec![2.0, 1.0]);
    }

    #[test]
    fn jump_across_middle_records_both_transitions() {
        let sep = seps();
        let s = symbolize(&[0.0, 1.0], &[3.3, -3.3], &sep);
        assert_eq!(s.transitions.len(), 2);
        assert_eq!(s.transitions[1].to, Well::Left);
    }

    fn exits(dirs: &[Well]) -> Vec<Transition> {
        dirs.iter()
            .enumerate()
            .flat_map(|(i, &w)| {
                let t = 2.0 * i as f64;
                [
                    Transition { t, from: Well::Middle, to: w },
                    Transition { t: t + 1.0, from: w, to: Well::Middle },
                ]
            })
            .collect()
    }

    #[test]
    fn alternating_exits() {
        let dirs: Vec<Well> = (0..40)
            .map(|i| if i % 2 == 0 { Well::Left } else { Well::Right })
            .collect();
        let st = direction_stats(&exits(&dirs)).unwrap();
        assert_eq!((st.to_left, st.to_right), (20, 20));
        assert_eq!(st.bias, 0.0);
        assert_eq!(st.alternation, 1.0);
        assert!((st.p_value - 1.0).abs() < 1e-12);
    }

    #[test]
    fn one_sided_exits_are_significant() {
        let st = direction_stats(&exits(&[Well::Right; 25])).unwrap();
        assert_eq!(st.bias, 1.0);
        assert!(st.p_value < 1e-6);
        assert_eq!(st.alternation, 0.0);
    }

    #[test]
    fn binomial_p_value_matches_direct_sum() {
        // n = 10, k = 2: P = 2 * (1 + 10 + 45) / 1024
        assert!((binomial_two_sided(2, 10) - 112.0 / 1024.0).abs() < 1e-12);
    }

    #[test]
    fn too_few_exits() {
        assert!(matches!(
            direction_stats(&exits(&[Well::Left; 19])),
            Err(AnalysisError::TooFewEvents { found: 19, .. })
        ));
    }

    #[test]
    fn rate_of_constant_residences() {
        let r = switching_rate(&[4.0; 30]).unwrap();
        assert_eq!(r.rate, 0.25);
        assert_eq!((r.ci_low, r.ci_high), (0.25, 0.25));
        assert!(switching_rate(&[1.0; 5]).is_err());
        assert!(switching_rate(&[]).is_err());
    }

    #[test]
    fn directional_rates_split_total() {
        let stays: Vec<Residence> = (0..40)
            .map(|i| Residence {
                well: Well::Middle,
                start: i as f64,
                duration: 2.0,
                exit_to: if i % 4 == 0 { Well::Left } else { Well::Right },
            })
            .collect();
        let rates = directional_exit_rates(&stays, Well::Middle).unwrap();
        assert_eq!(rates[0].0, Well::Left);
        assert!((rates[0].1.rate - 10.0 / 80.0).abs() < 1e-12);
        assert!((rates[1].1.rate - 30.0 / 80.0).abs() < 1e-12);
        assert!(rates[0].1.ci_low <= rates[0].1.rate && rates[0].1.rate <= rates[0].1.ci_high);
    }
}
