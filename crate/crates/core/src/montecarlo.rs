//! Uncertainty propagation through the receiver.
//!
//! Hardware knowledge is imperfect: waveplate settings carry an angular
//! uncertainty and the beam-splitter reflectivities are known to a couple of
//! percent. This module draws perturbed parameter sets, pushes each through
//! the full simulate-discriminate pipeline, and reports the spread of the
//! average guess probability and of every per-slot posterior.
//!
//! Draw `k` depends only on `(seed, k)` through [`CounterRng`] substreams,
//! so draws may be evaluated in any order, or in parallel, and reduced to
//! the identical report bit for bit. The serial driver lives here; callers
//! that want parallelism evaluate [`mc_draw`] per index themselves and hand
//! the collected outcomes to [`report_from_draws`].

use alloc::vec;
use alloc::vec::Vec;

use thiserror::Error;

use crate::discrimination::{assign_guesses, average_guess_probability, bayes_posteriors};
use crate::fm;
use crate::optics::{ReceiverParams, WaveplateSet};
use crate::receiver::{simulate_distribution, Polarization, StateEnsemble};
use crate::rng::CounterRng;

/// Shape of the parameter perturbations.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PerturbationKind {
    /// Gaussian with the stated standard deviation (the default).
    Gaussian,
    /// Uniform with the same standard deviation (half-width `sqrt(3) sigma`).
    Uniform,
}

/// Uncertainty model: angular sigma on all six waveplate angles (radians)
/// and sigma on both reflectivities.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UncertaintyModel {
    pub sigma_angle: f64,
    pub sigma_r: f64,
    pub n_samples: usize,
    pub seed: u64,
    pub distribution: PerturbationKind,
}

impl UncertaintyModel {
    /// One degree on angles, 0.02 on reflectivities.
    pub fn standard(n_samples: usize, seed: u64) -> Self {
        Self {
            sigma_angle: 1.0_f64.to_radians(),
            sigma_r: 0.02,
            n_samples,
            seed,
            distribution: PerturbationKind::Gaussian,
        }
    }

    pub fn validate(&self) -> Result<(), MonteCarloError> {
        if self.sigma_angle < 0.0 || self.sigma_r < 0.0 {
            return Err(MonteCarloError::NegativeSigma);
        }
        if self.n_samples < 2 {
            return Err(MonteCarloError::TooFewSamples(self.n_samples));
        }
        Ok(())
    }
}

/// Spread summary over the Monte Carlo draws.
#[derive(Debug, Clone, PartialEq)]
pub struct MCReport {
    /// Mean of the average guess probability.
    pub mean: f64,
    /// Sample standard deviation of the average guess probability.
    pub std: f64,
    /// Sample standard deviation of each posterior, row-major `[state][t][pi]`.
    pub per_bin_std: Vec<f64>,
    pub n_states: usize,
    pub n_bins: usize,
    /// Draws that simulated and discriminated successfully.
    pub samples_used: usize,
    /// Draws discarded because the perturbed parameters were unusable.
    pub samples_failed: usize,
}

impl MCReport {
    pub fn per_bin_std_at(&self, state: usize, t: usize, pi: Polarization) -> f64 {
        self.per_bin_std[(state * self.n_bins + t) * 2 + pi.index()]
    }
}

/// One perturbed copy of the receiver: every waveplate angle shifted by a
/// draw of width `sigma_angle`, both reflectivities by `sigma_r` (clamped to
/// `[0, 1]`); everything else untouched.
pub fn perturb(
    params: &ReceiverParams,
    model: &UncertaintyModel,
    rng: &mut CounterRng,
) -> ReceiverParams {
    let mut draw = |sigma: f64| -> f64 {
        let unit = match model.distribution {
            PerturbationKind::Gaussian => rng.next_gaussian(),
            PerturbationKind::Uniform => rng.next_unit_variance_uniform(),
        };
        sigma * unit
    };
    let mut p = *params;
    p.prep_set = WaveplateSet::new(
        p.prep_set.q1 + draw(model.sigma_angle),
        p.prep_set.h + draw(model.sigma_angle),
        p.prep_set.q2 + draw(model.sigma_angle),
    );
    p.loop_set = WaveplateSet::new(
        p.loop_set.q1 + draw(model.sigma_angle),
        p.loop_set.h + draw(model.sigma_angle),
        p.loop_set.q2 + draw(model.sigma_angle),
    );
    p.bs.r_h = (p.bs.r_h + draw(model.sigma_r)).clamp(0.0, 1.0);
    p.bs.r_v = (p.bs.r_v + draw(model.sigma_r)).clamp(0.0, 1.0);
    p
}

/// Result of one Monte Carlo draw.
#[derive(Debug, Clone, PartialEq)]
pub struct DrawOutcome {
    pub pguess: f64,
    /// Posteriors of this draw, row-major `[state][t][pi]`.
    pub posteriors: Vec<f64>,
}

/// Evaluate draw `index`: perturb with substream `index`, simulate,
/// discriminate. `None` when the perturbed receiver is unusable (for
/// example a reflectivity pushed past its loss budget).
pub fn mc_draw(
    params: &ReceiverParams,
    ens: &StateEnsemble,
    model: &UncertaintyModel,
    index: u64,
) -> Option<DrawOutcome> {
    let mut rng = CounterRng::new(model.seed, index);
    let drawn = perturb(params, model, &mut rng);
    let table = simulate_distribution(ens, &drawn).ok()?;
    let post = bayes_posteriors(&table, &ens.priors).ok()?;
    let assign = assign_guesses(&post).ok()?;
    let pguess = average_guess_probability(&post, &table, &assign, &ens.priors);

    let n_states = table.n_states();
    let n_bins = table.n_bins();
    let mut posteriors = vec![0.0; n_states * n_bins * 2];
    for s in 0..n_states {
        for t in 0..n_bins {
            for pi in Polarization::BOTH {
                posteriors[(s * n_bins + t) * 2 + pi.index()] =
                    post.posterior(t, pi, s).unwrap_or(0.0);
            }
        }
    }
    Some(DrawOutcome { pguess, posteriors })
}

/// Reduce per-draw outcomes (in draw order) to the report. The reduction is
/// a fixed-order two-pass mean/std, so any scheduler that preserves index
/// order reproduces the serial result exactly.
pub fn report_from_draws(
    draws: &[Option<DrawOutcome>],
    n_states: usize,
    n_bins: usize,
) -> Result<MCReport, MonteCarloError> {
    let used: Vec<&DrawOutcome> = draws.iter().flatten().collect();
    let failed = draws.len() - used.len();
    if used.len() < 2 {
        return Err(MonteCarloError::TooFewSamples(used.len()));
    }
    let n = used.len() as f64;

    // two-pass mean/std shifted by the first draw, so identical draws give
    // a std of exactly zero instead of accumulated rounding noise
    let origin = used[0].pguess;
    let shift_mean = used.iter().map(|d| d.pguess - origin).sum::<f64>() / n;
    let mean = origin + shift_mean;
    let var = used
        .iter()
        .map(|d| {
            let dev = (d.pguess - origin) - shift_mean;
            dev * dev
        })
        .sum::<f64>()
        / (n - 1.0);
    let std = fm::sqrt(var);

    let cells = n_states * n_bins * 2;
    let cell_origin = &used[0].posteriors;
    let mut cell_mean = vec![0.0; cells];
    for d in &used {
        for ((acc, v), o) in cell_mean.iter_mut().zip(&d.posteriors).zip(cell_origin) {
            *acc += (v - o) / n;
        }
    }
    let mut per_bin_std = vec![0.0; cells];
    for d in &used {
        for (((acc, v), m), o) in per_bin_std
            .iter_mut()
            .zip(&d.posteriors)
            .zip(&cell_mean)
            .zip(cell_origin)
        {
            let dev = (v - o) - m;
            *acc += dev * dev;
        }
    }
    for acc in &mut per_bin_std {
        *acc = fm::sqrt(*acc / (n - 1.0));
    }

    Ok(MCReport {
        mean,
        std,
        per_bin_std,
        n_states,
        n_bins,
        samples_used: used.len(),
        samples_failed: failed,
    })
}

/// Serial Monte Carlo driver: `n_samples` draws, reduced in index order.
pub fn mc_guess_error(
    params: &ReceiverParams,
    ens: &StateEnsemble,
    model: &UncertaintyModel,
) -> Result<MCReport, MonteCarloError> {
    model.validate()?;
    params.validate().map_err(MonteCarloError::Optics)?;
    let draws: Vec<Option<DrawOutcome>> = (0..model.n_samples as u64)
        .map(|k| mc_draw(params, ens, model, k))
        .collect();
    report_from_draws(&draws, ens.len(), 2 * params.n_passes)
}

#[derive(Debug, Clone, Copy, PartialEq, Error)]
pub enum MonteCarloError {
    #[error("perturbation sigmas must be non-negative")]
    NegativeSigma,
    #[error("at least two usable samples required, got {0}")]
    TooFewSamples(usize),
    #[error(transparent)]
    Optics(#[from] crate::optics::OpticsError),
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::calibration::default_calibration;
    use crate::optics::{BSParams, VBGParams};
    use crate::receiver::canonical_ensemble;

    fn paper_like() -> ReceiverParams {
        ReceiverParams {
            bs: BSParams::new(0.26, 0.29, 0.21, 0.11),
            vbg: VBGParams::new(0.0125, 0.0055),
            ..default_calibration()
        }
    }

    #[test]
    fn zero_sigma_is_identity() {
        let model = UncertaintyModel {
            sigma_angle: 0.0,
            sigma_r: 0.0,
            ..UncertaintyModel::standard(10, 1)
        };
        let params = paper_like();
        let mut rng = CounterRng::new(1, 0);
        let p = perturb(&params, &model, &mut rng);
        assert_eq!(p, params);
    }

    #[test]
    fn perturbation_is_seed_deterministic() {
        let model = UncertaintyModel::standard(10, 99);
        let params = paper_like();
        let mut a = CounterRng::new(model.seed, 5);
        let mut b = CounterRng::new(model.seed, 5);
        assert_eq!(perturb(&params, &model, &mut a), perturb(&params, &model, &mut b));
    }

    #[test]
    fn perturbed_reflectivity_is_unbiased() {
        let model = UncertaintyModel::standard(10, 13);
        let params = paper_like();
        let n = 100_000;
        let mut sum = 0.0;
        for k in 0..n {
            let mut rng = CounterRng::new(model.seed, k);
            sum += perturb(&params, &model, &mut rng).bs.r_h;
        }
        let mean = sum / n as f64;
        // 3 sigma / sqrt(n) band around 0.26
        let band = 3.0 * 0.02 / (n as f64).sqrt();
        assert!((mean - 0.26).abs() < band, "mean {mean}");
    }

    #[test]
    fn zero_sigma_zero_std() {
        let model = UncertaintyModel {
            sigma_angle: 0.0,
            sigma_r: 0.0,
            ..UncertaintyModel::standard(16, 3)
        };
        let ens = canonical_ensemble();
        let rep = mc_guess_error(&paper_like(), &ens, &model).unwrap();
        assert_eq!(rep.std, 0.0);
        assert!(rep.per_bin_std.iter().all(|s| *s == 0.0));
        assert_eq!(rep.samples_used, 16);
    }

    #[test]
    fn report_is_bitwise_reproducible() {
        let model = UncertaintyModel::standard(64, 21);
        let ens = canonical_ensemble();
        let a = mc_guess_error(&paper_like(), &ens, &model).unwrap();
        let b = mc_guess_error(&paper_like(), &ens, &model).unwrap();
        assert_eq!(a.mean.to_bits(), b.mean.to_bits());
        assert_eq!(a.std.to_bits(), b.std.to_bits());
        assert_eq!(a.per_bin_std, b.per_bin_std);
    }

    #[test]
    fn doubling_angle_sigma_increases_spread() {
        let ens = canonical_ensemble();
        let narrow = UncertaintyModel {
            sigma_r: 0.0,
            ..UncertaintyModel::standard(128, 17)
        };
        let wide = UncertaintyModel {
            sigma_angle: 2.0 * narrow.sigma_angle,
            ..narrow
        };
        let a = mc_guess_error(&paper_like(), &ens, &narrow).unwrap();
        let b = mc_guess_error(&paper_like(), &ens, &wide).unwrap();
        assert!(b.std > a.std, "narrow {} wide {}", a.std, b.std);
    }

    #[test]
    fn draws_stay_in_unit_interval() {
        let model = UncertaintyModel::standard(64, 5);
        let ens = canonical_ensemble();
        let params = paper_like();
        for k in 0..model.n_samples as u64 {
            let d = mc_draw(&params, &ens, &model, k).unwrap();
            assert!((0.0..=1.0).contains(&d.pguess));
        }
    }

    #[test]
    fn uniform_distribution_also_works() {
        let model = UncertaintyModel {
            distribution: PerturbationKind::Uniform,
            ..UncertaintyModel::standard(32, 8)
        };
        let ens = canonical_ensemble();
        let rep = mc_guess_error(&paper_like(), &ens, &model).unwrap();
        assert!(rep.std > 0.0);
        assert_eq!(rep.samples_used + rep.samples_failed, 32);
    }

    #[test]
    fn model_validation() {
        assert!(UncertaintyModel {
            sigma_angle: -0.1,
            ..UncertaintyModel::standard(10, 0)
        }
        .validate()
        .is_err());
        assert!(UncertaintyModel::standard(1, 0).validate().is_err());
    }
}
