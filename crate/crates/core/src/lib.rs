//! Simulation and analysis of a time-multiplexed minimum-error receiver for
//! single-photon states encoded jointly in polarization and frequency.
//!
//! The receiver couples a polarization qubit to arrival time by cycling the
//! photon through an optical loop with a partially reflective beam splitter,
//! then splits each loop pass into two time bins with a frequency-selective
//! delay. This crate provides:
//!
//! * [`jones`]: exact complex 2x2 Jones calculus (waveplates, rotations),
//! * [`optics`]: parameterized models of the physical components,
//! * [`receiver`]: forward simulation of detection-time distributions,
//! * [`discrimination`]: Bayes posteriors, guess rules, the geometric
//!   uniform-state bound and a square-root-measurement oracle,
//! * [`calibration`]: waveplate fitting and derivative-free receiver tuning,
//! * [`montecarlo`]: uncertainty propagation with a counter-based RNG.
//!
//! The crate is `no_std` (with `alloc`); all transcendental functions go
//! through [`libm`] so results are bit-identical across platforms.

#![cfg_attr(not(any(feature = "std", test)), no_std)]

extern crate alloc;

pub mod calibration;
pub mod discrimination;
mod fm;
pub mod jones;
pub mod montecarlo;
pub mod optics;
pub mod receiver;
pub mod rng;

pub use jones::{hwp, qwp, rotation_s3, JonesMatrix, PolVector, C64};
pub use optics::{
    bs_amplitudes, timing_report, waveplate_set_unitary, BSParams, FrequencyLabel, ReceiverParams,
    TimingConfig, TimingReport, VBGParams, WaveplateSet,
};
pub use receiver::{
    canonical_ensemble, collected_fraction, condition_on_detection, simulate_distribution,
    Polarization, ProbabilityTable, QuquartState, StateEnsemble,
};
pub use discrimination::{
    argmax_guess_probability, assign_guesses, average_guess_probability, bayes_posteriors,
    gus_bound, srm_oracle, GuessAssignment, PosteriorTable,
};
pub use calibration::{default_calibration, fit_unitary, optimize_receiver, OptimizationResult};
pub use montecarlo::{mc_guess_error, perturb, MCReport, UncertaintyModel};
pub use rng::CounterRng;
