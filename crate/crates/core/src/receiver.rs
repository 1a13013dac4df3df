//! Forward simulation of the time-multiplexed receiver.
//!
//! The incoming photon passes the preparation waveplates once and then meets
//! the loop-coupling beam splitter. The reflected part of that first
//! encounter leaves toward the detectors immediately; the transmitted part
//! enters the loop. On every later encounter the roles swap sides of the
//! splitter: transmission exits toward the detectors, reflection starts
//! another traversal. Exit `e` (0-based; `e` completed loop traversals)
//! therefore carries the amplitude
//!
//! ```text
//! e = 0:  R * prep * s
//! e >= 1: T * L * (R * L)^(e-1) * T * prep * s
//! ```
//!
//! with `R`/`T` the beam-splitter amplitudes and `L` the loop unitary times
//! the phase compensators and the per-traversal loss. Counting the zeroth
//! traversal as the first time bin is what reproduces the measured collected
//! fraction (about 98.5% over four exits at the design reflectivity), and
//! fixes the bin convention left open by the hardware description.
//!
//! Propagation within one pass is coherent; different passes and different
//! frequency routes land in distinct time bins and add incoherently. A
//! photon at the delayed frequency exits pass `e` into bin `2e + 1`; the
//! undelayed frequency exits into bin `2e`. Grating leakage moves the
//! leaked fraction of delayed-frequency intensity into bin `2e` of the same
//! pass. Whatever survives past the last measured pass is truncated into
//! `undetected`, together with all losses.

use alloc::vec;
use alloc::vec::Vec;

use thiserror::Error;

use crate::jones::{phase_shift, PolVector};
use crate::optics::{
    bs_amplitudes, waveplate_set_unitary, FrequencyLabel, OpticsError, ReceiverParams,
};

/// Detector polarization outcome.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Polarization {
    H,
    V,
}

impl Polarization {
    pub const BOTH: [Polarization; 2] = [Polarization::H, Polarization::V];

    #[inline]
    pub fn index(&self) -> usize {
        match self {
            Polarization::H => 0,
            Polarization::V => 1,
        }
    }
}

/// One detection slot: time bin and polarization outcome. Even bins receive
/// the undelayed frequency, odd bins the delayed one.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct BinOutcome {
    pub t: usize,
    pub pi: Polarization,
}

/// Product state of a pure polarization and a frequency label, tagged with
/// its 1-based position in the ensemble.
#[derive(Debug, Clone, PartialEq)]
pub struct QuquartState {
    pub pol: PolVector,
    pub freq: FrequencyLabel,
    pub label: usize,
}

impl QuquartState {
    pub fn new(pol: PolVector, freq: FrequencyLabel, label: usize) -> Self {
        Self { pol, freq, label }
    }

    /// `<self|other>` in the 4-dimensional product space; orthogonal
    /// frequencies never overlap.
    pub fn inner(&self, other: &Self) -> crate::jones::C64 {
        if self.freq == other.freq {
            self.pol.inner(&other.pol)
        } else {
            crate::jones::C64::new(0.0, 0.0)
        }
    }
}

/// A set of candidate states with prior probabilities.
#[derive(Debug, Clone, PartialEq)]
pub struct StateEnsemble {
    pub states: Vec<QuquartState>,
    pub priors: Vec<f64>,
}

impl StateEnsemble {
    pub fn uniform(states: Vec<QuquartState>) -> Self {
        let n = states.len();
        Self {
            states,
            priors: vec![1.0 / n as f64; n],
        }
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn validate(&self) -> Result<(), ReceiverError> {
        if self.states.is_empty() || self.states.len() != self.priors.len() {
            return Err(ReceiverError::MalformedEnsemble);
        }
        let sum: f64 = self.priors.iter().sum();
        if (sum - 1.0).abs() > 1e-12 || self.priors.iter().any(|p| *p < 0.0) {
            return Err(ReceiverError::BadPriors);
        }
        for s in &self.states {
            if (s.pol.norm_sq() - 1.0).abs() > 1e-12 {
                return Err(ReceiverError::NonNormalizedState(s.label));
            }
        }
        Ok(())
    }
}

/// The eight canonical input states: the four polarizations
/// `+, -, H, V` on each of the two frequencies, equally likely.
/// Globally non-orthogonal, orthogonal only within special pairs.
pub fn canonical_ensemble() -> StateEnsemble {
    let pols = [
        PolVector::plus(),
        PolVector::minus(),
        PolVector::horizontal(),
        PolVector::vertical(),
    ];
    let mut states = Vec::with_capacity(8);
    for (k, freq) in [FrequencyLabel::Omega1, FrequencyLabel::Omega2]
        .into_iter()
        .enumerate()
    {
        for (j, pol) in pols.iter().enumerate() {
            states.push(QuquartState::new(*pol, freq, 4 * k + j + 1));
        }
    }
    StateEnsemble::uniform(states)
}

/// Conditional detection probabilities `P({t, pi} | state)` plus, per state,
/// the probability of never being detected within the measured passes.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbabilityTable {
    n_states: usize,
    n_bins: usize,
    /// Row-major `[state][t][pi]`.
    p: Vec<f64>,
    undetected: Vec<f64>,
}

impl ProbabilityTable {
    pub fn zeros(n_states: usize, n_bins: usize) -> Self {
        Self {
            n_states,
            n_bins,
            p: vec![0.0; n_states * n_bins * 2],
            undetected: vec![0.0; n_states],
        }
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn n_bins(&self) -> usize {
        self.n_bins
    }

    #[inline]
    fn idx(&self, state: usize, t: usize, pi: Polarization) -> usize {
        debug_assert!(state < self.n_states && t < self.n_bins);
        (state * self.n_bins + t) * 2 + pi.index()
    }

    /// `P({t, pi} | state)`; `state` is 0-based here.
    pub fn get(&self, state: usize, t: usize, pi: Polarization) -> f64 {
        self.p[self.idx(state, t, pi)]
    }

    pub fn set(&mut self, state: usize, t: usize, pi: Polarization, value: f64) {
        let i = self.idx(state, t, pi);
        self.p[i] = value;
    }

    pub fn add(&mut self, state: usize, t: usize, pi: Polarization, value: f64) {
        let i = self.idx(state, t, pi);
        self.p[i] += value;
    }

    pub fn undetected(&self, state: usize) -> f64 {
        self.undetected[state]
    }

    pub fn set_undetected(&mut self, state: usize, value: f64) {
        self.undetected[state] = value;
    }

    /// Total detected probability for one state.
    pub fn detected(&self, state: usize) -> f64 {
        (0..self.n_bins)
            .flat_map(|t| Polarization::BOTH.iter().map(move |pi| self.get(state, t, *pi)))
            .sum()
    }

    /// Largest violation of `detected + undetected = 1` over states.
    pub fn conservation_defect(&self) -> f64 {
        (0..self.n_states)
            .map(|s| crate::fm::abs(self.detected(s) + self.undetected(s) - 1.0))
            .fold(0.0, f64::max)
    }

    pub fn iter_bins(&self) -> impl Iterator<Item = BinOutcome> + '_ {
        (0..self.n_bins).flat_map(|t| {
            Polarization::BOTH
                .iter()
                .map(move |pi| BinOutcome { t, pi: *pi })
        })
    }
}

/// Propagate every ensemble state through the receiver.
pub fn simulate_distribution(
    ens: &StateEnsemble,
    params: &ReceiverParams,
) -> Result<ProbabilityTable, ReceiverError> {
    ens.validate()?;
    params.validate()?;

    let prep = waveplate_set_unitary(&params.prep_set);
    let loop_op = {
        let u = waveplate_set_unitary(&params.loop_set);
        let compensated = phase_shift(params.phase2)
            .compose(&phase_shift(params.phase1))
            .compose(&u);
        compensated.scaled(crate::fm::sqrt(1.0 - params.bs.loss_loop))
    };
    let (reflect, transmit) = bs_amplitudes(&params.bs)?;

    let n_bins = 2 * params.n_passes;
    let mut table = ProbabilityTable::zeros(ens.len(), n_bins);

    for (s_idx, state) in ens.states.iter().enumerate() {
        let prepared = prep.apply(&state.pol);
        // First encounter: reflection exits, transmission enters the loop.
        let mut exit = reflect.apply(&prepared);
        let mut circulating = transmit.apply(&prepared);

        for pass in 0..params.n_passes {
            if pass > 0 {
                let at_bs = loop_op.apply(&circulating);
                exit = transmit.apply(&at_bs);
                circulating = reflect.apply(&at_bs);
            }
            if !exit.is_finite() {
                return Err(ReceiverError::NonFiniteAmplitude(state.label));
            }
            let intensity = [exit.h.norm_sqr(), exit.v.norm_sqr()];
            for pi in Polarization::BOTH {
                let i_pi = intensity[pi.index()];
                match state.freq {
                    FrequencyLabel::Omega1 => table.add(s_idx, 2 * pass, pi, i_pi),
                    FrequencyLabel::Omega2 => {
                        let ext = match pi {
                            Polarization::H => params.vbg.ext_h,
                            Polarization::V => params.vbg.ext_v,
                        };
                        table.add(s_idx, 2 * pass + 1, pi, (1.0 - ext) * i_pi);
                        if ext > 0.0 {
                            table.add(s_idx, 2 * pass, pi, ext * i_pi);
                        }
                    }
                }
            }
        }
        let undetected = (1.0 - table.detected(s_idx)).max(0.0);
        table.set_undetected(s_idx, undetected);
    }
    Ok(table)
}

/// Prior-weighted total detected probability.
///
/// For a lossless receiver this isolates the truncation of unmeasured
/// passes; with losses it also counts absorbed photons as undetected.
pub fn collected_fraction(table: &ProbabilityTable, priors: &[f64]) -> f64 {
    (0..table.n_states())
        .map(|s| priors[s] * table.detected(s))
        .sum()
}

/// Renormalize each state's row over its detected mass, so the table answers
/// "given that the photon was detected at all, where did it land".
pub fn condition_on_detection(table: &ProbabilityTable) -> Result<ProbabilityTable, ReceiverError> {
    let mut out = ProbabilityTable::zeros(table.n_states(), table.n_bins());
    for s in 0..table.n_states() {
        let detected = table.detected(s);
        if detected <= 0.0 {
            return Err(ReceiverError::ZeroDetection(s + 1));
        }
        let scale = 1.0 / detected;
        for bin in table.iter_bins() {
            out.set(s, bin.t, bin.pi, table.get(s, bin.t, bin.pi) * scale);
        }
        out.set_undetected(s, 0.0);
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Error)]
pub enum ReceiverError {
    #[error("ensemble is empty or priors/states lengths differ")]
    MalformedEnsemble,
    #[error("priors must be non-negative and sum to one")]
    BadPriors,
    #[error("state {0} is not normalized")]
    NonNormalizedState(usize),
    #[error("state {0} produced a non-finite amplitude")]
    NonFiniteAmplitude(usize),
    #[error("state {0} has zero detected probability")]
    ZeroDetection(usize),
    #[error(transparent)]
    Optics(#[from] OpticsError),
}
