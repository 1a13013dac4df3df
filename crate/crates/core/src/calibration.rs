//! Receiver calibration: fitting waveplate angles to target unitaries and
//! tuning free parameters to maximize the average guess probability.
//!
//! Objectives here are smooth, low-dimensional, and cheap, so a seeded
//! multistart Nelder-Mead simplex is used throughout. Every search is a pure
//! function of its inputs and seed; ties between restarts resolve to the
//! lowest restart index, so results are reproducible to the last bit.

use alloc::vec;
use alloc::vec::Vec;

use thiserror::Error;

use crate::discrimination::{assign_guesses, average_guess_probability, bayes_posteriors};
use crate::jones::{rotation_s3, JonesMatrix};
use crate::optics::{waveplate_set_unitary, BSParams, ReceiverParams, VBGParams, WaveplateSet};
use crate::receiver::{simulate_distribution, StateEnsemble};
use crate::rng::CounterRng;

/// Outcome of a receiver optimization run.
#[derive(Debug, Clone, PartialEq)]
pub struct OptimizationResult {
    pub params: ReceiverParams,
    /// Average guess probability at `params`.
    pub objective: f64,
    /// Simplex iterations summed over restarts.
    pub iterations: usize,
    /// Whether the best restart met the spread tolerance.
    pub converged: bool,
    pub restarts_used: usize,
}

/// Which receiver parameters an optimization may move.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ParameterMask {
    pub prep_set: bool,
    pub loop_set: bool,
    pub phases: bool,
}

impl ParameterMask {
    /// All six waveplate angles free, phases fixed.
    pub const ANGLES: Self = Self {
        prep_set: true,
        loop_set: true,
        phases: false,
    };

    pub const ALL: Self = Self {
        prep_set: true,
        loop_set: true,
        phases: true,
    };

    pub fn dimension(&self) -> usize {
        let mut d = 0;
        if self.prep_set {
            d += 3;
        }
        if self.loop_set {
            d += 3;
        }
        if self.phases {
            d += 2;
        }
        d
    }

    fn pack(&self, p: &ReceiverParams) -> Vec<f64> {
        let mut x = Vec::with_capacity(self.dimension());
        if self.prep_set {
            x.extend([p.prep_set.q1, p.prep_set.h, p.prep_set.q2]);
        }
        if self.loop_set {
            x.extend([p.loop_set.q1, p.loop_set.h, p.loop_set.q2]);
        }
        if self.phases {
            x.extend([p.phase1, p.phase2]);
        }
        x
    }

    fn unpack(&self, base: &ReceiverParams, x: &[f64]) -> ReceiverParams {
        let mut p = *base;
        let mut i = 0;
        if self.prep_set {
            p.prep_set = WaveplateSet::new(x[i], x[i + 1], x[i + 2]);
            i += 3;
        }
        if self.loop_set {
            p.loop_set = WaveplateSet::new(x[i], x[i + 1], x[i + 2]);
            i += 3;
        }
        if self.phases {
            p.phase1 = x[i];
            p.phase2 = x[i + 1];
        }
        p
    }
}

/// The canonical ideal receiver.
///
/// Preparation plates at zero (the identity: input states reach the first
/// beam-splitter encounter unchanged), loop plates realizing the quarter
/// turn about the circular axis that maps `+ -> H -> - -> V -> +` (the
/// closed form `qwp(q + d/2) hwp(q + d/4) qwp(q)` at `q = 0`, `d = 3 pi/2`),
/// zero compensator phases, a symmetric lossless splitter at the design
/// reflectivity 0.275, no grating leakage, four measured passes. Simulating
/// and discriminating the canonical ensemble on it attains the `D/N` bound.
pub fn default_calibration() -> ReceiverParams {
    let pi = core::f64::consts::PI;
    ReceiverParams {
        prep_set: WaveplateSet::new(0.0, 0.0, 0.0),
        loop_set: WaveplateSet::new(0.0, 3.0 * pi / 8.0, 3.0 * pi / 4.0),
        phase1: 0.0,
        phase2: 0.0,
        bs: BSParams::symmetric_lossless(0.275),
        vbg: VBGParams::ideal(),
        n_passes: 4,
    }
}

/// Direction of the ideal loop rotation on the Poincare sphere: a quarter
/// turn about the circular axis, sense chosen so the first diagonal state
/// reaches `H` after one traversal.
pub fn ideal_loop_target() -> JonesMatrix {
    rotation_s3(3.0 * core::f64::consts::FRAC_PI_2)
}

/// Find waveplate angles realizing `target` up to global phase, to
/// phase-insensitive fidelity `1 - 1e-10` or better.
pub fn fit_unitary(target: &JonesMatrix) -> Result<WaveplateSet, CalibrationError> {
    fit_unitary_with(target, 1e-10, 24, 0x0f17_5eed)
}

/// [`fit_unitary`] with explicit residual tolerance, restart budget and seed.
pub fn fit_unitary_with(
    target: &JonesMatrix,
    tol: f64,
    max_restarts: usize,
    seed: u64,
) -> Result<WaveplateSet, CalibrationError> {
    if !target.is_unitary(1e-9) {
        return Err(CalibrationError::TargetNotUnitary);
    }
    let objective = |x: &[f64]| {
        let set = WaveplateSet::new(x[0], x[1], x[2]);
        1.0 - waveplate_set_unitary(&set).fidelity(target)
    };
    let pi = core::f64::consts::PI;
    let mut best: Option<simplex::Minimum> = None;
    for restart in 0..max_restarts.max(1) {
        let x0 = if restart == 0 {
            vec![0.0, 0.0, 0.0]
        } else {
            let mut rng = CounterRng::new(seed, restart as u64);
            vec![
                rng.next_f64() * pi,
                rng.next_f64() * pi,
                rng.next_f64() * pi,
            ]
        };
        let m = simplex::nelder_mead(&objective, &x0, 0.4, 1e-14, 400);
        let better = best.as_ref().is_none_or(|b| m.fx < b.fx);
        if better {
            best = Some(m);
        }
        if best.as_ref().unwrap().fx <= tol {
            break;
        }
    }
    let best = best.unwrap();
    if best.fx <= tol {
        Ok(WaveplateSet::new(best.x[0], best.x[1], best.x[2]).normalized())
    } else {
        Err(CalibrationError::FitDidNotConverge {
            residual: best.fx,
        })
    }
}

/// Maximize the average guess probability over the non-fixed angle
/// parameters by seeded multistart Nelder-Mead. Never returns an objective
/// below the initial point's; `converged` reports whether the winning
/// restart's simplex spread fell below `tol`.
pub fn optimize_receiver(
    initial: &ReceiverParams,
    ens: &StateEnsemble,
    mask: ParameterMask,
    tol: f64,
    max_restarts: usize,
    seed: u64,
) -> Result<OptimizationResult, CalibrationError> {
    if tol.is_nan() || tol <= 0.0 {
        return Err(CalibrationError::BadTolerance(tol));
    }
    if mask.dimension() == 0 {
        return Err(CalibrationError::NothingToOptimize);
    }
    initial.validate().map_err(CalibrationError::Optics)?;
    ens.validate()
        .map_err(|_| CalibrationError::InvalidEnsemble)?;

    let score = |params: &ReceiverParams| -> f64 {
        let table = match simulate_distribution(ens, params) {
            Ok(t) => t,
            Err(_) => return 0.0,
        };
        let post = match bayes_posteriors(&table, &ens.priors) {
            Ok(p) => p,
            Err(_) => return 0.0,
        };
        match assign_guesses(&post) {
            Ok(assign) => average_guess_probability(&post, &table, &assign, &ens.priors),
            Err(_) => 0.0,
        }
    };
    let objective = |x: &[f64]| -score(&mask.unpack(initial, x));

    let x_init = mask.pack(initial);
    let pi = core::f64::consts::PI;
    let mut iterations = 0;
    let mut best: Option<(simplex::Minimum, usize)> = None;
    for restart in 0..max_restarts.max(1) {
        let x0 = if restart == 0 {
            x_init.clone()
        } else {
            let mut rng = CounterRng::new(seed, restart as u64);
            (0..mask.dimension()).map(|_| rng.next_f64() * pi).collect()
        };
        let m = simplex::nelder_mead(&objective, &x0, 0.15, tol, 600);
        iterations += m.iterations;
        let better = best.as_ref().is_none_or(|(b, _)| m.fx < b.fx);
        if better {
            best = Some((m, restart));
        }
    }
    let (mut best, last_restart) = best.unwrap();

    // the optimizer must never lose to its own starting point
    let f_init = -score(initial);
    if f_init < best.fx {
        best.fx = f_init;
        best.x = x_init;
    }

    let params = {
        let mut p = mask.unpack(initial, &best.x);
        p.prep_set = p.prep_set.normalized();
        p.loop_set = p.loop_set.normalized();
        p
    };
    Ok(OptimizationResult {
        params,
        objective: -best.fx,
        iterations,
        converged: best.converged,
        restarts_used: last_restart + 1,
    })
}

/// Plain Nelder-Mead with the standard coefficients (reflection 1,
/// expansion 2, contraction 0.5, shrink 0.5). Deterministic: no internal
/// randomness, stable ordering on ties.
pub(crate) mod simplex {
    use alloc::vec::Vec;

    pub struct Minimum {
        pub x: Vec<f64>,
        pub fx: f64,
        pub iterations: usize,
        pub converged: bool,
    }

    pub fn nelder_mead<F: Fn(&[f64]) -> f64>(
        f: &F,
        x0: &[f64],
        step: f64,
        tol: f64,
        max_iter: usize,
    ) -> Minimum {
        let n = x0.len();
        let mut pts: Vec<Vec<f64>> = Vec::with_capacity(n + 1);
        pts.push(x0.to_vec());
        for i in 0..n {
            let mut p = x0.to_vec();
            p[i] += step;
            pts.push(p);
        }
        let mut fs: Vec<f64> = pts.iter().map(|p| f(p)).collect();

        let mut iterations = 0;
        let mut converged = false;
        while iterations < max_iter {
            iterations += 1;
            // order best..worst; stable, so equal values keep insertion order
            let mut order: Vec<usize> = (0..=n).collect();
            order.sort_by(|a, b| fs[*a].partial_cmp(&fs[*b]).unwrap_or(core::cmp::Ordering::Equal));
            let best = order[0];
            let worst = order[n];
            let second_worst = order[n - 1];

            if fs[worst] - fs[best] < tol {
                converged = true;
                break;
            }

            // centroid of all but the worst
            let mut centroid = alloc::vec![0.0; n];
            for (k, p) in pts.iter().enumerate() {
                if k != worst {
                    for (c, v) in centroid.iter_mut().zip(p) {
                        *c += v / n as f64;
                    }
                }
            }
            let blend = |a: f64| -> Vec<f64> {
                centroid
                    .iter()
                    .zip(&pts[worst])
                    .map(|(c, w)| c + a * (c - w))
                    .collect()
            };

            let reflected = blend(1.0);
            let f_r = f(&reflected);
            if f_r < fs[best] {
                let expanded = blend(2.0);
                let f_e = f(&expanded);
                if f_e < f_r {
                    pts[worst] = expanded;
                    fs[worst] = f_e;
                } else {
                    pts[worst] = reflected;
                    fs[worst] = f_r;
                }
            } else if f_r < fs[second_worst] {
                pts[worst] = reflected;
                fs[worst] = f_r;
            } else {
                let contracted = if f_r < fs[worst] {
                    blend(0.5)
                } else {
                    blend(-0.5)
                };
                let f_c = f(&contracted);
                if f_c < fs[worst].min(f_r) {
                    pts[worst] = contracted;
                    fs[worst] = f_c;
                } else {
                    // shrink toward the best vertex
                    let anchor = pts[best].clone();
                    for (k, p) in pts.iter_mut().enumerate() {
                        if k != best {
                            for (v, a) in p.iter_mut().zip(&anchor) {
                                *v = a + 0.5 * (*v - a);
                            }
                            fs[k] = f(p);
                        }
                    }
                }
            }
        }

        let mut arg = 0;
        for k in 1..=n {
            if fs[k] < fs[arg] {
                arg = k;
            }
        }
        Minimum {
            x: pts[arg].clone(),
            fx: fs[arg],
            iterations,
            converged,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Error)]
pub enum CalibrationError {
    #[error("fit target must be unitary")]
    TargetNotUnitary,
    #[error("waveplate fit did not converge (best residual {residual:e})")]
    FitDidNotConverge { residual: f64 },
    #[error("tolerance must be positive, got {0}")]
    BadTolerance(f64),
    #[error("parameter mask frees no parameters")]
    NothingToOptimize,
    #[error("ensemble is invalid")]
    InvalidEnsemble,
    #[error(transparent)]
    Optics(#[from] crate::optics::OpticsError),
}
