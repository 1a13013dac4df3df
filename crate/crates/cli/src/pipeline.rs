//! Experimental-count analysis: load measured (or synthesized) photon
//! counts, clean them of background, form posterior tables with Poissonian
//! (and optionally Monte Carlo) errors, evaluate the average guess
//! probability on data, and compare data against a simulation.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use qsd_core::discrimination::{GuessAssignment, PosteriorTable};
use qsd_core::montecarlo::MCReport;
use qsd_core::receiver::{Polarization, ProbabilityTable};
use qsd_core::rng::CounterRng;

use crate::formats::{self, FormatError};

/// Raw photon counts per `(state, t, pi)` cell, with per-slot background
/// rates and acquisition metadata. Counts load as non-negative integers but
/// are stored as reals so background subtraction composes.
#[derive(Debug, Clone, PartialEq)]
pub struct CountTable {
    pub n_states: usize,
    pub n_bins: usize,
    counts: Vec<f64>,
    /// Background rate per slot, Hz; row-major `[t][pi]`.
    background: Vec<f64>,
    /// Acquisition time per state, s.
    pub duration_s: f64,
    /// Mean detected rate over the whole run, Hz.
    pub count_rate_hz: f64,
}

impl CountTable {
    pub fn new(n_states: usize, n_bins: usize, duration_s: f64) -> Self {
        Self {
            n_states,
            n_bins,
            counts: vec![0.0; n_states * n_bins * 2],
            background: vec![0.0; n_bins * 2],
            duration_s,
            count_rate_hz: 0.0,
        }
    }

    #[inline]
    fn idx(&self, state: usize, t: usize, pi: Polarization) -> usize {
        (state * self.n_bins + t) * 2 + pi.index()
    }

    pub fn get(&self, state: usize, t: usize, pi: Polarization) -> f64 {
        self.counts[self.idx(state, t, pi)]
    }

    pub fn set(&mut self, state: usize, t: usize, pi: Polarization, c: f64) {
        let k = self.idx(state, t, pi);
        self.counts[k] = c;
    }

    pub fn background_rate(&self, t: usize, pi: Polarization) -> f64 {
        self.background[t * 2 + pi.index()]
    }

    pub fn set_background(&mut self, rates: Vec<f64>) {
        assert_eq!(rates.len(), self.n_bins * 2);
        self.background = rates;
    }

    pub fn background(&self) -> &[f64] {
        &self.background
    }

    pub fn total(&self) -> f64 {
        self.counts.iter().sum()
    }

    fn refresh_rate(&mut self) {
        self.count_rate_hz = if self.duration_s > 0.0 {
            self.total() / (self.n_states as f64 * self.duration_s)
        } else {
            0.0
        };
    }
}

/// Load a counts CSV (plus an optional background CSV) into a table.
/// The layout is fixed at 8 states x 8 bins.
pub fn load_counts(
    counts_path: &std::path::Path,
    background_path: Option<&std::path::Path>,
    duration_s: f64,
) -> Result<CountTable, PipelineError> {
    let n_states = 8;
    let n_bins = 8;
    let text = std::fs::read_to_string(counts_path)
        .map_err(|e| PipelineError::Io(counts_path.display().to_string(), e.to_string()))?;
    let cells = formats::counts_from_csv(&text, n_states, n_bins)
        .map_err(|e| PipelineError::Schema(counts_path.display().to_string(), e))?;
    let mut table = CountTable::new(n_states, n_bins, duration_s);
    table.counts = cells;
    if let Some(bp) = background_path {
        let btext = std::fs::read_to_string(bp)
            .map_err(|e| PipelineError::Io(bp.display().to_string(), e.to_string()))?;
        let rates = formats::background_from_csv(&btext, n_bins)
            .map_err(|e| PipelineError::Schema(bp.display().to_string(), e))?;
        table.set_background(rates);
    }
    table.refresh_rate();
    Ok(table)
}

/// Subtract the per-slot background (rate times acquisition time) from
/// every state's counts, clamping at zero. Idempotent for zero background.
pub fn subtract_background(raw: &CountTable) -> CountTable {
    let mut out = raw.clone();
    for s in 0..raw.n_states {
        for t in 0..raw.n_bins {
            for pi in Polarization::BOTH {
                let expected = raw.background_rate(t, pi) * raw.duration_s;
                let cleaned = (raw.get(s, t, pi) - expected).max(0.0);
                out.set(s, t, pi, cleaned);
            }
        }
    }
    out.background = vec![0.0; raw.n_bins * 2];
    out.refresh_rate();
    out
}

/// Posteriors estimated from counts, with one-sigma errors per posterior.
#[derive(Debug, Clone)]
pub struct ExperimentalPosteriors {
    pub post: PosteriorTable,
    /// Row-major `[t][pi][state]`, aligned with the posterior layout.
    pub sigma: Vec<f64>,
    /// Poissonian part only, same layout.
    pub sigma_poisson: Vec<f64>,
}

/// Convert counts to per-slot posteriors.
///
/// With uniform priors the posterior is the count fraction within the slot;
/// general priors reweight the fractions. The Poissonian error on each
/// posterior follows from first-order propagation of `sigma_c = sqrt(c)`
/// through the ratio: `sigma_q^2 = c_i (S - c_i) / S^3` for uniform priors.
/// When a Monte Carlo report is supplied, its per-slot spread is added in
/// quadrature.
pub fn counts_to_posteriors(
    table: &CountTable,
    priors: &[f64],
    mc: Option<&MCReport>,
) -> Result<ExperimentalPosteriors, PipelineError> {
    let n = table.n_states;
    if priors.len() != n {
        return Err(PipelineError::ShapeMismatch);
    }
    if let Some(rep) = mc {
        if rep.n_states != n || rep.n_bins != table.n_bins {
            return Err(PipelineError::ShapeMismatch);
        }
    }
    let uniform = priors.iter().all(|p| (p - 1.0 / n as f64).abs() < 1e-12);
    let slots = table.n_bins * 2;
    let mut q = vec![0.0; slots * n];
    let mut evidence = vec![0.0; slots];
    let mut sigma_p = vec![0.0; slots * n];
    let grand_total: f64 = table.total();
    let mut empty = Vec::new();

    for t in 0..table.n_bins {
        for pi in Polarization::BOTH {
            let slot = t * 2 + pi.index();
            let weighted: Vec<f64> = (0..n)
                .map(|s| priors[s] * n as f64 * table.get(s, t, pi))
                .collect();
            let total: f64 = weighted.iter().sum();
            let raw_total: f64 = (0..n).map(|s| table.get(s, t, pi)).sum();
            if total <= 0.0 {
                empty.push((t, pi));
                continue;
            }
            for s in 0..n {
                q[slot * n + s] = weighted[s] / total;
                if uniform {
                    let c = table.get(s, t, pi);
                    sigma_p[slot * n + s] =
                        (c * (raw_total - c).max(0.0) / raw_total.powi(3)).sqrt();
                } else {
                    // general priors: propagate through the weighted ratio
                    let c = table.get(s, t, pi);
                    let w = priors[s] * n as f64;
                    let others = total - w * c;
                    let var = (others * w / (total * total)).powi(2) * c
                        + (0..n)
                            .filter(|j| *j != s)
                            .map(|j| {
                                let wj = priors[j] * n as f64;
                                (w * c * wj / (total * total)).powi(2) * table.get(j, t, pi)
                            })
                            .sum::<f64>();
                    sigma_p[slot * n + s] = var.sqrt();
                }
            }
            evidence[slot] = if grand_total > 0.0 {
                raw_total / grand_total
            } else {
                0.0
            };
        }
    }
    if evidence.iter().all(|e| *e == 0.0) {
        return Err(PipelineError::NoCounts);
    }

    let mut sigma = sigma_p.clone();
    if let Some(rep) = mc {
        for t in 0..table.n_bins {
            for pi in Polarization::BOTH {
                let slot = t * 2 + pi.index();
                for s in 0..n {
                    let mc_std = rep.per_bin_std_at(s, t, pi);
                    let p = sigma_p[slot * n + s];
                    sigma[slot * n + s] = (p * p + mc_std * mc_std).sqrt();
                }
            }
        }
    }

    let post = PosteriorTable::from_parts(n, table.n_bins, q, evidence)
        .map_err(|_| PipelineError::ShapeMismatch)?;
    Ok(ExperimentalPosteriors {
        post,
        sigma,
        sigma_poisson: sigma_p,
    })
}

/// Average guess probability evaluated on experimental posteriors and
/// evidence, under a guess rule taken from the matching simulation.
/// Returns the value and its propagated one-sigma error (per-slot posterior
/// errors weighted by the evidence; slots treated as independent).
pub fn experimental_pguess(
    exp: &ExperimentalPosteriors,
    assign: &GuessAssignment,
) -> (f64, f64) {
    let post = &exp.post;
    let n = post.n_states();
    let total = post.total_evidence();
    if total <= 0.0 {
        return (0.0, 0.0);
    }
    let mut hit = 0.0;
    let mut var = 0.0;
    for (s, d) in assign.duples.iter().enumerate() {
        for duple in [d.h, d.v].into_iter().flatten() {
            if let Some(q) = post.posterior(duple.t, duple.pi, s) {
                let w = post.evidence(duple.t, duple.pi) / total;
                hit += q * post.evidence(duple.t, duple.pi);
                let sq = exp.sigma[(duple.t * 2 + duple.pi.index()) * n + s];
                var += (w * sq) * (w * sq);
            }
        }
    }
    (hit / total, var.sqrt())
}

/// One per-slot, per-state deviation between data and simulation.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DeltaRow {
    pub state: usize,
    pub t: usize,
    pub pi: String,
    pub delta: f64,
    pub sigma: f64,
}

/// Data-versus-simulation comparison.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub per_bin_delta: Vec<DeltaRow>,
    /// Mean squared sigma-normalized deviation over slots with finite errors.
    pub chi2_like: f64,
    pub experimental_pguess: f64,
    pub experimental_sigma: f64,
    pub simulated_pguess: f64,
    /// `3 x experimental_sigma` (floored at 1e-9).
    pub tolerance: f64,
    /// Whether the headline numbers agree within `tolerance`.
    pub pass: bool,
}

/// Compare experimental posteriors against simulated ones.
pub fn compare(
    sim_post: &PosteriorTable,
    sim_pguess: f64,
    exp: &ExperimentalPosteriors,
    exp_pguess: (f64, f64),
) -> Result<ComparisonReport, PipelineError> {
    let n = sim_post.n_states();
    if exp.post.n_states() != n || exp.post.n_bins() != sim_post.n_bins() {
        return Err(PipelineError::ShapeMismatch);
    }
    let mut rows = Vec::new();
    let mut chi2 = 0.0;
    let mut used = 0usize;
    for t in 0..sim_post.n_bins() {
        for pi in Polarization::BOTH {
            for s in 0..n {
                let sim_q = sim_post.posterior(t, pi, s).unwrap_or(0.0);
                let exp_q = exp.post.posterior(t, pi, s).unwrap_or(0.0);
                let sigma = exp.sigma[(t * 2 + pi.index()) * n + s];
                let delta = exp_q - sim_q;
                rows.push(DeltaRow {
                    state: s + 1,
                    t,
                    pi: formats::pol_name(pi).to_string(),
                    delta,
                    sigma,
                });
                if sigma > 0.0 {
                    chi2 += (delta / sigma) * (delta / sigma);
                    used += 1;
                }
            }
        }
    }
    let chi2_like = if used > 0 { chi2 / used as f64 } else { 0.0 };
    let (exp_val, exp_sigma) = exp_pguess;
    let tolerance = (3.0 * exp_sigma).max(1e-9);
    Ok(ComparisonReport {
        per_bin_delta: rows,
        chi2_like,
        experimental_pguess: exp_val,
        experimental_sigma: exp_sigma,
        simulated_pguess: sim_pguess,
        tolerance,
        pass: (exp_val - sim_pguess).abs() <= tolerance,
    })
}

/// Draw a synthetic count table from a simulated distribution: for each
/// state, `events_per_state` photons choose a detection slot (or loss) by
/// inverse-CDF sampling on a dedicated counter-RNG substream.
pub fn synthesize_counts(
    table: &ProbabilityTable,
    events_per_state: u64,
    seed: u64,
    duration_s: f64,
) -> CountTable {
    let n_states = table.n_states();
    let n_bins = table.n_bins();
    let mut counts = CountTable::new(n_states, n_bins, duration_s);
    for s in 0..n_states {
        // cumulative distribution over the 2 * n_bins slots; the remaining
        // tail mass is the undetected fraction
        let mut cdf = Vec::with_capacity(n_bins * 2);
        let mut acc = 0.0;
        for t in 0..n_bins {
            for pi in Polarization::BOTH {
                acc += table.get(s, t, pi);
                cdf.push(acc);
            }
        }
        let mut rng = CounterRng::new(seed, s as u64);
        for _ in 0..events_per_state {
            let u = rng.next_f64();
            if u >= acc {
                continue; // undetected
            }
            let k = cdf.partition_point(|c| *c <= u);
            let t = k / 2;
            let pi = if k % 2 == 0 { Polarization::H } else { Polarization::V };
            let c = counts.get(s, t, pi);
            counts.set(s, t, pi, c + 1.0);
        }
    }
    counts.refresh_rate();
    counts
}

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("cannot read {0}: {1}")]
    Io(String, String),
    #[error("{0}: {1}")]
    Schema(String, FormatError),
    #[error("table shapes do not match")]
    ShapeMismatch,
    #[error("count table is entirely empty")]
    NoCounts,
}
