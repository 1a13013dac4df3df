//! Discrimination figures of merit.
//!
//! Given the conditional detection probabilities of a receiver, this module
//! computes Bayes posteriors per detection slot, derives the guess rule
//! (which state to announce for each slot), and evaluates the average
//! probability of a correct guess conditioned on detection. It also provides
//! two receiver-independent references: the geometrically-uniform-states
//! bound `D/N` and a square-root-measurement oracle evaluated directly in the
//! four-dimensional encoding space.

use alloc::vec;
use alloc::vec::Vec;

use thiserror::Error;

use crate::fm;
use crate::jones::C64;
use crate::receiver::{Polarization, ProbabilityTable, StateEnsemble};

/// Posteriors `P(state | {t, pi})` with the per-slot evidence that produced
/// them. Slots with zero evidence are flagged (their posteriors are unset,
/// never divided out).
#[derive(Debug, Clone, PartialEq)]
pub struct PosteriorTable {
    n_states: usize,
    n_bins: usize,
    /// Row-major `[t][pi][state]`.
    q: Vec<f64>,
    /// Prior-weighted evidence `P({t, pi})`, row-major `[t][pi]`.
    evidence: Vec<f64>,
}

impl PosteriorTable {
    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn n_bins(&self) -> usize {
        self.n_bins
    }

    #[inline]
    fn slot(&self, t: usize, pi: Polarization) -> usize {
        debug_assert!(t < self.n_bins);
        t * 2 + pi.index()
    }

    /// Posterior of `state` (0-based) given detection in `{t, pi}`;
    /// `None` for empty slots.
    pub fn posterior(&self, t: usize, pi: Polarization, state: usize) -> Option<f64> {
        if self.has_evidence(t, pi) {
            Some(self.q[self.slot(t, pi) * self.n_states + state])
        } else {
            None
        }
    }

    /// `P({t, pi})`.
    pub fn evidence(&self, t: usize, pi: Polarization) -> f64 {
        self.evidence[self.slot(t, pi)]
    }

    pub fn has_evidence(&self, t: usize, pi: Polarization) -> bool {
        self.evidence[self.slot(t, pi)] > 0.0
    }

    /// Total evidence over all slots (prior-weighted detected mass).
    pub fn total_evidence(&self) -> f64 {
        self.evidence.iter().sum()
    }

    /// Number of slots carrying no evidence at all.
    pub fn empty_slots(&self) -> usize {
        self.evidence.iter().filter(|e| **e == 0.0).count()
    }

    /// Largest violation of per-slot normalization over non-empty slots.
    pub fn normalization_defect(&self) -> f64 {
        let mut worst = 0.0f64;
        for slot in 0..self.n_bins * 2 {
            if self.evidence[slot] > 0.0 {
                let sum: f64 = self.q[slot * self.n_states..(slot + 1) * self.n_states]
                    .iter()
                    .sum();
                worst = worst.max(fm::abs(sum - 1.0));
            }
        }
        worst
    }

    /// Build a table directly from per-slot posteriors and evidence
    /// (used by the experimental-count pipeline).
    pub fn from_parts(
        n_states: usize,
        n_bins: usize,
        q: Vec<f64>,
        evidence: Vec<f64>,
    ) -> Result<Self, DiscriminationError> {
        if q.len() != n_states * n_bins * 2 || evidence.len() != n_bins * 2 {
            return Err(DiscriminationError::ShapeMismatch);
        }
        Ok(Self {
            n_states,
            n_bins,
            q,
            evidence,
        })
    }
}

/// Bayes inversion: `P(i | {t, pi}) = P({t, pi} | i) p_i / sum_j P({t, pi} | j) p_j`.
pub fn bayes_posteriors(
    table: &ProbabilityTable,
    priors: &[f64],
) -> Result<PosteriorTable, DiscriminationError> {
    let n_states = table.n_states();
    if priors.len() != n_states {
        return Err(DiscriminationError::ShapeMismatch);
    }
    if priors.iter().any(|p| *p < 0.0) || fm::abs(priors.iter().sum::<f64>() - 1.0) > 1e-9 {
        return Err(DiscriminationError::BadPriors);
    }
    let n_bins = table.n_bins();
    let mut q = vec![0.0; n_states * n_bins * 2];
    let mut evidence = vec![0.0; n_bins * 2];
    for t in 0..n_bins {
        for pi in Polarization::BOTH {
            let slot = t * 2 + pi.index();
            let total: f64 = (0..n_states)
                .map(|s| priors[s] * table.get(s, t, pi))
                .sum();
            evidence[slot] = total;
            if total > 0.0 {
                for s in 0..n_states {
                    q[slot * n_states + s] = priors[s] * table.get(s, t, pi) / total;
                }
            }
        }
    }
    PosteriorTable::from_parts(n_states, n_bins, q, evidence)
}

/// One detection slot owned by a state in the guess rule.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Duple {
    pub t: usize,
    pub pi: Polarization,
}

/// Per-state pair of owned slots, one per polarization outcome (either may
/// be absent for degenerate dynamics, but never both).
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct StateDuples {
    pub h: Option<Duple>,
    pub v: Option<Duple>,
}

/// The guess rule: the announced state for every non-empty slot, plus each
/// state's preferred slots.
#[derive(Debug, Clone, PartialEq)]
pub struct GuessAssignment {
    n_bins: usize,
    /// Row-major `[t][pi]`; `None` on empty slots.
    guess: Vec<Option<usize>>,
    /// Indexed by 0-based state.
    pub duples: Vec<StateDuples>,
}

impl GuessAssignment {
    /// Announced state (0-based) for a detection in `{t, pi}`.
    pub fn guess(&self, t: usize, pi: Polarization) -> Option<usize> {
        self.guess[t * 2 + pi.index()]
    }

    pub fn n_bins(&self) -> usize {
        self.n_bins
    }
}

/// Maximum-posterior guess per slot (ties to the lowest state index), then
/// per state the H-slot and V-slot where it wins with the highest posterior
/// (ties to the lowest bin index).
pub fn assign_guesses(post: &PosteriorTable) -> Result<GuessAssignment, DiscriminationError> {
    let n_states = post.n_states();
    let n_bins = post.n_bins();
    let mut guess = vec![None; n_bins * 2];
    let mut duples = vec![StateDuples::default(); n_states];
    let mut best = vec![[0.0f64; 2]; n_states];

    for t in 0..n_bins {
        for pi in Polarization::BOTH {
            if !post.has_evidence(t, pi) {
                continue;
            }
            let mut arg = 0usize;
            let mut top = f64::NEG_INFINITY;
            for s in 0..n_states {
                let q = post.posterior(t, pi, s).unwrap();
                if q > top {
                    top = q;
                    arg = s;
                }
            }
            guess[t * 2 + pi.index()] = Some(arg);
            let side = pi.index();
            if top > best[arg][side] {
                best[arg][side] = top;
                let duple = Some(Duple { t, pi });
                match pi {
                    Polarization::H => duples[arg].h = duple,
                    Polarization::V => duples[arg].v = duple,
                }
            }
        }
    }
    if let Some(s) = duples.iter().position(|d| d.h.is_none() && d.v.is_none()) {
        return Err(DiscriminationError::StateWithoutDuple(s + 1));
    }
    Ok(GuessAssignment {
        n_bins,
        guess,
        duples,
    })
}

/// Average probability of a correct guess under the duple rule, conditioned
/// on detection:
///
/// ```text
/// P = sum_i sum_{d in duples(i)} P(i | d) P(d)  /  sum_d P(d)
/// ```
///
/// The numerator runs over each state's owned slots, the denominator over
/// every slot with evidence. For the canonical eight-state receiver (two
/// duples per state tiling all sixteen slots) this is identical to averaging
/// the per-duple posteriors against slot weights normalized to unit mean,
/// with the 1/2 (duples per state) and 1/8 (uniform prior) prefactors made
/// explicit; it is invariant under any uniform rescaling of the evidence.
pub fn average_guess_probability(
    post: &PosteriorTable,
    table: &ProbabilityTable,
    assign: &GuessAssignment,
    priors: &[f64],
) -> f64 {
    debug_assert_eq!(table.n_states(), post.n_states());
    debug_assert_eq!(priors.len(), post.n_states());
    let total = post.total_evidence();
    if total <= 0.0 {
        return 0.0;
    }
    let mut hit = 0.0;
    for (s, d) in assign.duples.iter().enumerate() {
        for duple in [d.h, d.v].into_iter().flatten() {
            if let Some(q) = post.posterior(duple.t, duple.pi, s) {
                hit += q * post.evidence(duple.t, duple.pi);
            }
        }
    }
    hit / total
}

/// Assignment-free form: expectation of the winning posterior over slots,
/// conditioned on detection. Agrees with [`average_guess_probability`] when
/// the duples cover every slot that carries evidence.
pub fn argmax_guess_probability(post: &PosteriorTable) -> f64 {
    let total = post.total_evidence();
    if total <= 0.0 {
        return 0.0;
    }
    let mut acc = 0.0;
    for t in 0..post.n_bins() {
        for pi in Polarization::BOTH {
            if post.has_evidence(t, pi) {
                let top = (0..post.n_states())
                    .map(|s| post.posterior(t, pi, s).unwrap())
                    .fold(f64::NEG_INFINITY, f64::max);
                acc += top * post.evidence(t, pi);
            }
        }
    }
    acc / total
}

/// Optimal average guess probability for N equiprobable geometrically
/// uniform states spanning a D-dimensional space: `D / N`.
pub fn gus_bound(n: usize, d: usize) -> Result<f64, DiscriminationError> {
    if n == 0 || d == 0 || d > n {
        return Err(DiscriminationError::BadBoundArguments { n, d });
    }
    Ok(d as f64 / n as f64)
}

/// Square-root-measurement success probability for an ensemble of pure
/// product states, evaluated in the 4-dimensional encoding space.
///
/// Builds `rho = sum_i p_i |psi_i><psi_i|`, takes the pseudo-inverse square
/// root on its support via a Jacobi eigendecomposition, and returns
/// `sum_i p_i^2 |<psi_i| rho^{-1/2} |psi_i>|^2`. For geometrically uniform
/// equiprobable sets this equals `rank(rho) / N`, which makes it an
/// independent check of [`gus_bound`].
pub fn srm_oracle(ens: &StateEnsemble) -> Result<f64, DiscriminationError> {
    ens.validate()
        .map_err(|_| DiscriminationError::InvalidEnsemble)?;
    let vectors: Vec<[C64; 4]> = ens.states.iter().map(product_vector).collect();

    let zero = C64::new(0.0, 0.0);
    let mut rho = [[zero; 4]; 4];
    for (psi, p) in vectors.iter().zip(&ens.priors) {
        for i in 0..4 {
            for j in 0..4 {
                rho[i][j] += psi[i] * psi[j].conj() * *p;
            }
        }
    }

    let (eigvals, eigvecs) = hermitian::eigh4(&rho);
    let lambda_max = eigvals.iter().fold(0.0f64, |a, b| a.max(*b));
    if lambda_max <= 0.0 {
        return Err(DiscriminationError::InvalidEnsemble);
    }
    // pseudo-inverse square root: drop the numerical null space
    let cut = lambda_max * 1e-12;
    let mut inv_sqrt = [[zero; 4]; 4];
    for k in 0..4 {
        if eigvals[k] > cut {
            let w = 1.0 / fm::sqrt(eigvals[k]);
            for i in 0..4 {
                for j in 0..4 {
                    inv_sqrt[i][j] += eigvecs[i][k] * eigvecs[j][k].conj() * w;
                }
            }
        }
    }

    let mut success = 0.0;
    for (psi, p) in vectors.iter().zip(&ens.priors) {
        let mut amp = zero;
        for i in 0..4 {
            for j in 0..4 {
                amp += psi[i].conj() * inv_sqrt[i][j] * psi[j];
            }
        }
        success += p * p * amp.norm_sqr();
    }
    Ok(success)
}

/// Embed a polarization-frequency product state in the basis
/// `(H w1, V w1, H w2, V w2)`.
fn product_vector(s: &crate::receiver::QuquartState) -> [C64; 4] {
    let zero = C64::new(0.0, 0.0);
    match s.freq {
        crate::optics::FrequencyLabel::Omega1 => [s.pol.h, s.pol.v, zero, zero],
        crate::optics::FrequencyLabel::Omega2 => [zero, zero, s.pol.h, s.pol.v],
    }
}

/// Eigendecomposition of small Hermitian matrices by cyclic Jacobi sweeps
/// with complex rotations. Self-contained so the measurement oracle shares
/// no code with the receiver simulation it cross-checks.
mod hermitian {
    use super::{fm, C64};

    /// Returns (eigenvalues, column eigenvectors) of a 4x4 Hermitian matrix.
    pub fn eigh4(a: &[[C64; 4]; 4]) -> ([f64; 4], [[C64; 4]; 4]) {
        let zero = C64::new(0.0, 0.0);
        let one = C64::new(1.0, 0.0);
        let mut m = *a;
        let mut v = [[zero; 4]; 4];
        for (i, row) in v.iter_mut().enumerate() {
            row[i] = one;
        }

        for _sweep in 0..64 {
            let mut off = 0.0;
            for p in 0..4 {
                for q in (p + 1)..4 {
                    off += m[p][q].norm_sqr();
                }
            }
            if off < 1e-30 {
                break;
            }
            for p in 0..3 {
                for q in (p + 1)..4 {
                    let apq = m[p][q];
                    let mag = fm::sqrt(apq.norm_sqr());
                    if mag < 1e-300 {
                        continue;
                    }
                    // complex Jacobi rotation zeroing m[p][q]
                    let phase = apq / C64::new(mag, 0.0);
                    let app = m[p][p].re;
                    let aqq = m[q][q].re;
                    let theta = 0.5 * fm::atan2(2.0 * mag, app - aqq);
                    let (c, s) = (fm::cos(theta), fm::sin(theta));
                    let sp = phase * s;

                    // columns: M <- M J, with J[p][p]=c, J[p][q]=-s e^{i phi},
                    // J[q][p]=s e^{-i phi}, J[q][q]=c
                    for i in 0..4 {
                        let mip = m[i][p];
                        let miq = m[i][q];
                        m[i][p] = mip * c + miq * sp.conj();
                        m[i][q] = miq * c - mip * sp;
                    }
                    // rows: M <- J^dag M
                    for j in 0..4 {
                        let mpj = m[p][j];
                        let mqj = m[q][j];
                        m[p][j] = mpj * c + mqj * sp;
                        m[q][j] = mqj * c - mpj * sp.conj();
                    }
                    // accumulate the eigenvector columns
                    for i in 0..4 {
                        let vip = v[i][p];
                        let viq = v[i][q];
                        v[i][p] = vip * c + viq * sp.conj();
                        v[i][q] = viq * c - vip * sp;
                    }
                }
            }
        }
        let vals = [m[0][0].re, m[1][1].re, m[2][2].re, m[3][3].re];
        (vals, v)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum DiscriminationError {
    #[error("table, prior, or posterior shapes do not match")]
    ShapeMismatch,
    #[error("priors must be non-negative and sum to one")]
    BadPriors,
    #[error("state {0} is the maximum-posterior guess of no detection slot")]
    StateWithoutDuple(usize),
    #[error("bound requires 1 <= d <= n, got n = {n}, d = {d}")]
    BadBoundArguments { n: usize, d: usize },
    #[error("ensemble is empty, non-normalized, or has invalid priors")]
    InvalidEnsemble,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::calibration::default_calibration;
    use crate::jones::PolVector;
    use crate::optics::FrequencyLabel;
    use crate::receiver::{canonical_ensemble, simulate_distribution, QuquartState};

    fn ideal_pipeline() -> (ProbabilityTable, PosteriorTable, GuessAssignment, Vec<f64>) {
        let ens = canonical_ensemble();
        let table = simulate_distribution(&ens, &default_calibration()).unwrap();
        let post = bayes_posteriors(&table, &ens.priors).unwrap();
        let assign = assign_guesses(&post).unwrap();
        (table, post, assign, ens.priors)
    }

    #[test]
    fn single_state_posterior_is_one() {
        let ens = crate::receiver::StateEnsemble::uniform(vec![QuquartState::new(
            PolVector::plus(),
            FrequencyLabel::Omega1,
            1,
        )]);
        let table = simulate_distribution(&ens, &default_calibration()).unwrap();
        let post = bayes_posteriors(&table, &ens.priors).unwrap();
        for t in 0..post.n_bins() {
            for pi in Polarization::BOTH {
                if let Some(q) = post.posterior(t, pi, 0) {
                    assert!((q - 1.0).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn symmetric_two_state_posteriors_are_half() {
        // two equiprobable states with identical likelihoods
        let ens = crate::receiver::StateEnsemble::uniform(vec![
            QuquartState::new(PolVector::plus(), FrequencyLabel::Omega1, 1),
            QuquartState::new(PolVector::plus(), FrequencyLabel::Omega1, 2),
        ]);
        let table = simulate_distribution(&ens, &default_calibration()).unwrap();
        let post = bayes_posteriors(&table, &ens.priors).unwrap();
        for t in 0..post.n_bins() {
            for pi in Polarization::BOTH {
                if let Some(q) = post.posterior(t, pi, 0) {
                    assert!((q - 0.5).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn ideal_peak_posterior_is_half() {
        let (_table, post, assign, _priors) = ideal_pipeline();
        let duple = assign.duples[0].h.unwrap();
        assert_eq!(duple.t, 2);
        let q = post.posterior(duple.t, duple.pi, 0).unwrap();
        assert!((q - 0.5).abs() < 1e-9);
    }

    #[test]
    fn posterior_normalization() {
        let (_, post, _, _) = ideal_pipeline();
        assert!(post.normalization_defect() < 1e-9);
        assert_eq!(post.empty_slots(), 0);
    }

    #[test]
    fn posteriors_invariant_under_prior_scale() {
        // scaling all priors by a positive constant before normalization
        // leaves the argmax (and the posteriors) unchanged
        let ens = canonical_ensemble();
        let table = simulate_distribution(&ens, &default_calibration()).unwrap();
        let post = bayes_posteriors(&table, &ens.priors).unwrap();
        let scaled: Vec<f64> = ens.priors.iter().map(|p| p * 3.0).collect();
        let renormalized: Vec<f64> = scaled.iter().map(|p| p / 3.0).collect();
        let post2 = bayes_posteriors(&table, &renormalized).unwrap();
        for t in 0..post.n_bins() {
            for pi in Polarization::BOTH {
                for s in 0..8 {
                    assert_eq!(post.posterior(t, pi, s), post2.posterior(t, pi, s));
                }
            }
        }
    }

    #[test]
    fn ideal_duple_table() {
        let (_, _, assign, _) = ideal_pipeline();
        let h: Vec<usize> = assign.duples.iter().map(|d| d.h.unwrap().t).collect();
        let v: Vec<usize> = assign.duples.iter().map(|d| d.v.unwrap().t).collect();
        assert_eq!(h, vec![2, 6, 0, 4, 3, 7, 1, 5]);
        assert_eq!(v, vec![6, 2, 4, 0, 7, 3, 5, 1]);
    }

    #[test]
    fn identity_dynamics_guesses_by_polarization() {
        let params = crate::optics::ReceiverParams {
            prep_set: crate::optics::WaveplateSet::new(0.0, 0.0, 0.0),
            loop_set: crate::optics::WaveplateSet::new(0.0, 0.0, 0.0),
            ..default_calibration()
        };
        let ens = crate::receiver::StateEnsemble::uniform(vec![
            QuquartState::new(PolVector::horizontal(), FrequencyLabel::Omega1, 1),
            QuquartState::new(PolVector::vertical(), FrequencyLabel::Omega1, 2),
        ]);
        let table = simulate_distribution(&ens, &params).unwrap();
        let post = bayes_posteriors(&table, &ens.priors).unwrap();
        let assign = assign_guesses(&post).unwrap();
        for t in (0..table.n_bins()).step_by(2) {
            assert_eq!(assign.guess(t, Polarization::H), Some(0));
            assert_eq!(assign.guess(t, Polarization::V), Some(1));
        }
    }

    #[test]
    fn ideal_receiver_reaches_the_bound() {
        let (table, post, assign, priors) = ideal_pipeline();
        let p_duple = average_guess_probability(&post, &table, &assign, &priors);
        let p_argmax = argmax_guess_probability(&post);
        assert!((p_duple - 0.5).abs() < 1e-9, "duple form {p_duple}");
        assert!((p_argmax - 0.5).abs() < 1e-9, "argmax form {p_argmax}");
        assert!((p_duple - p_argmax).abs() < 1e-12);
    }

    #[test]
    fn guess_probability_invariant_under_evidence_scale() {
        let (table, post, assign, priors) = ideal_pipeline();
        let reference = average_guess_probability(&post, &table, &assign, &priors);
        // halve every probability: same conditional quantity
        let mut scaled = ProbabilityTable::zeros(table.n_states(), table.n_bins());
        for s in 0..table.n_states() {
            for bin in table.iter_bins() {
                scaled.set(s, bin.t, bin.pi, 0.5 * table.get(s, bin.t, bin.pi));
            }
            scaled.set_undetected(s, 1.0 - scaled.detected(s));
        }
        let post2 = bayes_posteriors(&scaled, &priors).unwrap();
        let assign2 = assign_guesses(&post2).unwrap();
        let halved = average_guess_probability(&post2, &scaled, &assign2, &priors);
        assert!((halved - reference).abs() < 1e-12);
    }

    #[test]
    fn orthogonal_pair_is_perfectly_distinguished() {
        // one measured pass, identity dynamics: H and V concentrate in the
        // two slots of the direct reflection
        let params = crate::optics::ReceiverParams {
            prep_set: crate::optics::WaveplateSet::new(0.0, 0.0, 0.0),
            loop_set: crate::optics::WaveplateSet::new(0.0, 0.0, 0.0),
            n_passes: 1,
            ..default_calibration()
        };
        let ens = crate::receiver::StateEnsemble::uniform(vec![
            QuquartState::new(PolVector::horizontal(), FrequencyLabel::Omega1, 1),
            QuquartState::new(PolVector::vertical(), FrequencyLabel::Omega1, 2),
        ]);
        let table = simulate_distribution(&ens, &params).unwrap();
        let post = bayes_posteriors(&table, &ens.priors).unwrap();
        let assign = assign_guesses(&post).unwrap();
        let p = average_guess_probability(&post, &table, &assign, &ens.priors);
        assert!((p - 1.0).abs() < 1e-12);
        assert!((argmax_guess_probability(&post) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn bound_values() {
        assert_eq!(gus_bound(8, 4).unwrap(), 0.5);
        assert_eq!(gus_bound(7, 7).unwrap(), 1.0);
        assert_eq!(gus_bound(4, 2).unwrap(), 0.5);
        assert!(gus_bound(2, 4).is_err());
        assert!(gus_bound(0, 0).is_err());
    }

    #[test]
    fn srm_matches_bound_on_canonical_ensemble() {
        let p = srm_oracle(&canonical_ensemble()).unwrap();
        assert!((p - 0.5).abs() < 1e-9, "srm {p}");
    }

    #[test]
    fn srm_on_polarization_only_subset() {
        // four states spanning a rank-2 support: bound is 2/4
        let ens = canonical_ensemble();
        let four = crate::receiver::StateEnsemble::uniform(ens.states[..4].to_vec());
        let p = srm_oracle(&four).unwrap();
        assert!((p - gus_bound(4, 2).unwrap()).abs() < 1e-9, "srm {p}");
    }

    #[test]
    fn srm_on_orthogonal_pair() {
        let ens = crate::receiver::StateEnsemble::uniform(vec![
            QuquartState::new(PolVector::horizontal(), FrequencyLabel::Omega1, 1),
            QuquartState::new(PolVector::vertical(), FrequencyLabel::Omega1, 2),
        ]);
        let p = srm_oracle(&ens).unwrap();
        assert!((p - 1.0).abs() < 1e-9);
    }

    #[test]
    fn srm_on_single_state() {
        let ens = crate::receiver::StateEnsemble::uniform(vec![QuquartState::new(
            PolVector::plus(),
            FrequencyLabel::Omega2,
            1,
        )]);
        let p = srm_oracle(&ens).unwrap();
        assert!((p - 1.0).abs() < 1e-9);
    }

    #[test]
    fn srm_at_least_max_prior() {
        // guessing the most likely state is always available
        let states = vec![
            QuquartState::new(PolVector::plus(), FrequencyLabel::Omega1, 1),
            QuquartState::new(PolVector::horizontal(), FrequencyLabel::Omega1, 2),
        ];
        let ens = crate::receiver::StateEnsemble {
            states,
            priors: vec![0.7, 0.3],
        };
        let p = srm_oracle(&ens).unwrap();
        assert!(p >= 0.7 - 1e-12, "srm {p}");
    }

    #[test]
    fn srm_rejects_non_normalized() {
        let ens = crate::receiver::StateEnsemble::uniform(vec![QuquartState::new(
            PolVector::new(C64::new(0.7, 0.0), C64::new(0.0, 0.0)),
            FrequencyLabel::Omega1,
            1,
        )]);
        assert!(srm_oracle(&ens).is_err());
    }

    #[test]
    fn jacobi_recovers_known_spectrum() {
        // oracle: diagonalize U diag(4,3,2,1) U^dag for a known unitary U
        // built from elementary rotations, and compare
        let zero = C64::new(0.0, 0.0);
        let mut d = [[zero; 4]; 4];
        for (i, val) in [4.0, 3.0, 2.0, 1.0].into_iter().enumerate() {
            d[i][i] = C64::new(val, 0.0);
        }
        // simple unitary: Fourier-like mixing
        let n = 4.0f64;
        let mut u = [[zero; 4]; 4];
        for (j, row) in u.iter_mut().enumerate() {
            for (k, e) in row.iter_mut().enumerate() {
                let phi = 2.0 * core::f64::consts::PI * (j * k) as f64 / n;
                *e = C64::new(fm::cos(phi), fm::sin(phi)) / fm::sqrt(n);
            }
        }
        let mut ud = [[zero; 4]; 4];
        for i in 0..4 {
            for j in 0..4 {
                for k in 0..4 {
                    ud[i][j] += u[i][k] * d[k][k] * u[j][k].conj();
                }
            }
        }
        let (mut vals, vecs) = hermitian::eigh4(&ud);
        vals.sort_by(|a, b| a.partial_cmp(b).unwrap());
        for (got, want) in vals.iter().zip([1.0, 2.0, 3.0, 4.0]) {
            assert!((got - want).abs() < 1e-10, "{got} vs {want}");
        }
        // eigenvectors reconstruct the matrix
        let (vals2, _) = hermitian::eigh4(&ud);
        let mut rec = [[zero; 4]; 4];
        for k in 0..4 {
            for i in 0..4 {
                for j in 0..4 {
                    rec[i][j] += vecs[i][k] * vecs[j][k].conj() * vals2[k];
                }
            }
        }
        for i in 0..4 {
            for j in 0..4 {
                assert!((rec[i][j] - ud[i][j]).norm_sqr().sqrt() < 1e-10);
            }
        }
    }
}
