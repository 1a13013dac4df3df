//! Models of the physical receiver components: waveplate triples, the
//! unbalanced beam splitter that couples the loop, the frequency-selective
//! delay, and loop-length timing.

use thiserror::Error;

use crate::fm;
use crate::jones::{hwp, qwp, JonesMatrix};

/// Speed of light used for timing arithmetic, m/s.
pub const SPEED_OF_LIGHT_M_PER_S: f64 = 2.998e8;

/// The two photon frequencies carrying the second qubit. The labels map to
/// the biexciton / exciton emission lines of the source; the wavelengths are
/// metadata only and never enter the simulation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FrequencyLabel {
    Omega1,
    Omega2,
}

impl FrequencyLabel {
    /// Nominal emission wavelength, nm.
    pub fn nominal_wavelength_nm(&self) -> f64 {
        match self {
            FrequencyLabel::Omega1 => 782.3,
            FrequencyLabel::Omega2 => 780.3,
        }
    }
}

/// Fast-axis angles (radians) of a QWP-HWP-QWP sequence; `q1` acts first.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WaveplateSet {
    pub q1: f64,
    pub h: f64,
    pub q2: f64,
}

impl WaveplateSet {
    pub const fn new(q1: f64, h: f64, q2: f64) -> Self {
        Self { q1, h, q2 }
    }

    /// Same plates with every angle reduced to `[0, pi)` (waveplates are
    /// pi-periodic in their fast-axis angle).
    pub fn normalized(&self) -> Self {
        let pi = core::f64::consts::PI;
        Self {
            q1: fm::rem_euclid(self.q1, pi),
            h: fm::rem_euclid(self.h, pi),
            q2: fm::rem_euclid(self.q2, pi),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.q1.is_finite() && self.h.is_finite() && self.q2.is_finite()
    }
}

/// Unitary realized by a waveplate set: `qwp(q2) * hwp(h) * qwp(q1)`,
/// first plate acting first. A QWP-HWP-QWP triple can reach any SU(2)
/// element (up to global phase).
pub fn waveplate_set_unitary(w: &WaveplateSet) -> JonesMatrix {
    qwp(w.q2).compose(&hwp(w.h)).compose(&qwp(w.q1))
}

/// Beam-splitter parameters: polarization-resolved intensity reflectivities,
/// a per-encounter scattering loss, and a per-traversal loop loss.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BSParams {
    pub r_h: f64,
    pub r_v: f64,
    /// Intensity loss applied at every beam-splitter encounter.
    pub loss_bs: f64,
    /// Intensity loss applied per completed loop traversal.
    pub loss_loop: f64,
}

impl BSParams {
    pub const fn new(r_h: f64, r_v: f64, loss_bs: f64, loss_loop: f64) -> Self {
        Self {
            r_h,
            r_v,
            loss_bs,
            loss_loop,
        }
    }

    /// Symmetric lossless splitter with reflectivity `r`.
    pub const fn symmetric_lossless(r: f64) -> Self {
        Self::new(r, r, 0.0, 0.0)
    }

    pub fn validate(&self) -> Result<(), OpticsError> {
        let in_unit = |x: f64| (0.0..=1.0).contains(&x);
        if !(in_unit(self.r_h) && in_unit(self.r_v) && in_unit(self.loss_bs) && in_unit(self.loss_loop))
        {
            return Err(OpticsError::BsOutOfRange(*self));
        }
        if self.r_h + self.loss_bs > 1.0 || self.r_v + self.loss_bs > 1.0 {
            return Err(OpticsError::BsOverUnity(*self));
        }
        Ok(())
    }
}

/// Amplitude-level beam-splitter action: `(reflect, transmit)` matrices.
///
/// Both are real non-negative diagonal contractions; any fixed reflection
/// phase is absorbed by the phase compensators, so none is modeled here.
/// They satisfy `reflect^dag reflect + transmit^dag transmit = (1 - loss_bs) I`.
pub fn bs_amplitudes(bs: &BSParams) -> Result<(JonesMatrix, JonesMatrix), OpticsError> {
    bs.validate()?;
    let keep = fm::sqrt(1.0 - bs.loss_bs);
    let reflect = JonesMatrix::diag(
        (fm::sqrt(bs.r_h) * keep).into(),
        (fm::sqrt(bs.r_v) * keep).into(),
    );
    let transmit = JonesMatrix::diag(
        (fm::sqrt(1.0 - bs.r_h) * keep).into(),
        (fm::sqrt(1.0 - bs.r_v) * keep).into(),
    );
    Ok((reflect, transmit))
}

/// Frequency-selective delay imperfection: the fraction of delayed-band
/// intensity that leaks past the grating without being delayed, per
/// polarization. Leaked light lands in the undelayed time bin of the same
/// loop pass; being temporally distinguishable from the delayed path, it
/// adds incoherently.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VBGParams {
    pub ext_h: f64,
    pub ext_v: f64,
}

impl VBGParams {
    pub const fn new(ext_h: f64, ext_v: f64) -> Self {
        Self { ext_h, ext_v }
    }

    pub const fn ideal() -> Self {
        Self::new(0.0, 0.0)
    }

    pub fn validate(&self) -> Result<(), OpticsError> {
        if (0.0..1.0).contains(&self.ext_h) && (0.0..1.0).contains(&self.ext_v) {
            Ok(())
        } else {
            Err(OpticsError::ExtinctionOutOfRange(*self))
        }
    }
}

/// Every physical knob of the receiver.
///
/// `prep_set` acts once on the incoming state before the first beam-splitter
/// encounter; `loop_set` (then `phase1`, then `phase2`) acts on every loop
/// traversal; `n_passes` is the number of beam-splitter exits that are
/// actually measured (each contributing two time bins, one per frequency).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReceiverParams {
    pub prep_set: WaveplateSet,
    pub loop_set: WaveplateSet,
    /// Relative H/V phase of the first compensator, radians.
    pub phase1: f64,
    /// Relative H/V phase of the second compensator, radians.
    pub phase2: f64,
    pub bs: BSParams,
    pub vbg: VBGParams,
    pub n_passes: usize,
}

impl ReceiverParams {
    pub fn validate(&self) -> Result<(), OpticsError> {
        if self.n_passes < 1 {
            return Err(OpticsError::NoPasses);
        }
        if !(self.prep_set.is_finite()
            && self.loop_set.is_finite()
            && self.phase1.is_finite()
            && self.phase2.is_finite())
        {
            return Err(OpticsError::NonFiniteAngle);
        }
        self.bs.validate()?;
        self.vbg.validate()?;
        Ok(())
    }
}

/// Loop lengths and source repetition rate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimingConfig {
    /// Main loop length, m.
    pub l_loop1: f64,
    /// Delay loop length, m.
    pub l_loop2: f64,
    /// Pulse repetition rate, Hz.
    pub rep_rate: f64,
}

impl TimingConfig {
    pub fn validate(&self) -> Result<(), OpticsError> {
        if self.l_loop1 > 0.0 && self.l_loop2 > 0.0 && self.rep_rate > 0.0 {
            Ok(())
        } else {
            Err(OpticsError::TimingNotPositive(*self))
        }
    }
}

/// Timing feasibility summary for `n_passes` measured exits.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimingReport {
    /// One loop traversal, s.
    pub loop_time: f64,
    /// Frequency-selective delay, s.
    pub delay: f64,
    /// Last bin relative to the loop entrance: `n_passes * loop_time + delay`, s.
    pub span: f64,
    /// Last bin relative to the first bin: `(n_passes - 1) * loop_time + delay`, s.
    pub span_from_first_bin: f64,
    /// Pulse period `1 / rep_rate`, s.
    pub rep_period: f64,
    /// Whether all bins of one pulse clear before the next pulse's first bin.
    pub fits: bool,
}

/// Timing arithmetic: bins must not wrap into the next pulse period.
/// Both span conventions are reported; `fits` uses the bin-to-bin one, since
/// a global offset of the whole comb is irrelevant.
pub fn timing_report(t: &TimingConfig, n_passes: usize) -> Result<TimingReport, OpticsError> {
    t.validate()?;
    let loop_time = t.l_loop1 / SPEED_OF_LIGHT_M_PER_S;
    let delay = t.l_loop2 / SPEED_OF_LIGHT_M_PER_S;
    let span = n_passes as f64 * loop_time + delay;
    let span_from_first_bin = (n_passes as f64 - 1.0) * loop_time + delay;
    let rep_period = 1.0 / t.rep_rate;
    Ok(TimingReport {
        loop_time,
        delay,
        span,
        span_from_first_bin,
        rep_period,
        fits: span_from_first_bin < rep_period,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Error)]
pub enum OpticsError {
    #[error("beam-splitter parameters out of [0, 1]: {0:?}")]
    BsOutOfRange(BSParams),
    #[error("reflectivity plus loss exceeds unity: {0:?}")]
    BsOverUnity(BSParams),
    #[error("extinction ratios must lie in [0, 1): {0:?}")]
    ExtinctionOutOfRange(VBGParams),
    #[error("receiver must measure at least one pass")]
    NoPasses,
    #[error("receiver angles must be finite")]
    NonFiniteAngle,
    #[error("timing lengths and repetition rate must be positive: {0:?}")]
    TimingNotPositive(TimingConfig),
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::jones::{rotation_s3, JonesMatrix, PolVector};
    use crate::rng::CounterRng;

    const TOL: f64 = 1e-12;

    #[test]
    fn all_zero_set_is_identity() {
        let u = waveplate_set_unitary(&WaveplateSet::new(0.0, 0.0, 0.0));
        assert!(u.fidelity(&JonesMatrix::identity()) > 1.0 - TOL);
    }

    #[test]
    fn set_with_hwp_at_22p5_matches_direct_product() {
        // oracle: explicit matrix product evaluated on |H>
        let w = WaveplateSet::new(0.0, core::f64::consts::FRAC_PI_8, 0.0);
        let u = waveplate_set_unitary(&w);
        let out = u.apply(&PolVector::horizontal());
        let oracle = crate::jones::qwp(0.0)
            .compose(&crate::jones::hwp(core::f64::consts::FRAC_PI_8))
            .compose(&crate::jones::qwp(0.0))
            .apply(&PolVector::horizontal());
        assert!((out.overlap(&PolVector::plus()) - oracle.overlap(&PolVector::plus())).abs() < TOL);
        // the trailing QWP turns |+> into circular light: overlap 1/2
        assert!((out.overlap(&PolVector::plus()) - 0.5).abs() < TOL);
    }

    #[test]
    fn set_unitary_for_random_angles() {
        let mut rng = CounterRng::new(0x0911, 0);
        for _ in 0..500 {
            let w = WaveplateSet::new(
                rng.next_f64() * 7.0 - 3.5,
                rng.next_f64() * 7.0 - 3.5,
                rng.next_f64() * 7.0 - 3.5,
            );
            assert!(waveplate_set_unitary(&w).unitarity_defect() < TOL);
        }
    }

    #[test]
    fn quarter_turn_about_circular_axis_has_closed_form_plates() {
        // qwp(q + d/2) * hwp(q + d/4) * qwp(q) realizes rotation_s3(d)
        let mut rng = CounterRng::new(0x0912, 0);
        for _ in 0..100 {
            let q = rng.next_f64() * core::f64::consts::PI;
            let d = rng.next_f64() * 4.0 * core::f64::consts::PI;
            let w = WaveplateSet::new(q, q + d / 4.0, q + d / 2.0);
            assert!(waveplate_set_unitary(&w).fidelity(&rotation_s3(d)) > 1.0 - 1e-11);
        }
    }

    #[test]
    fn bs_symmetric_average() {
        let (r, t) = bs_amplitudes(&BSParams::symmetric_lossless(0.275)).unwrap();
        let rr = libm::sqrt(0.275);
        let tt = libm::sqrt(0.725);
        assert!((r.m[0][0].re - rr).abs() < TOL && (r.m[1][1].re - rr).abs() < TOL);
        assert!((t.m[0][0].re - tt).abs() < TOL && (t.m[1][1].re - tt).abs() < TOL);
    }

    #[test]
    fn bs_measured_values() {
        let (r, _t) = bs_amplitudes(&BSParams::new(0.26, 0.29, 0.21, 0.0)).unwrap();
        let keep = libm::sqrt(0.79);
        assert!((r.m[0][0].re - libm::sqrt(0.26) * keep).abs() < TOL);
        assert!((r.m[1][1].re - libm::sqrt(0.29) * keep).abs() < TOL);
    }

    #[test]
    fn bs_total_absorption() {
        let (r, t) = bs_amplitudes(&BSParams::new(0.0, 0.0, 1.0, 0.0)).unwrap();
        for m in [r, t] {
            assert!(m.m.iter().flatten().all(|e| e.norm_sqr().sqrt() < TOL));
        }
    }

    #[test]
    fn bs_probability_conservation_up_to_loss() {
        let mut rng = CounterRng::new(0x0913, 0);
        for _ in 0..200 {
            let bs = BSParams::new(
                rng.next_f64() * 0.7,
                rng.next_f64() * 0.7,
                rng.next_f64() * 0.3,
                rng.next_f64(),
            );
            let (r, t) = bs_amplitudes(&bs).unwrap();
            let sum = |i: usize| r.m[i][i].norm_sqr() + t.m[i][i].norm_sqr();
            assert!((sum(0) - (1.0 - bs.loss_bs)).abs() < TOL);
            assert!((sum(1) - (1.0 - bs.loss_bs)).abs() < TOL);
            assert!(r.max_singular_value() <= 1.0 + TOL);
            assert!(t.max_singular_value() <= 1.0 + TOL);
        }
    }

    #[test]
    fn bs_rejects_invalid() {
        assert!(bs_amplitudes(&BSParams::new(1.2, 0.3, 0.0, 0.0)).is_err());
        assert!(bs_amplitudes(&BSParams::new(0.9, 0.3, 0.2, 0.0)).is_err());
        assert!(bs_amplitudes(&BSParams::new(0.3, 0.3, 0.0, 1.5)).is_err());
    }

    #[test]
    fn timing_paper_lengths() {
        let t = TimingConfig {
            l_loop1: 0.9,
            l_loop2: 0.45,
            rep_rate: 80e6,
        };
        let rep = timing_report(&t, 4).unwrap();
        assert!((rep.loop_time - 3.0021e-9).abs() < 2e-12);
        assert!((rep.delay - 1.50105e-9).abs() < 1e-12);
        assert!((rep.span - (4.0 * rep.loop_time + rep.delay)).abs() < 1e-18);
        assert!((rep.span_from_first_bin - (3.0 * rep.loop_time + rep.delay)).abs() < 1e-18);
        // 13.5 ns total comb, 10.5 ns bin-to-bin, 12.5 ns period
        assert!(rep.span > rep.rep_period);
        assert!(rep.fits);
    }

    #[test]
    fn timing_delay_is_exactly_half_loop_time() {
        let mut rng = CounterRng::new(0x0914, 0);
        for _ in 0..200 {
            let l1 = rng.next_f64() * 10.0 + 1e-3;
            let t = TimingConfig {
                l_loop1: l1,
                l_loop2: l1 / 2.0,
                rep_rate: 80e6,
            };
            let rep = timing_report(&t, 4).unwrap();
            assert_eq!(rep.delay, rep.loop_time / 2.0);
        }
    }

    #[test]
    fn timing_rejects_nonpositive() {
        let t = TimingConfig {
            l_loop1: 0.0,
            l_loop2: 0.45,
            rep_rate: 80e6,
        };
        assert!(timing_report(&t, 4).is_err());
    }
}
