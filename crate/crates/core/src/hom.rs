//! Hong-Ou-Mandel correlation functions for an unbalanced Mach-Zehnder
//! interferometer, plus visibility and correction arithmetic.
//!
//! The interferometer delays one arm by `dtau2`; consecutively emitted
//! photons collide at the second splitter. Cross- and co-polarized
//! correlation functions share the same splitter algebra; only the
//! co-polarized case carries the two-photon interference factor
//! `1 − V e^(−2|τ|/τ_c)`, applied to the exchanged-path bracket (the only
//! pairs that overlap at the second splitter).

use crate::models::G2TwoLevelParams;
use crate::{Error, Result};

/// Reflection/transmission probabilities of the interferometer's two beam
/// splitters. Probability-conserving by construction: r + t = 1 per
/// splitter; real splitter loss is modeled downstream as detector
/// efficiency.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitterPair {
    pub r1: f64,
    pub t1: f64,
    pub r2: f64,
    pub t2: f64,
}

impl SplitterPair {
    /// Build a lossless pair from the two reflectivities.
    pub fn lossless(r1: f64, r2: f64) -> Result<Self> {
        for r in [r1, r2] {
            if !(0.0..=1.0).contains(&r) {
                return Err(Error::InvalidParameter(format!(
                    "splitter reflectivity must be in [0, 1], got {r}"
                )));
            }
        }
        Ok(SplitterPair {
            r1,
            t1: 1.0 - r1,
            r2,
            t2: 1.0 - r2,
        })
    }

    /// 50:50 at both splitters.
    pub fn balanced() -> Self {
        SplitterPair {
            r1: 0.5,
            t1: 0.5,
            r2: 0.5,
            t2: 0.5,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for v in [self.r1, self.t1, self.r2, self.t2] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::InvalidParameter(format!(
                    "splitter probability out of [0, 1]: {v}"
                )));
            }
        }
        if (self.r1 + self.t1 - 1.0).abs() > 1e-12 || (self.r2 + self.t2 - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidParameter(
                "splitters must satisfy r + t = 1".into(),
            ));
        }
        Ok(())
    }
}

/// Full parameter set of the HOM correlation model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HomParams {
    pub splitters: SplitterPair,
    /// Interferometer delay, ns.
    pub dtau2: f64,
    /// Wavepacket overlap at the second splitter, in [0, 1].
    pub visibility: f64,
    /// Coherence time, ps.
    pub tau_c: f64,
    /// Underlying emitter autocorrelation.
    pub base: G2TwoLevelParams,
}

impl HomParams {
    pub fn validate(&self) -> Result<()> {
        self.splitters.validate()?;
        if !(self.dtau2 > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "dtau2 must be positive, got {}",
                self.dtau2
            )));
        }
        if !(0.0..=1.0).contains(&self.visibility) {
            return Err(Error::InvalidParameter(format!(
                "visibility must be in [0, 1], got {}",
                self.visibility
            )));
        }
        if !(self.tau_c > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "tau_c must be positive, got {}",
                self.tau_c
            )));
        }
        G2TwoLevelParams::new(self.base.g2_zero, self.base.gamma1).map(|_| ())
    }

    pub fn tau_c_ns(&self) -> f64 {
        self.tau_c * 1e-3
    }

    /// Exchanged-path bracket 4 R₁T₁ [T₂² g²(τ−Δτ₂) + R₂² g²(τ+Δτ₂)].
    fn exchange_bracket(&self, tau_ns: f64) -> f64 {
        let s = &self.splitters;
        4.0 * s.r1
            * s.t1
            * (s.t2 * s.t2 * self.base.eval(tau_ns - self.dtau2)
                + s.r2 * s.r2 * self.base.eval(tau_ns + self.dtau2))
    }

    /// Same-path term 4 (T₁² + R₁²) R₂T₂ g²(τ).
    fn same_path_term(&self, tau_ns: f64) -> f64 {
        let s = &self.splitters;
        4.0 * (s.t1 * s.t1 + s.r1 * s.r1) * s.r2 * s.t2 * self.base.eval(tau_ns)
    }

    /// Cross-polarized (distinguishable) correlation.
    pub fn g2_cross(&self, tau_ns: f64) -> f64 {
        self.same_path_term(tau_ns) + self.exchange_bracket(tau_ns)
    }

    /// Co-polarized (indistinguishable) correlation: the exchanged-path
    /// bracket is suppressed by 1 − V e^(−2|τ|/τ_c).
    pub fn g2_co(&self, tau_ns: f64) -> f64 {
        let suppression =
            1.0 - self.visibility * (-2.0 * tau_ns.abs() / self.tau_c_ns()).exp();
        self.same_path_term(tau_ns) + self.exchange_bracket(tau_ns) * suppression
    }
}

/// Raw HOM visibility from the zero-delay correlation values,
/// V = 1 − g∥(0)/g⊥(0), with the co-polarized dip in the numerator so a
/// deeper co-polarized dip gives positive visibility.
pub fn visibility_raw(g_co_zero: f64, g_cross_zero: f64) -> Result<f64> {
    if g_cross_zero == 0.0 {
        return Err(Error::InvalidParameter(
            "g_cross(0) must be nonzero for a visibility estimate".into(),
        ));
    }
    Ok(1.0 - g_co_zero / g_cross_zero)
}

/// Purity-corrected visibility upper bound
/// M_s = (V_HOM + g²(0)) / (1 − g²(0)).
pub fn visibility_corrected(v_hom: f64, g2_zero: f64) -> Result<f64> {
    if g2_zero >= 1.0 {
        return Err(Error::InvalidParameter(format!(
            "g2_zero must be below 1 for the correction, got {g2_zero}"
        )));
    }
    Ok((v_hom + g2_zero) / (1.0 - g2_zero))
}

/// How far the measured coherence time sits from the Fourier limit:
/// 2 τ_rad / τ_c (= 1 at the limit).
pub fn lifetime_limit_factor(tau_rad_ns: f64, tau_c_ps: f64) -> f64 {
    2.0 * tau_rad_ns / (tau_c_ps * 1e-3)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    /// Balanced splitters with saturated tails: gamma1 * dtau2 large enough
    /// that exp(-gamma1*dtau2) underflows to exactly 0.
    fn saturated_balanced(g2_zero: f64, visibility: f64) -> HomParams {
        HomParams {
            splitters: SplitterPair::balanced(),
            dtau2: 4.36,
            visibility,
            tau_c: 450.0,
            base: G2TwoLevelParams::new(g2_zero, 500.0).unwrap(),
        }
    }

    #[test]
    fn cross_dips_at_interferometer_delay() {
        let p = saturated_balanced(0.0, 1.0);
        // two dips of 0.75 at +-dtau2, central dip 0.5
        assert_eq!(p.g2_cross(p.dtau2), 0.75);
        assert_eq!(p.g2_cross(-p.dtau2), 0.75);
        assert_eq!(p.g2_cross(0.0), 0.5);
    }

    #[test]
    fn cross_tail_is_one_for_balanced_splitter() {
        let p = HomParams {
            splitters: SplitterPair::lossless(0.31, 0.5).unwrap(),
            ..saturated_balanced(0.0, 1.0)
        };
        assert_relative_eq!(p.g2_cross(1e4), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn co_equals_cross_when_visibility_zero() {
        let p = saturated_balanced(0.07, 0.0);
        for tau in [-6.0, -4.36, -0.3, 0.0, 0.2, 4.36, 9.0] {
            assert_eq!(p.g2_co(tau), p.g2_cross(tau));
        }
    }

    #[test]
    fn co_central_dip_vanishes_at_full_visibility() {
        let p = saturated_balanced(0.0, 1.0);
        assert_eq!(p.g2_co(0.0), 0.0);
    }

    #[test]
    fn co_central_dip_with_residual_purity() {
        // 0.5*g2(0) + 0.5*(1 - 1) = 0.0545 at g2(0) = 0.109
        let p = saturated_balanced(0.109, 1.0);
        assert_relative_eq!(p.g2_co(0.0), 0.0545, epsilon = 1e-12);
    }

    #[test]
    fn co_never_exceeds_cross() {
        let p = HomParams {
            splitters: SplitterPair::lossless(0.42, 0.55).unwrap(),
            dtau2: 4.36,
            visibility: 0.8,
            tau_c: 450.0,
            base: G2TwoLevelParams::new(0.1, 0.6).unwrap(),
        };
        let mut tau = -12.0;
        while tau < 12.0 {
            assert!(p.g2_co(tau) <= p.g2_cross(tau) + 1e-15);
            tau += 0.01;
        }
    }

    #[test]
    fn even_in_tau_when_second_splitter_balanced() {
        let p = HomParams {
            splitters: SplitterPair::lossless(0.38, 0.5).unwrap(),
            dtau2: 4.36,
            visibility: 0.9,
            tau_c: 450.0,
            base: G2TwoLevelParams::new(0.05, 0.6).unwrap(),
        };
        for tau in [0.1, 0.45, 2.2, 4.36, 7.7] {
            assert_relative_eq!(p.g2_cross(tau), p.g2_cross(-tau), epsilon = 1e-14);
            assert_relative_eq!(p.g2_co(tau), p.g2_co(-tau), epsilon = 1e-14);
        }
    }

    #[test]
    fn tail_limit_matches_coefficient_sum() {
        // lim tau->inf = 4 r2 t2 (t1^2 + r1^2) + 4 r1 t1 (t2^2 + r2^2),
        // equal to 1 exactly iff r1 t1 = 1/4 or r2 t2 = 1/4
        let s = SplitterPair::lossless(0.3, 0.6).unwrap();
        let p = HomParams {
            splitters: s,
            dtau2: 4.36,
            visibility: 1.0,
            tau_c: 450.0,
            base: G2TwoLevelParams::new(0.0, 0.7).unwrap(),
        };
        let expected = 4.0 * s.r2 * s.t2 * (s.t1 * s.t1 + s.r1 * s.r1)
            + 4.0 * s.r1 * s.t1 * (s.t2 * s.t2 + s.r2 * s.r2);
        assert_relative_eq!(p.g2_cross(1e4), expected, epsilon = 1e-12);
        assert_relative_eq!(p.g2_co(1e4), expected, epsilon = 1e-12);
        assert!((expected - 1.0).abs() > 1e-3);
    }

    #[test]
    fn visibility_round_trips_through_the_model() {
        // with g2_zero = 0 the same-path term vanishes at tau = 0 and the
        // suppression factor cancels in the ratio, recovering V exactly
        for v in [0.0, 0.25, 0.64, 1.0] {
            let p = HomParams {
                splitters: SplitterPair::lossless(0.45, 0.52).unwrap(),
                dtau2: 4.36,
                visibility: v,
                tau_c: 450.0,
                // gamma1 * dtau2 = 30
                base: G2TwoLevelParams::new(0.0, 30.0 / 4.36).unwrap(),
            };
            let got = visibility_raw(p.g2_co(0.0), p.g2_cross(0.0)).unwrap();
            assert_relative_eq!(got, v, epsilon = 1e-9);
        }
    }

    #[test]
    fn visibility_raw_examples() {
        assert_eq!(visibility_raw(0.0, 0.5).unwrap(), 1.0);
        assert_eq!(visibility_raw(0.37, 0.37).unwrap(), 0.0);
        assert_relative_eq!(visibility_raw(0.18, 0.5).unwrap(), 0.64, epsilon = 1e-12);
        assert!(visibility_raw(0.1, 0.0).is_err());
    }

    #[test]
    fn visibility_correction_examples() {
        assert_relative_eq!(
            visibility_corrected(0.64, 0.109).unwrap(),
            0.8406,
            epsilon = 5e-5
        );
        assert_eq!(visibility_corrected(1.0, 0.0).unwrap(), 1.0);
        assert_eq!(visibility_corrected(0.0, 0.0).unwrap(), 0.0);
        assert!(visibility_corrected(0.5, 1.0).is_err());
    }

    #[test]
    fn lifetime_limit_examples() {
        assert_relative_eq!(lifetime_limit_factor(1.87, 450.0), 8.3111, epsilon = 1e-3);
        assert_relative_eq!(lifetime_limit_factor(1.0, 2000.0), 1.0, epsilon = 1e-15);
        assert_relative_eq!(lifetime_limit_factor(1.0, 500.0), 4.0, epsilon = 1e-15);
    }

    #[test]
    fn lossless_constructor_rejects_bad_reflectivity() {
        assert!(SplitterPair::lossless(-0.1, 0.5).is_err());
        assert!(SplitterPair::lossless(0.5, 1.3).is_err());
        let s = SplitterPair {
            r1: 0.6,
            t1: 0.6,
            r2: 0.5,
            t2: 0.5,
        };
        assert!(s.validate().is_err());
    }
}
