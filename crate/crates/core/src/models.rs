//! Closed-form scalar models for the emitter: antibunching
//! autocorrelation, power-dependent decay rate, saturation,
//! background-corrected brightness, and Lorentzian spectra.
//!
//! All functions here are pure and total on validated parameters; delays
//! are nanoseconds, rates counts per second, powers microwatts.

use crate::{Error, Result};

/// Two-level-emitter second-order autocorrelation parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct G2TwoLevelParams {
    /// Purity at zero delay, dimensionless.
    pub g2_zero: f64,
    /// Antibunching decay rate, 1/ns.
    pub gamma1: f64,
}

impl G2TwoLevelParams {
    /// `g2_zero = 1` (Poissonian light) is accepted here as a boundary
    /// value; fitting bounds keep it in the interior.
    pub fn new(g2_zero: f64, gamma1: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&g2_zero) {
            return Err(Error::InvalidParameter(format!(
                "g2_zero must be in [0, 1], got {g2_zero}"
            )));
        }
        if !(gamma1 > 0.0) || !gamma1.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "gamma1 must be positive and finite, got {gamma1}"
            )));
        }
        Ok(G2TwoLevelParams { g2_zero, gamma1 })
    }

    /// g²(τ) = 1 − (1 − g²(0)) e^(−γ₁|τ|), τ in ns.
    #[inline]
    pub fn eval(&self, tau_ns: f64) -> f64 {
        1.0 - (1.0 - self.g2_zero) * (-self.gamma1 * tau_ns.abs()).exp()
    }
}

/// Power dependence of the antibunching decay rate,
/// γ₁(P) = (1 + αP) / τ_rad.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerDecayParams {
    /// Radiative lifetime, ns.
    pub tau_rad: f64,
    /// Pump-rate slope, 1/µW.
    pub alpha: f64,
}

impl PowerDecayParams {
    pub fn new(tau_rad: f64, alpha: f64) -> Result<Self> {
        if !(tau_rad > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "tau_rad must be positive, got {tau_rad}"
            )));
        }
        if alpha < 0.0 {
            return Err(Error::InvalidParameter(format!(
                "alpha must be nonnegative, got {alpha}"
            )));
        }
        Ok(PowerDecayParams { tau_rad, alpha })
    }

    /// Decay rate at the given pump power, 1/ns. Monotone nondecreasing in
    /// power.
    #[inline]
    pub fn gamma1(&self, power_uw: f64) -> f64 {
        (1.0 + self.alpha * power_uw) / self.tau_rad
    }
}

/// Saturation curve I(P) = I₀ + I_sat (1 − e^(−P/P_sat)).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SaturationParams {
    /// Dark/background rate, counts/s.
    pub i0: f64,
    /// Saturation rate, counts/s.
    pub i_sat: f64,
    /// Saturation power, µW.
    pub p_sat: f64,
}

impl SaturationParams {
    pub fn new(i0: f64, i_sat: f64, p_sat: f64) -> Result<Self> {
        if i0 < 0.0 {
            return Err(Error::InvalidParameter(format!(
                "i0 must be nonnegative, got {i0}"
            )));
        }
        if !(i_sat > 0.0) || !(p_sat > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "i_sat and p_sat must be positive, got {i_sat}, {p_sat}"
            )));
        }
        Ok(SaturationParams { i0, i_sat, p_sat })
    }

    /// Detected rate at the given pump power; monotone increasing with
    /// asymptote i0 + i_sat.
    #[inline]
    pub fn eval(&self, power_uw: f64) -> f64 {
        self.i0 + self.i_sat * (1.0 - (-power_uw / self.p_sat).exp())
    }
}

/// Peak-normalized Lorentzian spectral line:
/// f(λ) = offset + amplitude (Γ/2)² / ((λ − center)² + (Γ/2)²)
/// with Γ the full width at half maximum.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LorentzianParams {
    /// Line center, nm.
    pub center: f64,
    /// Full width at half maximum, nm.
    pub fwhm: f64,
    /// Peak height above the offset, counts.
    pub amplitude: f64,
    /// Baseline, counts.
    pub offset: f64,
}

impl LorentzianParams {
    pub fn new(center: f64, fwhm: f64, amplitude: f64, offset: f64) -> Result<Self> {
        if !(fwhm > 0.0) || !(amplitude > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "fwhm and amplitude must be positive, got {fwhm}, {amplitude}"
            )));
        }
        if offset < 0.0 {
            return Err(Error::InvalidParameter(format!(
                "offset must be nonnegative, got {offset}"
            )));
        }
        Ok(LorentzianParams {
            center,
            fwhm,
            amplitude,
            offset,
        })
    }

    #[inline]
    pub fn eval(&self, wavelength_nm: f64) -> f64 {
        let hw = 0.5 * self.fwhm;
        let d = wavelength_nm - self.center;
        self.offset + self.amplitude * hw * hw / (d * d + hw * hw)
    }
}

/// Background-corrected count rate I_corr = I √(1 − g²(0)).
///
/// Rejects g2_zero outside [0, 1]; a purity above 1 has no single-emitter
/// interpretation.
pub fn corrected_rate(i_raw_cps: f64, g2_zero: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&g2_zero) {
        return Err(Error::InvalidParameter(format!(
            "g2_zero must be in [0, 1], got {g2_zero}"
        )));
    }
    Ok(i_raw_cps * (1.0 - g2_zero).sqrt())
}
