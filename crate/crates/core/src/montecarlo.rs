//! Stochastic photon-stream generation: a two-level emitter under CW or
//! pulsed excitation, routed through HBT or HOM optics with realistic
//! detectors.
//!
//! All randomness is drawn from counter-based substreams keyed by
//! (seed, stage, tag index), so a fixed seed reproduces every stream
//! bit-for-bit regardless of execution order. Emission is a renewal
//! process: an exponential excitation wait at the pump rate followed by an
//! exponential emission wait at 1/τ_rad, which yields the two-level
//! correlation g²(τ) = 1 − e^(−γ₁|τ|) with γ₁ = Γ_p + 1/τ_rad.
//!
//! HOM interference is pairwise: after the path delay, consecutive
//! arrivals closer than 5 τ_c are routed jointly with the bunching excess
//! x = V e^(−2|δ|/τ_c). This reproduces post-selected two-photon
//! statistics in the low-flux regime; keep the mean inter-photon gap
//! above ~20 τ_c.

use crate::hom::HomParams;
use crate::rng::{CounterRng, Stage};
use crate::tags::{ns_to_ps, TagStream};
use crate::{Error, Result};

/// Excitation scheme of the emitter.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Excitation {
    Cw,
    Pulsed {
        rep_rate_mhz: f64,
        pulse_width_ps: f64,
        /// Probability that a pulse leaves the emitter excited.
        excitation_prob: f64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EmitterConfig {
    /// Radiative lifetime, ns.
    pub tau_rad_ns: f64,
    /// CW pump rate Γ_p, excitations per ns (= αP/τ_rad).
    pub pump_rate_per_ns: f64,
    /// Uncorrelated Poissonian background light, counts/s.
    pub background_cps: f64,
    pub excitation: Excitation,
    /// Acquisition span, seconds.
    pub duration_s: f64,
}

impl EmitterConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tau_rad_ns > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "tau_rad must be positive, got {}",
                self.tau_rad_ns
            )));
        }
        if self.pump_rate_per_ns < 0.0 || self.background_cps < 0.0 {
            return Err(Error::InvalidParameter("rates must be nonnegative".into()));
        }
        if !(self.duration_s > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "duration must be positive, got {}",
                self.duration_s
            )));
        }
        if let Excitation::Pulsed {
            rep_rate_mhz,
            pulse_width_ps,
            excitation_prob,
        } = self.excitation
        {
            if !(rep_rate_mhz > 0.0) || pulse_width_ps < 0.0 {
                return Err(Error::InvalidParameter(
                    "pulsed excitation needs a positive rep rate and nonnegative width".into(),
                ));
            }
            if !(0.0..=1.0).contains(&excitation_prob) {
                return Err(Error::InvalidParameter(format!(
                    "excitation_prob must be in [0, 1], got {excitation_prob}"
                )));
            }
        }
        Ok(())
    }
}

/// Single-photon detector model: efficiency thinning, Gaussian timing
/// jitter, dark counts and dead-time removal.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetectorConfig {
    pub efficiency: f64,
    pub jitter_sigma_ps: f64,
    /// Dead time, ns; may be infinite.
    pub dead_time_ns: f64,
    pub dark_cps: f64,
}

impl DetectorConfig {
    /// Unit efficiency, no jitter, no dead time, no dark counts.
    pub fn ideal() -> Self {
        DetectorConfig {
            efficiency: 1.0,
            jitter_sigma_ps: 0.0,
            dead_time_ns: 0.0,
            dark_cps: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.efficiency) {
            return Err(Error::InvalidParameter(format!(
                "efficiency must be in [0, 1], got {}",
                self.efficiency
            )));
        }
        if self.jitter_sigma_ps < 0.0 || self.dead_time_ns < 0.0 || self.dark_cps < 0.0 {
            return Err(Error::InvalidParameter(
                "jitter, dead time and dark rate must be nonnegative".into(),
            ));
        }
        Ok(())
    }
}

impl Default for DetectorConfig {
    fn default() -> Self {
        DetectorConfig::ideal()
    }
}

/// Generate the raw emission stream (channel 0) for the configured
/// emitter. Deterministic for a fixed seed.
pub fn simulate_emission(cfg: &EmitterConfig, seed: u64) -> Result<TagStream> {
    cfg.validate()?;
    let duration_ns = cfg.duration_s * 1e9;
    let duration_ps = ns_to_ps(duration_ns);

    let mut emission_ns: Vec<f64> = Vec::new();
    match cfg.excitation {
        Excitation::Cw => {
            if cfg.pump_rate_per_ns > 0.0 {
                let mut t_ns = 0.0;
                let mut cycle: u64 = 0;
                loop {
                    let mut rng = CounterRng::new(seed, Stage::Emission, cycle);
                    t_ns += rng.exponential(cfg.pump_rate_per_ns);
                    t_ns += rng.exponential(1.0 / cfg.tau_rad_ns);
                    if t_ns >= duration_ns {
                        break;
                    }
                    emission_ns.push(t_ns);
                    cycle += 1;
                }
            }
        }
        Excitation::Pulsed {
            rep_rate_mhz,
            pulse_width_ps,
            excitation_prob,
        } => {
            let period_ns = 1e3 / rep_rate_mhz;
            let n_pulses = (duration_ns / period_ns).floor() as u64;
            for pulse in 0..n_pulses {
                let mut rng = CounterRng::new(seed, Stage::Emission, pulse);
                if !rng.bernoulli(excitation_prob) {
                    continue;
                }
                let t = pulse as f64 * period_ns
                    + rng.uniform() * pulse_width_ps * 1e-3
                    + rng.exponential(1.0 / cfg.tau_rad_ns);
                if t < duration_ns {
                    emission_ns.push(t);
                }
            }
        }
    }

    let mut times_ps: Vec<i64> = emission_ns.iter().map(|&t| ns_to_ps(t)).collect();

    // homogeneous Poisson background
    if cfg.background_cps > 0.0 {
        let rate_per_ns = cfg.background_cps * 1e-9;
        let mut t_ns = 0.0;
        let mut k: u64 = 0;
        loop {
            let mut rng = CounterRng::new(seed, Stage::Background, k);
            t_ns += rng.exponential(rate_per_ns);
            if t_ns >= duration_ns {
                break;
            }
            times_ps.push(ns_to_ps(t_ns));
            k += 1;
        }
    }

    times_ps.sort_unstable();
    let n = times_ps.len();
    TagStream::from_parts(times_ps, vec![0; n], duration_ps)
}

/// Apply detector effects to the tags routed to one channel. Tags carry
/// their index in the pre-routing stream so the per-tag randomness is
/// independent of how routing distributed them.
fn apply_detector(
    tagged: &[(i64, u64)],
    channel: u16,
    det: &DetectorConfig,
    duration_ps: i64,
    seed: u64,
) -> TagStream {
    let mut times: Vec<i64> = Vec::with_capacity(tagged.len());
    for &(t, orig) in tagged {
        let mut rng = CounterRng::new(seed, Stage::DetectorTag(channel), orig);
        if !rng.bernoulli(det.efficiency) {
            continue;
        }
        let jitter = if det.jitter_sigma_ps > 0.0 {
            rng.normal(det.jitter_sigma_ps).round() as i64
        } else {
            0
        };
        times.push(t + jitter);
    }

    if det.dark_cps > 0.0 {
        let rate_per_ns = det.dark_cps * 1e-9;
        let duration_ns = duration_ps as f64 * 1e-3;
        let mut t_ns = 0.0;
        let mut k: u64 = 0;
        loop {
            let mut rng = CounterRng::new(seed, Stage::DetectorDark(channel), k);
            t_ns += rng.exponential(rate_per_ns);
            if t_ns >= duration_ns {
                break;
            }
            times.push(ns_to_ps(t_ns));
            k += 1;
        }
    }

    times.sort_unstable();

    // dead-time removal: drop tags closer than dead_time to the previous
    // accepted tag on this channel
    let dead_ps = det.dead_time_ns * 1e3;
    if dead_ps > 0.0 && !times.is_empty() {
        let mut kept: Vec<i64> = Vec::with_capacity(times.len());
        kept.push(times[0]);
        let mut last = times[0];
        for &t in &times[1..] {
            if ((t - last) as f64) < dead_ps {
                continue;
            }
            kept.push(t);
            last = t;
        }
        times = kept;
    }

    let n = times.len();
    TagStream {
        times_ps: times,
        channels: vec![channel; n],
        duration_ps,
    }
}

/// Route a stream through a beam splitter onto two detectors
/// (Hanbury Brown–Twiss geometry). `split` is (r, t) with r + t = 1;
/// each tag transmits to detector A with probability t.
pub fn route_hbt(
    stream: &TagStream,
    split: (f64, f64),
    det_a: &DetectorConfig,
    det_b: &DetectorConfig,
    seed: u64,
) -> Result<(TagStream, TagStream)> {
    let (r, t) = split;
    if !(0.0..=1.0).contains(&r) || !(0.0..=1.0).contains(&t) || (r + t - 1.0).abs() > 1e-12 {
        return Err(Error::InvalidParameter(format!(
            "splitter must satisfy r + t = 1 with both in [0, 1], got ({r}, {t})"
        )));
    }
    det_a.validate()?;
    det_b.validate()?;

    let mut to_a: Vec<(i64, u64)> = Vec::new();
    let mut to_b: Vec<(i64, u64)> = Vec::new();
    for (i, &time) in stream.times_ps.iter().enumerate() {
        let mut rng = CounterRng::new(seed, Stage::HbtRoute, i as u64);
        if rng.bernoulli(t) {
            to_a.push((time, i as u64));
        } else {
            to_b.push((time, i as u64));
        }
    }
    let a = apply_detector(&to_a, 0, det_a, stream.duration_ps, seed);
    let b = apply_detector(&to_b, 1, det_b, stream.duration_ps, seed);
    Ok((a, b))
}

/// Route a stream through the unbalanced Mach-Zehnder interferometer onto
/// two detectors (Hong-Ou-Mandel geometry).
///
/// Each tag takes the short path (probability t1) or the long path
/// (probability r1, adding dtau2). After sorting by arrival at the second
/// splitter, disjoint consecutive pairs closer than 5 τ_c are routed
/// jointly:
///
/// P(A,B) = 2 r2 t2 (1 − x),  P(A,A) = t2² + r2 t2 x,  P(B,B) = r2² + r2 t2 x
///
/// with x = V e^(−2|δ|/τ_c); the three probabilities sum to one exactly.
/// Unpaired tags route independently (A with probability t2), which is
/// the x = 0 marginal of the joint law.
pub fn route_hom(
    stream: &TagStream,
    params: &HomParams,
    det_a: &DetectorConfig,
    det_b: &DetectorConfig,
    seed: u64,
) -> Result<(TagStream, TagStream)> {
    params.validate()?;
    det_a.validate()?;
    det_b.validate()?;
    let s = params.splitters;
    let delay_ps = ns_to_ps(params.dtau2);
    let pair_window_ps = 5.0 * params.tau_c; // tau_c is in ps

    // path choice, then arrival order at the second splitter
    let mut arrivals: Vec<(i64, u64)> = Vec::with_capacity(stream.len());
    for (i, &time) in stream.times_ps.iter().enumerate() {
        let mut rng = CounterRng::new(seed, Stage::HomPath, i as u64);
        let t = if rng.bernoulli(s.t1) {
            time
        } else {
            time + delay_ps
        };
        arrivals.push((t, i as u64));
    }
    arrivals.sort_unstable();

    let mut to_a: Vec<(i64, u64)> = Vec::new();
    let mut to_b: Vec<(i64, u64)> = Vec::new();
    let mut i = 0;
    while i < arrivals.len() {
        let (t_first, orig_first) = arrivals[i];
        if i + 1 < arrivals.len() {
            let (t_second, orig_second) = arrivals[i + 1];
            let delta = (t_second - t_first) as f64;
            if delta < pair_window_ps {
                let x = params.visibility * (-2.0 * delta / params.tau_c).exp();
                let p_ab = 2.0 * s.r2 * s.t2 * (1.0 - x);
                let p_aa = s.t2 * s.t2 + s.r2 * s.t2 * x;
                let mut rng = CounterRng::new(seed, Stage::HomPair, orig_first);
                let u = rng.uniform();
                if u < p_ab / 2.0 {
                    to_a.push((t_first, orig_first));
                    to_b.push((t_second, orig_second));
                } else if u < p_ab {
                    to_b.push((t_first, orig_first));
                    to_a.push((t_second, orig_second));
                } else if u < p_ab + p_aa {
                    to_a.push((t_first, orig_first));
                    to_a.push((t_second, orig_second));
                } else {
                    to_b.push((t_first, orig_first));
                    to_b.push((t_second, orig_second));
                }
                i += 2;
                continue;
            }
        }
        let mut rng = CounterRng::new(seed, Stage::HomSingle, orig_first);
        if rng.bernoulli(s.t2) {
            to_a.push((t_first, orig_first));
        } else {
            to_b.push((t_first, orig_first));
        }
        i += 1;
    }
    to_a.sort_unstable();
    to_b.sort_unstable();

    let a = apply_detector(&to_a, 0, det_a, stream.duration_ps, seed);
    let b = apply_detector(&to_b, 1, det_b, stream.duration_ps, seed);
    Ok((a, b))
}
