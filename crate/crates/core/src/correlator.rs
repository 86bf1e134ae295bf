//! Second-order coincidence correlation of detector tag streams.
//!
//! Counting is multi-start multi-stop: every pair (t_a, t_b) with
//! |t_b − t_a| < tau_max contributes, not just first-stop pairs, so the
//! histogram estimates the true correlation function at any rate. The
//! sweep is a sorted two-stream sliding window, O(n + m + pairs), chunked
//! over workers; chunk merge is plain integer addition, so parallel and
//! serial runs agree exactly.

use rayon::prelude::*;

use crate::tags::TagStream;
use crate::{Error, Result};

/// Binned coincidence counts over signed delay τ = t_b − t_a.
///
/// Bins are half-open `[k·Δ, (k+1)·Δ)` spanning `[−tau_max, +tau_max)`.
/// `normalized`, when present, holds counts divided by the expected pairs
/// per bin for uncorrelated light; it is the value plotted and fitted as
/// g²(τ).
#[derive(Debug, Clone, PartialEq)]
pub struct Histogram {
    pub bin_width_ps: i64,
    pub tau_max_ps: i64,
    pub counts: Vec<u64>,
    pub normalized: Option<Vec<f64>>,
}

impl Histogram {
    pub fn n_bins(&self) -> usize {
        self.counts.len()
    }

    pub fn bin_start_ps(&self, i: usize) -> i64 {
        -self.tau_max_ps + i as i64 * self.bin_width_ps
    }

    pub fn bin_center_ns(&self, i: usize) -> f64 {
        (self.bin_start_ps(i) as f64 + 0.5 * self.bin_width_ps as f64) * 1e-3
    }

    pub fn total_pairs(&self) -> u64 {
        self.counts.iter().sum()
    }

    /// Expected pairs per bin for uncorrelated light, derived from the
    /// bin with the most counts. `None` until [`normalize_g2`] has run.
    pub fn norm(&self) -> Option<f64> {
        let normalized = self.normalized.as_ref()?;
        let (i, &c) = self.counts.iter().enumerate().max_by_key(|(_, &c)| c)?;
        if c == 0 || normalized[i] <= 0.0 {
            return None;
        }
        Some(c as f64 / normalized[i])
    }

    /// Index of the bin containing τ = 0, i.e. `[0, Δ)`.
    pub fn zero_bin(&self) -> usize {
        (self.tau_max_ps / self.bin_width_ps) as usize
    }

    /// Merge by element-wise addition. Both histograms must share the same
    /// binning; normalization does not survive a merge.
    pub fn merge(mut self, other: &Histogram) -> Result<Histogram> {
        if self.bin_width_ps != other.bin_width_ps || self.tau_max_ps != other.tau_max_ps {
            return Err(Error::InvalidParameter(
                "cannot merge histograms with different binning".into(),
            ));
        }
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            *a += b;
        }
        self.normalized = None;
        Ok(self)
    }
}

fn validate_binning(bin_width_ps: i64, tau_max_ps: i64) -> Result<()> {
    if bin_width_ps <= 0 {
        return Err(Error::InvalidParameter(format!(
            "bin width must be positive, got {bin_width_ps}"
        )));
    }
    if bin_width_ps > tau_max_ps {
        return Err(Error::InvalidParameter(format!(
            "bin width {bin_width_ps} exceeds tau_max {tau_max_ps}"
        )));
    }
    if tau_max_ps % bin_width_ps != 0 {
        return Err(Error::InvalidParameter(format!(
            "tau_max {tau_max_ps} is not a multiple of bin width {bin_width_ps}"
        )));
    }
    Ok(())
}

/// Sweep one chunk of stream a against stream b. `a_offset` is the global
/// index of `ta[0]`; when `exclude_same_index` is set the streams are the
/// same array and self-pairs (i == j) are skipped.
fn sweep_chunk(
    ta: &[i64],
    a_offset: usize,
    tb: &[i64],
    bin_width_ps: i64,
    tau_max_ps: i64,
    exclude_same_index: bool,
    counts: &mut [u64],
) {
    if ta.is_empty() || tb.is_empty() {
        return;
    }
    // first b index with tb[j] > ta[0] - tau_max
    let mut lo = tb.partition_point(|&t| t <= ta[0] - tau_max_ps);
    for (k, &t_a) in ta.iter().enumerate() {
        let min = t_a - tau_max_ps;
        while lo < tb.len() && tb[lo] <= min {
            lo += 1;
        }
        let max = t_a + tau_max_ps;
        let mut j = lo;
        while j < tb.len() && tb[j] < max {
            if !(exclude_same_index && a_offset + k == j) {
                let bin = ((tb[j] - t_a + tau_max_ps) / bin_width_ps) as usize;
                counts[bin] += 1;
            }
            j += 1;
        }
    }
}

fn correlate_impl(
    ta: &[i64],
    tb: &[i64],
    bin_width_ps: i64,
    tau_max_ps: i64,
    exclude_same_index: bool,
) -> Vec<u64> {
    let n_bins = (2 * tau_max_ps / bin_width_ps) as usize;
    const CHUNK: usize = 1 << 16;
    if ta.len() <= CHUNK {
        let mut counts = vec![0u64; n_bins];
        sweep_chunk(
            ta,
            0,
            tb,
            bin_width_ps,
            tau_max_ps,
            exclude_same_index,
            &mut counts,
        );
        return counts;
    }
    ta.par_chunks(CHUNK)
        .enumerate()
        .map(|(ci, chunk)| {
            let mut counts = vec![0u64; n_bins];
            sweep_chunk(
                chunk,
                ci * CHUNK,
                tb,
                bin_width_ps,
                tau_max_ps,
                exclude_same_index,
                &mut counts,
            );
            counts
        })
        .reduce(
            || vec![0u64; n_bins],
            |mut acc, part| {
                for (a, p) in acc.iter_mut().zip(&part) {
                    *a += p;
                }
                acc
            },
        )
}

/// Histogram the signed delays t_b − t_a of all pairs within the window.
pub fn cross_correlate(
    a: &TagStream,
    b: &TagStream,
    bin_width_ps: i64,
    tau_max_ps: i64,
) -> Result<Histogram> {
    validate_binning(bin_width_ps, tau_max_ps)?;
    if !a.is_sorted() || !b.is_sorted() {
        return Err(Error::UnsortedStream);
    }
    let counts = correlate_impl(&a.times_ps, &b.times_ps, bin_width_ps, tau_max_ps, false);
    Ok(Histogram {
        bin_width_ps,
        tau_max_ps,
        counts,
        normalized: None,
    })
}

/// Correlate a stream against itself, excluding self-pairs.
pub fn autocorrelate(s: &TagStream, bin_width_ps: i64, tau_max_ps: i64) -> Result<Histogram> {
    validate_binning(bin_width_ps, tau_max_ps)?;
    if !s.is_sorted() {
        return Err(Error::UnsortedStream);
    }
    let counts = correlate_impl(&s.times_ps, &s.times_ps, bin_width_ps, tau_max_ps, true);
    Ok(Histogram {
        bin_width_ps,
        tau_max_ps,
        counts,
        normalized: None,
    })
}

/// Mean detected rate over the acquisition span.
pub fn count_rate(s: &TagStream) -> Result<f64> {
    if s.duration_ps <= 0 {
        return Err(Error::InvalidParameter(format!(
            "stream duration must be positive, got {} ps",
            s.duration_ps
        )));
    }
    Ok(s.len() as f64 / s.duration_s())
}

/// Divide counts by the expected pairs per bin for uncorrelated light,
/// rate_a · rate_b · bin_width · duration; far-tail bins of uncorrelated
/// streams then average to 1.
pub fn normalize_g2(
    mut h: Histogram,
    rate_a_cps: f64,
    rate_b_cps: f64,
    duration_s: f64,
) -> Result<Histogram> {
    if !(rate_a_cps > 0.0) || !(rate_b_cps > 0.0) || !(duration_s > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "rates and duration must be positive, got {rate_a_cps}, {rate_b_cps}, {duration_s}"
        )));
    }
    let norm = rate_a_cps * rate_b_cps * (h.bin_width_ps as f64 * 1e-12) * duration_s;
    h.normalized = Some(h.counts.iter().map(|&c| c as f64 / norm).collect());
    Ok(h)
}

/// Pulsed-excitation purity: the ratio of the zero-delay peak area to the
/// mean side-peak area, with Poisson (√N) uncertainty propagation.
///
/// Each window spans `window_ns` centered on k · rep_period for
/// k = 0, ±1, …, ±n_side_peaks; bins belong to a window when their center
/// falls inside it.
pub fn pulsed_g2_zero(
    h: &Histogram,
    rep_period_ns: f64,
    window_ns: f64,
    n_side_peaks: usize,
) -> Result<(f64, f64)> {
    if !(rep_period_ns > 0.0) || !(window_ns > 0.0) {
        return Err(Error::InvalidParameter(
            "rep_period and window must be positive".into(),
        ));
    }
    if window_ns >= rep_period_ns {
        return Err(Error::InvalidParameter(format!(
            "window {window_ns} ns must be below the repetition period {rep_period_ns} ns"
        )));
    }
    if n_side_peaks == 0 {
        return Err(Error::InvalidParameter(
            "need at least one side peak".into(),
        ));
    }
    let span_ns = h.tau_max_ps as f64 * 1e-3;
    if span_ns + 1e-9 < n_side_peaks as f64 * rep_period_ns + window_ns / 2.0 {
        return Err(Error::InvalidParameter(format!(
            "histogram spans {span_ns} ns; needs {n_side_peaks} periods of {rep_period_ns} ns each side"
        )));
    }

    let window_area = |center_ns: f64| -> u64 {
        let lo = center_ns - window_ns / 2.0;
        let hi = center_ns + window_ns / 2.0;
        (0..h.n_bins())
            .filter(|&i| {
                let c = h.bin_center_ns(i);
                c >= lo && c < hi
            })
            .map(|i| h.counts[i])
            .sum()
    };

    let central = window_area(0.0);
    let mut side_total = 0u64;
    for k in 1..=n_side_peaks {
        for sign in [-1.0, 1.0] {
            let area = window_area(sign * k as f64 * rep_period_ns);
            if area == 0 {
                return Err(Error::InvalidParameter(format!(
                    "side peak at {} ns has no counts",
                    sign * k as f64 * rep_period_ns
                )));
            }
            side_total += area;
        }
    }
    let side_mean = side_total as f64 / (2 * n_side_peaks) as f64;
    let g2 = central as f64 / side_mean;
    // var(g2) = g2^2 (1/C + 1/S_total) from sqrt(N) on each area
    let sigma = if central > 0 {
        g2 * (1.0 / central as f64 + 1.0 / side_total as f64).sqrt()
    } else {
        0.0
    };
    Ok((g2, sigma))
}
