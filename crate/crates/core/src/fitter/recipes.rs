//! The concrete fit recipes: CW antibunching, saturation, decay-rate
//! line, joint HOM, and Lorentzian spectra. Each recipe packages a model,
//! data-driven initial guesses and Poisson weighting around the shared
//! engine.

use nalgebra::DMatrix;

use super::{fit_nlls, FitOptions, FitResult, ModelSpec};
use crate::correlator::Histogram;
use crate::hom::{visibility_corrected, visibility_raw, HomParams, SplitterPair};
use crate::models::G2TwoLevelParams;
use crate::{Error, Result};

/// Two-level antibunching model over delay in ns; params [g2_zero, gamma1].
pub fn g2_cw_model() -> ModelSpec<f64> {
    ModelSpec {
        name: "g2_two_level",
        param_names: vec!["g2_zero", "gamma1"],
        lower: vec![0.0, 1e-6],
        upper: vec![1.0 - 1e-9, 1e4],
        eval: Box::new(|p, tau| 1.0 - (1.0 - p[0]) * (-p[1] * tau.abs()).exp()),
        gradient: Some(Box::new(|p, tau| {
            let e = (-p[1] * tau.abs()).exp();
            vec![e, (1.0 - p[0]) * tau.abs() * e]
        })),
    }
}

/// Saturation curve over pump power in µW; params [i0, i_sat, p_sat].
pub fn saturation_model() -> ModelSpec<f64> {
    ModelSpec {
        name: "saturation",
        param_names: vec!["i0", "i_sat", "p_sat"],
        lower: vec![0.0, 1e-12, 1e-9],
        upper: vec![1e15, 1e15, 1e9],
        eval: Box::new(|p, power| p[0] + p[1] * (1.0 - (-power / p[2]).exp())),
        gradient: Some(Box::new(|p, power| {
            let u = (-power / p[2]).exp();
            vec![1.0, 1.0 - u, -p[1] * u * power / (p[2] * p[2])]
        })),
    }
}

/// Peak-normalized Lorentzian over wavelength in nm;
/// params [center, fwhm, amplitude, offset].
pub fn lorentzian_model() -> ModelSpec<f64> {
    ModelSpec {
        name: "lorentzian",
        param_names: vec!["center", "fwhm", "amplitude", "offset"],
        lower: vec![-1e12, 1e-12, 1e-12, 0.0],
        upper: vec![1e12, 1e12, 1e15, 1e15],
        eval: Box::new(|p, lambda| {
            let h = 0.5 * p[1];
            let d = lambda - p[0];
            p[3] + p[2] * h * h / (d * d + h * h)
        }),
        gradient: Some(Box::new(|p, lambda| {
            let h = 0.5 * p[1];
            let d = lambda - p[0];
            let den = d * d + h * h;
            vec![
                p[2] * h * h * 2.0 * d / (den * den),
                p[2] * 0.5 * h * d * d / (den * den) * 2.0,
                h * h / den,
                1.0,
            ]
        })),
    }
}

/// One abscissa of the joint HOM fit: a delay plus which histogram
/// (co- or cross-polarized) the value came from.
#[derive(Debug, Clone, Copy)]
pub struct HomPoint {
    pub tau_ns: f64,
    pub co: bool,
}

/// Joint HOM model with fixed splitters and interferometer delay;
/// params [g2_zero, gamma1, visibility, tau_c_ps].
pub fn hom_joint_model(splitters: SplitterPair, dtau2_ns: f64) -> ModelSpec<HomPoint> {
    let s = splitters;
    let k1 = 4.0 * (s.t1 * s.t1 + s.r1 * s.r1) * s.r2 * s.t2;
    let k2a = 4.0 * s.r1 * s.t1 * s.t2 * s.t2;
    let k2b = 4.0 * s.r1 * s.t1 * s.r2 * s.r2;
    let eval = move |p: &[f64], x: &HomPoint| {
        let g = |t: f64| 1.0 - (1.0 - p[0]) * (-p[1] * t.abs()).exp();
        let bracket = k2a * g(x.tau_ns - dtau2_ns) + k2b * g(x.tau_ns + dtau2_ns);
        let suppression = if x.co {
            1.0 - p[2] * (-2.0 * x.tau_ns.abs() / (p[3] * 1e-3)).exp()
        } else {
            1.0
        };
        k1 * g(x.tau_ns) + bracket * suppression
    };
    let gradient = move |p: &[f64], x: &HomPoint| {
        let e = |t: f64| (-p[1] * t.abs()).exp();
        let g = |t: f64| 1.0 - (1.0 - p[0]) * e(t);
        let (e0, ea, eb) = (e(x.tau_ns), e(x.tau_ns - dtau2_ns), e(x.tau_ns + dtau2_ns));
        let bracket = k2a * g(x.tau_ns - dtau2_ns) + k2b * g(x.tau_ns + dtau2_ns);
        let tau_c_ns = p[3] * 1e-3;
        let interference = (-2.0 * x.tau_ns.abs() / tau_c_ns).exp();
        let suppression = if x.co { 1.0 - p[2] * interference } else { 1.0 };
        let d_g0 = k1 * e0 + suppression * (k2a * ea + k2b * eb);
        let d_gamma = (1.0 - p[0])
            * (k1 * x.tau_ns.abs() * e0
                + suppression
                    * (k2a * (x.tau_ns - dtau2_ns).abs() * ea
                        + k2b * (x.tau_ns + dtau2_ns).abs() * eb));
        let (d_v, d_tau_c) = if x.co {
            (
                -bracket * interference,
                // d/d(tau_c_ps) of -v e^(-2|tau|/tau_c_ns), chain rule ps->ns
                -bracket * p[2] * interference * (2.0 * x.tau_ns.abs() / (tau_c_ns * tau_c_ns))
                    * 1e-3,
            )
        } else {
            (0.0, 0.0)
        };
        vec![d_g0, d_gamma, d_v, d_tau_c]
    };
    ModelSpec {
        name: "hom_joint",
        param_names: vec!["g2_zero", "gamma1", "visibility", "tau_c"],
        lower: vec![0.0, 1e-6, 0.0, 1e-3],
        upper: vec![1.0 - 1e-9, 1e4, 1.0, 1e7],
        eval: Box::new(eval),
        gradient: Some(Box::new(gradient)),
    }
}

/// Elliptical Gaussian amplitude over (x, y) in µm;
/// params [amplitude, center_x, center_y, waist_x, waist_y] with 1/e field
/// radii.
pub fn gaussian_2d_model() -> ModelSpec<(f64, f64)> {
    ModelSpec {
        name: "gaussian_2d",
        param_names: vec!["amplitude", "center_x", "center_y", "waist_x", "waist_y"],
        lower: vec![1e-15, -1e9, -1e9, 1e-12, 1e-12],
        upper: vec![1e15, 1e9, 1e9, 1e9, 1e9],
        eval: Box::new(|p, &(x, y)| {
            let dx = (x - p[1]) / p[3];
            let dy = (y - p[2]) / p[4];
            p[0] * (-(dx * dx + dy * dy)).exp()
        }),
        gradient: Some(Box::new(|p, &(x, y)| {
            let dx = (x - p[1]) / p[3];
            let dy = (y - p[2]) / p[4];
            let f = (-(dx * dx + dy * dy)).exp();
            vec![
                f,
                p[0] * f * 2.0 * dx / p[3],
                p[0] * f * 2.0 * dy / p[4],
                p[0] * f * 2.0 * dx * dx / p[3],
                p[0] * f * 2.0 * dy * dy / p[4],
            ]
        })),
    }
}

/// Delays (ns), normalized values and Poisson weights of every bin.
///
/// Weights are expressed in normalized units, norm²/counts, which makes
/// the χ² identical to the count-space Poisson form
/// Σ (c − norm·m)²/c; zero-count bins are weighted as one count.
fn histogram_points(h: &Histogram) -> Result<(Vec<f64>, Vec<f64>, Vec<f64>)> {
    let normalized = h.normalized.as_ref().ok_or(Error::NotNormalized)?;
    let norm = h
        .norm()
        .ok_or_else(|| Error::InvalidParameter("histogram has no counts".into()))?;
    let xs: Vec<f64> = (0..h.n_bins()).map(|i| h.bin_center_ns(i)).collect();
    let ws: Vec<f64> = h
        .counts
        .iter()
        .map(|&c| norm * norm / c.max(1) as f64)
        .collect();
    Ok((xs, normalized.clone(), ws))
}

/// Fit the two-level antibunching model to a normalized CW histogram.
///
/// Initial guesses: g²(0) from the minimum bin, γ₁ from the 1/e recovery
/// of the dip.
pub fn fit_g2_cw(h: &Histogram) -> Result<FitResult> {
    let (xs, ys, ws) = histogram_points(h)?;
    let min = ys.iter().cloned().fold(f64::INFINITY, f64::min);
    let g0_init = min.clamp(0.0, 0.999);
    let depth = 1.0 - g0_init;
    // dip depth has decayed to 1/e of itself at tau = 1/gamma
    let target = 1.0 - depth / std::f64::consts::E;
    // walk outwards from the zero bin until the dip has recovered to 1/e
    let zero = h.zero_bin();
    let mut gamma_init = 2.0 / (h.tau_max_ps as f64 * 1e-3);
    for i in zero..h.n_bins() {
        if ys[i] >= target {
            let tau = xs[i].abs().max(1e-6);
            gamma_init = 1.0 / tau;
            break;
        }
    }
    fit_nlls(
        &g2_cw_model(),
        &xs,
        &ys,
        &ws,
        &[g0_init, gamma_init],
        &FitOptions::default(),
    )
}

/// Fit the saturation curve to (power µW, rate cps) points.
pub fn fit_saturation(points: &[(f64, f64)]) -> Result<FitResult> {
    if points.len() < 4 {
        return Err(Error::InvalidParameter(format!(
            "saturation fit needs at least 4 points, got {}",
            points.len()
        )));
    }
    let xs: Vec<f64> = points.iter().map(|p| p.0).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.1).collect();
    let w = vec![1.0; xs.len()];
    let y_min = ys.iter().cloned().fold(f64::INFINITY, f64::min);
    let y_max = ys.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let i0_init = y_min.max(0.0);
    let i_sat_init = (y_max - y_min).max(1.0);
    // lowest power at which the curve has climbed to 1 - 1/e of the span
    let knee = i0_init + i_sat_init * (1.0 - 1.0 / std::f64::consts::E);
    let x_max = xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let above_knee = points
        .iter()
        .filter(|p| p.1 >= knee)
        .map(|p| p.0)
        .fold(f64::INFINITY, f64::min);
    let p_sat_init = if above_knee.is_finite() && above_knee > 0.0 {
        above_knee
    } else {
        x_max / 2.0
    }
    .max(1e-6);
    fit_nlls(
        &saturation_model(),
        &xs,
        &ys,
        &w,
        &[i0_init, i_sat_init, p_sat_init],
        &FitOptions::default(),
    )
}

/// Weighted linear fit of γ₁(P) = (1 + αP)/τ_rad; returns
/// [tau_rad, alpha] with first-order-propagated uncertainties.
///
/// `sigmas`, when given, are the 1σ uncertainties of the γ₁ values.
pub fn fit_gamma1_linear(points: &[(f64, f64)], sigmas: Option<&[f64]>) -> Result<FitResult> {
    if points.len() < 2 {
        return Err(Error::InvalidParameter(
            "need at least two pump powers".into(),
        ));
    }
    let n = points.len();
    if let Some(s) = sigmas {
        if s.len() != n {
            return Err(Error::InvalidParameter(format!(
                "expected {n} sigmas, got {}",
                s.len()
            )));
        }
        if s.iter().any(|&v| !(v > 0.0)) {
            return Err(Error::InvalidParameter("sigmas must be positive".into()));
        }
    }
    let w = |i: usize| sigmas.map_or(1.0, |s| 1.0 / (s[i] * s[i]));

    // weighted least squares for gamma1 = a + b * power
    let (mut sw, mut sx, mut sxx, mut sy, mut sxy) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for (i, &(p, g)) in points.iter().enumerate() {
        let wi = w(i);
        sw += wi;
        sx += wi * p;
        sxx += wi * p * p;
        sy += wi * g;
        sxy += wi * p * g;
    }
    let det = sw * sxx - sx * sx;
    if det.abs() < 1e-30 {
        return Err(Error::InvalidParameter(
            "pump powers must not all coincide".into(),
        ));
    }
    let a = (sxx * sy - sx * sxy) / det; // intercept = 1/tau_rad
    let b = (sw * sxy - sx * sy) / det; // slope = alpha/tau_rad
    if a <= 0.0 {
        return Err(Error::Unphysical(format!(
            "non-positive intercept {a} has no lifetime interpretation"
        )));
    }

    let chi2: f64 = points
        .iter()
        .enumerate()
        .map(|(i, &(p, g))| {
            let r = g - a - b * p;
            w(i) * r * r
        })
        .sum();
    let dof = n.saturating_sub(2);
    let chi2_reduced = if dof > 0 { chi2 / dof as f64 } else { 0.0 };
    // covariance of (a, b), scaled by the reduced chi2 like the engine
    let scale = if sigmas.is_some() && dof > 0 {
        1.0
    } else {
        chi2_reduced
    };
    let (va, vb, cab) = (sxx / det * scale, sw / det * scale, -sx / det * scale);

    let tau_rad = 1.0 / a;
    let alpha = b / a;
    // first-order propagation through (a, b) -> (1/a, b/a)
    let j = [[-1.0 / (a * a), 0.0], [-b / (a * a), 1.0 / a]];
    let mut cov = DMatrix::zeros(2, 2);
    let c = [[va, cab], [cab, vb]];
    for r in 0..2 {
        for s in 0..2 {
            let mut acc = 0.0;
            for p in 0..2 {
                for q in 0..2 {
                    acc += j[r][p] * c[p][q] * j[s][q];
                }
            }
            cov[(r, s)] = acc;
        }
    }
    let sigma = vec![cov[(0, 0)].max(0.0).sqrt(), cov[(1, 1)].max(0.0).sqrt()];

    Ok(FitResult {
        param_names: vec!["tau_rad", "alpha"],
        params: vec![tau_rad, alpha],
        sigma,
        covariance: cov,
        chi2,
        chi2_reduced,
        iterations: 1,
        converged: true,
        objective_trace: vec![chi2],
    })
}

/// Joint HOM fit over the co- and cross-polarized histograms.
#[derive(Debug, Clone)]
pub struct HomJointFit {
    pub fit: FitResult,
    /// Zero-delay values of the fitted model curves.
    pub g2_co_zero: f64,
    pub g2_cross_zero: f64,
    /// Raw visibility 1 − g∥(0)/g⊥(0) at the fitted zero-delay values.
    pub v_raw: f64,
    /// Purity-corrected visibility upper bound.
    pub m_s: f64,
}

/// Simultaneously fit the cross-polarized histogram (fixing the base g²
/// parameters) and the co-polarized histogram (adding V and τ_c).
///
/// The cross histogram is fit alone first; if that stage does not
/// converge the joint stage is not attempted.
pub fn fit_hom_joint(
    h_co: &Histogram,
    h_cross: &Histogram,
    splitters: SplitterPair,
    dtau2_ns: f64,
) -> Result<HomJointFit> {
    splitters.validate()?;
    if !(dtau2_ns > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "dtau2 must be positive, got {dtau2_ns}"
        )));
    }
    if h_co.bin_width_ps != h_cross.bin_width_ps || h_co.tau_max_ps != h_cross.tau_max_ps {
        return Err(Error::InvalidParameter(
            "co and cross histograms must share the same binning".into(),
        ));
    }
    let (xs_co, ys_co, ws_co) = histogram_points(h_co)?;
    let (xs_cross, ys_cross, ws_cross) = histogram_points(h_cross)?;

    // stage 1: cross-polarized alone pins the base g2 parameters
    let model = hom_joint_model(splitters, dtau2_ns);
    let cross_points: Vec<HomPoint> = xs_cross
        .iter()
        .map(|&tau_ns| HomPoint { tau_ns, co: false })
        .collect();
    let tail = tail_mean(&ys_cross);
    let zero = h_cross.zero_bin();
    let gamma_init = gamma_from_dip(&xs_cross, &ys_cross, zero, tail);
    let g0_init = 0.05;
    // visibility and tau_c are inert on cross data; pin them via bounds
    let cross_model = ModelSpec {
        name: "hom_cross",
        param_names: model.param_names.clone(),
        lower: vec![0.0, 1e-6, 0.0, 449.0],
        upper: vec![1.0 - 1e-9, 1e4, 0.0, 451.0],
        eval: model.eval,
        gradient: model.gradient,
    };
    let stage1 = fit_nlls(
        &cross_model,
        &cross_points,
        &ys_cross,
        &ws_cross,
        &[g0_init, gamma_init, 0.0, 450.0],
        &FitOptions::default(),
    )?;
    if !stage1.converged {
        return Err(Error::NonConvergence(
            "cross-polarized stage did not converge".into(),
        ));
    }

    // stage 2: joint fit of both histograms
    let model = hom_joint_model(splitters, dtau2_ns);
    let mut points: Vec<HomPoint> = cross_points;
    points.extend(xs_co.iter().map(|&tau_ns| HomPoint { tau_ns, co: true }));
    let mut ys = ys_cross.clone();
    ys.extend_from_slice(&ys_co);
    let mut ws = ws_cross;
    ws.extend_from_slice(&ws_co);

    let v_init = (1.0 - ys_co[h_co.zero_bin()] / ys_cross[zero].max(1e-12)).clamp(0.0, 0.99);
    let init = [
        stage1.params[0],
        stage1.params[1],
        v_init,
        0.1 * dtau2_ns * 1e3, // well inside the dip structure
    ];
    let fit = fit_nlls(&model, &points, &ys, &ws, &init, &FitOptions::default())?;

    let p = HomParams {
        splitters,
        dtau2: dtau2_ns,
        visibility: fit.params[2],
        tau_c: fit.params[3],
        base: G2TwoLevelParams::new(fit.params[0], fit.params[1])?,
    };
    let g2_co_zero = p.g2_co(0.0);
    let g2_cross_zero = p.g2_cross(0.0);
    let v_raw = visibility_raw(g2_co_zero, g2_cross_zero)?;
    let m_s = visibility_corrected(v_raw, fit.params[0])?;
    Ok(HomJointFit {
        fit,
        g2_co_zero,
        g2_cross_zero,
        v_raw,
        m_s,
    })
}

fn tail_mean(ys: &[f64]) -> f64 {
    let k = (ys.len() / 20).max(1);
    let head: f64 = ys.iter().take(k).sum();
    let tail: f64 = ys.iter().rev().take(k).sum();
    (head + tail) / (2 * k) as f64
}

/// Decay-rate guess from the half-recovery width of the central dip.
fn gamma_from_dip(xs: &[f64], ys: &[f64], zero: usize, tail: f64) -> f64 {
    let depth = tail - ys[zero];
    if depth <= 0.0 {
        return 1.0;
    }
    let target = tail - 0.5 * depth;
    for i in zero..ys.len() {
        if ys[i] >= target {
            let tau = xs[i].abs().max(1e-6);
            return std::f64::consts::LN_2 / tau;
        }
    }
    1.0
}

/// Fit a Lorentzian line to (wavelength nm, counts) points with Poisson
/// weights. Weights start from the observed counts and are rebuilt once
/// from the fitted curve, which removes the low-count bias of weighting
/// by observations.
///
/// Initial guesses: center at the maximum, offset at the minimum,
/// FWHM from the half-maximum span.
pub fn fit_lorentzian(points: &[(f64, f64)]) -> Result<FitResult> {
    if points.len() < 5 {
        return Err(Error::InvalidParameter(format!(
            "Lorentzian fit needs at least 5 points, got {}",
            points.len()
        )));
    }
    let xs: Vec<f64> = points.iter().map(|p| p.0).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.1).collect();
    let ws: Vec<f64> = ys.iter().map(|&y| 1.0 / y.max(1.0)).collect();
    let (i_max, y_max) = ys
        .iter()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |acc, (i, &y)| {
            if y > acc.1 {
                (i, y)
            } else {
                acc
            }
        });
    let y_min = ys.iter().cloned().fold(f64::INFINITY, f64::min);
    let amp_init = (y_max - y_min).max(1e-9);
    let half = y_min + amp_init / 2.0;
    let mut left = xs[i_max];
    for i in (0..=i_max).rev() {
        if ys[i] < half {
            break;
        }
        left = xs[i];
    }
    let mut right = xs[i_max];
    for i in i_max..xs.len() {
        if ys[i] < half {
            break;
        }
        right = xs[i];
    }
    let span = (right - left).abs();
    let x_span = xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
        - xs.iter().cloned().fold(f64::INFINITY, f64::min);
    let fwhm_init = if span > 0.0 { span } else { x_span / 4.0 };
    let init = [xs[i_max], fwhm_init, amp_init, y_min.max(0.0)];
    let model = lorentzian_model();
    let first = fit_nlls(&model, &xs, &ys, &ws, &init, &FitOptions::default())?;
    let ws: Vec<f64> = xs
        .iter()
        .map(|x| 1.0 / (model.eval)(&first.params, x).max(1.0))
        .collect();
    fit_nlls(&model, &xs, &ys, &ws, &first.params, &FitOptions::default())
}
