//! Weighted nonlinear least squares (Levenberg-Marquardt) and the fit
//! recipes used to characterize a source.
//!
//! The engine minimizes Σ wᵢ (yᵢ − f(p, xᵢ))². Jacobians come from the
//! model's analytic gradient when supplied, otherwise from central finite
//! differences. Damping follows the Marquardt convention
//! (JᵀWJ + λ diag(JᵀWJ)) δ = JᵀW r, starting at λ = 1e-3, ×10 on a
//! rejected step and ÷10 on acceptance; accepted steps never increase the
//! objective. Box bounds are enforced by projection. Parameter
//! uncertainties are asymptotic: √diag (JᵀWJ)⁻¹ scaled by the reduced χ².

mod recipes;

pub use recipes::{
    fit_g2_cw, fit_gamma1_linear, fit_hom_joint, fit_lorentzian, fit_saturation, g2_cw_model,
    gaussian_2d_model, hom_joint_model, lorentzian_model, saturation_model, HomJointFit, HomPoint,
};

use nalgebra::{DMatrix, DVector};

use crate::{Error, Result};

pub type ModelFn<X> = Box<dyn Fn(&[f64], &X) -> f64 + Sync>;
pub type GradientFn<X> = Box<dyn Fn(&[f64], &X) -> Vec<f64> + Sync>;

/// A scalar model y = f(params, x) with optional analytic gradient and box
/// bounds. `X` is the abscissa type (plain f64 for curves, richer types
/// for joint or 2-D fits).
pub struct ModelSpec<X> {
    pub name: &'static str,
    pub param_names: Vec<&'static str>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub eval: ModelFn<X>,
    /// ∂f/∂p at (params, x); same length and order as `param_names`.
    pub gradient: Option<GradientFn<X>>,
}

impl<X> ModelSpec<X> {
    pub fn n_params(&self) -> usize {
        self.param_names.len()
    }

    /// Finite-difference gradient (central differences), used when no
    /// analytic gradient is supplied and by the gradient self-checks.
    /// The step is cbrt(eps) of the parameter scale, which balances
    /// truncation against rounding for central differences.
    pub fn fd_gradient(&self, params: &[f64], x: &X) -> Vec<f64> {
        let mut g = vec![0.0; params.len()];
        let mut p = params.to_vec();
        let rel = f64::EPSILON.cbrt();
        for j in 0..params.len() {
            let h = rel * params[j].abs().max(1.0);
            p[j] = params[j] + h;
            let f_plus = (self.eval)(&p, x);
            p[j] = params[j] - h;
            let f_minus = (self.eval)(&p, x);
            p[j] = params[j];
            g[j] = (f_plus - f_minus) / (2.0 * h);
        }
        g
    }

    fn clamp(&self, p: &mut [f64]) {
        for ((v, &lo), &hi) in p.iter_mut().zip(&self.lower).zip(&self.upper) {
            *v = v.clamp(lo, hi);
        }
    }
}

/// Convergence and damping controls.
#[derive(Debug, Clone, Copy)]
pub struct FitOptions {
    pub max_iterations: usize,
    /// Relative objective decrease below which the fit has converged.
    pub ftol: f64,
    /// Infinity-norm of the χ² gradient below which the fit has converged.
    pub gtol: f64,
    pub lambda_init: f64,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions {
            max_iterations: 200,
            ftol: 1e-10,
            gtol: 1e-8,
            lambda_init: 1e-3,
        }
    }
}

/// Fitted parameters with asymptotic uncertainties.
#[derive(Debug, Clone)]
pub struct FitResult {
    pub param_names: Vec<&'static str>,
    pub params: Vec<f64>,
    /// 1σ uncertainties, √diag(covariance).
    pub sigma: Vec<f64>,
    /// Covariance of the parameters, (JᵀWJ)⁻¹ · χ²_red.
    pub covariance: DMatrix<f64>,
    pub chi2: f64,
    pub chi2_reduced: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Objective after the initial point and each accepted step;
    /// nonincreasing by construction.
    pub objective_trace: Vec<f64>,
}

impl FitResult {
    pub fn param(&self, name: &str) -> f64 {
        self.params[self.index_of(name)]
    }

    pub fn sigma_of(&self, name: &str) -> f64 {
        self.sigma[self.index_of(name)]
    }

    fn index_of(&self, name: &str) -> usize {
        self.param_names
            .iter()
            .position(|&n| n == name)
            .unwrap_or_else(|| panic!("no parameter named {name}"))
    }
}

fn residuals<X>(model: &ModelSpec<X>, xs: &[X], ys: &[f64], p: &[f64]) -> DVector<f64> {
    DVector::from_iterator(
        ys.len(),
        xs.iter().zip(ys).map(|(x, &y)| y - (model.eval)(p, x)),
    )
}

fn objective(r: &DVector<f64>, w: &[f64]) -> f64 {
    r.iter().zip(w).map(|(ri, wi)| wi * ri * ri).sum()
}

fn jacobian<X>(model: &ModelSpec<X>, xs: &[X], p: &[f64]) -> DMatrix<f64> {
    let m = model.n_params();
    let mut jac = DMatrix::zeros(xs.len(), m);
    for (i, x) in xs.iter().enumerate() {
        let row = match &model.gradient {
            Some(g) => g(p, x),
            None => model.fd_gradient(p, x),
        };
        for j in 0..m {
            jac[(i, j)] = row[j];
        }
    }
    jac
}

/// JᵀWJ and JᵀWr for the weighted problem.
fn normal_system(
    jac: &DMatrix<f64>,
    r: &DVector<f64>,
    w: &[f64],
) -> (DMatrix<f64>, DVector<f64>) {
    let m = jac.ncols();
    let mut a = DMatrix::zeros(m, m);
    let mut g = DVector::zeros(m);
    for i in 0..jac.nrows() {
        let wi = w[i];
        for j in 0..m {
            let jij = jac[(i, j)];
            g[j] += wi * jij * r[i];
            for k in j..m {
                a[(j, k)] += wi * jij * jac[(i, k)];
            }
        }
    }
    for j in 0..m {
        for k in 0..j {
            a[(j, k)] = a[(k, j)];
        }
    }
    (a, g)
}

/// Levenberg-Marquardt minimization of Σ wᵢ (yᵢ − f(p, xᵢ))².
///
/// Returns the best point found with `converged = false` if the iteration
/// budget runs out; a normal matrix that stays singular under damping is
/// an error.
pub fn fit_nlls<X>(
    model: &ModelSpec<X>,
    xs: &[X],
    ys: &[f64],
    weights: &[f64],
    init: &[f64],
    opts: &FitOptions,
) -> Result<FitResult> {
    let n = xs.len();
    let m = model.n_params();
    if ys.len() != n || weights.len() != n {
        return Err(Error::InvalidParameter(format!(
            "xs/ys/weights lengths differ: {n}/{}/{}",
            ys.len(),
            weights.len()
        )));
    }
    if init.len() != m {
        return Err(Error::InvalidParameter(format!(
            "expected {m} initial parameters, got {}",
            init.len()
        )));
    }
    if n < m {
        return Err(Error::InvalidParameter(format!(
            "need at least as many points ({n}) as parameters ({m})"
        )));
    }
    if weights.iter().any(|&w| !(w > 0.0) || !w.is_finite()) {
        return Err(Error::InvalidParameter(
            "weights must be positive and finite".into(),
        ));
    }

    let mut p = init.to_vec();
    model.clamp(&mut p);

    let mut r = residuals(model, xs, ys, &p);
    let mut chi2 = objective(&r, weights);
    let mut trace = vec![chi2];
    let mut lambda = opts.lambda_init;
    let mut converged = false;
    let mut iterations = 0;

    for iter in 1..=opts.max_iterations {
        iterations = iter;
        let jac = jacobian(model, xs, &p);
        let (mut a, mut g) = normal_system(&jac, &r, weights);

        // peg parameters that sit on a bound with the objective pushing
        // outward; their rows leave the system so the free parameters get
        // a proper constrained step instead of a projected zigzag
        let pegged: Vec<bool> = (0..m)
            .map(|j| {
                (p[j] <= model.lower[j] && g[j] < 0.0)
                    || (p[j] >= model.upper[j] && g[j] > 0.0)
            })
            .collect();
        let free_grad = (0..m)
            .filter(|&j| !pegged[j])
            .map(|j| g[j].abs())
            .fold(0.0, f64::max);
        if 2.0 * free_grad < opts.gtol {
            converged = true;
            break;
        }
        for j in 0..m {
            if pegged[j] {
                g[j] = 0.0;
                for k in 0..m {
                    a[(j, k)] = 0.0;
                    a[(k, j)] = 0.0;
                }
                a[(j, j)] = 1.0;
            }
        }

        let max_diag = (0..m)
            .filter(|&j| !pegged[j])
            .map(|j| a[(j, j)])
            .fold(0.0f64, f64::max);
        if !(max_diag > 0.0) || !max_diag.is_finite() {
            return Err(Error::SingularMatrix);
        }

        // try increasing damping until a step solves and improves
        let mut accepted = false;
        loop {
            let mut damped = a.clone();
            for j in 0..m {
                if pegged[j] {
                    continue;
                }
                // floor keeps unidentifiable directions regularized
                let d = a[(j, j)].max(1e-12 * max_diag);
                damped[(j, j)] += lambda * d;
            }
            let step = damped.cholesky().map(|ch| ch.solve(&g));
            if let Some(step) = step {
                let mut p_new = p.clone();
                for j in 0..m {
                    p_new[j] += step[j];
                }
                model.clamp(&mut p_new);
                let r_new = residuals(model, xs, ys, &p_new);
                let chi2_new = objective(&r_new, weights);
                if chi2_new.is_finite() && chi2_new <= chi2 {
                    let rel_decrease = (chi2 - chi2_new) / chi2.max(f64::MIN_POSITIVE);
                    p = p_new;
                    r = r_new;
                    chi2 = chi2_new;
                    trace.push(chi2);
                    lambda = (lambda / 10.0).max(1e-14);
                    accepted = true;
                    if rel_decrease < opts.ftol {
                        converged = true;
                    }
                    break;
                }
            }
            lambda *= 10.0;
            if lambda > 1e14 {
                break;
            }
        }
        if !accepted {
            // no downhill step exists at any damping: local minimum
            converged = true;
            break;
        }
        if converged {
            break;
        }
    }

    // asymptotic covariance at the solution
    let jac = jacobian(model, xs, &p);
    let (a, _) = normal_system(&jac, &r, weights);
    let dof = n.saturating_sub(m);
    let chi2_reduced = if dof > 0 { chi2 / dof as f64 } else { 0.0 };
    let unit_cov = match a.clone().try_inverse() {
        Some(inv) => inv,
        None => a
            .svd(true, true)
            .pseudo_inverse(1e-12)
            .map_err(|_| Error::SingularMatrix)?,
    };
    let covariance = &unit_cov * chi2_reduced;
    let sigma = (0..m).map(|j| covariance[(j, j)].max(0.0).sqrt()).collect();

    Ok(FitResult {
        param_names: model.param_names.clone(),
        params: p,
        sigma,
        covariance,
        chi2,
        chi2_reduced,
        iterations,
        converged,
        objective_trace: trace,
    })
}
