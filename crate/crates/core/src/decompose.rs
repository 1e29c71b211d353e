//! The two sequential estimation stages.
//!
//! Illumination is refined from the luma channel alone; only afterwards is
//! the reflectance of each RGB channel estimated against the fixed,
//! normalized illumination. Nothing flows back from the reflectance to the
//! illumination.

use rayon::prelude::*;

use crate::error::{JedError, Result};
use crate::gradient::{
    adjusted_gradient, apply_div_transpose, forward_diff, illumination_weights,
    reflectance_weights, AdjustedGradient, Direction, ReflectanceWeights,
};
use crate::image::{rgb_to_luma, ColorImage, ImagePlane};
use crate::pipeline::JedParams;
use crate::solver::{solve, SolveReport, WeightedLaplacianOperator};

/// Everything the enhancement is recomposed from.
#[derive(Debug, Clone, PartialEq)]
pub struct DecompositionResult {
    /// Solver output for the illumination, before normalization.
    pub raw_illumination: ImagePlane,
    /// Normalized illumination `L'`, in `[eps_div, 1]`.
    pub illumination: ImagePlane,
    /// Reflectance per channel, clamped to `[0, 1]`.
    pub reflectance: ColorImage,
    pub illumination_report: SolveReport,
    pub reflectance_reports: [SolveReport; 3],
}

impl DecompositionResult {
    pub fn reports(&self) -> [SolveReport; 4] {
        let [r, g, b] = self.reflectance_reports;
        [self.illumination_report, r, g, b]
    }

    pub fn converged(&self) -> bool {
        self.reports().iter().all(|r| r.converged)
    }
}

/// Operator `I + Σ_d D_dᵀ Diag(a_d) D_d` of the illumination stage.
pub fn illumination_operator(
    l_hat: &ImagePlane,
    params: &JedParams,
) -> Result<WeightedLaplacianOperator> {
    let a = illumination_weights(l_hat, params.alpha, params.eps_stab)?;
    WeightedLaplacianOperator::new(1.0, a.a_h, a.a_v)
}

/// Refines the initial illumination `l_hat` with the reweighted-ℓ1 smoothness prior.
///
/// The result is not clamped; see [`normalize_illumination`].
pub fn estimate_illumination(
    l_hat: &ImagePlane,
    params: &JedParams,
) -> Result<(ImagePlane, SolveReport)> {
    params.validate()?;
    if params.alpha == 0.0 || l_hat.len() == 1 {
        return Ok((l_hat.clone(), SolveReport::trivial()));
    }
    let op = illumination_operator(l_hat, params)?;
    solve(&op, l_hat, params.tol, params.max_iter)
}

/// Clamps the refined illumination into `[eps_div, 1]`.
pub fn normalize_illumination(l: &ImagePlane, eps_div: f64) -> ImagePlane {
    l.clamp(eps_div, 1.0)
}

/// The linear systems of the reflectance stage, one right-hand side per channel.
#[derive(Debug, Clone)]
pub struct ReflectanceSystem {
    /// Shared by all three channels: `I + Σ_d D_dᵀ Diag(β w_d + ω) D_d`.
    pub operator: WeightedLaplacianOperator,
    pub weights: ReflectanceWeights,
    pub targets: [AdjustedGradient; 3],
    /// `S_c / L + ω Σ_d D_dᵀ g_d` for each channel.
    pub rhs: [ImagePlane; 3],
}

pub fn reflectance_system(
    s: &ColorImage,
    l: &ImagePlane,
    params: &JedParams,
) -> Result<ReflectanceSystem> {
    params.validate()?;
    s.r.check_dims(l)?;
    if let Some(&low) = l.as_slice().iter().find(|&&v| v < params.eps_div) {
        return Err(JedError::Precondition(format!(
            "illumination must be normalized to at least eps_div = {}, found {low}",
            params.eps_div
        )));
    }

    let weights = reflectance_weights(&rgb_to_luma(s), params.eps_stab)?;
    let fold = |w: &ImagePlane| w.map(|w| params.beta * w + params.omega);
    let operator = WeightedLaplacianOperator::new(1.0, fold(&weights.w_h), fold(&weights.w_v))?;

    let mut targets = Vec::with_capacity(3);
    let mut rhs = Vec::with_capacity(3);
    for chan in s.planes() {
        let g = adjusted_gradient(chan, params.lambda, params.sigma, params.eps_thresh)?;
        let mut b = chan.zip_map(l, |s, l| s / l)?;
        for d in Direction::ALL {
            let div = apply_div_transpose(g.get(d), d);
            b = b.zip_map(&div, |b, t| b + params.omega * t)?;
        }
        targets.push(g);
        rhs.push(b);
    }
    Ok(ReflectanceSystem {
        operator,
        weights,
        targets: targets.try_into().expect("three channels"),
        rhs: rhs.try_into().expect("three channels"),
    })
}

/// Solves the three reflectance systems without clamping the result.
pub fn estimate_reflectance_unclamped(
    s: &ColorImage,
    l: &ImagePlane,
    params: &JedParams,
) -> Result<([ImagePlane; 3], [SolveReport; 3])> {
    let system = reflectance_system(s, l, params)?;
    let solved: Vec<(ImagePlane, SolveReport)> = system
        .rhs
        .par_iter()
        .map(|b| solve(&system.operator, b, params.tol, params.max_iter))
        .collect::<Result<_>>()?;
    let mut planes = Vec::with_capacity(3);
    let mut reports = Vec::with_capacity(3);
    for (p, r) in solved {
        planes.push(p);
        reports.push(r);
    }
    Ok((
        planes.try_into().expect("three channels"),
        reports.try_into().expect("three channels"),
    ))
}

/// Noise-suppressed reflectance per channel, clamped to `[0, 1]`.
///
/// `l` must already be normalized (every value at least `params.eps_div`).
pub fn estimate_reflectance(
    s: &ColorImage,
    l: &ImagePlane,
    params: &JedParams,
) -> Result<(ColorImage, [SolveReport; 3])> {
    let (planes, reports) = estimate_reflectance_unclamped(s, l, params)?;
    let image = ColorImage::from_planes(planes.map(|p| p.clamp(0.0, 1.0)))?;
    Ok((image, reports))
}

/// Runs both stages on `s`: luma, illumination, normalization, reflectance.
pub fn decompose(s: &ColorImage, params: &JedParams) -> Result<DecompositionResult> {
    let l_hat = rgb_to_luma(s);
    let (raw_illumination, illumination_report) = estimate_illumination(&l_hat, params)?;
    let illumination = normalize_illumination(&raw_illumination, params.eps_div);
    let (reflectance, reflectance_reports) = estimate_reflectance(s, &illumination, params)?;
    Ok(DecompositionResult {
        raw_illumination,
        illumination,
        reflectance,
        illumination_report,
        reflectance_reports,
    })
}

fn sum_sq(p: &ImagePlane) -> f64 {
    p.dot(p)
}

/// `‖L - L̂‖² + Σ_x Σ_d a_d(x) (∇_d L(x))²`, the quadratic surrogate the
/// illumination stage minimizes.
pub fn illumination_objective(
    l: &ImagePlane,
    l_hat: &ImagePlane,
    params: &JedParams,
) -> Result<f64> {
    let a = illumination_weights(l_hat, params.alpha, params.eps_stab)?;
    let mut total = sum_sq(&l.zip_map(l_hat, |a, b| a - b)?);
    for d in Direction::ALL {
        let grad = forward_diff(l, d);
        total += grad.zip_map(a.get(d), |g, a| a * g * g)?.as_slice().iter().sum::<f64>();
    }
    Ok(total)
}

/// `‖R - S/L‖² + β Σ_d Σ_x w_d (∇_d R)² + ω Σ_d ‖∇_d R - g_d‖²` for one channel.
///
/// The smoothness term is linear in `w_d`, which is the quadratic form whose
/// stationarity condition is the reflectance system.
pub fn reflectance_objective(
    r: &ImagePlane,
    s_chan: &ImagePlane,
    l: &ImagePlane,
    weights: &ReflectanceWeights,
    target: &AdjustedGradient,
    params: &JedParams,
) -> Result<f64> {
    let ratio = s_chan.zip_map(l, |s, l| s / l)?;
    let mut total = sum_sq(&r.zip_map(&ratio, |a, b| a - b)?);
    for d in Direction::ALL {
        let grad = forward_diff(r, d);
        let smooth: f64 = grad
            .zip_map(weights.get(d), |g, w| w * g * g)?
            .as_slice()
            .iter()
            .sum();
        total += params.beta * smooth;
        total += params.omega * sum_sq(&grad.zip_map(target.get(d), |a, b| a - b)?);
    }
    Ok(total)
}
