//! End-to-end enhancement and its parameter record.

use serde::{Deserialize, Serialize};

use crate::decompose::{decompose, DecompositionResult};
use crate::error::{JedError, Result};
use crate::image::{ColorImage, ImagePlane};

/// Every scalar knob of the method.
///
/// Gradient-scale quantities (`sigma`, `eps_thresh`) live on the `[0, 1]`
/// intensity scale, so a threshold of 10 gray levels is `10 / 255`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct JedParams {
    /// Illumination smoothness weight.
    pub alpha: f64,
    /// Edge-aware reflectance smoothness weight.
    pub beta: f64,
    /// Weight pulling reflectance gradients toward the adjusted gradient.
    pub omega: f64,
    /// Amplification strength of the adjusted gradient.
    pub lambda: f64,
    /// Falloff of the amplification with gradient magnitude.
    pub sigma: f64,
    /// Gradients with smaller magnitude are treated as noise and dropped.
    pub eps_thresh: f64,
    /// Stabilizer in the `1 / (|∇| + eps)` weight denominators.
    pub eps_stab: f64,
    /// Floor applied to the illumination before dividing by it.
    pub eps_div: f64,
    pub gamma: f64,
    /// Relative residual at which the conjugate-gradient solves stop.
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for JedParams {
    fn default() -> Self {
        default_params()
    }
}

pub fn default_params() -> JedParams {
    JedParams {
        alpha: 0.007,
        beta: 0.001,
        omega: 0.016,
        lambda: 6.0,
        sigma: 10.0 / 255.0,
        eps_thresh: 10.0 / 255.0,
        eps_stab: 1e-4,
        eps_div: 1.0 / 255.0,
        gamma: 2.2,
        tol: 1e-5,
        max_iter: 1000,
    }
}

impl JedParams {
    pub fn validate(&self) -> Result<()> {
        let nonnegative = [
            ("alpha", self.alpha),
            ("beta", self.beta),
            ("omega", self.omega),
            ("lambda", self.lambda),
            ("eps_thresh", self.eps_thresh),
        ];
        for (name, v) in nonnegative {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(JedError::param(name, format!("must be nonnegative, got {v}")));
            }
        }
        let positive = [
            ("sigma", self.sigma),
            ("eps_stab", self.eps_stab),
            ("eps_div", self.eps_div),
            ("tol", self.tol),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(JedError::param(name, format!("must be positive, got {v}")));
            }
        }
        if self.eps_div > 1.0 {
            return Err(JedError::param(
                "eps_div",
                format!("must not exceed 1, got {}", self.eps_div),
            ));
        }
        if !(self.gamma >= 1.0 && self.gamma.is_finite()) {
            return Err(JedError::param(
                "gamma",
                format!("must be at least 1, got {}", self.gamma),
            ));
        }
        if self.max_iter == 0 {
            return Err(JedError::param("max_iter", "must be at least 1"));
        }
        Ok(())
    }

    /// Parses flat `key = value` lines. Missing keys keep their defaults;
    /// unknown keys are an error.
    pub fn from_config_str(text: &str) -> Result<JedParams> {
        let params: JedParams =
            toml::from_str(text).map_err(|e| JedError::Config(e.message().to_string()))?;
        params.validate()?;
        Ok(params)
    }

    /// One `key = value` line per field, readable by [`JedParams::from_config_str`].
    pub fn to_config_string(&self) -> String {
        toml::to_string(self).expect("flat numeric record always serializes")
    }
}

/// `L'^(1/gamma)`, which brightens every value in `(0, 1)` for `gamma > 1`.
pub fn gamma_correct(l_norm: &ImagePlane, gamma: f64) -> ImagePlane {
    let exponent = 1.0 / gamma;
    l_norm.map(|v| v.powf(exponent))
}

/// `clamp(R_c ∘ L'^(1/gamma), 0, 1)` for each channel.
pub fn recompose(decomposition: &DecompositionResult, gamma: f64) -> Result<ColorImage> {
    let lit = gamma_correct(&decomposition.illumination, gamma);
    let planes = decomposition
        .reflectance
        .planes()
        .map(|r| r.zip_map(&lit, |r, l| (r * l).clamp(0.0, 1.0)));
    let [r, g, b] = planes;
    ColorImage::new(r?, g?, b?)
}

/// Enhances a low-light image and returns the result along with the
/// decomposition it was built from.
///
/// Solver non-convergence is not an error: the best iterates are used and
/// [`DecompositionResult::converged`] reports it.
pub fn enhance(s: &ColorImage, params: &JedParams) -> Result<(ColorImage, DecompositionResult)> {
    params.validate()?;
    let decomposition = decompose(s, params)?;
    let out = recompose(&decomposition, params.gamma)?;
    Ok((out, decomposition))
}
