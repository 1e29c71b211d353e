//! Forward differences, their adjoint, and the per-pixel weight fields that
//! shape both quadratic objectives.
//!
//! The boundary is replicate (Neumann): the difference past the last column
//! (horizontal) or last row (vertical) is zero. With that convention
//! `D_dᵀ D_d` is the ordinary 4-neighbour graph Laplacian restricted to axis
//! `d`, and every weighted system built from it stays symmetric positive
//! definite once an identity term is added.

use crate::error::{JedError, Result};
use crate::image::ImagePlane;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Direction {
    Horizontal,
    Vertical,
}

impl Direction {
    pub const ALL: [Direction; 2] = [Direction::Horizontal, Direction::Vertical];
}

/// Horizontal and vertical forward differences of one plane.
#[derive(Debug, Clone, PartialEq)]
pub struct GradientPair {
    pub h: ImagePlane,
    pub v: ImagePlane,
}

impl GradientPair {
    pub fn of(plane: &ImagePlane) -> GradientPair {
        GradientPair {
            h: forward_diff(plane, Direction::Horizontal),
            v: forward_diff(plane, Direction::Vertical),
        }
    }

    pub fn get(&self, d: Direction) -> &ImagePlane {
        match d {
            Direction::Horizontal => &self.h,
            Direction::Vertical => &self.v,
        }
    }
}

/// `out(x) = p(x + e_d) - p(x)`, zero on the last column/row along `d`.
pub fn forward_diff(p: &ImagePlane, d: Direction) -> ImagePlane {
    let (w, h) = p.dims();
    let src = p.as_slice();
    let mut out = vec![0.0; src.len()];
    match d {
        Direction::Horizontal => {
            for (row_in, row_out) in src.chunks_exact(w).zip(out.chunks_exact_mut(w)) {
                for x in 0..w - 1 {
                    row_out[x] = row_in[x + 1] - row_in[x];
                }
            }
        }
        Direction::Vertical => {
            for y in 0..h - 1 {
                let (cur, next) = (&src[y * w..(y + 1) * w], &src[(y + 1) * w..(y + 2) * w]);
                for ((o, &a), &b) in out[y * w..(y + 1) * w].iter_mut().zip(cur).zip(next) {
                    *o = b - a;
                }
            }
        }
    }
    ImagePlane::from_raw(w, h, out)
}

/// Applies `D_dᵀ` without forming the matrix.
///
/// `(D_dᵀ q)(x) = q(x - e_d) - q(x)`, where a term is dropped when its row of
/// `D_d` is the zero boundary row. So the first pixel along `d` only sees
/// `-q(x)` and the last pixel only sees `q(x - e_d)`.
pub fn apply_div_transpose(q: &ImagePlane, d: Direction) -> ImagePlane {
    let mut out = ImagePlane::zeros(q.width(), q.height());
    add_div_transpose(q.as_slice(), q.width(), q.height(), d, 1.0, out.as_mut_slice());
    out
}

/// `out += scale * D_dᵀ q` on raw row-major buffers.
pub(crate) fn add_div_transpose(
    q: &[f64],
    w: usize,
    h: usize,
    d: Direction,
    scale: f64,
    out: &mut [f64],
) {
    match d {
        Direction::Horizontal => {
            for (row_q, row_out) in q.chunks_exact(w).zip(out.chunks_exact_mut(w)) {
                for x in 0..w - 1 {
                    let t = scale * row_q[x];
                    row_out[x] -= t;
                    row_out[x + 1] += t;
                }
            }
        }
        Direction::Vertical => {
            for y in 0..h - 1 {
                for x in 0..w {
                    let t = scale * q[y * w + x];
                    out[y * w + x] -= t;
                    out[(y + 1) * w + x] += t;
                }
            }
        }
    }
}

fn require_positive(name: &'static str, value: f64) -> Result<()> {
    if value > 0.0 && value.is_finite() {
        Ok(())
    } else {
        Err(JedError::param(name, format!("must be positive, got {value}")))
    }
}

fn require_nonnegative(name: &'static str, value: f64) -> Result<()> {
    if value >= 0.0 && value.is_finite() {
        Ok(())
    } else {
        Err(JedError::param(
            name,
            format!("must be nonnegative, got {value}"),
        ))
    }
}

fn inverse_magnitude(grad: &ImagePlane, numerator: f64, eps: f64) -> ImagePlane {
    grad.map(|g| numerator / (g.abs() + eps))
}

/// Illumination smoothness weights `a_d = alpha / (|∇_d l_hat| + eps_stab)`.
#[derive(Debug, Clone, PartialEq)]
pub struct IlluminationWeights {
    pub a_h: ImagePlane,
    pub a_v: ImagePlane,
}

impl IlluminationWeights {
    pub fn get(&self, d: Direction) -> &ImagePlane {
        match d {
            Direction::Horizontal => &self.a_h,
            Direction::Vertical => &self.a_v,
        }
    }
}

pub fn illumination_weights(
    l_hat: &ImagePlane,
    alpha: f64,
    eps_stab: f64,
) -> Result<IlluminationWeights> {
    require_positive("alpha", alpha)?;
    require_positive("eps_stab", eps_stab)?;
    let grad = GradientPair::of(l_hat);
    Ok(IlluminationWeights {
        a_h: inverse_magnitude(&grad.h, alpha, eps_stab),
        a_v: inverse_magnitude(&grad.v, alpha, eps_stab),
    })
}

/// Edge-aware reflectance weights `w_d = 1 / (|∇_d s| + eps_stab)`.
///
/// Large in flat regions, small across edges; bounded by `1 / eps_stab`.
#[derive(Debug, Clone, PartialEq)]
pub struct ReflectanceWeights {
    pub w_h: ImagePlane,
    pub w_v: ImagePlane,
}

impl ReflectanceWeights {
    pub fn get(&self, d: Direction) -> &ImagePlane {
        match d {
            Direction::Horizontal => &self.w_h,
            Direction::Vertical => &self.w_v,
        }
    }
}

pub fn reflectance_weights(s_luma: &ImagePlane, eps_stab: f64) -> Result<ReflectanceWeights> {
    require_positive("eps_stab", eps_stab)?;
    let grad = GradientPair::of(s_luma);
    Ok(ReflectanceWeights {
        w_h: inverse_magnitude(&grad.h, 1.0, eps_stab),
        w_v: inverse_magnitude(&grad.v, 1.0, eps_stab),
    })
}

/// Gradient target for the reflectance: small gradients removed, the rest amplified.
#[derive(Debug, Clone, PartialEq)]
pub struct AdjustedGradient {
    pub g_h: ImagePlane,
    pub g_v: ImagePlane,
}

impl AdjustedGradient {
    pub fn get(&self, d: Direction) -> &ImagePlane {
        match d {
            Direction::Horizontal => &self.g_h,
            Direction::Vertical => &self.g_v,
        }
    }
}

/// Scalar form of the adjustment applied to a single difference value.
///
/// Values with `|g| < eps_thresh` become zero; `|g| == eps_thresh` passes.
/// Survivors are scaled by `1 + lambda * exp(-|g| / sigma)`, a factor in
/// `(1, 1 + lambda]` that favours weak edges over strong ones.
#[inline]
pub fn adjust_gradient_value(g: f64, lambda: f64, sigma: f64, eps_thresh: f64) -> f64 {
    if g.abs() < eps_thresh {
        0.0
    } else {
        (1.0 + lambda * (-g.abs() / sigma).exp()) * g
    }
}

pub fn adjusted_gradient(
    s_chan: &ImagePlane,
    lambda: f64,
    sigma: f64,
    eps_thresh: f64,
) -> Result<AdjustedGradient> {
    require_nonnegative("lambda", lambda)?;
    require_positive("sigma", sigma)?;
    require_nonnegative("eps_thresh", eps_thresh)?;
    let grad = GradientPair::of(s_chan);
    let adjust = |p: &ImagePlane| p.map(|g| adjust_gradient_value(g, lambda, sigma, eps_thresh));
    Ok(AdjustedGradient {
        g_h: adjust(&grad.h),
        g_v: adjust(&grad.v),
    })
}
