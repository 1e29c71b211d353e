//! Matrix-free solver for the weighted Laplacian systems
//! `(c I + Σ_d D_dᵀ Diag(k_d) D_d) x = b`.
//!
//! Both decomposition stages reduce to this shape: the illumination stage
//! with `k_d = a_d`, the reflectance stage with `k_d = β w_d + ω`. The
//! operator is symmetric positive definite whenever `c > 0` and `k_d >= 0`,
//! so Jacobi-preconditioned conjugate gradients applies directly.

use serde::{Deserialize, Serialize};

use crate::error::{JedError, Result};
use crate::gradient::Direction;
use crate::image::ImagePlane;

/// Largest grid (in pixels) [`assemble_dense`] will expand.
pub const DENSE_ORACLE_LIMIT: usize = 4096;

#[derive(Debug, Clone, PartialEq)]
pub struct WeightedLaplacianOperator {
    identity: f64,
    weights_h: ImagePlane,
    weights_v: ImagePlane,
}

impl WeightedLaplacianOperator {
    /// Weight entries on the last column (`weights_h`) and last row
    /// (`weights_v`) multiply a zero row of `D_d` and have no effect.
    pub fn new(identity: f64, weights_h: ImagePlane, weights_v: ImagePlane) -> Result<Self> {
        if !(identity > 0.0 && identity.is_finite()) {
            return Err(JedError::param(
                "identity",
                format!("identity coefficient must be positive, got {identity}"),
            ));
        }
        weights_h.check_dims(&weights_v)?;
        for (name, plane) in [("weights_h", &weights_h), ("weights_v", &weights_v)] {
            if let Some(&bad) = plane.as_slice().iter().find(|&&k| k < 0.0) {
                return Err(JedError::param(
                    name,
                    format!("weights must be nonnegative, found {bad}"),
                ));
            }
        }
        Ok(Self {
            identity,
            weights_h,
            weights_v,
        })
    }

    /// `c I`, no smoothing at all.
    pub fn scaled_identity(width: usize, height: usize, identity: f64) -> Result<Self> {
        Self::new(
            identity,
            ImagePlane::zeros(width, height),
            ImagePlane::zeros(width, height),
        )
    }

    pub fn width(&self) -> usize {
        self.weights_h.width()
    }

    pub fn height(&self) -> usize {
        self.weights_h.height()
    }

    pub fn dims(&self) -> (usize, usize) {
        self.weights_h.dims()
    }

    pub fn identity(&self) -> f64 {
        self.identity
    }

    pub fn weights(&self, d: Direction) -> &ImagePlane {
        match d {
            Direction::Horizontal => &self.weights_h,
            Direction::Vertical => &self.weights_v,
        }
    }

    /// `c x + Σ_d D_dᵀ (k_d ∘ D_d x)`.
    pub fn apply(&self, x: &ImagePlane) -> Result<ImagePlane> {
        self.weights_h.check_dims(x)?;
        let mut out = vec![0.0; x.len()];
        self.apply_into(x.as_slice(), &mut out);
        Ok(ImagePlane::from_raw(self.width(), self.height(), out))
    }

    fn apply_into(&self, x: &[f64], out: &mut [f64]) {
        let (w, h) = self.dims();
        let kh = self.weights_h.as_slice();
        let kv = self.weights_v.as_slice();
        for (o, &xi) in out.iter_mut().zip(x) {
            *o = self.identity * xi;
        }
        for y in 0..h {
            let row = y * w;
            for i in row..row + w - 1 {
                let t = kh[i] * (x[i + 1] - x[i]);
                out[i] -= t;
                out[i + 1] += t;
            }
        }
        for i in 0..w * (h - 1) {
            let t = kv[i] * (x[i + w] - x[i]);
            out[i] -= t;
            out[i + w] += t;
        }
    }

    /// Main diagonal of the operator, used as the Jacobi preconditioner.
    pub fn diagonal(&self) -> ImagePlane {
        let (w, h) = self.dims();
        let kh = self.weights_h.as_slice();
        let kv = self.weights_v.as_slice();
        let mut diag = vec![self.identity; w * h];
        for y in 0..h {
            for x in 0..w {
                let i = y * w + x;
                if x + 1 < w {
                    diag[i] += kh[i];
                }
                if x > 0 {
                    diag[i] += kh[i - 1];
                }
                if y + 1 < h {
                    diag[i] += kv[i];
                }
                if y > 0 {
                    diag[i] += kv[i - w];
                }
            }
        }
        ImagePlane::from_raw(w, h, diag)
    }
}

/// Outcome of one conjugate-gradient run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    pub iterations: usize,
    /// `‖b - A x‖₂ / ‖b‖₂` of the returned iterate, recomputed from scratch.
    pub relative_residual: f64,
    pub converged: bool,
}

impl SolveReport {
    /// Report for a system that needed no iterations (e.g. a `1x1` grid or `alpha = 0`).
    pub fn trivial() -> Self {
        SolveReport {
            iterations: 0,
            relative_residual: 0.0,
            converged: true,
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Jacobi-preconditioned conjugate gradients from a zero initial guess.
///
/// Stops once the relative residual is at most `tol`. The recurrence residual
/// drifts from the true one in finite precision, so convergence is confirmed
/// against `b - A x` and the iteration restarts from the true residual if the
/// two disagree. If `max_iter` runs out the iterate with the smallest
/// residual seen is returned with `converged = false`.
pub fn solve(
    op: &WeightedLaplacianOperator,
    rhs: &ImagePlane,
    tol: f64,
    max_iter: usize,
) -> Result<(ImagePlane, SolveReport)> {
    if tol.is_nan() || tol <= 0.0 {
        return Err(JedError::param("tol", format!("must be positive, got {tol}")));
    }
    op.weights_h.check_dims(rhs)?;
    let (w, h) = op.dims();
    let n = w * h;
    let b = rhs.as_slice();
    let b_norm = norm(b);
    if b_norm == 0.0 {
        return Ok((ImagePlane::zeros(w, h), SolveReport::trivial()));
    }

    let inv_diag: Vec<f64> = op.diagonal().as_slice().iter().map(|d| 1.0 / d).collect();
    let mut x = vec![0.0; n];
    let mut r = b.to_vec();
    let mut z: Vec<f64> = r.iter().zip(&inv_diag).map(|(r, m)| r * m).collect();
    let mut p = z.clone();
    let mut ap = vec![0.0; n];
    let mut rz = dot(&r, &z);

    let mut best_x = x.clone();
    let mut best_res = 1.0;
    let mut iterations = 0;

    while iterations < max_iter {
        op.apply_into(&p, &mut ap);
        let pap = dot(&p, &ap);
        if !pap.is_finite() || pap <= 0.0 {
            return Err(JedError::Numerical(format!(
                "conjugate gradient breakdown at iteration {iterations} (pᵀAp = {pap})"
            )));
        }
        let step = rz / pap;
        for i in 0..n {
            x[i] += step * p[i];
            r[i] -= step * ap[i];
        }
        iterations += 1;

        let mut res = norm(&r) / b_norm;
        if !res.is_finite() {
            return Err(JedError::Numerical(format!(
                "non-finite residual at iteration {iterations}"
            )));
        }
        if res <= tol {
            // confirm against the true residual before stopping
            op.apply_into(&x, &mut ap);
            for i in 0..n {
                r[i] = b[i] - ap[i];
            }
            res = norm(&r) / b_norm;
            if res <= tol {
                let report = SolveReport {
                    iterations,
                    relative_residual: res,
                    converged: true,
                };
                return Ok((ImagePlane::from_raw(w, h, x), report));
            }
            // restart the Krylov sequence from the true residual
            for i in 0..n {
                z[i] = r[i] * inv_diag[i];
                p[i] = z[i];
            }
            rz = dot(&r, &z);
            if res < best_res {
                best_res = res;
                best_x.copy_from_slice(&x);
            }
            continue;
        }
        if res < best_res {
            best_res = res;
            best_x.copy_from_slice(&x);
        }

        for i in 0..n {
            z[i] = r[i] * inv_diag[i];
        }
        let rz_next = dot(&r, &z);
        let beta = rz_next / rz;
        rz = rz_next;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }

    op.apply_into(&best_x, &mut ap);
    let true_res = norm(
        &b.iter()
            .zip(&ap)
            .map(|(b, a)| b - a)
            .collect::<Vec<_>>(),
    ) / b_norm;
    let report = SolveReport {
        iterations,
        relative_residual: true_res,
        converged: true_res <= tol,
    };
    Ok((ImagePlane::from_raw(w, h, best_x), report))
}

/// Row-major square matrix produced by [`assemble_dense`].
#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix {
    n: usize,
    data: Vec<f64>,
}

impl DenseMatrix {
    pub fn zeros(n: usize) -> Self {
        Self {
            n,
            data: vec![0.0; n * n],
        }
    }

    pub fn size(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.n + j] += v;
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        self.data.chunks_exact(self.n).map(|row| dot(row, x)).collect()
    }

    pub fn max_asymmetry(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for i in 0..self.n {
            for j in i + 1..self.n {
                worst = worst.max((self.get(i, j) - self.get(j, i)).abs());
            }
        }
        worst
    }
}

/// Nonzero columns `(minus, plus)` of each row of `D_d` on a `w x h` grid;
/// `None` for the zero boundary rows.
pub fn difference_rows(w: usize, h: usize, d: Direction) -> Vec<Option<(usize, usize)>> {
    (0..w * h)
        .map(|k| {
            let (x, y) = (k % w, k / w);
            match d {
                Direction::Horizontal if x + 1 < w => Some((k, k + 1)),
                Direction::Vertical if y + 1 < h => Some((k, k + w)),
                _ => None,
            }
        })
        .collect()
}

/// Expands `c I + Σ_d D_dᵀ Diag(k_d) D_d` into a dense matrix, entry by entry.
///
/// Test oracle only: refuses grids over [`DENSE_ORACLE_LIMIT`] pixels.
pub fn assemble_dense(op: &WeightedLaplacianOperator) -> Result<DenseMatrix> {
    let (w, h) = op.dims();
    let n = w * h;
    if n > DENSE_ORACLE_LIMIT {
        return Err(JedError::OracleGuard(format!(
            "{w}x{h} grid has {n} pixels, limit is {DENSE_ORACLE_LIMIT}"
        )));
    }
    let mut m = DenseMatrix::zeros(n);
    for i in 0..n {
        m.add(i, i, op.identity);
    }
    for d in Direction::ALL {
        let k = op.weights(d).as_slice();
        for (row, cols) in difference_rows(w, h, d).into_iter().enumerate() {
            let Some((minus, plus)) = cols else { continue };
            // row of D_d is (-1 at minus, +1 at plus); add k * rowᵀ row
            let entries = [(minus, -1.0), (plus, 1.0)];
            for &(i, di) in &entries {
                for &(j, dj) in &entries {
                    m.add(i, j, k[row] * di * dj);
                }
            }
        }
    }
    Ok(m)
}
