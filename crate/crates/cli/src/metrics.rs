//! Histogram-equalization baseline and the brightness/noise measurements
//! written into run reports.

use jed_core::image::quantize;
use jed_core::{rgb_to_luma, ColorImage, ImagePlane};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum MetricsError {
    #[error("patch {patch:?} does not fit in a {width}x{height} image")]
    OutOfBounds {
        patch: Patch,
        width: usize,
        height: usize,
    },
    #[error("patch {0:?} covers fewer than 4 pixels")]
    TooSmall(Patch),
}

/// Axis-aligned rectangle in pixel coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Patch {
    pub x: usize,
    pub y: usize,
    pub width: usize,
    pub height: usize,
}

impl Patch {
    pub fn new(x: usize, y: usize, width: usize, height: usize) -> Self {
        Patch {
            x,
            y,
            width,
            height,
        }
    }

    fn check(&self, plane: &ImagePlane) -> Result<(), MetricsError> {
        if self.width * self.height < 4 {
            return Err(MetricsError::TooSmall(*self));
        }
        if self.x + self.width > plane.width() || self.y + self.height > plane.height() {
            return Err(MetricsError::OutOfBounds {
                patch: *self,
                width: plane.width(),
                height: plane.height(),
            });
        }
        Ok(())
    }
}

fn patch_std(plane: &ImagePlane, p: Patch) -> f64 {
    let n = (p.width * p.height) as f64;
    let values = || {
        (p.y..p.y + p.height).flat_map(move |y| (p.x..p.x + p.width).map(move |x| plane.get(x, y)))
    };
    let mean = values().sum::<f64>() / n;
    (values().map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt()
}

/// Population standard deviation of the luma inside `patch`.
pub fn flat_patch_noise_std(img: &ColorImage, patch: Patch) -> Result<f64, MetricsError> {
    let luma = rgb_to_luma(img);
    patch.check(&luma)?;
    Ok(patch_std(&luma, patch))
}

/// The most uniform `8x8` (or smaller, on small images) luma patch, scanned
/// with half-patch stride. `None` if the image has fewer than 4 pixels.
pub fn flattest_patch(img: &ColorImage) -> Option<Patch> {
    let luma = rgb_to_luma(img);
    let (w, h) = luma.dims();
    let (pw, ph) = (w.min(8), h.min(8));
    if pw * ph < 4 {
        return None;
    }
    let (sx, sy) = ((pw / 2).max(1), (ph / 2).max(1));
    let mut best: Option<(f64, Patch)> = None;
    let mut y = 0;
    while y + ph <= h {
        let mut x = 0;
        while x + pw <= w {
            let p = Patch::new(x, y, pw, ph);
            let s = patch_std(&luma, p);
            if best.is_none_or(|(b, _)| s < b) {
                best = Some((s, p));
            }
            x += sx;
        }
        y += sy;
    }
    best.map(|(_, p)| p)
}

pub fn mean_brightness(img: &ColorImage) -> f64 {
    rgb_to_luma(img).mean()
}

fn equalize_plane(plane: &ImagePlane) -> ImagePlane {
    let mut hist = [0usize; 256];
    for &v in plane.as_slice() {
        hist[quantize(v) as usize] += 1;
    }
    let total = plane.len() as f64;
    let mut cdf = [0.0; 256];
    let mut running = 0;
    for (c, &count) in cdf.iter_mut().zip(&hist) {
        running += count;
        *c = running as f64 / total;
    }
    plane.map(|v| cdf[quantize(v) as usize])
}

/// Global per-channel histogram equalization over 256 bins: each value is
/// replaced by the empirical CDF of its bin, so the top occupied bin maps to 1.
pub fn histogram_equalize(img: &ColorImage) -> ColorImage {
    img.map_planes(equalize_plane)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};

    fn gray(plane: ImagePlane) -> ColorImage {
        ColorImage::from_gray(&plane)
    }

    #[test]
    fn two_level_image() {
        let img = gray(ImagePlane::from_fn(4, 4, |x, _| if x < 2 { 0.0 } else { 1.0 }));
        let out = histogram_equalize(&img);
        assert_eq!(out.r.get(0, 0), 0.5);
        assert_eq!(out.r.get(3, 3), 1.0);
    }

    #[test]
    fn constant_image_maps_to_one() {
        let out = histogram_equalize(&gray(ImagePlane::filled(5, 3, 0.3)));
        for p in out.planes() {
            assert!(p.as_slice().iter().all(|&v| v == 1.0));
        }
    }

    #[test]
    fn uniform_ramp_is_nearly_unchanged() {
        let ramp = ImagePlane::from_fn(16, 16, |x, y| (y * 16 + x) as f64 / 255.0);
        let out = histogram_equalize(&gray(ramp.clone()));
        // each level occupies one pixel, so level k maps to (k + 1) / 256
        for k in 0..256 {
            let (x, y) = (k % 16, k / 16);
            assert_eq!(out.r.get(x, y), (k + 1) as f64 / 256.0);
        }
        assert!(out.r.max_abs_diff(&ramp) <= 1.0 / 255.0);
    }

    #[test]
    fn equalization_is_monotone() {
        let plane = ImagePlane::from_fn(9, 7, |x, y| ((x * 31 + y * 17) % 23) as f64 / 40.0);
        let out = equalize_plane(&plane);
        let (a, b) = (plane.as_slice(), out.as_slice());
        for i in 0..a.len() {
            for j in 0..a.len() {
                if a[i] < a[j] {
                    assert!(b[i] <= b[j]);
                }
            }
        }
    }

    #[test]
    fn noise_std_examples() {
        let flat = gray(ImagePlane::filled(6, 6, 0.4));
        assert!(flat_patch_noise_std(&flat, Patch::new(1, 1, 4, 4)).unwrap() < 1e-15);

        let checker = gray(ImagePlane::from_fn(4, 4, |x, y| ((x + y) % 2) as f64));
        let s = flat_patch_noise_std(&checker, Patch::new(0, 0, 4, 4)).unwrap();
        assert!((s - 0.5).abs() < 1e-12);

        let mut rng = ChaCha8Rng::seed_from_u64(2024);
        let noise = Normal::new(0.5, 0.02).unwrap();
        let noisy = gray(ImagePlane::from_fn(32, 32, |_, _| noise.sample(&mut rng)));
        let s = flat_patch_noise_std(&noisy, Patch::new(0, 0, 32, 32)).unwrap();
        assert!((0.015..=0.025).contains(&s), "{s}");
    }

    #[test]
    fn patch_errors() {
        let img = gray(ImagePlane::zeros(4, 4));
        assert!(matches!(
            flat_patch_noise_std(&img, Patch::new(2, 2, 3, 2)),
            Err(MetricsError::OutOfBounds { .. })
        ));
        assert!(matches!(
            flat_patch_noise_std(&img, Patch::new(0, 0, 1, 3)),
            Err(MetricsError::TooSmall(_))
        ));
    }

    #[test]
    fn flattest_patch_finds_the_quiet_region() {
        let img = gray(ImagePlane::from_fn(24, 16, |x, y| {
            if x >= 12 {
                0.5
            } else {
                ((x * 7 + y * 3) % 5) as f64 * 0.1
            }
        }));
        let p = flattest_patch(&img).unwrap();
        assert!(p.x >= 12);
        assert_eq!((p.width, p.height), (8, 8));
        assert_eq!(flattest_patch(&gray(ImagePlane::zeros(1, 3))), None);
        assert_eq!(
            flattest_patch(&gray(ImagePlane::zeros(2, 2))),
            Some(Patch::new(0, 0, 2, 2))
        );
    }
}
