use jed_core::image::{dequantize, quantize};
use jed_core::{
    decode_image, default_params, enhance, encode_image, gamma_correct, rgb_to_luma, ColorImage,
    ImageFormat, ImagePlane,
};
use proptest::prelude::*;

fn byte_image() -> impl Strategy<Value = (usize, usize, Vec<u8>)> {
    (1usize..9, 1usize..9).prop_flat_map(|(w, h)| {
        prop::collection::vec(any::<u8>(), w * h * 3).prop_map(move |px| (w, h, px))
    })
}

fn from_bytes(w: usize, h: usize, px: &[u8]) -> ColorImage {
    ColorImage::from_fn(w, h, |x, y| {
        let i = 3 * (y * w + x);
        [dequantize(px[i]), dequantize(px[i + 1]), dequantize(px[i + 2])]
    })
}

proptest! {
    #[test]
    fn eight_bit_images_survive_both_codecs((w, h, px) in byte_image()) {
        let img = from_bytes(w, h, &px);
        for format in [ImageFormat::Png, ImageFormat::Ppm] {
            let bytes = encode_image(&img, format).unwrap();
            let back = decode_image(&bytes).unwrap();
            prop_assert_eq!(&back, &img);
            prop_assert_eq!(encode_image(&back, format).unwrap(), bytes);
        }
    }

    #[test]
    fn encode_quantization_error_is_half_a_level(
        (w, h) in (1usize..6, 1usize..6),
        seed in prop::collection::vec(0.0f64..1.0, 75),
    ) {
        let img = ColorImage::from_fn(w, h, |x, y| {
            let i = 3 * (y * w + x);
            [seed[i], seed[i + 1], seed[i + 2]]
        });
        let back = decode_image(&encode_image(&img, ImageFormat::Ppm).unwrap()).unwrap();
        for (a, b) in img.planes().iter().zip(back.planes()) {
            prop_assert!(a.max_abs_diff(b) <= 1.0 / 510.0 + 1e-12);
        }
    }

    #[test]
    fn luma_is_a_convex_combination(r in 0.0f64..1.0, g in 0.0f64..1.0, b in 0.0f64..1.0) {
        let img = ColorImage::from_fn(1, 1, |_, _| [r, g, b]);
        let y = rgb_to_luma(&img).get(0, 0);
        let lo = r.min(g).min(b);
        let hi = r.max(g).max(b);
        prop_assert!(y >= lo - 1e-15 && y <= hi + 1e-15);
    }

    #[test]
    fn gamma_never_darkens(v in 1e-6f64..=1.0, gamma in 1.0f64..4.0) {
        let p = ImagePlane::filled(1, 1, v);
        prop_assert!(gamma_correct(&p, gamma).get(0, 0) >= v);
    }
}

#[test]
fn quantize_matches_round_half_up() {
    for i in 0..=2550 {
        let v = i as f64 / 2550.0;
        let expected = (v * 255.0 + 0.5).floor() as u8;
        assert_eq!(quantize(v), expected);
    }
}

#[test]
fn enhancement_preserves_shape_at_every_stage() {
    for (w, h) in [(1, 1), (3, 1), (1, 4), (5, 6)] {
        let s = ColorImage::from_fn(w, h, |x, y| {
            let v = 0.02 + 0.03 * ((x + 2 * y) % 4) as f64;
            [v, v * 0.9, v * 1.1]
        });
        let (out, d) = enhance(&s, &default_params()).unwrap();
        assert_eq!(out.dims(), (w, h));
        assert_eq!(d.illumination.dims(), (w, h));
        assert_eq!(d.raw_illumination.dims(), (w, h));
        assert_eq!(d.reflectance.dims(), (w, h));
        let eps_div = default_params().eps_div;
        assert!(d
            .illumination
            .as_slice()
            .iter()
            .all(|&v| (eps_div..=1.0).contains(&v)));
        for p in d.reflectance.planes() {
            assert!(p.as_slice().iter().all(|&v| (0.0..=1.0).contains(&v)));
        }
    }
}
