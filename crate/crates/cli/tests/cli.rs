use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use jed_cli::RunReport;
use jed_core::{decode_image, encode_image, ColorImage, ImageFormat};

fn jed(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_jed"))
        .args(args)
        .current_dir(cwd)
        .output()
        .expect("jed runs")
}

fn scene(w: usize, h: usize) -> ColorImage {
    ColorImage::from_fn(w, h, |x, y| {
        let v = if x < w / 2 { 0.04 } else { 0.12 };
        let t = ((x * 13 + y * 7) % 5) as f64 * 0.004;
        [v + t, v, v * 0.8 + t]
    })
}

fn write_input(dir: &Path, name: &str) {
    let format = ImageFormat::from_path(Path::new(name));
    fs::write(dir.join(name), encode_image(&scene(20, 14), format).unwrap()).unwrap();
}

fn report_from(bytes: &[u8]) -> RunReport {
    serde_json::from_slice(bytes).expect("valid report JSON")
}

#[test]
fn enhance_prints_report_to_stdout() {
    let dir = tempfile::tempdir().unwrap();
    write_input(dir.path(), "in.png");
    let out = jed(&["enhance", "in.png", "-o", "out.png"], dir.path());
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let report = report_from(&out.stdout);
    assert_eq!(report.subcommand, "enhance");
    assert_eq!(report.entries.len(), 1);
    let entry = &report.entries[0];
    assert!(entry.success);
    assert_eq!(entry.output.as_deref(), Some("out.png"));
    assert_eq!(entry.solver_reports.len(), 4);
    let metrics = entry.metrics.as_ref().unwrap();
    assert!(metrics.brightness_gain.unwrap() > 1.0);
    let img = decode_image(&fs::read(dir.path().join("out.png")).unwrap()).unwrap();
    assert_eq!(img.dims(), (20, 14));
}

#[test]
fn overridden_params_are_recorded() {
    let dir = tempfile::tempdir().unwrap();
    write_input(dir.path(), "in.png");
    let out = jed(&["enhance", "in.png", "--alpha", "0.02", "--report", "r.json"], dir.path());
    assert_eq!(out.status.code(), Some(0));
    assert!(out.stdout.is_empty());
    let report = report_from(&fs::read(dir.path().join("r.json")).unwrap());
    let params = report.entries[0].params.unwrap();
    assert_eq!(params.alpha, 0.02);
    assert_eq!(params.beta, 0.001);
    assert!(dir.path().join("in_jed.png").exists());
}

#[test]
fn flags_override_config_file() {
    let dir = tempfile::tempdir().unwrap();
    write_input(dir.path(), "in.ppm");
    fs::write(dir.path().join("jed.conf"), "alpha = 0.05\nomega = 0.03\n").unwrap();
    let out = jed(
        &["enhance", "in.ppm", "--config", "jed.conf", "--omega", "0.01"],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(0));
    let params = report_from(&out.stdout).entries[0].params.unwrap();
    assert_eq!(params.alpha, 0.05);
    assert_eq!(params.omega, 0.01);
    // PPM in, PPM out
    let written = fs::read(dir.path().join("in_jed.ppm")).unwrap();
    assert!(written.starts_with(b"P6"));
}

#[test]
fn bad_config_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    write_input(dir.path(), "in.png");
    fs::write(dir.path().join("bad.conf"), "alpah = 1\n").unwrap();
    let out = jed(&["enhance", "in.png", "--config", "bad.conf"], dir.path());
    assert_eq!(out.status.code(), Some(2));
    let out = jed(&["enhance", "in.png", "--config", "missing.conf"], dir.path());
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn decompose_writes_both_layers() {
    let dir = tempfile::tempdir().unwrap();
    write_input(dir.path(), "in.png");
    let out = jed(&["decompose", "in.png", "--out-l", "l.png", "--out-r", "r.png"], dir.path());
    assert_eq!(out.status.code(), Some(0));
    let l = decode_image(&fs::read(dir.path().join("l.png")).unwrap()).unwrap();
    let r = decode_image(&fs::read(dir.path().join("r.png")).unwrap()).unwrap();
    assert_eq!(l.r, l.g);
    assert_eq!(l.g, l.b);
    assert_eq!(r.dims(), (20, 14));
    let entry = &report_from(&out.stdout).entries[0];
    assert_eq!(entry.output.as_deref(), Some("r.png"));
    assert_eq!(entry.illumination_output.as_deref(), Some("l.png"));
}

#[test]
fn failed_inputs_do_not_stop_the_batch() {
    let dir = tempfile::tempdir().unwrap();
    write_input(dir.path(), "a.png");
    write_input(dir.path(), "c.ppm");
    fs::write(dir.path().join("b.png"), b"not an image").unwrap();
    let out = jed(
        &["he", "a.png", "b.png", "missing.png", "c.ppm", "-o", "outdir"],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(1));
    let report = report_from(&out.stdout);
    let inputs: Vec<&str> = report.entries.iter().map(|e| e.input.as_str()).collect();
    assert_eq!(inputs, ["a.png", "b.png", "missing.png", "c.ppm"]);
    let ok: Vec<bool> = report.entries.iter().map(|e| e.success).collect();
    assert_eq!(ok, [true, false, false, true]);
    assert_eq!((report.succeeded, report.failed), (2, 2));
    assert!(report.entries[1].error.is_some());
    assert!(dir.path().join("outdir/a_he.png").exists());
    assert!(dir.path().join("outdir/c_he.ppm").exists());
}

#[test]
fn metrics_only_measures() {
    let dir = tempfile::tempdir().unwrap();
    write_input(dir.path(), "in.png");
    let out = jed(&["metrics", "in.png"], dir.path());
    assert_eq!(out.status.code(), Some(0));
    let entry = &report_from(&out.stdout).entries[0];
    assert!(entry.output.is_none());
    let m = entry.metrics.as_ref().unwrap();
    assert!(m.mean_brightness_in > 0.0);
    assert!(m.mean_brightness_out.is_none());
    assert!(m.noise_std_in.is_some());
}

#[test]
fn unwritable_output_fails_that_image() {
    let dir = tempfile::tempdir().unwrap();
    write_input(dir.path(), "in.png");
    let out = jed(&["enhance", "in.png", "-o", "no/such/dir/out.png"], dir.path());
    assert_eq!(out.status.code(), Some(1));
    assert!(!report_from(&out.stdout).entries[0].success);
}

#[test]
fn layer_flags_need_single_input() {
    let dir = tempfile::tempdir().unwrap();
    write_input(dir.path(), "a.png");
    write_input(dir.path(), "b.png");
    let out = jed(&["decompose", "a.png", "b.png", "--out-l", "l.png"], dir.path());
    assert_eq!(out.status.code(), Some(2));
}
