use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use jed_core::{
    decode_image, encode_image, enhance, decompose, ColorImage, ImageFormat, JedError, JedParams,
};
use rayon::prelude::*;

use crate::metrics::{flat_patch_noise_std, flattest_patch, histogram_equalize, mean_brightness};
use crate::report::{Metrics, ReportEntry, RunReport, StageReport};

pub const EXIT_OK: i32 = 0;
pub const EXIT_IMAGE_FAILURE: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Debug, Parser)]
#[command(
    name = "jed",
    version,
    about = "Low-light enhancement with joint denoising"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Enhance low-light images.
    Enhance(CommonArgs),
    /// Write the illumination and reflectance layers.
    Decompose {
        #[command(flatten)]
        common: CommonArgs,
        /// Illumination output (single input only).
        #[arg(long = "out-l")]
        out_l: Option<PathBuf>,
        /// Reflectance output (single input only).
        #[arg(long = "out-r")]
        out_r: Option<PathBuf>,
    },
    /// Global histogram equalization baseline.
    He(CommonArgs),
    /// Report brightness and flat-patch noise of each input.
    Metrics(CommonArgs),
}

#[derive(Debug, Args)]
struct CommonArgs {
    #[arg(required = true)]
    inputs: Vec<PathBuf>,
    /// Output file, or directory when several inputs are given.
    #[arg(short, long)]
    output: Option<PathBuf>,
    /// Write the JSON report here instead of standard output.
    #[arg(long)]
    report: Option<PathBuf>,
    /// Flat `key = value` parameter file; flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[command(flatten)]
    params: ParamFlags,
}

#[derive(Debug, Args)]
struct ParamFlags {
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    beta: Option<f64>,
    #[arg(long)]
    omega: Option<f64>,
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long)]
    sigma: Option<f64>,
    #[arg(long = "eps-thresh")]
    eps_thresh: Option<f64>,
    #[arg(long = "eps-stab")]
    eps_stab: Option<f64>,
    #[arg(long = "eps-div")]
    eps_div: Option<f64>,
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long = "max-iter")]
    max_iter: Option<usize>,
}

impl ParamFlags {
    fn apply(&self, mut p: JedParams) -> JedParams {
        let floats = [
            (self.alpha, &mut p.alpha),
            (self.beta, &mut p.beta),
            (self.omega, &mut p.omega),
            (self.lambda, &mut p.lambda),
            (self.sigma, &mut p.sigma),
            (self.eps_thresh, &mut p.eps_thresh),
            (self.eps_stab, &mut p.eps_stab),
            (self.eps_div, &mut p.eps_div),
            (self.gamma, &mut p.gamma),
            (self.tol, &mut p.tol),
        ];
        for (flag, field) in floats {
            if let Some(v) = flag {
                *field = v;
            }
        }
        if let Some(n) = self.max_iter {
            p.max_iter = n;
        }
        p
    }
}

fn resolve_params(args: &CommonArgs) -> Result<JedParams, String> {
    let base = match &args.config {
        Some(path) => {
            let text = fs::read_to_string(path)
                .map_err(|e| format!("cannot read config {}: {e}", path.display()))?;
            JedParams::from_config_str(&text).map_err(|e| format!("{}: {e}", path.display()))?
        }
        None => JedParams::default(),
    };
    let params = args.params.apply(base);
    params.validate().map_err(|e| e.to_string())?;
    Ok(params)
}

/// `<stem><suffix>.<ext>` placed in `output` (a directory, or the single
/// output file when there is only one input) or next to the input.
fn output_path(input: &Path, output: Option<&Path>, batch: bool, suffix: &str) -> PathBuf {
    let ext = input
        .extension()
        .and_then(|e| e.to_str())
        .filter(|e| matches!(e.to_ascii_lowercase().as_str(), "png" | "ppm" | "pnm"))
        .unwrap_or("png");
    let stem = input
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "image".to_string());
    let name = format!("{stem}{suffix}.{ext}");
    match output {
        Some(out) if batch || out.is_dir() => out.join(name),
        Some(out) => out.to_path_buf(),
        None => input.with_file_name(name),
    }
}

fn read_image(path: &Path) -> Result<ColorImage, String> {
    let bytes = fs::read(path).map_err(|e| format!("cannot read {}: {e}", path.display()))?;
    decode_image(&bytes).map_err(|e| format!("{}: {e}", path.display()))
}

fn write_image(path: &Path, img: &ColorImage) -> Result<(), String> {
    let bytes = encode_image(img, ImageFormat::from_path(path))
        .map_err(|e: JedError| format!("{}: {e}", path.display()))?;
    fs::write(path, bytes).map_err(|e| format!("cannot write {}: {e}", path.display()))
}

fn measure(input: &ColorImage, output: Option<&ColorImage>) -> Metrics {
    let mean_in = mean_brightness(input);
    let mean_out = output.map(mean_brightness);
    let patch = flattest_patch(input);
    let std_of = |img: &ColorImage| patch.and_then(|p| flat_patch_noise_std(img, p).ok());
    Metrics {
        mean_brightness_in: mean_in,
        mean_brightness_out: mean_out,
        brightness_gain: mean_out.filter(|_| mean_in > 0.0).map(|m| m / mean_in),
        noise_patch: patch,
        noise_std_in: std_of(input),
        noise_std_out: output.and_then(std_of),
    }
}

#[derive(Debug, Clone, Copy)]
enum Task<'a> {
    Enhance,
    Decompose {
        out_l: Option<&'a Path>,
        out_r: Option<&'a Path>,
    },
    He,
    Metrics,
}

impl Task<'_> {
    fn name(&self) -> &'static str {
        match self {
            Task::Enhance => "enhance",
            Task::Decompose { .. } => "decompose",
            Task::He => "he",
            Task::Metrics => "metrics",
        }
    }
}

fn process(
    task: Task<'_>,
    input: &Path,
    output: Option<&Path>,
    batch: bool,
    params: &JedParams,
) -> Result<ReportEntry, String> {
    let s = read_image(input)?;
    let mut entry = ReportEntry {
        input: input.display().to_string(),
        output: None,
        illumination_output: None,
        success: true,
        error: None,
        params: None,
        solver_reports: Vec::new(),
        converged: true,
        metrics: None,
        wall_clock_ms: 0.0,
    };
    match task {
        Task::Enhance => {
            let (out, d) = enhance(&s, params).map_err(|e| e.to_string())?;
            let path = output_path(input, output, batch, "_jed");
            write_image(&path, &out)?;
            entry.output = Some(path.display().to_string());
            entry.params = Some(*params);
            entry.solver_reports = StageReport::from_decomposition(&d);
            entry.converged = d.converged();
            entry.metrics = Some(measure(&s, Some(&out)));
        }
        Task::Decompose { out_l, out_r } => {
            let d = decompose(&s, params).map_err(|e| e.to_string())?;
            let l_path = out_l
                .map(Path::to_path_buf)
                .unwrap_or_else(|| output_path(input, output, true, "_L"));
            let r_path = out_r
                .map(Path::to_path_buf)
                .unwrap_or_else(|| output_path(input, output, true, "_R"));
            write_image(&l_path, &ColorImage::from_gray(&d.illumination))?;
            write_image(&r_path, &d.reflectance)?;
            entry.output = Some(r_path.display().to_string());
            entry.illumination_output = Some(l_path.display().to_string());
            entry.params = Some(*params);
            entry.solver_reports = StageReport::from_decomposition(&d);
            entry.converged = d.converged();
            entry.metrics = Some(measure(&s, None));
        }
        Task::He => {
            let out = histogram_equalize(&s);
            let path = output_path(input, output, batch, "_he");
            write_image(&path, &out)?;
            entry.output = Some(path.display().to_string());
            entry.metrics = Some(measure(&s, Some(&out)));
        }
        Task::Metrics => {
            entry.metrics = Some(measure(&s, None));
        }
    }
    if !entry.converged {
        eprintln!(
            "jed: warning: solver did not converge for {}; output built from best iterates",
            input.display()
        );
    }
    Ok(entry)
}

/// Runs the command line `args` (program name first) and returns the exit code:
/// 0 when every input succeeded, 1 when any input failed, 2 on usage errors.
pub fn run_cli<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };

    let (task, common) = match &cli.command {
        Command::Enhance(c) => (Task::Enhance, c),
        Command::Decompose {
            common,
            out_l,
            out_r,
        } => (
            Task::Decompose {
                out_l: out_l.as_deref(),
                out_r: out_r.as_deref(),
            },
            common,
        ),
        Command::He(c) => (Task::He, c),
        Command::Metrics(c) => (Task::Metrics, c),
    };

    let params = match resolve_params(common) {
        Ok(p) => p,
        Err(e) => {
            eprintln!("jed: {e}");
            return EXIT_USAGE;
        }
    };
    let batch = common.inputs.len() > 1;
    if batch {
        if let Task::Decompose { out_l, out_r } = task {
            if out_l.is_some() || out_r.is_some() {
                eprintln!("jed: --out-l/--out-r need a single input; use -o DIR for batches");
                return EXIT_USAGE;
            }
        }
        if let Some(out) = &common.output {
            if !out.is_dir() {
                if let Err(e) = fs::create_dir_all(out) {
                    eprintln!("jed: cannot create output directory {}: {e}", out.display());
                    return EXIT_USAGE;
                }
            }
        }
    }

    let entries: Vec<ReportEntry> = common
        .inputs
        .par_iter()
        .map(|input| {
            let start = Instant::now();
            let result = process(task, input, common.output.as_deref(), batch, &params);
            let ms = start.elapsed().as_secs_f64() * 1e3;
            match result {
                Ok(mut entry) => {
                    entry.wall_clock_ms = ms;
                    entry
                }
                Err(e) => {
                    eprintln!("jed: {e}");
                    ReportEntry::failure(input.display().to_string(), e, ms)
                }
            }
        })
        .collect();

    let report = RunReport::new(task.name(), entries);
    let json = report.to_json();
    match &common.report {
        Some(path) => {
            if let Err(e) = fs::write(path, json + "\n") {
                eprintln!("jed: cannot write report {}: {e}", path.display());
                return EXIT_IMAGE_FAILURE;
            }
        }
        None => println!("{json}"),
    }
    if report.all_succeeded() {
        EXIT_OK
    } else {
        EXIT_IMAGE_FAILURE
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn output_naming() {
        let input = Path::new("shots/night.png");
        assert_eq!(
            output_path(input, None, false, "_jed"),
            PathBuf::from("shots/night_jed.png")
        );
        assert_eq!(
            output_path(input, Some(Path::new("out.ppm")), false, "_jed"),
            PathBuf::from("out.ppm")
        );
        assert_eq!(
            output_path(input, Some(Path::new("dir")), true, "_jed"),
            PathBuf::from("dir/night_jed.png")
        );
        assert_eq!(
            output_path(Path::new("a.ppm"), None, false, "_L"),
            PathBuf::from("a_L.ppm")
        );
        assert_eq!(
            output_path(Path::new("a.jpg"), None, false, "_he"),
            PathBuf::from("a_he.png")
        );
    }

    #[test]
    fn flags_override_defaults() {
        let cli = Cli::try_parse_from(["jed", "enhance", "x.png", "--alpha", "0.02", "--max-iter", "5"])
            .unwrap();
        let Command::Enhance(common) = cli.command else {
            panic!("wrong subcommand")
        };
        let p = resolve_params(&common).unwrap();
        assert_eq!(p.alpha, 0.02);
        assert_eq!(p.max_iter, 5);
        assert_eq!(p.beta, JedParams::default().beta);
    }

    #[test]
    fn usage_errors_exit_two() {
        assert_eq!(run_cli(["jed"]), EXIT_USAGE);
        assert_eq!(run_cli(["jed", "enhance"]), EXIT_USAGE);
        assert_eq!(run_cli(["jed", "frobnicate", "x.png"]), EXIT_USAGE);
        assert_eq!(run_cli(["jed", "enhance", "x.png", "--gamma", "0.5"]), EXIT_USAGE);
        assert_eq!(run_cli(["jed", "enhance", "x.png", "--alpha", "abc"]), EXIT_USAGE);
    }
}
