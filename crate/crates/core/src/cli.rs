//! Command-line front end.
//!
//! Exit codes: 0 on success, 1 when input data is unreadable or invalid,
//! 2 on argument errors. Results go to stdout or to the requested files;
//! diagnostics go to stderr.

use std::ffi::OsString;
use std::fmt;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::error::Error;
use crate::eval::{dsc, voxelize, VoxelSet};
use crate::geometry::{Bundle, Tractogram};
use crate::io::{self, BundleLabels};
use crate::lap::solve_rlap;
use crate::metrics::{d_end, d_mc, d_rois, RoiSet};
use crate::segmentation::{segment_multi, CostWeights, MajorityThreshold, Normalization, SegmentationConfig};
use crate::synth::{examples_from, generate_subject, SynthSpec};

#[derive(Debug, Parser)]
#[command(name = "lapseg", version, about = "Example-based bundle segmentation by linear assignment")]
pub struct Cli {
    /// Worker threads (default: all cores). Results do not depend on it.
    #[arg(long, global = true, value_parser = clap::value_parser!(u16).range(1..))]
    pub jobs: Option<u16>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Segment a bundle in a target tractogram from example bundles.
    ///
    /// Writes the selected streamline ids as a label file and a run report
    /// CSV with header `example_index,total_cost,candidates`, preceded by
    /// `#` lines recording the configuration.
    Segment(SegmentArgs),
    /// Dice overlap between estimated and true bundles.
    ///
    /// Prints CSV with header `bundle,dsc,voxels_est,voxels_truth`, one row
    /// per --estimate/--truth pair.
    Evaluate(EvaluateArgs),
    /// Write a synthetic two-subject study described by a JSON spec.
    Gen(GenArgs),
    /// Distances between the streamlines of two files.
    ///
    /// Prints CSV with header `a,b,d_mc,d_end,d_rois` for every pair of
    /// streamlines; d_rois is empty without --rois.
    Dist(DistArgs),
    /// Solve a linear assignment problem given as a CSV cost matrix.
    ///
    /// Prints `total_cost <value>` then `row_to_col <c0> <c1> ...`.
    LapSolve(LapSolveArgs),
}

#[derive(Debug, Args)]
pub struct SegmentArgs {
    /// Target tractogram (.bseg).
    #[arg(long)]
    pub tractogram: PathBuf,
    /// Example bundle (.bseg holding the bundle's streamlines). Repeatable.
    #[arg(long = "example", required = true)]
    pub examples: Vec<PathBuf>,
    /// Waypoint ROI mask in target space. Repeatable; all masks form one set.
    #[arg(long = "rois")]
    pub rois: Vec<PathBuf>,
    /// Cost weights λD,λE,λR.
    #[arg(long, conflicts_with = "baseline")]
    pub weights: Option<CostWeights>,
    /// Nearest neighbours kept per example streamline.
    #[arg(long, default_value_t = 20, value_parser = clap::value_parser!(u64).range(1..))]
    pub knn: u64,
    /// Block normalization: max, range or none.
    #[arg(long, conflicts_with = "baseline")]
    pub normalization: Option<Normalization>,
    /// Votes needed to keep a streamline: strict-majority or a count.
    #[arg(long, default_value_t = MajorityThreshold::StrictMajority)]
    pub threshold: MajorityThreshold,
    /// Geometry only: weights 1,0,0 and no normalization.
    #[arg(long)]
    pub baseline: bool,
    /// Bundle name written to the label file (default: first example's file stem).
    #[arg(long)]
    pub name: Option<String>,
    /// Output label file.
    #[arg(long)]
    pub out: PathBuf,
    /// Run report path (default: `<out>.report.csv`).
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    /// Estimated bundle label file. Repeatable, paired with --truth in order.
    #[arg(long = "estimate", required = true)]
    pub estimates: Vec<PathBuf>,
    /// Ground-truth bundle label file. Repeatable.
    #[arg(long = "truth", required = true)]
    pub truths: Vec<PathBuf>,
    /// Tractogram the ids refer to (.bseg).
    #[arg(long)]
    pub tractogram: PathBuf,
    /// Voxel grid file (a ROI file is accepted as well).
    #[arg(long)]
    pub grid: PathBuf,
}

#[derive(Debug, Args)]
pub struct GenArgs {
    /// JSON study spec.
    #[arg(long)]
    pub spec: PathBuf,
    /// Output directory, created if missing.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct DistArgs {
    #[arg(long)]
    pub a: PathBuf,
    #[arg(long)]
    pub b: PathBuf,
    /// ROI masks for d_rois. Repeatable.
    #[arg(long = "rois")]
    pub rois: Vec<PathBuf>,
}

#[derive(Debug, Args)]
pub struct LapSolveArgs {
    /// CSV cost matrix with no more rows than columns.
    #[arg(long)]
    pub matrix: PathBuf,
}

/// A failure with its exit code.
#[derive(Debug)]
pub struct Failure {
    pub code: i32,
    pub message: String,
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

fn usage(message: impl Into<String>) -> Failure {
    Failure {
        code: 2,
        message: message.into(),
    }
}

/// Data error tied to a file.
fn at(path: &Path) -> impl FnOnce(Error) -> Failure + '_ {
    move |e| Failure {
        code: 1,
        message: format!("{}: {e}", path.display()),
    }
}

fn data(e: impl fmt::Display) -> Failure {
    Failure {
        code: 1,
        message: e.to_string(),
    }
}

fn write_out(out: &mut dyn Write, text: &str) -> Result<(), Failure> {
    out.write_all(text.as_bytes()).map_err(data)
}

fn read_rois(paths: &[PathBuf]) -> Result<Option<RoiSet>, Failure> {
    if paths.is_empty() {
        return Ok(None);
    }
    let rois = paths
        .iter()
        .map(|p| io::read_roi(p).map_err(at(p)))
        .collect::<Result<Vec<_>, _>>()?;
    RoiSet::new(rois).map(Some).map_err(data)
}

fn stem(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "bundle".into())
}

fn cmd_segment(args: &SegmentArgs) -> Result<(), Failure> {
    let mut cfg = if args.baseline {
        SegmentationConfig::baseline()
    } else {
        SegmentationConfig::default()
    };
    if let Some(w) = args.weights {
        cfg.weights = w;
    }
    if let Some(n) = args.normalization {
        cfg.normalization = n;
    }
    cfg.knn = usize::try_from(args.knn).map_err(|_| usage("--knn is too large"))?;
    cfg.threshold = args.threshold;
    cfg.validate(args.examples.len()).map_err(|e| usage(e.to_string()))?;
    if cfg.weights.lambda_r > 0.0 && args.rois.is_empty() {
        return Err(usage("ROI set required: the ROI weight is positive but no --rois were given"));
    }

    let rois = read_rois(&args.rois)?;
    let t: Tractogram = io::read_tractogram(&args.tractogram).map_err(at(&args.tractogram))?;
    let examples = args
        .examples
        .iter()
        .map(|p| {
            let ex: Tractogram = io::read_tractogram(p).map_err(at(p))?;
            Bundle::from_streamlines(stem(p), ex.streamlines().to_vec()).map_err(at(p))
        })
        .collect::<Result<Vec<_>, _>>()?;

    let result = segment_multi(&examples, &t, rois.as_ref(), &cfg).map_err(data)?;
    let name = args.name.clone().unwrap_or_else(|| stem(&args.examples[0]));
    let labels = BundleLabels::new(name, result.selected_ids.iter().copied()).map_err(data)?;
    io::write_atomic(&args.out, io::format_labels(&labels).as_bytes()).map_err(at(&args.out))?;

    let mut report = String::new();
    report.push_str(&format!("# weights={}\n", cfg.weights));
    report.push_str(&format!("# knn={}\n", cfg.knn));
    report.push_str(&format!("# normalization={}\n", cfg.normalization));
    report.push_str(&format!("# threshold={}\n", cfg.threshold));
    report.push_str(&format!("# examples={}\n", examples.len()));
    report.push_str(&format!("# selected={}\n", result.selected_ids.len()));
    report.push_str("example_index,total_cost,candidates\n");
    for (i, (cost, cands)) in result
        .per_example_cost
        .iter()
        .zip(&result.per_example_candidates)
        .enumerate()
    {
        report.push_str(&format!("{i},{cost},{cands}\n"));
    }
    let report_path = args.report.clone().unwrap_or_else(|| {
        let mut p = args.out.clone().into_os_string();
        p.push(".report.csv");
        PathBuf::from(p)
    });
    io::write_atomic(&report_path, report.as_bytes()).map_err(at(&report_path))
}

fn labels_voxels(labels: &BundleLabels, t: &Tractogram, grid: &crate::geometry::VoxelGrid, path: &Path) -> Result<VoxelSet, Failure> {
    if labels.ids.is_empty() {
        return VoxelSet::new(*grid, []).map_err(data);
    }
    let bundle = labels.to_bundle().map_err(at(path))?;
    voxelize(&bundle, t, grid).map_err(at(path))
}

fn cmd_evaluate(args: &EvaluateArgs, out: &mut dyn Write) -> Result<(), Failure> {
    if args.estimates.len() != args.truths.len() {
        return Err(usage(format!(
            "{} --estimate files but {} --truth files; they are paired in order",
            args.estimates.len(),
            args.truths.len()
        )));
    }
    let t: Tractogram = io::read_tractogram(&args.tractogram).map_err(at(&args.tractogram))?;
    let grid = io::read_grid(&args.grid).map_err(at(&args.grid))?;
    let mut text = String::from("bundle,dsc,voxels_est,voxels_truth\n");
    for (ep, tp) in args.estimates.iter().zip(&args.truths) {
        let est = io::read_bundle_labels(ep).map_err(at(ep))?;
        let truth = io::read_bundle_labels(tp).map_err(at(tp))?;
        let ve = labels_voxels(&est, &t, &grid, ep)?;
        let vt = labels_voxels(&truth, &t, &grid, tp)?;
        let score = dsc(&ve, &vt).map_err(|e| data(format!("{} vs {}: {e}", ep.display(), tp.display())))?;
        text.push_str(&format!("{},{score},{},{}\n", truth.name, ve.len(), vt.len()));
    }
    write_out(out, &text)
}

fn cmd_gen(args: &GenArgs) -> Result<(), Failure> {
    let text = fs::read_to_string(&args.spec).map_err(|e| at(&args.spec)(e.into()))?;
    let spec: SynthSpec = serde_json::from_str(&text).map_err(|e| data(format!("{}: {e}", args.spec.display())))?;
    spec.validate().map_err(at(&args.spec))?;
    let a = generate_subject(&spec, 0).map_err(at(&args.spec))?;
    let b = generate_subject(&spec, 1).map_err(at(&args.spec))?;
    for (i, subject) in [&a, &b].into_iter().enumerate() {
        let dir = args.out.join(format!("subject_{i}"));
        fs::create_dir_all(&dir).map_err(|e| at(&dir)(e.into()))?;
        let write = |name: &str, bytes: &[u8]| {
            let p = dir.join(name);
            io::write_atomic(&p, bytes).map_err(at(&p))
        };
        write("tractogram.bseg", &io::encode_tractogram(&subject.tractogram))?;
        write("grid.txt", io::format_grid_file(&subject.grid).as_bytes())?;
        for (bi, truth) in subject.bundles.iter().enumerate() {
            let name = truth.name();
            let labels = BundleLabels::new(name, truth.ids().unwrap_or_default().iter().copied()).map_err(data)?;
            write(&format!("{name}.labels"), io::format_labels(&labels).as_bytes())?;
            let geometry = Tractogram::new(truth.streamlines(Some(&subject.tractogram)).map_err(data)?.into_iter().cloned().collect()).map_err(data)?;
            write(&format!("{name}.bseg"), &io::encode_tractogram(&geometry))?;
            for (r, roi) in subject.rois[bi].rois().iter().enumerate() {
                write(&format!("{name}.roi{}.txt", r + 1), io::format_roi(roi).as_bytes())?;
            }
            for (e, ex) in examples_from(&spec, subject, bi).map_err(data)?.iter().enumerate() {
                let geometry = Tractogram::new(ex.streamlines(None).map_err(data)?.into_iter().cloned().collect()).map_err(data)?;
                write(&format!("{name}.example{e}.bseg"), &io::encode_tractogram(&geometry))?;
            }
        }
    }
    Ok(())
}

fn cmd_dist(args: &DistArgs, out: &mut dyn Write) -> Result<(), Failure> {
    let rois = read_rois(&args.rois)?;
    let a: Tractogram = io::read_tractogram(&args.a).map_err(at(&args.a))?;
    let b: Tractogram = io::read_tractogram(&args.b).map_err(at(&args.b))?;
    let mut text = String::from("a,b,d_mc,d_end,d_rois\n");
    for (i, sa) in a.streamlines().iter().enumerate() {
        for (j, sb) in b.streamlines().iter().enumerate() {
            let r = rois.as_ref().map(|r| d_rois(sa, sb, r).to_string()).unwrap_or_default();
            text.push_str(&format!("{i},{j},{},{},{r}\n", d_mc(sa, sb), d_end(sa, sb)));
        }
    }
    write_out(out, &text)
}

fn cmd_lap_solve(args: &LapSolveArgs, out: &mut dyn Write) -> Result<(), Failure> {
    let m = io::read_matrix_csv::<f64>(&args.matrix).map_err(at(&args.matrix))?;
    let a = solve_rlap(&m).map_err(at(&args.matrix))?;
    let cols: Vec<String> = a.row_to_col.iter().map(usize::to_string).collect();
    write_out(out, &format!("total_cost {}\nrow_to_col {}\n", a.total_cost, cols.join(" ")))
}

/// Runs a parsed command, writing results to `out`.
pub fn execute(cli: &Cli, out: &mut dyn Write) -> Result<(), Failure> {
    match &cli.command {
        Command::Segment(a) => cmd_segment(a),
        Command::Evaluate(a) => cmd_evaluate(a, out),
        Command::Gen(a) => cmd_gen(a),
        Command::Dist(a) => cmd_dist(a, out),
        Command::LapSolve(a) => cmd_lap_solve(a, out),
    }
}

/// Parses `args`, runs the command and returns the process exit code.
pub fn run(args: impl IntoIterator<Item = impl Into<OsString> + Clone>, out: &mut dyn Write, err: &mut dyn Write) -> i32 {
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = e.exit_code();
            let rendered = e.render().to_string();
            // --help and --version are successful parses that print to stdout
            if code == 0 {
                let _ = out.write_all(rendered.as_bytes());
            } else {
                let _ = err.write_all(rendered.as_bytes());
            }
            return code;
        }
    };
    if let Some(jobs) = cli.jobs {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(jobs.into()).build_global() {
            let _ = writeln!(err, "warning: could not size the worker pool: {e}");
        }
    }
    match execute(&cli, out) {
        Ok(()) => 0,
        Err(f) => {
            let _ = writeln!(err, "error: {f}");
            f.code
        }
    }
}
