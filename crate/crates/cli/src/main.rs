//! `cardioreg` command line: one subcommand per pipeline stage.
//!
//! Exit codes: 0 success, 1 usage error, 2 data or parse error, 3 numerical
//! failure. Failures also print one JSON object on standard error.

use std::io::Write as _;
use std::path::PathBuf;
use std::process::ExitCode;

use cardioreg::io::{
    read_landmarks, read_mask, read_mesh, read_point_cloud, read_transform, read_volume, write_landmarks, write_mask,
    write_mesh, write_point_cloud, write_transform, write_volume,
};
use cardioreg::phantom::{generate_lv_shell, generate_phantom_volume, perturb_cloud, PerturbSpec, ShellDescriptor, ShellParams};
use cardioreg::pipeline::{compare, compare_csv, format_sig, initial_transform, register_fine, InitSource, Method, PipelineParams};
use cardioreg::segmentation::{region_grow_with, Connectivity};
use cardioreg::{
    build_spatial_reference, coarse_register, dice, extract_isosurface, map_mpi_to_mesh, mask_to_point_cloud,
    mean_distance_error, warp_volume, CoarseParams, Error, FusionInput, MpiSource, Point3, RegistrationResult,
};
use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser)]
#[command(name = "cardioreg", version, about = "Coarse-to-fine cardiac registration and SPECT/CTA fusion")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Segment a volume by seeded region growing.
    RegionGrow(RegionGrowArgs),
    /// Extract a closed isosurface mesh (STL) from a mask.
    Surface(SurfaceArgs),
    /// Write the boundary voxel centres of a mask as a PLY cloud.
    Cloud(CloudArgs),
    /// Landmark similarity registration.
    Coarse(CoarseArgs),
    /// Fine registration, preceded by coarse registration when landmarks are given.
    Register(RegisterArgs),
    /// Resample a volume through a transform.
    Warp(WarpArgs),
    /// Map perfusion values onto a mesh.
    Fuse(FuseArgs),
    /// Dice of two masks or mean distance error of two clouds.
    Metrics(MetricsArgs),
    /// Synthetic phantoms.
    #[command(subcommand)]
    Phantom(PhantomCommand),
    /// Run all four fine methods from one start and print a CSV table.
    Compare(CompareArgs),
}

#[derive(Args)]
struct RegionGrowArgs {
    #[arg(long)]
    volume: PathBuf,
    /// Seed voxel `i,j,k`; repeat for several seeds.
    #[arg(long = "seed", required = true, value_parser = parse_index)]
    seeds: Vec<[usize; 3]>,
    #[arg(long, default_value_t = 400.0)]
    threshold: f64,
    #[arg(long, value_enum, default_value_t = Neighbourhood::Six)]
    connectivity: Neighbourhood,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum Neighbourhood {
    #[value(name = "6")]
    Six,
    #[value(name = "26")]
    TwentySix,
}

#[derive(Args)]
struct SurfaceArgs {
    #[arg(long)]
    mask: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct CloudArgs {
    #[arg(long)]
    mask: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct CoarseFlags {
    /// Fit rotation and translation only.
    #[arg(long)]
    rigid_coarse: bool,
    /// Landmarks kept per group after downsampling.
    #[arg(long)]
    landmark_count: Option<usize>,
}

impl CoarseFlags {
    fn params(&self) -> CoarseParams {
        CoarseParams {
            with_scaling: !self.rigid_coarse,
            target_count: self.landmark_count,
        }
    }
}

#[derive(Args)]
struct CoarseArgs {
    #[arg(long)]
    moving_landmarks: PathBuf,
    #[arg(long)]
    fixed_landmarks: PathBuf,
    #[command(flatten)]
    coarse: CoarseFlags,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct FineFlags {
    #[arg(long)]
    max_iterations: Option<usize>,
    /// Relative stopping tolerance for every method.
    #[arg(long)]
    tolerance: Option<f64>,
    /// CPD uniform outlier weight.
    #[arg(long)]
    outlier_weight: Option<f64>,
    /// SICP per-axis scale bounds `lo,hi`.
    #[arg(long, value_parser = parse_pair)]
    scale_bounds: Option<(f64, f64)>,
}

#[derive(Args)]
struct Inputs {
    #[arg(long)]
    moving: PathBuf,
    #[arg(long)]
    fixed: PathBuf,
    #[arg(long, requires = "fixed_landmarks")]
    moving_landmarks: Option<PathBuf>,
    #[arg(long, requires = "moving_landmarks")]
    fixed_landmarks: Option<PathBuf>,
    /// Initial transform; skips the coarse stage.
    #[arg(long)]
    init: Option<PathBuf>,
    #[command(flatten)]
    coarse: CoarseFlags,
    #[command(flatten)]
    fine: FineFlags,
}

#[derive(Args)]
struct RegisterArgs {
    #[command(flatten)]
    inputs: Inputs,
    #[arg(long, value_parser = parse_method)]
    method: Method,
    #[arg(long)]
    out: PathBuf,
    /// Also write the report printed on standard output to this file.
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Args)]
struct CompareArgs {
    #[command(flatten)]
    inputs: Inputs,
    /// Write the CSV here instead of standard output.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct WarpArgs {
    #[arg(long)]
    volume: PathBuf,
    /// Maps the input volume's world frame to the output frame.
    #[arg(long)]
    transform: PathBuf,
    /// Volume whose grid defines the output; its values are ignored.
    #[arg(long)]
    reference: PathBuf,
    #[arg(long, default_value_t = 0.0)]
    fill: f32,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct FuseArgs {
    #[arg(long)]
    mesh: PathBuf,
    /// Registered cloud carrying a `value` property.
    #[arg(long, conflicts_with_all = ["volume", "transform"], required_unless_present = "volume")]
    cloud: Option<PathBuf>,
    #[arg(long, requires = "transform")]
    volume: Option<PathBuf>,
    /// Maps the volume's world frame to the mesh frame.
    #[arg(long, requires = "volume")]
    transform: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
#[group(required = true, multiple = false)]
struct MetricsArgs {
    #[arg(long, num_args = 2, value_names = ["A", "B"])]
    dice: Option<Vec<PathBuf>>,
    #[arg(long, num_args = 2, value_names = ["SRC", "DST"])]
    mde: Option<Vec<PathBuf>>,
}

#[derive(Subcommand)]
enum PhantomCommand {
    /// Truncated-ellipsoid shell with groove landmarks.
    Shell(ShellArgs),
    /// Volume of nested solid ellipsoids.
    Volume(PhantomVolumeArgs),
}

#[derive(Args)]
struct ShellArgs {
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 2000)]
    points: usize,
    #[arg(long, value_parser = parse_triple, default_value = "30,24,50")]
    semi_axes: [f64; 3],
    #[arg(long, default_value_t = 0.7)]
    truncation: f64,
    #[arg(long, default_value_t = 10)]
    landmarks_per_group: usize,
    /// Ground-truth transform applied to the shell and its landmarks.
    #[arg(long)]
    transform: Option<PathBuf>,
    #[arg(long, default_value_t = 0.0)]
    noise: f64,
    #[arg(long, default_value_t = 0.0)]
    outliers: f64,
    #[arg(long, default_value_t = 0)]
    perturb_seed: u64,
    #[arg(long)]
    out_cloud: PathBuf,
    #[arg(long)]
    out_landmarks: PathBuf,
}

#[derive(Args)]
struct PhantomVolumeArgs {
    #[arg(long, value_parser = parse_index)]
    size: [usize; 3],
    #[arg(long, value_parser = parse_triple)]
    voxel: [f64; 3],
    #[arg(long, value_parser = parse_triple, default_value = "0,0,0")]
    origin: [f64; 3],
    /// `cx,cy,cz,a,b,c,intensity`; repeat for nested shells.
    #[arg(long = "shell", required = true, value_parser = parse_shell)]
    shells: Vec<ShellDescriptor>,
    #[arg(long)]
    out: PathBuf,
}

fn parse_reals(s: &str, n: usize) -> Result<Vec<f64>, String> {
    let v: Vec<f64> = s
        .split(',')
        .map(|t| t.trim().parse::<f64>().map_err(|e| format!("`{t}`: {e}")))
        .collect::<Result<_, _>>()?;
    if v.len() != n {
        return Err(format!("expected {n} comma-separated numbers, found {}", v.len()));
    }
    if v.iter().any(|x| !x.is_finite()) {
        return Err("values must be finite".into());
    }
    Ok(v)
}

fn parse_triple(s: &str) -> Result<[f64; 3], String> {
    let v = parse_reals(s, 3)?;
    Ok([v[0], v[1], v[2]])
}

fn parse_pair(s: &str) -> Result<(f64, f64), String> {
    let v = parse_reals(s, 2)?;
    Ok((v[0], v[1]))
}

fn parse_index(s: &str) -> Result<[usize; 3], String> {
    let v: Vec<usize> = s
        .split(',')
        .map(|t| t.trim().parse::<usize>().map_err(|e| format!("`{t}`: {e}")))
        .collect::<Result<_, _>>()?;
    <[usize; 3]>::try_from(v).map_err(|v| format!("expected 3 comma-separated integers, found {}", v.len()))
}

fn parse_shell(s: &str) -> Result<ShellDescriptor, String> {
    let v = parse_reals(s, 7)?;
    Ok(ShellDescriptor {
        center: Point3::new(v[0], v[1], v[2]),
        semi_axes: [v[3], v[4], v[5]],
        intensity: v[6] as f32,
    })
}

fn parse_method(s: &str) -> Result<Method, String> {
    cardioreg::pipeline::parse_method(s).map_err(|e| e.to_string())
}

fn pipeline_params(f: &FineFlags, coarse: &CoarseFlags) -> PipelineParams {
    let mut p = PipelineParams {
        coarse: coarse.params(),
        ..Default::default()
    };
    if let Some(n) = f.max_iterations {
        p.icp.max_iterations = n;
        p.cpd.max_iterations = n;
    }
    if let Some(t) = f.tolerance {
        p.icp.rel_tolerance = t;
        p.cpd.tolerance = t;
    }
    if let Some(w) = f.outlier_weight {
        p.cpd.outlier_weight = w;
    }
    if let Some(b) = f.scale_bounds {
        p.icp.scale_bounds = b;
    }
    p
}

struct Loaded {
    moving: cardioreg::PointCloud,
    fixed: cardioreg::PointCloud,
    start: cardioreg::AffineTransform3,
    source: InitSource,
    params: PipelineParams,
}

fn load_inputs(a: &Inputs) -> cardioreg::Result<Loaded> {
    let moving = read_point_cloud(&a.moving)?;
    let fixed = read_point_cloud(&a.fixed)?;
    let init = a.init.as_ref().map(read_transform).transpose()?;
    let landmarks = match (&a.moving_landmarks, &a.fixed_landmarks) {
        (Some(m), Some(f)) => Some((read_landmarks(m)?, read_landmarks(f)?)),
        _ => None,
    };
    let params = pipeline_params(&a.fine, &a.coarse);
    let (start, source) = initial_transform(init.as_ref(), landmarks.as_ref().map(|(m, f)| (m, f)), &params.coarse)?;
    if source == InitSource::Identity {
        eprintln!("warning: no --init and no landmarks; fine registration starts from identity");
    }
    Ok(Loaded {
        moving,
        fixed,
        start,
        source,
        params,
    })
}

fn report(method: Method, source: InitSource, r: &RegistrationResult) -> String {
    let init = match source {
        InitSource::Given => "given",
        InitSource::Coarse => "coarse",
        InitSource::Identity => "identity",
    };
    let mut s = format!("method {method}\ninit {init}\nmde_mm {}\n", format_sig(r.mde));
    s += &format!("iterations {}\nconverged {}\n", r.iterations, r.converged);
    if let Some(d) = r.detail {
        s += &format!("detail {d:?}\n");
    }
    if let Some(s2) = r.sigma2 {
        s += &format!("sigma2 {}\n", format_sig(s2));
    }
    let trace: Vec<String> = r.objective_trace.iter().map(|&v| format_sig(v)).collect();
    s += &format!("objective_trace {}\n", trace.join(" "));
    s
}

enum Failure {
    Usage(String),
    Core(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Core(e)
    }
}

fn run(cli: Cli) -> Result<(), Failure> {
    let mut out = std::io::stdout().lock();
    match cli.command {
        Command::RegionGrow(a) => {
            let vol = read_volume(&a.volume)?;
            let conn = match a.connectivity {
                Neighbourhood::Six => Connectivity::Six,
                Neighbourhood::TwentySix => Connectivity::TwentySix,
            };
            let mask = region_grow_with(&vol, &a.seeds, a.threshold, conn)?;
            write_mask(&a.out, &mask)?;
            writeln!(out, "voxels {}", mask.count()).ok();
        }
        Command::Surface(a) => {
            let mesh = extract_isosurface(&read_mask(&a.mask)?)?;
            write_mesh(&a.out, &mesh)?;
            writeln!(out, "vertices {}\ntriangles {}", mesh.vertices.len(), mesh.triangles.len()).ok();
        }
        Command::Cloud(a) => {
            let cloud = mask_to_point_cloud(&read_mask(&a.mask)?)?;
            write_point_cloud(&a.out, &cloud)?;
            writeln!(out, "points {}", cloud.len()).ok();
        }
        Command::Coarse(a) => {
            let t = coarse_register(&read_landmarks(&a.moving_landmarks)?, &read_landmarks(&a.fixed_landmarks)?, &a.coarse.params())?;
            write_transform(&a.out, &t)?;
        }
        Command::Register(a) => {
            let l = load_inputs(&a.inputs)?;
            let r = register_fine(a.method, &l.moving, &l.fixed, &l.start, &l.params)?;
            write_transform(&a.out, &r.transform)?;
            let text = report(a.method, l.source, &r);
            if let Some(p) = &a.report {
                std::fs::write(p, &text).map_err(Error::from)?;
            }
            out.write_all(text.as_bytes()).ok();
        }
        Command::Compare(a) => {
            let l = load_inputs(&a.inputs)?;
            let rows: Vec<_> = compare(&l.moving, &l.fixed, &l.start, &l.params)?
                .into_iter()
                .map(|(row, _)| row)
                .collect();
            let csv = compare_csv(&rows);
            match &a.out {
                Some(p) => std::fs::write(p, csv).map_err(Error::from)?,
                None => out.write_all(csv.as_bytes()).map_err(Error::from)?,
            }
        }
        Command::Warp(a) => {
            let vol = read_volume(&a.volume)?;
            let reference = read_volume(&a.reference)?.reference;
            let warped = warp_volume(&vol, &read_transform(&a.transform)?, &reference, a.fill)?;
            write_volume(&a.out, &warped)?;
        }
        Command::Fuse(a) => {
            let mesh = read_mesh(&a.mesh)?;
            let fused = match (&a.cloud, &a.volume, &a.transform) {
                (Some(c), _, _) => {
                    let cloud = read_point_cloud(c)?;
                    map_mpi_to_mesh(&FusionInput {
                        mesh: &mesh,
                        mpi_source: MpiSource::Cloud(&cloud),
                    })?
                }
                (None, Some(v), Some(t)) => {
                    let (volume, transform) = (read_volume(v)?, read_transform(t)?);
                    map_mpi_to_mesh(&FusionInput {
                        mesh: &mesh,
                        mpi_source: MpiSource::Volume {
                            volume: &volume,
                            transform: &transform,
                        },
                    })?
                }
                _ => return Err(Failure::Usage("fuse needs --cloud, or --volume with --transform".into())),
            };
            write_mesh(&a.out, &fused)?;
        }
        Command::Metrics(a) => {
            let v = match (a.dice, a.mde) {
                (Some(p), _) => dice(&read_mask(&p[0])?, &read_mask(&p[1])?)?,
                (None, Some(p)) => mean_distance_error(&read_point_cloud(&p[0])?, &read_point_cloud(&p[1])?)?,
                (None, None) => return Err(Failure::Usage("metrics needs --dice or --mde".into())),
            };
            writeln!(out, "{}", format_sig(v)).ok();
        }
        Command::Phantom(PhantomCommand::Shell(a)) => {
            let params = ShellParams {
                semi_axes: a.semi_axes,
                truncation_fraction: a.truncation,
                point_count: a.points,
                landmarks_per_group: a.landmarks_per_group,
                rng_seed: a.seed,
            };
            let (mut cloud, mut lm) = generate_lv_shell(&params)?;
            if a.transform.is_some() || a.noise > 0.0 || a.outliers > 0.0 {
                let transform = match &a.transform {
                    Some(p) => read_transform(p)?,
                    None => cardioreg::AffineTransform3::identity(),
                };
                let spec = PerturbSpec {
                    transform,
                    noise_sigma: a.noise,
                    outlier_fraction: a.outliers,
                    rng_seed: a.perturb_seed,
                };
                (cloud, lm) = perturb_cloud(&cloud, &lm, &spec)?;
            }
            write_point_cloud(&a.out_cloud, &cloud)?;
            write_landmarks(&a.out_landmarks, &lm)?;
        }
        Command::Phantom(PhantomCommand::Volume(a)) => {
            let reference = build_spatial_reference(a.size, a.voxel, a.origin)?;
            write_volume(&a.out, &generate_phantom_volume(&reference, &a.shells)?)?;
        }
    }
    Ok(())
}

fn fail(code: u8, kind: &str, message: &str, line: Option<usize>) -> ExitCode {
    let mut obj = serde_json::json!({ "error": kind, "exit_code": code, "message": message });
    if let Some(l) = line {
        obj["line"] = l.into();
    }
    eprintln!("{obj}");
    ExitCode::from(code)
}

fn exit_code(e: &Error) -> u8 {
    if e.is_numerical() {
        3
    } else if matches!(e, Error::InvalidParameter(_)) {
        1
    } else {
        2
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) if !e.use_stderr() => {
            print!("{e}");
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            eprint!("{e}");
            return fail(1, "UsageError", e.kind().to_string().as_str(), None);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(m)) => fail(1, "UsageError", &m, None),
        Err(Failure::Core(e)) => {
            let line = match &e {
                Error::Parse { line, .. } => Some(*line),
                _ => None,
            };
            fail(exit_code(&e), e.kind(), &e.to_string(), line)
        }
    }
}
