use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

/// Three comma-separated numbers.
fn parse_triple(s: &str) -> Result<[f64; 3], String> {
    let parts: Vec<&str> = s.split(',').collect();
    if parts.len() != 3 {
        return Err(format!("expected 3 comma-separated numbers, got {s:?}"));
    }
    let mut out = [0.0; 3];
    for (o, p) in out.iter_mut().zip(parts) {
        *o = p
            .trim()
            .parse()
            .map_err(|_| format!("invalid number {p:?}"))?;
    }
    Ok(out)
}

#[derive(Debug, Parser)]
#[command(
    name = "depthscan",
    version,
    about = "Synthesize, differentiate, integrate, mesh and evaluate depth scans"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Render an analytic scene to depth, normals, mask and a reference scan.
    Synth(SynthArgs),
    /// Compute per-pixel normals from a depth map.
    Depth2normals(Depth2NormalsArgs),
    /// Recover depth from a normal map by gradient descent.
    Normals2depth(Normals2DepthArgs),
    /// Triangulate front (and optionally back) depth into a mesh.
    Depth2mesh(Depth2MeshArgs),
    /// Bidirectional mesh-to-mesh error report in millimeters.
    Eval(EvalArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ShapeKind {
    Plane,
    #[value(alias = "slanted_plane")]
    SlantedPlane,
    #[value(alias = "sphere_cap")]
    SphereCap,
    Ellipsoid,
    #[value(alias = "sinusoid_relief")]
    SinusoidRelief,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long, value_enum)]
    pub kind: ShapeKind,
    #[arg(long, default_value = "out")]
    pub out_dir: PathBuf,
    /// Seed for every random choice.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,

    /// Sphere radius (m).
    #[arg(long, default_value_t = 0.3)]
    pub radius: f64,
    /// Sphere cap half angle about the pole facing the camera (degrees).
    #[arg(long, default_value_t = 60.0)]
    pub half_angle: f64,
    /// Ellipsoid semi-axes (m), comma separated.
    #[arg(long, value_parser = parse_triple, default_value = "0.25,0.4,0.15")]
    pub semi_axes: [f64; 3],
    #[arg(long, default_value_t = 0.3)]
    pub slope_x: f64,
    #[arg(long, default_value_t = 0.2)]
    pub slope_y: f64,
    /// Sinusoid amplitude (m).
    #[arg(long, default_value_t = 0.02)]
    pub amplitude: f64,
    /// Sinusoid period (m).
    #[arg(long, default_value_t = 0.3)]
    pub period: f64,

    /// Subject distance along the optical axis (m), ignored with
    /// `--translation` or `--random-placement`.
    #[arg(long, default_value_t = 2.0)]
    pub distance: f64,
    /// Subject position x,y,z in the y-up frame with the subject at negative z (m).
    #[arg(long, value_parser = parse_triple, conflicts_with = "random_placement")]
    pub translation: Option<[f64; 3]>,
    /// Euler angles x,y,z in degrees, applied in yxz order.
    #[arg(long, value_parser = parse_triple, conflicts_with = "random_placement")]
    pub rotation: Option<[f64; 3]>,
    /// Draw translation and rotation uniformly from the default ranges.
    #[arg(long)]
    pub random_placement: bool,

    #[command(flatten)]
    pub image: ImageArgs,
    /// Depth discontinuity ratio for the reference scan.
    #[arg(long, default_value_t = depthscan_core::meshing::DEFAULT_DISCONTINUITY_RATIO)]
    pub discontinuity_ratio: f64,
}

#[derive(Debug, Args)]
pub struct ImageArgs {
    #[arg(long, default_value_t = 720)]
    pub width: usize,
    #[arg(long, default_value_t = 960)]
    pub height: usize,
    /// Focal length (pixels).
    #[arg(long, default_value_t = 720.0)]
    pub focal: f64,
}

/// Camera from a manifest, or from a focal length with the principal point
/// defaulting to the image center.
#[derive(Debug, Args)]
pub struct CameraArgs {
    /// Scene manifest written by `synth`; supplies the camera.
    #[arg(long, conflicts_with = "focal")]
    pub manifest: Option<PathBuf>,
    /// Focal length (pixels).
    #[arg(long)]
    pub focal: Option<f64>,
    #[arg(long, requires = "focal")]
    pub cx: Option<f64>,
    #[arg(long, requires = "focal")]
    pub cy: Option<f64>,
}

#[derive(Debug, Args)]
pub struct Depth2NormalsArgs {
    /// Depth PFM.
    #[arg(long)]
    pub depth: PathBuf,
    /// Validity mask PGM; defaults to pixels with positive depth.
    #[arg(long)]
    pub mask: Option<PathBuf>,
    #[command(flatten)]
    pub camera: CameraArgs,
    /// Output normals PFM.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct Normals2DepthArgs {
    /// Normals PFM.
    #[arg(long)]
    pub normals: PathBuf,
    /// Validity mask PGM; defaults to the full image.
    #[arg(long)]
    pub mask: Option<PathBuf>,
    #[command(flatten)]
    pub camera: CameraArgs,
    /// Output depth PFM.
    #[arg(long)]
    pub out: PathBuf,
    /// Fix the scale: pixel column, row and depth (m).
    #[arg(long, value_parser = parse_triple, value_name = "U,V,DEPTH")]
    pub anchor: Option<[f64; 3]>,
    /// Reference depth PFM; adds the scale-aligned RMS to the summary.
    #[arg(long)]
    pub reference: Option<PathBuf>,
    #[arg(long)]
    pub max_iters: Option<usize>,
    #[arg(long)]
    pub step_size: Option<f64>,
    #[arg(long)]
    pub step_decay: Option<f64>,
    #[arg(long)]
    pub rollback_slack: Option<f64>,
    #[arg(long)]
    pub convergence_tol: Option<f64>,
    /// Initial depth (m).
    #[arg(long)]
    pub init_depth: Option<f64>,
}

#[derive(Debug, Args)]
pub struct Depth2MeshArgs {
    /// Front depth PFM.
    #[arg(long)]
    pub front: PathBuf,
    /// Back depth PFM; fused with the front layer.
    #[arg(long)]
    pub back: Option<PathBuf>,
    /// Front validity mask PGM; defaults to pixels with positive depth.
    #[arg(long)]
    pub mask: Option<PathBuf>,
    #[command(flatten)]
    pub camera: CameraArgs,
    /// Output mesh, `.obj` or `.ply`.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = depthscan_core::meshing::DEFAULT_DISCONTINUITY_RATIO)]
    pub discontinuity_ratio: f64,
    /// Rescale about the centroid to this vertical extent (m).
    #[arg(long)]
    pub target_height: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum WeightingArg {
    /// Average of the two directional means.
    Equal,
    /// Mean over the pooled vertices of both meshes.
    VertexCount,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Scan mesh (`.obj` or `.ply`).
    pub scan: PathBuf,
    /// Reference mesh (`.obj` or `.ply`).
    pub reference: PathBuf,
    /// Add a column after fitting translation and scale.
    #[arg(long)]
    pub fit: bool,
    /// Add a column after fitting translation, scale and a back-layer scale.
    #[arg(long)]
    pub opt_back: bool,
    /// Row label.
    #[arg(long, default_value = "scan")]
    pub subject: String,
    /// Emit CSV instead of the text table.
    #[arg(long)]
    pub csv: bool,
    #[arg(long, value_enum, default_value_t = WeightingArg::Equal)]
    pub weighting: WeightingArg,
}
