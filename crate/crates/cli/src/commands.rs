use std::fs;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use depthscan_core::geometry::{delta_normals, Camera, Mask};
use depthscan_core::integrator::{integrate_depth, scale_aligned_rms, Anchor, IntegratorConfig};
use depthscan_core::io;
use depthscan_core::meshing::{
    fuse_scan, scale_to_height, triangulate_depth, vertical_extent, ScanPair, TriangleMesh,
};
use depthscan_core::metrics::{
    bidirectional_error_weighted, fit_similarity_with, ErrorTable, FitOptions, SimilarityFit,
    Weighting,
};
use depthscan_core::synth::{render_depth_gt, Placement, Shape, SyntheticScene};
use depthscan_core::Error;

use crate::args::*;

/// Failure classes mapped to process exit codes.
#[derive(Debug)]
pub enum Failure {
    /// Bad arguments or unreadable input (exit 2).
    Usage(String),
    /// The computation ran but did not converge or hit a numerical error
    /// (exit 1).
    Numerical(String),
}

impl Failure {
    pub fn exit_code(&self) -> i32 {
        match self {
            Failure::Usage(_) => 2,
            Failure::Numerical(_) => 1,
        }
    }

    pub fn message(&self) -> &str {
        match self {
            Failure::Usage(m) | Failure::Numerical(m) => m,
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Parse { .. }
            | Error::Io(_)
            | Error::InvalidArgument(_)
            | Error::DimensionMismatch { .. }
            | Error::NonFinite { .. }
            | Error::SceneBehindCamera(_)
            | Error::DepthOrdering { .. } => Failure::Usage(e.to_string()),
            _ => Failure::Numerical(e.to_string()),
        }
    }
}

type CmdResult = std::result::Result<(), Failure>;

fn context(path: &Path) -> impl Fn(Error) -> Failure + '_ {
    move |e| match Failure::from(e) {
        Failure::Usage(m) => Failure::Usage(format!("{}: {m}", path.display())),
        other => other,
    }
}

/// Files written by `synth`, relative to the output directory.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ManifestFiles {
    pub front_depth: String,
    pub back_depth: String,
    pub normals: String,
    pub mask: String,
    pub scan: String,
}

/// JSON description of a synthesized dataset.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Manifest {
    pub camera: Camera,
    pub scene: SyntheticScene,
    pub seed: u64,
    pub random_placement: bool,
    /// Vertical extent of the reference scan (m).
    pub height: f64,
    pub front_pixels: usize,
    pub back_pixels: usize,
    pub files: ManifestFiles,
}

fn load_manifest(path: &Path) -> Result<Manifest, Failure> {
    let text =
        fs::read_to_string(path).map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))
}

fn camera(args: &CameraArgs, dims: (usize, usize)) -> Result<Camera, Failure> {
    let cam = if let Some(path) = &args.manifest {
        load_manifest(path)?.camera
    } else if let Some(f) = args.focal {
        let (w, h) = dims;
        Camera::new(
            f,
            args.cx.unwrap_or(w as f64 / 2.0),
            args.cy.unwrap_or(h as f64 / 2.0),
            w,
            h,
        )?
    } else {
        return Err(Failure::Usage(
            "a camera is required: pass --manifest or --focal".into(),
        ));
    };
    if cam.dims() != dims {
        return Err(Failure::Usage(format!(
            "camera is {}x{} but the image is {}x{}",
            cam.width, cam.height, dims.0, dims.1
        )));
    }
    Ok(cam)
}

fn load_mask(path: Option<&Path>) -> Result<Option<Mask>, Failure> {
    path.map(|p| io::load_mask(p).map_err(context(p)))
        .transpose()
}

pub fn synth(a: &SynthArgs) -> CmdResult {
    let shape = match a.kind {
        ShapeKind::Plane => Shape::Plane,
        ShapeKind::SlantedPlane => Shape::SlantedPlane {
            slope_x: a.slope_x,
            slope_y: a.slope_y,
        },
        ShapeKind::SphereCap => Shape::SphereCap {
            radius: a.radius,
            half_angle_deg: a.half_angle,
        },
        ShapeKind::Ellipsoid => Shape::Ellipsoid {
            semi_axes: a.semi_axes,
        },
        ShapeKind::SinusoidRelief => Shape::SinusoidRelief {
            amplitude: a.amplitude,
            period: a.period,
        },
    };
    let placement = if a.random_placement {
        Placement::sample(&mut ChaCha8Rng::seed_from_u64(a.seed))
    } else {
        let mut p = Placement::at_distance(a.distance);
        if let Some(t) = a.translation {
            p.translation = t;
        }
        if let Some(r) = a.rotation {
            p.rotation_deg = r;
        }
        p
    };
    let scene = SyntheticScene::new(shape, placement)?;
    let cam = Camera::centered(a.image.focal, a.image.width, a.image.height)?;
    let gt = render_depth_gt(&scene, &cam)?;

    let files = ManifestFiles {
        front_depth: "front_depth.pfm".into(),
        back_depth: "back_depth.pfm".into(),
        normals: "normals.pfm".into(),
        mask: "mask.pgm".into(),
        scan: "scan.ply".into(),
    };
    let dir = &a.out_dir;
    fs::create_dir_all(dir).map_err(|e| Failure::Usage(format!("{}: {e}", dir.display())))?;
    io::save_depth(dir.join(&files.front_depth), &gt.front)?;
    io::save_depth(dir.join(&files.back_depth), &gt.back)?;
    io::save_normals(dir.join(&files.normals), &gt.normals)?;
    io::save_mask(dir.join(&files.mask), gt.front.mask())?;

    // Mesh what a reader of the files sees, so that `depth2mesh` on them
    // reproduces the reference scan and its height.
    let front = io::load_depth(dir.join(&files.front_depth), Some(gt.front.mask().clone()))?;
    let back = io::load_depth(dir.join(&files.back_depth), None)?;
    let scan = fuse_scan(&ScanPair::new(front, back, cam)?, a.discontinuity_ratio)?;
    io::save_mesh(dir.join(&files.scan), &scan)?;

    let manifest = Manifest {
        camera: cam,
        scene,
        seed: a.seed,
        random_placement: a.random_placement,
        height: vertical_extent(&scan).unwrap_or(0.0),
        front_pixels: gt.front.mask().count(),
        back_pixels: gt.back.mask().count(),
        files,
    };
    let json = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    fs::write(dir.join("manifest.json"), json + "\n")
        .map_err(|e| Failure::Usage(format!("{}: {e}", dir.display())))?;
    eprintln!(
        "synth: {} front / {} back pixels, height {:.4} m -> {}",
        manifest.front_pixels,
        manifest.back_pixels,
        manifest.height,
        dir.display()
    );
    Ok(())
}

pub fn depth2normals(a: &Depth2NormalsArgs) -> CmdResult {
    let mask = load_mask(a.mask.as_deref())?;
    let depth = io::load_depth(&a.depth, mask).map_err(context(&a.depth))?;
    let cam = camera(&a.camera, depth.dims())?;
    let normals = delta_normals(&depth, &cam)?;
    io::save_normals(&a.out, &normals)?;
    Ok(())
}

pub fn normals2depth(a: &Normals2DepthArgs) -> CmdResult {
    let mask = load_mask(a.mask.as_deref())?;
    let normals = io::load_normals(&a.normals, mask.clone()).map_err(context(&a.normals))?;
    let cam = camera(&a.camera, normals.dims())?;
    let mask = mask.unwrap_or_else(|| Mask::full(cam.width, cam.height));

    let mut cfg = IntegratorConfig::default();
    if let Some(v) = a.max_iters {
        cfg.max_iters = v;
    }
    if let Some(v) = a.step_size {
        cfg.step_size = v;
    }
    if let Some(v) = a.step_decay {
        cfg.step_decay = v;
    }
    if let Some(v) = a.rollback_slack {
        cfg.rollback_slack = v;
    }
    if let Some(v) = a.convergence_tol {
        cfg.convergence_tol = v;
    }
    if let Some(v) = a.init_depth {
        cfg.init_depth = v;
    }
    if let Some([u, v, depth]) = a.anchor {
        if !(u >= 0.0 && v >= 0.0 && u.fract() == 0.0 && v.fract() == 0.0) {
            return Err(Failure::Usage(format!(
                "anchor pixel must be integral, got {u},{v}"
            )));
        }
        cfg.anchor = Some(Anchor {
            pixel: (u as usize, v as usize),
            depth,
        });
    }

    let out = integrate_depth(&normals, &mask, &cam, &cfg)?;
    io::save_depth(&a.out, &out.depth)?;

    let iterations: usize = out.components.iter().map(|c| c.iterations).sum();
    let loss = out
        .components
        .iter()
        .map(|c| c.final_loss * c.pixels as f64)
        .sum::<f64>()
        / out.depth.mask().count() as f64;
    let converged = out.components.iter().all(|c| c.converged);
    let mut summary = format!(
        "components={} iterations={} loss={:.6e} converged={}",
        out.components.len(),
        iterations,
        loss,
        converged
    );
    if let Some(path) = &a.reference {
        let reference = io::load_depth(path, None).map_err(context(path))?;
        let (s, rms) = scale_aligned_rms(&out.depth, &reference, out.depth.mask())?;
        summary.push_str(&format!(
            " scale={s:.6} rms_after_scale={:.4}%",
            rms * 100.0
        ));
    }
    println!("{summary}");
    if !converged {
        return Err(Failure::Numerical(format!(
            "integration stopped at the iteration limit ({}) before converging",
            cfg.max_iters
        )));
    }
    Ok(())
}

pub fn depth2mesh(a: &Depth2MeshArgs) -> CmdResult {
    let mask = load_mask(a.mask.as_deref())?;
    let front = io::load_depth(&a.front, mask).map_err(context(&a.front))?;
    let cam = camera(&a.camera, front.dims())?;
    let mut mesh = match &a.back {
        Some(path) => {
            let back = io::load_depth(path, None).map_err(context(path))?;
            fuse_scan(&ScanPair::new(front, back, cam)?, a.discontinuity_ratio)?
        }
        None => triangulate_depth(&front, &cam, a.discontinuity_ratio)?,
    };
    if let Some(h) = a.target_height {
        let (scaled, factor) = scale_to_height(&mesh, h)?;
        eprintln!("depth2mesh: scaled by {factor:.6}");
        mesh = scaled;
    }
    io::save_mesh(&a.out, &mesh)?;
    eprintln!(
        "depth2mesh: {} vertices, {} triangles, height {:.4} m",
        mesh.vertices.len(),
        mesh.triangles.len(),
        vertical_extent(&mesh).unwrap_or(0.0)
    );
    Ok(())
}

fn fit_error(
    scan: &TriangleMesh,
    reference: &TriangleMesh,
    opt_back: bool,
    opts: &FitOptions,
    failures: &mut Vec<String>,
) -> Result<f64, Failure> {
    match fit_similarity_with(scan, reference, opt_back, &SimilarityFit::identity(), opts) {
        Ok(fit) => Ok(fit.final_error),
        Err(Error::NonConvergence { best }) => {
            failures.push(format!(
                "alignment{} did not converge; reporting best error {:.4} mm",
                if opt_back { " with back scale" } else { "" },
                best.final_error
            ));
            Ok(best.final_error)
        }
        Err(e) => Err(e.into()),
    }
}

pub fn eval(a: &EvalArgs) -> CmdResult {
    let scan = io::load_mesh(&a.scan).map_err(context(&a.scan))?;
    let reference = io::load_mesh(&a.reference).map_err(context(&a.reference))?;
    let weighting = match a.weighting {
        WeightingArg::Equal => Weighting::EqualDirections,
        WeightingArg::VertexCount => Weighting::VertexCount,
    };
    let opts = FitOptions {
        weighting,
        ..FitOptions::default()
    };

    let mut variants = vec!["Error (mm)"];
    let mut values = vec![Some(bidirectional_error_weighted(
        &scan, &reference, weighting,
    )?)];
    let mut failures = Vec::new();
    if a.fit {
        variants.push("Error (mm) (fit)");
        values.push(Some(fit_error(
            &scan,
            &reference,
            false,
            &opts,
            &mut failures,
        )?));
    }
    if a.opt_back {
        variants.push("Error (mm) (opt back)");
        values.push(Some(fit_error(
            &scan,
            &reference,
            true,
            &opts,
            &mut failures,
        )?));
    }
    let mut table = ErrorTable::new(variants);
    table.push(a.subject.clone(), values);
    print!(
        "{}",
        if a.csv {
            table.render_csv()
        } else {
            table.render_text()
        }
    );
    if failures.is_empty() {
        Ok(())
    } else {
        Err(Failure::Numerical(failures.join("; ")))
    }
}
