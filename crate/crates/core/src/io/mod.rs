//! On-disk formats.
//!
//! | data    | format                                   |
//! |---------|------------------------------------------|
//! | depth   | PFM, 1 channel, positive meters along +z |
//! | normals | PFM, 3 channels, camera frame            |
//! | masks   | PGM (P5), 0 invalid / 255 valid          |
//! | meshes  | ASCII OBJ or binary little-endian PLY    |
//!
//! Depth and normals are stored as 32-bit floats; values that are exactly
//! representable in `f32` survive a round trip bit for bit.

mod mesh;
mod pnm;

use std::fs;
use std::io::BufWriter;
use std::path::Path;

use nalgebra::Vector3;

pub use mesh::{read_obj, read_ply, write_obj, write_ply};
pub use pnm::{read_pfm, read_pgm, write_pfm, write_pgm, PfmImage, PgmImage};

use crate::error::{check_dims, Error, Result};
use crate::geometry::{DepthMap, Mask, NormalMap};
use crate::meshing::TriangleMesh;

const DEPTH_COMMENT: &str =
    "depth: positive meters along the optical axis (+z), camera looks along +z";
const NORMALS_COMMENT: &str = "normals: unit vectors, camera frame (x right, y down, +z forward)";
const MASK_COMMENT: &str = "mask: 255 valid, 0 invalid";

pub fn write_depth(out: &mut impl std::io::Write, depth: &DepthMap) -> Result<()> {
    let (w, h) = depth.dims();
    let mut data = Vec::with_capacity(w * h);
    for (i, (&z, &m)) in depth
        .values()
        .iter()
        .zip(depth.mask().as_slice())
        .enumerate()
    {
        if m && !z.is_finite() {
            return Err(Error::NonFinite { index: i });
        }
        data.push(if z.is_finite() { z as f32 } else { 0.0 });
    }
    write_pfm(
        out,
        &PfmImage {
            width: w,
            height: h,
            channels: 1,
            data,
        },
        Some(DEPTH_COMMENT),
    )
}

/// Parse a depth PFM. Without an explicit mask, pixels with positive depth
/// are valid.
pub fn read_depth(bytes: &[u8], mask: Option<Mask>) -> Result<DepthMap> {
    let img = read_pfm(bytes)?;
    if img.channels != 1 {
        return Err(Error::InvalidArgument(format!(
            "depth map must have 1 channel, found {}",
            img.channels
        )));
    }
    if let Some(index) = img.data.iter().position(|x| !x.is_finite()) {
        return Err(Error::NonFinite { index });
    }
    let values: Vec<f64> = img.data.iter().map(|&x| x as f64).collect();
    let mask = match mask {
        Some(m) => {
            check_dims((img.width, img.height), m.dims())?;
            m
        }
        None => Mask::new(
            img.width,
            img.height,
            values.iter().map(|&z| z > 0.0).collect(),
        )?,
    };
    DepthMap::new(values, mask)
}

pub fn write_normals(out: &mut impl std::io::Write, normals: &NormalMap) -> Result<()> {
    let (w, h) = normals.dims();
    let data = normals
        .values()
        .iter()
        .flat_map(|n| [n.x as f32, n.y as f32, n.z as f32])
        .collect();
    write_pfm(
        out,
        &PfmImage {
            width: w,
            height: h,
            channels: 3,
            data,
        },
        Some(NORMALS_COMMENT),
    )
}

/// Parse a 3-channel normals PFM. Without an explicit mask every pixel is
/// valid. Normals are renormalized in `f64` after widening from `f32`.
pub fn read_normals(bytes: &[u8], mask: Option<Mask>) -> Result<NormalMap> {
    let img = read_pfm(bytes)?;
    if img.channels != 3 {
        return Err(Error::InvalidArgument(format!(
            "normal map must have 3 channels, found {}",
            img.channels
        )));
    }
    let mask = match mask {
        Some(m) => {
            check_dims((img.width, img.height), m.dims())?;
            m
        }
        None => Mask::full(img.width, img.height),
    };
    let values = img
        .data
        .chunks_exact(3)
        .map(|c| {
            let n = Vector3::new(c[0] as f64, c[1] as f64, c[2] as f64);
            let len = n.norm();
            if len > 0.0 {
                n / len
            } else {
                n
            }
        })
        .collect();
    NormalMap::new(values, mask)
}

pub fn write_mask(out: &mut impl std::io::Write, mask: &Mask) -> Result<()> {
    let (w, h) = mask.dims();
    write_pgm(
        out,
        &PgmImage {
            width: w,
            height: h,
            maxval: 255,
            data: mask
                .as_slice()
                .iter()
                .map(|&b| if b { 255 } else { 0 })
                .collect(),
        },
        Some(MASK_COMMENT),
    )
}

/// Samples above half of `maxval` are valid.
pub fn read_mask(bytes: &[u8]) -> Result<Mask> {
    let img = read_pgm(bytes)?;
    let half = img.maxval / 2;
    Mask::new(
        img.width,
        img.height,
        img.data.iter().map(|&b| b as u16 > half).collect(),
    )
}

fn save(path: &Path, f: impl FnOnce(&mut BufWriter<fs::File>) -> Result<()>) -> Result<()> {
    let mut w = BufWriter::new(fs::File::create(path)?);
    f(&mut w)?;
    std::io::Write::flush(&mut w)?;
    Ok(())
}

pub fn save_depth(path: impl AsRef<Path>, depth: &DepthMap) -> Result<()> {
    save(path.as_ref(), |w| write_depth(w, depth))
}

pub fn load_depth(path: impl AsRef<Path>, mask: Option<Mask>) -> Result<DepthMap> {
    read_depth(&fs::read(path)?, mask)
}

pub fn save_normals(path: impl AsRef<Path>, normals: &NormalMap) -> Result<()> {
    save(path.as_ref(), |w| write_normals(w, normals))
}

pub fn load_normals(path: impl AsRef<Path>, mask: Option<Mask>) -> Result<NormalMap> {
    read_normals(&fs::read(path)?, mask)
}

pub fn save_mask(path: impl AsRef<Path>, mask: &Mask) -> Result<()> {
    save(path.as_ref(), |w| write_mask(w, mask))
}

pub fn load_mask(path: impl AsRef<Path>) -> Result<Mask> {
    read_mask(&fs::read(path)?)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MeshFormat {
    Obj,
    Ply,
}

impl MeshFormat {
    pub fn from_path(path: &Path) -> Result<Self> {
        match path
            .extension()
            .and_then(|e| e.to_str())
            .map(str::to_ascii_lowercase)
            .as_deref()
        {
            Some("obj") => Ok(MeshFormat::Obj),
            Some("ply") => Ok(MeshFormat::Ply),
            _ => Err(Error::InvalidArgument(format!(
                "cannot infer mesh format from {}",
                path.display()
            ))),
        }
    }
}

/// Format chosen by extension (`.obj` or `.ply`).
pub fn save_mesh(path: impl AsRef<Path>, mesh: &TriangleMesh) -> Result<()> {
    let path = path.as_ref();
    match MeshFormat::from_path(path)? {
        MeshFormat::Obj => save(path, |w| write_obj(w, mesh)),
        MeshFormat::Ply => save(path, |w| write_ply(w, mesh)),
    }
}

pub fn load_mesh(path: impl AsRef<Path>) -> Result<TriangleMesh> {
    let path = path.as_ref();
    let format = MeshFormat::from_path(path)?;
    let bytes = fs::read(path)?;
    match format {
        MeshFormat::Obj => read_obj(&bytes),
        MeshFormat::Ply => read_ply(&bytes),
    }
}
