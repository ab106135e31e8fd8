#![allow(dead_code)]

use std::path::Path;
use std::process::{Command, Output};

use depthscan_core::io::save_mesh;
use depthscan_core::meshing::TriangleMesh;
use nalgebra::Vector3;

pub fn run<I, S>(args: I) -> Output
where
    I: IntoIterator<Item = S>,
    S: AsRef<std::ffi::OsStr>,
{
    Command::new(env!("CARGO_BIN_EXE_depthscan"))
        .args(args)
        .output()
        .expect("binary runs")
}

pub fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

pub fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

/// Panics with the captured streams unless the command exited 0.
pub fn ok(o: Output) -> Output {
    assert!(
        o.status.success(),
        "exit {:?}\nstdout:\n{}\nstderr:\n{}",
        o.status.code(),
        stdout(&o),
        stderr(&o)
    );
    o
}

pub fn p(path: &Path) -> &str {
    path.to_str().expect("utf-8 path")
}

/// Square `n × n` grid of side `size` at depth `z`, two triangles per cell.
pub fn grid_plane(n: usize, size: f64, z: f64) -> TriangleMesh {
    let step = size / (n - 1) as f64;
    let mut v = Vec::with_capacity(n * n);
    for j in 0..n {
        for i in 0..n {
            v.push(Vector3::new(i as f64 * step, j as f64 * step, z));
        }
    }
    let mut t = Vec::with_capacity(2 * (n - 1) * (n - 1));
    for j in 0..n - 1 {
        for i in 0..n - 1 {
            let a = (j * n + i) as u32;
            let b = a + 1;
            let c = a + n as u32;
            t.push([a, c, b]);
            t.push([b, c, c + 1]);
        }
    }
    TriangleMesh::from_front(v, t).expect("valid grid")
}

/// Two 1 m square 100×100 grids `gap` meters apart, written as PLY.
pub fn write_plane_pair(dir: &Path, gap: f64) -> (std::path::PathBuf, std::path::PathBuf) {
    let a = dir.join("plane_a.ply");
    let b = dir.join("plane_b.ply");
    save_mesh(&a, &grid_plane(100, 1.0, 2.0)).unwrap();
    save_mesh(&b, &grid_plane(100, 1.0, 2.0 + gap)).unwrap();
    (a, b)
}

/// The small sphere-cap scene used by the end-to-end checks.
pub const CAP_SYNTH: [&str; 11] = [
    "synth",
    "--kind",
    "sphere-cap",
    "--seed",
    "7",
    "--width",
    "128",
    "--height",
    "128",
    "--focal",
    "320",
];
