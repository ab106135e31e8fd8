mod common;

use std::fs;

use common::*;
use depthscan_core::io::{load_mask, load_mesh};
use depthscan_core::meshing::vertical_extent;

#[test]
fn synth_is_byte_identical_for_a_fixed_seed() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for out in [&a, &b] {
        ok(run(CAP_SYNTH.iter().copied().chain([
            "--random-placement",
            "--out-dir",
            p(out),
        ])));
    }
    let names = [
        "front_depth.pfm",
        "back_depth.pfm",
        "normals.pfm",
        "mask.pgm",
        "scan.ply",
        "manifest.json",
    ];
    for name in names {
        let x = fs::read(a.join(name)).unwrap();
        let y = fs::read(b.join(name)).unwrap();
        assert!(x == y, "{name} differs");
    }
}

#[test]
fn different_seeds_place_the_subject_differently() {
    let dir = tempfile::tempdir().unwrap();
    let mut manifests = Vec::new();
    for seed in ["1", "2"] {
        let out = dir.path().join(seed);
        ok(run([
            "synth",
            "--kind",
            "ellipsoid",
            "--random-placement",
            "--seed",
            seed,
            "--width",
            "32",
            "--height",
            "32",
            "--focal",
            "40",
            "--out-dir",
            p(&out),
        ]));
        manifests.push(fs::read_to_string(out.join("manifest.json")).unwrap());
    }
    assert_ne!(manifests[0], manifests[1]);
}

#[test]
fn plane_mask_is_full() {
    let dir = tempfile::tempdir().unwrap();
    ok(run([
        "synth",
        "--kind",
        "plane",
        "--width",
        "72",
        "--height",
        "96",
        "--out-dir",
        p(dir.path()),
    ]));
    let mask = load_mask(dir.path().join("mask.pgm")).unwrap();
    assert_eq!(mask.count(), 72 * 96);
}

#[test]
fn manifest_height_matches_the_fused_mesh() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(run([
        "synth",
        "--kind",
        "ellipsoid",
        "--width",
        "96",
        "--height",
        "128",
        "--focal",
        "200",
        "--out-dir",
        p(d),
    ]));
    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(d.join("manifest.json")).unwrap()).unwrap();
    let manifest_path = d.join("manifest.json");
    let mesh_path = d.join("mesh.obj");
    ok(run([
        "depth2mesh",
        "--front",
        p(&d.join("front_depth.pfm")),
        "--back",
        p(&d.join("back_depth.pfm")),
        "--mask",
        p(&d.join("mask.pgm")),
        "--manifest",
        p(&manifest_path),
        "--out",
        p(&mesh_path),
    ]));
    let mesh = load_mesh(&mesh_path).unwrap();
    let h = vertical_extent(&mesh).unwrap();
    let expected = manifest["height"].as_f64().unwrap();
    // OBJ stores shortest round-trip decimals, so the extent is exact.
    assert_eq!(h, expected);
    // Default semi-axes put the vertical extent just under 0.8 m.
    assert!(h > 0.75 && h <= 0.8, "{h}");
}

#[test]
fn normals_round_trip_reports_small_rms() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(run([
        "synth",
        "--kind",
        "sphere-cap",
        "--width",
        "64",
        "--height",
        "64",
        "--focal",
        "160",
        "--out-dir",
        p(d),
    ]));
    let manifest = d.join("manifest.json");
    let normals = d.join("n.pfm");
    ok(run([
        "depth2normals",
        "--depth",
        p(&d.join("front_depth.pfm")),
        "--mask",
        p(&d.join("mask.pgm")),
        "--manifest",
        p(&manifest),
        "--out",
        p(&normals),
    ]));
    let out = ok(run([
        "normals2depth",
        "--normals",
        p(&normals),
        "--mask",
        p(&d.join("mask.pgm")),
        "--manifest",
        p(&manifest),
        "--anchor",
        "32,32,1.7",
        "--reference",
        p(&d.join("front_depth.pfm")),
        "--out",
        p(&d.join("z.pfm")),
    ]));
    let line = stdout(&out);
    let rms: f64 = line
        .split_whitespace()
        .find_map(|w| w.strip_prefix("rms_after_scale="))
        .and_then(|v| v.strip_suffix('%'))
        .expect("summary has rms")
        .parse()
        .unwrap();
    assert!(rms < 1.0, "{line}");
    assert!(line.contains("converged=true"), "{line}");
}

#[test]
fn non_convergence_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(run([
        "synth",
        "--kind",
        "sphere-cap",
        "--width",
        "32",
        "--height",
        "32",
        "--focal",
        "80",
        "--out-dir",
        p(d),
    ]));
    let out = run([
        "normals2depth",
        "--normals",
        p(&d.join("normals.pfm")),
        "--mask",
        p(&d.join("mask.pgm")),
        "--manifest",
        p(&d.join("manifest.json")),
        "--max-iters",
        "3",
        "--out",
        p(&d.join("z.pfm")),
    ]);
    assert_eq!(out.status.code(), Some(1), "{}", stderr(&out));
    assert!(stdout(&out).contains("converged=false"));
    assert!(stderr(&out).starts_with("error:"));
    assert!(d.join("z.pfm").exists());
}

#[test]
fn eval_of_a_mesh_against_itself_is_zero() {
    let dir = tempfile::tempdir().unwrap();
    ok(run(CAP_SYNTH
        .iter()
        .copied()
        .chain(["--out-dir", p(dir.path())])));
    let scan = dir.path().join("scan.ply");
    let out = ok(run(["eval", p(&scan), p(&scan)]));
    let text = stdout(&out);
    let row = text.lines().nth(3).unwrap();
    assert!(
        row.starts_with("scan") && row.trim_end().ends_with("0.00"),
        "{text}"
    );
}

#[test]
fn eval_of_planes_five_millimeters_apart() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = write_plane_pair(dir.path(), 0.005);
    let out = ok(run(["eval", "--csv", p(&a), p(&b)]));
    let text = stdout(&out);
    let value: f64 = text
        .lines()
        .nth(1)
        .unwrap()
        .split(',')
        .nth(1)
        .unwrap()
        .parse()
        .unwrap();
    assert!((value - 5.0).abs() <= 0.05, "{text}");
}

#[test]
fn unknown_flags_are_usage_errors() {
    let out = run(["eval", "--no-such-flag", "a.ply", "b.ply"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(out.stdout.is_empty());
    let out = run(["synth", "--kind", "torus"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn missing_inputs_are_usage_errors() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("missing.ply");
    let out = run(["eval", p(&missing), p(&missing)]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("missing.ply"));
}

#[test]
fn scene_behind_the_camera_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = run([
        "synth",
        "--kind",
        "plane",
        "--distance",
        "-1",
        "--width",
        "8",
        "--height",
        "8",
        "--out-dir",
        p(dir.path()),
    ]);
    assert_eq!(out.status.code(), Some(2), "{}", stderr(&out));
}

#[test]
fn help_lists_every_flag() {
    let expected: [(&str, &[&str]); 5] = [
        (
            "synth",
            &[
                "--kind",
                "--out-dir",
                "--seed",
                "--radius",
                "--half-angle",
                "--semi-axes",
                "--slope-x",
                "--slope-y",
                "--amplitude",
                "--period",
                "--distance",
                "--translation",
                "--rotation",
                "--random-placement",
                "--width",
                "--height",
                "--focal",
                "--discontinuity-ratio",
            ],
        ),
        (
            "depth2normals",
            &[
                "--depth",
                "--mask",
                "--manifest",
                "--focal",
                "--cx",
                "--cy",
                "--out",
            ],
        ),
        (
            "normals2depth",
            &[
                "--normals",
                "--mask",
                "--manifest",
                "--focal",
                "--out",
                "--anchor",
                "--reference",
                "--max-iters",
                "--step-size",
                "--step-decay",
                "--rollback-slack",
                "--convergence-tol",
                "--init-depth",
            ],
        ),
        (
            "depth2mesh",
            &[
                "--front",
                "--back",
                "--mask",
                "--manifest",
                "--focal",
                "--out",
                "--discontinuity-ratio",
                "--target-height",
            ],
        ),
        (
            "eval",
            &["--fit", "--opt-back", "--subject", "--csv", "--weighting"],
        ),
    ];
    for (cmd, flags) in expected {
        let out = ok(run([cmd, "--help"]));
        let text = stdout(&out);
        for f in flags {
            assert!(text.contains(f), "{cmd} --help lacks {f}");
        }
    }
}
