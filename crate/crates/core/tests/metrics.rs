use depthscan_core::geometry::{Camera, DepthMap};
use depthscan_core::meshing::{fuse_scan, triangulate_depth, ScanPair, Source, TriangleMesh};
use depthscan_core::metrics::*;
use depthscan_core::synth::{render_depth_gt, Placement, Shape, SyntheticScene};
use nalgebra::{Matrix2, Rotation3, Vector2, Vector3};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Distance from `p` to segment `ab`.
fn segment_distance(p: &Vector3<f64>, a: &Vector3<f64>, b: &Vector3<f64>) -> f64 {
    let d = b - a;
    let t = ((p - a).dot(&d) / d.norm_squared()).clamp(0.0, 1.0);
    (p - (a + d * t)).norm()
}

/// Reference point-triangle distance: the plane projection when it falls
/// inside, otherwise the nearest edge.
fn triangle_distance(p: &Vector3<f64>, [a, b, c]: [Vector3<f64>; 3]) -> f64 {
    let (e1, e2) = (b - a, c - a);
    let g = Matrix2::new(e1.dot(&e1), e1.dot(&e2), e1.dot(&e2), e2.dot(&e2));
    let rhs = Vector2::new(e1.dot(&(p - a)), e2.dot(&(p - a)));
    if let Some(st) = g.lu().solve(&rhs) {
        if st.x >= 0.0 && st.y >= 0.0 && st.x + st.y <= 1.0 {
            return (p - (a + e1 * st.x + e2 * st.y)).norm();
        }
    }
    segment_distance(p, &a, &b)
        .min(segment_distance(p, &b, &c))
        .min(segment_distance(p, &c, &a))
}

fn brute_force(mesh: &TriangleMesh, p: &Vector3<f64>) -> f64 {
    (0..mesh.triangles.len())
        .map(|t| triangle_distance(p, mesh.corners(t)))
        .fold(f64::INFINITY, f64::min)
}

fn ellipsoid_scan(n: usize) -> TriangleMesh {
    let cam = Camera::centered(2.5 * n as f64, n, n).unwrap();
    let scene = SyntheticScene::new(
        Shape::Ellipsoid {
            semi_axes: [0.25, 0.35, 0.2],
        },
        Placement::default(),
    )
    .unwrap();
    let gt = render_depth_gt(&scene, &cam).unwrap();
    fuse_scan(&ScanPair::new(gt.front, gt.back, cam).unwrap(), 0.03).unwrap()
}

fn random_soup(rng: &mut impl Rng, n: usize) -> TriangleMesh {
    let mut v = Vec::new();
    let mut t = Vec::new();
    for k in 0..n {
        let o = Vector3::new(
            rng.gen_range(-1.0..1.0),
            rng.gen_range(-1.0..1.0),
            rng.gen_range(-1.0..1.0),
        );
        for _ in 0..3 {
            v.push(
                o + Vector3::new(
                    rng.gen_range(-0.2..0.2),
                    rng.gen_range(-0.2..0.2),
                    rng.gen_range(-0.2..0.2),
                ),
            );
        }
        let i = 3 * k as u32;
        t.push([i, i + 1, i + 2]);
    }
    TriangleMesh::from_front(v, t).unwrap()
}

#[test]
fn tree_matches_brute_force() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for mesh in [ellipsoid_scan(24), random_soup(&mut rng, 500)] {
        let tree = AabbTree::build(&mesh).unwrap();
        assert!(tree.validate());
        for _ in 0..500 {
            let p = Vector3::new(
                rng.gen_range(-1.2..1.2),
                rng.gen_range(-1.2..1.2),
                rng.gen_range(0.5..3.0),
            );
            let q = Vector3::new(p.x * 0.5, p.y * 0.5, p.z);
            for p in [p, q] {
                let hit = point_to_mesh_distance(&p, &mesh, &tree).unwrap();
                let truth = brute_force(&mesh, &p);
                assert!(
                    (hit.distance - truth).abs() < 1e-9,
                    "{} vs {truth}",
                    hit.distance
                );
                let [a, b, c] = mesh.corners(hit.triangle);
                let [wa, wb, wc] = hit.barycentric;
                assert!((a * wa + b * wb + c * wc - hit.point).norm() < 1e-9);
            }
        }
    }
}

fn grid_plane(n: usize, size: f64, z: f64) -> TriangleMesh {
    let step = size / (n - 1) as f64;
    let mut v = Vec::new();
    for j in 0..n {
        for i in 0..n {
            v.push(Vector3::new(i as f64 * step, j as f64 * step, z));
        }
    }
    let mut t = Vec::new();
    for j in 0..n - 1 {
        for i in 0..n - 1 {
            let a = (j * n + i) as u32;
            let b = a + 1;
            let c = a + n as u32;
            t.push([a, c, b]);
            t.push([b, c, c + 1]);
        }
    }
    TriangleMesh::from_front(v, t).unwrap()
}

#[test]
fn parallel_planes_five_millimeters_apart() {
    let a = grid_plane(100, 1.0, 2.0);
    let b = grid_plane(100, 1.0, 2.005);
    let e = bidirectional_error(&a, &b).unwrap();
    assert!((e - 5.0).abs() < 0.05, "{e}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn error_is_symmetric_and_zero_on_identity(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = random_soup(&mut rng, 20);
        let b = a.map_vertices(|_, v| v + Vector3::new(rng.gen_range(-0.01..0.01), rng.gen_range(-0.01..0.01), rng.gen_range(-0.01..0.01)));
        prop_assert_eq!(bidirectional_error(&a, &a).unwrap(), 0.0);
        prop_assert_eq!(bidirectional_error(&a, &b).unwrap(), bidirectional_error(&b, &a).unwrap());
        for w in [Weighting::EqualDirections, Weighting::VertexCount] {
            prop_assert_eq!(
                bidirectional_error_weighted(&a, &b, w).unwrap(),
                bidirectional_error_weighted(&b, &a, w).unwrap()
            );
            prop_assert!(bidirectional_error_weighted(&a, &b, w).unwrap() >= 0.0);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn error_is_invariant_under_rigid_motion(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = random_soup(&mut rng, 40);
        let b = random_soup(&mut rng, 40);
        let r = Rotation3::new(Vector3::new(rng.gen_range(-3.0..3.0), rng.gen_range(-3.0..3.0), rng.gen_range(-3.0..3.0)));
        let t = Vector3::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
        let before = bidirectional_error(&a, &b).unwrap();
        let after = bidirectional_error(
            &a.map_vertices(|_, v| r * v + t),
            &b.map_vertices(|_, v| r * v + t),
        ).unwrap();
        // Millimeters on meter-scale meshes: 1e-9 m is 1e-6 mm.
        prop_assert!((before - after).abs() < 1e-6, "{before} vs {after}");
    }
}

fn injected(t: [f64; 3], s: f64, b: Option<f64>) -> SimilarityFit {
    SimilarityFit {
        translation: Vector3::from(t),
        scale: s,
        back_scale: b,
        ..SimilarityFit::identity()
    }
}

#[test]
fn fit_recovers_translation_and_scale() {
    let scan = ellipsoid_scan(48);
    let truth = injected([0.03, -0.02, 0.04], 1.04, None);
    let reference = truth.apply(&scan).unwrap();
    let fit = fit_similarity(&scan, &reference, false, &SimilarityFit::identity()).unwrap();
    assert!(
        (fit.translation - truth.translation).amax() < 1e-3,
        "{fit:?}"
    );
    assert!((fit.scale - truth.scale).abs() < 1e-3, "{fit:?}");
    assert!(fit.final_error < 0.1);
}

#[test]
fn fit_recovers_back_scale() {
    let scan = ellipsoid_scan(48);
    assert!(scan.count_source(Source::Back) > 0);
    let truth = injected([0.01, 0.02, -0.02], 0.97, Some(1.05));
    let reference = truth.apply(&scan).unwrap();
    let fit = fit_similarity(&scan, &reference, true, &SimilarityFit::identity()).unwrap();
    assert!(
        (fit.translation - truth.translation).amax() < 1e-3,
        "{fit:?}"
    );
    assert!((fit.scale - truth.scale).abs() < 1e-3, "{fit:?}");
    assert!((fit.back_scale.unwrap() - 1.05).abs() < 1e-2, "{fit:?}");
}

#[test]
fn fit_never_worsens_the_initial_error() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let scan = ellipsoid_scan(32);
    for _ in 0..6 {
        let truth = injected(
            [
                rng.gen_range(-0.05..0.05),
                rng.gen_range(-0.05..0.05),
                rng.gen_range(-0.05..0.05),
            ],
            rng.gen_range(0.9..1.1),
            Some(rng.gen_range(0.95..1.05)),
        );
        // Perturb the target so an exact fit does not exist.
        let reference = truth
            .apply(&scan)
            .unwrap()
            .map_vertices(|i, v| v + Vector3::new(0.0, 0.0, 0.002 * ((i % 7) as f64 - 3.0)));
        let before = bidirectional_error(&scan, &reference).unwrap();
        for opt_back in [false, true] {
            let fit = match fit_similarity(&scan, &reference, opt_back, &SimilarityFit::identity())
            {
                Ok(f) => f,
                Err(depthscan_core::Error::NonConvergence { best }) => best,
                Err(e) => panic!("{e}"),
            };
            assert!(fit.final_error <= before, "{} > {before}", fit.final_error);
            let check = bidirectional_error(&fit.apply(&scan).unwrap(), &reference).unwrap();
            assert!((check - fit.final_error).abs() < 1e-9);
        }
    }
}

#[test]
fn back_scale_needs_both_layers() {
    let cam = Camera::centered(20.0, 8, 8).unwrap();
    let front = triangulate_depth(&DepthMap::constant(8, 8, 2.0).unwrap(), &cam, 0.03).unwrap();
    assert!(fit_similarity(&front, &front, true, &SimilarityFit::identity()).is_err());
}

#[test]
fn report_layout() {
    let mut t = ErrorTable::new(["Error (mm)", "Error (mm) (opt back)"]);
    t.push("50002", vec![Some(9.456), None]);
    t.push("50004", vec![Some(3.0), Some(2.994)]);
    let text = t.render_text();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], DEFAULT_CAPTION);
    assert!(lines[1].starts_with("Subject ID | Error (mm) | Error (mm) (opt back)"));
    assert!(lines[2].chars().all(|c| c == '-' || c == '+'));
    assert!(
        lines[3].starts_with("50002")
            && lines[3].contains("9.46")
            && lines[3].trim_end().ends_with('-')
    );
    assert!(lines[4].ends_with("2.99"));
    assert_eq!(t.render_csv().lines().nth(1).unwrap(), "50002,9.46,");
}

#[test]
fn fit_recovers_a_pure_translation() {
    let scan = ellipsoid_scan(48);
    let reference = scan.map_vertices(|_, v| v + Vector3::new(0.1, 0.0, 0.0));
    let fit = fit_similarity(&scan, &reference, false, &SimilarityFit::identity()).unwrap();
    assert!(
        (fit.translation - Vector3::new(0.1, 0.0, 0.0)).amax() < 1e-3,
        "{fit:?}"
    );
    assert!(fit.final_error < 0.1, "{fit:?}");
}

#[test]
fn fit_recovers_a_centroid_scale() {
    let scan = ellipsoid_scan(48);
    let c = scan.centroid().unwrap();
    let reference = scan.map_vertices(|_, v| c + (v - c) * 1.1);
    let fit = fit_similarity(&scan, &reference, false, &SimilarityFit::identity()).unwrap();
    assert!((fit.scale - 1.1).abs() < 1e-3, "{fit:?}");
}

#[test]
fn fit_undoes_a_shrunken_back_layer() {
    let reference = ellipsoid_scan(48);
    let shrunk = SimilarityFit {
        back_scale: Some(0.9),
        ..SimilarityFit::identity()
    };
    let scan = shrunk.apply(&reference).unwrap();
    let fit = fit_similarity(&scan, &reference, true, &SimilarityFit::identity()).unwrap();
    assert!(
        (fit.back_scale.unwrap() - 1.0 / 0.9).abs() < 1e-2,
        "{fit:?}"
    );
}
