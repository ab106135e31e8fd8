use depthscan_core::geometry::{delta_normals, Camera, DepthMap, Mask, NormalMap};
use depthscan_core::integrator::*;
use depthscan_core::losses::l1_normals_value;
use depthscan_core::synth::{
    render_depth_gt, render_ortho_relief, Placement, Relief, Shape, SyntheticScene,
};
use depthscan_core::Error;
use nalgebra::Vector3;

fn cap_scene() -> (Camera, DepthMap) {
    let cam = Camera::centered(160.0, 64, 64).unwrap();
    let scene = SyntheticScene::new(
        Shape::SphereCap {
            radius: 0.3,
            half_angle_deg: 60.0,
        },
        Placement::default(),
    )
    .unwrap();
    (cam, render_depth_gt(&scene, &cam).unwrap().front)
}

#[test]
fn generator_depth_has_zero_loss_on_its_normals() {
    let (cam, d) = cap_scene();
    let target = delta_normals(&d, &cam).unwrap();
    assert_eq!(l1_normals_value(&d, &target, &cam).unwrap(), 0.0);
}

#[test]
fn sphere_cap_is_recovered_up_to_scale() {
    let (cam, d) = cap_scene();
    let target = delta_normals(&d, &cam).unwrap();
    let out = integrate_depth(&target, d.mask(), &cam, &IntegratorConfig::default()).unwrap();
    let (_, rms) = scale_aligned_rms(&out.depth, &d, d.mask()).unwrap();
    assert!(rms < 0.01, "rms {rms}");
    assert_eq!(out.components.len(), 1);
}

#[test]
fn anchored_pixel_keeps_its_depth_and_loss_is_scale_invariant() {
    let (cam, d) = cap_scene();
    let target = delta_normals(&d, &cam).unwrap();
    let cfg = IntegratorConfig {
        anchor: Some(Anchor {
            pixel: (32, 32),
            depth: 1.7,
        }),
        max_iters: 300,
        ..Default::default()
    };
    let out = integrate_depth(&target, d.mask(), &cam, &cfg).unwrap();
    assert_eq!(out.depth.get(32, 32), 1.7);
    let base = l1_normals_value(&out.depth, &target, &cam).unwrap();
    for s in [0.3, 2.0, 7.5] {
        let scaled = l1_normals_value(&out.depth.scaled(s).unwrap(), &target, &cam).unwrap();
        assert!((scaled - base).abs() < 1e-12 * (1.0 + base), "{s}");
    }
}

#[test]
fn best_loss_never_increases() {
    let (cam, d) = cap_scene();
    let target = delta_normals(&d, &cam).unwrap();
    let cfg = IntegratorConfig {
        max_iters: 500,
        step_size: 1.0,
        ..Default::default()
    };
    let out = integrate_depth(&target, d.mask(), &cam, &cfg).unwrap();
    let hist = &out.components[0].loss_history;
    assert_eq!(hist.len(), out.components[0].iterations + 1);
    assert!(hist.windows(2).all(|w| w[1] <= w[0]));
    assert_eq!(*hist.last().unwrap(), out.components[0].final_loss);
    // The returned depth is the best iterate.
    let final_loss = l1_normals_value(&out.depth, &target, &cam).unwrap();
    assert!((final_loss - out.components[0].final_loss).abs() < 1e-9);
}

#[test]
fn integration_is_deterministic() {
    let (cam, d) = cap_scene();
    let target = delta_normals(&d, &cam).unwrap();
    let cfg = IntegratorConfig {
        max_iters: 200,
        ..Default::default()
    };
    let a = integrate_depth(&target, d.mask(), &cam, &cfg).unwrap();
    let b = integrate_depth(&target, d.mask(), &cam, &cfg).unwrap();
    let bits = |x: &DepthMap| x.values().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
    assert_eq!(bits(&a.depth), bits(&b.depth));
}

#[test]
fn fronto_parallel_target_keeps_constant_depth() {
    let cam = Camera::centered(64.0, 32, 32).unwrap();
    let target =
        NormalMap::new(vec![Vector3::new(0.0, 0.0, -1.0); 1024], Mask::full(32, 32)).unwrap();
    let cfg = IntegratorConfig {
        anchor: Some(Anchor {
            pixel: (16, 16),
            depth: 2.0,
        }),
        ..Default::default()
    };
    let out = integrate_depth(&target, &Mask::full(32, 32), &cam, &cfg).unwrap();
    assert!(out.depth.values().iter().all(|z| (z - 2.0).abs() < 1e-4));
}

#[test]
fn sinusoid_relief_is_recovered_up_to_scale() {
    let cam = Camera::centered(160.0, 64, 64).unwrap();
    let scene = SyntheticScene::new(
        Shape::SinusoidRelief {
            amplitude: 0.02,
            period: 0.3,
        },
        Placement::default(),
    )
    .unwrap();
    let d = render_depth_gt(&scene, &cam).unwrap().front;
    let target = delta_normals(&d, &cam).unwrap();
    let out = integrate_depth(&target, d.mask(), &cam, &IntegratorConfig::default()).unwrap();
    let (_, rms) = scale_aligned_rms(&out.depth, &d, d.mask()).unwrap();
    assert!(rms < 0.01, "rms {rms}");
}

#[test]
fn poisson_recovers_a_tilted_plane() {
    let (n, pitch, a, b) = (32, 0.01, 0.4, -0.25);
    let (heights, normals) = render_ortho_relief(
        &Relief::Plane {
            slope_x: a,
            slope_y: b,
        },
        n,
        n,
        pitch,
    )
    .unwrap();
    let hf = poisson_integrate_ortho(&normals, &Mask::full(n, n), pitch).unwrap();
    let mean = heights.iter().sum::<f64>() / heights.len() as f64;
    let err = hf
        .values
        .iter()
        .zip(&heights)
        .map(|(x, h)| (x - (h - mean)).abs())
        .fold(0.0, f64::max);
    assert!(err < 1e-6, "{err}");
}

#[test]
fn poisson_of_constant_normals_is_zero() {
    let normals = NormalMap::new(vec![Vector3::new(0.0, 0.0, -1.0); 20], Mask::full(5, 4)).unwrap();
    let hf = poisson_integrate_ortho(&normals, &Mask::full(5, 4), 0.1).unwrap();
    assert!(hf.values.iter().all(|&x| x == 0.0));
}

#[test]
fn poisson_recovers_a_sinusoid() {
    let (n, pitch, amp) = (128, 0.01, 0.02);
    let relief = Relief::Sinusoid {
        amplitude: amp,
        period: 128.0 * pitch,
    };
    let (heights, normals) = render_ortho_relief(&relief, n, n, pitch).unwrap();
    let hf = poisson_integrate_ortho(&normals, &Mask::full(n, n), pitch).unwrap();
    let mean = heights.iter().sum::<f64>() / heights.len() as f64;
    let rms = (hf
        .values
        .iter()
        .zip(&heights)
        .map(|(x, h)| (x - (h - mean)).powi(2))
        .sum::<f64>()
        / (n * n) as f64)
        .sqrt();
    assert!(rms < 1e-3 * amp, "rms {rms}");
}

#[test]
fn poisson_rejects_grazing_normals() {
    let mut normals = vec![Vector3::new(0.0, 0.0, -1.0); 9];
    normals[4] = Vector3::new(1.0, 0.0, -5e-4).normalize();
    let normals = NormalMap::new(normals, Mask::full(3, 3)).unwrap();
    match poisson_integrate_ortho(&normals, &Mask::full(3, 3), 1.0) {
        Err(Error::NearSilhouette { pixels, .. }) => assert_eq!(pixels, vec![(1, 1)]),
        other => panic!("{other:?}"),
    }
}

/// Large focal length with the subject at `f · pitch` approximates an
/// orthographic view with the given pixel pitch.
#[test]
fn descent_agrees_with_poisson_in_the_orthographic_limit() {
    let (n, pitch, f) = (64, 0.01, 1e5);
    for relief in [
        Relief::Sinusoid {
            amplitude: 0.01,
            period: 0.32,
        },
        Relief::Plane {
            slope_x: 0.2,
            slope_y: -0.1,
        },
    ] {
        let (heights, normals) = render_ortho_relief(&relief, n, n, pitch).unwrap();
        let mask = Mask::full(n, n);
        let hf = poisson_integrate_ortho(&normals, &mask, pitch).unwrap();
        let cam = Camera::centered(f, n, n).unwrap();
        let cfg = IntegratorConfig {
            init_depth: f * pitch,
            ..Default::default()
        };
        let d = integrate_depth(&normals, &mask, &cam, &cfg).unwrap().depth;
        let rms = affine_residual_rms(d.values(), &hf.values);
        let lo = heights.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = heights.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        assert!(rms < 0.01 * (hi - lo), "{relief:?}: rms {rms}");
    }
}

/// RMS of `y - (a x + b)` after the least-squares fit of `a` and `b`.
fn affine_residual_rms(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let a = sxy / sxx;
    let b = my - a * mx;
    (x.iter()
        .zip(y)
        .map(|(p, q)| (q - a * p - b).powi(2))
        .sum::<f64>()
        / n)
        .sqrt()
}

#[test]
fn empty_domain_is_an_error() {
    let cam = Camera::centered(10.0, 4, 4).unwrap();
    let target = NormalMap::new(vec![Vector3::new(0.0, 0.0, -1.0); 16], Mask::full(4, 4)).unwrap();
    assert!(matches!(
        integrate_depth(
            &target,
            &Mask::empty(4, 4),
            &cam,
            &IntegratorConfig::default()
        ),
        Err(Error::EmptyDomain)
    ));
    assert!(matches!(
        poisson_integrate_ortho(&target, &Mask::empty(4, 4), 1.0),
        Err(Error::EmptyDomain)
    ));
}

#[test]
fn single_pixel_regions_take_their_anchor_depth() {
    let cam = Camera::centered(10.0, 5, 5).unwrap();
    let target = NormalMap::new(vec![Vector3::new(0.0, 0.0, -1.0); 25], Mask::full(5, 5)).unwrap();
    let mask = Mask::from_fn(5, 5, |u, v| (u, v) == (0, 0) || (u, v) == (4, 4));
    let out = integrate_depth(&target, &mask, &cam, &IntegratorConfig::default()).unwrap();
    assert_eq!(out.components.len(), 2);
    assert_eq!(out.depth.get(0, 0), 2.0);
    assert_eq!(out.depth.get(4, 4), 2.0);
}
