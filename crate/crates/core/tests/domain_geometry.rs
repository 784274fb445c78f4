use std::sync::Arc;

use hypkob::domain::{estimate_reach, CollarConfig, Domain, HeightProjection};
use hypkob::linalg::point;
use proptest::prelude::*;

fn ball() -> HeightProjection {
    HeightProjection::new(Arc::new(Domain::ball(4, 1.0)), &CollarConfig::default()).unwrap()
}

fn ellipsoid() -> HeightProjection {
    HeightProjection::new(
        Arc::new(Domain::ellipsoid(&[2.0, 1.0, 1.0, 1.0])),
        &CollarConfig::default(),
    )
    .unwrap()
}

// Reference values from a dense boundary-sample argmin refined by a simplex search.
const ELLIPSOID_HEIGHT_AT_X1: f64 = 0.903_602_003_609_844_7;
const ELLIPSOID_FOOT_OF_0203: [f64; 4] = [0.242_260_875, 0.992_636_599, 0.0, 0.0];

#[test]
fn ellipsoid_height_off_collar() {
    let hp = ellipsoid();
    let h = hp.height(&point(&[1.0, 0.0, 0.0, 0.0])).unwrap();
    assert!((h - ELLIPSOID_HEIGHT_AT_X1).abs() < 1e-6, "h = {h}");
}

#[test]
fn ellipsoid_projection_matches_argmin() {
    let hp = ellipsoid();
    let p = hp.project_boundary(&point(&[0.2, 0.3, 0.0, 0.0])).unwrap();
    let want = point(&ELLIPSOID_FOOT_OF_0203);
    assert!((p - want).norm() < 1e-6);
}

#[test]
fn ellipsoid_reach_matches_shape_operator() {
    let d = Domain::ellipsoid(&[2.0, 1.0, 1.0, 1.0]);
    let r = estimate_reach(&d, 2000, &CollarConfig::default()).unwrap();
    // smallest radius of curvature is a_min^2 / a_max = 0.5 at the long-axis tips
    // sampled minima approach the true radius from above
    assert!(r.min_radius >= 0.5 - 1e-9, "radius {}", r.min_radius);
    assert!(r.min_radius < 0.55, "radius {}", r.min_radius);
    assert!((r.epsilon - 0.5 * r.min_radius).abs() < 1e-12);
}

#[test]
fn ellipsoid_shell_foot_has_requested_depth() {
    let hp = ellipsoid();
    for x in [[0.0, 0.6, 0.0, 0.0], [1.5, 0.2, 0.1, 0.0], [0.3, 0.1, 0.7, 0.1]] {
        let x = point(&x);
        let f = hp.foot(&x).unwrap();
        if f.distance > hp.epsilon() {
            continue;
        }
        let t = 0.5 * f.distance;
        let y = hp.foot_on_shell(&x, t).unwrap();
        assert!((hp.depth(&y).unwrap() - t).abs() < 1e-6);
    }
}

fn collar_point(hp: &HeightProjection, dir: [f64; 4], t: f64) -> Option<hypkob::Point> {
    let v = point(&dir);
    if v.norm() < 1e-3 {
        return None;
    }
    let p = v.normalize();
    let _ = hp;
    Some(&p * (1.0 - t))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn projection_distance_is_depth(dir in prop::array::uniform4(-1.0f64..1.0), t in 0.001f64..0.5) {
        let hp = ball();
        if let Some(x) = collar_point(&hp, dir, t) {
            let f = hp.foot(&x).unwrap();
            prop_assert!((f.distance - t).abs() < 1e-8);
            let r = &x - &f.point;
            let cross = (&r - &f.normal * r.dot(&f.normal)).norm();
            prop_assert!(cross < 1e-6);
        }
    }

    #[test]
    fn segment_to_shell_keeps_projection(dir in prop::array::uniform4(-1.0f64..1.0), s in 0.0f64..0.999) {
        let hp = ball();
        if let Some(x) = collar_point(&hp, dir, 0.2) {
            let p = hp.project_boundary(&x).unwrap();
            let xe = hp.foot_on_shell(&x, hp.epsilon()).unwrap();
            let y = &xe + (&p - &xe) * s;
            let q = hp.project_boundary(&y).unwrap();
            prop_assert!((q - p).norm() < 1e-8);
        }
    }

    #[test]
    fn depth_is_one_lipschitz(a in prop::array::uniform4(-0.7f64..0.7), b in prop::array::uniform4(-0.7f64..0.7)) {
        let hp = ellipsoid();
        let (x, y) = (point(&a), point(&b));
        prop_assume!(hp.domain().contains(&x) && hp.domain().contains(&y));
        let dx = hp.depth(&x).unwrap();
        let dy = hp.depth(&y).unwrap();
        prop_assert!((dx - dy).abs() <= (x - y).norm() + 1e-9);
    }

    #[test]
    fn shell_foot_height(dir in prop::array::uniform4(-1.0f64..1.0), t in 0.01f64..0.5, u in 0.01f64..1.0) {
        let hp = ball();
        if let Some(x) = collar_point(&hp, dir, t) {
            let y = hp.foot_on_shell(&x, u * hp.epsilon()).unwrap();
            prop_assert!((hp.height(&y).unwrap() - (u * hp.epsilon()).sqrt()).abs() < 1e-6);
        }
    }
}
