mod common;

use cardioreg::io::{format_landmarks, format_point_cloud, format_transform, parse_landmarks, parse_point_cloud, parse_transform};
use cardioreg::pipeline::format_sig;
use cardioreg::segmentation::Connectivity;
use cardioreg::*;
use common::*;
use nalgebra::{Matrix3, Vector3};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn random_affine(r: &mut ChaCha8Rng) -> AffineTransform3 {
    let m = Matrix3::from_fn(|_, _| r.random_range(-2.0..2.0));
    let t = Vector3::new(r.random_range(-50.0..50.0), r.random_range(-50.0..50.0), r.random_range(-50.0..50.0));
    AffineTransform3::affine(m, t)
}

fn random_rigid(r: &mut ChaCha8Rng) -> AffineTransform3 {
    let t = Vector3::new(r.random_range(-50.0..50.0), r.random_range(-50.0..50.0), r.random_range(-50.0..50.0));
    AffineTransform3::new(random_rotation(r), t, TransformKind::Rigid)
}

fn rel_close(a: &AffineTransform3, b: &AffineTransform3, tol: f64) -> bool {
    let scale = a.linear.abs().max().max(a.translation.abs().max()).max(1.0);
    a.max_abs_diff(b) <= tol * scale
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn compose_is_associative(seed in any::<u64>()) {
        let mut r = rng(seed);
        let (a, b, c) = (random_affine(&mut r), random_affine(&mut r), random_affine(&mut r));
        let left = compose(&compose(&a, &b), &c);
        let right = compose(&a, &compose(&b, &c));
        prop_assert!(rel_close(&left, &right, 1e-9));
    }

    #[test]
    fn apply_keeps_length_and_values(seed in any::<u64>(), n in 1usize..60) {
        let mut r = rng(seed);
        let pts = random_points(&mut r, n, 20.0);
        let vals: Vec<f64> = (0..n).map(|_| r.random_range(-1.0..1.0)).collect();
        let cloud = PointCloud::from_points(pts).with_values(vals.clone()).unwrap();
        let out = apply_transform(&cloud, &random_affine(&mut r)).unwrap();
        prop_assert_eq!(out.len(), n);
        prop_assert_eq!(out.values, Some(vals));
    }

    #[test]
    fn rigid_transforms_preserve_distances(seed in any::<u64>(), n in 2usize..40) {
        let mut r = rng(seed);
        let cloud = PointCloud::from_points(random_points(&mut r, n, 30.0));
        let out = apply_transform(&cloud, &random_rigid(&mut r)).unwrap();
        for i in 0..n {
            for j in i + 1..n {
                let d0 = (cloud.points[i] - cloud.points[j]).norm();
                let d1 = (out.points[i] - out.points[j]).norm();
                prop_assert!((d0 - d1).abs() <= 1e-9 * d0.max(1e-12));
            }
        }
    }

    #[test]
    fn nearest_neighbours_match_exhaustive_scan(seed in any::<u64>(), n in 1usize..120, m in 1usize..120, lattice in any::<bool>()) {
        let mut r = rng(seed);
        // integer lattices force distance ties
        let mut draw = |k: usize| -> Vec<Point3> {
            if lattice {
                (0..k).map(|_| Point3::new(r.random_range(0..4) as f64, r.random_range(0..4) as f64, r.random_range(0..4) as f64)).collect()
            } else {
                random_points(&mut r, k, 10.0)
            }
        };
        let q = draw(n);
        let t = draw(m);
        let pairs = nearest_neighbors(&PointCloud::from_points(q.clone()), &PointCloud::from_points(t.clone())).unwrap();
        for (i, p) in pairs.iter().enumerate() {
            let (j, d) = brute_nearest(&q[i], &t);
            prop_assert_eq!(p.src_index, i);
            prop_assert_eq!(p.dst_index, j);
            prop_assert!((p.distance - d).abs() <= 1e-12);
        }
    }

    #[test]
    fn umeyama_ignores_common_permutations(seed in any::<u64>(), n in 4usize..30) {
        let mut r = rng(seed);
        let src = random_points(&mut r, n, 20.0);
        let dst = random_points(&mut r, n, 20.0);
        let mut order: Vec<usize> = (0..n).collect();
        for i in (1..n).rev() {
            order.swap(i, r.random_range(0..=i));
        }
        let ps: Vec<Point3> = order.iter().map(|&i| src[i]).collect();
        let pd: Vec<Point3> = order.iter().map(|&i| dst[i]).collect();
        for scaling in [true, false] {
            let a = estimate_umeyama(&src, &dst, scaling).unwrap();
            let b = estimate_umeyama(&ps, &pd, scaling).unwrap();
            prop_assert!(a.max_abs_diff(&b) < 1e-9);
        }
    }

    #[test]
    fn rigid_umeyama_is_a_proper_rotation_and_never_worse_than_identity(seed in any::<u64>(), n in 3usize..30) {
        let mut r = rng(seed);
        let src = random_points(&mut r, n, 20.0);
        let dst = random_points(&mut r, n, 20.0);
        for scaling in [false, true] {
            let t = estimate_umeyama(&src, &dst, scaling).unwrap();
            if !scaling {
                let should_be_i = t.linear.transpose() * t.linear;
                prop_assert!((should_be_i - Matrix3::identity()).abs().max() < 1e-10);
                prop_assert!((t.linear.determinant() - 1.0).abs() < 1e-10);
            }
            let res = |f: &dyn Fn(&Point3) -> Point3| src.iter().zip(&dst).map(|(s, d)| (d - f(s)).norm_squared()).sum::<f64>();
            prop_assert!(res(&|p| t.apply_point(p)) <= res(&|p| *p) * (1.0 + 1e-12));
        }
    }

    #[test]
    fn coarse_registration_is_equivariant(seed in any::<u64>()) {
        let mut r = rng(seed);
        let fixed = LandmarkSet::new(random_points(&mut r, 6, 30.0), random_points(&mut r, 5, 30.0));
        let moving = LandmarkSet::new(random_points(&mut r, 6, 30.0), random_points(&mut r, 5, 30.0));
        let q = random_rigid(&mut r);
        let p = CoarseParams::default();
        let base = coarse_register(&moving, &fixed, &p).unwrap();
        let moved = coarse_register(&moving.transformed(&q), &fixed, &p).unwrap();
        let expected = compose(&base, &invert(&q).unwrap());
        prop_assert!(moved.max_abs_diff(&expected) < 1e-8);
    }

    #[test]
    fn dice_is_symmetric_and_bounded(seed in any::<u64>(), p in 0.0f64..1.0) {
        let mut r = rng(seed);
        let reference = build_spatial_reference([5, 4, 3], [1.0; 3], [0.0; 3]).unwrap();
        let a = Mask::new((0..60).map(|_| r.random_bool(p)).collect(), reference).unwrap();
        let b = Mask::new((0..60).map(|_| r.random_bool(p)).collect(), reference).unwrap();
        let ab = dice(&a, &b).unwrap();
        prop_assert_eq!(ab, dice(&b, &a).unwrap());
        prop_assert!((0.0..=1.0).contains(&ab));
        prop_assert_eq!(ab == 1.0, a == b);
        prop_assert_eq!(dice(&a, &a).unwrap(), 1.0);
    }

    #[test]
    fn mde_matches_scan_and_ignores_common_rigid_motion(seed in any::<u64>(), n in 1usize..80, m in 1usize..80) {
        let mut r = rng(seed);
        let a = PointCloud::from_points(random_points(&mut r, n, 15.0));
        let b = PointCloud::from_points(random_points(&mut r, m, 15.0));
        let d = mean_distance_error(&a, &b).unwrap();
        prop_assert!(d >= 0.0);
        prop_assert!((d - brute_mde(&a.points, &b.points)).abs() <= 1e-12);
        let q = random_rigid(&mut r);
        let moved = mean_distance_error(&apply_transform(&a, &q).unwrap(), &apply_transform(&b, &q).unwrap()).unwrap();
        prop_assert!((moved - d).abs() <= 1e-9);
    }

    #[test]
    fn region_growing_matches_oracle_and_stays_connected(seed in any::<u64>(), t in 0.0f64..600.0) {
        let mut r = rng(seed);
        let reference = build_spatial_reference([6, 5, 4], [1.0; 3], [0.0; 3]).unwrap();
        let vol = Volume::new((0..120).map(|_| r.random_range(0.0..1000.0f32)).collect(), reference).unwrap();
        let seeds = [[r.random_range(0..6), r.random_range(0..5), r.random_range(0..4)]];
        let mask = region_grow(&vol, &seeds, t).unwrap();
        prop_assert_eq!(&mask.data, &grow_oracle(&vol, &seeds, t));
        prop_assert!(mask.get(seeds[0][0], seeds[0][1], seeds[0][2]));
        prop_assert!(face_connected(&mask, seeds[0]));
        let wide = cardioreg::segmentation::region_grow_with(&vol, &seeds, t, Connectivity::TwentySix).unwrap();
        prop_assert!(wide.count() >= 1);
    }

    #[test]
    fn isosurfaces_are_closed_two_manifolds(seed in any::<u64>(), p in 0.05f64..0.95) {
        let mut r = rng(seed);
        let reference = build_spatial_reference([4, 5, 3], [0.7, 1.0, 1.3], [-2.0, 0.0, 5.0]).unwrap();
        let mut data: Vec<bool> = (0..60).map(|_| r.random_bool(p)).collect();
        data[r.random_range(0..60)] = true;
        let mask = Mask::new(data, reference).unwrap();
        let mesh = extract_isosurface(&mask).unwrap();
        prop_assert!(mesh.is_watertight());
        prop_assert!(mesh.signed_volume() > 0.0);
    }

    #[test]
    fn trilinear_sampling_is_exact_on_affine_fields(seed in any::<u64>()) {
        let mut r = rng(seed);
        let reference = build_spatial_reference([5, 6, 4], [0.8, 1.1, 1.7], [-3.0, 2.0, 10.0]).unwrap();
        let g = Vector3::new(r.random_range(-2.0..2.0), r.random_range(-2.0..2.0), r.random_range(-2.0..2.0));
        let c = r.random_range(-5.0..5.0);
        let f = |p: &Point3| g.dot(&p.coords) + c;
        let vol = Volume::from_fn(reference, |p| f(p) as f32);
        let lo = reference.voxel_to_world([0, 0, 0]).unwrap();
        let hi = reference.voxel_to_world([4, 5, 3]).unwrap();
        for _ in 0..20 {
            let p = Point3::new(r.random_range(lo.x..hi.x), r.random_range(lo.y..hi.y), r.random_range(lo.z..hi.z));
            let v = sample_trilinear(&vol, &p).unwrap();
            // the volume stores f32, so exactness is relative to f32 rounding of the corners
            prop_assert!((v - f(&p)).abs() <= 1e-5 * (1.0 + f(&p).abs()));
        }
    }

    #[test]
    fn fusion_keeps_geometry(seed in any::<u64>()) {
        let mut r = rng(seed);
        let reference = build_spatial_reference([4, 4, 4], [1.0; 3], [0.0; 3]).unwrap();
        let mut mask = Mask::empty(reference);
        mask.set(1, 1, 1, true);
        mask.set(2, 1, 1, true);
        let mesh = extract_isosurface(&mask).unwrap();
        let pts = random_points(&mut r, 30, 3.0);
        let cloud = PointCloud::from_points(pts).with_values((0..30).map(|i| i as f64).collect()).unwrap();
        let out = map_mpi_to_mesh(&FusionInput { mesh: &mesh, mpi_source: MpiSource::Cloud(&cloud) }).unwrap();
        prop_assert_eq!(&out.vertices, &mesh.vertices);
        prop_assert_eq!(&out.triangles, &mesh.triangles);
    }

    #[test]
    fn text_formats_round_trip(seed in any::<u64>(), n in 1usize..40) {
        let mut r = rng(seed);
        let wild = |r: &mut ChaCha8Rng| r.random_range(-1.0..1.0) * 10f64.powi(r.random_range(-12..12));
        let pts: Vec<Point3> = (0..n).map(|_| Point3::new(wild(&mut r), wild(&mut r), wild(&mut r))).collect();
        let vals: Vec<f64> = (0..n).map(|_| wild(&mut r)).collect();
        let cloud = PointCloud::from_points(pts.clone()).with_values(vals).unwrap();
        prop_assert_eq!(parse_point_cloud(&format_point_cloud(&cloud).unwrap()).unwrap(), cloud);
        let t = random_affine(&mut r);
        prop_assert_eq!(parse_transform(&format_transform(&t)).unwrap(), t);
        let k = r.random_range(1..=n);
        let lm = LandmarkSet::new(pts[..k].to_vec(), pts[k - 1..].to_vec());
        prop_assert_eq!(parse_landmarks(&format_landmarks(&lm)).unwrap(), lm);
    }

    #[test]
    fn nine_significant_digits(v in prop::num::f64::NORMAL) {
        let s = format_sig(v);
        let back: f64 = s.parse().unwrap();
        prop_assert!((back - v).abs() <= 5e-9 * v.abs(), "{} -> {}", v, s);
    }
}
