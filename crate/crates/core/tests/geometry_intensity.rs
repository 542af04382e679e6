mod common;

use lidarplace::geometry::{from_spherical, point_to_spherical, to_spherical, wrap_degrees, SensorPreset};
use lidarplace::intensity::{equalize, equalize_shared, normalize, IntensityHistogram, IntensityMode};
use lidarplace::{Frame, PointCloud};
use proptest::prelude::*;

#[test]
fn axis_points_map_to_expected_angles() {
    let fov = SensorPreset::Vlp16.fov();
    assert_eq!(point_to_spherical([0.0, 0.0, 0.0], &fov), [0.0, 0.0, 0.0]);
    let [r, t, p] = point_to_spherical([0.0, 3.0, 0.0], &fov);
    assert_eq!((r, t, p), (3.0, 90.0, 90.0));
    let [_, t, p] = point_to_spherical([-1.0, 0.0, 0.0], &fov);
    assert_eq!((t, p), (180.0, 90.0));
    let [_, _, p] = point_to_spherical([0.0, 0.0, -2.0], &fov);
    assert_eq!(p, 180.0);
}

#[test]
fn azimuth_wraps_into_half_open_interval() {
    assert_eq!(wrap_degrees(-180.0), 180.0);
    assert_eq!(wrap_degrees(540.0), 180.0);
    assert_eq!(wrap_degrees(-190.0), 170.0);
    assert_eq!(wrap_degrees(0.0), 0.0);
}

#[test]
fn cloud_frame_conversions_check_their_input_frame() {
    let c = PointCloud::cartesian(vec![[1.0, 1.0, 1.0]], None).unwrap();
    let s = to_spherical(&c, &SensorPreset::Hdl64e.fov()).unwrap();
    assert_eq!(s.frame(), Frame::Spherical);
    assert!(to_spherical(&s, &SensorPreset::Hdl64e.fov()).is_err());
    assert!(from_spherical(&c).is_err());
}

/// Independent CDF mapping: bin edges over [min, max], first non-zero cumulative count as C_min.
fn cdf_oracle(values: &[f64], bins: usize) -> Vec<f64> {
    let (lo, hi) = values.iter().fold((f64::MAX, f64::MIN), |(a, b), &v| (a.min(v), b.max(v)));
    if lo == hi {
        return vec![1.0; values.len()];
    }
    let bin = |v: f64| (((v - lo) / (hi - lo) * bins as f64) as usize).min(bins - 1);
    let mut counts = vec![0usize; bins];
    for &v in values {
        counts[bin(v)] += 1;
    }
    let mut cum = counts.clone();
    for i in 1..bins {
        cum[i] += cum[i - 1];
    }
    let cmin = *cum.iter().find(|&&c| c > 0).unwrap();
    let n = values.len();
    values.iter().map(|&v| (cum[bin(v)] - cmin) as f64 / (n - cmin) as f64).collect()
}

#[test]
fn equalization_matches_cdf_oracle() {
    let mut rng = common::rng(21);
    for bins in [4, 16, 256] {
        let cloud = common::random_cloud(&mut rng, 1000, 1.0);
        let vals = cloud.intensity().unwrap();
        let got = equalize(vals, bins).unwrap();
        for (a, b) in got.iter().zip(cdf_oracle(vals, bins)) {
            assert!((a - b).abs() < 1e-12);
        }
    }
}

#[test]
fn frozen_small_equalization() {
    // two bins over [0, 3]: {0, 1} fall in bin 0, {2, 3} in bin 1; C = [2, 4], C_min = 2
    assert_eq!(equalize(&[0.0, 1.0, 2.0, 3.0], 2).unwrap(), vec![0.0, 0.0, 1.0, 1.0]);
    let h = IntensityHistogram::build(&[0.0, 1.0, 2.0, 3.0], 2).unwrap();
    assert_eq!(h.cumulative(), &[2, 4]);
    assert_eq!(normalize(&[2.0, 4.0, 6.0], IntensityMode::MinMax, 256).unwrap(), vec![0.0, 0.5, 1.0]);
    assert_eq!(normalize(&[2.0, 4.0], IntensityMode::None, 256).unwrap(), vec![2.0, 4.0]);
}

#[test]
fn shared_histogram_spans_all_scans() {
    let a = [0.0, 1.0];
    let b = [2.0, 3.0];
    let out = equalize_shared(&[&a, &b], 2).unwrap();
    assert_eq!(out, vec![vec![0.0, 0.0], vec![1.0, 1.0]]);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn spherical_round_trip(x in -200.0f64..200.0, y in -200.0f64..200.0, z in -50.0f64..50.0) {
        prop_assume!((x * x + y * y + z * z).sqrt() > 1e-6);
        let c = PointCloud::cartesian(vec![[x, y, z]], None).unwrap();
        let s = to_spherical(&c, &SensorPreset::Os1_128.fov()).unwrap();
        let [r, t, p] = s.points()[0];
        prop_assert!(r >= 0.0 && t > -180.0 && t <= 180.0 && (0.0..=180.0).contains(&p));
        let back = from_spherical(&s).unwrap().points()[0];
        for a in 0..3 {
            prop_assert!((back[a] - [x, y, z][a]).abs() <= 1e-9 * r.max(1.0));
        }
    }

    #[test]
    fn equalization_preserves_rank(vals in prop::collection::vec(-1e3f64..1e3, 1..300), bins in 2usize..300) {
        let out = equalize(&vals, bins).unwrap();
        for i in 0..vals.len() {
            prop_assert!((0.0..=1.0).contains(&out[i]));
            for j in 0..vals.len() {
                if vals[i] <= vals[j] {
                    prop_assert!(out[i] <= out[j]);
                }
            }
        }
    }
}
