//! Fixtures shared by integration tests.
#![allow(dead_code)]

use std::f64::consts::TAU;

use lidarplace::PointCloud;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Random cloud with intensities, inside a cube of half-width `extent`.
pub fn random_cloud(rng: &mut ChaCha8Rng, n: usize, extent: f64) -> PointCloud {
    let pts = (0..n)
        .map(|_| [0, 1, 2].map(|_| rng.gen_range(-extent..extent)))
        .collect();
    let inten = (0..n).map(|_| rng.gen_range(0.0..255.0)).collect();
    PointCloud::cartesian(pts, Some(inten)).unwrap()
}

/// A static world of vertical poles and boxes around a circular road.
///
/// Every landmark is a dense set of surface points sharing one reflectivity.
pub struct LoopWorld {
    pub radius: f64,
    pub points: Vec<[f64; 3]>,
    pub intensity: Vec<f64>,
}

impl LoopWorld {
    pub fn new(seed: u64, radius: f64, landmarks: usize) -> Self {
        let mut rng = rng(seed);
        let mut points = Vec::new();
        let mut intensity = Vec::new();
        for _ in 0..landmarks {
            let a = rng.gen_range(0.0..TAU);
            let side = if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
            let d = radius + side * rng.gen_range(4.0..22.0);
            let (cx, cy) = (d * a.cos(), d * a.sin());
            let refl = rng.gen_range(5.0..250.0);
            let tall = 0.5 + 0.5 * (2.0 * a).sin();
            let height = 1.0 + 8.0 * tall * rng.gen_range(0.7..1.0);
            let pole_share = 0.5 + 0.45 * (3.0 * a + 1.0).cos();
            let size = 0.5 + 0.5 * (5.0 * a + 2.0).sin();
            let n = rng.gen_range(80..240);
            if rng.gen_bool(pole_share) {
                let r = 0.15 + 1.0 * size * rng.gen_range(0.5..1.0);
                for _ in 0..n {
                    let t = rng.gen_range(0.0..TAU);
                    points.push([cx + r * t.cos(), cy + r * t.sin(), rng.gen_range(0.0..height)]);
                    intensity.push(refl);
                }
            } else {
                let (w, l) = (0.5 + 4.0 * size * rng.gen_range(0.5..1.0), 0.5 + 4.0 * size * rng.gen_range(0.5..1.0));
                for _ in 0..n {
                    let (u, v) = (rng.gen_range(-0.5..0.5), rng.gen_range(-0.5..0.5));
                    let (x, y) = if rng.gen_bool(0.5) {
                        (u * w, if v < 0.0 { -l / 2.0 } else { l / 2.0 })
                    } else {
                        (if u < 0.0 { -w / 2.0 } else { w / 2.0 }, v * l)
                    };
                    points.push([cx + x, cy + y, rng.gen_range(0.0..height)]);
                    intensity.push(refl);
                }
            }
        }
        // buildings: fewer, large and each of a different footprint and height
        let buildings = landmarks / 12;
        for b in 0..buildings {
            let a = (b as f64 + rng.gen_range(0.0..1.0)) * TAU / buildings as f64;
            let side = if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
            let (w, l) = (rng.gen_range(6.0..25.0), rng.gen_range(6.0..25.0));
            let d = radius + side * (rng.gen_range(6.0..12.0) + l / 2.0);
            let (cx, cy) = (d * a.cos(), d * a.sin());
            let height = rng.gen_range(4.0..20.0);
            let refl = rng.gen_range(5.0..250.0);
            let n = (2.0 * (w + l) * height * 1.5) as usize;
            for _ in 0..n {
                let t = rng.gen_range(0.0..2.0 * (w + l));
                let (x, y) = if t < w {
                    (t - w / 2.0, -l / 2.0)
                } else if t < w + l {
                    (w / 2.0, t - w - l / 2.0)
                } else if t < 2.0 * w + l {
                    (t - w - l - w / 2.0, l / 2.0)
                } else {
                    (-w / 2.0, t - 2.0 * w - l - l / 2.0)
                };
                let (ca, sa) = (a.cos(), a.sin());
                points.push([cx + x * ca - y * sa, cy + x * sa + y * ca, rng.gen_range(0.0..height)]);
                intensity.push(refl);
            }
        }
        Self { radius, points, intensity }
    }

    /// Position on the road at angle `a` (radians).
    pub fn position(&self, a: f64) -> (f64, f64) {
        (self.radius * a.cos(), self.radius * a.sin())
    }

    /// Sensor-frame scan at `(x, y)`: landmark points within `range`, with
    /// small range noise and intensity jitter drawn from `seed`.
    pub fn scan(&self, x: f64, y: f64, range: f64, seed: u64) -> PointCloud {
        let mut rng = rng(seed);
        let mut pts = Vec::new();
        let mut inten = Vec::new();
        for (p, &i) in self.points.iter().zip(&self.intensity) {
            let (dx, dy, dz) = (p[0] - x, p[1] - y, p[2] - 1.8);
            if dx * dx + dy * dy > range * range {
                continue;
            }
            let n = 1.0 + rng.gen_range(-0.002..0.002);
            pts.push([dx * n, dy * n, dz * n]);
            inten.push((i + rng.gen_range(-3.0..3.0f64)).clamp(0.0, 255.0));
        }
        PointCloud::cartesian(pts, Some(inten)).unwrap()
    }
}
