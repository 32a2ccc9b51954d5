#![allow(dead_code)]

use std::collections::VecDeque;

use cardioreg::{Mask, Point3, Volume};
use nalgebra::{Matrix3, Vector3};
use rand::Rng;

/// Exhaustive nearest neighbour; the first minimum wins.
pub fn brute_nearest(q: &Point3, targets: &[Point3]) -> (usize, f64) {
    let mut best = (usize::MAX, f64::INFINITY);
    for (i, t) in targets.iter().enumerate() {
        let d = (q - t).norm_squared();
        if d < best.1 {
            best = (i, d);
        }
    }
    (best.0, best.1.sqrt())
}

/// Mean nearest-neighbour distance from the smaller cloud, by exhaustive scan.
pub fn brute_mde(a: &[Point3], b: &[Point3]) -> f64 {
    let (small, large) = if b.len() < a.len() { (b, a) } else { (a, b) };
    small.iter().map(|p| brute_nearest(p, large).1).sum::<f64>() / small.len() as f64
}

/// Seeded region growing over a nested-vector copy of the volume, written
/// independently of the library's linear indexing.
pub fn grow_oracle(vol: &Volume, seeds: &[[usize; 3]], t: f64) -> Vec<bool> {
    let [nx, ny, nz] = vol.reference.image_size;
    let mut grid = vec![vec![vec![0.0f64; nx]; ny]; nz];
    let mut marked = vec![vec![vec![false; nx]; ny]; nz];
    for k in 0..nz {
        for j in 0..ny {
            for i in 0..nx {
                grid[k][j][i] = vol.data[i + nx * (j + ny * k)] as f64;
            }
        }
    }
    let mut queue = VecDeque::new();
    let mut total = 0.0;
    let mut n = 0.0;
    for &[i, j, k] in seeds {
        if !marked[k][j][i] {
            marked[k][j][i] = true;
            total += grid[k][j][i];
            n += 1.0;
            queue.push_back((i as i64, j as i64, k as i64));
        }
    }
    let mut m = total / n;
    while let Some((i, j, k)) = queue.pop_front() {
        for (di, dj, dk) in [(1, 0, 0), (-1, 0, 0), (0, 1, 0), (0, -1, 0), (0, 0, 1), (0, 0, -1)] {
            let (a, b, c) = (i + di, j + dj, k + dk);
            if a < 0 || b < 0 || c < 0 || a >= nx as i64 || b >= ny as i64 || c >= nz as i64 {
                continue;
            }
            let (a, b, c) = (a as usize, b as usize, c as usize);
            if marked[c][b][a] {
                continue;
            }
            let v = grid[c][b][a];
            if (v - m).abs() <= t {
                marked[c][b][a] = true;
                m = (n * m + v) / (n + 1.0);
                n += 1.0;
                queue.push_back((a as i64, b as i64, c as i64));
            }
        }
    }
    let mut out = vec![false; nx * ny * nz];
    for k in 0..nz {
        for j in 0..ny {
            for i in 0..nx {
                out[i + nx * (j + ny * k)] = marked[k][j][i];
            }
        }
    }
    out
}

/// True when every set voxel is reachable from the first seed through set
/// face neighbours.
pub fn face_connected(mask: &Mask, seed: [usize; 3]) -> bool {
    let [nx, ny, nz] = mask.size();
    let mut seen = vec![false; mask.data.len()];
    let idx = |i: usize, j: usize, k: usize| i + nx * (j + ny * k);
    let mut stack = vec![seed];
    seen[idx(seed[0], seed[1], seed[2])] = true;
    let mut reached = 1;
    while let Some([i, j, k]) = stack.pop() {
        let mut push = |a: usize, b: usize, c: usize| {
            let l = idx(a, b, c);
            if mask.data[l] && !seen[l] {
                seen[l] = true;
                reached += 1;
                stack.push([a, b, c]);
            }
        };
        if i + 1 < nx { push(i + 1, j, k) }
        if i > 0 { push(i - 1, j, k) }
        if j + 1 < ny { push(i, j + 1, k) }
        if j > 0 { push(i, j - 1, k) }
        if k + 1 < nz { push(i, j, k + 1) }
        if k > 0 { push(i, j, k - 1) }
    }
    reached == mask.count()
}

pub fn random_unit(rng: &mut impl Rng) -> Vector3<f64> {
    loop {
        let v = Vector3::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
        let n = v.norm();
        if n > 1e-3 && n <= 1.0 {
            return v / n;
        }
    }
}

/// Rodrigues rotation, independent of the library's helper.
pub fn rodrigues(axis: &Vector3<f64>, angle: f64) -> Matrix3<f64> {
    let k = axis.normalize();
    let kx = Matrix3::new(0.0, -k.z, k.y, k.z, 0.0, -k.x, -k.y, k.x, 0.0);
    Matrix3::identity() + kx * angle.sin() + kx * kx * (1.0 - angle.cos())
}

pub fn random_rotation(rng: &mut impl Rng) -> Matrix3<f64> {
    let axis = random_unit(rng);
    rodrigues(&axis, rng.random_range(-std::f64::consts::PI..std::f64::consts::PI))
}

pub fn random_points(rng: &mut impl Rng, n: usize, half: f64) -> Vec<Point3> {
    (0..n)
        .map(|_| Point3::new(rng.random_range(-half..half), rng.random_range(-half..half), rng.random_range(-half..half)))
        .collect()
}
