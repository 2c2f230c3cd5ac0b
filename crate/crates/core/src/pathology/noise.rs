use crate::geometry::Vec3;

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Uniform lattice value in [-1, 1).
fn lattice(seed: u64, i: i64, j: i64, k: i64) -> f64 {
    let mut h = splitmix(seed);
    for c in [i, j, k] {
        h = splitmix(h ^ c as u64);
    }
    (h >> 11) as f64 / (1u64 << 53) as f64 * 2.0 - 1.0
}

/// Seeded value noise: trilinear interpolation of uniform lattice values on
/// the unit integer grid. Range [-1, 1].
pub fn value_noise(p: Vec3, seed: u64) -> f64 {
    let (fx, fy, fz) = (p.x.floor(), p.y.floor(), p.z.floor());
    let (tx, ty, tz) = (p.x - fx, p.y - fy, p.z - fz);
    let (i, j, k) = (fx as i64, fy as i64, fz as i64);
    let mut acc = 0.0;
    for (di, wx) in [(0, 1.0 - tx), (1, tx)] {
        for (dj, wy) in [(0, 1.0 - ty), (1, ty)] {
            for (dk, wz) in [(0, 1.0 - tz), (1, tz)] {
                acc += wx * wy * wz * lattice(seed, i + di, j + dj, k + dk);
            }
        }
    }
    acc
}
