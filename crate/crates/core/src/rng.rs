//! Keyed random streams.
//!
//! Every walk draws from its own ChaCha8 stream selected by
//! `(seed, point_id, path_id)`: the seed and point id form the key and the
//! path id picks the stream. Results therefore do not depend on which
//! worker thread runs which path, or in what order.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::vec3::Vec3;

pub type PathRng = ChaCha8Rng;

pub fn path_rng(seed: u64, point_id: u64, path_id: u64) -> PathRng {
    let mut key = [0u8; 32];
    key[..8].copy_from_slice(&seed.to_le_bytes());
    key[8..16].copy_from_slice(&point_id.to_le_bytes());
    let mut rng = ChaCha8Rng::from_seed(key);
    rng.set_stream(path_id);
    rng
}

/// Uniform direction on the unit sphere.
#[inline]
pub fn unit_sphere<R: Rng + ?Sized>(rng: &mut R) -> Vec3 {
    let z: f64 = 2.0 * rng.gen::<f64>() - 1.0;
    let phi = std::f64::consts::TAU * rng.gen::<f64>();
    let s = (1.0 - z * z).max(0.0).sqrt();
    let (sp, cp) = phi.sin_cos();
    Vec3::new(s * cp, s * sp, z)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn streams_are_reproducible_and_distinct() {
        let a: Vec<u64> = (0..4).map(|_| path_rng(7, 3, 11).gen()).collect();
        assert!(a.windows(2).all(|w| w[0] == w[1]));
        let x: u64 = path_rng(7, 3, 11).gen();
        assert_ne!(x, path_rng(7, 3, 12).gen::<u64>());
        assert_ne!(x, path_rng(7, 4, 11).gen::<u64>());
        assert_ne!(x, path_rng(8, 3, 11).gen::<u64>());
    }

    #[test]
    fn sphere_samples_are_unit_and_centred() {
        let mut rng = path_rng(1, 0, 0);
        let n = 100_000;
        let mut m = Vec3::ZERO;
        for _ in 0..n {
            let v = unit_sphere(&mut rng);
            assert!((v.norm() - 1.0).abs() < 1e-12);
            m += v;
        }
        let m = m / n as f64;
        // each component has variance 1/3; 5 standard errors
        let tol = 5.0 * (1.0 / (3.0 * n as f64)).sqrt();
        assert!(m.x.abs() < tol && m.y.abs() < tol && m.z.abs() < tol, "{m:?}");
    }
}
