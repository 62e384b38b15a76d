use std::collections::HashMap;

use crate::error::{Error, Result};

/// Cell-integrated kernel weights `w(z) ≈ ∫_{cell(z)} |y|^{-n-2α} dy` for every
/// lattice offset `z = k h` with `0 < |z| ≤ R_far`.
///
/// In one dimension the cell integral is exact. In two dimensions it is a
/// composite Gauss–Legendre rule, refined on the cells next to the origin.
/// Weights depend only on `(|k_1|, |k_2|)` up to ordering, so `w(z) = w(-z)`
/// holds bit for bit.
#[derive(Debug, Clone)]
pub struct KernelTable {
    pub dim: usize,
    pub alpha: f64,
    pub spacing: f64,
    pub far_radius: f64,
    pub offsets: Vec<Vec<i64>>,
    pub radii: Vec<f64>,
    pub weights: Vec<f64>,
}

// 8-point Gauss–Legendre on [-1, 1]
const GL_NODES: [f64; 8] = [
    -0.960_289_856_497_536_3,
    -0.796_666_477_413_626_7,
    -0.525_532_409_916_329_0,
    -0.183_434_642_495_649_8,
    0.183_434_642_495_649_8,
    0.525_532_409_916_329_0,
    0.796_666_477_413_626_7,
    0.960_289_856_497_536_3,
];
const GL_WEIGHTS: [f64; 8] = [
    0.101_228_536_290_376_26,
    0.222_381_034_453_374_47,
    0.313_706_645_877_887_3,
    0.362_683_783_378_362,
    0.362_683_783_378_362,
    0.313_706_645_877_887_3,
    0.222_381_034_453_374_47,
    0.101_228_536_290_376_26,
];

/// `∫_a^b f` by 8-point Gauss–Legendre.
pub(crate) fn gauss_legendre(a: f64, b: f64, f: impl Fn(f64) -> f64) -> f64 {
    let mid = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    GL_NODES
        .iter()
        .zip(GL_WEIGHTS.iter())
        .map(|(&t, &w)| w * f(mid + half * t))
        .sum::<f64>()
        * half
}

/// Exact `∫_{k-1/2}^{k+1/2} |y|^{-1-2α} dy` for `k ≥ 1` on the unit lattice.
pub fn unit_weight_1d(k: u64, alpha: f64) -> f64 {
    let k = k as f64;
    ((k - 0.5).powf(-2.0 * alpha) - (k + 0.5).powf(-2.0 * alpha)) / (2.0 * alpha)
}

/// `∫_{cell(k)} |y|^{-2-2α} dy` on the unit lattice, `(a, b) ≠ (0, 0)`.
pub fn unit_weight_2d(a: u64, b: u64, alpha: f64) -> f64 {
    let (a, b) = if a >= b { (a, b) } else { (b, a) };
    let sub = match a {
        0..=1 => 16,
        2 => 8,
        3..=6 => 2,
        _ => 1,
    };
    let p = 1.0 + alpha;
    let step = 1.0 / sub as f64;
    let (x0, y0) = (a as f64 - 0.5, b as f64 - 0.5);
    let mut total = 0.0;
    for i in 0..sub {
        let xa = x0 + i as f64 * step;
        for j in 0..sub {
            let ya = y0 + j as f64 * step;
            total += gauss_legendre(xa, xa + step, |x| {
                gauss_legendre(ya, ya + step, |y| (x * x + y * y).powf(-p))
            });
        }
    }
    total
}

impl KernelTable {
    pub fn new(dim: usize, alpha: f64, spacing: f64, far_radius: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(Error::domain(format!("alpha = {alpha} is not in (0, 1)")));
        }
        if !(spacing > 0.0) || !(far_radius >= spacing) {
            return Err(Error::domain("far radius must cover at least one grid cell"));
        }
        let kmax = (far_radius / spacing + 1e-9).floor() as i64;
        let scale = spacing.powf(-2.0 * alpha);
        let limit = far_radius * (1.0 + 1e-12);
        let mut offsets = Vec::new();
        let mut radii = Vec::new();
        let mut weights = Vec::new();
        match dim {
            1 => {
                for k in -kmax..=kmax {
                    if k == 0 {
                        continue;
                    }
                    offsets.push(vec![k]);
                    radii.push(k.unsigned_abs() as f64 * spacing);
                    weights.push(scale * unit_weight_1d(k.unsigned_abs(), alpha));
                }
            }
            2 => {
                let mut cache: HashMap<(u64, u64), f64> = HashMap::new();
                for k1 in -kmax..=kmax {
                    for k2 in -kmax..=kmax {
                        if k1 == 0 && k2 == 0 {
                            continue;
                        }
                        let r = ((k1 * k1 + k2 * k2) as f64).sqrt() * spacing;
                        if r > limit {
                            continue;
                        }
                        let (a, b) = (k1.unsigned_abs(), k2.unsigned_abs());
                        let key = if a >= b { (a, b) } else { (b, a) };
                        let w = *cache
                            .entry(key)
                            .or_insert_with(|| unit_weight_2d(key.0, key.1, alpha));
                        offsets.push(vec![k1, k2]);
                        radii.push(r);
                        weights.push(scale * w);
                    }
                }
            }
            _ => {
                return Err(Error::domain(format!(
                    "nonlocal quadrature is implemented for n = 1, 2 (got n = {dim})"
                )))
            }
        }
        Ok(KernelTable {
            dim,
            alpha,
            spacing,
            far_radius,
            offsets,
            radii,
            weights,
        })
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    /// `∫_{cell(0)} |y|^{2-n-2α} dy`, the excluded core cell's second moment.
    pub fn core_moment(&self) -> f64 {
        let h = self.spacing;
        let e = 2.0 - 2.0 * self.alpha;
        match self.dim {
            1 => 2.0 * (0.5 * h).powf(e) / e,
            _ => {
                // polar over the square: 8 ∫_0^{π/4} ((h/2)/cos θ)^{2-2α} / (2-2α) dθ
                8.0 * gauss_legendre(0.0, std::f64::consts::FRAC_PI_4, |t| {
                    (0.5 * h / t.cos()).powf(e) / e
                })
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn one_dimensional_weights_telescope() {
        let alpha = 0.4;
        let kmax = 20u64;
        let sum: f64 = (1..=kmax).map(|k| unit_weight_1d(k, alpha)).sum();
        let exact = (0.5f64.powf(-2.0 * alpha) - (kmax as f64 + 0.5).powf(-2.0 * alpha)) / (2.0 * alpha);
        assert!((sum - exact).abs() < 1e-13);
    }

    #[test]
    fn table_is_symmetric_and_positive() {
        for dim in [1, 2] {
            let t = KernelTable::new(dim, 0.5, 0.25, 2.0).unwrap();
            for (k, w) in t.offsets.iter().zip(&t.weights) {
                assert!(*w > 0.0 && w.is_finite());
                let neg: Vec<i64> = k.iter().map(|c| -c).collect();
                let j = t.offsets.iter().position(|o| *o == neg).unwrap();
                assert_eq!(t.weights[j].to_bits(), w.to_bits());
            }
        }
    }

    #[test]
    fn two_dimensional_weight_matches_polar_annulus() {
        // far cell: midpoint value plus the Laplacian correction s² r^{-s-2} / 24
        let alpha = 0.5;
        let w = unit_weight_2d(10, 3, alpha);
        let (r2, s) = (109.0f64, 3.0);
        let mid = r2.powf(-s / 2.0) * (1.0 + s * s / (24.0 * r2));
        assert!((w - mid).abs() / mid < 1e-4);
        // near cell: refined rule is stable under further refinement
        let near = unit_weight_2d(1, 0, alpha);
        let p = 1.0 + alpha;
        let mut fine = 0.0;
        let sub = 64;
        for i in 0..sub {
            for j in 0..sub {
                let xa = 0.5 + i as f64 / sub as f64;
                let ya = -0.5 + j as f64 / sub as f64;
                let s = 1.0 / sub as f64;
                fine += gauss_legendre(xa, xa + s, |x| gauss_legendre(ya, ya + s, |y| (x * x + y * y).powf(-p)));
            }
        }
        assert!((near - fine).abs() / fine < 1e-10);
    }
}
