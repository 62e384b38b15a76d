//! Independent reference implementations shared by the integration tests.
#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rfl_lab::forms::KernelTable;
use rfl_lab::model::{GridFunction, GridSpec, ScopeFunction};

/// Which offsets a base point `x` sees, written out directly.
pub enum Pairing<'a> {
    Regional(&'a ScopeFunction),
    Full,
    Complement(&'a ScopeFunction, f64),
}

impl Pairing<'_> {
    fn sees(&self, x: &[f64], r: f64) -> bool {
        match self {
            Pairing::Regional(rho) => r < rho.eval(x),
            Pairing::Full => true,
            Pairing::Complement(inner, outer) => inner.eval(x) <= r && r < *outer,
        }
    }
}

fn value(u: &GridFunction, idx: &[i64]) -> f64 {
    u.spec.linear_index(idx).map_or(0.0, |i| u.values[i])
}

/// `hⁿ Σ_x Σ_z 1[x sees |z|] w(z) (u(x+z) - u(x)) (v(x+z) - v(x))` over every
/// lattice point `x` within the table's reach of the box, with `u = v = 0`
/// off the box.
pub fn naive_form(u: &GridFunction, v: &GridFunction, table: &KernelTable, pairing: &Pairing) -> f64 {
    let spec = &u.spec;
    let dim = spec.dim;
    let m = spec.points as i64;
    let reach = table
        .offsets
        .iter()
        .flat_map(|k| k.iter().map(|c| c.abs()))
        .max()
        .unwrap_or(0);
    let side = m + 2 * reach;
    let count = side.pow(dim as u32);
    let mut total = 0.0;
    for lin in 0..count {
        let mut rest = lin;
        let mut x_idx = vec![0i64; dim];
        for a in (0..dim).rev() {
            x_idx[a] = rest % side - reach;
            rest /= side;
        }
        let x: Vec<f64> = (0..dim).map(|a| spec.coord(a, x_idx[a])).collect();
        let ux = value(u, &x_idx);
        let vx = value(v, &x_idx);
        for ((k, &r), &w) in table.offsets.iter().zip(&table.radii).zip(&table.weights) {
            if !pairing.sees(&x, r) {
                continue;
            }
            let y_idx: Vec<i64> = x_idx.iter().zip(k).map(|(a, b)| a + b).collect();
            let du = value(u, &y_idx) - ux;
            let dv = value(v, &y_idx) - vx;
            total += w * du * dv;
        }
    }
    total * spec.cell_volume()
}

/// `H(x)` in one dimension by a midpoint rule on the membership indicators.
pub fn dense_h_1d(x: f64, rho: &ScopeFunction, alpha: f64, reach: f64, nodes: usize) -> f64 {
    let rx = rho.eval(&[x]);
    let rinf = rho.rho_inf();
    let far = if rinf.is_finite() { rinf.powf(-2.0 * alpha) } else { 0.0 };
    let mut h = -(2.0 / (2.0 * alpha)) * (rx.powf(-2.0 * alpha) - far);
    let dr = reach / nodes as f64;
    for s in [1.0, -1.0] {
        let mut acc = 0.0;
        for k in 0..nodes {
            let r = (k as f64 + 0.5) * dr;
            let plus = (r < rho.eval(&[x + s * r])) as i32 as f64;
            let here = (r < rx) as i32 as f64;
            acc += (plus - here) * r.powf(-1.0 - 2.0 * alpha);
        }
        h += 0.5 * acc * dr;
    }
    h
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Smooth bump times random noise in `[lo, hi]`.
pub fn random_function(grid: &GridSpec, rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> GridFunction {
    let width = 0.25 * grid.extent;
    let values = grid
        .positions()
        .iter()
        .map(|p| {
            let r2: f64 = p.iter().map(|c| c * c).sum();
            (-r2 / (width * width)).exp() * rng.gen_range(lo..hi)
        })
        .collect();
    GridFunction::new(grid.clone(), values).unwrap()
}

pub fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-300)
}
