use std::ops::{Add, Mul, Sub};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Uniform tensor grid on the box `center + [-L, L]^n` with `m` points per axis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GridSpec {
    pub dim: usize,
    pub extent: f64,
    pub points: usize,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub center: Vec<f64>,
}

impl Default for GridSpec {
    /// `[-8, 8]` with 256 points.
    fn default() -> Self {
        GridSpec {
            dim: 1,
            extent: 8.0,
            points: 256,
            center: Vec::new(),
        }
    }
}

impl GridSpec {
    pub fn new(dim: usize, extent: f64, points: usize) -> Result<Self> {
        let spec = GridSpec {
            dim,
            extent,
            points,
            center: Vec::new(),
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.dim == 0 {
            return Err(Error::validation("grid.dim", "must be at least 1"));
        }
        if self.points < 8 {
            return Err(Error::validation(
                "grid.points",
                format!("{} points per axis, need at least 8", self.points),
            ));
        }
        if !(self.extent > 0.0 && self.extent.is_finite()) {
            return Err(Error::validation("grid.extent", "must be positive and finite"));
        }
        if !self.center.is_empty() && self.center.len() != self.dim {
            return Err(Error::validation("grid.center", "length must equal the dimension"));
        }
        Ok(())
    }

    /// Same lattice, box moved so that its center sits at `center`.
    pub fn centered_at(&self, center: &[f64]) -> Self {
        GridSpec {
            center: center.to_vec(),
            ..self.clone()
        }
    }

    pub fn spacing(&self) -> f64 {
        2.0 * self.extent / (self.points - 1) as f64
    }

    /// Volume element `h^n`.
    pub fn cell_volume(&self) -> f64 {
        self.spacing().powi(self.dim as i32)
    }

    pub fn len(&self) -> usize {
        self.points.pow(self.dim as u32)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn center_coord(&self, axis: usize) -> f64 {
        self.center.get(axis).copied().unwrap_or(0.0)
    }

    /// Coordinate of lattice index `i` along `axis` (indices may lie outside the box).
    pub fn coord(&self, axis: usize, i: i64) -> f64 {
        self.center_coord(axis) - self.extent + i as f64 * self.spacing()
    }

    /// Axis coordinates of all grid points along `axis`.
    pub fn axis(&self, axis: usize) -> Vec<f64> {
        (0..self.points as i64).map(|i| self.coord(axis, i)).collect()
    }

    /// Row-major multi-index of a linear index (last axis fastest).
    pub fn multi_index(&self, mut linear: usize) -> Vec<usize> {
        let mut idx = vec![0; self.dim];
        for axis in (0..self.dim).rev() {
            idx[axis] = linear % self.points;
            linear /= self.points;
        }
        idx
    }

    /// Linear index of a (possibly out-of-box) lattice multi-index.
    pub fn linear_index(&self, idx: &[i64]) -> Option<usize> {
        let m = self.points as i64;
        let mut linear = 0usize;
        for &i in idx {
            if i < 0 || i >= m {
                return None;
            }
            linear = linear * self.points + i as usize;
        }
        Some(linear)
    }

    pub fn position(&self, linear: usize) -> Vec<f64> {
        self.multi_index(linear)
            .iter()
            .enumerate()
            .map(|(axis, &i)| self.coord(axis, i as i64))
            .collect()
    }

    pub fn positions(&self) -> Vec<Vec<f64>> {
        (0..self.len()).map(|i| self.position(i)).collect()
    }

    /// True when both specs describe the same lattice points.
    pub fn same_lattice(&self, other: &GridSpec) -> bool {
        self.dim == other.dim
            && self.points == other.points
            && self.extent == other.extent
            && (0..self.dim).all(|a| self.center_coord(a) == other.center_coord(a))
    }
}

/// Real function sampled on a [`GridSpec`], zero outside the box.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridFunction {
    pub spec: GridSpec,
    pub values: Vec<f64>,
}

impl GridFunction {
    pub fn new(spec: GridSpec, values: Vec<f64>) -> Result<Self> {
        if values.len() != spec.len() {
            return Err(Error::Shape(format!(
                "{} values for a grid of {} points",
                values.len(),
                spec.len()
            )));
        }
        if let Some(bad) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::domain(format!("non-finite value at grid index {bad}")));
        }
        Ok(GridFunction { spec, values })
    }

    pub fn zeros(spec: &GridSpec) -> Self {
        GridFunction {
            spec: spec.clone(),
            values: vec![0.0; spec.len()],
        }
    }

    pub fn constant(spec: &GridSpec, c: f64) -> Self {
        GridFunction {
            spec: spec.clone(),
            values: vec![c; spec.len()],
        }
    }

    pub fn from_fn(spec: &GridSpec, f: impl Fn(&[f64]) -> f64) -> Self {
        let values = (0..spec.len()).map(|i| f(&spec.position(i))).collect();
        GridFunction {
            spec: spec.clone(),
            values,
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn ensure_same_grid(&self, other: &GridFunction) -> Result<()> {
        if self.spec.same_lattice(&other.spec) {
            Ok(())
        } else {
            Err(Error::Shape(format!(
                "grid functions live on different grids ({:?} vs {:?})",
                self.spec, other.spec
            )))
        }
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        GridFunction {
            spec: self.spec.clone(),
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn scale(&self, s: f64) -> Self {
        self.map(|v| s * v)
    }

    /// `u_+ = max(u, 0)`.
    pub fn positive_part(&self) -> Self {
        self.map(|v| v.max(0.0))
    }

    /// `u_- = max(-u, 0)`.
    pub fn negative_part(&self) -> Self {
        self.map(|v| (-v).max(0.0))
    }

    pub fn is_zero(&self) -> bool {
        self.values.iter().all(|&v| v == 0.0)
    }

    pub fn max_value(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min_value(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// Index of the maximum; ties go to the smallest lexicographic multi-index.
    pub fn argmax_index(&self) -> usize {
        let mut best = 0;
        for (i, &v) in self.values.iter().enumerate() {
            if v > self.values[best] {
                best = i;
            }
        }
        best
    }

    pub fn argmax(&self) -> Vec<f64> {
        self.spec.position(self.argmax_index())
    }

    /// Discrete `L²` pairing `Σ u v h^n`.
    pub fn dot(&self, other: &GridFunction) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a * b)
            .sum::<f64>()
            * self.spec.cell_volume()
    }

    /// `‖u‖²_{L²}`.
    pub fn mass(&self) -> f64 {
        self.dot(self)
    }

    /// `∫_{B(center, radius)} u²`.
    pub fn local_mass(&self, center: &[f64], radius: f64) -> f64 {
        let vol = self.spec.cell_volume();
        (0..self.len())
            .filter(|&i| dist(&self.spec.position(i), center) < radius)
            .map(|i| self.values[i] * self.values[i])
            .sum::<f64>()
            * vol
    }

    /// Same values on a box shifted by `-shift`: the result `w` satisfies `w(x) = u(x + shift)`.
    pub fn recentre(&self, shift: &[f64]) -> Self {
        let center: Vec<f64> = (0..self.spec.dim)
            .map(|a| self.spec.center_coord(a) - shift[a])
            .collect();
        GridFunction {
            spec: self.spec.centered_at(&center),
            values: self.values.clone(),
        }
    }

    /// Multilinear interpolation; zero outside the box.
    pub fn interpolate(&self, x: &[f64]) -> f64 {
        let h = self.spec.spacing();
        let m = self.spec.points;
        let dim = self.spec.dim;
        let mut base = Vec::with_capacity(dim);
        let mut frac = Vec::with_capacity(dim);
        for (axis, &xa) in x.iter().enumerate().take(dim) {
            let s = (xa - self.spec.coord(axis, 0)) / h;
            if !(s >= 0.0 && s <= (m - 1) as f64) {
                return 0.0;
            }
            let i = (s.floor() as usize).min(m - 2);
            base.push(i);
            frac.push(s - i as f64);
        }
        let mut acc = 0.0;
        for corner in 0..(1usize << dim) {
            let mut weight = 1.0;
            let mut linear = 0usize;
            for axis in 0..dim {
                let bit = (corner >> axis) & 1;
                weight *= if bit == 1 { frac[axis] } else { 1.0 - frac[axis] };
                linear = linear * m + base[axis] + bit;
            }
            if weight != 0.0 {
                acc += weight * self.values[linear];
            }
        }
        acc
    }

    /// Largest absolute central-difference gradient squared, summed: `Σ |∇u|² h^n`.
    pub fn gradient_energy(&self) -> f64 {
        let spec = &self.spec;
        let h = spec.spacing();
        let mut total = 0.0;
        for i in 0..self.len() {
            let idx = spec.multi_index(i);
            let mut g2 = 0.0;
            for axis in 0..spec.dim {
                let mut fwd: Vec<i64> = idx.iter().map(|&k| k as i64).collect();
                let mut bwd = fwd.clone();
                fwd[axis] += 1;
                bwd[axis] -= 1;
                let up = spec.linear_index(&fwd).map_or(0.0, |j| self.values[j]);
                let dn = spec.linear_index(&bwd).map_or(0.0, |j| self.values[j]);
                let d = (up - dn) / (2.0 * h);
                g2 += d * d;
            }
            total += g2;
        }
        total * spec.cell_volume()
    }
}

pub(crate) fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

pub(crate) fn norm(a: &[f64]) -> f64 {
    a.iter().map(|x| x * x).sum::<f64>().sqrt()
}

impl Add for &GridFunction {
    type Output = GridFunction;

    fn add(self, rhs: &GridFunction) -> GridFunction {
        assert!(self.spec.same_lattice(&rhs.spec), "grid mismatch in add");
        GridFunction {
            spec: self.spec.clone(),
            values: self.values.iter().zip(&rhs.values).map(|(a, b)| a + b).collect(),
        }
    }
}

impl Sub for &GridFunction {
    type Output = GridFunction;

    fn sub(self, rhs: &GridFunction) -> GridFunction {
        assert!(self.spec.same_lattice(&rhs.spec), "grid mismatch in sub");
        GridFunction {
            spec: self.spec.clone(),
            values: self.values.iter().zip(&rhs.values).map(|(a, b)| a - b).collect(),
        }
    }
}

impl Mul<&GridFunction> for f64 {
    type Output = GridFunction;

    fn mul(self, rhs: &GridFunction) -> GridFunction {
        rhs.scale(self)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spacing_and_positions() {
        let g = GridSpec::new(1, 1.0, 9).unwrap();
        assert_eq!(g.spacing(), 0.25);
        assert_eq!(g.position(0), vec![-1.0]);
        assert_eq!(g.position(8), vec![1.0]);
        let g2 = GridSpec::new(2, 1.0, 9).unwrap();
        assert_eq!(g2.len(), 81);
        assert_eq!(g2.multi_index(10), vec![1, 1]);
        assert_eq!(g2.linear_index(&[1, 1]), Some(10));
        assert_eq!(g2.linear_index(&[-1, 1]), None);
    }

    #[test]
    fn rejects_small_grids() {
        assert!(GridSpec::new(1, 1.0, 7).is_err());
        assert!(GridSpec::new(1, 0.0, 16).is_err());
    }

    #[test]
    fn rejects_non_finite_values() {
        let g = GridSpec::new(1, 1.0, 8).unwrap();
        let mut v = vec![0.0; 8];
        v[3] = f64::NAN;
        assert!(GridFunction::new(g.clone(), v).is_err());
        assert!(GridFunction::new(g, vec![0.0; 3]).is_err());
    }

    #[test]
    fn argmax_ties_break_to_first() {
        let g = GridSpec::new(1, 1.0, 8).unwrap();
        let u = GridFunction::new(g, vec![0., 1., 3., 0., 3., 0., 0., 0.]).unwrap();
        assert_eq!(u.argmax_index(), 2);
    }

    #[test]
    fn arithmetic_is_componentwise() {
        let g = GridSpec::new(1, 1.0, 8).unwrap();
        let u = GridFunction::from_fn(&g, |x| x[0]);
        let v = GridFunction::from_fn(&g, |x| x[0] * x[0]);
        let w = &(&u + &v) - &(2.0 * &u);
        for i in 0..8 {
            assert_eq!(w.values[i], (u.values[i] + v.values[i]) - 2.0 * u.values[i]);
        }
    }

    #[test]
    fn interpolation_is_exact_on_nodes_and_zero_outside() {
        let g = GridSpec::new(2, 1.0, 9).unwrap();
        let u = GridFunction::from_fn(&g, |x| 1.0 + x[0] - 2.0 * x[1]);
        for i in [0, 13, 40, 80] {
            let p = g.position(i);
            assert!((u.interpolate(&p) - u.values[i]).abs() < 1e-14);
        }
        // linear functions are reproduced between nodes
        assert!((u.interpolate(&[0.1, -0.3]) - (1.0 + 0.1 + 0.6)).abs() < 1e-14);
        assert_eq!(u.interpolate(&[1.5, 0.0]), 0.0);
    }

    #[test]
    fn recentre_moves_the_box() {
        let g = GridSpec::new(1, 1.0, 9).unwrap();
        let u = GridFunction::from_fn(&g, |x| x[0]);
        let w = u.recentre(&[0.5]);
        // w(x) = u(x + 0.5)
        assert!((w.interpolate(&[-0.25]) - u.interpolate(&[0.25])).abs() < 1e-14);
    }
}
