use std::sync::Arc;

use log::warn;
use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::forms::kernel::KernelTable;
use crate::model::grid::{GridFunction, GridSpec};
use crate::model::params::sphere_measure;
use crate::model::scope::ScopeFunction;

/// Which offsets `z` enter the double sum at base point `x`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FormMode {
    /// `|z| < ρ(x)`.
    Regional(ScopeFunction),
    /// Every offset up to the far radius.
    Full,
    /// `inner(x) ≤ |z| < outer`; `outer` may be infinite.
    Complement { inner: ScopeFunction, outer: f64 },
}

impl FormMode {
    /// Membership interval `[lo, hi)` for `|z|` at base point `x`.
    fn interval(&self, x: &[f64]) -> (f64, f64) {
        match self {
            FormMode::Regional(rho) => (0.0, rho.eval(x)),
            FormMode::Full => (0.0, f64::INFINITY),
            FormMode::Complement { inner, outer } => (inner.eval(x), *outer),
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            FormMode::Regional(_) => "regional",
            FormMode::Full => "full",
            FormMode::Complement { .. } => "complement",
        }
    }
}

#[inline]
fn member(interval: (f64, f64), r: f64) -> f64 {
    if interval.0 <= r && r < interval.1 {
        1.0
    } else {
        0.0
    }
}

/// Discrete nonlocal Dirichlet form on a box with zero extension.
///
/// The continuous form is
/// `E(u, v) = ∫ ∫_{D(x)} [u(x+z) - u(x)][v(x+z) - v(x)] |z|^{-n-2α} dz dx`
/// and its discretisation sums over ordered lattice pairs `(x, x + z)` of the
/// infinite lattice `hℤⁿ` with `u = 0` off the box, the core cell `z = 0`
/// excluded and `|z| ≤ R_far`. Pairs with one end outside the box reduce to a
/// diagonal potential, so the whole form is a dense symmetric matrix `A` with
/// `E(u, v) = hⁿ uᵀ A v`.
#[derive(Debug, Clone)]
pub struct NonlocalForm {
    grid: GridSpec,
    alpha: f64,
    mode: FormMode,
    kernel: Arc<KernelTable>,
    matrix: DMatrix<f64>,
}

impl NonlocalForm {
    /// Form with the default far radius `R_far = 2L`.
    pub fn new(grid: &GridSpec, alpha: f64, mode: FormMode) -> Result<Self> {
        Self::with_far_radius(grid, alpha, mode, 2.0 * grid.extent)
    }

    pub fn with_far_radius(grid: &GridSpec, alpha: f64, mode: FormMode, far_radius: f64) -> Result<Self> {
        grid.validate()?;
        let kernel = Arc::new(KernelTable::new(grid.dim, alpha, grid.spacing(), far_radius)?);
        Self::with_kernel(grid, mode, kernel)
    }

    /// Reuses a kernel table built for the same spacing and dimension.
    pub fn with_kernel(grid: &GridSpec, mode: FormMode, kernel: Arc<KernelTable>) -> Result<Self> {
        if kernel.dim != grid.dim || kernel.spacing != grid.spacing() {
            return Err(Error::Shape("kernel table does not match the grid".into()));
        }
        match &mode {
            FormMode::Regional(rho) | FormMode::Complement { inner: rho, .. } => {
                if grid.extent <= 2.0 * rho.rho0() {
                    warn!(
                        "box half-width {} does not exceed 2 rho0 = {}; regional balls leave the box",
                        grid.extent,
                        2.0 * rho.rho0()
                    );
                }
            }
            FormMode::Full => {}
        }
        let matrix = assemble(grid, &mode, &kernel)?;
        Ok(NonlocalForm {
            grid: grid.clone(),
            alpha: kernel.alpha,
            mode,
            kernel,
            matrix,
        })
    }

    pub fn regional(grid: &GridSpec, alpha: f64, rho: &ScopeFunction) -> Result<Self> {
        Self::new(grid, alpha, FormMode::Regional(rho.clone()))
    }

    pub fn full(grid: &GridSpec, alpha: f64) -> Result<Self> {
        Self::new(grid, alpha, FormMode::Full)
    }

    pub fn complement(grid: &GridSpec, alpha: f64, inner: &ScopeFunction, outer: f64) -> Result<Self> {
        Self::new(
            grid,
            alpha,
            FormMode::Complement {
                inner: inner.clone(),
                outer,
            },
        )
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn mode(&self) -> &FormMode {
        &self.mode
    }

    pub fn kernel(&self) -> &Arc<KernelTable> {
        &self.kernel
    }

    pub fn far_radius(&self) -> f64 {
        self.kernel.far_radius
    }

    /// Symmetric matrix `A` with `E(u, v) = hⁿ uᵀ A v`.
    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    fn check(&self, u: &GridFunction) -> Result<()> {
        if self.grid.same_lattice(&u.spec) {
            Ok(())
        } else {
            Err(Error::Shape(format!(
                "form built on {:?}, function sampled on {:?}",
                self.grid, u.spec
            )))
        }
    }

    /// `A v` (rows reduced in a fixed order, independent of thread count).
    pub fn apply_values(&self, v: &[f64]) -> Vec<f64> {
        let n = self.matrix.nrows();
        (0..n)
            .into_par_iter()
            .map(|i| {
                // A is symmetric: row i is the contiguous column i
                let col = self.matrix.column(i);
                col.iter().zip(v).map(|(a, b)| a * b).sum::<f64>()
            })
            .collect()
    }

    pub fn apply(&self, v: &GridFunction) -> Result<GridFunction> {
        self.check(v)?;
        Ok(GridFunction {
            spec: v.spec.clone(),
            values: self.apply_values(&v.values),
        })
    }

    /// `E(u, v)`.
    pub fn eval(&self, u: &GridFunction, v: &GridFunction) -> Result<f64> {
        self.check(u)?;
        self.check(v)?;
        Ok(self.eval_values(&u.values, &v.values))
    }

    pub(crate) fn eval_values(&self, u: &[f64], v: &[f64]) -> f64 {
        let av = self.apply_values(v);
        u.iter().zip(&av).map(|(a, b)| a * b).sum::<f64>() * self.grid.cell_volume()
    }

    /// Upper bound on the omitted pairs with `|z| > R_far` (full form):
    /// `(2|S^{n-1}|/α) R_far^{-2α} ‖u‖²_{L²}`. Reported, never added.
    pub fn tail_bound(&self, u: &GridFunction) -> Result<f64> {
        self.check(u)?;
        let s = sphere_measure(self.grid.dim)?;
        Ok(2.0 * s / self.alpha * self.far_radius().powf(-2.0 * self.alpha) * u.mass())
    }

    /// Estimate of the excluded core cell, `(1/n) Σ |∇u|² hⁿ ∫_{cell(0)} |y|^{2-n-2α} dy`,
    /// which is `O(h^{2-2α})`.
    pub fn core_error(&self, u: &GridFunction) -> Result<f64> {
        self.check(u)?;
        Ok(u.gradient_energy() * self.kernel.core_moment() / self.grid.dim as f64)
    }
}

fn assemble(grid: &GridSpec, mode: &FormMode, kernel: &KernelTable) -> Result<DMatrix<f64>> {
    let n = grid.len();
    let m = grid.points as i64;
    let dim = grid.dim;
    let positions = grid.positions();
    let intervals: Vec<(f64, f64)> = positions.iter().map(|p| mode.interval(p)).collect();

    if let FormMode::Complement { outer, .. } = mode {
        if let Some(bad) = intervals.iter().position(|iv| iv.0 > *outer) {
            return Err(Error::domain(format!(
                "inner scope {} exceeds outer radius {} at {:?}",
                intervals[bad].0, outer, positions[bad]
            )));
        }
    }

    let columns: Vec<Result<Vec<f64>>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let idx: Vec<i64> = grid.multi_index(i).into_iter().map(|k| k as i64).collect();
            let own = intervals[i];
            let mut col = vec![0.0; n];
            let mut diag = 0.0;
            let mut target = vec![0i64; dim];
            for ((k, &r), &w) in kernel.offsets.iter().zip(&kernel.radii).zip(&kernel.weights) {
                let mut inside = true;
                for a in 0..dim {
                    target[a] = idx[a] + k[a];
                    inside &= target[a] >= 0 && target[a] < m;
                }
                let from_here = member(own, r);
                if inside {
                    let j = grid.linear_index(&target).expect("inside");
                    let s = w * (from_here + member(intervals[j], r));
                    col[j] -= s;
                    diag += s;
                } else {
                    let p: Vec<f64> = (0..dim).map(|a| grid.coord(a, target[a])).collect();
                    let there = mode.interval(&p);
                    if let FormMode::Complement { outer, .. } = mode {
                        if there.0 > *outer {
                            return Err(Error::domain(format!(
                                "inner scope {} exceeds outer radius {outer} at {p:?}",
                                there.0
                            )));
                        }
                    }
                    diag += w * (from_here + member(there, r));
                }
            }
            col[i] = diag;
            Ok(col)
        })
        .collect();

    let mut data = Vec::with_capacity(n * n);
    for col in columns {
        data.extend(col?);
    }
    Ok(DMatrix::from_vec(n, n, data))
}

/// `‖u‖_{L^p} = (Σ |u|^p hⁿ)^{1/p}`.
pub fn lp_norm(u: &GridFunction, p: f64) -> Result<f64> {
    if !(p >= 1.0) {
        return Err(Error::domain(format!("L^p norm needs p >= 1, got {p}")));
    }
    let s: f64 = u.values.iter().map(|v| v.abs().powf(p)).sum();
    Ok((s * u.spec.cell_volume()).powf(1.0 / p))
}

pub fn regional_form(u: &GridFunction, v: &GridFunction, rho: &ScopeFunction, alpha: f64) -> Result<f64> {
    u.ensure_same_grid(v)?;
    NonlocalForm::regional(&u.spec, alpha, rho)?.eval(u, v)
}

pub fn full_form(u: &GridFunction, v: &GridFunction, alpha: f64) -> Result<f64> {
    u.ensure_same_grid(v)?;
    NonlocalForm::full(&u.spec, alpha)?.eval(u, v)
}

pub fn complement_form(u: &GridFunction, rho_inner: &ScopeFunction, rho_outer: f64, alpha: f64) -> Result<f64> {
    NonlocalForm::complement(&u.spec, alpha, rho_inner, rho_outer)?.eval(u, u)
}

/// `‖u‖²_ρ = E_ρ(u, u) + ‖u‖²_{L²}`.
pub fn rho_norm_sq(u: &GridFunction, rho: &ScopeFunction, alpha: f64) -> Result<f64> {
    Ok(regional_form(u, u, rho, alpha)? + u.mass())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::scope::ScopeFamily;

    fn grid() -> GridSpec {
        GridSpec::new(1, 3.0, 24).unwrap()
    }

    fn bump(g: &GridSpec) -> GridFunction {
        GridFunction::from_fn(g, |x| (-x[0] * x[0]).exp())
    }

    #[test]
    fn constants_inside_a_full_box_only_see_the_exterior() {
        // a constant has zero interior differences; only the exterior potential remains
        let g = grid();
        let rho = ScopeFunction::from(ScopeFamily::constant(0.5, 0.5, 1.0));
        let form = NonlocalForm::regional(&g, 0.4, &rho).unwrap();
        let c = GridFunction::constant(&g, 2.0);
        let v = bump(&g);
        let direct = form.eval(&c, &v).unwrap();
        // only points within 0.5 of the boundary interact with the exterior
        let h = g.spacing();
        let mut expected = 0.0;
        for i in 0..g.len() {
            let x = g.position(i)[0];
            for (k, (&r, &w)) in form.kernel().offsets.iter().zip(form.kernel().radii.iter().zip(&form.kernel().weights)) {
                let y = x + k[0] as f64 * h;
                if y.abs() > g.extent + 1e-12 && r < 0.5 {
                    expected += 2.0 * w * 2.0 * v.values[i] * h;
                }
            }
        }
        assert!((direct - expected).abs() < 1e-12 * expected.abs().max(1.0));
    }

    #[test]
    fn symmetric_and_psd() {
        let g = grid();
        let rho = ScopeFunction::from(ScopeFamily::well(0.7, 1.5, 1.0));
        let form = NonlocalForm::regional(&g, 0.4, &rho).unwrap();
        let a = form.matrix();
        assert_eq!(a, &a.transpose());
        let u = bump(&g);
        let v = GridFunction::from_fn(&g, |x| x[0].sin());
        let uv = form.eval(&u, &v).unwrap();
        let vu = form.eval(&v, &u).unwrap();
        assert!((uv - vu).abs() < 1e-13 * uv.abs().max(1.0));
        assert!(form.eval(&u, &u).unwrap() > 0.0);
    }

    #[test]
    fn shape_mismatch_is_an_error() {
        let g = grid();
        let other = GridSpec::new(1, 3.0, 25).unwrap();
        let form = NonlocalForm::full(&g, 0.4).unwrap();
        assert!(matches!(
            form.eval(&bump(&g), &bump(&other)),
            Err(Error::Shape(_))
        ));
    }

    #[test]
    fn empty_annulus_vanishes() {
        let g = grid();
        let rho = ScopeFunction::from(ScopeFamily::constant(1.0, 1.0, 2.0));
        assert_eq!(complement_form(&bump(&g), &rho, 1.0, 0.4).unwrap(), 0.0);
        assert!(complement_form(&bump(&g), &rho, 0.5, 0.4).is_err());
        let positive = complement_form(&bump(&g), &rho, 2.0, 0.4).unwrap();
        assert!(positive > 0.0);
    }

    #[test]
    fn lp_norm_of_unit_box() {
        let g = GridSpec::new(1, 1.0, 101).unwrap();
        // trapezoid-free sum: h Σ 1 = h m = 2 + h
        let one = GridFunction::constant(&g, 1.0);
        let h = g.spacing();
        // each node owns a cell of width h, so the box has measure 2L + h
        assert!((lp_norm(&one, 2.0).unwrap() - (2.0 + h).sqrt()).abs() < 1e-14);
        assert!((lp_norm(&one, 2.0).unwrap() - 2f64.sqrt()).abs() < h);
        assert!(lp_norm(&one, 0.5).is_err());
    }

    #[test]
    fn core_error_shrinks_with_refinement() {
        let mut prev = f64::INFINITY;
        for m in [32, 64, 128] {
            let g = GridSpec::new(1, 4.0, m).unwrap();
            let form = NonlocalForm::full(&g, 0.4).unwrap();
            let e = form.core_error(&bump(&g)).unwrap();
            assert!(e < prev);
            prev = e;
        }
    }
}
