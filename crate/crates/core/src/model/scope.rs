use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::grid::{norm, GridSpec};

/// Built-in scope families. All centers default to the origin.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ScopeFamily {
    /// `ρ ≡ value`, declared with bounds `rho0 ≤ value` and limit `rho_inf`.
    Constant { value: f64, rho0: f64, rho_inf: f64 },
    /// Gaussian well `ρ∞ - (ρ∞ - ρ0) exp(-|x - c|²/σ²)`, minimum `ρ0` at `c`.
    RadialWell {
        rho0: f64,
        rho_inf: f64,
        sigma: f64,
        #[serde(default, skip_serializing_if = "Vec::is_empty")]
        center: Vec<f64>,
    },
    /// Lorentzian well `ρ∞ - (ρ∞ - ρ0) σ²/(σ² + |x - c|²)` with algebraic approach to `ρ∞`.
    RadialBump {
        rho0: f64,
        rho_inf: f64,
        sigma: f64,
        #[serde(default, skip_serializing_if = "Vec::is_empty")]
        center: Vec<f64>,
    },
    /// `ρ0 + slope |x|`, unbounded; `a` is the declared asymptotic slope bound.
    LinearGrowth { rho0: f64, slope: f64, a: f64 },
}

fn offset_sq(x: &[f64], center: &[f64]) -> f64 {
    x.iter()
        .enumerate()
        .map(|(i, &xi)| {
            let d = xi - center.get(i).copied().unwrap_or(0.0);
            d * d
        })
        .sum()
}

impl ScopeFamily {
    pub fn constant(value: f64, rho0: f64, rho_inf: f64) -> Self {
        ScopeFamily::Constant {
            value,
            rho0,
            rho_inf,
        }
    }

    pub fn well(rho0: f64, rho_inf: f64, sigma: f64) -> Self {
        ScopeFamily::RadialWell {
            rho0,
            rho_inf,
            sigma,
            center: Vec::new(),
        }
    }

    pub fn shifted_well(rho0: f64, rho_inf: f64, sigma: f64, center: Vec<f64>) -> Self {
        ScopeFamily::RadialWell {
            rho0,
            rho_inf,
            sigma,
            center,
        }
    }

    pub fn bump(rho0: f64, rho_inf: f64, sigma: f64) -> Self {
        ScopeFamily::RadialBump {
            rho0,
            rho_inf,
            sigma,
            center: Vec::new(),
        }
    }

    pub fn linear_growth(rho0: f64, slope: f64, a: f64) -> Self {
        ScopeFamily::LinearGrowth { rho0, slope, a }
    }

    pub fn name(&self) -> &'static str {
        match self {
            ScopeFamily::Constant { .. } => "constant",
            ScopeFamily::RadialWell { .. } => "radial-well",
            ScopeFamily::RadialBump { .. } => "radial-bump",
            ScopeFamily::LinearGrowth { .. } => "linear-growth",
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |field: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::validation(format!("scope.{field}"), format!("{v} must be positive")))
            }
        };
        match *self {
            ScopeFamily::Constant {
                value,
                rho0,
                rho_inf,
            } => {
                positive("rho0", rho0)?;
                positive("value", value)?;
                if value < rho0 || value > rho_inf {
                    return Err(Error::validation(
                        "scope.value",
                        format!("{value} must lie in [rho0, rho_inf] = [{rho0}, {rho_inf}]"),
                    ));
                }
            }
            ScopeFamily::RadialWell {
                rho0,
                rho_inf,
                sigma,
                ..
            }
            | ScopeFamily::RadialBump {
                rho0,
                rho_inf,
                sigma,
                ..
            } => {
                positive("rho0", rho0)?;
                positive("sigma", sigma)?;
                if !(rho_inf > rho0 && rho_inf.is_finite()) {
                    return Err(Error::validation(
                        "scope.rho_inf",
                        format!("{rho_inf} must be finite and above rho0 = {rho0}"),
                    ));
                }
            }
            ScopeFamily::LinearGrowth { rho0, slope, a } => {
                positive("rho0", rho0)?;
                if !(slope >= 0.0 && slope.is_finite()) {
                    return Err(Error::validation("scope.slope", "must be nonnegative"));
                }
                if !(a > 0.0 && a < 1.0) {
                    return Err(Error::validation("scope.a", format!("{a} is not in (0, 1)")));
                }
            }
        }
        Ok(())
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        match self {
            ScopeFamily::Constant { value, .. } => *value,
            ScopeFamily::RadialWell {
                rho0,
                rho_inf,
                sigma,
                center,
            } => rho_inf - (rho_inf - rho0) * (-offset_sq(x, center) / (sigma * sigma)).exp(),
            ScopeFamily::RadialBump {
                rho0,
                rho_inf,
                sigma,
                center,
            } => {
                let s2 = sigma * sigma;
                rho_inf - (rho_inf - rho0) * s2 / (s2 + offset_sq(x, center))
            }
            ScopeFamily::LinearGrowth { rho0, slope, .. } => rho0 + slope * norm(x),
        }
    }

    /// `ln(ρ∞ - ρ(x))`, computed without cancellation; `-inf` when `ρ(x) = ρ∞`.
    fn log_deficit(&self, x: &[f64]) -> f64 {
        match self {
            ScopeFamily::Constant { value, rho_inf, .. } => (rho_inf - value).ln(),
            ScopeFamily::RadialWell {
                rho0,
                rho_inf,
                sigma,
                center,
            } => (rho_inf - rho0).ln() - offset_sq(x, center) / (sigma * sigma),
            ScopeFamily::RadialBump {
                rho0,
                rho_inf,
                sigma,
                center,
            } => {
                let s2 = sigma * sigma;
                (rho_inf - rho0).ln() + s2.ln() - (s2 + offset_sq(x, center)).ln()
            }
            ScopeFamily::LinearGrowth { .. } => f64::INFINITY,
        }
    }

    pub fn rho0(&self) -> f64 {
        match *self {
            ScopeFamily::Constant { rho0, .. }
            | ScopeFamily::RadialWell { rho0, .. }
            | ScopeFamily::RadialBump { rho0, .. }
            | ScopeFamily::LinearGrowth { rho0, .. } => rho0,
        }
    }

    pub fn rho_inf(&self) -> f64 {
        match *self {
            ScopeFamily::Constant { rho_inf, .. }
            | ScopeFamily::RadialWell { rho_inf, .. }
            | ScopeFamily::RadialBump { rho_inf, .. } => rho_inf,
            ScopeFamily::LinearGrowth { .. } => f64::INFINITY,
        }
    }
}

/// Scope function `x ↦ f(s x + b) / s` for a base family `f`.
///
/// The affine wrapper expresses the rescalings `ρ(εx + εz)/ε` without
/// copying the family; `s = 1, b = 0` is the family itself.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScopeFunction {
    pub family: ScopeFamily,
    pub scale: f64,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub shift: Vec<f64>,
}

impl From<ScopeFamily> for ScopeFunction {
    fn from(family: ScopeFamily) -> Self {
        ScopeFunction {
            family,
            scale: 1.0,
            shift: Vec::new(),
        }
    }
}

impl ScopeFunction {
    fn base_point(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .enumerate()
            .map(|(i, &xi)| self.scale * xi + self.shift.get(i).copied().unwrap_or(0.0))
            .collect()
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        if self.scale == 1.0 && self.shift.is_empty() {
            return self.family.eval(x);
        }
        self.family.eval(&self.base_point(x)) / self.scale
    }

    pub fn rho0(&self) -> f64 {
        self.family.rho0() / self.scale
    }

    pub fn rho_inf(&self) -> f64 {
        self.family.rho_inf() / self.scale
    }

    pub fn is_unbounded(&self) -> bool {
        self.rho_inf().is_infinite()
    }

    /// Declared asymptotic slope bound `a` (only for unbounded scopes; invariant under rescaling).
    pub fn slope_bound(&self) -> Option<f64> {
        match self.family {
            ScopeFamily::LinearGrowth { a, .. } => Some(a),
            _ => None,
        }
    }

    pub fn is_constant(&self) -> bool {
        matches!(self.family, ScopeFamily::Constant { .. })
    }

    /// `ρ(x) < ρ∞`, decided without rounding `ρ` to `ρ∞` far out.
    pub fn strictly_below_limit(&self, x: &[f64]) -> bool {
        if self.is_unbounded() {
            return true;
        }
        self.family.log_deficit(&self.base_point(x)) > f64::NEG_INFINITY
    }

    /// Radius beyond which `ρ(x + r e) < r` for every unit direction `e`.
    pub fn reach(&self, x: &[f64]) -> Option<f64> {
        match self.family {
            ScopeFamily::Constant { value, .. } => Some(value / self.scale),
            ScopeFamily::RadialWell { .. } | ScopeFamily::RadialBump { .. } => Some(self.rho_inf()),
            ScopeFamily::LinearGrowth { rho0, slope, .. } => {
                if slope >= 1.0 {
                    return None;
                }
                // ρ(x + r e) ≤ ρ0/s + slope (|x| + |b|/s) + slope r
                let b = norm(&self.shift) / self.scale;
                Some((rho0 / self.scale + slope * (norm(x) + b)) / (1.0 - slope))
            }
        }
    }

    /// `x ↦ ρ(εx + εz)/ε`.
    pub fn rescale(&self, eps: f64, z: &[f64]) -> ScopeFunction {
        let dim = z.len().max(self.shift.len());
        let shift = (0..dim)
            .map(|i| {
                self.scale * eps * z.get(i).copied().unwrap_or(0.0)
                    + self.shift.get(i).copied().unwrap_or(0.0)
            })
            .collect();
        ScopeFunction {
            family: self.family.clone(),
            scale: self.scale * eps,
            shift,
        }
    }

    /// Constant scope `ρ ≡ ρ∞` of this function (finite `ρ∞` only).
    pub fn limit_constant(&self) -> Option<ScopeFunction> {
        let r = self.rho_inf();
        r.is_finite()
            .then(|| ScopeFunction::from(ScopeFamily::constant(r, r, r)))
    }
}

/// Outcome of sampling a scope against its structural hypotheses.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HypothesisReport {
    /// `ρ0 ≤ ρ(x) < ρ∞` at every sample.
    pub rho1: bool,
    /// `ρ(x)/|x| ≤ a + tol` for sampled `|x| ≥ R_check`; `None` when `ρ∞` is finite.
    pub rho3: Option<bool>,
    /// The surface-regularity condition is never checked.
    pub rho2_checked: bool,
    /// Sampled modulus of continuity shrinks under refinement.
    pub continuous: bool,
    pub sampled_min: f64,
    pub sampled_max: f64,
    pub samples: usize,
}

pub const RHO3_TOLERANCE: f64 = 0.05;

fn directions(dim: usize) -> Vec<Vec<f64>> {
    match dim {
        1 => vec![vec![1.0], vec![-1.0]],
        2 => (0..16)
            .map(|k| {
                let t = k as f64 * std::f64::consts::PI / 8.0;
                vec![t.cos(), t.sin()]
            })
            .collect(),
        _ => (0..dim)
            .flat_map(|a| {
                [1.0, -1.0].into_iter().map(move |s| {
                    let mut e = vec![0.0; dim];
                    e[a] = s;
                    e
                })
            })
            .collect(),
    }
}

/// Samples `rho` on the grid and on rays out to `10 L`.
pub fn check_hypotheses(rho: &ScopeFunction, grid: &GridSpec) -> HypothesisReport {
    let rho0 = rho.rho0();
    let rho_inf = rho.rho_inf();
    let r_far = 10.0 * grid.extent;
    let mut points: Vec<Vec<f64>> = grid.positions();
    let dirs = directions(grid.dim);
    const RAY_SAMPLES: usize = 400;
    for e in &dirs {
        for k in 0..=RAY_SAMPLES {
            let r = r_far * k as f64 / RAY_SAMPLES as f64;
            points.push(e.iter().map(|c| c * r).collect());
        }
    }

    let mut rho1 = true;
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for p in &points {
        let v = rho.eval(p);
        lo = lo.min(v);
        hi = hi.max(v);
        if !(v >= rho0 && v <= rho_inf && rho.strictly_below_limit(p)) {
            rho1 = false;
        }
    }

    let rho3 = rho.slope_bound().map(|a| {
        let r_check = grid.extent;
        dirs.iter().all(|e| {
            (0..=RAY_SAMPLES).all(|k| {
                let r = r_check + (r_far - r_check) * k as f64 / RAY_SAMPLES as f64;
                let p: Vec<f64> = e.iter().map(|c| c * r).collect();
                rho.eval(&p) / r <= a + RHO3_TOLERANCE
            })
        })
    });

    // the largest jump between consecutive ray samples must shrink when the spacing is quartered
    let max_jump = |samples: usize| {
        let mut jump: f64 = 0.0;
        for e in &dirs {
            let mut prev = rho.eval(&vec![0.0; grid.dim]);
            for k in 1..=samples {
                let r = r_far * k as f64 / samples as f64;
                let p: Vec<f64> = e.iter().map(|c| c * r).collect();
                let v = rho.eval(&p);
                jump = jump.max((v - prev).abs());
                prev = v;
            }
        }
        jump
    };
    let coarse = max_jump(RAY_SAMPLES);
    let fine = max_jump(4 * RAY_SAMPLES);
    let continuous = coarse.is_finite() && (coarse < 1e-12 || fine <= 0.75 * coarse);

    HypothesisReport {
        rho1,
        rho3,
        rho2_checked: false,
        continuous,
        sampled_min: lo,
        sampled_max: hi,
        samples: points.len(),
    }
}
