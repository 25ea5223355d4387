//! Exact finite-box solves for the killed walk.
//!
//! Everything here is one linear fixed point on a box with absorbing
//! boundary layer (values vanish on the outermost sites):
//!
//! * passage `u(x)`: probability of reaching a target site alive, with
//!   `u(target) = 1` pinned and `u(x) = e^{-V(x)} * (mean of neighbors)`
//!   elsewhere inside;
//! * Green column `g(x, y)`: expected visits to `y` starting from `x`,
//!   `g = e^{-V} (delta_y + mean of neighbors)`;
//! * operator Green `G`: the box solution of `(-Laplacian + W) G = delta_y`,
//!   i.e. `G = (delta_y + mean of neighbors) / (1 + W)`.
//!
//! Starting from zero, the sweeps increase monotonically and converge
//! geometrically (killing and absorption make the iteration a strict
//! contraction), so residuals are honest sup-norm fixed-point defects.
//! In d=1 a direct tridiagonal elimination is available; iterative sweeps
//! on kilometer-long potential-free intervals would need O(R^2) passes.

use alloc::vec::Vec;
use core::fmt;

#[allow(unused_imports)] // test builds resolve f64 math through std instead
use num_traits::Float;

use crate::lattice::Site;
use crate::potential::ScalarField;

#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveMethod {
    Jacobi,
    GaussSeidel,
    /// Tridiagonal elimination; d = 1 only.
    Direct1d,
}

#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct SolveOptions {
    /// Sup-norm residual demanded of the returned field.
    pub tolerance: f64,
    pub max_sweeps: u32,
    pub method: SolveMethod,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions { tolerance: 1e-12, max_sweeps: 500_000, method: SolveMethod::Jacobi }
    }
}

impl SolveOptions {
    pub fn gauss_seidel() -> Self {
        SolveOptions { method: SolveMethod::GaussSeidel, ..Default::default() }
    }

    pub fn direct_1d() -> Self {
        SolveOptions { method: SolveMethod::Direct1d, ..Default::default() }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum SolveError {
    NotConverged { residual: f64, sweeps: u32 },
    TargetNotInterior,
    NegativePotential,
    /// Direct elimination requested outside d = 1.
    DirectNeedsD1,
    /// Return weight at or above 1; impossible with absorption, so a solver
    /// failure.
    GeometricSeriesDiverged { return_weight: f64 },
}

impl fmt::Display for SolveError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SolveError::NotConverged { residual, sweeps } => {
                write!(f, "no convergence after {} sweeps (residual {:e})", sweeps, residual)
            }
            SolveError::TargetNotInterior => write!(f, "target site must be interior to the box"),
            SolveError::NegativePotential => write!(f, "potential values must be >= 0"),
            SolveError::DirectNeedsD1 => write!(f, "direct elimination is implemented for d = 1 only"),
            SolveError::GeometricSeriesDiverged { return_weight } => {
                write!(f, "return weight {} >= 1; geometric series diverges", return_weight)
            }
        }
    }
}

impl core::error::Error for SolveError {}

/// A converged field with its fixed-point defect.
#[derive(Clone, Debug)]
pub struct PassageSolution {
    pub field: ScalarField,
    pub residual: f64,
    pub sweeps_used: u32,
    /// Observed geometric decay factor of the sweep updates.
    pub contraction: Option<f64>,
}

pub type GreenSolution = PassageSolution;

struct Problem<'a> {
    damp: Vec<f64>,
    source: Vec<f64>,
    pinned: Option<usize>,
    field: &'a ScalarField,
}

impl<'a> Problem<'a> {
    fn passage(potential: &'a ScalarField, target: &Site) -> Result<Self, SolveError> {
        let boxr = potential.box_region();
        if !boxr.is_interior(target) {
            return Err(SolveError::TargetNotInterior);
        }
        if potential.min() < 0.0 {
            return Err(SolveError::NegativePotential);
        }
        let damp = potential.values().iter().map(|&v| (-v).exp()).collect();
        Ok(Problem {
            damp,
            source: alloc::vec![0.0; boxr.site_count()],
            pinned: Some(boxr.index_of(target).expect("interior")),
            field: potential,
        })
    }

    fn green(potential: &'a ScalarField, y: &Site) -> Result<Self, SolveError> {
        let boxr = potential.box_region();
        if !boxr.is_interior(y) {
            return Err(SolveError::TargetNotInterior);
        }
        if potential.min() < 0.0 {
            return Err(SolveError::NegativePotential);
        }
        let damp = potential.values().iter().map(|&v| (-v).exp()).collect();
        let mut source = alloc::vec![0.0; boxr.site_count()];
        source[boxr.index_of(y).expect("interior")] = 1.0;
        Ok(Problem { damp, source, pinned: None, field: potential })
    }

    fn operator_green(w: &'a ScalarField, y: &Site) -> Result<Self, SolveError> {
        let boxr = w.box_region();
        if !boxr.is_interior(y) {
            return Err(SolveError::TargetNotInterior);
        }
        if w.min() < 0.0 {
            return Err(SolveError::NegativePotential);
        }
        let damp = w.values().iter().map(|&v| 1.0 / (1.0 + v)).collect();
        let mut source = alloc::vec![0.0; boxr.site_count()];
        source[boxr.index_of(y).expect("interior")] = 1.0;
        Ok(Problem { damp, source, pinned: None, field: w })
    }

    fn solve(&self, opts: &SolveOptions) -> Result<PassageSolution, SolveError> {
        match opts.method {
            SolveMethod::Jacobi => self.sweep(opts, false),
            SolveMethod::GaussSeidel => self.sweep(opts, true),
            SolveMethod::Direct1d => self.direct_1d(opts),
        }
    }

    /// Residual of the current iterate: `sup |F(u) - u|`.
    fn defect(&self, u: &[f64]) -> f64 {
        let boxr = self.field.box_region();
        let strides = boxr.strides();
        let inv = 1.0 / (2.0 * boxr.dimension() as f64);
        let mask = boxr.interior_mask();
        let mut worst = 0.0f64;
        for i in 0..u.len() {
            if !mask[i] || Some(i) == self.pinned {
                continue;
            }
            let mut s = 0.0;
            for &st in &strides {
                s += u[i - st] + u[i + st];
            }
            let fu = self.damp[i] * (self.source[i] + s * inv);
            worst = worst.max((fu - u[i]).abs());
        }
        worst
    }

    fn sweep(&self, opts: &SolveOptions, in_place: bool) -> Result<PassageSolution, SolveError> {
        let boxr = self.field.box_region();
        let n = boxr.site_count();
        let strides = boxr.strides();
        let inv = 1.0 / (2.0 * boxr.dimension() as f64);
        let mask = boxr.interior_mask();
        let mut u = alloc::vec![0.0f64; n];
        if let Some(p) = self.pinned {
            u[p] = 1.0;
        }
        let mut next = u.clone();
        let mut updates: Vec<f64> = Vec::new();
        let mut sweeps = 0u32;
        loop {
            let mut delta = 0.0f64;
            if in_place {
                for i in 0..n {
                    if !mask[i] || Some(i) == self.pinned {
                        continue;
                    }
                    let mut s = 0.0;
                    for &st in &strides {
                        s += u[i - st] + u[i + st];
                    }
                    let fu = self.damp[i] * (self.source[i] + s * inv);
                    delta = delta.max((fu - u[i]).abs());
                    u[i] = fu;
                }
            } else {
                for i in 0..n {
                    if !mask[i] || Some(i) == self.pinned {
                        continue;
                    }
                    let mut s = 0.0;
                    for &st in &strides {
                        s += u[i - st] + u[i + st];
                    }
                    let fu = self.damp[i] * (self.source[i] + s * inv);
                    delta = delta.max((fu - u[i]).abs());
                    next[i] = fu;
                }
                core::mem::swap(&mut u, &mut next);
            }
            sweeps += 1;
            updates.push(delta);
            if delta <= 0.5 * opts.tolerance {
                let residual = self.defect(&u);
                if residual <= opts.tolerance {
                    return Ok(PassageSolution {
                        field: ScalarField::new(boxr.clone(), u),
                        residual,
                        sweeps_used: sweeps,
                        contraction: contraction_estimate(&updates),
                    });
                }
            }
            if sweeps >= opts.max_sweeps {
                return Err(SolveError::NotConverged { residual: self.defect(&u), sweeps });
            }
        }
    }

    fn direct_1d(&self, opts: &SolveOptions) -> Result<PassageSolution, SolveError> {
        let boxr = self.field.box_region();
        if boxr.dimension() != 1 {
            return Err(SolveError::DirectNeedsD1);
        }
        let n = boxr.site_count();
        // interior equation: u_i = damp_i (source_i + (u_{i-1} + u_{i+1}) / 2)
        // forward factors from the left wall, backward from the right wall.
        let mut u = alloc::vec![0.0f64; n];
        match self.pinned {
            Some(t) => {
                // left of the pin: u_i = cl_i u_{i+1} + dl_i, built from u_0 = 0
                let mut cl = alloc::vec![0.0f64; n];
                for i in 1..t {
                    let a = 0.5 * self.damp[i];
                    cl[i] = a / (1.0 - a * cl[i - 1]);
                }
                let mut cr = alloc::vec![0.0f64; n];
                for i in (t + 1..n - 1).rev() {
                    let a = 0.5 * self.damp[i];
                    cr[i] = a / (1.0 - a * cr[i + 1]);
                }
                u[t] = 1.0;
                for i in (1..t).rev() {
                    u[i] = cl[i] * u[i + 1];
                }
                for i in t + 1..n - 1 {
                    u[i] = cr[i] * u[i - 1];
                }
            }
            None => {
                // no pin: pure source problem, Thomas elimination
                // diag 1, off-diagonals -damp_i/2, rhs damp_i * source_i
                let mut c = alloc::vec![0.0f64; n];
                let mut dv = alloc::vec![0.0f64; n];
                for i in 1..n - 1 {
                    let a = 0.5 * self.damp[i];
                    let denom = 1.0 - a * c[i - 1];
                    c[i] = a / denom;
                    dv[i] = (self.damp[i] * self.source[i] + a * dv[i - 1]) / denom;
                }
                u[n - 2] = dv[n - 2];
                for i in (1..n - 2).rev() {
                    u[i] = dv[i] + c[i] * u[i + 1];
                }
            }
        }
        let residual = self.defect(&u);
        if residual > opts.tolerance {
            return Err(SolveError::NotConverged { residual, sweeps: 1 });
        }
        Ok(PassageSolution {
            field: ScalarField::new(boxr.clone(), u),
            residual,
            sweeps_used: 1,
            contraction: None,
        })
    }
}

fn contraction_estimate(updates: &[f64]) -> Option<f64> {
    let n = updates.len();
    if n < 6 {
        return None;
    }
    let tail = &updates[n - 5..];
    if tail.iter().any(|&d| d <= 0.0) {
        return None;
    }
    // geometric mean of the last update ratios
    let mut acc = 0.0;
    for w in tail.windows(2) {
        acc += (w[1] / w[0]).ln();
    }
    Some((acc / 4.0).exp())
}

/// Survival probability field for reaching `target` before dying, absorbing
/// outside; `u(target) = 1`, zero on the boundary layer.
pub fn solve_passage(
    potential: &ScalarField,
    target: &Site,
    opts: &SolveOptions,
) -> Result<PassageSolution, SolveError> {
    Problem::passage(potential, target)?.solve(opts)
}

/// Green's function column `g(., y, V)` on the box.
pub fn solve_green_column(
    potential: &ScalarField,
    y: &Site,
    opts: &SolveOptions,
) -> Result<GreenSolution, SolveError> {
    Problem::green(potential, y)?.solve(opts)
}

/// Box solution `G` of `(-Laplacian + W) G = delta_y`, absorbing outside.
///
/// Satisfies `G = g(., y, ln(W + 1))` to solver tolerance.
pub fn solve_operator_green(
    w: &ScalarField,
    y: &Site,
    opts: &SolveOptions,
) -> Result<GreenSolution, SolveError> {
    Problem::operator_green(w, y)?.solve(opts)
}

/// Outcome of the geometric-series identity check at a site.
#[derive(Clone, Debug)]
pub struct GeometricReturnReport {
    /// Diagonal Green value `g(y, y, V)`.
    pub green_diagonal: f64,
    /// Weight of a return to `y` before absorption or death.
    pub return_weight: f64,
    /// `|g(y,y) (1 - r) - e^{-V(y)}|`.
    pub residual: f64,
}

/// Verifies `g(y, y, V) = e^{-V(y)} / (1 - r)` where `r` is the weight of
/// one killed step from `y` followed by a passage back to `y`.
///
/// Both sides come from independent solves (a Green column and a passage
/// field), so this cross-validates the two solvers.
pub fn geometric_return_check(
    potential: &ScalarField,
    y: &Site,
    opts: &SolveOptions,
) -> Result<GeometricReturnReport, SolveError> {
    let boxr = potential.box_region();
    let g = solve_green_column(potential, y, opts)?;
    let u = solve_passage(potential, y, opts)?;
    let vy = potential.get(y).expect("target inside box");
    let mut s = 0.0;
    for nb in crate::lattice::neighbors(y) {
        s += u.field.get(&nb).unwrap_or(0.0);
    }
    let r = (-vy).exp() * s / (2.0 * boxr.dimension() as f64);
    if r >= 1.0 {
        return Err(SolveError::GeometricSeriesDiverged { return_weight: r });
    }
    let gyy = g.field.get(y).expect("target inside box");
    let residual = (gyy * (1.0 - r) - (-vy).exp()).abs();
    Ok(GeometricReturnReport { green_diagonal: gyy, return_weight: r, residual })
}
