//! Finite-difference solver for `Δu + ∇h·∇u = f(|x|, u)` on an annulus
//! `r_in < |x| < r_out` with Dirichlet data.
//!
//! In two dimensions the full polar operator
//! `u_rr + ((n-1)/r + h'(r)) u_r + u_θθ / r²` is discretised on a uniform
//! `(r, θ)` grid; in any dimension a single angle (`n_theta = 1`) gives the
//! radial operator. The nonlinear system is solved by damped Newton with a
//! block-tridiagonal (ring by ring) elimination.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{ensure, Error, Result};
use crate::exprdsl::ExprAst;
use crate::transform::{ProblemSpec, RadialProfile};

/// Uniform polar grid: `nr` intervals in `r` (nodes `0..=nr`) and `n_theta`
/// periodic angles.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AnnulusGrid {
    pub r_in: f64,
    pub r_out: f64,
    pub nr: usize,
    pub n_theta: usize,
}

impl AnnulusGrid {
    pub fn new(r_in: f64, r_out: f64, nr: usize, n_theta: usize) -> Result<Self> {
        let grid = Self {
            r_in,
            r_out,
            nr,
            n_theta,
        };
        grid.validate()?;
        Ok(grid)
    }

    pub fn validate(&self) -> Result<()> {
        ensure(
            0.0 < self.r_in && self.r_in < self.r_out && self.r_out.is_finite(),
            || format!("need 0 < r_in < r_out, got [{}, {}]", self.r_in, self.r_out),
        )?;
        ensure(self.nr >= 8, || {
            format!("nr = {} must be at least 8", self.nr)
        })?;
        ensure(self.n_theta == 1 || self.n_theta >= 8, || {
            format!("n_theta = {} must be 1 or at least 8", self.n_theta)
        })
    }

    /// True for the one-angle radial discretisation.
    pub fn is_radial(&self) -> bool {
        self.n_theta == 1
    }

    pub fn dr(&self) -> f64 {
        (self.r_out - self.r_in) / self.nr as f64
    }

    pub fn radius(&self, i: usize) -> f64 {
        if i == self.nr {
            self.r_out
        } else {
            self.r_in + i as f64 * self.dr()
        }
    }

    pub fn radii(&self) -> Vec<f64> {
        (0..=self.nr).map(|i| self.radius(i)).collect()
    }

    pub fn angle(&self, j: usize) -> f64 {
        2.0 * PI * j as f64 / self.n_theta as f64
    }

    pub fn angles(&self) -> Vec<f64> {
        (0..self.n_theta).map(|j| self.angle(j)).collect()
    }

    fn nodes(&self) -> usize {
        (self.nr + 1) * self.n_theta
    }
}

/// Dirichlet data on one boundary circle.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(untagged)]
pub enum BoundaryData {
    Value(f64),
    /// One value per grid angle.
    Table(Vec<f64>),
}

impl BoundaryData {
    fn at(&self, j: usize) -> f64 {
        match self {
            BoundaryData::Value(v) => *v,
            BoundaryData::Table(t) => t[j],
        }
    }

    fn check(&self, n_theta: usize, which: &str) -> Result<()> {
        match self {
            BoundaryData::Value(v) => {
                ensure(v.is_finite(), || format!("{which} value {v} is not finite"))
            }
            BoundaryData::Table(t) => {
                ensure(t.len() == n_theta, || {
                    format!("{which} table has {} entries for {n_theta} angles", t.len())
                })?;
                ensure(t.iter().all(|v| v.is_finite()), || {
                    format!("{which} table is not finite")
                })
            }
        }
    }

    fn range(&self) -> (f64, f64) {
        match self {
            BoundaryData::Value(v) => (*v, *v),
            BoundaryData::Table(t) => t
                .iter()
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| {
                    (a.min(v), b.max(v))
                }),
        }
    }
}

/// Newton starting point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", content = "eps", rename_all = "snake_case")]
pub enum Init {
    /// Linear interpolation of the boundary data in `r`.
    Radial,
    /// Radial start plus `eps sin θ sin(π (r - r_in) / (r_out - r_in))`.
    Perturbed(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OracleControl {
    /// Target sup-norm of the discrete residual (raised to the rounding
    /// level of the difference quotients when that is larger).
    pub tol: f64,
    pub max_newton: usize,
    pub max_halvings: usize,
}

impl Default for OracleControl {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            max_newton: 60,
            max_halvings: 30,
        }
    }
}

/// Nodal solution `u[i * n_theta + j] = u(r_i, θ_j)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AnnulusSolution {
    pub grid: AnnulusGrid,
    pub u: Vec<f64>,
    pub residual: f64,
    /// Residual target actually used.
    pub tolerance: f64,
    pub iterations: usize,
    /// `max_θ u - min_θ u` per ring.
    pub theta_variation: Vec<f64>,
    /// Ring averages of `u`.
    pub radial_profile: Vec<f64>,
}

impl AnnulusSolution {
    /// Wrap a nodal field (no solve; residual and iterations are zero).
    pub fn from_field(grid: AnnulusGrid, u: Vec<f64>) -> Result<Self> {
        grid.validate()?;
        ensure(u.len() == grid.nodes(), || {
            format!("field has {} values for {} nodes", u.len(), grid.nodes())
        })?;
        Ok(Self::assemble(grid, u, 0.0, 0.0, 0))
    }

    fn assemble(
        grid: AnnulusGrid,
        u: Vec<f64>,
        residual: f64,
        tolerance: f64,
        iterations: usize,
    ) -> Self {
        let nt = grid.n_theta;
        let theta_variation = u
            .chunks(nt)
            .map(|ring| {
                let (lo, hi) = ring
                    .iter()
                    .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| {
                        (a.min(v), b.max(v))
                    });
                hi - lo
            })
            .collect();
        let radial_profile = u
            .chunks(nt)
            .map(|ring| ring.iter().sum::<f64>() / nt as f64)
            .collect();
        Self {
            grid,
            u,
            residual,
            tolerance,
            iterations,
            theta_variation,
            radial_profile,
        }
    }

    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.u[i * self.grid.n_theta + j]
    }

    /// Ring averages as a resampleable profile.
    pub fn profile(&self) -> Result<RadialProfile> {
        RadialProfile::new(self.grid.radii(), self.radial_profile.clone())
    }
}

struct Operator<'a> {
    spec: &'a ProblemSpec,
    grid: AnnulusGrid,
    rhs_override: Option<&'a ExprAst>,
    // per ring: coefficient of u_{i-1}, u_{i+1}, and of the θ neighbours
    lower: Vec<f64>,
    upper: Vec<f64>,
    theta: Vec<f64>,
    centre: Vec<f64>,
}

impl<'a> Operator<'a> {
    fn new(
        spec: &'a ProblemSpec,
        grid: AnnulusGrid,
        rhs_override: Option<&'a ExprAst>,
    ) -> Result<Self> {
        let dr = grid.dr();
        let inv_dr2 = 1.0 / (dr * dr);
        let dtheta = 2.0 * PI / grid.n_theta as f64;
        let nr = grid.nr;
        let (mut lower, mut upper, mut theta, mut centre) = (
            vec![0.0; nr + 1],
            vec![0.0; nr + 1],
            vec![0.0; nr + 1],
            vec![0.0; nr + 1],
        );
        for i in 1..nr {
            let r = grid.radius(i);
            let a = (spec.n as f64 - 1.0) / r + spec.h_prime(r)?;
            lower[i] = inv_dr2 - a / (2.0 * dr);
            upper[i] = inv_dr2 + a / (2.0 * dr);
            theta[i] = if grid.is_radial() {
                0.0
            } else {
                1.0 / (r * r * dtheta * dtheta)
            };
            centre[i] = -2.0 * inv_dr2 - 2.0 * theta[i];
        }
        Ok(Self {
            spec,
            grid,
            rhs_override,
            lower,
            upper,
            theta,
            centre,
        })
    }

    fn source(&self, r: f64, u: f64) -> Result<f64> {
        match self.rhs_override {
            Some(rhs) => Ok(rhs.eval_at(&[r])?),
            None => self.spec.f(r, u),
        }
    }

    fn source_s(&self, r: f64, u: f64) -> Result<f64> {
        match self.rhs_override {
            Some(_) => Ok(0.0),
            None => Ok(self
                .spec
                .f
                .derivative_at(1, &mut [r, u], 1e-6 * u.abs().max(1.0))?),
        }
    }

    fn ring_residual(&self, u: &[f64], i: usize) -> Result<Vec<f64>> {
        let nt = self.grid.n_theta;
        let r = self.grid.radius(i);
        let row = |k: usize, j: usize| u[k * nt + j];
        (0..nt)
            .map(|j| {
                let c = row(i, j);
                let mut lap = self.lower[i] * row(i - 1, j)
                    + self.upper[i] * row(i + 1, j)
                    + self.centre[i] * c;
                if !self.grid.is_radial() {
                    let jm = (j + nt - 1) % nt;
                    let jp = (j + 1) % nt;
                    lap += self.theta[i] * (row(i, jm) + row(i, jp));
                }
                Ok(lap - self.source(r, c)?)
            })
            .collect()
    }

    /// Residual on interior rings, zero on the boundary rings.
    fn residual(&self, u: &[f64]) -> Result<Vec<f64>> {
        let nt = self.grid.n_theta;
        let rings = (1..self.grid.nr)
            .into_par_iter()
            .map(|i| self.ring_residual(u, i))
            .collect::<Result<Vec<_>>>()?;
        let mut out = vec![0.0; u.len()];
        for (k, ring) in rings.into_iter().enumerate() {
            out[(k + 1) * nt..(k + 2) * nt].copy_from_slice(&ring);
        }
        Ok(out)
    }

    /// Solve `J δ = -res` by block elimination over the interior rings.
    fn newton_step(&self, u: &[f64], res: &[f64]) -> Result<Vec<f64>> {
        let nt = self.grid.n_theta;
        let nr = self.grid.nr;
        let mut c_blocks: Vec<DMatrix<f64>> = Vec::with_capacity(nr);
        let mut d_blocks: Vec<DVector<f64>> = Vec::with_capacity(nr);
        for i in 1..nr {
            let r = self.grid.radius(i);
            let mut m = DMatrix::<f64>::zeros(nt, nt);
            for j in 0..nt {
                m[(j, j)] = self.centre[i] - self.source_s(r, u[i * nt + j])?;
                if !self.grid.is_radial() {
                    m[(j, (j + 1) % nt)] += self.theta[i];
                    m[(j, (j + nt - 1) % nt)] += self.theta[i];
                }
            }
            let mut rhs = DVector::from_iterator(nt, (0..nt).map(|j| -res[i * nt + j]));
            if i > 1 {
                let l = self.lower[i];
                m -= &c_blocks[i - 2] * l;
                rhs -= &d_blocks[i - 2] * l;
            }
            let lu = m.lu();
            let singular =
                || Error::NewtonDivergence(format!("singular Jacobian block at ring {i}"));
            let c = lu
                .solve(&(DMatrix::<f64>::identity(nt, nt) * self.upper[i]))
                .ok_or_else(singular)?;
            let d = lu.solve(&rhs).ok_or_else(singular)?;
            c_blocks.push(c);
            d_blocks.push(d);
        }
        let mut delta = vec![0.0; u.len()];
        let mut next = DVector::<f64>::zeros(nt);
        for i in (1..nr).rev() {
            let k = i - 1;
            let x = &d_blocks[k] - &c_blocks[k] * &next;
            delta[i * nt..(i + 1) * nt].copy_from_slice(x.as_slice());
            next = x;
        }
        Ok(delta)
    }
}

fn sup(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

// f_s >= 0 sampled on every interior radius over [0, 2 max|data|].
fn check_monotone_source(spec: &ProblemSpec, grid: &AnnulusGrid, top: f64) -> Result<()> {
    let top = 2.0 * top.max(1e-3);
    for i in 1..grid.nr {
        let r = grid.radius(i);
        for k in 0..=16 {
            let s = top * k as f64 / 16.0;
            let fs = spec.f.derivative_at(1, &mut [r, s], 1e-6 * s.max(1.0))?;
            let scale = spec.f(r, s)?.abs().max(1.0);
            ensure(fs >= -1e-8 * scale, || {
                format!("f_s(r = {r}, s = {s}) = {fs} is negative; the discrete problem is not monotone")
            })?;
        }
    }
    Ok(())
}

/// Solve the Dirichlet problem on the annulus.
///
/// `rhs_override(r)` replaces `f(r, u)` (for manufactured solutions).
pub fn solve_annulus(
    spec: &ProblemSpec,
    grid: &AnnulusGrid,
    bc_in: &BoundaryData,
    bc_out: &BoundaryData,
    init: Init,
    rhs_override: Option<&ExprAst>,
    ctrl: &OracleControl,
) -> Result<AnnulusSolution> {
    grid.validate()?;
    ensure(grid.is_radial() || spec.n == 2, || {
        format!(
            "full polar mode needs n = 2 (got n = {}); use n_theta = 1",
            spec.n
        )
    })?;
    ensure(grid.r_in >= spec.r0, || {
        format!("r_in = {} is below r0 = {}", grid.r_in, spec.r0)
    })?;
    ensure(ctrl.tol > 0.0, || {
        "oracle tolerance must be positive".into()
    })?;
    bc_in.check(grid.n_theta, "inner boundary")?;
    bc_out.check(grid.n_theta, "outer boundary")?;
    if let Some(rhs) = rhs_override {
        ensure(rhs.vars().len() == 1, || {
            format!(
                "right-hand side override `{}` must depend on r only",
                rhs.source()
            )
        })?;
    }
    let (lo_in, hi_in) = bc_in.range();
    let (lo_out, hi_out) = bc_out.range();
    let top = [lo_in, hi_in, lo_out, hi_out]
        .iter()
        .fold(0.0f64, |m, v| m.max(v.abs()));
    if rhs_override.is_none() {
        check_monotone_source(spec, grid, top)?;
    }

    let nt = grid.n_theta;
    let nr = grid.nr;
    let mut u = vec![0.0; grid.nodes()];
    for i in 0..=nr {
        let w = i as f64 / nr as f64;
        for j in 0..nt {
            let mut v = (1.0 - w) * bc_in.at(j) + w * bc_out.at(j);
            if let Init::Perturbed(eps) = init {
                v += eps * grid.angle(j).sin() * (PI * w).sin();
            }
            u[i * nt + j] = v;
        }
    }
    // boundary rings exactly as given
    for j in 0..nt {
        u[j] = bc_in.at(j);
        u[nr * nt + j] = bc_out.at(j);
    }

    let op = Operator::new(spec, *grid, rhs_override)?;
    let dr = grid.dr();
    let dtheta = 2.0 * PI / nt as f64;
    let stencil = 4.0 / (dr * dr)
        + if grid.is_radial() {
            0.0
        } else {
            4.0 / (grid.r_in * grid.r_in * dtheta * dtheta)
        };
    let floor = |u: &[f64]| 1e3 * f64::EPSILON * sup(u).max(1.0) * stencil;

    let mut res = op.residual(&u)?;
    let mut norm = sup(&res);
    let mut target = ctrl.tol.max(floor(&u));
    let mut iterations = 0;
    let mut polished = false;
    while iterations < ctrl.max_newton {
        if norm <= target {
            if polished {
                break;
            }
            polished = true;
        }
        iterations += 1;
        let delta = op.newton_step(&u, &res)?;
        let mut alpha = 1.0;
        let mut accepted = false;
        for _ in 0..=ctrl.max_halvings {
            let trial: Vec<f64> = u.iter().zip(&delta).map(|(a, d)| a + alpha * d).collect();
            if let Ok(r) = op.residual(&trial) {
                let rn = sup(&r);
                if rn < norm || rn <= floor(&trial) {
                    u = trial;
                    res = r;
                    norm = rn;
                    accepted = true;
                    break;
                }
            }
            alpha *= 0.5;
        }
        target = ctrl.tol.max(floor(&u));
        if !accepted {
            if norm <= target {
                break;
            }
            return Err(Error::NewtonDivergence(format!(
                "line search failed at residual {norm:e} after {iterations} iterations"
            )));
        }
    }
    if norm > target {
        return Err(Error::NewtonDivergence(format!(
            "residual {norm:e} above {target:e} after {} iterations",
            ctrl.max_newton
        )));
    }
    Ok(AnnulusSolution::assemble(
        *grid, u, norm, target, iterations,
    ))
}

/// Angular variation of a polar solution.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SymmetryReport {
    pub per_ring: Vec<f64>,
    pub global: f64,
}

pub fn symmetry_deviation(sol: &AnnulusSolution) -> Result<SymmetryReport> {
    if sol.grid.is_radial() {
        return Err(Error::WrongMode);
    }
    let per_ring = sol.theta_variation.clone();
    let global = per_ring.iter().copied().fold(0.0, f64::max);
    Ok(SymmetryReport { per_ring, global })
}

/// `max |u_grid - u_profile| / max(1, |u_profile|)` over all nodes.
pub fn compare_with_radial(sol: &AnnulusSolution, profile: &RadialProfile) -> Result<f64> {
    let (lo, hi) = profile.domain();
    let slack = 1e-12 * hi.abs().max(1.0);
    if lo > sol.grid.r_in + slack || hi < sol.grid.r_out - slack {
        return Err(Error::RangeMismatch(format!(
            "profile covers [{lo}, {hi}], grid needs [{}, {}]",
            sol.grid.r_in, sol.grid.r_out
        )));
    }
    let nt = sol.grid.n_theta;
    let mut worst: f64 = 0.0;
    for i in 0..=sol.grid.nr {
        let r = sol.grid.radius(i).clamp(lo, hi);
        let reference = profile.sample(r)?;
        for j in 0..nt {
            let dev = (sol.u[i * nt + j] - reference).abs() / reference.abs().max(1.0);
            worst = worst.max(dev);
        }
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exprdsl::parse_expr;

    fn spec2(h: &str, f: &str) -> ProblemSpec {
        ProblemSpec::new(2, h, f, None, 1.0, 1.0).unwrap()
    }

    fn manufactured(nr: usize, nt: usize, exact: impl Fn(f64) -> f64, rhs: &str) -> f64 {
        let spec = spec2("r", "s^3");
        let grid = AnnulusGrid::new(1.0, 2.0, nr, nt).unwrap();
        let rhs = parse_expr(rhs, &["r"]).unwrap();
        let sol = solve_annulus(
            &spec,
            &grid,
            &BoundaryData::Value(exact(1.0)),
            &BoundaryData::Value(exact(2.0)),
            Init::Radial,
            Some(&rhs),
            &OracleControl::default(),
        )
        .unwrap();
        let mut worst: f64 = 0.0;
        for i in 0..=nr {
            for j in 0..nt {
                worst = worst.max((sol.at(i, j) - exact(grid.radius(i))).abs());
            }
        }
        worst
    }

    #[test]
    fn manufactured_quadratic_is_exact() {
        // u = r^2, n = 2, h = r: Δu = 4, h' u_r = 2r
        let err = manufactured(32, 32, |r| r * r, "4 + 2*r");
        assert!(err < 1e-8, "{err:e}");
    }

    #[test]
    fn manufactured_cubic_converges_second_order() {
        // u = r^3: u_rr + u_r / r + u_r = 9r + 3r^2
        let coarse = manufactured(16, 8, |r| r.powi(3), "9*r + 3*r^2");
        let fine = manufactured(32, 16, |r| r.powi(3), "9*r + 3*r^2");
        assert!(coarse / fine >= 3.5, "ratio {}", coarse / fine);
    }

    fn nonlinear_spec() -> ProblemSpec {
        spec2("0", "r^(-3)*s^3 + 1")
    }

    #[test]
    fn radial_data_gives_radial_solution() {
        let grid = AnnulusGrid::new(1.0, 2.0, 24, 16).unwrap();
        let ctrl = OracleControl::default();
        let two = BoundaryData::Value(2.0);
        let radial = solve_annulus(
            &nonlinear_spec(),
            &grid,
            &two,
            &two,
            Init::Radial,
            None,
            &ctrl,
        )
        .unwrap();
        assert!(radial.theta_variation.iter().all(|&v| v < 1e-10));
        assert!(radial.residual <= radial.tolerance);

        let perturbed = solve_annulus(
            &nonlinear_spec(),
            &grid,
            &two,
            &two,
            Init::Perturbed(0.5),
            None,
            &ctrl,
        )
        .unwrap();
        let diff = radial
            .u
            .iter()
            .zip(&perturbed.u)
            .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        assert!(diff < 10.0 * ctrl.tol, "{diff:e}");
        assert!(symmetry_deviation(&perturbed).unwrap().global < 1e-8);
    }

    #[test]
    fn symmetry_of_given_fields() {
        let grid = AnnulusGrid::new(1.0, 2.0, 8, 16).unwrap();
        let radial: Vec<f64> = (0..=8).flat_map(|i| vec![grid.radius(i); 16]).collect();
        let sol = AnnulusSolution::from_field(grid, radial).unwrap();
        assert_eq!(symmetry_deviation(&sol).unwrap().global, 0.0);

        let wavy: Vec<f64> = (0..=8)
            .flat_map(|i| (0..16).map(move |j| (i, j)))
            .map(|(i, j)| grid.radius(i) + 1e-3 * grid.angle(j).sin())
            .collect();
        let sol = AnnulusSolution::from_field(grid, wavy).unwrap();
        assert!((symmetry_deviation(&sol).unwrap().global - 2e-3).abs() < 1e-12);

        let line = AnnulusGrid::new(1.0, 2.0, 8, 1).unwrap();
        let sol = AnnulusSolution::from_field(line, vec![0.0; 9]).unwrap();
        assert_eq!(symmetry_deviation(&sol), Err(Error::WrongMode));
    }

    #[test]
    fn rotation_equivariance() {
        let grid = AnnulusGrid::new(1.0, 2.0, 16, 16).unwrap();
        let table: Vec<f64> = grid
            .angles()
            .iter()
            .map(|t| 2.0 + 0.5 * t.cos() + 0.2 * (2.0 * t).sin())
            .collect();
        let mut rotated = table.clone();
        rotated.rotate_right(1);
        let ctrl = OracleControl::default();
        let out = BoundaryData::Value(3.0);
        let a = solve_annulus(
            &nonlinear_spec(),
            &grid,
            &BoundaryData::Table(table),
            &out,
            Init::Radial,
            None,
            &ctrl,
        )
        .unwrap();
        let b = solve_annulus(
            &nonlinear_spec(),
            &grid,
            &BoundaryData::Table(rotated),
            &out,
            Init::Radial,
            None,
            &ctrl,
        )
        .unwrap();
        for i in 0..=16 {
            for j in 0..16 {
                assert!((a.at(i, j) - b.at(i, (j + 1) % 16)).abs() < 10.0 * ctrl.tol);
            }
        }
        assert!(symmetry_deviation(&a).unwrap().global > 0.1);
    }

    #[test]
    fn boundary_data_ordering() {
        let grid = AnnulusGrid::new(1.0, 2.0, 16, 8).unwrap();
        let ctrl = OracleControl::default();
        let solve = |a: f64, b: f64| {
            solve_annulus(
                &nonlinear_spec(),
                &grid,
                &BoundaryData::Value(a),
                &BoundaryData::Value(b),
                Init::Radial,
                None,
                &ctrl,
            )
            .unwrap()
        };
        for ((a, b), (c, d)) in [
            ((1.0, 1.0), (2.0, 1.0)),
            ((1.0, 2.0), (1.0, 3.0)),
            ((0.5, 0.5), (4.0, 4.0)),
        ] {
            let low = solve(a, b);
            let high = solve(c, d);
            assert!(low.u.iter().zip(&high.u).all(|(x, y)| x <= y));
        }
    }

    #[test]
    fn preconditions() {
        let spec3 = ProblemSpec::new(3, "0", "s^3", None, 1.0, 1.0).unwrap();
        let grid = AnnulusGrid::new(1.0, 2.0, 16, 8).unwrap();
        let one = BoundaryData::Value(1.0);
        let ctrl = OracleControl::default();
        assert!(matches!(
            solve_annulus(&spec3, &grid, &one, &one, Init::Radial, None, &ctrl),
            Err(Error::Precondition(_))
        ));
        let decreasing = spec2("0", "-s^3");
        assert!(matches!(
            solve_annulus(&decreasing, &grid, &one, &one, Init::Radial, None, &ctrl),
            Err(Error::Precondition(_))
        ));
        assert!(AnnulusGrid::new(1.0, 2.0, 4, 8).is_err());
        assert!(AnnulusGrid::new(1.0, 2.0, 8, 4).is_err());
        assert!(AnnulusGrid::new(2.0, 1.0, 8, 8).is_err());
    }

    #[test]
    fn self_comparison_and_range() {
        let spec = ProblemSpec::new(3, "0", "r^(-3)*s^3 + 1", None, 1.0, 1.0).unwrap();
        let grid = AnnulusGrid::new(1.0, 2.0, 32, 1).unwrap();
        let two = BoundaryData::Value(2.0);
        let sol = solve_annulus(
            &spec,
            &grid,
            &two,
            &two,
            Init::Radial,
            None,
            &OracleControl::default(),
        )
        .unwrap();
        let profile = sol.profile().unwrap();
        assert!(compare_with_radial(&sol, &profile).unwrap() < 1e-14);
        let short = RadialProfile::new(vec![1.0, 1.5], vec![2.0, 1.0]).unwrap();
        assert!(matches!(
            compare_with_radial(&sol, &short),
            Err(Error::RangeMismatch(_))
        ));
    }
}
