//! Solvers for `z'' = F(t, z)` on `t < 0`.
//!
//! * [`integrate_ivp`]: Dormand–Prince 5(4) with blow-up detection. Once
//!   `z >= Z_max` the run stops and the blow-up time is extrapolated from
//!   the local power law `z ≈ C (t* - t)^(-α)`.
//! * [`solve_dirichlet_bvp`]: `z(t0) = z(t1) = s1` by Picard iteration on
//!   the Green's function of `-d²/dt²`, with damped Newton on the
//!   three-point discretisation as fallback.
//! * [`find_blowup_extension`]: continue a Dirichlet solution past `t1`.
//! * [`shoot_blowup_at`], [`minimal_large_solution`]: bisection on the
//!   initial slope.
//! * [`build_sequences`]: the bounded and blowing-up approximating
//!   families with their comparison orderings.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{ensure, Error, Result};
use crate::interp::{hermite, MonotoneCubic};

/// Right-hand side `F(t, z)` of `z'' = F(t, z)`.
pub trait Field: Sync {
    fn eval(&self, t: f64, z: f64) -> Result<f64>;

    /// `∂F/∂z` by central difference.
    fn dz(&self, t: f64, z: f64) -> Result<f64> {
        let step = 1e-6 * z.abs().max(1.0);
        Ok((self.eval(t, z + step)? - self.eval(t, z - step)?) / (2.0 * step))
    }
}

impl<F> Field for F
where
    F: Fn(f64, f64) -> f64 + Sync,
{
    fn eval(&self, t: f64, z: f64) -> Result<f64> {
        let v = self(t, z);
        if v.is_finite() {
            Ok(v)
        } else {
            Err(Error::Eval(format!("F({t}, {z}) = {v}")))
        }
    }
}

/// Tolerances and budgets shared by all solvers in this module.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OdeControl {
    /// Local error tolerance per unit step (mixed absolute/relative, time
    /// measured in units of `|t0|`), and the sup-norm update tolerance of
    /// the boundary-value iterations.
    pub tol: f64,
    /// Blow-up threshold.
    pub z_max: f64,
    /// Trajectories dropping below this value leave the admissible domain.
    pub z_floor: Option<f64>,
    /// Integrations "to 0" stop at `-zero_gap * |t0|`.
    pub zero_gap: f64,
    pub max_steps: usize,
    /// Accuracy of a shooting target blow-up time.
    pub rho_tol: f64,
    /// Bracket width at which slope bisection stops.
    pub slope_tol: f64,
    pub max_bisections: usize,
    pub max_doublings: usize,
    /// Grid size of the Dirichlet solver.
    pub bvp_nodes: usize,
    pub picard_max: usize,
    pub newton_max: usize,
}

impl Default for OdeControl {
    fn default() -> Self {
        Self {
            tol: 1e-11,
            z_max: 1e8,
            z_floor: Some(0.0),
            zero_gap: 1e-10,
            max_steps: 2_000_000,
            rho_tol: 1e-9,
            slope_tol: 1e-10,
            max_bisections: 200,
            max_doublings: 60,
            bvp_nodes: 2049,
            picard_max: 500,
            newton_max: 100,
        }
    }
}

impl OdeControl {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("tol", self.tol),
            ("z_max", self.z_max),
            ("zero_gap", self.zero_gap),
            ("rho_tol", self.rho_tol),
            ("slope_tol", self.slope_tol),
        ];
        for (name, v) in positive {
            ensure(v > 0.0 && v.is_finite(), || {
                format!("{name} = {v} must be positive")
            })?;
        }
        ensure(self.bvp_nodes >= 5, || {
            "bvp_nodes must be at least 5".into()
        })
    }
}

/// How a trajectory ended.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Classification {
    /// Reached `t_end < 0` below the blow-up threshold.
    ReachedEnd,
    /// Integrated up to `0⁻` with `z` below the blow-up threshold.
    BoundedAtZero,
    /// Exceeded `Z_max`; `t_star` is the extrapolated blow-up time.
    BlowUpAt { t_star: f64 },
    /// Fell below the admissible floor at time `t`.
    LeftDomain { t: f64 },
}

/// Local power-law fit at the blow-up threshold.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BlowupEstimate {
    pub t_star: f64,
    pub alpha: f64,
    pub coef: f64,
}

/// A trajectory `(t_j, z_j, z'_j)` on strictly increasing `t_j`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OdeSolution {
    pub t: Vec<f64>,
    pub z: Vec<f64>,
    pub zp: Vec<f64>,
    pub classification: Classification,
    pub blowup_estimate: Option<BlowupEstimate>,
    pub accuracy: f64,
}

impl OdeSolution {
    /// Wrap externally produced samples.
    pub fn from_samples(t: Vec<f64>, z: Vec<f64>, zp: Vec<f64>) -> Self {
        Self {
            t,
            z,
            zp,
            classification: Classification::ReachedEnd,
            blowup_estimate: None,
            accuracy: 0.0,
        }
    }

    pub fn blowup_time(&self) -> Option<f64> {
        match self.classification {
            Classification::BlowUpAt { t_star } => Some(t_star),
            _ => None,
        }
    }

    pub fn t_last(&self) -> f64 {
        *self.t.last().expect("trajectory is non-empty")
    }

    /// Monotone-cubic interpolant of `z(t)`.
    pub fn interpolant(&self) -> Result<MonotoneCubic> {
        MonotoneCubic::new(self.t.clone(), self.z.clone())
    }
}

// Dormand–Prince 5(4) tableau.
const C: [f64; 7] = [0.0, 0.2, 0.3, 0.8, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [0.2, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [
        19372.0 / 6561.0,
        -25360.0 / 2187.0,
        64448.0 / 6561.0,
        -212.0 / 729.0,
        0.0,
        0.0,
    ],
    [
        9017.0 / 3168.0,
        -355.0 / 33.0,
        46732.0 / 5247.0,
        49.0 / 176.0,
        -5103.0 / 18656.0,
        0.0,
    ],
    [
        35.0 / 384.0,
        0.0,
        500.0 / 1113.0,
        125.0 / 192.0,
        -2187.0 / 6784.0,
        11.0 / 84.0,
    ],
];
// fifth-order minus embedded fourth-order weights
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];

struct Step {
    z: f64,
    v: f64,
    err: f64,
    // F at the new point (first stage of the next step)
    accel: f64,
}

fn dp_step<F: Field + ?Sized>(
    field: &F,
    t: f64,
    z: f64,
    v: f64,
    accel: f64,
    h: f64,
    tol: f64,
) -> Result<Step> {
    // stage derivatives of (z, v)
    let mut kz = [0.0; 7];
    let mut kv = [0.0; 7];
    kz[0] = v;
    kv[0] = accel;
    for s in 1..7 {
        let mut zs = z;
        let mut vs = v;
        for j in 0..s {
            zs += h * A[s][j] * kz[j];
            vs += h * A[s][j] * kv[j];
        }
        kz[s] = vs;
        kv[s] = field.eval(t + C[s] * h, zs)?;
    }
    let mut z5 = z;
    let mut v5 = v;
    let mut ez = 0.0;
    let mut ev = 0.0;
    for s in 0..7 {
        z5 += h * A[6].get(s).copied().unwrap_or(0.0) * kz[s];
        v5 += h * A[6].get(s).copied().unwrap_or(0.0) * kv[s];
        ez += h * E[s] * kz[s];
        ev += h * E[s] * kv[s];
    }
    let sz = tol * (1.0 + z.abs().max(z5.abs()));
    let sv = tol * (1.0 + v.abs().max(v5.abs()));
    let err = (ez / sz).abs().max((ev / sv).abs());
    if !(z5.is_finite() && v5.is_finite() && err.is_finite()) {
        return Err(Error::Eval(format!(
            "non-finite state after step at t = {t}"
        )));
    }
    Ok(Step {
        z: z5,
        v: v5,
        err,
        accel: kv[6],
    })
}

/// Integrate `z'' = F(t, z)` from `(t0, z0, zp0)` towards `t_end <= 0`.
///
/// `t_end = 0` means "up to 0⁻": the run stops at `-zero_gap * |t0|` and a
/// trajectory still below `Z_max` there is [`Classification::BoundedAtZero`].
pub fn integrate_ivp<F: Field + ?Sized>(
    field: &F,
    t0: f64,
    z0: f64,
    zp0: f64,
    t_end: f64,
    ctrl: &OdeControl,
) -> Result<OdeSolution> {
    ctrl.validate()?;
    ensure(t0 < t_end && t_end <= 0.0, || {
        format!("need t0 < t_end <= 0, got t0 = {t0}, t_end = {t_end}")
    })?;
    ensure(z0.is_finite() && zp0.is_finite(), || {
        "non-finite initial data".into()
    })?;
    let to_zero = t_end == 0.0;
    let t_stop = if to_zero {
        -ctrl.zero_gap * t0.abs()
    } else {
        t_end
    };
    ensure(t0 < t_stop, || format!("t0 = {t0} leaves no room before 0"))?;

    let h_min = 1e-14 * t0.abs();
    let span = t_stop - t0;
    let mut t = t0;
    let mut z = z0;
    let mut v = zp0;
    let mut accel = field.eval(t0, z0)?;
    let mut ts = vec![t0];
    let mut zs = vec![z0];
    let mut vs = vec![zp0];
    let mut h = 1e-3 * span;
    let mut last_failure: Option<Error> = None;

    let finish = |ts: Vec<f64>, zs: Vec<f64>, vs: Vec<f64>, class| OdeSolution {
        t: ts,
        z: zs,
        zp: vs,
        classification: class,
        blowup_estimate: None,
        accuracy: ctrl.tol,
    };

    for _ in 0..ctrl.max_steps {
        if z.abs() >= 1.0 && z * v > 0.0 {
            h = h.min(0.1 * (z / v).abs());
        }
        let remaining = t_stop - t;
        let last = h >= remaining;
        if last {
            h = remaining;
        }
        if h < h_min && !last {
            let horizon = (z / v).min((z / accel).sqrt());
            if z > 0.0 && v > 0.0 && accel > 0.0 && horizon < 1e4 * h_min {
                // growth time scale below the step floor
                let est = extrapolate_blowup(&ts, &zs, &vs, accel);
                let t_star = if to_zero {
                    est.t_star.min(0.0)
                } else {
                    est.t_star
                };
                let mut sol = finish(ts, zs, vs, Classification::BlowUpAt { t_star });
                sol.blowup_estimate = Some(BlowupEstimate { t_star, ..est });
                return Ok(sol);
            }
            if let Some(err) = last_failure {
                if ctrl.z_floor.is_some() && v < 0.0 {
                    return Ok(finish(ts, zs, vs, Classification::LeftDomain { t }));
                }
                return Err(err);
            }
            return Err(Error::StepUnderflow { t });
        }
        // error per unit step in units of |t0|, floored above rounding
        let step_tol = (ctrl.tol * h / t0.abs())
            .max(1e-4 * ctrl.tol)
            .max(64.0 * f64::EPSILON);
        let step = match dp_step(field, t, z, v, accel, h, step_tol) {
            Ok(s) => s,
            Err(e) => {
                last_failure = Some(e);
                h *= 0.25;
                continue;
            }
        };
        if step.err > 1.0 {
            h *= (0.9 * step.err.powf(-0.25)).max(0.2);
            continue;
        }
        last_failure = None;
        t = if last { t_stop } else { t + h };
        z = step.z;
        v = step.v;
        accel = step.accel;
        ts.push(t);
        zs.push(z);
        vs.push(v);

        if z >= ctrl.z_max {
            let est = extrapolate_blowup(&ts, &zs, &vs, accel);
            let t_star = if to_zero {
                est.t_star.min(0.0)
            } else {
                est.t_star
            };
            let mut sol = finish(ts, zs, vs, Classification::BlowUpAt { t_star });
            sol.blowup_estimate = Some(BlowupEstimate { t_star, ..est });
            return Ok(sol);
        }
        if let Some(floor) = ctrl.z_floor {
            if z < floor {
                let n = ts.len();
                let t_cross = floor_crossing(ts[n - 2], zs[n - 2], vs[n - 2], t, z, v, floor);
                return Ok(finish(
                    ts,
                    zs,
                    vs,
                    Classification::LeftDomain { t: t_cross },
                ));
            }
        }
        if last {
            let class = if to_zero {
                Classification::BoundedAtZero
            } else {
                Classification::ReachedEnd
            };
            return Ok(finish(ts, zs, vs, class));
        }
        let grow = if step.err == 0.0 {
            5.0
        } else {
            (0.9 * step.err.powf(-0.25)).clamp(0.2, 5.0)
        };
        h *= grow;
    }
    Err(Error::IterationLimit(format!(
        "{} steps without reaching t = {t_stop}",
        ctrl.max_steps
    )))
}

// Root of the cubic Hermite interpolant of the last step.
fn floor_crossing(t0: f64, z0: f64, v0: f64, t1: f64, z1: f64, v1: f64, floor: f64) -> f64 {
    let w = t1 - t0;
    let (mut lo, mut hi) = (0.0, 1.0);
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if hermite(mid, w, z0, z1, v0, v1) >= floor {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    t0 + hi * w
}

/// Fit `z ≈ C (t* - t)^(-α)` through the last accepted points.
///
/// Starts from the pointwise estimate `α = 1 / (z z'' / z'^2 - 1)`,
/// `t* = t + α z / z'` and then alternates a log-log regression over the
/// last five points for `α` with the update of `t*`.
fn extrapolate_blowup(ts: &[f64], zs: &[f64], vs: &[f64], accel: f64) -> BlowupEstimate {
    let n = ts.len();
    let (t, z, v) = (ts[n - 1], zs[n - 1], vs[n - 1]);
    let ratio = z * accel / (v * v) - 1.0;
    let mut alpha = if ratio > 0.0 { 1.0 / ratio } else { 1.0 };
    let mut t_star = t + alpha * z / v;
    let mut coef = z * (t_star - t).powf(alpha);
    if n >= 5 {
        for _ in 0..50 {
            let pts = (n - 5..n)
                .map(|j| ((t_star - ts[j]).ln(), zs[j].ln()))
                .collect::<Vec<_>>();
            if pts.iter().any(|(x, _)| !x.is_finite()) {
                break;
            }
            let mx = pts.iter().map(|p| p.0).sum::<f64>() / 5.0;
            let my = pts.iter().map(|p| p.1).sum::<f64>() / 5.0;
            let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
            let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
            let slope = sxy / sxx;
            if !(slope < 0.0) {
                break;
            }
            alpha = -slope;
            coef = (my - slope * mx).exp();
            let next = t + alpha * z / v;
            let done = (next - t_star).abs() <= 1e-15 * t_star.abs().max(next - t);
            t_star = next;
            if done {
                break;
            }
        }
    }
    BlowupEstimate {
        t_star,
        alpha,
        coef,
    }
}

/// Solve `z'' = F(t, z)`, `z(t0) = z(t1) = s1` on a uniform grid.
pub fn solve_dirichlet_bvp<F: Field + ?Sized>(
    field: &F,
    t0: f64,
    t1: f64,
    s1: f64,
    ctrl: &OdeControl,
) -> Result<OdeSolution> {
    ctrl.validate()?;
    ensure(t0 < t1 && t1 < 0.0, || {
        format!("need t0 < t1 < 0, got t0 = {t0}, t1 = {t1}")
    })?;
    ensure(s1 >= 0.0 && s1.is_finite(), || {
        format!("boundary value s1 = {s1} must be finite and non-negative")
    })?;
    let n = ctrl.bvp_nodes;
    let len = t1 - t0;
    let h = len / (n - 1) as f64;
    let t: Vec<f64> = (0..n)
        .map(|i| if i == n - 1 { t1 } else { t0 + i as f64 * h })
        .collect();

    let z = match picard(field, &t, s1, ctrl)? {
        Some(z) => z,
        None => newton_fd(field, &t, s1, ctrl)?,
    };
    let phi = t
        .iter()
        .zip(&z)
        .map(|(&ti, &zi)| field.eval(ti, zi))
        .collect::<Result<Vec<_>>>()?;
    let (a, b) = green_moments(&t, &phi);
    let zp = (0..n).map(|i| (a[i] - b[i]) / len).collect();
    Ok(OdeSolution {
        t,
        z,
        zp,
        classification: Classification::ReachedEnd,
        blowup_estimate: None,
        accuracy: ctrl.tol,
    })
}

// Cumulative trapezoid sums A_i = ∫_{t0}^{t_i} (τ - t0) φ dτ and
// B_i = ∫_{t_i}^{t1} (t1 - τ) φ dτ.
fn green_moments(t: &[f64], phi: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let n = t.len();
    let (t0, t1) = (t[0], t[n - 1]);
    let mut a = vec![0.0; n];
    let mut b = vec![0.0; n];
    for i in 1..n {
        let w = t[i] - t[i - 1];
        a[i] = a[i - 1] + 0.5 * w * ((t[i - 1] - t0) * phi[i - 1] + (t[i] - t0) * phi[i]);
    }
    for i in (0..n - 1).rev() {
        let w = t[i + 1] - t[i];
        b[i] = b[i + 1] + 0.5 * w * ((t1 - t[i]) * phi[i] + (t1 - t[i + 1]) * phi[i + 1]);
    }
    (a, b)
}

// z_{j+1}(t) = s1 - ∫ G(t, τ) F(τ, z_j(τ)) dτ with
// G(t, τ) = (min - t0)(t1 - max) / (t1 - t0). Returns None when the
// iteration stalls or diverges.
fn picard<F: Field + ?Sized>(
    field: &F,
    t: &[f64],
    s1: f64,
    ctrl: &OdeControl,
) -> Result<Option<Vec<f64>>> {
    let n = t.len();
    let (t0, t1) = (t[0], t[n - 1]);
    let len = t1 - t0;
    let mut z = vec![s1; n];
    let mut prev_update = f64::INFINITY;
    let mut slow = 0;
    for _ in 0..ctrl.picard_max {
        let phi = match t
            .iter()
            .zip(&z)
            .map(|(&ti, &zi)| field.eval(ti, zi))
            .collect::<Result<Vec<_>>>()
        {
            Ok(p) => p,
            Err(_) => return Ok(None),
        };
        let (a, b) = green_moments(t, &phi);
        let mut update: f64 = 0.0;
        for i in 1..n - 1 {
            let next = s1 - ((t1 - t[i]) * a[i] + (t[i] - t0) * b[i]) / len;
            update = update.max((next - z[i]).abs());
            z[i] = next;
        }
        if !update.is_finite() {
            return Ok(None);
        }
        if update < ctrl.tol {
            return Ok(Some(z));
        }
        if update > prev_update {
            return Ok(None);
        }
        slow = if update > 0.9 * prev_update {
            slow + 1
        } else {
            0
        };
        if slow >= 5 {
            return Ok(None);
        }
        prev_update = update;
    }
    Ok(None)
}

fn fd_residual<F: Field + ?Sized>(field: &F, t: &[f64], z: &[f64], h: f64) -> Result<Vec<f64>> {
    let n = t.len();
    let mut res = vec![0.0; n];
    for i in 1..n - 1 {
        res[i] = (z[i - 1] - 2.0 * z[i] + z[i + 1]) / (h * h) - field.eval(t[i], z[i])?;
    }
    Ok(res)
}

fn sup(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

// Damped Newton on (z_{i-1} - 2 z_i + z_{i+1}) / h² = F(t_i, z_i).
fn newton_fd<F: Field + ?Sized>(
    field: &F,
    t: &[f64],
    s1: f64,
    ctrl: &OdeControl,
) -> Result<Vec<f64>> {
    let n = t.len();
    let h = t[1] - t[0];
    let inv_h2 = 1.0 / (h * h);
    let mut z = vec![s1; n];
    let mut res = fd_residual(field, t, &z, h)?;
    let mut norm = sup(&res);
    for _ in 0..ctrl.newton_max {
        let m = n - 2;
        let mut diag = vec![0.0; m];
        let off = vec![inv_h2; m];
        let mut rhs = vec![0.0; m];
        for k in 0..m {
            let i = k + 1;
            diag[k] = -2.0 * inv_h2 - field.dz(t[i], z[i])?;
            rhs[k] = -res[i];
        }
        let delta = thomas(&off, &diag, &off, &rhs);
        let step_norm = sup(&delta);
        if !step_norm.is_finite() {
            break;
        }
        if step_norm < ctrl.tol {
            for (zi, d) in z[1..n - 1].iter_mut().zip(&delta) {
                *zi += d;
            }
            return Ok(z);
        }
        let mut alpha = 1.0;
        let mut accepted = false;
        for _ in 0..=30 {
            let trial: Vec<f64> = z
                .iter()
                .enumerate()
                .map(|(i, &zi)| {
                    if i == 0 || i == n - 1 {
                        zi
                    } else {
                        zi + alpha * delta[i - 1]
                    }
                })
                .collect();
            if let Ok(r) = fd_residual(field, t, &trial, h) {
                let rn = sup(&r);
                // residual evaluation noise of the difference quotient
                let noise = 1e3 * f64::EPSILON * 4.0 * sup(&trial) * inv_h2;
                if rn < norm || rn <= noise {
                    z = trial;
                    res = r;
                    norm = rn;
                    accepted = true;
                    break;
                }
            }
            alpha *= 0.5;
        }
        if !accepted {
            break;
        }
    }
    Err(Error::NoConvergence(format!(
        "Picard stalled and damped Newton did not converge (residual {norm:e})"
    )))
}

/// Tridiagonal solve: `sub[i] x[i-1] + diag[i] x[i] + sup[i] x[i+1] = rhs[i]`.
pub(crate) fn thomas(sub: &[f64], diag: &[f64], sup_: &[f64], rhs: &[f64]) -> Vec<f64> {
    let m = diag.len();
    let mut c = vec![0.0; m];
    let mut d = vec![0.0; m];
    c[0] = sup_[0] / diag[0];
    d[0] = rhs[0] / diag[0];
    for i in 1..m {
        let denom = diag[i] - sub[i] * c[i - 1];
        c[i] = sup_[i] / denom;
        d[i] = (rhs[i] - sub[i] * d[i - 1]) / denom;
    }
    let mut x = vec![0.0; m];
    x[m - 1] = d[m - 1];
    for i in (0..m - 1).rev() {
        x[i] = d[i] - c[i] * x[i + 1];
    }
    x
}

/// Continue a Dirichlet solution beyond its right end until blow-up or 0⁻.
///
/// Returns `t2` (the blow-up time, or 0 when the trajectory stays bounded)
/// and the concatenated trajectory.
pub fn find_blowup_extension<F: Field + ?Sized>(
    field: &F,
    bvp: &OdeSolution,
    ctrl: &OdeControl,
) -> Result<(f64, OdeSolution)> {
    ensure(bvp.t.len() >= 2, || "empty boundary-value solution".into())?;
    let n = bvp.t.len();
    let ext = integrate_ivp(field, bvp.t[n - 1], bvp.z[n - 1], bvp.zp[n - 1], 0.0, ctrl)?;
    let t2 = ext.blowup_time().unwrap_or(0.0);
    let mut out = bvp.clone();
    out.t.extend_from_slice(&ext.t[1..]);
    out.z.extend_from_slice(&ext.z[1..]);
    out.zp.extend_from_slice(&ext.zp[1..]);
    out.classification = ext.classification;
    out.blowup_estimate = ext.blowup_estimate;
    Ok((t2, out))
}

/// Outcome of a slope bisection.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ShootingResult {
    /// `z'` at the anchor.
    pub slope: f64,
    /// Blow-up time of the returned trajectory.
    pub achieved_rho: f64,
    pub iterations: usize,
    /// `(low, high)` slopes: `low` blows up later than the target (or not
    /// at all), `high` earlier.
    pub bracket: (f64, f64),
    pub solution: OdeSolution,
}

struct Trial {
    slope: f64,
    sol: OdeSolution,
}

fn shoot<F: Field + ?Sized>(
    field: &F,
    t_bar: f64,
    z_bar: f64,
    slope: f64,
    ctrl: &OdeControl,
) -> Result<Trial> {
    let sol = integrate_ivp(field, t_bar, z_bar, slope, 0.0, ctrl)?;
    Ok(Trial { slope, sol })
}

/// Find the slope at `(t_bar, z_bar)` whose trajectory blows up at `rho`.
pub fn shoot_blowup_at<F: Field + ?Sized>(
    field: &F,
    t_bar: f64,
    z_bar: f64,
    rho: f64,
    ctrl: &OdeControl,
) -> Result<ShootingResult> {
    ensure(t_bar < rho && rho < 0.0, || {
        format!("need t_bar < rho < 0, got t_bar = {t_bar}, rho = {rho}")
    })?;
    ensure(z_bar > 0.0, || {
        format!("anchor value {z_bar} must be positive")
    })?;
    // earlier blow-up than rho counts as "high"
    let is_high = |tr: &Trial| tr.sol.blowup_time().is_some_and(|ts| ts < rho);
    let hit = |tr: &Trial| {
        tr.sol
            .blowup_time()
            .is_some_and(|ts| (ts - rho).abs() < ctrl.rho_tol)
    };
    let done = |tr: Trial, lo: f64, hi: f64, iterations| ShootingResult {
        slope: tr.slope,
        achieved_rho: tr.sol.blowup_time().expect("hit implies blow-up"),
        iterations,
        bracket: (lo, hi),
        solution: tr.sol,
    };

    let first = shoot(field, t_bar, z_bar, 0.0, ctrl)?;
    if hit(&first) {
        return Ok(done(first, 0.0, 0.0, 0));
    }
    let (mut lo, mut hi);
    let mut width = 1.0;
    if is_high(&first) {
        hi = 0.0;
        lo = f64::NAN;
        for _ in 0..ctrl.max_doublings {
            let tr = shoot(field, t_bar, z_bar, -width, ctrl)?;
            if hit(&tr) {
                return Ok(done(tr, -width, -width, 0));
            }
            if !is_high(&tr) {
                lo = -width;
                break;
            }
            hi = -width;
            width *= 2.0;
        }
    } else {
        lo = 0.0;
        hi = f64::NAN;
        for _ in 0..ctrl.max_doublings {
            let tr = shoot(field, t_bar, z_bar, width, ctrl)?;
            if hit(&tr) {
                return Ok(done(tr, width, width, 0));
            }
            if is_high(&tr) {
                hi = width;
                break;
            }
            lo = width;
            width *= 2.0;
        }
    }
    if lo.is_nan() || hi.is_nan() {
        return Err(Error::BracketFailure(format!(
            "no slope pair at ({t_bar}, {z_bar}) brackets blow-up at {rho}"
        )));
    }
    for it in 1..=ctrl.max_bisections {
        let mid = 0.5 * (lo + hi);
        let tr = shoot(field, t_bar, z_bar, mid, ctrl)?;
        if hit(&tr) {
            return Ok(done(tr, lo, hi, it));
        }
        if is_high(&tr) {
            hi = mid;
        } else {
            lo = mid;
        }
        if mid == lo && mid == hi {
            break;
        }
    }
    Err(Error::IterationLimit(format!(
        "blow-up time {rho} not matched to {} within {} bisections (bracket [{lo}, {hi}])",
        ctrl.rho_tol, ctrl.max_bisections
    )))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Side {
    /// blows up strictly before 0
    Upper,
    /// positive and bounded up to 0⁻
    Bounded,
    /// left the admissible domain
    Exited,
}

fn side(sol: &OdeSolution) -> Side {
    match sol.classification {
        Classification::BlowUpAt { t_star } if t_star < 0.0 => Side::Upper,
        Classification::LeftDomain { .. } => Side::Exited,
        _ => Side::Bounded,
    }
}

/// The large solution through `(t_bar, z_bar)` at the critical slope
/// separating trajectories bounded on `[t_bar, 0)` from those blowing up
/// before 0.
pub fn minimal_large_solution<F: Field + ?Sized>(
    field: &F,
    t_bar: f64,
    z_bar: f64,
    ctrl: &OdeControl,
) -> Result<ShootingResult> {
    ensure(t_bar < 0.0, || {
        format!("anchor time {t_bar} must be negative")
    })?;
    ensure(z_bar > 0.0, || {
        format!("anchor value {z_bar} must be positive")
    })?;

    // Along increasing slope the outcomes are ordered:
    // leaves the domain < bounded up to 0 < blows up before 0.
    let no_bounded = |exited: f64, upper: f64| {
        Error::BracketFailure(format!(
            "every slope from ({t_bar}, {z_bar}) either blows up before 0 or leaves the \
             domain (transition between {exited} and {upper}); no bounded trajectory \
             brackets the minimal large solution"
        ))
    };
    let first = shoot(field, t_bar, z_bar, 0.0, ctrl)?;
    let mut lo: Option<f64> = None;
    let mut exited: Option<f64> = None;
    let mut hi: Option<Trial> = None;
    match side(&first.sol) {
        Side::Upper => hi = Some(first),
        Side::Bounded => lo = Some(0.0),
        Side::Exited => exited = Some(0.0),
    }
    let mut width = 1.0;
    for _ in 0..ctrl.max_doublings {
        if hi.is_some() && (lo.is_some() || exited.is_some()) {
            break;
        }
        let slope = if hi.is_some() { -width } else { width };
        let tr = shoot(field, t_bar, z_bar, slope, ctrl)?;
        match side(&tr.sol) {
            Side::Upper => hi = Some(tr),
            Side::Bounded => lo = Some(slope),
            Side::Exited => exited = Some(slope),
        }
        width *= 2.0;
    }
    let Some(mut hi) = hi else {
        return Err(Error::BracketFailure(format!(
            "no slope up to {width} from ({t_bar}, {z_bar}) blows up before 0"
        )));
    };
    if lo.is_none() {
        // look for the bounded window between leaving and blowing up
        let Some(mut ex) = exited else {
            return Err(Error::BracketFailure(format!(
                "every slope down to {} from ({t_bar}, {z_bar}) blows up before 0",
                -width
            )));
        };
        while lo.is_none() {
            let mid = 0.5 * (ex + hi.slope);
            if hi.slope - ex <= ctrl.slope_tol * hi.slope.abs().max(1.0)
                || mid <= ex
                || mid >= hi.slope
            {
                return Err(no_bounded(ex, hi.slope));
            }
            let tr = shoot(field, t_bar, z_bar, mid, ctrl)?;
            match side(&tr.sol) {
                Side::Upper => hi = tr,
                Side::Bounded => lo = Some(mid),
                Side::Exited => ex = mid,
            }
        }
    }
    let mut lo = lo.expect("bounded slope found");

    for it in 1..=ctrl.max_bisections {
        let t_hi = hi.sol.blowup_time().expect("upper trajectories blow up");
        if hi.slope - lo <= ctrl.slope_tol && t_hi.abs() <= ctrl.rho_tol {
            return Ok(ShootingResult {
                slope: hi.slope,
                achieved_rho: t_hi,
                iterations: it - 1,
                bracket: (lo, hi.slope),
                solution: hi.sol,
            });
        }
        let mid = 0.5 * (lo + hi.slope);
        if mid <= lo || mid >= hi.slope {
            break;
        }
        let tr = shoot(field, t_bar, z_bar, mid, ctrl)?;
        if side(&tr.sol) == Side::Upper {
            hi = tr;
        } else {
            lo = mid;
        }
    }
    Err(Error::IterationLimit(format!(
        "critical slope at ({t_bar}, {z_bar}) not resolved within {} bisections \
         (bracket [{lo}, {}])",
        ctrl.max_bisections, hi.slope
    )))
}

/// Largest amount by which `below <= above` fails on the coarser of the two
/// grids over their common `t` range, after allowing `10 tol max(1, |v|)`.
pub fn ordering_violation(below: &OdeSolution, above: &OdeSolution, tol: f64) -> Result<f64> {
    let end = below.t_last().min(above.t_last());
    let start = below.t[0].max(above.t[0]);
    let (coarse, fine) = if below.t.len() <= above.t.len() {
        (below, above)
    } else {
        (above, below)
    };
    let fine_i = fine.interpolant()?;
    let mut worst: f64 = 0.0;
    for (&t, &zc) in coarse.t.iter().zip(&coarse.z) {
        if t < start || t > end {
            continue;
        }
        let zf = fine_i.eval(t)?;
        let (a, b) = if std::ptr::eq(coarse, below) {
            (zc, zf)
        } else {
            (zf, zc)
        };
        let allowance = 10.0 * tol * b.abs().max(1.0);
        worst = worst.max(a - b - allowance);
    }
    Ok(worst)
}

/// The two approximating families anchored at `t_bar`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SequencePair {
    /// Target blow-up times `ρ_k = -|t_bar| 2^{-k}`, k = 1..K.
    pub rho: Vec<f64>,
    /// Bounded trajectories `z_k` with `z_k(t_bar) = m`.
    pub lower: Vec<OdeSolution>,
    pub lower_slopes: Vec<f64>,
    /// `z_0`, the minimal large solution through `(t_bar, m)`.
    pub lower_limit: ShootingResult,
    /// `Z_k` with `Z_k(t_bar) = M` blowing up at `ρ_k`.
    pub upper: Vec<ShootingResult>,
    /// `Z_0`, the minimal large solution through `(t_bar, M)`.
    pub upper_limit: ShootingResult,
    /// Worst violation of `z_1 <= ... <= z_K <= z_0`.
    pub lower_violation: f64,
    /// Worst violation of `Z_1 >= ... >= Z_K >= Z_0`.
    pub upper_violation: f64,
}

impl SequencePair {
    pub fn ordered(&self) -> bool {
        self.lower_violation <= 0.0 && self.upper_violation <= 0.0
    }
}

pub fn build_sequences<F: Field + ?Sized>(
    field: &F,
    t_bar: f64,
    m: f64,
    big_m: f64,
    k: usize,
    ctrl: &OdeControl,
) -> Result<SequencePair> {
    ensure(k >= 1, || "need K >= 1".into())?;
    ensure(m > 0.0 && big_m > 0.0, || {
        format!("anchor values m = {m}, M = {big_m} must be positive")
    })?;
    ensure(t_bar < 0.0, || {
        format!("anchor time {t_bar} must be negative")
    })?;

    let (lower_limit, upper_limit) = rayon::join(
        || minimal_large_solution(field, t_bar, m, ctrl),
        || minimal_large_solution(field, t_bar, big_m, ctrl),
    );
    let (lower_limit, upper_limit) = (lower_limit?, upper_limit?);

    // bounded family: slopes m* - Δ 2^{-j} increasing to the critical slope
    let critical = lower_limit.bracket.0;
    let mut delta = 0.5 * critical.abs().max(1.0);
    let mut lower = None;
    for _ in 0..30 {
        let slopes: Vec<f64> = (1..=k)
            .map(|j| critical - delta * 0.5f64.powi(j as i32))
            .collect();
        let sols = slopes
            .par_iter()
            .map(|&s| integrate_ivp(field, t_bar, m, s, 0.0, ctrl))
            .collect::<Result<Vec<_>>>()?;
        if sols.iter().all(|s| side(s) == Side::Bounded) {
            lower = Some((slopes, sols));
            break;
        }
        delta *= 0.5;
    }
    let (lower_slopes, lower) = lower.ok_or_else(|| {
        Error::BracketFailure("no bounded trajectories below the critical slope".into())
    })?;

    let rho: Vec<f64> = (1..=k)
        .map(|j| -t_bar.abs() * 0.5f64.powi(j as i32))
        .collect();
    let upper = rho
        .par_iter()
        .map(|&r| shoot_blowup_at(field, t_bar, big_m, r, ctrl))
        .collect::<Result<Vec<_>>>()?;

    let mut lower_violation = f64::NEG_INFINITY;
    for j in 0..k {
        let next = if j + 1 < k {
            &lower[j + 1]
        } else {
            &lower_limit.solution
        };
        lower_violation = lower_violation.max(ordering_violation(&lower[j], next, ctrl.tol)?);
    }
    let mut upper_violation = f64::NEG_INFINITY;
    for j in 0..k {
        let next = if j + 1 < k {
            &upper[j + 1].solution
        } else {
            &upper_limit.solution
        };
        upper_violation =
            upper_violation.max(ordering_violation(next, &upper[j].solution, ctrl.tol)?);
    }

    Ok(SequencePair {
        rho,
        lower,
        lower_slopes,
        lower_limit,
        upper,
        upper_limit,
        lower_violation,
        upper_violation,
    })
}
