//! The change of variables `t = p(r) = -∫_r^∞ e^{-h(z)} z^{1-n} dz` that turns
//! radial solutions of `Δu + ∇h·∇u = f(|x|, u)` into solutions of
//! `z'' = F(t, z)` on `t < 0`.
//!
//! `p` is tabulated on a geometric grid and interpolated with monotone cubic
//! Hermite pieces in the coordinates `(ln r, ln(-t))`, where power-law
//! behaviour becomes linear. Beyond the table a fitted tail model (power
//! law, or exponential when that fits better) gives `p` in closed form.

use serde::Serialize;

use crate::error::{ensure, Error, Result};
use crate::exprdsl::{parse_expr, ExprAst};
use crate::interp::{hermite, hermite_slope, limit_slopes, MonotoneCubic};
use crate::odesolver::{Field, OdeSolution};
use crate::quadrature::{integrate, sum_blocks, BlockRule, SeriesVerdict};

pub const DEFAULT_QUAD_TOL: f64 = 1e-10;
pub const TABLE_POINTS: usize = 512;

/// Problem data: dimension, convection potential `h(r)`, nonlinearity
/// `f(r, s)`, optional comparison function `g(r, s)` and the corner
/// `(r0, s0)` of the region where the hypotheses are checked.
#[derive(Debug, Clone)]
pub struct ProblemSpec {
    pub n: usize,
    pub h: ExprAst,
    pub f: ExprAst,
    pub g: Option<ExprAst>,
    pub r0: f64,
    pub s0: f64,
    pub quad_tol: f64,
    pub r_big: f64,
}

impl ProblemSpec {
    /// Parse the expressions and apply default tolerances
    /// (`quad_tol = 1e-10`, `r_big = 1e6 * r0`).
    pub fn new(n: usize, h: &str, f: &str, g: Option<&str>, r0: f64, s0: f64) -> Result<Self> {
        let spec = Self {
            n,
            h: parse_expr(h, &["r"])?,
            f: parse_expr(f, &["r", "s"])?,
            g: g.map(|g| parse_expr(g, &["r", "s"])).transpose()?,
            r0,
            s0,
            quad_tol: DEFAULT_QUAD_TOL,
            r_big: 1e6 * r0,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn with_quad_tol(mut self, quad_tol: f64) -> Result<Self> {
        self.quad_tol = quad_tol;
        self.validate()?;
        Ok(self)
    }

    pub fn with_r_big(mut self, r_big: f64) -> Result<Self> {
        self.r_big = r_big;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        ensure(self.n >= 2, || {
            format!("dimension n = {} must be at least 2", self.n)
        })?;
        ensure(self.r0 > 0.0, || {
            format!("r0 = {} must be positive", self.r0)
        })?;
        ensure(self.s0 > 0.0, || {
            format!("s0 = {} must be positive", self.s0)
        })?;
        ensure(self.quad_tol > 0.0 && self.quad_tol <= 1e-3, || {
            format!("quad_tol = {} must lie in (0, 1e-3]", self.quad_tol)
        })?;
        ensure(self.r_big > 10.0 * self.r0, || {
            format!("r_big = {} must exceed 10 * r0", self.r_big)
        })
    }

    pub fn h(&self, r: f64) -> Result<f64> {
        Ok(self.h.eval_at(&[r])?)
    }

    pub fn f(&self, r: f64, s: f64) -> Result<f64> {
        Ok(self.f.eval_at(&[r, s])?)
    }

    pub fn g(&self, r: f64, s: f64) -> Result<Option<f64>> {
        match &self.g {
            Some(g) => Ok(Some(g.eval_at(&[r, s])?)),
            None => Ok(None),
        }
    }

    /// `h'(r)` by central difference with step `1e-6 r`.
    pub fn h_prime(&self, r: f64) -> Result<f64> {
        Ok(self.h.derivative_at(0, &mut [r], 1e-6 * r)?)
    }

    /// `p'(r) = e^{-h(r)} r^{1-n}`, evaluated in log form.
    pub fn p_prime(&self, r: f64) -> Result<f64> {
        if r <= 0.0 {
            return Err(Error::OutOfRange(format!("radius {r} must be positive")));
        }
        let v = (-self.h(r)? + (1.0 - self.n as f64) * r.ln()).exp();
        if v.is_finite() {
            Ok(v)
        } else {
            Err(Error::Eval(format!("e^(-h) r^(1-n) overflows at r = {r}")))
        }
    }
}

/// Verdict on the finiteness of `∫_R^∞ e^{-h(r)} r^{1-n} dr`.
///
/// `Divergent` is numerical evidence only: the doubling blocks
/// `[2^k R, 2^{k+1} R]` stopped decaying geometrically.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GrowthVerdict {
    Finite { value: f64 },
    Divergent { evidence: Vec<f64> },
}

impl GrowthVerdict {
    pub fn is_finite(&self) -> bool {
        matches!(self, GrowthVerdict::Finite { .. })
    }
}

pub fn check_growth(spec: &ProblemSpec, r: f64) -> Result<GrowthVerdict> {
    ensure(r >= spec.r0, || {
        format!("R = {r} is below r0 = {}", spec.r0)
    })?;
    // keep 2^k R finite
    let max_blocks = ((f64::MAX / r).log2().floor() as usize)
        .saturating_sub(2)
        .min(600);
    let rule = BlockRule::new(spec.quad_tol, max_blocks);
    // later blocks only need accuracy relative to the running total
    let mut total = 0.0;
    let verdict = sum_blocks(
        |k| {
            let a = r * 2f64.powi(k as i32);
            let abs_tol = spec.quad_tol * total;
            let q = integrate(|z| spec.p_prime(z), a, 2.0 * a, spec.quad_tol, abs_tol)?;
            total += q.value;
            Ok(q.value)
        },
        rule,
    )?;
    Ok(match verdict {
        SeriesVerdict::Converged { value, .. } => GrowthVerdict::Finite { value },
        SeriesVerdict::Divergent { blocks } => GrowthVerdict::Divergent { evidence: blocks },
    })
}

/// Closed-form model of `∫_r^∞ p'` beyond the tabulated range.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TailModel {
    /// `p'(r) ≈ coef * r^(-exponent)`, `exponent > 1`.
    Power { coef: f64, exponent: f64 },
    /// `p'(r) ≈ exp(log_coef - rate * r)`, `rate > 0`.
    Exponential { log_coef: f64, rate: f64 },
}

impl TailModel {
    /// `∫_r^∞` of the model integrand.
    pub fn integral_from(&self, r: f64) -> f64 {
        match *self {
            TailModel::Power { coef, exponent } => coef * r.powf(1.0 - exponent) / (exponent - 1.0),
            TailModel::Exponential { log_coef, rate } => (log_coef - rate * r).exp() / rate,
        }
    }

    /// Inverse of [`TailModel::integral_from`].
    pub fn radius_for(&self, tail: f64) -> f64 {
        match *self {
            TailModel::Power { coef, exponent } => {
                (tail * (exponent - 1.0) / coef).powf(1.0 / (1.0 - exponent))
            }
            TailModel::Exponential { log_coef, rate } => (log_coef - (tail * rate).ln()) / rate,
        }
    }

    fn fit(spec: &ProblemSpec, lo: f64, hi: f64) -> Result<Self> {
        const SAMPLES: usize = 33;
        let mut xs = Vec::with_capacity(SAMPLES);
        let mut ls = Vec::with_capacity(SAMPLES);
        let mut logy = Vec::with_capacity(SAMPLES);
        for i in 0..SAMPLES {
            let r = lo * (hi / lo).powf(i as f64 / (SAMPLES - 1) as f64);
            let v = spec.p_prime(r)?;
            xs.push(r);
            ls.push(r.ln());
            logy.push(v.ln());
        }
        let (slope_p, icpt_p, res_p) = linear_fit(&ls, &logy);
        let (slope_e, icpt_e, res_e) = linear_fit(&xs, &logy);
        let power = (-slope_p > 1.0).then_some(TailModel::Power {
            coef: icpt_p.exp(),
            exponent: -slope_p,
        });
        let expo = (-slope_e > 0.0).then_some(TailModel::Exponential {
            log_coef: icpt_e,
            rate: -slope_e,
        });
        match (power, expo) {
            (Some(p), Some(e)) => Ok(if res_p <= res_e { p } else { e }),
            (Some(p), None) => Ok(p),
            (None, Some(e)) if res_e < res_p => Ok(e),
            _ => Err(Error::GrowthViolated(format!(
                "no integrable tail fits e^(-h) r^(1-n) on [{lo:e}, {hi:e}] \
                 (power-law exponent {:.6})",
                -slope_p
            ))),
        }
    }
}

// Least squares y = a x + b; returns (a, b, max |residual|).
fn linear_fit(x: &[f64], y: &[f64]) -> (f64, f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    let slope = sxy / sxx;
    let icpt = my - slope * mx;
    let res = x
        .iter()
        .zip(y)
        .map(|(a, b)| (b - slope * a - icpt).abs())
        .fold(0.0, f64::max);
    (slope, icpt, res)
}

/// Tabulated `t = p(r)` with its inverse.
#[derive(Debug, Clone)]
pub struct TransformMap {
    r: Vec<f64>,
    t: Vec<f64>,
    // log coordinates: x = ln r, y = ln(-t), dy = dy/dx
    x: Vec<f64>,
    y: Vec<f64>,
    dy: Vec<f64>,
    tail: TailModel,
    quad_tol: f64,
}

/// Tabulate `p` on `[r_min, r_big]`.
pub fn build_transform(spec: &ProblemSpec, r_min: f64) -> Result<TransformMap> {
    spec.validate()?;
    ensure(r_min >= spec.r0, || {
        format!("r_min = {r_min} is below r0 = {}", spec.r0)
    })?;
    ensure(r_min < spec.r_big / 10.0, || {
        format!(
            "r_min = {r_min} must be below r_big / 10 = {}",
            spec.r_big / 10.0
        )
    })?;
    if let GrowthVerdict::Divergent { evidence } = check_growth(spec, r_min)? {
        return Err(Error::GrowthViolated(format!(
            "integral of e^(-h) r^(1-n) from {r_min} shows no geometric decay \
             (last blocks {:?})",
            &evidence[evidence.len().saturating_sub(3)..]
        )));
    }

    let ratio = (spec.r_big / r_min).powf(1.0 / (TABLE_POINTS - 1) as f64);
    let mut r: Vec<f64> = (0..TABLE_POINTS)
        .map(|i| r_min * ratio.powi(i as i32))
        .collect();
    *r.last_mut().expect("table is non-empty") = spec.r_big;
    let mut dp = r
        .iter()
        .map(|&ri| spec.p_prime(ri))
        .collect::<Result<Vec<_>>>()?;

    // Stop the table where p' underflows; the tail model takes over there.
    if let Some(cut) = dp.iter().position(|&v| v < 1e-250) {
        ensure(cut >= 16, || {
            format!(
                "e^(-h) r^(1-n) underflows too close to r_min (at r = {})",
                r[cut]
            )
        })?;
        r.truncate(cut);
        dp.truncate(cut);
    }
    let r_end = *r.last().expect("table is non-empty");
    let tail = TailModel::fit(spec, r_end / 10.0, r_end)?;

    let mut t = vec![0.0; r.len()];
    let last = r.len() - 1;
    t[last] = -tail.integral_from(r_end);
    for i in (0..last).rev() {
        let tol = 0.1 * spec.quad_tol;
        let q = integrate(
            |z| spec.p_prime(z),
            r[i],
            r[i + 1],
            tol,
            tol * t[i + 1].abs(),
        )?;
        t[i] = t[i + 1] - q.value;
    }
    if !(t[last] < 0.0 && t.windows(2).all(|w| w[0] < w[1])) {
        return Err(Error::QuadratureFailure(
            "tabulated p(r) is not strictly increasing and negative".into(),
        ));
    }

    let x: Vec<f64> = r.iter().map(|v| v.ln()).collect();
    let y: Vec<f64> = t.iter().map(|v| (-v).ln()).collect();
    let dy: Vec<f64> = (0..r.len()).map(|i| r[i] * dp[i] / t[i]).collect();
    Ok(TransformMap {
        r,
        t,
        x,
        y,
        dy,
        tail,
        quad_tol: spec.quad_tol,
    })
}

impl TransformMap {
    pub fn r_min(&self) -> f64 {
        self.r[0]
    }

    /// Largest tabulated radius; `p` follows the tail model beyond it.
    pub fn r_table_end(&self) -> f64 {
        self.r[self.r.len() - 1]
    }

    /// `p(r_min)`, the left end of the `t` range.
    pub fn t_min(&self) -> f64 {
        self.t[0]
    }

    pub fn tail(&self) -> TailModel {
        self.tail
    }

    pub fn quad_tol(&self) -> f64 {
        self.quad_tol
    }

    /// The `(r_i, t_i)` table.
    pub fn table(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.r.iter().copied().zip(self.t.iter().copied())
    }

    fn segment_slopes(&self, i: usize) -> (f64, f64, f64) {
        let w = self.x[i + 1] - self.x[i];
        let delta = (self.y[i + 1] - self.y[i]) / w;
        let (d0, d1) = limit_slopes(delta, self.dy[i], self.dy[i + 1]);
        (w, d0, d1)
    }

    pub fn eval_p(&self, r: f64) -> Result<f64> {
        let r_min = self.r_min();
        if !(r >= r_min * (1.0 - 1e-14)) {
            return Err(Error::OutOfRange(format!(
                "r = {r} is below r_min = {r_min}"
            )));
        }
        if r >= self.r_table_end() {
            return Ok(-self.tail.integral_from(r));
        }
        let x = r.max(r_min).ln();
        let i = self
            .x
            .partition_point(|&xi| xi <= x)
            .clamp(1, self.x.len() - 1)
            - 1;
        let (w, d0, d1) = self.segment_slopes(i);
        let s = ((x - self.x[i]) / w).clamp(0.0, 1.0);
        Ok(-hermite(s, w, self.y[i], self.y[i + 1], d0, d1).exp())
    }

    /// `p^{-1}(t)` for `t` in `[p(r_min), 0)`.
    pub fn eval_p_inverse(&self, t: f64) -> Result<f64> {
        let t_min = self.t_min();
        if !(t < 0.0) || t < t_min * (1.0 + 1e-14) {
            return Err(Error::OutOfRange(format!("t = {t} outside [{t_min}, 0)")));
        }
        let last = self.t.len() - 1;
        if t >= self.t[last] {
            return Ok(self.tail.radius_for(-t));
        }
        if t <= t_min {
            return Ok(self.r_min());
        }
        let target = (-t).ln();
        // y is decreasing in x
        let i = self.y.partition_point(|&yi| yi > target).clamp(1, last) - 1;
        let (w, d0, d1) = self.segment_slopes(i);
        let (y0, y1) = (self.y[i], self.y[i + 1]);
        let (mut lo, mut hi) = (0.0f64, 1.0f64);
        let mut s = ((target - y0) / (y1 - y0)).clamp(0.0, 1.0);
        for _ in 0..100 {
            let g = hermite(s, w, y0, y1, d0, d1) - target;
            if g == 0.0 {
                break;
            }
            // g is decreasing in s
            if g > 0.0 {
                lo = s;
            } else {
                hi = s;
            }
            let slope = hermite_slope(s, w, y0, y1, d0, d1) * w;
            let mut next = s - g / slope;
            if !(next > lo && next < hi) {
                next = 0.5 * (lo + hi);
            }
            if (next - s).abs() <= 1e-16 || hi - lo <= 1e-16 {
                s = next;
                break;
            }
            s = next;
        }
        Ok((self.x[i] + s * w).exp())
    }
}

/// `F(t, z) = r^{2n-2} e^{2h(r)} f(r, z)` with `r = p^{-1}(t)`.
pub fn eval_f_transformed(map: &TransformMap, spec: &ProblemSpec, t: f64, z: f64) -> Result<f64> {
    transformed(map, spec, t, z, |r, z| spec.f(r, z))
}

fn transformed(
    map: &TransformMap,
    spec: &ProblemSpec,
    t: f64,
    z: f64,
    source: impl Fn(f64, f64) -> Result<f64>,
) -> Result<f64> {
    if !(z > 0.0) {
        return Err(Error::Precondition(format!(
            "F(t, z) requires z > 0, got z = {z}"
        )));
    }
    let r = map.eval_p_inverse(t)?;
    let weight = ((2 * spec.n - 2) as f64 * r.ln() + 2.0 * spec.h(r)?).exp();
    let v = weight * source(r, z)?;
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::Eval(format!("F({t}, {z}) is not finite")))
    }
}

/// Which spatial nonlinearity a [`TransformedField`] carries over to `t`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Nonlinearity {
    /// The problem's `f`.
    F,
    /// The comparison nonlinearity `l = g / 2`.
    HalfG,
}

/// `F(t, z)` as an ODE right-hand side.
#[derive(Debug, Clone, Copy)]
pub struct TransformedField<'a> {
    pub map: &'a TransformMap,
    pub spec: &'a ProblemSpec,
    pub source: Nonlinearity,
}

impl<'a> TransformedField<'a> {
    pub fn new(map: &'a TransformMap, spec: &'a ProblemSpec) -> Self {
        Self {
            map,
            spec,
            source: Nonlinearity::F,
        }
    }

    pub fn half_g(map: &'a TransformMap, spec: &'a ProblemSpec) -> Result<Self> {
        ensure(spec.g.is_some(), || {
            "no comparison function g supplied".into()
        })?;
        Ok(Self {
            map,
            spec,
            source: Nonlinearity::HalfG,
        })
    }
}

impl Field for TransformedField<'_> {
    fn eval(&self, t: f64, z: f64) -> Result<f64> {
        match self.source {
            Nonlinearity::F => eval_f_transformed(self.map, self.spec, t, z),
            Nonlinearity::HalfG => transformed(self.map, self.spec, t, z, |r, s| {
                Ok(0.5 * self.spec.g(r, s)?.expect("checked at construction"))
            }),
        }
    }
}

/// A radial profile `u(r)` sampled at increasing radii.
#[derive(Debug, Clone)]
pub struct RadialProfile {
    interp: MonotoneCubic,
}

impl RadialProfile {
    pub fn new(r: Vec<f64>, u: Vec<f64>) -> Result<Self> {
        Ok(Self {
            interp: MonotoneCubic::new(r, u)?,
        })
    }

    pub fn r(&self) -> &[f64] {
        self.interp.x()
    }

    pub fn u(&self) -> &[f64] {
        self.interp.y()
    }

    pub fn domain(&self) -> (f64, f64) {
        self.interp.domain()
    }

    /// Monotone-cubic resampling.
    pub fn sample(&self, r: f64) -> Result<f64> {
        self.interp.eval(r)
    }
}

/// `u(r) = z(p(r))`: map a trajectory in `t` back to radii.
pub fn lift_to_radial(map: &TransformMap, ode: &OdeSolution) -> Result<RadialProfile> {
    if ode.t.len() < 2 {
        return Err(Error::OutOfRange(
            "trajectory needs at least two points to lift".into(),
        ));
    }
    let r = ode
        .t
        .iter()
        .map(|&t| map.eval_p_inverse(t))
        .collect::<Result<Vec<_>>>()?;
    RadialProfile::new(r, ode.z.clone())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn flat3() -> (ProblemSpec, TransformMap) {
        let spec = ProblemSpec::new(3, "0", "r^(-3)*s^3", None, 1.0, 1.0).unwrap();
        let map = build_transform(&spec, 1.0).unwrap();
        (spec, map)
    }

    #[test]
    fn growth_examples() {
        let spec = ProblemSpec::new(3, "0", "s^3", None, 1.0, 1.0).unwrap();
        match check_growth(&spec, 1.0).unwrap() {
            GrowthVerdict::Finite { value } => assert!((value - 1.0).abs() < 1e-9),
            v => panic!("{v:?}"),
        }
        let spec = ProblemSpec::new(2, "0", "s^3", None, 1.0, 1.0).unwrap();
        match check_growth(&spec, 1.0).unwrap() {
            GrowthVerdict::Divergent { evidence } => {
                for b in evidence {
                    assert!((b - std::f64::consts::LN_2).abs() < 1e-10);
                }
            }
            v => panic!("{v:?}"),
        }
        let spec = ProblemSpec::new(3, "-1*log(r)", "s^3", None, 1.0, 1.0).unwrap();
        assert!(!check_growth(&spec, 1.0).unwrap().is_finite());
    }

    #[test]
    fn growth_rejects_radius_below_r0() {
        let spec = ProblemSpec::new(3, "0", "s^3", None, 1.0, 1.0).unwrap();
        assert!(matches!(
            check_growth(&spec, 0.5),
            Err(Error::Precondition(_))
        ));
    }

    #[test]
    fn spec_validation() {
        assert!(ProblemSpec::new(1, "0", "s", None, 1.0, 1.0).is_err());
        assert!(ProblemSpec::new(3, "0", "s", None, 0.0, 1.0).is_err());
        assert!(ProblemSpec::new(3, "0", "s", None, 1.0, -1.0).is_err());
        let spec = ProblemSpec::new(3, "0", "s", None, 1.0, 1.0).unwrap();
        assert!(spec.clone().with_quad_tol(1e-2).is_err());
        assert!(spec.clone().with_r_big(5.0).is_err());
        assert!(matches!(
            ProblemSpec::new(3, "x", "s", None, 1.0, 1.0),
            Err(Error::Expr(_))
        ));
    }

    #[test]
    fn closed_form_transform() {
        let (_, map) = flat3();
        assert!((map.eval_p(2.0).unwrap() + 0.5).abs() < 1e-9);
        assert!((map.eval_p_inverse(-0.25).unwrap() - 4.0).abs() < 1e-8);
        assert!(matches!(map.eval_p_inverse(0.1), Err(Error::OutOfRange(_))));
        assert!(matches!(
            map.eval_p_inverse(-1.5),
            Err(Error::OutOfRange(_))
        ));
        assert!(matches!(map.eval_p(0.5), Err(Error::OutOfRange(_))));
        match map.tail() {
            TailModel::Power { coef, exponent } => {
                assert!((coef - 1.0).abs() < 1e-9 && (exponent - 2.0).abs() < 1e-9)
            }
            t => panic!("{t:?}"),
        }
    }

    #[test]
    fn log_potential_transform() {
        let spec = ProblemSpec::new(2, "2*log(r)", "s^3", None, 1.0, 1.0).unwrap();
        let map = build_transform(&spec, 1.0).unwrap();
        assert!((map.eval_p(1.0).unwrap() + 0.5).abs() < 1e-9);
    }

    #[test]
    fn growth_violation_blocks_transform() {
        let spec = ProblemSpec::new(2, "0", "s^3", None, 1.0, 1.0).unwrap();
        assert!(matches!(
            build_transform(&spec, 1.0),
            Err(Error::GrowthViolated(_))
        ));
    }

    #[test]
    fn roundtrip_and_monotone() {
        let spec = ProblemSpec::new(3, "0.5*log(r) + sin(r)/r", "s^3", None, 1.0, 1.0).unwrap();
        let map = build_transform(&spec, 1.0).unwrap();
        let mut prev = f64::NEG_INFINITY;
        for k in 0..200 {
            let r = 1.0 * 1e7f64.powf(k as f64 / 199.0);
            let t = map.eval_p(r).unwrap();
            assert!(t > prev && t < 0.0);
            prev = t;
            let back = map.eval_p_inverse(t).unwrap();
            assert!((back - r).abs() <= 1e-9 * r, "r={r} back={back}");
        }
    }

    #[test]
    fn derivative_matches_integrand() {
        let spec = ProblemSpec::new(4, "0.3*log(r) + 1/r", "s^3", None, 0.5, 1.0).unwrap();
        let map = build_transform(&spec, 0.5).unwrap();
        for k in 0..60 {
            let r = 0.6 * 1e5f64.powf(k as f64 / 59.0);
            let d = 1e-4 * r;
            let fd = (map.eval_p(r + d).unwrap() - map.eval_p(r - d).unwrap()) / (2.0 * d);
            let exact = spec.p_prime(r).unwrap();
            assert!(
                (fd - exact).abs() <= 1e-5 * exact,
                "r={r} fd={fd} exact={exact}"
            );
        }
    }

    #[test]
    fn table_agrees_with_growth_integral() {
        let spec = ProblemSpec::new(3, "0.2*log(r)", "s^3", None, 1.0, 1.0).unwrap();
        let map = build_transform(&spec, 1.0).unwrap();
        let GrowthVerdict::Finite { value } = check_growth(&spec, 1.0).unwrap() else {
            panic!()
        };
        // exact: ∫_1^∞ r^{-2.2} dr = 1/1.2
        assert!((value - 1.0 / 1.2).abs() < 1e-9);
        assert!((map.t_min() + 1.0 / 1.2).abs() < 1e-9);
        let big = map.r_table_end();
        let GrowthVerdict::Finite { value: tail } = check_growth(&spec, big).unwrap() else {
            panic!()
        };
        for k in 0..20 {
            let r = big * 10f64.powi(k);
            assert!(map.eval_p(r).unwrap().abs() <= tail * (1.0 + 1e-9));
        }
    }

    #[test]
    fn exponential_tail() {
        let spec = ProblemSpec::new(2, "r", "s^3", None, 1.0, 1.0)
            .unwrap()
            .with_r_big(50.0)
            .unwrap();
        let map = build_transform(&spec, 1.0).unwrap();
        assert!(matches!(map.tail(), TailModel::Exponential { .. }));
        // exact p(1) = -E1(1)
        let e1_of_1 = 0.219_383_934_395_520_27;
        assert!((map.t_min() + e1_of_1).abs() < 1e-8);
        let r = map.eval_p_inverse(-1e-30).unwrap();
        assert!(r > 50.0 && r.is_finite());
    }

    #[test]
    fn transformed_nonlinearity() {
        let spec = ProblemSpec::new(3, "0", "s^3", None, 1.0, 1.0).unwrap();
        let map = build_transform(&spec, 1.0).unwrap();
        let v = eval_f_transformed(&map, &spec, -0.5, 2.0).unwrap();
        assert!((v - 128.0).abs() < 1e-6);
        let (spec, map) = flat3();
        let v = eval_f_transformed(&map, &spec, -0.5, 2.0).unwrap();
        assert!((v - 16.0).abs() < 1e-7);
        assert!(matches!(
            eval_f_transformed(&map, &spec, -0.5, 0.0),
            Err(Error::Precondition(_))
        ));
        assert!(matches!(
            eval_f_transformed(&map, &spec, 0.5, 1.0),
            Err(Error::OutOfRange(_))
        ));
    }

    #[test]
    fn lift_exact_profile() {
        let (_, map) = flat3();
        let t: Vec<f64> = (0..200).map(|k| -1.0 + 0.99 * k as f64 / 199.0).collect();
        let z: Vec<f64> = t.iter().map(|t| 2f64.sqrt() / -t).collect();
        let ode = OdeSolution::from_samples(t.clone(), z, vec![0.0; 200]);
        let prof = lift_to_radial(&map, &ode).unwrap();
        for k in 0..50 {
            let r = 1.0 + 99.0 * k as f64 / 49.0;
            let u = prof.sample(r).unwrap();
            assert!((u - 2f64.sqrt() * r).abs() < 1e-8 * r, "r={r} u={u}");
        }
        let empty = OdeSolution::from_samples(vec![], vec![], vec![]);
        assert!(matches!(
            lift_to_radial(&map, &empty),
            Err(Error::OutOfRange(_))
        ));
    }
}
