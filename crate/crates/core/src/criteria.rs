//! Numerical audit of the structural hypotheses on `f`, `g` and `h`:
//! positivity, superlinearity, monotonicity of `p e^h g`, the existence
//! criterion `-∫_{t0}^0 t F(t, s) dt < ∞` and the integral identity
//! relating it to the radial form.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{ensure, Error, Result};
use crate::exprdsl::ExprAst;
use crate::quadrature::{integrate, sum_blocks, BlockRule, SeriesVerdict};
use crate::transform::{build_transform, check_growth, GrowthVerdict, ProblemSpec, TransformMap};

/// Superlinearity holds when the sampled exponent exceeds `1 + LAMBDA_MARGIN`.
pub const LAMBDA_MARGIN: f64 = 1e-6;
/// Finite differences smaller than this fraction of `|q|` carry no sign.
pub const SIGN_TOL: f64 = 1e-12;
/// Dyadic blocks `[-2^{-k}|t0|, -2^{-k-1}|t0|]` used by the existence criterion.
pub const EXISTENCE_BLOCKS: usize = 41;

const SCALES: [f64; 3] = [2.0, 4.0, 8.0];

/// Rectangle `[r0, r1] x [s0, s1]` sampled on a geometric `grid x grid` lattice.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Region {
    pub r0: f64,
    pub r1: f64,
    pub s0: f64,
    pub s1: f64,
    pub grid: usize,
}

impl Region {
    /// `[r0, 100 r0] x [s0, 100 s0]` on a 32-point lattice.
    pub fn for_spec(spec: &ProblemSpec) -> Self {
        Self {
            r0: spec.r0,
            r1: 100.0 * spec.r0,
            s0: spec.s0,
            s1: 100.0 * spec.s0,
            grid: 32,
        }
    }

    pub fn validate(&self) -> Result<()> {
        ensure(
            0.0 < self.r0 && self.r0 < self.r1 && self.r1.is_finite(),
            || format!("bad radial range [{}, {}]", self.r0, self.r1),
        )?;
        ensure(
            0.0 < self.s0 && self.s0 < self.s1 && self.s1.is_finite(),
            || format!("bad value range [{}, {}]", self.s0, self.s1),
        )?;
        ensure(self.grid >= 2, || {
            "region grid needs at least 2 points".into()
        })
    }

    pub fn radii(&self) -> Vec<f64> {
        geometric(self.r0, self.r1, self.grid)
    }

    pub fn values(&self) -> Vec<f64> {
        geometric(self.s0, self.s1, self.grid)
    }
}

fn geometric(a: f64, b: f64, n: usize) -> Vec<f64> {
    let ratio = (b / a).ln() / (n - 1) as f64;
    (0..n)
        .map(|i| {
            if i == n - 1 {
                b
            } else {
                a * (ratio * i as f64).exp()
            }
        })
        .collect()
}

/// Sampled positivity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum PositivityVerdict {
    Pass,
    Fail { r: f64, s: f64, value: f64 },
}

/// Sample point `(r, s, v)` of a superlinearity test.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Witness {
    pub r: f64,
    pub s: f64,
    pub v: f64,
}

/// `λ̂ = inf log(g(r, v s) / g(r, s)) / log v` over the sampled lattice.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum SuperlinearVerdict {
    Pass { lambda_hat: f64, witness: Witness },
    Fail { lambda_hat: f64, witness: Witness },
    Skipped { reason: String },
}

impl SuperlinearVerdict {
    pub fn passed(&self) -> bool {
        matches!(self, SuperlinearVerdict::Pass { .. })
    }
}

/// Pair of samples `(x_a, at)`, `(x_b, at)` with `x_a < x_b`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StepWitness {
    pub x_a: f64,
    pub x_b: f64,
    pub at: f64,
    pub delta: f64,
}

/// Monotonicity in the first variable at every sampled value of the second.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum MonotoneVerdict {
    Increasing,
    Decreasing,
    Fail {
        rising: StepWitness,
        falling: StepWitness,
    },
    Skipped {
        reason: String,
    },
}

/// Superlinearity of a positive function sampled over `xs x ys`.
pub fn check_superlinearity_with<G>(g: G, xs: &[f64], ys: &[f64]) -> Result<SuperlinearVerdict>
where
    G: Fn(f64, f64) -> Result<f64>,
{
    let positive = |r: f64, s: f64| -> Result<f64> {
        let v = g(r, s)?;
        if v > 0.0 && v.is_finite() {
            Ok(v)
        } else {
            Err(Error::NonPositiveSample { r, s, value: v })
        }
    };
    let mut best = (
        f64::INFINITY,
        Witness {
            r: xs[0],
            s: ys[0],
            v: SCALES[0],
        },
    );
    for &r in xs {
        for &s in ys {
            let base = positive(r, s)?.ln();
            for &v in &SCALES {
                let lambda = (positive(r, v * s)?.ln() - base) / v.ln();
                if lambda < best.0 {
                    best = (lambda, Witness { r, s, v });
                }
            }
        }
    }
    let (lambda_hat, witness) = best;
    Ok(if lambda_hat > 1.0 + LAMBDA_MARGIN {
        SuperlinearVerdict::Pass {
            lambda_hat,
            witness,
        }
    } else {
        SuperlinearVerdict::Fail {
            lambda_hat,
            witness,
        }
    })
}

/// Superlinearity of `expr(r, s)` over `region`.
pub fn check_superlinearity(expr: &ExprAst, region: &Region) -> Result<SuperlinearVerdict> {
    region.validate()?;
    ensure(expr.vars().len() == 2, || {
        format!("expression `{}` must be in (r, s)", expr.source())
    })?;
    check_superlinearity_with(
        |r, s| Ok(expr.eval_at(&[r, s])?),
        &region.radii(),
        &region.values(),
    )
}

/// First failing sample of `g > 0` over `xs x ys` (scaled values included).
pub fn check_positivity_with<G>(g: G, xs: &[f64], ys: &[f64]) -> Result<PositivityVerdict>
where
    G: Fn(f64, f64) -> Result<f64>,
{
    for &r in xs {
        for &s in ys {
            for v in [1.0, 2.0, 4.0, 8.0] {
                let value = g(r, v * s)?;
                if !(value > 0.0) {
                    return Ok(PositivityVerdict::Fail { r, s: v * s, value });
                }
            }
        }
    }
    Ok(PositivityVerdict::Pass)
}

/// Uniform sign of `q(x_{i+1}, y) - q(x_i, y)` over the lattice.
pub fn check_monotone_with<Q>(q: Q, xs: &[f64], ys: &[f64]) -> Result<MonotoneVerdict>
where
    Q: Fn(f64, f64) -> Result<f64>,
{
    let mut rising: Option<StepWitness> = None;
    let mut falling: Option<StepWitness> = None;
    for &y in ys {
        let values = xs.iter().map(|&x| q(x, y)).collect::<Result<Vec<_>>>()?;
        for i in 0..xs.len() - 1 {
            let delta = values[i + 1] - values[i];
            if delta.abs() <= SIGN_TOL * values[i].abs().max(values[i + 1].abs()) {
                continue;
            }
            let w = StepWitness {
                x_a: xs[i],
                x_b: xs[i + 1],
                at: y,
                delta,
            };
            if delta > 0.0 {
                rising.get_or_insert(w);
            } else {
                falling.get_or_insert(w);
            }
        }
    }
    Ok(match (rising, falling) {
        (Some(rising), Some(falling)) => MonotoneVerdict::Fail { rising, falling },
        (None, Some(_)) => MonotoneVerdict::Decreasing,
        _ => MonotoneVerdict::Increasing,
    })
}

/// Which spatial nonlinearity a check applies to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Which {
    F,
    G,
}

/// Monotonicity in `r` of `q(r, s) = p(r) e^{h(r)} expr(r, s)`.
pub fn check_c3_monotonicity(
    spec: &ProblemSpec,
    map: &TransformMap,
    which: Which,
    region: &Region,
) -> Result<MonotoneVerdict> {
    region.validate()?;
    ensure(region.r0 >= map.r_min(), || {
        format!(
            "region starts at r = {} below the transform range {}",
            region.r0,
            map.r_min()
        )
    })?;
    let expr = match which {
        Which::F => &spec.f,
        Which::G => spec
            .g
            .as_ref()
            .ok_or_else(|| Error::Precondition("no comparison function g supplied".into()))?,
    };
    let q = |r: f64, s: f64| -> Result<f64> {
        let e = expr.eval_at(&[r, s])?;
        if !(e > 0.0) {
            return Err(Error::NonPositiveSample { r, s, value: e });
        }
        Ok(map.eval_p(r)? * spec.h(r)?.exp() * e)
    };
    check_monotone_with(q, &region.radii(), &region.values())
}

/// Existence criterion at one value of `s`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExistenceEntry {
    pub s: f64,
    pub verdict: SeriesVerdict,
}

impl ExistenceEntry {
    pub fn finite_value(&self) -> Option<f64> {
        match self.verdict {
            SeriesVerdict::Converged { value, .. } => Some(value),
            SeriesVerdict::Divergent { .. } => None,
        }
    }
}

// -∫_{t0}^0 t F(t, s) dt over dyadic blocks towards 0.
fn criterion_series(
    map: &TransformMap,
    spec: &ProblemSpec,
    s: f64,
    t0: f64,
) -> Result<SeriesVerdict> {
    let tol = map.quad_tol();
    let mut total = 0.0;
    sum_blocks(
        |k| {
            let a = t0 * 0.5f64.powi(k as i32);
            let q = integrate(
                |t| Ok(-t * crate::transform::eval_f_transformed(map, spec, t, s)?),
                a,
                0.5 * a,
                tol,
                tol * total,
            )?;
            total += q.value;
            Ok(q.value)
        },
        BlockRule::new(tol, EXISTENCE_BLOCKS),
    )
}

pub fn existence_criterion(
    map: &TransformMap,
    spec: &ProblemSpec,
    s_values: &[f64],
    t0: f64,
) -> Result<Vec<ExistenceEntry>> {
    let t_min = map.t_min();
    ensure(t0 < 0.0 && t0 >= t_min * (1.0 + 1e-12), || {
        format!("t0 = {t0} outside the transform range [{t_min}, 0)")
    })?;
    for &s in s_values {
        ensure(s > spec.s0 && s.is_finite(), || {
            format!("criterion value s = {s} must exceed s0 = {}", spec.s0)
        })?;
    }
    s_values
        .par_iter()
        .map(|&s| {
            Ok(ExistenceEntry {
                s,
                verdict: criterion_series(map, spec, s, t0)?,
            })
        })
        .collect()
}

/// Surface measure of the unit sphere in `R^n`: `2 π^{n/2} / Γ(n/2)`.
pub fn sigma_n(n: usize) -> f64 {
    use std::f64::consts::PI;
    // Γ(n/2) from Γ(1) = 1 or Γ(1/2) = √π
    let (mut x, mut gamma) = if n.is_multiple_of(2) {
        (1.0, 1.0)
    } else {
        (0.5, PI.sqrt())
    };
    while x < n as f64 / 2.0 {
        gamma *= x;
        x += 1.0;
    }
    2.0 * PI.powf(n as f64 / 2.0) / gamma
}

/// Both sides of the identity
/// `-σ_n ∫_R^∞ r^{n-1} p e^h f dr = -σ_n ∫_{p(R)}^0 t F(t, s) dt`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct KlkSides {
    pub radial: f64,
    pub transformed: f64,
    pub residual: f64,
}

pub fn klk_identity_sides(
    spec: &ProblemSpec,
    map: &TransformMap,
    r: f64,
    s: f64,
) -> Result<KlkSides> {
    ensure(r >= map.r_min(), || {
        format!("R = {r} below the transform range {}", map.r_min())
    })?;
    ensure(s > 0.0, || format!("s = {s} must be positive"))?;
    let sigma = sigma_n(spec.n);
    let tol = map.quad_tol();
    let n1 = spec.n as f64 - 1.0;
    let integrand = |x: f64| -> Result<f64> {
        Ok(-(n1 * x.ln() + spec.h(x)?).exp() * map.eval_p(x)? * spec.f(x, s)?)
    };
    let max_blocks = ((f64::MAX / r).log2().floor() as usize)
        .saturating_sub(2)
        .min(600);
    let mut total = 0.0;
    let radial = sum_blocks(
        |k| {
            let a = r * 2f64.powi(k as i32);
            let q = integrate(integrand, a, 2.0 * a, tol, tol * total)?;
            total += q.value;
            Ok(q.value)
        },
        BlockRule::new(tol, max_blocks),
    )?;
    let radial = match radial {
        SeriesVerdict::Converged { value, .. } => sigma * value,
        SeriesVerdict::Divergent { blocks } => {
            return Err(Error::DivergentSide(format!(
                "radial side at R = {r}, s = {s}: blocks stopped decaying (last {:e})",
                blocks.last().copied().unwrap_or(f64::NAN)
            )))
        }
    };
    let transformed = match criterion_series(map, spec, s, map.eval_p(r)?)? {
        SeriesVerdict::Converged { value, .. } => sigma * value,
        SeriesVerdict::Divergent { blocks } => {
            return Err(Error::DivergentSide(format!(
                "transformed side at R = {r}, s = {s}: blocks stopped decaying (last {:e})",
                blocks.last().copied().unwrap_or(f64::NAN)
            )))
        }
    };
    let residual = (radial - transformed).abs() / radial.abs().max(transformed.abs());
    Ok(KlkSides {
        radial,
        transformed,
        residual,
    })
}

/// Relative residual of the integral identity at `(R, s)`.
pub fn klk_identity_residual(
    spec: &ProblemSpec,
    map: &TransformMap,
    r: f64,
    s: f64,
) -> Result<f64> {
    Ok(klk_identity_sides(spec, map, r, s)?.residual)
}

/// Overall conclusion of a report.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Verdict {
    ExistsRadial,
    NoSolutionExpected,
    Inconclusive,
}

/// `f >= g / 2` on the sampled region.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum DominanceVerdict {
    Pass,
    Fail { r: f64, s: f64, f: f64, half_g: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KlkPoint {
    pub r: f64,
    pub s: f64,
    pub sides: Option<KlkSides>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CriterionReport {
    pub growth: GrowthVerdict,
    pub c1_positive: PositivityVerdict,
    pub c2_superlinear: SuperlinearVerdict,
    pub c3_monotone: MonotoneVerdict,
    pub existence: Vec<ExistenceEntry>,
    /// Largest residual over `klk_points`; absent if any side diverged.
    pub klk_residual: Option<f64>,
    pub klk_points: Vec<KlkPoint>,
    /// Present when `g` is supplied.
    pub f_dominates_half_g: Option<DominanceVerdict>,
    pub transformed_superlinear: SuperlinearVerdict,
    pub transformed_derivative_superlinear: SuperlinearVerdict,
    pub transformed_monotone_in_t: MonotoneVerdict,
    /// Smallest tested `s` with a finite criterion.
    pub threshold_s: Option<f64>,
    pub verdict: Verdict,
}

/// Knobs of [`assemble_report`].
#[derive(Debug, Clone, PartialEq)]
pub struct ReportOptions {
    pub region: Region,
    /// Values of `s` for the existence criterion; defaults to `2 s0, 4 s0, 8 s0`.
    pub s_values: Vec<f64>,
    /// Start of the criterion integral; defaults to `p(r0)`.
    pub t0: Option<f64>,
    /// `(R, s)` pairs for the integral identity.
    pub klk_points: Vec<(f64, f64)>,
}

impl ReportOptions {
    pub fn for_spec(spec: &ProblemSpec) -> Self {
        let s0 = spec.s0;
        let r0 = spec.r0;
        Self {
            region: Region::for_spec(spec),
            s_values: vec![2.0 * s0, 4.0 * s0, 8.0 * s0],
            t0: None,
            klk_points: vec![(r0, 2.0 * s0), (2.0 * r0, 4.0 * s0), (4.0 * r0, 8.0 * s0)],
        }
    }
}

fn skipped(reason: &str) -> (SuperlinearVerdict, MonotoneVerdict) {
    (
        SuperlinearVerdict::Skipped {
            reason: reason.into(),
        },
        MonotoneVerdict::Skipped {
            reason: reason.into(),
        },
    )
}

pub fn assemble_report(spec: &ProblemSpec, opts: &ReportOptions) -> Result<CriterionReport> {
    spec.validate()?;
    let region = opts.region;
    region.validate()?;
    let (radii, values) = (region.radii(), region.values());
    let growth = check_growth(spec, spec.r0)?;

    let structural = |r: f64, s: f64| -> Result<f64> {
        match spec.g(r, s)? {
            Some(g) => Ok(g),
            None => spec.f(r, s),
        }
    };
    let c1_positive = check_positivity_with(structural, &radii, &values)?;
    let c2_superlinear = match c1_positive {
        PositivityVerdict::Pass => check_superlinearity_with(structural, &radii, &values)?,
        PositivityVerdict::Fail { .. } => skipped("positivity fails").0,
    };
    let f_dominates_half_g = match spec.g {
        Some(_) => Some(check_dominance(spec, &radii, &values)?),
        None => None,
    };

    let mut report = CriterionReport {
        growth: growth.clone(),
        c1_positive,
        c2_superlinear,
        c3_monotone: skipped("growth condition fails").1,
        existence: Vec::new(),
        klk_residual: None,
        klk_points: Vec::new(),
        f_dominates_half_g,
        transformed_superlinear: skipped("growth condition fails").0,
        transformed_derivative_superlinear: skipped("growth condition fails").0,
        transformed_monotone_in_t: skipped("growth condition fails").1,
        threshold_s: None,
        verdict: Verdict::NoSolutionExpected,
    };
    if !growth.is_finite() {
        return Ok(report);
    }

    let map = build_transform(spec, spec.r0)?;
    let which = if spec.g.is_some() { Which::G } else { Which::F };
    report.c3_monotone = match report.c1_positive {
        PositivityVerdict::Pass => check_c3_monotonicity(spec, &map, which, &region)?,
        PositivityVerdict::Fail { .. } => skipped("positivity fails").1,
    };

    let t0 = opts.t0.unwrap_or(map.t_min());
    report.existence = existence_criterion(&map, spec, &opts.s_values, t0)?;
    report.threshold_s = report
        .existence
        .iter()
        .filter(|e| e.finite_value().is_some())
        .map(|e| e.s)
        .fold(None, |m: Option<f64>, s| Some(m.map_or(s, |m| m.min(s))));

    report.klk_points = opts
        .klk_points
        .par_iter()
        .map(|&(r, s)| match klk_identity_sides(spec, &map, r, s) {
            Ok(sides) => Ok(KlkPoint {
                r,
                s,
                sides: Some(sides),
                error: None,
            }),
            Err(e @ (Error::DivergentSide(_) | Error::QuadratureFailure(_))) => Ok(KlkPoint {
                r,
                s,
                sides: None,
                error: Some(e.to_string()),
            }),
            Err(e) => Err(e),
        })
        .collect::<Result<Vec<_>>>()?;
    if report.klk_points.iter().all(|p| p.sides.is_some()) && !report.klk_points.is_empty() {
        report.klk_residual = report
            .klk_points
            .iter()
            .filter_map(|p| p.sides.map(|s| s.residual))
            .reduce(f64::max);
    }

    // F on |t| in [|t0| / 100, |t0|], z over the value range
    let ts: Vec<f64> = geometric(-t0, -t0 / 100.0, region.grid)
        .into_iter()
        .map(|a| -a)
        .collect();
    let field = |t: f64, z: f64| crate::transform::eval_f_transformed(&map, spec, t, z);
    let field_z = |t: f64, z: f64| {
        let step = 1e-6 * z;
        Ok((field(t, z + step)? - field(t, z - step)?) / (2.0 * step))
    };
    report.transformed_superlinear =
        superlinear_or_skip(check_superlinearity_with(field, &ts, &values))?;
    report.transformed_derivative_superlinear =
        superlinear_or_skip(check_superlinearity_with(field_z, &ts, &values))?;
    let mut ts_increasing = ts.clone();
    ts_increasing.sort_by(f64::total_cmp);
    report.transformed_monotone_in_t = check_monotone_with(field, &ts_increasing, &values)?;

    let all_finite = report.existence.iter().all(|e| e.finite_value().is_some());
    let all_divergent = report.existence.iter().all(|e| e.finite_value().is_none());
    report.verdict = if all_finite && report.c2_superlinear.passed() {
        Verdict::ExistsRadial
    } else if all_divergent && !report.existence.is_empty() {
        Verdict::NoSolutionExpected
    } else {
        Verdict::Inconclusive
    };
    Ok(report)
}

fn superlinear_or_skip(v: Result<SuperlinearVerdict>) -> Result<SuperlinearVerdict> {
    match v {
        Err(Error::NonPositiveSample { r, s, value }) => Ok(SuperlinearVerdict::Skipped {
            reason: format!("non-positive sample {value} at ({r}, {s})"),
        }),
        other => other,
    }
}

fn check_dominance(spec: &ProblemSpec, radii: &[f64], values: &[f64]) -> Result<DominanceVerdict> {
    for &r in radii {
        for &s in values {
            let f = spec.f(r, s)?;
            let half_g = 0.5 * spec.g(r, s)?.expect("g present");
            if f < half_g {
                return Ok(DominanceVerdict::Fail { r, s, f, half_g });
            }
        }
    }
    Ok(DominanceVerdict::Pass)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exprdsl::parse_expr;
    use std::f64::consts::PI;

    fn region() -> Region {
        Region {
            r0: 1.0,
            r1: 100.0,
            s0: 0.5,
            s1: 50.0,
            grid: 16,
        }
    }

    fn expr(text: &str) -> ExprAst {
        parse_expr(text, &["r", "s"]).unwrap()
    }

    fn lambda(v: &SuperlinearVerdict) -> f64 {
        match v {
            SuperlinearVerdict::Pass { lambda_hat, .. }
            | SuperlinearVerdict::Fail { lambda_hat, .. } => *lambda_hat,
            SuperlinearVerdict::Skipped { reason } => panic!("{reason}"),
        }
    }

    #[test]
    fn superlinearity_examples() {
        let v = check_superlinearity(&expr("s^3"), &region()).unwrap();
        assert!(v.passed() && (lambda(&v) - 3.0).abs() < 1e-9);
        let v = check_superlinearity(&expr("s"), &region()).unwrap();
        assert!(!v.passed() && (lambda(&v) - 1.0).abs() < 1e-9);
        let v = check_superlinearity(&expr("r^(-3)*s^2"), &region()).unwrap();
        assert!(v.passed() && (lambda(&v) - 2.0).abs() < 1e-9);
    }

    #[test]
    fn superlinearity_reports_nonpositive_samples() {
        match check_superlinearity(&expr("s - 1"), &region()) {
            Err(Error::NonPositiveSample { s, .. }) => assert!(s <= 1.0),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn superlinearity_witness_at_infimum() {
        // exponent 1.5 for small s, 3 for large s
        let v = check_superlinearity(&expr("s^3 + s^1.5"), &region()).unwrap();
        match v {
            SuperlinearVerdict::Pass {
                witness,
                lambda_hat,
            } => {
                assert_eq!(witness.s, 0.5);
                assert!(lambda_hat > 1.5 && lambda_hat < 3.0);
            }
            other => panic!("{other:?}"),
        }
    }

    fn spec3(f: &str, g: Option<&str>) -> (ProblemSpec, TransformMap) {
        let spec = ProblemSpec::new(3, "0", f, g, 1.0, 0.5).unwrap();
        let map = build_transform(&spec, 1.0).unwrap();
        (spec, map)
    }

    #[test]
    fn c3_examples() {
        let (spec, map) = spec3("s^3", Some("r^(-3)*s^3"));
        assert_eq!(
            check_c3_monotonicity(&spec, &map, Which::G, &region()).unwrap(),
            MonotoneVerdict::Increasing
        );
        let (spec, map) = spec3("exp(r)*s^3", None);
        let reg = Region {
            r0: 1.5,
            ..region()
        };
        assert_eq!(
            check_c3_monotonicity(&spec, &map, Which::F, &reg).unwrap(),
            MonotoneVerdict::Decreasing
        );
        let (spec, map) = spec3("(2+sin(r))*s^3", None);
        match check_c3_monotonicity(&spec, &map, Which::F, &region()).unwrap() {
            MonotoneVerdict::Fail { rising, falling } => {
                assert!(rising.delta > 0.0 && falling.delta < 0.0);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn existence_examples() {
        let (spec, map) = spec3("r^(-3)*s^3", None);
        let out = existence_criterion(&map, &spec, &[1.0], -1.0).unwrap();
        let value = out[0].finite_value().expect("finite");
        assert!((value - 1.0).abs() < 1e-6, "{value}");

        for f in ["r^(-2)*s^3", "s^3"] {
            let (spec, map) = spec3(f, None);
            let out = existence_criterion(&map, &spec, &[1.0], -1.0).unwrap();
            assert!(out[0].finite_value().is_none(), "{f}");
        }
    }

    #[test]
    fn existence_scales_linearly() {
        let (spec, map) = spec3("r^(-4)*s^3", None);
        let (spec7, map7) = spec3("7*r^(-4)*s^3", None);
        let a = existence_criterion(&map, &spec, &[1.0, 2.0], -1.0).unwrap();
        let b = existence_criterion(&map7, &spec7, &[1.0, 2.0], -1.0).unwrap();
        for (x, y) in a.iter().zip(&b) {
            let (x, y) = (x.finite_value().unwrap(), y.finite_value().unwrap());
            assert!((y - 7.0 * x).abs() < 1e-8 * y);
        }
    }

    #[test]
    fn existence_preconditions() {
        let (spec, map) = spec3("r^(-3)*s^3", None);
        assert!(existence_criterion(&map, &spec, &[0.25], -1.0).is_err());
        assert!(existence_criterion(&map, &spec, &[1.0], -2.0).is_err());
    }

    #[test]
    fn sigma_values() {
        assert!((sigma_n(2) - 2.0 * PI).abs() < 1e-14);
        assert!((sigma_n(3) - 4.0 * PI).abs() < 1e-14);
        assert!((sigma_n(4) - 2.0 * PI * PI).abs() < 1e-13);
        assert!((sigma_n(5) - 8.0 * PI * PI / 3.0).abs() < 1e-13);
    }

    #[test]
    fn klk_examples() {
        let (spec, map) = spec3("r^(-3)*s^3", None);
        let sides = klk_identity_sides(&spec, &map, 1.0, 1.0).unwrap();
        assert!(sides.residual < 1e-6);
        assert!((sides.radial - 4.0 * PI).abs() < 1e-6 * 4.0 * PI);
        let (spec, map) = spec3("r^(-4)*s^3", None);
        let sides = klk_identity_sides(&spec, &map, 1.0, 1.0).unwrap();
        assert!(sides.residual < 1e-6);
        assert!((sides.transformed - 2.0 * PI).abs() < 1e-6 * 2.0 * PI);
        let (spec, map) = spec3("r^(-2)*s^3", None);
        assert!(matches!(
            klk_identity_sides(&spec, &map, 1.0, 1.0),
            Err(Error::DivergentSide(_))
        ));
    }

    #[test]
    fn reports() {
        let spec = ProblemSpec::new(3, "0", "r^(-3)*s^3", Some("r^(-3)*s^3"), 1.0, 0.5).unwrap();
        let rep = assemble_report(&spec, &ReportOptions::for_spec(&spec)).unwrap();
        assert_eq!(rep.verdict, Verdict::ExistsRadial);
        assert_eq!(rep.c3_monotone, MonotoneVerdict::Increasing);
        assert_eq!(rep.f_dominates_half_g, Some(DominanceVerdict::Pass));
        assert_eq!(rep.threshold_s, Some(1.0));
        assert!(rep.klk_residual.unwrap() < 1e-5);
        assert!(rep.transformed_superlinear.passed());
        assert!(rep.transformed_derivative_superlinear.passed());

        let spec = ProblemSpec::new(2, "0", "s^3", None, 1.0, 0.5).unwrap();
        let rep = assemble_report(&spec, &ReportOptions::for_spec(&spec)).unwrap();
        assert_eq!(rep.verdict, Verdict::NoSolutionExpected);
        assert!(!rep.growth.is_finite());

        let spec = ProblemSpec::new(3, "-1*log(r)", "s^3", None, 1.0, 0.5).unwrap();
        let rep = assemble_report(&spec, &ReportOptions::for_spec(&spec)).unwrap();
        assert_eq!(rep.verdict, Verdict::NoSolutionExpected);
        assert!(!rep.growth.is_finite());

        let spec = ProblemSpec::new(3, "0", "s^3", None, 1.0, 0.5).unwrap();
        let rep = assemble_report(&spec, &ReportOptions::for_spec(&spec)).unwrap();
        assert!(rep.growth.is_finite());
        assert_eq!(rep.verdict, Verdict::NoSolutionExpected);
        assert!(rep.klk_residual.is_none());
    }
}
