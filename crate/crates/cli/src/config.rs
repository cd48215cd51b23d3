use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use blowup_core::odesolver::OdeControl;
use blowup_core::pde_oracle::OracleControl;
use blowup_core::transform::ProblemSpec;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

/// Config file contents: flat `key = value` pairs, expressions quoted.
///
/// Command parameters may be given here or as flags; flags win.
#[derive(Debug, Clone, Default, PartialEq, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub n: Option<usize>,
    pub h: Option<String>,
    pub f: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub g: Option<String>,
    pub r0: Option<f64>,
    pub s0: Option<f64>,
    pub quad_tol: Option<f64>,
    pub r_big: Option<f64>,
    pub output_dir: Option<String>,
    pub ode_tol: Option<f64>,
    pub z_max: Option<f64>,
    pub rho_tol: Option<f64>,
    pub slope_tol: Option<f64>,
    pub bvp_nodes: Option<usize>,
    pub oracle_tol: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub t0: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub r_grid: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub anchor: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mode: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rho: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub t_bar: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub k: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub m: Option<f64>,
    #[serde(rename = "M", skip_serializing_if = "Option::is_none")]
    pub big_m: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub annulus: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub grid: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bc_in: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bc_out: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub perturb: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub compare: Option<String>,
}

pub const DEFAULT_OUTPUT_DIR: &str = "runs";

impl RunConfig {
    pub fn parse(text: &str) -> CliResult<Self> {
        toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text).map_err(|e| match e {
            CliError::Config(m) => CliError::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    /// Fill every defaulted key so the written copy is self-describing.
    pub fn resolve_defaults(&mut self) -> CliResult<()> {
        let spec = self.problem_spec()?;
        let ode = OdeControl::default();
        self.quad_tol = Some(spec.quad_tol);
        self.r_big = Some(spec.r_big);
        self.output_dir
            .get_or_insert_with(|| DEFAULT_OUTPUT_DIR.into());
        self.ode_tol.get_or_insert(ode.tol);
        self.z_max.get_or_insert(ode.z_max);
        self.rho_tol.get_or_insert(ode.rho_tol);
        self.slope_tol.get_or_insert(ode.slope_tol);
        self.bvp_nodes.get_or_insert(ode.bvp_nodes);
        self.oracle_tol.get_or_insert(OracleControl::default().tol);
        self.validate_tolerances()
    }

    fn validate_tolerances(&self) -> CliResult<()> {
        let tols = [
            ("quad_tol", self.quad_tol),
            ("r_big", self.r_big),
            ("ode_tol", self.ode_tol),
            ("z_max", self.z_max),
            ("rho_tol", self.rho_tol),
            ("slope_tol", self.slope_tol),
            ("oracle_tol", self.oracle_tol),
        ];
        for (key, v) in tols {
            if let Some(v) = v {
                if !(v > 0.0 && v.is_finite()) {
                    return Err(CliError::Config(format!("{key} = {v} must be positive")));
                }
            }
        }
        Ok(())
    }

    fn required<T: Clone>(value: &Option<T>, key: &str) -> CliResult<T> {
        value
            .clone()
            .ok_or_else(|| CliError::Config(format!("missing key `{key}`")))
    }

    pub fn problem_spec(&self) -> CliResult<ProblemSpec> {
        let spec = ProblemSpec::new(
            Self::required(&self.n, "n")?,
            &Self::required(&self.h, "h")?,
            &Self::required(&self.f, "f")?,
            self.g.as_deref(),
            Self::required(&self.r0, "r0")?,
            Self::required(&self.s0, "s0")?,
        )?;
        let spec = match self.quad_tol {
            Some(q) => spec.with_quad_tol(q)?,
            None => spec,
        };
        Ok(match self.r_big {
            Some(r) => spec.with_r_big(r)?,
            None => spec,
        })
    }

    pub fn ode_control(&self) -> CliResult<OdeControl> {
        let d = OdeControl::default();
        let ctrl = OdeControl {
            tol: self.ode_tol.unwrap_or(d.tol),
            z_max: self.z_max.unwrap_or(d.z_max),
            rho_tol: self.rho_tol.unwrap_or(d.rho_tol),
            slope_tol: self.slope_tol.unwrap_or(d.slope_tol),
            bvp_nodes: self.bvp_nodes.unwrap_or(d.bvp_nodes),
            ..d
        };
        ctrl.validate()?;
        Ok(ctrl)
    }

    pub fn oracle_control(&self) -> OracleControl {
        let d = OracleControl::default();
        OracleControl {
            tol: self.oracle_tol.unwrap_or(d.tol),
            ..d
        }
    }

    pub fn output_dir(&self) -> PathBuf {
        PathBuf::from(self.output_dir.as_deref().unwrap_or(DEFAULT_OUTPUT_DIR))
    }

    pub fn to_text(&self) -> String {
        toml::to_string(self).expect("flat config serializes")
    }
}

/// Parse a config string value into a typed parameter.
pub fn parse_key<T>(value: &Option<String>, key: &str) -> CliResult<Option<T>>
where
    T: FromStr<Err = String>,
{
    value
        .as_deref()
        .map(|v| {
            v.parse()
                .map_err(|e| CliError::Config(format!("{key}: {e}")))
        })
        .transpose()
}

fn split<const N: usize>(text: &str) -> Result<[&str; N], String> {
    let parts: Vec<&str> = text.split(':').map(str::trim).collect();
    parts
        .try_into()
        .map_err(|_| format!("expected {N} fields separated by ':' in `{text}`"))
}

fn number<T: FromStr>(text: &str) -> Result<T, String> {
    text.parse()
        .map_err(|_| format!("`{text}` is not a valid number"))
}

/// `t:z`
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Anchor {
    pub t: f64,
    pub z: f64,
}

impl FromStr for Anchor {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        let [t, z] = split::<2>(s)?;
        Ok(Self {
            t: number(t)?,
            z: number(z)?,
        })
    }
}

impl fmt::Display for Anchor {
    fn fmt(&self, f: &mut fmt::Formatter) -> fmt::Result {
        write!(f, "{:?}:{:?}", self.t, self.z)
    }
}

/// `a:b:N`, `N >= 2` linearly spaced radii.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RGrid {
    pub a: f64,
    pub b: f64,
    pub count: usize,
}

impl RGrid {
    pub fn points(&self) -> Vec<f64> {
        let n = self.count;
        (0..n)
            .map(|i| {
                if i == n - 1 {
                    self.b
                } else {
                    self.a + (self.b - self.a) * i as f64 / (n - 1) as f64
                }
            })
            .collect()
    }
}

impl FromStr for RGrid {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        let [a, b, n] = split::<3>(s)?;
        let g = Self {
            a: number(a)?,
            b: number(b)?,
            count: number(n)?,
        };
        if !(g.a > 0.0 && g.a < g.b && g.b.is_finite() && g.count >= 2) {
            return Err(format!("need 0 < a < b and N >= 2 in `{s}`"));
        }
        Ok(g)
    }
}

impl fmt::Display for RGrid {
    fn fmt(&self, f: &mut fmt::Formatter) -> fmt::Result {
        write!(f, "{:?}:{:?}:{}", self.a, self.b, self.count)
    }
}

/// `r_in:r_out`
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Span {
    pub r_in: f64,
    pub r_out: f64,
}

impl FromStr for Span {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        let [a, b] = split::<2>(s)?;
        Ok(Self {
            r_in: number(a)?,
            r_out: number(b)?,
        })
    }
}

impl fmt::Display for Span {
    fn fmt(&self, f: &mut fmt::Formatter) -> fmt::Result {
        write!(f, "{:?}:{:?}", self.r_in, self.r_out)
    }
}

/// `Nr:Ntheta`
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GridSize {
    pub nr: usize,
    pub n_theta: usize,
}

impl FromStr for GridSize {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        let [a, b] = split::<2>(s)?;
        Ok(Self {
            nr: number(a)?,
            n_theta: number(b)?,
        })
    }
}

impl fmt::Display for GridSize {
    fn fmt(&self, f: &mut fmt::Formatter) -> fmt::Result {
        write!(f, "{}:{}", self.nr, self.n_theta)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Minimal,
    Shoot,
}

impl FromStr for Mode {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "minimal" => Ok(Mode::Minimal),
            "shoot" => Ok(Mode::Shoot),
            _ => Err(format!("unknown mode `{s}` (expected minimal or shoot)")),
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter) -> fmt::Result {
        f.write_str(match self {
            Mode::Minimal => "minimal",
            Mode::Shoot => "shoot",
        })
    }
}
