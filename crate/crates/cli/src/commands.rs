use std::path::{Path, PathBuf};

use blowup_core::criteria::{assemble_report, CriterionReport, ReportOptions, Verdict};
use blowup_core::odesolver::{
    build_sequences, minimal_large_solution, shoot_blowup_at, BlowupEstimate, Classification,
    OdeSolution,
};
use blowup_core::pde_oracle::{
    compare_with_radial, solve_annulus, symmetry_deviation, AnnulusGrid, BoundaryData, Init,
};
use blowup_core::quadrature::SeriesVerdict;
use blowup_core::transform::{
    build_transform, check_growth, lift_to_radial, GrowthVerdict, RadialProfile, TailModel,
    TransformMap, TransformedField,
};
use serde::Serialize;

use crate::config::{parse_key, Anchor, GridSize, Mode, RGrid, RunConfig, Span};
use crate::error::{CliError, CliResult};
use crate::output::{read_profile, to_json, RunDir, Table, RESOLVED, SUMMARY};

/// What a finished command hands back to `main`.
pub struct Outcome {
    pub summary: String,
    pub exit_code: u8,
}

fn missing(command: &str, flag: &str, key: &str) -> CliError {
    CliError::Usage(format!(
        "{command} needs --{flag} (or `{key}` in the config)"
    ))
}

fn start(cfg: &RunConfig, stem: &str, command: &str) -> CliResult<RunDir> {
    let run = RunDir::prepare(&cfg.output_dir(), stem, command)?;
    run.write(RESOLVED, cfg.to_text().as_bytes())?;
    Ok(run)
}

fn finish<T: Serialize>(run: &RunDir, summary: &T, exit_code: u8) -> CliResult<Outcome> {
    let summary = run.write_json(SUMMARY, summary)?;
    Ok(Outcome { summary, exit_code })
}

pub fn check(cfg: &RunConfig, stem: &str) -> CliResult<Outcome> {
    let spec = cfg.problem_spec()?;
    let mut opts = ReportOptions::for_spec(&spec);
    opts.t0 = cfg.t0;
    let run = start(cfg, stem, "check")?;
    let report = assemble_report(&spec, &opts)?;

    let mut existence = Table::new(&["s", "value", "blocks"]);
    for e in &report.existence {
        let (value, blocks) = match &e.verdict {
            SeriesVerdict::Converged { value, blocks } => (*value, blocks.len()),
            SeriesVerdict::Divergent { blocks } => (f64::INFINITY, blocks.len()),
        };
        existence.push(vec![e.s, value, blocks as f64]);
    }
    run.write_table("existence.csv", &existence)?;
    let mut klk = Table::new(&["r", "s", "radial", "transformed", "residual"]);
    for p in &report.klk_points {
        let (a, b, c) = p.sides.map_or((f64::NAN, f64::NAN, f64::NAN), |s| {
            (s.radial, s.transformed, s.residual)
        });
        klk.push(vec![p.r, p.s, a, b, c]);
    }
    run.write_table("klk.csv", &klk)?;
    let code = verdict_code(&report);
    finish(&run, &report, code)
}

fn verdict_code(report: &CriterionReport) -> u8 {
    match report.verdict {
        Verdict::ExistsRadial => 0,
        Verdict::NoSolutionExpected => 3,
        Verdict::Inconclusive => 4,
    }
}

#[derive(Serialize)]
struct TransformSummary {
    command: &'static str,
    r_grid: RGrid,
    r_min: f64,
    t_min: f64,
    growth: GrowthVerdict,
    tail: TailModel,
    points: usize,
}

pub fn transform(cfg: &RunConfig, stem: &str) -> CliResult<Outcome> {
    let spec = cfg.problem_spec()?;
    let grid: RGrid = parse_key(&cfg.r_grid, "r_grid")?
        .ok_or_else(|| missing("transform", "r-grid", "r_grid"))?;
    if grid.a < spec.r0 {
        return Err(CliError::Config(format!(
            "r grid starts at {} below r0 = {}",
            grid.a, spec.r0
        )));
    }
    let run = start(cfg, stem, "transform")?;
    let growth = check_growth(&spec, spec.r0)?;
    let map = build_transform(&spec, spec.r0)?;
    let mut table = Table::new(&["r", "t", "p_prime"]);
    for r in grid.points() {
        table.push(vec![r, map.eval_p(r)?, spec.p_prime(r)?]);
    }
    run.write_table("transform.csv", &table)?;
    let summary = TransformSummary {
        command: "transform",
        r_grid: grid,
        r_min: map.r_min(),
        t_min: map.t_min(),
        growth,
        tail: map.tail(),
        points: table.len(),
    };
    finish(&run, &summary, 0)
}

fn trajectory_table(map: &TransformMap, sol: &OdeSolution) -> CliResult<Table> {
    let profile = lift_to_radial(map, sol)?;
    let mut table = Table::new(&["t", "z", "zprime", "r", "u"]);
    for i in 0..sol.t.len() {
        table.push(vec![
            sol.t[i],
            sol.z[i],
            sol.zp[i],
            profile.r()[i],
            profile.u()[i],
        ]);
    }
    Ok(table)
}

#[derive(Serialize)]
struct Trajectory {
    classification: Classification,
    t_star: Option<f64>,
    blowup_estimate: Option<BlowupEstimate>,
    t_last: f64,
    points: usize,
}

impl From<&OdeSolution> for Trajectory {
    fn from(s: &OdeSolution) -> Self {
        Self {
            classification: s.classification,
            t_star: s.blowup_time(),
            blowup_estimate: s.blowup_estimate,
            t_last: s.t_last(),
            points: s.t.len(),
        }
    }
}

#[derive(Serialize)]
struct SolveSummary {
    command: &'static str,
    mode: Mode,
    anchor: Anchor,
    rho: Option<f64>,
    slope: f64,
    achieved_rho: f64,
    iterations: usize,
    bracket: (f64, f64),
    trajectory: Trajectory,
}

pub fn solve(cfg: &RunConfig, stem: &str) -> CliResult<Outcome> {
    let spec = cfg.problem_spec()?;
    let ctrl = cfg.ode_control()?;
    let anchor: Anchor =
        parse_key(&cfg.anchor, "anchor")?.ok_or_else(|| missing("solve", "anchor", "anchor"))?;
    let mode: Mode = parse_key(&cfg.mode, "mode")?.unwrap_or(Mode::Minimal);
    let rho = match mode {
        Mode::Shoot => Some(
            cfg.rho
                .ok_or_else(|| missing("solve --mode shoot", "rho", "rho"))?,
        ),
        Mode::Minimal => None,
    };
    let run = start(cfg, stem, "solve")?;
    let map = build_transform(&spec, spec.r0)?;
    let field = TransformedField::new(&map, &spec);
    let result = match rho {
        Some(rho) => shoot_blowup_at(&field, anchor.t, anchor.z, rho, &ctrl)?,
        None => minimal_large_solution(&field, anchor.t, anchor.z, &ctrl)?,
    };
    run.write_table("solution.csv", &trajectory_table(&map, &result.solution)?)?;
    let summary = SolveSummary {
        command: "solve",
        mode,
        anchor,
        rho,
        slope: result.slope,
        achieved_rho: result.achieved_rho,
        iterations: result.iterations,
        bracket: result.bracket,
        trajectory: Trajectory::from(&result.solution),
    };
    finish(&run, &summary, 0)
}

#[derive(Serialize)]
struct SequenceSummary {
    command: &'static str,
    t_bar: f64,
    k: usize,
    m: f64,
    #[serde(rename = "M")]
    big_m: f64,
    rho: Vec<f64>,
    lower_slopes: Vec<f64>,
    upper_slopes: Vec<f64>,
    lower_limit_slope: f64,
    upper_limit_slope: f64,
    lower_violation: f64,
    upper_violation: f64,
    ordered: bool,
}

pub fn sequences(cfg: &RunConfig, stem: &str) -> CliResult<Outcome> {
    let spec = cfg.problem_spec()?;
    let ctrl = cfg.ode_control()?;
    let k = cfg.k.ok_or_else(|| missing("sequences", "k", "k"))?;
    let m = cfg.m.ok_or_else(|| missing("sequences", "m", "m"))?;
    let big_m = cfg.big_m.ok_or_else(|| missing("sequences", "M", "M"))?;
    let map = build_transform(&spec, spec.r0)?;
    let t_bar = cfg.t_bar.unwrap_or(map.t_min());
    let run = start(cfg, stem, "sequences")?;
    let field = TransformedField::new(&map, &spec);
    let seq = build_sequences(&field, t_bar, m, big_m, k, &ctrl)?;
    for (j, sol) in seq.lower.iter().enumerate() {
        run.write_table(
            &format!("lower_{}.csv", j + 1),
            &trajectory_table(&map, sol)?,
        )?;
    }
    for (j, res) in seq.upper.iter().enumerate() {
        run.write_table(
            &format!("upper_{}.csv", j + 1),
            &trajectory_table(&map, &res.solution)?,
        )?;
    }
    run.write_table(
        "lower_limit.csv",
        &trajectory_table(&map, &seq.lower_limit.solution)?,
    )?;
    run.write_table(
        "upper_limit.csv",
        &trajectory_table(&map, &seq.upper_limit.solution)?,
    )?;
    let summary = SequenceSummary {
        command: "sequences",
        t_bar,
        k,
        m,
        big_m,
        rho: seq.rho.clone(),
        lower_slopes: seq.lower_slopes.clone(),
        upper_slopes: seq.upper.iter().map(|r| r.slope).collect(),
        lower_limit_slope: seq.lower_limit.slope,
        upper_limit_slope: seq.upper_limit.slope,
        lower_violation: seq.lower_violation,
        upper_violation: seq.upper_violation,
        ordered: seq.ordered(),
    };
    finish(&run, &summary, 0)
}

#[derive(Serialize)]
struct OracleSummary {
    command: &'static str,
    annulus: Span,
    grid: GridSize,
    bc_in: f64,
    bc_out: f64,
    init: Init,
    residual: f64,
    tolerance: f64,
    iterations: usize,
    theta_variation: f64,
    symmetry_deviation: Option<f64>,
    compare: Option<String>,
    comparison_deviation: Option<f64>,
}

pub fn oracle(cfg: &RunConfig, stem: &str) -> CliResult<Outcome> {
    let spec = cfg.problem_spec()?;
    let annulus: Span = parse_key(&cfg.annulus, "annulus")?
        .ok_or_else(|| missing("oracle", "annulus", "annulus"))?;
    let size: GridSize =
        parse_key(&cfg.grid, "grid")?.ok_or_else(|| missing("oracle", "grid", "grid"))?;
    let bc_in = cfg
        .bc_in
        .ok_or_else(|| missing("oracle", "bc-in", "bc_in"))?;
    let bc_out = cfg
        .bc_out
        .ok_or_else(|| missing("oracle", "bc-out", "bc_out"))?;
    let init = cfg.perturb.map_or(Init::Radial, Init::Perturbed);
    let grid = AnnulusGrid::new(annulus.r_in, annulus.r_out, size.nr, size.n_theta)?;
    let compare = cfg.compare.as_deref().map(PathBuf::from);
    let reference = match &compare {
        Some(path) => Some(load_profile(path)?),
        None => None,
    };
    let run = start(cfg, stem, "oracle")?;
    let sol = solve_annulus(
        &spec,
        &grid,
        &BoundaryData::Value(bc_in),
        &BoundaryData::Value(bc_out),
        init,
        None,
        &cfg.oracle_control(),
    )?;
    let mut field = Table::new(&["r", "theta", "u"]);
    let (radii, angles) = (grid.radii(), grid.angles());
    for (i, &r) in radii.iter().enumerate() {
        for (j, &th) in angles.iter().enumerate() {
            field.push(vec![r, th, sol.at(i, j)]);
        }
    }
    run.write_table("field.csv", &field)?;
    let mut profile = Table::new(&["r", "u"]);
    for (r, u) in radii.iter().zip(&sol.radial_profile) {
        profile.push(vec![*r, *u]);
    }
    run.write_table("profile.csv", &profile)?;
    let symmetry = if grid.is_radial() {
        None
    } else {
        Some(symmetry_deviation(&sol)?.global)
    };
    let comparison_deviation = reference
        .as_ref()
        .map(|p| compare_with_radial(&sol, p))
        .transpose()?;
    let summary = OracleSummary {
        command: "oracle",
        annulus,
        grid: size,
        bc_in,
        bc_out,
        init,
        residual: sol.residual,
        tolerance: sol.tolerance,
        iterations: sol.iterations,
        theta_variation: sol.theta_variation.iter().copied().fold(0.0, f64::max),
        symmetry_deviation: symmetry,
        compare: cfg.compare.clone(),
        comparison_deviation,
    };
    finish(&run, &summary, 0)
}

fn load_profile(path: &Path) -> CliResult<RadialProfile> {
    if !path.is_file() {
        return Err(CliError::Config(format!(
            "profile {} does not exist",
            path.display()
        )));
    }
    let (r, u) = read_profile(path)?;
    Ok(RadialProfile::new(r, u)?)
}

/// Re-read a run directory and print its summary.
pub fn report(run_dir: &Path) -> CliResult<Outcome> {
    let read = |name: &str| {
        let p = run_dir.join(name);
        std::fs::read_to_string(&p)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", p.display())))
    };
    let config = RunConfig::parse(&read(RESOLVED)?)?;
    let summary: serde_json::Value = serde_json::from_str(&read(SUMMARY)?)
        .map_err(|e| CliError::Config(format!("{SUMMARY}: {e}")))?;
    let mut tables = Vec::new();
    let mut entries: Vec<PathBuf> = std::fs::read_dir(run_dir)
        .map_err(|e| CliError::Config(format!("cannot list {}: {e}", run_dir.display())))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "csv"))
        .collect();
    entries.sort();
    for p in entries {
        let mut rdr = csv::Reader::from_path(&p)
            .map_err(|e| CliError::Config(format!("{}: {e}", p.display())))?;
        let columns: Vec<String> = rdr
            .headers()
            .map_err(|e| CliError::Config(format!("{}: {e}", p.display())))?
            .iter()
            .map(String::from)
            .collect();
        let rows = rdr.records().count();
        tables.push(TableInfo {
            file: p
                .file_name()
                .map(|n| n.to_string_lossy().into_owned())
                .unwrap_or_default(),
            columns,
            rows,
        });
    }
    let text = to_json(&RunReport {
        config,
        summary,
        tables,
    });
    Ok(Outcome {
        summary: text,
        exit_code: 0,
    })
}

#[derive(Serialize)]
struct TableInfo {
    file: String,
    columns: Vec<String>,
    rows: usize,
}

#[derive(Serialize)]
struct RunReport {
    config: RunConfig,
    summary: serde_json::Value,
    tables: Vec<TableInfo>,
}
