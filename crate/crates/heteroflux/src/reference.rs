//! Reference data for the five benchmark experiments: parameter registry,
//! entropy interface traces from the exact interface Riemann solution, and a
//! disk-cached fine-mesh ERS oracle for convergence comparison.

use std::fs;
use std::io::Write;
use std::path::PathBuf;

use crate::error::{Error, Result};
use crate::flux_models::{FluidParams, FluxFunction, MobilityCurve, RockModel};
use crate::numerical_fluxes::{godunov_interface, Scheme};
use crate::scan;
use crate::solver::{run, FluxSet, Grid, PiecewiseConstant, RunResult, SchemeConfig};

/// Mesh width of the fine-mesh reference runs.
pub const ORACLE_H: f64 = 0.002;

/// One benchmark experiment: fluxes, initial data, stepping parameters and
/// the expected interface traces. `traces_paper` are the published rounded
/// readings; `traces_derived` come from independent root-finding on the
/// stated mobilities and govern the tests.
#[derive(Debug, Clone)]
pub struct ExperimentSpec {
    pub id: u8,
    pub flux_left: FluxFunction,
    pub flux_right: FluxFunction,
    pub fluid: FluidParams,
    pub initial: PiecewiseConstant,
    pub default_h: f64,
    pub lambda: f64,
    pub snapshot_times: Vec<f64>,
    /// Domain half-width; large enough that no wave reaches the boundary
    /// before the last snapshot time.
    pub half_width: f64,
    pub traces_paper: (f64, f64),
    pub traces_derived: (f64, f64),
    /// Set when the published trace readings disagree with the derived roots
    /// beyond rounding.
    pub trace_note: Option<&'static str>,
}

impl ExperimentSpec {
    pub fn t_end(&self) -> f64 {
        self.snapshot_times.iter().cloned().fold(0.0, f64::max)
    }

    /// Grid of width `h` covering [-half_width, half_width].
    pub fn grid(&self, h: f64) -> Result<Grid> {
        let n = (self.half_width / h).round() as usize;
        Grid::new(h, n.max(2))
    }

    pub fn flux_set(&self, scheme: Scheme) -> FluxSet {
        FluxSet::new(scheme, self.flux_left.clone(), self.flux_right.clone())
    }

    /// Run this experiment with the given scheme and mesh width to `t_end`,
    /// with snapshots at the registry times plus any extras requested.
    pub fn run(&self, scheme: Scheme, h: f64, extra_times: &[f64]) -> Result<RunResult> {
        let grid = self.grid(h)?;
        let mut times = self.snapshot_times.clone();
        times.extend_from_slice(extra_times);
        let t_end = times.iter().cloned().fold(0.0, f64::max);
        let cfg = SchemeConfig::new(scheme, self.lambda, t_end, times);
        run(&cfg, &self.flux_set(scheme), &self.initial, &grid)
    }
}

fn fluid() -> FluidParams {
    FluidParams { g1: 2.0, g2: 1.0, q: 0.0 }
}

fn rock(permeability: f64, k1: MobilityCurve, k2: MobilityCurve) -> Result<RockModel> {
    RockModel::new(1.0, permeability, k1, k2)
}

/// The benchmark registry. Parameters are the published ones verbatim; the
/// derived traces are frozen results of independent root-finding.
pub fn experiment(id: u8) -> Result<ExperimentSpec> {
    let fluid = fluid();
    let lin = || MobilityCurve::power(1.0, 1.0);
    let lin_dec = || MobilityCurve::power_decreasing(1.0, 1.0);
    let one_minus_s2 = || MobilityCurve::poly(vec![1.0, 0.0, -1.0]);
    let spec = match id {
        1 => ExperimentSpec {
            id,
            flux_left: FluxFunction::new(rock(1.0, lin(), lin_dec())?, fluid)?,
            flux_right: FluxFunction::new(rock(1.1, lin(), lin_dec())?, fluid)?,
            fluid,
            initial: PiecewiseConstant::riemann(0.65, 0.35)?,
            default_h: 0.1,
            lambda: 0.125,
            snapshot_times: vec![0.5, 1.5],
            half_width: 2.5,
            traces_paper: (0.5, 0.35),
            traces_derived: (0.5, 0.349_244_327_7),
            trace_note: None,
        },
        2 => ExperimentSpec {
            id,
            flux_left: FluxFunction::new(
                rock(1.0, MobilityCurve::power(2.0, 1.0), lin_dec())?,
                fluid,
            )?,
            flux_right: FluxFunction::new(
                rock(1.0, lin(), MobilityCurve::power_decreasing(2.0, 1.0))?,
                fluid,
            )?,
            fluid,
            initial: PiecewiseConstant::constant(0.5)?,
            default_h: 0.1,
            lambda: 0.125,
            snapshot_times: vec![1.5, 3.0],
            half_width: 7.0,
            traces_paper: (0.42, 0.58),
            traces_derived: (std::f64::consts::SQRT_2 - 1.0, 2.0 - std::f64::consts::SQRT_2),
            trace_note: None,
        },
        3 => ExperimentSpec {
            id,
            flux_left: FluxFunction::new(
                rock(
                    1.0,
                    MobilityCurve::piecewise_linear(vec![
                        (0.0, 0.0),
                        (0.25, 0.4375),
                        (1.0, 0.625),
                    ]),
                    one_minus_s2(),
                )?,
                fluid,
            )?,
            flux_right: FluxFunction::new(rock(1.0, lin(), one_minus_s2())?, fluid)?,
            fluid,
            initial: PiecewiseConstant::constant(0.5)?,
            default_h: 0.1,
            lambda: 0.125,
            snapshot_times: vec![2.5, 3.75],
            half_width: 7.0,
            traces_paper: (0.45, 0.54),
            traces_derived: (0.395_79, 0.518_87),
            trace_note: Some(
                "published trace readings (0.45, 0.54) are plot-read and do not satisfy flux \
                 continuity; derived roots govern tests",
            ),
        },
        4 => ExperimentSpec {
            id,
            flux_left: FluxFunction::new(
                rock(1.0, lin(), MobilityCurve::power_decreasing(2.0, 1.0))?,
                fluid,
            )?,
            flux_right: FluxFunction::new(
                rock(1.0, MobilityCurve::power(2.0, 1.0), lin_dec())?,
                fluid,
            )?,
            fluid,
            initial: PiecewiseConstant::riemann(2.0 / 3.0, 1.0 / 3.0)?,
            default_h: 0.1,
            lambda: 0.125,
            snapshot_times: vec![1.5, 3.0],
            half_width: 6.5,
            traces_paper: (0.58, 0.42),
            traces_derived: (2.0 - std::f64::consts::SQRT_2, std::f64::consts::SQRT_2 - 1.0),
            trace_note: None,
        },
        5 => ExperimentSpec {
            id,
            flux_left: FluxFunction::new(
                rock(
                    1.0,
                    MobilityCurve::power(10.0, 2.0),
                    MobilityCurve::power_decreasing(20.0, 2.0),
                )?,
                fluid,
            )?,
            flux_right: FluxFunction::new(
                rock(
                    1.0,
                    MobilityCurve::power(50.0, 2.0),
                    MobilityCurve::power_decreasing(5.0, 2.0),
                )?,
                fluid,
            )?,
            fluid,
            initial: PiecewiseConstant::riemann(0.8, 0.2)?,
            default_h: 0.1,
            lambda: 1.0 / 32.0,
            snapshot_times: vec![0.25, 0.5],
            half_width: 4.5,
            traces_paper: (0.6, 0.32),
            traces_derived: (0.638_40, 0.317_01),
            trace_note: Some(
                "published flux-crossing point 0.46 is not reproducible from the stated \
                 mobilities (derived: 0.422); derived traces govern tests",
            ),
        },
        _ => return Err(Error::UnknownExperiment(id)),
    };
    Ok(spec)
}

pub fn all_experiments() -> Vec<ExperimentSpec> {
    (1..=5).map(|i| experiment(i).unwrap()).collect()
}

/// Interface traces of the entropy solution of the Riemann problem
/// (sL | sR): the interface flux value is the exact-Riemann Godunov flux
/// G = min{ f-(min(sL, th-)), f+(max(th+, sR)) }; the trace on the
/// non-attaining side solves f = G on that side's admissible branch.
pub fn entropy_interface_traces(
    fl: &FluxFunction,
    fr: &FluxFunction,
    s_l: f64,
    s_r: f64,
) -> Result<(f64, f64, f64)> {
    let left_arg = s_l.min(fl.theta);
    let right_arg = fr.theta.max(s_r);
    let left_term = fl.eval(left_arg);
    let right_term = fr.eval(right_arg);
    let g = godunov_interface(fl, fr, s_l, s_r);
    let tol = 1e-12;

    let left_attains = left_term <= right_term + tol;
    let right_attains = right_term <= left_term + tol;

    let trace_left = if left_attains {
        left_arg
    } else {
        // decreasing branch of f-: root of f- = G on [th-, 1]
        scan::bisect(|s| fl.eval(s) - g, fl.theta, 1.0, 1e-12).ok_or_else(|| {
            Error::NoAdmissibleTrace(format!("flux value {g} not attained on the left branch"))
        })?
    };
    let trace_right = if right_attains {
        right_arg
    } else {
        // increasing branch of f+: root of f+ = G on [0, th+]
        scan::bisect(|s| fr.eval(s) - g, 0.0, fr.theta, 1e-12).ok_or_else(|| {
            Error::NoAdmissibleTrace(format!("flux value {g} not attained on the right branch"))
        })?
    };
    Ok((trace_left, trace_right, g))
}

/// A sampled piecewise-constant profile on the two-sided grid [-L, L].
#[derive(Debug, Clone)]
pub struct Profile {
    pub grid: Grid,
    pub cells: Vec<f64>,
}

impl Profile {
    pub fn from_cells(grid: Grid, cells: Vec<f64>) -> Self {
        debug_assert_eq!(cells.len(), grid.n_cells());
        Profile { grid, cells }
    }

    pub fn eval(&self, x: f64) -> f64 {
        let n = self.grid.n_per_side as f64;
        let i = (x / self.grid.h + n).floor();
        let i = (i.max(0.0) as usize).min(self.cells.len() - 1);
        self.cells[i]
    }

    pub fn half_width(&self) -> f64 {
        self.grid.half_width()
    }
}

/// Integral of |A - B| over the common domain, exact for the piecewise
/// constants (integration over the union of both cell edge sets).
pub fn l1_distance(a: &Profile, b: &Profile) -> f64 {
    let l = a.half_width().min(b.half_width());
    let mut edges: Vec<f64> = Vec::new();
    for p in [a, b] {
        let n = p.grid.n_per_side as i64;
        for k in -n..=n {
            let x = k as f64 * p.grid.h;
            if x.abs() <= l + 1e-12 {
                edges.push(x);
            }
        }
    }
    edges.push(-l);
    edges.push(l);
    edges.sort_by(|x, y| x.partial_cmp(y).unwrap());
    edges.dedup_by(|x, y| (*x - *y).abs() < 1e-12);
    let mut acc = 0.0;
    for w in edges.windows(2) {
        let mid = 0.5 * (w[0] + w[1]);
        acc += (a.eval(mid) - b.eval(mid)).abs() * (w[1] - w[0]);
    }
    acc
}

fn cache_dir() -> PathBuf {
    match std::env::var_os("HETEROFLUX_CACHE_DIR") {
        Some(d) => PathBuf::from(d),
        None => std::env::temp_dir().join("heteroflux-oracle"),
    }
}

fn cache_path(id: u8, t: f64) -> PathBuf {
    cache_dir().join(format!("exp{id}_t{t}_h{ORACLE_H}.csv"))
}

fn load_cached(id: u8, t: f64) -> Option<Profile> {
    let text = fs::read_to_string(cache_path(id, t)).ok()?;
    let mut lines = text.lines();
    let header = lines.next()?;
    let expected = format!("# heteroflux-oracle v1, exp={id}, t={t}, h={ORACLE_H}");
    if header != expected {
        return None;
    }
    let mut cells = Vec::new();
    for line in lines {
        let (_, s) = line.split_once(',')?;
        cells.push(s.trim().parse::<f64>().ok()?);
    }
    if cells.is_empty() || cells.len() % 2 != 0 {
        return None;
    }
    let grid = Grid::new(ORACLE_H, cells.len() / 2).ok()?;
    Some(Profile::from_cells(grid, cells))
}

fn store_cached(id: u8, t: f64, profile: &Profile) -> Result<()> {
    let dir = cache_dir();
    fs::create_dir_all(&dir)?;
    let final_path = cache_path(id, t);
    let tmp_path = final_path.with_extension("csv.tmp");
    {
        let mut f = fs::File::create(&tmp_path)?;
        writeln!(f, "# heteroflux-oracle v1, exp={id}, t={t}, h={ORACLE_H}")?;
        for (i, v) in profile.cells.iter().enumerate() {
            let x = profile.grid.cell_center(profile.grid.j_of(i));
            writeln!(f, "{x},{v}")?;
        }
        f.sync_all()?;
    }
    fs::rename(&tmp_path, &final_path)?;
    Ok(())
}

/// Fine-mesh ERS profile for one experiment at time `t`, cached on disk
/// (atomic write-rename; directory from HETEROFLUX_CACHE_DIR or the system
/// temp dir).
pub fn fine_mesh_oracle(spec: &ExperimentSpec, t: f64) -> Result<Profile> {
    if let Some(p) = load_cached(spec.id, t) {
        return Ok(p);
    }
    let grid = spec.grid(ORACLE_H)?;
    let cfg = SchemeConfig::new(Scheme::Ers, spec.lambda, t, vec![t]);
    let result = run(&cfg, &spec.flux_set(Scheme::Ers), &spec.initial, &grid)?;
    let cells = result.snapshots.last().unwrap().1.clone();
    let profile = Profile::from_cells(grid, cells);
    store_cached(spec.id, t, &profile)?;
    Ok(profile)
}
