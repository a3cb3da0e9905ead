//! Two-sided grid, explicit time stepping and CFL enforcement.
//!
//! Cells are indexed j in {-n..-1} u {1..n}; the rock interface sits between
//! cells -1 and 1 (x_{-1/2} = x_{1/2} = 0). The update is
//!
//!   S_j^{n+1} = S_j^n - (lambda/phi_j) (F_{j+1/2} - F_{j-1/2}),
//!
//! with the interface flux used on the edge between cells -1 and 1 and copy
//! (outflow) ghost cells at the outer boundaries.

use crate::error::{Error, Result};
use crate::flux_models::FluxFunction;
use crate::numerical_fluxes::{FluxSide, NumericalFlux, Scheme};

/// Roundoff allowance on the [0,1] cell bounds.
const BOUNDS_TOL: f64 = 1e-12;

/// Uniform two-sided grid on [-L, L], L = n_per_side * h.
#[derive(Debug, Clone)]
pub struct Grid {
    pub h: f64,
    pub n_per_side: usize,
}

impl Grid {
    pub fn new(h: f64, n_per_side: usize) -> Result<Self> {
        if !(h > 0.0) {
            return Err(Error::config(format!("cell width must be > 0, got {h}")));
        }
        if n_per_side < 2 {
            return Err(Error::config(format!(
                "need at least 2 cells per side, got {n_per_side}"
            )));
        }
        Ok(Grid { h, n_per_side })
    }

    pub fn half_width(&self) -> f64 {
        self.h * self.n_per_side as f64
    }

    pub fn n_cells(&self) -> usize {
        2 * self.n_per_side
    }

    /// Storage index of cell j (j != 0).
    pub fn idx(&self, j: i64) -> usize {
        debug_assert!(j != 0);
        if j < 0 {
            (j + self.n_per_side as i64) as usize
        } else {
            self.n_per_side + (j - 1) as usize
        }
    }

    /// Cell index of storage slot i.
    pub fn j_of(&self, i: usize) -> i64 {
        let n = self.n_per_side as i64;
        let i = i as i64;
        if i < n {
            i - n
        } else {
            i - n + 1
        }
    }

    /// Cell midpoint x_j.
    pub fn cell_center(&self, j: i64) -> f64 {
        if j < 0 {
            (j as f64 + 0.5) * self.h
        } else {
            (j as f64 - 0.5) * self.h
        }
    }

    /// Cell extent [x_{j-1/2}, x_{j+1/2}].
    pub fn cell_bounds(&self, j: i64) -> (f64, f64) {
        let c = self.cell_center(j);
        (c - 0.5 * self.h, c + 0.5 * self.h)
    }
}

/// Piecewise-constant function on the line: `values[i]` applies between
/// `breakpoints[i-1]` and `breakpoints[i]` (outer pieces extend to +-inf).
#[derive(Debug, Clone)]
pub struct PiecewiseConstant {
    pub breakpoints: Vec<f64>,
    pub values: Vec<f64>,
}

impl PiecewiseConstant {
    pub fn new(breakpoints: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if values.len() != breakpoints.len() + 1 {
            return Err(Error::InvalidData(format!(
                "piecewise-constant data needs {} values for {} breakpoints, got {}",
                breakpoints.len() + 1,
                breakpoints.len(),
                values.len()
            )));
        }
        if breakpoints.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidData("breakpoints must be strictly ascending".into()));
        }
        for &v in &values {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::InvalidData(format!("saturation {v} outside [0,1]")));
            }
        }
        Ok(PiecewiseConstant { breakpoints, values })
    }

    /// Riemann data: `sl` for x < 0, `sr` for x > 0.
    pub fn riemann(sl: f64, sr: f64) -> Result<Self> {
        PiecewiseConstant::new(vec![0.0], vec![sl, sr])
    }

    pub fn constant(s: f64) -> Result<Self> {
        PiecewiseConstant::new(vec![], vec![s])
    }

    pub fn eval(&self, x: f64) -> f64 {
        let i = self.breakpoints.iter().take_while(|&&b| x >= b).count();
        self.values[i]
    }

    /// Exact average over [a, b] (analytic, no quadrature error).
    pub fn average(&self, a: f64, b: f64) -> f64 {
        debug_assert!(b > a);
        // constant over the cell: return the value itself, no roundoff
        if !self.breakpoints.iter().any(|&bp| a < bp && bp < b) {
            return self.eval(0.5 * (a + b));
        }
        let mut acc = 0.0;
        let mut lo = a;
        for (i, &bp) in self.breakpoints.iter().enumerate() {
            if bp <= lo {
                continue;
            }
            if bp >= b {
                break;
            }
            acc += self.values[i] * (bp - lo);
            lo = bp;
        }
        acc += self.eval(0.5 * (lo + b)) * (b - lo);
        acc / (b - a)
    }
}

/// Cell values at one time level.
#[derive(Debug, Clone)]
pub struct RunState {
    pub cells: Vec<f64>,
    pub step: usize,
    pub time: f64,
}

impl RunState {
    /// Value of cell -1 (left of the interface).
    pub fn s_left(&self, grid: &Grid) -> f64 {
        self.cells[grid.idx(-1)]
    }

    /// Value of cell 1 (right of the interface).
    pub fn s_right(&self, grid: &Grid) -> f64 {
        self.cells[grid.idx(1)]
    }
}

/// Time-stepping parameters. `lambda` = dt/h; porosity divides the flux
/// difference per side (the model's phi; 1 everywhere in the experiments).
#[derive(Debug, Clone)]
pub struct SchemeConfig {
    pub scheme: Scheme,
    pub lambda: f64,
    pub t_end: f64,
    pub snapshot_times: Vec<f64>,
    pub porosity_left: f64,
    pub porosity_right: f64,
}

impl SchemeConfig {
    pub fn new(scheme: Scheme, lambda: f64, t_end: f64, snapshot_times: Vec<f64>) -> Self {
        SchemeConfig {
            scheme,
            lambda,
            t_end,
            snapshot_times,
            porosity_left: 1.0,
            porosity_right: 1.0,
        }
    }
}

/// The three two-point fluxes a run needs: interior left/right and interface.
#[derive(Debug, Clone)]
pub struct FluxSet {
    pub interior_left: NumericalFlux,
    pub interior_right: NumericalFlux,
    pub interface: NumericalFlux,
}

impl FluxSet {
    pub fn new(scheme: Scheme, fl: FluxFunction, fr: FluxFunction) -> Self {
        FluxSet {
            interior_left: NumericalFlux::interior(scheme, FluxSide::InteriorLeft, fl.clone()),
            interior_right: NumericalFlux::interior(scheme, FluxSide::InteriorRight, fr.clone()),
            interface: NumericalFlux::interface(scheme, fl, fr),
        }
    }

    pub fn flux_left(&self) -> &FluxFunction {
        self.interior_left.flux_left()
    }

    pub fn flux_right(&self) -> &FluxFunction {
        self.interior_right.flux_left()
    }
}

/// Per-step diagnostics record (values after the step).
#[derive(Debug, Clone)]
pub struct StepRecord {
    pub time: f64,
    pub dt: f64,
    /// sum_j |S_j^{n+1} - S_j^n|
    pub l1_increment: f64,
    pub min: f64,
    pub max: f64,
    pub s_left: f64,
    pub s_right: f64,
    pub interface_flux: f64,
    /// Flux through the left domain boundary.
    pub inflow_flux: f64,
    /// Flux through the right domain boundary.
    pub outflow_flux: f64,
}

/// Everything a finished run produced.
#[derive(Debug, Clone)]
pub struct RunResult {
    pub grid: Grid,
    pub config: SchemeConfig,
    pub initial: RunState,
    pub final_state: RunState,
    pub snapshots: Vec<(f64, Vec<f64>)>,
    pub log: Vec<StepRecord>,
    /// Largest deviation of the two outermost cells from their initial
    /// values; > 1e-8 means a wave reached the boundary (domain too small).
    pub boundary_drift: f64,
}

impl RunResult {
    pub fn boundary_clean(&self) -> bool {
        self.boundary_drift <= 1e-8
    }
}

/// Exact cell averages of piecewise-constant initial data.
pub fn project_initial_data(s0: &PiecewiseConstant, grid: &Grid) -> Result<RunState> {
    let mut cells = vec![0.0; grid.n_cells()];
    for i in 0..cells.len() {
        let j = grid.j_of(i);
        let (a, b) = grid.cell_bounds(j);
        let v = s0.average(a, b);
        if !(-BOUNDS_TOL..=1.0 + BOUNDS_TOL).contains(&v) {
            return Err(Error::InvalidData(format!("initial cell average {v} outside [0,1]")));
        }
        cells[i] = v;
    }
    Ok(RunState { cells, step: 0, time: 0.0 })
}

/// All 2n+1 edge fluxes; index i sits between storage slots i-1 and i, with
/// i=0 / i=2n the outer boundaries (copy ghosts) and i=n the interface.
pub fn edge_fluxes(cells: &[f64], n: usize, fluxes: &FluxSet) -> Result<Vec<f64>> {
    let m = cells.len();
    debug_assert_eq!(m, 2 * n);
    let mut f = vec![0.0; m + 1];
    f[0] = fluxes.interior_left.eval(cells[0], cells[0])?;
    for i in 1..n {
        f[i] = fluxes.interior_left.eval(cells[i - 1], cells[i])?;
    }
    f[n] = fluxes.interface.eval(cells[n - 1], cells[n])?;
    for i in n + 1..m {
        f[i] = fluxes.interior_right.eval(cells[i - 1], cells[i])?;
    }
    f[m] = fluxes.interior_right.eval(cells[m - 1], cells[m - 1])?;
    Ok(f)
}

fn step_with_lambda(
    state: &RunState,
    config: &SchemeConfig,
    fluxes: &FluxSet,
    grid: &Grid,
    lambda: f64,
) -> Result<(RunState, StepRecord)> {
    let n = grid.n_per_side;
    let f = edge_fluxes(&state.cells, n, fluxes)?;
    let mut cells = state.cells.clone();
    let mut l1 = 0.0;
    let mut mn = f64::INFINITY;
    let mut mx = f64::NEG_INFINITY;
    for i in 0..cells.len() {
        let phi = if i < n { config.porosity_left } else { config.porosity_right };
        let v = state.cells[i] - lambda / phi * (f[i + 1] - f[i]);
        if !(-BOUNDS_TOL..=1.0 + BOUNDS_TOL).contains(&v) {
            return Err(Error::BoundsViolation {
                step: state.step + 1,
                j: grid.j_of(i),
                value: v,
            });
        }
        l1 += (v - state.cells[i]).abs();
        mn = mn.min(v);
        mx = mx.max(v);
        cells[i] = v;
    }
    let dt = lambda * grid.h;
    let next = RunState { cells, step: state.step + 1, time: state.time + dt };
    let record = StepRecord {
        time: next.time,
        dt,
        l1_increment: l1,
        min: mn,
        max: mx,
        s_left: next.cells[n - 1],
        s_right: next.cells[n],
        interface_flux: f[n],
        inflow_flux: f[0],
        outflow_flux: f[2 * n],
    };
    Ok((next, record))
}

/// One full time step (dt = lambda * h).
pub fn step(
    state: &RunState,
    config: &SchemeConfig,
    fluxes: &FluxSet,
    grid: &Grid,
) -> Result<RunState> {
    Ok(step_with_lambda(state, config, fluxes, grid, config.lambda)?.0)
}

/// CFL stability constant: finite-difference estimate of
/// max (dF/da - dF/db) over a uniform (a,b) grid, across all three flux
/// variants, inflated 10%.
pub fn compute_cfl_constant(fluxes: &FluxSet, n_samples: usize) -> Result<f64> {
    let n = n_samples.max(100);
    let eps = 1e-6;
    let mut m: f64 = 0.0;
    for nf in [&fluxes.interior_left, &fluxes.interior_right, &fluxes.interface] {
        for ia in 0..=n {
            let a = ia as f64 / n as f64;
            let ap = (a + eps).min(1.0);
            let am = ap - eps;
            for ib in 0..=n {
                let b = ib as f64 / n as f64;
                let bp = (b + eps).min(1.0);
                let bm = bp - eps;
                let dfda = (nf.eval(ap, b)? - nf.eval(am, b)?) / eps;
                let dfdb = (nf.eval(a, bp)? - nf.eval(a, bm)?) / eps;
                m = m.max(dfda - dfdb);
            }
        }
    }
    Ok(1.1 * m)
}

/// Validate lambda * M <= 1 for the configured scheme.
pub fn check_cfl(config: &SchemeConfig, fluxes: &FluxSet) -> Result<f64> {
    let m = compute_cfl_constant(fluxes, 100)?;
    if config.lambda * m > 1.0 {
        return Err(Error::CflViolation {
            scheme: config.scheme.name().to_string(),
            lambda: config.lambda,
            m,
            max_lambda: 1.0 / m,
        });
    }
    Ok(m)
}

/// Drive `step` to the last snapshot time, recording snapshots at exactly the
/// requested times (final partial step with reduced dt, still CFL-safe).
pub fn run(
    config: &SchemeConfig,
    fluxes: &FluxSet,
    s0: &PiecewiseConstant,
    grid: &Grid,
) -> Result<RunResult> {
    check_cfl(config, fluxes)?;
    let initial = project_initial_data(s0, grid)?;

    let mut targets: Vec<f64> = config.snapshot_times.clone();
    targets.push(config.t_end);
    targets.retain(|t| *t >= 0.0);
    targets.sort_by(|a, b| a.partial_cmp(b).unwrap());
    targets.dedup_by(|a, b| (*a - *b).abs() < 1e-12);

    let dt = config.lambda * grid.h;
    let mut state = initial.clone();
    let mut snapshots = Vec::new();
    let mut log = Vec::new();
    let bl0 = initial.cells[0];
    let br0 = initial.cells[grid.n_cells() - 1];
    let mut drift: f64 = 0.0;

    for &t in &targets {
        while state.time < t - 1e-12 {
            let remaining = t - state.time;
            let lam = if remaining < dt - 1e-14 { remaining / grid.h } else { config.lambda };
            let (next, rec) = step_with_lambda(&state, config, fluxes, grid, lam)?;
            state = next;
            drift = drift
                .max((state.cells[0] - bl0).abs())
                .max((state.cells[grid.n_cells() - 1] - br0).abs());
            log.push(rec);
        }
        snapshots.push((t, state.cells.clone()));
    }

    Ok(RunResult {
        grid: grid.clone(),
        config: config.clone(),
        initial,
        final_state: state,
        snapshots,
        log,
        boundary_drift: drift,
    })
}
