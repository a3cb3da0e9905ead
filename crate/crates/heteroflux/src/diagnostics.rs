//! Checkable quantities from the analysis: singular mappings and their TV,
//! the N_h flux-variation estimator, interior Kruzkhov entropy residuals,
//! interface classification, trace and boundary-layer extraction.

use crate::error::Result;
use crate::flux_models::FluxFunction;
use crate::numerical_fluxes::NumericalFlux;
use crate::solver::{edge_fluxes, FluxSet, Grid, RunResult, RunState};

/// Saturation margin around the flux argmax when classifying a numerical
/// interface pair: converged entropy traces sit exactly at theta on the
/// attaining side (plus O(h)), so a strict theta comparison would flag
/// near-converged compressive states as undercompressive.
pub const THETA_MARGIN: f64 = 0.02;

/// Tolerance for the both-zero / both-one boundary cases.
pub const BOUNDARY_TOL: f64 = 1e-6;

/// The singular mapping psi(s) = int_alpha^s |f'|: strictly increasing
/// wherever f' != 0, turning cell sequences into BV quantities.
#[derive(Debug, Clone)]
pub struct SingularMapping {
    pub f: FluxFunction,
    pub alpha: f64,
}

/// Adaptive Simpson on a smooth piece.
fn simpson(a: f64, fa: f64, b: f64, fb: f64, fm: f64) -> f64 {
    (b - a) / 6.0 * (fa + 4.0 * fm + fb)
}

fn adaptive(
    g: &impl Fn(f64) -> f64,
    a: f64,
    fa: f64,
    b: f64,
    fb: f64,
    fm: f64,
    whole: f64,
    tol: f64,
    depth: u32,
) -> f64 {
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = g(lm);
    let frm = g(rm);
    let left = simpson(a, fa, m, fm, flm);
    let right = simpson(m, fm, b, fb, frm);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * tol {
        left + right + delta / 15.0
    } else {
        adaptive(g, a, fa, m, fm, flm, left, 0.5 * tol, depth - 1)
            + adaptive(g, m, fm, b, fb, frm, right, 0.5 * tol, depth - 1)
    }
}

fn integrate(g: &impl Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    if b <= a {
        return 0.0;
    }
    let fa = g(a);
    let fb = g(b);
    let m = 0.5 * (a + b);
    let fm = g(m);
    let whole = simpson(a, fa, b, fb, fm);
    adaptive(g, a, fa, b, fb, fm, whole, tol, 48)
}

impl SingularMapping {
    pub fn new(f: FluxFunction, alpha: f64) -> Self {
        debug_assert!((0.0..=1.0).contains(&alpha));
        SingularMapping { f, alpha }
    }

    /// psi(s) = int_alpha^s |f'|, negative for s < alpha; absolute quadrature
    /// error <= 1e-10. The integrand has kinks at theta (sign change of f')
    /// and at the mobility-curve breakpoints, so integration splits there.
    pub fn apply(&self, s: f64) -> f64 {
        let (lo, hi, sign) = if s >= self.alpha {
            (self.alpha, s, 1.0)
        } else {
            (s, self.alpha, -1.0)
        };
        let mut splits = vec![lo];
        let mut interior: Vec<f64> = self.f.kinks();
        interior.push(self.f.theta);
        interior.sort_by(|a, b| a.partial_cmp(b).unwrap());
        for x in interior {
            if x > lo && x < hi {
                splits.push(x);
            }
        }
        splits.push(hi);
        let g = |x: f64| self.f.deriv(x).abs();
        let tol = 1e-10 / (splits.len() - 1) as f64;
        let mut acc = 0.0;
        for w in splits.windows(2) {
            acc += integrate(&g, w[0], w[1], tol);
        }
        sign * acc
    }
}

/// Total variation of the singular-mapping transforms: TV of the z sequence
/// (psi_left of the left cells, frozen right of cell -1) and of the w
/// sequence (psi_right of the right cells, frozen left of cell 1); the frozen
/// tails contribute nothing, so each reduces to the one-sided TV. Returns the
/// max of the two.
pub fn tv_of_transform(
    state: &RunState,
    grid: &Grid,
    psi_left: &SingularMapping,
    psi_right: &SingularMapping,
) -> f64 {
    let n = grid.n_per_side;
    let tv = |vals: &[f64], psi: &SingularMapping| -> f64 {
        let mut acc = 0.0;
        let mut prev = psi.apply(vals[0]);
        for &v in &vals[1..] {
            let z = psi.apply(v);
            acc += (z - prev).abs();
            prev = z;
        }
        acc
    };
    let tv_z = tv(&state.cells[..n], psi_left);
    let tv_w = tv(&state.cells[n..], psi_right);
    tv_z.max(tv_w)
}

/// N_h estimator: total variation of the numerical flux field,
/// sum_j |F(S_j, S_{j+1}) - F(S_{j-1}, S_j)| over all cells with the
/// interface flux on the edge between cells -1 and 1 and copy ghosts outside.
pub fn flux_variation_estimator(state: &RunState, grid: &Grid, fluxes: &FluxSet) -> Result<f64> {
    let f = edge_fluxes(&state.cells, grid.n_per_side, fluxes)?;
    Ok(f.windows(2).map(|w| (w[1] - w[0]).abs()).sum())
}

/// Interface state classification per the admissible-wave sets: a pair is
/// undercompressive when the left state is past the left argmax and the right
/// state before the right argmax (characteristics leave the interface on both
/// sides); both-zero / both-one pairs are always admissible boundary cases.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Classification {
    Compressive,
    Undercompressive,
    BoundaryCase,
}

#[derive(Debug, Clone)]
pub struct InterfaceRecord {
    pub time: f64,
    pub s_left: f64,
    pub s_right: f64,
    pub flux_value: f64,
    pub classification: Classification,
}

/// Classify a raw interface pair against the two argmax values.
pub fn classify_pair(s_left: f64, s_right: f64, theta_left: f64, theta_right: f64) -> Classification {
    let both_zero = s_left <= BOUNDARY_TOL && s_right <= BOUNDARY_TOL;
    let both_one = s_left >= 1.0 - BOUNDARY_TOL && s_right >= 1.0 - BOUNDARY_TOL;
    if both_zero || both_one {
        return Classification::BoundaryCase;
    }
    if s_left > theta_left + THETA_MARGIN && s_right < theta_right - THETA_MARGIN {
        Classification::Undercompressive
    } else {
        Classification::Compressive
    }
}

/// Classify the current interface pair of a run state.
pub fn classify_interface(
    state: &RunState,
    grid: &Grid,
    interface: &NumericalFlux,
    theta_left: f64,
    theta_right: f64,
) -> Result<InterfaceRecord> {
    let s_left = state.s_left(grid);
    let s_right = state.s_right(grid);
    Ok(InterfaceRecord {
        time: state.time,
        s_left,
        s_right,
        flux_value: interface.eval(s_left, s_right)?,
        classification: classify_pair(s_left, s_right, theta_left, theta_right),
    })
}

/// Flux continuity defect |f-(s_left) - f+(s_right)| of an interface record.
pub fn rankine_hugoniot_residual(record: &InterfaceRecord, fl: &FluxFunction, fr: &FluxFunction) -> f64 {
    (fl.eval(record.s_left) - fr.eval(record.s_right)).abs()
}

/// Discrete Kruzkhov entropy residuals for interior cells (|j| >= 2) via the
/// Crandall-Majda numerical entropy flux
/// Q(a,b;c) = F(max(a,c), max(b,c)) - F(min(a,c), min(b,c)).
#[derive(Debug, Clone)]
pub struct EntropyResidualReport {
    pub max_interior_residual: f64,
    pub cells_violating: usize,
    pub kruzkhov_constants_tested: Vec<f64>,
}

/// Residuals |S^{n+1}-c| - |S^n-c| + lambda (Q_{j+1/2} - Q_{j-1/2}) for one
/// step `before` -> `after` taken with ratio `lambda` = dt/h, for each
/// Kruzkhov constant in `constants`. Cells j = +-1 are excluded: the
/// interface flux is not consistent and the interior entropy inequality only
/// applies away from x = 0.
pub fn interior_entropy_residual(
    before: &RunState,
    after: &RunState,
    grid: &Grid,
    fluxes: &FluxSet,
    lambda: f64,
    constants: &[f64],
) -> Result<EntropyResidualReport> {
    let n = grid.n_per_side;
    let cells = &before.cells;
    let mut max_res = f64::NEG_INFINITY;
    let mut violations = 0;
    for &c in constants {
        let q = |nf: &NumericalFlux, a: f64, b: f64| -> Result<f64> {
            Ok(nf.eval(a.max(c), b.max(c))? - nf.eval(a.min(c), b.min(c))?)
        };
        // left side: cells j in {-n..-2} are storage 0..n-1; edges use the
        // interior-left flux only (edge n-1 sits between cells -2 and -1)
        for i in 0..n - 1 {
            let left_val = if i == 0 { cells[0] } else { cells[i - 1] };
            let q_minus = q(&fluxes.interior_left, left_val, cells[i])?;
            let q_plus = q(&fluxes.interior_left, cells[i], cells[i + 1])?;
            let res =
                (after.cells[i] - c).abs() - (cells[i] - c).abs() + lambda * (q_plus - q_minus);
            max_res = max_res.max(res);
            if res > 1e-10 {
                violations += 1;
            }
        }
        // right side: cells j in {2..n} are storage n+1..2n-1
        for i in n + 1..2 * n {
            let right_val = if i == 2 * n - 1 { cells[i] } else { cells[i + 1] };
            let q_minus = q(&fluxes.interior_right, cells[i - 1], cells[i])?;
            let q_plus = q(&fluxes.interior_right, cells[i], right_val)?;
            let res =
                (after.cells[i] - c).abs() - (cells[i] - c).abs() + lambda * (q_plus - q_minus);
            max_res = max_res.max(res);
            if res > 1e-10 {
                violations += 1;
            }
        }
    }
    Ok(EntropyResidualReport {
        max_interior_residual: if max_res.is_finite() { max_res } else { 0.0 },
        cells_violating: violations,
        kruzkhov_constants_tested: constants.to_vec(),
    })
}

/// Near-interface structure of one side at the final time.
#[derive(Debug, Clone)]
pub struct LayerMetrics {
    /// |trace - plateau|: height of the boundary layer.
    pub height: f64,
    /// Number of cells (interface outward) deviating > 0.01 from the plateau.
    pub width: usize,
    /// Reference value k cells away from the interface, k = max(3, 0.05/h).
    pub plateau: f64,
}

#[derive(Debug, Clone)]
pub struct TraceReport {
    pub s_left: f64,
    pub s_right: f64,
    pub left_layer: LayerMetrics,
    pub right_layer: LayerMetrics,
}

fn layer_metrics(values_from_interface: &[f64], h: f64) -> LayerMetrics {
    let k = ((0.05 / h).round() as usize).max(3).min(values_from_interface.len() - 1);
    let plateau = values_from_interface[k];
    let width = values_from_interface
        .iter()
        .take_while(|v| (**v - plateau).abs() > 0.01)
        .count();
    LayerMetrics {
        height: (values_from_interface[0] - plateau).abs(),
        width,
        plateau,
    }
}

/// Interface traces (cells -1 and 1, averaged over the last `window`
/// snapshots) and per-side boundary-layer metrics from the final snapshot.
pub fn extract_traces(result: &RunResult, window: usize) -> TraceReport {
    let n = result.grid.n_per_side;
    let window = window.clamp(1, result.snapshots.len());
    let last = &result.snapshots[result.snapshots.len() - window..];
    let s_left = last.iter().map(|(_, c)| c[n - 1]).sum::<f64>() / window as f64;
    let s_right = last.iter().map(|(_, c)| c[n]).sum::<f64>() / window as f64;

    let cells = &result.snapshots.last().unwrap().1;
    // left side read outward: cell -1, -2, ...
    let left_vals: Vec<f64> = cells[..n].iter().rev().cloned().collect();
    let right_vals: Vec<f64> = cells[n..].to_vec();
    TraceReport {
        s_left,
        s_right,
        left_layer: layer_metrics(&left_vals, result.grid.h),
        right_layer: layer_metrics(&right_vals, result.grid.h),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerical_fluxes::Scheme;
    use crate::reference;
    use crate::solver::{project_initial_data, PiecewiseConstant, SchemeConfig};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn exp(id: u8) -> reference::ExperimentSpec {
        reference::experiment(id).unwrap()
    }

    #[test]
    fn singular_map_examples() {
        // f(S) = S(1-S), alpha = 0
        let f = exp(1).flux_left.clone();
        let psi = SingularMapping::new(f, 0.0);
        assert!((psi.apply(0.5) - 0.25).abs() < 1e-10);
        assert_eq!(psi.apply(0.0), 0.0);
        assert!((psi.apply(1.0) - 0.5).abs() < 1e-10);
        // signed below alpha
        let psi_mid = SingularMapping::new(exp(1).flux_left.clone(), 0.5);
        assert!((psi_mid.apply(0.0) + 0.25).abs() < 1e-10);
    }

    #[test]
    fn singular_map_matches_dense_quadrature() {
        // kinked flux (experiment 3 left) against a brute trapezoid oracle
        let f = exp(3).flux_left.clone();
        let psi = SingularMapping::new(f.clone(), 0.0);
        for s in [0.2, 0.25, 0.3, 0.5, 0.9, 1.0] {
            // piecewise midpoint rule, split at the f' jump (the mobility
            // kink at 0.25): O(h^2) per smooth piece
            let mut cuts = vec![0.0];
            if s > 0.25 {
                cuts.push(0.25);
            }
            cuts.push(s);
            let mut acc = 0.0;
            for w in cuts.windows(2) {
                let n = 100_000;
                let h = (w[1] - w[0]) / n as f64;
                for i in 0..n {
                    acc += f.deriv(w[0] + (i as f64 + 0.5) * h).abs() * h;
                }
            }
            assert!((psi.apply(s) - acc).abs() < 1e-8, "s = {s}");
        }
    }

    #[test]
    fn singular_map_is_monotone() {
        let psi = SingularMapping::new(exp(2).flux_right.clone(), 0.3);
        let mut prev = psi.apply(0.0);
        for i in 1..=50 {
            let v = psi.apply(i as f64 / 50.0);
            assert!(v >= prev - 1e-12);
            prev = v;
        }
    }

    #[test]
    fn tv_examples() {
        let e = exp(1);
        let grid = Grid::new(0.1, 10).unwrap();
        let psi_l = SingularMapping::new(e.flux_left.clone(), 0.0);
        let psi_r = SingularMapping::new(e.flux_right.clone(), 0.0);

        let constant = project_initial_data(&PiecewiseConstant::constant(0.4).unwrap(), &grid).unwrap();
        assert!(tv_of_transform(&constant, &grid, &psi_l, &psi_r).abs() < 1e-12);

        // one-sided constants: both transforms flat
        let riemann = project_initial_data(&e.initial, &grid).unwrap();
        assert!(tv_of_transform(&riemann, &grid, &psi_l, &psi_r).abs() < 1e-12);

        // monotone left-side ramp 0.3 -> 0.6: TV(z) telescopes to
        // psi(0.6) - psi(0.3) = 0.26 - 0.21
        let mut cells = vec![0.35; 20];
        for (i, c) in cells[..10].iter_mut().enumerate() {
            *c = 0.3 + 0.3 * i as f64 / 9.0;
        }
        let state = RunState { cells, step: 0, time: 0.0 };
        let tv = tv_of_transform(&state, &grid, &psi_l, &psi_r);
        assert!((tv - 0.05).abs() < 1e-9, "tv = {tv}");
    }

    #[test]
    fn flux_variation_examples() {
        let e = exp(1);
        let grid = Grid::new(0.1, 10).unwrap();
        let fs = e.flux_set(Scheme::Um);

        let constant = project_initial_data(&PiecewiseConstant::constant(0.4).unwrap(), &grid).unwrap();
        // interface inconsistency contributes even for flat data; interior
        // terms all vanish
        let n_flat = flux_variation_estimator(&constant, &grid, &fs).unwrap();
        let f_bar = fs.interface.eval(0.4, 0.4).unwrap();
        let expected =
            (e.flux_right.eval(0.4) - f_bar).abs() + (f_bar - e.flux_left.eval(0.4)).abs();
        assert!((n_flat - expected).abs() < 1e-12);

        // Riemann data: exactly the two interface terms
        let riemann = project_initial_data(&e.initial, &grid).unwrap();
        let n_h = flux_variation_estimator(&riemann, &grid, &fs).unwrap();
        let f_bar = fs.interface.eval(0.65, 0.35).unwrap();
        let expected =
            (e.flux_right.eval(0.35) - f_bar).abs() + (f_bar - e.flux_left.eval(0.65)).abs();
        assert!((n_h - expected).abs() < 1e-12);
    }

    #[test]
    fn flux_variation_bv_bound() {
        // interior flux differences are bounded by twice the Lipschitz
        // constant times TV; the two interface terms add a bounded
        // inconsistency defect
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let e = exp(2);
        let grid = Grid::new(0.1, 10).unwrap();
        for scheme in [Scheme::Ers, Scheme::Um, Scheme::Av] {
            let fs = e.flux_set(scheme);
            let m = e.flux_left.lipschitz.max(e.flux_right.lipschitz);
            for _ in 0..50 {
                let cells: Vec<f64> = (0..20).map(|_| rng.gen()).collect();
                let tv: f64 = cells.windows(2).map(|w| (w[1] - w[0]).abs()).sum();
                let state = RunState { cells: cells.clone(), step: 0, time: 0.0 };
                let n_h = flux_variation_estimator(&state, &grid, &fs).unwrap();
                let f_bar = fs.interface.eval(cells[9], cells[10]).unwrap();
                let slack = (fs.flux_right().eval(cells[10]) - f_bar).abs()
                    + (f_bar - fs.flux_left().eval(cells[9])).abs();
                assert!(n_h <= 2.0 * m * tv + slack + 1e-9, "scheme {:?}", scheme);
            }
        }
    }

    #[test]
    fn entropy_residual_constant_state_zero() {
        let e = exp(2);
        let grid = Grid::new(0.1, 10).unwrap();
        let fs = e.flux_set(Scheme::Ers);
        let st = project_initial_data(&PiecewiseConstant::constant(0.5).unwrap(), &grid).unwrap();
        let cfg = SchemeConfig::new(Scheme::Ers, e.lambda, 1.0, vec![]);
        let next = crate::solver::step(&st, &cfg, &fs, &grid).unwrap();
        let rep =
            interior_entropy_residual(&st, &next, &grid, &fs, e.lambda, &[0.3, 0.5, 0.7]).unwrap();
        assert_eq!(rep.cells_violating, 0);
        assert!(rep.max_interior_residual.abs() < 1e-12);
    }

    #[test]
    fn entropy_residual_ers_um_runs_clean() {
        let constants: Vec<f64> = (1..10).map(|i| i as f64 / 10.0).collect();
        let e = exp(2);
        let grid = Grid::new(0.1, 15).unwrap();
        let s0 = PiecewiseConstant::riemann(0.8, 0.2).unwrap();
        for scheme in [Scheme::Ers, Scheme::Um] {
            let fs = e.flux_set(scheme);
            let cfg = SchemeConfig::new(scheme, e.lambda, 1.0, vec![]);
            let mut st = project_initial_data(&s0, &grid).unwrap();
            for _ in 0..40 {
                let next = crate::solver::step(&st, &cfg, &fs, &grid).unwrap();
                let rep = interior_entropy_residual(&st, &next, &grid, &fs, e.lambda, &constants)
                    .unwrap();
                assert_eq!(rep.cells_violating, 0, "scheme {:?}", scheme);
                st = next;
            }
        }
    }

    #[test]
    fn classify_examples() {
        // Experiment 4 UM steady pair: theta- = 2-sqrt2, theta+ = sqrt2-1
        let e = exp(4);
        let tl = e.flux_left.theta;
        let tr = e.flux_right.theta;
        assert_eq!(
            classify_pair(2.0 / 3.0, 1.0 / 3.0, tl, tr),
            Classification::Undercompressive
        );
        assert_eq!(classify_pair(0.0, 0.0, tl, tr), Classification::BoundaryCase);
        assert_eq!(classify_pair(1.0, 1.0, tl, tr), Classification::BoundaryCase);

        // Experiment 2 converged entropy traces sit at the argmax pair:
        // compressive, not undercompressive
        let e2 = exp(2);
        assert_eq!(
            classify_pair(0.42, 0.58, e2.flux_left.theta, e2.flux_right.theta),
            Classification::Compressive
        );
    }

    #[test]
    fn rh_residual_examples() {
        let e = exp(4);
        let rec = InterfaceRecord {
            time: 3.0,
            s_left: 2.0 / 3.0,
            s_right: 1.0 / 3.0,
            flux_value: 1.0 / 3.0,
            classification: Classification::Undercompressive,
        };
        assert!(rankine_hugoniot_residual(&rec, &e.flux_left, &e.flux_right) < 1e-12);

        let zero = InterfaceRecord {
            time: 0.0,
            s_left: 0.0,
            s_right: 0.0,
            flux_value: 0.0,
            classification: Classification::BoundaryCase,
        };
        assert_eq!(rankine_hugoniot_residual(&zero, &e.flux_left, &e.flux_right), 0.0);

        // Experiment 1 converged pair (0.5, 0.35): |0.25 - 1.1*0.35*0.65|
        let e1 = exp(1);
        let rec = InterfaceRecord {
            time: 1.5,
            s_left: 0.5,
            s_right: 0.35,
            flux_value: 0.25,
            classification: Classification::Compressive,
        };
        let r = rankine_hugoniot_residual(&rec, &e1.flux_left, &e1.flux_right);
        assert!((r - 2.5e-4).abs() < 1e-6);
    }

    #[test]
    fn trace_extraction_constant_run() {
        let e = exp(2);
        let r = e.run(Scheme::Av, 0.1, &[]).unwrap();
        let t = extract_traces(&r, 1);
        assert!((t.s_left - 0.5).abs() < 1e-12);
        assert!((t.s_right - 0.5).abs() < 1e-12);
        assert_eq!(t.left_layer.height, 0.0);
        assert_eq!(t.right_layer.width, 0);
    }

    #[test]
    fn trace_extraction_exp2_um_boundary_layer() {
        // UM left trace sits well below the entropy trace 0.414
        let e = exp(2);
        let r = e.run(Scheme::Um, 0.1, &[]).unwrap();
        let t = extract_traces(&r, 1);
        assert!((t.s_left - 0.35).abs() < 0.03, "left trace {}", t.s_left);
        assert!(t.s_left < e.traces_derived.0 - 0.03);
    }
}
