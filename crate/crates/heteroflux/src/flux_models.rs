//! Analytic flux construction from rock and fluid parameters.
//!
//! A rock type carries two relative mobility curves k1 (increasing, k1(0)=0)
//! and k2 (decreasing, k2(1)=0) scaled by the absolute permeability K. With
//! gravity constants g1, g2 and total Darcy velocity q this induces the
//! fractional flux
//!
//!   f(S) = lambda1/(lambda1+lambda2) * [q + (g1-g2)*lambda2],
//!   lambda_l(S) = K * k_l(S),
//!
//! which vanishes at S=0, equals q at S=1 and has a single interior maximum.

use crate::error::{Error, Result};
use crate::scan;

/// Tolerance for the endpoint identities f(0)=0, f(1)=q.
const ENDPOINT_TOL: f64 = 1e-12;
/// Mobility sums below this are treated as degenerate.
pub const DEGENERACY_TOL: f64 = 1e-14;

/// Which structural role a mobility curve plays in the flux.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MobilityRole {
    /// Phase-1 mobility: nondecreasing, vanishes at S=0.
    Increasing,
    /// Phase-2 mobility: nonincreasing, vanishes at S=1.
    Decreasing,
}

/// A nonnegative mobility curve on [0,1].
#[derive(Debug, Clone, PartialEq)]
pub enum MobilityCurve {
    /// `c * S^p` (or `c * (1-S)^p` when `decreasing`).
    Power { coeff: f64, exponent: f64, decreasing: bool },
    /// Piecewise-linear interpolation through `(s, value)` points covering [0,1].
    PiecewiseLinear { points: Vec<(f64, f64)> },
    /// Polynomial segments in ascending-coefficient form; segment `i` is
    /// active on `[breakpoints[i], breakpoints[i+1]]` with the implicit outer
    /// breakpoints 0 and 1.
    PiecewisePoly { breakpoints: Vec<f64>, segments: Vec<Vec<f64>> },
}

fn poly_eval(coeffs: &[f64], s: f64) -> f64 {
    coeffs.iter().rev().fold(0.0, |acc, c| acc * s + c)
}

fn poly_deriv(coeffs: &[f64], s: f64) -> f64 {
    coeffs
        .iter()
        .enumerate()
        .skip(1)
        .rev()
        .fold(0.0, |acc, (i, c)| acc * s + i as f64 * c)
}

impl MobilityCurve {
    pub fn power(coeff: f64, exponent: f64) -> Self {
        MobilityCurve::Power { coeff, exponent, decreasing: false }
    }

    pub fn power_decreasing(coeff: f64, exponent: f64) -> Self {
        MobilityCurve::Power { coeff, exponent, decreasing: true }
    }

    pub fn piecewise_linear(points: Vec<(f64, f64)>) -> Self {
        MobilityCurve::PiecewiseLinear { points }
    }

    /// Single polynomial on [0,1], ascending coefficients.
    pub fn poly(coeffs: Vec<f64>) -> Self {
        MobilityCurve::PiecewisePoly { breakpoints: vec![], segments: vec![coeffs] }
    }

    pub fn eval(&self, s: f64) -> f64 {
        match self {
            MobilityCurve::Power { coeff, exponent, decreasing } => {
                let x = if *decreasing { 1.0 - s } else { s };
                if *exponent == 1.0 {
                    coeff * x
                } else if *exponent == 2.0 {
                    coeff * x * x
                } else {
                    coeff * x.abs().powf(*exponent)
                }
            }
            MobilityCurve::PiecewiseLinear { points } => {
                let i = Self::linear_segment(points, s);
                let (x0, y0) = points[i];
                let (x1, y1) = points[i + 1];
                y0 + (y1 - y0) * (s - x0) / (x1 - x0)
            }
            MobilityCurve::PiecewisePoly { breakpoints, segments } => {
                let i = breakpoints.iter().take_while(|&&b| s >= b).count();
                poly_eval(&segments[i], s)
            }
        }
    }

    /// One-sided derivative (right-sided at interior breakpoints).
    pub fn deriv(&self, s: f64) -> f64 {
        match self {
            MobilityCurve::Power { coeff, exponent, decreasing } => {
                let x = if *decreasing { 1.0 - s } else { s };
                let sign = if *decreasing { -1.0 } else { 1.0 };
                let d = if *exponent == 1.0 {
                    *coeff
                } else if *exponent == 2.0 {
                    2.0 * coeff * x
                } else {
                    coeff * exponent * x.abs().powf(exponent - 1.0)
                };
                sign * d
            }
            MobilityCurve::PiecewiseLinear { points } => {
                let i = Self::linear_segment(points, s);
                let (x0, y0) = points[i];
                let (x1, y1) = points[i + 1];
                (y1 - y0) / (x1 - x0)
            }
            MobilityCurve::PiecewisePoly { breakpoints, segments } => {
                let i = breakpoints.iter().take_while(|&&b| s >= b).count();
                poly_deriv(&segments[i], s)
            }
        }
    }

    /// Saturations where the curve's derivative may jump.
    pub fn kinks(&self) -> Vec<f64> {
        match self {
            MobilityCurve::Power { .. } => vec![],
            MobilityCurve::PiecewiseLinear { points } => {
                points[1..points.len() - 1].iter().map(|p| p.0).collect()
            }
            MobilityCurve::PiecewisePoly { breakpoints, .. } => breakpoints.clone(),
        }
    }

    /// Largest i with points[i].0 <= s, capped so that [i, i+1] is a segment.
    fn linear_segment(points: &[(f64, f64)], s: f64) -> usize {
        let n = points.len();
        points[..n - 1]
            .iter()
            .rposition(|p| s >= p.0)
            .unwrap_or(0)
            .min(n - 2)
    }

    /// Check nonnegativity, breakpoint continuity and the endpoint condition
    /// of the given role.
    pub fn validate(&self, role: MobilityRole) -> Result<()> {
        if let MobilityCurve::PiecewiseLinear { points } = self {
            if points.len() < 2
                || points[0].0 != 0.0
                || points[points.len() - 1].0 != 1.0
                || points.windows(2).any(|w| w[1].0 <= w[0].0)
            {
                return Err(Error::InvalidCurve(
                    "piecewise-linear points must ascend from S=0 to S=1".into(),
                ));
            }
        }
        // dense nonnegativity sample
        for i in 0..=2000 {
            let s = i as f64 / 2000.0;
            let v = self.eval(s);
            if v < -1e-12 {
                return Err(Error::InvalidCurve(format!(
                    "negative mobility {v:.3e} at S = {s}"
                )));
            }
        }
        // continuity at breakpoints: adjacent segments must agree to 1e-12
        if let MobilityCurve::PiecewisePoly { breakpoints, segments } = self {
            for (i, &b) in breakpoints.iter().enumerate() {
                let left = poly_eval(&segments[i], b);
                let right = poly_eval(&segments[i + 1], b);
                if (left - right).abs() > 1e-12 {
                    return Err(Error::InvalidCurve(format!(
                        "discontinuity at breakpoint S = {b}: {left} vs {right}"
                    )));
                }
            }
        }
        match role {
            MobilityRole::Increasing => {
                if self.eval(0.0).abs() > ENDPOINT_TOL {
                    return Err(Error::InvalidCurve(format!(
                        "increasing-role curve must vanish at S=0, got {}",
                        self.eval(0.0)
                    )));
                }
            }
            MobilityRole::Decreasing => {
                if self.eval(1.0).abs() > ENDPOINT_TOL {
                    return Err(Error::InvalidCurve(format!(
                        "decreasing-role curve must vanish at S=1, got {}",
                        self.eval(1.0)
                    )));
                }
            }
        }
        Ok(())
    }
}

/// One rock type: porosity, absolute permeability and the two relative
/// mobility curves. Stored curves are the k_l; evaluation multiplies by K.
#[derive(Debug, Clone)]
pub struct RockModel {
    pub porosity: f64,
    pub permeability: f64,
    pub k1: MobilityCurve,
    pub k2: MobilityCurve,
}

impl RockModel {
    pub fn new(porosity: f64, permeability: f64, k1: MobilityCurve, k2: MobilityCurve) -> Result<Self> {
        if porosity <= 0.0 {
            return Err(Error::InvalidCurve(format!("porosity must be > 0, got {porosity}")));
        }
        if permeability <= 0.0 {
            return Err(Error::InvalidCurve(format!(
                "permeability must be > 0, got {permeability}"
            )));
        }
        k1.validate(MobilityRole::Increasing)?;
        k2.validate(MobilityRole::Decreasing)?;
        Ok(RockModel { porosity, permeability, k1, k2 })
    }

    /// Effective phase-1 mobility lambda1 = K * k1.
    pub fn lambda1(&self, s: f64) -> f64 {
        self.permeability * self.k1.eval(s)
    }

    /// Effective phase-2 mobility lambda2 = K * k2.
    pub fn lambda2(&self, s: f64) -> f64 {
        self.permeability * self.k2.eval(s)
    }

    pub fn lambda1_deriv(&self, s: f64) -> f64 {
        self.permeability * self.k1.deriv(s)
    }

    pub fn lambda2_deriv(&self, s: f64) -> f64 {
        self.permeability * self.k2.deriv(s)
    }
}

/// Gravity constants of the two phases and the total Darcy velocity.
#[derive(Debug, Clone, Copy)]
pub struct FluidParams {
    pub g1: f64,
    pub g2: f64,
    pub q: f64,
}

/// Evaluate the fractional flux of phase 1 for the given rock and fluid.
pub fn eval_flux(rock: &RockModel, fluid: &FluidParams, s: f64) -> Result<f64> {
    let l1 = rock.lambda1(s);
    let l2 = rock.lambda2(s);
    let sum = l1 + l2;
    if sum < DEGENERACY_TOL {
        return Err(Error::DegenerateMobility { s, sum });
    }
    Ok(l1 / sum * (fluid.q + (fluid.g1 - fluid.g2) * l2))
}

/// An evaluable flux on [0,1] with cached argmax and Lipschitz bound.
#[derive(Debug, Clone)]
pub struct FluxFunction {
    pub rock: RockModel,
    pub fluid: FluidParams,
    /// Unique maximizer of f on [0,1].
    pub theta: f64,
    pub fmax: f64,
    /// Upper bound on |f'| over [0,1] (finite differences, 5% inflation).
    pub lipschitz: f64,
}

impl FluxFunction {
    /// Build the flux, verifying hypotheses H2 (endpoint values) and H3
    /// (single interior maximum) and caching theta and the Lipschitz bound.
    pub fn new(rock: RockModel, fluid: FluidParams) -> Result<Self> {
        let eval = |s: f64| eval_flux(&rock, &fluid, s);
        let f0 = eval(0.0)?;
        if f0.abs() > ENDPOINT_TOL {
            return Err(Error::InvalidCurve(format!("f(0) = {f0}, expected 0")));
        }
        let f1 = eval(1.0)?;
        if (f1 - fluid.q).abs() > ENDPOINT_TOL {
            return Err(Error::InvalidCurve(format!("f(1) = {f1}, expected q = {}", fluid.q)));
        }
        let mut flux = FluxFunction { rock, fluid, theta: 0.0, fmax: 0.0, lipschitz: 0.0 };
        let (theta, fmax) = find_argmax_impl(&flux)?;
        flux.theta = theta;
        flux.fmax = fmax;
        flux.lipschitz = lipschitz_bound(&flux, 10_000);
        Ok(flux)
    }

    pub fn eval(&self, s: f64) -> f64 {
        // constructor guarantees non-degeneracy on [0,1]
        let l1 = self.rock.lambda1(s);
        let l2 = self.rock.lambda2(s);
        l1 / (l1 + l2) * (self.fluid.q + (self.fluid.g1 - self.fluid.g2) * l2)
    }

    /// Analytic derivative (one-sided at mobility kinks).
    pub fn deriv(&self, s: f64) -> f64 {
        let l1 = self.rock.lambda1(s);
        let l2 = self.rock.lambda2(s);
        let d1 = self.rock.lambda1_deriv(s);
        let d2 = self.rock.lambda2_deriv(s);
        let sum = l1 + l2;
        let frac = l1 / sum;
        let frac_d = (d1 * l2 - l1 * d2) / (sum * sum);
        let drive = self.fluid.q + (self.fluid.g1 - self.fluid.g2) * l2;
        let drive_d = (self.fluid.g1 - self.fluid.g2) * d2;
        frac_d * drive + frac * drive_d
    }

    /// Saturations where f' may jump (mobility-curve kinks).
    pub fn kinks(&self) -> Vec<f64> {
        let mut k = self.rock.k1.kinks();
        k.extend(self.rock.k2.kinks());
        k.sort_by(|a, b| a.partial_cmp(b).unwrap());
        k.dedup();
        k
    }
}

fn find_argmax_impl(f: &FluxFunction) -> Result<(f64, f64)> {
    let g = |s: f64| f.eval(s);
    let humps = scan::descent_ascent_count(g, 2001);
    if humps > 0 {
        return Err(Error::NotUnimodal(humps));
    }
    Ok(scan::argmax_with_deriv(g, |s| f.deriv(s), 2001, 1e-12))
}

/// Locate the unique maximizer of an H1-H3 flux.
pub fn find_argmax(f: &FluxFunction) -> Result<(f64, f64)> {
    find_argmax_impl(f)
}

/// Dense finite-difference bound on |f'| with a 5% safety factor.
pub fn lipschitz_bound(f: &FluxFunction, n_samples: usize) -> f64 {
    let n = n_samples.max(1000);
    let ds = 1.0 / n as f64;
    let mut max_slope: f64 = 0.0;
    let mut prev = f.eval(0.0);
    for i in 1..=n {
        let v = f.eval(i as f64 * ds);
        max_slope = max_slope.max(((v - prev) / ds).abs());
        prev = v;
    }
    1.05 * max_slope
}

/// How characteristics on the two sides relate at a flux crossing.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Compressivity {
    /// fR' > 0 and fL' < 0: characteristics leave the interface on both sides.
    Undercompressive,
    /// fL' > 0 and fR' < 0: characteristics enter from both sides.
    Overcompressive,
    Neutral,
}

/// All roots of fL - fR in (0,1), found by sign scan plus bisection, each
/// tagged with the compressivity of the crossing.
pub fn intersection_points(fl: &FluxFunction, fr: &FluxFunction) -> Vec<(f64, Compressivity)> {
    let g = |s: f64| fl.eval(s) - fr.eval(s);
    let n = 2001;
    let h = 1.0 / (n - 1) as f64;
    let mut out = Vec::new();
    let mut prev = g(0.0);
    for i in 1..n {
        let s = i as f64 * h;
        let v = g(s);
        if prev == 0.0 && (s - h) > 0.0 {
            // exact zero at the previous sample
            out.push(s - h);
        } else if prev * v < 0.0 {
            if let Some(r) = scan::bisect(g, s - h, s, 1e-10) {
                out.push(r);
            }
        }
        prev = v;
    }
    out.retain(|&r| r > 0.0 && r < 1.0);
    out.dedup_by(|a, b| (*a - *b).abs() < 1e-8);
    out.into_iter()
        .map(|r| {
            let dl = fl.deriv(r);
            let dr = fr.deriv(r);
            let tag = if dr > 0.0 && dl < 0.0 {
                Compressivity::Undercompressive
            } else if dl > 0.0 && dr < 0.0 {
                Compressivity::Overcompressive
            } else {
                Compressivity::Neutral
            };
            (r, tag)
        })
        .collect()
}
