//! Scalar search utilities shared by the flux modules: dense scans,
//! golden-section refinement, bisection, and local-extrema detection.

/// Differences smaller than this count as flat when classifying monotone runs.
const FLAT_EPS: f64 = 1e-13;

/// Golden-section maximization of `f` on `[lo, hi]` to absolute tolerance
/// `tol` in the argument. `f` must be unimodal on the bracket.
pub fn golden_max(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64, tol: f64) -> f64 {
    const INVPHI: f64 = 0.618_033_988_749_894_9;
    let mut x1 = hi - INVPHI * (hi - lo);
    let mut x2 = lo + INVPHI * (hi - lo);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    while hi - lo > tol {
        if f1 >= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - INVPHI * (hi - lo);
            f1 = f(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + INVPHI * (hi - lo);
            f2 = f(x2);
        }
    }
    0.5 * (lo + hi)
}

/// Coarse scan on `n` uniform points in [0,1] followed by golden-section
/// refinement around the best sample. Returns `(argmax, max)`.
pub fn argmax_unit(f: impl Fn(f64) -> f64 + Copy, n: usize, tol: f64) -> (f64, f64) {
    let mut best_i = 0;
    let mut best = f64::NEG_INFINITY;
    for i in 0..n {
        let s = i as f64 / (n - 1) as f64;
        let v = f(s);
        if v > best {
            best = v;
            best_i = i;
        }
    }
    let h = 1.0 / (n - 1) as f64;
    let lo = ((best_i as f64 - 1.0) * h).max(0.0);
    let hi = ((best_i as f64 + 1.0) * h).min(1.0);
    let theta = golden_max(f, lo, hi, tol);
    let ftheta = f(theta);
    // ties favor the grid sample (exact for maxima on the sample grid)
    if ftheta > best {
        (theta, ftheta)
    } else {
        (best_i as f64 * h, best)
    }
}

/// Argmax on [0,1] refined by bisecting the sign change of the analytic
/// derivative inside the coarse-scan bracket. Resolves flat maxima far better
/// than value comparisons (which stall near sqrt(machine epsilon)); also
/// correct when the derivative jumps sign at a kink.
pub fn argmax_with_deriv(
    f: impl Fn(f64) -> f64 + Copy,
    df: impl Fn(f64) -> f64,
    n: usize,
    tol: f64,
) -> (f64, f64) {
    let (coarse_x, coarse_v) = argmax_unit(f, n, tol);
    let h = 1.0 / (n - 1) as f64;
    let lo = (coarse_x - h).max(0.0);
    let hi = (coarse_x + h).min(1.0);
    if let Some(r) = bisect(df, lo, hi, tol) {
        let v = f(r);
        if v >= coarse_v {
            return (r, v);
        }
    }
    (coarse_x, coarse_v)
}

/// Count interior descent-to-ascent transitions of `f` sampled on `n` uniform
/// points in [0,1]. Zero for a unimodal (or monotone, or flat) profile; each
/// interior local minimum contributes one.
pub fn descent_ascent_count(f: impl Fn(f64) -> f64, n: usize) -> usize {
    let mut count = 0;
    let mut last_sign = 0i8;
    let mut prev = f(0.0);
    for i in 1..n {
        let s = i as f64 / (n - 1) as f64;
        let v = f(s);
        let d = v - prev;
        prev = v;
        let sign = if d > FLAT_EPS {
            1
        } else if d < -FLAT_EPS {
            -1
        } else {
            0
        };
        if sign != 0 {
            if last_sign == -1 && sign == 1 {
                count += 1;
            }
            last_sign = sign;
        }
    }
    count
}

/// Bisection root of `f` on `[lo, hi]`; requires a sign change. Returns the
/// midpoint of the final bracket with |hi - lo| <= tol.
pub fn bisect(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64, tol: f64) -> Option<f64> {
    let mut flo = f(lo);
    let fhi = f(hi);
    if flo == 0.0 {
        return Some(lo);
    }
    if fhi == 0.0 {
        return Some(hi);
    }
    if flo.signum() == fhi.signum() {
        return None;
    }
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        let fmid = f(mid);
        if fmid == 0.0 {
            return Some(mid);
        }
        if fmid.signum() == flo.signum() {
            lo = mid;
            flo = fmid;
        } else {
            hi = mid;
        }
    }
    Some(0.5 * (lo + hi))
}

/// Interior local extrema of `f` on [0,1], located by a dense scan and
/// golden-section refinement. Returns `(position, value, is_maximum)` sorted
/// by position.
pub fn local_extrema(f: impl Fn(f64) -> f64 + Copy, n: usize, tol: f64) -> Vec<(f64, f64, bool)> {
    let h = 1.0 / (n - 1) as f64;
    let mut out = Vec::new();
    let mut last_sign = 0i8;
    let mut last_sign_i = 0usize;
    let mut prev = f(0.0);
    for i in 1..n {
        let v = f(i as f64 * h);
        let d = v - prev;
        prev = v;
        let sign = if d > FLAT_EPS {
            1
        } else if d < -FLAT_EPS {
            -1
        } else {
            0
        };
        if sign == 0 {
            continue;
        }
        if last_sign != 0 && sign != last_sign {
            // extremum between the two sampled slopes
            let lo = ((last_sign_i as f64 - 1.0) * h).max(0.0);
            let hi = (i as f64 * h).min(1.0);
            let is_max = last_sign == 1;
            let x = if is_max {
                golden_max(f, lo, hi, tol)
            } else {
                golden_max(|s| -f(s), lo, hi, tol)
            };
            out.push((x, f(x), is_max));
        }
        last_sign = sign;
        last_sign_i = i;
    }
    out
}
