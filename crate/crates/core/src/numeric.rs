//! Small numerical kernels shared by the models.

/// Bisection on `[lo, hi]` for an `f` that changes sign across the bracket.
///
/// Stops when `|f(mid)| <= ftol`, when the bracket is narrower than `xtol`, or
/// when the midpoint can no longer be distinguished from an endpoint.
/// Returns `None` without a sign change.
pub fn bisect<F>(f: F, mut lo: f64, mut hi: f64, xtol: f64, ftol: f64) -> Option<f64>
where
    F: Fn(f64) -> f64,
{
    let mut flo = f(lo);
    let fhi = f(hi);
    if !flo.is_finite() || !fhi.is_finite() {
        return None;
    }
    if flo == 0.0 {
        return Some(lo);
    }
    if fhi == 0.0 {
        return Some(hi);
    }
    if flo.signum() == fhi.signum() {
        return None;
    }

    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        let fmid = f(mid);
        if fmid.abs() <= ftol || hi - lo <= xtol || mid <= lo || mid >= hi {
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

/// One classical fourth-order Runge-Kutta step for a scalar autonomous ODE.
///
/// Stage arguments are passed through `project` before evaluation so a
/// right-hand side defined only on a bounded interval is never evaluated
/// outside it.
pub fn rk4_step<F, P>(rhs: F, project: P, x: f64, h: f64) -> f64
where
    F: Fn(f64) -> f64,
    P: Fn(f64) -> f64,
{
    let k1 = rhs(x);
    let k2 = rhs(project(x + 0.5 * h * k1));
    let k3 = rhs(project(x + 0.5 * h * k2));
    let k4 = rhs(project(x + h * k3));
    x + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
}

/// `n` points evenly spaced on `[lo, hi]`, endpoints included exactly.
pub fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![lo],
        _ => (0..n)
            .map(|i| {
                if i == n - 1 {
                    hi
                } else {
                    lo + (hi - lo) * i as f64 / (n - 1) as f64
                }
            })
            .collect(),
    }
}
