//! Small numerical kernels shared by the modules: exponential moments,
//! adaptive Gauss–Kronrod quadrature, fixed-step RK4 and bracketed
//! root finding.

use crate::{Error, Result};

/// `expm1(x) / x`, continuous at `x = 0`.
pub fn exprel(x: f64) -> f64 {
    if x.abs() < 1e-5 {
        1.0 + x / 2.0 + x * x / 6.0 + x * x * x / 24.0
    } else {
        x.exp_m1() / x
    }
}

/// `∫_0^t u^j e^{m u} du` for `t ≥ 0`.
///
/// Uses the integration-by-parts recursion when `|m t|` is large enough for
/// it to be well conditioned and a power series in `m` otherwise, so the
/// value is smooth through `m = 0`.
pub fn exp_moment(j: u32, m: f64, t: f64) -> f64 {
    if t == 0.0 {
        return 0.0;
    }
    let mt = m * t;
    if mt.abs() < 0.5 {
        // Σ_n m^n t^{n+j+1} / (n! (n+j+1))
        let mut term = t.powi(j as i32 + 1); // m^n t^{n+j+1} / n!
        let mut sum = term / (j as f64 + 1.0);
        for n in 1..60 {
            term *= mt / n as f64;
            let add = term / (n as f64 + j as f64 + 1.0);
            sum += add;
            if add.abs() <= 1e-18 * sum.abs() {
                break;
            }
        }
        return sum;
    }
    let e = mt.exp();
    let mut moment = t * exprel(mt);
    let mut tp = 1.0;
    for i in 1..=j {
        tp *= t;
        moment = (tp * e - i as f64 * moment) / m;
    }
    moment
}

const XGK: [f64; 8] = [
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144845693013,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.0,
];
const WGK: [f64; 8] = [
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
];
const WG: [f64; 4] = [
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
];

fn gauss_kronrod_15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let centre = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(centre);
    let mut kronrod = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for i in 0..7 {
        let dx = half * XGK[i];
        let pair = f(centre - dx) + f(centre + dx);
        kronrod += WGK[i] * pair;
        if i % 2 == 1 {
            gauss += WG[i / 2] * pair;
        }
    }
    (kronrod * half, ((kronrod - gauss) * half).abs())
}

/// Adaptive Gauss–Kronrod (7/15) quadrature of `f` over `[a, b]`.
///
/// Subintervals are bisected until the Kronrod/Gauss difference falls below
/// `max(abs_tol, rel_tol·|I|)` scaled to the subinterval width.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, rel_tol: f64, abs_tol: f64) -> f64 {
    if a == b {
        return 0.0;
    }
    let (whole, _) = gauss_kronrod_15(&f, a, b);
    let width = (b - a).abs();
    let tol = abs_tol.max(rel_tol * whole.abs());
    let mut stack = vec![(a, b, 0u32)];
    let mut total = 0.0;
    while let Some((lo, hi, depth)) = stack.pop() {
        let (value, err) = gauss_kronrod_15(&f, lo, hi);
        let share = tol * ((hi - lo).abs() / width).max(1e-6);
        if err <= share || depth >= 40 {
            total += value;
        } else {
            let mid = 0.5 * (lo + hi);
            stack.push((lo, mid, depth + 1));
            stack.push((mid, hi, depth + 1));
        }
    }
    total
}

/// Integrates `y' = f(t, y)` backward from `y(t_end) = y_end` to `t_start`
/// with `steps` classical RK4 steps. Returns the states on the uniform grid
/// `t_start + i·h`, index 0 at `t_start` and index `steps` at `t_end`.
pub fn rk4_backward<const N: usize, F>(
    f: F,
    t_start: f64,
    t_end: f64,
    y_end: [f64; N],
    steps: usize,
) -> Vec<[f64; N]>
where
    F: Fn(f64, &[f64; N]) -> [f64; N],
{
    let h = (t_end - t_start) / steps as f64;
    let mut out = vec![[0.0; N]; steps + 1];
    out[steps] = y_end;
    let mut y = y_end;
    let axpy = |y: &[f64; N], k: &[f64; N], s: f64| {
        let mut r = *y;
        for i in 0..N {
            r[i] += s * k[i];
        }
        r
    };
    for i in (0..steps).rev() {
        let t = t_start + (i + 1) as f64 * h;
        // step of size -h
        let k1 = f(t, &y);
        let k2 = f(t - 0.5 * h, &axpy(&y, &k1, -0.5 * h));
        let k3 = f(t - 0.5 * h, &axpy(&y, &k2, -0.5 * h));
        let k4 = f(t - h, &axpy(&y, &k3, -h));
        for j in 0..N {
            y[j] -= h / 6.0 * (k1[j] + 2.0 * k2[j] + 2.0 * k3[j] + k4[j]);
        }
        out[i] = y;
    }
    out
}

/// Bisection on `[lo, hi]` until the bracket is narrower than `tol`.
pub fn bisect<F: Fn(f64) -> f64>(f: F, mut lo: f64, mut hi: f64, tol: f64) -> Result<f64> {
    let mut f_lo = f(lo);
    let f_hi = f(hi);
    if f_lo == 0.0 {
        return Ok(lo);
    }
    if f_hi == 0.0 {
        return Ok(hi);
    }
    if f_lo.signum() == f_hi.signum() || !f_lo.is_finite() || !f_hi.is_finite() {
        return Err(Error::NoSignChange { lo, hi, f_lo, f_hi });
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if (hi - lo) <= tol {
            return Ok(mid);
        }
        let f_mid = f(mid);
        if f_mid == 0.0 {
            return Ok(mid);
        }
        if f_mid.signum() == f_lo.signum() {
            lo = mid;
            f_lo = f_mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}
