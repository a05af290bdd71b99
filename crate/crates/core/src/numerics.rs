//! Deterministic scalar kernels shared by every solver: bracketed root
//! finding, adaptive Simpson quadrature, and scan-then-refine maximization
//! in one and two dimensions.

use log::trace;

use crate::error::{Error, Result};

/// Default absolute tolerance on `|f(x)|` for [`find_root`].
pub const ROOT_TOL: f64 = 1e-10;
/// Default absolute tolerance for [`integrate`].
pub const QUAD_TOL: f64 = 1e-9;
/// Final bracket width of the golden-section refinement.
pub const ARGMAX_WIDTH: f64 = 1e-10;
/// Number of points in the coarse scan of [`maximize_1d`].
pub const SCAN_POINTS: usize = 1025;

const MAX_DEPTH: u32 = 50;
const MIN_DEPTH: u32 = 2;
const MAX_ROOT_ITER: usize = 500;
const INV_PHI: f64 = 0.618_033_988_749_894_8;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RootResult {
    pub x: f64,
    pub residual: f64,
    pub iterations: usize,
}

/// Solves `f(x) = 0` on `[a, b]` by bisection with secant acceleration.
///
/// Each step proposes the false-position point of the current bracket; if
/// the previous step failed to halve the bracket, the proposal is replaced by
/// the midpoint, so the bracket at least halves every two iterations.
/// Infinite endpoint values are accepted and only contribute their sign.
/// Iteration stops once `|f(x)| <= tol` or the bracket can no longer shrink
/// in floating point (a sign change at a discontinuity).
pub fn find_root<F>(f: F, a: f64, b: f64, tol: f64) -> Result<RootResult>
where
    F: Fn(f64) -> f64,
{
    if !(a <= b) {
        return Err(Error::InvalidArgument(format!(
            "root bracket [{a}, {b}] is empty"
        )));
    }
    let (mut lo, mut hi) = (a, b);
    let (mut flo, mut fhi) = (f(lo), f(hi));
    if flo.is_nan() {
        return Err(Error::NonFinite { at: lo });
    }
    if fhi.is_nan() {
        return Err(Error::NonFinite { at: hi });
    }
    if flo.abs() <= tol {
        return Ok(RootResult {
            x: lo,
            residual: flo,
            iterations: 0,
        });
    }
    if fhi.abs() <= tol {
        return Ok(RootResult {
            x: hi,
            residual: fhi,
            iterations: 0,
        });
    }
    if flo.signum() == fhi.signum() {
        return Err(Error::Bracket {
            a,
            b,
            fa: flo,
            fb: fhi,
        });
    }

    let mut force_bisect = false;
    for iter in 1..=MAX_ROOT_ITER {
        let width = hi - lo;
        let mid = lo + 0.5 * width;
        let mut x = if !force_bisect && flo.is_finite() && fhi.is_finite() {
            lo - flo * width / (fhi - flo)
        } else {
            mid
        };
        if !(x > lo && x < hi) {
            x = mid;
        }
        if !(x > lo && x < hi) {
            // Adjacent floats: the sign change cannot be localised further.
            let (x, residual) = if flo.abs() <= fhi.abs() {
                (lo, flo)
            } else {
                (hi, fhi)
            };
            return Ok(RootResult {
                x,
                residual,
                iterations: iter,
            });
        }
        let fx = f(x);
        if fx.is_nan() {
            return Err(Error::NonFinite { at: x });
        }
        if fx.abs() <= tol {
            return Ok(RootResult {
                x,
                residual: fx,
                iterations: iter,
            });
        }
        if fx.signum() == flo.signum() {
            lo = x;
            flo = fx;
        } else {
            hi = x;
            fhi = fx;
        }
        force_bisect = hi - lo > 0.5 * width;
    }
    let (x, residual) = if flo.abs() <= fhi.abs() {
        (lo, flo)
    } else {
        (hi, fhi)
    };
    Ok(RootResult {
        x,
        residual,
        iterations: MAX_ROOT_ITER,
    })
}

/// Result of an adaptive quadrature. `converged` is false when some panel hit
/// the recursion cap before meeting its share of the tolerance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Quadrature {
    pub value: f64,
    pub error_estimate: f64,
    pub converged: bool,
    pub evaluations: usize,
}

struct Simpson<'a, F> {
    f: &'a F,
    evaluations: usize,
    error: f64,
    converged: bool,
}

impl<F: Fn(f64) -> f64> Simpson<'_, F> {
    #[allow(clippy::too_many_arguments)]
    fn recurse(
        &mut self,
        a: f64,
        fa: f64,
        m: f64,
        fm: f64,
        b: f64,
        fb: f64,
        whole: f64,
        eps: f64,
        depth: u32,
    ) -> f64 {
        let lm = 0.5 * (a + m);
        let rm = 0.5 * (m + b);
        let flm = (self.f)(lm);
        let frm = (self.f)(rm);
        self.evaluations += 2;
        let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
        let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
        let delta = left + right - whole;
        if depth >= MIN_DEPTH && delta.abs() <= 15.0 * eps {
            self.error += delta.abs() / 15.0;
            return left + right + delta / 15.0;
        }
        if depth >= MAX_DEPTH {
            self.converged = false;
            self.error += delta.abs() / 15.0;
            return left + right + delta / 15.0;
        }
        self.recurse(a, fa, lm, flm, m, fm, left, 0.5 * eps, depth + 1)
            + self.recurse(m, fm, rm, frm, b, fb, right, 0.5 * eps, depth + 1)
    }
}

/// Adaptive Simpson quadrature of `f` over `[a, b]`.
pub fn integrate<F>(f: F, a: f64, b: f64, tol: f64) -> Quadrature
where
    F: Fn(f64) -> f64,
{
    if a == b {
        return Quadrature {
            value: 0.0,
            error_estimate: 0.0,
            converged: true,
            evaluations: 0,
        };
    }
    if b < a {
        let q = integrate(f, b, a, tol);
        return Quadrature {
            value: -q.value,
            ..q
        };
    }
    let m = 0.5 * (a + b);
    let (fa, fm, fb) = (f(a), f(m), f(b));
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    let mut state = Simpson {
        f: &f,
        evaluations: 3,
        error: 0.0,
        converged: true,
    };
    let value = state.recurse(a, fa, m, fm, b, fb, whole, tol, 0);
    if !state.converged {
        trace!(
            "quadrature on [{a}, {b}] hit the depth cap; error estimate {}",
            state.error
        );
    }
    Quadrature {
        value,
        error_estimate: state.error,
        converged: state.converged,
        evaluations: state.evaluations,
    }
}

/// Integrates over `[a, b]` split at the interior `breaks`, splitting the
/// tolerance in proportion to piece width. Use when the integrand jumps at
/// known points.
pub fn integrate_piecewise<F>(f: F, a: f64, b: f64, breaks: &[f64], tol: f64) -> Quadrature
where
    F: Fn(f64) -> f64,
{
    let mut total = Quadrature {
        value: 0.0,
        error_estimate: 0.0,
        converged: true,
        evaluations: 0,
    };
    if b <= a {
        return integrate(f, a, b, tol);
    }
    let mut left = a;
    let inner = breaks.iter().copied().filter(|&x| x > a && x < b);
    for right in inner.chain(std::iter::once(b)) {
        if right <= left {
            continue;
        }
        let piece = integrate(&f, left, right, tol * (right - left) / (b - a));
        total.value += piece.value;
        total.error_estimate += piece.error_estimate;
        total.converged &= piece.converged;
        total.evaluations += piece.evaluations;
        left = right;
    }
    total
}

#[derive(Debug, Clone, PartialEq)]
pub struct MaxResult {
    pub argmax: f64,
    pub value: f64,
    /// Spacing of the coarse scan.
    pub grid_resolution: f64,
    /// Coarse-scan points whose value equals the best scan value exactly.
    pub ties: Vec<f64>,
}

fn finite_or_neg_inf(v: f64) -> f64 {
    if v.is_nan() {
        f64::NEG_INFINITY
    } else {
        v
    }
}

/// Golden-section maximization on `[lo, hi]` down to `width`. Returns the
/// best point seen.
fn golden_max<F>(f: &F, mut lo: f64, mut hi: f64, width: f64) -> (f64, f64)
where
    F: Fn(f64) -> f64,
{
    let mut x1 = hi - INV_PHI * (hi - lo);
    let mut x2 = lo + INV_PHI * (hi - lo);
    let mut f1 = finite_or_neg_inf(f(x1));
    let mut f2 = finite_or_neg_inf(f(x2));
    while hi - lo > width {
        if f1 >= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - INV_PHI * (hi - lo);
            f1 = finite_or_neg_inf(f(x1));
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + INV_PHI * (hi - lo);
            f2 = finite_or_neg_inf(f(x2));
        }
    }
    if f1 >= f2 {
        (x1, f1)
    } else {
        (x2, f2)
    }
}

/// Maximizes `f` on `[a, b]`: a uniform scan of [`SCAN_POINTS`] points picks
/// the best cell (ties go to the smallest point), then golden-section search
/// refines within the neighbouring cells. The refined point replaces the scan
/// point only if it is strictly better, so the result is never below any scan
/// value.
pub fn maximize_1d<F>(f: F, a: f64, b: f64) -> MaxResult
where
    F: Fn(f64) -> f64,
{
    maximize_1d_with(f, a, b, SCAN_POINTS, ARGMAX_WIDTH)
}

pub fn maximize_1d_with<F>(f: F, a: f64, b: f64, points: usize, width: f64) -> MaxResult
where
    F: Fn(f64) -> f64,
{
    let points = points.max(2);
    let step = (b - a) / (points - 1) as f64;
    let grid = |i: usize| {
        if i == points - 1 {
            b
        } else {
            a + step * i as f64
        }
    };
    let values: Vec<f64> = (0..points).map(|i| finite_or_neg_inf(f(grid(i)))).collect();
    let mut best = 0;
    for (i, &v) in values.iter().enumerate() {
        if v > values[best] {
            best = i;
        }
    }
    let ties = values
        .iter()
        .enumerate()
        .filter(|&(_, &v)| v == values[best])
        .map(|(i, _)| grid(i))
        .collect();

    let lo = grid(best.saturating_sub(1));
    let hi = grid((best + 1).min(points - 1));
    let (mut argmax, mut value) = (grid(best), values[best]);
    if hi > lo {
        let (x, fx) = golden_max(&f, lo, hi, width);
        if fx > value {
            argmax = x;
            value = fx;
        }
    }
    MaxResult {
        argmax,
        value,
        grid_resolution: step,
        ties,
    }
}

/// Axis-aligned search box for [`maximize_2d_constrained`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rect {
    pub x: (f64, f64),
    pub y: (f64, f64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MaxResult2d {
    pub argmax: (f64, f64),
    pub value: f64,
    pub grid_resolution: (f64, f64),
    /// False when no grid point satisfied the feasibility predicate.
    pub feasible: bool,
}

/// Grid search of `f` over the feasible points of an `n x n` grid on `rect`,
/// followed by alternating golden-section refinement along each axis within
/// one cell of the incumbent. Infeasible trial points count as `-inf`.
pub fn maximize_2d_constrained<F, C>(f: F, feasible: C, rect: Rect, n: usize) -> MaxResult2d
where
    F: Fn(f64, f64) -> f64,
    C: Fn(f64, f64) -> bool,
{
    let n = n.max(2);
    let hx = (rect.x.1 - rect.x.0) / (n - 1) as f64;
    let hy = (rect.y.1 - rect.y.0) / (n - 1) as f64;
    let at = |lo: f64, h: f64, hi: f64, i: usize| if i == n - 1 { hi } else { lo + h * i as f64 };
    let objective = |x: f64, y: f64| {
        if feasible(x, y) {
            finite_or_neg_inf(f(x, y))
        } else {
            f64::NEG_INFINITY
        }
    };

    let mut best: Option<(f64, f64, f64)> = None;
    for i in 0..n {
        let x = at(rect.x.0, hx, rect.x.1, i);
        for j in 0..n {
            let y = at(rect.y.0, hy, rect.y.1, j);
            if !feasible(x, y) {
                continue;
            }
            let v = finite_or_neg_inf(f(x, y));
            if best.is_none_or(|(_, _, bv)| v > bv) {
                best = Some((x, y, v));
            }
        }
    }
    let Some((mut bx, mut by, mut bv)) = best else {
        return MaxResult2d {
            argmax: (f64::NAN, f64::NAN),
            value: f64::NEG_INFINITY,
            grid_resolution: (hx, hy),
            feasible: false,
        };
    };

    for _ in 0..4 {
        let (x, v) = golden_max(
            &|x| objective(x, by),
            (bx - hx).max(rect.x.0),
            (bx + hx).min(rect.x.1),
            ARGMAX_WIDTH,
        );
        if v > bv {
            bx = x;
            bv = v;
        }
        let (y, v) = golden_max(
            &|y| objective(bx, y),
            (by - hy).max(rect.y.0),
            (by + hy).min(rect.y.1),
            ARGMAX_WIDTH,
        );
        if v > bv {
            by = y;
            bv = v;
        }
    }
    MaxResult2d {
        argmax: (bx, by),
        value: bv,
        grid_resolution: (hx, hy),
        feasible: true,
    }
}
