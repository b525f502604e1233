//! Limited-memory BFGS with a strong-Wolfe line search.

use std::collections::VecDeque;
use std::time::Instant;

use ndarray::Array1;

use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy)]
pub(crate) struct InnerOptions<T> {
    /// Stop once `‖∇f‖∞ ≤ grad_tol · max(1, |f|)`.
    pub grad_tol: T,
    pub max_iters: usize,
    pub memory: usize,
    pub deadline: Option<Instant>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum InnerStop {
    Converged,
    MaxIters,
    TimeLimit,
    LineSearchFailed,
}

#[derive(Debug, Clone)]
pub(crate) struct InnerResult<T> {
    pub x: Array1<T>,
    pub iters: usize,
    pub stop: InnerStop,
}

const C1: f64 = 1e-4;
const C2: f64 = 0.9;

fn inf_norm<T: Scalar>(v: &Array1<T>) -> T {
    v.iter().fold(T::zero(), |m, &x| m.max(x.abs()))
}

fn stationary<T: Scalar>(f: T, g: &Array1<T>, tol: T) -> bool {
    inf_norm(g) <= tol * T::one().max(f.abs())
}

struct Point<T> {
    alpha: T,
    x: Array1<T>,
    f: T,
    g: Array1<T>,
    slope: T,
}

/// Minimizes `fg` from `x0`. `observe` sees every accepted iterate.
pub(crate) fn minimize<T, F, O>(mut fg: F, x0: Array1<T>, opts: &InnerOptions<T>, mut observe: O) -> InnerResult<T>
where
    T: Scalar,
    F: FnMut(&Array1<T>) -> (T, Array1<T>),
    O: FnMut(&Array1<T>, T),
{
    let mut x = x0;
    let (mut f, mut g) = fg(&x);
    let mut pairs: VecDeque<(Array1<T>, Array1<T>, T)> = VecDeque::with_capacity(opts.memory);
    let mut iters = 0;

    if stationary(f, &g, opts.grad_tol) {
        return InnerResult { x, iters, stop: InnerStop::Converged };
    }
    let stop = loop {
        if iters >= opts.max_iters {
            break InnerStop::MaxIters;
        }
        if opts.deadline.is_some_and(|d| Instant::now() >= d) {
            break InnerStop::TimeLimit;
        }
        let mut dir = two_loop(&g, &pairs);
        if g.dot(&dir) >= T::zero() {
            pairs.clear();
            dir = g.mapv(|v| -v);
        }
        let alpha0 = if pairs.is_empty() { T::one().min(T::one() / inf_norm(&g)) } else { T::one() };
        let Some(step) = line_search(&mut fg, &x, f, &g, &dir, alpha0) else {
            if pairs.is_empty() {
                break InnerStop::LineSearchFailed;
            }
            pairs.clear();
            continue;
        };
        iters += 1;
        let s = &step.x - &x;
        let y = &step.g - &g;
        let sy = s.dot(&y);
        if sy > T::epsilon() * s.dot(&s).sqrt() * y.dot(&y).sqrt() {
            if pairs.len() == opts.memory {
                pairs.pop_front();
            }
            pairs.push_back((s, y, T::one() / sy));
        }
        x = step.x;
        f = step.f;
        g = step.g;
        observe(&x, f);
        if stationary(f, &g, opts.grad_tol) {
            break InnerStop::Converged;
        }
    };
    InnerResult { x, iters, stop }
}

/// Two-loop recursion: `-H ∇f` with the current curvature pairs.
fn two_loop<T: Scalar>(g: &Array1<T>, pairs: &VecDeque<(Array1<T>, Array1<T>, T)>) -> Array1<T> {
    let mut q = g.mapv(|v| -v);
    let mut alphas = Vec::with_capacity(pairs.len());
    for (s, y, rho) in pairs.iter().rev() {
        let a = *rho * s.dot(&q);
        q.scaled_add(-a, y);
        alphas.push(a);
    }
    if let Some((s, y, _)) = pairs.back() {
        let gamma = s.dot(y) / y.dot(y);
        q.mapv_inplace(|v| v * gamma);
    }
    for ((s, y, rho), a) in pairs.iter().zip(alphas.into_iter().rev()) {
        let b = *rho * y.dot(&q);
        q.scaled_add(a - b, s);
    }
    q
}

fn line_search<T, F>(fg: &mut F, x: &Array1<T>, f0: T, g0: &Array1<T>, dir: &Array1<T>, alpha0: T) -> Option<Point<T>>
where
    T: Scalar,
    F: FnMut(&Array1<T>) -> (T, Array1<T>),
{
    let slope0 = g0.dot(dir);
    let c1 = T::lit(C1);
    let c2 = T::lit(C2);
    let mut eval = |alpha: T| {
        let xa = x + &dir.mapv(|v| v * alpha);
        let (fa, ga) = fg(&xa);
        let slope = ga.dot(dir);
        Point { alpha, x: xa, f: fa, g: ga, slope }
    };
    let armijo = |p: &Point<T>| p.f.is_finite() && p.f <= f0 + c1 * p.alpha * slope0;

    let mut prev = Point { alpha: T::zero(), x: x.clone(), f: f0, g: g0.clone(), slope: slope0 };
    let mut alpha = alpha0;
    for i in 0..30 {
        let cur = eval(alpha);
        if !armijo(&cur) || (i > 0 && cur.f >= prev.f) {
            return zoom(&mut eval, f0, slope0, prev, cur);
        }
        if cur.slope.abs() <= -c2 * slope0 {
            return Some(cur);
        }
        if cur.slope >= T::zero() {
            return zoom(&mut eval, f0, slope0, cur, prev);
        }
        alpha *= T::lit(2.0);
        prev = cur;
    }
    (prev.alpha > T::zero()).then_some(prev)
}

/// Shrinks the bracket `[lo, hi]`; `lo` always satisfies sufficient decrease.
fn zoom<T, E>(eval: &mut E, f0: T, slope0: T, mut lo: Point<T>, mut hi: Point<T>) -> Option<Point<T>>
where
    T: Scalar,
    E: FnMut(T) -> Point<T>,
{
    let c1 = T::lit(C1);
    let c2 = T::lit(C2);
    for _ in 0..50 {
        let width = hi.alpha - lo.alpha;
        if width.abs() <= T::epsilon() * lo.alpha.abs().max(T::epsilon()) {
            break;
        }
        // Quadratic through (lo.f, lo.slope, hi.f), kept inside the middle 80% of the bracket.
        let mut alpha = lo.alpha + width / T::lit(2.0);
        if hi.f.is_finite() {
            let denom = T::lit(2.0) * (hi.f - lo.f - lo.slope * width);
            if denom != T::zero() {
                let q = lo.alpha - lo.slope * width * width / denom;
                let (a, b) = (lo.alpha + T::lit(0.1) * width, hi.alpha - T::lit(0.1) * width);
                let (a, b) = if a < b { (a, b) } else { (b, a) };
                if q.is_finite() && q >= a && q <= b {
                    alpha = q;
                }
            }
        }
        let p = eval(alpha);
        if !p.f.is_finite() || p.f > f0 + c1 * alpha * slope0 || p.f >= lo.f {
            hi = p;
        } else {
            if p.slope.abs() <= -c2 * slope0 {
                return Some(p);
            }
            if p.slope * (hi.alpha - lo.alpha) >= T::zero() {
                hi = lo;
            }
            lo = p;
        }
    }
    (lo.alpha > T::zero() && lo.f < f0).then_some(lo)
}
