//! Minimax of a finite family of convex quadratics.
//!
//! `y* = min_x max_s q_s(x)` is found by bisection on the one-sided slopes of
//! the (convex) upper envelope, then snapped to the nearest structural point:
//! a crossing of two active quadratics or the vertex of one of them.

use crate::error::{Error, Result};
use crate::linalg::Mat;
use crate::quadratic::Quadratic;
use crate::scalar::Real;

/// Relative part of the activity test `q_s(x*) >= y* - 1e-8 |y*| - 1e-12`.
pub const ACTIVITY_RELATIVE: f64 = 1e-8;
pub const ACTIVITY_ABSOLUTE: f64 = 1e-12;

const BISECTION_TOLERANCE: f64 = 1e-13;
const WEIGHT_PRUNE: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct EnvelopeSolution<T> {
    pub x_star: T,
    pub y_star: T,
    /// Indices into the family, ascending.
    pub active: Vec<usize>,
    /// Stationary weights on the active set, when recovered.
    pub weights: Option<Vec<(usize, T)>>,
    /// The minimizing set is an interval; `x_star` is its midpoint.
    pub flat: bool,
}

impl<T: Real> EnvelopeSolution<T> {
    pub fn is_active(&self, index: usize) -> bool {
        self.active.binary_search(&index).is_ok()
    }
}

fn c<T: Real>(x: f64) -> T {
    T::from_f64(x)
}

/// A tolerance, floored a little above the scalar type's rounding error.
fn tol<T: Real>(x: f64) -> T {
    T::from_f64(x).max(c::<T>(32.0) * T::epsilon())
}

pub fn envelope_value<T: Real>(quads: &[Quadratic<T>], x: T) -> T {
    quads
        .iter()
        .map(|q| q.value(x))
        .fold(T::neg_infinity(), T::max)
}

/// Left and right derivative of the envelope at `x`.
fn slopes<T: Real>(quads: &[Quadratic<T>], x: T) -> (T, T) {
    let values: Vec<T> = quads.iter().map(|q| q.value(x)).collect();
    let top = values.iter().copied().fold(T::neg_infinity(), T::max);
    let slack = c::<T>(64.0) * T::epsilon() * (T::one() + top.abs());
    let mut left = T::infinity();
    let mut right = T::neg_infinity();
    for (q, &v) in quads.iter().zip(&values) {
        if v >= top - slack {
            let d = q.derivative(x);
            left = left.min(d);
            right = right.max(d);
        }
    }
    (left, right)
}

fn is_constant<T: Real>(q: &Quadratic<T>, tiny: T) -> bool {
    q.c1.abs() <= tiny && q.c2.abs() <= tiny
}

fn coefficient_scale<T: Real>(quads: &[Quadratic<T>]) -> T {
    quads
        .iter()
        .map(|q| q.c0.abs().max(q.c1.abs()).max(q.c2.abs()))
        .fold(T::zero(), T::max)
}

fn bracket<T: Real>(quads: &[Quadratic<T>]) -> Result<(T, T)> {
    let tiny = tol::<T>(1e-12);
    let c2_min = quads
        .iter()
        .map(|q| q.c2)
        .filter(|&v| v > tiny)
        .fold(T::infinity(), T::min);
    let spread = quads
        .iter()
        .map(|q| q.c1.abs() + q.c0.abs())
        .fold(T::zero(), T::max);
    let denom = if c2_min.is_finite() { c2_min } else { tiny };
    let m = T::one() + spread / denom;
    let (mut lo, mut hi) = (-m, m);
    let mut tries = 0;
    while slopes(quads, lo).0 > T::zero() {
        lo = lo * c(2.0);
        tries += 1;
        if tries > 64 || !lo.is_finite() {
            return Err(Error::Unbounded);
        }
    }
    tries = 0;
    while slopes(quads, hi).1 < T::zero() {
        hi = hi * c(2.0);
        tries += 1;
        if tries > 64 || !hi.is_finite() {
            return Err(Error::Unbounded);
        }
    }
    Ok((lo, hi))
}

/// Snaps a bisection estimate onto the exact crossing or vertex it
/// approximates, when that point is at least as good.
fn polish<T: Real>(quads: &[Quadratic<T>], xb: T) -> T {
    let fb = envelope_value(quads, xb);
    let loose = c::<T>(1e-6).max(c::<T>(1e3) * T::epsilon());
    let near: Vec<&Quadratic<T>> = quads
        .iter()
        .filter(|q| q.value(xb) >= fb - loose * (T::one() + fb.abs()))
        .collect();
    let window = loose * (T::one() + xb.abs());
    let mut candidates = Vec::new();
    for (i, a) in near.iter().enumerate() {
        if let Some(m) = a.minimizer(c(1e-300)) {
            candidates.push(m);
        }
        for b in &near[i + 1..] {
            candidates.extend(a.crossings(b));
        }
    }
    let mut best: Option<(T, T)> = None;
    for x in candidates {
        if !x.is_finite() || (x - xb).abs() > window {
            continue;
        }
        let v = envelope_value(quads, x);
        if best.is_none_or(|(_, bv)| v < bv) {
            best = Some((x, v));
        }
    }
    match best {
        Some((x, v)) if v <= fb + c::<T>(8.0) * T::epsilon() * (T::one() + fb.abs()) => x,
        _ => xb,
    }
}

/// Interval where every non-constant quadratic stays at or below `level`.
fn sublevel_interval<T: Real>(quads: &[Quadratic<T>], level: T, tiny: T) -> (T, T) {
    let mut lo = T::neg_infinity();
    let mut hi = T::infinity();
    for q in quads.iter().filter(|q| !is_constant(q, tiny)) {
        let shifted = Quadratic::new(q.c0 - level, q.c1, q.c2);
        let zero = Quadratic::new(T::zero(), T::zero(), T::zero());
        let roots = shifted.crossings(&zero);
        if q.c2.abs() <= tiny {
            // a line: half-line below level
            if let Some(&r) = roots.first() {
                if q.c1 > T::zero() {
                    hi = hi.min(r);
                } else {
                    lo = lo.max(r);
                }
            }
        } else {
            match roots.len() {
                2 => {
                    lo = lo.max(roots[0]);
                    hi = hi.min(roots[1]);
                }
                1 => {
                    lo = lo.max(roots[0]);
                    hi = hi.min(roots[0]);
                }
                _ => {
                    let m = -q.c1 / q.c2;
                    lo = lo.max(m);
                    hi = hi.min(m);
                }
            }
        }
    }
    (lo, hi)
}

/// Minimizes the upper envelope of a family of convex quadratics.
pub fn minimize_envelope<T: Real>(quads: &[Quadratic<T>]) -> Result<EnvelopeSolution<T>> {
    if quads.is_empty() {
        return Err(Error::EmptyFamily);
    }
    let scale = coefficient_scale(quads).max(T::one());
    let tiny = tol::<T>(1e-14) * scale;
    for (i, q) in quads.iter().enumerate() {
        if q.c2 < -tiny {
            return Err(Error::NotConvex(i));
        }
    }
    let mut flat = false;
    let x_star = if quads.iter().all(|q| is_constant(q, tiny)) {
        T::zero()
    } else {
        let (mut lo, mut hi) = bracket(quads)?;
        for _ in 0..2000 {
            if hi - lo <= tol::<T>(BISECTION_TOLERANCE) * (T::one() + lo.abs().max(hi.abs())) {
                break;
            }
            let mid = (lo + hi) / c(2.0);
            let (left, right) = slopes(quads, mid);
            if right < T::zero() {
                lo = mid;
            } else if left > T::zero() {
                hi = mid;
            } else {
                lo = mid;
                hi = mid;
            }
        }
        let mut x = polish(quads, (lo + hi) / c(2.0));
        let y = envelope_value(quads, x);
        let constant_on_top = quads
            .iter()
            .any(|q| is_constant(q, tiny) && q.c0 >= y - tiny);
        if constant_on_top {
            let (a, b) = sublevel_interval(quads, y, tiny);
            if b - a > tol::<T>(1e-9) * (T::one() + x.abs()) {
                flat = true;
                x = match (a.is_finite(), b.is_finite()) {
                    (true, true) => (a + b) / c(2.0),
                    (true, false) => a,
                    (false, true) => b,
                    (false, false) => x,
                };
            }
        }
        x
    };
    let y_star = envelope_value(quads, x_star);
    let threshold = y_star - tol::<T>(ACTIVITY_RELATIVE) * y_star.abs() - tol::<T>(ACTIVITY_ABSOLUTE);
    let active = (0..quads.len())
        .filter(|&i| quads[i].value(x_star) >= threshold)
        .collect();
    Ok(EnvelopeSolution {
        x_star,
        y_star,
        active,
        weights: None,
        flat,
    })
}

/// Minimizes the envelope and attaches stationary support weights.
pub fn solve_with_weights<T: Real>(quads: &[Quadratic<T>]) -> Result<EnvelopeSolution<T>> {
    let mut sol = minimize_envelope(quads)?;
    sol.weights = Some(support_weights(&sol, quads)?);
    Ok(sol)
}

/// Nonnegative weights on the active set, summing to one, with
/// `sum p_s q_s'(x*) = 0`.
///
/// Preference order: a single block with zero slope; then a pair with slopes
/// of opposite sign, choosing the pair whose mixture has the largest
/// curvature, then the widest slope gap, then the highest indices; finally a
/// nonnegative least squares solve over the whole active set.
pub fn support_weights<T: Real>(
    solution: &EnvelopeSolution<T>,
    quads: &[Quadratic<T>],
) -> Result<Vec<(usize, T)>> {
    let active = &solution.active;
    if active.is_empty() {
        return Err(Error::NoFeasibleWeights);
    }
    let x = solution.x_star;
    let slope: Vec<T> = active.iter().map(|&i| quads[i].derivative(x)).collect();
    let scale = active
        .iter()
        .map(|&i| quads[i].c0.abs() + quads[i].c1.abs() + quads[i].c2.abs() * (T::one() + x.abs()))
        .fold(T::zero(), T::max)
        .max(T::epsilon());
    let zero_tol = tol::<T>(1e-9) * scale;
    let tie = tol::<T>(1e-9);

    // (curvature, gap, indices, weights)
    let mut best: Option<(T, T, Vec<usize>, Vec<(usize, T)>)> = None;
    let better = |cand: &(T, T, Vec<usize>), cur: &Option<(T, T, Vec<usize>, Vec<(usize, T)>)>| {
        let Some((bc, bg, bi, _)) = cur else {
            return true;
        };
        let (cc, cg, ci) = cand;
        let ctol = tie * (T::one() + bc.abs().max(cc.abs()));
        if (*cc - *bc).abs() > ctol {
            return cc > bc;
        }
        let gtol = tie * (T::one() + bg.abs().max(cg.abs()));
        if (*cg - *bg).abs() > gtol {
            return cg > bg;
        }
        let mut a = ci.clone();
        let mut b = bi.clone();
        a.sort_unstable_by(|x, y| y.cmp(x));
        b.sort_unstable_by(|x, y| y.cmp(x));
        a > b
    };

    for (k, &i) in active.iter().enumerate() {
        if slope[k].abs() <= zero_tol {
            let cand = (quads[i].c2, T::zero(), vec![i]);
            if better(&cand, &best) {
                best = Some((cand.0, cand.1, cand.2, vec![(i, T::one())]));
            }
        }
    }
    if let Some((_, _, _, w)) = best {
        return Ok(w);
    }

    for (a, &i) in active.iter().enumerate() {
        for (b, &j) in active.iter().enumerate() {
            let (di, dj) = (slope[a], slope[b]);
            if !(di > zero_tol && dj < -zero_tol) {
                continue;
            }
            let gap = di - dj;
            let wi = -dj / gap;
            let wj = di / gap;
            let curvature = wi * quads[i].c2 + wj * quads[j].c2;
            let cand = (curvature, gap, vec![i, j]);
            if better(&cand, &best) {
                let mut w = vec![(i, wi), (j, wj)];
                w.sort_by_key(|e| e.0);
                best = Some((cand.0, cand.1, cand.2, w));
            }
        }
    }
    if let Some((_, _, _, w)) = best {
        return Ok(w);
    }

    // fallback: min || [slope / scale; 1] w - [0; 1] ||, w >= 0
    let k = active.len();
    let a = Mat::from_fn(2, k, |r, col| if r == 0 { slope[col] / scale } else { T::one() });
    let w = nnls(&a, &[T::zero(), T::one()]);
    let total: T = w.iter().copied().sum();
    if total <= T::zero() {
        return Err(Error::NoFeasibleWeights);
    }
    let mut out: Vec<(usize, T)> = active
        .iter()
        .zip(&w)
        .filter(|(_, &v)| v / total >= tol::<T>(WEIGHT_PRUNE))
        .map(|(&i, &v)| (i, v))
        .collect();
    let kept: T = out.iter().map(|e| e.1).sum();
    for e in &mut out {
        e.1 = e.1 / kept;
    }
    let residual: T = out.iter().map(|&(i, v)| v * quads[i].derivative(x)).sum();
    if out.is_empty() || residual.abs() > tol::<T>(1e-7) * scale {
        return Err(Error::NoFeasibleWeights);
    }
    Ok(out)
}

/// Lawson-Hanson nonnegative least squares for small systems.
fn nnls<T: Real>(a: &Mat<T>, b: &[T]) -> Vec<T> {
    let n = a.cols();
    let tol = tol::<T>(1e-12);
    let cutoff = tol;
    let mut w = vec![T::zero(); n];
    let mut passive = vec![false; n];
    let gradient = |w: &[T]| -> Vec<T> {
        let aw = a.mul_vec(w);
        let r: Vec<T> = b.iter().zip(&aw).map(|(&bi, &ai)| bi - ai).collect();
        a.transpose().mul_vec(&r)
    };
    for _ in 0..(3 * n + 10) {
        let g = gradient(&w);
        let pick = (0..n)
            .filter(|&j| !passive[j] && g[j] > tol)
            .max_by(|&x, &y| g[x].partial_cmp(&g[y]).unwrap_or(std::cmp::Ordering::Equal));
        let Some(j) = pick else {
            break;
        };
        passive[j] = true;
        for _ in 0..(3 * n + 10) {
            let idx: Vec<usize> = (0..n).filter(|&j| passive[j]).collect();
            let sub = Mat::from_fn(a.rows(), idx.len(), |r, col| a[(r, idx[col])]);
            let st = sub.transpose();
            let z_sub = st.matmul(&sub).pseudo_inverse(cutoff).mul_vec(&st.mul_vec(b));
            let mut z = vec![T::zero(); n];
            for (k, &j) in idx.iter().enumerate() {
                z[j] = z_sub[k];
            }
            if idx.iter().all(|&j| z[j] > tol) {
                w = z;
                break;
            }
            let mut alpha = T::one();
            for &j in &idx {
                if z[j] <= tol {
                    let denom = w[j] - z[j];
                    if denom > T::zero() {
                        alpha = alpha.min(w[j] / denom);
                    }
                }
            }
            for j in 0..n {
                w[j] = w[j] + alpha * (z[j] - w[j]);
            }
            for &j in &idx {
                if w[j] <= tol {
                    passive[j] = false;
                    w[j] = T::zero();
                }
            }
        }
    }
    w
}
