//! Equivalence-theorem scores, certificates and the weight optimizer.
//!
//! E (and every criterion when `t = 2`) is solved through the envelope game.
//! A, D and T are maximized by vertex-direction ascent with an exact line
//! search; a Newton solve on the current support face is attempted every
//! `PRUNE_EVERY` iterations and again before returning.

use std::fmt;

use crate::design::{criterion_from_moments, ApproxDesign, Criterion, DesignMoments};
use crate::envelope::solve_with_weights;
use crate::error::{Error, Result};
use crate::linalg::Mat;
use crate::model::PreparedSpace;
use crate::moments::BlockMoments;
use crate::scalar::Real;

const PRUNE_EVERY: usize = 50;
const LINE_SEARCH_TOLERANCE: f64 = 1e-12;
const NEWTON_ITERATIONS: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CertificateKind {
    A,
    D,
    E,
    T,
    Lambda,
    Universal,
}

impl From<Criterion> for CertificateKind {
    fn from(c: Criterion) -> Self {
        match c {
            Criterion::A => CertificateKind::A,
            Criterion::D => CertificateKind::D,
            Criterion::E => CertificateKind::E,
            Criterion::T => CertificateKind::T,
        }
    }
}

impl fmt::Display for CertificateKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            CertificateKind::A => "A",
            CertificateKind::D => "D",
            CertificateKind::E => "E",
            CertificateKind::T => "T",
            CertificateKind::Lambda => "Lambda",
            CertificateKind::Universal => "Universal",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Certificate<T> {
    pub kind: CertificateKind,
    /// `(block index, score)` for every block considered.
    pub scores: Vec<(usize, T)>,
    pub max_score: T,
    pub support_attains_max: bool,
    /// Extra named conditions, each required to be within tolerance.
    pub residuals: Vec<(String, T)>,
    pub pass: bool,
    pub tolerance: T,
}

impl<T: Real> Certificate<T> {
    pub fn score(&self, index: usize) -> Option<T> {
        self.scores.iter().find(|e| e.0 == index).map(|e| e.1)
    }

    /// Block with the largest score, lowest index on ties.
    pub fn argmax(&self) -> Option<usize> {
        let mut best: Option<(usize, T)> = None;
        for &(i, s) in &self.scores {
            if best.is_none_or(|(_, b)| s > b) {
                best = Some((i, s));
            }
        }
        best.map(|b| b.0)
    }

    /// A certificate whose scores could not be formed.
    fn failed(kind: CertificateKind, indices: &[usize], tolerance: T) -> Self {
        Certificate {
            kind,
            scores: indices.iter().map(|&i| (i, T::infinity())).collect(),
            max_score: T::infinity(),
            support_attains_max: false,
            residuals: Vec::new(),
            pass: false,
            tolerance,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimizeOptions<T> {
    /// Allowed excess of the max score over 1.
    pub tolerance: T,
    pub max_iterations: usize,
    pub prune_threshold: T,
}

impl<T: Real> Default for OptimizeOptions<T> {
    fn default() -> Self {
        OptimizeOptions {
            tolerance: T::from_f64(1e-8),
            max_iterations: 100_000,
            prune_threshold: T::from_f64(1e-12),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimizeResult<T> {
    pub design: ApproxDesign<T>,
    pub certificate: Certificate<T>,
    pub value: T,
    pub x_d: T,
    pub iterations: usize,
}

/// Everything a block score needs from the design.
#[derive(Debug, Clone, Copy)]
struct ScoreContext<T> {
    crit: Criterion,
    k: T,
    tm1: T,
    x_d: T,
    lambda0: T,
    qx: T,
    ql: T,
    pi: T,
}

impl<T: Real> ScoreContext<T> {
    fn new(dm: &DesignMoments<T>, t: usize, lambda0: T, crit: Criterion) -> Result<Self> {
        let k = T::from_int(t as i64 - 2);
        let tm1 = T::from_int(t as i64 - 1);
        let qx = dm.qx();
        let ql = dm.ql(lambda0);
        let tiny = T::from_f64(1e-14) * (T::one() + dm.c11.abs());
        let ok = match crit {
            Criterion::E => !dm.degenerate && qx > tiny,
            Criterion::A | Criterion::D => !dm.degenerate && qx > tiny && (t == 2 || ql > tiny),
            Criterion::T => qx + k * ql > tiny,
        };
        if !ok {
            return Err(Error::Degenerate);
        }
        let pi = if t == 2 { T::one() } else { ql / (ql + k * qx) };
        Ok(ScoreContext {
            crit,
            k,
            tm1,
            x_d: dm.x_d,
            lambda0,
            qx,
            ql,
            pi,
        })
    }

    fn score(&self, m: &BlockMoments<T>) -> T {
        let q = m.quadratic();
        let at_x = q.value(self.x_d);
        let two = self.k > T::zero();
        let sx = at_x / self.qx;
        match self.crit {
            Criterion::E => sx,
            Criterion::D => {
                if two {
                    sx / self.tm1 + self.k / self.tm1 * q.value(self.lambda0) / self.ql
                } else {
                    sx
                }
            }
            Criterion::A => {
                if two {
                    self.pi * sx + (T::one() - self.pi) * q.value(self.lambda0) / self.ql
                } else {
                    sx
                }
            }
            Criterion::T => {
                (at_x + self.k * q.value(self.lambda0)) / (self.qx + self.k * self.ql)
            }
        }
    }
}

/// Equivalence-theorem score of `block` against design `d`.
pub fn score_block<T: Real>(
    space: &PreparedSpace<T>,
    d: &ApproxDesign<T>,
    block: usize,
    crit: Criterion,
    lambda0: T,
) -> Result<T> {
    let dm = crate::design::design_moments(space, d);
    let ctx = ScoreContext::new(&dm, space.t(), lambda0, crit)?;
    Ok(ctx.score(&space.moments()[block]))
}

fn certificate_from_scores<T: Real>(
    kind: CertificateKind,
    scores: Vec<(usize, T)>,
    weights: &[T],
    tolerance: T,
) -> Certificate<T> {
    let max_score = scores.iter().map(|e| e.1).fold(T::neg_infinity(), T::max);
    let floor = T::one() - tolerance;
    let support_attains_max = scores
        .iter()
        .filter(|e| weights[e.0] > T::zero())
        .all(|e| e.1 >= floor);
    let pass = max_score <= T::one() + tolerance && support_attains_max;
    Certificate {
        kind,
        scores,
        max_score,
        support_attains_max,
        residuals: Vec::new(),
        pass,
        tolerance,
    }
}

/// Certificate over the blocks in `indices`.
pub fn certify_over<T: Real>(
    space: &PreparedSpace<T>,
    d: &ApproxDesign<T>,
    crit: Criterion,
    lambda0: T,
    tolerance: T,
    indices: &[usize],
) -> Certificate<T> {
    let dm = crate::design::design_moments(space, d);
    let Ok(ctx) = ScoreContext::new(&dm, space.t(), lambda0, crit) else {
        return Certificate::failed(crit.into(), indices, tolerance);
    };
    let scores = indices
        .iter()
        .map(|&i| (i, ctx.score(&space.moments()[i])))
        .collect();
    certificate_from_scores(crit.into(), scores, d.weights(), tolerance)
}

/// Certificate over every block of the space.
pub fn certify<T: Real>(
    space: &PreparedSpace<T>,
    d: &ApproxDesign<T>,
    crit: Criterion,
    lambda0: T,
    tolerance: T,
) -> Certificate<T> {
    certify_over(space, d, crit, lambda0, tolerance, &space.all_indices())
}

pub fn optimize<T: Real>(
    space: &PreparedSpace<T>,
    crit: Criterion,
    lambda0: T,
    opts: &OptimizeOptions<T>,
) -> Result<OptimizeResult<T>> {
    optimize_over(space, &space.all_indices(), crit, lambda0, opts)
}

/// Optimizes over the sub-simplex spanned by `indices`; the certificate is
/// relative to those blocks only.
pub fn optimize_over<T: Real>(
    space: &PreparedSpace<T>,
    indices: &[usize],
    crit: Criterion,
    lambda0: T,
    opts: &OptimizeOptions<T>,
) -> Result<OptimizeResult<T>> {
    if indices.is_empty() {
        return Err(Error::EmptyFamily);
    }
    let (weights, iterations) = if crit == Criterion::E || space.t() == 2 {
        (envelope_weights(space, indices)?, 0)
    } else {
        let reps = space.representatives(indices);
        let mut fw = FrankWolfe::new(space, &reps, crit, lambda0, opts)?;
        let w = fw.run(indices)?;
        (w, fw.iterations)
    };
    let design = ApproxDesign::new(weights)?;
    let certificate = certify_over(space, &design, crit, lambda0, opts.tolerance, indices);
    if !certificate.pass {
        return Err(non_convergence(space, &design, &certificate, iterations));
    }
    let dm = crate::design::design_moments(space, &design);
    Ok(OptimizeResult {
        value: criterion_from_moments(&dm, space.t(), lambda0, crit),
        x_d: dm.x_d,
        design,
        certificate,
        iterations,
    })
}

fn non_convergence<T: Real>(
    space: &PreparedSpace<T>,
    d: &ApproxDesign<T>,
    cert: &Certificate<T>,
    iterations: usize,
) -> Error {
    Error::NonConvergence {
        iterations,
        max_score: cert.max_score.as_f64(),
        best: d
            .support()
            .into_iter()
            .map(|(i, w)| (space.label(i), w.as_f64()))
            .collect(),
    }
}

/// Stationary support weights of the envelope game over `indices`, as a
/// full weight vector.
pub(crate) fn envelope_weights<T: Real>(space: &PreparedSpace<T>, indices: &[usize]) -> Result<Vec<T>> {
    let all = space.quadratics();
    let quads: Vec<_> = indices.iter().map(|&i| all[i]).collect();
    let sol = solve_with_weights(&quads)?;
    let mut w = vec![T::zero(); space.len()];
    for (k, v) in sol.weights.unwrap_or_default() {
        w[indices[k]] = v;
    }
    Ok(w)
}

/// Concave objective in moment space with its gradient and Hessian.
/// A and D are used in log form; T without its constant factor.
struct Objective<T> {
    crit: Criterion,
    k: T,
    lambda0: T,
}

type Vec3<T> = [T; 3];
type Mat3<T> = [[T; 3]; 3];

impl<T: Real> Objective<T> {
    fn parts(&self, m: &BlockMoments<T>) -> Option<(T, T)> {
        if !(m.c22 > T::from_f64(crate::design::DEGENERATE_C22)) {
            return None;
        }
        let u = m.c11 - m.c12 * m.c12 / m.c22;
        let v = m.quadratic().value(self.lambda0);
        Some((u, v))
    }

    fn value(&self, m: &BlockMoments<T>) -> T {
        let Some((u, v)) = self.parts(m) else {
            return T::neg_infinity();
        };
        match self.crit {
            Criterion::T | Criterion::E => u + self.k * v,
            Criterion::D => {
                if u > T::zero() && v > T::zero() {
                    u.ln() + self.k * v.ln()
                } else {
                    T::neg_infinity()
                }
            }
            Criterion::A => {
                if u > T::zero() && v > T::zero() {
                    -(T::one() / u + self.k / v).ln()
                } else {
                    T::neg_infinity()
                }
            }
        }
    }

    fn derivatives(&self, m: &BlockMoments<T>) -> Option<(Vec3<T>, Mat3<T>)> {
        let (u, v) = self.parts(m)?;
        let (b, c) = (m.c12, m.c22);
        let z = T::zero();
        let two = T::from_int(2);
        let lam = self.lambda0;
        let gu = [T::one(), -two * b / c, b * b / (c * c)];
        let hu = [
            [z, z, z],
            [z, -two / c, two * b / (c * c)],
            [z, two * b / (c * c), -two * b * b / (c * c * c)],
        ];
        let gv = [T::one(), two * lam, lam * lam];
        let mut g = [z; 3];
        let mut h = [[z; 3]; 3];
        match self.crit {
            Criterion::T | Criterion::E => {
                for i in 0..3 {
                    g[i] = gu[i] + self.k * gv[i];
                    h[i] = hu[i];
                }
            }
            Criterion::D => {
                if !(u > z && v > z) {
                    return None;
                }
                for i in 0..3 {
                    g[i] = gu[i] / u + self.k * gv[i] / v;
                    for j in 0..3 {
                        h[i][j] = hu[i][j] / u - gu[i] * gu[j] / (u * u)
                            - self.k * gv[i] * gv[j] / (v * v);
                    }
                }
            }
            Criterion::A => {
                if !(u > z && v > z) {
                    return None;
                }
                let hval = T::one() / u + self.k / v;
                let mut gh = [z; 3];
                for i in 0..3 {
                    gh[i] = -gu[i] / (u * u) - self.k * gv[i] / (v * v);
                }
                for i in 0..3 {
                    g[i] = -gh[i] / hval;
                    for j in 0..3 {
                        let hh = -hu[i][j] / (u * u)
                            + two * gu[i] * gu[j] / (u * u * u)
                            + two * self.k * gv[i] * gv[j] / (v * v * v);
                        h[i][j] = -hh / hval + gh[i] * gh[j] / (hval * hval);
                    }
                }
            }
        }
        Some((g, h))
    }
}

fn mix<T: Real>(moments: &[BlockMoments<T>], w: &[T]) -> BlockMoments<T> {
    crate::design::combine_moments(moments, w)
}

fn as_vec3<T: Real>(m: &BlockMoments<T>) -> Vec3<T> {
    [m.c11, m.c12, m.c22]
}

struct FrankWolfe<'a, T> {
    space: &'a PreparedSpace<T>,
    reps: Vec<usize>,
    moments: Vec<BlockMoments<T>>,
    crit: Criterion,
    lambda0: T,
    opts: &'a OptimizeOptions<T>,
    objective: Objective<T>,
    iterations: usize,
}

impl<'a, T: Real> FrankWolfe<'a, T> {
    fn new(
        space: &'a PreparedSpace<T>,
        reps: &[usize],
        crit: Criterion,
        lambda0: T,
        opts: &'a OptimizeOptions<T>,
    ) -> Result<Self> {
        let moments = reps.iter().map(|&i| space.moments()[i]).collect();
        Ok(FrankWolfe {
            space,
            reps: reps.to_vec(),
            moments,
            crit,
            lambda0,
            opts,
            objective: Objective {
                crit,
                k: T::from_int(space.t() as i64 - 2),
                lambda0,
            },
            iterations: 0,
        })
    }

    fn f(&self, w: &[T]) -> T {
        self.objective.value(&mix(&self.moments, w))
    }

    fn start(&self) -> Result<Vec<T>> {
        let n = self.reps.len();
        let top = self
            .reps
            .iter()
            .map(|&i| self.space.blocks()[i].distinct_count())
            .max()
            .unwrap_or(0);
        let pick: Vec<bool> = self
            .reps
            .iter()
            .map(|&i| self.space.blocks()[i].distinct_count() == top)
            .collect();
        let count = pick.iter().filter(|&&b| b).count();
        let w: Vec<T> = pick
            .iter()
            .map(|&b| if b { T::one() / T::from_int(count as i64) } else { T::zero() })
            .collect();
        if self.f(&w).is_finite() {
            return Ok(w);
        }
        let uniform = vec![T::one() / T::from_int(n as i64); n];
        if self.f(&uniform).is_finite() {
            return Ok(uniform);
        }
        Err(Error::Degenerate)
    }

    /// Scores of every representative against `w`.
    fn scores(&self, w: &[T]) -> Option<Vec<T>> {
        let dm = DesignMoments::from_moments(mix(&self.moments, w));
        let ctx = ScoreContext::new(&dm, self.space.t(), self.lambda0, self.crit).ok()?;
        Some(self.moments.iter().map(|m| ctx.score(m)).collect())
    }

    fn certified(&self, w: &[T], scores: &[T]) -> bool {
        let tol = self.opts.tolerance;
        let max = scores.iter().copied().fold(T::neg_infinity(), T::max);
        max <= T::one() + tol
            && w.iter()
                .zip(scores)
                .all(|(&wi, &s)| wi <= T::zero() || s >= T::one() - tol)
    }

    fn prune(&self, w: &mut [T]) {
        for wi in w.iter_mut() {
            if *wi < self.opts.prune_threshold {
                *wi = T::zero();
            }
        }
        let total: T = w.iter().copied().sum();
        for wi in w.iter_mut() {
            *wi = *wi / total;
        }
    }

    /// Exact concave line search from `w` toward vertex `s`.
    fn line_search(&self, w: &[T], s: usize) -> T {
        let base = mix(&self.moments, w);
        let target = self.moments[s];
        let at = |a: T| {
            let m = base.scaled(T::one() - a).add(&target.scaled(a));
            self.objective.value(&m)
        };
        let ratio = T::from_f64(0.5 * (5f64.sqrt() - 1.0));
        let (mut lo, mut hi) = (T::zero(), T::one());
        let mut x1 = hi - ratio * (hi - lo);
        let mut x2 = lo + ratio * (hi - lo);
        let (mut f1, mut f2) = (at(x1), at(x2));
        while hi - lo > T::from_f64(LINE_SEARCH_TOLERANCE) {
            if f1 < f2 {
                lo = x1;
                x1 = x2;
                f1 = f2;
                x2 = lo + ratio * (hi - lo);
                f2 = at(x2);
            } else {
                hi = x2;
                x2 = x1;
                f2 = f1;
                x1 = hi - ratio * (hi - lo);
                f1 = at(x1);
            }
        }
        let mid = (lo + hi) / T::from_int(2);
        // the endpoints are candidates too
        let mut best = (mid, at(mid));
        for a in [T::zero(), T::one()] {
            let v = at(a);
            if v > best.1 {
                best = (a, v);
            }
        }
        best.0
    }

    /// Newton iterations for the face maximum on the current support;
    /// weights that reach zero leave the face.
    fn newton_face(&self, w: &mut Vec<T>) {
        let n = w.len();
        let mut fw = self.f(w);
        for _ in 0..NEWTON_ITERATIONS {
            let support: Vec<usize> = (0..n).filter(|&i| w[i] > T::zero()).collect();
            let k = support.len();
            if k < 2 {
                return;
            }
            let m = mix(&self.moments, w);
            let Some((gm, hm)) = self.objective.derivatives(&m) else {
                return;
            };
            let cols: Vec<Vec3<T>> = support.iter().map(|&i| as_vec3(&self.moments[i])).collect();
            let g: Vec<T> = cols
                .iter()
                .map(|c| (0..3).map(|a| c[a] * gm[a]).sum())
                .collect();
            let mut kkt = Mat::zeros(k + 1, k + 1);
            let mut hmax = T::zero();
            for i in 0..k {
                for j in 0..k {
                    let mut v = T::zero();
                    for a in 0..3 {
                        for b in 0..3 {
                            v = v + cols[i][a] * hm[a][b] * cols[j][b];
                        }
                    }
                    kkt[(i, j)] = v;
                    hmax = hmax.max(v.abs());
                }
            }
            let reg = T::from_f64(1e-11) * (T::one() + hmax);
            for i in 0..k {
                kkt[(i, i)] = kkt[(i, i)] - reg;
                kkt[(i, k)] = T::one();
                kkt[(k, i)] = T::one();
            }
            let Ok(inv) = kkt.inverse() else {
                return;
            };
            let mut rhs: Vec<T> = g.iter().map(|&x| -x).collect();
            rhs.push(T::zero());
            let sol = inv.mul_vec(&rhs);
            let d = &sol[..k];
            // largest feasible step
            let mut alpha_max = T::one();
            let mut blocking = None;
            for (j, &i) in support.iter().enumerate() {
                if d[j] < T::zero() {
                    let a = w[i] / -d[j];
                    if a < alpha_max {
                        alpha_max = a;
                        blocking = Some(i);
                    }
                }
            }
            let mut alpha = alpha_max;
            let mut accepted = None;
            for _ in 0..60 {
                let mut trial = w.clone();
                for (j, &i) in support.iter().enumerate() {
                    trial[i] = (trial[i] + alpha * d[j]).max(T::zero());
                }
                if alpha == alpha_max {
                    if let Some(b) = blocking {
                        trial[b] = T::zero();
                    }
                }
                let total: T = trial.iter().copied().sum();
                for x in trial.iter_mut() {
                    *x = *x / total;
                }
                let ft = self.f(&trial);
                if ft >= fw - T::from_f64(1e-15) * (T::one() + fw.abs()) {
                    accepted = Some((trial, ft));
                    break;
                }
                alpha = alpha / T::from_int(2);
            }
            let Some((trial, ft)) = accepted else {
                return;
            };
            let step = support
                .iter()
                .map(|&i| (trial[i] - w[i]).abs())
                .fold(T::zero(), T::max);
            *w = trial;
            self.prune(w);
            fw = ft.max(fw);
            if step < T::from_f64(1e-15) {
                return;
            }
        }
    }

    fn polish(&self, w: &[T]) -> Option<Vec<T>> {
        let mut polished = w.to_vec();
        self.newton_face(&mut polished);
        let scores = self.scores(&polished)?;
        (self.f(&polished) >= self.f(w) - T::from_f64(1e-13) * (T::one() + self.f(w).abs())
            && self.certified(&polished, &scores))
        .then_some(polished)
    }

    fn expand(&self, w: &[T]) -> Vec<T> {
        let mut full = vec![T::zero(); self.space.len()];
        for (&i, &v) in self.reps.iter().zip(w) {
            full[i] = v;
        }
        full
    }

    fn run(&mut self, indices: &[usize]) -> Result<Vec<T>> {
        let mut w = self.start()?;
        loop {
            if self.iterations % PRUNE_EVERY == 0 {
                self.prune(&mut w);
                if let Some(p) = self.polish(&w) {
                    return Ok(self.expand(&p));
                }
            }
            let Some(scores) = self.scores(&w) else {
                return Err(Error::Degenerate);
            };
            if self.certified(&w, &scores) {
                return Ok(self.expand(&self.polish(&w).unwrap_or(w)));
            }
            if self.iterations >= self.opts.max_iterations {
                let full = self.expand(&w);
                let d = ApproxDesign::new(full)?;
                let cert = certify_over(self.space, &d, self.crit, self.lambda0, self.opts.tolerance, indices);
                return Err(non_convergence(self.space, &d, &cert, self.iterations));
            }
            let mut best = 0;
            for (i, &s) in scores.iter().enumerate() {
                if s > scores[best] || (s == scores[best] && self.reps[i] < self.reps[best]) {
                    best = i;
                }
            }
            let a = self.line_search(&w, best);
            for (i, wi) in w.iter_mut().enumerate() {
                *wi = (T::one() - a) * *wi + if i == best { a } else { T::zero() };
            }
            self.iterations += 1;
        }
    }
}
