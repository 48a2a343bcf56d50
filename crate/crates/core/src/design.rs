//! Approximate and exact designs, their moments, spectra and criterion
//! values. All values are per subject.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::model::PreparedSpace;
use crate::moments::BlockMoments;
use crate::quadratic::Quadratic;
use crate::scalar::{Field, Real};
use crate::sequence::Sequence;

/// Below this the carryover trace `c22` is treated as zero.
pub const DEGENERATE_C22: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Criterion {
    A,
    D,
    E,
    T,
}

impl Criterion {
    pub const ALL: [Criterion; 4] = [Criterion::A, Criterion::D, Criterion::E, Criterion::T];
}

impl fmt::Display for Criterion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Criterion::A => "A",
            Criterion::D => "D",
            Criterion::E => "E",
            Criterion::T => "T",
        };
        f.write_str(s)
    }
}

impl FromStr for Criterion {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_uppercase().as_str() {
            "A" => Ok(Criterion::A),
            "D" => Ok(Criterion::D),
            "E" => Ok(Criterion::E),
            "T" => Ok(Criterion::T),
            other => Err(Error::Parse(format!("unknown criterion {other:?}"))),
        }
    }
}

/// Block weights aligned with [`PreparedSpace::blocks`].
#[derive(Debug, Clone, PartialEq)]
pub struct ApproxDesign<T> {
    weights: Vec<T>,
}

impl<T: Real> ApproxDesign<T> {
    /// Validates and renormalizes a full weight vector.
    pub fn new(weights: Vec<T>) -> Result<Self> {
        let neg_tol = T::from_f64(-1e-12);
        if let Some(w) = weights.iter().find(|&&w| !w.is_finite() || w < neg_tol) {
            return Err(Error::InvalidWeights(format!("weight {w} is negative or not finite")));
        }
        let total: T = weights.iter().copied().sum();
        if !(total > T::zero()) {
            return Err(Error::InvalidWeights("weights sum to zero".into()));
        }
        if (total - T::one()).abs() > T::from_f64(1e-12) {
            log::warn!("design weights sum to {total}; renormalizing");
        }
        Ok(ApproxDesign {
            weights: weights.into_iter().map(|w| w.max(T::zero()) / total).collect(),
        })
    }

    /// Weights given per sequence; non-canonical members count toward their
    /// block.
    pub fn from_sequences<'a, I>(space: &PreparedSpace<T>, entries: I) -> Result<Self>
    where
        I: IntoIterator<Item = (&'a Sequence, T)>,
    {
        let mut w = vec![T::zero(); space.len()];
        for (seq, weight) in entries {
            let i = space.index_of(seq)?;
            w[i] = w[i] + weight;
        }
        Self::new(w)
    }

    /// Weights keyed by sequence text such as `"123"`.
    pub fn from_labels<'a, I>(space: &PreparedSpace<T>, entries: I) -> Result<Self>
    where
        I: IntoIterator<Item = (&'a str, T)>,
    {
        let mut w = vec![T::zero(); space.len()];
        for (text, weight) in entries {
            let i = space.parse_block(text)?;
            w[i] = w[i] + weight;
        }
        Self::new(w)
    }

    pub fn vertex(len: usize, index: usize) -> Self {
        let mut weights = vec![T::zero(); len];
        weights[index] = T::one();
        ApproxDesign { weights }
    }

    pub fn weights(&self) -> &[T] {
        &self.weights
    }

    pub fn weight(&self, index: usize) -> T {
        self.weights[index]
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    /// Blocks with positive weight.
    pub fn support(&self) -> Vec<(usize, T)> {
        self.weights
            .iter()
            .enumerate()
            .filter(|(_, &w)| w > T::zero())
            .map(|(i, &w)| (i, w))
            .collect()
    }

    /// Largest absolute weight difference.
    pub fn max_difference(&self, other: &Self) -> T {
        self.weights
            .iter()
            .zip(&other.weights)
            .map(|(&a, &b)| (a - b).abs())
            .fold(T::zero(), T::max)
    }
}

/// Subjects as columns, each a full sequence.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExactDesign {
    p: usize,
    t: usize,
    columns: Vec<Sequence>,
}

impl ExactDesign {
    pub fn new(p: usize, t: usize, columns: Vec<Sequence>) -> Result<Self> {
        if columns.is_empty() {
            return Err(Error::InvalidSpace("exact design has no subjects".into()));
        }
        for col in &columns {
            col.check_in(p, t)?;
        }
        Ok(ExactDesign { p, t, columns })
    }

    /// From a `p x n` layout of labels: row `k` holds period `k` for every
    /// subject.
    pub fn from_layout(t: usize, layout: &[Vec<usize>]) -> Result<Self> {
        let p = layout.len();
        let n = layout.first().map_or(0, Vec::len);
        if let Some(row) = layout.iter().find(|r| r.len() != n) {
            return Err(Error::LengthMismatch {
                expected: n,
                found: row.len(),
            });
        }
        let columns = (0..n)
            .map(|u| Sequence::new(layout.iter().map(|r| r[u]).collect(), t))
            .collect::<Result<Vec<_>>>()?;
        Self::new(p, t, columns)
    }

    pub fn layout(&self) -> Vec<Vec<usize>> {
        (0..self.p)
            .map(|k| self.columns.iter().map(|c| c.labels()[k]).collect())
            .collect()
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn t(&self) -> usize {
        self.t
    }

    pub fn n(&self) -> usize {
        self.columns.len()
    }

    pub fn columns(&self) -> &[Sequence] {
        &self.columns
    }

    pub fn replace_column(&mut self, index: usize, seq: Sequence) -> Result<()> {
        seq.check_in(self.p, self.t)?;
        self.columns[index] = seq;
        Ok(())
    }

    /// Every column weighted `1`.
    pub fn weighted<T: Field>(&self) -> Vec<(Sequence, T)> {
        self.columns.iter().map(|c| (c.clone(), T::one())).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Prior<T> {
    Exchangeable,
    PointMass(Vec<T>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelContext<T> {
    pub lambda0: T,
    pub prior: Prior<T>,
}

impl<T: Real> ModelContext<T> {
    pub fn exchangeable(lambda0: T) -> Self {
        ModelContext {
            lambda0,
            prior: Prior::Exchangeable,
        }
    }

    /// A point prior at `tau0`, centered if needed.
    pub fn point(lambda0: T, tau0: &[T]) -> Result<Self> {
        Ok(ModelContext {
            lambda0,
            prior: Prior::PointMass(center_tau0(tau0)?),
        })
    }
}

/// Subtracts the mean (with a warning if it was not already zero) and
/// rejects the zero vector.
pub fn center_tau0<T: Real>(tau0: &[T]) -> Result<Vec<T>> {
    let t = tau0.len();
    if t == 0 {
        return Err(Error::InvalidTau0(0));
    }
    let mean = tau0.iter().copied().sum::<T>() / T::from_int(t as i64);
    let scale = tau0.iter().fold(T::zero(), |a, &x| a.max(x.abs()));
    if mean.abs() > T::from_f64(1e-12) * (T::one() + scale) {
        log::warn!("tau0 is not centered (mean {mean}); subtracting the mean");
    }
    let out: Vec<T> = tau0.iter().map(|&x| x - mean).collect();
    if out.iter().all(|&x| x.abs() <= T::from_f64(1e-12) * (T::one() + scale)) {
        return Err(Error::InvalidTau0(t));
    }
    Ok(out)
}

/// Per-subject design traces and the minimizer `x_d` of `q_d`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DesignMoments<T> {
    pub c11: T,
    pub c12: T,
    pub c22: T,
    /// `-c12 / c22`, or `0` for a degenerate design.
    pub x_d: T,
    pub degenerate: bool,
}

impl<T: Real> DesignMoments<T> {
    pub fn from_moments(m: BlockMoments<T>) -> Self {
        let degenerate = !(m.c22 > T::from_f64(DEGENERATE_C22));
        let x_d = if degenerate { T::zero() } else { -m.c12 / m.c22 };
        DesignMoments {
            c11: m.c11,
            c12: m.c12,
            c22: m.c22,
            x_d,
            degenerate,
        }
    }

    pub fn moments(&self) -> BlockMoments<T> {
        BlockMoments::new(self.c11, self.c12, self.c22)
    }

    pub fn q_d(&self) -> Quadratic<T> {
        Quadratic::new(self.c11, self.c12, self.c22)
    }

    /// `q_d(x_d)`, the minimum of `q_d`; `c11` for a degenerate design.
    pub fn qx(&self) -> T {
        if self.degenerate {
            self.c11
        } else {
            self.c11 - self.c12 * self.c12 / self.c22
        }
    }

    pub fn ql(&self, lambda0: T) -> T {
        self.q_d().value(lambda0)
    }
}

/// Mixture of block moments, `sum_s w_s c_s`.
pub fn combine_moments<T: Real>(moments: &[BlockMoments<T>], weights: &[T]) -> BlockMoments<T> {
    moments
        .iter()
        .zip(weights)
        .filter(|(_, &w)| w != T::zero())
        .fold(BlockMoments::zero(), |acc, (m, &w)| acc.add(&m.scaled(w)))
}

pub fn design_moments<T: Real>(space: &PreparedSpace<T>, d: &ApproxDesign<T>) -> DesignMoments<T> {
    DesignMoments::from_moments(combine_moments(space.moments(), d.weights()))
}

/// `{0, q_d(x_d)/(t-1), q_d(lambda0)/(t-1) x (t-2)}`, ascending.
pub fn spectrum_from_moments<T: Real>(dm: &DesignMoments<T>, t: usize, lambda0: T) -> Vec<T> {
    let tm1 = T::from_int(t as i64 - 1);
    let mut out = vec![T::zero(), dm.qx() / tm1];
    out.extend(std::iter::repeat_n(dm.ql(lambda0) / tm1, t - 2));
    out.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
    out
}

pub fn spectrum<T: Real>(space: &PreparedSpace<T>, d: &ApproxDesign<T>, lambda0: T) -> Vec<T> {
    spectrum_from_moments(&design_moments(space, d), space.t(), lambda0)
}

/// Criterion value of the positive part of a spectrum (the structural zero
/// already removed): E the minimum, A the harmonic mean, D the geometric
/// mean, T the arithmetic mean.
pub fn phi_of_eigenvalues<T: Real>(positive: &[T], crit: Criterion) -> T {
    let k = T::from_int(positive.len() as i64);
    let min = positive.iter().copied().fold(T::infinity(), T::min);
    match crit {
        Criterion::E => min.max(T::zero()),
        Criterion::T => positive.iter().copied().sum::<T>() / k,
        Criterion::A => {
            if !(min > T::zero()) {
                return T::zero();
            }
            k / positive.iter().map(|&v| T::one() / v).sum::<T>()
        }
        Criterion::D => {
            if !(min > T::zero()) {
                return T::zero();
            }
            (positive.iter().map(|v| v.ln()).sum::<T>() / k).exp()
        }
    }
}

pub fn criterion_from_moments<T: Real>(
    dm: &DesignMoments<T>,
    t: usize,
    lambda0: T,
    crit: Criterion,
) -> T {
    let tm1 = T::from_int(t as i64 - 1);
    let k = T::from_int(t as i64 - 2);
    let qx = dm.qx();
    let ql = dm.ql(lambda0);
    if dm.degenerate && crit != Criterion::T {
        let spec = spectrum_from_moments(dm, t, lambda0);
        return phi_of_eigenvalues(&spec[1..], crit);
    }
    match crit {
        Criterion::E => (qx / tm1).max(T::zero()),
        Criterion::T => (qx + k * ql) / (tm1 * tm1),
        Criterion::A => {
            if !(qx > T::zero()) || (t > 2 && !(ql > T::zero())) {
                return T::zero();
            }
            let h = if t > 2 { T::one() / qx + k / ql } else { T::one() / qx };
            T::one() / h
        }
        Criterion::D => {
            if !(qx > T::zero()) || (t > 2 && !(ql > T::zero())) {
                return T::zero();
            }
            let log = if t > 2 { qx.ln() + k * ql.ln() } else { qx.ln() };
            (log / tm1).exp() / tm1
        }
    }
}

pub fn criterion_value<T: Real>(
    space: &PreparedSpace<T>,
    d: &ApproxDesign<T>,
    lambda0: T,
    crit: Criterion,
) -> T {
    criterion_from_moments(&design_moments(space, d), space.t(), lambda0, crit)
}

/// `value / reference`.
pub fn efficiency<T: Real>(value: T, reference: T) -> T {
    value / reference
}

/// Block proportions of an exact design: each column adds `1/n` to its
/// block.
pub fn symmetrize<T: Real>(space: &PreparedSpace<T>, d: &ExactDesign) -> Result<ApproxDesign<T>> {
    if d.p() != space.p() || d.t() != space.t() {
        return Err(Error::Dimension(format!(
            "design is ({}, {}), space is ({}, {})",
            d.p(),
            d.t(),
            space.p(),
            space.t()
        )));
    }
    let share = T::one() / T::from_int(d.n() as i64);
    ApproxDesign::from_sequences(space, d.columns().iter().map(|c| (c, share)))
}

/// `1/(p-1) - (pt-t-1) / ((p-1)(t-2)(pt-t-1-t/p)^2)`, exact in rational
/// arithmetic.
pub fn compute_lambda_star<T: Field>(p: usize, t: usize) -> Result<T> {
    if t < 3 {
        return Err(Error::LambdaStarUndefined(t));
    }
    if p < 2 {
        return Err(Error::InvalidSpace(format!("p = {p}, need at least 2 periods")));
    }
    let (pf, tf) = (T::from_int(p as i64), T::from_int(t as i64));
    let one = T::one();
    let a = pf * tf - tf - one;
    let inner = a - tf / pf;
    Ok(one / (pf - one) - a / ((pf - one) * (tf - T::from_int(2)) * inner * inner))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::covariance::CovarianceSpec;
    use crate::sequence::DesignSpace;
    use num_rational::Ratio;

    fn space(p: usize, t: usize) -> PreparedSpace<f64> {
        PreparedSpace::new(DesignSpace::new(p, t, CovarianceSpec::Identity).unwrap()).unwrap()
    }

    fn d1(sp: &PreparedSpace<f64>) -> ApproxDesign<f64> {
        ApproxDesign::from_labels(sp, [("122", 1.0 / 6.0), ("123", 5.0 / 6.0)]).unwrap()
    }

    fn d2(sp: &PreparedSpace<f64>) -> ApproxDesign<f64> {
        ApproxDesign::from_labels(sp, [("123", 1.0)]).unwrap()
    }

    #[test]
    fn design_moment_examples() {
        let sp = space(3, 3);
        let m = design_moments(&sp, &d2(&sp));
        assert!((m.x_d - 0.6).abs() < 1e-14);
        assert!((m.qx() - 1.6).abs() < 1e-14);
        let m = design_moments(&sp, &d1(&sp));
        assert!((m.c11 - 17.0 / 9.0).abs() < 1e-14);
        assert!((m.c12 + 5.0 / 9.0).abs() < 1e-14);
        assert!((m.x_d - 0.5).abs() < 1e-14);
        assert!((m.qx() - 29.0 / 18.0).abs() < 1e-14);
        let m = design_moments(&sp, &ApproxDesign::from_labels(&sp, [("111", 1.0)]).unwrap());
        // the constant sequence still carries carryover trace 4/9
        assert!(!m.degenerate);
        assert!((m.c22 - 4.0 / 9.0).abs() < 1e-14);
        assert!(m.qx().abs() < 1e-14);
        let d = ApproxDesign::from_labels(&sp, [("111", 1.0)]).unwrap();
        assert!(criterion_value(&sp, &d, 0.0, Criterion::E).abs() < 1e-14);
        let flat = DesignMoments::from_moments(BlockMoments::new(0.5, 0.0, 0.0));
        assert!(flat.degenerate);
        assert_eq!(flat.qx(), 0.5);
    }

    #[test]
    fn spectrum_examples() {
        let sp = space(3, 3);
        let s = spectrum(&sp, &d2(&sp), 0.0);
        let expect = [0.0, 0.8, 1.0];
        for (a, b) in s.iter().zip(expect) {
            assert!((a - b).abs() < 1e-14);
        }
        for lam in [-1.0, 0.3, 0.9] {
            let s = spectrum_from_moments(&design_moments(&sp, &d1(&sp)), 3, lam);
            assert!(s.iter().any(|&v| (v - 29.0 / 36.0).abs() < 1e-14));
        }
        let sp2 = space(4, 2);
        let d = ApproxDesign::from_labels(&sp2, [("1122", 1.0)]).unwrap();
        assert_eq!(spectrum(&sp2, &d, 0.0).len(), 2);
    }

    #[test]
    fn criterion_values_and_table_one_ratios() {
        let sp = space(3, 3);
        let a2 = criterion_value(&sp, &d2(&sp), 0.0, Criterion::A);
        assert!((a2 - 8.0 / 9.0).abs() < 1e-12);
        let eff = |c| criterion_value(&sp, &d1(&sp), 0.0, c) / criterion_value(&sp, &d2(&sp), 0.0, c);
        assert!((eff(Criterion::A) - 0.9782).abs() < 1e-3);
        assert!((eff(Criterion::D) - 0.9752).abs() < 1e-3);
        assert!((eff(Criterion::T) - 0.9722).abs() < 1e-3);
        assert!((1.0 / eff(Criterion::E) - 0.9931).abs() < 1e-3);
    }

    #[test]
    fn two_treatments_rank_identically() {
        let sp = space(4, 2);
        let d = ApproxDesign::from_labels(&sp, [("1122", 0.3), ("1212", 0.7)]).unwrap();
        let e = criterion_value(&sp, &d, 0.2, Criterion::E);
        for c in Criterion::ALL {
            assert!((criterion_value(&sp, &d, 0.2, c) - e).abs() < 1e-14);
        }
    }

    #[test]
    fn symmetrize_examples() {
        let sp = space(3, 3);
        let cols: Vec<Sequence> = ["123", "122"].iter().map(|s| Sequence::parse(s, 3).unwrap()).collect();
        let d = symmetrize(&sp, &ExactDesign::new(3, 3, cols).unwrap()).unwrap();
        assert_eq!(d.support().len(), 2);
        assert!((d.weight(sp.parse_block("122").unwrap()) - 0.5).abs() < 1e-15);
        let layout = vec![vec![1, 2], vec![2, 1]];
        let ex = ExactDesign::from_layout(2, &layout).unwrap();
        assert_eq!(ex.layout(), layout);
    }

    #[test]
    fn lambda_star_values() {
        let exact: Ratio<i64> = compute_lambda_star(3, 3).unwrap();
        assert_eq!(exact, Ratio::new(11, 32));
        let v: f64 = compute_lambda_star(3, 4).unwrap();
        assert!((v - 0.4455).abs() < 1e-4);
        let v: f64 = compute_lambda_star(3, 5).unwrap();
        assert!(v > 0.0 && v < 0.5);
        assert_eq!(compute_lambda_star::<f64>(3, 2), Err(Error::LambdaStarUndefined(2)));
    }

    #[test]
    fn tau0_is_centered() {
        let c = center_tau0(&[1.0, 2.0, 3.0]).unwrap();
        assert_eq!(c, vec![-1.0, 0.0, 1.0]);
        assert_eq!(center_tau0(&[2.0, 2.0]), Err(Error::InvalidTau0(2)));
    }
}
