//! Per-sequence trace moments.
//!
//! For a sequence `s` with treatment incidence `T` and carryover incidence
//! `F` (both `p x t`), the blocks `B_t G_i' B~ G_j B_t` with `G1 = T`,
//! `G2 = F` have traces `c11, c12, c22`. These three numbers are all the
//! criteria ever need from a block, and they are invariant under treatment
//! relabeling.

use crate::covariance::ProjectedCovariance;
use crate::linalg::Mat;
use crate::quadratic::Quadratic;
use crate::scalar::Field;
use crate::sequence::Sequence;

/// Treatment and carryover incidence of a single sequence.
#[derive(Debug, Clone, PartialEq)]
pub struct IncidencePair<T> {
    pub treatment: Mat<T>,
    pub carryover: Mat<T>,
}

pub fn incidence<T: Field>(seq: &Sequence, t: usize) -> IncidencePair<T> {
    let p = seq.len();
    let labels = seq.labels();
    let treatment = Mat::from_fn(p, t, |k, j| {
        if labels[k] == j + 1 {
            T::one()
        } else {
            T::zero()
        }
    });
    let carryover = Mat::from_fn(p, t, |k, j| {
        if k > 0 && labels[k - 1] == j + 1 {
            T::one()
        } else {
            T::zero()
        }
    });
    IncidencePair {
        treatment,
        carryover,
    }
}

/// Trace moments of one block (or a weighted mixture of blocks).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlockMoments<T> {
    pub c11: T,
    pub c12: T,
    pub c22: T,
}

impl<T: Field> BlockMoments<T> {
    pub fn new(c11: T, c12: T, c22: T) -> Self {
        BlockMoments { c11, c12, c22 }
    }

    pub fn zero() -> Self {
        Self::new(T::zero(), T::zero(), T::zero())
    }

    /// `q(x) = c11 + 2 c12 x + c22 x^2`.
    pub fn quadratic(&self) -> Quadratic<T> {
        Quadratic::new(self.c11, self.c12, self.c22)
    }

    /// Moments `(h11, h12, h22)` of the carryover-estimation problem at
    /// `lambda0`, via `h11 = c22`, `h12 = c12 + lambda0 c22`,
    /// `h22 = q(lambda0)`.
    pub fn lambda(&self, lambda0: T) -> BlockMoments<T> {
        BlockMoments::new(
            self.c22,
            self.c12 + lambda0 * self.c22,
            self.quadratic().value(lambda0),
        )
    }

    pub fn scaled(&self, w: T) -> Self {
        Self::new(self.c11 * w, self.c12 * w, self.c22 * w)
    }

    pub fn add(&self, other: &Self) -> Self {
        Self::new(self.c11 + other.c11, self.c12 + other.c12, self.c22 + other.c22)
    }

    /// Componentwise equality within `tol * (1 + max |c|)`.
    pub fn approx_eq(&self, other: &Self, tol: T) -> bool {
        let scale = T::one()
            + [self.c11, self.c12, self.c22]
                .into_iter()
                .map(Field::abs_val)
                .fold(T::zero(), |a, b| if b > a { b } else { a });
        (self.c11 - other.c11).abs_val() <= tol * scale
            && (self.c12 - other.c12).abs_val() <= tol * scale
            && (self.c22 - other.c22).abs_val() <= tol * scale
    }
}

/// `tr(B_t G_i' B~ G_j B_t)` for `G1 = first`, `G2 = second`.
fn trace_moments<T: Field>(first: &Mat<T>, second: &Mat<T>, btilde: &Mat<T>) -> BlockMoments<T> {
    let t = first.cols();
    let bt = Mat::centering(t);
    let g1 = first.matmul(&bt);
    let g2 = second.matmul(&bt);
    BlockMoments::new(
        g1.sandwich(btilde, &g1).trace(),
        g1.sandwich(btilde, &g2).trace(),
        g2.sandwich(btilde, &g2).trace(),
    )
}

/// Moments of the block containing `seq`. Any orbit member gives the same
/// value; callers pass the canonical one.
pub fn block_moments<T: Field>(
    seq: &Sequence,
    t: usize,
    btilde: &ProjectedCovariance<T>,
) -> BlockMoments<T> {
    let inc = incidence(seq, t);
    trace_moments(&inc.treatment, &inc.carryover, btilde.matrix())
}

/// Carryover-problem moments computed directly from `G1 = F`,
/// `G2 = T + lambda0 F`. Reference path for [`BlockMoments::lambda`].
pub fn lambda_moments_direct<T: Field>(
    seq: &Sequence,
    t: usize,
    btilde: &ProjectedCovariance<T>,
    lambda0: T,
) -> BlockMoments<T> {
    let inc = incidence(seq, t);
    let g2 = &inc.treatment + &inc.carryover.scale(lambda0);
    trace_moments(&inc.carryover, &g2, btilde.matrix())
}
