//! Full information matrices for weighted collections of sequences.
//!
//! An exact design is the special case of unit weights, one per subject.
//! Subject effects are removed by centering across subjects:
//! `C_ij = sum_u w_u G_iu' B~ G_ju - (sum_u w_u G_iu)' B~ (sum_u w_u G_ju) / sum_u w_u`.

use crate::design::{center_tau0, phi_of_eigenvalues, Criterion, ExactDesign};
use crate::error::{Error, Result};
use crate::linalg::Mat;
use crate::model::PreparedSpace;
use crate::moments::{incidence, IncidencePair};
use crate::scalar::Real;
use crate::sequence::{permutations, Sequence};

/// Exact permutation averaging is enumerated up to this many treatments.
pub const MAX_AVERAGING_T: usize = 8;

/// Cutoff for the spectral g-inverse, relative to the largest eigenvalue.
pub const PINV_CUTOFF: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct InfoBlocks<T> {
    pub c11: Mat<T>,
    pub c12: Mat<T>,
    pub c22: Mat<T>,
}

impl<T: Real> InfoBlocks<T> {
    pub fn c21(&self) -> Mat<T> {
        self.c12.transpose()
    }
}

fn assemble<T, F>(columns: &[(Sequence, T)], t: usize, btilde: &Mat<T>, split: F) -> InfoBlocks<T>
where
    T: Real,
    F: Fn(IncidencePair<T>) -> (Mat<T>, Mat<T>),
{
    let p = btilde.rows();
    let mut s11 = Mat::zeros(t, t);
    let mut s12 = Mat::zeros(t, t);
    let mut s22 = Mat::zeros(t, t);
    let mut g1 = Mat::zeros(p, t);
    let mut g2 = Mat::zeros(p, t);
    let mut total = T::zero();
    for (seq, w) in columns {
        let (a, b) = split(incidence(seq, t));
        s11 = &s11 + &a.sandwich(btilde, &a).scale(*w);
        s12 = &s12 + &a.sandwich(btilde, &b).scale(*w);
        s22 = &s22 + &b.sandwich(btilde, &b).scale(*w);
        g1 = &g1 + &a.scale(*w);
        g2 = &g2 + &b.scale(*w);
        total = total + *w;
    }
    let inv = T::one() / total;
    InfoBlocks {
        c11: &s11 - &g1.sandwich(btilde, &g1).scale(inv),
        c12: &s12 - &g1.sandwich(btilde, &g2).scale(inv),
        c22: &s22 - &g2.sandwich(btilde, &g2).scale(inv),
    }
}

/// `C_dij` with `G1 = T`, `G2 = F`.
pub fn tau_blocks<T: Real>(columns: &[(Sequence, T)], t: usize, btilde: &Mat<T>) -> InfoBlocks<T> {
    assemble(columns, t, btilde, |inc| (inc.treatment, inc.carryover))
}

/// `A_dij` with `G1 = F`, `G2 = T + lambda0 F`.
pub fn lambda_blocks<T: Real>(
    columns: &[(Sequence, T)],
    t: usize,
    btilde: &Mat<T>,
    lambda0: T,
) -> InfoBlocks<T> {
    assemble(columns, t, btilde, |inc| {
        let g2 = &inc.treatment + &inc.carryover.scale(lambda0);
        (inc.carryover, g2)
    })
}

fn total_weight<T: Real>(columns: &[(Sequence, T)]) -> T {
    columns.iter().map(|c| c.1).sum()
}

/// Fisher information for `tau` at `(tau0, lambda0)`:
/// `C11 + l(C12+C21) + l^2 C22 - (C12+l C22) tau0 tau0' (C21+l C22) / (tau0' C22 tau0)`.
pub fn fisher_tau_weighted<T: Real>(
    columns: &[(Sequence, T)],
    t: usize,
    btilde: &Mat<T>,
    tau0: &[T],
    lambda0: T,
) -> Result<Mat<T>> {
    if tau0.len() != t {
        return Err(Error::InvalidTau0(t));
    }
    let tau0 = center_tau0(tau0)?;
    let b = tau_blocks(columns, t, btilde);
    let c21 = b.c21();
    let den = b.c22.quad_form(&tau0, &tau0);
    let norm2: T = tau0.iter().map(|&x| x * x).sum();
    let scale = b.c22.trace().abs() + T::one();
    if !(den > T::from_f64(1e-12) * scale * norm2) {
        return Err(Error::SingularDirection(den.as_f64()));
    }
    let lead = &(&b.c11 + &(&b.c12 + &c21).scale(lambda0)) + &b.c22.scale(lambda0 * lambda0);
    let mixed = &b.c12 + &b.c22.scale(lambda0);
    let a = mixed.mul_vec(&tau0);
    let correction = Mat::from_fn(t, t, |i, j| a[i] * a[j] / den);
    Ok(&lead - &correction)
}

pub fn fisher_tau<T: Real>(
    space: &PreparedSpace<T>,
    d: &ExactDesign,
    tau0: &[T],
    lambda0: T,
) -> Result<Mat<T>> {
    fisher_tau_weighted(&d.weighted(), space.t(), space.btilde().matrix(), tau0, lambda0)
}

/// `A_d = A11 - A12 A22^+ A21`.
pub fn lambda_information_weighted<T: Real>(
    columns: &[(Sequence, T)],
    t: usize,
    btilde: &Mat<T>,
    lambda0: T,
) -> Mat<T> {
    let b = lambda_blocks(columns, t, btilde, lambda0);
    let pinv = b.c22.pseudo_inverse(T::from_f64(PINV_CUTOFF));
    &b.c11 - &b.c12.matmul(&pinv).matmul(&b.c21())
}

/// `tau0' A_d tau0`, the information about `lambda`.
pub fn fisher_lambda_weighted<T: Real>(
    columns: &[(Sequence, T)],
    t: usize,
    btilde: &Mat<T>,
    tau0: &[T],
    lambda0: T,
) -> Result<T> {
    if tau0.len() != t {
        return Err(Error::InvalidTau0(t));
    }
    let tau0 = center_tau0(tau0)?;
    let a = lambda_information_weighted(columns, t, btilde, lambda0);
    Ok(a.quad_form(&tau0, &tau0).max(T::zero()))
}

pub fn fisher_lambda<T: Real>(
    space: &PreparedSpace<T>,
    d: &ExactDesign,
    tau0: &[T],
    lambda0: T,
) -> Result<T> {
    fisher_lambda_weighted(&d.weighted(), space.t(), space.btilde().matrix(), tau0, lambda0)
}

/// Criterion of a single information matrix, per unit weight.
fn phi_matrix<T: Real>(m: &Mat<T>, total: T, crit: Criterion) -> T {
    let eig = m.symmetric_eigen();
    phi_of_eigenvalues(&eig.values[1..], crit) / total
}

/// Criterion under the point prior at `tau0`, per subject.
pub fn phi_point_weighted<T: Real>(
    columns: &[(Sequence, T)],
    t: usize,
    btilde: &Mat<T>,
    tau0: &[T],
    lambda0: T,
    crit: Criterion,
) -> Result<T> {
    let m = fisher_tau_weighted(columns, t, btilde, tau0, lambda0)?;
    Ok(phi_matrix(&m, total_weight(columns), crit))
}

pub fn phi_point<T: Real>(
    space: &PreparedSpace<T>,
    d: &ExactDesign,
    tau0: &[T],
    lambda0: T,
    crit: Criterion,
) -> Result<T> {
    phi_point_weighted(&d.weighted(), space.t(), space.btilde().matrix(), tau0, lambda0, crit)
}

/// Average of the point-prior criterion over all `t!` relabelings of
/// `tau0`, per subject.
pub fn phi_exchangeable_weighted<T: Real>(
    columns: &[(Sequence, T)],
    t: usize,
    btilde: &Mat<T>,
    tau0: &[T],
    lambda0: T,
    crit: Criterion,
) -> Result<T> {
    if t > MAX_AVERAGING_T {
        return Err(Error::TooManyTreatments {
            t,
            max: MAX_AVERAGING_T,
        });
    }
    if tau0.len() != t {
        return Err(Error::InvalidTau0(t));
    }
    let tau0 = center_tau0(tau0)?;
    let b = tau_blocks(columns, t, btilde);
    let c21 = b.c21();
    let lead = &(&b.c11 + &(&b.c12 + &c21).scale(lambda0)) + &b.c22.scale(lambda0 * lambda0);
    let mixed = &b.c12 + &b.c22.scale(lambda0);
    let total = total_weight(columns);
    let scale = b.c22.trace().abs() + T::one();
    let norm2: T = tau0.iter().map(|&x| x * x).sum();
    let perms = permutations(t);
    let mut sum = T::zero();
    let mut dir = vec![T::zero(); t];
    for sigma in &perms {
        for k in 0..t {
            dir[sigma[k] - 1] = tau0[k];
        }
        let den = b.c22.quad_form(&dir, &dir);
        if !(den > T::from_f64(1e-12) * scale * norm2) {
            return Err(Error::SingularDirection(den.as_f64()));
        }
        let a = mixed.mul_vec(&dir);
        let m = Mat::from_fn(t, t, |i, j| lead[(i, j)] - a[i] * a[j] / den);
        sum = sum + phi_matrix(&m, total, crit);
    }
    Ok(sum / T::from_int(perms.len() as i64))
}

pub fn phi_exchangeable<T: Real>(
    space: &PreparedSpace<T>,
    d: &ExactDesign,
    tau0: &[T],
    lambda0: T,
    crit: Criterion,
) -> Result<T> {
    phi_exchangeable_weighted(&d.weighted(), space.t(), space.btilde().matrix(), tau0, lambda0, crit)
}

/// Every orbit member of every supported block, carrying an equal share of
/// its block's weight.
pub fn symmetric_realization<T: Real>(space: &PreparedSpace<T>, weights: &[T]) -> Vec<(Sequence, T)> {
    let t = space.t();
    let mut out = Vec::new();
    for (block, &w) in space.blocks().iter().zip(weights) {
        if w > T::zero() {
            let share = w / T::from_int(block.orbit_size() as i64);
            out.extend(block.members(t).into_iter().map(|s| (s, share)));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::covariance::CovarianceSpec;
    use crate::sequence::{DesignSpace, SymmetricBlock};

    fn space(p: usize, t: usize) -> PreparedSpace<f64> {
        PreparedSpace::new(DesignSpace::new(p, t, CovarianceSpec::Identity).unwrap()).unwrap()
    }

    fn members(text: &str, t: usize) -> Vec<Sequence> {
        SymmetricBlock::of(&Sequence::parse(text, t).unwrap(), t).unwrap().members(t)
    }

    fn d1() -> ExactDesign {
        let mut cols = members("122", 3);
        for _ in 0..5 {
            cols.extend(members("123", 3));
        }
        ExactDesign::new(3, 3, cols).unwrap()
    }

    #[test]
    fn d2_spectrum_matches_closed_form() {
        let sp = space(3, 3);
        let d = ExactDesign::new(3, 3, members("123", 3)).unwrap();
        let r = 0.5f64.sqrt();
        let m = fisher_tau(&sp, &d, &[r, -r, 0.0], 0.0).unwrap();
        let eig = m.symmetric_eigen().values;
        for (a, b) in eig.iter().zip([0.0, 4.8, 6.0]) {
            assert!((a - b).abs() < 1e-10, "{eig:?}");
        }
        for s in m.row_sums() {
            assert!(s.abs() < 1e-10);
        }
    }

    #[test]
    fn d1_second_eigenvalue_is_29() {
        let sp = space(3, 3);
        let m = fisher_tau(&sp, &d1(), &[0.0, 1.0, -1.0], 0.0).unwrap();
        let eig = m.symmetric_eigen().values;
        assert!((eig[1] - 29.0).abs() < 1e-9);
        let e = phi_point(&sp, &d1(), &[0.0, 1.0, -1.0], 0.0, Criterion::E).unwrap();
        assert!((e * 36.0 - 29.0).abs() < 1e-9);
    }

    #[test]
    fn fisher_lambda_properties() {
        let sp = space(3, 3);
        let constant = ExactDesign::new(3, 3, members("111", 3)).unwrap();
        assert!(fisher_lambda(&sp, &constant, &[1.0, -1.0, 0.0], 0.3).unwrap().abs() < 1e-12);
        let tau = [0.3, -0.5, 0.2];
        let neg: Vec<f64> = tau.iter().map(|x| -x).collect();
        let a = fisher_lambda(&sp, &d1(), &tau, 0.2).unwrap();
        let b = fisher_lambda(&sp, &d1(), &neg, 0.2).unwrap();
        assert!((a - b).abs() < 1e-10);
        // symmetric design: tau0' A tau0 = |tau0|^2 tr(A) / (t - 1)
        let amat = lambda_information_weighted(&d1().weighted(), 3, sp.btilde().matrix(), 0.2);
        let norm2: f64 = tau.iter().map(|x| x * x).sum();
        assert!((a - norm2 * amat.trace() / 2.0).abs() < 1e-9);
    }

    #[test]
    fn exchangeable_average_is_direction_free_for_symmetric_designs() {
        let sp = space(3, 3);
        let v1 = phi_exchangeable(&sp, &d1(), &[0.0, 1.0, -1.0], 0.0, Criterion::A).unwrap();
        let v2 = phi_exchangeable(&sp, &d1(), &[2.0, -1.0, -1.0], 0.0, Criterion::A).unwrap();
        assert!((v1 - v2).abs() < 1e-10);
    }

    #[test]
    fn singular_direction_is_reported() {
        let sp = space(2, 2);
        // one subject: centering across subjects removes everything
        let d = ExactDesign::new(2, 2, vec![Sequence::parse("12", 2).unwrap()]).unwrap();
        let err = fisher_tau(&sp, &d, &[1.0, -1.0], 0.0).unwrap_err();
        assert!(matches!(err, Error::SingularDirection(_)));
        let big = space(2, 9);
        let d = ExactDesign::new(2, 9, members("12", 9)).unwrap();
        let tau: Vec<f64> = (0..9).map(|k| k as f64).collect();
        assert!(matches!(
            phi_exchangeable(&big, &d, &tau, 0.0, Criterion::E),
            Err(Error::TooManyTreatments { .. })
        ));
    }
}
