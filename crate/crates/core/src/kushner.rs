//! Universal optimality for the classical additive model.

use crate::design::ApproxDesign;
use crate::envelope::{minimize_envelope, EnvelopeSolution};
use crate::error::Result;
use crate::linalg::Mat;
use crate::model::PreparedSpace;
use crate::moments::incidence;
use crate::optimize::{envelope_weights, Certificate, CertificateKind};
use crate::scalar::Real;

/// The stationary design of the envelope game.
pub fn kushner_design<T: Real>(space: &PreparedSpace<T>) -> Result<ApproxDesign<T>> {
    ApproxDesign::new(envelope_weights(space, &space.all_indices())?)
}

/// Residual matrices of the three matrix conditions at `x*`, assembled over
/// every orbit member with an equal share of its block's weight.
fn matrix_residuals<T: Real>(
    space: &PreparedSpace<T>,
    d: &ApproxDesign<T>,
    sol: &EnvelopeSolution<T>,
) -> [Mat<T>; 3] {
    let (p, t) = (space.p(), space.t());
    let bt = Mat::<T>::centering(t);
    let btilde = space.btilde().matrix();
    let x = sol.x_star;
    let mut r1 = Mat::zeros(t, t);
    let mut r2 = Mat::zeros(t, t);
    let mut r3 = Mat::zeros(p, t);
    for (i, w) in d.support() {
        let block = &space.blocks()[i];
        let share = w / T::from_int(block.orbit_size() as i64);
        for seq in block.members(t) {
            let inc = incidence::<T>(&seq, t);
            let g1 = inc.treatment.matmul(&bt);
            let g2 = inc.carryover.matmul(&bt);
            let c11 = g1.sandwich(btilde, &g1);
            let c12 = g1.sandwich(btilde, &g2);
            let c21 = g2.sandwich(btilde, &g1);
            let c22 = g2.sandwich(btilde, &g2);
            r1 = &r1 + &(&c11 + &c12.scale(x)).scale(share);
            r2 = &r2 + &(&c21 + &c22.scale(x)).scale(share);
            let mixed = &inc.treatment + &inc.carryover.scale(x);
            r3 = &r3 + &btilde.matmul(&mixed).matmul(&bt).scale(share);
        }
    }
    let target = bt.scale(sol.y_star / T::from_int(t as i64 - 1));
    [&r1 - &target, r2, r3]
}

/// Checks the support, the scalar stationarity condition and the three
/// matrix conditions, each against `tol * (1 + |y*|)`.
pub fn check_universal_traditional<T: Real>(
    space: &PreparedSpace<T>,
    d: &ApproxDesign<T>,
    tol: T,
) -> Result<Certificate<T>> {
    let quads = space.quadratics();
    let sol = minimize_envelope(&quads)?;
    let bound = tol * (T::one() + sol.y_star.abs());
    let support = d.support();
    let in_q = support.iter().all(|&(i, _)| sol.is_active(i));
    let stationarity: T = support
        .iter()
        .map(|&(i, w)| w * quads[i].derivative(sol.x_star))
        .sum();
    let [r1, r2, r3] = matrix_residuals(space, d, &sol);
    let residuals = vec![
        ("stationarity".to_string(), stationarity.abs()),
        ("c11_plus_x_c12".to_string(), r1.frobenius()),
        ("c21_plus_x_c22".to_string(), r2.frobenius()),
        ("incidence".to_string(), r3.frobenius()),
    ];
    let scores: Vec<(usize, T)> = quads
        .iter()
        .enumerate()
        .map(|(i, q)| (i, q.value(sol.x_star) / sol.y_star))
        .collect();
    let max_score = scores.iter().map(|e| e.1).fold(T::neg_infinity(), T::max);
    let pass = in_q
        && max_score <= T::one() + tol
        && residuals.iter().all(|(_, r)| *r <= bound);
    Ok(Certificate {
        kind: CertificateKind::Universal,
        scores,
        max_score,
        support_attains_max: in_q,
        residuals,
        pass,
        tolerance: tol,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::covariance::CovarianceSpec;
    use crate::sequence::DesignSpace;

    fn space(p: usize, t: usize, rho: f64) -> PreparedSpace<f64> {
        PreparedSpace::new(DesignSpace::new(p, t, CovarianceSpec::Tridiagonal { rho }).unwrap()).unwrap()
    }

    #[test]
    fn d1_is_universally_optimal() {
        let sp = space(3, 3, 0.0);
        let d1 = ApproxDesign::from_labels(&sp, [("122", 1.0 / 6.0), ("123", 5.0 / 6.0)]).unwrap();
        let cert = check_universal_traditional(&sp, &d1, 1e-8).unwrap();
        assert!(cert.pass, "{cert:?}");
        for (_, r) in &cert.residuals {
            assert!(*r < 1e-12);
        }
        assert_eq!(kushner_design(&sp).unwrap().max_difference(&d1) < 1e-12, true);
    }

    #[test]
    fn d2_is_not() {
        let sp = space(3, 3, 0.0);
        let d2 = ApproxDesign::from_labels(&sp, [("123", 1.0)]).unwrap();
        let cert = check_universal_traditional(&sp, &d2, 1e-8).unwrap();
        assert!(!cert.pass);
        assert!(cert.residuals[0].1 > 0.1);
    }
}
