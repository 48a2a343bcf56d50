//! Designs maximizing the information about the carryover proportion.

use crate::design::ApproxDesign;
use crate::envelope::solve_with_weights;
use crate::error::{Error, Result};
use crate::information::{lambda_information_weighted, symmetric_realization};
use crate::model::PreparedSpace;
use crate::optimize::{Certificate, CertificateKind, OptimizeOptions};
use crate::scalar::Real;

#[derive(Debug, Clone, PartialEq)]
pub struct LambdaDesign<T> {
    pub design: ApproxDesign<T>,
    pub x0: T,
    /// Envelope value per subject.
    pub y0: T,
    /// `tr(A_d)` of the symmetric realization, per subject.
    pub trace_a: T,
    pub certificate: Certificate<T>,
}

pub fn optimize_lambda_design<T: Real>(
    space: &PreparedSpace<T>,
    lambda0: T,
    opts: &OptimizeOptions<T>,
) -> Result<LambdaDesign<T>> {
    optimize_lambda_design_over(space, &space.all_indices(), lambda0, opts)
}

/// Solves the `r_s` envelope game over `indices` and checks the trace
/// identity on the assembled design.
pub fn optimize_lambda_design_over<T: Real>(
    space: &PreparedSpace<T>,
    indices: &[usize],
    lambda0: T,
    opts: &OptimizeOptions<T>,
) -> Result<LambdaDesign<T>> {
    if indices.is_empty() {
        return Err(Error::EmptyFamily);
    }
    let all = space.lambda_quadratics(lambda0);
    let quads: Vec<_> = indices.iter().map(|&i| all[i]).collect();
    let tiny = T::from_f64(1e-12);
    let scale = quads
        .iter()
        .map(|q| q.c0.abs().max(q.c1.abs()).max(q.c2.abs()))
        .fold(T::zero(), T::max);
    if scale <= tiny {
        return Err(Error::NoLambdaInformation);
    }
    let sol = solve_with_weights(&quads)?;
    if sol.y_star.abs() <= tiny * (T::one() + scale) {
        return Err(Error::NoLambdaInformation);
    }
    let mut weights = vec![T::zero(); space.len()];
    for (k, w) in sol.weights.clone().unwrap_or_default() {
        weights[indices[k]] = w;
    }
    let design = ApproxDesign::new(weights)?;

    let columns = symmetric_realization(space, design.weights());
    let a = lambda_information_weighted(&columns, space.t(), space.btilde().matrix(), lambda0);
    let trace_a = a.trace();

    let tol = opts.tolerance;
    let scores: Vec<(usize, T)> = indices
        .iter()
        .zip(&quads)
        .map(|(&i, q)| (i, q.value(sol.x_star) / sol.y_star))
        .collect();
    let max_score = scores.iter().map(|e| e.1).fold(T::neg_infinity(), T::max);
    let support_attains_max = design
        .support()
        .iter()
        .all(|&(i, _)| scores.iter().any(|&(j, s)| j == i && s >= T::one() - tol));
    let stationarity: T = design
        .support()
        .iter()
        .map(|&(i, w)| w * all[i].derivative(sol.x_star))
        .sum();
    let bound = tol * (T::one() + sol.y_star.abs());
    let residuals = vec![
        ("stationarity".to_string(), stationarity.abs()),
        ("trace_identity".to_string(), (trace_a - sol.y_star).abs()),
    ];
    let pass = max_score <= T::one() + tol
        && support_attains_max
        && residuals.iter().all(|(_, r)| *r <= bound);
    Ok(LambdaDesign {
        design,
        x0: sol.x_star,
        y0: sol.y_star,
        trace_a,
        certificate: Certificate {
            kind: CertificateKind::Lambda,
            scores,
            max_score,
            support_attains_max,
            residuals,
            pass,
            tolerance: tol,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::covariance::CovarianceSpec;
    use crate::sequence::DesignSpace;

    fn space(p: usize, t: usize) -> PreparedSpace<f64> {
        PreparedSpace::new(DesignSpace::new(p, t, CovarianceSpec::Identity).unwrap()).unwrap()
    }

    #[test]
    fn trace_identity_holds() {
        for (p, t) in [(3, 3), (4, 3)] {
            let sp = space(p, t);
            for l in [-0.5, 0.0, 0.5] {
                let r = optimize_lambda_design(&sp, l, &OptimizeOptions::default()).unwrap();
                assert!((r.trace_a - r.y0).abs() < 1e-8, "({p},{t}) {l}: {} vs {}", r.trace_a, r.y0);
                assert!(r.certificate.pass, "{:?}", r.certificate);
            }
        }
    }

    #[test]
    fn constant_blocks_carry_no_information() {
        let sp = space(3, 3);
        let i = sp.parse_block("111").unwrap();
        let err = optimize_lambda_design_over(&sp, &[i], 0.5, &OptimizeOptions::default()).unwrap_err();
        assert_eq!(err, Error::NoLambdaInformation);
        // at lambda0 = 0 the carryover column alone still identifies lambda
        let r = optimize_lambda_design_over(&sp, &[i], 0.0, &OptimizeOptions::default()).unwrap();
        assert!((r.y0 - 4.0 / 9.0).abs() < 1e-12);
        assert!((r.trace_a - r.y0).abs() < 1e-12);
    }
}
