//! Optimal approximate crossover designs when carryover effects are a fixed
//! proportion of the direct treatment effects.
//!
//! The pipeline: enumerate symmetric blocks of treatment sequences
//! ([`sequence`]), reduce each to three trace moments ([`moments`]), and
//! optimize block proportions either through the minimax envelope of the
//! block quadratics ([`envelope`]) or by vertex-direction ascent
//! ([`optimize`]). Every result comes with an equivalence-theorem
//! certificate.
//!
//! Everything is generic over [`scalar::Real`]; moment computations also
//! run over exact rationals via [`scalar::Field`].
//!
//! ```
//! use crossover_core::{Criterion, CovarianceSpec, DesignSpace, OptimizeOptions, PreparedSpace64};
//!
//! let space = PreparedSpace64::new(DesignSpace::new(3, 3, CovarianceSpec::Identity)?)?;
//! let best = crossover_core::optimize(&space, Criterion::E, 0.0, &OptimizeOptions::default())?;
//! assert!(best.certificate.pass);
//! assert!((best.design.weight(space.parse_block("122")?) - 1.0 / 6.0).abs() < 1e-10);
//! # Ok::<(), crossover_core::Error>(())
//! ```

pub mod covariance;
pub mod design;
pub mod envelope;
pub mod error;
pub mod information;
pub mod io;
pub mod kushner;
pub mod lambda_design;
pub mod linalg;
pub mod model;
pub mod moments;
pub mod optimize;
pub mod quadratic;
pub mod rounding;
pub mod scalar;
pub mod sequence;
pub mod sweep;

pub use covariance::{CovarianceSpec, ProjectedCovariance, SigmaSpecJson};
pub use design::{
    compute_lambda_star, criterion_value, efficiency, spectrum, symmetrize, ApproxDesign, Criterion,
    DesignMoments, ExactDesign, ModelContext, Prior,
};
pub use envelope::{minimize_envelope, solve_with_weights, EnvelopeSolution};
pub use error::{Error, Result};
pub use information::{fisher_lambda, fisher_tau, phi_exchangeable, phi_point};
pub use io::{DesignFile, DesignKind, LoadedDesign};
pub use kushner::{check_universal_traditional, kushner_design};
pub use lambda_design::{optimize_lambda_design, LambdaDesign};
pub use linalg::Mat;
pub use model::PreparedSpace;
pub use moments::BlockMoments;
pub use optimize::{certify, optimize, Certificate, CertificateKind, OptimizeOptions, OptimizeResult};
pub use quadratic::Quadratic;
pub use rounding::{round_exact, RoundedDesign};
pub use scalar::{Field, Real};
pub use sequence::{DesignSpace, Sequence, SymmetricBlock};
pub use sweep::{sweep, SweepRow};

pub type Rational = num_rational::Ratio<i128>;

pub type PreparedSpace64 = PreparedSpace<f64>;
pub type ApproxDesign64 = ApproxDesign<f64>;
pub type Quadratic64 = Quadratic<f64>;
pub type BlockMoments64 = BlockMoments<f64>;
pub type Certificate64 = Certificate<f64>;
pub type DesignSpace64 = DesignSpace<f64>;

pub type PreparedSpace32 = PreparedSpace<f32>;
pub type ApproxDesign32 = ApproxDesign<f32>;
pub type Quadratic32 = Quadratic<f32>;
pub type BlockMoments32 = BlockMoments<f32>;
pub type DesignSpace32 = DesignSpace<f32>;

pub type QuadraticQ = Quadratic<Rational>;
pub type BlockMomentsQ = BlockMoments<Rational>;
