//! A design space with its projected covariance and cached block moments.

use crate::covariance::{btilde, ProjectedCovariance};
use crate::error::{Error, Result};
use crate::moments::{block_moments, BlockMoments};
use crate::quadratic::Quadratic;
use crate::scalar::Real;
use crate::sequence::{canonicalize, enumerate_blocks, DesignSpace, Sequence, SymmetricBlock};

/// Relative tolerance for treating two blocks' moments as identical.
pub const MOMENT_MATCH_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone)]
pub struct PreparedSpace<T> {
    space: DesignSpace<T>,
    btilde: ProjectedCovariance<T>,
    blocks: Vec<SymmetricBlock>,
    moments: Vec<BlockMoments<T>>,
}

impl<T: Real> PreparedSpace<T> {
    pub fn new(space: DesignSpace<T>) -> Result<Self> {
        let btilde = btilde(&space.covariance, space.p)?;
        let blocks = enumerate_blocks(space.p, space.t)?;
        let moments = blocks
            .iter()
            .map(|b| block_moments(b.canonical(), space.t, &btilde))
            .collect();
        Ok(PreparedSpace {
            space,
            btilde,
            blocks,
            moments,
        })
    }

    pub fn space(&self) -> &DesignSpace<T> {
        &self.space
    }

    pub fn p(&self) -> usize {
        self.space.p
    }

    pub fn t(&self) -> usize {
        self.space.t
    }

    pub fn btilde(&self) -> &ProjectedCovariance<T> {
        &self.btilde
    }

    pub fn blocks(&self) -> &[SymmetricBlock] {
        &self.blocks
    }

    pub fn len(&self) -> usize {
        self.blocks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.blocks.is_empty()
    }

    pub fn moments(&self) -> &[BlockMoments<T>] {
        &self.moments
    }

    pub fn quadratics(&self) -> Vec<Quadratic<T>> {
        self.moments.iter().map(BlockMoments::quadratic).collect()
    }

    /// The `r_s` family of the carryover-estimation problem.
    pub fn lambda_quadratics(&self, lambda0: T) -> Vec<Quadratic<T>> {
        self.moments
            .iter()
            .map(|m| m.lambda(lambda0).quadratic())
            .collect()
    }

    /// Block index of the orbit containing `seq`.
    pub fn index_of(&self, seq: &Sequence) -> Result<usize> {
        seq.check_in(self.p(), self.t())?;
        let canon = canonicalize(seq);
        self.blocks
            .binary_search_by(|b| b.canonical().cmp(&canon))
            .map_err(|_| Error::InvalidSpace(format!("no block for {canon}")))
    }

    pub fn parse_block(&self, text: &str) -> Result<usize> {
        self.index_of(&Sequence::parse(text, self.t())?)
    }

    pub fn label(&self, index: usize) -> String {
        self.blocks[index].canonical().render(self.t())
    }

    /// Groups `indices` into classes with identical moments; each class is
    /// listed with its highest index first.
    pub fn moment_classes(&self, indices: &[usize]) -> Vec<Vec<usize>> {
        let tol = T::from_f64(MOMENT_MATCH_TOLERANCE);
        let mut sorted = indices.to_vec();
        sorted.sort_unstable_by(|a, b| b.cmp(a));
        let mut classes: Vec<Vec<usize>> = Vec::new();
        for i in sorted {
            match classes
                .iter_mut()
                .find(|cl| self.moments[cl[0]].approx_eq(&self.moments[i], tol))
            {
                Some(cl) => cl.push(i),
                None => classes.push(vec![i]),
            }
        }
        classes.sort_by_key(|cl| cl[0]);
        classes
    }

    /// One index per moment class (the highest).
    pub fn representatives(&self, indices: &[usize]) -> Vec<usize> {
        self.moment_classes(indices).into_iter().map(|cl| cl[0]).collect()
    }

    pub fn all_indices(&self) -> Vec<usize> {
        (0..self.blocks.len()).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::covariance::CovarianceSpec;

    #[test]
    fn prepared_three_by_three() {
        let sp = PreparedSpace::<f64>::new(DesignSpace::new(3, 3, CovarianceSpec::Identity).unwrap()).unwrap();
        assert_eq!(sp.len(), 5);
        let i = sp.index_of(&Sequence::parse("311", 3).unwrap()).unwrap();
        assert_eq!(sp.label(i), "122");
        let m = sp.moments()[sp.parse_block("123").unwrap()];
        assert!((m.c11 - 2.0).abs() < 1e-14);
        assert!(sp.parse_block("1234").is_err());
    }

    #[test]
    fn identical_moment_classes() {
        // in (4,3) the blocks 1231 and 1232 share their moments
        let sp = PreparedSpace::<f64>::new(DesignSpace::new(4, 3, CovarianceSpec::Identity).unwrap()).unwrap();
        let a = sp.parse_block("1231").unwrap();
        let b = sp.parse_block("1232").unwrap();
        let classes = sp.moment_classes(&sp.all_indices());
        let class = classes.iter().find(|cl| cl.contains(&a)).unwrap();
        assert!(class.contains(&b));
        assert_eq!(class[0], b.max(a));
    }
}
