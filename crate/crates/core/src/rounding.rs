//! Rounding an approximate design to a fixed number of subjects.

use log::warn;

use crate::design::{ApproxDesign, ExactDesign};
use crate::error::{Error, Result};
use crate::model::PreparedSpace;
use crate::scalar::Real;
use crate::sequence::{Sequence, SymmetricBlock};

#[derive(Debug, Clone, PartialEq)]
pub struct RoundedDesign<T> {
    pub exact: ExactDesign,
    pub counts: Vec<usize>,
    pub achieved_weights: Vec<T>,
    /// Max `|achieved - target|` over blocks.
    pub weight_error: T,
    /// Max `|count - n/t|` over treatment and period.
    pub symmetry_diagnostic: T,
}

/// Largest-remainder apportionment of `n` over `weights`; equal remainders
/// go to the lower index.
pub fn apportion<T: Real>(weights: &[T], n: usize) -> Vec<usize> {
    let nn = T::from_int(n as i64);
    let mut counts: Vec<usize> = Vec::with_capacity(weights.len());
    let mut rems: Vec<(usize, T)> = Vec::new();
    for (i, &w) in weights.iter().enumerate() {
        let target = (w * nn).max(T::zero());
        let base = target.floor();
        counts.push(base.as_f64() as usize);
        if w > T::zero() {
            rems.push((i, target - base));
        }
    }
    let assigned: usize = counts.iter().sum();
    let left = n.saturating_sub(assigned);
    rems.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap_or(std::cmp::Ordering::Equal).then(a.0.cmp(&b.0)));
    for (i, _) in rems.iter().cycle().take(left) {
        counts[*i] += 1;
    }
    counts
}

/// Orbit members grouped into runs of cyclic label shifts, so that any `t`
/// consecutive picks place every treatment once in each period.
pub fn rotation_order(block: &SymmetricBlock, t: usize) -> Vec<Sequence> {
    let members = block.members(t);
    let mut used = vec![false; members.len()];
    let mut out = Vec::with_capacity(members.len());
    for start in 0..members.len() {
        if used[start] {
            continue;
        }
        for k in 0..t {
            let shift: Vec<usize> = (1..=t).map(|l| (l - 1 + k) % t + 1).collect();
            let s = members[start].relabel(&shift);
            let pos = members.binary_search(&s).expect("shift stays in the orbit");
            if !used[pos] {
                used[pos] = true;
                out.push(s);
            }
        }
    }
    out
}

pub fn round_exact<T: Real>(space: &PreparedSpace<T>, d: &ApproxDesign<T>, n: usize) -> Result<RoundedDesign<T>> {
    if n == 0 {
        return Err(Error::InvalidWeights("n must be at least 1".into()));
    }
    if d.len() != space.len() {
        return Err(Error::Dimension(format!("{} weights for {} blocks", d.len(), space.len())));
    }
    let (p, t) = (space.p(), space.t());
    let support = d.support().len();
    if n < support {
        warn!("n = {n} is smaller than the support size {support}; some blocks get no subjects");
    }
    let counts = apportion(d.weights(), n);
    let mut columns = Vec::with_capacity(n);
    for (block, &c) in space.blocks().iter().zip(&counts) {
        if c == 0 {
            continue;
        }
        let order = rotation_order(block, t);
        columns.extend(order.iter().cycle().take(c).cloned());
    }
    let exact = ExactDesign::new(p, t, columns)?;

    let nn = T::from_int(n as i64);
    let achieved_weights: Vec<T> = counts.iter().map(|&c| T::from_int(c as i64) / nn).collect();
    let weight_error = achieved_weights
        .iter()
        .zip(d.weights())
        .map(|(&a, &w)| (a - w).abs())
        .fold(T::zero(), T::max);
    Ok(RoundedDesign {
        symmetry_diagnostic: symmetry_diagnostic(&exact),
        exact,
        counts,
        achieved_weights,
        weight_error,
    })
}

/// Max deviation of treatment-by-period counts from `n/t`.
pub fn symmetry_diagnostic<T: Real>(d: &ExactDesign) -> T {
    let (p, t) = (d.p(), d.t());
    let mut table = vec![vec![0usize; t]; p];
    for col in d.columns() {
        for (k, &l) in col.labels().iter().enumerate() {
            table[k][l - 1] += 1;
        }
    }
    let even = T::from_int(d.n() as i64) / T::from_int(t as i64);
    table
        .iter()
        .flatten()
        .map(|&c| (T::from_int(c as i64) - even).abs())
        .fold(T::zero(), T::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::covariance::CovarianceSpec;
    use crate::design::symmetrize;
    use crate::sequence::DesignSpace;

    fn space(p: usize, t: usize) -> PreparedSpace<f64> {
        PreparedSpace::new(DesignSpace::new(p, t, CovarianceSpec::Identity).unwrap()).unwrap()
    }

    fn d1(sp: &PreparedSpace<f64>) -> ApproxDesign<f64> {
        ApproxDesign::from_labels(sp, [("122", 1.0 / 6.0), ("123", 5.0 / 6.0)]).unwrap()
    }

    #[test]
    fn d1_with_36_subjects() {
        let sp = space(3, 3);
        let r = round_exact(&sp, &d1(&sp), 36).unwrap();
        assert_eq!(r.exact.n(), 36);
        assert!(r.weight_error < 1e-12);
        assert!(r.symmetry_diagnostic < 1e-12);
        let re = sp.blocks()[sp.parse_block("122").unwrap()].members(3);
        for m in &re {
            assert_eq!(r.exact.columns().iter().filter(|c| *c == m).count(), 1);
        }
        let di = sp.blocks()[sp.parse_block("123").unwrap()].members(3);
        for m in &di {
            assert_eq!(r.exact.columns().iter().filter(|c| *c == m).count(), 5);
        }
    }

    #[test]
    fn d1_with_10_subjects() {
        let sp = space(3, 3);
        let r = round_exact(&sp, &d1(&sp), 10).unwrap();
        assert_eq!(r.counts[sp.parse_block("122").unwrap()], 2);
        assert_eq!(r.counts[sp.parse_block("123").unwrap()], 8);
        assert!(r.weight_error > 0.01);
        let back = symmetrize(&sp, &r.exact).unwrap();
        let tv: f64 = back.weights().iter().zip(d1(&sp).weights()).map(|(a, b)| (a - b).abs()).sum::<f64>() / 2.0;
        assert!(tv <= 0.1 + 1e-12);
    }

    #[test]
    fn two_by_two() {
        let sp = space(2, 2);
        let d = ApproxDesign::from_labels(&sp, [("12", 1.0)]).unwrap();
        let r = round_exact(&sp, &d, 2).unwrap();
        assert_eq!(r.exact.layout(), vec![vec![1, 2], vec![2, 1]]);
        assert_eq!(r.symmetry_diagnostic, 0.0);
    }

    #[test]
    fn apportion_ties_go_low() {
        assert_eq!(apportion(&[0.5, 0.5], 3), vec![2, 1]);
        assert_eq!(apportion(&[0.25, 0.25, 0.5], 1), vec![0, 0, 1]);
        assert_eq!(apportion(&[1.0 / 3.0; 3], 2), vec![1, 1, 0]);
    }

    #[test]
    fn small_n_drops_blocks() {
        let sp = space(3, 3);
        let r = round_exact(&sp, &d1(&sp), 1).unwrap();
        assert_eq!(r.exact.n(), 1);
        assert_eq!(r.counts[sp.parse_block("123").unwrap()], 1);
        assert!(round_exact(&sp, &d1(&sp), 0).is_err());
    }
}
