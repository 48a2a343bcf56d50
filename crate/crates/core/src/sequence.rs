//! Treatment sequences and their orbits under treatment relabeling.
//!
//! A symmetric block is represented by its restricted-growth form: the first
//! treatment seen is labelled 1, the next new one 2, and so on. That string
//! is the lexicographically smallest member of the orbit, so two sequences
//! lie in the same orbit exactly when their canonical forms agree.

use std::fmt;
use std::str::FromStr;

use crate::covariance::CovarianceSpec;
use crate::error::{Error, Result};
use crate::scalar::Field;

/// Treatment labels for one subject, period by period, each in `1..=t`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Sequence(Vec<usize>);

impl Sequence {
    pub fn new(labels: Vec<usize>, t: usize) -> Result<Self> {
        for (position, &label) in labels.iter().enumerate() {
            if label == 0 || label > t {
                return Err(Error::LabelOutOfRange { label, t, position });
            }
        }
        Ok(Sequence(labels))
    }

    pub fn labels(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn distinct_count(&self) -> usize {
        let mut seen: Vec<usize> = self.0.clone();
        seen.sort_unstable();
        seen.dedup();
        seen.len()
    }

    /// Applies a relabeling `sigma` given as a slice with `sigma[k-1]` the
    /// image of treatment `k`.
    pub fn relabel(&self, sigma: &[usize]) -> Sequence {
        Sequence(self.0.iter().map(|&l| sigma[l - 1]).collect())
    }

    pub fn check_in(&self, p: usize, t: usize) -> Result<()> {
        if self.len() != p {
            return Err(Error::LengthMismatch {
                expected: p,
                found: self.len(),
            });
        }
        for (position, &label) in self.0.iter().enumerate() {
            if label == 0 || label > t {
                return Err(Error::LabelOutOfRange { label, t, position });
            }
        }
        Ok(())
    }

    /// Textual form: a digit string when `t <= 9`, comma separated otherwise.
    pub fn render(&self, t: usize) -> String {
        if t <= 9 {
            self.0.iter().map(|l| char::from(b'0' + *l as u8)).collect()
        } else {
            self.0
                .iter()
                .map(usize::to_string)
                .collect::<Vec<_>>()
                .join(",")
        }
    }

    /// Parses either textual form and validates labels against `t`.
    pub fn parse(text: &str, t: usize) -> Result<Self> {
        let text = text.trim();
        let labels: Vec<usize> = if text.contains(',') {
            text.split(',')
                .map(|s| {
                    s.trim()
                        .parse::<usize>()
                        .map_err(|e| Error::Parse(format!("bad label {s:?}: {e}")))
                })
                .collect::<Result<_>>()?
        } else {
            text.chars()
                .map(|c| {
                    c.to_digit(10)
                        .map(|d| d as usize)
                        .ok_or_else(|| Error::Parse(format!("bad label {c:?} in {text:?}")))
                })
                .collect::<Result<_>>()?
        };
        if labels.is_empty() {
            return Err(Error::Parse("empty sequence".into()));
        }
        Sequence::new(labels, t)
    }
}

impl fmt::Display for Sequence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let t = self.0.iter().copied().max().unwrap_or(0);
        f.write_str(&self.render(t))
    }
}

impl FromStr for Sequence {
    type Err = Error;

    /// Parses without an upper bound on labels (beyond 1..); use
    /// [`Sequence::parse`] when `t` is known.
    fn from_str(s: &str) -> Result<Self> {
        Sequence::parse(s, usize::MAX)
    }
}

/// Relabels by first occurrence. Idempotent, and constant on orbits.
pub fn canonicalize(seq: &Sequence) -> Sequence {
    let mut map: Vec<(usize, usize)> = Vec::new();
    let labels = seq
        .0
        .iter()
        .map(|&l| match map.iter().find(|(from, _)| *from == l) {
            Some(&(_, to)) => to,
            None => {
                let to = map.len() + 1;
                map.push((l, to));
                to
            }
        })
        .collect();
    Sequence(labels)
}

/// Number of injective relabelings of `distinct` treatments into `t`:
/// `t! / (t - distinct)!`.
pub fn orbit_size(distinct: usize, t: usize) -> Result<u64> {
    if distinct > t {
        return Err(Error::TooManyDistinct { distinct, t });
    }
    Ok(((t - distinct + 1)..=t).map(|k| k as u64).product())
}

/// An orbit of sequences under treatment relabeling.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SymmetricBlock {
    canonical: Sequence,
    distinct: usize,
    orbit_size: u64,
}

impl SymmetricBlock {
    /// The block containing `seq` within a space of `t` treatments.
    pub fn of(seq: &Sequence, t: usize) -> Result<Self> {
        let canonical = canonicalize(seq);
        let distinct = canonical.distinct_count();
        Ok(SymmetricBlock {
            orbit_size: orbit_size(distinct, t)?,
            canonical,
            distinct,
        })
    }

    pub fn canonical(&self) -> &Sequence {
        &self.canonical
    }

    pub fn distinct_count(&self) -> usize {
        self.distinct
    }

    pub fn orbit_size(&self) -> u64 {
        self.orbit_size
    }

    /// All distinct images of the canonical sequence, in lexicographic order.
    pub fn members(&self, t: usize) -> Vec<Sequence> {
        orbit_members(self, t)
    }
}

/// Every restricted-growth string of length `p` using at most `t` labels,
/// in lexicographic order. The orbit sizes sum to `t^p`.
pub fn enumerate_blocks(p: usize, t: usize) -> Result<Vec<SymmetricBlock>> {
    validate_dimensions(p, t)?;
    let mut out = Vec::new();
    let mut current = Vec::with_capacity(p);
    current.push(1);
    grow(&mut current, 1, p, t, &mut out);
    Ok(out)
}

fn grow(current: &mut Vec<usize>, used: usize, p: usize, t: usize, out: &mut Vec<SymmetricBlock>) {
    if current.len() == p {
        let canonical = Sequence(current.clone());
        out.push(SymmetricBlock {
            orbit_size: orbit_size(used, t).expect("restricted growth never exceeds t"),
            canonical,
            distinct: used,
        });
        return;
    }
    for label in 1..=(used + 1).min(t) {
        current.push(label);
        grow(current, used.max(label), p, t, out);
        current.pop();
    }
}

/// Images of the block's canonical member under all injective relabelings
/// into `1..=t`, sorted.
pub fn orbit_members(block: &SymmetricBlock, t: usize) -> Vec<Sequence> {
    let u = block.distinct;
    let mut out = Vec::new();
    let mut image = Vec::with_capacity(u);
    let mut taken = vec![false; t + 1];
    injections(u, t, &mut image, &mut taken, &mut |sigma| {
        out.push(block.canonical.relabel(sigma));
    });
    out.sort();
    out
}

fn injections(
    u: usize,
    t: usize,
    image: &mut Vec<usize>,
    taken: &mut [bool],
    visit: &mut dyn FnMut(&[usize]),
) {
    if image.len() == u {
        visit(image);
        return;
    }
    for label in 1..=t {
        if taken[label] {
            continue;
        }
        taken[label] = true;
        image.push(label);
        injections(u, t, image, taken, visit);
        image.pop();
        taken[label] = false;
    }
}

/// All `t!` permutations of `1..=t`, in lexicographic order. Entry `k-1` of
/// each permutation is the image of treatment `k`.
pub fn permutations(t: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut image = Vec::with_capacity(t);
    let mut taken = vec![false; t + 1];
    injections(t, t, &mut image, &mut taken, &mut |sigma| out.push(sigma.to_vec()));
    out
}

pub(crate) fn validate_dimensions(p: usize, t: usize) -> Result<()> {
    if p < 2 {
        return Err(Error::InvalidSpace(format!("p = {p}, need at least 2 periods")));
    }
    if t < 2 {
        return Err(Error::InvalidSpace(format!("t = {t}, need at least 2 treatments")));
    }
    Ok(())
}

/// Periods, treatments and the within-subject covariance.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignSpace<T> {
    pub p: usize,
    pub t: usize,
    pub covariance: CovarianceSpec<T>,
}

impl<T: Field> DesignSpace<T> {
    pub fn new(p: usize, t: usize, covariance: CovarianceSpec<T>) -> Result<Self> {
        validate_dimensions(p, t)?;
        Ok(DesignSpace { p, t, covariance })
    }

    /// `t^p`, saturating.
    pub fn sequence_count(&self) -> u64 {
        (self.t as u64).saturating_pow(self.p as u32)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn seq(s: &str, t: usize) -> Sequence {
        Sequence::parse(s, t).unwrap()
    }

    fn names(blocks: &[SymmetricBlock]) -> Vec<String> {
        blocks.iter().map(|b| b.canonical().render(9)).collect()
    }

    #[test]
    fn canonicalize_relabels_by_first_occurrence() {
        assert_eq!(canonicalize(&seq("2331", 3)), seq("1223", 3));
        assert_eq!(canonicalize(&seq("123", 3)), seq("123", 3));
        assert_eq!(canonicalize(&seq("313", 3)), seq("121", 3));
    }

    #[test]
    fn out_of_range_label_is_rejected() {
        assert_eq!(
            Sequence::parse("124", 3),
            Err(Error::LabelOutOfRange {
                label: 4,
                t: 3,
                position: 2
            })
        );
        assert!(Sequence::parse("102", 3).is_err());
    }

    #[test]
    fn orbit_sizes() {
        assert_eq!(orbit_size(3, 3).unwrap(), 6);
        assert_eq!(orbit_size(2, 3).unwrap(), 6);
        assert_eq!(orbit_size(3, 4).unwrap(), 24);
        assert_eq!(
            orbit_size(4, 3),
            Err(Error::TooManyDistinct { distinct: 4, t: 3 })
        );
    }

    #[test]
    fn enumerate_small_spaces() {
        assert_eq!(names(&enumerate_blocks(2, 2).unwrap()), ["11", "12"]);
        assert_eq!(
            names(&enumerate_blocks(3, 3).unwrap()),
            ["111", "112", "121", "122", "123"]
        );
        assert_eq!(
            names(&enumerate_blocks(3, 2).unwrap()),
            ["111", "112", "121", "122"]
        );
    }

    #[test]
    fn invalid_dimensions() {
        assert!(enumerate_blocks(1, 3).is_err());
        assert!(enumerate_blocks(3, 1).is_err());
    }

    #[test]
    fn orbit_member_lists() {
        let b = SymmetricBlock::of(&seq("12", 2), 2).unwrap();
        assert_eq!(b.members(2), [seq("12", 2), seq("21", 2)]);
        let b = SymmetricBlock::of(&seq("11", 2), 2).unwrap();
        assert_eq!(b.members(2), [seq("11", 2), seq("22", 2)]);
        let b = SymmetricBlock::of(&seq("122", 3), 3).unwrap();
        let got: Vec<String> = b.members(3).iter().map(|s| s.render(3)).collect();
        assert_eq!(got, ["122", "133", "211", "233", "311", "322"]);
        assert_eq!(got.len() as u64, b.orbit_size());
    }

    #[test]
    fn text_forms() {
        let s = Sequence::new(vec![1, 2, 10, 2], 10).unwrap();
        assert_eq!(s.render(10), "1,2,10,2");
        assert_eq!(Sequence::parse("1,2,10,2", 10).unwrap(), s);
        assert_eq!(seq("1232", 3).render(3), "1232");
    }

    #[test]
    fn six_by_five_is_cheap() {
        let blocks = enumerate_blocks(6, 5).unwrap();
        // restricted-growth strings of length 6 with at most 5 blocks: B6 - S(6,6) = 203 - 1
        assert_eq!(blocks.len(), 202);
        let total: u64 = blocks.iter().map(SymmetricBlock::orbit_size).sum();
        assert_eq!(total, 5u64.pow(6));
    }

    #[test]
    fn permutations_are_lexicographic() {
        let perms = permutations(3);
        assert_eq!(perms.len(), 6);
        assert_eq!(perms[0], [1, 2, 3]);
        assert_eq!(perms[5], [3, 2, 1]);
    }
}
