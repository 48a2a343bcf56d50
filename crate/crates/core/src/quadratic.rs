use crate::scalar::{Field, Real};

/// `c0 + 2 c1 x + c2 x^2`.
///
/// The factor of two on the linear coefficient matches the trace moments
/// `(c11, c12, c22)` a block contributes, so a block's quadratic is built
/// directly from its moments.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Quadratic<T> {
    pub c0: T,
    pub c1: T,
    pub c2: T,
}

impl<T: Field> Quadratic<T> {
    pub fn new(c0: T, c1: T, c2: T) -> Self {
        Quadratic { c0, c1, c2 }
    }

    pub fn value(&self, x: T) -> T {
        let two = T::from_int(2);
        self.c0 + two * self.c1 * x + self.c2 * x * x
    }

    pub fn derivative(&self, x: T) -> T {
        let two = T::from_int(2);
        two * (self.c1 + self.c2 * x)
    }

    /// `-c1 / c2`, defined when `c2 > tol`.
    pub fn minimizer(&self, tol: T) -> Option<T> {
        (self.c2 > tol).then(|| -self.c1 / self.c2)
    }

    /// `c0 - c1^2 / c2`; `c0` for a flat quadratic.
    pub fn min_value(&self, tol: T) -> T {
        match self.minimizer(tol) {
            Some(_) => self.c0 - self.c1 * self.c1 / self.c2,
            None => self.c0,
        }
    }

    pub fn scale(&self, k: T) -> Self {
        Quadratic::new(self.c0 * k, self.c1 * k, self.c2 * k)
    }

    pub fn is_convex(&self) -> bool {
        self.c2 >= T::zero()
    }

    /// Pointwise linear combination.
    pub fn combine<'a, I>(terms: I) -> Self
    where
        I: IntoIterator<Item = (T, &'a Quadratic<T>)>,
    {
        terms.into_iter().fold(
            Quadratic::new(T::zero(), T::zero(), T::zero()),
            |acc, (w, q)| Quadratic::new(acc.c0 + w * q.c0, acc.c1 + w * q.c1, acc.c2 + w * q.c2),
        )
    }
}

impl<T: Real> Quadratic<T> {
    /// Real roots of `self - other`, ascending.
    pub fn crossings(&self, other: &Self) -> Vec<T> {
        let two = T::from_int(2);
        let a = self.c2 - other.c2;
        let b = two * (self.c1 - other.c1);
        let c = self.c0 - other.c0;
        let scale = a.abs().max(b.abs()).max(c.abs());
        if scale == T::zero() {
            return Vec::new();
        }
        let tiny = T::epsilon() * T::from_int(16) * scale;
        if a.abs() <= tiny {
            if b.abs() <= tiny {
                return Vec::new();
            }
            return vec![-c / b];
        }
        let disc = b * b - T::from_int(4) * a * c;
        if disc < T::zero() {
            return Vec::new();
        }
        // numerically stable pair
        let q = -(b + b.signum() * disc.sqrt()) / two;
        let mut roots = Vec::with_capacity(2);
        roots.push(q / a);
        if q != T::zero() {
            roots.push(c / q);
        }
        roots.sort_by(|x, y| x.partial_cmp(y).unwrap_or(std::cmp::Ordering::Equal));
        roots
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn evaluation_and_minimum() {
        let q = Quadratic::new(2.0f64, -2.0 / 3.0, 10.0 / 9.0);
        assert!((q.value(0.5) - 29.0 / 18.0).abs() < 1e-15);
        assert!((q.minimizer(1e-12).unwrap() - 0.6).abs() < 1e-15);
        assert!((q.min_value(1e-12) - 1.6).abs() < 1e-15);
        assert!((q.derivative(0.5) + 2.0 / 9.0).abs() < 1e-15);
        let flat = Quadratic::new(3.0, 0.0, 0.0);
        assert_eq!(flat.minimizer(1e-12), None);
        assert_eq!(flat.min_value(1e-12), 3.0);
    }

    #[test]
    fn crossings_of_the_three_by_three_pair() {
        let di = Quadratic::new(2.0f64, -2.0 / 3.0, 10.0 / 9.0);
        let re = Quadratic::new(4.0 / 3.0, 0.0, 10.0 / 9.0);
        let roots = di.crossings(&re);
        assert_eq!(roots.len(), 1);
        assert!((roots[0] - 0.5).abs() < 1e-15);
    }
}
