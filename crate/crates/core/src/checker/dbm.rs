//! Difference bound matrices over integer-scaled constants.

use std::cmp::Ordering;

/// One DBM entry: an upper bound on `x_i - x_j`, possibly strict or infinite.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Bound {
    Inf,
    /// `value` with `strict == true` meaning `<`, else `≤`.
    B(i64, bool),
}

impl Bound {
    pub const ZERO: Bound = Bound::B(0, false);

    pub fn le(value: i64) -> Bound {
        Bound::B(value, false)
    }

    pub fn lt(value: i64) -> Bound {
        Bound::B(value, true)
    }

    pub fn add(self, other: Bound) -> Bound {
        match (self, other) {
            (Bound::Inf, _) | (_, Bound::Inf) => Bound::Inf,
            (Bound::B(a, sa), Bound::B(b, sb)) => Bound::B(a.saturating_add(b), sa || sb),
        }
    }
}

impl PartialOrd for Bound {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Bound {
    fn cmp(&self, other: &Self) -> Ordering {
        match (self, other) {
            (Bound::Inf, Bound::Inf) => Ordering::Equal,
            (Bound::Inf, _) => Ordering::Greater,
            (_, Bound::Inf) => Ordering::Less,
            (Bound::B(a, sa), Bound::B(b, sb)) => {
                // Strict bounds are tighter than non-strict of equal value.
                a.cmp(b).then_with(|| sb.cmp(&sa))
            }
        }
    }
}

/// A canonical DBM; index 0 is the zero clock. The matrix entry `[i][j]`
/// bounds `x_i - x_j`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Dbm {
    dim: usize,
    m: Vec<Bound>,
}

impl Dbm {
    /// The zone where all clocks equal zero.
    pub fn zero(clocks: usize) -> Dbm {
        let dim = clocks + 1;
        Dbm { dim, m: vec![Bound::ZERO; dim * dim] }
    }

    /// The full nonnegative orthant.
    pub fn universe(clocks: usize) -> Dbm {
        let dim = clocks + 1;
        let mut d = Dbm { dim, m: vec![Bound::Inf; dim * dim] };
        for i in 0..dim {
            *d.at_mut(i, i) = Bound::ZERO;
            // x_0 - x_i <= 0: clocks are nonnegative.
            *d.at_mut(0, i) = Bound::ZERO;
        }
        *d.at_mut(0, 0) = Bound::ZERO;
        d
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn at(&self, i: usize, j: usize) -> Bound {
        self.m[i * self.dim + j]
    }

    fn at_mut(&mut self, i: usize, j: usize) -> &mut Bound {
        &mut self.m[i * self.dim + j]
    }

    pub fn is_empty(&self) -> bool {
        self.at(0, 0) < Bound::ZERO
    }

    /// Shortest-path closure (Floyd–Warshall); detects emptiness via a
    /// negative diagonal, which is folded into the `(0, 0)` entry so that
    /// [`Dbm::is_empty`] observes it.
    pub fn canonicalize(&mut self) {
        let n = self.dim;
        for k in 0..n {
            for i in 0..n {
                let dik = self.at(i, k);
                if dik == Bound::Inf {
                    continue;
                }
                for j in 0..n {
                    let cand = dik.add(self.at(k, j));
                    if cand < self.at(i, j) {
                        *self.at_mut(i, j) = cand;
                    }
                }
            }
            for i in 0..n {
                if self.at(i, i) < Bound::ZERO {
                    *self.at_mut(0, 0) = Bound::lt(0);
                    return;
                }
            }
        }
    }

    /// Delay closure: drop all upper bounds against the zero clock.
    pub fn up(&mut self) {
        for i in 1..self.dim {
            *self.at_mut(i, 0) = Bound::Inf;
        }
        // Still canonical: only column 0 changed to the loosest value.
    }

    /// Intersects with `x_i - x_j ≺ bound` (0 = zero clock).
    pub fn constrain(&mut self, i: usize, j: usize, bound: Bound) {
        if bound < self.at(i, j) {
            *self.at_mut(i, j) = bound;
            self.canonicalize();
        }
    }

    /// Sets clock `i` to the constant `value`.
    pub fn assign(&mut self, i: usize, value: i64) {
        let n = self.dim;
        for j in 0..n {
            if j != i {
                *self.at_mut(i, j) = Bound::le(value).add(self.at(0, j));
                *self.at_mut(j, i) = self.at(j, 0).add(Bound::le(-value));
            }
        }
        *self.at_mut(i, i) = Bound::ZERO;
    }

    /// `other ⊆ self` (both canonical).
    pub fn includes(&self, other: &Dbm) -> bool {
        debug_assert_eq!(self.dim, other.dim);
        (0..self.dim * self.dim).all(|x| other.m[x] <= self.m[x])
    }

    /// True iff every clock can grow without bound (time can diverge here).
    pub fn time_unbounded(&self) -> bool {
        (1..self.dim).all(|i| self.at(i, 0) == Bound::Inf)
    }

    /// Classic maximal-constant extrapolation; `max_const[i] == None` leaves
    /// clock `i + 1` untouched (used for clocks in difference constraints,
    /// where this extrapolation is unsound).
    pub fn extrapolate(&mut self, max_const: &[Option<i64>]) {
        let n = self.dim;
        let mut changed = false;
        for i in 1..n {
            let Some(mi) = max_const[i - 1] else { continue };
            for j in 0..n {
                if i == j {
                    continue;
                }
                if let Bound::B(v, _) = self.at(i, j) {
                    if v > mi {
                        *self.at_mut(i, j) = Bound::Inf;
                        changed = true;
                    }
                }
            }
        }
        for j in 1..n {
            let Some(mj) = max_const[j - 1] else { continue };
            for i in 0..n {
                if i == j {
                    continue;
                }
                if let Bound::B(v, strict) = self.at(i, j) {
                    if v < -mj && !(v == -mj && !strict) {
                        *self.at_mut(i, j) = Bound::lt(-mj);
                        changed = true;
                    }
                }
            }
        }
        if changed {
            self.canonicalize();
        }
    }

    /// Membership of a concrete integer-scaled point (`point[i]` is the value
    /// of clock `i + 1`).
    pub fn contains_point(&self, point: &[i64]) -> bool {
        let val = |i: usize| if i == 0 { 0 } else { point[i - 1] };
        for i in 0..self.dim {
            for j in 0..self.dim {
                match self.at(i, j) {
                    Bound::Inf => {}
                    Bound::B(b, strict) => {
                        let d = val(i) - val(j);
                        if d > b || (d == b && strict) {
                            return false;
                        }
                    }
                }
            }
        }
        true
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bounds_order_strictness_correctly() {
        assert!(Bound::lt(3) < Bound::le(3));
        assert!(Bound::le(3) < Bound::lt(4));
        assert!(Bound::le(7) < Bound::Inf);
        assert_eq!(Bound::lt(2).add(Bound::le(5)), Bound::lt(7));
    }

    #[test]
    fn one_clock_delay_window() {
        // constrain(⊤, x ≤ 3) then delay then constrain(x ≤ 3) → 0 ≤ x ≤ 3.
        let mut z = Dbm::zero(1);
        z.constrain(1, 0, Bound::le(3));
        z.up();
        z.constrain(1, 0, Bound::le(3));
        assert!(!z.is_empty());
        assert_eq!(z.at(1, 0), Bound::le(3));
        assert_eq!(z.at(0, 1), Bound::ZERO);
        assert!(z.contains_point(&[0]));
        assert!(z.contains_point(&[3]));
        assert!(!z.contains_point(&[4]));
    }

    #[test]
    fn reset_then_lower_bound_is_empty() {
        let mut z = Dbm::zero(1);
        z.up();
        z.assign(1, 0);
        z.constrain(1, 0, Bound::le(0));
        z.constrain(0, 1, Bound::le(-1)); // x >= 1
        assert!(z.is_empty());
    }

    #[test]
    fn inclusion_and_universe() {
        let zero = Dbm::zero(2);
        let uni = Dbm::universe(2);
        assert!(uni.includes(&zero));
        assert!(!zero.includes(&uni));
        assert!(uni.time_unbounded());
        assert!(!zero.time_unbounded());
    }

    #[test]
    fn extrapolation_drops_large_bounds() {
        let mut z = Dbm::zero(1);
        z.up();
        z.constrain(0, 1, Bound::le(-500)); // x >= 500
        z.extrapolate(&[Some(3)]);
        // The lower bound degrades to x > 3.
        assert_eq!(z.at(0, 1), Bound::lt(-3));
        let mut kept = Dbm::zero(1);
        kept.up();
        kept.constrain(0, 1, Bound::le(-500));
        kept.extrapolate(&[None]);
        assert_eq!(kept.at(0, 1), Bound::le(-500));
    }
}
