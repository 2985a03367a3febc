//! MITL formula trees over location-label propositions, with the interval
//! syntax of the logic and helpers for the fragment handled by the checker.

use std::fmt;

use num::Zero;
use thiserror::Error;

use crate::rational::{format_rational, Rational};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum MitlError {
    #[error("singleton interval [{0},{0}] is not allowed")]
    SingletonInterval(String),
    #[error("empty interval")]
    EmptyInterval,
    #[error("negative interval bound")]
    NegativeBound,
    #[error("formula outside the supported fragment: {0}")]
    UnsupportedFragment(String),
}

/// A non-singleton interval `[a,b]`, `(a,b)`, `[a,inf)`, …; `hi == None`
/// means unbounded.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Interval {
    pub lo: Rational,
    pub lo_strict: bool,
    pub hi: Option<Rational>,
    pub hi_strict: bool,
}

impl Interval {
    pub fn new(
        lo: Rational,
        lo_strict: bool,
        hi: Option<Rational>,
        hi_strict: bool,
    ) -> Result<Self, MitlError> {
        if lo < Rational::zero() {
            return Err(MitlError::NegativeBound);
        }
        if let Some(h) = &hi {
            if h < &lo || (h == &lo && (lo_strict || hi_strict)) {
                return Err(MitlError::EmptyInterval);
            }
            if h == &lo {
                return Err(MitlError::SingletonInterval(format_rational(&lo)));
            }
        }
        Ok(Interval { lo, lo_strict, hi, hi_strict })
    }

    pub fn full() -> Self {
        Interval { lo: Rational::zero(), lo_strict: false, hi: None, hi_strict: true }
    }

    pub fn is_full(&self) -> bool {
        self.lo.is_zero() && !self.lo_strict && self.hi.is_none()
    }

    pub fn contains(&self, t: &Rational) -> bool {
        let lower = if self.lo_strict { t > &self.lo } else { t >= &self.lo };
        let upper = match &self.hi {
            None => true,
            Some(h) => {
                if self.hi_strict {
                    t < h
                } else {
                    t <= h
                }
            }
        };
        lower && upper
    }

    /// True iff the closed dwell segment `[s, e]` contains a point of the
    /// interval; `e == None` means the segment extends forever. A state
    /// occupied for zero time (`s == e`) is still observed at that instant.
    pub fn meets_segment(&self, s: &Rational, e: Option<&Rational>) -> bool {
        // Greatest lower bound over: t >= s, t >=(>) lo.
        let mut lo = *s;
        let mut lo_strict = false;
        if self.lo > lo || (self.lo == lo && self.lo_strict) {
            lo = self.lo;
            lo_strict = self.lo_strict;
        }
        // Least upper bound over: t <= e, t <=(<) hi.
        let mut hi: Option<(Rational, bool)> = e.map(|e| (*e, false));
        if let Some(h) = &self.hi {
            let cand = (*h, self.hi_strict);
            hi = Some(match hi {
                None => cand,
                Some(cur) => {
                    if cand.0 < cur.0 || (cand.0 == cur.0 && cand.1) {
                        cand
                    } else {
                        cur
                    }
                }
            });
        }
        match hi {
            None => true,
            Some((h, h_strict)) => lo < h || (lo == h && !lo_strict && !h_strict),
        }
    }
}

impl fmt::Display for Interval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let open = if self.lo_strict { "(" } else { "[" };
        match &self.hi {
            None => write!(f, "{}{},inf)", open, format_rational(&self.lo)),
            Some(h) => {
                let close = if self.hi_strict { ")" } else { "]" };
                write!(f, "{}{},{}{}", open, format_rational(&self.lo), format_rational(h), close)
            }
        }
    }
}

/// MITL syntax tree. `Until` is parsed for completeness; evaluation and
/// checking support boolean combinations of propositions closed under
/// top-level `G_I` and `F_I`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum MitlFormula {
    Prop(String),
    Not(Box<MitlFormula>),
    And(Box<MitlFormula>, Box<MitlFormula>),
    Or(Box<MitlFormula>, Box<MitlFormula>),
    Globally(Interval, Box<MitlFormula>),
    Eventually(Interval, Box<MitlFormula>),
    Until(Interval, Box<MitlFormula>, Box<MitlFormula>),
}

impl MitlFormula {
    pub fn not(self) -> MitlFormula {
        MitlFormula::Not(Box::new(self))
    }

    pub fn props(&self) -> Vec<&str> {
        let mut out = Vec::new();
        self.collect_props(&mut out);
        out
    }

    fn collect_props<'a>(&'a self, out: &mut Vec<&'a str>) {
        match self {
            MitlFormula::Prop(p) => out.push(p),
            MitlFormula::Not(f) => f.collect_props(out),
            MitlFormula::And(a, b) | MitlFormula::Or(a, b) => {
                a.collect_props(out);
                b.collect_props(out);
            }
            MitlFormula::Globally(_, f) | MitlFormula::Eventually(_, f) => f.collect_props(out),
            MitlFormula::Until(_, a, b) => {
                a.collect_props(out);
                b.collect_props(out);
            }
        }
    }

    /// True iff the formula is a pure boolean combination of propositions.
    pub fn is_boolean(&self) -> bool {
        match self {
            MitlFormula::Prop(_) => true,
            MitlFormula::Not(f) => f.is_boolean(),
            MitlFormula::And(a, b) | MitlFormula::Or(a, b) => a.is_boolean() && b.is_boolean(),
            _ => false,
        }
    }

    /// Evaluates a boolean combination against a set of labels.
    pub fn eval_boolean(&self, labels: &[String]) -> Option<bool> {
        match self {
            MitlFormula::Prop(p) => Some(labels.iter().any(|l| l == p)),
            MitlFormula::Not(f) => f.eval_boolean(labels).map(|b| !b),
            MitlFormula::And(a, b) => Some(a.eval_boolean(labels)? && b.eval_boolean(labels)?),
            MitlFormula::Or(a, b) => Some(a.eval_boolean(labels)? || b.eval_boolean(labels)?),
            _ => None,
        }
    }
}

impl fmt::Display for MitlFormula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MitlFormula::Prop(p) => write!(f, "{p}"),
            MitlFormula::Not(inner) => write!(f, "!{}", Paren(inner)),
            MitlFormula::And(a, b) => write!(f, "{} && {}", Paren(a), Paren(b)),
            MitlFormula::Or(a, b) => write!(f, "{} || {}", Paren(a), Paren(b)),
            MitlFormula::Globally(i, inner) => {
                if i.is_full() {
                    write!(f, "G {}", Paren(inner))
                } else {
                    write!(f, "G{} {}", i, Paren(inner))
                }
            }
            MitlFormula::Eventually(i, inner) => {
                if i.is_full() {
                    write!(f, "F {}", Paren(inner))
                } else {
                    write!(f, "F{} {}", i, Paren(inner))
                }
            }
            MitlFormula::Until(i, a, b) => {
                if i.is_full() {
                    write!(f, "{} U {}", Paren(a), Paren(b))
                } else {
                    write!(f, "{} U{} {}", Paren(a), i, Paren(b))
                }
            }
        }
    }
}

struct Paren<'a>(&'a MitlFormula);

impl fmt::Display for Paren<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.0 {
            MitlFormula::Prop(_) | MitlFormula::Not(_) => write!(f, "{}", self.0),
            _ => write!(f, "({})", self.0),
        }
    }
}
