//! Linguistic variables, membership evaluation and the possibility/necessity
//! calculus shared by rule blocks and decision matrices.
//!
//! Degrees are plain `f64` values in `[0, 1]`. Conjunction and disjunction are
//! `min` / `max`; the "none of the previous" degree of a set of alternatives is
//! `1 - max(alternatives)`.

use serde::{Deserialize, Serialize};
use std::fmt;

/// Reserved label of the computed "none of the previous" alternative.
pub const NOTP: &str = "NOTP";

/// A truth degree in `[0, 1]`.
pub type Degree = f64;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum FuzzyError {
    #[error("membership function needs at least two points, got {0}")]
    TooFewPoints(usize),
    #[error("membership x values must be finite and strictly increasing (at point {0})")]
    NonIncreasing(usize),
    #[error("membership degree {mu} at point {index} is outside [0, 1]")]
    DegreeOutOfRange { index: usize, mu: f64 },
    #[error("point x = {x} lies outside the variable domain [{lo}, {hi}]")]
    OutsideDomain { x: f64, lo: f64, hi: f64 },
    #[error("variable domain [{0}, {1}] is empty or not finite")]
    BadDomain(f64, f64),
    #[error("variable `{0}` declares no terms")]
    NoTerms(String),
    #[error("duplicate term `{term}` in variable `{variable}`")]
    DuplicateTerm { variable: String, term: String },
    #[error("`NOTP` is computed and cannot be declared as a term of `{0}`")]
    ReservedTerm(String),
}

/// Either an authored term of a variable or the computed NOTP alternative.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(into = "String")]
pub enum Axis {
    Term(String),
    Notp,
}

impl Axis {
    pub fn parse(label: &str) -> Self {
        if label == NOTP {
            Axis::Notp
        } else {
            Axis::Term(label.to_string())
        }
    }

    pub fn label(&self) -> &str {
        match self {
            Axis::Term(t) => t,
            Axis::Notp => NOTP,
        }
    }

    pub fn is_notp(&self) -> bool {
        matches!(self, Axis::Notp)
    }
}

impl From<Axis> for String {
    fn from(a: Axis) -> String {
        a.label().to_string()
    }
}

impl fmt::Display for Axis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

/// Piecewise-linear membership function over strictly increasing x.
///
/// Evaluation interpolates linearly between the bracketing points and clamps
/// to the nearest endpoint outside the point range.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PiecewiseLinear {
    points: Vec<(f64, f64)>,
}

impl PiecewiseLinear {
    pub fn new(points: Vec<(f64, f64)>) -> Result<Self, FuzzyError> {
        if points.len() < 2 {
            return Err(FuzzyError::TooFewPoints(points.len()));
        }
        for (i, &(x, mu)) in points.iter().enumerate() {
            if !x.is_finite() || (i > 0 && x <= points[i - 1].0) {
                return Err(FuzzyError::NonIncreasing(i));
            }
            if !(0.0..=1.0).contains(&mu) {
                return Err(FuzzyError::DegreeOutOfRange { index: i, mu });
            }
        }
        Ok(Self { points })
    }

    /// Trapezoid `(a,0) (b,1) (c,1) (d,0)`.
    pub fn trapezoid(a: f64, b: f64, c: f64, d: f64) -> Result<Self, FuzzyError> {
        Self::new(vec![(a, 0.0), (b, 1.0), (c, 1.0), (d, 0.0)])
    }

    /// Triangle `(a,0) (b,1) (c,0)`.
    pub fn triangle(a: f64, b: f64, c: f64) -> Result<Self, FuzzyError> {
        Self::new(vec![(a, 0.0), (b, 1.0), (c, 0.0)])
    }

    pub fn points(&self) -> &[(f64, f64)] {
        &self.points
    }

    pub fn eval(&self, x: f64) -> Degree {
        let first = self.points[0];
        let last = self.points[self.points.len() - 1];
        if x <= first.0 {
            return first.1;
        }
        if x >= last.0 {
            return last.1;
        }
        // x is strictly inside the range, so some segment brackets it.
        let i = self.points.partition_point(|&(px, _)| px <= x);
        let (x0, y0) = self.points[i - 1];
        let (x1, y1) = self.points[i];
        let mu = y0 + (y1 - y0) * (x - x0) / (x1 - x0);
        mu.clamp(0.0, 1.0)
    }

    /// Largest membership value reached anywhere.
    pub fn peak(&self) -> Degree {
        self.points.iter().map(|p| p.1).fold(0.0, f64::max)
    }

    /// Absolute slope of the steepest segment.
    pub fn max_slope(&self) -> f64 {
        self.points.windows(2).map(|w| ((w[1].1 - w[0].1) / (w[1].0 - w[0].0)).abs()).fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Term {
    pub id: String,
    pub membership: PiecewiseLinear,
}

impl Term {
    pub fn new(id: impl Into<String>, membership: PiecewiseLinear) -> Self {
        Self { id: id.into(), membership }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LinguisticVariable {
    pub id: String,
    pub domain: (f64, f64),
    pub terms: Vec<Term>,
}

impl LinguisticVariable {
    pub fn new(id: impl Into<String>, domain: (f64, f64), terms: Vec<Term>) -> Result<Self, FuzzyError> {
        let id = id.into();
        let (lo, hi) = domain;
        if !(lo.is_finite() && hi.is_finite() && lo < hi) {
            return Err(FuzzyError::BadDomain(lo, hi));
        }
        if terms.is_empty() {
            return Err(FuzzyError::NoTerms(id));
        }
        for (i, t) in terms.iter().enumerate() {
            if t.id == NOTP {
                return Err(FuzzyError::ReservedTerm(id));
            }
            if terms[..i].iter().any(|o| o.id == t.id) {
                return Err(FuzzyError::DuplicateTerm { variable: id, term: t.id.clone() });
            }
            if let Some(&(x, _)) = t.membership.points().iter().find(|(x, _)| *x < lo || *x > hi) {
                return Err(FuzzyError::OutsideDomain { x, lo, hi });
            }
        }
        Ok(Self { id, domain, terms })
    }

    pub fn term(&self, id: &str) -> Option<&Term> {
        self.terms.iter().find(|t| t.id == id)
    }

    /// Terms in declaration order followed by NOTP.
    pub fn axes(&self) -> Vec<Axis> {
        self.terms.iter().map(|t| Axis::Term(t.id.clone())).chain([Axis::Notp]).collect()
    }
}

/// Per-term truth degrees of one variable plus the computed NOTP degree.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DegreeVector {
    pub variable_id: String,
    pub degrees: Vec<(String, Degree)>,
    pub notp: Degree,
}

impl DegreeVector {
    /// Builds a vector from authored degrees; NOTP is derived.
    pub fn from_degrees(variable_id: impl Into<String>, degrees: Vec<(String, Degree)>) -> Self {
        let degrees: Vec<_> = degrees.into_iter().map(|(t, d)| (t, d.clamp(0.0, 1.0))).collect();
        let notp = notp_degree(&degrees.iter().map(|d| d.1).collect::<Vec<_>>());
        Self { variable_id: variable_id.into(), degrees, notp }
    }

    /// Crisp vector of a variable with exactly `axis` at 1.0.
    pub fn one_hot(variable: &LinguisticVariable, axis: &Axis) -> Self {
        let degrees =
            variable.terms.iter().map(|t| (t.id.clone(), if axis.label() == t.id { 1.0 } else { 0.0 })).collect();
        Self::from_degrees(variable.id.clone(), degrees)
    }

    /// Vector with every authored term at 0 (NOTP = 1).
    pub fn silent(variable: &LinguisticVariable) -> Self {
        Self::one_hot(variable, &Axis::Notp)
    }

    pub fn get(&self, term: &str) -> Option<Degree> {
        self.degrees.iter().find(|(t, _)| t == term).map(|d| d.1)
    }

    pub fn axis(&self, axis: &Axis) -> Degree {
        match axis {
            Axis::Notp => self.notp,
            Axis::Term(t) => self.get(t).unwrap_or(0.0),
        }
    }

    pub fn max_term(&self) -> Degree {
        self.degrees.iter().map(|d| d.1).fold(0.0, f64::max)
    }
}

pub fn membership_degree(term: &Term, x: f64) -> Degree {
    term.membership.eval(x)
}

pub fn fuzzify(variable: &LinguisticVariable, x: f64) -> DegreeVector {
    let degrees = variable.terms.iter().map(|t| (t.id.clone(), membership_degree(t, x))).collect();
    DegreeVector::from_degrees(variable.id.clone(), degrees)
}

/// Degree of "none of the previous": `1 - max(degrees)`, and 1 for no alternatives.
pub fn notp_degree(degrees: &[Degree]) -> Degree {
    1.0 - degrees.iter().copied().fold(0.0, combine_max)
}

/// `nec(a) = 1 - pos(not a)`.
pub fn necessity_from(pos_of_negation: Degree) -> Degree {
    1.0 - pos_of_negation
}

pub fn combine_min(a: Degree, b: Degree) -> Degree {
    a.min(b)
}

pub fn combine_max(a: Degree, b: Degree) -> Degree {
    a.max(b)
}

/// Diagnostic for an externally supplied estimate: `nec <= p <= pos`.
pub fn check_consistency_bounds(nec: Degree, p: Degree, pos: Degree) -> bool {
    nec <= p && p <= pos
}

/// Necessity and possibility of one proposition.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PossibilityPair {
    pub nec: Degree,
    pub pos: Degree,
}

impl PossibilityPair {
    /// From `pos(a)` and `pos(not a)`. Returns `None` when the result would
    /// violate `nec <= pos` (the proposition and its negation are both
    /// only partially possible in an incoherent way).
    pub fn from_possibilities(pos_a: Degree, pos_not_a: Degree) -> Option<Self> {
        let nec = necessity_from(pos_not_a);
        (nec <= pos_a).then_some(Self { nec, pos: pos_a })
    }

    /// A crisp truth: necessity and possibility both 1 or both 0.
    pub fn crisp(holds: bool) -> Self {
        let d = if holds { 1.0 } else { 0.0 };
        Self { nec: d, pos: d }
    }

    pub fn admits(&self, p: Degree) -> bool {
        check_consistency_bounds(self.nec, p, self.pos)
    }
}
