//! Fuzzy decision matrices crossing two linguistic variables.
//!
//! Each cell holds the joint action set fired when its row term and column
//! term (either of which may be NOTP) are both possible. A cell's score is the
//! `min` of the two input degrees; every cell at or above the firing threshold
//! contributes its actions.

use crate::fuzzy::{combine_min, Axis, Degree, DegreeVector};
use crate::script::Fact;
use crate::source::Loc;
use serde::Serialize;
use std::fmt;

/// Default firing threshold for matrix cells and rules.
pub const DEFAULT_THETA: Degree = 0.5;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum MatrixError {
    #[error("matrix `{matrix}` expects variable `{expected}` but got a vector for `{got}`")]
    VariableMismatch { matrix: String, expected: String, got: String },
}

/// Ordered set of action ids; insertion order is kept, duplicates are dropped.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
#[serde(transparent)]
pub struct ActionSet(Vec<String>);

impl ActionSet {
    pub fn new() -> Self {
        Self(Vec::new())
    }

    pub fn insert(&mut self, id: impl Into<String>) {
        let id = id.into();
        if !self.0.contains(&id) {
            self.0.push(id);
        }
    }

    pub fn contains(&self, id: &str) -> bool {
        self.0.iter().any(|a| a == id)
    }

    pub fn extend(&mut self, other: &ActionSet) {
        for a in &other.0 {
            self.insert(a.clone());
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = &str> {
        self.0.iter().map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Replaces `id` in place by the members of `with`.
    fn replace(&mut self, id: &str, with: &ActionSet) {
        let Some(pos) = self.0.iter().position(|a| a == id) else { return };
        self.0.remove(pos);
        let mut at = pos;
        for a in &with.0 {
            if !self.0.contains(a) {
                self.0.insert(at, a.clone());
                at += 1;
            }
        }
    }

    pub fn sorted(&self) -> Vec<String> {
        let mut v = self.0.clone();
        v.sort();
        v
    }
}

impl<S: Into<String>> FromIterator<S> for ActionSet {
    fn from_iter<I: IntoIterator<Item = S>>(iter: I) -> Self {
        let mut set = ActionSet::new();
        for a in iter {
            set.insert(a);
        }
        set
    }
}

impl fmt::Display for ActionSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0.join(" & "))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MatrixRow {
    pub label: Axis,
    pub cells: Vec<ActionSet>,
    pub loc: Loc,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DecisionMatrix {
    pub id: String,
    pub row_variable: String,
    pub col_variable: String,
    pub columns: Vec<Axis>,
    pub rows: Vec<MatrixRow>,
}

impl DecisionMatrix {
    pub fn cell(&self, row: &Axis, col: &Axis) -> Option<&ActionSet> {
        let c = self.columns.iter().position(|a| a == col)?;
        self.rows.iter().find(|r| &r.label == row)?.cells.get(c)
    }

    /// Every `(row, col, actions)` present, row-major in declaration order.
    pub fn cells(&self) -> impl Iterator<Item = (&Axis, &Axis, &ActionSet)> {
        self.rows
            .iter()
            .flat_map(move |r| r.cells.iter().zip(&self.columns).map(move |(set, col)| (&r.label, col, set)))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScoredCell {
    pub row_term: Axis,
    pub col_term: Axis,
    pub score: Degree,
    pub actions: ActionSet,
}

/// Two actions that must not happen together, optionally only while `when` holds.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IncompatibilityDecl {
    /// When both members co-fire, the override replaces the second one.
    pub pair: (String, String),
    pub when: Option<Fact>,
    pub override_set: Option<ActionSet>,
    pub comments: Vec<String>,
    pub loc: Loc,
}

impl IncompatibilityDecl {
    pub fn new(a: impl Into<String>, b: impl Into<String>) -> Self {
        Self { pair: (a.into(), b.into()), when: None, override_set: None, comments: Vec::new(), loc: Loc::default() }
    }

    pub fn with_override(mut self, set: ActionSet) -> Self {
        self.override_set = Some(set);
        self
    }

    fn hits(&self, set: &ActionSet) -> bool {
        set.contains(&self.pair.0) && set.contains(&self.pair.1)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IncompatFinding {
    pub matrix_id: String,
    pub cell: (Axis, Axis),
    /// Set when the conflict only appears in the union with another cell.
    pub cofires_with: Option<(Axis, Axis)>,
    pub pair: (String, String),
    /// The declaration is conditional on a world predicate.
    pub conditional: bool,
    pub loc: Loc,
}

pub fn evaluate_matrix(
    matrix: &DecisionMatrix,
    row: &DegreeVector,
    col: &DegreeVector,
) -> Result<Vec<ScoredCell>, MatrixError> {
    for (expected, got) in [(&matrix.row_variable, &row.variable_id), (&matrix.col_variable, &col.variable_id)] {
        if expected != got {
            return Err(MatrixError::VariableMismatch {
                matrix: matrix.id.clone(),
                expected: expected.clone(),
                got: got.clone(),
            });
        }
    }
    Ok(matrix
        .cells()
        .map(|(r, c, actions)| ScoredCell {
            row_term: r.clone(),
            col_term: c.clone(),
            score: combine_min(row.axis(r), col.axis(c)),
            actions: actions.clone(),
        })
        .collect())
}

/// Union, in row-major order, of every cell scoring at least `theta`.
pub fn select_actions(cells: &[ScoredCell], theta: Degree) -> ActionSet {
    let mut out = ActionSet::new();
    for cell in cells.iter().filter(|c| c.score >= theta) {
        out.extend(&cell.actions);
    }
    out
}

/// Applies every declared override whose pair is present in `set`.
///
/// `when_holds` decides conditional declarations; pass `|_| true` for the
/// conservative reading used without a world state.
pub fn apply_overrides(
    set: &ActionSet,
    decls: &[IncompatibilityDecl],
    when_holds: impl Fn(&Fact) -> bool,
) -> ActionSet {
    let mut out = set.clone();
    for decl in decls {
        let Some(with) = &decl.override_set else { continue };
        if decl.when.as_ref().is_none_or(&when_holds) && decl.hits(&out) {
            out.replace(&decl.pair.1, with);
        }
    }
    out
}

/// The matrix with every cell passed through [`apply_overrides`].
pub fn apply_matrix_overrides(matrix: &DecisionMatrix, decls: &[IncompatibilityDecl]) -> DecisionMatrix {
    let mut m = matrix.clone();
    for row in &mut m.rows {
        for cell in &mut row.cells {
            *cell = apply_overrides(cell, decls, |_| true);
        }
    }
    m
}

/// Reports matrix configurations that can fire both members of a declared
/// incompatible pair with no override to resolve them.
///
/// A cell whose own set holds the pair is reported directly. Otherwise any two
/// cells are assumed able to co-fire, and the first such pair whose union
/// holds the declared pair yields one finding for the declaration.
pub fn detect_incompatibilities(matrix: &DecisionMatrix, decls: &[IncompatibilityDecl]) -> Vec<IncompatFinding> {
    let cells: Vec<_> = matrix.cells().collect();
    let mut findings = Vec::new();
    for decl in decls.iter().filter(|d| d.override_set.is_none()) {
        let finding = |cell: (&Axis, &Axis), other: Option<(&Axis, &Axis)>| IncompatFinding {
            matrix_id: matrix.id.clone(),
            cell: (cell.0.clone(), cell.1.clone()),
            cofires_with: other.map(|(r, c)| (r.clone(), c.clone())),
            pair: decl.pair.clone(),
            conditional: decl.when.is_some(),
            loc: decl.loc,
        };
        let before = findings.len();
        for &(r, c, set) in &cells {
            if decl.hits(set) {
                findings.push(finding((r, c), None));
            }
        }
        if findings.len() > before {
            continue;
        }
        'pairs: for (i, &(r1, c1, s1)) in cells.iter().enumerate() {
            for &(r2, c2, s2) in &cells[i + 1..] {
                let mut union = s1.clone();
                union.extend(s2);
                if decl.hits(&union) {
                    findings.push(finding((r1, c1), Some((r2, c2))));
                    break 'pairs;
                }
            }
        }
    }
    findings
}
