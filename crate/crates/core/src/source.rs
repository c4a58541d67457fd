use serde::Serialize;
use std::hash::{Hash, Hasher};

/// 1-based source line of a parsed node; 0 for nodes built in code.
///
/// Locations are bookkeeping only: two nodes that differ only in where they
/// were written compare equal, so a re-parsed serialization equals the
/// original model.
#[derive(Debug, Clone, Copy, Default, Serialize)]
#[serde(transparent)]
pub struct Loc(pub usize);

impl Loc {
    pub fn line(self) -> usize {
        self.0
    }
}

impl PartialEq for Loc {
    fn eq(&self, _: &Self) -> bool {
        true
    }
}

impl Eq for Loc {}

impl Hash for Loc {
    fn hash<H: Hasher>(&self, _: &mut H) {}
}
