//! The `.drama` script language: model, parser, canonical serializer and
//! validator.

mod error;
mod lines;
mod model;
mod parser;
mod serialize;
mod validate;

pub use error::{ParseError, ParseErrorKind};
pub use lines::INDENT;
pub use model::*;
pub use parser::parse_script;
pub use serialize::canonical_serialize;
pub use validate::{
    validate_script, validate_with, Finding, FindingCode, Severity, ValidationReport, DEFAULT_PARTICIPANT,
};

use std::collections::HashSet;
use std::path::{Path, PathBuf};

#[derive(Debug, thiserror::Error)]
pub enum LoadError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}: {source}")]
    Parse { path: PathBuf, source: ParseError },
    #[error("{path}: import cycle through `{import}`")]
    Cycle { path: PathBuf, import: String },
    #[error("{path}: `{id}` is declared both here and in an imported file")]
    Duplicate { path: PathBuf, id: String },
}

/// Reads a script file and merges in everything it imports.
pub fn load_script(path: impl AsRef<Path>) -> Result<ScriptDoc, LoadError> {
    let mut stack = HashSet::new();
    load_inner(path.as_ref(), &mut stack)
}

fn load_inner(path: &Path, stack: &mut HashSet<PathBuf>) -> Result<ScriptDoc, LoadError> {
    let text = std::fs::read_to_string(path).map_err(|source| LoadError::Io { path: path.to_path_buf(), source })?;
    let mut doc = parse_script(&text).map_err(|source| LoadError::Parse { path: path.to_path_buf(), source })?;
    let key = path.canonicalize().unwrap_or_else(|_| path.to_path_buf());
    stack.insert(key.clone());
    let base = path.parent().unwrap_or(Path::new("."));
    for import in std::mem::take(&mut doc.imports) {
        let target = base.join(&import.path);
        let tkey = target.canonicalize().unwrap_or_else(|_| target.clone());
        if stack.contains(&tkey) {
            return Err(LoadError::Cycle { path: path.to_path_buf(), import: import.path });
        }
        let sub = load_inner(&target, stack)?;
        merge(&mut doc, sub).map_err(|id| LoadError::Duplicate { path: path.to_path_buf(), id })?;
    }
    stack.remove(&key);
    Ok(doc)
}

/// Appends `sub`'s declarations after the importing document's own.
fn merge(doc: &mut ScriptDoc, sub: ScriptDoc) -> Result<(), String> {
    fn dup<T>(mine: &[T], theirs: &[T], id: impl Fn(&T) -> &str) -> Option<String> {
        theirs.iter().map(&id).find(|t| mine.iter().any(|m| id(m) == *t)).map(str::to_string)
    }
    let checks = [
        dup(&doc.actions, &sub.actions, |a| &a.id),
        dup(&doc.variables, &sub.variables, |v| &v.variable.id),
        dup(&doc.intents, &sub.intents, |i| &i.intent.id),
        dup(&doc.matrices, &sub.matrices, |m| &m.matrix.id),
        dup(&doc.scenes, &sub.scenes, |s| &s.id),
        dup(&doc.world.characters, &sub.world.characters, |c| &c.id),
        dup(&doc.world.props, &sub.world.props, |p| &p.id),
    ];
    if let Some(id) = checks.into_iter().flatten().next() {
        return Err(id);
    }
    if doc.title.is_empty() {
        doc.title = sub.title;
    }
    doc.world.characters.extend(sub.world.characters);
    doc.world.props.extend(sub.world.props);
    doc.world.facts.extend(sub.world.facts);
    doc.actions.extend(sub.actions);
    doc.variables.extend(sub.variables);
    doc.intents.extend(sub.intents);
    doc.matrices.extend(sub.matrices);
    doc.incompatibilities.extend(sub.incompatibilities);
    doc.agents.goals.extend(sub.agents.goals);
    doc.agents.modules.extend(sub.agents.modules);
    doc.scenes.extend(sub.scenes);
    Ok(())
}
