use super::error::{ParseError, ParseErrorKind as K};
use super::lines::{preprocess, tokenize, Line, Tok};
use super::model::*;
use crate::fuzzy::{Axis, LinguisticVariable, PiecewiseLinear, Term, NOTP};
use crate::intent::{normalize, Intent};
use crate::matrix::{ActionSet, DecisionMatrix, IncompatibilityDecl, MatrixRow};
use crate::source::Loc;
use std::collections::HashSet;

pub fn parse_script(source: &str) -> Result<ScriptDoc, ParseError> {
    let pre = preprocess(source)?;
    let mut p = Parser { lines: pre.lines, pos: 0, doc: ScriptDoc::default() };
    p.doc.comments = pre.leading;
    p.parse_document()?;
    Ok(p.doc)
}

struct Parser {
    lines: Vec<Line>,
    pos: usize,
    doc: ScriptDoc,
}

fn err(kind: K, line: &Line, msg: impl Into<String>) -> ParseError {
    ParseError::new(kind, line.no, line.level * super::lines::INDENT + 1, msg)
}

fn is_label(s: &str) -> bool {
    !s.is_empty() && s.chars().all(|c| c.is_alphanumeric() || matches!(c, '-' | '_' | '.'))
}

fn label(line: &Line, s: &str, what: &str) -> Result<String, ParseError> {
    if is_label(s) && s != NOTP {
        Ok(s.to_string())
    } else {
        Err(err(K::Malformed, line, format!("invalid {what} `{s}`")))
    }
}

fn number<T: std::str::FromStr>(line: &Line, s: &str, what: &str) -> Result<T, ParseError> {
    s.parse().map_err(|_| err(K::Malformed, line, format!("invalid {what} `{s}`")))
}

fn first_word(text: &str) -> &str {
    text.split_whitespace().next().unwrap_or("")
}

fn rest_after_keyword(text: &str) -> &str {
    text.trim_start().split_once(char::is_whitespace).map_or("", |(_, r)| r.trim())
}

fn check_unique<'a>(seen: &mut HashSet<String>, id: &'a str, line: &Line, what: &str) -> Result<&'a str, ParseError> {
    if seen.insert(id.to_string()) {
        Ok(id)
    } else {
        Err(err(K::DuplicateId, line, format!("duplicate {what} `{id}`")))
    }
}

/// `subject.predicate = value` from a token slice.
fn fact_from(line: &Line, toks: &[Tok]) -> Result<Fact, ParseError> {
    match toks {
        [Tok::Word(sp), Tok::Eq, Tok::Word(v)] => {
            let (s, p) = sp
                .split_once('.')
                .ok_or_else(|| err(K::Malformed, line, format!("fact `{sp}` must be written subject.predicate")))?;
            Ok(Fact::new(
                label(line, s, "fact subject")?,
                label(line, p, "fact predicate")?,
                Value::parse(&label(line, v, "fact value")?),
            ))
        }
        _ => Err(err(K::Malformed, line, "expected a fact `subject.predicate = value`")),
    }
}

fn fact_list(line: &Line, toks: &[Tok]) -> Result<Vec<Fact>, ParseError> {
    toks.split(|t| *t == Tok::Comma).map(|part| fact_from(line, part)).collect()
}

fn proposition(line: &Line, toks: &[Tok]) -> Result<Proposition, ParseError> {
    match toks {
        [Tok::Word(w)] if !w.contains('.') => Ok(Proposition::Label(label(line, w, "proposition")?)),
        _ => Ok(Proposition::Fact(fact_from(line, toks)?)),
    }
}

fn action_set(line: &Line, text: &str) -> Result<ActionSet, ParseError> {
    let mut set = ActionSet::new();
    for id in text.split('&').map(str::trim) {
        set.insert(label(line, id, "action id")?);
    }
    Ok(set)
}

/// Splits tokens at the given keywords, returning the leading segment and
/// `(keyword, segment)` pairs in order.
fn split_clauses<'a>(toks: &'a [Tok], keywords: &[&str]) -> (&'a [Tok], Vec<(String, &'a [Tok])>) {
    let mut cuts: Vec<usize> = toks
        .iter()
        .enumerate()
        .filter(|(_, t)| t.word().is_some_and(|w| keywords.contains(&w)))
        .map(|(i, _)| i)
        .collect();
    cuts.push(toks.len());
    let head = &toks[..cuts[0]];
    let clauses =
        cuts.windows(2).map(|w| (toks[w[0]].word().unwrap_or_default().to_string(), &toks[w[0] + 1..w[1]])).collect();
    (head, clauses)
}

impl Parser {
    fn peek(&self) -> Option<&Line> {
        self.lines.get(self.pos)
    }

    fn next(&mut self) -> Line {
        let l = self.lines[self.pos].clone();
        self.pos += 1;
        l
    }

    /// Consumes the body lines at `level`, rejecting anything indented deeper.
    fn body(&mut self, level: usize) -> Result<Vec<Line>, ParseError> {
        let mut out = Vec::new();
        while let Some(l) = self.peek() {
            if l.level < level {
                break;
            }
            if l.level > level {
                return Err(err(K::DanglingIndentation, l, "line is indented deeper than its context allows"));
            }
            out.push(self.next());
        }
        Ok(out)
    }

    fn parse_document(&mut self) -> Result<(), ParseError> {
        let mut seen = Seen::default();
        while let Some(line) = self.peek() {
            if line.level != 0 {
                return Err(err(K::DanglingIndentation, line, "expected a section header at column 1"));
            }
            let line = self.next();
            match first_word(&line.text) {
                "TITLE" => {
                    let toks = tokenize(rest_after_keyword(&line.text), line.no)?;
                    match toks.as_slice() {
                        [Tok::Str(s)] => self.doc.title = s.clone(),
                        _ => return Err(err(K::Malformed, &line, "expected TITLE \"text\"")),
                    }
                    self.doc.comments.extend(line.comments);
                }
                "IMPORT" => {
                    let toks = tokenize(rest_after_keyword(&line.text), line.no)?;
                    match toks.as_slice() {
                        [Tok::Str(s)] => self.doc.imports.push(Import {
                            path: s.clone(),
                            comments: line.comments,
                            loc: Loc(line.no),
                        }),
                        _ => return Err(err(K::Malformed, &line, "expected IMPORT \"path\"")),
                    }
                }
                "WORLD" => {
                    self.expect_bare(&line)?;
                    self.doc.comments.extend(line.comments.iter().cloned());
                    for l in self.body(1)? {
                        self.world_line(&l, &mut seen)?;
                    }
                }
                "ACTIONS" => {
                    self.expect_bare(&line)?;
                    self.doc.comments.extend(line.comments.iter().cloned());
                    for l in self.body(1)? {
                        let a = self.action_line(&l)?;
                        check_unique(&mut seen.actions, &a.id, &l, "action")?;
                        self.doc.actions.push(a);
                    }
                }
                "VARS" => {
                    self.expect_bare(&line)?;
                    self.doc.comments.extend(line.comments.iter().cloned());
                    self.vars_section(&mut seen)?;
                }
                "LEXICON" => {
                    self.expect_bare(&line)?;
                    self.doc.comments.extend(line.comments.iter().cloned());
                    self.lexicon_section(&mut seen)?;
                }
                "MATRIX" => self.matrix_section(line, &mut seen)?,
                "INCOMPAT" => {
                    let decl = self.incompat_line(&line)?;
                    self.doc.incompatibilities.push(decl);
                }
                "AGENTS" => {
                    self.expect_bare(&line)?;
                    self.doc.comments.extend(line.comments.iter().cloned());
                    for l in self.body(1)? {
                        self.agent_line(&l, &mut seen)?;
                    }
                }
                "SCENE" => {
                    let scene = self.scene(line, &mut seen)?;
                    self.doc.scenes.push(scene);
                }
                other => return Err(err(K::UnknownKeyword, &line, format!("unknown section `{other}`"))),
            }
        }
        Ok(())
    }

    fn expect_bare(&self, line: &Line) -> Result<(), ParseError> {
        if rest_after_keyword(&line.text).is_empty() {
            Ok(())
        } else {
            Err(err(K::Malformed, line, format!("`{}` takes no arguments", first_word(&line.text))))
        }
    }

    fn world_line(&mut self, l: &Line, seen: &mut Seen) -> Result<(), ParseError> {
        let toks = tokenize(&l.text, l.no)?;
        let words: Vec<&str> = toks.iter().filter_map(Tok::word).collect();
        match words.first().copied() {
            Some("CHARACTER") => {
                if words.len() != toks.len() {
                    return Err(err(K::Malformed, l, "CHARACTER takes plain words only"));
                }
                let id = label(l, words.get(1).copied().unwrap_or(""), "character id")?;
                check_unique(&mut seen.entities, &id, l, "entity")?;
                let mut c = CharacterDecl {
                    id,
                    participant: false,
                    on_stage: true,
                    zone: None,
                    comments: l.comments.clone(),
                    loc: Loc(l.no),
                };
                let mut i = 2;
                while i < words.len() {
                    match words[i] {
                        "PARTICIPANT" => c.participant = true,
                        "OFFSTAGE" => c.on_stage = false,
                        "AT" => {
                            i += 1;
                            c.zone = Some(label(l, words.get(i).copied().unwrap_or(""), "zone")?);
                        }
                        w => return Err(err(K::UnknownKeyword, l, format!("unknown CHARACTER option `{w}`"))),
                    }
                    i += 1;
                }
                if c.participant && !c.on_stage {
                    return Err(err(K::Malformed, l, "the participant is always on stage"));
                }
                if c.participant && self.doc.participant().is_some() {
                    return Err(err(K::DuplicateId, l, "only one PARTICIPANT may be declared"));
                }
                self.doc.world.characters.push(c);
            }
            Some("PROP") => {
                let id = match toks.as_slice() {
                    [_, Tok::Word(id)] => label(l, id, "prop id")?,
                    _ => return Err(err(K::Malformed, l, "expected PROP id")),
                };
                check_unique(&mut seen.entities, &id, l, "entity")?;
                self.doc.world.props.push(PropDecl { id, comments: l.comments.clone(), loc: Loc(l.no) });
            }
            Some("FACT") => {
                let fact = fact_from(l, &toks[1..])?;
                self.doc.world.facts.push(FactDecl { fact, comments: l.comments.clone(), loc: Loc(l.no) });
            }
            _ => return Err(err(K::UnknownKeyword, l, format!("unknown WORLD entry `{}`", first_word(&l.text)))),
        }
        Ok(())
    }

    fn action_line(&self, l: &Line) -> Result<ActionDef, ParseError> {
        let toks = tokenize(&l.text, l.no)?;
        let (head, clauses) = split_clauses(&toks, &["REQUIRES", "EFFECT"]);
        let mut a = match head {
            [Tok::Word(id), Tok::Word(by), Tok::Word(performer), Tok::Str(desc)] if by == "BY" => {
                ActionDef::new(label(l, id, "action id")?, label(l, performer, "performer")?, desc.clone())
            }
            _ => return Err(err(K::Malformed, l, "expected `<id> BY <performer> \"description\"`")),
        };
        for (kw, body) in clauses {
            let facts = fact_list(l, body)?;
            match kw.as_str() {
                "REQUIRES" => a.preconditions.extend(facts),
                _ => a.effects.extend(facts),
            }
        }
        a.comments = l.comments.clone();
        a.loc = Loc(l.no);
        Ok(a)
    }

    fn vars_section(&mut self, seen: &mut Seen) -> Result<(), ParseError> {
        while let Some(l) = self.peek() {
            if l.level == 0 {
                break;
            }
            if l.level > 1 {
                return Err(err(K::DanglingIndentation, l, "TERM lines must follow a VAR"));
            }
            let l = self.next();
            let toks = tokenize(&l.text, l.no)?;
            let (id, description, lo, hi) = match toks.as_slice() {
                [Tok::Word(v), Tok::Word(id), Tok::Word(d), Tok::Word(lo), Tok::Word(hi)]
                    if v == "VAR" && d == "DOMAIN" =>
                {
                    (id, None, lo, hi)
                }
                [Tok::Word(v), Tok::Word(id), Tok::Str(desc), Tok::Word(d), Tok::Word(lo), Tok::Word(hi)]
                    if v == "VAR" && d == "DOMAIN" =>
                {
                    (id, Some(desc.clone()), lo, hi)
                }
                _ => return Err(err(K::Malformed, &l, "expected `VAR <id> [\"description\"] DOMAIN <lo> <hi>`")),
            };
            let id = label(&l, id, "variable id")?;
            check_unique(&mut seen.variables, &id, &l, "variable")?;
            let domain = (number(&l, lo, "domain bound")?, number(&l, hi, "domain bound")?);
            let mut comments = l.comments.clone();
            let mut terms = Vec::new();
            for t in self.body(2)? {
                comments.extend(t.comments.iter().cloned());
                let words: Vec<&str> = t.text.split_whitespace().collect();
                if words.first() != Some(&"TERM") || words.len() < 4 {
                    return Err(err(K::Malformed, &t, "expected `TERM <id> <x>:<mu> <x>:<mu> ...`"));
                }
                let mut points = Vec::new();
                for p in &words[2..] {
                    let (x, mu) =
                        p.split_once(':').ok_or_else(|| err(K::Malformed, &t, format!("point `{p}` must be x:mu")))?;
                    points.push((number(&t, x, "x")?, number(&t, mu, "membership")?));
                }
                let membership = PiecewiseLinear::new(points).map_err(|e| err(K::Malformed, &t, e.to_string()))?;
                terms.push(Term::new(label(&t, words[1], "term id")?, membership));
            }
            let variable = LinguisticVariable::new(id, domain, terms).map_err(|e| {
                let kind = if matches!(e, crate::fuzzy::FuzzyError::DuplicateTerm { .. }) {
                    K::DuplicateId
                } else {
                    K::Malformed
                };
                err(kind, &l, e.to_string())
            })?;
            self.doc.variables.push(VarDecl { variable, description, comments, loc: Loc(l.no) });
        }
        Ok(())
    }

    fn lexicon_section(&mut self, seen: &mut Seen) -> Result<(), ParseError> {
        while let Some(l) = self.peek() {
            if l.level == 0 {
                break;
            }
            if l.level > 1 {
                return Err(err(K::DanglingIndentation, l, "phrases must follow an INTENT"));
            }
            let l = self.next();
            let toks = tokenize(&l.text, l.no)?;
            let id = match toks.as_slice() {
                [Tok::Word(k), Tok::Word(id)] if k == "INTENT" => label(&l, id, "intent id")?,
                _ => return Err(err(K::Malformed, &l, "expected `INTENT <id>`")),
            };
            check_unique(&mut seen.intents, &id, &l, "intent")?;
            let mut intent = Intent::new(id, Vec::new(), Vec::new());
            let mut comments = l.comments.clone();
            for b in self.body(2)? {
                comments.extend(b.comments.iter().cloned());
                let toks = tokenize(&b.text, b.no)?;
                match toks.as_slice() {
                    [Tok::Str(phrase)] => {
                        if normalize(phrase).is_empty() {
                            return Err(err(K::Malformed, &b, "phrase is empty after normalization"));
                        }
                        intent.phrases.push(phrase.clone());
                    }
                    [Tok::Word(k), rest @ ..] if k == "SYN" && rest.len() >= 2 => {
                        let group = rest
                            .iter()
                            .map(|t| {
                                t.word()
                                    .map(str::to_lowercase)
                                    .ok_or_else(|| err(K::Malformed, &b, "SYN takes plain words"))
                            })
                            .collect::<Result<Vec<_>, _>>()?;
                        intent.synonym_groups.push(group);
                    }
                    _ => return Err(err(K::Malformed, &b, "expected a quoted phrase or `SYN <word> <word> ...`")),
                }
            }
            if intent.phrases.is_empty() {
                return Err(err(K::Malformed, &l, format!("intent `{}` has no phrases", intent.id)));
            }
            self.doc.intents.push(IntentDecl { intent, comments, loc: Loc(l.no) });
        }
        Ok(())
    }

    fn matrix_section(&mut self, line: Line, seen: &mut Seen) -> Result<(), ParseError> {
        let words: Vec<&str> = line.text.split_whitespace().collect();
        let (id, row_variable, col_variable) = match words.as_slice() {
            ["MATRIX", id, row, "BY", col] => {
                (label(&line, id, "matrix id")?, label(&line, row, "variable id")?, label(&line, col, "variable id")?)
            }
            _ => return Err(err(K::Malformed, &line, "expected `MATRIX <id> <row-variable> BY <col-variable>`")),
        };
        check_unique(&mut seen.matrices, &id, &line, "matrix")?;
        let mut comments = line.comments.clone();
        let mut columns: Option<Vec<Axis>> = None;
        let mut rows: Vec<MatrixRow> = Vec::new();
        for b in self.body(1)? {
            comments.extend(b.comments.iter().cloned());
            if first_word(&b.text) == "COLS" {
                if columns.is_some() {
                    return Err(err(K::DuplicateId, &b, "COLS given twice"));
                }
                let cols: Vec<Axis> = rest_after_keyword(&b.text).split('|').map(|c| Axis::parse(c.trim())).collect();
                for (i, c) in cols.iter().enumerate() {
                    if !is_label(c.label()) {
                        return Err(err(K::Malformed, &b, format!("invalid column `{c}`")));
                    }
                    if cols[..i].contains(c) {
                        return Err(err(K::DuplicateId, &b, format!("duplicate column `{c}`")));
                    }
                }
                columns = Some(cols);
                continue;
            }
            let cols = columns.as_ref().ok_or_else(|| err(K::Malformed, &b, "matrix rows must follow a COLS line"))?;
            let (head, cells) = b
                .text
                .split_once(':')
                .ok_or_else(|| err(K::Malformed, &b, "expected `<row-term>: cell | cell ...`"))?;
            let head = head.trim();
            if !is_label(head) {
                return Err(err(K::Malformed, &b, format!("invalid row `{head}`")));
            }
            let label_axis = Axis::parse(head);
            if rows.iter().any(|r| r.label == label_axis) {
                return Err(err(K::DuplicateId, &b, format!("duplicate row `{head}`")));
            }
            let cells = cells.split('|').map(|c| action_set(&b, c)).collect::<Result<Vec<_>, _>>()?;
            if cells.len() != cols.len() {
                return Err(err(
                    K::Malformed,
                    &b,
                    format!("row has {} cells but COLS lists {}", cells.len(), cols.len()),
                ));
            }
            rows.push(MatrixRow { label: label_axis, cells, loc: Loc(b.no) });
        }
        let columns = columns.ok_or_else(|| err(K::Malformed, &line, "matrix has no COLS line"))?;
        let matrix = DecisionMatrix { id, row_variable, col_variable, columns, rows };
        self.doc.matrices.push(MatrixDecl { matrix, comments, loc: Loc(line.no) });
        Ok(())
    }

    fn incompat_line(&mut self, l: &Line) -> Result<IncompatibilityDecl, ParseError> {
        let toks = tokenize(rest_after_keyword(&l.text), l.no)?;
        let (head, clauses) = split_clauses(&toks, &["WHEN", "OVERRIDE"]);
        let mut decl = match head {
            [Tok::Word(a), Tok::Word(b)] => {
                let (a, b) = (label(l, a, "action id")?, label(l, b, "action id")?);
                if a == b {
                    return Err(err(K::Malformed, l, "an action cannot be incompatible with itself"));
                }
                IncompatibilityDecl::new(a, b)
            }
            _ => {
                return Err(err(K::Malformed, l, "expected `INCOMPAT <action> <action> [WHEN fact] [OVERRIDE a & b]`"))
            }
        };
        for (kw, body) in clauses {
            if kw == "WHEN" {
                decl.when = Some(fact_from(l, body)?);
            } else {
                let words = body.iter().map(|t| t.word().unwrap_or("=")).collect::<Vec<_>>().join(" ");
                decl.override_set = Some(action_set(l, &words)?);
            }
        }
        // lines below an INCOMPAT are not allowed
        self.body(1)?.first().map_or(Ok(()), |b| Err(err(K::DanglingIndentation, b, "unexpected indented line")))?;
        decl.comments = l.comments.clone();
        decl.loc = Loc(l.no);
        Ok(decl)
    }

    fn agent_line(&mut self, l: &Line, seen: &mut Seen) -> Result<(), ParseError> {
        let toks = tokenize(&l.text, l.no)?;
        match first_word(&l.text) {
            "GOAL" => {
                let (head, clauses) = split_clauses(&toks, &["FOR", "ON", "IMPORTANCE", "RELEVANCE"]);
                let id = match head {
                    [_, Tok::Word(id)] => label(l, id, "goal id")?,
                    _ => {
                        return Err(err(
                            K::Malformed,
                            l,
                            "expected `GOAL <id> FOR <character> ON <proposition> IMPORTANCE x RELEVANCE y`",
                        ))
                    }
                };
                check_unique(&mut seen.goals, &id, l, "goal")?;
                let (mut character, mut condition, mut importance, mut relevance) = (None, None, None, None);
                for (kw, body) in clauses {
                    match kw.as_str() {
                        "FOR" => character = Some(single_word(l, body, "character")?),
                        "ON" => condition = Some(proposition(l, body)?),
                        "IMPORTANCE" => importance = Some(unit_number(l, body, "importance")?),
                        _ => relevance = Some(unit_number(l, body, "relevance")?),
                    }
                }
                let missing = |what: &str| err(K::Malformed, l, format!("GOAL is missing {what}"));
                self.doc.agents.goals.push(GoalDecl {
                    id,
                    character: character.ok_or_else(|| missing("FOR"))?,
                    condition: condition.ok_or_else(|| missing("ON"))?,
                    importance: importance.ok_or_else(|| missing("IMPORTANCE"))?,
                    relevance: relevance.ok_or_else(|| missing("RELEVANCE"))?,
                    comments: l.comments.clone(),
                    loc: Loc(l.no),
                });
            }
            "MODULE" => {
                let (head, clauses) = split_clauses(&toks, &["FOR", "DOES", "NEEDS", "EXPECTS"]);
                let id = match head {
                    [_, Tok::Word(id)] => label(l, id, "module id")?,
                    _ => {
                        return Err(err(
                            K::Malformed,
                            l,
                            "expected `MODULE <id> FOR <character> DOES <action> [NEEDS ...] [EXPECTS ...]`",
                        ))
                    }
                };
                check_unique(&mut seen.modules, &id, l, "module")?;
                let (mut character, mut action_id) = (None, None);
                let (mut preconditions, mut effects) = (Vec::new(), Vec::new());
                for (kw, body) in clauses {
                    match kw.as_str() {
                        "FOR" => character = Some(single_word(l, body, "character")?),
                        "DOES" => action_id = Some(single_word(l, body, "action")?),
                        "NEEDS" => {
                            for part in body.split(|t| *t == Tok::Comma) {
                                preconditions.push(proposition(l, part)?);
                            }
                        }
                        _ => {
                            for part in body.split(|t| *t == Tok::Comma) {
                                effects.push(effect(l, part)?);
                            }
                        }
                    }
                }
                let missing = |what: &str| err(K::Malformed, l, format!("MODULE is missing {what}"));
                self.doc.agents.modules.push(ModuleDecl {
                    id,
                    character: character.ok_or_else(|| missing("FOR"))?,
                    action_id: action_id.ok_or_else(|| missing("DOES"))?,
                    preconditions,
                    effects,
                    comments: l.comments.clone(),
                    loc: Loc(l.no),
                });
            }
            other => return Err(err(K::UnknownKeyword, l, format!("unknown AGENTS entry `{other}`"))),
        }
        Ok(())
    }

    fn scene(&mut self, line: Line, seen: &mut Seen) -> Result<Scene, ParseError> {
        let words: Vec<&str> = line.text.split_whitespace().collect();
        let id = match words.as_slice() {
            ["SCENE", id] => label(&line, id, "scene id")?,
            _ => return Err(err(K::Malformed, &line, "expected `SCENE <id>`")),
        };
        check_unique(&mut seen.scenes, &id, &line, "scene")?;
        let mut scene =
            Scene { id, ambient: String::new(), steps: Vec::new(), comments: line.comments.clone(), loc: Loc(line.no) };
        let mut step_ids = HashSet::new();
        while let Some(l) = self.peek() {
            if l.level == 0 {
                break;
            }
            if l.level > 1 {
                return Err(err(K::DanglingIndentation, l, "step items must follow a STEP"));
            }
            let l = self.next();
            match first_word(&l.text) {
                "AMBIENT" => {
                    let toks = tokenize(rest_after_keyword(&l.text), l.no)?;
                    match toks.as_slice() {
                        [Tok::Str(s)] if scene.ambient.is_empty() => scene.ambient = s.clone(),
                        [Tok::Str(_)] => {
                            return Err(err(K::DuplicateId, &l, "scene already has an AMBIENT description"))
                        }
                        _ => return Err(err(K::Malformed, &l, "expected AMBIENT \"text\"")),
                    }
                    scene.comments.extend(l.comments);
                }
                "STEP" => {
                    let words: Vec<&str> = l.text.split_whitespace().collect();
                    let id = match words.as_slice() {
                        ["STEP", id] => label(&l, id, "step id")?,
                        _ => return Err(err(K::Malformed, &l, "expected `STEP <id>`")),
                    };
                    check_unique(&mut step_ids, &id, &l, "step")?;
                    let items = self.items(2)?;
                    if items.is_empty() {
                        return Err(err(K::Malformed, &l, format!("step `{id}` is empty")));
                    }
                    scene.steps.push(SceneStep { id, items, comments: l.comments.clone(), loc: Loc(l.no) });
                }
                other => return Err(err(K::UnknownKeyword, &l, format!("unknown scene entry `{other}`"))),
            }
        }
        if scene.steps.is_empty() {
            return Err(err(K::Malformed, &line, format!("scene `{}` has no steps", scene.id)));
        }
        Ok(scene)
    }

    fn items(&mut self, level: usize) -> Result<Vec<StepItem>, ParseError> {
        let mut items = Vec::new();
        while let Some(l) = self.peek() {
            if l.level < level {
                break;
            }
            if l.level > level {
                return Err(err(K::DanglingIndentation, l, "line is indented deeper than its context allows"));
            }
            match first_word(&l.text) {
                "IF" | "NOTP" => {
                    let loc = Loc(l.no);
                    let block = self.block(level, 1)?;
                    items.push(StepItem { kind: ItemKind::Block(block), comments: Vec::new(), loc });
                }
                "DO" => {
                    let l = self.next();
                    let id = match l.text.split_whitespace().collect::<Vec<_>>().as_slice() {
                        ["DO", id] if id.starts_with('[') => {
                            return Err(err(
                                K::Malformed,
                                &l,
                                "bracketed actions are only allowed inside rule consequences",
                            ))
                        }
                        ["DO", id] => label(&l, id, "action id")?,
                        _ => return Err(err(K::Malformed, &l, "expected `DO <action>`")),
                    };
                    items.push(StepItem {
                        kind: ItemKind::Do(ActionRef::stated(id)),
                        comments: l.comments,
                        loc: Loc(l.no),
                    });
                }
                "DECIDE" => {
                    let l = self.next();
                    let id = match l.text.split_whitespace().collect::<Vec<_>>().as_slice() {
                        ["DECIDE", id] => label(&l, id, "matrix id")?,
                        _ => return Err(err(K::Malformed, &l, "expected `DECIDE <matrix>`")),
                    };
                    items.push(StepItem { kind: ItemKind::Decide(id), comments: l.comments, loc: Loc(l.no) });
                }
                "END" => {
                    let l = self.next();
                    if l.text != "END" {
                        return Err(err(K::Malformed, &l, "END takes no arguments"));
                    }
                    items.push(StepItem { kind: ItemKind::End, comments: l.comments, loc: Loc(l.no) });
                }
                other => {
                    let other = other.to_string();
                    return Err(err(K::UnknownKeyword, l, format!("unknown step item `{other}`")));
                }
            }
        }
        Ok(items)
    }

    /// Rules at `level` up to and including NOTP, each with an optional
    /// nested block one level deeper.
    fn block(&mut self, level: usize, depth: usize) -> Result<RuleBlock, ParseError> {
        let mut block = RuleBlock { rules: Vec::new(), notp: None, notp_mode: NotpMode::After(None), depth };
        let mut last_no = 0;
        while let Some(l) = self.peek() {
            if l.level != level || !matches!(first_word(&l.text), "IF" | "NOTP") {
                break;
            }
            let l = self.next();
            last_no = l.no;
            let is_notp = first_word(&l.text) == "NOTP";
            let (condition, mode, conseq_text) = self.rule_head(&l)?;
            let mut consequence = consequence(&l, conseq_text)?;
            if self.peek().is_some_and(|n| n.level == level + 1) {
                let next = self.peek().cloned().expect("peeked");
                if !matches!(first_word(&next.text), "IF" | "NOTP") {
                    return Err(err(
                        K::DanglingIndentation,
                        &next,
                        "only a nested rule block may be indented under a rule",
                    ));
                }
                consequence.nested = Some(Box::new(self.block(level + 1, depth + 1)?));
            }
            let rule = Rule { condition, consequence, comments: l.comments.clone(), loc: Loc(l.no) };
            if is_notp {
                block.notp = Some(rule);
                block.notp_mode = mode;
                break;
            }
            block.rules.push(rule);
        }
        if block.notp.is_none() && depth > 1 {
            let line = self.lines.iter().find(|l| l.no == last_no).expect("rule line");
            return Err(err(K::UnterminatedBlock, line, "nested rule block must end with a NOTP rule"));
        }
        Ok(block)
    }

    fn rule_head<'a>(&self, l: &'a Line) -> Result<(Condition, NotpMode, &'a str), ParseError> {
        let text = l.text.as_str();
        let then = find_word(text, "THEN").ok_or_else(|| err(K::MalformedRule, l, "rule has no THEN"))?;
        let head: Vec<&str> = text[..then].split_whitespace().collect();
        let conseq = text[then + 4..].trim();
        if head[0] == "NOTP" {
            let mode = match &head[1..] {
                [] => NotpMode::After(None),
                ["IMMEDIATE"] => NotpMode::Immediate,
                ["AFTER", n] => {
                    let n: u64 = number(l, n, "NOTP latency")?;
                    if n == 0 {
                        return Err(err(K::MalformedRule, l, "NOTP AFTER needs at least 1 tick; use IMMEDIATE"));
                    }
                    NotpMode::After(Some(n))
                }
                _ => return Err(err(K::MalformedRule, l, "expected `NOTP [IMMEDIATE | AFTER <ticks>] THEN ...`")),
            };
            return Ok((Condition::Notp, mode, conseq));
        }
        let cond = &text[2..then];
        let cond_toks = tokenize(cond, l.no)?;
        let condition = match cond_toks.as_slice() {
            [Tok::Word(s), Tok::Word(i)] if s == "SAYS" => match i.strip_prefix('~') {
                Some(id) => Condition::Intent(label(l, id, "intent id")?),
                None => return Err(err(K::MalformedRule, l, "intent conditions are written `SAYS ~<intent>`")),
            },
            [Tok::Word(t), Tok::Word(n)] if t == "TIMEOUT" => Condition::Timeout(number(l, n, "timeout")?),
            [Tok::Word(v), Tok::Word(is), Tok::Word(t)] if is == "IS" => {
                Condition::VariableTerm { variable: label(l, v, "variable id")?, term: label(l, t, "term id")? }
            }
            [Tok::Word(n)] if n == NOTP => {
                return Err(err(K::MalformedRule, l, "NOTP rules are written `NOTP THEN ...`"))
            }
            toks if toks.contains(&Tok::Eq) => {
                Condition::State(fact_from(l, toks).map_err(|e| ParseError { kind: K::MalformedRule, ..e })?)
            }
            _ => return Err(err(K::MalformedRule, l, format!("unrecognized condition `{}`", cond.trim()))),
        };
        Ok((condition, NotpMode::After(None), conseq))
    }
}

#[derive(Default)]
struct Seen {
    entities: HashSet<String>,
    actions: HashSet<String>,
    variables: HashSet<String>,
    intents: HashSet<String>,
    matrices: HashSet<String>,
    goals: HashSet<String>,
    modules: HashSet<String>,
    scenes: HashSet<String>,
}

fn single_word(l: &Line, toks: &[Tok], what: &str) -> Result<String, ParseError> {
    match toks {
        [Tok::Word(w)] => label(l, w, what),
        _ => Err(err(K::Malformed, l, format!("expected a single {what}"))),
    }
}

fn unit_number(l: &Line, toks: &[Tok], what: &str) -> Result<f64, ParseError> {
    let x: f64 = match toks {
        [Tok::Word(w)] => number(l, w, what)?,
        _ => return Err(err(K::Malformed, l, format!("expected a number for {what}"))),
    };
    if (0.0..=1.0).contains(&x) {
        Ok(x)
    } else {
        Err(err(K::Malformed, l, format!("{what} must lie in [0, 1]")))
    }
}

fn effect(l: &Line, toks: &[Tok]) -> Result<EffectDecl, ParseError> {
    let (last, prop) = toks.split_last().ok_or_else(|| err(K::Malformed, l, "empty EXPECTS entry"))?;
    let expectation = unit_number(l, std::slice::from_ref(last), "expectation")?;
    let mut prop = prop.to_vec();
    let negated = match prop.first_mut() {
        Some(Tok::Word(w)) if w.starts_with('!') => {
            w.remove(0);
            true
        }
        _ => false,
    };
    Ok(EffectDecl { proposition: proposition(l, &prop)?, negated, expectation })
}

/// Byte offset of `word` as a whitespace-delimited token.
fn find_word(text: &str, word: &str) -> Option<usize> {
    let mut start = 0;
    while let Some(i) = text[start..].find(word) {
        let at = start + i;
        let before = at == 0 || text[..at].ends_with(char::is_whitespace);
        let end = at + word.len();
        let after = end == text.len() || text[end..].starts_with(char::is_whitespace);
        if before && after {
            return Some(at);
        }
        start = end;
    }
    None
}

fn control(l: &Line, text: &str) -> Result<Option<Control>, ParseError> {
    let words: Vec<&str> = text.split_whitespace().collect();
    Ok(Some(match words.as_slice() {
        ["NEXT"] => Control::Next,
        ["CONTINUE"] => Control::Continue,
        ["STAY"] => Control::Stay,
        ["WAIT"] => Control::Wait,
        ["END"] => Control::End,
        ["GOTO", step] => Control::Goto(label(l, step, "step id")?),
        ["GOTO", ..] => return Err(err(K::MalformedRule, l, "expected `GOTO <step>`")),
        _ => return Ok(None),
    }))
}

fn consequence(l: &Line, text: &str) -> Result<Consequence, ParseError> {
    let parts: Vec<&str> = text.split(';').collect();
    let (actions_text, control_text) = match parts.as_slice() {
        [only] => match control(l, only)? {
            Some(c) => return Ok(Consequence { actions: Vec::new(), nested: None, control: c }),
            None => (*only, None),
        },
        [a, c] => (*a, Some(*c)),
        _ => return Err(err(K::MalformedRule, l, "a consequence has at most one `;`")),
    };
    let actions = action_refs(l, actions_text)?;
    let control = match control_text {
        None => Control::Stay,
        Some(c) => control(l, c)?.ok_or_else(|| err(K::MalformedRule, l, format!("unknown control `{}`", c.trim())))?,
    };
    if actions.is_empty() && control_text.is_some() {
        return Err(err(K::MalformedRule, l, "write a bare control directive when there are no actions"));
    }
    if actions.is_empty() {
        return Err(err(K::MalformedRule, l, "empty consequence"));
    }
    Ok(Consequence { actions, nested: None, control })
}

/// `a, [b, c], d` → refs in order; bracketed ones marked.
fn action_refs(l: &Line, text: &str) -> Result<Vec<ActionRef>, ParseError> {
    let mut refs = Vec::new();
    let mut rest = text.trim();
    while !rest.is_empty() {
        if let Some(inner) = rest.strip_prefix('[') {
            let close = inner.find(']').ok_or_else(|| err(K::MalformedRule, l, "unclosed `[`"))?;
            for id in inner[..close].split(',').map(str::trim) {
                refs.push(ActionRef::bracketed(label(l, id, "action id")?));
            }
            rest = inner[close + 1..].trim_start();
        } else {
            let end = rest.find([',', '[']).unwrap_or(rest.len());
            let id = rest[..end].trim();
            if !id.is_empty() {
                refs.push(ActionRef::stated(label(l, id, "action id")?));
            }
            rest = rest[end..].trim_start();
        }
        if let Some(r) = rest.strip_prefix(',') {
            rest = r.trim_start();
        }
    }
    Ok(refs)
}
