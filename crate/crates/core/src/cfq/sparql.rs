//! The subset of SPARQL used by CFQ: a `SELECT` clause and a `WHERE` block
//! of filters, category constraints and relation triples.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use crate::error::{LagrError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Select {
    /// `SELECT count(*)`, for yes/no questions.
    Count,
    /// `SELECT DISTINCT ?x0`
    Distinct,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Constraint {
    /// `FILTER ( a != b )`
    Filter(String, String),
    /// `e a category`; several entities only after a list is written out.
    Category { entities: Vec<String>, category: String },
    /// `[subjects] pred [objects]`
    Relation {
        subjects: Vec<String>,
        pred: String,
        objects: Vec<String>,
    },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SparqlQuery {
    pub select: Select,
    pub constraints: Vec<Constraint>,
}

pub fn is_entity(token: &str) -> bool {
    let var = token
        .strip_prefix("?x")
        .is_some_and(|d| !d.is_empty() && d.chars().all(|c| c.is_ascii_digit()));
    let mention = token
        .strip_prefix('M')
        .is_some_and(|d| !d.is_empty() && d.chars().all(|c| c.is_ascii_digit()));
    var || mention || token == SELECT_VAR || token.starts_with("ns:m.") || token.starts_with("ns:g.")
}

/// Stand-in for `?x0` inside the graph of a `DISTINCT` query.
pub const SELECT_VAR: &str = "select_?x0";

struct Lexer<'a> {
    toks: Vec<(usize, &'a str)>,
    at: usize,
    end: usize,
}

impl<'a> Lexer<'a> {
    fn new(text: &'a str, base: usize) -> Self {
        let mut toks = Vec::new();
        let mut start: Option<usize> = None;
        for (i, c) in text.char_indices() {
            let special = matches!(c, '[' | ']' | ',' | '(' | ')');
            if c.is_whitespace() || special {
                if let Some(s) = start.take() {
                    toks.push((base + s, &text[s..i]));
                }
                if special {
                    toks.push((base + i, &text[i..i + 1]));
                }
            } else if start.is_none() {
                start = Some(i);
            }
        }
        if let Some(s) = start {
            toks.push((base + s, &text[s..]));
        }
        Lexer {
            toks,
            at: 0,
            end: base + text.len(),
        }
    }

    fn err(&self, message: impl Into<String>) -> LagrError {
        LagrError::Parse {
            position: self.toks.get(self.at).map_or(self.end, |t| t.0),
            message: message.into(),
        }
    }

    fn peek(&self) -> Option<&'a str> {
        self.toks.get(self.at).map(|t| t.1)
    }

    fn bump(&mut self) -> Option<&'a str> {
        let t = self.peek();
        self.at += 1;
        t
    }

    fn expect(&mut self, want: &str) -> Result<()> {
        match self.peek() {
            Some(t) if t == want => {
                self.at += 1;
                Ok(())
            }
            other => Err(self.err(format!("expected `{want}`, found `{}`", other.unwrap_or("end of input")))),
        }
    }

    fn atom(&mut self) -> Result<&'a str> {
        match self.peek() {
            Some(t) if !matches!(t, "[" | "]" | "," | "(" | ")" | ".") => {
                self.at += 1;
                Ok(t)
            }
            other => Err(self.err(format!("expected a term, found `{}`", other.unwrap_or("end of input")))),
        }
    }

    /// A single term or a bracketed list, commas optional.
    fn terms(&mut self) -> Result<Vec<String>> {
        if self.peek() != Some("[") {
            return Ok(vec![self.atom()?.to_string()]);
        }
        self.at += 1;
        let mut out = Vec::new();
        loop {
            match self.peek() {
                Some("]") => {
                    self.at += 1;
                    break;
                }
                Some(",") => self.at += 1,
                _ => out.push(self.atom()?.to_string()),
            }
        }
        if out.is_empty() {
            self.at -= 1;
            return Err(self.err("empty entity list"));
        }
        Ok(out)
    }

    fn constraint(&mut self) -> Result<Constraint> {
        let start = self.at;
        if self.peek() == Some("FILTER") {
            self.at += 1;
            let paren = self.peek() == Some("(");
            if paren {
                self.at += 1;
            }
            let a = self.atom()?.to_string();
            self.expect("!=")?;
            let b = self.atom()?.to_string();
            if paren {
                self.expect(")")?;
            }
            return Ok(Constraint::Filter(a, b));
        }
        let subjects = self.terms()?;
        let pred = self.atom()?.to_string();
        let objects = self.terms()?;
        if pred == "a" {
            if objects.len() != 1 {
                self.at = start;
                return Err(self.err("a category constraint names exactly one category"));
            }
            return Ok(Constraint::Category {
                entities: subjects,
                category: objects.into_iter().next().expect("one object"),
            });
        }
        Ok(Constraint::Relation { subjects, pred, objects })
    }
}

/// Parse a query. Accepts CFQ's multi-line layout, the one-line layout
/// printed here, and bracketed entity lists.
pub fn parse_sparql(text: &str) -> Result<SparqlQuery> {
    let trimmed_start = text.len() - text.trim_start().len();
    let body = text.trim();
    let (select, rest) = if let Some(r) = body.strip_prefix("SELECT count(*)") {
        (Select::Count, r)
    } else if let Some(r) = body.strip_prefix("SELECT DISTINCT ?x0") {
        (Select::Distinct, r)
    } else {
        return Err(LagrError::Parse {
            position: trimmed_start,
            message: "expected `SELECT count(*)` or `SELECT DISTINCT ?x0`".into(),
        });
    };
    let rest_at = trimmed_start + body.len() - rest.len();
    let after = rest.trim_start();
    let open_at = rest_at + rest.len() - after.len();
    let Some(inner) = after.strip_prefix("WHERE").map(str::trim_start).and_then(|s| s.strip_prefix('{')) else {
        return Err(LagrError::Parse {
            position: open_at,
            message: "expected `WHERE {`".into(),
        });
    };
    let Some(close) = inner.rfind('}') else {
        return Err(LagrError::Parse {
            position: trimmed_start + body.len(),
            message: "missing closing `}`".into(),
        });
    };
    if !inner[close + 1..].trim().is_empty() {
        return Err(LagrError::Parse {
            position: open_at,
            message: "text after the closing `}`".into(),
        });
    }
    let inner_at = trimmed_start + body.len() - inner.len();
    let mut lx = Lexer::new(&inner[..close], inner_at);
    let mut constraints = Vec::new();
    while lx.peek().is_some() {
        constraints.push(lx.constraint()?);
        match lx.bump() {
            None | Some(".") => {}
            Some(t) => {
                lx.at -= 1;
                return Err(lx.err(format!("unrecognized clause starting at `{t}`")));
            }
        }
    }
    Ok(SparqlQuery { select, constraints })
}

fn list(f: &mut fmt::Formatter<'_>, items: &[String]) -> fmt::Result {
    if let [one] = items {
        f.write_str(one)
    } else {
        write!(f, "[{}]", items.join(", "))
    }
}

impl fmt::Display for Constraint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Constraint::Filter(a, b) => write!(f, "FILTER ( {a} != {b} )"),
            Constraint::Category { entities, category } => {
                list(f, entities)?;
                write!(f, " a {category}")
            }
            Constraint::Relation { subjects, pred, objects } => {
                list(f, subjects)?;
                write!(f, " {pred} ")?;
                list(f, objects)
            }
        }
    }
}

impl fmt::Display for SparqlQuery {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.select {
            Select::Count => f.write_str("SELECT count(*) WHERE {")?,
            Select::Distinct => f.write_str("SELECT DISTINCT ?x0 WHERE {")?,
        }
        for (i, c) in self.constraints.iter().enumerate() {
            f.write_str(if i == 0 { " " } else { " . " })?;
            write!(f, "{c}")?;
        }
        f.write_str(" }")
    }
}

impl SparqlQuery {
    /// Every constraint with single-entity sides, deduplicated and sorted.
    pub fn expand(&self) -> BTreeSet<Constraint> {
        let mut out = BTreeSet::new();
        for c in &self.constraints {
            match c {
                Constraint::Filter(..) => {
                    out.insert(c.clone());
                }
                Constraint::Category { entities, category } => {
                    for e in entities {
                        out.insert(Constraint::Category {
                            entities: vec![e.clone()],
                            category: category.clone(),
                        });
                    }
                }
                Constraint::Relation { subjects, pred, objects } => {
                    for s in subjects {
                        for o in objects {
                            out.insert(Constraint::Relation {
                                subjects: vec![s.clone()],
                                pred: pred.clone(),
                                objects: vec![o.clone()],
                            });
                        }
                    }
                }
            }
        }
        out
    }
}

/// Which triples `compress_with` merges.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum MergeRule {
    /// Shared object, then shared subject list.
    #[default]
    Both,
    /// Shared object only.
    ObjectOnly,
}

/// Merge relation triples: first those sharing predicate and object
/// (subjects concatenate), then those sharing predicate and subject list
/// (objects concatenate). Lists are sorted; constraints come out sorted.
/// Category constraints stay one per entity.
pub fn compress(q: &SparqlQuery) -> SparqlQuery {
    compress_with(q, MergeRule::Both)
}

pub fn compress_with(q: &SparqlQuery, rule: MergeRule) -> SparqlQuery {
    let mut kept = Vec::new();
    let mut by_object: BTreeMap<(String, String), BTreeSet<String>> = BTreeMap::new();
    for c in q.expand() {
        match c {
            Constraint::Relation { subjects, pred, objects } => {
                by_object
                    .entry((pred, objects[0].clone()))
                    .or_default()
                    .extend(subjects);
            }
            other => kept.push(other),
        }
    }
    let mut by_subjects: BTreeMap<(String, Vec<String>), BTreeSet<String>> = BTreeMap::new();
    for ((pred, object), subjects) in by_object {
        let subjects: Vec<String> = subjects.into_iter().collect();
        if rule == MergeRule::ObjectOnly {
            kept.push(Constraint::Relation {
                subjects,
                pred,
                objects: vec![object],
            });
            continue;
        }
        by_subjects.entry((pred, subjects)).or_default().insert(object);
    }
    for ((pred, subjects), objects) in by_subjects {
        kept.push(Constraint::Relation {
            subjects,
            pred,
            objects: objects.into_iter().collect(),
        });
    }
    kept.sort();
    SparqlQuery {
        select: q.select,
        constraints: kept,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn body(q: &str) -> SparqlQuery {
        parse_sparql(&format!("SELECT count(*) WHERE {{ {q} }}")).unwrap()
    }

    #[test]
    fn three_constraint_kinds() {
        let q = body("FILTER ?x0 != M0 . ?x0 a ns:film.actor . ?x0 parent ?x1");
        assert_eq!(q.constraints[0], Constraint::Filter("?x0".into(), "M0".into()));
        assert_eq!(
            q.constraints[1],
            Constraint::Category {
                entities: vec!["?x0".into()],
                category: "ns:film.actor".into()
            }
        );
        assert!(matches!(&q.constraints[2], Constraint::Relation { pred, .. } if pred == "parent"));
    }

    #[test]
    fn cfq_layout() {
        let text = "SELECT DISTINCT ?x0 WHERE {\n?x0 a ns:people.person .\n?x0 ns:people.person.spouse_s M1 .\nFILTER ( ?x0 != M1 )\n}";
        let q = parse_sparql(text).unwrap();
        assert_eq!(q.select, Select::Distinct);
        assert_eq!(q.constraints.len(), 3);
        assert_eq!(parse_sparql(&q.to_string()).unwrap(), q);
    }

    #[test]
    fn compression_example() {
        let q = body("M2 directed_by ?x0 . M3 directed_by ?x0");
        let c = compress(&q);
        assert_eq!(c.constraints.len(), 1);
        assert_eq!(c.constraints[0].to_string(), "[M2, M3] directed_by ?x0");
        assert_eq!(compress(&c), c);
        assert_eq!(c.expand(), q.expand());
    }

    #[test]
    fn objects_merge_too() {
        let q = body("M3 influenced ?x0 . M3 influenced M4 . M3 influenced ?x1 . M3 spouse ?x2");
        let c = compress(&q);
        let text: Vec<String> = c.constraints.iter().map(ToString::to_string).collect();
        assert_eq!(text, ["M3 influenced [?x0, ?x1, M4]", "M3 spouse ?x2"]);
        let narrow = compress_with(&q, MergeRule::ObjectOnly);
        assert_eq!(narrow.constraints.len(), 4);
        assert_eq!(compress_with(&narrow, MergeRule::ObjectOnly), narrow);
        let single = body("?x0 parent ?x1");
        assert_eq!(compress(&single), single);
    }

    #[test]
    fn bracket_lists_parse_with_or_without_commas() {
        let a = body("M3 influenced [?x0 ?x1 M4]");
        let b = body("M3 influenced [ ?x0 , ?x1 , M4 ]");
        assert_eq!(a, b);
        assert!(matches!(&a.constraints[0], Constraint::Relation { objects, .. } if objects.len() == 3));
    }

    #[test]
    fn errors_carry_positions() {
        assert!(parse_sparql("").is_err());
        assert!(parse_sparql("SELECT ?y WHERE { }").is_err());
        assert!(parse_sparql("SELECT count(*) WHERE { ?x0 a ns:film.actor").is_err());
        let text = "SELECT count(*) WHERE { ?x0 a ns:film.actor ?x1 . }";
        match parse_sparql(text) {
            Err(LagrError::Parse { position, .. }) => assert_eq!(&text[position..position + 3], "?x1"),
            other => panic!("{other:?}"),
        }
        assert!(parse_sparql("SELECT count(*) WHERE { [] p M1 }").is_err());
    }

    #[test]
    fn empty_where() {
        let q = parse_sparql("SELECT count(*) WHERE { }").unwrap();
        assert!(q.constraints.is_empty());
        assert_eq!(q.to_string(), "SELECT count(*) WHERE { }");
    }

    #[test]
    fn entity_classes() {
        for e in ["?x0", "?x12", "M3", "select_?x0", "ns:m.05zppz", "ns:g.11b"] {
            assert!(is_entity(e), "{e}");
        }
        for p in ["ns:film.actor", "ns:music.artist", "directed_by", "M", "?x"] {
            assert!(!is_entity(p), "{p}");
        }
    }
}
