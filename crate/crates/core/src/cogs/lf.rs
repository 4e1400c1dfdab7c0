//! COGS logical forms: `* noun ( x _ i )` definite clauses joined by ` ; `,
//! then conjuncts joined by ` AND `.

use std::fmt;

use crate::error::{LagrError, Result};

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Arg {
    /// `x _ i`, the variable for token `i`.
    Var(usize),
    /// A proper-noun constant.
    Name(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Definite {
    pub noun: String,
    pub var: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Conjunct {
    /// `hippo ( x _ 5 )`
    Unary { pred: String, arg: Arg },
    /// `juggle . agent ( x _ 6 , x _ 5 )`; `role` keeps inner dots, e.g. `nmod.on`.
    Role {
        pred: String,
        role: String,
        head: Arg,
        arg: Arg,
    },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum LogicalForm {
    Clauses {
        definites: Vec<Definite>,
        conjuncts: Vec<Conjunct>,
    },
    /// A lambda term for a bare word; kept as normalized text.
    Lambda(String),
    /// A bare proper noun such as `Paula`.
    Name(String),
}

pub const ROLES: [&str; 8] = [
    "agent",
    "theme",
    "recipient",
    "ccomp",
    "xcomp",
    "nmod.on",
    "nmod.in",
    "nmod.beside",
];

/// Collapse runs of whitespace to single spaces.
pub fn normalize(text: &str) -> String {
    text.split_whitespace().collect::<Vec<_>>().join(" ")
}

pub fn is_name(label: &str) -> bool {
    label.chars().next().is_some_and(char::is_uppercase)
}

struct Parser<'a> {
    toks: Vec<(usize, &'a str)>,
    at: usize,
    len: usize,
}

impl<'a> Parser<'a> {
    fn new(text: &'a str) -> Self {
        let mut toks = Vec::new();
        let mut start = None;
        for (i, c) in text.char_indices() {
            match (c.is_whitespace(), start) {
                (true, Some(s)) => {
                    toks.push((s, &text[s..i]));
                    start = None;
                }
                (false, None) => start = Some(i),
                _ => {}
            }
        }
        if let Some(s) = start {
            toks.push((s, &text[s..]));
        }
        Parser {
            toks,
            at: 0,
            len: text.len(),
        }
    }

    fn err(&self, message: impl Into<String>) -> LagrError {
        LagrError::Parse {
            position: self.toks.get(self.at).map_or(self.len, |t| t.0),
            message: message.into(),
        }
    }

    fn peek(&self) -> Option<&'a str> {
        self.toks.get(self.at).map(|t| t.1)
    }

    fn next(&mut self) -> Option<&'a str> {
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
            Some(t) => Err(self.err(format!("expected `{want}`, found `{t}`"))),
            None => Err(self.err(format!("expected `{want}`, found end of input"))),
        }
    }

    fn ident(&mut self) -> Result<&'a str> {
        match self.peek() {
            Some(t) if t.chars().all(|c| c.is_alphanumeric() || c == '_' || c == '-') && t != "_" => {
                self.at += 1;
                Ok(t)
            }
            Some(t) => Err(self.err(format!("expected a name, found `{t}`"))),
            None => Err(self.err("expected a name, found end of input")),
        }
    }

    fn var(&mut self) -> Result<usize> {
        self.expect("x")?;
        self.expect("_")?;
        let t = self.peek().ok_or_else(|| self.err("expected a variable index"))?;
        let i = t
            .parse()
            .map_err(|_| self.err(format!("bad variable index `{t}`")))?;
        self.at += 1;
        Ok(i)
    }

    fn arg(&mut self) -> Result<Arg> {
        if self.peek() == Some("x") {
            return Ok(Arg::Var(self.var()?));
        }
        let t = self.ident()?;
        if !is_name(t) {
            self.at -= 1;
            return Err(self.err(format!("argument `{t}` is neither a variable nor a proper noun")));
        }
        Ok(Arg::Name(t.to_string()))
    }

    fn definite(&mut self) -> Result<Definite> {
        self.expect("*")?;
        let noun = self.ident()?.to_string();
        self.expect("(")?;
        let var = self.var()?;
        self.expect(")")?;
        Ok(Definite { noun, var })
    }

    fn conjunct(&mut self) -> Result<Conjunct> {
        let pred = self.ident()?.to_string();
        let mut role_parts = Vec::new();
        while self.peek() == Some(".") {
            self.at += 1;
            role_parts.push(self.ident()?);
        }
        self.expect("(")?;
        let head = self.arg()?;
        if role_parts.is_empty() {
            self.expect(")")?;
            return Ok(Conjunct::Unary { pred, arg: head });
        }
        self.expect(",")?;
        let arg = self.arg()?;
        self.expect(")")?;
        Ok(Conjunct::Role {
            pred,
            role: role_parts.join("."),
            head,
            arg,
        })
    }
}

/// Parse COGS logical-form text. Errors carry the byte offset of the
/// offending token.
pub fn parse_lf(text: &str) -> Result<LogicalForm> {
    let mut p = Parser::new(text);
    match p.peek() {
        None => return Err(p.err("empty logical form")),
        Some("LAMBDA") => return Ok(LogicalForm::Lambda(normalize(text))),
        Some(t) if p.toks.len() == 1 && is_name(t) => return Ok(LogicalForm::Name(t.to_string())),
        _ => {}
    }
    let mut definites = Vec::new();
    while p.peek() == Some("*") {
        definites.push(p.definite()?);
        match p.peek() {
            Some(";") => p.at += 1,
            None => break,
            Some(t) => return Err(p.err(format!("expected `;` after a definite clause, found `{t}`"))),
        }
    }
    let mut conjuncts = Vec::new();
    if p.peek().is_some() {
        conjuncts.push(p.conjunct()?);
        while let Some(t) = p.next() {
            if t != "AND" {
                p.at -= 1;
                return Err(p.err(format!("expected `AND`, found `{t}`")));
            }
            conjuncts.push(p.conjunct()?);
        }
    }
    Ok(LogicalForm::Clauses { definites, conjuncts })
}

impl fmt::Display for Arg {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Arg::Var(i) => write!(f, "x _ {i}"),
            Arg::Name(n) => f.write_str(n),
        }
    }
}

impl fmt::Display for Conjunct {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Conjunct::Unary { pred, arg } => write!(f, "{pred} ( {arg} )"),
            Conjunct::Role { pred, role, head, arg } => {
                write!(f, "{pred} . {} ( {head} , {arg} )", role.replace('.', " . "))
            }
        }
    }
}

impl fmt::Display for LogicalForm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LogicalForm::Lambda(s) | LogicalForm::Name(s) => f.write_str(s),
            LogicalForm::Clauses { definites, conjuncts } => {
                for (i, d) in definites.iter().enumerate() {
                    if i > 0 {
                        f.write_str(" ; ")?;
                    }
                    write!(f, "* {} ( x _ {} )", d.noun, d.var)?;
                }
                if !definites.is_empty() && !conjuncts.is_empty() {
                    f.write_str(" ; ")?;
                }
                for (i, c) in conjuncts.iter().enumerate() {
                    if i > 0 {
                        f.write_str(" AND ")?;
                    }
                    write!(f, "{c}")?;
                }
                Ok(())
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const HIPPO: &str = "* dog ( x _ 1 ) ; notice . agent ( x _ 2 , x _ 1 ) AND notice . ccomp ( x _ 2 , x _ 6 ) AND hippo ( x _ 5 ) AND juggle . agent ( x _ 6 , x _ 5 )";

    #[test]
    fn parses_table_example() {
        let lf = parse_lf(HIPPO).unwrap();
        let LogicalForm::Clauses { definites, conjuncts } = &lf else {
            panic!("expected clauses");
        };
        assert_eq!(definites.len(), 1);
        assert_eq!(conjuncts.len(), 4);
        assert_eq!(
            conjuncts[3],
            Conjunct::Role {
                pred: "juggle".into(),
                role: "agent".into(),
                head: Arg::Var(6),
                arg: Arg::Var(5)
            }
        );
        assert_eq!(lf.to_string(), HIPPO);
    }

    #[test]
    fn proper_noun_argument() {
        let lf = parse_lf("send . recipient ( x _ 2 , Sophia )").unwrap();
        let LogicalForm::Clauses { conjuncts, .. } = lf else {
            panic!()
        };
        assert!(matches!(&conjuncts[0], Conjunct::Role { arg: Arg::Name(n), .. } if n == "Sophia"));
    }

    #[test]
    fn nmod_roles_keep_inner_dot() {
        let text = "sandwich . nmod . beside ( x _ 5 , x _ 8 )";
        let lf = parse_lf(text).unwrap();
        let LogicalForm::Clauses { conjuncts, .. } = &lf else {
            panic!()
        };
        assert!(matches!(&conjuncts[0], Conjunct::Role { role, .. } if role == "nmod.beside"));
        assert_eq!(lf.to_string(), text);
    }

    #[test]
    fn primitives() {
        assert_eq!(parse_lf("Paula").unwrap(), LogicalForm::Name("Paula".into()));
        let lam = "LAMBDA a . LAMBDA e . sleep . agent ( e , a )";
        assert_eq!(parse_lf(&format!("  {lam} ")).unwrap(), LogicalForm::Lambda(lam.into()));
    }

    #[test]
    fn errors_point_at_the_token() {
        assert!(parse_lf("").is_err());
        assert!(parse_lf("   ").is_err());
        let bad = "* dog ( x _ 1 ) ; eat . agent ( x _ 2 x _ 1 )";
        match parse_lf(bad) {
            Err(LagrError::Parse { position, message }) => {
                assert_eq!(&bad[position..position + 1], "x", "{message}");
                assert_eq!(position, 38);
            }
            other => panic!("{other:?}"),
        }
        assert!(parse_lf("eat . agent ( x _ 2 , x _ 1 ) OR dog ( x _ 1 )").is_err());
        assert!(parse_lf("dog ( y )").is_err());
    }

    #[test]
    fn whitespace_is_normalized() {
        let a = parse_lf("hippo  (  x _ 5 )   AND juggle . agent ( x _ 6 , x _ 5 )").unwrap();
        assert_eq!(a.to_string(), "hippo ( x _ 5 ) AND juggle . agent ( x _ 6 , x _ 5 )");
    }
}
