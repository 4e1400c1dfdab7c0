//! A small COGS-style grammar for tests and examples when the real corpus
//! is not available.
//!
//! Logical forms are written while walking the sentence left to right: a
//! noun's clauses at the noun, a verb's roles at the verb in the surface
//! order of their arguments. Variables are token indices.

use std::collections::HashSet;

use rand::seq::IndexedRandom;
use rand::Rng as _;

use super::io::CogsExample;
use super::lf::{Arg, Conjunct, Definite, LogicalForm};
use crate::rng::{seeded, Rng};

pub const NOUNS: [&str; 20] = [
    "cake", "dog", "cat", "hedgehog", "girl", "boy", "bed", "table", "box", "cookie", "hippo", "melon", "chair",
    "yacht", "sandwich", "manager", "leaf", "cockroach", "baby", "rose",
];
pub const NAMES: [&str; 8] = ["Emma", "Liam", "Paula", "Sophia", "Noah", "Olivia", "Mason", "Ava"];
const PREPS: [&str; 3] = ["on", "in", "beside"];

/// (lemma, past, participle)
type Verb = (&'static str, &'static str, &'static str);
const TRANSITIVE: [Verb; 6] = [
    ("eat", "ate", "eaten"),
    ("see", "saw", "seen"),
    ("like", "liked", "liked"),
    ("find", "found", "found"),
    ("help", "helped", "helped"),
    ("admire", "admired", "admired"),
];
const UNERGATIVE: [Verb; 4] = [
    ("sleep", "slept", "slept"),
    ("smile", "smiled", "smiled"),
    ("juggle", "juggled", "juggled"),
    ("dance", "danced", "danced"),
];
const UNACCUSATIVE: [Verb; 3] = [
    ("roll", "rolled", "rolled"),
    ("shatter", "shattered", "shattered"),
    ("burn", "burned", "burned"),
];
const DITRANSITIVE: [Verb; 4] = [
    ("give", "gave", "given"),
    ("send", "sent", "sent"),
    ("lend", "lended", "lended"),
    ("offer", "offered", "offered"),
];
const CP_VERBS: [Verb; 4] = [
    ("notice", "noticed", "noticed"),
    ("say", "said", "said"),
    ("believe", "believed", "believed"),
    ("hope", "hoped", "hoped"),
];
const XCOMP_VERBS: [Verb; 3] = [
    ("want", "wanted", "wanted"),
    ("try", "tried", "tried"),
    ("plan", "planned", "planned"),
];

#[derive(Debug, Clone)]
enum Np {
    Name(&'static str),
    Common {
        noun: &'static str,
        definite: bool,
        pp: Option<(&'static str, Box<Np>)>,
    },
}

impl Np {
    fn len(&self) -> usize {
        match self {
            Np::Name(_) => 1,
            Np::Common { pp, .. } => 2 + pp.as_ref().map_or(0, |(_, inner)| 1 + inner.len()),
        }
    }

    fn head_offset(&self) -> usize {
        match self {
            Np::Name(_) => 0,
            Np::Common { .. } => 1,
        }
    }

    fn pp_depth(&self) -> usize {
        match self {
            Np::Name(_) => 0,
            Np::Common { pp, .. } => pp.as_ref().map_or(0, |(_, inner)| 1 + inner.pp_depth()),
        }
    }
}

#[derive(Debug, Clone)]
enum Clause {
    Transitive(Np, Verb, Np),
    Unergative(Np, Verb),
    Unaccusative(Np, Verb),
    DoubleObject(Np, Verb, Np, Np),
    ToDative(Np, Verb, Np, Np),
    Passive(Np, Verb, Option<Np>),
    Ccomp(Np, Verb, Box<Clause>),
    Xcomp(Np, Verb, Verb),
}

impl Clause {
    /// Offset of the main verb from the clause start.
    fn verb_offset(&self) -> usize {
        match self {
            Clause::Passive(theme, ..) => theme.len() + 1,
            Clause::Transitive(s, ..)
            | Clause::Unergative(s, _)
            | Clause::Unaccusative(s, _)
            | Clause::DoubleObject(s, ..)
            | Clause::ToDative(s, ..)
            | Clause::Ccomp(s, ..)
            | Clause::Xcomp(s, ..) => s.len(),
        }
    }

    fn pp_depth(&self) -> usize {
        let nps: Vec<&Np> = match self {
            Clause::Transitive(a, _, b) => vec![a, b],
            Clause::Unergative(a, _) | Clause::Unaccusative(a, _) | Clause::Xcomp(a, ..) => vec![a],
            Clause::DoubleObject(a, _, b, c) | Clause::ToDative(a, _, b, c) => vec![a, b, c],
            Clause::Passive(a, _, b) => std::iter::once(a).chain(b.as_ref()).collect(),
            Clause::Ccomp(a, _, inner) => return a.pp_depth().max(inner.pp_depth()),
        };
        nps.iter().map(|n| n.pp_depth()).max().unwrap_or(0)
    }
}

/// Sentence writer that tracks tokens and clauses as it goes.
#[derive(Default)]
struct Writer {
    tokens: Vec<String>,
    definites: Vec<Definite>,
    conjuncts: Vec<Conjunct>,
}

fn np_arg(np: &Np, start: usize) -> Arg {
    match np {
        Np::Name(n) => Arg::Name(n.to_string()),
        Np::Common { .. } => Arg::Var(start + np.head_offset()),
    }
}

impl Writer {
    fn pos(&self) -> usize {
        self.tokens.len()
    }

    fn push(&mut self, t: &str) -> usize {
        self.tokens.push(t.to_string());
        self.tokens.len() - 1
    }

    fn role(&mut self, lemma: &str, role: &str, head: usize, arg: Arg) {
        self.conjuncts.push(Conjunct::Role {
            pred: lemma.to_string(),
            role: role.to_string(),
            head: Arg::Var(head),
            arg,
        });
    }

    fn np(&mut self, np: &Np) -> Arg {
        let start = self.pos();
        match np {
            Np::Name(n) => {
                self.push(n);
            }
            Np::Common { noun, definite, pp } => {
                self.push(if *definite { "the" } else { "a" });
                let at = self.push(noun);
                if *definite {
                    self.definites.push(Definite {
                        noun: noun.to_string(),
                        var: at,
                    });
                } else {
                    self.conjuncts.push(Conjunct::Unary {
                        pred: noun.to_string(),
                        arg: Arg::Var(at),
                    });
                }
                if let Some((prep, inner)) = pp {
                    self.push(prep);
                    let arg = np_arg(inner, self.pos());
                    self.conjuncts.push(Conjunct::Role {
                        pred: noun.to_string(),
                        role: format!("nmod.{prep}"),
                        head: Arg::Var(at),
                        arg,
                    });
                    self.np(inner);
                }
            }
        }
        np_arg(np, start)
    }

    fn clause(&mut self, c: &Clause) {
        match c {
            Clause::Transitive(s, v, o) => {
                let sa = self.np(s);
                let at = self.push(v.1);
                let oa = np_arg(o, self.pos());
                self.role(v.0, "agent", at, sa);
                self.role(v.0, "theme", at, oa);
                self.np(o);
            }
            Clause::Unergative(s, v) => {
                let sa = self.np(s);
                let at = self.push(v.1);
                self.role(v.0, "agent", at, sa);
            }
            Clause::Unaccusative(s, v) => {
                let sa = self.np(s);
                let at = self.push(v.1);
                self.role(v.0, "theme", at, sa);
            }
            Clause::DoubleObject(s, v, r, t) => {
                let sa = self.np(s);
                let at = self.push(v.1);
                let ra = np_arg(r, self.pos());
                let ta = np_arg(t, self.pos() + r.len());
                self.role(v.0, "agent", at, sa);
                self.role(v.0, "recipient", at, ra);
                self.role(v.0, "theme", at, ta);
                self.np(r);
                self.np(t);
            }
            Clause::ToDative(s, v, t, r) => {
                let sa = self.np(s);
                let at = self.push(v.1);
                let ta = np_arg(t, self.pos());
                let ra = np_arg(r, self.pos() + t.len() + 1);
                self.role(v.0, "agent", at, sa);
                self.role(v.0, "theme", at, ta);
                self.role(v.0, "recipient", at, ra);
                self.np(t);
                self.push("to");
                self.np(r);
            }
            Clause::Passive(t, v, by) => {
                let ta = self.np(t);
                self.push("was");
                let at = self.push(v.2);
                self.role(v.0, "theme", at, ta);
                if let Some(agent) = by {
                    let aa = np_arg(agent, self.pos() + 1);
                    self.role(v.0, "agent", at, aa);
                    self.push("by");
                    self.np(agent);
                }
            }
            Clause::Ccomp(s, v, inner) => {
                let sa = self.np(s);
                let at = self.push(v.1);
                let inner_verb = at + 2 + inner.verb_offset();
                self.role(v.0, "agent", at, sa);
                self.role(v.0, "ccomp", at, Arg::Var(inner_verb));
                self.push("that");
                self.clause(inner);
            }
            Clause::Xcomp(s, v, inf) => {
                let sa = self.np(s);
                let at = self.push(v.1);
                self.role(v.0, "agent", at, sa.clone());
                self.role(v.0, "xcomp", at, Arg::Var(at + 2));
                self.push("to");
                let inf_at = self.push(inf.0);
                self.role(inf.0, "agent", inf_at, sa);
            }
        }
    }

    fn finish(mut self, id: String, tag: &str) -> CogsExample {
        self.push(".");
        let first = &mut self.tokens[0];
        let mut chars = first.chars();
        if let Some(c) = chars.next() {
            *first = c.to_uppercase().chain(chars).collect();
        }
        let lf = LogicalForm::Clauses {
            definites: self.definites,
            conjuncts: self.conjuncts,
        };
        CogsExample {
            id,
            tokens: self.tokens,
            lf: lf.to_string(),
            tag: tag.to_string(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthConfig {
    /// Deepest chain of prepositional modifiers.
    pub max_pp: usize,
    /// Deepest nesting of `that` clauses.
    pub max_cp: usize,
    /// Chance that a common noun gets a prepositional modifier.
    pub pp_rate: f64,
    pub name_rate: f64,
    /// Noun never generated in subject position (seen only as an object).
    pub held_out_subject: Option<&'static str>,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            max_pp: 1,
            max_cp: 1,
            pp_rate: 0.15,
            name_rate: 0.25,
            held_out_subject: Some("hedgehog"),
        }
    }
}

struct Sampler<'a> {
    rng: Rng,
    cfg: &'a SynthConfig,
    /// Names already used in the current sentence.
    names: Vec<&'static str>,
}

impl Sampler<'_> {
    fn noun(&mut self, subject: bool) -> &'static str {
        loop {
            let n = *NOUNS.choose(&mut self.rng).expect("nouns");
            if !(subject && self.cfg.held_out_subject == Some(n)) {
                return n;
            }
        }
    }

    fn np(&mut self, subject: bool, pp_budget: usize) -> Np {
        if self.rng.random_bool(self.cfg.name_rate) && self.names.len() < NAMES.len() {
            loop {
                let n = *NAMES.choose(&mut self.rng).expect("names");
                if !self.names.contains(&n) {
                    self.names.push(n);
                    return Np::Name(n);
                }
            }
        }
        let noun = self.noun(subject);
        let pp = (pp_budget > 0 && self.rng.random_bool(self.cfg.pp_rate)).then(|| {
            let prep = *PREPS.choose(&mut self.rng).expect("preps");
            (prep, Box::new(self.np(false, pp_budget - 1)))
        });
        Np::Common {
            noun,
            definite: self.rng.random_bool(0.5),
            pp,
        }
    }

    fn clause(&mut self, cp_budget: usize) -> Clause {
        let pp = self.cfg.max_pp;
        let kinds = if cp_budget > 0 { 8 } else { 7 };
        let pick = |v: &[Verb], rng: &mut Rng| *v.choose(rng).expect("verbs");
        match self.rng.random_range(0..kinds) {
            0 | 1 => {
                let v = pick(&TRANSITIVE, &mut self.rng);
                Clause::Transitive(self.np(true, pp), v, self.np(false, pp))
            }
            2 => {
                let v = pick(&UNERGATIVE, &mut self.rng);
                Clause::Unergative(self.np(true, pp), v)
            }
            3 => {
                let v = pick(&UNACCUSATIVE, &mut self.rng);
                Clause::Unaccusative(self.np(true, pp), v)
            }
            4 => {
                let v = pick(&DITRANSITIVE, &mut self.rng);
                let s = self.np(true, pp);
                if self.rng.random_bool(0.5) {
                    Clause::DoubleObject(s, v, self.np(false, 0), self.np(false, pp))
                } else {
                    Clause::ToDative(s, v, self.np(false, 0), self.np(false, pp))
                }
            }
            5 => {
                let v = pick(&TRANSITIVE, &mut self.rng);
                let t = self.np(true, pp);
                let by = self.rng.random_bool(0.5).then(|| self.np(false, pp));
                Clause::Passive(t, v, by)
            }
            6 => {
                let v = pick(&XCOMP_VERBS, &mut self.rng);
                let inf = pick(&UNERGATIVE, &mut self.rng);
                Clause::Xcomp(self.np(true, pp), v, inf)
            }
            _ => {
                let v = pick(&CP_VERBS, &mut self.rng);
                let s = self.np(true, pp);
                Clause::Ccomp(s, v, Box::new(self.clause(cp_budget - 1)))
            }
        }
    }
}

fn write(clause: &Clause, id: String, tag: &str) -> CogsExample {
    let mut w = Writer::default();
    w.clause(clause);
    w.finish(id, tag)
}

/// `n` distinct in-distribution sentences.
pub fn generate(n: usize, seed: u64, cfg: &SynthConfig) -> Vec<CogsExample> {
    let mut s = Sampler {
        rng: seeded(seed),
        cfg,
        names: Vec::new(),
    };
    let mut seen = HashSet::new();
    let mut out = Vec::with_capacity(n);
    let mut attempts = 0;
    while out.len() < n && attempts < n * 100 {
        attempts += 1;
        s.names.clear();
        let budget = s.rng.random_range(0..=cfg.max_cp);
        let c = s.clause(budget);
        let ex = write(&c, format!("synth:{}", out.len()), "in_distribution");
        if seen.insert(ex.sentence()) {
            out.push(ex);
        }
    }
    out
}

/// Out-of-distribution sentences, `per_case` for each case tag:
/// `pp_recursion` and `cp_recursion` go one level deeper than `cfg`
/// allows; `obj_to_subj_common` puts the held-out noun in subject position.
pub fn generate_gen(per_case: usize, seed: u64, cfg: &SynthConfig) -> Vec<CogsExample> {
    let deep_pp = SynthConfig {
        max_pp: cfg.max_pp + 1,
        pp_rate: 0.9,
        held_out_subject: None,
        ..cfg.clone()
    };
    let plain = SynthConfig {
        held_out_subject: None,
        ..cfg.clone()
    };
    let mut rng = seeded(seed);
    let mut out = Vec::new();
    let mut seen = HashSet::new();
    for (case, tag) in ["pp_recursion", "cp_recursion", "obj_to_subj_common"].iter().enumerate() {
        let sampler_cfg = if case == 0 { &deep_pp } else { &plain };
        let mut s = Sampler {
            rng: seeded(rng.random()),
            cfg: sampler_cfg,
            names: Vec::new(),
        };
        let mut made = 0;
        let mut attempts = 0;
        while made < per_case && attempts < per_case * 1000 {
            attempts += 1;
            s.names.clear();
            let c = match case {
                0 => {
                    let c = s.clause(0);
                    if c.pp_depth() <= cfg.max_pp {
                        continue;
                    }
                    c
                }
                1 => {
                    // wrap a plain clause in one more `that` than training allows
                    let mut c = s.clause(0);
                    for _ in 0..=cfg.max_cp {
                        let v = *CP_VERBS.choose(&mut s.rng).expect("verbs");
                        let subj = s.np(true, 0);
                        c = Clause::Ccomp(subj, v, Box::new(c));
                    }
                    c
                }
                _ => {
                    let Some(h) = cfg.held_out_subject else { break };
                    let mut c = s.clause(0);
                    match subject_mut(&mut c) {
                        Some(Np::Common { noun, .. }) => *noun = h,
                        _ => continue,
                    }
                    c
                }
            };
            let ex = write(&c, format!("synth-gen:{}", out.len()), tag);
            if seen.insert(ex.sentence()) {
                made += 1;
                out.push(ex);
            }
        }
    }
    out
}

fn subject_mut(c: &mut Clause) -> Option<&mut Np> {
    match c {
        Clause::Transitive(s, ..)
        | Clause::Unergative(s, _)
        | Clause::Unaccusative(s, _)
        | Clause::DoubleObject(s, ..)
        | Clause::ToDative(s, ..)
        | Clause::Passive(s, ..)
        | Clause::Ccomp(s, ..)
        | Clause::Xcomp(s, ..) => match s {
            Np::Common { pp: None, .. } => Some(s),
            _ => None,
        },
    }
}

/// One bare-word example per name, noun and intransitive or transitive verb.
pub fn primitives() -> Vec<CogsExample> {
    let mut out = Vec::new();
    let mut add = |word: &str, lf: String| {
        out.push(CogsExample {
            id: format!("synth-prim:{}", out.len()),
            tokens: vec![word.to_string()],
            lf,
            tag: "primitive".into(),
        });
    };
    for n in NAMES {
        add(n, n.to_string());
    }
    for n in NOUNS {
        add(n, format!("LAMBDA a . {n} ( a )"));
    }
    for (lemma, past, _) in UNERGATIVE {
        add(past, format!("LAMBDA a . LAMBDA e . {lemma} . agent ( e , a )"));
    }
    for (lemma, past, _) in UNACCUSATIVE {
        add(past, format!("LAMBDA a . LAMBDA e . {lemma} . theme ( e , a )"));
    }
    for (lemma, past, _) in TRANSITIVE {
        add(
            past,
            format!("LAMBDA a . LAMBDA b . LAMBDA e . {lemma} . agent ( e , b ) AND {lemma} . theme ( e , a )"),
        );
    }
    out
}

/// Subjects of every clause, for tests of the held-out noun.
pub fn subject_nouns(ex: &CogsExample) -> Vec<String> {
    // re-derive from the logical form: arguments of agent roles and of
    // theme roles whose argument precedes the verb
    let Ok(LogicalForm::Clauses { conjuncts, .. }) = super::lf::parse_lf(&ex.lf) else {
        return Vec::new();
    };
    let mut out = Vec::new();
    for c in &conjuncts {
        if let Conjunct::Role {
            role,
            head: Arg::Var(h),
            arg: Arg::Var(a),
            ..
        } = c
        {
            let preverbal = a < h && (role == "agent" || role == "theme");
            if preverbal {
                out.push(ex.tokens[*a].clone());
            }
        }
    }
    out
}
