//! A small CFQ-style question generator for tests and examples when the
//! real corpus is not available. Queries are written uncompressed in CFQ's
//! multi-line layout.

use std::collections::HashSet;

use rand::seq::{IndexedRandom, SliceRandom};
use rand::Rng as _;

use super::io::CfqExample;
use crate::rng::{seeded, Rng};

/// (surface word, category)
const CATEGORIES: [(&str, &str); 6] = [
    ("actor", "ns:film.actor"),
    ("director", "ns:film.director"),
    ("editor", "ns:film.editor"),
    ("producer", "ns:film.producer"),
    ("writer", "ns:film.writer"),
    ("person", "ns:people.person"),
];

/// (adjective, predicate, value)
const ADJECTIVES: [(&str, &str, &str); 5] = [
    ("male", "ns:people.person.gender", "ns:m.05zppz"),
    ("female", "ns:people.person.gender", "ns:m.02zsn"),
    ("Dutch", "ns:people.person.nationality", "ns:m.059j2"),
    ("German", "ns:people.person.nationality", "ns:m.0345h"),
    ("American", "ns:people.person.nationality", "ns:m.09c7w0"),
];

struct Verb {
    lemma: &'static str,
    past: &'static str,
    participle: &'static str,
    pred: &'static str,
    /// The person is the triple's subject (otherwise its object).
    person_first: bool,
}

const VERBS: [Verb; 6] = [
    Verb { lemma: "direct", past: "directed", participle: "directed", pred: "ns:film.film.directed_by", person_first: false },
    Verb { lemma: "edit", past: "edited", participle: "edited", pred: "ns:film.film.edited_by", person_first: false },
    Verb { lemma: "produce", past: "produced", participle: "produced", pred: "ns:film.film.produced_by", person_first: false },
    Verb { lemma: "write", past: "wrote", participle: "written", pred: "ns:film.film.written_by", person_first: false },
    Verb { lemma: "marry", past: "married", participle: "married", pred: "ns:people.person.spouse_s", person_first: true },
    Verb { lemma: "influence", past: "influenced", participle: "influenced", pred: "ns:influence.influence_node.influenced_by", person_first: false },
];

const SIBLING: &str = "ns:people.person.sibling_s";

#[derive(Debug, Clone)]
pub struct SynthConfig {
    pub max_adjectives: usize,
    pub max_objects: usize,
    pub max_verbs: usize,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            max_adjectives: 2,
            max_objects: 2,
            max_verbs: 2,
        }
    }
}

struct Builder {
    words: Vec<String>,
    constraints: Vec<String>,
    mentions: Vec<usize>,
}

impl Builder {
    fn new(rng: &mut Rng) -> Self {
        let mut mentions: Vec<usize> = (0..6).collect();
        mentions.shuffle(rng);
        Builder {
            words: Vec::new(),
            constraints: Vec::new(),
            mentions,
        }
    }

    fn say(&mut self, text: &str) {
        self.words.extend(text.split_whitespace().map(str::to_string));
    }

    fn mention(&mut self) -> String {
        format!("M{}", self.mentions.pop().expect("six mentions suffice"))
    }

    fn relate(&mut self, verb: &Verb, person: &str, other: &str) {
        let (s, o) = if verb.person_first { (person, other) } else { (other, person) };
        self.constraints.push(format!("{s} {} {o}", verb.pred));
    }

    /// `ADJ* noun` describing `var`.
    fn description(&mut self, var: &str, cfg: &SynthConfig, rng: &mut Rng) {
        let k = rng.random_range(0..=cfg.max_adjectives);
        let mut adjs: Vec<&(&str, &str, &str)> = ADJECTIVES.choose_multiple(rng, ADJECTIVES.len()).collect();
        let mut chosen = Vec::new();
        while chosen.len() < k {
            let Some(a) = adjs.pop() else { break };
            if chosen.iter().all(|c: &&(&str, &str, &str)| c.1 != a.1) {
                chosen.push(a);
            }
        }
        chosen.sort_by_key(|a| a.1);
        for (word, pred, value) in chosen {
            self.say(word);
            self.constraints.push(format!("{var} {pred} {value}"));
        }
        let (noun, cat) = CATEGORIES.choose(rng).expect("non-empty");
        self.say(noun);
        self.constraints.push(format!("{var} a {cat}"));
    }

    /// `verb M [and M] [and verb M ...]` with `person` as the actor.
    fn verb_phrase(&mut self, person: &str, cfg: &SynthConfig, rng: &mut Rng, lemma: bool) {
        let n_verbs = rng.random_range(1..=cfg.max_verbs);
        let verbs: Vec<&Verb> = VERBS.choose_multiple(rng, n_verbs).collect();
        for (i, verb) in verbs.iter().enumerate() {
            if i > 0 {
                self.say("and");
            }
            self.say(if lemma { verb.lemma } else { verb.past });
            let n_obj = rng.random_range(1..=cfg.max_objects);
            for j in 0..n_obj {
                if j > 0 {
                    self.say("and");
                }
                let m = self.mention();
                self.say(&m);
                self.relate(verb, person, &m);
            }
        }
    }

    fn finish(mut self, distinct: bool) -> (Vec<String>, String) {
        self.say("?");
        let head = if distinct { "SELECT DISTINCT ?x0" } else { "SELECT count(*)" };
        let mut text = format!("{head} WHERE {{\n");
        for c in &self.constraints {
            text.push_str(c);
            if c.starts_with("FILTER") {
                text.push('\n');
            } else {
                text.push_str(" .\n");
            }
        }
        text.push('}');
        (self.words, text)
    }
}

fn one(cfg: &SynthConfig, rng: &mut Rng) -> (Vec<String>, String) {
    let mut b = Builder::new(rng);
    match rng.random_range(0..5) {
        0 => {
            b.say("Which");
            b.description("?x0", cfg, rng);
            b.verb_phrase("?x0", cfg, rng, false);
            b.finish(true)
        }
        1 => {
            b.say("Who");
            b.constraints.push("?x0 a ns:people.person".into());
            b.verb_phrase("?x0", cfg, rng, false);
            b.finish(true)
        }
        2 => {
            b.say("Did");
            let m = b.mention();
            b.say(&m);
            b.verb_phrase(&m, cfg, rng, true);
            b.finish(false)
        }
        3 => {
            let verb = VERBS.choose(rng).expect("non-empty");
            let o = b.mention();
            b.say(&format!("Was {o} {} by a", verb.participle));
            b.description("?x0", cfg, rng);
            b.relate(verb, "?x0", &o);
            b.finish(false)
        }
        _ => {
            b.say("Which");
            b.description("?x0", cfg, rng);
            let m = b.mention();
            b.say(&format!("married a sibling of {m}"));
            b.constraints.push("?x0 ns:people.person.spouse_s ?x1".into());
            b.constraints.push(format!("?x1 {SIBLING} {m}"));
            b.constraints.push(format!("FILTER ( ?x0 != {m} )"));
            b.finish(true)
        }
    }
}

/// `n` distinct questions, ids `cfq-synth:i`.
pub fn generate(n: usize, seed: u64, cfg: &SynthConfig) -> Vec<CfqExample> {
    let mut rng = seeded(seed);
    let mut seen = HashSet::new();
    let mut out = Vec::with_capacity(n);
    let mut tries = 0usize;
    while out.len() < n {
        tries += 1;
        assert!(tries < 1000 * (n + 10), "synthetic CFQ grammar exhausted");
        let (tokens, sparql) = one(cfg, &mut rng);
        if seen.insert(tokens.join(" ")) {
            out.push(CfqExample {
                id: format!("cfq-synth:{}", out.len()),
                tokens,
                sparql,
                split: String::new(),
            });
        }
    }
    out
}
