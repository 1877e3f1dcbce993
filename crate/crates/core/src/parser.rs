//! Shallow referring-expression parsing.
//!
//! Expressions are split into noun phrases around relational phrases found by greedy
//! longest match. Adjectives and nouns come from closed lexicons; there is no tagger.

use std::collections::BTreeSet;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

pub const DEFAULT_RELATIONAL_PHRASES: [&str; 13] = [
    "below",
    "above",
    "between",
    "not",
    "behind",
    "under",
    "underneath",
    "front of",
    "right of",
    "left of",
    "ontop of",
    "next to",
    "middle of",
];

pub const DEFAULT_STOPWORDS: [&str; 3] = ["the", "a", "an"];

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Lexicons {
    /// Relational phrases as token sequences, in lexicon order.
    pub relational_phrases: Vec<Vec<String>>,
    pub stopwords: BTreeSet<String>,
    pub adjectives: BTreeSet<String>,
    pub nouns: BTreeSet<String>,
}

impl Default for Lexicons {
    fn default() -> Self {
        Lexicons {
            relational_phrases: DEFAULT_RELATIONAL_PHRASES
                .iter()
                .map(|p| p.split_whitespace().map(str::to_owned).collect())
                .collect(),
            stopwords: DEFAULT_STOPWORDS.iter().map(|s| s.to_string()).collect(),
            adjectives: BTreeSet::new(),
            nouns: BTreeSet::new(),
        }
    }
}

impl Lexicons {
    pub fn with_words<A, N>(adjectives: A, nouns: N) -> Result<Self>
    where
        A: IntoIterator,
        A::Item: Into<String>,
        N: IntoIterator,
        N::Item: Into<String>,
    {
        let lex = Lexicons {
            adjectives: adjectives.into_iter().map(Into::into).collect(),
            nouns: nouns.into_iter().map(Into::into).collect(),
            ..Lexicons::default()
        };
        lex.validate()?;
        Ok(lex)
    }

    pub fn validate(&self) -> Result<()> {
        if let Some(w) = self.adjectives.intersection(&self.nouns).next() {
            return Err(Error::InvalidInput(format!(
                "{w:?} is listed as both adjective and noun"
            )));
        }
        if self.relational_phrases.iter().any(|p| p.is_empty()) {
            return Err(Error::InvalidInput("empty relational phrase".into()));
        }
        Ok(())
    }

    pub fn is_stopword(&self, token: &str) -> bool {
        self.stopwords.contains(token)
    }

    /// Drops stopwords, keeping order.
    pub fn content_words<'a>(&self, tokens: &'a [String]) -> Vec<&'a str> {
        tokens
            .iter()
            .map(String::as_str)
            .filter(|t| !self.is_stopword(t))
            .collect()
    }

    /// Longest relational phrase starting at `tokens[at]`, if any.
    fn match_relation(&self, tokens: &[String], at: usize) -> Option<&[String]> {
        self.relational_phrases
            .iter()
            .filter(|p| tokens[at..].starts_with(p))
            .max_by_key(|p| p.len())
            .map(Vec::as_slice)
    }

    /// Reads the sectioned plain-text format: `[relational]`, `[stopwords]`, `[adjectives]`
    /// and `[nouns]` headers, one entry per line, `#` comments. Sections that are absent keep
    /// their defaults.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse_text(&text).map_err(|(line, msg)| Error::parse(path, line, msg))
    }

    fn parse_text(text: &str) -> std::result::Result<Self, (usize, String)> {
        #[derive(Clone, Copy, PartialEq)]
        enum Section {
            Relational,
            Stopwords,
            Adjectives,
            Nouns,
        }
        let mut lex = Lexicons::default();
        let mut section = None;
        let mut seen = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            if line.starts_with('[') && line.ends_with(']') {
                let s = match &line[1..line.len() - 1] {
                    "relational" => Section::Relational,
                    "stopwords" => Section::Stopwords,
                    "adjectives" => Section::Adjectives,
                    "nouns" => Section::Nouns,
                    other => return Err((i + 1, format!("unknown section [{other}]"))),
                };
                if !seen.contains(&s) {
                    seen.push(s);
                    match s {
                        Section::Relational => lex.relational_phrases.clear(),
                        Section::Stopwords => lex.stopwords.clear(),
                        Section::Adjectives => lex.adjectives.clear(),
                        Section::Nouns => lex.nouns.clear(),
                    }
                }
                section = Some(s);
                continue;
            }
            let entry = line.to_lowercase();
            match section {
                None => return Err((i + 1, "entry before any section header".into())),
                Some(Section::Relational) => lex
                    .relational_phrases
                    .push(entry.split_whitespace().map(str::to_owned).collect()),
                Some(Section::Stopwords) => {
                    lex.stopwords.insert(entry);
                }
                Some(Section::Adjectives) => {
                    lex.adjectives.insert(entry);
                }
                Some(Section::Nouns) => {
                    lex.nouns.insert(entry);
                }
            }
        }
        lex.validate().map_err(|e| (0, e.to_string()))?;
        Ok(lex)
    }

    pub fn to_text(&self) -> String {
        let mut out = String::from("[relational]\n");
        for p in &self.relational_phrases {
            out.push_str(&p.join(" "));
            out.push('\n');
        }
        for (name, set) in [
            ("stopwords", &self.stopwords),
            ("adjectives", &self.adjectives),
            ("nouns", &self.nouns),
        ] {
            out.push_str(&format!("\n[{name}]\n"));
            for w in set {
                out.push_str(w);
                out.push('\n');
            }
        }
        out
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NounPhrase {
    /// Stopword-free tokens in order.
    pub tokens: Vec<String>,
    pub adj_noun_pairs: Vec<(String, String)>,
}

impl NounPhrase {
    fn new(tokens: Vec<String>, lexicons: &Lexicons) -> Self {
        let adj_noun_pairs = extract_adj_noun_pairs(&tokens, lexicons);
        NounPhrase { tokens, adj_noun_pairs }
    }

    /// Tokens that take part in no adjective-noun pair.
    pub fn standalone_words(&self) -> Vec<&str> {
        self.tokens
            .iter()
            .filter(|t| !self.adj_noun_pairs.iter().any(|(a, n)| a == *t || n == *t))
            .map(String::as_str)
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Segment {
    Np(NounPhrase),
    Rel(Vec<String>),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParsedExpression {
    /// Alternating NP / Rel segments that begin and end with an NP.
    pub segments: Vec<Segment>,
    /// Stopwords removed from the noun phrases.
    pub dropped: Vec<String>,
}

/// The expression viewed as `NP1 r NP2`, with everything after the first relation folded
/// into `NP2` as ordinary words.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RelationalView {
    pub np1: NounPhrase,
    pub relation: String,
    pub np2: NounPhrase,
}

impl ParsedExpression {
    pub fn noun_phrases(&self) -> impl Iterator<Item = &NounPhrase> {
        self.segments.iter().filter_map(|s| match s {
            Segment::Np(np) => Some(np),
            Segment::Rel(_) => None,
        })
    }

    /// All stopword-free tokens in order, relational phrase tokens included.
    pub fn content_words(&self) -> Vec<&str> {
        self.segments
            .iter()
            .flat_map(|s| match s {
                Segment::Np(np) => np.tokens.iter(),
                Segment::Rel(r) => r.iter(),
            })
            .map(String::as_str)
            .collect()
    }

    pub fn has_relation(&self) -> bool {
        self.segments.iter().any(|s| matches!(s, Segment::Rel(_)))
    }

    pub fn relational_view(&self, lexicons: &Lexicons) -> Option<RelationalView> {
        let rel_at = self.segments.iter().position(|s| matches!(s, Segment::Rel(_)))?;
        let np1 = match &self.segments[rel_at - 1] {
            Segment::Np(np) => np.clone(),
            Segment::Rel(_) => unreachable!("segments alternate"),
        };
        let relation = match &self.segments[rel_at] {
            Segment::Rel(r) => r.join(" "),
            Segment::Np(_) => unreachable!(),
        };
        let rest: Vec<String> = self.segments[rel_at + 1..]
            .iter()
            .flat_map(|s| match s {
                Segment::Np(np) => np.tokens.clone(),
                Segment::Rel(r) => r.clone(),
            })
            .collect();
        Some(RelationalView {
            np1,
            relation,
            np2: NounPhrase::new(rest, lexicons),
        })
    }
}

pub fn parse(tokens: &[String], lexicons: &Lexicons) -> ParsedExpression {
    let mut segments = Vec::new();
    let mut dropped = Vec::new();
    let mut current: Vec<String> = Vec::new();
    let mut i = 0;
    while i < tokens.len() {
        if let Some(phrase) = lexicons.match_relation(tokens, i) {
            let n = phrase.len();
            if current.is_empty() {
                // nothing to relate from: demote to ordinary words
                current.extend_from_slice(phrase);
            } else {
                segments.push(Segment::Np(NounPhrase::new(std::mem::take(&mut current), lexicons)));
                segments.push(Segment::Rel(phrase.to_vec()));
            }
            i += n;
            continue;
        }
        let t = &tokens[i];
        if lexicons.is_stopword(t) {
            dropped.push(t.clone());
        } else {
            current.push(t.clone());
        }
        i += 1;
    }
    if current.is_empty() {
        if let Some(Segment::Rel(rel)) = segments.last().cloned() {
            segments.pop();
            if let Some(Segment::Np(prev)) = segments.pop() {
                let mut tokens = prev.tokens;
                tokens.extend(rel);
                current = tokens;
            }
        }
    }
    segments.push(Segment::Np(NounPhrase::new(current, lexicons)));
    ParsedExpression { segments, dropped }
}

/// Pairs every noun with each adjective preceding it that is not separated by another noun.
pub fn extract_adj_noun_pairs(np_tokens: &[String], lexicons: &Lexicons) -> Vec<(String, String)> {
    let mut pairs = Vec::new();
    let mut pending: Vec<&String> = Vec::new();
    for t in np_tokens {
        if lexicons.nouns.contains(t) {
            pairs.extend(pending.drain(..).map(|a| (a.clone(), t.clone())));
        } else if lexicons.adjectives.contains(t) {
            pending.push(t);
        }
    }
    pairs
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn toks(s: &str) -> Vec<String> {
        s.split_whitespace().map(str::to_owned).collect()
    }

    fn lex() -> Lexicons {
        Lexicons::with_words(
            ["large", "green", "red", "blue"],
            ["tree", "ball", "box", "woman", "dog", "cat", "fence", "lake"],
        )
        .unwrap()
    }

    fn np(tokens: &str) -> Segment {
        Segment::Np(NounPhrase::new(toks(tokens), &lex()))
    }

    #[test]
    fn woman_right_of_tree() {
        let p = parse(&toks("the woman to the right of the tree"), &lex());
        assert_eq!(
            p.segments,
            vec![np("woman to"), Segment::Rel(toks("right of")), np("tree")]
        );
        assert_eq!(p.dropped, toks("the the the"));
    }

    #[test]
    fn simple_np() {
        let p = parse(&toks("the red ball"), &lex());
        assert_eq!(p.segments, vec![np("red ball")]);
        assert!(!p.has_relation());
    }

    #[test]
    fn two_relations_only_first_scored() {
        let l = lex();
        let p = parse(&toks("dog next to cat behind fence"), &l);
        assert_eq!(
            p.segments,
            vec![
                np("dog"),
                Segment::Rel(toks("next to")),
                np("cat"),
                Segment::Rel(toks("behind")),
                np("fence"),
            ]
        );
        let view = p.relational_view(&l).unwrap();
        assert_eq!(view.np1.tokens, toks("dog"));
        assert_eq!(view.relation, "next to");
        assert_eq!(view.np2.tokens, toks("cat behind fence"));
    }

    #[test]
    fn longest_match_wins() {
        let mut l = lex();
        l.relational_phrases.push(toks("right"));
        let p = parse(&toks("ball right of box"), &l);
        assert_eq!(p.segments[1], Segment::Rel(toks("right of")));
        let p = parse(&toks("ball right box"), &l);
        assert_eq!(p.segments[1], Segment::Rel(toks("right")));
    }

    #[test]
    fn leading_and_trailing_relations_are_demoted() {
        let l = lex();
        let p = parse(&toks("the above box"), &l);
        assert_eq!(p.segments, vec![np("above box")]);
        let p = parse(&toks("box above the"), &l);
        assert_eq!(p.segments, vec![np("box above")]);
        let p = parse(&toks("above"), &l);
        assert_eq!(p.segments, vec![np("above")]);
    }

    #[test]
    fn adj_noun_pairs() {
        let l = lex();
        assert_eq!(
            extract_adj_noun_pairs(&toks("large green tree"), &l),
            vec![
                ("large".to_string(), "tree".to_string()),
                ("green".to_string(), "tree".to_string())
            ]
        );
        assert!(extract_adj_noun_pairs(&toks("tree"), &l).is_empty());
        assert_eq!(
            extract_adj_noun_pairs(&toks("red ball blue box"), &l),
            vec![
                ("red".to_string(), "ball".to_string()),
                ("blue".to_string(), "box".to_string())
            ]
        );
        let np = NounPhrase::new(toks("tall red ball green"), &l);
        assert_eq!(np.standalone_words(), vec!["tall", "green"]);
    }

    #[test]
    fn lexicon_text_roundtrip() {
        let l = lex();
        let back = Lexicons::parse_text(&l.to_text()).unwrap();
        assert_eq!(back, l);
        assert!(Lexicons::parse_text("red\n").is_err());
        assert!(Lexicons::parse_text("[adjectives]\nred\n[nouns]\nred\n").is_err());
    }

    proptest! {
        #[test]
        fn parse_preserves_token_multiset(
            words in proptest::collection::vec(
                proptest::sample::select(vec![
                    "the", "a", "red", "ball", "left", "of", "next", "to", "above",
                    "box", "not", "front", "large",
                ]),
                1..12,
            )
        ) {
            let tokens: Vec<String> = words.iter().map(|s| s.to_string()).collect();
            let p = parse(&tokens, &lex());
            let mut recovered: Vec<String> = p.dropped.clone();
            for s in &p.segments {
                match s {
                    Segment::Np(np) => recovered.extend(np.tokens.iter().cloned()),
                    Segment::Rel(r) => recovered.extend(r.iter().cloned()),
                }
            }
            let mut original = tokens.clone();
            original.sort();
            recovered.sort();
            prop_assert_eq!(original, recovered);
            // alternation, NP at both ends, no empty NP next to a relation
            prop_assert!(matches!(p.segments.first(), Some(Segment::Np(_))));
            prop_assert!(matches!(p.segments.last(), Some(Segment::Np(_))));
            for (k, s) in p.segments.iter().enumerate() {
                prop_assert_eq!(k % 2 == 0, matches!(s, Segment::Np(_)));
                if let Segment::Np(np) = s {
                    prop_assert!(np.tokens.iter().all(|t| t != "the" && t != "a"));
                    if p.segments.len() > 1 {
                        prop_assert!(!np.tokens.is_empty());
                    }
                }
            }
            prop_assert_eq!(parse(&tokens, &lex()), p);
        }
    }
}
