//! Text normalization into the canonical eventuality form: tokenize,
//! lowercase, lemmatize the main verb, locate the subject and classify the
//! dependency pattern.

use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::Eventuality;
use crate::lexicon::{Lexicon, PLACEHOLDERS};

pub const UNMATCHED: &str = "unmatched";

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum NormalizeError {
    #[error("cannot normalize empty text")]
    Empty,
}

/// Coarse token classes the pattern templates are written over.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TokenClass {
    Subject,
    Verb,
    Object,
    Adjective,
    Preposition,
    /// Auxiliaries, adverbs and infinitival `to`; invisible to the templates.
    Skip,
    /// Invisible too, but opens a new noun phrase so the following object is
    /// not merged into the previous one.
    Determiner,
}

impl TokenClass {
    fn code(self) -> Option<&'static str> {
        match self {
            TokenClass::Subject => Some("s"),
            TokenClass::Verb => Some("v"),
            TokenClass::Object => Some("o"),
            TokenClass::Adjective => Some("a"),
            TokenClass::Preposition => Some("p"),
            TokenClass::Skip | TokenClass::Determiner => None,
        }
    }
}

/// Ordered pattern templates. A template is the `-`-joined class sequence
/// after skipped tokens are removed and runs of objects or adjectives are
/// collapsed; the first template equal to that sequence wins.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PatternSet {
    pub patterns: Vec<String>,
}

impl Default for PatternSet {
    fn default() -> Self {
        let codes = [
            "s-v", "s-v-o", "s-v-a", "s-v-o-o", "s-v-p-o", "s-v-o-p-o", "s-v-a-p-o", "s-v-v",
            "s-v-v-o", "s-v-v-a", "s-v-v-p-o", "s-v-o-v", "s-v-o-a",
        ];
        PatternSet { patterns: codes.iter().map(|s| s.to_string()).collect() }
    }
}

impl PatternSet {
    pub fn classify(&self, sequence: &str) -> &str {
        self.patterns
            .iter()
            .find(|p| p.as_str() == sequence)
            .map(|p| p.as_str())
            .unwrap_or(UNMATCHED)
    }

    pub fn contains(&self, code: &str) -> bool {
        code == UNMATCHED || self.patterns.iter().any(|p| p == code)
    }
}

/// Hook for swapping in a full lemmatizer. `verb_slot` is true for the main
/// verb position; other tokens are only passed for copula mapping.
pub trait Lemmatizer: Send + Sync + std::fmt::Debug {
    fn lemma(&self, lexicon: &Lexicon, token: &str, verb_slot: bool) -> String;
}

/// Exception table plus suffix rules (-s, -es, -ies, -ing, -ed). A suffix
/// rule fires only when it lands on a known base verb, so unknown words pass
/// through untouched.
#[derive(Debug, Default, Clone)]
pub struct RuleLemmatizer;

impl RuleLemmatizer {
    fn strip_suffix(lexicon: &Lexicon, token: &str) -> Option<String> {
        let known = |w: &str| lexicon.base_verbs.contains(w);
        let mut candidates: Vec<String> = Vec::new();
        if let Some(stem) = token.strip_suffix("ies") {
            candidates.push(format!("{stem}y"));
        }
        if let Some(stem) = token.strip_suffix("ied") {
            candidates.push(format!("{stem}y"));
        }
        if let Some(stem) = token.strip_suffix("es") {
            candidates.push(stem.to_string());
        }
        if let Some(stem) = token.strip_suffix('s') {
            if !stem.ends_with('s') {
                candidates.push(stem.to_string());
            }
        }
        for suffix in ["ing", "ed"] {
            if let Some(stem) = token.strip_suffix(suffix) {
                candidates.push(stem.to_string());
                candidates.push(format!("{stem}e"));
                let bytes = stem.as_bytes();
                if bytes.len() >= 2 && bytes[bytes.len() - 1] == bytes[bytes.len() - 2] {
                    candidates.push(stem[..stem.len() - 1].to_string());
                }
            }
        }
        candidates.into_iter().find(|c| !c.is_empty() && known(c))
    }
}

impl Lemmatizer for RuleLemmatizer {
    fn lemma(&self, lexicon: &Lexicon, token: &str, verb_slot: bool) -> String {
        if lexicon.copulas.contains(token) {
            return "be".to_string();
        }
        if !verb_slot || lexicon.base_verbs.contains(token) {
            return token.to_string();
        }
        if let Some(base) = lexicon.irregular_verbs.get(token) {
            return base.clone();
        }
        Self::strip_suffix(lexicon, token).unwrap_or_else(|| token.to_string())
    }
}

/// Maps raw text into [`Eventuality`] form.
#[derive(Debug, Clone)]
pub struct Normalizer {
    pub lexicon: Lexicon,
    pub patterns: PatternSet,
    lemmatizer: Arc<dyn Lemmatizer>,
}

impl Default for Normalizer {
    fn default() -> Self {
        Normalizer::new(Lexicon::default(), PatternSet::default())
    }
}

impl Normalizer {
    pub fn new(lexicon: Lexicon, patterns: PatternSet) -> Self {
        Normalizer { lexicon, patterns, lemmatizer: Arc::new(RuleLemmatizer) }
    }

    pub fn with_lemmatizer(mut self, lemmatizer: Arc<dyn Lemmatizer>) -> Self {
        self.lemmatizer = lemmatizer;
        self
    }

    /// Lowercases and splits on whitespace, trimming sentence punctuation.
    /// Placeholders keep their canonical capitalization.
    pub fn tokenize(&self, text: &str) -> Vec<String> {
        text.split_whitespace()
            .filter_map(|raw| {
                let trimmed = raw.trim_matches(|c: char| matches!(c, '.' | ',' | '!' | '?' | ';' | ':' | '"'));
                if trimmed.is_empty() {
                    return None;
                }
                let lower = trimmed.to_lowercase();
                for placeholder in PLACEHOLDERS {
                    let p = placeholder.to_lowercase();
                    if lower == p {
                        return Some(placeholder.to_string());
                    }
                    if let Some(rest) = lower.strip_prefix(&p) {
                        if rest == "'s" {
                            return Some(format!("{placeholder}'s"));
                        }
                    }
                }
                Some(lower)
            })
            .collect()
    }

    pub fn normalize(&self, text: &str) -> Result<Eventuality, NormalizeError> {
        let raw = self.tokenize(text);
        if raw.is_empty() {
            return Err(NormalizeError::Empty);
        }
        let lex = &self.lexicon;
        let mut tokens: Vec<String> = raw
            .iter()
            .map(|t| self.lemmatizer.lemma(lex, t, false))
            .collect();
        let subject_index = tokens.iter().position(|t| lex.subjects.contains(t));
        let start = subject_index.map(|i| i + 1).unwrap_or(0);
        if let Some(slot) = self.verb_slot(&tokens, start) {
            tokens[slot] = self.lemmatizer.lemma(lex, &raw[slot], true);
        }
        let pattern = match subject_index {
            Some(s) => {
                let sequence = self.class_sequence(&tokens, s);
                self.patterns.classify(&sequence).to_string()
            }
            None => UNMATCHED.to_string(),
        };
        Ok(Eventuality { tokens, pattern, subject_index })
    }

    fn is_aux(&self, tokens: &[String], i: usize) -> bool {
        let lex = &self.lexicon;
        let t = tokens[i].as_str();
        if lex.auxiliaries.contains(t) || lex.adverbs.contains(t) {
            return true;
        }
        if lex.do_forms.contains(t) {
            if let Some(next) = tokens.get(i + 1) {
                return next == "not" || next == "n't" || lex.base_verbs.contains(next.as_str());
            }
        }
        false
    }

    /// Position of the main verb: the first token after `start` that is not
    /// an auxiliary, adverb or infinitival `to`.
    fn verb_slot(&self, tokens: &[String], start: usize) -> Option<usize> {
        (start..tokens.len()).find(|&i| !(self.is_aux(tokens, i) || tokens[i] == "to"))
    }

    fn classes(&self, tokens: &[String], subject: usize) -> Vec<TokenClass> {
        let lex = &self.lexicon;
        let slot = self.verb_slot(tokens, subject + 1);
        let mut classes = vec![TokenClass::Skip; tokens.len()];
        classes[subject] = TokenClass::Subject;
        let mut after_determiner = false;
        let mut after_to = false;
        let mut previous_verb: Option<&str> = None;
        for i in subject + 1..tokens.len() {
            let t = tokens[i].as_str();
            let class = if Some(i) == slot {
                TokenClass::Verb
            } else if slot.map_or(true, |s| i < s) {
                TokenClass::Skip
            } else if after_determiner {
                TokenClass::Object
            } else if after_to && lex.base_verbs.contains(t) {
                TokenClass::Verb
            } else if t == "to" && tokens.get(i + 1).is_some_and(|n| lex.base_verbs.contains(n.as_str())) {
                TokenClass::Skip
            } else if t == "her" && self.reads_as_determiner(tokens, i) {
                TokenClass::Determiner
            } else if lex.determiners.contains(t) || lex.is_possessive(t) || t.ends_with("'s") {
                TokenClass::Determiner
            } else if lex.prepositions.contains(t) {
                TokenClass::Preposition
            } else if lex.adverbs.contains(t) || lex.auxiliaries.contains(t) {
                TokenClass::Skip
            } else if lex.pronoun_class(t).is_some() || PLACEHOLDERS.contains(&t) || lex.subjects.contains(t) {
                TokenClass::Object
            } else if t == "be" {
                TokenClass::Verb
            } else if lex.looks_adjective(t)
                || (t.ends_with("ed") && previous_verb.is_some_and(|v| lex.linking_verbs.contains(v)))
            {
                TokenClass::Adjective
            } else if lex.base_verbs.contains(t) && self.verb_may_follow(tokens, &classes, i) {
                TokenClass::Verb
            } else {
                TokenClass::Object
            };
            after_determiner = class == TokenClass::Determiner;
            after_to = t == "to" && class == TokenClass::Skip;
            if class == TokenClass::Verb {
                previous_verb = Some(t);
            } else if !matches!(class, TokenClass::Skip | TokenClass::Determiner) {
                previous_verb = None;
            }
            classes[i] = class;
        }
        classes
    }

    /// A second verb directly follows a verb, or a pronoun object
    /// ("help she cook").
    fn verb_may_follow(&self, tokens: &[String], classes: &[TokenClass], i: usize) -> bool {
        let prev = &tokens[i - 1];
        match classes[i - 1] {
            TokenClass::Verb => true,
            TokenClass::Object => {
                self.lexicon.pronoun_class(prev).is_some() || PLACEHOLDERS.contains(&prev.as_str())
            }
            _ => false,
        }
    }

    /// `her` followed by a content word reads as a possessive determiner.
    fn reads_as_determiner(&self, tokens: &[String], i: usize) -> bool {
        let lex = &self.lexicon;
        match tokens.get(i + 1) {
            Some(next) => {
                let n = next.as_str();
                !(lex.prepositions.contains(n)
                    || lex.determiners.contains(n)
                    || lex.adverbs.contains(n)
                    || lex.auxiliaries.contains(n)
                    || lex.base_verbs.contains(n)
                    || lex.pronoun_class(n).is_some())
            }
            None => false,
        }
    }

    /// Class sequence from the subject onward, with skips removed and runs of
    /// objects or adjectives collapsed.
    pub fn class_sequence(&self, tokens: &[String], subject: usize) -> String {
        let mut codes: Vec<&'static str> = Vec::new();
        let mut boundary = false;
        for class in self.classes(tokens, subject) {
            if class == TokenClass::Determiner {
                boundary = true;
            }
            if let Some(code) = class.code() {
                if (code == "o" || code == "a") && codes.last() == Some(&code) && !boundary {
                    continue;
                }
                codes.push(code);
                boundary = false;
            }
        }
        codes.join("-")
    }
}
