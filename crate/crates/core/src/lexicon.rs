//! Bundled word lists used by the normalizer and the pronoun aggregation.
//!
//! The lists are deliberately small. Anything outside them falls back to
//! positional rules in [`crate::normalize`].

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

/// Placeholders used by the seed KB for the event participants.
pub const PLACEHOLDERS: [&str; 3] = ["PersonX", "PersonY", "PersonZ"];

pub const COPULAS: &[&str] = &["am", "is", "are", "was", "were", "be", "been", "being", "'m", "'re"];

pub const DETERMINERS: &[&str] = &[
    "a", "an", "the", "this", "that", "these", "those", "some", "any", "every", "each", "no",
    "another", "all", "my", "his", "your", "our", "their", "its",
];

pub const AUXILIARIES: &[&str] = &[
    "will", "would", "can", "could", "may", "might", "shall", "should", "must", "not", "n't",
    "never", "'ll", "'d", "also", "just", "always", "often", "usually", "still", "really",
    "finally", "then", "already",
];

/// `do` forms count as auxiliaries only in front of a negation or a verb.
pub const DO_FORMS: &[&str] = &["do", "does", "did"];

pub const ADVERBS: &[&str] = &[
    "very", "so", "too", "quite", "fast", "well", "again", "even", "together", "away", "back",
    "up", "down", "out", "off", "soon", "later", "now", "today", "tonight", "yesterday",
    "tomorrow", "here", "there", "much", "more", "badly", "quickly", "slowly", "hard",
];

pub const PREPOSITIONS: &[&str] = &[
    "to", "at", "in", "on", "for", "with", "from", "by", "about", "of", "into", "onto", "over",
    "under", "after", "before", "during", "without", "through", "across", "around", "near",
    "behind", "toward", "towards", "upon", "against", "like",
];

/// Verbs after which a past participle reads as an adjective.
pub const LINKING_VERBS: &[&str] = &["be", "get", "feel", "become", "seem", "look", "sound", "grow", "stay", "remain"];

pub const ADJECTIVES: &[&str] = &[
    "hungry", "thirsty", "tired", "happy", "sad", "angry", "upset", "glad", "sorry", "full",
    "sick", "ill", "nice", "kind", "mean", "rude", "polite", "friendly", "helpful", "generous",
    "grateful", "thankful", "proud", "ashamed", "embarrassed", "nervous", "anxious", "afraid",
    "scared", "excited", "bored", "lonely", "calm", "relaxed", "satisfied", "content",
    "confident", "curious", "brave", "smart", "clever", "lazy", "busy", "late", "early", "rich",
    "poor", "strong", "weak", "healthy", "hurt", "injured", "wet", "dry", "hot", "cold", "warm",
    "clean", "dirty", "ready", "free", "safe", "sleepy", "awake", "good", "bad", "great", "fine",
    "loving", "caring", "responsible", "careful", "careless", "determined", "annoyed",
    "frustrated", "disappointed", "surprised", "shocked", "jealous", "worried", "impressed",
    "relieved", "pleased", "delighted", "thoughtful", "patient", "honest", "loyal", "funny",
    "serious", "quiet", "loud", "beautiful", "pretty", "ugly", "young", "old", "fat", "thin",
    "sore", "dizzy", "famous", "successful", "independent", "stubborn", "shy", "bold",
    "sweet", "cruel", "fair", "unfair", "wise", "silly", "crazy", "mad", "lucky", "unlucky",
    "alone", "alive", "dead", "asleep", "drunk", "hopeful", "fearful", "useful", "joyful",
    "terrible", "horrible", "awful", "fun", "easy", "difficult", "hard-working", "energetic",
];

pub const ADJECTIVE_SUFFIXES: &[&str] = &["ful", "ous", "ive", "able", "ible", "less", "ish"];

/// Base forms of common verbs. Suffix stripping only ever produces a member
/// of this list, which keeps lemmatization idempotent.
pub const BASE_VERBS: &[&str] = &[
    "accept", "adopt", "agree", "allow", "answer", "apologize", "apply", "argue", "arrive",
    "ask", "attack", "attend", "avoid", "bake", "be", "become", "begin", "believe", "bet",
    "blame", "borrow", "break", "bring", "build", "buy", "call", "care", "carry", "catch",
    "celebrate", "chase", "chat", "cheat", "check", "cheer", "choose", "clean", "climb",
    "close", "collect", "come", "comfort", "compete", "complain", "convince", "cook", "cough",
    "count", "cry", "cut", "dance", "decide", "defend", "deliver", "deny", "die", "dig",
    "divorce", "do", "donate", "draw", "dress", "drink", "drive", "drop", "earn", "eat",
    "email", "encourage", "enjoy", "enter", "escape", "exercise", "expect", "explain",
    "explore", "fail", "fall", "fear", "feed", "feel", "fight", "find", "finish", "fire",
    "fish", "fix", "fly", "follow", "forget", "forgive", "gamble", "gather", "get", "give",
    "go", "graduate", "greet", "grow", "hate", "have", "heal", "hear", "help", "hide", "hike",
    "hire", "hit", "hold", "hope", "host", "hug", "hunt", "hurry", "hurt", "ignore", "improve",
    "insult", "introduce", "invest", "invite", "join", "jump", "keep", "kick", "kiss", "knock",
    "know", "laugh", "lead", "learn", "leave", "lend", "let", "lie", "lift", "like", "listen",
    "live", "load", "lock", "look", "lose", "love", "make", "marry", "meet", "miss", "mock",
    "move", "need", "nod", "notice", "offer", "open", "order", "organize", "owe", "own", "pack",
    "paint", "panic", "pass", "pay", "pick", "plan", "plant", "play", "pray", "prepare",
    "praise", "print", "promise", "promote", "propose", "protect", "pull", "punch", "punish",
    "push", "put", "quit", "rain", "read", "realize", "receive", "recover", "refuse", "relax",
    "remember", "remind", "rent", "repay", "reply", "rescue", "respect", "rest", "return",
    "reward", "ride", "ring", "rob", "run", "rush", "save", "say", "scare", "scold", "score",
    "scream", "search", "see", "seem", "sell", "send", "set", "shake", "share", "shop",
    "shout", "shower", "sigh", "sign", "sing", "sit", "sleep", "smell", "smile", "sneeze",
    "sound", "spend", "stand", "stare", "start", "starve", "stay", "steal", "stop", "study",
    "suggest", "support", "surprise", "sweat", "sweep", "swim", "take", "talk", "taste",
    "teach", "tease", "tell", "test", "text", "thank", "think", "throw", "tour", "train",
    "travel", "trust", "try", "turn", "type", "understand", "unpack", "use", "visit", "vomit",
    "wait", "wake", "walk", "want", "warn", "wash", "watch", "wave", "wear", "win", "wish",
    "work", "worry", "wrap", "write", "yawn", "yell",
];

/// Irregular inflections mapped to their base form.
pub const IRREGULAR_VERBS: &[(&str, &str)] = &[
    ("ate", "eat"), ("eaten", "eat"), ("became", "become"), ("began", "begin"),
    ("begun", "begin"), ("bought", "buy"), ("broke", "break"), ("broken", "break"),
    ("brought", "bring"), ("built", "build"), ("caught", "catch"), ("chose", "choose"),
    ("chosen", "choose"), ("came", "come"), ("did", "do"), ("does", "do"), ("done", "do"),
    ("drank", "drink"), ("drove", "drive"), ("driven", "drive"), ("fell", "fall"),
    ("fallen", "fall"), ("felt", "feel"), ("fought", "fight"), ("found", "find"),
    ("flew", "fly"), ("forgot", "forget"), ("forgotten", "forget"), ("forgave", "forgive"),
    ("got", "get"), ("gotten", "get"), ("gave", "give"), ("given", "give"), ("went", "go"),
    ("gone", "go"), ("goes", "go"), ("grew", "grow"), ("had", "have"), ("has", "have"),
    ("heard", "hear"), ("hid", "hide"), ("held", "hold"), ("kept", "keep"), ("knew", "know"),
    ("known", "know"), ("led", "lead"), ("left", "leave"), ("lent", "lend"), ("lost", "lose"),
    ("made", "make"), ("met", "meet"), ("paid", "pay"), ("ran", "run"), ("rode", "ride"),
    ("rang", "ring"), ("said", "say"), ("saw", "see"), ("seen", "see"), ("sold", "sell"),
    ("sent", "send"), ("shook", "shake"), ("sang", "sing"), ("sat", "sit"), ("slept", "sleep"),
    ("spent", "spend"), ("stood", "stand"), ("stole", "steal"), ("swam", "swim"),
    ("took", "take"), ("taken", "take"), ("taught", "teach"), ("told", "tell"),
    ("thought", "think"), ("threw", "throw"), ("thrown", "throw"), ("understood", "understand"),
    ("woke", "wake"), ("wore", "wear"), ("won", "win"), ("wrote", "write"),
    ("written", "write"),
];

/// One class of coreferent personal-pronoun forms.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PronounClass {
    /// Nominative form; also the class name.
    pub name: String,
    pub forms: Vec<String>,
    /// Forms that read as possessive determiners.
    pub possessive: Vec<String>,
}

impl PronounClass {
    pub fn new(name: &str, forms: &[&str], possessive: &[&str]) -> Self {
        PronounClass {
            name: name.to_string(),
            forms: forms.iter().map(|s| s.to_string()).collect(),
            possessive: possessive.iter().map(|s| s.to_string()).collect(),
        }
    }
}

pub fn default_pronoun_classes() -> Vec<PronounClass> {
    vec![
        PronounClass::new("i", &["i", "me", "my", "mine", "myself"], &["my"]),
        PronounClass::new("you", &["you", "your", "yours", "yourself"], &["your"]),
        PronounClass::new("he", &["he", "him", "his", "himself"], &["his"]),
        PronounClass::new("she", &["she", "her", "hers", "herself"], &[]),
        PronounClass::new("we", &["we", "us", "our", "ours", "ourselves"], &["our"]),
        PronounClass::new("they", &["they", "them", "their", "theirs", "themselves"], &["their"]),
        PronounClass::new("man", &["man"], &[]),
        PronounClass::new("woman", &["woman"], &[]),
        PronounClass::new("person", &["person"], &[]),
    ]
}

/// Word lists the normalizer consults. Every list is overridable.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Lexicon {
    /// Tokens that can fill the grammatical subject slot.
    pub subjects: BTreeSet<String>,
    pub pronoun_classes: Vec<PronounClass>,
    pub copulas: BTreeSet<String>,
    pub determiners: BTreeSet<String>,
    pub auxiliaries: BTreeSet<String>,
    pub do_forms: BTreeSet<String>,
    pub adverbs: BTreeSet<String>,
    pub prepositions: BTreeSet<String>,
    pub linking_verbs: BTreeSet<String>,
    pub adjectives: BTreeSet<String>,
    pub adjective_suffixes: Vec<String>,
    pub base_verbs: BTreeSet<String>,
    pub irregular_verbs: BTreeMap<String, String>,
}

fn set(words: &[&str]) -> BTreeSet<String> {
    words.iter().map(|s| s.to_string()).collect()
}

impl Default for Lexicon {
    fn default() -> Self {
        let pronoun_classes = default_pronoun_classes();
        let mut subjects = set(&["i", "you", "he", "she", "we", "they", "it", "man", "woman", "person"]);
        subjects.extend(PLACEHOLDERS.iter().map(|p| p.to_string()));
        Lexicon {
            subjects,
            pronoun_classes,
            copulas: set(COPULAS),
            determiners: set(DETERMINERS),
            auxiliaries: set(AUXILIARIES),
            do_forms: set(DO_FORMS),
            adverbs: set(ADVERBS),
            prepositions: set(PREPOSITIONS),
            linking_verbs: set(LINKING_VERBS),
            adjectives: set(ADJECTIVES),
            adjective_suffixes: ADJECTIVE_SUFFIXES.iter().map(|s| s.to_string()).collect(),
            base_verbs: set(BASE_VERBS),
            irregular_verbs: IRREGULAR_VERBS
                .iter()
                .map(|(a, b)| (a.to_string(), b.to_string()))
                .collect(),
        }
    }
}

impl Lexicon {
    /// Index of the pronoun class containing `token`, if any.
    pub fn pronoun_class(&self, token: &str) -> Option<usize> {
        self.pronoun_classes
            .iter()
            .position(|c| c.forms.iter().any(|f| f == token))
    }

    pub fn is_possessive(&self, token: &str) -> bool {
        self.pronoun_classes
            .iter()
            .any(|c| c.possessive.iter().any(|f| f == token))
    }

    pub fn is_placeholder(token: &str) -> bool {
        PLACEHOLDERS.contains(&token)
    }

    pub fn looks_adjective(&self, token: &str) -> bool {
        self.adjectives.contains(token)
            || self
                .adjective_suffixes
                .iter()
                .any(|s| token.len() > s.len() + 2 && token.ends_with(s.as_str()))
    }
}
