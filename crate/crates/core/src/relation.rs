//! Closed vocabularies shared by every stage: discourse relations, the nine
//! if-then commonsense relations, their categories and dataset splits.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("unknown {kind} `{value}` (expected one of: {expected})")]
pub struct UnknownName {
    pub kind: &'static str,
    pub value: String,
    pub expected: String,
}

impl UnknownName {
    pub fn new<T: fmt::Display>(kind: &'static str, value: &str, all: &[T]) -> Self {
        UnknownName {
            kind,
            value: value.to_string(),
            expected: all.iter().map(|t| t.to_string()).collect::<Vec<_>>().join(", "),
        }
    }
}

/// Discourse relation types of the eventuality graph.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum DiscourseRelation {
    Precedence,
    Succession,
    Synchronization,
    Reason,
    Result,
    Condition,
    Contrast,
    Concession,
    Conjunction,
    Instantiation,
    Restatement,
    Alternative,
    ChosenAlternative,
    Exception,
    #[serde(rename = "Co_Occurrence")]
    CoOccurrence,
}

impl DiscourseRelation {
    pub const ALL: [DiscourseRelation; 15] = [
        DiscourseRelation::Precedence,
        DiscourseRelation::Succession,
        DiscourseRelation::Synchronization,
        DiscourseRelation::Reason,
        DiscourseRelation::Result,
        DiscourseRelation::Condition,
        DiscourseRelation::Contrast,
        DiscourseRelation::Concession,
        DiscourseRelation::Conjunction,
        DiscourseRelation::Instantiation,
        DiscourseRelation::Restatement,
        DiscourseRelation::Alternative,
        DiscourseRelation::ChosenAlternative,
        DiscourseRelation::Exception,
        DiscourseRelation::CoOccurrence,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            DiscourseRelation::Precedence => "Precedence",
            DiscourseRelation::Succession => "Succession",
            DiscourseRelation::Synchronization => "Synchronization",
            DiscourseRelation::Reason => "Reason",
            DiscourseRelation::Result => "Result",
            DiscourseRelation::Condition => "Condition",
            DiscourseRelation::Contrast => "Contrast",
            DiscourseRelation::Concession => "Concession",
            DiscourseRelation::Conjunction => "Conjunction",
            DiscourseRelation::Instantiation => "Instantiation",
            DiscourseRelation::Restatement => "Restatement",
            DiscourseRelation::Alternative => "Alternative",
            DiscourseRelation::ChosenAlternative => "ChosenAlternative",
            DiscourseRelation::Exception => "Exception",
            DiscourseRelation::CoOccurrence => "Co_Occurrence",
        }
    }

    /// Temporal order of the head eventuality relative to the tail, as implied
    /// by the connective semantics. Used to certify extracted candidates
    /// independently of the selection rule tables.
    pub fn head_order(self) -> TemporalOrder {
        match self {
            // "h, then t" / "h, so t"
            DiscourseRelation::Precedence | DiscourseRelation::Result => TemporalOrder::Before,
            // "h after t" / "h because t" / "h if t"
            DiscourseRelation::Succession
            | DiscourseRelation::Reason
            | DiscourseRelation::Condition => TemporalOrder::After,
            // "h while t" / "h and t"
            DiscourseRelation::Synchronization | DiscourseRelation::Conjunction => {
                TemporalOrder::Simultaneous
            }
            _ => TemporalOrder::Unordered,
        }
    }
}

impl fmt::Display for DiscourseRelation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for DiscourseRelation {
    type Err = UnknownName;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        DiscourseRelation::ALL
            .iter()
            .copied()
            .find(|r| r.as_str() == s || (s == "CoOccurrence" && *r == DiscourseRelation::CoOccurrence))
            .ok_or_else(|| UnknownName::new("discourse relation", s, &DiscourseRelation::ALL))
    }
}

/// Order of one eventuality relative to another.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TemporalOrder {
    Before,
    After,
    Simultaneous,
    Unordered,
}

impl TemporalOrder {
    pub fn flip(self) -> TemporalOrder {
        match self {
            TemporalOrder::Before => TemporalOrder::After,
            TemporalOrder::After => TemporalOrder::Before,
            other => other,
        }
    }
}

/// The nine if-then commonsense relations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum CommonsenseRelation {
    #[serde(rename = "xIntent")]
    XIntent,
    #[serde(rename = "xNeed")]
    XNeed,
    #[serde(rename = "xAttr")]
    XAttr,
    #[serde(rename = "xEffect")]
    XEffect,
    #[serde(rename = "xWant")]
    XWant,
    #[serde(rename = "xReact")]
    XReact,
    #[serde(rename = "oEffect")]
    OEffect,
    #[serde(rename = "oWant")]
    OWant,
    #[serde(rename = "oReact")]
    OReact,
}

impl CommonsenseRelation {
    pub const ALL: [CommonsenseRelation; 9] = [
        CommonsenseRelation::OEffect,
        CommonsenseRelation::OReact,
        CommonsenseRelation::OWant,
        CommonsenseRelation::XAttr,
        CommonsenseRelation::XEffect,
        CommonsenseRelation::XIntent,
        CommonsenseRelation::XNeed,
        CommonsenseRelation::XReact,
        CommonsenseRelation::XWant,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            CommonsenseRelation::XIntent => "xIntent",
            CommonsenseRelation::XNeed => "xNeed",
            CommonsenseRelation::XAttr => "xAttr",
            CommonsenseRelation::XEffect => "xEffect",
            CommonsenseRelation::XWant => "xWant",
            CommonsenseRelation::XReact => "xReact",
            CommonsenseRelation::OEffect => "oEffect",
            CommonsenseRelation::OWant => "oWant",
            CommonsenseRelation::OReact => "oReact",
        }
    }

    /// Relations whose tail describes the other participant (PersonY).
    pub fn is_theme(self) -> bool {
        matches!(
            self,
            CommonsenseRelation::OEffect | CommonsenseRelation::OWant | CommonsenseRelation::OReact
        )
    }
}

impl fmt::Display for CommonsenseRelation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for CommonsenseRelation {
    type Err = UnknownName;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        CommonsenseRelation::ALL
            .iter()
            .copied()
            .find(|r| r.as_str() == s)
            .ok_or_else(|| UnknownName::new("commonsense relation", s, &CommonsenseRelation::ALL))
    }
}

/// Grouping of the nine relations by chronological order and subject.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RelationCategory {
    CauseAgent,
    Stative,
    EffectAgent,
    EffectTheme,
}

impl RelationCategory {
    pub const ALL: [RelationCategory; 4] = [
        RelationCategory::CauseAgent,
        RelationCategory::Stative,
        RelationCategory::EffectAgent,
        RelationCategory::EffectTheme,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            RelationCategory::CauseAgent => "cause_agent",
            RelationCategory::Stative => "stative",
            RelationCategory::EffectAgent => "effect_agent",
            RelationCategory::EffectTheme => "effect_theme",
        }
    }

    pub fn is_theme(self) -> bool {
        self == RelationCategory::EffectTheme
    }
}

impl fmt::Display for RelationCategory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for RelationCategory {
    type Err = UnknownName;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        RelationCategory::ALL
            .iter()
            .copied()
            .find(|c| c.as_str() == s)
            .ok_or_else(|| UnknownName::new("relation category", s, &RelationCategory::ALL))
    }
}

/// Assignment of each commonsense relation to a category.
///
/// The four categories always partition the nine relations; only the home
/// of `xReact` is configurable.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CategoryMap {
    pub xreact_stative: bool,
}

impl Default for CategoryMap {
    fn default() -> Self {
        CategoryMap { xreact_stative: false }
    }
}

impl CategoryMap {
    pub fn category(&self, relation: CommonsenseRelation) -> RelationCategory {
        use CommonsenseRelation::*;
        match relation {
            XIntent | XNeed => RelationCategory::CauseAgent,
            XAttr => RelationCategory::Stative,
            XReact if self.xreact_stative => RelationCategory::Stative,
            XEffect | XWant | XReact => RelationCategory::EffectAgent,
            OEffect | OWant | OReact => RelationCategory::EffectTheme,
        }
    }

    pub fn members(&self, category: RelationCategory) -> Vec<CommonsenseRelation> {
        CommonsenseRelation::ALL
            .iter()
            .copied()
            .filter(|r| self.category(*r) == category)
            .collect()
    }
}

/// Dataset split of a commonsense tuple.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Dev,
    Test,
    Populated,
}

impl Split {
    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Dev => "dev",
            Split::Test => "test",
            Split::Populated => "populated",
        }
    }
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Split {
    type Err = UnknownName;

    /// Accepts the canonical names plus the abbreviations used by the
    /// pivoted seed-KB release (`trn`, `tst`).
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "train" | "trn" => Ok(Split::Train),
            "dev" => Ok(Split::Dev),
            "test" | "tst" => Ok(Split::Test),
            "populated" => Ok(Split::Populated),
            _ => Err(UnknownName::new(
                "split",
                s,
                &["train", "trn", "dev", "test", "tst", "populated"],
            )),
        }
    }
}
