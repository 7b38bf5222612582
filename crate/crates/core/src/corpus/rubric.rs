//! Labeling rubric: 17 review-comment subcategories and the five groups the
//! classifier predicts.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::CorpusError;

/// The five comment groups, in the canonical column order used by the model
/// output, confusion matrices and every report.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Group {
    Discussion,
    Documentation,
    FalsePositive,
    Functional,
    Refactoring,
}

impl Group {
    pub const COUNT: usize = 5;

    pub const ALL: [Group; 5] = [
        Group::Discussion,
        Group::Documentation,
        Group::FalsePositive,
        Group::Functional,
        Group::Refactoring,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(index: usize) -> Option<Group> {
        Self::ALL.get(index).copied()
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Group::Discussion => "Discussion",
            Group::Documentation => "Documentation",
            Group::FalsePositive => "FalsePositive",
            Group::Functional => "Functional",
            Group::Refactoring => "Refactoring",
        }
    }

    /// Snake-case key used for CSV column suffixes.
    pub fn key(self) -> &'static str {
        match self {
            Group::Discussion => "discussion",
            Group::Documentation => "documentation",
            Group::FalsePositive => "false_positive",
            Group::Functional => "functional",
            Group::Refactoring => "refactoring",
        }
    }
}

impl fmt::Display for Group {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Group {
    type Err = CorpusError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let key = normalize(s);
        Group::ALL
            .into_iter()
            .find(|g| normalize(g.as_str()) == key)
            .ok_or_else(|| CorpusError::UnknownLabel(s.to_string()))
    }
}

/// Fine-grained label assigned by annotators. Stored with every sample but
/// never predicted.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Subcategory {
    Functional,
    Logical,
    Validation,
    Resource,
    Timing,
    SupportIssues,
    Interface,
    SolutionApproach,
    AlternateOutput,
    CodeOrganization,
    VariableNaming,
    VisualRepresentation,
    Documentation,
    DesignDiscussion,
    Question,
    Praise,
    FalsePositive,
}

impl Subcategory {
    pub const ALL: [Subcategory; 17] = [
        Subcategory::Functional,
        Subcategory::Logical,
        Subcategory::Validation,
        Subcategory::Resource,
        Subcategory::Timing,
        Subcategory::SupportIssues,
        Subcategory::Interface,
        Subcategory::SolutionApproach,
        Subcategory::AlternateOutput,
        Subcategory::CodeOrganization,
        Subcategory::VariableNaming,
        Subcategory::VisualRepresentation,
        Subcategory::Documentation,
        Subcategory::DesignDiscussion,
        Subcategory::Question,
        Subcategory::Praise,
        Subcategory::FalsePositive,
    ];

    /// Rubric display name.
    pub fn name(self) -> &'static str {
        match self {
            Subcategory::Functional => "Functional",
            Subcategory::Logical => "Logical",
            Subcategory::Validation => "Validation",
            Subcategory::Resource => "Resource",
            Subcategory::Timing => "Timing",
            Subcategory::SupportIssues => "Support issues",
            Subcategory::Interface => "Interface",
            Subcategory::SolutionApproach => "Solution approach",
            Subcategory::AlternateOutput => "Alternate Output",
            Subcategory::CodeOrganization => "Code Organization",
            Subcategory::VariableNaming => "Variable Naming",
            Subcategory::VisualRepresentation => "Visual Representation",
            Subcategory::Documentation => "Documentation",
            Subcategory::DesignDiscussion => "Design discussion",
            Subcategory::Question => "Question",
            Subcategory::Praise => "Praise",
            Subcategory::FalsePositive => "False positive",
        }
    }

    pub fn group(self) -> Group {
        use Subcategory::*;
        match self {
            Functional | Logical | Validation | Resource | Timing | SupportIssues | Interface => {
                Group::Functional
            }
            SolutionApproach | AlternateOutput | CodeOrganization | VariableNaming
            | VisualRepresentation => Group::Refactoring,
            Documentation => Group::Documentation,
            DesignDiscussion | Question | Praise => Group::Discussion,
            FalsePositive => Group::FalsePositive,
        }
    }
}

impl fmt::Display for Subcategory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Subcategory {
    type Err = CorpusError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let key = normalize(s);
        // "Support" alone is a common shorthand in annotation sheets.
        if key == "support" {
            return Ok(Subcategory::SupportIssues);
        }
        Subcategory::ALL
            .into_iter()
            .find(|c| normalize(c.name()) == key || normalize(&format!("{c:?}")) == key)
            .ok_or_else(|| CorpusError::UnknownLabel(s.to_string()))
    }
}

/// Maps a subcategory name to its group.
pub fn group_of(subcategory: &str) -> Result<Group, CorpusError> {
    Ok(subcategory.parse::<Subcategory>()?.group())
}

fn normalize(s: &str) -> String {
    s.chars()
        .filter(|c| c.is_alphanumeric())
        .flat_map(char::to_lowercase)
        .collect()
}
