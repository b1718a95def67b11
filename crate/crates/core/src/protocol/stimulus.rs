use std::collections::{HashMap, HashSet};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::ProtocolError;

/// Minimum number of distinct stimulus items per category.
pub const MIN_ITEMS: usize = 4;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CategoryRole {
    ConceptA,
    ConceptB,
    EvalGood,
    EvalBad,
}

impl CategoryRole {
    pub const ALL: [CategoryRole; 4] = [
        CategoryRole::ConceptA,
        CategoryRole::ConceptB,
        CategoryRole::EvalGood,
        CategoryRole::EvalBad,
    ];

    pub fn is_concept(self) -> bool {
        matches!(self, CategoryRole::ConceptA | CategoryRole::ConceptB)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Category {
    pub label: String,
    pub items: Vec<String>,
}

impl Category {
    pub fn new(label: impl Into<String>, items: impl IntoIterator<Item = impl Into<String>>) -> Self {
        Self {
            label: label.into(),
            items: items.into_iter().map(Into::into).collect(),
        }
    }
}

/// Two concepts and two evaluations, each with its list of display tokens.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct StimulusSet {
    pub topic: String,
    pub concept_a: Category,
    pub concept_b: Category,
    pub eval_good: Category,
    pub eval_bad: Category,
}

impl StimulusSet {
    pub fn category(&self, role: CategoryRole) -> &Category {
        match role {
            CategoryRole::ConceptA => &self.concept_a,
            CategoryRole::ConceptB => &self.concept_b,
            CategoryRole::EvalGood => &self.eval_good,
            CategoryRole::EvalBad => &self.eval_bad,
        }
    }

    /// Which category an item belongs to, if any.
    pub fn role_of(&self, item: &str) -> Option<CategoryRole> {
        CategoryRole::ALL
            .into_iter()
            .find(|&role| self.category(role).items.iter().any(|i| i == item))
    }

    pub fn validate(&self) -> Result<(), ProtocolError> {
        let mut labels = HashSet::new();
        let mut owner: HashMap<&str, &str> = HashMap::new();
        for role in CategoryRole::ALL {
            let cat = self.category(role);
            let label = cat.label.trim();
            if label.is_empty() {
                return Err(ProtocolError::EmptyLabel(format!("{role:?}")));
            }
            if !labels.insert(label.to_lowercase()) {
                return Err(ProtocolError::DuplicateLabel(cat.label.clone()));
            }
            let mut distinct = HashSet::new();
            for item in &cat.items {
                let item = item.trim();
                if item.is_empty() {
                    continue;
                }
                distinct.insert(item);
                if let Some(first) = owner.get(item) {
                    if *first != cat.label {
                        return Err(ProtocolError::SharedItem {
                            item: item.to_string(),
                            first: first.to_string(),
                            second: cat.label.clone(),
                        });
                    }
                }
                owner.insert(item, &cat.label);
            }
            if distinct.len() < MIN_ITEMS {
                return Err(ProtocolError::TooFewItems {
                    category: cat.label.clone(),
                    found: distinct.len(),
                });
            }
        }
        Ok(())
    }

    /// A small UK / Ireland attitude set, used by the simulator and demos.
    pub fn uk_ireland() -> Self {
        Self {
            topic: "How amiable Irish people are towards the United Kingdom".into(),
            concept_a: Category::new(
                "United Kingdom",
                ["London", "Union Jack", "Big Ben", "Pound Sterling", "Westminster"],
            ),
            concept_b: Category::new(
                "Ireland",
                ["Dublin", "Tricolour", "Shamrock", "Leinster House", "Cliffs of Moher"],
            ),
            eval_good: Category::new("Good", ["Joy", "Love", "Peace", "Wonderful", "Pleasure"]),
            eval_bad: Category::new("Bad", ["Agony", "Terrible", "Horrible", "Nasty", "Evil"]),
        }
    }

    /// Renders the set in the plain-text format read by [`parse_stimulus_sets`].
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "topic: {}", self.topic);
        for role in CategoryRole::ALL {
            let cat = self.category(role);
            let _ = writeln!(out, "\n{}:", cat.label);
            for item in &cat.items {
                let _ = writeln!(out, "  {item}");
            }
        }
        out
    }
}

/// Parses one or more stimulus-set documents.
///
/// A document starts with `topic: ...` followed by four category blocks in the
/// order concept A, concept B, good, bad. Each block is a `Label:` line and
/// then one item per line. Documents are separated by a `---` line; `#`
/// starts a comment line.
pub fn parse_stimulus_sets(text: &str) -> Result<Vec<StimulusSet>, ProtocolError> {
    let mut sets = Vec::new();
    let mut doc: Vec<(usize, &str)> = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line == "---" {
            if !doc.is_empty() {
                sets.push(parse_document(&doc)?);
                doc.clear();
            }
            continue;
        }
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        doc.push((idx + 1, line));
    }
    if !doc.is_empty() {
        sets.push(parse_document(&doc)?);
    }
    if sets.is_empty() {
        return Err(ProtocolError::Parse {
            line: 0,
            message: "no stimulus set found".into(),
        });
    }
    Ok(sets)
}

fn parse_document(lines: &[(usize, &str)]) -> Result<StimulusSet, ProtocolError> {
    let (first_line, first) = lines[0];
    let topic = first
        .strip_prefix("topic:")
        .map(|t| t.trim().to_string())
        .ok_or_else(|| ProtocolError::Parse {
            line: first_line,
            message: "expected `topic: ...`".into(),
        })?;

    let mut categories: Vec<Category> = Vec::new();
    for &(line_no, line) in &lines[1..] {
        if let Some(label) = line.strip_suffix(':') {
            if categories.len() == 4 {
                return Err(ProtocolError::Parse {
                    line: line_no,
                    message: "more than four categories".into(),
                });
            }
            categories.push(Category::new(label.trim(), Vec::<String>::new()));
        } else {
            let current = categories.last_mut().ok_or_else(|| ProtocolError::Parse {
                line: line_no,
                message: "item before any category label".into(),
            })?;
            current.items.push(line.to_string());
        }
    }
    let last_line = lines.last().map(|l| l.0).unwrap_or(first_line);
    if categories.len() != 4 {
        return Err(ProtocolError::Parse {
            line: last_line,
            message: format!("expected 4 categories, found {}", categories.len()),
        });
    }
    let mut it = categories.into_iter();
    let set = StimulusSet {
        topic,
        concept_a: it.next().unwrap(),
        concept_b: it.next().unwrap(),
        eval_good: it.next().unwrap(),
        eval_bad: it.next().unwrap(),
    };
    set.validate()?;
    Ok(set)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn example_set_is_valid() {
        StimulusSet::uk_ireland().validate().unwrap();
    }

    #[test]
    fn too_few_items_names_category() {
        let mut set = StimulusSet::uk_ireland();
        set.eval_bad.items.truncate(3);
        assert_eq!(
            set.validate(),
            Err(ProtocolError::TooFewItems {
                category: "Bad".into(),
                found: 3
            })
        );
    }

    #[test]
    fn repeated_items_do_not_count_twice() {
        let mut set = StimulusSet::uk_ireland();
        set.concept_b.items = vec!["Dublin".into(); 6];
        assert!(matches!(
            set.validate(),
            Err(ProtocolError::TooFewItems { category, found: 1 }) if category == "Ireland"
        ));
    }

    #[test]
    fn shared_item_rejected() {
        let mut set = StimulusSet::uk_ireland();
        set.eval_good.items.push("London".into());
        assert!(matches!(set.validate(), Err(ProtocolError::SharedItem { .. })));
    }

    #[test]
    fn duplicate_labels_rejected() {
        let mut set = StimulusSet::uk_ireland();
        set.concept_b.label = "united kingdom".into();
        assert!(matches!(set.validate(), Err(ProtocolError::DuplicateLabel(_))));
    }

    #[test]
    fn text_round_trip() {
        let set = StimulusSet::uk_ireland();
        let parsed = parse_stimulus_sets(&set.to_text()).unwrap();
        assert_eq!(parsed, vec![set]);
    }

    #[test]
    fn parses_multiple_documents() {
        let text = "\
# climate
topic: Carbon footprint
Low carbon:
bicycle
solar panel
bus
wind turbine
High carbon:
SUV
coal
jet
diesel
Good:
joy
love
peace
pleasure
Bad:
agony
evil
nasty
awful
---
";
        let doubled = format!("{text}{}", StimulusSet::uk_ireland().to_text());
        let sets = parse_stimulus_sets(&doubled).unwrap();
        assert_eq!(sets.len(), 2);
        assert_eq!(sets[0].concept_a.label, "Low carbon");
        assert_eq!(sets[0].eval_bad.items.len(), 4);
    }

    #[test]
    fn missing_topic_is_a_parse_error() {
        let err = parse_stimulus_sets("Good:\njoy\n").unwrap_err();
        assert!(matches!(err, ProtocolError::Parse { line: 1, .. }));
    }
}
