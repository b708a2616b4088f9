use regex::Regex;
use serde::Deserialize;

use super::{IftError, IftItem};

/// Passes allowed before a rule set is declared non-converging.
const MAX_PASSES: usize = 8;

#[derive(Debug, Clone)]
pub struct CleaningRule {
    pub name: String,
    pattern: Regex,
    replacement: String,
}

impl CleaningRule {
    pub fn new(name: impl Into<String>, pattern: &str, replacement: impl Into<String>) -> Result<Self, IftError> {
        let name = name.into();
        let pattern = Regex::new(pattern).map_err(|e| IftError::Rules(format!("rule {name}: {e}")))?;
        Ok(Self { name, pattern, replacement: replacement.into() })
    }

    pub fn pattern(&self) -> &str {
        self.pattern.as_str()
    }

    pub fn apply(&self, text: &str) -> String {
        self.pattern.replace_all(text, self.replacement.as_str()).into_owned()
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RuleFile {
    #[serde(default)]
    rule: Vec<RuleEntry>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RuleEntry {
    name: String,
    pattern: String,
    replacement: String,
}

/// Ordered rewrite rules. [`CleaningRules::apply`] repeats the whole list
/// until the text stops changing, so a cleaned text is a fixed point.
#[derive(Debug, Clone, Default)]
pub struct CleaningRules {
    rules: Vec<CleaningRule>,
}

impl CleaningRules {
    pub fn empty() -> Self {
        Self::default()
    }

    pub fn shipped() -> Self {
        Self::from_toml(include_str!("../../assets/cleaning_rules.toml")).expect("shipped rules are valid")
    }

    pub fn from_toml(text: &str) -> Result<Self, IftError> {
        let file: RuleFile = toml::from_str(text).map_err(|e| IftError::Rules(e.to_string()))?;
        let rules = file
            .rule
            .into_iter()
            .map(|r| CleaningRule::new(r.name, &r.pattern, r.replacement))
            .collect::<Result<_, _>>()?;
        Ok(Self { rules })
    }

    pub fn from_rules(rules: Vec<CleaningRule>) -> Self {
        Self { rules }
    }

    pub fn rules(&self) -> &[CleaningRule] {
        &self.rules
    }

    pub fn apply(&self, text: &str) -> String {
        let mut current = text.to_string();
        for _ in 0..MAX_PASSES {
            let next = self.rules.iter().fold(current.clone(), |acc, r| r.apply(&acc));
            if next == current {
                break;
            }
            current = next;
        }
        current
    }

    pub fn is_clean(&self, text: &str) -> bool {
        self.apply(text) == text
    }
}

/// Applies the rules to the item's answer.
pub fn clean_item(item: IftItem, rules: &CleaningRules) -> IftItem {
    let answer = rules.apply(&item.answer);
    IftItem { answer, ..item }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::PaperId;
    use crate::ift::QuestionFocus;

    fn item(answer: &str) -> IftItem {
        IftItem {
            question: "q".into(),
            answer: answer.into(),
            source_paper: PaperId::new("P1").unwrap(),
            focus: QuestionFocus::Model,
        }
    }

    #[test]
    fn rewrite_then_grammar_fix() {
        let rules = CleaningRules::shipped();
        let out = clean_item(item("This study used PLS to predict sweetness in apples"), &rules);
        assert_eq!(out.answer, "Related studies show that PLS can be used to predict sweetness in apples");
    }

    #[test]
    fn first_rule_alone_matches_exemplar() {
        let rules = CleaningRules::shipped();
        let first = CleaningRules::from_rules(rules.rules()[..1].to_vec());
        assert_eq!(
            first.apply("This study used PLS to predict sweetness in apples"),
            "Related studies show that PLS can be used in predict sweetness in apples"
        );
    }

    #[test]
    fn idempotent_and_identity_cases() {
        let rules = CleaningRules::shipped();
        let target = "Related studies show that PLS can be used to predict sweetness in apples.";
        assert_eq!(rules.apply(target), target);
        for text in ["This study used SNV, MSC to detect melamine in milk. This study used CARS to select bands.", "plain"] {
            let once = rules.apply(text);
            assert_eq!(rules.apply(&once), once);
            assert!(rules.is_clean(&once));
        }
        assert_eq!(CleaningRules::empty().apply("This study used X to Y"), "This study used X to Y");
    }

    #[test]
    fn bad_rule_file() {
        assert!(CleaningRules::from_toml("[[rule]]\nname='x'\npattern='('\nreplacement=''").is_err());
        assert!(CleaningRules::from_toml("rule = 3").is_err());
        assert_eq!(CleaningRules::from_toml("").unwrap().rules().len(), 0);
    }
}
