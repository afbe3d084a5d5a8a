//! Versioned prompt assets. Bump the suffix when wording changes so recorded
//! transcripts can be matched to the prompt that produced them.

use crate::types::{NliItem, ReasoningFamily};

pub const VERSION: &str = "v1";

pub const CLASSIFY: &str = include_str!("../../assets/prompts/classify_v1.txt");
pub const EXTRACT: &str = include_str!("../../assets/prompts/extract_v1.txt");
pub const BASELINE_COT: &str = include_str!("../../assets/prompts/baseline_cot_v1.txt");
pub const BASELINE_DIRECT: &str = include_str!("../../assets/prompts/baseline_direct_v1.txt");

pub fn render(template: &str, item: &NliItem, hint: Option<ReasoningFamily>) -> String {
    let hint = match hint {
        Some(f) => format!("The problem belongs to {} (\"family\": \"{}\").\n", f.title(), f.as_str()),
        None => String::new(),
    };
    template
        .replace("{family_hint}", &hint)
        .replace("{premise}", &item.premise_text)
        .replace("{statement}", &item.statement_text)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;

    #[test]
    fn placeholders_are_filled() {
        let item = fixtures::problem_39();
        for t in [CLASSIFY, EXTRACT, BASELINE_COT, BASELINE_DIRECT] {
            let p = render(t, &item, Some(ReasoningFamily::RiskStateAbstraction));
            assert!(!p.contains("{premise}") && !p.contains("{statement}") && !p.contains("{family_hint}"));
            assert!(p.contains("saddle anesthesia"));
        }
    }
}
