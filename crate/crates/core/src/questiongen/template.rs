use std::path::Path;

use serde::{Deserialize, Serialize};

use super::BackendKind;
use crate::datasets::Claim;

const DEFAULT_TEMPLATE: &str = include_str!("../../templates/default_prompt.toml");

/// Marker line closing the worked example in a rendered prompt.
pub const EXEMPLAR_END: &str = "### End of example";

/// One-shot chain-of-thought prompt: a single worked exemplar (claim,
/// reasoning, questions) followed by the output-format instruction and the
/// target claim.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PromptTemplate {
    pub system_preamble: String,
    pub exemplar_claim: String,
    pub exemplar_reasoning: String,
    pub exemplar_questions: Vec<String>,
    pub output_schema_instruction: String,
}

impl Default for PromptTemplate {
    fn default() -> Self {
        Self::from_toml_str(DEFAULT_TEMPLATE).expect("bundled template is valid")
    }
}

impl PromptTemplate {
    pub fn from_toml_str(text: &str) -> Result<Self, String> {
        let template: Self = toml::from_str(text).map_err(|e| e.to_string())?;
        template.validate()?;
        Ok(template)
    }

    pub fn load(path: &Path) -> Result<Self, String> {
        let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
        Self::from_toml_str(&text).map_err(|e| format!("{}: {e}", path.display()))
    }

    pub fn validate(&self) -> Result<(), String> {
        let fields = [
            ("system_preamble", &self.system_preamble),
            ("exemplar_claim", &self.exemplar_claim),
            ("exemplar_reasoning", &self.exemplar_reasoning),
            ("output_schema_instruction", &self.output_schema_instruction),
        ];
        for (name, value) in fields {
            if value.trim().is_empty() {
                return Err(format!("template field {name} is empty"));
            }
        }
        if self.exemplar_questions.is_empty()
            || self.exemplar_questions.iter().any(|q| q.trim().is_empty())
        {
            return Err("template needs at least one non-empty exemplar question".into());
        }
        Ok(())
    }

    /// Renders the full one-shot prompt for `claim`.
    pub fn render(&self, claim: &str) -> String {
        let exemplar_output = serde_json::json!({ "questions": self.exemplar_questions });
        format!(
            "{preamble}\n\n\
             ### Example\n\
             Claim: {ex_claim}\n\
             Reasoning: {ex_reasoning}\n\
             Output: {ex_output}\n\
             {EXEMPLAR_END}\n\n\
             {instruction}\n\n\
             Claim: {claim}\n\
             Reasoning:",
            preamble = self.system_preamble.trim(),
            ex_claim = self.exemplar_claim.trim(),
            ex_reasoning = self.exemplar_reasoning.trim(),
            ex_output = exemplar_output,
            instruction = self.output_schema_instruction.trim(),
        )
    }
}

/// Prompt sent for `claim`. Fine-tuned sequence-to-sequence models were
/// trained on claim -> question pairs and receive the bare claim text.
pub fn build_prompt(claim: &Claim, template: &PromptTemplate, kind: BackendKind) -> String {
    match kind {
        BackendKind::FineTunedSeq2seq => claim.text.clone(),
        BackendKind::InstructionLlm => template.render(&claim.text),
    }
}
