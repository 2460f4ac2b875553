use serde_json::Value;

use super::BackendKind;

/// Extracts questions from a raw backend response. `None` is the null
/// generation: the response does not have the required structure.
///
/// Instruction-tuned models must emit a JSON object with a non-empty
/// `questions` array of non-empty strings somewhere in their output; the
/// first object carrying a `questions` key decides. Sequence-to-sequence
/// models emit one question as plain text; its first non-blank line is used.
pub fn parse_generation(raw: &str, kind: BackendKind) -> Option<Vec<String>> {
    match kind {
        BackendKind::FineTunedSeq2seq => raw
            .lines()
            .map(str::trim)
            .find(|l| !l.is_empty())
            .map(|l| vec![l.to_string()]),
        BackendKind::InstructionLlm => {
            let value = first_question_object(raw)?;
            let items = value.get("questions")?.as_array()?;
            if items.is_empty() {
                return None;
            }
            items
                .iter()
                .map(|item| {
                    let q = item.as_str()?.trim();
                    (!q.is_empty()).then(|| q.to_string())
                })
                .collect()
        }
    }
}

fn first_question_object(raw: &str) -> Option<Value> {
    raw.char_indices()
        .filter(|&(_, c)| c == '{')
        .find_map(|(start, _)| {
            let mut stream = serde_json::Deserializer::from_str(&raw[start..]).into_iter::<Value>();
            match stream.next() {
                Some(Ok(v @ Value::Object(_))) if v.get("questions").is_some() => Some(v),
                _ => None,
            }
        })
}
