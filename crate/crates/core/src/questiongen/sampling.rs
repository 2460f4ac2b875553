use serde::{Deserialize, Serialize};

/// Decoding parameters transmitted to a generation backend. Bounds are
/// checked on construction and deserialization; nothing is clamped.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawSampling")]
pub struct SamplingConfig {
    pub temperature: f64,
    pub top_p: f64,
    pub top_k: u32,
    pub tfs_z: f64,
    pub max_new_tokens: u32,
    pub repetition_penalty: f64,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSampling {
    temperature: f64,
    top_p: f64,
    top_k: u32,
    tfs_z: f64,
    max_new_tokens: u32,
    repetition_penalty: f64,
}

impl TryFrom<RawSampling> for SamplingConfig {
    type Error = String;

    fn try_from(r: RawSampling) -> Result<Self, Self::Error> {
        Self::new(
            r.temperature,
            r.top_p,
            r.top_k,
            r.tfs_z,
            r.max_new_tokens,
            r.repetition_penalty,
        )
    }
}

impl SamplingConfig {
    pub fn new(
        temperature: f64,
        top_p: f64,
        top_k: u32,
        tfs_z: f64,
        max_new_tokens: u32,
        repetition_penalty: f64,
    ) -> Result<Self, String> {
        let unit = |name: &str, v: f64| {
            if v > 0.0 && v <= 1.0 {
                Ok(())
            } else {
                Err(format!("{name} must be in (0, 1], got {v}"))
            }
        };
        if !(temperature > 0.0 && temperature.is_finite()) {
            return Err(format!("temperature must be positive, got {temperature}"));
        }
        unit("top_p", top_p)?;
        unit("tfs_z", tfs_z)?;
        if top_k == 0 {
            return Err("top_k must be at least 1".into());
        }
        if max_new_tokens == 0 {
            return Err("max_new_tokens must be at least 1".into());
        }
        if !(repetition_penalty >= 1.0 && repetition_penalty.is_finite()) {
            return Err(format!(
                "repetition_penalty must be >= 1, got {repetition_penalty}"
            ));
        }
        Ok(Self {
            temperature,
            top_p,
            top_k,
            tfs_z,
            max_new_tokens,
            repetition_penalty,
        })
    }

    /// Inference settings used for the fine-tuned sequence-to-sequence
    /// question generators.
    pub fn seq2seq_default() -> Self {
        Self {
            temperature: 1.5,
            top_p: 0.95,
            top_k: 40,
            tfs_z: 1.0,
            max_new_tokens: 300,
            repetition_penalty: 1.1,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seq2seq_defaults_are_valid() {
        let d = SamplingConfig::seq2seq_default();
        assert_eq!(
            SamplingConfig::new(1.5, 0.95, 40, 1.0, 300, 1.1).unwrap(),
            d
        );
    }

    #[test]
    fn out_of_range_rejected() {
        assert!(SamplingConfig::new(0.0, 0.95, 40, 1.0, 300, 1.1).is_err());
        assert!(SamplingConfig::new(1.0, 0.0, 40, 1.0, 300, 1.1).is_err());
        assert!(SamplingConfig::new(1.0, 1.01, 40, 1.0, 300, 1.1).is_err());
        assert!(SamplingConfig::new(1.0, 0.9, 0, 1.0, 300, 1.1).is_err());
        assert!(SamplingConfig::new(1.0, 0.9, 40, 1.5, 300, 1.1).is_err());
        assert!(SamplingConfig::new(1.0, 0.9, 40, 1.0, 0, 1.1).is_err());
        assert!(SamplingConfig::new(1.0, 0.9, 40, 1.0, 300, 0.9).is_err());
        assert!(SamplingConfig::new(f64::NAN, 0.9, 40, 1.0, 300, 1.1).is_err());
    }

    #[test]
    fn deserialization_validates() {
        let ok = r#"{"temperature":1.5,"top_p":0.95,"top_k":40,"tfs_z":1.0,"max_new_tokens":300,"repetition_penalty":1.1}"#;
        let parsed: SamplingConfig = serde_json::from_str(ok).unwrap();
        assert_eq!(parsed, SamplingConfig::seq2seq_default());
        let bad = ok.replace("0.95", "1.5");
        assert!(serde_json::from_str::<SamplingConfig>(&bad).is_err());
    }
}
