//! On-disk model directory: `model.json`, `vocab.txt`, the emission source
//! (`encoder.bin` or `emissions.bin`) and, with a CRF, `crf.json`.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::encoder::ToyEncoder;
use super::pipeline::Tagger;
use super::provider::EmissionProvider;
use super::store::EmissionStore;
use super::train::TrainConfig;
use crate::crf::CrfParams;
use crate::error::{Error, Result};
use crate::tokenizer::load_vocab;

pub const MODEL_FORMAT: &str = "adetag-model";
pub const MODEL_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProviderKind {
    Encoder,
    Emissions,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelRecord {
    pub format: String,
    pub version: u32,
    pub provider: ProviderKind,
    pub max_len: usize,
    pub lowercase: bool,
    pub with_crf: bool,
    pub train_config: Option<TrainConfig>,
}

pub fn save_model(tagger: &Tagger, dir: &Path, train_config: Option<&TrainConfig>) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    tagger.vocab.save(&dir.join("vocab.txt"))?;
    let provider = match &tagger.provider {
        EmissionProvider::ToyEncoder(encoder) => {
            encoder.save(&dir.join("encoder.bin"))?;
            ProviderKind::Encoder
        }
        EmissionProvider::FileBacked(store) => {
            store.write(dir.join("emissions.bin"))?;
            ProviderKind::Emissions
        }
    };
    if let Some(crf) = &tagger.crf {
        crf.save(&dir.join("crf.json"))?;
    }
    let record = ModelRecord {
        format: MODEL_FORMAT.into(),
        version: MODEL_VERSION,
        provider,
        max_len: tagger.max_len,
        lowercase: tagger.vocab.lowercase,
        with_crf: tagger.crf.is_some(),
        train_config: train_config.cloned(),
    };
    let path = dir.join("model.json");
    let body = serde_json::to_string_pretty(&record)?;
    fs::write(&path, body + "\n").map_err(|e| Error::io(&path, e))
}

pub fn load_model(dir: &Path) -> Result<Tagger> {
    let path = dir.join("model.json");
    let body = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    let record: ModelRecord = serde_json::from_str(&body)?;
    if record.format != MODEL_FORMAT || record.version != MODEL_VERSION {
        return Err(Error::validation(
            path.display().to_string(),
            format!("unsupported model format {} v{}", record.format, record.version),
        ));
    }
    let vocab = load_vocab(dir.join("vocab.txt"))?.with_lowercase(record.lowercase);
    let provider = match record.provider {
        ProviderKind::Encoder => EmissionProvider::ToyEncoder(ToyEncoder::load(&dir.join("encoder.bin"))?),
        ProviderKind::Emissions => EmissionProvider::FileBacked(EmissionStore::read(dir.join("emissions.bin"))?),
    };
    let crf = if record.with_crf {
        Some(CrfParams::load(&dir.join("crf.json"))?)
    } else {
        None
    };
    Ok(Tagger {
        vocab,
        provider,
        crf,
        max_len: record.max_len,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synthetic::{fixture_emissions, generate, FixtureNoise, SyntheticConfig};
    use crate::tokenizer::{corpus_vocab, DEFAULT_MAX_LEN};
    use rand::SeedableRng;

    #[test]
    fn encoder_model_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let corpus = generate(&SyntheticConfig {
            train: 5,
            test: 0,
            ..Default::default()
        });
        let vocab = corpus_vocab(&corpus, true);
        let shape = super::super::encoder::EncoderShape {
            vocab_size: vocab.len(),
            max_len: 16,
            d_model: 4,
            heads: 2,
            ff_dim: 4,
        };
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0);
        let tagger = Tagger {
            vocab,
            provider: EmissionProvider::ToyEncoder(ToyEncoder::init(shape, &mut rng).unwrap()),
            crf: Some(CrfParams::random(&mut rng, true)),
            max_len: 16,
        };
        let config = TrainConfig::default();
        save_model(&tagger, dir.path(), Some(&config)).unwrap();
        let loaded = load_model(dir.path()).unwrap();
        assert!(loaded.vocab.lowercase);
        assert_eq!(loaded.crf, tagger.crf);
        assert_eq!(loaded.provider.as_encoder(), tagger.provider.as_encoder());
        let sample = &corpus.samples()[0];
        assert_eq!(
            loaded.predict(&sample.id, &sample.text).unwrap(),
            tagger.predict(&sample.id, &sample.text).unwrap()
        );
    }

    #[test]
    fn emission_model_without_crf() {
        let dir = tempfile::tempdir().unwrap();
        let corpus = generate(&SyntheticConfig {
            train: 5,
            test: 0,
            ..Default::default()
        });
        let vocab = corpus_vocab(&corpus, false);
        let store = fixture_emissions(&corpus, &vocab, DEFAULT_MAX_LEN, &FixtureNoise::clean(), 0).unwrap();
        let tagger = Tagger {
            vocab,
            provider: EmissionProvider::FileBacked(store),
            crf: None,
            max_len: DEFAULT_MAX_LEN,
        };
        save_model(&tagger, dir.path(), None).unwrap();
        assert!(!dir.path().join("crf.json").exists());
        let loaded = load_model(dir.path()).unwrap();
        assert!(loaded.crf.is_none());
        assert!(matches!(loaded.provider, EmissionProvider::FileBacked(_)));
    }

    #[test]
    fn rejects_foreign_records() {
        let dir = tempfile::tempdir().unwrap();
        let record = ModelRecord {
            format: "other".into(),
            version: MODEL_VERSION,
            provider: ProviderKind::Encoder,
            max_len: 8,
            lowercase: false,
            with_crf: false,
            train_config: None,
        };
        fs::write(dir.path().join("model.json"), serde_json::to_string(&record).unwrap()).unwrap();
        assert!(matches!(load_model(dir.path()), Err(Error::Validation { .. })));
    }
}
