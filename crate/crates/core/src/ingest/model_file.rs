use std::path::Path;
use std::sync::Arc;

use base64::engine::general_purpose::STANDARD as B64;
use base64::Engine;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::compress::{ClusterSummaries, EpsilonNet, KernetModel};
use crate::data::{FeatureColumn, Points};
use crate::error::{KernetError, Result};
use crate::estimate::SurvivalCurve;
use crate::grid::{GridMode, TimeGrid};
use crate::kernel::KernelConfig;
use crate::nnindex::IndexBackend;
use crate::sft::SftParams;

pub const FORMAT_VERSION: u32 = 1;

/// How a model was produced; stored alongside it and not used for prediction,
/// except `sphere_radius`, which callers apply to queries before predicting.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub seed: Option<u64>,
    pub beta: Option<f64>,
    pub sphere_radius: Option<f64>,
    /// Raw feature columns of the training data, for interpretation exports.
    pub feature_schema: Option<Vec<FeatureColumn>>,
    pub generator: String,
}

#[derive(Debug, Clone)]
pub struct LoadedModel {
    pub model: KernetModel,
    pub provenance: Provenance,
}

/// `f64` arrays as base64 of their little-endian bytes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
struct F64s(String);

impl F64s {
    fn encode(values: &[f64]) -> Self {
        let mut bytes = Vec::with_capacity(values.len() * 8);
        for v in values {
            bytes.extend_from_slice(&v.to_le_bytes());
        }
        F64s(B64.encode(bytes))
    }

    fn decode(&self, what: &str) -> Result<Vec<f64>> {
        let bytes = B64
            .decode(&self.0)
            .map_err(|e| KernetError::ModelFormat(format!("{what}: {e}")))?;
        if bytes.len() % 8 != 0 {
            return Err(KernetError::ModelFormat(format!("{what}: truncated array")));
        }
        Ok(bytes
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
            .collect())
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct GridPayload {
    mode: GridMode,
    times: F64s,
}

#[derive(Debug, Serialize, Deserialize)]
struct SftPayload {
    gamma: F64s,
    gamma_baseline: F64s,
    omega: F64s,
    omega_baseline: F64s,
}

#[derive(Debug, Serialize, Deserialize)]
struct Payload {
    grid: GridPayload,
    kernel: KernelConfig,
    index: IndexBackend,
    epsilon: f64,
    n_clusters: usize,
    dim: usize,
    exemplar_ids: Vec<usize>,
    assignments: Vec<usize>,
    exemplars: F64s,
    deaths: F64s,
    censored: F64s,
    population_km: F64s,
    sft: Option<SftPayload>,
    provenance: Provenance,
}

#[derive(Debug, Serialize, Deserialize)]
struct ModelFile {
    format_version: u32,
    checksum: String,
    model: Payload,
}

fn checksum(payload: &Payload) -> Result<String> {
    let bytes = serde_json::to_vec(payload)?;
    let digest = Sha256::digest(&bytes);
    Ok(digest.iter().map(|b| format!("{b:02x}")).collect())
}

fn to_payload(model: &KernetModel, provenance: &Provenance) -> Payload {
    let raw = model.raw_summaries();
    Payload {
        grid: GridPayload {
            mode: model.grid().mode(),
            times: F64s::encode(model.grid().times()),
        },
        kernel: *model.kernel(),
        index: model.index().backend(),
        epsilon: model.epsilon(),
        n_clusters: model.n_clusters(),
        dim: model.dim(),
        exemplar_ids: model.net().exemplar_ids().to_vec(),
        assignments: model.net().cluster_of().to_vec(),
        exemplars: F64s::encode(model.exemplars().as_flat()),
        deaths: F64s::encode(raw.deaths_flat()),
        censored: F64s::encode(raw.censored_flat()),
        population_km: F64s::encode(model.population_km().values()),
        sft: model.fine_tuned().map(|f| SftPayload {
            gamma: F64s::encode(&f.params.gamma),
            gamma_baseline: F64s::encode(&f.params.gamma_baseline),
            omega: F64s::encode(&f.params.omega),
            omega_baseline: F64s::encode(&f.params.omega_baseline),
        }),
        provenance: provenance.clone(),
    }
}

fn from_payload(p: Payload) -> Result<LoadedModel> {
    let times = p.grid.times.decode("grid times")?;
    let grid = TimeGrid::from_times(times, p.grid.mode)?;
    let m = grid.len();
    p.kernel.validate()?;
    let net = EpsilonNet::from_parts(p.epsilon, p.exemplar_ids, p.assignments)?;
    let summaries =
        ClusterSummaries::from_counts(p.n_clusters, m, p.deaths.decode("deaths")?, p.censored.decode("censored")?)
            .map_err(|e| KernetError::ModelFormat(e.to_string()))?;
    let exemplars = Points::from_flat(p.dim, p.exemplars.decode("exemplars")?)?;
    let km = SurvivalCurve::new(Arc::from(grid.times()), p.population_km.decode("population_km")?)?;
    let sft = match p.sft {
        None => None,
        Some(s) => Some(SftParams::new(
            p.n_clusters,
            m,
            s.gamma.decode("gamma")?,
            s.gamma_baseline.decode("gamma_baseline")?,
            s.omega.decode("omega")?,
            s.omega_baseline.decode("omega_baseline")?,
        )?),
    };
    let model = KernetModel::from_parts(grid, p.kernel, net, summaries, exemplars, p.index, km, sft)?;
    Ok(LoadedModel {
        model,
        provenance: p.provenance,
    })
}

/// Writes the model (with its fine-tuned parameters, if any) as versioned JSON.
pub fn save_model(model: &KernetModel, provenance: &Provenance, path: impl AsRef<Path>) -> Result<()> {
    let payload = to_payload(model, provenance);
    let file = ModelFile {
        format_version: FORMAT_VERSION,
        checksum: checksum(&payload)?,
        model: payload,
    };
    let mut text = serde_json::to_string_pretty(&file)?;
    text.push('\n');
    std::fs::write(path, text)?;
    Ok(())
}

pub fn load_model(path: impl AsRef<Path>) -> Result<LoadedModel> {
    let text = std::fs::read_to_string(path)?;
    let value: serde_json::Value = serde_json::from_str(&text)?;
    let version = value
        .get("format_version")
        .and_then(|v| v.as_u64())
        .ok_or_else(|| KernetError::ModelFormat("missing format_version".into()))?;
    if version != u64::from(FORMAT_VERSION) {
        return Err(KernetError::VersionMismatch {
            found: u32::try_from(version).unwrap_or(u32::MAX),
            expected: FORMAT_VERSION,
        });
    }
    let file: ModelFile = serde_json::from_value(value).map_err(|e| KernetError::ModelFormat(e.to_string()))?;
    if checksum(&file.model)? != file.checksum {
        return Err(KernetError::ChecksumMismatch);
    }
    from_payload(file.model)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::compress::{fit, FitConfig};
    use crate::data::Dataset;
    use crate::estimate::{kernet_survival, predict_with, SummarySource};
    use crate::nnindex::GraphParams;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn model(backend: IndexBackend) -> KernetModel {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let emb: Vec<Vec<f64>> = (0..150).map(|_| vec![rng.gen_range(0.0..3.0), rng.gen_range(0.0..3.0)]).collect();
        let times: Vec<f64> = (0..150).map(|_| rng.gen_range(0.1..9.0)).collect();
        let events: Vec<bool> = (0..150).map(|_| rng.gen_bool(0.6)).collect();
        let ds = Dataset::from_parts(&emb, &times, &events).unwrap();
        fit(&ds, &FitConfig { index: backend, ..FitConfig::default() }).unwrap()
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let dir = tempfile::tempdir().unwrap();
        for backend in [IndexBackend::Exact, IndexBackend::Graph(GraphParams::with_seed(3))] {
            let mut m = model(backend);
            let mut params = crate::sft::sft_init(m.raw_summaries());
            params.gamma_baseline[0] = -3.123456789012345;
            m.set_fine_tuned(params.clone()).unwrap();
            let prov = Provenance {
                seed: Some(3),
                beta: Some(0.25),
                ..Provenance::default()
            };
            let path = dir.path().join("m.json");
            save_model(&m, &prov, &path).unwrap();
            let loaded = load_model(&path).unwrap();
            assert_eq!(loaded.provenance, prov);
            assert_eq!(loaded.model.fine_tuned().unwrap().params, params);
            let mut rng = ChaCha8Rng::seed_from_u64(9);
            for _ in 0..100 {
                let q = [rng.gen_range(-1.0..4.0), rng.gen_range(-1.0..4.0)];
                assert_eq!(kernet_survival(&m, &q).unwrap(), kernet_survival(&loaded.model, &q).unwrap());
                let a = predict_with(&m, SummarySource::Raw, &q).unwrap();
                let b = predict_with(&loaded.model, SummarySource::Raw, &q).unwrap();
                assert_eq!(a.survival, b.survival);
            }
            // saving again gives the same bytes
            let again = dir.path().join("m2.json");
            save_model(&loaded.model, &loaded.provenance, &again).unwrap();
            assert_eq!(std::fs::read(&path).unwrap(), std::fs::read(&again).unwrap());
        }
    }

    #[test]
    fn unknown_version_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.json");
        save_model(&model(IndexBackend::Exact), &Provenance::default(), &path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap().replace("\"format_version\": 1", "\"format_version\": 7");
        std::fs::write(&path, text).unwrap();
        assert!(matches!(
            load_model(&path),
            Err(KernetError::VersionMismatch { found: 7, expected: 1 })
        ));
    }

    #[test]
    fn tampering_detected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.json");
        save_model(&model(IndexBackend::Exact), &Provenance::default(), &path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        let eps = text.lines().find(|l| l.contains("\"epsilon\"")).unwrap().to_string();
        std::fs::write(&path, text.replace(&eps, "    \"epsilon\": 0.123,")).unwrap();
        assert!(matches!(load_model(&path), Err(KernetError::ChecksumMismatch)));
    }
}
