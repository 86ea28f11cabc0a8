//! End-to-end desk experiment: simulate, train with and without WaveRep,
//! compress, score, evaluate and attack.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::detector::{self, LogisticModel, TrainConfig, TrainOptions};
use crate::error::{Error, Result};
use crate::metrics::{self, MetricReport, ScoredSample};
use crate::simulate::{self, AutoencoderSim, DatasetSpec, Kernel2, Style, ToyCodec};
use crate::spectral::DenoiserSpec;
use crate::video_io::Clip;
use crate::waverep::{Augment, Granularity};
use crate::{mix_seed, par_map};

/// Flat `key = value` TOML; every key is optional.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub levels: u32,
    pub augment: String,
    pub per_clip: bool,
    pub train_real: usize,
    pub train_fake: usize,
    pub test_real: usize,
    pub test_fake: usize,
    pub frames: usize,
    pub height: usize,
    pub width: usize,
    pub style: Style,
    pub ae_factor: usize,
    pub ae_latent_noise: f64,
    pub ae_axial_gain: f64,
    pub ae_diagonal_gain: f64,
    pub codec_block: usize,
    pub codec_quant_step: f64,
    pub codec_temporal_smoothing: f64,
    pub denoiser: String,
    pub lr: f64,
    pub epochs: usize,
    pub l2: f64,
    pub ece_bins: usize,
    pub out_dir: PathBuf,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        let ae = AutoencoderSim::default();
        let codec = ToyCodec::default();
        let tc = TrainConfig::default();
        ExperimentConfig {
            seed: 7,
            levels: 3,
            augment: "waverep:0.1".into(),
            per_clip: false,
            train_real: 100,
            train_fake: 100,
            test_real: 50,
            test_fake: 50,
            frames: 32,
            height: 64,
            width: 64,
            style: Style::Textured,
            ae_factor: ae.factor,
            ae_latent_noise: ae.latent_noise,
            ae_axial_gain: simulate::DEFAULT_AXIAL_GAIN,
            ae_diagonal_gain: simulate::DEFAULT_DIAGONAL_GAIN,
            codec_block: codec.block,
            codec_quant_step: codec.quant_step,
            codec_temporal_smoothing: codec.temporal_smoothing,
            denoiser: DenoiserSpec::default().to_string(),
            lr: tc.lr,
            epochs: tc.epochs,
            l2: tc.l2,
            ece_bins: 10,
            out_dir: PathBuf::from("runs/default"),
        }
    }
}

impl ExperimentConfig {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text)
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.augment()?;
        cfg.denoiser()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config always serializes")
    }

    pub fn augment(&self) -> Result<Augment> {
        self.augment.parse()
    }

    pub fn denoiser(&self) -> Result<DenoiserSpec> {
        self.denoiser.parse()
    }

    pub fn autoencoder(&self) -> AutoencoderSim {
        AutoencoderSim::with_imbalance(
            self.ae_factor,
            Kernel2::cubic_b(),
            self.ae_latent_noise,
            self.ae_axial_gain,
            self.ae_diagonal_gain,
        )
    }

    pub fn codec(&self) -> ToyCodec {
        ToyCodec {
            block: self.codec_block,
            quant_step: self.codec_quant_step,
            temporal_smoothing: self.codec_temporal_smoothing,
        }
    }

    pub fn train_options(&self, augment: Augment) -> Result<TrainOptions> {
        Ok(TrainOptions {
            levels: self.levels,
            augment,
            granularity: if self.per_clip { Granularity::PerClip } else { Granularity::PerFrame },
            denoiser: self.denoiser()?,
            config: TrainConfig { lr: self.lr, epochs: self.epochs, l2: self.l2 },
            seed: mix_seed(self.seed, 3),
        })
    }

    /// SHA-256 of the resolved TOML, hex encoded.
    pub fn hash(&self) -> String {
        Sha256::digest(self.to_toml().as_bytes()).iter().map(|b| format!("{b:02x}")).collect()
    }
}

#[derive(Debug, Serialize)]
struct Provenance<'a> {
    version: &'a str,
    config_hash: String,
    seed: u64,
}

/// Real clips with their fakes; `fakes[i]` is paired with `reals[i % reals.len()]`.
pub struct Split {
    pub reals: Vec<Clip>,
    pub fakes: Vec<Clip>,
}

impl Split {
    pub fn paired_real(&self, fake: usize) -> &Clip {
        &self.reals[fake % self.reals.len()]
    }

    pub fn generate(cfg: &ExperimentConfig, n_real: usize, n_fake: usize, seed: u64) -> Result<Split> {
        let spec = DatasetSpec {
            n_real,
            n_fake,
            frames: cfg.frames,
            height: cfg.height,
            width: cfg.width,
            style: cfg.style,
            ae: cfg.autoencoder(),
            seed,
        };
        if n_real == 0 || n_fake == 0 {
            return Err(Error::Config("each split needs at least one real and one fake".into()));
        }
        let idx: Vec<usize> = (0..n_real).collect();
        let reals = par_map(&idx, |_, &i| simulate::real_clip(&spec, i)).into_iter().collect::<Result<Vec<_>>>()?;
        let idx: Vec<usize> = (0..n_fake).collect();
        let fakes = par_map(&idx, |_, &i| simulate::fake_clip(&spec, &reals[i % n_real], i))
            .into_iter()
            .collect::<Result<Vec<_>>>()?;
        Ok(Split { reals, fakes })
    }

    fn labelled(&self) -> Vec<(String, u8, &Clip)> {
        let r = self.reals.iter().enumerate().map(|(i, c)| (format!("real_{i:04}"), 0, c));
        let f = self.fakes.iter().enumerate().map(|(i, c)| (format!("fake_{i:04}"), 1, c));
        r.chain(f).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ArmReport {
    pub condition: String,
    pub model: String,
    pub metrics: MetricReport,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentSummary {
    pub seed: u64,
    pub reports: Vec<ArmReport>,
    /// Fraction of attacked test reals each model calls fake.
    pub flip_rate_none: f64,
    pub flip_rate_waverep: f64,
    pub final_loss_none: f64,
    pub final_loss_waverep: f64,
}

impl ExperimentSummary {
    pub fn bacc(&self, condition: &str, model: &str) -> Option<f64> {
        self.reports
            .iter()
            .find(|r| r.condition == condition && r.model == model)
            .map(|r| r.metrics.bacc)
    }
}

/// Everything produced by one run, kept in memory for callers that want more
/// than the files.
pub struct ExperimentOutput {
    pub summary: ExperimentSummary,
    pub models: [LogisticModel; 2],
    pub scores: Vec<(String, Vec<ScoredSample>)>,
}

fn score_all(model: &LogisticModel, clips: &[(String, u8, &Clip)]) -> Result<Vec<ScoredSample>> {
    let den = model.denoiser.build()?;
    par_map(clips, |_, (id, label, clip)| detector::score_clip(model, clip, den.as_ref(), id, *label))
        .into_iter()
        .collect()
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Run the full pipeline and write results under `out`.
///
/// Layout: `config.toml`, `run.json`, `models/{none,waverep}.json`,
/// `scores/<condition>_<model>.csv`, `reports/<condition>_<model>.csv`,
/// `scores/attack_<model>.csv` and `summary.json`.
pub fn run_experiment(cfg: &ExperimentConfig, out: &Path) -> Result<ExperimentOutput> {
    let aug = cfg.augment().map_err(|e| e.in_stage("config"))?;
    for sub in ["models", "scores", "reports"] {
        let d = out.join(sub);
        fs::create_dir_all(&d).map_err(|e| Error::io(&d, e))?;
    }
    write_text(&out.join("config.toml"), &cfg.to_toml())?;
    let prov = Provenance { version: env!("CARGO_PKG_VERSION"), config_hash: cfg.hash(), seed: cfg.seed };
    write_text(&out.join("run.json"), &(serde_json::to_string_pretty(&prov)? + "\n"))?;

    let train = Split::generate(cfg, cfg.train_real, cfg.train_fake, mix_seed(cfg.seed, 10)).map_err(|e| e.in_stage("simulate"))?;
    let test = Split::generate(cfg, cfg.test_real, cfg.test_fake, mix_seed(cfg.seed, 11)).map_err(|e| e.in_stage("simulate"))?;

    let triples: Vec<(Clip, u8, Option<&Clip>)> = train
        .reals
        .iter()
        .map(|c| (c.clone(), 0, None))
        .chain(train.fakes.iter().enumerate().map(|(i, c)| (c.clone(), 1, Some(train.paired_real(i)))))
        .collect();
    let train_arm = |a: Augment| -> Result<LogisticModel> {
        detector::train_on_clips(&triples, &cfg.train_options(a)?).map_err(|e| e.in_stage("train"))
    };
    let m_none = train_arm(Augment::None)?;
    let m_wr = train_arm(aug)?;
    m_none.save(out.join("models/none.json"))?;
    m_wr.save(out.join("models/waverep.json"))?;

    let clean = test.labelled();
    let codec = cfg.codec();
    let compressed_clips = par_map(&clean, |_, (_, _, c)| simulate::toy_compress(c, &codec))
        .into_iter()
        .collect::<Result<Vec<_>>>()
        .map_err(|e| e.in_stage("compress"))?;
    let compressed: Vec<(String, u8, &Clip)> =
        clean.iter().zip(&compressed_clips).map(|((id, l, _), c)| (id.clone(), *l, c)).collect();

    let mut reports = Vec::new();
    let mut scores = Vec::new();
    for (cond, set) in [("clean", &clean), ("compressed", &compressed)] {
        for (name, model) in [("none", &m_none), ("waverep", &m_wr)] {
            let s = score_all(model, set).map_err(|e| e.in_stage("score"))?;
            let rep = metrics::evaluate(&s, cfg.ece_bins).map_err(|e| e.in_stage("eval"))?;
            detector::write_scores(out.join(format!("scores/{cond}_{name}.csv")), &s)?;
            write_text(&out.join(format!("reports/{cond}_{name}.csv")), &rep.to_csv())?;
            reports.push(ArmReport { condition: cond.into(), model: name.into(), metrics: rep });
            scores.push((format!("{cond}_{name}"), s));
        }
    }

    // Each test real receives the diagonal bands of a fake made from it.
    let attacked = par_map(&test.reals, |i, r| {
        detector::band_swap_attack(r, &test.fakes[i % test.fakes.len()], cfg.levels)
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()
    .map_err(|e| e.in_stage("attack"))?;
    let attacked: Vec<(String, u8, &Clip)> =
        attacked.iter().enumerate().map(|(i, c)| (format!("attacked_real_{i:04}"), 0, c)).collect();
    let mut flips = [0.0; 2];
    for (k, (name, model)) in [("none", &m_none), ("waverep", &m_wr)].into_iter().enumerate() {
        let s = score_all(model, &attacked).map_err(|e| e.in_stage("attack"))?;
        flips[k] = s.iter().filter(|x| x.prob >= 0.5).count() as f64 / s.len() as f64;
        detector::write_scores(out.join(format!("scores/attack_{name}.csv")), &s)?;
        scores.push((format!("attack_{name}"), s));
    }

    let summary = ExperimentSummary {
        seed: cfg.seed,
        reports,
        flip_rate_none: flips[0],
        flip_rate_waverep: flips[1],
        final_loss_none: m_none.final_loss,
        final_loss_waverep: m_wr.final_loss,
    };
    write_text(&out.join("summary.json"), &(serde_json::to_string_pretty(&summary)? + "\n"))?;
    Ok(ExperimentOutput { summary, models: [m_none, m_wr], scores })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> ExperimentConfig {
        ExperimentConfig {
            train_real: 4,
            train_fake: 4,
            test_real: 3,
            test_fake: 3,
            frames: 3,
            height: 32,
            width: 32,
            epochs: 50,
            ..ExperimentConfig::default()
        }
    }

    #[test]
    fn config_toml_round_trip() {
        let c = ExperimentConfig::default();
        assert_eq!(ExperimentConfig::from_toml(&c.to_toml()).unwrap(), c);
        let partial = ExperimentConfig::from_toml("seed = 3\naugment = \"none\"\n").unwrap();
        assert_eq!((partial.seed, partial.levels), (3, 3));
        assert!(ExperimentConfig::from_toml("sed = 3").is_err());
        assert!(ExperimentConfig::from_toml("augment = \"mixup\"").is_err());
    }

    #[test]
    fn hash_tracks_config() {
        let a = ExperimentConfig::default();
        let b = ExperimentConfig { seed: 8, ..a.clone() };
        assert_eq!(a.hash().len(), 64);
        assert_ne!(a.hash(), b.hash());
    }

    #[test]
    fn zero_probability_arms_match() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = ExperimentConfig { augment: "waverep:0".into(), ..small() };
        let out = run_experiment(&cfg, dir.path()).unwrap();
        assert_eq!(out.models[0], out.models[1]);
    }

    #[test]
    fn outputs_are_written() {
        let dir = tempfile::tempdir().unwrap();
        run_experiment(&small(), dir.path()).unwrap();
        for f in ["config.toml", "run.json", "summary.json", "models/waverep.json", "scores/compressed_none.csv", "reports/clean_waverep.csv"] {
            assert!(dir.path().join(f).is_file(), "{f} missing");
        }
        let run: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.path().join("run.json")).unwrap()).unwrap();
        assert_eq!(run["seed"], 7);
        assert_eq!(run["config_hash"].as_str().unwrap(), small().hash());
    }

    #[test]
    fn stage_errors_name_the_stage() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = ExperimentConfig { codec_block: 5, ..small() };
        let err = run_experiment(&cfg, dir.path()).err().unwrap();
        assert!(matches!(err, Error::Stage { stage: "compress", .. }), "{err}");
    }
}
