//! Log band-energy features and a logistic-regression probe over them.

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::{sigmoid, ScoredSample};
use crate::spectral::{Denoiser, DenoiserSpec};
use crate::video_io::{self, Clip, Label, Manifest};
use crate::waverep::{self, Augment, Granularity};
use crate::wavelet::{self, BandMask};
use crate::{mix_seed, par_map};

pub const FEATURE_EPS: f64 = 1e-12;
pub const MAX_FRAMES: usize = 64;

/// `log(ε + E_ij / ΣE)` over the `(L+1)²` bands of one frame's residual.
pub fn extract_features(frame: &[f32], height: usize, width: usize, denoiser: &dyn Denoiser, levels: u32) -> Result<Vec<f64>> {
    wavelet::check_dims(height, width, levels)?;
    let smooth = denoiser.denoise(frame, height, width);
    if smooth.len() != frame.len() {
        return Err(Error::Dimension("denoiser changed the frame size".into()));
    }
    let res: Vec<f64> = frame.iter().zip(&smooth).map(|(&x, &s)| x as f64 - s as f64).collect();
    let e = wavelet::band_energies(&wavelet::fswt_forward_f64(&res, height, width, levels)?);
    let total: f64 = e.iter().sum();
    Ok(e.iter()
        .map(|&v| (FEATURE_EPS + if total > 0.0 { v / total } else { 0.0 }).ln())
        .collect())
}

/// Feature rows for the first `min(T, max_frames)` frames.
pub fn clip_features(clip: &Clip, denoiser: &dyn Denoiser, levels: u32, max_frames: usize) -> Result<Vec<Vec<f64>>> {
    (0..clip.frames.min(max_frames))
        .map(|t| extract_features(clip.frame(t), clip.height, clip.width, denoiser, levels))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub lr: f64,
    pub epochs: usize,
    pub l2: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig { lr: 0.5, epochs: 2000, l2: 1e-3 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogisticModel {
    pub weights: Vec<f64>,
    pub bias: f64,
    pub config: TrainConfig,
    #[serde(default)]
    pub levels: u32,
    #[serde(default)]
    pub denoiser: DenoiserSpec,
    #[serde(default)]
    pub final_loss: f64,
}

impl LogisticModel {
    pub fn logit(&self, x: &[f64]) -> f64 {
        self.bias + self.weights.iter().zip(x).map(|(w, v)| w * v).sum::<f64>()
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let text = serde_json::to_string_pretty(self)?;
        std::fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let m: LogisticModel = serde_json::from_str(&text)?;
        let side = (m.levels as usize + 1).pow(2);
        if m.weights.len() != side || !m.bias.is_finite() || m.weights.iter().any(|w| !w.is_finite()) {
            return Err(Error::Structure(format!("{} is not a valid {}-level model", path.display(), m.levels)));
        }
        Ok(m)
    }
}

/// Mean cross-entropy plus `½·l2·|w|²`, with its gradient `(∂w, ∂b)`.
pub fn loss_and_grad(w: &[f64], b: f64, xs: &[Vec<f64>], ys: &[f64], l2: f64) -> (f64, Vec<f64>, f64) {
    let n = xs.len() as f64;
    let mut gw = vec![0.0; w.len()];
    let mut gb = 0.0;
    let mut loss = 0.0;
    for (x, &y) in xs.iter().zip(ys) {
        let z = b + w.iter().zip(x).map(|(a, v)| a * v).sum::<f64>();
        // log(1 + e^z) - y z, computed without overflow
        loss += z.max(0.0) + (-z.abs()).exp().ln_1p() - y * z;
        let g = sigmoid(z) - y;
        gb += g;
        for (gi, xi) in gw.iter_mut().zip(x) {
            *gi += g * xi;
        }
    }
    let reg: f64 = w.iter().map(|v| v * v).sum();
    for (gi, wi) in gw.iter_mut().zip(w) {
        *gi = *gi / n + l2 * wi;
    }
    (loss / n + 0.5 * l2 * reg, gw, gb / n)
}

/// Full-batch gradient descent on standardized features; the standardization
/// is folded back so the returned model applies to raw features.
pub fn train_logistic(xs: &[Vec<f64>], labels: &[u8], cfg: &TrainConfig, seed: u64) -> Result<LogisticModel> {
    if xs.len() != labels.len() || xs.is_empty() {
        return Err(Error::Training(format!("{} feature rows for {} labels", xs.len(), labels.len())));
    }
    if !labels.contains(&0) || !labels.contains(&1) || labels.iter().any(|&l| l > 1) {
        return Err(Error::Training("needs binary labels with both classes present".into()));
    }
    let d = xs[0].len();
    if xs.iter().any(|x| x.len() != d || x.iter().any(|v| !v.is_finite())) {
        return Err(Error::Training("feature rows must be finite and of equal length".into()));
    }
    let n = xs.len() as f64;
    let mu: Vec<f64> = (0..d).map(|k| xs.iter().map(|x| x[k]).sum::<f64>() / n).collect();
    let sd: Vec<f64> = (0..d)
        .map(|k| (xs.iter().map(|x| (x[k] - mu[k]).powi(2)).sum::<f64>() / n).sqrt() + 1e-12)
        .collect();
    let zs: Vec<Vec<f64>> = xs.iter().map(|x| (0..d).map(|k| (x[k] - mu[k]) / sd[k]).collect()).collect();
    let ys: Vec<f64> = labels.iter().map(|&l| l as f64).collect();

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut w: Vec<f64> = (0..d).map(|_| rng.random_range(-0.01..0.01)).collect();
    let mut b = 0.0;
    for _ in 0..cfg.epochs {
        let (_, gw, gb) = loss_and_grad(&w, b, &zs, &ys, cfg.l2);
        for (wi, gi) in w.iter_mut().zip(&gw) {
            *wi -= cfg.lr * gi;
        }
        b -= cfg.lr * gb;
    }
    let (final_loss, _, _) = loss_and_grad(&w, b, &zs, &ys, cfg.l2);
    let weights: Vec<f64> = w.iter().zip(&sd).map(|(wi, s)| wi / s).collect();
    let bias = b - weights.iter().zip(&mu).map(|(wi, m)| wi * m).sum::<f64>();
    if !final_loss.is_finite() || weights.iter().any(|v| !v.is_finite()) {
        return Err(Error::Training("training diverged".into()));
    }
    Ok(LogisticModel { weights, bias, config: *cfg, levels: 0, denoiser: DenoiserSpec::default(), final_loss })
}

/// Mean per-frame logit over the first 64 frames.
pub fn score_clip(model: &LogisticModel, clip: &Clip, denoiser: &dyn Denoiser, id: &str, label: u8) -> Result<ScoredSample> {
    let feats = clip_features(clip, denoiser, model.levels, MAX_FRAMES)?;
    let score = feats.iter().map(|x| model.logit(x)).sum::<f64>() / feats.len() as f64;
    Ok(ScoredSample::from_logit(id, label, score))
}

/// Bands with `i >= 1 && j >= 1`.
pub fn diagonal_mask(levels: u32) -> BandMask {
    BandMask::from_fn(levels, |i, j| i >= 1 && j >= 1)
}

/// Inject the fake's diagonal mid/high bands into the real clip.
pub fn band_swap_attack(real: &Clip, fake: &Clip, levels: u32) -> Result<Clip> {
    waverep::replace_clip(real, fake, &diagonal_mask(levels))
}

pub fn write_scores(path: impl AsRef<Path>, samples: &[ScoredSample]) -> Result<()> {
    let path = path.as_ref();
    let mut w = csv::Writer::from_path(path)?;
    for s in samples {
        w.serialize(s)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_scores(path: impl AsRef<Path>) -> Result<Vec<ScoredSample>> {
    #[derive(Deserialize)]
    struct Row {
        id: String,
        label: u8,
        score: f64,
        prob: f64,
    }
    let mut r = csv::Reader::from_path(path.as_ref())?;
    let mut out = Vec::new();
    for row in r.deserialize() {
        let Row { id, label, score, prob } = row?;
        if label > 1 {
            return Err(Error::Structure(format!("sample {id}: label {label} is not 0 or 1")));
        }
        out.push(ScoredSample { id, label, score, prob });
    }
    Ok(out)
}

/// Load a clip and crop it for the wavelet depth.
pub fn load_for_levels(path: impl AsRef<Path>, levels: u32) -> Result<Clip> {
    video_io::crop_for_levels(&video_io::load_clip(path)?, levels)
}

/// Labelled training clips; fakes are optionally WaveRep-augmented with their
/// paired real. Each fake gets its own augmentation stream.
pub fn augmented_features(
    clips: &[(Clip, u8, Option<&Clip>)],
    augment: Augment,
    granularity: Granularity,
    denoiser: &dyn Denoiser,
    levels: u32,
    seed: u64,
) -> Result<(Vec<Vec<f64>>, Vec<u8>)> {
    let p = augment.probability();
    let rows = par_map(clips, |i, (clip, label, real)| -> Result<Vec<Vec<f64>>> {
        let src = match (label, real, p > 0.0) {
            (1, Some(r), true) => waverep::augment_pair(clip, r, p, mix_seed(seed, i as u64), levels, granularity)?.0,
            (1, None, true) => {
                return Err(Error::Structure(format!("training fake #{i} has no paired real to augment with")))
            }
            _ => clip.clone(),
        };
        clip_features(&src, denoiser, levels, MAX_FRAMES)
    });
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for (rows, (_, label, _)) in rows.into_iter().zip(clips) {
        let rows = rows?;
        ys.extend(std::iter::repeat_n(*label, rows.len()));
        xs.extend(rows);
    }
    Ok((xs, ys))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainOptions {
    pub levels: u32,
    pub augment: Augment,
    pub granularity: Granularity,
    pub denoiser: DenoiserSpec,
    pub config: TrainConfig,
    pub seed: u64,
}

impl Default for TrainOptions {
    fn default() -> Self {
        TrainOptions {
            levels: 3,
            augment: Augment::None,
            granularity: Granularity::PerFrame,
            denoiser: DenoiserSpec::default(),
            config: TrainConfig::default(),
            seed: 7,
        }
    }
}

/// Train on in-memory `(clip, label, paired real)` triples.
pub fn train_on_clips(clips: &[(Clip, u8, Option<&Clip>)], opts: &TrainOptions) -> Result<LogisticModel> {
    let den = opts.denoiser.build()?;
    let (xs, ys) = augmented_features(clips, opts.augment, opts.granularity, den.as_ref(), opts.levels, mix_seed(opts.seed, 1))?;
    let mut m = train_logistic(&xs, &ys, &opts.config, mix_seed(opts.seed, 2))?;
    m.levels = opts.levels;
    m.denoiser = opts.denoiser;
    Ok(m)
}

pub fn train_manifest(manifest: &Manifest, opts: &TrainOptions) -> Result<LogisticModel> {
    let clips: Vec<Clip> = manifest
        .entries
        .iter()
        .map(|e| load_for_levels(manifest.resolve(e), opts.levels))
        .collect::<Result<_>>()?;
    let index = |path: &str| manifest.entries.iter().position(|e| e.path == path);
    let triples: Vec<(Clip, u8, Option<&Clip>)> = manifest
        .entries
        .iter()
        .zip(&clips)
        .map(|(e, c)| {
            let real = match e.label {
                Label::Fake => manifest.paired_real(e).and_then(|r| index(&r.path)).map(|k| &clips[k]),
                Label::Real => None,
            };
            (c.clone(), e.label.as_u8(), real)
        })
        .collect();
    train_on_clips(&triples, opts)
}

pub fn score_manifest(model: &LogisticModel, manifest: &Manifest) -> Result<Vec<ScoredSample>> {
    let den = model.denoiser.build()?;
    let out = par_map(&manifest.entries, |_, e| {
        let clip = load_for_levels(manifest.resolve(e), model.levels)?;
        score_clip(model, &clip, den.as_ref(), &e.path, e.label.as_u8())
    });
    out.into_iter().collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::{Gaussian3, Identity};

    fn noise_clip(seed: u64, t: usize, h: usize, w: usize) -> Clip {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Clip::new(t, h, w, (0..t * h * w).map(|_| rng.random::<f32>()).collect()).unwrap()
    }

    #[test]
    fn constant_frame_features_are_log_eps() {
        let f = vec![0.4f32; 64];
        let x = extract_features(&f, 8, 8, &Gaussian3::new(0.8).unwrap(), 3).unwrap();
        assert_eq!(x.len(), 16);
        assert!(x.iter().all(|&v| v == FEATURE_EPS.ln()));
    }

    #[test]
    fn features_are_scale_invariant() {
        let c = noise_clip(3, 1, 32, 32);
        let den = Gaussian3::new(0.8).unwrap();
        let x = extract_features(c.frame(0), 32, 32, &den, 3).unwrap();
        for a in [0.5f32, 2.0] {
            let s: Vec<f32> = c.frame(0).iter().map(|v| v * a).collect();
            let y = extract_features(&s, 32, 32, &den, 3).unwrap();
            assert!(x.iter().zip(&y).all(|(p, q)| (p - q).abs() < 1e-6));
        }
    }

    #[test]
    fn separable_pair_is_learned() {
        let xs = vec![vec![-1.0, 0.0], vec![1.0, 0.0]];
        let m = train_logistic(&xs, &[0, 1], &TrainConfig::default(), 1).unwrap();
        assert!(m.logit(&xs[0]) < 0.0 && m.logit(&xs[1]) > 0.0);
    }

    #[test]
    fn duplicated_data_gives_same_model() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let xs: Vec<Vec<f64>> = (0..12).map(|_| (0..4).map(|_| rng.random::<f64>()).collect()).collect();
        let ys: Vec<u8> = (0..12).map(|i| (i % 2) as u8).collect();
        let cfg = TrainConfig { epochs: 300, ..TrainConfig::default() };
        let a = train_logistic(&xs, &ys, &cfg, 4).unwrap();
        let xs2: Vec<Vec<f64>> = xs.iter().chain(&xs).cloned().collect();
        let ys2: Vec<u8> = ys.iter().chain(&ys).copied().collect();
        let b = train_logistic(&xs2, &ys2, &cfg, 4).unwrap();
        assert!((a.bias - b.bias).abs() < 1e-9);
        assert!(a.weights.iter().zip(&b.weights).all(|(p, q)| (p - q).abs() < 1e-9));
    }

    #[test]
    fn single_class_is_training_error() {
        let xs = vec![vec![0.0], vec![1.0]];
        assert!(matches!(train_logistic(&xs, &[1, 1], &TrainConfig::default(), 0), Err(Error::Training(_))));
    }

    #[test]
    fn training_is_seed_deterministic() {
        let xs = vec![vec![0.0, 1.0], vec![1.0, 0.5], vec![0.3, 0.2]];
        let cfg = TrainConfig { epochs: 50, ..TrainConfig::default() };
        assert_eq!(train_logistic(&xs, &[0, 1, 0], &cfg, 3).unwrap(), train_logistic(&xs, &[0, 1, 0], &cfg, 3).unwrap());
    }

    fn model(levels: u32, w: f64, b: f64) -> LogisticModel {
        LogisticModel {
            weights: vec![w; (levels as usize + 1).pow(2)],
            bias: b,
            config: TrainConfig::default(),
            levels,
            denoiser: DenoiserSpec::Identity,
            final_loss: 0.0,
        }
    }

    #[test]
    fn score_is_mean_frame_logit() {
        // Identity residuals are zero, so every frame's logit is b + 16 w log ε.
        let m = model(3, 0.01, 0.3);
        let c = noise_clip(1, 5, 16, 16);
        let s = score_clip(&m, &c, &Identity, "x", 0).unwrap();
        let want = 0.3 + 16.0 * 0.01 * FEATURE_EPS.ln();
        assert!((s.score - want).abs() < 1e-12);
        assert!((s.prob - sigmoid(want)).abs() < 1e-15);
    }

    #[test]
    fn score_ignores_frame_order() {
        let mut m = model(2, 0.0, 0.0);
        m.weights = (0..9).map(|k| k as f64 * 0.1 - 0.4).collect();
        m.denoiser = DenoiserSpec::Gaussian(0.8);
        let den = Gaussian3::new(0.8).unwrap();
        let c = noise_clip(4, 6, 16, 16);
        let mut rev = c.clone();
        for t in 0..6 {
            rev.frame_mut(t).copy_from_slice(c.frame(5 - t));
        }
        let a = score_clip(&m, &c, &den, "a", 0).unwrap().score;
        let b = score_clip(&m, &rev, &den, "a", 0).unwrap().score;
        assert!((a - b).abs() < 1e-12);
        let one = Clip::new(1, 16, 16, c.frame(0).to_vec()).unwrap();
        let x = extract_features(c.frame(0), 16, 16, &den, 2).unwrap();
        assert!((score_clip(&m, &one, &den, "o", 0).unwrap().score - m.logit(&x)).abs() < 1e-12);
    }

    #[test]
    fn attack_by_construction() {
        let r = noise_clip(1, 2, 16, 16);
        let f = noise_clip(2, 2, 16, 16);
        let same = band_swap_attack(&r, &r, 3).unwrap();
        assert!(same.data.iter().zip(&r.data).all(|(a, b)| (a - b).abs() < 1e-5));
        let a = band_swap_attack(&r, &f, 3).unwrap();
        let ga = wavelet::fswt_forward(a.frame(1), 16, 16, 3).unwrap();
        let gr = wavelet::fswt_forward(r.frame(1), 16, 16, 3).unwrap();
        let gf = wavelet::fswt_forward(f.frame(1), 16, 16, 3).unwrap();
        for i in 0..4 {
            for j in 0..4 {
                let src = if i >= 1 && j >= 1 { &gf } else { &gr };
                let d = ga.band(i, j).data.iter().zip(&src.band(i, j).data).map(|(p, q)| (p - q).abs()).fold(0.0, f64::max);
                assert!(d < 1e-5, "band ({i},{j}) off by {d}");
            }
        }
        assert!(matches!(band_swap_attack(&r, &noise_clip(3, 2, 16, 8), 3), Err(Error::Dimension(_))));
    }

    #[test]
    fn scores_csv_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("s.csv");
        let s = vec![ScoredSample::from_logit("a.y4m", 0, -0.25), ScoredSample::from_logit("b.y4m", 1, 3.5)];
        write_scores(&p, &s).unwrap();
        let text = std::fs::read_to_string(&p).unwrap();
        assert!(text.starts_with("id,label,score,prob\na.y4m,0,-0.25,"));
        assert_eq!(read_scores(&p).unwrap(), s);
    }

    #[test]
    fn model_json_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("m.json");
        let m = model(3, 0.5, -1.0);
        m.save(&p).unwrap();
        let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&p).unwrap()).unwrap();
        assert!(v["weights"].is_array() && v["bias"].is_number() && v["config"]["lr"].is_number());
        assert_eq!(LogisticModel::load(&p).unwrap(), m);
    }
}
