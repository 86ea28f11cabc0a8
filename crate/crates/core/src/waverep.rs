//! WaveRep: swap wavelet subbands of a fake frame for those of its real
//! counterpart, leaving the diagonal mid/high bands untouched.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::video_io::Clip;
use crate::wavelet::{self, BandMask};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Variant {
    V0,
    V1,
    V2,
    V3,
}

impl Variant {
    pub const REPLACING: [Variant; 3] = [Variant::V1, Variant::V2, Variant::V3];

    pub fn name(self) -> &'static str {
        match self {
            Variant::V0 => "V0_all_fake",
            Variant::V1 => "V1_baseband",
            Variant::V2 => "V2_baseband_plus_horizontal",
            Variant::V3 => "V3_full_default",
        }
    }

    pub fn mask(self, levels: u32) -> BandMask {
        match self {
            Variant::V0 => BandMask::none(levels),
            Variant::V1 => BandMask::from_fn(levels, |i, j| i == 0 && j == 0),
            Variant::V2 => BandMask::from_fn(levels, |i, _| i == 0),
            Variant::V3 => default_mask(levels),
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Replace every band touching the approximation along either axis.
pub fn default_mask(levels: u32) -> BandMask {
    BandMask::from_fn(levels, |i, j| i == 0 || j == 0)
}

/// Mask selector used by the CLI: `default`, `all`, `none` or a JSON file.
pub fn parse_mask(spec: &str, levels: u32) -> Result<BandMask> {
    match spec {
        "default" => Ok(default_mask(levels)),
        "all" => Ok(BandMask::all(levels)),
        "none" => Ok(BandMask::none(levels)),
        path => {
            let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
            let rows: Vec<Vec<bool>> = serde_json::from_str(&text)?;
            let m = BandMask::from_rows(&rows)?;
            if m.levels != levels {
                return Err(Error::Structure(format!(
                    "mask in {path} is for {} levels, expected {levels}",
                    m.levels
                )));
            }
            Ok(m)
        }
    }
}

/// Inverse FSWT of a grid that takes masked bands from `real` and the rest from `fake`.
pub fn replace_bands(
    fake: &[f32],
    real: &[f32],
    height: usize,
    width: usize,
    mask: &BandMask,
) -> Result<Vec<f32>> {
    if fake.len() != real.len() {
        return Err(Error::Dimension(format!(
            "fake has {} samples, real has {}",
            fake.len(),
            real.len()
        )));
    }
    let levels = mask.levels;
    let mut g = wavelet::fswt_forward(fake, height, width, levels)?;
    let r = wavelet::fswt_forward(real, height, width, levels)?;
    for i in 0..mask.side() {
        for j in 0..mask.side() {
            if mask.get(i, j) {
                *g.band_mut(i, j) = r.band(i, j).clone();
            }
        }
    }
    wavelet::fswt_inverse(&g)
}

/// Frame-wise [`replace_bands`] over a whole clip.
pub fn replace_clip(fake: &Clip, real: &Clip, mask: &BandMask) -> Result<Clip> {
    fake.check_same_dims(real)?;
    let mut out = fake.clone();
    for t in 0..fake.frames {
        let f = replace_bands(fake.frame(t), real.frame(t), fake.height, fake.width, mask)?;
        out.frame_mut(t).copy_from_slice(&f);
    }
    Ok(out)
}

/// Independent stream for one frame of one augmentation call.
pub fn frame_rng(seed: u64, frame: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(frame);
    rng
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Granularity {
    #[default]
    PerFrame,
    PerClip,
}

fn draw(rng: &mut ChaCha8Rng, p: f64) -> Variant {
    // Both draws happen regardless of the outcome so streams stay aligned.
    let u: f64 = rng.random();
    let k = rng.random_range(0..3);
    if u < p {
        Variant::REPLACING[k]
    } else {
        Variant::V0
    }
}

/// Per-frame variant record of one [`augment_pair`] call.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct AugmentationLog {
    pub variants: Vec<Variant>,
}

impl AugmentationLog {
    pub fn replaced(&self) -> usize {
        self.variants.iter().filter(|&&v| v != Variant::V0).count()
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["frame", "variant"])?;
        for (t, v) in self.variants.iter().enumerate() {
            w.write_record([t.to_string(), v.name().to_string()])?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }
}

/// With probability `p` per frame (or once per clip), replace the fake frame's
/// bands using a variant drawn uniformly from V1..V3.
pub fn augment_pair(
    fake: &Clip,
    real: &Clip,
    p: f64,
    seed: u64,
    levels: u32,
    granularity: Granularity,
) -> Result<(Clip, AugmentationLog)> {
    fake.check_same_dims(real)?;
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::Config(format!("augmentation probability {p} outside [0,1]")));
    }
    wavelet::check_dims(fake.height, fake.width, levels)?;
    let variants: Vec<Variant> = match granularity {
        Granularity::PerFrame => (0..fake.frames).map(|t| draw(&mut frame_rng(seed, t as u64), p)).collect(),
        Granularity::PerClip => vec![draw(&mut frame_rng(seed, u64::MAX), p); fake.frames],
    };
    let mut out = fake.clone();
    for (t, v) in variants.iter().enumerate() {
        if *v != Variant::V0 {
            let f = replace_bands(fake.frame(t), real.frame(t), fake.height, fake.width, &v.mask(levels))?;
            out.frame_mut(t).copy_from_slice(&f);
        }
    }
    Ok((out, AugmentationLog { variants }))
}

/// Parsed `--augment` value: `none` or `waverep:<p>`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum Augment {
    #[default]
    None,
    WaveRep(f64),
}

impl Augment {
    pub fn probability(self) -> f64 {
        match self {
            Augment::None => 0.0,
            Augment::WaveRep(p) => p,
        }
    }
}

impl FromStr for Augment {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s == "none" {
            return Ok(Augment::None);
        }
        let p = s
            .strip_prefix("waverep:")
            .and_then(|v| v.parse::<f64>().ok())
            .ok_or_else(|| Error::Config(format!("augmentation {s:?} is not none or waverep:<p>")))?;
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::Config(format!("augmentation probability {p} outside [0,1]")));
        }
        Ok(Augment::WaveRep(p))
    }
}

impl fmt::Display for Augment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Augment::None => f.write_str("none"),
            Augment::WaveRep(p) => write!(f, "waverep:{p}"),
        }
    }
}
