//! Procedural clips, a down/up-sampling autoencoder that leaves upsampling
//! fingerprints, and an intra block-DCT toy codec.

use std::fs;
use std::path::Path;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mix_seed;
use crate::video_io::{self, Clip, Label, Manifest, ManifestEntry};
use crate::waverep::frame_rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum Style {
    #[serde(rename = "noise")]
    Noise,
    #[serde(rename = "gradients+shapes")]
    GradientsShapes,
    #[default]
    #[serde(rename = "textured")]
    Textured,
}

impl FromStr for Style {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "noise" => Ok(Style::Noise),
            "gradients+shapes" => Ok(Style::GradientsShapes),
            "textured" => Ok(Style::Textured),
            _ => Err(Error::Config(format!("unknown style {s:?}"))),
        }
    }
}

impl std::fmt::Display for Style {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Style::Noise => "noise",
            Style::GradientsShapes => "gradients+shapes",
            Style::Textured => "textured",
        })
    }
}

/// Maximum drift, in pixels, of the camera window over a clip.
const WALK: usize = 16;

/// Standard-normal field with a `1/f^beta` power spectrum, rescaled to unit std.
fn power_law_field(rng: &mut ChaCha8Rng, h: usize, w: usize, beta: f64) -> Vec<f64> {
    let mut buf: Vec<Complex<f64>> =
        (0..h * w).map(|_| Complex::new(rng.sample::<f64, _>(StandardNormal), 0.0)).collect();
    let mut planner = FftPlanner::new();
    fft2(&mut buf, h, w, &mut planner, false);
    for u in 0..h {
        let fu = freq(u, h);
        for v in 0..w {
            let fv = freq(v, w);
            let f = (fu * fu + fv * fv).sqrt();
            buf[u * w + v] *= if f == 0.0 { 0.0 } else { f.powf(-beta / 2.0) };
        }
    }
    fft2(&mut buf, h, w, &mut planner, true);
    let vals: Vec<f64> = buf.iter().map(|c| c.re).collect();
    let mean = vals.iter().sum::<f64>() / vals.len() as f64;
    let sd = (vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / vals.len() as f64).sqrt();
    vals.into_iter().map(|v| (v - mean) / sd.max(1e-300)).collect()
}

fn freq(k: usize, n: usize) -> f64 {
    let k = if k <= (n - 1) / 2 { k as f64 } else { k as f64 - n as f64 };
    k / n as f64
}

fn fft2(buf: &mut [Complex<f64>], h: usize, w: usize, planner: &mut FftPlanner<f64>, inverse: bool) {
    let (fw, fh) = if inverse {
        (planner.plan_fft_inverse(w), planner.plan_fft_inverse(h))
    } else {
        (planner.plan_fft_forward(w), planner.plan_fft_forward(h))
    };
    fw.process(buf);
    let mut col = vec![Complex::new(0.0, 0.0); h];
    for c in 0..w {
        for r in 0..h {
            col[r] = buf[r * w + c];
        }
        fh.process(&mut col);
        for r in 0..h {
            buf[r * w + c] = col[r];
        }
    }
}

/// Separable Gaussian blur, radius `ceil(4σ)`, replicated edges.
fn gaussian_blur(img: &mut [f64], h: usize, w: usize, sigma: f64) {
    let rad = (4.0 * sigma).ceil() as isize;
    let mut k: Vec<f64> = (-rad..=rad).map(|d| (-(d * d) as f64 / (2.0 * sigma * sigma)).exp()).collect();
    let s: f64 = k.iter().sum();
    k.iter_mut().for_each(|v| *v /= s);
    let mut tmp = vec![0.0; h * w];
    for r in 0..h {
        for c in 0..w {
            let mut acc = 0.0;
            for (i, kv) in k.iter().enumerate() {
                let cc = (c as isize + i as isize - rad).clamp(0, w as isize - 1) as usize;
                acc += kv * img[r * w + cc];
            }
            tmp[r * w + c] = acc;
        }
    }
    for r in 0..h {
        for c in 0..w {
            let mut acc = 0.0;
            for (i, kv) in k.iter().enumerate() {
                let rr = (r as isize + i as isize - rad).clamp(0, h as isize - 1) as usize;
                acc += kv * tmp[rr * w + c];
            }
            img[r * w + c] = acc;
        }
    }
}

/// Unit-variance noise smoothed by `[1,2,1]` along both axes.
fn correlated_noise(rng: &mut ChaCha8Rng, h: usize, w: usize) -> Vec<f64> {
    let (hp, wp) = (h + 2, w + 2);
    let n: Vec<f64> = (0..hp * wp).map(|_| rng.sample(StandardNormal)).collect();
    let mut rows = vec![0.0; h * wp];
    for r in 0..h {
        for c in 0..wp {
            rows[r * wp + c] = (n[r * wp + c] + 2.0 * n[(r + 1) * wp + c] + n[(r + 2) * wp + c]) / 4.0;
        }
    }
    let mut out = vec![0.0; h * w];
    for r in 0..h {
        for c in 0..w {
            let b = r * wp + c;
            out[r * w + c] = (rows[b] + 2.0 * rows[b + 1] + rows[b + 2]) / 4.0 / 0.375;
        }
    }
    out
}

fn add_disk(canvas: &mut [f64], w: usize, cy: f64, cx: f64, radius: f64, value: f64, soft: f64) {
    let h = canvas.len() / w;
    let r0 = (cy - radius - soft).floor().max(0.0) as usize;
    let r1 = ((cy + radius + soft).ceil() as usize).min(h);
    let c0 = (cx - radius - soft).floor().max(0.0) as usize;
    let c1 = ((cx + radius + soft).ceil() as usize).min(w);
    for r in r0..r1 {
        for c in c0..c1 {
            let d = ((r as f64 - cy).powi(2) + (c as f64 - cx).powi(2)).sqrt();
            let cover = if soft > 0.0 { ((radius - d) / soft + 0.5).clamp(0.0, 1.0) } else if d < radius { 1.0 } else { 0.0 };
            canvas[r * w + c] += value * cover;
        }
    }
}

struct Scene {
    canvas: Vec<f64>,
    width: usize,
    origin: (usize, usize),
    noise: f64,
}

fn scene(rng: &mut ChaCha8Rng, h: usize, w: usize, style: Style) -> Scene {
    match style {
        Style::Noise => {
            let (hc, wc) = (h + WALK, w + WALK);
            let canvas = (0..hc * wc).map(|_| rng.random::<f64>()).collect();
            Scene { canvas, width: wc, origin: (0, 0), noise: 0.0 }
        }
        Style::GradientsShapes => {
            let (hc, wc) = (h + WALK, w + WALK);
            let theta = rng.random::<f64>() * std::f64::consts::TAU;
            let slope = rng.random_range(-0.3..0.3);
            let mut canvas = vec![0.0; hc * wc];
            for r in 0..hc {
                for c in 0..wc {
                    let x = (c as f64 / wc as f64 - 0.5) * theta.cos() + (r as f64 / hc as f64 - 0.5) * theta.sin();
                    canvas[r * wc + c] = 0.5 + slope * x;
                }
            }
            for _ in 0..4 {
                let cy = rng.random::<f64>() * hc as f64;
                let cx = rng.random::<f64>() * wc as f64;
                let rad = rng.random_range(0.08..0.25) * h.min(w) as f64;
                let val = rng.random_range(-0.25..0.25);
                if rng.random::<bool>() {
                    add_disk(&mut canvas, wc, cy, cx, rad, val, 0.0);
                } else {
                    let (r0, r1) = ((cy - rad).max(0.0) as usize, ((cy + rad) as usize).min(hc));
                    let (c0, c1) = ((cx - rad).max(0.0) as usize, ((cx + rad) as usize).min(wc));
                    for r in r0..r1 {
                        for v in &mut canvas[r * wc + c0..r * wc + c1] {
                            *v += val;
                        }
                    }
                }
            }
            Scene { canvas, width: wc, origin: (0, 0), noise: 0.01 }
        }
        Style::Textured => {
            let (hc, wc) = (4 * h, 4 * w);
            let smooth = power_law_field(rng, hc, wc, 4.0);
            let tex = power_law_field(rng, hc, wc, 2.0);
            let mut canvas: Vec<f64> = smooth.iter().zip(&tex).map(|(s, t)| 0.5 + 0.15 * s + 0.05 * t).collect();
            let oy = rng.random_range(0..hc - h - WALK);
            let ox = rng.random_range(0..wc - w - WALK);
            for _ in 0..6 {
                let cy = oy as f64 + rng.random::<f64>() * (h + WALK) as f64;
                let cx = ox as f64 + rng.random::<f64>() * (w + WALK) as f64;
                let rad = rng.random_range(4.0..14.0);
                let val = rng.random_range(-0.2..0.2);
                add_disk(&mut canvas, wc, cy, cx, rad, val, 1.5);
            }
            gaussian_blur(&mut canvas, hc, wc, 1.0);
            Scene { canvas, width: wc, origin: (oy, ox), noise: 0.01 }
        }
    }
}

/// Deterministic procedural clip; the view drifts by at most one pixel per
/// axis per frame.
pub fn synth_clip(seed: u64, frames: usize, height: usize, width: usize, style: Style) -> Result<Clip> {
    if height < 16 || width < 16 || frames == 0 {
        return Err(Error::Dimension(format!(
            "synthetic clips need T >= 1 and H, W >= 16, got {frames}x{height}x{width}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let sc = scene(&mut rng, height, width, style);
    let (oy0, ox0) = sc.origin;
    let (mut oy, mut ox) = (oy0 + WALK / 2, ox0 + WALK / 2);
    let mut data = Vec::with_capacity(frames * height * width);
    for _ in 0..frames {
        let noise = if sc.noise > 0.0 { correlated_noise(&mut rng, height, width) } else { vec![] };
        for r in 0..height {
            for c in 0..width {
                let mut v = sc.canvas[(oy + r) * sc.width + ox + c];
                if sc.noise > 0.0 {
                    v += sc.noise * noise[r * width + c];
                }
                data.push(v.clamp(0.0, 1.0) as f32);
            }
        }
        oy = (oy as isize + rng.random_range(-1i64..=1) as isize).clamp(oy0 as isize, (oy0 + WALK) as isize) as usize;
        ox = (ox as isize + rng.random_range(-1i64..=1) as isize).clamp(ox0 as isize, (ox0 + WALK) as isize) as usize;
    }
    Clip::new(frames, height, width, data)
}

/// Small 2D filter, row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Kernel2 {
    pub rows: usize,
    pub cols: usize,
    pub taps: Vec<f64>,
}

impl Kernel2 {
    pub fn separable(taps: &[f64]) -> Self {
        let n = taps.len();
        let mut k = Vec::with_capacity(n * n);
        for a in taps {
            for b in taps {
                k.push(a * b);
            }
        }
        Kernel2 { rows: n, cols: n, taps: k }
    }

    /// `[1,3,3,1]/8` per axis.
    pub fn cubic_b() -> Self {
        Self::separable(&[0.125, 0.375, 0.375, 0.125])
    }

    /// Sample-and-hold of size `f` per axis; inverts `f×f` averaging on constants.
    pub fn hold(f: usize) -> Self {
        Self::separable(&vec![1.0 / f as f64; f])
    }
}

/// Encoder/decoder stand-in: `f×f` average pooling, Gaussian latent noise,
/// then a pixel-shuffle style decoder. The decoder is modelled as zero
/// insertion followed by `kernel`, with a separate gain for each of the `f×f`
/// output phases; unequal phase gains are what leave periodic traces.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AutoencoderSim {
    pub factor: usize,
    pub kernel: Kernel2,
    pub latent_noise: f64,
    /// `factor × factor`, indexed by `(row % f, col % f)`.
    pub phase_gain: Vec<f64>,
}

/// Default phase-gain imbalance. The diagonal term sits just below the
/// strength at which its checkerboard survives `q = 0.1` quantisation intact.
pub const DEFAULT_AXIAL_GAIN: f64 = 0.008;
pub const DEFAULT_DIAGONAL_GAIN: f64 = 0.02;

impl Default for AutoencoderSim {
    fn default() -> Self {
        AutoencoderSim::with_imbalance(2, Kernel2::cubic_b(), 0.01, DEFAULT_AXIAL_GAIN, DEFAULT_DIAGONAL_GAIN)
    }
}

impl AutoencoderSim {
    /// Phase gains `1 + a·(s_r + s_c) + d·s_r·s_c` where `s = ±1` by phase parity.
    pub fn with_imbalance(factor: usize, kernel: Kernel2, latent_noise: f64, axial: f64, diagonal: f64) -> Self {
        let sign = |p: usize| if p % 2 == 0 { 1.0 } else { -1.0 };
        let mut g = Vec::with_capacity(factor * factor);
        for pr in 0..factor {
            for pc in 0..factor {
                g.push(1.0 + axial * (sign(pr) + sign(pc)) + diagonal * sign(pr) * sign(pc));
            }
        }
        AutoencoderSim { factor, kernel, latent_noise, phase_gain: g }
    }

    pub fn balanced(factor: usize, kernel: Kernel2, latent_noise: f64) -> Self {
        Self::with_imbalance(factor, kernel, latent_noise, 0.0, 0.0)
    }

    fn validate(&self) -> Result<()> {
        if self.factor < 2 || !self.factor.is_power_of_two() {
            return Err(Error::Config(format!("factor {} must be a power of two >= 2", self.factor)));
        }
        if self.kernel.taps.len() != self.kernel.rows * self.kernel.cols || self.kernel.taps.iter().all(|&v| v == 0.0) {
            return Err(Error::Config("synthesis kernel must be nonzero and well formed".into()));
        }
        if self.phase_gain.len() != self.factor * self.factor {
            return Err(Error::Config("phase gain table must be factor x factor".into()));
        }
        if !(self.latent_noise >= 0.0) {
            return Err(Error::Config("latent noise must be non-negative".into()));
        }
        Ok(())
    }
}

pub fn sim_autoencode(clip: &Clip, ae: &AutoencoderSim, seed: u64) -> Result<Clip> {
    ae.validate()?;
    let f = ae.factor;
    let (h, w) = (clip.height, clip.width);
    if h % f != 0 || w % f != 0 {
        return Err(Error::Dimension(format!("{h}x{w} is not divisible by factor {f}")));
    }
    let (lh, lw) = (h / f, w / f);
    let k = &ae.kernel;
    let (ar, ac) = ((k.rows as isize - 1) / 2, (k.cols as isize - 1) / 2);
    let gain = (f * f) as f64;
    let mut out = clip.clone();
    let mut z = vec![0.0f64; lh * lw];
    for t in 0..clip.frames {
        let x = clip.frame(t);
        let mut rng = frame_rng(seed, t as u64);
        for lr in 0..lh {
            for lc in 0..lw {
                let mut acc = 0.0;
                for dr in 0..f {
                    for dc in 0..f {
                        acc += x[(lr * f + dr) * w + lc * f + dc] as f64;
                    }
                }
                let n: f64 = rng.sample(StandardNormal);
                z[lr * lw + lc] = acc / gain + ae.latent_noise * n;
            }
        }
        let y = out.frame_mut(t);
        for r in 0..h {
            for c in 0..w {
                // out[r,c] = Σ K[i,j] · up[r - i + ar, c - j + ac], up nonzero on the f-lattice.
                let mut acc = 0.0;
                for i in 0..k.rows {
                    let m = r as isize - i as isize + ar;
                    if m.rem_euclid(f as isize) != 0 {
                        continue;
                    }
                    let zr = (m.div_euclid(f as isize)).clamp(0, lh as isize - 1) as usize;
                    for j in 0..k.cols {
                        let n = c as isize - j as isize + ac;
                        if n.rem_euclid(f as isize) != 0 {
                            continue;
                        }
                        let zc = (n.div_euclid(f as isize)).clamp(0, lw as isize - 1) as usize;
                        acc += k.taps[i * k.cols + j] * z[zr * lw + zc];
                    }
                }
                let g = ae.phase_gain[(r % f) * f + c % f];
                y[r * w + c] = (gain * acc * g).clamp(0.0, 1.0) as f32;
            }
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ToyCodec {
    pub block: usize,
    pub quant_step: f64,
    pub temporal_smoothing: f64,
}

impl Default for ToyCodec {
    fn default() -> Self {
        ToyCodec { block: 8, quant_step: 0.1, temporal_smoothing: 0.0 }
    }
}

/// Orthonormal DCT-II basis, `c[k][n]`.
fn dct_matrix(b: usize) -> Vec<f64> {
    let mut m = vec![0.0; b * b];
    for k in 0..b {
        let s = if k == 0 { (1.0 / b as f64).sqrt() } else { (2.0 / b as f64).sqrt() };
        for n in 0..b {
            m[k * b + n] = s * (std::f64::consts::PI * (2 * n + 1) as f64 * k as f64 / (2 * b) as f64).cos();
        }
    }
    m
}

/// Per frame: block DCT, uniform quantisation, inverse DCT; then first-order
/// temporal smoothing and clamping.
pub fn toy_compress(clip: &Clip, codec: &ToyCodec) -> Result<Clip> {
    let b = codec.block;
    if b == 0 || clip.height % b != 0 || clip.width % b != 0 {
        return Err(Error::Dimension(format!(
            "block {b} does not divide {}x{}",
            clip.height, clip.width
        )));
    }
    if !(codec.quant_step > 0.0) {
        return Err(Error::Config(format!("quant step must be positive, got {}", codec.quant_step)));
    }
    if !(0.0..1.0).contains(&codec.temporal_smoothing) {
        return Err(Error::Config(format!("temporal smoothing {} outside [0,1)", codec.temporal_smoothing)));
    }
    let (h, w, q, lam) = (clip.height, clip.width, codec.quant_step, codec.temporal_smoothing);
    let c = dct_matrix(b);
    let mut out = clip.clone();
    let mut prev: Option<Vec<f64>> = None;
    let mut blk = vec![0.0; b * b];
    let mut tmp = vec![0.0; b * b];
    for t in 0..clip.frames {
        let x = clip.frame(t);
        let mut rec = vec![0.0f64; h * w];
        for by in (0..h).step_by(b) {
            for bx in (0..w).step_by(b) {
                for r in 0..b {
                    for s in 0..b {
                        blk[r * b + s] = x[(by + r) * w + bx + s] as f64;
                    }
                }
                // coef = C · X · Cᵀ
                for k in 0..b {
                    for s in 0..b {
                        tmp[k * b + s] = (0..b).map(|n| c[k * b + n] * blk[n * b + s]).sum();
                    }
                }
                for k in 0..b {
                    for l in 0..b {
                        let v: f64 = (0..b).map(|s| tmp[k * b + s] * c[l * b + s]).sum();
                        blk[k * b + l] = (v / q).round() * q;
                    }
                }
                // X = Cᵀ · coef · C
                for n in 0..b {
                    for l in 0..b {
                        tmp[n * b + l] = (0..b).map(|k| c[k * b + n] * blk[k * b + l]).sum();
                    }
                }
                for n in 0..b {
                    for s in 0..b {
                        rec[(by + n) * w + bx + s] = (0..b).map(|l| tmp[n * b + l] * c[l * b + s]).sum();
                    }
                }
            }
        }
        if let Some(p) = &prev {
            for (v, pv) in rec.iter_mut().zip(p) {
                *v = (1.0 - lam) * *v + lam * pv;
            }
        }
        for (o, v) in out.frame_mut(t).iter_mut().zip(&rec) {
            *o = v.clamp(0.0, 1.0) as f32;
        }
        prev = Some(rec);
    }
    Ok(out)
}

pub fn psnr(a: &Clip, b: &Clip) -> Result<f64> {
    a.check_same_dims(b)?;
    let mse = a.data.iter().zip(&b.data).map(|(x, y)| ((x - y) as f64).powi(2)).sum::<f64>() / a.data.len() as f64;
    Ok(if mse == 0.0 { f64::INFINITY } else { 10.0 * (1.0 / mse).log10() })
}

/// CRF drawn uniformly from 16..=30.
pub fn sample_crf(rng: &mut impl Rng) -> u32 {
    rng.random_range(16..=30)
}

/// Round-trip through an external H.264 encoder (ffmpeg-compatible CLI).
///
/// Encode: `<encoder> -y -loglevel error -i in.y4m -c:v libx264 -crf <crf> -pix_fmt yuv420p enc.mp4`
/// Decode: `<encoder> -y -loglevel error -i enc.mp4 -f yuv4mpeg2 -pix_fmt yuv420p out.y4m`
#[cfg(feature = "external-encoder")]
pub fn external_encode(clip: &Clip, crf: u32, encoder_path: &Path) -> Result<Clip> {
    use std::process::Command;
    if crf > 51 {
        return Err(Error::Config(format!("crf {crf} outside 0..=51")));
    }
    let dir = std::env::temp_dir().join(format!("wavescope-enc-{}-{crf}", std::process::id()));
    fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    let (inp, enc, outp) = (dir.join("in.y4m"), dir.join("enc.mp4"), dir.join("out.y4m"));
    video_io::save_y4m(clip, &inp, video_io::Chroma::C420)?;
    let run = |args: Vec<String>| -> Result<()> {
        let out = Command::new(encoder_path)
            .args(&args)
            .output()
            .map_err(|e| Error::Capability(format!("cannot run {}: {e}", encoder_path.display())))?;
        if out.status.success() {
            Ok(())
        } else {
            Err(Error::Subprocess {
                program: encoder_path.display().to_string(),
                status: out.status.to_string(),
                stderr: String::from_utf8_lossy(&out.stderr).trim().to_string(),
            })
        }
    };
    let s = |p: &Path| p.display().to_string();
    run(vec![
        "-y".into(), "-loglevel".into(), "error".into(), "-i".into(), s(&inp),
        "-c:v".into(), "libx264".into(), "-crf".into(), crf.to_string(),
        "-pix_fmt".into(), "yuv420p".into(), s(&enc),
    ])?;
    run(vec![
        "-y".into(), "-loglevel".into(), "error".into(), "-i".into(), s(&enc),
        "-f".into(), "yuv4mpeg2".into(), "-pix_fmt".into(), "yuv420p".into(), s(&outp),
    ])?;
    let out = video_io::load_y4m(&outp);
    let _ = fs::remove_dir_all(&dir);
    out
}

#[cfg(not(feature = "external-encoder"))]
pub fn external_encode(_clip: &Clip, _crf: u32, _encoder_path: &Path) -> Result<Clip> {
    Err(Error::Capability("built without the external-encoder feature".into()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ClipFormat {
    #[default]
    Y4m,
    Wvt,
}

impl ClipFormat {
    fn ext(self) -> &'static str {
        match self {
            ClipFormat::Y4m => "y4m",
            ClipFormat::Wvt => "wvt",
        }
    }
}

impl FromStr for ClipFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "y4m" => Ok(ClipFormat::Y4m),
            "wvt" => Ok(ClipFormat::Wvt),
            _ => Err(Error::Config(format!("unknown clip format {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetSpec {
    pub n_real: usize,
    pub n_fake: usize,
    pub frames: usize,
    pub height: usize,
    pub width: usize,
    pub style: Style,
    pub ae: AutoencoderSim,
    pub seed: u64,
}

impl Default for DatasetSpec {
    fn default() -> Self {
        DatasetSpec {
            n_real: 100,
            n_fake: 100,
            frames: 32,
            height: 64,
            width: 64,
            style: Style::Textured,
            ae: AutoencoderSim::default(),
            seed: 7,
        }
    }
}

/// Real clip `i` and its autoencoded fake for a dataset seed.
pub fn real_clip(spec: &DatasetSpec, i: usize) -> Result<Clip> {
    synth_clip(mix_seed(spec.seed, 2 * i as u64), spec.frames, spec.height, spec.width, spec.style)
}

pub fn fake_clip(spec: &DatasetSpec, real: &Clip, i: usize) -> Result<Clip> {
    sim_autoencode(real, &spec.ae, mix_seed(spec.seed, 2 * i as u64 + 1))
}

/// Generate clips plus `manifest.json` under `out`. Fake `i` is the
/// autoencoded version of real `i mod n_real`, and they share a `pair_id`.
pub fn make_dataset(spec: &DatasetSpec, out: &Path, format: ClipFormat) -> Result<Manifest> {
    if spec.n_real == 0 && spec.n_fake > 0 {
        return Err(Error::Config("fakes are derived from reals; n_real must be positive".into()));
    }
    fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    let reals = (0..spec.n_real).map(|i| real_clip(spec, i)).collect::<Result<Vec<_>>>()?;
    let mut entries = Vec::new();
    for (i, r) in reals.iter().enumerate() {
        let name = format!("real_{i:04}.{}", format.ext());
        video_io::save_clip(r, out.join(&name))?;
        entries.push(ManifestEntry {
            path: name,
            label: Label::Real,
            pair_id: (i < spec.n_fake).then(|| format!("pair_{i:04}")),
            tags: vec![spec.style.to_string()],
        });
    }
    for i in 0..spec.n_fake {
        let src = i % spec.n_real;
        let f = fake_clip(spec, &reals[src], i)?;
        let name = format!("fake_{i:04}.{}", format.ext());
        video_io::save_clip(&f, out.join(&name))?;
        entries.push(ManifestEntry {
            path: name,
            label: Label::Fake,
            pair_id: Some(format!("pair_{src:04}")),
            tags: vec!["autoencoded".into()],
        });
    }
    let mut m = Manifest::new(entries)?;
    m.base = out.to_path_buf();
    m.save(out.join("manifest.json"))?;
    Ok(m)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn synth_is_deterministic_and_seed_dependent() {
        for style in [Style::Noise, Style::GradientsShapes, Style::Textured] {
            let a = synth_clip(3, 4, 32, 32, style).unwrap();
            assert_eq!(a, synth_clip(3, 4, 32, 32, style).unwrap());
            assert_ne!(a, synth_clip(4, 4, 32, 32, style).unwrap());
            assert!(a.data.iter().all(|&v| (0.0..=1.0).contains(&v)));
        }
    }

    #[test]
    fn noise_style_frame_means() {
        let c = synth_clip(11, 4, 64, 64, Style::Noise).unwrap();
        for t in 0..c.frames {
            let m = c.frame(t).iter().map(|&v| v as f64).sum::<f64>() / c.frame_len() as f64;
            assert!((0.45..=0.55).contains(&m), "frame {t} mean {m}");
        }
    }

    #[test]
    fn frames_are_translated_copies() {
        let c = synth_clip(5, 8, 32, 32, Style::Noise).unwrap();
        assert!((1..c.frames).any(|t| c.frame(t) != c.frame(0)));
    }

    #[test]
    fn small_dims_rejected() {
        assert!(matches!(synth_clip(0, 1, 8, 32, Style::Noise), Err(Error::Dimension(_))));
    }

    #[test]
    fn hold_kernel_reproduces_constant() {
        let c = Clip::new(2, 16, 16, vec![0.37; 512]).unwrap();
        let ae = AutoencoderSim::balanced(2, Kernel2::hold(2), 0.0);
        let y = sim_autoencode(&c, &ae, 1).unwrap();
        assert!(y.data.iter().all(|&v| (v - 0.37).abs() < 1e-6));
        let y = sim_autoencode(&c, &AutoencoderSim::balanced(2, Kernel2::cubic_b(), 0.0), 1).unwrap();
        assert!(y.data.iter().all(|&v| (v - 0.37).abs() < 1e-6));
    }

    #[test]
    fn autoencode_rejects_odd_dims() {
        let c = Clip::zeros(1, 17, 16);
        assert!(matches!(sim_autoencode(&c, &AutoencoderSim::default(), 0), Err(Error::Dimension(_))));
    }

    #[test]
    fn dct_is_orthonormal() {
        let b = 8;
        let c = dct_matrix(b);
        for i in 0..b {
            for j in 0..b {
                let d: f64 = (0..b).map(|n| c[i * b + n] * c[j * b + n]).sum();
                assert!((d - if i == j { 1.0 } else { 0.0 }).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn tiny_quant_step_is_lossless() {
        let c = synth_clip(2, 3, 32, 32, Style::Textured).unwrap();
        let y = toy_compress(&c, &ToyCodec { block: 8, quant_step: 1e-6, temporal_smoothing: 0.0 }).unwrap();
        assert!(c.data.iter().zip(&y.data).all(|(a, b)| (a - b).abs() < 1e-4));
    }

    #[test]
    fn psnr_falls_with_quant_step() {
        let c = synth_clip(8, 4, 64, 64, Style::Textured).unwrap();
        let mut last = f64::INFINITY;
        for q in [0.01, 0.05, 0.1, 0.2] {
            let p = psnr(&c, &toy_compress(&c, &ToyCodec { block: 8, quant_step: q, temporal_smoothing: 0.0 }).unwrap()).unwrap();
            assert!(p < last, "q={q}: {p} !< {last}");
            last = p;
        }
    }

    #[test]
    fn codec_parameter_errors() {
        let c = Clip::zeros(1, 20, 16);
        assert!(matches!(toy_compress(&c, &ToyCodec::default()), Err(Error::Dimension(_))));
        let c = Clip::zeros(1, 16, 16);
        let bad = ToyCodec { quant_step: 0.0, ..ToyCodec::default() };
        assert!(toy_compress(&c, &bad).is_err());
        let bad = ToyCodec { temporal_smoothing: 1.0, ..ToyCodec::default() };
        assert!(toy_compress(&c, &bad).is_err());
    }

    #[test]
    fn temporal_smoothing_follows_recursion() {
        let mut c = Clip::zeros(2, 8, 8);
        c.frame_mut(0).fill(0.2);
        c.frame_mut(1).fill(0.8);
        let y = toy_compress(&c, &ToyCodec { block: 8, quant_step: 1e-9, temporal_smoothing: 0.25 }).unwrap();
        assert!(y.frame(1).iter().all(|&v| (v - (0.75 * 0.8 + 0.25 * 0.2)).abs() < 1e-6));
    }

    #[test]
    fn crf_samples_in_range() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!((0..500).map(|_| sample_crf(&mut rng)).all(|c| (16..=30).contains(&c)));
    }

    #[cfg(not(feature = "external-encoder"))]
    #[test]
    fn external_encoder_needs_feature() {
        let c = Clip::zeros(1, 16, 16);
        assert!(matches!(external_encode(&c, 20, Path::new("ffmpeg")), Err(Error::Capability(_))));
    }

    #[test]
    fn dataset_manifest_pairs() {
        let dir = tempfile::tempdir().unwrap();
        let spec = DatasetSpec { n_real: 3, n_fake: 2, frames: 2, height: 16, width: 16, ..DatasetSpec::default() };
        let m = make_dataset(&spec, dir.path(), ClipFormat::Wvt).unwrap();
        assert_eq!(m.entries.len(), 5);
        let loaded = Manifest::load(dir.path().join("manifest.json")).unwrap();
        let fake = &loaded.entries[3];
        assert_eq!(loaded.paired_real(fake).unwrap().path, "real_0000.wvt");
        let clip = video_io::load_clip(loaded.resolve(fake)).unwrap();
        assert_eq!((clip.frames, clip.height), (2, 16));
    }
}
