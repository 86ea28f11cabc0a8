//! Denoising residuals, averaged 3D power spectra and the per-frequency
//! reconstruction distance.
//!
//! DFTs are unitary (scaled by `1/sqrt(M·N·P)`), so the mean of `S_yx` times
//! `M·N` is the mean residual energy per frame.

use std::fs;
use std::path::Path;
use std::str::FromStr;

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

use crate::error::{Error, Result};
use crate::video_io::{Clip, Tensor};

/// Per-frame smoother whose output is subtracted to form the residual.
pub trait Denoiser: Send + Sync {
    fn denoise(&self, frame: &[f32], height: usize, width: usize) -> Vec<f32>;
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Identity;

impl Denoiser for Identity {
    fn denoise(&self, frame: &[f32], _: usize, _: usize) -> Vec<f32> {
        frame.to_vec()
    }
}

/// 3×3 separable Gaussian blur with replicated edges.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Gaussian3 {
    pub sigma: f64,
    taps: [f64; 3],
}

impl Gaussian3 {
    pub fn new(sigma: f64) -> Result<Self> {
        if !(sigma > 0.0 && sigma.is_finite()) {
            return Err(Error::Config(format!("gaussian sigma must be positive, got {sigma}")));
        }
        let side = (-1.0 / (2.0 * sigma * sigma)).exp();
        let norm = 1.0 + 2.0 * side;
        Ok(Gaussian3 { sigma, taps: [side / norm, 1.0 / norm, side / norm] })
    }
}

impl Denoiser for Gaussian3 {
    fn denoise(&self, frame: &[f32], h: usize, w: usize) -> Vec<f32> {
        let k = self.taps;
        let mut tmp = vec![0.0f64; h * w];
        for r in 0..h {
            let row = &frame[r * w..(r + 1) * w];
            for c in 0..w {
                let l = row[c.saturating_sub(1)] as f64;
                let m = row[c] as f64;
                let rr = row[(c + 1).min(w - 1)] as f64;
                tmp[r * w + c] = k[0] * l + k[1] * m + k[2] * rr;
            }
        }
        let mut out = vec![0.0f32; h * w];
        for r in 0..h {
            let up = r.saturating_sub(1) * w;
            let dn = (r + 1).min(h - 1) * w;
            for c in 0..w {
                out[r * w + c] = (k[0] * tmp[up + c] + k[1] * tmp[r * w + c] + k[2] * tmp[dn + c]) as f32;
            }
        }
        out
    }
}

/// Parsed denoiser selector: `gaussian:<sigma>` or `identity`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DenoiserSpec {
    Gaussian(f64),
    Identity,
}

impl Default for DenoiserSpec {
    fn default() -> Self {
        DenoiserSpec::Gaussian(0.8)
    }
}

impl DenoiserSpec {
    pub fn build(self) -> Result<Box<dyn Denoiser>> {
        Ok(match self {
            DenoiserSpec::Gaussian(s) => Box::new(Gaussian3::new(s)?),
            DenoiserSpec::Identity => Box::new(Identity),
        })
    }
}

impl FromStr for DenoiserSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s == "identity" {
            return Ok(DenoiserSpec::Identity);
        }
        let sigma = s
            .strip_prefix("gaussian:")
            .and_then(|v| v.parse::<f64>().ok())
            .ok_or_else(|| Error::Config(format!("denoiser {s:?} is not gaussian:<sigma> or identity")))?;
        Gaussian3::new(sigma)?;
        Ok(DenoiserSpec::Gaussian(sigma))
    }
}

impl std::fmt::Display for DenoiserSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            DenoiserSpec::Gaussian(s) => write!(f, "gaussian:{s}"),
            DenoiserSpec::Identity => f.write_str("identity"),
        }
    }
}

impl serde::Serialize for DenoiserSpec {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> serde::Deserialize<'de> for DenoiserSpec {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// `x - D(x)` frame by frame. The result is not clamped.
pub fn residual(clip: &Clip, denoiser: &dyn Denoiser) -> Result<Clip> {
    let mut out = clip.clone();
    for t in 0..clip.frames {
        let d = denoiser.denoise(clip.frame(t), clip.height, clip.width);
        if d.len() != clip.frame_len() {
            return Err(Error::Dimension(format!(
                "denoiser returned {} samples for a {}x{} frame",
                d.len(),
                clip.height,
                clip.width
            )));
        }
        for (o, (x, y)) in out.frame_mut(t).iter_mut().zip(clip.frame(t).iter().zip(&d)) {
            *o = x - y;
        }
    }
    Ok(out)
}

/// Dense row-major `f64` matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl Grid {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Grid { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn at(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    pub fn median(&self) -> f64 {
        let mut v = self.data.clone();
        v.sort_by(f64::total_cmp);
        let n = v.len();
        if n % 2 == 1 {
            v[n / 2]
        } else {
            0.5 * (v[n / 2 - 1] + v[n / 2])
        }
    }

    pub fn mean(&self) -> f64 {
        self.data.iter().sum::<f64>() / self.data.len() as f64
    }

    pub fn to_tensor(&self) -> Tensor {
        Tensor { dims: vec![self.rows, self.cols], data: self.data.iter().map(|&v| v as f32).collect() }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumSet {
    /// `M × N`, vertical by horizontal frequency.
    pub s_yx: Grid,
    /// `P × N`, temporal by horizontal frequency.
    pub s_tx: Grid,
    /// `M × P`, vertical by temporal frequency.
    pub s_yt: Grid,
    pub clip_count: usize,
}

/// Unitary 3D DFT of a clip, laid out `[w][u][v]` like the clip itself.
pub fn dft3(clip: &Clip, planner: &mut FftPlanner<f64>) -> Vec<Complex<f64>> {
    let (p, m, n) = (clip.frames, clip.height, clip.width);
    let mut buf: Vec<Complex<f64>> = clip.data.iter().map(|&v| Complex::new(v as f64, 0.0)).collect();
    let fn_ = planner.plan_fft_forward(n);
    fn_.process(&mut buf);
    let mut line = vec![Complex::new(0.0, 0.0); m.max(p)];
    let fm = planner.plan_fft_forward(m);
    for t in 0..p {
        for c in 0..n {
            for r in 0..m {
                line[r] = buf[(t * m + r) * n + c];
            }
            fm.process(&mut line[..m]);
            for r in 0..m {
                buf[(t * m + r) * n + c] = line[r];
            }
        }
    }
    let fp = planner.plan_fft_forward(p);
    for k in 0..m * n {
        for t in 0..p {
            line[t] = buf[t * m * n + k];
        }
        fp.process(&mut line[..p]);
        for t in 0..p {
            buf[t * m * n + k] = line[t];
        }
    }
    let scale = 1.0 / ((m * n * p) as f64).sqrt();
    for v in &mut buf {
        *v *= scale;
    }
    buf
}

fn check_common_dims(clips: &[Clip]) -> Result<&Clip> {
    let first = clips.first().ok_or_else(|| Error::Dimension("no clips given".into()))?;
    for c in clips {
        first.check_same_dims(c)?;
    }
    Ok(first)
}

/// Averaged power spectra of already-computed residual clips.
pub fn power_spectra(residuals: &[Clip]) -> Result<SpectrumSet> {
    let first = check_common_dims(residuals)?;
    let (p, m, n) = (first.frames, first.height, first.width);
    let mut planner = FftPlanner::new();
    let mut s_yx = Grid::zeros(m, n);
    let mut s_tx = Grid::zeros(p, n);
    let mut s_yt = Grid::zeros(m, p);
    for clip in residuals {
        let r = dft3(clip, &mut planner);
        for w in 0..p {
            for u in 0..m {
                for v in 0..n {
                    let e = r[(w * m + u) * n + v].norm_sqr();
                    s_yx.data[u * n + v] += e / p as f64;
                    s_tx.data[w * n + v] += e / m as f64;
                    s_yt.data[u * p + w] += e / n as f64;
                }
            }
        }
    }
    let i = residuals.len() as f64;
    for g in [&mut s_yx, &mut s_tx, &mut s_yt] {
        for v in &mut g.data {
            *v /= i;
        }
    }
    Ok(SpectrumSet { s_yx, s_tx, s_yt, clip_count: residuals.len() })
}

/// Residuals under `denoiser`, then [`power_spectra`].
pub fn residual_spectra(clips: &[Clip], denoiser: &dyn Denoiser) -> Result<SpectrumSet> {
    let res = clips.iter().map(|c| residual(c, denoiser)).collect::<Result<Vec<_>>>()?;
    power_spectra(&res)
}

#[derive(Debug, Clone, PartialEq)]
pub struct DistanceMap {
    pub d: Grid,
    pub clip_count: usize,
    /// Cells whose real-signal energy was zero in some clip; those terms count as 0.
    pub zero_denominator_cells: usize,
}

/// Per-frequency squared reconstruction error normalised by the real clip's
/// energy, summed over temporal frequency and averaged over clip pairs.
pub fn freq_distance(real: &[Clip], recon: &[Clip]) -> Result<DistanceMap> {
    if real.len() != recon.len() {
        return Err(Error::Dimension(format!(
            "{} real clips vs {} reconstructions",
            real.len(),
            recon.len()
        )));
    }
    let first = check_common_dims(real)?;
    let (p, m, n) = (first.frames, first.height, first.width);
    let mut planner = FftPlanner::new();
    let mut d = Grid::zeros(m, n);
    let mut zero = 0usize;
    for (x, y) in real.iter().zip(recon) {
        x.check_same_dims(y)?;
        let fx = dft3(x, &mut planner);
        let fy = dft3(y, &mut planner);
        for u in 0..m {
            for v in 0..n {
                let (mut num, mut den) = (0.0, 0.0);
                for w in 0..p {
                    let k = (w * m + u) * n + v;
                    num += (fx[k] - fy[k]).norm_sqr();
                    den += fx[k].norm_sqr();
                }
                if den > 0.0 {
                    d.data[u * n + v] += num / den;
                } else {
                    zero += 1;
                }
            }
        }
    }
    for v in &mut d.data {
        *v /= real.len() as f64;
    }
    Ok(DistanceMap { d, clip_count: real.len(), zero_denominator_cells: zero })
}

/// 8-bit image of `log10(grid + eps)` with DC moved to the centre.
pub fn render_pgm(grid: &Grid, log_eps: f64) -> Vec<u8> {
    let (m, n) = (grid.rows, grid.cols);
    let logs: Vec<f64> = grid.data.iter().map(|&v| (v + log_eps).log10()).collect();
    let lo = logs.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut pix = vec![0u8; m * n];
    for u in 0..m {
        for v in 0..n {
            let val = if hi > lo { (logs[u * n + v] - lo) / (hi - lo) * 255.0 } else { 0.0 };
            pix[((u + m / 2) % m) * n + (v + n / 2) % n] = val.round() as u8;
        }
    }
    let mut out = format!("P5\n{n} {m}\n255\n").into_bytes();
    out.extend_from_slice(&pix);
    out
}

pub fn render_spectrum(grid: &Grid, path: impl AsRef<Path>, log_eps: f64) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, render_pgm(grid, log_eps)).map_err(|e| Error::io(path, e))
}
