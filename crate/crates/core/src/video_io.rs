//! Clip, tensor and manifest I/O.
//!
//! Y4M support covers the 8-bit `C444` / `C420` subset. Only the luma plane is
//! kept, scaled by 1/255.

use std::collections::HashMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Rational {
    pub num: u32,
    pub den: u32,
}

impl Default for Rational {
    fn default() -> Self {
        Rational { num: 30, den: 1 }
    }
}

/// Planar single-channel video, `frames × height × width`, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Clip {
    pub frames: usize,
    pub height: usize,
    pub width: usize,
    pub data: Vec<f32>,
    pub frame_rate: Rational,
}

impl Clip {
    pub fn new(frames: usize, height: usize, width: usize, data: Vec<f32>) -> Result<Self> {
        if frames == 0 || height == 0 || width == 0 {
            return Err(Error::Dimension(format!(
                "clip dims must be positive, got {frames}x{height}x{width}"
            )));
        }
        if data.len() != frames * height * width {
            return Err(Error::Dimension(format!(
                "clip data has {} values, expected {}",
                data.len(),
                frames * height * width
            )));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::Structure("clip contains non-finite values".into()));
        }
        Ok(Clip { frames, height, width, data, frame_rate: Rational::default() })
    }

    pub fn zeros(frames: usize, height: usize, width: usize) -> Self {
        Clip {
            frames,
            height,
            width,
            data: vec![0.0; frames * height * width],
            frame_rate: Rational::default(),
        }
    }

    pub fn frame_len(&self) -> usize {
        self.height * self.width
    }

    pub fn frame(&self, t: usize) -> &[f32] {
        let n = self.frame_len();
        &self.data[t * n..(t + 1) * n]
    }

    pub fn frame_mut(&mut self, t: usize) -> &mut [f32] {
        let n = self.frame_len();
        &mut self.data[t * n..(t + 1) * n]
    }

    pub fn same_dims(&self, other: &Clip) -> bool {
        self.frames == other.frames && self.height == other.height && self.width == other.width
    }

    pub fn check_same_dims(&self, other: &Clip) -> Result<()> {
        if self.same_dims(other) {
            Ok(())
        } else {
            Err(Error::Dimension(format!(
                "clip dims differ: {}x{}x{} vs {}x{}x{}",
                self.frames, self.height, self.width, other.frames, other.height, other.width
            )))
        }
    }

    /// Round to 8-bit levels, as a Y4M round trip would.
    pub fn quantized(&self) -> Clip {
        let mut out = self.clone();
        for v in &mut out.data {
            *v = quantize_u8(*v) as f32 / 255.0;
        }
        out
    }
}

fn quantize_u8(v: f32) -> u8 {
    (v.clamp(0.0, 1.0) * 255.0).round() as u8
}

/// Spatial window of `h × w` centered at offset `floor((H-h)/2), floor((W-w)/2)`.
pub fn center_crop(clip: &Clip, h: usize, w: usize) -> Result<Clip> {
    if h > clip.height || w > clip.width {
        return Err(Error::Dimension(format!(
            "cannot crop {}x{} to {h}x{w}",
            clip.height, clip.width
        )));
    }
    if h == 0 || w == 0 {
        return Err(Error::Dimension("crop size must be positive".into()));
    }
    let oy = (clip.height - h) / 2;
    let ox = (clip.width - w) / 2;
    let mut data = Vec::with_capacity(clip.frames * h * w);
    for t in 0..clip.frames {
        let f = clip.frame(t);
        for y in 0..h {
            let row = (oy + y) * clip.width + ox;
            data.extend_from_slice(&f[row..row + w]);
        }
    }
    Ok(Clip { frames: clip.frames, height: h, width: w, data, frame_rate: clip.frame_rate })
}

/// Center-crop so both spatial dims are divisible by `2^levels`.
pub fn crop_for_levels(clip: &Clip, levels: u32) -> Result<Clip> {
    let m = 1usize << levels;
    let h = clip.height / m * m;
    let w = clip.width / m * m;
    if h == 0 || w == 0 {
        return Err(Error::Dimension(format!(
            "clip {}x{} is smaller than 2^{levels}",
            clip.height, clip.width
        )));
    }
    center_crop(clip, h, w)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Chroma {
    C444,
    C420,
}

impl Chroma {
    fn plane_bytes(self, h: usize, w: usize) -> usize {
        match self {
            Chroma::C444 => 2 * h * w,
            Chroma::C420 => 2 * h.div_ceil(2) * w.div_ceil(2),
        }
    }
}

pub fn load_y4m(path: impl AsRef<Path>) -> Result<Clip> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    parse_y4m(&bytes)
}

pub fn parse_y4m(bytes: &[u8]) -> Result<Clip> {
    const MAGIC: &[u8] = b"YUV4MPEG2";
    if !bytes.starts_with(MAGIC) {
        return Err(Error::Format { offset: 0, msg: "missing YUV4MPEG2 magic".into() });
    }
    let eol = bytes
        .iter()
        .position(|&b| b == b'\n')
        .ok_or_else(|| Error::Format { offset: bytes.len() as u64, msg: "unterminated header".into() })?;
    let header = &bytes[..eol];
    let mut width = None;
    let mut height = None;
    let mut rate = Rational::default();
    let mut chroma = Chroma::C420;
    let mut pos = MAGIC.len();
    for tok in header[MAGIC.len()..].split(|&b| b == b' ') {
        let at = pos as u64;
        pos += tok.len() + 1;
        if tok.is_empty() {
            continue;
        }
        let text = std::str::from_utf8(tok)
            .map_err(|_| Error::Format { offset: at, msg: "non-ASCII header token".into() })?;
        let bad = |msg: &str| Error::Format { offset: at, msg: format!("{msg}: {text:?}") };
        match text.as_bytes()[0] {
            b'W' => width = Some(text[1..].parse::<usize>().map_err(|_| bad("bad width"))?),
            b'H' => height = Some(text[1..].parse::<usize>().map_err(|_| bad("bad height"))?),
            b'F' => {
                let (n, d) = text[1..].split_once(':').ok_or_else(|| bad("bad frame rate"))?;
                rate = Rational {
                    num: n.parse().map_err(|_| bad("bad frame rate"))?,
                    den: d.parse().map_err(|_| bad("bad frame rate"))?,
                };
                if rate.den == 0 {
                    return Err(bad("zero frame-rate denominator"));
                }
            }
            b'C' => {
                chroma = match &text[1..] {
                    "444" => Chroma::C444,
                    "420" | "420jpeg" | "420paldv" | "420mpeg2" => Chroma::C420,
                    _ => return Err(bad("unsupported colour space")),
                }
            }
            b'I' | b'A' | b'X' => {}
            _ => return Err(bad("unknown header token")),
        }
    }
    let (w, h) = match (width, height) {
        (Some(w), Some(h)) if w > 0 && h > 0 => (w, h),
        _ => return Err(Error::Format { offset: eol as u64, msg: "header lacks positive W and H".into() }),
    };
    let luma = w * h;
    let chroma_len = chroma.plane_bytes(h, w);
    let mut data = Vec::new();
    let mut frames = 0usize;
    let mut off = eol + 1;
    while off < bytes.len() {
        if !bytes[off..].starts_with(b"FRAME") {
            return Err(Error::Format { offset: off as u64, msg: "expected FRAME marker".into() });
        }
        let nl = match bytes[off..].iter().position(|&b| b == b'\n') {
            Some(p) => off + p,
            None => return Err(Error::Truncated { frames }),
        };
        let start = nl + 1;
        if start + luma + chroma_len > bytes.len() {
            return Err(Error::Truncated { frames });
        }
        data.extend(bytes[start..start + luma].iter().map(|&b| b as f32 / 255.0));
        frames += 1;
        off = start + luma + chroma_len;
    }
    if frames == 0 {
        return Err(Error::Truncated { frames: 0 });
    }
    Ok(Clip { frames, height: h, width: w, data, frame_rate: rate })
}

pub fn encode_y4m(clip: &Clip, chroma: Chroma) -> Vec<u8> {
    let tag = match chroma {
        Chroma::C444 => "C444",
        Chroma::C420 => "C420",
    };
    let mut out = format!(
        "YUV4MPEG2 W{} H{} F{}:{} {}\n",
        clip.width, clip.height, clip.frame_rate.num, clip.frame_rate.den, tag
    )
    .into_bytes();
    let chroma_len = chroma.plane_bytes(clip.height, clip.width);
    for t in 0..clip.frames {
        out.extend_from_slice(b"FRAME\n");
        out.extend(clip.frame(t).iter().map(|&v| quantize_u8(v)));
        out.extend(std::iter::repeat_n(128u8, chroma_len));
    }
    out
}

pub fn save_y4m(clip: &Clip, path: impl AsRef<Path>, chroma: Chroma) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, encode_y4m(clip, chroma)).map_err(|e| Error::io(path, e))
}

/// Dense f32 tensor of rank at most 4, row-major with the last index fastest.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    pub dims: Vec<usize>,
    pub data: Vec<f32>,
}

const TENSOR_MAGIC: &[u8; 4] = b"WVT1";

impl Tensor {
    pub fn new(dims: Vec<usize>, data: Vec<f32>) -> Result<Self> {
        check_dims(&dims)?;
        let n: usize = dims.iter().product();
        if n != data.len() {
            return Err(Error::Size(format!("dims {dims:?} need {n} values, got {}", data.len())));
        }
        Ok(Tensor { dims, data })
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        check_dims(&self.dims)?;
        let mut out = Vec::with_capacity(8 + 4 * self.dims.len() + 4 * self.data.len());
        out.extend_from_slice(TENSOR_MAGIC);
        out.extend_from_slice(&(self.dims.len() as u32).to_le_bytes());
        for &d in &self.dims {
            out.extend_from_slice(&(d as u32).to_le_bytes());
        }
        for &v in &self.data {
            out.extend_from_slice(&v.to_le_bytes());
        }
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < 8 || &bytes[..4] != TENSOR_MAGIC {
            return Err(Error::Format { offset: 0, msg: "missing WVT1 magic".into() });
        }
        let word = |i: usize| -> Result<u32> {
            bytes
                .get(i..i + 4)
                .map(|b| u32::from_le_bytes([b[0], b[1], b[2], b[3]]))
                .ok_or(Error::Format { offset: i as u64, msg: "header cut short".into() })
        };
        let rank = word(4)? as usize;
        if rank > 4 {
            return Err(Error::Format { offset: 4, msg: format!("rank {rank} exceeds 4") });
        }
        let mut dims = Vec::with_capacity(rank);
        for k in 0..rank {
            dims.push(word(8 + 4 * k)? as usize);
        }
        check_dims(&dims)?;
        let start = 8 + 4 * rank;
        let n: usize = dims.iter().product();
        let payload = &bytes[start..];
        if payload.len() != 4 * n {
            return Err(Error::Format {
                offset: start as u64,
                msg: format!("payload has {} bytes, expected {}", payload.len(), 4 * n),
            });
        }
        let data = payload
            .chunks_exact(4)
            .map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]))
            .collect();
        Ok(Tensor { dims, data })
    }
}

fn check_dims(dims: &[usize]) -> Result<()> {
    if dims.len() > 4 {
        return Err(Error::Size(format!("rank {} exceeds 4", dims.len())));
    }
    for &d in dims {
        if d == 0 {
            return Err(Error::Size(format!("zero-length dimension in {dims:?}")));
        }
        if d > u32::MAX as usize {
            return Err(Error::Size(format!("dimension {d} does not fit in 32 bits")));
        }
    }
    Ok(())
}

pub fn save_tensor(t: &Tensor, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let bytes = t.to_bytes()?;
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

pub fn load_tensor(path: impl AsRef<Path>) -> Result<Tensor> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    Tensor::from_bytes(&bytes)
}

impl From<&Clip> for Tensor {
    fn from(c: &Clip) -> Self {
        Tensor { dims: vec![c.frames, c.height, c.width], data: c.data.clone() }
    }
}

impl TryFrom<Tensor> for Clip {
    type Error = Error;

    fn try_from(t: Tensor) -> Result<Clip> {
        match t.dims[..] {
            [h, w] => Clip::new(1, h, w, t.data),
            [f, h, w] => Clip::new(f, h, w, t.data),
            _ => Err(Error::Dimension(format!("tensor of rank {} is not a clip", t.dims.len()))),
        }
    }
}

/// Load a clip from `.y4m` or a rank-2/3 `.wvt` tensor.
pub fn load_clip(path: impl AsRef<Path>) -> Result<Clip> {
    let path = path.as_ref();
    match path.extension().and_then(|e| e.to_str()) {
        Some("wvt") => Clip::try_from(load_tensor(path)?),
        _ => load_y4m(path),
    }
}

/// Save by extension: `.wvt` keeps full precision, anything else is written as C420 Y4M.
pub fn save_clip(clip: &Clip, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    match path.extension().and_then(|e| e.to_str()) {
        Some("wvt") => save_tensor(&Tensor::from(clip), path),
        _ => save_y4m(clip, path, Chroma::C420),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Label {
    Real,
    Fake,
}

impl Label {
    pub fn as_u8(self) -> u8 {
        match self {
            Label::Real => 0,
            Label::Fake => 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub path: String,
    pub label: Label,
    #[serde(default)]
    pub pair_id: Option<String>,
    #[serde(default)]
    pub tags: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Manifest {
    pub entries: Vec<ManifestEntry>,
    /// Directory relative paths are resolved against.
    pub base: PathBuf,
}

impl Manifest {
    pub fn new(entries: Vec<ManifestEntry>) -> Result<Self> {
        let m = Manifest { entries, base: PathBuf::new() };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        let mut seen = HashMap::new();
        for e in &self.entries {
            if seen.insert(e.path.as_str(), ()).is_some() {
                return Err(Error::Structure(format!("duplicate manifest path {}", e.path)));
            }
        }
        let mut pairs: HashMap<&str, (usize, usize)> = HashMap::new();
        for e in &self.entries {
            if let Some(id) = &e.pair_id {
                let c = pairs.entry(id.as_str()).or_default();
                match e.label {
                    Label::Real => c.0 += 1,
                    Label::Fake => c.1 += 1,
                }
            }
        }
        let mut ids: Vec<_> = pairs.into_iter().collect();
        ids.sort();
        for (id, (r, f)) in ids {
            if r != 1 || f == 0 {
                return Err(Error::Structure(format!(
                    "pair_id {id} has {r} real and {f} fake entries; need exactly 1 real and at least 1 fake"
                )));
            }
        }
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let entries: Vec<ManifestEntry> = serde_json::from_str(&text)?;
        let m = Manifest {
            entries,
            base: path.parent().map(Path::to_path_buf).unwrap_or_default(),
        };
        m.validate()?;
        Ok(m)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let text = serde_json::to_string_pretty(&self.entries)?;
        let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
        f.write_all(text.as_bytes()).and_then(|_| f.write_all(b"\n")).map_err(|e| Error::io(path, e))
    }

    pub fn resolve(&self, entry: &ManifestEntry) -> PathBuf {
        let p = Path::new(&entry.path);
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base.join(p)
        }
    }

    /// Real entry sharing `pair_id` with the given fake, if any.
    pub fn paired_real(&self, fake: &ManifestEntry) -> Option<&ManifestEntry> {
        let id = fake.pair_id.as_ref()?;
        self.entries
            .iter()
            .find(|e| e.label == Label::Real && e.pair_id.as_ref() == Some(id))
    }
}
