//! Fully separable Haar wavelet transform (FSWT).
//!
//! Each axis gets its own complete multilevel decomposition, so band `(i, j)`
//! pairs vertical scale `i` with horizontal scale `j`. Along an axis, index 0 is
//! the approximation left after `L` low-pass splits and index `k >= 1` is the
//! detail band from level `L - k + 1`; frequency grows with the index.
//!
//! Arithmetic is `f64`; planes cross the API as `f32`.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::video_io::{self, Rational, Tensor};

pub const INV_SQRT2: f64 = std::f64::consts::FRAC_1_SQRT_2;

/// Analysis filters. `LOW` sums a pair, `HIGH` takes `b - a` of pair `(a, b)`.
pub const HAAR_LOW: [f64; 2] = [INV_SQRT2, INV_SQRT2];
pub const HAAR_HIGH: [f64; 2] = [-INV_SQRT2, INV_SQRT2];

#[derive(Debug, Clone, PartialEq)]
pub struct Band {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl Band {
    pub fn energy(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SubbandGrid {
    pub levels: u32,
    pub height: usize,
    pub width: usize,
    /// Row-major `(L+1) × (L+1)`.
    pub bands: Vec<Band>,
}

impl SubbandGrid {
    pub fn side(&self) -> usize {
        self.levels as usize + 1
    }

    pub fn band(&self, i: usize, j: usize) -> &Band {
        &self.bands[i * self.side() + j]
    }

    pub fn band_mut(&mut self, i: usize, j: usize) -> &mut Band {
        let s = self.side();
        &mut self.bands[i * s + j]
    }

    /// Check every band against the shape law for `(levels, height, width)`.
    pub fn validate(&self) -> Result<()> {
        check_dims(self.height, self.width, self.levels)?;
        if self.bands.len() != self.side() * self.side() {
            return Err(Error::Structure(format!(
                "grid has {} bands, expected {}",
                self.bands.len(),
                self.side() * self.side()
            )));
        }
        let rs = segments(self.height, self.levels);
        let cs = segments(self.width, self.levels);
        for i in 0..self.side() {
            for j in 0..self.side() {
                let b = self.band(i, j);
                let want = (rs[i].1, cs[j].1);
                if (b.rows, b.cols) != want || b.data.len() != want.0 * want.1 {
                    return Err(Error::Structure(format!(
                        "band ({i},{j}) is {}x{}, expected {}x{}",
                        b.rows, b.cols, want.0, want.1
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Number of samples along an axis at decomposition scale `s`.
pub fn band_len(n: usize, levels: u32, k: usize) -> usize {
    let s = if k == 0 { levels } else { levels - k as u32 + 1 };
    n >> s
}

/// `(start, len)` of every band along one axis in the in-place layout
/// `[approx | detail L | ... | detail 1]`.
fn segments(n: usize, levels: u32) -> Vec<(usize, usize)> {
    let mut out = vec![(0, n >> levels)];
    for k in 1..=levels as usize {
        let len = band_len(n, levels, k);
        out.push((len, len));
    }
    out
}

pub fn check_dims(height: usize, width: usize, levels: u32) -> Result<()> {
    if levels == 0 {
        return Err(Error::Dimension("levels must be at least 1".into()));
    }
    if levels >= usize::BITS {
        return Err(Error::Dimension(format!("levels {levels} is too large")));
    }
    let m = 1usize << levels;
    if height == 0 || height % m != 0 {
        return Err(Error::Dimension(format!("height {height} is not divisible by 2^{levels}")));
    }
    if width == 0 || width % m != 0 {
        return Err(Error::Dimension(format!("width {width} is not divisible by 2^{levels}")));
    }
    Ok(())
}

/// Multilevel 1D analysis of `n` samples spaced `stride` apart, in place.
fn analyze_line(buf: &mut [f64], base: usize, stride: usize, n: usize, levels: u32, tmp: &mut [f64], ops: &mut u64) {
    let mut len = n;
    for _ in 0..levels {
        let half = len / 2;
        for t in 0..half {
            let a = buf[base + 2 * t * stride];
            let b = buf[base + (2 * t + 1) * stride];
            tmp[t] = HAAR_LOW[0] * a + HAAR_LOW[1] * b;
            tmp[half + t] = HAAR_HIGH[0] * a + HAAR_HIGH[1] * b;
        }
        *ops += 4 * half as u64;
        for (t, v) in tmp[..len].iter().enumerate() {
            buf[base + t * stride] = *v;
        }
        len = half;
    }
}

/// Inverse of [`analyze_line`] using the transposed filters.
fn synthesize_line(buf: &mut [f64], base: usize, stride: usize, n: usize, levels: u32, tmp: &mut [f64]) {
    let mut len = n >> levels;
    for _ in 0..levels {
        for t in 0..len {
            let lo = buf[base + t * stride];
            let hi = buf[base + (len + t) * stride];
            tmp[2 * t] = HAAR_LOW[0] * lo + HAAR_HIGH[0] * hi;
            tmp[2 * t + 1] = HAAR_LOW[1] * lo + HAAR_HIGH[1] * hi;
        }
        for (t, v) in tmp[..2 * len].iter().enumerate() {
            buf[base + t * stride] = *v;
        }
        len *= 2;
    }
}

fn forward_in_place(buf: &mut [f64], h: usize, w: usize, levels: u32, ops: &mut u64) {
    let mut tmp = vec![0.0; h.max(w)];
    for r in 0..h {
        analyze_line(buf, r * w, 1, w, levels, &mut tmp, ops);
    }
    for c in 0..w {
        analyze_line(buf, c, w, h, levels, &mut tmp, ops);
    }
}

fn split_bands(buf: &[f64], h: usize, w: usize, levels: u32) -> SubbandGrid {
    let rs = segments(h, levels);
    let cs = segments(w, levels);
    let mut bands = Vec::with_capacity(rs.len() * cs.len());
    for &(r0, rn) in &rs {
        for &(c0, cn) in &cs {
            let mut data = Vec::with_capacity(rn * cn);
            for r in r0..r0 + rn {
                data.extend_from_slice(&buf[r * w + c0..r * w + c0 + cn]);
            }
            bands.push(Band { rows: rn, cols: cn, data });
        }
    }
    SubbandGrid { levels, height: h, width: w, bands }
}

pub fn fswt_forward_f64(plane: &[f64], height: usize, width: usize, levels: u32) -> Result<SubbandGrid> {
    fswt_forward_counted(plane, height, width, levels).map(|(g, _)| g)
}

/// Forward transform that also returns the number of multiply-adds performed.
pub fn fswt_forward_counted(
    plane: &[f64],
    height: usize,
    width: usize,
    levels: u32,
) -> Result<(SubbandGrid, u64)> {
    check_dims(height, width, levels)?;
    if plane.len() != height * width {
        return Err(Error::Dimension(format!(
            "plane has {} samples, expected {height}x{width}",
            plane.len()
        )));
    }
    let mut buf = plane.to_vec();
    let mut ops = 0;
    forward_in_place(&mut buf, height, width, levels, &mut ops);
    Ok((split_bands(&buf, height, width, levels), ops))
}

pub fn fswt_forward(plane: &[f32], height: usize, width: usize, levels: u32) -> Result<SubbandGrid> {
    let p: Vec<f64> = plane.iter().map(|&v| v as f64).collect();
    fswt_forward_f64(&p, height, width, levels)
}

pub fn fswt_inverse_f64(grid: &SubbandGrid) -> Result<Vec<f64>> {
    grid.validate()?;
    let (h, w, levels) = (grid.height, grid.width, grid.levels);
    let rs = segments(h, levels);
    let cs = segments(w, levels);
    let mut buf = vec![0.0; h * w];
    for (i, &(r0, rn)) in rs.iter().enumerate() {
        for (j, &(c0, cn)) in cs.iter().enumerate() {
            let b = grid.band(i, j);
            for r in 0..rn {
                buf[(r0 + r) * w + c0..(r0 + r) * w + c0 + cn].copy_from_slice(&b.data[r * cn..(r + 1) * cn]);
            }
        }
    }
    let mut tmp = vec![0.0; h.max(w)];
    for c in 0..w {
        synthesize_line(&mut buf, c, w, h, levels, &mut tmp);
    }
    for r in 0..h {
        synthesize_line(&mut buf, r * w, 1, w, levels, &mut tmp);
    }
    Ok(buf)
}

pub fn fswt_inverse(grid: &SubbandGrid) -> Result<Vec<f32>> {
    Ok(fswt_inverse_f64(grid)?.into_iter().map(|v| v as f32).collect())
}

/// Reference transform by direct summation against the Haar basis functions.
/// Slow; exists to cross-check [`fswt_forward`].
pub fn fswt_forward_naive(plane: &[f32], height: usize, width: usize, levels: u32) -> Result<SubbandGrid> {
    check_dims(height, width, levels)?;
    if plane.len() != height * width {
        return Err(Error::Dimension("plane size mismatch".into()));
    }
    // Band k at position a along an axis: support start, support length, and
    // the basis value at offset d inside the support.
    let support = |k: usize, a: usize| -> (usize, usize) {
        let scale = if k == 0 { levels } else { levels - k as u32 + 1 };
        let len = 1usize << scale;
        (a * len, len)
    };
    let basis = |k: usize, d: usize, len: usize| -> f64 {
        let amp = 1.0 / (len as f64).sqrt();
        if k == 0 || d >= len / 2 {
            amp
        } else {
            -amp
        }
    };
    let side = levels as usize + 1;
    let mut bands = Vec::with_capacity(side * side);
    for i in 0..side {
        let rows = band_len(height, levels, i);
        for j in 0..side {
            let cols = band_len(width, levels, j);
            let mut data = vec![0.0; rows * cols];
            for a in 0..rows {
                let (m0, mlen) = support(i, a);
                for b in 0..cols {
                    let (n0, nlen) = support(j, b);
                    let mut acc = 0.0f64;
                    for dm in 0..mlen {
                        let wm = basis(i, dm, mlen);
                        for dn in 0..nlen {
                            acc += plane[(m0 + dm) * width + n0 + dn] as f64 * wm * basis(j, dn, nlen);
                        }
                    }
                    data[a * cols + b] = acc;
                }
            }
            bands.push(Band { rows, cols, data });
        }
    }
    Ok(SubbandGrid { levels, height, width, bands })
}

/// `(L+1)²` matrix, row-major, of per-band coefficient energy.
pub fn band_energies(grid: &SubbandGrid) -> Vec<f64> {
    grid.bands.iter().map(Band::energy).collect()
}

/// Which bands a replacement takes from the real source.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BandMask {
    pub levels: u32,
    bits: Vec<bool>,
}

impl BandMask {
    pub fn from_fn(levels: u32, f: impl Fn(usize, usize) -> bool) -> Self {
        let s = levels as usize + 1;
        let bits = (0..s * s).map(|k| f(k / s, k % s)).collect();
        BandMask { levels, bits }
    }

    pub fn all(levels: u32) -> Self {
        Self::from_fn(levels, |_, _| true)
    }

    pub fn none(levels: u32) -> Self {
        Self::from_fn(levels, |_, _| false)
    }

    pub fn from_rows(rows: &[Vec<bool>]) -> Result<Self> {
        let s = rows.len();
        if s < 2 || rows.iter().any(|r| r.len() != s) {
            return Err(Error::Structure("mask must be a square array of side L+1 >= 2".into()));
        }
        Ok(BandMask { levels: s as u32 - 1, bits: rows.concat() })
    }

    pub fn to_rows(&self) -> Vec<Vec<bool>> {
        self.bits.chunks(self.side()).map(<[bool]>::to_vec).collect()
    }

    pub fn side(&self) -> usize {
        self.levels as usize + 1
    }

    pub fn get(&self, i: usize, j: usize) -> bool {
        self.bits[i * self.side() + j]
    }

    pub fn count(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct GridIndex {
    levels: u32,
    #[serde(rename = "H")]
    height: usize,
    #[serde(rename = "W")]
    width: usize,
    frames: usize,
    frame_rate: Rational,
    bands: Vec<BandFile>,
}

#[derive(Debug, Serialize, Deserialize)]
struct BandFile {
    i: usize,
    j: usize,
    file: String,
}

/// Write per-frame grids as one `WVT1` tensor per band (`frames × rows × cols`)
/// plus an `index.json`.
pub fn save_grids(dir: impl AsRef<Path>, grids: &[SubbandGrid], frame_rate: Rational) -> Result<()> {
    let dir = dir.as_ref();
    let first = grids.first().ok_or_else(|| Error::Structure("no grids to save".into()))?;
    for g in grids {
        g.validate()?;
        if (g.levels, g.height, g.width) != (first.levels, first.height, first.width) {
            return Err(Error::Structure("grids differ in shape".into()));
        }
    }
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let side = first.side();
    let mut files = Vec::new();
    for i in 0..side {
        for j in 0..side {
            let b = first.band(i, j);
            let mut data = Vec::with_capacity(grids.len() * b.data.len());
            for g in grids {
                data.extend(g.band(i, j).data.iter().map(|&v| v as f32));
            }
            let name = format!("band_{i}_{j}.wvt");
            video_io::save_tensor(&Tensor::new(vec![grids.len(), b.rows, b.cols], data)?, dir.join(&name))?;
            files.push(BandFile { i, j, file: name });
        }
    }
    let index = GridIndex {
        levels: first.levels,
        height: first.height,
        width: first.width,
        frames: grids.len(),
        frame_rate,
        bands: files,
    };
    let path = dir.join("index.json");
    fs::write(&path, serde_json::to_string_pretty(&index)?).map_err(|e| Error::io(&path, e))
}

pub fn load_grids(dir: impl AsRef<Path>) -> Result<(Vec<SubbandGrid>, Rational)> {
    let dir = dir.as_ref();
    let path = dir.join("index.json");
    let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    let index: GridIndex = serde_json::from_str(&text)?;
    check_dims(index.height, index.width, index.levels)?;
    let side = index.levels as usize + 1;
    if index.frames == 0 {
        return Err(Error::Structure("index lists zero frames".into()));
    }
    let empty = Band { rows: 0, cols: 0, data: vec![] };
    let mut grids = vec![
        SubbandGrid {
            levels: index.levels,
            height: index.height,
            width: index.width,
            bands: vec![empty; side * side],
        };
        index.frames
    ];
    let mut seen = vec![false; side * side];
    for bf in &index.bands {
        if bf.i >= side || bf.j >= side {
            return Err(Error::Structure(format!("band ({}, {}) out of range", bf.i, bf.j)));
        }
        let t = video_io::load_tensor(dir.join(&bf.file))?;
        let [frames, rows, cols] = t.dims[..] else {
            return Err(Error::Structure(format!("{} is not a rank-3 band tensor", bf.file)));
        };
        if frames != index.frames {
            return Err(Error::Structure(format!("{} has {frames} frames", bf.file)));
        }
        let n = rows * cols;
        for (f, g) in grids.iter_mut().enumerate() {
            let data = t.data[f * n..(f + 1) * n].iter().map(|&v| v as f64).collect();
            *g.band_mut(bf.i, bf.j) = Band { rows, cols, data };
        }
        seen[bf.i * side + bf.j] = true;
    }
    if seen.iter().any(|s| !s) {
        return Err(Error::Structure("index is missing bands".into()));
    }
    for g in &grids {
        g.validate()?;
    }
    Ok((grids, index.frame_rate))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ramp(h: usize, w: usize) -> Vec<f32> {
        (0..h * w).map(|k| ((k * 7919) % 97) as f32 / 97.0).collect()
    }

    #[test]
    fn kernels_are_orthonormal() {
        let dot = |a: [f64; 2], b: [f64; 2]| a[0] * b[0] + a[1] * b[1];
        assert!((dot(HAAR_LOW, HAAR_LOW) - 1.0).abs() < 1e-15);
        assert!((dot(HAAR_HIGH, HAAR_HIGH) - 1.0).abs() < 1e-15);
        assert!(dot(HAAR_LOW, HAAR_HIGH).abs() < 1e-15);
    }

    #[test]
    fn one_d_step() {
        let mut buf = [3.0, 5.0];
        let mut tmp = [0.0; 2];
        analyze_line(&mut buf, 0, 1, 2, 1, &mut tmp, &mut 0);
        assert!((buf[0] - 8.0 * INV_SQRT2).abs() < 1e-12);
        assert!((buf[1] - 2.0 * INV_SQRT2).abs() < 1e-12);
    }

    #[test]
    fn constant_2x2() {
        let g = fswt_forward(&[0.25; 4], 2, 2, 1).unwrap();
        assert!((g.band(0, 0).data[0] - 0.5).abs() < 1e-12);
        for (k, b) in g.bands.iter().enumerate().skip(1) {
            assert_eq!(b.data, vec![0.0], "band {k}");
        }
    }

    #[test]
    fn constant_8x8_three_levels() {
        let c = 0.3f32;
        let g = fswt_forward(&[c; 64], 8, 8, 3).unwrap();
        assert_eq!(g.bands.len(), 16);
        assert!((g.band(0, 0).data[0] - 8.0 * c as f64).abs() < 1e-6);
        assert!(g.bands[1..].iter().all(|b| b.data.iter().all(|&v| v.abs() < 1e-12)));
    }

    #[test]
    fn shape_law() {
        let g = fswt_forward(&ramp(32, 16), 32, 16, 3).unwrap();
        let s = |k: usize| if k == 0 { 3 } else { 3 - k as u32 + 1 };
        for i in 0..4 {
            for j in 0..4 {
                let b = g.band(i, j);
                assert_eq!((b.rows, b.cols), (32 >> s(i), 16 >> s(j)));
            }
        }
        let total: usize = g.bands.iter().map(|b| b.data.len()).sum();
        assert_eq!(total, 32 * 16);
    }

    #[test]
    fn non_divisible_names_axis() {
        match fswt_forward(&[0.0; 12 * 16], 12, 16, 3) {
            Err(Error::Dimension(m)) => assert!(m.contains("height")),
            other => panic!("{other:?}"),
        }
        match fswt_forward(&[0.0; 16 * 12], 16, 12, 3) {
            Err(Error::Dimension(m)) => assert!(m.contains("width")),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn inverse_of_constant_band() {
        let mut g = fswt_forward(&[0.0; 64], 8, 8, 3).unwrap();
        g.band_mut(0, 0).data[0] = 8.0 * 0.7;
        let p = fswt_inverse_f64(&g).unwrap();
        assert!(p.iter().all(|v| (v - 0.7).abs() < 1e-12));
    }

    #[test]
    fn unit_coefficient_has_unit_energy() {
        let mut g = fswt_forward(&[0.0; 64], 8, 8, 3).unwrap();
        g.band_mut(3, 3).data[5] = 1.0;
        let p = fswt_inverse_f64(&g).unwrap();
        assert!((p.iter().map(|v| v * v).sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn naive_matches_fast() {
        let x = ramp(16, 16);
        let a = fswt_forward(&x, 16, 16, 2).unwrap();
        let b = fswt_forward_naive(&x, 16, 16, 2).unwrap();
        for (p, q) in a.bands.iter().zip(&b.bands) {
            for (u, v) in p.data.iter().zip(&q.data) {
                assert!((u - v).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn naive_delta_parseval() {
        let mut x = [0.0f32; 16];
        x[0] = 1.0;
        let g = fswt_forward_naive(&x, 4, 4, 2).unwrap();
        assert!((band_energies(&g).iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn energies() {
        let g = fswt_forward(&[0.5; 64], 8, 8, 3).unwrap();
        let e = band_energies(&g);
        assert!((e[0] - 16.0).abs() < 1e-9);
        assert!(e[1..].iter().all(|&v| v < 1e-20));
        let z = fswt_forward(&[0.0; 64], 8, 8, 3).unwrap();
        assert!(band_energies(&z).iter().all(|&v| v == 0.0));
    }

    #[test]
    fn op_count_is_linear() {
        let mut prev = None;
        for n in [32usize, 64, 128, 256] {
            // Double the pixel count each step by doubling width only.
            let (_, ops) = fswt_forward_counted(&vec![0.0; 64 * n], 64, n, 3).unwrap();
            if let Some(p) = prev {
                let r = ops as f64 / p as f64;
                assert!((r - 2.0).abs() < 0.05, "ratio {r}");
            }
            prev = Some(ops);
        }
    }

    #[test]
    fn inconsistent_grid_is_structure_error() {
        let mut g = fswt_forward(&ramp(8, 8), 8, 8, 2).unwrap();
        g.band_mut(1, 2).data.pop();
        assert!(matches!(fswt_inverse(&g), Err(Error::Structure(_))));
    }

    #[test]
    fn masks() {
        let m = BandMask::from_fn(3, |i, j| i == 0 || j == 0);
        assert_eq!(m.count(), 7);
        assert_eq!(BandMask::from_rows(&m.to_rows()).unwrap(), m);
        assert!(BandMask::from_rows(&[vec![true], vec![true, false]]).is_err());
    }

    #[test]
    fn grid_directory_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let grids: Vec<_> = (0..3)
            .map(|t| {
                let x: Vec<f32> = ramp(16, 8).iter().map(|v| v * (t + 1) as f32).collect();
                fswt_forward(&x, 16, 8, 3).unwrap()
            })
            .collect();
        save_grids(dir.path(), &grids, Rational { num: 24, den: 1 }).unwrap();
        let (back, rate) = load_grids(dir.path()).unwrap();
        assert_eq!(rate, Rational { num: 24, den: 1 });
        assert_eq!(back.len(), 3);
        for (a, b) in grids.iter().zip(&back) {
            for (p, q) in a.bands.iter().zip(&b.bands) {
                for (u, v) in p.data.iter().zip(&q.data) {
                    assert_eq!(*u as f32, *v as f32);
                }
            }
        }
    }
}
