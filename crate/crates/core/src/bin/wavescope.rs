use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use sha2::{Digest, Sha256};

use wavescope::detector::{self, LogisticModel, TrainConfig, TrainOptions};
use wavescope::experiment::{run_experiment, ExperimentConfig};
use wavescope::metrics;
use wavescope::simulate::{self, ClipFormat, DatasetSpec, Style, ToyCodec};
use wavescope::spectral::{self, DenoiserSpec, Grid};
use wavescope::video_io::{self, Clip, Manifest};
use wavescope::wavelet;
use wavescope::waverep::{self, Augment, Granularity};
use wavescope::{Error, Result};

/// Wavelet-band forensics for autoencoded video: transforms, WaveRep
/// augmentation, residual spectra, simulation, detection and evaluation.
#[derive(Parser)]
#[command(name = "wavescope", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Forward wavelet transform of every frame into a band directory.
    Fswt {
        input: PathBuf,
        #[arg(long, default_value_t = 3)]
        levels: u32,
        #[arg(long)]
        out: PathBuf,
    },
    /// Rebuild a clip from a band directory written by `fswt`.
    Ifswt {
        dir: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Replace subbands of a fake clip with its real counterpart's.
    Waverep(WaverepArgs),
    /// Residual power spectra of the clips in a manifest.
    Spectrum {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long, default_value = "gaussian:0.8")]
        denoiser: String,
        /// Restrict to one label.
        #[arg(long, value_parser = ["real", "fake"])]
        label: Option<String>,
        #[arg(long, default_value_t = 3)]
        levels: u32,
        #[arg(long, default_value_t = 1e-12)]
        log_eps: f64,
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Per-frequency reconstruction distance between paired clips.
    Distance {
        #[arg(long, num_args = 1.., required = true)]
        real: Vec<PathBuf>,
        #[arg(long, num_args = 1.., required = true)]
        recon: Vec<PathBuf>,
        #[arg(long, default_value_t = 1e-12)]
        log_eps: f64,
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Synthetic data generation.
    #[command(subcommand)]
    Simulate(SimulateCommand),
    /// Compress one clip with the toy codec or an external encoder.
    Compress(CompressArgs),
    /// Train a logistic detector from a manifest.
    Train(TrainArgs),
    /// Score every clip in a manifest.
    Score {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Metric report from a score CSV.
    Eval {
        #[arg(long)]
        scores: PathBuf,
        #[arg(long, default_value_t = 10)]
        bins: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Inject a fake clip's diagonal mid/high bands into a real clip.
    Attack {
        #[arg(long)]
        real: PathBuf,
        #[arg(long)]
        fake: PathBuf,
        #[arg(long, default_value_t = 3)]
        levels: u32,
        #[arg(long)]
        out: PathBuf,
    },
    /// End-to-end experiment from a TOML config.
    Run {
        #[arg(long)]
        config: Option<PathBuf>,
        /// Overrides `out_dir` from the config.
        #[arg(long)]
        out_dir: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
    },
}

#[derive(Args)]
struct WaverepArgs {
    #[arg(long)]
    fake: PathBuf,
    #[arg(long)]
    real: PathBuf,
    /// `default`, `all`, `none` or a JSON file of (L+1)x(L+1) booleans.
    #[arg(long, default_value = "default", conflicts_with = "p")]
    mask: String,
    /// Stochastic augmentation: replace with probability p using a random variant.
    #[arg(long)]
    p: Option<f64>,
    #[arg(long, default_value_t = 7)]
    seed: u64,
    #[arg(long, requires = "p")]
    per_clip: bool,
    /// Per-frame variant log (CSV `frame,variant`).
    #[arg(long, requires = "p")]
    log: Option<PathBuf>,
    #[arg(long, default_value_t = 3)]
    levels: u32,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Subcommand)]
enum SimulateCommand {
    /// Write real clips, autoencoded fakes and a manifest.
    MakeDataset {
        #[arg(long, default_value_t = 100)]
        n_real: usize,
        #[arg(long, default_value_t = 100)]
        n_fake: usize,
        #[arg(long, default_value_t = 32)]
        frames: usize,
        #[arg(long, default_value_t = 64)]
        height: usize,
        #[arg(long, default_value_t = 64)]
        width: usize,
        #[arg(long, default_value = "textured")]
        style: Style,
        #[arg(long, default_value = "y4m")]
        format: ClipFormat,
        #[arg(long, default_value_t = 7)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Same as the top-level `compress`.
    Compress(CompressArgs),
}

#[derive(Args)]
struct CompressArgs {
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 0.1)]
    q: f64,
    #[arg(long, default_value_t = 8)]
    block: usize,
    /// Temporal smoothing λ in [0, 1).
    #[arg(long, default_value_t = 0.0)]
    lambda: f64,
    /// Use an external H.264 encoder at this CRF instead of the toy codec.
    #[arg(long)]
    crf: Option<u32>,
    #[arg(long, default_value = "ffmpeg", requires = "crf")]
    encoder: PathBuf,
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long)]
    manifest: PathBuf,
    #[arg(long, default_value = "none")]
    augment: Augment,
    #[arg(long)]
    per_clip: bool,
    #[arg(long, default_value_t = 3)]
    levels: u32,
    #[arg(long, default_value = "gaussian:0.8")]
    denoiser: String,
    #[arg(long, default_value_t = 0.5)]
    lr: f64,
    #[arg(long, default_value_t = 2000)]
    epochs: usize,
    #[arg(long, default_value_t = 1e-3)]
    l2: f64,
    #[arg(long, default_value_t = 7)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Serialize)]
struct Provenance<'a> {
    version: &'a str,
    config_hash: String,
    seed: Option<u64>,
}

/// `run.json` for commands that write a directory; the hash covers the argument list.
fn stamp(dir: &Path, seed: Option<u64>) -> Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let hash = Sha256::digest(args.join("\u{1f}").as_bytes()).iter().map(|b| format!("{b:02x}")).collect();
    let p = Provenance { version: env!("CARGO_PKG_VERSION"), config_hash: hash, seed };
    let path = dir.join("run.json");
    fs::write(&path, serde_json::to_string_pretty(&p)? + "\n").map_err(|e| Error::Io { path, source: e })
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::Io { path: dir.to_path_buf(), source: e })
}

fn write_grid(dir: &Path, name: &str, g: &Grid, log_eps: f64) -> Result<()> {
    video_io::save_tensor(&g.to_tensor(), dir.join(format!("{name}.wvt")))?;
    spectral::render_spectrum(g, dir.join(format!("{name}.pgm")), log_eps)
}

fn compress(a: &CompressArgs) -> Result<()> {
    let clip = video_io::load_clip(&a.input)?;
    let out = match a.crf {
        Some(crf) => simulate::external_encode(&clip, crf, &a.encoder)?,
        None => {
            if a.block == 0 {
                return Err(Error::Config("block size must be positive".into()));
            }
            let clip = video_io::center_crop(&clip, clip.height - clip.height % a.block, clip.width - clip.width % a.block)?;
            simulate::toy_compress(&clip, &ToyCodec { block: a.block, quant_step: a.q, temporal_smoothing: a.lambda })?
        }
    };
    video_io::save_clip(&out, &a.out)
}

fn load_all(paths: &[PathBuf]) -> Result<Vec<Clip>> {
    paths.iter().map(video_io::load_clip).collect()
}

fn dispatch(cmd: Command) -> Result<()> {
    match cmd {
        Command::Fswt { input, levels, out } => {
            let clip = detector::load_for_levels(&input, levels)?;
            let grids = (0..clip.frames)
                .map(|t| wavelet::fswt_forward(clip.frame(t), clip.height, clip.width, levels))
                .collect::<Result<Vec<_>>>()?;
            wavelet::save_grids(&out, &grids, clip.frame_rate)
        }
        Command::Ifswt { dir, out } => {
            let (grids, rate) = wavelet::load_grids(&dir)?;
            let (h, w) = (grids[0].height, grids[0].width);
            let mut data = Vec::with_capacity(grids.len() * h * w);
            for g in &grids {
                data.extend(wavelet::fswt_inverse(g)?);
            }
            let mut clip = Clip::new(grids.len(), h, w, data)?;
            clip.frame_rate = rate;
            video_io::save_clip(&clip, &out)
        }
        Command::Waverep(a) => {
            let fake = detector::load_for_levels(&a.fake, a.levels)?;
            let real = detector::load_for_levels(&a.real, a.levels)?;
            let out = match a.p {
                Some(p) => {
                    let g = if a.per_clip { Granularity::PerClip } else { Granularity::PerFrame };
                    let (clip, log) = waverep::augment_pair(&fake, &real, p, a.seed, a.levels, g)?;
                    if let Some(path) = &a.log {
                        log.write_csv(path)?;
                    }
                    clip
                }
                None => waverep::replace_clip(&fake, &real, &waverep::parse_mask(&a.mask, a.levels)?)?,
            };
            video_io::save_clip(&out, &a.out)
        }
        Command::Spectrum { manifest, denoiser, label, levels, log_eps, out_dir } => {
            let m = Manifest::load(&manifest)?;
            let den = denoiser.parse::<DenoiserSpec>()?.build()?;
            let clips = m
                .entries
                .iter()
                .filter(|e| label.as_deref().is_none_or(|l| serde_json::to_value(e.label).ok() == Some(l.into())))
                .map(|e| detector::load_for_levels(m.resolve(e), levels))
                .collect::<Result<Vec<_>>>()?;
            let s = spectral::residual_spectra(&clips, den.as_ref())?;
            create_dir(&out_dir)?;
            write_grid(&out_dir, "s_yx", &s.s_yx, log_eps)?;
            write_grid(&out_dir, "s_tx", &s.s_tx, log_eps)?;
            write_grid(&out_dir, "s_yt", &s.s_yt, log_eps)?;
            stamp(&out_dir, None)
        }
        Command::Distance { real, recon, log_eps, out_dir } => {
            let d = spectral::freq_distance(&load_all(&real)?, &load_all(&recon)?)?;
            if d.zero_denominator_cells > 0 {
                eprintln!("warning: {} cell(s) had zero real-signal energy and were set to 0", d.zero_denominator_cells);
            }
            create_dir(&out_dir)?;
            write_grid(&out_dir, "distance", &d.d, log_eps)?;
            stamp(&out_dir, None)
        }
        Command::Simulate(SimulateCommand::MakeDataset { n_real, n_fake, frames, height, width, style, format, seed, out }) => {
            let spec = DatasetSpec { n_real, n_fake, frames, height, width, style, seed, ..DatasetSpec::default() };
            simulate::make_dataset(&spec, &out, format)?;
            stamp(&out, Some(seed))
        }
        Command::Simulate(SimulateCommand::Compress(a)) | Command::Compress(a) => compress(&a),
        Command::Train(a) => {
            let m = Manifest::load(&a.manifest)?;
            let opts = TrainOptions {
                levels: a.levels,
                augment: a.augment,
                granularity: if a.per_clip { Granularity::PerClip } else { Granularity::PerFrame },
                denoiser: a.denoiser.parse()?,
                config: TrainConfig { lr: a.lr, epochs: a.epochs, l2: a.l2 },
                seed: a.seed,
            };
            let model = detector::train_manifest(&m, &opts)?;
            eprintln!("final training loss {:.6}", model.final_loss);
            model.save(&a.out)
        }
        Command::Score { model, manifest, out } => {
            let model = LogisticModel::load(&model)?;
            let scores = detector::score_manifest(&model, &Manifest::load(&manifest)?)?;
            detector::write_scores(&out, &scores)
        }
        Command::Eval { scores, bins, out } => {
            let report = metrics::evaluate(&detector::read_scores(&scores)?, bins)?;
            fs::write(&out, report.to_csv()).map_err(|e| Error::Io { path: out.clone(), source: e })
        }
        Command::Attack { real, fake, levels, out } => {
            let r = detector::load_for_levels(&real, levels)?;
            let f = detector::load_for_levels(&fake, levels)?;
            video_io::save_clip(&detector::band_swap_attack(&r, &f, levels)?, &out)
        }
        Command::Run { config, out_dir, seed } => {
            let mut cfg = match &config {
                Some(p) => ExperimentConfig::load(p)?,
                None => ExperimentConfig::default(),
            };
            if let Some(s) = seed {
                cfg.seed = s;
            }
            if let Some(d) = out_dir {
                cfg.out_dir = d;
            }
            let start = std::time::Instant::now();
            let out = run_experiment(&cfg, &cfg.out_dir.clone())?;
            for r in &out.summary.reports {
                println!("{:<10} {:<8} auc {:.3} bacc {:.3} pd@5 {:.3}", r.condition, r.model, r.metrics.auc, r.metrics.bacc, r.metrics.pd_at_5);
            }
            println!(
                "band-swap flip rate: none {:.3}, waverep {:.3} ({:.1}s, outputs in {})",
                out.summary.flip_rate_none,
                out.summary.flip_rate_waverep,
                start.elapsed().as_secs_f64(),
                cfg.out_dir.display()
            );
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if matches!(e, Error::Capability(_)) { 3 } else { 1 })
        }
    }
}
