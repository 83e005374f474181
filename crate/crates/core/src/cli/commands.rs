use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::analysis::{
    band_decode, consistency_series, cumulative_effect, default_bands, fd_lite, frequency_edit, high_frequency_bands,
    lower_left_half, region_from_image, EditBands, EditSpec,
};
use crate::error::{HkdError, Result};
use crate::koopman::SpectralBand;
use crate::netarch::Hkd;
use crate::numcore::Tensor;
use crate::persist::{
    ce_csv, metrics_csv, read_checkpoint, read_dataset, spectra_csv, write_checkpoint, write_contact_sheet, write_dataset,
    write_text, Checkpoint,
};
use crate::teacher::{generate_dataset, GmmSpec};
use crate::trainer::{draw_prior, one_step_sample, predict_from_noise, train, IterationInfo, TrainHooks};

use super::config::RunConfig;

/// Environment variable capping the worker-thread count.
pub const THREADS_ENV: &str = "HKD_THREADS";

#[derive(Parser, Debug)]
#[command(name = "hkd", version, about = "Hierarchical Koopman diffusion lab")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Integrate teacher trajectories and write an HKDT dataset
    GenData(GenDataArgs),
    /// Train a model on a dataset and write an HKDC checkpoint
    Train(TrainArgs),
    /// One-step samples as a contact sheet
    Sample(SampleArgs),
    /// Koopman eigenvalues of every level, block and location as CSV
    AnalyzeSpectrum(SpectrumArgs),
    /// Decode samples keeping one spectral band per level
    BandDecode(BandDecodeArgs),
    /// Cumulative effect of spectral bands along the trajectory
    Ce(CeArgs),
    /// Mix reference latents into samples
    Edit(EditArgs),
    /// Reconstructions from every stored state of dataset trajectories
    Consistency(ConsistencyArgs),
    /// FD-lite between one-step samples and teacher samples
    Eval(EvalArgs),
}

#[derive(Args, Debug)]
pub struct GenDataArgs {
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Trajectory sampling seed
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Args, Debug)]
pub struct TrainArgs {
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long)]
    pub data: PathBuf,
    /// Checkpoint path; metrics go to `<out>.metrics.csv`
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct CkptOut {
    #[arg(long)]
    pub ckpt: PathBuf,
    /// Output directory
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct SampleArgs {
    #[command(flatten)]
    pub io: CkptOut,
    #[arg(long, default_value_t = 16)]
    pub n: usize,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
}

#[derive(Args, Debug)]
pub struct SpectrumArgs {
    #[command(flatten)]
    pub io: CkptOut,
}

#[derive(Args, Debug)]
pub struct BandDecodeArgs {
    #[command(flatten)]
    pub io: CkptOut,
    #[arg(long, default_value_t = 8)]
    pub n: usize,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Bands per level [default: analysis.bands]
    #[arg(long)]
    pub bands: Option<usize>,
}

#[derive(Args, Debug)]
pub struct CeArgs {
    #[command(flatten)]
    pub io: CkptOut,
    #[arg(long, default_value_t = 8)]
    pub n: usize,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Bands per level [default: analysis.bands]
    #[arg(long)]
    pub bands: Option<usize>,
    /// Evaluation times from T to epsilon [default: analysis.ce_points]
    #[arg(long)]
    pub points: Option<usize>,
}

#[derive(Args, Debug)]
pub struct EditArgs {
    #[command(flatten)]
    pub io: CkptOut,
    #[arg(long, default_value_t = 16)]
    pub n: usize,
    /// Seed of the images being edited
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Seed of the reference images
    #[arg(long, default_value_t = 2)]
    pub ref_seed: u64,
    /// Mixing ratio in [0, 1] [default: analysis.ratio]
    #[arg(long)]
    pub ratio: Option<f64>,
    /// `high` or `all` [default: analysis.edit_band]
    #[arg(long)]
    pub band: Option<String>,
    /// `lower-left`, `full` or a mask file of 0/1 rows [default: analysis.region]
    #[arg(long)]
    pub region: Option<String>,
    /// Intervention time [default: analysis.t_edit]
    #[arg(long)]
    pub t_edit: Option<f64>,
}

#[derive(Args, Debug)]
pub struct ConsistencyArgs {
    #[command(flatten)]
    pub io: CkptOut,
    #[arg(long)]
    pub data: PathBuf,
    /// First trajectory index
    #[arg(long, default_value_t = 0)]
    pub traj: usize,
    /// Number of trajectories
    #[arg(long, default_value_t = 4)]
    pub count: usize,
}

#[derive(Args, Debug)]
pub struct EvalArgs {
    #[command(flatten)]
    pub io: CkptOut,
    #[arg(long, default_value_t = 1024)]
    pub n: usize,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Seed of the teacher reference set
    #[arg(long, default_value_t = 1000)]
    pub teacher_seed: u64,
    /// Also report FD-lite between two independent teacher sets
    #[arg(long)]
    pub self_noise: bool,
}

/// Parses arguments, runs the subcommand and returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match configure_threads().and_then(|_| run(cli.command)) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn configure_threads() -> Result<()> {
    let Ok(v) = std::env::var(THREADS_ENV) else {
        return Ok(());
    };
    let n: usize = v
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| HkdError::Config(format!("{THREADS_ENV} must be a positive integer, got `{v}`")))?;
    // a pool may already exist when called twice in one process
    let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    Ok(())
}

pub fn run(command: Command) -> Result<()> {
    match command {
        Command::GenData(a) => gen_data(a),
        Command::Train(a) => train_cmd(a),
        Command::Sample(a) => sample(a),
        Command::AnalyzeSpectrum(a) => spectrum(a),
        Command::BandDecode(a) => band_decode_cmd(a),
        Command::Ce(a) => ce(a),
        Command::Edit(a) => edit(a),
        Command::Consistency(a) => consistency(a),
        Command::Eval(a) => eval(a),
    }
}

fn gen_data(a: GenDataArgs) -> Result<()> {
    let cfg = RunConfig::from_file(&a.config)?;
    let model = cfg.model()?;
    let t = cfg.teacher()?;
    let gmm = t.gmm(model.image_shape())?;
    let ds = generate_dataset(&gmm, &t.schedule, t.n_traj, t.n_grid, t.steps_per_grid, a.seed)?;
    write_dataset(&a.out, &ds)?;
    println!(
        "wrote {}: n_traj={} grid={} shape={:?} schedule=VE sigma(t)=t eps={} T={}",
        a.out.display(),
        ds.n_traj(),
        ds.n_grid(),
        ds.image_shape(),
        ds.epsilon,
        ds.horizon
    );
    Ok(())
}

/// Logs progress to stderr and rewrites the checkpoint after every epoch.
struct Progress<'a> {
    interval: usize,
    config: &'a RunConfig,
    out: &'a Path,
}

impl TrainHooks for Progress<'_> {
    fn on_iteration(&mut self, info: &IterationInfo<'_>) -> Result<()> {
        let r = &info.row;
        if r.iter.is_multiple_of(self.interval) {
            eprintln!("iter {} epoch {} loss {:.5} mse {:.5} feat {:.5}", r.iter, r.epoch, r.loss_total, r.loss_mse, r.loss_feat);
        }
        Ok(())
    }

    fn on_epoch(&mut self, epoch: usize, model: &Hkd<f32>) -> Result<()> {
        write_checkpoint(self.out, self.config, model)?;
        eprintln!("epoch {epoch} checkpoint {}", self.out.display());
        Ok(())
    }
}

fn metrics_path(ckpt: &Path) -> PathBuf {
    let mut s = ckpt.as_os_str().to_owned();
    s.push(".metrics.csv");
    PathBuf::from(s)
}

fn train_cmd(a: TrainArgs) -> Result<()> {
    let cfg = RunConfig::from_file(&a.config)?;
    let model = Hkd::<f32>::new(cfg.model()?)?;
    let tc = cfg.train()?;
    let ds = read_dataset(&a.data)?;
    let mut hooks = Progress { interval: tc.log_interval, config: &cfg, out: &a.out };
    let outcome = train(&model, &tc, &ds, &mut hooks)?;
    write_checkpoint(&a.out, &cfg, &outcome.model)?;
    let metrics = metrics_path(&a.out);
    write_text(&metrics, &metrics_csv(&outcome.metrics))?;
    println!("wrote {} ({} iterations)", a.out.display(), outcome.iterations);
    println!("wrote {}", metrics.display());
    Ok(())
}

struct Loaded {
    ckpt: Checkpoint,
    gmm: GmmSpec,
    cols: usize,
}

fn load(io: &CkptOut) -> Result<Loaded> {
    let ckpt = read_checkpoint(&io.ckpt)?;
    let gmm = ckpt.config.teacher()?.gmm(ckpt.model.config.image_shape())?;
    let cols = ckpt.config.analysis()?.sheet_cols;
    std::fs::create_dir_all(&io.out)?;
    Ok(Loaded { ckpt, gmm, cols })
}

fn positive(n: usize, what: &str) -> Result<()> {
    if n == 0 {
        return Err(HkdError::InvalidArgument(format!("{what} must be positive")));
    }
    Ok(())
}

fn sheet(out: &Path, name: &str, images: &Tensor<f32>, cols: usize) -> Result<()> {
    let path = out.join(name);
    write_contact_sheet(&path, images, cols)?;
    println!("{}", path.display());
    Ok(())
}

fn text(out: &Path, name: &str, body: &str) -> Result<()> {
    let path = out.join(name);
    write_text(&path, body)?;
    println!("{}", path.display());
    Ok(())
}

fn sample(a: SampleArgs) -> Result<()> {
    positive(a.n, "--n")?;
    let l = load(&a.io)?;
    let x = one_step_sample(&l.ckpt.model, &l.gmm, a.n, a.seed)?;
    sheet(&a.io.out, "samples.png", &x, l.cols)
}

fn spectrum(a: SpectrumArgs) -> Result<()> {
    let l = load(&a.io)?;
    text(&a.io.out, "spectra.csv", &spectra_csv(&l.ckpt.model)?)
}

fn band_decode_cmd(a: BandDecodeArgs) -> Result<()> {
    positive(a.n, "--n")?;
    let l = load(&a.io)?;
    let model = &l.ckpt.model;
    let parts = a.bands.unwrap_or(l.ckpt.config.analysis()?.bands);
    positive(parts, "--bands")?;
    let x = draw_prior(model, &l.gmm, a.n, a.seed);
    sheet(&a.io.out, "full.png", &predict_from_noise(model, &x)?, l.cols)?;
    for b in 0..parts {
        let bands: Vec<SpectralBand> = (1..=model.config.levels)
            .map(|lv| {
                let blocks = model.config.latent_channels[lv - 1] / 2;
                SpectralBand::new(lv, b * blocks / parts, (b + 1) * blocks / parts)
            })
            .collect();
        let img = crate::trainer::map_chunks(&x, |c| band_decode(model, c, &bands))?;
        sheet(&a.io.out, &format!("band_{b}.png"), &img, l.cols)?;
    }
    Ok(())
}

fn ce(a: CeArgs) -> Result<()> {
    positive(a.n, "--n")?;
    let l = load(&a.io)?;
    let model = &l.ckpt.model;
    let an = l.ckpt.config.analysis()?;
    let parts = a.bands.unwrap_or(an.bands);
    positive(parts, "--bands")?;
    let points = a.points.unwrap_or(an.ce_points);
    let times = l.ckpt.config.schedule()?.grid(points)?;
    let x = draw_prior(model, &l.gmm, a.n, a.seed);
    let report = cumulative_effect(model, &x, &default_bands(model, parts), &times)?;
    text(&a.io.out, "ce.csv", &ce_csv(&report))
}

/// Reads a mask file: one line per image row of `0`/`1` characters.
pub fn read_mask_file(path: &Path, size: usize) -> Result<Vec<bool>> {
    let body = std::fs::read_to_string(path)?;
    let rows: Vec<&str> = body.lines().map(str::trim).filter(|l| !l.is_empty()).collect();
    let mut mask = Vec::with_capacity(size * size);
    for row in &rows {
        for ch in row.chars().filter(|c| !c.is_whitespace()) {
            match ch {
                '0' => mask.push(false),
                '1' => mask.push(true),
                other => return Err(HkdError::InvalidArgument(format!("mask file contains `{other}`"))),
            }
        }
    }
    if rows.len() != size || mask.len() != size * size {
        return Err(HkdError::InvalidArgument(format!(
            "mask is {} rows / {} cells, image is {size}x{size}",
            rows.len(),
            mask.len()
        )));
    }
    Ok(mask)
}

fn edit(a: EditArgs) -> Result<()> {
    positive(a.n, "--n")?;
    let l = load(&a.io)?;
    let model = &l.ckpt.model;
    let cfg = &model.config;
    let an = l.ckpt.config.analysis()?;
    let mut spec = EditSpec::new(cfg, a.ratio.unwrap_or(an.ratio));
    if let Some(t) = a.t_edit.or(an.t_edit) {
        spec.t_edit = t;
    }
    spec.bands = match a.band.as_deref().unwrap_or(&an.edit_band) {
        "all" => EditBands::All,
        "high" => EditBands::PerLevel(high_frequency_bands(cfg)),
        other => return Err(HkdError::InvalidArgument(format!("unknown band selection `{other}`"))),
    };
    let image_mask = match a.region.as_deref().unwrap_or(&an.region) {
        "full" => vec![true; cfg.image_size * cfg.image_size],
        "lower-left" => lower_left_half(cfg.image_size),
        path => read_mask_file(Path::new(path), cfg.image_size)?,
    };
    spec.region = region_from_image(cfg, &image_mask)?;
    spec.validate(cfg)?;
    let orig = draw_prior(model, &l.gmm, a.n, a.seed);
    let reference = draw_prior(model, &l.gmm, a.n, a.ref_seed);
    sheet(&a.io.out, "edit.png", &frequency_edit(model, &orig, &reference, &spec)?, l.cols)
}

fn consistency(a: ConsistencyArgs) -> Result<()> {
    positive(a.count, "--count")?;
    let l = load(&a.io)?;
    let model = &l.ckpt.model;
    let ds = read_dataset(&a.data)?;
    crate::trainer::check_compatible(model, &ds)?;
    if a.traj + a.count > ds.n_traj() {
        return Err(HkdError::InvalidArgument(format!(
            "trajectories {}..{} requested, dataset has {}",
            a.traj,
            a.traj + a.count,
            ds.n_traj()
        )));
    }
    let times: Vec<f64> = ds.times.iter().map(|&t| t as f64).collect();
    let last = ds.n_grid() - 1;
    let mut tiles = Vec::new();
    let mut csv = String::from("traj,time,mse\n");
    for n in a.traj..a.traj + a.count {
        let idx: Vec<usize> = vec![n; ds.n_grid()];
        let grids: Vec<usize> = (0..ds.n_grid()).collect();
        let states = ds.gather(&idx, &grids)?;
        let target = ds.gather(&[n], &[last])?;
        for (t, img) in consistency_series(model, &times, &states)? {
            let mse = img.sub(&target)?.sq_norm() / img.numel() as f64;
            csv.push_str(&format!("{n},{t:e},{mse:e}\n"));
            tiles.push(img);
        }
    }
    sheet(&a.io.out, "consistency.png", &Tensor::stack(&tiles)?, ds.n_grid())?;
    text(&a.io.out, "consistency.csv", &csv)
}

fn eval(a: EvalArgs) -> Result<()> {
    if a.n < 2 {
        return Err(HkdError::InvalidArgument("--n must be at least 2".into()));
    }
    let l = load(&a.io)?;
    let model = &l.ckpt.model;
    let extractor = l.ckpt.config.train()?.extractor(model.config.image_channels);
    let eps = model.config.epsilon;
    let teacher = |seed: u64| -> Tensor<f32> { l.gmm.sample(a.n, eps, &mut ChaCha8Rng::seed_from_u64(seed)).cast() };
    let samples = one_step_sample(model, &l.gmm, a.n, a.seed)?;
    let fd = fd_lite(&extractor, &samples, &teacher(a.teacher_seed))?;
    println!("fd_lite {fd:.6e}");
    let mut csv = format!("metric,value\nfd_lite,{fd:e}\n");
    if a.self_noise {
        let noise = fd_lite(&extractor, &teacher(a.teacher_seed), &teacher(a.teacher_seed.wrapping_add(1)))?;
        println!("teacher_self {noise:.6e}");
        csv.push_str(&format!("teacher_self,{noise:e}\n"));
    }
    text(&a.io.out, "eval.csv", &csv)
}
