//! `latprobe`: synthesize stimuli, fit latent PCA, run channel ablations and
//! render reconstruction grids.
//!
//! Exit codes: 0 success, 2 invalid arguments, 3 missing artifacts (the ids
//! are listed on stderr), 4 data or validation errors, 1 anything else.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use latent_probe::codec::CodecKind;
use latent_probe::pipeline::{
    cmd_ablate, cmd_grid, cmd_pca, cmd_synth, BandSelection, RunConfig, SynthKind, DEFAULT_SIDE,
};
use latent_probe::stimuli::{default_shape_scales, Polarity, ShapeKind, Waveform};
use latent_probe::{Error, Result};

#[derive(Parser, Debug)]
#[command(
    name = "latprobe",
    version,
    about = "Probe how a 4-channel image latent encodes color and shape"
)]
struct Cli {
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    #[arg(long, global = true, default_value = "reference")]
    codec: CodecKind,

    /// Write into a non-empty output directory.
    #[arg(long, global = true)]
    force: bool,

    /// Worker threads (0 = one per core).
    #[arg(long, global = true, env = "LPT_THREADS", default_value_t = 0)]
    threads: usize,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Synthesize a stimulus dataset.
    Synth {
        #[command(subcommand)]
        kind: SynthCommand,
    },
    /// PCA of spatially averaged latents, scatter data and correlations.
    Pca {
        #[arg(long)]
        dataset: PathBuf,
    },
    /// Decode every channel mask and tabulate SSIM, PSNR and MSE.
    Ablate {
        #[arg(long)]
        dataset: PathBuf,
        /// all, low, high, or split (low and high as two tables).
        #[arg(long, default_value = "all")]
        band: BandSelection,
    },
    /// Reconstruction grid for a single image.
    Grid {
        /// Image as `.lpt` tensor or PNG.
        #[arg(long)]
        image: PathBuf,
        /// `pca.json` written by `pca`.
        #[arg(long)]
        pca: PathBuf,
    },
}

#[derive(Args, Debug)]
struct SynthCommon {
    /// Image side in pixels (multiple of 8).
    #[arg(long, default_value_t = DEFAULT_SIDE)]
    side: usize,

    /// Also write 8-bit PNG previews under `png/`.
    #[arg(long)]
    png: bool,
}

#[derive(Subcommand, Debug)]
enum SynthCommand {
    /// Uniform color grid.
    Colors {
        #[arg(long, default_value_t = 12)]
        hues: usize,
        #[arg(long, default_value_t = 6)]
        sats: usize,
        #[arg(long, default_value_t = 5)]
        vals: usize,
        #[command(flatten)]
        common: SynthCommon,
    },
    /// Single hue wheel.
    Wheel {
        #[arg(long, default_value_t = 1.0)]
        value: f64,
        #[command(flatten)]
        common: SynthCommon,
    },
    /// Gray shapes in both polarities.
    Shapes {
        #[arg(
            long,
            value_delimiter = ',',
            default_value = "disc,square,triangle,annulus"
        )]
        kinds: Vec<ShapeKind>,
        /// Shape diameters as fractions of the side.
        #[arg(long, value_delimiter = ',')]
        scales: Option<Vec<f64>>,
        #[command(flatten)]
        common: SynthCommon,
    },
    /// Sine and square gratings.
    Gratings {
        /// Cycles per image.
        #[arg(long, value_delimiter = ',', default_value = "1,2,4,8,16,32")]
        freqs: Vec<f64>,
        /// Degrees.
        #[arg(long, value_delimiter = ',', default_value = "0,45,90,135")]
        orients: Vec<f64>,
        #[arg(long, value_delimiter = ',', default_value = "sine,square")]
        waveforms: Vec<Waveform>,
        #[command(flatten)]
        common: SynthCommon,
    },
}

fn run(cli: Cli) -> Result<()> {
    let out = cli
        .out
        .ok_or_else(|| Error::InvalidArgument("--out is required".into()))?;
    let cfg = RunConfig {
        codec: cli.codec,
        out_dir: out,
        force: cli.force,
        threads: cli.threads,
    };
    match cli.command {
        Command::Synth { kind } => {
            let (kind, common) = match kind {
                SynthCommand::Colors {
                    hues,
                    sats,
                    vals,
                    common,
                } => (SynthKind::Colors { hues, sats, vals }, common),
                SynthCommand::Wheel { value, common } => (SynthKind::Wheel { value }, common),
                SynthCommand::Shapes {
                    kinds,
                    scales,
                    common,
                } => (
                    SynthKind::Shapes {
                        kinds,
                        scales: scales.unwrap_or_else(default_shape_scales),
                        polarities: Polarity::ALL.to_vec(),
                    },
                    common,
                ),
                SynthCommand::Gratings {
                    freqs,
                    orients,
                    waveforms,
                    common,
                } => (
                    SynthKind::Gratings {
                        frequencies: freqs,
                        orientations: orients,
                        waveforms,
                    },
                    common,
                ),
            };
            let ds = cmd_synth(&kind, common.side, common.png, &cfg)?;
            println!(
                "wrote {} images to {}",
                ds.entries().len(),
                cfg.out_dir.display()
            );
        }
        Command::Pca { dataset } => {
            let report = cmd_pca(&dataset, &cfg)?;
            let explained: Vec<String> = report
                .pca
                .explained
                .iter()
                .map(|e| format!("{e:.6}"))
                .collect();
            println!("explained variance: {}", explained.join(" "));
            for row in &report.correlations {
                println!("{}: {:.6} (n = {})", row.metric, row.value, row.n);
            }
        }
        Command::Ablate { dataset, band } => {
            for rows in cmd_ablate(&dataset, band, &cfg)? {
                println!(
                    "band {}: {} images, 16 masks",
                    rows[0].band, rows[0].n_images
                );
            }
        }
        Command::Grid { image, pca } => {
            let cells = cmd_grid(&image, &pca, &cfg)?;
            println!("wrote {} cells to {}", cells.len(), cfg.out_dir.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    log::info!("{cli:?}");
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
