use std::path::PathBuf;

use anyhow::bail;
use muscap_core::caption::{format_sections, MarkerStyle};
use muscap_core::dataset::{write_jsonl, Genre};
use muscap_core::featurize::{band_centers_hz, write_wav_i16};
use muscap_core::rng::SplitMix64;
use serde::Serialize;

use crate::config::Config;

/// Each word owns one mel band; a clip's audio holds the tones of the two
/// words its caption mentions.
const WORDS: [&str; 16] = [
    "sunrise", "midnight", "rain", "highway", "ocean", "autumn", "winter", "festival", "campfire", "library",
    "neon", "forest", "desert", "harbor", "rooftop", "garden",
];
const SAMPLE_RATE: u32 = 16_000;
const MEL_BANDS: usize = 64;
const CLIP_SECONDS: f64 = 2.0;

#[derive(clap::Args)]
pub struct Args {
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
    /// Number of clips (at most 120).
    #[arg(long, default_value_t = 64)]
    count: usize,
}

#[derive(Serialize)]
struct ManifestRow<'a> {
    youtube_id: &'a str,
    genre: Genre,
}

fn word_frequencies() -> Vec<f64> {
    let centers = band_centers_hz(SAMPLE_RATE, MEL_BANDS);
    (0..WORDS.len()).map(|i| centers[8 + 3 * i]).collect()
}

fn config_toml(seed: u64) -> String {
    format!(
        r#"seed = {seed}

[paths]
dataset = "dataset.jsonl"
audio_dir = "audio"
features_dir = "features"
checkpoint_dir = "checkpoints"
logs_dir = "logs"

[text_features]
dim = 256

[audio_features]
sample_rate = {SAMPLE_RATE}
mel_bands = {MEL_BANDS}
clip_seconds = {CLIP_SECONDS:.1}

[train]
epochs = 150
batch_size = 16
learning_rate = 0.01
embed_dim = 32
hidden_dim = 0
"#
    )
}

pub fn run(args: Args, cfg: &Config) -> anyhow::Result<()> {
    let pairs: Vec<(usize, usize)> =
        (0..WORDS.len()).flat_map(|a| (a + 1..WORDS.len()).map(move |b| (a, b))).collect();
    if args.count < 2 || args.count > pairs.len() {
        bail!("--count must be between 2 and {}", pairs.len());
    }
    let mut rng = SplitMix64::for_subsystem(cfg.seed, "synth");
    let chosen: Vec<(usize, usize)> = rng.sample_indices(pairs.len(), args.count).into_iter().map(|i| pairs[i]).collect();
    let freqs = word_frequencies();
    let audio_dir = args.out.join("audio");
    let replies_dir = args.out.join("replies");
    super::ensure_dir(&audio_dir)?;
    super::ensure_dir(&replies_dir)?;

    let ids: Vec<String> = (0..args.count).map(|i| format!("synth{i:06}")).collect();
    let mut manifest = Vec::with_capacity(args.count);
    let n = (CLIP_SECONDS * f64::from(SAMPLE_RATE)) as usize;
    for (i, (&(a, b), id)) in chosen.iter().zip(&ids).enumerate() {
        manifest.push(ManifestRow {
            youtube_id: id,
            genre: Genre::ALL[i % Genre::ALL.len()],
        });
        let sections = [
            format!("A photo evoking {} and {}.", WORDS[a], WORDS[b]),
            format!("Suited to moments of {}.", WORDS[a]),
            format!("Fits {} time.", WORDS[b]),
            "Calm and reflective.".to_string(),
            format!("A {} and {} mood piece.", WORDS[a], WORDS[b]),
        ];
        std::fs::write(replies_dir.join(format!("{id}.txt")), format_sections(&sections, MarkerStyle::Dot) + "\n")?;
        let phase = rng.next_f64() * std::f64::consts::TAU;
        let samples: Vec<f32> = (0..n)
            .map(|t| {
                let t = t as f64 / f64::from(SAMPLE_RATE);
                let x = (std::f64::consts::TAU * freqs[a] * t).sin() + (std::f64::consts::TAU * freqs[b] * t + phase).sin();
                (0.4 * x) as f32
            })
            .collect();
        write_wav_i16(&audio_dir.join(format!("{id}.wav")), &samples, SAMPLE_RATE)?;
    }
    write_jsonl(&args.out.join("manifest.jsonl"), &manifest)?;
    std::fs::write(args.out.join("muscap.toml"), config_toml(cfg.seed))?;
    tracing::info!(clips = args.count, out = %args.out.display(), "synthetic dataset written");
    Ok(())
}
