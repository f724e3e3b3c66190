use std::sync::Arc;

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use super::{FeatureError, FeatureVector};

/// Per-band summary statistics over frames.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BandStat {
    Mean,
    Std,
    /// Mean absolute frame-to-frame difference.
    DeltaMean,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AudioFeaturizerConfig {
    pub sample_rate: u32,
    pub window: usize,
    pub hop: usize,
    pub mel_bands: usize,
    pub clip_seconds: f64,
    pub stats: Vec<BandStat>,
}

impl Default for AudioFeaturizerConfig {
    fn default() -> Self {
        Self {
            sample_rate: 16_000,
            window: 1024,
            hop: 512,
            mel_bands: 64,
            clip_seconds: 30.0,
            stats: vec![BandStat::Mean, BandStat::Std, BandStat::DeltaMean],
        }
    }
}

impl AudioFeaturizerConfig {
    pub fn validate(&self) -> Result<(), FeatureError> {
        let bad = |m: String| Err(FeatureError::InvalidConfig(m));
        if self.window < 2 || self.hop == 0 || self.hop > self.window {
            return bad(format!("need 0 < hop ({}) <= window ({})", self.hop, self.window));
        }
        if self.mel_bands < 8 {
            return bad(format!("mel_bands {} < 8", self.mel_bands));
        }
        if self.sample_rate == 0 {
            return bad("sample_rate must be positive".into());
        }
        if self.stats.is_empty() {
            return bad("at least one band statistic is required".into());
        }
        if !(self.clip_seconds.is_finite() && self.clip_seconds > 0.0) || self.clip_samples() < self.window {
            return bad(format!("clip of {}s is shorter than one window", self.clip_seconds));
        }
        Ok(())
    }

    pub fn clip_samples(&self) -> usize {
        (self.clip_seconds * f64::from(self.sample_rate)).round() as usize
    }

    pub fn output_dim(&self) -> usize {
        self.mel_bands * self.stats.len()
    }
}

pub fn hz_to_mel(hz: f64) -> f64 {
    2595.0 * (1.0 + hz / 700.0).log10()
}

pub fn mel_to_hz(mel: f64) -> f64 {
    700.0 * (10f64.powf(mel / 2595.0) - 1.0)
}

/// HTK-style triangular filters with peak 1, spaced evenly on the mel scale
/// from 0 Hz to Nyquist. Returns `mel_bands` rows of `window / 2 + 1` weights.
pub fn mel_filterbank(sample_rate: u32, window: usize, mel_bands: usize) -> Vec<Vec<f64>> {
    let bins = window / 2 + 1;
    let nyquist = f64::from(sample_rate) / 2.0;
    let top = hz_to_mel(nyquist);
    let edges: Vec<f64> = (0..mel_bands + 2)
        .map(|i| mel_to_hz(top * i as f64 / (mel_bands + 1) as f64))
        .collect();
    let bin_hz = |k: usize| k as f64 * f64::from(sample_rate) / window as f64;
    (0..mel_bands)
        .map(|m| {
            let (lo, mid, hi) = (edges[m], edges[m + 1], edges[m + 2]);
            (0..bins)
                .map(|k| {
                    let f = bin_hz(k);
                    if f <= lo || f >= hi {
                        0.0
                    } else if f <= mid {
                        (f - lo) / (mid - lo)
                    } else {
                        (hi - f) / (hi - mid)
                    }
                })
                .collect()
        })
        .collect()
}

/// Centre frequency of every mel band.
pub fn band_centers_hz(sample_rate: u32, mel_bands: usize) -> Vec<f64> {
    let top = hz_to_mel(f64::from(sample_rate) / 2.0);
    (1..=mel_bands)
        .map(|i| mel_to_hz(top * i as f64 / (mel_bands + 1) as f64))
        .collect()
}

/// Reusable log-mel featurizer (caches the FFT plan and filterbank).
pub struct AudioFeaturizer {
    cfg: AudioFeaturizerConfig,
    fft: Arc<dyn Fft<f64>>,
    hann: Vec<f64>,
    filters: Vec<Vec<f64>>,
}

impl AudioFeaturizer {
    pub fn new(cfg: AudioFeaturizerConfig) -> Result<Self, FeatureError> {
        cfg.validate()?;
        let fft = FftPlanner::new().plan_fft_forward(cfg.window);
        // Periodic Hann.
        let hann = (0..cfg.window)
            .map(|n| 0.5 - 0.5 * (std::f64::consts::TAU * n as f64 / cfg.window as f64).cos())
            .collect();
        let filters = mel_filterbank(cfg.sample_rate, cfg.window, cfg.mel_bands);
        Ok(Self { cfg, fft, hann, filters })
    }

    pub fn config(&self) -> &AudioFeaturizerConfig {
        &self.cfg
    }

    /// Crop (centred) or zero-pad to exactly `clip_samples`.
    pub fn fit_clip(&self, pcm: &[f32]) -> Vec<f64> {
        let want = self.cfg.clip_samples();
        if pcm.len() >= want {
            let start = (pcm.len() - want) / 2;
            pcm[start..start + want].iter().map(|&x| f64::from(x)).collect()
        } else {
            let mut out: Vec<f64> = pcm.iter().map(|&x| f64::from(x)).collect();
            out.resize(want, 0.0);
            out
        }
    }

    /// Log-mel frames: `log(1 + mel energy)` per band, one row per frame.
    pub fn log_mel(&self, samples: &[f64]) -> Vec<Vec<f64>> {
        let (win, hop) = (self.cfg.window, self.cfg.hop);
        let frames = 1 + (samples.len() - win) / hop;
        let bins = win / 2 + 1;
        let mut buf = vec![Complex::new(0.0, 0.0); win];
        let mut mag = vec![0.0; bins];
        let mut out = Vec::with_capacity(frames);
        for t in 0..frames {
            let frame = &samples[t * hop..t * hop + win];
            for ((b, &x), &w) in buf.iter_mut().zip(frame).zip(&self.hann) {
                *b = Complex::new(x * w, 0.0);
            }
            self.fft.process(&mut buf);
            for (m, b) in mag.iter_mut().zip(&buf) {
                *m = b.norm();
            }
            out.push(
                self.filters
                    .iter()
                    .map(|f| f.iter().zip(&mag).map(|(w, m)| w * m).sum::<f64>().ln_1p())
                    .collect(),
            );
        }
        out
    }

    pub fn featurize(&self, source_id: &str, pcm: &[f32]) -> Result<FeatureVector, FeatureError> {
        if pcm.is_empty() {
            return Err(FeatureError::EmptyAudio);
        }
        if let Some(i) = pcm.iter().position(|x| !x.is_finite()) {
            return Err(FeatureError::NonFiniteSamples(i));
        }
        let frames = self.log_mel(&self.fit_clip(pcm));
        let bands = self.cfg.mel_bands;
        let n = frames.len() as f64;
        let mut values = Vec::with_capacity(self.cfg.output_dim());
        for stat in &self.cfg.stats {
            for b in 0..bands {
                let v = match stat {
                    BandStat::Mean => frames.iter().map(|f| f[b]).sum::<f64>() / n,
                    BandStat::Std => {
                        let mean = frames.iter().map(|f| f[b]).sum::<f64>() / n;
                        (frames.iter().map(|f| (f[b] - mean).powi(2)).sum::<f64>() / n).sqrt()
                    }
                    BandStat::DeltaMean => {
                        if frames.len() < 2 {
                            0.0
                        } else {
                            frames.windows(2).map(|w| (w[1][b] - w[0][b]).abs()).sum::<f64>()
                                / (n - 1.0)
                        }
                    }
                };
                values.push(v as f32);
            }
        }
        Ok(FeatureVector::new(source_id, values))
    }
}

/// One-shot convenience wrapper around [`AudioFeaturizer`].
pub fn featurize_audio(
    source_id: &str,
    pcm: &[f32],
    cfg: &AudioFeaturizerConfig,
) -> Result<FeatureVector, FeatureError> {
    AudioFeaturizer::new(cfg.clone())?.featurize(source_id, pcm)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn short_cfg() -> AudioFeaturizerConfig {
        AudioFeaturizerConfig {
            clip_seconds: 1.0,
            ..Default::default()
        }
    }

    fn sine(freq: f64, seconds: f64, amp: f32) -> Vec<f32> {
        (0..(16_000.0 * seconds) as usize)
            .map(|n| amp * (std::f64::consts::TAU * freq * n as f64 / 16_000.0).sin() as f32)
            .collect()
    }

    #[test]
    fn silence_is_all_zero() {
        let v = featurize_audio("s", &vec![0.0; 16_000], &short_cfg()).unwrap();
        assert_eq!(v.dim(), 64 * 3);
        assert!(v.values.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn tone_peaks_in_its_band() {
        // Oracle: the band whose centre frequency is nearest 440 Hz, from the
        // HTK mel formula evaluated independently here.
        let mel = |f: f64| 2595.0 * (1.0 + f / 700.0).log10();
        let top = mel(8000.0);
        let centers: Vec<f64> = (1..=64)
            .map(|i| 700.0 * (10f64.powf(top * i as f64 / 65.0 / 2595.0) - 1.0))
            .collect();
        let expected = centers
            .iter()
            .enumerate()
            .min_by(|a, b| (a.1 - 440.0).abs().total_cmp(&(b.1 - 440.0).abs()))
            .unwrap()
            .0;

        let v = featurize_audio("t", &sine(440.0, 1.0, 0.5), &short_cfg()).unwrap();
        let means = &v.values[..64];
        let argmax = means
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .unwrap()
            .0;
        assert_eq!(argmax, expected);
        assert_eq!(band_centers_hz(16_000, 64).len(), 64);
    }

    #[test]
    fn deterministic() {
        let pcm = sine(1234.5, 2.0, 0.3);
        let a = featurize_audio("a", &pcm, &short_cfg()).unwrap();
        let b = featurize_audio("a", &pcm, &short_cfg()).unwrap();
        assert_eq!(
            a.values.iter().map(|x| x.to_bits()).collect::<Vec<_>>(),
            b.values.iter().map(|x| x.to_bits()).collect::<Vec<_>>()
        );
    }

    #[test]
    fn errors() {
        assert!(matches!(featurize_audio("e", &[], &short_cfg()), Err(FeatureError::EmptyAudio)));
        assert!(matches!(
            featurize_audio("e", &[0.0, f32::NAN], &short_cfg()),
            Err(FeatureError::NonFiniteSamples(1))
        ));
        let cfg = AudioFeaturizerConfig { hop: 2048, ..Default::default() };
        assert!(AudioFeaturizer::new(cfg).is_err());
        let cfg = AudioFeaturizerConfig { mel_bands: 4, ..Default::default() };
        assert!(AudioFeaturizer::new(cfg).is_err());
    }

    #[test]
    fn long_clips_are_centre_cropped() {
        let f = AudioFeaturizer::new(short_cfg()).unwrap();
        let pcm: Vec<f32> = (0..32_000).map(|i| i as f32).collect();
        let clip = f.fit_clip(&pcm);
        assert_eq!(clip.len(), 16_000);
        assert_eq!(clip[0], 8_000.0);
        assert_eq!(f.fit_clip(&pcm[..10]).len(), 16_000);
    }

    #[test]
    fn filter_rows_sum_positive() {
        let fb = mel_filterbank(16_000, 1024, 64);
        assert!(fb.iter().all(|row| row.iter().sum::<f64>() > 0.0));
        assert!(fb.iter().flatten().all(|w| (0.0..=1.0).contains(w)));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        #[test]
        fn louder_never_lowers_means(pcm in prop::collection::vec(-0.5f32..0.5, 2048..6000)) {
            let cfg = AudioFeaturizerConfig { clip_seconds: 0.4, ..Default::default() };
            let f = AudioFeaturizer::new(cfg).unwrap();
            let quiet = f.featurize("q", &pcm).unwrap();
            let loud: Vec<f32> = pcm.iter().map(|x| 2.0 * x).collect();
            let loud = f.featurize("l", &loud).unwrap();
            prop_assert!(quiet.values.iter().chain(&loud.values).all(|x| x.is_finite()));
            for b in 0..64 {
                prop_assert!(loud.values[b] >= quiet.values[b]);
            }
        }
    }
}
