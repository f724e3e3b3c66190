use std::path::Path;

use super::FeatureError;

/// Mono PCM in `[-1, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct DecodedAudio {
    pub samples: Vec<f32>,
    pub sample_rate: u32,
    /// Rate stored in the file, before any resampling.
    pub source_rate: u32,
}

/// Read a 16-bit integer or 32-bit float WAV with one or two channels,
/// average to mono and resample to `target_rate` (if given) by linear interpolation.
pub fn decode_wav(path: &Path, target_rate: Option<u32>) -> Result<DecodedAudio, FeatureError> {
    let reader = hound::WavReader::open(path).map_err(|e| map_hound(path, e))?;
    let spec = reader.spec();
    if !(1..=2).contains(&spec.channels) {
        return Err(FeatureError::UnsupportedFormat(format!(
            "{}: {} channels",
            path.display(),
            spec.channels
        )));
    }
    let interleaved: Vec<f32> = match (spec.sample_format, spec.bits_per_sample) {
        (hound::SampleFormat::Int, 16) => reader
            .into_samples::<i16>()
            .map(|s| s.map(|v| f32::from(v) / 32768.0))
            .collect::<Result<_, _>>()
            .map_err(|e| map_hound(path, e))?,
        (hound::SampleFormat::Float, 32) => reader
            .into_samples::<f32>()
            .collect::<Result<_, _>>()
            .map_err(|e| map_hound(path, e))?,
        (fmt, bits) => {
            return Err(FeatureError::UnsupportedFormat(format!(
                "{}: {bits}-bit {fmt:?}",
                path.display()
            )))
        }
    };
    let mono: Vec<f32> = if spec.channels == 2 {
        interleaved
            .chunks_exact(2)
            .map(|c| (c[0] + c[1]) * 0.5)
            .collect()
    } else {
        interleaved
    };
    let (samples, sample_rate) = match target_rate {
        Some(rate) if rate != spec.sample_rate => (resample_linear(&mono, spec.sample_rate, rate), rate),
        _ => (mono, spec.sample_rate),
    };
    Ok(DecodedAudio {
        samples,
        sample_rate,
        source_rate: spec.sample_rate,
    })
}

/// Write mono samples (clipped to `[-1, 1]`) as 16-bit PCM.
pub fn write_wav_i16(path: &Path, samples: &[f32], sample_rate: u32) -> Result<(), FeatureError> {
    let spec = hound::WavSpec {
        channels: 1,
        sample_rate,
        bits_per_sample: 16,
        sample_format: hound::SampleFormat::Int,
    };
    let mut w = hound::WavWriter::create(path, spec).map_err(|e| map_hound(path, e))?;
    for &s in samples {
        let v = (s.clamp(-1.0, 1.0) * 32767.0).round() as i16;
        w.write_sample(v).map_err(|e| map_hound(path, e))?;
    }
    w.finalize().map_err(|e| map_hound(path, e))
}

fn map_hound(path: &Path, e: hound::Error) -> FeatureError {
    let what = format!("{}: {e}", path.display());
    match e {
        hound::Error::IoError(io) if io.kind() == std::io::ErrorKind::NotFound => FeatureError::Io(io),
        hound::Error::Unsupported | hound::Error::TooWide | hound::Error::InvalidSampleFormat => {
            FeatureError::UnsupportedFormat(what)
        }
        _ => FeatureError::CorruptHeader(what),
    }
}

/// Linear-interpolation resampling. Output length is `round(len * to / from)`;
/// output sample `i` reads the input at position `i * from / to`.
pub fn resample_linear(input: &[f32], from: u32, to: u32) -> Vec<f32> {
    if input.is_empty() || from == to {
        return input.to_vec();
    }
    let ratio = f64::from(from) / f64::from(to);
    let out_len = (input.len() as f64 / ratio).round() as usize;
    let last = input.len() - 1;
    (0..out_len)
        .map(|i| {
            let pos = i as f64 * ratio;
            let i0 = (pos.floor() as usize).min(last);
            let i1 = (i0 + 1).min(last);
            let frac = pos - i0 as f64;
            (f64::from(input[i0]) * (1.0 - frac) + f64::from(input[i1]) * frac) as f32
        })
        .collect()
}
