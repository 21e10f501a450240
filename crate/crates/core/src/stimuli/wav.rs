use std::path::Path;

use hound::{SampleFormat, WavReader, WavSpec, WavWriter};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::signal::{Signal, StereoSignal};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WavEncoding {
    Pcm16,
    Float32,
}

fn wav_err(e: hound::Error, path: &Path) -> Error {
    match e {
        hound::Error::IoError(io) => Error::io(path, io),
        hound::Error::Unsupported => Error::UnsupportedEncoding("format not supported".into()),
        other => Error::MalformedWav(format!("{}: {other}", path.display())),
    }
}

/// Reads a 16-bit PCM or 32-bit float WAV file. Mono files are returned as
/// diotic stereo. PCM samples are scaled by 1/32768.
pub fn read_wav(path: impl AsRef<Path>) -> Result<StereoSignal> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    // Once the file is open, read failures mean the content is bad.
    let reader = WavReader::new(std::io::BufReader::new(file)).map_err(|e| match e {
        hound::Error::IoError(io) => Error::MalformedWav(format!("{}: {io}", path.display())),
        other => wav_err(other, path),
    })?;
    let spec = reader.spec();
    if spec.channels == 0 || spec.channels > 2 {
        return Err(Error::UnsupportedEncoding(format!(
            "{} channels",
            spec.channels
        )));
    }
    let interleaved: Vec<f64> = match (spec.sample_format, spec.bits_per_sample) {
        (SampleFormat::Int, 16) => reader
            .into_samples::<i16>()
            .map(|s| s.map(|v| v as f64 / 32768.0))
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| wav_err(e, path))?,
        (SampleFormat::Float, 32) => reader
            .into_samples::<f32>()
            .map(|s| s.map(|v| v as f64))
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| wav_err(e, path))?,
        (fmt, bits) => {
            return Err(Error::UnsupportedEncoding(format!(
                "{bits}-bit {}",
                match fmt {
                    SampleFormat::Int => "PCM",
                    SampleFormat::Float => "float",
                }
            )))
        }
    };
    let fs = spec.sample_rate;
    if spec.channels == 1 {
        return Ok(StereoSignal::diotic(Signal::new(interleaved, fs)?));
    }
    let left = interleaved.iter().step_by(2).copied().collect();
    let right = interleaved.iter().skip(1).step_by(2).copied().collect();
    StereoSignal::new(Signal::new(left, fs)?, Signal::new(right, fs)?)
}

/// Writes a stereo WAV file. PCM16 output fails if a sample falls outside [-1, 1).
pub fn write_wav(path: impl AsRef<Path>, signal: &StereoSignal, encoding: WavEncoding) -> Result<()> {
    let path = path.as_ref();
    let spec = WavSpec {
        channels: 2,
        sample_rate: signal.sample_rate(),
        bits_per_sample: match encoding {
            WavEncoding::Pcm16 => 16,
            WavEncoding::Float32 => 32,
        },
        sample_format: match encoding {
            WavEncoding::Pcm16 => SampleFormat::Int,
            WavEncoding::Float32 => SampleFormat::Float,
        },
    };
    let mut w = WavWriter::create(path, spec).map_err(|e| wav_err(e, path))?;
    let pairs = signal.left().samples().iter().zip(signal.right().samples());
    for (&l, &r) in pairs {
        for v in [l, r] {
            match encoding {
                WavEncoding::Float32 => w.write_sample(v as f32),
                WavEncoding::Pcm16 => {
                    let q = (v * 32768.0).round();
                    if !(-32768.0..=32767.0).contains(&q) {
                        return Err(Error::invalid(format!(
                            "sample {v} exceeds 16-bit full scale"
                        )));
                    }
                    w.write_sample(q as i16)
                }
            }
            .map_err(|e| wav_err(e, path))?;
        }
    }
    w.finalize().map_err(|e| wav_err(e, path))
}
