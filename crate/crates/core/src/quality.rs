//! Signal-quality metrics used to compare the body and rod sensors.
//!
//! Conventions: energy is `Σx²`, std uses the `n−1` denominator, skewness and
//! kurtosis are moment estimators with kurtosis in excess form, the PSD is a
//! one-sided Welch estimate with a Hann window and per-segment mean removal,
//! and the spectral centroid is `Σ f·P(f) / Σ P(f)` over that PSD.

use std::io::Write;

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dynamics::{SensorKind, SignalFrame};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum QualityError {
    #[error("need at least {needed} samples, got {got}")]
    InsufficientData { needed: usize, got: usize },
    #[error("degenerate input: {0}")]
    Degenerate(&'static str),
    #[error("configuration error: {0}")]
    Config(String),
}

pub const DEFAULT_SEGMENT: usize = 256;
pub const DEFAULT_OVERLAP: f64 = 0.5;

fn need(x: &[f64], n: usize) -> Result<(), QualityError> {
    if x.len() < n {
        Err(QualityError::InsufficientData {
            needed: n,
            got: x.len(),
        })
    } else {
        Ok(())
    }
}

fn mean(x: &[f64]) -> f64 {
    let n = x.len() as f64;
    let m = x.iter().sum::<f64>() / n;
    // One refinement pass removes the rounding error of the plain sum.
    m + x.iter().map(|v| v - m).sum::<f64>() / n
}

/// Central moments 2..=4 about the sample mean, population normalization.
fn central_moments(x: &[f64]) -> (f64, f64, f64) {
    let mu = mean(x);
    let (mut m2, mut m3, mut m4) = (0.0, 0.0, 0.0);
    for &v in x {
        let d = v - mu;
        let d2 = d * d;
        m2 += d2;
        m3 += d2 * d;
        m4 += d2 * d2;
    }
    let n = x.len() as f64;
    (m2 / n, m3 / n, m4 / n)
}

pub fn signal_energy(x: &[f64]) -> Result<f64, QualityError> {
    need(x, 1)?;
    Ok(x.iter().map(|v| v * v).sum())
}

pub fn signal_std(x: &[f64]) -> Result<f64, QualityError> {
    need(x, 2)?;
    let mu = mean(x);
    let ss: f64 = x.iter().map(|v| (v - mu) * (v - mu)).sum();
    Ok((ss / (x.len() - 1) as f64).sqrt())
}

/// Variance this small relative to the mean square is treated as zero.
fn is_flat(m2: f64, x: &[f64]) -> bool {
    let scale = x.iter().map(|v| v * v).sum::<f64>() / x.len() as f64;
    m2 <= 1e-24 * scale.max(f64::MIN_POSITIVE)
}

pub fn excess_kurtosis(x: &[f64]) -> Result<f64, QualityError> {
    need(x, 4)?;
    let (m2, _, m4) = central_moments(x);
    if is_flat(m2, x) {
        return Err(QualityError::Degenerate("zero variance"));
    }
    Ok(m4 / (m2 * m2) - 3.0)
}

pub fn skewness(x: &[f64]) -> Result<f64, QualityError> {
    need(x, 3)?;
    let (m2, m3, _) = central_moments(x);
    if is_flat(m2, x) {
        return Err(QualityError::Degenerate("zero variance"));
    }
    Ok(m3 / m2.powf(1.5))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Psd {
    pub freqs_hz: Vec<f64>,
    pub density: Vec<f64>,
}

impl Psd {
    pub fn resolution_hz(&self) -> f64 {
        self.freqs_hz.get(1).copied().unwrap_or(0.0)
    }

    pub fn total_power(&self) -> f64 {
        self.density.iter().sum::<f64>() * self.resolution_hz()
    }

    pub fn peak_hz(&self) -> f64 {
        let (i, _) = self
            .density
            .iter()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |(bi, bv), (i, &v)| if v > bv { (i, v) } else { (bi, bv) });
        self.freqs_hz[i]
    }

    pub fn mean_density(&self) -> f64 {
        mean(&self.density)
    }
}

/// Welch estimate of the one-sided power spectral density.
pub fn psd_welch(x: &[f64], sample_rate_hz: f64, segment_len: usize, overlap_fraction: f64) -> Result<Psd, QualityError> {
    if segment_len < 2 {
        return Err(QualityError::Config("segment length must be ≥ 2".into()));
    }
    if segment_len > x.len() {
        return Err(QualityError::Config(format!(
            "segment length {segment_len} exceeds signal length {}",
            x.len()
        )));
    }
    if !(0.0..1.0).contains(&overlap_fraction) {
        return Err(QualityError::Config("overlap must lie in [0, 1)".into()));
    }
    if !(sample_rate_hz > 0.0) {
        return Err(QualityError::Config("sample rate must be > 0".into()));
    }
    let step = (segment_len - (overlap_fraction * segment_len as f64).round() as usize).max(1);
    // Periodic Hann window.
    let window: Vec<f64> = (0..segment_len)
        .map(|i| 0.5 - 0.5 * (std::f64::consts::TAU * i as f64 / segment_len as f64).cos())
        .collect();
    let win_power: f64 = window.iter().map(|w| w * w).sum();
    let fft = FftPlanner::<f64>::new().plan_fft_forward(segment_len);
    let bins = segment_len / 2 + 1;
    let mut acc = vec![0.0; bins];
    let mut buf = vec![Complex::new(0.0, 0.0); segment_len];
    let mut segments = 0usize;
    for seg in x.windows(segment_len).step_by(step) {
        let mu = mean(seg);
        for ((b, &v), &w) in buf.iter_mut().zip(seg).zip(&window) {
            *b = Complex::new((v - mu) * w, 0.0);
        }
        fft.process(&mut buf);
        for (a, b) in acc.iter_mut().zip(&buf) {
            *a += b.norm_sqr();
        }
        segments += 1;
    }
    let scale = 1.0 / (sample_rate_hz * win_power * segments as f64);
    let nyquist_bin = if segment_len.is_multiple_of(2) { Some(bins - 1) } else { None };
    let density = acc
        .iter()
        .enumerate()
        .map(|(k, &p)| {
            let one_sided = if k == 0 || Some(k) == nyquist_bin { 1.0 } else { 2.0 };
            p * scale * one_sided
        })
        .collect();
    let df = sample_rate_hz / segment_len as f64;
    Ok(Psd {
        freqs_hz: (0..bins).map(|k| k as f64 * df).collect(),
        density,
    })
}

pub fn centroid_of(psd: &Psd) -> Result<f64, QualityError> {
    let total: f64 = psd.density.iter().sum();
    if !(total > 0.0) || !total.is_finite() {
        return Err(QualityError::Degenerate("spectrum has no power"));
    }
    let weighted: f64 = psd.freqs_hz.iter().zip(&psd.density).map(|(f, p)| f * p).sum();
    Ok(weighted / total)
}

/// Centroid of the default Welch PSD (segment `min(256, n)`, 50% overlap).
pub fn spectral_centroid(x: &[f64], sample_rate_hz: f64) -> Result<f64, QualityError> {
    need(x, 2)?;
    let psd = psd_welch(x, sample_rate_hz, DEFAULT_SEGMENT.min(x.len()), DEFAULT_OVERLAP)?;
    centroid_of(&psd)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelQuality {
    pub channel: String,
    pub samples: usize,
    pub energy: f64,
    pub std: Option<f64>,
    pub excess_kurtosis: Option<f64>,
    pub skewness: Option<f64>,
    pub psd: Option<Psd>,
    pub spectral_centroid_hz: Option<f64>,
    /// Metrics that could not be computed, with the reason.
    pub degenerate: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QualityReport {
    pub sample_rate_hz: f64,
    pub channels: Vec<ChannelQuality>,
}

impl QualityReport {
    pub fn channel(&self, name: &str) -> Option<&ChannelQuality> {
        self.channels.iter().find(|c| c.channel == name)
    }
}

pub fn magnitude_name(kind: SensorKind) -> String {
    format!("{}_mag", kind.name())
}

pub fn channel_quality(name: &str, x: &[f64], sample_rate_hz: f64) -> Result<ChannelQuality, QualityError> {
    let mut degenerate = Vec::new();
    let mut keep = |label: &str, r: Result<f64, QualityError>| match r {
        Ok(v) => Some(v),
        Err(e) => {
            degenerate.push(format!("{label}: {e}"));
            None
        }
    };
    let energy = signal_energy(x)?;
    let std = keep("std", signal_std(x));
    let excess_kurtosis = keep("excess_kurtosis", excess_kurtosis(x));
    let skewness = keep("skewness", skewness(x));
    let psd = if x.len() >= 2 {
        psd_welch(x, sample_rate_hz, DEFAULT_SEGMENT.min(x.len()), DEFAULT_OVERLAP).ok()
    } else {
        None
    };
    let spectral_centroid_hz = match &psd {
        Some(p) => keep("spectral_centroid", centroid_of(p)),
        None => keep("spectral_centroid", Err(QualityError::InsufficientData { needed: 2, got: x.len() })),
    };
    Ok(ChannelQuality {
        channel: name.to_string(),
        samples: x.len(),
        energy,
        std,
        excess_kurtosis,
        skewness,
        psd,
        spectral_centroid_hz,
        degenerate,
    })
}

/// Metrics for every channel, followed by a magnitude channel for each sensor
/// whose three axes are present.
pub fn quality_report(frame: &SignalFrame) -> Result<QualityReport, QualityError> {
    if frame.is_empty() {
        return Err(QualityError::InsufficientData { needed: 1, got: 0 });
    }
    let fs = frame.sample_rate_hz;
    let mut channels = frame
        .channels
        .iter()
        .map(|c| channel_quality(&c.name, &c.values, fs))
        .collect::<Result<Vec<_>, _>>()?;
    for kind in SensorKind::ALL {
        if let Ok(mag) = crate::dsp::magnitude_channel(frame, &kind.axes()) {
            channels.push(channel_quality(&magnitude_name(kind), &mag, fs)?);
        }
    }
    Ok(QualityReport {
        sample_rate_hz: fs,
        channels,
    })
}

pub const TABLE_METRICS: [&str; 6] = ["energy", "std", "excess_kurtosis", "skewness", "psd_mean", "spectral_centroid_hz"];

fn metric(c: &ChannelQuality, name: &str) -> Option<f64> {
    match name {
        "energy" => Some(c.energy),
        "std" => c.std,
        "excess_kurtosis" => c.excess_kurtosis,
        "skewness" => c.skewness,
        "psd_mean" => c.psd.as_ref().map(Psd::mean_density),
        "spectral_centroid_hz" => c.spectral_centroid_hz,
        _ => None,
    }
}

/// Metric rows by excitation-level columns for the named channels. Missing
/// values are left empty.
pub fn write_level_table<W: Write>(
    mut out: W,
    reports: &[(u8, QualityReport)],
    channels: &[&str],
) -> std::io::Result<()> {
    write!(out, "channel,metric")?;
    for (level, _) in reports {
        write!(out, ",level_{level}")?;
    }
    writeln!(out)?;
    for ch in channels {
        for m in TABLE_METRICS {
            write!(out, "{ch},{m}")?;
            for (_, r) in reports {
                match r.channel(ch).and_then(|c| metric(c, m)) {
                    Some(v) => write!(out, ",{v}")?,
                    None => write!(out, ",")?,
                }
            }
            writeln!(out)?;
        }
    }
    Ok(())
}
