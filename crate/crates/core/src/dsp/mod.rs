//! Preprocessing: low-pass filtering, magnitude channel, scaling, windowing.

mod filter;
mod normalize;

pub use filter::{design_butterworth, filter_signal, frequency_response, Biquad, FilterCoeffs, FilterSpec};
pub use normalize::{minmax_normalize, normalize, zscore_normalize, NormMode, NormParams, Normalized};

use std::io::Write;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dynamics::{FrameError, SignalFrame};

#[derive(Debug, Error)]
pub enum DspError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("empty input")]
    Empty,
    #[error(transparent)]
    Frame(#[from] FrameError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Per-sample Euclidean norm over the named channels.
pub fn magnitude_channel(frame: &SignalFrame, axes: &[&str]) -> Result<Vec<f64>, DspError> {
    if axes.is_empty() {
        return Err(DspError::Config("at least one axis is required".into()));
    }
    let cols = axes
        .iter()
        .map(|a| frame.channel(a))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(magnitude(&cols))
}

fn magnitude(cols: &[&[f64]]) -> Vec<f64> {
    (0..cols[0].len())
        .map(|i| cols.iter().map(|c| c[i] * c[i]).sum::<f64>().sqrt())
        .collect()
}

/// Windows at offsets `0, stride, 2·stride, …`; a trailing partial window is
/// dropped and an input shorter than `length` yields no windows.
pub fn window_segments<T>(x: &[T], length: usize, stride: usize) -> Result<Vec<&[T]>, DspError> {
    if length == 0 || stride == 0 {
        return Err(DspError::Config("window length and stride must be ≥ 1".into()));
    }
    Ok(x.windows(length).step_by(stride).collect())
}

/// Which acceleration axes enter the magnitude channel.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AxisSelection {
    #[default]
    Xyz,
    /// Only the second and third axes.
    Yz,
}

impl AxisSelection {
    pub fn pick<'a>(&self, axes: [&'a str; 3]) -> Vec<&'a str> {
        match self {
            AxisSelection::Xyz => axes.to_vec(),
            AxisSelection::Yz => axes[1..].to_vec(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PreprocessConfig {
    pub filter_order: usize,
    pub cutoff_hz: f64,
    pub axes: AxisSelection,
    pub normalization: NormMode,
    pub window_len: usize,
    pub stride: usize,
    /// Leading samples discarded after filtering (start-up transient).
    pub settle_samples: usize,
}

impl Default for PreprocessConfig {
    fn default() -> Self {
        Self {
            filter_order: 4,
            cutoff_hz: 10.0,
            axes: AxisSelection::Xyz,
            normalization: NormMode::MinMax,
            window_len: 128,
            stride: 64,
            settle_samples: 100,
        }
    }
}

impl PreprocessConfig {
    pub fn filter_spec(&self, sample_rate_hz: f64) -> FilterSpec {
        FilterSpec {
            order: self.filter_order,
            cutoff_hz: self.cutoff_hz,
            sample_rate_hz,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Preprocessed {
    pub windows: Vec<Vec<f64>>,
    pub params: NormParams,
    pub degenerate: bool,
}

/// Filter each axis, take the magnitude, drop the settling head, scale over
/// the remainder of the record, then cut windows.
pub fn preprocess(frame: &SignalFrame, axes: &[&str], cfg: &PreprocessConfig) -> Result<Preprocessed, DspError> {
    let coeffs = design_butterworth(&cfg.filter_spec(frame.sample_rate_hz))?;
    let filtered = axes
        .iter()
        .map(|a| frame.channel(a).map(|x| filter_signal(&coeffs, x)))
        .collect::<Result<Vec<_>, _>>()?;
    if filtered.is_empty() {
        return Err(DspError::Config("at least one axis is required".into()));
    }
    let refs: Vec<&[f64]> = filtered.iter().map(Vec::as_slice).collect();
    let mag = magnitude(&refs);
    let tail = mag.get(cfg.settle_samples..).unwrap_or(&[]);
    if tail.len() < cfg.window_len {
        return Err(DspError::Config(format!(
            "record has {} samples after settling, fewer than one window of {}",
            tail.len(),
            cfg.window_len
        )));
    }
    let scaled = normalize(tail, cfg.normalization)?;
    let windows = window_segments(&scaled.values, cfg.window_len, cfg.stride)?
        .into_iter()
        .map(<[f64]>::to_vec)
        .collect();
    Ok(Preprocessed {
        windows,
        params: scaled.params,
        degenerate: scaled.degenerate,
    })
}

/// Sidecar describing a windows CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowManifest {
    pub window_len: usize,
    pub stride: usize,
    pub filter: FilterSpec,
    pub preprocess: PreprocessConfig,
    /// Normalization parameters per source record, in CSV `record` order.
    pub norm_params: Vec<NormParams>,
    pub rows: usize,
}

/// One row per window: metadata columns then `v0..v{L-1}`.
pub fn write_windows_csv<W: Write>(
    out: W,
    meta_header: &[&str],
    rows: impl IntoIterator<Item = (Vec<String>, Vec<f64>)>,
    window_len: usize,
) -> Result<usize, DspError> {
    let mut w = csv::Writer::from_writer(out);
    let mut header: Vec<String> = meta_header.iter().map(|s| s.to_string()).collect();
    header.extend((0..window_len).map(|i| format!("v{i}")));
    w.write_record(&header).map_err(|e| DspError::Config(e.to_string()))?;
    let mut count = 0;
    for (meta, values) in rows {
        if values.len() != window_len || meta.len() != meta_header.len() {
            return Err(DspError::Config(format!("row {count} does not match the header")));
        }
        let record = meta.into_iter().chain(values.iter().map(f64::to_string));
        w.write_record(record).map_err(|e| DspError::Config(e.to_string()))?;
        count += 1;
    }
    w.flush()?;
    Ok(count)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::Channel;
    use proptest::prelude::*;

    fn frame(cols: &[(&str, Vec<f64>)]) -> SignalFrame {
        SignalFrame::new(
            100.0,
            cols.iter()
                .map(|(n, v)| Channel {
                    name: n.to_string(),
                    values: v.clone(),
                })
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn magnitude_examples() {
        let f = frame(&[("x", vec![3.0, 0.0]), ("y", vec![4.0, 0.6]), ("z", vec![0.0, 0.8])]);
        assert_eq!(magnitude_channel(&f, &["x", "y", "z"]).unwrap(), vec![5.0, 1.0]);
        assert_eq!(magnitude_channel(&f, &["y", "z"]).unwrap()[1], 1.0);
        assert!(matches!(
            magnitude_channel(&f, &["x", "w"]),
            Err(DspError::Frame(FrameError::UnknownChannel(_)))
        ));
    }

    #[test]
    fn window_examples() {
        let x: Vec<usize> = (0..10).collect();
        assert_eq!(window_segments(&x, 4, 2).unwrap().len(), 4);
        assert_eq!(window_segments(&x, 10, 3).unwrap().len(), 1);
        let parts = window_segments(&x, 5, 5).unwrap();
        assert_eq!(parts.concat(), x);
        assert!(window_segments(&x, 11, 1).unwrap().is_empty());
        assert!(window_segments(&x, 0, 1).is_err());
    }

    #[test]
    fn preprocess_produces_unit_range_windows() {
        let n = 800;
        let wave = |p: f64| (0..n).map(|i| (i as f64 * 0.05 + p).sin()).collect::<Vec<_>>();
        let f = frame(&[("a", wave(0.0)), ("b", wave(1.0)), ("c", vec![9.81; n])]);
        let out = preprocess(&f, &["a", "b", "c"], &PreprocessConfig::default()).unwrap();
        assert_eq!(out.windows.len(), (n - 100 - 128) / 64 + 1);
        assert!(out.windows.iter().flatten().all(|v| (0.0..=1.0).contains(v)));
        assert!(!out.degenerate);

        let short = frame(&[("a", vec![1.0; 150])]);
        assert!(preprocess(&short, &["a"], &PreprocessConfig::default()).is_err());
    }

    #[test]
    fn windows_csv_layout() {
        let mut buf = Vec::new();
        let rows = vec![(vec!["0".to_string()], vec![0.5, 1.0]), (vec!["2".to_string()], vec![0.0, 0.25])];
        let n = write_windows_csv(&mut buf, &["label"], rows, 2).unwrap();
        assert_eq!(n, 2);
        assert_eq!(String::from_utf8(buf).unwrap(), "label,v0,v1\n0,0.5,1\n2,0,0.25\n");
    }

    fn rotation(q: [f64; 4]) -> [[f64; 3]; 3] {
        let n = q.iter().map(|v| v * v).sum::<f64>().sqrt();
        let [w, x, y, z] = q.map(|v| v / n);
        [
            [1.0 - 2.0 * (y * y + z * z), 2.0 * (x * y - z * w), 2.0 * (x * z + y * w)],
            [2.0 * (x * y + z * w), 1.0 - 2.0 * (x * x + z * z), 2.0 * (y * z - x * w)],
            [2.0 * (x * z - y * w), 2.0 * (y * z + x * w), 1.0 - 2.0 * (x * x + y * y)],
        ]
    }

    proptest! {
        #[test]
        fn magnitude_is_rotation_invariant(
            q in prop::array::uniform4(-1.0f64..1.0),
            samples in prop::collection::vec(prop::array::uniform3(-20.0f64..20.0), 1..32),
        ) {
            prop_assume!(q.iter().map(|v| v * v).sum::<f64>() > 1e-3);
            let r = rotation(q);
            let cols = |s: &[[f64; 3]]| (0..3).map(|k| (["x", "y", "z"][k], s.iter().map(|v| v[k]).collect())).collect::<Vec<_>>();
            let rotated: Vec<[f64; 3]> = samples
                .iter()
                .map(|v| [0, 1, 2].map(|i| r[i][0] * v[0] + r[i][1] * v[1] + r[i][2] * v[2]))
                .collect();
            let a = magnitude_channel(&frame(&cols(&samples)), &["x", "y", "z"]).unwrap();
            let b = magnitude_channel(&frame(&cols(&rotated)), &["x", "y", "z"]).unwrap();
            for (p, q) in a.iter().zip(&b) {
                prop_assert!((p - q).abs() <= 1e-9 * p.max(1.0));
            }
        }

        #[test]
        fn windows_are_contiguous_slices(len in 0usize..200, length in 1usize..40, stride in 1usize..20) {
            let x: Vec<usize> = (0..len).collect();
            let w = window_segments(&x, length, stride).unwrap();
            let expected = if len >= length { (len - length) / stride + 1 } else { 0 };
            prop_assert_eq!(w.len(), expected);
            for (k, win) in w.iter().enumerate() {
                prop_assert_eq!(*win, &x[k * stride..k * stride + length]);
            }
        }
    }
}
