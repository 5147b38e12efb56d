//! Multi-channel sampled sensor record.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum FrameError {
    #[error("unknown channel `{0}`")]
    UnknownChannel(String),
    #[error("channel `{name}` has {got} samples, expected {expected}")]
    LengthMismatch {
        name: String,
        got: usize,
        expected: usize,
    },
    #[error("sample rate must be positive and finite, got {0}")]
    BadSampleRate(f64),
    #[error("timestamps are not spaced by 1/sample_rate at row {0}")]
    BadTimestamps(usize),
    #[error("malformed csv: {0}")]
    Csv(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl From<csv::Error> for FrameError {
    fn from(e: csv::Error) -> Self {
        FrameError::Csv(e.to_string())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Channel {
    pub name: String,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignalFrame {
    pub sample_rate_hz: f64,
    pub timestamps: Vec<f64>,
    pub channels: Vec<Channel>,
}

impl SignalFrame {
    /// Build a frame with timestamps `i / sample_rate_hz`.
    pub fn new(sample_rate_hz: f64, channels: Vec<Channel>) -> Result<Self, FrameError> {
        if !(sample_rate_hz > 0.0 && sample_rate_hz.is_finite()) {
            return Err(FrameError::BadSampleRate(sample_rate_hz));
        }
        let n = channels.first().map_or(0, |c| c.values.len());
        for c in &channels {
            if c.values.len() != n {
                return Err(FrameError::LengthMismatch {
                    name: c.name.clone(),
                    got: c.values.len(),
                    expected: n,
                });
            }
        }
        let timestamps = (0..n).map(|i| i as f64 / sample_rate_hz).collect();
        Ok(Self {
            sample_rate_hz,
            timestamps,
            channels,
        })
    }

    pub fn len(&self) -> usize {
        self.timestamps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.timestamps.is_empty()
    }

    pub fn channel_names(&self) -> impl Iterator<Item = &str> {
        self.channels.iter().map(|c| c.name.as_str())
    }

    pub fn channel(&self, name: &str) -> Result<&[f64], FrameError> {
        self.channels
            .iter()
            .find(|c| c.name == name)
            .map(|c| c.values.as_slice())
            .ok_or_else(|| FrameError::UnknownChannel(name.to_string()))
    }

    /// Copy of the frame restricted to the named channels, in the given order.
    pub fn select(&self, names: &[&str]) -> Result<SignalFrame, FrameError> {
        let channels = names
            .iter()
            .map(|n| {
                self.channel(n).map(|v| Channel {
                    name: n.to_string(),
                    values: v.to_vec(),
                })
            })
            .collect::<Result<Vec<_>, _>>()?;
        Ok(SignalFrame {
            sample_rate_hz: self.sample_rate_hz,
            timestamps: self.timestamps.clone(),
            channels,
        })
    }

    /// Header `t,<channels>`, then one row per sample. Values use the shortest
    /// representation that round-trips exactly.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<(), FrameError> {
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["t".to_string()];
        header.extend(self.channels.iter().map(|c| c.name.clone()));
        w.write_record(&header)?;
        let mut row = Vec::with_capacity(header.len());
        for (i, t) in self.timestamps.iter().enumerate() {
            row.clear();
            row.push(t.to_string());
            row.extend(self.channels.iter().map(|c| c.values[i].to_string()));
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }

    /// Parse a CSV written by [`write_csv`](Self::write_csv). The sample rate
    /// is recovered from the first timestamp step.
    pub fn read_csv<R: Read>(input: R) -> Result<Self, FrameError> {
        let mut r = csv::Reader::from_reader(input);
        let header = r.headers()?.clone();
        if header.get(0) != Some("t") {
            return Err(FrameError::Csv("first column must be `t`".into()));
        }
        let names: Vec<String> = header.iter().skip(1).map(str::to_string).collect();
        let mut timestamps = Vec::new();
        let mut cols: Vec<Vec<f64>> = vec![Vec::new(); names.len()];
        for (row, rec) in r.records().enumerate() {
            let rec = rec?;
            let parse = |i: usize| -> Result<f64, FrameError> {
                rec.get(i)
                    .ok_or_else(|| FrameError::Csv(format!("row {}: missing column {i}", row + 1)))?
                    .trim()
                    .parse::<f64>()
                    .map_err(|e| FrameError::Csv(format!("row {} column {i}: {e}", row + 1)))
            };
            timestamps.push(parse(0)?);
            for (j, col) in cols.iter_mut().enumerate() {
                col.push(parse(j + 1)?);
            }
        }
        if timestamps.len() < 2 {
            return Err(FrameError::Csv("need at least two rows to infer the sample rate".into()));
        }
        let dt = timestamps[1] - timestamps[0];
        if !(dt > 0.0) {
            return Err(FrameError::BadTimestamps(1));
        }
        let sample_rate_hz = 1.0 / dt;
        for (i, w) in timestamps.windows(2).enumerate() {
            if ((w[1] - w[0]) - dt).abs() > 1e-6 * dt.max(1e-9) + 1e-9 {
                return Err(FrameError::BadTimestamps(i + 1));
            }
        }
        let channels = names
            .into_iter()
            .zip(cols)
            .map(|(name, values)| Channel { name, values })
            .collect();
        Ok(Self {
            sample_rate_hz,
            timestamps,
            channels,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn frame() -> SignalFrame {
        SignalFrame::new(
            100.0,
            vec![
                Channel {
                    name: "a".into(),
                    values: vec![0.1, -2.5, 3.0e-7],
                },
                Channel {
                    name: "b".into(),
                    values: vec![1.0, 2.0, 9.81],
                },
            ],
        )
        .unwrap()
    }

    #[test]
    fn timestamps_follow_sample_rate() {
        let f = frame();
        assert_eq!(f.timestamps, vec![0.0, 0.01, 0.02]);
        assert_eq!(f.len(), 3);
    }

    #[test]
    fn csv_round_trip_is_exact() {
        let f = frame();
        let mut buf = Vec::new();
        f.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("t,a,b\n"));
        let back = SignalFrame::read_csv(buf.as_slice()).unwrap();
        assert_eq!(back.channels, f.channels);
        assert!((back.sample_rate_hz - 100.0).abs() < 1e-9);
    }

    #[test]
    fn rejects_ragged_channels_and_unknown_names() {
        let err = SignalFrame::new(
            10.0,
            vec![
                Channel {
                    name: "a".into(),
                    values: vec![1.0],
                },
                Channel {
                    name: "b".into(),
                    values: vec![],
                },
            ],
        );
        assert!(matches!(err, Err(FrameError::LengthMismatch { .. })));
        assert!(matches!(frame().channel("z"), Err(FrameError::UnknownChannel(_))));
    }

    #[test]
    fn malformed_csv_reports_row() {
        let err = SignalFrame::read_csv("t,a\n0,1\n0.1,oops\n".as_bytes()).unwrap_err();
        assert!(err.to_string().contains("row 2"), "{err}");
    }
}
