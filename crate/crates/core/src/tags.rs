//! Time-tagged photon detection events.

use crate::{Error, Result};

/// Convert integer picoseconds to nanoseconds.
#[inline]
pub fn ps_to_ns(ps: i64) -> f64 {
    ps as f64 * 1e-3
}

/// Convert nanoseconds to the nearest integer picosecond.
#[inline]
pub fn ns_to_ps(ns: f64) -> i64 {
    (ns * 1e3).round() as i64
}

/// A time-ordered stream of detection events.
///
/// Times are integer picoseconds so that stream equality is exact; the
/// channel identifies the detector. Times and channels are stored as
/// parallel arrays so the correlator can sweep timestamps without touching
/// channel data.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct TagStream {
    pub times_ps: Vec<i64>,
    pub channels: Vec<u16>,
    /// Acquisition span in picoseconds (not the last tag time: a stream
    /// may end long after its final detection).
    pub duration_ps: i64,
}

impl TagStream {
    pub fn new(duration_ps: i64) -> Self {
        TagStream {
            times_ps: Vec::new(),
            channels: Vec::new(),
            duration_ps,
        }
    }

    /// Build from parallel arrays, validating ordering invariants.
    pub fn from_parts(times_ps: Vec<i64>, channels: Vec<u16>, duration_ps: i64) -> Result<Self> {
        if times_ps.len() != channels.len() {
            return Err(Error::InvalidParameter(format!(
                "times/channels length mismatch: {} vs {}",
                times_ps.len(),
                channels.len()
            )));
        }
        let s = TagStream {
            times_ps,
            channels,
            duration_ps,
        };
        if !s.is_sorted() {
            return Err(Error::UnsortedStream);
        }
        Ok(s)
    }

    pub fn push(&mut self, time_ps: i64, channel: u16) {
        self.times_ps.push(time_ps);
        self.channels.push(channel);
    }

    pub fn len(&self) -> usize {
        self.times_ps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times_ps.is_empty()
    }

    pub fn is_sorted(&self) -> bool {
        self.times_ps.windows(2).all(|w| w[0] <= w[1])
    }

    pub fn duration_s(&self) -> f64 {
        self.duration_ps as f64 * 1e-12
    }

    pub fn iter(&self) -> impl Iterator<Item = (i64, u16)> + '_ {
        self.times_ps
            .iter()
            .copied()
            .zip(self.channels.iter().copied())
    }

    /// Merge two sorted streams into one sorted stream. The duration is the
    /// larger of the two.
    pub fn merge(a: &TagStream, b: &TagStream) -> TagStream {
        let mut out = TagStream::new(a.duration_ps.max(b.duration_ps));
        out.times_ps.reserve(a.len() + b.len());
        out.channels.reserve(a.len() + b.len());
        let (mut i, mut j) = (0, 0);
        while i < a.len() && j < b.len() {
            if a.times_ps[i] <= b.times_ps[j] {
                out.push(a.times_ps[i], a.channels[i]);
                i += 1;
            } else {
                out.push(b.times_ps[j], b.channels[j]);
                j += 1;
            }
        }
        for k in i..a.len() {
            out.push(a.times_ps[k], a.channels[k]);
        }
        for k in j..b.len() {
            out.push(b.times_ps[k], b.channels[k]);
        }
        out
    }

    /// Extract the tags of one channel as a new stream.
    pub fn channel(&self, ch: u16) -> TagStream {
        let mut out = TagStream::new(self.duration_ps);
        for (t, c) in self.iter() {
            if c == ch {
                out.push(t, c);
            }
        }
        out
    }

    /// Channels present in the stream, ascending.
    pub fn channel_set(&self) -> Vec<u16> {
        let mut chs = self.channels.clone();
        chs.sort_unstable();
        chs.dedup();
        chs
    }
}
