//! File formats: tag streams (CSV and binary), histogram CSV, fit-result
//! text, field maps, and generic two-column point CSVs.
//!
//! Every writer/reader pair round-trips exactly: floats are printed with
//! Rust's shortest round-trip formatting, timestamps are integers.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::correlator::Histogram;
use crate::coupling::{FieldMap, C64};
use crate::fitter::FitResult;
use crate::tags::TagStream;
use crate::{Error, Result};

const TAG_MAGIC: &[u8; 4] = b"PTAG";
const TAG_VERSION: u16 = 1;

/// CSV tag format: a `# duration_ps=N` comment, the required
/// `channel,time_ps` header, then one record per line.
pub fn write_tags_csv(path: &Path, s: &TagStream) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "# duration_ps={}", s.duration_ps)?;
    writeln!(w, "channel,time_ps")?;
    for (t, ch) in s.iter() {
        writeln!(w, "{ch},{t}")?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_tags_csv(path: &Path) -> Result<TagStream> {
    let r = BufReader::new(File::open(path)?);
    let mut duration_ps: Option<i64> = None;
    let mut header_seen = false;
    let mut times = Vec::new();
    let mut channels = Vec::new();
    for (lineno, line) in r.lines().enumerate() {
        let line = line?;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(rest) = line.strip_prefix('#') {
            if let Some(v) = rest.trim().strip_prefix("duration_ps=") {
                duration_ps = Some(v.trim().parse().map_err(|_| {
                    Error::format(path, format!("line {}: bad duration", lineno + 1))
                })?);
            }
            continue;
        }
        if !header_seen {
            if line != "channel,time_ps" {
                return Err(Error::format(
                    path,
                    format!("expected header 'channel,time_ps', got '{line}'"),
                ));
            }
            header_seen = true;
            continue;
        }
        let (ch, t) = line.split_once(',').ok_or_else(|| {
            Error::format(path, format!("line {}: expected 'channel,time_ps'", lineno + 1))
        })?;
        channels.push(ch.trim().parse::<u16>().map_err(|_| {
            Error::format(path, format!("line {}: bad channel '{ch}'", lineno + 1))
        })?);
        times.push(t.trim().parse::<i64>().map_err(|_| {
            Error::format(path, format!("line {}: bad time '{t}'", lineno + 1))
        })?);
    }
    if !header_seen {
        return Err(Error::format(path, "missing 'channel,time_ps' header"));
    }
    let duration = duration_ps.unwrap_or_else(|| times.last().copied().unwrap_or(0));
    TagStream::from_parts(times, channels, duration)
        .map_err(|e| Error::format(path, e.to_string()))
}

/// Binary tag format: magic `PTAG`, version u16 LE, duration_ps i64 LE,
/// then records of {time_ps: i64 LE, channel: u16 LE, padding: u16 = 0}.
pub fn write_tags_binary(path: &Path, s: &TagStream) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(TAG_MAGIC)?;
    w.write_all(&TAG_VERSION.to_le_bytes())?;
    w.write_all(&s.duration_ps.to_le_bytes())?;
    for (t, ch) in s.iter() {
        w.write_all(&t.to_le_bytes())?;
        w.write_all(&ch.to_le_bytes())?;
        w.write_all(&[0u8, 0u8])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_tags_binary(path: &Path) -> Result<TagStream> {
    let mut bytes = Vec::new();
    BufReader::new(File::open(path)?).read_to_end(&mut bytes)?;
    if bytes.len() < 14 {
        return Err(Error::format(path, "file too short for a tag header"));
    }
    if &bytes[0..4] != TAG_MAGIC {
        return Err(Error::format(path, "bad magic, expected PTAG"));
    }
    let version = u16::from_le_bytes([bytes[4], bytes[5]]);
    if version != TAG_VERSION {
        return Err(Error::format(path, format!("unsupported version {version}")));
    }
    let duration_ps = i64::from_le_bytes(bytes[6..14].try_into().unwrap());
    let body = &bytes[14..];
    if body.len() % 12 != 0 {
        return Err(Error::format(path, "truncated record stream"));
    }
    let n = body.len() / 12;
    let mut times = Vec::with_capacity(n);
    let mut channels = Vec::with_capacity(n);
    for rec in body.chunks_exact(12) {
        times.push(i64::from_le_bytes(rec[0..8].try_into().unwrap()));
        channels.push(u16::from_le_bytes([rec[8], rec[9]]));
        if rec[10] != 0 || rec[11] != 0 {
            return Err(Error::format(path, "nonzero record padding"));
        }
    }
    TagStream::from_parts(times, channels, duration_ps)
        .map_err(|e| Error::format(path, e.to_string()))
}

/// Write a tag stream choosing the format by extension: `.csv` is the text
/// format, everything else the binary one.
pub fn write_tags(path: &Path, s: &TagStream) -> Result<()> {
    if path.extension().is_some_and(|e| e == "csv") {
        write_tags_csv(path, s)
    } else {
        write_tags_binary(path, s)
    }
}

pub fn read_tags(path: &Path) -> Result<TagStream> {
    if path.extension().is_some_and(|e| e == "csv") {
        read_tags_csv(path)
    } else {
        read_tags_binary(path)
    }
}

/// Histogram CSV with the header `bin_start_ps,bin_end_ps,counts,normalized`.
/// Unnormalized histograms write 0 in the normalized column; a column that
/// is identically zero reads back as unnormalized.
pub fn write_histogram_csv(path: &Path, h: &Histogram) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "bin_start_ps,bin_end_ps,counts,normalized")?;
    for i in 0..h.n_bins() {
        let start = h.bin_start_ps(i);
        let end = start + h.bin_width_ps;
        let norm = h.normalized.as_ref().map_or(0.0, |v| v[i]);
        writeln!(w, "{start},{end},{},{norm}", h.counts[i])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_histogram_csv(path: &Path) -> Result<Histogram> {
    let r = BufReader::new(File::open(path)?);
    let mut lines = r.lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::format(path, "empty file"))??;
    if header.trim() != "bin_start_ps,bin_end_ps,counts,normalized" {
        return Err(Error::format(
            path,
            format!("unexpected header '{}'", header.trim()),
        ));
    }
    let mut starts: Vec<i64> = Vec::new();
    let mut width: Option<i64> = None;
    let mut counts: Vec<u64> = Vec::new();
    let mut normalized: Vec<f64> = Vec::new();
    for (lineno, line) in lines.enumerate() {
        let line = line?;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 4 {
            return Err(Error::format(
                path,
                format!("line {}: expected 4 fields", lineno + 2),
            ));
        }
        let bad = |what: &str| Error::format(path, format!("line {}: bad {what}", lineno + 2));
        let start: i64 = fields[0].trim().parse().map_err(|_| bad("bin start"))?;
        let end: i64 = fields[1].trim().parse().map_err(|_| bad("bin end"))?;
        let c: u64 = fields[2].trim().parse().map_err(|_| bad("counts"))?;
        let v: f64 = fields[3].trim().parse().map_err(|_| bad("normalized"))?;
        let w = end - start;
        if w <= 0 {
            return Err(bad("bin width"));
        }
        match width {
            None => width = Some(w),
            Some(prev) if prev != w => {
                return Err(Error::format(path, "bins are not uniform"));
            }
            _ => {}
        }
        if let Some(&last) = starts.last() {
            if start != last + w {
                return Err(Error::format(path, "bins are not contiguous"));
            }
        }
        starts.push(start);
        counts.push(c);
        normalized.push(v);
    }
    let width = width.ok_or_else(|| Error::format(path, "no bins"))?;
    let first = starts[0];
    let last_end = starts[starts.len() - 1] + width;
    if first != -last_end {
        return Err(Error::format(
            path,
            format!("bins span [{first}, {last_end}), expected symmetry around 0"),
        ));
    }
    let normalized = if normalized.iter().any(|&v| v != 0.0) {
        Some(normalized)
    } else {
        None
    };
    Ok(Histogram {
        bin_width_ps: width,
        tau_max_ps: last_end,
        counts,
        normalized,
    })
}

/// Key/value fit-result text as written to disk and read back for
/// reporting: model name, convergence, χ²_red, per-parameter value/sigma
/// pairs, and optional derived quantities (values computed from the fit,
/// carrying no independent uncertainty).
#[derive(Debug, Clone, PartialEq)]
pub struct FitSummary {
    pub model: String,
    pub names: Vec<String>,
    pub params: Vec<f64>,
    pub sigma: Vec<f64>,
    pub derived: Vec<(String, f64)>,
    pub chi2_reduced: f64,
    pub iterations: usize,
    pub converged: bool,
}

impl FitSummary {
    pub fn of(model: &str, fit: &FitResult) -> Self {
        FitSummary {
            model: model.to_string(),
            names: fit.param_names.iter().map(|s| s.to_string()).collect(),
            params: fit.params.clone(),
            sigma: fit.sigma.clone(),
            derived: Vec::new(),
            chi2_reduced: fit.chi2_reduced,
            iterations: fit.iterations,
            converged: fit.converged,
        }
    }

    pub fn with_derived(mut self, name: &str, value: f64) -> Self {
        self.derived.push((name.to_string(), value));
        self
    }

    pub fn derived_value(&self, name: &str) -> Option<f64> {
        self.derived
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, v)| *v)
    }
}

pub fn write_fit_text(path: &Path, s: &FitSummary) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "model: {}", s.model)?;
    writeln!(w, "converged: {}", s.converged)?;
    writeln!(w, "iterations: {}", s.iterations)?;
    writeln!(w, "chi2_reduced: {}", s.chi2_reduced)?;
    for (i, name) in s.names.iter().enumerate() {
        writeln!(w, "param.{name}: {}", s.params[i])?;
        writeln!(w, "sigma.{name}: {}", s.sigma[i])?;
    }
    for (name, value) in &s.derived {
        writeln!(w, "derived.{name}: {value}")?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_fit_text(path: &Path) -> Result<FitSummary> {
    let r = BufReader::new(File::open(path)?);
    let mut model = None;
    let mut converged = None;
    let mut iterations = None;
    let mut chi2_reduced = None;
    let mut names: Vec<String> = Vec::new();
    let mut params: Vec<f64> = Vec::new();
    let mut sigma: Vec<f64> = Vec::new();
    let mut derived: Vec<(String, f64)> = Vec::new();
    for line in r.lines() {
        let line = line?;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once(':')
            .ok_or_else(|| Error::format(path, format!("expected 'key: value', got '{line}'")))?;
        let (key, value) = (key.trim(), value.trim());
        let bad = |what: &str| Error::format(path, format!("bad {what} '{value}'"));
        match key {
            "model" => model = Some(value.to_string()),
            "converged" => converged = Some(value.parse().map_err(|_| bad("converged"))?),
            "iterations" => iterations = Some(value.parse().map_err(|_| bad("iterations"))?),
            "chi2_reduced" => chi2_reduced = Some(value.parse().map_err(|_| bad("chi2"))?),
            _ => {
                if let Some(name) = key.strip_prefix("param.") {
                    names.push(name.to_string());
                    params.push(value.parse().map_err(|_| bad("param"))?);
                } else if let Some(name) = key.strip_prefix("sigma.") {
                    let idx = names.iter().position(|n| n == name).ok_or_else(|| {
                        Error::format(path, format!("sigma for unknown parameter '{name}'"))
                    })?;
                    if sigma.len() != idx {
                        return Err(Error::format(path, "sigma lines out of order"));
                    }
                    sigma.push(value.parse().map_err(|_| bad("sigma"))?);
                } else if let Some(name) = key.strip_prefix("derived.") {
                    derived.push((name.to_string(), value.parse().map_err(|_| bad("derived"))?));
                } else {
                    return Err(Error::format(path, format!("unknown key '{key}'")));
                }
            }
        }
    }
    let missing = |what: &str| Error::format(path, format!("missing '{what}'"));
    if sigma.len() != names.len() {
        return Err(Error::format(path, "missing sigma lines"));
    }
    Ok(FitSummary {
        model: model.ok_or_else(|| missing("model"))?,
        names,
        params,
        sigma,
        derived,
        chi2_reduced: chi2_reduced.ok_or_else(|| missing("chi2_reduced"))?,
        iterations: iterations.ok_or_else(|| missing("iterations"))?,
        converged: converged.ok_or_else(|| missing("converged"))?,
    })
}

/// Field map text: line 1 `nx ny dx_um dy_um`, then nx·ny `re im` lines in
/// row-major order.
pub fn write_field_map(path: &Path, f: &FieldMap) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "{} {} {} {}", f.nx, f.ny, f.dx_um, f.dy_um)?;
    for a in &f.amplitude {
        writeln!(w, "{} {}", a.re, a.im)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_field_map(path: &Path) -> Result<FieldMap> {
    let r = BufReader::new(File::open(path)?);
    let mut lines = r.lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::format(path, "empty file"))??;
    let parts: Vec<&str> = header.split_whitespace().collect();
    if parts.len() != 4 {
        return Err(Error::format(path, "expected 'nx ny dx_um dy_um'"));
    }
    let nx: usize = parts[0]
        .parse()
        .map_err(|_| Error::format(path, "bad nx"))?;
    let ny: usize = parts[1]
        .parse()
        .map_err(|_| Error::format(path, "bad ny"))?;
    let dx: f64 = parts[2]
        .parse()
        .map_err(|_| Error::format(path, "bad dx"))?;
    let dy: f64 = parts[3]
        .parse()
        .map_err(|_| Error::format(path, "bad dy"))?;
    let mut amplitude = Vec::with_capacity(nx * ny);
    for (lineno, line) in lines.enumerate() {
        let line = line?;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let (re, im) = line.split_once(char::is_whitespace).ok_or_else(|| {
            Error::format(path, format!("line {}: expected 're im'", lineno + 2))
        })?;
        let re: f64 = re
            .trim()
            .parse()
            .map_err(|_| Error::format(path, format!("line {}: bad re", lineno + 2)))?;
        let im: f64 = im
            .trim()
            .parse()
            .map_err(|_| Error::format(path, format!("line {}: bad im", lineno + 2)))?;
        amplitude.push(C64::new(re, im));
    }
    if amplitude.len() != nx * ny {
        return Err(Error::format(
            path,
            format!("expected {} samples, got {}", nx * ny, amplitude.len()),
        ));
    }
    FieldMap::new(nx, ny, dx, dy, amplitude).map_err(|e| Error::format(path, e.to_string()))
}

/// Two-column numeric CSV with an exact expected header.
pub fn read_xy_csv(path: &Path, expected_header: &str) -> Result<Vec<(f64, f64)>> {
    let r = BufReader::new(File::open(path)?);
    let mut lines = r.lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::format(path, "empty file"))??;
    if header.trim() != expected_header {
        return Err(Error::format(
            path,
            format!("expected header '{expected_header}', got '{}'", header.trim()),
        ));
    }
    let mut out = Vec::new();
    for (lineno, line) in lines.enumerate() {
        let line = line?;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let (x, y) = line.split_once(',').ok_or_else(|| {
            Error::format(path, format!("line {}: expected two fields", lineno + 2))
        })?;
        let x: f64 = x
            .trim()
            .parse()
            .map_err(|_| Error::format(path, format!("line {}: bad value", lineno + 2)))?;
        let y: f64 = y
            .trim()
            .parse()
            .map_err(|_| Error::format(path, format!("line {}: bad value", lineno + 2)))?;
        out.push((x, y));
    }
    Ok(out)
}

pub fn write_xy_csv(path: &Path, header: &str, points: &[(f64, f64)]) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "{header}")?;
    for (x, y) in points {
        writeln!(w, "{x},{y}")?;
    }
    w.flush()?;
    Ok(())
}
