//! CSV ingestion and emission, plus JSON and SVG output helpers.
//!
//! CSV files are comma-separated with one header row; lines starting with `#` are comments.
//! Numbers are written in shortest round-trip exponent form, so writing then reading a file
//! reproduces every value bit for bit.

use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use num_complex::Complex64;
use serde::Serialize;

use crate::bias::Bias;
use crate::error::{Error, Result};
use crate::gain::{PowerTrace, SpectrumTrace};
use crate::montecarlo::RangeStudyResult;
use crate::reflection::ReflectionTrace;

pub const REFLECTION_HEADER: [&str; 4] = ["bias_voltage_V", "frequency_Hz", "re_gamma", "im_gamma"];
pub const POWER_HEADER: [&str; 3] = ["bias_voltage_V", "power_W", "sigma_W"];
pub const SPECTRUM_HEADER: [&str; 2] = ["frequency_Hz", "psd_W_per_Hz"];
pub const RANGE_STUDY_HEADER: [&str; 4] = [
    "upper_bound_V",
    "mean_rel_error",
    "mean_reported_sigma",
    "n_failed",
];

/// Shortest representation that parses back to the same `f64`.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:e}")
}

fn parse_f64(field: &str, line: u64, column: &str) -> Result<f64> {
    field.trim().parse::<f64>().map_err(|_| {
        Error::input(format!(
            "line {line}: cannot parse {column} value {field:?}"
        ))
    })
}

fn reader<R: Read>(input: R) -> csv::Reader<R> {
    csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .flexible(false)
        .from_reader(input)
}

fn check_header<R: Read>(rdr: &mut csv::Reader<R>, accepted: &[&[&str]]) -> Result<usize> {
    let header = rdr.headers()?.clone();
    let names: Vec<&str> = header.iter().collect();
    accepted
        .iter()
        .find(|h| h.as_ref() == names.as_slice())
        .map(|h| h.len())
        .ok_or_else(|| {
            Error::input(format!(
                "unexpected CSV header {:?}; expected {:?}",
                names.join(","),
                accepted[0].join(",")
            ))
        })
}

/// Rows of floats, with the 1-based source line of each row.
fn read_rows<R: Read>(input: R, accepted: &[&[&str]]) -> Result<(usize, Vec<(u64, Vec<f64>)>)> {
    let mut rdr = reader(input);
    let width = check_header(&mut rdr, accepted)?;
    let names: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
    let mut rows = Vec::new();
    for record in rdr.records() {
        let record = record?;
        let line = record.position().map_or(0, |p| p.line());
        let values = record
            .iter()
            .zip(&names)
            .map(|(f, n)| parse_f64(f, line, n))
            .collect::<Result<Vec<_>>>()?;
        rows.push((line, values));
    }
    if rows.is_empty() {
        return Err(Error::input("CSV file contains no data rows"));
    }
    Ok((width, rows))
}

fn write_rows<W: Write>(
    mut out: W,
    comments: &[String],
    header: &[&str],
    rows: impl Iterator<Item = Vec<String>>,
) -> Result<()> {
    for c in comments {
        for line in c.lines() {
            writeln!(out, "# {line}")?;
        }
    }
    let mut wtr = csv::Writer::from_writer(out);
    wtr.write_record(header)?;
    for row in rows {
        wtr.write_record(&row)?;
    }
    wtr.flush()?;
    Ok(())
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            std::fs::create_dir_all(dir)?;
        }
    }
    Ok(BufWriter::new(File::create(path)?))
}

fn open(path: &Path) -> Result<File> {
    File::open(path).map_err(|e| Error::input(format!("cannot open {}: {e}", path.display())))
}

/// Reads one or more bias blocks. Rows sharing a bias value form one trace, in order of first
/// appearance.
pub fn read_reflection<R: Read>(input: R) -> Result<Vec<ReflectionTrace>> {
    let (_, rows) = read_rows(input, &[&REFLECTION_HEADER])?;
    let mut blocks: Vec<(f64, Vec<f64>, Vec<Complex64>)> = Vec::new();
    for (_, r) in rows {
        let idx = match blocks.iter().position(|b| b.0 == r[0]) {
            Some(i) => i,
            None => {
                blocks.push((r[0], Vec::new(), Vec::new()));
                blocks.len() - 1
            }
        };
        blocks[idx].1.push(r[1]);
        blocks[idx].2.push(Complex64::new(r[2], r[3]));
    }
    blocks
        .into_iter()
        .map(|(b, f, v)| ReflectionTrace::new(Bias::full(b), f, v))
        .collect()
}

pub fn write_reflection<W: Write>(
    out: W,
    traces: &[ReflectionTrace],
    comments: &[String],
) -> Result<()> {
    let rows = traces.iter().flat_map(|t| {
        t.frequencies.iter().zip(&t.values).map(move |(f, v)| {
            vec![
                fmt_f64(t.bias.full_voltage()),
                fmt_f64(*f),
                fmt_f64(v.re),
                fmt_f64(v.im),
            ]
        })
    });
    write_rows(out, comments, &REFLECTION_HEADER, rows)
}

pub fn read_power<R: Read>(input: R) -> Result<PowerTrace> {
    let (width, rows) = read_rows(input, &[&POWER_HEADER, &POWER_HEADER[..2]])?;
    let bias = rows.iter().map(|(_, r)| Bias::full(r[0])).collect();
    let power = rows.iter().map(|(_, r)| r[1]).collect();
    let sigma = (width == 3).then(|| rows.iter().map(|(_, r)| r[2]).collect());
    PowerTrace::new(bias, power, sigma)
}

pub fn write_power<W: Write>(out: W, trace: &PowerTrace, comments: &[String]) -> Result<()> {
    let header = if trace.sigma.is_some() {
        &POWER_HEADER[..]
    } else {
        &POWER_HEADER[..2]
    };
    let rows = (0..trace.len()).map(|k| {
        let mut row = vec![
            fmt_f64(trace.bias[k].full_voltage()),
            fmt_f64(trace.power[k]),
        ];
        if let Some(s) = &trace.sigma {
            row.push(fmt_f64(s[k]));
        }
        row
    });
    write_rows(out, comments, header, rows)
}

/// Reads a spectrum; the integration band is supplied separately in Hz.
pub fn read_spectrum<R: Read>(input: R, band: (f64, f64)) -> Result<SpectrumTrace> {
    let (_, rows) = read_rows(input, &[&SPECTRUM_HEADER])?;
    Ok(SpectrumTrace {
        frequencies: rows.iter().map(|(_, r)| r[0]).collect(),
        spectral_density: rows.iter().map(|(_, r)| r[1]).collect(),
        band,
    })
}

pub fn write_spectrum<W: Write>(
    out: W,
    spectrum: &SpectrumTrace,
    comments: &[String],
) -> Result<()> {
    let rows = spectrum
        .frequencies
        .iter()
        .zip(&spectrum.spectral_density)
        .map(|(f, d)| vec![fmt_f64(*f), fmt_f64(*d)]);
    write_rows(out, comments, &SPECTRUM_HEADER, rows)
}

/// One line of the range-study CSV. Missing statistics (all fits failed) are empty fields.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RangeStudyLine {
    pub upper_bound: Bias,
    pub mean_rel_error: Option<f64>,
    pub mean_reported_sigma: Option<f64>,
    pub n_failed: usize,
}

pub fn range_study_lines(study: &RangeStudyResult) -> Vec<RangeStudyLine> {
    study
        .rows
        .iter()
        .map(|r| RangeStudyLine {
            upper_bound: r.upper_bound,
            mean_rel_error: r.mean_rel_error,
            mean_reported_sigma: r.mean_reported_sigma,
            n_failed: r.n_failed,
        })
        .collect()
}

pub fn write_range_study<W: Write>(
    out: W,
    lines: &[RangeStudyLine],
    comments: &[String],
) -> Result<()> {
    let opt = |v: Option<f64>| v.map(fmt_f64).unwrap_or_default();
    let rows = lines.iter().map(|l| {
        vec![
            fmt_f64(l.upper_bound.full_voltage()),
            opt(l.mean_rel_error),
            opt(l.mean_reported_sigma),
            l.n_failed.to_string(),
        ]
    });
    write_rows(out, comments, &RANGE_STUDY_HEADER, rows)
}

pub fn read_range_study<R: Read>(input: R) -> Result<Vec<RangeStudyLine>> {
    let mut rdr = reader(input);
    check_header(&mut rdr, &[&RANGE_STUDY_HEADER])?;
    let mut lines = Vec::new();
    for record in rdr.records() {
        let record = record?;
        let line = record.position().map_or(0, |p| p.line());
        let opt = |i: usize| -> Result<Option<f64>> {
            match record[i].trim() {
                "" => Ok(None),
                f => parse_f64(f, line, RANGE_STUDY_HEADER[i]).map(Some),
            }
        };
        lines.push(RangeStudyLine {
            upper_bound: Bias::full(parse_f64(&record[0], line, RANGE_STUDY_HEADER[0])?),
            mean_rel_error: opt(1)?,
            mean_reported_sigma: opt(2)?,
            n_failed: record[3]
                .trim()
                .parse()
                .map_err(|_| Error::input(format!("line {line}: bad n_failed {:?}", &record[3])))?,
        });
    }
    Ok(lines)
}

pub fn read_reflection_file(path: &Path) -> Result<Vec<ReflectionTrace>> {
    read_reflection(open(path)?)
}

pub fn write_reflection_file(
    path: &Path,
    traces: &[ReflectionTrace],
    comments: &[String],
) -> Result<()> {
    write_reflection(create(path)?, traces, comments)
}

pub fn read_power_file(path: &Path) -> Result<PowerTrace> {
    read_power(open(path)?)
}

pub fn write_power_file(path: &Path, trace: &PowerTrace, comments: &[String]) -> Result<()> {
    write_power(create(path)?, trace, comments)
}

pub fn read_spectrum_file(path: &Path, band: (f64, f64)) -> Result<SpectrumTrace> {
    read_spectrum(open(path)?, band)
}

pub fn write_spectrum_file(
    path: &Path,
    spectrum: &SpectrumTrace,
    comments: &[String],
) -> Result<()> {
    write_spectrum(create(path)?, spectrum, comments)
}

pub fn write_range_study_file(
    path: &Path,
    lines: &[RangeStudyLine],
    comments: &[String],
) -> Result<()> {
    write_range_study(create(path)?, lines, comments)
}

pub fn read_range_study_file(path: &Path) -> Result<Vec<RangeStudyLine>> {
    read_range_study(open(path)?)
}

/// Writes `rows` under `header` with optional comment lines.
pub fn write_table(
    path: &Path,
    header: &[&str],
    rows: &[Vec<f64>],
    comments: &[String],
) -> Result<()> {
    write_rows(
        create(path)?,
        comments,
        header,
        rows.iter().map(|r| r.iter().map(|v| fmt_f64(*v)).collect()),
    )
}

/// Pretty-printed JSON with a trailing newline.
pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut out = create(path)?;
    serde_json::to_writer_pretty(&mut out, value)?;
    writeln!(out)?;
    out.flush()?;
    Ok(())
}

/// A polyline-and-markers plot, written as a standalone SVG.
pub struct SvgPlot<'a> {
    pub title: &'a str,
    pub x_label: &'a str,
    pub y_label: &'a str,
    /// Drawn as circles.
    pub points: &'a [(f64, f64)],
    /// Drawn as a line.
    pub curve: &'a [(f64, f64)],
}

impl SvgPlot<'_> {
    pub fn render(&self) -> String {
        let (w, h, m) = (640.0, 440.0, 60.0);
        let all = self
            .points
            .iter()
            .chain(self.curve)
            .filter(|(x, y)| x.is_finite() && y.is_finite());
        let (mut x0, mut x1, mut y0, mut y1) = (f64::MAX, f64::MIN, f64::MAX, f64::MIN);
        for (x, y) in all {
            x0 = x0.min(*x);
            x1 = x1.max(*x);
            y0 = y0.min(*y);
            y1 = y1.max(*y);
        }
        if !(x1 > x0) {
            x1 = x0 + 1.0;
        }
        if !(y1 > y0) {
            y1 = y0 + 1.0;
        }
        let sx = |x: f64| m + (x - x0) / (x1 - x0) * (w - 2.0 * m);
        let sy = |y: f64| h - m - (y - y0) / (y1 - y0) * (h - 2.0 * m);
        let mut s = format!(
            "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{h}\" font-family=\"sans-serif\" font-size=\"12\">\n\
             <rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n\
             <rect x=\"{m}\" y=\"{m}\" width=\"{}\" height=\"{}\" fill=\"none\" stroke=\"black\"/>\n\
             <text x=\"{}\" y=\"30\" text-anchor=\"middle\">{}</text>\n\
             <text x=\"{}\" y=\"{}\" text-anchor=\"middle\">{}</text>\n\
             <text x=\"15\" y=\"{}\" transform=\"rotate(-90 15 {})\" text-anchor=\"middle\">{}</text>\n",
            w - 2.0 * m,
            h - 2.0 * m,
            w / 2.0,
            self.title,
            w / 2.0,
            h - 15.0,
            self.x_label,
            h / 2.0,
            h / 2.0,
            self.y_label
        );
        for (v, x, y, anchor) in [
            (x0, sx(x0), h - m + 16.0, "start"),
            (x1, sx(x1), h - m + 16.0, "end"),
        ] {
            s += &format!(
                "<text x=\"{x:.1}\" y=\"{y:.1}\" text-anchor=\"{anchor}\">{v:.3e}</text>\n"
            );
        }
        for (v, y) in [(y0, sy(y0)), (y1, sy(y1))] {
            s += &format!(
                "<text x=\"{:.1}\" y=\"{y:.1}\" text-anchor=\"end\">{v:.3e}</text>\n",
                m - 4.0
            );
        }
        if !self.curve.is_empty() {
            let pts: Vec<String> = self
                .curve
                .iter()
                .map(|(x, y)| format!("{:.2},{:.2}", sx(*x), sy(*y)))
                .collect();
            s += &format!("<polyline fill=\"none\" stroke=\"firebrick\" stroke-width=\"1.5\" points=\"{}\"/>\n", pts.join(" "));
        }
        for (x, y) in self.points {
            s += &format!(
                "<circle cx=\"{:.2}\" cy=\"{:.2}\" r=\"3\" fill=\"steelblue\"/>\n",
                sx(*x),
                sy(*y)
            );
        }
        s + "</svg>\n"
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let mut out = create(path)?;
        out.write_all(self.render().as_bytes())?;
        out.flush()?;
        Ok(())
    }
}
