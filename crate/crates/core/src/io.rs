//! CSV and JSON formats, and the `start:stop:step` grid syntax.

use std::io::{Read, Write};

use serde::Deserialize;

use crate::error::{Error, Result};
use crate::fisher::FisherCurve;
use crate::inference::{CalibrationResult, CouplerSample, FitResult, JointCell, JointDistribution, PhasePoint};
use crate::rates::{Provenance, RatePoint, RateTable};

pub const RATE_TABLE_HEADER: [&str; 8] = ["phi", "s1", "s2", "h1", "h2", "prob", "trials", "count"];
pub const FISHER_CURVE_HEADER: [&str; 5] = ["phi", "F", "F_tilde", "band_lo", "band_hi"];
pub const JOINT_DIST_HEADER: [&str; 6] = ["power", "x", "y", "prob", "trials", "count"];
pub const COUPLER_HEADER: [&str; 3] = ["x", "r10", "r01"];

/// Largest number of points a grid spec may expand to.
pub const MAX_GRID_POINTS: usize = 1_000_000;

fn parse_grid_value(token: &str) -> Result<f64> {
    let t = token.trim();
    let bad = || Error::Parse(format!("invalid grid value {t:?}"));
    let value = if let Some(prefix) = t.strip_suffix("pi") {
        let factor = match prefix.trim() {
            "" | "+" => 1.0,
            "-" => -1.0,
            p => p.trim_end_matches('*').parse::<f64>().map_err(|_| bad())?,
        };
        factor * std::f64::consts::PI
    } else {
        t.parse::<f64>().map_err(|_| bad())?
    };
    if value.is_finite() {
        Ok(value)
    } else {
        Err(bad())
    }
}

/// Expands `start:stop:step` into an inclusive grid. Values may be plain
/// numbers or multiples of `pi` (`pi`, `-pi`, `0.5pi`, `0.5*pi`). A single
/// value gives a one-point grid.
pub fn parse_grid(spec: &str) -> Result<Vec<f64>> {
    let parts: Vec<&str> = spec.split(':').collect();
    match parts.as_slice() {
        [single] => Ok(vec![parse_grid_value(single)?]),
        [start, stop, step] => {
            let (start, stop, step) = (
                parse_grid_value(start)?,
                parse_grid_value(stop)?,
                parse_grid_value(step)?,
            );
            if step <= 0.0 {
                return Err(Error::Parse(format!("grid step must be positive, got {step}")));
            }
            if stop < start {
                return Err(Error::Parse(format!("grid stop {stop} is below start {start}")));
            }
            let intervals = ((stop - start) / step + 1e-9).floor();
            if !intervals.is_finite() || intervals + 1.0 > MAX_GRID_POINTS as f64 {
                return Err(Error::Parse(format!("grid {spec:?} has too many points")));
            }
            let n = intervals as usize;
            Ok((0..=n).map(|i| start + step * i as f64).collect())
        }
        _ => Err(Error::Parse(format!("grid spec {spec:?} is not start:stop:step"))),
    }
}

/// Comment lines written before every CSV output.
pub fn header_comment(command: &str, config_json: &str, timestamp: bool) -> String {
    let mut out = format!("# ghb {command}\n");
    if timestamp {
        let secs = std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0);
        out.push_str(&format!("# generated-unix: {secs}\n"));
    }
    out.push_str(&format!("# config: {config_json}\n"));
    out
}

fn reader<R: Read>(input: R) -> csv::Reader<R> {
    csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(input)
}

fn check_header(found: &csv::StringRecord, expected: &[&str]) -> Result<()> {
    if found.iter().ne(expected.iter().copied()) {
        return Err(Error::Parse(format!(
            "expected header {}, found {}",
            expected.join(","),
            found.iter().collect::<Vec<_>>().join(",")
        )));
    }
    Ok(())
}

fn check_probability(value: f64, line: u64) -> Result<()> {
    if !(value.is_finite() && (0.0..=1.0).contains(&value)) {
        return Err(Error::Parse(format!("line {line}: probability {value} outside [0, 1]")));
    }
    Ok(())
}

fn check_counts(trials: Option<u64>, count: Option<u64>, line: u64) -> Result<()> {
    match (trials, count) {
        (None, Some(_)) => Err(Error::Parse(format!("line {line}: count without trials"))),
        (Some(t), Some(c)) if c > t => Err(Error::Parse(format!("line {line}: count {c} exceeds trials {t}"))),
        _ => Ok(()),
    }
}

#[derive(Deserialize)]
struct RateRow {
    phi: f64,
    s1: usize,
    s2: usize,
    h1: usize,
    h2: usize,
    prob: f64,
    trials: Option<u64>,
    count: Option<u64>,
}

pub fn read_rate_table<R: Read>(input: R, provenance: Provenance) -> Result<RateTable> {
    let mut rdr = reader(input);
    check_header(rdr.headers()?, &RATE_TABLE_HEADER)?;
    let mut points = Vec::new();
    for row in rdr.deserialize::<RateRow>() {
        let r = row?;
        let line = points.len() as u64 + 2;
        if !r.phi.is_finite() {
            return Err(Error::Parse(format!("line {line}: non-finite phase")));
        }
        check_probability(r.prob, line)?;
        check_counts(r.trials, r.count, line)?;
        points.push(RatePoint {
            phi: r.phi,
            s1: r.s1,
            s2: r.s2,
            h1: r.h1,
            h2: r.h2,
            prob: r.prob,
            trials: r.trials,
            count: r.count,
        });
    }
    Ok(RateTable { points, provenance })
}

fn opt<T: ToString>(v: Option<T>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub fn write_rate_table<W: Write>(out: &mut W, table: &RateTable) -> Result<()> {
    writeln!(out, "{}", RATE_TABLE_HEADER.join(","))?;
    for p in &table.points {
        writeln!(
            out,
            "{},{},{},{},{},{:.16e},{},{}",
            p.phi,
            p.s1,
            p.s2,
            p.h1,
            p.h2,
            p.prob,
            opt(p.trials),
            opt(p.count)
        )?;
    }
    Ok(())
}

pub fn write_fisher_curve<W: Write>(out: &mut W, curve: &FisherCurve) -> Result<()> {
    writeln!(out, "{}", FISHER_CURVE_HEADER.join(","))?;
    for i in 0..curve.len() {
        let band = |b: &Option<Vec<f64>>| b.as_ref().map(|v| format!("{:.12e}", v[i])).unwrap_or_default();
        writeln!(
            out,
            "{},{:.12e},{:.12e},{},{}",
            curve.phi[i],
            curve.fisher[i],
            curve.f_tilde[i],
            band(&curve.band_lo),
            band(&curve.band_hi)
        )?;
    }
    Ok(())
}

#[derive(Deserialize)]
struct JointRow {
    power: f64,
    x: usize,
    y: usize,
    prob: f64,
    trials: Option<u64>,
    count: Option<u64>,
}

/// Joint herald/signal distributions, grouped by pump power in order of
/// first appearance.
pub fn read_joint_distributions<R: Read>(input: R) -> Result<Vec<JointDistribution>> {
    let mut rdr = reader(input);
    check_header(rdr.headers()?, &JOINT_DIST_HEADER)?;
    let mut out: Vec<JointDistribution> = Vec::new();
    for (i, row) in rdr.deserialize::<JointRow>().enumerate() {
        let r = row?;
        let line = i as u64 + 2;
        if !r.power.is_finite() {
            return Err(Error::Parse(format!("line {line}: non-finite power")));
        }
        check_probability(r.prob, line)?;
        check_counts(r.trials, r.count, line)?;
        let cell = JointCell {
            x: r.x,
            y: r.y,
            prob: r.prob,
            trials: r.trials,
            count: r.count,
        };
        match out.iter_mut().find(|d| d.power == r.power) {
            Some(d) => d.cells.push(cell),
            None => out.push(JointDistribution {
                power: r.power,
                cells: vec![cell],
            }),
        }
    }
    Ok(out)
}

pub fn write_joint_distributions<W: Write>(out: &mut W, dists: &[JointDistribution]) -> Result<()> {
    writeln!(out, "{}", JOINT_DIST_HEADER.join(","))?;
    for d in dists {
        for c in &d.cells {
            writeln!(
                out,
                "{},{},{},{:.16e},{},{}",
                d.power,
                c.x,
                c.y,
                c.prob,
                opt(c.trials),
                opt(c.count)
            )?;
        }
    }
    Ok(())
}

pub fn read_coupler_samples<R: Read>(input: R) -> Result<Vec<CouplerSample>> {
    let mut rdr = reader(input);
    check_header(rdr.headers()?, &COUPLER_HEADER)?;
    let mut out = Vec::new();
    for row in rdr.deserialize::<CouplerSample>() {
        let s = row?;
        let line = out.len() + 2;
        if !(s.x.is_finite() && s.r10.is_finite() && s.r01.is_finite()) || s.r10 < 0.0 || s.r01 < 0.0 {
            return Err(Error::Parse(format!(
                "line {line}: rates must be finite and non-negative"
            )));
        }
        out.push(s);
    }
    Ok(out)
}

pub fn write_phase_map<W: Write>(out: &mut W, points: &[PhasePoint]) -> Result<()> {
    writeln!(out, "x,T,T_corr,phi")?;
    for p in points {
        let f = |v: Option<f64>| v.map(|x| format!("{x:.12e}")).unwrap_or_default();
        writeln!(out, "{},{},{},{}", p.x, f(p.t), f(p.t_corr), f(p.phi))?;
    }
    Ok(())
}

/// Parses and range-checks a fit result document.
pub fn read_fit_result(json: &str) -> Result<FitResult> {
    let fit: FitResult = serde_json::from_str(json)?;
    fit.params.validate_ranges()?;
    if !(fit.residual.is_finite() && fit.residual >= 0.0) {
        return Err(Error::Parse(format!("invalid residual {}", fit.residual)));
    }
    Ok(fit)
}

pub fn write_json<W: Write, T: serde::Serialize>(out: &mut W, value: &T) -> Result<()> {
    serde_json::to_writer_pretty(&mut *out, value)?;
    writeln!(out)?;
    Ok(())
}

pub fn read_calibration_result(json: &str) -> Result<CalibrationResult> {
    Ok(serde_json::from_str(json)?)
}
