//! Batch experiment runner: config parsing, grid sweeps and CSV output.

mod catalog;
mod config;

use std::io::Write;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

pub use catalog::{catalog, find, ExperimentInfo, ParamKind, ParamSchema, Point, RunContext};
pub use config::{
    build_spec, load_config, parse_config, parse_real, render_config, spec_from_doc, spec_to_doc, ConfigDoc, ConfigFormat, ExperimentSpec,
    ParamValue, Scalar,
};

use crate::{Error, Result};

/// Result table of a sweep; cells are already formatted.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
    /// Grid points that produced an error row.
    pub failures: usize,
}

/// Seed of grid point `index`: the first word of ChaCha8 stream `index` keyed
/// by the master seed. Independent of scheduling.
pub fn point_seed(master: u64, index: u64) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(master);
    rng.set_stream(index);
    rng.next_u64()
}

/// Grid points in row-major order, last parameter fastest.
pub fn grid_points(spec: &ExperimentSpec) -> Vec<Vec<(&str, &str)>> {
    let mut points: Vec<Vec<(&str, &str)>> = vec![Vec::new()];
    for (name, values) in &spec.grid {
        points = points
            .into_iter()
            .flat_map(|pt| {
                values.iter().map(move |v| {
                    let mut next = pt.clone();
                    next.push((name.as_str(), v.as_str()));
                    next
                })
            })
            .collect();
    }
    points
}

/// Runs every grid point in parallel and collects rows in grid order. A point
/// whose kernel fails yields an error row; the sweep continues.
pub fn run(spec: &ExperimentSpec) -> Result<Dataset> {
    let info = find(&spec.experiment)?;
    let points = grid_points(spec);
    let width = info.metrics.len();
    let rows: Vec<(Vec<String>, bool)> = points
        .par_iter()
        .enumerate()
        .map(|(i, values)| {
            let ctx = RunContext { trials: spec.trials, seed: point_seed(spec.seed, i as u64) };
            let pt = Point { values: values.clone() };
            let mut row: Vec<String> = values.iter().map(|(_, v)| v.to_string()).collect();
            let outcome = (info.kernel)(&pt, &ctx).and_then(|m| {
                if m.len() == width {
                    Ok(m)
                } else {
                    Err(Error::Precondition(format!("{} produced {} metrics, expected {width}", info.name, m.len())))
                }
            });
            match outcome {
                Ok(m) => {
                    row.extend(m.iter().map(|&x| format_g12(x)));
                    row.push("ok".into());
                    row.push(String::new());
                    (row, false)
                }
                Err(e) => {
                    row.extend(std::iter::repeat_n(String::new(), width));
                    row.push("error".into());
                    row.push(e.to_string());
                    (row, true)
                }
            }
        })
        .collect();
    let mut header: Vec<String> = spec.grid.iter().map(|(n, _)| n.clone()).collect();
    header.extend(info.metrics.iter().map(|m| m.to_string()));
    header.push("status".into());
    header.push("error".into());
    let failures = rows.iter().filter(|(_, bad)| *bad).count();
    Ok(Dataset { header, rows: rows.into_iter().map(|(r, _)| r).collect(), failures })
}

pub fn write_csv<W: Write>(data: &Dataset, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let io = |e: csv::Error| Error::Io(e.to_string());
    w.write_record(&data.header).map_err(io)?;
    for row in &data.rows {
        w.write_record(row).map_err(io)?;
    }
    w.flush().map_err(|e| Error::Io(e.to_string()))
}

pub fn to_csv_string(data: &Dataset) -> Result<String> {
    let mut buf = Vec::new();
    write_csv(data, &mut buf)?;
    String::from_utf8(buf).map_err(|e| Error::Io(e.to_string()))
}

/// `%.12g`: 12 significant digits, trailing zeros dropped, exponent form
/// outside 1e-5 ≤ |x| < 1e12.
pub fn format_g12(x: f64) -> String {
    const P: i32 = 12;
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return "0".into();
    }
    let sci = format!("{:.*e}", (P - 1) as usize, x);
    let (mantissa, exp) = sci.split_once('e').expect("exponent form");
    let exp: i32 = exp.parse().expect("integer exponent");
    if (-5..P).contains(&exp) {
        trim_zeros(format!("{:.*}", (P - 1 - exp) as usize, x))
    } else {
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{}e{sign}{:02}", trim_zeros(mantissa.to_string()), exp.abs())
    }
}

fn trim_zeros(s: String) -> String {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn g12_formatting() {
        assert_eq!(format_g12(0.75), "0.75");
        assert_eq!(format_g12(1.0), "1");
        assert_eq!(format_g12(-0.0), "0");
        assert_eq!(format_g12(std::f64::consts::PI), "3.14159265359");
        assert_eq!(format_g12(1.0 / 3.0), "0.333333333333");
        assert_eq!(format_g12(1e-7), "1e-07");
        assert_eq!(format_g12(123456789012345.0), "1.23456789012e+14");
        assert_eq!(format_g12(0.0001), "0.0001");
        assert_eq!(format_g12(f64::INFINITY), "inf");
        assert_eq!(format_g12(0.99999999999999), "1");
    }

    #[test]
    fn point_seeds_are_distinct() {
        let a: Vec<u64> = (0..64).map(|i| point_seed(5, i)).collect();
        let mut b = a.clone();
        b.sort_unstable();
        b.dedup();
        assert_eq!(a.len(), b.len());
        assert_eq!(point_seed(5, 3), a[3]);
    }
}
