use std::io::{BufRead, Write};

use super::{ActionKey, ActionSeries, C64, SqrtKey, SqrtSeries};
use crate::error::{Error, Result};

/// A serialized series of either representation kind.
#[derive(Clone, Debug, PartialEq)]
pub enum SeriesFile {
    Sqrt(SqrtSeries),
    Action(ActionSeries),
}

/// Writes one term per line as `ℓ1 ℓ2 k1 k2 re im` after a header carrying the
/// representation kind and caps. Coefficients are printed in the shortest
/// decimal form that round-trips the underlying binary double, so
/// write-then-read is bit-exact.
pub fn write_series<W: Write>(series: &SeriesFile, out: &mut W) -> Result<()> {
    match series {
        SeriesFile::Sqrt(s) => {
            writeln!(out, "# pseries kind=sqrt degree_cap={}", s.degree_cap())?;
            for (key, c) in s.terms() {
                writeln!(
                    out,
                    "{} {} {} {} {} {}",
                    key.l[0], key.l[1], key.k[0], key.k[1], c.re, c.im
                )?;
            }
        }
        SeriesFile::Action(s) => {
            writeln!(
                out,
                "# pseries kind=action action_cap={} fourier_cap={}",
                s.action_cap(),
                s.fourier_cap()
            )?;
            for (key, c) in s.terms() {
                writeln!(
                    out,
                    "{} {} {} {} {} {}",
                    key.j[0], key.j[1], key.k[0], key.k[1], c.re, c.im
                )?;
            }
        }
    }
    Ok(())
}

pub fn read_series<R: BufRead>(input: &mut R) -> Result<SeriesFile> {
    let mut header = String::new();
    input.read_line(&mut header)?;
    let header = header.trim();
    let fields: Vec<&str> = header.split_whitespace().collect();
    if fields.len() < 3 || fields[0] != "#" || fields[1] != "pseries" {
        return Err(Error::Parse(format!("bad series header: {header:?}")));
    }
    let mut kind = None;
    let mut caps = std::collections::HashMap::new();
    for field in &fields[2..] {
        let (name, value) = field
            .split_once('=')
            .ok_or_else(|| Error::Parse(format!("bad header field {field:?}")))?;
        if name == "kind" {
            kind = Some(value.to_string());
        } else {
            let v: u32 =
                value.parse().map_err(|_| Error::Parse(format!("bad cap value {field:?}")))?;
            caps.insert(name.to_string(), v);
        }
    }
    let cap = |name: &str| -> Result<u32> {
        caps.get(name).copied().ok_or_else(|| Error::Parse(format!("missing cap {name}")))
    };

    match kind.as_deref() {
        Some("sqrt") => {
            let mut s = SqrtSeries::new(cap("degree_cap")?);
            for line in input.lines() {
                let line = line?;
                let line = line.trim();
                if line.is_empty() || line.starts_with('#') {
                    continue;
                }
                let (l, k, c) = parse_term(line)?;
                s.insert(SqrtKey::new([l[0] as u8, l[1] as u8], [k[0] as i8, k[1] as i8]), c)?;
            }
            Ok(SeriesFile::Sqrt(s))
        }
        Some("action") => {
            let mut s = ActionSeries::new(cap("action_cap")?, cap("fourier_cap")?);
            for line in input.lines() {
                let line = line?;
                let line = line.trim();
                if line.is_empty() || line.starts_with('#') {
                    continue;
                }
                let (j, k, c) = parse_term(line)?;
                s.insert(ActionKey::new([j[0] as u8, j[1] as u8], [k[0] as i16, k[1] as i16]), c);
            }
            Ok(SeriesFile::Action(s))
        }
        other => Err(Error::Parse(format!("unknown series kind {other:?}"))),
    }
}

fn parse_term(line: &str) -> Result<([i32; 2], [i32; 2], C64)> {
    let fields: Vec<&str> = line.split_whitespace().collect();
    if fields.len() != 6 {
        return Err(Error::Parse(format!("expected 6 fields, got {}: {line:?}", fields.len())));
    }
    let int = |s: &str| -> Result<i32> {
        s.parse().map_err(|_| Error::Parse(format!("bad integer {s:?} in {line:?}")))
    };
    let real = |s: &str| -> Result<f64> {
        s.parse().map_err(|_| Error::Parse(format!("bad real {s:?} in {line:?}")))
    };
    Ok((
        [int(fields[0])?, int(fields[1])?],
        [int(fields[2])?, int(fields[3])?],
        C64::new(real(fields[4])?, real(fields[5])?),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sqrt_round_trip_is_bit_exact() {
        let mut s = SqrtSeries::new(8);
        s.insert(SqrtKey::new([3, 2], [-1, 2]), C64::new(0.1, -0.30000000000000004)).unwrap();
        s.insert(SqrtKey::new([0, 0], [0, 0]), C64::new(1.0 / 3.0, 1e-300)).unwrap();
        s.insert(SqrtKey::new([1, 0], [1, 0]), C64::new(-0.0, 2.2250738585072014e-308)).unwrap();
        let mut buf = Vec::new();
        write_series(&SeriesFile::Sqrt(s.clone()), &mut buf).unwrap();
        let got = read_series(&mut buf.as_slice()).unwrap();
        assert_eq!(got, SeriesFile::Sqrt(s));
    }

    #[test]
    fn action_round_trip_is_bit_exact() {
        let mut s = ActionSeries::new(2, 12);
        s.insert(ActionKey::new([2, 0], [0, 0]), C64::new(std::f64::consts::PI, 0.0));
        s.insert(ActionKey::new([0, 1], [5, -7]), C64::new(-1.7e-15, 2.9999999999999996));
        let mut buf = Vec::new();
        write_series(&SeriesFile::Action(s.clone()), &mut buf).unwrap();
        let got = read_series(&mut buf.as_slice()).unwrap();
        assert_eq!(got, SeriesFile::Action(s));
    }

    #[test]
    fn rejects_malformed_input() {
        let bad = "# pseries kind=sqrt\n0 0 0 0 1.0 0.0\n";
        assert!(read_series(&mut bad.as_bytes()).is_err());
        let bad = "# pseries kind=nope degree_cap=4\n";
        assert!(read_series(&mut bad.as_bytes()).is_err());
        let bad = "# pseries kind=sqrt degree_cap=4\n0 0 0 1.0 0.0\n";
        assert!(read_series(&mut bad.as_bytes()).is_err());
    }
}
