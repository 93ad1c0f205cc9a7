use std::io::{BufRead, Write};

use num_complex::Complex64;

use super::{Domain, Field, FieldData, Grid};
use crate::error::{Error, Result};

/// Writes the columnar text form: `#` header lines, then one row per site
/// holding its coordinates followed by the real and imaginary parts.
pub fn write_field(field: &Field, mut out: impl Write) -> Result<()> {
    let g = field.grid();
    writeln!(out, "# dim {}", g.dim())?;
    writeln!(out, "# points {}", g.points_per_axis())?;
    writeln!(out, "# half_width {:.17e}", g.half_width())?;
    let domain = match field.domain() {
        Domain::Space => "space",
        Domain::Frequency => "frequency",
    };
    writeln!(out, "# domain {domain}")?;
    match field.data() {
        FieldData::DiracDelta(c) => {
            writeln!(out, "# kind dirac")?;
            let c: Vec<String> = c.iter().map(|v| format!("{v:.17e}")).collect();
            writeln!(out, "# center {}", c.join(" "))?;
        }
        FieldData::Sampled(samples) => {
            writeln!(out, "# kind sampled")?;
            for (i, z) in samples.iter().enumerate() {
                let coords = match field.domain() {
                    Domain::Space => g.position(i),
                    Domain::Frequency => g.wavevector(i),
                };
                for c in coords {
                    write!(out, "{c:.17e} ")?;
                }
                writeln!(out, "{:.17e} {:.17e}", z.re, z.im)?;
            }
        }
    }
    Ok(())
}

fn parse<T: std::str::FromStr>(key: &str, v: Option<&str>) -> Result<T> {
    v.and_then(|s| s.trim().parse().ok())
        .ok_or_else(|| Error::Parse(format!("bad or missing value for `{key}`")))
}

/// Reads a field written by [`write_field`]. Coordinates in each row are
/// ignored beyond a count check; the header fixes the lattice.
pub fn read_field(input: impl BufRead) -> Result<Field> {
    let (mut dim, mut points, mut half) = (None, None, None);
    let mut domain = Domain::Space;
    let mut center: Option<Vec<f64>> = None;
    let mut dirac = false;
    let mut samples = Vec::new();
    for (lineno, line) in input.lines().enumerate() {
        let line = line?;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(rest) = line.strip_prefix('#') {
            let mut parts = rest.trim().splitn(2, char::is_whitespace);
            let key = parts.next().unwrap_or("");
            let val = parts.next();
            match key {
                "dim" => dim = Some(parse::<usize>(key, val)?),
                "points" => points = Some(parse::<usize>(key, val)?),
                "half_width" => half = Some(parse::<f64>(key, val)?),
                "domain" => {
                    domain = match val.map(str::trim) {
                        Some("space") => Domain::Space,
                        Some("frequency") => Domain::Frequency,
                        other => return Err(Error::Parse(format!("unknown domain {other:?}"))),
                    }
                }
                "kind" => dirac = val.map(str::trim) == Some("dirac"),
                "center" => {
                    let v = val.unwrap_or("");
                    let c: std::result::Result<Vec<f64>, _> =
                        v.split_whitespace().map(str::parse).collect();
                    center = Some(c.map_err(|e| Error::Parse(format!("center: {e}")))?);
                }
                _ => {}
            }
            continue;
        }
        let cols: Vec<f64> = line
            .split_whitespace()
            .map(str::parse)
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| Error::Parse(format!("line {}: {e}", lineno + 1)))?;
        let d = dim.ok_or_else(|| Error::Parse("data row before `# dim`".into()))?;
        if cols.len() != d + 2 {
            return Err(Error::Parse(format!(
                "line {}: expected {} columns, found {}",
                lineno + 1,
                d + 2,
                cols.len()
            )));
        }
        samples.push(Complex64::new(cols[d], cols[d + 1]));
    }
    let grid = Grid::new(
        dim.ok_or_else(|| Error::Parse("missing `# dim`".into()))?,
        points.ok_or_else(|| Error::Parse("missing `# points`".into()))?,
        half.ok_or_else(|| Error::Parse("missing `# half_width`".into()))?,
    )?;
    if dirac {
        let c = center.ok_or_else(|| Error::Parse("dirac field without `# center`".into()))?;
        return Field::dirac(grid, c);
    }
    match domain {
        Domain::Space => Field::from_samples(grid, samples),
        Domain::Frequency => {
            if samples.len() != grid.len() {
                return Err(Error::Sizing(format!("{} rows for {} sites", samples.len(), grid.len())));
            }
            Ok(Field::spectrum(grid, samples))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_is_bit_exact() {
        let grid = Grid::new(1, 64, 5.0).unwrap();
        let f = Field::from_fn(grid, |x| Complex64::new(x[0].sin(), (-x[0] * x[0]).exp() / 3.0));
        let mut buf = Vec::new();
        write_field(&f, &mut buf).unwrap();
        let g = read_field(buf.as_slice()).unwrap();
        assert_eq!(f, g);

        let spec = super::super::fourier(&f).unwrap();
        let mut buf = Vec::new();
        write_field(&spec, &mut buf).unwrap();
        assert_eq!(read_field(buf.as_slice()).unwrap(), spec);
    }

    #[test]
    fn two_d_and_delta() {
        let grid = Grid::new(2, 8, 1.0).unwrap();
        let f = Field::from_fn(grid, |x| Complex64::new(x[0], x[1]));
        let mut buf = Vec::new();
        write_field(&f, &mut buf).unwrap();
        assert_eq!(read_field(buf.as_slice()).unwrap(), f);

        let d = Field::dirac(grid, vec![0.25, -0.5]).unwrap();
        let mut buf = Vec::new();
        write_field(&d, &mut buf).unwrap();
        assert_eq!(read_field(buf.as_slice()).unwrap(), d);
    }

    #[test]
    fn malformed_input() {
        assert!(read_field("# dim 1\n# points 8\n1 2\n".as_bytes()).is_err());
        assert!(read_field("# points 8\n# half_width 1\n".as_bytes()).is_err());
        let short = "# dim 1\n# points 8\n# half_width 1\n0 1 0\n";
        assert!(matches!(read_field(short.as_bytes()), Err(Error::Sizing(_))));
    }
}
