//! Field CSV format.
//!
//! Line 1 is `nx,ny,ax,bx,ay,by`; then `ny` rows of `nx` comma-separated values,
//! row-major with y outer. Values use the shortest decimal that round-trips.

use std::io::{BufRead, Write};

use crate::error::{Error, Result};
use crate::field::{Grid2D, ScalarField};

/// Shortest round-trip decimal, switching to exponent notation for very small or large magnitudes.
pub fn format_f64(v: f64) -> String {
    let a = v.abs();
    if v == 0.0 {
        // drop the sign of negative zero so output does not depend on it
        "0".to_string()
    } else if (1e-5..1e16).contains(&a) {
        format!("{v}")
    } else {
        format!("{v:e}")
    }
}

pub fn write_field_csv<W: Write>(field: &ScalarField, mut w: W) -> Result<()> {
    let g = field.grid();
    let (ax, bx, ay, by) = g.bounds();
    writeln!(
        w,
        "{},{},{},{},{},{}",
        g.nx(),
        g.ny(),
        format_f64(ax),
        format_f64(bx),
        format_f64(ay),
        format_f64(by)
    )?;
    for row in field.values().chunks(g.nx()) {
        let line: Vec<String> = row.iter().map(|&v| format_f64(v)).collect();
        writeln!(w, "{}", line.join(","))?;
    }
    Ok(())
}

pub fn field_to_csv_string(field: &ScalarField) -> String {
    let mut buf = Vec::new();
    write_field_csv(field, &mut buf).expect("writing to a Vec cannot fail");
    String::from_utf8(buf).expect("csv output is ASCII")
}

pub fn read_field_csv<R: BufRead>(r: R) -> Result<ScalarField> {
    let mut lines = r.lines();
    let header = lines.next().ok_or(Error::Csv {
        line: 1,
        reason: "empty input".into(),
    })??;
    let parts: Vec<&str> = header.trim().split(',').collect();
    if parts.len() != 6 {
        return Err(Error::Csv {
            line: 1,
            reason: format!("expected 6 header fields, found {}", parts.len()),
        });
    }
    let parse_usize = |s: &str| {
        s.trim().parse::<usize>().map_err(|e| Error::Csv {
            line: 1,
            reason: format!("bad node count `{s}`: {e}"),
        })
    };
    let parse_f = |s: &str, line: usize| {
        s.trim().parse::<f64>().map_err(|e| Error::Csv {
            line,
            reason: format!("bad number `{s}`: {e}"),
        })
    };
    let nx = parse_usize(parts[0])?;
    let ny = parse_usize(parts[1])?;
    let grid = Grid2D::new(
        nx,
        ny,
        parse_f(parts[2], 1)?,
        parse_f(parts[3], 1)?,
        parse_f(parts[4], 1)?,
        parse_f(parts[5], 1)?,
    )?;
    let mut values = Vec::with_capacity(grid.len());
    let mut row_count = 0;
    for (n, line) in lines.enumerate() {
        let line = line?;
        let lineno = n + 2;
        if line.trim().is_empty() {
            continue;
        }
        let row: Vec<&str> = line.trim().split(',').collect();
        if row.len() != nx {
            return Err(Error::Csv {
                line: lineno,
                reason: format!("expected {nx} values, found {}", row.len()),
            });
        }
        for s in row {
            values.push(parse_f(s, lineno)?);
        }
        row_count += 1;
    }
    if row_count != ny {
        return Err(Error::Csv {
            line: row_count + 1,
            reason: format!("expected {ny} rows, found {row_count}"),
        });
    }
    ScalarField::new(grid, values)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn exact_layout() {
        let g = Grid2D::new(3, 3, 0.0, 1.0, -0.5, 0.5).unwrap();
        let f = ScalarField::from_fn(g, |x, y| x + 10.0 * y).unwrap();
        let s = field_to_csv_string(&f);
        assert_eq!(s, "3,3,0,1,-0.5,0.5\n-5,-4.5,-4\n0,0.5,1\n5,5.5,6\n");
    }

    #[test]
    fn rejects_ragged_rows() {
        let text = "3,3,0,1,0,1\n1,2,3\n1,2\n1,2,3\n";
        assert!(matches!(
            read_field_csv(text.as_bytes()),
            Err(Error::Csv { line: 3, .. })
        ));
    }

    proptest! {
        #[test]
        fn round_trip_is_bit_exact(vals in proptest::collection::vec(-1e300f64..1e300, 20),
                                   scale in prop::sample::select(vec![1.0, 1e-9, 1e-300, 3.0e7])) {
            let g = Grid2D::new(5, 4, -1.0, 0.3, 0.0, 7.0).unwrap();
            let f = ScalarField::new(g, vals.iter().map(|v| v * scale).collect()).unwrap();
            let back = read_field_csv(field_to_csv_string(&f).as_bytes()).unwrap();
            prop_assert_eq!(back.grid(), f.grid());
            for (a, b) in back.values().iter().zip(f.values()) {
                prop_assert_eq!(a.to_bits(), if *b == 0.0 { 0f64.to_bits() } else { b.to_bits() });
            }
        }
    }
}
