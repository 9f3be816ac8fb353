//! Flat binary and CSV export of grid fields.
//!
//! Binary layout: four little-endian `u64` (dim, L, M, field count) followed
//! by each field's values as little-endian `f64`, row-major.

use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::{GridField, PeriodicGrid};
use crate::error::{Error, Result};

pub fn write_fields<W: Write>(mut w: W, fields: &[&GridField<f64>]) -> Result<()> {
    let grid = match fields.first() {
        Some(f) => *f.grid(),
        None => return Err(Error::InvalidArgument("no fields to write".into())),
    };
    for f in fields {
        grid.check_same(f.grid())?;
    }
    for h in [
        grid.dim(),
        grid.halfwidth(),
        grid.points_per_unit(),
        fields.len(),
    ] {
        w.write_all(&(h as u64).to_le_bytes())?;
    }
    for f in fields {
        for v in f.values() {
            w.write_all(&v.to_le_bytes())?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn read_fields<R: Read>(mut r: R) -> Result<Vec<GridField<f64>>> {
    let mut word = [0u8; 8];
    let mut header = [0usize; 4];
    for h in header.iter_mut() {
        r.read_exact(&mut word)?;
        *h = usize::try_from(u64::from_le_bytes(word))
            .map_err(|_| Error::Format("header value overflows usize".into()))?;
    }
    let grid = PeriodicGrid::new(header[0], header[1], header[2])?;
    let mut out = Vec::with_capacity(header[3]);
    for _ in 0..header[3] {
        let mut values = Vec::with_capacity(grid.sites());
        for _ in 0..grid.sites() {
            r.read_exact(&mut word)?;
            values.push(f64::from_le_bytes(word));
        }
        out.push(GridField::new(grid, values)?);
    }
    let mut rest = Vec::new();
    r.read_to_end(&mut rest)?;
    if !rest.is_empty() {
        return Err(Error::Format(format!(
            "{} trailing bytes after fields",
            rest.len()
        )));
    }
    Ok(out)
}

pub fn save_fields(path: &Path, fields: &[&GridField<f64>]) -> Result<()> {
    write_fields(BufWriter::new(std::fs::File::create(path)?), fields)
}

pub fn load_fields(path: &Path) -> Result<Vec<GridField<f64>>> {
    read_fields(BufReader::new(std::fs::File::open(path)?))
}

/// One row per site: coordinates `x0..x{N-1}` then one column per field.
pub fn write_csv<W: Write>(mut w: W, names: &[&str], fields: &[&GridField<f64>]) -> Result<()> {
    if names.len() != fields.len() || fields.is_empty() {
        return Err(Error::InvalidArgument("need one name per field".into()));
    }
    let grid = *fields[0].grid();
    for f in fields {
        grid.check_same(f.grid())?;
    }
    let mut head: Vec<String> = (0..grid.dim()).map(|a| format!("x{a}")).collect();
    head.extend(names.iter().map(|s| s.to_string()));
    writeln!(w, "{}", head.join(","))?;
    for i in 0..grid.sites() {
        let x = grid.position::<f64>(i);
        let mut row: Vec<String> = x[..grid.dim()].iter().map(|c| c.to_string()).collect();
        row.extend(fields.iter().map(|f| format!("{:e}", f.values()[i])));
        writeln!(w, "{}", row.join(","))?;
    }
    w.flush()?;
    Ok(())
}

pub fn save_csv(path: &Path, names: &[&str], fields: &[&GridField<f64>]) -> Result<()> {
    write_csv(BufWriter::new(std::fs::File::create(path)?), names, fields)
}

/// Reads the value columns back from a CSV written by [`write_csv`].
pub fn read_csv_columns<R: Read>(r: R) -> Result<(Vec<String>, Vec<Vec<f64>>)> {
    let mut lines = BufReader::new(r).lines();
    let head = lines
        .next()
        .ok_or_else(|| Error::Format("empty csv".into()))??;
    let names: Vec<String> = head.split(',').map(str::to_string).collect();
    let mut cols = vec![Vec::new(); names.len()];
    for line in lines {
        let line = line?;
        for (c, cell) in line.split(',').enumerate() {
            let v: f64 = cell
                .parse()
                .map_err(|e| Error::Format(format!("bad cell {cell:?}: {e}")))?;
            cols.get_mut(c)
                .ok_or_else(|| Error::Format("ragged csv row".into()))?
                .push(v);
        }
    }
    Ok((names, cols))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn binary_roundtrip() {
        let g = PeriodicGrid::new(2, 1, 4).unwrap();
        let a = GridField::from_fn(g, |x: &[f64]| x[0] - 0.3 * x[1]);
        let b = GridField::constant(g, std::f64::consts::PI);
        let mut buf = Vec::new();
        write_fields(&mut buf, &[&a, &b]).unwrap();
        assert_eq!(buf.len(), 32 + 2 * 8 * g.sites());
        assert_eq!(&buf[..8], &2u64.to_le_bytes());
        let back = read_fields(buf.as_slice()).unwrap();
        assert_eq!(back, vec![a, b]);
    }

    #[test]
    fn truncated_input_is_an_error() {
        let g = PeriodicGrid::new(1, 1, 4).unwrap();
        let mut buf = Vec::new();
        write_fields(&mut buf, &[&GridField::zeros(g)]).unwrap();
        buf.pop();
        assert!(read_fields(buf.as_slice()).is_err());
    }

    #[test]
    fn csv_roundtrip() {
        let g = PeriodicGrid::new(1, 1, 4).unwrap();
        let u = GridField::from_fn(g, |x: &[f64]| (-x[0] * x[0]).exp());
        let mut buf = Vec::new();
        write_csv(&mut buf, &["u"], &[&u]).unwrap();
        let (names, cols) = read_csv_columns(buf.as_slice()).unwrap();
        assert_eq!(names, vec!["x0", "u"]);
        assert_eq!(cols[0][0], -1.0);
        for (p, q) in cols[1].iter().zip(u.values()) {
            assert_eq!(p, q);
        }
    }
}
