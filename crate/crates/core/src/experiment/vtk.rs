//! Legacy ASCII VTK unstructured grids with scalar point data. Field files
//! use this format too, so it must round-trip exactly.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::field::NodalField;
use crate::mesh::Mesh;

use super::output::atomic_write;

/// C `%.17g`.
pub fn format_g17(x: f64) -> String {
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return if x.is_sign_negative() { "-0".into() } else { "0".into() };
    }
    let sci = format!("{x:.16e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent");
    let exp: i32 = exp.parse().expect("integer exponent");
    if !(-4..17).contains(&exp) {
        let m = strip_zeros(mantissa);
        format!("{m}e{}{:02}", if exp < 0 { '-' } else { '+' }, exp.abs())
    } else {
        strip_zeros(&format!("{x:.*}", (16 - exp) as usize)).to_string()
    }
}

fn strip_zeros(s: &str) -> &str {
    if s.contains('.') { s.trim_end_matches('0').trim_end_matches('.') } else { s }
}

/// A mesh with named nodal fields, as stored on disk.
#[derive(Debug, Clone)]
pub struct FieldFile {
    pub mesh: Mesh,
    pub fields: Vec<(String, Vec<f64>)>,
}

impl FieldFile {
    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.fields.iter().map(|(n, _)| n.as_str())
    }

    pub fn field(&self, name: &str) -> Result<NodalField> {
        let (_, v) = self.fields.iter().find(|(n, _)| n == name).ok_or_else(|| {
            Error::Config(format!("field `{name}` not found (available: {})", self.names().collect::<Vec<_>>().join(", ")))
        })?;
        NodalField::new(&self.mesh, v.clone())
    }
}

pub fn vtk_string(mesh: &Mesh, fields: &[(&str, &NodalField)]) -> Result<String> {
    for (name, f) in fields {
        if name.is_empty() || name.chars().any(char::is_whitespace) {
            return Err(Error::Config(format!("field name `{name}` must be non-empty without whitespace")));
        }
        f.check_on(mesh)?;
    }
    let dim = mesh.dim();
    let mut s = String::new();
    s.push_str("# vtk DataFile Version 3.0\nchg fields\nASCII\nDATASET UNSTRUCTURED_GRID\n");
    let _ = writeln!(s, "POINTS {} double", mesh.num_vertices());
    for x in mesh.vertices() {
        let z = if dim == 3 { x[2] } else { 0.0 };
        let _ = writeln!(s, "{} {} {}", format_g17(x[0]), format_g17(x[1]), format_g17(z));
    }
    let nc = mesh.num_cells();
    let _ = writeln!(s, "CELLS {} {}", nc, nc * (dim + 2));
    for c in mesh.cells() {
        s.push_str(&(dim + 1).to_string());
        for v in &c[..=dim] {
            let _ = write!(s, " {v}");
        }
        s.push('\n');
    }
    let _ = writeln!(s, "CELL_TYPES {nc}");
    let ty = if dim == 2 { "5\n" } else { "10\n" };
    for _ in 0..nc {
        s.push_str(ty);
    }
    if !fields.is_empty() {
        let _ = writeln!(s, "POINT_DATA {}", mesh.num_vertices());
        for (name, f) in fields {
            let _ = writeln!(s, "SCALARS {name} double 1\nLOOKUP_TABLE default");
            for v in f.values() {
                s.push_str(&format_g17(*v));
                s.push('\n');
            }
        }
    }
    Ok(s)
}

pub fn write_vtk(mesh: &Mesh, fields: &[(&str, &NodalField)], path: &Path) -> Result<()> {
    atomic_write(path, vtk_string(mesh, fields)?.as_bytes())
}

pub fn read_vtk(path: &Path) -> Result<FieldFile> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
    parse_vtk(&text).map_err(|e| match e {
        Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
        other => other,
    })
}

struct Tokens<'a> {
    it: std::str::SplitWhitespace<'a>,
}

impl<'a> Tokens<'a> {
    fn next(&mut self, what: &str) -> Result<&'a str> {
        self.it.next().ok_or_else(|| Error::Config(format!("unexpected end of file reading {what}")))
    }

    fn expect(&mut self, word: &str) -> Result<()> {
        let t = self.next(word)?;
        if t != word {
            return Err(Error::Config(format!("expected `{word}`, found `{t}`")));
        }
        Ok(())
    }

    fn parse<T: std::str::FromStr>(&mut self, what: &str) -> Result<T> {
        let t = self.next(what)?;
        t.parse().map_err(|_| Error::Config(format!("cannot parse `{t}` as {what}")))
    }
}

pub fn parse_vtk(text: &str) -> Result<FieldFile> {
    let mut lines = text.splitn(3, '\n');
    let header = lines.next().unwrap_or("");
    if !header.starts_with("# vtk DataFile") {
        return Err(Error::Config("not a legacy VTK file".into()));
    }
    let _title = lines.next();
    let mut t = Tokens { it: lines.next().unwrap_or("").split_whitespace() };
    t.expect("ASCII")?;
    t.expect("DATASET")?;
    t.expect("UNSTRUCTURED_GRID")?;
    t.expect("POINTS")?;
    let np: usize = t.parse("point count")?;
    let _ty = t.next("point type")?;
    let mut coords = Vec::with_capacity(np);
    for _ in 0..np {
        coords.push([t.parse::<f64>("coordinate")?, t.parse("coordinate")?, t.parse("coordinate")?]);
    }
    t.expect("CELLS")?;
    let nc: usize = t.parse("cell count")?;
    let _size: usize = t.parse("cell list size")?;
    let mut cells = Vec::with_capacity(nc);
    let mut dim = 0;
    for _ in 0..nc {
        let k: usize = t.parse("cell size")?;
        if !(k == 3 || k == 4) || (dim != 0 && k != dim + 1) {
            return Err(Error::Config(format!("unsupported cell with {k} vertices")));
        }
        dim = k - 1;
        let mut c = [0usize; 4];
        for slot in c.iter_mut().take(k) {
            *slot = t.parse("vertex index")?;
        }
        cells.push(c);
    }
    t.expect("CELL_TYPES")?;
    let _: usize = t.parse("cell type count")?;
    for _ in 0..nc {
        let ty: u32 = t.parse("cell type")?;
        if (dim == 2 && ty != 5) || (dim == 3 && ty != 10) {
            return Err(Error::Config(format!("unsupported cell type {ty}")));
        }
    }
    if dim == 0 {
        return Err(Error::Config("mesh has no cells".into()));
    }
    let mut lower = [0.0; 3];
    let mut upper = [0.0; 3];
    for d in 0..dim {
        lower[d] = coords.iter().map(|x| x[d]).fold(f64::INFINITY, f64::min);
        upper[d] = coords.iter().map(|x| x[d]).fold(f64::NEG_INFINITY, f64::max);
    }
    let generation = vec![0; nc];
    let mesh = Mesh::from_cells(dim, lower, upper, coords, cells, generation)?;
    let mut fields = Vec::new();
    if let Some(word) = t.it.next() {
        if word != "POINT_DATA" {
            return Err(Error::Config(format!("expected `POINT_DATA`, found `{word}`")));
        }
        let n: usize = t.parse("point data count")?;
        if n != np {
            return Err(Error::Config(format!("point data for {n} points, mesh has {np}")));
        }
        while let Some(word) = t.it.next() {
            if word != "SCALARS" {
                return Err(Error::Config(format!("expected `SCALARS`, found `{word}`")));
            }
            let name = t.next("field name")?.to_string();
            let _ty = t.next("field type")?;
            let comps = t.next("component count")?;
            if comps != "1" {
                if comps == "LOOKUP_TABLE" {
                    // the component count is optional
                    let _table = t.next("lookup table")?;
                } else {
                    return Err(Error::Config(format!("field `{name}` has {comps} components; only scalars are supported")));
                }
            } else {
                t.expect("LOOKUP_TABLE")?;
                let _table = t.next("lookup table")?;
            }
            let mut v = Vec::with_capacity(np);
            for _ in 0..np {
                v.push(t.parse::<f64>("field value")?);
            }
            fields.push((name, v));
        }
    }
    Ok(FieldFile { mesh, fields })
}
