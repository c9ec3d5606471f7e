//! Fixed-field MPS export.
//!
//! Layout follows the classic card format: field 1 in columns 2-3, names in
//! columns 5-12 and 15-22 (and 40-47), values right-aligned in columns 25-36
//! (and 50-61). Names are therefore mangled to 8 characters:
//!
//! * rows become `R` followed by the 1-based row index in base 36, zero
//!   padded to 7 digits (`R0000001`); the objective row is `OBJ`;
//! * columns become `C` plus the same encoding of the column index.
//!
//! Each file starts with `*` comment lines mapping every mangled name back to
//! the original (`* C000000A x[3,7]`), so [`read_mps`] recovers the program
//! with its names. Values are written in Rust's shortest round-trip form when
//! it fits the 12-character field and otherwise in scientific notation with
//! as many significant digits as fit. Maximization is declared in an
//! `OBJSENSE` section.

use std::collections::HashMap;
use std::fmt::Write as _;

use super::model::{LinearProgram, Relation, Sense};
use crate::error::{Error, Result};

const FIELD_WIDTH: usize = 12;
const OBJ_ROW: &str = "OBJ";

fn base36(mut v: usize, width: usize) -> String {
    const DIGITS: &[u8] = b"0123456789ABCDEFGHIJKLMNOPQRSTUVWXYZ";
    let mut out = vec![b'0'; width];
    for slot in out.iter_mut().rev() {
        *slot = DIGITS[v % 36];
        v /= 36;
    }
    String::from_utf8(out).expect("ascii")
}

/// Mangled MPS name of row `i` (0-based).
pub fn row_name(i: usize) -> String {
    format!("R{}", base36(i + 1, 7))
}

/// Mangled MPS name of column `j` (0-based).
pub fn column_name(j: usize) -> String {
    format!("C{}", base36(j + 1, 7))
}

/// Formats `v` to fit the 12-character value field.
pub fn format_value(v: f64) -> String {
    let short = format!("{v}");
    if short.len() <= FIELD_WIDTH {
        return short;
    }
    for digits in (0..=FIELD_WIDTH).rev() {
        let s = format!("{v:.digits$e}");
        if s.len() <= FIELD_WIDTH {
            return s;
        }
    }
    format!("{v:e}")
}

fn sanitize(name: &str) -> String {
    name.chars()
        .map(|c| if c.is_whitespace() { '_' } else { c })
        .collect()
}

fn entry(out: &mut String, code: &str, name1: &str, name2: &str, value: f64) {
    let _ = writeln!(
        out,
        " {code:<2} {name1:<8}  {name2:<8}  {:>12}",
        format_value(value)
    );
}

/// Renders `lp` as fixed-field MPS text.
pub fn export_lp(lp: &LinearProgram) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "* program: {}", sanitize(&lp.name));
    let _ = writeln!(
        out,
        "* rows: {}  columns: {}",
        lp.num_constraints(),
        lp.num_variables()
    );
    for (i, c) in lp.constraints().iter().enumerate() {
        let _ = writeln!(out, "* {} {}", row_name(i), sanitize(&c.name));
    }
    for (j, v) in lp.variables().iter().enumerate() {
        let _ = writeln!(out, "* {} {}", column_name(j), sanitize(&v.name));
    }
    let name: String = sanitize(&lp.name).chars().take(8).collect();
    let _ = writeln!(out, "NAME          {name}");
    if lp.sense == Sense::Maximize {
        out.push_str("OBJSENSE\n    MAX\n");
    }
    out.push_str("ROWS\n");
    let _ = writeln!(out, " N  {OBJ_ROW}");
    for (i, c) in lp.constraints().iter().enumerate() {
        let code = match c.relation {
            Relation::LessEq => "L",
            Relation::Equal => "E",
            Relation::GreaterEq => "G",
        };
        let _ = writeln!(out, " {code}  {}", row_name(i));
    }

    let mut cols: Vec<Vec<(usize, f64)>> = vec![Vec::new(); lp.num_variables()];
    for (i, c) in lp.constraints().iter().enumerate() {
        for &(j, a) in &c.coefficients {
            cols[j].push((i, a));
        }
    }
    out.push_str("COLUMNS\n");
    for (j, v) in lp.variables().iter().enumerate() {
        let cname = column_name(j);
        if v.objective != 0.0 {
            entry(&mut out, "", &cname, OBJ_ROW, v.objective);
        }
        for &(i, a) in &cols[j] {
            entry(&mut out, "", &cname, &row_name(i), a);
        }
    }
    out.push_str("RHS\n");
    for (i, c) in lp.constraints().iter().enumerate() {
        if c.rhs != 0.0 {
            entry(&mut out, "", "RHS", &row_name(i), c.rhs);
        }
    }
    out.push_str("BOUNDS\n");
    for (j, v) in lp.variables().iter().enumerate() {
        let cname = column_name(j);
        let (lo, hi) = (v.lower, v.upper);
        if lo == hi {
            entry(&mut out, "FX", "BND", &cname, lo);
            continue;
        }
        if lo == f64::NEG_INFINITY && hi == f64::INFINITY {
            let _ = writeln!(out, " FR BND       {cname}");
            continue;
        }
        if lo == f64::NEG_INFINITY {
            let _ = writeln!(out, " MI BND       {cname}");
        } else if lo != 0.0 {
            entry(&mut out, "LO", "BND", &cname, lo);
        }
        if hi != f64::INFINITY {
            entry(&mut out, "UP", "BND", &cname, hi);
        }
    }
    out.push_str("ENDATA\n");
    out
}

fn field(line: &str, start: usize, end: usize) -> &str {
    let bytes = line.len();
    if start >= bytes {
        return "";
    }
    line[start..end.min(bytes)].trim()
}

/// Reads MPS text written by [`export_lp`], restoring original names from the
/// comment header.
pub fn read_mps(text: &str) -> Result<LinearProgram> {
    let mut names: HashMap<String, String> = HashMap::new();
    let mut program = String::new();
    let mut section = "";
    let mut sense = Sense::Minimize;
    let mut rows: Vec<(String, Relation)> = Vec::new();
    let mut row_index: HashMap<String, usize> = HashMap::new();
    let mut col_index: HashMap<String, usize> = HashMap::new();
    let mut cols: Vec<(String, f64, f64, f64)> = Vec::new();
    let mut entries: Vec<Vec<(usize, f64)>> = Vec::new();
    let mut rhs: Vec<f64> = Vec::new();

    for (k, line) in text.lines().enumerate() {
        let line_no = k + 1;
        if let Some(comment) = line.strip_prefix('*') {
            let mut parts = comment.trim().splitn(2, ' ');
            if let (Some(a), Some(b)) = (parts.next(), parts.next()) {
                if a == "program:" {
                    program = b.to_string();
                } else {
                    names.insert(a.to_string(), b.to_string());
                }
            }
            continue;
        }
        if line.trim().is_empty() {
            continue;
        }
        if !line.starts_with(' ') {
            section = match line.split_whitespace().next().unwrap_or("") {
                "NAME" => "NAME",
                "OBJSENSE" => "OBJSENSE",
                "ROWS" => "ROWS",
                "COLUMNS" => "COLUMNS",
                "RHS" => "RHS",
                "BOUNDS" => "BOUNDS",
                "ENDATA" => break,
                other => {
                    return Err(Error::parse(
                        line_no,
                        format!("unknown MPS section {other:?}"),
                    ))
                }
            };
            continue;
        }
        let num = |s: &str| -> Result<f64> {
            s.parse()
                .map_err(|_| Error::parse(line_no, format!("bad number {s:?}")))
        };
        match section {
            "OBJSENSE" => {
                sense = match line.trim() {
                    "MAX" | "MAXIMIZE" => Sense::Maximize,
                    _ => Sense::Minimize,
                }
            }
            "ROWS" => {
                let code = field(line, 1, 3);
                let name = field(line, 4, 12).to_string();
                let rel = match code {
                    "N" => continue,
                    "L" => Relation::LessEq,
                    "E" => Relation::Equal,
                    "G" => Relation::GreaterEq,
                    _ => return Err(Error::parse(line_no, format!("bad row type {code:?}"))),
                };
                row_index.insert(name.clone(), rows.len());
                rows.push((name, rel));
                rhs.push(0.0);
            }
            "COLUMNS" => {
                let cname = field(line, 4, 12).to_string();
                let rname = field(line, 14, 22);
                let v = num(field(line, 24, 36))?;
                let j = *col_index.entry(cname.clone()).or_insert_with(|| {
                    cols.push((cname, 0.0, f64::INFINITY, 0.0));
                    entries.push(Vec::new());
                    cols.len() - 1
                });
                if rname == OBJ_ROW {
                    cols[j].3 = v;
                } else {
                    let i = *row_index
                        .get(rname)
                        .ok_or_else(|| Error::parse(line_no, format!("unknown row {rname:?}")))?;
                    entries[j].push((i, v));
                }
            }
            "RHS" => {
                let rname = field(line, 14, 22);
                let i = *row_index
                    .get(rname)
                    .ok_or_else(|| Error::parse(line_no, format!("unknown row {rname:?}")))?;
                rhs[i] = num(field(line, 24, 36))?;
            }
            "BOUNDS" => {
                let code = field(line, 1, 3);
                let cname = field(line, 14, 22);
                let j = *col_index
                    .get(cname)
                    .ok_or_else(|| Error::parse(line_no, format!("unknown column {cname:?}")))?;
                let val = || num(field(line, 24, 36));
                match code {
                    "FX" => {
                        let v = val()?;
                        cols[j].1 = v;
                        cols[j].2 = v;
                    }
                    "FR" => {
                        cols[j].1 = f64::NEG_INFINITY;
                        cols[j].2 = f64::INFINITY;
                    }
                    "MI" => cols[j].1 = f64::NEG_INFINITY,
                    "LO" => cols[j].1 = val()?,
                    "UP" => cols[j].2 = val()?,
                    _ => return Err(Error::parse(line_no, format!("bad bound type {code:?}"))),
                }
            }
            _ => {}
        }
    }

    let original = |mangled: &str| {
        names
            .get(mangled)
            .cloned()
            .unwrap_or_else(|| mangled.to_string())
    };
    let mut lp = LinearProgram::new(program, sense);
    let mut by_row: Vec<Vec<(usize, f64)>> = vec![Vec::new(); rows.len()];
    for (j, (cname, lo, hi, obj)) in cols.iter().enumerate() {
        lp.add_variable(original(cname), *lo, *hi, *obj);
        for &(i, v) in &entries[j] {
            by_row[i].push((j, v));
        }
    }
    for (i, (rname, rel)) in rows.iter().enumerate() {
        lp.add_constraint(original(rname), by_row[i].iter().copied(), *rel, rhs[i]);
    }
    Ok(lp)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn name_mangling() {
        assert_eq!(row_name(0), "R0000001");
        assert_eq!(column_name(34), "C000000Z");
        assert_eq!(column_name(35), "C0000010");
    }

    #[test]
    fn values_fit_the_field() {
        for v in [1.0, -0.1, 25900.20064, 1.0 / 3.0, 1e-300, -123456789.123456] {
            let s = format_value(v);
            assert!(s.len() <= 12, "{s}");
            let back: f64 = s.parse().unwrap();
            assert!((back - v).abs() <= 1e-8 * v.abs());
        }
    }

    #[test]
    fn trivial_program_has_all_sections() {
        let mut lp = LinearProgram::new("onevar", Sense::Maximize);
        let x = lp.add_variable("x", 0.0, f64::INFINITY, 1.0);
        lp.add_constraint("cap", [(x, 1.0)], Relation::LessEq, 3.0);
        let text = export_lp(&lp);
        for s in [
            "NAME", "OBJSENSE", "ROWS", "COLUMNS", "RHS", "BOUNDS", "ENDATA",
        ] {
            assert!(text.lines().any(|l| l.starts_with(s)), "{s}\n{text}");
        }
        assert!(text.contains(" C0000001  OBJ                  1"));
        assert_eq!(read_mps(&text).unwrap(), lp);
    }

    #[test]
    fn empty_program_skeleton() {
        let lp = LinearProgram::new("empty", Sense::Minimize);
        let text = export_lp(&lp);
        assert!(text.ends_with("ENDATA\n"));
        assert_eq!(read_mps(&text).unwrap(), lp);
    }

    #[test]
    fn round_trip_with_all_bound_kinds() {
        let mut lp = LinearProgram::new("bounds", Sense::Minimize);
        let a = lp.add_variable("free x", f64::NEG_INFINITY, f64::INFINITY, 1.5);
        let b = lp.add_variable("fixed", 2.0, 2.0, 0.0);
        let c = lp.add_variable("neg", f64::NEG_INFINITY, -1.0, -2.0);
        let d = lp.add_variable("box", -1.0, 4.0, 0.25);
        lp.add_constraint("r0", [(a, 1.0), (b, 2.0)], Relation::GreaterEq, -3.0);
        lp.add_constraint("r1", [(c, 1.0), (d, -1.0)], Relation::Equal, 0.0);
        lp.add_constraint("r2", [(a, 1.0), (d, 1.0)], Relation::LessEq, 7.0);
        let back = read_mps(&export_lp(&lp)).unwrap();
        assert_eq!(back.variables()[0].name, "free_x");
        assert_eq!(back.constraints(), lp.constraints());
        for (u, v) in back.variables().iter().zip(lp.variables()) {
            assert_eq!(
                (u.lower, u.upper, u.objective),
                (v.lower, v.upper, v.objective)
            );
        }
    }
}
