//! Fixed-format MPS writer and a whitespace-tolerant MPS reader.
//!
//! The writer replaces column and row names by 8-character codes
//! (`C0000001`, `R0000001`, objective row `OBJ`) so that every field fits its
//! fixed column window. Numbers carry 12 significant digits in the shortest
//! spelling that parses back to the same value.

use std::collections::HashMap;
use std::io::{BufRead, Write};

use crate::error::LpError;
use crate::problem::{LinearProgram, LpBuilder, RowSense, Sense};

pub const OBJECTIVE_ROW: &str = "OBJ";

pub fn column_code(j: usize) -> String {
    format!("C{:07}", j + 1)
}

pub fn row_code(i: usize) -> String {
    format!("R{:07}", i + 1)
}

/// Shortest decimal spelling of `v` rounded to 12 significant digits.
pub fn format_number(v: f64) -> String {
    if v == 0.0 {
        return "0".into();
    }
    let target: f64 = format!("{v:.11e}").parse().unwrap();
    let mut best = format!("{target}");
    for p in 0..12 {
        let s = format!("{v:.p$e}");
        if s.parse::<f64>().unwrap() == target {
            if s.len() < best.len() {
                best = s;
            }
            break;
        }
    }
    best
}

/// Fixed-format data line: fields at columns 2, 5, 15, 25, 40 and 50.
fn data_line(code: &str, name: &str, n1: &str, v1: &str, n2: Option<(&str, &str)>) -> String {
    let mut s = format!(" {code:<2} {name:<8}  {n1:<8}  {v1:>12}");
    if v1.len() > 12 {
        // the value overflows its window; keep it alone on the line
        return s;
    }
    if let Some((n, v)) = n2 {
        s.push_str(&format!("   {n:<8}  {v:>12}"));
    }
    s.trim_end().to_string()
}

pub fn write_mps<W: Write>(lp: &LinearProgram, mut w: W) -> Result<(), LpError> {
    let name: String = lp.name.chars().filter(|c| !c.is_whitespace()).take(8).collect();
    writeln!(w, "NAME          {}", if name.is_empty() { "LP" } else { &name })?;
    writeln!(w, "OBJSENSE")?;
    writeln!(w, "    {}", if lp.sense == Sense::Maximize { "MAX" } else { "MIN" })?;
    writeln!(w, "ROWS")?;
    writeln!(w, " N  {OBJECTIVE_ROW}")?;
    for (i, s) in lp.row_senses.iter().enumerate() {
        writeln!(w, " {}  {}", s.mps_code(), row_code(i))?;
    }
    writeln!(w, "COLUMNS")?;
    for j in 0..lp.num_cols() {
        let code = column_code(j);
        let mut entries: Vec<(String, String)> = Vec::new();
        if lp.objective[j] != 0.0 {
            entries.push((OBJECTIVE_ROW.into(), format_number(lp.objective[j])));
        }
        entries.extend(lp.column(j).map(|(i, v)| (row_code(i), format_number(v))));
        if entries.is_empty() {
            // keep empty columns visible to readers
            entries.push((OBJECTIVE_ROW.into(), "0".into()));
        }
        write_pairs(&mut w, &code, &entries)?;
    }
    writeln!(w, "RHS")?;
    let rhs: Vec<(String, String)> = lp
        .rhs
        .iter()
        .enumerate()
        .filter(|(_, &b)| b != 0.0)
        .map(|(i, &b)| (row_code(i), format_number(b)))
        .collect();
    write_pairs(&mut w, "RHS", &rhs)?;
    writeln!(w, "BOUNDS")?;
    for j in 0..lp.num_cols() {
        let code = column_code(j);
        let (l, u) = (lp.col_lower[j], lp.col_upper[j]);
        let mut line = |kind: &str, v: Option<f64>| -> std::io::Result<()> {
            match v {
                Some(v) => writeln!(w, "{}", data_line(kind, "BND", &code, &format_number(v), None)),
                None => writeln!(w, " {kind:<2} BND       {code}"),
            }
        };
        if l == u {
            line("FX", Some(l))?;
            continue;
        }
        match (l.is_finite(), u.is_finite()) {
            (false, false) => line("FR", None)?,
            (false, true) => {
                line("MI", None)?;
                line("UP", Some(u))?;
            }
            (true, fin_u) => {
                if l != 0.0 || (fin_u && u < 0.0) {
                    line("LO", Some(l))?;
                }
                if fin_u {
                    line("UP", Some(u))?;
                }
            }
        }
    }
    writeln!(w, "ENDATA")?;
    Ok(())
}

fn write_pairs<W: Write>(w: &mut W, name: &str, entries: &[(String, String)]) -> Result<(), LpError> {
    let mut k = 0;
    while k < entries.len() {
        let (r1, v1) = &entries[k];
        let second = entries.get(k + 1).filter(|_| v1.len() <= 12 && entries[k + 1].1.len() <= 12);
        writeln!(w, "{}", data_line("", name, r1, v1, second.map(|(r, v)| (r.as_str(), v.as_str()))))?;
        k += if second.is_some() { 2 } else { 1 };
    }
    Ok(())
}

#[derive(PartialEq, Clone, Copy)]
enum Section {
    None,
    Name,
    ObjSense,
    Rows,
    Columns,
    Rhs,
    Bounds,
}

fn parse_num(tok: &str, line: usize) -> Result<f64, LpError> {
    let v: f64 = tok
        .replace(['d', 'D'], "e")
        .parse()
        .map_err(|_| LpError::Parse { line, msg: format!("invalid number '{tok}'") })?;
    if v.is_nan() {
        return Err(LpError::Parse { line, msg: format!("invalid number '{tok}'") });
    }
    Ok(v)
}

/// Reads an MPS file (fixed or free format, names without embedded spaces).
pub fn read_mps<R: BufRead>(r: R) -> Result<LinearProgram, LpError> {
    let mut section = Section::None;
    let mut name = String::new();
    let mut sense = Sense::Minimize;
    let mut objective_row: Option<String> = None;
    let mut row_index: HashMap<String, usize> = HashMap::new();
    let mut row_names = Vec::new();
    let mut row_senses = Vec::new();
    let mut col_index: HashMap<String, usize> = HashMap::new();
    let mut col_names: Vec<String> = Vec::new();
    let mut costs: Vec<f64> = Vec::new();
    let mut entries: Vec<Vec<(usize, f64)>> = Vec::new();
    let mut rhs: Vec<f64> = Vec::new();
    let mut lower: Vec<f64> = Vec::new();
    let mut upper: Vec<f64> = Vec::new();
    let mut lower_set: Vec<bool> = Vec::new();
    let mut saw_end = false;

    for (lineno, line) in r.lines().enumerate() {
        let lineno = lineno + 1;
        let line = line?;
        if line.trim().is_empty() || line.starts_with('*') {
            continue;
        }
        let toks: Vec<&str> = line.split_whitespace().collect();
        let err = |msg: &str| LpError::Parse { line: lineno, msg: msg.to_string() };
        if !line.starts_with(' ') && !line.starts_with('\t') {
            section = match toks[0] {
                "NAME" => {
                    name = toks.get(1).unwrap_or(&"").to_string();
                    Section::Name
                }
                "OBJSENSE" => {
                    if let Some(s) = toks.get(1) {
                        sense = parse_sense(s).ok_or_else(|| err("unknown objective sense"))?;
                    }
                    Section::ObjSense
                }
                "ROWS" => Section::Rows,
                "COLUMNS" => Section::Columns,
                "RHS" => Section::Rhs,
                "BOUNDS" => Section::Bounds,
                "RANGES" => return Err(err("RANGES section is not supported")),
                "ENDATA" => {
                    saw_end = true;
                    break;
                }
                other => return Err(err(&format!("unknown section '{other}'"))),
            };
            continue;
        }
        match section {
            Section::ObjSense => {
                sense = parse_sense(toks[0]).ok_or_else(|| err("unknown objective sense"))?;
            }
            Section::Rows => {
                if toks.len() != 2 {
                    return Err(err("expected row type and name"));
                }
                let rs = match toks[0] {
                    "N" => {
                        if objective_row.is_none() {
                            objective_row = Some(toks[1].to_string());
                        }
                        continue;
                    }
                    "L" => RowSense::Le,
                    "G" => RowSense::Ge,
                    "E" => RowSense::Eq,
                    t => return Err(err(&format!("unknown row type '{t}'"))),
                };
                if row_index.insert(toks[1].to_string(), row_names.len()).is_some() {
                    return Err(err(&format!("duplicate row '{}'", toks[1])));
                }
                row_names.push(toks[1].to_string());
                row_senses.push(rs);
                rhs.push(0.0);
            }
            Section::Columns => {
                if toks.iter().any(|t| t.contains("MARKER")) {
                    return Err(err("integer markers are not supported"));
                }
                if toks.len() != 3 && toks.len() != 5 {
                    return Err(err("expected column, row, value [, row, value]"));
                }
                let j = match col_index.get(toks[0]) {
                    Some(&j) => j,
                    None => {
                        let j = col_names.len();
                        col_index.insert(toks[0].to_string(), j);
                        col_names.push(toks[0].to_string());
                        costs.push(0.0);
                        entries.push(Vec::new());
                        lower.push(0.0);
                        upper.push(f64::INFINITY);
                        lower_set.push(false);
                        j
                    }
                };
                for pair in toks[1..].chunks(2) {
                    let v = parse_num(pair[1], lineno)?;
                    if objective_row.as_deref() == Some(pair[0]) {
                        costs[j] += v;
                    } else if let Some(&i) = row_index.get(pair[0]) {
                        entries[j].push((i, v));
                    } else {
                        return Err(err(&format!("unknown row '{}'", pair[0])));
                    }
                }
            }
            Section::Rhs => {
                let pairs = match toks.len() {
                    2 | 4 => &toks[..],
                    3 | 5 => &toks[1..],
                    _ => return Err(err("malformed RHS line")),
                };
                for pair in pairs.chunks(2) {
                    let v = parse_num(pair[1], lineno)?;
                    if objective_row.as_deref() == Some(pair[0]) {
                        if v != 0.0 {
                            return Err(err("objective constants are not supported"));
                        }
                    } else if let Some(&i) = row_index.get(pair[0]) {
                        rhs[i] = v;
                    } else {
                        return Err(err(&format!("unknown row '{}'", pair[0])));
                    }
                }
            }
            Section::Bounds => {
                if toks.len() < 3 {
                    return Err(err("malformed BOUNDS line"));
                }
                let kind = toks[0];
                let needs_value = matches!(kind, "UP" | "LO" | "FX");
                let (col, value) = if needs_value {
                    match toks.len() {
                        4 => (toks[2], parse_num(toks[3], lineno)?),
                        3 => (toks[1], parse_num(toks[2], lineno)?),
                        _ => return Err(err("malformed BOUNDS line")),
                    }
                } else {
                    (*toks.last().unwrap(), 0.0)
                };
                let &j = col_index.get(col).ok_or_else(|| err(&format!("unknown column '{col}'")))?;
                match kind {
                    "UP" => {
                        upper[j] = value;
                        if value < 0.0 && lower[j] == 0.0 && !lower_set[j] {
                            lower[j] = f64::NEG_INFINITY;
                        }
                    }
                    "LO" => {
                        lower[j] = value;
                        lower_set[j] = true;
                    }
                    "FX" => {
                        lower[j] = value;
                        upper[j] = value;
                        lower_set[j] = true;
                    }
                    "FR" => {
                        lower[j] = f64::NEG_INFINITY;
                        upper[j] = f64::INFINITY;
                    }
                    "MI" => {
                        lower[j] = f64::NEG_INFINITY;
                        lower_set[j] = true;
                    }
                    "PL" => upper[j] = f64::INFINITY,
                    t => return Err(err(&format!("unsupported bound type '{t}'"))),
                }
            }
            Section::None | Section::Name => return Err(err("data outside of a section")),
        }
    }
    if !saw_end {
        return Err(LpError::Parse { line: 0, msg: "missing ENDATA".into() });
    }
    let mut b = LpBuilder::new(name, sense);
    for j in 0..col_names.len() {
        b.add_column(col_names[j].clone(), costs[j], lower[j], upper[j]);
    }
    let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); row_names.len()];
    for (j, col) in entries.iter().enumerate() {
        for &(i, v) in col {
            rows[i].push((j, v));
        }
    }
    for (i, row) in rows.iter().enumerate() {
        b.add_row(row_names[i].clone(), row_senses[i], rhs[i], row);
    }
    let lp = b.build();
    lp.validate()?;
    Ok(lp)
}

fn parse_sense(s: &str) -> Option<Sense> {
    match s.to_ascii_uppercase().as_str() {
        "MAX" | "MAXIMIZE" => Some(Sense::Maximize),
        "MIN" | "MINIMIZE" => Some(Sense::Minimize),
        _ => None,
    }
}

/// Writes a two-column `name value` solution file.
pub fn write_solution<W: Write>(names: &[String], values: &[f64], mut w: W) -> Result<(), LpError> {
    for (n, v) in names.iter().zip(values) {
        writeln!(w, "{n} {v:e}")?;
    }
    Ok(())
}

/// Reads a two-column `name value` solution file; blank lines and `#`/`*` comments are skipped.
pub fn read_solution<R: BufRead>(r: R) -> Result<Vec<(String, f64)>, LpError> {
    let mut out = Vec::new();
    for (lineno, line) in r.lines().enumerate() {
        let line = line?;
        let t = line.trim();
        if t.is_empty() || t.starts_with('#') || t.starts_with('*') {
            continue;
        }
        let toks: Vec<&str> = t.split_whitespace().collect();
        if toks.len() != 2 {
            return Err(LpError::Parse { line: lineno + 1, msg: "expected 'name value'".into() });
        }
        out.push((toks[0].to_string(), parse_num(toks[1], lineno + 1)?));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn number_spelling() {
        assert_eq!(format_number(1.0), "1");
        assert_eq!(format_number(-0.5), "-0.5");
        assert_eq!(format_number(1e-7), "1e-7");
        assert_eq!(format_number(123456.0), "123456");
        assert_eq!(format_number(1.0 / 3.0), "0.333333333333");
        assert_eq!(format_number(2.0 / 3.0 * 1e9), "666666666.667");
    }

    #[test]
    fn fixed_columns() {
        let line = data_line("", "C0000001", "R0000001", "1.5", Some(("R0000002", "-2")));
        assert_eq!(&line[4..12], "C0000001");
        assert_eq!(&line[14..22], "R0000001");
        assert_eq!(line[24..36].trim(), "1.5");
        assert_eq!(&line[39..47], "R0000002");
        assert_eq!(line[49..].trim(), "-2");
        let bnd = data_line("UP", "BND", "C0000003", "4", None);
        assert_eq!(&bnd[1..3], "UP");
        assert_eq!(&bnd[14..22], "C0000003");
    }

    #[test]
    fn rejects_unknown_rows() {
        let text = "NAME x\nROWS\n N OBJ\n L R1\nCOLUMNS\n    X R2 1\nENDATA\n";
        assert!(matches!(read_mps(text.as_bytes()), Err(LpError::Parse { line: 6, .. })));
    }

    #[test]
    fn solution_file_round_trip() {
        let names = vec!["a".to_string(), "b".to_string()];
        let mut buf = Vec::new();
        write_solution(&names, &[1.25, -3e-9], &mut buf).unwrap();
        let back = read_solution(buf.as_slice()).unwrap();
        assert_eq!(back, vec![("a".into(), 1.25), ("b".into(), -3e-9)]);
    }
}
