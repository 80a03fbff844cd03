//! Fixed-format MPS export and import.
//!
//! Exported files use mangled names (`C0000001`, `R0000001`, objective
//! `COST`) so every name fits the 8-character fields; the original names
//! go to a sidecar table with one `mangled<TAB>original` pair per line.
//! The reader splits on whitespace and so also accepts free-format files.

use std::collections::{HashMap, HashSet};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use thiserror::Error;

use super::model::{MilpModel, Sense};

#[derive(Debug, Error)]
pub enum MpsError {
    #[error("duplicate {kind} name `{name}`")]
    NameCollision { kind: &'static str, name: String },
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("missing {0} section")]
    MissingSection(&'static str),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

const OBJ: &str = "COST";

fn col_name(j: usize) -> String {
    format!("C{:07}", j + 1)
}

fn row_name(i: usize) -> String {
    format!("R{:07}", i + 1)
}

fn num(v: f64) -> String {
    let plain = format!("{v}");
    let s = if plain.len() > 12 {
        let sci = format!("{v:e}");
        if sci.len() < plain.len() {
            sci
        } else {
            plain
        }
    } else {
        plain
    };
    format!("{s:>12}")
}

fn check_unique<'a>(kind: &'static str, names: impl Iterator<Item = &'a str>) -> Result<(), MpsError> {
    let mut seen = HashSet::new();
    for n in names {
        if !seen.insert(n) {
            return Err(MpsError::NameCollision {
                kind,
                name: n.to_string(),
            });
        }
    }
    Ok(())
}

/// Render `model` as MPS text plus the name table.
pub fn export_mps(model: &MilpModel) -> Result<(String, String), MpsError> {
    check_unique("column", model.columns.iter().map(|c| c.name.as_str()))?;
    check_unique("row", model.rows.iter().map(|r| r.name.as_str()))?;

    let mut by_col: Vec<Vec<(usize, f64)>> = vec![Vec::new(); model.num_cols()];
    for (i, r) in model.rows.iter().enumerate() {
        for &(j, a) in &r.coefs {
            by_col[j].push((i, a));
        }
    }

    let mut out = String::new();
    let title: String = model.name.split_whitespace().collect::<Vec<_>>().join("_");
    let _ = writeln!(out, "NAME          {}", if title.is_empty() { "MODEL" } else { &title });
    out.push_str("ROWS\n");
    let _ = writeln!(out, " N  {OBJ}");
    for (i, r) in model.rows.iter().enumerate() {
        let t = match r.sense {
            Sense::Le => 'L',
            Sense::Ge => 'G',
            Sense::Eq => 'E',
        };
        let _ = writeln!(out, " {t}  {}", row_name(i));
    }
    out.push_str("COLUMNS\n");
    let mut in_int = false;
    let mut marker = 0;
    for (j, c) in model.columns.iter().enumerate() {
        if c.integer != in_int {
            let tag = if c.integer { "'INTORG'" } else { "'INTEND'" };
            let _ = writeln!(out, "    MARKER{marker:<4}  'MARKER'                 {tag}");
            marker += 1;
            in_int = c.integer;
        }
        let name = col_name(j);
        if c.cost != 0.0 || by_col[j].is_empty() {
            let _ = writeln!(out, "    {name}  {OBJ:<8}  {}", num(c.cost));
        }
        for &(i, a) in &by_col[j] {
            let _ = writeln!(out, "    {name}  {}  {}", row_name(i), num(a));
        }
    }
    if in_int {
        let _ = writeln!(out, "    MARKER{marker:<4}  'MARKER'                 'INTEND'");
    }
    out.push_str("RHS\n");
    if model.objective_offset != 0.0 {
        let _ = writeln!(out, "    RHS       {OBJ:<8}  {}", num(-model.objective_offset));
    }
    for (i, r) in model.rows.iter().enumerate() {
        if r.rhs != 0.0 {
            let _ = writeln!(out, "    RHS       {}  {}", row_name(i), num(r.rhs));
        }
    }
    if model.rows.iter().any(|r| r.range.is_some()) {
        out.push_str("RANGES\n");
        for (i, r) in model.rows.iter().enumerate() {
            if let Some(v) = r.range {
                let _ = writeln!(out, "    RNG       {}  {}", row_name(i), num(v));
            }
        }
    }
    out.push_str("BOUNDS\n");
    for (j, c) in model.columns.iter().enumerate() {
        let name = col_name(j);
        let (lo, hi) = (c.lower, c.upper);
        if lo == hi {
            let _ = writeln!(out, " FX BND       {name}  {}", num(lo));
            continue;
        }
        if lo == f64::NEG_INFINITY && hi == f64::INFINITY {
            let _ = writeln!(out, " FR BND       {name}");
            continue;
        }
        if lo == f64::NEG_INFINITY {
            let _ = writeln!(out, " MI BND       {name}");
        } else if lo != 0.0 || c.integer {
            let _ = writeln!(out, " LO BND       {name}  {}", num(lo));
        }
        if hi.is_finite() {
            let _ = writeln!(out, " UP BND       {name}  {}", num(hi));
        } else if c.integer {
            let _ = writeln!(out, " PL BND       {name}");
        }
    }
    out.push_str("ENDATA\n");

    let mut names = String::new();
    for (j, c) in model.columns.iter().enumerate() {
        let _ = writeln!(names, "{}\t{}", col_name(j), c.name);
    }
    for (i, r) in model.rows.iter().enumerate() {
        let _ = writeln!(names, "{}\t{}", row_name(i), r.name);
    }
    Ok((out, names))
}

fn names_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".names");
    PathBuf::from(s)
}

/// Write `path` and its `<path>.names` sidecar.
pub fn write_mps(model: &MilpModel, path: &Path) -> Result<(), MpsError> {
    let (mps, names) = export_mps(model)?;
    std::fs::write(path, mps)?;
    std::fs::write(names_path(path), names)?;
    Ok(())
}

/// Read `path`, restoring original names from the sidecar when present.
pub fn read_mps(path: &Path) -> Result<MilpModel, MpsError> {
    let text = std::fs::read_to_string(path)?;
    let sidecar = names_path(path);
    let names = if sidecar.exists() {
        Some(std::fs::read_to_string(sidecar)?)
    } else {
        None
    };
    parse_mps(&text, names.as_deref())
}

#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
enum Section {
    None,
    Name,
    Rows,
    Columns,
    Rhs,
    Ranges,
    Bounds,
    End,
}

/// Parse MPS text; `names` is an optional sidecar table.
pub fn parse_mps(text: &str, names: Option<&str>) -> Result<MilpModel, MpsError> {
    let err = |line: usize, message: String| MpsError::Parse { line, message };
    let mut model = MilpModel::new("");
    let mut section = Section::None;
    let mut seen_rows = false;
    let mut seen_columns = false;
    let mut obj_row: Option<String> = None;
    let mut row_index: HashMap<String, usize> = HashMap::new();
    let mut col_index: HashMap<String, usize> = HashMap::new();
    let mut explicit_bounds: HashSet<usize> = HashSet::new();
    let mut integer = false;

    let parse_num = |line: usize, tok: &str| -> Result<f64, MpsError> {
        tok.parse::<f64>()
            .map_err(|_| err(line, format!("`{tok}` is not a number")))
    };

    for (k, raw) in text.lines().enumerate() {
        let line = k + 1;
        if raw.trim().is_empty() || raw.starts_with('*') {
            continue;
        }
        let toks: Vec<&str> = raw.split_whitespace().collect();
        if !raw.starts_with(' ') && !raw.starts_with('\t') {
            let next = match toks[0] {
                "NAME" => Section::Name,
                "ROWS" => Section::Rows,
                "COLUMNS" => Section::Columns,
                "RHS" => Section::Rhs,
                "RANGES" => Section::Ranges,
                "BOUNDS" => Section::Bounds,
                "ENDATA" => Section::End,
                "OBJSENSE" => return Err(err(line, "OBJSENSE is not supported".into())),
                other => return Err(err(line, format!("unknown section `{other}`"))),
            };
            if next <= section {
                return Err(err(line, format!("section `{}` out of order", toks[0])));
            }
            if next > Section::Rows && !seen_rows {
                return Err(MpsError::MissingSection("ROWS"));
            }
            if next > Section::Columns && !seen_columns {
                return Err(MpsError::MissingSection("COLUMNS"));
            }
            section = next;
            match section {
                Section::Name => model.name = toks[1..].join(" "),
                Section::Rows => seen_rows = true,
                Section::Columns => seen_columns = true,
                Section::End => break,
                _ => {}
            }
            continue;
        }
        match section {
            Section::None | Section::Name | Section::End => {
                return Err(err(line, "data line outside a section".into()));
            }
            Section::Rows => {
                if toks.len() != 2 {
                    return Err(err(line, "expected `<type> <name>`".into()));
                }
                let sense = match toks[0] {
                    "N" => {
                        if obj_row.is_none() {
                            obj_row = Some(toks[1].to_string());
                        }
                        continue;
                    }
                    "L" => Sense::Le,
                    "G" => Sense::Ge,
                    "E" => Sense::Eq,
                    t => return Err(err(line, format!("unknown row type `{t}`"))),
                };
                if row_index.contains_key(toks[1]) {
                    return Err(err(line, format!("duplicate row `{}`", toks[1])));
                }
                row_index.insert(toks[1].to_string(), model.rows.len());
                model.add_row(toks[1], Vec::new(), sense, 0.0);
            }
            Section::Columns => {
                if toks.len() >= 3 && toks[1] == "'MARKER'" {
                    match toks[2] {
                        "'INTORG'" => integer = true,
                        "'INTEND'" => integer = false,
                        t => return Err(err(line, format!("unknown marker `{t}`"))),
                    }
                    continue;
                }
                if toks.len() != 3 && toks.len() != 5 {
                    return Err(err(line, "expected `<column> <row> <value> [<row> <value>]`".into()));
                }
                let j = match col_index.get(toks[0]) {
                    Some(&j) => j,
                    None => {
                        let j = model.add_column(toks[0], 0.0, 0.0, f64::INFINITY, integer);
                        col_index.insert(toks[0].to_string(), j);
                        j
                    }
                };
                for pair in toks[1..].chunks(2) {
                    let v = parse_num(line, pair[1])?;
                    if obj_row.as_deref() == Some(pair[0]) {
                        model.columns[j].cost += v;
                    } else if let Some(&i) = row_index.get(pair[0]) {
                        model.rows[i].coefs.push((j, v));
                    } else {
                        return Err(err(line, format!("unknown row `{}`", pair[0])));
                    }
                }
            }
            Section::Rhs | Section::Ranges => {
                let body = if toks.len() % 2 == 1 { &toks[1..] } else { &toks[..] };
                if body.is_empty() {
                    return Err(err(line, "expected `<row> <value>` pairs".into()));
                }
                for pair in body.chunks(2) {
                    let v = parse_num(line, pair[1])?;
                    if obj_row.as_deref() == Some(pair[0]) {
                        if section == Section::Rhs {
                            model.objective_offset = -v;
                        }
                        continue;
                    }
                    let Some(&i) = row_index.get(pair[0]) else {
                        return Err(err(line, format!("unknown row `{}`", pair[0])));
                    };
                    if section == Section::Rhs {
                        model.rows[i].rhs = v;
                    } else {
                        model.rows[i].range = Some(v);
                    }
                }
            }
            Section::Bounds => {
                if toks.len() < 2 {
                    return Err(err(line, "expected `<type> [<set>] <column> [<value>]`".into()));
                }
                let kind = toks[0];
                let needs_value = matches!(kind, "LO" | "UP" | "FX" | "LI" | "UI");
                let rest = &toks[1..];
                let (name, value) = match (needs_value, rest.len()) {
                    (true, 3) => (rest[1], Some(rest[2])),
                    (true, 2) => (rest[0], Some(rest[1])),
                    (false, 2) => (rest[1], None),
                    (false, 1) => (rest[0], None),
                    (false, 3) if kind == "BV" => (rest[1], None),
                    _ => return Err(err(line, format!("malformed {kind} bound"))),
                };
                let Some(&j) = col_index.get(name) else {
                    return Err(err(line, format!("unknown column `{name}`")));
                };
                let v = value.map(|t| parse_num(line, t)).transpose()?;
                explicit_bounds.insert(j);
                let c = &mut model.columns[j];
                match kind {
                    "LO" | "LI" => c.lower = v.unwrap_or(0.0),
                    "UP" | "UI" => c.upper = v.unwrap_or(0.0),
                    "FX" => {
                        c.lower = v.unwrap_or(0.0);
                        c.upper = c.lower;
                    }
                    "FR" => {
                        c.lower = f64::NEG_INFINITY;
                        c.upper = f64::INFINITY;
                    }
                    "MI" => c.lower = f64::NEG_INFINITY,
                    "PL" => c.upper = f64::INFINITY,
                    "BV" => {
                        c.lower = 0.0;
                        c.upper = 1.0;
                        c.integer = true;
                    }
                    t => return Err(err(line, format!("unknown bound type `{t}`"))),
                }
                if matches!(kind, "LI" | "UI") {
                    c.integer = true;
                }
            }
        }
    }
    if !seen_rows {
        return Err(MpsError::MissingSection("ROWS"));
    }
    if !seen_columns {
        return Err(MpsError::MissingSection("COLUMNS"));
    }
    if section != Section::End {
        return Err(MpsError::MissingSection("ENDATA"));
    }

    if let Some(table) = names {
        let mut map = HashMap::new();
        for (k, l) in table.lines().enumerate() {
            if l.is_empty() {
                continue;
            }
            let Some((a, b)) = l.split_once('\t') else {
                return Err(err(k + 1, "name table line without a tab".into()));
            };
            map.insert(a.to_string(), b.to_string());
        }
        for c in &mut model.columns {
            if let Some(n) = map.get(&c.name) {
                c.name.clone_from(n);
            }
        }
        for r in &mut model.rows {
            if let Some(n) = map.get(&r.name) {
                r.name.clone_from(n);
            }
        }
    }
    Ok(model)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::solver::model::Row;

    /// Structural equality up to row coefficient order.
    fn same_model(a: &MilpModel, b: &MilpModel) -> bool {
        let norm = |r: &Row| {
            let mut c = r.coefs.clone();
            c.sort_by_key(|p| p.0);
            (c, r.sense, r.rhs, r.range, r.name.clone())
        };
        a.columns == b.columns
            && a.objective_offset == b.objective_offset
            && a.rows.len() == b.rows.len()
            && a.rows.iter().zip(&b.rows).all(|(x, y)| norm(x) == norm(y))
    }

    fn sample() -> MilpModel {
        let mut m = MilpModel::new("demo model");
        m.objective_offset = 2.5;
        let x = m.add_column("flow[a,b]", 1.25, 0.0, f64::INFINITY, false);
        let y = m.add_column("open y", -3.0, 0.0, 1.0, true);
        let z = m.add_column("z", 0.0, f64::NEG_INFINITY, 4.0, false);
        let u = m.add_column("u", 7.0, 0.0, 40.0, true);
        let f = m.add_column("free", 0.1, f64::NEG_INFINITY, f64::INFINITY, false);
        m.add_row("cap", vec![(x, 1.0), (y, -200.0)], Sense::Le, 0.0);
        m.add_row("bal", vec![(x, 1.0), (z, 1.0), (u, 1.0)], Sense::Eq, 40.0);
        m.add_ranged_row("rng", vec![(z, 0.333333333333333), (f, 1e-9)], -1.0, 3.0);
        m.add_row("ge", vec![(u, 2.0)], Sense::Ge, 1e7);
        m
    }

    #[test]
    fn round_trip_is_exact() {
        let m = sample();
        let (text, names) = export_mps(&m).unwrap();
        let back = parse_mps(&text, Some(&names)).unwrap();
        assert!(same_model(&m, &back));
        assert_eq!(back.name, "demo_model");
    }

    #[test]
    fn mangled_names_without_table() {
        let (text, _) = export_mps(&sample()).unwrap();
        let back = parse_mps(&text, None).unwrap();
        assert_eq!(back.columns[0].name, "C0000001");
        assert_eq!(back.rows[2].name, "R0000003");
    }

    #[test]
    fn duplicate_names_are_rejected() {
        let mut m = MilpModel::new("d");
        m.add_column("x", 1.0, 0.0, 1.0, false);
        m.add_column("x", 1.0, 0.0, 1.0, false);
        assert!(matches!(export_mps(&m), Err(MpsError::NameCollision { .. })));
    }

    #[test]
    fn truncated_file_names_missing_section() {
        let (text, _) = export_mps(&sample()).unwrap();
        let cut: String = text.lines().take_while(|l| *l != "RHS").map(|l| format!("{l}\n")).collect();
        assert!(matches!(parse_mps(&cut, None), Err(MpsError::MissingSection("ENDATA"))));
        let no_rows = text.replace("ROWS\n", "");
        assert!(matches!(parse_mps(&no_rows, None), Err(MpsError::Parse { .. }) | Err(MpsError::MissingSection("ROWS"))));
    }

    #[test]
    fn bad_number_reports_line() {
        let text = "NAME x\nROWS\n N  COST\n L  R1\nCOLUMNS\n    C1  R1  abc\nENDATA\n";
        match parse_mps(text, None) {
            Err(MpsError::Parse { line, .. }) => assert_eq!(line, 6),
            other => panic!("unexpected {other:?}"),
        }
    }
}
