//! MPS export and import with mangled 8-character names and a sidecar table
//! mapping them back to the original identifiers. Numbers are written with
//! the shortest decimal form that parses back to the identical float, so a
//! write/read cycle reproduces every coefficient bit for bit.

use std::collections::HashMap;
use std::fmt::Write as _;

use super::{LpProblem, RowId, Sense, VarId};

#[derive(Debug, thiserror::Error)]
pub enum MpsError {
    #[error("mps parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
}

/// The MPS text plus the name table (`mangled<TAB>original`, one per line).
pub struct MpsDocument {
    pub mps: String,
    pub names: String,
}

fn row_name(i: usize) -> String {
    format!("R{:07}", i + 1)
}

fn col_name(j: usize) -> String {
    format!("C{:07}", j + 1)
}

fn num(v: f64) -> String {
    format!("{}", v)
}

pub fn write_mps(p: &LpProblem) -> MpsDocument {
    let n = p.num_vars();
    let mut mps = String::new();
    let mut names = String::new();

    let title: String = p
        .name
        .chars()
        .map(|c| if c.is_whitespace() { '_' } else { c })
        .collect();
    let _ = writeln!(mps, "NAME {}", title);
    mps.push_str("OBJSENSE\n");
    mps.push_str(if p.maximize { "    MAX\n" } else { "    MIN\n" });

    mps.push_str("ROWS\n");
    mps.push_str(" N OBJ\n");
    for (i, row) in p.rows().iter().enumerate() {
        let tag = match row.sense {
            Sense::Le => 'L',
            Sense::Ge => 'G',
            Sense::Eq => 'E',
        };
        let _ = writeln!(mps, " {} {}", tag, row_name(i));
        let _ = writeln!(names, "{}\t{}", row_name(i), row.name);
    }

    let mut cols: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
    for (i, row) in p.rows().iter().enumerate() {
        for &(v, a) in &row.terms {
            cols[v.0].push((i, a));
        }
    }

    mps.push_str("COLUMNS\n");
    let mut in_int = false;
    let mut marker = 0usize;
    for j in 0..n {
        let v = p.var(VarId(j));
        if v.integer != in_int {
            marker += 1;
            let kind = if v.integer { "'INTORG'" } else { "'INTEND'" };
            let _ = writeln!(mps, "    M{:07} 'MARKER' {}", marker, kind);
            in_int = v.integer;
        }
        // Every column gets at least one entry so that reading the file
        // back recreates the full variable list in the original order.
        if v.obj != 0.0 || cols[j].is_empty() {
            let _ = writeln!(mps, "    {} OBJ {}", col_name(j), num(v.obj));
        }
        for &(i, a) in &cols[j] {
            let _ = writeln!(mps, "    {} {} {}", col_name(j), row_name(i), num(a));
        }
        let _ = writeln!(names, "{}\t{}", col_name(j), v.name);
    }
    if in_int {
        marker += 1;
        let _ = writeln!(mps, "    M{:07} 'MARKER' 'INTEND'", marker);
    }

    mps.push_str("RHS\n");
    for (i, row) in p.rows().iter().enumerate() {
        if row.rhs != 0.0 {
            let _ = writeln!(mps, "    RHS {} {}", row_name(i), num(row.rhs));
        }
    }

    mps.push_str("BOUNDS\n");
    for j in 0..n {
        let v = p.var(VarId(j));
        let c = col_name(j);
        if v.lb == v.ub {
            let _ = writeln!(mps, " FX BND {} {}", c, num(v.lb));
            continue;
        }
        if v.lb == f64::NEG_INFINITY {
            let _ = writeln!(mps, " MI BND {}", c);
        } else if v.lb != 0.0 {
            let _ = writeln!(mps, " LO BND {} {}", c, num(v.lb));
        }
        if v.ub != f64::INFINITY {
            let _ = writeln!(mps, " UP BND {} {}", c, num(v.ub));
        }
    }
    mps.push_str("ENDATA\n");

    MpsDocument { mps, names }
}

#[derive(PartialEq)]
enum Section {
    Start,
    ObjSense,
    Rows,
    Columns,
    Rhs,
    Bounds,
    Done,
}

struct ColAcc {
    name: String,
    lb: f64,
    ub: f64,
    obj: f64,
    integer: bool,
}

/// Parses MPS text into a problem. Names stay as written; use
/// [`apply_name_table`] to restore originals from the sidecar table.
pub fn read_mps(text: &str) -> Result<LpProblem, MpsError> {
    let err = |line: usize, msg: &str| MpsError::Parse { line, msg: msg.into() };

    let mut section = Section::Start;
    let mut name = String::from("model");
    let mut maximize = false;
    let mut obj_row: Option<String> = None;
    let mut row_names: Vec<String> = Vec::new();
    let mut row_sense: Vec<Sense> = Vec::new();
    let mut row_idx: HashMap<String, usize> = HashMap::new();
    let mut row_terms: Vec<Vec<(VarId, f64)>> = Vec::new();
    let mut rhs: Vec<f64> = Vec::new();
    let mut cols: Vec<ColAcc> = Vec::new();
    let mut col_idx: HashMap<String, usize> = HashMap::new();
    let mut in_int = false;

    for (lineno, raw) in text.lines().enumerate() {
        let lineno = lineno + 1;
        if raw.trim_start().starts_with('*') || raw.trim().is_empty() {
            continue;
        }
        let header = !raw.starts_with(' ') && !raw.starts_with('\t');
        let tok: Vec<&str> = raw.split_whitespace().collect();
        if header {
            match tok[0] {
                "NAME" => {
                    if tok.len() > 1 {
                        name = tok[1].to_string();
                    }
                    continue;
                }
                "OBJSENSE" => {
                    if tok.len() > 1 {
                        maximize = tok[1].eq_ignore_ascii_case("MAX");
                    } else {
                        section = Section::ObjSense;
                    }
                    continue;
                }
                "ROWS" => {
                    section = Section::Rows;
                    continue;
                }
                "COLUMNS" => {
                    section = Section::Columns;
                    continue;
                }
                "RHS" => {
                    section = Section::Rhs;
                    continue;
                }
                "BOUNDS" => {
                    section = Section::Bounds;
                    continue;
                }
                "RANGES" => return Err(err(lineno, "RANGES section not supported")),
                "ENDATA" => {
                    section = Section::Done;
                    break;
                }
                other => return Err(err(lineno, &format!("unknown section `{}`", other))),
            }
        }
        match section {
            Section::Start | Section::Done => {
                return Err(err(lineno, "data before any section header"))
            }
            Section::ObjSense => {
                maximize = tok[0].eq_ignore_ascii_case("MAX");
                section = Section::Rows;
            }
            Section::Rows => {
                if tok.len() != 2 {
                    return Err(err(lineno, "rows entry needs a sense and a name"));
                }
                let rname = tok[1].to_string();
                match tok[0] {
                    "N" => {
                        if obj_row.is_some() {
                            return Err(err(lineno, "multiple objective rows"));
                        }
                        obj_row = Some(rname);
                    }
                    s => {
                        let sense = match s {
                            "L" => Sense::Le,
                            "G" => Sense::Ge,
                            "E" => Sense::Eq,
                            _ => return Err(err(lineno, "row sense must be N, L, G or E")),
                        };
                        if row_idx.contains_key(&rname) {
                            return Err(err(lineno, "duplicate row name"));
                        }
                        row_idx.insert(rname.clone(), row_names.len());
                        row_names.push(rname);
                        row_sense.push(sense);
                        row_terms.push(Vec::new());
                        rhs.push(0.0);
                    }
                }
            }
            Section::Columns => {
                if tok.len() >= 3 && tok[1] == "'MARKER'" {
                    match tok[2] {
                        "'INTORG'" => in_int = true,
                        "'INTEND'" => in_int = false,
                        _ => return Err(err(lineno, "unknown marker")),
                    }
                    continue;
                }
                if tok.len() < 3 || tok.len() % 2 == 0 {
                    return Err(err(lineno, "columns entry needs name and row/value pairs"));
                }
                let cname = tok[0];
                let j = *col_idx.entry(cname.to_string()).or_insert_with(|| {
                    cols.push(ColAcc {
                        name: cname.to_string(),
                        lb: 0.0,
                        ub: f64::INFINITY,
                        obj: 0.0,
                        integer: in_int,
                    });
                    cols.len() - 1
                });
                for pair in tok[1..].chunks(2) {
                    let val: f64 = pair[1]
                        .parse()
                        .map_err(|_| err(lineno, "bad numeric value"))?;
                    if Some(pair[0]) == obj_row.as_deref() {
                        cols[j].obj += val;
                    } else {
                        let i = *row_idx
                            .get(pair[0])
                            .ok_or_else(|| err(lineno, "unknown row in COLUMNS"))?;
                        row_terms[i].push((VarId(j), val));
                    }
                }
            }
            Section::Rhs => {
                if tok.len() < 3 || tok.len() % 2 == 0 {
                    return Err(err(lineno, "rhs entry needs set name and row/value pairs"));
                }
                for pair in tok[1..].chunks(2) {
                    let val: f64 = pair[1]
                        .parse()
                        .map_err(|_| err(lineno, "bad numeric value"))?;
                    if Some(pair[0]) == obj_row.as_deref() {
                        return Err(err(lineno, "objective rhs offsets not supported"));
                    }
                    let i = *row_idx
                        .get(pair[0])
                        .ok_or_else(|| err(lineno, "unknown row in RHS"))?;
                    rhs[i] = val;
                }
            }
            Section::Bounds => {
                if tok.len() < 3 {
                    return Err(err(lineno, "bounds entry too short"));
                }
                let j = *col_idx
                    .get(tok[2])
                    .ok_or_else(|| err(lineno, "unknown column in BOUNDS"))?;
                let val = || -> Result<f64, MpsError> {
                    tok.get(3)
                        .ok_or_else(|| err(lineno, "bound needs a value"))?
                        .parse()
                        .map_err(|_| err(lineno, "bad numeric value"))
                };
                match tok[0] {
                    "UP" => cols[j].ub = val()?,
                    "LO" => cols[j].lb = val()?,
                    "FX" => {
                        let v = val()?;
                        cols[j].lb = v;
                        cols[j].ub = v;
                    }
                    "MI" => cols[j].lb = f64::NEG_INFINITY,
                    "PL" => cols[j].ub = f64::INFINITY,
                    "BV" => {
                        cols[j].lb = 0.0;
                        cols[j].ub = 1.0;
                        cols[j].integer = true;
                    }
                    _ => return Err(err(lineno, "unsupported bound type")),
                }
                if cols[j].lb > cols[j].ub {
                    return Err(err(lineno, "bounds cross"));
                }
            }
        }
    }
    if section != Section::Done {
        return Err(err(text.lines().count(), "missing ENDATA"));
    }
    if obj_row.is_none() {
        return Err(err(0, "no objective row declared"));
    }

    let mut p = LpProblem::new(&name, maximize);
    for c in &cols {
        p.add_var(c.name.clone(), c.lb, c.ub, c.obj, c.integer);
    }
    for (i, rname) in row_names.into_iter().enumerate() {
        p.add_row(rname, row_sense[i], rhs[i], std::mem::take(&mut row_terms[i]));
    }
    Ok(p)
}

/// Renames rows and columns of a parsed problem back to their originals
/// using the sidecar name table produced by [`write_mps`].
pub fn apply_name_table(p: &mut LpProblem, table: &str) -> Result<(), MpsError> {
    let mut map: HashMap<&str, &str> = HashMap::new();
    for (lineno, line) in table.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let (mangled, original) = line.split_once('\t').ok_or(MpsError::Parse {
            line: lineno + 1,
            msg: "name table line needs mangled<TAB>original".into(),
        })?;
        map.insert(mangled, original);
    }
    for j in 0..p.num_vars() {
        if let Some(orig) = map.get(p.var(VarId(j)).name.as_str()).copied() {
            p.rename_var(VarId(j), orig);
        }
    }
    for i in 0..p.num_rows() {
        if let Some(orig) = map.get(p.row(RowId(i)).name.as_str()).copied() {
            p.rename_row(RowId(i), orig);
        }
    }
    Ok(())
}
