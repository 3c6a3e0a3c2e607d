//! Line-oriented sparse text format for instances and solutions.
//!
//! ```text
//! c free-form comment
//! bip <num_vars> <num_obj_terms> <num_rows>
//! o <var> <coef>                                 (num_obj_terms lines)
//! r <le|eq|ge> <rhs> <nnz> <var> <coef> ...      (num_rows lines)
//! v <var> lambda <k> | x <i> <j> <k> <l> | y <a> <b> <k> <l>   (optional)
//! ```
//!
//! All variables are binary and the objective is minimized. A solution file
//! holds an optional `status <word>` line followed by `<var> <value>` lines;
//! unlisted variables are 0.

use std::fmt::Write as _;

use super::{Constraint, IpInstance, Relation, RowKind, VarId, VarTag};
use crate::environment::CellIndex;
use crate::error::{Error, Result};

pub fn write_text(inst: &IpInstance) -> String {
    let mut out = String::new();
    writeln!(out, "bip {} {} {}", inst.num_vars, inst.objective.len(), inst.constraints.len()).unwrap();
    for (v, c) in &inst.objective {
        writeln!(out, "o {v} {c}").unwrap();
    }
    for row in &inst.constraints {
        write!(out, "r {} {} {}", row.relation.keyword(), row.rhs, row.terms.len()).unwrap();
        for (v, c) in &row.terms {
            write!(out, " {v} {c}").unwrap();
        }
        out.push('\n');
    }
    for (v, tag) in inst.tags.iter().enumerate() {
        match tag {
            Some(VarTag::Lambda { k }) => writeln!(out, "v {v} lambda {k}"),
            Some(VarTag::X { i, j, k, l }) => writeln!(out, "v {v} x {i} {j} {k} {l}"),
            Some(VarTag::Y { a, b, k, l }) => writeln!(out, "v {v} y {a} {b} {k} {l}"),
            None => Ok(()),
        }
        .unwrap();
    }
    out
}

struct Tokens<'a> {
    line: usize,
    it: std::str::SplitWhitespace<'a>,
}

impl<'a> Tokens<'a> {
    fn err<T>(&self, msg: impl Into<String>) -> Result<T> {
        Err(Error::Parse { line: self.line, msg: msg.into() })
    }

    fn word(&mut self) -> Result<&'a str> {
        match self.it.next() {
            Some(w) => Ok(w),
            None => self.err("unexpected end of line"),
        }
    }

    fn num<T: std::str::FromStr>(&mut self) -> Result<T> {
        let w = self.word()?;
        match w.parse() {
            Ok(v) => Ok(v),
            Err(_) => self.err(format!("bad number '{w}'")),
        }
    }

    fn end(&mut self) -> Result<()> {
        match self.it.next() {
            None => Ok(()),
            Some(w) => self.err(format!("trailing token '{w}'")),
        }
    }
}

fn lines(text: &str) -> impl Iterator<Item = Tokens<'_>> {
    text.lines().enumerate().filter_map(|(n, l)| {
        let t = l.trim();
        (!t.is_empty() && !t.starts_with('c')).then(|| Tokens { line: n + 1, it: t.split_whitespace() })
    })
}

pub fn parse_text(text: &str) -> Result<IpInstance> {
    let mut header: Option<(usize, usize, usize)> = None;
    let mut objective = Vec::new();
    let mut constraints = Vec::new();
    let mut tags: Vec<Option<VarTag>> = Vec::new();
    let mut last_line = 0;
    for mut t in lines(text) {
        last_line = t.line;
        let kind = t.word()?;
        if header.is_none() && kind != "bip" {
            return t.err("expected 'bip' header");
        }
        let nv = header.map_or(0, |h| h.0);
        let var = |t: &mut Tokens| -> Result<VarId> {
            let v: usize = t.num()?;
            if v >= nv {
                return t.err(format!("variable {v} out of range"));
            }
            Ok(VarId(v))
        };
        match kind {
            "bip" => {
                if header.is_some() {
                    return t.err("duplicate header");
                }
                let h = (t.num()?, t.num()?, t.num()?);
                tags = vec![None; h.0];
                header = Some(h);
            }
            "o" => {
                let v = var(&mut t)?;
                objective.push((v, t.num()?));
            }
            "r" => {
                let relation = match t.word()? {
                    "le" => Relation::Le,
                    "eq" => Relation::Eq,
                    "ge" => Relation::Ge,
                    w => return t.err(format!("unknown relation '{w}'")),
                };
                let rhs = t.num()?;
                let nnz: usize = t.num()?;
                let mut terms = Vec::with_capacity(nnz);
                for _ in 0..nnz {
                    let v = var(&mut t)?;
                    terms.push((v, t.num()?));
                }
                constraints.push(Constraint { terms, relation, rhs, kind: RowKind::Imported });
            }
            "v" => {
                let v = var(&mut t)?;
                let tag = match t.word()? {
                    "lambda" => VarTag::Lambda { k: t.num()? },
                    "x" => VarTag::X { i: t.num()?, j: t.num()?, k: t.num()?, l: CellIndex(t.num()?) },
                    "y" => VarTag::Y { a: t.num()?, b: t.num()?, k: t.num()?, l: CellIndex(t.num()?) },
                    w => return t.err(format!("unknown tag '{w}'")),
                };
                tags[v.0] = Some(tag);
            }
            w => return t.err(format!("unknown line type '{w}'")),
        }
        t.end()?;
    }
    let Some((nv, no, nr)) = header else {
        return Err(Error::Parse { line: last_line, msg: "missing header".into() });
    };
    if objective.len() != no || constraints.len() != nr {
        return Err(Error::Parse {
            line: last_line,
            msg: format!(
                "header declares {no} objective terms and {nr} rows, found {} and {}",
                objective.len(),
                constraints.len()
            ),
        });
    }
    IpInstance::from_parts(nv, objective, constraints, tags)
}

/// Contents of a solution file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SolutionFile {
    pub status: Option<String>,
    pub values: Vec<bool>,
}

impl SolutionFile {
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        if let Some(s) = &self.status {
            writeln!(out, "status {s}").unwrap();
        }
        for (v, &on) in self.values.iter().enumerate() {
            if on {
                writeln!(out, "{v} 1").unwrap();
            }
        }
        out
    }
}

/// Reads a solution for an instance with `num_vars` variables. Values must be
/// within 1e-6 of 0 or 1.
pub fn parse_solution(text: &str, num_vars: usize) -> Result<SolutionFile> {
    let mut status = None;
    let mut values = vec![false; num_vars];
    for mut t in lines(text) {
        let first = t.word()?;
        if first == "status" {
            status = Some(t.word()?.to_ascii_lowercase());
            t.end()?;
            continue;
        }
        let v: usize = match first.parse() {
            Ok(v) if v < num_vars => v,
            _ => return t.err(format!("bad variable id '{first}'")),
        };
        let x: f64 = t.num()?;
        values[v] = if x.abs() < 1e-6 {
            false
        } else if (x - 1.0).abs() < 1e-6 {
            true
        } else {
            return t.err(format!("value {x} is not binary"));
        };
        t.end()?;
    }
    Ok(SolutionFile { status, values })
}
