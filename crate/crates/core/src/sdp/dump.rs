//! Plain-text problem dump.
//!
//! ```text
//! sdp 1
//! vars <n>
//! equalities <p>
//! blocks <size_1> ... <size_k>
//! c                      one "<var> <value>" line per nonzero, then "end"
//! A                      one "<row> <var> <value>" line per nonzero, then "end"
//! b                      one "<row> <value>" line per nonzero, then "end"
//! F <block>              one "<var> <i> <j> <value>" line per upper-triangle
//!                        nonzero, var 0 is the constant matrix and var k
//!                        multiplies v_(k-1); then "end"
//! ```
//!
//! Indices are zero-based except for the shifted variable index inside `F`
//! sections. Values use Rust's shortest round-trip formatting.

use std::fmt::Write;

use super::{PsdBlock, SdpProblem};
use crate::error::{Error, Result};

pub fn write_dump(p: &SdpProblem) -> String {
    let mut out = String::new();
    let sizes: Vec<String> = p.blocks.iter().map(|b| b.size().to_string()).collect();
    let _ = writeln!(out, "sdp 1");
    let _ = writeln!(out, "vars {}", p.num_vars());
    let _ = writeln!(out, "equalities {}", p.num_equalities());
    let _ = writeln!(out, "blocks {}", sizes.join(" "));
    let _ = writeln!(out, "c");
    for (i, v) in p.c.iter().enumerate().filter(|(_, v)| **v != 0.0) {
        let _ = writeln!(out, "{i} {v:e}");
    }
    let _ = writeln!(out, "end\nA");
    for r in 0..p.a.nrows() {
        for c in 0..p.a.ncols() {
            let v = p.a[(r, c)];
            if v != 0.0 {
                let _ = writeln!(out, "{r} {c} {v:e}");
            }
        }
    }
    let _ = writeln!(out, "end\nb");
    for (i, v) in p.b.iter().enumerate().filter(|(_, v)| **v != 0.0) {
        let _ = writeln!(out, "{i} {v:e}");
    }
    let _ = writeln!(out, "end");
    for (j, blk) in p.blocks.iter().enumerate() {
        let _ = writeln!(out, "F {j}");
        let mats = std::iter::once((0, &blk.constant)).chain(blk.terms.iter().map(|(i, m)| (i + 1, m)));
        for (var, m) in mats {
            for r in 0..m.nrows() {
                for c in r..m.ncols() {
                    if m[(r, c)] != 0.0 {
                        let _ = writeln!(out, "{var} {r} {c} {:e}", m[(r, c)]);
                    }
                }
            }
        }
        let _ = writeln!(out, "end");
    }
    out
}

fn perr(line: usize, msg: impl std::fmt::Display) -> Error {
    Error::Parse(format!("line {line}: {msg}"))
}

pub fn parse_dump(text: &str) -> Result<SdpProblem> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));
    let mut header = |key: &str| -> Result<(usize, Vec<String>)> {
        let (ln, l) = lines.next().ok_or_else(|| Error::Parse(format!("missing '{key}' line")))?;
        let mut parts = l.split_whitespace();
        if parts.next() != Some(key) {
            return Err(perr(ln, format!("expected '{key}'")));
        }
        Ok((ln, parts.map(str::to_string).collect()))
    };
    let num = |ln: usize, s: &str| -> Result<usize> { s.parse().map_err(|_| perr(ln, format!("bad integer '{s}'"))) };

    let (ln, v) = header("sdp")?;
    if v != ["1"] {
        return Err(perr(ln, "unsupported dump version"));
    }
    let (ln, v) = header("vars")?;
    let n = num(ln, v.first().map_or("", String::as_str))?;
    let (ln, v) = header("equalities")?;
    let p_rows = num(ln, v.first().map_or("", String::as_str))?;
    let (ln, v) = header("blocks")?;
    let sizes = v.iter().map(|s| num(ln, s)).collect::<Result<Vec<_>>>()?;

    let mut prob = SdpProblem::new(n);
    prob.a = nalgebra::DMatrix::zeros(p_rows, n);
    prob.b = nalgebra::DVector::zeros(p_rows);
    prob.blocks = sizes.iter().map(|&s| PsdBlock::new(s)).collect();

    let mut section: Option<(String, usize)> = None;
    for (ln, l) in lines {
        let parts: Vec<&str> = l.split_whitespace().collect();
        let float = |s: &str| -> Result<f64> { s.parse().map_err(|_| perr(ln, format!("bad number '{s}'"))) };
        let idx = |s: &str, bound: usize| -> Result<usize> {
            let i: usize = s.parse().map_err(|_| perr(ln, format!("bad index '{s}'")))?;
            if i >= bound {
                return Err(perr(ln, format!("index {i} out of range")));
            }
            Ok(i)
        };
        match (&section, parts.as_slice()) {
            (None, ["c"]) | (None, ["A"]) | (None, ["b"]) => section = Some((parts[0].to_string(), 0)),
            (None, ["F", j]) => section = Some(("F".into(), idx(j, sizes.len())?)),
            (Some(_), ["end"]) => section = None,
            (Some((s, _)), [i, v]) if s == "c" => prob.c[idx(i, n)?] += float(v)?,
            (Some((s, _)), [i, v]) if s == "b" => prob.b[idx(i, p_rows)?] += float(v)?,
            (Some((s, _)), [r, c, v]) if s == "A" => prob.a[(idx(r, p_rows)?, idx(c, n)?)] += float(v)?,
            (Some((s, j)), [var, r, c, v]) if s == "F" => {
                let var = idx(var, n + 1)?;
                let size = sizes[*j];
                let (r, c) = (idx(r, size)?, idx(c, size)?);
                let var = if var == 0 { None } else { Some(var - 1) };
                prob.blocks[*j].add_entry(var, r, c, float(v)?);
            }
            _ => return Err(perr(ln, format!("unexpected '{l}'"))),
        }
    }
    if section.is_some() {
        return Err(Error::Parse("unterminated section".into()));
    }
    Ok(prob)
}
