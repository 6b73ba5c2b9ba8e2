//! SDPA sparse format (`.dat-s`) in its dual form
//! `max ⟨F_0, Y⟩ s.t. ⟨F_i, Y⟩ = c_i, Y ⪰ 0`.
//!
//! A problem `min ⟨A_0, X⟩` maps to `F_0 = -A_0`, `F_i = A_i`. One-sided
//! bounds get a slack in a trailing LP block: `⟨A_i, X⟩ - s = l` or
//! `⟨A_i, X⟩ + s = u`. A two-sided row is written as two such rows.

use std::fmt::Write as _;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::model::{detect_splr, SplrSdp};

/// Dense data read from an SDPA file. Bounds are `(lower, upper)`.
#[derive(Clone, Debug, PartialEq)]
pub struct DenseSdp {
    pub dim: usize,
    pub objective: DMatrix<f64>,
    pub constraints: Vec<DMatrix<f64>>,
    pub bounds: Vec<(Option<f64>, Option<f64>)>,
}

impl DenseSdp {
    pub fn matrices(&self) -> Vec<DMatrix<f64>> {
        std::iter::once(self.objective.clone()).chain(self.constraints.iter().cloned()).collect()
    }
}

fn fmt_num(v: f64) -> String {
    // Shortest round-trip representation.
    format!("{v:?}")
}

pub fn write_sdpa(p: &SplrSdp) -> Result<String> {
    let n = p.n;
    let mut rows: Vec<(usize, f64, f64)> = Vec::new(); // (constraint, slack sign, rhs)
    for (k, c) in p.constraints.iter().enumerate() {
        match (c.lower, c.upper) {
            (Some(l), Some(u)) if l == u => rows.push((k, 0.0, l)),
            (l, u) => {
                if let Some(l) = l {
                    rows.push((k, -1.0, l));
                }
                if let Some(u) = u {
                    rows.push((k, 1.0, u));
                }
            }
        }
    }
    let slacks = rows.iter().filter(|r| r.1 != 0.0).count();
    let mut out = String::new();
    writeln!(out, "\"SDP in dual form; objective negated\"").unwrap();
    writeln!(out, "{}", rows.len()).unwrap();
    if slacks > 0 {
        writeln!(out, "2\n{n} -{slacks}").unwrap();
    } else {
        writeln!(out, "1\n{n}").unwrap();
    }
    let rhs: Vec<String> = rows.iter().map(|r| fmt_num(r.2)).collect();
    writeln!(out, "{}", rhs.join(" ")).unwrap();
    let emit = |out: &mut String, matno: usize, a: &DMatrix<f64>, sign: f64| {
        for j in 0..n {
            for i in 0..=j {
                let v = a[(i, j)];
                if v != 0.0 {
                    writeln!(out, "{matno} 1 {} {} {}", i + 1, j + 1, fmt_num(sign * v)).unwrap();
                }
            }
        }
    };
    emit(&mut out, 0, &p.dense_matrix(0)?, -1.0);
    let mut slack = 0;
    for (r, &(k, sign, _)) in rows.iter().enumerate() {
        emit(&mut out, r + 1, &p.dense_matrix(k + 1)?, 1.0);
        if sign != 0.0 {
            slack += 1;
            writeln!(out, "{} 2 {slack} {slack} {}", r + 1, fmt_num(sign)).unwrap();
        }
    }
    Ok(out)
}

/// Numeric tokens of a line; the first non-numeric token starts a comment
/// (`2 =mdim`).
fn numbers(line: &str) -> impl Iterator<Item = &str> {
    line.split(|c: char| c.is_whitespace() || matches!(c, ',' | '{' | '}' | '(' | ')'))
        .filter(|t| !t.is_empty())
        .take_while(|t| t.parse::<f64>().is_ok())
}

fn parse_err(line: usize, message: impl Into<String>) -> Error {
    Error::Parse { line, message: message.into() }
}

/// Reads a file with one SDP block and an optional LP block holding one
/// `±1` slack per row.
pub fn parse_sdpa(text: &str) -> Result<DenseSdp> {
    let mut tokens: Vec<(usize, &str)> = Vec::new();
    let mut header_done = 0;
    let mut lines = text.lines().enumerate().filter(|(_, l)| {
        let t = l.trim_start();
        !(t.is_empty() || t.starts_with('"') || t.starts_with('*'))
    });
    // m, nBlocks and blockStruct may share lines; read them token-wise.
    let mut header: Vec<(usize, &str)> = Vec::new();
    for (no, line) in lines.by_ref() {
        header.extend(numbers(line).map(|t| (no + 1, t)));
        if header.len() >= 2 {
            let nb: usize = header[1].1.parse().map_err(|_| parse_err(header[1].0, "bad block count"))?;
            if header.len() >= 2 + nb {
                header_done = nb;
                break;
            }
        }
    }
    let need = |i: usize| header.get(i).copied().ok_or_else(|| parse_err(0, "truncated header"));
    let (line, tok) = need(0)?;
    let m: usize = tok.parse().map_err(|_| parse_err(line, "bad constraint count"))?;
    let sizes: Vec<i64> = (0..header_done)
        .map(|b| {
            let (line, tok) = need(2 + b)?;
            tok.parse().map_err(|_| parse_err(line, "bad block size"))
        })
        .collect::<Result<_>>()?;
    tokens.extend(header.into_iter().skip(2 + header_done));
    while tokens.len() < m {
        let (no, line) = lines.next().ok_or_else(|| parse_err(0, "missing right-hand side"))?;
        tokens.extend(numbers(line).map(|t| (no + 1, t)));
    }
    let rhs: Vec<f64> = tokens[..m].iter().map(|(line, t)| t.parse().map_err(|_| parse_err(*line, "bad right-hand side"))).collect::<Result<_>>()?;

    let sdp_blocks: Vec<usize> = (0..sizes.len()).filter(|&b| sizes[b] > 0).collect();
    if sdp_blocks.len() != 1 {
        return Err(parse_err(0, format!("expected exactly one SDP block, found {}", sdp_blocks.len())));
    }
    let sdp = sdp_blocks[0] + 1;
    let n = sizes[sdp - 1] as usize;
    let mut mats = vec![DMatrix::zeros(n, n); m + 1];
    let mut slack: Vec<Option<f64>> = vec![None; m];
    for (no, line) in lines {
        let t: Vec<&str> = numbers(line).collect();
        if t.len() != 5 {
            return Err(parse_err(no + 1, "entry needs matno blkno i j value"));
        }
        let int = |s: &str| s.parse::<usize>().map_err(|_| parse_err(no + 1, format!("bad index {s:?}")));
        let (k, b, i, j) = (int(t[0])?, int(t[1])?, int(t[2])?, int(t[3])?);
        let v: f64 = t[4].parse().map_err(|_| parse_err(no + 1, "bad value"))?;
        if k > m || b == 0 || b > sizes.len() {
            return Err(parse_err(no + 1, "matrix or block number out of range"));
        }
        if b == sdp {
            if i == 0 || j == 0 || i > n || j > n {
                return Err(parse_err(no + 1, "entry outside the block"));
            }
            mats[k][(i - 1, j - 1)] = v;
            mats[k][(j - 1, i - 1)] = v;
        } else {
            if k == 0 || i != j || slack[k - 1].is_some() || v.abs() != 1.0 {
                return Err(parse_err(no + 1, "LP block entries must be one ±1 slack per constraint"));
            }
            slack[k - 1] = Some(v);
        }
    }
    let objective = -mats.remove(0);
    let bounds = rhs
        .iter()
        .zip(&slack)
        .map(|(&c, s)| match s {
            None => (Some(c), Some(c)),
            Some(s) if *s < 0.0 => (Some(c), None),
            Some(_) => (None, Some(c)),
        })
        .collect();
    Ok(DenseSdp { dim: n, objective, constraints: mats, bounds })
}

/// Dense import: parse, then split each matrix into its part on `pattern`
/// plus a shared low-rank part.
pub fn import_sdpa(text: &str, pattern: &Graph, rank_tol: f64) -> Result<SplrSdp> {
    let d = parse_sdpa(text)?;
    if d.dim != pattern.n() {
        return Err(Error::DimensionMismatch { expected: d.dim, found: pattern.n() });
    }
    detect_splr(&d.matrices(), &d.bounds, pattern, rank_tol)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instances;

    #[test]
    fn round_trip_keeps_dense_data() {
        for (name, p) in instances::catalog() {
            let text = write_sdpa(&p).unwrap();
            let d = parse_sdpa(&text).unwrap();
            assert_eq!(d.dim, p.n, "{name}");
            assert!(linalg_gap(&d.objective, &p.dense_matrix(0).unwrap()) < 1e-12, "{name}");
            let mut row = 0;
            for (k, c) in p.constraints.iter().enumerate() {
                let a = p.dense_matrix(k + 1).unwrap();
                let split = !c.is_equality() && c.lower.is_some() && c.upper.is_some();
                let copies = if split { 2 } else { usize::from(c.lower.is_some() || c.upper.is_some()) };
                for _ in 0..copies {
                    assert!(linalg_gap(&d.constraints[row], &a) < 1e-12, "{name} row {row}");
                    row += 1;
                }
                if !split && copies == 1 {
                    assert_eq!(d.bounds[row - 1], (c.lower, c.upper), "{name}");
                }
            }
            assert_eq!(row, d.constraints.len());
        }
    }

    fn linalg_gap(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
        crate::linalg::max_abs(&(a - b))
    }

    #[test]
    fn import_recovers_low_rank_split() {
        let g = Graph::path(6);
        let p = instances::gen_min_bisection(&g).unwrap();
        let back = import_sdpa(&write_sdpa(&p).unwrap(), &g, 1e-9).unwrap();
        assert_eq!(back.ell(), 1);
        for i in 0..=p.m() {
            assert!(linalg_gap(&back.dense_matrix(i).unwrap(), &p.dense_matrix(i).unwrap()) < 1e-9);
        }
    }

    #[test]
    fn parses_braces_and_trailing_comments() {
        let text = "\"toy\"\n* comment\n2 =mdim\n1 =nblocks\n{2}\n{1.0, 2.0}\n0 1 1 1 -1\n1 1 1 1 1\n2 1 1 2 1\n2 1 2 2 1\n";
        let d = parse_sdpa(text).unwrap();
        assert_eq!(d.dim, 2);
        assert_eq!(d.objective[(0, 0)], 1.0);
        assert_eq!(d.constraints[1], DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 1.0]));
        assert_eq!(d.bounds, vec![(Some(1.0), Some(1.0)), (Some(2.0), Some(2.0))]);
    }

    #[test]
    fn malformed_entry_reports_line() {
        let text = "1\n1\n2\n1.0\n1 1 1 x 1\n";
        match parse_sdpa(text) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 5),
            other => panic!("{other:?}"),
        }
    }
}
