//! Plain-text node, weight and value files.
//!
//! Nodes: one `x y z` per line. Weights: one `x y z c` per line. Lines
//! starting with `#` are comments; `# key: value` comments are kept as
//! header fields. Numbers are written with 17 significant digits.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::geometry::{NodeFamily, NodeSet, UnitVector3};

/// `# key: value` pairs in file order.
pub type Header = Vec<(String, String)>;

pub fn header_value<'a>(h: &'a Header, key: &str) -> Option<&'a str> {
    h.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
}

fn write_rows(path: &Path, header: &Header, rows: impl Iterator<Item = Vec<f64>>) -> Result<()> {
    let mut w = BufWriter::new(fs::File::create(path)?);
    for (k, v) in header {
        writeln!(w, "# {k}: {v}")?;
    }
    for row in rows {
        let s: Vec<String> = row.iter().map(|v| format!("{v:.16e}")).collect();
        writeln!(w, "{}", s.join(" "))?;
    }
    w.flush()?;
    Ok(())
}

fn parse_rows(text: &str, width: usize) -> Result<(Header, Vec<Vec<f64>>)> {
    let mut header = Header::new();
    let mut rows = Vec::new();
    for (ln, line) in text.lines().enumerate() {
        let t = line.trim();
        if t.is_empty() {
            continue;
        }
        if let Some(c) = t.strip_prefix('#') {
            if let Some((k, v)) = c.split_once(':') {
                header.push((k.trim().to_string(), v.trim().to_string()));
            }
            continue;
        }
        let vals: Vec<f64> = t
            .split_whitespace()
            .map(|s| {
                s.parse::<f64>()
                    .map_err(|e| Error::Parse { line: ln + 1, message: format!("`{s}`: {e}") })
            })
            .collect::<Result<_>>()?;
        if vals.len() != width {
            return Err(Error::Parse {
                line: ln + 1,
                message: format!("expected {width} columns, found {}", vals.len()),
            });
        }
        if let Some(v) = vals.iter().find(|v| !v.is_finite()) {
            return Err(Error::Parse { line: ln + 1, message: format!("non-finite value {v}") });
        }
        rows.push(vals);
    }
    Ok((header, rows))
}

fn to_node(line: usize, r: &[f64]) -> Result<UnitVector3> {
    UnitVector3::new_preserving(r[0], r[1], r[2]).map_err(|e| Error::Parse { line, message: e.to_string() })
}

fn family_from(header: &Header) -> NodeFamily {
    header_value(header, "family").and_then(|f| f.parse().ok()).unwrap_or(NodeFamily::Custom)
}

pub fn write_nodes(path: &Path, x: &NodeSet, extra: &Header) -> Result<()> {
    let mut h = vec![("family".to_string(), x.family().to_string()), ("N".to_string(), x.len().to_string())];
    h.extend(extra.iter().cloned());
    write_rows(path, &h, x.nodes().iter().map(|p| p.to_array().to_vec()))
}

pub fn parse_nodes(text: &str) -> Result<NodeSet> {
    let (h, rows) = parse_rows(text, 3)?;
    let pts = rows.iter().enumerate().map(|(i, r)| to_node(i + 1, r)).collect::<Result<Vec<_>>>()?;
    NodeSet::new(pts, family_from(&h))
}

/// Read nodes, re-normalizing rows that are not unit to rounding.
pub fn read_nodes(path: &Path) -> Result<NodeSet> {
    parse_nodes(&fs::read_to_string(path)?)
}

pub fn write_weights(path: &Path, x: &NodeSet, c: &[f64], header: &Header) -> Result<()> {
    if c.len() != x.len() {
        return Err(Error::LengthMismatch { expected: x.len(), actual: c.len() });
    }
    let mut h = vec![("family".to_string(), x.family().to_string()), ("N".to_string(), x.len().to_string())];
    h.extend(header.iter().cloned());
    write_rows(
        path,
        &h,
        x.nodes().iter().zip(c).map(|(p, w)| {
            let a = p.to_array();
            vec![a[0], a[1], a[2], *w]
        }),
    )
}

pub fn parse_weights(text: &str) -> Result<(NodeSet, Vec<f64>, Header)> {
    let (h, rows) = parse_rows(text, 4)?;
    let pts = rows.iter().enumerate().map(|(i, r)| to_node(i + 1, r)).collect::<Result<Vec<_>>>()?;
    let c = rows.iter().map(|r| r[3]).collect();
    Ok((NodeSet::new(pts, family_from(&h))?, c, h))
}

pub fn read_weights(path: &Path) -> Result<(NodeSet, Vec<f64>, Header)> {
    parse_weights(&fs::read_to_string(path)?)
}

/// Write a rule whose points need not lie on S², e.g. a transported rule.
pub fn write_rule(path: &Path, points: &[[f64; 3]], weights: &[f64], header: &Header) -> Result<()> {
    if weights.len() != points.len() {
        return Err(Error::LengthMismatch { expected: points.len(), actual: weights.len() });
    }
    let mut h = vec![("N".to_string(), points.len().to_string())];
    h.extend(header.iter().cloned());
    write_rows(path, &h, points.iter().zip(weights).map(|(p, w)| vec![p[0], p[1], p[2], *w]))
}

/// Points and weights as written by [`write_rule`], without normalization.
pub fn parse_rule(text: &str) -> Result<(Vec<[f64; 3]>, Vec<f64>, Header)> {
    let (h, rows) = parse_rows(text, 4)?;
    let pts = rows.iter().map(|r| [r[0], r[1], r[2]]).collect();
    let w = rows.iter().map(|r| r[3]).collect();
    Ok((pts, w, h))
}

/// One value per line, comments allowed.
pub fn read_values(path: &Path) -> Result<Vec<f64>> {
    let (_, rows) = parse_rows(&fs::read_to_string(path)?, 1)?;
    Ok(rows.into_iter().map(|r| r[0]).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nodes::fibonacci_nodes;

    #[test]
    fn nodes_round_trip_exactly() {
        let dir = tempdir("nodes");
        let p = dir.join("n.txt");
        let x = fibonacci_nodes(101).unwrap();
        write_nodes(&p, &x, &vec![("seed".into(), "0".into())]).unwrap();
        let y = read_nodes(&p).unwrap();
        assert_eq!(y.family(), NodeFamily::Fibonacci);
        for (a, b) in x.nodes().iter().zip(y.nodes()) {
            assert_eq!(a.to_array(), b.to_array());
        }
        let _ = fs::remove_dir_all(dir);
    }

    #[test]
    fn rejects_bad_rows() {
        assert!(parse_nodes("1 0 0\n0 1 nan\n").is_err());
        assert!(parse_nodes("1 0\n").is_err());
        assert!(parse_nodes("0 0 0\n").is_err());
        assert!(parse_nodes("1 0 0\n2 0 0\n").is_err());
        let x = parse_nodes("# comment\n2 0 0\n0 3 0\n").unwrap();
        assert_eq!(x.get(0).to_array(), [1.0, 0.0, 0.0]);
    }

    #[test]
    fn weights_header() {
        let (x, c, h) = parse_weights("# kernel: tps-m2\n1 0 0 0.5\n0 1 0 0.25\n").unwrap();
        assert_eq!(x.len(), 2);
        assert_eq!(c, vec![0.5, 0.25]);
        assert_eq!(header_value(&h, "kernel"), Some("tps-m2"));
    }

    #[test]
    fn rule_keeps_off_sphere_points() {
        let d = tempdir("rule");
        let p = d.join("r.txt");
        let pts = [[1.0, 0.0, 0.0], [0.0, 0.0, 0.5]];
        write_rule(&p, &pts, &[0.25, 1.0 / 3.0], &vec![("surface".into(), "spheroid".into())]).unwrap();
        let (q, w, h) = parse_rule(&fs::read_to_string(&p).unwrap()).unwrap();
        assert_eq!(q, pts.to_vec());
        assert_eq!(w, vec![0.25, 1.0 / 3.0]);
        assert_eq!(header_value(&h, "surface"), Some("spheroid"));
        let _ = fs::remove_dir_all(d);
    }

    fn tempdir(tag: &str) -> std::path::PathBuf {
        let d = std::env::temp_dir().join(format!("sphquad-io-{tag}-{}", std::process::id()));
        fs::create_dir_all(&d).unwrap();
        d
    }
}
