//! Plain-text file formats.
//!
//! Edge list: a header line `n=<n> directed=1 selfloops=1` followed by one
//! `i j` pair per line (1-indexed, row-major order). Dense: one line per row,
//! entries `0`/`1` separated by single spaces. Both writers end every line
//! with `\n`, so reading and re-writing a canonical file is byte-exact.

use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::inference::PosteriorSample;
use crate::model::{AdjacencyMatrix, ClusterAssignment, ConnectivityMatrix, EdgeProbabilityMatrix};

fn parse_err(line: usize, msg: impl Into<String>) -> Error {
    Error::Parse { line, msg: msg.into() }
}

pub fn write_edge_list(a: &AdjacencyMatrix) -> String {
    let mut out = format!("n={} directed=1 selfloops=1\n", a.n());
    for i in 0..a.n() {
        for (j, &v) in a.row(i).iter().enumerate() {
            if v == 1 {
                let _ = writeln!(out, "{} {}", i + 1, j + 1);
            }
        }
    }
    out
}

pub fn parse_edge_list(text: &str) -> Result<AdjacencyMatrix> {
    let mut lines = text.lines().enumerate();
    let (_, header) = lines.next().ok_or_else(|| parse_err(1, "missing header"))?;
    let mut n = None;
    for field in header.split_whitespace() {
        match field.split_once('=') {
            Some(("n", v)) => {
                n = Some(v.parse::<usize>().map_err(|e| parse_err(1, format!("bad n: {e}")))?)
            }
            Some(("directed", "1")) | Some(("selfloops", "1")) => {}
            _ => return Err(parse_err(1, format!("unsupported header field `{field}`"))),
        }
    }
    let n = n.ok_or_else(|| parse_err(1, "header lacks n=<n>"))?;
    let mut a = AdjacencyMatrix::zeros(n);
    for (idx, line) in lines {
        let line_no = idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        let mut it = line.split_whitespace();
        let mut index = |name: &str| -> Result<usize> {
            let v: usize = it
                .next()
                .ok_or_else(|| parse_err(line_no, format!("missing {name}")))?
                .parse()
                .map_err(|e| parse_err(line_no, format!("bad {name}: {e}")))?;
            if v == 0 || v > n {
                return Err(parse_err(line_no, format!("{name} = {v} outside 1..={n}")));
            }
            Ok(v - 1)
        };
        let i = index("source")?;
        let j = index("target")?;
        if it.next().is_some() {
            return Err(parse_err(line_no, "trailing fields"));
        }
        a.set(i, j, true);
    }
    Ok(a)
}

pub fn write_dense(a: &AdjacencyMatrix) -> String {
    let mut out = String::with_capacity(a.n() * a.n() * 2);
    for i in 0..a.n() {
        for (j, v) in a.row(i).iter().enumerate() {
            if j > 0 {
                out.push(' ');
            }
            out.push(if *v == 1 { '1' } else { '0' });
        }
        out.push('\n');
    }
    out
}

pub fn parse_dense(text: &str) -> Result<AdjacencyMatrix> {
    let rows = text
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(idx, line)| {
            line.split_whitespace()
                .map(|tok| match tok {
                    "0" => Ok(0u8),
                    "1" => Ok(1u8),
                    other => Err(parse_err(idx + 1, format!("entry `{other}` is not 0 or 1"))),
                })
                .collect::<Result<Vec<u8>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    AdjacencyMatrix::from_rows(&rows)
}

/// Reads either format, picking the edge list when the first line is a header.
pub fn read_adjacency(path: &Path) -> Result<AdjacencyMatrix> {
    let text = fs::read_to_string(path)?;
    if text.starts_with("n=") {
        parse_edge_list(&text)
    } else {
        parse_dense(&text)
    }
}

/// Ground truth as stored by `simulate`; labels are 1-based.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruthFile {
    pub n: usize,
    pub k: usize,
    pub delta: f64,
    pub seed: u64,
    pub z: Vec<usize>,
    pub q: Vec<Vec<f64>>,
}

impl TruthFile {
    pub fn assignment(&self) -> Result<ClusterAssignment> {
        ClusterAssignment::from_one_based(&self.z, self.k)
    }

    pub fn connectivity(&self) -> Result<ConnectivityMatrix> {
        ConnectivityMatrix::from_rows(&self.q)
    }
}

/// Whitespace-separated rows; `f64` Display output round-trips exactly.
pub fn write_theta(theta: &EdgeProbabilityMatrix) -> String {
    let mut out = String::new();
    for row in theta.entries().chunks(theta.n().max(1)) {
        let line: Vec<String> = row.iter().map(f64::to_string).collect();
        out.push_str(&line.join(" "));
        out.push('\n');
    }
    out
}

pub fn parse_theta(text: &str) -> Result<EdgeProbabilityMatrix> {
    let mut entries = Vec::new();
    let mut rows = 0;
    for (idx, line) in text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()) {
        for tok in line.split_whitespace() {
            entries.push(
                tok.parse::<f64>()
                    .map_err(|e| parse_err(idx + 1, format!("bad probability `{tok}`: {e}")))?,
            );
        }
        rows += 1;
    }
    EdgeProbabilityMatrix::new(rows, entries)
}

/// Header of the posterior dump: `sweep, z_1..z_n, Q_11..Q_kk, log_post`.
pub fn posterior_header(n: usize, k: usize) -> Vec<String> {
    let mut cols = vec!["sweep".to_string()];
    cols.extend((1..=n).map(|i| format!("z_{i}")));
    for r in 1..=k {
        for s in 1..=k {
            cols.push(if k < 10 { format!("Q_{r}{s}") } else { format!("Q_{r}_{s}") });
        }
    }
    cols.push("log_post".into());
    cols
}

pub fn write_posterior_csv<W: std::io::Write>(samples: &[PosteriorSample], out: W) -> Result<()> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(out);
    if let Some(first) = samples.first() {
        w.write_record(posterior_header(first.z.n(), first.z.k()))?;
    }
    for s in samples {
        let mut rec = vec![s.sweep.to_string()];
        rec.extend(s.z.one_based().iter().map(usize::to_string));
        rec.extend(s.q.entries().iter().map(f64::to_string));
        rec.push(s.log_post.to_string());
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

/// Parses a posterior dump back into samples (`k` inferred from the header).
pub fn read_posterior_csv<R: std::io::Read>(input: R) -> Result<Vec<PosteriorSample>> {
    let mut rdr = csv::Reader::from_reader(input);
    let headers = rdr.headers()?.clone();
    let n = headers.iter().filter(|h| h.starts_with("z_")).count();
    let q_cols = headers.iter().filter(|h| h.starts_with("Q_")).count();
    let k = (q_cols as f64).sqrt().round() as usize;
    if k * k != q_cols || headers.len() != n + q_cols + 2 {
        return Err(parse_err(1, "posterior header is not sweep, z_*, Q_*, log_post"));
    }
    let mut out = Vec::new();
    for (idx, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let line = idx + 2;
        let field = |c: usize| rec.get(c).ok_or_else(|| parse_err(line, "short record"));
        let sweep = field(0)?.parse().map_err(|e| parse_err(line, format!("sweep: {e}")))?;
        let labels = (1..=n)
            .map(|c| field(c)?.parse::<usize>().map_err(|e| parse_err(line, format!("z: {e}"))))
            .collect::<Result<Vec<_>>>()?;
        let q = (n + 1..=n + q_cols)
            .map(|c| field(c)?.parse::<f64>().map_err(|e| parse_err(line, format!("Q: {e}"))))
            .collect::<Result<Vec<_>>>()?;
        let log_post = field(n + q_cols + 1)?
            .parse()
            .map_err(|e| parse_err(line, format!("log_post: {e}")))?;
        out.push(PosteriorSample {
            sweep,
            z: ClusterAssignment::from_one_based(&labels, k)?,
            q: ConnectivityMatrix::new(k, q)?,
            log_post,
        });
    }
    Ok(out)
}

/// Writes `contents` to `path` through a temporary file and a rename.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    let name = path
        .file_name()
        .ok_or_else(|| Error::InvalidArgument(format!("`{}` has no file name", path.display())))?;
    let tmp = dir.join(format!(".{}.tmp-{}", name.to_string_lossy(), std::process::id()));
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(contents)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn edge_list_layout() {
        let a = AdjacencyMatrix::from_rows(&[vec![1, 0], vec![1, 1]]).unwrap();
        let text = write_edge_list(&a);
        assert_eq!(text, "n=2 directed=1 selfloops=1\n1 1\n2 1\n2 2\n");
        assert_eq!(parse_edge_list(&text).unwrap(), a);
        assert_eq!(write_dense(&a), "1 0\n1 1\n");
    }

    #[test]
    fn edge_list_rejects_bad_input() {
        assert!(parse_edge_list("").is_err());
        assert!(parse_edge_list("n=2 directed=0 selfloops=1\n").is_err());
        assert!(parse_edge_list("n=2 directed=1 selfloops=1\n3 1\n").is_err());
        assert!(parse_edge_list("n=2 directed=1 selfloops=1\n1\n").is_err());
        assert!(parse_dense("1 2\n0 0\n").is_err());
        assert!(parse_dense("1 0\n0\n").is_err());
    }

    #[test]
    fn theta_text_roundtrip() {
        let t = EdgeProbabilityMatrix::new(2, vec![0.1, 1.0 / 3.0, 0.0, 1.0]).unwrap();
        assert_eq!(parse_theta(&write_theta(&t)).unwrap(), t);
    }

    #[test]
    fn posterior_csv_roundtrip() {
        let samples = vec![PosteriorSample {
            sweep: 7,
            z: ClusterAssignment::new(vec![0, 1, 1], 2).unwrap(),
            q: ConnectivityMatrix::new(2, vec![0.125, 0.7, 1.0 / 3.0, 0.9]).unwrap(),
            log_post: -3.25,
        }];
        let mut buf = Vec::new();
        write_posterior_csv(&samples, &mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("sweep,z_1,z_2,z_3,Q_11,Q_12,Q_21,Q_22,log_post\n7,1,2,2,"));
        assert_eq!(read_posterior_csv(&buf[..]).unwrap(), samples);
    }

    fn adjacency() -> impl Strategy<Value = AdjacencyMatrix> {
        (0usize..9).prop_flat_map(|n| {
            proptest::collection::vec(0u8..2, n * n)
                .prop_map(move |e| AdjacencyMatrix::new(n, e).unwrap())
        })
    }

    proptest! {
        #[test]
        fn formats_roundtrip_bit_exact(a in adjacency()) {
            let el = write_edge_list(&a);
            let back = parse_edge_list(&el).unwrap();
            prop_assert_eq!(&back, &a);
            prop_assert_eq!(write_edge_list(&back), el);
            let dense = write_dense(&a);
            if a.n() > 0 {
                let back = parse_dense(&dense).unwrap();
                prop_assert_eq!(write_dense(&back), dense);
                prop_assert_eq!(back, a);
            }
        }
    }
}
