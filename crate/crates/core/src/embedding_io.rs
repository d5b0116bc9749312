//! Plain-text embedding files.
//!
//! ```text
//! <entity_count> <dim>
//! n:<node_id> v1 ... vk
//! a:<attr_id> v1 ... vk
//! ```
//!
//! Values are written with 17 significant digits (C `%.17g`), which
//! round-trips every `f64` exactly.

use std::collections::HashSet;
use std::fs;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use nalgebra::DMatrix;

use crate::aux_graph::entity_tag;
use crate::embed::{EmbeddingModel, DEFAULT_NEG, DEFAULT_ORDER};
use crate::error::{Result, SgrError};
use crate::graph::AttributedGraph;

/// Formats `x` like C's `printf("%.17g", x)`.
pub fn format_g17(x: f64) -> String {
    const P: i32 = 17;
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return if x.is_sign_negative() { "-0".into() } else { "0".into() };
    }
    let sci = format!("{:.*e}", (P - 1) as usize, x);
    let (mantissa, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    if exp < -4 || exp >= P {
        let mantissa = trim_fraction(mantissa);
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{mantissa}e{sign}{:02}", exp.abs())
    } else {
        let decimals = (P - 1 - exp) as usize;
        trim_fraction(&format!("{:.*}", decimals, x)).to_string()
    }
}

fn trim_fraction(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

/// In-memory contents of an embedding file.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingFile {
    pub dim: usize,
    pub rows: Vec<(String, Vec<f64>)>,
}

impl EmbeddingFile {
    /// Tags every row of `model.x()` with its entity id in `g`.
    pub fn from_model(model: &EmbeddingModel, g: &AttributedGraph) -> Result<Self> {
        if model.n() != g.n() || model.m() != g.m() {
            return Err(SgrError::Shape(format!(
                "model has n={}, m={} but graph has n={}, m={}",
                model.n(),
                model.m(),
                g.n(),
                g.m()
            )));
        }
        let rows = model
            .x()
            .row_iter()
            .enumerate()
            .map(|(e, r)| (entity_tag(g, e), r.iter().copied().collect()))
            .collect();
        Ok(EmbeddingFile {
            dim: model.dim(),
            rows,
        })
    }

    pub fn entity_count(&self) -> usize {
        self.rows.len()
    }

    pub fn write_to<W: Write>(&self, mut out: W) -> Result<()> {
        let io = |e| SgrError::io("<embedding writer>", e);
        writeln!(out, "{} {}", self.rows.len(), self.dim).map_err(io)?;
        for (tag, v) in &self.rows {
            if tag.is_empty() || tag.contains(char::is_whitespace) {
                return Err(SgrError::EmbeddingFormat(format!(
                    "entity tag {tag:?} is empty or contains whitespace"
                )));
            }
            if v.len() != self.dim {
                return Err(SgrError::EmbeddingFormat(format!(
                    "row {tag} has {} values, expected {}",
                    v.len(),
                    self.dim
                )));
            }
            let mut line = tag.clone();
            for &x in v {
                line.push(' ');
                line.push_str(&format_g17(x));
            }
            writeln!(out, "{line}").map_err(io)?;
        }
        Ok(())
    }

    pub fn read_from<R: Read>(input: R) -> Result<Self> {
        let bad = |msg: String| SgrError::EmbeddingFormat(msg);
        let mut lines = BufReader::new(input).lines();
        let header = lines
            .next()
            .ok_or_else(|| bad("empty file".into()))?
            .map_err(|e| SgrError::io("<embedding reader>", e))?;
        let fields: Vec<&str> = header.split_whitespace().collect();
        let (count, dim) = match fields.as_slice() {
            [c, d] => (
                c.parse::<usize>().map_err(|e| bad(format!("header count: {e}")))?,
                d.parse::<usize>().map_err(|e| bad(format!("header dim: {e}")))?,
            ),
            _ => return Err(bad(format!("header {header:?} is not `count dim`"))),
        };
        let mut rows = Vec::with_capacity(count);
        let mut seen = HashSet::new();
        for (i, line) in lines.enumerate() {
            let line = line.map_err(|e| SgrError::io("<embedding reader>", e))?;
            if line.trim().is_empty() {
                continue;
            }
            let mut it = line.split_whitespace();
            let tag = it.next().expect("non-blank line").to_string();
            let v = it
                .map(|s| s.parse::<f64>())
                .collect::<std::result::Result<Vec<f64>, _>>()
                .map_err(|e| bad(format!("line {}: {e}", i + 2)))?;
            if v.len() != dim {
                return Err(bad(format!(
                    "line {}: {} values, header says {dim}",
                    i + 2,
                    v.len()
                )));
            }
            if !seen.insert(tag.clone()) {
                return Err(bad(format!("line {}: duplicate tag {tag}", i + 2)));
            }
            rows.push((tag, v));
        }
        if rows.len() != count {
            return Err(bad(format!(
                "header says {count} rows, found {}",
                rows.len()
            )));
        }
        Ok(EmbeddingFile { dim, rows })
    }

    /// Vectors for the nodes (or attributes) of `g`, in index order.
    fn entity_matrix(&self, g: &AttributedGraph, attrs: bool) -> Result<DMatrix<f64>> {
        let ids = if attrs { g.attr_ids() } else { g.node_ids() };
        let prefix = if attrs { "a:" } else { "n:" };
        let lookup: std::collections::HashMap<&str, &Vec<f64>> = self
            .rows
            .iter()
            .filter_map(|(t, v)| t.strip_prefix(prefix).map(|id| (id, v)))
            .collect();
        let mut out = DMatrix::zeros(ids.len(), self.dim);
        for (i, id) in ids.iter().enumerate() {
            let v = lookup
                .get(id.as_str())
                .ok_or_else(|| SgrError::EmbeddingFormat(format!("no vector for {prefix}{id}")))?;
            out.row_mut(i).copy_from_slice(v);
        }
        Ok(out)
    }

    pub fn node_matrix(&self, g: &AttributedGraph) -> Result<DMatrix<f64>> {
        self.entity_matrix(g, false)
    }

    pub fn attr_matrix(&self, g: &AttributedGraph) -> Result<DMatrix<f64>> {
        self.entity_matrix(g, true)
    }

    /// Rebuilds a model over the entities of `g`. The file holds only `X`:
    /// the context matrix comes back as zeros and the walk parameters as
    /// their defaults.
    pub fn to_model(&self, g: &AttributedGraph) -> Result<EmbeddingModel> {
        let mut x = self.node_matrix(g)?.insert_rows(g.n(), g.m(), 0.0);
        x.rows_mut(g.n(), g.m()).copy_from(&self.attr_matrix(g)?);
        let y = DMatrix::zeros(x.nrows(), x.ncols());
        EmbeddingModel::new(x, y, g.n(), g.m(), DEFAULT_ORDER, DEFAULT_NEG)
    }
}

pub fn write_embeddings(model: &EmbeddingModel, g: &AttributedGraph, path: &Path) -> Result<()> {
    let file = EmbeddingFile::from_model(model, g)?;
    let mut buf = Vec::new();
    file.write_to(&mut buf)?;
    fs::write(path, buf).map_err(|e| SgrError::io(path, e))
}

pub fn read_embeddings(path: &Path) -> Result<EmbeddingFile> {
    let f = fs::File::open(path).map_err(|e| SgrError::io(path, e))?;
    EmbeddingFile::read_from(f)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn g17_matches_printf() {
        let cases = [
            (0.0, "0"),
            (1.0, "1"),
            (-2.5, "-2.5"),
            (0.1, "0.10000000000000001"),
            (1e-5, "1.0000000000000001e-05"),
            (123456.0, "123456"),
            (1e17, "1e+17"),
            (1e16, "10000000000000000"),
            (-0.0001, "-0.0001"),
            (f64::MAX, "1.7976931348623157e+308"),
        ];
        for (x, want) in cases {
            assert_eq!(format_g17(x), want, "{x:e}");
        }
    }

    #[test]
    fn single_row_format() {
        let file = EmbeddingFile {
            dim: 2,
            rows: vec![("n:a".into(), vec![0.0, 1.0])],
        };
        let mut buf = Vec::new();
        file.write_to(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "1 2\nn:a 0 1\n");
    }

    #[test]
    fn header_mismatch_rejected() {
        let text = "2 4\nn:a 1 2 3 4\nn:b 1 2 3 4\nn:c 1 2 3 4\n";
        assert!(matches!(
            EmbeddingFile::read_from(text.as_bytes()),
            Err(SgrError::EmbeddingFormat(_))
        ));
        let short = "1 3\nn:a 1 2\n";
        assert!(EmbeddingFile::read_from(short.as_bytes()).is_err());
        let dup = "2 1\nn:a 1\nn:a 2\n";
        assert!(EmbeddingFile::read_from(dup.as_bytes()).is_err());
    }

    #[test]
    fn whitespace_tag_rejected_on_write() {
        let file = EmbeddingFile {
            dim: 1,
            rows: vec![("n:a b".into(), vec![0.0])],
        };
        assert!(file.write_to(Vec::new()).is_err());
    }

    #[test]
    fn model_round_trips_through_file() {
        let g = crate::graph::parse_graph(("e", "a\tb\nb\tc\n"), ("f", "a\tx\nc\ty\n"), None).unwrap();
        let model = crate::embed::embed(&g, &crate::embed::EmbedParams { dim: 3, ..Default::default() }).unwrap();
        let mut buf = Vec::new();
        EmbeddingFile::from_model(&model, &g).unwrap().write_to(&mut buf).unwrap();
        let back = EmbeddingFile::read_from(buf.as_slice()).unwrap().to_model(&g).unwrap();
        assert_eq!(back.x(), model.x());
        assert_eq!((back.n(), back.m(), back.dim()), (3, 2, 3));
    }

    proptest! {
        #[test]
        fn g17_round_trips(bits in any::<u64>()) {
            let x = f64::from_bits(bits);
            prop_assume!(x.is_finite());
            let back: f64 = format_g17(x).parse().unwrap();
            prop_assert_eq!(back.to_bits(), x.to_bits());
        }

        #[test]
        fn file_round_trips(rows in prop::collection::vec(prop::collection::vec(-1e6f64..1e6, 3), 1..6)) {
            let file = EmbeddingFile {
                dim: 3,
                rows: rows.into_iter().enumerate().map(|(i, v)| (format!("n:{i}"), v)).collect(),
            };
            let mut buf = Vec::new();
            file.write_to(&mut buf).unwrap();
            prop_assert_eq!(EmbeddingFile::read_from(buf.as_slice()).unwrap(), file);
        }
    }
}
