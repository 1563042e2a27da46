//! Class attribute matrix and its CSV representation.
//!
//! ```text
//! class,role,a0,a1,...
//! zebra,seen,1,0,...
//! okapi,unseen,1,1,...
//! ```

use std::collections::HashSet;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::numeric::Matrix;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ClassRole {
    Seen,
    Unseen,
}

impl ClassRole {
    fn token(self) -> &'static str {
        match self {
            ClassRole::Seen => "seen",
            ClassRole::Unseen => "unseen",
        }
    }
}

/// Attribute vectors for all `C = C_S + C_U` classes.
///
/// Seen classes occupy indices `0..C_S`, unseen classes `C_S..C`.
/// Vectors are stored one per row (a `C × a` matrix); [`AttributeMatrix::as_columns`]
/// returns the conventional `a × C` layout.
#[derive(Clone, Debug, PartialEq)]
pub struct AttributeMatrix {
    vectors: Matrix,
    num_seen: usize,
    class_names: Vec<String>,
    /// `source_rows[k]` is the file row (0-based, header excluded) class `k` came from.
    source_rows: Vec<usize>,
}

impl AttributeMatrix {
    /// `seen` and `unseen` hold one attribute vector per class.
    pub fn new(seen: &[Vec<f64>], unseen: &[Vec<f64>]) -> Result<Self> {
        let names = (0..seen.len() + unseen.len())
            .map(|k| format!("class{k}"))
            .collect();
        Self::with_names(seen, unseen, names)
    }

    pub fn with_names(seen: &[Vec<f64>], unseen: &[Vec<f64>], names: Vec<String>) -> Result<Self> {
        let all: Vec<&Vec<f64>> = seen.iter().chain(unseen).collect();
        let vectors = Matrix::from_rows(&all)?;
        let n = all.len();
        Self::from_parts(vectors, seen.len(), names, (0..n).collect())
    }

    /// Rebuilds from a `C × a` matrix whose first `num_seen` rows are seen classes.
    pub fn from_class_rows(vectors: Matrix, num_seen: usize) -> Result<Self> {
        let n = vectors.rows();
        let names = (0..n).map(|k| format!("class{k}")).collect();
        Self::from_parts(vectors, num_seen, names, (0..n).collect())
    }

    fn from_parts(
        vectors: Matrix,
        num_seen: usize,
        class_names: Vec<String>,
        source_rows: Vec<usize>,
    ) -> Result<Self> {
        if num_seen == 0 {
            return Err(Error::invalid("attribute matrix needs at least one seen class"));
        }
        if vectors.rows() <= num_seen {
            return Err(Error::invalid("attribute matrix needs at least one unseen class"));
        }
        if vectors.cols() == 0 {
            return Err(Error::invalid("attribute dimension must be at least 1"));
        }
        if !vectors.is_finite() {
            return Err(Error::invalid("attribute matrix contains non-finite values"));
        }
        if class_names.len() != vectors.rows() {
            return Err(Error::invalid("one class name per attribute vector required"));
        }
        let mut seen_names = HashSet::new();
        for name in &class_names {
            if !seen_names.insert(name.as_str()) {
                return Err(Error::invalid(format!("duplicate class name `{name}`")));
            }
        }
        Ok(AttributeMatrix {
            vectors,
            num_seen,
            class_names,
            source_rows,
        })
    }

    pub fn dim(&self) -> usize {
        self.vectors.cols()
    }

    pub fn num_seen(&self) -> usize {
        self.num_seen
    }

    pub fn num_unseen(&self) -> usize {
        self.vectors.rows() - self.num_seen
    }

    pub fn num_classes(&self) -> usize {
        self.vectors.rows()
    }

    pub fn is_seen(&self, class: usize) -> bool {
        class < self.num_seen
    }

    pub fn seen_classes(&self) -> std::ops::Range<usize> {
        0..self.num_seen
    }

    pub fn unseen_classes(&self) -> std::ops::Range<usize> {
        self.num_seen..self.num_classes()
    }

    /// Attribute vector `a_k`.
    pub fn vector(&self, class: usize) -> &[f64] {
        self.vectors.row(class)
    }

    /// Class vectors as rows (`C × a`).
    pub fn class_rows(&self) -> &Matrix {
        &self.vectors
    }

    /// `A = [a_1 | … | a_C]` (`a × C`).
    pub fn as_columns(&self) -> Matrix {
        self.vectors.transpose()
    }

    pub fn class_names(&self) -> &[String] {
        &self.class_names
    }

    pub fn class_name(&self, class: usize) -> &str {
        &self.class_names[class]
    }

    /// Permutation from class index to originating file row.
    pub fn source_rows(&self) -> &[usize] {
        &self.source_rows
    }

    /// Sub-problem with the given classes, in order, the first `num_seen` of them seen.
    pub fn select(&self, classes: &[usize], num_seen: usize) -> Result<Self> {
        let rows: Vec<&[f64]> = classes.iter().map(|&k| self.vector(k)).collect();
        let vectors = Matrix::from_rows(&rows)?;
        let names = classes.iter().map(|&k| self.class_names[k].clone()).collect();
        let source = classes.iter().map(|&k| self.source_rows[k]).collect();
        Self::from_parts(vectors, num_seen, names, source)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("class,role");
        for j in 0..self.dim() {
            let _ = write!(out, ",a{j}");
        }
        out.push('\n');
        for k in 0..self.num_classes() {
            let role = if self.is_seen(k) {
                ClassRole::Seen
            } else {
                ClassRole::Unseen
            };
            let _ = write!(out, "{},{}", self.class_names[k], role.token());
            for v in self.vector(k) {
                let _ = write!(out, ",{v}");
            }
            out.push('\n');
        }
        out
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        fs::write(path, self.to_csv())?;
        Ok(())
    }

    /// Parses the CSV text. Rows may list classes in any role order; the result
    /// is stably reordered seen-first.
    pub fn parse_csv(text: &str) -> Result<Self> {
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.trim_end_matches('\r')));
        let (_, header) = lines.next().ok_or(Error::Parse {
            line: 1,
            msg: "missing header".into(),
        })?;
        let head: Vec<&str> = header.split(',').map(str::trim).collect();
        if head.len() < 3 || head[0] != "class" || head[1] != "role" {
            return Err(Error::Parse {
                line: 1,
                msg: "header must be `class,role,a0,a1,...`".into(),
            });
        }
        let dim = head.len() - 2;

        let mut seen = Vec::new();
        let mut unseen = Vec::new();
        let mut names = HashSet::new();
        let mut row_index = 0;
        for (line, raw) in lines {
            if raw.trim().is_empty() {
                continue;
            }
            let cells: Vec<&str> = raw.split(',').map(str::trim).collect();
            if cells.len() != dim + 2 {
                return Err(Error::Parse {
                    line,
                    msg: format!("expected {} cells, found {}", dim + 2, cells.len()),
                });
            }
            let name = cells[0].to_string();
            if name.is_empty() {
                return Err(Error::Parse {
                    line,
                    msg: "empty class name".into(),
                });
            }
            if !names.insert(name.clone()) {
                return Err(Error::Parse {
                    line,
                    msg: format!("duplicate class name `{name}`"),
                });
            }
            let role = match cells[1] {
                "seen" => ClassRole::Seen,
                "unseen" => ClassRole::Unseen,
                other => {
                    return Err(Error::Parse {
                        line,
                        msg: format!("unknown role `{other}` (expected seen|unseen)"),
                    })
                }
            };
            let mut values = Vec::with_capacity(dim);
            for (j, cell) in cells[2..].iter().enumerate() {
                let v: f64 = cell.parse().map_err(|_| Error::Parse {
                    line,
                    msg: format!("attribute a{j} is not a number: `{cell}`"),
                })?;
                if !v.is_finite() {
                    return Err(Error::Parse {
                        line,
                        msg: format!("attribute a{j} is not finite"),
                    });
                }
                values.push(v);
            }
            let entry = (row_index, name, values);
            match role {
                ClassRole::Seen => seen.push(entry),
                ClassRole::Unseen => unseen.push(entry),
            }
            row_index += 1;
        }
        let num_seen = seen.len();
        let ordered: Vec<_> = seen.into_iter().chain(unseen).collect();
        let rows: Vec<&Vec<f64>> = ordered.iter().map(|(_, _, v)| v).collect();
        let vectors = if rows.is_empty() {
            Matrix::zeros(0, dim)
        } else {
            Matrix::from_rows(&rows)?
        };
        let source_rows = ordered.iter().map(|(r, _, _)| *r).collect();
        let class_names = ordered.into_iter().map(|(_, n, _)| n).collect();
        Self::from_parts(vectors, num_seen, class_names, source_rows)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let text = fs::read_to_string(path)?;
        Self::parse_csv(&text)
    }
}

pub fn load_attributes(path: impl AsRef<Path>) -> Result<AttributeMatrix> {
    AttributeMatrix::load(path)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_small_file() {
        let text = "class,role,a0,a1\ncat,seen,1,0\ndog,seen,0.5,1\nfox,unseen,1,1\n";
        let attrs = AttributeMatrix::parse_csv(text).unwrap();
        assert_eq!(attrs.dim(), 2);
        assert_eq!(attrs.num_seen(), 2);
        assert_eq!(attrs.num_unseen(), 1);
        assert_eq!(attrs.vector(1), &[0.5, 1.0]);
        assert_eq!(attrs.class_name(2), "fox");
    }

    #[test]
    fn awa_shaped_file() {
        let mut text = String::from("class,role");
        for j in 0..85 {
            text.push_str(&format!(",a{j}"));
        }
        text.push('\n');
        for k in 0..50 {
            let role = if k < 40 { "seen" } else { "unseen" };
            text.push_str(&format!("c{k},{role}"));
            for j in 0..85 {
                text.push_str(&format!(",{}", (k * j) % 2));
            }
            text.push('\n');
        }
        let attrs = AttributeMatrix::parse_csv(&text).unwrap();
        assert_eq!((attrs.dim(), attrs.num_seen(), attrs.num_unseen()), (85, 40, 10));
    }

    #[test]
    fn reorders_seen_first_stably() {
        let text = "class,role,a0\nu1,unseen,1\ns1,seen,2\nu2,unseen,3\ns2,seen,4\n";
        let attrs = AttributeMatrix::parse_csv(text).unwrap();
        // manual reordering: seen rows in file order, then unseen rows in file order
        let names: Vec<&str> = attrs.class_names().iter().map(String::as_str).collect();
        assert_eq!(names, ["s1", "s2", "u1", "u2"]);
        assert_eq!(attrs.source_rows(), &[1, 3, 0, 2]);
        let vals: Vec<f64> = (0..4).map(|k| attrs.vector(k)[0]).collect();
        assert_eq!(vals, [2.0, 4.0, 1.0, 3.0]);
    }

    #[test]
    fn parse_errors_carry_line_numbers() {
        let cases = [
            ("class,role,a0\nx,seen,1\ny,seen,1,2\nz,unseen,0\n", 3),
            ("class,role,a0\nx,seen,abc\ny,unseen,1\n", 2),
            ("class,role,a0\nx,seen,1\ny,maybe,1\n", 3),
            ("class,role,a0\nx,seen,1\nx,unseen,1\n", 3),
        ];
        for (text, want) in cases {
            match AttributeMatrix::parse_csv(text) {
                Err(Error::Parse { line, .. }) => assert_eq!(line, want, "{text}"),
                other => panic!("expected parse error, got {other:?}"),
            }
        }
    }

    #[test]
    fn requires_both_roles() {
        assert!(AttributeMatrix::parse_csv("class,role,a0\nx,seen,1\n").is_err());
        assert!(AttributeMatrix::parse_csv("class,role,a0\nx,unseen,1\n").is_err());
    }

    #[test]
    fn csv_roundtrip() {
        let attrs = AttributeMatrix::new(
            &[vec![0.1, 1.0 / 3.0], vec![-2.5, 1e-300]],
            &[vec![7.0, 0.0]],
        )
        .unwrap();
        let back = AttributeMatrix::parse_csv(&attrs.to_csv()).unwrap();
        assert_eq!(back, attrs);
    }

    #[test]
    fn columns_layout() {
        let attrs = AttributeMatrix::new(&[vec![1.0, 2.0, 3.0]], &[vec![4.0, 5.0, 6.0]]).unwrap();
        let a = attrs.as_columns();
        assert_eq!(a.shape(), (3, 2));
        assert_eq!(a.column(1), vec![4.0, 5.0, 6.0]);
    }
}
