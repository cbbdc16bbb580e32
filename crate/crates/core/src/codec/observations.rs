//! Observation storage and the CSV interchange format.
//!
//! One decoded vector per line, components comma separated, printed with 17
//! significant digits so that a write/read round trip reproduces every f64
//! bit pattern. An optional leading `# dim=N count=P` comment makes files
//! self-describing.

use std::io::{BufRead, Write};

use crate::error::{Error, Result};
use crate::scalar::{cast, Scalar};

#[derive(Debug, Clone, PartialEq)]
pub struct ObservationSet<T> {
    dim: usize,
    vectors: Vec<Vec<T>>,
}

impl<T: Scalar> ObservationSet<T> {
    pub fn new(dim: usize, vectors: Vec<Vec<T>>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidConfig("observation dimension must be positive".into()));
        }
        for v in &vectors {
            if v.len() != dim {
                return Err(Error::DimensionMismatch {
                    context: "ObservationSet::new",
                    expected: dim,
                    got: v.len(),
                });
            }
            if v.iter().any(|x| !x.is_finite()) {
                return Err(Error::NonFinite("observation vector"));
            }
        }
        Ok(ObservationSet { dim, vectors })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    pub fn vectors(&self) -> &[Vec<T>] {
        &self.vectors
    }

    pub fn into_vectors(self) -> Vec<Vec<T>> {
        self.vectors
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        let io_err = |e| Error::io("<writer>", e);
        writeln!(w, "# dim={} count={}", self.dim, self.vectors.len()).map_err(io_err)?;
        for v in &self.vectors {
            let mut first = true;
            for x in v {
                if !first {
                    write!(w, ",").map_err(io_err)?;
                }
                // 16 digits after the point in scientific notation = 17
                // significant digits, enough to round-trip any f64.
                write!(w, "{:.16e}", x.to_f64().unwrap()).map_err(io_err)?;
                first = false;
            }
            writeln!(w).map_err(io_err)?;
        }
        Ok(())
    }

    pub fn read_csv<R: BufRead>(r: R) -> Result<Self> {
        let mut declared: Option<(usize, usize)> = None;
        let mut dim: Option<usize> = None;
        let mut vectors: Vec<Vec<T>> = Vec::new();

        for (idx, line) in r.lines().enumerate() {
            let line_no = idx + 1;
            let line = line.map_err(|e| Error::io("<reader>", e))?;
            let trimmed = line.trim();
            if trimmed.is_empty() {
                continue;
            }
            if let Some(rest) = trimmed.strip_prefix('#') {
                if declared.is_none() && vectors.is_empty() {
                    declared = parse_header(rest);
                }
                continue;
            }
            let mut v = Vec::new();
            for (col, field) in trimmed.split(',').enumerate() {
                let value: f64 = field.trim().parse().map_err(|_| Error::Parse {
                    line: line_no,
                    message: format!("field {} is not a number: {:?}", col + 1, field.trim()),
                })?;
                if !value.is_finite() {
                    return Err(Error::Parse {
                        line: line_no,
                        message: format!("field {} is not finite", col + 1),
                    });
                }
                v.push(cast::<T>(value));
            }
            match dim {
                None => dim = Some(v.len()),
                Some(d) if d != v.len() => {
                    return Err(Error::Parse {
                        line: line_no,
                        message: format!("expected {} components, found {}", d, v.len()),
                    });
                }
                _ => {}
            }
            vectors.push(v);
        }

        let dim = dim.ok_or(Error::Parse {
            line: 0,
            message: "no observation rows found".into(),
        })?;
        if let Some((hd, hc)) = declared {
            if hd != dim {
                return Err(Error::Parse {
                    line: 1,
                    message: format!("header declares dim={hd} but rows have {dim} components"),
                });
            }
            if hc != vectors.len() {
                return Err(Error::Parse {
                    line: 1,
                    message: format!("header declares count={hc} but file has {} rows", vectors.len()),
                });
            }
        }
        ObservationSet::new(dim, vectors)
    }
}

fn parse_header(rest: &str) -> Option<(usize, usize)> {
    let mut dim = None;
    let mut count = None;
    for token in rest.split_whitespace() {
        if let Some(v) = token.strip_prefix("dim=") {
            dim = v.parse().ok();
        } else if let Some(v) = token.strip_prefix("count=") {
            count = v.parse().ok();
        }
    }
    Some((dim?, count?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Cursor;

    fn roundtrip(set: &ObservationSet<f64>) -> ObservationSet<f64> {
        let mut buf = Vec::new();
        set.write_csv(&mut buf).unwrap();
        ObservationSet::read_csv(Cursor::new(buf)).unwrap()
    }

    #[test]
    fn csv_round_trip_is_bit_exact() {
        let set = ObservationSet::new(
            3,
            vec![
                vec![1.0 / 3.0, -2.0f64.sqrt(), 1e-300],
                vec![0.1 + 0.2, 7.25, -0.0],
            ],
        )
        .unwrap();
        let back = roundtrip(&set);
        assert_eq!(set.vectors(), back.vectors());
    }

    #[test]
    fn header_is_written_and_validated() {
        let set = ObservationSet::new(2, vec![vec![1.0, 2.0]]).unwrap();
        let mut buf = Vec::new();
        set.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("# dim=2 count=1\n"), "{text}");

        let bad = "# dim=3 count=1\n1.0,2.0\n";
        let err = ObservationSet::<f64>::read_csv(Cursor::new(bad)).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 1, .. }));
    }

    #[test]
    fn parse_errors_carry_line_numbers() {
        let bad = "1.0,2.0\n3.0,oops\n";
        match ObservationSet::<f64>::read_csv(Cursor::new(bad)) {
            Err(Error::Parse { line, message }) => {
                assert_eq!(line, 2);
                assert!(message.contains("field 2"), "{message}");
            }
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn ragged_rows_rejected() {
        let bad = "1.0,2.0\n3.0\n";
        match ObservationSet::<f64>::read_csv(Cursor::new(bad)) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn headerless_files_parse() {
        let plain = "1.0,2.0\n-3.5,4.25\n";
        let set = ObservationSet::<f64>::read_csv(Cursor::new(plain)).unwrap();
        assert_eq!(set.dim(), 2);
        assert_eq!(set.len(), 2);
    }

    #[test]
    fn empty_input_is_an_error() {
        assert!(ObservationSet::<f64>::read_csv(Cursor::new("")).is_err());
    }
}
