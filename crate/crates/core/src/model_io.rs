//! Versioned flat-text model files.
//!
//! Field order is fixed (see the repository README): a format header, the
//! model type tag, the kernel spec, the feature arity, scalar terms, the
//! support-vector count and one `sv` line per support vector holding the
//! coefficient followed by the feature values. Floats are written with the
//! shortest representation that parses back to the identical bits, so a
//! save/load round trip reproduces the model exactly.

use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use crate::dataio::DataMatrix;
use crate::error::{Error, Result};
use crate::kernel::KernelSpec;
use crate::svdd::SvddModel;
use crate::svm::SvmModel;

const HEADER: &str = "svddkit-model v1";

/// Either trained model, as identified by the file's type tag.
#[derive(Debug, Clone)]
pub enum Model {
    Svdd(SvddModel),
    Svm(SvmModel),
}

pub fn save_svdd(model: &SvddModel, path: &Path) -> Result<()> {
    let mut f = std::fs::File::create(path)?;
    writeln!(f, "{}", HEADER)?;
    writeln!(f, "type svdd")?;
    writeln!(f, "kernel {}", model.kernel)?;
    writeln!(f, "dim {}", model.support_rows.dim())?;
    writeln!(f, "radius_sq {}", model.radius_sq)?;
    writeln!(f, "offset {}", model.offset_term)?;
    writeln!(f, "nsv {}", model.alphas.len())?;
    for (alpha, row) in model.alphas.iter().zip(model.support_rows.rows()) {
        write!(f, "sv {}", alpha)?;
        for v in row {
            write!(f, " {}", v)?;
        }
        writeln!(f)?;
    }
    Ok(())
}

pub fn save_svm(model: &SvmModel, path: &Path) -> Result<()> {
    let mut f = std::fs::File::create(path)?;
    writeln!(f, "{}", HEADER)?;
    writeln!(f, "type svm")?;
    writeln!(f, "kernel {}", model.kernel)?;
    writeln!(f, "dim {}", model.support_rows.dim())?;
    writeln!(f, "bias {}", model.bias)?;
    writeln!(f, "nsv {}", model.signed_alphas.len())?;
    for (alpha, row) in model.signed_alphas.iter().zip(model.support_rows.rows()) {
        write!(f, "sv {}", alpha)?;
        for v in row {
            write!(f, " {}", v)?;
        }
        writeln!(f)?;
    }
    Ok(())
}

struct Lines<R: BufRead> {
    inner: std::io::Lines<R>,
    line_no: usize,
}

impl<R: BufRead> Lines<R> {
    fn next_line(&mut self) -> Result<String> {
        self.line_no += 1;
        match self.inner.next() {
            Some(Ok(l)) => Ok(l),
            Some(Err(e)) => Err(e.into()),
            None => Err(Error::ModelFormat(format!(
                "unexpected end of file at line {}",
                self.line_no
            ))),
        }
    }

    fn expect_field(&mut self, key: &str) -> Result<String> {
        let line = self.next_line()?;
        line.strip_prefix(key)
            .and_then(|rest| rest.strip_prefix(' '))
            .map(str::to_string)
            .ok_or_else(|| {
                Error::ModelFormat(format!(
                    "expected '{} ...' at line {}, got '{}'",
                    key, self.line_no, line
                ))
            })
    }
}

fn parse_f64(s: &str, what: &str) -> Result<f64> {
    s.trim()
        .parse()
        .map_err(|_| Error::ModelFormat(format!("bad {} value '{}'", what, s)))
}

fn parse_kernel(s: &str) -> Result<KernelSpec> {
    let mut parts = s.split_whitespace();
    match parts.next() {
        Some("rbf") => {
            let sigma = parse_f64(
                parts
                    .next()
                    .ok_or_else(|| Error::ModelFormat("rbf kernel missing sigma".into()))?,
                "sigma",
            )?;
            Ok(KernelSpec::Rbf { sigma })
        }
        Some("linear") => Ok(KernelSpec::Linear),
        other => Err(Error::ModelFormat(format!(
            "unknown kernel '{}'",
            other.unwrap_or("")
        ))),
    }
}

fn parse_svs(
    lines: &mut Lines<BufReader<std::fs::File>>,
    nsv: usize,
    dim: usize,
) -> Result<(Vec<f64>, DataMatrix)> {
    let mut alphas = Vec::with_capacity(nsv);
    let mut rows = Vec::with_capacity(nsv);
    for _ in 0..nsv {
        let line = lines.next_line()?;
        let mut parts = line.split_whitespace();
        if parts.next() != Some("sv") {
            return Err(Error::ModelFormat(format!(
                "expected 'sv' line, got '{}'",
                line
            )));
        }
        let fields: Vec<f64> = parts
            .map(|p| parse_f64(p, "sv"))
            .collect::<Result<Vec<f64>>>()?;
        if fields.len() != dim + 1 {
            return Err(Error::ModelFormat(format!(
                "sv line has {} values, expected {}",
                fields.len(),
                dim + 1
            )));
        }
        alphas.push(fields[0]);
        rows.push(fields[1..].to_vec());
    }
    Ok((alphas, DataMatrix::from_rows(rows, None)?))
}

/// Loads a model file written by [`save_svdd`] or [`save_svm`].
pub fn load_model(path: &Path) -> Result<Model> {
    let f = std::fs::File::open(path)?;
    let mut lines = Lines {
        inner: BufReader::new(f).lines(),
        line_no: 0,
    };
    let header = lines.next_line()?;
    if header != HEADER {
        return Err(Error::ModelFormat(format!(
            "unsupported header '{}'",
            header
        )));
    }
    let type_tag = lines.expect_field("type")?;
    let kernel = parse_kernel(&lines.expect_field("kernel")?)?;
    let dim: usize = lines
        .expect_field("dim")?
        .trim()
        .parse()
        .map_err(|_| Error::ModelFormat("bad dim".into()))?;

    match type_tag.as_str() {
        "svdd" => {
            let radius_sq = parse_f64(&lines.expect_field("radius_sq")?, "radius_sq")?;
            let offset_term = parse_f64(&lines.expect_field("offset")?, "offset")?;
            let nsv: usize = lines
                .expect_field("nsv")?
                .trim()
                .parse()
                .map_err(|_| Error::ModelFormat("bad nsv".into()))?;
            let (alphas, support_rows) = parse_svs(&mut lines, nsv, dim)?;
            Ok(Model::Svdd(SvddModel {
                support_rows,
                alphas,
                kernel,
                radius_sq,
                offset_term,
            }))
        }
        "svm" => {
            let bias = parse_f64(&lines.expect_field("bias")?, "bias")?;
            let nsv: usize = lines
                .expect_field("nsv")?
                .trim()
                .parse()
                .map_err(|_| Error::ModelFormat("bad nsv".into()))?;
            let (signed_alphas, support_rows) = parse_svs(&mut lines, nsv, dim)?;
            Ok(Model::Svm(SvmModel {
                support_rows,
                signed_alphas,
                bias,
                kernel,
            }))
        }
        other => Err(Error::ModelFormat(format!("unknown model type '{}'", other))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::svdd::{train_svdd, SvddConfig};
    use crate::svm::{train_svm, SvmConfig};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn sample_data(labeled: bool) -> DataMatrix {
        let mut rng = ChaCha8Rng::seed_from_u64(44);
        let rows: Vec<Vec<f64>> = (0..30)
            .map(|_| vec![rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)])
            .collect();
        let labels = labeled.then(|| (0..30).map(|i| (i % 2) as u8).collect());
        DataMatrix::from_rows(rows, labels).unwrap()
    }

    #[test]
    fn svdd_roundtrip_bit_exact() {
        let model = train_svdd(&sample_data(false), &SvddConfig::default()).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.model");
        save_svdd(&model, &path).unwrap();
        let Model::Svdd(back) = load_model(&path).unwrap() else {
            panic!("wrong type tag");
        };
        assert_eq!(back.alphas, model.alphas);
        assert_eq!(back.radius_sq, model.radius_sq);
        assert_eq!(back.offset_term, model.offset_term);
        assert_eq!(back.kernel, model.kernel);
        assert_eq!(
            back.support_rows.rows().collect::<Vec<_>>(),
            model.support_rows.rows().collect::<Vec<_>>()
        );
        // identical scores after reload
        let z = [0.123456789, -0.987654321];
        assert_eq!(
            back.decision_score(&z).unwrap(),
            model.decision_score(&z).unwrap()
        );
    }

    #[test]
    fn svm_roundtrip_bit_exact() {
        let model = train_svm(&sample_data(true), &SvmConfig::default()).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.model");
        save_svm(&model, &path).unwrap();
        let Model::Svm(back) = load_model(&path).unwrap() else {
            panic!("wrong type tag");
        };
        assert_eq!(back.signed_alphas, model.signed_alphas);
        assert_eq!(back.bias, model.bias);
        let z = [0.5, 0.5];
        assert_eq!(back.decision(&z).unwrap(), model.decision(&z).unwrap());
    }

    #[test]
    fn rejects_garbage() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.model");
        std::fs::write(&path, "not a model\n").unwrap();
        assert!(matches!(load_model(&path), Err(Error::ModelFormat(_))));
        std::fs::write(&path, "svddkit-model v1\ntype nonsense\nkernel rbf 1\ndim 2\n").unwrap();
        assert!(load_model(&path).is_err());
    }
}
