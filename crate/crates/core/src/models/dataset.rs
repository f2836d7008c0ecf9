//! Dataset export and import.
//!
//! CSV layout:
//! ```text
//! variant,dims,m,seed
//! pr,10,500,42
//! a0,...,a9,b
//! <rows, each value printed with 17 significant digits>
//! ```
//! Dimensions are written `d`, `DxR` (matrix sensing) or `d1xd2` (blind
//! deconvolution). The binary layout is the magic `SDDS`, a little-endian
//! `u32` version, the header fields as `u64`, then the rows as `f64`.

use std::io::{BufRead, Read, Write};

use super::{CompositeModel, SampleXi};
use crate::error::{Error, Result};

const MAGIC: &[u8; 4] = b"SDDS";
const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub model: CompositeModel,
    pub seed: u64,
    pub samples: Vec<SampleXi>,
}

fn dims_string(model: &CompositeModel) -> String {
    match *model {
        CompositeModel::PhaseRetrieval { d } | CompositeModel::Linear { d } => d.to_string(),
        CompositeModel::MatrixSensing { dim, rank } => format!("{dim}x{rank}"),
        CompositeModel::BlindDeconv { d1, d2 } => format!("{d1}x{d2}"),
    }
}

fn parse_model(variant: &str, dims: &str) -> Result<CompositeModel> {
    let num = |s: &str| -> Result<usize> {
        s.trim()
            .parse()
            .map_err(|_| Error::Parse(format!("bad dimension {s:?}")))
    };
    let pair = || -> Result<(usize, usize)> {
        let (a, b) = dims
            .split_once('x')
            .ok_or_else(|| Error::Parse(format!("expected AxB dims, got {dims:?}")))?;
        Ok((num(a)?, num(b)?))
    };
    let model = match variant {
        "pr" => CompositeModel::PhaseRetrieval { d: num(dims)? },
        "linear" => CompositeModel::Linear { d: num(dims)? },
        "ms" => {
            let (dim, rank) = pair()?;
            CompositeModel::MatrixSensing { dim, rank }
        }
        "bd" => {
            let (d1, d2) = pair()?;
            CompositeModel::BlindDeconv { d1, d2 }
        }
        other => return Err(Error::Parse(format!("unknown variant {other:?}"))),
    };
    model.validate()?;
    Ok(model)
}

fn variant_code(model: &CompositeModel) -> (u8, u64, u64) {
    match *model {
        CompositeModel::PhaseRetrieval { d } => (0, d as u64, 0),
        CompositeModel::MatrixSensing { dim, rank } => (1, dim as u64, rank as u64),
        CompositeModel::BlindDeconv { d1, d2 } => (2, d1 as u64, d2 as u64),
        CompositeModel::Linear { d } => (3, d as u64, 0),
    }
}

fn sample_from_components(model: &CompositeModel, c: &[f64]) -> Result<SampleXi> {
    let n = model.measurement_len();
    if c.len() != n + 1 {
        return Err(Error::Parse(format!("row has {} values, expected {}", c.len(), n + 1)));
    }
    let b = c[n];
    Ok(match *model {
        CompositeModel::PhaseRetrieval { .. } => SampleXi::PhaseRetrieval { a: c[..n].to_vec(), b },
        CompositeModel::Linear { .. } => SampleXi::Linear {
            phi: c[..n].to_vec(),
            b,
        },
        CompositeModel::MatrixSensing { .. } => SampleXi::MatrixSensing { a: c[..n].to_vec(), b },
        CompositeModel::BlindDeconv { d1, .. } => SampleXi::BlindDeconv {
            u: c[..d1].to_vec(),
            v: c[d1..n].to_vec(),
            b,
        },
    })
}

fn column_names(model: &CompositeModel) -> Vec<String> {
    let mut names: Vec<String> = match *model {
        CompositeModel::PhaseRetrieval { d } => (0..d).map(|i| format!("a{i}")).collect(),
        CompositeModel::Linear { d } => (0..d).map(|i| format!("phi{i}")).collect(),
        CompositeModel::MatrixSensing { dim, .. } => (0..dim * dim).map(|i| format!("A{i}")).collect(),
        CompositeModel::BlindDeconv { d1, d2 } => (0..d1)
            .map(|i| format!("u{i}"))
            .chain((0..d2).map(|i| format!("v{i}")))
            .collect(),
    };
    names.push("b".into());
    names
}

impl Dataset {
    pub fn new(model: CompositeModel, seed: u64, samples: Vec<SampleXi>) -> Result<Self> {
        model.validate()?;
        for xi in &samples {
            model.check_sample(xi)?;
        }
        Ok(Self { model, seed, samples })
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "variant,dims,m,seed")?;
        writeln!(
            w,
            "{},{},{},{}",
            self.model.tag(),
            dims_string(&self.model),
            self.samples.len(),
            self.seed
        )?;
        writeln!(w, "{}", column_names(&self.model).join(","))?;
        let mut line = String::new();
        for xi in &self.samples {
            line.clear();
            for (i, v) in xi.components().iter().enumerate() {
                if i > 0 {
                    line.push(',');
                }
                line.push_str(&format!("{v:.16e}"));
            }
            writeln!(w, "{line}")?;
        }
        Ok(())
    }

    pub fn read_csv<R: BufRead>(r: R) -> Result<Self> {
        let mut lines = r.lines();
        let mut next = || -> Result<String> {
            lines
                .next()
                .ok_or_else(|| Error::Parse("truncated dataset header".into()))?
                .map_err(Error::from)
        };
        let title = next()?;
        if title.trim() != "variant,dims,m,seed" {
            return Err(Error::Parse(format!("unexpected header {title:?}")));
        }
        let meta = next()?;
        let fields: Vec<&str> = meta.trim().split(',').collect();
        if fields.len() != 4 {
            return Err(Error::Parse(format!("bad metadata line {meta:?}")));
        }
        let model = parse_model(fields[0], fields[1])?;
        let m: usize = fields[2].parse().map_err(|_| Error::Parse("bad m".into()))?;
        let seed: u64 = fields[3].parse().map_err(|_| Error::Parse("bad seed".into()))?;
        let _columns = next()?;
        let mut samples = Vec::with_capacity(m);
        for line in lines {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let vals = line
                .split(',')
                .map(|s| {
                    s.trim()
                        .parse::<f64>()
                        .map_err(|_| Error::Parse(format!("bad number {s:?}")))
                })
                .collect::<Result<Vec<f64>>>()?;
            samples.push(sample_from_components(&model, &vals)?);
        }
        if samples.len() != m {
            return Err(Error::Parse(format!(
                "header says m = {m}, found {} rows",
                samples.len()
            )));
        }
        Ok(Self { model, seed, samples })
    }

    pub fn write_binary<W: Write>(&self, mut w: W) -> Result<()> {
        let (code, p, q) = variant_code(&self.model);
        w.write_all(MAGIC)?;
        w.write_all(&VERSION.to_le_bytes())?;
        w.write_all(&[code])?;
        for v in [p, q, self.samples.len() as u64, self.seed] {
            w.write_all(&v.to_le_bytes())?;
        }
        for xi in &self.samples {
            for v in xi.components() {
                w.write_all(&v.to_le_bytes())?;
            }
        }
        Ok(())
    }

    pub fn read_binary<R: Read>(mut r: R) -> Result<Self> {
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic)?;
        if &magic != MAGIC {
            return Err(Error::Parse("bad magic".into()));
        }
        let mut b4 = [0u8; 4];
        r.read_exact(&mut b4)?;
        if u32::from_le_bytes(b4) != VERSION {
            return Err(Error::Parse("unsupported version".into()));
        }
        let mut code = [0u8; 1];
        r.read_exact(&mut code)?;
        let read_u64 = |r: &mut R| -> Result<u64> {
            let mut b8 = [0u8; 8];
            r.read_exact(&mut b8)?;
            Ok(u64::from_le_bytes(b8))
        };
        let p = read_u64(&mut r)? as usize;
        let q = read_u64(&mut r)? as usize;
        let m = read_u64(&mut r)? as usize;
        let seed = read_u64(&mut r)?;
        let model = match code[0] {
            0 => CompositeModel::PhaseRetrieval { d: p },
            1 => CompositeModel::MatrixSensing { dim: p, rank: q },
            2 => CompositeModel::BlindDeconv { d1: p, d2: q },
            3 => CompositeModel::Linear { d: p },
            c => return Err(Error::Parse(format!("unknown variant code {c}"))),
        };
        model.validate()?;
        let width = model.measurement_len() + 1;
        let mut samples = Vec::with_capacity(m);
        let mut buf = vec![0u8; 8 * width];
        for _ in 0..m {
            r.read_exact(&mut buf)?;
            let vals: Vec<f64> = buf
                .chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
                .collect();
            samples.push(sample_from_components(&model, &vals)?);
        }
        Ok(Self { model, seed, samples })
    }
}
