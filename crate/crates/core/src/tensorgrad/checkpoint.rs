//! Checkpoint layout:
//!
//! ```text
//! ECCT-CKPT v1
//! key=value            (architecture and code dimensions)
//! param_count=<total scalars>
//! tensor <name> <d0>x<d1>...
//! ...
//! end
//! <little-endian f64 data for every tensor, in header order>
//! ```

use std::collections::BTreeMap;
use std::io::{BufRead, Write};

use crate::error::{Error, Result};

use super::tensor::Tensor;

pub const MAGIC: &str = "ECCT-CKPT v1";

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub header: BTreeMap<String, String>,
    pub tensors: Vec<(String, Tensor)>,
}

fn ckpt_err(msg: impl Into<String>) -> Error {
    Error::Checkpoint(msg.into())
}

impl Checkpoint {
    pub fn param_count(&self) -> usize {
        self.tensors.iter().map(|(_, t)| t.len()).sum()
    }

    pub fn header_value(&self, key: &str) -> Result<&str> {
        self.header
            .get(key)
            .map(String::as_str)
            .ok_or_else(|| ckpt_err(format!("missing header key {key}")))
    }

    pub fn write<W: Write>(&self, out: &mut W) -> Result<()> {
        writeln!(out, "{MAGIC}")?;
        for (k, v) in &self.header {
            if k == "param_count" {
                continue;
            }
            if k.contains(['=', '\n']) || v.contains('\n') {
                return Err(ckpt_err(format!("unencodable header entry {k}")));
            }
            writeln!(out, "{k}={v}")?;
        }
        writeln!(out, "param_count={}", self.param_count())?;
        for (name, t) in &self.tensors {
            if name.contains(char::is_whitespace) || name.is_empty() {
                return Err(ckpt_err(format!("bad tensor name {name:?}")));
            }
            let dims: Vec<String> = t.shape().iter().map(usize::to_string).collect();
            writeln!(out, "tensor {name} {}", dims.join("x"))?;
        }
        writeln!(out, "end")?;
        for (_, t) in &self.tensors {
            for v in t.data() {
                out.write_all(&v.to_le_bytes())?;
            }
        }
        Ok(())
    }

    pub fn read<R: BufRead>(input: &mut R) -> Result<Self> {
        let mut line = String::new();
        let mut next_line = |input: &mut R| -> Result<String> {
            line.clear();
            if input.read_line(&mut line)? == 0 {
                return Err(ckpt_err("truncated header"));
            }
            Ok(line.trim_end_matches(['\n', '\r']).to_string())
        };
        if next_line(input)? != MAGIC {
            return Err(ckpt_err("not an ECCT checkpoint or unsupported version"));
        }
        let mut header = BTreeMap::new();
        let mut shapes = Vec::new();
        loop {
            let l = next_line(input)?;
            if l == "end" {
                break;
            }
            if let Some(rest) = l.strip_prefix("tensor ") {
                let (name, dims) = rest
                    .split_once(' ')
                    .ok_or_else(|| ckpt_err(format!("bad tensor line {l:?}")))?;
                let shape = dims
                    .split('x')
                    .map(|d| d.parse::<usize>())
                    .collect::<std::result::Result<Vec<_>, _>>()
                    .map_err(|_| ckpt_err(format!("bad dims in {l:?}")))?;
                shapes.push((name.to_string(), shape));
            } else if let Some((k, v)) = l.split_once('=') {
                header.insert(k.to_string(), v.to_string());
            } else {
                return Err(ckpt_err(format!("unrecognised header line {l:?}")));
            }
        }
        let total: usize = shapes.iter().map(|(_, s)| s.iter().product::<usize>()).sum();
        let declared: usize = header
            .get("param_count")
            .ok_or_else(|| ckpt_err("missing param_count"))?
            .parse()
            .map_err(|_| ckpt_err("bad param_count"))?;
        if declared != total {
            return Err(ckpt_err(format!(
                "param_count {declared} disagrees with tensor shapes ({total})"
            )));
        }
        let mut tensors = Vec::with_capacity(shapes.len());
        let mut buf = [0u8; 8];
        for (name, shape) in shapes {
            let len = shape.iter().product();
            let mut data = Vec::with_capacity(len);
            for _ in 0..len {
                input
                    .read_exact(&mut buf)
                    .map_err(|_| ckpt_err(format!("truncated data in {name}")))?;
                data.push(f64::from_le_bytes(buf));
            }
            tensors.push((name, Tensor::new(shape, data)?));
        }
        if input.read(&mut buf)? != 0 {
            return Err(ckpt_err("trailing bytes after tensor data"));
        }
        Ok(Checkpoint { header, tensors })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> Checkpoint {
        let mut header = BTreeMap::new();
        header.insert("n".into(), "7".into());
        header.insert("embed_dim".into(), "4".into());
        Checkpoint {
            header,
            tensors: vec![
                ("a".into(), Tensor::matrix(2, 2, vec![1.0, -0.5, f64::MIN_POSITIVE, 3e300]).unwrap()),
                ("b".into(), Tensor::row(vec![0.25; 3])),
            ],
        }
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let c = sample();
        let mut bytes = Vec::new();
        c.write(&mut bytes).unwrap();
        let back = Checkpoint::read(&mut bytes.as_slice()).unwrap();
        assert_eq!(back.tensors, c.tensors);
        assert_eq!(back.header_value("n").unwrap(), "7");
        assert_eq!(back.header_value("param_count").unwrap(), "7");
    }

    #[test]
    fn rejects_damage() {
        let mut bytes = Vec::new();
        sample().write(&mut bytes).unwrap();
        let short = &bytes[..bytes.len() - 3];
        assert!(Checkpoint::read(&mut &short[..]).is_err());
        let mut long = bytes.clone();
        long.push(0);
        assert!(Checkpoint::read(&mut long.as_slice()).is_err());
        let mut wrong = bytes.clone();
        wrong[5] = b'X';
        assert!(Checkpoint::read(&mut wrong.as_slice()).is_err());
    }
}
