//! Binary checkpoint format.
//!
//! ```text
//! magic      4 bytes  "XWSM"
//! version    u32 LE   (1)
//! sections   u32 LE   count
//! per section:
//!   kind     u8       1 = UTF-8 text, 2 = tensor
//!   name     u32 LE length + UTF-8 bytes
//!   payload  u64 LE length + bytes
//! tensor payload: rows u32 LE, cols u32 LE, rows*cols f64 LE, row-major
//! ```
//!
//! Sections, in order: `config` (key=value text), `meta` (epoch, dev score,
//! lexicon fingerprints), `vocab` (characters in id order), then one tensor
//! per parameter named as in [`ModelParams::names`].

use std::io::{Read, Write};
use std::path::Path;

use crate::autodiff::Matrix;
use crate::config::Config;
use crate::corpus::Vocab;
use crate::error::{Error, Result};
use crate::lexicon::EraLexicon;
use crate::model::ModelParams;

pub const MAGIC: &[u8; 4] = b"XWSM";
pub const VERSION: u32 = 1;

const KIND_TEXT: u8 = 1;
const KIND_TENSOR: u8 = 2;

/// Trained model snapshot.
#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub config: Config,
    pub params: ModelParams,
    pub vocab: Vocab,
    /// Fingerprint of each era lexicon the key tables align with.
    pub lexicon_hashes: Vec<String>,
    pub epoch: usize,
    /// Best pooled dev F1.
    pub dev_f1: f64,
}

fn write_section(out: &mut Vec<u8>, kind: u8, name: &str, payload: &[u8]) {
    out.push(kind);
    out.extend_from_slice(&(name.len() as u32).to_le_bytes());
    out.extend_from_slice(name.as_bytes());
    out.extend_from_slice(&(payload.len() as u64).to_le_bytes());
    out.extend_from_slice(payload);
}

fn tensor_payload(m: &Matrix) -> Vec<u8> {
    let mut p = Vec::with_capacity(8 + 8 * m.len());
    p.extend_from_slice(&(m.rows() as u32).to_le_bytes());
    p.extend_from_slice(&(m.cols() as u32).to_le_bytes());
    for v in m.data() {
        p.extend_from_slice(&v.to_le_bytes());
    }
    p
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.bytes.len())
            .ok_or_else(|| Error::Format("truncated".into()))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
}

fn parse_tensor(payload: &[u8]) -> Result<Matrix> {
    let mut c = Cursor {
        bytes: payload,
        pos: 0,
    };
    let rows = c.u32()? as usize;
    let cols = c.u32()? as usize;
    let body = c.take(rows * cols * 8)?;
    if c.pos != payload.len() {
        return Err(Error::Format("trailing tensor bytes".into()));
    }
    let data = body
        .chunks_exact(8)
        .map(|b| f64::from_le_bytes(b.try_into().unwrap()))
        .collect();
    Ok(Matrix::from_vec(rows, cols, data))
}

fn text(payload: &[u8]) -> Result<&str> {
    std::str::from_utf8(payload).map_err(|e| Error::Format(format!("section not UTF-8: {e}")))
}

impl Checkpoint {
    fn meta_text(&self) -> String {
        let mut s = format!("epoch={}\ndev_f1={}\n", self.epoch, self.dev_f1);
        for (d, h) in self.lexicon_hashes.iter().enumerate() {
            s.push_str(&format!("lexicon.{d}={h}\n"));
        }
        s
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let tensors = self.params.tensors();
        let names = self.params.names();
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        out.extend_from_slice(&((3 + tensors.len()) as u32).to_le_bytes());
        write_section(
            &mut out,
            KIND_TEXT,
            "config",
            self.config.to_text().as_bytes(),
        );
        write_section(&mut out, KIND_TEXT, "meta", self.meta_text().as_bytes());
        write_section(
            &mut out,
            KIND_TEXT,
            "vocab",
            self.vocab.to_text().as_bytes(),
        );
        for (name, t) in names.iter().zip(tensors) {
            write_section(&mut out, KIND_TENSOR, name, &tensor_payload(t));
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut c = Cursor { bytes, pos: 0 };
        if c.take(4)? != MAGIC {
            return Err(Error::Format("bad magic".into()));
        }
        let version = c.u32()?;
        if version != VERSION {
            return Err(Error::Format(format!("unsupported version {version}")));
        }
        let count = c.u32()? as usize;
        let mut config = None;
        let mut meta = None;
        let mut vocab = None;
        let mut tensors = Vec::new();
        for _ in 0..count {
            let kind = c.u8()?;
            let name_len = c.u32()? as usize;
            let name = text(c.take(name_len)?)?.to_string();
            let len = c.u64()? as usize;
            let payload = c.take(len)?;
            match (kind, name.as_str()) {
                (KIND_TEXT, "config") => config = Some(Config::from_text(text(payload)?)?),
                (KIND_TEXT, "meta") => meta = Some(text(payload)?.to_string()),
                (KIND_TEXT, "vocab") => vocab = Some(Vocab::from_text(text(payload)?)),
                (KIND_TENSOR, _) => tensors.push(parse_tensor(payload)?),
                _ => {
                    return Err(Error::Format(format!(
                        "unknown section {name:?} of kind {kind}"
                    )))
                }
            }
        }
        if c.pos != bytes.len() {
            return Err(Error::Format("trailing bytes".into()));
        }
        let config = config.ok_or_else(|| Error::Format("missing config".into()))?;
        let meta = meta.ok_or_else(|| Error::Format("missing meta".into()))?;
        let vocab = vocab.ok_or_else(|| Error::Format("missing vocab".into()))?;

        let mut epoch = 0;
        let mut dev_f1 = 0.0;
        let mut lexicon_hashes = Vec::new();
        for line in meta.lines() {
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Format(format!("bad meta line {line:?}")))?;
            let bad = || Error::Format(format!("bad meta value {line:?}"));
            match k {
                "epoch" => epoch = v.parse().map_err(|_| bad())?,
                "dev_f1" => dev_f1 = v.parse().map_err(|_| bad())?,
                _ if k.starts_with("lexicon.") => lexicon_hashes.push(v.to_string()),
                _ => return Err(bad()),
            }
        }
        let params = ModelParams::from_tensors(tensors, config.eras)?;
        Ok(Self {
            config,
            params,
            vocab,
            lexicon_hashes,
            epoch,
            dev_f1,
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut f = std::fs::File::create(path)?;
        f.write_all(&self.to_bytes())?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let mut bytes = Vec::new();
        std::fs::File::open(path)?.read_to_end(&mut bytes)?;
        Self::from_bytes(&bytes)
    }

    /// Check that `lexicons` are the ones the key tables were trained with.
    pub fn verify_lexicons(&self, lexicons: &[EraLexicon]) -> Result<()> {
        if lexicons.len() != self.lexicon_hashes.len() {
            return Err(Error::Format(format!(
                "checkpoint expects {} lexicons, got {}",
                self.lexicon_hashes.len(),
                lexicons.len()
            )));
        }
        for (d, (lex, h)) in lexicons.iter().zip(&self.lexicon_hashes).enumerate() {
            if &lex.fingerprint() != h {
                return Err(Error::Format(format!(
                    "lexicon for era {d} does not match checkpoint"
                )));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn sample() -> Checkpoint {
        let mut config = Config::default();
        config.eras = 2;
        config.d_a = 4;
        config.d_e = 3;
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let params = ModelParams::init(&mut rng, &config, 7, &[3, 0]);
        Checkpoint {
            config,
            params,
            vocab: Vocab::from_chars(vec!['甲', '乙', 'x', 'y']),
            lexicon_hashes: vec!["aa".into(), "bb".into()],
            epoch: 3,
            dev_f1: 0.1 + 0.2,
        }
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let ck = sample();
        let bytes = ck.to_bytes();
        assert_eq!(&bytes[..4], b"XWSM");
        assert_eq!(u32::from_le_bytes(bytes[4..8].try_into().unwrap()), 1);
        let back = Checkpoint::from_bytes(&bytes).unwrap();
        assert_eq!(back, ck);
        assert_eq!(back.to_bytes(), bytes);
    }

    #[test]
    fn rejects_corruption() {
        let mut bytes = sample().to_bytes();
        assert!(Checkpoint::from_bytes(&bytes[..bytes.len() - 1]).is_err());
        bytes[0] = b'Y';
        assert!(Checkpoint::from_bytes(&bytes).is_err());
    }
}
