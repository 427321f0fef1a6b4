//! Binary model files, little-endian, no padding:
//!
//! ```text
//! "ESPC" | version u32 | r u32 | C u32 | L u32
//! per layer: k u32 | in u32 | out u32 | activation u8 | weights f64 (o,i,ky,kx) | bias f64
//! ```

use std::fs;
use std::path::Path;

use super::{EspcnModel, Layer};
use crate::error::{Error, Result};
use crate::tensor::{Activation, ConvKernel};

pub const MODEL_MAGIC: &[u8; 4] = b"ESPC";
pub const MODEL_VERSION: u32 = 1;

pub fn model_to_bytes(model: &EspcnModel) -> Vec<u8> {
    let mut out = Vec::with_capacity(20 + model.layers().len() * 13 + 8 * model.parameter_count());
    out.extend_from_slice(MODEL_MAGIC);
    for v in [
        MODEL_VERSION,
        model.upscale_ratio() as u32,
        model.channels() as u32,
        model.layers().len() as u32,
    ] {
        out.extend_from_slice(&v.to_le_bytes());
    }
    for layer in model.layers() {
        let k = &layer.kernel;
        for v in [k.k(), k.in_channels(), k.out_channels()] {
            out.extend_from_slice(&(v as u32).to_le_bytes());
        }
        out.push(layer.activation.code());
        for w in k.weights().iter().chain(k.bias()) {
            out.extend_from_slice(&w.to_le_bytes());
        }
    }
    out
}

struct Reader<'a> {
    bytes: &'a [u8],
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.bytes.len() < n {
            return Err(Error::Truncated);
        }
        let (head, tail) = self.bytes.split_at(n);
        self.bytes = tail;
        Ok(head)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn f64s(&mut self, n: usize) -> Result<Vec<f64>> {
        let len = n.checked_mul(8).ok_or(Error::Truncated)?;
        Ok(self
            .take(len)?
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
            .collect())
    }
}

pub fn model_from_bytes(bytes: &[u8]) -> Result<EspcnModel> {
    let mut rd = Reader { bytes };
    if rd.take(4).map_err(|_| Error::BadMagic)? != MODEL_MAGIC {
        return Err(Error::BadMagic);
    }
    let version = rd.u32()?;
    if version != MODEL_VERSION {
        return Err(Error::UnsupportedVersion(version));
    }
    let r = rd.u32()? as usize;
    let c = rd.u32()? as usize;
    let n_layers = rd.u32()? as usize;
    let mut layers = Vec::new();
    for l in 0..n_layers {
        let k = rd.u32()? as usize;
        let inp = rd.u32()? as usize;
        let out = rd.u32()? as usize;
        let code = rd.take(1)?[0];
        let activation = Activation::from_code(code)
            .ok_or_else(|| Error::InvalidModel(format!("layer {}: unknown activation code {code}", l + 1)))?;
        let n_weights = out
            .checked_mul(inp)
            .and_then(|v| v.checked_mul(k))
            .and_then(|v| v.checked_mul(k))
            .ok_or(Error::Truncated)?;
        let weights = rd.f64s(n_weights)?;
        let bias = rd.f64s(out)?;
        let kernel = ConvKernel::new(out, inp, k, weights, bias)
            .map_err(|e| Error::InvalidModel(format!("layer {}: {e}", l + 1)))?;
        layers.push(Layer { kernel, activation });
    }
    if !rd.bytes.is_empty() {
        return Err(Error::InvalidModel(format!("{} trailing bytes", rd.bytes.len())));
    }
    EspcnModel::new(layers, r, c)
}

pub fn save_model(model: &EspcnModel, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, model_to_bytes(model)).map_err(|e| Error::file(path, e))
}

pub fn load_model(path: impl AsRef<Path>) -> Result<EspcnModel> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::file(path, e))?;
    model_from_bytes(&bytes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Architecture;

    fn espcn() -> EspcnModel {
        EspcnModel::init(&Architecture::espcn(3, 1, Activation::Tanh), 17).unwrap()
    }

    #[test]
    fn save_load_save_is_byte_identical() {
        let dir = tempfile::tempdir().unwrap();
        let a = dir.path().join("a.espc");
        let b = dir.path().join("b.espc");
        let m = espcn();
        save_model(&m, &a).unwrap();
        let loaded = load_model(&a).unwrap();
        assert_eq!(loaded, m);
        save_model(&loaded, &b).unwrap();
        assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());
    }

    #[test]
    fn file_size_is_header_plus_parameters() {
        let bytes = model_to_bytes(&espcn());
        let params = (64 * 25 + 64) + (32 * 64 * 9 + 32) + (9 * 32 * 9 + 9);
        assert_eq!(params, 22_729);
        assert_eq!(bytes.len(), 20 + 3 * 13 + 8 * params);
    }

    #[test]
    fn distinct_errors() {
        let good = model_to_bytes(&espcn());

        let mut bad = good.clone();
        bad[0] = b'X';
        assert!(matches!(model_from_bytes(&bad), Err(Error::BadMagic)));
        assert!(matches!(model_from_bytes(b"ES"), Err(Error::BadMagic)));

        let mut bad = good.clone();
        bad[4..8].copy_from_slice(&2u32.to_le_bytes());
        assert!(matches!(model_from_bytes(&bad), Err(Error::UnsupportedVersion(2))));

        assert!(matches!(model_from_bytes(&good[..good.len() - 3]), Err(Error::Truncated)));
        assert!(matches!(model_from_bytes(&good[..10]), Err(Error::Truncated)));

        // r = 2 no longer matches the final layer's 9 outputs.
        let mut bad = good.clone();
        bad[8..12].copy_from_slice(&2u32.to_le_bytes());
        assert!(matches!(model_from_bytes(&bad), Err(Error::InvalidModel(_))));

        let mut bad = good.clone();
        bad.push(0);
        assert!(matches!(model_from_bytes(&bad), Err(Error::InvalidModel(_))));

        // activation byte of layer 1
        let mut bad = good;
        bad[20 + 12] = 9;
        assert!(matches!(model_from_bytes(&bad), Err(Error::InvalidModel(_))));
    }

    #[test]
    fn missing_file_names_path() {
        let err = load_model("/nonexistent/model.espc").unwrap_err();
        assert!(err.to_string().contains("/nonexistent/model.espc"));
    }
}
