//! Binary model files.
//!
//! Layout, all little-endian: magic `SDIM`, u32 format version, u32 input
//! dimension, u32 count of layer sizes, that many u32 sizes (input first,
//! output last), f32 parameters layer by layer (row-major weight then
//! bias), the normalizer as f64 centers followed by f64 scales, then the
//! training domain as f64 lower corner followed by f64 upper corner.

use std::fs;
use std::path::Path;

use ndarray::{Array1, Array2};

use crate::error::{Error, Result};

use super::mlp::{Dense, Mlp};
use super::model::{EnergyModel, Normalizer};
use super::train::SamplingBox;

pub const MODEL_FORMAT_VERSION: u32 = 1;
const MAGIC: &[u8; 4] = b"SDIM";

impl EnergyModel {
    pub fn to_bytes(&self) -> Vec<u8> {
        let net = self.network();
        let sizes = net.sizes();
        let mut out = Vec::with_capacity(16 + 4 * sizes.len() + 4 * net.parameter_count());
        out.extend_from_slice(MAGIC);
        for word in [MODEL_FORMAT_VERSION, net.input_dim() as u32, sizes.len() as u32] {
            out.extend_from_slice(&word.to_le_bytes());
        }
        for s in &sizes {
            out.extend_from_slice(&(*s as u32).to_le_bytes());
        }
        for t in net.tensors() {
            for v in t {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        let norm = self.normalizer();
        let domain = self.domain();
        for v in norm.center.iter().chain(&norm.scale).chain(&domain.lo).chain(&domain.hi) {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader { bytes, pos: 0 };
        if r.take(4)? != MAGIC {
            return Err(Error::format("model", "missing SDIM header"));
        }
        let version = r.u32()?;
        if version != MODEL_FORMAT_VERSION {
            return Err(Error::format("model", format!("unsupported format version {version}")));
        }
        let input_dim = r.u32()? as usize;
        let n_sizes = r.u32()? as usize;
        if !(2..=64).contains(&n_sizes) {
            return Err(Error::format("model", format!("implausible layer count {n_sizes}")));
        }
        let sizes = (0..n_sizes).map(|_| r.u32().map(|s| s as usize)).collect::<Result<Vec<_>>>()?;
        if sizes[0] != input_dim {
            return Err(Error::format("model", "input dimension disagrees with layer sizes"));
        }
        let mut layers = Vec::with_capacity(n_sizes - 1);
        for w in sizes.windows(2) {
            let (inputs, outputs) = (w[0], w[1]);
            let weight = (0..inputs * outputs).map(|_| r.f32()).collect::<Result<Vec<_>>>()?;
            let bias = (0..outputs).map(|_| r.f32()).collect::<Result<Vec<_>>>()?;
            layers.push(Dense {
                weight: Array2::from_shape_vec((outputs, inputs), weight).map_err(|e| Error::format("model", e.to_string()))?,
                bias: Array1::from_vec(bias),
            });
        }
        let center = (0..input_dim).map(|_| r.f64()).collect::<Result<Vec<_>>>()?;
        let scale = (0..input_dim).map(|_| r.f64()).collect::<Result<Vec<_>>>()?;
        let lo = (0..input_dim).map(|_| r.f64()).collect::<Result<Vec<_>>>()?;
        let hi = (0..input_dim).map(|_| r.f64()).collect::<Result<Vec<_>>>()?;
        if r.pos != bytes.len() {
            return Err(Error::format("model", format!("{} trailing bytes", bytes.len() - r.pos)));
        }
        let domain = SamplingBox::new(lo, hi).map_err(|e| Error::format("model", e.to_string()))?;
        EnergyModel::new(Mlp::from_layers(layers)?, Normalizer { center, scale }, domain)
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos + n;
        let slice = self.bytes.get(self.pos..end).ok_or_else(|| Error::format("model", "unexpected end of file"))?;
        self.pos = end;
        Ok(slice)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn f32(&mut self) -> Result<f32> {
        Ok(f32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
}

pub fn write_model(model: &EnergyModel, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, model.to_bytes()).map_err(|e| Error::io(path, e))
}

pub fn read_model(path: impl AsRef<Path>) -> Result<EnergyModel> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    EnergyModel::from_bytes(&bytes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]
        #[test]
        fn bitwise_round_trip(seed in any::<u64>(), dim in 2usize..=3, width in 1usize..32, c in -10.0f64..10.0) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let net = Mlp::<f32>::init(&[dim, width, width, 1], &mut rng).unwrap();
            let norm = Normalizer { center: vec![c; dim], scale: vec![0.3; dim] };
            let model = EnergyModel::new(net, norm, SamplingBox::new(vec![c - 1.0; dim], vec![c + 2.0; dim]).unwrap()).unwrap();
            let bytes = model.to_bytes();
            let back = EnergyModel::from_bytes(&bytes).unwrap();
            prop_assert_eq!(&back, &model);
            prop_assert_eq!(back.to_bytes(), bytes);
        }
    }

    #[test]
    fn rejects_corrupt_files() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let net = Mlp::<f32>::init(&[3, 4, 4, 1], &mut rng).unwrap();
        let model = EnergyModel::new(net, Normalizer::identity(3), SamplingBox::cube(3, 1.0)).unwrap();
        let bytes = model.to_bytes();
        assert!(EnergyModel::from_bytes(&bytes[..bytes.len() - 1]).is_err());
        let mut extra = bytes.clone();
        extra.push(0);
        assert!(EnergyModel::from_bytes(&extra).is_err());
        let mut wrong_version = bytes.clone();
        wrong_version[4] = 9;
        assert!(EnergyModel::from_bytes(&wrong_version).is_err());
        assert!(EnergyModel::from_bytes(b"NOPE").is_err());
    }
}
