//! Binary model checkpoint.
//!
//! Little-endian throughout:
//!
//! ```text
//! magic       8 bytes "DQLCKPT1"
//! n_layers    u32
//!   inputs    u32
//!   outputs   u32
//!   act       u8      0 = ReLU
//!   weights   inputs x outputs f64, row-major
//!   bias      outputs f64
//! optimizer   u8      0 = Adam, 1 = SGD
//!   (Adam)    beta1 f64, beta2 f64, epsilon f64, step u64,
//!             then m and v: for each layer, weights then bias (f64)
//! has_rng     u8
//!   (1)       seed 32 bytes, stream u64, word_pos u128
//! step        u64     training iterations completed
//! ```
//!
//! `save -> load -> save` is byte-identical.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use ndarray::{Array1, Array2};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{
    Activation, AdamState, DenseLayer, GradientSet, LayerSpec, NnError, Optimizer, QNetwork,
};
use crate::binio::*;

pub const CHECKPOINT_MAGIC: &[u8; 8] = b"DQLCKPT1";

/// Exact position of a ChaCha8 stream.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RngState {
    pub seed: [u8; 32],
    pub stream: u64,
    pub word_pos: u128,
}

impl RngState {
    pub fn capture(rng: &ChaCha8Rng) -> Self {
        Self {
            seed: rng.get_seed(),
            stream: rng.get_stream(),
            word_pos: rng.get_word_pos(),
        }
    }

    pub fn restore(&self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::from_seed(self.seed);
        rng.set_stream(self.stream);
        rng.set_word_pos(self.word_pos);
        rng
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub network: QNetwork,
    pub optimizer: Optimizer,
    pub rng: Option<RngState>,
    pub step: u64,
}

fn write_grads<W: Write>(w: &mut W, g: &GradientSet) -> std::io::Result<()> {
    for (wt, b) in g.weights.iter().zip(&g.biases) {
        write_f64s(w, wt.iter())?;
        write_f64s(w, b.iter())?;
    }
    Ok(())
}

fn read_grads<R: Read>(r: &mut R, specs: &[LayerSpec]) -> Result<GradientSet, NnError> {
    let mut weights = Vec::with_capacity(specs.len());
    let mut biases = Vec::with_capacity(specs.len());
    for s in specs {
        let wt = read_f64s(r, s.inputs * s.outputs)?;
        weights.push(
            Array2::from_shape_vec((s.inputs, s.outputs), wt)
                .map_err(|e| NnError::Checkpoint(e.to_string()))?,
        );
        biases.push(Array1::from(read_f64s(r, s.outputs)?));
    }
    Ok(GradientSet { weights, biases })
}

impl Checkpoint {
    pub fn write<W: Write>(&self, w: &mut W) -> Result<(), NnError> {
        w.write_all(CHECKPOINT_MAGIC)?;
        let layers = self.network.layers();
        write_u32(w, layers.len() as u32)?;
        for l in layers {
            write_u32(w, l.spec.inputs as u32)?;
            write_u32(w, l.spec.outputs as u32)?;
            write_u8(
                w,
                match l.spec.activation {
                    Activation::Relu => 0,
                },
            )?;
            write_f64s(w, l.weights.iter())?;
            write_f64s(w, l.bias.iter())?;
        }
        match &self.optimizer {
            Optimizer::Adam(s) => {
                write_u8(w, 0)?;
                write_f64(w, s.beta1)?;
                write_f64(w, s.beta2)?;
                write_f64(w, s.epsilon)?;
                write_u64(w, s.step)?;
                write_grads(w, &s.m)?;
                write_grads(w, &s.v)?;
            }
            Optimizer::Sgd => write_u8(w, 1)?,
        }
        match &self.rng {
            Some(rng) => {
                write_u8(w, 1)?;
                w.write_all(&rng.seed)?;
                write_u64(w, rng.stream)?;
                write_u128(w, rng.word_pos)?;
            }
            None => write_u8(w, 0)?,
        }
        write_u64(w, self.step)?;
        Ok(())
    }

    pub fn read<R: Read>(r: &mut R) -> Result<Self, NnError> {
        let magic: [u8; 8] = read_array(r)?;
        if &magic != CHECKPOINT_MAGIC {
            return Err(NnError::Checkpoint("bad magic, not a checkpoint".into()));
        }
        let n = read_u32(r)? as usize;
        if n == 0 {
            return Err(NnError::NoLayers);
        }
        let mut layers = Vec::with_capacity(n);
        for _ in 0..n {
            let inputs = read_u32(r)? as usize;
            let outputs = read_u32(r)? as usize;
            let activation = match read_u8(r)? {
                0 => Activation::Relu,
                a => return Err(NnError::Checkpoint(format!("unknown activation {a}"))),
            };
            let weights =
                Array2::from_shape_vec((inputs, outputs), read_f64s(r, inputs * outputs)?)
                    .map_err(|e| NnError::Checkpoint(e.to_string()))?;
            let bias = Array1::from(read_f64s(r, outputs)?);
            layers.push(DenseLayer {
                spec: LayerSpec {
                    inputs,
                    outputs,
                    activation,
                },
                weights,
                bias,
            });
        }
        let network = QNetwork::from_layers(layers)?;
        let specs = network.specs();
        let optimizer = match read_u8(r)? {
            0 => {
                let beta1 = read_f64(r)?;
                let beta2 = read_f64(r)?;
                let epsilon = read_f64(r)?;
                let step = read_u64(r)?;
                let m = read_grads(r, &specs)?;
                let v = read_grads(r, &specs)?;
                Optimizer::Adam(AdamState {
                    beta1,
                    beta2,
                    epsilon,
                    step,
                    m,
                    v,
                })
            }
            1 => Optimizer::Sgd,
            o => return Err(NnError::Checkpoint(format!("unknown optimizer tag {o}"))),
        };
        let rng = match read_u8(r)? {
            0 => None,
            1 => Some(RngState {
                seed: read_array(r)?,
                stream: read_u64(r)?,
                word_pos: read_u128(r)?,
            }),
            t => return Err(NnError::Checkpoint(format!("bad rng tag {t}"))),
        };
        let step = read_u64(r)?;
        let mut trailing = [0u8; 1];
        if r.read(&mut trailing)? != 0 {
            return Err(NnError::Checkpoint(
                "trailing bytes after checkpoint".into(),
            ));
        }
        Ok(Self {
            network,
            optimizer,
            rng,
            step,
        })
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut buf = Vec::new();
        self.write(&mut buf).expect("writing to a Vec cannot fail");
        buf
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), NnError> {
        let mut w = BufWriter::new(File::create(path)?);
        self.write(&mut w)?;
        w.flush()?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, NnError> {
        Self::read(&mut BufReader::new(File::open(path)?))
    }
}
