//! The built-in tiny GPT-2-style transformer: learned positions, pre-norm
//! blocks, GELU MLP, tied output embedding. Runs in f64 on the CPU, so every
//! forward pass is bitwise reproducible.

use std::collections::{BTreeMap, HashMap};
use std::path::Path;

use candle_core::{DType, Device, Tensor, Var, D};
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::tokenizer::Tokenizer;
use super::LanguageModel;
use crate::seed::rng_from_seed;
use crate::{Error, Result};

pub const MODEL_FAMILY: &str = "tiny-transformer";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TinyConfig {
    pub d_model: usize,
    pub n_layer: usize,
    pub n_head: usize,
    pub max_seq_len: usize,
    pub init_seed: u64,
}

impl Default for TinyConfig {
    fn default() -> Self {
        TinyConfig {
            d_model: 32,
            n_layer: 2,
            n_head: 2,
            max_seq_len: 256,
            init_seed: 0,
        }
    }
}

/// Named trainable tensors, iterated in name order.
#[derive(Debug)]
pub struct ParamStore {
    vars: BTreeMap<String, Var>,
}

impl ParamStore {
    fn get(&self, name: &str) -> &Tensor {
        self.vars
            .get(name)
            .unwrap_or_else(|| panic!("missing parameter {name}"))
            .as_tensor()
    }

    pub fn vars(&self) -> Vec<Var> {
        self.vars.values().cloned().collect()
    }

    pub fn len(&self) -> usize {
        self.vars.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vars.is_empty()
    }

    /// Deep copy: the new store shares no storage with this one.
    pub fn deep_clone(&self) -> Result<ParamStore> {
        let mut vars = BTreeMap::new();
        for (k, v) in &self.vars {
            vars.insert(k.clone(), Var::from_tensor(&v.as_tensor().copy()?)?);
        }
        Ok(ParamStore { vars })
    }

    /// SHA-256 over names and little-endian parameter bytes.
    pub fn hash(&self) -> Result<String> {
        let mut h = Sha256::new();
        for (k, v) in &self.vars {
            h.update(k.as_bytes());
            for x in v.as_tensor().flatten_all()?.to_vec1::<f64>()? {
                h.update(x.to_le_bytes());
            }
        }
        Ok(h.finalize().iter().map(|b| format!("{b:02x}")).collect())
    }

    pub fn flat_values(&self) -> Result<Vec<f64>> {
        let mut out = Vec::new();
        for v in self.vars.values() {
            out.extend(v.as_tensor().flatten_all()?.to_vec1::<f64>()?);
        }
        Ok(out)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let map: HashMap<String, Tensor> = self.vars.iter().map(|(k, v)| (k.clone(), v.as_tensor().clone())).collect();
        let tmp = path.with_extension("tmp");
        candle_core::safetensors::save(&map, &tmp)?;
        std::fs::rename(&tmp, path)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<ParamStore> {
        let map = candle_core::safetensors::load(path, &Device::Cpu)?;
        let mut vars = BTreeMap::new();
        for (k, t) in map {
            vars.insert(k, Var::from_tensor(&t)?);
        }
        Ok(ParamStore { vars })
    }

    pub(crate) fn from_tensors(tensors: Vec<(String, Tensor)>) -> Result<ParamStore> {
        let mut vars = BTreeMap::new();
        for (k, t) in tensors {
            vars.insert(k, Var::from_tensor(&t)?);
        }
        Ok(ParamStore { vars })
    }
}

pub(crate) fn normal_tensor(rng: &mut impl Rng, shape: &[usize], std: f64) -> Result<Tensor> {
    let n: usize = shape.iter().product();
    let dist = Normal::new(0.0, std).expect("valid std");
    let data: Vec<f64> = (0..n).map(|_| dist.sample(rng)).collect();
    Ok(Tensor::from_vec(data, shape, &Device::Cpu)?)
}

pub(crate) fn const_tensor(shape: &[usize], value: f64) -> Result<Tensor> {
    Ok(Tensor::full(value, shape, &Device::Cpu)?)
}

pub struct TinyTransformer {
    config: TinyConfig,
    tokenizer: Tokenizer,
    params: ParamStore,
}

impl TinyTransformer {
    pub fn new(config: TinyConfig, tokenizer: Tokenizer) -> Result<Self> {
        if config.n_head == 0 || config.d_model % config.n_head != 0 {
            return Err(Error::invalid(format!(
                "d_model {} not divisible by n_head {}",
                config.d_model, config.n_head
            )));
        }
        let mut rng = rng_from_seed(config.init_seed);
        let d = config.d_model;
        let v = tokenizer.vocab_size();
        let proj_std = 0.02 / ((2 * config.n_layer) as f64).sqrt();
        let mut t = vec![
            ("wte".to_string(), normal_tensor(&mut rng, &[v, d], 0.02)?),
            ("wpe".to_string(), normal_tensor(&mut rng, &[config.max_seq_len, d], 0.01)?),
        ];
        for l in 0..config.n_layer {
            let p = |n: &str| format!("h{l}.{n}");
            t.push((p("ln1.w"), const_tensor(&[d], 1.0)?));
            t.push((p("ln1.b"), const_tensor(&[d], 0.0)?));
            t.push((p("attn.w"), normal_tensor(&mut rng, &[d, 3 * d], 0.02)?));
            t.push((p("attn.b"), const_tensor(&[3 * d], 0.0)?));
            t.push((p("attn_proj.w"), normal_tensor(&mut rng, &[d, d], proj_std)?));
            t.push((p("attn_proj.b"), const_tensor(&[d], 0.0)?));
            t.push((p("ln2.w"), const_tensor(&[d], 1.0)?));
            t.push((p("ln2.b"), const_tensor(&[d], 0.0)?));
            t.push((p("fc.w"), normal_tensor(&mut rng, &[d, 4 * d], 0.02)?));
            t.push((p("fc.b"), const_tensor(&[4 * d], 0.0)?));
            t.push((p("fc_proj.w"), normal_tensor(&mut rng, &[4 * d, d], proj_std)?));
            t.push((p("fc_proj.b"), const_tensor(&[d], 0.0)?));
        }
        t.push(("ln_f.w".to_string(), const_tensor(&[d], 1.0)?));
        t.push(("ln_f.b".to_string(), const_tensor(&[d], 0.0)?));
        Ok(TinyTransformer {
            config,
            tokenizer,
            params: ParamStore::from_tensors(t)?,
        })
    }

    pub fn config(&self) -> &TinyConfig {
        &self.config
    }

    pub fn params(&self) -> &ParamStore {
        &self.params
    }

    /// An independent copy with its own parameter storage.
    pub fn deep_clone(&self) -> Result<TinyTransformer> {
        Ok(TinyTransformer {
            config: self.config.clone(),
            tokenizer: self.tokenizer.clone(),
            params: self.params.deep_clone()?,
        })
    }

    pub fn d_model(&self) -> usize {
        self.config.d_model
    }

    fn check_len(&self, len: usize) -> Result<()> {
        if len == 0 {
            return Err(Error::invalid("empty token sequence"));
        }
        if len > self.config.max_seq_len {
            return Err(Error::Length {
                len,
                max: self.config.max_seq_len,
            });
        }
        Ok(())
    }

    /// Final hidden states, shape `[T, d_model]`.
    pub fn forward_hidden(&self, ids: &[u32]) -> Result<Tensor> {
        self.check_len(ids.len())?;
        let t = ids.len();
        let dev = Device::Cpu;
        let ids_t = Tensor::new(ids, &dev)?;
        let pos = self.params.get("wpe").narrow(0, 0, t)?;
        let mut x = self.params.get("wte").index_select(&ids_t, 0)?.add(&pos)?;
        let mask = causal_mask(t)?;
        for l in 0..self.config.n_layer {
            let p = |n: &str| format!("h{l}.{n}");
            let h = layer_norm(&x, self.params.get(&p("ln1.w")), self.params.get(&p("ln1.b")))?;
            let a = self.attention(&h, &mask, l)?;
            x = x.add(&a)?;
            let h = layer_norm(&x, self.params.get(&p("ln2.w")), self.params.get(&p("ln2.b")))?;
            let m = linear(&h, self.params.get(&p("fc.w")), self.params.get(&p("fc.b")))?.gelu()?;
            let m = linear(&m, self.params.get(&p("fc_proj.w")), self.params.get(&p("fc_proj.b")))?;
            x = x.add(&m)?;
        }
        Ok(layer_norm(&x, self.params.get("ln_f.w"), self.params.get("ln_f.b"))?)
    }

    fn attention(&self, x: &Tensor, mask: &Tensor, layer: usize) -> Result<Tensor> {
        let (t, d) = x.dims2()?;
        let nh = self.config.n_head;
        let hd = d / nh;
        let qkv = linear(
            x,
            self.params.get(&format!("h{layer}.attn.w")),
            self.params.get(&format!("h{layer}.attn.b")),
        )?;
        let split = |i: usize| -> candle_core::Result<Tensor> {
            qkv.narrow(1, i * d, d)?.reshape((t, nh, hd))?.transpose(0, 1)?.contiguous()
        };
        let (q, k, v) = (split(0)?, split(1)?, split(2)?);
        let att = q.matmul(&k.t()?.contiguous()?)?.affine(1.0 / (hd as f64).sqrt(), 0.0)?;
        let att = candle_nn::ops::softmax_last_dim(&att.broadcast_add(mask)?)?;
        let y = att.matmul(&v)?.transpose(0, 1)?.contiguous()?.reshape((t, d))?;
        Ok(linear(
            &y,
            self.params.get(&format!("h{layer}.attn_proj.w")),
            self.params.get(&format!("h{layer}.attn_proj.b")),
        )?)
    }

    /// Logits over the vocabulary from hidden states, shape `[T, V]`.
    pub fn logits_from_hidden(&self, hidden: &Tensor) -> Result<Tensor> {
        Ok(hidden.matmul(&self.params.get("wte").t()?)?)
    }

    /// Log-softmax of the logits, shape `[T, V]`, differentiable.
    pub fn log_probs_tensor(&self, ids: &[u32]) -> Result<Tensor> {
        let h = self.forward_hidden(ids)?;
        Ok(candle_nn::ops::log_softmax(&self.logits_from_hidden(&h)?, D::Minus1)?)
    }

    pub fn save(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        self.params.save(&dir.join("model.safetensors"))?;
        self.tokenizer.save(&dir.join("tokenizer.json"))?;
        crate::io::write_json(&dir.join("model_config.json"), &self.config)
    }

    pub fn load(dir: &Path) -> Result<TinyTransformer> {
        let ckpt_err = |message: String| Error::Checkpoint {
            path: dir.to_path_buf(),
            message,
        };
        let config: TinyConfig =
            crate::io::read_json(&dir.join("model_config.json")).map_err(|e| ckpt_err(e.to_string()))?;
        let tokenizer = Tokenizer::load(&dir.join("tokenizer.json")).map_err(|e| ckpt_err(e.to_string()))?;
        let params = ParamStore::load(&dir.join("model.safetensors")).map_err(|e| ckpt_err(e.to_string()))?;
        let model = TinyTransformer {
            config,
            tokenizer,
            params,
        };
        let expected = TinyTransformer::new(model.config.clone(), model.tokenizer.clone())?;
        if expected.params.vars.keys().ne(model.params.vars.keys()) {
            return Err(ckpt_err("parameter names do not match the model config".into()));
        }
        Ok(model)
    }
}

impl LanguageModel for TinyTransformer {
    fn tokenizer(&self) -> &Tokenizer {
        &self.tokenizer
    }

    fn max_sequence_length(&self) -> usize {
        self.config.max_seq_len
    }

    fn next_token_log_probs(&self, ids: &[u32]) -> Result<Vec<Vec<f64>>> {
        Ok(self.log_probs_tensor(ids)?.to_vec2::<f64>()?)
    }

    fn last_log_probs(&self, ids: &[u32]) -> Result<Vec<f64>> {
        let lp = self.log_probs_tensor(ids)?;
        Ok(lp.get(ids.len() - 1)?.to_vec1::<f64>()?)
    }
}

pub(crate) fn linear(x: &Tensor, w: &Tensor, b: &Tensor) -> candle_core::Result<Tensor> {
    x.matmul(w)?.broadcast_add(b)
}

fn layer_norm(x: &Tensor, w: &Tensor, b: &Tensor) -> candle_core::Result<Tensor> {
    let mean = x.mean_keepdim(D::Minus1)?;
    let centered = x.broadcast_sub(&mean)?;
    let var = centered.sqr()?.mean_keepdim(D::Minus1)?;
    centered
        .broadcast_div(&(var + 1e-5)?.sqrt()?)?
        .broadcast_mul(w)?
        .broadcast_add(b)
}

fn causal_mask(t: usize) -> candle_core::Result<Tensor> {
    // 0 on and below the diagonal, -1e9 above
    Tensor::tril2(t, DType::F64, &Device::Cpu)?.affine(1e9, -1e9)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny() -> TinyTransformer {
        let tok = Tokenizer::build(["hello there friend", "how are you"], 1, 100);
        TinyTransformer::new(
            TinyConfig {
                max_seq_len: 32,
                ..TinyConfig::default()
            },
            tok,
        )
        .unwrap()
    }

    #[test]
    fn rows_are_normalized() {
        let m = tiny();
        let ids = m.tokenizer().encode_plain("hello there how");
        for row in m.next_token_log_probs(&ids).unwrap() {
            let s: f64 = row.iter().map(|x| x.exp()).sum();
            assert!((s - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn causal_prefix_consistency() {
        let m = tiny();
        let ids = m.tokenizer().encode_plain("hello there friend how are you");
        let full = m.next_token_log_probs(&ids).unwrap();
        let prefix = m.next_token_log_probs(&ids[..3]).unwrap();
        for (a, b) in full[2].iter().zip(&prefix[2]) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn length_limit_enforced() {
        let m = tiny();
        let ids = vec![1u32; 33];
        assert!(matches!(m.forward_hidden(&ids), Err(Error::Length { len: 33, max: 32 })));
    }

    #[test]
    fn same_seed_same_weights_and_save_load() {
        let a = tiny();
        let b = tiny();
        assert_eq!(a.params().hash().unwrap(), b.params().hash().unwrap());
        let dir = tempfile::tempdir().unwrap();
        a.save(dir.path()).unwrap();
        let c = TinyTransformer::load(dir.path()).unwrap();
        assert_eq!(a.params().hash().unwrap(), c.params().hash().unwrap());
        let copy = a.deep_clone().unwrap();
        assert_eq!(copy.params().hash().unwrap(), a.params().hash().unwrap());
    }
}
