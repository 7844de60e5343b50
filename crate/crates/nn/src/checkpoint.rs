//! Text checkpoint format:
//!
//! ```text
//! lbgame-checkpoint 1
//! config_hash <hex>
//! meta <key> <value>          (zero or more)
//! tensor <name> <rank> <dims…>
//! <values, space separated, 17 significant digits>
//! end
//! ```

use std::collections::BTreeMap;
use std::path::Path;

use crate::param::{Module, NnError, Result};
use crate::real::Real;

pub const CHECKPOINT_VERSION: u32 = 1;
const MAGIC: &str = "lbgame-checkpoint";

#[derive(Debug, Clone, PartialEq)]
pub struct TensorRecord {
    pub name: String,
    pub shape: Vec<usize>,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Checkpoint {
    pub config_hash: String,
    pub meta: BTreeMap<String, String>,
    pub tensors: Vec<TensorRecord>,
}

fn bad(msg: impl Into<String>) -> NnError {
    NnError::Checkpoint(msg.into())
}

impl Checkpoint {
    pub fn new(config_hash: impl Into<String>) -> Self {
        Self {
            config_hash: config_hash.into(),
            ..Self::default()
        }
    }

    pub fn add_module<T: Real, M: Module<T>>(&mut self, module: &M) {
        for p in module.params() {
            self.tensors.push(TensorRecord {
                name: p.name.clone(),
                shape: p.shape.clone(),
                values: p.value.iter().map(|v| v.f64()).collect(),
            });
        }
    }

    /// Copies stored values into every tensor of `module` with a matching name.
    pub fn restore_module<T: Real, M: Module<T>>(&self, module: &mut M) -> Result<()> {
        for p in module.params_mut() {
            let rec = self
                .tensors
                .iter()
                .find(|t| t.name == p.name)
                .ok_or_else(|| bad(format!("missing tensor {}", p.name)))?;
            if rec.shape != p.shape {
                return Err(NnError::Shape {
                    context: format!("checkpoint tensor {}", p.name),
                    expected: p.shape.clone(),
                    got: rec.shape.clone(),
                });
            }
            p.value = rec.values.iter().map(|&v| T::c(v)).collect();
        }
        Ok(())
    }

    pub fn to_text(&self) -> String {
        let mut s = format!("{MAGIC} {CHECKPOINT_VERSION}\nconfig_hash {}\n", self.config_hash);
        for (k, v) in &self.meta {
            s.push_str(&format!("meta {k} {v}\n"));
        }
        for t in &self.tensors {
            let dims: Vec<String> = t.shape.iter().map(usize::to_string).collect();
            s.push_str(&format!("tensor {} {} {}\n", t.name, t.shape.len(), dims.join(" ")));
            let vals: Vec<String> = t.values.iter().map(|v| format!("{v:.16e}")).collect();
            s.push_str(&vals.join(" "));
            s.push('\n');
        }
        s.push_str("end\n");
        s
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        let header = lines.next().ok_or_else(|| bad("empty checkpoint"))?;
        let version = header
            .strip_prefix(MAGIC)
            .map(str::trim)
            .ok_or_else(|| bad("not a checkpoint file"))?;
        if version != CHECKPOINT_VERSION.to_string() {
            return Err(bad(format!("unsupported checkpoint version {version}")));
        }
        let hash = lines
            .next()
            .and_then(|l| l.strip_prefix("config_hash "))
            .ok_or_else(|| bad("missing config_hash"))?;
        let mut ck = Checkpoint::new(hash.trim());
        let mut ended = false;
        while let Some(line) = lines.next() {
            let mut parts = line.split_whitespace();
            match parts.next() {
                Some("meta") => {
                    let k = parts.next().ok_or_else(|| bad("meta without key"))?;
                    let v: Vec<&str> = parts.collect();
                    ck.meta.insert(k.to_string(), v.join(" "));
                }
                Some("tensor") => {
                    let name = parts.next().ok_or_else(|| bad("tensor without name"))?.to_string();
                    let rank: usize = parts
                        .next()
                        .and_then(|r| r.parse().ok())
                        .ok_or_else(|| bad(format!("bad rank for {name}")))?;
                    let shape: Vec<usize> = parts
                        .map(|d| d.parse().map_err(|_| bad(format!("bad dim for {name}"))))
                        .collect::<Result<_>>()?;
                    if shape.len() != rank {
                        return Err(bad(format!("rank mismatch for {name}")));
                    }
                    let data = lines.next().ok_or_else(|| bad(format!("missing values for {name}")))?;
                    let values: Vec<f64> = data
                        .split_whitespace()
                        .map(|v| v.parse().map_err(|_| bad(format!("bad value in {name}"))))
                        .collect::<Result<_>>()?;
                    if values.len() != shape.iter().product::<usize>() {
                        return Err(bad(format!("value count mismatch for {name}")));
                    }
                    ck.tensors.push(TensorRecord { name, shape, values });
                }
                Some("end") => {
                    ended = true;
                    break;
                }
                Some(other) => return Err(bad(format!("unexpected record '{other}'"))),
                None => {}
            }
        }
        if !ended {
            return Err(bad("truncated checkpoint"));
        }
        Ok(ck)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_text()).map_err(|e| NnError::Io {
            path: path.display().to_string(),
            message: e.to_string(),
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| NnError::Io {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        Self::from_text(&text)
    }

    /// Fails unless the stored hash equals `expected`.
    pub fn require_hash(&self, expected: &str) -> Result<()> {
        if self.config_hash != expected {
            return Err(bad(format!(
                "config hash mismatch: checkpoint {} vs config {expected}",
                self.config_hash
            )));
        }
        Ok(())
    }
}
