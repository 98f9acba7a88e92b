//! `RSPM1` model container.
//!
//! ```text
//! magic "RSPM1" | kind u8 | version u8 | n_sections u16
//! n_sections x (tag [u8; 4] | count u64)
//! payloads: count x f64 per section, in table order
//! ```
//! Everything is little-endian. Integers and seeds are stored as f64 values
//! (seeds as two 32-bit halves) so a payload is always a float array.

use ndarray::Array2;

use crate::classifiers::adaboost::{AdaBoostModel, Stump};
use crate::classifiers::forest::ForestModel;
use crate::classifiers::logreg::LogRegModel;
use crate::classifiers::svm::{Kernel, SvmModel};
use crate::classifiers::tree::{DecisionTree, Node, LEAF};
use crate::classifiers::TrainedModel;
use crate::error::{Error, Result};

pub const MAGIC: &[u8; 5] = b"RSPM1";
pub const VERSION: u8 = 1;

const KIND_SVM: u8 = 1;
const KIND_LR: u8 = 2;
const KIND_RF: u8 = 3;
const KIND_AB: u8 = 4;

#[derive(Debug, Clone, PartialEq)]
pub struct Section {
    pub tag: [u8; 4],
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Container {
    pub kind: u8,
    pub version: u8,
    pub sections: Vec<Section>,
}

fn corrupt(msg: impl Into<String>) -> Error {
    Error::Container(msg.into())
}

impl Container {
    pub fn to_bytes(&self) -> Vec<u8> {
        let payload: usize = self.sections.iter().map(|s| s.values.len() * 8).sum();
        let mut out = Vec::with_capacity(9 + 12 * self.sections.len() + payload);
        out.extend_from_slice(MAGIC);
        out.push(self.kind);
        out.push(self.version);
        out.extend_from_slice(&(self.sections.len() as u16).to_le_bytes());
        for s in &self.sections {
            out.extend_from_slice(&s.tag);
            out.extend_from_slice(&(s.values.len() as u64).to_le_bytes());
        }
        for s in &self.sections {
            for v in &s.values {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < 9 || &bytes[..5] != MAGIC {
            return Err(corrupt("missing RSPM1 header"));
        }
        let kind = bytes[5];
        let version = bytes[6];
        if version != VERSION {
            return Err(corrupt(format!("unsupported version {version}")));
        }
        let n = u16::from_le_bytes([bytes[7], bytes[8]]) as usize;
        let mut pos = 9;
        let mut table = Vec::with_capacity(n);
        for _ in 0..n {
            let entry = bytes.get(pos..pos + 12).ok_or_else(|| corrupt("truncated section table"))?;
            let tag: [u8; 4] = entry[..4].try_into().unwrap();
            let count = u64::from_le_bytes(entry[4..].try_into().unwrap());
            table.push((tag, count));
            pos += 12;
        }
        let mut sections = Vec::with_capacity(n);
        for (tag, count) in table {
            let len = usize::try_from(count)
                .ok()
                .and_then(|c| c.checked_mul(8))
                .ok_or_else(|| corrupt("section too large"))?;
            let raw = bytes
                .get(pos..pos.checked_add(len).ok_or_else(|| corrupt("section too large"))?)
                .ok_or_else(|| corrupt(format!("truncated section {:?}", String::from_utf8_lossy(&tag))))?;
            let values = raw.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect();
            sections.push(Section { tag, values });
            pos += len;
        }
        if pos != bytes.len() {
            return Err(corrupt(format!("{} trailing bytes", bytes.len() - pos)));
        }
        Ok(Self { kind, version, sections })
    }

    fn section(&self, tag: &[u8; 4]) -> Result<&[f64]> {
        self.sections
            .iter()
            .find(|s| &s.tag == tag)
            .map(|s| s.values.as_slice())
            .ok_or_else(|| corrupt(format!("missing section {}", String::from_utf8_lossy(tag))))
    }
}

fn seed_values(seed: u64) -> [f64; 2] {
    [(seed >> 32) as f64, (seed & 0xffff_ffff) as f64]
}

fn as_count(v: f64, what: &str) -> Result<usize> {
    if v >= 0.0 && v.fract() == 0.0 && v < 2f64.powi(53) {
        Ok(v as usize)
    } else {
        Err(corrupt(format!("{what} is not a count: {v}")))
    }
}

fn seed_from(hi: f64, lo: f64) -> Result<u64> {
    let hi = as_count(hi, "seed")? as u64;
    let lo = as_count(lo, "seed")? as u64;
    if hi > u32::MAX as u64 || lo > u32::MAX as u64 {
        return Err(corrupt("seed half out of range"));
    }
    Ok(hi << 32 | lo)
}

fn header(parm: &[f64], want: usize) -> Result<&[f64]> {
    if parm.len() != want {
        return Err(corrupt(format!("PARM has {} values, expected {want}", parm.len())));
    }
    Ok(parm)
}

pub fn serialize_model(model: &TrainedModel) -> Vec<u8> {
    let sec = |tag: &[u8; 4], values: Vec<f64>| Section { tag: *tag, values };
    let (kind, sections) = match model {
        TrainedModel::Svm(m) => {
            let (code, degree) = match m.kernel {
                Kernel::Rbf => (0.0, 0.0),
                Kernel::Poly { degree } => (1.0, degree as f64),
                Kernel::Sigmoid => (2.0, 0.0),
            };
            let [hi, lo] = seed_values(m.seed);
            let parm = vec![
                m.width as f64,
                hi,
                lo,
                code,
                degree,
                m.gamma,
                m.bias,
                m.kkt_gap,
                m.iterations as f64,
            ];
            (
                KIND_SVM,
                vec![
                    sec(b"PARM", parm),
                    sec(b"DUAL", m.dual_coef.clone()),
                    sec(b"SVEC", m.support_vectors.iter().cloned().collect()),
                ],
            )
        }
        TrainedModel::LogReg(m) => {
            let [hi, lo] = seed_values(m.seed);
            (
                KIND_LR,
                vec![
                    sec(b"PARM", vec![m.weights.len() as f64, hi, lo, m.iterations as f64, m.bias]),
                    sec(b"WGHT", m.weights.clone()),
                ],
            )
        }
        TrainedModel::Forest(m) => {
            let [hi, lo] = seed_values(m.seed);
            let counts = m.trees.iter().map(|t| t.nodes.len() as f64).collect();
            let mut nodes = Vec::new();
            for n in m.trees.iter().flat_map(|t| &t.nodes) {
                if n.feature == LEAF {
                    nodes.extend_from_slice(&[-1.0, 0.0, 0.0, 0.0, n.value]);
                } else {
                    nodes.extend_from_slice(&[n.feature as f64, n.threshold, n.left as f64, n.right as f64, n.value]);
                }
            }
            (
                KIND_RF,
                vec![
                    sec(b"PARM", vec![m.width as f64, hi, lo]),
                    sec(b"NCNT", counts),
                    sec(b"NODE", nodes),
                ],
            )
        }
        TrainedModel::AdaBoost(m) => {
            let [hi, lo] = seed_values(m.seed);
            let stumps = m
                .stumps
                .iter()
                .flat_map(|s| [s.feature as f64, s.threshold, s.polarity, s.alpha, s.error])
                .collect();
            (
                KIND_AB,
                vec![sec(b"PARM", vec![m.width as f64, hi, lo]), sec(b"STMP", stumps)],
            )
        }
    };
    Container {
        kind,
        version: VERSION,
        sections,
    }
    .to_bytes()
}

pub fn deserialize_model(bytes: &[u8]) -> Result<TrainedModel> {
    let c = Container::from_bytes(bytes)?;
    match c.kind {
        KIND_SVM => {
            let p = header(c.section(b"PARM")?, 9)?;
            let width = as_count(p[0], "width")?;
            let kernel = match p[3] {
                v if v == 0.0 => Kernel::Rbf,
                v if v == 1.0 => Kernel::Poly {
                    degree: as_count(p[4], "degree")? as u32,
                },
                v if v == 2.0 => Kernel::Sigmoid,
                v => return Err(corrupt(format!("unknown kernel code {v}"))),
            };
            let dual_coef = c.section(b"DUAL")?.to_vec();
            let svec = c.section(b"SVEC")?;
            if width == 0 || svec.len() != dual_coef.len() * width {
                return Err(corrupt("support vector block does not match the dual count"));
            }
            Ok(TrainedModel::Svm(SvmModel {
                kernel,
                gamma: p[5],
                support_vectors: Array2::from_shape_vec((dual_coef.len(), width), svec.to_vec()).unwrap(),
                dual_coef,
                bias: p[6],
                width,
                seed: seed_from(p[1], p[2])?,
                kkt_gap: p[7],
                iterations: as_count(p[8], "iterations")?,
            }))
        }
        KIND_LR => {
            let p = header(c.section(b"PARM")?, 5)?;
            let weights = c.section(b"WGHT")?.to_vec();
            if weights.len() != as_count(p[0], "width")? {
                return Err(corrupt("weight count does not match the width"));
            }
            Ok(TrainedModel::LogReg(LogRegModel {
                weights,
                bias: p[4],
                seed: seed_from(p[1], p[2])?,
                iterations: as_count(p[3], "iterations")?,
            }))
        }
        KIND_RF => {
            let p = header(c.section(b"PARM")?, 3)?;
            let width = as_count(p[0], "width")?;
            let nodes = c.section(b"NODE")?;
            let mut trees = Vec::new();
            let mut at = 0;
            for &count in c.section(b"NCNT")? {
                let count = as_count(count, "node count")?;
                let block = nodes
                    .get(at * 5..(at + count) * 5)
                    .ok_or_else(|| corrupt("node block shorter than the counts"))?;
                let mut tree = Vec::with_capacity(count);
                for v in block.chunks_exact(5) {
                    let node = if v[0] == -1.0 {
                        Node {
                            feature: LEAF,
                            threshold: 0.0,
                            left: 0,
                            right: 0,
                            value: v[4],
                        }
                    } else {
                        let (f, l, r) = (as_count(v[0], "feature")?, as_count(v[2], "child")?, as_count(v[3], "child")?);
                        if f >= width || l >= count || r >= count {
                            return Err(corrupt("node index out of range"));
                        }
                        Node {
                            feature: f,
                            threshold: v[1],
                            left: l,
                            right: r,
                            value: v[4],
                        }
                    };
                    tree.push(node);
                }
                if tree.is_empty() {
                    return Err(corrupt("empty tree"));
                }
                trees.push(DecisionTree { nodes: tree });
                at += count;
            }
            if at * 5 != nodes.len() || trees.is_empty() {
                return Err(corrupt("node block does not match the counts"));
            }
            Ok(TrainedModel::Forest(ForestModel {
                trees,
                width,
                seed: seed_from(p[1], p[2])?,
            }))
        }
        KIND_AB => {
            let p = header(c.section(b"PARM")?, 3)?;
            let width = as_count(p[0], "width")?;
            let raw = c.section(b"STMP")?;
            if raw.len() % 5 != 0 {
                return Err(corrupt("stump block is not a multiple of 5"));
            }
            let stumps = raw
                .chunks_exact(5)
                .map(|v| {
                    let feature = as_count(v[0], "feature")?;
                    if feature >= width {
                        return Err(corrupt("stump feature out of range"));
                    }
                    Ok(Stump {
                        feature,
                        threshold: v[1],
                        polarity: v[2],
                        alpha: v[3],
                        error: v[4],
                    })
                })
                .collect::<Result<_>>()?;
            Ok(TrainedModel::AdaBoost(AdaBoostModel {
                stumps,
                width,
                seed: seed_from(p[1], p[2])?,
            }))
        }
        k => Err(corrupt(format!("unknown model kind {k}"))),
    }
}

/// Serialized size in bytes.
pub fn model_size(model: &TrainedModel) -> usize {
    serialize_model(model).len()
}
