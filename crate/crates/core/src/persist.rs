// SPDX-License-Identifier: Apache-2.0
// SPDX-FileCopyrightText: Copyright The PASS Authors

//! JSON form of a [`Synopsis`]. Floats are written as shortest round-trip
//! decimals; infinite box faces as the strings `"inf"` and `"-inf"`.

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::estimators::{EstimatorConfig, StratumSample};
use crate::model::Rect;
use crate::scalar::Scalar;
use crate::synopsis::{AggregateSummary, BuildMetadata, PartitionNode, Synopsis};

pub const FORMAT_VERSION: u32 = 1;

mod ext_float {
    use super::*;

    #[derive(Serialize, Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Num(f64),
        Text(String),
    }

    fn to_repr(v: f64) -> Repr {
        if v == f64::INFINITY {
            Repr::Text("inf".into())
        } else if v == f64::NEG_INFINITY {
            Repr::Text("-inf".into())
        } else {
            Repr::Num(v)
        }
    }

    fn from_repr<E: serde::de::Error>(r: Repr) -> Result<f64, E> {
        match r {
            Repr::Num(v) => Ok(v),
            Repr::Text(s) => match s.as_str() {
                "inf" => Ok(f64::INFINITY),
                "-inf" => Ok(f64::NEG_INFINITY),
                other => Err(E::custom(format!("bad number {other:?}"))),
            },
        }
    }

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        to_repr(*v).serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        from_repr(Repr::deserialize(d)?)
    }

    pub mod vec {
        use super::*;

        pub fn serialize<S: Serializer>(v: &[f64], s: S) -> Result<S::Ok, S::Error> {
            v.iter().map(|&x| to_repr(x)).collect::<Vec<_>>().serialize(s)
        }

        pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<f64>, D::Error> {
            Vec::<Repr>::deserialize(d)?
                .into_iter()
                .map(from_repr)
                .collect()
        }
    }
}

#[derive(Serialize, Deserialize)]
struct SummaryDoc {
    sum: f64,
    count: usize,
    min: f64,
    max: f64,
}

#[derive(Serialize, Deserialize)]
struct SampleDoc {
    population: usize,
    seed: u64,
    points: Vec<f64>,
    values: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct NodeDoc {
    parent: Option<usize>,
    depth: usize,
    #[serde(with = "ext_float::vec")]
    lo: Vec<f64>,
    #[serde(with = "ext_float::vec")]
    hi: Vec<f64>,
    summary: SummaryDoc,
    span: [usize; 2],
    #[serde(default, skip_serializing_if = "Option::is_none")]
    sample: Option<SampleDoc>,
}

#[derive(Serialize, Deserialize)]
struct SynopsisDoc {
    version: u32,
    d: usize,
    #[serde(rename = "N")]
    n: usize,
    #[serde(with = "ext_float")]
    shift: f64,
    estimator_cfg: EstimatorConfig,
    metadata: BuildMetadata,
    nodes: Vec<NodeDoc>,
}

fn f64s<T: Scalar>(v: &[T]) -> Vec<f64> {
    v.iter().map(|x| x.as_f64()).collect()
}

fn scalars<T: Scalar>(v: &[f64]) -> Vec<T> {
    v.iter().map(|&x| T::lit(x)).collect()
}

impl<T: Scalar> Synopsis<T> {
    pub fn to_json(&self) -> Result<String> {
        let nodes = self
            .nodes
            .iter()
            .map(|n| NodeDoc {
                parent: n.parent,
                depth: n.depth,
                lo: f64s(n.rect.lo()),
                hi: f64s(n.rect.hi()),
                summary: SummaryDoc {
                    sum: n.summary.sum.as_f64(),
                    count: n.summary.count,
                    min: n.summary.min.as_f64(),
                    max: n.summary.max.as_f64(),
                },
                span: [n.span.start, n.span.end],
                sample: n.sample.as_ref().map(|s| SampleDoc {
                    population: s.population(),
                    seed: s.seed(),
                    points: f64s(s.points()),
                    values: f64s(s.values()),
                }),
            })
            .collect();
        let doc = SynopsisDoc {
            version: FORMAT_VERSION,
            d: self.dimension,
            n: self.dataset_size,
            shift: self.value_shift.as_f64(),
            estimator_cfg: self.estimator,
            metadata: self.metadata.clone(),
            nodes,
        };
        serde_json::to_string(&doc).map_err(|e| Error::Serialization(e.to_string()))
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: SynopsisDoc =
            serde_json::from_str(text).map_err(|e| Error::Serialization(e.to_string()))?;
        if doc.version != FORMAT_VERSION {
            return Err(Error::Serialization(format!(
                "unsupported format version {}",
                doc.version
            )));
        }
        if doc.nodes.is_empty() {
            return Err(Error::Serialization("synopsis has no nodes".into()));
        }
        doc.estimator_cfg.validate()?;
        let mut nodes: Vec<PartitionNode<T>> = Vec::with_capacity(doc.nodes.len());
        for (id, nd) in doc.nodes.into_iter().enumerate() {
            match nd.parent {
                None if id == 0 => {}
                Some(p) if p < id => {}
                _ => {
                    return Err(Error::Serialization(format!(
                        "node {id} has an invalid parent"
                    )))
                }
            }
            if nd.lo.len() != doc.d {
                return Err(Error::DimensionMismatch {
                    expected: doc.d,
                    actual: nd.lo.len(),
                });
            }
            let sample = match nd.sample {
                Some(s) => Some(StratumSample::new(
                    doc.d,
                    scalars(&s.points),
                    scalars(&s.values),
                    s.population,
                    s.seed,
                )?),
                None => None,
            };
            let node = PartitionNode {
                rect: Rect::new(scalars(&nd.lo), scalars(&nd.hi))?,
                summary: AggregateSummary {
                    sum: T::lit(nd.summary.sum),
                    count: nd.summary.count,
                    min: T::lit(nd.summary.min),
                    max: T::lit(nd.summary.max),
                },
                parent: nd.parent,
                children: Vec::new(),
                sample,
                depth: nd.depth,
                span: nd.span[0]..nd.span[1],
            };
            if let Some(p) = node.parent {
                nodes[p].children.push(id);
            }
            nodes.push(node);
        }
        let leaves: Vec<usize> = (0..nodes.len()).filter(|&i| nodes[i].is_leaf()).collect();
        if let Some(&bad) = leaves.iter().find(|&&l| nodes[l].sample.is_none()) {
            return Err(Error::Serialization(format!("leaf {bad} has no sample")));
        }
        Ok(Self {
            nodes,
            leaves,
            dimension: doc.d,
            dataset_size: doc.n,
            estimator: doc.estimator_cfg,
            value_shift: T::lit(doc.shift),
            metadata: doc.metadata,
        })
    }
}
