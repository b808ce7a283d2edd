//! Source-localization datasets and the dataset file format.

use std::collections::HashSet;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{Graph, ShiftOperator};
use crate::numerics::RealVector;
use crate::rng::Rng;

/// Number of reshuffles `split_dataset` tries before giving up on class coverage.
pub const SPLIT_MAX_ATTEMPTS: usize = 100;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SampleMeta {
    pub source: usize,
    pub time: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    #[serde(rename = "x")]
    pub signal: RealVector,
    pub label: usize,
    #[serde(default)]
    pub meta: Option<SampleMeta>,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Splits {
    pub train: Vec<usize>,
    pub val: Vec<usize>,
    pub test: Vec<usize>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Split {
    Train,
    Val,
    Test,
}

impl std::str::FromStr for Split {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "train" => Ok(Split::Train),
            "val" | "validation" => Ok(Split::Val),
            "test" => Ok(Split::Test),
            other => Err(Error::invalid(format!("unknown split '{other}'"))),
        }
    }
}

/// Labelled graph signals with train/val/test index lists.
///
/// File format: `{"n": int, "classes": int, "samples": [{"x": [real; n], "label": int,
/// "meta": {...} | null}], "splits": {"train": [idx], "val": [idx], "test": [idx]},
/// "provenance": string}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub n: usize,
    pub classes: usize,
    pub samples: Vec<Sample>,
    pub splits: Splits,
    pub provenance: String,
}

impl Dataset {
    pub fn split(&self, which: Split) -> &[usize] {
        match which {
            Split::Train => &self.splits.train,
            Split::Val => &self.splits.val,
            Split::Test => &self.splits.test,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (i, s) in self.samples.iter().enumerate() {
            if s.signal.len() != self.n {
                return Err(Error::Parse {
                    location: format!("samples[{i}].x"),
                    message: format!("expected {} values, found {}", self.n, s.signal.len()),
                });
            }
            if !s.signal.is_finite() {
                return Err(Error::Parse {
                    location: format!("samples[{i}].x"),
                    message: "non-finite value".into(),
                });
            }
            if s.label >= self.classes {
                return Err(Error::Parse {
                    location: format!("samples[{i}].label"),
                    message: format!("label {} >= classes {}", s.label, self.classes),
                });
            }
        }
        let mut seen = HashSet::new();
        for (name, idx) in [
            ("train", &self.splits.train),
            ("val", &self.splits.val),
            ("test", &self.splits.test),
        ] {
            for (pos, &i) in idx.iter().enumerate() {
                if i >= self.samples.len() {
                    return Err(Error::Parse {
                        location: format!("splits.{name}[{pos}]"),
                        message: format!("index {i} out of range"),
                    });
                }
                if !seen.insert(i) {
                    return Err(Error::Parse {
                        location: format!("splits.{name}[{pos}]"),
                        message: format!("index {i} appears in more than one split slot"),
                    });
                }
            }
        }
        if let Some(class) = missing_class(&self.samples, &self.splits.train, self.classes) {
            return Err(Error::ClassMissing { class, attempts: 0 });
        }
        Ok(())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, serde_json::to_string(self)? + "\n")?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_json(&text)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let ds: Dataset = serde_json::from_str(text)?;
        ds.validate()?;
        Ok(ds)
    }
}

fn missing_class(samples: &[Sample], train: &[usize], classes: usize) -> Option<usize> {
    if train.is_empty() && samples.is_empty() {
        return None;
    }
    let mut present = vec![false; classes];
    for &i in train {
        present[samples[i].label] = true;
    }
    present.iter().position(|p| !p)
}

/// Diffused-delta source localization samples.
///
/// Each sample picks a community uniformly, a source node uniformly inside it and a time
/// `t` uniformly in `0..=t_max`; the signal is `S^t δ_source` and the label the community.
/// The first `n_train` samples form the training split, then validation, then test.
pub fn make_source_loc_dataset(
    g: &Graph,
    s: &ShiftOperator,
    n_train: usize,
    n_val: usize,
    n_test: usize,
    t_max: usize,
    rng: &mut Rng,
) -> Result<Dataset> {
    let labels = g
        .communities()
        .ok_or_else(|| Error::invalid("source localization needs community labels"))?;
    if s.n() != g.n() {
        return Err(Error::dims("shift operator", g.n(), s.n()));
    }
    let classes = g.community_count().unwrap_or(0);
    let members: Vec<Vec<usize>> = (0..classes)
        .map(|c| (0..g.n()).filter(|&i| labels[i] == c).collect())
        .collect();
    if let Some(c) = members.iter().position(|m| m.is_empty()) {
        return Err(Error::invalid(format!("community {c} has no nodes")));
    }

    let total = n_train + n_val + n_test;
    let mut samples = Vec::with_capacity(total);
    let mut buf = RealVector::zeros(g.n());
    for _ in 0..total {
        let label = rng.index(classes);
        let source = members[label][rng.index(members[label].len())];
        let time = rng.index(t_max + 1);
        let mut x = RealVector::delta(g.n(), source);
        for _ in 0..time {
            s.matrix().matvec_into(&x, &mut buf);
            std::mem::swap(&mut x, &mut buf);
        }
        samples.push(Sample {
            signal: x,
            label,
            meta: Some(SampleMeta { source, time }),
        });
    }
    let splits = Splits {
        train: (0..n_train).collect(),
        val: (n_train..n_train + n_val).collect(),
        test: (n_train + n_val..total).collect(),
    };
    if let Some(class) = missing_class(&samples, &splits.train, classes) {
        return Err(Error::ClassMissing { class, attempts: 1 });
    }
    Ok(Dataset {
        n: g.n(),
        classes,
        samples,
        splits,
        provenance: format!(
            "source localization: {total} diffused deltas, t in 0..={t_max}, \
             shift normalization {:?}",
            s.normalization()
        ),
    })
}

/// Shuffle, then cut into contiguous train/val/test blocks of the given fractions.
pub fn split_dataset(
    samples: Vec<Sample>,
    n: usize,
    classes: usize,
    fractions: [f64; 3],
    rng: &mut Rng,
    provenance: impl Into<String>,
) -> Result<Dataset> {
    if fractions.iter().any(|f| *f < 0.0) || (fractions.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
        return Err(Error::invalid(format!(
            "split fractions {fractions:?} must be non-negative and sum to 1"
        )));
    }
    let len = samples.len();
    let n_train = ((fractions[0] * len as f64).round() as usize).min(len);
    let n_val = ((fractions[1] * len as f64).round() as usize).min(len - n_train);
    let mut idx: Vec<usize> = (0..len).collect();
    let mut last_missing = 0;
    for _ in 0..SPLIT_MAX_ATTEMPTS {
        rng.shuffle(&mut idx);
        let train = &idx[..n_train];
        match missing_class(&samples, train, classes) {
            None => {
                let splits = Splits {
                    train: train.to_vec(),
                    val: idx[n_train..n_train + n_val].to_vec(),
                    test: idx[n_train + n_val..].to_vec(),
                };
                let ds = Dataset {
                    n,
                    classes,
                    samples,
                    splits,
                    provenance: provenance.into(),
                };
                ds.validate()?;
                return Ok(ds);
            }
            Some(c) => last_missing = c,
        }
    }
    Err(Error::ClassMissing {
        class: last_missing,
        attempts: SPLIT_MAX_ATTEMPTS,
    })
}
