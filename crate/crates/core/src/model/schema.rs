//! JSON document format for models, with a loader that aggregates every
//! validation failure instead of stopping at the first.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{ActionEntry, DiscreteDist, HybridMdp, ModelError, Outcome, OutcomeKind, OutcomeSet, Violation};
use crate::geometry::{KdPartition, Rect};
use crate::pwlc::{LinearFn, PwlcSet};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModelDoc {
    pub dims: usize,
    pub discrete_states: Vec<String>,
    pub actions: Vec<String>,
    pub horizon: usize,
    #[serde(default)]
    pub out_of_bounds_value: f64,
    pub entries: Vec<EntryDoc>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EntryDoc {
    pub state: String,
    pub action: String,
    pub reward: Vec<RewardLeafDoc>,
    pub discrete_transition: Vec<DiscreteLeafDoc>,
    pub continuous: BTreeMap<String, Vec<OutcomeLeafDoc>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RectDoc {
    pub low: Vec<f64>,
    pub high: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RewardLeafDoc {
    pub rect: RectDoc,
    pub linear_fns: Vec<LinearFnDoc>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LinearFnDoc {
    pub coeffs: Vec<f64>,
    pub offset: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DiscreteLeafDoc {
    pub rect: RectDoc,
    pub successors: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OutcomeLeafDoc {
    pub rect: RectDoc,
    pub outcomes: Vec<OutcomeDoc>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OutcomeDoc {
    pub kind: OutcomeKind,
    pub target: Vec<f64>,
    pub prob: f64,
}

/// Parses and validates a model document. Parse errors carry the
/// serde line/column; structural and invariant failures are aggregated
/// into one [`ModelError::Invalid`].
pub fn load_model(text: &str) -> Result<HybridMdp, ModelError> {
    let doc: ModelDoc =
        serde_json::from_str(text).map_err(|e| ModelError::Parse(e.to_string()))?;
    let mut violations = Vec::new();

    let states = doc.discrete_states.clone();
    let actions = doc.actions.clone();
    let state_index =
        |name: &str| -> Option<usize> { states.iter().position(|s| s == name) };

    let mut entries: Vec<Vec<Option<ActionEntry>>> =
        vec![vec![None; actions.len()]; states.len().max(1)];

    for (i, entry) in doc.entries.iter().enumerate() {
        let at = |field: &str| format!("entries[{i}].{field}");
        let Some(s) = state_index(&entry.state) else {
            violations.push(Violation {
                path: at("state"),
                message: format!("unknown discrete state '{}'", entry.state),
            });
            continue;
        };
        let Some(a) = actions.iter().position(|x| x == &entry.action) else {
            violations.push(Violation {
                path: at("action"),
                message: format!("unknown action '{}'", entry.action),
            });
            continue;
        };
        if entries[s][a].is_some() {
            violations.push(Violation {
                path: at("action"),
                message: format!(
                    "duplicate entry for state '{}' action '{}'",
                    entry.state, entry.action
                ),
            });
            continue;
        }

        let reward = build_partition(
            doc.dims,
            entry.reward.iter().map(|leaf| {
                let fns: Result<Vec<LinearFn>, String> = leaf
                    .linear_fns
                    .iter()
                    .map(|f| {
                        LinearFn::new(f.coeffs.clone(), f.offset).map_err(|e| e.to_string())
                    })
                    .collect();
                (
                    &leaf.rect,
                    fns.and_then(|fns| PwlcSet::new(fns).map_err(|e| e.to_string())),
                )
            }),
            &at("reward"),
            &mut violations,
        );

        let discrete = build_partition(
            doc.dims,
            entry.discrete_transition.iter().map(|leaf| {
                let mut probs = vec![0.0; states.len()];
                let mut err = None;
                for (name, &p) in &leaf.successors {
                    match state_index(name) {
                        Some(si) => probs[si] = p,
                        None => err = Some(format!("unknown successor state '{name}'")),
                    }
                }
                (
                    &leaf.rect,
                    match err {
                        None => Ok(DiscreteDist::new(probs)),
                        Some(e) => Err(e),
                    },
                )
            }),
            &at("discrete_transition"),
            &mut violations,
        );

        let mut continuous: Vec<Option<KdPartition<OutcomeSet>>> = vec![None; states.len()];
        for (succ_name, leaves) in &entry.continuous {
            let Some(sp) = state_index(succ_name) else {
                violations.push(Violation {
                    path: at(&format!("continuous.{succ_name}")),
                    message: format!("unknown successor state '{succ_name}'"),
                });
                continue;
            };
            continuous[sp] = build_partition(
                doc.dims,
                leaves.iter().map(|leaf| {
                    let outcomes = leaf
                        .outcomes
                        .iter()
                        .map(|o| Outcome {
                            kind: o.kind,
                            target: o.target.clone(),
                            prob: o.prob,
                        })
                        .collect();
                    (&leaf.rect, Ok(OutcomeSet { outcomes }))
                }),
                &at(&format!("continuous.{succ_name}")),
                &mut violations,
            );
        }

        if let (Some(reward), Some(discrete)) = (reward, discrete) {
            entries[s][a] = Some(ActionEntry {
                reward,
                discrete,
                continuous,
            });
        }
    }

    let model = HybridMdp::new(
        doc.dims,
        states,
        actions,
        doc.horizon,
        doc.out_of_bounds_value,
        entries,
    );
    violations.extend(model.validate());
    if violations.is_empty() {
        Ok(model)
    } else {
        Err(ModelError::Invalid(violations))
    }
}

/// Serializes a model back to its document form. Loading the result
/// yields a semantically identical model.
pub fn save_model(model: &HybridMdp) -> String {
    let mut entries = Vec::new();
    for s in 0..model.num_states() {
        for (a, entry) in model.applicable(s) {
            let reward = entry
                .reward
                .leaves()
                .map(|leaf| RewardLeafDoc {
                    rect: rect_doc(leaf.rect),
                    linear_fns: leaf
                        .payload
                        .fns()
                        .iter()
                        .map(|f| LinearFnDoc {
                            coeffs: f.coeffs().to_vec(),
                            offset: f.offset(),
                        })
                        .collect(),
                })
                .collect();
            let discrete_transition = entry
                .discrete
                .leaves()
                .map(|leaf| DiscreteLeafDoc {
                    rect: rect_doc(leaf.rect),
                    successors: leaf
                        .payload
                        .successors()
                        .map(|(si, p)| (model.states()[si].clone(), p))
                        .collect(),
                })
                .collect();
            let mut continuous = BTreeMap::new();
            for (sp, cont) in entry.continuous.iter().enumerate() {
                if let Some(partition) = cont {
                    continuous.insert(
                        model.states()[sp].clone(),
                        partition
                            .leaves()
                            .map(|leaf| OutcomeLeafDoc {
                                rect: rect_doc(leaf.rect),
                                outcomes: leaf
                                    .payload
                                    .outcomes
                                    .iter()
                                    .map(|o| OutcomeDoc {
                                        kind: o.kind,
                                        target: o.target.clone(),
                                        prob: o.prob,
                                    })
                                    .collect(),
                            })
                            .collect(),
                    );
                }
            }
            entries.push(EntryDoc {
                state: model.states()[s].clone(),
                action: model.actions()[a].clone(),
                reward,
                discrete_transition,
                continuous,
            });
        }
    }
    let doc = ModelDoc {
        dims: model.dims(),
        discrete_states: model.states().to_vec(),
        actions: model.actions().to_vec(),
        horizon: model.horizon(),
        out_of_bounds_value: model.out_of_bounds_value(),
        entries,
    };
    serde_json::to_string_pretty(&doc).expect("model documents always serialize")
}

fn rect_doc(rect: &Rect) -> RectDoc {
    RectDoc {
        low: rect.low().to_vec(),
        high: rect.high().to_vec(),
    }
}

/// Builds one partition from document leaves, pushing a violation per
/// bad rect or payload and for cover/overlap defects. Returns `None`
/// when anything failed.
fn build_partition<'a, P: Clone>(
    dims: usize,
    leaves: impl Iterator<Item = (&'a RectDoc, Result<P, String>)>,
    path: &str,
    violations: &mut Vec<Violation>,
) -> Option<KdPartition<P>> {
    let mut pieces = Vec::new();
    let mut failed = false;
    for (i, (rect, payload)) in leaves.enumerate() {
        let rect = match Rect::new(rect.low.clone(), rect.high.clone()) {
            Ok(r) => r,
            Err(e) => {
                violations.push(Violation {
                    path: format!("{path}[{i}].rect"),
                    message: e.to_string(),
                });
                failed = true;
                continue;
            }
        };
        match payload {
            Ok(p) => pieces.push((rect, p)),
            Err(message) => {
                violations.push(Violation {
                    path: format!("{path}[{i}]"),
                    message,
                });
                failed = true;
            }
        }
    }
    if failed {
        return None;
    }
    if pieces.is_empty() {
        violations.push(Violation {
            path: path.to_string(),
            message: "partition has no leaves".into(),
        });
        return None;
    }
    match KdPartition::from_pieces(dims, pieces) {
        Ok(p) => Some(p),
        Err(e) => {
            violations.push(Violation {
                path: path.to_string(),
                message: e.to_string(),
            });
            None
        }
    }
}
