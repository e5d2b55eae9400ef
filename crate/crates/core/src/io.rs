//! JSON interchange for states, operators, strategies and attacks.
//!
//! Complex numbers always serialize as `[re, im]` pairs. Operators and
//! state vectors share one container shape,
//! `{"layout": [["label", dim], ...], "entries": [[re, im], ...]}`,
//! with row-major flattening; an entry count equal to the layout
//! dimension parses as a state vector, the squared count as an operator.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::layout::RegisterLayout;
use crate::operator::{Operator, StateVector};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MatrixJson {
    pub layout: Vec<(String, usize)>,
    pub entries: Vec<(f64, f64)>,
}

impl MatrixJson {
    pub fn layout(&self) -> Result<RegisterLayout> {
        RegisterLayout::new(self.layout.iter().cloned())
    }
}

pub fn operator_to_json(op: &Operator) -> MatrixJson {
    let dim = op.dim();
    let mut entries = Vec::with_capacity(dim * dim);
    for i in 0..dim {
        for j in 0..dim {
            let z = op.matrix()[(i, j)];
            entries.push((z.re, z.im));
        }
    }
    MatrixJson {
        layout: op.layout().regs().to_vec(),
        entries,
    }
}

pub fn state_to_json(state: &StateVector) -> MatrixJson {
    MatrixJson {
        layout: state.layout().regs().to_vec(),
        entries: state.amplitudes().iter().map(|z| (z.re, z.im)).collect(),
    }
}

pub fn operator_from_json(json: &MatrixJson) -> Result<Operator> {
    let layout = json.layout()?;
    let dim = layout.dim();
    if json.entries.len() != dim * dim {
        return Err(Error::Parse(format!(
            "expected {} entries for a {dim}-dimensional operator, got {}",
            dim * dim,
            json.entries.len()
        )));
    }
    let mat = DMatrix::from_fn(dim, dim, |i, j| {
        let (re, im) = json.entries[i * dim + j];
        Complex64::new(re, im)
    });
    Operator::new(layout, mat)
}

pub fn state_from_json(json: &MatrixJson) -> Result<StateVector> {
    let layout = json.layout()?;
    let dim = layout.dim();
    if json.entries.len() != dim {
        return Err(Error::Parse(format!(
            "expected {dim} entries for a state vector, got {}",
            json.entries.len()
        )));
    }
    let amps = DVector::from_fn(dim, |i, _| {
        let (re, im) = json.entries[i];
        Complex64::new(re, im)
    });
    StateVector::new(layout, amps)
}

/// Shared state of a strategy file: pure amplitudes or a density matrix,
/// distinguished by entry count.
pub fn shared_state_from_json(json: &MatrixJson) -> Result<SharedStateJson> {
    let dim = json.layout()?.dim();
    if json.entries.len() == dim {
        Ok(SharedStateJson::Pure(state_from_json(json)?))
    } else if json.entries.len() == dim * dim {
        Ok(SharedStateJson::Density(operator_from_json(json)?))
    } else {
        Err(Error::Parse(format!(
            "entry count {} matches neither a state ({dim}) nor an operator ({})",
            json.entries.len(),
            dim * dim
        )))
    }
}

#[derive(Debug, Clone)]
pub enum SharedStateJson {
    Pure(StateVector),
    Density(Operator),
}

/// Strategy file:
/// `{"k": 2, "target": "epr" | state, "ancilla_dims": [1, 1],
///   "shared_state": state-or-operator, "responses": {"0": [U, …], …}}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StrategyFile {
    pub k: usize,
    pub target: TargetJson,
    pub ancilla_dims: Vec<usize>,
    pub shared_state: MatrixJson,
    pub responses: std::collections::BTreeMap<String, Vec<MatrixJson>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum TargetJson {
    Named(String),
    Explicit(MatrixJson),
}

impl StrategyFile {
    pub fn to_spec(&self) -> Result<crate::game::GameSpec> {
        match &self.target {
            TargetJson::Named(name) if name == "epr" => crate::game::GameSpec::epr(self.k),
            TargetJson::Named(other) => Err(Error::Parse(format!(
                "unknown target `{other}` (expected \"epr\")"
            ))),
            TargetJson::Explicit(json) => {
                crate::game::GameSpec::with_target(self.k, state_from_json(json)?)
            }
        }
    }

    pub fn to_strategy(&self) -> Result<crate::game::Strategy> {
        let shared = match shared_state_from_json(&self.shared_state)? {
            SharedStateJson::Pure(s) => crate::game::SharedState::Pure(s),
            SharedStateJson::Density(o) => crate::game::SharedState::Density(o),
        };
        let mut responses = Vec::with_capacity(self.k);
        for x in 0..self.k {
            let list = self
                .responses
                .get(&x.to_string())
                .ok_or_else(|| Error::Parse(format!("missing responses for question {x}")))?;
            if list.len() != self.k {
                return Err(Error::Parse(format!(
                    "question {x} must list {} unitaries, got {}",
                    self.k,
                    list.len()
                )));
            }
            responses.push(
                list.iter()
                    .map(|m| operator_from_json(m).map(|op| op.into_matrix()))
                    .collect::<Result<Vec<_>>>()?,
            );
        }
        Ok(crate::game::Strategy {
            shared,
            ancilla_dims: self.ancilla_dims.clone(),
            responses,
        })
    }

    pub fn from_strategy(
        spec: &crate::game::GameSpec,
        strategy: &crate::game::Strategy,
    ) -> Result<Self> {
        let shared_state = match &strategy.shared {
            crate::game::SharedState::Pure(s) => state_to_json(s),
            crate::game::SharedState::Density(o) => operator_to_json(o),
        };
        let mut responses = std::collections::BTreeMap::new();
        for (x, list) in strategy.responses.iter().enumerate() {
            let layout =
                |i: usize| RegisterLayout::single("U", spec.party_dim() * strategy.ancilla_dims[i]);
            responses.insert(
                x.to_string(),
                list.iter()
                    .enumerate()
                    .map(|(i, u)| Ok(operator_to_json(&Operator::new(layout(i)?, u.clone())?)))
                    .collect::<Result<Vec<_>>>()?,
            );
        }
        Ok(Self {
            k: spec.k(),
            target: TargetJson::Explicit(state_to_json(spec.target())),
            ancilla_dims: strategy.ancilla_dims.clone(),
            shared_state,
            responses,
        })
    }
}

/// Attack file: the strategy format restricted to the unentangled
/// two-attacker split, tagged `{"model": "no-pe"}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AttackFile {
    pub model: String,
    pub wiring: MatrixJson,
    pub a_keep: Vec<String>,
    pub b_keep: Vec<String>,
    pub responses_a: Vec<MatrixJson>,
    pub responses_b: Vec<MatrixJson>,
}

impl AttackFile {
    pub fn to_attack(&self) -> Result<crate::qpv::CustomAttack> {
        if self.model != "no-pe" {
            return Err(Error::Parse(format!(
                "unsupported attack model `{}` (expected \"no-pe\")",
                self.model
            )));
        }
        let pair = |list: &[MatrixJson], side: &str| -> Result<[crate::operator::CMatrix; 2]> {
            if list.len() != 2 {
                return Err(Error::Parse(format!(
                    "responses_{side} must list one unitary per question bit, got {}",
                    list.len()
                )));
            }
            Ok([
                operator_from_json(&list[0])?.into_matrix(),
                operator_from_json(&list[1])?.into_matrix(),
            ])
        };
        let attack = crate::qpv::CustomAttack {
            wiring: operator_from_json(&self.wiring)?,
            a_keep: self.a_keep.clone(),
            b_keep: self.b_keep.clone(),
            responses_a: pair(&self.responses_a, "a")?,
            responses_b: pair(&self.responses_b, "b")?,
        };
        attack.validate()?;
        Ok(attack)
    }

    pub fn from_attack(attack: &crate::qpv::CustomAttack) -> Result<Self> {
        attack.validate()?;
        let layout = attack.wiring.layout();
        let block = |labels: &[String]| -> Result<RegisterLayout> {
            RegisterLayout::new(
                labels
                    .iter()
                    .map(|l| (l.clone(), layout.dim_of(l).expect("validated"))),
            )
        };
        let dump =
            |labels: &[String], pair: &[crate::operator::CMatrix; 2]| -> Result<Vec<MatrixJson>> {
                let reg = block(labels)?;
                pair.iter()
                    .map(|u| Ok(operator_to_json(&Operator::new(reg.clone(), u.clone())?)))
                    .collect()
            };
        Ok(Self {
            model: "no-pe".to_string(),
            wiring: operator_to_json(&attack.wiring),
            a_keep: attack.a_keep.clone(),
            b_keep: attack.b_keep.clone(),
            responses_a: dump(&attack.a_keep, &attack.responses_a)?,
            responses_b: dump(&attack.b_keep, &attack.responses_b)?,
        })
    }
}
