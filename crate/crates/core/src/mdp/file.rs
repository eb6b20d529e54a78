use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Action, InitialDistribution, Mdp, MdpError, ProblemClass};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ClassTag {
    Discounted,
    Ssp,
    Game,
}

/// On-disk MDP description.
///
/// ```json
/// {"problem_class": "discounted", "alpha": 0.9, "num_states": 3, "initial": [0,0,1],
///  "states": [{"id": 0, "actions": [{"cost": 0.0, "transitions": [[0, 1.0]]}]}, ...]}
/// ```
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MdpDocument {
    pub problem_class: ClassTag,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    pub num_states: usize,
    pub initial: Vec<f64>,
    pub states: Vec<StateDocument>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateDocument {
    pub id: usize,
    /// Only meaningful for game files: 1 or 2 for decision states.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub player: Option<u8>,
    pub actions: Vec<ActionDocument>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActionDocument {
    pub cost: f64,
    pub transitions: Vec<(usize, f64)>,
}

impl MdpDocument {
    pub fn parse(text: &str) -> Result<Self, MdpError> {
        serde_json::from_str(text).map_err(|e| MdpError::Parse {
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        })
    }

    pub fn problem_class(&self) -> Result<ProblemClass, MdpError> {
        match self.problem_class {
            ClassTag::Discounted => {
                let alpha = self.alpha.ok_or_else(|| MdpError::Schema {
                    field: "alpha".into(),
                    message: "required for problem_class \"discounted\"".into(),
                })?;
                Ok(ProblemClass::Discounted { alpha })
            }
            ClassTag::Ssp => Ok(ProblemClass::StochasticShortestPath),
            ClassTag::Game => Ok(ProblemClass::NegaminGame),
        }
    }

    /// Builds the model and initial distribution, enforcing every invariant.
    pub fn to_model(&self) -> Result<(Mdp, InitialDistribution), MdpError> {
        let class = self.problem_class()?;
        if self.states.len() != self.num_states {
            return Err(MdpError::Schema {
                field: "states".into(),
                message: format!(
                    "num_states is {} but {} states are listed",
                    self.num_states,
                    self.states.len()
                ),
            });
        }
        for (k, s) in self.states.iter().enumerate() {
            if s.id != k {
                return Err(MdpError::Schema {
                    field: format!("states[{k}].id"),
                    message: format!("expected {k}, found {}; states must be listed in id order", s.id),
                });
            }
        }
        if self.initial.len() != self.num_states {
            return Err(MdpError::Schema {
                field: "initial".into(),
                message: format!(
                    "length {} does not match num_states {}",
                    self.initial.len(),
                    self.num_states
                ),
            });
        }
        let actions = self
            .states
            .iter()
            .map(|s| {
                s.actions
                    .iter()
                    .map(|a| Action::new(a.cost, a.transitions.clone()))
                    .collect()
            })
            .collect();
        let mdp = Mdp::new(self.num_states, actions, class)?;
        let p = InitialDistribution::new(self.initial.clone())?;
        Ok((mdp, p))
    }

    pub fn from_model(mdp: &Mdp, p: &InitialDistribution) -> Self {
        let (problem_class, alpha) = match mdp.problem_class() {
            ProblemClass::Discounted { alpha } => (ClassTag::Discounted, Some(alpha)),
            ProblemClass::StochasticShortestPath => (ClassTag::Ssp, None),
            ProblemClass::NegaminGame => (ClassTag::Game, None),
        };
        let states = (0..mdp.num_states())
            .map(|i| StateDocument {
                id: i,
                player: None,
                actions: mdp
                    .actions(i)
                    .iter()
                    .map(|a| ActionDocument {
                        cost: a.cost,
                        transitions: a.transitions.clone(),
                    })
                    .collect(),
            })
            .collect();
        MdpDocument {
            problem_class,
            alpha,
            num_states: mdp.num_states(),
            initial: p.probabilities().to_vec(),
            states,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("document serializes")
    }
}

pub fn parse_mdp(text: &str) -> Result<(Mdp, InitialDistribution), MdpError> {
    MdpDocument::parse(text)?.to_model()
}

pub fn load_mdp(path: impl AsRef<Path>) -> Result<(Mdp, InitialDistribution), MdpError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| MdpError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_mdp(&text)
}
