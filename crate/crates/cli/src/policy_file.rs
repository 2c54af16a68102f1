//! Versioned JSON policy files. Floats are written with shortest round-trip
//! formatting and parsed back bit-exactly.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use uorrl_core::policy::PolicyShape;
use uorrl_core::Policy;

use crate::error::{CliError, CliResult};

pub const POLICY_FORMAT: &str = "uorrl-policy";
pub const POLICY_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PolicyFile {
    pub format: String,
    pub version: u32,
    pub kind: PolicyKind,
    pub dims: PolicyDims,
    /// Tabular: one row of logits per state. Linear-Gaussian: one row of `K`
    /// per action dimension, then the bias row, then the log-std row.
    pub parameters: Vec<Vec<f64>>,
    pub env: String,
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PolicyKind {
    TabularSoftmax,
    LinearGaussian,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PolicyDims {
    pub states: usize,
    pub actions: usize,
}

impl PolicyFile {
    pub fn new(policy: &Policy, env: &str, seed: u64) -> Self {
        let theta = policy.params();
        let (kind, dims, parameters) = match policy.shape() {
            PolicyShape::TabularSoftmax { n_states, n_actions } => (
                PolicyKind::TabularSoftmax,
                PolicyDims {
                    states: n_states,
                    actions: n_actions,
                },
                theta.chunks(n_actions).map(<[f64]>::to_vec).collect(),
            ),
            PolicyShape::LinearGaussian { state_dim, action_dim } => {
                let k_len = state_dim * action_dim;
                let mut rows: Vec<Vec<f64>> = theta[..k_len].chunks(state_dim).map(<[f64]>::to_vec).collect();
                rows.push(theta[k_len..k_len + action_dim].to_vec());
                rows.push(theta[k_len + action_dim..].to_vec());
                (
                    PolicyKind::LinearGaussian,
                    PolicyDims {
                        states: state_dim,
                        actions: action_dim,
                    },
                    rows,
                )
            }
        };
        Self {
            format: POLICY_FORMAT.into(),
            version: POLICY_VERSION,
            kind,
            dims,
            parameters,
            env: env.into(),
            seed,
        }
    }

    pub fn policy(&self) -> CliResult<Policy> {
        if self.format != POLICY_FORMAT || self.version != POLICY_VERSION {
            return Err(CliError::config(format!(
                "unsupported policy file {} v{}",
                self.format, self.version
            )));
        }
        let PolicyDims { states, actions } = self.dims;
        let (shape, expected_rows, row_len): (PolicyShape, usize, &dyn Fn(usize) -> usize) = match self.kind {
            PolicyKind::TabularSoftmax => (
                PolicyShape::TabularSoftmax {
                    n_states: states,
                    n_actions: actions,
                },
                states,
                &|_| actions,
            ),
            PolicyKind::LinearGaussian => (
                PolicyShape::LinearGaussian {
                    state_dim: states,
                    action_dim: actions,
                },
                actions + 2,
                &|i| if i < actions { states } else { actions },
            ),
        };
        if self.parameters.len() != expected_rows
            || self.parameters.iter().enumerate().any(|(i, r)| r.len() != row_len(i))
        {
            return Err(CliError::config("policy parameter rows do not match the declared dims"));
        }
        let theta = self.parameters.concat();
        Ok(Policy::from_parts(shape, theta)?)
    }

    pub fn save(&self, path: &Path) -> CliResult<()> {
        let text = serde_json::to_string_pretty(self).expect("policy serializes");
        fs::write(path, text + "\n").map_err(|e| CliError::io(path, e))
    }

    pub fn load(path: &Path) -> CliResult<Self> {
        let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        serde_json::from_str(&text).map_err(|source| CliError::Json {
            path: path.to_path_buf(),
            source,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bit_exact_round_trip() {
        let tab = Policy::tabular(4, 2)
            .with_params(vec![
                0.1,
                -1.0 / 3.0,
                1e-300,
                5e300,
                -0.0,
                2.0f64.sqrt(),
                7.0,
                f64::MIN_POSITIVE,
            ])
            .unwrap();
        let gauss = Policy::linear_gaussian(2, 1)
            .with_params(vec![0.3, -0.7, 1.0 / 7.0, 0.5f64.ln()])
            .unwrap();
        for p in [tab, gauss] {
            let file = PolicyFile::new(&p, "param_chain", 9);
            let dir = tempfile::tempdir().unwrap();
            let path = dir.path().join("p.json");
            file.save(&path).unwrap();
            let back = PolicyFile::load(&path).unwrap();
            assert_eq!(back, file);
            let q = back.policy().unwrap();
            let bits = |p: &Policy| p.params().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
            assert_eq!(bits(&q), bits(&p));
        }
    }

    #[test]
    fn shape_mismatch_rejected() {
        let mut file = PolicyFile::new(&Policy::tabular(3, 2), "param_chain", 0);
        file.parameters[1].pop();
        assert!(file.policy().is_err());
    }
}
