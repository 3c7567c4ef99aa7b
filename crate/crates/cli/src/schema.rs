//! JSON game files: nested `x -> u -> a` arrays for transitions and rewards.

use std::fs;
use std::path::Path;

use dualpi::GameSpec;
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GameFile {
    pub n_states: usize,
    pub n_u: usize,
    pub n_a: usize,
    pub gamma: f64,
    pub gamma_h: f64,
    pub transition: Vec<Vec<Vec<usize>>>,
    pub reward: Vec<Vec<Vec<f64>>>,
    pub h: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub labels: Option<Vec<String>>,
}

fn nest<T: Copy>(flat: &[T], n_u: usize, n_a: usize) -> Vec<Vec<Vec<T>>> {
    flat.chunks(n_u * n_a)
        .map(|s| s.chunks(n_a).map(<[T]>::to_vec).collect())
        .collect()
}

fn flatten<T: Copy>(name: &str, nested: &[Vec<Vec<T>>], f: &GameFile) -> Result<Vec<T>, CliError> {
    if nested.len() != f.n_states {
        return Err(CliError::Schema(format!(
            "{name}: expected {} states, found {}",
            f.n_states,
            nested.len()
        )));
    }
    let mut out = Vec::with_capacity(f.n_states * f.n_u * f.n_a);
    for (x, rows) in nested.iter().enumerate() {
        if rows.len() != f.n_u {
            return Err(CliError::Schema(format!(
                "{name}[{x}]: expected {} protagonist actions, found {}",
                f.n_u,
                rows.len()
            )));
        }
        for (u, row) in rows.iter().enumerate() {
            if row.len() != f.n_a {
                return Err(CliError::Schema(format!(
                    "{name}[{x}][{u}]: expected {} adversary actions, found {}",
                    f.n_a,
                    row.len()
                )));
            }
            out.extend_from_slice(row);
        }
    }
    Ok(out)
}

impl GameFile {
    pub fn from_spec(spec: &GameSpec) -> Self {
        GameFile {
            n_states: spec.n_states,
            n_u: spec.n_u,
            n_a: spec.n_a,
            gamma: spec.gamma,
            gamma_h: spec.gamma_h,
            transition: nest(&spec.transition, spec.n_u, spec.n_a),
            reward: nest(&spec.reward, spec.n_u, spec.n_a),
            h: spec.constraint.clone(),
            labels: None,
        }
    }

    pub fn to_spec(&self) -> Result<GameSpec, CliError> {
        if let Some(labels) = &self.labels {
            if labels.len() != self.n_states {
                return Err(CliError::Schema(format!(
                    "labels: expected {} entries, found {}",
                    self.n_states,
                    labels.len()
                )));
            }
        }
        let transition = flatten("transition", &self.transition, self)?;
        let reward = flatten("reward", &self.reward, self)?;
        GameSpec {
            n_states: self.n_states,
            n_u: self.n_u,
            n_a: self.n_a,
            transition,
            reward,
            constraint: self.h.clone(),
            gamma: self.gamma,
            gamma_h: self.gamma_h,
        }
        .checked()
        .map_err(|e| CliError::Schema(e.to_string()))
    }
}

pub fn parse_game(text: &str) -> Result<GameSpec, CliError> {
    let file: GameFile = serde_json::from_str(text).map_err(|e| CliError::Schema(e.to_string()))?;
    file.to_spec()
}

pub fn load_game(path: &Path) -> Result<GameSpec, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    parse_game(&text).map_err(|e| match e {
        CliError::Schema(msg) => CliError::Schema(format!("{}: {msg}", path.display())),
        other => other,
    })
}

pub fn game_to_json(spec: &GameSpec) -> String {
    let mut s = serde_json::to_string_pretty(&GameFile::from_spec(spec)).expect("game serializes");
    s.push('\n');
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use dualpi::envs::{random_game, reference, RandomGameParams};

    #[test]
    fn round_trip_is_identity() {
        for spec in [
            reference::self_loop(),
            reference::absorbing_trap(),
            reference::matching(),
            random_game(&RandomGameParams { seed: 7, ..Default::default() }),
        ] {
            assert_eq!(parse_game(&game_to_json(&spec)).unwrap(), spec);
        }
    }

    #[test]
    fn nested_layout() {
        let file = GameFile::from_spec(&reference::matching());
        assert_eq!(file.transition, vec![vec![vec![0, 1], vec![1, 0]], vec![vec![1, 1], vec![1, 1]]]);
    }

    #[test]
    fn unknown_fields_are_rejected() {
        let mut v: serde_json::Value = serde_json::from_str(&game_to_json(&reference::self_loop())).unwrap();
        v["extra"] = 1.into();
        assert!(matches!(parse_game(&v.to_string()), Err(CliError::Schema(_))));
    }

    #[test]
    fn shape_and_range_errors() {
        let mut file = GameFile::from_spec(&reference::absorbing_trap());
        file.transition[0].pop();
        assert!(file.to_spec().is_err());
        let mut file = GameFile::from_spec(&reference::absorbing_trap());
        file.transition[0][0][0] = 9;
        let err = file.to_spec().unwrap_err().to_string();
        assert!(err.contains("out of range"), "{err}");
        let mut file = GameFile::from_spec(&reference::absorbing_trap());
        file.labels = Some(vec!["a".into()]);
        assert!(file.to_spec().is_err());
        file.labels = Some(vec!["a".into(), "b".into()]);
        assert!(file.to_spec().is_ok());
    }
}
