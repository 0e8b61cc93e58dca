//! Binary parameter checkpoints.
//!
//! Layout, all integers little-endian: the magic `PDQN`, a `u32` format
//! version, a `u64` FNV-1a digest of the action space's canonical text, a
//! `u32` tensor count, then each tensor as name length `u32` + UTF-8
//! bytes, rank `u32`, one `u32` per dimension, and the values as `f64`
//! bits in row-major order. The digest ties a checkpoint to its action
//! space, so loading parameters against the wrong environment fails
//! before any tensor is interpreted.

use super::HarnessError;
use crate::agent::{
    seeds, AnyAgent, DdpgAgent, DdpgConfig, DqnAgent, DqnConfig, PdqnAgent, PdqnConfig,
};
use crate::env::{make_env, Integrator};
use crate::math::{MlpParams, MlpSpec, Schedule};
use crate::space::ActionSpaceSpec;
use std::collections::HashMap;
use std::io::Write;
use std::path::Path;

pub const MAGIC: [u8; 4] = *b"PDQN";
pub const FORMAT_VERSION: u32 = 1;

/// 64-bit FNV-1a.
pub fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut hash: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        hash ^= b as u64;
        hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
    }
    hash
}

pub fn space_digest(space: &ActionSpaceSpec) -> u64 {
    fnv1a64(space.canonical_text().as_bytes())
}

#[derive(Clone, Debug, PartialEq)]
pub struct NamedTensor {
    pub name: String,
    pub dims: Vec<u32>,
    pub values: Vec<f64>,
}

impl NamedTensor {
    pub fn scalar(name: &str, value: f64) -> Self {
        Self {
            name: name.to_string(),
            dims: Vec::new(),
            values: vec![value],
        }
    }

    pub fn as_scalar(&self) -> Option<f64> {
        (self.values.len() == 1).then(|| self.values[0])
    }

    fn len_from_dims(dims: &[u32]) -> usize {
        dims.iter().map(|&d| d as usize).product()
    }
}

pub fn write_checkpoint(
    path: &Path,
    space: &ActionSpaceSpec,
    tensors: &[NamedTensor],
) -> Result<(), HarnessError> {
    let mut buf = Vec::new();
    buf.extend_from_slice(&MAGIC);
    buf.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    buf.extend_from_slice(&space_digest(space).to_le_bytes());
    buf.extend_from_slice(&(tensors.len() as u32).to_le_bytes());
    for tensor in tensors {
        if tensor.values.len() != NamedTensor::len_from_dims(&tensor.dims) {
            return Err(HarnessError::Checkpoint(format!(
                "tensor {} has {} values but dims {:?}",
                tensor.name,
                tensor.values.len(),
                tensor.dims
            )));
        }
        buf.extend_from_slice(&(tensor.name.len() as u32).to_le_bytes());
        buf.extend_from_slice(tensor.name.as_bytes());
        buf.extend_from_slice(&(tensor.dims.len() as u32).to_le_bytes());
        for &d in &tensor.dims {
            buf.extend_from_slice(&d.to_le_bytes());
        }
        for &v in &tensor.values {
            buf.extend_from_slice(&v.to_le_bytes());
        }
    }
    // Write through a temp file so a crash never leaves a half-written
    // checkpoint under the real name.
    let tmp = path.with_extension("tmp");
    let mut file = std::fs::File::create(&tmp)?;
    file.write_all(&buf)?;
    file.sync_all()?;
    std::fs::rename(&tmp, path)?;
    Ok(())
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], HarnessError> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.buf.len());
        match end {
            Some(end) => {
                let slice = &self.buf[self.pos..end];
                self.pos = end;
                Ok(slice)
            }
            None => Err(HarnessError::Checkpoint(format!(
                "truncated: wanted {n} bytes at offset {}, file has {}",
                self.pos,
                self.buf.len()
            ))),
        }
    }

    fn u32(&mut self) -> Result<u32, HarnessError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64, HarnessError> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
}

/// Parses a whole checkpoint; nothing is returned unless every tensor is
/// intact. With `expected_space` set, a digest mismatch is an error.
pub fn read_checkpoint(
    path: &Path,
    expected_space: Option<&ActionSpaceSpec>,
) -> Result<Vec<NamedTensor>, HarnessError> {
    let bytes = std::fs::read(path)?;
    let mut r = Reader {
        buf: &bytes,
        pos: 0,
    };
    if r.take(4)? != MAGIC {
        return Err(HarnessError::Checkpoint("bad magic".into()));
    }
    let version = r.u32()?;
    if version != FORMAT_VERSION {
        return Err(HarnessError::Checkpoint(format!(
            "unsupported format version {version}"
        )));
    }
    let digest = r.u64()?;
    if let Some(space) = expected_space {
        if digest != space_digest(space) {
            return Err(HarnessError::Checkpoint(
                "action space does not match the checkpoint".into(),
            ));
        }
    }
    let count = r.u32()?;
    let mut tensors = Vec::with_capacity(count.min(1024) as usize);
    for _ in 0..count {
        let name_len = r.u32()? as usize;
        if name_len > 1 << 16 {
            return Err(HarnessError::Checkpoint(format!(
                "implausible tensor name length {name_len}"
            )));
        }
        let name = std::str::from_utf8(r.take(name_len)?)
            .map_err(|_| HarnessError::Checkpoint("tensor name is not UTF-8".into()))?
            .to_string();
        let rank = r.u32()? as usize;
        if rank > 8 {
            return Err(HarnessError::Checkpoint(format!(
                "implausible tensor rank {rank} for {name}"
            )));
        }
        let mut dims = Vec::with_capacity(rank);
        for _ in 0..rank {
            dims.push(r.u32()?);
        }
        let len = NamedTensor::len_from_dims(&dims);
        let raw = r.take(len * 8)?;
        let values = raw
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        tensors.push(NamedTensor { name, dims, values });
    }
    if r.pos != bytes.len() {
        return Err(HarnessError::Checkpoint(format!(
            "{} trailing bytes after the last tensor",
            bytes.len() - r.pos
        )));
    }
    Ok(tensors)
}

const KIND_CODES: [(&str, f64); 3] = [("pdqn", 0.0), ("dqn8", 1.0), ("ddpg-relaxed", 2.0)];

fn kind_code(kind: &str) -> f64 {
    KIND_CODES
        .iter()
        .find(|(k, _)| *k == kind)
        .map(|(_, c)| *c)
        .expect("every agent kind has a code")
}

fn kind_from_code(code: f64) -> Option<&'static str> {
    KIND_CODES
        .iter()
        .find(|(_, c)| *c == code)
        .map(|(k, _)| *k)
}

fn push_mlp(prefix: &str, spec: &MlpSpec, params: &MlpParams, out: &mut Vec<NamedTensor>) {
    for l in 0..spec.num_layers() {
        let (fan_in, fan_out) = spec.layer_dims(l);
        out.push(NamedTensor {
            name: format!("{prefix}.w{l}"),
            dims: vec![fan_out as u32, fan_in as u32],
            values: params.weights(l).to_vec(),
        });
        out.push(NamedTensor {
            name: format!("{prefix}.b{l}"),
            dims: vec![fan_out as u32],
            values: params.biases(l).to_vec(),
        });
    }
}

fn mlp_from_map(
    prefix: &str,
    spec: &MlpSpec,
    map: &HashMap<&str, &NamedTensor>,
) -> Result<MlpParams, HarnessError> {
    let mut weights = Vec::with_capacity(spec.num_layers());
    let mut biases = Vec::with_capacity(spec.num_layers());
    for l in 0..spec.num_layers() {
        for (kind, store) in [("w", &mut weights), ("b", &mut biases)] {
            let name = format!("{prefix}.{kind}{l}");
            let tensor = map.get(name.as_str()).ok_or_else(|| {
                HarnessError::Checkpoint(format!("missing tensor {name}"))
            })?;
            store.push(tensor.values.clone());
        }
    }
    Ok(MlpParams::from_raw(spec, weights, biases)?)
}

/// Serializes an agent's parameters plus the metadata needed to rebuild
/// it (kind, step count, seed, and structural flags). The network shapes
/// themselves are carried by the tensor dimensions.
pub fn agent_tensors(agent: &AnyAgent) -> Vec<NamedTensor> {
    use crate::agent::Agent;
    let mut out = vec![
        NamedTensor::scalar("meta.agent", kind_code(agent.kind())),
        NamedTensor::scalar("meta.step", agent.step_count() as f64),
    ];
    match agent {
        AnyAgent::Pdqn(a) => {
            out.push(NamedTensor::scalar("meta.seed", a.config().seed as f64));
            out.push(NamedTensor::scalar(
                "meta.dueling",
                a.q().dueling() as u8 as f64,
            ));
            push_mlp("q", a.q().spec(), &a.q().params, &mut out);
            push_mlp("actor", a.actor().spec(), &a.actor().params, &mut out);
            if let Some(target) = a.target_q() {
                push_mlp("target_q", target.spec(), &target.params, &mut out);
            }
        }
        AnyAgent::Dqn8(a) => {
            out.push(NamedTensor::scalar("meta.seed", a.config().seed as f64));
            out.push(NamedTensor::scalar(
                "meta.dueling",
                a.q().dueling() as u8 as f64,
            ));
            out.push(NamedTensor::scalar(
                "meta.directions",
                a.config().directions as f64,
            ));
            push_mlp("q", a.q().spec(), &a.q().params, &mut out);
        }
        AnyAgent::DdpgRelaxed(a) => {
            out.push(NamedTensor::scalar("meta.seed", a.config().seed as f64));
            push_mlp("critic", a.critic().spec(), &a.critic().params, &mut out);
            push_mlp("actor", a.actor().spec(), &a.actor().params, &mut out);
        }
    }
    out
}

fn tensor_map(tensors: &[NamedTensor]) -> HashMap<&str, &NamedTensor> {
    tensors.iter().map(|t| (t.name.as_str(), t)).collect()
}

fn meta_scalar(map: &HashMap<&str, &NamedTensor>, name: &str) -> Result<f64, HarnessError> {
    map.get(name)
        .and_then(|t| t.as_scalar())
        .ok_or_else(|| HarnessError::Checkpoint(format!("missing scalar tensor {name}")))
}

/// Loads saved parameters into an already-configured agent and returns
/// the restored step count.
pub fn restore_agent(agent: &mut AnyAgent, tensors: &[NamedTensor]) -> Result<u64, HarnessError> {
    let map = tensor_map(tensors);
    let saved_kind = meta_scalar(&map, "meta.agent")?;
    if kind_from_code(saved_kind) != Some(agent.kind()) {
        return Err(HarnessError::Checkpoint(format!(
            "checkpoint was written by a {} agent, not {}",
            kind_from_code(saved_kind).unwrap_or("unknown"),
            agent.kind()
        )));
    }
    let step = meta_scalar(&map, "meta.step")? as u64;
    match agent {
        AnyAgent::Pdqn(a) => {
            let q_spec = a.q().spec().clone();
            let actor_spec = a.actor().spec().clone();
            a.q_mut().params = mlp_from_map("q", &q_spec, &map)?;
            a.actor_mut().params = mlp_from_map("actor", &actor_spec, &map)?;
            if a.target_q().is_some() {
                // A missing target tensor set resyncs from the Q network.
                let params = if map.contains_key("target_q.w0") {
                    mlp_from_map("target_q", &q_spec, &map)?
                } else {
                    a.q().params.clone()
                };
                if let Some(target) = a.target_q_mut() {
                    target.params = params;
                }
            }
            a.set_steps(step);
        }
        AnyAgent::Dqn8(a) => {
            let q_spec = a.q().spec().clone();
            a.q_mut().params = mlp_from_map("q", &q_spec, &map)?;
            a.set_steps(step);
        }
        AnyAgent::DdpgRelaxed(a) => {
            let critic_spec = a.critic().spec().clone();
            let actor_spec = a.actor().spec().clone();
            a.critic_mut().params = mlp_from_map("critic", &critic_spec, &map)?;
            a.actor_mut().params = mlp_from_map("actor", &actor_spec, &map)?;
            a.set_steps(step);
        }
    }
    Ok(step)
}

/// Hidden layer widths implied by a saved MLP: the output width of every
/// layer but the last.
fn hidden_from_tensors(
    prefix: &str,
    map: &HashMap<&str, &NamedTensor>,
) -> Result<Vec<usize>, HarnessError> {
    let mut widths = Vec::new();
    let mut l = 0;
    while let Some(t) = map.get(format!("{prefix}.w{l}").as_str()) {
        if t.dims.len() != 2 {
            return Err(HarnessError::Checkpoint(format!(
                "{}.w{l} is not a matrix",
                prefix
            )));
        }
        widths.push(t.dims[0] as usize);
        l += 1;
    }
    if widths.is_empty() {
        return Err(HarnessError::Checkpoint(format!(
            "checkpoint has no {prefix}.w0 tensor"
        )));
    }
    widths.pop();
    Ok(widths)
}

/// Rebuilds an inference-ready agent from a checkpoint alone, given the
/// environment it was trained on. Training hyperparameters are not stored,
/// so learning schedules come up as zero; use `restore_agent` with a full
/// run configuration to continue training.
pub fn rebuild_agent(
    env_name: &str,
    integrator: Integrator,
    tensors: &[NamedTensor],
) -> Result<AnyAgent, HarnessError> {
    let map = tensor_map(tensors);
    let kind = kind_from_code(meta_scalar(&map, "meta.agent")?)
        .ok_or_else(|| HarnessError::Checkpoint("unknown agent kind code".into()))?;
    let seed = meta_scalar(&map, "meta.seed")? as u64;
    let env = make_env(env_name, seeds::derive(seed, seeds::ENV), integrator)?;
    let space = env.space().clone();
    let obs_dim = env.obs_dim();
    let zero = Schedule::constant(0.0)?;
    let mut agent = match kind {
        "pdqn" => {
            let cfg = PdqnConfig {
                gamma: 0.0,
                alpha: zero.clone(),
                beta: zero.clone(),
                epsilon: zero.clone(),
                batch_size: 1,
                replay_capacity: 1,
                warmup: 1,
                penalty_weight: 0.0,
                dueling: meta_scalar(&map, "meta.dueling")? != 0.0,
                q_hidden: hidden_from_tensors("q", &map)?,
                actor_hidden: hidden_from_tensors("actor", &map)?,
                target_sync: None,
                simultaneous_updates: false,
                seed,
            };
            AnyAgent::Pdqn(PdqnAgent::new(obs_dim, space, cfg)?)
        }
        "dqn8" => {
            let cfg = DqnConfig {
                gamma: 0.0,
                alpha: zero.clone(),
                epsilon: zero,
                batch_size: 1,
                replay_capacity: 1,
                warmup: 1,
                dueling: meta_scalar(&map, "meta.dueling")? != 0.0,
                q_hidden: hidden_from_tensors("q", &map)?,
                directions: meta_scalar(&map, "meta.directions")? as usize,
                seed,
            };
            AnyAgent::Dqn8(DqnAgent::new(obs_dim, space, cfg)?)
        }
        "ddpg-relaxed" => {
            let cfg = DdpgConfig {
                gamma: 0.0,
                alpha: zero.clone(),
                beta: zero.clone(),
                epsilon: zero,
                batch_size: 1,
                replay_capacity: 1,
                warmup: 1,
                penalty_weight: 0.0,
                q_hidden: hidden_from_tensors("critic", &map)?,
                actor_hidden: hidden_from_tensors("actor", &map)?,
                seed,
            };
            AnyAgent::DdpgRelaxed(DdpgAgent::new(obs_dim, space, cfg)?)
        }
        _ => unreachable!("kind_from_code covers all codes"),
    };
    restore_agent(&mut agent, tensors)?;
    Ok(agent)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::agent::Agent;
    use crate::env::Environment;
    use crate::harness::RunConfig;

    fn goal_space() -> ActionSpaceSpec {
        crate::env::GoalEnv::new(0, Integrator::Exact).space().clone()
    }

    #[test]
    fn fnv_matches_reference_vectors() {
        assert_eq!(fnv1a64(b""), 0xcbf2_9ce4_8422_2325);
        assert_eq!(fnv1a64(b"a"), 0xaf63_dc4c_8601_ec8c);
        assert_eq!(fnv1a64(b"foobar"), 0x85944171f73967e8);
    }

    #[test]
    fn round_trips_tensors() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("ckpt.bin");
        let tensors = vec![
            NamedTensor::scalar("meta.step", 42.0),
            NamedTensor {
                name: "q.w0".into(),
                dims: vec![2, 3],
                values: vec![1.0, -2.0, 3.5, 0.0, f64::MIN_POSITIVE, -1e300],
            },
        ];
        let space = goal_space();
        write_checkpoint(&path, &space, &tensors).unwrap();
        let back = read_checkpoint(&path, Some(&space)).unwrap();
        assert_eq!(back, tensors);
    }

    #[test]
    fn rejects_truncated_files() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("ckpt.bin");
        let space = goal_space();
        let tensors = vec![NamedTensor {
            name: "q.w0".into(),
            dims: vec![4, 4],
            values: vec![0.5; 16],
        }];
        write_checkpoint(&path, &space, &tensors).unwrap();
        let full = std::fs::read(&path).unwrap();
        for cut in [full.len() - 5, 10, 3] {
            std::fs::write(&path, &full[..cut]).unwrap();
            let err = read_checkpoint(&path, Some(&space));
            assert!(err.is_err(), "cut at {cut} must fail");
        }
    }

    #[test]
    fn rejects_wrong_space() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("ckpt.bin");
        write_checkpoint(&path, &goal_space(), &[]).unwrap();
        let bandit_space = crate::env::BanditEnv::new().space().clone();
        let err = read_checkpoint(&path, Some(&bandit_space)).unwrap_err();
        assert!(err.to_string().contains("does not match"), "{err}");
        // Reading without an expectation still works.
        read_checkpoint(&path, None).unwrap();
    }

    #[test]
    fn agent_round_trip_restores_parameters_and_step() {
        for agent_kind in ["pdqn", "dqn8", "ddpg-relaxed"] {
            let cfg = RunConfig {
                env: "goal".into(),
                agent: agent_kind.into(),
                q_hidden: vec![16, 8],
                actor_hidden: vec![16],
                seed: 7,
                ..RunConfig::default()
            };
            let mut agent = cfg.build_agent().unwrap();
            // Drive a few exploratory steps so parameters move off init.
            let mut env = cfg.build_env().unwrap();
            let (mut obs, mut mask) = env.reset();
            for _ in 0..600 {
                let action = agent.act(&obs, &mask).unwrap();
                let r = env.step(&action).unwrap();
                agent
                    .record(r.reward, &r.observation, r.terminal, &r.mask)
                    .unwrap();
                agent.learn().unwrap();
                if r.terminal {
                    let (o, m) = env.reset();
                    obs = o;
                    mask = m;
                } else {
                    obs = r.observation;
                    mask = r.mask;
                }
            }
            let tensors = agent_tensors(&agent);
            let mut restored = cfg.build_agent().unwrap();
            let step = restore_agent(&mut restored, &tensors).unwrap();
            assert_eq!(step, 600);
            assert_eq!(restored.step_count(), 600);
            let state = vec![0.3; 8];
            let mask = vec![true; agent.space().num_heads()];
            assert_eq!(
                agent.greedy(&state, &mask).unwrap(),
                restored.greedy(&state, &mask).unwrap(),
                "{agent_kind} greedy policy must survive the round trip"
            );
        }
    }

    #[test]
    fn rebuild_recovers_the_policy_without_a_config() {
        let cfg = RunConfig {
            env: "goal".into(),
            agent: "pdqn".into(),
            q_hidden: vec![12, 6],
            actor_hidden: vec![10],
            dueling: false,
            seed: 3,
            ..RunConfig::default()
        };
        let mut agent = cfg.build_agent().unwrap();
        let tensors = agent_tensors(&agent);
        let mut rebuilt = rebuild_agent("goal", Integrator::Exact, &tensors).unwrap();
        assert_eq!(rebuilt.kind(), "pdqn");
        let state = vec![-0.2; 8];
        let mask = vec![true, true];
        assert_eq!(
            agent.greedy(&state, &mask).unwrap(),
            rebuilt.greedy(&state, &mask).unwrap()
        );
    }

    #[test]
    fn restore_rejects_mismatched_kind() {
        let cfg = RunConfig {
            env: "goal".into(),
            ..RunConfig::default()
        };
        let pdqn = cfg.build_agent().unwrap();
        let tensors = agent_tensors(&pdqn);
        let mut dqn = RunConfig {
            agent: "dqn8".into(),
            ..cfg
        }
        .build_agent()
        .unwrap();
        let err = restore_agent(&mut dqn, &tensors).unwrap_err();
        assert!(err.to_string().contains("pdqn"), "{err}");
    }
}
