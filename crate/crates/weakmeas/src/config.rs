//! Flat `key = value` experiment configs.
//!
//! ```text
//! # comments and blank lines are ignored
//! pre    = x+              # x+ x- y+ y- z+ z-, or a Bloch triple nx,ny,nz
//! step   = z a=0.866025    # direction, then a=… or epsilon=…, then an
//! step   = x epsilon=0.05 readout=conjugate   # optional readout
//! final  = z               # direction: x y z, signed axis, or a triple
//! order  = pointer-first   # or postselect-first (default pointer-first)
//! trials = 100000
//! seed   = 42
//! record_states = false    # optional
//! ```
//!
//! `pre` and a bare triple both mean "the +1 eigenket of σ·n". Unknown
//! keys are rejected by name, as are duplicates of the scalar keys; only
//! `step` may repeat.

use crate::error::{Error, Result};
use crate::protocols::{ExperimentConfig, MeasurementOrder, WeakStep};
use crate::qstate::{BlochDirection, Ket};
use crate::unsharp::{Readout, UnsharpCoupling};

fn bad(msg: impl Into<String>) -> Error {
    Error::InvalidConfig(msg.into())
}

/// A Bloch direction from `x`/`y`/`z`, a signed axis like `y-`, or a
/// comma triple `nx,ny,nz` (normalized).
pub fn parse_direction(tok: &str) -> Result<BlochDirection> {
    let tok = tok.trim();
    match tok {
        "x" | "x+" => return Ok(BlochDirection::x()),
        "y" | "y+" => return Ok(BlochDirection::y()),
        "z" | "z+" => return Ok(BlochDirection::z()),
        "x-" => return Ok(BlochDirection::x().opposite()),
        "y-" => return Ok(BlochDirection::y().opposite()),
        "z-" => return Ok(BlochDirection::z().opposite()),
        _ => {}
    }
    let parts: Vec<&str> = tok.split(',').collect();
    if parts.len() != 3 {
        return Err(bad(format!(
            "direction `{tok}` is not an axis name or an nx,ny,nz triple"
        )));
    }
    let mut n = [0.0f64; 3];
    for (slot, part) in n.iter_mut().zip(&parts) {
        *slot = part
            .trim()
            .parse()
            .map_err(|_| bad(format!("direction component `{part}` is not a number")))?;
    }
    BlochDirection::new(n[0], n[1], n[2])
        .map_err(|_| bad(format!("direction `{tok}` has zero length")))
}

/// A state token: signed axis names map to the corresponding σ·n
/// eigenket, a triple to the +1 eigenket of that direction.
pub fn parse_state(tok: &str) -> Result<Ket> {
    Ok(parse_direction(tok)?.plus_eigenket())
}

pub fn parse_order(tok: &str) -> Result<MeasurementOrder> {
    match tok.trim() {
        "pointer-first" => Ok(MeasurementOrder::PointerFirst),
        "postselect-first" => Ok(MeasurementOrder::PostselectFirst),
        other => Err(bad(format!(
            "order `{other}` is not pointer-first or postselect-first"
        ))),
    }
}

fn parse_step(value: &str, index: usize) -> Result<WeakStep> {
    let mut tokens = value.split_whitespace();
    let dir_tok = tokens
        .next()
        .ok_or_else(|| bad(format!("step {index} is empty")))?;
    let direction = parse_direction(dir_tok)?;
    let mut coupling: Option<UnsharpCoupling> = None;
    let mut readout = Readout::Standard;
    for tok in tokens {
        let (k, v) = tok
            .split_once('=')
            .ok_or_else(|| bad(format!("step {index}: `{tok}` is not key=value")))?;
        match k {
            "a" => {
                let a: f64 = v
                    .parse()
                    .map_err(|_| bad(format!("step {index}: a=`{v}` is not a number")))?;
                if coupling.replace(UnsharpCoupling::from_a(a)?).is_some() {
                    return Err(bad(format!("step {index}: strength given twice")));
                }
            }
            "epsilon" => {
                let e: f64 = v
                    .parse()
                    .map_err(|_| bad(format!("step {index}: epsilon=`{v}` is not a number")))?;
                if coupling
                    .replace(UnsharpCoupling::from_epsilon(e)?)
                    .is_some()
                {
                    return Err(bad(format!("step {index}: strength given twice")));
                }
            }
            "readout" => {
                readout = match v {
                    "standard" => Readout::Standard,
                    "conjugate" => Readout::Conjugate,
                    other => {
                        return Err(bad(format!(
                            "step {index}: readout `{other}` is not standard or conjugate"
                        )))
                    }
                };
            }
            other => {
                return Err(bad(format!("step {index}: unknown option `{other}`")));
            }
        }
    }
    let coupling = coupling.ok_or_else(|| bad(format!("step {index} needs a=… or epsilon=…")))?;
    Ok(WeakStep {
        direction,
        coupling,
        readout,
    })
}

/// Parse a full config file. Every problem is reported with the key (and
/// for steps, the step index) that caused it.
pub fn parse_config(text: &str) -> Result<ExperimentConfig> {
    let mut pre: Option<Ket> = None;
    let mut steps: Vec<WeakStep> = Vec::new();
    let mut final_direction: Option<BlochDirection> = None;
    let mut order: Option<MeasurementOrder> = None;
    let mut trials: Option<u64> = None;
    let mut seed: Option<u64> = None;
    let mut record_states: Option<bool> = None;

    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| bad(format!("line {}: `{line}` is not key = value", lineno + 1)))?;
        let (key, value) = (key.trim(), value.trim());
        if value.is_empty() {
            return Err(bad(format!("key `{key}` has no value")));
        }
        match key {
            "pre" => {
                if pre.replace(parse_state(value)?).is_some() {
                    return Err(bad("duplicate key `pre`"));
                }
            }
            "step" => steps.push(parse_step(value, steps.len())?),
            "final" => {
                if final_direction.replace(parse_direction(value)?).is_some() {
                    return Err(bad("duplicate key `final`"));
                }
            }
            "order" => {
                if order.replace(parse_order(value)?).is_some() {
                    return Err(bad("duplicate key `order`"));
                }
            }
            "trials" => {
                let n: u64 = value
                    .parse()
                    .map_err(|_| bad(format!("trials=`{value}` is not a count")))?;
                if trials.replace(n).is_some() {
                    return Err(bad("duplicate key `trials`"));
                }
            }
            "seed" => {
                let n: u64 = value
                    .parse()
                    .map_err(|_| bad(format!("seed=`{value}` is not a 64-bit integer")))?;
                if seed.replace(n).is_some() {
                    return Err(bad("duplicate key `seed`"));
                }
            }
            "record_states" => {
                let b = match value {
                    "true" => true,
                    "false" => false,
                    other => return Err(bad(format!("record_states=`{other}` is not a bool"))),
                };
                if record_states.replace(b).is_some() {
                    return Err(bad("duplicate key `record_states`"));
                }
            }
            other => return Err(bad(format!("unknown key `{other}`"))),
        }
    }

    let pre = pre.ok_or_else(|| bad("missing key `pre`"))?;
    if steps.is_empty() {
        return Err(bad("config needs at least one `step`"));
    }
    let final_direction = final_direction.ok_or_else(|| bad("missing key `final`"))?;
    let trials = trials.ok_or_else(|| bad("missing key `trials`"))?;
    let seed = seed.ok_or_else(|| bad("missing key `seed`"))?;
    let config = ExperimentConfig::new(
        &pre,
        steps,
        final_direction,
        order.unwrap_or(MeasurementOrder::PointerFirst),
        trials,
        seed,
    )?;
    Ok(config.with_record_states(record_states.unwrap_or(false)))
}
