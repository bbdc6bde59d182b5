//! Reading JSON inputs: paths, stdin or inline documents.

use std::fs;
use std::io::Read;

use num_complex::Complex64;
use pentagram_core::geom::{from_chain, regular_pentagram};
use pentagram_core::spin::Direction;
use pentagram_core::{ChainParams, ContextStructure, Pentagram, SpinState};
use serde_json::Value;

use crate::CliError;

/// `-` reads stdin, a leading `{` or `[` is inline JSON, anything else is a
/// path.
pub fn load(source: &str) -> Result<Value, CliError> {
    let text = if source == "-" {
        let mut s = String::new();
        std::io::stdin()
            .read_to_string(&mut s)
            .map_err(|e| CliError::Input(format!("stdin: {e}")))?;
        s
    } else if source.trim_start().starts_with(['{', '[']) {
        source.to_string()
    } else {
        fs::read_to_string(source).map_err(|e| CliError::Input(format!("{source}: {e}")))?
    };
    serde_json::from_str(&text).map_err(|e| CliError::Input(format!("{source}: {e}")))
}

fn floats<const N: usize>(v: &Value, what: &str) -> Result<[f64; N], CliError> {
    let arr = v
        .as_array()
        .filter(|a| a.len() == N)
        .ok_or_else(|| CliError::Input(format!("{what}: expected an array of {N} numbers")))?;
    let mut out = [0.0; N];
    for (o, x) in out.iter_mut().zip(arr) {
        *o = x
            .as_f64()
            .ok_or_else(|| CliError::Input(format!("{what}: {x} is not a number")))?;
    }
    Ok(out)
}

fn number(v: &Value, what: &str) -> Result<f64, CliError> {
    v.as_f64().ok_or_else(|| CliError::Input(format!("{what}: expected a number")))
}

pub fn direction(v: &Value, normalize: bool, what: &str) -> Result<Direction, CliError> {
    Ok(Direction::parse(floats::<3>(v, what)?, normalize)?)
}

/// Accepts `{"re", "im"}`, `{"neutral": l}`, `{"coherent": {"m", "n"}}`,
/// `{"canonical": phi}` or `{"concurrence": c}`.
pub fn state(v: &Value, normalize: bool) -> Result<SpinState, CliError> {
    if let (Some(re), Some(im)) = (v.get("re"), v.get("im")) {
        let (re, im) = (floats::<3>(re, "state.re")?, floats::<3>(im, "state.im")?);
        let amps = std::array::from_fn(|k| Complex64::new(re[k], im[k]));
        return Ok(SpinState::parse(amps, normalize)?);
    }
    if let Some(l) = v.get("neutral") {
        return Ok(SpinState::neutral(&direction(l, normalize, "state.neutral")?));
    }
    if let Some(c) = v.get("coherent") {
        let m = direction(&c["m"], normalize, "state.coherent.m")?;
        let n = direction(&c["n"], normalize, "state.coherent.n")?;
        return Ok(SpinState::coherent(&m, &n)?);
    }
    if let Some(phi) = v.get("canonical") {
        return Ok(SpinState::canonical(number(phi, "state.canonical")?));
    }
    if let Some(c) = v.get("concurrence") {
        return Ok(SpinState::with_concurrence(number(c, "state.concurrence")?)?);
    }
    Err(CliError::Input(
        "state: expected re/im, neutral, coherent, canonical or concurrence".into(),
    ))
}

/// Accepts `{"legs": [...]}`, chain parameters `{"l1", "t"}`, `"regular"`
/// (axis z) or `{"regular": {"axis", "chi"}}`.
pub fn pentagram(v: &Value, normalize: bool) -> Result<Pentagram, CliError> {
    if v.as_str() == Some("regular") {
        return Ok(regular_pentagram(&Direction::Z, 0.0));
    }
    if let Some(r) = v.get("regular") {
        let axis = match r.get("axis") {
            Some(a) => direction(a, normalize, "pentagram.regular.axis")?,
            None => Direction::Z,
        };
        let chi = match r.get("chi") {
            Some(c) => number(c, "pentagram.regular.chi")?,
            None => 0.0,
        };
        return Ok(regular_pentagram(&axis, chi));
    }
    if let Some(legs) = v.get("legs").and_then(Value::as_array) {
        if legs.len() != 5 {
            return Err(CliError::Input(format!("pentagram: {} legs, expected 5", legs.len())));
        }
        let mut out = [Direction::Z; 5];
        for (k, (o, l)) in out.iter_mut().zip(legs).enumerate() {
            *o = direction(l, normalize, &format!("pentagram.legs[{k}]"))?;
        }
        return Ok(Pentagram::new(out)?);
    }
    if let (Some(l1), Some(t)) = (v.get("l1"), v.get("t")) {
        let params = ChainParams {
            l1: direction(l1, normalize, "pentagram.l1")?,
            t: floats::<3>(t, "pentagram.t")?,
        };
        return Ok(from_chain(&params)?);
    }
    Err(CliError::Input("pentagram: expected legs, l1/t, \"regular\" or {\"regular\": ...}".into()))
}

/// Built-in name, or a document with `n` and `contexts`.
pub fn structure(name: Option<&str>, doc: Option<&Value>) -> Result<ContextStructure, CliError> {
    if let Some(v) = doc.filter(|v| v.get("contexts").is_some()) {
        return serde_json::from_value(serde_json::json!({"n": v["n"], "contexts": v["contexts"]}))
            .map_err(|e| CliError::Input(format!("structure: {e}")));
    }
    let name = name.unwrap_or("pentagram5");
    ContextStructure::builtin(name).ok_or_else(|| {
        CliError::Input(format!(
            "unknown structure {name:?} (pentagram5, chsh, pair or cycleN)"
        ))
    })
}

/// Comma-separated numbers.
pub fn number_list(s: &str, what: &str) -> Result<Vec<f64>, CliError> {
    s.split(',')
        .map(|x| {
            x.trim()
                .parse()
                .map_err(|_| CliError::Input(format!("{what}: {x:?} is not a number")))
        })
        .collect()
}
