//! Flat `key = value` configuration: TOML files and inline `k=v,k=v` pairs.

use std::path::Path;

use toml::{Table, Value};

use crate::constants::{Component, Hypothesis, LipschitzProfile, ProfileFn};
use crate::error::{BsvieError, Result};

fn config_err<T>(msg: impl Into<String>) -> Result<T> {
    Err(BsvieError::Config(msg.into()))
}

/// Reads a flat TOML file; nested tables are rejected.
pub fn read_flat(path: &Path) -> Result<Table> {
    let text = std::fs::read_to_string(path)?;
    parse_flat(&text)
}

pub fn parse_flat(text: &str) -> Result<Table> {
    let table: Table = match text.parse() {
        Ok(t) => t,
        Err(e) => return config_err(format!("malformed config: {e}")),
    };
    if let Some((k, _)) = table.iter().find(|(_, v)| matches!(v, Value::Table(_) | Value::Array(_))) {
        return config_err(format!("config key {k:?} is not a scalar; only flat key = value entries are allowed"));
    }
    Ok(table)
}

/// Parses `k=v` pairs separated by commas; values are read as numbers, booleans or strings.
pub fn parse_pairs<'a>(items: impl IntoIterator<Item = &'a str>) -> Result<Table> {
    let mut table = Table::new();
    for item in items {
        for pair in item.split(',').map(str::trim).filter(|s| !s.is_empty()) {
            let Some((k, v)) = pair.split_once('=') else {
                return config_err(format!("expected key=value, got {pair:?}"));
            };
            let v = v.trim();
            let value = if let Ok(x) = v.parse::<i64>() {
                Value::Integer(x)
            } else if let Ok(x) = v.parse::<f64>() {
                Value::Float(x)
            } else if let Ok(b) = v.parse::<bool>() {
                Value::Boolean(b)
            } else {
                Value::String(v.to_string())
            };
            table.insert(k.trim().to_string(), value);
        }
    }
    Ok(table)
}

pub fn get_f64(t: &Table, key: &str) -> Result<Option<f64>> {
    match t.get(key) {
        None => Ok(None),
        Some(Value::Float(x)) => Ok(Some(*x)),
        Some(Value::Integer(x)) => Ok(Some(*x as f64)),
        Some(other) => config_err(format!("{key} must be a number, got {other}")),
    }
}

pub fn get_usize(t: &Table, key: &str) -> Result<Option<usize>> {
    match t.get(key) {
        None => Ok(None),
        Some(Value::Integer(x)) if *x >= 0 => Ok(Some(*x as usize)),
        Some(other) => config_err(format!("{key} must be a nonnegative integer, got {other}")),
    }
}

pub fn get_str(t: &Table, key: &str) -> Result<Option<String>> {
    match t.get(key) {
        None => Ok(None),
        Some(Value::String(s)) => Ok(Some(s.clone())),
        Some(Value::Integer(x)) => Ok(Some(x.to_string())),
        Some(Value::Float(x)) => Ok(Some(x.to_string())),
        Some(other) => config_err(format!("{key} must be a string, got {other}")),
    }
}

pub fn get_bool(t: &Table, key: &str) -> Result<Option<bool>> {
    match t.get(key) {
        None => Ok(None),
        Some(Value::Boolean(b)) => Ok(Some(*b)),
        Some(other) => config_err(format!("{key} must be true or false, got {other}")),
    }
}

/// Rejects keys outside `allowed`.
pub fn check_keys(t: &Table, allowed: &[&str]) -> Result<()> {
    for k in t.keys() {
        if !allowed.contains(&k.as_str()) {
            return config_err(format!("unknown config key {k:?}; allowed: {}", allowed.join(", ")));
        }
    }
    Ok(())
}

pub const PROFILE_KEYS: [&str; 13] = [
    "horizon", "p", "eps", "kp", "hypothesis", "l00", "ly0", "lz0", "lzhat0", "l01", "ly1", "lz1", "lzhat1",
];

/// Constant Lipschitz profile from flat keys; absent components are zero.
pub fn profile_from_table(t: &Table) -> Result<(LipschitzProfile, Hypothesis, Table)> {
    check_keys(t, &PROFILE_KEYS)?;
    let horizon = get_f64(t, "horizon")?.unwrap_or(1.0);
    let p = get_f64(t, "p")?.unwrap_or(2.0);
    let eps = get_f64(t, "eps")?.unwrap_or(0.5);
    let hyp = match get_str(t, "hypothesis")?.as_deref() {
        None | Some("type1") | Some("1") => Hypothesis::TypeOne,
        Some("type2") | Some("2") => Hypothesis::TypeTwo,
        Some(other) => return config_err(format!("hypothesis must be type1 or type2, got {other:?}")),
    };
    let mut resolved = Table::new();
    resolved.insert("horizon".into(), Value::Float(horizon));
    resolved.insert("p".into(), Value::Float(p));
    resolved.insert("eps".into(), Value::Float(eps));
    resolved.insert(
        "hypothesis".into(),
        Value::String(if hyp == Hypothesis::TypeOne { "type1" } else { "type2" }.into()),
    );
    let mut b = LipschitzProfile::builder(horizon).p(p).eps(eps);
    if let Some(kp) = get_f64(t, "kp")? {
        b = b.kp(kp);
        resolved.insert("kp".into(), Value::Float(kp));
    } else if p == 2.0 {
        resolved.insert("kp".into(), Value::Float(1.0));
    }
    for part in 0..2 {
        for c in Component::ALL {
            let key = c.key(part);
            let v = get_f64(t, &key)?.unwrap_or(0.0);
            resolved.insert(key, Value::Float(v));
            b = b.set(part, c, ProfileFn::Const(v));
        }
    }
    Ok((b.build()?, hyp, resolved))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn inline_pairs_parse_types() {
        let t = parse_pairs(["lz0=0,ly1=1.5", "hypothesis=type2"]).unwrap();
        assert_eq!(get_f64(&t, "lz0").unwrap(), Some(0.0));
        assert_eq!(get_f64(&t, "ly1").unwrap(), Some(1.5));
        assert_eq!(get_str(&t, "hypothesis").unwrap().as_deref(), Some("type2"));
        assert!(parse_pairs(["novalue"]).is_err());
    }

    #[test]
    fn nested_tables_are_rejected() {
        assert!(parse_flat("a = 1\n[b]\nc = 2\n").is_err());
        assert!(parse_flat("a = 1\nb = \"x\"\n").is_ok());
    }

    #[test]
    fn profile_defaults_to_zero_components() {
        let (p, hyp, resolved) = profile_from_table(&parse_pairs(["lz0=0"]).unwrap()).unwrap();
        assert_eq!(hyp, Hypothesis::TypeOne);
        assert_eq!(p.horizon, 1.0);
        assert!(p.parts[1].ly.is_identically_zero());
        assert_eq!(resolved.len(), 13);
        assert!(profile_from_table(&parse_pairs(["bogus=1"]).unwrap()).is_err());
    }
}
