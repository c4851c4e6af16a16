use std::path::Path;

use grda_core::model::TrainConfig;
use serde_json::{Map, Value};

use crate::CliError;

/// Value of one `key=value` override. JSON literals are taken as such;
/// anything else is a string.
fn parse_value(raw: &str) -> Value {
    serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()))
}

pub fn apply_overrides(base: &mut Map<String, Value>, overrides: &[String]) -> Result<(), CliError> {
    for item in overrides {
        let (key, value) = item
            .split_once('=')
            .ok_or_else(|| CliError::Input(format!("--set expects key=value, got {item:?}")))?;
        let key = key.trim().replace('-', "_");
        if key.is_empty() {
            return Err(CliError::Input(format!("--set has an empty key in {item:?}")));
        }
        base.insert(key, parse_value(value.trim()));
    }
    Ok(())
}

/// File values, then `--set` overrides, then explicit flags. Unknown keys
/// are rejected by name.
pub fn train_config(
    file: Option<&Path>,
    overrides: &[String],
    flags: &[(&str, Option<Value>)],
) -> Result<TrainConfig, CliError> {
    let mut map = match file {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| CliError::Input(format!("--config {}: {e}", path.display())))?;
            match serde_json::from_str::<Value>(&text) {
                Ok(Value::Object(m)) => m,
                Ok(_) => return Err(CliError::Input(format!("--config {}: expected a JSON object", path.display()))),
                Err(e) => return Err(CliError::Input(format!("--config {}: {e}", path.display()))),
            }
        }
        None => Map::new(),
    };
    apply_overrides(&mut map, overrides)?;
    for (key, value) in flags {
        if let Some(v) = value {
            map.insert((*key).to_string(), v.clone());
        }
    }
    let defaults = serde_json::to_value(TrainConfig::default()).expect("config serializes");
    let known: Vec<&String> = defaults.as_object().expect("object").keys().collect();
    if let Some(bad) = map.keys().find(|k| !known.contains(k)) {
        return Err(CliError::Input(format!(
            "unknown config key {bad:?}; expected one of {}",
            known.iter().map(|k| k.as_str()).collect::<Vec<_>>().join(", ")
        )));
    }
    let cfg: TrainConfig =
        serde_json::from_value(Value::Object(map)).map_err(|e| CliError::Input(format!("config: {e}")))?;
    cfg.validate().map_err(|e| CliError::Input(flag_message(&e.to_string())))?;
    Ok(cfg)
}

/// Rewrites config key names in `msg` to their flag spelling.
fn flag_message(msg: &str) -> String {
    let mut out = msg.to_string();
    for key in ["lambda_d", "lr_disc", "batch_size", "eval_batch"] {
        out = out.replace(key, &format!("--{}", key.replace('_', "-")));
    }
    if out.starts_with("invalid input: lr ") {
        out = out.replacen("invalid input: lr ", "invalid input: --lr ", 1);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn layering_and_unknown_keys() {
        let cfg = train_config(None, &["epochs=3".into(), "lambda-d=0.25".into()], &[("epochs", Some(Value::from(7)))])
            .unwrap();
        assert_eq!(cfg.epochs, 7);
        assert_eq!(cfg.lambda_d, 0.25);
        let err = train_config(None, &["epoch=3".into()], &[]).unwrap_err();
        assert!(err.to_string().contains("\"epoch\""));
        let err = train_config(None, &[], &[("lr", Some(Value::from(-1.0)))]).unwrap_err();
        assert!(err.to_string().contains("--lr"), "{err}");
        assert!(train_config(None, &["policy=subgraph".into()], &[]).is_ok());
    }
}
