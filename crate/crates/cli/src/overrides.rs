//! `--override key.path=value` edits applied to a config before it is
//! deserialized.

use anyhow::{anyhow, bail, Context, Result};
use comanip_core::ScenarioConfig;
use toml::{Table, Value};

/// Splits `a.b.c=value`. The value is read as a TOML value, falling back to
/// a bare string, so `name=foo` and `gains.lambda=2.5` both work.
pub fn parse(spec: &str) -> Result<(Vec<String>, Value)> {
    let (key, raw) = spec
        .split_once('=')
        .ok_or_else(|| anyhow!("override `{spec}` is not KEY=VALUE"))?;
    let path: Vec<String> = key.trim().split('.').map(str::to_owned).collect();
    if path.iter().any(|p| p.is_empty()) {
        bail!("override `{spec}` has an empty key segment");
    }
    let raw = raw.trim();
    let value = raw.parse::<Value>().unwrap_or_else(|_| Value::String(raw.to_owned()));
    Ok((path, value))
}

pub fn set(table: &mut Table, path: &[String], value: Value) -> Result<()> {
    let (last, parents) = path.split_last().expect("parse rejects empty keys");
    let mut cur = table;
    for (depth, seg) in parents.iter().enumerate() {
        let entry = cur.entry(seg.clone()).or_insert_with(|| Value::Table(Table::new()));
        cur = entry
            .as_table_mut()
            .ok_or_else(|| anyhow!("`{}` is not a table", path[..=depth].join(".")))?;
    }
    cur.insert(last.clone(), value);
    Ok(())
}

/// Applies every override in order and re-validates the result through
/// serde, so misspelled or ill-typed keys are reported by name.
pub fn apply(cfg: ScenarioConfig, specs: &[String]) -> Result<ScenarioConfig> {
    if specs.is_empty() {
        return Ok(cfg);
    }
    let mut table = Table::try_from(&cfg).context("serializing config")?;
    for spec in specs {
        let (path, value) = parse(spec)?;
        set(&mut table, &path, value).with_context(|| format!("override `{spec}`"))?;
    }
    table.try_into().map_err(|e| anyhow!("after overrides: {e}"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use comanip_core::scenarios;

    #[test]
    fn typed_values() {
        let (p, v) = parse("gains.lambda = 2.5").unwrap();
        assert_eq!(p, ["gains", "lambda"]);
        assert_eq!(v, Value::Float(2.5));
        assert_eq!(parse("name=foo").unwrap().1, Value::String("foo".into()));
        assert_eq!(
            parse("x=[1, 2]").unwrap().1,
            Value::Array(vec![Value::Integer(1), Value::Integer(2)])
        );
        assert!(parse("novalue").is_err());
        assert!(parse("a..b=1").is_err());
    }

    #[test]
    fn nested_edit() {
        let cfg = apply(
            scenarios::se3_nominal(0),
            &["gains.lambda=2".into(), "duration=5.0".into()],
        )
        .unwrap();
        assert_eq!(cfg.gains.lambda, 2.0);
        assert_eq!(cfg.duration, 5.0);
    }

    #[test]
    fn unknown_field_is_named() {
        let err = apply(scenarios::se3_nominal(0), &["gains.lamda=2".into()]).unwrap_err();
        assert!(format!("{err:#}").contains("lamda"), "{err:#}");
        let err = apply(scenarios::se3_nominal(0), &["step.inner=2".into()]).unwrap_err();
        assert!(format!("{err:#}").contains("`step` is not a table"), "{err:#}");
    }
}
