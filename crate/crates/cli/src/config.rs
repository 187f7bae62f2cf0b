//! TOML experiment configuration with `CALDERON_<SECTION>__<KEY>` overrides.

use std::path::{Path, PathBuf};

use toml::{Table, Value};

use crate::CliError;

pub const ENV_PREFIX: &str = "CALDERON_";

#[derive(Clone, Debug)]
pub struct Config {
    root: Table,
    /// Directory relative paths in the config are resolved against.
    base: PathBuf,
}

fn parse_env_value(raw: &str) -> Value {
    match format!("v = {raw}").parse::<Table>() {
        Ok(mut t) => t.remove("v").unwrap_or_else(|| Value::String(raw.to_string())),
        Err(_) => Value::String(raw.to_string()),
    }
}

impl Config {
    pub fn from_str(text: &str, base: PathBuf) -> Result<Self, CliError> {
        let root: Table = text
            .parse()
            .map_err(|e: toml::de::Error| CliError::Validation(format!("config does not parse: {}", e.message())))?;
        Ok(Self { root, base })
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Validation(format!("cannot read config {}: {e}", path.display())))?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Self::from_str(&text, base)
    }

    /// Applies `CALDERON_SEED=…` and `CALDERON_<SECTION>__<KEY>=…`. Values
    /// are read as TOML literals, falling back to plain strings.
    pub fn apply_env<I: IntoIterator<Item = (String, String)>>(&mut self, vars: I) -> Result<(), CliError> {
        let mut pairs: Vec<(String, String)> = vars.into_iter().filter(|(k, _)| k.starts_with(ENV_PREFIX)).collect();
        pairs.sort();
        for (name, raw) in pairs {
            let rest = name[ENV_PREFIX.len()..].to_ascii_lowercase();
            let value = parse_env_value(&raw);
            match rest.split_once("__") {
                Some((section, key)) if !section.is_empty() && !key.is_empty() => {
                    let entry = self
                        .root
                        .entry(section.to_string())
                        .or_insert_with(|| Value::Table(Table::new()));
                    let Value::Table(t) = entry else {
                        return Err(CliError::Validation(format!("{name} overrides `{section}`, which is not a section")));
                    };
                    t.insert(key.to_string(), value);
                }
                None if !rest.is_empty() => {
                    self.root.insert(rest, value);
                }
                _ => return Err(CliError::Validation(format!("malformed override {name}"))),
            }
        }
        Ok(())
    }

    pub fn section(&self, name: &str) -> Result<Section<'_>, CliError> {
        self.optional_section(name)?
            .ok_or_else(|| CliError::Validation(format!("missing section [{name}]")))
    }

    pub fn optional_section(&self, name: &str) -> Result<Option<Section<'_>>, CliError> {
        match self.root.get(name) {
            None => Ok(None),
            Some(Value::Table(t)) => Ok(Some(Section { name: name.to_string(), table: t, base: &self.base })),
            Some(_) => Err(CliError::Validation(format!("`{name}` must be a section"))),
        }
    }

    pub fn seed(&self) -> Result<u64, CliError> {
        let top = Section { name: String::new(), table: &self.root, base: &self.base };
        top.u64("seed")
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::to_value(&self.root).expect("TOML tables serialize")
    }
}

/// One `[section]` of the config with typed, key-naming accessors.
pub struct Section<'a> {
    name: String,
    table: &'a Table,
    base: &'a Path,
}

impl Section<'_> {
    pub fn key_name(&self, key: &str) -> String {
        if self.name.is_empty() {
            key.to_string()
        } else {
            format!("{}.{key}", self.name)
        }
    }

    fn missing(&self, key: &str) -> CliError {
        CliError::Validation(format!("missing key `{}`", self.key_name(key)))
    }

    fn wrong(&self, key: &str, what: &str) -> CliError {
        CliError::Validation(format!("key `{}` must be {what}", self.key_name(key)))
    }

    pub fn has(&self, key: &str) -> bool {
        self.table.contains_key(key)
    }

    pub fn f64(&self, key: &str) -> Result<f64, CliError> {
        self.f64_opt(key)?.ok_or_else(|| self.missing(key))
    }

    pub fn f64_opt(&self, key: &str) -> Result<Option<f64>, CliError> {
        match self.table.get(key) {
            None => Ok(None),
            Some(Value::Float(v)) => Ok(Some(*v)),
            Some(Value::Integer(v)) => Ok(Some(*v as f64)),
            Some(_) => Err(self.wrong(key, "a number")),
        }
    }

    pub fn f64_or(&self, key: &str, default: f64) -> Result<f64, CliError> {
        Ok(self.f64_opt(key)?.unwrap_or(default))
    }

    pub fn u64(&self, key: &str) -> Result<u64, CliError> {
        match self.table.get(key) {
            None => Err(self.missing(key)),
            Some(Value::Integer(v)) if *v >= 0 => Ok(*v as u64),
            Some(_) => Err(self.wrong(key, "a nonnegative integer")),
        }
    }

    pub fn usize(&self, key: &str) -> Result<usize, CliError> {
        self.u64(key).map(|v| v as usize)
    }

    pub fn usize_or(&self, key: &str, default: usize) -> Result<usize, CliError> {
        if self.has(key) {
            self.usize(key)
        } else {
            Ok(default)
        }
    }

    pub fn bool_or(&self, key: &str, default: bool) -> Result<bool, CliError> {
        match self.table.get(key) {
            None => Ok(default),
            Some(Value::Boolean(b)) => Ok(*b),
            Some(_) => Err(self.wrong(key, "true or false")),
        }
    }

    pub fn str_or<'b>(&'b self, key: &str, default: &'b str) -> Result<&'b str, CliError> {
        match self.table.get(key) {
            None => Ok(default),
            Some(Value::String(s)) => Ok(s),
            Some(_) => Err(self.wrong(key, "a string")),
        }
    }

    pub fn path(&self, key: &str) -> Result<PathBuf, CliError> {
        let s = self.str_or(key, "")?;
        if s.is_empty() {
            return Err(self.missing(key));
        }
        let p = PathBuf::from(s);
        Ok(if p.is_absolute() { p } else { self.base.join(p) })
    }

    pub fn f64_list(&self, key: &str) -> Result<Vec<f64>, CliError> {
        self.f64_list_opt(key)?.ok_or_else(|| self.missing(key))
    }

    pub fn f64_list_opt(&self, key: &str) -> Result<Option<Vec<f64>>, CliError> {
        match self.table.get(key) {
            None => Ok(None),
            Some(Value::Array(items)) => items
                .iter()
                .map(|v| match v {
                    Value::Float(f) => Ok(*f),
                    Value::Integer(i) => Ok(*i as f64),
                    _ => Err(self.wrong(key, "a list of numbers")),
                })
                .collect::<Result<Vec<_>, _>>()
                .map(Some),
            Some(_) => Err(self.wrong(key, "a list of numbers")),
        }
    }

    pub fn int_lists(&self, key: &str) -> Result<Vec<Vec<i64>>, CliError> {
        let Some(v) = self.table.get(key) else {
            return Err(self.missing(key));
        };
        let bad = || self.wrong(key, "a list of integer lists");
        let Value::Array(rows) = v else { return Err(bad()) };
        rows.iter()
            .map(|row| {
                let Value::Array(items) = row else { return Err(bad()) };
                items
                    .iter()
                    .map(|x| if let Value::Integer(i) = x { Ok(*i) } else { Err(bad()) })
                    .collect()
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(text: &str) -> Config {
        Config::from_str(text, PathBuf::new()).unwrap()
    }

    #[test]
    fn missing_keys_are_named() {
        let c = cfg("[lattice]\nd = 3\n");
        let err = c.section("lattice").unwrap().usize("n").unwrap_err();
        assert_eq!(err.to_string(), "missing key `lattice.n`");
        assert_eq!(c.seed().unwrap_err().to_string(), "missing key `seed`");
    }

    #[test]
    fn env_overrides_sections_and_top_level() {
        let mut c = cfg("seed = 1\n[lattice]\nd = 3\nn = 8\n");
        c.apply_env([
            ("CALDERON_LATTICE__N".to_string(), "12".to_string()),
            ("CALDERON_SEED".to_string(), "99".to_string()),
            ("CALDERON_SIGMA__KIND".to_string(), "nine_point".to_string()),
            ("OTHER".to_string(), "x".to_string()),
        ])
        .unwrap();
        assert_eq!(c.section("lattice").unwrap().usize("n").unwrap(), 12);
        assert_eq!(c.seed().unwrap(), 99);
        assert_eq!(c.section("sigma").unwrap().str_or("kind", "").unwrap(), "nine_point");
    }

    #[test]
    fn wrong_types_are_reported() {
        let c = cfg("[scan]\ncount = \"many\"\n");
        let err = c.section("scan").unwrap().usize("count").unwrap_err();
        assert!(err.to_string().contains("scan.count"));
    }
}
