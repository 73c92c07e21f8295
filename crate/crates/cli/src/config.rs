//! Run settings: command-line flags, then an optional `key=value` file, then defaults.

use std::collections::BTreeMap;
use std::fmt::{Display, Write as _};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::error::CliError;

/// Values from a `--config` file. Lines are `key=value`; blank lines and
/// lines starting with `#` are ignored.
#[derive(Debug, Default)]
pub struct ConfigFile {
    path: Option<PathBuf>,
    values: BTreeMap<String, String>,
}

impl ConfigFile {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::usage(format!("cannot read config {}: {e}", path.display())))?;
        Self::parse(&text, Some(path))
    }

    pub fn parse(text: &str, path: Option<&Path>) -> Result<Self, CliError> {
        let mut values = BTreeMap::new();
        for (no, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(CliError::usage(format!(
                    "config line {}: expected key=value",
                    no + 1
                )));
            };
            let key = key.trim().replace('-', "_");
            if values
                .insert(key.clone(), value.trim().to_owned())
                .is_some()
            {
                return Err(CliError::usage(format!(
                    "config line {}: duplicate key {key}",
                    no + 1
                )));
            }
        }
        Ok(Self {
            path: path.map(Path::to_path_buf),
            values,
        })
    }

    fn base_dir(&self) -> &Path {
        self.path
            .as_deref()
            .and_then(Path::parent)
            .unwrap_or(Path::new(""))
    }
}

/// Resolves each setting for one command and records the effective values.
pub struct Settings {
    command: &'static str,
    file: ConfigFile,
    used: Vec<(String, String)>,
}

impl Settings {
    pub fn new(command: &'static str, file: ConfigFile) -> Result<Self, CliError> {
        if let Some(c) = file.values.get("command") {
            if c != command {
                return Err(CliError::usage(format!(
                    "config is for `{c}`, not `{command}`"
                )));
            }
        }
        Ok(Self {
            command,
            file,
            used: Vec::new(),
        })
    }

    fn file_value<T: FromStr>(&self, key: &str) -> Result<Option<T>, CliError>
    where
        T::Err: Display,
    {
        self.file
            .values
            .get(key)
            .map(|raw| {
                raw.parse()
                    .map_err(|e| CliError::usage(format!("config key {key}: {e}")))
            })
            .transpose()
    }

    pub fn record(&mut self, key: &str, value: impl Display) {
        self.used.push((key.to_owned(), value.to_string()));
    }

    pub fn optional<T: FromStr + Display>(
        &mut self,
        key: &str,
        flag: Option<T>,
    ) -> Result<Option<T>, CliError>
    where
        T::Err: Display,
    {
        let value = match flag {
            Some(v) => Some(v),
            None => self.file_value(key)?,
        };
        if let Some(v) = &value {
            self.record(key, v);
        }
        Ok(value)
    }

    pub fn or<T: FromStr + Display>(
        &mut self,
        key: &str,
        flag: Option<T>,
        default: T,
    ) -> Result<T, CliError>
    where
        T::Err: Display,
    {
        let value = match flag {
            Some(v) => v,
            None => self.file_value(key)?.unwrap_or(default),
        };
        self.record(key, &value);
        Ok(value)
    }

    pub fn required<T: FromStr + Display>(
        &mut self,
        key: &str,
        flag: Option<T>,
    ) -> Result<T, CliError>
    where
        T::Err: Display,
    {
        self.optional(key, flag)?
            .ok_or_else(|| CliError::usage(format!("missing --{}", key.replace('_', "-"))))
    }

    /// Paths from the config file resolve against the file's directory.
    /// The recorded value is absolute so a run file replays from anywhere.
    pub fn path(&mut self, key: &str, flag: Option<PathBuf>) -> Result<Option<PathBuf>, CliError> {
        let value = match flag {
            Some(p) => Some(p),
            None => self
                .file
                .values
                .get(key)
                .map(|raw| self.file.base_dir().join(raw)),
        };
        if let Some(p) = &value {
            let shown = std::path::absolute(p).unwrap_or_else(|_| p.clone());
            self.record(key, shown.display());
        }
        Ok(value)
    }

    pub fn required_path(&mut self, key: &str, flag: Option<PathBuf>) -> Result<PathBuf, CliError> {
        self.path(key, flag)?
            .ok_or_else(|| CliError::usage(format!("missing --{}", key.replace('_', "-"))))
    }

    /// Rejects config keys this command never asked for.
    pub fn finish(&self) -> Result<(), CliError> {
        let unknown: Vec<&str> = self
            .file
            .values
            .keys()
            .map(String::as_str)
            .filter(|k| *k != "command" && !self.used.iter().any(|(u, _)| u == k))
            .collect();
        if unknown.is_empty() {
            Ok(())
        } else {
            Err(CliError::usage(format!(
                "config keys not used by `{}`: {}",
                self.command,
                unknown.join(", ")
            )))
        }
    }

    /// The effective settings in config-file syntax.
    pub fn render(&self) -> String {
        let mut out = format!("# patchmosaic run v1\ncommand={}\n", self.command);
        for (k, v) in &self.used {
            let _ = writeln!(out, "{k}={v}");
        }
        out
    }

    pub fn write(&self, path: &Path) -> Result<(), CliError> {
        std::fs::write(path, self.render()).map_err(|e| CliError::io(path, e))
    }
}

/// `<output>.run.conf` next to a file output.
pub fn run_file_for(output: &Path) -> PathBuf {
    let mut name = output.as_os_str().to_owned();
    name.push(".run.conf");
    PathBuf::from(name)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flag_beats_file_beats_default() {
        let file = ConfigFile::parse("# c\nk = 7\nrestarts=2\n", None).unwrap();
        let mut s = Settings::new("cluster", file).unwrap();
        assert_eq!(s.or("k", Some(9usize), 1).unwrap(), 9);
        assert_eq!(s.or("restarts", None, 3usize).unwrap(), 2);
        assert_eq!(s.or("max_iter", None, 300usize).unwrap(), 300);
        s.finish().unwrap();
        assert_eq!(
            s.render(),
            "# patchmosaic run v1\ncommand=cluster\nk=9\nrestarts=2\nmax_iter=300\n"
        );
    }

    #[test]
    fn rejects_bad_files() {
        assert!(ConfigFile::parse("no equals sign", None).is_err());
        assert!(ConfigFile::parse("k=1\nk=2", None).is_err());
        let file = ConfigFile::parse("command=extract", None).unwrap();
        assert!(Settings::new("cluster", file).is_err());
        let file = ConfigFile::parse("typo=1", None).unwrap();
        let s = Settings::new("cluster", file).unwrap();
        assert!(s.finish().is_err());
        let file = ConfigFile::parse("k=many", None).unwrap();
        let mut s = Settings::new("cluster", file).unwrap();
        assert!(s.or("k", None, 1usize).is_err());
    }

    #[test]
    fn render_parses_back() {
        let mut s = Settings::new("animate", ConfigFile::default()).unwrap();
        s.record("seed", 42u64);
        s.record("epsilon", 0.0001f64);
        let back = ConfigFile::parse(&s.render(), None).unwrap();
        assert_eq!(back.values["seed"], "42");
        assert_eq!(back.values["epsilon"].parse::<f64>().unwrap(), 0.0001);
        assert_eq!(back.values["command"], "animate");
    }

    #[test]
    fn file_paths_resolve_against_file() {
        let file =
            ConfigFile::parse("library=lib.pml", Some(Path::new("/runs/a/run.conf"))).unwrap();
        let mut s = Settings::new("cluster", file).unwrap();
        assert_eq!(
            s.path("library", None).unwrap(),
            Some(PathBuf::from("/runs/a/lib.pml"))
        );
        assert_eq!(
            run_file_for(Path::new("out/model.pmm")),
            PathBuf::from("out/model.pmm.run.conf")
        );
    }
}
