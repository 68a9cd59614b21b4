use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::time::Duration;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("config line {line}: {message}")]
    Line { line: usize, message: String },
    #[error("config is missing required key {0:?}")]
    Missing(&'static str),
}

/// Service settings read from a `key=value` file.
#[derive(Debug, Clone, PartialEq)]
pub struct Config {
    pub listen: SocketAddr,
    pub sample: PathBuf,
    pub log: PathBuf,
    pub cap: usize,
    pub seed: u64,
    pub min_annotators: usize,
    pub idle_timeout: Duration,
}

impl Config {
    pub fn new(sample: impl Into<PathBuf>, log: impl Into<PathBuf>) -> Config {
        Config {
            listen: SocketAddr::from(([127, 0, 0, 1], 8080)),
            sample: sample.into(),
            log: log.into(),
            cap: 250,
            seed: 0,
            min_annotators: 3,
            idle_timeout: Duration::from_secs(2 * 60 * 60),
        }
    }

    /// Parses the file format. Relative paths resolve against `base`.
    ///
    /// ```text
    /// # comments and blank lines are ignored
    /// listen = 127.0.0.1:8080
    /// sample = sample.json
    /// log = labels.jsonl
    /// cap = 250
    /// seed = 7
    /// min_annotators = 3
    /// idle_timeout_minutes = 120
    /// ```
    pub fn parse(text: &str, base: &Path) -> Result<Config, ConfigError> {
        let mut config = Config::new("", "");
        let (mut sample, mut log) = (None, None);
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let err = |message: String| ConfigError::Line { line: i + 1, message };
            let (key, value) = line
                .split_once('=')
                .map(|(k, v)| (k.trim(), v.trim()))
                .ok_or_else(|| err(format!("expected key=value, got {line:?}")))?;
            let number = |v: &str| v.parse::<u64>().map_err(|_| err(format!("{key} must be a non-negative integer")));
            match key {
                "listen" => config.listen = value.parse().map_err(|_| err(format!("bad listen address {value:?}")))?,
                "sample" => sample = Some(base.join(value)),
                "log" => log = Some(base.join(value)),
                "cap" => config.cap = number(value)? as usize,
                "seed" => config.seed = number(value)?,
                "min_annotators" => config.min_annotators = number(value)? as usize,
                "idle_timeout_minutes" => config.idle_timeout = Duration::from_secs(number(value)? * 60),
                other => return Err(err(format!("unknown key {other:?}"))),
            }
        }
        config.sample = sample.ok_or(ConfigError::Missing("sample"))?;
        config.log = log.ok_or(ConfigError::Missing("log"))?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Config, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Config::parse(&text, path.parent().unwrap_or(Path::new(".")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_keys() {
        let c = Config::parse(
            "# study\nlisten = 0.0.0.0:9000\nsample=s.json\nlog = l.jsonl\ncap=20\nseed = 4\nidle_timeout_minutes=5\n",
            Path::new("/srv"),
        )
        .unwrap();
        assert_eq!(c.listen.port(), 9000);
        assert_eq!(c.sample, PathBuf::from("/srv/s.json"));
        assert_eq!((c.cap, c.seed, c.min_annotators), (20, 4, 3));
        assert_eq!(c.idle_timeout, Duration::from_secs(300));
    }

    #[test]
    fn rejects_bad_input() {
        assert!(matches!(Config::parse("sample=a\n", Path::new(".")), Err(ConfigError::Missing("log"))));
        assert!(matches!(
            Config::parse("sample=a\nlog=b\ncolour=red\n", Path::new(".")),
            Err(ConfigError::Line { line: 3, .. })
        ));
        assert!(matches!(Config::parse("cap=-1\n", Path::new(".")), Err(ConfigError::Line { line: 1, .. })));
    }
}
