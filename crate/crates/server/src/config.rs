use std::net::{IpAddr, Ipv4Addr, SocketAddr};
use std::path::{Path, PathBuf};
use std::time::Duration;

use serde::Deserialize;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Read {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("invalid configuration file: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("invalid value `{value}` for {var}")]
    Env { var: &'static str, value: String },
}

/// First account, created when the store has no users yet.
#[derive(Clone, Debug, PartialEq, Eq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BootstrapAdmin {
    pub login: String,
    pub password: String,
    #[serde(default)]
    pub display_name: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Eq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub listen: IpAddr,
    pub port: u16,
    pub data_dir: PathBuf,
    pub session_ttl_secs: u64,
    pub admin: Option<BootstrapAdmin>,
}

impl Default for Config {
    fn default() -> Self {
        Self {
            listen: IpAddr::V4(Ipv4Addr::LOCALHOST),
            port: 8080,
            data_dir: PathBuf::from("relis-data"),
            session_ttl_secs: 24 * 60 * 60,
            admin: None,
        }
    }
}

impl Config {
    /// Reads `file` if given, then applies `RELIS_*` overrides from `env`.
    pub fn load(file: Option<&Path>, env: impl Fn(&str) -> Option<String>) -> Result<Self, ConfigError> {
        let mut cfg = match file {
            Some(path) => {
                let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read {
                    path: path.to_path_buf(),
                    source,
                })?;
                toml::from_str(&text)?
            }
            None => Config::default(),
        };
        fn parsed<T: std::str::FromStr>(var: &'static str, value: String) -> Result<T, ConfigError> {
            value.parse().map_err(|_| ConfigError::Env { var, value })
        }
        if let Some(v) = env("RELIS_LISTEN") {
            cfg.listen = parsed("RELIS_LISTEN", v)?;
        }
        if let Some(v) = env("RELIS_PORT") {
            cfg.port = parsed("RELIS_PORT", v)?;
        }
        if let Some(v) = env("RELIS_DATA_DIR") {
            cfg.data_dir = PathBuf::from(v);
        }
        if let Some(v) = env("RELIS_SESSION_TTL_SECS") {
            cfg.session_ttl_secs = parsed("RELIS_SESSION_TTL_SECS", v)?;
        }
        if let (Some(login), Some(password)) = (env("RELIS_ADMIN_LOGIN"), env("RELIS_ADMIN_PASSWORD")) {
            cfg.admin = Some(BootstrapAdmin {
                login,
                password,
                display_name: None,
            });
        }
        Ok(cfg)
    }

    pub fn addr(&self) -> SocketAddr {
        SocketAddr::new(self.listen, self.port)
    }

    pub fn session_ttl(&self) -> Duration {
        Duration::from_secs(self.session_ttl_secs)
    }
}
