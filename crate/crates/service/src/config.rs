use std::net::SocketAddr;
use std::path::PathBuf;
use std::time::Duration;

use crate::error::ConfigError;

pub const DEFAULT_ADDR: &str = "127.0.0.1:8080";
pub const DEFAULT_TTL_SECS: u64 = 1800;
pub const DEFAULT_UPLOAD_CAP: u64 = 64 * 1024 * 1024;
pub const DEFAULT_SWEEP_SECS: u64 = 60;

/// Runtime settings of the HTTP service.
#[derive(Debug, Clone)]
pub struct Config {
    pub addr: SocketAddr,
    /// Root for stored uploads and generated archives.
    pub data_dir: PathBuf,
    /// Lifetime of sessions, uploads and undelivered downloads.
    pub ttl: Duration,
    /// Largest accepted upload in bytes.
    pub upload_cap: u64,
    pub sweep_interval: Duration,
    /// Template base read on every bundle request instead of the bundled one.
    pub template_dir: Option<PathBuf>,
}

impl Config {
    pub fn new(data_dir: impl Into<PathBuf>) -> Self {
        Self {
            addr: DEFAULT_ADDR.parse().expect("valid default address"),
            data_dir: data_dir.into(),
            ttl: Duration::from_secs(DEFAULT_TTL_SECS),
            upload_cap: DEFAULT_UPLOAD_CAP,
            sweep_interval: Duration::from_secs(DEFAULT_SWEEP_SECS),
            template_dir: None,
        }
    }

    /// Reads `LH_ADDR`, `LH_DATA_DIR`, `LH_TTL_SECS`, `LH_UPLOAD_CAP`,
    /// `LH_SWEEP_SECS` and `LH_TEMPLATE_DIR`, falling back to defaults.
    pub fn from_env() -> Result<Self, ConfigError> {
        Self::from_lookup(|k| std::env::var(k).ok())
    }

    pub fn from_lookup(get: impl Fn(&str) -> Option<String>) -> Result<Self, ConfigError> {
        let data_dir = get("LH_DATA_DIR").map(PathBuf::from).unwrap_or_else(|| std::env::temp_dir().join("lighthouse"));
        let mut c = Self::new(data_dir);
        if let Some(v) = get("LH_ADDR") {
            c.addr = v.parse().map_err(|_| ConfigError::Invalid { name: "LH_ADDR", value: v })?;
        }
        let secs = |name: &'static str, default: u64| -> Result<u64, ConfigError> {
            match get(name) {
                Some(v) => v.trim().parse().map_err(|_| ConfigError::Invalid { name, value: v }),
                None => Ok(default),
            }
        };
        c.ttl = Duration::from_secs(secs("LH_TTL_SECS", DEFAULT_TTL_SECS)?);
        c.upload_cap = secs("LH_UPLOAD_CAP", DEFAULT_UPLOAD_CAP)?;
        c.sweep_interval = Duration::from_secs(secs("LH_SWEEP_SECS", DEFAULT_SWEEP_SECS)?.max(1));
        c.template_dir = get("LH_TEMPLATE_DIR").map(PathBuf::from);
        Ok(c)
    }
}
