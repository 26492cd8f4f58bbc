//! Gateway configuration: a flat `key = value` file plus per-key overrides.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use crate::gateway::routes::resolve_route;
use crate::session_store::SessionMode;

pub const DEFAULT_BIND_ADDRESS: &str = "127.0.0.1:8080";
pub const DEFAULT_PORTAL_PATH: &str = "/enter.php";
pub const DEFAULT_FIRST_PAGE: &str = "/page1.php";
pub const DEFAULT_COOKIE_NAME: &str = "SESSID";

/// Recognised configuration keys, in file order.
pub const CONFIG_KEYS: [&str; 7] = [
    "bind_address",
    "portal_path",
    "first_page",
    "protected_root",
    "cookie_name",
    "credentials_path",
    "mode",
];

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read config file {path}: {source}")]
    Read {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("config line {line}: {reason}")]
    Syntax { line: usize, reason: String },
    #[error("missing required setting {0:?}")]
    Missing(&'static str),
    #[error("invalid {key}: {reason}")]
    Invalid { key: &'static str, reason: String },
}

fn invalid(key: &'static str, reason: impl Into<String>) -> ConfigError {
    ConfigError::Invalid {
        key,
        reason: reason.into(),
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GatewayConfig {
    pub bind_address: String,
    pub portal_path: String,
    pub first_page: String,
    pub protected_root: PathBuf,
    pub cookie_name: String,
    pub credentials_path: PathBuf,
    pub mode: SessionMode,
}

impl GatewayConfig {
    /// A config with defaults for everything except the two paths.
    pub fn new(protected_root: impl Into<PathBuf>, credentials_path: impl Into<PathBuf>) -> Self {
        GatewayConfig {
            bind_address: DEFAULT_BIND_ADDRESS.to_owned(),
            portal_path: DEFAULT_PORTAL_PATH.to_owned(),
            first_page: DEFAULT_FIRST_PAGE.to_owned(),
            protected_root: protected_root.into(),
            cookie_name: DEFAULT_COOKIE_NAME.to_owned(),
            credentials_path: credentials_path.into(),
            mode: SessionMode::default(),
        }
    }

    /// Checks the startup invariants: well-formed paths, a first page that
    /// exists under the protected root, and a portal path that does not
    /// shadow a protected file.
    pub fn validate(&self) -> Result<(), ConfigError> {
        for (key, path) in [
            ("portal_path", &self.portal_path),
            ("first_page", &self.first_page),
        ] {
            if !path.starts_with('/') {
                return Err(invalid(key, format!("{path:?} must start with '/'")));
            }
        }
        if self.portal_path == self.first_page {
            return Err(invalid("first_page", "must differ from portal_path"));
        }
        if self.cookie_name.is_empty()
            || !self
                .cookie_name
                .bytes()
                .all(|b| b.is_ascii_alphanumeric() || b"_-.".contains(&b))
        {
            return Err(invalid(
                "cookie_name",
                format!("{:?} is not a plain cookie token", self.cookie_name),
            ));
        }
        if !self.protected_root.is_dir() {
            return Err(invalid(
                "protected_root",
                format!("{} is not a directory", self.protected_root.display()),
            ));
        }

        let first = resolve_route(&self.first_page)
            .ok_or_else(|| invalid("first_page", "not a valid page path"))?;
        if !self.protected_root.join(first).is_file() {
            return Err(invalid(
                "first_page",
                format!(
                    "{} does not exist under {}",
                    self.first_page,
                    self.protected_root.display()
                ),
            ));
        }
        if let Some(portal) = resolve_route(&self.portal_path) {
            if self.protected_root.join(portal).exists() {
                return Err(invalid(
                    "portal_path",
                    format!(
                        "{} would shadow a file under {}",
                        self.portal_path,
                        self.protected_root.display()
                    ),
                ));
            }
        }
        Ok(())
    }
}

impl fmt::Display for GatewayConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "bind_address = {}", self.bind_address)?;
        writeln!(f, "portal_path = {}", self.portal_path)?;
        writeln!(f, "first_page = {}", self.first_page)?;
        writeln!(f, "protected_root = {}", self.protected_root.display())?;
        writeln!(f, "cookie_name = {}", self.cookie_name)?;
        writeln!(f, "credentials_path = {}", self.credentials_path.display())?;
        writeln!(f, "mode = {}", self.mode)
    }
}

/// Settings gathered from a file and/or the command line, any of which may
/// be unset.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ConfigOverrides {
    pub bind_address: Option<String>,
    pub portal_path: Option<String>,
    pub first_page: Option<String>,
    pub protected_root: Option<PathBuf>,
    pub cookie_name: Option<String>,
    pub credentials_path: Option<PathBuf>,
    pub mode: Option<SessionMode>,
}

impl ConfigOverrides {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut out = ConfigOverrides::default();
        for (index, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let syntax = |reason: String| ConfigError::Syntax {
                line: index + 1,
                reason,
            };
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| syntax("expected `key = value`".into()))?;
            let (key, value) = (key.trim(), value.trim().to_owned());
            if out.is_set(key) {
                return Err(syntax(format!("{key} is set twice")));
            }
            match key {
                "bind_address" => out.bind_address = Some(value),
                "portal_path" => out.portal_path = Some(value),
                "first_page" => out.first_page = Some(value),
                "protected_root" => out.protected_root = Some(value.into()),
                "cookie_name" => out.cookie_name = Some(value),
                "credentials_path" => out.credentials_path = Some(value.into()),
                "mode" => out.mode = Some(value.parse().map_err(syntax)?),
                other => return Err(syntax(format!("unknown key {other:?}"))),
            }
        }
        Ok(out)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = fs::read_to_string(path).map_err(|source| ConfigError::Read {
            path: path.to_owned(),
            source,
        })?;
        Self::parse(&text)
    }

    fn is_set(&self, key: &str) -> bool {
        match key {
            "bind_address" => self.bind_address.is_some(),
            "portal_path" => self.portal_path.is_some(),
            "first_page" => self.first_page.is_some(),
            "protected_root" => self.protected_root.is_some(),
            "cookie_name" => self.cookie_name.is_some(),
            "credentials_path" => self.credentials_path.is_some(),
            "mode" => self.mode.is_some(),
            _ => false,
        }
    }

    /// Values set in `over` win.
    pub fn merged_with(self, over: ConfigOverrides) -> Self {
        ConfigOverrides {
            bind_address: over.bind_address.or(self.bind_address),
            portal_path: over.portal_path.or(self.portal_path),
            first_page: over.first_page.or(self.first_page),
            protected_root: over.protected_root.or(self.protected_root),
            cookie_name: over.cookie_name.or(self.cookie_name),
            credentials_path: over.credentials_path.or(self.credentials_path),
            mode: over.mode.or(self.mode),
        }
    }

    pub fn finish(self) -> Result<GatewayConfig, ConfigError> {
        let mut config = GatewayConfig::new(
            self.protected_root
                .ok_or(ConfigError::Missing("protected_root"))?,
            self.credentials_path
                .ok_or(ConfigError::Missing("credentials_path"))?,
        );
        if let Some(v) = self.bind_address {
            config.bind_address = v;
        }
        if let Some(v) = self.portal_path {
            config.portal_path = v;
        }
        if let Some(v) = self.first_page {
            config.first_page = v;
        }
        if let Some(v) = self.cookie_name {
            config.cookie_name = v;
        }
        if let Some(v) = self.mode {
            config.mode = v;
        }
        Ok(config)
    }
}
