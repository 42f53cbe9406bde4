//! Experiment configuration: a JSON file whose fields mirror the CLI flags.

use std::path::{Path, PathBuf};
use std::str::FromStr;

use lookahead_core::decode::CdslConfig;
use lookahead_core::verify::VerifyMode;
use serde::{Deserialize, Serialize};

use crate::error::{HarnessError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Greedy,
    Nucleus,
    Beam,
    Sd,
    Cdlh,
    CdlhAppx,
    Cdsl,
}

impl Method {
    pub const ALL: [Method; 7] =
        [Self::Greedy, Self::Nucleus, Self::Beam, Self::Sd, Self::Cdlh, Self::CdlhAppx, Self::Cdsl];

    pub fn name(self) -> &'static str {
        match self {
            Self::Greedy => "greedy",
            Self::Nucleus => "nucleus",
            Self::Beam => "beam",
            Self::Sd => "sd",
            Self::Cdlh => "cdlh",
            Self::CdlhAppx => "cdlh-appx",
            Self::Cdsl => "cdsl",
        }
    }

    pub fn needs_draft(self) -> bool {
        matches!(self, Self::Sd | Self::CdlhAppx | Self::Cdsl)
    }
}

impl FromStr for Method {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| HarnessError::config(format!("unknown method {s:?}")))
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Decoder hyperparameters. Each method reads only the ones it uses.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecodeParams {
    pub d: usize,
    pub k: usize,
    pub b: usize,
    pub a_t: f64,
    pub r_t: f64,
    pub l_m: usize,
    pub mode: VerifyMode,
    pub p: f64,
    pub beam_width: usize,
    pub emit_replacement_in_cdsl: bool,
    pub carry_accepted_on_low_acceptance: bool,
}

impl Default for DecodeParams {
    fn default() -> Self {
        let cdsl = CdslConfig::default();
        Self {
            d: cdsl.d,
            k: cdsl.k,
            b: cdsl.b,
            a_t: cdsl.a_t,
            r_t: cdsl.r_t,
            l_m: cdsl.l_m,
            mode: cdsl.mode,
            p: 0.9,
            beam_width: 3,
            emit_replacement_in_cdsl: false,
            carry_accepted_on_low_acceptance: false,
        }
    }
}

impl DecodeParams {
    pub fn cdsl(&self) -> CdslConfig {
        CdslConfig {
            d: self.d,
            k: self.k,
            b: self.b,
            a_t: self.a_t,
            r_t: self.r_t,
            l_m: self.l_m,
            mode: self.mode,
            emit_replacement_in_cdsl: self.emit_replacement_in_cdsl,
            carry_accepted_on_low_acceptance: self.carry_accepted_on_low_acceptance,
        }
    }

    pub fn validate(&self, method: Method) -> Result<()> {
        let bad = |m: &str| Err(HarnessError::config(m.to_owned()));
        if self.l_m == 0 {
            return bad("l_m must be at least 1");
        }
        match method {
            Method::Nucleus if !(self.p > 0.0 && self.p <= 1.0) => bad("p must lie in (0, 1]"),
            Method::Beam if self.beam_width == 0 => bad("beam width must be at least 1"),
            Method::Sd if self.d == 0 => bad("d must be at least 1"),
            Method::Cdlh | Method::CdlhAppx if self.d == 0 || self.k == 0 => bad("d and k must be at least 1"),
            Method::Cdsl => self.cdsl().validate().map_err(|e| HarnessError::config(e.to_string())),
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub method: Method,
    pub target: Option<PathBuf>,
    pub draft: Option<PathBuf>,
    pub data: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub seed: u64,
    /// Draft-to-target cost ratio.
    pub c: f64,
    /// Also run this method and report the speedup against it.
    pub baseline: Option<Method>,
    /// A blocklist example counts as satisfied when its reward reaches this.
    pub reward_threshold: f64,
    pub d: usize,
    pub k: usize,
    pub b: usize,
    pub a_t: f64,
    pub r_t: f64,
    pub l_m: usize,
    pub mode: VerifyMode,
    pub p: f64,
    pub beam_width: usize,
    pub emit_replacement_in_cdsl: bool,
    pub carry_accepted_on_low_acceptance: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        let p = DecodeParams::default();
        Self {
            method: Method::Cdsl,
            target: None,
            draft: None,
            data: None,
            out: None,
            seed: 0,
            c: 0.3,
            baseline: None,
            reward_threshold: 1.0,
            d: p.d,
            k: p.k,
            b: p.b,
            a_t: p.a_t,
            r_t: p.r_t,
            l_m: p.l_m,
            mode: p.mode,
            p: p.p,
            beam_width: p.beam_width,
            emit_replacement_in_cdsl: p.emit_replacement_in_cdsl,
            carry_accepted_on_low_acceptance: p.carry_accepted_on_low_acceptance,
        }
    }
}

impl ExperimentConfig {
    /// Reads a config file. Relative paths in it resolve against the file's
    /// directory.
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| HarnessError::read(path, e))?;
        let mut config: Self =
            serde_json::from_str(&text).map_err(|e| HarnessError::config(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        for p in [&mut config.target, &mut config.draft, &mut config.data, &mut config.out].into_iter().flatten() {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        Ok(config)
    }

    pub fn params(&self) -> DecodeParams {
        DecodeParams {
            d: self.d,
            k: self.k,
            b: self.b,
            a_t: self.a_t,
            r_t: self.r_t,
            l_m: self.l_m,
            mode: self.mode,
            p: self.p,
            beam_width: self.beam_width,
            emit_replacement_in_cdsl: self.emit_replacement_in_cdsl,
            carry_accepted_on_low_acceptance: self.carry_accepted_on_low_acceptance,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let require = |p: &Option<PathBuf>, what: &str| -> Result<()> {
            match p {
                None => Err(HarnessError::config(format!("missing {what} path"))),
                Some(p) if !p.exists() => Err(HarnessError::config(format!("{what} {} does not exist", p.display()))),
                Some(_) => Ok(()),
            }
        };
        require(&self.target, "target model")?;
        require(&self.data, "dataset")?;
        let methods = std::iter::once(self.method).chain(self.baseline);
        for m in methods {
            if m.needs_draft() {
                require(&self.draft, "draft model")?;
            }
            self.params().validate(m)?;
        }
        if !(self.c.is_finite() && self.c > 0.0) {
            return Err(HarnessError::config(format!("c must be positive, got {}", self.c)));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn methods_parse_by_name() {
        for m in Method::ALL {
            assert_eq!(m.name().parse::<Method>().unwrap(), m);
            assert_eq!(serde_json::to_string(&m).unwrap(), format!("\"{}\"", m.name()));
        }
        assert!("beam-search".parse::<Method>().is_err());
    }

    #[test]
    fn config_file_rejects_unknown_fields_and_resolves_paths() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.json");
        std::fs::write(&path, r#"{"method": "greedy", "target": "t.json", "a_t": 0.9}"#).unwrap();
        let c = ExperimentConfig::from_file(&path).unwrap();
        assert_eq!(c.method, Method::Greedy);
        assert_eq!(c.target.unwrap(), dir.path().join("t.json"));
        assert_eq!(c.a_t, 0.9);
        assert_eq!(c.d, 3);
        std::fs::write(&path, r#"{"method": "greedy", "temperature": 0.7}"#).unwrap();
        assert!(ExperimentConfig::from_file(&path).is_err());
    }

    #[test]
    fn validation_requires_files_and_params() {
        let dir = tempfile::tempdir().unwrap();
        let f = dir.path().join("x");
        std::fs::write(&f, "").unwrap();
        let mut c = ExperimentConfig {
            method: Method::Greedy,
            target: Some(f.clone()),
            data: Some(f.clone()),
            ..Default::default()
        };
        assert!(c.validate().is_ok());
        c.method = Method::Cdsl;
        assert!(c.validate().is_err());
        c.draft = Some(f);
        assert!(c.validate().is_ok());
        c.k = 0;
        assert!(c.validate().is_err());
    }
}
