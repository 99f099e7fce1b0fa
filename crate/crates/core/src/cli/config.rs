use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::accounting::{allocate_schedule, NoiseSchedule, PrivacyTarget};
use crate::corpus::CorpusFormat;
use crate::error::{invalid, Error, Result};
use crate::extraction::{ExtractOptions, Mode, PruningRule, DEFAULT_VALID_SET_LIMIT};

/// Everything that determines a run's output. Re-running from this echo
/// with any thread count reproduces the outputs byte for byte.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub input: Option<PathBuf>,
    pub format: CorpusFormat,
    pub output: Option<PathBuf>,
    pub epsilon: f64,
    pub delta: f64,
    /// T
    pub max_len: usize,
    /// One cap for every level, or one per level.
    pub caps: Vec<usize>,
    pub eta: f64,
    pub decay: f64,
    pub sample_p: Option<f64>,
    pub prune: PruningRule,
    pub mode: Mode,
    pub seed: u64,
    pub lowercase: bool,
    pub valid_set_limit: u64,
    pub unsafe_no_privacy: bool,
    /// σ = 0 everywhere. Needs `unsafe_no_privacy`.
    pub noiseless: bool,
    /// ρ₁ for noiseless runs.
    pub debug_rho: Option<f64>,
    /// Adds a spurious flag column to gram files. Needs `unsafe_no_privacy`.
    pub mark_spurious: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            input: None,
            format: CorpusFormat::JsonlText,
            output: None,
            epsilon: 4.0,
            delta: 1e-7,
            max_len: 9,
            caps: vec![300],
            eta: 0.01,
            decay: 1.0,
            sample_p: None,
            prune: PruningRule::BothSide,
            mode: Mode::Scalable,
            seed: 0,
            lowercase: false,
            valid_set_limit: DEFAULT_VALID_SET_LIMIT as u64,
            unsafe_no_privacy: false,
            noiseless: false,
            debug_rho: None,
            mark_spurious: false,
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| invalid(format!("{}: {e}", path.display())))
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("config serializes");
        s.push('\n');
        s
    }

    /// Checks the unsafe-flag gating and parameter ranges.
    pub fn validate(&self) -> Result<()> {
        if (self.noiseless || self.mark_spurious) && !self.unsafe_no_privacy {
            return Err(invalid(
                "--noiseless and --mark-spurious break the privacy guarantee and need --unsafe-no-privacy",
            ));
        }
        if self.debug_rho.is_some() && !self.noiseless {
            return Err(invalid("--debug-rho only applies to --noiseless runs"));
        }
        if self.max_len == 0 {
            return Err(invalid("--max-len must be at least 1"));
        }
        if !self.noiseless {
            PrivacyTarget::new(self.epsilon, self.delta)?;
        }
        Ok(())
    }

    pub fn input(&self) -> Result<&Path> {
        self.input
            .as_deref()
            .ok_or_else(|| invalid("no input corpus given (--input)"))
    }

    pub fn output(&self) -> Result<&Path> {
        self.output
            .as_deref()
            .ok_or_else(|| invalid("no output directory given (--output)"))
    }

    pub fn target(&self) -> Result<PrivacyTarget> {
        PrivacyTarget::new(self.epsilon, self.delta)
    }

    pub fn schedule(&self) -> Result<NoiseSchedule> {
        self.validate()?;
        if self.noiseless {
            let mut s = NoiseSchedule::noiseless(
                self.max_len,
                self.debug_rho.unwrap_or(0.0),
                &self.caps,
                self.eta,
            )?;
            s.sample_p = self.sample_p;
            return Ok(s);
        }
        allocate_schedule(
            self.target()?,
            self.max_len,
            self.decay,
            &self.caps,
            self.eta,
            self.sample_p,
        )
    }

    pub fn extract_options(&self) -> ExtractOptions {
        ExtractOptions {
            rule: self.prune,
            mode: self.mode,
            seed: self.seed,
            valid_set_limit: self.valid_set_limit as u128,
        }
    }

    /// The shared per-level cap used by the baselines.
    pub fn delta0(&self) -> Result<usize> {
        match self.caps.as_slice() {
            [] => Err(invalid("no contribution cap given")),
            [first, rest @ ..] if rest.iter().all(|c| c == first) => Ok(*first),
            _ => Err(invalid(
                "baselines need a single --delta0, not per-level caps",
            )),
        }
    }
}
