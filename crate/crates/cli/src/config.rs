//! Run configuration: a TOML or JSON file, command-line flags on top, then
//! expansion into a campaign or a selection sweep.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use mpe_core::precoders::{Method, MpeOptions};
use mpe_core::selection::AlphaRule;
use mpe_core::sim::{preset, snr_grid, CampaignSpec, Preset, SelectionKind, SweepSpec, UserSetup, SUS_EPSILON};
use serde::{Deserialize, Serialize};

/// SNR points as an explicit list or a `start:stop:step` range.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SnrSpec {
    List(Vec<f64>),
    Text(String),
}

impl SnrSpec {
    pub fn grid(&self) -> Result<Vec<f64>> {
        match self {
            SnrSpec::List(v) => {
                if v.is_empty() || v.iter().any(|x| !x.is_finite()) {
                    bail!("snr: expected a nonempty list of finite values");
                }
                Ok(v.clone())
            }
            SnrSpec::Text(s) => parse_snr(s),
        }
    }
}

/// `"-5:20:2.5"` (inclusive range) or `"0,5,10"`.
pub fn parse_snr(text: &str) -> Result<Vec<f64>> {
    let num = |s: &str| s.trim().parse::<f64>().with_context(|| format!("snr: `{s}` is not a number"));
    if text.contains(':') {
        let parts: Vec<&str> = text.split(':').collect();
        let [start, stop, step] = parts[..] else {
            bail!("snr: a range must look like start:stop:step, got `{text}`");
        };
        let (start, stop, step) = (num(start)?, num(stop)?, num(step)?);
        if !(step > 0.0) {
            bail!("snr: step must be positive, got {step}");
        }
        snr_grid(start, stop, step).map_err(|e| anyhow::anyhow!("snr: {e}"))
    } else {
        let v = text.split(',').map(num).collect::<Result<Vec<f64>>>()?;
        SnrSpec::List(v).grid()
    }
}

/// `"adaptive"` for `α = (K − 1)/K`, or a fixed number.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum AlphaSpec {
    Fixed(f64),
    Named(String),
}

impl AlphaSpec {
    pub fn rule(&self) -> Result<AlphaRule> {
        match self {
            AlphaSpec::Fixed(a) if a.is_finite() && *a >= 0.0 => Ok(AlphaRule::Fixed(*a)),
            AlphaSpec::Fixed(a) => bail!("alpha: {a} must be finite and nonnegative"),
            AlphaSpec::Named(s) if s == "adaptive" => Ok(AlphaRule::Adaptive),
            AlphaSpec::Named(s) => match s.parse::<f64>() {
                Ok(a) => AlphaSpec::Fixed(a).rule(),
                Err(_) => bail!("alpha: expected `adaptive` or a number, got `{s}`"),
            },
        }
    }
}

/// Everything a run can be told, from a file or from flags.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CliConfig {
    /// fig2, fig3, fig4, fig5, fig6 or custom.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub preset: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub workers: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub snr: Option<SnrSpec>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub realizations: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub m: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub k: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub kt: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alpha: Option<AlphaSpec>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub epsilon_sus: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub frame_len: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub methods: Option<Vec<String>>,
    /// Selection rules for K_T runs: `gus`, `sus`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub selection: Option<Vec<String>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub symbols_per_realization: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pe_threshold: Option<f64>,
    /// Log level used when `MPE_LOG` is unset.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub verbosity: Option<String>,
}

impl CliConfig {
    /// Reads a TOML or JSON file. A run manifest is accepted too: its
    /// `config` section replays the run it describes.
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let is_json = path.extension().is_some_and(|e| e == "json") || text.trim_start().starts_with('{');
        if is_json {
            let value: serde_json::Value =
                serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
            let value = match value.get("config") {
                Some(inner) if value.get("tool").is_some() => inner.clone(),
                _ => value,
            };
            serde_json::from_value(value).with_context(|| format!("in {}", path.display()))
        } else {
            toml::from_str(&text).with_context(|| format!("in {}", path.display()))
        }
    }

    /// Fields set in `over` replace those in `self`.
    pub fn merged(self, over: CliConfig) -> CliConfig {
        CliConfig {
            preset: over.preset.or(self.preset),
            seed: over.seed.or(self.seed),
            out: over.out.or(self.out),
            workers: over.workers.or(self.workers),
            snr: over.snr.or(self.snr),
            realizations: over.realizations.or(self.realizations),
            m: over.m.or(self.m),
            k: over.k.or(self.k),
            kt: over.kt.or(self.kt),
            alpha: over.alpha.or(self.alpha),
            epsilon_sus: over.epsilon_sus.or(self.epsilon_sus),
            frame_len: over.frame_len.or(self.frame_len),
            methods: over.methods.or(self.methods),
            selection: over.selection.or(self.selection),
            symbols_per_realization: over.symbols_per_realization.or(self.symbols_per_realization),
            pe_threshold: over.pe_threshold.or(self.pe_threshold),
            verbosity: over.verbosity.or(self.verbosity),
        }
    }

    pub fn preset_name(&self) -> &str {
        self.preset.as_deref().unwrap_or("custom")
    }

    pub fn seed(&self) -> u64 {
        self.seed.unwrap_or(DEFAULT_SEED)
    }

    pub fn out_dir(&self) -> PathBuf {
        self.out.clone().unwrap_or_else(|| PathBuf::from("out"))
    }

    fn reject(&self, keys: &[(&str, bool)]) -> Result<()> {
        let name = self.preset_name();
        let set: Vec<&str> = keys.iter().filter(|(_, on)| *on).map(|(k, _)| *k).collect();
        if !set.is_empty() {
            bail!("conflicting settings: preset `{name}` does not take {}", set.join(", "));
        }
        Ok(())
    }

    fn methods(&self) -> Result<Option<Vec<Method>>> {
        self.methods
            .as_ref()
            .map(|names| {
                if names.is_empty() {
                    bail!("methods: at least one precoder is required");
                }
                names.iter().map(|n| n.parse::<Method>().map_err(|e| anyhow::anyhow!("methods: {e}"))).collect()
            })
            .transpose()
    }

    fn selection_kinds(&self) -> Result<Option<Vec<SelectionKind>>> {
        let alpha = self.alpha.as_ref().map(AlphaSpec::rule).transpose()?.unwrap_or(AlphaRule::Adaptive);
        let epsilon = self.epsilon_sus.unwrap_or(SUS_EPSILON);
        if !(epsilon > 0.0 && epsilon < 1.0) {
            bail!("epsilon_sus: {epsilon} must lie in (0, 1)");
        }
        let names = match &self.selection {
            Some(names) if names.is_empty() => bail!("selection: at least one rule is required"),
            Some(names) => names.clone(),
            None if self.alpha.is_some() || self.epsilon_sus.is_some() => vec!["gus".into(), "sus".into()],
            None => return Ok(None),
        };
        names
            .iter()
            .map(|n| match n.as_str() {
                "gus" => Ok(SelectionKind::Gus { alpha }),
                "sus" => Ok(SelectionKind::Sus { epsilon }),
                other => bail!("selection: unknown rule `{other}` (expected gus or sus)"),
            })
            .collect::<Result<Vec<_>>>()
            .map(Some)
    }

    fn apply_common(&self, spec: &mut CampaignSpec) -> Result<()> {
        if let Some(snr) = &self.snr {
            spec.snr_db = snr.grid()?;
        }
        if let Some(r) = self.realizations {
            spec.realizations = r;
        }
        if let Some(l) = self.frame_len {
            spec.frame_len = l;
        }
        if let Some(n) = self.symbols_per_realization {
            spec.symbols_per_realization = n;
        }
        if let Some(m) = self.m {
            spec.antennas = m;
        }
        if let Some(methods) = self.methods()? {
            spec.methods = methods;
        }
        if let Some(t) = self.pe_threshold {
            if !(t > 0.0) {
                bail!("pe_threshold: {t} must be positive");
            }
            spec.mpe.pe_threshold = t;
        }
        Ok(())
    }

    /// Expands the configuration into the job it describes.
    pub fn resolve(&self) -> Result<Job> {
        let seed = self.seed();
        let name = self.preset_name().to_string();
        let job = match name.as_str() {
            "fig2" | "fig3" => {
                self.reject(&[
                    ("kt", self.kt.is_some()),
                    ("alpha", self.alpha.is_some()),
                    ("epsilon_sus", self.epsilon_sus.is_some()),
                    ("selection", self.selection.is_some()),
                ])?;
                let Preset::Campaign(mut spec) = preset(&name, seed)? else { unreachable!() };
                self.apply_common(&mut spec)?;
                if let Some(k) = self.k {
                    spec.users = UserSetup::Fixed { users: k };
                }
                Job::Campaign(spec)
            }
            "fig5" | "fig6" => {
                self.reject(&[("k", self.k.is_some())])?;
                let Preset::Campaign(mut spec) = preset(&name, seed)? else { unreachable!() };
                self.apply_common(&mut spec)?;
                if let UserSetup::Selected { total_users, methods } = &mut spec.users {
                    if let Some(kt) = self.kt {
                        *total_users = kt;
                    }
                    if let Some(kinds) = self.selection_kinds()? {
                        *methods = kinds;
                    }
                }
                Job::Campaign(spec)
            }
            "fig4" => {
                self.reject(&[
                    ("k", self.k.is_some()),
                    ("snr", self.snr.is_some()),
                    ("frame_len", self.frame_len.is_some()),
                    ("methods", self.methods.is_some()),
                    ("symbols_per_realization", self.symbols_per_realization.is_some()),
                    ("pe_threshold", self.pe_threshold.is_some()),
                ])?;
                let Preset::SelectionSweep(mut sweep) = preset(&name, seed)? else { unreachable!() };
                if let Some(m) = self.m {
                    sweep.antennas = vec![m];
                }
                if let Some(kt) = self.kt {
                    sweep.totals = vec![kt];
                }
                if let Some(r) = self.realizations {
                    sweep.realizations = r;
                }
                if let Some(kinds) = self.selection_kinds()? {
                    sweep.methods = kinds;
                }
                Job::Sweep(sweep)
            }
            "custom" => self.resolve_custom(seed)?,
            other => bail!("preset: unknown preset `{other}` (expected fig2, fig3, fig4, fig5, fig6 or custom)"),
        };
        job.validate()?;
        Ok(job)
    }

    fn resolve_custom(&self, seed: u64) -> Result<Job> {
        let Some(m) = self.m else {
            bail!("m: a custom run needs the antenna count");
        };
        let users = match (self.k, self.kt) {
            (Some(_), Some(_)) => bail!("conflicting settings: give either k (fixed users) or kt (user selection), not both"),
            (None, None) => bail!("k: a custom run needs k (fixed users) or kt (user selection)"),
            (Some(k), None) => {
                self.reject(&[
                    ("alpha", self.alpha.is_some()),
                    ("epsilon_sus", self.epsilon_sus.is_some()),
                    ("selection", self.selection.is_some()),
                ])?;
                UserSetup::Fixed { users: k }
            }
            (None, Some(kt)) => UserSetup::Selected {
                total_users: kt,
                methods: self.selection_kinds()?.unwrap_or(vec![
                    SelectionKind::Gus { alpha: AlphaRule::Adaptive },
                    SelectionKind::Sus { epsilon: SUS_EPSILON },
                ]),
            },
        };
        let mut spec = CampaignSpec {
            antennas: m,
            users,
            snr_db: parse_snr("0:20:5")?,
            realizations: 100,
            symbols_per_realization: 200,
            frame_len: 100,
            methods: Method::ALL.to_vec(),
            seed,
            mpe: MpeOptions::default(),
        };
        self.apply_common(&mut spec)?;
        Ok(Job::Campaign(spec))
    }
}

pub const DEFAULT_SEED: u64 = 1;

#[derive(Debug, Clone, PartialEq)]
pub enum Job {
    Campaign(CampaignSpec),
    Sweep(SweepSpec),
}

impl Job {
    fn validate(&self) -> Result<()> {
        match self {
            Job::Campaign(spec) => spec.validate().map_err(|e| anyhow::anyhow!("{e}")),
            Job::Sweep(sweep) => {
                if sweep.realizations == 0 {
                    bail!("realizations: must be at least 1");
                }
                if sweep.antennas.contains(&0) || sweep.totals.contains(&0) {
                    bail!("m and kt must be positive");
                }
                Ok(())
            }
        }
    }
}
