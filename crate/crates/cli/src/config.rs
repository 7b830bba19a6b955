//! Experiment configuration files.
//!
//! ```json
//! {
//!   "network": { "kind": "izhikevich", "nNeurons": 1000, "nConn": 100 },
//!   "sweep": { "nConnValues": [100, 200], "gScaleValues": [0.5, 1, 2], "targetPopulation": "izhikevich" },
//!   "output": "out",
//!   "parallelism": 4
//! }
//! ```
//!
//! `network` is either a full network specification or a builder shorthand
//! selected by its `kind` field.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::Deserialize;
use synscale::model::{build_mbody_net_with, MbodyOptions, MBODY_GROUPS};
use synscale::{build_izhikevich_net, validate, NetworkSpec, Violation};

use crate::CliError;

/// Environment variable naming the output directory when neither the
/// config nor the command line gives one.
pub const OUT_DIR_ENV: &str = "SYNSCALE_OUT_DIR";

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct IzhikevichBuilder {
    #[serde(default = "default_neurons")]
    pub n_neurons: usize,
    pub n_conn: usize,
    #[serde(default = "default_exc_fraction")]
    pub exc_fraction: f64,
    #[serde(default = "one")]
    pub g_scale: f64,
    #[serde(default)]
    pub seed: u64,
    pub duration_ms: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct MbodyBuilder {
    #[serde(rename = "nPN")]
    pub n_pn: usize,
    #[serde(rename = "nLHI")]
    pub n_lhi: usize,
    #[serde(rename = "nKC")]
    pub n_kc: usize,
    #[serde(rename = "nDN")]
    pub n_dn: usize,
    /// Per-group gScale; groups left out default to 1.
    #[serde(default)]
    pub g_scales: BTreeMap<String, f64>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub options: MbodyOptions,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Builder {
    Izhikevich(IzhikevichBuilder),
    Mbody(MbodyBuilder),
}

#[derive(Debug, Clone, PartialEq)]
pub enum NetworkSource {
    Builder(Builder),
    Spec(NetworkSpec),
}

fn default_neurons() -> usize {
    1000
}

fn default_exc_fraction() -> f64 {
    0.8
}

fn one() -> f64 {
    1.0
}

fn default_parallelism() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct SweepConfig {
    pub n_conn_values: Vec<usize>,
    pub g_scale_values: Vec<f64>,
    pub target_population: String,
    /// Defaults to the largest swept nConn.
    pub ref_n_conn: Option<usize>,
    #[serde(default = "one")]
    pub ref_g_scale: f64,
    /// Synapse groups whose gScale (and, for a full specification, out-degree)
    /// the sweep sets. Defaults: every group of a full specification or of the
    /// Izhikevich builder, `pn_kc` for the mushroom body.
    pub groups: Option<Vec<String>>,
}

impl SweepConfig {
    pub fn reference(&self) -> (usize, f64) {
        let n = self.ref_n_conn.unwrap_or_else(|| self.n_conn_values.iter().copied().max().unwrap_or(0));
        (n, self.ref_g_scale)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub network: NetworkSource,
    pub sweep: Option<SweepConfig>,
    pub output: Option<PathBuf>,
    pub parallelism: usize,
}

#[derive(Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
struct RawConfig {
    network: serde_json::Value,
    sweep: Option<SweepConfig>,
    output: Option<PathBuf>,
    #[serde(default = "default_parallelism")]
    parallelism: usize,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self, CliError> {
        let raw: RawConfig = serde_json::from_str(text).map_err(|e| CliError::User(format!("config: {e}")))?;
        let network = if raw.network.get("kind").is_some() {
            NetworkSource::Builder(
                serde_json::from_value(raw.network).map_err(|e| CliError::User(format!("network builder: {e}")))?,
            )
        } else {
            NetworkSource::Spec(
                serde_json::from_value(raw.network).map_err(|e| CliError::User(format!("network: {e}")))?,
            )
        };
        if raw.parallelism == 0 {
            return Err(CliError::User("parallelism must be at least 1".into()));
        }
        if let Some(s) = &raw.sweep {
            if s.n_conn_values.is_empty() || s.g_scale_values.is_empty() {
                return Err(CliError::User("sweep needs at least one nConn and one gScale value".into()));
            }
        }
        Ok(ExperimentConfig { network, sweep: raw.sweep, output: raw.output, parallelism: raw.parallelism })
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::User(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    /// Output directory: command line, then config, then the environment, then `.`.
    pub fn output_dir(&self, flag: Option<&Path>) -> PathBuf {
        flag.map(Path::to_path_buf)
            .or_else(|| self.output.clone())
            .or_else(|| std::env::var_os(OUT_DIR_ENV).map(PathBuf::from))
            .unwrap_or_else(|| PathBuf::from("."))
    }

    /// The network as configured, with an optional seed override.
    pub fn network(&self, seed: Option<u64>) -> Result<NetworkSpec, CliError> {
        let mut spec = match &self.network {
            NetworkSource::Spec(s) => s.clone(),
            NetworkSource::Builder(b) => b.build(None, seed)?,
        };
        if let Some(seed) = seed {
            spec.global_seed = seed;
        }
        check(&spec)?;
        Ok(spec)
    }

    /// The network at one sweep cell.
    pub fn network_at(&self, n_conn: usize, g_scale: f64) -> synscale::Result<NetworkSpec> {
        let groups = self.sweep.as_ref().and_then(|s| s.groups.clone());
        match &self.network {
            NetworkSource::Builder(b) => b
                .build(Some((n_conn, g_scale, groups.as_deref())), None)
                .map_err(|e| synscale::Error::InvalidArgument(e.to_string())),
            NetworkSource::Spec(s) => {
                let mut spec = s.clone();
                for g in spec.synapses.iter_mut() {
                    if groups.as_ref().is_none_or(|names| names.contains(&g.name)) {
                        g.out_degree = n_conn;
                        g.g_scale = g_scale;
                    }
                }
                Ok(spec)
            }
        }
    }
}

type Cell<'a> = (usize, f64, Option<&'a [String]>);

impl Builder {
    fn build(&self, cell: Option<Cell<'_>>, seed: Option<u64>) -> Result<NetworkSpec, CliError> {
        let user = |e: synscale::Error| CliError::User(e.to_string());
        match self {
            Builder::Izhikevich(b) => {
                if let Some((_, _, Some(groups))) = cell {
                    if groups.iter().any(|g| g != "exc" && g != "inh") {
                        return Err(CliError::User("the Izhikevich builder has groups `exc` and `inh` only".into()));
                    }
                }
                let (n_conn, g_scale) = cell.map_or((b.n_conn, b.g_scale), |(n, g, _)| (n, g));
                let mut spec = build_izhikevich_net(b.n_neurons, n_conn, b.exc_fraction, g_scale, seed.unwrap_or(b.seed))
                    .map_err(user)?;
                if let Some((_, _, Some(groups))) = cell {
                    for g in spec.synapses.iter_mut().filter(|g| !groups.contains(&g.name)) {
                        g.g_scale = b.g_scale;
                    }
                }
                if let Some(d) = b.duration_ms {
                    spec.duration_ms = d;
                }
                Ok(spec)
            }
            Builder::Mbody(b) => {
                let mut g_scales: BTreeMap<String, f64> = MBODY_GROUPS.iter().map(|g| (g.to_string(), 1.0)).collect();
                for (name, g) in &b.g_scales {
                    if !g_scales.contains_key(name) {
                        return Err(CliError::User(format!("unknown mushroom-body group `{name}`")));
                    }
                    g_scales.insert(name.clone(), *g);
                }
                let mut n_pn = b.n_pn;
                if let Some((n, g, groups)) = cell {
                    n_pn = n;
                    let swept = groups.map_or_else(|| vec!["pn_kc".to_string()], <[String]>::to_vec);
                    for name in swept {
                        match g_scales.get_mut(&name) {
                            Some(v) => *v = g,
                            None => return Err(CliError::User(format!("unknown mushroom-body group `{name}`"))),
                        }
                    }
                }
                build_mbody_net_with(&b.options, n_pn, b.n_lhi, b.n_kc, b.n_dn, &g_scales, seed.unwrap_or(b.seed))
                    .map_err(user)
            }
        }
    }
}

fn check(spec: &NetworkSpec) -> Result<(), CliError> {
    let v = validate(spec);
    if v.is_empty() {
        Ok(())
    } else {
        Err(CliError::Invalid(v))
    }
}

/// Expands the config and reports every problem found.
pub fn validate_config(cfg: &ExperimentConfig) -> Result<NetworkSpec, CliError> {
    let spec = cfg.network(None)?;
    if let Some(s) = &cfg.sweep {
        if spec.population(&s.target_population).is_none() {
            return Err(CliError::Invalid(vec![Violation {
                field: "sweep.targetPopulation".into(),
                message: format!("no population named `{}`", s.target_population),
            }]));
        }
        let (n, g) = s.reference();
        if !s.n_conn_values.contains(&n) || !s.g_scale_values.iter().any(|v| (v - g).abs() <= 1e-9 * g.abs()) {
            return Err(CliError::User(format!("reference (nConn = {n}, gScale = {g}) is not on the sweep grid")));
        }
        for &n in &s.n_conn_values {
            for &g in &s.g_scale_values {
                let cell = cfg.network_at(n, g).map_err(|e| CliError::User(format!("nConn = {n}, gScale = {g}: {e}")))?;
                check(&cell)?;
            }
        }
    }
    Ok(spec)
}
