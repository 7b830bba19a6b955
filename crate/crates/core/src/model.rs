//! Declarative network descriptions and the two benchmark builders.

use std::collections::{BTreeMap, HashSet};
use std::fmt;

use rand::Rng;
use serde::{Deserialize, Serialize};

pub use crate::connectivity::{Sign, WeightDist};
use crate::error::{Error, Result};
use crate::rng;
use crate::Real;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct IzhikevichParams {
    pub a: Vec<Real>,
    pub b: Vec<Real>,
    pub c: Vec<Real>,
    pub d: Vec<Real>,
    /// Standard deviation of the Gaussian input drawn for every neuron each step.
    pub input_noise_amplitude: Vec<Real>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct PoissonParams {
    /// Spikes per second.
    pub rate: f64,
}

/// Conductance-based leaky integrate-and-fire parameters (ms, mV).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct CondLifParams {
    pub tau_m: Real,
    pub e_leak: Real,
    pub v_thresh: Real,
    pub v_reset: Real,
    pub e_exc: Real,
    pub e_inh: Real,
    pub tau_syn: Real,
}

impl Default for CondLifParams {
    fn default() -> Self {
        CondLifParams {
            tau_m: 20.0,
            e_leak: -60.0,
            v_thresh: -50.0,
            v_reset: -60.0,
            e_exc: 0.0,
            e_inh: -92.0,
            tau_syn: 5.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", content = "params")]
pub enum NeuronModel {
    Izhikevich(IzhikevichParams),
    PoissonSource(PoissonParams),
    CondLIF(CondLifParams),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct NeuronPopulation {
    pub name: String,
    pub size: usize,
    #[serde(flatten)]
    pub model: NeuronModel,
    /// Offset added to the network seed for this population's runtime streams.
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Storage {
    Dense,
    Sparse,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct SynapseGroupSpec {
    pub name: String,
    pub pre: String,
    /// Restricts the pre-synaptic side to neurons `[lo, hi)` of `pre`.
    /// Lets one population with mixed excitatory and inhibitory neurons
    /// project through two groups.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pre_range: Option<[usize; 2]>,
    pub post: String,
    pub sign: Sign,
    pub out_degree: usize,
    pub base_weight_dist: WeightDist,
    /// Multiplier on every base weight. Zero silences the group.
    pub g_scale: f64,
    pub storage: Storage,
}

impl SynapseGroupSpec {
    /// Pre-synaptic neurons `[lo, hi)` within the `pre` population.
    pub fn pre_span(&self, pre_size: usize) -> (usize, usize) {
        match self.pre_range {
            Some([lo, hi]) => (lo, hi),
            None => (0, pre_size),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct NetworkSpec {
    pub populations: Vec<NeuronPopulation>,
    pub synapses: Vec<SynapseGroupSpec>,
    /// Time step, ms.
    pub dt: f64,
    pub duration_ms: f64,
    pub global_seed: u64,
}

impl NetworkSpec {
    pub fn population(&self, name: &str) -> Option<&NeuronPopulation> {
        self.populations.iter().find(|p| p.name == name)
    }

    pub fn population_index(&self, name: &str) -> Option<usize> {
        self.populations.iter().position(|p| p.name == name)
    }

    pub fn synapse_mut(&mut self, name: &str) -> Option<&mut SynapseGroupSpec> {
        self.synapses.iter_mut().find(|s| s.name == name)
    }

    pub fn total_neurons(&self) -> usize {
        self.populations.iter().map(|p| p.size).sum()
    }

    /// Number of simulation steps: `ceil(durationMs / dt)`.
    pub fn steps(&self) -> u64 {
        // The small slack keeps 10 / 0.1 from rounding up to 101 steps.
        ((self.duration_ms / self.dt) * (1.0 - 1e-12)).ceil() as u64
    }

    /// Seed of the connectivity generator for a synapse group.
    pub fn connectivity_seed(&self, group: &str) -> u64 {
        rng::derive_seed(self.global_seed, &format!("syn/{group}/connectivity"))
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

/// A broken invariant, tagged with the field path it concerns.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Violation {
    pub field: String,
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.field, self.message)
    }
}

struct Violations(Vec<Violation>);

impl Violations {
    fn push(&mut self, field: impl Into<String>, message: impl Into<String>) {
        self.0.push(Violation { field: field.into(), message: message.into() });
    }
}

fn positive(x: f64) -> bool {
    x.is_finite() && x > 0.0
}

/// Lists every broken invariant; an empty list means the spec can be run.
pub fn validate(spec: &NetworkSpec) -> Vec<Violation> {
    let mut out = Violations(Vec::new());

    if !positive(spec.dt) {
        out.push("dt", "dt must be positive");
    }
    if !positive(spec.duration_ms) {
        out.push("durationMs", "durationMs must be positive");
    }

    let mut names = HashSet::new();
    for (k, pop) in spec.populations.iter().enumerate() {
        let field = format!("populations[{k}]");
        if pop.name.is_empty() {
            out.push(format!("{field}.name"), "name must not be empty");
        }
        if !names.insert(pop.name.as_str()) {
            out.push(format!("{field}.name"), format!("duplicate population name `{}`", pop.name));
        }
        if pop.size == 0 {
            out.push(format!("{field}.size"), "size must be at least 1");
        }
        check_params(pop, &field, spec.dt, &mut out);
    }

    let mut group_names = HashSet::new();
    for (k, syn) in spec.synapses.iter().enumerate() {
        let field = format!("synapses[{k}]");
        if !group_names.insert(syn.name.as_str()) {
            out.push(format!("{field}.name"), format!("duplicate synapse group name `{}`", syn.name));
        }
        let pre = spec.population(&syn.pre);
        let post = spec.population(&syn.post);
        if pre.is_none() {
            out.push(format!("{field}.pre"), format!("unknown population `{}`", syn.pre));
        }
        match post {
            None => out.push(format!("{field}.post"), format!("unknown population `{}`", syn.post)),
            Some(p) => {
                if matches!(p.model, NeuronModel::PoissonSource(_)) {
                    out.push(format!("{field}.post"), format!("`{}` is a Poisson source and takes no input", p.name));
                }
                if syn.out_degree == 0 || syn.out_degree > p.size {
                    out.push(
                        format!("{field}.outDegree"),
                        format!("outDegree {} must lie in 1..={}", syn.out_degree, p.size),
                    );
                }
            }
        }
        if let (Some(p), Some([lo, hi])) = (pre, syn.pre_range) {
            if lo >= hi || hi > p.size {
                out.push(
                    format!("{field}.preRange"),
                    format!("[{lo}, {hi}) is not a non-empty range inside `{}` (size {})", p.name, p.size),
                );
            }
        }
        if let Err(msg) = syn.base_weight_dist.check() {
            out.push(format!("{field}.baseWeightDist"), msg);
        }
        if !(syn.g_scale.is_finite() && syn.g_scale >= 0.0) {
            out.push(format!("{field}.gScale"), "gScale must be finite and >= 0");
        }
    }
    out.0
}

fn check_params(pop: &NeuronPopulation, field: &str, dt: f64, out: &mut Violations) {
    match &pop.model {
        NeuronModel::Izhikevich(p) => {
            for (arr, name) in [
                (&p.a, "a"),
                (&p.b, "b"),
                (&p.c, "c"),
                (&p.d, "d"),
                (&p.input_noise_amplitude, "inputNoiseAmplitude"),
            ] {
                if arr.len() != pop.size {
                    out.push(
                        format!("{field}.params.{name}"),
                        format!("has {} entries, population size is {}", arr.len(), pop.size),
                    );
                }
                if arr.iter().any(|x| !x.is_finite()) {
                    out.push(format!("{field}.params.{name}"), "entries must be finite");
                }
            }
            if p.a.iter().any(|&a| a <= 0.0) {
                out.push(format!("{field}.params.a"), "a must be > 0 for every neuron");
            }
            if p.input_noise_amplitude.iter().any(|&s| s < 0.0) {
                out.push(format!("{field}.params.inputNoiseAmplitude"), "amplitude must be >= 0");
            }
        }
        NeuronModel::PoissonSource(p) => {
            if !(p.rate.is_finite() && p.rate >= 0.0) {
                out.push(format!("{field}.params.rate"), "rate must be finite and >= 0");
            } else if p.rate * dt / 1000.0 > 1.0 {
                out.push(format!("{field}.params.rate"), "rate * dt exceeds one spike per step");
            }
        }
        NeuronModel::CondLIF(p) => {
            let all = [p.tau_m, p.e_leak, p.v_thresh, p.v_reset, p.e_exc, p.e_inh, p.tau_syn];
            if all.iter().any(|x| !x.is_finite()) {
                out.push(format!("{field}.params"), "parameters must be finite");
            }
            if p.tau_m <= 0.0 {
                out.push(format!("{field}.params.tauM"), "tauM must be > 0");
            }
            if p.tau_syn <= 0.0 {
                out.push(format!("{field}.params.tauSyn"), "tauSyn must be > 0");
            }
            if p.v_reset >= p.v_thresh {
                out.push(format!("{field}.params.vReset"), "vReset must be below vThresh");
            }
            if !(p.e_inh < p.v_thresh && p.v_thresh < p.e_exc) {
                out.push(format!("{field}.params.vThresh"), "need eInh < vThresh < eExc");
            }
        }
    }
}

fn check_or_fail(spec: NetworkSpec) -> Result<NetworkSpec> {
    let violations = validate(&spec);
    if violations.is_empty() {
        Ok(spec)
    } else {
        Err(Error::Validation(violations))
    }
}

pub const IZHIKEVICH_POPULATION: &str = "izhikevich";

/// Random cortical network of Izhikevich neurons.
///
/// The first `floor(exc_fraction * n_neurons)` neurons are excitatory
/// (regular spiking to chattering), the rest inhibitory (fast spiking to
/// low-threshold spiking). Parameter jitter follows the classic recipe with
/// one uniform `r` per neuron:
///
/// | | a | b | c | d | noise |
/// |---|---|---|---|---|---|
/// | exc | 0.02 | 0.2 | -65 + 15 r² | 8 - 6 r² | 5 |
/// | inh | 0.02 + 0.08 r | 0.25 - 0.05 r | -65 | 2 | 2 |
///
/// Excitatory weights are uniform on (0, 0.5], inhibitory on -(0, 1]. Both
/// groups project to the whole population with out-degree `n_conn`.
pub fn build_izhikevich_net(
    n_neurons: usize,
    n_conn: usize,
    exc_fraction: f64,
    g_scale: f64,
    seed: u64,
) -> Result<NetworkSpec> {
    if n_conn == 0 || n_conn > n_neurons {
        return Err(Error::InvalidArgument(format!(
            "nConn = {n_conn} must lie in 1..={n_neurons}"
        )));
    }
    if !(exc_fraction > 0.0 && exc_fraction < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "excitatory fraction {exc_fraction} must lie in (0, 1)"
        )));
    }
    let n_exc = (exc_fraction * n_neurons as f64).floor() as usize;

    let mut r = rng::stream(seed, &format!("pop/{IZHIKEVICH_POPULATION}/params"));
    let mut p = IzhikevichParams {
        a: Vec::with_capacity(n_neurons),
        b: Vec::with_capacity(n_neurons),
        c: Vec::with_capacity(n_neurons),
        d: Vec::with_capacity(n_neurons),
        input_noise_amplitude: Vec::with_capacity(n_neurons),
    };
    for i in 0..n_neurons {
        let x: f64 = r.random();
        let (a, b, c, d, noise) = if i < n_exc {
            (0.02, 0.2, -65.0 + 15.0 * x * x, 8.0 - 6.0 * x * x, 5.0)
        } else {
            (0.02 + 0.08 * x, 0.25 - 0.05 * x, -65.0, 2.0, 2.0)
        };
        p.a.push(a as Real);
        p.b.push(b as Real);
        p.c.push(c as Real);
        p.d.push(d as Real);
        p.input_noise_amplitude.push(noise as Real);
    }

    let group = |name: &str, range: [usize; 2], sign, hi| SynapseGroupSpec {
        name: name.into(),
        pre: IZHIKEVICH_POPULATION.into(),
        pre_range: Some(range),
        post: IZHIKEVICH_POPULATION.into(),
        sign,
        out_degree: n_conn,
        base_weight_dist: WeightDist::Uniform { lo: 0.0, hi },
        g_scale,
        storage: Storage::Sparse,
    };
    let mut synapses = Vec::new();
    if n_exc > 0 {
        synapses.push(group("exc", [0, n_exc], Sign::Excitatory, 0.5));
    }
    if n_exc < n_neurons {
        synapses.push(group("inh", [n_exc, n_neurons], Sign::Inhibitory, 1.0));
    }

    check_or_fail(NetworkSpec {
        populations: vec![NeuronPopulation {
            name: IZHIKEVICH_POPULATION.into(),
            size: n_neurons,
            model: NeuronModel::Izhikevich(p),
            seed: 0,
        }],
        synapses,
        dt: 1.0,
        duration_ms: 1000.0,
        global_seed: seed,
    })
}

/// Names of the four mushroom-body synapse groups.
pub const MBODY_GROUPS: [&str; 4] = ["pn_kc", "pn_lhi", "lhi_kc", "kc_dn"];

/// Tunable parts of the mushroom-body network that the builder arguments leave open.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", default)]
pub struct MbodyOptions {
    /// Firing rate of the projection neurons, Hz.
    pub pn_rate: f64,
    /// Fraction of Kenyon cells each projection neuron contacts.
    pub pn_kc_fraction: f64,
    pub pn_kc_weight: WeightDist,
    pub pn_lhi_weight: WeightDist,
    pub lhi_kc_weight: WeightDist,
    pub kc_dn_weight: WeightDist,
    pub lif: CondLifParams,
    pub dt: f64,
    pub duration_ms: f64,
}

impl Default for MbodyOptions {
    fn default() -> Self {
        MbodyOptions {
            pn_rate: 20.0,
            pn_kc_fraction: 0.5,
            pn_kc_weight: WeightDist::Uniform { lo: 0.0, hi: 0.005 },
            pn_lhi_weight: WeightDist::Uniform { lo: 0.0, hi: 0.0015 },
            lhi_kc_weight: WeightDist::Uniform { lo: 0.0, hi: 0.001 },
            kc_dn_weight: WeightDist::Uniform { lo: 0.0, hi: 0.0002 },
            lif: CondLifParams::default(),
            dt: 0.1,
            duration_ms: 1000.0,
        }
    }
}

/// Insect mushroom body: Poisson projection neurons drive Kenyon cells
/// directly and through inhibitory lateral horn interneurons; Kenyon cells
/// converge on detection neurons.
pub fn build_mbody_net(
    n_pn: usize,
    n_lhi: usize,
    n_kc: usize,
    n_dn: usize,
    g_scales: &BTreeMap<String, f64>,
    seed: u64,
) -> Result<NetworkSpec> {
    build_mbody_net_with(&MbodyOptions::default(), n_pn, n_lhi, n_kc, n_dn, g_scales, seed)
}

pub fn build_mbody_net_with(
    opts: &MbodyOptions,
    n_pn: usize,
    n_lhi: usize,
    n_kc: usize,
    n_dn: usize,
    g_scales: &BTreeMap<String, f64>,
    seed: u64,
) -> Result<NetworkSpec> {
    for (n, what) in [(n_pn, "nPN"), (n_lhi, "nLHI"), (n_kc, "nKC"), (n_dn, "nDN")] {
        if n == 0 {
            return Err(Error::InvalidArgument(format!("{what} must be at least 1")));
        }
    }
    if !(opts.pn_kc_fraction > 0.0 && opts.pn_kc_fraction <= 1.0) {
        return Err(Error::InvalidArgument("pnKcFraction must lie in (0, 1]".into()));
    }
    let g = |name: &str| g_scales.get(name).copied().ok_or_else(|| Error::MissingGScale(name.into()));

    let lif = |name: &str, size| NeuronPopulation {
        name: name.into(),
        size,
        model: NeuronModel::CondLIF(opts.lif.clone()),
        seed: 0,
    };
    let populations = vec![
        NeuronPopulation {
            name: "pn".into(),
            size: n_pn,
            model: NeuronModel::PoissonSource(PoissonParams { rate: opts.pn_rate }),
            seed: 0,
        },
        lif("lhi", n_lhi),
        lif("kc", n_kc),
        lif("dn", n_dn),
    ];

    let pn_kc_degree = ((opts.pn_kc_fraction * n_kc as f64).round() as usize).clamp(1, n_kc);
    let group = |name: &str, pre: &str, post: &str, sign, out_degree, dist, storage| -> Result<_> {
        Ok(SynapseGroupSpec {
            name: name.into(),
            pre: pre.into(),
            pre_range: None,
            post: post.into(),
            sign,
            out_degree,
            base_weight_dist: dist,
            g_scale: g(name)?,
            storage,
        })
    };
    let synapses = vec![
        group("pn_kc", "pn", "kc", Sign::Excitatory, pn_kc_degree, opts.pn_kc_weight, Storage::Sparse)?,
        group("pn_lhi", "pn", "lhi", Sign::Excitatory, n_lhi, opts.pn_lhi_weight, Storage::Dense)?,
        group("lhi_kc", "lhi", "kc", Sign::Inhibitory, n_kc, opts.lhi_kc_weight, Storage::Dense)?,
        group("kc_dn", "kc", "dn", Sign::Excitatory, n_dn, opts.kc_dn_weight, Storage::Dense)?,
    ];

    check_or_fail(NetworkSpec {
        populations,
        synapses,
        dt: opts.dt,
        duration_ms: opts.duration_ms,
        global_seed: seed,
    })
}
