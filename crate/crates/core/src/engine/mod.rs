//! Fixed-step simulation with dense or sparse synapse storage.
//!
//! Each step advances every population, flags neurons whose state went
//! non-finite, records threshold crossings (with reset), and finally
//! propagates this step's spikes into the inputs consumed on the next step.

mod neuron;
mod propagate;

use std::collections::BTreeMap;
use std::io::Write;
use std::time::Instant;

use serde::Serialize;

pub use neuron::{cond_lif_step, izhikevich_step, PopulationState, IZHIKEVICH_PEAK};
pub use propagate::{propagate, Connectivity};

use crate::connectivity::{gen_fixed_outdegree, to_sparse, DenseMatrix, Scale};
use crate::error::{Error, Result};
use crate::model::{validate, NetworkSpec, Sign, Storage, SynapseGroupSpec};
use crate::Real;
use neuron::PopulationRuntime;

/// Storage used for every synapse group of a run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum StorageChoice {
    /// Whatever each [`SynapseGroupSpec`] asks for.
    #[default]
    PerGroup,
    Dense,
    Sparse,
}

impl From<Storage> for StorageChoice {
    fn from(s: Storage) -> Self {
        match s {
            Storage::Dense => StorageChoice::Dense,
            Storage::Sparse => StorageChoice::Sparse,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Spike {
    pub step: u64,
    pub population: u32,
    pub neuron: u32,
}

/// Spikes of a run plus the population table they index into.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Raster {
    pub populations: Vec<String>,
    pub sizes: Vec<usize>,
    pub spikes: Vec<Spike>,
}

impl Raster {
    pub fn count(&self, population: &str) -> Result<usize> {
        let p = self.index_of(population)?;
        Ok(self.spikes.iter().filter(|s| s.population == p).count())
    }

    fn index_of(&self, population: &str) -> Result<u32> {
        self.populations
            .iter()
            .position(|n| n == population)
            .map(|p| p as u32)
            .ok_or_else(|| Error::UnknownPopulation(population.into()))
    }

    /// CSV with header `step,population,neuron`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "step,population,neuron")?;
        for s in &self.spikes {
            writeln!(w, "{},{},{}", s.step, self.populations[s.population as usize], s.neuron)?;
        }
        Ok(())
    }
}

fn rate(count: usize, size: usize, duration_ms: f64) -> f64 {
    count as f64 / (size as f64 * (duration_ms / 1000.0))
}

/// Mean spikes per neuron per second of `population` over `duration_ms`.
pub fn avg_spike(raster: &Raster, population: &str, duration_ms: f64) -> Result<f64> {
    if !(duration_ms.is_finite() && duration_ms > 0.0) {
        return Err(Error::InvalidArgument("durationMs must be positive".into()));
    }
    let p = raster.index_of(population)?;
    Ok(rate(raster.count(population)?, raster.sizes[p as usize], duration_ms))
}

#[derive(Debug, Clone)]
pub struct RunResult {
    pub raster: Raster,
    /// Spikes per neuron per second, by population name.
    pub avg_spike: BTreeMap<String, f64>,
    /// Neurons whose state went non-finite at any point of the run.
    pub sum_nans: usize,
    pub steps: u64,
    pub wall_time_ms: f64,
}

#[derive(Serialize)]
#[serde(rename_all = "camelCase")]
struct Summary<'a> {
    avg_spike: &'a BTreeMap<String, f64>,
    #[serde(rename = "sumNaNs")]
    sum_nans: usize,
    steps: u64,
    spikes: usize,
    timing: Timing,
}

#[derive(Serialize)]
#[serde(rename_all = "camelCase")]
struct Timing {
    wall_time_ms: f64,
}

impl RunResult {
    /// JSON summary; the wall time sits under `timing`, the only field that
    /// differs between identical runs.
    pub fn summary_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&Summary {
            avg_spike: &self.avg_spike,
            sum_nans: self.sum_nans,
            steps: self.steps,
            spikes: self.raster.spikes.len(),
            timing: Timing { wall_time_ms: self.wall_time_ms },
        })?)
    }
}

/// Full mutable state of a simulation.
#[derive(Debug, Clone)]
pub struct SimState {
    pub populations: Vec<PopulationState>,
    /// One monotone flag per neuron, set once any of its variables is non-finite.
    pub nan_flags: Vec<Vec<bool>>,
    pub step_index: u64,
}

impl SimState {
    pub fn sum_nans(&self) -> usize {
        self.nan_flags.iter().flatten().filter(|&&f| f).count()
    }
}

/// Scans every state variable and flags non-finite neurons.
/// Returns how many flags were newly set.
pub fn detect_nans(state: &mut SimState) -> usize {
    let mut newly = 0;
    for (pop, flags) in state.populations.iter().zip(state.nan_flags.iter_mut()) {
        for (i, flag) in flags.iter_mut().enumerate() {
            if !*flag && pop.non_finite(i) {
                *flag = true;
                newly += 1;
            }
        }
    }
    newly
}

#[derive(Debug, Clone)]
struct GroupRuntime {
    pre: usize,
    pre_lo: usize,
    pre_hi: usize,
    post: usize,
    sign: Sign,
    matrix: Connectivity,
}

/// Builds a group's weights: fixed out-degree connectivity scaled by gScale.
/// A zero gScale yields a group with no synapses.
pub fn build_matrix(spec: &NetworkSpec, group: &SynapseGroupSpec, storage: Storage) -> Result<Connectivity> {
    let pre = spec.population(&group.pre).ok_or_else(|| Error::UnknownPopulation(group.pre.clone()))?;
    let post = spec.population(&group.post).ok_or_else(|| Error::UnknownPopulation(group.post.clone()))?;
    let (lo, hi) = group.pre_span(pre.size);
    let dense = if group.g_scale == 0.0 {
        DenseMatrix::zeros(hi - lo, post.size)
    } else {
        gen_fixed_outdegree(
            hi - lo,
            post.size,
            group.out_degree,
            group.base_weight_dist,
            group.sign,
            spec.connectivity_seed(&group.name),
        )?
        .scale(group.g_scale)?
    };
    Ok(match storage {
        Storage::Dense => Connectivity::Dense(dense),
        Storage::Sparse => Connectivity::Sparse(to_sparse(&dense)),
    })
}

/// A network being stepped through time.
pub struct Simulation {
    spec: NetworkSpec,
    pops: Vec<PopulationRuntime>,
    groups: Vec<GroupRuntime>,
    state: SimState,
    raster: Raster,
    scratch: Vec<usize>,
}

impl Simulation {
    pub fn new(spec: &NetworkSpec, storage: StorageChoice) -> Result<Self> {
        let violations = validate(spec);
        if !violations.is_empty() {
            return Err(Error::Validation(violations));
        }
        let pops: Vec<_> = spec.populations.iter().map(|p| PopulationRuntime::new(p, spec.global_seed)).collect();
        let groups = spec
            .synapses
            .iter()
            .map(|g| {
                let pre = spec.population_index(&g.pre).expect("validated");
                let (pre_lo, pre_hi) = g.pre_span(spec.populations[pre].size);
                let storage = match storage {
                    StorageChoice::PerGroup => g.storage,
                    StorageChoice::Dense => Storage::Dense,
                    StorageChoice::Sparse => Storage::Sparse,
                };
                Ok(GroupRuntime {
                    pre,
                    pre_lo,
                    pre_hi,
                    post: spec.population_index(&g.post).expect("validated"),
                    sign: g.sign,
                    matrix: build_matrix(spec, g, storage)?,
                })
            })
            .collect::<Result<_>>()?;
        let state = SimState {
            populations: spec.populations.iter().map(PopulationState::initial).collect(),
            nan_flags: spec.populations.iter().map(|p| vec![false; p.size]).collect(),
            step_index: 0,
        };
        let raster = Raster {
            populations: spec.populations.iter().map(|p| p.name.clone()).collect(),
            sizes: spec.populations.iter().map(|p| p.size).collect(),
            spikes: Vec::new(),
        };
        Ok(Simulation { spec: spec.clone(), pops, groups, state, raster, scratch: Vec::new() })
    }

    pub fn spec(&self) -> &NetworkSpec {
        &self.spec
    }

    pub fn state(&self) -> &SimState {
        &self.state
    }

    /// Mutable access to the state between steps, e.g. to inject a fault.
    pub fn state_mut(&mut self) -> &mut SimState {
        &mut self.state
    }

    pub fn raster(&self) -> &Raster {
        &self.raster
    }

    /// Sets a constant external current for every neuron of an Izhikevich population.
    pub fn set_bias(&mut self, population: &str, bias: Real) -> Result<()> {
        let p = self
            .spec
            .population_index(population)
            .ok_or_else(|| Error::UnknownPopulation(population.into()))?;
        self.pops[p].bias.iter_mut().for_each(|b| *b = bias);
        Ok(())
    }

    /// Neurons that crossed threshold on the most recent step.
    pub fn fired(&self, population: usize) -> &[usize] {
        &self.pops[population].fired
    }

    /// Advances one time step; returns the number of newly flagged neurons.
    pub fn step(&mut self) -> Result<usize> {
        let dt = self.spec.dt;
        let step = self.state.step_index;
        for (rt, st) in self.pops.iter_mut().zip(self.state.populations.iter_mut()) {
            rt.advance(st, dt);
        }
        let newly = detect_nans(&mut self.state);
        for (p, (rt, st)) in self.pops.iter_mut().zip(self.state.populations.iter_mut()).enumerate() {
            rt.fire(st, dt);
            self.raster.spikes.extend(rt.fired.iter().map(|&i| Spike {
                step,
                population: p as u32,
                neuron: i as u32,
            }));
        }

        for g in &self.groups {
            self.scratch.clear();
            self.scratch.extend(
                self.pops[g.pre]
                    .fired
                    .iter()
                    .filter(|&&i| i >= g.pre_lo && i < g.pre_hi)
                    .map(|&i| i - g.pre_lo),
            );
            let post = &mut self.pops[g.post];
            let acc = match g.sign {
                Sign::Excitatory => &mut post.input_exc,
                Sign::Inhibitory => &mut post.input_inh,
            };
            propagate(&g.matrix, &self.scratch, acc)?;
        }
        self.state.step_index += 1;
        Ok(newly)
    }

    /// Runs the remaining steps of the configured duration.
    pub fn run_to_end(mut self) -> Result<RunResult> {
        let start = Instant::now();
        let steps = self.spec.steps();
        while self.state.step_index < steps {
            self.step()?;
        }
        let avg_spike = self
            .spec
            .populations
            .iter()
            .map(|p| {
                let count = self.raster.count(&p.name)?;
                Ok((p.name.clone(), rate(count, p.size, self.spec.duration_ms)))
            })
            .collect::<Result<_>>()?;
        Ok(RunResult {
            avg_spike,
            sum_nans: self.state.sum_nans(),
            steps,
            raster: self.raster,
            wall_time_ms: start.elapsed().as_secs_f64() * 1000.0,
        })
    }
}

/// Simulates `spec` for its full duration.
pub fn run(spec: &NetworkSpec, storage: StorageChoice) -> Result<RunResult> {
    Simulation::new(spec, storage)?.run_to_end()
}
