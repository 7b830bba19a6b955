//! Per-population state and single-step dynamics.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::model::{CondLifParams, IzhikevichParams, NeuronModel, NeuronPopulation};
use crate::rng::{self, StreamRng};
use crate::Real;

pub const IZHIKEVICH_PEAK: Real = 30.0;

/// State variables of one population.
#[derive(Debug, Clone, PartialEq)]
pub enum PopulationState {
    Izhikevich { v: Vec<Real>, u: Vec<Real> },
    Poisson,
    CondLif { v: Vec<Real>, g_exc: Vec<Real>, g_inh: Vec<Real> },
}

impl PopulationState {
    pub fn initial(pop: &NeuronPopulation) -> Self {
        match &pop.model {
            NeuronModel::Izhikevich(p) => {
                let v = vec![-65.0; pop.size];
                let u = p.b.iter().zip(&v).map(|(b, v)| b * v).collect();
                PopulationState::Izhikevich { v, u }
            }
            NeuronModel::PoissonSource(_) => PopulationState::Poisson,
            NeuronModel::CondLIF(p) => PopulationState::CondLif {
                v: vec![p.e_leak; pop.size],
                g_exc: vec![0.0; pop.size],
                g_inh: vec![0.0; pop.size],
            },
        }
    }

    /// True when any state variable of neuron `i` is NaN or infinite.
    pub fn non_finite(&self, i: usize) -> bool {
        match self {
            PopulationState::Izhikevich { v, u } => !(v[i].is_finite() && u[i].is_finite()),
            PopulationState::Poisson => false,
            PopulationState::CondLif { v, g_exc, g_inh } => {
                !(v[i].is_finite() && g_exc[i].is_finite() && g_inh[i].is_finite())
            }
        }
    }
}

/// One Izhikevich update: two half steps for `v`, one full step for `u`.
#[inline]
pub fn izhikevich_step(v: &mut Real, u: &mut Real, a: Real, b: Real, input: Real, dt: Real) {
    let half = 0.5 * dt;
    *v += half * (0.04 * *v * *v + 5.0 * *v + 140.0 - *u + input);
    *v += half * (0.04 * *v * *v + 5.0 * *v + 140.0 - *u + input);
    *u += dt * a * (b * *v - *u);
}

/// One forward-Euler step of the conductance-based LIF membrane.
#[inline]
pub fn cond_lif_step(v: &mut Real, g_exc: Real, g_inh: Real, p: &CondLifParams, dt: Real) {
    let dv = (p.e_leak - *v) / p.tau_m + g_exc * (p.e_exc - *v) + g_inh * (p.e_inh - *v);
    *v += dt * dv;
}

/// A population with its parameters, state, synaptic inputs and noise stream.
#[derive(Debug, Clone)]
pub(crate) struct PopulationRuntime {
    pub model: NeuronModel,
    /// Inputs delivered by excitatory and inhibitory groups during the last step.
    pub input_exc: Vec<Real>,
    pub input_inh: Vec<Real>,
    /// Constant current added to Izhikevich neurons every step.
    pub bias: Vec<Real>,
    pub rng: StreamRng,
    pub fired: Vec<usize>,
}

impl PopulationRuntime {
    pub fn new(pop: &NeuronPopulation, global_seed: u64) -> Self {
        let n = pop.size;
        PopulationRuntime {
            model: pop.model.clone(),
            input_exc: vec![0.0; n],
            input_inh: vec![0.0; n],
            bias: vec![0.0; n],
            rng: rng::stream(global_seed.wrapping_add(pop.seed), &format!("pop/{}/runtime", pop.name)),
            fired: Vec::new(),
        }
    }

    /// Integrates one step, consuming the synaptic inputs.
    pub fn advance(&mut self, state: &mut PopulationState, dt: f64) {
        let dt_r = dt as Real;
        match (&self.model, state) {
            (NeuronModel::Izhikevich(p), PopulationState::Izhikevich { v, u }) => {
                let IzhikevichParams { a, b, input_noise_amplitude: noise, .. } = p;
                for i in 0..v.len() {
                    let z: f64 = self.rng.sample(StandardNormal);
                    let input = self.bias[i] + noise[i] * z as Real + self.input_exc[i] + self.input_inh[i];
                    izhikevich_step(&mut v[i], &mut u[i], a[i], b[i], input, dt_r);
                }
            }
            (NeuronModel::CondLIF(p), PopulationState::CondLif { v, g_exc, g_inh }) => {
                let decay = (-dt_r / p.tau_syn).exp();
                for i in 0..v.len() {
                    g_exc[i] += self.input_exc[i];
                    g_inh[i] -= self.input_inh[i];
                    cond_lif_step(&mut v[i], g_exc[i], g_inh[i], p, dt_r);
                    g_exc[i] *= decay;
                    g_inh[i] *= decay;
                }
            }
            (NeuronModel::PoissonSource(_), PopulationState::Poisson) => {}
            _ => unreachable!("state built from the same model"),
        }
        self.input_exc.iter_mut().for_each(|x| *x = 0.0);
        self.input_inh.iter_mut().for_each(|x| *x = 0.0);
    }

    /// Collects neurons at or above threshold into `fired` and resets them.
    ///
    /// A NaN membrane compares as a crossing, so a corrupted neuron keeps
    /// firing into its targets instead of falling silent.
    pub fn fire(&mut self, state: &mut PopulationState, dt: f64) {
        self.fired.clear();
        match (&self.model, state) {
            (NeuronModel::Izhikevich(p), PopulationState::Izhikevich { v, u }) => {
                for i in 0..v.len() {
                    if v[i] >= IZHIKEVICH_PEAK || v[i].is_nan() {
                        self.fired.push(i);
                        v[i] = p.c[i];
                        u[i] += p.d[i];
                    }
                }
            }
            (NeuronModel::CondLIF(p), PopulationState::CondLif { v, .. }) => {
                for (i, vi) in v.iter_mut().enumerate() {
                    if *vi >= p.v_thresh || vi.is_nan() {
                        self.fired.push(i);
                        *vi = p.v_reset;
                    }
                }
            }
            (NeuronModel::PoissonSource(p), PopulationState::Poisson) => {
                let prob = p.rate * dt / 1000.0;
                for i in 0..self.bias.len() {
                    if self.rng.random::<f64>() < prob {
                        self.fired.push(i);
                    }
                }
            }
            _ => unreachable!("state built from the same model"),
        }
    }
}
