use crate::connectivity::{DenseMatrix, SparseCrs, SynapseRows};
use crate::error::{Error, Result};
use crate::Real;

/// Synapse group storage chosen for a run.
#[derive(Debug, Clone)]
pub enum Connectivity {
    Dense(DenseMatrix),
    Sparse(SparseCrs),
}

impl SynapseRows for Connectivity {
    fn n_pre(&self) -> usize {
        match self {
            Connectivity::Dense(m) => m.n_pre,
            Connectivity::Sparse(m) => m.n_pre,
        }
    }

    fn n_post(&self) -> usize {
        match self {
            Connectivity::Dense(m) => m.n_post,
            Connectivity::Sparse(m) => m.n_post,
        }
    }

    fn for_each_in_row<F: FnMut(usize, Real)>(&self, i: usize, f: F) {
        match self {
            Connectivity::Dense(m) => m.for_each_in_row(i, f),
            Connectivity::Sparse(m) => m.for_each_in_row(i, f),
        }
    }
}

/// Adds the weights of every spiking pre-synaptic neuron into `acc`.
///
/// Spikes are visited in ascending order and each row in ascending
/// post-synaptic order, whatever the storage, so dense and sparse matrices
/// with the same non-zeros produce bit-identical sums.
pub fn propagate<M: SynapseRows>(matrix: &M, spikes: &[usize], acc: &mut [Real]) -> Result<()> {
    if acc.len() != matrix.n_post() {
        return Err(Error::InvalidArgument(format!(
            "accumulator has {} entries, matrix has {} post-synaptic neurons",
            acc.len(),
            matrix.n_post()
        )));
    }
    if let Some(&bad) = spikes.iter().find(|&&i| i >= matrix.n_pre()) {
        return Err(Error::IndexOutOfRange { index: bad, len: matrix.n_pre() });
    }
    let mut sorted;
    let spikes = if spikes.windows(2).all(|w| w[0] <= w[1]) {
        spikes
    } else {
        sorted = spikes.to_vec();
        sorted.sort_unstable();
        &sorted[..]
    };
    for &i in spikes {
        matrix.for_each_in_row(i, |j, w| acc[j] += w);
    }
    Ok(())
}
