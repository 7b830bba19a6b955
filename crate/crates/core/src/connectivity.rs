//! Dense and compressed-row-storage (CRS) synapse matrices.
//!
//! Rows are pre-synaptic neurons and columns post-synaptic neurons. A weight
//! of exactly zero means "no synapse" in both layouts, so the generators never
//! draw zero.

use std::fmt;

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::Real;

/// Sign applied to drawn weight magnitudes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Sign {
    Excitatory,
    Inhibitory,
}

impl Sign {
    pub fn factor(self) -> f64 {
        match self {
            Sign::Excitatory => 1.0,
            Sign::Inhibitory => -1.0,
        }
    }
}

/// Distribution of weight magnitudes, before the sign is applied.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum WeightDist {
    /// Uniform on `(lo, hi]`; open at `lo` so `lo = 0` never yields a zero weight.
    Uniform { lo: f64, hi: f64 },
    Constant { w: f64 },
}

impl WeightDist {
    pub fn check(&self) -> std::result::Result<(), String> {
        match *self {
            WeightDist::Uniform { lo, hi } => {
                if !(lo.is_finite() && hi.is_finite()) {
                    Err("uniform bounds must be finite".into())
                } else if lo < 0.0 {
                    Err("uniform lower bound must be >= 0".into())
                } else if hi <= lo {
                    Err("uniform upper bound must exceed lower bound".into())
                } else {
                    Ok(())
                }
            }
            WeightDist::Constant { w } => {
                if w.is_finite() && w > 0.0 {
                    Ok(())
                } else {
                    Err("constant weight must be finite and > 0".into())
                }
            }
        }
    }

    fn draw<R: Rng>(&self, rng: &mut R) -> f64 {
        match *self {
            WeightDist::Uniform { lo, hi } => {
                // random() is [0, 1); flip it to (0, 1].
                let u = 1.0 - rng.random::<f64>();
                lo + (hi - lo) * u
            }
            WeightDist::Constant { w } => w,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct DenseMatrix {
    pub n_pre: usize,
    pub n_post: usize,
    /// Row-major by pre-synaptic index.
    pub weights: Vec<Real>,
}

impl DenseMatrix {
    pub fn new(n_pre: usize, n_post: usize, weights: Vec<Real>) -> Result<Self> {
        let m = DenseMatrix { n_pre, n_post, weights };
        m.check()?;
        Ok(m)
    }

    pub fn zeros(n_pre: usize, n_post: usize) -> Self {
        DenseMatrix { n_pre, n_post, weights: vec![0.0; n_pre * n_post] }
    }

    pub fn from_rows(rows: &[Vec<Real>]) -> Result<Self> {
        let n_post = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != n_post) {
            return Err(Error::InvalidArgument("ragged rows".into()));
        }
        Self::new(rows.len(), n_post, rows.concat())
    }

    pub fn check(&self) -> Result<()> {
        if self.n_pre == 0 || self.n_post == 0 {
            return Err(Error::InvalidArgument("matrix dimensions must be positive".into()));
        }
        if self.weights.len() != self.n_pre * self.n_post {
            return Err(Error::InvalidArgument(format!(
                "expected {} weights for a {}x{} matrix, got {}",
                self.n_pre * self.n_post,
                self.n_pre,
                self.n_post,
                self.weights.len()
            )));
        }
        if let Some(pos) = self.weights.iter().position(|w| !w.is_finite()) {
            return Err(Error::InvalidArgument(format!("non-finite weight at flat index {pos}")));
        }
        Ok(())
    }

    pub fn row(&self, i: usize) -> &[Real] {
        &self.weights[i * self.n_post..(i + 1) * self.n_post]
    }

    pub fn get(&self, i: usize, j: usize) -> Real {
        self.weights[i * self.n_post + j]
    }

    pub fn nnz(&self) -> usize {
        self.weights.iter().filter(|&&w| w != 0.0).count()
    }
}

/// Compressed row storage: non-zero conductances, their post-synaptic
/// indices, and the offset where each pre-synaptic row starts.
///
/// `row_start` holds `n_pre + 1` offsets. Canonical form keeps `post_ind`
/// strictly increasing inside every row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct SparseCrs {
    pub n_pre: usize,
    pub n_post: usize,
    pub n_nz: usize,
    pub g_values: Vec<Real>,
    pub post_ind: Vec<usize>,
    pub row_start: Vec<usize>,
}

impl SparseCrs {
    pub fn new(
        n_pre: usize,
        n_post: usize,
        g_values: Vec<Real>,
        post_ind: Vec<usize>,
        row_start: Vec<usize>,
    ) -> Result<Self> {
        let s = SparseCrs { n_pre, n_post, n_nz: g_values.len(), g_values, post_ind, row_start };
        s.check()?;
        Ok(s)
    }

    /// Checks every structural invariant of canonical CRS.
    pub fn check(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::Structure(msg));
        if self.n_pre == 0 || self.n_post == 0 {
            return fail("matrix dimensions must be positive".into());
        }
        if self.g_values.len() != self.n_nz || self.post_ind.len() != self.n_nz {
            return fail(format!(
                "nNZ = {} but gValues has {} and postInd has {} entries",
                self.n_nz,
                self.g_values.len(),
                self.post_ind.len()
            ));
        }
        if self.row_start.len() != self.n_pre + 1 {
            return fail(format!(
                "rowStart has {} entries, expected nPre + 1 = {}",
                self.row_start.len(),
                self.n_pre + 1
            ));
        }
        if self.row_start[0] != 0 {
            return fail("rowStart[0] must be 0".into());
        }
        if let Some(i) = self.row_start.windows(2).position(|w| w[1] < w[0]) {
            return fail(format!("rowStart decreases between rows {} and {}", i, i + 1));
        }
        if self.row_start[self.n_pre] != self.n_nz {
            return fail(format!(
                "rowStart[nPre] = {} but nNZ = {}",
                self.row_start[self.n_pre], self.n_nz
            ));
        }
        for i in 0..self.n_pre {
            let cols = &self.post_ind[self.row_start[i]..self.row_start[i + 1]];
            if let Some(&j) = cols.iter().find(|&&j| j >= self.n_post) {
                return fail(format!("postInd {j} in row {i} is not below nPost = {}", self.n_post));
            }
            if cols.windows(2).any(|w| w[1] <= w[0]) {
                return fail(format!("postInd not strictly increasing in row {i}"));
            }
        }
        if let Some(k) = self.g_values.iter().position(|g| !g.is_finite() || *g == 0.0) {
            return fail(format!("gValues[{k}] is zero or non-finite"));
        }
        Ok(())
    }

    pub fn row(&self, i: usize) -> (&[usize], &[Real]) {
        let span = self.row_start[i]..self.row_start[i + 1];
        (&self.post_ind[span.clone()], &self.g_values[span])
    }
}

/// Row access shared by both layouts; visits non-zero entries of row `i`
/// in ascending post-synaptic order.
pub trait SynapseRows {
    fn n_pre(&self) -> usize;
    fn n_post(&self) -> usize;
    fn for_each_in_row<F: FnMut(usize, Real)>(&self, i: usize, f: F);
}

impl SynapseRows for DenseMatrix {
    fn n_pre(&self) -> usize {
        self.n_pre
    }

    fn n_post(&self) -> usize {
        self.n_post
    }

    fn for_each_in_row<F: FnMut(usize, Real)>(&self, i: usize, mut f: F) {
        for (j, &w) in self.row(i).iter().enumerate() {
            if w != 0.0 {
                f(j, w);
            }
        }
    }
}

impl SynapseRows for SparseCrs {
    fn n_pre(&self) -> usize {
        self.n_pre
    }

    fn n_post(&self) -> usize {
        self.n_post
    }

    fn for_each_in_row<F: FnMut(usize, Real)>(&self, i: usize, mut f: F) {
        let (cols, vals) = self.row(i);
        for (&j, &w) in cols.iter().zip(vals) {
            f(j, w);
        }
    }
}

/// Each pre-synaptic row gets exactly `k` targets drawn uniformly without
/// replacement; weights come from `dist` and are multiplied by `sign`.
pub fn gen_fixed_outdegree(
    n_pre: usize,
    n_post: usize,
    k: usize,
    dist: WeightDist,
    sign: Sign,
    seed: u64,
) -> Result<DenseMatrix> {
    if n_pre == 0 || n_post == 0 {
        return Err(Error::InvalidArgument("matrix dimensions must be positive".into()));
    }
    if k == 0 || k > n_post {
        return Err(Error::InvalidArgument(format!(
            "out-degree {k} must lie in 1..={n_post}"
        )));
    }
    dist.check().map_err(Error::InvalidArgument)?;

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut m = DenseMatrix::zeros(n_pre, n_post);
    let mut targets = Vec::with_capacity(k);
    for i in 0..n_pre {
        targets.clear();
        targets.extend(index::sample(&mut rng, n_post, k).iter());
        targets.sort_unstable();
        for &j in &targets {
            let w = (sign.factor() * dist.draw(&mut rng)) as Real;
            if w == 0.0 {
                return Err(Error::InvalidArgument("weight magnitude underflows to zero".into()));
            }
            m.weights[i * n_post + j] = w;
        }
    }
    Ok(m)
}

pub fn to_sparse(d: &DenseMatrix) -> SparseCrs {
    let mut g_values = Vec::new();
    let mut post_ind = Vec::new();
    let mut row_start = Vec::with_capacity(d.n_pre + 1);
    row_start.push(0);
    for i in 0..d.n_pre {
        for (j, &w) in d.row(i).iter().enumerate() {
            if w != 0.0 {
                g_values.push(w);
                post_ind.push(j);
            }
        }
        row_start.push(g_values.len());
    }
    SparseCrs { n_pre: d.n_pre, n_post: d.n_post, n_nz: g_values.len(), g_values, post_ind, row_start }
}

pub fn to_dense(s: &SparseCrs) -> Result<DenseMatrix> {
    s.check()?;
    let mut d = DenseMatrix::zeros(s.n_pre, s.n_post);
    for i in 0..s.n_pre {
        let (cols, vals) = s.row(i);
        for (&j, &w) in cols.iter().zip(vals) {
            d.weights[i * s.n_post + j] = w;
        }
    }
    Ok(d)
}

/// Stored elements for sparse storage: `2 * nNZ + nPostSynN`.
pub fn mem_sparse(n_nz: u64, n_post: u64) -> u64 {
    2 * n_nz + n_post
}

/// Stored elements for dense storage: `nPreSynN * nPostSynN`.
pub fn mem_dense(n_pre: u64, n_post: u64) -> u64 {
    n_pre * n_post
}

/// Multiplies every stored weight by a positive scale, leaving the structure alone.
pub trait Scale: Sized {
    fn scale(&self, g_scale: f64) -> Result<Self>;
}

fn scale_values(values: &[Real], g_scale: f64, keep_zero: bool) -> Result<Vec<Real>> {
    if !(g_scale.is_finite() && g_scale > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "gScale must be finite and > 0, got {g_scale}"
        )));
    }
    values
        .iter()
        .map(|&w| {
            if keep_zero && w == 0.0 {
                return Ok(0.0);
            }
            let scaled = (f64::from(w) * g_scale) as Real;
            if !scaled.is_finite() || scaled == 0.0 {
                return Err(Error::InvalidArgument(format!(
                    "weight {w} scaled by {g_scale} leaves the representable range"
                )));
            }
            Ok(scaled)
        })
        .collect()
}

impl Scale for DenseMatrix {
    fn scale(&self, g_scale: f64) -> Result<Self> {
        Ok(DenseMatrix {
            n_pre: self.n_pre,
            n_post: self.n_post,
            weights: scale_values(&self.weights, g_scale, true)?,
        })
    }
}

impl Scale for SparseCrs {
    fn scale(&self, g_scale: f64) -> Result<Self> {
        Ok(SparseCrs {
            g_values: scale_values(&self.g_values, g_scale, false)?,
            ..self.clone()
        })
    }
}

pub fn scale<M: Scale>(m: &M, g_scale: f64) -> Result<M> {
    m.scale(g_scale)
}

/// Element counts of both layouts for a fixed out-degree group.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct MemReport {
    pub n_pre: u64,
    pub n_post: u64,
    pub n_conn: u64,
    pub n_nz: u64,
    pub sparse: u64,
    pub dense: u64,
    pub ratio: f64,
    /// Offsets actually kept by [`SparseCrs`]: `nPre + 1`.
    pub stored_row_offsets: u64,
}

impl MemReport {
    pub fn new(n_pre: u64, n_post: u64, n_conn: u64) -> Result<Self> {
        if n_conn > n_post {
            return Err(Error::InvalidArgument(format!(
                "nConn = {n_conn} exceeds nPost = {n_post}"
            )));
        }
        let n_nz = n_pre * n_conn;
        let sparse = mem_sparse(n_nz, n_post);
        let dense = mem_dense(n_pre, n_post);
        let ratio = if dense == 0 { f64::INFINITY } else { sparse as f64 / dense as f64 };
        Ok(MemReport { n_pre, n_post, n_conn, n_nz, sparse, dense, ratio, stored_row_offsets: n_pre + 1 })
    }
}

impl fmt::Display for MemReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "nPre = {}, nPost = {}, nConn = {}, nNZ = {}", self.n_pre, self.n_post, self.n_conn, self.n_nz)?;
        writeln!(f, "sparse: {}  (2 * nNZ + nPostSynN) [1]", self.sparse)?;
        writeln!(f, "dense: {}  (nPreSynN * nPostSynN)", self.dense)?;
        writeln!(f, "sparse/dense: {}", self.ratio)?;
        write!(
            f,
            "[1] the row-offset array is counted as nPostSynN elements; the in-memory \
             layout keeps nPre + 1 = {} offsets",
            self.stored_row_offsets
        )
    }
}
