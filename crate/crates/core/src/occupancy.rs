//! Analytic GPU occupancy with limiter attribution.
//!
//! Resident blocks per SM are bounded by four resources: warp slots, block
//! slots, shared memory and registers. Registers are allocated per warp and
//! rounded up to `reg_alloc_unit`; shared memory per block, rounded up to
//! `shared_alloc_unit`.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct DeviceSpec {
    pub name: String,
    pub warp_size: u32,
    pub max_warps_per_sm: u32,
    pub max_blocks_per_sm: u32,
    pub max_threads_per_block: u32,
    /// Bytes.
    pub shared_mem_per_sm: u32,
    pub regs_per_sm: u32,
    pub reg_alloc_unit: u32,
    pub shared_alloc_unit: u32,
}

impl DeviceSpec {
    pub fn check(&self) -> Result<()> {
        let fields = [
            self.warp_size,
            self.max_warps_per_sm,
            self.max_blocks_per_sm,
            self.max_threads_per_block,
            self.shared_mem_per_sm,
            self.regs_per_sm,
            self.reg_alloc_unit,
            self.shared_alloc_unit,
        ];
        if fields.contains(&0) {
            return Err(Error::InvalidDevice("all limits must be positive".into()));
        }
        if u64::from(self.max_warps_per_sm) * u64::from(self.warp_size) < u64::from(self.max_threads_per_block) {
            return Err(Error::InvalidDevice("maxWarpsPerSM * warpSize is below maxThreadsPerBlock".into()));
        }
        Ok(())
    }
}

/// Compute capability 3.0 (Kepler GK10x) per-SM limits.
pub fn cc30() -> DeviceSpec {
    DeviceSpec {
        name: "cc30".into(),
        warp_size: 32,
        max_warps_per_sm: 64,
        max_blocks_per_sm: 16,
        max_threads_per_block: 1024,
        shared_mem_per_sm: 49152,
        regs_per_sm: 65536,
        reg_alloc_unit: 256,
        shared_alloc_unit: 256,
    }
}

/// Compute capability 3.5 (Kepler GK110); same per-SM budget as 3.0.
fn cc35() -> DeviceSpec {
    DeviceSpec { name: "cc35".into(), ..cc30() }
}

/// Compute capability 2.0 (Fermi).
fn cc20() -> DeviceSpec {
    DeviceSpec {
        name: "cc20".into(),
        warp_size: 32,
        max_warps_per_sm: 48,
        max_blocks_per_sm: 8,
        max_threads_per_block: 1024,
        shared_mem_per_sm: 49152,
        regs_per_sm: 32768,
        reg_alloc_unit: 64,
        shared_alloc_unit: 128,
    }
}

pub const PRESETS: [&str; 3] = ["cc20", "cc30", "cc35"];

pub fn device_preset(name: &str) -> Result<DeviceSpec> {
    match name {
        "cc20" => Ok(cc20()),
        "cc30" => Ok(cc30()),
        "cc35" => Ok(cc35()),
        other => Err(Error::UnknownPreset(other.into())),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct KernelSpec {
    pub threads_per_block: u32,
    pub regs_per_thread: u32,
    /// Bytes.
    pub shared_mem_per_block: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Limiter {
    Warps,
    Blocks,
    Shared,
    Registers,
}

impl fmt::Display for Limiter {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Limiter::Warps => "warps",
            Limiter::Blocks => "blocks",
            Limiter::Shared => "shared",
            Limiter::Registers => "registers",
        })
    }
}

/// Blocks per SM allowed by each resource; `None` is unbounded.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Limits {
    pub warps: u32,
    pub blocks: u32,
    pub shared: Option<u32>,
    pub registers: Option<u32>,
}

impl Limits {
    pub fn get(&self, l: Limiter) -> Option<u32> {
        match l {
            Limiter::Warps => Some(self.warps),
            Limiter::Blocks => Some(self.blocks),
            Limiter::Shared => self.shared,
            Limiter::Registers => self.registers,
        }
    }

    fn all(&self) -> [(Limiter, Option<u32>); 4] {
        [
            (Limiter::Warps, Some(self.warps)),
            (Limiter::Blocks, Some(self.blocks)),
            (Limiter::Shared, self.shared),
            (Limiter::Registers, self.registers),
        ]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct OccupancyResult {
    pub warps_per_block: u32,
    pub limits: Limits,
    pub active_blocks: u32,
    pub active_warps: u32,
    pub occupancy: f64,
    /// Every resource whose limit equals `active_blocks`.
    pub limiters: Vec<Limiter>,
}

fn round_up(x: u64, unit: u64) -> u64 {
    x.div_ceil(unit) * unit
}

/// Occupancy of `k` on one SM of `dev`.
///
/// A block too large for the SM's shared memory or registers gives zero
/// active blocks with that resource named as the limiter.
pub fn occupancy(dev: &DeviceSpec, k: &KernelSpec) -> Result<OccupancyResult> {
    dev.check()?;
    if k.threads_per_block == 0 {
        return Err(Error::InvalidArgument("threadsPerBlock must be at least 1".into()));
    }
    if k.threads_per_block > dev.max_threads_per_block {
        return Err(Error::ThreadsExceedDevice { threads: k.threads_per_block, max: dev.max_threads_per_block });
    }
    let warps_per_block = k.threads_per_block.div_ceil(dev.warp_size);

    let shared = (k.shared_mem_per_block > 0).then(|| {
        let per_block = round_up(u64::from(k.shared_mem_per_block), u64::from(dev.shared_alloc_unit));
        (u64::from(dev.shared_mem_per_sm) / per_block) as u32
    });
    let registers = (k.regs_per_thread > 0).then(|| {
        let per_warp = round_up(
            u64::from(k.regs_per_thread) * u64::from(dev.warp_size),
            u64::from(dev.reg_alloc_unit),
        );
        (u64::from(dev.regs_per_sm) / (per_warp * u64::from(warps_per_block))) as u32
    });
    let limits = Limits {
        warps: dev.max_warps_per_sm / warps_per_block,
        blocks: dev.max_blocks_per_sm,
        shared,
        registers,
    };

    let active_blocks = limits.all().iter().filter_map(|(_, v)| *v).min().expect("warps and blocks are bounded");
    let limiters = limits
        .all()
        .iter()
        .filter(|(_, v)| *v == Some(active_blocks))
        .map(|(l, _)| *l)
        .collect();
    let active_warps = active_blocks * warps_per_block;
    Ok(OccupancyResult {
        warps_per_block,
        limits,
        active_blocks,
        active_warps,
        occupancy: f64::from(active_warps) / f64::from(dev.max_warps_per_sm),
        limiters,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct Recommendation {
    pub block_size: u32,
    pub result: OccupancyResult,
    /// Occupancy of every candidate block size, ascending.
    pub curve: Vec<(u32, f64)>,
}

/// Tries every multiple of the warp size up to the per-block thread limit
/// and returns the one with the highest occupancy; ties go to the largest.
pub fn recommend_block_size(dev: &DeviceSpec, regs_per_thread: u32, shared_mem_per_block: u32) -> Result<Recommendation> {
    dev.check()?;
    let mut best: Option<(u32, OccupancyResult)> = None;
    let mut curve = Vec::new();
    for threads in (dev.warp_size..=dev.max_threads_per_block).step_by(dev.warp_size as usize) {
        let r = occupancy(dev, &KernelSpec { threads_per_block: threads, regs_per_thread, shared_mem_per_block })?;
        curve.push((threads, r.occupancy));
        if r.active_blocks == 0 {
            continue;
        }
        if best.as_ref().is_none_or(|(_, b)| r.occupancy >= b.occupancy) {
            best = Some((threads, r));
        }
    }
    let (block_size, result) = best.ok_or(Error::NoFeasibleBlockSize)?;
    Ok(Recommendation { block_size, result, curve })
}
