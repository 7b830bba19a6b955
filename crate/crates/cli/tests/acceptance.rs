//! End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
//! exits non-zero if any fails.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde_json::{json, Value};
use synscale::occupancy::{DeviceSpec, KernelSpec};
use synscale::{device_preset, fit_gscale, mem_dense, mem_sparse, occupancy, predict, MemReport};

const BIN: &str = env!("CARGO_BIN_EXE_synscale");

type Check = std::result::Result<String, String>;

struct Ctx {
    root: PathBuf,
    /// Commands already run, replayed by the determinism check.
    replays: Vec<(Vec<String>, PathBuf, Vec<&'static str>)>,
}

impl Ctx {
    fn cli(&self, args: &[&str]) -> Output {
        Command::new(BIN).args(args).current_dir(&self.root).env_remove("SYNSCALE_OUT_DIR").output().unwrap()
    }

    fn config(&self, name: &str, value: &Value) -> String {
        fs::write(self.root.join(name), serde_json::to_string_pretty(value).unwrap()).unwrap();
        name.to_string()
    }

    /// Runs a command writing into `out` and remembers it for replay.
    fn recorded(&mut self, args: &[&str], out: &str, files: Vec<&'static str>) -> Result<Output, String> {
        let mut full: Vec<String> = args.iter().map(|s| s.to_string()).collect();
        full.extend(["--out".into(), out.into()]);
        let refs: Vec<&str> = full.iter().map(String::as_str).collect();
        let o = self.cli(&refs);
        if o.status.code() != Some(0) {
            return Err(format!("`{}` exited {:?}: {}", refs.join(" "), o.status.code(), String::from_utf8_lossy(&o.stderr)));
        }
        self.replays.push((full, self.root.join(out), files));
        Ok(o)
    }

    fn read(&self, path: &str) -> String {
        fs::read_to_string(self.root.join(path)).unwrap()
    }
}

fn ensure(ok: bool, msg: impl Into<String>) -> Result<(), String> {
    if ok { Ok(()) } else { Err(msg.into()) }
}

fn read_optima(text: &str) -> Vec<(f64, f64)> {
    text.lines()
        .skip(1)
        .map(|l| {
            let (n, g) = l.split_once(',').unwrap();
            (n.parse().unwrap(), g.parse().unwrap())
        })
        .collect()
}

fn inversions(optima: &[(f64, f64)]) -> usize {
    optima.windows(2).filter(|w| w[1].1 > w[0].1).count()
}

fn fit_params(fit_json: &str) -> Result<(f64, f64, f64, f64), String> {
    let v: Value = serde_json::from_str(fit_json).unwrap();
    let f = &v["fit"];
    let get = |k: &str| f[k].as_f64().ok_or(format!("fit.json has no {k}"));
    Ok((get("k1")?, get("k2")?, get("k3")?, f["mapePercent"].as_f64().unwrap_or(f64::NAN)))
}

fn storage_equivalence(ctx: &mut Ctx) -> Check {
    let cfg = ctx.config(
        "c1.json",
        &json!({"network": {"kind": "izhikevich", "nNeurons": 1000, "nConn": 100, "seed": 42}}),
    );
    ctx.recorded(&["simulate", &cfg, "--storage", "dense"], "c1_dense", vec!["raster.csv"])?;
    ctx.recorded(&["simulate", &cfg, "--storage", "sparse"], "c1_sparse", vec!["raster.csv"])?;
    let d = ctx.read("c1_dense/raster.csv");
    let s = ctx.read("c1_sparse/raster.csv");
    let spikes = d.lines().count() - 1;
    ensure(spikes > 0, "no spikes")?;
    ensure(d == s, "dense and sparse rasters differ")?;
    Ok(format!("{spikes} spikes, rasters byte-identical"))
}

fn memory_formulas(ctx: &mut Ctx) -> Check {
    let o = ctx.cli(&["mem-report", "--n-pre", "1000", "--n-post", "1000", "--n-conn", "100"]);
    let text = String::from_utf8_lossy(&o.stdout);
    ensure(text.contains("sparse: 201000") && text.contains("dense: 1000000"), format!("report: {text}"))?;
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut mismatches = 0;
    for _ in 0..1000 {
        let n_pre: u64 = rng.random_range(1..=20_000);
        let n_post: u64 = rng.random_range(1..=20_000);
        let n_conn: u64 = rng.random_range(0..=n_post);
        let nnz = n_pre * n_conn;
        let r = MemReport::new(n_pre, n_post, n_conn).map_err(|e| e.to_string())?;
        if mem_sparse(nnz, n_post) != 2 * nnz + n_post
            || mem_dense(n_pre, n_post) != n_pre * n_post
            || r.sparse != 2 * nnz + n_post
            || r.dense != n_pre * n_post
        {
            mismatches += 1;
        }
    }
    ensure(mismatches == 0, format!("{mismatches} mismatches"))?;
    Ok("201000 / 1000000 printed, 1000 random cases agree".into())
}

fn enumerate(dev: &DeviceSpec, k: &KernelSpec) -> u32 {
    let warps = k.threads_per_block.div_ceil(dev.warp_size);
    let shared = k.shared_mem_per_block.div_ceil(dev.shared_alloc_unit) * dev.shared_alloc_unit;
    let regs = (k.regs_per_thread * dev.warp_size).div_ceil(dev.reg_alloc_unit) * dev.reg_alloc_unit;
    (0..=dev.max_blocks_per_sm)
        .rev()
        .find(|&b| {
            b * warps <= dev.max_warps_per_sm && b * shared <= dev.shared_mem_per_sm && b * warps * regs <= dev.regs_per_sm
        })
        .unwrap()
}

fn occupancy_oracle(_: &mut Ctx) -> Check {
    let dev = device_preset("cc30").map_err(|e| e.to_string())?;
    let (mut cases, mut mismatches) = (0, 0);
    for t in (32..=1024u32).step_by(32) {
        for r in (0..=128u32).step_by(8) {
            for s in (0..=48 * 1024u32).step_by(1024) {
                let k = KernelSpec { threads_per_block: t, regs_per_thread: r, shared_mem_per_block: s };
                let got = occupancy(&dev, &k).map_err(|e| e.to_string())?;
                cases += 1;
                if got.active_blocks != enumerate(&dev, &k) {
                    mismatches += 1;
                }
            }
        }
    }
    ensure(mismatches == 0, format!("{mismatches} of {cases} mismatch"))?;
    for (t, r, want) in [(256, 32, 1.0), (256, 64, 0.5), (32, 8, 0.25)] {
        let k = KernelSpec { threads_per_block: t, regs_per_thread: r, shared_mem_per_block: 0 };
        let got = occupancy(&dev, &k).map_err(|e| e.to_string())?.occupancy;
        ensure(got == want, format!("threads {t} regs {r}: occupancy {got}, want {want}"))?;
    }
    Ok(format!("{cases} kernels, 0 mismatches, examples 1.0/0.5/0.25"))
}

fn izhikevich_sweep(ctx: &Ctx, name: &str, n_conn: Vec<usize>, g: Vec<f64>, workers: usize) {
    ctx.config(
        &format!("{name}.json"),
        &json!({
            "network": {"kind": "izhikevich", "nNeurons": 1000, "nConn": 1000, "seed": 42},
            "sweep": {"nConnValues": n_conn, "gScaleValues": g, "targetPopulation": "izhikevich",
                      "refNConn": 1000, "refGScale": 1.0},
            "parallelism": workers
        }),
    );
}

fn calibration_shape(ctx: &mut Ctx) -> Check {
    let n_conn: Vec<usize> = (100..=1000).step_by(50).collect();
    let grid: Vec<f64> = (-1..=10).map(|k| 1.2f64.powi(k)).collect();
    izhikevich_sweep(ctx, "c4", n_conn, grid, 4);
    ctx.recorded(&["calibrate", "c4.json"], "c4", vec!["simulation_result.out", "optima.csv", "fit.json"])?;
    let optima = read_optima(&ctx.read("c4/optima.csv"));
    ensure(optima.len() == 19, format!("{} optima", optima.len()))?;
    let inv = inversions(&optima);
    let (k1, k2, k3, m) = fit_params(&ctx.read("c4/fit.json"))?;
    ensure(inv <= 2, format!("{inv} inversions in {optima:?}"))?;
    ensure(k1 > 0.0, format!("k1 = {k1}"))?;
    ensure(m <= 10.0, format!("MAPE {m:.2}%"))?;
    Ok(format!("{inv} inversions, k1 = {k1:.1}, k2 = {k2:.1}, k3 = {k3:.3}, MAPE {m:.2}%"))
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 { v[n / 2] } else { 0.5 * (v[n / 2 - 1] + v[n / 2]) }
}

fn fit_recovery(_: &mut Ctx) -> Check {
    let (k1, k2, k3) = (1.318e3, 1.099e2, -2.800e-1);
    let clean: Vec<(f64, f64)> = (100..=1000).step_by(50).map(|x| x as f64).map(|x| (x, k1 / (k2 + x) + k3)).collect();
    let rel = |a: f64, b: f64| ((a - b) / b).abs();
    let f = fit_gscale(&clean).map_err(|e| e.to_string())?;
    let worst = rel(f.k1, k1).max(rel(f.k2, k2)).max(rel(f.k3, k3));
    ensure(worst < 1e-3 && f.sse < 1e-9, format!("noise-free: worst rel error {worst:e}, sse {:e}", f.sse))?;

    let (mut e1, mut e3, mut mapes) = (vec![], vec![], vec![]);
    for seed in 0..50u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let noisy: Vec<_> = clean
            .iter()
            .map(|&(x, y)| {
                let z: f64 = StandardNormal.sample(&mut rng);
                (x, y * (1.0 + 0.01 * z))
            })
            .collect();
        let n = fit_gscale(&noisy).map_err(|e| e.to_string())?;
        e1.push(rel(n.k1, k1));
        e3.push(rel(n.k3, k3));
        mapes.push(n.mape_percent);
    }
    let (m1, m3, mm) = (median(e1) * 100.0, median(e3) * 100.0, median(mapes));
    let detail = format!("noise-free worst {worst:.1e}; 1% noise medians: k1 {m1:.2}%, k3 {m3:.2}%, MAPE {mm:.2}%");
    ensure(m1 <= 5.0 && m3 <= 5.0 && mm <= 2.0, detail.clone())?;
    Ok(detail)
}

fn nan_pipeline(ctx: &mut Ctx) -> Check {
    izhikevich_sweep(ctx, "c6", vec![100, 500, 1000], vec![0.5, 1.0, 2.0, 1e6], 2);
    let o = ctx.recorded(&["calibrate", "c6.json"], "c6", vec!["simulation_result.out", "optima.csv", "fit.json"])?;
    let table = ctx.read("c6/simulation_result.out");
    let overflow: Vec<usize> = table
        .lines()
        .skip(1)
        .filter(|l| l.split(',').nth(1) == Some("1000000"))
        .map(|l| l.rsplit(',').next().unwrap().parse().unwrap())
        .collect();
    ensure(overflow.len() == 3 && overflow.iter().all(|&n| n > 0), format!("overflow rows sumNaNs {overflow:?}"))?;
    let optima = read_optima(&ctx.read("c6/optima.csv"));
    ensure(optima.iter().all(|&(_, g)| g != 1e6), "overflow gScale selected")?;
    let stderr = String::from_utf8_lossy(&o.stderr);
    let warned = stderr.lines().filter(|l| l.starts_with("warning") && l.contains("1000000")).count();
    ensure(warned == 3, format!("{warned} warnings: {stderr}"))?;
    Ok(format!("sumNaNs {overflow:?} at gScale 1e6, excluded, {warned} warnings printed"))
}

fn mbody_config(ctx: &Ctx, n_lhi: usize) -> String {
    let n_pn: Vec<usize> = (20..=200).step_by(20).collect();
    let grid: Vec<f64> = (-2..=13).map(|k| 1.2f64.powi(k)).collect();
    ctx.config(
        &format!("c7_{n_lhi}.json"),
        &json!({
            "network": {"kind": "mbody", "nPN": 200, "nLHI": n_lhi, "nKC": 1000, "nDN": 100, "seed": 42},
            "sweep": {"nConnValues": n_pn, "gScaleValues": grid, "targetPopulation": "kc",
                      "refNConn": 200, "refGScale": 1.0, "groups": ["pn_kc"]},
            "parallelism": 4
        }),
    )
}

fn olfactory_consistency(ctx: &mut Ctx) -> Check {
    let mut curves = vec![];
    for n_lhi in [20, 40] {
        let cfg = mbody_config(ctx, n_lhi);
        let out = format!("c7_{n_lhi}");
        ctx.recorded(&["calibrate", &cfg], &out, vec!["simulation_result.out", "optima.csv", "fit.json"])?;
        let optima = read_optima(&ctx.read(&format!("{out}/optima.csv")));
        let (k1, k2, k3, _) = fit_params(&ctx.read(&format!("{out}/fit.json")))?;
        let inv = inversions(&optima);
        ensure(inv <= 2 && optima[0].1 > optima[optima.len() - 1].1, format!("{n_lhi} LHI optima not decreasing: {optima:?}"))?;
        let xs: Vec<f64> = optima.iter().map(|p| p.0).collect();
        let fitted = synscale::FitResult { k1, k2, k3, sse: 0.0, mape_percent: 0.0, converged: true, iterations: 0 };
        let ys: Vec<f64> = xs.iter().map(|&x| predict(&fitted, x).unwrap()).collect();
        ensure(ys.windows(2).all(|w| w[1] < w[0]), format!("{n_lhi} LHI fitted curve not decreasing"))?;
        curves.push((xs, ys));
    }
    let (xs, a) = &curves[0];
    let (xs_b, b) = &curves[1];
    ensure(xs == xs_b, "different nPN ranges")?;
    let disagreement = a.iter().zip(b).map(|(p, q)| ((p - q) / p).abs()).sum::<f64>() / a.len() as f64 * 100.0;
    ensure(disagreement <= 25.0, format!("curves disagree by {disagreement:.2}%"))?;
    Ok(format!("both decreasing, fitted curves differ by {disagreement:.2}% MAPE"))
}

fn determinism(ctx: &mut Ctx) -> Check {
    let mut compared = 0;
    for (k, (args, first_dir, files)) in ctx.replays.clone().into_iter().enumerate() {
        let mut args = args;
        let n = args.len();
        let again = format!("rerun_{k}");
        args[n - 1] = again.clone();
        let refs: Vec<&str> = args.iter().map(String::as_str).collect();
        let o = ctx.cli(&refs);
        ensure(o.status.code() == Some(0), format!("rerun of `{}` failed", refs.join(" ")))?;
        for f in files {
            let a = fs::read(first_dir.join(f)).unwrap();
            let b = fs::read(ctx.root.join(&again).join(f)).unwrap();
            ensure(a == b, format!("{f} differs on rerun of `{}`", refs.join(" ")))?;
            compared += 1;
        }
    }
    for args in [
        &["occupancy", "--device", "cc30", "--threads", "256", "--regs", "32"][..],
        &["occupancy", "--device", "cc30", "--regs", "64", "--recommend"],
        &["mem-report", "--n-pre", "1000", "--n-post", "1000", "--n-conn", "100"],
        &["validate", "c4.json"],
    ] {
        ensure(ctx.cli(args).stdout == ctx.cli(args).stdout, format!("`{}` output differs", args.join(" ")))?;
        compared += 1;
    }
    Ok(format!("{compared} outputs byte-identical on rerun"))
}

fn main() {
    let tmp = std::env::temp_dir().join(format!("synscale-acceptance-{}", std::process::id()));
    fs::create_dir_all(&tmp).unwrap();
    let mut ctx = Ctx { root: tmp.clone(), replays: vec![] };

    type Criterion = (&'static str, u64, fn(&mut Ctx) -> Check);
    let criteria: [Criterion; 8] = [
        ("storage equivalence", 10, storage_equivalence),
        ("memory formulas", 1, memory_formulas),
        ("occupancy oracle", 5, occupancy_oracle),
        ("end-to-end calibration shape", 600, calibration_shape),
        ("fit recovery oracle", 10, fit_recovery),
        ("NaN pipeline", 30, nan_pipeline),
        ("olfactory consistency", 600, olfactory_consistency),
        ("determinism", 1200, determinism),
    ];
    let mut failed = 0;
    for (i, (name, limit, check)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let result = check(&mut ctx);
        let elapsed = start.elapsed();
        let (ok, detail) = match result {
            Ok(d) if elapsed <= Duration::from_secs(*limit) => (true, d),
            Ok(d) => (false, format!("{d}; exceeded {limit} s")),
            Err(e) => (false, e),
        };
        failed += usize::from(!ok);
        println!(
            "{} criterion {}: {name}: {detail} [{:.2} s]",
            if ok { "PASS" } else { "FAIL" },
            i + 1,
            elapsed.as_secs_f64()
        );
    }
    let _ = fs::remove_dir_all(Path::new(&tmp));
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
