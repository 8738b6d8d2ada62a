//! Acceptance suite: one test per criterion, each printing a pass line.
//!
//! The heavyweight desk-scale experiment (64x64x34 phantom, sinograms at
//! P in {15, 30, 60, 120} downsampled from one dense simulation, and the
//! reconstructions of every method) is computed once and shared.

use std::process::Command;
use std::time::Instant;

use once_cell::sync::Lazy;

use dynct::linop::{
    dot_test, normalize_map, power_iteration_lambda_max, BlockDiagMap, DenseMap, LinearMap,
};
use dynct::metrics::{hpsi, psnr, rel_l2_error};
use dynct::phantom::{
    agent_region_mask, downsample_angles, make_stem_phantom, simulate_measurements, NoiseConfig,
    PhantomConfig, SimulationConfig,
};
use dynct::projector::{block_forward, radon_forward, BlockProjector, DynamicGeometry, Geometry, Projector};
use dynct::recon::{
    a_priori_sparsity_for, default_params, reconstruct, Method, ReconOutput, ReconParams,
};
use dynct::solver::{
    objective_value, pdfp_step, run_cwds_pdfp, run_static_cwds_pdfp, soft_threshold, CwdsState,
    PdfpConfig, StopReason,
};
use dynct::transforms::{HaarMap, ShearletSystem};
use dynct::types::{Image2D, SinogramStack, VolumeStack};

const DESK_SIDE: usize = 64;
const DESK_FRAMES: usize = 34;
const SWEEP_P: [usize; 4] = [15, 30, 60, 120];

struct Desk {
    truth: VolumeStack,
    /// Sinogram stacks per projection count, downsampled from one dense
    /// simulation by picking every k-th angle.
    sinos: Vec<(usize, SinogramStack)>,
}

impl Desk {
    fn sino(&self, p: usize) -> &SinogramStack {
        &self.sinos.iter().find(|(q, _)| *q == p).unwrap().1
    }

    fn geometry(&self, p: usize) -> Geometry {
        let s = self.sino(p);
        Geometry::new(DESK_SIDE, s.detectors(), 1.0, s.angles().to_vec()).unwrap()
    }
}

static DESK: Lazy<Desk> = Lazy::new(|| {
    let cfg = PhantomConfig::desk();
    assert_eq!(cfg.side, DESK_SIDE);
    let truth = make_stem_phantom(&cfg).unwrap();
    let geom = Geometry::parallel(DESK_SIDE, *SWEEP_P.iter().max().unwrap()).unwrap();
    let dense = simulate_measurements(
        &truth,
        &geom,
        &SimulationConfig::default(),
        &NoiseConfig::default(),
    )
    .unwrap();
    let sinos = SWEEP_P
        .iter()
        .map(|&p| (p, downsample_angles(&dense, p).unwrap()))
        .collect();
    Desk { truth, sinos }
});

fn sweep_params(method: Method) -> ReconParams {
    // Default pipeline for quality runs: sparsity targets computed from the
    // ground truth by the a-priori formula, everything else at the method
    // defaults.
    let mut params = default_params(method);
    params.pdfp.record_objective = false;
    if method != Method::Fbp {
        let scales = match method {
            Method::Sh3d => params.sh3d_scales,
            _ => params.sh2d_scales,
        };
        params.cwds.c_pr = a_priori_sparsity_for(
            method,
            &DESK.truth,
            params.cwds.kappa,
            params.haar_levels,
            scales,
        )
        .unwrap();
    }
    params
}

/// Reconstructions for the quality sweep (criteria 7 and 8).
static SWEEP: Lazy<Vec<(Method, usize, ReconOutput)>> = Lazy::new(|| {
    let mut out = Vec::new();
    for method in [Method::Fbp, Method::Haar, Method::Sh2d, Method::Sh3d] {
        let params = sweep_params(method);
        for &p in &SWEEP_P {
            let recon = reconstruct(DESK.sino(p), &DESK.geometry(p), method, &params).unwrap();
            out.push((method, p, recon));
        }
    }
    out
});

fn sweep_recon(method: Method, p: usize) -> &'static ReconOutput {
    &SWEEP
        .iter()
        .find(|(m, q, _)| *m == method && *q == p)
        .unwrap()
        .2
}

#[test]
fn criterion_01_adjointness() {
    // Warm the shared desk context first so the timed section below
    // measures this criterion's own work, not contention with the
    // concurrently initializing reconstruction sweep.
    Lazy::force(&SWEEP);
    let started = Instant::now();
    let budget = |op: &dyn LinearMap, trials: usize, label: &str| {
        let r = dot_test(op, trials, 42).unwrap();
        assert!(
            r.max_relative_discrepancy < 1e-10,
            "{label}: discrepancy {}",
            r.max_relative_discrepancy
        );
        r.max_relative_discrepancy
    };

    let geom = Geometry::parallel(16, 8).unwrap();
    let proj = Projector::new(geom.clone());
    let d_proj = budget(&proj, 20, "projector 16x16 P=8");

    // Cross-check against the explicitly assembled dense matrix.
    let dense = DenseMap::from_operator(&proj);
    let x: Vec<f64> = (0..256).map(|i| ((i * 29 + 3) % 13) as f64 / 6.0).collect();
    let z: Vec<f64> = (0..proj.output_len())
        .map(|i| ((i * 17 + 5) % 11) as f64 / 4.0)
        .collect();
    let fwd_gap = proj
        .apply(&x)
        .iter()
        .zip(dense.apply(&x))
        .map(|(a, b)| (a - b).abs())
        .fold(0.0f64, f64::max);
    let adj_gap = proj
        .apply_adjoint(&z)
        .iter()
        .zip(dense.apply_adjoint(&z))
        .map(|(a, b)| (a - b).abs())
        .fold(0.0f64, f64::max);
    assert!(fwd_gap < 1e-11 && adj_gap < 1e-11, "dense cross-check");

    let dg = DynamicGeometry::uniform(geom, 3).unwrap();
    let block = BlockProjector::new(&dg);
    let d_block = budget(&block, 20, "block 16x16x3");

    let haar = HaarMap::new(32, 32, 4).unwrap();
    let d_haar = budget(&haar, 20, "haar 32x32");

    let sh2 = ShearletSystem::new_2d(64, 64, 3).unwrap();
    let d_sh2 = budget(&sh2, 20, "sh2d 64x64");

    let sh3 = ShearletSystem::new_3d(34, 34, 34, 2).unwrap();
    let d_sh3 = budget(&sh3, 20, "sh3d 34x34x34");

    let elapsed = started.elapsed().as_secs_f64();
    assert!(elapsed < 60.0, "criterion 1 took {elapsed:.1}s");
    println!(
        "criterion 1 [adjointness]: PASS \
         (proj {d_proj:.2e}, block {d_block:.2e}, haar {d_haar:.2e}, \
         sh2d {d_sh2:.2e}, sh3d {d_sh3:.2e}; {elapsed:.1}s)"
    );
}

#[test]
fn criterion_02_haar_orthonormality() {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(2);
    let op = HaarMap::new(32, 32, 4).unwrap();
    let mut worst_norm = 0.0f64;
    let mut worst_rec = 0.0f64;
    for _ in 0..100 {
        let x: Vec<f64> = (0..32 * 32).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let c = op.apply(&x);
        let nx: f64 = x.iter().map(|v| v * v).sum::<f64>().sqrt();
        let nc: f64 = c.iter().map(|v| v * v).sum::<f64>().sqrt();
        worst_norm = worst_norm.max((nc / nx - 1.0).abs());
        let back = op.apply_adjoint(&c);
        let err = back
            .iter()
            .zip(&x)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0f64, f64::max);
        worst_rec = worst_rec.max(err);
    }
    assert!(worst_norm <= 1e-12, "norm ratio deviation {worst_norm}");
    assert!(worst_rec <= 1e-12, "reconstruction error {worst_rec}");
    println!(
        "criterion 2 [haar orthonormality]: PASS (norm dev {worst_norm:.2e}, rec err {worst_rec:.2e})"
    );
}

#[test]
fn criterion_03_shearlet_frame() {
    let sh2 = ShearletSystem::new_2d(64, 64, 3).unwrap();
    assert_eq!(sh2.subband_count(), 33, "2D subband count");
    let sh3 = ShearletSystem::new_3d(34, 34, 34, 2).unwrap();
    assert_eq!(sh3.subband_count(), 99, "3D subband count");

    let mut bounds = Vec::new();
    for (label, sys) in [("sh2d", &sh2), ("sh3d", &sh3)] {
        let (lo, hi) = sys.frame_bounds_estimate();
        assert!(hi <= 1.0 + 1e-12, "{label}: upper frame bound {hi}");
        assert!(lo > 0.0, "{label}: lower frame bound {lo}");
        let est = power_iteration_lambda_max(sys, 200, 1e-10, 3).unwrap();
        assert!(
            est.lambda_max <= hi + 1e-6,
            "{label}: lambda_max {} above frame bound {hi}",
            est.lambda_max
        );
        bounds.push((label, lo, hi, est.lambda_max));
    }
    println!("criterion 3 [shearlet frame]: PASS (33/99 subbands, bounds {bounds:?})");
}

#[test]
fn criterion_04_prox_oracle() {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(4);
    let mut worst = 0.0f64;
    for _ in 0..50 {
        let x: f64 = rng.gen_range(-8.0..8.0);
        let alpha: f64 = rng.gen_range(0.0..4.0);
        let s = soft_threshold(&[x], alpha).unwrap()[0];
        let mut best = (f64::INFINITY, 0.0f64);
        let mut z = -10.0;
        while z <= 10.0 {
            let val = 0.5 * (z - x) * (z - x) + alpha * z.abs();
            if val < best.0 {
                best = (val, z);
            }
            z += 1e-4;
        }
        worst = worst.max((s - best.1).abs());
    }
    assert!(worst <= 1e-3, "prox gap {worst}");
    println!("criterion 4 [prox oracle]: PASS (max gap {worst:.2e})");
}

#[test]
fn criterion_05_solver_oracle() {
    // See criterion 1: keep the timed section free of sweep contention.
    Lazy::force(&SWEEP);
    let started = Instant::now();
    // 16x16 single-frame instance with P=8 and the orthonormal Haar
    // transform; fixed alpha, controller off.
    let cfg = PhantomConfig {
        side: 16,
        frames: 1,
        ..PhantomConfig::desk()
    };
    let truth = make_stem_phantom(&cfg).unwrap();
    let geom = Geometry::parallel(16, 8).unwrap();
    let y_stack = simulate_measurements(
        &truth,
        &geom,
        &SimulationConfig::default(),
        &NoiseConfig::default(),
    )
    .unwrap();
    let proj = normalize_map(Projector::new(geom), 5).unwrap();
    let scale = proj.scale();
    let y: Vec<f64> = y_stack.to_flat().iter().map(|v| v * scale).collect();
    let haar = HaarMap::new(16, 16, 4).unwrap();
    let at_y = proj.apply_adjoint(&y);
    let alpha = 0.02 * at_y.iter().fold(0.0f64, |m, &v| m.max(v.abs()));

    // PDFP with fixed alpha until the iterate settles.
    let pdfp = PdfpConfig {
        record_objective: false,
        ..Default::default()
    };
    let mut state = CwdsState::initial(256, 256, alpha, 0.0);
    for _ in 0..5000 {
        pdfp_step(&mut state, &proj, &haar, &y, &pdfp, alpha).unwrap();
    }
    let j_pdfp = objective_value(&state.f, &y, &proj, &haar, alpha).unwrap();

    // Reference: projected proximal gradient with a small step. For the
    // orthonormal Haar transform the prox of alpha |W f|_1 is exact:
    // W' o soft-threshold o W.
    let tau = 0.2;
    let mut f = vec![0.0; 256];
    for _ in 0..100_000 {
        let grad = proj.apply_adjoint(&proj.apply(&f));
        let mut step: Vec<f64> = f
            .iter()
            .zip(&grad)
            .zip(&at_y)
            .map(|((fv, g), ay)| fv - tau * (g - ay))
            .collect();
        let coeffs = haar.apply(&step);
        let thresh = soft_threshold(&coeffs, tau * alpha).unwrap();
        step = haar.apply_adjoint(&thresh);
        for v in step.iter_mut() {
            if *v < 0.0 {
                *v = 0.0;
            }
        }
        f = step;
    }
    let j_ref = objective_value(&f, &y, &proj, &haar, alpha).unwrap();

    let gap = (j_pdfp - j_ref).abs() / j_ref.max(f64::MIN_POSITIVE);
    assert!(gap <= 1e-4, "objective gap {gap} (pdfp {j_pdfp}, ref {j_ref})");
    let elapsed = started.elapsed().as_secs_f64();
    assert!(elapsed < 120.0, "criterion 5 took {elapsed:.1}s");
    println!(
        "criterion 5 [solver oracle]: PASS (gap {gap:.2e}, pdfp {j_pdfp:.6}, ref {j_ref:.6}; {elapsed:.1}s)"
    );
}

#[test]
fn criterion_06_controller_convergence() {
    // Table-row parameters, fixed: gamma=1, lambda=0.99, I=300,
    // delta1=0.01, delta2=0.003; per-method (c_pr, omega, kappa, zeta) are
    // the digital-phantom defaults built into `default_params`.
    let p = 30;
    let mut lines = Vec::new();
    for method in [Method::Haar, Method::Sh2d, Method::Sh3d] {
        let mut params = default_params(method);
        params.pdfp.record_objective = false;
        assert_eq!(params.pdfp.gamma, 1.0);
        assert_eq!(params.pdfp.lambda, 0.99);
        assert_eq!(params.pdfp.max_iters, 300);
        assert_eq!(params.cwds.delta1, 0.01);
        assert_eq!(params.cwds.delta2, 0.003);
        let out = reconstruct(DESK.sino(p), &DESK.geometry(p), method, &params).unwrap();
        let report = out.report.expect("solver report");
        let gap = (report.final_sparsity - params.cwds.c_pr).abs();
        let ok = gap < params.cwds.delta1 || report.stop_reason == StopReason::IterationCap;
        assert!(
            ok,
            "{}: neither converged nor capped (gap {gap}, reason {:?})",
            method.name(),
            report.stop_reason
        );
        if method == Method::Sh3d {
            assert!(
                gap < params.cwds.delta1,
                "sh3d must reach the sparsity tolerance; gap {gap}"
            );
        }
        lines.push(format!(
            "{}: iters {}, |C - C_pr| = {:.4}, {:?}",
            method.name(),
            report.iterations,
            gap,
            report.stop_reason
        ));
    }
    println!("criterion 6 [controller convergence]: PASS ({})", lines.join("; "));
}

#[test]
fn criterion_07_quality_trends() {
    let mut lines = Vec::new();
    for method in [Method::Fbp, Method::Haar, Method::Sh2d, Method::Sh3d] {
        let mut errs = Vec::new();
        for &p in &SWEEP_P {
            let out = sweep_recon(method, p);
            errs.push((
                p,
                rel_l2_error(out.stack.data(), DESK.truth.data()).unwrap(),
            ));
        }
        for w in errs.windows(2) {
            assert!(
                w[1].1 <= w[0].1,
                "{}: rel_l2 increased from P={} ({:.4}) to P={} ({:.4})",
                method.name(),
                w[0].0,
                w[0].1,
                w[1].0,
                w[1].1
            );
        }
        lines.push(format!(
            "{}: {}",
            method.name(),
            errs.iter()
                .map(|(p, e)| format!("P{p}={e:.4}"))
                .collect::<Vec<_>>()
                .join(" ")
        ));
    }
    let sh3d_30 = rel_l2_error(sweep_recon(Method::Sh3d, 30).stack.data(), DESK.truth.data()).unwrap();
    let fbp_30 = rel_l2_error(sweep_recon(Method::Fbp, 30).stack.data(), DESK.truth.data()).unwrap();
    assert!(
        sh3d_30 < fbp_30,
        "sh3d at P=30 ({sh3d_30:.4}) not below fbp ({fbp_30:.4})"
    );
    println!(
        "criterion 7 [quality trends]: PASS ({}; sh3d@30 {sh3d_30:.4} < fbp@30 {fbp_30:.4})",
        lines.join("; ")
    );
}

#[test]
fn criterion_08_dynamics_fidelity() {
    let out = sweep_recon(Method::Sh3d, 30);
    let mask = agent_region_mask(&PhantomConfig::desk());
    let count = mask.iter().filter(|&&m| m).count();
    assert!(count > 0);
    let means: Vec<f64> = (0..out.stack.frames())
        .map(|t| {
            out.stack
                .frame(t)
                .iter()
                .zip(&mask)
                .filter(|(_, &m)| m)
                .map(|(v, _)| v)
                .sum::<f64>()
                / count as f64
        })
        .collect();
    // 3-frame moving average with clipped edges.
    let smoothed: Vec<f64> = (0..means.len())
        .map(|t| {
            let lo = t.saturating_sub(1);
            let hi = (t + 1).min(means.len() - 1);
            means[lo..=hi].iter().sum::<f64>() / (hi - lo + 1) as f64
        })
        .collect();
    for w in smoothed.windows(2) {
        assert!(
            w[1] >= w[0],
            "smoothed agent-region mean decreased: {} -> {}",
            w[0],
            w[1]
        );
    }
    println!(
        "criterion 8 [dynamics fidelity]: PASS (smoothed means {:.4} .. {:.4} over {} frames)",
        smoothed.first().unwrap(),
        smoothed.last().unwrap(),
        smoothed.len()
    );
}

#[test]
fn criterion_09_reductions() {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(9);

    // Block operator with T=1 is bitwise the static operator.
    let geom = Geometry::parallel(16, 8).unwrap();
    let img_data: Vec<f64> = (0..256).map(|_| rng.gen_range(0.0..1.0)).collect();
    let img = Image2D::new(16, 16, img_data).unwrap();
    let stack = VolumeStack::from_frames(vec![img.clone()]).unwrap();
    let dg = DynamicGeometry::uniform(geom.clone(), 1).unwrap();
    let via_block = block_forward(&stack, &dg).unwrap();
    let direct = radon_forward(&img, &geom).unwrap();
    assert_eq!(via_block.frame(0).data(), direct.data(), "block T=1 bitwise");

    // Static runner with T=1 is trajectory-identical to the dynamic runner
    // with the same 2D transform.
    let cfg = PhantomConfig {
        side: 16,
        frames: 1,
        ..PhantomConfig::desk()
    };
    let truth = make_stem_phantom(&cfg).unwrap();
    let y = simulate_measurements(
        &truth,
        &geom,
        &SimulationConfig::default(),
        &NoiseConfig::default(),
    )
    .unwrap();
    let proj = normalize_map(Projector::new(geom), 11).unwrap();
    let y_scaled = y.scaled(proj.scale()).unwrap();
    let haar = HaarMap::new(16, 16, 4).unwrap();
    let pdfp = PdfpConfig {
        max_iters: 40,
        record_objective: true,
        ..Default::default()
    };
    let cwds = dynct::solver::CwdsConfig::new(0.30, 10.0, 1e-6, 1.0);
    let (f_static, r_static) =
        run_static_cwds_pdfp(&y_scaled, std::slice::from_ref(&proj), &haar, &pdfp, &cwds, 16)
            .unwrap();
    let (f_dyn, r_dyn) = run_cwds_pdfp(&y_scaled, &proj, &haar, &pdfp, &cwds, 16).unwrap();
    assert_eq!(f_static.data(), f_dyn.data(), "T=1 trajectories (iterates)");
    assert_eq!(r_static.iterations, r_dyn.iterations);
    assert_eq!(r_static.final_sparsity, r_dyn.final_sparsity);
    assert_eq!(r_static.final_alpha, r_dyn.final_alpha);
    assert_eq!(r_static.objective_trace, r_dyn.objective_trace);
    println!(
        "criterion 9 [reductions]: PASS (T=1 block bitwise; static run = dynamic run over {} iterations)",
        r_static.iterations
    );
}

#[test]
fn criterion_10_io_exactness() {
    // In-process round trip, bitwise.
    let dir = tempfile::tempdir().unwrap();
    let mut stack = VolumeStack::zeros(7, 5, 3);
    for (i, v) in stack.data_mut().iter_mut().enumerate() {
        *v = (i as f64 * 0.1).sin() * 1e-9 + i as f64 / 7.0;
    }
    let path = dir.path().join("roundtrip.stk");
    dynct::io::write_volume_stack(&path, &stack, None).unwrap();
    let (back, _) = dynct::io::read_volume_stack(&path).unwrap();
    assert_eq!(back.data(), stack.data(), "volume round trip");
    for (a, b) in back.data().iter().zip(stack.data()) {
        assert_eq!(a.to_bits(), b.to_bits(), "bitwise sample");
    }

    // The verify subcommand re-derives a simulation byte-identically.
    let bin = env!("CARGO_BIN_EXE_dynct");
    let out_a = dir.path().join("a");
    let out_b = dir.path().join("b");
    for out in [&out_a, &out_b] {
        let status = Command::new(bin)
            .args([
                "simulate",
                "--out-dir",
                out.to_str().unwrap(),
                "--n",
                "32",
                "--frames",
                "4",
                "--projections",
                "10",
                "--seed",
                "1",
            ])
            .status()
            .unwrap();
        assert!(status.success(), "simulate failed");
    }
    for name in ["truth.stk", "sinogram.stk"] {
        let a = std::fs::read(out_a.join(name)).unwrap();
        let b = std::fs::read(out_b.join(name)).unwrap();
        assert_eq!(a, b, "{name} not byte-identical across runs");
        let status = Command::new(bin)
            .args([
                "verify",
                "--input",
                out_a.join(name).to_str().unwrap(),
            ])
            .status()
            .unwrap();
        assert!(status.success(), "verify failed on {name}");
    }
    println!("criterion 10 [io exactness]: PASS (bitwise round trip; verify reproduces simulation)");
}

#[test]
fn criterion_11_metrics_sanity() {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
    let data: Vec<f64> = (0..64 * 64).map(|_| rng.gen_range(0.0..1.0)).collect();
    let f = Image2D::new(64, 64, data.clone()).unwrap();
    assert_eq!(rel_l2_error(f.data(), f.data()).unwrap(), 0.0);
    assert!((hpsi(&f, &f).unwrap() - 1.0).abs() < 1e-9);

    let mut prev = f64::INFINITY;
    let mut ladder = Vec::new();
    for level in [0.02, 0.05, 0.12, 0.3] {
        let noisy: Vec<f64> = data
            .iter()
            .map(|&v| v + rng.gen_range(-1.0..1.0) * level)
            .collect();
        let p = psnr(&noisy, f.data(), None).unwrap();
        assert!(p < prev, "psnr {p} not decreasing at noise level {level}");
        ladder.push(p);
        prev = p;
    }
    println!(
        "criterion 11 [metrics sanity]: PASS (rel_l2(f,f)=0, hpsi(f,f)=1, psnr ladder {:.1?})",
        ladder
    );
}
