//! Acceptance suite. Every criterion prints one `PASS`/`FAIL`/`SKIP` line
//! with its runtime; the process fails when any criterion fails.
//!
//! Pass criterion numbers as arguments to run a subset:
//! `cargo test -p bnlab --test acceptance -- 4 7`.

use std::path::Path;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use bnlab::data::find_mnist;
use bnlab::gradients::{run_degenerate, sweep_arms, Arm, ArmInit, BOUNDED_SLOPE};
use bnlab::isometry::run_isometry_decay;
use bnlab::shaping_suite::run_shaping_suite;
use bnlab::spec::{ExperimentKind, ExperimentSpec};
use bnlab::training::{run_training, TrainingRun};
use bnlab_core::databatch::{rank_audit, SynthKind};
use bnlab_core::netfwd::{bn_simplified, bn_standard_with_scales, BnVariant};
use bnlab_core::netgrad::{bn_jacobian_apply, bn_jacobian_opnorm, bn_standard_vjp, sample_loss_and_grad, LossKind};
use bnlab_core::par::Exec;
use bnlab_core::specmat::{
    gram_eigenvalues, isometry_gap, numerical_rank, sample_gaussian, sample_haar_orthogonal, RealMatrix, RngHandle,
};
use bnlab_core::weingarten::{verify_isometry_lift, verify_moment_mc, MomentPattern, MomentSpec};

enum Verdict {
    Pass(String),
    Fail(String),
    Skip(String),
}

fn verdict(ok: bool, detail: String) -> Verdict {
    if ok {
        Verdict::Pass(detail)
    } else {
        Verdict::Fail(detail)
    }
}

fn failures(bad: &[String]) -> String {
    if bad.is_empty() {
        String::new()
    } else {
        format!(": {}", bad.join("; "))
    }
}

fn mnist_dir() -> Option<std::path::PathBuf> {
    let root = Path::new(env!("CARGO_MANIFEST_DIR")).join("../..");
    find_mnist(&root)
}

fn rel_err(a: &RealMatrix, b: &RealMatrix) -> f64 {
    a.sub(b).frobenius_norm() / b.frobenius_norm().max(1e-300)
}

fn haar_moments() -> Verdict {
    const SAMPLES: usize = 100_000;
    let mut worst = 0.0f64;
    let mut bad = Vec::new();
    for (i, d) in [3usize, 4, 8].into_iter().enumerate() {
        let df = d as f64;
        let targets = [
            (MomentPattern::E1, (df + 1.0) / (df * (df + 2.0) * (df - 1.0))),
            (MomentPattern::E2, (df - 1.0) / (df * (df + 2.0) * (df - 1.0))),
            (MomentPattern::Deg2, 1.0 / df),
        ];
        for (j, (pattern, target)) in targets.into_iter().enumerate() {
            let est = verify_moment_mc(MomentSpec { d, pattern }, SAMPLES, (10 * i + j) as u64, Exec::Parallel)
                .expect("valid moment");
            let z = (est.mc_mean - target) / est.stderr;
            worst = worst.max(z.abs());
            if z.abs() > 3.0 || (est.closed_form - target).abs() > 1e-15 {
                bad.push(format!("{} d={d}: {:.6e} vs {target:.6e} (z {z:.2})", pattern.name(), est.mc_mean));
            }
        }
    }
    verdict(bad.is_empty(), format!("max |z| = {worst:.2} over 9 moments{}", failures(&bad)))
}

fn bn_jacobian_fd() -> Verdict {
    const STEP: f64 = 1e-6;
    let mut rng = RngHandle::new(2);
    let mut worst = 0.0f64;
    for d in [3usize, 8, 16] {
        for _ in 0..100 {
            let h = sample_gaussian(d, 1.0, &mut rng).unwrap();
            let v = sample_gaussian(d, 1.0, &mut rng).unwrap();
            let (mut plus, mut minus) = (h.clone(), h.clone());
            plus.axpy(STEP, &v);
            minus.axpy(-STEP, &v);

            // simplified: J v against the central difference
            let fd = bn_simplified(&plus).unwrap().sub(&bn_simplified(&minus).unwrap()).scale(0.5 / STEP);
            worst = worst.max(rel_err(&bn_jacobian_apply(&h, &v).unwrap(), &fd));

            // standard: <u, J v> through the vector-Jacobian product, relative
            // to |u| |J v|
            let u = sample_gaussian(d, 1.0, &mut rng).unwrap();
            let fd = bn_standard_with_scales(&plus).0.sub(&bn_standard_with_scales(&minus).0).scale(0.5 / STEP);
            let (xhat, scales) = bn_standard_with_scales(&h);
            let vjp = bn_standard_vjp(&xhat, &scales, &u).unwrap();
            let lhs: f64 = vjp.as_slice().iter().zip(v.as_slice()).map(|(a, b)| a * b).sum();
            let rhs: f64 = u.as_slice().iter().zip(fd.as_slice()).map(|(a, b)| a * b).sum();
            worst = worst.max((lhs - rhs).abs() / (u.frobenius_norm() * fd.frobenius_norm()));
        }
    }
    verdict(worst <= 1e-5, format!("max relative error {worst:.3e} over 300 instances (tol 1e-5)"))
}

fn jacobian_bounds() -> Verdict {
    let mut rng = RngHandle::new(3);
    let widths = [2usize, 3, 4, 8, 16, 32];
    let (mut v_eig, mut v_always, mut v_near, mut near_cases) = (0, 0, 0, 0);
    for t in 0..1000 {
        let d = widths[t % widths.len()];
        let s = 10f64.powf(-3.0 + 4.0 * rng.uniform());
        let g = sample_gaussian(d, 1.0, &mut rng).unwrap();
        let base = bn_simplified(&RealMatrix::identity(d).add(&g.scale(s))).unwrap();
        let h = sample_haar_orthogonal(d, &mut rng).unwrap().matmul(&base);
        if numerical_rank(&h) < d {
            continue;
        }
        let op = bn_jacobian_opnorm(&h);
        let lambda_min = gram_eigenvalues(&h).into_iter().fold(f64::INFINITY, f64::min);
        let phi = isometry_gap(&h);
        let df = d as f64;
        v_eig += usize::from(op > 1.0 / lambda_min.sqrt() + 1e-9);
        v_always += usize::from(op.ln() > df * phi + 1.0);
        if phi <= 1.0 / (16.0 * df) {
            near_cases += 1;
            v_near += usize::from(op.ln() > 2.0 * (df * phi).sqrt());
        }
    }
    verdict(
        v_eig + v_always + v_near == 0,
        format!("violations: opnorm {v_eig}, log opnorm vs d*phi+1 {v_always}, near-isometry {v_near} of {near_cases}"),
    )
}

fn monotone_orthogonalization() -> Verdict {
    let mut spec = ExperimentSpec::defaults(ExperimentKind::Isometry);
    spec.apply_kv("widths = 32\ndepths = 200\nseeds = 20\nwidth = 32").unwrap();
    let r = run_isometry_decay(&spec, Exec::Parallel).expect("decay run");
    let w = &r.widths[0];
    let increases: usize = w.runs.iter().map(|run| run.increases.len()).sum();
    let ratio = w.decay_ratio();
    verdict(
        increases == 0 && ratio < 1e-3,
        format!("{increases} increases over 20 runs; mean phi(X_200)/phi(X_0) = {ratio:.3e} (need < 1e-3)"),
    )
}

fn isometry_lift() -> Verdict {
    const SAMPLES: usize = 4000;
    let mut rng = RngHandle::new(5);
    let (mut bad, mut worst_eq) = (Vec::new(), 0.0f64);
    for d in [4usize, 8] {
        for t in 0..50 {
            let x = bn_simplified(&sample_gaussian(d, 1.0, &mut rng).unwrap()).unwrap();
            let r = verify_isometry_lift(&x, SAMPLES, rng.split().seed(), Exec::Parallel).unwrap();
            if !(r.isometry_bound_holds(3.0) && r.gap_bound_holds(3.0)) {
                bad.push(format!("d={d} #{t}: E[I] {:.5} vs {:.5}", r.mean_isometry_out, r.isometry_lower_bound));
            }
        }
        let q = sample_haar_orthogonal(d, &mut rng).unwrap();
        let r = verify_isometry_lift(&q, SAMPLES, rng.split().seed(), Exec::Parallel).unwrap();
        worst_eq = worst_eq
            .max((r.mean_isometry_out - r.isometry_lower_bound).abs())
            .max((r.mean_isometry_out - 1.0).abs())
            .max((r.mean_gap_out - r.gap_upper_bound).abs());
    }
    verdict(
        bad.is_empty() && worst_eq <= 1e-9,
        format!("{} of 100 inputs violate; orthogonal equality error {worst_eq:.1e}{}", bad.len(), failures(&bad)),
    )
}

fn gradient_spec(kind: ExperimentKind) -> ExperimentSpec {
    let mut spec = ExperimentSpec::defaults(kind);
    spec.apply_kv("widths = 32\ndepths = 50, 100, 200, 500\nseeds = 10\nwidth = 32\nbn = simplified").unwrap();
    spec
}

fn bounded_vs_exploding() -> Verdict {
    let spec = gradient_spec(ExperimentKind::Gradients);
    let arm = |name: &str, init| Arm { name: name.into(), init, bn: BnVariant::Simplified, input: SynthKind::Gaussian };
    let r = sweep_arms(
        &spec,
        &[arm("orthogonal", ArmInit::Orthogonal), arm("gaussian", ArmInit::Gaussian)],
        Exec::Parallel,
    )
    .expect("sweep");
    let (o, g) = (&r[0], &r[1]);
    let incs = g.increments();
    verdict(
        o.slope.abs() < BOUNDED_SLOPE && g.slope > BOUNDED_SLOPE && incs.iter().all(|&i| i > 0.0),
        format!(
            "orthogonal slope {:.3e}, gaussian slope {:.3e}, gaussian increments {:?}",
            o.slope,
            g.slope,
            incs.iter().map(|i| format!("{i:.3}")).collect::<Vec<_>>()
        ),
    )
}

fn degenerate_contrast() -> Verdict {
    let r = run_degenerate(&gradient_spec(ExperimentKind::Degenerate), Exec::Parallel).expect("sweep");
    let (full, dup) = (&r.results[0], &r.results[1]);
    verdict(
        full.slope.abs() < BOUNDED_SLOPE && dup.slope > BOUNDED_SLOPE,
        format!("full-rank slope {:.3e}, one duplicated column slope {:.3e} (need > 1e-2)", full.slope, dup.slope),
    )
}

fn lipschitz_losses() -> Verdict {
    let mut rng = RngHandle::new(8);
    let (mut worst, mut violations) = (0.0f64, 0);
    for c in [2usize, 10] {
        for _ in 0..10_000 {
            let scale = 10f64.powf(-2.0 + 4.0 * rng.uniform());
            let z: Vec<f64> = (0..c).map(|_| scale * rng.normal()).collect();
            let label = rng.below(c);
            for kind in [LossKind::CrossEntropySoftmax, LossKind::MseOnSoftmax] {
                let (_, g) = sample_loss_and_grad(&z, label, kind);
                let norm = g.iter().map(|v| v * v).sum::<f64>().sqrt();
                worst = worst.max(norm);
                violations += usize::from(norm.is_nan() || norm > 2.0);
            }
        }
    }
    verdict(violations == 0, format!("{violations} violations, max gradient norm {worst:.4}"))
}

fn rank_audit_mnist() -> Verdict {
    let Some(dir) = mnist_dir() else {
        return Verdict::Skip("MNIST not found; set BNLAB_MNIST_DIR or populate data/mnist".into());
    };
    let data = bnlab::data::load_dataset(&dir).expect("MNIST loads");
    let mean_rank = |n: usize, seed: u64| {
        let a = rank_audit(&data, 100, n, seed, Exec::Parallel).unwrap();
        a.iter().map(|x| x.rank as f64).sum::<f64>() / a.len() as f64
    };
    let (r128, r256) = (mean_rank(128, 1), mean_rank(256, 2));
    verdict(
        r128 == 128.0 && (245.0..=256.0).contains(&r256),
        format!("{} samples; mean rank n=128 {r128:.2}, n=256 {r256:.2}", data.len()),
    )
}

fn shaping_efficacy() -> Verdict {
    let mut spec = ExperimentSpec::defaults(ExperimentKind::Shaping);
    spec.apply_kv(
        "width = 100\nwidths = 100\nactivation = tanh\nbn = standard\nalphas = 0.3, 0.4, 0.5, 0.6, 0.7, 0.85, 1.0\n\
         rate_depth = 200\nrate_layer = 100\ngain_k = 2\ndepths = 200, 300\nseeds = 3",
    )
    .unwrap();
    let r = match run_shaping_suite(&spec, Exec::Parallel) {
        Ok(r) => r,
        Err(e) => return Verdict::Fail(format!("{e:#}")),
    };
    let c2 = r.fit.as_ref().map_or(f64::NAN, |f| f.c2);
    let (unshaped, shaped) = r.final_increments();
    verdict(
        c2 > 0.0 && shaped < 0.5 * unshaped,
        format!(
            "c2 = {c2:.3}, schedule {:?}; increment L=200..300 shaped {shaped:.3}, unshaped {unshaped:.3}",
            r.schedule
        ),
    )
}

fn training_properties() -> Verdict {
    let Some(dir) = mnist_dir() else {
        return Verdict::Skip("MNIST not found; set BNLAB_MNIST_DIR or populate data/mnist".into());
    };
    let data = bnlab::data::load_dataset(&dir).expect("MNIST loads");
    let mut spec = ExperimentSpec::defaults(ExperimentKind::Train);
    spec.apply_kv(
        "width = 100\nbatch = 100\nbn = standard\nactivation = identity\nlr = 0.001\nepochs = 30\n\
         train_samples = 5000\ndepths = 10, 50, 100",
    )
    .unwrap();
    let identity = match run_training(&spec, &data, LossKind::CrossEntropySoftmax, Exec::Parallel) {
        Ok(r) => r,
        Err(e) => return Verdict::Fail(format!("identity training failed: {e:#}")),
    };
    // k = 2 over the c2 fitted for tanh at width 100
    spec.apply_kv("activation = tanh\ngain_kind = power_law\ngain_exponent = 0.88\ndepths = 100").unwrap();
    let shaped = match run_training(&spec, &data, LossKind::CrossEntropySoftmax, Exec::Parallel) {
        Ok(r) => r,
        Err(e) => return Verdict::Fail(format!("shaped training failed: {e:#}")),
    };
    let finite = |r: &TrainingRun| {
        r.records.iter().all(|e| e.loss.is_finite() && e.grad_norms.iter().all(|g| g.is_finite() && *g > 0.0))
    };
    let mut ok = identity.iter().chain(&shaped).all(finite);
    let mut parts = Vec::new();
    for r in &identity {
        ok &= r.max_grad_growth() < 10.0 && r.final_accuracy() > 0.8;
        parts.push(format!("L={}: acc {:.3}, grad growth {:.2}", r.depth, r.final_accuracy(), r.max_grad_growth()));
    }
    let mid_gap = shaped[0].max_mid_gap();
    ok &= mid_gap < 0.1;
    parts.push(format!(
        "shaped tanh L=100: max mid-layer weight gap {mid_gap:.3e}, acc {:.3}",
        shaped[0].final_accuracy()
    ));
    verdict(ok, parts.join("; "))
}

struct Criterion {
    id: usize,
    name: &'static str,
    budget: Duration,
    run: fn() -> Verdict,
}

fn main() -> ExitCode {
    let secs = Duration::from_secs;
    let criteria = [
        Criterion { id: 1, name: "Haar moment identities", budget: secs(30), run: haar_moments },
        Criterion { id: 2, name: "BN Jacobian against finite differences", budget: secs(10), run: bn_jacobian_fd },
        Criterion { id: 3, name: "BN Jacobian operator-norm bounds", budget: Duration::MAX, run: jacobian_bounds },
        Criterion { id: 4, name: "monotone orthogonalization", budget: secs(60), run: monotone_orthogonalization },
        Criterion { id: 5, name: "isometry lift bound", budget: secs(120), run: isometry_lift },
        Criterion { id: 6, name: "bounded vs exploding gradients", budget: secs(300), run: bounded_vs_exploding },
        Criterion { id: 7, name: "degenerate batch contrast", budget: secs(300), run: degenerate_contrast },
        Criterion { id: 8, name: "Lipschitz losses", budget: Duration::MAX, run: lipschitz_losses },
        Criterion { id: 9, name: "MNIST rank audit", budget: Duration::MAX, run: rank_audit_mnist },
        Criterion { id: 10, name: "activation shaping efficacy", budget: secs(600), run: shaping_efficacy },
        Criterion {
            id: 11,
            name: "training stability and implicit orthogonality",
            budget: secs(900),
            run: training_properties,
        },
    ];
    let selected: Vec<usize> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let mut failed = Vec::new();
    for c in criteria.iter().filter(|c| selected.is_empty() || selected.contains(&c.id)) {
        let start = Instant::now();
        let v = (c.run)();
        let elapsed = start.elapsed();
        let over = elapsed > c.budget;
        let (tag, detail) = match v {
            Verdict::Pass(d) if over => ("FAIL", format!("{d}; runtime over budget {:?}", c.budget)),
            Verdict::Pass(d) => ("PASS", d),
            Verdict::Fail(d) => ("FAIL", d),
            Verdict::Skip(d) => ("SKIP", d),
        };
        println!("[{tag}] {:>2}. {} ({:.1}s): {detail}", c.id, c.name, elapsed.as_secs_f64());
        if tag == "FAIL" {
            failed.push(c.id);
        }
    }
    if failed.is_empty() {
        println!("acceptance: all selected criteria passed or skipped");
        ExitCode::SUCCESS
    } else {
        println!("acceptance: failed criteria {failed:?}");
        ExitCode::FAILURE
    }
}
