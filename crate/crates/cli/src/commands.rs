use std::sync::Arc;

use compact_gp::approx::{solve_compact_approx, ApproxOptions, ApproxProblem, QuadratureSpec};
use compact_gp::gp::{
    build_pattern, fit_mle, metrics, posterior, run_scaling, sample_gp, sparse_posterior_from_matrix, FitConfig,
    GPDataset, InferenceMode, NoiseModel, PosteriorOptions, ScalingConfig, DENSE_LIMIT,
};
use compact_gp::kernel::{compute_phi, make_basis, rank_dimension, CompactKernel, Kernel, KernelFile, TargetKernel};
use compact_gp::sparse::{assemble_with, CgOptions};
use compact_gp::{Error, ExecMode, Points};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

use crate::io::{self, fmt, RunManifest};
use crate::{ApproxArgs, BenchArgs, BenchMode, CliError, FitArgs, ModeArg, PredictArgs, RankArgs, SampleArgs, Spacing, Split};

fn load_kernel(path: &std::path::Path) -> Result<(CompactKernel, f64), CliError> {
    let file = KernelFile::from_json(&io::read_to_string(path)?)
        .map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
    if !(file.noise >= 0.0 && file.noise.is_finite()) {
        return Err(CliError::Input(format!("{}: noise must be >= 0", path.display())));
    }
    let noise = file.noise;
    Ok((file.to_kernel()?, noise))
}

fn load_dataset(path: &std::path::Path) -> Result<GPDataset, CliError> {
    let mut cols = io::read_columns(path, &["x", "y"])?;
    let y = cols.pop().unwrap();
    let x = cols.pop().unwrap();
    Ok(GPDataset::from_1d(x, y)?)
}

fn with_manifest(mut v: Value, manifest: &std::path::Path) -> Value {
    if let Value::Object(m) = &mut v {
        m.insert("manifest".into(), json!(manifest.display().to_string()));
    }
    v
}

pub fn approx(a: ApproxArgs) -> Result<(), CliError> {
    let mut man = RunManifest::new("approx", None, &a);
    man.phase("setup");
    let target = TargetKernel::new(a.target.0, a.amplitude, a.lengthscale)?;
    let basis = make_basis(a.basis.0, a.order)?;
    if !(a.noise >= 0.0) {
        return Err(CliError::Input("noise must be >= 0".into()));
    }
    let q = QuadratureSpec::new(a.panels, a.nodes)?;
    man.phase("quadrature");
    let problem = ApproxProblem::new(Arc::new(compute_phi(basis)), &target, a.cutoff, &q)?;
    man.phase("solve");
    let opts = ApproxOptions {
        tol: a.tol,
        max_iter: a.max_iter,
        peak_matching: !a.no_peak_match,
        ..Default::default()
    };
    let res = solve_compact_approx(&problem, &opts)?;
    let kernel = CompactKernel::with_phi(problem.phi().clone(), res.a.clone(), a.cutoff)?;

    man.phase("write");
    let manifest = io::manifest_path(&a.out);
    let kfile = serde_json::to_value(KernelFile::from_kernel(&kernel, a.noise)).map_err(|e| CliError::Io(e.to_string()))?;
    io::write_json(&a.out, &with_manifest(kfile, &manifest))?;
    man.output(&a.out);

    let sidecar_path = io::sibling(&a.out, "error.json");
    let mut sidecar = res.sidecar();
    sidecar["target"] = json!(a.target.to_string());
    sidecar["basis"] = json!(a.basis.to_string());
    sidecar["order"] = json!(a.order);
    sidecar["cutoff"] = json!(a.cutoff);
    io::write_json(&sidecar_path, &with_manifest(sidecar, &manifest))?;
    man.output(&sidecar_path);

    let curve_path = io::sibling(&a.out, "curve.csv");
    let span = 1.2 * a.cutoff;
    let rows = (0..1001).map(|i| {
        let t = -span + 2.0 * span * i as f64 / 1000.0;
        vec![fmt(t), fmt(target.eval(t)), fmt(kernel.eval(t))]
    });
    io::write_csv(&curve_path, &["t", "target", "compact"], rows)?;
    man.output(&curve_path);
    man.note("l2_error", json!(res.l2_error));
    man.finish(&a.out)?;
    println!(
        "{} → {} order {}: l2_error {:.3e} (squared {:.3e}) after {} iterations",
        a.target, a.basis, a.order, res.l2_error, res.squared_l2_error, res.iterations
    );
    Ok(())
}

fn interleave(data: &GPDataset) -> Result<(GPDataset, GPDataset), CliError> {
    let x = data.x().coords();
    let pick = |parity: usize| {
        let idx = (0..data.len()).filter(|i| i % 2 == parity);
        let xs = idx.clone().map(|i| x[i]).collect();
        let ys = idx.map(|i| data.y()[i]).collect();
        GPDataset::from_1d(xs, ys)
    };
    if data.len() < 2 {
        return Err(CliError::Input("an interleaved split needs at least two rows".into()));
    }
    Ok((pick(0)?, pick(1)?))
}

pub fn fit(a: FitArgs) -> Result<(), CliError> {
    let mut man = RunManifest::new("fit", Some(a.seed), &a);
    man.phase("load");
    let data = load_dataset(&a.data)?;
    if a.sparse && !data.is_sorted() {
        let xs = data.x().coords();
        let index = xs.windows(2).position(|w| w[1] < w[0]).map_or(0, |i| i + 1);
        return Err(Error::UnsortedInput { index }.into());
    }
    let (train, test) = match a.split {
        Split::None => (data, None),
        Split::Interleave => {
            let (tr, te) = interleave(&data)?;
            (tr, Some(te))
        }
    };
    let basis = make_basis(a.basis.0, a.order)?;
    let cfg = FitConfig {
        learning_rate: a.learning_rate,
        max_epochs: a.epochs,
        tolerance: a.tol,
        cutoffs: a.cutoffs.clone(),
        noise: a.noise.map_or(NoiseModel::Learned, NoiseModel::Fixed),
        stochastic_trace: a.sparse,
        probes: a.probes,
        seed: a.seed,
        ..Default::default()
    };
    man.phase("fit");
    let report = fit_mle(&train, basis, &cfg)?;
    let kernel = report.to_kernel()?;

    let test_metrics = match &test {
        Some(te) => {
            man.phase("evaluate");
            let opts = if a.sparse { PosteriorOptions::sparse() } else { PosteriorOptions::default() };
            let post = posterior(&kernel, &train, te.x(), report.noise, &opts)?;
            Some(metrics(&post.mean, te.y(), &post.variance, report.noise)?)
        }
        None => None,
    };

    man.phase("write");
    let manifest = io::manifest_path(&a.out);
    let mut out = serde_json::to_value(&report).map_err(|e| CliError::Io(e.to_string()))?;
    out["nll_convention"] = json!("nll is the total over training points; nll_per_point divides by n");
    if let Some(m) = test_metrics {
        out["test"] = json!({ "n": test.as_ref().map(|t| t.len()), "rmse": m.rmse, "mean_test_nll": m.mean_test_nll });
    }
    io::write_json(&a.out, &with_manifest(out, &manifest))?;
    man.output(&a.out);
    let kpath = io::sibling(&a.out, "kernel.json");
    let kfile = serde_json::to_value(&report.kernel).map_err(|e| CliError::Io(e.to_string()))?;
    io::write_json(&kpath, &with_manifest(kfile, &manifest))?;
    man.output(&kpath);
    man.note("cg_iterations", json!(report.cg_iterations));
    man.finish(&a.out)?;
    println!(
        "cutoff {} noise {:.4e}: train NLL/point {:.6} after {} epochs{}",
        report.cutoff,
        report.noise,
        report.nll_per_point,
        report.epochs,
        test_metrics.map_or(String::new(), |m| format!(", test RMSE {:.6}", m.rmse))
    );
    Ok(())
}

pub fn predict(a: PredictArgs) -> Result<(), CliError> {
    let mut man = RunManifest::new("predict", None, &a);
    man.phase("load");
    let (kernel, file_noise) = load_kernel(&a.kernel)?;
    let noise = a.noise.unwrap_or(file_noise);
    let train = load_dataset(&a.train)?;
    let query = Points::from_1d(io::read_columns(&a.query, &["x"])?.remove(0))?;
    let opts = PosteriorOptions {
        mode: match a.mode {
            ModeArg::Dense => InferenceMode::Dense,
            ModeArg::Sparse => InferenceMode::Sparse,
        },
        cg: CgOptions {
            tol: a.cg_tol,
            ..Default::default()
        },
        jacobi: a.jacobi,
        mean_only: a.mean_only,
        ..Default::default()
    };
    let res = match a.mode {
        ModeArg::Dense => {
            man.phase("solve");
            posterior(&kernel, &train, &query, noise, &opts)?
        }
        ModeArg::Sparse => {
            man.phase("pattern");
            let pattern = Arc::new(build_pattern(train.x(), kernel.cutoff())?);
            man.phase("assembly");
            let mat = assemble_with(&kernel, train.x(), pattern, noise, ExecMode::default())?;
            man.phase("solve");
            let mut r = sparse_posterior_from_matrix(&kernel, &mat, &train, &query, &opts)?;
            for v in r.variance.iter_mut() {
                if *v < 0.0 && *v >= -1e-8 * kernel.at_zero() {
                    *v = 0.0;
                }
            }
            r
        }
    };
    man.phase("write");
    let xs = query.coords();
    if a.mean_only {
        let rows = (0..xs.len()).map(|i| vec![fmt(xs[i]), fmt(res.mean[i])]);
        io::write_csv(&a.out, &["x", "mean"], rows)?;
    } else {
        // predictive variance of a new observation
        let rows = (0..xs.len()).map(|i| vec![fmt(xs[i]), fmt(res.mean[i]), fmt(res.variance[i] + noise)]);
        io::write_csv(&a.out, &["x", "mean", "variance"], rows)?;
    }
    man.output(&a.out);
    man.note("noise", json!(noise));
    if let Some(cg) = &res.cg {
        man.note("cg", serde_json::to_value(cg).map_err(|e| CliError::Io(e.to_string()))?);
    }
    man.finish(&a.out)?;
    Ok(())
}

pub fn sample(a: SampleArgs) -> Result<(), CliError> {
    let mut man = RunManifest::new("sample", Some(a.seed), &a);
    man.phase("load");
    let (kernel, file_noise) = load_kernel(&a.kernel)?;
    let noise = a.noise.unwrap_or(file_noise);
    if a.n == 0 || a.n > DENSE_LIMIT {
        return Err(CliError::Input(format!("n must be in [1, {DENSE_LIMIT}], got {}", a.n)));
    }
    let end = a.end.unwrap_or(a.start + (a.n - 1) as f64);
    if !(end >= a.start) || !end.is_finite() || !a.start.is_finite() || (a.n > 1 && end == a.start) {
        return Err(CliError::Input(format!("range [{}, {end}] is empty", a.start)));
    }
    let xs: Vec<f64> = match a.spacing {
        Spacing::Even if a.n == 1 => vec![a.start],
        Spacing::Even => (0..a.n).map(|i| a.start + (end - a.start) * i as f64 / (a.n - 1) as f64).collect(),
        Spacing::Uniform => {
            // separate stream from the draw inside sample_gp
            let mut rng = ChaCha8Rng::seed_from_u64(a.seed ^ 0x5851_F42D_4C95_7F2D);
            let mut v: Vec<f64> = (0..a.n).map(|_| rng.random_range(a.start..=end)).collect();
            v.sort_by(f64::total_cmp);
            v
        }
    };
    man.phase("sample");
    let points = Points::from_1d(xs)?;
    let ys = sample_gp(&kernel, &points, noise, a.seed)?;
    man.phase("write");
    let xs = points.coords();
    io::write_csv(&a.out, &["x", "y"], (0..a.n).map(|i| vec![fmt(xs[i]), fmt(ys[i])]))?;
    man.output(&a.out);
    man.finish(&a.out)?;
    Ok(())
}

pub fn bench(a: BenchArgs) -> Result<(), CliError> {
    let mut man = RunManifest::new("bench", Some(a.seed), &a);
    let (kernel, file_noise) = load_kernel(&a.kernel)?;
    let noise = a.noise.unwrap_or(if file_noise > 0.0 { file_noise } else { 0.1 });
    let too_big: Vec<usize> = a.sizes.iter().copied().filter(|&n| n > DENSE_LIMIT).collect();
    if a.mode == BenchMode::Dense && !too_big.is_empty() {
        return Err(CliError::Input(format!("sizes {too_big:?} exceed the dense limit {DENSE_LIMIT}")));
    }
    let cfg = ScalingConfig {
        sizes: a.sizes.clone(),
        spacing: a.spacing,
        noise,
        repetitions: a.repetitions,
        dense_limit: if a.mode == BenchMode::Sparse { 0 } else { DENSE_LIMIT },
        cg: CgOptions {
            tol: a.cg_tol,
            ..Default::default()
        },
        seed: a.seed,
        ..Default::default()
    };
    man.phase("run");
    let rows = run_scaling(&kernel, &cfg)?;
    let rows: Vec<_> = rows
        .into_iter()
        .filter(|r| a.mode != BenchMode::Dense || r.mode == InferenceMode::Dense)
        .collect();
    man.phase("write");
    let opt = |v: Option<f64>| v.map_or(String::new(), fmt);
    let csv_rows = rows.iter().map(|r| {
        vec![
            r.n.to_string(),
            r.mode.to_string(),
            fmt(r.seconds),
            fmt(r.seconds / r.n as f64),
            r.nnz.to_string(),
            r.cg_iterations.map_or(String::new(), |v| v.to_string()),
            opt(r.predicted_cost),
        ]
    });
    io::write_csv(
        &a.out,
        &["n", "mode", "seconds", "seconds_per_n", "nnz", "cg_iters", "predicted_cost"],
        csv_rows,
    )?;
    man.output(&a.out);
    if a.mode == BenchMode::Both && !too_big.is_empty() {
        man.note("dense_omitted", json!({ "sizes": too_big, "dense_limit": DENSE_LIMIT }));
    }
    man.note("noise", json!(noise));
    man.note("raw", serde_json::to_value(&rows).map_err(|e| CliError::Io(e.to_string()))?);
    man.finish(&a.out)?;
    for r in &rows {
        println!("{:>6} {:<6} {:.6}s", r.n, r.mode.to_string(), r.seconds);
    }
    Ok(())
}

pub fn rank(a: RankArgs) -> Result<(), CliError> {
    let phi = compute_phi(make_basis(a.basis.0, a.order)?);
    println!("{}", rank_dimension(&phi, a.grid, a.tol)?);
    Ok(())
}
