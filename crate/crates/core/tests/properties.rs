use std::sync::Arc;

use compact_gp::approx::{project_psd, solve_compact_approx, ApproxOptions, ApproxProblem, QuadratureSpec};
use compact_gp::gp::{build_pattern, gram_dense, posterior, GPDataset, PosteriorOptions};
use compact_gp::kernel::{compute_phi, make_basis, BasisFamily, CompactKernel, Kernel, KernelFile, TargetFamily, TargetKernel};
use compact_gp::linalg::{min_eigenvalue, sym_eigenvalues_mat, trace};
use compact_gp::sparse::{assemble, conjugate_gradient, CgOptions, Preconditioner};
use compact_gp::{ExecMode, Points};
use proptest::prelude::*;

fn family() -> impl Strategy<Value = BasisFamily> {
    prop_oneof![Just(BasisFamily::Fourier), Just(BasisFamily::Polynomial)]
}

/// Random PSD `A = BBᵀ/M` with `M` in `1..=max_m`.
fn psd(max_m: usize) -> impl Strategy<Value = (usize, Vec<f64>)> {
    (1..=max_m).prop_flat_map(|m| {
        prop::collection::vec(-1.0..1.0f64, m * m).prop_map(move |b| {
            let mut a = vec![0.0; m * m];
            for i in 0..m {
                for j in 0..m {
                    a[i * m + j] = (0..m).map(|k| b[i * m + k] * b[j * m + k]).sum::<f64>() / m as f64;
                }
                a[i * m + i] += 1e-3;
            }
            (m, a)
        })
    })
}

fn compact_kernel() -> impl Strategy<Value = CompactKernel> {
    (family(), psd(5), 0.3..5.0f64)
        .prop_map(|(f, (m, a), c)| CompactKernel::new(make_basis(f, m).unwrap(), a, c).unwrap())
}

fn sorted_points(n: std::ops::Range<usize>, span: f64) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.0..span, n).prop_map(|mut v| {
        v.sort_by(f64::total_cmp);
        v.dedup();
        v
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn kernel_is_even_bounded_and_compact(k in compact_kernel(), t in -6.0..6.0f64) {
        let k0 = k.eval(0.0);
        prop_assert_eq!(k.eval(t), k.eval(-t));
        prop_assert!(k.eval(t).abs() <= k0 * (1.0 + 1e-12) + 1e-15);
        if t.abs() >= k.cutoff() {
            prop_assert_eq!(k.eval(t), 0.0);
        }
    }

    #[test]
    fn cutoff_rescales_the_argument(k in compact_kernel(), s in 0.0..1.2f64) {
        let unit = k.with_cutoff(1.0).unwrap();
        let t = s * k.cutoff();
        prop_assert!((k.eval(t) - unit.eval(s)).abs() <= 1e-12 * (1.0 + unit.eval(0.0)));
    }

    #[test]
    fn phi_is_symmetric((m, _) in psd(8), f in family(), tau in 0.0..1.0f64) {
        let phi = compute_phi(make_basis(f, m).unwrap());
        let v = phi.eval(tau);
        for i in 0..m {
            for j in 0..m {
                prop_assert_eq!(v[i * m + j], v[j * m + i]);
            }
        }
        if f == BasisFamily::Fourier {
            let z = phi.eval(0.0);
            for i in 0..m {
                for j in 0..m {
                    prop_assert_eq!(z[i * m + j], if i == j { 1.0 } else { 0.0 });
                }
            }
        }
    }

    #[test]
    fn gram_matrices_are_psd(k in compact_kernel(), xs in sorted_points(2..60, 10.0)) {
        let gram = gram_dense(&k, &Points::from_1d(xs.clone()).unwrap(), 0.0);
        let min = sym_eigenvalues_mat(&gram).unwrap()[0];
        prop_assert!(min >= -1e-10 * xs.len() as f64 * k.eval(0.0), "{}", min);
    }

    #[test]
    fn sparse_matvec_matches_dense(k in compact_kernel(), xs in sorted_points(1..80, 30.0), noise in 0.0..1.0f64) {
        let pts = Points::from_1d(xs.clone()).unwrap();
        let pattern = Arc::new(build_pattern(&pts, k.cutoff()).unwrap());
        let mat = assemble(&k, &pts, pattern, noise).unwrap();
        let dense = gram_dense(&k, &pts, noise);
        let v: Vec<f64> = (0..xs.len()).map(|i| (i as f64 * 0.7).sin()).collect();
        let got = mat.spmv(&v).unwrap();
        for (i, g) in got.iter().enumerate() {
            let want: f64 = (0..xs.len()).map(|j| dense[(i, j)] * v[j]).sum();
            prop_assert!((g - want).abs() <= 1e-12 * (1.0 + want.abs()));
        }
    }

    #[test]
    fn cg_solves_spd_systems(k in compact_kernel(), xs in sorted_points(1..120, 40.0), jacobi in any::<bool>()) {
        let pts = Points::from_1d(xs.clone()).unwrap();
        let pattern = Arc::new(build_pattern(&pts, k.cutoff()).unwrap());
        let mat = assemble(&k, &pts, pattern, 0.1 * k.eval(0.0)).unwrap();
        let b: Vec<f64> = (0..xs.len()).map(|i| 1.0 + (i % 3) as f64).collect();
        let pc = if jacobi { Preconditioner::Jacobi(mat.diagonal()) } else { Preconditioner::None };
        let (x, stats) = conjugate_gradient(mat.operator(ExecMode::Sequential), &b, &CgOptions::default(), &pc).unwrap();
        prop_assert!(stats.converged);
        let r = mat.spmv(&x).unwrap();
        let res: f64 = r.iter().zip(&b).map(|(a, c)| (a - c).powi(2)).sum::<f64>().sqrt();
        let bn: f64 = b.iter().map(|v| v * v).sum::<f64>().sqrt();
        prop_assert!(res <= 1e-9 * bn);
    }

    #[test]
    fn psd_projection_is_idempotent((m, a) in psd(6), shift in -2.0..0.5f64) {
        let mut s = a.clone();
        for i in 0..m {
            s[i * m + i] += shift;
        }
        let p = project_psd(&s, m).unwrap();
        prop_assert!(min_eigenvalue(&p, m).unwrap() >= -1e-12);
        let pp = project_psd(&p, m).unwrap();
        for (x, y) in p.iter().zip(&pp) {
            prop_assert!((x - y).abs() <= 1e-10);
        }
    }

    #[test]
    fn posterior_variance_lies_in_prior_range(
        k in compact_kernel(),
        xs in sorted_points(1..60, 20.0),
        q in prop::collection::vec(-5.0..25.0f64, 1..20),
    ) {
        let n = xs.len();
        let ys: Vec<f64> = (0..n).map(|i| (i as f64).cos()).collect();
        let data = GPDataset::from_1d(xs, ys).unwrap();
        let res = posterior(&k, &data, &Points::from_1d(q).unwrap(), 0.05, &PosteriorOptions::default()).unwrap();
        let k0 = k.eval(0.0);
        for v in res.variance {
            prop_assert!((0.0..=k0 * (1.0 + 1e-10)).contains(&v), "{} vs {}", v, k0);
        }
    }

    #[test]
    fn kernel_file_round_trips(k in compact_kernel(), noise in 0.0..1.0f64) {
        let file = KernelFile::from_kernel(&k, noise);
        let back = KernelFile::from_json(&file.to_json().unwrap()).unwrap();
        prop_assert_eq!(&back, &file);
        let k2 = back.to_kernel().unwrap();
        prop_assert_eq!(k2.eval(0.3 * k.cutoff()), k.eval(0.3 * k.cutoff()));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn compact_approximations_are_feasible(
        f in family(),
        m in 1..=4usize,
        target in prop_oneof![Just(TargetFamily::SquaredExponential), Just(TargetFamily::Matern52), Just(TargetFamily::Sinc)],
        ls in 0.5..2.0f64,
        c in 2.0..6.0f64,
    ) {
        let t = TargetKernel::new(target, 1.0, ls).unwrap();
        let q = QuadratureSpec::new(16, 16).unwrap();
        let problem = ApproxProblem::new(Arc::new(compute_phi(make_basis(f, m).unwrap())), &t, c, &q).unwrap();
        let res = solve_compact_approx(&problem, &ApproxOptions::default()).unwrap();
        prop_assert!(min_eigenvalue(&res.a, m).unwrap() >= -1e-9 * trace(&res.a, m).abs().max(1e-12));
        let k = CompactKernel::with_phi(problem.phi().clone(), res.a.clone(), c).unwrap();
        prop_assert!((k.eval(0.0) - t.eval(0.0)).abs() <= 1e-6);
        prop_assert!(res.objective_trace.windows(2).all(|w| w[1] <= w[0]));
    }
}
