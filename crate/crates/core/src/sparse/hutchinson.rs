use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::exec::{self, ExecMode};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceEstimate {
    pub estimate: f64,
    /// Sample standard error of the mean; NaN for a single probe.
    pub standard_error: f64,
}

/// Standard Gaussian probe number `index` for `seed`.
///
/// Each probe gets its own ChaCha stream, so results do not depend on the
/// order or thread in which probes are evaluated.
pub fn probe_vector(n: usize, seed: u64, index: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    (0..n).map(|_| StandardNormal.sample(&mut rng)).collect()
}

/// Estimates `tr(K⁻¹ ∂K)` as the mean of `⟨K⁻¹b, ∂K b⟩` over Gaussian probes `b`.
pub fn hutchinson_trace<S, D>(
    n: usize,
    solve: S,
    apply_dk: D,
    probes: usize,
    seed: u64,
    mode: ExecMode,
) -> Result<TraceEstimate>
where
    S: Fn(&[f64]) -> Result<Vec<f64>> + Sync + Send,
    D: Fn(&[f64], &mut [f64]) + Sync + Send,
{
    let out = hutchinson_traces(
        n,
        1,
        solve,
        |u, b| {
            let mut db = vec![0.0; b.len()];
            apply_dk(b, &mut db);
            vec![u.iter().zip(&db).map(|(x, y)| x * y).sum()]
        },
        probes,
        seed,
        mode,
    )?;
    Ok(out[0])
}

/// Several trace estimates sharing one solve per probe.
///
/// `contract(u, b)` receives `u = K⁻¹b` and the probe `b`, and returns the
/// `outputs` values `⟨u, ∂_k K b⟩`.
pub fn hutchinson_traces<S, C>(
    n: usize,
    outputs: usize,
    solve: S,
    contract: C,
    probes: usize,
    seed: u64,
    mode: ExecMode,
) -> Result<Vec<TraceEstimate>>
where
    S: Fn(&[f64]) -> Result<Vec<f64>> + Sync + Send,
    C: Fn(&[f64], &[f64]) -> Vec<f64> + Sync + Send,
{
    if probes == 0 {
        return Err(Error::InvalidParameter(
            "at least one probe is required".into(),
        ));
    }
    let samples = exec::map_range(mode, probes, |p| -> Result<Vec<f64>> {
        let b = probe_vector(n, seed, p as u64);
        let u = solve(&b)?;
        let v = contract(&u, &b);
        if v.len() != outputs {
            return Err(Error::DimensionMismatch {
                expected: outputs,
                got: v.len(),
            });
        }
        Ok(v)
    });
    let samples: Vec<Vec<f64>> = samples.into_iter().collect::<Result<_>>()?;
    Ok((0..outputs)
        .map(|k| {
            let mean = samples.iter().map(|s| s[k]).sum::<f64>() / probes as f64;
            let standard_error = if probes > 1 {
                let var = samples.iter().map(|s| (s[k] - mean).powi(2)).sum::<f64>()
                    / (probes - 1) as f64;
                (var / probes as f64).sqrt()
            } else {
                f64::NAN
            };
            TraceEstimate {
                estimate: mean,
                standard_error,
            }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::DenseCholesky;
    use faer::Mat;
    use rand::Rng;

    fn ident(b: &[f64]) -> Result<Vec<f64>> {
        Ok(b.to_vec())
    }

    #[test]
    fn zero_derivative_gives_exact_zero() {
        let t = hutchinson_trace(
            20,
            ident,
            |_, y: &mut [f64]| y.fill(0.0),
            16,
            1,
            ExecMode::default(),
        )
        .unwrap();
        assert_eq!(t.estimate, 0.0);
        assert_eq!(t.standard_error, 0.0);
    }

    #[test]
    fn identity_trace_is_n() {
        let t = hutchinson_trace(
            128,
            ident,
            |x: &[f64], y: &mut [f64]| y.copy_from_slice(x),
            4096,
            3,
            ExecMode::default(),
        )
        .unwrap();
        assert!(
            (t.estimate - 128.0).abs() <= 3.0 * t.standard_error,
            "{t:?}"
        );
    }

    #[test]
    fn probes_are_reproducible_and_distinct() {
        assert_eq!(probe_vector(10, 5, 2), probe_vector(10, 5, 2));
        assert_ne!(probe_vector(10, 5, 2), probe_vector(10, 5, 3));
        assert_ne!(probe_vector(10, 5, 2), probe_vector(10, 6, 2));
        let seq = hutchinson_trace(
            30,
            ident,
            |x: &[f64], y: &mut [f64]| y.copy_from_slice(x),
            8,
            9,
            ExecMode::Sequential,
        )
        .unwrap();
        let par = hutchinson_trace(
            30,
            ident,
            |x: &[f64], y: &mut [f64]| y.copy_from_slice(x),
            8,
            9,
            ExecMode::Parallel,
        )
        .unwrap();
        assert_eq!(seq, par);
    }

    #[test]
    fn dense_instance_within_three_standard_errors() {
        let n = 64;
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let g = Mat::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
        let k = Mat::from_fn(n, n, |i, j| {
            (0..n).map(|l| g[(i, l)] * g[(j, l)]).sum::<f64>() / n as f64
                + if i == j { 0.5 } else { 0.0 }
        });
        let dk = Mat::from_fn(n, n, |i, j| ((i as f64 - j as f64) / 5.0).cos());
        let chol = DenseCholesky::factor(k.as_ref()).unwrap();
        let kinv = chol.inverse();
        let exact: f64 = (0..n)
            .map(|i| (0..n).map(|j| kinv[(i, j)] * dk[(j, i)]).sum::<f64>())
            .sum();
        let t = hutchinson_trace(
            n,
            |b| Ok(chol.solve(b)),
            |x: &[f64], y: &mut [f64]| {
                for i in 0..n {
                    y[i] = (0..n).map(|j| dk[(i, j)] * x[j]).sum();
                }
            },
            2000,
            4,
            ExecMode::default(),
        )
        .unwrap();
        assert!(
            (t.estimate - exact).abs() <= 3.0 * t.standard_error,
            "{t:?} vs {exact}"
        );
    }

    #[test]
    fn solver_errors_propagate() {
        let r = hutchinson_trace(
            4,
            |_| Err(Error::BreakdownDetected { iteration: 2 }),
            |x: &[f64], y: &mut [f64]| y.copy_from_slice(x),
            3,
            0,
            ExecMode::default(),
        );
        assert!(matches!(r, Err(Error::BreakdownDetected { .. })));
        assert!(hutchinson_trace(
            4,
            ident,
            |x: &[f64], y: &mut [f64]| y.copy_from_slice(x),
            0,
            0,
            ExecMode::default()
        )
        .is_err());
    }
}
