//! Low-degree moments of Haar orthogonal matrices and Monte Carlo checks of
//! the expected isometry gain of one normalised orthogonal layer.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::netfwd::bn_simplified;
use crate::par::{mc_moments, Exec};
use crate::specmat::{
    gram_eigenvalues, isometry, isometry_gap, numerical_rank, sample_haar_orthogonal, RealMatrix, RngHandle,
};

/// Smallest sample count accepted by the Monte Carlo checks.
pub const MIN_MC_SAMPLES: usize = 1000;

/// Index patterns of entries of a Haar matrix `W`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MomentPattern {
    /// `E[W_ik^2 W_jq^2]` with `i != j`, `k != q`.
    E1,
    /// `E[W_ik^2 W_jk^2]` with `i != j`.
    E2,
    /// `E[W_ik^2]`.
    Deg2,
}

impl MomentPattern {
    pub fn name(self) -> &'static str {
        match self {
            MomentPattern::E1 => "e1",
            MomentPattern::E2 => "e2",
            MomentPattern::Deg2 => "deg2",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s.to_ascii_lowercase().as_str() {
            "e1" => Some(MomentPattern::E1),
            "e2" => Some(MomentPattern::E2),
            "deg2" => Some(MomentPattern::Deg2),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MomentSpec {
    pub d: usize,
    pub pattern: MomentPattern,
}

/// Exact moment for the given pattern.
pub fn weingarten_moment(spec: MomentSpec) -> Result<f64> {
    let d = spec.d as f64;
    match spec.pattern {
        MomentPattern::Deg2 if spec.d >= 1 => Ok(1.0 / d),
        MomentPattern::E1 if spec.d >= 3 => Ok((d + 1.0) / (d * (d + 2.0) * (d - 1.0))),
        MomentPattern::E2 if spec.d >= 3 => Ok((d - 1.0) / (d * (d + 2.0) * (d - 1.0))),
        _ => Err(Error::InvalidArgument(format!(
            "{} moment needs d >= {}, got {}",
            spec.pattern.name(),
            if spec.pattern == MomentPattern::Deg2 { 1 } else { 3 },
            spec.d
        ))),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentEstimate {
    pub d: usize,
    pub pattern: MomentPattern,
    pub closed_form: f64,
    pub mc_mean: f64,
    pub stderr: f64,
    /// `(mc_mean - closed_form) / stderr`
    pub z_score: f64,
    pub samples: usize,
    pub seed: u64,
}

impl MomentEstimate {
    pub fn within(&self, n_stderr: f64) -> bool {
        (self.mc_mean - self.closed_form).abs() <= n_stderr * self.stderr
    }
}

fn distinct_pair(d: usize, rng: &mut RngHandle) -> (usize, usize) {
    let i = rng.below(d);
    (i, (i + 1 + rng.below(d - 1)) % d)
}

/// One draw of the pattern statistic at a uniformly random admissible index
/// tuple of a fresh Haar matrix.
fn pattern_draw(pattern: MomentPattern, d: usize, rng: &mut RngHandle) -> f64 {
    let w = sample_haar_orthogonal(d, rng).expect("d >= 1");
    let sq = |i: usize, k: usize| w[(i, k)] * w[(i, k)];
    match pattern {
        MomentPattern::Deg2 => sq(rng.below(d), rng.below(d)),
        MomentPattern::E1 => {
            let (i, j) = distinct_pair(d, rng);
            let (k, q) = distinct_pair(d, rng);
            sq(i, k) * sq(j, q)
        }
        MomentPattern::E2 => {
            let (i, j) = distinct_pair(d, rng);
            let k = rng.below(d);
            sq(i, k) * sq(j, k)
        }
    }
}

/// Monte Carlo estimate of a moment over `samples` Haar draws.
pub fn verify_moment_mc(spec: MomentSpec, samples: usize, seed: u64, exec: Exec) -> Result<MomentEstimate> {
    let closed_form = weingarten_moment(spec)?;
    check_samples(samples)?;
    let m = mc_moments(exec, samples, seed, 1, |rng, out| out[0] = pattern_draw(spec.pattern, spec.d, rng))[0];
    let stderr = m.std_error();
    Ok(MomentEstimate {
        d: spec.d,
        pattern: spec.pattern,
        closed_form,
        mc_mean: m.mean,
        stderr,
        z_score: (m.mean - closed_form) / stderr,
        samples,
        seed,
    })
}

fn check_samples(samples: usize) -> Result<()> {
    if samples < MIN_MC_SAMPLES {
        return Err(Error::InvalidArgument(format!("need at least {MIN_MC_SAMPLES} samples, got {samples}")));
    }
    Ok(())
}

/// Monte Carlo means and standard errors of every `W_ik^2`.
pub fn entrywise_second_moments(d: usize, samples: usize, seed: u64, exec: Exec) -> Result<(RealMatrix, RealMatrix)> {
    check_samples(samples)?;
    let m = mc_moments(exec, samples, seed, d * d, |rng, out| {
        let w = sample_haar_orthogonal(d, rng).expect("d >= 1");
        for (o, v) in out.iter_mut().zip(w.as_slice()) {
            *o = v * v;
        }
    });
    let means = RealMatrix::from_vec(d, d, m.iter().map(|x| x.mean).collect())?;
    let errs = RealMatrix::from_vec(d, d, m.iter().map(|x| x.std_error()).collect())?;
    Ok((means, errs))
}

/// `1 - sum_k (lambda_k - 1)^2 / (2 d^2 (d + 2))` for eigenvalues summing
/// to `d`.
pub fn lift_factor(eigenvalues: &[f64]) -> f64 {
    let d = eigenvalues.len() as f64;
    let dev: f64 = eigenvalues.iter().map(|l| (l - 1.0) * (l - 1.0)).sum();
    1.0 - dev / (2.0 * d * d * (d + 2.0))
}

/// Expected isometry of `BN(W X)` over Haar `W`, against its lower bound.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IsometryLiftReport {
    pub d: usize,
    pub samples: usize,
    pub seed: u64,
    /// `I(X)`
    pub isometry_in: f64,
    /// `phi(X)`
    pub gap_in: f64,
    pub factor: f64,
    pub mean_isometry_out: f64,
    pub isometry_stderr: f64,
    /// `I(X) / factor`
    pub isometry_lower_bound: f64,
    pub mean_gap_out: f64,
    pub gap_stderr: f64,
    /// `phi(X) + log(factor)`
    pub gap_upper_bound: f64,
}

impl IsometryLiftReport {
    pub fn isometry_bound_holds(&self, n_stderr: f64) -> bool {
        self.mean_isometry_out >= self.isometry_lower_bound - n_stderr * self.isometry_stderr - 1e-12
    }

    pub fn gap_bound_holds(&self, n_stderr: f64) -> bool {
        self.mean_gap_out <= self.gap_upper_bound + n_stderr * self.gap_stderr + 1e-12
    }
}

/// Estimates `E_W[I(BN(W X))]` and `E_W[phi(BN(W X))]` over Haar `W` for a
/// square, full-rank `X` with `tr(X X^T) = d` (any simplified-BN output).
pub fn verify_isometry_lift(x: &RealMatrix, samples: usize, seed: u64, exec: Exec) -> Result<IsometryLiftReport> {
    check_samples(samples)?;
    let d = x.rows();
    if !x.is_square() {
        return Err(Error::Shape(format!("isometry lift needs a square matrix, got {:?}", x.shape())));
    }
    if numerical_rank(x) < d {
        return Err(Error::RankDeficient(format!("{d}x{d} input has rank {}", numerical_rank(x))));
    }
    let eigenvalues = gram_eigenvalues(x);
    let trace: f64 = eigenvalues.iter().sum();
    if (trace - d as f64).abs() > 1e-9 * d as f64 {
        return Err(Error::InvalidArgument(format!("expected tr(X X^T) = {d}, got {trace}")));
    }
    let factor = lift_factor(&eigenvalues);
    let (isometry_in, gap_in) = (isometry(x), isometry_gap(x));

    let m = mc_moments(exec, samples, seed, 2, |rng, out| {
        let w = sample_haar_orthogonal(d, rng).expect("d >= 1");
        // W X keeps full rank, so no row of it can vanish
        let y = bn_simplified(&w.matmul(x)).expect("full-rank input");
        let gap = isometry_gap(&y);
        out[0] = (-gap).exp();
        out[1] = gap;
    });
    Ok(IsometryLiftReport {
        d,
        samples,
        seed,
        isometry_in,
        gap_in,
        factor,
        mean_isometry_out: m[0].mean,
        isometry_stderr: m[0].std_error(),
        isometry_lower_bound: isometry_in / factor,
        mean_gap_out: m[1].mean,
        gap_stderr: m[1].std_error(),
        gap_upper_bound: gap_in + factor.ln(),
    })
}
