//! Seeded Monte Carlo estimation of expression expectations, used as the
//! statistical ground truth for the exact propagation code.
//!
//! Sampling is counter-based: a `(seed, stream)` pair fully determines a
//! sample stream, and estimates are accumulated over fixed-size chunks (one
//! stream per chunk) merged in chunk order, so results are bit-reproducible
//! and independent of any execution interleaving.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::dist::Distribution1D;
use crate::error::{Error, Result};
use crate::expand::RandomVectorSpec;
use crate::expr::{CompiledExpr, MomentExpr};
use crate::linalg::{eig_covariance, Mat, SymMatrix};

/// Monte Carlo estimate with its standard error of the mean.
#[derive(Clone, Copy, Debug)]
pub struct McEstimate {
    pub value: f64,
    pub std_error: f64,
    pub n_samples: u64,
}

const CHUNK: u64 = 1 << 16;

/// Deterministic sampler over a (seed, stream) pair. Gaussian draws use the
/// Box-Muller transform of uniforms, Exponential the inverse CDF.
pub struct SeededSampler {
    rng: ChaCha8Rng,
    spare_normal: Option<f64>,
}

impl SeededSampler {
    pub fn new(seed: u64, stream: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        SeededSampler {
            rng,
            spare_normal: None,
        }
    }

    /// Uniform draw in [0, 1).
    pub fn uniform01(&mut self) -> f64 {
        self.rng.random::<f64>()
    }

    pub fn standard_normal(&mut self) -> f64 {
        if let Some(z) = self.spare_normal.take() {
            return z;
        }
        let u1 = 1.0 - self.uniform01(); // (0, 1], keeps ln finite
        let u2 = self.uniform01();
        let r = (-2.0 * u1.ln()).sqrt();
        let angle = std::f64::consts::TAU * u2;
        self.spare_normal = Some(r * angle.sin());
        r * angle.cos()
    }

    pub fn sample(&mut self, d: &Distribution1D) -> f64 {
        match *d {
            Distribution1D::Gaussian { mean, variance } => {
                mean + variance.sqrt() * self.standard_normal()
            }
            Distribution1D::Exponential { rate } => {
                -(1.0 - self.uniform01()).ln() / rate
            }
            Distribution1D::Uniform { lower, upper } => {
                lower + (upper - lower) * self.uniform01()
            }
        }
    }
}

struct Welford {
    count: u64,
    mean: f64,
    m2: f64,
}

impl Welford {
    fn new() -> Self {
        Welford {
            count: 0,
            mean: 0.0,
            m2: 0.0,
        }
    }

    fn push(&mut self, x: f64) {
        self.count += 1;
        let delta = x - self.mean;
        self.mean += delta / self.count as f64;
        self.m2 += delta * (x - self.mean);
    }

    fn merge(&mut self, other: &Welford) {
        if other.count == 0 {
            return;
        }
        if self.count == 0 {
            self.count = other.count;
            self.mean = other.mean;
            self.m2 = other.m2;
            return;
        }
        let n1 = self.count as f64;
        let n2 = other.count as f64;
        let delta = other.mean - self.mean;
        let n = n1 + n2;
        self.mean += delta * n2 / n;
        self.m2 += other.m2 + delta * delta * n1 * n2 / n;
        self.count += other.count;
    }
}

/// Per-sample generator for a random vector: correlated Gaussian block via
/// the covariance square root T·diag(√λ), independent blocks directly.
struct VectorSampler<'a> {
    gaussian_dim: usize,
    mean: Vec<f64>,
    sqrt_cov: Option<Mat>,
    independent: &'a [(String, Distribution1D)],
}

impl<'a> VectorSampler<'a> {
    fn new(rv: &'a RandomVectorSpec) -> Self {
        match (rv.gaussian_block(), rv.whitened()) {
            (Some(block), Some(whitened)) => {
                let n = block.names.len();
                let mut sqrt_cov = Mat::zeros(n, n);
                for i in 0..n {
                    for j in 0..n {
                        sqrt_cov[(i, j)] =
                            whitened.transform[(i, j)] * whitened.variances[j].sqrt();
                    }
                }
                VectorSampler {
                    gaussian_dim: n,
                    mean: block.mean.clone(),
                    sqrt_cov: Some(sqrt_cov),
                    independent: rv.independent_vars(),
                }
            }
            _ => VectorSampler {
                gaussian_dim: 0,
                mean: vec![],
                sqrt_cov: None,
                independent: rv.independent_vars(),
            },
        }
    }

    /// Variable ordering matching `fill`: Gaussian block names then
    /// independent names.
    fn var_order(rv: &RandomVectorSpec) -> Vec<String> {
        let mut order = Vec::new();
        if let Some(block) = rv.gaussian_block() {
            order.extend(block.names.iter().cloned());
        }
        order.extend(rv.independent_vars().iter().map(|(n, _)| n.clone()));
        order
    }

    fn fill(&self, sampler: &mut SeededSampler, z: &mut Vec<f64>, values: &mut Vec<f64>) {
        values.clear();
        if let Some(sqrt_cov) = &self.sqrt_cov {
            z.clear();
            for _ in 0..self.gaussian_dim {
                z.push(sampler.standard_normal());
            }
            for i in 0..self.gaussian_dim {
                let mut x = self.mean[i];
                for j in 0..self.gaussian_dim {
                    x += sqrt_cov[(i, j)] * z[j];
                }
                values.push(x);
            }
        }
        for (_, d) in self.independent {
            values.push(sampler.sample(d));
        }
    }
}

/// Monte Carlo estimate of E[e] over `rv` with `n` samples.
pub fn mc_expectation(
    e: &MomentExpr,
    rv: &RandomVectorSpec,
    n: u64,
    seed: u64,
) -> Result<McEstimate> {
    if n < 1000 {
        return Err(Error::InvalidSpec(format!(
            "Monte Carlo needs at least 1000 samples, got {n}"
        )));
    }
    for v in e.vars() {
        if !rv.contains(&v) {
            return Err(Error::UnknownVariable(v));
        }
    }
    let order = VectorSampler::var_order(rv);
    let compiled = CompiledExpr::compile(e, &order)?;
    let vector_sampler = VectorSampler::new(rv);

    let mut total = Welford::new();
    let mut stack = Vec::new();
    let mut z = Vec::new();
    let mut values = Vec::new();
    let chunks = n.div_ceil(CHUNK);
    for chunk in 0..chunks {
        let count = CHUNK.min(n - chunk * CHUNK);
        let mut sampler = SeededSampler::new(seed, chunk);
        let mut acc = Welford::new();
        for _ in 0..count {
            vector_sampler.fill(&mut sampler, &mut z, &mut values);
            acc.push(compiled.eval_with(&values, &mut stack));
        }
        total.merge(&acc);
    }
    let variance = if total.count > 1 {
        total.m2 / (total.count - 1) as f64
    } else {
        0.0
    };
    Ok(McEstimate {
        value: total.mean,
        std_error: (variance / total.count as f64).sqrt(),
        n_samples: total.count,
    })
}

/// Draws `n` samples of a correlated Gaussian vector through the
/// eigendecomposition square root of the covariance.
pub fn sample_correlated_gaussian(
    mean: &[f64],
    cov: &SymMatrix,
    n: usize,
    seed: u64,
) -> Result<Vec<Vec<f64>>> {
    let dim = mean.len();
    if cov.dim() != dim {
        return Err(Error::DimensionMismatch(format!(
            "mean has {dim} entries but covariance is {}x{}",
            cov.dim(),
            cov.dim()
        )));
    }
    let dec = eig_covariance(cov)?;
    let mut sampler = SeededSampler::new(seed, 0);
    let mut out = Vec::with_capacity(n);
    for _ in 0..n {
        let z: Vec<f64> = (0..dim).map(|_| sampler.standard_normal()).collect();
        let mut x = mean.to_vec();
        for i in 0..dim {
            for j in 0..dim {
                x[i] += dec.transform[(i, j)] * dec.lambdas[j].sqrt() * z[j];
            }
        }
        out.push(x);
    }
    Ok(out)
}
