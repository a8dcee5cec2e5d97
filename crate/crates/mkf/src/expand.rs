//! Exact expectations of mixed-trigonometric-polynomial expressions over
//! block-structured random vectors.
//!
//! A random vector here is one (optional) correlated Gaussian block plus any
//! number of independent scalar variables. The Gaussian block is whitened
//! through the eigendecomposition of its covariance, Σ = T Λ Tᵀ: substituting
//! x_i = Σ_j T_ij y_j with independent y_j ~ N((Tᵀμ)_j, λ_j) turns the
//! expression into a mixed-trigonometric polynomial in independent variables,
//! whose expectation factors variable-by-variable into 1-D moments evaluated
//! in closed form by [`crate::dist::mixed_moment_1d`].

use std::cell::RefCell;
use std::collections::{BTreeMap, HashMap};

use crate::dist::{mixed_moment_1d, Distribution1D, MomentSpec1D};
use crate::error::{Error, Result};
use crate::expr::flatten::{flatten_raw, multiply_raw, RawTerms, VarTable};
use crate::expr::{MomentExpr, DEFAULT_TERM_CAP};
use crate::linalg::{eig_covariance, Mat, SymMatrix};

/// Correlated Gaussian block: named components with joint mean and covariance.
#[derive(Clone, Debug)]
pub struct GaussianBlock {
    pub names: Vec<String>,
    pub mean: Vec<f64>,
    pub cov: SymMatrix,
}

/// Whitened form of a Gaussian block: orthogonal transform, per-component
/// means ȳ = Tᵀμ and variances λ (the eigenvalues, clamped at zero).
#[derive(Clone, Debug)]
pub struct WhitenedGaussian {
    pub transform: Mat,
    pub means: Vec<f64>,
    pub variances: Vec<f64>,
}

/// A block-structured random vector: one correlated Gaussian block plus
/// independent scalar variables. Whitening happens at construction, which
/// also validates that the covariance is positive semidefinite.
#[derive(Clone, Debug)]
pub struct RandomVectorSpec {
    gaussian: Option<(GaussianBlock, WhitenedGaussian)>,
    independent: Vec<(String, Distribution1D)>,
}

fn is_identifier(name: &str) -> bool {
    let mut chars = name.chars();
    match chars.next() {
        Some(c) if c.is_ascii_alphabetic() || c == '_' => {}
        _ => return false,
    }
    chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

impl RandomVectorSpec {
    pub fn new(
        gaussian: Option<GaussianBlock>,
        independent: Vec<(String, Distribution1D)>,
    ) -> Result<Self> {
        let mut seen = std::collections::BTreeSet::new();
        let mut check_name = |name: &str| -> Result<()> {
            if !is_identifier(name) {
                return Err(Error::InvalidSpec(format!(
                    "variable name `{name}` is not a valid identifier"
                )));
            }
            if !seen.insert(name.to_string()) {
                return Err(Error::InvalidSpec(format!(
                    "duplicate variable name `{name}`"
                )));
            }
            Ok(())
        };
        if let Some(block) = &gaussian {
            let n = block.names.len();
            if block.mean.len() != n || block.cov.dim() != n {
                return Err(Error::DimensionMismatch(format!(
                    "gaussian block: {} names, {} means, {}x{} covariance",
                    n,
                    block.mean.len(),
                    block.cov.dim(),
                    block.cov.dim()
                )));
            }
            if block.mean.iter().any(|m| !m.is_finite()) {
                return Err(Error::InvalidSpec("non-finite mean".into()));
            }
            for name in &block.names {
                check_name(name)?;
            }
        }
        for (name, _) in &independent {
            check_name(name)?;
        }
        let gaussian = match gaussian {
            None => None,
            Some(block) => {
                let dec = eig_covariance(&block.cov)?;
                let means = dec.transform.transpose().mul_vec(&block.mean);
                let whitened = WhitenedGaussian {
                    transform: dec.transform,
                    means,
                    variances: dec.lambdas,
                };
                Some((block, whitened))
            }
        };
        Ok(RandomVectorSpec {
            gaussian,
            independent,
        })
    }

    pub fn gaussian(names: &[&str], mean: Vec<f64>, cov: SymMatrix) -> Result<Self> {
        RandomVectorSpec::new(
            Some(GaussianBlock {
                names: names.iter().map(|s| s.to_string()).collect(),
                mean,
                cov,
            }),
            vec![],
        )
    }

    pub fn independent(vars: Vec<(String, Distribution1D)>) -> Result<Self> {
        RandomVectorSpec::new(None, vars)
    }

    pub fn gaussian_block(&self) -> Option<&GaussianBlock> {
        self.gaussian.as_ref().map(|(b, _)| b)
    }

    pub fn whitened(&self) -> Option<&WhitenedGaussian> {
        self.gaussian.as_ref().map(|(_, w)| w)
    }

    pub fn independent_vars(&self) -> &[(String, Distribution1D)] {
        &self.independent
    }

    pub fn contains(&self, name: &str) -> bool {
        self.gaussian_block()
            .map(|b| b.names.iter().any(|n| n == name))
            .unwrap_or(false)
            || self.independent.iter().any(|(n, _)| n == name)
    }

    /// Mean of a named component (declared law mean for independent blocks).
    pub fn mean_of(&self, name: &str) -> Option<f64> {
        if let Some(block) = self.gaussian_block() {
            if let Some(i) = block.names.iter().position(|n| n == name) {
                return Some(block.mean[i]);
            }
        }
        self.independent
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, d)| d.mean())
    }

    /// Correlation-ignoring variant: the Gaussian block is replaced by
    /// independent Gaussians with the marginal means and variances, dropping
    /// all off-diagonal covariance.
    pub fn decorrelated(&self) -> Result<RandomVectorSpec> {
        let mut independent = self.independent.clone();
        if let Some(block) = self.gaussian_block() {
            for (i, name) in block.names.iter().enumerate() {
                independent.insert(
                    i,
                    (
                        name.clone(),
                        Distribution1D::gaussian(block.mean[i], block.cov.get(i, i).max(0.0))?,
                    ),
                );
            }
        }
        RandomVectorSpec::new(None, independent)
    }
}

/// Whitened-variable names are generated with a prefix the parser cannot
/// produce, so they can never collide with user variables.
fn whitened_name(j: usize) -> String {
    format!("#y{j}")
}

/// Cache key for a 1-D moment request: variable id (which fixes the
/// distribution within one expander) plus the exponent triple and scale bits.
type MomentKey = (u32, u32, u32, u32, u64);

/// Expectation engine bound to one random vector. Construction performs the
/// variable substitution bookkeeping once; each expectation call then
/// flattens and evaluates in an interned-variable domain. Identical 1-D
/// moment requests are memoized across calls on the same expander, so an
/// expander is cheap to reuse for a batch but is not meant to be shared
/// across threads.
pub struct Expander<'a> {
    rv: &'a RandomVectorSpec,
    subst: BTreeMap<String, MomentExpr>,
    dists: BTreeMap<String, Distribution1D>,
    term_cap: usize,
    table: RefCell<VarTable>,
    dist_by_id: RefCell<Vec<Distribution1D>>,
    moment_cache: RefCell<HashMap<MomentKey, f64>>,
}

impl<'a> Expander<'a> {
    pub fn new(rv: &'a RandomVectorSpec) -> Result<Self> {
        let mut subst = BTreeMap::new();
        let mut dists = BTreeMap::new();
        if let Some((block, whitened)) = &rv.gaussian {
            let n = block.names.len();
            for j in 0..n {
                dists.insert(
                    whitened_name(j),
                    Distribution1D::gaussian(whitened.means[j], whitened.variances[j])?,
                );
            }
            for (i, name) in block.names.iter().enumerate() {
                let mut terms = Vec::new();
                for j in 0..n {
                    let t_ij = whitened.transform[(i, j)];
                    if t_ij != 0.0 {
                        terms.push(MomentExpr::product(vec![
                            MomentExpr::Constant(t_ij),
                            MomentExpr::var(whitened_name(j)),
                        ]));
                    }
                }
                subst.insert(name.clone(), MomentExpr::sum(terms));
            }
        }
        for (name, d) in &rv.independent {
            dists.insert(name.clone(), *d);
        }
        Ok(Expander {
            rv,
            subst,
            dists,
            term_cap: DEFAULT_TERM_CAP,
            table: RefCell::new(VarTable::new()),
            dist_by_id: RefCell::new(Vec::new()),
            moment_cache: RefCell::new(HashMap::new()),
        })
    }

    pub fn with_term_cap(mut self, cap: usize) -> Self {
        self.term_cap = cap;
        self
    }

    fn check_vars(&self, e: &MomentExpr) -> Result<()> {
        for v in e.vars() {
            if !self.rv.contains(&v) {
                return Err(Error::UnknownVariable(v));
            }
        }
        Ok(())
    }

    /// Whitens (for Gaussian-block variables) and flattens an expression;
    /// the returned terms are over independent variables only.
    fn flatten_expr(&self, e: &MomentExpr) -> Result<RawTerms> {
        self.check_vars(e)?;
        let substituted = e.substitute(&self.subst)?;
        let raw = flatten_raw(&substituted, self.term_cap, &mut self.table.borrow_mut())?;
        // resolve distributions for any newly interned variables
        let table = self.table.borrow();
        let mut by_id = self.dist_by_id.borrow_mut();
        while by_id.len() < table.len() {
            let name = table.name(by_id.len() as u32);
            let d = self
                .dists
                .get(name)
                .ok_or_else(|| Error::UnknownVariable(name.to_string()))?;
            by_id.push(*d);
        }
        Ok(raw)
    }

    /// Expectation of flattened terms: sum over terms of the product of
    /// memoized 1-D moments.
    fn terms_expectation(&self, terms: &RawTerms) -> Result<f64> {
        let by_id = self.dist_by_id.borrow();
        let mut cache = self.moment_cache.borrow_mut();
        terms.accumulate(&mut |var, f| {
            let key = (
                var,
                f.poly_power,
                f.cos_power,
                f.sin_power,
                f.arg_scale.to_bits(),
            );
            if let Some(v) = cache.get(&key) {
                return Ok(*v);
            }
            let spec = MomentSpec1D::new(f.poly_power, f.cos_power, f.sin_power, f.arg_scale)?;
            let v = mixed_moment_1d(&by_id[var as usize], &spec)?;
            cache.insert(key, v);
            Ok(v)
        })
    }

    /// Exact expectation of `e` over the bound random vector.
    pub fn expectation(&self, e: &MomentExpr) -> Result<f64> {
        let terms = self.flatten_expr(e)?;
        self.terms_expectation(&terms)
    }

    pub fn expectation_vector(&self, es: &[MomentExpr]) -> Result<Vec<f64>> {
        es.iter().map(|e| self.expectation(e)).collect()
    }

    /// Raw second-moment matrix E[e_i e_j]. Each expression is flattened once
    /// and the pairwise products are formed on the flattened terms.
    pub fn second_moment_matrix(&self, es: &[MomentExpr]) -> Result<SymMatrix> {
        let n = es.len();
        let flattened: Vec<RawTerms> = es
            .iter()
            .map(|e| self.flatten_expr(e))
            .collect::<Result<_>>()?;
        let mut values = vec![0.0; n * n];
        for i in 0..n {
            for j in i..n {
                let prod = multiply_raw(&flattened[i], &flattened[j], self.term_cap)?;
                let v = self.terms_expectation(&prod)?;
                values[i * n + j] = v;
                values[j * n + i] = v;
            }
        }
        SymMatrix::new(n, values)
    }

    /// Cross-moment matrix E[a_i b_j] for two expression lists.
    pub fn cross_moment_matrix(&self, a: &[MomentExpr], b: &[MomentExpr]) -> Result<Mat> {
        let fa: Vec<RawTerms> = a.iter().map(|e| self.flatten_expr(e)).collect::<Result<_>>()?;
        let fb: Vec<RawTerms> = b.iter().map(|e| self.flatten_expr(e)).collect::<Result<_>>()?;
        let mut out = Mat::zeros(a.len(), b.len());
        for i in 0..a.len() {
            for j in 0..b.len() {
                let prod = multiply_raw(&fa[i], &fb[j], self.term_cap)?;
                out[(i, j)] = self.terms_expectation(&prod)?;
            }
        }
        Ok(out)
    }
}

/// Exact expectation of `e` over `rv`.
pub fn expectation(e: &MomentExpr, rv: &RandomVectorSpec) -> Result<f64> {
    Expander::new(rv)?.expectation(e)
}

/// Batched expectations sharing one whitening.
pub fn expectation_vector(es: &[MomentExpr], rv: &RandomVectorSpec) -> Result<Vec<f64>> {
    Expander::new(rv)?.expectation_vector(es)
}

/// Raw second-moment matrix E[e_i e_j] over `rv`.
pub fn second_moment_matrix(es: &[MomentExpr], rv: &RandomVectorSpec) -> Result<SymMatrix> {
    Expander::new(rv)?.second_moment_matrix(es)
}

/// The correlation-ignoring path: per-component moments with all
/// off-diagonal covariance dropped.
pub fn expectation_ignoring_correlations(e: &MomentExpr, rv: &RandomVectorSpec) -> Result<f64> {
    expectation(e, &rv.decorrelated()?)
}

/// Mean substitution: evaluates `e` at the component means (the first-order
/// "linear" propagation value).
pub fn mean_substitution(e: &MomentExpr, rv: &RandomVectorSpec) -> Result<f64> {
    let mut env = BTreeMap::new();
    for v in e.vars() {
        let m = rv
            .mean_of(&v)
            .ok_or_else(|| Error::UnknownVariable(v.clone()))?;
        env.insert(v, m);
    }
    e.eval(&env)
}
