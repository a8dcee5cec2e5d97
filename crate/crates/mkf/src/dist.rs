//! Scalar distributions with closed-form characteristic-function derivatives,
//! and the evaluator for one-dimensional mixed-trigonometric-polynomial
//! moments E[(cθ)^{a1} cos^{a2}(cθ) sin^{a3}(cθ)].
//!
//! The evaluator rewrites cos/sin powers as complex exponentials, which turns
//! the moment into a signed double binomial sum of CF derivatives evaluated at
//! integer points t = 2(k1+k2) − a2 − a3. The argument scale c is folded in
//! through Φ_{cθ}(t) = Φ_θ(ct), whose p-th derivative is c^p Φ_θ^{(p)}(ct).

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Highest supported CF derivative order. Factorial growth in the closed
/// forms stays comfortably inside f64 range up to here; raise with care.
pub const CF_DERIVATIVE_ORDER_CAP: u32 = 16;

/// Relative tolerance on the imaginary residue of a moment sum. Anything
/// larger than floating-point dust indicates a formula bug and is an error.
pub const IMAGINARY_RESIDUE_TOL: f64 = 1e-9;

/// A scalar random variable with a closed-form characteristic function.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Distribution1D {
    Gaussian { mean: f64, variance: f64 },
    Exponential { rate: f64 },
    Uniform { lower: f64, upper: f64 },
}

impl Distribution1D {
    pub fn gaussian(mean: f64, variance: f64) -> Result<Self> {
        if !mean.is_finite() || !variance.is_finite() || variance < 0.0 {
            return Err(Error::InvalidDistribution(format!(
                "Gaussian requires finite mean and variance >= 0, got ({mean}, {variance})"
            )));
        }
        Ok(Distribution1D::Gaussian { mean, variance })
    }

    pub fn exponential(rate: f64) -> Result<Self> {
        if !rate.is_finite() || rate <= 0.0 {
            return Err(Error::InvalidDistribution(format!(
                "Exponential requires rate > 0, got {rate}"
            )));
        }
        Ok(Distribution1D::Exponential { rate })
    }

    pub fn uniform(lower: f64, upper: f64) -> Result<Self> {
        if !lower.is_finite() || !upper.is_finite() || lower >= upper {
            return Err(Error::InvalidDistribution(format!(
                "Uniform requires lower < upper, got ({lower}, {upper})"
            )));
        }
        Ok(Distribution1D::Uniform { lower, upper })
    }

    pub fn mean(&self) -> f64 {
        match *self {
            Distribution1D::Gaussian { mean, .. } => mean,
            Distribution1D::Exponential { rate } => 1.0 / rate,
            Distribution1D::Uniform { lower, upper } => 0.5 * (lower + upper),
        }
    }

    pub fn variance(&self) -> f64 {
        match *self {
            Distribution1D::Gaussian { variance, .. } => variance,
            Distribution1D::Exponential { rate } => 1.0 / (rate * rate),
            Distribution1D::Uniform { lower, upper } => {
                let w = upper - lower;
                w * w / 12.0
            }
        }
    }
}

/// Request for a 1-D mixed moment E[(cθ)^{a1} cos^{a2}(cθ) sin^{a3}(cθ)].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MomentSpec1D {
    pub poly_power: u32,
    pub cos_power: u32,
    pub sin_power: u32,
    pub arg_scale: f64,
}

impl MomentSpec1D {
    pub fn new(poly_power: u32, cos_power: u32, sin_power: u32, arg_scale: f64) -> Result<Self> {
        if !arg_scale.is_finite() {
            return Err(Error::InvalidSpec("non-finite argument scale".into()));
        }
        Ok(MomentSpec1D {
            poly_power,
            cos_power,
            sin_power,
            arg_scale,
        })
    }

    pub fn total_order(&self) -> u32 {
        self.poly_power + self.cos_power + self.sin_power
    }
}

fn i_pow(p: u32) -> Complex64 {
    match p % 4 {
        0 => Complex64::new(1.0, 0.0),
        1 => Complex64::new(0.0, 1.0),
        2 => Complex64::new(-1.0, 0.0),
        _ => Complex64::new(0.0, -1.0),
    }
}

fn factorial(n: u32) -> f64 {
    (1..=n).fold(1.0, |acc, k| acc * k as f64)
}

fn binomial(n: u32, k: u32) -> f64 {
    if k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    let mut acc = 1.0;
    for j in 0..k {
        acc = acc * (n - j) as f64 / (j + 1) as f64;
    }
    acc
}

/// p-th derivative of the characteristic function Φ_θ(t) = E[e^{itθ}].
pub fn cf_derivative(d: &Distribution1D, p: u32, t: f64) -> Result<Complex64> {
    if p > CF_DERIVATIVE_ORDER_CAP {
        return Err(Error::DerivativeOrderCap {
            order: p,
            cap: CF_DERIVATIVE_ORDER_CAP,
        });
    }
    match *d {
        Distribution1D::Gaussian { mean, variance } => Ok(gaussian_cf_derivative(mean, variance, p, t)),
        Distribution1D::Exponential { rate } => {
            // E[θ^p e^{itθ}] = p! λ / (λ - it)^{p+1}, so Φ^{(p)} = i^p times it
            let denom = Complex64::new(rate, -t);
            Ok(i_pow(p) * factorial(p) * rate / denom.powu(p + 1))
        }
        Distribution1D::Uniform { lower, upper } => Ok(uniform_cf_derivative(lower, upper, p, t)),
    }
}

fn gaussian_cf_derivative(mean: f64, variance: f64, p: u32, t: f64) -> Complex64 {
    // Φ' = (iμ - σ²t) Φ gives the two-term recurrence
    // Φ^{(k+1)} = (iμ - σ²t) Φ^{(k)} - k σ² Φ^{(k-1)}.
    let phi0 = Complex64::new(-0.5 * variance * t * t, mean * t).exp();
    if p == 0 {
        return phi0;
    }
    let g = Complex64::new(-variance * t, mean);
    let mut prev = phi0;
    let mut cur = g * phi0;
    for k in 1..p {
        let next = g * cur - (k as f64) * variance * prev;
        prev = cur;
        cur = next;
    }
    cur
}

/// J_k(s) = ∫_{-1}^{1} u^k e^{isu} du.
///
/// The integration-by-parts recurrence amplifies error by k/|s| per level, so
/// it is only used when |s| is large; a Maclaurin series covers small |s|.
fn uniform_basis_integral(k: u32, s: f64) -> Complex64 {
    const SERIES_SWITCH: f64 = 8.0;
    if s.abs() <= SERIES_SWITCH {
        let is = Complex64::new(0.0, s);
        let mut term = Complex64::new(1.0, 0.0); // (is)^m / m!
        let mut acc = Complex64::new(0.0, 0.0);
        let mut m: u32 = 0;
        loop {
            if (k + m) % 2 == 0 {
                acc += term * (2.0 / (k + m + 1) as f64);
            }
            m += 1;
            term = term * is / m as f64;
            if m > 2 * SERIES_SWITCH as u32 && term.norm() < 1e-22 {
                break;
            }
            if m > 200 {
                break;
            }
        }
        acc
    } else {
        let is = Complex64::new(0.0, s);
        let eis = Complex64::new(0.0, s).exp();
        let enis = Complex64::new(0.0, -s).exp();
        let mut j = (eis - enis) / is; // J_0 = 2 sin(s)/s
        for kk in 1..=k {
            let sign = if kk % 2 == 0 { 1.0 } else { -1.0 };
            let boundary = (eis - sign * enis) / is;
            j = boundary - (kk as f64) * j / is;
        }
        j
    }
}

fn uniform_cf_derivative(lower: f64, upper: f64, p: u32, t: f64) -> Complex64 {
    let width = upper - lower;
    if t == 0.0 {
        // exact raw-moment branch: Φ^{(p)}(0) = i^p (b^{p+1} - a^{p+1}) / ((p+1)(b-a))
        let raw = (upper.powi(p as i32 + 1) - lower.powi(p as i32 + 1)) / ((p + 1) as f64 * width);
        return i_pow(p) * raw;
    }
    // Φ^{(p)}(t) = i^p / (b-a) ∫_a^b θ^p e^{itθ} dθ, expanded about the midpoint
    let m = 0.5 * (lower + upper);
    let h = 0.5 * width;
    let s = t * h;
    let mut integral = Complex64::new(0.0, 0.0);
    for k in 0..=p {
        let coef = binomial(p, k) * m.powi((p - k) as i32) * h.powi(k as i32);
        if coef != 0.0 {
            integral += coef * uniform_basis_integral(k, s);
        }
    }
    integral *= h * Complex64::new(0.0, t * m).exp();
    i_pow(p) * integral / width
}

/// Exact mixed moment E[(cθ)^{a1} cos^{a2}(cθ) sin^{a3}(cθ)] via the signed
/// double binomial sum of CF derivatives at integer evaluation points.
pub fn mixed_moment_1d(d: &Distribution1D, spec: &MomentSpec1D) -> Result<f64> {
    let (a1, a2, a3) = (spec.poly_power, spec.cos_power, spec.sin_power);
    let c = spec.arg_scale;
    let mut sum = Complex64::new(0.0, 0.0);
    for k1 in 0..=a2 {
        for k2 in 0..=a3 {
            let t_int = 2.0 * (k1 + k2) as f64 - (a2 + a3) as f64;
            let phi = cf_derivative(d, a1, c * t_int)?;
            let sign = if (a3 - k2) % 2 == 1 { -1.0 } else { 1.0 };
            sum += binomial(a2, k1) * binomial(a3, k2) * sign * phi;
        }
    }
    let scale = c.powi(a1 as i32);
    let norm = i_pow(a1 + a3) * 2.0_f64.powi((a2 + a3) as i32);
    let value = sum * scale / norm;
    let tol = IMAGINARY_RESIDUE_TOL * value.re.abs().max(1.0);
    if !value.re.is_finite() || !value.im.is_finite() {
        return Err(Error::InvalidSpec(
            "non-finite value in mixed moment evaluation".into(),
        ));
    }
    if value.im.abs() > tol {
        return Err(Error::ImaginaryResidue {
            residue: value.im.abs(),
            tol,
        });
    }
    Ok(value.re)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn spec(a1: u32, a2: u32, a3: u32, c: f64) -> MomentSpec1D {
        MomentSpec1D::new(a1, a2, a3, c).unwrap()
    }

    #[test]
    fn cf_at_zero_is_one() {
        let dists = [
            Distribution1D::gaussian(0.3, 1.7).unwrap(),
            Distribution1D::exponential(2.5).unwrap(),
            Distribution1D::uniform(-PI / 3.0, PI / 6.0).unwrap(),
        ];
        for d in &dists {
            let v = cf_derivative(d, 0, 0.0).unwrap();
            assert_eq!(v, Complex64::new(1.0, 0.0));
        }
    }

    #[test]
    fn gaussian_first_derivative_at_zero_is_i_mean() {
        let d = Distribution1D::gaussian(0.0, 1.0).unwrap();
        let v = cf_derivative(&d, 1, 0.0).unwrap();
        assert!((v - Complex64::new(0.0, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn exponential_cf_value() {
        // λ/(λ - it) at λ=1, t=1 is 1/(1-i) = 0.5 + 0.5i
        let d = Distribution1D::exponential(1.0).unwrap();
        let v = cf_derivative(&d, 0, 1.0).unwrap();
        assert!((v - Complex64::new(0.5, 0.5)).norm() < 1e-15);
    }

    #[test]
    fn uniform_first_derivative_at_zero() {
        let d = Distribution1D::uniform(-PI / 3.0, PI / 6.0).unwrap();
        let v = cf_derivative(&d, 1, 0.0).unwrap();
        // i E[θ] with E[θ] = -π/12
        assert!((v - Complex64::new(0.0, -PI / 12.0)).norm() < 1e-15);
    }

    #[test]
    fn cf_modulus_bounded_by_one() {
        let dists = [
            Distribution1D::gaussian(1.2, 0.8).unwrap(),
            Distribution1D::exponential(0.7).unwrap(),
            Distribution1D::uniform(-2.0, 5.0).unwrap(),
        ];
        for d in &dists {
            for k in -20..=20 {
                let t = k as f64 * 0.37;
                assert!(cf_derivative(d, 0, t).unwrap().norm() <= 1.0 + 1e-12);
            }
        }
    }

    #[test]
    fn cf_conjugate_symmetry() {
        let dists = [
            Distribution1D::gaussian(0.4, 2.0).unwrap(),
            Distribution1D::exponential(1.3).unwrap(),
            Distribution1D::uniform(-1.0, 3.0).unwrap(),
        ];
        for d in &dists {
            for k in 1..=15 {
                let t = k as f64 * 0.61;
                let plus = cf_derivative(d, 0, t).unwrap();
                let minus = cf_derivative(d, 0, -t).unwrap();
                assert!((plus.conj() - minus).norm() < 1e-13);
            }
        }
    }

    #[test]
    fn order_cap_is_enforced() {
        let d = Distribution1D::gaussian(0.0, 1.0).unwrap();
        assert!(matches!(
            cf_derivative(&d, CF_DERIVATIVE_ORDER_CAP + 1, 0.0),
            Err(Error::DerivativeOrderCap { .. })
        ));
    }

    // independent raw-moment oracles
    fn gaussian_raw_moment(mean: f64, variance: f64, n: u32) -> f64 {
        // E[θ^n] from the recurrence m_n = μ m_{n-1} + (n-1) σ² m_{n-2}
        let mut m_prev = 1.0;
        let mut m_cur = mean;
        if n == 0 {
            return 1.0;
        }
        for k in 2..=n {
            let next = mean * m_cur + (k - 1) as f64 * variance * m_prev;
            m_prev = m_cur;
            m_cur = next;
        }
        m_cur
    }

    fn exponential_raw_moment(rate: f64, n: u32) -> f64 {
        factorial(n) / rate.powi(n as i32)
    }

    fn uniform_raw_moment(a: f64, b: f64, n: u32) -> f64 {
        (b.powi(n as i32 + 1) - a.powi(n as i32 + 1)) / ((n + 1) as f64 * (b - a))
    }

    #[test]
    fn pure_polynomial_moments_match_analytic() {
        let g = Distribution1D::gaussian(0.7, 1.9).unwrap();
        let e = Distribution1D::exponential(1.4).unwrap();
        let u = Distribution1D::uniform(-0.8, 2.2).unwrap();
        for n in 0..=6u32 {
            let cases: [(&Distribution1D, f64); 3] = [
                (&g, gaussian_raw_moment(0.7, 1.9, n)),
                (&e, exponential_raw_moment(1.4, n)),
                (&u, uniform_raw_moment(-0.8, 2.2, n)),
            ];
            for (d, expected) in cases {
                let got = mixed_moment_1d(d, &spec(n, 0, 0, 1.0)).unwrap();
                let tol = 1e-10 * expected.abs().max(1.0);
                assert!(
                    (got - expected).abs() <= tol,
                    "n={n} d={d:?} got={got} expected={expected}"
                );
            }
        }
    }

    #[test]
    fn gaussian_mean_is_first_moment() {
        let d = Distribution1D::gaussian(3.25, 0.5).unwrap();
        assert!((mixed_moment_1d(&d, &spec(1, 0, 0, 1.0)).unwrap() - 3.25).abs() < 1e-12);
    }

    #[test]
    fn exponential_mean_is_one_over_rate() {
        let d = Distribution1D::exponential(1.0).unwrap();
        assert!((mixed_moment_1d(&d, &spec(1, 0, 0, 1.0)).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn gaussian_cos_moment_matches_closed_form() {
        // E[cos θ] = e^{-σ²/2} cos μ for θ ~ N(μ, σ²)
        let (mu, var) = (PI / 3.0, PI / 6.0);
        let d = Distribution1D::gaussian(mu, var).unwrap();
        let expected = (-var / 2.0).exp() * mu.cos();
        let got = mixed_moment_1d(&d, &spec(0, 1, 0, 1.0)).unwrap();
        assert!((got - expected).abs() < 1e-12);
        assert!((got - 0.3848).abs() < 5e-5);
    }

    #[test]
    fn uniform_cos_sin_moment() {
        // E[cos θ sin θ] = (cos 2a - cos 2b) / (4 (b-a)) for θ ~ U(a, b)
        let (a, b) = (-PI / 3.0, PI / 6.0);
        let d = Distribution1D::uniform(a, b).unwrap();
        let expected = ((2.0 * a).cos() - (2.0 * b).cos()) / (4.0 * (b - a));
        let got = mixed_moment_1d(&d, &spec(0, 1, 1, 1.0)).unwrap();
        assert!((got - expected).abs() < 1e-12);
        assert!((got - (-0.159)).abs() < 5e-4);
    }

    #[test]
    fn pythagorean_closure() {
        let dists = [
            Distribution1D::gaussian(0.9, 2.4).unwrap(),
            Distribution1D::exponential(0.6).unwrap(),
            Distribution1D::uniform(-2.4, 0.9).unwrap(),
        ];
        for d in &dists {
            for &c in &[1.0, 0.31, 2.7] {
                let cos2 = mixed_moment_1d(d, &spec(0, 2, 0, c)).unwrap();
                let sin2 = mixed_moment_1d(d, &spec(0, 0, 2, c)).unwrap();
                assert!((cos2 + sin2 - 1.0).abs() < 1e-10, "d={d:?} c={c}");
            }
        }
    }

    #[test]
    fn scaled_argument_matches_rescaled_uniform() {
        // E[f(cθ)] for θ ~ U(a,b) equals E[f(ψ)] for ψ ~ U(ca, cb), c > 0.
        // Exercises both the series and recurrence branches of the uniform CF.
        let (a, b) = (-0.7, 1.9);
        for &c in &[0.05, 0.5, 3.0, 9.0] {
            let scaled = Distribution1D::uniform(a, b).unwrap();
            let direct = Distribution1D::uniform(c * a, c * b).unwrap();
            for (a1, a2, a3) in [(0, 1, 0), (0, 2, 1), (1, 1, 1), (2, 0, 2), (3, 2, 0)] {
                let via_scale = mixed_moment_1d(&scaled, &spec(a1, a2, a3, c)).unwrap();
                let via_dist = mixed_moment_1d(&direct, &spec(a1, a2, a3, 1.0)).unwrap();
                let tol = 1e-9 * via_dist.abs().max(1.0);
                assert!(
                    (via_scale - via_dist).abs() <= tol,
                    "c={c} spec=({a1},{a2},{a3}): {via_scale} vs {via_dist}"
                );
            }
        }
    }

    #[test]
    fn zero_variance_gaussian_is_point_mass() {
        let d = Distribution1D::gaussian(0.8, 0.0).unwrap();
        let got = mixed_moment_1d(&d, &spec(2, 1, 1, 1.5)).unwrap();
        let x: f64 = 1.5 * 0.8;
        let expected = x * x * x.cos() * x.sin();
        assert!((got - expected).abs() < 1e-12);
    }

    #[test]
    fn constructor_validation() {
        assert!(Distribution1D::gaussian(0.0, -1.0).is_err());
        assert!(Distribution1D::exponential(0.0).is_err());
        assert!(Distribution1D::uniform(1.0, 1.0).is_err());
        assert!(Distribution1D::uniform(2.0, 1.0).is_err());
    }
}
