//! Laws of the random number of summands `N`.
//!
//! Every infinite expectation over `N` in this crate is evaluated as a finite
//! sum plus an analytic bound on the discarded tail, obtained from
//! [`IndexModel::tail_mass`] and [`IndexModel::tail_first_moment`].

use std::fmt;
use std::sync::Arc;

use libm::lgamma as ln_gamma;
use rand::Rng;
use rand_distr::{Binomial, Distribution, Geometric, Poisson};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::numeric::{Certified, KahanSum};

/// Largest truncation point any series over `N` may use.
pub const MAX_TRUNCATION: u64 = 50_000_000;

/// Default tolerance for certified series over the index.
pub const DEFAULT_SERIES_TOL: f64 = 1e-10;

/// Geometric envelope `P(N = n) <= scale * ratio^n` for the unlisted part of a
/// custom pmf.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TailEnvelope {
    pub scale: f64,
    pub ratio: f64,
}

impl TailEnvelope {
    /// Upper bound on `sum_{n >= start} n^power * scale * ratio^n` for power 0, 1, 2.
    fn moment_from(&self, start: u64, power: u32) -> f64 {
        let r = self.ratio;
        let s = start as f64;
        let rs = self.scale * r.powf(s);
        let d = 1.0 - r;
        match power {
            0 => rs / d,
            1 => rs * (s - (s - 1.0) * r) / (d * d),
            _ => rs * (r * (1.0 + r) / (d * d * d) + 2.0 * s * r / (d * d) + s * s / d),
        }
    }
}

/// Custom index law: explicit probabilities for `n = 0..probs.len()`, plus an
/// optional envelope bounding the unlisted remainder.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CustomPmf {
    pub probs: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tail: Option<TailEnvelope>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum IndexModel {
    /// `P(N = k) = p (1-p)^(k-1)` for `k >= 1`.
    Geometric {
        p: f64,
    },
    Poisson {
        lambda: f64,
    },
    Binomial {
        m: u64,
        p: f64,
    },
    Custom(CustomPmf),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IndexMoments {
    pub mean: f64,
    pub variance: f64,
    /// Bound on the error of `mean` and `variance` (zero for closed forms).
    pub error: f64,
}

const PMF_SUM_TOL: f64 = 1e-12;

impl IndexModel {
    pub fn geometric(p: f64) -> Result<Self> {
        let m = IndexModel::Geometric { p };
        m.validate()?;
        Ok(m)
    }

    pub fn poisson(lambda: f64) -> Result<Self> {
        let m = IndexModel::Poisson { lambda };
        m.validate()?;
        Ok(m)
    }

    pub fn binomial(m: u64, p: f64) -> Result<Self> {
        let model = IndexModel::Binomial { m, p };
        model.validate()?;
        Ok(model)
    }

    /// Finitely supported custom law.
    pub fn custom(probs: Vec<f64>) -> Result<Self> {
        let m = IndexModel::Custom(CustomPmf { probs, tail: None });
        m.validate()?;
        Ok(m)
    }

    pub fn custom_with_tail(probs: Vec<f64>, tail: TailEnvelope) -> Result<Self> {
        let m = IndexModel::Custom(CustomPmf {
            probs,
            tail: Some(tail),
        });
        m.validate()?;
        Ok(m)
    }

    /// Point mass at `n`.
    pub fn deterministic(n: u64) -> Self {
        let mut probs = vec![0.0; n as usize + 1];
        probs[n as usize] = 1.0;
        IndexModel::Custom(CustomPmf { probs, tail: None })
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            IndexModel::Geometric { p } => {
                if !(*p > 0.0 && *p <= 1.0) {
                    return Err(invalid(
                        "p",
                        format!("geometric p must lie in (0, 1], got {p}"),
                    ));
                }
            }
            IndexModel::Poisson { lambda } => {
                if !(*lambda > 0.0 && lambda.is_finite()) {
                    return Err(invalid("lambda", format!("must be positive, got {lambda}")));
                }
            }
            IndexModel::Binomial { p, .. } => {
                if !(0.0..=1.0).contains(p) {
                    return Err(invalid(
                        "p",
                        format!("binomial p must lie in [0, 1], got {p}"),
                    ));
                }
            }
            IndexModel::Custom(c) => {
                if c.probs.is_empty() {
                    return Err(Error::InvalidPmf("no probabilities listed".into()));
                }
                if let Some(bad) = c.probs.iter().find(|x| !(0.0..=1.0).contains(*x)) {
                    return Err(Error::InvalidPmf(format!(
                        "probability {bad} outside [0, 1]"
                    )));
                }
                let listed: f64 = c.probs.iter().copied().collect::<KahanSum>().total();
                if listed > 1.0 + PMF_SUM_TOL {
                    return Err(Error::InvalidPmf(format!("listed mass {listed} exceeds 1")));
                }
                let deficit = (1.0 - listed).max(0.0);
                match c.tail {
                    None if deficit > PMF_SUM_TOL => {
                        return Err(Error::InvalidPmf(format!(
                            "listed mass {listed} falls short of 1 and no tail envelope is declared"
                        )))
                    }
                    None => {}
                    Some(env) => {
                        if !(env.ratio > 0.0 && env.ratio < 1.0 && env.scale > 0.0) {
                            return Err(Error::InvalidPmf(
                                "tail envelope needs scale > 0 and ratio in (0, 1)".into(),
                            ));
                        }
                        let cap = env.moment_from(c.probs.len() as u64, 0);
                        if deficit > cap + PMF_SUM_TOL {
                            return Err(Error::InvalidPmf(format!(
                                "missing mass {deficit:e} exceeds the declared envelope {cap:e}"
                            )));
                        }
                    }
                }
            }
        }
        Ok(())
    }

    /// `P(N = n)`. For a custom law with an envelope, unlisted values are
    /// unknown and reported as 0.
    pub fn pmf(&self, n: u64) -> f64 {
        match *self {
            IndexModel::Geometric { p } => {
                if n == 0 {
                    0.0
                } else if p == 1.0 {
                    if n == 1 {
                        1.0
                    } else {
                        0.0
                    }
                } else {
                    p * ((n - 1) as f64 * (-p).ln_1p()).exp()
                }
            }
            IndexModel::Poisson { lambda } => {
                let k = n as f64;
                (k * lambda.ln() - lambda - ln_gamma(k + 1.0)).exp()
            }
            IndexModel::Binomial { m, p } => {
                if n > m {
                    return 0.0;
                }
                if p == 0.0 {
                    return if n == 0 { 1.0 } else { 0.0 };
                }
                if p == 1.0 {
                    return if n == m { 1.0 } else { 0.0 };
                }
                let (mf, k) = (m as f64, n as f64);
                let ln_c = ln_gamma(mf + 1.0) - ln_gamma(k + 1.0) - ln_gamma(mf - k + 1.0);
                (ln_c + k * p.ln() + (mf - k) * (-p).ln_1p()).exp()
            }
            IndexModel::Custom(ref c) => c.probs.get(n as usize).copied().unwrap_or(0.0),
        }
    }

    /// Smallest `n` with positive probability (custom laws: first nonzero entry).
    pub fn support_start(&self) -> u64 {
        match self {
            IndexModel::Geometric { .. } => 1,
            IndexModel::Poisson { .. } => 0,
            IndexModel::Binomial { m, p } => {
                if *p == 1.0 {
                    *m
                } else {
                    0
                }
            }
            IndexModel::Custom(c) => c.probs.iter().position(|&x| x > 0.0).unwrap_or(0) as u64,
        }
    }

    /// Largest `n` up to which `pmf` is exact. `None` when unbounded.
    fn last_known(&self) -> Option<u64> {
        match self {
            IndexModel::Geometric { p } if *p == 1.0 => Some(1),
            IndexModel::Geometric { .. } | IndexModel::Poisson { .. } => None,
            IndexModel::Binomial { m, p } => Some(if *p == 0.0 { 0 } else { *m }),
            IndexModel::Custom(c) => Some(c.probs.len() as u64 - 1),
        }
    }

    /// Upper bound on `P(N > k)`.
    pub fn tail_mass(&self, k: u64) -> f64 {
        match self {
            IndexModel::Geometric { p } => {
                if *p == 1.0 {
                    if k == 0 {
                        1.0
                    } else {
                        0.0
                    }
                } else {
                    (k as f64 * (-p).ln_1p()).exp()
                }
            }
            IndexModel::Poisson { lambda } => poisson_chernoff(*lambda, k + 1),
            IndexModel::Binomial { m, p } => {
                if k >= *m || *p == 0.0 {
                    0.0
                } else {
                    1.0
                }
            }
            IndexModel::Custom(c) => {
                let len = c.probs.len() as u64;
                let listed: f64 = if k + 1 < len {
                    c.probs[(k + 1) as usize..].iter().sum()
                } else {
                    0.0
                };
                let env = c.tail.map_or(0.0, |e| e.moment_from(len.max(k + 1), 0));
                (listed + env).min(1.0)
            }
        }
    }

    /// Upper bound on `E[N; N > k]`.
    pub fn tail_first_moment(&self, k: u64) -> f64 {
        match self {
            IndexModel::Geometric { p } => {
                if *p == 1.0 {
                    if k == 0 {
                        1.0
                    } else {
                        0.0
                    }
                } else {
                    (k as f64 * (-p).ln_1p()).exp() * (k as f64 + 1.0 / p)
                }
            }
            // E[N; N > k] = lambda P(N >= k)
            IndexModel::Poisson { lambda } => {
                if k == 0 {
                    *lambda
                } else {
                    lambda * poisson_chernoff(*lambda, k)
                }
            }
            IndexModel::Binomial { m, p } => {
                if k >= *m || *p == 0.0 {
                    0.0
                } else {
                    *m as f64 * p
                }
            }
            IndexModel::Custom(c) => {
                let len = c.probs.len() as u64;
                let listed: f64 = (k + 1..len).map(|n| n as f64 * c.probs[n as usize]).sum();
                let env = c.tail.map_or(0.0, |e| e.moment_from(len.max(k + 1), 1));
                listed + env
            }
        }
    }

    /// Mean and variance. Closed forms for the named families; summed with a
    /// tail bound for custom laws.
    pub fn moments(&self) -> Result<IndexMoments> {
        self.validate()?;
        let m = match *self {
            IndexModel::Geometric { p } => IndexMoments {
                mean: 1.0 / p,
                variance: (1.0 - p) / (p * p),
                error: 0.0,
            },
            IndexModel::Poisson { lambda } => IndexMoments {
                mean: lambda,
                variance: lambda,
                error: 0.0,
            },
            IndexModel::Binomial { m, p } => IndexMoments {
                mean: m as f64 * p,
                variance: m as f64 * p * (1.0 - p),
                error: 0.0,
            },
            IndexModel::Custom(ref c) => {
                let mut s1 = KahanSum::new();
                let mut s2 = KahanSum::new();
                for (n, &q) in c.probs.iter().enumerate() {
                    let x = n as f64;
                    s1.add(x * q);
                    s2.add(x * x * q);
                }
                let mean = s1.total();
                let variance = (s2.total() - mean * mean).max(0.0);
                let error = match c.tail {
                    None => 0.0,
                    Some(env) => {
                        let len = c.probs.len() as u64;
                        let e1 = env.moment_from(len, 1);
                        let e2 = env.moment_from(len, 2);
                        e1.max(e2 + 2.0 * mean * e1 + e1 * e1)
                    }
                };
                if !error.is_finite() {
                    return Err(Error::NoTailBound("custom envelope moments diverge".into()));
                }
                IndexMoments {
                    mean,
                    variance,
                    error,
                }
            }
        };
        Ok(m)
    }

    /// `E[N]`, failing unless it is strictly positive.
    pub fn mean(&self) -> Result<f64> {
        let mu = self.moments()?.mean;
        if mu > 0.0 {
            Ok(mu)
        } else {
            Err(Error::NonPositiveMean(mu))
        }
    }

    pub fn variance(&self) -> Result<f64> {
        Ok(self.moments()?.variance)
    }

    /// Smallest truncation point `K` with `tail(K) <= tol`, where `tail` is a
    /// nonincreasing upper bound on the discarded part of a series.
    pub fn truncation_point<T: Fn(u64) -> f64>(&self, tail: T, tol: f64) -> Result<u64> {
        if !(tol > 0.0) {
            return Err(invalid("tol", format!("must be positive, got {tol}")));
        }
        let start = self.support_start();
        if tail(start) <= tol {
            return Ok(start);
        }
        let limit = self
            .last_known()
            .unwrap_or(MAX_TRUNCATION)
            .min(MAX_TRUNCATION);
        let mut hi = start.max(1);
        while tail(hi) > tol {
            if hi >= limit {
                return Err(Error::NoTailBound(format!(
                    "tail bound {:e} at n = {hi} still exceeds tolerance {tol:e}",
                    tail(hi)
                )));
            }
            hi = (hi * 2).min(limit);
        }
        let mut lo = start;
        while hi - lo > 1 {
            let mid = lo + (hi - lo) / 2;
            if tail(mid) <= tol {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        Ok(hi)
    }

    /// Certified `E[f(N)]`. `term(n, P(N = n))` is called for `n` in
    /// increasing order from the support start, so it may carry running state;
    /// `tail(K)` must bound `|sum_{n > K} f(n) P(N = n)|`.
    pub fn certified_expectation<T, F>(&self, tol: f64, tail: T, mut term: F) -> Result<Certified>
    where
        T: Fn(u64) -> f64,
        F: FnMut(u64, f64) -> f64,
    {
        let k = self.truncation_point(&tail, tol)?;
        let mut acc = KahanSum::new();
        for n in self.support_start()..=k {
            let q = self.pmf(n);
            let t = term(n, q);
            acc.add(t);
        }
        Ok(Certified::new(acc.total(), tail(k)))
    }

    /// Certified `E[N^(-1/2)]`, with the `n = 0` term taken as 0.
    pub fn inv_sqrt_moment(&self, tol: f64) -> Result<Certified> {
        self.validate()?;
        self.certified_expectation(
            tol,
            |k| self.tail_mass(k) / ((k + 1) as f64).sqrt(),
            |n, q| if n == 0 { 0.0 } else { q / (n as f64).sqrt() },
        )
    }

    /// Draws `count` iid values.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R, count: usize) -> Result<Vec<u64>> {
        let sampler = IndexSampler::new(self)?;
        Ok((0..count).map(|_| sampler.draw(rng)).collect())
    }
}

/// Chernoff bound on `P(N >= x)` for `N ~ Poisson(lambda)`.
fn poisson_chernoff(lambda: f64, x: u64) -> f64 {
    let x = x as f64;
    if x <= lambda {
        return 1.0;
    }
    (-lambda + x - x * (x / lambda).ln()).exp().min(1.0)
}

/// `E[1/N]` for `N` geometric on `{1, 2, ...}`: `-p log(p) / (1 - p)`, with
/// the continuous extension 1 at `p = 1`.
pub fn inv_moment_geometric(p: f64) -> Result<f64> {
    if !(p > 0.0 && p <= 1.0) {
        return Err(invalid("p", format!("must lie in (0, 1], got {p}")));
    }
    if p == 1.0 {
        return Ok(1.0);
    }
    let q = 1.0 - p;
    Ok(-p * p.ln() / q)
}

/// Reusable sampler for an index law.
#[derive(Debug, Clone)]
pub enum IndexSampler {
    Geometric(Geometric),
    Poisson(Poisson<f64>),
    Binomial(Binomial),
    Table(Vec<f64>),
}

impl IndexSampler {
    pub fn new(model: &IndexModel) -> Result<Self> {
        model.validate()?;
        Ok(match *model {
            IndexModel::Geometric { p } => {
                IndexSampler::Geometric(Geometric::new(p).map_err(|e| invalid("p", e.to_string()))?)
            }
            IndexModel::Poisson { lambda } => IndexSampler::Poisson(
                Poisson::new(lambda).map_err(|e| invalid("lambda", e.to_string()))?,
            ),
            IndexModel::Binomial { m, p } => IndexSampler::Binomial(
                Binomial::new(m, p).map_err(|e| invalid("p", e.to_string()))?,
            ),
            IndexModel::Custom(ref c) => {
                let deficit = 1.0 - c.probs.iter().sum::<f64>();
                if deficit > PMF_SUM_TOL {
                    return Err(Error::Unsupported(
                        "sampling a custom index whose listed pmf does not carry all of the mass"
                            .into(),
                    ));
                }
                let mut acc = 0.0;
                let cdf = c
                    .probs
                    .iter()
                    .map(|q| {
                        acc += q;
                        acc
                    })
                    .collect();
                IndexSampler::Table(cdf)
            }
        })
    }

    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> u64 {
        match self {
            // rand_distr counts failures before the first success
            IndexSampler::Geometric(g) => g.sample(rng) + 1,
            IndexSampler::Poisson(d) => d.sample(rng) as u64,
            IndexSampler::Binomial(d) => d.sample(rng),
            IndexSampler::Table(cdf) => {
                let u: f64 = rng.random::<f64>() * cdf[cdf.len() - 1];
                cdf.partition_point(|&c| c <= u).min(cdf.len() - 1) as u64
            }
        }
    }
}

/// Candidate laws `U` for the limit of `N / E[N]`.
#[derive(Clone)]
pub enum ScaledIndexLimit {
    ExponentialRateOne,
    PointMassOne,
    /// A continuous CDF on `[0, inf)`.
    Custom(Arc<dyn Fn(f64) -> f64 + Send + Sync>),
}

impl fmt::Debug for ScaledIndexLimit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ScaledIndexLimit::ExponentialRateOne => f.write_str("ExponentialRateOne"),
            ScaledIndexLimit::PointMassOne => f.write_str("PointMassOne"),
            ScaledIndexLimit::Custom(_) => f.write_str("Custom(..)"),
        }
    }
}

impl ScaledIndexLimit {
    pub fn cdf(&self, x: f64) -> f64 {
        match self {
            ScaledIndexLimit::ExponentialRateOne => {
                if x <= 0.0 {
                    0.0
                } else {
                    -(-x).exp_m1()
                }
            }
            ScaledIndexLimit::PointMassOne => {
                if x >= 1.0 {
                    1.0
                } else {
                    0.0
                }
            }
            ScaledIndexLimit::Custom(f) => {
                if x < 0.0 {
                    0.0
                } else {
                    f(x).clamp(0.0, 1.0)
                }
            }
        }
    }

    /// `P(U < x)`.
    pub fn cdf_left(&self, x: f64) -> f64 {
        match self {
            ScaledIndexLimit::PointMassOne => {
                if x > 1.0 {
                    1.0
                } else {
                    0.0
                }
            }
            _ => self.cdf(x),
        }
    }
}

/// `sup_x |P(N/mu <= x) - P(U <= x)|`, scanning both edges of every jump of
/// the step function `x -> P(N/mu <= x)`.
///
/// The index tail beyond the truncation point contributes at most
/// `max(P(N > K), 1 - P(U < (K+1)/mu))`, which is returned as the error.
pub fn exact_dk_scaled_index(
    model: &IndexModel,
    limit: &ScaledIndexLimit,
    tol: f64,
) -> Result<Certified> {
    let mu = model.mean()?;
    let k = model.truncation_point(|k| model.tail_mass(k), tol)?;
    let mut cum = KahanSum::new();
    let mut sup: f64 = 0.0;
    for n in model.support_start()..=k {
        let q = model.pmf(n);
        if q == 0.0 {
            continue;
        }
        let x = n as f64 / mu;
        let below = cum.total();
        cum.add(q);
        let at = cum.total().min(1.0);
        sup = sup
            .max((below - limit.cdf_left(x)).abs())
            .max((at - limit.cdf(x)).abs());
    }
    let next = (k + 1) as f64 / mu;
    let err = model.tail_mass(k).max(1.0 - limit.cdf_left(next));
    Ok(Certified::new(sup, err.max(0.0)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream_from_seed;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn pmf_examples() {
        assert_eq!(IndexModel::geometric(0.5).unwrap().pmf(1), 0.5);
        assert_eq!(IndexModel::binomial(3, 0.4).unwrap().pmf(4), 0.0);
        assert!(close(
            IndexModel::binomial(2, 0.5).unwrap().pmf(1),
            0.5,
            1e-15
        ));
        assert_eq!(IndexModel::geometric(0.3).unwrap().pmf(0), 0.0);
    }

    #[test]
    fn moment_examples() {
        let g = IndexModel::geometric(0.1).unwrap().moments().unwrap();
        assert!(close(g.mean, 10.0, 1e-12) && close(g.variance, 90.0, 1e-10));
        let p = IndexModel::poisson(4.0).unwrap().moments().unwrap();
        assert_eq!((p.mean, p.variance), (4.0, 4.0));
        let b = IndexModel::binomial(1, 1.0).unwrap().moments().unwrap();
        assert_eq!((b.mean, b.variance), (1.0, 0.0));
    }

    #[test]
    fn pmfs_sum_to_one() {
        for model in [
            IndexModel::geometric(0.07).unwrap(),
            IndexModel::poisson(37.5).unwrap(),
            IndexModel::binomial(60, 0.3).unwrap(),
        ] {
            let total = model
                .certified_expectation(1e-13, |k| model.tail_mass(k), |_, q| q)
                .unwrap();
            assert!(close(total.value, 1.0, 1e-12), "{model:?}: {total:?}");
        }
    }

    #[test]
    fn geometric_tail_mass_is_exact() {
        let m = IndexModel::geometric(0.2).unwrap();
        let direct: f64 = (1..=5).map(|n| m.pmf(n)).sum();
        assert!(close(m.tail_mass(5), 1.0 - direct, 1e-15));
    }

    #[test]
    fn poisson_tail_bounds_dominate() {
        let m = IndexModel::poisson(10.0).unwrap();
        for k in [5_u64, 10, 15, 25, 40] {
            let exact: f64 = (k + 1..400).map(|n| m.pmf(n)).sum();
            let first: f64 = (k + 1..400).map(|n| n as f64 * m.pmf(n)).sum();
            assert!(m.tail_mass(k) >= exact, "k={k}");
            assert!(m.tail_first_moment(k) >= first, "k={k}");
        }
    }

    #[test]
    fn geometric_first_moment_tail_is_exact() {
        let m = IndexModel::geometric(0.3).unwrap();
        let k = 7;
        let brute: f64 = (k + 1..2000).map(|n| n as f64 * m.pmf(n)).sum();
        assert!(close(m.tail_first_moment(k), brute, 1e-13));
    }

    #[test]
    fn inv_sqrt_examples() {
        let one = IndexModel::geometric(1.0)
            .unwrap()
            .inv_sqrt_moment(1e-12)
            .unwrap();
        assert_eq!(one.value, 1.0);
        let q = IndexModel::geometric(0.25)
            .unwrap()
            .inv_sqrt_moment(1e-12)
            .unwrap();
        // 30-digit nsum of k^-1/2 p (1-p)^(k-1)
        assert!(close(q.value, 0.634_320_269_946_525_4, 1e-12), "{q:?}");
        assert!(q.value >= 0.5 && q.value <= 2.0 / 3.0);
        let four = IndexModel::deterministic(4).inv_sqrt_moment(1e-12).unwrap();
        assert_eq!(four.value, 0.5);
        assert!(IndexModel::geometric(0.5)
            .unwrap()
            .inv_sqrt_moment(0.0)
            .is_err());
    }

    #[test]
    fn inv_moment_geometric_matches_series() {
        assert!(close(
            inv_moment_geometric(0.5).unwrap(),
            std::f64::consts::LN_2,
            1e-15
        ));
        assert_eq!(inv_moment_geometric(1.0).unwrap(), 1.0);
        let p: f64 = 0.25;
        let series: f64 = (1..4000)
            .map(|k| p * (1.0 - p).powi(k - 1) / k as f64)
            .sum();
        assert!(close(inv_moment_geometric(p).unwrap(), series, 1e-10));
        assert!(close(series, 0.462_098_120_373_296_9, 1e-10));
        assert!(inv_moment_geometric(0.0).is_err());
        assert!(inv_moment_geometric(1.5).is_err());
    }

    #[test]
    fn sampling_examples() {
        let mut rng = stream_from_seed(7);
        assert_eq!(
            IndexModel::geometric(1.0)
                .unwrap()
                .sample(&mut rng, 3)
                .unwrap(),
            vec![1, 1, 1]
        );
        assert_eq!(
            IndexModel::binomial(5, 0.0)
                .unwrap()
                .sample(&mut rng, 2)
                .unwrap(),
            vec![0, 0]
        );
        let draws = IndexModel::geometric(0.5)
            .unwrap()
            .sample(&mut rng, 1_000_000)
            .unwrap();
        let mean = draws.iter().sum::<u64>() as f64 / 1e6;
        assert!(
            (mean - 2.0).abs() <= 3.0 * (2.0_f64 / 1e6).sqrt(),
            "mean {mean}"
        );
    }

    #[test]
    fn sampling_is_reproducible() {
        let m = IndexModel::poisson(12.0).unwrap();
        let a = m.sample(&mut stream_from_seed(99), 100).unwrap();
        let b = m.sample(&mut stream_from_seed(99), 100).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn custom_sampler_follows_table() {
        let m = IndexModel::custom(vec![0.0, 0.25, 0.75]).unwrap();
        let draws = m.sample(&mut stream_from_seed(3), 200_000).unwrap();
        let twos = draws.iter().filter(|&&d| d == 2).count() as f64 / 2e5;
        assert!(draws.iter().all(|&d| d == 1 || d == 2));
        assert!((twos - 0.75).abs() < 0.01);
    }

    #[test]
    fn custom_validation() {
        assert!(IndexModel::custom(vec![0.5, 0.4]).is_err());
        assert!(IndexModel::custom(vec![0.5, 0.6]).is_err());
        assert!(IndexModel::custom(vec![]).is_err());
        let env = TailEnvelope {
            scale: 1.0,
            ratio: 0.5,
        };
        // geometric(1/2) listed up to n = 9, remainder within 2^-n envelope
        let probs: Vec<f64> = (0..10)
            .map(|n| if n == 0 { 0.0 } else { 0.5f64.powi(n) })
            .collect();
        let m = IndexModel::custom_with_tail(probs.clone(), env).unwrap();
        let mom = m.moments().unwrap();
        assert!(mom.mean <= 2.0 && 2.0 <= mom.mean + mom.error);
        let tight = TailEnvelope {
            scale: 1e-6,
            ratio: 0.5,
        };
        assert!(IndexModel::custom_with_tail(probs, tight).is_err());
    }

    #[test]
    fn exact_dk_examples() {
        let g = IndexModel::geometric(0.1).unwrap();
        let d = exact_dk_scaled_index(&g, &ScaledIndexLimit::ExponentialRateOne, 1e-12).unwrap();
        assert!(close(d.value, 1.0 - (-0.1f64).exp(), 1e-12), "{d:?}");
        assert!(d.upper() <= 1.2);
        let c = IndexModel::deterministic(5);
        let d = exact_dk_scaled_index(&c, &ScaledIndexLimit::PointMassOne, 1e-12).unwrap();
        assert_eq!(d.value, 0.0);
        let g = IndexModel::geometric(0.01).unwrap();
        let d = exact_dk_scaled_index(&g, &ScaledIndexLimit::ExponentialRateOne, 1e-12).unwrap();
        assert!(d.upper() <= 0.12);
    }

    #[test]
    fn exact_dk_custom_limit_matches_builtin() {
        let g = IndexModel::geometric(0.2).unwrap();
        let custom = ScaledIndexLimit::Custom(Arc::new(|x: f64| 1.0 - (-x).exp()));
        let a = exact_dk_scaled_index(&g, &custom, 1e-12).unwrap();
        let b = exact_dk_scaled_index(&g, &ScaledIndexLimit::ExponentialRateOne, 1e-12).unwrap();
        assert!(close(a.value, b.value, 1e-15));
    }

    #[test]
    fn geometric_envelope_sandwich_on_grid() {
        for i in 1..=25 {
            let p = i as f64 / 26.0;
            let v = IndexModel::geometric(p)
                .unwrap()
                .inv_sqrt_moment(1e-11)
                .unwrap();
            assert!(v.error < 1e-10);
            let sp = p.sqrt();
            assert!(sp <= v.lower() + 1e-15, "p={p}");
            assert!(v.upper() <= 2.0 * sp / (1.0 + sp) + 1e-15, "p={p}");
            assert!(
                inv_moment_geometric(p).unwrap() >= v.value * v.value,
                "p={p}"
            );
        }
    }
}
