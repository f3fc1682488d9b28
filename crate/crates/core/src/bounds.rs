//! Error bounds for random sums, each returned with the truncation error of
//! any series it required.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::index::IndexModel;
use crate::limits::LimitLaw;
use crate::numeric::special::SQRT_2_OVER_PI;
use crate::numeric::Certified;
use crate::summands::{AggregateCursor, MomentAggregates, SummandModel};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    Kolmogorov,
    Wasserstein,
}

impl Metric {
    pub fn as_str(self) -> &'static str {
        match self {
            Metric::Kolmogorov => "kolmogorov",
            Metric::Wasserstein => "wasserstein",
        }
    }
}

/// Berry–Esseen constants for the Kolmogorov and Wasserstein metrics.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Constants {
    pub c_k: f64,
    pub c_w: f64,
}

impl Default for Constants {
    fn default() -> Self {
        Self {
            c_k: 0.56,
            c_w: 6.0,
        }
    }
}

impl Constants {
    pub fn new(c_k: f64, c_w: f64) -> Result<Self> {
        let c = Self { c_k, c_w };
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.c_k > 0.0 && self.c_k.is_finite()) {
            return Err(invalid(
                "c_k",
                format!("must be positive, got {}", self.c_k),
            ));
        }
        if !(self.c_w > 0.0 && self.c_w.is_finite()) {
            return Err(invalid(
                "c_w",
                format!("must be positive, got {}", self.c_w),
            ));
        }
        Ok(())
    }

    fn for_metric(&self, metric: Metric) -> f64 {
        match metric {
            Metric::Kolmogorov => self.c_k,
            Metric::Wasserstein => self.c_w,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundValue {
    pub value: f64,
    pub metric: Metric,
    pub theorem_tag: String,
    pub truncation_error: f64,
    pub inputs: BTreeMap<String, f64>,
}

impl BoundValue {
    fn new(tag: &str, metric: Metric, c: Certified) -> Self {
        Self {
            value: c.value.max(0.0),
            metric,
            theorem_tag: tag.to_string(),
            truncation_error: c.error.max(0.0),
            inputs: BTreeMap::new(),
        }
    }

    fn exact(tag: &str, metric: Metric, value: f64) -> Self {
        Self::new(tag, metric, Certified::exact(value))
    }

    fn with(mut self, key: &str, value: f64) -> Self {
        self.inputs.insert(key.to_string(), value);
        self
    }

    fn with_constants(self, c: &Constants) -> Self {
        self.with("c_k", c.c_k).with("c_w", c.c_w)
    }

    /// `value + truncation_error`: a bound that holds despite truncation.
    pub fn certified(&self) -> f64 {
        self.value + self.truncation_error
    }

    /// Sum of two bounds (triangle inequality), tagged `tag`.
    pub fn plus(&self, other: &BoundValue, tag: &str) -> BoundValue {
        let mut inputs = self.inputs.clone();
        inputs.extend(other.inputs.clone());
        BoundValue {
            value: self.value + other.value,
            metric: self.metric,
            theorem_tag: tag.to_string(),
            truncation_error: self.truncation_error + other.truncation_error,
            inputs,
        }
    }
}

/// Which geometric-sum Laplace bound to evaluate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GeometricMode {
    /// Iid summands, `E[N^(-1/2)]` replaced by its `2 sqrt(p)` envelope.
    Iid,
    /// Iid summands with the exact series for `E[N^(-1/2)]`.
    IidSharp,
    /// Target scale from the Cesàro limit of the variances.
    Noniid,
    /// Target scale from `E[sigma_N^2]`.
    NoniidAlt,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NormalMode {
    Iid,
    Noniid,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CombinedMode {
    /// Kolmogorov distance to the scale mixture with the given index limit.
    MixtureDk,
    /// Wasserstein distance to `Normal(0, sigma_hat^2)`.
    NormalW1,
}

fn check_tol(tol: f64) -> Result<()> {
    if tol > 0.0 && tol.is_finite() {
        Ok(())
    } else {
        Err(invalid("tol", format!("must be positive, got {tol}")))
    }
}

/// `(sigma^2, xi)` of an iid model.
fn iid_moments(summands: &SummandModel) -> Result<(f64, f64)> {
    if !summands.is_iid() {
        return Err(Error::Unsupported(
            "iid bound requested for non-identically distributed summands".into(),
        ));
    }
    Ok(summands.moments_at(1))
}

/// Certified `E[f(aggregates at N)]`, with the `N = 0` term taken as 0.
fn aggregate_expectation<T, F>(
    index: &IndexModel,
    summands: &SummandModel,
    tol: f64,
    tail: T,
    f: F,
) -> Result<Certified>
where
    T: Fn(u64) -> f64,
    F: Fn(&MomentAggregates) -> f64,
{
    let mut cur = AggregateCursor::new(summands);
    index.certified_expectation(tol, tail, |n, q| {
        if n == 0 {
            return 0.0;
        }
        let mut a = cur.current();
        while a.n < n {
            a = cur.advance();
        }
        q * f(&a)
    })
}

/// Berry–Esseen bound for the conditional law of `W` given `N = n` against
/// its Gaussian analogue.
pub fn conditional_be_bound(
    n: u64,
    summands: &SummandModel,
    mu: f64,
    metric: Metric,
    constants: &Constants,
) -> Result<BoundValue> {
    constants.validate()?;
    if !(mu > 0.0) {
        return Err(Error::NonPositiveMean(mu));
    }
    let tag = "conditional_berry_esseen";
    if n == 0 {
        return Ok(BoundValue::exact(tag, metric, 0.0).with("n", 0.0));
    }
    let a = summands.aggregates(n)?;
    let nf = n as f64;
    let s2 = nf * a.sigma_hat_n_sq / mu;
    let xi_sum = nf * a.xi_hat_n;
    let value = match metric {
        Metric::Wasserstein => constants.c_w * xi_sum / (s2 * mu.powf(1.5)),
        Metric::Kolmogorov => constants.c_k * xi_sum / (s2.powf(1.5) * mu.powf(1.5)),
    };
    Ok(BoundValue::exact(tag, metric, value)
        .with("n", nf)
        .with("mu", mu)
        .with_constants(constants))
}

/// Bound on the distance between `W` and its Gaussian analogue `Z`
/// (conditional bound averaged over the index).
pub fn w_vs_z_bound(
    index: &IndexModel,
    summands: &SummandModel,
    metric: Metric,
    constants: &Constants,
    tol: f64,
) -> Result<BoundValue> {
    constants.validate()?;
    check_tol(tol)?;
    index.validate()?;
    let mu = index.mean()?;
    let c = constants.for_metric(metric);
    let tag = "random_sum_vs_gaussian_analogue";
    let value = if summands.is_iid() {
        let (s2, xi) = summands.moments_at(1);
        match metric {
            Metric::Wasserstein => Certified::exact(c * xi / (mu.sqrt() * s2)),
            Metric::Kolmogorov => index.inv_sqrt_moment(tol)?.scale(c * xi / s2.powf(1.5)),
        }
    } else {
        let env = summands.envelope();
        if !(env.sigma_sq_inf > 0.0) {
            return Err(invalid(
                "summands",
                "variances must be bounded away from zero",
            ));
        }
        match metric {
            Metric::Wasserstein => {
                let cap = c * env.xi_sup / (env.sigma_sq_inf * mu.sqrt());
                aggregate_expectation(
                    index,
                    summands,
                    tol,
                    |k| cap * index.tail_mass(k),
                    |a| c * a.xi_hat_n / (a.sigma_hat_n_sq * mu.sqrt()),
                )?
            }
            Metric::Kolmogorov => {
                let cap = c * env.xi_sup / env.sigma_sq_inf.powf(1.5);
                aggregate_expectation(
                    index,
                    summands,
                    tol,
                    |k| cap * index.tail_mass(k) / ((k + 1) as f64).sqrt(),
                    |a| c * a.xi_hat_n / ((a.n as f64).sqrt() * a.sigma_hat_n_sq.powf(1.5)),
                )?
            }
        }
    };
    Ok(BoundValue::new(tag, metric, value)
        .with("mu", mu)
        .with("tol", tol)
        .with_constants(constants))
}

/// A Kolmogorov bound on `d(N/mu, U)` transfers unchanged to the scale
/// mixtures `sigma sqrt(N/mu) zeta` and `sigma sqrt(U) zeta`.
pub fn mixture_transfer_dk(dk_scaled_index: f64) -> Result<BoundValue> {
    if !(dk_scaled_index >= 0.0) {
        return Err(invalid(
            "dk_scaled_index",
            format!("must be nonnegative, got {dk_scaled_index}"),
        ));
    }
    Ok(
        BoundValue::exact("mixture_transfer", Metric::Kolmogorov, dk_scaled_index)
            .with("dk_scaled_index", dk_scaled_index),
    )
}

/// Wasserstein bound between `sigma sqrt(N/mu) zeta` and `Normal(0, sigma^2)`.
pub fn mixture_vs_normal_w1_bound(sigma: f64, index: &IndexModel) -> Result<BoundValue> {
    if !(sigma > 0.0) {
        return Err(invalid("sigma", format!("must be positive, got {sigma}")));
    }
    index.validate()?;
    let m = index.moments()?;
    if !m.variance.is_finite() {
        return Err(Error::UnboundedVariance);
    }
    let value = sigma * SQRT_2_OVER_PI * m.variance.sqrt() / m.mean;
    Ok(BoundValue::new(
        "mixture_vs_normal",
        Metric::Wasserstein,
        Certified::new(value, 0.0),
    )
    .with("sigma", sigma)
    .with("mu", m.mean)
    .with("var_n", m.variance))
}

fn pair_terms(sigma: f64, tau: f64) -> (f64, f64) {
    let s2 = sigma * sigma;
    let t2 = tau * tau;
    ((1.0 - t2 / s2).abs(), (1.0 - s2 / t2).abs())
}

/// Bound on the distance between `Normal(0, sigma^2)` and `Normal(0, tau^2)`.
pub fn gaussian_pair_bound(sigma: f64, tau: f64, metric: Metric) -> Result<BoundValue> {
    if !(sigma > 0.0 && tau > 0.0) {
        return Err(invalid(
            "sigma/tau",
            format!("must be positive, got {sigma}, {tau}"),
        ));
    }
    let (a, b) = pair_terms(sigma, tau);
    let value = match metric {
        Metric::Kolmogorov => a.min(b),
        Metric::Wasserstein => 2.0 * (sigma * a).min(tau * b),
    };
    Ok(BoundValue::exact("gaussian_pair", metric, value)
        .with("sigma", sigma)
        .with("tau", tau))
}

/// Averaged Gaussian-pair bound between `Z` (scale `sigma_hat_N`) and the
/// same mixture with the limiting scale `sigma_hat`.
pub fn variance_drift_bound(
    index: &IndexModel,
    summands: &SummandModel,
    metric: Metric,
    tol: f64,
) -> Result<BoundValue> {
    check_tol(tol)?;
    index.validate()?;
    let limit = summands
        .sigma_hat_sq_limit()
        .ok_or(Error::MissingVarianceLimit)?;
    let mu = index.mean()?;
    let tag = "variance_drift";
    if summands.is_iid() {
        return Ok(BoundValue::exact(tag, metric, 0.0).with("mu", mu));
    }
    let env = summands.envelope();
    let spread = (1.0 - env.sigma_sq_inf / limit)
        .abs()
        .max((1.0 - env.sigma_sq_sup / limit).abs());
    let sigma_hat = limit.sqrt();
    let value = match metric {
        Metric::Kolmogorov => aggregate_expectation(
            index,
            summands,
            tol,
            |k| spread.min(1.0) * index.tail_mass(k),
            |a| {
                let (x, y) = pair_terms(a.sigma_hat_n_sq.sqrt(), sigma_hat);
                x.min(y)
            },
        )?,
        Metric::Wasserstein => {
            let w = 2.0 / mu.sqrt();
            aggregate_expectation(
                index,
                summands,
                tol,
                // Cauchy–Schwarz on sum sqrt(n) P(N = n) over the tail
                |k| {
                    w * sigma_hat
                        * spread
                        * (index.tail_mass(k) * index.tail_first_moment(k)).sqrt()
                },
                |a| {
                    let s = a.sigma_hat_n_sq.sqrt();
                    let (x, y) = pair_terms(s, sigma_hat);
                    w * (a.n as f64).sqrt() * (s * x).min(sigma_hat * y)
                },
            )?
        }
    };
    Ok(BoundValue::new(tag, metric, value)
        .with("mu", mu)
        .with("sigma_hat_sq", limit)
        .with("tol", tol))
}

/// Bound on the distance from the Gaussian analogue `Z` to the limit law:
/// variance drift plus either a scaled-index Kolmogorov distance or the
/// mixture-vs-normal Wasserstein term.
pub fn combined_limit_bound(
    index: &IndexModel,
    summands: &SummandModel,
    mode: CombinedMode,
    dk_index_vs_u: Option<f64>,
    tol: f64,
) -> Result<BoundValue> {
    match mode {
        CombinedMode::MixtureDk => {
            let dk = dk_index_vs_u.ok_or_else(|| {
                invalid("dk_index_vs_u", "required for the mixture Kolmogorov bound")
            })?;
            let drift = variance_drift_bound(index, summands, Metric::Kolmogorov, tol)?;
            Ok(drift.plus(&mixture_transfer_dk(dk)?, "combined_limit_mixture_dk"))
        }
        CombinedMode::NormalW1 => {
            let drift = variance_drift_bound(index, summands, Metric::Wasserstein, tol)?;
            let sigma_hat = summands
                .sigma_hat_sq_limit()
                .ok_or(Error::MissingVarianceLimit)?
                .sqrt();
            let mix = mixture_vs_normal_w1_bound(sigma_hat, index)?;
            Ok(drift.plus(&mix, "combined_limit_normal_w1"))
        }
    }
}

/// `(sqrt(p), 2 sqrt(p) / (1 + sqrt(p)))`, which brackets `E[N^(-1/2)]` for
/// `N` geometric with success probability `p`.
pub fn geometric_inv_sqrt_envelope(p: f64) -> Result<(f64, f64)> {
    if !(p > 0.0 && p <= 1.0) {
        return Err(invalid("p", format!("must lie in (0, 1], got {p}")));
    }
    let r = p.sqrt();
    Ok((r, 2.0 * r / (1.0 + r)))
}

/// `mu^(-1) sum_j sigma_j^2 P(N >= j)`, the variance of `W`.
pub fn variance_of_w(index: &IndexModel, summands: &SummandModel, tol: f64) -> Result<Certified> {
    check_tol(tol)?;
    index.validate()?;
    let mu = index.mean()?;
    if summands.is_iid() {
        return Ok(Certified::exact(summands.moments_at(1).0));
    }
    let sup = summands.envelope().sigma_sq_sup;
    if !sup.is_finite() {
        return Err(Error::UnboundedVariance);
    }
    // E[sum_{j<=N} sigma_j^2] / mu
    aggregate_expectation(
        index,
        summands,
        tol,
        |k| sup * index.tail_first_moment(k) / mu,
        |a| a.n as f64 * a.sigma_hat_n_sq / mu,
    )
}

/// Kolmogorov bound between a geometric sum `W` and its Laplace limit,
/// together with that limit.
pub fn geometric_laplace_bound(
    p: f64,
    summands: &SummandModel,
    mode: GeometricMode,
    constants: &Constants,
    tol: f64,
) -> Result<(BoundValue, LimitLaw)> {
    constants.validate()?;
    check_tol(tol)?;
    let index = IndexModel::geometric(p)?;
    let index_term = 12.0 * p;
    let k = Metric::Kolmogorov;
    let (bound, scale_sq) = match mode {
        GeometricMode::Iid => {
            let (s2, xi) = iid_moments(summands)?;
            let v = 2.0 * constants.c_k * xi / s2.powf(1.5) * p.sqrt() + index_term;
            (BoundValue::exact("geometric_laplace_iid", k, v), s2)
        }
        GeometricMode::IidSharp => {
            let (s2, _) = iid_moments(summands)?;
            let be = w_vs_z_bound(&index, summands, k, constants, tol)?;
            let v = Certified::new(be.value + index_term, be.truncation_error);
            (BoundValue::new("geometric_laplace_iid_sharp", k, v), s2)
        }
        GeometricMode::Noniid => {
            let limit = summands
                .sigma_hat_sq_limit()
                .ok_or(Error::MissingVarianceLimit)?;
            let drift = variance_drift_bound(&index, summands, k, tol)?;
            let be = w_vs_z_bound(&index, summands, k, constants, tol)?;
            let v = Certified::new(
                index_term + drift.value + be.value,
                drift.truncation_error + be.truncation_error,
            );
            (BoundValue::new("geometric_laplace_noniid", k, v), limit)
        }
        GeometricMode::NoniidAlt => {
            let sup = summands.envelope().sigma_sq_sup;
            if !sup.is_finite() {
                return Err(Error::UnboundedVariance);
            }
            let e_sigma_n = variance_of_w(&index, summands, tol)?;
            let be = w_vs_z_bound(&index, summands, k, constants, tol)?;
            let ratio = sup / e_sigma_n.value;
            // the ratio's error from the truncated denominator
            let ratio_err =
                sup / (e_sigma_n.value - e_sigma_n.error).max(f64::MIN_POSITIVE) - ratio;
            let v = Certified::new(
                be.value + index_term * ratio,
                be.truncation_error + index_term * ratio_err,
            );
            (
                BoundValue::new("geometric_laplace_noniid_alt", k, v),
                e_sigma_n.value,
            )
        }
    };
    let target = LimitLaw::laplace(0.0, (scale_sq / 2.0).sqrt())?;
    Ok((
        bound
            .with("p", p)
            .with("tol", tol)
            .with_constants(constants),
        target,
    ))
}

/// Wasserstein bound between a Poisson or binomial random sum and its normal
/// limit, together with that limit.
pub fn normal_limit_bound(
    index: &IndexModel,
    summands: &SummandModel,
    mode: NormalMode,
    constants: &Constants,
    tol: f64,
) -> Result<(BoundValue, LimitLaw)> {
    constants.validate()?;
    check_tol(tol)?;
    index.validate()?;
    let family = match index {
        IndexModel::Poisson { lambda } => {
            if !(*lambda > 0.0) {
                return Err(Error::NonPositiveMean(*lambda));
            }
            "poisson"
        }
        IndexModel::Binomial { m, p } => {
            if (*m as f64) * p <= 0.0 {
                return Err(Error::NonPositiveMean((*m as f64) * p));
            }
            "binomial"
        }
        _ => {
            return Err(Error::Unsupported(
                "normal limit bounds need a Poisson or binomial index".into(),
            ))
        }
    };
    let w = Metric::Wasserstein;
    let (bound, scale_sq) = match mode {
        NormalMode::Iid => {
            let (s2, xi) = iid_moments(summands)?;
            let sigma = s2.sqrt();
            let v = match index {
                IndexModel::Poisson { lambda } => {
                    (constants.c_w * xi / s2 + sigma * SQRT_2_OVER_PI) / lambda.sqrt()
                }
                IndexModel::Binomial { m, p } => {
                    let spread = sigma * (2.0 * (1.0 - p) / std::f64::consts::PI).sqrt();
                    (constants.c_w * xi / s2 + spread) / ((*m as f64) * p).sqrt()
                }
                _ => unreachable!("family checked above"),
            };
            (BoundValue::exact(&format!("{family}_normal_iid"), w, v), s2)
        }
        NormalMode::Noniid => {
            let limit = summands
                .sigma_hat_sq_limit()
                .ok_or(Error::MissingVarianceLimit)?;
            let be = w_vs_z_bound(index, summands, w, constants, tol)?;
            let rest = combined_limit_bound(index, summands, CombinedMode::NormalW1, None, tol)?;
            (be.plus(&rest, &format!("{family}_normal_noniid")), limit)
        }
    };
    let target = LimitLaw::normal(scale_sq.sqrt())?;
    Ok((bound.with("tol", tol).with_constants(constants), target))
}
