//! Centered summands `X_1, X_2, ...`: iid presets and non-iid schedules with
//! closed-form moments.

use rand::Rng;
use rand_distr::{Distribution, Exp1, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::numeric::KahanSum;

/// Default cap on the number of lattice points a partial-sum pmf may hold.
pub const DEFAULT_LATTICE_CAP: usize = 1 << 26;

const CENTERING_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SummandDist {
    /// ±1 with probability 1/2 each.
    Rademacher,
    /// Two atoms `a < 0 < b`, weighted so the mean is zero.
    TwoPoint {
        a: f64,
        b: f64,
    },
    CenteredUniform {
        half_width: f64,
    },
    /// `Exp(1) - 1`.
    CenteredExponential,
    Gaussian {
        sigma: f64,
    },
    /// Atoms `offset + step * k` with probabilities `probs[k]`.
    Lattice {
        offset: f64,
        step: f64,
        probs: Vec<f64>,
    },
}

/// Probabilities on the lattice `offset + step * k`, `k = 0..probs.len()`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatticePmf {
    pub offset: f64,
    pub step: f64,
    pub probs: Vec<f64>,
}

impl LatticePmf {
    pub fn point_mass_at_zero(step: f64) -> Self {
        Self {
            offset: 0.0,
            step,
            probs: vec![1.0],
        }
    }

    pub fn atom(&self, k: usize) -> f64 {
        self.offset + self.step * k as f64
    }

    pub fn total_mass(&self) -> f64 {
        self.probs.iter().copied().collect::<KahanSum>().total()
    }

    pub fn mean(&self) -> f64 {
        self.moment(|x| x)
    }

    /// `sum_k g(atom_k) * probs[k]`.
    pub fn moment<G: Fn(f64) -> f64>(&self, g: G) -> f64 {
        self.probs
            .iter()
            .enumerate()
            .map(|(k, &q)| g(self.atom(k)) * q)
            .collect::<KahanSum>()
            .total()
    }

    /// Law of the sum of independent variables with these two pmfs; the
    /// steps must agree.
    pub fn convolve(&self, other: &LatticePmf) -> LatticePmf {
        let mut out = vec![0.0; self.probs.len() + other.probs.len() - 1];
        for (i, &a) in self.probs.iter().enumerate() {
            if a == 0.0 {
                continue;
            }
            for (j, &b) in other.probs.iter().enumerate() {
                out[i + j] += a * b;
            }
        }
        LatticePmf {
            offset: self.offset + other.offset,
            step: self.step,
            probs: out,
        }
    }

    /// Same law, support multiplied by `c > 0`.
    pub fn scaled(&self, c: f64) -> LatticePmf {
        LatticePmf {
            offset: self.offset * c,
            step: self.step * c,
            probs: self.probs.clone(),
        }
    }
}

impl SummandDist {
    pub fn two_point(a: f64, b: f64) -> Result<Self> {
        let d = SummandDist::TwoPoint { a, b };
        d.validate()?;
        Ok(d)
    }

    pub fn lattice(offset: f64, step: f64, probs: Vec<f64>) -> Result<Self> {
        let d = SummandDist::Lattice {
            offset,
            step,
            probs,
        };
        d.validate()?;
        Ok(d)
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            SummandDist::Rademacher | SummandDist::CenteredExponential => Ok(()),
            SummandDist::TwoPoint { a, b } => {
                if *a < 0.0 && *b > 0.0 && a.is_finite() && b.is_finite() {
                    Ok(())
                } else {
                    Err(invalid(
                        "two_point",
                        format!("need a < 0 < b, got a={a}, b={b}"),
                    ))
                }
            }
            SummandDist::CenteredUniform { half_width: h } => {
                if *h > 0.0 && h.is_finite() {
                    Ok(())
                } else {
                    Err(invalid("half_width", format!("must be positive, got {h}")))
                }
            }
            SummandDist::Gaussian { sigma } => {
                if *sigma > 0.0 && sigma.is_finite() {
                    Ok(())
                } else {
                    Err(invalid("sigma", format!("must be positive, got {sigma}")))
                }
            }
            SummandDist::Lattice { step, probs, .. } => {
                if !(*step > 0.0 && step.is_finite()) {
                    return Err(invalid("step", format!("must be positive, got {step}")));
                }
                if probs.is_empty() || probs.iter().any(|q| !(0.0..=1.0).contains(q)) {
                    return Err(invalid("probs", "need a nonempty vector of probabilities"));
                }
                let pmf = self.lattice_pmf().expect("lattice variant");
                let total = pmf.total_mass();
                if (total - 1.0).abs() > CENTERING_TOL {
                    return Err(invalid("probs", format!("sum to {total}, not 1")));
                }
                let mean = pmf.mean();
                if mean.abs() > CENTERING_TOL {
                    return Err(Error::NotCentered(mean));
                }
                if pmf.moment(|x| x * x) <= 0.0 {
                    return Err(invalid(
                        "probs",
                        "degenerate at zero; variance must be positive",
                    ));
                }
                Ok(())
            }
        }
    }

    /// Analytic mean. Zero for every valid preset; lattices report their
    /// summed mean so the centering check can be run on them.
    pub fn mean(&self) -> f64 {
        match self {
            SummandDist::Lattice { .. } => self.lattice_pmf().map_or(0.0, |l| l.mean()),
            _ => 0.0,
        }
    }

    /// `E[X^2]`.
    pub fn variance(&self) -> f64 {
        match self {
            SummandDist::Rademacher => 1.0,
            SummandDist::TwoPoint { a, b } => -a * b,
            SummandDist::CenteredUniform { half_width: h } => h * h / 3.0,
            SummandDist::CenteredExponential => 1.0,
            SummandDist::Gaussian { sigma } => sigma * sigma,
            SummandDist::Lattice { .. } => self
                .lattice_pmf()
                .expect("lattice variant")
                .moment(|x| x * x),
        }
    }

    /// `E|X|^3`.
    pub fn third_abs_moment(&self) -> f64 {
        match self {
            SummandDist::Rademacher => 1.0,
            SummandDist::TwoPoint { a, b } => -a * b * (a * a + b * b) / (b - a),
            SummandDist::CenteredUniform { half_width: h } => h * h * h / 4.0,
            // E|E - 1|^3 = (6/e - 2) + 6/e
            SummandDist::CenteredExponential => 12.0 / std::f64::consts::E - 2.0,
            SummandDist::Gaussian { sigma } => {
                2.0 * crate::numeric::special::SQRT_2_OVER_PI * sigma.powi(3)
            }
            SummandDist::Lattice { .. } => self
                .lattice_pmf()
                .expect("lattice variant")
                .moment(|x| x.abs().powi(3)),
        }
    }

    pub fn lattice_pmf(&self) -> Option<LatticePmf> {
        match self {
            SummandDist::Rademacher => Some(LatticePmf {
                offset: -1.0,
                step: 2.0,
                probs: vec![0.5, 0.5],
            }),
            SummandDist::TwoPoint { a, b } => Some(LatticePmf {
                offset: *a,
                step: b - a,
                probs: vec![b / (b - a), -a / (b - a)],
            }),
            SummandDist::Lattice {
                offset,
                step,
                probs,
            } => Some(LatticePmf {
                offset: *offset,
                step: *step,
                probs: probs.clone(),
            }),
            _ => None,
        }
    }

    pub fn sampler(&self) -> DistSampler {
        match self {
            SummandDist::Rademacher => DistSampler::Rademacher,
            SummandDist::TwoPoint { a, b } => DistSampler::TwoPoint {
                a: *a,
                b: *b,
                p_a: b / (b - a),
            },
            SummandDist::CenteredUniform { half_width } => DistSampler::Uniform(*half_width),
            SummandDist::CenteredExponential => DistSampler::CenteredExp,
            SummandDist::Gaussian { sigma } => DistSampler::Gaussian(*sigma),
            SummandDist::Lattice {
                offset,
                step,
                probs,
            } => {
                let mut acc = 0.0;
                let cdf = probs
                    .iter()
                    .map(|q| {
                        acc += q;
                        acc
                    })
                    .collect();
                DistSampler::Table {
                    offset: *offset,
                    step: *step,
                    cdf,
                }
            }
        }
    }
}

/// Precomputed single-summand sampler.
#[derive(Debug, Clone)]
pub enum DistSampler {
    Rademacher,
    TwoPoint {
        a: f64,
        b: f64,
        p_a: f64,
    },
    Uniform(f64),
    CenteredExp,
    Gaussian(f64),
    Table {
        offset: f64,
        step: f64,
        cdf: Vec<f64>,
    },
}

impl DistSampler {
    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self {
            DistSampler::Rademacher => {
                if rng.random::<bool>() {
                    1.0
                } else {
                    -1.0
                }
            }
            DistSampler::TwoPoint { a, b, p_a } => {
                if rng.random::<f64>() < *p_a {
                    *a
                } else {
                    *b
                }
            }
            DistSampler::Uniform(h) => (2.0 * rng.random::<f64>() - 1.0) * h,
            DistSampler::CenteredExp => {
                let e: f64 = Exp1.sample(rng);
                e - 1.0
            }
            DistSampler::Gaussian(s) => {
                let z: f64 = StandardNormal.sample(rng);
                s * z
            }
            DistSampler::Table { offset, step, cdf } => {
                let u = rng.random::<f64>() * cdf[cdf.len() - 1];
                let k = cdf.partition_point(|&c| c <= u).min(cdf.len() - 1);
                offset + step * k as f64
            }
        }
    }
}

/// Rules producing non-identically distributed summands.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case")]
pub enum Schedule {
    /// `X_j = c_j * base` with `c_j^2 = 1 + amplitude * j^(-exponent)`.
    ScaledBase {
        base: SummandDist,
        amplitude: f64,
        exponent: f64,
    },
    /// `X_j = dists[(j - 1) mod len]`.
    Cycle { dists: Vec<SummandDist> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SummandModel {
    Iid { dist: SummandDist },
    Schedule { schedule: Schedule },
}

/// Running means of the summand moments up to index `n`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MomentAggregates {
    pub n: u64,
    /// `n^(-1) sum_{j<=n} sigma_j^2`
    pub sigma_hat_n_sq: f64,
    /// `n^(-1) sum_{j<=n} xi_j`
    pub xi_hat_n: f64,
    /// Cesàro limit of `sigma_j^2`, when it exists.
    pub sigma_hat_sq_limit: Option<f64>,
}

/// Bounds on the per-index moments over all `j >= 1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MomentEnvelope {
    pub sigma_sq_inf: f64,
    pub sigma_sq_sup: f64,
    pub xi_sup: f64,
}

impl SummandModel {
    pub fn iid(dist: SummandDist) -> Result<Self> {
        let m = SummandModel::Iid { dist };
        m.validate()?;
        Ok(m)
    }

    pub fn rademacher() -> Self {
        SummandModel::Iid {
            dist: SummandDist::Rademacher,
        }
    }

    pub fn scaled(base: SummandDist, amplitude: f64, exponent: f64) -> Result<Self> {
        let m = SummandModel::Schedule {
            schedule: Schedule::ScaledBase {
                base,
                amplitude,
                exponent,
            },
        };
        m.validate()?;
        Ok(m)
    }

    pub fn cycle(dists: Vec<SummandDist>) -> Result<Self> {
        let m = SummandModel::Schedule {
            schedule: Schedule::Cycle { dists },
        };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            SummandModel::Iid { dist } => dist.validate(),
            SummandModel::Schedule {
                schedule:
                    Schedule::ScaledBase {
                        base,
                        amplitude,
                        exponent,
                    },
            } => {
                base.validate()?;
                if !(*amplitude > -1.0 && amplitude.is_finite()) {
                    return Err(invalid(
                        "amplitude",
                        format!("must exceed -1, got {amplitude}"),
                    ));
                }
                if !(*exponent >= 0.0 && exponent.is_finite()) {
                    return Err(invalid("exponent", format!("must be >= 0, got {exponent}")));
                }
                Ok(())
            }
            SummandModel::Schedule {
                schedule: Schedule::Cycle { dists },
            } => {
                if dists.is_empty() {
                    return Err(invalid("dists", "cycle needs at least one distribution"));
                }
                dists.iter().try_for_each(|d| d.validate())
            }
        }
    }

    pub fn is_iid(&self) -> bool {
        match self {
            SummandModel::Iid { .. } => true,
            SummandModel::Schedule {
                schedule: Schedule::ScaledBase { amplitude, .. },
            } => *amplitude == 0.0,
            SummandModel::Schedule {
                schedule: Schedule::Cycle { dists },
            } => dists.windows(2).all(|w| w[0] == w[1]),
        }
    }

    fn scale_sq(amplitude: f64, exponent: f64, j: u64) -> f64 {
        1.0 + amplitude * (j as f64).powf(-exponent)
    }

    /// `(c_j, law of X_j / c_j)`: every summand is a positive multiple of a
    /// preset.
    pub fn component(&self, j: u64) -> (f64, &SummandDist) {
        debug_assert!(j >= 1);
        match self {
            SummandModel::Iid { dist } => (1.0, dist),
            SummandModel::Schedule {
                schedule:
                    Schedule::ScaledBase {
                        base,
                        amplitude,
                        exponent,
                    },
            } => (Self::scale_sq(*amplitude, *exponent, j).sqrt(), base),
            SummandModel::Schedule {
                schedule: Schedule::Cycle { dists },
            } => (1.0, &dists[((j - 1) % dists.len() as u64) as usize]),
        }
    }

    /// `(sigma_j^2, xi_j)` of the `j`-th summand, `j >= 1`.
    pub fn moments_at(&self, j: u64) -> (f64, f64) {
        match self {
            SummandModel::Schedule {
                schedule:
                    Schedule::ScaledBase {
                        base,
                        amplitude,
                        exponent,
                    },
            } => {
                let c2 = Self::scale_sq(*amplitude, *exponent, j);
                (c2 * base.variance(), c2.powf(1.5) * base.third_abs_moment())
            }
            _ => {
                let (_, d) = self.component(j);
                (d.variance(), d.third_abs_moment())
            }
        }
    }

    /// `lim n^(-1) sum_{j<=n} sigma_j^2`.
    pub fn sigma_hat_sq_limit(&self) -> Option<f64> {
        match self {
            SummandModel::Iid { dist } => Some(dist.variance()),
            SummandModel::Schedule {
                schedule:
                    Schedule::ScaledBase {
                        base,
                        amplitude,
                        exponent,
                    },
            } => {
                let c2 = if *exponent > 0.0 {
                    1.0
                } else {
                    1.0 + amplitude
                };
                Some(c2 * base.variance())
            }
            SummandModel::Schedule {
                schedule: Schedule::Cycle { dists },
            } => Some(dists.iter().map(|d| d.variance()).sum::<f64>() / dists.len() as f64),
        }
    }

    /// Closed-form inf/sup of the per-index moments over all `j >= 1`.
    pub fn envelope(&self) -> MomentEnvelope {
        match self {
            SummandModel::Iid { dist } => MomentEnvelope {
                sigma_sq_inf: dist.variance(),
                sigma_sq_sup: dist.variance(),
                xi_sup: dist.third_abs_moment(),
            },
            SummandModel::Schedule {
                schedule:
                    Schedule::ScaledBase {
                        base,
                        amplitude,
                        exponent,
                    },
            } => {
                let first = 1.0 + amplitude;
                let limit = if *exponent > 0.0 { 1.0 } else { first };
                let (lo, hi) = (first.min(limit), first.max(limit));
                MomentEnvelope {
                    sigma_sq_inf: lo * base.variance(),
                    sigma_sq_sup: hi * base.variance(),
                    xi_sup: hi.powf(1.5) * base.third_abs_moment(),
                }
            }
            SummandModel::Schedule {
                schedule: Schedule::Cycle { dists },
            } => MomentEnvelope {
                sigma_sq_inf: dists
                    .iter()
                    .map(|d| d.variance())
                    .fold(f64::INFINITY, f64::min),
                sigma_sq_sup: dists.iter().map(|d| d.variance()).fold(0.0, f64::max),
                xi_sup: dists
                    .iter()
                    .map(|d| d.third_abs_moment())
                    .fold(0.0, f64::max),
            },
        }
    }

    pub fn aggregates(&self, n: u64) -> Result<MomentAggregates> {
        if n == 0 {
            return Err(invalid("n", "aggregates need n >= 1"));
        }
        let mut cur = AggregateCursor::new(self);
        let mut last = cur.advance();
        while last.n < n {
            last = cur.advance();
        }
        Ok(last)
    }

    /// One realization of `X_1 + ... + X_n`.
    pub fn sample_partial_sum<R: Rng + ?Sized>(&self, n: u64, rng: &mut R) -> f64 {
        PartialSumSampler::new(self).draw(n, rng)
    }

    /// Exact pmf of `X_1 + ... + X_n` by iterated convolution. Every summand
    /// must be a lattice law and all steps must agree.
    pub fn lattice_partial_pmf(&self, n: u64, cap: usize) -> Result<LatticePmf> {
        let mut pmf = LatticePmf::point_mass_at_zero(self.common_step(n.max(1))?);
        for j in 1..=n {
            let next = self.lattice_at(j)?;
            let size = pmf.probs.len() + next.probs.len() - 1;
            if size > cap {
                return Err(Error::SizeCap { size, cap });
            }
            pmf = pmf.convolve(&next);
        }
        Ok(pmf)
    }

    /// Lattice pmf of the `j`-th summand.
    pub fn lattice_at(&self, j: u64) -> Result<LatticePmf> {
        let (c, d) = self.component(j);
        d.lattice_pmf()
            .map(|l| if c == 1.0 { l } else { l.scaled(c) })
            .ok_or(Error::NotLattice { index: j })
    }

    /// Step shared by the lattices of summands `1..=n`.
    pub fn common_step(&self, n: u64) -> Result<f64> {
        let first = self.lattice_at(1)?;
        let period = match self {
            SummandModel::Iid { .. } => 1,
            SummandModel::Schedule {
                schedule: Schedule::Cycle { dists },
            } => dists.len() as u64,
            SummandModel::Schedule { .. } => n,
        };
        for j in 2..=n.min(period) {
            let l = self.lattice_at(j)?;
            if (l.step - first.step).abs() > 1e-12 * first.step {
                return Err(Error::IncompatibleLattice {
                    first: 1,
                    second: j,
                });
            }
        }
        Ok(first.step)
    }
}

/// Incremental computation of [`MomentAggregates`]: each `advance` adds one
/// summand in O(1).
#[derive(Debug, Clone)]
pub struct AggregateCursor<'a> {
    model: &'a SummandModel,
    n: u64,
    sigma_sum: KahanSum,
    xi_sum: KahanSum,
    limit: Option<f64>,
}

impl<'a> AggregateCursor<'a> {
    pub fn new(model: &'a SummandModel) -> Self {
        Self {
            model,
            n: 0,
            sigma_sum: KahanSum::new(),
            xi_sum: KahanSum::new(),
            limit: model.sigma_hat_sq_limit(),
        }
    }

    pub fn advance(&mut self) -> MomentAggregates {
        self.n += 1;
        let (s2, xi) = self.model.moments_at(self.n);
        self.sigma_sum.add(s2);
        self.xi_sum.add(xi);
        self.current()
    }

    pub fn current(&self) -> MomentAggregates {
        let n = self.n.max(1) as f64;
        MomentAggregates {
            n: self.n,
            sigma_hat_n_sq: self.sigma_sum.total() / n,
            xi_hat_n: self.xi_sum.total() / n,
            sigma_hat_sq_limit: self.limit,
        }
    }
}

/// Sampler for partial sums `X_1 + ... + X_n`, with fast exact paths for
/// iid Rademacher (bit counting) and iid Gaussian (single normal draw).
#[derive(Debug, Clone)]
pub struct PartialSumSampler<'a> {
    model: &'a SummandModel,
    samplers: Vec<DistSampler>,
}

impl<'a> PartialSumSampler<'a> {
    pub fn new(model: &'a SummandModel) -> Self {
        let samplers = match model {
            SummandModel::Iid { dist } => vec![dist.sampler()],
            SummandModel::Schedule {
                schedule: Schedule::ScaledBase { base, .. },
            } => vec![base.sampler()],
            SummandModel::Schedule {
                schedule: Schedule::Cycle { dists },
            } => dists.iter().map(|d| d.sampler()).collect(),
        };
        Self { model, samplers }
    }

    pub fn draw<R: Rng + ?Sized>(&self, n: u64, rng: &mut R) -> f64 {
        if n == 0 {
            return 0.0;
        }
        match (self.model, &self.samplers[0]) {
            (SummandModel::Iid { .. }, DistSampler::Rademacher) => {
                let mut ones = 0u64;
                let mut left = n;
                while left >= 64 {
                    ones += rng.random::<u64>().count_ones() as u64;
                    left -= 64;
                }
                if left > 0 {
                    let mask = (1u64 << left) - 1;
                    ones += (rng.random::<u64>() & mask).count_ones() as u64;
                }
                2.0 * ones as f64 - n as f64
            }
            (SummandModel::Iid { .. }, DistSampler::Gaussian(s)) => {
                let z: f64 = StandardNormal.sample(rng);
                s * (n as f64).sqrt() * z
            }
            (SummandModel::Iid { .. }, s) => {
                let mut acc = 0.0;
                for _ in 0..n {
                    acc += s.draw(rng);
                }
                acc
            }
            (
                SummandModel::Schedule {
                    schedule:
                        Schedule::ScaledBase {
                            amplitude,
                            exponent,
                            ..
                        },
                },
                s,
            ) => {
                let mut acc = 0.0;
                for j in 1..=n {
                    let c = SummandModel::scale_sq(*amplitude, *exponent, j).sqrt();
                    acc += c * s.draw(rng);
                }
                acc
            }
            (SummandModel::Schedule { .. }, _) => {
                let k = self.samplers.len() as u64;
                let mut acc = 0.0;
                for j in 0..n {
                    acc += self.samplers[(j % k) as usize].draw(rng);
                }
                acc
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numeric::quad::integrate;
    use crate::rng::stream_from_seed;
    use proptest::prelude::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    /// Exhaustive enumeration of all outcome tuples of `n` iid lattice draws.
    fn enumerate_sums(pmf: &LatticePmf, n: usize) -> Vec<(f64, f64)> {
        let mut states = vec![(0.0_f64, 1.0_f64)];
        for _ in 0..n {
            let mut next = Vec::with_capacity(states.len() * pmf.probs.len());
            for &(s, w) in &states {
                for (k, &q) in pmf.probs.iter().enumerate() {
                    next.push((s + pmf.atom(k), w * q));
                }
            }
            states = next;
        }
        states
    }

    fn compare_with_enumeration(dist: &SummandDist, n: usize) {
        let model = SummandModel::iid(dist.clone()).unwrap();
        let pmf = model
            .lattice_partial_pmf(n as u64, DEFAULT_LATTICE_CAP)
            .unwrap();
        let base = dist.lattice_pmf().unwrap();
        let mut brute = vec![0.0; pmf.probs.len()];
        for (x, w) in enumerate_sums(&base, n) {
            let k = ((x - pmf.offset) / pmf.step).round() as usize;
            brute[k] += w;
        }
        for (k, (&a, &b)) in pmf.probs.iter().zip(&brute).enumerate() {
            assert!(close(a, b, 1e-12), "n={n} k={k}: {a} vs {b}");
        }
    }

    #[test]
    fn moments_examples() {
        let r = SummandModel::rademacher();
        assert_eq!(r.moments_at(7), (1.0, 1.0));
        let tp = SummandModel::iid(SummandDist::two_point(-1.0, 2.0).unwrap()).unwrap();
        let (s2, xi) = tp.moments_at(3);
        assert!(close(s2, 2.0, 1e-15));
        // brute force over the two atoms
        let brute = (2.0 / 3.0) * 1.0 + (1.0 / 3.0) * 8.0;
        assert!(close(xi, brute, 1e-15));
        let sched = SummandModel::scaled(SummandDist::Rademacher, 1.0, 1.0).unwrap();
        let (s2, xi) = sched.moments_at(4);
        assert!(close(s2, 1.25, 1e-15) && close(xi, 1.25f64.powf(1.5), 1e-15));
    }

    #[test]
    fn continuous_preset_moments_match_quadrature() {
        let h = 1.7;
        let u = SummandDist::CenteredUniform { half_width: h };
        let v = integrate(|x| x * x / (2.0 * h), -h, h, 1e-13)
            .unwrap()
            .value;
        let t = integrate(|x: f64| x.abs().powi(3) / (2.0 * h), -h, h, 1e-13)
            .unwrap()
            .value;
        assert!(close(u.variance(), v, 1e-12) && close(u.third_abs_moment(), t, 1e-12));

        let e = SummandDist::CenteredExponential;
        let dens = |x: f64| (-(x + 1.0)).exp();
        let m1 = integrate(|x| x * dens(x), -1.0, 60.0, 1e-12).unwrap().value;
        let m2 = integrate(|x| x * x * dens(x), -1.0, 60.0, 1e-12)
            .unwrap()
            .value;
        let m3 = integrate(|x: f64| x.abs().powi(3) * dens(x), -1.0, 60.0, 1e-12)
            .unwrap()
            .value;
        assert!(close(m1, e.mean(), 1e-10) && close(m2, e.variance(), 1e-10));
        assert!(close(m3, e.third_abs_moment(), 1e-10));

        let g = SummandDist::Gaussian { sigma: 1.3 };
        let phi = |x: f64| crate::numeric::special::std_normal_pdf(x / 1.3) / 1.3;
        let m3 = integrate(|x: f64| x.abs().powi(3) * phi(x), -20.0, 20.0, 1e-12)
            .unwrap()
            .value;
        assert!(close(m3, g.third_abs_moment(), 1e-10));
    }

    #[test]
    fn aggregates_examples() {
        let iid = SummandModel::iid(SummandDist::two_point(-1.0, 2.0).unwrap()).unwrap();
        let a = iid.aggregates(100).unwrap();
        assert!(close(a.sigma_hat_n_sq, 2.0, 1e-13) && close(a.xi_hat_n, 10.0 / 3.0, 1e-13));
        let sched = SummandModel::scaled(SummandDist::Rademacher, 1.0, 1.0).unwrap();
        assert!(close(
            sched.aggregates(2).unwrap().sigma_hat_n_sq,
            1.75,
            1e-15
        ));
        assert_eq!(sched.sigma_hat_sq_limit(), Some(1.0));
        // harmonic-number closed form 1 + H_n / n
        let n = 500;
        let h: f64 = (1..=n).map(|j| 1.0 / j as f64).sum();
        let got = sched.aggregates(n).unwrap().sigma_hat_n_sq;
        assert!(close(got, 1.0 + h / n as f64, 1e-13));
        assert!(sched.aggregates(0).is_err());
    }

    #[test]
    fn envelope_brackets_schedule() {
        for (amp, exp) in [(1.0, 1.0), (-0.5, 0.5), (0.3, 0.0)] {
            let m = SummandModel::scaled(SummandDist::CenteredExponential, amp, exp).unwrap();
            let env = m.envelope();
            for j in 1..2000 {
                let (s2, xi) = m.moments_at(j);
                assert!(env.sigma_sq_inf <= s2 + 1e-15 && s2 <= env.sigma_sq_sup + 1e-15);
                assert!(xi <= env.xi_sup + 1e-12);
            }
        }
    }

    #[test]
    fn partial_sum_examples() {
        let mut rng = stream_from_seed(11);
        assert_eq!(
            SummandModel::rademacher().sample_partial_sum(0, &mut rng),
            0.0
        );

        let g = SummandModel::iid(SummandDist::Gaussian { sigma: 1.0 }).unwrap();
        let reps = 100_000;
        let xs: Vec<f64> = (0..reps)
            .map(|_| g.sample_partial_sum(4, &mut rng))
            .collect();
        let var = xs.iter().map(|x| x * x).sum::<f64>() / reps as f64;
        assert!((var - 4.0).abs() < 0.2, "var {var}");

        let r = SummandModel::rademacher();
        let reps = 200;
        let n = 1_000_000;
        let mean = (0..reps)
            .map(|_| r.sample_partial_sum(n, &mut rng) / (n as f64).sqrt())
            .sum::<f64>()
            / reps as f64;
        assert!(mean.abs() <= 4.0 / (reps as f64).sqrt(), "mean {mean}");
    }

    #[test]
    fn rademacher_fast_path_has_exact_variance() {
        let r = SummandModel::rademacher();
        let mut rng = stream_from_seed(5);
        for n in [1_u64, 63, 64, 65, 130] {
            let reps = 40_000;
            let xs: Vec<f64> = (0..reps)
                .map(|_| r.sample_partial_sum(n, &mut rng))
                .collect();
            assert!(xs
                .iter()
                .all(|x| (x + n as f64) % 2.0 == 0.0 && x.abs() <= n as f64));
            let var = xs.iter().map(|x| x * x).sum::<f64>() / reps as f64;
            assert!((var / n as f64 - 1.0).abs() < 0.05, "n={n} var={var}");
        }
    }

    #[test]
    fn lattice_examples() {
        let r = SummandModel::rademacher();
        let p2 = r.lattice_partial_pmf(2, DEFAULT_LATTICE_CAP).unwrap();
        assert_eq!((p2.offset, p2.step), (-2.0, 2.0));
        assert_eq!(p2.probs, vec![0.25, 0.5, 0.25]);
        let p0 = r.lattice_partial_pmf(0, DEFAULT_LATTICE_CAP).unwrap();
        assert_eq!((p0.offset, p0.probs.clone()), (0.0, vec![1.0]));
        compare_with_enumeration(&SummandDist::two_point(-1.0, 2.0).unwrap(), 3);
    }

    #[test]
    fn lattice_errors() {
        let g = SummandModel::iid(SummandDist::Gaussian { sigma: 1.0 }).unwrap();
        assert!(matches!(
            g.lattice_partial_pmf(2, 100),
            Err(Error::NotLattice { .. })
        ));
        let s = SummandModel::scaled(SummandDist::Rademacher, 1.0, 1.0).unwrap();
        assert!(matches!(
            s.lattice_partial_pmf(3, 100),
            Err(Error::IncompatibleLattice { .. })
        ));
        assert!(matches!(
            SummandModel::rademacher().lattice_partial_pmf(500, 100),
            Err(Error::SizeCap { .. })
        ));
    }

    #[test]
    fn cycle_of_lattices_with_shared_step() {
        let a = SummandDist::lattice(-1.0, 1.0, vec![0.5, 0.0, 0.5]).unwrap();
        let b = SummandDist::lattice(-2.0, 1.0, vec![0.25, 0.0, 0.5, 0.0, 0.25]).unwrap();
        let m = SummandModel::cycle(vec![a.clone(), b.clone()]).unwrap();
        let pmf = m.lattice_partial_pmf(4, DEFAULT_LATTICE_CAP).unwrap();
        let by_hand = a
            .lattice_pmf()
            .unwrap()
            .convolve(&b.lattice_pmf().unwrap())
            .convolve(&a.lattice_pmf().unwrap())
            .convolve(&b.lattice_pmf().unwrap());
        assert_eq!(pmf, by_hand);
        assert!(close(pmf.mean(), 0.0, 1e-14));
        let var = pmf.moment(|x| x * x);
        assert!(close(var, 2.0 * a.variance() + 2.0 * b.variance(), 1e-12));
    }

    #[test]
    fn validation_rejects_bad_presets() {
        assert!(SummandDist::two_point(1.0, 2.0).is_err());
        assert!(matches!(
            SummandDist::lattice(0.0, 1.0, vec![0.5, 0.5]),
            Err(Error::NotCentered(_))
        ));
        assert!(SummandDist::lattice(0.0, 1.0, vec![1.0]).is_err());
        assert!(SummandModel::scaled(SummandDist::Rademacher, -1.0, 1.0).is_err());
        assert!(SummandModel::cycle(vec![]).is_err());
    }

    fn lattice_preset() -> impl Strategy<Value = SummandDist> {
        prop_oneof![
            Just(SummandDist::Rademacher),
            (-3.0..-0.1f64, 0.1..3.0f64).prop_map(|(a, b)| SummandDist::TwoPoint { a, b }),
            (1usize..4).prop_map(|h| {
                // symmetric lattice -h..h with triangular weights
                let w: Vec<f64> = (0..=2 * h)
                    .map(|k| (h + 1 - k.abs_diff(h)) as f64)
                    .collect();
                let s: f64 = w.iter().sum();
                SummandDist::Lattice {
                    offset: -(h as f64),
                    step: 1.0,
                    probs: w.into_iter().map(|x| x / s).collect(),
                }
            }),
        ]
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn convolution_matches_enumeration(dist in lattice_preset(), n in 0usize..7) {
            compare_with_enumeration(&dist, n);
        }

        #[test]
        fn lattice_presets_are_centered_and_consistent(dist in lattice_preset()) {
            let l = dist.lattice_pmf().unwrap();
            prop_assert!(l.mean().abs() < 1e-12);
            let m = SummandModel::iid(dist.clone()).unwrap();
            let one = m.lattice_partial_pmf(1, DEFAULT_LATTICE_CAP).unwrap();
            let (s2, xi) = m.moments_at(1);
            prop_assert!((one.moment(|x| x * x) - s2).abs() < 1e-12);
            prop_assert!((one.moment(|x| x.abs().powi(3)) - xi).abs() < 1e-12);
        }

        #[test]
        fn iid_aggregates_do_not_depend_on_n(dist in lattice_preset(), n in 1u64..300) {
            let m = SummandModel::iid(dist.clone()).unwrap();
            let a = m.aggregates(n).unwrap();
            prop_assert!((a.sigma_hat_n_sq - dist.variance()).abs() < 1e-12);
            prop_assert!((a.xi_hat_n - dist.third_abs_moment()).abs() < 1e-12);
        }
    }

    #[test]
    fn enumeration_up_to_twelve() {
        for n in [8, 12] {
            compare_with_enumeration(&SummandDist::Rademacher, n);
            compare_with_enumeration(&SummandDist::two_point(-0.5, 1.5).unwrap(), n);
        }
    }
}
