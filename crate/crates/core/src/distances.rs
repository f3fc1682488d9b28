//! Kolmogorov and Wasserstein distances: empirical estimators with bands,
//! exact computations for discrete laws, and numerical CDF integration.

use serde::{Deserialize, Serialize};

use crate::bounds::Metric;
use crate::error::{invalid, Error, Result};
use crate::index::IndexModel;
use crate::limits::Law;
use crate::numeric::quad::integrate_with_breaks;
use crate::numeric::special::{std_normal_cdf, NORMAL_CDF_ABS_ERR, SQRT_2_OVER_PI};
use crate::numeric::KahanSum;
use crate::summands::{LatticePmf, SummandModel};

/// Largest denominator tried when expressing a lattice offset as a rational
/// multiple of the step.
const MAX_DENOMINATOR: i64 = 1000;
/// Atoms closer than this (relative) are merged by the float fallback.
const MERGE_TOL: f64 = 1e-14;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Empirical,
    ExactLattice,
    NumericCdf,
}

impl Method {
    pub fn as_str(self) -> &'static str {
        match self {
            Method::Empirical => "empirical",
            Method::ExactLattice => "exact_lattice",
            Method::NumericCdf => "numeric_cdf",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistanceEstimate {
    pub value: f64,
    pub metric: Metric,
    pub method: Method,
    /// Half-width of the uncertainty: a confidence band for Monte Carlo, the
    /// numerical/truncation error for exact methods.
    pub band: f64,
    pub n_samples: Option<u64>,
    pub seed: Option<u64>,
}

impl DistanceEstimate {
    fn new(value: f64, metric: Metric, method: Method, band: f64) -> Self {
        Self {
            value: value.max(0.0),
            metric,
            method,
            band: band.max(0.0),
            n_samples: None,
            seed: None,
        }
    }
}

/// Half-width `sqrt(ln(2/delta) / (2n))` of the DKW confidence band.
pub fn dkw_band(n: usize, delta: f64) -> f64 {
    ((2.0 / delta).ln() / (2.0 * n as f64)).sqrt()
}

fn check_sorted(samples: &[f64]) -> Result<()> {
    if samples.is_empty() {
        return Err(Error::Empty("samples"));
    }
    if samples.iter().any(|x| x.is_nan()) || samples.windows(2).any(|w| w[0] > w[1]) {
        return Err(Error::UnsortedSamples);
    }
    Ok(())
}

/// A law with finitely many atoms, possibly missing `deficiency` mass.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteLaw {
    atoms: Vec<f64>,
    /// `cum[i] = P(X <= atoms[i])`.
    cum: Vec<f64>,
    deficiency: f64,
}

impl DiscreteLaw {
    /// From `(x, weight)` pairs in any order; equal positions are merged.
    pub fn new(mut points: Vec<(f64, f64)>, deficiency: f64) -> Result<Self> {
        if points.iter().any(|(x, w)| !x.is_finite() || !(*w >= 0.0)) {
            return Err(Error::InvalidPmf(
                "atoms must be finite with nonnegative weight".into(),
            ));
        }
        points.retain(|p| p.1 > 0.0);
        if points.is_empty() {
            return Err(Error::Empty("pmf"));
        }
        points.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut atoms = Vec::with_capacity(points.len());
        let mut weights: Vec<f64> = Vec::with_capacity(points.len());
        for (x, w) in points {
            match atoms.last() {
                Some(&last) if x == last => *weights.last_mut().unwrap() += w,
                _ => {
                    atoms.push(x);
                    weights.push(w);
                }
            }
        }
        let mut acc = KahanSum::new();
        let cum = weights
            .iter()
            .map(|&w| {
                acc.add(w);
                acc.total()
            })
            .collect();
        Ok(Self {
            atoms,
            cum,
            deficiency: deficiency.max(0.0),
        })
    }

    /// Law of `scale * X` for `X` with the given lattice pmf.
    pub fn from_lattice(pmf: &LatticePmf, scale: f64) -> Result<Self> {
        let points = pmf
            .probs
            .iter()
            .enumerate()
            .map(|(k, &q)| (scale * pmf.atom(k), q))
            .collect();
        Self::new(points, 0.0)
    }

    pub fn atoms(&self) -> &[f64] {
        &self.atoms
    }

    pub fn deficiency(&self) -> f64 {
        self.deficiency
    }

    pub fn total_mass(&self) -> f64 {
        *self.cum.last().unwrap_or(&0.0)
    }

    pub fn weight(&self, i: usize) -> f64 {
        if i == 0 {
            self.cum[0]
        } else {
            self.cum[i] - self.cum[i - 1]
        }
    }

    pub fn moment<G: Fn(f64) -> f64>(&self, g: G) -> f64 {
        (0..self.atoms.len())
            .map(|i| g(self.atoms[i]) * self.weight(i))
            .collect::<KahanSum>()
            .total()
    }

    /// The same law with the missing mass placed as an atom at `x`.
    pub fn with_deficiency_at(&self, x: f64) -> Result<Self> {
        let mut points: Vec<(f64, f64)> = (0..self.atoms.len())
            .map(|i| (self.atoms[i], self.weight(i)))
            .collect();
        points.push((x, self.deficiency));
        Self::new(points, 0.0)
    }

    fn count_le(&self, x: f64) -> usize {
        self.atoms.partition_point(|&a| a <= x)
    }
}

impl Law for DiscreteLaw {
    fn cdf(&self, x: f64) -> Result<f64> {
        let i = self.count_le(x);
        Ok(if i == 0 { 0.0 } else { self.cum[i - 1] })
    }

    fn cdf_left(&self, x: f64) -> Result<f64> {
        let i = self.atoms.partition_point(|&a| a < x);
        Ok(if i == 0 { 0.0 } else { self.cum[i - 1] })
    }

    fn cdf_tolerance(&self) -> f64 {
        self.deficiency
    }

    fn lower_integral(&self, x: f64) -> Result<f64> {
        let i = self.count_le(x);
        Ok((0..i)
            .map(|j| self.weight(j) * (x - self.atoms[j]))
            .collect::<KahanSum>()
            .total())
    }

    /// Treats the law as normalized; see [`DiscreteLaw::with_deficiency_at`].
    fn upper_integral(&self, x: f64) -> Result<f64> {
        let i = self.count_le(x);
        Ok((i..self.atoms.len())
            .map(|j| self.weight(j) * (self.atoms[j] - x))
            .collect::<KahanSum>()
            .total())
    }

    fn quantile(&self, q: f64) -> Result<f64> {
        if !(q > 0.0 && q < 1.0) {
            return Err(invalid("q", format!("must lie in (0, 1), got {q}")));
        }
        let i = self.cum.partition_point(|&c| c < q);
        Ok(self.atoms[i.min(self.atoms.len() - 1)])
    }

    fn atoms(&self) -> Vec<f64> {
        self.atoms.clone()
    }
}

/// `sup |F_n - F|` for the empirical CDF of sorted `samples`, comparing
/// both edges of every jump. Unsorted input is rejected.
pub fn empirical_dk<L: Law + ?Sized>(
    samples: &[f64],
    target: &L,
    delta: f64,
) -> Result<DistanceEstimate> {
    check_sorted(samples)?;
    if !(delta > 0.0 && delta < 1.0) {
        return Err(invalid("delta", format!("must lie in (0, 1), got {delta}")));
    }
    let n = samples.len();
    let nf = n as f64;
    let mut sup: f64 = 0.0;
    let mut i = 0;
    while i < n {
        let x = samples[i];
        let mut j = i;
        while j < n && samples[j] == x {
            j += 1;
        }
        sup = sup
            .max((i as f64 / nf - target.cdf_left(x)?).abs())
            .max((j as f64 / nf - target.cdf(x)?).abs());
        i = j;
    }
    let mut est = DistanceEstimate::new(
        sup,
        Metric::Kolmogorov,
        Method::Empirical,
        dkw_band(n, delta) + target.cdf_tolerance(),
    );
    est.n_samples = Some(n as u64);
    Ok(est)
}

/// `sup |F_d - F|` over both edges of every atom of either law; the
/// missing mass and the target's CDF accuracy go into the band.
pub fn exact_dk_lattice<L: Law + ?Sized>(
    law: &DiscreteLaw,
    target: &L,
) -> Result<DistanceEstimate> {
    let mut sup: f64 = 0.0;
    let mut below = 0.0;
    for (i, &x) in law.atoms.iter().enumerate() {
        let at = law.cum[i];
        sup = sup
            .max((below - target.cdf_left(x)?).abs())
            .max((at - target.cdf(x)?).abs());
        below = at;
    }
    // jumps of the target between atoms of the law
    for x in target.atoms() {
        sup = sup
            .max((law.cdf_left(x)? - target.cdf_left(x)?).abs())
            .max((law.cdf(x)? - target.cdf(x)?).abs());
    }
    Ok(DistanceEstimate::new(
        sup,
        Metric::Kolmogorov,
        Method::ExactLattice,
        law.deficiency + target.cdf_tolerance(),
    ))
}

/// `int |G - F|` for a right-continuous step function `G` jumping at
/// `xs` (sorted, distinct) to the levels `level(i)`, with `G = 0` before
/// `xs[0]` and `G = 1` after the last jump.
///
/// On each interval between jumps the integral is a difference of the
/// integrated target CDF; where `F` crosses the step level the interval is
/// split at the target quantile. Returns `(value, error_budget)`.
fn w1_step_vs_law<L, G>(xs: &[f64], level: G, target: &L) -> Result<(f64, f64)>
where
    L: Law + ?Sized,
    G: Fn(usize) -> f64,
{
    let n = xs.len();
    let mut acc = KahanSum::new();
    acc.add(target.lower_integral(xs[0])?);
    acc.add(target.upper_integral(xs[n - 1])?);
    let mut l_prev = target.lower_integral(xs[0])?;
    let mut l_scale = l_prev.abs();
    for i in 0..n - 1 {
        let (a, b) = (xs[i], xs[i + 1]);
        let c = level(i);
        let l_next = target.lower_integral(b)?;
        l_scale = l_scale.max(l_next.abs());
        let width = b - a;
        let piece = if target.cdf(a)? >= c {
            (l_next - l_prev) - c * width
        } else if target.cdf_left(b)? <= c {
            c * width - (l_next - l_prev)
        } else {
            let t = target.quantile(c)?.clamp(a, b);
            let l_t = target.lower_integral(t)?;
            (c * (t - a) - (l_t - l_prev)).max(0.0) + ((l_next - l_t) - c * (b - t)).max(0.0)
        };
        acc.add(piece.max(0.0));
        l_prev = l_next;
    }
    let range = xs[n - 1] - xs[0];
    let err =
        target.cdf_tolerance() * (range + 2.0) + 8.0 * (n as f64) * f64::EPSILON * (l_scale + 1.0);
    Ok((acc.total(), err))
}

/// W1 between the empirical law of sorted `samples` and `target`. The band
/// is the numerical error budget; sampling variability is assessed by
/// replication at the experiments layer.
pub fn empirical_w1<L: Law + ?Sized>(samples: &[f64], target: &L) -> Result<DistanceEstimate> {
    check_sorted(samples)?;
    let n = samples.len();
    // distinct sample values and the number of samples <= each
    let mut xs = Vec::with_capacity(n);
    let mut cum = Vec::with_capacity(n);
    for (i, &x) in samples.iter().enumerate() {
        if xs.last() == Some(&x) {
            *cum.last_mut().unwrap() = i + 1;
        } else {
            xs.push(x);
            cum.push(i + 1);
        }
    }
    let nf = n as f64;
    let (value, err) = w1_step_vs_law(&xs, |i| cum[i] as f64 / nf, target)?;
    let mut est = DistanceEstimate::new(value, Metric::Wasserstein, Method::Empirical, err);
    est.n_samples = Some(n as u64);
    Ok(est)
}

/// Exact W1 between a normalized discrete law and `target`.
pub fn exact_w1_discrete<L: Law + ?Sized>(
    law: &DiscreteLaw,
    target: &L,
) -> Result<DistanceEstimate> {
    let total = law.total_mass();
    let (value, err) = w1_step_vs_law(&law.atoms, |i| law.cum[i] / total, target)?;
    let mass_err =
        (1.0 - total).abs() * (law.atoms[0].abs().max(law.atoms[law.atoms.len() - 1].abs()));
    Ok(DistanceEstimate::new(
        value,
        Metric::Wasserstein,
        Method::ExactLattice,
        err + mass_err,
    ))
}

/// `int |F_a - F_b|` by adaptive quadrature on `[-R, R]`, with `R` chosen
/// so that the four tail integrals together are at most `tail_tol`.
pub fn numeric_w1_between_cdfs<A, B>(a: &A, b: &B, tail_tol: f64) -> Result<DistanceEstimate>
where
    A: Law + ?Sized,
    B: Law + ?Sized,
{
    if !(tail_tol > 0.0) {
        return Err(invalid(
            "tail_tol",
            format!("must be positive, got {tail_tol}"),
        ));
    }
    let tails = |r: f64| -> Result<f64> {
        Ok(a.upper_integral(r)?
            + b.upper_integral(r)?
            + a.lower_integral(-r)?
            + b.lower_integral(-r)?)
    };
    let mut r = 1.0;
    while tails(r)? > tail_tol {
        r *= 2.0;
        if r > 1e12 {
            return Err(Error::NoTailBound(
                "no finite window captures the tails".into(),
            ));
        }
    }
    let mut breaks: Vec<f64> = a
        .atoms()
        .into_iter()
        .chain(b.atoms())
        .chain([0.0])
        .filter(|x| x.abs() < r)
        .collect();
    breaks.push(-r);
    breaks.push(r);
    breaks.sort_by(f64::total_cmp);
    breaks.dedup();
    let first_err = std::cell::Cell::new(None);
    let q = integrate_with_breaks(
        |z| match (a.cdf(z), b.cdf(z)) {
            (Ok(x), Ok(y)) => (x - y).abs(),
            (Err(e), _) | (_, Err(e)) => {
                first_err.replace(Some(e));
                f64::NAN
            }
        },
        &breaks,
        tail_tol,
    );
    if let Some(e) = first_err.take() {
        return Err(e);
    }
    let q = q?;
    let cdf_err = (a.cdf_tolerance() + b.cdf_tolerance()) * 2.0 * r;
    Ok(DistanceEstimate::new(
        q.value,
        Metric::Wasserstein,
        Method::NumericCdf,
        2.0 * tail_tol + cdf_err,
    ))
}

/// Exact law of `W = mu^(-1/2) (X_1 + ... + X_N)` for lattice summands.
#[derive(Debug, Clone, PartialEq)]
pub struct RandomSumPmf {
    /// Atoms of `W` for `N <= n_max`; the remaining index mass is the
    /// law's deficiency.
    pub law: DiscreteLaw,
    pub n_max: u64,
    pub mu: f64,
    /// Bound on `E[|W|; N > n_max]`, the W1 cost of moving the missing mass
    /// to zero.
    pub w1_tail: f64,
}

impl RandomSumPmf {
    /// The law with the missing mass placed at 0, suitable for W1.
    pub fn normalized(&self) -> Result<DiscreteLaw> {
        self.law.with_deficiency_at(0.0)
    }
}

/// `(B, A_j)` with `offset_j / step = A_j / B` for all `j`, if a common
/// denominator `B <= MAX_DENOMINATOR` exists.
fn common_denominator(ratios: &[f64]) -> Option<(i64, Vec<i64>)> {
    'outer: for b in 1..=MAX_DENOMINATOR {
        let mut nums = Vec::with_capacity(ratios.len());
        for &r in ratios {
            let x = r * b as f64;
            let a = x.round();
            if (x - a).abs() > 1e-9 * (1.0 + x.abs()) {
                continue 'outer;
            }
            nums.push(a as i64);
        }
        return Some((b, nums));
    }
    None
}

/// Exact pmf of `W` by incremental convolution: the `n`-fold pmf is built
/// from the `(n-1)`-fold one and mixed in with weight `P(N = n)`, for `n` up
/// to the point where the index tail mass is at most `tail_tol`.
pub fn random_sum_exact_pmf(
    index: &IndexModel,
    summands: &SummandModel,
    tail_tol: f64,
    cap: usize,
) -> Result<RandomSumPmf> {
    index.validate()?;
    let mu = index.mean()?;
    let n_max = index.truncation_point(|k| index.tail_mass(k), tail_tol)?;
    let step = summands.common_step(n_max.max(1))?;
    let period = match summands {
        SummandModel::Iid { .. } => 1,
        SummandModel::Schedule {
            schedule: crate::summands::Schedule::Cycle { dists },
        } => dists.len() as u64,
        SummandModel::Schedule { .. } => n_max.max(1),
    };
    let lattices: Vec<LatticePmf> = (1..=period.min(n_max.max(1)))
        .map(|j| summands.lattice_at(j))
        .collect::<Result<_>>()?;
    let lattice = |j: u64| &lattices[((j - 1) % lattices.len() as u64) as usize];
    let radius = lattices
        .iter()
        .map(|l| l.offset.abs().max(l.atom(l.probs.len() - 1).abs()))
        .fold(0.0, f64::max);
    let w1_tail = radius * index.tail_first_moment(n_max) / mu.sqrt();

    let ratios: Vec<f64> = lattices.iter().map(|l| l.offset / step).collect();
    let deficiency = index.tail_mass(n_max);
    let law = match common_denominator(&ratios) {
        Some((b, nums)) => {
            // position of atom k of the n-fold sum, in units of step / b
            let mut lo = 0i64;
            let mut hi = 0i64;
            let mut off = 0i64;
            let mut len = 1i64;
            for n in 1..=n_max {
                let j = ((n - 1) % lattices.len() as u64) as usize;
                off += nums[j];
                len += lattice(n).probs.len() as i64 - 1;
                lo = lo.min(off);
                hi = hi.max(off + (len - 1) * b);
            }
            let size = (hi - lo + 1) as usize;
            if size > cap || len as usize > cap {
                return Err(Error::SizeCap {
                    size: size.max(len as usize),
                    cap,
                });
            }
            let mut dense = vec![0.0f64; size];
            let mut cur = LatticePmf::point_mass_at_zero(step);
            let mut off = 0i64;
            for n in index.support_start().min(1)..=n_max {
                if n >= 1 {
                    let j = ((n - 1) % lattices.len() as u64) as usize;
                    cur = cur.convolve(lattice(n));
                    off += nums[j];
                }
                let q = index.pmf(n);
                if q == 0.0 {
                    continue;
                }
                for (k, &pk) in cur.probs.iter().enumerate() {
                    dense[(off + k as i64 * b - lo) as usize] += q * pk;
                }
            }
            let unit = step / (b as f64 * mu.sqrt());
            let points = dense
                .into_iter()
                .enumerate()
                .filter(|&(_, w)| w > 0.0)
                .map(|(i, w)| ((i as i64 + lo) as f64 * unit, w))
                .collect();
            DiscreteLaw::new(points, deficiency)?
        }
        None => {
            let mut points: Vec<(f64, f64)> = Vec::new();
            let mut cur = LatticePmf::point_mass_at_zero(step);
            let scale = 1.0 / mu.sqrt();
            for n in index.support_start().min(1)..=n_max {
                if n >= 1 {
                    cur = cur.convolve(lattice(n));
                }
                let q = index.pmf(n);
                if q == 0.0 {
                    continue;
                }
                if points.len() + cur.probs.len() > cap {
                    return Err(Error::SizeCap {
                        size: points.len() + cur.probs.len(),
                        cap,
                    });
                }
                points.extend(
                    cur.probs
                        .iter()
                        .enumerate()
                        .map(|(k, &p)| (scale * cur.atom(k), q * p)),
                );
            }
            points.sort_by(|a, b| a.0.total_cmp(&b.0));
            let mut merged: Vec<(f64, f64)> = Vec::with_capacity(points.len());
            for (x, w) in points {
                match merged.last_mut() {
                    Some(last) if (x - last.0).abs() <= MERGE_TOL * (1.0 + x.abs()) => last.1 += w,
                    _ => merged.push((x, w)),
                }
            }
            DiscreteLaw::new(merged, deficiency)?
        }
    };
    Ok(RandomSumPmf {
        law,
        n_max,
        mu,
        w1_tail,
    })
}

/// Distance between `Normal(0, sigma^2)` and `Normal(0, tau^2)`. The
/// Kolmogorov supremum sits where the densities cross,
/// `t^2 = 2 ln(tau/sigma) sigma^2 tau^2 / (tau^2 - sigma^2)`.
pub fn gaussian_pair_exact(sigma: f64, tau: f64, metric: Metric) -> Result<DistanceEstimate> {
    if !(sigma > 0.0 && tau > 0.0) {
        return Err(invalid(
            "sigma/tau",
            format!("must be positive, got {sigma}, {tau}"),
        ));
    }
    let (value, band) = match metric {
        Metric::Wasserstein => (SQRT_2_OVER_PI * (sigma - tau).abs(), 0.0),
        Metric::Kolmogorov => {
            if sigma == tau {
                (0.0, 0.0)
            } else {
                let (s2, t2) = (sigma * sigma, tau * tau);
                let t = (2.0 * (tau / sigma).ln() * s2 * t2 / (t2 - s2)).sqrt();
                (
                    (std_normal_cdf(t / sigma) - std_normal_cdf(t / tau)).abs(),
                    2.0 * NORMAL_CDF_ABS_ERR,
                )
            }
        }
    };
    Ok(DistanceEstimate::new(
        value,
        metric,
        Method::NumericCdf,
        band,
    ))
}
