//! Target laws: centered normals, Laplace laws and normal scale mixtures
//! `sigma * sqrt(U) * zeta`.

use rand::Rng;
use rand_distr::{Distribution, Exp1, StandardNormal};

use crate::error::{invalid, Error, Result};
use crate::index::{IndexModel, IndexSampler, ScaledIndexLimit};
use crate::numeric::quad::{integrate, integrate_with_breaks};
use crate::numeric::root::solve_monotone;
use crate::numeric::special::{
    std_normal_cdf, std_normal_integrated_cdf, std_normal_pdf, std_normal_quantile,
    NORMAL_CDF_ABS_ERR,
};
use crate::numeric::KahanSum;

/// Absolute tolerance of the quadratures behind mixture evaluations.
const MIX_QUAD_TOL: f64 = 1e-13;
/// `u = s^2` cutoff for Exp(1) mixing; `P(U > S_MAX^2) < 5e-19`.
const S_MAX: f64 = 6.5;
const EXP_CUTOFF_MASS: f64 = 5e-19;
const QUANTILE_TOL: f64 = 1e-12;

/// A univariate law with the evaluations the distance computations need.
pub trait Law {
    /// `P(X <= x)`.
    fn cdf(&self, x: f64) -> Result<f64>;

    /// `P(X < x)`.
    fn cdf_left(&self, x: f64) -> Result<f64> {
        self.cdf(x)
    }

    /// Absolute accuracy of every value returned by `cdf`/`cdf_left`.
    fn cdf_tolerance(&self) -> f64;

    /// `int_{-inf}^x F(t) dt`.
    fn lower_integral(&self, x: f64) -> Result<f64>;

    /// `int_x^inf (1 - F(t)) dt`.
    fn upper_integral(&self, x: f64) -> Result<f64>;

    fn quantile(&self, q: f64) -> Result<f64>;

    /// Points where the CDF may jump.
    fn atoms(&self) -> Vec<f64> {
        Vec::new()
    }
}

/// Law of the mixing variable `U` in a scale mixture.
#[derive(Debug, Clone)]
enum Mixing {
    Continuous(ScaledIndexLimit),
    /// Finitely many atoms `(u, weight)`; `deficiency` is the mass left out.
    Discrete {
        atoms: Vec<(f64, f64)>,
        deficiency: f64,
        sampler: Option<(IndexSampler, f64)>,
    },
}

#[derive(Debug, Clone)]
pub struct ScaleMixture {
    sigma: f64,
    mixing: Mixing,
}

#[derive(Debug, Clone)]
pub enum LimitLaw {
    Normal { sigma: f64 },
    Laplace { a: f64, b: f64 },
    ScaleMixture(ScaleMixture),
}

fn check_sigma(sigma: f64) -> Result<()> {
    if sigma > 0.0 && sigma.is_finite() {
        Ok(())
    } else {
        Err(invalid("sigma", format!("must be positive, got {sigma}")))
    }
}

fn check_q(q: f64) -> Result<()> {
    if q > 0.0 && q < 1.0 {
        Ok(())
    } else {
        Err(invalid("q", format!("must lie in (0, 1), got {q}")))
    }
}

/// `P(s * zeta <= z)`, including the degenerate `s = 0`.
fn scaled_normal_cdf(z: f64, s: f64, left: bool) -> f64 {
    if s > 0.0 {
        std_normal_cdf(z / s)
    } else if z > 0.0 || (z == 0.0 && !left) {
        1.0
    } else {
        0.0
    }
}

/// `int_{-inf}^x P(s * zeta <= t) dt`.
fn scaled_normal_lower(x: f64, s: f64) -> f64 {
    if s > 0.0 {
        s * std_normal_integrated_cdf(x / s)
    } else {
        x.max(0.0)
    }
}

impl LimitLaw {
    pub fn normal(sigma: f64) -> Result<Self> {
        check_sigma(sigma)?;
        Ok(LimitLaw::Normal { sigma })
    }

    pub fn laplace(a: f64, b: f64) -> Result<Self> {
        if !a.is_finite() {
            return Err(invalid("a", "must be finite"));
        }
        if !(b > 0.0 && b.is_finite()) {
            return Err(invalid("b", format!("must be positive, got {b}")));
        }
        Ok(LimitLaw::Laplace { a, b })
    }

    /// `sigma * sqrt(U) * zeta` for `U` one of the candidate index limits.
    pub fn mixture(sigma: f64, limit: ScaledIndexLimit) -> Result<Self> {
        check_sigma(sigma)?;
        let mixing = match limit {
            ScaledIndexLimit::PointMassOne => Mixing::Discrete {
                atoms: vec![(1.0, 1.0)],
                deficiency: 0.0,
                sampler: None,
            },
            other => Mixing::Continuous(other),
        };
        Ok(LimitLaw::ScaleMixture(ScaleMixture { sigma, mixing }))
    }

    /// `sigma * sqrt(N / E[N]) * zeta`, truncating the index where its tail
    /// mass drops below `tol`.
    pub fn mixture_over_index(sigma: f64, model: &IndexModel, tol: f64) -> Result<Self> {
        check_sigma(sigma)?;
        model.validate()?;
        let mu = model.mean()?;
        let k = model.truncation_point(|k| model.tail_mass(k), tol)?;
        let atoms = (model.support_start()..=k)
            .map(|n| (n as f64 / mu, model.pmf(n)))
            .filter(|&(_, w)| w > 0.0)
            .collect();
        let sampler = IndexSampler::new(model).ok().map(|s| (s, mu));
        Ok(LimitLaw::ScaleMixture(ScaleMixture {
            sigma,
            mixing: Mixing::Discrete {
                atoms,
                deficiency: model.tail_mass(k),
                sampler,
            },
        }))
    }

    /// `sigma * sqrt(U) * zeta` for `U` with the given atoms `(u, weight)`;
    /// `deficiency` is the mixing mass not listed.
    pub fn discrete_mixture(sigma: f64, atoms: Vec<(f64, f64)>, deficiency: f64) -> Result<Self> {
        check_sigma(sigma)?;
        if atoms.is_empty()
            || atoms
                .iter()
                .any(|&(u, w)| !(u >= 0.0 && u.is_finite() && w >= 0.0))
        {
            return Err(invalid(
                "atoms",
                "need nonnegative finite mixing atoms and weights",
            ));
        }
        Ok(LimitLaw::ScaleMixture(ScaleMixture {
            sigma,
            mixing: Mixing::Discrete {
                atoms,
                deficiency: deficiency.max(0.0),
                sampler: None,
            },
        }))
    }

    pub fn variance(&self) -> f64 {
        match self {
            LimitLaw::Normal { sigma } => sigma * sigma,
            LimitLaw::Laplace { b, .. } => 2.0 * b * b,
            LimitLaw::ScaleMixture(m) => m.sigma * m.sigma * m.mixing_mean(),
        }
    }

    /// Short human-readable description used in reports.
    pub fn label(&self) -> String {
        match self {
            LimitLaw::Normal { sigma } => format!("normal(0, sd={sigma:.17e})"),
            LimitLaw::Laplace { a, b } => format!("laplace({a:.17e}, {b:.17e})"),
            LimitLaw::ScaleMixture(m) => {
                let kind = match &m.mixing {
                    Mixing::Continuous(ScaledIndexLimit::ExponentialRateOne) => "exp1",
                    Mixing::Continuous(_) => "custom",
                    Mixing::Discrete { .. } => "discrete",
                };
                format!("scale_mixture(sigma={:.17e}, {kind})", m.sigma)
            }
        }
    }

    fn center(&self) -> f64 {
        match self {
            LimitLaw::Laplace { a, .. } => *a,
            _ => 0.0,
        }
    }

    /// Density of the absolutely continuous part.
    pub fn pdf(&self, z: f64) -> Result<f64> {
        match self {
            LimitLaw::Normal { sigma } => Ok(std_normal_pdf(z / sigma) / sigma),
            LimitLaw::Laplace { a, b } => Ok((-(z - a).abs() / b).exp() / (2.0 * b)),
            LimitLaw::ScaleMixture(m) => m.pdf(z),
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R, count: usize) -> Result<Vec<f64>> {
        (0..count).map(|_| self.draw(rng)).collect()
    }

    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<f64> {
        match self {
            LimitLaw::Normal { sigma } => {
                let z: f64 = StandardNormal.sample(rng);
                Ok(sigma * z)
            }
            LimitLaw::Laplace { a, b } => {
                let e: f64 = Exp1.sample(rng);
                Ok(if rng.random::<bool>() {
                    a + b * e
                } else {
                    a - b * e
                })
            }
            LimitLaw::ScaleMixture(m) => {
                let u = m.draw_mixing(rng)?;
                let z: f64 = StandardNormal.sample(rng);
                Ok(m.sigma * u.sqrt() * z)
            }
        }
    }
}

impl ScaleMixture {
    fn mixing_mean(&self) -> f64 {
        match &self.mixing {
            Mixing::Continuous(ScaledIndexLimit::ExponentialRateOne) => 1.0,
            // scaled index limits have mean 1 by construction
            Mixing::Continuous(_) => 1.0,
            Mixing::Discrete { atoms, .. } => atoms.iter().map(|(u, w)| u * w).sum(),
        }
    }

    fn draw_mixing<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<f64> {
        match &self.mixing {
            Mixing::Continuous(ScaledIndexLimit::ExponentialRateOne) => Ok(Exp1.sample(rng)),
            Mixing::Continuous(limit) => {
                let q = rng.random::<f64>();
                solve_monotone(|u| Ok(limit.cdf(u)), q, 0.0, 1.0, 1e-14)
            }
            Mixing::Discrete {
                sampler: Some((s, mu)),
                ..
            } => Ok(s.draw(rng) as f64 / mu),
            Mixing::Discrete { atoms, .. } => {
                let total: f64 = atoms.iter().map(|a| a.1).sum();
                let mut q = rng.random::<f64>() * total;
                for &(u, w) in atoms {
                    if q < w {
                        return Ok(u);
                    }
                    q -= w;
                }
                Ok(atoms[atoms.len() - 1].0)
            }
        }
    }

    fn discrete_sum<G: Fn(f64) -> f64>(atoms: &[(f64, f64)], g: G) -> f64 {
        atoms
            .iter()
            .map(|&(u, w)| w * g(u))
            .collect::<KahanSum>()
            .total()
    }

    /// `E[g(sqrt(U))]` for Exp(1) mixing, via `u = s^2`.
    fn exp_expectation<G: Fn(f64) -> f64>(g: G, kink: f64) -> Result<f64> {
        let f = |s: f64| 2.0 * s * (-s * s).exp() * g(s);
        let mut breaks = vec![0.0];
        if kink > 0.0 && kink < S_MAX {
            breaks.push(kink);
        }
        breaks.push(S_MAX);
        Ok(integrate_with_breaks(f, &breaks, MIX_QUAD_TOL)?.value)
    }

    /// `E[g(U)]` for a continuous mixing CDF `F_U`, by parts:
    /// `g(0) + int_0^inf g'(u) (1 - F_U(u)) du`, with `|g| <= 1`.
    fn custom_expectation<D>(limit: &ScaledIndexLimit, g0: f64, dg: D) -> Result<f64>
    where
        D: Fn(f64) -> f64,
    {
        let mut umax = 1.0;
        while 1.0 - limit.cdf(umax) > MIX_QUAD_TOL {
            umax *= 2.0;
            if umax > 1e12 {
                return Err(Error::NoTailBound("mixing law has no usable tail".into()));
            }
        }
        let mut breaks = vec![0.0];
        let mut b = 1e-4_f64.min(umax / 2.0);
        while b < umax {
            breaks.push(b);
            b *= 4.0;
        }
        breaks.push(umax);
        let q = integrate_with_breaks(|u| dg(u) * (1.0 - limit.cdf(u)), &breaks, MIX_QUAD_TOL)?;
        Ok(g0 + q.value)
    }

    fn cdf_impl(&self, z: f64, left: bool) -> Result<f64> {
        let sigma = self.sigma;
        match &self.mixing {
            Mixing::Discrete { atoms, .. } => Ok(Self::discrete_sum(atoms, |u| {
                scaled_normal_cdf(z, sigma * u.sqrt(), left)
            })),
            Mixing::Continuous(ScaledIndexLimit::ExponentialRateOne) => {
                if z == 0.0 {
                    return Ok(0.5);
                }
                Self::exp_expectation(|s| scaled_normal_cdf(z, sigma * s, left), z.abs() / sigma)
            }
            Mixing::Continuous(limit) => {
                if z == 0.0 {
                    // all mass of U at 0 lies on the atom at 0
                    let p0 = limit.cdf(0.0);
                    return Ok(0.5 * (1.0 - p0) + if left { 0.0 } else { p0 });
                }
                let g0 = if z > 0.0 { 1.0 } else { 0.0 };
                let dg = |u: f64| {
                    if u <= 0.0 {
                        return 0.0;
                    }
                    let s = sigma * u.sqrt();
                    -std_normal_pdf(z / s) * z / (2.0 * s * u)
                };
                Self::custom_expectation(limit, g0, dg)
            }
        }
    }

    fn pdf(&self, z: f64) -> Result<f64> {
        let sigma = self.sigma;
        let dens = |s: f64| {
            if s > 0.0 {
                std_normal_pdf(z / s) / s
            } else {
                0.0
            }
        };
        match &self.mixing {
            Mixing::Discrete { atoms, .. } => {
                Ok(Self::discrete_sum(atoms, |u| dens(sigma * u.sqrt())))
            }
            Mixing::Continuous(ScaledIndexLimit::ExponentialRateOne) => {
                // the s-weight 2s cancels the 1/s of the density
                let f = |s: f64| {
                    if s <= 0.0 {
                        return 0.0;
                    }
                    2.0 * (-s * s).exp() * std_normal_pdf(z / (sigma * s)) / sigma
                };
                let kink = z.abs() / sigma;
                let breaks: Vec<f64> = if kink > 0.0 && kink < S_MAX {
                    vec![0.0, kink, S_MAX]
                } else {
                    vec![0.0, S_MAX]
                };
                Ok(integrate_with_breaks(f, &breaks, MIX_QUAD_TOL)?.value)
            }
            Mixing::Continuous(_) => Err(Error::Unsupported(
                "density of a scale mixture with custom mixing law".into(),
            )),
        }
    }

    fn lower_impl(&self, x: f64) -> Result<f64> {
        let sigma = self.sigma;
        match &self.mixing {
            Mixing::Discrete { atoms, .. } => Ok(Self::discrete_sum(atoms, |u| {
                scaled_normal_lower(x, sigma * u.sqrt())
            })),
            Mixing::Continuous(ScaledIndexLimit::ExponentialRateOne) => {
                Self::exp_expectation(|s| scaled_normal_lower(x, sigma * s), x.abs() / sigma)
            }
            Mixing::Continuous(_) => Err(Error::Unsupported(
                "integrated CDF of a scale mixture with custom mixing law".into(),
            )),
        }
    }

    fn tolerance(&self) -> f64 {
        match &self.mixing {
            Mixing::Discrete { deficiency, .. } => deficiency + NORMAL_CDF_ABS_ERR,
            Mixing::Continuous(_) => NORMAL_CDF_ABS_ERR + 10.0 * MIX_QUAD_TOL + EXP_CUTOFF_MASS,
        }
    }

    fn has_atom_at_zero(&self) -> bool {
        match &self.mixing {
            Mixing::Discrete { atoms, .. } => atoms.iter().any(|&(u, w)| u == 0.0 && w > 0.0),
            Mixing::Continuous(ScaledIndexLimit::Custom(f)) => f(0.0) > 0.0,
            Mixing::Continuous(_) => false,
        }
    }
}

impl Law for LimitLaw {
    fn cdf(&self, z: f64) -> Result<f64> {
        match self {
            LimitLaw::Normal { sigma } => Ok(std_normal_cdf(z / sigma)),
            LimitLaw::Laplace { a, b } => {
                let t = (z - a) / b;
                Ok(if t <= 0.0 {
                    0.5 * t.exp()
                } else {
                    1.0 - 0.5 * (-t).exp()
                })
            }
            LimitLaw::ScaleMixture(m) => m.cdf_impl(z, false),
        }
    }

    fn cdf_left(&self, z: f64) -> Result<f64> {
        match self {
            LimitLaw::ScaleMixture(m) => m.cdf_impl(z, true),
            _ => self.cdf(z),
        }
    }

    fn cdf_tolerance(&self) -> f64 {
        match self {
            LimitLaw::Normal { .. } => NORMAL_CDF_ABS_ERR,
            LimitLaw::Laplace { .. } => 1e-15,
            LimitLaw::ScaleMixture(m) => m.tolerance(),
        }
    }

    fn lower_integral(&self, x: f64) -> Result<f64> {
        match self {
            LimitLaw::Normal { sigma } => Ok(scaled_normal_lower(x, *sigma)),
            LimitLaw::Laplace { a, b } => {
                let t = (x - a) / b;
                Ok(if t <= 0.0 {
                    0.5 * b * t.exp()
                } else {
                    (x - a) + 0.5 * b * (-t).exp()
                })
            }
            LimitLaw::ScaleMixture(m) => m.lower_impl(x),
        }
    }

    fn upper_integral(&self, x: f64) -> Result<f64> {
        // every law here is symmetric about its center
        self.lower_integral(2.0 * self.center() - x)
    }

    fn quantile(&self, q: f64) -> Result<f64> {
        check_q(q)?;
        match self {
            LimitLaw::Normal { sigma } => Ok(sigma * std_normal_quantile(q)),
            LimitLaw::Laplace { a, b } => Ok(if q <= 0.5 {
                a + b * (2.0 * q).ln()
            } else {
                a - b * (2.0 * (1.0 - q)).ln()
            }),
            LimitLaw::ScaleMixture(m) => {
                let s = m.sigma * m.mixing_mean().sqrt().max(1e-3);
                let guess = s * std_normal_quantile(q);
                solve_monotone(|z| self.cdf(z), q, guess - s, guess + s, QUANTILE_TOL)
            }
        }
    }

    fn atoms(&self) -> Vec<f64> {
        match self {
            LimitLaw::ScaleMixture(m) if m.has_atom_at_zero() => vec![0.0],
            _ => Vec::new(),
        }
    }
}

/// `sigma * sqrt(U) * zeta` with `U ~ Exp(1)`, evaluated by direct quadrature
/// over `u` rather than through the Laplace closed form.
pub fn exp_mixture_cdf_by_quadrature(sigma: f64, z: f64) -> Result<f64> {
    check_sigma(sigma)?;
    let f = |u: f64| (-u).exp() * scaled_normal_cdf(z, sigma * u.sqrt(), false);
    Ok(integrate(f, 0.0, S_MAX * S_MAX, MIX_QUAD_TOL)?.value)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream_from_seed;
    use std::sync::Arc;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    fn exp_mix(sigma: f64) -> LimitLaw {
        LimitLaw::mixture(sigma, ScaledIndexLimit::ExponentialRateOne).unwrap()
    }

    #[test]
    fn cdf_examples() {
        let l1 = LimitLaw::laplace(0.0, 1.0).unwrap();
        assert_eq!(l1.cdf(0.0).unwrap(), 0.5);
        let b = std::f64::consts::FRAC_1_SQRT_2;
        let want = 1.0 - 0.5 * (-std::f64::consts::SQRT_2).exp();
        let l = LimitLaw::laplace(0.0, b).unwrap();
        assert!(close(l.cdf(1.0).unwrap(), want, 1e-15));
        assert!(close(exp_mix(1.0).cdf(1.0).unwrap(), want, 1e-8));
        assert!(close(want, 0.878441, 1e-6));
    }

    #[test]
    fn mixture_matches_laplace_on_grid() {
        for sigma in [0.5, 1.0, 2.0] {
            let mix = exp_mix(sigma);
            let lap = LimitLaw::laplace(0.0, sigma / std::f64::consts::SQRT_2).unwrap();
            let worst = (0..2001)
                .map(|i| -10.0 + 0.01 * i as f64)
                .map(|z| (mix.cdf(z).unwrap() - lap.cdf(z).unwrap()).abs())
                .fold(0.0, f64::max);
            assert!(worst < 1e-8, "sigma={sigma}: {worst:e}");
        }
    }

    #[test]
    fn mixture_quadrature_in_u_agrees() {
        for z in [-3.0, -0.2, 0.7, 4.0] {
            let a = exp_mix(1.3).cdf(z).unwrap();
            let b = exp_mixture_cdf_by_quadrature(1.3, z).unwrap();
            assert!(close(a, b, 1e-9), "z={z}: {a} vs {b}");
        }
    }

    #[test]
    fn custom_mixing_by_parts_matches_exponential() {
        let custom = LimitLaw::mixture(
            1.0,
            ScaledIndexLimit::Custom(Arc::new(|u: f64| -(-u).exp_m1())),
        )
        .unwrap();
        let lap = LimitLaw::laplace(0.0, std::f64::consts::FRAC_1_SQRT_2).unwrap();
        for z in [-4.0, -1.0, -0.1, 0.0, 0.3, 2.5] {
            let got = custom.cdf(z).unwrap();
            assert!(close(got, lap.cdf(z).unwrap(), 1e-9), "z={z}: {got}");
        }
        assert!(custom.lower_integral(0.0).is_err());
    }

    #[test]
    fn point_mass_mixture_is_normal() {
        let m = LimitLaw::mixture(1.7, ScaledIndexLimit::PointMassOne).unwrap();
        let n = LimitLaw::normal(1.7).unwrap();
        for z in [-5.0, -1.0, 0.0, 0.5, 3.0] {
            assert_eq!(m.cdf(z).unwrap(), n.cdf(z).unwrap());
            assert!(close(
                m.lower_integral(z).unwrap(),
                n.lower_integral(z).unwrap(),
                1e-15
            ));
        }
    }

    #[test]
    fn discrete_mixture_has_atom_at_zero() {
        let p = IndexModel::poisson(2.0).unwrap();
        let m = LimitLaw::mixture_over_index(1.0, &p, 1e-14).unwrap();
        let p0 = (-2.0f64).exp();
        assert!(close(
            m.cdf(0.0).unwrap() - m.cdf_left(0.0).unwrap(),
            p0,
            1e-14
        ));
        assert_eq!(m.atoms(), vec![0.0]);
        assert!(close(m.variance(), 1.0, 1e-12));
        // by symmetry, half the continuous mass lies below zero
        assert!(close(m.cdf_left(0.0).unwrap(), 0.5 * (1.0 - p0), 1e-14));
    }

    #[test]
    fn quantile_examples() {
        assert_eq!(
            LimitLaw::laplace(0.0, 1.0).unwrap().quantile(0.5).unwrap(),
            0.0
        );
        let q = LimitLaw::normal(2.0).unwrap().quantile(0.975).unwrap();
        assert!(close(q, 3.919927969080108, 1e-12));
        assert!(LimitLaw::normal(1.0).unwrap().quantile(1.0).is_err());
        assert!(LimitLaw::normal(1.0).unwrap().quantile(0.0).is_err());
    }

    #[test]
    fn quantile_inverts_cdf_for_every_law() {
        let laws = vec![
            LimitLaw::normal(0.7).unwrap(),
            LimitLaw::laplace(0.3, 1.5).unwrap(),
            exp_mix(1.0),
            LimitLaw::mixture_over_index(1.0, &IndexModel::geometric(0.3).unwrap(), 1e-13).unwrap(),
        ];
        for law in &laws {
            for i in 1..40 {
                let q = i as f64 / 40.0;
                let x = law.quantile(q).unwrap();
                assert!(close(law.cdf(x).unwrap(), q, 1e-9), "{} q={q}", law.label());
            }
        }
    }

    #[test]
    fn cdfs_are_monotone_and_densities_nonnegative() {
        let laws = vec![
            LimitLaw::normal(1.0).unwrap(),
            LimitLaw::laplace(-1.0, 0.5).unwrap(),
            exp_mix(2.0),
            LimitLaw::mixture_over_index(1.0, &IndexModel::binomial(16, 0.5).unwrap(), 1e-13)
                .unwrap(),
        ];
        for law in &laws {
            let mut prev = 0.0;
            for i in 0..=400 {
                let z = -8.0 + 0.04 * i as f64;
                let f = law.cdf(z).unwrap();
                assert!(f >= prev - 1e-13, "{} at {z}", law.label());
                assert!(law.pdf(z).unwrap() >= 0.0);
                prev = f;
            }
        }
    }

    #[test]
    fn exp_mixture_density_is_laplace_density() {
        let mix = exp_mix(1.0);
        let lap = LimitLaw::laplace(0.0, std::f64::consts::FRAC_1_SQRT_2).unwrap();
        for z in [-3.0, -0.5, 0.0, 0.25, 2.0] {
            assert!(
                close(mix.pdf(z).unwrap(), lap.pdf(z).unwrap(), 1e-9),
                "z={z}"
            );
        }
        let total = integrate(|z| lap.pdf(z).unwrap(), -40.0, 40.0, 1e-13)
            .unwrap()
            .value;
        assert!(close(total, 1.0, 1e-12));
    }

    #[test]
    fn integrated_cdfs_match_quadrature() {
        let laws = vec![
            LimitLaw::normal(1.2).unwrap(),
            LimitLaw::laplace(0.5, 0.8).unwrap(),
            exp_mix(1.0),
            LimitLaw::mixture_over_index(1.0, &IndexModel::poisson(3.0).unwrap(), 1e-14).unwrap(),
        ];
        for law in &laws {
            for x in [-2.0, 0.0, 0.4, 1.5] {
                let lo = integrate(|t| law.cdf(t).unwrap(), -60.0, x, 1e-11)
                    .unwrap()
                    .value;
                let hi = integrate(|t| 1.0 - law.cdf(t).unwrap(), x, 60.0, 1e-11)
                    .unwrap()
                    .value;
                assert!(
                    close(law.lower_integral(x).unwrap(), lo, 1e-9),
                    "{} L({x})",
                    law.label()
                );
                assert!(
                    close(law.upper_integral(x).unwrap(), hi, 1e-9),
                    "{} U({x})",
                    law.label()
                );
            }
        }
    }

    #[test]
    fn samplers_match_their_laws() {
        let mut rng = stream_from_seed(1);
        let b = 0.8;
        let xs = LimitLaw::laplace(0.0, b)
            .unwrap()
            .sample(&mut rng, 1_000_000)
            .unwrap();
        let var = xs.iter().map(|x| x * x).sum::<f64>() / xs.len() as f64;
        assert!((var / (2.0 * b * b) - 1.0).abs() < 0.02, "var {var}");

        let n = 200_000;
        let dkw = ((2.0f64 / 0.01).ln() / (2.0 * n as f64)).sqrt();
        let check = |law: &LimitLaw, target: &LimitLaw, rng: &mut crate::rng::Stream| {
            let mut xs = law.sample(rng, n).unwrap();
            xs.sort_by(f64::total_cmp);
            let d = xs
                .iter()
                .enumerate()
                .map(|(i, &x)| {
                    let f = target.cdf(x).unwrap();
                    (f - i as f64 / n as f64)
                        .abs()
                        .max((f - (i + 1) as f64 / n as f64).abs())
                })
                .fold(0.0, f64::max);
            assert!(d < dkw, "{}: {d} vs {dkw}", law.label());
        };
        let pm = LimitLaw::mixture(1.0, ScaledIndexLimit::PointMassOne).unwrap();
        check(&pm, &LimitLaw::normal(1.0).unwrap(), &mut rng);
        let lap = LimitLaw::laplace(0.0, std::f64::consts::FRAC_1_SQRT_2).unwrap();
        check(&exp_mix(1.0), &lap, &mut rng);
    }

    #[test]
    fn sampling_is_deterministic() {
        let law =
            LimitLaw::mixture_over_index(1.0, &IndexModel::poisson(4.0).unwrap(), 1e-12).unwrap();
        let a = law.sample(&mut stream_from_seed(9), 50).unwrap();
        let b = law.sample(&mut stream_from_seed(9), 50).unwrap();
        assert_eq!(a, b);
    }
}
