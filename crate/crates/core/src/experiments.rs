//! Configuration, bound-vs-estimate verification runs, parameter sweeps and
//! report emission.

use std::fmt::Write as _;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bounds::{
    combined_limit_bound, geometric_laplace_bound, normal_limit_bound, w_vs_z_bound, BoundValue,
    CombinedMode, Constants, GeometricMode, Metric, NormalMode,
};
use crate::distances::{
    empirical_dk, empirical_w1, exact_dk_lattice, exact_w1_discrete, numeric_w1_between_cdfs,
    random_sum_exact_pmf, DistanceEstimate,
};
use crate::error::{Error, Result};
use crate::index::{exact_dk_scaled_index, IndexModel, IndexSampler, ScaledIndexLimit};
use crate::limits::LimitLaw;
use crate::rng::SeedTree;
use crate::summands::{
    AggregateCursor, PartialSumSampler, Schedule, SummandDist, SummandModel, DEFAULT_LATTICE_CAP,
};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

fn default_series_tol() -> f64 {
    crate::index::DEFAULT_SERIES_TOL
}

fn default_tail_tol() -> f64 {
    1e-10
}

fn default_delta() -> f64 {
    0.01
}

fn default_seeds() -> usize {
    1
}

fn default_cap() -> usize {
    DEFAULT_LATTICE_CAP
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TargetSpec {
    /// Laplace for a geometric index, normal otherwise.
    #[default]
    Auto,
    Normal {
        sigma: f64,
    },
    Laplace {
        a: f64,
        b: f64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundMode {
    /// Iid forms for iid summands, non-iid forms otherwise.
    #[default]
    Auto,
    Iid,
    IidSharp,
    Noniid,
    NoniidAlt,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MethodSpec {
    /// Bound only, no estimate.
    #[default]
    None,
    Empirical {
        n_samples: usize,
        #[serde(default = "default_seeds")]
        n_seeds: usize,
        master_seed: u64,
        #[serde(default = "default_delta")]
        delta: f64,
    },
    /// Exact law of `W` by convolution (lattice summands).
    Exact {
        #[serde(default = "default_tail_tol")]
        tail_tol: f64,
        #[serde(default = "default_cap")]
        cap: usize,
    },
    /// Law of the Gaussian analogue `Z` against the normal limit, by
    /// numerical CDF integration (Wasserstein only).
    Numeric {
        #[serde(default = "default_tail_tol")]
        tail_tol: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    /// Dotted path of the swept configuration key, e.g. `index.p`.
    pub param: String,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    #[default]
    Csv,
    Json,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutputSpec {
    #[serde(default)]
    pub format: Format,
    /// Standard output when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub path: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub index: IndexModel,
    pub summands: SummandModel,
    pub metric: Metric,
    #[serde(default)]
    pub target: TargetSpec,
    #[serde(default)]
    pub mode: BoundMode,
    #[serde(default)]
    pub constants: Constants,
    #[serde(default = "default_series_tol")]
    pub series_tol: f64,
    #[serde(default)]
    pub method: MethodSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<OutputSpec>,
}

/// A parsed but not yet typed configuration tree, so that overrides and
/// sweep points can be applied by dotted key.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigTree(toml::Table);

fn parse_scalar(text: &str) -> toml::Value {
    let wrapped = format!("v = {text}");
    match wrapped.parse::<toml::Table>() {
        Ok(mut t) => t
            .remove("v")
            .unwrap_or_else(|| toml::Value::String(text.to_string())),
        Err(_) => toml::Value::String(text.to_string()),
    }
}

impl ConfigTree {
    pub fn parse(text: &str) -> Result<Self> {
        text.parse::<toml::Table>()
            .map(ConfigTree)
            .map_err(|e| Error::Config(e.to_string()))
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn set(&mut self, key: &str, value: toml::Value) -> Result<()> {
        let parts: Vec<&str> = key.split('.').collect();
        if parts.iter().any(|p| p.is_empty()) {
            return Err(Error::Config(format!("malformed key `{key}`")));
        }
        let mut table = &mut self.0;
        for part in &parts[..parts.len() - 1] {
            let entry = table
                .entry(part.to_string())
                .or_insert_with(|| toml::Value::Table(toml::Table::new()));
            table = entry
                .as_table_mut()
                .ok_or_else(|| Error::Config(format!("`{part}` in `{key}` is not a table")))?;
        }
        table.insert(parts[parts.len() - 1].to_string(), value);
        Ok(())
    }

    /// Applies `key=value`; the value is read as a TOML literal when
    /// possible and as a bare string otherwise.
    pub fn apply_override(&mut self, assignment: &str) -> Result<()> {
        let (key, value) = assignment
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("override `{assignment}` is not key=value")))?;
        self.set(key.trim(), parse_scalar(value.trim()))
    }

    pub fn remove(&mut self, key: &str) {
        self.0.remove(key);
    }

    pub fn get(&self, key: &str) -> Option<&toml::Value> {
        self.0.get(key)
    }

    pub fn build(&self) -> Result<ExperimentConfig> {
        let cfg: ExperimentConfig = toml::Value::Table(self.0.clone())
            .try_into()
            .map_err(|e: toml::de::Error| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        ConfigTree::parse(text)?.build()
    }

    pub fn validate(&self) -> Result<()> {
        let cfg_err = |e: Error| Error::Config(e.to_string());
        self.index.validate().map_err(cfg_err)?;
        self.summands.validate().map_err(cfg_err)?;
        self.constants.validate().map_err(cfg_err)?;
        if !(self.series_tol > 0.0) {
            return Err(Error::Config("series_tol must be positive".into()));
        }
        match self.method {
            MethodSpec::Empirical {
                n_samples,
                n_seeds,
                delta,
                ..
            } => {
                if n_samples == 0 || n_seeds == 0 {
                    return Err(Error::Config(
                        "n_samples and n_seeds must be positive".into(),
                    ));
                }
                if !(delta > 0.0 && delta < 1.0) {
                    return Err(Error::Config("delta must lie in (0, 1)".into()));
                }
                if self.metric == Metric::Wasserstein && n_seeds < 2 {
                    return Err(Error::Config(
                        "Wasserstein Monte Carlo bands need n_seeds >= 2".into(),
                    ));
                }
            }
            MethodSpec::Exact { tail_tol, .. } | MethodSpec::Numeric { tail_tol } => {
                if !(tail_tol > 0.0) {
                    return Err(Error::Config("tail_tol must be positive".into()));
                }
            }
            MethodSpec::None => {}
        }
        if let MethodSpec::Numeric { .. } = self.method {
            if self.metric != Metric::Wasserstein {
                return Err(Error::Config(
                    "the numeric method computes Wasserstein distances only".into(),
                ));
            }
        }
        if let Some(s) = &self.sweep {
            if s.values.len() < 4 {
                return Err(Error::Config("a sweep needs at least 4 grid points".into()));
            }
            let up = s.values.windows(2).all(|w| w[0] < w[1]);
            let down = s.values.windows(2).all(|w| w[0] > w[1]);
            if !(up || down) {
                return Err(Error::Config(
                    "sweep values must be strictly monotone".into(),
                ));
            }
        }
        Ok(())
    }

    pub fn master_seed(&self) -> Option<u64> {
        match self.method {
            MethodSpec::Empirical { master_seed, .. } => Some(master_seed),
            _ => None,
        }
    }

    pub fn set_master_seed(&mut self, seed: u64) {
        if let MethodSpec::Empirical { master_seed, .. } = &mut self.method {
            *master_seed = seed;
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum TargetKind {
    Normal,
    Laplace,
}

fn target_kind(cfg: &ExperimentConfig) -> TargetKind {
    match cfg.target {
        TargetSpec::Normal { .. } => TargetKind::Normal,
        TargetSpec::Laplace { .. } => TargetKind::Laplace,
        TargetSpec::Auto => match cfg.index {
            IndexModel::Geometric { .. } => TargetKind::Laplace,
            _ => TargetKind::Normal,
        },
    }
}

fn check_explicit_target(spec: &TargetSpec, law: &LimitLaw) -> Result<()> {
    let near = |a: f64, b: f64| (a - b).abs() <= 1e-12 * a.abs().max(b.abs()).max(1.0);
    let ok = match (spec, law) {
        (TargetSpec::Auto, _) => true,
        (TargetSpec::Normal { sigma }, LimitLaw::Normal { sigma: s }) => near(*sigma, *s),
        (TargetSpec::Laplace { a, b }, LimitLaw::Laplace { a: x, b: y }) => {
            near(*a, *x) && near(*b, *y)
        }
        _ => false,
    };
    if ok {
        Ok(())
    } else {
        Err(Error::Config(format!(
            "the bound holds for the target {}; the configured target differs",
            law.label()
        )))
    }
}

fn sigma_hat(summands: &SummandModel) -> Result<f64> {
    Ok(summands
        .sigma_hat_sq_limit()
        .ok_or(Error::MissingVarianceLimit)?
        .sqrt())
}

/// Bound on `d(W, target)` for the configured route, and that target.
pub fn theorem_bound(cfg: &ExperimentConfig) -> Result<(BoundValue, LimitLaw)> {
    let tol = cfg.series_tol;
    let c = &cfg.constants;
    let s = &cfg.summands;
    let kind = target_kind(cfg);
    let (bound, target) = match (cfg.metric, kind, &cfg.index) {
        (Metric::Kolmogorov, TargetKind::Laplace, IndexModel::Geometric { p }) => {
            let mode = match cfg.mode {
                BoundMode::Auto if s.is_iid() => GeometricMode::Iid,
                BoundMode::Auto => GeometricMode::Noniid,
                BoundMode::Iid => GeometricMode::Iid,
                BoundMode::IidSharp => GeometricMode::IidSharp,
                BoundMode::Noniid => GeometricMode::Noniid,
                BoundMode::NoniidAlt => GeometricMode::NoniidAlt,
            };
            geometric_laplace_bound(*p, s, mode, c, tol)?
        }
        (Metric::Wasserstein, TargetKind::Normal, IndexModel::Poisson { .. })
        | (Metric::Wasserstein, TargetKind::Normal, IndexModel::Binomial { .. }) => {
            let mode = match cfg.mode {
                BoundMode::Auto if s.is_iid() => NormalMode::Iid,
                BoundMode::Auto | BoundMode::Noniid => NormalMode::Noniid,
                BoundMode::Iid => NormalMode::Iid,
                other => {
                    return Err(Error::Config(format!(
                        "mode {other:?} does not apply to normal-limit bounds"
                    )))
                }
            };
            normal_limit_bound(&cfg.index, s, mode, c, tol)?
        }
        (Metric::Kolmogorov, kind, index) => {
            require_auto_mode(cfg)?;
            let sh = sigma_hat(s)?;
            let (limit, target, tag) = match kind {
                TargetKind::Normal => (
                    ScaledIndexLimit::PointMassOne,
                    LimitLaw::normal(sh)?,
                    "general_kolmogorov_normal",
                ),
                TargetKind::Laplace => (
                    ScaledIndexLimit::ExponentialRateOne,
                    LimitLaw::laplace(0.0, sh / std::f64::consts::SQRT_2)?,
                    "general_kolmogorov_laplace",
                ),
            };
            let dk = exact_dk_scaled_index(index, &limit, tol)?;
            let be = w_vs_z_bound(index, s, Metric::Kolmogorov, c, tol)?;
            let rest =
                combined_limit_bound(index, s, CombinedMode::MixtureDk, Some(dk.upper()), tol)?;
            (be.plus(&rest, tag), target)
        }
        (Metric::Wasserstein, TargetKind::Normal, index) => {
            require_auto_mode(cfg)?;
            let be = w_vs_z_bound(index, s, Metric::Wasserstein, c, tol)?;
            let rest = combined_limit_bound(index, s, CombinedMode::NormalW1, None, tol)?;
            (
                be.plus(&rest, "general_wasserstein_normal"),
                LimitLaw::normal(sigma_hat(s)?)?,
            )
        }
        (Metric::Wasserstein, TargetKind::Laplace, _) => {
            return Err(Error::Config(
                "no Wasserstein bound is available against a Laplace target".into(),
            ))
        }
    };
    check_explicit_target(&cfg.target, &target)?;
    Ok((bound, target))
}

fn require_auto_mode(cfg: &ExperimentConfig) -> Result<()> {
    if cfg.mode == BoundMode::Auto {
        Ok(())
    } else {
        Err(Error::Config(format!(
            "mode {:?} is not available for this index/metric/target combination",
            cfg.mode
        )))
    }
}

/// Law of the Gaussian analogue `Z`: given `N = n` it is centered normal with
/// variance `n sigma_hat_n^2 / mu`.
pub fn gaussian_analogue_law(
    index: &IndexModel,
    summands: &SummandModel,
    tail_tol: f64,
) -> Result<LimitLaw> {
    let mu = index.mean()?;
    let k = index.truncation_point(|k| index.tail_mass(k), tail_tol)?;
    let mut cur = AggregateCursor::new(summands);
    let mut atoms = Vec::new();
    for n in index.support_start()..=k {
        let u = if n == 0 {
            0.0
        } else {
            let mut a = cur.current();
            while a.n < n {
                a = cur.advance();
            }
            n as f64 * a.sigma_hat_n_sq / mu
        };
        let w = index.pmf(n);
        if w > 0.0 {
            atoms.push((u, w));
        }
    }
    LimitLaw::discrete_mixture(1.0, atoms, index.tail_mass(k))
}

/// Draws `count` independent copies of `W`.
pub fn sample_w(
    index: &IndexModel,
    summands: &SummandModel,
    count: usize,
    rng: &mut crate::rng::Stream,
) -> Result<Vec<f64>> {
    let mu = index.mean()?;
    let scale = 1.0 / mu.sqrt();
    let ns = IndexSampler::new(index)?;
    let sums = PartialSumSampler::new(summands);
    Ok((0..count)
        .map(|_| {
            let n = ns.draw(rng);
            sums.draw(n, rng) * scale
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Pass,
    Fail,
    Inconclusive,
    /// No estimate was requested.
    BoundOnly,
}

impl Verdict {
    pub fn as_str(self) -> &'static str {
        match self {
            Verdict::Pass => "pass",
            Verdict::Fail => "fail",
            Verdict::Inconclusive => "inconclusive",
            Verdict::BoundOnly => "bound_only",
        }
    }

    /// Pass iff the bound clears the estimate plus its band; fail only when
    /// the estimate minus its band exceeds the certified bound.
    pub fn decide(bound: &BoundValue, estimate: &DistanceEstimate) -> (f64, Verdict) {
        let margin = bound.value - estimate.value - estimate.band;
        let verdict = if margin >= 0.0 {
            Verdict::Pass
        } else if estimate.value - estimate.band > bound.certified() {
            Verdict::Fail
        } else {
            Verdict::Inconclusive
        };
        (margin, verdict)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub param: Option<f64>,
    pub bound: BoundValue,
    pub target: String,
    pub estimate: Option<DistanceEstimate>,
    pub margin: Option<f64>,
    pub verdict: Verdict,
    pub seed: Option<u64>,
    /// Per-replicate Monte Carlo estimates.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub replicates: Vec<f64>,
}

fn estimate(
    cfg: &ExperimentConfig,
    target: &LimitLaw,
    row: u64,
) -> Result<Option<(DistanceEstimate, Vec<f64>)>> {
    match cfg.method {
        MethodSpec::None => Ok(None),
        MethodSpec::Exact { tail_tol, cap } => {
            let w = random_sum_exact_pmf(&cfg.index, &cfg.summands, tail_tol, cap)?;
            let est = match cfg.metric {
                Metric::Kolmogorov => exact_dk_lattice(&w.law, target)?,
                Metric::Wasserstein => {
                    let mut e = exact_w1_discrete(&w.normalized()?, target)?;
                    e.band += w.w1_tail;
                    e
                }
            };
            Ok(Some((est, Vec::new())))
        }
        MethodSpec::Numeric { tail_tol } => {
            let z = gaussian_analogue_law(&cfg.index, &cfg.summands, tail_tol)?;
            let est = numeric_w1_between_cdfs(&z, target, tail_tol)?;
            Ok(Some((est, Vec::new())))
        }
        MethodSpec::Empirical {
            n_samples,
            n_seeds,
            master_seed,
            delta,
        } => {
            let tree = SeedTree::new(master_seed);
            let runs: Vec<(Vec<f64>, DistanceEstimate)> = (0..n_seeds as u64)
                .into_par_iter()
                .map(|r| {
                    let mut rng = tree.stream(&[row, r]);
                    let mut xs = sample_w(&cfg.index, &cfg.summands, n_samples, &mut rng)?;
                    xs.sort_by(f64::total_cmp);
                    let e = match cfg.metric {
                        Metric::Kolmogorov => empirical_dk(&xs, target, delta)?,
                        Metric::Wasserstein => empirical_w1(&xs, target)?,
                    };
                    Ok((xs, e))
                })
                .collect::<Result<_>>()?;
            let replicates: Vec<f64> = runs.iter().map(|r| r.1.value).collect();
            let mut est = match cfg.metric {
                Metric::Kolmogorov => {
                    let mut pooled: Vec<f64> = runs.into_iter().flat_map(|r| r.0).collect();
                    pooled.sort_by(f64::total_cmp);
                    empirical_dk(&pooled, target, delta)?
                }
                Metric::Wasserstein => {
                    let k = replicates.len() as f64;
                    let mean = replicates.iter().sum::<f64>() / k;
                    let var =
                        replicates.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (k - 1.0);
                    let numeric = runs.iter().map(|r| r.1.band).fold(0.0, f64::max);
                    let mut e = runs[0].1.clone();
                    e.value = mean;
                    e.band = 3.0 * (var / k).sqrt() + numeric;
                    e.n_samples = Some((n_samples * n_seeds) as u64);
                    e
                }
            };
            est.seed = Some(master_seed);
            Ok(Some((est, replicates)))
        }
    }
}

/// Computes the configured bound and the matching distance estimate.
/// `row` selects the random substream, so rows of a sweep are independent.
pub fn run_verify_row(
    cfg: &ExperimentConfig,
    row: u64,
    param: Option<f64>,
) -> Result<VerificationReport> {
    cfg.validate()?;
    let (bound, target) = match cfg.method {
        // the numeric method measures the Gaussian analogue, which has the
        // law of W only for Gaussian summands
        MethodSpec::Numeric { .. } if !all_gaussian(&cfg.summands) => {
            if target_kind(cfg) != TargetKind::Normal {
                return Err(Error::Config(
                    "the numeric method needs a normal target".into(),
                ));
            }
            let b = combined_limit_bound(
                &cfg.index,
                &cfg.summands,
                CombinedMode::NormalW1,
                None,
                cfg.series_tol,
            )?;
            let target = LimitLaw::normal(sigma_hat(&cfg.summands)?)?;
            check_explicit_target(&cfg.target, &target)?;
            (b, target)
        }
        _ => theorem_bound(cfg)?,
    };
    let (estimate, margin, verdict, replicates) = match estimate(cfg, &target, row)? {
        Some((e, reps)) => {
            let (m, v) = Verdict::decide(&bound, &e);
            (Some(e), Some(m), v, reps)
        }
        None => (None, None, Verdict::BoundOnly, Vec::new()),
    };
    Ok(VerificationReport {
        param,
        bound,
        target: target.label(),
        estimate,
        margin,
        verdict,
        seed: cfg.master_seed(),
        replicates,
    })
}

fn all_gaussian(summands: &SummandModel) -> bool {
    let g = |d: &SummandDist| matches!(d, SummandDist::Gaussian { .. });
    match summands {
        SummandModel::Iid { dist } => g(dist),
        SummandModel::Schedule {
            schedule: Schedule::ScaledBase { base, .. },
        } => g(base),
        SummandModel::Schedule {
            schedule: Schedule::Cycle { dists },
        } => dists.iter().all(g),
    }
}

pub fn run_verify(cfg: &ExperimentConfig) -> Result<VerificationReport> {
    run_verify_row(cfg, 0, None)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SlopeFit {
    pub slope: f64,
    pub intercept: f64,
    /// Root of the sum of squared residuals on the log-log scale.
    pub residual: f64,
}

/// Ordinary least squares of `ln y` on `ln x`.
pub fn fit_loglog_slope(points: &[(f64, f64)]) -> Result<SlopeFit> {
    if points.len() < 2 {
        return Err(Error::Empty("need at least two points"));
    }
    if points.iter().any(|&(x, y)| !(x > 0.0 && y > 0.0)) {
        return Err(Error::InvalidParameter {
            name: "points",
            reason: "coordinates must be positive".into(),
        });
    }
    let logs: Vec<(f64, f64)> = points.iter().map(|&(x, y)| (x.ln(), y.ln())).collect();
    let n = logs.len() as f64;
    let mx = logs.iter().map(|p| p.0).sum::<f64>() / n;
    let my = logs.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = logs.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::InvalidParameter {
            name: "points",
            reason: "x values must be distinct".into(),
        });
    }
    let sxy: f64 = logs.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let residual = logs
        .iter()
        .map(|p| (p.1 - intercept - slope * p.0).powi(2))
        .sum::<f64>()
        .sqrt();
    Ok(SlopeFit {
        slope,
        intercept,
        residual,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Slopes {
    pub bound: Option<SlopeFit>,
    pub estimate: Option<SlopeFit>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub version: String,
    pub command: String,
    pub master_seed: Option<u64>,
    pub config: ExperimentConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunOutput {
    pub provenance: Provenance,
    pub rows: Vec<VerificationReport>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub slopes: Option<Slopes>,
    /// Set when a sweep stopped early; `rows` holds the points before it.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub aborted: Option<String>,
    #[serde(skip)]
    pub abort_cause: Option<Error>,
}

impl RunOutput {
    pub fn any_fail(&self) -> bool {
        self.rows.iter().any(|r| r.verdict == Verdict::Fail)
    }
}

fn provenance(cfg: &ExperimentConfig, command: &str) -> Provenance {
    Provenance {
        version: VERSION.to_string(),
        command: command.to_string(),
        master_seed: cfg.master_seed(),
        config: cfg.clone(),
    }
}

/// Single verification run packaged for reporting.
pub fn verify_output(cfg: &ExperimentConfig, command: &str) -> Result<RunOutput> {
    let row = run_verify(cfg)?;
    Ok(RunOutput {
        provenance: provenance(cfg, command),
        rows: vec![row],
        slopes: None,
        aborted: None,
        abort_cause: None,
    })
}

fn sweep_value(v: f64) -> toml::Value {
    if v.fract() == 0.0 && v.abs() < 9.0e15 {
        toml::Value::Integer(v as i64)
    } else {
        toml::Value::Float(v)
    }
}

/// One verification per grid point of the sweep, run concurrently, plus
/// log-log slopes of the bound and estimate columns. A failing grid point
/// stops the table there and is recorded in `aborted`.
pub fn run_sweep(tree: &ConfigTree, command: &str) -> Result<RunOutput> {
    let base = tree.build()?;
    let sweep = base
        .sweep
        .clone()
        .ok_or_else(|| Error::Config("no [sweep] section".into()))?;
    let results: Vec<Result<VerificationReport>> = sweep
        .values
        .par_iter()
        .enumerate()
        .map(|(i, &v)| {
            let mut t = tree.clone();
            t.set(&sweep.param, sweep_value(v))?;
            let cfg = t.build()?;
            run_verify_row(&cfg, i as u64, Some(v))
        })
        .collect();
    let mut rows = Vec::with_capacity(results.len());
    let mut aborted = None;
    let mut abort_cause = None;
    for (r, &v) in results.into_iter().zip(&sweep.values) {
        match r {
            Ok(row) => rows.push(row),
            Err(e) => {
                aborted = Some(format!("{} = {v}: {e}", sweep.param));
                abort_cause = Some(e);
                break;
            }
        }
    }
    let fit = |col: &dyn Fn(&VerificationReport) -> Option<f64>| -> Option<SlopeFit> {
        let pts: Option<Vec<(f64, f64)>> = rows.iter().map(|r| Some((r.param?, col(r)?))).collect();
        pts.filter(|p| p.len() >= 2)
            .and_then(|p| fit_loglog_slope(&p).ok())
    };
    let slopes = Slopes {
        bound: fit(&|r| Some(r.bound.value)),
        estimate: fit(&|r| r.estimate.as_ref().map(|e| e.value)),
    };
    Ok(RunOutput {
        provenance: provenance(&base, command),
        rows,
        slopes: Some(slopes),
        aborted,
        abort_cause,
    })
}

/// Fixed 17-significant-digit rendering.
pub fn fmt17(x: f64) -> String {
    format!("{x:.16e}")
}

pub const CSV_HEADER: &str =
    "param,metric,theorem_tag,bound,truncation_error,estimate,band,margin,verdict,seed";

pub fn render_csv(out: &RunOutput) -> String {
    let opt = |x: Option<f64>| x.map(fmt17).unwrap_or_default();
    let mut s = String::from(CSV_HEADER);
    s.push('\n');
    for r in &out.rows {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{},{},{},{}",
            opt(r.param),
            r.bound.metric.as_str(),
            r.bound.theorem_tag,
            fmt17(r.bound.value),
            fmt17(r.bound.truncation_error),
            opt(r.estimate.as_ref().map(|e| e.value)),
            opt(r.estimate.as_ref().map(|e| e.band)),
            opt(r.margin),
            r.verdict.as_str(),
            r.seed.map(|s| s.to_string()).unwrap_or_default(),
        );
    }
    if let Some(slopes) = &out.slopes {
        for (name, fit) in [("bound", slopes.bound), ("estimate", slopes.estimate)] {
            if let Some(f) = fit {
                let _ = writeln!(
                    s,
                    "# slope {name}: {} intercept {} residual {}",
                    fmt17(f.slope),
                    fmt17(f.intercept),
                    fmt17(f.residual)
                );
            }
        }
    }
    if let Some(msg) = &out.aborted {
        let _ = writeln!(s, ",,,,,,,,aborted,");
        let _ = writeln!(s, "# aborted: {}", msg.replace('\n', " "));
    }
    s
}

pub fn render_json(out: &RunOutput) -> Result<String> {
    serde_json::to_string_pretty(out)
        .map(|mut s| {
            s.push('\n');
            s
        })
        .map_err(|e| Error::Config(e.to_string()))
}

pub fn render(out: &RunOutput, format: Format) -> Result<String> {
    match format {
        Format::Csv => Ok(render_csv(out)),
        Format::Json => render_json(out),
    }
}

/// Writes the report; identical inputs give identical bytes.
pub fn emit_report(out: &RunOutput, format: Format, path: &Path) -> Result<()> {
    let text = render(out, format)?;
    std::fs::write(path, text).map_err(|e| Error::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    })
}
