//! Standard normal helpers built on the complementary error function.

use libm::erfc;
use std::f64::consts::FRAC_1_SQRT_2;

/// `1/sqrt(2*pi)`
pub const INV_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

/// `sqrt(2/pi)`, the mean absolute value of a standard normal.
pub const SQRT_2_OVER_PI: f64 = 0.797_884_560_802_865_4;

/// Absolute error budget assumed for [`std_normal_cdf`].
pub const NORMAL_CDF_ABS_ERR: f64 = 1e-12;

pub fn std_normal_pdf(x: f64) -> f64 {
    INV_SQRT_2PI * (-0.5 * x * x).exp()
}

/// Φ(x), evaluated through erfc so that both tails keep relative accuracy.
pub fn std_normal_cdf(x: f64) -> f64 {
    if x.is_nan() {
        return f64::NAN;
    }
    if x == f64::INFINITY {
        return 1.0;
    }
    if x == f64::NEG_INFINITY {
        return 0.0;
    }
    0.5 * erfc(-x * FRAC_1_SQRT_2)
}

/// Φ⁻¹(q) for q in (0,1): Acklam's rational approximation followed by two
/// Halley steps against [`std_normal_cdf`].
pub fn std_normal_quantile(q: f64) -> f64 {
    if q.is_nan() {
        return f64::NAN;
    }
    if q <= 0.0 {
        return f64::NEG_INFINITY;
    }
    if q >= 1.0 {
        return f64::INFINITY;
    }
    const A: [f64; 6] = [
        -3.969_683_028_665_376e1,
        2.209_460_984_245_205e2,
        -2.759_285_104_469_687e2,
        1.383_577_518_672_69e2,
        -3.066_479_806_614_716e1,
        2.506_628_277_459_239,
    ];
    const B: [f64; 5] = [
        -5.447_609_879_822_406e1,
        1.615_858_368_580_409e2,
        -1.556_989_798_598_866e2,
        6.680_131_188_771_972e1,
        -1.328_068_155_288_572e1,
    ];
    const C: [f64; 6] = [
        -7.784_894_002_430_293e-3,
        -3.223_964_580_411_365e-1,
        -2.400_758_277_161_838,
        -2.549_732_539_343_734,
        4.374_664_141_464_968,
        2.938_163_982_698_783,
    ];
    const D: [f64; 4] = [
        7.784_695_709_041_462e-3,
        3.224_671_290_700_398e-1,
        2.445_134_137_142_996,
        3.754_408_661_907_416,
    ];
    const P_LOW: f64 = 0.024_25;
    let tail = |r: f64| {
        let t = (-2.0 * r.ln()).sqrt();
        (((((C[0] * t + C[1]) * t + C[2]) * t + C[3]) * t + C[4]) * t + C[5])
            / ((((D[0] * t + D[1]) * t + D[2]) * t + D[3]) * t + 1.0)
    };
    let mut x = if q < P_LOW {
        tail(q)
    } else if q <= 1.0 - P_LOW {
        let u = q - 0.5;
        let r = u * u;
        (((((A[0] * r + A[1]) * r + A[2]) * r + A[3]) * r + A[4]) * r + A[5]) * u
            / (((((B[0] * r + B[1]) * r + B[2]) * r + B[3]) * r + B[4]) * r + 1.0)
    } else {
        -tail(1.0 - q)
    };
    for _ in 0..2 {
        // work in the tail nearest to x so the residual keeps relative accuracy
        let e = if x < 0.0 {
            std_normal_cdf(x) - q
        } else {
            (1.0 - q) - std_normal_cdf(-x)
        };
        let pdf = std_normal_pdf(x);
        if pdf == 0.0 || e == 0.0 {
            break;
        }
        let u = e / pdf;
        x -= u / (1.0 + 0.5 * x * u);
    }
    x
}

/// ∫_{-∞}^{x} Φ(t) dt = x Φ(x) + φ(x).
pub fn std_normal_integrated_cdf(x: f64) -> f64 {
    if x == f64::NEG_INFINITY {
        return 0.0;
    }
    if x < -38.0 {
        return 0.0;
    }
    (x * std_normal_cdf(x) + std_normal_pdf(x)).max(0.0)
}
