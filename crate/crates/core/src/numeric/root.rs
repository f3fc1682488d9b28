use crate::error::{Error, Result};

/// Solves `f(x) = target` for a nondecreasing `f`, expanding an initial
/// bracket `[lo, hi]` outward until it straddles the target, then bisecting
/// until `|f(x) - target| <= ftol` or the bracket collapses.
pub fn solve_monotone<F>(f: F, target: f64, mut lo: f64, mut hi: f64, ftol: f64) -> Result<f64>
where
    F: Fn(f64) -> Result<f64>,
{
    let mut f_lo = f(lo)?;
    let mut expand = 0;
    while f_lo > target {
        let w = (hi - lo).max(1.0);
        hi = lo;
        lo -= 2.0 * w;
        f_lo = f(lo)?;
        expand += 1;
        if expand > 200 {
            return Err(Error::Bracketing(target));
        }
    }
    let mut f_hi = f(hi)?;
    while f_hi < target {
        let w = (hi - lo).max(1.0);
        lo = hi;
        f_lo = f_hi;
        hi += 2.0 * w;
        f_hi = f(hi)?;
        expand += 1;
        if expand > 400 {
            return Err(Error::Bracketing(target));
        }
    }
    let _ = f_lo;
    for _ in 0..400 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            return Ok(mid);
        }
        let fm = f(mid)?;
        if (fm - target).abs() <= ftol {
            return Ok(mid);
        }
        if fm < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}
