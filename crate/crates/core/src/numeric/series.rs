use serde::{Deserialize, Serialize};

/// A computed value together with an analytic bound on the error committed
/// by truncating or discretizing the computation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Certified {
    pub value: f64,
    pub error: f64,
}

impl Certified {
    pub fn exact(value: f64) -> Self {
        Self { value, error: 0.0 }
    }

    pub fn new(value: f64, error: f64) -> Self {
        Self { value, error }
    }

    pub fn lower(&self) -> f64 {
        self.value - self.error
    }

    pub fn upper(&self) -> f64 {
        self.value + self.error
    }

    pub fn contains(&self, x: f64) -> bool {
        self.lower() <= x && x <= self.upper()
    }

    pub fn scale(self, c: f64) -> Self {
        Self {
            value: self.value * c,
            error: self.error * c.abs(),
        }
    }

    pub fn plus(self, other: Certified) -> Self {
        Self {
            value: self.value + other.value,
            error: self.error + other.error,
        }
    }
}

/// Neumaier-compensated running sum; the series below add up tens of
/// thousands of small terms.
#[derive(Debug, Default, Clone, Copy)]
pub struct KahanSum {
    sum: f64,
    comp: f64,
}

impl KahanSum {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn total(&self) -> f64 {
        self.sum + self.comp
    }
}

impl std::iter::FromIterator<f64> for KahanSum {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut s = KahanSum::new();
        for x in iter {
            s.add(x);
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kahan_recovers_small_terms() {
        let mut s = KahanSum::new();
        s.add(1.0);
        for _ in 0..1_000_000 {
            s.add(1e-16);
        }
        assert!((s.total() - (1.0 + 1e-10)).abs() < 1e-15);
    }

    #[test]
    fn certified_arithmetic() {
        let a = Certified::new(1.0, 0.1);
        let b = Certified::new(2.0, 0.2).scale(-2.0);
        let c = a.plus(b);
        assert_eq!(c.value, -3.0);
        assert!((c.error - 0.5).abs() < 1e-15);
        assert!(c.contains(-3.4) && !c.contains(-3.6));
    }
}
