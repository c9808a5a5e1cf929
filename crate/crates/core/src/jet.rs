//! Truncated Taylor series c₀ + c₁e + … + c_K e^K with exact derivatives.

use std::ops::{Add, Mul, Neg, Sub};

#[derive(Debug, Clone, PartialEq)]
pub struct Jet(pub Vec<f64>);

impl Jet {
    pub fn constant(c: f64, order: usize) -> Self {
        let mut v = vec![0.0; order + 1];
        v[0] = c;
        Jet(v)
    }

    /// The identity variable expanded at x₀.
    pub fn variable(x0: f64, order: usize) -> Self {
        let mut v = vec![0.0; order + 1];
        v[0] = x0;
        if order > 0 {
            v[1] = 1.0;
        }
        Jet(v)
    }

    pub fn order(&self) -> usize {
        self.0.len() - 1
    }

    pub fn value(&self) -> f64 {
        self.0[0]
    }

    /// i-th derivative at the expansion point.
    pub fn derivative(&self, i: usize) -> f64 {
        let fact: f64 = (1..=i).map(|m| m as f64).product();
        self.0.get(i).copied().unwrap_or(0.0) * fact
    }

    pub fn scale(&self, s: f64) -> Self {
        Jet(self.0.iter().map(|c| c * s).collect())
    }

    pub fn recip(&self) -> Self {
        let k = self.0.len();
        let a = &self.0;
        let mut b = vec![0.0; k];
        b[0] = 1.0 / a[0];
        for i in 1..k {
            let s: f64 = (1..=i).map(|m| a[m] * b[i - m]).sum();
            b[i] = -s / a[0];
        }
        Jet(b)
    }

    pub fn exp(&self) -> Self {
        // h = e^a, h' = a'h ⇒ i h_i = Σ_{m=1}^{i} m a_m h_{i−m}
        let k = self.0.len();
        let a = &self.0;
        let mut h = vec![0.0; k];
        h[0] = a[0].exp();
        for i in 1..k {
            let s: f64 = (1..=i).map(|m| m as f64 * a[m] * h[i - m]).sum();
            h[i] = s / i as f64;
        }
        Jet(h)
    }

    pub fn powi(&self, n: u32) -> Self {
        let mut out = Jet::constant(1.0, self.order());
        for _ in 0..n {
            out = &out * self;
        }
        out
    }
}

impl Add for &Jet {
    type Output = Jet;
    fn add(self, o: &Jet) -> Jet {
        Jet(self.0.iter().zip(&o.0).map(|(a, b)| a + b).collect())
    }
}

impl Sub for &Jet {
    type Output = Jet;
    fn sub(self, o: &Jet) -> Jet {
        Jet(self.0.iter().zip(&o.0).map(|(a, b)| a - b).collect())
    }
}

impl Neg for &Jet {
    type Output = Jet;
    fn neg(self) -> Jet {
        self.scale(-1.0)
    }
}

impl Mul for &Jet {
    type Output = Jet;
    fn mul(self, o: &Jet) -> Jet {
        let k = self.0.len().min(o.0.len());
        let mut c = vec![0.0; k];
        for (i, ci) in c.iter_mut().enumerate() {
            *ci = (0..=i).map(|m| self.0[m] * o.0[i - m]).sum();
        }
        Jet(c)
    }
}
