//! `|t|^p`, `|t|^{p-2} t` and the regularised second derivative, with fast paths for
//! the exponents used in experiments.

#[derive(Debug, Clone, Copy, PartialEq)]
enum Kind {
    Two,
    Three,
    OneHalf,
    FiveHalves,
    General,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct Power {
    p: f64,
    kind: Kind,
}

impl Power {
    pub fn new(p: f64) -> Self {
        let kind = if p == 2.0 {
            Kind::Two
        } else if p == 3.0 {
            Kind::Three
        } else if p == 1.5 {
            Kind::OneHalf
        } else if p == 2.5 {
            Kind::FiveHalves
        } else {
            Kind::General
        };
        Self { p, kind }
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    /// `|t|^p`
    #[inline]
    pub fn abs_pow(&self, t: f64) -> f64 {
        let a = t.abs();
        match self.kind {
            Kind::Two => a * a,
            Kind::Three => a * a * a,
            Kind::OneHalf => a * a.sqrt(),
            Kind::FiveHalves => a * a * a.sqrt(),
            Kind::General => {
                if a == 0.0 {
                    0.0
                } else {
                    a.powf(self.p)
                }
            }
        }
    }

    /// `|t|^{p-2} t`
    #[inline]
    pub fn phi(&self, t: f64) -> f64 {
        let a = t.abs();
        match self.kind {
            Kind::Two => t,
            Kind::Three => a * t,
            Kind::OneHalf => a.sqrt().copysign(t),
            Kind::FiveHalves => a.sqrt() * t,
            Kind::General => {
                if a == 0.0 {
                    0.0
                } else {
                    a.powf(self.p - 2.0) * t
                }
            }
        }
    }

    /// `(p-1) (t^2 + eps2)^{(p-2)/2}`: derivative of `phi`, regularised where it degenerates.
    #[inline]
    pub fn dphi(&self, t: f64, eps2: f64) -> f64 {
        match self.kind {
            Kind::Two => 1.0,
            Kind::Three => 2.0 * (t * t + eps2).sqrt(),
            Kind::OneHalf => 0.5 / (t * t + eps2).sqrt().sqrt(),
            Kind::FiveHalves => 1.5 * (t * t + eps2).sqrt().sqrt(),
            Kind::General => (self.p - 1.0) * (t * t + eps2).powf(0.5 * (self.p - 2.0)),
        }
    }
}

impl Power {
    /// Curvature used by the Newton model: the tangent `dphi` for `p >= 2`; for `p < 2`
    /// the secant `|t|^{p-2}`, whose quadratic model majorises `|t|^p / p` and stays
    /// sensible where the tangent blows up.
    #[inline]
    pub fn model_curvature(&self, t: f64, eps2: f64) -> f64 {
        if self.p >= 2.0 {
            self.dphi(t, eps2)
        } else {
            match self.kind {
                Kind::OneHalf => 1.0 / (t * t + eps2).sqrt().sqrt(),
                _ => (t * t + eps2).powf(0.5 * (self.p - 2.0)),
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fast_paths_match_powf() {
        for p in [2.0, 3.0, 1.5, 2.5, 1.8] {
            let pw = Power::new(p);
            for t in [-2.3, -0.1, 0.0, 1e-9, 0.7, 3.1] {
                let a: f64 = t;
                let e = a.abs().powf(p);
                assert!((pw.abs_pow(t) - e).abs() <= 1e-14 * e.max(1e-300));
                let ph = if t == 0.0 { 0.0 } else { a.abs().powf(p - 2.0) * t };
                assert!((pw.phi(t) - ph).abs() <= 1e-14 * ph.abs().max(1e-300), "p={p} t={t}");
                let eps2 = 1e-6;
                let d = (p - 1.0) * (t * t + eps2).powf(0.5 * (p - 2.0));
                assert!((pw.dphi(t, eps2) - d).abs() <= 1e-13 * d);
            }
        }
    }
}
