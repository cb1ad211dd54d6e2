use crate::error::{invalid, Result};

/// Parameters of the atomic decomposition.
#[derive(Clone, Debug, PartialEq)]
pub struct ProofParameters {
    pub d: usize,
    pub a: u32,
    pub p: f64,
    pub alpha: f64,
    pub epsilon: f64,
    /// `θ1..θ5`.
    pub theta: [f64; 5],
    pub lambda: f64,
    /// Ladder depth.
    pub k: usize,
    pub ksat: f64,
    /// Lattice window margin in rescaled units; `None` picks it from `θ1`.
    pub window_radius: Option<f64>,
}

/// `min(2, (1 + (4/3)^{θ4/2}) / 2)`.
pub fn default_lambda(theta4: f64) -> f64 {
    (0.5 * (1.0 + (4.0f64 / 3.0).powf(theta4 / 2.0))).min(2.0)
}

impl ProofParameters {
    /// Default exponents `θ = (2d+4, 2d+3, 4d+9, d+2, d+1)` with `ε = 0.01`.
    pub fn new(d: usize, a: u32, p: f64, k: usize) -> Result<Self> {
        let df = d as f64;
        let theta = [
            2.0 * df + 4.0,
            2.0 * df + 3.0,
            4.0 * df + 9.0,
            df + 2.0,
            df + 1.0,
        ];
        let me = Self {
            d,
            a,
            p,
            alpha: df * (p - 1.0) / p,
            epsilon: 0.01,
            theta,
            lambda: default_lambda(theta[3]),
            k,
            ksat: 2.0,
            window_radius: None,
        };
        me.validate()?;
        Ok(me)
    }

    pub fn validate(&self) -> Result<()> {
        let [t1, t2, t3, t4, t5] = self.theta;
        let df = self.d as f64;
        if !(1..=3).contains(&self.d) {
            return invalid(format!("dimension {} is outside 1..3", self.d));
        }
        if self.a < 3 || self.a % 2 == 0 {
            return invalid(format!("A must be odd and at least 3, got {}", self.a));
        }
        if !(self.p > 1.0 && self.p <= 2.0) {
            return invalid(format!("p must lie in (1, 2], got {}", self.p));
        }
        if (self.alpha - df * (self.p - 1.0) / self.p).abs() > 1e-12 {
            return invalid("alpha must equal d(p-1)/p");
        }
        if !(self.epsilon > 0.0) {
            return invalid("epsilon must be positive");
        }
        let checks = [
            (t1 > t2, "theta1 > theta2"),
            (t3 >= self.p * t1, "theta3 >= p*theta1"),
            (t2 > t4 + df, "theta2 > theta4 + d"),
            (t4 > df, "theta4 > d"),
            (df < t5 && t5 < t4, "d < theta5 < theta4"),
        ];
        for (ok, what) in checks {
            if !ok {
                return invalid(format!("parameter constraint violated: {what}"));
            }
        }
        if !(self.lambda >= 1.0) {
            return invalid("lambda must be at least 1");
        }
        if self.k < 3 {
            return invalid("atoms need a ladder depth K of at least 3");
        }
        if let Some(r) = self.window_radius {
            if !(r > 0.0) {
                return invalid("window_radius must be positive");
            }
        }
        Ok(())
    }

    /// Window margin: `θ1`-decay drops below `1e-9` beyond it.
    pub fn window(&self) -> f64 {
        self.window_radius
            .unwrap_or_else(|| (1e-9f64).powf(-1.0 / self.theta[0]) - 1.0)
    }
}
