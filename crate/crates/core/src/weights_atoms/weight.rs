use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::{Arc, Mutex, OnceLock};

use crate::error::{invalid, Result};
use crate::field_grid::pairwise_sum;
use crate::heat_flow::{heated_value, heated_weight_bounds};
use crate::quad::{composite_rule, Chebyshev};
use crate::spectral::sphere_samples;

/// Relative size of the neglected lattice tail.
pub const LATTICE_TAIL: f64 = 1e-12;

#[inline]
pub(crate) fn decay(r: f64, theta: f64, int_theta: Option<i32>) -> f64 {
    match int_theta {
        Some(k) => (1.0 + r).powi(-k),
        None => (1.0 + r).powf(-theta),
    }
}

fn as_int(theta: f64) -> Option<i32> {
    (theta.fract() == 0.0 && theta.abs() < 64.0).then_some(theta as i32)
}

/// The lattice sum `S(y) = Σ_j (1+|y−j|)^{−θ}` and the normalized weight `w = (1+|y|)^{−θ}/S`.
///
/// `S` is `ℤ^d`-periodic. Offsets within two cells are summed exactly; the smooth remainder out
/// to the truncation radius, plus an integral for the tail beyond it, is tabulated once per `(θ, d)`
/// by Chebyshev interpolation on the cell.
#[derive(Debug)]
pub struct LatticeWeight {
    d: usize,
    theta: f64,
    int_theta: Option<i32>,
    radius: i64,
    tail_bound: f64,
    far: Chebyshev,
    s_min: f64,
    s_max: f64,
}

const NEAR_LO: i64 = -2;
const NEAR_HI: i64 = 3;

impl LatticeWeight {
    /// Shared instance for `(θ, d)`; construction is expensive so instances are cached.
    pub fn shared(theta: f64, d: usize) -> Result<Arc<Self>> {
        static CACHE: OnceLock<Mutex<HashMap<(u64, usize), Arc<LatticeWeight>>>> = OnceLock::new();
        let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
        if let Some(w) = cache.lock().unwrap().get(&(theta.to_bits(), d)) {
            return Ok(w.clone());
        }
        let w = Arc::new(Self::build(theta, d)?);
        cache
            .lock()
            .unwrap()
            .insert((theta.to_bits(), d), w.clone());
        Ok(w)
    }

    fn build(theta: f64, d: usize) -> Result<Self> {
        if !(1..=2).contains(&d) {
            return invalid("the lattice-normalized weight is implemented for d = 1 and d = 2");
        }
        if !(theta > d as f64) {
            return invalid(format!(
                "decay exponent {theta} must exceed the dimension {d}"
            ));
        }
        let df = d as f64;
        // Offsets with |m|_∞ > R are replaced by the integral of (1+|y−u|)^{−θ} over |u|_∞ > R + 1/2,
        // the midpoint rule cell by cell. Its error is at most (d/24)·θ(θ+3)(1+r)^{−θ−2} per cell,
        // and Σ_{|m|_∞ > R} (1+|y−m|)^{−s} ≤ 2d·3^{d−1}·(R−2)^{d−s}/(s−d) bounds the sum.
        let head = (1.0 + df.sqrt() / 2.0).powf(-theta);
        let order = theta + 2.0;
        let pref =
            df * theta * (theta + 3.0) / 24.0 * 2.0 * df * 3f64.powi(d as i32 - 1) / (order - df);
        let wanted = ((pref / (LATTICE_TAIL * head)).powf(1.0 / (order - df))).ceil() as i64 + 2;
        let cap = if d == 1 { 1 << 16 } else { 256 };
        let radius = wanted.clamp(4, cap);
        let tail_bound = pref * ((radius - 2) as f64).powf(df - order) / head;
        let int_theta = as_int(theta);
        let far_sum = |y: &[f64]| -> f64 {
            let mut total = 0.0;
            if d == 1 {
                for m in -radius..=radius {
                    if (NEAR_LO..=NEAR_HI).contains(&m) {
                        continue;
                    }
                    total += decay((y[0] - m as f64).abs(), theta, int_theta);
                }
            } else {
                for m0 in -radius..=radius {
                    let near0 = (NEAR_LO..=NEAR_HI).contains(&m0);
                    let dy0 = y[0] - m0 as f64;
                    let mut row = 0.0;
                    for m1 in -radius..=radius {
                        if near0 && (NEAR_LO..=NEAR_HI).contains(&m1) {
                            continue;
                        }
                        let dy1 = y[1] - m1 as f64;
                        row += decay((dy0 * dy0 + dy1 * dy1).sqrt(), theta, int_theta);
                    }
                    total += row;
                }
            }
            total + lattice_tail(d, theta, radius, y)
        };
        let degree = if d == 1 { 24 } else { 16 };
        let far = Chebyshev::fit(d, degree, far_sum);
        let mut me = Self {
            d,
            theta,
            int_theta,
            radius,
            tail_bound,
            far,
            s_min: 0.0,
            s_max: 0.0,
        };
        // certified range of S over the cell: probes plus |∇ log S| ≤ θ
        let probes: usize = if d == 1 { 256 } else { 48 };
        let step = 1.0 / probes as f64;
        let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
        let count = (probes + 1).pow(d as u32);
        for code in 0..count {
            let y = [
                (code % (probes + 1)) as f64 * step,
                (code / (probes + 1)) as f64 * step,
            ];
            let s = me.cell_sum(&y[..d]);
            lo = lo.min(s);
            hi = hi.max(s);
        }
        let slack = (theta * step * df.sqrt() / 2.0).exp();
        me.s_min = lo / slack;
        me.s_max = hi * slack;
        Ok(me)
    }

    pub fn d(&self) -> usize {
        self.d
    }
    pub fn theta(&self) -> f64 {
        self.theta
    }
    /// Lattice truncation radius (sup-norm).
    pub fn radius(&self) -> i64 {
        self.radius
    }
    /// Integral stand-in for the offsets beyond the radius, at cell position `f ∈ [0,1)^d`.
    pub fn tail(&self, f: &[f64]) -> f64 {
        lattice_tail(self.d, self.theta, self.radius, f)
    }
    /// Bound on the relative error of the tail integral against the true tail.
    pub fn tail_bound(&self) -> f64 {
        self.tail_bound
    }

    #[inline]
    pub fn numerator(&self, y: &[f64]) -> f64 {
        let r2: f64 = y.iter().map(|v| v * v).sum();
        decay(r2.sqrt(), self.theta, self.int_theta)
    }

    fn cell_sum(&self, f: &[f64]) -> f64 {
        let mut near = 0.0;
        if self.d == 1 {
            for m in NEAR_LO..=NEAR_HI {
                near += decay((f[0] - m as f64).abs(), self.theta, self.int_theta);
            }
        } else {
            for m0 in NEAR_LO..=NEAR_HI {
                let a = f[0] - m0 as f64;
                for m1 in NEAR_LO..=NEAR_HI {
                    let b = f[1] - m1 as f64;
                    near += decay((a * a + b * b).sqrt(), self.theta, self.int_theta);
                }
            }
        }
        near + self.far.eval(f)
    }

    /// `S(y)`, using periodicity.
    pub fn lattice_sum(&self, y: &[f64]) -> f64 {
        let mut f = [0.0; 2];
        for a in 0..self.d {
            f[a] = y[a] - y[a].floor();
        }
        self.cell_sum(&f[..self.d])
    }

    pub fn eval(&self, y: &[f64]) -> f64 {
        self.numerator(y) / self.lattice_sum(y)
    }

    /// Certified `(c_w, C_w)` with `c_w (1+|x|)^{−θ} ≤ w(x) ≤ C_w (1+|x|)^{−θ}`.
    pub fn bounds(&self) -> (f64, f64) {
        (1.0 / self.s_max, 1.0 / self.s_min)
    }

    /// `Σ_j w(y − j)` over the truncated lattice; equals one up to rounding.
    pub fn partition_sum(&self, y: &[f64]) -> f64 {
        let s = self.lattice_sum(y);
        let r = self.radius;
        let base: Vec<i64> = y.iter().map(|v| v.floor() as i64).collect();
        let frac: Vec<f64> = y.iter().zip(&base).map(|(v, b)| v - *b as f64).collect();
        let mut acc = self.tail(&frac);
        if self.d == 1 {
            for m in -r..=r {
                acc += self.numerator(&[y[0] - (base[0] + m) as f64]);
            }
        } else {
            for m0 in -r..=r {
                let a = y[0] - (base[0] + m0) as f64;
                let mut row = 0.0;
                for m1 in -r..=r {
                    row += self.numerator(&[a, y[1] - (base[1] + m1) as f64]);
                }
                acc += row;
            }
        }
        acc / s
    }
}

/// `∫_{|u|_∞ > R+1/2} (1+|f−u|)^{−θ} du`; in d = 2 by polar quadrature about `f`.
fn lattice_tail(d: usize, theta: f64, radius: i64, f: &[f64]) -> f64 {
    let edge = radius as f64 + 0.5;
    if d == 1 {
        let side = |a: f64| (1.0 + a).powf(1.0 - theta) / (theta - 1.0);
        return side(edge - f[0]) + side(edge + f[0]);
    }
    // ∫_a^∞ (1+r)^{−θ} r dr
    let radial = |a: f64| {
        (1.0 + a).powf(2.0 - theta) / (theta - 2.0) - (1.0 + a).powf(1.0 - theta) / (theta - 1.0)
    };
    let exit = |phi: f64| -> f64 {
        let (s, c) = phi.sin_cos();
        let mut best = f64::INFINITY;
        for (dir, pos) in [(c, f[0]), (s, f[1])] {
            if dir > 0.0 {
                best = best.min((edge - pos) / dir);
            } else if dir < 0.0 {
                best = best.min((-edge - pos) / dir);
            }
        }
        best
    };
    let corners = [
        (edge - f[1]).atan2(edge - f[0]),
        (edge - f[1]).atan2(-edge - f[0]),
        (-edge - f[1]).atan2(-edge - f[0]) + 2.0 * PI,
        (-edge - f[1]).atan2(edge - f[0]) + 2.0 * PI,
    ];
    let mut terms = Vec::new();
    for i in 0..4 {
        let (lo, hi) = (
            corners[i],
            if i == 3 {
                corners[0] + 2.0 * PI
            } else {
                corners[i + 1]
            },
        );
        for (phi, w) in composite_rule(lo, hi, 8, 16) {
            terms.push(w * radial(exit(phi)));
        }
    }
    pairwise_sum(&terms)
}

/// Analytic weight forms.
#[derive(Clone, Debug)]
pub enum ParametricWeight {
    /// `(1+|x−c|)^{−θ}`.
    PolyDecay { theta: f64, center: Vec<f64> },
    /// `w(x) = (1+|x|)^{−θ} / Σ_j (1+|x−j|)^{−θ}`.
    LatticeNormalized(Arc<LatticeWeight>),
    /// `Heat[base](·, t)`.
    Heated { base: Box<ParametricWeight>, t: f64 },
    /// `(1+|x|)^{−θ_G−2d}`.
    Rho { theta_g: f64, d: usize },
}

impl ParametricWeight {
    pub fn poly(theta: f64, center: Vec<f64>) -> Result<Self> {
        if !(theta > center.len() as f64) {
            return invalid(format!(
                "decay exponent {theta} must exceed the dimension {}",
                center.len()
            ));
        }
        Ok(Self::PolyDecay { theta, center })
    }

    pub fn lattice(theta: f64, d: usize) -> Result<Self> {
        Ok(Self::LatticeNormalized(LatticeWeight::shared(theta, d)?))
    }

    pub fn heated(base: ParametricWeight, t: f64) -> Result<Self> {
        if !(t > 0.0) {
            return invalid("heating time must be positive");
        }
        Ok(Self::Heated {
            base: Box::new(base),
            t,
        })
    }

    pub fn rho(theta_g: f64, d: usize) -> Result<Self> {
        if !(theta_g > d as f64) {
            return invalid(format!("θ_G = {theta_g} must exceed the dimension {d}"));
        }
        Ok(Self::Rho { theta_g, d })
    }

    pub fn d(&self) -> usize {
        match self {
            Self::PolyDecay { center, .. } => center.len(),
            Self::LatticeNormalized(w) => w.d(),
            Self::Heated { base, .. } => base.d(),
            Self::Rho { d, .. } => *d,
        }
    }

    /// Polynomial decay rate `θ_G` of the two-sided envelope.
    pub fn theta(&self) -> f64 {
        match self {
            Self::PolyDecay { theta, .. } => *theta,
            Self::LatticeNormalized(w) => w.theta(),
            Self::Heated { base, .. } => base.theta(),
            Self::Rho { theta_g, d } => theta_g + 2.0 * *d as f64,
        }
    }

    /// Center of radial forms; `None` for the lattice weight.
    pub fn radial_center(&self) -> Option<Vec<f64>> {
        match self {
            Self::PolyDecay { center, .. } => Some(center.clone()),
            Self::Rho { d, .. } => Some(vec![0.0; *d]),
            Self::Heated { base, .. } => base.radial_center(),
            Self::LatticeNormalized(_) => None,
        }
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        match self {
            Self::PolyDecay { theta, center } => {
                let r2: f64 = x.iter().zip(center).map(|(a, b)| (a - b) * (a - b)).sum();
                (1.0 + r2.sqrt()).powf(-theta)
            }
            Self::LatticeNormalized(w) => w.eval(x),
            Self::Heated { base, t } => heated_value(base, *t, x),
            Self::Rho { .. } => {
                let r2: f64 = x.iter().map(|a| a * a).sum();
                (1.0 + r2.sqrt()).powf(-self.theta())
            }
        }
    }

    /// Certified `(c, C)` with `c (1+|x|)^{−θ} ≤ wgt(x) ≤ C (1+|x|)^{−θ}`.
    pub fn bounds(&self) -> (f64, f64) {
        match self {
            Self::PolyDecay { theta, center } => {
                let c: f64 = center.iter().map(|v| v * v).sum::<f64>().sqrt();
                let s = (1.0 + c).powf(*theta);
                (1.0 / s, s)
            }
            Self::LatticeNormalized(w) => w.bounds(),
            Self::Heated { base, t } => heated_weight_bounds(base, *t),
            Self::Rho { .. } => (1.0, 1.0),
        }
    }

    /// `s[w](ζ)` as a certified interval.
    pub fn smoothness(&self, zeta: f64) -> Smoothness {
        self.smoothness_with(zeta, &Probes::default_for(self.d()))
    }

    pub fn smoothness_with(&self, zeta: f64, probes: &Probes) -> Smoothness {
        if zeta == 0.0 {
            return Smoothness {
                lower: 1.0,
                upper: 1.0,
            };
        }
        match self {
            Self::PolyDecay { theta, .. } => exact((1.0 + zeta).powf(*theta)),
            Self::Rho { .. } => exact((1.0 + zeta).powf(self.theta())),
            Self::LatticeNormalized(w) => {
                let (c, cc) = w.bounds();
                Smoothness {
                    lower: probes.sup_ratio(self, zeta),
                    upper: cc / c * (1.0 + zeta).powf(w.theta()),
                }
            }
            Self::Heated { base, .. } => {
                let upper = base.smoothness_with(zeta, probes).upper;
                Smoothness {
                    lower: probes.sup_ratio(self, zeta).min(upper),
                    upper,
                }
            }
        }
    }
}

fn exact(v: f64) -> Smoothness {
    Smoothness { lower: v, upper: v }
}

/// Two-sided estimate of a smoothness function value.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Smoothness {
    pub lower: f64,
    pub upper: f64,
}

/// Deterministic probe pairs `(x, x + ζe)` for sampled smoothness estimates.
#[derive(Clone, Debug)]
pub struct Probes {
    pub points: Vec<Vec<f64>>,
    pub directions: Vec<Vec<f64>>,
}

impl Probes {
    pub fn default_for(d: usize) -> Self {
        let (radius, spacing) = match d {
            1 => (8.0, 0.25),
            2 => (6.0, 1.0),
            _ => (4.0, 2.0),
        };
        Self::lattice(d, radius, spacing, 8)
    }

    /// Probe points on a lattice inside the ball of the given radius.
    pub fn lattice(d: usize, radius: f64, spacing: f64, directions: usize) -> Self {
        let per = (radius / spacing).floor() as i64;
        let span = 2 * per + 1;
        let mut points = Vec::new();
        for code in 0..span.pow(d as u32) {
            let mut rest = code;
            let mut p = vec![0.0; d];
            for slot in p.iter_mut() {
                *slot = ((rest % span) - per) as f64 * spacing;
                rest /= span;
            }
            if p.iter().map(|v| v * v).sum::<f64>() <= radius * radius {
                points.push(p);
            }
        }
        let directions = sphere_samples(d, directions.max(2 * d));
        Self { points, directions }
    }

    /// Largest sampled `w(x)/w(y)` over probe pairs at distance `ζ`.
    pub fn sup_ratio(&self, w: &ParametricWeight, zeta: f64) -> f64 {
        let mut best = 1.0f64;
        for x in &self.points {
            let wx = w.eval(x);
            for e in &self.directions {
                let y: Vec<f64> = x.iter().zip(e).map(|(a, b)| a + zeta * b).collect();
                let wy = w.eval(&y);
                best = best.max(wx / wy).max(wy / wx);
            }
        }
        best
    }
}
