use std::f64::consts::PI;

use rayon::prelude::*;

use crate::error::{invalid, Error, Result};
use crate::field_grid::{pairwise_sum, PointMeasure};
use crate::heat_flow::radial_heat;
use crate::quad::{composite_rule, gauss_legendre, unit_ball_volume};
use crate::weights_atoms::ParametricWeight;

/// Terminal weight `G` of the functional; `Flat` is `G ≡ 1`.
#[derive(Clone, Debug)]
pub enum Terminal {
    Flat,
    Weight(ParametricWeight),
}

/// `G` reduced to a radial decay profile about a center.
#[derive(Clone, Debug)]
struct Profile {
    center: Option<Vec<f64>>,
    theta: f64,
    base_time: f64,
}

fn profile(g: &Terminal, d: usize) -> Result<Profile> {
    match g {
        Terminal::Flat => Ok(Profile {
            center: None,
            theta: 0.0,
            base_time: 0.0,
        }),
        Terminal::Weight(w) => {
            if w.d() != d {
                return invalid("terminal weight and measure dimensions differ");
            }
            radial(w)
        }
    }
}

fn radial(w: &ParametricWeight) -> Result<Profile> {
    match w {
        ParametricWeight::PolyDecay { theta, center } => {
            Ok(Profile { center: Some(center.clone()), theta: *theta, base_time: 0.0 })
        }
        ParametricWeight::Rho { d, .. } => Ok(Profile { center: Some(vec![0.0; *d]), theta: w.theta(), base_time: 0.0 }),
        ParametricWeight::Heated { base, t } => {
            let mut p = radial(base)?;
            p.base_time += t;
            Ok(p)
        }
        ParametricWeight::LatticeNormalized(_) => {
            invalid("Q_p supports the flat weight and radial weights (polynomial decay, ρ, and their heat extensions)")
        }
    }
}

impl Profile {
    /// `v(r) = Heat[G](r, s)` along the radial direction.
    fn value(&self, d: usize, s: f64, r: f64) -> f64 {
        if self.center.is_none() {
            return 1.0;
        }
        let time = self.base_time + s;
        if time == 0.0 {
            (1.0 + r).powf(-self.theta)
        } else {
            radial_heat(self.theta, d, time, r)
        }
    }
}

/// Log-domain Gaussian sums of an atomic measure at one point.
#[derive(Clone, Copy, Debug)]
pub(crate) struct LocalSums {
    /// `ln Σ m_i e^{−|x−y_i|²/4t}`.
    pub log_mass: f64,
    /// Variance of `y` under the normalized `μ_{x,t}`.
    pub variance: f64,
}

pub(crate) fn local_sums(mu: &PointMeasure, t: f64, x: &[f64], logs: &mut Vec<f64>) -> LocalSums {
    let d = mu.d();
    logs.clear();
    let mut top = f64::NEG_INFINITY;
    for i in 0..mu.len() {
        let r2: f64 = mu
            .position(i)
            .iter()
            .zip(x)
            .map(|(a, b)| (a - b) * (a - b))
            .sum();
        let l = mu.mass(i).ln() - r2 / (4.0 * t);
        top = top.max(l);
        logs.push(l);
    }
    if top == f64::NEG_INFINITY {
        return LocalSums {
            log_mass: top,
            variance: 0.0,
        };
    }
    let mut s = 0.0;
    let mut mean = [0.0; 3];
    for (i, l) in logs.iter_mut().enumerate() {
        *l = (*l - top).exp();
        s += *l;
        for a in 0..d {
            mean[a] += *l * mu.position(i)[a];
        }
    }
    for m in mean.iter_mut() {
        *m /= s;
    }
    let mut var = 0.0;
    for (i, l) in logs.iter().enumerate() {
        let r2: f64 = (0..d).map(|a| (mu.position(i)[a] - mean[a]).powi(2)).sum();
        var += l * r2;
    }
    LocalSums {
        log_mass: top + s.ln(),
        variance: var / s,
    }
}

/// Polar quadrature about the weight center, shared across nearby times.
///
/// The radial rule resolves the Gaussian width `√(2t/p)` of `u^p` and the heating width of `v`
/// near the center; angles use the trapezoid rule (spectrally accurate for periodic integrands).
#[derive(Clone, Debug)]
pub struct QpQuadrature {
    d: usize,
    p: f64,
    profile: Profile,
    /// Radial nodes and weights (including `r^{d−1}`).
    radial: Vec<(f64, f64)>,
    /// Unit directions and their weights on the sphere.
    dirs: Vec<(Vec<f64>, f64)>,
    center: Vec<f64>,
    /// `r_max` and the atom spread `D` used in the tail bound.
    r_max: f64,
    spread: f64,
    total_mass: f64,
}

impl QpQuadrature {
    /// Rule valid for every `t ∈ [t_lo, t_hi]`.
    pub fn new(mu: &PointMeasure, g: &Terminal, p: f64, t_lo: f64, t_hi: f64) -> Result<Self> {
        let d = mu.d();
        if !(1..=3).contains(&d) {
            return invalid("Q_p is implemented for d = 1, 2, 3");
        }
        if !(p > 1.0) {
            return invalid(format!("p must exceed 1, got {p}"));
        }
        if !(t_lo > 0.0 && t_lo <= t_hi && t_hi <= 1.0) {
            return invalid(format!("times must lie in (0, 1], got [{t_lo}, {t_hi}]"));
        }
        if mu.is_empty() {
            return invalid("empty measure");
        }
        let profile = profile(g, d)?;
        let center = profile.center.clone().unwrap_or_else(|| mu.centroid());
        let spread = (0..mu.len())
            .map(|i| {
                mu.position(i)
                    .iter()
                    .zip(&center)
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum::<f64>()
                    .sqrt()
            })
            .fold(0.0, f64::max);
        let sigma = (2.0 * t_lo / p).sqrt();
        let reach = (160.0 * t_hi / p).sqrt();
        let r_max = spread + reach;
        // graded panels near the center resolve the heating width of v
        let s_min = profile.base_time + (1.0 - t_hi) / p;
        let mut breaks = vec![0.0];
        if profile.center.is_some() && s_min < sigma * sigma {
            let fine = ((2.0 * s_min).sqrt() / 2.0).max(sigma * 1e-3);
            let edge = (12.0 * s_min.sqrt()).max(fine).min(r_max);
            let n = (edge / fine).ceil() as usize;
            for i in 1..=n {
                breaks.push(edge * i as f64 / n as f64);
            }
        }
        let start = *breaks.last().unwrap();
        let n = ((r_max - start) / sigma).ceil().max(1.0) as usize;
        for i in 1..=n {
            breaks.push(start + (r_max - start) * i as f64 / n as f64);
        }
        let mut radial = Vec::new();
        for w in breaks.windows(2) {
            for (r, wt) in composite_rule(w[0], w[1], 1, 10) {
                radial.push((r, wt * r.powi(d as i32 - 1)));
            }
        }
        let arc = sigma / 1.5;
        let dirs = match d {
            1 => vec![(vec![1.0], 1.0), (vec![-1.0], 1.0)],
            2 => {
                let m = ((2.0 * PI * r_max / arc).ceil() as usize).max(16);
                (0..m)
                    .map(|i| {
                        let phi = 2.0 * PI * i as f64 / m as f64;
                        (vec![phi.cos(), phi.sin()], 2.0 * PI / m as f64)
                    })
                    .collect()
            }
            _ => {
                let m = ((2.0 * PI * r_max / arc).ceil() as usize).max(16);
                let (zs, ws) = gauss_legendre(m / 2 + 1);
                let mut out = Vec::new();
                for (z, wz) in zs.iter().zip(&ws) {
                    let rho = (1.0 - z * z).sqrt();
                    for i in 0..m {
                        let phi = 2.0 * PI * i as f64 / m as f64;
                        out.push((
                            vec![rho * phi.cos(), rho * phi.sin(), *z],
                            wz * 2.0 * PI / m as f64,
                        ));
                    }
                }
                out
            }
        };
        Ok(Self {
            d,
            p,
            profile,
            radial,
            dirs,
            center,
            r_max,
            spread,
            total_mass: mu.total_mass(),
        })
    }

    pub fn node_count(&self) -> usize {
        self.radial.len() * self.dirs.len()
    }

    /// `(Q_p(t), ∫ 𝔻(Y_x) M(x)^p v dx)` with `M = Σ m_i e^{−|x−y_i|²/4t}`.
    pub fn eval(&self, mu: &PointMeasure, t: f64) -> Result<(f64, f64)> {
        let d = self.d;
        let p = self.p;
        let s = (1.0 - t) / p;
        let v: Vec<f64> = self
            .radial
            .iter()
            .map(|(r, _)| self.profile.value(d, s, *r))
            .collect();
        let rows: Vec<(f64, f64)> = self
            .radial
            .par_iter()
            .zip(&v)
            .map(|((r, wr), vr)| {
                let mut logs = Vec::with_capacity(mu.len());
                let mut x = vec![0.0; d];
                let mut qs = Vec::with_capacity(self.dirs.len());
                let mut vs = Vec::with_capacity(self.dirs.len());
                for (e, we) in &self.dirs {
                    for a in 0..d {
                        x[a] = self.center[a] + r * e[a];
                    }
                    let ls = local_sums(mu, t, &x, &mut logs);
                    let mp = (p * ls.log_mass).exp();
                    qs.push(we * mp);
                    vs.push(we * mp * ls.variance);
                }
                (wr * vr * pairwise_sum(&qs), wr * vr * pairwise_sum(&vs))
            })
            .collect();
        let q_terms: Vec<f64> = rows.iter().map(|r| r.0).collect();
        let v_terms: Vec<f64> = rows.iter().map(|r| r.1).collect();
        let mass_p = pairwise_sum(&q_terms);
        // u^p = (4πt)^{−dp/2} M^p
        let q = t.powf(d as f64 * (p - 1.0) / 2.0)
            * (4.0 * PI * t).powf(-(d as f64) * p / 2.0)
            * mass_p;
        let tail = self.tail_bound(t, s);
        if tail > 1e-12 * q && q > 0.0 {
            return Err(Error::Tail { tail, value: q });
        }
        Ok((q, pairwise_sum(&v_terms)))
    }

    /// Bound on `∫_{|x−c| > r_max} u^p v`, using `v ≤ v(r_max)` beyond the truncation radius.
    fn tail_bound(&self, t: f64, s: f64) -> f64 {
        let d = self.d;
        let p = self.p;
        let a = p / (4.0 * t);
        let w = self.r_max - self.spread;
        let dd = self.spread;
        let i0 = 1.0 / (2.0 * a * w);
        let i1 = 1.0 / (2.0 * a);
        let i2 = w / (2.0 * a) + 1.0 / (4.0 * a * a * w);
        let poly = match d {
            1 => i0,
            2 => dd * i0 + i1,
            _ => dd * dd * i0 + 2.0 * dd * i1 + i2,
        };
        let sphere = d as f64 * unit_ball_volume(d);
        let vmax = self.profile.value(d, s, self.r_max);
        t.powf(d as f64 * (p - 1.0) / 2.0)
            * (4.0 * PI * t).powf(-(d as f64) * p / 2.0)
            * self.total_mass.powf(p)
            * sphere
            * vmax
            * (-a * w * w).exp()
            * poly
    }
}

/// `Q_p[μ, G](t) = t^{d(p−1)/2} ∫ Heat[μ](x,t)^p Heat[G](x, (1−t)/p) dx`.
pub fn qp(mu: &PointMeasure, g: &Terminal, p: f64, t: f64) -> Result<f64> {
    Ok(QpQuadrature::new(mu, g, p, t, t)?.eval(mu, t)?.0)
}

fn rhs_prefactor(d: usize, p: f64, t: f64) -> f64 {
    (p - 1.0) / 4.0 * (4.0 * PI).powf(-(d as f64) * p / 2.0) * t.powf(-(d as f64) / 2.0 - 2.0)
}

/// Variance side of the derivative identity, with a collapse flag when all mass underflows.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BctRhs {
    pub value: f64,
    pub collapsed: bool,
}

/// `(p−1)/4 (4π)^{−dp/2} t^{−d/2−2} ∫ 𝔻(Y_x) μ_{x,t}(ℝ^d)^p v(x,t) dx`.
pub fn bct_rhs(mu: &PointMeasure, g: &Terminal, p: f64, t: f64) -> Result<BctRhs> {
    if !(t > 0.0 && t < 1.0) {
        return invalid(format!("t must lie in (0, 1), got {t}"));
    }
    let quad = QpQuadrature::new(mu, g, p, t, t)?;
    let (q, var) = quad.eval(mu, t)?;
    Ok(BctRhs {
        value: rhs_prefactor(mu.d(), p, t) * var,
        collapsed: q == 0.0,
    })
}

/// Finite-difference check of the derivative identity.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BctCheck {
    pub t: f64,
    pub qp: f64,
    pub fd: f64,
    pub rhs: f64,
    pub defect: f64,
}

/// `|(Q(t+h) − Q(t−h))/2h − rhs| / max(rhs, 1e−6·Q(t))`, on one shared quadrature.
///
/// A central difference at `h/2` is computed as well; when the two disagree by more than
/// `5e−4` of the normalizer the step is reported as too large.
pub fn bct_identity_defect(
    mu: &PointMeasure,
    g: &Terminal,
    p: f64,
    t: f64,
    h: f64,
) -> Result<BctCheck> {
    if !(h > 0.0 && t - h > 0.0 && t + h < 1.0) {
        return invalid(format!("need 0 < t − h < t + h < 1, got t = {t}, h = {h}"));
    }
    let quad = QpQuadrature::new(mu, g, p, t - h, t + h)?;
    let q = |s: f64| quad.eval(mu, s).map(|v| v.0);
    let (q0, var) = quad.eval(mu, t)?;
    let rhs = rhs_prefactor(mu.d(), p, t) * var;
    let fd = (q(t + h)? - q(t - h)?) / (2.0 * h);
    let fd_half = (q(t + h / 2.0)? - q(t - h / 2.0)?) / h;
    let norm = rhs.max(1e-6 * q0);
    if norm > 0.0 && (fd - fd_half).abs() > 5e-4 * norm {
        return Err(Error::Step((fd - fd_half).abs() / norm));
    }
    let defect = if norm > 0.0 {
        (fd - rhs).abs() / norm
    } else {
        0.0
    };
    Ok(BctCheck {
        t,
        qp: q0,
        fd,
        rhs,
        defect,
    })
}

/// `Q_p` along a time grid with the monotonicity verdict.
#[derive(Clone, Debug, PartialEq)]
pub struct Scan {
    pub t: Vec<f64>,
    pub q: Vec<f64>,
    /// `‖Heat[μ](t)‖_{L_p(v_t)}` and `t^{−d(p−1)/2p} ‖Heat[μ](1)‖_{L_p(G)}` per time.
    pub karamata: Vec<(f64, f64)>,
    pub nondecreasing: bool,
    pub karamata_holds: bool,
}

impl Scan {
    pub fn pass(&self) -> bool {
        self.nondecreasing && self.karamata_holds
    }
}

pub const SCAN_SLACK: f64 = 1e-8;

pub fn monotonicity_scan(mu: &PointMeasure, g: &Terminal, p: f64, t_grid: &[f64]) -> Result<Scan> {
    if t_grid.is_empty() || t_grid.windows(2).any(|w| !(w[0] < w[1])) {
        return invalid("time grid must be nonempty and increasing");
    }
    let d = mu.d() as f64;
    let q: Vec<f64> = t_grid
        .iter()
        .map(|&t| qp(mu, g, p, t))
        .collect::<Result<_>>()?;
    let q1 = qp(mu, g, p, 1.0)?;
    let norm1 = q1.powf(1.0 / p);
    let karamata: Vec<(f64, f64)> = t_grid
        .iter()
        .zip(&q)
        .map(|(&t, &qt)| {
            let lhs = (qt / t.powf(d * (p - 1.0) / 2.0)).powf(1.0 / p);
            (lhs, t.powf(-d * (p - 1.0) / (2.0 * p)) * norm1)
        })
        .collect();
    let nondecreasing = q.windows(2).all(|w| w[1] >= w[0] * (1.0 - SCAN_SLACK));
    let karamata_holds = karamata.iter().all(|(l, r)| *l <= *r * (1.0 + SCAN_SLACK));
    Ok(Scan {
        t: t_grid.to_vec(),
        q,
        karamata,
        nondecreasing,
        karamata_holds,
    })
}
