//! Heat extensions of fields, point measures and weights, and the scale ladder `f_k`.
//!
//! Fields are heated spectrally with the multiplier `e^{-4π²t|ξ|²}`; this is exact for the
//! trigonometric interpolant on the torus. Point measures and weights are heated on `ℝ^d` by
//! direct Gaussian summation or quadrature.

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::path::Path;

use rayon::prelude::*;

use crate::error::{invalid, io_err, Error, Result};
use crate::field_grid::{pairwise_sum, Field, GridSpec, PointMeasure};
use crate::quad::{bessel_i0e, composite_rule, gamma_half, unit_ball_volume};
use crate::spectral::{apply_radial, dft};
use crate::weights_atoms::ParametricWeight;

/// Gaussian heat kernel `(4πt)^{-d/2} e^{-r²/4t}`.
pub fn heat_kernel(d: usize, t: f64, r2: f64) -> f64 {
    (4.0 * PI * t).powf(-(d as f64) / 2.0) * (-r2 / (4.0 * t)).exp()
}

/// `e^{-L²/4t}`, the relative size of the nearest periodic image.
pub fn aliasing_bound(l: f64, t: f64) -> f64 {
    (-l * l / (4.0 * t)).exp()
}

/// Spectral heat extension on the periodic box. `t = 0` returns the input.
pub fn heat_extend(f: &Field, t: f64) -> Result<Field> {
    if !(t >= 0.0) || !t.is_finite() {
        return invalid(format!("heat time must be nonnegative, got {t}"));
    }
    if t == 0.0 {
        return Ok(f.clone());
    }
    let c = 4.0 * PI * PI * t;
    Ok(apply_radial(f, |r| (-c * r * r).exp()))
}

/// As [`heat_extend`], rejecting `(L, t)` pairs whose periodic images exceed `alias_tol`.
pub fn heat_extend_checked(f: &Field, t: f64, alias_tol: f64) -> Result<Field> {
    let bound = aliasing_bound(f.grid().l(), t);
    if bound > alias_tol {
        return Err(Error::Aliasing {
            t,
            bound,
            tol: alias_tol,
        });
    }
    heat_extend(f, t)
}

/// Direct Gaussian summation on the grid against the periodized kernel, one axis at a time.
pub fn heat_extend_direct(f: &Field, t: f64) -> Result<Field> {
    let g = f.grid();
    if !(t > 0.0) {
        return invalid(format!("heat time must be positive, got {t}"));
    }
    if t.sqrt() < g.h() / 2.0 {
        return Err(Error::Resolution {
            what: "heat kernel",
            detail: format!("sqrt(t) = {:e} is below h/2 = {:e}", t.sqrt(), g.h() / 2.0),
        });
    }
    let n = g.n();
    let h = g.h();
    let period = 2.0 * g.l();
    // one-dimensional periodized kernel weights by index offset
    let reach = (12.0 * t.sqrt() / period).ceil() as i64 + 1;
    let kern: Vec<f64> = (0..n)
        .map(|off| {
            let x = off as f64 * h;
            let mut s = 0.0;
            for m in -reach..=reach {
                let y = x + m as f64 * period;
                s += heat_kernel(1, t, y * y);
            }
            s * h
        })
        .collect();
    let d = g.d();
    let mut out = f.clone();
    let nodes = g.node_count();
    for c in 0..f.ell() {
        let comp = out.component_mut(c);
        for axis in 0..d {
            let stride = n.pow((d - 1 - axis) as u32);
            let src = comp.to_vec();
            for node in 0..nodes {
                let i = (node / stride) % n;
                let base = node - i * stride;
                let mut s = 0.0;
                for jn in 0..n {
                    s += kern[(i + n - jn) % n] * src[base + jn * stride];
                }
                comp[node] = s;
            }
        }
    }
    Ok(out)
}

/// `Heat[μ](x, t)` on `ℝ^d`.
pub fn heat_measure_at(mu: &PointMeasure, t: f64, x: &[f64]) -> f64 {
    let d = mu.d();
    let mut s = 0.0;
    for i in 0..mu.len() {
        let r2: f64 = mu
            .position(i)
            .iter()
            .zip(x)
            .map(|(a, b)| (a - b) * (a - b))
            .sum();
        s += mu.mass(i) * heat_kernel(d, t, r2);
    }
    s
}

/// `Heat[μ](·, t)` sampled at the grid nodes (no periodization).
pub fn heat_measure(mu: &PointMeasure, grid: &GridSpec, t: f64) -> Result<Field> {
    if mu.d() != grid.d() {
        return invalid("measure and grid dimensions differ");
    }
    if !(t > 0.0) {
        return invalid(format!("heat time must be positive, got {t}"));
    }
    let data: Vec<f64> = (0..grid.node_count())
        .into_par_iter()
        .map(|node| heat_measure_at(mu, t, &grid.coord(node)[..grid.d()]))
        .collect();
    Field::new(grid.clone(), 1, data)
}

/// Outcome of a semigroup comparison.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum SemigroupOutcome {
    Defect(f64),
    ZeroField,
}

fn l2(f: &Field) -> f64 {
    let sq: Vec<f64> = f.data().iter().map(|v| v * v).collect();
    (f.grid().cell() * pairwise_sum(&sq)).sqrt()
}

/// `‖Heat[Heat[f](s)](t) − Heat[f](s+t)‖₂ / ‖Heat[f](s+t)‖₂`.
pub fn semigroup_defect(f: &Field, s: f64, t: f64) -> Result<SemigroupOutcome> {
    if !(s > 0.0 && t > 0.0) {
        return invalid("semigroup times must be positive");
    }
    let two = heat_extend(&heat_extend(f, s)?, t)?;
    let one = heat_extend(f, s + t)?;
    let denom = l2(&one);
    if denom == 0.0 {
        return Ok(SemigroupOutcome::ZeroField);
    }
    Ok(SemigroupOutcome::Defect(
        l2(&two.combine(1.0, &one, -1.0)?) / denom,
    ))
}

/// Options for building a ladder.
#[derive(Clone, Copy, Debug)]
pub struct LadderOptions {
    /// Largest allowed relative spectral energy of `f_K` above two thirds of Nyquist.
    pub resolution_tol: f64,
    /// Largest allowed `e^{-L²/4}` (the coarsest level uses `t = 1`).
    pub alias_tol: f64,
}

impl Default for LadderOptions {
    fn default() -> Self {
        Self {
            resolution_tol: 1e-20,
            alias_tol: 1e-10,
        }
    }
}

/// High-frequency energy fraction: spectral energy with `|ξ|_∞ > (2/3)·Nyquist` over the total.
pub fn spectral_tail_fraction(f: &Field) -> f64 {
    let s = dft(f);
    let g = f.grid();
    let cut = 2.0 / 3.0 * g.nyquist();
    let (mut hi, mut all) = (Vec::new(), Vec::new());
    for c in 0..f.ell() {
        for (bin, z) in s.coeffs(c).iter().enumerate() {
            let e = z.norm_sqr();
            all.push(e);
            let xi = g.frequency(bin);
            if xi[..g.d()].iter().any(|v| v.abs() > cut) {
                hi.push(e);
            }
        }
    }
    let total = pairwise_sum(&all);
    if total == 0.0 {
        0.0
    } else {
        pairwise_sum(&hi) / total
    }
}

/// The levels `f_k = Heat[f](·, A^{-2k})`, `k = 0..=K`.
#[derive(Clone, Debug)]
pub struct HeatLadder {
    base: Field,
    a: u32,
    levels: Vec<Field>,
    options: LadderOptions,
}

pub fn ladder_time(a: u32, k: usize) -> f64 {
    (a as f64).powi(-2 * k as i32)
}

pub fn build_ladder(f: &Field, a: u32, k_max: usize) -> Result<HeatLadder> {
    build_ladder_with(f, a, k_max, LadderOptions::default())
}

pub fn build_ladder_with(
    f: &Field,
    a: u32,
    k_max: usize,
    options: LadderOptions,
) -> Result<HeatLadder> {
    if a < 3 || a % 2 == 0 {
        return invalid(format!("A must be odd and at least 3, got {a}"));
    }
    if k_max < 1 {
        return invalid("the ladder needs K ≥ 1");
    }
    let alias = aliasing_bound(f.grid().l(), 1.0);
    if alias > options.alias_tol {
        return Err(Error::Aliasing {
            t: 1.0,
            bound: alias,
            tol: options.alias_tol,
        });
    }
    let levels: Vec<Field> = (0..=k_max)
        .into_par_iter()
        .map(|k| heat_extend(f, ladder_time(a, k)))
        .collect::<Result<_>>()?;
    let tail = spectral_tail_fraction(&levels[k_max]);
    if tail > options.resolution_tol {
        return Err(Error::Resolution {
            what: "finest ladder level",
            detail: format!(
                "relative energy {tail:e} above 2/3 Nyquist exceeds {:e}",
                options.resolution_tol
            ),
        });
    }
    Ok(HeatLadder {
        base: f.clone(),
        a,
        levels,
        options,
    })
}

impl HeatLadder {
    pub fn base(&self) -> &Field {
        &self.base
    }
    pub fn a(&self) -> u32 {
        self.a
    }
    /// Depth `K`.
    pub fn depth(&self) -> usize {
        self.levels.len() - 1
    }
    pub fn level(&self, k: usize) -> Result<&Field> {
        self.levels.get(k).ok_or(Error::LadderDepth {
            need: k,
            have: self.depth(),
        })
    }
    pub fn levels(&self) -> &[Field] {
        &self.levels
    }
    pub fn options(&self) -> LadderOptions {
        self.options
    }
    pub fn time(&self, k: usize) -> f64 {
        ladder_time(self.a, k)
    }

    /// Relative L2 defect between `f_k` and `Heat[f_m](A^{-2k} − A^{-2m})` for `k ≤ m`.
    pub fn consistency(&self, k: usize, m: usize) -> Result<f64> {
        if k > m {
            return invalid("consistency needs k ≤ m");
        }
        let fk = self.level(k)?;
        let fm = self.level(m)?;
        let rebuilt = heat_extend(fm, self.time(k) - self.time(m))?;
        let denom = l2(fk);
        if denom == 0.0 {
            return Ok(l2(&rebuilt));
        }
        Ok(l2(&rebuilt.combine(1.0, fk, -1.0)?) / denom)
    }

    /// Writes `base.bin`, `fk_<k>.bin` and `manifest.txt`.
    pub fn write_dir(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(io_err(dir))?;
        self.base.write_bin(&dir.join("base.bin"))?;
        for (k, f) in self.levels.iter().enumerate() {
            f.write_bin(&dir.join(format!("fk_{k}.bin")))?;
        }
        let mut m = String::new();
        let _ = writeln!(m, "A = {}", self.a);
        let _ = writeln!(m, "K = {}", self.depth());
        let _ = writeln!(m, "resolution_tol = {:e}", self.options.resolution_tol);
        let _ = writeln!(m, "alias_tol = {:e}", self.options.alias_tol);
        let path = dir.join("manifest.txt");
        std::fs::write(&path, m).map_err(io_err(&path))
    }

    pub fn read_dir(dir: &Path) -> Result<Self> {
        let path = dir.join("manifest.txt");
        let text = std::fs::read_to_string(&path).map_err(io_err(&path))?;
        let bad = |msg: String| Error::Format {
            path: path.clone(),
            msg,
        };
        let mut a = None;
        let mut k = None;
        let mut options = LadderOptions::default();
        for line in text.lines().filter(|l| !l.trim().is_empty()) {
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| bad(format!("no '=' in {line:?}")))?;
            let value = value.trim();
            match key.trim() {
                "A" => a = value.parse().ok(),
                "K" => k = value.parse::<usize>().ok(),
                "resolution_tol" => {
                    options.resolution_tol = value
                        .parse()
                        .map_err(|_| bad(format!("bad number {value}")))?
                }
                "alias_tol" => {
                    options.alias_tol = value
                        .parse()
                        .map_err(|_| bad(format!("bad number {value}")))?
                }
                other => return Err(bad(format!("unknown key {other}"))),
            }
        }
        let a = a.ok_or_else(|| bad("missing A".into()))?;
        let k = k.ok_or_else(|| bad("missing K".into()))?;
        let base = Field::read_bin(&dir.join("base.bin"))?;
        let levels = (0..=k)
            .map(|i| Field::read_bin(&dir.join(format!("fk_{i}.bin"))))
            .collect::<Result<_>>()?;
        Ok(Self {
            base,
            a,
            levels,
            options,
        })
    }
}

/// `e^{-z} ∫_{S^{d-1}} e^{z cos φ} dω`.
fn sphere_factor(d: usize, z: f64) -> f64 {
    match d {
        1 => 1.0 + (-2.0 * z).exp(),
        2 => 2.0 * PI * bessel_i0e(z),
        _ => {
            if z < 1e-8 {
                4.0 * PI * (1.0 - z)
            } else {
                4.0 * PI * (-(-2.0 * z).exp_m1()) / (2.0 * z)
            }
        }
    }
}

/// `Heat[(1+|·|)^{-θ}](x, t)` at `|x| = r`, by quadrature in the radial variable.
pub fn radial_heat(theta: f64, d: usize, t: f64, r: f64) -> f64 {
    let reach = (160.0 * t).sqrt();
    let lo = (r - reach).max(0.0);
    let hi = r + reach;
    let width = ((2.0 * t).sqrt() / 2.0).min(0.5);
    let panels = ((hi - lo) / width).ceil().max(1.0) as usize;
    let pref = (4.0 * PI * t).powf(-(d as f64) / 2.0);
    let terms: Vec<f64> = composite_rule(lo, hi, panels, 12)
        .into_iter()
        .map(|(rho, w)| {
            let gauss = (-(rho - r) * (rho - r) / (4.0 * t)).exp();
            w * (1.0 + rho).powf(-theta)
                * rho.powi(d as i32 - 1)
                * gauss
                * sphere_factor(d, rho * r / (2.0 * t))
        })
        .collect();
    pref * pairwise_sum(&terms)
}

/// `Heat[w](x, t)` for any parametric weight.
pub fn heated_value(w: &ParametricWeight, t: f64, x: &[f64]) -> f64 {
    match w {
        ParametricWeight::PolyDecay { theta, center } => {
            let r: f64 = x
                .iter()
                .zip(center)
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt();
            radial_heat(*theta, center.len(), t, r)
        }
        ParametricWeight::Rho { d, .. } => {
            let r: f64 = x.iter().map(|a| a * a).sum::<f64>().sqrt();
            radial_heat(w.theta(), *d, t, r)
        }
        ParametricWeight::Heated { base, t: t0 } => heated_value(base, t0 + t, x),
        ParametricWeight::LatticeNormalized(_) => tensor_heat(|y| w.eval(y), x.len(), t, x),
    }
}

/// `∫ g(y) (4πt)^{-d/2} e^{-|x−y|²/4t} dy` by a tensor Gauss–Legendre rule over `x ± 10√t`.
pub fn tensor_heat(g: impl Fn(&[f64]) -> f64, d: usize, t: f64, x: &[f64]) -> f64 {
    let reach = 10.0 * t.sqrt();
    let width = (2.0 * t).sqrt().min(0.25);
    let panels = (2.0 * reach / width).ceil() as usize;
    let rule = composite_rule(-reach, reach, panels, 6);
    let k1: Vec<f64> = rule
        .iter()
        .map(|(u, w)| w * heat_kernel(1, t, u * u))
        .collect();
    let m = rule.len();
    let mut y = vec![0.0; d];
    let mut terms = Vec::with_capacity(m.pow(d as u32));
    for code in 0..m.pow(d as u32) {
        let mut rest = code;
        let mut weight = 1.0;
        for a in 0..d {
            let i = rest % m;
            rest /= m;
            y[a] = x[a] + rule[i].0;
            weight *= k1[i];
        }
        terms.push(weight * g(&y));
    }
    pairwise_sum(&terms)
}

/// `E(1+|Y|)^θ` for `Y ~ N(0, 2t·I_d)`, bounded through the next integer power.
fn gaussian_moment_bound(d: usize, t: f64, theta: f64) -> f64 {
    let n = theta.ceil() as u32;
    let mut total = 0.0;
    let mut binom = 1.0;
    for m in 0..=n {
        let moment =
            (4.0 * t).powf(m as f64 / 2.0) * gamma_half(d as u32 + m) / gamma_half(d as u32);
        total += binom * moment;
        binom *= (n - m) as f64 / (m + 1) as f64;
    }
    total
}

/// Certified `(c̃, C̃)` for `Heat[w](·, t)` against `(1+|x|)^{-θ}`.
pub fn heated_weight_bounds(w: &ParametricWeight, t: f64) -> (f64, f64) {
    let (c, cc) = w.bounds();
    let d = w.d();
    let theta = w.theta();
    let lower = c
        * (4.0 * PI).powf(-(d as f64) / 2.0)
        * (-0.25f64).exp()
        * unit_ball_volume(d)
        * (1.0 + t.sqrt()).powf(-theta);
    let upper = cc * gaussian_moment_bound(d, t, theta);
    (lower, upper)
}

/// Samples of `Heat[w](·, t)` with the certified envelope constants.
#[derive(Clone, Debug)]
pub struct HeatedWeight {
    pub t: f64,
    pub theta: f64,
    pub lower: f64,
    pub upper: f64,
    pub points: Vec<Vec<f64>>,
    pub values: Vec<f64>,
}

/// Cubic evaluation lattice `{−R, −R+s, …, R}^d`.
pub fn evaluation_lattice(d: usize, radius: f64, spacing: f64) -> Vec<Vec<f64>> {
    let per = (radius / spacing).round() as i64;
    let span = (2 * per + 1) as usize;
    (0..span.pow(d as u32))
        .map(|code| {
            let mut rest = code;
            (0..d)
                .map(|_| {
                    let i = (rest % span) as i64 - per;
                    rest /= span;
                    i as f64 * spacing
                })
                .collect()
        })
        .collect()
}

/// Heats `w` to time `t ∈ (0, 2]`, evaluates it at `points` and checks the certified envelope.
pub fn heat_weight(w: &ParametricWeight, t: f64, points: &[Vec<f64>]) -> Result<HeatedWeight> {
    if !(t > 0.0 && t <= 2.0) {
        return invalid(format!("heating time must lie in (0, 2], got {t}"));
    }
    let (lower, upper) = heated_weight_bounds(w, t);
    let theta = w.theta();
    let values: Vec<f64> = points.par_iter().map(|x| heated_value(w, t, x)).collect();
    for (x, &v) in points.iter().zip(&values) {
        let env = (1.0 + x.iter().map(|a| a * a).sum::<f64>().sqrt()).powf(-theta);
        if !(lower * env <= v && v <= upper * env) {
            return Err(Error::BoundViolation {
                point: x.clone(),
                value: v,
                lower: lower * env,
                upper: upper * env,
            });
        }
    }
    Ok(HeatedWeight {
        t,
        theta,
        lower,
        upper,
        points: points.to_vec(),
        values,
    })
}

/// Both sides of the weighted contraction `‖Heat[f](t)‖_{L_p(w)} ≤ ‖f‖_{L_p(Heat[w](t))}` on the
/// grid, with `w` given by its samples. The heated weight uses the same discrete multiplier as
/// the field, so the inequality is exact whenever the discrete kernel is nonnegative.
pub fn weighted_contraction(f: &Field, w: &Field, p: f64, t: f64) -> Result<(f64, f64)> {
    if w.ell() != 1 || w.grid() != f.grid() {
        return invalid("the weight must be a scalar field on the same grid");
    }
    let hf = heat_extend(f, t)?;
    let hw = heat_extend(w, t)?;
    let cell = f.grid().cell();
    let n = f.grid().node_count();
    let lhs: Vec<f64> = (0..n)
        .map(|i| hf.magnitude_at(i).powf(p) * w.data()[i])
        .collect();
    let rhs: Vec<f64> = (0..n)
        .map(|i| f.magnitude_at(i).powf(p) * hw.data()[i])
        .collect();
    Ok((
        (cell * pairwise_sum(&lhs)).powf(1.0 / p),
        (cell * pairwise_sum(&rhs)).powf(1.0 / p),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field_grid::{gen_gaussian, Bump};

    #[test]
    fn delta_kernel_normalization() {
        let mu = PointMeasure::dirac(1);
        assert!((heat_measure_at(&mu, 1.0 / (4.0 * PI), &[0.0]) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn constant_is_fixed() {
        let g = GridSpec::new(2, 16, 3.0).unwrap();
        let one = Field::from_fn(&g, 1, |_, o| o[0] = 1.0);
        let h = heat_extend(&one, 0.7).unwrap();
        assert!(h.data().iter().all(|v| (v - 1.0).abs() < 1e-14));
    }

    #[test]
    fn gaussian_widens_in_closed_form() {
        let g = GridSpec::new(1, 256, 12.0).unwrap();
        let f = gen_gaussian(&g, &Bump::centered(1, 0.7, 1.0)).unwrap();
        let t = 0.3;
        let h = heat_extend(&f, t).unwrap();
        let s2 = 0.49 + 2.0 * t;
        for node in 0..g.node_count() {
            let x = g.coord(node)[0];
            let exact = (0.49 / s2).sqrt() * (-x * x / (2.0 * s2)).exp();
            assert!((h.data()[node] - exact).abs() < 1e-8);
        }
    }

    #[test]
    fn direct_and_spectral_agree() {
        let g = GridSpec::new(2, 32, 4.0).unwrap();
        let f = gen_gaussian(&g, &Bump::centered(2, 0.5, 1.0)).unwrap();
        let t = 4.0 * g.h() * g.h();
        let a = heat_extend(&f, t).unwrap();
        let b = heat_extend_direct(&f, t).unwrap();
        let err = a
            .data()
            .iter()
            .zip(b.data())
            .map(|(x, y)| (x - y).abs())
            .fold(0.0, f64::max);
        assert!(err < 1e-12 * a.max_magnitude(), "{err}");
        assert!(heat_extend_direct(&f, g.h() * g.h() / 8.0).is_err());
    }

    #[test]
    fn zero_field_semigroup_outcome() {
        let g = GridSpec::new(1, 16, 2.0).unwrap();
        let z = Field::zeros(&g, 1);
        assert_eq!(
            semigroup_defect(&z, 0.1, 0.1).unwrap(),
            SemigroupOutcome::ZeroField
        );
    }

    #[test]
    fn radial_heat_matches_tensor_quadrature_away_from_kink() {
        for d in 1..=2 {
            let x = vec![3.0; d];
            let r = (d as f64).sqrt() * 3.0;
            let a = radial_heat(4.0, d, 0.05, r);
            let b = tensor_heat(
                |y| (1.0 + y.iter().map(|v| v * v).sum::<f64>().sqrt()).powf(-4.0),
                d,
                0.05,
                &x,
            );
            assert!((a / b - 1.0).abs() < 1e-9, "{d}: {a} {b}");
        }
    }

    #[test]
    fn radial_heat_of_one_is_one() {
        for d in 1..=3 {
            for r in [0.0, 0.3, 4.0] {
                assert!((radial_heat(0.0, d, 0.4, r) - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn ladder_roundtrip_and_depth() {
        let g = GridSpec::new(1, 128, 12.0).unwrap();
        let f = gen_gaussian(&g, &Bump::centered(1, 1.0, 1.0)).unwrap();
        let lad = build_ladder(&f, 3, 2).unwrap();
        assert_eq!(lad.consistency(1, 1).unwrap(), 0.0);
        assert!(lad.level(3).is_err());
        let dir = tempfile::tempdir().unwrap();
        lad.write_dir(dir.path()).unwrap();
        let back = HeatLadder::read_dir(dir.path()).unwrap();
        assert_eq!(back.levels(), lad.levels());
        assert!(build_ladder(&f, 4, 2).is_err());
    }
}
