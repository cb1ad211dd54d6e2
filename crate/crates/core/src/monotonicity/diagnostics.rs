use std::collections::BTreeMap;
use std::f64::consts::PI;

use super::qp::{qp, QpQuadrature, Terminal};
use crate::error::{invalid, Result};
use crate::field_grid::{pairwise_sum, Field, PointMeasure};
use crate::heat_flow::heat_extend;
use crate::spectral::SymbolMap;
use crate::weights_atoms::{Cell, ParametricWeight};

/// Invariant cone a representative family is drawn from.
#[derive(Clone, Debug)]
pub enum ConeTag {
    /// Measures depending on at most `q` coordinates; `free` spans the translation-invariant
    /// directions (orthonormal, `d − q` of them).
    Mq { q: usize, free: Vec<Vec<f64>> },
    /// Cone generated by a symbol map.
    Mspace(SymbolMap),
}

#[derive(Clone, Debug)]
pub struct ConeSample {
    pub tag: ConeTag,
    pub representatives: Vec<PointMeasure>,
}

/// Equal masses at `points` equispaced positions along a segment of the given length.
pub fn line_measure(
    center: &[f64],
    direction: &[f64],
    length: f64,
    points: usize,
) -> Result<PointMeasure> {
    if points < 2 {
        return invalid("a line sample needs at least two points");
    }
    let d = center.len();
    let atoms: Vec<(Vec<f64>, f64)> = (0..points)
        .map(|i| {
            let s = -length / 2.0 + length * i as f64 / (points - 1) as f64;
            (
                (0..d).map(|a| center[a] + s * direction[a]).collect(),
                1.0 / points as f64,
            )
        })
        .collect();
    PointMeasure::new(d, &atoms)
}

impl ConeSample {
    /// Checks that `Mq` representatives are sampled along their free directions: all atoms lie
    /// on lines parallel to the free span through a common transversal, with equal masses per line.
    pub fn validate(&self) -> Result<()> {
        match &self.tag {
            ConeTag::Mq { q, free } => {
                for mu in &self.representatives {
                    let d = mu.d();
                    if free.len() + q != d {
                        return invalid("free directions must span d − q dimensions");
                    }
                    // components orthogonal to the free span, rounded to detect lines
                    let mut lines: BTreeMap<Vec<i64>, f64> = BTreeMap::new();
                    for i in 0..mu.len() {
                        let mut x = mu.position(i).to_vec();
                        for e in free {
                            let c: f64 = x.iter().zip(e).map(|(a, b)| a * b).sum();
                            for a in 0..d {
                                x[a] -= c * e[a];
                            }
                        }
                        let key = x.iter().map(|v| (v * 1e9).round() as i64).collect();
                        *lines.entry(key).or_default() += mu.mass(i);
                    }
                    if free.is_empty() {
                        continue;
                    }
                    let count = mu.len() / lines.len();
                    if count < 2 {
                        return invalid("representative is not sampled along its free directions");
                    }
                }
                Ok(())
            }
            ConeTag::Mspace(_) => Ok(()),
        }
    }
}

/// Exponent fit for one representative.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ExponentFit {
    /// `min_t ln(Q(t)/Q(1)) / (p ln t)`, clamped at zero: the largest `δ` with
    /// `Q(t) ≤ t^{pδ} Q(1)` on the grid.
    pub worst: f64,
    /// Least-squares slope of `ln(Q(t)/Q(1))` against `p ln t` through the origin.
    pub lsq: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExponentSummary {
    pub fits: Vec<ExponentFit>,
    pub min: f64,
    pub median: f64,
}

pub fn exponent_fit(
    mu: &PointMeasure,
    g: &Terminal,
    p: f64,
    t_grid: &[f64],
) -> Result<ExponentFit> {
    let q1 = qp(mu, g, p, 1.0)?;
    if q1 == 0.0 {
        return invalid("Q_p(1) vanishes");
    }
    let mut worst = f64::INFINITY;
    let (mut num, mut den) = (0.0, 0.0);
    for &t in t_grid.iter().filter(|&&t| t < 1.0) {
        let r = (qp(mu, g, p, t)? / q1).ln();
        let lt = p * t.ln();
        worst = worst.min(r / lt);
        num += r * lt;
        den += lt * lt;
    }
    if den == 0.0 {
        return invalid("time grid needs a point below 1");
    }
    Ok(ExponentFit {
        worst: worst.max(0.0),
        lsq: (num / den).max(0.0),
    })
}

pub fn improved_exponent(
    cone: &ConeSample,
    g: &Terminal,
    p: f64,
    t_grid: &[f64],
) -> Result<ExponentSummary> {
    cone.validate()?;
    let fits: Vec<ExponentFit> = cone
        .representatives
        .iter()
        .map(|mu| exponent_fit(mu, g, p, t_grid))
        .collect::<Result<_>>()?;
    if fits.is_empty() {
        return invalid("cone sample has no representatives");
    }
    let mut w: Vec<f64> = fits.iter().map(|f| f.worst).collect();
    w.sort_by(f64::total_cmp);
    let median = if w.len() % 2 == 1 {
        w[w.len() / 2]
    } else {
        0.5 * (w[w.len() / 2 - 1] + w[w.len() / 2])
    };
    Ok(ExponentSummary {
        min: w[0],
        median,
        fits,
    })
}

/// One side-`ν` lattice cube of the concentration diagnostic.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CubeRow {
    pub mass: f64,
    pub kind: bool,
    pub good: bool,
    pub b: f64,
}

#[derive(Clone, Debug)]
pub struct Concentration {
    /// `∫ (Σ m e^{−|x−y|²/4})^p G`.
    pub conc1: f64,
    /// `∫ 𝔻(Y_x) (Σ m e^{−|x−y|²/4})^p G`.
    pub conc2: f64,
    pub cubes: BTreeMap<Cell, CubeRow>,
    /// Heaviest kind and good cube, if any.
    pub x0: Option<Cell>,
    /// `(ν μ(B_ν(x0)), ∫_{|x−x0|≥ν} ρ(x−x0) dμ)` at the center of `x0`.
    pub conc3: Option<(f64, f64)>,
}

/// `(ν μ(B_ν(x0)), ∫_{|x−x0| ≥ ν} ρ(x−x0) dμ)` with `ρ = (1+|x|)^{−θ_G−2d}`.
pub fn conc3_sides(mu: &PointMeasure, x0: &[f64], nu: f64, theta_g: f64) -> (f64, f64) {
    let d = mu.d() as f64;
    let (mut near, mut far) = (0.0, 0.0);
    for i in 0..mu.len() {
        let r = mu
            .position(i)
            .iter()
            .zip(x0)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt();
        if r < nu {
            near += mu.mass(i);
        } else {
            far += mu.mass(i) * (1.0 + r).powf(-theta_g - 2.0 * d);
        }
    }
    (nu * near, far)
}

fn cell_dist(a: &Cell, b: &Cell) -> f64 {
    crate::weights_atoms::lattice_distance(a, b)
}

/// Kind, good and concentration maps for a measure, with `τ` supplied directly.
pub fn concentration_diagnostic(
    mu: &PointMeasure,
    g: &Terminal,
    p: f64,
    theta_g: f64,
    nu: f64,
    r: f64,
    tau: f64,
) -> Result<Concentration> {
    let d = mu.d();
    if !(nu > 0.0 && nu < 1.0 / (d as f64).sqrt()) {
        return invalid(format!("ν must lie in (0, d^(-1/2)), got {nu}"));
    }
    if !(r > 0.0 && tau > 0.0) {
        return invalid("R and τ must be positive");
    }
    let quad = QpQuadrature::new(mu, g, p, 1.0, 1.0)?;
    let (q1, var) = quad.eval(mu, 1.0)?;
    let scale = (4.0 * PI).powf(d as f64 * p / 2.0);
    let conc1 = scale * q1;
    let conc2 = var;
    let mut a: BTreeMap<Cell, f64> = BTreeMap::new();
    for i in 0..mu.len() {
        let mut c = [0i64; 3];
        for (ax, v) in mu.position(i).iter().enumerate() {
            c[ax] = (v / nu + 0.5).floor() as i64;
        }
        *a.entry(c).or_default() += mu.mass(i);
    }
    let rho = |dist: f64| (1.0 + dist).powf(-theta_g - 2.0 * d as f64);
    let sqrt_d = (d as f64).sqrt();
    let reach = (sqrt_d.floor()) as i64;
    let mut cubes = BTreeMap::new();
    for (k, &ak) in &a {
        let far: Vec<f64> = a
            .iter()
            .filter(|(m, _)| nu * cell_dist(k, m) >= r)
            .map(|(m, am)| rho(nu * cell_dist(k, m)) * am.powf(p))
            .collect();
        let kind = (nu * ak).powf(p) >= pairwise_sum(&far);
        let hood: Vec<(Cell, f64)> = a
            .iter()
            .filter(|(m, _)| nu * cell_dist(k, m) <= r)
            .map(|(m, v)| (*m, *v))
            .collect();
        let total: f64 = hood.iter().map(|x| x.1).sum();
        // the minimizing l sits within √d of some populated cube of the neighbourhood
        let mut best_excluded = 0.0f64;
        for (m, _) in &hood {
            for code in 0..(2 * reach + 1).pow(d as u32) {
                let mut l = *m;
                let mut rest = code;
                for ax in 0..d {
                    l[ax] += (rest % (2 * reach + 1)) - reach;
                    rest /= 2 * reach + 1;
                }
                let excluded: f64 = hood
                    .iter()
                    .filter(|(mm, _)| cell_dist(&l, mm) <= sqrt_d)
                    .map(|x| x.1)
                    .sum();
                best_excluded = best_excluded.max(excluded);
            }
        }
        let b = (total - best_excluded).max(0.0);
        cubes.insert(
            *k,
            CubeRow {
                mass: ak,
                kind,
                good: tau * ak >= b,
                b,
            },
        );
    }
    let x0 = cubes
        .iter()
        .filter(|(_, c)| c.kind && c.good)
        .max_by(|x, y| x.1.mass.total_cmp(&y.1.mass).then(y.0.cmp(x.0)))
        .map(|(k, _)| *k);
    let conc3 = x0.map(|k| {
        let center: Vec<f64> = (0..d).map(|ax| nu * k[ax] as f64).collect();
        conc3_sides(mu, &center, nu, theta_g)
    });
    Ok(Concentration {
        conc1,
        conc2,
        cubes,
        x0,
        conc3,
    })
}

/// Outputs of the flatness diagnostic.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Flatness {
    /// `∫ (Heat[|g|] − |Heat[g]|) w`.
    pub gap: f64,
    /// `‖g‖_{L1(Heat[w])}` and `‖Heat[g]‖_{L1(w)}`, computed independently.
    pub heated_weight_side: f64,
    pub heated_field_side: f64,
    pub rank1_deviation: f64,
    pub sign_deviation: f64,
    pub degenerate: bool,
}

/// Rank-one direction of `g`: the normalized integral, or the top principal direction when the
/// integral vanishes.
fn rank_one_direction(g: &Field) -> Vec<f64> {
    let ell = g.ell();
    let integral = g.quadrature();
    let norm = integral.iter().map(|v| v * v).sum::<f64>().sqrt();
    let l1: f64 = g.grid().cell() * pairwise_sum(&g.magnitudes());
    if norm > 1e-12 * l1 {
        return integral.iter().map(|v| v / norm).collect();
    }
    let n = g.grid().node_count();
    let mut m = nalgebra::DMatrix::<f64>::zeros(ell, ell);
    for node in 0..n {
        for i in 0..ell {
            for j in 0..ell {
                m[(i, j)] += g.component(i)[node] * g.component(j)[node];
            }
        }
    }
    let eig = m.symmetric_eigen();
    let top = eig
        .eigenvalues
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .map(|x| x.0)
        .unwrap_or(0);
    let mut v: Vec<f64> = eig.eigenvectors.column(top).iter().copied().collect();
    let big = v
        .iter()
        .copied()
        .max_by(|a, b| a.abs().total_cmp(&b.abs()))
        .unwrap_or(1.0);
    if big < 0.0 {
        v.iter_mut().for_each(|x| *x = -*x);
    }
    v
}

pub fn flatness_defect(g: &Field, w: &ParametricWeight, t: f64) -> Result<Flatness> {
    if w.d() != g.grid().d() {
        return invalid("weight and field dimensions differ");
    }
    if g.is_zero() {
        return Ok(Flatness {
            gap: 0.0,
            heated_weight_side: 0.0,
            heated_field_side: 0.0,
            rank1_deviation: 0.0,
            sign_deviation: 0.0,
            degenerate: true,
        });
    }
    let grid = g.grid();
    let d = grid.d();
    let cell = grid.cell();
    let n = grid.node_count();
    let wf = Field::from_fn(grid, 1, |x, o| o[0] = w.eval(&x[..d]));
    let hw = heat_extend(&wf, t)?;
    let hg = heat_extend(g, t)?;
    let abs_g = Field::new(grid.clone(), 1, g.magnitudes())?;
    let h_abs = heat_extend(&abs_g, t)?;
    let mags = g.magnitudes();
    let gap_terms: Vec<f64> = (0..n)
        .map(|i| (h_abs.data()[i] - hg.magnitude_at(i)) * wf.data()[i])
        .collect();
    let lhs_terms: Vec<f64> = (0..n).map(|i| mags[i] * hw.data()[i]).collect();
    let rhs_terms: Vec<f64> = (0..n).map(|i| hg.magnitude_at(i) * wf.data()[i]).collect();
    let a = rank_one_direction(g);
    let mut dev = Vec::with_capacity(n);
    let mut h = Vec::with_capacity(n);
    for i in 0..n {
        let proj: f64 = (0..g.ell()).map(|c| a[c] * g.component(c)[i]).sum();
        let r2: f64 = (0..g.ell())
            .map(|c| (g.component(c)[i] - a[c] * proj).powi(2))
            .sum();
        dev.push(r2.sqrt());
        h.push(proj);
    }
    let l1 = pairwise_sum(&mags);
    let h_l1: f64 = pairwise_sum(&h.iter().map(|v| v.abs()).collect::<Vec<_>>());
    let h_neg: f64 = pairwise_sum(&h.iter().map(|v| (-v).max(0.0)).collect::<Vec<_>>());
    let h_pos: f64 = pairwise_sum(&h.iter().map(|v| v.max(0.0)).collect::<Vec<_>>());
    // the sign of a is arbitrary up to the orientation of the factor; measure the minority sign
    let sign_deviation = if h_l1 > 0.0 {
        h_neg.min(h_pos) / h_l1
    } else {
        0.0
    };
    Ok(Flatness {
        gap: cell * pairwise_sum(&gap_terms),
        heated_weight_side: cell * pairwise_sum(&lhs_terms),
        heated_field_side: cell * pairwise_sum(&rhs_terms),
        rank1_deviation: pairwise_sum(&dev) / l1,
        sign_deviation,
        degenerate: false,
    })
}
