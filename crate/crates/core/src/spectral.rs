//! Fourier transforms on the periodic box, Riesz potentials, Littlewood–Paley bands and the
//! cancellation checker for symbol maps.
//!
//! The transform follows `f̂(ξ) = ∫ f(x) e^{-2πi⟨ξ,x⟩} dx` on the frequency lattice `n / (2L)`.

use std::f64::consts::PI;
use std::path::Path;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rustfft::FftPlanner;

use crate::error::{invalid, io_err, Error, Result};
use crate::field_grid::{pairwise_sum, Field, GridSpec};

/// In-place N-dimensional FFT of one component (unnormalized, rustfft sign conventions).
fn fftn(grid: &GridSpec, data: &mut [Complex64], inverse: bool) {
    let n = grid.n();
    let d = grid.d();
    let mut planner = FftPlanner::new();
    let fft = if inverse {
        planner.plan_fft_inverse(n)
    } else {
        planner.plan_fft_forward(n)
    };
    let mut scratch = vec![Complex64::default(); fft.get_inplace_scratch_len()];
    if d == 1 {
        fft.process_with_scratch(data, &mut scratch);
        return;
    }
    let total = data.len();
    let mut line = vec![Complex64::default(); n];
    for axis in 0..d {
        let stride = n.pow((d - 1 - axis) as u32);
        if stride == 1 {
            for chunk in data.chunks_exact_mut(n) {
                fft.process_with_scratch(chunk, &mut scratch);
            }
            continue;
        }
        let block = stride * n;
        for start in (0..total).step_by(block) {
            for offset in 0..stride {
                let base = start + offset;
                for (i, slot) in line.iter_mut().enumerate() {
                    *slot = data[base + i * stride];
                }
                fft.process_with_scratch(&mut line, &mut scratch);
                for (i, v) in line.iter().enumerate() {
                    data[base + i * stride] = *v;
                }
            }
        }
    }
}

fn norm2(xi: &[f64; 3]) -> f64 {
    (xi[0] * xi[0] + xi[1] * xi[1] + xi[2] * xi[2]).sqrt()
}

/// Fourier coefficients of every component of a field.
#[derive(Clone, Debug)]
pub struct Spectrum {
    grid: GridSpec,
    ell: usize,
    data: Vec<Complex64>,
}

impl Spectrum {
    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }
    pub fn ell(&self) -> usize {
        self.ell
    }
    /// Coefficient of component `c` at spectral bin `bin` (FFT ordering).
    pub fn coeff(&self, c: usize, bin: usize) -> Complex64 {
        self.data[c * self.grid.node_count() + bin]
    }
    pub fn coeffs(&self, c: usize) -> &[Complex64] {
        let n = self.grid.node_count();
        &self.data[c * n..(c + 1) * n]
    }
    /// Measure of one frequency cell, `(2L)^{-d}`.
    pub fn cell(&self) -> f64 {
        (2.0 * self.grid.l()).powi(-(self.grid.d() as i32))
    }
    /// `Σ |f̂|² · (2L)^{-d}` summed over components.
    pub fn energy(&self) -> f64 {
        let terms: Vec<f64> = self.data.iter().map(|z| z.norm_sqr()).collect();
        pairwise_sum(&terms) * self.cell()
    }
}

/// Sign `(-1)^{n_1 + … + n_d}` that moves the FFT origin to `x = -L`.
fn phase(grid: &GridSpec, bin: usize) -> f64 {
    let idx = grid.multi_index(bin);
    let s: i64 = (0..grid.d()).map(|a| grid.freq_index(idx[a])).sum();
    if s.rem_euclid(2) == 0 {
        1.0
    } else {
        -1.0
    }
}

pub fn dft(f: &Field) -> Spectrum {
    let grid = f.grid().clone();
    let nodes = grid.node_count();
    let cell = grid.cell();
    let mut data = Vec::with_capacity(f.ell() * nodes);
    for c in 0..f.ell() {
        let mut buf: Vec<Complex64> = f
            .component(c)
            .iter()
            .map(|&v| Complex64::new(v, 0.0))
            .collect();
        fftn(&grid, &mut buf, false);
        for (bin, z) in buf.iter_mut().enumerate() {
            *z *= cell * phase(&grid, bin);
        }
        data.extend(buf);
    }
    Spectrum {
        grid,
        ell: f.ell(),
        data,
    }
}

/// Inverse transform; imaginary parts are dropped.
pub fn idft(s: &Spectrum) -> Field {
    let grid = s.grid.clone();
    let nodes = grid.node_count();
    let scale = s.cell();
    let mut out = Vec::with_capacity(s.ell * nodes);
    for c in 0..s.ell {
        let mut buf: Vec<Complex64> = s
            .coeffs(c)
            .iter()
            .enumerate()
            .map(|(bin, z)| *z * (scale * phase(&grid, bin)))
            .collect();
        fftn(&grid, &mut buf, true);
        out.extend(buf.iter().map(|z| z.re));
    }
    Field::new(grid, s.ell, out).expect("inverse transform of a finite spectrum")
}

/// Applies a complex Fourier multiplier `m(ξ)` to every component.
pub fn apply_multiplier(f: &Field, m: impl Fn(&[f64; 3]) -> Complex64) -> Field {
    let grid = f.grid();
    let nodes = grid.node_count();
    let mult: Vec<Complex64> = (0..nodes).map(|bin| m(&grid.frequency(bin))).collect();
    let inv = 1.0 / nodes as f64;
    let mut out = Field::zeros(grid, f.ell());
    for c in 0..f.ell() {
        let mut buf: Vec<Complex64> = f
            .component(c)
            .iter()
            .map(|&v| Complex64::new(v, 0.0))
            .collect();
        fftn(grid, &mut buf, false);
        for (z, w) in buf.iter_mut().zip(&mult) {
            *z *= *w;
        }
        fftn(grid, &mut buf, true);
        for (o, z) in out.component_mut(c).iter_mut().zip(&buf) {
            *o = z.re * inv;
        }
    }
    out
}

/// Applies a real radial multiplier `m(|ξ|)`.
pub fn apply_radial(f: &Field, m: impl Fn(f64) -> f64) -> Field {
    apply_multiplier(f, |xi| Complex64::new(m(norm2(xi)), 0.0))
}

/// `∂_axis` computed spectrally; the Nyquist bin is dropped.
pub fn spectral_derivative(f: &Field, axis: usize) -> Field {
    let grid = f.grid().clone();
    let nyq = grid.nyquist();
    apply_multiplier(f, move |xi| {
        if (xi[axis].abs() - nyq).abs() < 1e-12 * nyq {
            Complex64::new(0.0, 0.0)
        } else {
            Complex64::new(0.0, 2.0 * PI * xi[axis])
        }
    })
}

/// Spectral divergence of a field with `ell = d`.
pub fn spectral_divergence(f: &Field) -> Result<Field> {
    let d = f.grid().d();
    if f.ell() != d {
        return invalid("divergence needs as many components as dimensions");
    }
    let mut acc = Field::zeros(f.grid(), 1);
    for a in 0..d {
        let comp = Field::new(f.grid().clone(), 1, f.component(a).to_vec())?;
        acc = acc.combine(1.0, &spectral_derivative(&comp, a), 1.0)?;
    }
    Ok(acc)
}

/// Riesz potential output with the mean-zero verdict.
#[derive(Clone, Debug)]
pub struct Riesz {
    pub field: Field,
    pub dc_truncated: bool,
}

/// Multiplier `|ξ|^{-α}` with the zero frequency removed.
pub fn riesz_potential(f: &Field, alpha: f64) -> Result<Riesz> {
    let d = f.grid().d() as f64;
    if !(alpha > 0.0 && alpha < d) {
        return invalid(format!("Riesz order must lie in (0, {d}), got {alpha}"));
    }
    let means = f.quadrature();
    let mut l1 = 0.0;
    for c in 0..f.ell() {
        l1 += f.grid().cell()
            * pairwise_sum(&f.component(c).iter().map(|v| v.abs()).collect::<Vec<_>>());
    }
    let dc_truncated = means
        .iter()
        .any(|m| m.abs() > 1e-8 * l1.max(f64::MIN_POSITIVE));
    let field = apply_radial(f, |r| if r == 0.0 { 0.0 } else { r.powf(-alpha) });
    Ok(Riesz {
        field,
        dc_truncated,
    })
}

/// Smooth radial cutoff used for the Littlewood–Paley pieces.
#[derive(Clone, Debug, PartialEq)]
pub struct BandFilter {
    pub a: f64,
    pub r0: f64,
    pub r1: f64,
}

impl BandFilter {
    pub fn new(a: u32) -> Result<Self> {
        if a < 2 {
            return invalid("band base must be at least 2");
        }
        Ok(Self {
            a: a as f64,
            r0: 1.0,
            r1: 2.0,
        })
    }

    /// `ψ̂(r)`: one on `[0, r0]`, a C^∞ taper on `(r0, r1)`, zero beyond.
    pub fn psi_hat(&self, r: f64) -> f64 {
        if r <= self.r0 {
            return 1.0;
        }
        if r >= self.r1 {
            return 0.0;
        }
        let s = (r - self.r0) / (self.r1 - self.r0);
        (1.0 - 1.0 / (1.0 - s * s)).exp()
    }

    /// `ψ̂(|ξ|/A^k) − ψ̂(|ξ|/A^{k−1})`.
    pub fn band_multiplier(&self, k: i32, r: f64) -> f64 {
        self.psi_hat(r / self.a.powi(k)) - self.psi_hat(r / self.a.powi(k - 1))
    }

    pub fn resolvable(&self, grid: &GridSpec, k: i32) -> bool {
        self.a.powi(k) * self.r1 <= grid.nyquist() * (1.0 + 1e-12)
    }
}

pub fn besov_band(f: &Field, k: i32, filter: &BandFilter) -> Result<Field> {
    if !filter.resolvable(f.grid(), k) {
        return Err(Error::Resolution {
            what: "band",
            detail: format!(
                "band {k} reaches |ξ| = {} beyond Nyquist {}",
                filter.a.powi(k) * filter.r1,
                f.grid().nyquist()
            ),
        });
    }
    Ok(apply_radial(f, |r| filter.band_multiplier(k, r)))
}

/// Measured `‖I_α g‖₂ / (A^{-αk}‖g‖₂)` for the band-k piece `g`, with the filter's envelope.
#[derive(Clone, Copy, Debug)]
pub struct BandEnvelope {
    pub ratio: f64,
    pub lower: f64,
    pub upper: f64,
}

pub fn riesz_band_envelope(
    f: &Field,
    alpha: f64,
    k: i32,
    filter: &BandFilter,
) -> Result<Option<BandEnvelope>> {
    let g = besov_band(f, k, filter)?;
    let ig = riesz_potential(&g, alpha)?.field;
    let l2 = |h: &Field| {
        let sq: Vec<f64> = h.data().iter().map(|v| v * v).collect();
        (pairwise_sum(&sq) * h.grid().cell()).sqrt()
    };
    let denom = filter.a.powf(-alpha * k as f64) * l2(&g);
    if denom == 0.0 {
        return Ok(None);
    }
    Ok(Some(BandEnvelope {
        ratio: l2(&ig) / denom,
        lower: filter.r1.powf(-alpha),
        upper: filter.a.powf(alpha),
    }))
}

/// Subspace-valued symbol `ζ ↦ Ω(ζ) ⊂ ℝ^ℓ`.
#[derive(Clone, Debug)]
pub enum SymbolMap {
    /// `Ω(ζ) = span ζ`, symbol of the gradient.
    Gradient { d: usize },
    /// `Ω(ζ) = ζ^⊥`, symbol of divergence-free fields.
    DivFree { d: usize },
    /// `Ω(ζ) = ℝ^ℓ`.
    Identity { d: usize, ell: usize },
    /// Bases given at explicit sphere points.
    Tabulated {
        d: usize,
        ell: usize,
        rows: Vec<(Vec<f64>, DMatrix<f64>)>,
    },
}

impl SymbolMap {
    pub fn by_name(name: &str, d: usize) -> Result<Self> {
        match name {
            "gradient" => Ok(Self::Gradient { d }),
            "divfree" | "curl" => Ok(Self::DivFree { d }),
            "identity" => Ok(Self::Identity { d, ell: d }),
            other => invalid(format!("unknown symbol map '{other}'")),
        }
    }

    pub fn d(&self) -> usize {
        match self {
            Self::Gradient { d }
            | Self::DivFree { d }
            | Self::Identity { d, .. }
            | Self::Tabulated { d, .. } => *d,
        }
    }

    pub fn ell(&self) -> usize {
        match self {
            Self::Gradient { d } | Self::DivFree { d } => *d,
            Self::Identity { ell, .. } | Self::Tabulated { ell, .. } => *ell,
        }
    }

    /// Basis of `Ω(ζ)` as an `ℓ × k` matrix.
    pub fn basis(&self, zeta: &[f64]) -> Result<DMatrix<f64>> {
        match self {
            Self::Gradient { d } => Ok(DMatrix::from_column_slice(*d, 1, zeta)),
            Self::DivFree { d } => {
                if *d < 2 {
                    return invalid("divergence-free symbol needs d ≥ 2");
                }
                let z = DMatrix::from_column_slice(*d, 1, zeta);
                let proj = DMatrix::identity(*d, *d) - &z * z.transpose() / z.norm_squared();
                let svd = proj.svd(true, false);
                let u = svd.u.unwrap();
                let mut order: Vec<usize> = (0..*d).collect();
                order.sort_by(|&i, &j| svd.singular_values[j].total_cmp(&svd.singular_values[i]));
                let cols: Vec<_> = order[..d - 1]
                    .iter()
                    .map(|&i| u.column(i).into_owned())
                    .collect();
                Ok(DMatrix::from_columns(&cols))
            }
            Self::Identity { ell, .. } => Ok(DMatrix::identity(*ell, *ell)),
            Self::Tabulated { rows, .. } => rows
                .iter()
                .find(|(z, _)| z.iter().zip(zeta).all(|(a, b)| (a - b).abs() < 1e-12))
                .map(|(_, m)| m.clone())
                .ok_or_else(|| Error::Invalid(format!("no tabulated basis at ζ = {zeta:?}"))),
        }
    }

    /// Sphere points carried by a tabulated map.
    pub fn tabulated_samples(&self) -> Option<Vec<Vec<f64>>> {
        match self {
            Self::Tabulated { rows, .. } => Some(rows.iter().map(|(z, _)| z.clone()).collect()),
            _ => None,
        }
    }

    /// Reads rows `ζ_1..ζ_d, b_11, b_12, …` (basis row-major, `ℓ × k`); header `d,ell,k` first.
    pub fn from_csv(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(io_err(path))?;
        let fmt = |line: usize, msg: String| Error::Config {
            path: path.to_path_buf(),
            line,
            msg,
        };
        let mut lines = text
            .lines()
            .enumerate()
            .filter(|(_, l)| !l.trim().is_empty() && !l.starts_with('#'));
        let (ln, head) = lines
            .next()
            .ok_or_else(|| fmt(1, "empty symbol table".into()))?;
        let dims: Vec<usize> = head
            .split(',')
            .map(|s| s.trim().parse::<usize>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| fmt(ln + 1, format!("bad header: {e}")))?;
        if dims.len() != 3 {
            return Err(fmt(ln + 1, "header must be d,ell,k".into()));
        }
        let (d, ell, k) = (dims[0], dims[1], dims[2]);
        let mut rows = Vec::new();
        for (ln, line) in lines {
            let vals: Vec<f64> = line
                .split(',')
                .map(|s| s.trim().parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| fmt(ln + 1, format!("bad number: {e}")))?;
            if vals.len() != d + ell * k {
                return Err(fmt(
                    ln + 1,
                    format!("expected {} values, found {}", d + ell * k, vals.len()),
                ));
            }
            rows.push((
                vals[..d].to_vec(),
                DMatrix::from_row_slice(ell, k, &vals[d..]),
            ));
        }
        if rows.is_empty() {
            return Err(fmt(ln + 1, "symbol table has no rows".into()));
        }
        Ok(Self::Tabulated { d, ell, rows })
    }
}

/// Deterministic quasi-uniform points on `S^{d−1}`.
pub fn sphere_samples(d: usize, m: usize) -> Vec<Vec<f64>> {
    match d {
        1 => vec![vec![1.0], vec![-1.0]],
        2 => (0..m)
            .map(|i| {
                let a = 2.0 * PI * i as f64 / m as f64;
                vec![a.cos(), a.sin()]
            })
            .collect(),
        _ => {
            let golden = PI * (3.0 - 5f64.sqrt());
            (0..m)
                .map(|i| {
                    let z = 1.0 - 2.0 * (i as f64 + 0.5) / m as f64;
                    let r = (1.0 - z * z).sqrt();
                    let phi = golden * i as f64;
                    vec![r * phi.cos(), r * phi.sin(), z]
                })
                .collect()
        }
    }
}

/// Verdict of the sampled cancellation test.
#[derive(Clone, Debug)]
pub struct Cancellation {
    /// Smallest singular value of the stacked complements.
    pub defect: f64,
    pub tol: f64,
    pub canceling: bool,
    /// Unit vector common to every sampled `Ω(ζ)` when not canceling.
    pub witness: Option<Vec<f64>>,
    pub samples: usize,
}

pub fn cancellation_defect(omega: &SymbolMap, samples: &[Vec<f64>]) -> Result<Cancellation> {
    let d = omega.d();
    if samples.len() < 2 * d {
        return invalid(format!(
            "need at least {} sphere samples, got {}",
            2 * d,
            samples.len()
        ));
    }
    let ell = omega.ell();
    let mut stack = DMatrix::<f64>::zeros(ell * samples.len(), ell);
    for (i, zeta) in samples.iter().enumerate() {
        let b = omega.basis(zeta)?;
        if b.nrows() != ell {
            return invalid("basis has the wrong ambient dimension");
        }
        let svd = b.clone().svd(true, false);
        let smin = svd
            .singular_values
            .iter()
            .copied()
            .fold(f64::INFINITY, f64::min);
        if smin <= 1e-10 {
            return Err(Error::RankDrop(smin));
        }
        let q = svd.u.unwrap();
        let complement = DMatrix::identity(ell, ell) - &q * q.transpose();
        stack
            .view_mut((i * ell, 0), (ell, ell))
            .copy_from(&complement);
    }
    let svd = stack.svd(false, true);
    let sv = &svd.singular_values;
    let (imin, defect) = sv
        .iter()
        .copied()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .expect("non-empty spectrum");
    let top = sv.iter().copied().fold(0.0, f64::max);
    let tol = 1e-8 * top;
    let canceling = defect > tol;
    let witness = (!canceling).then(|| {
        let vt = svd.v_t.as_ref().unwrap();
        let mut w: Vec<f64> = vt.row(imin).iter().copied().collect();
        let lead = w
            .iter()
            .copied()
            .fold(0.0f64, |m, v| if v.abs() > m.abs() { v } else { m });
        let n = w.iter().map(|v| v * v).sum::<f64>().sqrt();
        let s = if lead < 0.0 { -1.0 / n } else { 1.0 / n };
        w.iter_mut().for_each(|v| *v *= s);
        w
    });
    Ok(Cancellation {
        defect,
        tol,
        canceling,
        witness,
        samples: samples.len(),
    })
}
