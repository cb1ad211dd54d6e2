//! Periodic grids, sampled vector fields, atomic measures and the canonical test inputs.
//!
//! A [`Field`] stores `ell` real components on the nodes of a [`GridSpec`]. Components are
//! contiguous (component-major) and nodes are ordered row-major with axis 0 slowest.

use std::f64::consts::PI;
use std::io::{Read, Write};
use std::path::Path;

use crate::error::{invalid, io_err, Error, Result};

const MAGIC: &[u8; 5] = b"HALF1";
/// Default cap on `N^d`.
pub const DEFAULT_NODE_BUDGET: usize = 1 << 26;

/// Pairwise summation with a fixed split pattern, so results do not depend on threading.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    const BLOCK: usize = 64;
    if xs.len() <= BLOCK {
        let mut s = 0.0;
        for &x in xs {
            s += x;
        }
        return s;
    }
    let mid = xs.len() / 2;
    pairwise_sum(&xs[..mid]) + pairwise_sum(&xs[mid..])
}

/// Pairwise sum of `f(i)` for `i in 0..n` without materializing the terms.
pub fn pairwise_sum_by(n: usize, f: &impl Fn(usize) -> f64) -> f64 {
    fn go(lo: usize, hi: usize, f: &impl Fn(usize) -> f64) -> f64 {
        if hi - lo <= 64 {
            let mut s = 0.0;
            for i in lo..hi {
                s += f(i);
            }
            return s;
        }
        let mid = lo + (hi - lo) / 2;
        go(lo, mid, f) + go(mid, hi, f)
    }
    go(0, n, f)
}

/// Uniform periodic grid on `[-L, L)^d`.
#[derive(Clone, Debug, PartialEq)]
pub struct GridSpec {
    d: usize,
    n: usize,
    l: f64,
    h: f64,
}

impl GridSpec {
    pub fn new(d: usize, n: usize, l: f64) -> Result<Self> {
        Self::with_budget(d, n, l, DEFAULT_NODE_BUDGET)
    }

    pub fn with_budget(d: usize, n: usize, l: f64, budget: usize) -> Result<Self> {
        if !(1..=3).contains(&d) {
            return Err(Error::Grid(format!("dimension must be 1, 2 or 3, got {d}")));
        }
        if n % 2 != 0 {
            return Err(Error::Grid("N must be even".into()));
        }
        if n < 16 {
            return Err(Error::Grid(format!("N must be at least 16, got {n}")));
        }
        if !(l > 0.0 && l.is_finite()) {
            return Err(Error::Grid(format!("L must be positive, got {l}")));
        }
        let count = n.checked_pow(d as u32).filter(|&c| c <= budget);
        if count.is_none() {
            return Err(Error::Grid(format!(
                "{n}^{d} nodes exceed the budget of {budget}"
            )));
        }
        Ok(Self {
            d,
            n,
            l,
            h: 2.0 * l / n as f64,
        })
    }

    pub fn d(&self) -> usize {
        self.d
    }
    pub fn n(&self) -> usize {
        self.n
    }
    pub fn l(&self) -> f64 {
        self.l
    }
    pub fn h(&self) -> f64 {
        self.h
    }
    pub fn node_count(&self) -> usize {
        self.n.pow(self.d as u32)
    }
    /// Measure of one grid cell, `h^d`.
    pub fn cell(&self) -> f64 {
        self.h.powi(self.d as i32)
    }
    /// Highest resolved frequency, `N / (4L)`.
    pub fn nyquist(&self) -> f64 {
        self.n as f64 / (4.0 * self.l)
    }

    pub fn axis_coord(&self, i: usize) -> f64 {
        -self.l + i as f64 * self.h
    }

    /// Per-axis indices of a node (unused axes are 0).
    pub fn multi_index(&self, node: usize) -> [usize; 3] {
        let mut idx = [0usize; 3];
        let mut rest = node;
        for a in (0..self.d).rev() {
            idx[a] = rest % self.n;
            rest /= self.n;
        }
        idx
    }

    pub fn node_index(&self, idx: &[usize]) -> usize {
        idx[..self.d].iter().fold(0, |acc, &i| acc * self.n + i)
    }

    /// Coordinates of a node (unused axes are 0).
    pub fn coord(&self, node: usize) -> [f64; 3] {
        let idx = self.multi_index(node);
        let mut x = [0.0; 3];
        for a in 0..self.d {
            x[a] = self.axis_coord(idx[a]);
        }
        x
    }

    /// Signed frequency index of FFT bin `i` on one axis.
    pub fn freq_index(&self, i: usize) -> i64 {
        if i < self.n / 2 {
            i as i64
        } else {
            i as i64 - self.n as i64
        }
    }

    /// Frequency vector `n / (2L)` of a spectral bin.
    pub fn frequency(&self, bin: usize) -> [f64; 3] {
        let idx = self.multi_index(bin);
        let mut xi = [0.0; 3];
        for a in 0..self.d {
            xi[a] = self.freq_index(idx[a]) as f64 / (2.0 * self.l);
        }
        xi
    }
}

/// Vector-valued samples on a grid.
#[derive(Clone, Debug, PartialEq)]
pub struct Field {
    grid: GridSpec,
    ell: usize,
    data: Vec<f64>,
}

impl Field {
    pub fn new(grid: GridSpec, ell: usize, data: Vec<f64>) -> Result<Self> {
        if ell == 0 {
            return invalid("a field needs at least one component");
        }
        if data.len() != ell * grid.node_count() {
            return invalid(format!(
                "data length {} does not match {} components on {} nodes",
                data.len(),
                ell,
                grid.node_count()
            ));
        }
        if let Some(i) = data.iter().position(|v| !v.is_finite()) {
            return invalid(format!("non-finite sample at offset {i}"));
        }
        Ok(Self { grid, ell, data })
    }

    pub fn zeros(grid: &GridSpec, ell: usize) -> Self {
        Self {
            grid: grid.clone(),
            ell,
            data: vec![0.0; ell * grid.node_count()],
        }
    }

    /// Samples `f(x, out)` at every node; `out` has one slot per component.
    pub fn from_fn(grid: &GridSpec, ell: usize, f: impl Fn(&[f64], &mut [f64])) -> Self {
        let nodes = grid.node_count();
        let mut data = vec![0.0; ell * nodes];
        let mut out = vec![0.0; ell];
        for node in 0..nodes {
            let x = grid.coord(node);
            out.iter_mut().for_each(|v| *v = 0.0);
            f(&x[..grid.d], &mut out);
            for c in 0..ell {
                data[c * nodes + node] = out[c];
            }
        }
        Self {
            grid: grid.clone(),
            ell,
            data,
        }
    }

    /// Builds a field from per-component sample vectors.
    pub fn from_components(grid: &GridSpec, comps: Vec<Vec<f64>>) -> Result<Self> {
        let ell = comps.len();
        let data = comps.concat();
        Self::new(grid.clone(), ell, data)
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }
    pub fn ell(&self) -> usize {
        self.ell
    }
    pub fn data(&self) -> &[f64] {
        &self.data
    }
    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn component(&self, c: usize) -> &[f64] {
        let n = self.grid.node_count();
        &self.data[c * n..(c + 1) * n]
    }

    pub(crate) fn component_mut(&mut self, c: usize) -> &mut [f64] {
        let n = self.grid.node_count();
        &mut self.data[c * n..(c + 1) * n]
    }

    /// Euclidean norm of the sample vector at a node.
    pub fn magnitude_at(&self, node: usize) -> f64 {
        let n = self.grid.node_count();
        if self.ell == 1 {
            return self.data[node].abs();
        }
        let mut s = 0.0;
        for c in 0..self.ell {
            let v = self.data[c * n + node];
            s += v * v;
        }
        s.sqrt()
    }

    /// Pointwise Euclidean magnitude `|f(x)|` at every node.
    pub fn magnitudes(&self) -> Vec<f64> {
        (0..self.grid.node_count())
            .map(|i| self.magnitude_at(i))
            .collect()
    }

    /// `h^d · Σ f` per component, summed pairwise.
    pub fn quadrature(&self) -> Vec<f64> {
        let cell = self.grid.cell();
        (0..self.ell)
            .map(|c| cell * pairwise_sum(self.component(c)))
            .collect()
    }

    pub fn max_magnitude(&self) -> f64 {
        (0..self.grid.node_count())
            .map(|i| self.magnitude_at(i))
            .fold(0.0, f64::max)
    }

    pub fn is_zero(&self) -> bool {
        self.data.iter().all(|&v| v == 0.0)
    }

    pub fn scaled(&self, s: f64) -> Self {
        let mut out = self.clone();
        out.data.iter_mut().for_each(|v| *v *= s);
        out
    }

    /// `a·self + b·other` on the same grid.
    pub fn combine(&self, a: f64, other: &Field, b: f64) -> Result<Self> {
        if self.grid != other.grid || self.ell != other.ell {
            return invalid("fields live on different grids or have different component counts");
        }
        let data = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(x, y)| a * x + b * y)
            .collect();
        Ok(Self {
            grid: self.grid.clone(),
            ell: self.ell,
            data,
        })
    }

    /// Applies the matrix `m` (ell_out × ell, row-major) to every sample vector.
    pub fn map_components(&self, m: &[f64], ell_out: usize) -> Result<Self> {
        if m.len() != ell_out * self.ell {
            return invalid("matrix shape does not match the component count");
        }
        let n = self.grid.node_count();
        let mut data = vec![0.0; ell_out * n];
        for r in 0..ell_out {
            for c in 0..self.ell {
                let coef = m[r * self.ell + c];
                if coef == 0.0 {
                    continue;
                }
                let src = self.component(c);
                for (o, s) in data[r * n..(r + 1) * n].iter_mut().zip(src) {
                    *o += coef * s;
                }
            }
        }
        Ok(Self {
            grid: self.grid.clone(),
            ell: ell_out,
            data,
        })
    }

    /// Shifts the field by whole grid cells (periodically).
    pub fn shifted(&self, cells: &[i64]) -> Self {
        let g = &self.grid;
        let n = g.node_count();
        let mut out = Self::zeros(g, self.ell);
        for node in 0..n {
            let idx = g.multi_index(node);
            let mut dst = [0usize; 3];
            for a in 0..g.d {
                dst[a] = (idx[a] as i64 + cells[a]).rem_euclid(g.n as i64) as usize;
            }
            let to = g.node_index(&dst);
            for c in 0..self.ell {
                out.data[c * n + to] = self.data[c * n + node];
            }
        }
        out
    }

    /// Fraction of the L1 mass carried by nodes within one cell of the box boundary.
    pub fn boundary_mass_fraction(&self) -> f64 {
        let g = &self.grid;
        let mags = self.magnitudes();
        let total = pairwise_sum(&mags);
        if total == 0.0 {
            return 0.0;
        }
        let edge: Vec<f64> = mags
            .iter()
            .enumerate()
            .map(|(node, &m)| {
                let idx = g.multi_index(node);
                let near = idx[..g.d].iter().any(|&i| i == 0 || i + 1 == g.n);
                if near {
                    m
                } else {
                    0.0
                }
            })
            .collect();
        pairwise_sum(&edge) / total
    }

    pub fn check_boundary_decay(&self, tol: f64) -> Result<()> {
        let fraction = self.boundary_mass_fraction();
        if fraction > tol {
            return Err(Error::BoundaryDecay { fraction, tol });
        }
        Ok(())
    }

    /// Serializes into the `HALF1` container.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(37 + 8 * self.data.len());
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&(self.grid.d as u64).to_le_bytes());
        out.extend_from_slice(&(self.grid.n as u64).to_le_bytes());
        out.extend_from_slice(&self.grid.l.to_le_bytes());
        out.extend_from_slice(&(self.ell as u64).to_le_bytes());
        for v in &self.data {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> std::result::Result<Self, String> {
        if bytes.len() < 37 || &bytes[..5] != MAGIC {
            return Err("missing HALF1 header".into());
        }
        let word = |i: usize| -> [u8; 8] { bytes[5 + 8 * i..13 + 8 * i].try_into().unwrap() };
        let d = u64::from_le_bytes(word(0)) as usize;
        let n = u64::from_le_bytes(word(1)) as usize;
        let l = f64::from_le_bytes(word(2));
        let ell = u64::from_le_bytes(word(3)) as usize;
        let grid = GridSpec::new(d, n, l).map_err(|e| e.to_string())?;
        let body = &bytes[37..];
        if body.len() != 8 * ell * grid.node_count() {
            return Err(format!(
                "payload has {} bytes, expected {}",
                body.len(),
                8 * ell * grid.node_count()
            ));
        }
        let data = body
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        Field::new(grid, ell, data).map_err(|e| e.to_string())
    }

    pub fn write_bin(&self, path: &Path) -> Result<()> {
        let mut f = std::fs::File::create(path).map_err(io_err(path))?;
        f.write_all(&self.to_bytes()).map_err(io_err(path))
    }

    pub fn read_bin(path: &Path) -> Result<Self> {
        let mut bytes = Vec::new();
        std::fs::File::open(path)
            .and_then(|mut f| f.read_to_end(&mut bytes))
            .map_err(io_err(path))?;
        Self::from_bytes(&bytes).map_err(|msg| Error::Format {
            path: path.to_path_buf(),
            msg,
        })
    }

    /// CSV with node coordinates followed by the components.
    pub fn to_csv(&self) -> String {
        let g = &self.grid;
        let n = g.node_count();
        let mut s = String::new();
        let mut head: Vec<String> = (0..g.d).map(|a| format!("x{a}")).collect();
        head.extend((0..self.ell).map(|c| format!("f{c}")));
        s.push_str(&head.join(","));
        s.push('\n');
        for node in 0..n {
            let x = g.coord(node);
            let mut row: Vec<String> = x[..g.d].iter().map(|v| crate::lab::fmt_f64(*v)).collect();
            row.extend((0..self.ell).map(|c| crate::lab::fmt_f64(self.data[c * n + node])));
            s.push_str(&row.join(","));
            s.push('\n');
        }
        s
    }
}

/// Finite nonnegative atomic measure `Σ m_i δ_{x_i}`.
#[derive(Clone, Debug, PartialEq)]
pub struct PointMeasure {
    d: usize,
    positions: Vec<f64>,
    masses: Vec<f64>,
}

impl PointMeasure {
    pub fn new(d: usize, atoms: &[(Vec<f64>, f64)]) -> Result<Self> {
        if !(1..=3).contains(&d) {
            return invalid(format!("dimension must be 1, 2 or 3, got {d}"));
        }
        if atoms.is_empty() {
            return invalid("a point measure needs at least one atom");
        }
        let mut positions = Vec::with_capacity(d * atoms.len());
        let mut masses = Vec::with_capacity(atoms.len());
        for (x, m) in atoms {
            if x.len() != d {
                return invalid(format!(
                    "atom position has {} coordinates, expected {d}",
                    x.len()
                ));
            }
            if !(*m >= 0.0 && m.is_finite()) {
                return invalid(format!("atom mass must be finite and nonnegative, got {m}"));
            }
            if x.iter().any(|v| !v.is_finite()) {
                return invalid("atom position is not finite");
            }
            positions.extend_from_slice(x);
            masses.push(*m);
        }
        Ok(Self {
            d,
            positions,
            masses,
        })
    }

    /// Unit mass at the origin.
    pub fn dirac(d: usize) -> Self {
        Self::new(d, &[(vec![0.0; d], 1.0)]).unwrap()
    }

    pub fn d(&self) -> usize {
        self.d
    }
    pub fn len(&self) -> usize {
        self.masses.len()
    }
    pub fn is_empty(&self) -> bool {
        self.masses.is_empty()
    }
    pub fn position(&self, i: usize) -> &[f64] {
        &self.positions[i * self.d..(i + 1) * self.d]
    }
    pub fn mass(&self, i: usize) -> f64 {
        self.masses[i]
    }
    pub fn masses(&self) -> &[f64] {
        &self.masses
    }
    pub fn total_mass(&self) -> f64 {
        pairwise_sum(&self.masses)
    }

    pub fn scaled(&self, c: f64) -> Result<Self> {
        let atoms: Vec<_> = (0..self.len())
            .map(|i| (self.position(i).to_vec(), c * self.mass(i)))
            .collect();
        Self::new(self.d, &atoms)
    }

    pub fn translated(&self, shift: &[f64]) -> Self {
        let mut out = self.clone();
        for (i, x) in out.positions.iter_mut().enumerate() {
            *x += shift[i % self.d];
        }
        out
    }

    /// Mass-weighted mean position.
    pub fn centroid(&self) -> Vec<f64> {
        let total = self.total_mass();
        let mut c = vec![0.0; self.d];
        for i in 0..self.len() {
            for a in 0..self.d {
                c[a] += self.mass(i) * self.position(i)[a];
            }
        }
        if total > 0.0 {
            c.iter_mut().for_each(|v| *v /= total);
        }
        c
    }
}

/// Rank-one charge `a ⊗ μ`.
#[derive(Clone, Debug, PartialEq)]
pub struct VectorPointCharge {
    direction: Vec<f64>,
    base: PointMeasure,
}

impl VectorPointCharge {
    pub fn new(direction: Vec<f64>, base: PointMeasure) -> Result<Self> {
        let norm = direction.iter().map(|v| v * v).sum::<f64>().sqrt();
        if (norm - 1.0).abs() > 1e-12 {
            return invalid(format!(
                "charge direction must be a unit vector, |a| = {norm}"
            ));
        }
        Ok(Self { direction, base })
    }
    pub fn direction(&self) -> &[f64] {
        &self.direction
    }
    pub fn base(&self) -> &PointMeasure {
        &self.base
    }
}

/// Gaussian profile parameters shared by the generators.
#[derive(Clone, Debug, PartialEq)]
pub struct Bump {
    pub center: Vec<f64>,
    pub width: f64,
    pub amplitude: f64,
}

impl Bump {
    pub fn centered(d: usize, width: f64, amplitude: f64) -> Self {
        Self {
            center: vec![0.0; d],
            width,
            amplitude,
        }
    }
}

/// Integer image offsets needed to periodize a Gaussian of standard deviation `sigma`.
fn image_offsets(grid: &GridSpec, sigma: f64) -> Vec<[f64; 3]> {
    let period = 2.0 * grid.l;
    let reach = (9.0 * sigma / period).ceil() as i64 + 1;
    let mut out = Vec::new();
    let span = 2 * reach + 1;
    let total = span.pow(grid.d as u32);
    for code in 0..total {
        let mut rest = code;
        let mut off = [0.0; 3];
        for slot in off.iter_mut().take(grid.d) {
            *slot = ((rest % span) - reach) as f64 * period;
            rest /= span;
        }
        out.push(off);
    }
    out
}

/// Sum over periodic images of `kernel(x - c - image)`; the kernel receives the displacement.
fn periodized(
    grid: &GridSpec,
    center: &[f64],
    sigma: f64,
    ell: usize,
    kernel: impl Fn(&[f64], &mut [f64]),
) -> Field {
    let images = image_offsets(grid, sigma);
    let d = grid.d;
    Field::from_fn(grid, ell, |x, out| {
        let mut tmp = vec![0.0; ell];
        let mut r = [0.0; 3];
        for img in &images {
            for a in 0..d {
                r[a] = x[a] - center[a] - img[a];
            }
            tmp.iter_mut().for_each(|v| *v = 0.0);
            kernel(&r[..d], &mut tmp);
            for c in 0..ell {
                out[c] += tmp[c];
            }
        }
    })
}

fn check_bump(grid: &GridSpec, bump: &Bump) -> Result<()> {
    if bump.center.len() != grid.d {
        return invalid("bump center has the wrong dimension");
    }
    if bump.width < 4.0 * grid.h {
        return Err(Error::Resolution {
            what: "bump",
            detail: format!("width {} is below 4h = {}", bump.width, 4.0 * grid.h),
        });
    }
    Ok(())
}

/// Periodized scalar Gaussian `amplitude · exp(-|x - c|² / 2σ²)`.
pub fn gen_gaussian(grid: &GridSpec, bump: &Bump) -> Result<Field> {
    if bump.center.len() != grid.d {
        return invalid("bump center has the wrong dimension");
    }
    let s2 = bump.width * bump.width;
    let amp = bump.amplitude;
    Ok(periodized(grid, &bump.center, bump.width, 1, |r, out| {
        let q: f64 = r.iter().map(|v| v * v).sum();
        out[0] = amp * (-q / (2.0 * s2)).exp();
    }))
}

/// Gradient of a periodized Gaussian bump (`ell = d`).
pub fn gen_gradient_field(grid: &GridSpec, bump: &Bump) -> Result<Field> {
    check_bump(grid, bump)?;
    let s2 = bump.width * bump.width;
    let amp = bump.amplitude;
    let d = grid.d;
    Ok(periodized(grid, &bump.center, bump.width, d, |r, out| {
        let q: f64 = r.iter().map(|v| v * v).sum();
        let g = amp * (-q / (2.0 * s2)).exp();
        for a in 0..d {
            out[a] = -r[a] / s2 * g;
        }
    }))
}

/// Rotated gradient `(∂_y ψ, -∂_x ψ)` of a periodized Gaussian stream function (d = 2).
pub fn gen_divfree_field(grid: &GridSpec, stream: &Bump) -> Result<Field> {
    if grid.d != 2 {
        return invalid("stream-function generator requires d=2");
    }
    check_bump(grid, stream)?;
    let s2 = stream.width * stream.width;
    let amp = stream.amplitude;
    Ok(periodized(
        grid,
        &stream.center,
        stream.width,
        2,
        |r, out| {
            let q = r[0] * r[0] + r[1] * r[1];
            let g = amp * (-q / (2.0 * s2)).exp();
            out[0] = -r[1] / s2 * g;
            out[1] = r[0] / s2 * g;
        },
    ))
}

/// `a ⊗ (unit-mass Gaussian of standard deviation σ)`, periodized.
#[derive(Clone, Debug, PartialEq)]
pub struct NearDelta {
    pub sigma: f64,
    pub direction: Vec<f64>,
    pub center: Vec<f64>,
}

impl NearDelta {
    pub fn scalar(d: usize, sigma: f64) -> Self {
        Self {
            sigma,
            direction: vec![1.0],
            center: vec![0.0; d],
        }
    }
}

pub fn gen_near_delta(grid: &GridSpec, spec: &NearDelta) -> Result<Field> {
    if spec.sigma < 2.0 * grid.h {
        return Err(Error::Resolution {
            what: "delta approximation",
            detail: format!("sigma {} is below 2h = {}", spec.sigma, 2.0 * grid.h),
        });
    }
    if spec.center.len() != grid.d {
        return invalid("center has the wrong dimension");
    }
    let norm = spec.direction.iter().map(|v| v * v).sum::<f64>().sqrt();
    if (norm - 1.0).abs() > 1e-12 {
        return invalid(format!("direction must be a unit vector, |a| = {norm}"));
    }
    let s2 = spec.sigma * spec.sigma;
    let peak = (2.0 * PI * s2).powf(-(grid.d as f64) / 2.0);
    let a = spec.direction.clone();
    let ell = a.len();
    Ok(periodized(grid, &spec.center, spec.sigma, ell, |r, out| {
        let q: f64 = r.iter().map(|v| v * v).sum();
        let g = peak * (-q / (2.0 * s2)).exp();
        for c in 0..ell {
            out[c] = a[c] * g;
        }
    }))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_spacing_and_nodes() {
        let g = GridSpec::new(1, 16, 8.0).unwrap();
        assert_eq!(g.h(), 1.0);
        let xs: Vec<f64> = (0..16).map(|i| g.coord(i)[0]).collect();
        assert_eq!(xs[0], -8.0);
        assert_eq!(xs[15], 7.0);
        let g2 = GridSpec::new(2, 64, 10.0).unwrap();
        assert_eq!(g2.node_count(), 4096);
        assert_eq!(g2.h(), 0.3125);
    }

    #[test]
    fn odd_n_rejected() {
        let err = GridSpec::new(1, 15, 8.0).unwrap_err();
        assert!(err.to_string().contains("N must be even"));
        assert!(GridSpec::new(4, 16, 1.0).is_err());
        assert!(GridSpec::new(1, 16, 0.0).is_err());
    }

    #[test]
    fn constant_quadrature_is_exact() {
        let g = GridSpec::new(2, 16, 8.0).unwrap();
        let f = Field::from_fn(&g, 1, |_, o| o[0] = 3.0);
        assert_eq!(f.quadrature()[0], 3.0 * 256.0);
    }

    #[test]
    fn odd_integrand_vanishes() {
        let g = GridSpec::new(1, 256, 8.0).unwrap();
        let f = Field::from_fn(&g, 1, |x, o| o[0] = x[0] * (-x[0] * x[0]).exp());
        assert!(f.quadrature()[0].abs() < 1e-14);
    }

    #[test]
    fn node_index_round_trip() {
        let g = GridSpec::new(3, 16, 1.0).unwrap();
        for node in [0, 1, 17, 300, 4095] {
            assert_eq!(g.node_index(&g.multi_index(node)), node);
        }
    }

    #[test]
    fn near_delta_tensor_structure() {
        let g = GridSpec::new(1, 256, 8.0).unwrap();
        let spec = NearDelta {
            sigma: 0.5,
            direction: vec![0.0, 1.0],
            center: vec![0.0],
        };
        let f = gen_near_delta(&g, &spec).unwrap();
        assert!(f.component(0).iter().all(|&v| v == 0.0));
        assert!((f.quadrature()[1] - 1.0).abs() < 1e-8);
    }

    #[test]
    fn under_resolved_inputs_rejected() {
        let g = GridSpec::new(1, 64, 8.0).unwrap();
        assert!(gen_near_delta(&g, &NearDelta::scalar(1, 0.1)).is_err());
        assert!(gen_gradient_field(&g, &Bump::centered(1, 0.5, 1.0)).is_err());
        let err = gen_divfree_field(&g, &Bump::centered(1, 2.0, 1.0)).unwrap_err();
        assert!(err.to_string().contains("d=2"));
    }

    #[test]
    fn negative_mass_rejected() {
        assert!(PointMeasure::new(1, &[(vec![0.0], -1.0)]).is_err());
        assert!(PointMeasure::new(1, &[]).is_err());
    }

    #[test]
    fn container_round_trip() {
        let g = GridSpec::new(2, 16, 3.0).unwrap();
        let f = Field::from_fn(&g, 2, |x, o| {
            o[0] = x[0];
            o[1] = x[1] * x[0];
        });
        let back = Field::from_bytes(&f.to_bytes()).unwrap();
        assert_eq!(back, f);
        assert!(Field::from_bytes(b"HALF2").is_err());
    }

    #[test]
    fn boundary_fraction_flags_wide_inputs() {
        let g = GridSpec::new(1, 64, 4.0).unwrap();
        let wide = Field::from_fn(&g, 1, |_, o| o[0] = 1.0);
        assert!(wide.check_boundary_decay(1e-6).is_err());
        let narrow = gen_near_delta(&g, &NearDelta::scalar(1, 0.5)).unwrap();
        assert!(narrow.check_boundary_decay(1e-6).is_ok());
    }
}
