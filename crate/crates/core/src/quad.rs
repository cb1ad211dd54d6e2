//! Small numerical kernels: Gauss–Legendre rules, scaled Bessel `I0`, half-integer Gamma and
//! tensor Chebyshev interpolation.

use std::f64::consts::PI;

/// Gauss–Legendre nodes and weights on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..(n + 1) / 2 {
        let mut z = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * z * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (z * p1 - p0) / (z * z - 1.0);
            let dz = p1 / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        w[i] = 2.0 / ((1.0 - z * z) * dp * dp);
        w[n - 1 - i] = w[i];
    }
    if n == 1 {
        x[0] = 0.0;
        w[0] = 2.0;
    }
    (x, w)
}

/// Composite Gauss–Legendre rule on `[a, b]` as explicit (node, weight) pairs.
pub fn composite_rule(a: f64, b: f64, panels: usize, order: usize) -> Vec<(f64, f64)> {
    let (x, w) = gauss_legendre(order);
    let width = (b - a) / panels as f64;
    let mut out = Vec::with_capacity(panels * order);
    for p in 0..panels {
        let lo = a + p as f64 * width;
        for (xi, wi) in x.iter().zip(&w) {
            out.push((lo + 0.5 * width * (xi + 1.0), 0.5 * width * wi));
        }
    }
    out
}

/// `∫_a^b f` by a composite Gauss–Legendre rule.
pub fn integrate(f: impl Fn(f64) -> f64, a: f64, b: f64, panels: usize, order: usize) -> f64 {
    let terms: Vec<f64> = composite_rule(a, b, panels, order)
        .into_iter()
        .map(|(x, w)| w * f(x))
        .collect();
    crate::field_grid::pairwise_sum(&terms)
}

/// `e^{-x} I_0(x)` for `x ≥ 0`.
pub fn bessel_i0e(x: f64) -> f64 {
    let x = x.abs();
    if x <= 30.0 {
        // power series; every term is positive
        let q = 0.25 * x * x;
        let mut term = 1.0;
        let mut sum = 1.0;
        let mut k = 1.0;
        while term > 1e-17 * sum {
            term *= q / (k * k);
            sum += term;
            k += 1.0;
        }
        sum * (-x).exp()
    } else {
        // asymptotic expansion, accurate to rounding for x > 30
        let mut term = 1.0;
        let mut sum = 1.0;
        for k in 1..30 {
            let m = (2 * k - 1) as f64;
            let next = term * m * m / (8.0 * k as f64 * x);
            if next.abs() > term.abs() {
                break;
            }
            term = next;
            sum += term;
            if term < 1e-17 * sum {
                break;
            }
        }
        sum / (2.0 * PI * x).sqrt()
    }
}

/// `Γ(n/2)` for a positive integer `n`.
pub fn gamma_half(n: u32) -> f64 {
    assert!(n > 0);
    let mut g = if n % 2 == 0 { 1.0 } else { PI.sqrt() };
    let mut k = if n % 2 == 0 { 2 } else { 1 };
    while k < n {
        g *= k as f64 / 2.0;
        k += 2;
    }
    g
}

/// Volume of the unit ball in `ℝ^d`.
pub fn unit_ball_volume(d: usize) -> f64 {
    PI.powf(d as f64 / 2.0) / gamma_half(d as u32 + 2)
}

/// Tensor-product Chebyshev interpolant on `[0, 1]^d`.
#[derive(Clone, Debug)]
pub struct Chebyshev {
    d: usize,
    n: usize,
    coef: Vec<f64>,
}

impl Chebyshev {
    /// Interpolates `f` at `(n+1)^d` Chebyshev points.
    pub fn fit(d: usize, n: usize, f: impl Fn(&[f64]) -> f64) -> Self {
        let m = n + 1;
        let nodes: Vec<f64> = (0..m)
            .map(|i| 0.5 * (1.0 + (PI * (i as f64 + 0.5) / m as f64).cos()))
            .collect();
        let total = m.pow(d as u32);
        let mut vals = vec![0.0; total];
        let mut x = vec![0.0; d];
        for (code, v) in vals.iter_mut().enumerate() {
            let mut rest = code;
            for a in (0..d).rev() {
                x[a] = nodes[rest % m];
                rest /= m;
            }
            *v = f(&x);
        }
        // separable discrete cosine transform along each axis
        let mut coef = vals;
        for axis in 0..d {
            let stride = m.pow((d - 1 - axis) as u32);
            let mut next = vec![0.0; total];
            for code in 0..total {
                let i = (code / stride) % m;
                let base = code - i * stride;
                let mut s = 0.0;
                for jn in 0..m {
                    s += coef[base + jn * stride]
                        * (PI * i as f64 * (jn as f64 + 0.5) / m as f64).cos();
                }
                next[code] = s * if i == 0 { 1.0 } else { 2.0 } / m as f64;
            }
            coef = next;
        }
        Self { d, n, coef }
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        let m = self.n + 1;
        let mut t = [[0.0f64; 64]; 3];
        for a in 0..self.d {
            let u = 2.0 * x[a] - 1.0;
            t[a][0] = 1.0;
            if m > 1 {
                t[a][1] = u;
            }
            for k in 2..m {
                t[a][k] = 2.0 * u * t[a][k - 1] - t[a][k - 2];
            }
        }
        match self.d {
            1 => (0..m).map(|i| self.coef[i] * t[0][i]).sum(),
            2 => {
                let mut s = 0.0;
                for i in 0..m {
                    let mut r = 0.0;
                    for j in 0..m {
                        r += self.coef[i * m + j] * t[1][j];
                    }
                    s += r * t[0][i];
                }
                s
            }
            _ => {
                let mut s = 0.0;
                for i in 0..m {
                    for j in 0..m {
                        let mut r = 0.0;
                        for k in 0..m {
                            r += self.coef[(i * m + j) * m + k] * t[2][k];
                        }
                        s += r * t[0][i] * t[1][j];
                    }
                }
                s
            }
        }
    }
}
