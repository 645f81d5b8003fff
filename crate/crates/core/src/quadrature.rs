//! Gauss–Legendre rules.

use std::f64::consts::PI;

use num_complex::Complex64;
use std::sync::OnceLock;

/// Nodes and weights of the `n`-point rule on `[-1, 1]` (Newton on P_n).
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut z = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre(n, z);
            dp = d;
            let dz = p / d;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre(n, z);
        if d != 0.0 {
            dp = d;
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        let wi = 2.0 / ((1.0 - z * z) * dp * dp);
        w[i] = wi;
        w[n - 1 - i] = wi;
    }
    (x, w)
}

fn legendre(n: usize, z: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = z;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let p2 = ((2 * k - 1) as f64 * z * p1 - (k - 1) as f64 * p0) / k as f64;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (z * p1 - p0) / (z * z - 1.0);
    (p1, d)
}

/// The 8-point rule, cached.
pub fn gl8() -> &'static (Vec<f64>, Vec<f64>) {
    static RULE: OnceLock<(Vec<f64>, Vec<f64>)> = OnceLock::new();
    RULE.get_or_init(|| gauss_legendre(8))
}

/// Composite 8-point Gauss–Legendre over `[a, b]` split into `cells` pieces.
pub fn integrate<F: FnMut(f64) -> f64>(mut f: F, a: f64, b: f64, cells: usize) -> f64 {
    let (x, w) = gl8();
    let h = (b - a) / cells as f64;
    let mut total = 0.0;
    for k in 0..cells {
        let mid = a + (k as f64 + 0.5) * h;
        for (xi, wi) in x.iter().zip(w) {
            total += wi * f(mid + 0.5 * h * xi);
        }
    }
    0.5 * h * total
}

/// [`integrate`] for complex integrands.
pub fn integrate_complex<F: FnMut(f64) -> Complex64>(
    mut f: F,
    a: f64,
    b: f64,
    cells: usize,
) -> Complex64 {
    let (x, w) = gl8();
    let h = (b - a) / cells as f64;
    let mut total = Complex64::new(0.0, 0.0);
    for k in 0..cells {
        let mid = a + (k as f64 + 0.5) * h;
        for (xi, wi) in x.iter().zip(w) {
            total += f(mid + 0.5 * h * xi) * *wi;
        }
    }
    total * (0.5 * h)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rules_integrate_polynomials_exactly() {
        for n in [2usize, 5, 8, 12] {
            let (x, w) = gauss_legendre(n);
            assert!((w.iter().sum::<f64>() - 2.0).abs() < 1e-13);
            let deg = 2 * n - 1;
            let s: f64 = x
                .iter()
                .zip(&w)
                .map(|(x, w)| w * x.powi(deg as i32 - 1))
                .sum();
            let exact = if (deg - 1) % 2 == 0 {
                2.0 / deg as f64
            } else {
                0.0
            };
            assert!((s - exact).abs() < 1e-13, "n={n}");
        }
    }

    #[test]
    fn composite_sine() {
        let v = integrate(f64::sin, 0.0, PI, 4);
        assert!((v - 2.0).abs() < 1e-13);
    }
}
