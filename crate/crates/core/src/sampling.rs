//! Seeded random elements of the discrete form domain and random
//! piecewise-smooth functions on a single edge.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::fem::FormAssembly;
use crate::funcspace::{GridFunction, Mesh};
use crate::graph::End;
use crate::linalg::{CVector, ZERO};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SampleKind {
    /// Independent values at every degree of freedom.
    Noise,
    /// A few random Fourier modes per edge, random vertex values.
    Smooth,
    /// Random vertex values decaying into the edges over a short length.
    BoundaryLayer,
}

pub struct FormSampler {
    rng: ChaCha8Rng,
}

impl FormSampler {
    pub fn new(seed: u64) -> Self {
        FormSampler {
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    fn complex(&mut self) -> Complex64 {
        Complex64::new(self.rng.gen_range(-1.0..1.0), self.rng.gen_range(-1.0..1.0))
    }

    pub fn sample(&mut self, fa: &FormAssembly, kind: SampleKind) -> CVector {
        let mut x = CVector::zeros(fa.dim());
        let mesh = fa.mesh().clone();
        for v in 0..fa.vertex_count() {
            let (base, d) = fa.vertex_dofs(v);
            for j in 0..d {
                x[base + j] = self.complex() * 3.0;
            }
        }
        for e in 0..mesh.edge_count() {
            let l = mesh.length(e);
            let n = mesh.elements(e);
            match kind {
                SampleKind::Noise => {
                    for k in 1..n {
                        x[fa.interior_dof(e, k).unwrap()] = self.complex();
                    }
                }
                SampleKind::Smooth => {
                    let modes: Vec<(f64, Complex64)> = (0..4)
                        .map(|_| (self.rng.gen_range(0.0..8.0), self.complex()))
                        .collect();
                    let a = fa.end_value(&x, e, End::Init);
                    let b = fa.end_value(&x, e, End::Term);
                    for k in 1..n {
                        let t = mesh.node(e, k);
                        let s = t / l;
                        let mut z = a * (1.0 - s) + b * s;
                        for &(freq, amp) in &modes {
                            z += amp * (freq * t).sin();
                        }
                        x[fa.interior_dof(e, k).unwrap()] = z;
                    }
                }
                SampleKind::BoundaryLayer => {
                    let delta = self.rng.gen_range(2.0..6.0) * mesh.step(e);
                    let a = fa.end_value(&x, e, End::Init);
                    let b = fa.end_value(&x, e, End::Term);
                    for k in 1..n {
                        let t = mesh.node(e, k);
                        x[fa.interior_dof(e, k).unwrap()] =
                            a * (-t / delta).exp() + b * (-(l - t) / delta).exp();
                    }
                }
            }
        }
        x
    }

    /// `n` samples cycling through all kinds.
    pub fn samples(&mut self, fa: &FormAssembly, n: usize) -> Vec<CVector> {
        const KINDS: [SampleKind; 3] = [
            SampleKind::Noise,
            SampleKind::Smooth,
            SampleKind::BoundaryLayer,
        ];
        (0..n).map(|i| self.sample(fa, KINDS[i % 3])).collect()
    }

    /// A random piecewise-smooth function on a single-edge mesh: a smooth part
    /// plus one jump in the derivative at a random interior point.
    pub fn edge_function(&mut self, mesh: &Mesh, e: usize) -> GridFunction {
        let l = mesh.length(e);
        let c0 = self.complex() * 2.0;
        let modes: Vec<(f64, Complex64)> = (0..3)
            .map(|_| (self.rng.gen_range(0.0..10.0), self.complex()))
            .collect();
        let kink = self.rng.gen_range(0.0..l);
        let slope = self.complex() * 3.0;
        let scale: f64 = self.rng.gen_range(-3.0f64..3.0).exp();
        GridFunction::from_fn(mesh, |edge, t| {
            if edge != e {
                return ZERO;
            }
            let mut z = c0 + slope * (t - kink).max(0.0);
            for &(f, a) in &modes {
                z += a * (f * t).cos();
            }
            z * scale
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::boundary::{BoundaryCondition, Preset};
    use crate::fem::assemble;
    use crate::fixtures;

    #[test]
    fn seeded_samples_repeat() {
        let g = fixtures::star(&[1.0, 2.0, 3.0]);
        let bc = BoundaryCondition::uniform(&g, Preset::Kirchhoff);
        let fa = assemble(&g, &bc, 0.2).unwrap();
        let a = FormSampler::new(7).samples(&fa, 6);
        let b = FormSampler::new(7).samples(&fa, 6);
        assert_eq!(a, b);
        let c = FormSampler::new(8).samples(&fa, 6);
        assert_ne!(a, c);
    }
}
