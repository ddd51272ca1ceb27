//! Exact inverses of constant-coefficient polynomials in the five-point
//! Laplacian, used as preconditioners.
//!
//! On each axis the one-dimensional second difference (with the ghost closure
//! of the field's boundary condition) has a closed-form orthonormal
//! eigenbasis: real Fourier modes for periodic axes, cosines for mirrored
//! cell-type axes and sines for Dirichlet node-type axes. The 2-D operator is
//! diagonal in the tensor basis, so `p(-lap)^{-1}` costs four dense
//! matrix products.

use std::f64::consts::PI;

use crate::grid::{BcMode, Field, Parity, Stagger};

#[derive(Clone, Debug)]
struct AxisBasis {
    first: isize,
    m: usize,
    /// Row-major `m x m`; row `k` holds mode `k` sampled at the unknowns.
    modes: Vec<f64>,
    /// Eigenvalues of the negative second difference.
    eig: Vec<f64>,
}

impl AxisBasis {
    fn new(n: usize, node: bool, bc: BcMode, parity: Parity) -> Self {
        let h = 1.0 / n as f64;
        let nf = n as f64;
        let sin2 = |t: f64| 4.0 / (h * h) * t.sin().powi(2);
        match (bc, node, parity) {
            (BcMode::Periodic, _, _) => {
                let m = n;
                let mut modes = vec![0.0; m * m];
                let mut eig = vec![0.0; m];
                let mut row = 0;
                let mut push = |modes: &mut Vec<f64>, eig: &mut Vec<f64>, lam: f64, f: &dyn Fn(usize) -> f64| {
                    for l in 0..m {
                        modes[row * m + l] = f(l);
                    }
                    eig[row] = lam;
                    row += 1;
                };
                push(&mut modes, &mut eig, 0.0, &|_| 1.0 / nf.sqrt());
                let c = (2.0 / nf).sqrt();
                let mut k = 1;
                while 2 * k < n {
                    let lam = sin2(PI * k as f64 / nf);
                    let w = 2.0 * PI * k as f64 / nf;
                    push(&mut modes, &mut eig, lam, &|l| c * (w * l as f64).cos());
                    push(&mut modes, &mut eig, lam, &|l| c * (w * l as f64).sin());
                    k += 1;
                }
                if n % 2 == 0 {
                    let lam = sin2(PI / 2.0);
                    push(&mut modes, &mut eig, lam, &|l| {
                        if l % 2 == 0 {
                            1.0 / nf.sqrt()
                        } else {
                            -1.0 / nf.sqrt()
                        }
                    });
                }
                AxisBasis {
                    first: 0,
                    m,
                    modes,
                    eig,
                }
            }
            (BcMode::PhysicalNeumannFreeSlip, false, Parity::Even) => {
                let m = n;
                let mut modes = vec![0.0; m * m];
                let mut eig = vec![0.0; m];
                for k in 0..m {
                    let c = if k == 0 { (1.0 / nf).sqrt() } else { (2.0 / nf).sqrt() };
                    for l in 0..m {
                        modes[k * m + l] = c * (PI * k as f64 * (l as f64 + 0.5) / nf).cos();
                    }
                    eig[k] = sin2(PI * k as f64 / (2.0 * nf));
                }
                AxisBasis {
                    first: 0,
                    m,
                    modes,
                    eig,
                }
            }
            (BcMode::PhysicalNeumannFreeSlip, true, Parity::Odd) => {
                let m = n - 1;
                let mut modes = vec![0.0; m * m];
                let mut eig = vec![0.0; m];
                let c = (2.0 / nf).sqrt();
                for k in 0..m {
                    let kk = (k + 1) as f64;
                    for l in 0..m {
                        modes[k * m + l] = c * (PI * kk * (l + 1) as f64 / nf).sin();
                    }
                    eig[k] = sin2(PI * kk / (2.0 * nf));
                }
                AxisBasis {
                    first: 1,
                    m,
                    modes,
                    eig,
                }
            }
            other => panic!("no spectral basis for axis configuration {other:?}"),
        }
    }
}

/// Tensor-product eigenbasis of the five-point Laplacian for one staggering.
#[derive(Clone, Debug)]
pub struct SpectralSolver {
    n: usize,
    stagger: Stagger,
    bc: BcMode,
    bx: AxisBasis,
    by: AxisBasis,
}

impl SpectralSolver {
    pub fn new(n: usize, stagger: Stagger, bc: BcMode) -> Self {
        let (px, py) = stagger.natural_parity();
        SpectralSolver {
            n,
            stagger,
            bc,
            bx: AxisBasis::new(n, stagger.node_in_x(), bc, px),
            by: AxisBasis::new(n, stagger.node_in_y(), bc, py),
        }
    }

    pub fn stagger(&self) -> Stagger {
        self.stagger
    }

    /// Largest eigenvalue of `-lap` on this staggering.
    pub fn max_eigenvalue(&self) -> f64 {
        let mx = self.bx.eig.iter().cloned().fold(0.0, f64::max);
        let my = self.by.eig.iter().cloned().fold(0.0, f64::max);
        mx + my
    }

    /// Applies `g(-lap)` where `g` acts on the eigenvalues of `-lap`. The
    /// result is ghost-filled.
    pub fn apply(&self, f: &Field, g: impl Fn(f64) -> f64) -> Field {
        assert_eq!(f.n(), self.n);
        assert_eq!(f.stagger(), self.stagger);
        let (mx, my) = (self.bx.m, self.by.m);
        let (fx, fy) = (self.bx.first, self.by.first);

        // values laid out row-major with x as the row index
        let mut vals = vec![0.0; mx * my];
        for a in 0..mx {
            for b in 0..my {
                vals[a * my + b] = f.get(fx + a as isize, fy + b as isize);
            }
        }
        let mut tmp = vec![0.0; mx * my];
        let mut coef = vec![0.0; mx * my];
        // coef = Qx * vals * Qy^T
        gemm(mx, mx, my, &self.bx.modes, false, &vals, &mut tmp);
        gemm_rt(mx, my, my, &tmp, &self.by.modes, &mut coef);
        for a in 0..mx {
            for b in 0..my {
                coef[a * my + b] *= g(self.bx.eig[a] + self.by.eig[b]);
            }
        }
        // vals = Qx^T * coef * Qy
        gemm(mx, mx, my, &self.bx.modes, true, &coef, &mut tmp);
        gemm(mx, my, my, &tmp, false, &self.by.modes, &mut vals);

        let mut out = Field::zeros(self.n, self.stagger);
        for a in 0..mx {
            for b in 0..my {
                out.set(fx + a as isize, fy + b as isize, vals[a * my + b]);
            }
        }
        out.fill_ghosts(self.bc);
        out
    }
}

/// `c = op(a) * b` with `a` row-major `m x k` (or its transpose), `b` row-major `k x n`.
fn gemm(m: usize, k: usize, n: usize, a: &[f64], transpose_a: bool, b: &[f64], c: &mut [f64]) {
    let (rsa, csa) = if transpose_a { (1, m as isize) } else { (k as isize, 1) };
    // SAFETY: slice lengths cover the strided extents passed to dgemm.
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            1.0,
            a.as_ptr(),
            rsa,
            csa,
            b.as_ptr(),
            n as isize,
            1,
            0.0,
            c.as_mut_ptr(),
            n as isize,
            1,
        );
    }
}

/// `c = a * b^T` with `a` row-major `m x k`, `b` row-major `n x k`.
fn gemm_rt(m: usize, k: usize, n: usize, a: &[f64], b: &[f64], c: &mut [f64]) {
    // SAFETY: as above.
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            1.0,
            a.as_ptr(),
            k as isize,
            1,
            b.as_ptr(),
            1,
            k as isize,
            0.0,
            c.as_mut_ptr(),
            n as isize,
            1,
        );
    }
}
