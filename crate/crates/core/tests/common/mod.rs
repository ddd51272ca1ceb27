#![allow(dead_code)]

pub mod oracles;

use chns_core::grid::{mean_c, Parity};
use chns_core::{BcMode, Field, MacVelocity, Stagger};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const BOTH: [BcMode; 2] = [BcMode::PhysicalNeumannFreeSlip, BcMode::Periodic];

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Uniform values in `[-1, 1)` on the owned samples, ghosts filled for `bc`.
pub fn random_field(rng: &mut ChaCha8Rng, n: usize, stagger: Stagger, bc: BcMode) -> Field {
    let mut f = Field::zeros(n, stagger);
    for j in f.owned_y() {
        for i in f.owned_x() {
            f.set(i, j, rng.gen_range(-1.0..1.0));
        }
    }
    f.with_ghosts(bc)
}

pub fn random_velocity(rng: &mut ChaCha8Rng, n: usize, bc: BcMode) -> MacVelocity {
    MacVelocity::new(
        random_field(rng, n, Stagger::EdgeX, bc),
        random_field(rng, n, Stagger::EdgeY, bc),
    )
}

/// Cell field with values strictly inside `(-bound, bound)`.
pub fn random_phase(rng: &mut ChaCha8Rng, n: usize, bound: f64, bc: BcMode) -> Field {
    let mut f = Field::cell(n);
    for j in 0..n as isize {
        for i in 0..n as isize {
            f.set(i, j, bound * rng.gen_range(-1.0..1.0));
        }
    }
    f.with_ghosts(bc)
}

/// Discretely divergence-free velocity `(D_y psi, -D_x psi)` from a random
/// node stream function (zero on the walls in physical mode).
pub fn solenoidal_velocity(rng: &mut ChaCha8Rng, n: usize, bc: BcMode) -> MacVelocity {
    let psi = random_field(rng, n, Stagger::Node, bc);
    let h = 1.0 / n as f64;
    let mut ux = Field::zeros(n, Stagger::EdgeX);
    for j in ux.owned_y() {
        for i in ux.owned_x() {
            ux.set(i, j, (psi.get(i, j + 1) - psi.get(i, j)) / h);
        }
    }
    let mut uy = Field::zeros(n, Stagger::EdgeY);
    for j in uy.owned_y() {
        for i in uy.owned_x() {
            uy.set(i, j, -(psi.get(i + 1, j) - psi.get(i, j)) / h);
        }
    }
    MacVelocity::new(ux, uy).with_ghosts(bc)
}

/// Smooth random mean-zero cell field: a few low cosine (or Fourier) modes
/// with random amplitudes.
pub fn smooth_mean_zero(rng: &mut ChaCha8Rng, n: usize, bc: BcMode) -> Field {
    use std::f64::consts::PI;
    let mut coef = vec![];
    for k in 0..4 {
        for l in 0..4 {
            if k + l > 0 {
                coef.push((
                    k as f64,
                    l as f64,
                    rng.gen_range(-1.0..1.0),
                    rng.gen_range(0.0..2.0 * PI),
                ));
            }
        }
    }
    let f = Field::from_fn(n, Stagger::Cell, |x, y| {
        coef.iter()
            .map(|&(k, l, a, ph)| match bc {
                BcMode::PhysicalNeumannFreeSlip => a * (k * PI * x).cos() * (l * PI * y).cos(),
                BcMode::Periodic => a * (2.0 * PI * (k * x + l * y) + ph).cos(),
            })
            .sum()
    });
    let m = mean_c(&f);
    let mut f = f.map(|v| v - m);
    f.fill_ghosts(bc);
    f
}

/// Reflection/wrap of an index along one axis, written from the boundary
/// definitions: returns the owned index and the sign, or `None` for a
/// sample that is identically zero.
pub fn resolve(k: isize, n: isize, node: bool, parity: Parity, bc: BcMode) -> Option<(isize, f64)> {
    match bc {
        BcMode::Periodic => Some((k.rem_euclid(n), 1.0)),
        BcMode::PhysicalNeumannFreeSlip => {
            let s = if parity == Parity::Even { 1.0 } else { -1.0 };
            if node {
                if parity == Parity::Odd && (k == 0 || k == n) {
                    return None;
                }
                if k < 0 {
                    Some((-k, s))
                } else if k > n {
                    Some((2 * n - k, s))
                } else {
                    Some((k, 1.0))
                }
            } else if k < 0 {
                Some((-1 - k, s))
            } else if k >= n {
                Some((2 * n - 1 - k, s))
            } else {
                Some((k, 1.0))
            }
        }
    }
}

/// Value of the extension of `f` (owned samples only are trusted) at any
/// index in the ghost frame.
pub fn ext(f: &Field, bc: BcMode, i: isize, j: isize) -> f64 {
    let (px, py) = f.stagger().natural_parity();
    ext_with(f, bc, px, py, i, j)
}

pub fn ext_with(f: &Field, bc: BcMode, px: Parity, py: Parity, i: isize, j: isize) -> f64 {
    let n = f.n() as isize;
    let st = f.stagger();
    match (
        resolve(i, n, st.node_in_x(), px, bc),
        resolve(j, n, st.node_in_y(), py, bc),
    ) {
        (Some((a, sa)), Some((b, sb))) => sa * sb * f.get(a, b),
        _ => 0.0,
    }
}

/// Relative mismatch `|a - b| / max(scale, tiny)`.
pub fn rel(a: f64, b: f64, scale: f64) -> f64 {
    (a - b).abs() / scale.max(1e-300)
}

pub fn max_diff_interior(a: &Field, b: &Field) -> f64 {
    let n = a.n() as isize;
    let mut m: f64 = 0.0;
    for j in 0..n {
        for i in 0..n {
            m = m.max((a.get(i, j) - b.get(i, j)).abs());
        }
    }
    m
}
