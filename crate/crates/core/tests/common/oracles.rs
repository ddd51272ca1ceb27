//! Dense-matrix and brute-force stencil oracles on small grids. Each
//! `*_err` function returns the largest mismatch against the library,
//! divided by the natural scale of the operator (`n` per difference).

use chns_core::discrete_ops::{convect_velocity, div_phi_u, phi_grad_mu};
use chns_core::grid::{average, diff, diff_long, div, grad, inner, lap, AverageKind, Axis, DiffKind, Parity};
use chns_core::{BcMode, Field, MacVelocity, Stagger};

use super::*;

pub const ALL_STAGGERS: [Stagger; 4] = [Stagger::Cell, Stagger::EdgeX, Stagger::EdgeY, Stagger::Node];

/// 1-D second-difference matrix on `n` cell samples.
pub fn lap1_cell(n: usize, bc: BcMode) -> Vec<Vec<f64>> {
    let h2 = 1.0 / (n * n) as f64;
    let mut m = vec![vec![0.0; n]; n];
    for k in 0..n {
        m[k][k] = -2.0 / h2;
        match bc {
            BcMode::Periodic => {
                m[k][(k + 1) % n] += 1.0 / h2;
                m[k][(k + n - 1) % n] += 1.0 / h2;
            }
            BcMode::PhysicalNeumannFreeSlip => {
                if k > 0 {
                    m[k][k - 1] += 1.0 / h2;
                } else {
                    m[k][k] += 1.0 / h2;
                }
                if k + 1 < n {
                    m[k][k + 1] += 1.0 / h2;
                } else {
                    m[k][k] += 1.0 / h2;
                }
            }
        }
    }
    m
}

/// 1-D second-difference matrix on the `n` node samples `0..n` of a
/// Dirichlet (physical) or periodic axis.
pub fn lap1_node(n: usize, bc: BcMode) -> Vec<Vec<f64>> {
    match bc {
        BcMode::Periodic => lap1_cell(n, bc),
        BcMode::PhysicalNeumannFreeSlip => {
            let h2 = 1.0 / (n * n) as f64;
            let mut m = vec![vec![0.0; n]; n];
            for k in 1..n {
                m[k][k] = -2.0 / h2;
                if k > 1 {
                    m[k][k - 1] = 1.0 / h2;
                }
                if k + 1 < n {
                    m[k][k + 1] = 1.0 / h2;
                }
            }
            m
        }
    }
}

/// `(I (x) Lx + Ly (x) I) f` over the summation range.
pub fn kron_apply(lx: &[Vec<f64>], ly: &[Vec<f64>], f: &Field) -> Vec<Vec<f64>> {
    let n = f.n();
    let mut out = vec![vec![0.0; n]; n];
    for j in 0..n {
        for i in 0..n {
            let mut s = 0.0;
            for k in 0..n {
                s += lx[i][k] * f.get(k as isize, j as isize);
                s += ly[j][k] * f.get(i as isize, k as isize);
            }
            out[j][i] = s;
        }
    }
    out
}

pub fn lap_matrices(st: Stagger, n: usize, bc: BcMode) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
    let pick = |node: bool| if node { lap1_node(n, bc) } else { lap1_cell(n, bc) };
    (pick(st.node_in_x()), pick(st.node_in_y()))
}

pub fn laplacian_err(seed: u64) -> f64 {
    let mut r = rng(seed);
    let mut worst: f64 = 0.0;
    for bc in BOTH {
        for st in ALL_STAGGERS {
            for n in [4, 5, 6] {
                let f = random_field(&mut r, n, st, bc);
                let (lx, ly) = lap_matrices(st, n, bc);
                let want = kron_apply(&lx, &ly, &f);
                let got = lap(&f);
                for j in 0..n {
                    for i in 0..n {
                        let e = (got.get(i as isize, j as isize) - want[j][i]).abs() / (n * n) as f64;
                        worst = worst.max(e);
                    }
                }
            }
        }
    }
    worst
}

/// Entry `(k, m)` of the cells-to-nodes difference matrix along one axis.
fn d_entry(n: usize, bc: BcMode, k: usize, m: usize) -> f64 {
    let (hi, lo) = match bc {
        BcMode::Periodic => (k % n, (k + n - 1) % n),
        BcMode::PhysicalNeumannFreeSlip => {
            if k == 0 || k == n {
                return 0.0;
            }
            (k, k - 1)
        }
    };
    (if m == hi { 1.0 } else { 0.0 } - if m == lo { 1.0 } else { 0.0 }) * n as f64
}

/// Gradient against `D`, divergence against `-D^T`.
pub fn grad_div_err(seed: u64) -> f64 {
    let mut r = rng(seed);
    let mut worst: f64 = 0.0;
    for bc in BOTH {
        for n in [4, 6] {
            let d = |k, m| d_entry(n, bc, k, m);
            let f = random_field(&mut r, n, Stagger::Cell, bc);
            let g = grad(&f);
            for j in 0..n {
                for i in 0..=n {
                    let want: f64 = (0..n).map(|m| d(i, m) * f.get(m as isize, j as isize)).sum();
                    worst = worst.max((g.x.get(i as isize, j as isize) - want).abs() / n as f64);
                    let want: f64 = (0..n).map(|m| d(i, m) * f.get(j as isize, m as isize)).sum();
                    worst = worst.max((g.y.get(j as isize, i as isize) - want).abs() / n as f64);
                }
            }
            let u = random_velocity(&mut r, n, bc);
            let dv = div(&u);
            let rows = if bc == BcMode::Periodic { n } else { n + 1 };
            for j in 0..n {
                for i in 0..n {
                    let mut want = 0.0;
                    for k in 0..rows {
                        want -= d(k, i) * u.x.get(k as isize, j as isize);
                        want -= d(k, j) * u.y.get(i as isize, k as isize);
                    }
                    worst = worst.max((dv.get(i as isize, j as isize) - want).abs() / n as f64);
                }
            }
        }
    }
    worst
}

pub const TWO_POINT: [(DiffKind, (isize, isize), (isize, isize)); 6] = [
    (DiffKind::CenterX, (-1, 0), (0, 0)),
    (DiffKind::CenterY, (0, -1), (0, 0)),
    (DiffKind::EwX, (0, 0), (1, 0)),
    (DiffKind::EwY, (0, -1), (0, 0)),
    (DiffKind::NsX, (-1, 0), (0, 0)),
    (DiffKind::NsY, (0, 0), (0, 1)),
];

/// Two-point and long-stencil differences against the extension oracle.
pub fn differences_err(seed: u64) -> f64 {
    let mut r = rng(seed);
    let mut worst: f64 = 0.0;
    for bc in BOTH {
        for n in [5, 6] {
            for (kind, lo, hi) in TWO_POINT {
                let f = random_field(&mut r, n, kind.input(), bc);
                let g = diff(kind, &f);
                assert_eq!(g.stagger(), kind.output());
                for j in g.owned_y() {
                    for i in g.owned_x() {
                        let want = (ext(&f, bc, i + hi.0, j + hi.1) - ext(&f, bc, i + lo.0, j + lo.1)) * n as f64;
                        worst = worst.max((g.get(i, j) - want).abs() / n as f64);
                    }
                }
            }
            for st in ALL_STAGGERS {
                let f = random_field(&mut r, n, st, bc);
                for (axis, (dx, dy)) in [(Axis::X, (1, 0)), (Axis::Y, (0, 1))] {
                    let g = diff_long(axis, &f);
                    for j in 0..n as isize {
                        for i in 0..n as isize {
                            let want = (ext(&f, bc, i + dx, j + dy) - ext(&f, bc, i - dx, j - dy)) * 0.5 * n as f64;
                            worst = worst.max((g.get(i, j) - want).abs() / n as f64);
                        }
                    }
                }
            }
        }
    }
    worst
}

pub fn averages_err(seed: u64) -> f64 {
    let mut r = rng(seed);
    let cases = [
        (AverageKind::Ax, Stagger::Cell, vec![(-1, 0), (0, 0)]),
        (AverageKind::Ay, Stagger::Cell, vec![(0, -1), (0, 0)]),
        (
            AverageKind::AxyX,
            Stagger::EdgeX,
            vec![(0, -1), (0, 0), (1, -1), (1, 0)],
        ),
        (
            AverageKind::AxyY,
            Stagger::EdgeY,
            vec![(-1, 0), (0, 0), (-1, 1), (0, 1)],
        ),
    ];
    let mut worst: f64 = 0.0;
    for bc in BOTH {
        for n in [4, 6] {
            for (kind, input, offsets) in &cases {
                let f = random_field(&mut r, n, *input, bc);
                let g = average(*kind, &f);
                let w = 1.0 / offsets.len() as f64;
                for j in g.owned_y() {
                    for i in g.owned_x() {
                        let want: f64 = offsets.iter().map(|&(a, b)| w * ext(&f, bc, i + a, j + b)).sum();
                        worst = worst.max((g.get(i, j) - want).abs());
                    }
                }
            }
        }
    }
    worst
}

pub fn inner_err(seed: u64) -> f64 {
    let mut r = rng(seed);
    let mut worst: f64 = 0.0;
    for bc in BOTH {
        for st in ALL_STAGGERS {
            let n = 5;
            let f = random_field(&mut r, n, st, bc);
            let g = random_field(&mut r, n, st, bc);
            let mut s = 0.0;
            for j in 0..n as isize {
                for i in 0..n as isize {
                    s += f.get(i, j) * g.get(i, j) / (n * n) as f64;
                }
            }
            worst = worst.max((inner(&f, &g) - s).abs());
        }
    }
    worst
}

/// Skew convection evaluated point by point from the stencil definition.
pub fn convection_oracle(u: &MacVelocity, v: &MacVelocity, bc: BcMode) -> MacVelocity {
    use Parity::{Even as E, Odd as O};
    let n = u.n();
    let h = 1.0 / n as f64;
    // four-point averages of the other advecting component, then extended
    let mut ay = Field::zeros(n, Stagger::EdgeX);
    for j in ay.owned_y() {
        for i in ay.owned_x() {
            let s =
                ext(&u.y, bc, i - 1, j) + ext(&u.y, bc, i, j) + ext(&u.y, bc, i - 1, j + 1) + ext(&u.y, bc, i, j + 1);
            ay.set(i, j, 0.25 * s);
        }
    }
    let mut ax = Field::zeros(n, Stagger::EdgeY);
    for j in ax.owned_y() {
        for i in ax.owned_x() {
            let s =
                ext(&u.x, bc, i, j - 1) + ext(&u.x, bc, i, j) + ext(&u.x, bc, i + 1, j - 1) + ext(&u.x, bc, i + 1, j);
            ax.set(i, j, 0.25 * s);
        }
    }
    let ay_at = |i, j| ext_with(&ay, bc, E, O, i, j);
    let ax_at = |i, j| ext_with(&ax, bc, O, E, i, j);
    let vx = |i, j| ext(&v.x, bc, i, j);
    let vy = |i, j| ext(&v.y, bc, i, j);
    let ux = |i, j| ext(&u.x, bc, i, j);
    let uy = |i, j| ext(&u.y, bc, i, j);
    let r = 0.5 / h;

    let mut out_x = Field::zeros(n, Stagger::EdgeX);
    for j in out_x.owned_y() {
        for i in out_x.owned_x() {
            let adv = ux(i, j) * (vx(i + 1, j) - vx(i - 1, j)) * r + ay_at(i, j) * (vx(i, j + 1) - vx(i, j - 1)) * r;
            let dv = (ux(i + 1, j) * vx(i + 1, j) - ux(i - 1, j) * vx(i - 1, j)) * r
                + (ay_at(i, j + 1) * vx(i, j + 1) - ay_at(i, j - 1) * vx(i, j - 1)) * r;
            out_x.set(i, j, 0.5 * (adv + dv));
        }
    }
    let mut out_y = Field::zeros(n, Stagger::EdgeY);
    for j in out_y.owned_y() {
        for i in out_y.owned_x() {
            let adv = ax_at(i, j) * (vy(i + 1, j) - vy(i - 1, j)) * r + uy(i, j) * (vy(i, j + 1) - vy(i, j - 1)) * r;
            let dv = (ax_at(i + 1, j) * vy(i + 1, j) - ax_at(i - 1, j) * vy(i - 1, j)) * r
                + (uy(i, j + 1) * vy(i, j + 1) - uy(i, j - 1) * vy(i, j - 1)) * r;
            out_y.set(i, j, 0.5 * (adv + dv));
        }
    }
    MacVelocity::new(out_x, out_y)
}

pub fn vel_diff(a: &MacVelocity, b: &MacVelocity) -> f64 {
    max_diff_interior(&a.x, &b.x).max(max_diff_interior(&a.y, &b.y))
}

pub fn convection_err(seed: u64) -> f64 {
    let mut r = rng(seed);
    let mut worst: f64 = 0.0;
    for bc in BOTH {
        for n in [4, 5, 6] {
            let u = random_velocity(&mut r, n, bc);
            let v = random_velocity(&mut r, n, bc);
            let want = convection_oracle(&u, &v, bc);
            worst = worst.max(vel_diff(&convect_velocity(&u, &v, bc), &want) / n as f64);
        }
    }
    worst
}

pub fn surface_force_err(seed: u64) -> f64 {
    let mut r = rng(seed);
    let mut worst: f64 = 0.0;
    for bc in BOTH {
        for n in [5, 6] {
            let phi = random_field(&mut r, n, Stagger::Cell, bc);
            let mu = random_field(&mut r, n, Stagger::Cell, bc);
            let got = phi_grad_mu(&phi, &mu, bc);
            let mut want = MacVelocity::zeros(n);
            for j in 0..n as isize {
                for i in 0..=n as isize {
                    let gx = (ext(&mu, bc, i, j) - ext(&mu, bc, i - 1, j)) * n as f64;
                    want.x
                        .set(i, j, gx * 0.5 * (ext(&phi, bc, i - 1, j) + ext(&phi, bc, i, j)));
                    let gy = (ext(&mu, bc, j, i) - ext(&mu, bc, j, i - 1)) * n as f64;
                    want.y
                        .set(j, i, gy * 0.5 * (ext(&phi, bc, j, i - 1) + ext(&phi, bc, j, i)));
                }
            }
            worst = worst.max(vel_diff(&got, &want) / n as f64);
        }
    }
    worst
}

pub fn transport_err(seed: u64) -> f64 {
    let mut r = rng(seed);
    let mut worst: f64 = 0.0;
    for bc in BOTH {
        for n in [5, 6] {
            let phi = random_field(&mut r, n, Stagger::Cell, bc);
            let u = random_velocity(&mut r, n, bc);
            let got = div_phi_u(&phi, &u, bc);
            let flux_x =
                |i: isize, j: isize| ext(&u.x, bc, i, j) * 0.5 * (ext(&phi, bc, i - 1, j) + ext(&phi, bc, i, j));
            let flux_y =
                |i: isize, j: isize| ext(&u.y, bc, i, j) * 0.5 * (ext(&phi, bc, i, j - 1) + ext(&phi, bc, i, j));
            for j in 0..n as isize {
                for i in 0..n as isize {
                    let want = (flux_x(i + 1, j) - flux_x(i, j) + flux_y(i, j + 1) - flux_y(i, j)) * n as f64;
                    worst = worst.max((got.get(i, j) - want).abs() / n as f64);
                }
            }
        }
    }
    worst
}
