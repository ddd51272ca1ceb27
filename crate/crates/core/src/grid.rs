//! MAC grid storage and the discrete calculus on the unit square.
//!
//! Every field lives on an `n x n` cell grid with spacing `h = 1/n` and carries
//! a ghost frame of width one. The location of the samples is described by
//! [`Stagger`]:
//!
//! | stagger | sample point          | owned `i`  | owned `j`  |
//! |---------|-----------------------|------------|------------|
//! | `Cell`  | `((i+1/2)h, (j+1/2)h)`| `0..n`     | `0..n`     |
//! | `EdgeX` | `(ih, (j+1/2)h)`      | `0..=n`    | `0..n`     |
//! | `EdgeY` | `((i+1/2)h, jh)`      | `0..n`     | `0..=n`    |
//! | `Node`  | `(ih, jh)`            | `0..=n`    | `0..=n`    |
//!
//! Operators read ghost values and never branch on boundary indices, so the
//! boundary condition is entirely encoded by [`Field::fill_ghosts`]. Inner
//! products and norms sum over `0..n` in both directions: for node-type axes
//! the index `n` is either a periodic duplicate of `0` or a homogeneous
//! Dirichlet value, so it never contributes.

use std::ops::{Add, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};

pub mod dual;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BcMode {
    /// No-flux for scalars, no-penetration and free-slip for velocity.
    PhysicalNeumannFreeSlip,
    Periodic,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stagger {
    Cell,
    EdgeX,
    EdgeY,
    Node,
}

impl Stagger {
    pub fn node_in_x(self) -> bool {
        matches!(self, Stagger::EdgeX | Stagger::Node)
    }

    pub fn node_in_y(self) -> bool {
        matches!(self, Stagger::EdgeY | Stagger::Node)
    }

    /// Reflection parity used by physical-mode ghost fills when none is given.
    pub fn natural_parity(self) -> (Parity, Parity) {
        match self {
            Stagger::Cell => (Parity::Even, Parity::Even),
            Stagger::EdgeX => (Parity::Odd, Parity::Even),
            Stagger::EdgeY => (Parity::Even, Parity::Odd),
            Stagger::Node => (Parity::Odd, Parity::Odd),
        }
    }
}

/// Symmetry of a field under reflection across a physical wall.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Parity {
    Even,
    Odd,
}

impl Parity {
    pub fn times(self, other: Parity) -> Parity {
        if self == other {
            Parity::Even
        } else {
            Parity::Odd
        }
    }

    fn sign(self) -> f64 {
        match self {
            Parity::Even => 1.0,
            Parity::Odd => -1.0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Axis {
    X,
    Y,
}

/// Grid function with an inline ghost frame.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Field {
    n: usize,
    stagger: Stagger,
    data: Vec<f64>,
}

impl Field {
    pub fn zeros(n: usize, stagger: Stagger) -> Self {
        assert!(n >= 2, "grid needs at least two cells per side");
        Field {
            n,
            stagger,
            data: vec![0.0; (n + 3) * (n + 3)],
        }
    }

    pub fn cell(n: usize) -> Self {
        Self::zeros(n, Stagger::Cell)
    }

    pub fn constant(n: usize, stagger: Stagger, value: f64) -> Self {
        let mut f = Self::zeros(n, stagger);
        f.data.fill(value);
        f
    }

    /// Samples `f(x, y)` at every owned point. Ghosts are left at zero.
    pub fn from_fn(n: usize, stagger: Stagger, f: impl Fn(f64, f64) -> f64) -> Self {
        let mut out = Self::zeros(n, stagger);
        for j in out.owned_y() {
            for i in out.owned_x() {
                let (x, y) = out.position(i, j);
                out.set(i, j, f(x, y));
            }
        }
        out
    }

    /// Builds a cell field from `n*n` values ordered with `i` fastest.
    pub fn from_cell_values(n: usize, values: &[f64]) -> Self {
        assert_eq!(values.len(), n * n, "expected n*n cell values");
        let mut out = Self::cell(n);
        for j in 0..n {
            for i in 0..n {
                out.set(i as isize, j as isize, values[j * n + i]);
            }
        }
        out
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn h(&self) -> f64 {
        1.0 / self.n as f64
    }

    pub fn stagger(&self) -> Stagger {
        self.stagger
    }

    #[inline]
    fn idx(&self, i: isize, j: isize) -> usize {
        let s = (self.n + 3) as isize;
        debug_assert!(i >= -1 && i <= self.n as isize + 1, "i = {i} out of frame");
        debug_assert!(j >= -1 && j <= self.n as isize + 1, "j = {j} out of frame");
        ((j + 1) * s + (i + 1)) as usize
    }

    #[inline]
    pub fn get(&self, i: isize, j: isize) -> f64 {
        self.data[self.idx(i, j)]
    }

    #[inline]
    pub fn set(&mut self, i: isize, j: isize, v: f64) {
        let k = self.idx(i, j);
        self.data[k] = v;
    }

    fn last_owned(&self, node: bool) -> isize {
        if node {
            self.n as isize
        } else {
            self.n as isize - 1
        }
    }

    pub fn owned_x(&self) -> std::ops::RangeInclusive<isize> {
        0..=self.last_owned(self.stagger.node_in_x())
    }

    pub fn owned_y(&self) -> std::ops::RangeInclusive<isize> {
        0..=self.last_owned(self.stagger.node_in_y())
    }

    /// Physical coordinates of the sample with index `(i, j)`.
    pub fn position(&self, i: isize, j: isize) -> (f64, f64) {
        let h = self.h();
        let ox = if self.stagger.node_in_x() { 0.0 } else { 0.5 };
        let oy = if self.stagger.node_in_y() { 0.0 } else { 0.5 };
        ((i as f64 + ox) * h, (j as f64 + oy) * h)
    }

    /// Values over the summation range `0..n x 0..n`, `i` fastest.
    pub fn interior_values(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.n * self.n);
        for j in 0..self.n as isize {
            for i in 0..self.n as isize {
                out.push(self.get(i, j));
            }
        }
        out
    }

    /// Raw storage including the ghost frame.
    pub fn raw(&self) -> &[f64] {
        &self.data
    }

    pub fn raw_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn fill_ghosts(&mut self, bc: BcMode) {
        let (px, py) = self.stagger.natural_parity();
        self.fill_ghosts_with(bc, px, py);
    }

    pub fn with_ghosts(mut self, bc: BcMode) -> Self {
        self.fill_ghosts(bc);
        self
    }

    /// Ghost fill with explicit reflection parities. Only the physical mode
    /// looks at the parities; periodic fills always wrap.
    ///
    /// For node-type axes the boundary samples are part of the fill: periodic
    /// copies index 0 onto index n, odd parity forces both to zero.
    pub fn fill_ghosts_with(&mut self, bc: BcMode, px: Parity, py: Parity) {
        let n = self.n as isize;
        let node_x = self.stagger.node_in_x();
        let node_y = self.stagger.node_in_y();
        let yr = self.owned_y();
        for j in yr {
            self.fill_line(bc, px, node_x, n, |i| (i, j));
        }
        for i in -1..=self.last_owned(node_x) + 1 {
            self.fill_line(bc, py, node_y, n, |j| (i, j));
        }
    }

    fn fill_line(&mut self, bc: BcMode, parity: Parity, node: bool, n: isize, at: impl Fn(isize) -> (isize, isize)) {
        let get = |f: &Field, k: isize| {
            let (i, j) = at(k);
            f.get(i, j)
        };
        let put = |f: &mut Field, k: isize, v: f64| {
            let (i, j) = at(k);
            f.set(i, j, v);
        };
        match (bc, node) {
            (BcMode::Periodic, false) => {
                let lo = get(self, n - 1);
                let hi = get(self, 0);
                put(self, -1, lo);
                put(self, n, hi);
            }
            (BcMode::Periodic, true) => {
                let first = get(self, 0);
                put(self, n, first);
                let lo = get(self, n - 1);
                let hi = get(self, 1);
                put(self, -1, lo);
                put(self, n + 1, hi);
            }
            (BcMode::PhysicalNeumannFreeSlip, false) => {
                let s = parity.sign();
                let lo = s * get(self, 0);
                let hi = s * get(self, n - 1);
                put(self, -1, lo);
                put(self, n, hi);
            }
            (BcMode::PhysicalNeumannFreeSlip, true) => {
                if parity == Parity::Odd {
                    put(self, 0, 0.0);
                    put(self, n, 0.0);
                }
                let s = parity.sign();
                let lo = s * get(self, 1);
                let hi = s * get(self, n - 1);
                put(self, -1, lo);
                put(self, n + 1, hi);
            }
        }
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Field {
        Field {
            n: self.n,
            stagger: self.stagger,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn zip_map(&self, other: &Field, f: impl Fn(f64, f64) -> f64) -> Field {
        self.assert_compatible(other);
        Field {
            n: self.n,
            stagger: self.stagger,
            data: self.data.iter().zip(&other.data).map(|(&a, &b)| f(a, b)).collect(),
        }
    }

    /// `self += a * x` over the whole storage, ghosts included.
    pub fn axpy(&mut self, a: f64, x: &Field) {
        self.assert_compatible(x);
        for (s, &v) in self.data.iter_mut().zip(&x.data) {
            *s += a * v;
        }
    }

    pub fn scale(&mut self, a: f64) {
        self.data.iter_mut().for_each(|v| *v *= a);
    }

    pub fn add_constant(&mut self, c: f64) {
        self.data.iter_mut().for_each(|v| *v += c);
    }

    /// `a * x + b * y`.
    pub fn lin_comb(a: f64, x: &Field, b: f64, y: &Field) -> Field {
        x.zip_map(y, |u, v| a * u + b * v)
    }

    pub fn mul_elem(&self, other: &Field) -> Field {
        self.zip_map(other, |a, b| a * b)
    }

    pub fn assert_compatible(&self, other: &Field) {
        assert_eq!(self.n, other.n, "grid size mismatch");
        assert_eq!(self.stagger, other.stagger, "staggering mismatch");
    }

    fn summation_points(&self) -> impl Iterator<Item = (isize, isize)> {
        let n = self.n as isize;
        (0..n).flat_map(move |j| (0..n).map(move |i| (i, j)))
    }

    pub fn max_abs(&self) -> f64 {
        self.summation_points()
            .map(|(i, j)| self.get(i, j).abs())
            .fold(0.0, f64::max)
    }

    pub fn min_value(&self) -> f64 {
        self.summation_points()
            .map(|(i, j)| self.get(i, j))
            .fold(f64::INFINITY, f64::min)
    }

    pub fn max_value(&self) -> f64 {
        self.summation_points()
            .map(|(i, j)| self.get(i, j))
            .fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn is_finite(&self) -> bool {
        self.summation_points().all(|(i, j)| self.get(i, j).is_finite())
    }
}

impl Add for &Field {
    type Output = Field;
    fn add(self, rhs: &Field) -> Field {
        self.zip_map(rhs, |a, b| a + b)
    }
}

impl Sub for &Field {
    type Output = Field;
    fn sub(self, rhs: &Field) -> Field {
        self.zip_map(rhs, |a, b| a - b)
    }
}

impl Mul<f64> for &Field {
    type Output = Field;
    fn mul(self, rhs: f64) -> Field {
        self.map(|a| a * rhs)
    }
}

impl Neg for &Field {
    type Output = Field;
    fn neg(self) -> Field {
        self.map(|a| -a)
    }
}

/// Velocity on the MAC grid: `x` on east-west edges, `y` on north-south edges.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MacVelocity {
    pub x: Field,
    pub y: Field,
}

impl MacVelocity {
    pub fn zeros(n: usize) -> Self {
        MacVelocity {
            x: Field::zeros(n, Stagger::EdgeX),
            y: Field::zeros(n, Stagger::EdgeY),
        }
    }

    pub fn new(x: Field, y: Field) -> Self {
        assert_eq!(x.stagger(), Stagger::EdgeX);
        assert_eq!(y.stagger(), Stagger::EdgeY);
        assert_eq!(x.n(), y.n());
        MacVelocity { x, y }
    }

    pub fn from_fns(n: usize, fx: impl Fn(f64, f64) -> f64, fy: impl Fn(f64, f64) -> f64) -> Self {
        MacVelocity {
            x: Field::from_fn(n, Stagger::EdgeX, fx),
            y: Field::from_fn(n, Stagger::EdgeY, fy),
        }
    }

    pub fn n(&self) -> usize {
        self.x.n()
    }

    pub fn fill_ghosts(&mut self, bc: BcMode) {
        self.x.fill_ghosts(bc);
        self.y.fill_ghosts(bc);
    }

    pub fn with_ghosts(mut self, bc: BcMode) -> Self {
        self.fill_ghosts(bc);
        self
    }

    pub fn axpy(&mut self, a: f64, other: &MacVelocity) {
        self.x.axpy(a, &other.x);
        self.y.axpy(a, &other.y);
    }

    pub fn scale(&mut self, a: f64) {
        self.x.scale(a);
        self.y.scale(a);
    }

    pub fn lin_comb(a: f64, u: &MacVelocity, b: f64, v: &MacVelocity) -> MacVelocity {
        MacVelocity {
            x: Field::lin_comb(a, &u.x, b, &v.x),
            y: Field::lin_comb(a, &u.y, b, &v.y),
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.x.max_abs().max(self.y.max_abs())
    }
}

impl Add for &MacVelocity {
    type Output = MacVelocity;
    fn add(self, rhs: &MacVelocity) -> MacVelocity {
        MacVelocity::lin_comb(1.0, self, 1.0, rhs)
    }
}

impl Sub for &MacVelocity {
    type Output = MacVelocity;
    fn sub(self, rhs: &MacVelocity) -> MacVelocity {
        MacVelocity::lin_comb(1.0, self, -1.0, rhs)
    }
}

impl Mul<f64> for &MacVelocity {
    type Output = MacVelocity;
    fn mul(self, rhs: f64) -> MacVelocity {
        MacVelocity {
            x: &self.x * rhs,
            y: &self.y * rhs,
        }
    }
}

fn build(n: usize, stagger: Stagger, mut f: impl FnMut(isize, isize) -> f64) -> Field {
    let mut out = Field::zeros(n, stagger);
    for j in out.owned_y() {
        for i in out.owned_x() {
            let v = f(i, j);
            out.set(i, j, v);
        }
    }
    out
}

/// Two-point difference operators. The name gives the input staggering
/// (`Center` = cell, `Ew` = east-west edge, `Ns` = north-south edge) and the
/// direction of differentiation.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DiffKind {
    CenterX,
    CenterY,
    EwX,
    EwY,
    NsX,
    NsY,
}

impl DiffKind {
    pub fn input(self) -> Stagger {
        match self {
            DiffKind::CenterX | DiffKind::CenterY => Stagger::Cell,
            DiffKind::EwX | DiffKind::EwY => Stagger::EdgeX,
            DiffKind::NsX | DiffKind::NsY => Stagger::EdgeY,
        }
    }

    pub fn output(self) -> Stagger {
        match self {
            DiffKind::CenterX => Stagger::EdgeX,
            DiffKind::CenterY => Stagger::EdgeY,
            DiffKind::EwX | DiffKind::NsY => Stagger::Cell,
            DiffKind::EwY | DiffKind::NsX => Stagger::Node,
        }
    }
}

pub fn diff(kind: DiffKind, f: &Field) -> Field {
    assert_eq!(f.stagger(), kind.input(), "{kind:?} applied to {:?}", f.stagger());
    let r = 1.0 / f.h();
    let n = f.n();
    match kind {
        DiffKind::CenterX | DiffKind::NsX => build(n, kind.output(), |i, j| (f.get(i, j) - f.get(i - 1, j)) * r),
        DiffKind::CenterY | DiffKind::EwY => build(n, kind.output(), |i, j| (f.get(i, j) - f.get(i, j - 1)) * r),
        DiffKind::EwX => build(n, kind.output(), |i, j| (f.get(i + 1, j) - f.get(i, j)) * r),
        DiffKind::NsY => build(n, kind.output(), |i, j| (f.get(i, j + 1) - f.get(i, j)) * r),
    }
}

/// Long-stencil centered difference `(f[k+1] - f[k-1]) / 2h`, same staggering.
pub fn diff_long(axis: Axis, f: &Field) -> Field {
    let r = 0.5 / f.h();
    match axis {
        Axis::X => build(f.n(), f.stagger(), |i, j| (f.get(i + 1, j) - f.get(i - 1, j)) * r),
        Axis::Y => build(f.n(), f.stagger(), |i, j| (f.get(i, j + 1) - f.get(i, j - 1)) * r),
    }
}

/// Discrete gradient of a cell field onto the MAC edges.
pub fn grad(f: &Field) -> MacVelocity {
    MacVelocity {
        x: diff(DiffKind::CenterX, f),
        y: diff(DiffKind::CenterY, f),
    }
}

/// Discrete divergence of a MAC velocity at cell centers.
pub fn div(u: &MacVelocity) -> Field {
    let n = u.n();
    let r = 1.0 / u.x.h();
    build(n, Stagger::Cell, |i, j| {
        (u.x.get(i + 1, j) - u.x.get(i, j) + u.y.get(i, j + 1) - u.y.get(i, j)) * r
    })
}

/// Five-point Laplacian for any staggering.
pub fn lap(f: &Field) -> Field {
    let r = 1.0 / (f.h() * f.h());
    build(f.n(), f.stagger(), |i, j| {
        (f.get(i + 1, j) + f.get(i - 1, j) + f.get(i, j + 1) + f.get(i, j - 1) - 4.0 * f.get(i, j)) * r
    })
}

pub fn lap_vec(u: &MacVelocity) -> MacVelocity {
    MacVelocity {
        x: lap(&u.x),
        y: lap(&u.y),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum AverageKind {
    /// Cell to east-west edges.
    Ax,
    /// Cell to north-south edges.
    Ay,
    /// Four-point mean of an east-west field onto north-south edges.
    AxyX,
    /// Four-point mean of a north-south field onto east-west edges.
    AxyY,
}

pub fn average(kind: AverageKind, f: &Field) -> Field {
    let n = f.n();
    match kind {
        AverageKind::Ax => {
            assert_eq!(f.stagger(), Stagger::Cell);
            build(n, Stagger::EdgeX, |i, j| 0.5 * (f.get(i - 1, j) + f.get(i, j)))
        }
        AverageKind::Ay => {
            assert_eq!(f.stagger(), Stagger::Cell);
            build(n, Stagger::EdgeY, |i, j| 0.5 * (f.get(i, j - 1) + f.get(i, j)))
        }
        AverageKind::AxyX => {
            assert_eq!(f.stagger(), Stagger::EdgeX);
            build(n, Stagger::EdgeY, |i, j| {
                0.25 * (f.get(i, j - 1) + f.get(i, j) + f.get(i + 1, j - 1) + f.get(i + 1, j))
            })
        }
        AverageKind::AxyY => {
            assert_eq!(f.stagger(), Stagger::EdgeY);
            build(n, Stagger::EdgeX, |i, j| {
                0.25 * (f.get(i - 1, j) + f.get(i, j) + f.get(i - 1, j + 1) + f.get(i, j + 1))
            })
        }
    }
}

/// `h^2`-weighted inner product over the summation range; the `c`, `ew` and
/// `ns` products of the cell, east-west and north-south staggerings.
pub fn inner(f: &Field, g: &Field) -> f64 {
    f.assert_compatible(g);
    let h = f.h();
    let n = f.n() as isize;
    let mut s = 0.0;
    for j in 0..n {
        for i in 0..n {
            s += f.get(i, j) * g.get(i, j);
        }
    }
    h * h * s
}

pub fn inner_vec(u: &MacVelocity, v: &MacVelocity) -> f64 {
    inner(&u.x, &v.x) + inner(&u.y, &v.y)
}

pub fn norm_l2(f: &Field) -> f64 {
    inner(f, f).sqrt()
}

pub fn norm_l2_vec(u: &MacVelocity) -> f64 {
    inner_vec(u, u).sqrt()
}

pub fn norm_lp(f: &Field, p: f64) -> f64 {
    assert!(p >= 1.0, "lp norm needs p >= 1");
    let h = f.h();
    let n = f.n() as isize;
    let mut s = 0.0;
    for j in 0..n {
        for i in 0..n {
            s += f.get(i, j).abs().powf(p);
        }
    }
    (h * h * s).powf(1.0 / p)
}

pub fn norm_inf(f: &Field) -> f64 {
    f.max_abs()
}

/// `<f, 1>_c`; equals the average on the unit square.
pub fn mean_c(f: &Field) -> f64 {
    assert_eq!(f.stagger(), Stagger::Cell, "mean is defined for cell fields");
    let h = f.h();
    let n = f.n() as isize;
    let mut s = 0.0;
    for j in 0..n {
        for i in 0..n {
            s += f.get(i, j);
        }
    }
    h * h * s
}

/// `||grad_h f||_2^2` for a ghost-filled cell field.
pub fn grad_norm_sq(f: &Field) -> f64 {
    let g = grad(f);
    inner_vec(&g, &g)
}

/// `||grad_h v||_2^2` for a ghost-filled MAC velocity: the x-differences of
/// `v.x` and y-differences of `v.y` live at cell centers, the cross
/// differences at nodes.
pub fn grad_norm_sq_vec(v: &MacVelocity) -> f64 {
    let parts = [
        diff(DiffKind::EwX, &v.x),
        diff(DiffKind::EwY, &v.x),
        diff(DiffKind::NsX, &v.y),
        diff(DiffKind::NsY, &v.y),
    ];
    parts.iter().map(|d| inner(d, d)).sum()
}
