//! The discrete `H^{-1}` inner product built on the inverse Laplacian.

use crate::error::Result;
use crate::grid::{inner, lap, BcMode, Field, Stagger};
use crate::linsolve::{solve_spd, LinearOperator};
use crate::spectral::SpectralSolver;

/// Mean-zero `psi` with `-lap(psi) = f` under the closure of `bc`.
///
/// `f` must be a mean-zero cell field; otherwise `NonZeroMean` is returned.
pub fn inv_neumann_laplacian(f: &Field, bc: BcMode, tol: f64) -> Result<Field> {
    assert_eq!(f.stagger(), Stagger::Cell, "inverse Laplacian acts on cell fields");
    let n = f.n();
    let spectral = SpectralSolver::new(n, Stagger::Cell, bc);
    let op = LinearOperator::new(
        move |v: &Field| {
            let mut w = lap(&v.clone().with_ghosts(bc));
            w.scale(-1.0);
            w.with_ghosts(bc)
        },
        true,
    )
    .with_preconditioner(move |r: &Field| spectral.apply(r, |lam| if lam > 0.0 { 1.0 / lam } else { 0.0 }));
    let (psi, _) = solve_spd(&op, f, tol, 10 * n.max(10), true)?;
    Ok(psi.with_ghosts(bc))
}

/// `sqrt(<f, (-lap)^{-1} f>_c)`.
pub fn norm_minus1(f: &Field, bc: BcMode) -> Result<f64> {
    let psi = inv_neumann_laplacian(f, bc, 1e-12)?;
    Ok(inner(f, &psi).max(0.0).sqrt())
}
