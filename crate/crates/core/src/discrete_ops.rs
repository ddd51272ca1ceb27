//! Nonlinear composites of the MAC operators and the discrete energies.

use crate::error::{ChnsError, Result};
use crate::grid::{
    average, diff, diff_long, grad_norm_sq, inner_vec, AverageKind, Axis, BcMode, DiffKind, Field, MacVelocity, Parity,
};
use crate::potential::entropy_density;

/// Skew-symmetric convection `b_h(adv, v) = (adv . grad v + div(v adv^T)) / 2`
/// with long-stencil differences. Both inputs must be ghost-filled for `bc`.
pub fn convect_velocity(adv: &MacVelocity, v: &MacVelocity, bc: BcMode) -> MacVelocity {
    use Parity::{Even as E, Odd as O};
    // advecting velocity moved to the other component's edges
    let mut ay = average(AverageKind::AxyY, &adv.y);
    ay.fill_ghosts_with(bc, E, O);
    let mut ax = average(AverageKind::AxyX, &adv.x);
    ax.fill_ghosts_with(bc, O, E);

    // x component on east-west edges
    let uxvx = adv.x.mul_elem(&v.x);
    let ayvx = ay.mul_elem(&v.x);
    let adv_x = Field::lin_comb(
        1.0,
        &adv.x.mul_elem(&diff_long(Axis::X, &v.x)),
        1.0,
        &ay.mul_elem(&diff_long(Axis::Y, &v.x)),
    );
    let div_x = &diff_long(Axis::X, &uxvx) + &diff_long(Axis::Y, &ayvx);

    // y component on north-south edges
    let axvy = ax.mul_elem(&v.y);
    let uyvy = adv.y.mul_elem(&v.y);
    let adv_y = Field::lin_comb(
        1.0,
        &ax.mul_elem(&diff_long(Axis::X, &v.y)),
        1.0,
        &adv.y.mul_elem(&diff_long(Axis::Y, &v.y)),
    );
    let div_y = &diff_long(Axis::X, &axvy) + &diff_long(Axis::Y, &uyvy);

    let mut out = MacVelocity::new(
        Field::lin_comb(0.5, &adv_x, 0.5, &div_x),
        Field::lin_comb(0.5, &adv_y, 0.5, &div_y),
    );
    out.fill_ghosts(bc);
    out
}

/// `B(u, v, w) = <b_h(u, v), w>_1`.
pub fn trilinear_b(u: &MacVelocity, v: &MacVelocity, w: &MacVelocity, bc: BcMode) -> f64 {
    inner_vec(&convect_velocity(u, v, bc), w)
}

/// Surface tension term `A_h phi grad_h mu` on the MAC edges.
pub fn phi_grad_mu(phi: &Field, mu: &Field, bc: BcMode) -> MacVelocity {
    let x = diff(DiffKind::CenterX, mu).mul_elem(&average(AverageKind::Ax, phi));
    let y = diff(DiffKind::CenterY, mu).mul_elem(&average(AverageKind::Ay, phi));
    MacVelocity::new(x, y).with_ghosts(bc)
}

/// Conservative transport `div_h(A_h phi u)` at cell centers.
pub fn div_phi_u(phi: &Field, u: &MacVelocity, bc: BcMode) -> Field {
    let fx = u.x.mul_elem(&average(AverageKind::Ax, phi));
    let fy = u.y.mul_elem(&average(AverageKind::Ay, phi));
    let out = &diff(DiffKind::EwX, &fx) + &diff(DiffKind::NsY, &fy);
    out.with_ghosts(bc)
}

/// Discrete Flory-Huggins free energy
/// `<(1+phi)ln(1+phi) + (1-phi)ln(1-phi) - theta0/2 phi^2, 1>_c + eps^2/2 ||grad_h phi||^2`.
pub fn flory_huggins_energy(phi: &Field, eps: f64, theta0: f64, bc: BcMode) -> Result<f64> {
    let n = phi.n() as isize;
    let h2 = phi.h() * phi.h();
    let mut bulk = 0.0;
    for j in 0..n {
        for i in 0..n {
            let v = phi.get(i, j);
            if !(v.abs() < 1.0) {
                return Err(ChnsError::OutOfBounds {
                    value: v,
                    i: i as usize,
                    j: j as usize,
                });
            }
            bulk += entropy_density(v) - 0.5 * theta0 * v * v;
        }
    }
    let g = phi.clone().with_ghosts(bc);
    Ok(h2 * bulk + 0.5 * eps * eps * grad_norm_sq(&g))
}

/// Free energy plus kinetic energy `||u||^2 / (2 gamma)`.
pub fn total_energy(phi: &Field, u: &MacVelocity, eps: f64, theta0: f64, gamma: f64, bc: BcMode) -> Result<f64> {
    Ok(flory_huggins_energy(phi, eps, theta0, bc)? + inner_vec(u, u) / (2.0 * gamma))
}
