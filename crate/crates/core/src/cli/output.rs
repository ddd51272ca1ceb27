//! CSV and legacy VTK writers.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{ChnsError, Result};
use crate::grid::{BcMode, Field};
use crate::scheme::{SimState, StepDiagnostics};
use crate::verification::csv_error;

/// One row of `diagnostics.csv`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticsRow {
    pub step: usize,
    pub time: f64,
    pub mass: f64,
    pub mass_drift: f64,
    pub phi_min: f64,
    pub phi_max: f64,
    pub energy: f64,
    pub div_inf: f64,
    pub outer_iters: usize,
    pub newton_iters: usize,
    pub damping_events: usize,
}

impl From<&StepDiagnostics> for DiagnosticsRow {
    fn from(d: &StepDiagnostics) -> Self {
        DiagnosticsRow {
            step: d.step,
            time: d.time,
            mass: d.mass,
            mass_drift: d.mass_drift,
            phi_min: d.phi_min,
            phi_max: d.phi_max,
            energy: d.energy,
            div_inf: d.div_inf,
            outer_iters: d.outer_iters,
            newton_iters: d.newton_iters,
            damping_events: d.damping_events,
        }
    }
}

pub const DIAGNOSTICS_HEADER: &str =
    "step,time,mass,mass_drift,phi_min,phi_max,energy,div_inf,outer_iters,newton_iters,damping_events";

pub struct DiagnosticsWriter {
    inner: csv::Writer<BufWriter<File>>,
}

impl DiagnosticsWriter {
    pub fn create(path: &Path) -> Result<Self> {
        Ok(DiagnosticsWriter {
            inner: csv::Writer::from_writer(BufWriter::new(File::create(path)?)),
        })
    }

    pub fn write(&mut self, d: &StepDiagnostics) -> Result<()> {
        self.inner.serialize(DiagnosticsRow::from(d)).map_err(csv_error)
    }

    pub fn flush(&mut self) -> Result<()> {
        self.inner.flush()?;
        Ok(())
    }
}

pub fn read_diagnostics(path: &Path) -> Result<Vec<DiagnosticsRow>> {
    let mut r = csv::Reader::from_path(path).map_err(csv_error)?;
    r.deserialize().map(|row| row.map_err(csv_error)).collect()
}

#[derive(Serialize, Deserialize)]
struct FieldRow {
    i: usize,
    j: usize,
    x: f64,
    y: f64,
    phi: f64,
    mu: f64,
    p: f64,
    u: f64,
    v: f64,
}

/// Cell-centred values, `i` fastest; velocity averaged to the centres.
pub fn write_fields_csv(path: &Path, state: &SimState, bc: BcMode) -> Result<()> {
    let u = state.u.clone().with_ghosts(bc);
    let n = state.n();
    let mut w = csv::Writer::from_writer(BufWriter::new(File::create(path)?));
    for j in 0..n {
        for i in 0..n {
            let (ii, jj) = (i as isize, j as isize);
            let (x, y) = state.phi.position(ii, jj);
            w.serialize(FieldRow {
                i,
                j,
                x,
                y,
                phi: state.phi.get(ii, jj),
                mu: state.mu.get(ii, jj),
                p: state.p.get(ii, jj),
                u: 0.5 * (u.x.get(ii, jj) + u.x.get(ii + 1, jj)),
                v: 0.5 * (u.y.get(ii, jj) + u.y.get(ii, jj + 1)),
            })
            .map_err(csv_error)?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Reads the `phi` column of a field CSV as an initial condition.
pub fn read_phase_csv(path: &Path, n: usize) -> Result<Field> {
    let mut r = csv::Reader::from_path(path).map_err(csv_error)?;
    let mut phi = Field::cell(n);
    let mut count = 0;
    for row in r.deserialize::<FieldRow>() {
        let row = row.map_err(csv_error)?;
        if row.i >= n || row.j >= n {
            return Err(ChnsError::config(
                "initial.file",
                format!("cell ({}, {}) outside a {n} x {n} grid", row.i, row.j),
            ));
        }
        phi.set(row.i as isize, row.j as isize, row.phi);
        count += 1;
    }
    if count != n * n {
        return Err(ChnsError::config(
            "initial.file",
            format!("expected {} cells, found {count}", n * n),
        ));
    }
    Ok(phi)
}

/// Legacy VTK structured points: `phi`, `mu`, `p` as cell data and the
/// velocity interpolated to the grid nodes.
pub fn write_vtk(path: &Path, state: &SimState, bc: BcMode, title: &str) -> Result<()> {
    let n = state.n();
    let h = 1.0 / n as f64;
    let u = state.u.clone().with_ghosts(bc);
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "# vtk DataFile Version 3.0")?;
    writeln!(w, "{}", title.replace('\n', " "))?;
    writeln!(w, "ASCII")?;
    writeln!(w, "DATASET STRUCTURED_POINTS")?;
    writeln!(w, "DIMENSIONS {} {} 1", n + 1, n + 1)?;
    writeln!(w, "ORIGIN 0 0 0")?;
    writeln!(w, "SPACING {h:e} {h:e} 1")?;
    writeln!(w, "CELL_DATA {}", n * n)?;
    for (name, f) in [("phi", &state.phi), ("mu", &state.mu), ("p", &state.p)] {
        writeln!(w, "SCALARS {name} double 1")?;
        writeln!(w, "LOOKUP_TABLE default")?;
        for j in 0..n as isize {
            for i in 0..n as isize {
                writeln!(w, "{:e}", f.get(i, j))?;
            }
        }
    }
    writeln!(w, "POINT_DATA {}", (n + 1) * (n + 1))?;
    writeln!(w, "VECTORS velocity double")?;
    for j in 0..=n as isize {
        for i in 0..=n as isize {
            let ux = 0.5 * (u.x.get(i, j - 1) + u.x.get(i, j));
            let uy = 0.5 * (u.y.get(i - 1, j) + u.y.get(i, j));
            writeln!(w, "{ux:e} {uy:e} 0")?;
        }
    }
    w.flush()?;
    Ok(())
}
