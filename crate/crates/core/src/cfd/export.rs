//! Plain-text exports of flow fields and force histories.

use std::io::Write;

use super::solver::{ForceSample, Solver};
use crate::error::Result;

/// Cell-centered `x,y,u,v,p,vorticity` rows.
pub fn write_field_csv<W: Write>(solver: &Solver, mut out: W) -> Result<()> {
    let g = &solver.grid;
    let w = solver.vorticity();
    writeln!(out, "x,y,u,v,p,vorticity")?;
    for j in 0..g.ny as isize {
        for i in 0..g.nx as isize {
            let [x, y] = g.p_pos(i, j);
            let [u, v] = solver.velocity_at_cell(i, j);
            let p = solver.state.p[g.ip(i, j)];
            let wz = w[j as usize * g.nx + i as usize];
            writeln!(out, "{x},{y},{u},{v},{p},{wz}")?;
        }
    }
    Ok(())
}

pub fn write_force_csv<W: Write>(history: &[ForceSample], mut out: W) -> Result<()> {
    writeln!(out, "t,cd,cl")?;
    for f in history {
        writeln!(out, "{},{},{}", f.t, f.cd, f.cl)?;
    }
    Ok(())
}
