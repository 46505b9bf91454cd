//! CSV artifact writers. All numeric columns use 17 significant digits so
//! repeated runs produce byte-identical files.

use crate::constitutive::AssumptionAudit;
use crate::efield::ElectricField;
use crate::error::Result;
use crate::exponent::{CoverReport, VariableExponent};
use crate::grid::fmt17;
use crate::pipeline::BlowupPoint;
use crate::solver::{EnergyReport, SolverState};
use std::io::Write;

/// `x,y,u,E1,E2` over nodes, row-major by y then x.
pub fn write_efield_csv<W: Write>(e: &ElectricField, w: &mut W) -> Result<()> {
    writeln!(w, "x,y,u,E1,E2")?;
    let u = &e.potential;
    for iy in 0..u.sites_y() {
        for ix in 0..u.sites_x() {
            let (x, y) = u.site_pos(ix, iy);
            let s = u.site_index(ix, iy);
            writeln!(
                w,
                "{},{},{},{},{}",
                fmt17(x),
                fmt17(y),
                fmt17(u.get(s, 0)),
                fmt17(e.e.get(s, 0)),
                fmt17(e.e.get(s, 1))
            )?;
        }
    }
    Ok(())
}

/// `x,y,p` over the exponent's sites.
pub fn write_exponent_csv<W: Write>(p: &VariableExponent, w: &mut W) -> Result<()> {
    writeln!(w, "x,y,p")?;
    let f = p.values();
    for iy in 0..f.sites_y() {
        for ix in 0..f.sites_x() {
            let (x, y) = f.site_pos(ix, iy);
            writeln!(
                w,
                "{},{},{}",
                fmt17(x),
                fmt17(y),
                fmt17(f.at(ix, iy, 0))
            )?;
        }
    }
    Ok(())
}

/// `k,x2,D_k`.
pub fn write_blowup_csv<W: Write>(points: &[BlowupPoint], w: &mut W) -> Result<()> {
    writeln!(w, "k,x2,D_k")?;
    for p in points {
        writeln!(w, "{},{},{}", p.k, fmt17(p.x2), fmt17(p.d))?;
    }
    Ok(())
}

/// `cx,cy,radius,p_minus,p_plus,theta`; theta prints as nan for balls with
/// p+ <= 2 where no interpolation parameter is defined.
pub fn write_cover_csv<W: Write>(report: &CoverReport, w: &mut W) -> Result<()> {
    writeln!(w, "cx,cy,radius,p_minus,p_plus,theta")?;
    for b in &report.balls {
        writeln!(
            w,
            "{},{},{},{},{},{}",
            fmt17(b.cx),
            fmt17(b.cy),
            fmt17(b.radius),
            fmt17(b.p_minus),
            fmt17(b.p_plus),
            match b.theta {
                Some(t) => fmt17(t),
                None => "nan".to_string(),
            }
        )?;
    }
    Ok(())
}

/// `assumption,pass,constant_c,constant_C,min_product,witness` with the
/// witness flattened into a space-separated list.
pub fn write_audit_csv<W: Write>(audit: &AssumptionAudit, w: &mut W) -> Result<()> {
    writeln!(w, "assumption,pass,constant_c,constant_C,min_product,witness")?;
    for e in &audit.entries {
        let witness: Vec<String> = e.witness.iter().map(|v| fmt17(*v)).collect();
        writeln!(
            w,
            "{},{},{},{},{},{}",
            e.name,
            e.pass as u8,
            fmt17(e.constant_c),
            fmt17(e.constant_big_c),
            fmt17(e.min_product),
            witness.join(" ")
        )?;
    }
    Ok(())
}

/// `iter,residual,damping`.
pub fn write_residuals_csv<W: Write>(state: &SolverState, w: &mut W) -> Result<()> {
    writeln!(w, "iter,residual,damping")?;
    for (i, (r, d)) in state
        .residual_history
        .iter()
        .zip(&state.damping_history)
        .enumerate()
    {
        writeln!(w, "{},{},{}", i, fmt17(*r), fmt17(*d))?;
    }
    Ok(())
}

/// One row with every energy-report entry.
pub fn write_energy_csv<W: Write>(e: &EnergyReport, w: &mut W) -> Result<()> {
    writeln!(
        w,
        "modular_dv,modular_r_weighted,modular_grad_omega_weighted,reg_terms_scaled,bound_k,norm_v_x,norm_r_weighted,norm_omega_x"
    )?;
    writeln!(
        w,
        "{},{},{},{},{},{},{},{}",
        fmt17(e.modular_dv),
        fmt17(e.modular_r_weighted),
        fmt17(e.modular_grad_omega_weighted),
        fmt17(e.reg_terms_scaled),
        fmt17(e.bound_k),
        fmt17(e.norm_v_x),
        fmt17(e.norm_r_weighted),
        fmt17(e.norm_omega_x)
    )?;
    Ok(())
}

/// One row with the dual-norm triple.
pub fn write_stress_norms_csv<W: Write>(norms: (f64, f64, f64), w: &mut W) -> Result<()> {
    writeln!(w, "s_dual,s_skew_weighted,n_weighted")?;
    writeln!(
        w,
        "{},{},{}",
        fmt17(norms.0),
        fmt17(norms.1),
        fmt17(norms.2)
    )?;
    Ok(())
}
