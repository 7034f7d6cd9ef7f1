//! CSV rendering. Floats are written with 17 significant digits so equal
//! runs produce byte-identical files; rows are `\n`-terminated.

use std::io::Write;

use crate::dimension_oracle::BoxCountReport;
use crate::error::Result;
use crate::experiments::{GapScan, KinkScan, MotionReport, PerturbationReport};
use crate::orbits::Pullback;
use crate::pressure::{BowenZero, PressureCurve};
use crate::transfer::{ConformalAtoms, OperatorValue};

/// Scientific notation with 17 significant digits; `-0` is written as `0`.
pub fn float(v: f64) -> String {
    let v = if v == 0.0 { 0.0 } else { v };
    format!("{v:.16e}")
}

/// `word,re,im,log_deriv`, one row per leaf in lexicographic word order.
pub fn write_cloud<W: Write>(out: &mut W, pullback: &Pullback) -> Result<()> {
    writeln!(out, "word,re,im,log_deriv")?;
    for leaf in pullback.leaves() {
        writeln!(
            out,
            "{},{},{},{}",
            leaf.word,
            float(leaf.point.re),
            float(leaf.point.im),
            float(leaf.log_deriv)
        )?;
    }
    Ok(())
}

pub fn write_atoms<W: Write>(out: &mut W, atoms: &ConformalAtoms) -> Result<()> {
    writeln!(out, "word,re,im,weight")?;
    for a in &atoms.atoms {
        writeln!(out, "{},{},{},{}", a.word, float(a.point.re), float(a.point.im), float(a.weight))?;
    }
    Ok(())
}

pub fn write_operator_values<W: Write>(out: &mut W, values: &[OperatorValue]) -> Result<()> {
    writeln!(out, "t,n,j,log_value")?;
    for v in values {
        writeln!(out, "{},{},{},{}", float(v.t), v.n, v.j, float(v.log_value))?;
    }
    Ok(())
}

/// Long format `n,t,a_n`, depth-major.
pub fn write_pressure<W: Write>(out: &mut W, curve: &PressureCurve) -> Result<()> {
    writeln!(out, "n,t,a_n")?;
    for n in curve.depths() {
        for (t, a) in curve.t_grid.iter().zip(curve.row(n)) {
            writeln!(out, "{},{},{}", n, float(*t), float(*a))?;
        }
    }
    Ok(())
}

pub fn write_roots<W: Write>(out: &mut W, roots: &[BowenZero]) -> Result<()> {
    writeln!(out, "which,t_star,uncertainty,n_window")?;
    for r in roots {
        writeln!(out, "{},{},{},{}", r.which, float(r.t_star), float(r.uncertainty), r.window)?;
    }
    Ok(())
}

/// `eps,count` followed by a `# slope=…,residual=…` summary line.
pub fn write_box_counts<W: Write>(out: &mut W, report: &BoxCountReport) -> Result<()> {
    writeln!(out, "eps,count")?;
    for (e, c) in report.epsilons.iter().zip(&report.counts) {
        writeln!(out, "{},{}", float(*e), float(*c))?;
    }
    writeln!(out, "# slope={},residual={}", float(report.slope), float(report.residual))?;
    Ok(())
}

pub fn write_sandwich<W: Write>(out: &mut W, reports: &[PerturbationReport]) -> Result<()> {
    writeln!(out, "x,n,t,s_n,cesaro,a_base,a_pert,middle,residual,leaf_residual,leaf_word")?;
    for (report, r) in reports.iter().flat_map(|rep| rep.records.iter().map(move |r| (rep, r))) {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{}",
            float(report.x),
            r.n,
            float(r.t),
            r.s_n,
            float(r.cesaro),
            float(r.a_base),
            float(r.a_pert),
            float(r.middle),
            float(r.residual),
            float(r.leaf_residual),
            r.leaf_word
        )?;
    }
    Ok(())
}

pub fn write_kink<W: Write>(out: &mut W, scans: &[KinkScan]) -> Result<()> {
    writeln!(
        out,
        "x,t,p_lower,p_upper,base_lower,base_upper,envelope_lower,envelope_upper,band_residual,spread,spread_floor,certified"
    )?;
    for (scan, r) in scans.iter().flat_map(|s| s.rows.iter().map(move |r| (s, r))) {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{},{}",
            float(r.x),
            float(scan.t),
            float(r.p_lower),
            float(r.p_upper),
            float(r.base_lower),
            float(r.base_upper),
            float(r.envelope_lower),
            float(r.envelope_upper),
            float(r.band_residual),
            float(r.spread()),
            float(r.spread_floor),
            r.certified()
        )?;
    }
    Ok(())
}

pub fn write_gap<W: Write>(out: &mut W, scan: &GapScan) -> Result<()> {
    writeln!(out, "x,h_lower,h_upper,gap,envelope_lower,envelope_upper,n_window")?;
    for r in &scan.rows {
        writeln!(
            out,
            "{},{},{},{},{},{},{}",
            float(r.x),
            float(r.h_lower()),
            float(r.h_upper()),
            float(r.gap()),
            float(r.envelope_lower),
            float(r.envelope_upper),
            scan.window
        )?;
    }
    Ok(())
}

pub fn write_motion<W: Write>(out: &mut W, reports: &[MotionReport]) -> Result<()> {
    writeln!(out, "x,depth,delta,max_displacement,displacement_bound,max_log_ratio,log_ratio_bound,passed")?;
    for r in reports {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            float(r.x),
            r.depth,
            float(r.delta),
            float(r.max_displacement),
            float(r.displacement_bound()),
            float(r.max_log_ratio),
            float(r.log_ratio_bound()),
            r.passed()
        )?;
    }
    Ok(())
}
