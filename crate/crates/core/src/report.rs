//! Human- and machine-readable renderings of analysis results.

use std::fmt::Write as _;
use std::io::Write;

use rayon::prelude::*;
use serde::Serialize;

use crate::demo::{DemoSystem, Reference, Tuning};
use crate::hbeta::{self, CrossCheck, FeasibleRegion, ScanSpec};
use crate::nsv::{self, ClassificationReport, FrequencyGrid, NsvCurve};
use crate::sim::SimTrace;
use crate::Error;

/// Six significant digits, fixed notation where it stays readable.
pub fn sig6(v: f64) -> String {
    if !v.is_finite() {
        return if v.is_nan() { "nan".into() } else if v > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if v == 0.0 {
        return "0".into();
    }
    let mag = v.abs().log10().floor() as i32;
    if (-4..6).contains(&mag) {
        format!("{:.*}", (5 - mag) as usize, v)
    } else {
        format!("{v:.5e}")
    }
}

fn yes(b: bool) -> &'static str {
    if b {
        "yes"
    } else {
        "no"
    }
}

fn list(v: &[f64]) -> String {
    if v.is_empty() {
        "∅".into()
    } else {
        v.iter().map(|x| sig6(*x)).collect::<Vec<_>>().join(", ")
    }
}

fn bullets<'a>(s: &mut String, items: impl Iterator<Item = &'a String>) {
    let mut first = true;
    for n in items {
        if first {
            s.push('\n');
            first = false;
        }
        let _ = writeln!(s, "- {n}");
    }
}

fn opt(v: Option<f64>) -> String {
    v.map_or("n/a".into(), sig6)
}

/// `omega,theta_deg` per grid sample; empty angle where `N` vanishes.
pub fn write_angle_csv<W: Write>(curve: &NsvCurve, out: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["omega", "theta_deg"])?;
    for s in &curve.samples {
        let theta = s.theta.map(|t| sig6(t.to_degrees())).unwrap_or_default();
        w.write_record([sig6(s.omega), theta])?;
    }
    w.flush()?;
    Ok(())
}

pub fn analysis_markdown(report: &ClassificationReport) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "# {}: {}\n", report.label, report.verdict);
    let _ = writeln!(s, "| quantity | value |\n|---|---|");
    let h = &report.hypotheses;
    let _ = writeln!(s, "| base linear loop stable | {} |", yes(h.base_linear_stable));
    let _ = writeln!(s, "| pole-zero cancellation in L | {} |", yes(h.pole_zero_cancellation));
    let _ = writeln!(s, "| origin pole order of C_L·G | {} |", report.lcal_origin_pole_order);
    if let Some(sets) = &report.sets {
        let _ = writeln!(s, "| M (rad/s) | {} |", list(&sets.m_set));
        let _ = writeln!(s, "| Q (rad/s) | {} |", list(&sets.q_set));
        let _ = writeln!(s, "| N_Υ > 0 on M | {} |", yes(sets.upsilon_positive_on_m));
        let _ = writeln!(s, "| N_χ > 0 on Q | {} |", yes(sets.chi_positive_on_q));
        let _ = writeln!(s, "| N_χ < 0 on Q | {} |", yes(sets.chi_negative_on_q));
        let _ = writeln!(s, "| I3 empty | {} |", yes(sets.i3_empty));
        let _ = writeln!(s, "| I4 empty | {} |", yes(sets.i4_empty));
        let _ = writeln!(s, "| δ1, Ψ1 | {}, {} |", opt(sets.delta1), opt(sets.psi1));
        let _ = writeln!(s, "| δ2, Ψ2 | {}, {} |", opt(sets.delta2), opt(sets.psi2));
        let _ = writeln!(
            s,
            "| θ1, θ2 (deg) | {}, {} |",
            sig6(sets.theta1.to_degrees()),
            sig6(sets.theta2.to_degrees())
        );
    }
    if let (Some(t1), Some(t2)) = (&report.type_i, &report.type_ii) {
        let _ = writeln!(s, "| Type I | {} |", yes(t1.holds));
        let _ = writeln!(s, "| Type II | {} |", yes(t2.holds));
    }
    let g = &report.grid;
    let _ = writeln!(
        s,
        "| grid | {} to {} rad/s, {} points |",
        sig6(g.w_min),
        sig6(g.w_max),
        g.points
    );
    bullets(&mut s, report.notes.iter());
    s
}

pub fn region_markdown(region: &FeasibleRegion, check: Option<CrossCheck>) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "# {}: H_β scan\n", region.label);
    let sp = &region.spec;
    let _ = writeln!(
        s,
        "β in [{}, {}], ρ' in [{}, {}], {}×{} grid",
        sig6(sp.beta_min),
        sig6(sp.beta_max),
        sig6(sp.rho_max * 1e-4),
        sig6(sp.rho_max),
        sp.resolution,
        sp.resolution
    );
    let _ = writeln!(
        s,
        "\nfeasible cells: {} of {}",
        region.feasible_points.len(),
        region.cells_tested
    );
    match region.ratio_interval {
        Some(r) => {
            let _ = writeln!(s, "ρ'/β interval (β > 0): {} < ρ'/β < {}", sig6(r.min), sig6(r.max));
        }
        None => {
            let _ = writeln!(s, "ρ'/β interval (β > 0): none");
        }
    }
    if let Some((a, b)) = region.direction_interval {
        let _ = writeln!(s, "feasible direction of (β, ρ'): {} to {} deg", sig6(a), sig6(b));
    }
    if let Some(c) = check {
        let _ = writeln!(s, "cross-check with NSV classification: {}", cross_check_text(c));
    }
    bullets(&mut s, region.convexity_violations.iter().chain(&region.notes));
    s
}

fn cross_check_text(c: CrossCheck) -> String {
    match c {
        CrossCheck::Consistent => "consistent".into(),
        CrossCheck::Skipped => "skipped (hypotheses failed)".into(),
        CrossCheck::Inconsistent {
            type_holds,
            region_nonempty,
        } => format!("INCONSISTENT (type holds: {type_holds}, feasible region: {region_nonempty})"),
    }
}

pub fn trace_markdown(label: &str, trace: &SimTrace) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "# {label}: simulation\n");
    let _ = writeln!(s, "| quantity | value |\n|---|---|");
    let _ = writeln!(s, "| horizon (s) | {} |", sig6(trace.meta.horizon));
    let _ = writeln!(s, "| gamma | {} |", sig6(trace.meta.gamma));
    let _ = writeln!(s, "| resets | {} |", trace.resets.len());
    if let Some(r) = trace.resets.first() {
        let _ = writeln!(s, "| first reset (s) | {} |", sig6(r.t));
    }
    let emax = trace.resets.iter().map(|r| r.e.abs()).fold(0.0, f64::max);
    let _ = writeln!(s, "| max abs e at resets | {} |", sig6(emax));
    let _ = writeln!(s, "| final y | {} |", sig6(*trace.y.last().unwrap_or(&0.0)));
    let _ = writeln!(s, "| max y | {} |", sig6(trace.y.iter().copied().fold(f64::NEG_INFINITY, f64::max)));
    let _ = writeln!(s, "| max state norm | {} |", sig6(trace.max_state_norm()));
    let _ = writeln!(s, "| integrator | {} |", trace.meta.method);
    if trace.meta.in_band_rearms > 0 {
        let _ = writeln!(
            s,
            "\n- {} resets were re-armed by the dwell timer with e inside the leave band",
            trace.meta.in_band_rearms
        );
    }
    s
}

#[derive(Debug, Clone, Serialize)]
pub struct DemoRow {
    pub system: DemoSystem,
    pub tuning: Tuning,
    pub report: ClassificationReport,
    pub region: FeasibleRegion,
    pub cross_check: CrossCheck,
    pub reference: Reference,
    pub notes: Vec<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct DemoSummary {
    pub rows: Vec<DemoRow>,
}

/// Classifies and scans all five benchmark loops in parallel.
pub fn run_demo_all(grid: &FrequencyGrid, spec: &ScanSpec) -> Result<DemoSummary, Error> {
    let rows = DemoSystem::ALL
        .par_iter()
        .map(|&demo| demo_row(demo, grid, spec))
        .collect::<Result<Vec<_>, Error>>()?;
    Ok(DemoSummary { rows })
}

fn demo_row(demo: DemoSystem, grid: &FrequencyGrid, spec: &ScanSpec) -> Result<DemoRow, Error> {
    let sys = demo.system();
    let report = nsv::theorem1_verdict(&sys, grid)?;
    let region = hbeta::scan_system(&sys, spec)?;
    let cross_check = hbeta::cross_check(&report, &region);
    let reference = demo.reference();
    let mut notes = Vec::new();
    if let Some(sets) = &report.sets {
        let (d, p) = (sets.delta1.unwrap_or(0.0), sets.psi1.unwrap_or(f64::INFINITY));
        if (d - reference.delta1).abs() > 0.02 || (p - reference.psi1).abs() > 0.02 {
            notes.push(format!(
                "δ1, Ψ1 = {}, {} differ from the reference {}, {}",
                sig6(d),
                sig6(p),
                sig6(reference.delta1),
                sig6(reference.psi1)
            ));
        }
    }
    if let Some(r) = region.ratio_interval {
        let off = |a: f64, b: f64| (a - b).abs() > 0.05 * b;
        match reference.ratio_max {
            None => notes.push(format!(
                "reference upper ρ'/β bound is unreadable (8.7.94); computed {}",
                sig6(r.max)
            )),
            Some(max) if off(r.max, max) || off(r.min, reference.ratio_min) => notes.push(format!(
                "ρ'/β interval ({}, {}) differs from the reference ({}, {})",
                sig6(r.min),
                sig6(r.max),
                sig6(reference.ratio_min),
                sig6(max)
            )),
            Some(_) => {}
        }
        if reference.ratio_max.is_none() && (r.min - reference.ratio_min).abs() > 0.05 * reference.ratio_min {
            notes.push(format!(
                "lower ρ'/β bound {} differs from the reference {}",
                sig6(r.min),
                sig6(reference.ratio_min)
            ));
        }
    }
    Ok(DemoRow {
        system: demo,
        tuning: demo.tuning(),
        report,
        region,
        cross_check,
        reference,
        notes,
    })
}

pub fn demo_markdown(summary: &DemoSummary) -> String {
    let mut s = String::new();
    let names: Vec<String> = summary.rows.iter().map(|r| r.system.to_string()).collect();
    let _ = writeln!(s, "| | {} |", names.join(" | "));
    let _ = writeln!(s, "|---|{}", "---|".repeat(names.len()));
    let row = |s: &mut String, label: &str, f: &dyn Fn(&DemoRow) -> String| {
        let cells: Vec<String> = summary.rows.iter().map(f).collect();
        let _ = writeln!(s, "| {label} | {} |", cells.join(" | "));
    };
    let range = |v: &[f64]| match (v.first(), v.last()) {
        (Some(a), Some(b)) => format!("{}-{}", sig6(*a), sig6(*b)),
        _ => "∅".into(),
    };
    row(&mut s, "pole at origin", &|r| yes(r.report.lcal_origin_pole_order > 0).into());
    row(&mut s, "M (rad/s)", &|r| r.report.sets.as_ref().map_or("n/a".into(), |x| range(&x.m_set)));
    row(&mut s, "Q (rad/s)", &|r| r.report.sets.as_ref().map_or("n/a".into(), |x| range(&x.q_set)));
    row(&mut s, "sign N_Υ on M", &|r| {
        r.report.sets.as_ref().map_or("n/a", |x| if x.upsilon_positive_on_m { "+" } else { "-" }).into()
    });
    row(&mut s, "sign N_χ on Q", &|r| {
        r.report.sets.as_ref().map_or("n/a", |x| if x.chi_positive_on_q { "+" } else { "-" }).into()
    });
    row(&mut s, "I3", &|r| {
        r.report.sets.as_ref().map_or("n/a", |x| if x.i3_empty { "∅" } else { "non-empty" }).into()
    });
    row(&mut s, "δ1 < Ψ1", &|r| {
        r.report.sets.as_ref().map_or("n/a".into(), |x| format!("{} < {}", opt(x.delta1), opt(x.psi1)))
    });
    row(&mut s, "θ1, θ2 (deg)", &|r| {
        r.report.sets.as_ref().map_or("n/a".into(), |x| {
            format!("{}, {}", sig6(x.theta1.to_degrees()), sig6(x.theta2.to_degrees()))
        })
    });
    row(&mut s, "type", &|r| {
        match (r.report.type_i(), r.report.type_ii()) {
            (true, true) => "(I), (II)",
            (true, false) => "(I)",
            (false, true) => "(II)",
            _ => "none",
        }
        .into()
    });
    row(&mut s, "verdict", &|r| r.report.verdict.to_string());
    row(&mut s, "ρ'/β (β > 0)", &|r| {
        r.region
            .ratio_interval
            .map_or("none".into(), |i| format!("{} < ρ'/β < {}", sig6(i.min), sig6(i.max)))
    });
    row(&mut s, "reference ρ'/β", &|r| {
        let max = r.reference.ratio_max.map_or("?".into(), sig6);
        format!("{} < ρ'/β < {}", sig6(r.reference.ratio_min), max)
    });
    row(&mut s, "cross-check", &|r| cross_check_text(r.cross_check));
    let notes: Vec<String> = summary
        .rows
        .iter()
        .flat_map(|r| r.notes.iter().chain(&r.report.notes).map(move |n| format!("{}: {n}", r.system)))
        .collect();
    bullets(&mut s, notes.iter());
    s
}
