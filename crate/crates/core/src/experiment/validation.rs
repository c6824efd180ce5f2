//! Solver validation against reference cylinder and Taylor-Green data.

use std::fmt::Write as _;
use std::io::Write;
use std::time::Instant;

use crate::cfd::validation::{run_cylinder, taylor_green, CylinderCase, CylinderResult};
use crate::error::{Error, Result};

/// Which cases a validation run covers.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Preset {
    /// Fixed cylinder at Re = 100 on a coarse grid.
    Quick,
    /// Every reference case plus the two-grid convergence check.
    Full,
}

impl std::str::FromStr for Preset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "quick" => Ok(Self::Quick),
            "full" => Ok(Self::Full),
            other => Err(Error::Config(format!(
                "unknown preset {other:?} (expected quick or full)"
            ))),
        }
    }
}

/// Acceptance band of one measured quantity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Bound {
    /// `|measured - target| <= tol * |target|`.
    Relative {
        target: f64,
        tol: f64,
    },
    /// `|measured - target| <= tol`.
    Absolute {
        target: f64,
        tol: f64,
    },
    AtLeast(f64),
    AtMost(f64),
}

impl Bound {
    fn scaled(self, s: f64) -> Self {
        match self {
            Self::Relative { target, tol } => Self::Relative {
                target,
                tol: tol * s,
            },
            Self::Absolute { target, tol } => Self::Absolute {
                target,
                tol: tol * s,
            },
            b => b,
        }
    }

    /// Inclusive `(lower, upper)` limits.
    pub fn limits(&self) -> (f64, f64) {
        match *self {
            Self::Relative { target, tol } => {
                (target - tol * target.abs(), target + tol * target.abs())
            }
            Self::Absolute { target, tol } => (target - tol, target + tol),
            Self::AtLeast(v) => (v, f64::INFINITY),
            Self::AtMost(v) => (f64::NEG_INFINITY, v),
        }
    }

    pub fn target(&self) -> f64 {
        match *self {
            Self::Relative { target, .. } | Self::Absolute { target, .. } => target,
            Self::AtLeast(v) | Self::AtMost(v) => v,
        }
    }

    pub fn admits(&self, x: f64) -> bool {
        let (lo, hi) = self.limits();
        x.is_finite() && lo <= x && x <= hi
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CaseResult {
    pub case: String,
    pub quantity: String,
    pub measured: f64,
    pub bound: Bound,
    pub passed: bool,
    /// Wall time of the simulation that produced the value.
    pub seconds: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ValidationReport {
    pub preset: Preset,
    pub cases: Vec<CaseResult>,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.cases.iter().all(|c| c.passed)
    }

    pub fn failures(&self) -> impl Iterator<Item = &CaseResult> {
        self.cases.iter().filter(|c| !c.passed)
    }

    pub fn exit_code(&self) -> i32 {
        if self.passed() {
            0
        } else {
            1
        }
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record([
            "case", "quantity", "measured", "target", "lower", "upper", "passed", "seconds",
        ])
        .map_err(csv_err)?;
        for c in &self.cases {
            let (lo, hi) = c.bound.limits();
            w.write_record([
                c.case.clone(),
                c.quantity.clone(),
                c.measured.to_string(),
                c.bound.target().to_string(),
                lo.to_string(),
                hi.to_string(),
                c.passed.to_string(),
                format!("{:.1}", c.seconds),
            ])
            .map_err(csv_err)?;
        }
        w.flush()?;
        Ok(())
    }

    /// Plain-text table.
    pub fn render(&self) -> String {
        let mut s = String::new();
        for c in &self.cases {
            let (lo, hi) = c.bound.limits();
            let _ = writeln!(
                s,
                "{:<6} {:<24} {:<12} {:>10.4}  [{:.4}, {:.4}]  ({:.0} s)",
                if c.passed { "PASS" } else { "FAIL" },
                c.case,
                c.quantity,
                c.measured,
                lo,
                hi,
                c.seconds
            );
        }
        let status = if self.passed() {
            "all cases pass"
        } else {
            "validation FAILED"
        };
        let _ = writeln!(s, "{status} ({} cases)", self.cases.len());
        s
    }
}

pub(crate) fn csv_err(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::Format(format!("{other:?}")),
    }
}

/// Reference values for the cylinder cases.
pub mod targets {
    pub const CD_RE100: f64 = 1.342;
    pub const CL_RE100: f64 = 0.344;
    /// Strouhal numbers at Re = 80, 100, 150.
    pub const STROUHAL: [(f64, f64); 3] = [(80.0, 0.153), (100.0, 0.167), (150.0, 0.183)];
    pub const CL_OSC: f64 = 0.91;
    pub const CD_OSC: f64 = 1.71;
    /// In-line oscillation amplitude (diameters) of the lock-in case.
    pub const OSC_AMPLITUDE: f64 = 0.14;
    /// Forcing at twice the natural shedding frequency.
    pub const OSC_FREQUENCY: f64 = 2.0 * 0.167;
}

/// Grid and duration settings of each case.
#[derive(Debug, Clone, PartialEq)]
pub struct ValidationPlan {
    pub fixed_resolution: usize,
    /// End time of the Re = 100 fixed case, long enough for its statistics.
    pub fixed_t_end: f64,
    pub strouhal_resolution: usize,
    pub oscillating_resolution: usize,
    pub t_end: f64,
    pub t_transient: f64,
    /// Taylor-Green grids `n` and `2n`.
    pub taylor_green_n: usize,
}

impl ValidationPlan {
    pub fn quick() -> Self {
        Self {
            fixed_resolution: 16,
            fixed_t_end: 120.0,
            t_end: 120.0,
            t_transient: 60.0,
            ..Self::full()
        }
    }

    pub fn full() -> Self {
        Self {
            fixed_resolution: 32,
            fixed_t_end: 250.0,
            strouhal_resolution: 16,
            oscillating_resolution: 16,
            t_end: 150.0,
            t_transient: 70.0,
            taylor_green_n: 32,
        }
    }
}

/// Fixed cylinder at `re` with the plan's duration.
pub fn fixed_case(re: f64, resolution: usize, plan: &ValidationPlan) -> CylinderCase {
    CylinderCase {
        t_end: plan.t_end,
        t_transient: plan.t_transient,
        ..CylinderCase::fixed(re, resolution)
    }
}

/// Cylinder oscillating in line with the flow at twice its shedding
/// frequency.
pub fn oscillating_case(plan: &ValidationPlan) -> CylinderCase {
    CylinderCase {
        oscillation: Some((targets::OSC_AMPLITUDE, targets::OSC_FREQUENCY)),
        ..fixed_case(100.0, plan.oscillating_resolution, plan)
    }
}

/// Observed order of accuracy from errors on grids `h` and `h/2`.
pub fn observed_order(coarse: f64, fine: f64) -> f64 {
    (coarse / fine).log2()
}

struct Collector {
    cases: Vec<CaseResult>,
    scale: f64,
}

impl Collector {
    fn push(&mut self, case: &str, quantity: &str, measured: f64, bound: Bound, seconds: f64) {
        let bound = bound.scaled(self.scale);
        log::info!("{case} {quantity} = {measured:.5}");
        self.cases.push(CaseResult {
            case: case.to_string(),
            quantity: quantity.to_string(),
            measured,
            passed: bound.admits(measured),
            bound,
            seconds,
        });
    }

    fn strouhal(&mut self, case: &str, r: &CylinderResult, bound: Bound) -> f64 {
        let st = r.strouhal.clone().unwrap_or(f64::NAN);
        if let Err(e) = &r.strouhal {
            log::warn!("{case}: {e}");
        }
        self.push(case, "St", st, bound, r.seconds);
        st
    }
}

/// Run the preset's cases. Tolerance bands are multiplied by
/// `tolerance_scale`.
pub fn run_validation(preset: Preset, tolerance_scale: f64) -> Result<ValidationReport> {
    let plan = match preset {
        Preset::Quick => ValidationPlan::quick(),
        Preset::Full => ValidationPlan::full(),
    };
    run_plan(preset, &plan, tolerance_scale)
}

pub fn run_plan(
    preset: Preset,
    plan: &ValidationPlan,
    tolerance_scale: f64,
) -> Result<ValidationReport> {
    if !(tolerance_scale >= 0.0 && tolerance_scale.is_finite()) {
        return Err(Error::Config(format!(
            "tolerance scale {tolerance_scale} must be non-negative"
        )));
    }
    let mut c = Collector {
        cases: Vec::new(),
        scale: tolerance_scale,
    };
    let name = format!("re100-fixed-d{}", plan.fixed_resolution);
    let fixed = CylinderCase {
        t_end: plan.fixed_t_end,
        ..fixed_case(100.0, plan.fixed_resolution, plan)
    };
    let r = run_cylinder(&fixed)?;
    c.push(
        &name,
        "mean C_D",
        r.mean_cd,
        Bound::Relative {
            target: targets::CD_RE100,
            tol: 0.07,
        },
        r.seconds,
    );
    c.push(
        &name,
        "max C_L",
        r.max_cl,
        Bound::Relative {
            target: targets::CL_RE100,
            tol: 0.15,
        },
        r.seconds,
    );
    c.strouhal(
        &name,
        &r,
        Bound::Absolute {
            target: 0.167,
            tol: 0.01,
        },
    );
    c.push(
        &name,
        "max divergence",
        r.max_divergence,
        Bound::AtMost(1e-6),
        r.seconds,
    );
    if preset == Preset::Quick {
        return Ok(ValidationReport {
            preset,
            cases: c.cases,
        });
    }

    let mut sts = Vec::new();
    for (re, st) in targets::STROUHAL {
        let r = run_cylinder(&fixed_case(re, plan.strouhal_resolution, plan))?;
        let tol = if re >= 150.0 { 0.015 } else { 0.01 };
        let name = format!("re{re}-fixed-d{}", plan.strouhal_resolution);
        sts.push(c.strouhal(&name, &r, Bound::Absolute { target: st, tol }));
    }
    let increasing = sts.windows(2).all(|w| w[1] > w[0]);
    c.push(
        "strouhal-trend",
        "increasing",
        if increasing { 1.0 } else { 0.0 },
        Bound::AtLeast(1.0),
        0.0,
    );

    let r = run_cylinder(&oscillating_case(plan))?;
    let name = format!("re100-oscillating-d{}", plan.oscillating_resolution);
    c.push(
        &name,
        "max C_L",
        r.max_cl,
        Bound::Relative {
            target: targets::CL_OSC,
            tol: 0.15,
        },
        r.seconds,
    );
    c.push(
        &name,
        "mean C_D",
        r.mean_cd,
        Bound::Relative {
            target: targets::CD_OSC,
            tol: 0.10,
        },
        r.seconds,
    );

    let start = Instant::now();
    let n = plan.taylor_green_n;
    let period = 2.0 * std::f64::consts::PI;
    let coarse = taylor_green(n, 100.0, period, None)?;
    let fine = taylor_green(2 * n, 100.0, period, None)?;
    let secs = start.elapsed().as_secs_f64();
    let order = observed_order(coarse.velocity_error, fine.velocity_error);
    c.push("taylor-green", "order", order, Bound::AtLeast(1.8), secs);
    let div = coarse.max_divergence.max(fine.max_divergence);
    c.push(
        "taylor-green",
        "max divergence",
        div,
        Bound::AtMost(1e-6),
        secs,
    );
    Ok(ValidationReport {
        preset,
        cases: c.cases,
    })
}
