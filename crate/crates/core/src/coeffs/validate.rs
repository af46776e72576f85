use std::fmt;

use serde::{Deserialize, Serialize};

use super::field::{CoefficientField, Side};
use super::jumps::norm;
use super::model::{DriftCondition, Regime, SmallNoiseModel, TwoScaleModel};

/// Sampling grid for assumption checks: `points_per_axis` equispaced points
/// on `[lo, hi]` along every coordinate of `x` and `y`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub points_per_axis: usize,
    pub lo: f64,
    pub hi: f64,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self {
            points_per_axis: 17,
            lo: -5.0,
            hi: 5.0,
        }
    }
}

impl GridSpec {
    pub fn axis(&self) -> Vec<f64> {
        match self.points_per_axis {
            0 => Vec::new(),
            1 => vec![0.5 * (self.lo + self.hi)],
            n => (0..n)
                .map(|i| self.lo + (self.hi - self.lo) * i as f64 / (n - 1) as f64)
                .collect(),
        }
    }

    /// Cartesian product of the axis with itself `dim` times.
    pub fn points(&self, dim: usize) -> Vec<Vec<f64>> {
        let axis = self.axis();
        let mut out = vec![Vec::with_capacity(dim)];
        for _ in 0..dim {
            out = out
                .into_iter()
                .flat_map(|p| {
                    axis.iter().map(move |v| {
                        let mut q = p.clone();
                        q.push(*v);
                        q
                    })
                })
                .collect();
        }
        out
    }
}

/// Point at which a check failed (or attained its worst margin).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Witness {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssumptionCheck {
    pub name: String,
    pub statement: String,
    pub passed: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub witness: Option<Witness>,
    /// Worst slack of the checked inequality; negative when violated.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub margin: Option<f64>,
}

impl AssumptionCheck {
    fn pass(name: &str, statement: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            statement: statement.into(),
            passed: true,
            witness: None,
            margin: None,
        }
    }

    fn fail(name: &str, statement: impl Into<String>, witness: Option<Witness>) -> Self {
        Self {
            name: name.into(),
            statement: statement.into(),
            passed: false,
            witness,
            margin: None,
        }
    }

    fn with_margin(mut self, margin: f64, witness: Option<Witness>) -> Self {
        self.margin = Some(margin);
        if witness.is_some() {
            self.witness = witness;
        }
        self
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ValidationReport {
    pub checks: Vec<AssumptionCheck>,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn failures(&self) -> impl Iterator<Item = &AssumptionCheck> {
        self.checks.iter().filter(|c| !c.passed)
    }

    pub fn get(&self, name: &str) -> Option<&AssumptionCheck> {
        self.checks.iter().find(|c| c.name == name)
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for c in &self.checks {
            write!(f, "[{}] {}: {}", if c.passed { "pass" } else { "FAIL" }, c.name, c.statement)?;
            if let Some(m) = c.margin {
                write!(f, " (margin {m:.6e})")?;
            }
            if let Some(w) = &c.witness {
                write!(f, " at x = {:?}, y = {:?}", w.x, w.y)?;
            }
            writeln!(f)?;
        }
        Ok(())
    }
}

/// Scans both branches of `field` on the grid; returns the first non-finite
/// point and the extreme absolute values seen.
fn scan_field(field: &CoefficientField, xs: &[Vec<f64>], ys: &[Vec<f64>]) -> (Option<Witness>, f64, f64, Witness) {
    let mut max_abs = 0.0f64;
    let mut min_abs = f64::INFINITY;
    let mut min_at = Witness { x: vec![], y: vec![] };
    let mut out = vec![0.0; field.dim()];
    for x in xs {
        for y in ys {
            for side in [Side::Plus, Side::Minus] {
                if field.eval_branch_into(side, x, y, &mut out).is_err() {
                    return (
                        Some(Witness {
                            x: x.clone(),
                            y: y.clone(),
                        }),
                        f64::NAN,
                        f64::NAN,
                        min_at,
                    );
                }
                let n = norm(&out);
                max_abs = max_abs.max(n);
                if n < min_abs {
                    min_abs = n;
                    min_at = Witness {
                        x: x.clone(),
                        y: y.clone(),
                    };
                }
            }
        }
    }
    (None, max_abs, min_abs, min_at)
}

fn bounded_check(name: &str, label: &str, field: &CoefficientField, xs: &[Vec<f64>], ys: &[Vec<f64>]) -> AssumptionCheck {
    let (bad, max_abs, min_abs, min_at) = scan_field(field, xs, ys);
    if let Some(w) = bad {
        return AssumptionCheck::fail(name, format!("{label} is finite on both branches"), Some(w));
    }
    if let Some(bound) = field.bounds.max_abs {
        let check = if max_abs <= bound {
            AssumptionCheck::pass(name, format!("|{label}| <= {bound} on the grid"))
        } else {
            AssumptionCheck::fail(name, format!("|{label}| <= {bound} on the grid"), None)
        };
        return check.with_margin(bound - max_abs, None);
    }
    if let Some(bound) = field.bounds.min_abs {
        if min_abs < bound {
            return AssumptionCheck::fail(name, format!("|{label}| >= {bound} on the grid"), Some(min_at))
                .with_margin(min_abs - bound, None);
        }
    }
    AssumptionCheck::pass(name, format!("{label} is finite and bounded by {max_abs:.6e} on the grid"))
}

fn nondegenerate_check(name: &str, label: &str, field: &CoefficientField, xs: &[Vec<f64>], ys: &[Vec<f64>]) -> AssumptionCheck {
    let (bad, max_abs, min_abs, min_at) = scan_field(field, xs, ys);
    if let Some(w) = bad {
        return AssumptionCheck::fail(name, format!("{label} is finite on both branches"), Some(w));
    }
    let floor = field.bounds.min_abs.unwrap_or(0.0);
    let statement = format!("{label} separated from zero (min |{label}| = {min_abs:.6e}, max {max_abs:.6e})");
    let ok = min_abs > floor && field.bounds.max_abs.map_or(true, |m| max_abs <= m);
    if ok {
        AssumptionCheck::pass(name, statement).with_margin(min_abs - floor, None)
    } else {
        AssumptionCheck::fail(name, statement, Some(min_at.clone())).with_margin(min_abs - floor, Some(min_at))
    }
}

impl SmallNoiseModel {
    /// Grid check of the structural assumptions. Failures are reported, not raised.
    pub fn validate(&self, grid: &GridSpec) -> ValidationReport {
        let mut report = ValidationReport::default();
        if let Err(e) = self.check_shape() {
            report.checks.push(AssumptionCheck::fail("shape", e.to_string(), None));
            return report;
        }
        let g = self.gamma.value();
        report.checks.push(AssumptionCheck::pass(
            "exponent-range",
            format!("gamma = {g} lies in (0, 1)"),
        ));
        let xs = grid.points(self.d);
        let ys = grid.points(1);
        if xs.is_empty() || ys.is_empty() {
            report
                .checks
                .push(AssumptionCheck::fail("grid", "validation grid is empty", None));
            return report;
        }
        report.checks.push(bounded_check("slow-drift-bounded", "psi", &self.psi, &xs, &ys));
        report.checks.push(bounded_check("fast-drift-bounded", "phi", &self.phi, &xs, &ys));
        report.checks.push(nondegenerate_check("fast-diffusion-nondegenerate", "beta", &self.beta, &xs, &ys));
        report.checks.push(bounded_check("slow-diffusion-bounded", "b", &self.b, &xs, &ys));

        // Regime sign on the hyperplane, both branches.
        let want = match self.regime {
            Regime::Repulsive => 1.0,
            Regime::Attractive => -1.0,
        };
        let mut worst = f64::INFINITY;
        let mut witness = None;
        for x in &xs {
            for side in [Side::Plus, Side::Minus] {
                match self.phi.eval_branch_scalar(side, x, 0.0) {
                    Ok(v) => {
                        if want * v < worst {
                            worst = want * v;
                            witness = Some(Witness {
                                x: x.clone(),
                                y: vec![0.0],
                            });
                        }
                    }
                    Err(_) => {
                        worst = f64::NEG_INFINITY;
                        witness = Some(Witness {
                            x: x.clone(),
                            y: vec![0.0],
                        });
                    }
                }
            }
        }
        let statement = match self.regime {
            Regime::Repulsive => "phi^+(x,0) > 0 and phi^-(x,0) > 0",
            Regime::Attractive => "phi^+(x,0) < 0 and phi^-(x,0) < 0",
        };
        let check = if worst > 0.0 {
            AssumptionCheck::pass("regime-sign", statement).with_margin(worst, None)
        } else {
            AssumptionCheck::fail("regime-sign", statement, witness.clone()).with_margin(worst, witness)
        };
        report.checks.push(check);
        report
    }
}

impl TwoScaleModel {
    pub fn validate(&self, grid: &GridSpec) -> ValidationReport {
        let mut report = ValidationReport::default();
        if let Err(e) = self.check_shape() {
            report.checks.push(AssumptionCheck::fail("shape", e.to_string(), None));
            return report;
        }
        let xs = grid.points(self.d);
        let ys = grid.points(self.k);
        if xs.is_empty() || ys.is_empty() {
            report
                .checks
                .push(AssumptionCheck::fail("grid", "validation grid is empty", None));
            return report;
        }
        report.checks.push(bounded_check("slow-drift-bounded", "a", &self.slow_drift, &xs, &ys));
        report
            .checks
            .push(bounded_check("slow-diffusion-bounded", "sigma", &self.slow_diffusion, &xs, &ys));
        report
            .checks
            .push(bounded_check("fast-diffusion-bounded", "Sigma", &self.fast_diffusion, &xs, &ys));
        report.checks.push(bounded_check("slow-jump-linear", "G", &self.slow_jump, &xs, &ys));
        report.checks.push(bounded_check("fast-jump-linear", "H", &self.fast_jump, &xs, &ys));

        match (self.slow_jumps.moments(self.moment_p), self.fast_jumps.moments(self.moment_p)) {
            (Ok((small, _)), Ok((_, mixed))) if small.is_finite() && mixed.is_finite() => {
                report.checks.push(AssumptionCheck::pass(
                    "jump-moments",
                    format!("int min(|u|^2,1) nu(du) = {small:.6e}; p-moment of mu = {mixed:.6e}"),
                ))
            }
            _ => report
                .checks
                .push(AssumptionCheck::fail("jump-moments", "jump measure moments are finite", None)),
        }

        let on_sphere = self.slow_jumps.mass_on_sphere(self.rho) + self.fast_jumps.mass_on_sphere(self.rho);
        report.checks.push(if on_sphere == 0.0 {
            AssumptionCheck::pass("cutoff-continuity", format!("no jump mass on |u| = rho = {}", self.rho))
        } else {
            AssumptionCheck::fail(
                "cutoff-continuity",
                format!("jump measures charge the sphere |u| = rho = {} with mass {on_sphere}", self.rho),
                None,
            )
        });

        // Dissipativity of the fast drift.
        let DriftCondition { kappa, c, r } = self.drift_condition;
        let statement = format!("A(x,y).y <= -{c} |y|^{} for |y| >= {r}", kappa + 1.0);
        let mut worst = f64::INFINITY;
        let mut witness = None;
        let mut tested = 0usize;
        let mut a = vec![0.0; self.k];
        for x in &xs {
            for y in &ys {
                let ny = norm(y);
                if ny < r {
                    continue;
                }
                tested += 1;
                let slack = match self.fast_drift_into(x, y, &mut a) {
                    Ok(()) => {
                        let ay: f64 = a.iter().zip(y).map(|(p, q)| p * q).sum();
                        -c * ny.powf(kappa + 1.0) - ay
                    }
                    Err(_) => f64::NEG_INFINITY,
                };
                if slack < worst {
                    worst = slack;
                    witness = Some(Witness {
                        x: x.clone(),
                        y: y.clone(),
                    });
                }
            }
        }
        let valid_constants = kappa > 0.0 && c > 0.0 && r > 0.0;
        report.checks.push(if !valid_constants {
            AssumptionCheck::fail("fast-drift-dissipative", format!("{statement} with kappa, c, r > 0"), None)
        } else if tested == 0 {
            AssumptionCheck::pass("fast-drift-dissipative", format!("{statement} (no grid point with |y| >= r)"))
        } else if worst >= 0.0 {
            AssumptionCheck::pass("fast-drift-dissipative", statement).with_margin(worst, witness)
        } else {
            AssumptionCheck::fail("fast-drift-dissipative", statement, witness.clone()).with_margin(worst, witness)
        });

        let balance = kappa + self.moment_p - 1.0;
        report.checks.push(
            if balance > 0.0 {
                AssumptionCheck::pass("moment-balance", format!("kappa + p = {} > 1", kappa + self.moment_p))
            } else {
                AssumptionCheck::fail("moment-balance", format!("kappa + p = {} > 1", kappa + self.moment_p), None)
            }
            .with_margin(balance, None),
        );
        report
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coeffs::field::ParametricFunction;
    use crate::coeffs::jumps::JumpMeasure;
    use crate::coeffs::model::DriftCondition;

    fn repulsive(phi_plus: f64, phi_minus: f64) -> SmallNoiseModel {
        SmallNoiseModel::constant_1d(0.5, (0.0, 0.0), (phi_plus, phi_minus), (1.0, 1.0), Regime::Repulsive).unwrap()
    }

    #[test]
    fn default_grid_contains_hyperplane() {
        let axis = GridSpec::default().axis();
        assert_eq!(axis.len(), 17);
        assert!(axis.contains(&0.0));
        assert_eq!(GridSpec::default().points(2).len(), 289);
    }

    #[test]
    fn repulsive_model_passes() {
        let report = repulsive(1.0, 2.0).validate(&GridSpec::default());
        assert!(report.passed(), "{report}");
    }

    #[test]
    fn wrong_sign_reports_witness_on_hyperplane() {
        let report = repulsive(-1.0, 2.0).validate(&GridSpec::default());
        assert!(!report.passed());
        let check = report.get("regime-sign").unwrap();
        assert!(!check.passed);
        let w = check.witness.as_ref().unwrap();
        assert_eq!(w.y, vec![0.0]);
        assert_eq!(w.x.len(), 1);
        assert_eq!(check.margin, Some(-1.0));
    }

    #[test]
    fn degenerate_diffusion_fails() {
        let m = SmallNoiseModel::constant_1d(0.5, (0.0, 0.0), (1.0, 1.0), (1.0, 0.0), Regime::Repulsive).unwrap();
        let report = m.validate(&GridSpec::default());
        assert!(!report.get("fast-diffusion-nondegenerate").unwrap().passed);
    }

    #[test]
    fn validation_is_deterministic() {
        let m = repulsive(-1.0, 3.0);
        let g = GridSpec {
            points_per_axis: 9,
            lo: -2.0,
            hi: 2.0,
        };
        assert_eq!(m.validate(&g), m.validate(&g));
    }

    fn linear_fast(kappa: f64, c: f64) -> TwoScaleModel {
        TwoScaleModel {
            d: 1,
            k: 1,
            slow_drift: CoefficientField::zeros(1),
            slow_diffusion: CoefficientField::zeros(1),
            slow_jump: CoefficientField::zeros(0),
            fast_drift: CoefficientField::symmetric(ParametricFunction::affine(0.0, vec![0.0, -1.0])),
            fast_drift_power: None,
            fast_diffusion: CoefficientField::constant(1.0, 1.0),
            fast_jump: CoefficientField::zeros(0),
            slow_jumps: JumpMeasure::none(0),
            fast_jumps: JumpMeasure::none(0),
            rho: 1.0,
            drift_condition: DriftCondition { kappa, c, r: 1.0 },
            moment_p: 2.0,
            residual: None,
            x0: vec![0.0],
            y0: vec![0.0],
        }
    }

    #[test]
    fn dissipativity_check_reports_margin() {
        // A(y) = -y gives A.y = -|y|^2: holds with kappa = 1 for c <= 1.
        let ok = linear_fast(1.0, 0.5).validate(&GridSpec::default());
        let check = ok.get("fast-drift-dissipative").unwrap();
        assert!(check.passed, "{ok}");
        // Grid spacing is 0.625, so the smallest sampled |y| >= 1 is 1.25:
        // slack 1.25^2 (1 - 0.5).
        assert!((check.margin.unwrap() - 0.781_25).abs() < 1e-12, "{:?}", check.margin);

        let bad = linear_fast(1.0, 2.0).validate(&GridSpec::default());
        let check = bad.get("fast-drift-dissipative").unwrap();
        assert!(!check.passed);
        // worst slack at |y| = 5: -2*25 + 25 = -25
        assert!((check.margin.unwrap() + 25.0).abs() < 1e-9);
        assert!(check.statement.contains("|y|^2"));

        let steep = linear_fast(1.5, 1.0).validate(&GridSpec::default());
        assert!(!steep.get("fast-drift-dissipative").unwrap().passed);
    }

    #[test]
    fn balance_and_cutoff_checks() {
        let mut m = linear_fast(0.2, 0.1);
        m.moment_p = 0.5;
        let report = m.validate(&GridSpec::default());
        assert!(!report.get("moment-balance").unwrap().passed);

        let mut m = linear_fast(1.0, 0.5);
        m.fast_jumps = JumpMeasure::single_atom(vec![1.0], 2.0);
        m.fast_jump = CoefficientField::constant(1.0, 1.0);
        let report = m.validate(&GridSpec::default());
        assert!(!report.get("cutoff-continuity").unwrap().passed);
        m.rho = 0.5;
        assert!(m.validate(&GridSpec::default()).passed());
    }
}
