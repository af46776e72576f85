use std::path::PathBuf;

use clap::{Args, Subcommand};

use peano_core::analysis::{
    exit_probability_quadrature, exit_time_bound, exit_time_limit_constant, gamma_asymptotic, invariant_density,
    scale_function, selection_probabilities, FrozenParams,
};
use peano_core::coeffs::Side;
use peano_core::experiments::{cell, Table};
use peano_core::Result;

use crate::run::append_csv;

/// Frozen coefficients on the two sides of the hyperplane.
#[derive(Debug, Clone, Args)]
pub struct FrozenArgs {
    #[arg(long, allow_negative_numbers = true)]
    pub gamma: f64,
    #[arg(long = "phi+", visible_alias = "phi-plus", allow_negative_numbers = true)]
    pub phi_plus: f64,
    #[arg(long = "phi-", visible_alias = "phi-minus", allow_negative_numbers = true)]
    pub phi_minus: f64,
    #[arg(long = "beta+", visible_alias = "beta-plus", default_value_t = 1.0, allow_negative_numbers = true)]
    pub beta_plus: f64,
    #[arg(long = "beta-", visible_alias = "beta-minus", default_value_t = 1.0, allow_negative_numbers = true)]
    pub beta_minus: f64,
}

impl FrozenArgs {
    fn params(&self) -> Result<FrozenParams> {
        FrozenParams::new(self.gamma, self.phi_plus, self.phi_minus, self.beta_plus, self.beta_minus)
    }

    fn pairs(&self) -> Vec<(&'static str, f64)> {
        vec![
            ("gamma", self.gamma),
            ("phi_plus", self.phi_plus),
            ("phi_minus", self.phi_minus),
            ("beta_plus", self.beta_plus),
            ("beta_minus", self.beta_minus),
        ]
    }
}

#[derive(Debug, Subcommand)]
pub enum Analysis {
    /// Selection probabilities p+ and p- of the repulsive regime.
    PSelect {
        #[command(flatten)]
        frozen: FrozenArgs,
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Averaged slow drift psi+ pi(y >= 0) + psi- pi(y < 0), attractive regime.
    PsiBar {
        #[command(flatten)]
        frozen: FrozenArgs,
        #[arg(long = "psi+", visible_alias = "psi-plus", allow_negative_numbers = true)]
        psi_plus: f64,
        #[arg(long = "psi-", visible_alias = "psi-minus", allow_negative_numbers = true)]
        psi_minus: f64,
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Half-line masses, widths and relaxation time of the invariant law.
    PiMass {
        #[command(flatten)]
        frozen: FrozenArgs,
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Scale function s(y); with --delta also the exit probability.
    Scale {
        #[command(flatten)]
        frozen: FrozenArgs,
        #[arg(long, allow_negative_numbers = true)]
        y: f64,
        #[arg(long)]
        eps: f64,
        #[arg(long, default_value_t = 0.0)]
        nu: f64,
        #[arg(long)]
        delta: Option<f64>,
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Exit-time bound v(delta) and its small-noise constant.
    ExitBound {
        #[arg(long)]
        gamma: f64,
        #[arg(long)]
        delta: f64,
        #[arg(long)]
        eps: f64,
        #[arg(long)]
        phi_min: f64,
        #[arg(long, default_value_t = 1.0)]
        beta_min: f64,
        #[arg(long, default_value_t = 1.0)]
        beta_max: f64,
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Quadrature of int_0^delta exp(-A z^(gamma+1)/eps^2) dz against its Gamma-function form.
    GammaAsym {
        #[arg(long)]
        a: f64,
        #[arg(long)]
        eps: f64,
        #[arg(long)]
        gamma: f64,
        #[arg(long)]
        delta: f64,
        #[arg(long)]
        csv: Option<PathBuf>,
    },
}

fn emit(name: &str, inputs: Vec<(&'static str, f64)>, outputs: Vec<(&'static str, f64)>, csv: &Option<PathBuf>) -> Result<()> {
    for (k, v) in &outputs {
        println!("{k} = {v}");
    }
    if let Some(path) = csv {
        let mut columns = vec!["analysis"];
        columns.extend(inputs.iter().chain(&outputs).map(|(k, _)| *k));
        let mut t = Table::new(&columns);
        let mut row = vec![name.to_string()];
        row.extend(inputs.iter().chain(&outputs).map(|(_, v)| cell(v)));
        t.push(row);
        append_csv(path, &t)?;
    }
    Ok(())
}

pub fn run(what: &Analysis) -> Result<()> {
    match what {
        Analysis::PSelect { frozen, csv } => {
            let p = selection_probabilities(&frozen.params()?)?;
            emit("p-select", frozen.pairs(), vec![("p_plus", p.plus), ("p_minus", p.minus)], csv)
        }
        Analysis::PsiBar {
            frozen,
            psi_plus,
            psi_minus,
            csv,
        } => {
            let d = invariant_density(&frozen.params()?)?;
            let value = psi_plus * d.mass(Side::Plus) + psi_minus * d.mass(Side::Minus);
            let mut inputs = frozen.pairs();
            inputs.extend([("psi_plus", *psi_plus), ("psi_minus", *psi_minus)]);
            emit("psi-bar", inputs, vec![("psi_bar", value)], csv)
        }
        Analysis::PiMass { frozen, csv } => {
            let d = invariant_density(&frozen.params()?)?;
            emit(
                "pi-mass",
                frozen.pairs(),
                vec![
                    ("mass_plus", d.mass(Side::Plus)),
                    ("mass_minus", d.mass(Side::Minus)),
                    ("width_plus", d.width(Side::Plus)),
                    ("width_minus", d.width(Side::Minus)),
                    ("relaxation_time", d.relaxation_time()),
                ],
                csv,
            )
        }
        Analysis::Scale {
            frozen,
            y,
            eps,
            nu,
            delta,
            csv,
        } => {
            let p = frozen.params()?;
            let mut outputs = vec![("s", scale_function(*y, &p, *eps, *nu)?)];
            let mut inputs = frozen.pairs();
            inputs.extend([("y", *y), ("eps", *eps), ("nu", *nu)]);
            if let Some(delta) = delta {
                inputs.push(("delta", *delta));
                outputs.push(("exit_probability_plus", exit_probability_quadrature(*delta, &p, *eps)?));
            }
            emit("scale", inputs, outputs, csv)
        }
        Analysis::ExitBound {
            gamma,
            delta,
            eps,
            phi_min,
            beta_min,
            beta_max,
            csv,
        } => {
            let v = exit_time_bound(*delta, *phi_min, *beta_min, *beta_max, *eps, *gamma)?;
            let a = phi_min / (beta_max * beta_max);
            let k2 = exit_time_limit_constant(a, *gamma) / (beta_min * beta_min);
            emit(
                "exit-bound",
                vec![
                    ("gamma", *gamma),
                    ("delta", *delta),
                    ("eps", *eps),
                    ("phi_min", *phi_min),
                    ("beta_min", *beta_min),
                    ("beta_max", *beta_max),
                ],
                vec![("v", v), ("k2", k2), ("limit", k2 * delta.powf(1.0 - gamma))],
                csv,
            )
        }
        Analysis::GammaAsym { a, eps, gamma, delta, csv } => {
            let g = gamma_asymptotic(*a, *eps, *gamma, *delta)?;
            emit(
                "gamma-asym",
                vec![("a", *a), ("eps", *eps), ("gamma", *gamma), ("delta", *delta)],
                vec![
                    ("quadrature", g.quadrature),
                    ("asymptotic", g.asymptotic),
                    ("relative_gap", g.relative_gap),
                ],
                csv,
            )
        }
    }
}
