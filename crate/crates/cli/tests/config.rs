use peano_cli::config::{ExperimentConfig, Harness, Model, ModelSection};
use peano_core::Error;

const BASE: &str = r#"
[model]
type = "constant_1d"
gamma = 0.5
psi = [1.0, 0.0]
phi = [-8.0, -1.0]
beta = [1.0, 1.0]
regime = "attractive"
x0 = 0.25

[experiment]
harness = "attraction"
seed0 = 5
n_paths = 10
eps = [0.1, 0.05]
horizon = 1.0
"#;

#[test]
fn defaults_fill_in() {
    let cfg = ExperimentConfig::parse(BASE).unwrap();
    assert_eq!(cfg.experiment.harness, Harness::Attraction);
    assert_eq!(cfg.experiment.seed0().unwrap(), 5);
    assert_eq!(cfg.experiment.policy().unwrap().base_dt, 1e-3);
    assert_eq!(cfg.tolerances.residual_settle_floors, 2.0);
    assert!(cfg.output.csv.is_none());
    match cfg.model().unwrap() {
        Model::SmallNoise(m) => assert_eq!(m.x0, vec![0.25]),
        Model::TwoScale(_) => panic!("expected a small-noise model"),
    }
}

#[test]
fn missing_seed_is_a_config_error() {
    let err = ExperimentConfig::parse(&BASE.replace("seed0 = 5\n", "")).unwrap_err();
    assert!(matches!(err, Error::Config(_)));
    assert!(err.is_validation());
}

#[test]
fn general_small_noise_model() {
    let text = r#"
[model]
type = "small_noise"
d = 1
gamma = 0.5
x0 = [0.0]
regime = "repulsive"
psi = { plus = [{ family = "affine", constant = 1.0, coeffs = [0.5] }], minus = [{ family = "constant", value = 0.0 }] }
phi = { plus = [{ family = "bounded_smooth", offset = 3.0, scale = 1.0, coeffs = [1.0] }], minus = [{ family = "constant", value = 1.0 }] }
beta = { plus = [{ family = "constant", value = 1.0 }], minus = [{ family = "constant", value = 1.0 }] }
b = { plus = [{ family = "constant", value = 0.0 }], minus = [{ family = "constant", value = 0.0 }] }

[experiment]
harness = "selection"
seed0 = 1
n_paths = 10
eps = [0.01]
delta = [0.1]
"#;
    let cfg = ExperimentConfig::parse(text).unwrap();
    assert!(matches!(cfg.model, ModelSection::SmallNoise(_)));
    let Model::SmallNoise(m) = cfg.model().unwrap() else {
        panic!("expected a small-noise model");
    };
    assert!(m.validate(&cfg.validation).passed());
}

#[test]
fn gamma_error_names_the_interval() {
    let text = BASE.replace("gamma = 0.5", "gamma = 1.5");
    let cfg = ExperimentConfig::parse(&text).unwrap();
    let err = cfg.model().err().expect("gamma out of range");
    assert!(err.to_string().contains("exponent gamma = 1.5 must lie in the open interval (0, 1)"));
    assert!(err.is_validation());
}

#[test]
fn unknown_harness_rejected() {
    let err = ExperimentConfig::parse(&BASE.replace("\"attraction\"", "\"bogus\"")).unwrap_err();
    assert!(matches!(err, Error::Config(_)));
}
