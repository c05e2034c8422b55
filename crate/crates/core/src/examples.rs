//! Built-in plants: a point-kinetics nuclear fission model and a two-motor
//! hydraulic rotary system, both discretized with `T_s = 1 ms`.

use nalgebra::{DMatrix, DVector};

use crate::system::{BilinearSystem, CostSpec};

pub const SAMPLING_TIME: f64 = 0.001;

/// Delayed-neutron (precursor) fraction β.
pub const NUCLEAR_BETA: f64 = 0.157e-3;
/// Neutron generation time `l` in seconds.
pub const NUCLEAR_GENERATION_TIME: f64 = 8.36e-4;
/// Precursor decay constant λ in 1/s.
pub const NUCLEAR_DECAY: f64 = 0.0120;

#[derive(Debug, Clone)]
pub struct ExamplePlant {
    pub name: &'static str,
    pub system: BilinearSystem,
    pub cost: CostSpec,
    pub initial_state: DVector<f64>,
}

pub const NAMES: [&str; 2] = ["nuclear", "hydraulic"];

pub fn by_name(name: &str) -> Option<ExamplePlant> {
    match name {
        "nuclear" => Some(nuclear()),
        "hydraulic" => Some(hydraulic()),
        _ => None,
    }
}

/// Point neutron kinetics with the multiplication factor as the only input.
///
/// `A₁₁ = (1 − T_s)/l` is kept as published (≈ 1194.98).
pub fn nuclear() -> ExamplePlant {
    let ts = SAMPLING_TIME;
    let (beta, l, lambda) = (NUCLEAR_BETA, NUCLEAR_GENERATION_TIME, NUCLEAR_DECAY);
    let a = DMatrix::from_row_slice(2, 2, &[(1.0 - ts) / l, lambda * ts, 0.0, 1.0 - lambda * ts]);
    let b = DMatrix::zeros(2, 1);
    let d1 = DMatrix::from_column_slice(2, 1, &[(1.0 - beta) / l * ts, beta / l * ts]);
    let d2 = DMatrix::zeros(2, 1);
    let system = BilinearSystem::new(a, b, vec![d1, d2]).expect("nuclear plant is well-formed");
    let cost = CostSpec::new(
        DMatrix::from_diagonal(&DVector::from_column_slice(&[1.0, 0.0, 0.1])),
        0.9,
        2,
    )
    .expect("nuclear cost is valid");
    ExamplePlant {
        name: "nuclear",
        system,
        cost,
        initial_state: DVector::from_element(2, 1.0),
    }
}

/// Line pressure and two motor speeds driven by pump and motor displacements.
pub fn hydraulic() -> ExamplePlant {
    let a = DMatrix::from_diagonal(&DVector::from_column_slice(&[0.99997, -0.99997, 0.99997]));
    let b = DMatrix::from_diagonal(&DVector::from_column_slice(&[200.0, 6.0, 10.0]));
    let mut d1 = DMatrix::zeros(3, 3);
    d1[(2, 1)] = 0.03;
    d1[(2, 2)] = 0.03;
    let mut d2 = DMatrix::zeros(3, 3);
    d2[(0, 1)] = -0.00007;
    let mut d3 = DMatrix::zeros(3, 3);
    d3[(0, 2)] = -0.00007;
    let system =
        BilinearSystem::new(a, b, vec![d1, d2, d3]).expect("hydraulic plant is well-formed");
    let cost = CostSpec::new(DMatrix::identity(6, 6), 0.9, 3).expect("hydraulic cost is valid");
    ExamplePlant {
        name: "hydraulic",
        system,
        cost,
        initial_state: DVector::from_element(3, 1.0),
    }
}
