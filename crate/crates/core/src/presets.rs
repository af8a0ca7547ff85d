//! Reference systems used by the experiments and tests.

use nalgebra::DMatrix;

use crate::error::Result;
use crate::numerics::SymMatrix;
use crate::riccati::LqSystem;

/// Penalty coefficients swept for the pendulum experiment.
pub const PENDULUM_GAMMAS: [f64; 5] = [1e5, 3e5, 1e6, 3e6, 1e7];

/// Discretized inverted pendulum on a cart (4 states, 1 input), `Q = 10 I`,
/// `R = 1`, `α = 0.985`.
pub fn pendulum(gamma: f64) -> Result<LqSystem> {
    let a = DMatrix::from_row_slice(
        4,
        4,
        &[
            1.0, 0.1, -0.0506, -0.0017, //
            0.0, 1.0, -1.0240, -0.0506, //
            0.0, 0.0, 1.0723, 0.1024, //
            0.0, 0.0, 1.4628, 1.0723,
        ],
    );
    let b = DMatrix::from_column_slice(4, 1, &[0.0106, 0.202, -0.007, -0.146]);
    let sigma = SymMatrix::from_rows(&[
        vec![2.0, 0.5, 0.0, 0.0],
        vec![0.5, 3.0, 0.0, 0.0],
        vec![0.0, 0.0, 2.0, 0.5],
        vec![0.0, 0.0, 0.5, 3.0],
    ])?;
    LqSystem::new(
        a,
        b,
        SymMatrix::from_diagonal(&[10.0; 4]),
        SymMatrix::identity(1),
        sigma,
        0.985,
        gamma,
    )
}

/// Scalar `A = B = Q = R = Σ = 1`, `α = 0.9`.
pub fn scalar_demo(gamma: f64) -> Result<LqSystem> {
    let one = || DMatrix::from_element(1, 1, 1.0);
    LqSystem::new(
        one(),
        one(),
        SymMatrix::identity(1),
        SymMatrix::identity(1),
        SymMatrix::identity(1),
        0.9,
        gamma,
    )
}

/// Uncontrolled scalar `A = 1`, `B = 0`, `Q = Σ = 1`, `α = 0.2`.
pub fn scalar_uncontrolled(gamma: f64) -> Result<LqSystem> {
    LqSystem::new(
        DMatrix::from_element(1, 1, 1.0),
        DMatrix::zeros(1, 1),
        SymMatrix::identity(1),
        SymMatrix::identity(1),
        SymMatrix::identity(1),
        0.2,
        gamma,
    )
}
