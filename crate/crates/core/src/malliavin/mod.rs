//! First-variation operators, Malliavin derivatives and Clark–Ocone integrands.

mod clark_ocone;
mod flow;
mod functional;

pub use clark_ocone::{
    clark_ocone_integrand, inner_keys, integration_by_parts_check, reconstruct, IbpCheck, InnerBudget,
    IntegrandSource, Reconstruction,
};
pub use flow::{FirstVariationOperator, Flow, PathSegment};
pub use functional::{
    contract, ConstantFunctional, CurveFunction, ExponentialMartingale, LinearFunctional, SquaredBrownian,
    TerminalBrownian, TerminalCurveFunctional, WienerFunctional,
};

#[cfg(test)]
mod tests;
