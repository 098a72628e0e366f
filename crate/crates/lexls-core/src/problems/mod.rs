//! Problem builders: the nine-level test hierarchy, Euler-dynamics
//! Jacobians, the cart-pole swing-up and random HLSPs.

mod cartpole;
mod dynamics;
mod random;
mod testfuncs;

pub use cartpole::{
    build_cartpole_hierarchy, cartpole_dynamics, CartPole, CartPoleDerivatives, CartPoleDynamicsBlock, CartPoleProblem,
    CartPoleSpec, Selection, TipTask, VariableBounds,
};
pub use dynamics::{
    assemble_dynamics_jacobian, random_dynamics_instance, random_dynamics_instance_with, DynamicsBlocks, DynamicsMode,
    StageBlocks,
};
pub use random::{random_hlsp, RandomHlspSpec};
pub use testfuncs::{
    build_test_hierarchy, mccormick, mccormick_local_minima, mccormick_offset_check, Regularization, ScalarBlock,
    TestFunction, TestHierarchySpec, TEST_N,
};
