//! Hierarchical cube manipulation with three fingers.
//!
//! A learned high-level policy picks fingertip contact points on a cube; a
//! model-based low-level controller (quintic trajectories, grasp-force QP,
//! joint PD plus inverse-dynamics feedforward) moves the cube along a goal
//! trajectory inside a penalty-contact rigid-body simulator.

pub mod config;
pub mod control;
pub mod env;
pub mod geom;
pub mod grasp;
pub mod kinematics;
pub mod linalg;
pub mod qp;
pub mod sac;
pub mod simulator;
pub mod train;
pub mod trajectory;
