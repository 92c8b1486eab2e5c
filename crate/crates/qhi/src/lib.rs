//! Dilogarithmic and quantum hyperbolic invariants of closed oriented
//! 3-manifolds from branched quasi-regular triangulations carrying
//! PSL(2,C)-valued cocycles.
//!
//! Pipeline: [`complex3`] triangulations and moves, [`idealizer`] cocycles and
//! cross-ratio moduli, [`decorations`] flattenings and charges, [`rogers`] the
//! classical invariant mod pi^2/6, [`qdilog`] the cyclic quantum dilogarithm
//! tensors and [`statesum`] their contraction into H_N.

pub mod bundle;
pub mod complex3;
pub mod decorations;
pub mod dilog;
pub mod idealizer;
pub mod lattice;
pub mod moebius;
pub mod qdilog;
pub mod rogers;
pub mod statesum;
pub mod verify;

pub use num_complex::Complex64;

pub use complex3::{
    apply_move, apply_move_traced, builtin, reverse_orientation, tet_sign, validate_triangulation, FacePairing, Move,
    MoveTrace, Triangulation, ValidationReport,
};
pub use decorations::{ChargeTriple, FlatteningTriple, GlobalCharge, GlobalFlattening};
pub use dilog::{congruent_mod, CoverPoint, PI2_6};
pub use idealizer::{Cocycle, ITriangulation, ModularTriple};
pub use moebius::{Mobius, Point};
pub use qdilog::{CurvePoint, CyclicParams, QTensor};
pub use rogers::InvariantValue;
pub use statesum::{ContractionPlan, DualGraph};
