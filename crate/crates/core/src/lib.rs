//! Exact geometry of folded tori: half-translation surfaces over Q(√3),
//! straight-line flow, affine automorphisms, the periodic plane cover and a
//! mirror-cross billiard for comparison.

pub mod autos;
pub mod billiard;
pub mod cover;
pub mod error;
pub mod export;
pub mod flow;
pub mod qfield;
pub mod surface;
pub mod verify;

pub use error::{Error, Result};
pub use qfield::{FieldElem, Mat2, Point, Scalar, Vec2};
pub use surface::{canonical_t, build_flat_torus, fold, Surface, SurfacePoint};
