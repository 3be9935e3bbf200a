//! # gnet
//!
//! Sparse kernel networks `x ↦ Σₖ aₖ G(x, yₖ)` for functions that admit an
//! integral representation `f(x) = ∫ G(x, y) dτ(y)` against a (discrete) measure τ.
//!
//! The construction is entirely constructive:
//!
//! 1. a greedy ε-net on the support of τ ([`geometry`]),
//! 2. a measure-respecting partition of the support into cells of bounded
//!    diameter and positive mass ([`partition`]),
//! 3. an unbiased randomized Carathéodory reduction of τ on every cell that keeps
//!    all polynomial moments below a chosen degree ([`recombination`]),
//! 4. assembly of the kernel network and best-of-T selection over independent
//!    draws ([`synthesis`]).
//!
//! [`harness`] contains the experiment runners (rate, out-of-sample and
//! quadrature studies) used by the `gnet` command-line tool.
//!
//! ```
//! use gnet::{DiscreteMeasure, KernelSpec, PointSet, SpaceDescriptor, TargetFunction};
//! use gnet::synthesis::{synthesize, SynthesisConfig};
//!
//! let space = SpaceDescriptor::sphere(2).unwrap();
//! let points = PointSet::new(vec![vec![0.0, 0.0, 1.0]]).unwrap();
//! let target = TargetFunction::new(KernelSpec::absdot_power(0.0).unwrap(), DiscreteMeasure::uniform(points));
//! let cfg = SynthesisConfig { eval_grid_size: 64, ..SynthesisConfig::default() };
//! let (net, report) = synthesize(&space, &target, &cfg).unwrap();
//! assert_eq!(net.terms.len(), 1);
//! assert!(report.sup_error < 1e-12);
//! ```

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod geometry;
pub mod harness;
pub mod kernels;
pub mod measures;
pub mod partition;
pub mod recombination;
pub mod regression;
pub mod sampling;
pub mod synthesis;

pub use error::{Error, Result};
pub use geometry::{Net, PointSet, SpaceDescriptor, SpaceKind};
pub use kernels::{KernelSpec, RadialProfile, SmoothnessProfile, TargetFunction};
pub use measures::DiscreteMeasure;
pub use partition::{Partition, PartitionBuild, PartitionDiagnostics};
pub use recombination::{PolynomialBasis, QuadratureMeasure};
pub use synthesis::{GNetwork, SynthesisConfig, SynthesisReport};
pub use regression::{fit_slope, LineFit};

