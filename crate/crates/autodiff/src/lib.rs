//! Dense reverse-mode differentiation for small sentence encoders.
//!
//! Values are row-major matrices ([`Tensor`]). A [`Graph`] records every
//! operation applied during a forward pass and replays them in reverse in
//! [`Graph::backward`]. Trainable values live in a [`ParamStore`] that the
//! graph borrows, so a forward pass never copies parameters.
//!
//! ```
//! use relprobe_autodiff::{Graph, Mode, ParamStore, Tensor};
//!
//! let mut store = ParamStore::<f64>::new();
//! let w = store.add("w", Tensor::matrix(1, 2, vec![3.0, -1.0]).unwrap()).unwrap();
//! let mut g = Graph::new(&store, Mode::Eval);
//! let x = g.param(w);
//! let y = g.mul(x, x).unwrap();
//! let loss = g.sum(y);
//! let grads = g.backward(loss).unwrap();
//! assert_eq!(grads.get(w).unwrap().data(), &[6.0, -2.0]);
//! ```

mod checkpoint;
pub mod checks;
mod error;
mod gradcheck;
mod graph;
mod optim;
mod params;
mod scalar;
mod schedule;
mod tensor;

pub use checkpoint::{load_checkpoint, read_checkpoint, save_checkpoint, write_checkpoint, Checkpoint};
pub use error::{AutodiffError, Result};
pub use gradcheck::{gradcheck, GradcheckReport, DEFAULT_EPSILON};
pub use graph::{Graph, Mode, NodeId};
pub use optim::{glob_match, L2Group, OptimState, OptimizerKind};
pub use params::{Gradients, Param, ParamId, ParamStore};
pub use scalar::Scalar;
pub use schedule::Schedule;
pub use tensor::Tensor;
