//! Fusion-aware static scheduling of real-time task DAGs.
//!
//! The crate models task graphs built from sensors, subscriptions and three
//! kinds of fusion tasks (timer-triggered, wait-for-all and immediate), expands
//! them into task instances over a multiple of the hyperperiod, and translates
//! the scheduling problem into a mixed-integer linear program whose optimum
//! minimises end-to-end metrics (reaction time, time disparity, age of
//! information, response time, makespan).
//!
//! Everything here is `no_std` + `alloc`. Solving the program, file formats and
//! the command line live in the `fusched` crate.

#![no_std]
#![forbid(unsafe_code)]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod dag;
pub mod eval;
pub mod expansion;
pub mod generator;
pub mod lp;
pub mod metrics;
pub mod model;
pub mod presets;
pub mod replay;
pub mod schedule;
pub mod time;

pub use dag::{Dag, DagError, DagSpec, ProducerMap, TaskSpec, TaskType};
pub use eval::{MetricsReport, eval_metrics};
pub use expansion::{InstanceId, InstanceTable};
pub use metrics::{Metric, MetricConfig};
pub use model::{IlpModel, ModelOptions};
pub use schedule::Schedule;
pub use time::Time;
