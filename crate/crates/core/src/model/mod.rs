//! Distance-bounded network design programs: demands, allowed paths, and
//! convex-partitionable objectives.

mod instance;
mod objective;
mod paths;

pub use instance::{
    build_dsn_instance, build_dsn_instance_capped, build_spanner_instance,
    build_spanner_instance_capped, CpInstance, Demand, DemandSet, InstanceFile, PathFamily,
    DEFAULT_PATH_CAP,
};
pub use objective::{fractional_degrees, DegreeMode, Objective};
pub use paths::{enumerate_paths, enumerate_paths_capped, Path};
