//! Safety verification of feedforward neural networks by set-boundary
//! reachability.
//!
//! When a network (or a suffix of it) is certified to be a homeomorphism
//! or an open map, the extremes of its image over a box are attained on
//! the box boundary, so only the boundary needs to be propagated by a
//! sound engine (interval bound propagation or zonotopes).

pub mod cli;
pub mod error;
pub mod geometry;
pub mod interval;
pub mod model;
pub mod oracle;
pub mod round;
pub mod topology;
pub mod verify;
pub mod zonotope;

pub use error::{Error, Result};
pub use geometry::{
    boundary_cells, contained_in_safe, faces, partition_box, partition_faces, Face, FaceSet,
    SafeSet, Side,
};
pub use interval::{
    act_deriv_interval, act_interval, affine_image, ibp_forward, ibp_output, interval_det,
    interval_jacobian, IBox, Interval, IntervalMatrix, LayerBounds,
};
pub use model::{activation_derivative, load_network, Activation, Layer, Network, NetworkDocument};
pub use oracle::{falsify, mc_reach, point_jacobian, SampleCloud};
pub use topology::{
    check_homeomorphism, check_open_map, classify_cells, find_open_suffix, matrix_rank,
    CellClassification, HomeoCertificate, HomeoVerdict, OpenMapCertificate, OpenMapVerdict,
};
pub use verify::{
    compare, reach, verify_auto, verify_entire, verify_invertible, verify_noninvertible,
    verify_openmap, Comparison, Engine, Method, Report, Schedule, Verdict, VerifyConfig,
};
pub use zonotope::{
    from_box, interval_hull, zono_affine, zono_forward, zono_sigmoid_tanh, Zonotope,
};
