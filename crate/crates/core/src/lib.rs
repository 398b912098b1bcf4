//! Randers and Fermat metrics on coordinate charts, their geodesics and
//! non-symmetric distances, and the causal sets of standard stationary
//! spacetimes computed through them.
//!
//! Every routine is generic over the scalar type ([`Real`], implemented for
//! `f32` and `f64`) and the chart dimension `D`. The aliases at the bottom of
//! this file fix `f64` and the dimensions used by the shipped scenarios.

pub mod causality;
pub mod chart;
pub mod curve;
pub mod distance;
pub mod error;
pub mod field;
pub mod finsler;
pub mod geodesic;
pub mod invariants;
pub mod linalg;
pub mod ode;
pub mod scalar;
pub mod scenarios;
pub mod stationary;

pub use chart::{Chart, Covector, Point, TangentVector};
pub use curve::{hausdorff, SampledCurve};
pub use error::{Error, Result};
pub use field::{diff_scalar, eval_metric, euclidean, Field, GridSamples, MetricField, OneFormField, ScalarField};
pub use finsler::{
    curve_energy, curve_length, fundamental_tensor, randers_norm, validate, FinslerNorm, Orientation, RandersData,
    ValidationReport,
};
pub use scalar::Real;

pub use causality::{
    cauchy_development, cut_locus, distance_to_set, horizon, horizon_with, minimizing_segments, refinement_exponent,
    CutLocus, Development, Generator, HorizonGraph, RegionMask, SetDistance, SetDistanceEstimate, SetOrientation, Side,
};
pub use distance::{
    backward_distance, ball, closed_ball, forward_distance, forward_distance_with, heine_borel_diagnostic,
    length_metric_ds, symmetrized_distance, BallKind, Direction, DistanceEstimate, DistanceField, DistanceOptions,
    GridMask, HeineBorelReport, Level, LengthMetricEstimate, SymmetrizedDistance,
};
pub use geodesic::{
    exp_map, geodesic_acceleration, geodesic_ivp, geodesic_ivp_with, quadrature_length, reverse_exp_map, shoot_connect,
    shoot_connect_seeded, GeodesicOptions, GeodesicSolution, GeodesicStatus,
};
pub use invariants::{check_invariants, InvariantCheck, InvariantOptions};
pub use stationary::{
    arrival_time, chronological_future, chronological_past, fermat_from_stationary, in_chronological_future,
    induced_fermat_of_graph, integrate_null_geodesic, integrate_null_geodesic_with, project_and_compare, section_change,
    section_change_checked, section_change_direct, spacelike_section_check, stationary_from_randers, Event,
    NullGeodesic, ProjectionReport, SectionChangeReport, SectionReport, SpacetimeVector, StationaryData,
    TimeOrientation,
};

pub type Chart1 = Chart<f64, 1>;
pub type Chart2 = Chart<f64, 2>;
pub type Point1 = Point<f64, 1>;
pub type Point2 = Point<f64, 2>;
pub type Curve1 = SampledCurve<f64, 1>;
pub type Curve2 = SampledCurve<f64, 2>;
pub type RandersData1 = RandersData<f64, 1>;
pub type RandersData2 = RandersData<f64, 2>;
pub type Norm1 = FinslerNorm<f64, 1>;
pub type Norm2 = FinslerNorm<f64, 2>;
pub type Stationary1 = StationaryData<f64, 1>;
pub type Stationary2 = StationaryData<f64, 2>;
pub type Event1 = Event<f64, 1>;
pub type Event2 = Event<f64, 2>;
pub type Geodesic1 = GeodesicSolution<f64, 1>;
pub type Geodesic2 = GeodesicSolution<f64, 2>;
pub type Region1 = RegionMask<f64, 1>;
pub type Region2 = RegionMask<f64, 2>;
pub type Mask1 = GridMask<f64, 1>;
pub type Mask2 = GridMask<f64, 2>;
