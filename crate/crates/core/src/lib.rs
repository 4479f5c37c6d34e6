//! Geometry of finitely punctured spheres: ideal convex hulls, the dome and its
//! intrinsic metric, the nearest point retraction, and the Thurston,
//! quasihyperbolic and Poincaré densities, plus the suites that check the
//! inequalities tying them together.

pub mod confmetric;
pub mod dome;
pub mod error;
pub mod formulas;
pub mod gen;
pub mod geom;
pub mod hull;
pub mod npr;
pub mod quad;
pub mod suites;

pub use error::{Error, Result};
pub use geom::{ExtPoint, GenCircle, H3Point, MobiusMap, C64};
pub use hull::{build_hull, FiniteDomain, IdealPolyhedron};


pub use dome::{develop, DomePath, DomePoint, DomeSurface};
pub use gen::{gen_config, Family};
pub use npr::Domain;
pub use suites::{run_suite, SuiteConfig, VerifyReport};
