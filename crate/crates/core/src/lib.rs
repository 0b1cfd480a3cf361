//! Numerical laboratory for modified wave operators of long-range
//! Hartree-type equations: estimating functions, a periodic pseudospectral
//! grid, the asymptotic phase hierarchy, the transport pair, the auxiliary
//! system and the wave-operator maps.

pub mod auxsys;
pub mod estfun;
pub mod grid;
pub mod hierarchy;
pub mod identities;
pub mod quad;
pub mod scattering;
pub mod snapshot;
pub mod timegrid;
pub mod transport;
