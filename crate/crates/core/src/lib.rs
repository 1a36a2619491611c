pub mod annulus;
pub mod circle;
pub mod germ;
pub mod io;
pub mod numeric;
pub mod pipeline;
pub mod realization;
pub mod unfolding;
