//! Exact references, synthetic data and closed-form bounds used to check the
//! sketches.

mod bounds;
mod gen;
mod jl;
mod kde;
mod nn;
mod twin;

pub use bounds::{ann_failure_bound, poisson_tail, poisson_thin_mean, turnstile_failure_bound};
pub use gen::{
    gen_gaussian_mixture_stream, gen_poisson_stream, unit_ball_volume, LabeledStream, MixtureSpec,
    MixtureStream, PoissonSpec,
};
pub use jl::JlIndex;
pub use kde::{exact_kde, pair_collision_rate, KDE_TRIALS};
pub use nn::{classify_crann, exact_knn, exact_nn, Verdict};
pub use twin::{CounterTwin, TwinEstimate};
