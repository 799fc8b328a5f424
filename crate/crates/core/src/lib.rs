pub mod acoustics;
pub mod energetics;
pub mod env;
pub mod mdp_io;
pub mod mission;
pub mod ocean_env;
pub mod learnkit;
pub mod datasets;
pub mod algos;
pub mod harness;

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/acoustics.md")]
    mod acoustics {}
    #[doc = include_str!("../../../book/src/ocean.md")]
    mod ocean {}
    #[doc = include_str!("../../../book/src/energy.md")]
    mod energy {}
    #[doc = include_str!("../../../book/src/mission.md")]
    mod mission {}
    #[doc = include_str!("../../../book/src/observations.md")]
    mod observations {}
    #[doc = include_str!("../../../book/src/learning.md")]
    mod learning {}
    #[doc = include_str!("../../../book/src/datasets.md")]
    mod datasets {}
    #[doc = include_str!("../../../book/src/experiments.md")]
    mod experiments {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
