//! One module per subcommand; each exposes its clap `Args` struct and a
//! `run` function returning the shared error type.

pub mod curate;
pub mod evaluate;
pub mod generate;
pub mod inspect;
pub mod train;
pub mod vocab;
