//! Surfaces the decision points behind a code completion.
//!
//! The crate fetches a completion together with the top-k distribution at
//! every step, explains what each alternative token would change, highlights
//! the steps where a meaningful alternative was close, and regenerates the
//! rest of the completion after the user swaps a token.

pub mod analysis;
pub mod backend;
pub mod decoding;
pub mod expander;
pub mod lexer;
pub mod config;
pub mod session;
pub mod wiring;
