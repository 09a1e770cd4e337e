// Copyright 2026 The coherence-lab Contributors
// SPDX-License-Identifier: Apache-2.0

//! Exact and time-local master-equation dynamics of two bosonic modes
//! coupled to structured thermal baths.

pub mod bath;
pub mod cli;
pub mod config;
pub mod diag;
pub mod meq;
pub mod error;
pub mod exact;
pub mod model;
pub mod moments;
pub mod ode;
pub mod quad;
pub mod table;

pub use bath::{Bath, BathResponse, BathSpec, Occupation, SpectralDensity, SuperOhmic};
pub use error::{Error, Result};
pub use model::{BathCoupling, MultiBathSpec, SystemSpec};
pub use moments::{MomentVector, SecondMoments};
