//! Experiment harness for the density-matrix estimator: seeded Monte-Carlo
//! recovery runs, scaling sweeps, Bernstein tail verification, population
//! bound checks, and CSV emission.

pub mod bernstein;
pub mod csvio;
pub mod experiment;
pub mod popcheck;
pub mod runner;
pub mod seeding;
