pub mod cli;
pub mod determinants;
pub mod elliptic_core;
pub mod error;
pub mod genus2_szego;
pub mod modular;
pub mod partition;
pub mod quad;
pub mod szego_genus1;
