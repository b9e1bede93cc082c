pub mod bench;
pub mod bitvec;
pub mod cegis;
pub mod cle;
pub mod engine;
pub mod frontend;
pub mod logic;
pub mod rational;
pub mod solver;
pub mod suite;
