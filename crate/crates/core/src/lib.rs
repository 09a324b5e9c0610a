pub mod arith;
pub mod quadforms;
pub mod cmvalue;
pub mod gzrhs;
pub mod highprec;
pub mod hauptmodul;
pub mod hcp;
