pub mod words;
pub mod tree;
pub mod perm;
pub mod quotients;
pub mod equations;
pub mod constraints;
pub mod goodpairs;
pub mod burnside;
pub mod store;
