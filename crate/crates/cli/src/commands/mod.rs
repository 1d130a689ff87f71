pub mod evaluate;
pub mod grid;
pub mod select;
pub mod synth;
