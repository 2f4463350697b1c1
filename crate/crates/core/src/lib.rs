pub mod drg;
pub mod encoders;
pub mod eval;
pub mod nn;
pub mod pipeline;
pub mod sbn;
pub mod seq2seq;
pub mod synth;
pub mod text;
pub mod tfa;
