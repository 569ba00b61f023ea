pub mod conv;
pub mod deconv;
pub mod gru;
pub mod linear;
pub mod norm;
pub mod prelu;
pub mod shape;
