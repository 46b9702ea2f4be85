pub mod detector;
pub mod fock;
pub mod pipeline;
pub mod sdp;
pub mod certify;
