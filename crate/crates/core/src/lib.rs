pub mod almostlaw;
pub mod freeword;
pub mod gapverify;
pub mod heights;
pub mod input;
pub mod numfield;
pub mod spectral;
