pub mod dic;
pub mod dvc;
pub mod fracture;
pub mod speckle;
