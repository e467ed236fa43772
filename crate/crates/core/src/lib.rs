pub mod adversary;
pub mod estimation;
pub mod measurement;
pub mod netsim;
pub mod presets;
pub mod protocol;
pub mod quantum;
pub mod records;
pub mod rng;
pub mod security;
pub mod source;
pub mod theta;
