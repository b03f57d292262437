pub mod experiments;
pub mod report;
pub mod scenario;
pub mod series;
