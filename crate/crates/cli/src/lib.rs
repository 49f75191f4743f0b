pub mod commands;
pub mod gamefile;
pub mod report;
