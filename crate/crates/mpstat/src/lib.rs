pub mod corpus;
pub mod expr;
pub mod format;
pub mod generate;
pub mod oracle;
pub mod report;
