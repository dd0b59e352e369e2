pub mod lp_oracle;
pub mod random_instance;
