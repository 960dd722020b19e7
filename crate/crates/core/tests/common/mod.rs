// Each test target uses a different subset.
#[allow(dead_code)]
pub mod brute;
#[allow(dead_code)]
pub mod corpus;
