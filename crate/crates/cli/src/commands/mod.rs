pub mod build_grammar;
pub mod check;
pub mod evaluate;
pub mod extract;
pub mod summarize;
