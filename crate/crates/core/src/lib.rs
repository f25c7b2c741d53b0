pub mod ablation;
pub mod bench;
pub mod cli;
pub mod fault;
pub mod netlist;
pub mod report;
pub mod sched;
pub mod sim;
pub mod stimulus;
pub mod taskgraph;
pub mod oracle;
