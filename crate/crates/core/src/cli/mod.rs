//! Config-driven experiment harness behind the `unicollab` binary.

pub mod config;
pub mod experiments;
pub mod output;

pub use config::{parse_seed_list, Experiment, Method, RunConfig};
pub use experiments::{
    run_detect, run_fig2, run_fig3, run_fig4, run_single_design, DesignRun, Fig2Row, Fig3Row,
    Fig4Point, Fig4Result, Fig4Summary, Table,
};
pub use output::run_experiment;
