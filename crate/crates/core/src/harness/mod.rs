pub mod metrics;
pub mod scripts;
pub mod sim;
pub mod simulate;
pub mod sweep;
pub mod verify;

pub use metrics::{fit_linear2, PartyMetrics, RunMetrics};
pub use scripts::{parse_adversary, AdversaryScript, DropoutScript};
pub use sim::{SimOptions, SimOutcome, Transcript};
pub use simulate::{simulate, Network, Report, RunConfig, Scheme};
pub use sweep::{run_grid, scaling_fit, write_csv, Check, SweepGrid, SweepRow};
pub use verify::{run_suite, Suite};
