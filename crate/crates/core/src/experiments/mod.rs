//! Simulation scenarios, metrics, the end-to-end pipeline and the trial
//! harness.

pub mod metrics;
pub mod pipeline;
pub mod presets;
pub mod scenarios;
pub mod trials;

pub use metrics::{delta_mse, estimate_elasticity, marketing_metrics, mse, MarketingMetrics};
pub use pipeline::{run_pipeline, PipelineOutput};
pub use presets::{run_preset_trials, Preset, PublicModel, PRESET_NAMES};
pub use scenarios::{gen_nonlinear, gen_price_sale, MarketScenario, NonlinearScenario};
pub use trials::{aggregate, run_trials, AggregateRow, MetricRow, MetricTable};
